//! Scalar rate functions `f(t)` multiplying the static generator pieces.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::expr::{self, Expr};
use crate::error::{Error, Result};

/// Absolute tolerance for quadrature of expression rates.
pub const QUADRATURE_TOL: f64 = 1e-10;
const MAX_DEPTH: usize = 48;

#[derive(Debug, Clone, PartialEq)]
pub enum RateFunction {
    Constant(f64),
    Expression { source: String, expr: Expr },
    Preset(RatePreset),
}

/// Parametrized rates with closed-form antiderivatives.
#[derive(Debug, Clone, PartialEq)]
pub enum RatePreset {
    /// `amplitude · exp(−rate · t)`
    ExpDecay { amplitude: f64, rate: f64 },
    /// `offset + amplitude · sin(frequency · t)`
    Sinusoidal { offset: f64, amplitude: f64, frequency: f64 },
    /// `Σ coeff · f(t)`
    Combination(Vec<(f64, RateFunction)>),
}

/// Parse user text. Expressions free of `t` collapse to constants.
pub fn parse_rate_expression(text: &str) -> Result<RateFunction> {
    let e = expr::parse(text)?;
    if e.is_constant() {
        let v = e.eval(0.0);
        if !v.is_finite() {
            return Err(Error::RateEvaluation {
                t: 0.0,
                message: format!("constant expression {text:?} is not finite"),
            });
        }
        return Ok(RateFunction::Constant(v));
    }
    Ok(RateFunction::Expression {
        source: text.to_string(),
        expr: e,
    })
}

impl RateFunction {
    pub fn constant(value: f64) -> Self {
        RateFunction::Constant(value)
    }

    /// Keep the expression form even when it is `t`-free.
    pub fn expression(text: &str) -> Result<Self> {
        Ok(RateFunction::Expression {
            source: text.to_string(),
            expr: expr::parse(text)?,
        })
    }

    pub fn exp_decay(amplitude: f64, rate: f64) -> Self {
        RateFunction::Preset(RatePreset::ExpDecay { amplitude, rate })
    }

    pub fn sinusoidal(offset: f64, amplitude: f64, frequency: f64) -> Self {
        RateFunction::Preset(RatePreset::Sinusoidal {
            offset,
            amplitude,
            frequency,
        })
    }

    /// `Σ cᵢ fᵢ`, folded to a constant when every part is constant.
    pub fn linear_combination(parts: &[(f64, &RateFunction)]) -> Self {
        if parts.iter().all(|(_, r)| matches!(r, RateFunction::Constant(_))) {
            let v = parts
                .iter()
                .map(|(c, r)| match r {
                    RateFunction::Constant(x) => c * x,
                    _ => unreachable!(),
                })
                .sum();
            return RateFunction::Constant(v);
        }
        RateFunction::Preset(RatePreset::Combination(
            parts.iter().map(|(c, r)| (*c, (*r).clone())).collect(),
        ))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::linear_combination(&[(factor, self)])
    }

    fn eval_raw(&self, t: f64) -> f64 {
        match self {
            RateFunction::Constant(v) => *v,
            RateFunction::Expression { expr, .. } => expr.eval(t),
            RateFunction::Preset(p) => match p {
                RatePreset::ExpDecay { amplitude, rate } => amplitude * (-rate * t).exp(),
                RatePreset::Sinusoidal {
                    offset,
                    amplitude,
                    frequency,
                } => offset + amplitude * (frequency * t).sin(),
                RatePreset::Combination(parts) => parts.iter().map(|(c, r)| c * r.eval_raw(t)).sum(),
            },
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let v = self.eval_raw(t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::RateEvaluation {
                t,
                message: format!("{} evaluates to {v}", self.describe()),
            })
        }
    }

    pub fn has_closed_form(&self) -> bool {
        match self {
            RateFunction::Constant(_) => true,
            RateFunction::Expression { expr, .. } => expr.is_constant(),
            RateFunction::Preset(RatePreset::Combination(parts)) => parts.iter().all(|(_, r)| r.has_closed_form()),
            RateFunction::Preset(_) => true,
        }
    }

    /// `∫₀ᵗ f`, closed form where available, adaptive Simpson otherwise.
    pub fn integral(&self, t: f64) -> Result<f64> {
        match self {
            RateFunction::Constant(v) => Ok(v * t),
            RateFunction::Expression { expr, .. } if expr.is_constant() => Ok(self.eval(0.0)? * t),
            RateFunction::Expression { .. } => integrate(|s| self.eval(s), 0.0, t, QUADRATURE_TOL),
            RateFunction::Preset(p) => match p {
                RatePreset::ExpDecay { amplitude, rate } => {
                    if *rate == 0.0 {
                        Ok(amplitude * t)
                    } else {
                        Ok(amplitude * (-(-rate * t).exp_m1()) / rate)
                    }
                }
                RatePreset::Sinusoidal {
                    offset,
                    amplitude,
                    frequency,
                } => {
                    if *frequency == 0.0 {
                        Ok(offset * t)
                    } else {
                        Ok(offset * t + amplitude * (1.0 - (frequency * t).cos()) / frequency)
                    }
                }
                RatePreset::Combination(parts) => {
                    let mut sum = 0.0;
                    for (c, r) in parts {
                        sum += c * r.integral(t)?;
                    }
                    Ok(sum)
                }
            },
        }
    }

    /// Long-time average `lim F(t)/t` when `F(t) − slope·t` is provably
    /// bounded; `None` for quadrature-backed or exponentially growing rates.
    pub fn asymptotic_slope(&self) -> Option<f64> {
        match self {
            RateFunction::Constant(v) => Some(*v),
            RateFunction::Expression { expr, .. } if expr.is_constant() => Some(expr.eval(0.0)),
            RateFunction::Expression { .. } => None,
            RateFunction::Preset(p) => match p {
                RatePreset::ExpDecay { amplitude, rate } => {
                    if *rate > 0.0 || *amplitude == 0.0 {
                        Some(0.0)
                    } else if *rate == 0.0 {
                        Some(*amplitude)
                    } else {
                        None
                    }
                }
                RatePreset::Sinusoidal { offset, .. } => Some(*offset),
                RatePreset::Combination(parts) => {
                    let mut sum = 0.0;
                    for (c, r) in parts {
                        sum += c * r.asymptotic_slope()?;
                    }
                    Some(sum)
                }
            },
        }
    }

    /// Structurally zero: the rate vanishes for every `t` by construction.
    pub fn is_identically_zero(&self) -> bool {
        match self {
            RateFunction::Constant(v) => *v == 0.0,
            RateFunction::Expression { expr, .. } => expr.is_constant() && expr.eval(0.0) == 0.0,
            RateFunction::Preset(RatePreset::ExpDecay { amplitude, .. }) => *amplitude == 0.0,
            RateFunction::Preset(RatePreset::Sinusoidal {
                offset, amplitude, ..
            }) => *offset == 0.0 && *amplitude == 0.0,
            RateFunction::Preset(RatePreset::Combination(parts)) => {
                parts.iter().all(|(c, r)| *c == 0.0 || r.is_identically_zero())
            }
        }
    }

    /// Split into `(shape, multiplier)` so that proportional rates share a
    /// shape. All constants share the unit shape.
    pub(crate) fn shape(&self) -> (RateFunction, f64) {
        match self {
            RateFunction::Constant(v) => (RateFunction::Constant(1.0), *v),
            RateFunction::Expression { expr, .. } if expr.is_constant() => {
                (RateFunction::Constant(1.0), expr.eval(0.0))
            }
            RateFunction::Preset(RatePreset::Combination(parts)) if parts.len() == 1 => {
                let (c, inner) = &parts[0];
                let (shape, m) = inner.shape();
                (shape, c * m)
            }
            other => (other.clone(), 1.0),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            RateFunction::Constant(v) => format!("{v}"),
            RateFunction::Expression { source, .. } => source.clone(),
            RateFunction::Preset(RatePreset::ExpDecay { amplitude, rate }) => format!("{amplitude}*exp(-{rate}*t)"),
            RateFunction::Preset(RatePreset::Sinusoidal {
                offset,
                amplitude,
                frequency,
            }) => format!("{offset} + {amplitude}*sin({frequency}*t)"),
            RateFunction::Preset(RatePreset::Combination(parts)) => parts
                .iter()
                .map(|(c, r)| format!("{c}*({})", r.describe()))
                .collect::<Vec<_>>()
                .join(" + "),
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(RateDoc::from(self)).expect("rate documents serialize")
    }
}

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine(
    f: &impl Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm)?, f(rm)?);
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Quadrature { a, b });
    }
    Ok(refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`. The interval
/// is pre-split into unit-length panels so oscillatory integrands are
/// resolved before the error estimate is trusted.
pub fn integrate(f: impl Fn(f64) -> Result<f64>, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let panels = ((b - a).abs().ceil() as usize).max(1);
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let hi = if p + 1 == panels { b } else { lo + h };
        let (fa, fb) = (f(lo)?, f(hi)?);
        let fm = f(0.5 * (lo + hi))?;
        let whole = simpson(fa, fm, fb, lo, hi);
        sum += refine(&f, lo, hi, fa, fm, fb, whole, tol / panels as f64, MAX_DEPTH)?;
    }
    Ok(sum)
}

/// JSON form: `{"kind":"constant","value":x} | {"kind":"expr","expr":"..."}
/// | {"kind":"preset","name":"...","params":{...}}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RateDoc {
    Constant { value: f64 },
    Expr { expr: String },
    Preset { name: String, params: Value },
}

impl From<&RateFunction> for RateDoc {
    fn from(r: &RateFunction) -> Self {
        match r {
            RateFunction::Constant(v) => RateDoc::Constant { value: *v },
            RateFunction::Expression { source, .. } => RateDoc::Expr { expr: source.clone() },
            RateFunction::Preset(RatePreset::ExpDecay { amplitude, rate }) => RateDoc::Preset {
                name: "exp_decay".into(),
                params: json!({ "amplitude": amplitude, "rate": rate }),
            },
            RateFunction::Preset(RatePreset::Sinusoidal {
                offset,
                amplitude,
                frequency,
            }) => RateDoc::Preset {
                name: "sinusoidal".into(),
                params: json!({ "offset": offset, "amplitude": amplitude, "frequency": frequency }),
            },
            RateFunction::Preset(RatePreset::Combination(parts)) => RateDoc::Preset {
                name: "combination".into(),
                params: json!({
                    "terms": parts
                        .iter()
                        .map(|(c, r)| json!({ "coeff": c, "rate": r.to_json() }))
                        .collect::<Vec<_>>()
                }),
            },
        }
    }
}

fn schema(path: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

fn number_param(params: &Value, key: &str, path: &str) -> Result<f64> {
    params
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| schema(&format!("{path}.params.{key}"), "missing or non-numeric parameter"))
}

impl RateDoc {
    /// Convert to a rate function; `path` prefixes diagnostics.
    pub fn to_rate(&self, path: &str) -> Result<RateFunction> {
        match self {
            RateDoc::Constant { value } => Ok(RateFunction::Constant(*value)),
            RateDoc::Expr { expr } => RateFunction::expression(expr)
                .map_err(|e| schema(&format!("{path}.expr"), e.to_string())),
            RateDoc::Preset { name, params } => match name.as_str() {
                "exp_decay" => Ok(RateFunction::exp_decay(
                    number_param(params, "amplitude", path)?,
                    number_param(params, "rate", path)?,
                )),
                "sinusoidal" => Ok(RateFunction::sinusoidal(
                    number_param(params, "offset", path)?,
                    number_param(params, "amplitude", path)?,
                    number_param(params, "frequency", path)?,
                )),
                "combination" => {
                    let terms = params
                        .get("terms")
                        .and_then(Value::as_array)
                        .ok_or_else(|| schema(&format!("{path}.params.terms"), "expected an array"))?;
                    let mut parts = Vec::with_capacity(terms.len());
                    for (i, term) in terms.iter().enumerate() {
                        let tpath = format!("{path}.params.terms[{i}]");
                        let coeff = number_param_direct(term, "coeff", &tpath)?;
                        let doc: RateDoc = serde_json::from_value(term.get("rate").cloned().unwrap_or(Value::Null))
                            .map_err(|e| schema(&format!("{tpath}.rate"), e.to_string()))?;
                        parts.push((coeff, doc.to_rate(&format!("{tpath}.rate"))?));
                    }
                    Ok(RateFunction::Preset(RatePreset::Combination(parts)))
                }
                other => Err(schema(&format!("{path}.name"), format!("unknown rate preset {other:?}"))),
            },
        }
    }
}

fn number_param_direct(obj: &Value, key: &str, path: &str) -> Result<f64> {
    obj.get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| schema(&format!("{path}.{key}"), "missing or non-numeric field"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn asymptotic_slopes() {
        assert_eq!(RateFunction::Constant(2.0).asymptotic_slope(), Some(2.0));
        assert_eq!(RateFunction::exp_decay(1.0, 1.0).asymptotic_slope(), Some(0.0));
        assert_eq!(RateFunction::exp_decay(1.0, -1.0).asymptotic_slope(), None);
        assert_eq!(RateFunction::sinusoidal(1.0, 2.0, 1.0).asymptotic_slope(), Some(1.0));
        assert_eq!(RateFunction::expression("exp(-t)").unwrap().asymptotic_slope(), None);
        let mix = RateFunction::linear_combination(&[
            (0.5, &RateFunction::Constant(1.0)),
            (-0.5, &RateFunction::exp_decay(1.0, 1.0)),
        ]);
        assert_eq!(mix.asymptotic_slope(), Some(0.5));
        // bounded remainder: F(t) − slope·t stays small
        let f = RateFunction::sinusoidal(1.0, 2.0, 1.0);
        for t in [10.0, 100.0, 1000.0] {
            assert!((f.integral(t).unwrap() - t).abs() <= 4.0);
        }
    }

    #[test]
    fn parse_collapses_constants() {
        assert_eq!(parse_rate_expression("1").unwrap(), RateFunction::Constant(1.0));
        assert_eq!(parse_rate_expression("2*(1+1)").unwrap(), RateFunction::Constant(4.0));
        let r = parse_rate_expression("exp(-t)").unwrap();
        assert!(matches!(r, RateFunction::Expression { .. }));
        assert_eq!(r.eval(0.0).unwrap(), 1.0);
        assert!((r.eval(1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn non_finite_evaluation_is_an_error() {
        let r = parse_rate_expression("1/t").unwrap();
        assert!(matches!(r.eval(0.0), Err(Error::RateEvaluation { .. })));
        assert!(parse_rate_expression("1/0").is_err());
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let cases = [
            (RateFunction::exp_decay(1.0, 1.0), "exp(-t)"),
            (RateFunction::exp_decay(2.5, 0.3), "2.5*exp(-0.3*t)"),
            (RateFunction::sinusoidal(1.0, 2.0, 1.0), "1+2*sin(t)"),
            (RateFunction::sinusoidal(0.5, -1.0, 3.0), "0.5-sin(3*t)"),
        ];
        for (preset, text) in cases {
            let quad = parse_rate_expression(text).unwrap();
            assert!(preset.has_closed_form());
            assert!(!quad.has_closed_form());
            for t in [0.0, 0.3, 1.0, 2.7, 10.0, 37.5] {
                let a = preset.integral(t).unwrap();
                let b = quad.integral(t).unwrap();
                assert!((a - b).abs() < 1e-8, "{text} at {t}: {a} vs {b}");
                assert!((preset.eval(t).unwrap() - quad.eval(t).unwrap()).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn combination_and_shapes() {
        let g = parse_rate_expression("exp(-t)").unwrap();
        let one = RateFunction::Constant(1.0);
        let diff = RateFunction::linear_combination(&[(0.5, &one), (-0.5, &g)]);
        assert!((diff.eval(0.0).unwrap()).abs() < 1e-15);
        assert!((diff.integral(2.0).unwrap() - 0.5 * (2.0 - (1.0 - (-2.0f64).exp()))).abs() < 1e-9);
        assert_eq!(
            RateFunction::linear_combination(&[(0.5, &one), (0.5, &RateFunction::Constant(3.0))]),
            RateFunction::Constant(2.0)
        );
        let twice = g.scaled(2.0);
        assert_eq!(twice.shape(), (g.clone(), 2.0));
        assert_eq!(RateFunction::Constant(3.0).shape(), (RateFunction::Constant(1.0), 3.0));
    }

    #[test]
    fn zero_detection() {
        assert!(RateFunction::Constant(0.0).is_identically_zero());
        assert!(RateFunction::expression("0*1").unwrap().is_identically_zero());
        assert!(!parse_rate_expression("0*t").unwrap().is_identically_zero());
        assert!(RateFunction::Constant(0.0).scaled(2.0).is_identically_zero());
    }

    #[test]
    fn json_round_trip() {
        let g = parse_rate_expression("exp(-t)").unwrap();
        let rates = vec![
            RateFunction::Constant(0.25),
            g.clone(),
            RateFunction::exp_decay(1.0, 2.0),
            RateFunction::sinusoidal(1.0, 2.0, 0.5),
            RateFunction::linear_combination(&[(0.5, &RateFunction::Constant(1.0)), (-0.5, &g)]),
        ];
        for r in rates {
            let doc: RateDoc = serde_json::from_value(r.to_json()).unwrap();
            assert_eq!(doc.to_rate("rate").unwrap(), r);
        }
    }

    #[test]
    fn bad_preset_names_are_reported_with_path() {
        let doc: RateDoc = serde_json::from_str(r#"{"kind":"preset","name":"nope","params":{}}"#).unwrap();
        match doc.to_rate("terms[0].rate") {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "terms[0].rate.name"),
            other => panic!("{other:?}"),
        }
        let doc: RateDoc = serde_json::from_str(r#"{"kind":"preset","name":"exp_decay","params":{"rate":1}}"#).unwrap();
        assert!(matches!(doc.to_rate("r"), Err(Error::Schema { .. })));
    }
}

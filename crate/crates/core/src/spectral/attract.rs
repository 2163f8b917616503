//! Attractiveness of the steady manifold from accumulated mode decay
//! `g_μ(t) = −Re ∫₀ᵗ λ_μ`.

use serde::Serialize;

use super::{damping_basis, DampingBasis};
use crate::error::Result;
use crate::models::GeneratorModel;

const STEADY_TOL: f64 = 1e-10;
const SLOPE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttractivenessOptions {
    pub horizon: f64,
    pub threshold: f64,
    pub growth: f64,
}

impl Default for AttractivenessOptions {
    fn default() -> Self {
        AttractivenessOptions {
            horizon: 100.0,
            threshold: 20.0,
            growth: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeClass {
    Steady,
    Decaying,
    Persistent,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeReport {
    pub index: usize,
    pub class: ModeClass,
    pub coefficients: Vec<[f64; 2]>,
    /// `g_μ` at each checkpoint.
    pub accumulated: Vec<f64>,
    /// `lim g_μ(t)/t`, when every rate of the model has a provable long-time
    /// average.
    pub asymptotic_growth: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AttractivenessReport {
    pub schema_version: u32,
    pub horizon: f64,
    pub threshold: f64,
    pub growth: f64,
    pub checkpoints: Vec<f64>,
    pub modes: Vec<ModeReport>,
    /// Every non-steady mode is decaying on the horizon.
    pub attractive: bool,
    /// Verdict from the long-time averages of closed-form rates; `None` if
    /// any rate is quadrature-backed.
    pub certified_attractive: Option<bool>,
    pub diagonalizable: bool,
    pub note: String,
}

impl AttractivenessReport {
    pub fn steady_modes(&self) -> impl Iterator<Item = &ModeReport> {
        self.modes.iter().filter(|m| m.class == ModeClass::Steady)
    }

    pub fn count(&self, class: ModeClass) -> usize {
        self.modes.iter().filter(|m| m.class == class).count()
    }
}

pub fn attractiveness(model: &GeneratorModel, opts: AttractivenessOptions) -> Result<AttractivenessReport> {
    let basis = damping_basis(model)?;
    attractiveness_of(&basis, opts)
}

pub fn attractiveness_of(basis: &DampingBasis, opts: AttractivenessOptions) -> Result<AttractivenessReport> {
    let t = opts.horizon;
    let checkpoints = vec![t / 8.0, t / 4.0, t / 2.0, t];
    let per_checkpoint = checkpoints
        .iter()
        .map(|&s| basis.accumulated_exponents(s))
        .collect::<Result<Vec<_>>>()?;
    let slopes: Option<Vec<f64>> = basis.rates().iter().map(|r| r.asymptotic_slope()).collect();
    let scales: Vec<f64> = basis.pieces().iter().map(|p| p.norm().max(1.0)).collect();

    let mut modes = Vec::with_capacity(basis.modes().len());
    for (mu, mode) in basis.modes().iter().enumerate() {
        let steady = mode
            .coefficients
            .iter()
            .zip(&scales)
            .all(|(c, s)| c.norm() <= STEADY_TOL * s);
        let accumulated: Vec<f64> = per_checkpoint.iter().map(|e| -e[mu].re).collect();
        let g_half = accumulated[2];
        let g_end = accumulated[3];
        let class = if steady {
            ModeClass::Steady
        } else if g_end >= opts.threshold && g_end - g_half >= opts.growth {
            ModeClass::Decaying
        } else {
            ModeClass::Persistent
        };
        let asymptotic_growth = slopes
            .as_ref()
            .map(|s| -mode.coefficients.iter().zip(s).map(|(c, k)| c.re * k).sum::<f64>());
        modes.push(ModeReport {
            index: mu,
            class,
            coefficients: mode.coefficients.iter().map(|z| [z.re, z.im]).collect(),
            accumulated,
            asymptotic_growth,
        });
    }

    let attractive = modes.iter().all(|m| m.class != ModeClass::Persistent);
    let certified_attractive = slopes.as_ref().map(|_| {
        modes
            .iter()
            .filter(|m| m.class != ModeClass::Steady)
            .all(|m| m.asymptotic_growth.is_some_and(|g| g > SLOPE_TOL))
    });
    let note = match certified_attractive {
        Some(_) => "all rates have closed-form integrals; divergence of g_μ is certified from their long-time averages".to_string(),
        None => format!(
            "some rates are integrated numerically; divergence of g_μ is inferred heuristically from the horizon T = {t}"
        ),
    };
    Ok(AttractivenessReport {
        schema_version: 1,
        horizon: t,
        threshold: opts.threshold,
        growth: opts.growth,
        checkpoints,
        modes,
        attractive,
        certified_attractive,
        diagonalizable: basis.diagonalizable,
        note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{parse_rate_expression, presets, RateFunction};

    fn report(rate: RateFunction) -> AttractivenessReport {
        attractiveness(&presets::amplitude_damping(rate), AttractivenessOptions::default()).unwrap()
    }

    #[test]
    fn constant_rate_is_attractive() {
        let r = report(RateFunction::Constant(1.0));
        assert!(r.attractive);
        assert_eq!(r.certified_attractive, Some(true));
        assert_eq!(r.count(ModeClass::Steady), 1);
        assert_eq!(r.count(ModeClass::Decaying), 3);
        assert_eq!(r.checkpoints, vec![12.5, 25.0, 50.0, 100.0]);
        // slowest decaying mode: g = T/2
        let min_end = r
            .modes
            .iter()
            .filter(|m| m.class == ModeClass::Decaying)
            .map(|m| m.accumulated[3])
            .fold(f64::INFINITY, f64::min);
        assert!((min_end - 50.0).abs() < 1e-9);
    }

    #[test]
    fn decaying_rate_is_not_attractive() {
        let r = report(parse_rate_expression("exp(-t)").unwrap());
        assert!(!r.attractive);
        assert_eq!(r.certified_attractive, None);
        assert!(r.note.contains("heuristic"));
        for m in r.modes.iter().filter(|m| m.class != ModeClass::Steady) {
            assert_eq!(m.class, ModeClass::Persistent);
            assert!(m.accumulated.iter().all(|g| *g <= 1.0 + 1e-9));
        }
        let r = report(RateFunction::exp_decay(1.0, 1.0));
        assert_eq!(r.certified_attractive, Some(false));
    }

    #[test]
    fn sign_changing_rate_is_attractive() {
        let r = report(parse_rate_expression("1 + 2*sin(t)").unwrap());
        assert!(r.attractive);
        let slow = r
            .modes
            .iter()
            .filter(|m| m.class != ModeClass::Steady)
            .min_by(|a, b| a.accumulated[3].total_cmp(&b.accumulated[3]))
            .unwrap();
        // λ = −½ on 1 + 2 sin t: g(T) = ½(T + 2(1 − cos T))
        let want = |t: f64| 0.5 * (t + 2.0 * (1.0 - t.cos()));
        for (g, t) in slow.accumulated.iter().zip(&r.checkpoints) {
            assert!((g - want(*t)).abs() < 1e-7);
        }
        let r = report(RateFunction::sinusoidal(1.0, 2.0, 1.0));
        assert_eq!(r.certified_attractive, Some(true));
    }

    #[test]
    fn verdict_matches_mode_classes() {
        let models = [
            presets::pure_dephasing(2, &[RateFunction::Constant(1.0), RateFunction::Constant(0.0)]).unwrap(),
            presets::two_qubit_dephasing(RateFunction::Constant(1.0), RateFunction::Constant(1.0)),
            presets::two_qubit_dephasing(RateFunction::Constant(1.0), parse_rate_expression("exp(-t)").unwrap()),
        ];
        for m in models {
            let r = attractiveness(&m, AttractivenessOptions::default()).unwrap();
            assert!(r.count(ModeClass::Steady) >= 1);
            assert_eq!(r.attractive, r.modes.iter().all(|m| m.class != ModeClass::Persistent));
        }
    }

    #[test]
    fn json_shape() {
        let r = report(RateFunction::Constant(1.0));
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["modes"][0]["accumulated"].as_array().unwrap().len(), 4);
        assert!(["steady", "decaying", "persistent"].contains(&v["modes"][0]["class"].as_str().unwrap()));
    }
}

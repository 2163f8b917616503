use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::models::presets::{self, DoubleDotParams};
use crate::models::{parse_rate_expression, GeneratorModel, RateFunction};

fn canonical(key: &str) -> &str {
    match key {
        "γ" => "gamma",
        "γ1" | "γ₁" => "gamma1",
        "γ2" | "γ₂" => "gamma2",
        "φ" => "phi",
        "κ" => "kappa",
        "κ̃" | "κ~" => "kappa_tilde",
        "ε" => "epsilon",
        other => other,
    }
}

struct Params {
    values: BTreeMap<String, String>,
}

impl Params {
    fn parse(raw: &[String]) -> Result<Self> {
        let mut values = BTreeMap::new();
        for item in raw {
            let (k, v) = item.split_once('=').ok_or_else(|| Error::InvalidParameter {
                name: item.clone(),
                message: "expected key=value".into(),
            })?;
            let key = canonical(k.trim()).to_string();
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::InvalidParameter {
                    name: key,
                    message: "given twice".into(),
                });
            }
        }
        Ok(Params { values })
    }

    fn allow(&self, known: &[&str]) -> Result<()> {
        match self.values.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(Error::InvalidParameter {
                name: k.clone(),
                message: format!("not a parameter of this preset (known: {})", known.join(", ")),
            }),
            None => Ok(()),
        }
    }

    fn rate(&self, key: &str, default: &str) -> Result<RateFunction> {
        let text = self.values.get(key).map_or(default, String::as_str);
        parse_rate_expression(text).map_err(|e| Error::InvalidParameter {
            name: key.into(),
            message: e.to_string(),
        })
    }

    fn number<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e: T::Err| Error::InvalidParameter {
                name: key.into(),
                message: e.to_string(),
            }),
        }
    }
}

/// Build a preset model from `key=value` parameters. Rates are expressions
/// in `t`.
pub fn build_preset(name: &str, raw: &[String]) -> Result<GeneratorModel> {
    let p = Params::parse(raw)?;
    match name {
        "amplitude-damping" => {
            p.allow(&["gamma"])?;
            Ok(presets::amplitude_damping(p.rate("gamma", "1")?))
        }
        "pure-dephasing" => {
            let per_qubit: Vec<String> = (0..presets::MAX_DEPHASING_QUBITS).map(|q| format!("gamma{q}")).collect();
            let mut known = vec!["qubits", "gamma"];
            known.extend(per_qubit.iter().map(String::as_str));
            p.allow(&known)?;
            let n: usize = p.number("qubits", 1)?;
            let shared = p.values.get("gamma").map_or("1", String::as_str).to_string();
            if let Some(extra) = per_qubit.iter().skip(n).find(|k| p.values.contains_key(k.as_str())) {
                return Err(Error::InvalidParameter {
                    name: extra.clone(),
                    message: format!("model has only {n} qubit(s)"),
                });
            }
            let rates = (0..n)
                .map(|q| p.rate(&format!("gamma{q}"), &shared))
                .collect::<Result<Vec<_>>>()?;
            presets::pure_dephasing(n, &rates)
        }
        "two-qubit-dephasing" => {
            p.allow(&["gamma1", "gamma2"])?;
            Ok(presets::two_qubit_dephasing(p.rate("gamma1", "1")?, p.rate("gamma2", "1")?))
        }
        "double-dot" => {
            p.allow(&["phi", "kappa", "kappa_tilde", "epsilon", "hamiltonian"])?;
            Ok(presets::double_dot(DoubleDotParams {
                phase: p.number("phi", 0.0)?,
                energy: p.number("epsilon", 1.0)?,
                kappa: p.rate("kappa", "1")?,
                kappa_tilde: p.rate("kappa_tilde", "0")?,
                include_hamiltonian: p.number("hamiltonian", false)?,
            }))
        }
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn presets_and_parameters() {
        let m = build_preset("two-qubit-dephasing", &args(&["γ₁=1", "gamma2=1"])).unwrap();
        assert_eq!(m.terms().len(), 1);
        let m = build_preset("pure-dephasing", &args(&["qubits=3", "gamma1=exp(-t)"])).unwrap();
        assert_eq!(m.hilbert_dim(), 8);
        assert_eq!(m.terms()[1].rate(), &parse_rate_expression("exp(-t)").unwrap());
        assert_eq!(m.terms()[2].rate(), &RateFunction::Constant(1.0));
        let m = build_preset("double-dot", &args(&["phi=0.5", "hamiltonian=true", "epsilon=2"])).unwrap();
        assert_eq!(m.terms().len(), 3);
        assert_eq!(build_preset("amplitude-damping", &[]).unwrap().hilbert_dim(), 2);
    }

    #[test]
    fn bad_parameters() {
        assert!(matches!(build_preset("foo", &[]), Err(Error::UnknownPreset(_))));
        for bad in [
            args(&["gamma"]),
            args(&["delta=1"]),
            args(&["gamma=sin(t"]),
            args(&["gamma=1", "gamma=2"]),
        ] {
            assert!(
                matches!(build_preset("amplitude-damping", &bad), Err(Error::InvalidParameter { .. })),
                "{bad:?}"
            );
        }
        assert!(build_preset("pure-dephasing", &args(&["qubits=1", "gamma2=1"])).is_err());
        assert!(build_preset("pure-dephasing", &args(&["qubits=x"])).is_err());
        assert!(build_preset("double-dot", &args(&["hamiltonian=maybe"])).is_err());
    }
}

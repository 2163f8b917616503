#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tclsteady::models::presets::{self, DoubleDotParams};
use tclsteady::models::{parse_rate_expression, GeneratorModel, RateFunction};

pub fn rate(text: &str) -> RateFunction {
    parse_rate_expression(text).expect("valid rate expression")
}

pub fn dot(phase: f64, kappa: &str, kappa_tilde: &str, hamiltonian: bool) -> GeneratorModel {
    presets::double_dot(DoubleDotParams {
        phase,
        energy: 1.0,
        kappa: rate(kappa),
        kappa_tilde: rate(kappa_tilde),
        include_hamiltonian: hamiltonian,
    })
}

/// Every commuting preset configuration exercised by the suites.
pub fn commuting_presets() -> Vec<(&'static str, GeneratorModel)> {
    vec![
        ("amplitude-damping γ=1", presets::amplitude_damping(rate("1"))),
        ("amplitude-damping γ=e^-t", presets::amplitude_damping(rate("exp(-t)"))),
        ("amplitude-damping γ=1+2sin t", presets::amplitude_damping(rate("1 + 2*sin(t)"))),
        ("pure-dephasing n=1", presets::pure_dephasing(1, &[rate("1")]).unwrap()),
        (
            "pure-dephasing n=2",
            presets::pure_dephasing(2, &[rate("1"), rate("0.5")]).unwrap(),
        ),
        (
            "pure-dephasing n=3",
            presets::pure_dephasing(3, &[rate("1"), RateFunction::exp_decay(0.8, 0.3), rate("0.25 + 0.2*cos(t)")]).unwrap(),
        ),
        ("two-qubit γ1=1 γ2=e^-t", presets::two_qubit_dephasing(rate("1"), rate("exp(-t)"))),
        ("two-qubit γ1=1 γ2=0.3", presets::two_qubit_dephasing(rate("1"), rate("0.3"))),
        ("two-qubit collective", presets::two_qubit_dephasing(rate("1"), rate("1"))),
        ("double-dot κ̃=0", dot(0.7, "1", "0", false)),
        ("double-dot κ̃=0 sinusoidal κ", dot(0.0, "1 + 0.5*sin(t)", "0", false)),
        ("double-dot κ̃=0 with H", dot(1.3, "1", "0", true)),
    ]
}

pub fn random_times(n: usize, t_max: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| t_max * (1.0 - rng.random::<f64>())).collect()
}

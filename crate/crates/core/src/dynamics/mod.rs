//! Time evolution: fixed-step Runge–Kutta integration of `dρ/dt = L(t)ρ`,
//! the exact commuting-case propagator, and distances to the steady
//! manifold along trajectories.

use std::io::Write;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::SteadyProjector;
use crate::models::GeneratorModel;
use crate::operator_space::linalg::{min_hermitian_eigenvalue, ComplexMatrix};
use crate::operator_space::{devectorize, trace_distance, vectorize, ComplexVector, DensityOperator};
use crate::spectral::{attractiveness, damping_basis, AttractivenessOptions};

/// Trace drift above this is logged before renormalizing.
pub const TRACE_DRIFT_TOL: f64 = 1e-8;
/// Eigenvalues below `−POSITIVITY_TOL` abort the integration.
pub const POSITIVITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
    Exact,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityOperator>,
    pub method: Method,
    /// Largest `|Tr ρ − 1|` seen before renormalization.
    pub max_trace_drift: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn hilbert_dim(&self) -> usize {
        self.states.first().map_or(0, DensityOperator::dim)
    }

    pub fn last(&self) -> Option<(f64, &DensityOperator)> {
        self.times.last().copied().zip(self.states.last())
    }

    /// Largest trace distance between states at matching times.
    pub fn max_distance_to(&self, other: &Trajectory) -> Result<f64> {
        if self.times.len() != other.times.len() {
            return Err(Error::dims("trajectory length", self.times.len(), other.times.len()));
        }
        Ok(self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a.trace_distance(b))
            .fold(0.0, f64::max))
    }

    /// CSV with header `t,re_00,im_00,…[,manifold_distance]`, row-major
    /// entries, 17 significant digits.
    pub fn write_csv<W: Write + ?Sized>(&self, out: &mut W, distances: Option<&AttractionTrace>) -> Result<()> {
        if let Some(trace) = distances {
            if trace.distances.len() != self.len() {
                return Err(Error::dims("manifold distances", self.len(), trace.distances.len()));
            }
        }
        let d = self.hilbert_dim();
        let mut header = vec!["t".to_string()];
        for i in 0..d {
            for j in 0..d {
                header.push(format!("re_{i}{j}"));
                header.push(format!("im_{i}{j}"));
            }
        }
        if distances.is_some() {
            header.push("manifold_distance".into());
        }
        writeln!(out, "{}", header.join(","))?;
        for (k, (t, rho)) in self.times.iter().zip(&self.states).enumerate() {
            let m = rho.matrix();
            let mut row = vec![format!("{t:.16e}")];
            for i in 0..d {
                for j in 0..d {
                    row.push(format!("{:.16e}", m[(i, j)].re));
                    row.push(format!("{:.16e}", m[(i, j)].im));
                }
            }
            if let Some(trace) = distances {
                row.push(format!("{:.16e}", trace.distances[k]));
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn check_state(model: &GeneratorModel, rho0: &DensityOperator) -> Result<()> {
    if rho0.dim() != model.hilbert_dim() {
        return Err(Error::dims("initial state", model.hilbert_dim(), rho0.dim()));
    }
    Ok(())
}

/// Classical fourth-order Runge–Kutta with step `t_max / steps`; the trace
/// is renormalized after every step.
pub fn evolve_ode(model: &GeneratorModel, rho0: &DensityOperator, t_max: f64, steps: usize) -> Result<Trajectory> {
    check_state(model, rho0)?;
    if steps < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 steps, got {steps}")));
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidInput(format!("final time must be positive, got {t_max}")));
    }
    let d = model.hilbert_dim();
    let classes = model.rate_classes();
    let generator = |t: f64, v: &ComplexVector| -> Result<ComplexVector> {
        let mut out = ComplexVector::zeros(v.len());
        for class in &classes {
            let f = class.rate.eval(t)?;
            out += (class.piece.matrix() * v).scale(f);
        }
        Ok(out)
    };

    let h = t_max / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(rho0.clone());
    let mut v = vectorize(rho0.matrix());
    let mut max_drift: f64 = 0.0;
    for step in 1..=steps {
        let t = (step - 1) as f64 * h;
        let k1 = generator(t, &v)?;
        let k2 = generator(t + h / 2.0, &(&v + k1.scale(h / 2.0)))?;
        let k3 = generator(t + h / 2.0, &(&v + k2.scale(h / 2.0)))?;
        let k4 = generator(t + h, &(&v + k3.scale(h)))?;
        v += (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(h / 6.0);

        let mut m = devectorize(&v, d)?;
        let tr = m.trace().re;
        let drift = (tr - 1.0).abs();
        max_drift = max_drift.max(drift);
        if drift > TRACE_DRIFT_TOL {
            warn!("trace drift {drift:.3e} at step {step} (t = {:.6}); renormalizing", step as f64 * h);
        }
        m = (&m + m.adjoint()).unscale(2.0 * tr);
        let min = min_hermitian_eigenvalue(&m);
        if min < -POSITIVITY_TOL {
            return Err(Error::PositivityViolation {
                step,
                t: step as f64 * h,
                min_eigenvalue: min,
            });
        }
        v = vectorize(&m);
        times.push(if step == steps { t_max } else { step as f64 * h });
        states.push(DensityOperator::with_tolerance(m, POSITIVITY_TOL)?);
    }
    Ok(Trajectory {
        times,
        states,
        method: Method::Rk4,
        max_trace_drift: max_drift,
    })
}

/// `ρ(t) = Λ(t)ρ₀` at each requested time.
pub fn evolve_exact(model: &GeneratorModel, rho0: &DensityOperator, times: &[f64]) -> Result<Trajectory> {
    check_state(model, rho0)?;
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0)) {
        return Err(Error::InvalidInput(format!("times must be non-negative, got {t}")));
    }
    let basis = damping_basis(model)?;
    let mut states = Vec::with_capacity(times.len());
    let mut max_drift: f64 = 0.0;
    for &t in times {
        let m = basis.propagator(t)?.apply(rho0.matrix())?;
        let tr = m.trace().re;
        max_drift = max_drift.max((tr - 1.0).abs());
        let m = (&m + m.adjoint()).unscale(2.0 * tr);
        states.push(DensityOperator::with_tolerance(m, 1e-8)?);
    }
    Ok(Trajectory {
        times: times.to_vec(),
        states,
        method: Method::Exact,
        max_trace_drift: max_drift,
    })
}

/// `n + 1` evenly spaced times on `[0, t_max]`.
pub fn uniform_times(t_max: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| if i == n { t_max } else { t_max * i as f64 / n as f64 }).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct AttractionTrace {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub final_distance: f64,
    /// Distances never increase by more than `1e-10` between samples.
    pub monotone: bool,
    /// Distances at the samples nearest `T/4, T/2, T` are non-increasing.
    pub envelope_monotone: bool,
}

/// `½‖ρ(t) − 𝓟ρ(t)‖₁` along a trajectory.
pub fn attraction_trace(traj: &Trajectory, p: &SteadyProjector) -> Result<AttractionTrace> {
    if traj.hilbert_dim() != p.hilbert_dim {
        return Err(Error::dims("trajectory vs projector", p.hilbert_dim, traj.hilbert_dim()));
    }
    let distances = traj
        .states
        .iter()
        .map(|rho| Ok(manifold_distance(p, rho.matrix())?))
        .collect::<Result<Vec<f64>>>()?;
    let monotone = distances.windows(2).all(|w| w[1] <= w[0] + 1e-10);
    let envelope_monotone = match traj.times.last() {
        Some(&t_end) => {
            let at = |target: f64| {
                let k = traj
                    .times
                    .iter()
                    .enumerate()
                    .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
                    .map_or(0, |(k, _)| k);
                distances[k]
            };
            let (q, h, e) = (at(t_end / 4.0), at(t_end / 2.0), at(t_end));
            h <= q + 1e-10 && e <= h + 1e-10
        }
        None => true,
    };
    Ok(AttractionTrace {
        times: traj.times.clone(),
        final_distance: distances.last().copied().unwrap_or(0.0),
        distances,
        monotone,
        envelope_monotone,
    })
}

fn manifold_distance(p: &SteadyProjector, rho: &ComplexMatrix) -> Result<f64> {
    let projected = p.apply(rho)?;
    Ok(trace_distance(rho, &projected))
}

#[derive(Debug, Clone, Serialize)]
pub struct InitialStateResult {
    pub label: String,
    pub final_distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AttractionReport {
    pub schema_version: u32,
    pub horizon: f64,
    pub tolerance: f64,
    pub states: Vec<InitialStateResult>,
    pub max_final_distance: f64,
    /// All final distances are within tolerance at the horizon.
    pub attracted: bool,
    pub spectral_attractive: bool,
    pub consistent: bool,
    pub note: String,
}

/// Default probe states: `count` seeded random states then every basis state.
pub fn default_initial_states(d: usize, count: usize, seed: u64) -> Vec<(String, DensityOperator)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<(String, DensityOperator)> = (0..count)
        .map(|i| (format!("random[{i}]"), DensityOperator::random(d, &mut rng)))
        .collect();
    for i in 0..d {
        out.push((format!("basis[{i}]"), DensityOperator::basis(d, i).expect("index < d")));
    }
    out
}

/// Evolve each initial state to `T` with the exact propagator and compare
/// its distance to the manifold with `tol`.
pub fn verify_attraction(
    model: &GeneratorModel,
    p: &SteadyProjector,
    initial: &[(String, DensityOperator)],
    horizon: f64,
    tol: f64,
) -> Result<AttractionReport> {
    if p.hilbert_dim != model.hilbert_dim() {
        return Err(Error::dims("projector", model.hilbert_dim(), p.hilbert_dim));
    }
    let basis = damping_basis(model)?;
    let lambda = basis.propagator(horizon)?;
    let mut states = Vec::with_capacity(initial.len());
    for (label, rho) in initial {
        check_state(model, rho)?;
        let evolved = lambda.apply(rho.matrix())?;
        states.push(InitialStateResult {
            label: label.clone(),
            final_distance: manifold_distance(p, &evolved)?,
        });
    }
    let max_final_distance = states.iter().map(|s| s.final_distance).fold(0.0, f64::max);
    let attracted = max_final_distance <= tol;
    let spectral = attractiveness(
        model,
        AttractivenessOptions {
            horizon,
            ..AttractivenessOptions::default()
        },
    )?;
    let consistent = spectral.attractive == attracted;
    let mut note = format!("verdict holds at the finite horizon T = {horizon}; it is not a statement about t → ∞");
    if !consistent {
        note.push_str(&format!(
            "; disagrees with the mode-integral verdict (attractive = {}), the trajectory test being the weaker of the two",
            spectral.attractive
        ));
        warn!("{note}");
    }
    Ok(AttractionReport {
        schema_version: 1,
        horizon,
        tolerance: tol,
        states,
        max_final_distance,
        attracted,
        spectral_attractive: spectral.attractive,
        consistent,
        note,
    })
}

//! The ensemble experiments. Each takes a resolved [`RunConfig`] and returns
//! a [`Report`]; all randomness comes from per-`(cell, trial)` streams.
//!
//! Recovery-style experiments draw a stabilized map `A` (spectral radius at
//! most `rho_target`), model it as the continuous-time matrix `A - I`, and
//! simulate with forward Euler at unit step, whose update map is `A` again.

mod dim_sweep;
mod dt_sweep;
mod empirical_vis;
mod heatmap;
mod recovery;
mod x0_density;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use visilin_core::ensembles::{self, ZeroMask};
use visilin_core::lti::{LtiSystem, Trajectory};
use visilin_core::visibility::{self, Subspace, DEFAULT_RTOL};
use visilin_core::Error;

use crate::config::{ExperimentId, RunConfig};
use crate::error::Result;
use crate::farm::Workers;
use crate::report::{Report, ResultRow};
use crate::stats;

pub fn run(cfg: &RunConfig, workers: Workers) -> Result<Report> {
    cfg.validate()?;
    match cfg.experiment_id {
        ExperimentId::Heatmap => heatmap::run(cfg, workers),
        ExperimentId::X0Density => x0_density::run(cfg, workers),
        ExperimentId::RecoveryNoise | ExperimentId::RecoveryK => recovery::run(cfg, workers),
        ExperimentId::DtSweep => dt_sweep::run(cfg, workers),
        ExperimentId::DimSweep => dim_sweep::run(cfg, workers),
        ExperimentId::EmpiricalVis => empirical_vis::run(cfg, workers),
    }
}

/// `max_j ||(I - P P^T) x[j]|| / ||x[j]||` over the nonzero states.
pub(crate) fn confinement(traj: &Trajectory, basis: &DMatrix<f64>) -> f64 {
    let x = traj.states();
    let resid = x - basis * (basis.transpose() * x);
    resid
        .column_iter()
        .zip(x.column_iter())
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|(r, c)| r.norm() / c.norm())
        .fold(0.0, f64::max)
}

/// Continuous-time model whose unit-step Euler map is `a`.
pub(crate) fn shifted(sys: &LtiSystem) -> Result<LtiSystem> {
    let n = sys.n();
    Ok(LtiSystem::new(
        sys.a() - DMatrix::identity(n, n),
        sys.b().clone(),
    )?)
}

/// An uncontrollable stabilized truncated-Gaussian pair with a dense unit
/// initial state, redrawn until `accept(dim V(x0))`.
pub(crate) fn uncontrollable_triple<R: Rng + ?Sized>(
    cfg: &RunConfig,
    n: usize,
    p: f64,
    rng: &mut R,
    accept: impl Fn(usize) -> bool,
) -> Result<(LtiSystem, DVector<f64>, Subspace)> {
    for _ in 0..cfg.max_tries {
        let sys =
            ensembles::sample_uncontrollable_from(n, cfg.m, p, cfg.rho_target, rng, cfg.max_tries)?;
        let x0 = ensembles::sample_x0_from(n, 1.0, ZeroMask::Resample, rng)?;
        let sub = visibility::visible_subspace(&sys, &x0, DEFAULT_RTOL)?;
        if accept(sub.k) {
            return Ok((sys, x0, sub));
        }
    }
    Err(Error::NumericalDegeneracy(format!(
        "no acceptable triple in {} draws at n = {n}, p = {p}",
        cfg.max_tries
    ))
    .into())
}

/// Mean (with standard error), median, standard deviation and maximum rows for `values`.
pub(crate) fn summary_rows(template: &ResultRow, name: &str, values: &[f64]) -> Vec<ResultRow> {
    let s = stats::Summary::of(values);
    let row = |suffix: &str, value: f64| {
        let mut r = template.clone();
        r.metric = format!("{name}_{suffix}");
        r.value = value;
        r.trials = values.len();
        r
    };
    vec![
        row("mean", s.mean).se(s.se),
        row("median", s.median),
        row("std", s.std),
        row("max", s.max),
    ]
}

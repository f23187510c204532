//! Fraction of identifiable triples as a function of initial-state density.
//!
//! Pairs are Ginibre-sparse draws over the `(n, p)` grid, kept when their
//! realized joint density falls inside `density_window` and they are
//! uncontrollable. Each kept pair is scored against `x0_per_system` initial
//! states for every `p_x0`; a triple counts as identifiable when its PBH
//! margin exceeds `eps`. A mask that removes every entry leaves `x0 = 0`,
//! which is scored as is.

use serde::Serialize;
use visilin_core::ensembles::{self, ZeroMask, DENSITY_TAU};
use visilin_core::identifiability;

use crate::config::RunConfig;
use crate::error::Result;
use crate::farm::{self, Workers};
use crate::report::{to_csv, Report, ResultRow, Table};
use crate::stats;

/// Identifiable counts of one kept pair, one entry per `p_x0`.
#[derive(Debug, Clone)]
struct Kept {
    n: usize,
    p: f64,
    density: f64,
    hits: Vec<usize>,
}

#[derive(Debug, Serialize)]
struct SystemRow {
    n: usize,
    p: f64,
    trial: usize,
    realized_density: f64,
    p_x0: f64,
    identifiable: usize,
    draws: usize,
}

pub fn run(cfg: &RunConfig, workers: Workers) -> Result<Report> {
    let cells: Vec<(usize, f64)> = cfg
        .dims
        .iter()
        .flat_map(|&n| cfg.densities.iter().map(move |&p| (n, p)))
        .collect();
    let trials = cfg.trials;
    let [lo, hi] = cfg.density_window;
    let outcomes = farm::run(cells.len() * trials, workers, |job| {
        let (cell, trial) = (job / trials, job % trials);
        let (n, p) = cells[cell];
        let mut rng = farm::rng_for(
            cfg.base_seed,
            farm::cell_key(&[n as u64, p.to_bits()]),
            trial,
        );
        let sys = ensembles::ginibre_sparse_from(n, cfg.m, p, &mut rng);
        let density = ensembles::joint_density(&sys, DENSITY_TAU);
        if density < lo || density > hi || identifiability::is_controllable(&sys) {
            return Ok(None);
        }
        let mut hits = Vec::with_capacity(cfg.x0_densities.len());
        for &p_x0 in &cfg.x0_densities {
            let mut count = 0;
            for _ in 0..cfg.x0_per_system {
                let x0 = ensembles::sample_x0_from(n, p_x0, ZeroMask::KeepZero, &mut rng)?;
                if identifiability::pbh_margin(&sys, &x0)? > cfg.eps {
                    count += 1;
                }
            }
            hits.push(count);
        }
        Ok(Some((
            trial,
            Kept {
                n,
                p,
                density,
                hits,
            },
        )))
    })?;
    let kept: Vec<(usize, Kept)> = outcomes.into_iter().flatten().collect();

    let draws = cfg.x0_per_system;
    let mut rows = Vec::new();
    for (i, &p_x0) in cfg.x0_densities.iter().enumerate() {
        let per_system: Vec<f64> = kept
            .iter()
            .map(|(_, k)| k.hits[i] as f64 / draws as f64)
            .collect();
        let triples = per_system.len() * draws;
        if triples > 0 {
            rows.push(
                ResultRow::new("x0_density", "tau_x0", stats::mean(&per_system), triples)
                    .p_x0(p_x0)
                    .se(stats::se(&per_system)),
            );
        }
        for &n in &cfg.dims {
            let sub: Vec<f64> = kept
                .iter()
                .filter(|(_, k)| k.n == n)
                .map(|(_, k)| k.hits[i] as f64 / draws as f64)
                .collect();
            if !sub.is_empty() {
                rows.push(
                    ResultRow::new("x0_density", "tau_x0", stats::mean(&sub), sub.len() * draws)
                        .n(n)
                        .p_x0(p_x0)
                        .se(stats::se(&sub)),
                );
            }
        }
    }
    rows.push(ResultRow::new(
        "x0_density",
        "kept_systems",
        kept.len() as f64,
        cells.len() * trials,
    ));

    let mut per_trial = Vec::new();
    for (trial, k) in &kept {
        for (i, &p_x0) in cfg.x0_densities.iter().enumerate() {
            per_trial.push(SystemRow {
                n: k.n,
                p: k.p,
                trial: *trial,
                realized_density: k.density,
                p_x0,
                identifiable: k.hits[i],
                draws,
            });
        }
    }
    Ok(Report {
        config: cfg.clone(),
        rows,
        tables: vec![Table { name: "x0_density_trials.csv".into(), csv: to_csv(&per_trial)? }],
        notes: vec![format!(
            "pairs kept when realized joint density of [A B] lies in [{lo}, {hi}] and rank C(A, B) < n"
        )],
    })
}

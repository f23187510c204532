//! Fraction of controllable pairs over the `(n, p)` grid.

use serde::Serialize;
use visilin_core::ensembles;
use visilin_core::identifiability;

use crate::config::RunConfig;
use crate::error::Result;
use crate::farm::{self, Workers};
use crate::report::{to_csv, Report, ResultRow, Table};
use crate::stats;

#[derive(Debug, Serialize)]
struct Cell {
    n: usize,
    p: f64,
    frac_controllable: f64,
    se: f64,
}

pub fn run(cfg: &RunConfig, workers: Workers) -> Result<Report> {
    let cells: Vec<(usize, f64)> = cfg
        .dims
        .iter()
        .flat_map(|&n| cfg.densities.iter().map(move |&p| (n, p)))
        .collect();
    let trials = cfg.trials;
    let flags = farm::run(cells.len() * trials, workers, |job| {
        let (cell, trial) = (job / trials, job % trials);
        let (n, p) = cells[cell];
        let mut rng = farm::rng_for(
            cfg.base_seed,
            farm::cell_key(&[n as u64, p.to_bits()]),
            trial,
        );
        let sys = ensembles::ginibre_sparse_from(n, cfg.m, p, &mut rng);
        Ok(identifiability::is_controllable(&sys))
    })?;

    let mut rows = Vec::new();
    let mut wide = Vec::new();
    for (cell, &(n, p)) in cells.iter().enumerate() {
        let f = &flags[cell * trials..(cell + 1) * trials];
        let ones: Vec<f64> = f.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let frac = stats::fraction(f);
        let se = stats::se(&ones);
        rows.push(
            ResultRow::new("heatmap", "frac_controllable", frac, trials)
                .n(n)
                .p(p)
                .se(se),
        );
        wide.push(Cell {
            n,
            p,
            frac_controllable: frac,
            se,
        });
    }
    Ok(Report {
        config: cfg.clone(),
        rows,
        tables: vec![Table {
            name: "heatmap.csv".into(),
            csv: to_csv(&wide)?,
        }],
        notes: vec![],
    })
}

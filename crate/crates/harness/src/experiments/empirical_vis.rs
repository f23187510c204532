//! Visible subspace estimated from noisy data versus the oracle.

use serde::Serialize;
use visilin_core::ensembles;
use visilin_core::estimators;
use visilin_core::lti;
use visilin_core::visibility::{self, DEFAULT_RTOL};

use super::{confinement, shifted, summary_rows};
use crate::config::RunConfig;
use crate::error::Result;
use crate::farm::{self, Workers};
use crate::report::{to_csv, Report, ResultRow, Table};

#[derive(Debug, Clone, Serialize)]
struct TrialRow {
    n: usize,
    p: f64,
    k: usize,
    trial: usize,
    eta: f64,
    k_hat: usize,
    theta_max_deg: f64,
    ree_full: f64,
    ree_oracle_vis: f64,
    ree_emp_vis: f64,
    confinement: f64,
}

pub fn run(cfg: &RunConfig, workers: Workers) -> Result<Report> {
    let mut cells = Vec::new();
    for &n in &cfg.dims {
        for &p in &cfg.densities {
            for &k in cfg.ks.iter().filter(|&&k| k <= n) {
                cells.push((n, p, k));
            }
        }
    }
    let trials = cfg.trials;
    let per_job = farm::run(cells.len() * trials, workers, |job| {
        let (cell, trial) = (job / trials, job % trials);
        let (n, p, k) = cells[cell];
        let mut rng = farm::rng_for(
            cfg.base_seed,
            farm::cell_key(&[n as u64, p.to_bits(), k as u64]),
            trial,
        );
        let t = ensembles::planted_triple_from(
            n,
            k,
            cfg.m,
            p,
            cfg.rho_target,
            &mut rng,
            cfg.max_tries,
        )?;
        let sub = visibility::visible_subspace(&t.sys, &t.x0, DEFAULT_RTOL)?;
        let map = lti::euler_map(&shifted(&t.sys)?, 1.0)?;
        let u = ensembles::pe_input_from(cfg.m, cfg.horizon, &mut rng)?;
        let clean =
            lti::simulate_discrete(&map, &lti::Experiment::new(t.x0.clone(), u.clone(), 1.0)?)?;
        let conf = confinement(&clean, &sub.basis);
        let (a, b) = (map.ad(), map.bd());
        let mut out = Vec::with_capacity(cfg.noise.len());
        for &eta in &cfg.noise {
            let noise_seed: u64 = rand::Rng::random(&mut rng);
            let traj = lti::add_noise(&clean, eta, noise_seed)?;
            let fit = estimators::dmdc_fit(&traj, &u)?;
            let emp = visibility::empirical_visible_basis(&traj, cfg.empirical_tau)?;
            out.push(TrialRow {
                n,
                p,
                k,
                trial,
                eta,
                k_hat: emp.k_hat,
                theta_max_deg: visibility::max_principal_angle_deg(&sub.basis, &emp.basis)?,
                ree_full: estimators::ree_full(a, b, &fit.ad_hat, &fit.bd_hat)?,
                ree_oracle_vis: estimators::ree_vis(a, b, &fit.ad_hat, &fit.bd_hat, &sub.basis)?,
                ree_emp_vis: estimators::ree_vis(a, b, &fit.ad_hat, &fit.bd_hat, &emp.basis)?,
                confinement: conf,
            });
        }
        Ok(out)
    })?;
    let records: Vec<TrialRow> = per_job.into_iter().flatten().collect();

    let mut rows = Vec::new();
    for &(n, p, k) in &cells {
        for &eta in &cfg.noise {
            let sel: Vec<&TrialRow> = records
                .iter()
                .filter(|r| r.n == n && r.p == p && r.k == k && r.eta == eta)
                .collect();
            let t = ResultRow::new("empirical_vis", "", 0.0, 0)
                .n(n)
                .p(p)
                .k(k)
                .sigma(eta);
            let col = |f: fn(&TrialRow) -> f64| sel.iter().map(|r| f(r)).collect::<Vec<_>>();
            rows.extend(summary_rows(&t, "ree_full", &col(|r| r.ree_full)));
            rows.extend(summary_rows(
                &t,
                "ree_oracle_vis",
                &col(|r| r.ree_oracle_vis),
            ));
            rows.extend(summary_rows(&t, "ree_emp_vis", &col(|r| r.ree_emp_vis)));
            rows.extend(summary_rows(&t, "theta_max_deg", &col(|r| r.theta_max_deg)));
            rows.extend(summary_rows(&t, "k_hat", &col(|r| r.k_hat as f64)));
        }
    }
    let worst = records.iter().map(|r| r.confinement).fold(0.0, f64::max);
    rows.push(ResultRow::new(
        "empirical_vis",
        "confinement_max",
        worst,
        cells.len() * trials,
    ));
    Ok(Report {
        config: cfg.clone(),
        rows,
        tables: vec![Table {
            name: "empirical_vis_trials.csv".into(),
            csv: to_csv(&records)?,
        }],
        notes: vec!["sigma column holds the observation noise level eta".into()],
    })
}

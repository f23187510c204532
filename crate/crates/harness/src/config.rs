//! Run configuration: which experiment, on which grids, with which seed.
//!
//! A config file only has to name the experiment; every omitted field takes
//! the experiment's default, so `{"experiment_id": "heatmap"}` is a complete
//! run description.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use visilin_core::estimators::Method;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    Heatmap,
    X0Density,
    RecoveryNoise,
    RecoveryK,
    DtSweep,
    DimSweep,
    EmpiricalVis,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 7] = [
        ExperimentId::Heatmap,
        ExperimentId::X0Density,
        ExperimentId::RecoveryNoise,
        ExperimentId::RecoveryK,
        ExperimentId::DtSweep,
        ExperimentId::DimSweep,
        ExperimentId::EmpiricalVis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Heatmap => "heatmap",
            ExperimentId::X0Density => "x0_density",
            ExperimentId::RecoveryNoise => "recovery_noise",
            ExperimentId::RecoveryK => "recovery_k",
            ExperimentId::DtSweep => "dt_sweep",
            ExperimentId::DimSweep => "dim_sweep",
            ExperimentId::EmpiricalVis => "empirical_vis",
        }
    }
}

impl std::fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub const DEFAULT_SEED: u64 = 12345;

/// Fully resolved configuration. Field meaning per experiment:
///
/// * `dims` is the state-dimension grid, `densities` the sparsity grid `p`.
/// * `x0_densities` is the initial-state mask density grid (`x0_density`).
/// * `noise` holds observation noise levels (`recovery_*`, `empirical_vis`).
/// * `ks` holds target visible dimensions (`recovery_*`, `dim_sweep`,
///   `empirical_vis`).
/// * `trials` counts systems per grid cell (per `k` for recovery).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment_id: ExperimentId,
    pub dims: Vec<usize>,
    pub densities: Vec<f64>,
    pub x0_densities: Vec<f64>,
    pub noise: Vec<f64>,
    pub dts: Vec<f64>,
    pub ks: Vec<usize>,
    pub methods: Vec<Method>,
    pub m: usize,
    pub horizon: usize,
    pub trials: usize,
    pub x0_per_system: usize,
    pub base_seed: u64,
    pub eps: f64,
    pub density_window: [f64; 2],
    pub rho_target: f64,
    pub empirical_tau: f64,
    pub max_tries: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// On-disk form; everything but the experiment is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment_id: Option<ExperimentId>,
    dims: Option<Vec<usize>>,
    densities: Option<Vec<f64>>,
    x0_densities: Option<Vec<f64>>,
    noise: Option<Vec<f64>>,
    dts: Option<Vec<f64>>,
    ks: Option<Vec<usize>>,
    methods: Option<Vec<Method>>,
    m: Option<usize>,
    horizon: Option<usize>,
    trials: Option<usize>,
    x0_per_system: Option<usize>,
    base_seed: Option<u64>,
    eps: Option<f64>,
    density_window: Option<[f64; 2]>,
    rho_target: Option<f64>,
    empirical_tau: Option<f64>,
    max_tries: Option<usize>,
    output: Option<PathBuf>,
}

fn tenths() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

const NOISE_LEVELS: [f64; 5] = [0.0, 1e-3, 1e-2, 1e-1, 0.5];

impl RunConfig {
    pub fn defaults(id: ExperimentId) -> Self {
        let mut cfg = RunConfig {
            experiment_id: id,
            dims: vec![10],
            densities: vec![0.1],
            x0_densities: vec![1.0],
            noise: vec![0.0],
            dts: vec![1.0],
            ks: vec![5],
            methods: vec![Method::Dmdc],
            m: 2,
            horizon: 80,
            trials: 50,
            x0_per_system: 1,
            base_seed: DEFAULT_SEED,
            eps: visilin_core::identifiability::DEFAULT_EPS,
            density_window: [0.3, 0.7],
            rho_target: 0.95,
            empirical_tau: 1e-10,
            max_tries: 1_000_000,
            output: None,
        };
        match id {
            ExperimentId::Heatmap => {
                cfg.dims = (2..=10).collect();
                cfg.densities = tenths();
                cfg.trials = 1000;
            }
            ExperimentId::X0Density => {
                cfg.dims = (2..=10).collect();
                cfg.densities = tenths();
                cfg.x0_densities = vec![0.25, 0.5, 0.75, 1.0];
                cfg.trials = 1000;
                cfg.x0_per_system = 100;
            }
            ExperimentId::RecoveryNoise | ExperimentId::RecoveryK => {
                cfg.ks = (5..=10).collect();
                cfg.trials = 45;
                cfg.methods = vec![Method::Dmdc, Method::Stlsq];
                if id == ExperimentId::RecoveryNoise {
                    cfg.noise = NOISE_LEVELS.to_vec();
                }
            }
            ExperimentId::DtSweep => {
                cfg.dts = vec![0.05, 0.1, 0.25, 0.5, 1.0, 2.0];
                cfg.trials = 50;
            }
            ExperimentId::DimSweep => {
                cfg.dims = (1..=20).map(|i| 5 * i).collect();
                cfg.trials = 24;
            }
            ExperimentId::EmpiricalVis => {
                cfg.dims = vec![20];
                cfg.noise = NOISE_LEVELS.to_vec();
                cfg.trials = 200;
            }
        }
        cfg
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text)
            .map_err(|e| HarnessError::Config(format!("config JSON: {e}")))?;
        let id = raw
            .experiment_id
            .ok_or_else(|| HarnessError::Config("missing experiment_id".into()))?;
        let d = Self::defaults(id);
        let cfg = RunConfig {
            experiment_id: id,
            dims: raw.dims.unwrap_or(d.dims),
            densities: raw.densities.unwrap_or(d.densities),
            x0_densities: raw.x0_densities.unwrap_or(d.x0_densities),
            noise: raw.noise.unwrap_or(d.noise),
            dts: raw.dts.unwrap_or(d.dts),
            ks: raw.ks.unwrap_or(d.ks),
            methods: raw.methods.unwrap_or(d.methods),
            m: raw.m.unwrap_or(d.m),
            horizon: raw.horizon.unwrap_or(d.horizon),
            trials: raw.trials.unwrap_or(d.trials),
            x0_per_system: raw.x0_per_system.unwrap_or(d.x0_per_system),
            base_seed: raw.base_seed.unwrap_or(d.base_seed),
            eps: raw.eps.unwrap_or(d.eps),
            density_window: raw.density_window.unwrap_or(d.density_window),
            rho_target: raw.rho_target.unwrap_or(d.rho_target),
            empirical_tau: raw.empirical_tau.unwrap_or(d.empirical_tau),
            max_tries: raw.max_tries.unwrap_or(d.max_tries),
            output: raw.output,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return bad("dims must be a non-empty list of positive sizes".into());
        }
        if self.densities.is_empty() || self.densities.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("densities must be a non-empty list in [0, 1]".into());
        }
        if self.m == 0 {
            return bad("input dimension m must be positive".into());
        }
        let min_n = *self.dims.iter().min().expect("non-empty");
        match self.experiment_id {
            ExperimentId::Heatmap => {}
            ExperimentId::X0Density => {
                if self.x0_densities.is_empty()
                    || self.x0_densities.iter().any(|p| !(*p > 0.0 && *p <= 1.0))
                {
                    return bad("x0_densities must be a non-empty list in (0, 1]".into());
                }
                if self.x0_per_system == 0 {
                    return bad("x0_per_system must be at least 1".into());
                }
                let [lo, hi] = self.density_window;
                if !(0.0..=1.0).contains(&lo) || !(lo..=1.0).contains(&hi) {
                    return bad(format!(
                        "density window [{lo}, {hi}] is not a sub-interval of [0, 1]"
                    ));
                }
                if !(self.eps > 0.0) {
                    return bad("eps must be positive".into());
                }
            }
            _ => {
                if self.horizon < 2 {
                    return bad("horizon must be at least 2".into());
                }
                if !(self.rho_target > 0.0 && self.rho_target.is_finite()) {
                    return bad("rho_target must be positive".into());
                }
                if self.max_tries == 0 {
                    return bad("max_tries must be positive".into());
                }
            }
        }
        if matches!(
            self.experiment_id,
            ExperimentId::RecoveryNoise | ExperimentId::RecoveryK | ExperimentId::EmpiricalVis
        ) && (self.noise.is_empty() || self.noise.iter().any(|s| !(*s >= 0.0 && s.is_finite())))
        {
            return bad("noise must be a non-empty list of nonnegative levels".into());
        }
        if matches!(
            self.experiment_id,
            ExperimentId::RecoveryNoise
                | ExperimentId::RecoveryK
                | ExperimentId::DimSweep
                | ExperimentId::EmpiricalVis
        ) && (self.ks.is_empty() || self.ks.iter().any(|&k| k == 0 || k > min_n))
        {
            return bad(format!("ks must be a non-empty list in 1..={min_n}"));
        }
        if self.experiment_id == ExperimentId::DtSweep
            && (self.dts.is_empty() || self.dts.iter().any(|d| !(*d > 0.0 && d.is_finite())))
        {
            return bad("dts must be a non-empty list of positive steps".into());
        }
        if matches!(
            self.experiment_id,
            ExperimentId::RecoveryNoise | ExperimentId::RecoveryK
        ) && self.methods.is_empty()
        {
            return bad("methods must be non-empty".into());
        }
        if self.experiment_id == ExperimentId::EmpiricalVis && !(self.empirical_tau > 0.0) {
            return bad("empirical_tau must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for id in ExperimentId::ALL {
            RunConfig::defaults(id).validate().unwrap();
        }
    }

    #[test]
    fn minimal_file_takes_defaults() {
        let cfg = RunConfig::from_json(r#"{"experiment_id": "dt_sweep"}"#).unwrap();
        assert_eq!(cfg, RunConfig::defaults(ExperimentId::DtSweep));
        let cfg = RunConfig::from_json(r#"{"experiment_id": "heatmap", "trials": 7, "dims": [3]}"#)
            .unwrap();
        assert_eq!((cfg.trials, cfg.dims.as_slice()), (7, &[3][..]));
    }

    #[test]
    fn round_trips() {
        let cfg = RunConfig::defaults(ExperimentId::RecoveryNoise);
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            r#"{}"#,
            r#"{"experiment_id": "nope"}"#,
            r#"{"experiment_id": "heatmap", "trials": 0}"#,
            r#"{"experiment_id": "heatmap", "dims": []}"#,
            r#"{"experiment_id": "heatmap", "densities": [1.5]}"#,
            r#"{"experiment_id": "heatmap", "colour": 3}"#,
            r#"{"experiment_id": "x0_density", "x0_densities": [0.0]}"#,
            r#"{"experiment_id": "dt_sweep", "dts": [0.1, -1.0]}"#,
            r#"{"experiment_id": "dim_sweep", "ks": [6], "dims": [5, 10]}"#,
            r#"{"experiment_id": "recovery_noise", "noise": []}"#,
            r#"{"experiment_id": "recovery_k", "methods": []}"#,
            "not json",
        ] {
            assert!(
                matches!(RunConfig::from_json(text), Err(HarnessError::Config(_))),
                "{text}"
            );
        }
    }
}

//! System and experiment data model, exact zero-order-hold discretization,
//! trajectory simulation and observation noise.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;

/// Continuous-time controlled LTI pair `dx/dt = A x + B u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return invalid(format!("A must be square, got {}x{}", a.nrows(), a.ncols()));
        }
        if b.nrows() != a.nrows() {
            return invalid(format!("B has {} rows, expected {}", b.nrows(), a.nrows()));
        }
        if !linalg::all_finite(&a) || !linalg::all_finite(&b) {
            return invalid("system matrices contain non-finite entries");
        }
        Ok(Self { a, b })
    }

    /// Autonomous system (`m = 0`).
    pub fn autonomous(a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        Self::new(a, DMatrix::zeros(n, 0))
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Input dimension.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.a, self.b)
    }
}

/// Sampled pair `x[j+1] = A_d x[j] + B_d u[j]` with step `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSystem {
    ad: DMatrix<f64>,
    bd: DMatrix<f64>,
    dt: f64,
}

impl DiscreteSystem {
    pub fn new(ad: DMatrix<f64>, bd: DMatrix<f64>, dt: f64) -> Result<Self> {
        check_dt(dt)?;
        // reuse the shape/finiteness checks
        let sys = LtiSystem::new(ad, bd)?;
        let (ad, bd) = sys.into_parts();
        Ok(Self { ad, bd, dt })
    }

    pub fn ad(&self) -> &DMatrix<f64> {
        &self.ad
    }

    pub fn bd(&self) -> &DMatrix<f64> {
        &self.bd
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n(&self) -> usize {
        self.ad.nrows()
    }

    pub fn m(&self) -> usize {
        self.bd.ncols()
    }

    /// The one-step pair viewed as a plain `(A, B)` system, e.g. for Krylov
    /// computations on the sampled model.
    pub fn as_pair(&self) -> LtiSystem {
        LtiSystem {
            a: self.ad.clone(),
            b: self.bd.clone(),
        }
    }
}

/// One realized experiment: initial state plus a piecewise-constant input
/// sequence held over steps of length `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    x0: DVector<f64>,
    /// `m x T`, column `j` is `u[j]`.
    inputs: DMatrix<f64>,
    dt: f64,
}

impl Experiment {
    pub fn new(x0: DVector<f64>, inputs: DMatrix<f64>, dt: f64) -> Result<Self> {
        check_dt(dt)?;
        if inputs.ncols() == 0 {
            return invalid("experiment needs at least one input sample");
        }
        if !x0.iter().all(|v| v.is_finite()) || !linalg::all_finite(&inputs) {
            return invalid("experiment contains non-finite values");
        }
        Ok(Self { x0, inputs, dt })
    }

    /// Builds the input matrix from a list of `m`-vectors.
    pub fn from_samples(x0: DVector<f64>, samples: &[DVector<f64>], dt: f64) -> Result<Self> {
        let m = samples.first().map(|u| u.len()).unwrap_or(0);
        if samples.iter().any(|u| u.len() != m) {
            return invalid("input samples have inconsistent lengths");
        }
        let inputs = DMatrix::from_fn(m, samples.len(), |i, j| samples[j][i]);
        Self::new(x0, inputs, dt)
    }

    pub fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of input samples `T`.
    pub fn len(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.ncols() == 0
    }

    pub fn input(&self, j: usize) -> DVector<f64> {
        self.inputs.column(j).into_owned()
    }
}

/// Sampled state trajectory `x[0..=T]`, stored column-wise (`n x (T+1)`).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: DMatrix<f64>,
    dt: f64,
}

impl Trajectory {
    pub fn new(states: DMatrix<f64>, dt: f64) -> Result<Self> {
        check_dt(dt)?;
        if states.ncols() == 0 {
            return invalid("trajectory must contain at least one state");
        }
        Ok(Self { states, dt })
    }

    pub fn states(&self) -> &DMatrix<f64> {
        &self.states
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n(&self) -> usize {
        self.states.nrows()
    }

    /// Number of stored states (`T + 1` for a simulated experiment).
    pub fn len(&self) -> usize {
        self.states.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.states.ncols() == 0
    }

    pub fn state(&self, j: usize) -> DVector<f64> {
        self.states.column(j).into_owned()
    }

    /// Largest state norm over the trajectory.
    pub fn peak_norm(&self) -> f64 {
        self.states
            .column_iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return invalid(format!("step size must be positive and finite, got {dt}"));
    }
    Ok(())
}

/// Exact zero-order-hold sampling: `A_d = e^{A dt}`, `B_d = int_0^dt e^{As} B ds`,
/// both read off `exp(dt [[A, B], [0, 0]])`.
pub fn discretize_zoh(sys: &LtiSystem, dt: f64) -> Result<DiscreteSystem> {
    check_dt(dt)?;
    let (n, m) = (sys.n(), sys.m());
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(sys.a() * dt));
    aug.view_mut((0, n), (n, m)).copy_from(&(sys.b() * dt));
    let e = aug.exp();
    if !linalg::all_finite(&e) {
        return Err(Error::NumericalDegeneracy(
            "matrix exponential overflowed".into(),
        ));
    }
    let ad = e.view((0, 0), (n, n)).into_owned();
    let bd = e.view((0, n), (n, m)).into_owned();
    DiscreteSystem::new(ad, bd, dt)
}

/// Forward-Euler update pair `(I + A dt, B dt)`.
pub fn euler_map(sys: &LtiSystem, dt: f64) -> Result<DiscreteSystem> {
    check_dt(dt)?;
    let n = sys.n();
    DiscreteSystem::new(DMatrix::identity(n, n) + sys.a() * dt, sys.b() * dt, dt)
}

fn check_compatible(n: usize, m: usize, dt: f64, exp: &Experiment) -> Result<()> {
    if exp.x0().len() != n {
        return invalid(format!("x0 has length {}, expected {n}", exp.x0().len()));
    }
    if exp.inputs().nrows() != m {
        return invalid(format!(
            "inputs have dimension {}, expected {m}",
            exp.inputs().nrows()
        ));
    }
    if (exp.dt() - dt).abs() > 1e-12 * dt.max(exp.dt()) {
        return invalid(format!(
            "experiment dt {} differs from model dt {dt}",
            exp.dt()
        ));
    }
    Ok(())
}

fn iterate(ad: &DMatrix<f64>, bd: &DMatrix<f64>, exp: &Experiment) -> DMatrix<f64> {
    let n = ad.nrows();
    let steps = exp.len();
    let mut states = DMatrix::zeros(n, steps + 1);
    states.set_column(0, exp.x0());
    let mut x = exp.x0().clone();
    for j in 0..steps {
        x = ad * &x + bd * exp.inputs().column(j);
        states.set_column(j + 1, &x);
    }
    states
}

/// Runs `x[j+1] = A_d x[j] + B_d u[j]` for every input sample.
pub fn simulate_discrete(dsys: &DiscreteSystem, exp: &Experiment) -> Result<Trajectory> {
    check_compatible(dsys.n(), dsys.m(), dsys.dt(), exp)?;
    Trajectory::new(iterate(dsys.ad(), dsys.bd(), exp), exp.dt())
}

/// Forward-Euler simulation of the continuous-time system at the
/// experiment's step size.
pub fn simulate_euler(sys: &LtiSystem, exp: &Experiment) -> Result<Trajectory> {
    let map = euler_map(sys, exp.dt())?;
    simulate_discrete(&map, exp)
}

/// Adds i.i.d. `N(0, sigma^2)` noise to every state entry.
pub fn add_noise(traj: &Trajectory, sigma: f64, seed: u64) -> Result<Trajectory> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return invalid(format!("noise level must be nonnegative, got {sigma}"));
    }
    if sigma == 0.0 {
        return Ok(traj.clone());
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    let noisy = traj.states().map(|v| v + normal.sample(&mut rng));
    Trajectory::new(noisy, traj.dt())
}

/// JSON interchange document for a system and, optionally, an experiment.
///
/// Matrices are row-major nested arrays; `u` lists the input vectors in time
/// order.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SystemDocument {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl SystemDocument {
    pub fn from_system(sys: &LtiSystem) -> Self {
        Self {
            a: linalg::to_rows(sys.a()),
            b: linalg::to_rows(sys.b()),
            x0: None,
            u: None,
            dt: None,
        }
    }

    pub fn with_experiment(mut self, exp: &Experiment) -> Self {
        self.x0 = Some(exp.x0().iter().cloned().collect());
        self.u = Some(
            exp.inputs()
                .column_iter()
                .map(|c| c.iter().cloned().collect())
                .collect(),
        );
        self.dt = Some(exp.dt());
        self
    }

    pub fn system(&self) -> Result<LtiSystem> {
        let a = linalg::from_rows(&self.a, 0)?;
        let b = linalg::from_rows(&self.b, 0)?;
        let b = if self.b.is_empty() {
            DMatrix::zeros(a.nrows(), 0)
        } else {
            b
        };
        LtiSystem::new(a, b)
    }

    pub fn x0(&self) -> Option<DVector<f64>> {
        self.x0.as_ref().map(|v| DVector::from_column_slice(v))
    }

    /// The stored experiment, if `x0`, `u` and `dt` are all present.
    pub fn experiment(&self) -> Result<Option<Experiment>> {
        match (&self.x0, &self.u, self.dt) {
            (Some(x0), Some(u), Some(dt)) => {
                let samples: Vec<DVector<f64>> =
                    u.iter().map(|v| DVector::from_column_slice(v)).collect();
                Experiment::from_samples(DVector::from_column_slice(x0), &samples, dt).map(Some)
            }
            _ => Ok(None),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("system JSON: {e}")))
    }
}

/// Writes samples as CSV with header `t,{prefix}0,...`; row `j` has `t = j dt`.
pub fn samples_to_csv(samples: &DMatrix<f64>, dt: f64, prefix: &str) -> String {
    let mut out = String::from("t");
    for i in 0..samples.nrows() {
        out.push_str(&format!(",{prefix}{i}"));
    }
    out.push('\n');
    for (j, col) in samples.column_iter().enumerate() {
        out.push_str(&format!("{}", j as f64 * dt));
        for v in col.iter() {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

/// Parses CSV written by [`samples_to_csv`]; returns the samples column-wise
/// and the step inferred from the first two time stamps (if present).
pub fn samples_from_csv(text: &str) -> Result<(DMatrix<f64>, Option<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let width = reader
        .headers()
        .map_err(|e| Error::InvalidInput(format!("csv header: {e}")))?
        .len();
    if width == 0 {
        return invalid("csv has no columns");
    }
    let mut times = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::InvalidInput(format!("csv row: {e}")))?;
        if rec.len() != width {
            return invalid("csv row width differs from header");
        }
        let vals: Vec<f64> = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidInput(format!("csv value: {e}")))?;
        times.push(vals[0]);
        cols.push(vals[1..].to_vec());
    }
    let dims = width - 1;
    let m = DMatrix::from_fn(dims, cols.len(), |i, j| cols[j][i]);
    let dt = if times.len() >= 2 {
        Some(times[1] - times[0])
    } else {
        None
    };
    Ok((m, dt))
}

impl Trajectory {
    /// CSV with header `t,x0,...,x{n-1}`.
    pub fn to_csv(&self) -> String {
        samples_to_csv(&self.states, self.dt, "x")
    }

    /// Parses [`Trajectory::to_csv`] output. `dt` falls back to `default_dt`
    /// when the file holds a single row.
    pub fn from_csv(text: &str, default_dt: f64) -> Result<Self> {
        let (states, dt) = samples_from_csv(text)?;
        Self::new(states, dt.unwrap_or(default_dt))
    }
}

//! One-step discrete-map estimators and recovery metrics.
//!
//! Both estimators regress `X1 ~ [A_hat B_hat] [X0; U0]` on snapshot
//! matrices. On rank-deficient regressors the least-squares solve returns the
//! minimum-norm solution, which on noise-free data is a member of the
//! experiment-consistent set rather than the truth.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::lti::Trajectory;

/// Relative singular-value cutoff of the least-squares pseudoinverse.
pub const PINV_RTOL: f64 = 1e-10;
pub const DEFAULT_STLSQ_LAMBDA: f64 = 0.05;
pub const DEFAULT_STLSQ_ITERS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dmdc,
    Stlsq,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Dmdc => "dmdc",
            Method::Stlsq => "stlsq",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Accepts `moesp` as a synonym for `dmdc`.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dmdc" | "moesp" => Ok(Method::Dmdc),
            "stlsq" => Ok(Method::Stlsq),
            other => invalid(format!("unknown method '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub ad_hat: DMatrix<f64>,
    pub bd_hat: DMatrix<f64>,
    /// `||X1 - [A_hat B_hat] [X0; U0]||_F`.
    pub residual: f64,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDocument {
    pub method: Method,
    #[serde(rename = "A_hat")]
    pub a_hat: Vec<Vec<f64>>,
    #[serde(rename = "B_hat")]
    pub b_hat: Vec<Vec<f64>>,
    pub residual: f64,
}

impl FitResult {
    pub fn to_document(&self) -> FitDocument {
        FitDocument {
            method: self.method,
            a_hat: linalg::to_rows(&self.ad_hat),
            b_hat: linalg::to_rows(&self.bd_hat),
            residual: self.residual,
        }
    }
}

struct Snapshots {
    z: DMatrix<f64>,
    x1: DMatrix<f64>,
    n: usize,
}

fn snapshots(traj: &Trajectory, u_seq: &DMatrix<f64>) -> Result<Snapshots> {
    let t = u_seq.ncols();
    if t == 0 {
        return invalid("at least one snapshot pair is required");
    }
    if traj.len() < t + 1 {
        return invalid(format!(
            "{} inputs need {} states, trajectory has {}",
            t,
            t + 1,
            traj.len()
        ));
    }
    let states = traj.states();
    let x0 = states.columns(0, t).into_owned();
    let x1 = states.columns(1, t).into_owned();
    Ok(Snapshots {
        z: linalg::vstack(&[&x0, u_seq]),
        x1,
        n: traj.n(),
    })
}

fn finish(s: &Snapshots, coef: DMatrix<f64>, method: Method) -> FitResult {
    let residual = (&s.x1 - &coef * &s.z).norm();
    let n = s.n;
    let m = coef.ncols() - n;
    FitResult {
        ad_hat: coef.columns(0, n).into_owned(),
        bd_hat: coef.columns(n, m).into_owned(),
        residual,
        method,
    }
}

/// Minimum-norm least-squares fit of the one-step map.
///
/// `u_seq` is `m x T`; the trajectory must hold at least `T + 1` states.
pub fn dmdc_fit(traj: &Trajectory, u_seq: &DMatrix<f64>) -> Result<FitResult> {
    let s = snapshots(traj, u_seq)?;
    let coef = &s.x1 * linalg::pinv(&s.z, PINV_RTOL);
    Ok(finish(&s, coef, Method::Dmdc))
}

/// The subspace identification baseline coincides with [`dmdc_fit`] for
/// full-state measurements.
pub fn moesp_fit(traj: &Trajectory, u_seq: &DMatrix<f64>) -> Result<FitResult> {
    dmdc_fit(traj, u_seq)
}

/// Sequentially thresholded least squares over the stacked coefficients
/// `[A_hat B_hat]`.
///
/// Starts from the least-squares fit, then alternates hard thresholding
/// (`|c| < lambda` set to zero) with row-wise refits on the surviving
/// regressors. Stops after `iters` rounds or when the support stops changing.
pub fn stlsq_fit(
    traj: &Trajectory,
    u_seq: &DMatrix<f64>,
    lambda: f64,
    iters: usize,
) -> Result<FitResult> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return invalid(format!("lambda must be nonnegative, got {lambda}"));
    }
    if iters == 0 {
        return invalid("iteration count must be positive");
    }
    let s = snapshots(traj, u_seq)?;
    let mut coef = &s.x1 * linalg::pinv(&s.z, PINV_RTOL);
    let (rows, cols) = coef.shape();
    let mut active = vec![vec![true; cols]; rows];

    for _ in 0..iters {
        let mut changed = false;
        for (i, row_active) in active.iter_mut().enumerate() {
            for (j, on) in row_active.iter_mut().enumerate() {
                if *on && coef[(i, j)].abs() < lambda {
                    *on = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
        for (i, row_active) in active.iter().enumerate() {
            let idx: Vec<usize> = (0..cols).filter(|&j| row_active[j]).collect();
            let mut row = vec![0.0; cols];
            if !idx.is_empty() {
                let z_s = s.z.select_rows(idx.iter());
                let c = s.x1.row(i) * linalg::pinv(&z_s, PINV_RTOL);
                for (pos, &j) in idx.iter().enumerate() {
                    row[j] = c[pos];
                }
            }
            for (j, v) in row.into_iter().enumerate() {
                coef[(i, j)] = v;
            }
        }
    }
    Ok(finish(&s, coef, Method::Stlsq))
}

pub fn fit(method: Method, traj: &Trajectory, u_seq: &DMatrix<f64>) -> Result<FitResult> {
    match method {
        Method::Dmdc => dmdc_fit(traj, u_seq),
        Method::Stlsq => stlsq_fit(traj, u_seq, DEFAULT_STLSQ_LAMBDA, DEFAULT_STLSQ_ITERS),
    }
}

fn check_pair(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    a_hat: &DMatrix<f64>,
    b_hat: &DMatrix<f64>,
) -> Result<()> {
    if a.shape() != a_hat.shape() || b.shape() != b_hat.shape() || a.nrows() != b.nrows() {
        return invalid("truth and estimate have different shapes");
    }
    Ok(())
}

/// `||[A_hat B_hat] - [A B]||_F / ||[A B]||_F`.
pub fn ree_full(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    a_hat: &DMatrix<f64>,
    b_hat: &DMatrix<f64>,
) -> Result<f64> {
    check_pair(a, b, a_hat, b_hat)?;
    let denom = (a.norm_squared() + b.norm_squared()).sqrt();
    if denom == 0.0 {
        return invalid("relative error of a zero system is undefined");
    }
    let num = ((a_hat - a).norm_squared() + (b_hat - b).norm_squared()).sqrt();
    Ok(num / denom)
}

/// Relative error of the restrictions `(P^T A P, P^T B)` to `span(basis)`.
///
/// A square orthogonal basis leaves Frobenius norms unchanged, so that case
/// returns [`ree_full`] directly.
pub fn ree_vis(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    a_hat: &DMatrix<f64>,
    b_hat: &DMatrix<f64>,
    basis: &DMatrix<f64>,
) -> Result<f64> {
    check_pair(a, b, a_hat, b_hat)?;
    if basis.nrows() != a.nrows() {
        return invalid("basis row count differs from state dimension");
    }
    if basis.ncols() == a.nrows() {
        return ree_full(a, b, a_hat, b_hat);
    }
    let pt = basis.transpose();
    let av = &pt * a * basis;
    let bv = &pt * b;
    let av_hat = &pt * a_hat * basis;
    let bv_hat = &pt * b_hat;
    let denom = (av.norm_squared() + bv.norm_squared()).sqrt();
    if denom == 0.0 {
        return invalid("restricted truth is zero");
    }
    let num = ((av_hat - av).norm_squared() + (bv_hat - bv).norm_squared()).sqrt();
    Ok(num / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistent::{self, ConsistentParam};
    use crate::lti::{self, DiscreteSystem, Experiment, LtiSystem};
    use crate::visibility;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, Normal};

    fn gaussian(r: usize, c: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        DMatrix::from_fn(r, c, |_, _| normal.sample(&mut rng))
    }

    fn run(dsys: &DiscreteSystem, x0: DVector<f64>, u: &DMatrix<f64>) -> Trajectory {
        let exp = Experiment::new(x0, u.clone(), dsys.dt()).unwrap();
        lti::simulate_discrete(dsys, &exp).unwrap()
    }

    #[test]
    fn method_names() {
        assert_eq!("moesp".parse::<Method>().unwrap(), Method::Dmdc);
        assert_eq!("STLSQ".parse::<Method>().unwrap(), Method::Stlsq);
        assert!("node".parse::<Method>().is_err());
        assert_eq!(Method::Stlsq.to_string(), "stlsq");
    }

    #[test]
    fn recovers_informative_system() {
        let ad = gaussian(3, 3, 1) * 0.3;
        let bd = gaussian(3, 2, 2);
        let dsys = DiscreteSystem::new(ad.clone(), bd.clone(), 1.0).unwrap();
        let u = gaussian(2, 40, 3);
        let traj = run(&dsys, DVector::from_vec(vec![1.0, 0.0, -1.0]), &u);
        let fit = dmdc_fit(&traj, &u).unwrap();
        assert!((&fit.ad_hat - &ad).norm() + (&fit.bd_hat - &bd).norm() < 1e-8);
        assert!(fit.residual < 1e-10);
        assert_eq!(moesp_fit(&traj, &u).unwrap(), fit);
    }

    #[test]
    fn constant_states_with_zero_input() {
        let states = DMatrix::from_fn(2, 6, |i, _| if i == 0 { 1.0 } else { 2.0 });
        let traj = Trajectory::new(states, 1.0).unwrap();
        let u = DMatrix::zeros(1, 5);
        let fit = dmdc_fit(&traj, &u).unwrap();
        let x = DVector::from_vec(vec![1.0, 2.0]);
        assert!((&fit.ad_hat * &x - &x).norm() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn rejects_short_data() {
        let traj = Trajectory::new(DMatrix::zeros(2, 3), 1.0).unwrap();
        assert!(dmdc_fit(&traj, &DMatrix::zeros(1, 0)).is_err());
        assert!(dmdc_fit(&traj, &DMatrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn rank_deficient_fit_is_consistent() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 2.0, 1.0, 0.0, 0.0, 3.0]) * 0.2;
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 1.0, 0.0, 0.0]);
        let sys = LtiSystem::new(a, b).unwrap();
        let x0 = DVector::from_vec(vec![1.0, -1.0, 0.0]);
        let dsys = lti::discretize_zoh(&sys, 0.1).unwrap();
        let u = gaussian(2, 80, 4);
        let traj = run(&dsys, x0.clone(), &u);
        let fit = dmdc_fit(&traj, &u).unwrap();
        // the fitted discrete map must reproduce the data exactly
        let refit = DiscreteSystem::new(fit.ad_hat.clone(), fit.bd_hat.clone(), 0.1).unwrap();
        let again = run(&refit, x0.clone(), &u);
        let scale = traj.peak_norm().max(1.0);
        assert!((again.states() - traj.states()).abs().max() / scale < 1e-8);
        let sub = visibility::visible_subspace(&sys, &x0, 1e-10).unwrap();
        let vis = ree_vis(dsys.ad(), dsys.bd(), &fit.ad_hat, &fit.bd_hat, &sub.basis).unwrap();
        assert!(vis < 1e-8, "{vis}");
        let full = ree_full(dsys.ad(), dsys.bd(), &fit.ad_hat, &fit.bd_hat).unwrap();
        assert!(full > 1e-2);
    }

    #[test]
    fn stlsq_with_zero_lambda_is_dmdc() {
        let dsys = DiscreteSystem::new(gaussian(3, 3, 5) * 0.3, gaussian(3, 1, 6), 1.0).unwrap();
        let u = gaussian(1, 30, 7);
        let traj = run(&dsys, DVector::from_vec(vec![0.5, 0.5, 0.5]), &u);
        let a = dmdc_fit(&traj, &u).unwrap();
        let b = stlsq_fit(&traj, &u, 0.0, 8).unwrap();
        assert_eq!(a.ad_hat, b.ad_hat);
        assert_eq!(a.bd_hat, b.bd_hat);
    }

    #[test]
    fn stlsq_recovers_sparse_support() {
        let ad = DMatrix::from_row_slice(3, 3, &[0.5, 0.0, 0.0, 0.2, -0.3, 0.0, 0.0, 0.0, 0.4]);
        let bd = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, -0.7]);
        let dsys = DiscreteSystem::new(ad.clone(), bd.clone(), 1.0).unwrap();
        let u = gaussian(1, 60, 8);
        let traj = run(&dsys, DVector::from_vec(vec![1.0, 1.0, 1.0]), &u);
        let fit = stlsq_fit(&traj, &u, 0.05, 8).unwrap();
        assert!((&fit.ad_hat - &ad).norm() + (&fit.bd_hat - &bd).norm() < 1e-8);
        for (est, truth) in fit.ad_hat.iter().zip(ad.iter()) {
            assert_eq!(*est == 0.0, *truth == 0.0);
        }
    }

    #[test]
    fn stlsq_zero_system() {
        let states = DMatrix::from_fn(2, 6, |i, j| if i == 0 && j == 0 { 1.0 } else { 0.0 });
        let traj = Trajectory::new(states, 1.0).unwrap();
        let u = gaussian(1, 5, 9);
        let fit = stlsq_fit(&traj, &u, 0.05, 8).unwrap();
        assert_eq!(fit.ad_hat.amax(), 0.0);
        assert_eq!(fit.bd_hat.amax(), 0.0);
    }

    #[test]
    fn ree_examples() {
        let a = gaussian(3, 3, 10);
        let b = gaussian(3, 2, 11);
        assert_eq!(ree_full(&a, &b, &a, &b).unwrap(), 0.0);
        let za = DMatrix::zeros(3, 3);
        let zb = DMatrix::zeros(3, 2);
        assert!((ree_full(&a, &b, &za, &zb).unwrap() - 1.0).abs() < 1e-15);
        assert!((ree_full(&a, &b, &(&a * 2.0), &(&b * 2.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!(ree_full(&za, &zb, &a, &b).is_err());
    }

    #[test]
    fn ree_vis_ignores_free_blocks() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 2.0, 1.0, 0.0, 0.0, 3.0]);
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 1.0, 0.0, 0.0]);
        let sys = LtiSystem::new(a.clone(), b.clone()).unwrap();
        let x0 = DVector::from_vec(vec![1.0, -1.0, 0.0]);
        let param = ConsistentParam {
            theta: gaussian(2, 1, 12),
            psi: gaussian(1, 1, 13),
        };
        let member = consistent::consistent_member(&sys, &x0, &param).unwrap();
        let sub = visibility::visible_subspace(&sys, &x0, 1e-10).unwrap();
        assert!(ree_vis(&a, &b, member.a(), member.b(), &sub.basis).unwrap() < 1e-10);
        assert!(ree_full(&a, &b, member.a(), member.b()).unwrap() > 1e-3);
    }

    #[test]
    fn ree_vis_full_basis_equals_full() {
        let a = gaussian(3, 3, 14);
        let b = gaussian(3, 1, 15);
        let ah = gaussian(3, 3, 16);
        let bh = gaussian(3, 1, 17);
        let q = gaussian(3, 3, 18).qr().q();
        let full = ree_full(&a, &b, &ah, &bh).unwrap();
        assert!((ree_vis(&a, &b, &ah, &bh, &q).unwrap() - full).abs() < 1e-12);
    }

    #[test]
    fn fit_document_layout() {
        let fit = FitResult {
            ad_hat: DMatrix::identity(2, 2),
            bd_hat: DMatrix::zeros(2, 1),
            residual: 0.0,
            method: Method::Stlsq,
        };
        let json = serde_json::to_value(fit.to_document()).unwrap();
        assert_eq!(json["method"], "stlsq");
        assert_eq!(json["A_hat"][1][1], 1.0);
    }
}

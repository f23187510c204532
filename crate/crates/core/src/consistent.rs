//! The set of systems that reproduce a given experiment.
//!
//! In the adapted basis `T = [P Q]` every consistent system has the form
//! `T [[A_V, Theta], [0, Psi]] T^T` with the same `B`; `Theta` and `Psi` are
//! free, giving `n (n - k)` degrees of freedom.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Result};
use crate::linalg;
use crate::lti::{self, Experiment, LtiSystem};
use crate::visibility::{self, BlockForm, DEFAULT_RTOL};

/// Free blocks of a consistent member: `theta` is `k x (n-k)`, `psi` is `(n-k) x (n-k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistentParam {
    pub theta: DMatrix<f64>,
    pub psi: DMatrix<f64>,
}

impl ConsistentParam {
    pub fn zeros(n: usize, k: usize) -> Self {
        Self {
            theta: DMatrix::zeros(k, n - k),
            psi: DMatrix::zeros(n - k, n - k),
        }
    }

    /// The blocks `(A_*, A_W)` of the truth itself.
    pub fn of_truth(form: &BlockForm) -> Self {
        Self {
            theta: form.a_star.clone(),
            psi: form.a_w.clone(),
        }
    }

    pub fn degrees_of_freedom(&self) -> usize {
        self.theta.len() + self.psi.len()
    }

    /// Frobenius distance between two parameter points.
    pub fn distance(&self, other: &Self) -> f64 {
        ((&self.theta - &other.theta).norm_squared() + (&self.psi - &other.psi).norm_squared())
            .sqrt()
    }
}

fn form_for(sys: &LtiSystem, x0: &DVector<f64>) -> Result<BlockForm> {
    let sub = visibility::visible_subspace(sys, x0, DEFAULT_RTOL)?;
    visibility::block_form(sys, x0, &sub)
}

/// Assembles `T [[A_V, Theta], [0, Psi]] T^T` for a precomputed block form.
pub fn member_from_form(
    form: &BlockForm,
    b: &DMatrix<f64>,
    param: &ConsistentParam,
) -> Result<LtiSystem> {
    let n = form.t_matrix.nrows();
    let k = form.k;
    if param.theta.shape() != (k, n - k) || param.psi.shape() != (n - k, n - k) {
        return invalid(format!(
            "parameter blocks {:?} and {:?} do not fit k = {k}, n = {n}",
            param.theta.shape(),
            param.psi.shape()
        ));
    }
    let mut blocks = DMatrix::zeros(n, n);
    blocks.view_mut((0, 0), (k, k)).copy_from(&form.a_v);
    blocks.view_mut((0, k), (k, n - k)).copy_from(&param.theta);
    blocks
        .view_mut((k, k), (n - k, n - k))
        .copy_from(&param.psi);
    let t = &form.t_matrix;
    LtiSystem::new(t * blocks * t.transpose(), b.clone())
}

pub fn consistent_member(
    sys: &LtiSystem,
    x0: &DVector<f64>,
    param: &ConsistentParam,
) -> Result<LtiSystem> {
    let form = form_for(sys, x0)?;
    member_from_form(&form, sys.b(), param)
}

/// Member with i.i.d. `N(0, scale^2)` entries in `Theta` and `Psi`.
/// When the experiment makes the system identifiable the truth is returned.
pub fn sample_consistent(
    sys: &LtiSystem,
    x0: &DVector<f64>,
    scale: f64,
    seed: u64,
) -> Result<LtiSystem> {
    if !(scale > 0.0 && scale.is_finite()) {
        return invalid(format!("scale must be positive, got {scale}"));
    }
    let form = form_for(sys, x0)?;
    let n = sys.n();
    if form.k == n {
        return Ok(sys.clone());
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, scale).expect("scale checked above");
    let k = form.k;
    let theta = DMatrix::from_fn(k, n - k, |_, _| normal.sample(&mut rng));
    let psi = DMatrix::from_fn(n - k, n - k, |_, _| normal.sample(&mut rng));
    member_from_form(&form, sys.b(), &ConsistentParam { theta, psi })
}

/// `max_j ||x1[j] - x2[j]|| / max(1, max_j ||x1[j]||)` along exact ZOH
/// simulations of both systems under `exp`.
///
/// The normalization keeps the `1e-8` consistency threshold meaningful for
/// trajectories that grow over the horizon.
pub fn consistency_residual(sys1: &LtiSystem, sys2: &LtiSystem, exp: &Experiment) -> Result<f64> {
    if sys1.n() != sys2.n() || sys1.m() != sys2.m() {
        return invalid("systems have different dimensions");
    }
    let t1 = lti::simulate_discrete(&lti::discretize_zoh(sys1, exp.dt())?, exp)?;
    let t2 = lti::simulate_discrete(&lti::discretize_zoh(sys2, exp.dt())?, exp)?;
    let diff = t1.states() - t2.states();
    let worst = diff.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    Ok(worst / t1.peak_norm().max(1.0))
}

/// Whether the experiment pins down `(A, B)` uniquely, i.e. `V(x0) = R^n`.
pub fn is_singleton(sys: &LtiSystem, x0: &DVector<f64>) -> Result<bool> {
    Ok(visibility::visible_subspace(sys, x0, DEFAULT_RTOL)?.is_full())
}

/// Residual of `(A_tilde, B_tilde)` against the consistent-set structure for
/// `(sys, x0)`: restriction mismatch plus input-map mismatch, both Frobenius.
pub fn structure_residual(sys: &LtiSystem, x0: &DVector<f64>, other: &LtiSystem) -> Result<f64> {
    let sub = visibility::visible_subspace(sys, x0, DEFAULT_RTOL)?;
    let p = &sub.basis;
    let ap = sys.a() * p;
    let other_ap = other.a() * p;
    Ok(linalg::hstack(&[&(ap - other_ap), &(sys.b() - other.b())]).norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn appendix_system() -> LtiSystem {
        LtiSystem::new(
            DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 2.0, 1.0, 0.0, 0.0, 3.0]),
            DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 1.0, 0.0, 0.0]),
        )
        .unwrap()
    }

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn probe(x0: DVector<f64>, seed: u64) -> Experiment {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let u = DMatrix::from_fn(2, 80, |_, _| normal.sample(&mut rng));
        Experiment::new(x0, u, 0.1).unwrap()
    }

    #[test]
    fn truth_parameters_reproduce_truth() {
        let sys = appendix_system();
        let x0 = v(&[1.0, -1.0, 0.0]);
        let form = form_for(&sys, &x0).unwrap();
        let member = consistent_member(&sys, &x0, &ConsistentParam::of_truth(&form)).unwrap();
        assert!((member.a() - sys.a()).norm() < 1e-10);
        assert_eq!(member.b(), sys.b());
    }

    #[test]
    fn appendix_member() {
        let sys = appendix_system();
        let x0 = v(&[1.0, -1.0, 0.0]);
        let param = ConsistentParam {
            theta: DMatrix::zeros(2, 1),
            psi: DMatrix::from_element(1, 1, 4.0),
        };
        let member = consistent_member(&sys, &x0, &param).unwrap();
        let expected =
            DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 4.0]);
        assert!((member.a() - expected).amax() < 1e-12, "{}", member.a());
        assert_eq!(member.b(), sys.b());
        assert!(consistency_residual(&sys, &member, &probe(x0, 1)).unwrap() < 1e-9);
        assert!(
            consistency_residual(&sys, &member, &probe(v(&[0.0, 0.0, 1.0]), 1)).unwrap() > 1e-3
        );
    }

    #[test]
    fn full_visibility_has_one_member() {
        let sys = appendix_system();
        let x0 = v(&[0.0, 0.0, 1.0]);
        assert!(is_singleton(&sys, &x0).unwrap());
        let member = consistent_member(&sys, &x0, &ConsistentParam::zeros(3, 3)).unwrap();
        assert!((member.a() - sys.a()).norm() < 1e-12);
        assert_eq!(&sample_consistent(&sys, &x0, 1.0, 9).unwrap(), &sys);
    }

    #[test]
    fn singleton_examples() {
        let sys = appendix_system();
        assert!(!is_singleton(&sys, &v(&[1.0, -1.0, 0.0])).unwrap());
        let full = LtiSystem::new(DMatrix::zeros(3, 3), DMatrix::identity(3, 3)).unwrap();
        assert!(is_singleton(&full, &DVector::zeros(3)).unwrap());
    }

    #[test]
    fn rejects_mismatched_blocks() {
        let sys = appendix_system();
        let bad = ConsistentParam::zeros(3, 1);
        assert!(consistent_member(&sys, &v(&[1.0, -1.0, 0.0]), &bad).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_consistent() {
        let sys = appendix_system();
        let bad = v(&[1.0, -1.0, 0.0]);
        let good = v(&[0.0, 0.0, 1.0]);
        let a = sample_consistent(&sys, &bad, 1.0, 5).unwrap();
        let b = sample_consistent(&sys, &bad, 1.0, 5).unwrap();
        assert_eq!(a, b);
        for seed in 0..100 {
            let member = sample_consistent(&sys, &bad, 1.0, seed).unwrap();
            assert!(consistency_residual(&sys, &member, &probe(bad.clone(), seed)).unwrap() < 1e-8);
            assert!(
                consistency_residual(&sys, &member, &probe(good.clone(), seed)).unwrap() >= 1e-3
            );
        }
    }

    #[test]
    fn residual_of_identical_systems_is_zero() {
        let sys = appendix_system();
        assert_eq!(
            consistency_residual(&sys, &sys, &probe(v(&[1.0, 2.0, 3.0]), 0)).unwrap(),
            0.0
        );
    }

    #[test]
    fn structure_residual_vanishes_on_members() {
        let sys = appendix_system();
        let x0 = v(&[1.0, -1.0, 0.0]);
        let member = sample_consistent(&sys, &x0, 2.0, 3).unwrap();
        assert!(structure_residual(&sys, &x0, &member).unwrap() < 1e-12);
    }
}

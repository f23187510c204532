//! Algebraic identifiability tests and excitation checks.
//!
//! Full identifiability from one experiment fails exactly when some left
//! eigenvector `w` of `A` annihilates `[x0 B]`. Two margins quantify the
//! distance to that failure: the normalized left-eigenvector alignment
//! `mu_min` and the fixed-experiment PBH margin `d_pbh`. Informativeness of
//! a realized trajectory is checked through the Gramian of the joint
//! regressor `[P^T x; u]`, and input richness through block-Hankel rank.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{self, C64};
use crate::lti::{LtiSystem, Trajectory};
use crate::visibility::{self, DEFAULT_RTOL};

/// Default threshold for the binary identifiability indicator.
pub const DEFAULT_EPS: f64 = 1e-6;

/// Summary of every identifiability margin for one `(A, B, x0)` triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub mu_values: Vec<f64>,
    pub mu_min: f64,
    pub d_pbh: f64,
    pub ctrb_rank: usize,
    pub visible_dim: usize,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gramian_min_eig: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub informative: Option<bool>,
    pub eps: f64,
    pub identifiable: bool,
    /// Set when the spectrum of `A` is clustered or defective; `mu_values`
    /// are then less trustworthy than `d_pbh`.
    pub degenerate_spectrum: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramianReport {
    /// `(k+m) x (k+m)` symmetric positive semidefinite.
    pub gramian: DMatrix<f64>,
    pub min_eig: f64,
    pub tolerance: f64,
    pub informative: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMargins {
    /// One value per computed eigenvalue of `A` (algebraic multiplicity).
    pub mu_values: Vec<f64>,
    pub mu_min: f64,
    pub degenerate: bool,
}

/// Rank of `[B, AB, ..., A^{n-1} B]` at relative tolerance `1e-10`.
pub fn controllability_rank(sys: &LtiSystem) -> usize {
    if sys.m() == 0 || sys.n() == 0 {
        return 0;
    }
    let k = visibility::krylov_from(sys.a(), sys.b());
    linalg::rank(&k, DEFAULT_RTOL)
}

pub fn is_controllable(sys: &LtiSystem) -> bool {
    controllability_rank(sys) == sys.n()
}

fn seed_block(sys: &LtiSystem, x0: &DVector<f64>) -> Result<DMatrix<f64>> {
    if x0.len() != sys.n() {
        return invalid(format!("x0 has length {}, expected {}", x0.len(), sys.n()));
    }
    let x0m = DMatrix::from_column_slice(x0.len(), 1, x0.as_slice());
    Ok(linalg::hstack(&[&x0m, sys.b()]))
}

/// Normalized alignments `mu_i = ||w_i^T [x0 B]|| / (||w_i|| ||[x0 B]||_2)`.
///
/// Left eigenvectors are null vectors of `A^T - lambda I`, computed in
/// complex arithmetic. When the null space at `lambda` is numerically
/// multidimensional (repeated eigenvalue) the reported value is the minimum
/// over the whole left eigenspace, which is what the failure condition asks
/// about.
pub fn eig_alignment_margins(sys: &LtiSystem, x0: &DVector<f64>) -> Result<AlignmentMargins> {
    let seed = seed_block(sys, x0)?;
    let seed_norm = linalg::spectral_norm(&seed);
    if seed_norm == 0.0 {
        return invalid("[x0 B] is zero");
    }
    let n = sys.n();
    let eigs = linalg::eigenvalues(sys.a())?;
    let scale = sys.a().norm().max(f64::MIN_POSITIVE);
    let cluster_tol = 1e-8 * scale;
    let null_tol = 1e-8 * scale.max(1.0);

    let mut degenerate = false;
    for i in 0..eigs.len() {
        for j in i + 1..eigs.len() {
            if (eigs[i] - eigs[j]).norm() < cluster_tol {
                degenerate = true;
            }
        }
    }

    let at = linalg::to_complex(&sys.a().transpose());
    let seed_c = linalg::to_complex(&seed);
    let mut mu_values = Vec::with_capacity(eigs.len());
    for &lam in &eigs {
        let h = &at - DMatrix::<C64>::identity(n, n) * lam;
        let dec = linalg::svd_complex(&h);
        let s = &dec.singular_values;
        let g = s.iter().filter(|&&x| x <= null_tol).count().max(1);
        if g > 1 {
            degenerate = true;
        }
        // null vectors are the conjugated trailing rows of V^H
        let null = DMatrix::from_fn(n, g, |r, c| dec.v_h[(n - g + c, r)].conj());
        let overlap = null.adjoint() * &seed_c;
        let mu = if g > seed.ncols() {
            0.0
        } else {
            linalg::singular_values_complex(&overlap).min() / seed_norm
        };
        mu_values.push(mu.clamp(0.0, 1.0));
    }
    let mu_min = mu_values.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(AlignmentMargins {
        mu_values,
        mu_min: if mu_min.is_finite() { mu_min } else { 1.0 },
        degenerate,
    })
}

fn complement_of(x0: &DVector<f64>) -> DMatrix<f64> {
    let nrm = x0.norm();
    if nrm == 0.0 {
        return DMatrix::identity(x0.len(), x0.len());
    }
    let p = DMatrix::from_column_slice(x0.len(), 1, (x0 / nrm).as_slice());
    linalg::orthonormal_complement(&p)
}

fn pbh_at(q: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>, lam: C64) -> f64 {
    let n = a.nrows();
    if q.ncols() == 0 {
        return f64::INFINITY;
    }
    if lam.im == 0.0 {
        let shifted = DMatrix::identity(n, n) * lam.re - a;
        let h = linalg::hstack(&[&shifted, b]);
        linalg::singular_values(&(q.transpose() * h)).min()
    } else {
        let shifted = DMatrix::<C64>::identity(n, n) * lam - linalg::to_complex(a);
        let bc = linalg::to_complex(b);
        let mut h = DMatrix::<C64>::zeros(n, n + b.ncols());
        h.view_mut((0, 0), (n, n)).copy_from(&shifted);
        h.view_mut((0, n), (n, b.ncols())).copy_from(&bc);
        linalg::singular_values_complex(&(linalg::to_complex(&q.transpose()) * h)).min()
    }
}

/// Fixed-experiment PBH margin
/// `d = min_{lambda in spec(A)} sigma_min(Q^T [lambda I - A, B])`, with `Q`
/// an orthonormal basis of `x0^perp` (`Q = I` when `x0 = 0`).
///
/// For `n = 1` and `x0 != 0` the complement is empty and the margin is
/// reported as `+inf`.
pub fn pbh_margin(sys: &LtiSystem, x0: &DVector<f64>) -> Result<f64> {
    seed_block(sys, x0)?;
    let q = complement_of(x0);
    let eigs = linalg::eigenvalues(sys.a())?;
    Ok(eigs
        .iter()
        .map(|&lam| pbh_at(&q, sys.a(), sys.b(), lam))
        .fold(f64::INFINITY, f64::min))
}

/// Polar grid used by [`pbh_margin_refined`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRefinement {
    pub radius: f64,
    pub rings: usize,
    pub spokes: usize,
}

impl Default for GridRefinement {
    fn default() -> Self {
        Self {
            radius: 0.1,
            rings: 4,
            spokes: 16,
        }
    }
}

/// Stricter variant of [`pbh_margin`] that also evaluates `lambda` on a
/// polar grid around each eigenvalue, approximating the infimum over all
/// of the complex plane. Never larger than [`pbh_margin`].
pub fn pbh_margin_refined(sys: &LtiSystem, x0: &DVector<f64>, grid: GridRefinement) -> Result<f64> {
    let base = pbh_margin(sys, x0)?;
    let q = complement_of(x0);
    let eigs = linalg::eigenvalues(sys.a())?;
    let mut best = base;
    for &lam in &eigs {
        for ring in 1..=grid.rings {
            let r = grid.radius * ring as f64 / grid.rings.max(1) as f64;
            for spoke in 0..grid.spokes {
                let phi = std::f64::consts::TAU * spoke as f64 / grid.spokes as f64;
                let z = lam + C64::from_polar(r, phi);
                best = best.min(pbh_at(&q, sys.a(), sys.b(), z));
            }
        }
    }
    Ok(best)
}

/// `d_pbh > eps`.
pub fn is_identifiable(sys: &LtiSystem, x0: &DVector<f64>, eps: f64) -> Result<bool> {
    Ok(pbh_margin(sys, x0)? > eps)
}

/// Discrete Gramian `G = sum_j z[j] z[j]^T dt` of `z[j] = [xi[j]; u[j]]`.
///
/// `xi_seq` is `k x T` and `u_seq` is `m x T`. Positive definiteness is
/// decided against `1e-8 * trace(G) / (k + m)`.
pub fn informativeness_gramian(
    xi_seq: &DMatrix<f64>,
    u_seq: &DMatrix<f64>,
    dt: f64,
) -> Result<GramianReport> {
    if xi_seq.ncols() != u_seq.ncols() {
        return invalid(format!(
            "regressor sequences differ in length ({} vs {})",
            xi_seq.ncols(),
            u_seq.ncols()
        ));
    }
    if xi_seq.ncols() == 0 {
        return invalid("empty regressor sequence");
    }
    if xi_seq.nrows() + u_seq.nrows() == 0 {
        return invalid("joint regressor has dimension zero");
    }
    if !(dt > 0.0) {
        return invalid("dt must be positive");
    }
    let z = linalg::vstack(&[xi_seq, u_seq]);
    let gramian = &z * z.transpose() * dt;
    let dim = gramian.nrows() as f64;
    let tolerance = 1e-8 * gramian.trace() / dim;
    let min_eig = linalg::min_symmetric_eigenvalue(&gramian);
    Ok(GramianReport {
        informative: gramian.trace() > 0.0 && min_eig > tolerance,
        min_eig,
        tolerance,
        gramian,
    })
}

/// Gramian of `[P^T x[j]; u[j]]` for `j = 0..T-1` along a simulated
/// trajectory (`T + 1` states) driven by `inputs` (`m x T`).
pub fn trajectory_gramian(
    traj: &Trajectory,
    inputs: &DMatrix<f64>,
    basis: &DMatrix<f64>,
) -> Result<GramianReport> {
    let t = inputs.ncols();
    if traj.len() < t {
        return invalid("trajectory shorter than the input sequence");
    }
    if basis.nrows() != traj.n() {
        return invalid("basis dimension differs from state dimension");
    }
    let xi = basis.transpose() * traj.states().columns(0, t);
    informativeness_gramian(&xi, inputs, traj.dt())
}

/// Whether the depth-`r` block Hankel matrix of `u` (`m x N`) has full row
/// rank `r m` at relative tolerance `1e-10`.
pub fn hankel_pe_order(u_seq: &DMatrix<f64>, r: usize) -> Result<bool> {
    let (m, len) = u_seq.shape();
    if r == 0 {
        return invalid("Hankel depth must be positive");
    }
    if len < r {
        return invalid(format!(
            "sequence of length {len} is shorter than depth {r}"
        ));
    }
    if m == 0 {
        return Ok(true);
    }
    let cols = len - r + 1;
    let h = DMatrix::from_fn(r * m, cols, |row, c| u_seq[(row % m, row / m + c)]);
    Ok(linalg::rank(&h, DEFAULT_RTOL) == r * m)
}

/// Smallest eigenvalue of the finite-horizon Gramian of the augmented pair
/// `(A, [x0 B])` on the sampling grid:
/// `W = sum_{j<h} e^{A j dt} S S^T e^{A^T j dt} dt`, `S = [x0 B]`.
/// Rounding-level negative values are clamped to zero.
pub fn augmented_gramian_min_eig(
    sys: &LtiSystem,
    x0: &DVector<f64>,
    horizon_steps: usize,
    dt: f64,
) -> Result<f64> {
    if horizon_steps == 0 {
        return invalid("horizon must be at least one step");
    }
    if !(dt > 0.0) {
        return invalid("dt must be positive");
    }
    let seed = seed_block(sys, x0)?;
    let step = (sys.a() * dt).exp();
    let n = sys.n();
    let mut w = DMatrix::zeros(n, n);
    let mut block = seed;
    for j in 0..horizon_steps {
        w += &block * block.transpose() * dt;
        if j + 1 < horizon_steps {
            block = &step * block;
        }
    }
    Ok(linalg::min_symmetric_eigenvalue(&w).max(0.0))
}

/// Computes all margins for one triple. When `data` holds a trajectory and
/// its inputs, the joint-regressor Gramian on the visible subspace is added.
pub fn margin_report(
    sys: &LtiSystem,
    x0: &DVector<f64>,
    eps: f64,
    data: Option<(&Trajectory, &DMatrix<f64>)>,
) -> Result<MarginReport> {
    let sub = visibility::visible_subspace(sys, x0, DEFAULT_RTOL)?;
    let align = eig_alignment_margins(sys, x0)?;
    let d_pbh = pbh_margin(sys, x0)?;
    let gram = match data {
        Some((traj, inputs)) => Some(trajectory_gramian(traj, inputs, &sub.basis)?),
        None => None,
    };
    Ok(MarginReport {
        mu_min: align.mu_min,
        mu_values: align.mu_values,
        d_pbh,
        ctrb_rank: controllability_rank(sys),
        visible_dim: sub.k,
        n: sys.n(),
        gramian_min_eig: gram.as_ref().map(|g| g.min_eig),
        informative: gram.as_ref().map(|g| g.informative),
        eps,
        identifiable: d_pbh > eps,
        degenerate_spectrum: align.degenerate,
    })
}

//! The visible subspace `V(x0)`: the smallest `A`-invariant subspace that
//! contains `x0` and the columns of `B`, i.e. the Krylov span of `[x0 B]`.
//!
//! Every trajectory of the experiment stays in `V(x0)`, and only the
//! dynamics restricted to it can be recovered from data. This module computes
//! an orthonormal basis, the adapted block-triangular form of `(A, B, x0)`,
//! restrictions, principal angles, and a data-driven estimate of the basis
//! from a state trajectory.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::lti::{DiscreteSystem, LtiSystem, Trajectory};

/// Default relative threshold for Krylov rank decisions.
pub const DEFAULT_RTOL: f64 = 1e-10;

/// Orthonormal basis of a subspace together with the spectrum that fixed
/// its dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    /// `n x k`, orthonormal columns.
    pub basis: DMatrix<f64>,
    pub k: usize,
    /// Nonincreasing singular values of the generating matrix.
    pub singular_values: DVector<f64>,
    pub rtol: f64,
}

impl Subspace {
    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn is_full(&self) -> bool {
        self.k == self.basis.nrows()
    }

    /// Orthogonal projector `P P^T`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// `||(I - P P^T) x||`.
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        (x - &self.basis * (self.basis.transpose() * x)).norm()
    }

    pub fn to_document(&self) -> SubspaceDocument {
        SubspaceDocument {
            basis: linalg::to_rows(&self.basis),
            k: self.k,
            singular_values: self.singular_values.iter().cloned().collect(),
            rtol: self.rtol,
        }
    }
}

/// JSON form of [`Subspace`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SubspaceDocument {
    pub basis: Vec<Vec<f64>>,
    pub k: usize,
    pub singular_values: Vec<f64>,
    pub rtol: f64,
}

impl SubspaceDocument {
    pub fn into_subspace(self) -> Result<Subspace> {
        let basis = linalg::from_rows(&self.basis, self.k)?;
        if basis.ncols() != self.k && !self.basis.is_empty() {
            return invalid("basis column count differs from k");
        }
        Ok(Subspace {
            basis,
            k: self.k,
            singular_values: DVector::from_vec(self.singular_values),
            rtol: self.rtol,
        })
    }
}

/// `T = [P Q]` adapted to `V (+) V^perp`, and the blocks of
/// `T^-1 A T = [[A_V, A_*], [0, A_W]]`, `T^-1 B = [B_V; 0]`, `T^-1 x0 = [x0_V; 0]`.
#[derive(Debug, Clone)]
pub struct BlockForm {
    pub t_matrix: DMatrix<f64>,
    pub k: usize,
    pub a_v: DMatrix<f64>,
    pub a_star: DMatrix<f64>,
    pub a_w: DMatrix<f64>,
    pub b_v: DMatrix<f64>,
    pub x0_v: DVector<f64>,
    /// `||(T^-1 A T)[k.., ..k]||_F`, zero in exact arithmetic.
    pub lower_left_residual: f64,
    /// `||(T^-1 B)[k.., ..]||_F`.
    pub input_residual: f64,
    /// `||(T^-1 x0)[k..]||`.
    pub x0_residual: f64,
}

impl BlockForm {
    pub fn p(&self) -> DMatrix<f64> {
        self.t_matrix.columns(0, self.k).into_owned()
    }

    pub fn q(&self) -> DMatrix<f64> {
        let n = self.t_matrix.nrows();
        self.t_matrix.columns(self.k, n - self.k).into_owned()
    }
}

/// `[S, A S, ..., A^{n-1} S]` with `S = [x0 B]`, built by repeated products.
pub fn krylov_matrix(sys: &LtiSystem, x0: &DVector<f64>) -> Result<DMatrix<f64>> {
    if x0.len() != sys.n() {
        return invalid(format!("x0 has length {}, expected {}", x0.len(), sys.n()));
    }
    let seed = seed_block(sys.b(), x0);
    Ok(krylov_from(sys.a(), &seed))
}

fn seed_block(b: &DMatrix<f64>, x0: &DVector<f64>) -> DMatrix<f64> {
    let x0m = DMatrix::from_column_slice(x0.len(), 1, x0.as_slice());
    linalg::hstack(&[&x0m, b])
}

pub(crate) fn krylov_from(a: &DMatrix<f64>, seed: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let w = seed.ncols();
    let mut out = DMatrix::zeros(n, n * w);
    let mut block = seed.clone();
    for j in 0..n {
        out.view_mut((0, j * w), (n, w)).copy_from(&block);
        if j + 1 < n {
            block = a * &block;
        }
    }
    out
}

/// Basis of the column span of `gen` with rank decided at `rtol * s_max`.
pub(crate) fn span_of(gen: &DMatrix<f64>, rtol: f64) -> Subspace {
    let dec = linalg::svd(gen);
    let k = linalg::numerical_rank(&dec.singular_values, rtol);
    Subspace {
        basis: dec.u.columns(0, k).into_owned(),
        k,
        singular_values: dec.singular_values,
        rtol,
    }
}

/// The visible subspace `V(x0)` of `(A, B)`.
pub fn visible_subspace(sys: &LtiSystem, x0: &DVector<f64>, rtol: f64) -> Result<Subspace> {
    if !(rtol > 0.0) {
        return invalid(format!("rtol must be positive, got {rtol}"));
    }
    Ok(span_of(&krylov_matrix(sys, x0)?, rtol))
}

/// Visible subspace of a sampled pair `(A_d, B_d)`.
///
/// The Krylov span is unchanged when the operator is replaced by a polynomial
/// in itself, so the sequence is generated with `(A_d - I) / dt` instead of
/// `A_d`: for small steps `A_d` is close to the identity and its raw powers
/// differ only at order `dt^j`. For large steps the exponential squeezes the
/// stable spectrum together, which makes raw powers ill-conditioned, so the
/// sequence is orthogonalized block by block (block Arnoldi). A candidate
/// direction is kept when its component outside the current basis exceeds
/// `rtol` times the norm of the block it came from. `singular_values` holds
/// those relative components, kept and discarded, in decreasing order.
pub fn visible_subspace_sampled(
    dsys: &DiscreteSystem,
    x0: &DVector<f64>,
    rtol: f64,
) -> Result<Subspace> {
    if !(rtol > 0.0) {
        return invalid(format!("rtol must be positive, got {rtol}"));
    }
    let n = dsys.n();
    if x0.len() != n {
        return invalid(format!("x0 has length {}, expected {n}", x0.len()));
    }
    let gen = (dsys.ad() - DMatrix::identity(n, n)) / dsys.dt();
    let mut basis = DMatrix::<f64>::zeros(n, 0);
    let mut levels = Vec::new();
    let mut block = seed_block(dsys.bd(), x0);
    while basis.ncols() < n && block.ncols() > 0 {
        let scale = linalg::spectral_norm(&block);
        if scale == 0.0 {
            break;
        }
        let mut rest = block.clone();
        for _ in 0..2 {
            rest -= &basis * (basis.transpose() * &rest);
        }
        let dec = linalg::svd(&rest);
        let mut fresh = Vec::new();
        for (i, &sv) in dec.singular_values.iter().enumerate() {
            levels.push(sv / scale);
            if sv > rtol * scale && basis.ncols() + fresh.len() < n {
                fresh.push(dec.u.column(i).into_owned());
            }
        }
        if fresh.is_empty() {
            break;
        }
        let added = DMatrix::from_columns(&fresh);
        block = &gen * &added;
        basis = linalg::hstack(&[&basis, &added]);
    }
    levels.sort_by(|a, b| b.total_cmp(a));
    Ok(Subspace {
        k: basis.ncols(),
        basis,
        singular_values: DVector::from_vec(levels),
        rtol,
    })
}

/// Block-triangular form of `(A, B, x0)` in the orthogonal basis `[P Q]`,
/// where `P` spans `sub` and `Q` spans its orthogonal complement.
pub fn block_form(sys: &LtiSystem, x0: &DVector<f64>, sub: &Subspace) -> Result<BlockForm> {
    let n = sys.n();
    if sub.basis.nrows() != n || x0.len() != n {
        return invalid("subspace, system and x0 dimensions differ");
    }
    let k = sub.k;
    let p = &sub.basis;
    let q = linalg::orthonormal_complement(p);
    let t = linalg::hstack(&[p, &q]);
    let sv = linalg::singular_values(&t);
    let cond = sv.max() / sv.min();
    if !(cond <= 1e12) {
        return Err(Error::NumericalDegeneracy(format!(
            "adapted basis is ill-conditioned (cond {cond:e})"
        )));
    }
    let tt = t.transpose();
    let at = &tt * sys.a() * &t;
    let bt = &tt * sys.b();
    let xt = &tt * x0;
    let m = sys.m();
    Ok(BlockForm {
        k,
        a_v: at.view((0, 0), (k, k)).into_owned(),
        a_star: at.view((0, k), (k, n - k)).into_owned(),
        a_w: at.view((k, k), (n - k, n - k)).into_owned(),
        b_v: bt.view((0, 0), (k, m)).into_owned(),
        x0_v: xt.rows(0, k).into_owned(),
        lower_left_residual: at.view((k, 0), (n - k, k)).norm(),
        input_residual: bt.view((k, 0), (n - k, m)).norm(),
        x0_residual: xt.rows(k, n - k).norm(),
        t_matrix: t,
    })
}

/// `(P^T A P, P^T B)` for an orthonormal basis `P`.
pub fn restrict(sys: &LtiSystem, basis: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    restrict_pair(sys.a(), sys.b(), basis)
}

pub fn restrict_pair(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    basis: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if basis.nrows() != a.nrows() || b.nrows() != a.nrows() {
        return invalid("basis row count differs from state dimension");
    }
    let pt = basis.transpose();
    Ok((&pt * a * basis, &pt * b))
}

/// Largest principal angle (degrees) between `span(p1)` and `span(p2)`.
///
/// With `k1 <= k2` columns this is `arccos(sigma_min(P2^T P1))`. It is
/// evaluated as `atan2(sin, cos)` with the sine taken from
/// `||(I - P2 P2^T) P1||_2`, because `arccos` loses half the digits near zero
/// angle. Differing column counts are allowed; an empty basis against a
/// nonempty one is reported as 90 degrees.
pub fn max_principal_angle_deg(p1: &DMatrix<f64>, p2: &DMatrix<f64>) -> Result<f64> {
    if p1.nrows() != p2.nrows() {
        return invalid("bases live in different ambient dimensions");
    }
    let (small, big) = if p1.ncols() <= p2.ncols() {
        (p1, p2)
    } else {
        (p2, p1)
    };
    if small.ncols() == 0 {
        return Ok(if big.ncols() == 0 { 0.0 } else { 90.0 });
    }
    let overlap = big.transpose() * small;
    let cos = linalg::singular_values(&overlap).min().clamp(0.0, 1.0);
    let resid = small - big * &overlap;
    let sin = linalg::spectral_norm(&resid).clamp(0.0, 1.0);
    Ok(sin.atan2(cos).to_degrees().clamp(0.0, 90.0))
}

/// Largest principal angle between two subspaces of equal dimension.
pub fn principal_angle_deg(p1: &DMatrix<f64>, p2: &DMatrix<f64>) -> Result<f64> {
    if p1.ncols() != p2.ncols() {
        return invalid(format!(
            "subspace dimensions differ ({} vs {})",
            p1.ncols(),
            p2.ncols()
        ));
    }
    max_principal_angle_deg(p1, p2)
}

/// Basis of the state snapshots estimated from data alone.
#[derive(Debug, Clone)]
pub struct EmpiricalBasis {
    pub basis: DMatrix<f64>,
    pub k_hat: usize,
    pub singular_values: DVector<f64>,
}

/// Dimension choice for the snapshot spectrum `s` (nonincreasing): the `j`
/// maximising `s[j] / s[j+1]` among `j` with `s[j] > tau * s_max` (smallest
/// `j` on ties, a zero successor counts as an infinite ratio); if no such
/// `j` exists, the count of values above `tau * s_max`.
pub fn gap_dimension(s: &[f64], tau: f64) -> usize {
    let smax = s.first().cloned().unwrap_or(0.0);
    if !(smax > 0.0) {
        return 0;
    }
    let floor = tau * smax;
    let mut best: Option<(usize, f64)> = None;
    for j in 0..s.len().saturating_sub(1) {
        if s[j] <= floor {
            continue;
        }
        let ratio = if s[j + 1] > 0.0 {
            s[j] / s[j + 1]
        } else {
            f64::INFINITY
        };
        match best {
            Some((_, r)) if ratio <= r => {}
            _ => best = Some((j + 1, ratio)),
        }
    }
    match best {
        Some((j, _)) => j,
        None => s.iter().filter(|&&v| v > floor).count(),
    }
}

/// Leading left singular vectors of `X = [x[0] ... x[T-1]]`, with the
/// dimension picked by [`gap_dimension`].
pub fn empirical_visible_basis(traj: &Trajectory, tau: f64) -> Result<EmpiricalBasis> {
    if traj.is_empty() {
        return invalid("empty trajectory");
    }
    if !(tau > 0.0) {
        return invalid(format!("tau must be positive, got {tau}"));
    }
    let cols = if traj.len() > 1 { traj.len() - 1 } else { 1 };
    let x = traj.states().columns(0, cols).into_owned();
    let dec = linalg::svd(&x);
    let s: Vec<f64> = dec.singular_values.iter().cloned().collect();
    let k_hat = gap_dimension(&s, tau);
    Ok(EmpiricalBasis {
        basis: dec.u.columns(0, k_hat).into_owned(),
        k_hat,
        singular_values: dec.singular_values,
    })
}

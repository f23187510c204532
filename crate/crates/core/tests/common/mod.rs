#![allow(dead_code)]

pub mod rk45;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use visilin_core::ensembles::trial_rng;
use visilin_core::linalg;
use visilin_core::visibility::{self, DEFAULT_RTOL};
use visilin_core::LtiSystem;

pub fn rng(seed: u64) -> ChaCha20Rng {
    trial_rng(seed, 0)
}

pub fn gaussian<R: Rng + ?Sized>(r: usize, c: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    gaussian(n, n, rng).qr().q()
}

/// Dense triple with `dim V(x0) = k`, hidden behind a random rotation.
/// With `hurwitz` the spectrum is shifted into the open left half-plane.
pub fn planted_dense<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    m: usize,
    hurwitz: bool,
    rng: &mut R,
) -> (LtiSystem, DVector<f64>) {
    loop {
        let scale = 1.0 / (n as f64).sqrt();
        let mut at = gaussian(n, n, rng) * scale;
        at.view_mut((k, 0), (n - k, k)).fill(0.0);
        let mut bt = gaussian(n, m, rng) * scale;
        bt.view_mut((k, 0), (n - k, m)).fill(0.0);
        let mut xt = DVector::zeros(n);
        xt.rows_mut(0, k).copy_from(&gaussian_vec(k, rng));
        xt /= xt.norm();
        let q = random_orthogonal(n, rng);
        let mut a = &q * at * q.transpose();
        if hurwitz {
            let shift = linalg::eigenvalues(&a)
                .unwrap()
                .iter()
                .map(|z| z.re)
                .fold(f64::MIN, f64::max);
            a -= DMatrix::identity(n, n) * (shift + 0.5);
        }
        let sys = LtiSystem::new(a, &q * bt).unwrap();
        let x0 = &q * xt;
        if visibility::visible_subspace(&sys, &x0, DEFAULT_RTOL)
            .unwrap()
            .k
            == k
        {
            return (sys, x0);
        }
    }
}

/// Smallest `max_i |a_i - b_pi(i)|` over greedy nearest matchings of two spectra.
pub fn spectrum_distance(a: &[linalg::C64], b: &[linalg::C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for za in a {
        let (idx, d) = b
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, zb)| (i, (za - zb).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        used[idx] = true;
        worst = worst.max(d);
    }
    worst
}

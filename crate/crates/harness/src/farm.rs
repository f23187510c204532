//! Parallel trial execution.
//!
//! Jobs are pure functions of their index and return results by value; the
//! collector keeps index order, so the output does not depend on how many
//! workers ran or in which order they finished.

use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use visilin_core::ensembles::{stream_id, trial_rng};

use crate::error::{HarnessError, Result};

/// Worker count; `None` uses every available core.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Workers(pub Option<usize>);

impl Workers {
    pub fn serial() -> Self {
        Workers(Some(1))
    }
}

/// Runs `job(i)` for `i in 0..jobs` on `workers` threads and returns the
/// results in index order. The first error (by index) wins.
pub fn run<T, F>(jobs: usize, workers: Workers, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers.0 {
        if w == 0 {
            return Err(HarnessError::Config("worker count must be positive".into()));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<T>> = pool.install(|| (0..jobs).into_par_iter().map(&job).collect());
    results.into_iter().collect()
}

/// 32-bit key for a grid cell, computed from its coordinates (FNV-1a) rather
/// than its position in the grid, so a cell draws the same trials whatever
/// else the config asks for.
pub fn cell_key(coords: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for c in coords {
        for byte in c.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    (h >> 32) ^ (h & 0xFFFF_FFFF)
}

/// Generator for trial `trial` of the cell with key `cell`.
pub fn rng_for(base_seed: u64, cell: u64, trial: usize) -> ChaCha20Rng {
    trial_rng(base_seed, stream_id(cell, trial as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn order_and_worker_count_do_not_matter() {
        let job =
            |i: usize| -> Result<u64> { Ok(rng_for(9, (i / 10) as u64, i % 10).random::<u64>()) };
        let serial = run(200, Workers::serial(), job).unwrap();
        let parallel = run(200, Workers(Some(4)), job).unwrap();
        assert_eq!(serial, parallel);
        assert_eq!(serial.len(), 200);
    }

    #[test]
    fn cell_keys_depend_on_coordinates_only() {
        let a = cell_key(&[10, 0.1f64.to_bits()]);
        assert_eq!(a, cell_key(&[10, (1.0f64 / 10.0).to_bits()]));
        assert_ne!(a, cell_key(&[10, 0.2f64.to_bits()]));
        assert_ne!(a, cell_key(&[0.1f64.to_bits(), 10]));
        assert!(a <= u32::MAX as u64);
    }

    #[test]
    fn first_error_is_reported() {
        let out = run(50, Workers(Some(3)), |i| {
            if i >= 20 {
                Err(HarnessError::Config(format!("job {i}")))
            } else {
                Ok(i)
            }
        });
        match out {
            Err(HarnessError::Config(msg)) => assert_eq!(msg, "job 20"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_workers_is_a_config_error() {
        assert!(run(1, Workers(Some(0)), Ok).is_err());
    }
}

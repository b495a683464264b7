//! Per-path random streams and order-preserving parallel maps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub type PathRng = ChaCha8Rng;

/// Random stream of path `path`: the ChaCha stream selected by the path index
/// under the run seed.
pub fn path_rng(seed: u64, path: u64) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Runs `f(path_id, rng)` for every path on `workers` threads and returns the
/// results in path order.
pub fn map_paths<T, F>(n_paths: usize, seed: u64, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut PathRng) -> T + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        (0..n_paths as u64)
            .into_par_iter()
            .map(|i| f(i, &mut path_rng(seed, i)))
            .collect()
    }))
}

/// Sample mean and standard error.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_differ_and_repeat() {
        let a: u64 = path_rng(7, 0).random();
        let b: u64 = path_rng(7, 1).random();
        assert_ne!(a, b);
        assert_eq!(a, path_rng(7, 0).random::<u64>());
    }

    #[test]
    fn results_independent_of_worker_count() {
        let run = |w| map_paths(100, 3, w, |_, rng| rng.random::<f64>()).unwrap();
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn mean_and_stderr() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }
}

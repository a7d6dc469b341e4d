use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::KernelMatrix;

#[derive(Clone, Debug, Serialize)]
pub struct SimulationResult {
    pub start: usize,
    pub t: usize,
    pub trials: u64,
    pub survivors: u64,
    /// `survivors / trials`.
    pub survival: f64,
    /// Binomial standard error of `survival`.
    pub std_error: f64,
    /// Empirical law of `X_t` among survivors; zeros when none survive.
    pub occupancy: Vec<f64>,
}

/// Final state of one trajectory, or `None` if it was killed.
fn run(k: &KernelMatrix, x: usize, t: usize, rng: &mut ChaCha8Rng) -> Option<usize> {
    let mut v = x;
    for _ in 0..t {
        let (cols, vals) = k.row(v);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut next = None;
        for (&c, &p) in cols.iter().zip(vals) {
            acc += p;
            if u < acc {
                next = Some(c);
                break;
            }
        }
        v = next?;
    }
    Some(v)
}

/// Monte Carlo estimate of `P_x(tau_U > t)` and of the conditional law of
/// `X_t`. Trial `i` draws from a ChaCha8 stream keyed by `(seed, i)`, so the
/// output does not depend on thread scheduling.
pub fn simulate_killed(k: &KernelMatrix, x: usize, t: usize, trials: u64, seed: u64) -> Result<SimulationResult> {
    if trials == 0 {
        return Err(Error::validation("trials must be at least 1"));
    }
    if x >= k.len() {
        return Err(Error::UnknownVertex(x));
    }
    let n = k.len();
    let counts = (0..trials)
        .into_par_iter()
        .fold(
            || vec![0u64; n],
            |mut acc, i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i);
                if let Some(v) = run(k, x, t, &mut rng) {
                    acc[v] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let survivors: u64 = counts.iter().sum();
    let p = survivors as f64 / trials as f64;
    let occupancy = if survivors == 0 {
        vec![0.0; n]
    } else {
        counts.iter().map(|&c| c as f64 / survivors as f64).collect()
    };
    Ok(SimulationResult {
        start: x,
        t,
        trials,
        survivors,
        survival: p,
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        occupancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{dirichlet_kernel, neumann_kernel};
    use crate::quasistationary::survival;
    use crate::zoo::{generate, FamilySpec};

    #[test]
    fn neumann_chain_never_dies() {
        let inst = generate(&FamilySpec::DiamondBall { n: 4 }).unwrap();
        let k = neumann_kernel(&inst.domain).unwrap();
        let r = simulate_killed(&k, 0, 30, 2000, 3).unwrap();
        assert_eq!(r.survival, 1.0);
        assert!((r.occupancy.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reproducible_and_rejects_zero_trials() {
        let inst = generate(&FamilySpec::FivePath).unwrap();
        let k = dirichlet_kernel(&inst.domain).unwrap();
        let a = simulate_killed(&k, 1, 2, 5000, 7).unwrap();
        let b = simulate_killed(&k, 1, 2, 5000, 7).unwrap();
        assert_eq!(a.survivors, b.survivors);
        assert_eq!(a.occupancy, b.occupancy);
        assert!(simulate_killed(&k, 1, 2, 0, 7).is_err());
    }

    #[test]
    fn z_scores_are_centered() {
        let inst = generate(&FamilySpec::Cone45 { n: 5 }).unwrap();
        let k = dirichlet_kernel(&inst.domain).unwrap();
        let x = inst.domain.center();
        let exact = survival(&k, x, 6).unwrap().values[6];
        let zs: Vec<f64> = (0..200u64)
            .map(|rep| {
                let r = simulate_killed(&k, x, 6, 400, 1000 + rep).unwrap();
                (r.survival - exact) / (exact * (1.0 - exact) / 400.0).sqrt()
            })
            .collect();
        let mean = zs.iter().sum::<f64>() / zs.len() as f64;
        let var = zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (zs.len() - 1) as f64;
        assert!(mean.abs() < 0.25, "mean z {mean}");
        assert!(var > 0.6 && var < 1.5, "var z {var}");
    }
}

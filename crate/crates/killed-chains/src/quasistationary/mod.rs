//! Survival probabilities, conditional laws and quasi-stationary limits of
//! killed chains, together with empirical checks of the bounds that control
//! them.
//!
//! Every routine takes the killed kernel `K_U` (or its Doob transform) and
//! the Perron pair solved by [`crate::spectral::perron_pair`].

mod bounds;
mod path_bound;
mod simulate;

pub use bounds::{
    carleson_check, diamond_survival_approximation, exit_time_bound_check, explicit_survival_check,
    gaussian_bound_check, harmonic_ratio_check, lattice_potential, BoundReport, BoundRow, CarlesonReport,
    EnvelopeFit, GaussianReport, HarmonicReport, XrMap,
};
pub use path_bound::{eigenvalue_path_bound, straight_paths, PathBound};
pub use simulate::{simulate_killed, SimulationResult};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::defaults::UNDERFLOW;
use crate::error::{Error, Result};
use crate::inequalities::fit_slope;
use crate::kernels::{doob_transform, KernelMatrix};
use crate::spectral::{eigen_decomposition, SpectralPair};

/// `P_x(tau_U > t)` for `t = 0..=horizon`.
#[derive(Clone, Debug, Serialize)]
pub struct SurvivalCurve {
    pub start: usize,
    pub horizon: usize,
    /// Survival probabilities; entries below the double range read as zero.
    pub values: Vec<f64>,
    /// Natural logarithms of the survival probabilities, always finite.
    pub log_values: Vec<f64>,
}

impl SurvivalCurve {
    /// Slope of `log P` over the last quarter of the horizon.
    pub fn tail_rate(&self) -> Option<f64> {
        let from = self.horizon - self.horizon / 4;
        let pts: Vec<(f64, f64)> = (from..=self.horizon).map(|t| (t as f64, self.log_values[t])).collect();
        fit_slope(&pts)
    }
}

/// Survival curve from `x` by iterating the row vector `e_x K^t`. The
/// vector is rescaled whenever its mass drops below the underflow
/// threshold, and the scale is carried in the logarithm.
pub fn survival(k: &KernelMatrix, x: usize, horizon: usize) -> Result<SurvivalCurve> {
    if x >= k.len() {
        return Err(Error::UnknownVertex(x));
    }
    let mut v = vec![0.0; k.len()];
    v[x] = 1.0;
    let mut log_scale = 0.0;
    let mut values = Vec::with_capacity(horizon + 1);
    let mut log_values = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        if t > 0 {
            v = k.apply_left(&v);
        }
        let mass: f64 = v.iter().sum();
        if mass <= 0.0 {
            return Err(Error::Solver(format!("all mass killed by step {t}")));
        }
        log_values.push(log_scale + mass.ln());
        values.push((log_scale + mass.ln()).exp());
        if mass < UNDERFLOW {
            v.iter_mut().for_each(|a| *a /= mass);
            log_scale += mass.ln();
        }
    }
    Ok(SurvivalCurve { start: x, horizon, values, log_values })
}

/// `P_x(tau_U > t)` for every start `x` and `t = 0..=horizon`, indexed
/// `[t][x]`. Computed as `K^t 1`.
pub fn survival_table(k: &KernelMatrix, horizon: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(horizon + 1);
    let mut u = vec![1.0; k.len()];
    out.push(u.clone());
    for _ in 0..horizon {
        u = k.apply(&u);
        out.push(u.clone());
    }
    out
}

/// `nu_x^t(y) = P_x(X_t = y | tau_U > t)` by two routes.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionalLaw {
    pub start: usize,
    pub t: usize,
    /// Normalized row of `K_U^t`.
    pub nu: Vec<f64>,
    /// `K_phi^t(x,y) / phi0(y)`, normalized.
    pub nu_doob: Vec<f64>,
    /// Largest entrywise difference between the two routes.
    pub discrepancy: f64,
}

/// Row `x` of `K^t`, renormalized to a probability vector after every step.
fn normalized_row(k: &KernelMatrix, x: usize, t: usize) -> Result<Vec<f64>> {
    let mut v = vec![0.0; k.len()];
    v[x] = 1.0;
    for s in 0..t {
        v = k.apply_left(&v);
        let mass: f64 = v.iter().sum();
        if !(mass > 0.0) {
            return Err(Error::validation(format!("chain from {x} is absorbed by step {}", s + 1)));
        }
        v.iter_mut().for_each(|a| *a /= mass);
    }
    Ok(v)
}

fn doob_weighted(row: &[f64], phi0: &[f64]) -> Vec<f64> {
    let w: Vec<f64> = row.iter().zip(phi0).map(|(r, p)| r / p).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|a| a / s).collect()
}

pub fn conditional_law(k: &KernelMatrix, sp: &SpectralPair, x: usize, t: usize) -> Result<ConditionalLaw> {
    if t == 0 {
        return Err(Error::validation("conditional law needs t >= 1"));
    }
    if x >= k.len() {
        return Err(Error::UnknownVertex(x));
    }
    let nu = normalized_row(k, x, t)?;
    let doob = doob_transform(k, sp)?;
    let row = doob.power_rows(&[x], t).pop().unwrap();
    let nu_doob = doob_weighted(&row, &sp.phi0);
    let discrepancy = nu.iter().zip(&nu_doob).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(ConditionalLaw { start: x, t, nu, nu_doob, discrepancy })
}

/// The two limiting measures attached to a Perron pair. They coincide only
/// when `phi0` is constant.
#[derive(Clone, Debug, Serialize)]
pub struct QsdLimit {
    /// `phi0_star phi0 / sum(phi0_star phi0)`, invariant for the Doob chain.
    pub pi_phi0: Vec<f64>,
    /// `phi0_star / sum(phi0_star)`, the limit of the conditional laws.
    pub conditional_limit: Vec<f64>,
}

pub fn qsd_limit(sp: &SpectralPair) -> QsdLimit {
    let prod: Vec<f64> = sp.phi0.iter().zip(&sp.phi0_star).map(|(a, b)| a * b).collect();
    let sp_sum: f64 = prod.iter().sum();
    let star_sum: f64 = sp.phi0_star.iter().sum();
    QsdLimit {
        pi_phi0: prod.iter().map(|v| v / sp_sum).collect(),
        conditional_limit: sp.phi0_star.iter().map(|v| v / star_sum).collect(),
    }
}

/// Refuse limit-based operations on periodic kernels.
pub fn require_aperiodic(k: &KernelMatrix) -> Result<()> {
    match k.period() {
        1 => Ok(()),
        period => Err(Error::Periodic { period }),
    }
}

/// Spectral resolution of a stochastic reversible kernel with the constant
/// mode removed, so that `K^t(x,y)/m(y) - 1 = sum_j r_j^t psi_j(x) psi_j(y)`.
pub struct DoobModes {
    ratios: Vec<f64>,
    psi: DMatrix<f64>,
}

impl DoobModes {
    pub fn new(doob: &KernelMatrix) -> Result<Self> {
        let (values, vectors) = eigen_decomposition(doob)?;
        let n = doob.len();
        let ratios = values[1..].to_vec();
        let psi = DMatrix::from_fn(n, n - 1, |i, j| vectors[j + 1][i]);
        Ok(DoobModes { ratios, psi })
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    /// The full matrix `K^t(x,y)/m(y) - 1`.
    pub fn deviation(&self, t: usize) -> DMatrix<f64> {
        let mut a = self.psi.clone();
        for (j, r) in self.ratios.iter().enumerate() {
            let f = r.powi(t as i32);
            a.column_mut(j).scale_mut(f);
        }
        a * self.psi.transpose()
    }

    /// `max_{x,y} |K^t(x,y)/m(y) - 1|`. For even `t` the deviation matrix is
    /// positive semidefinite, so the maximum sits on the diagonal.
    pub fn sup_deviation(&self, t: usize) -> f64 {
        if t.is_multiple_of(2) {
            (0..self.psi.nrows())
                .into_par_iter()
                .map(|x| {
                    self.ratios
                        .iter()
                        .enumerate()
                        .map(|(j, r)| r.powi(t as i32) * self.psi[(x, j)].powi(2))
                        .sum::<f64>()
                })
                .reduce(|| 0.0, f64::max)
        } else {
            self.deviation(t).amax()
        }
    }

    /// Smallest `t` with `sup_deviation(t') <= eps` for every `t' >= t`.
    /// The sup deviation is nonincreasing in `t` because the kernel is a
    /// sup-norm contraction, so a bisection suffices.
    pub fn time_to(&self, eps: f64) -> usize {
        let mut hi = 2usize;
        while self.sup_deviation(hi) > eps {
            hi *= 2;
            if hi > 1 << 40 {
                return usize::MAX;
            }
        }
        let mut lo = 0usize;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.sup_deviation(mid) <= eps {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    }
}

/// `max_{x,y} |K_phi^t(x,y)/pi_phi0(y) - 1|` along a time grid.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceProfile {
    pub points: Vec<(usize, f64)>,
    /// `-slope` of the log sup-ratio over the late half of the grid.
    pub fitted_rate: f64,
    /// `-log max(beta1/beta0, |beta_min|/beta0)`.
    pub predicted_rate: f64,
    pub relative_error: f64,
}

/// Convergence of the Doob chain to `pi_phi0`. Without an explicit grid,
/// even times are sampled until the deviation predicted by the spectrum
/// falls to `1e-8`.
pub fn convergence_profile(doob: &KernelMatrix, sp: &SpectralPair, ts: Option<&[usize]>) -> Result<ConvergenceProfile> {
    require_aperiodic(doob)?;
    let modes = DoobModes::new(doob)?;
    let r = sp.second_ratio();
    let predicted_rate = -r.ln();
    let grid: Vec<usize> = match ts {
        Some(ts) => ts.to_vec(),
        None => {
            let end = ((1e-8f64).ln() / r.ln()).ceil().max(8.0) as usize;
            let step = (end / 40).max(1);
            (0..=end).step_by(step).map(|t| t + t % 2).collect()
        }
    };
    let points: Vec<(usize, f64)> = grid.iter().map(|&t| (t, modes.sup_deviation(t))).collect();
    let late = grid.last().copied().unwrap_or(0) / 2;
    let fit: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.0 >= late && p.1 > 0.0)
        .map(|p| (p.0 as f64, p.1.ln()))
        .collect();
    let fitted_rate = -fit_slope(&fit).unwrap_or(f64::NAN);
    Ok(ConvergenceProfile {
        points,
        fitted_rate,
        predicted_rate,
        relative_error: (fitted_rate / predicted_rate - 1.0).abs(),
    })
}

/// Outcome of comparing conditional laws with their limit after the Doob
/// chain has mixed to precision `epsilon`.
#[derive(Clone, Debug, Serialize)]
pub struct NuControlReport {
    pub epsilon: f64,
    pub start: usize,
    pub n_eps: usize,
    /// `2 eps / (1 - eps)`.
    pub bound: f64,
    /// Largest `|(sum phi0_star) nu_x^t(y) / phi0_star(y) - 1|` over the
    /// checked window.
    pub worst: f64,
    pub worst_t: usize,
    pub checked_until: usize,
    pub holds: bool,
}

/// Find `N_eps` from the Doob convergence profile, then scan
/// `|(sum phi0_star) nu_x^t(y)/phi0_star(y) - 1|` for `t` from `N_eps` until
/// the Doob chain has mixed to `eps / 1000`.
pub fn nu_control_check(doob: &KernelMatrix, sp: &SpectralPair, epsilon: f64, x: usize) -> Result<NuControlReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::validation(format!("epsilon must lie in (0,1), got {epsilon}")));
    }
    if x >= doob.len() {
        return Err(Error::UnknownVertex(x));
    }
    require_aperiodic(doob)?;
    let modes = DoobModes::new(doob)?;
    let n_eps = modes.time_to(epsilon);
    let until = modes.time_to(epsilon / 1000.0).max(n_eps + 1);
    let star_sum: f64 = sp.phi0_star.iter().sum();
    let mut row = vec![0.0; doob.len()];
    row[x] = 1.0;
    let (mut worst, mut worst_t) = (0.0f64, n_eps);
    for t in 1..=until {
        row = doob.apply_left(&row);
        if t < n_eps {
            continue;
        }
        let nu = doob_weighted(&row, &sp.phi0);
        let dev = nu
            .iter()
            .zip(&sp.phi0_star)
            .map(|(v, s)| (star_sum * v / s - 1.0).abs())
            .fold(0.0, f64::max);
        if dev > worst {
            worst = dev;
            worst_t = t;
        }
    }
    let bound = 2.0 * epsilon / (1.0 - epsilon);
    Ok(NuControlReport {
        epsilon,
        start: x,
        n_eps,
        bound,
        worst,
        worst_t,
        checked_until: until,
        holds: worst < bound,
    })
}

/// Sup-distance of the conditional law from its limit along a time grid,
/// with the fitted exponential rate.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionalConvergence {
    pub start: usize,
    pub points: Vec<(usize, f64)>,
    pub fitted_rate: f64,
    pub predicted_rate: f64,
}

/// `||nu_x^t - phi0_star / sum phi0_star||_inf` for `t = 1..=horizon`; the
/// rate is fitted on the late half of the times where the distance is still
/// above `1e-13`.
pub fn conditional_convergence(k: &KernelMatrix, sp: &SpectralPair, x: usize, horizon: usize) -> Result<ConditionalConvergence> {
    require_aperiodic(k)?;
    if x >= k.len() {
        return Err(Error::UnknownVertex(x));
    }
    let limit = qsd_limit(sp).conditional_limit;
    let mut v = vec![0.0; k.len()];
    v[x] = 1.0;
    let mut points = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        v = k.apply_left(&v);
        let mass: f64 = v.iter().sum();
        v.iter_mut().for_each(|a| *a /= mass);
        let d = v.iter().zip(&limit).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        points.push((t, d));
    }
    let usable: Vec<&(usize, f64)> = points.iter().filter(|p| p.1 > 1e-13).collect();
    let late = usable.last().map(|p| p.0 / 2).unwrap_or(0);
    let fit: Vec<(f64, f64)> = usable
        .iter()
        .filter(|p| p.0 >= late)
        .map(|p| (p.0 as f64, p.1.ln()))
        .collect();
    Ok(ConditionalConvergence {
        start: x,
        points,
        fitted_rate: -fit_slope(&fit).unwrap_or(f64::NAN),
        predicted_rate: -sp.second_ratio().ln(),
    })
}

/// Largest entrywise gap between `K_U^t` and
/// `beta0^t diag(phi0) K_phi^t diag(phi0)^{-1}` over `t = 1..=t_max`.
pub fn doob_identity_defect(k: &KernelMatrix, sp: &SpectralPair, t_max: usize) -> Result<f64> {
    let doob = doob_transform(k, sp)?;
    let phi = &sp.phi0;
    let n = k.len();
    let worst = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut a = vec![0.0; n];
            a[x] = 1.0;
            let mut b = a.clone();
            let mut worst: f64 = 0.0;
            let mut bt = 1.0;
            for _ in 0..t_max {
                a = k.apply_left(&a);
                b = doob.apply_left(&b);
                bt *= sp.beta0;
                for y in 0..n {
                    worst = worst.max((a[y] - bt * phi[x] * b[y] / phi[y]).abs());
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// Uniform mixing of the killed chain towards its ground state, read off
/// `K_U^t` directly.
#[derive(Clone, Debug, Serialize)]
pub struct GroundStateMixing {
    /// `(t, max_{x,y} |K_U^t(x,y) / (beta0^t phi0(x) phi0(y) m(y)) - 1|)`.
    pub points: Vec<(usize, f64)>,
    pub fitted_rate: f64,
    /// `1 - beta1/beta0`.
    pub spectral_gap_ratio: f64,
}

/// Powers of `K_U / beta0` from every start, compared with the rank-one
/// ground-state kernel `phi0(x) phi0(y) m(y)` on `t in [t0, t1]`.
pub fn ground_state_mixing(k: &KernelMatrix, sp: &SpectralPair, t0: usize, t1: usize, every: usize) -> Result<GroundStateMixing> {
    if t1 < t0 || every == 0 {
        return Err(Error::validation("need t0 <= t1 and a positive stride"));
    }
    let n = k.len();
    let m = &sp.measure;
    let phi = &sp.phi0;
    let per_start: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut v = vec![0.0; n];
            v[x] = 1.0;
            let mut out = Vec::new();
            for t in 1..=t1 {
                v = k.apply_left(&v);
                v.iter_mut().for_each(|a| *a /= sp.beta0);
                if t >= t0 && (t - t0).is_multiple_of(every) {
                    let d = (0..n)
                        .map(|y| (v[y] / (phi[x] * phi[y] * m[y]) - 1.0).abs())
                        .fold(0.0, f64::max);
                    out.push(d);
                }
            }
            out
        })
        .collect();
    let times: Vec<usize> = (t0..=t1).step_by(every).collect();
    let points: Vec<(usize, f64)> = times
        .iter()
        .enumerate()
        .map(|(i, &t)| (t, per_start.iter().map(|r| r[i]).fold(0.0, f64::max)))
        .collect();
    let fit: Vec<(f64, f64)> = points.iter().filter(|p| p.1 > 1e-12).map(|p| (p.0 as f64, p.1.ln())).collect();
    let b1 = sp.beta1.unwrap_or(0.0);
    Ok(GroundStateMixing {
        points,
        fitted_rate: -fit_slope(&fit).unwrap_or(f64::NAN),
        spectral_gap_ratio: 1.0 - b1 / sp.beta0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::dirichlet_kernel;
    use crate::spectral::{perron_pair, SolverOptions};
    use crate::zoo::{generate, FamilySpec};

    fn five_path(lazy: bool) -> (KernelMatrix, SpectralPair) {
        let inst = generate(&FamilySpec::FivePath).unwrap();
        let mut k = dirichlet_kernel(&inst.domain).unwrap();
        if lazy {
            k = k.lazy(0.5).unwrap();
        }
        let sp = perron_pair(&k, &SolverOptions::default()).unwrap();
        (k, sp)
    }

    #[test]
    fn five_path_survival() {
        let (k, _) = five_path(false);
        let c = survival(&k, 1, 3).unwrap();
        assert_eq!(c.values[0], 1.0);
        assert!((c.values[1] - 1.0).abs() < 1e-15);
        assert!((c.values[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn survival_tail_matches_beta0_even_past_underflow() {
        let inst = generate(&FamilySpec::DiamondBall { n: 3 }).unwrap();
        let k = dirichlet_kernel(&inst.domain).unwrap();
        let sp = perron_pair(&k, &SolverOptions::default()).unwrap();
        let c = survival(&k, 0, 12000).unwrap();
        assert!(c.values.windows(2).all(|w| w[1] <= w[0]));
        assert!(c.log_values.iter().all(|v| v.is_finite()));
        assert_eq!(*c.values.last().unwrap(), 0.0);
        let rate = c.tail_rate().unwrap();
        assert!((rate / sp.beta0.ln() - 1.0).abs() < 0.01, "{rate}");
    }

    #[test]
    fn five_path_conditional_law() {
        let (k, sp) = five_path(false);
        let law = conditional_law(&k, &sp, 1, 1).unwrap();
        for (a, b) in law.nu.iter().zip([0.5, 0.0, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(law.discrepancy < 1e-12);
        assert!(conditional_law(&k, &sp, 1, 0).is_err());
    }

    #[test]
    fn lazy_five_path_limit() {
        let (k, sp) = five_path(true);
        let lim = qsd_limit(&sp);
        let z = 1.0 + std::f64::consts::FRAC_1_SQRT_2;
        let limit = [0.5 / z, std::f64::consts::FRAC_1_SQRT_2 / z, 0.5 / z];
        for (a, b) in lim.conditional_limit.iter().zip(limit) {
            assert!((a - b).abs() < 1e-12);
        }
        let law = conditional_law(&k, &sp, 0, 200).unwrap();
        for (a, b) in law.nu.iter().zip(limit) {
            assert!((a - b).abs() < 1e-10);
        }
        let pi = [0.25, 0.5, 0.25];
        for (a, b) in lim.pi_phi0.iter().zip(pi) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((limit[0] - 0.2929).abs() < 1e-4 && (limit[1] - 0.4142).abs() < 1e-4);
    }

    #[test]
    fn periodic_chain_refuses_limits() {
        let (k, sp) = five_path(false);
        let doob = doob_transform(&k, &sp).unwrap();
        assert!(matches!(convergence_profile(&doob, &sp, None), Err(Error::Periodic { period: 2 })));
        assert!(matches!(nu_control_check(&doob, &sp, 0.1, 0), Err(Error::Periodic { .. })));
    }

    #[test]
    fn convergence_profile_rate() {
        let inst = generate(&FamilySpec::Cone45 { n: 8 }).unwrap();
        let k = dirichlet_kernel(&inst.domain).unwrap().lazy(0.5).unwrap();
        let sp = perron_pair(&k, &SolverOptions::default()).unwrap();
        let doob = doob_transform(&k, &sp).unwrap();
        let p = convergence_profile(&doob, &sp, None).unwrap();
        let min_pi = sp.pi_phi0.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((p.points[0].1 / (1.0 / min_pi - 1.0) - 1.0).abs() < 1e-8);
        assert!(p.relative_error < 0.02, "{p:?}");
        assert!(p.points.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-9)));
    }

    #[test]
    fn odd_sup_matches_direct_power() {
        let inst = generate(&FamilySpec::Cone45 { n: 6 }).unwrap();
        let k = dirichlet_kernel(&inst.domain).unwrap().lazy(0.3).unwrap();
        let sp = perron_pair(&k, &SolverOptions::default()).unwrap();
        let doob = doob_transform(&k, &sp).unwrap();
        let modes = DoobModes::new(&doob).unwrap();
        for t in [1usize, 2, 5, 8] {
            let rows = doob.power_rows(&(0..k.len()).collect::<Vec<_>>(), t);
            let direct = rows
                .iter()
                .flat_map(|r| r.iter().zip(&sp.pi_phi0).map(|(a, p)| (a / p - 1.0).abs()))
                .fold(0.0, f64::max);
            assert!((modes.sup_deviation(t) - direct).abs() < 1e-9 * direct.max(1.0), "t={t}");
        }
    }

    #[test]
    fn nu_control_bounds() {
        let (k, sp) = five_path(true);
        let doob = doob_transform(&k, &sp).unwrap();
        let wide = nu_control_check(&doob, &sp, 0.5, 0).unwrap();
        assert!((wide.bound - 2.0).abs() < 1e-15 && wide.holds);
        let tight = nu_control_check(&doob, &sp, 0.01, 0).unwrap();
        assert!((tight.bound - 0.02 / 0.99).abs() < 1e-15);
        assert!(tight.holds, "{tight:?}");
        let inst = generate(&FamilySpec::Cone45 { n: 10 }).unwrap();
        let k = dirichlet_kernel(&inst.domain).unwrap().lazy(0.5).unwrap();
        let sp = perron_pair(&k, &SolverOptions::default()).unwrap();
        let doob = doob_transform(&k, &sp).unwrap();
        let rep = nu_control_check(&doob, &sp, 0.1, 0).unwrap();
        assert!((rep.bound - 0.2222).abs() < 1e-4 && rep.holds, "{rep:?}");
    }

    #[test]
    fn doob_identity_on_cone() {
        let inst = generate(&FamilySpec::Cone45 { n: 9 }).unwrap();
        let k = dirichlet_kernel(&inst.domain).unwrap();
        let sp = perron_pair(&k, &SolverOptions::default()).unwrap();
        assert!(doob_identity_defect(&k, &sp, 20).unwrap() < 1e-10);
    }
}

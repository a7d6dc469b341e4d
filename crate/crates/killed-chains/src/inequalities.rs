//! Empirical constants for doubling, moderate growth, Poincaré, Nash and
//! weight regularity.
//!
//! Balls are inner balls `B_U(x, r)` of the domain, and Dirichlet forms sum
//! over edges with both ends inside the set in question.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{whitney_cover, JohnCertificate, WhitneyCover};
use crate::graph::{Domain, INF_DIST};
use crate::kernels::{HRule, KernelMatrix};
use crate::spectral::{eigen_decomposition, lanczos_largest, SolverOptions};

/// Which centers a scan visits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sample {
    All,
    Random { n: usize, seed: u64 },
    Points(Vec<usize>),
}

impl Sample {
    fn centers(&self, n: usize) -> Result<Vec<usize>> {
        match self {
            Sample::All => Ok((0..n).collect()),
            Sample::Random { n: k, seed } => {
                let mut all: Vec<usize> = (0..n).collect();
                all.shuffle(&mut ChaCha8Rng::seed_from_u64(*seed));
                all.truncate((*k).min(n));
                all.sort_unstable();
                Ok(all)
            }
            Sample::Points(p) => {
                if let Some(&x) = p.iter().find(|&&x| x >= n) {
                    return Err(Error::UnknownVertex(x));
                }
                Ok(p.clone())
            }
        }
    }
}

/// Vertex and edge weights of a Dirichlet form on `U`.
#[derive(Clone, Copy, Debug)]
pub enum Weights<'a> {
    /// The ambient `(pi, mu)`.
    Base,
    /// `(psi pi, mu h(psi(x), psi(y)))`.
    Tilted { psi: &'a [f64], rule: HRule },
}

impl Weights<'_> {
    fn pi(&self, dom: &Domain, i: usize) -> f64 {
        match self {
            Weights::Base => dom.pi(i),
            Weights::Tilted { psi, .. } => psi[i] * dom.pi(i),
        }
    }
    fn mu(&self, i: usize, j: usize, m: f64) -> f64 {
        match self {
            Weights::Base => m,
            Weights::Tilted { psi, rule } => m * rule.combine(psi[i], psi[j]),
        }
    }
    fn check(&self, dom: &Domain) -> Result<()> {
        if let Weights::Tilted { psi, .. } = self {
            check_psi(dom, psi)?;
        }
        Ok(())
    }
}

fn check_psi(dom: &Domain, psi: &[f64]) -> Result<()> {
    if psi.len() != dom.len() {
        return Err(Error::validation("weight must have one value per domain vertex"));
    }
    if psi.iter().any(|&p| !(p.is_finite() && p > 0.0)) {
        return Err(Error::validation("weight must be positive"));
    }
    Ok(())
}

/// Per-vertex distance histogram weighted by `measure`: `v[r] = V(x, r)`.
fn volume_profile(dom: &Domain, x: usize, measure: &[f64]) -> Vec<f64> {
    let d = dom.inner_bfs(&[x]);
    let far = d.iter().copied().filter(|&v| v != INF_DIST).max().unwrap_or(0) as usize;
    let mut v = vec![0.0; far + 1];
    for (i, &di) in d.iter().enumerate() {
        if di != INF_DIST {
            v[di as usize] += measure[i];
        }
    }
    for r in 1..v.len() {
        v[r] += v[r - 1];
    }
    v
}

fn vol_at(profile: &[f64], r: f64) -> f64 {
    let k = if r < 1.0 { 0 } else { r.floor() as usize };
    profile[k.min(profile.len() - 1)]
}

#[derive(Clone, Debug, Serialize)]
pub struct DoublingReport {
    pub constant: f64,
    pub worst_witness: (usize, f64),
    pub radii_tested: Vec<f64>,
    pub centers_tested: usize,
}

/// `max V(x, 2r) / V(x, r)` over the sampled centers and the radius grid,
/// with `V` the `measure` of inner balls.
pub fn doubling_constant(dom: &Domain, measure: &[f64], radii: &[f64], sample: &Sample) -> Result<DoublingReport> {
    if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::validation("radius grid must be nonempty and positive"));
    }
    if measure.len() != dom.len() {
        return Err(Error::validation("measure must have one value per domain vertex"));
    }
    let centers = sample.centers(dom.len())?;
    let worst = centers
        .par_iter()
        .map(|&x| {
            let p = volume_profile(dom, x, measure);
            radii
                .iter()
                .map(|&r| (vol_at(&p, 2.0 * r) / vol_at(&p, r), x, r))
                .fold((1.0, x, radii[0]), |a, b| if b.0 > a.0 { b } else { a })
        })
        .reduce(|| (1.0, usize::MAX, 0.0), |a, b| if b.0 > a.0 || a.1 == usize::MAX { b } else { a });
    Ok(DoublingReport {
        constant: worst.0,
        worst_witness: (worst.1, worst.2),
        radii_tested: radii.to_vec(),
        centers_tested: centers.len(),
    })
}

/// `1/2, 1, 2, 4, ...` up to `max`.
pub fn dyadic_radii(max: f64) -> Vec<f64> {
    let mut out = vec![0.5];
    let mut r = 1.0;
    while r <= max {
        out.push(r);
        r *= 2.0;
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct ModerateGrowth {
    pub a: f64,
    pub nu: f64,
    pub diam: u32,
    /// `min_x V(x, r) / pi(U)` for `r = 1..=diam`.
    pub min_volume: Vec<f64>,
}

/// Volume profiles of every vertex, normalized by total mass.
fn all_profiles(dom: &Domain, measure: &[f64]) -> (Vec<Vec<f64>>, u32) {
    let total: f64 = measure.iter().sum();
    let profiles: Vec<Vec<f64>> = (0..dom.len())
        .into_par_iter()
        .map(|x| volume_profile(dom, x, measure).into_iter().map(|v| v / total).collect())
        .collect();
    let diam = profiles.iter().map(|p| p.len() - 1).max().unwrap_or(0) as u32;
    (profiles, diam)
}

/// Worst ratio `V(x,r)/pi(U) / ((1+r)/diam)^nu` over all `x` and integer
/// `r in [1, diam]`.
fn growth_residual(profiles: &[Vec<f64>], diam: u32, nu: f64) -> f64 {
    let d = diam.max(1) as f64;
    profiles
        .iter()
        .flat_map(|p| {
            (1..=diam.max(1)).map(move |r| vol_at(p, r as f64) / ((1.0 + r as f64) / d).powf(nu))
        })
        .fold(f64::INFINITY, f64::min)
}

/// Fitted `(a, nu)`: `nu` is the least-squares slope of
/// `log min_x V(x,r)/pi(U)` against `log((1+r)/diam)` over `r <= diam/2`
/// (all `r` when `diam < 4`), and `a` is the exact worst case given `nu`.
pub fn moderate_growth(dom: &Domain, measure: &[f64]) -> Result<ModerateGrowth> {
    if measure.len() != dom.len() {
        return Err(Error::validation("measure must have one value per domain vertex"));
    }
    let (profiles, diam) = all_profiles(dom, measure);
    let d = diam.max(1);
    let min_volume: Vec<f64> = (1..=d)
        .map(|r| profiles.iter().map(|p| vol_at(p, r as f64)).fold(f64::INFINITY, f64::min))
        .collect();
    let (from, upto) = if d < 4 { (1, d) } else { ((d / 4).max(1), d / 2) };
    let pts: Vec<(f64, f64)> = (from..=upto)
        .map(|r| (((1.0 + r as f64) / d as f64).ln(), min_volume[r as usize - 1].ln()))
        .collect();
    let nu = fit_slope(&pts).unwrap_or(0.0).max(0.0);
    let a = growth_residual(&profiles, diam, nu);
    Ok(ModerateGrowth { a, nu, diam, min_volume })
}

/// Does `(a, nu)` satisfy the moderate-growth inequality on every tested
/// `(x, r)`?
pub fn moderate_growth_holds(dom: &Domain, measure: &[f64], a: f64, nu: f64) -> bool {
    let (profiles, diam) = all_profiles(dom, measure);
    growth_residual(&profiles, diam, nu) >= a * (1.0 - 1e-12)
}

/// Least-squares slope through `(x, y)` points; `None` with fewer than two
/// distinct abscissae.
pub fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 1e-300 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Neumann-form data on a vertex set.
#[derive(Clone, Debug)]
pub struct NeumannGap {
    /// Smallest nonzero eigenvalue of `E(f,f) / Var(f)`.
    pub lambda1: f64,
    /// Its eigenfunction, indexed like the input set.
    pub eigenfunction: Vec<f64>,
}

impl NeumannGap {
    pub fn constant(&self) -> f64 {
        1.0 / self.lambda1
    }
}

/// `(sum |f - f_B|^2 pi, sum_{edges in B} |df|^2 mu)` for `f` indexed like `set`.
pub fn neumann_rayleigh(dom: &Domain, set: &[usize], w: Weights<'_>, f: &[f64]) -> (f64, f64) {
    let pi: Vec<f64> = set.iter().map(|&i| w.pi(dom, i)).collect();
    let mass: f64 = pi.iter().sum();
    let mean = f.iter().zip(&pi).map(|(a, b)| a * b).sum::<f64>() / mass;
    let var = f.iter().zip(&pi).map(|(a, b)| (a - mean).powi(2) * b).sum();
    let mut pos = std::collections::HashMap::new();
    for (k, &i) in set.iter().enumerate() {
        pos.insert(i, k);
    }
    let mut energy = 0.0;
    for (k, &i) in set.iter().enumerate() {
        for &(j, m) in dom.neighbors(i) {
            if let Some(&l) = pos.get(&j) {
                if l > k {
                    energy += (f[k] - f[l]).powi(2) * w.mu(i, j, m);
                }
            }
        }
    }
    (var, energy)
}

/// Spectral gap of the Neumann form restricted to `set` (local ids of the
/// domain). Returns `lambda1 = 0` when the set is not connected by its
/// internal edges.
pub fn neumann_gap(dom: &Domain, set: &[usize], w: Weights<'_>) -> Result<NeumannGap> {
    w.check(dom)?;
    let n = set.len();
    if n < 2 {
        return Err(Error::validation("a Poincaré constant needs at least two vertices"));
    }
    let mut pos = std::collections::HashMap::new();
    for (k, &i) in set.iter().enumerate() {
        pos.insert(i, k);
    }
    let pi: Vec<f64> = set.iter().map(|&i| w.pi(dom, i)).collect();
    let sq: Vec<f64> = pi.iter().map(|p| p.sqrt()).collect();
    let mut edges = Vec::new();
    for (k, &i) in set.iter().enumerate() {
        for &(j, m) in dom.neighbors(i) {
            if let Some(&l) = pos.get(&j) {
                if l > k {
                    edges.push((k, l, w.mu(i, j, m)));
                }
            }
        }
    }
    if edges.is_empty() {
        return Ok(NeumannGap { lambda1: 0.0, eigenfunction: vec![0.0; n] });
    }
    let norm: f64 = pi.iter().sum::<f64>().sqrt();
    let ground: Vec<f64> = sq.iter().map(|s| s / norm).collect();
    let (lambda1, v) = if n <= 2000 {
        let mut a = DMatrix::<f64>::zeros(n, n);
        for &(k, l, m) in &edges {
            a[(k, k)] += m / pi[k];
            a[(l, l)] += m / pi[l];
            let off = m / (sq[k] * sq[l]);
            a[(k, l)] -= off;
            a[(l, k)] -= off;
        }
        let eig = SymmetricEigen::new(a);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
        let j = order[1];
        (eig.eigenvalues[j].max(0.0), (0..n).map(|i| eig.eigenvectors[(i, j)]).collect::<Vec<f64>>())
    } else {
        let mut deg = vec![0.0; n];
        for &(k, l, m) in &edges {
            deg[k] += m;
            deg[l] += m;
        }
        let shift = 2.0 * (0..n).map(|k| deg[k] / pi[k]).fold(0.0, f64::max);
        let op = |x: &[f64]| {
            let mut y: Vec<f64> = (0..n).map(|k| shift * x[k] - deg[k] / pi[k] * x[k]).collect();
            for &(k, l, m) in &edges {
                let off = m / (sq[k] * sq[l]);
                y[k] += off * x[l];
                y[l] += off * x[k];
            }
            y
        };
        let start = crate::spectral::random_start(n, 17);
        let (theta, v) = lanczos_largest(&op, n, start, &[ground], &SolverOptions::default())?;
        ((shift - theta).max(0.0), v)
    };
    let eigenfunction = v.iter().zip(&sq).map(|(a, s)| a / s).collect();
    Ok(NeumannGap { lambda1, eigenfunction })
}

/// Tightest Poincaré constant `1/lambda1` on the inner ball `B_U(x, r)`;
/// infinite when the ball has no internal edge.
pub fn ball_poincare_constant(dom: &Domain, x: usize, r: f64, w: Weights<'_>) -> Result<f64> {
    if x >= dom.len() {
        return Err(Error::UnknownVertex(x));
    }
    let ball = dom.inner_ball(x, r);
    let gap = neumann_gap(dom, &ball, w)?;
    Ok(if gap.lambda1 > 0.0 { gap.constant() } else { f64::INFINITY })
}

/// Poincaré constant of the whole domain under its Neumann form.
pub fn domain_poincare_constant(dom: &Domain, w: Weights<'_>) -> Result<f64> {
    let all: Vec<usize> = (0..dom.len()).collect();
    let gap = neumann_gap(dom, &all, w)?;
    Ok(if gap.lambda1 > 0.0 { gap.constant() } else { f64::INFINITY })
}

#[derive(Clone, Debug, Serialize)]
pub struct PoincareReport {
    pub theta: f64,
    /// `max (1/lambda1(B)) / r^theta` over the tested balls.
    pub constant: f64,
    pub witness: (usize, f64),
    pub balls_tested: usize,
}

/// Scan inner balls and return the worst normalized Poincaré constant.
/// Balls with a single vertex are skipped.
pub fn poincare_scan(dom: &Domain, radii: &[f64], theta: f64, w: Weights<'_>, sample: &Sample) -> Result<PoincareReport> {
    w.check(dom)?;
    let centers = sample.centers(dom.len())?;
    let jobs: Vec<(usize, f64)> = centers.iter().flat_map(|&x| radii.iter().map(move |&r| (x, r))).collect();
    let vals: Vec<Option<(f64, usize, f64)>> = jobs
        .par_iter()
        .map(|&(x, r)| {
            let ball = dom.inner_ball(x, r);
            if ball.len() < 2 {
                return Ok(None);
            }
            let gap = neumann_gap(dom, &ball, w)?;
            let c = if gap.lambda1 > 0.0 { gap.constant() } else { f64::INFINITY };
            Ok(Some((c / r.powf(theta), x, r)))
        })
        .collect::<Result<_>>()?;
    let tested: Vec<(f64, usize, f64)> = vals.into_iter().flatten().collect();
    let worst = tested
        .iter()
        .copied()
        .fold((0.0, 0, 0.0), |a, b| if b.0 > a.0 { b } else { a });
    Ok(PoincareReport { theta, constant: worst.0, witness: (worst.1, worst.2), balls_tested: tested.len() })
}

/// `E_{mu,U}(f,f)`: edge energy over edges inside `U`.
pub fn energy_u(dom: &Domain, f: &[f64]) -> f64 {
    (0..dom.len())
        .map(|i| {
            dom.neighbors(i)
                .iter()
                .filter(|e| e.0 > i)
                .map(|&(j, m)| (f[i] - f[j]).powi(2) * m)
                .sum::<f64>()
        })
        .sum()
}

/// The averaging operator `Q_s`: the identity for `s <= 1`, otherwise the
/// `pi`-average over the triple of the ball `F(s, x)` of `cover`.
pub fn q_operator(dom: &Domain, cover: &WhitneyCover, f: &[f64], s: f64) -> Result<Vec<f64>> {
    if f.len() != dom.len() {
        return Err(Error::validation("function must have one value per domain vertex"));
    }
    if s <= 1.0 {
        return Ok(f.to_vec());
    }
    match cover.scale {
        Some(c) if (c - s).abs() <= 1e-12 => {}
        _ => return Err(Error::validation(format!("cover was built at scale {:?}, not {s}", cover.scale))),
    }
    let avg: Vec<f64> = cover
        .balls
        .iter()
        .map(|b| {
            let (num, den) = b
                .tripled
                .iter()
                .fold((0.0, 0.0), |(n, d), &y| (n + f[y] * dom.pi(y), d + dom.pi(y)));
            num / den
        })
        .collect();
    (0..dom.len()).map(|x| Ok(avg[cover.averaging_ball(x)?])).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct QPoincareReport {
    pub theta: f64,
    pub eta: f64,
    /// `max sum |f - Q_s f|^2 pi / (s^theta E(f,f))` over functions and scales.
    pub constant: f64,
    pub worst: (f64, String),
    pub per_scale: Vec<(f64, f64)>,
}

/// Evaluate the Q-Poincaré ratio over a suite of functions and scales.
pub fn q_poincare_check(
    dom: &Domain,
    cert: &JohnCertificate,
    eta: f64,
    scales: &[f64],
    theta: f64,
    funcs: &[(String, Vec<f64>)],
) -> Result<QPoincareReport> {
    let mut per_scale = Vec::new();
    let mut worst = (0.0, (0.0, String::new()));
    for &s in scales {
        let cover = if s > 1.0 {
            Some(whitney_cover(dom, eta, Some(s))?.with_chains(dom, cert)?)
        } else {
            None
        };
        let mut best: f64 = 0.0;
        for (name, f) in funcs {
            let e = energy_u(dom, f);
            if e <= 1e-300 {
                continue;
            }
            let q = match &cover {
                Some(c) => q_operator(dom, c, f, s)?,
                None => f.clone(),
            };
            let lhs: f64 = (0..dom.len()).map(|i| (f[i] - q[i]).powi(2) * dom.pi(i)).sum();
            let ratio = lhs / (s.powf(theta) * e);
            if ratio > worst.0 {
                worst = (ratio, (s, name.clone()));
            }
            best = best.max(ratio);
        }
        per_scale.push((s, best));
    }
    Ok(QPoincareReport { theta, eta, constant: worst.0, worst: worst.1, per_scale })
}

/// Test functions: `n_random` standard normal fields, the coordinates,
/// `delta`, inner distance to the center, indicators of a few inner balls,
/// and the leading eigenfunctions of `k` when given and small enough.
pub fn test_suite(dom: &Domain, k: Option<&KernelMatrix>, n_random: usize, seed: u64) -> Result<Vec<(String, Vec<f64>)>> {
    let n = dom.len();
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for r in 0..n_random {
        let f: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        out.push((format!("normal_{r}"), f));
    }
    if let Some(c0) = dom.coord(0) {
        for a in 0..c0.len() {
            out.push((format!("coord_{a}"), (0..n).map(|i| dom.coord(i).unwrap()[a] as f64).collect()));
        }
    }
    out.push(("delta".into(), (0..n).map(|i| dom.delta_f64(i)).collect()));
    let dc = dom.inner_distances(dom.center());
    out.push(("dist_center".into(), dc.iter().map(|&d| d as f64).collect()));
    let ro = dom.internal_radius() as f64;
    for (x, r) in [(dom.center(), 0.0), (dom.center(), ro / 4.0), (dom.center(), ro / 2.0), (0, 1.0), (n / 3, 2.0)] {
        let mut f = vec![0.0; n];
        for v in dom.inner_ball(x, r) {
            f[v] = 1.0;
        }
        out.push((format!("ball_{x}_{r}"), f));
    }
    if let Some(k) = k {
        if k.len() <= 2000 {
            let (_, vecs) = eigen_decomposition(k)?;
            for (j, v) in vecs.into_iter().take(4).enumerate() {
                out.push((format!("eigen_{j}"), v));
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct NashReport {
    pub theta: f64,
    pub nu: f64,
    pub big_n: f64,
    /// Smallest `C` making the Nash inequality hold over the suite.
    pub c_suite: f64,
    pub worst_function: String,
    /// `(n, sup_x K^{2n}(x,x)/pi(x), 2 (8C(1+nu/theta)/(n+1))^{nu/theta})`.
    pub decay: Vec<(usize, f64, f64)>,
    pub decay_holds: bool,
}

/// Smallest Nash constant over `funcs` (norms in `L^p` of the kernel's
/// normalized measure, `E(f,f) = <(I-K)f, f>`), and the kernel-decay bound
/// it implies, checked against the exact spectral sum for `n <= 2N`.
pub fn verify_nash(k: &KernelMatrix, theta: f64, nu: f64, big_n: f64, funcs: &[(String, Vec<f64>)]) -> Result<NashReport> {
    if !(theta > 0.0 && nu > 0.0 && big_n > 0.0) {
        return Err(Error::validation("theta, nu and N must be positive"));
    }
    let total: f64 = k.measure().iter().sum();
    let m: Vec<f64> = k.measure().iter().map(|v| v / total).collect();
    let m = &m[..];
    let n = k.len();
    let mut c_suite: f64 = 0.0;
    let mut worst_function = String::new();
    for (name, f) in funcs {
        if f.len() != n {
            return Err(Error::validation(format!("test function {name} has the wrong length")));
        }
        let l1: f64 = f.iter().zip(m).map(|(a, b)| a.abs() * b).sum();
        let l2sq: f64 = f.iter().zip(m).map(|(a, b)| a * a * b).sum();
        if l2sq <= 1e-300 {
            continue;
        }
        let kf = k.apply(f);
        let energy: f64 = (0..n).map(|i| (f[i] - kf[i]) * f[i] * m[i]).sum::<f64>().max(0.0);
        let lhs = l2sq.powf(1.0 + theta / nu);
        let rhs = (energy + l2sq / big_n) * l1.powf(2.0 * theta / nu);
        let c = lhs / rhs;
        if c > c_suite {
            c_suite = c;
            worst_function = name.clone();
        }
    }
    let (values, vecs) = eigen_decomposition(k)?;
    let steps = (2.0 * big_n).floor() as usize;
    let decay: Vec<(usize, f64, f64)> = (0..=steps)
        .map(|s| {
            let sup = (0..n)
                .map(|x| values.iter().zip(&vecs).map(|(b, v)| b.powi(2 * s as i32) * v[x] * v[x]).sum::<f64>())
                .fold(0.0, f64::max);
            let bound = 2.0 * (8.0 * c_suite * (1.0 + nu / theta) / (s as f64 + 1.0)).powf(nu / theta);
            (s, sup, bound)
        })
        .collect();
    let decay_holds = decay.iter().all(|&(_, a, b)| a <= b * (1.0 + 1e-10));
    Ok(NashReport { theta, nu, big_n, c_suite, worst_function, decay, decay_holds })
}

#[derive(Clone, Debug, Serialize)]
pub struct ControlFit {
    pub omega: f64,
    pub a1: f64,
    /// `(s, max over local s-chains of psi(x_0)/psi(x_i))`.
    pub per_scale: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightRegularityReport {
    pub eta: f64,
    /// `max` of the edge and ball constants.
    pub reg_constant: f64,
    pub edge_constant: f64,
    pub ball_constant: f64,
    pub control: Option<ControlFit>,
    pub doubling_of_psi_pi: f64,
}

/// Regularity, control and doubling of a positive weight `psi` on `U`.
///
/// Control is fitted only when a John certificate and a scale grid are
/// supplied: `omega` is the least-squares slope of `log M(s)` against
/// `log s` (clamped at 0), and `A_1 = max_s M(s) / s^omega`.
pub fn weight_regularity(
    dom: &Domain,
    psi: &[f64],
    eta: f64,
    chains: Option<(&JohnCertificate, &[f64])>,
) -> Result<WeightRegularityReport> {
    check_psi(dom, psi)?;
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::validation(format!("eta must lie in (0,1), got {eta}")));
    }
    let n = dom.len();
    let edge_constant = (0..n)
        .flat_map(|i| dom.neighbors(i).iter().map(move |&(j, _)| psi[i] / psi[j]))
        .fold(1.0, f64::max);
    let ball_constant = (0..n)
        .into_par_iter()
        .map(|z| {
            let dz = dom.delta_f64(z);
            let r = (6.0 * eta * dz).min(dz - 1.0);
            let ball = dom.inner_ball(z, r.max(0.0));
            let (lo, hi) = ball
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(psi[v]), hi.max(psi[v])));
            hi / lo
        })
        .reduce(|| 1.0, f64::max);
    let control = match chains {
        None => None,
        Some((cert, scales)) => {
            let mut per_scale = Vec::new();
            for &s in scales {
                let cover = whitney_cover(dom, eta, Some(s))?.with_chains(dom, cert)?;
                let mut worst: f64 = 1.0;
                for e in 0..cover.balls.len() {
                    let x0 = cover.balls[e].center;
                    for &f in cover.local_chain(e)? {
                        worst = worst.max(psi[x0] / psi[cover.balls[f].center]);
                    }
                }
                per_scale.push((s, worst));
            }
            let pts: Vec<(f64, f64)> = per_scale.iter().map(|&(s, m)| (s.ln(), m.ln())).collect();
            let omega = fit_slope(&pts).unwrap_or(0.0).max(0.0);
            let a1 = per_scale.iter().map(|&(s, m)| m / s.powf(omega)).fold(1.0, f64::max);
            Some(ControlFit { omega, a1, per_scale })
        }
    };
    let psi_pi: Vec<f64> = (0..n).map(|i| psi[i] * dom.pi(i)).collect();
    let diam = dom.internal_radius() as f64 * 2.0;
    let doubling = doubling_constant(dom, &psi_pi, &dyadic_radii(diam.max(1.0)), &Sample::All)?;
    Ok(WeightRegularityReport {
        eta,
        reg_constant: edge_constant.max(ball_constant),
        edge_constant,
        ball_constant,
        control,
        doubling_of_psi_pi: doubling.constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::john_radius;
    use crate::graph::WeightedGraph;
    use crate::kernels::{dirichlet_kernel, global_kernel};
    use crate::zoo::{delta_power, generate, BoxBoundary, FamilySpec};
    use std::sync::Arc;

    fn whole(g: WeightedGraph) -> Domain {
        let g = Arc::new(g);
        let all: Vec<usize> = (0..g.len()).collect();
        Domain::new(g, &all, None).unwrap()
    }

    #[test]
    fn lattice_doubling_ratio() {
        let g = WeightedGraph::box_grid(&[9, 9], 0.25, 1.0).unwrap();
        let d = whole(g);
        let x = d.local_at(&[4, 4]).unwrap();
        let ones = vec![1.0; d.len()];
        let rep = doubling_constant(&d, &ones, &[1.0], &Sample::Points(vec![x])).unwrap();
        assert!((rep.constant - 13.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn whole_graph_ball_ratio_is_one() {
        let g = WeightedGraph::box_grid(&[2], 0.5, 1.0).unwrap();
        let d = whole(g);
        let ones = vec![1.0; d.len()];
        let rep = doubling_constant(&d, &ones, &[5.0], &Sample::All).unwrap();
        assert_eq!(rep.constant, 1.0);
        assert!(doubling_constant(&d, &ones, &[], &Sample::All).is_err());
    }

    #[test]
    fn doob_measure_doubling_is_uniform() {
        let cs: Vec<f64> = [6usize, 10, 14]
            .iter()
            .map(|&n| {
                let inst = generate(&FamilySpec::DiamondBall { n }).unwrap();
                let (phi, _) = crate::zoo::closed_form_phi0(&inst).unwrap();
                let m: Vec<f64> = (0..phi.len()).map(|i| phi[i] * phi[i] * inst.domain.pi(i)).collect();
                doubling_constant(&inst.domain, &m, &dyadic_radii(2.0 * n as f64), &Sample::All).unwrap().constant
            })
            .collect();
        let (lo, hi) = cs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
        assert!(hi / lo < 2.0, "{cs:?}");
    }

    #[test]
    fn two_point_poincare() {
        let g = WeightedGraph::new(vec![1.0, 1.0], &[(0, 1, 0.5)]).unwrap();
        let d = whole(g);
        let gap = neumann_gap(&d, &[0, 1], Weights::Base).unwrap();
        assert!((gap.lambda1 - 1.0).abs() < 1e-14);
        assert!((ball_poincare_constant(&d, 0, 1.0, Weights::Base).unwrap() - 1.0).abs() < 1e-14);
        assert!(ball_poincare_constant(&d, 0, 0.5, Weights::Base).is_err());
    }

    #[test]
    fn poincare_is_tight() {
        let inst = generate(&FamilySpec::Cone45 { n: 12 }).unwrap();
        let d = &inst.domain;
        let psi = delta_power(d, 2.0);
        for w in [Weights::Base, Weights::Tilted { psi: &psi, rule: HRule::Min }] {
            let ball = d.inner_ball(d.center(), 4.0);
            let gap = neumann_gap(d, &ball, w).unwrap();
            let (var, en) = neumann_rayleigh(d, &ball, w, &gap.eigenfunction);
            assert!((en / var - gap.lambda1).abs() <= 1e-10 * gap.lambda1);
            let (v1, e1) = neumann_rayleigh(d, &ball, w, &vec![3.0; ball.len()]);
            assert!(v1.abs() < 1e-20 && e1 == 0.0);
        }
    }

    #[test]
    fn lanczos_gap_matches_dense() {
        let inst = generate(&FamilySpec::DiamondBall { n: 33 }).unwrap();
        let d = &inst.domain;
        assert!(d.len() > 2000);
        let big = domain_poincare_constant(d, Weights::Base).unwrap();
        let inst2 = generate(&FamilySpec::DiamondBall { n: 30 }).unwrap();
        let small = domain_poincare_constant(&inst2.domain, Weights::Base).unwrap();
        let ratio = big / small;
        let expect = (34.0f64 / 31.0).powi(2);
        assert!((ratio / expect - 1.0).abs() < 0.05, "{ratio} vs {expect}");
    }

    #[test]
    fn domain_poincare_scales_quadratically() {
        let pts: Vec<(f64, f64)> = [6usize, 10, 14, 18]
            .iter()
            .map(|&n| {
                let inst = generate(&FamilySpec::DiamondBall { n }).unwrap();
                let r = inst.domain.delta_f64(inst.domain.center());
                (r.ln(), domain_poincare_constant(&inst.domain, Weights::Base).unwrap().ln())
            })
            .collect();
        let slope = fit_slope(&pts).unwrap();
        assert!((slope - 2.0).abs() <= 0.15, "slope {slope}");
    }

    #[test]
    fn moderate_growth_box() {
        let inst = generate(&FamilySpec::BoxPoles { n: 8, d: 2, boundary: BoxBoundary::Natural }).unwrap();
        let d = &inst.domain;
        let ones = vec![1.0; d.len()];
        let mg = moderate_growth(d, &ones).unwrap();
        assert!((mg.nu - 2.0).abs() <= 0.1, "nu = {}", mg.nu);
        assert!(moderate_growth_holds(d, &ones, mg.a, mg.nu));
        let dbl = doubling_constant(d, &ones, &(1..=mg.diam).map(|r| r as f64).chain([0.5]).collect::<Vec<_>>(), &Sample::All)
            .unwrap()
            .constant;
        assert!(moderate_growth_holds(d, &ones, dbl.powi(-2), dbl.log2()));
    }

    #[test]
    fn moderate_growth_complete_graph() {
        let edges: Vec<(usize, usize, f64)> = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j, 0.25))).collect();
        let d = whole(WeightedGraph::new(vec![1.0; 4], &edges).unwrap());
        let mg = moderate_growth(&d, &[1.0; 4]).unwrap();
        assert_eq!(mg.nu, 0.0);
        assert!((mg.a - 1.0).abs() < 1e-15);
    }

    #[test]
    fn q_operator_basics() {
        let inst = generate(&FamilySpec::Cone45 { n: 16 }).unwrap();
        let d = &inst.domain;
        let cert = john_radius(d, d.center(), 1.0 / 3.0).unwrap().unwrap();
        let cover = whitney_cover(d, 0.2, Some(2.0)).unwrap().with_chains(d, &cert).unwrap();
        let f: Vec<f64> = (0..d.len()).map(|i| i as f64).collect();
        assert_eq!(q_operator(d, &cover, &f, 0.5).unwrap(), f);
        let one = q_operator(d, &cover, &vec![1.0; d.len()], 2.0).unwrap();
        assert!(one.iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert!(q_operator(d, &cover, &f, 3.0).is_err());
        let bare = whitney_cover(d, 0.2, Some(2.0)).unwrap();
        assert!(matches!(q_operator(d, &bare, &f, 2.0), Err(Error::Dependency(_))));
    }

    #[test]
    fn q_poincare_bounded() {
        let cs: Vec<f64> = [12usize, 20]
            .iter()
            .map(|&n| {
                let inst = generate(&FamilySpec::Cone45 { n }).unwrap();
                let d = &inst.domain;
                let cert = john_radius(d, d.center(), 1.0 / 3.0).unwrap().unwrap();
                let suite = test_suite(d, None, 6, 1).unwrap();
                q_poincare_check(d, &cert, 0.2, &[1.0, 2.0, 3.0, 4.0], 2.0, &suite).unwrap().constant
            })
            .collect();
        assert!(cs.iter().all(|&c| c.is_finite() && c > 0.0));
        assert!(cs[1] < 3.0 * cs[0], "{cs:?}");
    }

    #[test]
    fn nash_box() {
        let g = Arc::new(WeightedGraph::box_grid(&[10, 10], 0.125, 1.0).unwrap());
        let d = whole((*g).clone());
        let k = global_kernel(&g).unwrap();
        let suite = test_suite(&d, Some(&k), 4, 2).unwrap();
        let rep = verify_nash(&k, 2.0, 2.0, 25.0, &suite).unwrap();
        assert!(rep.decay_holds, "{:?}", rep.decay.iter().find(|t| t.1 > t.2));
        let x = d.local_at(&[5, 5]).unwrap();
        let mut delta = vec![0.0; d.len()];
        delta[x] = 1.0;
        let single = verify_nash(&k, 2.0, 2.0, 25.0, &[("point".into(), delta)]).unwrap();
        let m = 1.0 / 121.0;
        let expect = m * m / ((m * 0.5 + m / 25.0) * m * m);
        assert!((single.c_suite / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn regularity_constant_weight() {
        let inst = generate(&FamilySpec::Cone45 { n: 12 }).unwrap();
        let d = &inst.domain;
        let cert = john_radius(d, d.center(), 1.0 / 3.0).unwrap().unwrap();
        let rep = weight_regularity(d, &vec![1.0; d.len()], 0.1, Some((&cert, &[1.0, 2.0, 3.0]))).unwrap();
        assert_eq!(rep.reg_constant, 1.0);
        let c = rep.control.unwrap();
        assert_eq!((c.omega, c.a1), (0.0, 1.0));
        assert!(weight_regularity(d, &vec![0.0; d.len()], 0.1, None).is_err());
    }

    #[test]
    fn regularity_of_delta_power_is_stable() {
        let consts: Vec<(f64, f64)> = [8usize, 16]
            .iter()
            .map(|&n| {
                let inst = generate(&FamilySpec::BoxPoles { n, d: 2, boundary: BoxBoundary::Natural }).unwrap();
                let psi = delta_power(&inst.domain, 2.0);
                let r = weight_regularity(&inst.domain, &psi, 0.1, None).unwrap();
                (r.reg_constant, r.doubling_of_psi_pi)
            })
            .collect();
        assert!((consts[0].0 - consts[1].0).abs() < 1e-12, "{consts:?}");
        assert!(consts[1].1 < 1.5 * consts[0].1, "{consts:?}");
    }

    #[test]
    fn inverse_delta_power_is_controlled_with_omega_nu() {
        let inst = generate(&FamilySpec::BoxPoles { n: 400, d: 1, boundary: BoxBoundary::Natural }).unwrap();
        let d = &inst.domain;
        let psi = delta_power(d, -2.0);
        let cert = john_radius(d, d.center(), 1.0).unwrap().unwrap();
        let scales = [1.0, 2.0, 4.0, 8.0];
        let rep = weight_regularity(d, &psi, 0.1, Some((&cert, &scales))).unwrap();
        let c = rep.control.unwrap();
        assert!((c.omega - 2.0).abs() < 0.3, "{c:?}");
        let doubling: Vec<f64> = [20usize, 60]
            .iter()
            .map(|&n| {
                let i = generate(&FamilySpec::BoxPoles { n, d: 1, boundary: BoxBoundary::Natural }).unwrap();
                weight_regularity(&i.domain, &delta_power(&i.domain, -2.0), 0.1, None).unwrap().doubling_of_psi_pi
            })
            .collect();
        assert!(doubling[1] > 2.0 * doubling[0], "{doubling:?}");
        let _ = dirichlet_kernel(d).unwrap();
    }
}

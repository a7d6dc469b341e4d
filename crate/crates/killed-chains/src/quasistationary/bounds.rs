use rayon::prelude::*;
use serde::Serialize;

use crate::defaults::HARMONIC_TOL;
use crate::error::{Error, Result};
use crate::geometry::{x_r, JohnCertificate};
use crate::graph::Domain;
use crate::inequalities::{doubling_constant, dyadic_radii, fit_slope, weight_regularity, Sample};
use crate::kernels::KernelMatrix;
use crate::spectral::SpectralPair;
use crate::zoo::{explicit_shift, FamilySpec};

/// How `x_r` is obtained for the bound checks.
#[derive(Clone, Copy, Debug)]
pub enum XrMap<'a> {
    /// Walk `floor(r)` steps along the stored certificate path.
    Certified(&'a JohnCertificate),
    /// The explicit coordinate shift of the cone or the diamond.
    Explicit(&'a FamilySpec),
}

impl XrMap<'_> {
    pub fn point(&self, dom: &Domain, x: usize, r: f64) -> Result<usize> {
        match self {
            XrMap::Certified(cert) => x_r(cert, x, r),
            XrMap::Explicit(spec) => {
                let c = dom
                    .coord(x)
                    .ok_or_else(|| Error::Dependency("explicit shift needs coordinates".into()))?;
                let (p, q) = explicit_shift(spec, c[0], c[1], r * r)
                    .ok_or_else(|| Error::Dependency(format!("{} has no explicit shift", spec.name())))?;
                dom.local_at(&[p, q])
                    .ok_or_else(|| Error::Check(format!("explicit shift of {c:?} leaves the domain")))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundRow {
    pub x: usize,
    pub t: f64,
    pub measured: f64,
    pub envelope: f64,
    pub ratio: f64,
}

/// Measured quantity against a theoretical envelope over a grid.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub check: String,
    pub rows: Vec<BoundRow>,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

impl BoundReport {
    fn from_rows(check: &str, rows: Vec<BoundRow>) -> Self {
        let (min_ratio, max_ratio) = rows
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.ratio), hi.max(r.ratio)));
        BoundReport { check: check.to_string(), rows, min_ratio, max_ratio }
    }

    /// `max_ratio / min_ratio`.
    pub fn window(&self) -> f64 {
        self.max_ratio / self.min_ratio
    }
}

/// Survival vectors `K^t 1` at the requested times only.
fn survival_at(k: &KernelMatrix, times: &[usize]) -> Vec<Vec<f64>> {
    let t_max = times.iter().copied().max().unwrap_or(0);
    let mut out = vec![Vec::new(); times.len()];
    let mut u = vec![1.0; k.len()];
    for t in 0..=t_max {
        if t > 0 {
            u = k.apply(&u);
        }
        for (i, _) in times.iter().enumerate().filter(|e| *e.1 == t) {
            out[i] = u.clone();
        }
    }
    out
}

/// Ratios `P_x(tau > t) / (beta0^t phi0(x) / phi0(x_{sqrt t}))` over a grid
/// of `(x, t)` pairs.
pub fn exit_time_bound_check(
    k: &KernelMatrix,
    sp: &SpectralPair,
    dom: &Domain,
    map: XrMap<'_>,
    grid: &[(usize, usize)],
) -> Result<BoundReport> {
    let times: Vec<usize> = grid.iter().map(|g| g.1).collect();
    let surv = survival_at(k, &times);
    let rows = grid
        .iter()
        .zip(&surv)
        .map(|(&(x, t), u)| {
            if x >= dom.len() {
                return Err(Error::UnknownVertex(x));
            }
            let y = map.point(dom, x, (t as f64).sqrt())?;
            let envelope = sp.beta0.powi(t as i32) * sp.phi0[x] / sp.phi0[y];
            Ok(BoundRow { x, t: t as f64, measured: u[x], envelope, ratio: u[x] / envelope })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::from_rows("exit_time", rows))
}

/// `((N - p) / (N - p + sqrt t))^2`, the explicit survival approximation on
/// the diamond from `(p, 0)`.
pub fn diamond_survival_approximation(n: usize, p: usize, t: f64) -> f64 {
    let a = n as f64 - p as f64;
    (a / (a + t.sqrt())).powi(2)
}

/// Diamond survival from `(p, 0)` against the explicit approximation.
pub fn explicit_survival_check(k: &KernelMatrix, dom: &Domain, n: usize, grid: &[(usize, usize)]) -> Result<BoundReport> {
    let times: Vec<usize> = grid.iter().map(|g| g.1).collect();
    let surv = survival_at(k, &times);
    let rows = grid
        .iter()
        .zip(&surv)
        .map(|(&(p, t), u)| {
            if p >= n {
                return Err(Error::validation(format!("p = {p} must be below N = {n}")));
            }
            let x = dom
                .local_at(&[p as i64, 0])
                .ok_or_else(|| Error::validation(format!("({p},0) is not in the domain")))?;
            let envelope = diamond_survival_approximation(n, p, t as f64);
            Ok(BoundRow { x, t: t as f64, measured: u[x], envelope, ratio: u[x] / envelope })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::from_rows("explicit_survival", rows))
}

/// Two-sided Gaussian envelope `c1 exp(-C1 z) <= m * den <= C2 exp(-c2 z)`
/// with `z = d^2 / t`. The exponents come from a least-squares fit of
/// `log(m * den)` against `z`; the constants are the extreme residuals.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnvelopeFit {
    pub c1: f64,
    pub big_c1: f64,
    pub c2: f64,
    pub big_c2: f64,
}

impl EnvelopeFit {
    fn fit(z: &[f64], y: &[f64]) -> Option<Self> {
        let pts: Vec<(f64, f64)> = z.iter().copied().zip(y.iter().copied()).collect();
        let rate = -fit_slope(&pts)?;
        let resid = z.iter().zip(y).map(|(z, y)| y + rate * z);
        let (lo, hi) = resid.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r), b.max(r)));
        Some(EnvelopeFit { c1: lo.exp(), big_c1: rate, c2: rate, big_c2: hi.exp() })
    }

    fn lower(&self, z: f64) -> f64 {
        self.c1 * (-self.big_c1 * z).exp()
    }

    fn upper(&self, z: f64) -> f64 {
        self.big_c2 * (-self.c2 * z).exp()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GaussianRow {
    pub x: usize,
    pub y: usize,
    pub t: usize,
    pub dist: u32,
    /// `K_phi^t(x,y) / pi_phi0(y)`.
    pub measured: f64,
    /// `sqrt(V(x, sqrt t) V(y, sqrt t)) phi0(x_{sqrt t}) phi0(y_{sqrt t})`.
    pub denominator: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GaussianReport {
    pub rows: Vec<GaussianRow>,
    pub fit: EnvelopeFit,
    pub per_t: Vec<(usize, EnvelopeFit)>,
    pub lower_violations: usize,
    pub upper_violations: usize,
}

/// Doob kernel against the Gaussian envelope on every triple `(x, y, t)`
/// with `d_U(x, y) <= t`. Volumes are taken in `pi_U` on inner balls.
pub fn gaussian_bound_check(
    doob: &KernelMatrix,
    sp: &SpectralPair,
    dom: &Domain,
    map: XrMap<'_>,
    ts: &[usize],
    starts: &[usize],
) -> Result<GaussianReport> {
    if ts.is_empty() || starts.is_empty() {
        return Err(Error::validation("need at least one time and one start"));
    }
    let pi_u = dom.pi_u();
    let n = dom.len();
    let mut rows = Vec::new();
    for &t in ts {
        let r = (t as f64).sqrt();
        let vol: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|v| dom.inner_ball(v, r).iter().map(|&w| pi_u[w]).sum())
            .collect();
        let shifted: Vec<f64> = (0..n).map(|v| Ok(sp.phi0[map.point(dom, v, r)?])).collect::<Result<_>>()?;
        let powers = doob.power_rows(starts, t);
        for (&x, row) in starts.iter().zip(&powers) {
            let dist = dom.inner_distances(x);
            for y in 0..n {
                if dist[y] as usize > t || row[y] <= 0.0 {
                    continue;
                }
                rows.push(GaussianRow {
                    x,
                    y,
                    t,
                    dist: dist[y],
                    measured: row[y] / sp.pi_phi0[y],
                    denominator: (vol[x] * vol[y]).sqrt() * shifted[x] * shifted[y],
                });
            }
        }
    }
    let z = |r: &GaussianRow| (r.dist as f64).powi(2) / r.t as f64;
    let y = |r: &GaussianRow| (r.measured * r.denominator).ln();
    let all_z: Vec<f64> = rows.iter().map(z).collect();
    let all_y: Vec<f64> = rows.iter().map(y).collect();
    let fit = EnvelopeFit::fit(&all_z, &all_y).ok_or_else(|| Error::Check("envelope fit is degenerate".into()))?;
    let per_t = ts
        .iter()
        .filter_map(|&t| {
            let sel: Vec<&GaussianRow> = rows.iter().filter(|r| r.t == t).collect();
            let zz: Vec<f64> = sel.iter().map(|r| z(r)).collect();
            let yy: Vec<f64> = sel.iter().map(|r| y(r)).collect();
            EnvelopeFit::fit(&zz, &yy).map(|f| (t, f))
        })
        .collect();
    let tol = 1e-9;
    let lower_violations = rows
        .iter()
        .filter(|r| r.measured * r.denominator < fit.lower(z(r)) * (1.0 - tol))
        .count();
    let upper_violations = rows
        .iter()
        .filter(|r| r.measured * r.denominator > fit.upper(z(r)) * (1.0 + tol))
        .count();
    Ok(GaussianReport { rows, fit, per_t, lower_violations, upper_violations })
}

#[derive(Clone, Debug, Serialize)]
pub struct CarlesonReport {
    /// `max phi0(z) / phi0(x_r)` over `z` in `B_U(x, r/2)`.
    pub c0: f64,
    /// `(x, r, z)` attaining `c0`.
    pub witness: (usize, f64, usize),
    /// Regularity constant of `phi0` at `eta = 1/8`.
    pub regularity: f64,
    /// Doubling constant of `pi_phi0` on dyadic inner balls.
    pub doubling: f64,
}

pub fn carleson_check(sp: &SpectralPair, dom: &Domain, map: XrMap<'_>, radii: &[f64]) -> Result<CarlesonReport> {
    if radii.is_empty() {
        return Err(Error::validation("radius grid must be nonempty"));
    }
    let phi = &sp.phi0;
    let best = (0..dom.len())
        .into_par_iter()
        .map(|x| {
            let mut best = (0.0f64, (x, 0.0, x));
            for &r in radii {
                let y = map.point(dom, x, r)?;
                for z in dom.inner_ball(x, r / 2.0) {
                    let c = phi[z] / phi[y];
                    if c > best.0 {
                        best = (c, (x, r, z));
                    }
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((0.0, (0, 0.0, 0)), |a, b| if b.0 > a.0 { b } else { a });
    let regularity = weight_regularity(dom, phi, 0.125, None)?.reg_constant;
    let diam = dom.internal_radius() as f64 * 2.0;
    let doubling = doubling_constant(dom, &sp.pi_phi0, &dyadic_radii(diam.max(1.0)), &Sample::All)?.constant;
    Ok(CarlesonReport { c0: best.0, witness: best.1, regularity, doubling })
}

#[derive(Clone, Debug, Serialize)]
pub struct HarmonicReport {
    /// `max phi0(y) h(z) / (phi0(z) h(y))` over `y, z` in `B_U(x, r/2)`.
    pub c1: f64,
    pub witness: (usize, usize),
    /// `max |K h - h| / max |h|` on `B_U(x, r)`.
    pub harmonic_defect: f64,
    pub ball_size: usize,
}

/// Boundary Harnack comparison of `phi0` with a positive function `h` that is
/// harmonic for the killed kernel on `B_U(x, r)`.
pub fn harmonic_ratio_check(
    k: &KernelMatrix,
    sp: &SpectralPair,
    dom: &Domain,
    x: usize,
    r: f64,
    h: &[f64],
) -> Result<HarmonicReport> {
    if h.len() != dom.len() {
        return Err(Error::validation("h must have one value per domain vertex"));
    }
    if let Some(i) = h.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::validation(format!("h must be positive, h[{i}] = {}", h[i])));
    }
    if x >= dom.len() {
        return Err(Error::UnknownVertex(x));
    }
    let ball = dom.inner_ball(x, r);
    if ball.len() == dom.len() {
        return Err(Error::validation("the ball must be a proper subset of the domain"));
    }
    let kh = k.apply(h);
    let scale = ball.iter().map(|&v| h[v]).fold(0.0, f64::max);
    let harmonic_defect = ball.iter().map(|&v| (kh[v] - h[v]).abs()).fold(0.0, f64::max) / scale;
    if harmonic_defect > HARMONIC_TOL {
        return Err(Error::validation(format!(
            "h is not harmonic on the ball (defect {harmonic_defect:.3e})"
        )));
    }
    let half = dom.inner_ball(x, r / 2.0);
    let q = |v: usize| sp.phi0[v] / h[v];
    let hi = *half.iter().max_by(|&&a, &&b| q(a).total_cmp(&q(b))).unwrap();
    let lo = *half.iter().min_by(|&&a, &&b| q(a).total_cmp(&q(b))).unwrap();
    Ok(HarmonicReport { c1: q(hi) / q(lo), witness: (hi, lo), harmonic_defect, ball_size: ball.len() })
}

/// `G(0,0) - G(0,x)` for simple random walk on `Z^d`, where `G` is the Green
/// function of the walk killed outside the box `[-m, m]^d`. It vanishes at
/// the origin and is exactly harmonic at every other interior point.
/// Returns the values at the domain's coordinates.
pub fn lattice_potential(dom: &Domain, m: i64) -> Result<Vec<f64>> {
    let coords: Vec<&[i64]> = (0..dom.len())
        .map(|i| dom.coord(i).ok_or_else(|| Error::Dependency("lattice potential needs coordinates".into())))
        .collect::<Result<_>>()?;
    let d = coords.first().map(|c| c.len()).unwrap_or(0);
    if d == 0 || coords.iter().any(|c| c.iter().any(|&v| v.abs() >= m)) {
        return Err(Error::validation(format!("padding box [-{m},{m}] must strictly contain the domain")));
    }
    let side = (2 * m + 1) as usize;
    let len = side.pow(d as u32);
    let strides: Vec<usize> = (0..d).map(|i| side.pow(i as u32)).collect();
    let index = |c: &[i64]| c.iter().zip(&strides).map(|(&v, s)| (v + m) as usize * s).sum::<usize>();
    // (I - P) restricted to the open box; neighbours on the faces are zero.
    let apply = |u: &[f64]| -> Vec<f64> {
        (0..len)
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                for &s in &strides {
                    let coord = (i / s) % side;
                    if coord > 0 {
                        acc += u[i - s];
                    }
                    if coord + 1 < side {
                        acc += u[i + s];
                    }
                }
                u[i] - acc / (2 * d) as f64
            })
            .collect()
    };
    let origin = index(&vec![0; d]);
    let mut b = vec![0.0; len];
    b[origin] = 1.0;
    let g = conjugate_gradient(apply, &b, 1e-15, 20 * len)?;
    Ok(coords.iter().map(|c| g[origin] - g[index(c)]).collect())
}

fn conjugate_gradient<F: Fn(&[f64]) -> Vec<f64>>(apply: F, b: &[f64], rtol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let dot = |a: &[f64], c: &[f64]| a.par_iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let stop = rtol * rtol * rr;
    for _ in 0..max_iter {
        if rr <= stop {
            return Ok(x);
        }
        let ap = apply(&p);
        let alpha = rr / dot(&p, &ap);
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, ai)| *ri -= alpha * ai);
        let next = dot(&r, &r);
        let beta = next / rr;
        rr = next;
        p.iter_mut().zip(&r).for_each(|(pi, ri)| *pi = ri + beta * *pi);
    }
    Err(Error::Solver("conjugate gradient did not converge".into()))
}

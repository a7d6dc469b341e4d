use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Domain;

/// Witness that `U` is a John domain with respect to `center`.
///
/// Paths and vertices are local indices of the domain. Paths are allowed to
/// revisit vertices; a loop can always be cut out without breaking the
/// constraint, so this does not change which `(alpha, R)` are feasible.
#[derive(Clone, Debug, Serialize)]
pub struct JohnCertificate {
    pub center: usize,
    pub alpha: f64,
    pub john_radius: usize,
    pub feasible: bool,
    /// `paths[x]` runs from `x` to `center`; empty when `x` is not reachable.
    pub paths: Vec<Vec<usize>>,
    /// Vertices with no admissible path.
    pub unreachable: Vec<usize>,
}

impl JohnCertificate {
    pub fn path(&self, x: usize) -> Result<&[usize]> {
        match self.paths.get(x) {
            Some(p) if !p.is_empty() => Ok(p),
            _ => Err(Error::Dependency(format!("no John path stored for vertex {x}"))),
        }
    }

    /// Re-check every stored path against the definition; returns the
    /// first violation.
    pub fn audit(&self, dom: &Domain) -> std::result::Result<(), String> {
        for (x, p) in self.paths.iter().enumerate() {
            if p.is_empty() {
                continue;
            }
            if p[0] != x || *p.last().unwrap() != self.center {
                return Err(format!("path of {x} has wrong endpoints"));
            }
            if p.len() - 1 > self.john_radius {
                return Err(format!("path of {x} has length {} > R", p.len() - 1));
            }
            for (i, w) in p.windows(2).enumerate() {
                if !dom.neighbors(w[0]).iter().any(|e| e.0 == w[1]) {
                    return Err(format!("path of {x} breaks at step {i}"));
                }
            }
            for (i, &v) in p.iter().enumerate() {
                if (dom.delta(v) as f64) < self.alpha * (1.0 + i as f64) - 1e-12 {
                    return Err(format!("path of {x}: delta too small at step {i}"));
                }
            }
        }
        Ok(())
    }
}

/// Largest integer `i` with `delta >= alpha (1 + i)`, or `-1`.
fn step_cap(delta: u32, alpha: f64) -> i64 {
    ((delta as f64 / alpha) * (1.0 + 1e-12) - 1.0).floor() as i64
}

/// `top[v]` = largest step index at which a walk can stand on `v` and still
/// reach `o` by index `r_max` while respecting the constraint; `-1` if none.
fn top_index(dom: &Domain, o: usize, alpha: f64, r_max: usize) -> Vec<i64> {
    let n = dom.len();
    let mut top = vec![-1i64; n];
    let t0 = step_cap(dom.delta(o), alpha).min(r_max as i64);
    if t0 < 0 {
        return top;
    }
    top[o] = t0;
    let mut heap = BinaryHeap::new();
    heap.push((t0, o));
    while let Some((t, v)) = heap.pop() {
        if t < top[v] {
            continue;
        }
        for &(w, _) in dom.neighbors(v) {
            if w == o {
                continue;
            }
            let cand = (t - 1).min(step_cap(dom.delta(w), alpha));
            if cand > top[w] {
                top[w] = cand;
                heap.push((cand, w));
            }
        }
    }
    top
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::validation(format!("alpha must lie in (0,1], got {alpha}")));
    }
    Ok(())
}

fn feasible_with(dom: &Domain, o: usize, alpha: f64, r_max: usize) -> bool {
    top_index(dom, o, alpha, r_max).iter().all(|&t| t >= 0)
}

/// Decide whether every vertex reaches `o` by an `alpha`-John path of
/// length at most `r_max`, and extract witnesses.
pub fn john_feasible(dom: &Domain, o: usize, alpha: f64, r_max: usize) -> Result<JohnCertificate> {
    check_alpha(alpha)?;
    if o >= dom.len() {
        return Err(Error::UnknownVertex(o));
    }
    let top = top_index(dom, o, alpha, r_max);
    let to_o = dom.inner_distances(o);
    let paths: Vec<Vec<usize>> = (0..dom.len())
        .into_par_iter()
        .map(|x| {
            if top[x] < 0 {
                return Vec::new();
            }
            let mut path = vec![x];
            let mut v = x;
            let mut i = 0i64;
            while v != o {
                let next = dom
                    .neighbors(v)
                    .iter()
                    .map(|e| e.0)
                    .filter(|&w| top[w] > i)
                    .min_by_key(|&w| (w != o, to_o[w], std::cmp::Reverse(dom.delta(w)), w))
                    .expect("a vertex with top >= i has a successor at i + 1");
                path.push(next);
                v = next;
                i += 1;
            }
            path
        })
        .collect();
    let unreachable: Vec<usize> = (0..dom.len()).filter(|&x| top[x] < 0).collect();
    let john_radius = paths.iter().map(|p| p.len().saturating_sub(1)).max().unwrap_or(0);
    Ok(JohnCertificate {
        center: o,
        alpha,
        john_radius,
        feasible: unreachable.is_empty(),
        paths,
        unreachable,
    })
}

/// Smallest `R` for which `U` is `alpha`-John around `o`, with the
/// corresponding witnesses, or `None` if no `R` works.
pub fn john_radius(dom: &Domain, o: usize, alpha: f64) -> Result<Option<JohnCertificate>> {
    check_alpha(alpha)?;
    let lo = dom.inner_distances(o).iter().copied().max().unwrap() as usize;
    let hi = lo.max(step_cap(dom.delta(o), alpha).max(0) as usize);
    if !feasible_with(dom, o, alpha, hi) {
        return Ok(None);
    }
    let (mut lo, mut hi) = (lo, hi);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible_with(dom, o, alpha, mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let cert = john_feasible(dom, o, alpha, lo)?;
    Ok(Some(cert))
}

/// Largest `alpha` for which `U` is `alpha`-John around `o`. The search runs
/// over the finite candidate set `delta(v) / (1 + i)`.
pub fn best_john_alpha(dom: &Domain, o: usize) -> Result<f64> {
    if o >= dom.len() {
        return Err(Error::UnknownVertex(o));
    }
    let max_delta = dom.deltas().iter().copied().max().unwrap();
    if max_delta == crate::graph::INF_DIST {
        return Err(Error::validation("domain has no boundary"));
    }
    let max_len = dom.len();
    let mut cands: Vec<f64> = (1..=max_delta)
        .flat_map(|a| (0..max_len).map(move |i| a as f64 / (1.0 + i as f64)))
        .filter(|&c| c <= 1.0)
        .collect();
    cands.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cands.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs());
    let unbounded = usize::MAX / 4;
    let ok = |a: f64| feasible_with(dom, o, a, unbounded);
    if !ok(cands[0]) {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0usize, cands.len() - 1);
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if ok(cands[mid]) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Ok(cands[lo])
}

/// Best `alpha` over all candidate centers.
pub fn best_john_alpha_any_center(dom: &Domain) -> Result<(f64, usize)> {
    let res: Vec<(f64, usize)> = (0..dom.len())
        .into_par_iter()
        .map(|o| Ok((best_john_alpha(dom, o)?, o)))
        .collect::<Result<_>>()?;
    Ok(res
        .into_iter()
        .fold((0.0, dom.center()), |acc, c| if c.0 > acc.0 { c } else { acc }))
}

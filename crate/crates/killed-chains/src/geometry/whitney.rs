use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;

use super::john::JohnCertificate;
use crate::error::{Error, Result};
use crate::graph::Domain;

/// One Whitney ball `B(center, radius)`; `ball` and `tripled` hold local ids.
#[derive(Clone, Debug, Serialize)]
pub struct WhitneyBall {
    pub center: usize,
    pub radius: f64,
    #[serde(skip)]
    pub ball: Vec<usize>,
    #[serde(skip)]
    pub tripled: Vec<usize>,
}

/// A (scale-`s`) Whitney covering of a domain.
#[derive(Clone, Debug, Serialize)]
pub struct WhitneyCover {
    pub eta: f64,
    /// `None` stands for the standard cover (`s = infinity`).
    pub scale: Option<f64>,
    pub balls: Vec<WhitneyBall>,
    /// Index of the anchor ball `E_o`, whose triple contains the center.
    pub anchor: usize,
    /// For each ball `E`, the full chain `(F_0, ..., F_q)` of ball indices.
    pub chains: Option<Vec<Vec<usize>>>,
    /// For each local vertex, the indices of the balls whose triple contains it.
    #[serde(skip)]
    pub covering: Vec<Vec<usize>>,
}

/// Results of the exhaustive consistency checks on a cover.
#[derive(Clone, Debug, Serialize)]
pub struct CoverAudit {
    pub disjoint: bool,
    pub triples_cover: bool,
    pub max_radius: f64,
    pub radius_bound: f64,
    pub radius_bound_ok: bool,
    /// Worst `delta` ratio over pairs of intersecting `(2/eta)`-dilates.
    pub worst_delta_ratio: f64,
    /// Largest number of `(2/eta)`-dilates containing one vertex.
    pub max_overlap: usize,
    /// Worst radius ratio of consecutive chain balls of radius `>= 1`.
    pub worst_chain_ratio: Option<f64>,
    pub chains_adjacent: Option<bool>,
}

impl WhitneyCover {
    /// Whether ball `e` belongs to `W_{=s}`.
    pub fn is_full(&self, e: usize) -> bool {
        self.scale.is_some_and(|s| self.balls[e].radius >= s)
    }

    /// Ball of maximal radius (lowest center id on ties) among those whose
    /// triple contains `x`.
    pub fn cover_ball(&self, x: usize) -> usize {
        *self.covering[x]
            .iter()
            .max_by(|&&a, &&b| {
                self.balls[a]
                    .radius
                    .partial_cmp(&self.balls[b].radius)
                    .unwrap()
                    .then(self.balls[b].center.cmp(&self.balls[a].center))
            })
            .expect("tripled balls cover the domain")
    }

    /// The local s-chain of ball `e`: its chain cut at the first ball of
    /// radius `s`.
    pub fn local_chain(&self, e: usize) -> Result<&[usize]> {
        let chains = self
            .chains
            .as_ref()
            .ok_or_else(|| Error::Dependency("cover was built without chains".into()))?;
        let c = &chains[e];
        let cut = c.iter().position(|&f| self.is_full(f)).unwrap_or(c.len() - 1);
        Ok(&c[..=cut])
    }

    /// `F(s, x)` as a ball index; the averaging set is that ball's triple.
    pub fn averaging_ball(&self, x: usize) -> Result<usize> {
        let e = self.cover_ball(x);
        let in_full = self.covering[x].iter().any(|&f| self.is_full(f));
        if in_full {
            Ok(e)
        } else {
            Ok(*self.local_chain(e)?.last().unwrap())
        }
    }

    /// Attach chains built along the John paths of `cert`.
    ///
    /// Starting from `3E`, the next ball is the largest one (lowest center id
    /// on ties) whose triple holds the first path vertex past the furthest
    /// one covered by the current ball. If every such ball is already in the
    /// chain, the chain is cut back to the largest of them.
    pub fn with_chains(mut self, dom: &Domain, cert: &JohnCertificate) -> Result<Self> {
        if cert.center != dom.center() || !cert.feasible {
            return Err(Error::Dependency(
                "a feasible John certificate for the domain center is required".into(),
            ));
        }
        let pos_in: Vec<HashSet<usize>> = self
            .balls
            .iter()
            .map(|b| b.tripled.iter().copied().collect())
            .collect();
        let by_size = |a: &usize, b: &usize| {
            self.balls[*b]
                .radius
                .partial_cmp(&self.balls[*a].radius)
                .unwrap()
                .then(self.balls[*a].center.cmp(&self.balls[*b].center))
        };
        let chains: Vec<Vec<usize>> = (0..self.balls.len())
            .into_par_iter()
            .map(|e| {
                let path = cert.path(self.balls[e].center)?;
                let furthest = |f: usize| path.iter().rposition(|v| pos_in[f].contains(v)).unwrap();
                let mut chain = vec![e];
                let mut pos = furthest(e);
                while *chain.last().unwrap() != self.anchor {
                    if pos + 1 == path.len() {
                        chain.push(self.anchor);
                        break;
                    }
                    let next_v = path[pos + 1];
                    let mut cands = self.covering[next_v].clone();
                    cands.sort_by(by_size);
                    match cands.iter().find(|f| !chain.contains(f)) {
                        Some(&f) => chain.push(f),
                        None => {
                            let keep = chain.iter().position(|f| *f == cands[0]).unwrap();
                            chain.truncate(keep + 1);
                        }
                    }
                    pos = furthest(*chain.last().unwrap());
                }
                if let Some(k) = chain.iter().position(|&f| f == self.anchor) {
                    chain.truncate(k + 1);
                }
                Ok(chain)
            })
            .collect::<Result<_>>()?;
        self.chains = Some(chains);
        Ok(self)
    }

    /// Exhaustive checks of the covering properties. `john_radius` feeds the
    /// radius bound `eta (2R + 1) / 4`.
    pub fn audit(&self, dom: &Domain, john_radius: usize) -> CoverAudit {
        let n = dom.len();
        let mut owner = vec![usize::MAX; n];
        let mut disjoint = true;
        for (k, b) in self.balls.iter().enumerate() {
            for &v in &b.ball {
                if owner[v] != usize::MAX {
                    disjoint = false;
                }
                owner[v] = k;
            }
        }
        let triples_cover = self.covering.iter().all(|c| !c.is_empty());
        let max_radius = self.balls.iter().map(|b| b.radius).fold(0.0, f64::max);
        let radius_bound = self.eta * (2.0 * john_radius as f64 + 1.0) / 4.0;

        let rho = 2.0 / self.eta;
        let dil: Vec<Vec<usize>> = self
            .balls
            .par_iter()
            .map(|b| dom.ambient_ball(b.center, rho * b.radius))
            .collect();
        let mut hits: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (k, set) in dil.iter().enumerate() {
            for &v in set {
                hits[v].push(k);
            }
        }
        let max_overlap = hits.iter().map(|h| h.len()).max().unwrap_or(0);
        let mut worst_delta_ratio: f64 = 1.0;
        for h in &hits {
            for &a in h {
                for &b in h {
                    let r = dom.delta_f64(self.balls[a].center) / dom.delta_f64(self.balls[b].center);
                    worst_delta_ratio = worst_delta_ratio.max(r);
                }
            }
        }

        let (worst_chain_ratio, chains_adjacent) = match &self.chains {
            None => (None, None),
            Some(chains) => {
                let mut worst: f64 = 1.0;
                let mut adjacent = true;
                for c in chains {
                    for w in c.windows(2) {
                        let (a, b) = (&self.balls[w[0]], &self.balls[w[1]]);
                        if 3.0 * a.radius.max(b.radius) >= 1.0 {
                            worst = worst.max(a.radius / b.radius).max(b.radius / a.radius);
                        }
                        let dist = b
                            .tripled
                            .iter()
                            .map(|&v| {
                                let d = dom.inner_distances(v);
                                a.tripled.iter().map(|&u| d[u]).min().unwrap()
                            })
                            .min()
                            .unwrap();
                        adjacent &= dist <= 1;
                    }
                }
                (Some(worst), Some(adjacent))
            }
        };
        CoverAudit {
            disjoint,
            triples_cover,
            max_radius,
            radius_bound,
            radius_bound_ok: max_radius <= radius_bound + 1e-12,
            worst_delta_ratio,
            max_overlap,
            worst_chain_ratio,
            chains_adjacent,
        }
    }

    /// Empirical constant `kappa` in `#{K in W_<s : 3K meets gamma_E} <= kappa log2(4s)`,
    /// maximized over the balls `E` of the cover.
    pub fn chain_count_constant(&self, cert: &JohnCertificate) -> Result<f64> {
        let s = self.scale.unwrap_or(f64::INFINITY);
        let s_eff = if s.is_finite() { s } else { self.balls.iter().map(|b| b.radius).fold(1.0, f64::max) };
        let denom = (4.0 * s_eff).log2();
        let mut worst: f64 = 0.0;
        for b in &self.balls {
            let path = cert.path(b.center)?;
            let mut seen: Vec<usize> = path
                .iter()
                .flat_map(|&v| self.covering[v].iter().copied())
                .filter(|&k| !self.is_full(k))
                .collect();
            seen.sort_unstable();
            seen.dedup();
            worst = worst.max(seen.len() as f64 / denom);
        }
        Ok(worst)
    }
}

/// Greedy Whitney cover: candidate balls `B(x, min{s, eta delta(x)/4})` in
/// order of decreasing radius (ties by vertex id), each kept if disjoint from
/// those already kept.
pub fn whitney_cover(dom: &Domain, eta: f64, scale: Option<f64>) -> Result<WhitneyCover> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::validation(format!("eta must lie in (0,1), got {eta}")));
    }
    if let Some(s) = scale {
        if s < 1.0 {
            return Err(Error::validation(format!("scale must be at least 1, got {s}")));
        }
    }
    if !dom.has_boundary() {
        return Err(Error::validation("Whitney covers need a domain with boundary"));
    }
    let n = dom.len();
    let radius = |x: usize| {
        let r = eta * dom.delta_f64(x) / 4.0;
        scale.map_or(r, |s| r.min(s))
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| radius(b).partial_cmp(&radius(a)).unwrap().then(a.cmp(&b)));
    let mut taken = vec![false; n];
    let mut balls = Vec::new();
    for x in order {
        let r = radius(x);
        let ball = dom.inner_ball(x, r);
        if ball.iter().any(|&v| taken[v]) {
            continue;
        }
        for &v in &ball {
            taken[v] = true;
        }
        balls.push(WhitneyBall { center: x, radius: r, ball, tripled: Vec::new() });
    }
    balls.par_iter_mut().for_each(|b| b.tripled = dom.inner_ball(b.center, 3.0 * b.radius));
    let mut covering = vec![Vec::new(); n];
    for (k, b) in balls.iter().enumerate() {
        for &v in &b.tripled {
            covering[v].push(k);
        }
    }
    let mut cover = WhitneyCover { eta, scale, balls, anchor: 0, chains: None, covering };
    cover.anchor = cover.cover_ball(dom.center());
    Ok(cover)
}

#[cfg(test)]
mod tests {
    use super::super::john::john_radius;
    use super::*;
    use crate::zoo::{generate, FamilySpec};

    #[test]
    fn boundary_adjacent_balls_are_singletons() {
        let inst = generate(&FamilySpec::Cone45 { n: 10 }).unwrap();
        let cover = whitney_cover(&inst.domain, 0.8, None).unwrap();
        for b in &cover.balls {
            if inst.domain.delta(b.center) == 1 {
                assert_eq!(b.ball, vec![b.center]);
            }
        }
    }

    #[test]
    fn covers_pass_audit() {
        for spec in [
            FamilySpec::Cone45 { n: 20 },
            FamilySpec::DiamondBall { n: 12 },
            FamilySpec::FigD3Nonconvex { n: 14 },
        ] {
            let inst = generate(&spec).unwrap();
            let d = &inst.domain;
            let cert = john_radius(d, d.center(), crate::geometry::best_john_alpha(d, d.center()).unwrap())
                .unwrap()
                .unwrap();
            for eta in [1.0 / 12.0, 0.25, 0.8] {
                for scale in [None, Some(1.0), Some(2.0)] {
                    let cover = whitney_cover(d, eta, scale).unwrap().with_chains(d, &cert).unwrap();
                    let a = cover.audit(d, cert.john_radius);
                    assert!(a.disjoint && a.triples_cover && a.radius_bound_ok, "{spec:?} {eta} {a:?}");
                    assert!(a.worst_delta_ratio <= 3.0 + 1e-12, "{a:?}");
                    assert_eq!(a.chains_adjacent, Some(true));
                    if eta <= 0.25 {
                        assert!(a.worst_chain_ratio.unwrap() <= 11.0 / 5.0 + 1e-12, "{a:?}");
                    }
                    for (e, c) in cover.chains.as_ref().unwrap().iter().enumerate() {
                        assert_eq!(c[0], e);
                        assert_eq!(*c.last().unwrap(), cover.anchor);
                        let mut u = c.clone();
                        u.sort_unstable();
                        u.dedup();
                        assert_eq!(u.len(), c.len());
                        let path = cert.path(cover.balls[e].center).unwrap();
                        for &f in c {
                            assert!(path.iter().any(|v| cover.balls[f].tripled.contains(v)));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn chains_need_feasible_certificate() {
        let inst = generate(&FamilySpec::Cone45 { n: 8 }).unwrap();
        let d = &inst.domain;
        let bad = crate::geometry::john_feasible(d, d.center(), 1.0, 3).unwrap();
        assert!(!bad.feasible);
        let cover = whitney_cover(d, 0.25, None).unwrap();
        assert!(matches!(cover.with_chains(d, &bad), Err(Error::Dependency(_))));
    }

    #[test]
    fn invalid_parameters() {
        let inst = generate(&FamilySpec::Cone45 { n: 8 }).unwrap();
        assert!(whitney_cover(&inst.domain, 1.0, None).is_err());
        assert!(whitney_cover(&inst.domain, 0.5, Some(0.5)).is_err());
    }
}

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::defaults::{IU_EXHAUSTIVE_CAP, IU_SAMPLE_PAIRS};
use crate::error::{Error, Result};
use crate::graph::Domain;

/// Which pairs an inner-uniform certification examines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum PairSelection {
    /// Every unordered pair.
    All,
    /// `n` pairs stratified by inner-distance decile.
    Sample { n: usize, seed: u64 },
    /// `All` up to the exhaustive cap, a default sample beyond.
    Auto,
}

#[derive(Clone, Debug, Serialize)]
pub struct InnerUniformCertificate {
    pub alpha: f64,
    pub big_a: f64,
    pub pairs_tested: usize,
    pub pairs_certified: usize,
    pub pair_coverage: f64,
    pub exhaustive: bool,
    /// Up to a few uncertified pairs `(x, y, d_U(x,y))`.
    pub failures: Vec<(usize, usize, u32)>,
    /// A handful of witness paths for certified pairs.
    pub witness_paths: Vec<((usize, usize), Vec<usize>)>,
}

impl InnerUniformCertificate {
    pub fn certified(&self) -> bool {
        self.pairs_certified == self.pairs_tested
    }
}

const WITNESS_CAP: usize = 32;
const FAILURE_CAP: usize = 32;

#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }
    fn meets(&self, other: &Bits) -> bool {
        self.0.iter().zip(&other.0).any(|(a, b)| a & b != 0)
    }
    fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }
    fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(k, &w)| {
            (0..64).filter(move |b| w >> b & 1 == 1).map(move |b| 64 * k + b)
        })
    }
}

/// Walk layers from one endpoint: `reach[j]` holds the vertices reachable by
/// an admissible walk of length `j` (every step `i` has
/// `delta >= alpha (1 + i)`), `nbr[j]` their neighbours in `U`.
struct Layers {
    reach: Vec<Bits>,
    nbr: Vec<Bits>,
}

fn ok(dom: &Domain, v: usize, alpha: f64, j: usize) -> bool {
    dom.delta(v) as f64 >= alpha * (1.0 + j as f64) - 1e-12
}

fn layers(dom: &Domain, x: usize, alpha: f64, depth: usize) -> Layers {
    let n = dom.len();
    let mut reach = Vec::with_capacity(depth + 1);
    let mut nbr = Vec::with_capacity(depth + 1);
    let mut cur = Bits::new(n);
    if ok(dom, x, alpha, 0) {
        cur.set(x);
    }
    for j in 0..=depth {
        let mut nb = Bits::new(n);
        for v in cur.ones() {
            for &(w, _) in dom.neighbors(v) {
                nb.set(w);
            }
        }
        let mut next = Bits::new(n);
        for w in nb.ones() {
            if ok(dom, w, alpha, j + 1) {
                next.set(w);
            }
        }
        let done = cur.is_empty();
        reach.push(cur);
        nbr.push(nb);
        if done {
            break;
        }
        cur = next;
    }
    Layers { reach, nbr }
}

impl Layers {
    fn reach(&self, j: usize) -> Option<&Bits> {
        self.reach.get(j)
    }
    fn nbr(&self, j: usize) -> Option<&Bits> {
        self.nbr.get(j)
    }
}

/// Shortest admissible length `k <= floor(A d)` joining the endpoints of
/// `lx`, `ly`, if any.
fn certify_pair(lx: &Layers, ly: &Layers, d: u32, big_a: f64) -> Option<usize> {
    let kmax = (big_a * d as f64 + 1e-9).floor() as usize;
    (d as usize..=kmax).find(|&k| {
        let h = k / 2;
        // Positions 0..=h are measured from x, positions h+1..=k from y.
        match (lx.reach(h), ly.nbr(k - h - 1)) {
            (Some(a), Some(b)) => a.meets(b),
            _ => false,
        }
    })
}

fn back_track(dom: &Domain, l: &Layers, end: usize, j: usize) -> Vec<usize> {
    let mut path = vec![end];
    let mut v = end;
    for i in (0..j).rev() {
        v = dom
            .neighbors(v)
            .iter()
            .map(|e| e.0)
            .find(|&u| l.reach[i].get(u))
            .expect("layer predecessor exists");
        path.push(v);
    }
    path.reverse();
    path
}

fn witness(dom: &Domain, lx: &Layers, ly: &Layers, k: usize) -> Vec<usize> {
    let h = k / 2;
    let b = k - h - 1;
    let (ra, rb) = (&lx.reach[h], &ly.reach[b]);
    let (v, w) = ra
        .ones()
        .find_map(|v| dom.neighbors(v).iter().map(|e| e.0).find(|&w| rb.get(w)).map(|w| (v, w)))
        .expect("meeting edge exists");
    let mut path = back_track(dom, lx, v, h);
    let mut tail = back_track(dom, ly, w, b);
    tail.reverse();
    path.extend(tail);
    path
}

/// Check a witness path against both inner-uniform conditions.
pub fn check_witness(dom: &Domain, path: &[usize], alpha: f64, big_a: f64) -> bool {
    let k = path.len() - 1;
    let d = dom.inner_dist(path[0], path[k]) as f64;
    if k as f64 > big_a * d + 1e-9 {
        return false;
    }
    let steps_ok = path
        .windows(2)
        .all(|w| dom.neighbors(w[0]).iter().any(|e| e.0 == w[1]));
    steps_ok && path.iter().enumerate().all(|(j, &v)| ok(dom, v, alpha, j.min(k - j)))
}

fn select_pairs(dom: &Domain, n_pairs: usize, seed: u64) -> Vec<(usize, usize)> {
    let n = dom.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cands: Vec<(u32, usize, usize)> = (0..n_pairs * 4)
        .filter_map(|_| {
            let x = rng.gen_range(0..n);
            let y = rng.gen_range(0..n);
            (x != y).then_some((x.min(y), x.max(y)))
        })
        .map(|(x, y)| (dom.inner_dist(x, y), x, y))
        .collect();
    cands.sort_unstable();
    cands.dedup();
    let per = n_pairs.div_ceil(10);
    let mut out = Vec::new();
    for dec in 0..10 {
        let lo = cands.len() * dec / 10;
        let hi = cands.len() * (dec + 1) / 10;
        let mut bucket: Vec<(usize, usize)> = cands[lo..hi].iter().map(|c| (c.1, c.2)).collect();
        bucket.shuffle(&mut rng);
        out.extend(bucket.into_iter().take(per));
    }
    out
}

/// Certify the inner-uniform conditions with parameters `(alpha, A)`.
///
/// For each pair the admissible walk layers from both endpoints are
/// intersected for every length `k` in `d_U(x,y) ..= floor(A d_U(x,y))`.
pub fn inner_uniform_certify(
    dom: &Domain,
    alpha: f64,
    big_a: f64,
    pairs: PairSelection,
) -> Result<InnerUniformCertificate> {
    if !(alpha > 0.0 && alpha <= 1.0) || big_a < 1.0 {
        return Err(Error::validation(format!("need alpha in (0,1] and A >= 1, got ({alpha}, {big_a})")));
    }
    let n = dom.len();
    let (exhaustive, list): (bool, Vec<(usize, usize)>) = match pairs {
        PairSelection::All => (true, (0..n).flat_map(|x| (x + 1..n).map(move |y| (x, y))).collect()),
        PairSelection::Auto if n <= IU_EXHAUSTIVE_CAP => {
            (true, (0..n).flat_map(|x| (x + 1..n).map(move |y| (x, y))).collect())
        }
        PairSelection::Auto => (false, select_pairs(dom, IU_SAMPLE_PAIRS, crate::defaults::SEED)),
        PairSelection::Sample { n: m, seed } => (false, select_pairs(dom, m, seed)),
    };
    let mut ends: Vec<usize> = list.iter().flat_map(|&(x, y)| [x, y]).collect();
    ends.sort_unstable();
    ends.dedup();
    let max_d = list.iter().map(|&(x, y)| dom.inner_dist(x, y)).max().unwrap_or(0);
    let depth = ((big_a * max_d as f64).floor() as usize) / 2 + 1;
    let mut slot = vec![usize::MAX; n];
    for (k, &e) in ends.iter().enumerate() {
        slot[e] = k;
    }
    let layer_set: Vec<Layers> = ends.par_iter().map(|&x| layers(dom, x, alpha, depth)).collect();
    let results: Vec<Option<usize>> = list
        .par_iter()
        .map(|&(x, y)| certify_pair(&layer_set[slot[x]], &layer_set[slot[y]], dom.inner_dist(x, y), big_a))
        .collect();
    let mut failures = Vec::new();
    let mut witness_paths = Vec::new();
    let mut certified = 0;
    for (&(x, y), r) in list.iter().zip(&results) {
        match r {
            Some(k) => {
                certified += 1;
                if witness_paths.len() < WITNESS_CAP {
                    witness_paths.push(((x, y), witness(dom, &layer_set[slot[x]], &layer_set[slot[y]], *k)));
                }
            }
            None if failures.len() < FAILURE_CAP => failures.push((x, y, dom.inner_dist(x, y))),
            None => {}
        }
    }
    let tested = list.len();
    Ok(InnerUniformCertificate {
        alpha,
        big_a,
        pairs_tested: tested,
        pairs_certified: certified,
        pair_coverage: if tested == 0 { 1.0 } else { certified as f64 / tested as f64 },
        exhaustive,
        failures,
        witness_paths,
    })
}

/// Largest `alpha` (over the grid `1/m`, `m = 1..=max_inv`) certified
/// exhaustively with the given `A`, or `0` if none is.
pub fn best_inner_uniform_alpha(dom: &Domain, big_a: f64, max_inv: usize) -> Result<f64> {
    for m in 1..=max_inv {
        let alpha = 1.0 / m as f64;
        if inner_uniform_certify(dom, alpha, big_a, PairSelection::All)?.certified() {
            return Ok(alpha);
        }
    }
    Ok(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{generate, FamilySpec};

    #[test]
    fn adjacent_pairs_certified() {
        let inst = generate(&FamilySpec::DiamondBall { n: 4 }).unwrap();
        let d = &inst.domain;
        let x = d.local_at(&[4, 0]).unwrap();
        let y = d.local_at(&[3, 0]).unwrap();
        let lx = layers(d, x, 1.0, 2);
        let ly = layers(d, y, 1.0, 2);
        assert_eq!(certify_pair(&lx, &ly, 1, 1.0), Some(1));
    }

    #[test]
    fn diamond_certified_across_sizes() {
        for n in [6usize, 10, 14] {
            let inst = generate(&FamilySpec::DiamondBall { n }).unwrap();
            let c = inner_uniform_certify(&inst.domain, 0.25, 2.0, PairSelection::All).unwrap();
            assert!(c.certified(), "N={n}: {:?}", &c.failures[..c.failures.len().min(3)]);
            for (_, p) in &c.witness_paths {
                assert!(check_witness(&inst.domain, p, 0.25, 2.0));
            }
        }
    }

    #[test]
    fn symmetric_in_order() {
        let inst = generate(&FamilySpec::FigIujJohnNotIu { n: 8 }).unwrap();
        let d = &inst.domain;
        let depth = d.len();
        let all: Vec<Layers> = (0..d.len()).map(|x| layers(d, x, 0.3, depth)).collect();
        for x in 0..d.len() {
            for y in 0..d.len() {
                if x == y {
                    continue;
                }
                let dxy = d.inner_dist(x, y);
                let a = certify_pair(&all[x], &all[y], dxy, 2.0).is_some();
                let b = certify_pair(&all[y], &all[x], dxy, 2.0).is_some();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn iuj_alpha_drops() {
        let a8 = best_inner_uniform_alpha(&generate(&FamilySpec::FigIujJohnNotIu { n: 8 }).unwrap().domain, 2.0, 40).unwrap();
        let a16 = best_inner_uniform_alpha(&generate(&FamilySpec::FigIujJohnNotIu { n: 16 }).unwrap().domain, 2.0, 40).unwrap();
        let d8 = best_inner_uniform_alpha(&generate(&FamilySpec::DiamondBall { n: 8 }).unwrap().domain, 2.0, 40).unwrap();
        let d16 = best_inner_uniform_alpha(&generate(&FamilySpec::DiamondBall { n: 16 }).unwrap().domain, 2.0, 40).unwrap();
        assert!(a16 < a8, "{a8} {a16}");
        assert_eq!(d8, d16);
    }

    #[test]
    fn sampled_mode_is_reproducible() {
        let inst = generate(&FamilySpec::DiamondBall { n: 12 }).unwrap();
        let s = PairSelection::Sample { n: 200, seed: 3 };
        let a = inner_uniform_certify(&inst.domain, 0.25, 2.0, s).unwrap();
        let b = inner_uniform_certify(&inst.domain, 0.25, 2.0, s).unwrap();
        assert_eq!(a.pairs_tested, b.pairs_tested);
        assert_eq!(a.pairs_certified, b.pairs_certified);
        assert!(!a.exhaustive);
    }
}

//! Sparse Markov and sub-Markov kernels on a graph or a domain.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Domain, Vertex, WeightedGraph};
use crate::spectral::SpectralPair;

/// Holding values smaller than this are rounding noise and stored as zero.
const HOLDING_FLOOR: f64 = 1e-13;

/// Row count above which matrix-vector products run on the thread pool.
const PAR_ROWS: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Global,
    Neumann,
    Dirichlet,
    Metropolis,
    Doob,
}

impl KernelKind {
    pub fn is_stochastic(self) -> bool {
        !matches!(self, KernelKind::Dirichlet)
    }
}

/// Rule combining the weight at the two ends of an edge in a
/// Metropolis-type kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HRule {
    Min,
    Max,
    Geometric,
}

impl HRule {
    pub fn combine(self, a: f64, b: f64) -> f64 {
        match self {
            HRule::Min => a.min(b),
            HRule::Max => a.max(b),
            HRule::Geometric => (a * b).sqrt(),
        }
    }
}

/// Row-compressed nonnegative kernel with its reversing measure.
///
/// Row `i` corresponds to the ambient vertex `labels()[i]`.
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    kind: KernelKind,
    labels: Vec<Vertex>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    measure: Vec<f64>,
}

impl KernelMatrix {
    /// Assemble from per-row entry lists. Entries with value zero are dropped.
    pub fn from_rows(
        kind: KernelKind,
        labels: Vec<Vertex>,
        rows: Vec<Vec<(usize, f64)>>,
        measure: Vec<f64>,
    ) -> Result<Self> {
        let n = rows.len();
        if labels.len() != n || measure.len() != n {
            return Err(Error::validation("kernel dimension mismatch"));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (j, v) in row {
                if j >= n {
                    return Err(Error::validation(format!("column {j} out of range")));
                }
                if v < 0.0 || !v.is_finite() {
                    return Err(Error::validation(format!("kernel entry {v} is not a nonnegative number")));
                }
                if v > 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(KernelMatrix { kind, labels, row_ptr, cols, vals, measure })
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Vertex] {
        &self.labels
    }

    /// Reversing measure, one entry per row.
    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        match c.binary_search(&j) {
            Ok(k) => v[k],
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).1.iter().sum()
    }

    /// `1 - row sum`: the probability of being killed from each state.
    pub fn deficiency(&self) -> Vec<f64> {
        (0..self.len()).map(|i| (1.0 - self.row_sum(i)).max(0.0)).collect()
    }

    /// Triplets `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.len() {
            let (c, v) = self.row(i);
            out.extend(c.iter().zip(v).map(|(&j, &x)| (i, j, x)));
        }
        out
    }

    /// `(K f)(x) = sum_y K(x,y) f(y)`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let row = |i: usize| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(|(&j, &k)| k * f[j]).sum::<f64>()
        };
        if self.len() >= PAR_ROWS {
            (0..self.len()).into_par_iter().map(row).collect()
        } else {
            (0..self.len()).map(row).collect()
        }
    }

    /// `(nu K)(y) = sum_x nu(x) K(x,y)`.
    pub fn apply_left(&self, nu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, &w) in nu.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let (c, v) = self.row(i);
            for (&j, &k) in c.iter().zip(v) {
                out[j] += w * k;
            }
        }
        out
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut m = vec![vec![0.0; n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            for (&j, &k) in c.iter().zip(v) {
                row[j] = k;
            }
        }
        m
    }

    /// Largest violation of detailed balance `m(x)K(x,y) = m(y)K(y,x)`,
    /// relative to `max m(x)K(x,y)`.
    pub fn reversibility_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..self.len() {
            let (c, v) = self.row(i);
            for (&j, &k) in c.iter().zip(v) {
                let a = self.measure[i] * k;
                let b = self.measure[j] * self.get(j, i);
                worst = worst.max((a - b).abs());
                scale = scale.max(a);
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    /// The adjoint `K*(x,y) = m(y) K(y,x) / m(x)` with respect to the stored
    /// measure. Equal to `K` exactly when `K` is reversible.
    pub fn adjoint(&self) -> KernelMatrix {
        let n = self.len();
        let mut rows = vec![Vec::new(); n];
        for i in 0..n {
            let (c, v) = self.row(i);
            for (&j, &k) in c.iter().zip(v) {
                rows[j].push((i, self.measure[i] * k / self.measure[j]));
            }
        }
        KernelMatrix::from_rows(self.kind, self.labels.clone(), rows, self.measure.clone())
            .expect("adjoint of a valid kernel is valid")
    }

    /// True when the support digraph is strongly connected.
    pub fn is_irreducible(&self) -> bool {
        let n = self.len();
        if n == 0 {
            return false;
        }
        let forward = self.reach(0, false);
        let backward = self.reach(0, true);
        forward.iter().all(|&b| b) && backward.iter().all(|&b| b)
    }

    fn reach(&self, s: usize, reverse: bool) -> Vec<bool> {
        let n = self.len();
        let mut radj = vec![Vec::new(); if reverse { n } else { 0 }];
        if reverse {
            for i in 0..n {
                for &j in self.row(i).0 {
                    radj[j].push(i);
                }
            }
        }
        let mut seen = vec![false; n];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            let nbrs: &[usize] = if reverse { &radj[v] } else { self.row(v).0 };
            for &w in nbrs {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// Period of an irreducible kernel: the gcd of the lengths of closed
    /// walks in the support, computed from BFS levels.
    pub fn period(&self) -> usize {
        let n = self.len();
        let mut level = vec![usize::MAX; n];
        level[0] = 0;
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            for &w in self.row(v).0 {
                if level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        let mut g = 0usize;
        for v in 0..n {
            if level[v] == usize::MAX {
                continue;
            }
            for &w in self.row(v).0 {
                if level[w] == usize::MAX {
                    continue;
                }
                let diff = (level[v] as i64 + 1 - level[w] as i64).unsigned_abs() as usize;
                g = gcd(g, diff);
            }
        }
        g.max(1)
    }

    /// `h I + (1 - h) K`, which keeps the reversing measure.
    pub fn lazy(&self, h: f64) -> Result<KernelMatrix> {
        if !(0.0..1.0).contains(&h) {
            return Err(Error::validation(format!("holding {h} must lie in [0,1)")));
        }
        let rows = (0..self.len())
            .map(|i| {
                let (c, v) = self.row(i);
                let mut row: Vec<(usize, f64)> =
                    c.iter().zip(v).map(|(&j, &k)| (j, (1.0 - h) * k)).collect();
                match row.iter_mut().find(|e| e.0 == i) {
                    Some(e) => e.1 += h,
                    None => row.push((i, h)),
                }
                row
            })
            .collect();
        KernelMatrix::from_rows(self.kind, self.labels.clone(), rows, self.measure.clone())
    }

    /// Rows of `K^t` for the given start rows, one vector per start.
    pub fn power_rows(&self, starts: &[usize], t: usize) -> Vec<Vec<f64>> {
        starts
            .par_iter()
            .map(|&x| {
                let mut v = vec![0.0; self.len()];
                v[x] = 1.0;
                for _ in 0..t {
                    v = self.apply_left(&v);
                }
                v
            })
            .collect()
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn holding(x: f64) -> f64 {
    if x.abs() < HOLDING_FLOOR {
        0.0
    } else {
        x
    }
}

fn check_subordinated(g: &WeightedGraph) -> Result<()> {
    let d = g.diagnostics();
    if d.subordinated {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "mu is not subordinated to pi: vertex {} has sum mu / pi = {}",
            d.worst_vertex, d.worst_ratio
        )))
    }
}

/// `K(x,y) = mu_xy / pi(x)` with holding `1 - sum_y mu_xy / pi(x)`.
pub fn global_kernel(g: &WeightedGraph) -> Result<KernelMatrix> {
    check_subordinated(g)?;
    let rows = (0..g.len())
        .map(|x| {
            let p = g.pi(x);
            let mut row: Vec<(usize, f64)> = g.neighbors(x).iter().map(|&(y, m)| (y, m / p)).collect();
            let s: f64 = row.iter().map(|e| e.1).sum();
            row.push((x, holding(1.0 - s)));
            row
        })
        .collect();
    KernelMatrix::from_rows(KernelKind::Global, (0..g.len()).collect(), rows, g.pi_all().to_vec())
}

/// The reflected chain on `U`: jumps leaving `U` are converted into holding.
pub fn neumann_kernel(dom: &Domain) -> Result<KernelMatrix> {
    check_subordinated(dom.graph())?;
    let rows = (0..dom.len())
        .map(|i| {
            let p = dom.pi(i);
            let mut row: Vec<(usize, f64)> = dom.neighbors(i).iter().map(|&(j, m)| (j, m / p)).collect();
            let s: f64 = row.iter().map(|e| e.1).sum();
            row.push((i, holding(1.0 - s)));
            row
        })
        .collect();
    KernelMatrix::from_rows(KernelKind::Neumann, dom.members().to_vec(), rows, dom.pi_u())
}

/// The killed chain `1_U K 1_U`, reversible with respect to `pi_U`.
pub fn dirichlet_kernel(dom: &Domain) -> Result<KernelMatrix> {
    if !dom.has_boundary() {
        return Err(Error::validation(
            "domain has no exterior boundary; the killed chain is undefined",
        ));
    }
    let g = dom.graph();
    check_subordinated(g)?;
    let rows = (0..dom.len())
        .map(|i| {
            let x = dom.member(i);
            let p = g.pi(x);
            let total: f64 = g.neighbors(x).iter().map(|e| e.1).sum();
            let mut row: Vec<(usize, f64)> = dom.neighbors(i).iter().map(|&(j, m)| (j, m / p)).collect();
            row.push((i, holding(1.0 - total / p)));
            row
        })
        .collect();
    let k = KernelMatrix::from_rows(KernelKind::Dirichlet, dom.members().to_vec(), rows, dom.pi_u())?;
    if !k.is_irreducible() {
        return Err(Error::validation("restricted kernel is reducible"));
    }
    Ok(k)
}

/// Metropolis-type chain on `U` with target weight `psi pi` and edge weights
/// `mu_xy h(psi(x), psi(y))`.
pub fn metropolis_kernel(dom: &Domain, psi: &[f64], rule: HRule) -> Result<KernelMatrix> {
    if psi.len() != dom.len() {
        return Err(Error::validation("psi must have one value per domain vertex"));
    }
    if let Some(i) = psi.iter().position(|&p| !(p.is_finite() && p > 0.0)) {
        return Err(Error::validation(format!("psi({}) is not positive", dom.member(i))));
    }
    let target: Vec<f64> = (0..dom.len()).map(|i| psi[i] * dom.pi(i)).collect();
    let mut rows = Vec::with_capacity(dom.len());
    for i in 0..dom.len() {
        let mut row: Vec<(usize, f64)> = dom
            .neighbors(i)
            .iter()
            .map(|&(j, m)| (j, m * rule.combine(psi[i], psi[j]) / target[i]))
            .collect();
        let s: f64 = row.iter().map(|e| e.1).sum();
        if s > 1.0 + 1e-12 {
            return Err(Error::validation(format!(
                "Metropolis weights not subordinated at vertex {} (sum = {s})",
                dom.member(i)
            )));
        }
        row.push((i, holding(1.0 - s)));
        rows.push(row);
    }
    let total: f64 = target.iter().sum();
    let measure = target.iter().map(|t| t / total).collect();
    KernelMatrix::from_rows(KernelKind::Metropolis, dom.members().to_vec(), rows, measure)
}

/// `K_phi(x,y) = K_U(x,y) phi(y) / (beta0 phi(x))`, reversible with respect
/// to `pi_phi0`.
pub fn doob_transform(k: &KernelMatrix, sp: &SpectralPair) -> Result<KernelMatrix> {
    if sp.phi0.len() != k.len() {
        return Err(Error::validation("spectral pair does not match the kernel"));
    }
    let phi = &sp.phi0;
    let rows = (0..k.len())
        .map(|i| {
            let (c, v) = k.row(i);
            c.iter()
                .zip(v)
                .map(|(&j, &x)| (j, x * phi[j] / (sp.beta0 * phi[i])))
                .collect()
        })
        .collect();
    KernelMatrix::from_rows(KernelKind::Doob, k.labels().to_vec(), rows, sp.pi_phi0.clone())
}

/// The Doob kernel rebuilt from the transformed weights
/// `mu_bar = phi(x) phi(y) mu_xy / beta0` and `pi_bar = phi^2 pi` on `U`.
pub fn doob_from_weights(dom: &Domain, sp: &SpectralPair) -> Result<KernelMatrix> {
    if sp.phi0.len() != dom.len() {
        return Err(Error::validation("spectral pair does not match the domain"));
    }
    let phi = &sp.phi0;
    let pi_bar: Vec<f64> = (0..dom.len()).map(|i| phi[i] * phi[i] * dom.pi(i)).collect();
    let rows = (0..dom.len())
        .map(|i| {
            let mut row: Vec<(usize, f64)> = dom
                .neighbors(i)
                .iter()
                .map(|&(j, m)| (j, phi[i] * phi[j] * m / sp.beta0 / pi_bar[i]))
                .collect();
            let s: f64 = row.iter().map(|e| e.1).sum();
            row.push((i, holding(1.0 - s)));
            row
        })
        .collect();
    let total: f64 = pi_bar.iter().sum();
    let measure = pi_bar.iter().map(|p| p / total).collect();
    KernelMatrix::from_rows(KernelKind::Doob, dom.members().to_vec(), rows, measure)
}

/// Largest entrywise difference between two kernels of the same size.
pub fn max_abs_diff(a: &KernelMatrix, b: &KernelMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.len() {
        for (&j, &v) in a.row(i).0.iter().zip(a.row(i).1) {
            worst = worst.max((v - b.get(i, j)).abs());
        }
        for (&j, &v) in b.row(i).0.iter().zip(b.row(i).1) {
            worst = worst.max((v - a.get(i, j)).abs());
        }
    }
    worst
}

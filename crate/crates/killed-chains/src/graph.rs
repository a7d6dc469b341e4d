//! Ambient weighted graphs and the finite domains carved out of them.
//!
//! Vertices are dense `usize` ids. Lattice generators keep an auxiliary
//! coordinate map so that families defined by coordinate rules can look
//! vertices up by position. All metrics are hop metrics.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vertex = usize;

/// Distance value used for "no boundary" and "unreachable".
pub const INF_DIST: u32 = u32::MAX;

/// The ambient structure: vertex weights `pi` and symmetric edge weights `mu`.
#[derive(Clone, Debug)]
pub struct WeightedGraph {
    pi: Vec<f64>,
    adj: Vec<Vec<(Vertex, f64)>>,
    n_edges: usize,
    coords: Option<Vec<Vec<i64>>>,
    coord_index: Option<HashMap<Vec<i64>, Vertex>>,
}

/// Summary of how `mu` relates to `pi`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct WeightDiagnostics {
    pub subordinated: bool,
    /// Vertex maximizing `sum_y mu_xy / pi(x)`.
    pub worst_vertex: Vertex,
    pub worst_ratio: f64,
    /// `min_x (1 - sum_y mu_xy / pi(x))`; negative when not subordinated.
    pub laziness_margin: f64,
    /// `max over edges of pi(x) / mu_xy`.
    pub ellipticity_constant: f64,
}

impl WeightedGraph {
    /// Validated constructor from an explicit edge list.
    ///
    /// An unordered pair may be listed in both orientations only if the two
    /// weights agree.
    pub fn new(pi: Vec<f64>, edges: &[(Vertex, Vertex, f64)]) -> Result<Self> {
        let n = pi.len();
        if n == 0 {
            return Err(Error::validation("graph has no vertices"));
        }
        if let Some((i, p)) = pi.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::validation(format!("pi({i}) = {p} is not positive")));
        }
        let mut pairs: HashMap<(Vertex, Vertex), f64> = HashMap::new();
        for &(x, y, m) in edges {
            if x >= n {
                return Err(Error::UnknownVertex(x));
            }
            if y >= n {
                return Err(Error::UnknownVertex(y));
            }
            if x == y {
                return Err(Error::validation(format!("self-loop at vertex {x}")));
            }
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::validation(format!(
                    "mu on edge {{{x},{y}}} is {m}; weights must be positive exactly on edges"
                )));
            }
            let key = (x.min(y), x.max(y));
            if let Some(&prev) = pairs.get(&key) {
                if prev != m {
                    return Err(Error::validation(format!(
                        "asymmetric mu on {{{x},{y}}}: {prev} vs {m}"
                    )));
                }
            } else {
                pairs.insert(key, m);
            }
        }
        if pairs.is_empty() {
            return Err(Error::validation(
                "graph must be connected with at least one edge",
            ));
        }
        let mut adj = vec![Vec::new(); n];
        for (&(x, y), &m) in &pairs {
            adj[x].push((y, m));
            adj[y].push((x, m));
        }
        for row in &mut adj {
            row.sort_by_key(|e| e.0);
        }
        let g = WeightedGraph {
            pi,
            adj,
            n_edges: pairs.len(),
            coords: None,
            coord_index: None,
        };
        let dist = g.bfs(&[0], None);
        if dist.contains(&INF_DIST) {
            return Err(Error::validation("graph is disconnected"));
        }
        Ok(g)
    }

    /// Nearest-neighbour subgraph of `Z^d` induced on `points`, with constant
    /// edge weight `mu` and constant vertex weight `pi`.
    pub fn lattice(points: Vec<Vec<i64>>, mu: f64, pi: f64) -> Result<Self> {
        let mut index = HashMap::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if index.insert(p.clone(), i).is_some() {
                return Err(Error::validation(format!("duplicate lattice point {p:?}")));
            }
        }
        let mut edges = Vec::new();
        for (i, p) in points.iter().enumerate() {
            for k in 0..p.len() {
                let mut q = p.clone();
                q[k] += 1;
                if let Some(&j) = index.get(&q) {
                    edges.push((i, j, mu));
                }
            }
        }
        let mut g = WeightedGraph::new(vec![pi; points.len()], &edges)?;
        g.coords = Some(points);
        g.coord_index = Some(index);
        Ok(g)
    }

    /// Attach a coordinate label to every vertex. Labels need not be
    /// lattice-adjacent along edges.
    pub fn with_coords(mut self, coords: Vec<Vec<i64>>) -> Result<Self> {
        if coords.len() != self.len() {
            return Err(Error::validation("one coordinate per vertex required"));
        }
        let mut index = HashMap::with_capacity(coords.len());
        for (i, p) in coords.iter().enumerate() {
            if index.insert(p.clone(), i).is_some() {
                return Err(Error::validation(format!("duplicate coordinate {p:?}")));
            }
        }
        self.coords = Some(coords);
        self.coord_index = Some(index);
        Ok(self)
    }

    /// The box `[0,a_1] x ... x [0,a_d]` in `Z^d`.
    pub fn box_grid(sides: &[i64], mu: f64, pi: f64) -> Result<Self> {
        Self::lattice(box_points(sides), mu, pi)
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.n_edges
    }

    pub fn pi(&self, x: Vertex) -> f64 {
        self.pi[x]
    }

    pub fn pi_all(&self) -> &[f64] {
        &self.pi
    }

    pub fn neighbors(&self, x: Vertex) -> &[(Vertex, f64)] {
        &self.adj[x]
    }

    /// Edge weight, zero when `{x,y}` is not an edge.
    pub fn mu(&self, x: Vertex, y: Vertex) -> f64 {
        match self.adj[x].binary_search_by_key(&y, |e| e.0) {
            Ok(k) => self.adj[x][k].1,
            Err(_) => 0.0,
        }
    }

    /// All edges as `(x, y, mu)` with `x < y`.
    pub fn edges(&self) -> Vec<(Vertex, Vertex, f64)> {
        let mut out = Vec::with_capacity(self.n_edges);
        for (x, row) in self.adj.iter().enumerate() {
            for &(y, m) in row {
                if x < y {
                    out.push((x, y, m));
                }
            }
        }
        out
    }

    pub fn coord(&self, x: Vertex) -> Option<&[i64]> {
        self.coords.as_ref().map(|c| c[x].as_slice())
    }

    pub fn has_coords(&self) -> bool {
        self.coords.is_some()
    }

    pub fn vertex_at(&self, c: &[i64]) -> Option<Vertex> {
        self.coord_index.as_ref()?.get(c).copied()
    }

    pub fn check_vertex(&self, x: Vertex) -> Result<()> {
        if x < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownVertex(x))
        }
    }

    /// Multi-source BFS. When `allowed` is given, the search never enters a
    /// vertex whose flag is false (sources are always admitted).
    pub fn bfs(&self, sources: &[Vertex], allowed: Option<&[bool]>) -> Vec<u32> {
        let mut dist = vec![INF_DIST; self.len()];
        let mut queue = VecDeque::new();
        for &s in sources {
            if dist[s] != 0 {
                dist[s] = 0;
                queue.push_back(s);
            }
        }
        while let Some(v) = queue.pop_front() {
            let dv = dist[v];
            for &(w, _) in &self.adj[v] {
                if dist[w] == INF_DIST && allowed.is_none_or(|a| a[w]) {
                    dist[w] = dv + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn distance(&self, x: Vertex, y: Vertex) -> Result<u32> {
        self.check_vertex(x)?;
        self.check_vertex(y)?;
        Ok(self.bfs(&[x], None)[y])
    }

    /// Closed ball `B(x, r)` in the ambient metric, sorted by id.
    pub fn ball(&self, x: Vertex, r: f64) -> Result<Vec<Vertex>> {
        self.check_vertex(x)?;
        let rr = radius_floor(r);
        let d = truncated_bfs(x, rr, |v| self.adj[v].iter().map(|e| e.0));
        Ok(d)
    }

    pub fn diagnostics(&self) -> WeightDiagnostics {
        let mut worst_vertex = 0;
        let mut worst_ratio = f64::NEG_INFINITY;
        let mut ell: f64 = 0.0;
        for x in 0..self.len() {
            let s: f64 = self.adj[x].iter().map(|e| e.1).sum();
            let ratio = s / self.pi[x];
            if ratio > worst_ratio {
                worst_ratio = ratio;
                worst_vertex = x;
            }
            for &(_, m) in &self.adj[x] {
                ell = ell.max(self.pi[x] / m);
            }
        }
        WeightDiagnostics {
            subordinated: worst_ratio <= 1.0 + 1e-14,
            worst_vertex,
            worst_ratio,
            laziness_margin: 1.0 - worst_ratio,
            ellipticity_constant: ell,
        }
    }
}

/// All points of the box `[0,a_1] x ... x [0,a_d]` in lexicographic order.
pub fn box_points(sides: &[i64]) -> Vec<Vec<i64>> {
    let ranges: Vec<(i64, i64)> = sides.iter().map(|&a| (0, a)).collect();
    range_points(&ranges)
}

/// All integer points of a product of closed intervals, lexicographic order.
pub fn range_points(ranges: &[(i64, i64)]) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for &(lo, hi) in ranges {
        let mut next = Vec::with_capacity(out.len() * (hi - lo + 1).max(0) as usize);
        for p in &out {
            for v in lo..=hi {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

pub(crate) fn radius_floor(r: f64) -> u32 {
    if !(r >= 1.0) {
        0
    } else if r >= u32::MAX as f64 {
        u32::MAX - 1
    } else {
        r.floor() as u32
    }
}

fn truncated_bfs<I, F>(x: usize, r: u32, nbrs: F) -> Vec<usize>
where
    F: Fn(usize) -> I,
    I: Iterator<Item = usize>,
{
    let mut seen: HashMap<usize, u32> = HashMap::new();
    seen.insert(x, 0);
    let mut queue = VecDeque::from([x]);
    let mut out = vec![x];
    while let Some(v) = queue.pop_front() {
        let dv = seen[&v];
        if dv == r {
            continue;
        }
        for w in nbrs(v) {
            if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(w) {
                e.insert(dv + 1);
                out.push(w);
                queue.push_back(w);
            }
        }
    }
    out.sort_unstable();
    out
}

/// A finite connected subset `U` of the ambient graph.
///
/// Everything indexed by "local" ids `0..len()` refers to `members()[i]`.
pub struct Domain {
    graph: Arc<WeightedGraph>,
    members: Vec<Vertex>,
    local: Vec<Option<usize>>,
    boundary: Vec<Vertex>,
    delta: Vec<u32>,
    adj: Vec<Vec<(usize, f64)>>,
    center: usize,
    internal_radius: u32,
    inner_cache: Mutex<HashMap<usize, Arc<Vec<u32>>>>,
}

impl Clone for Domain {
    fn clone(&self) -> Self {
        Domain {
            graph: self.graph.clone(),
            members: self.members.clone(),
            local: self.local.clone(),
            boundary: self.boundary.clone(),
            delta: self.delta.clone(),
            adj: self.adj.clone(),
            center: self.center,
            internal_radius: self.internal_radius,
            inner_cache: Mutex::new(HashMap::new()),
        }
    }
}

impl std::fmt::Debug for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Domain")
            .field("size", &self.members.len())
            .field("boundary", &self.boundary.len())
            .field("center", &self.members[self.center])
            .field("internal_radius", &self.internal_radius)
            .finish()
    }
}

impl Domain {
    /// Carve `U = members` out of `graph`. Without an explicit center the
    /// vertex of largest `delta` is chosen, ties going to the lowest id.
    pub fn new(graph: Arc<WeightedGraph>, members: &[Vertex], center: Option<Vertex>) -> Result<Self> {
        let mut members = members.to_vec();
        members.sort_unstable();
        members.dedup();
        if members.is_empty() {
            return Err(Error::validation("domain has no members"));
        }
        for &v in &members {
            graph.check_vertex(v)?;
        }
        let mut local = vec![None; graph.len()];
        for (i, &v) in members.iter().enumerate() {
            local[v] = Some(i);
        }
        let inside: Vec<bool> = local.iter().map(|l| l.is_some()).collect();
        let reach = graph.bfs(&members[..1], Some(&inside));
        if members.iter().any(|&v| reach[v] == INF_DIST) {
            return Err(Error::validation("domain members are not connected"));
        }
        let outside: Vec<Vertex> = (0..graph.len()).filter(|&v| !inside[v]).collect();
        let delta_global = if outside.is_empty() {
            vec![INF_DIST; graph.len()]
        } else {
            graph.bfs(&outside, None)
        };
        let delta: Vec<u32> = members.iter().map(|&v| delta_global[v]).collect();
        let boundary: Vec<Vertex> = outside
            .iter()
            .copied()
            .filter(|&v| graph.neighbors(v).iter().any(|e| inside[e.0]))
            .collect();
        let adj: Vec<Vec<(usize, f64)>> = members
            .iter()
            .map(|&v| {
                graph
                    .neighbors(v)
                    .iter()
                    .filter_map(|&(w, m)| local[w].map(|j| (j, m)))
                    .collect()
            })
            .collect();
        let center_local = match center {
            Some(o) => {
                graph.check_vertex(o)?;
                local[o].ok_or_else(|| Error::validation(format!("center {o} is not in the domain")))?
            }
            None => {
                let mut best = 0;
                for i in 1..members.len() {
                    if delta[i] > delta[best] {
                        best = i;
                    }
                }
                best
            }
        };
        let mut dom = Domain {
            graph,
            members,
            local,
            boundary,
            delta,
            adj,
            center: center_local,
            internal_radius: 0,
            inner_cache: Mutex::new(HashMap::new()),
        };
        dom.internal_radius = *dom.inner_distances(center_local).iter().max().unwrap();
        Ok(dom)
    }

    /// Same members, different center.
    pub fn with_center(&self, center: Vertex) -> Result<Self> {
        Domain::new(self.graph.clone(), &self.members, Some(center))
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn graph_arc(&self) -> Arc<WeightedGraph> {
        self.graph.clone()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Vertex] {
        &self.members
    }

    pub fn member(&self, i: usize) -> Vertex {
        self.members[i]
    }

    pub fn local_index(&self, v: Vertex) -> Option<usize> {
        self.local.get(v).copied().flatten()
    }

    /// Local index of a vertex, erroring when it lies outside `U`.
    pub fn require_local(&self, v: Vertex) -> Result<usize> {
        self.graph.check_vertex(v)?;
        self.local_index(v)
            .ok_or_else(|| Error::validation(format!("vertex {v} is not in the domain")))
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.local_index(v).is_some()
    }

    pub fn boundary(&self) -> &[Vertex] {
        &self.boundary
    }

    pub fn has_boundary(&self) -> bool {
        !self.boundary.is_empty()
    }

    /// `delta(i) = d(x_i, X \ U)`, [`INF_DIST`] when `U` is the whole graph.
    pub fn delta(&self, i: usize) -> u32 {
        self.delta[i]
    }

    pub fn deltas(&self) -> &[u32] {
        &self.delta
    }

    pub fn delta_f64(&self, i: usize) -> f64 {
        if self.delta[i] == INF_DIST {
            f64::INFINITY
        } else {
            self.delta[i] as f64
        }
    }

    /// Neighbours inside `U` as `(local id, mu)`.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adj[i]
    }

    pub fn pi(&self, i: usize) -> f64 {
        self.graph.pi(self.members[i])
    }

    pub fn coord(&self, i: usize) -> Option<&[i64]> {
        self.graph.coord(self.members[i])
    }

    /// Local index of the lattice point `c`, if it belongs to `U`.
    pub fn local_at(&self, c: &[i64]) -> Option<usize> {
        self.graph.vertex_at(c).and_then(|v| self.local_index(v))
    }

    /// Local index of the center `o`.
    pub fn center(&self) -> usize {
        self.center
    }

    /// `max_x d_U(o, x)`.
    pub fn internal_radius(&self) -> u32 {
        self.internal_radius
    }

    /// Inner distances `d_U(i, .)` from one local source, memoized.
    pub fn inner_distances(&self, i: usize) -> Arc<Vec<u32>> {
        if let Some(d) = self.inner_cache.lock().unwrap().get(&i) {
            return d.clone();
        }
        let d = Arc::new(self.inner_bfs(&[i]));
        self.inner_cache.lock().unwrap().insert(i, d.clone());
        d
    }

    /// Inner multi-source BFS without memoization.
    pub fn inner_bfs(&self, sources: &[usize]) -> Vec<u32> {
        let mut dist = vec![INF_DIST; self.len()];
        let mut queue = VecDeque::new();
        for &s in sources {
            dist[s] = 0;
            queue.push_back(s);
        }
        while let Some(v) = queue.pop_front() {
            let dv = dist[v];
            for &(w, _) in &self.adj[v] {
                if dist[w] == INF_DIST {
                    dist[w] = dv + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Fill the inner-distance memo for every source, in parallel. Does
    /// nothing when `|U|` exceeds `cap`.
    pub fn prefill_inner(&self, cap: usize) {
        if self.len() > cap {
            return;
        }
        let missing: Vec<usize> = {
            let c = self.inner_cache.lock().unwrap();
            (0..self.len()).filter(|i| !c.contains_key(i)).collect()
        };
        let rows: Vec<(usize, Arc<Vec<u32>>)> = missing
            .into_par_iter()
            .map(|i| (i, Arc::new(self.inner_bfs(&[i]))))
            .collect();
        let mut c = self.inner_cache.lock().unwrap();
        for (i, d) in rows {
            c.insert(i, d);
        }
    }

    pub fn inner_dist(&self, i: usize, j: usize) -> u32 {
        self.inner_distances(i)[j]
    }

    /// Inner ball `B_U(i, r)` as sorted local ids.
    pub fn inner_ball(&self, i: usize, r: f64) -> Vec<usize> {
        let rr = radius_floor(r);
        truncated_bfs(i, rr, |v| self.adj[v].iter().map(|e| e.0))
    }

    /// Ambient ball `B(x_i, r)` intersected with `U`, as sorted local ids.
    pub fn ambient_ball(&self, i: usize, r: f64) -> Vec<usize> {
        let rr = radius_floor(r);
        let g = &self.graph;
        let ball = truncated_bfs(self.members[i], rr, |v| g.neighbors(v).iter().map(|e| e.0));
        let mut out: Vec<usize> = ball.into_iter().filter_map(|v| self.local_index(v)).collect();
        out.sort_unstable();
        out
    }

    /// Total `pi` mass of `U`.
    pub fn mass(&self) -> f64 {
        (0..self.len()).map(|i| self.pi(i)).sum()
    }

    /// `pi` restricted to `U` and normalized to a probability vector.
    pub fn pi_u(&self) -> Vec<f64> {
        let m = self.mass();
        (0..self.len()).map(|i| self.pi(i) / m).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn five_path() -> WeightedGraph {
        let edges: Vec<_> = (0..4).map(|i| (i, i + 1, 0.5)).collect();
        WeightedGraph::new(vec![1.0; 5], &edges).unwrap()
    }

    #[test]
    fn five_path_is_valid() {
        let g = five_path();
        assert_eq!(g.len(), 5);
        assert_eq!(g.edge_count(), 4);
        assert_eq!(g.distance(0, 4).unwrap(), 4);
        assert_eq!(g.distance(2, 2).unwrap(), 0);
    }

    #[test]
    fn single_vertex_rejected() {
        assert!(matches!(WeightedGraph::new(vec![1.0], &[]), Err(Error::Validation(_))));
    }

    #[test]
    fn self_loop_rejected() {
        let r = WeightedGraph::new(vec![1.0, 1.0], &[(0, 1, 0.5), (1, 1, 0.1)]);
        assert!(matches!(r, Err(Error::Validation(m)) if m.contains("self-loop")));
    }

    #[test]
    fn asymmetric_and_zero_weights_rejected() {
        assert!(WeightedGraph::new(vec![1.0, 1.0], &[(0, 1, 0.5), (1, 0, 0.25)]).is_err());
        assert!(WeightedGraph::new(vec![1.0, 1.0], &[(0, 1, 0.0)]).is_err());
        assert!(WeightedGraph::new(vec![1.0, 1.0], &[(0, 1, 0.5), (1, 0, 0.5)]).is_ok());
    }

    #[test]
    fn disconnected_rejected() {
        let r = WeightedGraph::new(vec![1.0; 4], &[(0, 1, 0.5), (2, 3, 0.5)]);
        assert!(matches!(r, Err(Error::Validation(m)) if m.contains("disconnected")));
    }

    #[test]
    fn box_grid_counts() {
        let g = WeightedGraph::box_grid(&[10, 10], 0.125, 1.0).unwrap();
        assert_eq!(g.len(), 121);
        assert_eq!(g.edge_count(), 2 * 11 * 10);
        let a = g.vertex_at(&[0, 0]).unwrap();
        let b = g.vertex_at(&[3, 4]).unwrap();
        assert_eq!(g.distance(a, b).unwrap(), 7);
    }

    #[test]
    fn lattice_ball_counts() {
        let g = WeightedGraph::lattice(range_points(&[(-12, 12), (-12, 12)]), 0.125, 1.0).unwrap();
        let o = g.vertex_at(&[0, 0]).unwrap();
        for r in 0..=6 {
            assert_eq!(g.ball(o, r as f64).unwrap().len(), 2 * r * r + 2 * r + 1);
        }
        assert_eq!(g.ball(o, 0.7).unwrap(), vec![o]);
    }

    #[test]
    fn five_path_domain() {
        let g = Arc::new(five_path());
        let d = Domain::new(g, &[1, 2, 3], None).unwrap();
        assert_eq!(d.boundary(), &[0, 4]);
        assert_eq!(d.deltas(), &[1, 2, 1]);
        assert_eq!(d.member(d.center()), 2);
        assert_eq!(d.internal_radius(), 1);
    }

    #[test]
    fn full_domain_has_no_boundary() {
        let g = Arc::new(five_path());
        let d = Domain::new(g, &[0, 1, 2, 3, 4], None).unwrap();
        assert!(d.boundary().is_empty());
        assert!(d.deltas().iter().all(|&x| x == INF_DIST));
    }

    #[test]
    fn disconnected_members_rejected() {
        let g = Arc::new(five_path());
        assert!(Domain::new(g, &[0, 2], None).is_err());
    }

    #[test]
    fn carve_is_idempotent() {
        let g = Arc::new(WeightedGraph::box_grid(&[6, 6], 0.125, 1.0).unwrap());
        let members: Vec<_> = (0..g.len())
            .filter(|&v| {
                let c = g.coord(v).unwrap();
                c[0] > 0 && c[0] < 6 && c[1] > 0 && c[1] < 6 && !(c[0] == 3 && c[1] < 4)
            })
            .collect();
        let a = Domain::new(g.clone(), &members, None).unwrap();
        let b = Domain::new(g, a.members(), None).unwrap();
        assert_eq!(a.boundary(), b.boundary());
        assert_eq!(a.deltas(), b.deltas());
        assert_eq!(a.center(), b.center());
    }

    #[test]
    fn inner_ball_avoids_walls() {
        // A U-shaped corridor: the two arms are adjacent in Z^2 but far in U.
        let g = Arc::new(WeightedGraph::box_grid(&[4, 6], 0.125, 1.0).unwrap());
        let members: Vec<_> = (0..g.len())
            .filter(|&v| {
                let c = g.coord(v).unwrap();
                (c[0] == 1 || c[0] == 3 || c[1] == 5) && c[0] >= 1 && c[0] <= 3 && c[1] >= 1 && c[1] <= 5
            })
            .collect();
        let d = Domain::new(g.clone(), &members, None).unwrap();
        let a = d.local_at(&[1, 1]).unwrap();
        let b = d.local_at(&[3, 1]).unwrap();
        assert_eq!(g.distance(d.member(a), d.member(b)).unwrap(), 2);
        assert_eq!(d.inner_dist(a, b), 10);
        assert!(!d.inner_ball(a, 3.0).contains(&b));
        assert!(d.ambient_ball(a, 2.0).contains(&b));
    }

    #[test]
    fn delta_bfs_consistency() {
        let g = Arc::new(WeightedGraph::box_grid(&[8, 8], 0.125, 1.0).unwrap());
        let members: Vec<_> = (0..g.len())
            .filter(|&v| {
                let c = g.coord(v).unwrap();
                c.iter().all(|&x| x > 0 && x < 8)
            })
            .collect();
        let d = Domain::new(g.clone(), &members, None).unwrap();
        for i in 0..d.len() {
            let best = g
                .neighbors(d.member(i))
                .iter()
                .map(|&(w, _)| d.local_index(w).map_or(0, |j| d.delta(j)))
                .min()
                .unwrap();
            assert_eq!(d.delta(i), best + 1);
        }
    }

    #[test]
    fn diagnostics_of_lazy_box() {
        let g = WeightedGraph::box_grid(&[4, 4], 0.125, 1.0).unwrap();
        let diag = g.diagnostics();
        assert!(diag.subordinated);
        assert!((diag.laziness_margin - 0.5).abs() < 1e-15);
        assert_eq!(diag.ellipticity_constant, 8.0);
    }

    proptest! {
        #[test]
        fn triangle_inequality(a in 0usize..81, b in 0usize..81, c in 0usize..81) {
            let g = WeightedGraph::box_grid(&[8, 8], 0.125, 1.0).unwrap();
            let ab = g.distance(a, b).unwrap();
            let bc = g.distance(b, c).unwrap();
            let ac = g.distance(a, c).unwrap();
            prop_assert!(ac <= ab + bc);
        }

        #[test]
        fn ball_monotone(x in 0usize..81, r1 in 0.0f64..10.0, dr in 0.0f64..5.0) {
            let g = WeightedGraph::box_grid(&[8, 8], 0.125, 1.0).unwrap();
            let small = g.ball(x, r1).unwrap();
            let big = g.ball(x, r1 + dr).unwrap();
            prop_assert!(small.iter().all(|v| big.contains(v)));
        }

        #[test]
        fn inner_distance_dominates(i in 0usize..40, j in 0usize..40) {
            let g = Arc::new(WeightedGraph::box_grid(&[8, 8], 0.125, 1.0).unwrap());
            let members: Vec<_> = (0..g.len())
                .filter(|&v| {
                    let c = g.coord(v).unwrap();
                    c.iter().all(|&x| x > 0 && x < 8) && !(c[0] == 4 && c[1] > 1)
                })
                .collect();
            let d = Domain::new(g.clone(), &members, None).unwrap();
            let (i, j) = (i % d.len(), j % d.len());
            prop_assert!(d.inner_dist(i, j) >= g.distance(d.member(i), d.member(j)).unwrap());
        }
    }
}

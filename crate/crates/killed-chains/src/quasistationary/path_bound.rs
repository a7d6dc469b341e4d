use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Domain;

/// Lattice paths from every vertex of `U` toward the coordinate origin,
/// staying close to the straight segment. Each path stops at its first
/// vertex outside `U`. Paths are given as ambient vertex ids.
///
/// At every step the coordinate whose remaining fraction `|y_i| / |x_i|` is
/// largest moves one unit toward zero, lowest index first on ties.
pub fn straight_paths(dom: &Domain) -> Result<Vec<Vec<usize>>> {
    let g = dom.graph();
    (0..dom.len())
        .map(|i| {
            let start = dom
                .coord(i)
                .ok_or_else(|| Error::Dependency("straight paths need coordinates".into()))?
                .to_vec();
            let mut y = start.clone();
            let mut path = vec![dom.member(i)];
            loop {
                let axis = (0..y.len())
                    .filter(|&a| y[a] != 0)
                    .max_by(|&a, &b| {
                        let fa = y[a].abs() as f64 / start[a].abs() as f64;
                        let fb = y[b].abs() as f64 / start[b].abs() as f64;
                        fa.total_cmp(&fb).then(b.cmp(&a))
                    })
                    .ok_or_else(|| Error::Dependency("straight path reached the origin inside U".into()))?;
                y[axis] -= y[axis].signum();
                let v = g
                    .vertex_at(&y)
                    .ok_or_else(|| Error::Dependency(format!("lattice point {y:?} missing from the graph")))?;
                path.push(v);
                if !dom.contains(v) {
                    break;
                }
            }
            Ok(path)
        })
        .collect()
}

/// Certified lower bound on `1 - beta0` from a path decomposition.
#[derive(Clone, Debug, Serialize)]
pub struct PathBound {
    /// `max_e w(e) / mu(e) * sum_{x : gamma_x ∋ e} pi(x) |gamma_x|_w`.
    pub c_w: f64,
    /// `1 / c_w`.
    pub lower_bound: f64,
    /// Ambient endpoints of the edge attaining the maximum.
    pub worst_edge: (usize, usize),
    pub weight_exponent: f64,
}

/// Path bound with edge weight `w(e) = |midpoint(e)|_2^exponent`; the
/// exponent defaults to `d - 1`. For simple random walk (`mu = 1/(2d)`,
/// `pi = 1`) the constant is `2d max_e w(e) sum |gamma_x|_w`.
pub fn eigenvalue_path_bound(dom: &Domain, exponent: Option<f64>) -> Result<PathBound> {
    let paths = straight_paths(dom)?;
    let g = dom.graph();
    let dim = dom.coord(0).map(|c| c.len()).unwrap_or(1);
    let a = exponent.unwrap_or(dim as f64 - 1.0);
    let weight = |u: usize, v: usize| -> f64 {
        let (cu, cv) = (g.coord(u).unwrap(), g.coord(v).unwrap());
        let r2: f64 = cu.iter().zip(cv).map(|(&p, &q)| ((p + q) as f64 / 2.0).powi(2)).sum();
        r2.sqrt().powf(a)
    };
    let mut load: HashMap<(usize, usize), f64> = HashMap::new();
    for (i, path) in paths.iter().enumerate() {
        let len_w: f64 = path.windows(2).map(|e| 1.0 / weight(e[0], e[1])).sum();
        for e in path.windows(2) {
            let key = (e[0].min(e[1]), e[0].max(e[1]));
            *load.entry(key).or_insert(0.0) += dom.pi(i) * len_w;
        }
    }
    let (c_w, worst_edge) = load
        .iter()
        .map(|(&(u, v), &l)| (weight(u, v) * l / g.mu(u, v), (u, v)))
        .fold((0.0, (0, 0)), |a, b| if b.0 > a.0 { b } else { a });
    Ok(PathBound { c_w, lower_bound: 1.0 / c_w, worst_edge, weight_exponent: a })
}

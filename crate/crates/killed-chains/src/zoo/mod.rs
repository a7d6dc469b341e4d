//! Generators for the example families, with closed-form oracles where
//! they exist.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{range_points, Domain, WeightedGraph};

mod profile;

pub use profile::{asymptotic_phi0_profile, ProfileReport, ZoneReport};

/// Which boundary the Metropolis box carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxBoundary {
    /// The natural lattice boundary of `[-N,N]^d`.
    Natural,
    /// Two poles attached to the corners `-(N,..,N)` and `(N,..,N)`.
    CornerPoles,
    /// One pole attached to the origin.
    CenterPole,
}

/// A family member, fully parameterized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilySpec {
    FivePath,
    Cone45 { n: usize },
    DiamondBall { n: usize },
    PuncturedBall { n: usize, d: usize },
    AnnulusRound { n: usize, l: f64, d: usize },
    AnnulusDiamond { n: usize, l: usize },
    BoxPoles { n: usize, d: usize, boundary: BoxBoundary },
    FigD3Nonconvex { n: usize },
    FigD4Dumbbell { n: usize },
    FigIujJohnNotIu { n: usize },
}

/// Expected geometric class, used to route checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometricClass {
    InnerUniform,
    John,
    /// Connected, but without uniform John constants across the family.
    Neither,
}

/// A generated graph and domain.
#[derive(Clone, Debug)]
pub struct Instance {
    pub spec: FamilySpec,
    pub graph: Arc<WeightedGraph>,
    pub domain: Domain,
    pub class: GeometricClass,
}

impl FamilySpec {
    /// Parse a CLI family name with a size parameter. Extra parameters take
    /// their documented defaults (`d = 2`, `L = N / 4`).
    pub fn from_name(name: &str, n: usize, d: Option<usize>, l: Option<f64>) -> Result<Self> {
        let d2 = d.unwrap_or(2);
        Ok(match name {
            "five_path" => FamilySpec::FivePath,
            "cone45" => FamilySpec::Cone45 { n },
            "diamond_ball" => FamilySpec::DiamondBall { n },
            "punctured_ball_d" | "punctured_ball" => FamilySpec::PuncturedBall { n, d: d2 },
            "annulus_round" => FamilySpec::AnnulusRound { n, l: l.unwrap_or((n / 4).max(1) as f64), d: d2 },
            "annulus_diamond" => FamilySpec::AnnulusDiamond { n, l: l.map(|x| x as usize).unwrap_or((n / 4).max(1)) },
            "box_poles" => FamilySpec::BoxPoles { n, d: d2, boundary: BoxBoundary::Natural },
            "box_corner_poles" => FamilySpec::BoxPoles { n, d: d2, boundary: BoxBoundary::CornerPoles },
            "box_center_pole" => FamilySpec::BoxPoles { n, d: d2, boundary: BoxBoundary::CenterPole },
            "fig_d3_nonconvex" | "fig_d3" => FamilySpec::FigD3Nonconvex { n },
            "fig_d4_dumbbell" | "fig_d4" => FamilySpec::FigD4Dumbbell { n },
            "fig_iuj_john_not_iu" | "fig_iuj" => FamilySpec::FigIujJohnNotIu { n },
            other => return Err(Error::validation(format!("unknown family `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            FamilySpec::FivePath => "five_path",
            FamilySpec::Cone45 { .. } => "cone45",
            FamilySpec::DiamondBall { .. } => "diamond_ball",
            FamilySpec::PuncturedBall { .. } => "punctured_ball_d",
            FamilySpec::AnnulusRound { .. } => "annulus_round",
            FamilySpec::AnnulusDiamond { .. } => "annulus_diamond",
            FamilySpec::BoxPoles { .. } => "box_poles",
            FamilySpec::FigD3Nonconvex { .. } => "fig_d3_nonconvex",
            FamilySpec::FigD4Dumbbell { .. } => "fig_d4_dumbbell",
            FamilySpec::FigIujJohnNotIu { .. } => "fig_iuj_john_not_iu",
        }
    }

    /// The size parameter `N` (0 for the five-path).
    pub fn size(&self) -> usize {
        match *self {
            FamilySpec::FivePath => 0,
            FamilySpec::Cone45 { n }
            | FamilySpec::DiamondBall { n }
            | FamilySpec::PuncturedBall { n, .. }
            | FamilySpec::AnnulusRound { n, .. }
            | FamilySpec::AnnulusDiamond { n, .. }
            | FamilySpec::BoxPoles { n, .. }
            | FamilySpec::FigD3Nonconvex { n }
            | FamilySpec::FigD4Dumbbell { n }
            | FamilySpec::FigIujJohnNotIu { n } => n,
        }
    }

    pub fn class(&self) -> GeometricClass {
        match *self {
            FamilySpec::BoxPoles { boundary: BoxBoundary::Natural, .. } => GeometricClass::InnerUniform,
            FamilySpec::BoxPoles { .. } | FamilySpec::FigD3Nonconvex { .. } | FamilySpec::FigIujJohnNotIu { .. } => {
                GeometricClass::John
            }
            FamilySpec::FigD4Dumbbell { .. } => GeometricClass::Neither,
            _ => GeometricClass::InnerUniform,
        }
    }
}

fn l1(p: &[i64]) -> i64 {
    p.iter().map(|x| x.abs()).sum()
}

fn l2sq(p: &[i64]) -> i64 {
    p.iter().map(|x| x * x).sum()
}

fn cube(n: i64, d: usize) -> Vec<Vec<i64>> {
    range_points(&vec![(-n, n); d])
}

/// Build a family member.
pub fn generate(spec: &FamilySpec) -> Result<Instance> {
    let (graph, members, center) = build(spec)?;
    let graph = Arc::new(graph);
    let center = match center {
        Some(c) => Some(
            graph
                .vertex_at(&c)
                .ok_or_else(|| Error::validation(format!("center {c:?} missing")))?,
        ),
        None => None,
    };
    let members: Vec<usize> = members
        .iter()
        .map(|c| graph.vertex_at(c).expect("member coordinates come from the graph"))
        .collect();
    let domain = Domain::new(graph.clone(), &members, center)?;
    Ok(Instance { spec: spec.clone(), graph, domain, class: spec.class() })
}

type Built = (WeightedGraph, Vec<Vec<i64>>, Option<Vec<i64>>);

fn build(spec: &FamilySpec) -> Result<Built> {
    let need = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(Error::validation(format!("{}: {what}", spec.name())))
        }
    };
    match *spec {
        FamilySpec::FivePath => {
            let pts: Vec<Vec<i64>> = (0..5).map(|i| vec![i]).collect();
            let g = WeightedGraph::lattice(pts, 0.5, 1.0)?;
            Ok((g, vec![vec![1], vec![2], vec![3]], Some(vec![2])))
        }
        FamilySpec::Cone45 { n } => {
            need(n >= 2, "N must be at least 2")?;
            let n = n as i64;
            let pts: Vec<Vec<i64>> = (0..=n)
                .flat_map(|p| (0..=p).map(move |q| vec![p, q]))
                .collect();
            let members = pts.iter().filter(|c| c[1] > 0 && c[1] < c[0]).cloned().collect();
            let g = WeightedGraph::lattice(pts, 0.25, 1.0)?;
            Ok((g, members, Some(vec![n, n / 2])))
        }
        FamilySpec::DiamondBall { n } => {
            need(n >= 1, "N must be at least 1")?;
            let n = n as i64;
            let pts: Vec<Vec<i64>> = cube(n + 1, 2).into_iter().filter(|c| l1(c) <= n + 1).collect();
            let members = pts.iter().filter(|c| l1(c) <= n).cloned().collect();
            let g = WeightedGraph::lattice(pts, 0.125, 1.0)?;
            Ok((g, members, Some(vec![0, 0])))
        }
        FamilySpec::PuncturedBall { n, d } => {
            need(n >= 2 && d >= 2, "N >= 2 and d >= 2 required")?;
            let n = n as i64;
            let pts: Vec<Vec<i64>> = cube(n, d).into_iter().filter(|c| l1(c) <= n).collect();
            let members = pts.iter().filter(|c| l1(c) > 0).cloned().collect();
            let g = WeightedGraph::lattice(pts, 1.0 / (2 * d) as f64, 1.0)?;
            Ok((g, members, None))
        }
        FamilySpec::AnnulusRound { n, l, d } => {
            need(d >= 2 && l >= 0.0 && (l as i64) < n as i64 / 2 + 1, "need d >= 2 and L < N/2")?;
            let n = n as i64;
            let pts: Vec<Vec<i64>> = cube(n, d).into_iter().filter(|c| l1(c) <= n).collect();
            let members = pts.iter().filter(|c| l2sq(c) as f64 > l * l).cloned().collect();
            let g = WeightedGraph::lattice(pts, 1.0 / (2 * d) as f64, 1.0)?;
            Ok((g, members, None))
        }
        FamilySpec::AnnulusDiamond { n, l } => {
            need(2 * l < n, "need L < N/2")?;
            let (n, l) = (n as i64, l as i64);
            let pts: Vec<Vec<i64>> = cube(n, 2).into_iter().filter(|c| l1(c) <= n).collect();
            let members = pts.iter().filter(|c| l1(c) > l).cloned().collect();
            let g = WeightedGraph::lattice(pts, 0.25, 1.0)?;
            Ok((g, members, None))
        }
        FamilySpec::BoxPoles { n, d, boundary } => {
            need(n >= 1 && d >= 1, "N >= 1 and d >= 1 required")?;
            box_poles(n as i64, d, boundary)
        }
        FamilySpec::FigD3Nonconvex { n } => {
            need(n >= 7, "N must be at least 7")?;
            let n = n as i64;
            let (a, b, c) = (n / 3, 2 * n / 3, 3 * n / 7);
            let hole = |p: &[i64]| {
                let (x, y) = (p[0], p[1]);
                (x == y && x >= 1 && x <= c)
                    || ((x == a || x == b) && y >= n - n / 3 && y < n)
                    || (x == b && y == n / 3)
            };
            lazy_box_with_holes(n, hole, Some(vec![b, n / 2]))
        }
        FamilySpec::FigD4Dumbbell { n } => {
            need(n >= 4, "N must be at least 4")?;
            let n = n as i64;
            let gap = (n as f64).sqrt().floor() as i64;
            let hole = |p: &[i64]| p[0] == p[1] && p[0] >= 1 && p[0] <= n - gap;
            lazy_box_with_holes(n, hole, None)
        }
        FamilySpec::FigIujJohnNotIu { n } => {
            need(n >= 4, "N must be at least 4")?;
            let n = n as i64;
            let m = n / 2;
            let top = 5 * n / 8;
            let hole = |p: &[i64]| p[0] == m && p[1] % 2 == 0 && p[1] >= 2 && p[1] <= top;
            lazy_box_with_holes(n, hole, None)
        }
    }
}

/// Box `[0,N]^2` with lazy weights; `U` is the open box minus `hole`.
fn lazy_box_with_holes<F: Fn(&[i64]) -> bool>(n: i64, hole: F, center: Option<Vec<i64>>) -> Result<Built> {
    let pts = range_points(&[(0, n), (0, n)]);
    let members = pts
        .iter()
        .filter(|c| c.iter().all(|&x| x > 0 && x < n) && !hole(c))
        .cloned()
        .collect();
    let g = WeightedGraph::lattice(pts, 0.125, 1.0)?;
    Ok((g, members, center))
}

fn box_poles(n: i64, d: usize, boundary: BoxBoundary) -> Result<Built> {
    let mu = 1.0 / (2 * d) as f64;
    match boundary {
        BoxBoundary::Natural => {
            let pts = cube(n + 1, d);
            let members = pts.iter().filter(|c| c.iter().all(|x| x.abs() <= n)).cloned().collect();
            Ok((WeightedGraph::lattice(pts, mu, 1.0)?, members, None))
        }
        BoxBoundary::CornerPoles => {
            let mut pts = cube(n, d);
            let members = pts.clone();
            let mut lo = vec![-n; d];
            lo[0] = -n - 1;
            let mut hi = vec![n; d];
            hi[0] = n + 1;
            pts.push(lo);
            pts.push(hi);
            Ok((WeightedGraph::lattice(pts, mu, 1.0)?, members, None))
        }
        BoxBoundary::CenterPole => {
            let mut pts = cube(n, d);
            let members = pts.clone();
            let base = WeightedGraph::lattice(pts.clone(), mu, 1.0)?;
            let origin = base.vertex_at(&vec![0; d]).unwrap();
            let pole = base.len();
            let mut edges = base.edges();
            edges.push((origin, pole, mu));
            let mut pi = vec![1.0; pole + 1];
            // The origin keeps all 2d lattice edges, so its weight grows by mu
            // to keep the ambient kernel sub-Markovian.
            pi[origin] += mu;
            pts.push(vec![n + 2; d]);
            let g = WeightedGraph::new(pi, &edges)?.with_coords(pts)?;
            Ok((g, members, None))
        }
    }
}

/// `beta0` of the cone, `(cos(pi/M) + cos(3 pi/M)) / 2` with `M = 2N+1`.
pub fn cone_beta0(n: usize) -> f64 {
    let m = (2 * n + 1) as f64;
    0.5 * ((PI / m).cos() + (3.0 * PI / m).cos())
}

/// The normalizing constant `sqrt(8N(N-1)) / (2N+1)` of the cone formula.
pub fn cone_kappa(n: usize) -> f64 {
    let nf = n as f64;
    (8.0 * nf * (nf - 1.0)).sqrt() / (2.0 * nf + 1.0)
}

/// Unnormalized cone eigenfunction
/// `4 sin(pi p/M) sin(pi q/M) (sin^2(pi p/M) - sin^2(pi q/M))`.
pub fn cone_shape(n: usize, p: i64, q: i64) -> f64 {
    let m = (2 * n + 1) as f64;
    let (sp, sq) = ((PI * p as f64 / m).sin(), (PI * q as f64 / m).sin());
    4.0 * sp * sq * (sp * sp - sq * sq)
}

/// `beta0` of the diamond, `(1 + cos^2(pi / (2(N+1)))) / 2`.
pub fn diamond_beta0(n: usize) -> f64 {
    let c = (PI / (2.0 * (n as f64 + 1.0))).cos();
    0.5 * (1.0 + c * c)
}

/// Unnormalized diamond eigenfunction `cos(pi(p+q)/2(N+1)) cos(pi(p-q)/2(N+1))`.
pub fn diamond_shape(n: usize, p: i64, q: i64) -> f64 {
    let w = PI / (2.0 * (n as f64 + 1.0));
    (w * (p + q) as f64).cos() * (w * (p - q) as f64).cos()
}

/// Closed-form eigenfunction on the whole domain, normalized so that
/// `pi_U(phi0^2) = 1`, together with the normalizing constant used.
pub fn closed_form_phi0(inst: &Instance) -> Result<(Vec<f64>, f64)> {
    let dom = &inst.domain;
    let shape: Box<dyn Fn(i64, i64) -> f64> = match inst.spec {
        FamilySpec::Cone45 { n } => Box::new(move |p, q| cone_shape(n, p, q)),
        FamilySpec::DiamondBall { n } => Box::new(move |p, q| diamond_shape(n, p, q)),
        _ => return Err(Error::validation(format!("{} has no closed-form eigenfunction", inst.spec.name()))),
    };
    let raw: Vec<f64> = (0..dom.len())
        .map(|i| {
            let c = dom.coord(i).unwrap();
            shape(c[0], c[1])
        })
        .collect();
    let piu = dom.pi_u();
    let norm = raw.iter().zip(&piu).map(|(r, w)| r * r * w).sum::<f64>().sqrt();
    let kappa = 1.0 / norm;
    Ok((raw.iter().map(|r| r * kappa).collect(), kappa))
}

/// Closed-form `beta0` where the family has one.
pub fn closed_form_beta0(spec: &FamilySpec) -> Option<f64> {
    match *spec {
        FamilySpec::FivePath => Some(std::f64::consts::FRAC_1_SQRT_2),
        FamilySpec::Cone45 { n } => Some(cone_beta0(n)),
        FamilySpec::DiamondBall { n } => Some(diamond_beta0(n)),
        _ => None,
    }
}

/// Explicit inward shift `x -> x_{sqrt t}` for the cone and the diamond.
///
/// Cone: `p + 2 floor(sqrt(t/4))` capped at `N`, `q + floor(sqrt(t/4))`
/// capped at `floor(N/2)`. Diamond: both coordinates move toward the
/// origin by `floor(sqrt(t/4))`, stopping at zero.
pub fn explicit_shift(spec: &FamilySpec, p: i64, q: i64, t: f64) -> Option<(i64, i64)> {
    let s = (t / 4.0).sqrt().floor() as i64;
    match *spec {
        FamilySpec::Cone45 { n } => {
            let n = n as i64;
            Some(((p + 2 * s).min(n), (q + s).min(n / 2).max(q.min(n / 2))))
        }
        FamilySpec::DiamondBall { .. } => {
            let toward = |v: i64| v.signum() * (v.abs() - s).max(0);
            Some((toward(p), toward(q)))
        }
        _ => None,
    }
}

/// `delta^nu` on the domain (`nu` may be negative).
pub fn delta_power(dom: &Domain, nu: f64) -> Vec<f64> {
    (0..dom.len()).map(|i| dom.delta_f64(i).powf(nu)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::dirichlet_kernel;
    use crate::spectral::{perron_pair, SolverOptions};

    #[test]
    fn cone_small() {
        let inst = generate(&FamilySpec::Cone45 { n: 4 }).unwrap();
        let d = &inst.domain;
        assert_eq!(d.len(), 6);
        let x = d.local_at(&[3, 1]).unwrap();
        assert_eq!(d.delta(x), 1);
        let bottom = d.boundary().iter().filter(|&&v| inst.graph.coord(v).unwrap()[1] == 0).count();
        let diag = d.boundary().iter().filter(|&&v| {
            let c = inst.graph.coord(v).unwrap();
            c[0] == c[1]
        }).count();
        assert_eq!(bottom + diag, d.boundary().len());
        assert_eq!(d.coord(d.center()).unwrap(), &[4, 2]);
    }

    #[test]
    fn cone_right_edge_holds() {
        let inst = generate(&FamilySpec::Cone45 { n: 6 }).unwrap();
        let k = crate::kernels::global_kernel(&inst.graph).unwrap();
        let v = inst.graph.vertex_at(&[6, 3]).unwrap();
        assert_eq!(k.get(v, v), 0.25);
        let w = inst.graph.vertex_at(&[4, 2]).unwrap();
        assert_eq!(k.get(w, w), 0.0);
    }

    #[test]
    fn diamond_count() {
        for n in 1..8 {
            let inst = generate(&FamilySpec::DiamondBall { n }).unwrap();
            assert_eq!(inst.domain.len(), 2 * n * n + 2 * n + 1);
        }
    }

    #[test]
    fn punctured_boundary_is_origin() {
        let inst = generate(&FamilySpec::PuncturedBall { n: 5, d: 2 }).unwrap();
        let o = inst.graph.vertex_at(&[0, 0]).unwrap();
        assert_eq!(inst.domain.boundary(), &[o]);
        let k = crate::kernels::global_kernel(&inst.graph).unwrap();
        let shell = inst.graph.vertex_at(&[5, 0]).unwrap();
        assert_eq!(k.get(shell, shell), 0.75);
    }

    #[test]
    fn closed_forms_match_solver() {
        for spec in [FamilySpec::Cone45 { n: 7 }, FamilySpec::DiamondBall { n: 6 }] {
            let inst = generate(&spec).unwrap();
            let k = dirichlet_kernel(&inst.domain).unwrap();
            let sp = perron_pair(&k, &SolverOptions::default()).unwrap();
            assert!((sp.beta0 - closed_form_beta0(&spec).unwrap()).abs() < 1e-12);
            let (phi, _) = closed_form_phi0(&inst).unwrap();
            for (a, b) in phi.iter().zip(&sp.phi0) {
                assert!((a - b).abs() <= 1e-9 * b, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn cone_kappa_matches() {
        let inst = generate(&FamilySpec::Cone45 { n: 9 }).unwrap();
        let (_, kappa) = closed_form_phi0(&inst).unwrap();
        assert!((kappa - cone_kappa(9)).abs() < 1e-12, "{kappa} vs {}", cone_kappa(9));
    }

    #[test]
    fn diamond_center_is_max() {
        let inst = generate(&FamilySpec::DiamondBall { n: 5 }).unwrap();
        let (phi, kappa) = closed_form_phi0(&inst).unwrap();
        let c = inst.domain.local_at(&[0, 0]).unwrap();
        assert!((phi[c] - kappa).abs() < 1e-15);
        assert!(phi.iter().all(|&v| v <= phi[c]));
    }

    #[test]
    fn figure_families_connect() {
        for n in [8, 14, 16, 28] {
            generate(&FamilySpec::FigD3Nonconvex { n }).unwrap();
            generate(&FamilySpec::FigD4Dumbbell { n }).unwrap();
            generate(&FamilySpec::FigIujJohnNotIu { n }).unwrap();
        }
    }

    #[test]
    fn box_variants_build() {
        for b in [BoxBoundary::Natural, BoxBoundary::CornerPoles, BoxBoundary::CenterPole] {
            let inst = generate(&FamilySpec::BoxPoles { n: 3, d: 2, boundary: b }).unwrap();
            assert_eq!(inst.domain.len(), 49);
            assert!(dirichlet_kernel(&inst.domain).is_ok());
        }
        let inst = generate(&FamilySpec::BoxPoles { n: 3, d: 2, boundary: BoxBoundary::CornerPoles }).unwrap();
        assert_eq!(inst.domain.boundary().len(), 2);
    }

    #[test]
    fn annuli_build() {
        let a = generate(&FamilySpec::AnnulusRound { n: 12, l: 3.0, d: 2 }).unwrap();
        assert!(a.domain.local_at(&[2, 2]).is_none());
        assert!(a.domain.local_at(&[3, 1]).is_some());
        let b = generate(&FamilySpec::AnnulusDiamond { n: 12, l: 3 }).unwrap();
        assert!(b.domain.local_at(&[2, 1]).is_none());
        assert!(b.domain.local_at(&[3, 1]).is_some());
    }

    #[test]
    fn shifts_move_inward() {
        let s = FamilySpec::Cone45 { n: 10 };
        assert_eq!(explicit_shift(&s, 3, 1, 16.0), Some((7, 3)));
        assert_eq!(explicit_shift(&s, 10, 4, 400.0), Some((10, 5)));
        let s = FamilySpec::DiamondBall { n: 10 };
        assert_eq!(explicit_shift(&s, 8, -1, 16.0), Some((6, 0)));
    }
}

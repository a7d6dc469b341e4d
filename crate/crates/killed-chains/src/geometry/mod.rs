//! John and inner-uniform certification, Whitney covers, and the `x_r` map.

mod inner_uniform;
mod john;
mod whitney;

pub use inner_uniform::{
    best_inner_uniform_alpha, check_witness, inner_uniform_certify, InnerUniformCertificate, PairSelection,
};
pub use john::{best_john_alpha, best_john_alpha_any_center, john_feasible, john_radius, JohnCertificate};
pub use whitney::{whitney_cover, CoverAudit, WhitneyBall, WhitneyCover};

use crate::error::{Error, Result};
use crate::graph::Domain;

/// How `x_r` was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum XrSource {
    Certified,
    Heuristic,
}

/// `x_r`: the vertex `floor(r)` steps along the stored path from `x` to the
/// center, or the center itself when the path is shorter than `r`.
pub fn x_r(cert: &JohnCertificate, x: usize, r: f64) -> Result<usize> {
    if r.is_nan() || r < 0.0 {
        return Err(Error::validation(format!("radius must be nonnegative, got {r}")));
    }
    let path = cert.path(x)?;
    let k = path.len() - 1;
    if (k as f64) < r {
        Ok(cert.center)
    } else {
        Ok(path[r.floor() as usize])
    }
}

/// `x_r` from a certificate when one is given, otherwise `floor(r)` steps of
/// greedy `delta` ascent (largest `delta`, lowest id on ties, stopping at a
/// local maximum).
pub fn x_r_or_ascent(dom: &Domain, cert: Option<&JohnCertificate>, x: usize, r: f64) -> Result<(usize, XrSource)> {
    if let Some(c) = cert {
        return Ok((x_r(c, x, r)?, XrSource::Certified));
    }
    dom.require_local(dom.member(x.min(dom.len().saturating_sub(1))))?;
    if x >= dom.len() {
        return Err(Error::UnknownVertex(x));
    }
    let mut v = x;
    for _ in 0..r.max(0.0).floor() as usize {
        let best = dom
            .neighbors(v)
            .iter()
            .map(|e| e.0)
            .max_by(|&a, &b| dom.delta(a).cmp(&dom.delta(b)).then(b.cmp(&a)));
        match best {
            Some(w) if dom.delta(w) > dom.delta(v) => v = w,
            _ => break,
        }
    }
    Ok((v, XrSource::Heuristic))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{generate, FamilySpec};

    #[test]
    fn x_r_cases() {
        let inst = generate(&FamilySpec::Cone45 { n: 16 }).unwrap();
        let d = &inst.domain;
        let cert = john_radius(d, d.center(), 1.0 / 3.0).unwrap().unwrap();
        let x = d.local_at(&[5, 1]).unwrap();
        assert_eq!(x_r(&cert, x, 0.7).unwrap(), x);
        assert_eq!(x_r(&cert, x, 1000.0).unwrap(), d.center());
        for t in [1.0f64, 4.0, 9.0, 16.0, 25.0, 49.0] {
            let r = t.sqrt();
            let y = x_r(&cert, x, r).unwrap();
            assert!(d.delta_f64(y) >= (1.0 + r.floor()) / 3.0 - 1e-12);
            assert!(d.inner_dist(x, y) as f64 <= r);
        }
    }

    #[test]
    fn ascent_fallback() {
        let inst = generate(&FamilySpec::DiamondBall { n: 6 }).unwrap();
        let d = &inst.domain;
        let x = d.local_at(&[6, 0]).unwrap();
        let (y, src) = x_r_or_ascent(d, None, x, 3.0).unwrap();
        assert_eq!(src, XrSource::Heuristic);
        assert_eq!(d.delta(y), 4);
    }
}

//! Solved `phi0` against the asymptotic profiles of the punctured-ball and
//! annulus families.
//!
//! Zones are fixed here:
//!
//! | family | zone | profile |
//! |---|---|---|
//! | punctured ball, `d = 2` | `N^0.2 <= |x|_2 <= N/2` | `log|x| / log N` |
//! | punctured ball, `d > 2` | `|x|_2 >= 2` | `1` |
//! | round annulus, `d = 2` | `|x|_2 <= 2L` | `(log L / log N) delta(x)` |
//! | round annulus, `d = 2` | `|x|_2 > 2L` | `log|x| / log N` |
//! | round annulus, `d > 2` | `|x|_2 <= 2L` | `delta(x) / L` |
//! | round annulus, `d > 2` | `|x|_2 > 2L` | `1` |
//! | diamond annulus | `|x|_2 > 2L` | `log|x| / log N` |
//! | diamond annulus | edge: `|x|_2 <= 2L`, both `|x_i| >= L/4` | `(log L / (L log N)) (|x|_1 - L)` |
//! | diamond annulus | corner: `|x - xi|_2 <= L/2` at a tip `xi` | `(log L / log N) (rho/L)^{2/3} cos(2 theta / 3)` |
//!
//! `delta(x)` is the graph distance to the removed ball. In the corner zone
//! the radial exponent is also fitted along the outward axis of each tip.

use serde::Serialize;

use super::{FamilySpec, Instance};
use crate::error::{Error, Result};
use crate::inequalities::fit_slope;

#[derive(Clone, Debug, Serialize)]
pub struct ZoneReport {
    pub zone: String,
    pub count: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProfileReport {
    pub family: String,
    pub zones: Vec<ZoneReport>,
    /// Fitted exponent of `phi0(xi + rho e)` in `rho`, averaged over tips.
    pub corner_exponent: Option<f64>,
}

impl ProfileReport {
    pub fn zone(&self, name: &str) -> Option<&ZoneReport> {
        self.zones.iter().find(|z| z.zone == name)
    }
}

struct Zone {
    name: &'static str,
    member: Box<dyn Fn(&[i64], f64) -> bool>,
    profile: Box<dyn Fn(&[i64], f64) -> f64>,
}

fn norm2(c: &[i64]) -> f64 {
    c.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt()
}

fn norm1(c: &[i64]) -> i64 {
    c.iter().map(|v| v.abs()).sum()
}

fn zones(spec: &FamilySpec) -> Result<Vec<Zone>> {
    let z = |name, member: Box<dyn Fn(&[i64], f64) -> bool>, profile: Box<dyn Fn(&[i64], f64) -> f64>| Zone {
        name,
        member,
        profile,
    };
    Ok(match *spec {
        FamilySpec::PuncturedBall { n, d: 2 } => {
            let nf = n as f64;
            vec![z(
                "outer",
                Box::new(move |c, _| {
                    let r = norm2(c);
                    r >= nf.powf(0.2) && r <= nf / 2.0
                }),
                Box::new(move |c, _| norm2(c).ln() / nf.ln()),
            )]
        }
        FamilySpec::PuncturedBall { .. } => {
            vec![z("outer", Box::new(|c, _| norm2(c) >= 2.0), Box::new(|_, _| 1.0))]
        }
        FamilySpec::AnnulusRound { n, l, d } => {
            let nf = n as f64;
            if d == 2 {
                vec![
                    z(
                        "inner",
                        Box::new(move |c, _| norm2(c) <= 2.0 * l),
                        Box::new(move |_, delta| l.ln() / nf.ln() * delta),
                    ),
                    z(
                        "outer",
                        Box::new(move |c, _| norm2(c) > 2.0 * l),
                        Box::new(move |c, _| norm2(c).ln() / nf.ln()),
                    ),
                ]
            } else {
                vec![
                    z("inner", Box::new(move |c, _| norm2(c) <= 2.0 * l), Box::new(move |_, delta| delta / l)),
                    z("outer", Box::new(move |c, _| norm2(c) > 2.0 * l), Box::new(|_, _| 1.0)),
                ]
            }
        }
        FamilySpec::AnnulusDiamond { n, l } => {
            let (nf, lf) = (n as f64, l as f64);
            let scale = lf.ln() / nf.ln();
            let tip = move |c: &[i64]| -> Option<(f64, f64)> {
                [(l as i64, 0i64), (-(l as i64), 0), (0, l as i64), (0, -(l as i64))]
                    .iter()
                    .map(|&(a, b)| {
                        let (dx, dy) = ((c[0] - a) as f64, (c[1] - b) as f64);
                        let (ox, oy) = (a.signum() as f64, b.signum() as f64);
                        let rho = (dx * dx + dy * dy).sqrt();
                        let theta = (ox * dy - oy * dx).atan2(ox * dx + oy * dy);
                        (rho, theta)
                    })
                    .find(|&(rho, _)| rho <= lf / 2.0)
            };
            vec![
                z(
                    "outer",
                    Box::new(move |c, _| norm2(c) > 2.0 * lf),
                    Box::new(move |c, _| norm2(c).ln() / nf.ln()),
                ),
                z(
                    "edge",
                    Box::new(move |c, _| {
                        norm2(c) <= 2.0 * lf && c[0].abs() as f64 >= lf / 4.0 && c[1].abs() as f64 >= lf / 4.0
                    }),
                    Box::new(move |c, _| scale / lf * (norm1(c) - l as i64) as f64),
                ),
                z(
                    "corner",
                    Box::new(move |c, _| tip(c).is_some_and(|(rho, _)| rho > 0.0)),
                    Box::new(move |c, _| {
                        let (rho, theta) = tip(c).unwrap();
                        scale * (rho / lf).powf(2.0 / 3.0) * (2.0 * theta / 3.0).cos()
                    }),
                ),
            ]
        }
        _ => {
            return Err(Error::validation(format!("{} has no asymptotic profile", spec.name())));
        }
    })
}

/// Ratio `phi0 / profile` over each zone. Points where the profile is not
/// positive are skipped.
pub fn asymptotic_phi0_profile(inst: &Instance, phi0: &[f64]) -> Result<ProfileReport> {
    let dom = &inst.domain;
    if phi0.len() != dom.len() {
        return Err(Error::validation("phi0 must have one value per domain vertex"));
    }
    let mut reports = Vec::new();
    for zone in zones(&inst.spec)? {
        let mut count = 0;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (i, &phi) in phi0.iter().enumerate() {
            let c = dom.coord(i).unwrap();
            let delta = dom.delta_f64(i);
            if !(zone.member)(c, delta) {
                continue;
            }
            let p = (zone.profile)(c, delta);
            if p > 1e-12 {
                count += 1;
                lo = lo.min(phi / p);
                hi = hi.max(phi / p);
            }
        }
        reports.push(ZoneReport { zone: zone.name.to_string(), count, min_ratio: lo, max_ratio: hi });
    }
    let corner_exponent = match inst.spec {
        FamilySpec::AnnulusDiamond { l, .. } => {
            let l = l as i64;
            let slopes: Vec<f64> = [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .filter_map(|&(a, b)| {
                    let pts: Vec<(f64, f64)> = (1..=l / 2)
                        .filter_map(|rho| {
                            let c = [a * (l + rho), b * (l + rho)];
                            dom.local_at(&c).map(|i| ((rho as f64).ln(), phi0[i].ln()))
                        })
                        .collect();
                    fit_slope(&pts)
                })
                .collect();
            (!slopes.is_empty()).then(|| slopes.iter().sum::<f64>() / slopes.len() as f64)
        }
        _ => None,
    };
    Ok(ProfileReport { family: inst.spec.name().to_string(), zones: reports, corner_exponent })
}

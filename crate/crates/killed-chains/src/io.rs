//! Domain-spec files and CSV output.
//!
//! A domain spec is JSON of the form
//!
//! ```json
//! { "generator": { "family": "diamond_ball", "n": 10 } }
//! { "explicit": { "pi": [..], "edges": [[0, 1, 0.25], ..], "coords": [[0, 0], ..] },
//!   "members": [..], "center": 3 }
//! ```
//!
//! With a generator, `members` and `center` override the generated ones
//! when present. With an explicit graph, `members` is required.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Domain, Vertex, WeightedGraph};
use crate::kernels::KernelMatrix;
use crate::spectral::{SpectralPair, SpectrumSummary};
use crate::zoo::{generate, FamilySpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplicitGraph {
    pub pi: Vec<f64>,
    pub edges: Vec<(Vertex, Vertex, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<Vec<i64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphSource {
    Generator(FamilySpec),
    Explicit(ExplicitGraph),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    #[serde(flatten)]
    pub source: GraphSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub members: Option<Vec<Vertex>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vertex>,
}

/// A domain together with the family it came from, if any.
#[derive(Clone, Debug)]
pub struct LoadedDomain {
    pub family: Option<FamilySpec>,
    pub domain: Domain,
}

impl DomainSpec {
    pub fn generator(spec: FamilySpec) -> Self {
        DomainSpec { source: GraphSource::Generator(spec), members: None, center: None }
    }

    /// Spell out `dom` as an explicit graph, members and center.
    pub fn explicit(dom: &Domain) -> Self {
        let g = dom.graph();
        let coords = g.has_coords().then(|| (0..g.len()).map(|v| g.coord(v).unwrap().to_vec()).collect());
        DomainSpec {
            source: GraphSource::Explicit(ExplicitGraph { pi: g.pi_all().to_vec(), edges: g.edges(), coords }),
            members: Some(dom.members().to_vec()),
            center: Some(dom.member(dom.center())),
        }
    }

    pub fn build(&self) -> Result<LoadedDomain> {
        match &self.source {
            GraphSource::Generator(spec) => {
                let inst = generate(spec)?;
                let domain = match (&self.members, self.center) {
                    (None, None) => inst.domain,
                    (None, Some(c)) => inst.domain.with_center(c)?,
                    (Some(m), c) => Domain::new(inst.graph.clone(), m, c)?,
                };
                Ok(LoadedDomain { family: Some(spec.clone()), domain })
            }
            GraphSource::Explicit(e) => {
                let mut g = WeightedGraph::new(e.pi.clone(), &e.edges)?;
                if let Some(c) = &e.coords {
                    g = g.with_coords(c.clone())?;
                }
                let members = self
                    .members
                    .as_ref()
                    .ok_or_else(|| Error::validation("an explicit domain spec needs `members`"))?;
                Ok(LoadedDomain { family: None, domain: Domain::new(Arc::new(g), members, self.center)? })
            }
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.flush()?;
        Ok(())
    }
}

/// One row of a check report.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CheckRow {
    pub family: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub check_id: String,
    pub t_or_r: f64,
    pub measured: f64,
    pub envelope: f64,
    pub ratio: f64,
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|x| x.map_err(Error::from)).collect()
}

#[derive(Serialize)]
struct VertexValue<'a> {
    state: usize,
    vertex: Vertex,
    coord: &'a str,
    value: f64,
}

/// `state, vertex, coord, value` for a per-state vector.
pub fn write_vector(path: &Path, dom: &Domain, values: &[f64]) -> Result<()> {
    if values.len() != dom.len() {
        return Err(Error::validation("vector length differs from the domain size"));
    }
    let mut w = csv::Writer::from_path(path)?;
    for (i, &value) in values.iter().enumerate() {
        let coord = dom
            .coord(i)
            .map(|c| c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "))
            .unwrap_or_default();
        w.serialize(VertexValue { state: i, vertex: dom.member(i), coord: &coord, value })?;
    }
    w.flush()?;
    Ok(())
}

/// Kernel entries as `row, col, value` triplets over local states, plus a
/// sidecar `measure` file holding the reversing measure.
pub fn write_kernel(dir: &Path, k: &KernelMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("kernel.csv"))?;
    w.write_record(["row", "col", "value"])?;
    for (i, j, v) in k.triplets() {
        w.serialize((i, j, v))?;
    }
    w.flush()?;
    let mut m = csv::Writer::from_path(dir.join("measure.csv"))?;
    m.write_record(["state", "vertex", "measure"])?;
    for (i, (&v, &x)) in k.labels().iter().zip(k.measure()).enumerate() {
        m.serialize((i, v, x))?;
    }
    m.flush()?;
    Ok(())
}

pub fn write_spectrum(path: &Path, s: &SpectrumSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "eigenvalue"])?;
    for (i, v) in s.eigenvalues.iter().enumerate() {
        w.serialize((i, v))?;
    }
    w.flush()?;
    Ok(())
}

/// `beta0.csv`: the Perron value with the other scalar spectral data.
pub fn write_beta0(path: &Path, sp: &SpectralPair) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["beta0", "beta1", "beta_min", "residual", "period"])?;
    w.serialize((sp.beta0, sp.beta1, sp.beta_min, sp.residual, sp.period))?;
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_spec_round_trips() {
        let s = DomainSpec::generator(FamilySpec::AnnulusRound { n: 6, l: 1.5, d: 2 });
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"generator\""));
        assert_eq!(serde_json::from_str::<DomainSpec>(&text).unwrap(), s);
    }

    #[test]
    fn explicit_spec_rebuilds_the_same_domain() {
        let inst = generate(&FamilySpec::Cone45 { n: 6 }).unwrap();
        let s = DomainSpec::explicit(&inst.domain);
        let back: DomainSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        let d = back.build().unwrap().domain;
        assert_eq!(d.members(), inst.domain.members());
        assert_eq!(d.deltas(), inst.domain.deltas());
        assert_eq!(d.center(), inst.domain.center());
        for i in 0..d.len() {
            assert_eq!(d.neighbors(i), inst.domain.neighbors(i));
            assert_eq!(d.pi(i), inst.domain.pi(i));
        }
    }

    #[test]
    fn explicit_without_members_is_rejected() {
        let text = r#"{"explicit": {"pi": [1, 1], "edges": [[0, 1, 0.5]]}}"#;
        let s: DomainSpec = serde_json::from_str(text).unwrap();
        assert!(matches!(s.build(), Err(Error::Validation(_))));
    }

    #[test]
    fn check_rows_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let rows = vec![CheckRow {
            family: "cone45".into(),
            n: 8,
            check_id: "exit_time".into(),
            t_or_r: 4.0,
            measured: 0.25,
            envelope: 0.5,
            ratio: 0.5,
        }];
        write_rows(&p, &rows).unwrap();
        let header = std::fs::read_to_string(&p).unwrap();
        assert!(header.starts_with("family,N,check_id,t_or_r,measured,envelope,ratio"));
        assert_eq!(read_rows::<CheckRow>(&p).unwrap(), rows);
    }
}

//! File formats: MSR matrices and result tables as CSV, CGPTs and
//! dictionaries as JSON.
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces the values exactly and identical inputs give identical bytes.

use std::io::{Read, Write};

use nalgebra::{DMatrix, Vector2};
use serde::{Deserialize, Serialize};

use crate::cgpt::CgptPair;
use crate::error::{Error, Result};
use crate::experiment::Scenario;
use crate::geometry::SimilarityTransform;
use crate::matching::{DescriptorPair, Dictionary, DictionaryEntry, Provenance};
use crate::msr::{ArrayConfig, MsrMatrix};
use crate::scalar::{cplx, Cplx};

/// Version string written into every file header.
pub const FORMAT_VERSION: &str = concat!("cgpt-core ", env!("CARGO_PKG_VERSION"));

/// Acquisition metadata stored in the header of an MSR file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsrHeader {
    pub n: usize,
    pub radius: f64,
    pub center: [f64; 2],
    pub reference: [f64; 2],
    pub kappa: f64,
    pub sigma0: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub shape: String,
    /// Quadrature nodes used for the simulation.
    pub nodes: usize,
    /// Whether the base shape was normalized before the transform.
    pub normalize: bool,
    /// `z_re z_im s θ` of the transform applied to the base shape.
    pub transform: String,
    pub version: String,
}

impl MsrHeader {
    /// Header for data simulated from `scenario`.
    pub fn for_scenario(scenario: &Scenario, v: &MsrMatrix<f64>, sigma0: f64, seed: u64) -> Self {
        let (a, t) = (&scenario.array, &scenario.transform);
        Self {
            n: a.n,
            radius: a.radius,
            center: [a.center.x, a.center.y],
            reference: [a.reference.x, a.reference.y],
            kappa: scenario.kappa,
            sigma0,
            noise_sigma: v.noise_sigma,
            seed,
            shape: scenario.shape.to_string(),
            nodes: scenario.nodes,
            normalize: scenario.normalize,
            transform: format!("{} {} {} {}", t.z.re, t.z.im, t.s, t.theta),
            version: FORMAT_VERSION.to_string(),
        }
    }

    /// Rebuilds the simulated scenario, e.g. to compute oracle CGPTs.
    pub fn scenario(&self) -> Result<Scenario> {
        let t: Vec<f64> = self
            .transform
            .split_whitespace()
            .map(|x| x.parse::<f64>().map_err(|e| Error::Parse(format!("MSR transform `{}`: {e}", self.transform))))
            .collect::<Result<_>>()?;
        if t.len() != 4 {
            return Err(Error::Parse(format!("MSR transform `{}` needs 4 numbers", self.transform)));
        }
        Ok(Scenario {
            shape: self.shape.parse()?,
            nodes: self.nodes,
            normalize: self.normalize,
            kappa: self.kappa,
            transform: SimilarityTransform::new(cplx(t[0], t[1]), t[2], t[3])?,
            array: ArrayConfig::with_reference(
                self.n,
                self.radius,
                Vector2::new(self.center[0], self.center[1]),
                Vector2::new(self.reference[0], self.reference[1]),
            )?,
        })
    }
}

const MSR_COLUMNS: [&str; 16] = [
    "N",
    "R",
    "center_x",
    "center_y",
    "z0_x",
    "z0_y",
    "kappa",
    "sigma0",
    "sigma_noise",
    "seed",
    "shape",
    "nodes",
    "normalize",
    "transform",
    "version",
    "rows_follow",
];

/// Writes a header row of keys, a row of values, then the `N` rows of `V`.
pub fn write_msr_csv<W: Write>(out: W, v: &MsrMatrix<f64>, header: &MsrHeader) -> Result<()> {
    if header.n != v.values.nrows() || v.values.nrows() != v.values.ncols() {
        return Err(Error::InvalidArgument(format!(
            "header says N = {} but the matrix is {}×{}",
            header.n,
            v.values.nrows(),
            v.values.ncols()
        )));
    }
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    w.write_record(MSR_COLUMNS)?;
    w.write_record([
        header.n.to_string(),
        header.radius.to_string(),
        header.center[0].to_string(),
        header.center[1].to_string(),
        header.reference[0].to_string(),
        header.reference[1].to_string(),
        header.kappa.to_string(),
        header.sigma0.to_string(),
        header.noise_sigma.to_string(),
        header.seed.to_string(),
        header.shape.clone(),
        header.nodes.to_string(),
        header.normalize.to_string(),
        header.transform.clone(),
        header.version.clone(),
        header.n.to_string(),
    ])?;
    for r in 0..header.n {
        w.write_record(v.values.row(r).iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, what: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    rec.get(i)
        .ok_or_else(|| Error::Parse(format!("MSR header lacks `{what}`")))?
        .trim()
        .parse()
        .map_err(|e| Error::Parse(format!("MSR header field `{what}`: {e}")))
}

pub fn read_msr_csv<R: Read>(input: R) -> Result<(MsrMatrix<f64>, MsrHeader)> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut records = rd.records();
    let mut next = |what: &str| -> Result<csv::StringRecord> {
        records.next().ok_or_else(|| Error::Parse(format!("MSR file ends before {what}")))?.map_err(Error::from)
    };
    let keys = next("the header")?;
    if keys.iter().take(2).collect::<Vec<_>>() != ["N", "R"] {
        return Err(Error::Parse("MSR file does not start with an `N,R,...` header".into()));
    }
    let vals = next("the header values")?;
    let header = MsrHeader {
        n: parse_field(&vals, 0, "N")?,
        radius: parse_field(&vals, 1, "R")?,
        center: [parse_field(&vals, 2, "center_x")?, parse_field(&vals, 3, "center_y")?],
        reference: [parse_field(&vals, 4, "z0_x")?, parse_field(&vals, 5, "z0_y")?],
        kappa: parse_field(&vals, 6, "kappa")?,
        sigma0: parse_field(&vals, 7, "sigma0")?,
        noise_sigma: parse_field(&vals, 8, "sigma_noise")?,
        seed: parse_field(&vals, 9, "seed")?,
        shape: vals.get(10).unwrap_or_default().to_string(),
        nodes: parse_field(&vals, 11, "nodes")?,
        normalize: parse_field(&vals, 12, "normalize")?,
        transform: vals.get(13).unwrap_or_default().to_string(),
        version: vals.get(14).unwrap_or_default().to_string(),
    };
    let n = header.n;
    let mut values = DMatrix::zeros(n, n);
    for r in 0..n {
        let row = next(&format!("row {r}"))?;
        if row.len() != n {
            return Err(Error::Parse(format!("MSR row {r} has {} entries, expected {n}", row.len())));
        }
        for (s, field) in row.iter().enumerate() {
            values[(r, s)] = field.trim().parse().map_err(|e| Error::Parse(format!("MSR entry ({r}, {s}): {e}")))?;
        }
    }
    let config = ArrayConfig::with_reference(
        n,
        header.radius,
        Vector2::new(header.center[0], header.center[1]),
        Vector2::new(header.reference[0], header.reference[1]),
    )?;
    Ok((MsrMatrix { values, config, noise_sigma: header.noise_sigma }, header))
}

/// Complex matrix as paired real/imaginary row-major arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&DMatrix<Cplx<f64>>> for ComplexMatrixJson {
    fn from(m: &DMatrix<Cplx<f64>>) -> Self {
        let rows = |f: fn(&Cplx<f64>) -> f64| (0..m.nrows()).map(|i| m.row(i).iter().map(f).collect()).collect();
        Self { re: rows(|z| z.re), im: rows(|z| z.im) }
    }
}

impl ComplexMatrixJson {
    fn to_matrix(&self) -> Result<DMatrix<Cplx<f64>>> {
        let n = self.re.len();
        let square = |rows: &Vec<Vec<f64>>| rows.len() == n && rows.iter().all(|r| r.len() == n);
        if !square(&self.re) || !square(&self.im) {
            return Err(Error::Parse("complex matrix must have square re/im parts of equal size".into()));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| cplx(self.re[i][j], self.im[i][j])))
    }
}

fn real_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn real_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse("descriptor matrix must be square".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// CGPT file: contrast, order and the two complex matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgptJson {
    pub version: String,
    #[serde(rename = "K")]
    pub order: usize,
    pub lambda: f64,
    #[serde(rename = "N1")]
    pub n1: ComplexMatrixJson,
    #[serde(rename = "N2")]
    pub n2: ComplexMatrixJson,
    /// Free-form origin (shape spec, MSR file, ...).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl CgptJson {
    pub fn new(pair: &CgptPair<f64>, source: Option<String>) -> Self {
        Self {
            version: FORMAT_VERSION.to_string(),
            order: pair.order(),
            lambda: pair.lambda,
            n1: (&pair.n1).into(),
            n2: (&pair.n2).into(),
            source,
        }
    }

    pub fn to_pair(&self) -> Result<CgptPair<f64>> {
        let pair = CgptPair::new(self.n1.to_matrix()?, self.n2.to_matrix()?, self.lambda)?;
        if pair.order() != self.order {
            return Err(Error::Parse(format!(
                "CGPT file declares K = {} but holds order {}",
                self.order,
                pair.order()
            )));
        }
        Ok(pair)
    }
}

pub fn write_cgpt_json<W: Write>(out: W, pair: &CgptPair<f64>, source: Option<String>) -> Result<()> {
    write_json(out, &CgptJson::new(pair, source))
}

pub fn read_cgpt_json<R: Read>(input: R) -> Result<CgptPair<f64>> {
    serde_json::from_reader::<_, CgptJson>(input)?.to_pair()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorJson {
    #[serde(rename = "I1")]
    pub i1: Vec<Vec<f64>>,
    #[serde(rename = "I2")]
    pub i2: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryJson {
    pub name: String,
    /// Rotational symmetry order.
    pub p: usize,
    #[serde(rename = "K")]
    pub order: usize,
    pub lambda: f64,
    #[serde(rename = "N1")]
    pub n1: ComplexMatrixJson,
    #[serde(rename = "N2")]
    pub n2: ComplexMatrixJson,
    pub descriptors: DescriptorJson,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryJson {
    pub version: String,
    pub entries: Vec<EntryJson>,
}

impl From<&Dictionary<f64>> for DictionaryJson {
    fn from(dict: &Dictionary<f64>) -> Self {
        let entries = dict
            .entries
            .iter()
            .map(|e| EntryJson {
                name: e.name.clone(),
                p: e.symmetry,
                order: e.cgpt.order(),
                lambda: e.cgpt.lambda,
                n1: (&e.cgpt.n1).into(),
                n2: (&e.cgpt.n2).into(),
                descriptors: DescriptorJson { i1: real_rows(&e.descriptors.i1), i2: real_rows(&e.descriptors.i2) },
                provenance: e.provenance.clone(),
            })
            .collect();
        Self { version: FORMAT_VERSION.to_string(), entries }
    }
}

impl DictionaryJson {
    /// Rebuilds the dictionary. Stored descriptors are kept as written, so a
    /// round trip is exact.
    pub fn to_dictionary(&self) -> Result<Dictionary<f64>> {
        let entries = self
            .entries
            .iter()
            .map(|e| {
                let cgpt = CgptPair::new(e.n1.to_matrix()?, e.n2.to_matrix()?, e.lambda)?;
                if cgpt.order() != e.order {
                    return Err(Error::Parse(format!(
                        "entry `{}` declares K = {} but holds {}",
                        e.name,
                        e.order,
                        cgpt.order()
                    )));
                }
                let descriptors =
                    DescriptorPair { i1: real_matrix(&e.descriptors.i1)?, i2: real_matrix(&e.descriptors.i2)? };
                if descriptors.order() != e.order || descriptors.i2.nrows() != e.order {
                    return Err(Error::Parse(format!("entry `{}` has descriptors of the wrong order", e.name)));
                }
                let mut entry = DictionaryEntry::new(e.name.clone(), cgpt, e.p, e.provenance.clone())?;
                entry.descriptors = descriptors;
                Ok(entry)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dictionary::new(entries))
    }
}

pub fn write_dictionary_json<W: Write>(out: W, dict: &Dictionary<f64>) -> Result<()> {
    write_json(out, &DictionaryJson::from(dict))
}

pub fn read_dictionary_json<R: Read>(input: R) -> Result<Dictionary<f64>> {
    serde_json::from_reader::<_, DictionaryJson>(input)?.to_dictionary()
}

/// Pretty JSON with a trailing newline.
pub fn write_json<W: Write, S: Serialize>(mut out: W, value: &S) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// CSV table preceded by `#` provenance lines (tool version, then each
/// line of `provenance`). Readers should skip lines starting with `#`.
pub struct TableWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TableWriter<W> {
    pub fn new(mut out: W, provenance: &str, columns: &[&str]) -> Result<Self> {
        writeln!(out, "# {FORMAT_VERSION}")?;
        for line in provenance.lines() {
            writeln!(out, "# {line}")?;
        }
        let mut inner = csv::WriterBuilder::new().flexible(true).from_writer(out);
        inner.write_record(columns)?;
        Ok(Self { inner })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Reads a table written by [`TableWriter`]: column names and rows.
pub fn read_table<R: Read>(input: R) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).flexible(true).from_reader(input);
    let columns = rd.headers()?.iter().map(str::to_string).collect();
    let rows =
        rd.records().map(|r| Ok(r?.iter().map(str::to_string).collect())).collect::<Result<Vec<Vec<String>>>>()?;
    Ok((columns, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgpt::compute_cgpt;
    use crate::geometry::{make_ellipse, ShapeSpec};
    use crate::msr::{add_noise, simulate_msr};

    fn header(v: &MsrMatrix<f64>) -> MsrHeader {
        MsrHeader {
            n: v.config.n,
            radius: v.config.radius,
            center: [v.config.center.x, v.config.center.y],
            reference: [v.config.reference.x, v.config.reference.y],
            kappa: 4.0 / 3.0,
            sigma0: 0.1,
            noise_sigma: v.noise_sigma,
            seed: 42,
            shape: "ellipse:1,0.5".into(),
            nodes: 128,
            normalize: false,
            transform: "0 0 1 0".into(),
            version: FORMAT_VERSION.into(),
        }
    }

    #[test]
    fn msr_csv_round_trip_is_exact() {
        let b = make_ellipse(1.0, 0.5, 128).unwrap();
        let cfg = ArrayConfig::new(11, 2.0, Vector2::new(0.1, -0.2)).unwrap();
        let v = add_noise(&simulate_msr(&b, 4.0 / 3.0, &cfg).unwrap(), 0.1, 42).unwrap();
        let h = header(&v);
        let mut buf = Vec::new();
        write_msr_csv(&mut buf, &v, &h).unwrap();
        let (back, hb) = read_msr_csv(buf.as_slice()).unwrap();
        assert_eq!(back, v);
        assert_eq!(hb, h);
        let mut again = Vec::new();
        write_msr_csv(&mut again, &back, &hb).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn header_rebuilds_scenario() {
        let s = crate::experiment::flower_scenario(ShapeSpec::Flower { p: 5, eta: 0.3 }).unwrap();
        let v = s.simulate().unwrap();
        let h = MsrHeader::for_scenario(&s, &v, 0.0, 0);
        assert_eq!(h.scenario().unwrap(), s);
    }

    #[test]
    fn truncated_msr_file_is_rejected() {
        let b = make_ellipse(1.0, 0.5, 64).unwrap();
        let cfg = ArrayConfig::new(5, 2.0, Vector2::zeros()).unwrap();
        let v = simulate_msr(&b, 2.0, &cfg).unwrap();
        let mut buf = Vec::new();
        write_msr_csv(&mut buf, &v, &header(&v)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: Vec<&str> = text.lines().take(5).collect();
        assert!(matches!(read_msr_csv(cut.join("\n").as_bytes()), Err(Error::Parse(_))));
        assert!(read_msr_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn cgpt_json_round_trip_is_exact() {
        let pair = compute_cgpt(&make_ellipse(1.0, 0.4, 64).unwrap(), 3.5, 3).unwrap();
        let mut buf = Vec::new();
        write_cgpt_json(&mut buf, &pair, Some("ellipse:1,0.4".into())).unwrap();
        assert_eq!(read_cgpt_json(buf.as_slice()).unwrap(), pair);
    }

    #[test]
    fn dictionary_json_round_trip_is_exact_and_deterministic() {
        let shapes: Vec<ShapeSpec> = ["ellipse:1,0.5", "flower:3,0.3"].iter().map(|s| s.parse().unwrap()).collect();
        let dict = Dictionary::from_shapes(&shapes, 3, 3.5, Some(128)).unwrap();
        let mut a = Vec::new();
        write_dictionary_json(&mut a, &dict).unwrap();
        let back = read_dictionary_json(a.as_slice()).unwrap();
        assert_eq!(back, dict);
        let mut b = Vec::new();
        write_dictionary_json(&mut b, &Dictionary::from_shapes(&shapes, 3, 3.5, Some(128)).unwrap()).unwrap();
        assert_eq!(a, b);
        let json: serde_json::Value = serde_json::from_slice(&a).unwrap();
        assert_eq!(json["entries"][1]["p"], 3);
        assert_eq!(json["entries"][0]["K"], 3);
    }

    #[test]
    fn table_round_trip_skips_provenance() {
        let mut buf = Vec::new();
        let mut t = TableWriter::new(&mut buf, "config {\"a\":1}\nseed 3", &["x", "y"]).unwrap();
        t.row(["1", "2.5"]).unwrap();
        t.finish().unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# cgpt-core"));
        let (cols, rows) = read_table(buf.as_slice()).unwrap();
        assert_eq!(cols, vec!["x", "y"]);
        assert_eq!(rows, vec![vec!["1".to_string(), "2.5".to_string()]]);
    }
}

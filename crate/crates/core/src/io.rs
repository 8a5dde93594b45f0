//! Point-set files (CSV and JSON), weight files, and result emission.
//!
//! CSV files carry a header row naming the columns and one point per row.
//! JSON files are objects `{"model": ..., "d": ..., "n": ..., "rows": [[...], ...]}`.
//! Floats are always written with 17 significant digits.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::isometry::{factor, HUnitary};
use crate::lorentz::{lift, project, LoidPoint, PointSet};
use crate::poincare::{from_poincare, to_poincare, PoincarePoint};
use crate::procrustes::AlignmentResult;

/// `{:.16e}` formatting, i.e. 17 significant digits; non-finite values are
/// written as `inf`, `-inf` or `NaN`.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// serde helper emitting a bare JSON number with 17 significant digits.
/// Non-finite values, which JSON cannot hold, become strings.
pub fn sig17<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        let raw = RawValue::from_string(fmt17(*x)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    } else {
        s.serialize_str(&fmt17(*x))
    }
}

fn sig17_vec<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        seq.serialize_element(&Sig17(*x))?;
    }
    seq.end()
}

fn sig17_rows<S: Serializer>(rows: &[Vec<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(rows.len()))?;
    for row in rows {
        seq.serialize_element(&Sig17Row(row))?;
    }
    seq.end()
}

struct Sig17(f64);

impl Serialize for Sig17 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        sig17(&self.0, s)
    }
}

struct Sig17Row<'a>(&'a [f64]);

impl Serialize for Sig17Row<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        sig17_vec(self.0, s)
    }
}

/// Coordinate model of the rows in a file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Hyperboloid coordinates, d + 1 per row.
    Loid,
    /// Poincare-ball coordinates, d per row.
    Poincare,
    /// Parameter vectors `z`, lifted with `Q`; d per row.
    Euclidean,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Loid => "loid",
            Model::Poincare => "poincare",
            Model::Euclidean => "euclidean",
        }
    }

    fn row_len(self, d: usize) -> usize {
        match self {
            Model::Loid => d + 1,
            Model::Poincare | Model::Euclidean => d,
        }
    }

    fn header(self, d: usize) -> Vec<String> {
        match self {
            Model::Loid => (0..=d).map(|i| format!("x{i}")).collect(),
            Model::Poincare => (1..=d).map(|i| format!("y{i}")).collect(),
            Model::Euclidean => (1..=d).map(|i| format!("z{i}")).collect(),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "loid" => Ok(Model::Loid),
            "poincare" => Ok(Model::Poincare),
            "euclidean" => Ok(Model::Euclidean),
            other => Err(Error::Parse(format!("unknown model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Csv,
    Json,
}

impl FileFormat {
    /// `.json` files are JSON, everything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => FileFormat::Json,
            _ => FileFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReadOptions {
    /// Model of the rows. CSV defaults to `loid`; JSON files carry a tag and
    /// a conflicting request is an error.
    pub model: Option<Model>,
    /// Put off-manifold hyperboloid rows back on the sheet by lifting their
    /// tail with `Q` instead of rejecting them.
    pub relift: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointSetDoc {
    model: Model,
    d: usize,
    n: usize,
    rows: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct PointSetDocOut<'a> {
    model: Model,
    d: usize,
    n: usize,
    #[serde(serialize_with = "sig17_rows")]
    rows: &'a [Vec<f64>],
}

fn row_to_point(row: &[f64], model: Model, relift: bool, index: usize) -> Result<LoidPoint> {
    let at = |e: Error| Error::Parse(format!("row {}: {e}", index + 1));
    match model {
        Model::Loid => match LoidPoint::from_slice(row) {
            Err(Error::OffManifold { .. } | Error::LowerSheet(_)) if relift => {
                LoidPoint::renormalized(DVector::from_column_slice(row)).map_err(at)
            }
            other => other.map_err(at),
        },
        Model::Euclidean => lift(&DVector::from_column_slice(row)).map_err(at),
        Model::Poincare => PoincarePoint::from_slice(row)
            .and_then(|y| from_poincare(&y))
            .map_err(at),
    }
}

fn rows_to_set(rows: &[Vec<f64>], model: Model, relift: bool) -> Result<PointSet> {
    if rows.is_empty() {
        return Err(Error::EmptySet);
    }
    let width = rows[0].len();
    if width < model.row_len(1) {
        return Err(Error::Parse(format!(
            "{model} rows need at least {} columns, found {width}",
            model.row_len(1)
        )));
    }
    let points = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            if row.len() != width {
                return Err(Error::Parse(format!(
                    "row {} has {} values, expected {width}",
                    i + 1,
                    row.len()
                )));
            }
            row_to_point(row, model, relift, i)
        })
        .collect::<Result<Vec<_>>>()?;
    PointSet::new(points)
}

fn set_to_rows(set: &PointSet, model: Model) -> Vec<Vec<f64>> {
    set.iter()
        .map(|p| match model {
            Model::Loid => p.as_slice().to_vec(),
            Model::Euclidean => project(p).as_slice().to_vec(),
            Model::Poincare => to_poincare(p).vector().as_slice().to_vec(),
        })
        .collect()
}

/// Parses a CSV point set with a header row.
pub fn parse_pointset_csv<R: Read>(input: R, opts: &ReadOptions) -> Result<PointSet> {
    let model = opts.model.unwrap_or(Model::Loid);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let width = reader.headers()?.len();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != width {
            return Err(Error::Parse(format!(
                "row {} has {} fields but the header has {width}",
                i + 1,
                record.len()
            )));
        }
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: '{f}': {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    rows_to_set(&rows, model, opts.relift)
}

/// Parses a JSON point-set document.
pub fn parse_pointset_json(text: &str, opts: &ReadOptions) -> Result<PointSet> {
    let doc: PointSetDoc = serde_json::from_str(text)?;
    if let Some(model) = opts.model {
        if model != doc.model {
            return Err(Error::Parse(format!(
                "file declares model '{}' but '{model}' was requested",
                doc.model
            )));
        }
    }
    if doc.rows.len() != doc.n {
        return Err(Error::Parse(format!(
            "n = {} but {} rows present",
            doc.n,
            doc.rows.len()
        )));
    }
    if doc.d == 0 {
        return Err(Error::Parse("d must be at least 1".into()));
    }
    let width = doc.model.row_len(doc.d);
    if let Some((i, row)) = doc.rows.iter().enumerate().find(|(_, r)| r.len() != width) {
        return Err(Error::Parse(format!(
            "row {} has {} values, expected {width} for d = {}",
            i + 1,
            row.len(),
            doc.d
        )));
    }
    rows_to_set(&doc.rows, doc.model, opts.relift)
}

pub fn read_pointset(path: &Path, format: FileFormat, opts: &ReadOptions) -> Result<PointSet> {
    match format {
        FileFormat::Csv => parse_pointset_csv(BufReader::new(File::open(path)?), opts),
        FileFormat::Json => parse_pointset_json(&std::fs::read_to_string(path)?, opts),
    }
}

/// Writes the set in the requested model's coordinates.
pub fn write_pointset_to<W: Write>(
    set: &PointSet,
    format: FileFormat,
    model: Model,
    mut out: W,
) -> Result<()> {
    let rows = set_to_rows(set, model);
    match format {
        FileFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(model.header(set.dim()))?;
            for row in &rows {
                w.write_record(row.iter().map(|x| fmt17(*x)))?;
            }
            w.flush()?;
        }
        FileFormat::Json => {
            let doc = PointSetDocOut {
                model,
                d: set.dim(),
                n: set.len(),
                rows: &rows,
            };
            serde_json::to_writer_pretty(&mut out, &doc)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn write_pointset(path: &Path, format: FileFormat, model: Model, set: &PointSet) -> Result<()> {
    let out = BufWriter::new(File::create(path)?);
    write_pointset_to(set, format, model, out)
}

/// Reads positive weights: a JSON array, or numbers separated by commas,
/// whitespace or newlines with an optional header line.
pub fn read_weights(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    parse_weights(&text, FileFormat::from_path(path))
}

pub fn parse_weights(text: &str, format: FileFormat) -> Result<Vec<f64>> {
    match format {
        FileFormat::Json => Ok(serde_json::from_str(text)?),
        FileFormat::Csv => {
            // A leading line without any number is taken as a header.
            let body = match text.split_once('\n') {
                Some((first, rest))
                    if !first.split(',').any(|t| t.trim().parse::<f64>().is_ok()) =>
                {
                    rest
                }
                _ => text,
            };
            body.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("weight '{t}': {e}")))
                })
                .collect()
        }
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// JSON document describing an isometry: the row-major matrix and its
/// `R = R_b R_U` factors.
#[derive(Debug, Serialize)]
pub struct IsometryReport {
    #[serde(rename = "R", serialize_with = "sig17_rows")]
    pub matrix: Vec<Vec<f64>>,
    #[serde(serialize_with = "sig17_vec")]
    pub b: Vec<f64>,
    #[serde(rename = "U", serialize_with = "sig17_rows")]
    pub u: Vec<Vec<f64>>,
}

impl IsometryReport {
    pub fn new(r: &HUnitary) -> Result<Self> {
        let (b, u) = factor(r)?;
        Ok(Self {
            matrix: matrix_rows(r.matrix()),
            b: b.vector().as_slice().to_vec(),
            u: matrix_rows(u.matrix()),
        })
    }
}

/// Output of the `align` command.
#[derive(Debug, Serialize)]
pub struct AlignmentReport {
    #[serde(rename = "R_est", serialize_with = "sig17_rows")]
    pub r_est: Vec<Vec<f64>>,
    /// Translation factor of `R_est = R_b R_U`.
    #[serde(serialize_with = "sig17_vec")]
    pub b: Vec<f64>,
    #[serde(rename = "U", serialize_with = "sig17_rows")]
    pub u: Vec<Vec<f64>>,
    #[serde(serialize_with = "sig17_vec")]
    pub target_centroid: Vec<f64>,
    #[serde(serialize_with = "sig17_vec")]
    pub source_centroid: Vec<f64>,
    #[serde(rename = "U_hat", serialize_with = "sig17_rows")]
    pub u_hat: Vec<Vec<f64>>,
    #[serde(serialize_with = "sig17")]
    pub residual: f64,
    pub refined: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
}

impl AlignmentReport {
    pub fn new(result: &AlignmentResult, iterations: Option<usize>) -> Result<Self> {
        let iso = IsometryReport::new(&result.isometry)?;
        Ok(Self {
            r_est: iso.matrix,
            b: iso.b,
            u: iso.u,
            target_centroid: result.target_centroid.vector().as_slice().to_vec(),
            source_centroid: result.source_centroid.vector().as_slice().to_vec(),
            u_hat: matrix_rows(result.rotation.matrix()),
            residual: result.residual,
            refined: iterations.is_some(),
            iterations,
        })
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize, W: Write>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_results(path: &Path, report: &AlignmentReport) -> Result<()> {
    write_json(report, BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn sample_set() -> PointSet {
        PointSet::from_params(&[
            dvector![0.1, -2.5],
            dvector![1.0 / 3.0, 0.7],
            dvector![-4.0, 1e-9],
        ])
        .unwrap()
    }

    #[test]
    fn formatting_has_17_digits() {
        assert_eq!(fmt17(1.0), "1.0000000000000000e0");
        assert_eq!(fmt17(-0.1), "-1.0000000000000001e-1");
        assert_eq!(fmt17(f64::INFINITY), "inf");
        for x in [1.0 / 3.0, std::f64::consts::PI, 1e-300, 123456.789] {
            assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_round_trip() {
        let set = sample_set();
        for model in [Model::Loid, Model::Euclidean, Model::Poincare] {
            let mut buf = Vec::new();
            write_pointset_to(&set, FileFormat::Csv, model, &mut buf).unwrap();
            let back = parse_pointset_csv(
                buf.as_slice(),
                &ReadOptions {
                    model: Some(model),
                    relift: false,
                },
            )
            .unwrap();
            for (a, b) in set.iter().zip(&back) {
                assert!((a.coords() - b.coords()).amax() <= 1e-12 * a.coords().amax().max(1.0));
            }
        }
        let mut buf = Vec::new();
        write_pointset_to(&set, FileFormat::Csv, Model::Loid, &mut buf).unwrap();
        let back = parse_pointset_csv(buf.as_slice(), &ReadOptions::default()).unwrap();
        for (a, b) in set.iter().zip(&back) {
            assert!((a.coords() - b.coords()).amax() <= 1e-15 * a.coords().amax());
        }
    }

    #[test]
    fn json_round_trip() {
        let set = sample_set();
        let mut buf = Vec::new();
        write_pointset_to(&set, FileFormat::Json, Model::Loid, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("\"model\": \"loid\""));
        let back = parse_pointset_json(&text, &ReadOptions::default()).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn csv_row_width_mismatch() {
        let text = "x0,x1,x2\n1,0,0\n1,0\n";
        let err = parse_pointset_csv(text.as_bytes(), &ReadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse(_)), "{err}");
    }

    #[test]
    fn euclidean_rows_are_lifted() {
        let text = "z1,z2\n3,4\n0,0\n";
        let opts = ReadOptions {
            model: Some(Model::Euclidean),
            relift: false,
        };
        let set = parse_pointset_csv(text.as_bytes(), &opts).unwrap();
        assert_eq!(set.dim(), 2);
        assert_eq!(set.points()[0].as_slice(), &[26f64.sqrt(), 3.0, 4.0]);
        assert_eq!(set.points()[1], LoidPoint::origin(2));
    }

    #[test]
    fn off_manifold_rows() {
        let text = "x0,x1,x2\n2,3,4\n";
        let err = parse_pointset_csv(text.as_bytes(), &ReadOptions::default()).unwrap_err();
        assert!(err.to_string().contains("off the hyperboloid"), "{err}");
        let set = parse_pointset_csv(
            text.as_bytes(),
            &ReadOptions {
                model: None,
                relift: true,
            },
        )
        .unwrap();
        assert_eq!(set.points()[0].as_slice(), &[26f64.sqrt(), 3.0, 4.0]);
    }

    #[test]
    fn json_validation() {
        let ok = r#"{"model":"euclidean","d":2,"n":1,"rows":[[0.5,0.5]]}"#;
        assert!(parse_pointset_json(ok, &ReadOptions::default()).is_ok());
        let wrong_n = r#"{"model":"euclidean","d":2,"n":2,"rows":[[0.5,0.5]]}"#;
        assert!(parse_pointset_json(wrong_n, &ReadOptions::default()).is_err());
        let wrong_d = r#"{"model":"loid","d":2,"n":1,"rows":[[1.0,0.0]]}"#;
        assert!(parse_pointset_json(wrong_d, &ReadOptions::default()).is_err());
        let conflict = ReadOptions {
            model: Some(Model::Loid),
            relift: false,
        };
        assert!(parse_pointset_json(ok, &conflict).is_err());
        let outside = r#"{"model":"poincare","d":2,"n":1,"rows":[[0.8,0.8]]}"#;
        assert!(parse_pointset_json(outside, &ReadOptions::default()).is_err());
        let empty = r#"{"model":"loid","d":2,"n":0,"rows":[]}"#;
        assert!(matches!(
            parse_pointset_json(empty, &ReadOptions::default()),
            Err(Error::EmptySet)
        ));
    }

    #[test]
    fn weights_parsing() {
        assert_eq!(
            parse_weights("1, 2\n3.5\n", FileFormat::Csv).unwrap(),
            vec![1.0, 2.0, 3.5]
        );
        assert_eq!(
            parse_weights("[1, 0.5]", FileFormat::Json).unwrap(),
            vec![1.0, 0.5]
        );
        assert!(parse_weights("1, x", FileFormat::Csv).is_err());
    }

    #[test]
    fn model_names() {
        for m in [Model::Loid, Model::Poincare, Model::Euclidean] {
            assert_eq!(m.name().parse::<Model>().unwrap(), m);
        }
        assert!("klein".parse::<Model>().is_err());
    }

    #[test]
    fn report_numbers_are_raw_17_digit() {
        let r = HUnitary::identity(1);
        let rep = IsometryReport::new(&r).unwrap();
        let mut buf = Vec::new();
        write_json(&rep, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("1.0000000000000000e0"), "{text}");
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["R"][0][0].as_f64(), Some(1.0));
    }
}

//! Versioned CSV/JSON file formats.
//!
//! Tabular files start with a `# {json}` line carrying the schema tag and
//! metadata, followed by an ordinary CSV table. Floats are written in their
//! shortest round-trip form so a write/read cycle is lossless.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prior::{Grid1d, SeabedCurve};
use crate::samplers::{ChainSample, SampleSet};
use crate::solver::{Measurement, MeasurementMeta};

pub const MEASUREMENT_SCHEMA: &str = "seabed-measurement/1";
pub const CURVE_SCHEMA: &str = "seabed-curve/1";
pub const SAMPLES_SCHEMA: &str = "seabed-samples/1";

/// Writes `bytes` to a temporary sibling of `path`, then renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn header_line<T: Serialize>(header: &T) -> Result<Vec<u8>> {
    let mut out = b"# ".to_vec();
    serde_json::to_writer(&mut out, header)?;
    out.push(b'\n');
    Ok(out)
}

/// Splits a tabular file into its JSON header and a CSV reader over the rest.
fn open_table<T: for<'de> Deserialize<'de>>(
    bytes: &[u8],
    schema: &str,
) -> Result<(T, csv::Reader<std::io::Cursor<Vec<u8>>>)> {
    let mut reader = BufReader::new(bytes);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let json = first
        .strip_prefix("# ")
        .ok_or_else(|| Error::Format("missing '# {json}' header line".into()))?;
    let value: serde_json::Value = serde_json::from_str(json.trim_end())?;
    match value.get("schema").and_then(|s| s.as_str()) {
        Some(s) if s == schema => {}
        other => return Err(Error::Format(format!("expected schema {schema}, found {other:?}"))),
    }
    let header = serde_json::from_value(value)?;
    let mut rest = Vec::new();
    reader.read_to_end(&mut rest)?;
    Ok((header, csv::ReaderBuilder::new().has_headers(true).from_reader(std::io::Cursor::new(rest))))
}

fn parse<T: std::str::FromStr>(field: Option<&str>, what: &str) -> Result<T> {
    field
        .ok_or_else(|| Error::Format(format!("missing column {what}")))?
        .trim()
        .parse()
        .map_err(|_| Error::Format(format!("cannot parse {what}")))
}

#[derive(Debug, Serialize, Deserialize)]
struct MeasurementHeader {
    schema: String,
    #[serde(flatten)]
    meta: MeasurementMeta,
    sigma: Option<Vec<f64>>,
    n_time: usize,
}

pub fn measurement_to_bytes(m: &Measurement) -> Result<Vec<u8>> {
    m.check_shape()?;
    let header = MeasurementHeader {
        schema: MEASUREMENT_SCHEMA.into(),
        meta: m.meta.clone(),
        sigma: m.sigma.clone(),
        n_time: m.n_time(),
    };
    let mut out = header_line(&header)?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["freq_idx", "sensor_idx", "time_idx", "value"])?;
        for (i, ch) in m.data.iter().enumerate() {
            for k in 0..m.n_sensor() {
                for (l, snap) in ch.iter().enumerate() {
                    w.write_record([i.to_string(), k.to_string(), l.to_string(), snap[k].to_string()])?;
                }
            }
        }
        w.flush()?;
    }
    Ok(out)
}

pub fn measurement_from_bytes(bytes: &[u8]) -> Result<Measurement> {
    let (header, mut rdr): (MeasurementHeader, _) = open_table(bytes, MEASUREMENT_SCHEMA)?;
    let (nf, ns, nt) = (header.meta.frequencies.len(), header.meta.sensor_xs.len(), header.n_time);
    let mut data = vec![vec![vec![f64::NAN; ns]; nt]; nf];
    let mut count = 0usize;
    for rec in rdr.records() {
        let rec = rec?;
        let (i, k, l): (usize, usize, usize) =
            (parse(rec.get(0), "freq_idx")?, parse(rec.get(1), "sensor_idx")?, parse(rec.get(2), "time_idx")?);
        if i >= nf || k >= ns || l >= nt {
            return Err(Error::Format(format!("entry ({i}, {k}, {l}) outside {nf}x{ns}x{nt}")));
        }
        data[i][l][k] = parse(rec.get(3), "value")?;
        count += 1;
    }
    if count != nf * ns * nt {
        return Err(Error::Format(format!("{count} entries for a {nf}x{ns}x{nt} tensor")));
    }
    let m = Measurement { data, sigma: header.sigma, meta: header.meta };
    m.check_shape()?;
    Ok(m)
}

pub fn write_measurement(path: &Path, m: &Measurement) -> Result<()> {
    atomic_write(path, &measurement_to_bytes(m)?)
}

pub fn read_measurement(path: &Path) -> Result<Measurement> {
    measurement_from_bytes(&fs::read(path)?)
}

/// JSON sidecar of a curve file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub schema: String,
    pub coeffs: Option<Vec<f64>>,
    pub s: Option<f64>,
    pub ell: Option<f64>,
    pub n_kl: Option<usize>,
    pub seed: Option<u64>,
    pub mean_offset: f64,
}

impl CurveMeta {
    pub fn new(curve: &SeabedCurve, ell: Option<f64>, seed: Option<u64>) -> Self {
        Self {
            schema: CURVE_SCHEMA.into(),
            n_kl: curve.coeffs.as_ref().map(Vec::len),
            coeffs: curve.coeffs.clone(),
            s: curve.s,
            ell,
            seed,
            mean_offset: curve.mean_offset,
        }
    }
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    path.with_extension("json")
}

pub fn curve_to_bytes(curve: &SeabedCurve) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["x", "h"])?;
        for (m, v) in curve.values.iter().enumerate() {
            w.write_record([curve.grid.x(m).to_string(), v.to_string()])?;
        }
        w.flush()?;
    }
    Ok(out)
}

/// Writes `path` (x, h) and its JSON sidecar.
pub fn write_curve(path: &Path, curve: &SeabedCurve, meta: &CurveMeta) -> Result<()> {
    atomic_write(path, &curve_to_bytes(curve)?)?;
    atomic_write(&sidecar_path(path), &serde_json::to_vec_pretty(meta)?)
}

/// Reads a curve; the grid must be uniform. The sidecar is optional.
pub fn read_curve(path: &Path) -> Result<SeabedCurve> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut xs = Vec::new();
    let mut hs = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        xs.push(parse::<f64>(rec.get(0), "x")?);
        hs.push(parse::<f64>(rec.get(1), "h")?);
    }
    if xs.len() < 2 {
        return Err(Error::Format("curve needs at least two points".into()));
    }
    let grid = Grid1d::new(xs[0], xs[xs.len() - 1], xs.len())?;
    for (m, &x) in xs.iter().enumerate() {
        if (grid.x(m) - x).abs() > 1e-9 * (1.0 + x.abs()) {
            return Err(Error::Format(format!("curve grid is not uniform at row {m}")));
        }
    }
    let side = sidecar_path(path);
    let meta: Option<CurveMeta> = if side.exists() { Some(serde_json::from_slice(&fs::read(side)?)?) } else { None };
    Ok(SeabedCurve {
        grid,
        values: hs,
        coeffs: meta.as_ref().and_then(|m| m.coeffs.clone()),
        s: meta.as_ref().and_then(|m| m.s),
        mean_offset: meta.as_ref().map_or(0.0, |m| m.mean_offset),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct SamplesHeader {
    schema: String,
    n_kl: usize,
    beta_h: f64,
    beta_s: f64,
}

pub fn samples_to_bytes(set: &SampleSet) -> Result<Vec<u8>> {
    let header = SamplesHeader { schema: SAMPLES_SCHEMA.into(), n_kl: set.n_kl, beta_h: set.beta_h, beta_s: set.beta_s };
    let mut out = header_line(&header)?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let mut cols: Vec<String> =
            ["iteration", "walker", "s", "phi", "accepted_h_rate", "accepted_s_rate"].map(String::from).to_vec();
        cols.extend((1..=set.n_kl).map(|j| format!("beta_{j}")));
        w.write_record(&cols)?;
        for c in &set.samples {
            if c.coeffs.len() != set.n_kl {
                return Err(Error::Shape(format!("sample has {} coefficients, set has {}", c.coeffs.len(), set.n_kl)));
            }
            let mut row = vec![
                c.iteration.to_string(),
                c.walker.to_string(),
                c.s.to_string(),
                c.phi.to_string(),
                c.accepted_h_rate.to_string(),
                c.accepted_s_rate.to_string(),
            ];
            row.extend(c.coeffs.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    Ok(out)
}

pub fn samples_from_bytes(bytes: &[u8]) -> Result<SampleSet> {
    let (header, mut rdr): (SamplesHeader, _) = open_table(bytes, SAMPLES_SCHEMA)?;
    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 6 + header.n_kl {
            return Err(Error::Format(format!("row has {} columns, expected {}", rec.len(), 6 + header.n_kl)));
        }
        samples.push(ChainSample {
            iteration: parse(rec.get(0), "iteration")?,
            walker: parse(rec.get(1), "walker")?,
            s: parse(rec.get(2), "s")?,
            phi: parse(rec.get(3), "phi")?,
            accepted_h_rate: parse(rec.get(4), "accepted_h_rate")?,
            accepted_s_rate: parse(rec.get(5), "accepted_s_rate")?,
            coeffs: (0..header.n_kl).map(|j| parse(rec.get(6 + j), "beta")).collect::<Result<_>>()?,
        });
    }
    Ok(SampleSet { n_kl: header.n_kl, samples, beta_h: header.beta_h, beta_s: header.beta_s })
}

pub fn write_samples(path: &Path, set: &SampleSet) -> Result<()> {
    atomic_write(path, &samples_to_bytes(set)?)
}

pub fn read_samples(path: &Path) -> Result<SampleSet> {
    samples_from_bytes(&fs::read(path)?)
}

/// Writes rows of named columns as CSV.
pub fn write_columns(path: &Path, names: &[&str], columns: &[&[f64]]) -> Result<()> {
    let n = columns.first().map_or(0, |c| c.len());
    if names.len() != columns.len() || columns.iter().any(|c| c.len() != n) {
        return Err(Error::Shape("column names and lengths disagree".into()));
    }
    let mut out = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(names)?;
        for i in 0..n {
            w.write_record(columns.iter().map(|c| c[i].to_string()))?;
        }
        w.flush()?;
    }
    atomic_write(path, &out)
}

//! On-disk formats. Every writer is deterministic and every reader accepts
//! exactly what the writer produces, so write → read → write is
//! byte-identical.

use crate::config::sha256_hex;
use crate::error::{CliError, CliResult};
use radiomap::diffraction::VoglerConfig;
use radiomap::propagation::{IndicatorMode, Measurement, Metrics, PathLossParams, RadioMapModel};
use radiomap::relay::{RelayQuery, RelayResult, SearchMode};
use radiomap::stn::ScatterRegressor;
use radiomap::{GridSpec, Link, ObstacleMap, Point2, Point3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const MAP_SCHEMA: &str = "radiomap-obstacle-map/1";
pub const MODEL_SCHEMA: &str = "radiomap-model/1";
pub const GRID_SCHEMA: &str = "radiomap-grid/1";
pub const METRICS_SCHEMA: &str = "radiomap-metrics/1";
pub const RELAY_SCHEMA: &str = "radiomap-relay/1";
pub const CSV_HEADER: [&str; 7] = ["tx_x", "tx_y", "tx_z", "rx_x", "rx_y", "rx_z", "atten_db"];

/// 1-based line and column of a byte offset.
pub fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn parse_json<T: DeserializeOwned>(path: &Path, text: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| CliError::parse(path, e.line(), e.column(), e.to_string()))
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("value serializes");
    s.push('\n');
    s
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn check_schema(path: &Path, found: &str, want: &str) -> CliResult<()> {
    if found != want {
        return Err(CliError::new("schema", format!("expected schema {want}, found {found}")).at(path));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[allow(non_snake_case)]
#[serde(deny_unknown_fields)]
struct MapHeader {
    schema: String,
    M1: usize,
    M2: usize,
    cell_size: f64,
    origin: [f64; 2],
}

/// JSON header line, then one line of space-separated heights per row.
pub fn map_to_string(h: &ObstacleMap) -> String {
    let g = h.grid();
    let header = MapHeader {
        schema: MAP_SCHEMA.into(),
        M1: g.rows,
        M2: g.cols,
        cell_size: g.cell_size,
        origin: [g.origin.x, g.origin.y],
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for r in 0..g.rows {
        for c in 0..g.cols {
            if c > 0 {
                out.push(' ');
            }
            write!(out, "{}", h.height(r, c)).expect("string write");
        }
        out.push('\n');
    }
    out
}

pub fn map_from_str(path: &Path, text: &str) -> CliResult<ObstacleMap> {
    let mut lines = text.split_terminator('\n');
    let first = lines.next().ok_or_else(|| CliError::parse(path, 1, 1, "empty obstacle map file"))?;
    let probe: serde_json::Value = parse_json(path, first)?;
    if let Some(s) = probe.get("schema").and_then(|s| s.as_str()) {
        check_schema(path, s, MAP_SCHEMA)?;
    }
    let header: MapHeader = parse_json(path, first)?;
    let grid = GridSpec::new(header.M1, header.M2, header.cell_size, Point2::new(header.origin[0], header.origin[1]))
        .map_err(|e| CliError::parse(path, 1, 1, e.to_string()))?;
    let mut heights = Vec::with_capacity(grid.len());
    let mut rows = 0usize;
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        if rows == grid.rows {
            return Err(CliError::parse(path, lineno, 1, format!("expected {} rows", grid.rows)));
        }
        let mut count = 0usize;
        let mut col = 1usize;
        for tok in line.split(' ') {
            let v: f64 = tok
                .parse()
                .map_err(|_| CliError::parse(path, lineno, col, format!("not a number: {tok:?}")))?;
            if !v.is_finite() {
                return Err(CliError::parse(path, lineno, col, "heights must be finite"));
            }
            heights.push(v);
            count += 1;
            col += tok.chars().count() + 1;
        }
        if count != grid.cols {
            return Err(CliError::parse(path, lineno, col, format!("expected {} values, found {count}", grid.cols)));
        }
        rows += 1;
    }
    if rows != grid.rows {
        return Err(CliError::parse(path, rows + 2, 1, format!("expected {} rows, found {rows}", grid.rows)));
    }
    ObstacleMap::new(grid, heights).map_err(|e| CliError::from(e).at(path))
}

pub fn read_map(path: &Path) -> CliResult<ObstacleMap> {
    map_from_str(path, &read_text(path)?)
}

pub fn measurements_to_string(data: &[Measurement]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for m in data {
        let (t, r) = (m.link.tx, m.link.rx);
        w.write_record([t.x, t.y, t.z, r.x, r.y, r.z, m.y].map(|v| v.to_string()))
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

pub fn measurements_from_str(path: &Path, text: &str) -> CliResult<Vec<Measurement>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| CliError::parse(path, 1, 1, e.to_string()))?
        .clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(CliError::parse(path, 1, 1, format!("header must be {}", CSV_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            CliError::parse(path, line, 1, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let mut v = [0.0; 7];
        let mut col = 1usize;
        for (k, field) in rec.iter().enumerate() {
            v[k] = field
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::parse(path, line, col, format!("not a finite number: {field:?}")))?;
            col += field.chars().count() + 1;
        }
        let link = Link::new(Point3::new(v[0], v[1], v[2]), Point3::new(v[3], v[4], v[5]))
            .map_err(|e| CliError::parse(path, line, 1, e.to_string()))?;
        out.push(Measurement { link, y: v[6] });
    }
    Ok(out)
}

pub fn read_measurements(path: &Path) -> CliResult<Vec<Measurement>> {
    measurements_from_str(path, &read_text(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapRef {
    /// Relative to the model file's directory unless absolute.
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Training {
    pub loss: f64,
    pub epochs_run: usize,
    pub history: Vec<f64>,
    pub optimizer: String,
    pub los_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema: String,
    pub map: MapRef,
    pub path_loss: PathLossParams,
    pub scatter: ScatterRegressor,
    pub pooling: String,
    pub vogler: VoglerConfig,
    pub eccentricity: f64,
    pub indicator: IndicatorMode,
    pub nmae_definition: String,
    pub training: Training,
}

impl ModelFile {
    pub fn from_str(path: &Path, text: &str) -> CliResult<Self> {
        let probe: serde_json::Value = parse_json(path, text)?;
        if let Some(s) = probe.get("schema").and_then(|s| s.as_str()) {
            check_schema(path, s, MODEL_SCHEMA)?;
        }
        parse_json(path, text)
    }

    /// Loads the referenced map, checking its hash, and assembles the model.
    pub fn load(path: &Path) -> CliResult<RadioMapModel> {
        let m = Self::from_str(path, &read_text(path)?)?;
        let map_path = if m.map.path.is_absolute() {
            m.map.path.clone()
        } else {
            path.parent().unwrap_or(Path::new("")).join(&m.map.path)
        };
        let text = read_text(&map_path)?;
        let digest = sha256_hex(text.as_bytes());
        if digest != m.map.sha256 {
            return Err(CliError::new("hash_mismatch", format!("obstacle map hash {digest} does not match model ({})", m.map.sha256))
                .at(&map_path));
        }
        let model = RadioMapModel {
            map: map_from_str(&map_path, &text)?,
            los: m.path_loss,
            vogler: m.vogler,
            scatter: m.scatter,
            eccentricity: m.eccentricity,
            indicator: m.indicator,
        };
        model.validate().map_err(|e| CliError::from(e).at(path))?;
        Ok(model)
    }
}

/// Attenuation over a receiver lattice for one transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub schema: String,
    pub rows: usize,
    pub cols: usize,
    pub cell_size: f64,
    pub origin: Point2,
    pub tx: Point3,
    pub rx_height: f64,
    pub unit: String,
    /// Row-major, `values[r][c]` at the centre of cell `(r, c)`.
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsFile {
    pub schema: String,
    pub nmae_definition: String,
    pub model: Metrics,
    pub distance_baseline: Option<Metrics>,
    pub knn_baseline: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExhaustiveRun {
    pub mode: SearchMode,
    pub result: RelayResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelayFile {
    pub schema: String,
    pub query: RelayQuery,
    pub result: RelayResult,
    pub exhaustive: Option<ExhaustiveRun>,
}

/// Reads a JSON document of a known schema.
pub fn read_json<T: DeserializeOwned>(path: &Path, schema: &str) -> CliResult<T> {
    let text = read_text(path)?;
    let probe: serde_json::Value = parse_json(path, &text)?;
    if let Some(s) = probe.get("schema").and_then(|s| s.as_str()) {
        check_schema(path, s, schema)?;
    }
    parse_json(path, &text)
}

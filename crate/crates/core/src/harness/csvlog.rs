use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::workers::MetricsRow;

/// Column order of every per-run CSV.
pub const COLUMNS: [&str; 10] = [
    "wall_clock_s",
    "virtual_time_s",
    "real_env_steps",
    "trajectories",
    "avg_eval_return",
    "std_eval_return",
    "model_val_loss",
    "model_version",
    "policy_version",
    "imagined_steps",
];

/// Column order of the aggregate CSV.
pub const AGGREGATE_COLUMNS: [&str; 5] = ["axis", "x", "mean", "std", "runs"];

/// A per-run log: `# key: value` metadata lines followed by the rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub meta: Vec<(String, String)>,
    pub rows: Vec<MetricsRow>,
}

impl RunLog {
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Abscissa of a learning curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    WallClock,
    /// Real environment transitions.
    Samples,
    Trajectories,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::WallClock, Axis::Samples, Axis::Trajectories];

    pub fn name(self) -> &'static str {
        match self {
            Axis::WallClock => "wall_clock",
            Axis::Samples => "samples",
            Axis::Trajectories => "trajectories",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Axis::WallClock => "wall-clock time (s)",
            Axis::Samples => "real environment steps",
            Axis::Trajectories => "trajectories",
        }
    }

    pub fn of(self, row: &MetricsRow) -> f64 {
        match self {
            Axis::WallClock => row.wall_clock_s,
            Axis::Samples => row.real_env_steps as f64,
            Axis::Trajectories => row.trajectories as f64,
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Axis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown axis '{s}', expected wall_clock, samples or trajectories"))
    }
}

fn row_fields(r: &MetricsRow) -> [String; 10] {
    // `Display` for f64 is the shortest string that parses back exactly.
    [
        r.wall_clock_s.to_string(),
        r.virtual_time_s.to_string(),
        r.real_env_steps.to_string(),
        r.trajectories.to_string(),
        r.avg_eval_return.to_string(),
        r.std_eval_return.to_string(),
        r.model_val_loss.to_string(),
        r.model_version.to_string(),
        r.policy_version.to_string(),
        r.imagined_steps.to_string(),
    ]
}

fn write_meta(out: &mut String, meta: &[(String, String)]) -> Result<()> {
    for (k, v) in meta {
        if k.contains([':', '\n']) || v.contains('\n') {
            return Err(invalid(format!("metadata entry '{k}' cannot be written on one line")));
        }
        out.push_str(&format!("# {k}: {v}\n"));
    }
    Ok(())
}

fn finish_csv(out: &mut String, wtr: csv::Writer<Vec<u8>>) -> Result<()> {
    let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.push_str(std::str::from_utf8(&bytes).map_err(|e| invalid(e.to_string()))?);
    Ok(())
}

pub fn format_run_csv(log: &RunLog) -> Result<String> {
    let mut out = String::new();
    write_meta(&mut out, &log.meta)?;
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(COLUMNS)?;
    for r in &log.rows {
        wtr.write_record(row_fields(r))?;
    }
    finish_csv(&mut out, wtr)?;
    Ok(out)
}

fn split_meta(text: &str) -> Result<(Vec<(String, String)>, &str)> {
    let mut meta = Vec::new();
    let mut rest = text;
    while let Some(line_end) = rest.strip_prefix('#').map(|_| rest.find('\n').unwrap_or(rest.len())) {
        let line = rest[1..line_end].trim();
        let (k, v) = line
            .split_once(':')
            .ok_or_else(|| invalid(format!("metadata line '{line}' lacks a ':'")))?;
        meta.push((k.trim().to_string(), v.trim().to_string()));
        rest = rest.get(line_end + 1..).unwrap_or("");
    }
    Ok((meta, rest))
}

fn check_header(rdr: &mut csv::Reader<&[u8]>, want: &[&str]) -> Result<()> {
    let header = rdr.headers()?;
    if header.iter().ne(want.iter().copied()) {
        return Err(invalid(format!(
            "unexpected CSV header '{}', expected '{}'",
            header.iter().collect::<Vec<_>>().join(","),
            want.join(",")
        )));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let s = rec.get(i).ok_or_else(|| invalid(format!("row {line}: missing column {i}")))?;
    s.parse::<T>().map_err(|e| invalid(format!("row {line}: cannot parse '{s}': {e}")))
}

pub fn parse_run_csv(text: &str) -> Result<RunLog> {
    let (meta, body) = split_meta(text)?;
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    check_header(&mut rdr, &COLUMNS)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let n = i as u64 + 1;
        rows.push(MetricsRow {
            wall_clock_s: field(&rec, 0, n)?,
            virtual_time_s: field(&rec, 1, n)?,
            real_env_steps: field(&rec, 2, n)?,
            trajectories: field(&rec, 3, n)?,
            avg_eval_return: field(&rec, 4, n)?,
            std_eval_return: field(&rec, 5, n)?,
            model_val_loss: field(&rec, 6, n)?,
            model_version: field(&rec, 7, n)?,
            policy_version: field(&rec, 8, n)?,
            imagined_steps: field(&rec, 9, n)?,
        });
    }
    Ok(RunLog { meta, rows })
}

pub fn write_run_csv(path: &Path, log: &RunLog) -> Result<()> {
    std::fs::write(path, format_run_csv(log)?)?;
    Ok(())
}

pub fn read_run_csv(path: &Path) -> Result<RunLog> {
    parse_run_csv(&std::fs::read_to_string(path)?)
}

/// Mean and population std across runs at one abscissa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregatePoint {
    pub x: f64,
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

/// Linear interpolation of `(x, y)` points sorted by `x`, `None` outside
/// their range. Among equal abscissae the last point wins.
pub fn interpolate(points: &[(f64, f64)], x: f64) -> Option<f64> {
    let first = points.first()?;
    let last = points.last()?;
    if x < first.0 || x > last.0 {
        return None;
    }
    let hi = points.partition_point(|p| p.0 <= x);
    if hi == 0 {
        return None;
    }
    let (x0, y0) = points[hi - 1];
    if x0 == x || hi == points.len() {
        return Some(y0);
    }
    let (x1, y1) = points[hi];
    Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

/// Learning curve `axis → avg_eval_return` of one run.
pub fn curve(rows: &[MetricsRow], axis: Axis) -> Vec<(f64, f64)> {
    curve_of(rows, axis, |r| r.avg_eval_return)
}

pub(crate) fn curve_of(rows: &[MetricsRow], axis: Axis, y: impl Fn(&MetricsRow) -> f64) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = rows.iter().map(|r| (axis.of(r), y(r))).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts
}

/// Mean ± std across curves on the union of their abscissae, restricted to
/// the range every curve covers.
pub fn aggregate_curves(curves: &[Vec<(f64, f64)>]) -> Result<Vec<AggregatePoint>> {
    if curves.is_empty() || curves.iter().any(|c| c.is_empty()) {
        return Err(invalid("aggregation needs at least one nonempty curve"));
    }
    let lo = curves.iter().map(|c| c[0].0).fold(f64::NEG_INFINITY, f64::max);
    let hi = curves.iter().map(|c| c[c.len() - 1].0).fold(f64::INFINITY, f64::min);
    let mut grid: Vec<f64> = curves
        .iter()
        .flat_map(|c| c.iter().map(|p| p.0))
        .filter(|&x| x >= lo && x <= hi)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut out = Vec::with_capacity(grid.len());
    for x in grid {
        let ys: Vec<f64> = curves.iter().filter_map(|c| interpolate(c, x)).collect();
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
        out.push(AggregatePoint {
            x,
            mean,
            std: var.sqrt(),
            runs: ys.len(),
        });
    }
    Ok(out)
}

pub fn aggregate(logs: &[RunLog], axis: Axis) -> Result<Vec<AggregatePoint>> {
    let curves: Vec<_> = logs.iter().map(|l| curve(&l.rows, axis)).collect();
    aggregate_curves(&curves)
}

/// Aggregate CSV holding one block per axis.
pub fn format_aggregate_csv(meta: &[(String, String)], blocks: &[(Axis, Vec<AggregatePoint>)]) -> Result<String> {
    let mut out = String::new();
    write_meta(&mut out, meta)?;
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(AGGREGATE_COLUMNS)?;
    for (axis, points) in blocks {
        for p in points {
            wtr.write_record([
                axis.name().to_string(),
                p.x.to_string(),
                p.mean.to_string(),
                p.std.to_string(),
                p.runs.to_string(),
            ])?;
        }
    }
    finish_csv(&mut out, wtr)?;
    Ok(out)
}

pub fn parse_aggregate_csv(text: &str) -> Result<(Vec<(String, String)>, Vec<(Axis, AggregatePoint)>)> {
    let (meta, body) = split_meta(text)?;
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    check_header(&mut rdr, &AGGREGATE_COLUMNS)?;
    let mut points = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let n = i as u64 + 1;
        let axis: Axis = field::<String>(&rec, 0, n)?.parse().map_err(invalid)?;
        points.push((
            axis,
            AggregatePoint {
                x: field(&rec, 1, n)?,
                mean: field(&rec, 2, n)?,
                std: field(&rec, 3, n)?,
                runs: field(&rec, 4, n)?,
            },
        ));
    }
    Ok((meta, points))
}

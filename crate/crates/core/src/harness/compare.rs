use super::csvlog::{aggregate, aggregate_curves, curve_of, interpolate, Axis, RunLog};
use super::solved_threshold;
use crate::error::{invalid, Error, Result};

/// One side of a comparison, aggregated across its seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSummary {
    pub env: String,
    pub mode: String,
    pub runs: usize,
    /// Mean over runs of the last logged evaluation return.
    pub final_return: f64,
    /// First logged trajectory count at which the seed-averaged curve
    /// reaches the threshold.
    pub trajectories_to_threshold: Option<f64>,
    /// Seed-averaged wall clock at that trajectory count.
    pub wall_clock_to_threshold: Option<f64>,
    /// Reference trajectories to threshold over this side's.
    pub sample_efficiency_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// 90% of the reference side's final return.
    pub threshold: f64,
    pub rows: Vec<ModeSummary>,
}

fn side(logs: &[RunLog], threshold: f64) -> Result<ModeSummary> {
    let curve = aggregate(logs, Axis::Trajectories)?;
    let clocks: Vec<_> = logs.iter().map(|l| curve_of(&l.rows, Axis::Trajectories, |r| r.wall_clock_s)).collect();
    let clock = aggregate_curves(&clocks)?;
    let clock_pts: Vec<(f64, f64)> = clock.iter().map(|p| (p.x, p.mean)).collect();
    let hit = curve.iter().find(|p| p.mean >= threshold).map(|p| p.x);
    let final_return = logs.iter().map(|l| l.rows[l.rows.len() - 1].avg_eval_return).sum::<f64>() / logs.len() as f64;
    let meta = |k: &str| logs[0].meta_value(k).unwrap_or("").to_string();
    Ok(ModeSummary {
        env: meta("env"),
        mode: meta("mode"),
        runs: logs.len(),
        final_return,
        trajectories_to_threshold: hit,
        wall_clock_to_threshold: hit.and_then(|x| interpolate(&clock_pts, x)),
        sample_efficiency_ratio: None,
    })
}

fn sorted(logs: &[RunLog]) -> Result<Vec<RunLog>> {
    if logs.is_empty() || logs.iter().any(|l| l.rows.is_empty()) {
        return Err(invalid("comparison needs nonempty logs on both sides"));
    }
    Ok(logs
        .iter()
        .map(|l| {
            let mut l = l.clone();
            l.rows.sort_by_key(|r| r.trajectories);
            l
        })
        .collect())
}

/// Compares a candidate (typically async) against a reference (typically
/// sync). The threshold is 90% of the reference's final return.
pub fn compare_summary(candidate: &[RunLog], reference: &[RunLog]) -> Result<Comparison> {
    let candidate = sorted(candidate)?;
    let reference = sorted(reference)?;
    let ref_final =
        reference.iter().map(|l| l.rows[l.rows.len() - 1].avg_eval_return).sum::<f64>() / reference.len() as f64;
    let threshold = solved_threshold(ref_final);
    let mut a = side(&candidate, threshold)?;
    let mut b = side(&reference, threshold)?;
    let ratio = |x: &ModeSummary| match (b.trajectories_to_threshold, x.trajectories_to_threshold) {
        (Some(r), Some(c)) if r == c => Some(1.0),
        (Some(r), Some(c)) => Some(r / c),
        _ => None,
    };
    a.sample_efficiency_ratio = ratio(&a);
    b.sample_efficiency_ratio = ratio(&b);
    Ok(Comparison {
        threshold,
        rows: vec![a, b],
    })
}

const HEADER: [&str; 8] = [
    "env",
    "mode",
    "runs",
    "final_return",
    "threshold",
    "trajectories_to_threshold",
    "wall_clock_to_threshold",
    "sample_efficiency_ratio",
];

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| x.to_string())
}

impl Comparison {
    fn records(&self) -> Vec<[String; 8]> {
        self.rows
            .iter()
            .map(|r| {
                [
                    r.env.clone(),
                    r.mode.clone(),
                    r.runs.to_string(),
                    r.final_return.to_string(),
                    self.threshold.to_string(),
                    opt(r.trajectories_to_threshold),
                    opt(r.wall_clock_to_threshold),
                    opt(r.sample_efficiency_ratio),
                ]
            })
            .collect()
    }

    /// Columns padded to their widest cell.
    pub fn to_table(&self) -> String {
        let recs = self.records();
        let widths: Vec<usize> = (0..HEADER.len())
            .map(|i| recs.iter().map(|r| r[i].len()).chain([HEADER[i].len()]).max().unwrap_or(0))
            .collect();
        let line = |cells: Vec<&str>| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = line(HEADER.to_vec());
        out.push('\n');
        for r in &recs {
            out.push_str(&line(r.iter().map(String::as_str).collect()));
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(HEADER)?;
        for r in self.records() {
            wtr.write_record(r)?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| invalid(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::super::csvlog::tests::row;
    use super::*;

    fn log(mode: &str, curve: &[(u64, f64, f64)]) -> RunLog {
        RunLog {
            meta: vec![("env".into(), "pendulum".into()), ("mode".into(), mode.into())],
            rows: curve.iter().map(|&(t, w, r)| row(t, w, r)).collect(),
        }
    }

    #[test]
    fn identical_inputs_have_unit_ratios() {
        let l = vec![log("sync", &[(0, 0.0, -100.0), (20, 10.0, -50.0), (40, 20.0, -10.0)])];
        let c = compare_summary(&l, &l).unwrap();
        assert!(c.rows.iter().all(|r| r.sample_efficiency_ratio == Some(1.0)));
        assert_eq!(c.rows[0], c.rows[1]);
    }

    #[test]
    fn forty_versus_sixty_is_one_and_a_half() {
        let a = vec![log("async_virtual", &[(0, 0.0, -100.0), (20, 5.0, -50.0), (40, 10.0, -10.0), (80, 20.0, -9.0)])];
        let s = vec![log("sync", &[(0, 0.0, -100.0), (20, 30.0, -80.0), (40, 60.0, -40.0), (60, 90.0, -10.0), (80, 120.0, -10.0)])];
        let c = compare_summary(&a, &s).unwrap();
        assert_eq!(c.threshold, -11.0);
        assert_eq!(c.rows[0].trajectories_to_threshold, Some(40.0));
        assert_eq!(c.rows[1].trajectories_to_threshold, Some(60.0));
        assert_eq!(c.rows[0].sample_efficiency_ratio, Some(1.5));
        assert_eq!(c.rows[0].wall_clock_to_threshold, Some(10.0));
        assert_eq!(c.rows[1].wall_clock_to_threshold, Some(90.0));
        assert_eq!(c.rows[0].final_return, -9.0);
    }

    #[test]
    fn unreached_threshold_is_na() {
        let a = vec![log("model_free", &[(0, 0.0, -100.0), (10, 1.0, -90.0)])];
        let s = vec![log("sync", &[(0, 0.0, -100.0), (10, 1.0, -10.0)])];
        let c = compare_summary(&a, &s).unwrap();
        assert_eq!(c.rows[0].trajectories_to_threshold, None);
        assert_eq!(c.rows[0].sample_efficiency_ratio, None);
        assert!(c.to_table().lines().nth(1).unwrap().contains("n/a"));
    }

    #[test]
    fn table_and_csv_agree() {
        let l = vec![log("sync", &[(0, 0.0, -100.0), (10, 1.0, -10.0)])];
        let c = compare_summary(&l, &l).unwrap();
        let table = c.to_table();
        let csv = c.to_csv().unwrap();
        for (t, r) in table.lines().zip(csv.lines()) {
            assert_eq!(t.split_whitespace().collect::<Vec<_>>(), r.split(',').collect::<Vec<_>>());
        }
        assert!(compare_summary(&[], &l).is_err());
    }
}

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{svg, Artifacts, Histogram, OutputKind, RunSummary, ScenarioError};
use crate::dynamics::Trajectory;

/// 17 significant digits in scientific notation; round-trips every finite f64.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// `t,y1[,y2]` rows for each trajectory in order; a header alone when empty.
pub fn trajectories_csv(trajs: &[Trajectory]) -> String {
    let width = trajs
        .first()
        .and_then(|t| t.configs.first())
        .map_or(1, |c| c.coords.len());
    let mut out = String::from("t");
    for i in 1..=width {
        let _ = write!(out, ",y{i}");
    }
    out.push('\n');
    for tr in trajs {
        for (t, c) in tr.times.iter().zip(&tr.configs) {
            out.push_str(&format_float(*t));
            for y in &c.coords {
                out.push(',');
                out.push_str(&format_float(*y));
            }
            out.push('\n');
        }
    }
    out
}

pub fn histogram_csv(h: Option<&Histogram>) -> String {
    let mut out = String::from("bin_lo,bin_hi,count\n");
    if let Some(h) = h {
        for (i, c) in h.counts.iter().enumerate() {
            let (lo, hi) = h.edges(i);
            let _ = writeln!(out, "{},{},{c}", format_float(lo), format_float(hi));
        }
    }
    out
}

fn check_finite(v: &serde_json::Value, path: &str) -> Result<(), ScenarioError> {
    match v {
        serde_json::Value::Null => Err(ScenarioError::Serialization(format!(
            "non-finite value at {path}"
        ))),
        serde_json::Value::Array(a) => a
            .iter()
            .enumerate()
            .try_for_each(|(i, x)| check_finite(x, &format!("{path}[{i}]"))),
        serde_json::Value::Object(m) => m
            .iter()
            .try_for_each(|(k, x)| check_finite(x, &format!("{path}.{k}"))),
        _ => Ok(()),
    }
}

/// Pretty JSON with keys in declaration / sorted order. Any NaN or infinity is refused.
pub fn summary_json(summary: &RunSummary) -> Result<String, ScenarioError> {
    for (k, s) in &summary.statistics {
        for (field, v) in [("value", s.value), ("tolerance", s.tolerance)] {
            if !v.is_finite() {
                return Err(ScenarioError::Serialization(format!(
                    "statistic {k}.{field} is {v}"
                )));
            }
        }
    }
    let value =
        serde_json::to_value(summary).map_err(|e| ScenarioError::Serialization(e.to_string()))?;
    // Detector bounds may legitimately be infinite; they are the only nullable floats.
    let stats = value.get("statistics").cloned().unwrap_or_default();
    check_finite(&stats, "statistics")?;
    let mut text = serde_json::to_string_pretty(&value)
        .map_err(|e| ScenarioError::Serialization(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

fn write_file(path: &Path, contents: &str) -> Result<(), ScenarioError> {
    fs::write(path, contents).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes every output listed in the summary's config into `dir`.
pub fn write_outputs(
    summary: &RunSummary,
    artifacts: &Artifacts,
    dir: &Path,
) -> Result<(), ScenarioError> {
    fs::create_dir_all(dir).map_err(|source| ScenarioError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for kind in &summary.config.outputs {
        let path = dir.join(kind.file_name());
        let text = match kind {
            OutputKind::TrajectoriesCsv => trajectories_csv(&artifacts.trajectories),
            OutputKind::SummaryJson => summary_json(summary)?,
            OutputKind::HistogramCsv => histogram_csv(artifacts.histogram.as_ref()),
            OutputKind::PlotSvg => svg::render(summary, artifacts),
        };
        write_file(&path, &text)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavemodels::Configuration;

    #[test]
    fn empty_trajectory_list_is_header_only() {
        assert_eq!(trajectories_csv(&[]), "t,y1\n");
        assert_eq!(histogram_csv(None), "bin_lo,bin_hi,count\n");
    }

    #[test]
    fn three_point_trajectory_bytes() {
        let tr = Trajectory {
            times: vec![0.0, 0.5, 1.0],
            configs: vec![
                Configuration::pair(1.0, -1.0),
                Configuration::pair(0.25, 0.1),
                Configuration::pair(-3.0, 1e-20),
            ],
        };
        let expected = "t,y1,y2\n\
0.0000000000000000e0,1.0000000000000000e0,-1.0000000000000000e0\n\
5.0000000000000000e-1,2.5000000000000000e-1,1.0000000000000001e-1\n\
1.0000000000000000e0,-3.0000000000000000e0,9.9999999999999995e-21\n";
        assert_eq!(trajectories_csv(&[tr]), expected);
    }

    #[test]
    fn format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
    }
}

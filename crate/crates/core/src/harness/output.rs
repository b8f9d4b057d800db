//! CSV and SVG emission.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::plot::{line_plot_svg, Series};
use super::sweep::{SummaryRow, SweepResult, TrialRow};
use crate::{Error, Result};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err(path))?;
    // written explicitly so empty files still carry a header
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().map(|row| row.map_err(csv_err(path))).collect()
}

pub const ROW_HEADER: [&str; 8] = ["sweep_value", "trial", "seed", "rate_bits", "rate_user", "rate_eve", "iters", "status"];
pub const SUMMARY_HEADER: [&str; 6] = ["sweep_value", "mean", "median", "p10", "p90", "skip_fraction"];

pub fn write_rows(path: &Path, rows: &[TrialRow]) -> Result<()> {
    write_csv(path, rows, &ROW_HEADER)
}

pub fn read_rows(path: &Path) -> Result<Vec<TrialRow>> {
    read_csv(path)
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    write_csv(path, rows, &SUMMARY_HEADER)
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    read_csv(path)
}

/// Files written for one sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepFiles {
    pub rows: PathBuf,
    pub summary: PathBuf,
    pub plot: PathBuf,
}

/// Writes `<name>.csv`, `<name>_summary.csv` and `<name>.svg` into `out_dir`.
pub fn emit_outputs(result: &SweepResult, out_dir: &Path) -> Result<SweepFiles> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let files = SweepFiles {
        rows: out_dir.join(format!("{}.csv", result.name)),
        summary: out_dir.join(format!("{}_summary.csv", result.name)),
        plot: out_dir.join(format!("{}.svg", result.name)),
    };
    write_rows(&files.rows, &result.rows)?;
    let summary = result.summary();
    write_summary(&files.summary, &summary)?;
    let svg = line_plot_svg(&result.name, &result.axis, "secrecy rate (bit/s/Hz)", &summary_series(&summary));
    fs::write(&files.plot, svg).map_err(io_err(&files.plot))?;
    Ok(files)
}

/// Overlays the medians of several sweeps in one SVG.
pub fn emit_overlay(path: &Path, title: &str, results: &[&SweepResult]) -> Result<()> {
    let Some(first) = results.first() else {
        return Ok(());
    };
    let series: Vec<Series> = results
        .iter()
        .map(|r| Series {
            label: r.name.clone(),
            points: r
                .summary()
                .iter()
                .filter(|s| s.median.is_finite())
                .map(|s| (s.sweep_value, s.median))
                .collect(),
        })
        .collect();
    let svg = line_plot_svg(title, &first.axis, "median secrecy rate (bit/s/Hz)", &series);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, svg).map_err(io_err(path))
}

fn summary_series(summary: &[SummaryRow]) -> Vec<Series> {
    let pick = |label: &str, f: fn(&SummaryRow) -> f64| Series {
        label: label.into(),
        points: summary
            .iter()
            .filter(|s| f(s).is_finite())
            .map(|s| (s.sweep_value, f(s)))
            .collect(),
    };
    vec![
        pick("mean", |s| s.mean),
        pick("median", |s| s.median),
        pick("p10", |s| s.p10),
        pick("p90", |s| s.p90),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Mode;
    use crate::harness::sweep::percentile;

    fn sample() -> SweepResult {
        let mut rows = Vec::new();
        for (i, v) in [5.0, 7.5].iter().enumerate() {
            for t in 0..3 {
                rows.push(TrialRow {
                    sweep_value: *v,
                    trial: t,
                    seed: 100 + t as u64,
                    rate_bits: 0.1 * (t as f64 + 1.0) / 3.0 + i as f64,
                    rate_user: 1.0 / 3.0 + t as f64,
                    rate_eve: 1e-17 * t as f64,
                    iters: t + 4,
                    status: "converged".into(),
                });
            }
        }
        SweepResult {
            name: "sample".into(),
            axis: "x".into(),
            mode: Mode::Continuous,
            values: vec![5.0, 7.5],
            trials: 4,
            skips: vec![1, 1],
            rows,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempdir();
        let r = sample();
        let files = emit_outputs(&r, &dir).unwrap();
        assert_eq!(read_rows(&files.rows).unwrap(), r.rows);
        let summary = read_summary(&files.summary).unwrap();
        assert_eq!(summary, r.summary());
        let text = fs::read_to_string(&files.rows).unwrap();
        assert!(text.starts_with("sweep_value,trial,seed,rate_bits,rate_user,rate_eve,iters,status\n"));
        assert!(!text.contains('\r'));
        assert!(fs::read_to_string(&files.plot).unwrap().starts_with("<svg"));
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn summary_matches_recomputation() {
        let r = sample();
        for (i, s) in r.summary().iter().enumerate() {
            let rates: Vec<f64> = r.rows.iter().filter(|x| x.sweep_value == r.values[i]).map(|x| x.rate_bits).collect();
            assert_eq!(s.median, percentile(&rates, 0.5));
            assert_eq!(s.skip_fraction, 0.25);
        }
    }

    #[test]
    fn empty_result_writes_headers() {
        let dir = tempdir();
        let mut r = sample();
        r.rows.clear();
        let files = emit_outputs(&r, &dir).unwrap();
        assert!(read_rows(&files.rows).unwrap().is_empty());
        assert_eq!(fs::read_to_string(&files.rows).unwrap().lines().count(), 1);
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn unwritable_path_reports_location() {
        let err = emit_outputs(&sample(), Path::new("/proc/definitely/not/here")).unwrap_err();
        assert!(err.to_string().contains("/proc/definitely"), "{err}");
    }

    fn tempdir() -> PathBuf {
        use std::sync::atomic::{AtomicUsize, Ordering};
        static N: AtomicUsize = AtomicUsize::new(0);
        let d = std::env::temp_dir().join(format!(
            "xlris-out-{}-{}",
            std::process::id(),
            N.fetch_add(1, Ordering::SeqCst)
        ));
        let _ = fs::remove_dir_all(&d);
        d
    }
}

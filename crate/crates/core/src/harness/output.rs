//! CSV results and tab-separated plot series.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::{fit_order, ErrorReport, Target};

pub const CSV_HEADER: [&str; 8] = [
    "method", "target", "dt", "T", "trials", "diverged", "err_mean", "err_var",
];

/// Writes one row per report. Floats use Rust's shortest round-trip form.
pub fn emit_csv(reports: &[ErrorReport], path: &Path) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("no reports to write".into()));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in reports {
        w.write_record([
            r.method.clone(),
            r.target.to_string(),
            r.dt.to_string(),
            r.t_len.to_string(),
            r.trials.to_string(),
            r.diverged.to_string(),
            r.err_mean.to_string(),
            r.err_var.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<ErrorReport>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::InvalidArgument(format!(
            "{} does not have the expected header `{}`",
            path.display(),
            CSV_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::InvalidArgument(format!("row {}: bad {what}", line + 2));
        let num = |i: usize, what: &str| rec[i].parse::<f64>().map_err(|_| bad(what));
        out.push(ErrorReport {
            method: rec[0].to_string(),
            target: match &rec[1] {
                "drift" => Target::Drift,
                "diffusion" => Target::Diffusion,
                _ => return Err(bad("target")),
            },
            dt: num(2, "dt")?,
            t_len: num(3, "T")?,
            trials: rec[4].parse().map_err(|_| bad("trials"))?,
            diverged: rec[5].parse().map_err(|_| bad("diverged"))?,
            err_mean: num(6, "err_mean")?,
            err_var: num(7, "err_var")?,
        });
    }
    Ok(out)
}

/// Files written by [`emit_plot_data`] and the panels it had to skip.
#[derive(Debug, Default)]
pub struct PlotOutput {
    pub written: Vec<PathBuf>,
    pub skipped: Vec<String>,
}

fn methods_in_order(reports: &[&ErrorReport]) -> Vec<String> {
    let mut seen = Vec::new();
    for r in reports {
        if !seen.contains(&r.method) {
            seen.push(r.method.clone());
        }
    }
    seen
}

fn write_series(
    path: &Path,
    axis: &str,
    xs: &[f64],
    methods: &[String],
    value: impl Fn(&str, f64) -> Option<f64>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "{axis}")?;
    for m in methods {
        write!(w, "\t{m}")?;
    }
    writeln!(w)?;
    for &x in xs {
        write!(w, "{x}")?;
        for m in methods {
            write!(w, "\t{}", value(m, x).unwrap_or(f64::NAN))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn sorted_unique(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Writes, per target, the three panels `err_mean` vs `dt` and `err_var` vs
/// `dt` (both at the largest `T`), and `err_var` vs `T` at `fixed_dt`.
///
/// Without `fixed_dt` the `dt` with the most `T` values is used. Files are
/// named `{prefix}{target}_{mean_vs_dt,var_vs_dt,var_vs_T}.tsv`, one column
/// per method in report order. Panels lacking two points on their axis are
/// listed in [`PlotOutput::skipped`]; if no panel at all can be written the
/// call fails naming the missing axis.
pub fn emit_plot_data(
    reports: &[ErrorReport],
    prefix: &str,
    fixed_dt: Option<f64>,
) -> Result<PlotOutput> {
    let mut out = PlotOutput::default();
    let targets: BTreeSet<Target> = reports.iter().map(|r| r.target).collect();
    let mut missing = Vec::new();
    for target in targets {
        let rs: Vec<&ErrorReport> = reports.iter().filter(|r| r.target == target).collect();
        let methods = methods_in_order(&rs);
        let lookup = |m: &str, dt: f64, t: f64| {
            rs.iter()
                .find(|r| r.method == m && r.dt == dt && r.t_len == t)
                .copied()
        };

        let t_max = rs.iter().map(|r| r.t_len).fold(f64::NEG_INFINITY, f64::max);
        let dts = sorted_unique(rs.iter().filter(|r| r.t_len == t_max).map(|r| r.dt));
        if dts.len() >= 2 {
            for (name, pick) in [
                (
                    "mean_vs_dt",
                    (|r: &ErrorReport| r.err_mean) as fn(&ErrorReport) -> f64,
                ),
                ("var_vs_dt", |r: &ErrorReport| r.err_var),
            ] {
                let path = PathBuf::from(format!("{prefix}{target}_{name}.tsv"));
                write_series(&path, "dt", &dts, &methods, |m, dt| {
                    lookup(m, dt, t_max).map(pick)
                })?;
                out.written.push(path);
            }
        } else {
            let msg =
                format!("{target}: only one dt at T={t_max}; skipped mean_vs_dt and var_vs_dt");
            missing.push(format!("{target} dt axis"));
            out.skipped.push(msg);
        }

        let var_dt = fixed_dt.or_else(|| {
            let all_dts = sorted_unique(rs.iter().map(|r| r.dt));
            all_dts
                .into_iter()
                .map(|dt| {
                    (
                        dt,
                        sorted_unique(rs.iter().filter(|r| r.dt == dt).map(|r| r.t_len)).len(),
                    )
                })
                .fold(None, |best: Option<(f64, usize)>, (dt, n)| match best {
                    Some((_, bn)) if bn >= n => best,
                    _ => Some((dt, n)),
                })
                .map(|(dt, _)| dt)
        });
        let ts = var_dt
            .map(|dt| sorted_unique(rs.iter().filter(|r| r.dt == dt).map(|r| r.t_len)))
            .unwrap_or_default();
        if ts.len() >= 2 {
            let dt = var_dt.unwrap();
            let path = PathBuf::from(format!("{prefix}{target}_var_vs_T.tsv"));
            write_series(&path, "T", &ts, &methods, |m, t| {
                lookup(m, dt, t).map(|r| r.err_var)
            })?;
            out.written.push(path);
        } else {
            missing.push(format!("{target} T axis"));
            out.skipped.push(format!(
                "{target}: fewer than two T values at the fixed dt; skipped var_vs_T"
            ));
        }
    }
    if out.written.is_empty() {
        return Err(Error::Coverage(format!(
            "need at least two dt values or two T values (missing: {})",
            missing.join(", ")
        )));
    }
    Ok(out)
}

/// Convergence slope of `err_mean` against `dt` at the largest `T`, per
/// (method, target). Fits with fewer than three usable points are errors.
pub fn convergence_orders(reports: &[ErrorReport]) -> Vec<(String, Target, Result<f64>)> {
    let mut keys: Vec<(String, Target)> = Vec::new();
    for r in reports {
        let k = (r.method.clone(), r.target);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(m, target)| {
            let rs: Vec<&ErrorReport> = reports
                .iter()
                .filter(|r| r.method == m && r.target == target)
                .collect();
            let t_max = rs.iter().map(|r| r.t_len).fold(f64::NEG_INFINITY, f64::max);
            let pts: Vec<(f64, f64)> = rs
                .iter()
                .filter(|r| r.t_len == t_max)
                .map(|r| (r.dt, r.err_mean))
                .collect();
            let slope = fit_order(&pts);
            (m, target, slope)
        })
        .collect()
}

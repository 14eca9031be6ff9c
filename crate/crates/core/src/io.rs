//! CSV and JSON artifacts.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! saved policy loads back bit for bit. Every CSV starts with `#` lines
//! carrying the tool version and the config hash.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analysis::PolicyDiagnostics;
use crate::belief::build_simplex_grid;
use crate::error::{Error, Result};
use crate::simulate::{PairedStatistics, PathStatistics};
use crate::solver::{ConvergenceReport, PolicyTable, SavingsGrid};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Metadata stored next to a policy CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySidecar {
    pub version: String,
    pub config_hash: String,
    pub model_hash: String,
    /// Hash of everything the solve depended on.
    pub solve_hash: String,
    pub n_states: usize,
    pub n_candidates: usize,
    pub belief_resolution: usize,
    pub savings_grid: Vec<f64>,
    pub convergence: Option<ConvergenceReport>,
}

/// Path of the sidecar belonging to a policy CSV.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn header(w: &mut impl Write, config_hash: &str, extra: &[(&str, String)]) -> Result<()> {
    writeln!(w, "# learning-egm {VERSION}")?;
    writeln!(w, "# config_hash={config_hash}")?;
    for (k, v) in extra {
        writeln!(w, "# {k}={v}")?;
    }
    Ok(())
}

fn csv_writer(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn f(x: f64) -> String {
    format!("{x}")
}

/// Writes the policy CSV and its JSON sidecar.
pub fn save_policy(
    path: &Path,
    policy: &PolicyTable,
    config_hash: &str,
    solve_hash: &str,
    report: Option<&ConvergenceReport>,
) -> Result<()> {
    let beliefs = policy.beliefs();
    let n = beliefs.n_candidates();
    let mut out = csv_writer(path)?;
    header(
        &mut out,
        config_hash,
        &[("model_hash", policy.model_hash().to_string())],
    )?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let mut cols = vec!["z".to_string(), "ell".to_string()];
        cols.extend((1..=n).map(|i| format!("theta_{i}")));
        cols.extend(["s", "wealth_knot", "consumption"].map(String::from));
        w.write_record(&cols)?;
        let s = policy.savings().points();
        let mut rec: Vec<String> = Vec::with_capacity(cols.len());
        for z in 0..policy.n_states() {
            for ell in 0..beliefs.len() {
                let theta = beliefs.point(ell).weights();
                let knots = policy.knots(z, ell);
                let cons = policy.consumption_at_knots(z, ell);
                for g in 0..s.len() {
                    rec.clear();
                    rec.push(z.to_string());
                    rec.push(ell.to_string());
                    rec.extend(theta.iter().map(|t| f(*t)));
                    rec.push(f(s[g]));
                    rec.push(f(knots[g]));
                    rec.push(f(cons[g]));
                    w.write_record(&rec)?;
                }
            }
        }
        w.flush()?;
    }
    out.flush()?;
    let sidecar = PolicySidecar {
        version: VERSION.to_string(),
        config_hash: config_hash.to_string(),
        model_hash: policy.model_hash().to_string(),
        solve_hash: solve_hash.to_string(),
        n_states: policy.n_states(),
        n_candidates: n,
        belief_resolution: beliefs.resolution(),
        savings_grid: policy.savings().points().to_vec(),
        convergence: report.cloned(),
    };
    std::fs::write(
        sidecar_path(path),
        serde_json::to_string_pretty(&sidecar)? + "\n",
    )?;
    Ok(())
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?)
}

fn parse(field: &str, what: &str, row: usize) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|e| Error::config(format!("row {row}, column {what}"), e.to_string()))
}

/// Loads a policy written by [`save_policy`].
pub fn load_policy(path: &Path) -> Result<(PolicyTable, PolicySidecar)> {
    let text = std::fs::read_to_string(sidecar_path(path))?;
    let side: PolicySidecar = serde_json::from_str(&text)?;
    let beliefs = Arc::new(build_simplex_grid(side.n_candidates, side.belief_resolution)?);
    let g = side.savings_grid.len();
    let total = side.n_states * beliefs.len() * g;
    let mut knots = Vec::with_capacity(total);
    let mut cons = Vec::with_capacity(total);
    let mut s_col = Vec::with_capacity(g);
    let mut rd = reader(path)?;
    let width = 2 + side.n_candidates + 3;
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        if rec.len() != width {
            return Err(Error::config(
                format!("row {i}"),
                format!("has {} columns, expected {width}", rec.len()),
            ));
        }
        let z: usize = rec[0]
            .parse()
            .map_err(|_| Error::config(format!("row {i}, column z"), "not an index"))?;
        let ell: usize = rec[1]
            .parse()
            .map_err(|_| Error::config(format!("row {i}, column ell"), "not an index"))?;
        let gi = i % g;
        if z * beliefs.len() * g + ell * g + gi != i {
            return Err(Error::config(format!("row {i}"), "rows are out of order"));
        }
        let base = 2 + side.n_candidates;
        if z == 0 && ell == 0 {
            s_col.push(parse(&rec[base], "s", i)?);
        }
        knots.push(parse(&rec[base + 1], "wealth_knot", i)?);
        cons.push(parse(&rec[base + 2], "consumption", i)?);
    }
    if knots.len() != total {
        return Err(Error::config(
            path.display().to_string(),
            format!("has {} rows, expected {total}", knots.len()),
        ));
    }
    if s_col != side.savings_grid {
        return Err(Error::config(
            "savings_grid",
            "sidecar and CSV savings columns disagree",
        ));
    }
    let policy = PolicyTable::from_parts(
        Arc::new(SavingsGrid::new(s_col)?),
        beliefs,
        side.n_states,
        knots,
        cons,
        side.model_hash.clone(),
    )?;
    Ok((policy, side))
}

fn stats_columns(prefix: &str, st: &PathStatistics) -> Vec<String> {
    let mut cols: Vec<String> = ["mean_c", "se_c", "mean_s", "se_s", "vol_c", "se_vol_c"]
        .iter()
        .map(|c| format!("{prefix}{c}"))
        .collect();
    let n = st.mean_posterior.first().map_or(0, |v| v.len());
    let m = st.state_frequency.first().map_or(0, |v| v.len());
    cols.extend((1..=n).map(|i| format!("{prefix}mean_theta_{i}")));
    cols.extend((1..=m).map(|z| format!("{prefix}freq_z_{z}")));
    cols
}

fn stats_row(st: &PathStatistics, t: usize, rec: &mut Vec<String>) {
    rec.extend(
        [
            st.mean_consumption[t],
            st.se_consumption[t],
            st.mean_savings[t],
            st.se_savings[t],
            st.consumption_volatility[t],
            st.se_volatility[t],
        ]
        .iter()
        .map(|x| f(*x)),
    );
    rec.extend(st.mean_posterior[t].iter().map(|x| f(*x)));
    rec.extend(st.state_frequency[t].iter().map(|x| f(*x)));
}

fn sim_header(st: &PathStatistics) -> Vec<(&'static str, String)> {
    vec![
        ("n_paths", st.n_paths.to_string()),
        ("initial_wealth", f(st.initial_wealth)),
        ("initial_state", format!("{:?}", st.initial_state)),
    ]
}

/// `t, mean_c, se_c, mean_s, se_s, vol_c, se_vol_c, mean_theta_*, freq_z_*`.
pub fn write_path_statistics(path: &Path, st: &PathStatistics, config_hash: &str) -> Result<()> {
    let mut out = csv_writer(path)?;
    header(&mut out, config_hash, &sim_header(st))?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let mut cols = vec!["t".to_string()];
        cols.extend(stats_columns("", st));
        w.write_record(&cols)?;
        let mut rec = Vec::new();
        for t in 0..st.n_periods() {
            rec.clear();
            rec.push(t.to_string());
            stats_row(st, t, &mut rec);
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    out.flush()?;
    Ok(())
}

/// Both economies side by side followed by the learning-minus-benchmark
/// differences and their standard errors.
pub fn write_paired_statistics(path: &Path, p: &PairedStatistics, config_hash: &str) -> Result<()> {
    let mut out = csv_writer(path)?;
    header(&mut out, config_hash, &sim_header(&p.learning))?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let mut cols = vec!["t".to_string()];
        cols.extend(stats_columns("learning_", &p.learning));
        cols.extend(stats_columns("full_", &p.full_info));
        cols.extend(
            ["diff_c", "se_diff_c", "diff_s", "se_diff_s", "diff_vol_c", "se_diff_vol_c"]
                .map(String::from),
        );
        w.write_record(&cols)?;
        let mut rec = Vec::new();
        for t in 0..p.learning.n_periods() {
            rec.clear();
            rec.push(t.to_string());
            stats_row(&p.learning, t, &mut rec);
            stats_row(&p.full_info, t, &mut rec);
            rec.extend(
                [
                    p.diff_consumption[t],
                    p.se_diff_consumption[t],
                    p.diff_savings[t],
                    p.se_diff_savings[t],
                    p.diff_volatility[t],
                    p.se_diff_volatility[t],
                ]
                .iter()
                .map(|x| f(*x)),
            );
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    out.flush()?;
    Ok(())
}

/// One row per `(z, ell)` curve.
pub fn write_diagnostics(path: &Path, d: &PolicyDiagnostics, config_hash: &str) -> Result<()> {
    let mut out = csv_writer(path)?;
    header(&mut out, config_hash, &[])?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record([
            "z",
            "ell",
            "binding_threshold",
            "first_knot",
            "mpc_top_decile",
            "mpc_top_segment",
            "max_residual",
            "monotone",
            "concave",
        ])?;
        for c in &d.curves {
            w.write_record([
                c.z.to_string(),
                c.ell.to_string(),
                f(c.binding_threshold),
                f(c.first_knot),
                f(c.mpc.top_decile),
                f(c.mpc.top_segment),
                f(c.max_residual),
                c.monotone.to_string(),
                c.concave.to_string(),
            ])?;
        }
        w.flush()?;
    }
    out.flush()?;
    Ok(())
}

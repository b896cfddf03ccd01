//! Experiment orchestration: drive the scaling sweeps from a validated
//! configuration, write the deterministic CSV report and the JSON summary,
//! and compute the pass/fail records the CLI exit status is based on.

use crate::config::{config_hash, ValidatedConfig};
use crate::error::{Error, Result};
use crate::fields::{sample_gaussian_field, subordinate, write_field_csv};
use crate::kinetic::solve_fractional;
use crate::limits::{limit_cov, LimitValue};
use crate::scaling::{
    limit_query, run_macro_experiment, run_micro_experiment, rows_to_csv, sweep_rows,
    ExperimentInput, ScalingMode, SweepRow,
};
use crate::specfun::mittag_leffler;
use serde::Serialize;
use std::path::Path;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionRecord {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub seed: u64,
    pub criteria: Vec<CriterionRecord>,
    pub pass: bool,
}

fn experiment_input<'a>(v: &'a ValidatedConfig) -> ExperimentInput<'a> {
    ExperimentInput {
        params: v.params,
        f: [&v.densities[0], &v.densities[1]],
        h: [&v.subordinators[0], &v.subordinators[1]],
        grid: v.grid,
        seed: v.raw.seed,
    }
}

/// A per-probe convergence check at the smallest epsilon: the estimated
/// covariance must sit within max(3 SE, 10% of the limit) of the limit.
/// Cross-component entries with a zero limit use the pure 4 SE test.
fn criteria_from_rows(rows: &[SweepRow], eps_min: f64) -> Vec<CriterionRecord> {
    let mut out = Vec::new();
    for r in rows {
        if (r.eps - eps_min).abs() > 1e-15 {
            continue;
        }
        let name = format!(
            "probe{}_comp{}{}_eps{}",
            r.probe_id, r.comp_pair.0, r.comp_pair.1, r.eps
        );
        let (tol, pass) = if r.limit_value == 0.0 {
            let tol = 4.0 * r.cov_se;
            (tol, r.cov_mean.abs() <= tol.max(1e-300))
        } else {
            let tol = (3.0 * r.cov_se).max(0.10 * r.limit_value.abs()) + r.limit_err;
            (tol, (r.cov_mean - r.limit_value).abs() <= tol)
        };
        out.push(CriterionRecord {
            name,
            value: r.cov_mean,
            target: r.limit_value,
            tol,
            pass,
        });
    }
    out
}

/// Run the configured scaling experiment, writing `sweep.csv` and
/// `summary.json` under `out_dir`. Output is deterministic in the seed.
pub fn run_scaling(v: &ValidatedConfig, out_dir: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(out_dir)?;
    let inp = experiment_input(v);
    let sweep = match v.scaling.mode {
        ScalingMode::Micro => run_micro_experiment(&v.scaling, &inp)?,
        ScalingMode::Macro => run_macro_experiment(&v.scaling, &inp)?,
    };
    let rows = sweep_rows(&v.scaling, &inp, &sweep)?;
    std::fs::write(out_dir.join("sweep.csv"), rows_to_csv(&rows))?;

    let eps_min = v
        .scaling
        .eps_list
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let mut criteria = criteria_from_rows(&rows, eps_min);

    // the micro regime is governed by alpha + gamma, not alpha alone; record
    // the exponent actually used whenever gamma > 0
    if v.scaling.mode == ScalingMode::Micro && v.params.gamma_b > 0.0 {
        let a = v.params.alpha + v.params.gamma_b;
        criteria.push(CriterionRecord {
            name: "micro_exponent_alpha_plus_gamma".to_string(),
            value: a,
            target: a,
            tol: 0.0,
            pass: true,
        });
    }

    let pass = criteria.iter().all(|c| c.pass);
    let summary = RunSummary {
        config_hash: config_hash(&v.raw),
        seed: v.raw.seed,
        criteria,
        pass,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serialization cannot fail");
    std::fs::write(out_dir.join("summary.json"), json)?;
    Ok(summary)
}

/// Evaluate the limit-covariance oracle for each configured probe;
/// returns CSV text (probe_id, entry, value, est_error).
pub fn limit_cov_report(v: &ValidatedConfig) -> Result<String> {
    let inp = experiment_input(v);
    let mut out = String::from("probe_id,entry,value,est_error\n");
    for (pi, probe) in v.scaling.probes.iter().enumerate() {
        let (lv, le) = limit_cov(&limit_query(&v.scaling, &inp, *probe))?;
        match lv {
            LimitValue::Scalar(s) => {
                out.push_str(&format!("{pi},scalar,{s:.12e},{le:.3e}\n"));
            }
            LimitValue::Matrix(m) => {
                for i in 0..2 {
                    for j in 0..2 {
                        out.push_str(&format!("{pi},{i}{j},{:.12e},{le:.3e}\n", m.0[i][j]));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Evaluate E_beta on a grid of arguments; returns CSV text with the
/// evaluation diagnostics (regime, terms, error estimate).
pub fn ml_eval_report(beta: f64, z_min: f64, z_max: f64, count: usize) -> Result<String> {
    if count < 2 || !(z_max > z_min) {
        return Err(Error::Config(vec![
            "ml-eval needs count >= 2 and z_max > z_min".to_string(),
        ]));
    }
    let mut out = String::from("z,value,regime,terms_used,est_error\n");
    for i in 0..count {
        let z = z_min + (z_max - z_min) * i as f64 / (count - 1) as f64;
        let r = mittag_leffler(beta, z)?;
        out.push_str(&format!(
            "{z:.10e},{:.12e},{:?},{},{:.3e}\n",
            r.value, r.regime, r.terms_used, r.est_error
        ));
    }
    Ok(out)
}

/// Draw one initial condition pair, subordinate, solve to the configured
/// time, and dump initial and final fields as CSV under `out_dir`.
pub fn simulate(v: &ValidatedConfig, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let g0 = sample_gaussian_field(&v.grid, &v.densities[0], v.raw.seed)?;
    let g1 = sample_gaussian_field(&v.grid, &v.densities[1], v.raw.seed.wrapping_add(1))?;
    let u0 = subordinate(&g0, &v.subordinators[0]);
    let v0 = subordinate(&g1, &v.subordinators[1]);
    let sol = solve_fractional(&u0, &v0, &v.params, v.raw.simulate.t)?;
    write_field_csv(&u0, &out_dir.join("initial_u.csv"))?;
    write_field_csv(&v0, &out_dir.join("initial_v.csv"))?;
    write_field_csv(&sol, &out_dir.join("solution.csv"))?;
    Ok(())
}

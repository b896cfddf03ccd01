//! Homogenization experiments: macro/micro rescaling, renormalization
//! constants, and Monte-Carlo covariance estimation of the rescaled fields
//! across an epsilon sweep, compared against the limit-covariance quadratures.

use crate::error::{Error, Result};
use crate::fields::{sample_gaussian_from_masses, GridSpec, SpectralDensity};
use crate::hermite::Subordinator;
use crate::kinetic::{
    fft_1d_all, mean_vector, prefactored_q, q_matrix, GrowthPolicy, SpectralPropagator,
    SystemParams,
};
use crate::limits::{limit_cov, LimitCovQuery, LimitValue, Probe, Variant};
use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingMode {
    Macro,
    Micro,
}

#[derive(Debug, Clone)]
pub struct ScalingConfig {
    pub mode: ScalingMode,
    /// strictly decreasing, all in (0, 1]
    pub eps_list: Vec<f64>,
    /// micro-scale exponent chi > 0 (ignored in macro mode)
    pub chi: f64,
    pub probes: Vec<Probe>,
    pub replicates: usize,
    /// time-fractional macro runs rescale the coupling: B -> eps^beta B
    pub beta_b_scaling: bool,
}

impl ScalingConfig {
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        if self.eps_list.is_empty() {
            violations.push("eps_list is empty".to_string());
        }
        for w in self.eps_list.windows(2) {
            if w[1] >= w[0] {
                violations.push(format!("eps_list not strictly decreasing at {} -> {}", w[0], w[1]));
            }
        }
        for &e in &self.eps_list {
            if !(e > 0.0 && e <= 1.0) {
                violations.push(format!("eps {e} outside (0, 1]"));
            }
        }
        if self.replicates < 100 {
            violations.push(format!("replicates {} < 100", self.replicates));
        }
        if self.mode == ScalingMode::Micro && !(self.chi > 0.0) {
            violations.push(format!("chi {} must be positive", self.chi));
        }
        if self.probes.is_empty() {
            violations.push("no probes".to_string());
        }
        for p in &self.probes {
            if !(p.0 .0 > 0.0 && p.1 .0 > 0.0) {
                violations.push(format!("probe times must be positive: {p:?}"));
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(violations))
        }
    }
}

/// Sample mean and SE of per-replicate products (the covariance estimator).
#[derive(Debug, Clone, Copy)]
pub struct CovEstimate {
    pub mean: f64,
    pub se: f64,
    pub n_rep: usize,
}

/// Mean of paired products x_r * y_r with jackknife standard error.
pub fn estimate_covariance(xs: &[f64], ys: &[f64]) -> Result<CovEstimate> {
    if xs.len() != ys.len() {
        return Err(Error::Shape(format!(
            "paired sample lengths differ: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 replicates, got {n}"
        )));
    }
    let prods: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| x * y).collect();
    let total: f64 = prods.iter().sum();
    let mean = total / n as f64;
    // jackknife over leave-one-out means; equals s/sqrt(n) for this statistic
    let nf = n as f64;
    let mut ss = 0.0;
    for &p in &prods {
        let loo = (total - p) / (nf - 1.0);
        ss += (loo - mean) * (loo - mean);
    }
    let se = ((nf - 1.0) / nf * ss).sqrt();
    Ok(CovEstimate { mean, se, n_rep: n })
}

/// N1(eps)^{-1/2} of Theorem 1: (eps^{m kappa chi} L0^m)^{-1/2}.
pub fn normalization_micro(eps: f64, m: usize, kappa: f64, chi: f64, l0: f64) -> f64 {
    (eps.powf(m as f64 * kappa * chi) * l0.powi(m as i32)).powf(-0.5)
}

/// Macro normalization (eps^{m kappa / alpha} L0^m)^{-1/2}.
pub fn normalization_macro(eps: f64, m: usize, kappa: f64, alpha: f64, l0: f64) -> f64 {
    (eps.powf(m as f64 * kappa / alpha) * l0.powi(m as i32)).powf(-0.5)
}

/// Everything the solver pipeline needs besides the sweep configuration.
pub struct ExperimentInput<'a> {
    pub params: SystemParams,
    pub f: [&'a SpectralDensity; 2],
    pub h: [&'a Subordinator; 2],
    pub grid: GridSpec,
    pub seed: u64,
}

/// 2x2 block of covariance estimates for one probe pair: comp[i][k] pairs
/// component i at the first probe point with component k at the second.
#[derive(Debug, Clone)]
pub struct ProbeCov {
    pub probe: Probe,
    pub comp: [[CovEstimate; 2]; 2],
}

pub type SweepResult = Vec<(f64, Vec<ProbeCov>)>;

fn mix_seed(seed: u64, eps_idx: u64, rep: u64) -> u64 {
    // splitmix64 finalizer over the combined stream id
    let mut z = seed ^ eps_idx.wrapping_mul(0x9E3779B97F4A7C15) ^ rep.wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Solver-side description of one epsilon stage: where to solve and read, and
/// what deterministic mean to subtract before normalizing.
struct Stage {
    /// per-cell spectral masses of the (possibly dilated) initial densities
    masses: [Vec<f64>; 2],
    /// distinct solve times with their propagators
    times: Vec<f64>,
    props: Vec<SpectralPropagator>,
    /// deterministic mean vector at each distinct time
    means: Vec<[f64; 2]>,
    /// per probe: ((time index, read x), (time index, read x))
    reads: Vec<((usize, f64), (usize, f64))>,
    /// per-component normalization constants
    norm: [f64; 2],
}

fn push_time(times: &mut Vec<f64>, t: f64) -> usize {
    if let Some(i) = times.iter().position(|&v| (v - t).abs() < 1e-14) {
        i
    } else {
        times.push(t);
        times.len() - 1
    }
}

fn build_stage(
    cfg: &ScalingConfig,
    inp: &ExperimentInput,
    eps: f64,
) -> Result<Stage> {
    let p = &inp.params;
    let beta = p.beta;
    let frac = beta < 1.0 - 1e-14;
    let (solve_scale, read_scale, solve_params, policy) = match cfg.mode {
        ScalingMode::Micro => {
            let s = if frac { beta } else { 1.0 } / (p.alpha + p.gamma_b);
            // solve to eps * t, read at eps^s * x
            (eps, eps.powf(s), *p, GrowthPolicy::Plain)
        }
        ScalingMode::Macro => {
            let s = if frac { beta } else { 1.0 } / p.alpha;
            if frac {
                if !cfg.beta_b_scaling {
                    return Err(Error::Config(vec![
                        "time-fractional macro runs require beta_b_scaling (B -> eps^beta B)"
                            .to_string(),
                    ]));
                }
                // B -> eps^beta B keeps the Mittag-Leffler growth bounded
                let scaled = SystemParams::new(
                    p.mu,
                    p.alpha,
                    p.gamma_b,
                    beta,
                    p.p,
                    p.d1 * eps.powf(beta),
                    p.d2 * eps.powf(beta),
                )?;
                (1.0 / eps, eps.powf(-s), scaled, GrowthPolicy::Plain)
            } else {
                (1.0 / eps, eps.powf(-s), *p, GrowthPolicy::Prefactored)
            }
        }
    };

    let masses = match cfg.mode {
        ScalingMode::Micro => {
            let s = if frac { beta } else { 1.0 } / (p.alpha + p.gamma_b);
            let dil = eps.powf(-s - cfg.chi);
            [
                inp.f[0].dilate(dil)?.lattice_masses(&inp.grid)?,
                inp.f[1].dilate(dil)?.lattice_masses(&inp.grid)?,
            ]
        }
        ScalingMode::Macro => [
            inp.f[0].lattice_masses(&inp.grid)?,
            inp.f[1].lattice_masses(&inp.grid)?,
        ],
    };

    let mut times = Vec::new();
    let mut reads = Vec::with_capacity(cfg.probes.len());
    let half_box = inp.grid.box_len / 2.0;
    for probe in &cfg.probes {
        let mut side = |(t, x): (f64, f64)| -> Result<(usize, f64)> {
            let xr = x * read_scale;
            if xr.abs() > half_box {
                return Err(Error::Config(vec![format!(
                    "read point {xr:.3} exceeds the half-box {half_box:.1} at eps = {eps}"
                )]));
            }
            Ok((push_time(&mut times, t * solve_scale), xr))
        };
        reads.push((side(probe.0)?, side(probe.1)?));
    }

    let mut props = Vec::with_capacity(times.len());
    let mut means = Vec::with_capacity(times.len());
    let c0 = [inp.h[0].coeffs[0], inp.h[1].coeffs[0]];
    for &ts in &times {
        props.push(SpectralPropagator::new(&inp.grid, &solve_params, ts, policy)?);
        let mv = match (cfg.mode, frac) {
            // Theorem 5 centers by C0 itself (the mean factor tends to 1)
            (ScalingMode::Micro, true) => c0,
            (ScalingMode::Micro, false) => q_matrix(ts, &solve_params)?.mul_vec(c0),
            (ScalingMode::Macro, true) => mean_vector(ts, &solve_params, c0)?,
            // prefactored mean matches the prefactored solution components
            (ScalingMode::Macro, false) => prefactored_q(ts, &solve_params)?.mul_vec(c0),
        };
        means.push(mv);
    }

    // The system theorems rescale the whole vector by the dominant
    // (smallest m_j kappa_j) component's constant, so the weaker component
    // vanishes in the limit; a micro tie keeps per-component constants
    // (Prop. 3's diagonal limit).
    let mk0 = inp.h[0].rank as f64 * inp.f[0].kappa;
    let mk1 = inp.h[1].rank as f64 * inp.f[1].kappa;
    let tie = (mk0 - mk1).abs() < 1e-12;
    let dom = if mk0 <= mk1 { 0 } else { 1 };
    let normf = |j: usize| -> f64 {
        match cfg.mode {
            ScalingMode::Micro => {
                normalization_micro(eps, inp.h[j].rank, inp.f[j].kappa, cfg.chi, inp.f[j].l0)
            }
            ScalingMode::Macro => {
                // beta < 1 rescales space by eps^{beta/alpha}: same formula at eps^beta
                let e = if frac { eps.powf(beta) } else { eps };
                normalization_macro(e, inp.h[j].rank, inp.f[j].kappa, p.alpha, inp.f[j].l0)
            }
        }
    };
    let norm = if cfg.mode == ScalingMode::Micro && tie {
        [normf(0), normf(1)]
    } else {
        let v = normf(dom);
        [v, v]
    };

    Ok(Stage {
        masses,
        times,
        props,
        means,
        reads,
        norm,
    })
}

/// One replicate: sample, subordinate, solve at the stage's times, read the
/// rescaled values at every probe point. Returns values[time][comp][point].
fn replicate_values(
    stage: &Stage,
    inp: &ExperimentInput,
    rep_seed: u64,
) -> Result<Vec<[Vec<f64>; 2]>> {
    let grid = &inp.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
    let z1 = sample_gaussian_from_masses(grid, &stage.masses[0], &mut rng)?;
    let z2 = sample_gaussian_from_masses(grid, &stage.masses[1], &mut rng)?;
    let mut a: Vec<Complex64> = z1
        .iter()
        .map(|&u| Complex64::new(inp.h[0].apply(u), 0.0))
        .collect();
    let mut b: Vec<Complex64> = z2
        .iter()
        .map(|&u| Complex64::new(inp.h[1].apply(u), 0.0))
        .collect();
    fft_1d_all(grid, &mut a, true);
    fft_1d_all(grid, &mut b, true);

    // probe x-positions needed per distinct time
    let mut xs_per_time: Vec<Vec<f64>> = vec![Vec::new(); stage.times.len()];
    for ((ti, xi), (tj, xj)) in &stage.reads {
        if !xs_per_time[*ti].contains(xi) {
            xs_per_time[*ti].push(*xi);
        }
        if !xs_per_time[*tj].contains(xj) {
            xs_per_time[*tj].push(*xj);
        }
    }

    let mut out = Vec::with_capacity(stage.times.len());
    for (ti, prop) in stage.props.iter().enumerate() {
        let mut sa = a.clone();
        let mut sb = b.clone();
        prop.propagate_spectra(&mut sa, &mut sb)?;
        let mut vals = [Vec::new(), Vec::new()];
        for &x in &xs_per_time[ti] {
            let u = prop.spectral_read(&sa, x)?;
            let v = prop.spectral_read(&sb, x)?;
            vals[0].push(stage.norm[0] * (u - stage.means[ti][0]));
            vals[1].push(stage.norm[1] * (v - stage.means[ti][1]));
        }
        out.push(vals);
    }
    Ok(out)
}

fn run_experiment(cfg: &ScalingConfig, inp: &ExperimentInput) -> Result<SweepResult> {
    cfg.validate()?;
    let mut sweep = Vec::with_capacity(cfg.eps_list.len());
    for (ei, &eps) in cfg.eps_list.iter().enumerate() {
        let stage = build_stage(cfg, inp, eps)?;
        // map probe reads to (time, position-in-xs) indices, mirroring
        // replicate_values' per-time x ordering
        let mut xs_per_time: Vec<Vec<f64>> = vec![Vec::new(); stage.times.len()];
        for ((ti, xi), (tj, xj)) in &stage.reads {
            if !xs_per_time[*ti].contains(xi) {
                xs_per_time[*ti].push(*xi);
            }
            if !xs_per_time[*tj].contains(xj) {
                xs_per_time[*tj].push(*xj);
            }
        }
        let locate = |ti: usize, x: f64| -> usize {
            xs_per_time[ti].iter().position(|&v| v == x).unwrap()
        };

        let all: Vec<Vec<[Vec<f64>; 2]>> = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| replicate_values(&stage, inp, mix_seed(inp.seed, ei as u64, r as u64)))
            .collect::<Result<Vec<_>>>()?;

        let mut per_probe = Vec::with_capacity(cfg.probes.len());
        for (pi, probe) in cfg.probes.iter().enumerate() {
            let ((ti, xi), (tj, xj)) = stage.reads[pi];
            let (ii, jj) = (locate(ti, xi), locate(tj, xj));
            let mut comp = [[CovEstimate { mean: 0.0, se: 0.0, n_rep: 0 }; 2]; 2];
            for ci in 0..2 {
                for ck in 0..2 {
                    let xs: Vec<f64> = all.iter().map(|rep| rep[ti][ci][ii]).collect();
                    let ys: Vec<f64> = all.iter().map(|rep| rep[tj][ck][jj]).collect();
                    comp[ci][ck] = estimate_covariance(&xs, &ys)?;
                }
            }
            per_probe.push(ProbeCov { probe: *probe, comp });
        }
        sweep.push((eps, per_probe));
    }
    Ok(sweep)
}

pub fn run_micro_experiment(cfg: &ScalingConfig, inp: &ExperimentInput) -> Result<SweepResult> {
    if cfg.mode != ScalingMode::Micro {
        return Err(Error::Config(vec!["config mode is not micro".to_string()]));
    }
    for j in 0..2 {
        let (m, kappa) = (inp.h[j].rank as f64, inp.f[j].kappa);
        if !(kappa > 0.0 && m * kappa < inp.grid.n as f64) {
            return Err(Error::Config(vec![format!(
                "component {j}: m kappa = {} outside (0, n = {})",
                m * kappa,
                inp.grid.n
            )]));
        }
        if inp.params.beta < 1.0 - 1e-14 {
            let bound = (2.0 * (inp.params.alpha + inp.params.gamma_b)).min(inp.grid.n as f64);
            if m * kappa >= bound {
                return Err(Error::Config(vec![format!(
                    "component {j}: fractional micro requires m kappa < {bound}"
                )]));
            }
        }
    }
    run_experiment(cfg, inp)
}

pub fn run_macro_experiment(cfg: &ScalingConfig, inp: &ExperimentInput) -> Result<SweepResult> {
    if cfg.mode != ScalingMode::Macro {
        return Err(Error::Config(vec!["config mode is not macro".to_string()]));
    }
    if inp.params.d1 < inp.params.d2 {
        return Err(Error::Config(vec![
            "macro runs require d1 >= d2 (relabel the eigenvalues)".to_string(),
        ]));
    }
    for j in 0..2 {
        let (m, kappa) = (inp.h[j].rank as f64, inp.f[j].kappa);
        if !(kappa > 0.0 && m * kappa < inp.grid.n as f64) {
            return Err(Error::Config(vec![format!(
                "component {j}: m kappa = {} outside (0, n = {})",
                m * kappa,
                inp.grid.n
            )]));
        }
        if inp.params.beta < 1.0 - 1e-14 {
            let bound = (2.0 * inp.params.alpha).min(inp.grid.n as f64);
            if m * kappa >= bound {
                return Err(Error::Config(vec![format!(
                    "component {j}: fractional macro requires m kappa < {bound}"
                )]));
            }
        }
    }
    run_experiment(cfg, inp)
}

/// The limit-covariance oracle matching an experiment's configuration.
pub fn limit_query(cfg: &ScalingConfig, inp: &ExperimentInput, probe: Probe) -> LimitCovQuery {
    let frac = inp.params.beta < 1.0 - 1e-14;
    let variant = match (cfg.mode, frac) {
        (ScalingMode::Micro, false) => Variant::MicroSystem,
        (ScalingMode::Micro, true) => Variant::FracMicro,
        (ScalingMode::Macro, false) => Variant::MacroSystem,
        (ScalingMode::Macro, true) => Variant::FracMacro,
    };
    LimitCovQuery {
        variant,
        params: inp.params,
        n: inp.grid.n,
        m: [inp.h[0].rank, inp.h[1].rank],
        kappa: [inp.f[0].kappa, inp.f[1].kappa],
        c_m: [inp.h[0].leading_coeff(), inp.h[1].leading_coeff()],
        probe,
    }
}

/// One CSV row of the sweep report.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub eps: f64,
    pub probe_id: usize,
    pub comp_pair: (usize, usize),
    pub cov_mean: f64,
    pub cov_se: f64,
    pub n_rep: usize,
    pub limit_value: f64,
    pub limit_err: f64,
    pub z_score: f64,
}

/// Flatten a sweep against the limit oracle into report rows.
pub fn sweep_rows(
    cfg: &ScalingConfig,
    inp: &ExperimentInput,
    sweep: &SweepResult,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for (eps, probes) in sweep {
        for (pi, pc) in probes.iter().enumerate() {
            let (lv, le) = limit_cov(&limit_query(cfg, inp, pc.probe))?;
            let lm = match lv {
                LimitValue::Scalar(v) => Mat2x2([[v, 0.0], [0.0, v]]),
                LimitValue::Matrix(m) => Mat2x2(m.0),
            };
            for ci in 0..2 {
                for ck in 0..2 {
                    let est = pc.comp[ci][ck];
                    let target = lm.0[ci][ck];
                    let z = if est.se > 0.0 {
                        (est.mean - target) / est.se
                    } else {
                        0.0
                    };
                    rows.push(SweepRow {
                        eps: *eps,
                        probe_id: pi,
                        comp_pair: (ci, ck),
                        cov_mean: est.mean,
                        cov_se: est.se,
                        n_rep: est.n_rep,
                        limit_value: target,
                        limit_err: le,
                        z_score: z,
                    });
                }
            }
        }
    }
    Ok(rows)
}

struct Mat2x2([[f64; 2]; 2]);

/// CSV serialization of the sweep report (header + rows).
pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "eps,probe_id,comp_pair,cov_mean,cov_se,n_rep,limit_value,limit_err,z_score\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{}{},{:.10e},{:.10e},{},{:.10e},{:.3e},{:.4}\n",
            r.eps,
            r.probe_id,
            r.comp_pair.0,
            r.comp_pair.1,
            r.cov_mean,
            r.cov_se,
            r.n_rep,
            r.limit_value,
            r.limit_err,
            r.z_score
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::make_spectral_density;
    use crate::kinetic::Mat2;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn normalization_micro_cases() {
        assert_abs_diff_eq!(normalization_micro(1.0, 2, 0.4, 1.5, 2.0), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(normalization_micro(0.01, 1, 0.5, 2.0, 1.0), 10.0, epsilon = 1e-10);
        // log-linear with slope -m kappa chi / 2
        let (m, kappa, chi) = (2, 0.3, 1.2);
        let s = (normalization_micro(0.1, m, kappa, chi, 1.0).ln()
            - normalization_micro(0.2, m, kappa, chi, 1.0).ln())
            / (0.1f64.ln() - 0.2f64.ln());
        assert_abs_diff_eq!(s, -(m as f64) * kappa * chi / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn normalization_macro_cases() {
        assert_abs_diff_eq!(normalization_macro(1.0, 1, 0.5, 1.5, 4.0), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(
            normalization_macro(0.01, 1, 0.75, 1.5, 1.0),
            0.01f64.powf(-0.25),
            epsilon = 1e-10
        );
        let (m, kappa, alpha) = (2, 0.3, 1.7);
        let s = (normalization_macro(0.1, m, kappa, alpha, 1.0).ln()
            - normalization_macro(0.2, m, kappa, alpha, 1.0).ln())
            / (0.1f64.ln() - 0.2f64.ln());
        assert_abs_diff_eq!(s, -(m as f64) * kappa / (2.0 * alpha), epsilon = 1e-12);
    }

    #[test]
    fn estimate_covariance_basics() {
        let est = estimate_covariance(&[2.0; 50], &[3.0; 50]).unwrap();
        assert_abs_diff_eq!(est.mean, 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(est.se, 0.0, epsilon = 1e-12);
        assert!(estimate_covariance(&[1.0], &[1.0]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let ys: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let est = estimate_covariance(&xs, &ys).unwrap();
        assert!(est.mean.abs() < 4.0 * est.se, "{} vs se {}", est.mean, est.se);

        // known covariance 0.7 via Cholesky: y = 0.7 x + sqrt(1 - 0.49) z
        let zs: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let ys2: Vec<f64> = xs
            .iter()
            .zip(&zs)
            .map(|(x, z)| 0.7 * x + (1.0f64 - 0.49).sqrt() * z)
            .collect();
        let est = estimate_covariance(&xs, &ys2).unwrap();
        assert!((est.mean - 0.7).abs() < 4.0 * est.se, "{} vs 0.7", est.mean);
    }

    #[test]
    fn config_validation_lists_violations() {
        let cfg = ScalingConfig {
            mode: ScalingMode::Micro,
            eps_list: vec![0.1, 0.2],
            chi: -1.0,
            probes: vec![],
            replicates: 10,
            beta_b_scaling: false,
        };
        match cfg.validate() {
            Err(Error::Config(v)) => assert!(v.len() >= 3, "{v:?}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    fn uncoupled_params(alpha: f64, gamma_b: f64) -> SystemParams {
        SystemParams::new(1.0, alpha, gamma_b, 1.0, Mat2::IDENTITY, 0.0, 0.0).unwrap()
    }

    fn micro_cfg(probes: Vec<Probe>, reps: usize, eps_list: Vec<f64>) -> ScalingConfig {
        ScalingConfig {
            mode: ScalingMode::Micro,
            eps_list,
            chi: 1.0,
            probes,
            replicates: reps,
            beta_b_scaling: false,
        }
    }

    #[test]
    fn micro_identity_matches_limit() {
        // h = identity (m = 1), B = 0, gamma = 0: closed-form limit variance
        let params = uncoupled_params(1.5, 0.0);
        let f = make_spectral_density(1, 0.5, 1.0).unwrap();
        let h = Subordinator::identity();
        let grid = GridSpec::new(1, 1 << 12, 100.0).unwrap();
        let inp = ExperimentInput {
            params,
            f: [&f, &f],
            h: [&h, &h],
            grid,
            seed: 42,
        };
        let probe: Probe = ((1.0, 0.0), (1.0, 0.0));
        let cfg = micro_cfg(vec![probe], 600, vec![0.1]);
        let sweep = run_micro_experiment(&cfg, &inp).unwrap();
        let est = sweep[0].1[0].comp[0][0];
        let (lv, _) = limit_cov(&limit_query(&cfg, &inp, probe)).unwrap();
        let target = lv.matrix().0[0][0];
        let z = (est.mean - target) / est.se;
        assert!(z.abs() < 3.0, "z = {z:.2}: {} vs {}", est.mean, target);
    }

    #[test]
    fn micro_depends_on_alpha_plus_gamma_only() {
        let f = make_spectral_density(1, 0.5, 1.0).unwrap();
        let h = Subordinator::identity();
        let grid = GridSpec::new(1, 1 << 12, 100.0).unwrap();
        let probe: Probe = ((1.0, 0.0), (1.0, 0.0));
        let cfg = micro_cfg(vec![probe], 600, vec![0.1]);
        let mut ests = Vec::new();
        for (alpha, gamma) in [(1.2, 0.6), (1.8, 0.0)] {
            let params = uncoupled_params(alpha, gamma);
            let inp = ExperimentInput {
                params,
                f: [&f, &f],
                h: [&h, &h],
                grid,
                seed: 7,
            };
            let sweep = run_micro_experiment(&cfg, &inp).unwrap();
            ests.push(sweep[0].1[0].comp[0][0]);
        }
        let joint_se = (ests[0].se * ests[0].se + ests[1].se * ests[1].se).sqrt();
        assert!(
            (ests[0].mean - ests[1].mean).abs() < 3.0 * joint_se,
            "{} vs {}",
            ests[0].mean,
            ests[1].mean
        );
    }

    #[test]
    fn micro_weaker_component_vanishes() {
        // m1 kappa1 < m2 kappa2 with the shared dominant normalization:
        // the dominant diagonal matches its limit, the weaker diagonal is a
        // vanishing residual (~ eps^{(m2 k2 - m1 k1) chi}), and cross terms
        // are mean-zero by independence of the initial components.
        let params = uncoupled_params(1.5, 0.0);
        let f1 = make_spectral_density(1, 0.2, 1.0).unwrap();
        let f2 = make_spectral_density(1, 0.7, 1.0).unwrap();
        let h = Subordinator::identity();
        let grid = GridSpec::new(1, 1 << 12, 100.0).unwrap();
        let inp = ExperimentInput {
            params,
            f: [&f1, &f2],
            h: [&h, &h],
            grid,
            seed: 3,
        };
        let probe: Probe = ((1.0, 0.0), (1.0, 0.0));
        let cfg = micro_cfg(vec![probe], 500, vec![0.2, 0.1]);
        let sweep = run_micro_experiment(&cfg, &inp).unwrap();
        let (lv, _) = limit_cov(&limit_query(&cfg, &inp, probe)).unwrap();
        let m = lv.matrix();
        assert_eq!(m.0[1][1], 0.0, "weaker component must drop from the limit");
        let first = &sweep[0].1[0];
        let last = &sweep[1].1[0];
        // cross terms: genuinely mean-zero
        assert!(last.comp[0][1].mean.abs() < 4.0 * last.comp[0][1].se);
        assert!(last.comp[1][0].mean.abs() < 4.0 * last.comp[1][0].se);
        // dominant diagonal matches the limit
        let est = last.comp[0][0];
        let z = (est.mean - m.0[0][0]) / est.se;
        assert!(z.abs() < 3.0, "dominant component z = {z:.2}");
        // weaker diagonal: small relative to the dominant one and shrinking
        assert!(
            last.comp[1][1].mean < first.comp[1][1].mean,
            "residual did not shrink: {} -> {}",
            first.comp[1][1].mean,
            last.comp[1][1].mean
        );
        assert!(
            last.comp[1][1].mean < 0.6 * last.comp[0][0].mean,
            "residual too large: {} vs dominant {}",
            last.comp[1][1].mean,
            last.comp[0][0].mean
        );
    }

    #[test]
    fn macro_identity_matches_limit() {
        let params = uncoupled_params(1.5, 0.4);
        let f = make_spectral_density(1, 0.5, 1.0).unwrap();
        let h = Subordinator::identity();
        let grid = GridSpec::new(1, 1 << 12, 400.0).unwrap();
        let inp = ExperimentInput {
            params,
            f: [&f, &f],
            h: [&h, &h],
            grid,
            seed: 9,
        };
        let probe: Probe = ((1.0, 0.0), (1.0, 0.5));
        let cfg = ScalingConfig {
            mode: ScalingMode::Macro,
            eps_list: vec![0.1],
            chi: 0.0,
            probes: vec![probe],
            replicates: 600,
            beta_b_scaling: false,
        };
        let sweep = run_macro_experiment(&cfg, &inp).unwrap();
        let est = sweep[0].1[0].comp[0][0];
        let (lv, _) = limit_cov(&limit_query(&cfg, &inp, probe)).unwrap();
        let target = lv.matrix().0[0][0];
        let z = (est.mean - target) / est.se;
        assert!(z.abs() < 3.0, "z = {z:.2}: {} vs {}", est.mean, target);
    }

    #[test]
    fn macro_coupled_component_ratio() {
        // Theorem 3 case (1): kappa1 < kappa2 so source 1 dominates; the
        // limiting component ratio is (p21/p11)^2 and d1 > 0 forces the
        // prefactored path. Small p12 keeps the finite-eps contribution of
        // the subdominant source below the statistical tolerance.
        let p = Mat2([[2.0, 0.1], [1.0, 0.55]]);
        let params = SystemParams::new(1.0, 1.5, 0.0, 1.0, p, 0.5, -0.8).unwrap();
        let f1 = make_spectral_density(1, 0.35, 1.0).unwrap();
        let f2 = make_spectral_density(1, 0.8, 1.0).unwrap();
        let h = Subordinator::identity();
        let grid = GridSpec::new(1, 1 << 13, 800.0).unwrap();
        let inp = ExperimentInput {
            params,
            f: [&f1, &f2],
            h: [&h, &h],
            grid,
            seed: 21,
        };
        let probe: Probe = ((1.0, 0.0), (1.0, 0.0));
        let cfg = ScalingConfig {
            mode: ScalingMode::Macro,
            eps_list: vec![0.05],
            chi: 0.0,
            probes: vec![probe],
            replicates: 600,
            beta_b_scaling: false,
        };
        let sweep = run_macro_experiment(&cfg, &inp).unwrap();
        let pc = &sweep[0].1[0];
        let (lv, _) = limit_cov(&limit_query(&cfg, &inp, probe)).unwrap();
        let m = lv.matrix();
        for (ci, ck) in [(0, 0), (1, 1), (0, 1)] {
            let est = pc.comp[ci][ck];
            let z = (est.mean - m.0[ci][ck]) / est.se;
            assert!(z.abs() < 3.5, "comp ({ci},{ck}): z = {z:.2}, {} vs {}", est.mean, m.0[ci][ck]);
        }
        // limit ratio is exactly (p21/p11)^2
        assert_abs_diff_eq!(m.0[1][1] / m.0[0][0], (1.0f64 / 2.0).powi(2), epsilon = 1e-9);
    }

    #[test]
    fn macro_diagonal_b_matches_independent_runs() {
        // d1 = d2 with diagonal B: components evolve independently
        let params = SystemParams::new(1.0, 1.5, 0.0, 1.0, Mat2::IDENTITY, -0.3, -0.3).unwrap();
        let f = make_spectral_density(1, 0.5, 1.0).unwrap();
        let h = Subordinator::identity();
        let grid = GridSpec::new(1, 1 << 12, 400.0).unwrap();
        let inp = ExperimentInput {
            params,
            f: [&f, &f],
            h: [&h, &h],
            grid,
            seed: 5,
        };
        let probe: Probe = ((1.0, 0.0), (1.0, 0.0));
        let cfg = ScalingConfig {
            mode: ScalingMode::Macro,
            eps_list: vec![0.1],
            chi: 0.0,
            probes: vec![probe],
            replicates: 400,
            beta_b_scaling: false,
        };
        let sweep = run_macro_experiment(&cfg, &inp).unwrap();
        let pc = &sweep[0].1[0];
        // B = c I cancels in the centered covariance: both diagonals agree
        // with the single-equation limit and the cross term vanishes
        let single = crate::limits::scalar_exp_cov_closed_form(1, 1, 0.5, 1.0, 1.5, 1.0, 1.0, 1.0)
            .unwrap();
        for j in 0..2 {
            let est = pc.comp[j][j];
            let z = (est.mean - single) / est.se;
            assert!(z.abs() < 3.0, "component {j}: z = {z:.2}");
        }
        assert!(pc.comp[0][1].mean.abs() < 4.0 * pc.comp[0][1].se);
    }

    #[test]
    fn micro_pure_hermite_rank_two() {
        // rank-2 subordinator with 2 kappa < 1: second-chaos limit variance
        let params = uncoupled_params(1.5, 0.0);
        let f = make_spectral_density(1, 0.25, 1.0).unwrap();
        let h = Subordinator::pure_hermite(2).unwrap();
        let grid = GridSpec::new(1, 1 << 12, 100.0).unwrap();
        let inp = ExperimentInput {
            params,
            f: [&f, &f],
            h: [&h, &h],
            grid,
            seed: 13,
        };
        let probe: Probe = ((1.0, 0.0), (1.0, 0.0));
        let cfg = micro_cfg(vec![probe], 800, vec![0.2, 0.1]);
        let sweep = run_micro_experiment(&cfg, &inp).unwrap();
        let (lv, _) = limit_cov(&limit_query(&cfg, &inp, probe)).unwrap();
        let target = lv.matrix().0[0][0];
        // trend: the smallest eps is the acceptance point
        let last = sweep.last().unwrap().1[0].comp[0][0];
        let z = (last.mean - target) / last.se;
        assert!(z.abs() < 3.5, "z = {z:.2}: {} vs {}", last.mean, target);
    }

    #[test]
    fn scaling_exponent_discrimination() {
        // two macro runs with equal alpha, different gamma: same limit;
        // the corresponding micro limits differ (alpha + gamma changes)
        let f = make_spectral_density(1, 0.5, 1.0).unwrap();
        let h = Subordinator::identity();
        let grid = GridSpec::new(1, 1 << 12, 400.0).unwrap();
        let probe: Probe = ((1.0, 0.0), (1.0, 0.0));
        let mut macros = Vec::new();
        let mut micro_limits = Vec::new();
        for gamma in [0.0, 0.5] {
            let params = uncoupled_params(1.5, gamma);
            let inp = ExperimentInput {
                params,
                f: [&f, &f],
                h: [&h, &h],
                grid,
                seed: 31,
            };
            let cfg = ScalingConfig {
                mode: ScalingMode::Macro,
                eps_list: vec![0.1],
                chi: 0.0,
                probes: vec![probe],
                replicates: 400,
                beta_b_scaling: false,
            };
            let sweep = run_macro_experiment(&cfg, &inp).unwrap();
            macros.push(sweep[0].1[0].comp[0][0]);
            let mcfg = micro_cfg(vec![probe], 100, vec![0.1]);
            let (lv, _) = limit_cov(&limit_query(&mcfg, &inp, probe)).unwrap();
            micro_limits.push(lv.matrix().0[0][0]);
        }
        let joint = (macros[0].se.powi(2) + macros[1].se.powi(2)).sqrt();
        assert!(
            (macros[0].mean - macros[1].mean).abs() < 3.0 * joint,
            "macro limits differ: {} vs {}",
            macros[0].mean,
            macros[1].mean
        );
        // micro limits must differ by far more than statistical noise
        assert!(
            (micro_limits[0] - micro_limits[1]).abs() > 0.05 * micro_limits[0].abs(),
            "micro limits should differ: {micro_limits:?}"
        );
    }

    #[test]
    fn results_independent_of_worker_count() {
        let params = uncoupled_params(1.5, 0.0);
        let f = make_spectral_density(1, 0.5, 1.0).unwrap();
        let h = Subordinator::identity();
        let grid = GridSpec::new(1, 1 << 9, 50.0).unwrap();
        let inp = ExperimentInput {
            params,
            f: [&f, &f],
            h: [&h, &h],
            grid,
            seed: 77,
        };
        let cfg = micro_cfg(vec![((1.0, 0.0), (1.0, 0.0))], 120, vec![0.2]);
        let run = || {
            let sweep = run_micro_experiment(&cfg, &inp).unwrap();
            sweep[0].1[0].comp[0][0].mean
        };
        let a = run();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(run);
        assert_eq!(a.to_bits(), b.to_bits(), "worker count changed the estimate");
    }

    #[test]
    fn sweep_rows_schema() {
        let params = uncoupled_params(1.5, 0.0);
        let f = make_spectral_density(1, 0.5, 1.0).unwrap();
        let h = Subordinator::identity();
        let grid = GridSpec::new(1, 1 << 9, 50.0).unwrap();
        let inp = ExperimentInput {
            params,
            f: [&f, &f],
            h: [&h, &h],
            grid,
            seed: 1,
        };
        let cfg = micro_cfg(vec![((1.0, 0.0), (1.0, 0.0))], 120, vec![0.2]);
        let sweep = run_micro_experiment(&cfg, &inp).unwrap();
        let rows = sweep_rows(&cfg, &inp, &sweep).unwrap();
        assert_eq!(rows.len(), 4); // 1 eps x 1 probe x 4 component pairs
        let csv = rows_to_csv(&rows);
        assert!(csv.starts_with("eps,probe_id,comp_pair,"));
        assert_eq!(csv.lines().count(), 5);
    }
}

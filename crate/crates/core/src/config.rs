//! Experiment configuration: TOML parsing, validation against the model's
//! admissibility conditions, and conversion into the typed inputs used by the
//! solver and scaling modules.

use crate::error::{Error, Result};
use crate::fields::{make_spectral_density, GridSpec, SpectralDensity};
use crate::hermite::Subordinator;
use crate::kinetic::{Mat2, SystemParams};
use crate::limits::Probe;
use crate::scaling::{ScalingConfig, ScalingMode};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SystemSection,
    pub fields: FieldsSection,
    pub subordinators: SubordinatorsSection,
    pub grid: GridSection,
    pub scaling: ScalingSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemSection {
    pub mu: f64,
    pub alpha: f64,
    pub gamma: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// either the coupling matrix directly ...
    pub b: Option<[[f64; 2]; 2]>,
    /// ... or its eigen-decomposition (columns of p, eigenvalues d)
    pub p: Option<[[f64; 2]; 2]>,
    pub d: Option<[f64; 2]>,
}

fn default_beta() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldsSection {
    pub n: usize,
    pub kappa: [f64; 2],
    #[serde(default = "default_l0")]
    pub l0: [f64; 2],
}

fn default_l0() -> [f64; 2] {
    [1.0, 1.0]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubordinatorsSection {
    /// "identity", "hermite:<m>", or "sign" per component
    pub kinds: [String; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSection {
    pub pts: usize,
    #[serde(rename = "box")]
    pub box_len: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingSection {
    pub mode: String,
    pub eps: Vec<f64>,
    #[serde(default = "default_chi")]
    pub chi: f64,
    /// probe pairs as flat rows [t, x, t', x']
    pub probes: Vec<[f64; 4]>,
    pub replicates: usize,
    #[serde(default)]
    pub beta_b_scaling: bool,
}

fn default_chi() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SimulateSection {
    /// solve time for the `simulate` subcommand
    #[serde(default = "default_sim_t")]
    pub t: f64,
}

fn default_sim_t() -> f64 {
    1.0
}

/// Typed, validated experiment inputs plus the quantities derived from the
/// configuration (echoed by `validate`).
pub struct ValidatedConfig {
    pub raw: ExperimentConfig,
    pub params: SystemParams,
    pub densities: [SpectralDensity; 2],
    pub subordinators: [Subordinator; 2],
    pub grid: GridSpec,
    pub scaling: ScalingConfig,
}

fn parse_subordinator(spec: &str) -> Result<Subordinator> {
    match spec {
        "identity" => Ok(Subordinator::identity()),
        "sign" => Ok(Subordinator::sign(41)),
        other => {
            if let Some(m) = other.strip_prefix("hermite:") {
                let m: usize = m.parse().map_err(|_| {
                    Error::Config(vec![format!("subordinator rank in '{other}' is not an integer")])
                })?;
                Subordinator::pure_hermite(m)
            } else {
                Err(Error::Config(vec![format!(
                    "unknown subordinator kind '{other}' (identity | hermite:<m> | sign)"
                )]))
            }
        }
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    toml::from_str(text).map_err(|e| Error::Config(vec![format!("TOML parse error: {e}")]))
}

/// SHA-256 of the canonical (re-serialized) configuration text.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let canonical = toml::to_string(cfg).expect("config serialization cannot fail");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    format!("{:x}", hasher.finalize())
}

/// Validate every module precondition up front; report all violated
/// conditions by name rather than stopping at the first.
pub fn validate(cfg: &ExperimentConfig) -> Result<ValidatedConfig> {
    let mut violations: Vec<String> = Vec::new();

    // coupling: B directly (Condition A diagonalizability checked by from_b)
    // or the eigen-pair form
    let params = match (&cfg.system.b, &cfg.system.p, &cfg.system.d) {
        (Some(b), None, None) => SystemParams::from_b(
            cfg.system.mu,
            cfg.system.alpha,
            cfg.system.gamma,
            cfg.system.beta,
            Mat2(*b),
        ),
        (None, Some(p), Some(d)) => SystemParams::new(
            cfg.system.mu,
            cfg.system.alpha,
            cfg.system.gamma,
            cfg.system.beta,
            Mat2(*p),
            d[0],
            d[1],
        ),
        (None, None, None) => SystemParams::new(
            cfg.system.mu,
            cfg.system.alpha,
            cfg.system.gamma,
            cfg.system.beta,
            Mat2::IDENTITY,
            0.0,
            0.0,
        ),
        _ => Err(Error::Config(vec![
            "specify the coupling as either [system] b = ... or p = ... with d = ..., not both"
                .to_string(),
        ])),
    };
    let params = match params {
        Ok(p) => Some(p),
        Err(Error::Config(mut v)) => {
            violations.append(&mut v);
            None
        }
        Err(e) => {
            violations.push(e.to_string());
            None
        }
    };

    let grid = match GridSpec::new(cfg.fields.n, cfg.grid.pts, cfg.grid.box_len) {
        Ok(g) => Some(g),
        Err(e) => {
            violations.push(e.to_string());
            None
        }
    };

    let mut subs = Vec::new();
    for k in &cfg.subordinators.kinds {
        match parse_subordinator(k) {
            Ok(s) => subs.push(s),
            Err(e) => violations.push(e.to_string()),
        }
    }

    let mut dens = Vec::new();
    for j in 0..2 {
        match make_spectral_density(cfg.fields.n, cfg.fields.kappa[j], cfg.fields.l0[j]) {
            Ok(f) => dens.push(f),
            Err(e) => violations.push(format!("component {j}: {e}")),
        }
    }

    // Condition D range: 0 < kappa_j < n / m_j
    if subs.len() == 2 && dens.len() == 2 {
        for j in 0..2 {
            let m = subs[j].rank as f64;
            let mk = m * dens[j].kappa;
            if mk >= cfg.fields.n as f64 {
                violations.push(format!(
                    "component {j}: kappa*m = {mk} >= n = {} violates the Condition D range 0 < kappa < n/m",
                    cfg.fields.n
                ));
            }
        }
    }

    let mode = match cfg.scaling.mode.as_str() {
        "macro" => Some(ScalingMode::Macro),
        "micro" => Some(ScalingMode::Micro),
        other => {
            violations.push(format!("scaling mode '{other}' is not 'macro' or 'micro'"));
            None
        }
    };

    let probes: Vec<Probe> = cfg
        .scaling
        .probes
        .iter()
        .map(|r| ((r[0], r[1]), (r[2], r[3])))
        .collect();
    let scaling = mode.map(|mode| ScalingConfig {
        mode,
        eps_list: cfg.scaling.eps.clone(),
        chi: cfg.scaling.chi,
        probes,
        replicates: cfg.scaling.replicates,
        beta_b_scaling: cfg.scaling.beta_b_scaling,
    });
    if let Some(sc) = &scaling {
        if let Err(Error::Config(mut v)) = sc.validate() {
            violations.append(&mut v);
        }
    }

    // fractional LRD bounds (Theorems 4/5)
    if let (Some(p), true) = (&params, subs.len() == 2 && dens.len() == 2) {
        if p.beta < 1.0 - 1e-14 {
            let bound_macro = (2.0 * p.alpha).min(cfg.fields.n as f64);
            let bound_micro = (2.0 * (p.alpha + p.gamma_b)).min(cfg.fields.n as f64);
            for j in 0..2 {
                let mk = subs[j].rank as f64 * dens[j].kappa;
                match mode {
                    Some(ScalingMode::Macro) if mk >= bound_macro => violations.push(format!(
                        "component {j}: kappa*m = {mk} >= min(2 alpha, n) = {bound_macro} (fractional macro LRD bound)"
                    )),
                    Some(ScalingMode::Micro) if mk >= bound_micro => violations.push(format!(
                        "component {j}: kappa*m = {mk} >= min(2(alpha+gamma), n) = {bound_micro} (fractional micro LRD bound)"
                    )),
                    _ => {}
                }
            }
        }
    }

    if !violations.is_empty() {
        return Err(Error::Config(violations));
    }
    Ok(ValidatedConfig {
        raw: cfg.clone(),
        params: params.unwrap(),
        densities: [dens[0], dens[1]],
        subordinators: [subs.remove(0), subs.remove(0)],
        grid: grid.unwrap(),
        scaling: scaling.unwrap(),
    })
}

/// Derived-quantity echo for the `validate` subcommand.
pub fn echo_json(v: &ValidatedConfig) -> serde_json::Value {
    serde_json::json!({
        "config_hash": config_hash(&v.raw),
        "seed": v.raw.seed,
        "derived": {
            "d1": v.params.d1,
            "d2": v.params.d2,
            "b": v.params.b_matrix().0,
            "spectral_cutoffs": [v.densities[0].cutoff, v.densities[1].cutoff],
            "hermite_ranks": [v.subordinators[0].rank, v.subordinators[1].rank],
            "leading_coeffs": [
                v.subordinators[0].leading_coeff(),
                v.subordinators[1].leading_coeff()
            ],
            "nyquist": v.grid.nyquist(),
        }
    })
}

//! Experiment runner: parse configs, execute sample/marginal/landauer/theta
//! workflows, persist reproducible outputs.
//!
//! Configs are strict TOML (unknown keys are fatal) and every run writes a
//! manifest echoing the full configuration plus the resolved β', seeds, and
//! per-output checksums, so a manifest fed back in as `--config` reproduces
//! the same bytes on the same build.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analytic::{grid_moments, marginal_pz};
use crate::error::{Error, Result};
use crate::landauer::{erasure_sweep, BetaPrimePolicy, SweepScenario};
use crate::models::{
    build_degenerate_spin_bath, build_truncated_oscillator_bath, gibbs_mean_energy,
    oscillator_truncation, p_ensemble_mean_energy, solve_statistical_temperature, ModelSpec,
    ThermalContext,
};
use crate::sampler::{chain_statistics, histogram_z, run_chain, ChainConfig};

/// Experiment selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// MCMC sampling plus the matching analytic marginal.
    Sample,
    /// Quadrature marginal only.
    Marginal,
    /// Erasure-bound sweeps.
    Landauer,
    /// Statistical-temperature solves over a temperature set.
    Theta,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKindConfig {
    DegenerateSpinBath,
    TruncatedOscillator,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKindConfig,
    /// Qubit gap ħω0 (eV).
    pub hbar_omega0: f64,
    /// Coupling strength λ (eV).
    pub lambda: f64,
    /// Bath qubit count D (degenerate bath).
    pub d: Option<usize>,
    /// Common bath level energy E0 (eV, degenerate bath).
    pub e0: Option<f64>,
    /// Oscillator quantum ħω (eV).
    pub hbar_omega: Option<f64>,
    /// Explicit oscillator truncation M; defaults to the Boltzmann-tail rule.
    pub m: Option<usize>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSection {
    /// Single temperature k_BT (eV). Exactly one of this and `k_b_t_sweep`.
    pub k_b_t: Option<f64>,
    pub k_b_t_sweep: Option<SweepSection>,
    /// Explicit β' override (1/eV); solved from the consistency condition
    /// when absent.
    pub beta_prime: Option<f64>,
    /// "solved" (default) or "equal-beta".
    pub beta_prime_policy: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub samples: usize,
    pub burn_in: Option<usize>,
    pub thinning: Option<usize>,
    pub seed: u64,
    pub chains: Option<usize>,
    pub bins: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandauerSection {
    /// "bell-fidelity" or "thermal-erasure".
    pub scenario: String,
    pub bath_dims: Option<Vec<usize>>,
    pub fidelity_start: Option<f64>,
    pub fidelity_stop: Option<f64>,
    pub fidelity_points: Option<usize>,
    /// Boltzmann tail kept by the erasure-scenario truncation.
    pub truncation_tail: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
    pub raw_chain: Option<bool>,
}

/// Full experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub model: ModelSection,
    pub thermal: ThermalSection,
    pub chain: Option<ChainSection>,
    pub landauer: Option<LandauerSection>,
    pub output: Option<OutputSection>,
}

/// Wrapper shape of a manifest file, so a manifest can be fed back in as a
/// config.
#[derive(Debug, Deserialize)]
struct ManifestEnvelope {
    #[allow(dead_code)]
    run: toml::Value,
    #[allow(dead_code)]
    checksums: Option<toml::Value>,
    config: ExperimentConfig,
}

/// Parses a config (or a manifest, whose embedded config is extracted) and
/// validates it, reporting every violation rather than the first.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = if text.contains("[run]") {
        match toml::from_str::<ManifestEnvelope>(text) {
            Ok(envelope) => envelope.config,
            Err(_) => toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?,
        }
    } else {
        toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?
    };
    let violations = validate(&config);
    if violations.is_empty() {
        Ok(config)
    } else {
        Err(Error::Config(violations))
    }
}

fn validate(config: &ExperimentConfig) -> Vec<String> {
    let mut v = Vec::new();
    let model = &config.model;
    if !(model.hbar_omega0 > 0.0) {
        v.push(format!(
            "model.hbar_omega0 must be positive, got {}",
            model.hbar_omega0
        ));
    }
    if model.lambda < 0.0 {
        v.push(format!("model.lambda must be nonnegative, got {}", model.lambda));
    }
    match model.kind {
        ModelKindConfig::DegenerateSpinBath => {
            match model.d {
                Some(0) | None => v.push("model.d (bath qubit count >= 1) is required for the degenerate spin bath".into()),
                _ => {}
            }
            if model.hbar_omega.is_some() || model.m.is_some() {
                v.push("model.hbar_omega and model.m do not apply to the degenerate spin bath".into());
            }
        }
        ModelKindConfig::TruncatedOscillator => {
            match model.hbar_omega {
                Some(x) if x > 0.0 => {}
                Some(x) => v.push(format!("model.hbar_omega must be positive, got {x}")),
                None => v.push("model.hbar_omega is required for the truncated oscillator".into()),
            }
            if let Some(m) = model.m {
                if m < 2 {
                    v.push(format!("model.m must be at least 2, got {m}"));
                }
            }
            if model.d.is_some() || model.e0.is_some() {
                v.push("model.d and model.e0 do not apply to the truncated oscillator".into());
            }
        }
    }
    match (&config.thermal.k_b_t, &config.thermal.k_b_t_sweep) {
        (Some(_), Some(_)) => {
            v.push("thermal.k_b_t and thermal.k_b_t_sweep are mutually exclusive".into())
        }
        (None, None) => v.push("one of thermal.k_b_t or thermal.k_b_t_sweep is required".into()),
        (Some(t), None) => {
            if !(*t > 0.0) {
                v.push(format!("thermal.k_b_t must be positive, got {t}"));
            }
        }
        (None, Some(s)) => {
            if !(s.start > 0.0) || !(s.stop > s.start) || s.points < 2 {
                v.push(format!(
                    "thermal.k_b_t_sweep must satisfy 0 < start < stop with points >= 2, got {s:?}"
                ));
            }
        }
    }
    if let Some(bp) = config.thermal.beta_prime {
        if !(bp >= 0.0) {
            v.push(format!("thermal.beta_prime must be nonnegative, got {bp}"));
        }
    }
    if let Some(policy) = &config.thermal.beta_prime_policy {
        if policy != "solved" && policy != "equal-beta" {
            v.push(format!(
                "thermal.beta_prime_policy must be \"solved\" or \"equal-beta\", got \"{policy}\""
            ));
        }
        if config.thermal.beta_prime.is_some() {
            v.push("thermal.beta_prime and thermal.beta_prime_policy are mutually exclusive".into());
        }
    }
    match config.experiment.kind {
        ExperimentKind::Sample => {
            if config.chain.is_none() {
                v.push("[chain] is required for sample experiments".into());
            }
            if config.thermal.k_b_t.is_none() {
                v.push("sample experiments need a single thermal.k_b_t, not a sweep".into());
            }
        }
        ExperimentKind::Marginal => {
            if config.thermal.k_b_t.is_none() {
                v.push("marginal experiments need a single thermal.k_b_t, not a sweep".into());
            }
        }
        ExperimentKind::Landauer => match &config.landauer {
            None => v.push("[landauer] is required for landauer experiments".into()),
            Some(l) => match l.scenario.as_str() {
                "bell-fidelity" => {
                    if l.bath_dims.as_ref().is_none_or(|b| b.is_empty()) {
                        v.push("landauer.bath_dims is required for the bell-fidelity scenario".into());
                    }
                }
                "thermal-erasure" => {
                    if config.model.kind != ModelKindConfig::TruncatedOscillator {
                        v.push(
                            "thermal-erasure needs model.kind = \"truncated-oscillator\"".into(),
                        );
                    }
                }
                other => v.push(format!(
                    "landauer.scenario must be \"bell-fidelity\" or \"thermal-erasure\", got \"{other}\""
                )),
            },
        },
        ExperimentKind::Theta => {}
    }
    if let Some(chain) = &config.chain {
        if chain.samples == 0 {
            v.push("chain.samples must be positive".into());
        }
        if chain.thinning == Some(0) {
            v.push("chain.thinning must be >= 1".into());
        }
        if chain.chains == Some(0) {
            v.push("chain.chains must be >= 1".into());
        }
        if let Some(bins) = chain.bins {
            if bins < 2 {
                v.push("chain.bins must be >= 2".into());
            }
        }
    }
    v
}

impl ExperimentConfig {
    /// Builds the model at a given temperature (oscillator truncation may
    /// depend on it).
    pub fn build_model(&self, k_b_t: f64) -> Result<ModelSpec> {
        match self.model.kind {
            ModelKindConfig::DegenerateSpinBath => build_degenerate_spin_bath(
                self.model.hbar_omega0,
                self.model.d.unwrap_or(1),
                self.model.e0.unwrap_or(0.0),
                self.model.lambda,
            ),
            ModelKindConfig::TruncatedOscillator => {
                let hbar_omega = self.model.hbar_omega.unwrap_or(0.06);
                let m = self
                    .model
                    .m
                    .unwrap_or_else(|| oscillator_truncation(k_b_t, hbar_omega));
                build_truncated_oscillator_bath(
                    self.model.hbar_omega0,
                    m,
                    hbar_omega,
                    self.model.lambda,
                )
            }
        }
    }

    /// Resolves β' for a model at a temperature, honoring the override.
    pub fn resolve_context(&self, model: &ModelSpec, k_b_t: f64) -> Result<ThermalContext> {
        let beta = 1.0 / k_b_t;
        if let Some(bp) = self.thermal.beta_prime {
            return Ok(ThermalContext::with_beta_prime(beta, bp));
        }
        match self.thermal.beta_prime_policy.as_deref() {
            Some("equal-beta") => Ok(ThermalContext::with_beta_prime(beta, beta)),
            _ => solve_statistical_temperature(model, beta),
        }
    }

    fn temperatures(&self) -> Vec<f64> {
        match (&self.thermal.k_b_t, &self.thermal.k_b_t_sweep) {
            (Some(t), _) => vec![*t],
            (None, Some(s)) => (0..s.points)
                .map(|i| s.start + (s.stop - s.start) * i as f64 / (s.points - 1) as f64)
                .collect(),
            (None, None) => vec![],
        }
    }
}

/// What a run produced, echoed into the manifest.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub kind: ExperimentKind,
    pub files: Vec<PathBuf>,
    pub beta_prime: Option<f64>,
    pub solve_residual: Option<f64>,
    pub wall_seconds: f64,
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// FNV-1a 64-bit checksum, hex-encoded.
pub fn fnv1a64(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

/// Runs an experiment, writing its data CSV(s) and manifest under `out_dir`.
///
/// Outputs: `data.csv` (schema per experiment kind), `manifest.toml`, and
/// `chain.csv` when the config asks for the raw chain.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary> {
    let started = Instant::now();
    let mut files = Vec::new();
    let mut beta_prime = None;
    let mut solve_residual = None;

    let mut csv = String::new();
    match config.experiment.kind {
        ExperimentKind::Sample => {
            let k_b_t = config.thermal.k_b_t.expect("validated");
            let model = config.build_model(k_b_t)?;
            let ctx = config.resolve_context(&model, k_b_t)?;
            beta_prime = Some(ctx.beta_prime);
            solve_residual = Some(ctx.solve_residual);
            let chain = config.chain.as_ref().expect("validated");
            let cfg = ChainConfig {
                n_samples: chain.samples,
                burn_in: chain.burn_in.unwrap_or(chain.samples / 10),
                thinning: chain.thinning.unwrap_or(1),
                seed: chain.seed,
                n_chains: chain.chains.unwrap_or(1),
                keep_sigma: false,
            };
            let run = run_chain(&model, &ctx, &cfg)?;
            let bins = chain.bins.unwrap_or(40);
            let hist = histogram_z(&run, bins)?;
            let analytic = marginal_pz(&model, &ctx, &hist.centers, 32)?;
            csv.push_str("z_bin_center,density,stderr,analytic_density\n");
            for i in 0..bins {
                let _ = writeln!(
                    csv,
                    "{},{},{},{}",
                    fmt_f(hist.centers[i]),
                    fmt_f(hist.density[i]),
                    fmt_f(hist.stderr[i]),
                    fmt_f(analytic[i])
                );
            }
            if config.output.as_ref().and_then(|o| o.raw_chain) == Some(true) {
                let mut raw = String::from("index,z,energy,accepted\n");
                for (i, ((z, e), a)) in run
                    .z_values
                    .iter()
                    .zip(&run.energies)
                    .zip(&run.accepted_flags)
                    .enumerate()
                {
                    let _ = writeln!(raw, "{},{},{},{}", i, fmt_f(*z), fmt_f(*e), *a as u8);
                }
                let path = out_dir.join("chain.csv");
                write_file(&path, &raw)?;
                files.push(path);
            }
            let stats = chain_statistics(&run)?;
            eprintln!(
                "sample: acceptance {:.4}, mean_z {:.6} ± {:.2e}, var_z {:.6} ± {:.2e}, tau {:.2}",
                run.acceptance_rate, stats.mean_z, stats.se_mean, stats.var_z, stats.se_var,
                stats.autocorrelation_time
            );
        }
        ExperimentKind::Marginal => {
            let k_b_t = config.thermal.k_b_t.expect("validated");
            let model = config.build_model(k_b_t)?;
            let ctx = config.resolve_context(&model, k_b_t)?;
            beta_prime = Some(ctx.beta_prime);
            solve_residual = Some(ctx.solve_residual);
            let bins = config.chain.as_ref().and_then(|c| c.bins).unwrap_or(40);
            let width = 2.0 / bins as f64;
            let grid: Vec<f64> = (0..bins).map(|i| -1.0 + (i as f64 + 0.5) * width).collect();
            let density = marginal_pz(&model, &ctx, &grid, 32)?;
            let (mean, var) = grid_moments(&grid, &density);
            csv.push_str("z,density\n");
            for (z, d) in grid.iter().zip(&density) {
                let _ = writeln!(csv, "{},{}", fmt_f(*z), fmt_f(*d));
            }
            eprintln!("marginal: mean_z {mean:.6}, var_z {var:.6}");
        }
        ExperimentKind::Landauer => {
            let section = config.landauer.as_ref().expect("validated");
            match section.scenario.as_str() {
                "bell-fidelity" => {
                    let points = section.fidelity_points.unwrap_or(50);
                    let start = section.fidelity_start.unwrap_or(0.5);
                    let stop = section.fidelity_stop.unwrap_or(0.99);
                    let fidelities: Vec<f64> = (0..points)
                        .map(|i| start + (stop - start) * i as f64 / (points - 1).max(1) as f64)
                        .collect();
                    let scenario = SweepScenario::BellFidelity {
                        bath_dims: section.bath_dims.clone().unwrap_or_default(),
                        fidelities,
                    };
                    let rows = erasure_sweep(&scenario)?;
                    csv.push_str("fidelity,M,bound_kBTheta\n");
                    for r in rows {
                        let _ =
                            writeln!(csv, "{},{},{}", fmt_f(r.parameter), r.bath_dim, fmt_f(r.bound));
                    }
                }
                "thermal-erasure" => {
                    let policy = if let Some(bp) = config.thermal.beta_prime {
                        BetaPrimePolicy::Fixed(bp)
                    } else if config.thermal.beta_prime_policy.as_deref() == Some("equal-beta") {
                        BetaPrimePolicy::EqualToBeta
                    } else {
                        BetaPrimePolicy::Solved
                    };
                    let scenario = SweepScenario::ThermalErasure {
                        temperatures: config.temperatures(),
                        hbar_omega0: config.model.hbar_omega0,
                        hbar_omega: config.model.hbar_omega.unwrap_or(0.06),
                        lambda: config.model.lambda,
                        policy,
                        truncation_tail: section.truncation_tail.unwrap_or(1e-2),
                    };
                    let rows = erasure_sweep(&scenario)?;
                    csv.push_str(
                        "k_b_t,M,beta_prime,bound_kBTheta,bound_kBT,delta_s_vn,log_det_term,trace_term\n",
                    );
                    for r in rows {
                        let _ = writeln!(
                            csv,
                            "{},{},{},{},{},{},{},{}",
                            fmt_f(r.parameter),
                            r.bath_dim,
                            fmt_f(r.beta_prime),
                            fmt_f(r.bound),
                            fmt_f(r.bound_thermo),
                            fmt_f(r.delta_s_vn.unwrap_or(f64::NAN)),
                            fmt_f(r.components.log_det_term),
                            fmt_f(r.components.trace_term)
                        );
                    }
                }
                _ => unreachable!("validated"),
            }
        }
        ExperimentKind::Theta => {
            csv.push_str("k_b_t,beta,beta_prime,residual,gibbs_energy,ensemble_energy\n");
            for k_b_t in config.temperatures() {
                let model = config.build_model(k_b_t)?;
                let ctx = config.resolve_context(&model, k_b_t)?;
                let spectrum = model.composite_spectrum();
                let gibbs = gibbs_mean_energy(&spectrum, ctx.beta);
                let ensemble = p_ensemble_mean_energy(&spectrum, ctx.beta_prime)?;
                beta_prime = Some(ctx.beta_prime);
                solve_residual = Some(ctx.solve_residual);
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    fmt_f(k_b_t),
                    fmt_f(ctx.beta),
                    fmt_f(ctx.beta_prime),
                    fmt_f(ctx.solve_residual),
                    fmt_f(gibbs),
                    fmt_f(ensemble)
                );
            }
        }
    }

    let data_path = out_dir.join("data.csv");
    write_file(&data_path, &csv)?;
    files.push(data_path);

    let manifest = render_manifest(config, &files, beta_prime, solve_residual, started)?;
    let manifest_path = out_dir.join("manifest.toml");
    write_file(&manifest_path, &manifest)?;
    files.push(manifest_path);

    Ok(RunSummary {
        kind: config.experiment.kind,
        files,
        beta_prime,
        solve_residual,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

fn render_manifest(
    config: &ExperimentConfig,
    files: &[PathBuf],
    beta_prime: Option<f64>,
    solve_residual: Option<f64>,
    started: Instant,
) -> Result<String> {
    let mut out = String::new();
    out.push_str("[run]\n");
    let _ = writeln!(out, "tool = \"pensemble\"");
    let _ = writeln!(out, "version = \"{}\"", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "kind = \"{:?}\"", config.experiment.kind);
    if let Some(bp) = beta_prime {
        let _ = writeln!(out, "beta_prime = {}", fmt_f(bp));
    }
    if let Some(res) = solve_residual {
        if res.is_finite() {
            let _ = writeln!(out, "solve_residual = {}", fmt_f(res));
        }
    }
    if let Some(chain) = &config.chain {
        let _ = writeln!(out, "seed = {}", chain.seed);
    }
    let _ = writeln!(
        out,
        "wall_clock_seconds = {}",
        fmt_f(started.elapsed().as_secs_f64())
    );
    out.push_str("\n[checksums]\n");
    for f in files {
        let bytes = std::fs::read(f)?;
        let _ = writeln!(
            out,
            "\"{}\" = \"fnv1a64:{}\"",
            f.file_name().unwrap().to_string_lossy(),
            fnv1a64(&bytes)
        );
    }
    out.push_str("\n[config]\n");
    let config_toml =
        toml::to_string(config).map_err(|e| Error::InvalidInput(format!("config render: {e}")))?;
    // Nest the echoed config one level down.
    for line in config_toml.lines() {
        if let Some(rest) = line.strip_prefix("[") {
            let _ = writeln!(out, "[config.{rest}");
        } else {
            let _ = writeln!(out, "{line}");
        }
    }
    Ok(out)
}

/// Comparison outcome between a sampled histogram and an analytic marginal.
#[derive(Debug, Clone)]
pub struct CompareReport {
    pub tv_distance: f64,
    pub variance_ratio: f64,
    pub tv_threshold: f64,
    pub pass: bool,
}

fn parse_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::InvalidInput(format!("{}: empty CSV", path.display())))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| {
            Error::InvalidInput(format!("{}:{}: {e}", path.display(), ln + 2))
        })?;
        if row.len() != header.len() {
            return Err(Error::InvalidInput(format!(
                "{}:{}: expected {} columns, got {}",
                path.display(),
                ln + 2,
                header.len(),
                row.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

fn column<'a>(
    header: &[String],
    rows: &'a [Vec<f64>],
    name: &str,
    path: &Path,
) -> Result<Vec<f64>> {
    let idx = header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::InvalidInput(format!("{}: no column \"{name}\"", path.display())))?;
    Ok(rows.iter().map(|r| r[idx]).collect())
}

/// Compares a sampled-density CSV against an analytic-density CSV on the same
/// z grid: total-variation distance and variance ratio against a threshold.
pub fn compare_report(
    sampled_path: &Path,
    analytic_path: &Path,
    tv_threshold: f64,
) -> Result<CompareReport> {
    let (sh, srows) = parse_csv(sampled_path)?;
    let (ah, arows) = parse_csv(analytic_path)?;
    let sz = column(&sh, &srows, sh.first().map(String::as_str).unwrap_or(""), sampled_path)?;
    let az = column(&ah, &arows, ah.first().map(String::as_str).unwrap_or(""), analytic_path)?;
    if sz.len() != az.len() {
        return Err(Error::GridMismatch(format!(
            "{} rows vs {} rows",
            sz.len(),
            az.len()
        )));
    }
    for (a, b) in sz.iter().zip(&az) {
        if (a - b).abs() > 1e-9 {
            return Err(Error::GridMismatch(format!("z grids differ: {a} vs {b}")));
        }
    }
    let sampled = column(&sh, &srows, "density", sampled_path)?;
    let analytic = column(&ah, &arows, "density", analytic_path)?;

    // Normalize both to unit mass over the shared grid before comparing.
    let mass = |d: &[f64]| -> f64 {
        let mut total = 0.0;
        for i in 0..sz.len() - 1 {
            total += 0.5 * (d[i] + d[i + 1]) * (sz[i + 1] - sz[i]);
        }
        total
    };
    let (ms, ma) = (mass(&sampled), mass(&analytic));
    let mut tv = 0.0;
    for i in 0..sz.len() - 1 {
        let ds = 0.5 * (sampled[i] / ms + sampled[i + 1] / ms);
        let da = 0.5 * (analytic[i] / ma + analytic[i + 1] / ma);
        tv += 0.5 * (ds - da).abs() * (sz[i + 1] - sz[i]);
    }
    let (_, var_s) = grid_moments(&sz, &sampled);
    let (_, var_a) = grid_moments(&az, &analytic);
    let report = CompareReport {
        tv_distance: tv,
        variance_ratio: var_s / var_a,
        tv_threshold,
        pass: tv < tv_threshold,
    };
    Ok(report)
}

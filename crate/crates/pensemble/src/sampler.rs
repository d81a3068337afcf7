//! Metropolis-Hastings sampling of composite pure states.
//!
//! Proposals are fresh uniform draws from the real (2NM−1)-sphere (a Gaussian
//! vector, normalized), which makes the proposal density constant and the
//! acceptance rule the bare Boltzmann ratio min(1, e^{-β'ΔH̄}). Chains are
//! embarrassingly parallel: chain c seeds its own generator with seed + c and
//! the outputs are concatenated in chain order, so results are reproducible
//! for a given (seed, config, model) regardless of scheduling.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::{ModelSpec, ThermalContext};
use crate::quantum::{partial_trace_bath, CompositeState, HermitianOperator, SystemDensityMatrix};

/// Acceptance rates below this trigger a stderr warning: the chain is still
/// correct but almost certainly undersampled.
pub const ACCEPTANCE_FLOOR: f64 = 1e-3;

/// Chain length and reproducibility knobs.
#[derive(Debug, Clone)]
pub struct ChainConfig {
    /// Post-burn-in samples kept per chain (before thinning).
    pub n_samples: usize,
    /// Discarded leading samples per chain.
    pub burn_in: usize,
    /// Keep every `thinning`-th sample.
    pub thinning: usize,
    pub seed: u64,
    pub n_chains: usize,
    /// Also retain the reduced density matrices (memory-heavy).
    pub keep_sigma: bool,
}

impl ChainConfig {
    /// Defaults: burn-in 10% of the requested length, no thinning, one chain.
    pub fn new(n_samples: usize, seed: u64) -> Self {
        Self {
            n_samples,
            burn_in: n_samples / 10,
            thinning: 1,
            seed,
            n_chains: 1,
            keep_sigma: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidInput("n_samples must be positive".into()));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidInput("thinning must be >= 1".into()));
        }
        if self.n_chains == 0 {
            return Err(Error::InvalidInput("n_chains must be >= 1".into()));
        }
        Ok(())
    }
}

/// Output of one run: z-coordinates, energies, and bookkeeping.
#[derive(Debug, Clone)]
pub struct SampleSet {
    /// Tr{σ_z σ} per kept sample, chains concatenated in order.
    pub z_values: Vec<f64>,
    /// Quantum-average energies H̄ per kept sample (eV).
    pub energies: Vec<f64>,
    /// Whether the step that produced each kept sample accepted its proposal.
    pub accepted_flags: Vec<bool>,
    pub sigma_samples: Option<Vec<SystemDensityMatrix>>,
    /// Accepted proposals / total proposals, over all chains.
    pub acceptance_rate: f64,
    pub accepted: u64,
    pub proposed: u64,
    pub n_chains: usize,
    /// Kept samples per chain (equal across chains).
    pub chain_len: usize,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.z_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_values.is_empty()
    }

    /// z-values of one chain.
    pub fn chain_z(&self, c: usize) -> &[f64] {
        &self.z_values[c * self.chain_len..(c + 1) * self.chain_len]
    }
}

/// Uniform draw from the unit sphere of C^dim (2·dim real Gaussians, normalized).
pub fn sample_uniform_sphere(n: usize, m: usize, rng: &mut impl Rng) -> CompositeState {
    let dim = n * m;
    loop {
        let amps = DVector::from_fn(dim, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let norm_sq: f64 = amps.iter().map(|c| c.norm_sqr()).sum();
        if norm_sq > 0.0 {
            let amps = amps / Complex64::new(norm_sq.sqrt(), 0.0);
            return CompositeState::new(amps, n, m).expect("normalized draw is a valid state");
        }
        // A zero draw has probability ~0; redraw.
    }
}

/// One Metropolis step with an independence proposal.
///
/// Returns the new state and whether the proposal was accepted. On rejection
/// the current state is repeated in the chain.
pub fn metropolis_step(
    current: CompositeState,
    proposal: CompositeState,
    beta_prime: f64,
    h: &HermitianOperator,
    rng: &mut impl Rng,
) -> Result<(CompositeState, bool)> {
    let e_current = crate::quantum::expectation(&current, h)?;
    let e_proposal = crate::quantum::expectation(&proposal, h)?;
    let u: f64 = rng.gen();
    Ok(accept_or_reject(
        current, e_current, proposal, e_proposal, beta_prime, u,
    ))
}

fn accept_or_reject(
    current: CompositeState,
    e_current: f64,
    proposal: CompositeState,
    e_proposal: f64,
    beta_prime: f64,
    uniform: f64,
) -> (CompositeState, bool) {
    let log_ratio = -beta_prime * (e_proposal - e_current);
    if log_ratio >= 0.0 || uniform <= log_ratio.exp() {
        (proposal, true)
    } else {
        (current, false)
    }
}

/// Precomputed sparse view of a model Hamiltonian for the hot loop.
struct EnergyEvaluator<'a> {
    model: &'a ModelSpec,
    bath_diag: Option<Vec<f64>>,
    /// Nonzero coupling entries (row, col, value).
    coupling_nnz: Vec<(usize, usize, Complex64)>,
}

impl<'a> EnergyEvaluator<'a> {
    fn new(model: &'a ModelSpec) -> Self {
        let bath_diag = if model.h_bath.is_diagonal() {
            Some(
                (0..model.h_bath.dim())
                    .map(|i| model.h_bath.matrix()[(i, i)].re)
                    .collect(),
            )
        } else {
            None
        };
        let dim = model.coupling.dim();
        let mut coupling_nnz = Vec::new();
        for i in 0..dim {
            for j in 0..dim {
                let v = model.coupling.matrix()[(i, j)];
                if v.norm() > 0.0 {
                    coupling_nnz.push((i, j, v));
                }
            }
        }
        Self {
            model,
            bath_diag,
            coupling_nnz,
        }
    }

    /// ⟨Ψ|Ĥ|Ψ⟩ using the system-bath structure.
    fn energy(&self, state: &CompositeState) -> f64 {
        let (n, m) = self.model.dims;
        let mut total = 0.0;

        // System part: Tr{H_S σ} with σ built on the fly.
        let hs = self.model.h_system.matrix();
        for a in 0..n {
            for b in 0..n {
                if hs[(b, a)].norm() == 0.0 {
                    continue;
                }
                let mut sigma_ab = Complex64::new(0.0, 0.0);
                for j in 0..m {
                    sigma_ab += state.coefficient(a, j) * state.coefficient(b, j).conj();
                }
                total += (hs[(b, a)] * sigma_ab).re;
            }
        }

        // Bath part.
        match &self.bath_diag {
            Some(diag) => {
                for i in 0..n {
                    for j in 0..m {
                        total += diag[j] * state.coefficient(i, j).norm_sqr();
                    }
                }
            }
            None => {
                let hb = self.model.h_bath.matrix();
                for a in 0..m {
                    for b in 0..m {
                        if hb[(b, a)].norm() == 0.0 {
                            continue;
                        }
                        let mut gamma_ab = Complex64::new(0.0, 0.0);
                        for i in 0..n {
                            gamma_ab += state.coefficient(i, a) * state.coefficient(i, b).conj();
                        }
                        total += (hb[(b, a)] * gamma_ab).re;
                    }
                }
            }
        }

        // Coupling via its nonzero entries.
        let amps = state.amplitudes();
        let mut vc = Complex64::new(0.0, 0.0);
        for &(i, j, v) in &self.coupling_nnz {
            vc += amps[i].conj() * v * amps[j];
        }
        total + vc.re
    }
}

/// z = Tr{σ_z σ} read off the amplitudes directly (N = 2 convention).
fn z_coordinate(state: &CompositeState) -> f64 {
    let (_, m) = state.dims();
    let mut z = 0.0;
    for j in 0..m {
        z += state.coefficient(0, j).norm_sqr() - state.coefficient(1, j).norm_sqr();
    }
    z
}

/// Runs Metropolis-Hastings chains over composite pure states.
///
/// Deterministic for fixed (model, ctx, cfg): chain c uses seed + c.
pub fn run_chain(model: &ModelSpec, ctx: &ThermalContext, cfg: &ChainConfig) -> Result<SampleSet> {
    cfg.validate()?;
    let kept_per_chain = cfg.n_samples / cfg.thinning;
    let evaluator = EnergyEvaluator::new(model);

    let chains: Vec<ChainOutput> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|c| run_single_chain(model, ctx, cfg, &evaluator, c))
        .collect();

    let mut z_values = Vec::with_capacity(cfg.n_chains * kept_per_chain);
    let mut energies = Vec::with_capacity(cfg.n_chains * kept_per_chain);
    let mut accepted_flags = Vec::with_capacity(cfg.n_chains * kept_per_chain);
    let mut sigma_samples = cfg.keep_sigma.then(Vec::new);
    let mut accepted = 0u64;
    let mut proposed = 0u64;
    for mut chain in chains {
        z_values.append(&mut chain.z);
        energies.append(&mut chain.energy);
        accepted_flags.append(&mut chain.accepted_flag);
        if let (Some(all), Some(mut one)) = (sigma_samples.as_mut(), chain.sigma) {
            all.append(&mut one);
        }
        accepted += chain.accepted;
        proposed += chain.proposed;
    }
    let acceptance_rate = accepted as f64 / proposed.max(1) as f64;
    if acceptance_rate < ACCEPTANCE_FLOOR {
        eprintln!(
            "warning: acceptance rate {acceptance_rate:.2e} below {ACCEPTANCE_FLOOR:.0e}; \
             independence proposals are inefficient here and the chain is likely undersampled"
        );
    }
    Ok(SampleSet {
        z_values,
        energies,
        accepted_flags,
        sigma_samples,
        acceptance_rate,
        accepted,
        proposed,
        n_chains: cfg.n_chains,
        chain_len: kept_per_chain,
    })
}

struct ChainOutput {
    z: Vec<f64>,
    energy: Vec<f64>,
    accepted_flag: Vec<bool>,
    sigma: Option<Vec<SystemDensityMatrix>>,
    accepted: u64,
    proposed: u64,
}

fn run_single_chain(
    model: &ModelSpec,
    ctx: &ThermalContext,
    cfg: &ChainConfig,
    evaluator: &EnergyEvaluator,
    chain_index: usize,
) -> ChainOutput {
    let (n, m) = model.dims;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed.wrapping_add(chain_index as u64));
    let kept_per_chain = cfg.n_samples / cfg.thinning;
    let mut z = Vec::with_capacity(kept_per_chain);
    let mut energy = Vec::with_capacity(kept_per_chain);
    let mut accepted_flag = Vec::with_capacity(kept_per_chain);
    let mut sigma = cfg.keep_sigma.then(|| Vec::with_capacity(kept_per_chain));
    let mut accepted = 0u64;
    let mut proposed = 0u64;

    let mut current = sample_uniform_sphere(n, m, &mut rng);
    let mut e_current = evaluator.energy(&current);

    let total_steps = cfg.burn_in + cfg.n_samples;
    for step in 0..total_steps {
        let proposal = sample_uniform_sphere(n, m, &mut rng);
        let e_proposal = evaluator.energy(&proposal);
        let u: f64 = rng.gen();
        let (next, was_accepted) =
            accept_or_reject(current, e_current, proposal, e_proposal, ctx.beta_prime, u);
        current = next;
        if was_accepted {
            e_current = e_proposal;
            accepted += 1;
        }
        proposed += 1;
        if step >= cfg.burn_in {
            let kept_index = step - cfg.burn_in;
            if kept_index % cfg.thinning == 0 && z.len() < kept_per_chain {
                z.push(z_coordinate(&current));
                energy.push(e_current);
                accepted_flag.push(was_accepted);
                if let Some(s) = sigma.as_mut() {
                    s.push(partial_trace_bath(&current).expect("valid reduced state"));
                }
            }
        }
    }
    ChainOutput {
        z,
        energy,
        accepted_flag,
        sigma,
        accepted,
        proposed,
    }
}

/// Binned density on [-1, 1] with per-bin standard errors.
#[derive(Debug, Clone)]
pub struct HistogramZ {
    pub centers: Vec<f64>,
    pub density: Vec<f64>,
    pub stderr: Vec<f64>,
    pub bin_width: f64,
}

/// Histogram of z-values as a normalized density over [-1, 1].
///
/// Errors are binomial counting errors inflated by the square root of the
/// chain's integrated autocorrelation time.
pub fn histogram_z(samples: &SampleSet, bins: usize) -> Result<HistogramZ> {
    if bins < 2 {
        return Err(Error::InvalidInput("need at least 2 bins".into()));
    }
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let width = 2.0 / bins as f64;
    let mut counts = vec![0.0_f64; bins];
    let n = samples.len() as f64;
    for &z in &samples.z_values {
        let idx = (((z + 1.0) / width) as usize).min(bins - 1);
        counts[idx] += 1.0;
    }
    let tau = if samples.len() >= 100 {
        chain_statistics(samples)?.autocorrelation_time
    } else {
        1.0
    };
    let n_eff = n / tau.max(1.0);
    let centers: Vec<f64> = (0..bins).map(|i| -1.0 + (i as f64 + 0.5) * width).collect();
    let density: Vec<f64> = counts.iter().map(|c| c / (n * width)).collect();
    let stderr: Vec<f64> = counts
        .iter()
        .map(|c| {
            let p = c / n;
            (p * (1.0 - p) / n_eff).sqrt() / width
        })
        .collect();
    Ok(HistogramZ {
        centers,
        density,
        stderr,
        bin_width: width,
    })
}

/// Summary statistics of the z-chain.
#[derive(Debug, Clone, Copy)]
pub struct ChainStatistics {
    pub mean_z: f64,
    /// Unbiased sample variance.
    pub var_z: f64,
    pub se_mean: f64,
    pub se_var: f64,
    /// Integrated autocorrelation time (1 for i.i.d. samples).
    pub autocorrelation_time: f64,
}

/// Mean, variance, autocorrelation time, and their standard errors.
///
/// Standard errors are scaled by √τ where τ is the integrated autocorrelation
/// time estimated per chain with a self-consistent window.
pub fn chain_statistics(samples: &SampleSet) -> Result<ChainStatistics> {
    let n = samples.len();
    if n < 100 {
        return Err(Error::TooFewSamples { need: 100, got: n });
    }
    let mean = samples.z_values.iter().sum::<f64>() / n as f64;
    let mut m2 = 0.0;
    let mut m4 = 0.0;
    for &z in &samples.z_values {
        let d = z - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    let var = m2 / (n as f64 - 1.0);
    let m2n = m2 / n as f64;
    let m4n = m4 / n as f64;

    // τ per chain, averaged.
    let mut tau_sum = 0.0;
    let mut tau_chains = 0;
    for c in 0..samples.n_chains {
        let chain = samples.chain_z(c);
        if chain.len() >= 100 {
            tau_sum += integrated_autocorrelation_time(chain);
            tau_chains += 1;
        }
    }
    let tau = if tau_chains > 0 {
        tau_sum / tau_chains as f64
    } else {
        integrated_autocorrelation_time(&samples.z_values)
    };

    let n_eff = n as f64 / tau.max(1.0);
    let se_mean = (var / n_eff).sqrt();
    // Delta-method variance of the sample variance, inflated for correlation.
    let var_of_var = (m4n - m2n * m2n).max(0.0);
    let se_var = (var_of_var / n_eff).sqrt();
    Ok(ChainStatistics {
        mean_z: mean,
        var_z: var,
        se_mean,
        se_var,
        autocorrelation_time: tau,
    })
}

/// Sokal-style windowed estimate: τ = 1 + 2 Σ ρ_k, stopping the window at the
/// smallest k ≥ 6τ.
pub fn integrated_autocorrelation_time(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 10 {
        return 1.0;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c0: f64 = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 1.0;
    }
    let max_lag = (n / 4).min(2048);
    let mut tau = 1.0;
    for k in 1..max_lag {
        let mut ck = 0.0;
        for i in 0..n - k {
            ck += (series[i] - mean) * (series[i + k] - mean);
        }
        ck /= (n - k) as f64;
        let rho = ck / c0;
        tau += 2.0 * rho;
        if (k as f64) >= 6.0 * tau {
            break;
        }
    }
    tau.max(1e-3)
}

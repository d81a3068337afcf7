//! The two benchmark system-bath models, the Gibbs state, and the
//! statistical-temperature solver.
//!
//! Both baths are diagonal in the construction basis: the degenerate spin
//! bath ties D unbiased qubits at a common energy E0 (M = 2^D), the truncated
//! oscillator carries the ladder ħω(i + 1/2). The coupling enters through a
//! single Hermitian operator on the composite space with strength λ folded in.
//!
//! The statistical inverse temperature β' is fixed by requiring the ensemble
//! of pure composite states to reproduce the Gibbs mean energy at the
//! thermodynamic β; the two agree at exactly one β' ≥ 0 because the tilted
//! sphere-average energy decreases monotonically from the arithmetic mean.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quantum::{
    hermitian_eigen, kron, pauli_x, HermitianOperator, Spectrum, SystemDensityMatrix,
};
use crate::simplex::SimplexTransform;

/// Relative tolerance (scaled by the spectral spread) for the β' solve.
pub const THETA_SOLVE_REL_TOL: f64 = 1e-10;
/// λ below this multiple of the smallest positive spectral gap counts as weak.
pub const WEAK_COUPLING_FACTOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    DegenerateSpinBath,
    TruncatedOscillator,
}

/// A system-bath model: Ĥ = Ĥ_S ⊗ 1_M + 1_N ⊗ Ĥ_B + V̂.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub h_system: HermitianOperator,
    pub h_bath: HermitianOperator,
    /// Full N·M × N·M coupling operator with the strength λ folded in.
    pub coupling: HermitianOperator,
    pub lambda: f64,
    pub dims: (usize, usize),
    pub kind: ModelKind,
    /// Set when λ is far below the smallest positive spectral gap.
    pub weak_coupling: bool,
}

impl ModelSpec {
    pub fn new(
        h_system: HermitianOperator,
        h_bath: HermitianOperator,
        coupling: HermitianOperator,
        lambda: f64,
        kind: ModelKind,
    ) -> Result<Self> {
        let n = h_system.dim();
        let m = h_bath.dim();
        if coupling.dim() != n * m {
            return Err(Error::DimensionMismatch(format!(
                "coupling dimension {} does not match N·M = {}",
                coupling.dim(),
                n * m
            )));
        }
        let weak_coupling = match min_positive_gap(&h_system, &h_bath) {
            Some(gap) => lambda.abs() < WEAK_COUPLING_FACTOR * gap,
            None => false,
        };
        Ok(Self {
            h_system,
            h_bath,
            coupling,
            lambda,
            dims: (n, m),
            kind,
            weak_coupling,
        })
    }

    /// Assembles Ĥ_S ⊗ 1_M + 1_N ⊗ Ĥ_B + V̂.
    pub fn full_hamiltonian(&self) -> HermitianOperator {
        let (n, m) = self.dims;
        let id_n = DMatrix::<Complex64>::identity(n, n);
        let id_m = DMatrix::<Complex64>::identity(m, m);
        let full = kron(self.h_system.matrix(), &id_m)
            + kron(&id_n, self.h_bath.matrix())
            + self.coupling.matrix();
        HermitianOperator::new(full).expect("assembled Hamiltonian is Hermitian")
    }

    /// Spectrum of the full composite Hamiltonian.
    pub fn composite_spectrum(&self) -> Spectrum {
        self.full_hamiltonian().spectrum()
    }
}

fn min_positive_gap(h_system: &HermitianOperator, h_bath: &HermitianOperator) -> Option<f64> {
    let mut best: Option<f64> = None;
    for op in [h_system, h_bath] {
        let spec = op.spectrum();
        for pair in spec.group_means().windows(2) {
            let gap = pair[1] - pair[0];
            if gap > 0.0 {
                best = Some(best.map_or(gap, |b: f64| b.min(gap)));
            }
        }
    }
    best
}

/// Thermodynamic and statistical inverse temperatures.
#[derive(Debug, Clone, Copy)]
pub struct ThermalContext {
    /// 1/(k_B T), 1/eV.
    pub beta: f64,
    /// 1/(k_B Θ), 1/eV.
    pub beta_prime: f64,
    /// |mean-energy mismatch| / spectral spread at the returned β'.
    pub solve_residual: f64,
    /// The consistency condition fixes nothing for a fully degenerate spectrum.
    pub constraint_vacuous: bool,
    /// β' was supplied explicitly rather than solved.
    pub overridden: bool,
}

impl ThermalContext {
    /// Context with an explicitly chosen β' (no solve).
    pub fn with_beta_prime(beta: f64, beta_prime: f64) -> Self {
        Self {
            beta,
            beta_prime,
            solve_residual: f64::NAN,
            constraint_vacuous: false,
            overridden: true,
        }
    }
}

/// Qubit Hamiltonian −(ħω0/2)σ_z = diag(−ħω0/2, +ħω0/2) in the logical basis.
pub fn build_qubit_system(hbar_omega0: f64) -> Result<HermitianOperator> {
    if !(hbar_omega0 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "qubit gap must be positive, got {hbar_omega0}"
        )));
    }
    Ok(HermitianOperator::from_real_diagonal(&[
        -hbar_omega0 / 2.0,
        hbar_omega0 / 2.0,
    ]))
}

/// Qubit system coupled to D unbiased bath qubits at common energy E0.
///
/// Ĥ_B = E0·1 with M = 2^D and V̂ = λ (σ_x ⊗ σ_x^{⊗D}).
pub fn build_degenerate_spin_bath(
    hbar_omega0: f64,
    d: usize,
    e0: f64,
    lambda: f64,
) -> Result<ModelSpec> {
    if d == 0 {
        return Err(Error::InvalidInput("bath qubit count D must be >= 1".into()));
    }
    let h_system = build_qubit_system(hbar_omega0)?;
    let m = 1usize << d;
    let h_bath = HermitianOperator::from_real_diagonal(&vec![e0; m]);
    let mut v = pauli_x();
    for _ in 0..d {
        v = kron(&v, &pauli_x());
    }
    let coupling = HermitianOperator::new(v * Complex64::new(lambda, 0.0))?;
    ModelSpec::new(
        h_system,
        h_bath,
        coupling,
        lambda,
        ModelKind::DegenerateSpinBath,
    )
}

/// Qubit system coupled to the displacement of a truncated harmonic
/// oscillator: ⟨i|Ĥ_B|j⟩ = ħω(i + 1/2)δ_ij, V̂ = λ (σ_x ⊗ x̂).
pub fn build_truncated_oscillator_bath(
    hbar_omega0: f64,
    m: usize,
    hbar_omega: f64,
    lambda: f64,
) -> Result<ModelSpec> {
    if m < 2 {
        return Err(Error::InvalidInput(format!(
            "oscillator truncation must keep at least 2 levels, got {m}"
        )));
    }
    if !(hbar_omega > 0.0) {
        return Err(Error::InvalidInput("oscillator quantum must be positive".into()));
    }
    let h_system = build_qubit_system(hbar_omega0)?;
    let ladder: Vec<f64> = (0..m).map(|i| hbar_omega * (i as f64 + 0.5)).collect();
    let h_bath = HermitianOperator::from_real_diagonal(&ladder);
    let x_op = displacement_operator(m);
    let coupling =
        HermitianOperator::new(kron(&pauli_x(), &x_op) * Complex64::new(lambda, 0.0))?;
    ModelSpec::new(
        h_system,
        h_bath,
        coupling,
        lambda,
        ModelKind::TruncatedOscillator,
    )
}

/// Displacement operator matrix elements ⟨i|x̂|j⟩ = √i δ_{i,j+1} + √j δ_{j,i+1}.
pub fn displacement_operator(m: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(m, m, |i, j| {
        if i == j + 1 {
            Complex64::new((i as f64).sqrt(), 0.0)
        } else if j == i + 1 {
            Complex64::new((j as f64).sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Smallest M whose Boltzmann tail e^{-βħωM} drops below 1e-4, and at least 2.
pub fn oscillator_truncation(k_b_t: f64, hbar_omega: f64) -> usize {
    oscillator_truncation_with_tail(k_b_t, hbar_omega, 1e-4)
}

/// Smallest M with e^{-βħωM} below the given tail, and at least 2.
pub fn oscillator_truncation_with_tail(k_b_t: f64, hbar_omega: f64, tail: f64) -> usize {
    let needed = ((1.0 / tail).ln() * k_b_t / hbar_omega).floor() as usize + 1;
    needed.max(2)
}

/// Gibbs state e^{-βĤ}/Tr{e^{-βĤ}}.
pub fn gibbs_state(h: &HermitianOperator, beta: f64) -> Result<SystemDensityMatrix> {
    if !(beta > 0.0) {
        return Err(Error::InvalidInput(format!(
            "inverse temperature must be positive, got {beta}"
        )));
    }
    let (evals, evecs) = hermitian_eigen(h.matrix());
    let e_min = evals.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = evals.iter().map(|e| (-beta * (e - e_min)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let dim = h.dim();
    let mut mat = DMatrix::<Complex64>::zeros(dim, dim);
    for k in 0..dim {
        let w = Complex64::new(weights[k] / z, 0.0);
        let col = evecs.column(k);
        for i in 0..dim {
            for j in 0..dim {
                mat[(i, j)] += w * col[i] * col[j].conj();
            }
        }
    }
    SystemDensityMatrix::new(mat)
}

/// Gibbs mean energy Σ E e^{-βE} / Σ e^{-βE} from a spectrum.
pub fn gibbs_mean_energy(spectrum: &Spectrum, beta: f64) -> f64 {
    let e_min = spectrum.min();
    let mut z = 0.0;
    let mut zu = 0.0;
    for &e in spectrum.values() {
        let w = (-beta * (e - e_min)).exp();
        z += w;
        zu += w * e;
    }
    zu / z
}

/// Mean energy of the pure-state ensemble at statistical inverse temperature
/// β': the flat sphere measure reweighted by e^{-β'·⟨Ĥ⟩}.
pub fn p_ensemble_mean_energy(spectrum: &Spectrum, beta_prime: f64) -> Result<f64> {
    let t = SimplexTransform::new(spectrum.values())?;
    Ok(t.evaluate(beta_prime).mean_energy)
}

/// ln of the ensemble partition function E[e^{-β'·⟨Ĥ⟩}] over the sphere.
pub fn p_ensemble_log_partition(spectrum: &Spectrum, beta_prime: f64) -> Result<f64> {
    let t = SimplexTransform::new(spectrum.values())?;
    Ok(t.evaluate(beta_prime).log_partition)
}

/// Solves the mean-energy consistency condition for β'.
///
/// Finds β' ≥ 0 with ⟨H̄⟩_ensemble(β') = Tr{Ĥ ρ_G(β)} by doubling a bracket
/// and then bisecting, tightened with secant steps. Monotonicity of the
/// tilted mean guarantees the root is unique.
pub fn solve_statistical_temperature(model: &ModelSpec, beta: f64) -> Result<ThermalContext> {
    let spectrum = model.composite_spectrum();
    solve_statistical_temperature_for_spectrum(&spectrum, beta)
}

/// Same solve, starting from a precomputed composite spectrum.
pub fn solve_statistical_temperature_for_spectrum(
    spectrum: &Spectrum,
    beta: f64,
) -> Result<ThermalContext> {
    if spectrum.is_empty() {
        return Err(Error::InvalidInput("empty composite spectrum".into()));
    }
    if beta < 0.0 {
        return Err(Error::InvalidInput(format!("negative beta: {beta}")));
    }
    let spread = spectrum.max() - spectrum.min();
    if spectrum.is_fully_degenerate() {
        // Any β' satisfies the constraint; report β' = β and flag it.
        return Ok(ThermalContext {
            beta,
            beta_prime: beta,
            solve_residual: 0.0,
            constraint_vacuous: true,
            overridden: false,
        });
    }
    if beta == 0.0 {
        // Both sides are the arithmetic mean.
        return Ok(ThermalContext {
            beta,
            beta_prime: 0.0,
            solve_residual: 0.0,
            constraint_vacuous: false,
            overridden: false,
        });
    }

    let target = gibbs_mean_energy(spectrum, beta);
    let transform = SimplexTransform::new(spectrum.values())?;
    let tol = THETA_SOLVE_REL_TOL * spread;
    let residual = |bp: f64| transform.evaluate(bp).mean_energy - target;

    let r0 = residual(0.0);
    if r0 <= tol {
        // Gibbs energy meets or exceeds the flat mean only at β = 0.
        return Ok(ThermalContext {
            beta,
            beta_prime: 0.0,
            solve_residual: r0.abs() / spread,
            constraint_vacuous: false,
            overridden: false,
        });
    }

    // Double until the residual flips sign.
    let mut lo = 0.0;
    let mut r_lo = r0;
    let mut hi = beta.max(1.0 / spread);
    let mut r_hi = residual(hi);
    let mut doublings = 0;
    while r_hi > 0.0 {
        lo = hi;
        r_lo = r_hi;
        hi *= 2.0;
        r_hi = residual(hi);
        doublings += 1;
        if doublings > 200 {
            return Err(Error::SolverFailure(format!(
                "no bracket for the statistical temperature: residual {r_hi:.3e} at β' = {hi:.3e}"
            )));
        }
    }

    // Bisection with secant refinement inside the bracket.
    let mut best = hi;
    let mut best_res = r_hi.abs();
    for _ in 0..200 {
        let secant = if (r_hi - r_lo).abs() > 0.0 {
            lo - r_lo * (hi - lo) / (r_hi - r_lo)
        } else {
            0.5 * (lo + hi)
        };
        let mid = if secant > lo && secant < hi {
            // Alternate a bisection step in when the bracket is stubborn.
            0.5 * (secant + 0.5 * (lo + hi))
        } else {
            0.5 * (lo + hi)
        };
        let r_mid = residual(mid);
        if r_mid.abs() < best_res {
            best = mid;
            best_res = r_mid.abs();
        }
        if r_mid.abs() <= tol {
            return Ok(ThermalContext {
                beta,
                beta_prime: mid,
                solve_residual: r_mid.abs() / spread,
                constraint_vacuous: false,
                overridden: false,
            });
        }
        if r_mid > 0.0 {
            lo = mid;
            r_lo = r_mid;
        } else {
            hi = mid;
            r_hi = r_mid;
        }
        if (hi - lo) / hi.max(1.0) < 1e-16 {
            break;
        }
    }
    if best_res / spread <= THETA_SOLVE_REL_TOL * 10.0 {
        return Ok(ThermalContext {
            beta,
            beta_prime: best,
            solve_residual: best_res / spread,
            constraint_vacuous: false,
            overridden: false,
        });
    }
    Err(Error::SolverFailure(format!(
        "β' iteration stalled: residual {best_res:.3e} (tolerance {tol:.3e}) at β' = {best:.6e}"
    )))
}

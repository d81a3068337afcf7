//! Closed-form free energies, entropies, and mean-force energies for
//! degenerate and thermal baths, plus the quadrature marginal P(z).
//!
//! Everything is evaluated log-domain-first: determinants, Vandermonde
//! products, factorials, and manifold volumes are carried as logs with
//! separate signs because the exponential matrix entries span hundreds of
//! orders of magnitude at low temperature. σ-independent constants are
//! computed and reported for transparency, but all testing happens on
//! differences or normalized densities where they cancel.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{DoubleDouble, ScaledLu};
use crate::models::{ModelKind, ModelSpec, ThermalContext};
use crate::reduced::{InteractionDet, InteractionEngine};
use crate::quantum::{density_expectation, HermitianOperator, Spectrum, SystemDensityMatrix};

pub use crate::linalg::{log_abs_det_scaled, log_abs_det_scaled_dd};

/// Smallest density-matrix eigenvalue still treated as interior.
pub const INTERIOR_TOL: f64 = 1e-14;

/// Free energy split into its σ-dependent and σ-independent pieces (eV).
///
/// `total = system_energy + entropic_term + constant_term`. For boundary
/// states (det σ = 0) the entropic term is +∞.
#[derive(Debug, Clone, Copy)]
pub struct FreeEnergyBreakdown {
    pub system_energy: f64,
    pub entropic_term: f64,
    pub constant_term: f64,
    pub log_abs_det_i: f64,
    pub log_delta_sigma: f64,
    pub sign_det_i: i8,
}

impl FreeEnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.system_energy + self.entropic_term + self.constant_term
    }
}

/// ln k! as an exact sum of logs.
pub fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// ln of the Haar volume of the complex Stiefel manifold V_N(C^M):
/// 2^N π^{N(2M−N+1)/2} / Π_{k=1}^N (M−k)!.
pub fn stiefel_log_volume(n: usize, m: usize) -> Result<f64> {
    if n < 1 || m < n {
        return Err(Error::InvalidInput(format!(
            "Stiefel volume needs M >= N >= 1, got N = {n}, M = {m}"
        )));
    }
    let mut out = n as f64 * std::f64::consts::LN_2
        + (n * (2 * m - n + 1)) as f64 / 2.0 * std::f64::consts::PI.ln();
    for k in 1..=n {
        out -= ln_factorial(m - k);
    }
    Ok(out)
}

fn k_theta(ctx: &ThermalContext) -> f64 {
    1.0 / ctx.beta_prime
}

/// Free energy of σ against an M-fold degenerate bath: the solvation part is
/// purely entropic, −k_BΘ[(M−N) ln det σ + ln(2^{-N} Vol V_N(C^M))].
pub fn free_energy_degenerate(
    sigma: &SystemDensityMatrix,
    model: &ModelSpec,
    ctx: &ThermalContext,
) -> Result<FreeEnergyBreakdown> {
    if model.kind != ModelKind::DegenerateSpinBath {
        return Err(Error::InvalidInput(
            "degenerate-bath free energy requires a degenerate-spin-bath model".into(),
        ));
    }
    let (n, m) = model.dims;
    if sigma.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "σ dimension {} does not match the model system dimension {n}",
            sigma.dim()
        )));
    }
    let system_energy = density_expectation(sigma, model.h_system.matrix());
    degenerate_breakdown(sigma, n, m, system_energy, ctx)
}

/// Same formula with explicit dimensions, for states not tied to a model.
pub fn free_energy_degenerate_dims(
    sigma: &SystemDensityMatrix,
    n: usize,
    m: usize,
    system_energy: f64,
    ctx: &ThermalContext,
) -> Result<FreeEnergyBreakdown> {
    degenerate_breakdown(sigma, n, m, system_energy, ctx)
}

fn degenerate_breakdown(
    sigma: &SystemDensityMatrix,
    n: usize,
    m: usize,
    system_energy: f64,
    ctx: &ThermalContext,
) -> Result<FreeEnergyBreakdown> {
    if m < n {
        return Err(Error::InvalidInput(format!(
            "need M >= N, got N = {n}, M = {m}"
        )));
    }
    let kt = k_theta(ctx);
    let ln_det: f64 = sigma
        .eigenvalues()
        .iter()
        .map(|&e| if e > 0.0 { e.ln() } else { f64::NEG_INFINITY })
        .sum();
    let entropic_term = if ln_det == f64::NEG_INFINITY && m > n {
        f64::INFINITY
    } else {
        -kt * (m - n) as f64 * ln_det
    };
    let constant_term =
        -kt * (-(n as f64) * std::f64::consts::LN_2 + stiefel_log_volume(n, m)?);
    Ok(FreeEnergyBreakdown {
        system_energy,
        entropic_term,
        constant_term,
        log_abs_det_i: 0.0,
        log_delta_sigma: 0.0,
        sign_det_i: 1,
    })
}

/// TS\[σ\] for the degenerate bath with σ-independent constants dropped:
/// k_BΘ (M−N) ln det σ.
pub fn entropy_degenerate(
    sigma: &SystemDensityMatrix,
    model: &ModelSpec,
    ctx: &ThermalContext,
) -> Result<f64> {
    let fe = free_energy_degenerate(sigma, model, ctx)?;
    Ok(-fe.entropic_term)
}

/// The M×M matrix of polynomial and exponential columns whose determinant
/// carries the σ-bath coupling of the thermal free energy.
///
/// Columns: (β'λ_i)^k for k = 0..M−N−1, then for each group of equal σ
/// eigenvalues η (multiplicity g) the derivative ladder
/// ∂^k/∂η^k e^{-β'ηλ_i} = (-β'λ_i)^k e^{-β'ηλ_i}, k = 0..g−1.
#[derive(Debug, Clone)]
pub struct InteractionMatrix {
    pub entries: DMatrix<f64>,
    /// (η, derivative order) per exponential column, in column order.
    pub exp_columns: Vec<(f64, usize)>,
    pub n_poly: usize,
    pub m: usize,
    pub n: usize,
    pub beta_prime: f64,
    /// Bath eigenvalues sorted ascending (β'-free).
    pub bath: Vec<f64>,
    /// σ eigenvalues had at least one degenerate group.
    pub confluent: bool,
}

/// Builds I(σ) from the σ and bath spectra.
pub fn interaction_matrix(
    sigma_spectrum: &Spectrum,
    bath_spectrum: &Spectrum,
    beta_prime: f64,
) -> Result<InteractionMatrix> {
    let n = sigma_spectrum.len();
    let m = bath_spectrum.len();
    if !bath_spectrum.is_distinct() {
        return Err(Error::DegenerateBathSpectrum);
    }
    if m <= n {
        return Err(Error::InvalidInput(format!(
            "thermal interaction matrix needs M > N, got N = {n}, M = {m}"
        )));
    }
    if !(beta_prime > 0.0) {
        return Err(Error::InvalidInput(format!(
            "interaction matrix needs β' > 0, got {beta_prime}"
        )));
    }
    let n_poly = m - n;
    let bath = bath_spectrum.values().to_vec();
    let mut exp_columns = Vec::with_capacity(n);
    for (&(a, b), eta) in sigma_spectrum
        .groups()
        .iter()
        .zip(sigma_spectrum.group_means())
    {
        for k in 0..(b - a) {
            exp_columns.push((eta, k));
        }
    }
    let confluent = sigma_spectrum.has_degeneracies();
    let mut entries = DMatrix::<f64>::zeros(m, m);
    for (i, &lam) in bath.iter().enumerate() {
        let x = beta_prime * lam;
        let mut col = 0usize;
        let mut pow = 1.0_f64;
        for _ in 0..n_poly {
            entries[(i, col)] = pow;
            pow *= x;
            col += 1;
        }
        for &(eta, k) in &exp_columns {
            entries[(i, col)] = (-x).powi(k as i32) * (-beta_prime * eta * lam).exp();
            col += 1;
        }
    }
    Ok(InteractionMatrix {
        entries,
        exp_columns,
        n_poly,
        m,
        n,
        beta_prime,
        bath,
        confluent,
    })
}

/// Scalar derivative I'(σ) = ∂I/∂β' with the same column layout.
pub fn interaction_matrix_derivative(im: &InteractionMatrix) -> DMatrix<f64> {
    let m = im.m;
    let bp = im.beta_prime;
    let mut out = DMatrix::<f64>::zeros(m, m);
    for (i, &lam) in im.bath.iter().enumerate() {
        let x = bp * lam;
        let mut col = 0usize;
        for k in 0..im.n_poly {
            out[(i, col)] = if k == 0 {
                0.0
            } else {
                k as f64 * x.powi(k as i32) / bp
            };
            col += 1;
        }
        for &(eta, k) in &im.exp_columns {
            let base = (-x).powi(k as i32) * (-bp * eta * lam).exp();
            out[(i, col)] = (k as f64 / bp - eta * lam) * base;
            col += 1;
        }
    }
    out
}

/// ln Δ(σ) with the confluent convention: inter-group factors (η_b − η_a)
/// carry multiplicity g_a·g_b, intra-group factors are replaced by Π k!.
pub fn log_delta_sigma(sigma_spectrum: &Spectrum) -> f64 {
    let means = sigma_spectrum.group_means();
    let mults = sigma_spectrum.multiplicities();
    let mut out = 0.0;
    for a in 0..means.len() {
        for b in a + 1..means.len() {
            out += (mults[a] * mults[b]) as f64 * (means[b] - means[a]).ln();
        }
    }
    for &g in &mults {
        for k in 1..g {
            out += ln_factorial(k);
        }
    }
    out
}

/// σ eigenvalue groups as (value, multiplicity), for the factored engine.
fn sigma_groups(sigma_spectrum: &Spectrum) -> Vec<(f64, usize)> {
    sigma_spectrum
        .group_means()
        .into_iter()
        .zip(sigma_spectrum.multiplicities())
        .collect()
}

/// σ-dependent terms of the thermal formula through the factored evaluator:
/// ln|det I|, its sign and β'-derivative, plus ln Δ(σ).
pub fn thermal_terms_public(
    sigma_spectrum: &Spectrum,
    bath_spectrum: &Spectrum,
    beta_prime: f64,
) -> Result<(InteractionDet, f64)> {
    thermal_terms(sigma_spectrum, bath_spectrum, beta_prime)
}

fn thermal_terms(
    sigma_spectrum: &Spectrum,
    bath_spectrum: &Spectrum,
    beta_prime: f64,
) -> Result<(InteractionDet, f64)> {
    let n = sigma_spectrum.len();
    let m = bath_spectrum.len();
    if !bath_spectrum.is_distinct() {
        return Err(Error::DegenerateBathSpectrum);
    }
    if m <= n {
        return Err(Error::InvalidInput(format!(
            "thermal formulas need M > N, got N = {n}, M = {m}"
        )));
    }
    let engine = InteractionEngine::new(bath_spectrum.values(), beta_prime)?;
    let det = engine.log_det(&sigma_groups(sigma_spectrum))?;
    Ok((det, log_delta_sigma(sigma_spectrum)))
}

/// β'-independent part of the thermal constant: everything under the second
/// log of the closed-form free energy, without the β'^{M(M−1)/2} factor.
fn thermal_constant_log(n: usize, m: usize, bath: &[f64]) -> Result<f64> {
    let mut out = -(n as f64) * std::f64::consts::LN_2 + stiefel_log_volume(n, m)?;
    for i in (m - n)..=m {
        out += ln_factorial(i);
    }
    for i in 0..m {
        for j in i + 1..m {
            out -= (bath[j] - bath[i]).ln();
        }
    }
    Ok(out)
}

/// Free energy of σ against a thermal bath with distinct levels.
///
/// F = Tr{H_S σ} − k_BΘ[ln(|det I(σ)|/Δ(σ)) + ln(2^{-N}Vol·Πi!/(β'^{M(M−1)/2}Δ(H_B)))].
/// Boundary states (det σ = 0) come out with +∞ in the entropic term.
pub fn free_energy_thermal(
    sigma: &SystemDensityMatrix,
    h_system: &HermitianOperator,
    bath_spectrum: &Spectrum,
    ctx: &ThermalContext,
) -> Result<FreeEnergyBreakdown> {
    let system_energy = density_expectation(sigma, h_system.matrix());
    free_energy_thermal_spectrum(&sigma.spectrum(), system_energy, bath_spectrum, ctx)
}

/// Spectrum-level thermal free energy (σ enters through its eigenvalues only).
pub fn free_energy_thermal_spectrum(
    sigma_spectrum: &Spectrum,
    system_energy: f64,
    bath_spectrum: &Spectrum,
    ctx: &ThermalContext,
) -> Result<FreeEnergyBreakdown> {
    let n = sigma_spectrum.len();
    let m = bath_spectrum.len();
    let kt = k_theta(ctx);
    if sigma_spectrum.min() < INTERIOR_TOL {
        // det σ = 0: the exponential column collides with the constant
        // polynomial column and the free energy diverges.
        return Ok(FreeEnergyBreakdown {
            system_energy,
            entropic_term: f64::INFINITY,
            constant_term: 0.0,
            log_abs_det_i: f64::NEG_INFINITY,
            log_delta_sigma: log_delta_sigma(sigma_spectrum),
            sign_det_i: 0,
        });
    }
    let (det, ldelta) = thermal_terms(sigma_spectrum, bath_spectrum, ctx.beta_prime)?;
    let constant_log = thermal_constant_log(n, m, bath_spectrum.values())?
        - (m * (m - 1)) as f64 / 2.0 * ctx.beta_prime.ln();
    Ok(FreeEnergyBreakdown {
        system_energy,
        entropic_term: -kt * (det.log_abs - ldelta),
        constant_term: -kt * constant_log,
        log_abs_det_i: det.log_abs,
        log_delta_sigma: ldelta,
        sign_det_i: det.sign,
    })
}

/// Tr{I(σ)^{-1} I'(σ)} via one double-double linear solve per column of I'.
fn interaction_trace_term(im: &InteractionMatrix) -> Result<f64> {
    let lu = ScaledLu::<DoubleDouble>::factor(&im.entries);
    if lu.sign == 0 {
        return Err(Error::SingularMatrix(
            "interaction matrix is singular; σ may sit on the boundary".into(),
        ));
    }
    let iprime = interaction_matrix_derivative(im);
    let m = im.m;
    let mut trace = 0.0;
    let mut col = vec![0.0_f64; m];
    for j in 0..m {
        for i in 0..m {
            col[i] = iprime[(i, j)];
        }
        let x = lu.solve(&col);
        trace += x[j];
    }
    Ok(trace)
}

/// Mean-force energy E\[σ\] = Tr{H_S σ} − Tr{I^{-1}I'} + M(M−1)/(2β').
pub fn mean_force_energy(
    sigma: &SystemDensityMatrix,
    h_system: &HermitianOperator,
    bath_spectrum: &Spectrum,
    ctx: &ThermalContext,
) -> Result<f64> {
    let system_energy = density_expectation(sigma, h_system.matrix());
    mean_force_energy_spectrum(&sigma.spectrum(), system_energy, bath_spectrum, ctx)
}

/// Spectrum-level mean-force energy.
///
/// The trace term is the β'-derivative of ln|det I| (Jacobi's formula),
/// taken analytically from the factored determinant; the divergent
/// M(M−1)/(2β') pieces cancel inside the engine rather than in floating
/// point.
pub fn mean_force_energy_spectrum(
    sigma_spectrum: &Spectrum,
    system_energy: f64,
    bath_spectrum: &Spectrum,
    ctx: &ThermalContext,
) -> Result<f64> {
    let (det, _) = thermal_terms(sigma_spectrum, bath_spectrum, ctx.beta_prime)?;
    let m = bath_spectrum.len() as f64;
    Ok(system_energy - det.dlog_dbeta + m * (m - 1.0) / (2.0 * ctx.beta_prime))
}

/// Mean-force energy with the trace term from one linear solve per column of
/// I', on the explicit M×M matrix.
///
/// Direct elimination of I(σ) loses all significant digits beyond M ≈ 8-10,
/// so this route is only meaningful for small baths; it exists as the
/// independent cross-check of the factored evaluator.
pub fn mean_force_energy_via_solves(
    sigma_spectrum: &Spectrum,
    system_energy: f64,
    bath_spectrum: &Spectrum,
    ctx: &ThermalContext,
) -> Result<f64> {
    let im = interaction_matrix(sigma_spectrum, bath_spectrum, ctx.beta_prime)?;
    let trace = interaction_trace_term(&im)?;
    let m = im.m as f64;
    Ok(system_energy - trace + m * (m - 1.0) / (2.0 * ctx.beta_prime))
}

/// TS\[σ\] for the thermal bath with σ-independent constants dropped:
/// k_BΘ ln(|det I|/Δ(σ)) − Tr{I^{-1}I'}.
pub fn entropy_thermal(
    sigma: &SystemDensityMatrix,
    bath_spectrum: &Spectrum,
    ctx: &ThermalContext,
) -> Result<f64> {
    entropy_thermal_spectrum(&sigma.spectrum(), bath_spectrum, ctx)
}

/// Spectrum-level thermal entropy term.
pub fn entropy_thermal_spectrum(
    sigma_spectrum: &Spectrum,
    bath_spectrum: &Spectrum,
    ctx: &ThermalContext,
) -> Result<f64> {
    let (det, ldelta) = thermal_terms(sigma_spectrum, bath_spectrum, ctx.beta_prime)?;
    Ok(k_theta(ctx) * (det.log_abs - ldelta) - det.dlog_dbeta)
}

/// Validates the confluent (repeated-η) determinant construction against an
/// ε-splitting of the degenerate eigenvalues with Richardson extrapolation.
///
/// Returns |confluent − extrapolated| / |extrapolated| for the σ-dependent
/// log term ln(|det I|/Δ(σ)).
pub fn confluent_determinant_check(
    sigma_spectrum: &Spectrum,
    bath_spectrum: &Spectrum,
    ctx: &ThermalContext,
) -> Result<f64> {
    if !sigma_spectrum.has_degeneracies() {
        return Err(Error::InvalidInput(
            "σ spectrum has no degenerate group; nothing to check".into(),
        ));
    }
    let (det, ldelta) = thermal_terms(sigma_spectrum, bath_spectrum, ctx.beta_prime)?;
    let confluent_value = det.log_abs - ldelta;

    let engine = InteractionEngine::new(bath_spectrum.values(), ctx.beta_prime)?;
    let split_value = |eps: f64| -> Result<f64> {
        let mut values = Vec::with_capacity(sigma_spectrum.len());
        for (&(a, b), eta) in sigma_spectrum
            .groups()
            .iter()
            .zip(sigma_spectrum.group_means())
        {
            let g = b - a;
            for j in 0..g {
                values.push(eta + eps * (j as f64 - (g as f64 - 1.0) / 2.0));
            }
        }
        // Tight re-grouping so the split eigenvalues count as distinct. The
        // split determinant is suppressed by the near-confluence, so it runs
        // through the double-double path.
        let split = Spectrum::from_values_with_tol(&values, 1e-15);
        let groups: Vec<(f64, usize)> = split
            .group_means()
            .into_iter()
            .zip(split.multiplicities())
            .collect();
        let (ld, _sign) = engine.log_det_hiprec(&groups)?;
        Ok(ld - log_delta_sigma(&split))
    };

    let l1 = split_value(1e-4)?;
    let l2 = split_value(5e-5)?;
    let l3 = split_value(2.5e-5)?;
    // The splitting error is even in ε, so halving ε supports Richardson
    // steps in ε².
    let r1 = (4.0 * l2 - l1) / 3.0;
    let r2 = (4.0 * l3 - l2) / 3.0;
    let extrapolated = (16.0 * r2 - r1) / 15.0;
    if !extrapolated.is_finite() || (r2 - r1).abs() > 1e-2 * extrapolated.abs().max(1.0) {
        return Err(Error::ExtrapolationDiagnostic(format!(
            "Richardson levels disagree: {r1} vs {r2}"
        )));
    }
    Ok((confluent_value - extrapolated).abs() / extrapolated.abs().max(f64::MIN_POSITIVE))
}

/// Normalized equilibrium density of the qubit Bloch coordinate z on a grid.
///
/// For each z the Bloch-disk coordinate s = x² + y² is integrated over
/// [0, 1−z²) with Gauss-Legendre nodes (all strictly interior) and angular
/// factor π; the qubit eigenvalues at radius r = √(z²+s) are (1±r)/2. The
/// result is normalized by the trapezoid rule over the supplied grid.
pub fn marginal_pz(
    model: &ModelSpec,
    ctx: &ThermalContext,
    z_grid: &[f64],
    quad_order: usize,
) -> Result<Vec<f64>> {
    let (n, m) = model.dims;
    if n != 2 {
        return Err(Error::UnsupportedDimension(format!(
            "marginal P(z) requires a qubit system, got N = {n}"
        )));
    }
    if z_grid.len() < 2 {
        return Err(Error::InvalidInput("z grid needs at least 2 points".into()));
    }
    if z_grid.iter().any(|z| z.abs() >= 1.0) {
        return Err(Error::InvalidInput("z grid must lie strictly inside (-1, 1)".into()));
    }
    if quad_order < 4 {
        return Err(Error::InvalidInput("quadrature order must be at least 4".into()));
    }
    if !model.h_system.is_diagonal() {
        return Err(Error::InvalidInput(
            "marginal P(z) requires a σ_z-diagonal system Hamiltonian".into(),
        ));
    }
    let h00 = model.h_system.matrix()[(0, 0)].re;
    let h11 = model.h_system.matrix()[(1, 1)].re;
    let bp = ctx.beta_prime;

    // Per-state log weight −β'F[σ] up to σ-independent constants.
    enum Integrand {
        Degenerate { exponent: f64 },
        Thermal { engine: InteractionEngine },
    }
    let integrand = match model.kind {
        ModelKind::DegenerateSpinBath => Integrand::Degenerate {
            exponent: (m - n) as f64,
        },
        ModelKind::TruncatedOscillator => {
            let bath = model.h_bath.spectrum();
            if !bath.is_distinct() {
                return Err(Error::DegenerateBathSpectrum);
            }
            Integrand::Thermal {
                engine: InteractionEngine::new(bath.values(), bp)?,
            }
        }
    };

    let log_weight = |z: f64, s: f64| -> Result<f64> {
        let system = h00 * (1.0 + z) / 2.0 + h11 * (1.0 - z) / 2.0;
        let r = (z * z + s).sqrt();
        let sdep = match &integrand {
            Integrand::Degenerate { exponent } => {
                exponent * ((1.0 - r * r) / 4.0).ln()
            }
            Integrand::Thermal { engine } => {
                let lo = (1.0 - r) / 2.0;
                let hi = (1.0 + r) / 2.0;
                let det = engine.log_det(&[(lo, 1), (hi, 1)])?;
                // Δ(σ) for the distinct pair is η₊ − η₋ = r.
                det.log_abs - r.ln()
            }
        };
        Ok(-bp * system + sdep)
    };

    let density_at_order = |order: usize| -> Result<Vec<f64>> {
        let (nodes, weights) = crate::simplex::gauss_legendre(order);
        let mut logs: Vec<Vec<(f64, f64)>> = Vec::with_capacity(z_grid.len());
        let mut global_max = f64::NEG_INFINITY;
        for &z in z_grid {
            let b = 1.0 - z * z;
            let mut row = Vec::with_capacity(order);
            for (x, w) in nodes.iter().zip(&weights) {
                let s = b / 2.0 * (x + 1.0);
                let lw = log_weight(z, s)?;
                let lv = lw + (w * b / 2.0 * std::f64::consts::PI).ln();
                global_max = global_max.max(lv);
                row.push((lv, s));
            }
            logs.push(row);
        }
        let mut density: Vec<f64> = logs
            .iter()
            .map(|row| row.iter().map(|(lv, _)| (lv - global_max).exp()).sum())
            .collect();
        // Trapezoid normalization over the grid.
        let mut norm = 0.0;
        for i in 0..z_grid.len() - 1 {
            norm += 0.5 * (density[i] + density[i + 1]) * (z_grid[i + 1] - z_grid[i]);
        }
        if !(norm > 0.0) {
            return Err(Error::QuadratureDiagnostic(
                "marginal integrand vanished everywhere on the grid".into(),
            ));
        }
        for d in density.iter_mut() {
            *d /= norm;
        }
        Ok(density)
    };

    let coarse = density_at_order(quad_order)?;
    let fine = density_at_order(2 * quad_order)?;
    let peak = fine.iter().cloned().fold(0.0_f64, f64::max);
    let mut worst = 0.0_f64;
    for (c, f) in coarse.iter().zip(&fine) {
        if *f > 1e-12 * peak {
            worst = worst.max((c - f).abs() / f);
        }
    }
    if worst > 1e-6 {
        return Err(Error::QuadratureDiagnostic(format!(
            "marginal quadrature drift {worst:.3e} between orders {quad_order} and {}",
            2 * quad_order
        )));
    }
    Ok(fine)
}

/// Trapezoid moments of a gridded density: (mean, variance).
pub fn grid_moments(z_grid: &[f64], density: &[f64]) -> (f64, f64) {
    let mut m0 = 0.0;
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for i in 0..z_grid.len() - 1 {
        let dz = z_grid[i + 1] - z_grid[i];
        let (z0, z1) = (z_grid[i], z_grid[i + 1]);
        let (d0, d1) = (density[i], density[i + 1]);
        m0 += 0.5 * (d0 + d1) * dz;
        m1 += 0.5 * (d0 * z0 + d1 * z1) * dz;
        m2 += 0.5 * (d0 * z0 * z0 + d1 * z1 * z1) * dz;
    }
    let mean = m1 / m0;
    (mean, m2 / m0 - mean * mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{
        build_degenerate_spin_bath, build_qubit_system, build_truncated_oscillator_bath,
    };
    use crate::quantum::{pauli_x, pauli_z};
    use nalgebra::DMatrix;
    use num_complex::Complex64;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn qubit_sigma(x: f64, z: f64) -> SystemDensityMatrix {
        let m = (DMatrix::identity(2, 2) + pauli_x() * c(x, 0.0) + pauli_z() * c(z, 0.0))
            * c(0.5, 0.0);
        SystemDensityMatrix::new(m).unwrap()
    }

    #[test]
    fn stiefel_volume_reference_values() {
        // V_1(C^1) is the unit circle, V_1(C^2) the 3-sphere.
        assert!((stiefel_log_volume(1, 1).unwrap() - (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
        assert!(
            (stiefel_log_volume(1, 2).unwrap() - (2.0 * std::f64::consts::PI.powi(2)).ln()).abs()
                < 1e-14
        );
        assert!(
            (stiefel_log_volume(2, 2).unwrap() - (4.0 * std::f64::consts::PI.powi(3)).ln()).abs()
                < 1e-14
        );
        assert!(stiefel_log_volume(3, 2).is_err());
    }

    #[test]
    fn stiefel_volume_matches_sphere_area_recursion() {
        // Vol V_N(C^M) = Π_{k=M-N+1}^{M} Area(S^{2k-1}),
        // Area(S^{2k-1}) = 2π^k/(k-1)!.
        for n in 1..=4 {
            for m in n..=40 {
                let direct = stiefel_log_volume(n, m).unwrap();
                let mut rec = 0.0;
                for k in (m - n + 1)..=m {
                    rec += (2.0_f64).ln() + k as f64 * std::f64::consts::PI.ln()
                        - ln_factorial(k - 1);
                }
                assert!(
                    (direct - rec).abs() < 1e-12 * direct.abs().max(1.0),
                    "N={n} M={m}: {direct} vs {rec}"
                );
            }
        }
    }

    #[test]
    fn degenerate_free_energy_reference_cases() {
        let ctx = ThermalContext::with_beta_prime(1.0, 2.0);
        // M = N: the entropic exponent vanishes.
        let model = build_degenerate_spin_bath(0.30, 1, 0.0, 1e-6).unwrap();
        let sigma = qubit_sigma(0.0, 0.5);
        let fe = free_energy_degenerate(&sigma, &model, &ctx).unwrap();
        assert_eq!(model.dims.1, 2);
        assert_eq!(fe.entropic_term, 0.0); // M = N = 2: the exponent vanishes
        let fe_dims = free_energy_degenerate_dims(&sigma, 2, 2, 0.0, &ctx).unwrap();
        assert_eq!(fe_dims.entropic_term, 0.0);

        // Pure σ diverges.
        let pure = SystemDensityMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        let fe = free_energy_degenerate_dims(&pure, 2, 4, 0.0, &ctx).unwrap();
        assert!(fe.entropic_term.is_infinite());

        // Qubit against M = 4: F(1/2) − F(r=0.5) = ΔH̄_S − 2k_BΘ ln(4/3).
        let model4 = build_degenerate_spin_bath(0.30, 2, 0.0, 1e-6).unwrap();
        let mixed = SystemDensityMatrix::maximally_mixed(2);
        let tilted = qubit_sigma(0.0, 0.5);
        let f_mixed = free_energy_degenerate(&mixed, &model4, &ctx).unwrap();
        let f_tilted = free_energy_degenerate(&tilted, &model4, &ctx).unwrap();
        let kt = 1.0 / ctx.beta_prime;
        let expected = (0.0 - (-0.15 * 0.5)) - 2.0 * kt * (4.0_f64 / 3.0).ln();
        let got = f_mixed.total() - f_tilted.total();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn degenerate_entropy_reference_cases() {
        let ctx = ThermalContext::with_beta_prime(1.0, 2.0);
        let model = build_degenerate_spin_bath(0.30, 2, 0.0, 1e-6).unwrap();
        let mixed = SystemDensityMatrix::maximally_mixed(2);
        let ts = entropy_degenerate(&mixed, &model, &ctx).unwrap();
        let kt = 1.0 / ctx.beta_prime;
        assert!((ts - kt * 2.0 * 0.25_f64.ln()).abs() < 1e-12);

        // ΔTS is consistent with free-energy differences (purely entropic bath).
        let tilted = qubit_sigma(0.3, 0.2);
        let ts2 = entropy_degenerate(&tilted, &model, &ctx).unwrap();
        let f1 = free_energy_degenerate(&mixed, &model, &ctx).unwrap();
        let f2 = free_energy_degenerate(&tilted, &model, &ctx).unwrap();
        let dfe_solv = (f1.total() - f1.system_energy) - (f2.total() - f2.system_energy);
        assert!((-(ts - ts2) - dfe_solv).abs() < 1e-12);

        // M = N gives zero.
        let fe = free_energy_degenerate_dims(&mixed, 2, 2, 0.0, &ctx).unwrap();
        assert_eq!(-fe.entropic_term, 0.0);
    }

    #[test]
    fn interaction_matrix_small_reference() {
        // N=1, M=2, η=(1), λ=(0,1), β'=1: [[1,1],[1,e^{-1}]].
        let sigma = Spectrum::from_values(&[1.0]);
        let bath = Spectrum::from_values(&[0.0, 1.0]);
        let im = interaction_matrix(&sigma, &bath, 1.0).unwrap();
        assert_eq!(im.entries.nrows(), 2);
        assert!((im.entries[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((im.entries[(0, 1)] - 1.0).abs() < 1e-15);
        assert!((im.entries[(1, 0)] - 1.0).abs() < 1e-15);
        assert!((im.entries[(1, 1)] - (-1.0_f64).exp()).abs() < 1e-15);
        let (ld, sign) = log_abs_det_scaled(&im.entries);
        let det = sign as f64 * ld.exp();
        assert!((det - ((-1.0_f64).exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn interaction_matrix_column_layout() {
        // M=4, N=2: column 0 all ones, column 1 the scaled bath values, then
        // two exponential columns. M=3, N=2 has a single polynomial column.
        let sigma = Spectrum::from_values(&[0.25, 0.75]);
        let bath = Spectrum::from_values(&[0.1, 0.2, 0.3, 0.4]);
        let bp = 2.0;
        let im = interaction_matrix(&sigma, &bath, bp).unwrap();
        assert_eq!(im.n_poly, 2);
        for i in 0..4 {
            assert_eq!(im.entries[(i, 0)], 1.0);
            assert!((im.entries[(i, 1)] - bp * bath.values()[i]).abs() < 1e-15);
            for (k, &eta) in [0.25, 0.75].iter().enumerate() {
                let expect = (-bp * eta * bath.values()[i]).exp();
                assert!((im.entries[(i, 2 + k)] - expect).abs() < 1e-15);
            }
        }

        let bath3 = Spectrum::from_values(&[0.1, 0.2, 0.3]);
        let im3 = interaction_matrix(&sigma, &bath3, bp).unwrap();
        assert_eq!(im3.n_poly, 1);
        assert_eq!(im3.entries.ncols(), 3);

        // M must exceed N and the bath must be distinct.
        let bath2 = Spectrum::from_values(&[0.1, 0.2]);
        assert!(interaction_matrix(&sigma, &bath2, bp).is_err());
        let degenerate = Spectrum::from_values(&[0.1, 0.1, 0.3]);
        assert!(matches!(
            interaction_matrix(&sigma, &degenerate, bp),
            Err(Error::DegenerateBathSpectrum)
        ));
    }

    #[test]
    fn confluent_columns_are_eta_derivatives() {
        // σ = 1/2: the pair of exponential columns becomes
        // (e^{-β'λ/2}, -β'λ e^{-β'λ/2}).
        let sigma = Spectrum::from_values(&[0.5, 0.5]);
        let bath = Spectrum::from_values(&[0.1, 0.25, 0.3, 0.7]);
        let bp = 1.7;
        let im = interaction_matrix(&sigma, &bath, bp).unwrap();
        assert!(im.confluent);
        assert_eq!(im.exp_columns, vec![(0.5, 0), (0.5, 1)]);
        for (i, &lam) in bath.values().iter().enumerate() {
            let e = (-bp * 0.5 * lam).exp();
            assert!((im.entries[(i, 2)] - e).abs() < 1e-15);
            assert!((im.entries[(i, 3)] - (-bp * lam) * e).abs() < 1e-14);
        }
    }

    #[test]
    fn confluent_value_matches_epsilon_splitting() {
        let ctx = ThermalContext::with_beta_prime(1.0, 3.0);
        // Qubit σ = 1/2 against a 6-level oscillator ladder.
        let sigma = Spectrum::from_values(&[0.5, 0.5]);
        let bath = Spectrum::from_values(&[0.03, 0.09, 0.15, 0.21, 0.27, 0.33]);
        let err = confluent_determinant_check(&sigma, &bath, &ctx).unwrap();
        assert!(err < 1e-6, "relative error {err:.3e}");

        // Two-qubit σ = 1/4 (4-fold degenerate) against a 16-level bath.
        let sigma4 = Spectrum::from_values(&[0.25; 4]);
        let bath16 = Spectrum::from_values(
            &(0..16).map(|i| 0.05 + 0.06 * i as f64).collect::<Vec<_>>(),
        );
        let err = confluent_determinant_check(&sigma4, &bath16, &ctx).unwrap();
        assert!(err < 1e-5, "relative error {err:.3e}");

        // Non-degenerate σ: nothing to check.
        let distinct = Spectrum::from_values(&[0.25, 0.75]);
        assert!(confluent_determinant_check(&distinct, &bath, &ctx).is_err());
    }

    /// Closed-form ln|det I| for an equispaced bath ladder, via block
    /// elimination of the polynomial columns in the Newton basis: the
    /// determinant reduces to the Vandermonde of the scaled bath nodes times
    /// an N×N matrix of divided differences of e^{-ηx}, which for equispaced
    /// nodes are forward differences in closed form.
    fn equispaced_log_det_oracle(
        etas: &[f64],
        x1: f64,
        h: f64,
        m: usize,
    ) -> (f64, f64) {
        let n = etas.len();
        let k = m - n;
        // ln V(x) over x_i = x1 + (i-1)h.
        let mut ln_v = 0.0;
        for i in 0..m {
            for j in i + 1..m {
                ln_v += ((j - i) as f64 * h).ln();
            }
        }
        // D_{ij} = dd of e^{-η_j x} over the first K+i nodes (i = 1..N):
        // e^{-η_j x1} (e^{-η_j h} - 1)^{K+i-1} / ((K+i-1)! h^{K+i-1}),
        // carried as logs and signs.
        let log_entry = |rows_used: usize, eta: f64| -> (f64, i8) {
            let ord = rows_used - 1; // divided-difference order
            let base = (-eta * h).exp_m1(); // e^{-ηh} - 1 < 0
            let ln_mag = -eta * x1 + ord as f64 * base.abs().ln()
                - ln_factorial(ord)
                - ord as f64 * h.ln();
            let sign = if ord % 2 == 0 { 1 } else { -1 };
            (ln_mag, sign)
        };
        // det D for N = 1 or 2.
        match n {
            1 => {
                let (lm, s) = log_entry(m, etas[0]);
                (ln_v + lm, s as f64)
            }
            2 => {
                let (l11, s11) = log_entry(k + 1, etas[0]);
                let (l12, s12) = log_entry(k + 1, etas[1]);
                let (l21, s21) = log_entry(k + 2, etas[0]);
                let (l22, s22) = log_entry(k + 2, etas[1]);
                // det = D11 D22 - D12 D21, as logs.
                let a = l11 + l22;
                let sa = (s11 * s22) as f64;
                let b = l12 + l21;
                let sb = (s12 * s21) as f64;
                let mx = a.max(b);
                let det = sa * (a - mx).exp() - sb * (b - mx).exp();
                (ln_v + mx + det.abs().ln(), det.signum())
            }
            _ => panic!("oracle implemented for N <= 2"),
        }
    }

    #[test]
    fn thermal_determinant_matches_equispaced_oracle() {
        // Oscillator ladders: x_i = β'ħω(i - 1/2). The dense eliminations are
        // only meaningful at small M (the exponential columns are reproduced
        // by the polynomial block to e^{-O(M)}); the factored engine holds at
        // any size.
        let hbar_omega = 0.06;
        let etas = [0.3, 0.7];
        for (m, bp) in [(4usize, 2.0), (6, 2.0), (8, 1.3)] {
            let bath = Spectrum::from_values(
                &(0..m)
                    .map(|i| hbar_omega * (i as f64 + 0.5))
                    .collect::<Vec<_>>(),
            );
            let sigma = Spectrum::from_values(&etas);
            let im = interaction_matrix(&sigma, &bath, bp).unwrap();
            let (ld, sign) = log_abs_det_scaled_dd(&im.entries);
            let (oracle, osign) =
                equispaced_log_det_oracle(&etas, bp * hbar_omega * 0.5, bp * hbar_omega, m);
            assert_eq!(sign as f64, osign, "sign at M = {m}");
            assert!(
                (ld - oracle).abs() < 2e-4 * oracle.abs().max(1.0),
                "M = {m}: {ld} vs {oracle}"
            );
        }
        for (m, bp) in [(6usize, 2.0), (20, 1.3), (60, 0.8)] {
            let bath = Spectrum::from_values(
                &(0..m)
                    .map(|i| hbar_omega * (i as f64 + 0.5))
                    .collect::<Vec<_>>(),
            );
            let (det, ldelta) =
                thermal_terms(&Spectrum::from_values(&etas), &bath, bp).unwrap();
            let _ = ldelta;
            let (oracle, osign) =
                equispaced_log_det_oracle(&etas, bp * hbar_omega * 0.5, bp * hbar_omega, m);
            assert_eq!(det.sign as f64, osign, "engine sign at M = {m}");
            assert!(
                (det.log_abs - oracle).abs() < 1e-10 * oracle.abs().max(1.0),
                "engine at M = {m}: {} vs {oracle}",
                det.log_abs
            );
        }
    }

    #[test]
    fn thermal_free_energy_collapses_to_degenerate_at_tiny_splitting() {
        // Bath λ_i = i·δ with δ = 1e-6 eV: F-differences approach the
        // degenerate-bath differences.
        let ctx = ThermalContext::with_beta_prime(1.0, 2.0);
        let m = 8usize;
        let delta = 1e-6;
        let bath = Spectrum::from_values(
            &(0..m).map(|i| i as f64 * delta).collect::<Vec<_>>(),
        );
        let s1 = qubit_sigma(0.0, 0.3);
        let s2 = qubit_sigma(0.2, -0.4);
        let f1 = free_energy_thermal_spectrum(&s1.spectrum(), 0.0, &bath, &ctx).unwrap();
        let f2 = free_energy_thermal_spectrum(&s2.spectrum(), 0.0, &bath, &ctx).unwrap();
        let thermal_diff = f1.total() - f2.total();

        let d1 = free_energy_degenerate_dims(&s1, 2, m, 0.0, &ctx).unwrap();
        let d2 = free_energy_degenerate_dims(&s2, 2, m, 0.0, &ctx).unwrap();
        let degen_diff = d1.total() - d2.total();
        assert!(
            (thermal_diff - degen_diff).abs() < 1e-3 * degen_diff.abs(),
            "{thermal_diff} vs {degen_diff}"
        );
    }

    #[test]
    fn thermal_free_energy_beta_prime_to_zero_limit() {
        // As β' → 0 the σ-dependence of the thermal formula reduces to the
        // degenerate geometry; compare differences at β' = 1e-8.
        let ctx = ThermalContext::with_beta_prime(1.0, 1e-8);
        let m = 6usize;
        let bath = Spectrum::from_values(
            &(0..m).map(|i| 0.06 * (i as f64 + 0.5)).collect::<Vec<_>>(),
        );
        let s1 = qubit_sigma(0.0, 0.3);
        let s2 = qubit_sigma(0.15, -0.35);
        let f1 = free_energy_thermal_spectrum(&s1.spectrum(), 0.0, &bath, &ctx).unwrap();
        let f2 = free_energy_thermal_spectrum(&s2.spectrum(), 0.0, &bath, &ctx).unwrap();
        let thermal_diff = f1.total() - f2.total();
        let d1 = free_energy_degenerate_dims(&s1, 2, m, 0.0, &ctx).unwrap();
        let d2 = free_energy_degenerate_dims(&s2, 2, m, 0.0, &ctx).unwrap();
        let degen_diff = d1.total() - d2.total();
        assert!(
            (thermal_diff - degen_diff).abs() < 1e-6 * degen_diff.abs(),
            "{thermal_diff} vs {degen_diff}"
        );
    }

    #[test]
    fn n1_free_energy_tracks_the_simplex_partition_function() {
        // For N = 1 the solvation free energy is the log of the bath-spectrum
        // simplex partition function up to σ-independent constants: compare
        // β'F across different β' (constants carry explicit β' dependence).
        let m = 7usize;
        let bath_vals: Vec<f64> = (0..m).map(|i| 0.05 + 0.07 * i as f64).collect();
        let bath = Spectrum::from_values(&bath_vals);
        let sigma = Spectrum::from_values(&[1.0]);
        let t = crate::simplex::SimplexTransform::new(&bath_vals).unwrap();

        let value = |bp: f64| -> f64 {
            let ctx = ThermalContext::with_beta_prime(1.0, bp);
            let fe = free_energy_thermal_spectrum(&sigma, 0.0, &bath, &ctx).unwrap();
            // β'(F − const-without-β'-dependence): use the full total; the
            // β'-dependent constants must reproduce the transform exactly.
            bp * fe.total()
        };
        // β'F(β') − β'F(β'₀) should equal −[lnZ(β') − lnZ(β'₀)].
        let bp0 = 0.7;
        let base = value(bp0);
        let lz0 = t.evaluate(bp0).log_partition;
        for &bp in &[1.3, 2.9, 6.0] {
            let got = value(bp) - base;
            let want = -(t.evaluate(bp).log_partition - lz0);
            assert!(
                (got - want).abs() < 1e-9 * want.abs().max(1.0),
                "β' = {bp}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn mean_force_energy_matches_finite_differences() {
        // E[σ] vs the central difference of -∂lnZ/∂β' = ∂(β'F)/∂β'.
        let m = 8usize;
        let bath = Spectrum::from_values(
            &(0..m).map(|i| 0.04 + 0.06 * i as f64).collect::<Vec<_>>(),
        );
        let mut rng = ChaCha12Rng::seed_from_u64(55);
        let h_sys = build_qubit_system(0.30).unwrap();
        for trial in 0..20 {
            let z: f64 = rng.gen_range(-0.8..0.8);
            let x: f64 = rng.gen_range(0.0..(1.0 - z * z).sqrt() * 0.9);
            let sigma = qubit_sigma(x, z);
            let bp: f64 = rng.gen_range(0.5..4.0);
            let ctx = ThermalContext::with_beta_prime(1.0, bp);
            let e = mean_force_energy(&sigma, &h_sys, &bath, &ctx).unwrap();
            let h = 1e-5 * bp;
            let f = |b: f64| -> f64 {
                let c = ThermalContext::with_beta_prime(1.0, b);
                b * free_energy_thermal(&sigma, &h_sys, &bath, &c).unwrap().total()
            };
            let fd = (f(bp + h) - f(bp - h)) / (2.0 * h);
            assert!(
                (e - fd).abs() < 1e-6 * e.abs().max(1.0),
                "trial {trial}: E = {e}, FD = {fd}"
            );
        }
    }

    #[test]
    fn free_energy_equals_mean_force_minus_entropy_on_differences() {
        let m = 9usize;
        let bath = Spectrum::from_values(
            &(0..m).map(|i| 0.03 + 0.05 * i as f64).collect::<Vec<_>>(),
        );
        let h_sys = build_qubit_system(0.30).unwrap();
        let ctx = ThermalContext::with_beta_prime(1.0, 2.2);
        let s1 = qubit_sigma(0.1, 0.4);
        let s2 = qubit_sigma(-0.3, -0.2);
        let df = free_energy_thermal(&s1, &h_sys, &bath, &ctx).unwrap().total()
            - free_energy_thermal(&s2, &h_sys, &bath, &ctx).unwrap().total();
        let de = mean_force_energy(&s1, &h_sys, &bath, &ctx).unwrap()
            - mean_force_energy(&s2, &h_sys, &bath, &ctx).unwrap();
        let dts = entropy_thermal(&s1, &bath, &ctx).unwrap()
            - entropy_thermal(&s2, &bath, &ctx).unwrap();
        assert!(
            (df - (de - dts)).abs() < 1e-10 * df.abs().max(1.0),
            "ΔF = {df}, ΔE − ΔTS = {}",
            de - dts
        );
    }

    #[test]
    fn mean_force_solve_route_agrees_at_small_m() {
        // The dense linear-solve route is valid at small M; it must agree
        // with the factored-derivative route there.
        let bath = Spectrum::from_values(&[0.03, 0.09, 0.15, 0.21, 0.27, 0.33]);
        let sigma = Spectrum::from_values(&[0.28, 0.72]);
        let ctx = ThermalContext::with_beta_prime(1.0, 2.4);
        let fast = mean_force_energy_spectrum(&sigma, 0.1, &bath, &ctx).unwrap();
        let slow = mean_force_energy_via_solves(&sigma, 0.1, &bath, &ctx).unwrap();
        assert!(
            (fast - slow).abs() < 1e-7 * fast.abs().max(1.0),
            "{fast} vs {slow}"
        );
    }

    #[test]
    fn mean_force_beta_prime_to_zero_n1_limit() {
        // N = 1, β' → 0: E → (arithmetic mean of the bath) + H̄_S.
        let bath_vals = [0.1, 0.2, 0.5, 0.6];
        let bath = Spectrum::from_values(&bath_vals);
        let sigma = Spectrum::from_values(&[1.0]);
        let ctx = ThermalContext::with_beta_prime(1.0, 1e-7);
        let e = mean_force_energy_spectrum(&sigma, 0.25, &bath, &ctx).unwrap();
        let mean: f64 = bath_vals.iter().sum::<f64>() / 4.0;
        assert!(
            (e - (mean + 0.25)).abs() < 1e-5,
            "E = {e} vs {}",
            mean + 0.25
        );
    }

    #[test]
    fn analytic_quantities_depend_only_on_the_spectrum() {
        // Random unitary conjugation leaves every analytic value unchanged.
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let bath = Spectrum::from_values(
            &(0..6).map(|i| 0.04 + 0.07 * i as f64).collect::<Vec<_>>(),
        );
        let ctx = ThermalContext::with_beta_prime(1.0, 1.9);
        let sigma = qubit_sigma(0.25, 0.4);
        // Build a Haar-ish unitary from a random Hermitian's eigenvectors.
        let raw = DMatrix::from_fn(2, 2, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let herm = (&raw + raw.adjoint()) * c(0.5, 0.0);
        let u = nalgebra::SymmetricEigen::new(herm).eigenvectors;
        let rotated = sigma.conjugated(&u);
        let a = entropy_thermal(&sigma, &bath, &ctx).unwrap();
        let b = entropy_thermal(&rotated, &bath, &ctx).unwrap();
        assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn degenerate_marginal_matches_closed_form() {
        // P(z) ∝ e^{β'ħω0 z/2}(1-z²)^{M-1} for the degenerate bath.
        let model = build_degenerate_spin_bath(0.30, 3, 0.0, 1e-6).unwrap();
        let ctx = ThermalContext::with_beta_prime(1.0, 3.0);
        let z_grid: Vec<f64> = (0..81).map(|i| -0.99 + 1.98 * i as f64 / 80.0).collect();
        let density = marginal_pz(&model, &ctx, &z_grid, 32).unwrap();
        let m = 8.0;
        let a = ctx.beta_prime * 0.30 / 2.0;
        let closed: Vec<f64> = z_grid
            .iter()
            .map(|z| (a * z).exp() * (1.0 - z * z).powf(m - 1.0))
            .collect();
        let mut norm = 0.0;
        for i in 0..z_grid.len() - 1 {
            norm += 0.5 * (closed[i] + closed[i + 1]) * (z_grid[i + 1] - z_grid[i]);
        }
        for (d, cf) in density.iter().zip(&closed) {
            let want = cf / norm;
            assert!(
                (d - want).abs() <= 1e-8 * want.max(1e-8),
                "density {d} vs closed form {want}"
            );
        }
    }

    #[test]
    fn marginal_mirrors_under_bias_flip() {
        // Flipping the sign of the qubit bias mirrors the density in z.
        let model = build_degenerate_spin_bath(0.30, 2, 0.0, 1e-6).unwrap();
        let mut flipped = model.clone();
        flipped.h_system = HermitianOperator::from_real_diagonal(&[0.15, -0.15]);
        let ctx = ThermalContext::with_beta_prime(1.0, 2.5);
        let z_grid: Vec<f64> = (0..41).map(|i| -0.95 + 1.9 * i as f64 / 40.0).collect();
        let d1 = marginal_pz(&model, &ctx, &z_grid, 24).unwrap();
        let d2 = marginal_pz(&flipped, &ctx, &z_grid, 24).unwrap();
        for (i, d) in d1.iter().enumerate() {
            let mirrored = d2[z_grid.len() - 1 - i];
            assert!((d - mirrored).abs() < 1e-10 * d.max(1e-12));
        }
    }

    #[test]
    fn flat_ensemble_marginal_is_the_geometry_factor() {
        // β' = 0 with M = 2: density ∝ (1-z²), peak 0.75 at z = 0.
        let model = build_degenerate_spin_bath(0.30, 1, 0.0, 1e-6).unwrap();
        let ctx = ThermalContext::with_beta_prime(1.0, 0.0);
        let z_grid: Vec<f64> = (0..201).map(|i| -0.999 + 1.998 * i as f64 / 200.0).collect();
        let density = marginal_pz(&model, &ctx, &z_grid, 24).unwrap();
        let mid = density[100];
        assert!((mid - 0.75).abs() < 1e-3, "peak {mid}");
        for (z, d) in z_grid.iter().zip(&density) {
            assert!((d - 0.75 * (1.0 - z * z)).abs() < 2e-3);
        }
    }

    #[test]
    fn marginal_is_normalized_and_nonnegative() {
        let model = build_truncated_oscillator_bath(0.30, 6, 0.06, 1e-6).unwrap();
        let ctx = ThermalContext::with_beta_prime(1.0 / 0.45, 1.0 / 0.45);
        let z_grid: Vec<f64> = (0..101).map(|i| -0.995 + 1.99 * i as f64 / 100.0).collect();
        let density = marginal_pz(&model, &ctx, &z_grid, 24).unwrap();
        let mut norm = 0.0;
        for i in 0..z_grid.len() - 1 {
            norm += 0.5 * (density[i] + density[i + 1]) * (z_grid[i + 1] - z_grid[i]);
        }
        assert!((norm - 1.0).abs() < 1e-8);
        assert!(density.iter().all(|d| *d >= 0.0));
    }

    #[test]
    fn degenerate_marginal_variance_decreases_with_bath_size() {
        let ctx = ThermalContext::with_beta_prime(1.0, 3.0);
        let z_grid: Vec<f64> = (0..161).map(|i| -0.995 + 1.99 * i as f64 / 160.0).collect();
        let mut prev = f64::INFINITY;
        for d in 1..=4 {
            let model = build_degenerate_spin_bath(0.30, d, 0.0, 1e-6).unwrap();
            let density = marginal_pz(&model, &ctx, &z_grid, 32).unwrap();
            let (_, var) = grid_moments(&z_grid, &density);
            assert!(var < prev, "variance not decreasing at D = {d}: {var} vs {prev}");
            prev = var;
        }
    }
}

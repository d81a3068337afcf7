//! Complex linear-algebra substrate: composite pure states, reduced density
//! matrices, expectations, spectra, and Bloch coordinates.
//!
//! A composite pure state |Ψ⟩ of a system (dimension N) coupled to a bath
//! (dimension M) is stored as a unit-norm complex amplitude vector of length
//! N·M. Reshaping it row-major into the N×M coefficient matrix X gives the
//! reduced states directly: σ = XX† for the system and γ = X†X for the bath.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Unit-norm tolerance for composite states.
pub const NORM_TOL: f64 = 1e-12;
/// Hermiticity tolerance for operators and density matrices.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Eigenvalues of density matrices may dip below zero by round-off only.
pub const PSD_TOL: f64 = -1e-10;
/// Unit-trace tolerance for density matrices.
pub const TRACE_TOL: f64 = 1e-10;
/// Relative tolerance under which two eigenvalues count as degenerate.
pub const DEGENERACY_REL_TOL: f64 = 1e-9;

/// Pure state of the system-bath composite.
#[derive(Debug, Clone)]
pub struct CompositeState {
    amplitudes: DVector<Complex64>,
    n: usize,
    m: usize,
}

impl CompositeState {
    /// Builds a state from amplitudes in the product basis |i⟩_S ⊗ |j⟩_B,
    /// flattened row-major (index k = i·M + j).
    pub fn new(amplitudes: DVector<Complex64>, n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 || amplitudes.len() != n * m {
            return Err(Error::DimensionMismatch(format!(
                "amplitude length {} does not match N·M = {}·{}",
                amplitudes.len(),
                n,
                m
            )));
        }
        let norm_sq: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidInput(format!(
                "state norm² = {norm_sq:.17e}, expected 1 within {NORM_TOL:e}"
            )));
        }
        Ok(Self { amplitudes, n, m })
    }

    /// Normalizes an arbitrary nonzero vector into a state.
    pub fn from_unnormalized(mut amplitudes: DVector<Complex64>, n: usize, m: usize) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidInput("cannot normalize the zero vector".into()));
        }
        amplitudes /= Complex64::new(norm, 0.0);
        Ok(Self { amplitudes, n, m })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    /// Coefficient c_ij of |i⟩_S ⊗ |j⟩_B.
    #[inline]
    pub fn coefficient(&self, i: usize, j: usize) -> Complex64 {
        self.amplitudes[i * self.m + j]
    }

    /// The N×M coefficient matrix X with X_ij = c_ij.
    pub fn coefficient_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.n, self.m, |i, j| self.coefficient(i, j))
    }
}

/// Hermitian, positive-semidefinite, unit-trace density matrix.
#[derive(Debug, Clone)]
pub struct SystemDensityMatrix {
    mat: DMatrix<Complex64>,
}

impl SystemDensityMatrix {
    pub fn new(mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "density matrix must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        check_hermitian(&mat, "density matrix")?;
        let tr = trace_re(&mat);
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidInput(format!(
                "density matrix trace = {tr:.17e}, expected 1 within {TRACE_TOL:e}"
            )));
        }
        let evals = hermitian_eigenvalues(&mat);
        if evals.iter().any(|&e| e < PSD_TOL) {
            return Err(Error::InvalidInput(format!(
                "density matrix has eigenvalue {:.3e} below the PSD tolerance",
                evals.iter().cloned().fold(f64::INFINITY, f64::min)
            )));
        }
        Ok(Self { mat })
    }

    /// Diagonal density matrix from probabilities (clamped, renormalization not applied).
    pub fn from_diagonal(probs: &[f64]) -> Result<Self> {
        let n = probs.len();
        let mat = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(probs[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self::new(mat)
    }

    /// Maximally mixed state 1/N.
    pub fn maximally_mixed(n: usize) -> Self {
        let mat = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(1.0 / n as f64, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    /// Eigenvalues clamped to [0, 1], sorted ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut evals = hermitian_eigenvalues(&self.mat);
        for e in evals.iter_mut() {
            *e = e.max(0.0);
        }
        evals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        evals
    }

    /// Spectrum with degeneracy grouping.
    pub fn spectrum(&self) -> Spectrum {
        Spectrum::from_values(&self.eigenvalues())
    }

    /// Conjugates by a unitary: U σ U†. No unitarity check; test helper.
    pub fn conjugated(&self, u: &DMatrix<Complex64>) -> Self {
        Self {
            mat: u * &self.mat * u.adjoint(),
        }
    }
}

/// Square complex Hermitian operator (energies in eV for Hamiltonians).
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    mat: DMatrix<Complex64>,
}

impl HermitianOperator {
    pub fn new(mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "operator must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        check_hermitian(&mat, "operator")?;
        Ok(Self { mat })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            mat: DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    Complex64::new(diag[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            mat: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mat: DMatrix::identity(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    /// Real eigenvalues, sorted ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut evals = hermitian_eigenvalues(&self.mat);
        evals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        evals
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum::from_values(&self.eigenvalues())
    }

    /// True when all off-diagonal entries vanish to round-off.
    pub fn is_diagonal(&self) -> bool {
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                if i != j && self.mat[(i, j)].norm() > 1e-15 {
                    return false;
                }
            }
        }
        true
    }
}

/// Pauli matrices in the {|0⟩, |1⟩} basis.
pub fn pauli_x() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ],
    )
}

pub fn pauli_y() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, 0.0),
        ],
    )
}

pub fn pauli_z() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(-1.0, 0.0),
        ],
    )
}

/// Kronecker product a ⊗ b.
pub fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Sorted eigenvalues with indices partitioned into degenerate groups.
///
/// Two neighbours belong to the same group when they differ by no more than
/// `DEGENERACY_REL_TOL · max(1, |a|, |b|)`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    values: Vec<f64>,
    /// Half-open index ranges [start, end) into `values`, one per group.
    groups: Vec<(usize, usize)>,
}

impl Spectrum {
    pub fn from_values(values: &[f64]) -> Self {
        Self::from_values_with_tol(values, DEGENERACY_REL_TOL)
    }

    pub fn from_values_with_tol(values: &[f64], rel_tol: f64) -> Self {
        let mut values = values.to_vec();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut groups = Vec::new();
        let mut start = 0;
        for i in 1..=values.len() {
            let split = if i == values.len() {
                true
            } else {
                let (a, b) = (values[i - 1], values[i]);
                (b - a).abs() > rel_tol * 1.0_f64.max(a.abs()).max(b.abs())
            };
            if split {
                groups.push((start, i));
                start = i;
            }
        }
        Self { values, groups }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn groups(&self) -> &[(usize, usize)] {
        &self.groups
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// One representative value per group (the group mean).
    pub fn group_means(&self) -> Vec<f64> {
        self.groups
            .iter()
            .map(|&(a, b)| self.values[a..b].iter().sum::<f64>() / (b - a) as f64)
            .collect()
    }

    pub fn multiplicities(&self) -> Vec<usize> {
        self.groups.iter().map(|&(a, b)| b - a).collect()
    }

    /// All eigenvalues pairwise distinct at the grouping tolerance.
    pub fn is_distinct(&self) -> bool {
        self.groups.len() == self.values.len()
    }

    /// Every eigenvalue equal within the grouping tolerance.
    pub fn is_fully_degenerate(&self) -> bool {
        self.groups.len() <= 1
    }

    pub fn has_degeneracies(&self) -> bool {
        !self.is_distinct()
    }
}

fn check_hermitian(mat: &DMatrix<Complex64>, what: &str) -> Result<()> {
    let n = mat.nrows();
    for i in 0..n {
        for j in i..n {
            let d = (mat[(i, j)] - mat[(j, i)].conj()).norm();
            if d > HERMITICITY_TOL {
                return Err(Error::InvalidInput(format!(
                    "{what} is not Hermitian: |A[{i},{j}] - conj(A[{j},{i}])| = {d:.3e}"
                )));
            }
        }
    }
    Ok(())
}

fn trace_re(mat: &DMatrix<Complex64>) -> f64 {
    (0..mat.nrows()).map(|i| mat[(i, i)].re).sum()
}

/// Eigenvalues of a Hermitian matrix (unsorted).
pub fn hermitian_eigenvalues(mat: &DMatrix<Complex64>) -> Vec<f64> {
    nalgebra::SymmetricEigen::new(mat.clone())
        .eigenvalues
        .iter()
        .cloned()
        .collect()
}

/// Eigen-decomposition of a Hermitian matrix: (eigenvalues, eigenvectors as columns).
pub fn hermitian_eigen(mat: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let eig = nalgebra::SymmetricEigen::new(mat.clone());
    (eig.eigenvalues.iter().cloned().collect(), eig.eigenvectors)
}

/// Reduced system state σ = Tr_B{|Ψ⟩⟨Ψ|} = XX†.
pub fn partial_trace_bath(state: &CompositeState) -> Result<SystemDensityMatrix> {
    let (n, m) = state.dims();
    let mut sigma = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..m {
                acc += state.coefficient(a, j) * state.coefficient(b, j).conj();
            }
            sigma[(a, b)] = acc;
            if a != b {
                sigma[(b, a)] = acc.conj();
            }
        }
    }
    SystemDensityMatrix::new(sigma)
}

/// Reduced bath state γ = Tr_S{|Ψ⟩⟨Ψ|}.
///
/// Entrywise this is the conjugate (= transpose) of X†X; the two share the
/// spectrum and coincide whenever the coefficient matrix is real, so bath
/// energies Tr{H_B γ} agree with the X†X form for real bath Hamiltonians.
pub fn partial_trace_system(state: &CompositeState) -> Result<DMatrix<Complex64>> {
    let (n, m) = state.dims();
    let mut gamma = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n {
                acc += state.coefficient(i, a) * state.coefficient(i, b).conj();
            }
            gamma[(a, b)] = acc;
            if a != b {
                gamma[(b, a)] = acc.conj();
            }
        }
    }
    Ok(gamma)
}

/// Quantum expectation ⟨Ψ|Ô|Ψ⟩. The imaginary residue must vanish to 1e-10.
pub fn expectation(state: &CompositeState, op: &HermitianOperator) -> Result<f64> {
    let dim = state.amplitudes().len();
    if op.dim() != dim {
        return Err(Error::DimensionMismatch(format!(
            "operator dimension {} does not match state dimension {}",
            op.dim(),
            dim
        )));
    }
    let v = op.matrix() * state.amplitudes();
    let val: Complex64 = state
        .amplitudes()
        .iter()
        .zip(v.iter())
        .map(|(a, b)| a.conj() * b)
        .sum();
    debug_assert!(val.im.abs() <= 1e-10, "imaginary residue {:.3e}", val.im);
    Ok(val.re)
}

/// Expectation Tr{Ô σ} of a system observable in a density matrix.
pub fn density_expectation(sigma: &SystemDensityMatrix, op: &DMatrix<Complex64>) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..sigma.dim() {
        for j in 0..sigma.dim() {
            acc += op[(i, j)] * sigma.matrix()[(j, i)];
        }
    }
    acc.re
}

/// Pauli expectations (x, y, z) of a qubit state.
pub fn bloch_vector(sigma: &SystemDensityMatrix) -> Result<(f64, f64, f64)> {
    if sigma.dim() != 2 {
        return Err(Error::UnsupportedDimension(format!(
            "Bloch coordinates require N = 2, got N = {}",
            sigma.dim()
        )));
    }
    let s01 = sigma.matrix()[(0, 1)];
    let x = 2.0 * s01.re;
    let y = -2.0 * s01.im;
    let z = sigma.matrix()[(0, 0)].re - sigma.matrix()[(1, 1)].re;
    Ok((x, y, z))
}

/// Purity Tr{σ²} ∈ [1/N, 1].
pub fn purity(sigma: &SystemDensityMatrix) -> f64 {
    let mut acc = 0.0;
    for i in 0..sigma.dim() {
        for j in 0..sigma.dim() {
            acc += sigma.matrix()[(i, j)].norm_sqr();
        }
    }
    acc
}

/// det σ from the (clamped) eigenvalues.
pub fn det_sigma(sigma: &SystemDensityMatrix) -> f64 {
    sigma.eigenvalues().iter().product()
}

/// Von Neumann entropy −Σ η ln η in units of k_B, with 0·ln 0 = 0.
pub fn von_neumann_entropy(sigma: &SystemDensityMatrix) -> f64 {
    sigma
        .eigenvalues()
        .iter()
        .map(|&e| if e > 0.0 { -e * e.ln() } else { 0.0 })
        .sum()
}

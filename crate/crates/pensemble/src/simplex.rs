//! Laplace transforms of energies averaged over the uniform sphere measure.
//!
//! A unit vector drawn uniformly from the complex sphere has squared
//! amplitudes q distributed flat on the probability simplex, so the weighted
//! energy u = Σ E_k q_k has a piecewise-polynomial density: the M-spline with
//! knots at the E_k. Partition functions and mean ensemble energies reduce to
//! one-dimensional integrals of that density against e^{-β'u}, evaluated here
//! in the log domain with adaptive panels so that arbitrarily large β'·spread
//! never under- or overflows.

use std::cell::RefCell;
use std::collections::HashMap;

use crate::error::{Error, Result};

/// Panel acceptance threshold on |ln I_16 − ln I_8|.
const PANEL_TOL: f64 = 1e-12;
/// Panels this many nats below the dominant one are accepted without refinement.
const PRUNE_NATS: f64 = 60.0;
const MAX_DEPTH: usize = 52;

/// Density and Laplace-transform machinery for u = Σ E_k q_k with q flat on
/// the probability simplex spanned by the spectrum values.
pub struct SimplexTransform {
    /// Knots shifted so the smallest is zero, sorted ascending.
    knots: Vec<f64>,
    e_min: f64,
    spread: f64,
    gl8: (Vec<f64>, Vec<f64>),
    gl16: (Vec<f64>, Vec<f64>),
    density_cache: RefCell<HashMap<u64, f64>>,
}

/// Result of one transform evaluation at a fixed β'.
#[derive(Debug, Clone, Copy)]
pub struct TransformValue {
    /// ln E[e^{-β'u}] over the raw (unshifted) energy variable.
    pub log_partition: f64,
    /// E[u e^{-β'u}] / E[e^{-β'u}] in raw energy units.
    pub mean_energy: f64,
}

impl SimplexTransform {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty spectrum".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite spectrum value".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let e_min = sorted[0];
        let spread = sorted[sorted.len() - 1] - e_min;
        let knots: Vec<f64> = sorted.iter().map(|v| v - e_min).collect();
        Ok(Self {
            knots,
            e_min,
            spread,
            gl8: gauss_legendre(8),
            gl16: gauss_legendre(16),
            density_cache: RefCell::new(HashMap::new()),
        })
    }

    pub fn spread(&self) -> f64 {
        self.spread
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    /// ln of the density at the raw energy coordinate.
    pub fn log_density(&self, e: f64) -> f64 {
        if self.knots.len() == 1 || self.spread == 0.0 {
            return if e == self.e_min { f64::INFINITY } else { f64::NEG_INFINITY };
        }
        self.ln_density_shifted(e - self.e_min)
    }

    fn ln_density_shifted(&self, u: f64) -> f64 {
        if let Some(&v) = self.density_cache.borrow().get(&u.to_bits()) {
            return v;
        }
        let v = mspline_log_density(&self.knots, u);
        self.density_cache.borrow_mut().insert(u.to_bits(), v);
        v
    }

    /// One quadrature panel on the shifted axis: returns (ln ∫ ρ e^{-β'u},
    /// panel mean of u under that weight).
    fn panel(&self, a: f64, b: f64, beta_prime: f64, fine: bool) -> (f64, f64) {
        let (nodes, weights) = if fine { &self.gl16 } else { &self.gl8 };
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let ln_half = half.ln();
        let mut g = [f64::NEG_INFINITY; 16];
        let mut xs = [0.0_f64; 16];
        let n = nodes.len();
        let mut gmax = f64::NEG_INFINITY;
        for i in 0..n {
            let x = mid + half * nodes[i];
            xs[i] = x;
            let lr = self.ln_density_shifted(x);
            let v = lr - beta_prime * x + weights[i].ln() + ln_half;
            g[i] = v;
            gmax = gmax.max(v);
        }
        if gmax == f64::NEG_INFINITY {
            return (f64::NEG_INFINITY, 0.0);
        }
        let mut s = 0.0;
        let mut su = 0.0;
        for i in 0..n {
            let w = (g[i] - gmax).exp();
            s += w;
            su += w * xs[i];
        }
        (gmax + s.ln(), su / s)
    }

    /// Evaluates ln E[e^{-β'u}] and the tilted mean energy in one pass.
    pub fn evaluate(&self, beta_prime: f64) -> TransformValue {
        if self.knots.len() == 1 || self.spread == 0.0 {
            return TransformValue {
                log_partition: -beta_prime * self.e_min,
                mean_energy: self.e_min,
            };
        }

        let mut intervals: Vec<(f64, f64)> = Vec::new();
        for w in self.knots.windows(2) {
            if w[1] > w[0] {
                intervals.push((w[0], w[1]));
            }
        }

        // Seed pass to learn the dominant scale before pruning.
        let mut rough_max = f64::NEG_INFINITY;
        for &(a, b) in &intervals {
            let (lz, _) = self.panel(a, b, beta_prime, true);
            rough_max = rough_max.max(lz);
        }

        let mut ln_max = f64::NEG_INFINITY;
        let mut z_rel = 0.0; // Σ exp(lnZ_i − ln_max)
        let mut zu_rel = 0.0; // Σ exp(lnZ_i − ln_max) · mean_i
        let mut stack: Vec<(f64, f64, usize)> =
            intervals.iter().rev().map(|&(a, b)| (a, b, 0)).collect();
        while let Some((a, b, depth)) = stack.pop() {
            let (lz16, mean16) = self.panel(a, b, beta_prime, true);
            let accept = if depth >= MAX_DEPTH || lz16 < rough_max - PRUNE_NATS {
                true
            } else {
                let (lz8, _) = self.panel(a, b, beta_prime, false);
                if lz16 == f64::NEG_INFINITY && lz8 == f64::NEG_INFINITY {
                    true
                } else {
                    (lz16 - lz8).abs() <= PANEL_TOL
                }
            };
            if !accept {
                let mid = 0.5 * (a + b);
                stack.push((mid, b, depth + 1));
                stack.push((a, mid, depth + 1));
                continue;
            }
            if lz16 == f64::NEG_INFINITY {
                continue;
            }
            if lz16 <= ln_max {
                let w = (lz16 - ln_max).exp();
                z_rel += w;
                zu_rel += w * mean16;
            } else {
                let scale = (ln_max - lz16).exp();
                z_rel = z_rel * scale + 1.0;
                zu_rel = zu_rel * scale + mean16;
                ln_max = lz16;
            }
        }

        // E[e^{-β'u}] = exp(lnZ_shift) and the density integrates to one, so
        // no extra normalization constant appears.
        let ln_z_shift = ln_max + z_rel.ln();
        TransformValue {
            log_partition: ln_z_shift - beta_prime * self.e_min,
            mean_energy: self.e_min + zu_rel / z_rel,
        }
    }

    /// Mean of u under the flat (β' = 0) measure, from the knots directly.
    pub fn flat_mean(&self) -> f64 {
        self.e_min + self.knots.iter().sum::<f64>() / self.knots.len() as f64
    }

    /// Variance of u under the flat measure (closed form for the Dirichlet).
    pub fn flat_variance(&self) -> f64 {
        let p = self.knots.len() as f64;
        let sum: f64 = self.knots.iter().sum();
        let sum_sq: f64 = self.knots.iter().map(|k| k * k).sum();
        (sum_sq + sum * sum) / (p * (p + 1.0)) - (sum / p) * (sum / p)
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] via the Golub-Welsch tridiagonal.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let b = i as f64 / ((4 * i * i - 1) as f64).sqrt();
        m[(i, i - 1)] = b;
        m[(i - 1, i)] = b;
    }
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut pairs: Vec<(f64, f64)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &x)| (x, 2.0 * eig.eigenvectors[(0, k)] * eig.eigenvectors[(0, k)]))
        .collect();
    pairs.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    (
        pairs.iter().map(|p| p.0).collect(),
        pairs.iter().map(|p| p.1).collect(),
    )
}

/// ln of the M-spline density with the given knots at shifted point u.
///
/// The density of Σ E_k q_k under flat Dirichlet weights is the M-spline of
/// order p−1 spanning all p knots (repeated knots model degenerate levels).
/// The upward recursion runs with per-level renormalization so that
/// astronomically small left-tail values come out as finite logs instead of
/// underflowing.
pub fn mspline_log_density(knots: &[f64], u: f64) -> f64 {
    let p = knots.len();
    debug_assert!(p >= 2);
    if u <= knots[0] || u >= knots[p - 1] {
        return f64::NEG_INFINITY;
    }
    // Last index j with knots[j] <= u.
    let j = match knots.binary_search_by(|k| k.partial_cmp(&u).unwrap()) {
        Ok(mut idx) => {
            while idx + 1 < p && knots[idx + 1] <= u {
                idx += 1;
            }
            idx
        }
        Err(ins) => ins - 1,
    };
    let w = knots[j + 1] - knots[j];
    if w <= 0.0 {
        return f64::NEG_INFINITY;
    }
    // vals[i] = M_{i,k}(u), nonzero only for i in [j-k+1, j] ∩ [0, p-1-k].
    let mut vals = vec![0.0_f64; p];
    let mut next = vec![0.0_f64; p];
    let mut log_scale = -w.ln();
    vals[j] = 1.0;
    for k in 2..p {
        let lo = j.saturating_sub(k - 1);
        let hi = j.min(p - 1 - k);
        if lo > hi {
            return f64::NEG_INFINITY;
        }
        let mut max_abs = 0.0_f64;
        for i in lo..=hi {
            let t_i = knots[i];
            let t_ik = knots[i + k];
            let denom = t_ik - t_i;
            let v = if denom <= 0.0 {
                0.0
            } else {
                let a = (u - t_i) * vals[i];
                let b = (t_ik - u) * vals[i + 1];
                (k as f64) * (a + b) / ((k as f64 - 1.0) * denom)
            };
            next[i] = v;
            max_abs = max_abs.max(v.abs());
        }
        if max_abs == 0.0 {
            return f64::NEG_INFINITY;
        }
        for i in 0..p {
            vals[i] = if i >= lo && i <= hi { next[i] / max_abs } else { 0.0 };
        }
        log_scale += max_abs.ln();
    }
    if vals[0] <= 0.0 {
        f64::NEG_INFINITY
    } else {
        log_scale + vals[0].ln()
    }
}

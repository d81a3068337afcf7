//! Log-domain determinants and linear solves with row scaling.
//!
//! The interaction matrices downstream mix polynomial columns spanning
//! hundreds of orders of magnitude with exponentially small entries, so the
//! determinant is only meaningful as (log|det|, sign). Rows are scaled by
//! their max-abs entry first, the scale logs are accumulated separately, and
//! elimination runs either in plain f64 or in double-double (roughly 32
//! significant digits) when cancellation inside the elimination would
//! otherwise eat the result.

use nalgebra::DMatrix;

/// Unevaluated sum of two doubles: value = hi + lo with |lo| ≤ ulp(hi)/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let e = e + self.lo + o.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Self { hi, lo }
    }

    #[inline]
    pub fn sub(self, o: Self) -> Self {
        self.add(Self {
            hi: -o.hi,
            lo: -o.lo,
        })
    }

    #[inline]
    pub fn mul(self, o: Self) -> Self {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + self.hi * o.lo + self.lo * o.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }

    #[inline]
    pub fn div(self, o: Self) -> Self {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul(Self::from_f64(q1)));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul(Self::from_f64(q2)));
        let q3 = r.hi / o.hi;
        let (s, e) = quick_two_sum(q1, q2);
        let (hi, lo) = quick_two_sum(s, e + q3);
        Self { hi, lo }
    }

    #[inline]
    pub fn abs(self) -> Self {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            Self {
                hi: -self.hi,
                lo: -self.lo,
            }
        } else {
            self
        }
    }

    /// ln|x| accurate to f64 precision.
    pub fn ln_abs(self) -> f64 {
        let a = self.abs();
        if a.hi == 0.0 {
            return f64::NEG_INFINITY;
        }
        a.hi.ln() + (a.lo / a.hi).ln_1p()
    }

    /// e^x to double-double accuracy, via 2^k · e^r with |r| ≤ ln2/2.
    pub fn exp(self) -> Self {
        const LN2: DoubleDouble = DoubleDouble {
            hi: std::f64::consts::LN_2,
            lo: 2.3190468138462996e-17,
        };
        if self.hi < -746.0 {
            return Self::ZERO;
        }
        if self.hi > 709.0 {
            return Self::from_f64(f64::INFINITY);
        }
        let k = (self.hi / LN2.hi).round();
        let r = self.sub(LN2.mul(Self::from_f64(k)));
        // Taylor for e^r − 1, |r| ≤ 0.35: ~24 terms reach 1e-33.
        let mut sum = r;
        let mut term = r;
        for t in 2..26 {
            term = term.mul(r).mul(Self::from_f64(1.0 / t as f64));
            sum = sum.add(term);
            if term.hi.abs() < 1e-35 {
                break;
            }
        }
        let e_r = sum.add(Self::from_f64(1.0));
        let scale = 2.0_f64.powi(k as i32);
        Self {
            hi: e_r.hi * scale,
            lo: e_r.lo * scale,
        }
    }

    /// e^x − 1 to double-double accuracy.
    pub fn exp_m1(self) -> Self {
        if self.hi.abs() < 0.35 {
            let mut sum = self;
            let mut term = self;
            for t in 2..30 {
                term = term.mul(self).mul(Self::from_f64(1.0 / t as f64));
                sum = sum.add(term);
                if term.hi.abs() < 1e-35 * sum.hi.abs().max(1e-300) {
                    break;
                }
            }
            sum
        } else {
            self.exp().sub(Self::from_f64(1.0))
        }
    }

    /// Natural log of a positive dd, by one Newton step on exp.
    pub fn ln(self) -> Self {
        debug_assert!(self.hi > 0.0);
        let y0 = Self::from_f64(self.hi.ln());
        // y1 = y0 + (x·e^{-y0} − 1).
        y0.add(self.mul(y0.neg().exp()).sub(Self::from_f64(1.0)))
    }

    #[inline]
    pub fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

/// Minimal scalar interface for the shared elimination code.
pub trait LinalgScalar: Copy {
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn div(self, o: Self) -> Self;
    fn abs_f64(self) -> f64;
    fn ln_abs(self) -> f64;
}

impl LinalgScalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn div(self, o: Self) -> Self {
        self / o
    }
    fn abs_f64(self) -> f64 {
        self.abs()
    }
    fn ln_abs(self) -> f64 {
        self.abs().ln()
    }
}

impl LinalgScalar for DoubleDouble {
    fn from_f64(x: f64) -> Self {
        DoubleDouble::from_f64(x)
    }
    fn to_f64(self) -> f64 {
        DoubleDouble::to_f64(self)
    }
    fn add(self, o: Self) -> Self {
        DoubleDouble::add(self, o)
    }
    fn sub(self, o: Self) -> Self {
        DoubleDouble::sub(self, o)
    }
    fn mul(self, o: Self) -> Self {
        DoubleDouble::mul(self, o)
    }
    fn div(self, o: Self) -> Self {
        DoubleDouble::div(self, o)
    }
    fn abs_f64(self) -> f64 {
        self.abs().to_f64()
    }
    fn ln_abs(self) -> f64 {
        DoubleDouble::ln_abs(self)
    }
}

/// Row-scaled LU factorization with partial pivoting, kept for solves.
pub struct ScaledLu<S: LinalgScalar> {
    /// Combined L\U storage after scaling and pivoting.
    lu: Vec<S>,
    n: usize,
    /// Row permutation: factored row i came from input row perm[i].
    perm: Vec<usize>,
    /// Per-row power-of-two scale factors (input row order).
    scales: Vec<f64>,
    /// Σ log|u_ii| + Σ log scales.
    pub log_abs_det: f64,
    /// Determinant sign: +1, −1, or 0 for an exactly singular matrix.
    pub sign: i8,
}

impl<S: LinalgScalar> ScaledLu<S> {
    pub fn factor(a: &DMatrix<f64>) -> Self {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "determinant needs a square matrix");
        let mut lu: Vec<S> = Vec::with_capacity(n * n);
        let mut scales = vec![1.0_f64; n];
        let mut sign = 1i8;
        let mut log_abs_det = 0.0_f64;

        // Row scaling by the power of two at the max-abs entry, so dividing
        // is exact and the scaled entries stay in [-2, 2]. An all-zero row
        // means det = 0.
        for i in 0..n {
            let mut max_abs = 0.0_f64;
            for j in 0..n {
                max_abs = max_abs.max(a[(i, j)].abs());
            }
            if max_abs == 0.0 {
                return Self {
                    lu: vec![S::from_f64(0.0); n * n],
                    n,
                    perm: (0..n).collect(),
                    scales,
                    log_abs_det: f64::NEG_INFINITY,
                    sign: 0,
                };
            }
            let scale = 2.0_f64.powi(max_abs.log2().floor() as i32);
            scales[i] = scale;
            log_abs_det += scale.ln();
            for j in 0..n {
                lu.push(S::from_f64(a[(i, j)] / scale));
            }
        }

        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            // Partial pivoting on the scaled matrix.
            let mut p = k;
            let mut best = lu[k * n + k].abs_f64();
            for i in k + 1..n {
                let v = lu[i * n + k].abs_f64();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[k * n + k];
            if pivot.abs_f64() == 0.0 {
                return Self {
                    lu,
                    n,
                    perm,
                    scales,
                    log_abs_det: f64::NEG_INFINITY,
                    sign: 0,
                };
            }
            log_abs_det += pivot.ln_abs();
            if pivot.to_f64() < 0.0 {
                sign = -sign;
            }
            for i in k + 1..n {
                let factor = lu[i * n + k].div(pivot);
                lu[i * n + k] = factor;
                for j in k + 1..n {
                    let upd = lu[i * n + j].sub(factor.mul(lu[k * n + j]));
                    lu[i * n + j] = upd;
                }
            }
        }

        Self {
            lu,
            n,
            perm,
            scales,
            log_abs_det,
            sign,
        }
    }

    /// Solves A x = b using the stored factorization.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        assert!(self.sign != 0, "singular matrix");
        let n = self.n;
        // Apply row scaling, then the permutation.
        let mut y: Vec<S> = (0..n)
            .map(|i| S::from_f64(b[self.perm[i]] / self.scales[self.perm[i]]))
            .collect();
        // Forward substitution with unit lower factor.
        for i in 1..n {
            let mut acc = y[i];
            for j in 0..i {
                acc = acc.sub(self.lu[i * n + j].mul(y[j]));
            }
            y[i] = acc;
        }
        // Back substitution.
        for i in (0..n).rev() {
            let mut acc = y[i];
            for j in i + 1..n {
                acc = acc.sub(self.lu[i * n + j].mul(y[j]));
            }
            y[i] = acc.div(self.lu[i * n + i]);
        }
        y.into_iter().map(|v| v.to_f64()).collect()
    }
}

/// log|det A| and the determinant sign, via row scaling and f64 LU.
pub fn log_abs_det_scaled(a: &DMatrix<f64>) -> (f64, i8) {
    let lu = ScaledLu::<f64>::factor(a);
    (lu.log_abs_det, lu.sign)
}

/// Same contract as [`log_abs_det_scaled`], eliminating in double-double.
pub fn log_abs_det_scaled_dd(a: &DMatrix<f64>) -> (f64, i8) {
    let lu = ScaledLu::<DoubleDouble>::factor(a);
    (lu.log_abs_det, lu.sign)
}

//! Truncated power series, used to start integrations at regular singular
//! points (the origin and the light cone `z = 1`).

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, PartialEq)]
pub struct Series(pub Vec<f64>);

impl Series {
    pub fn zeros(len: usize) -> Self {
        Series(vec![0.0; len])
    }

    pub fn constant(value: f64, len: usize) -> Self {
        let mut s = Self::zeros(len);
        s.0[0] = value;
        s
    }

    /// Polynomial with the given low-order coefficients, padded to `len`.
    pub fn poly(coeffs: &[f64], len: usize) -> Self {
        let mut s = Self::zeros(len);
        for (dst, &c) in s.0.iter_mut().zip(coeffs) {
            *dst = c;
        }
        s
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.0.get(k).copied().unwrap_or(0.0)
    }

    pub fn scale(&self, a: f64) -> Self {
        Series(self.0.iter().map(|c| a * c).collect())
    }

    /// Term-wise derivative; the top coefficient becomes zero.
    pub fn derivative(&self) -> Self {
        let n = self.len();
        let mut out = Self::zeros(n);
        for k in 1..n {
            out.0[k - 1] = k as f64 * self.0[k];
        }
        out
    }

    /// `(sin self, cos self)` by the standard coupled recurrence.
    pub fn sin_cos(&self) -> (Self, Self) {
        let n = self.len();
        let mut s = Self::zeros(n);
        let mut c = Self::zeros(n);
        if n == 0 {
            return (s, c);
        }
        s.0[0] = self.0[0].sin();
        c.0[0] = self.0[0].cos();
        for k in 1..n {
            let mut ds = 0.0;
            let mut dc = 0.0;
            for j in 1..=k {
                let jg = j as f64 * self.0[j];
                ds += jg * c.0[k - j];
                dc -= jg * s.0[k - j];
            }
            s.0[k] = ds / k as f64;
            c.0[k] = dc / k as f64;
        }
        (s, c)
    }

    /// Value and first derivative at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let mut v = 0.0;
        let mut d = 0.0;
        for (k, &c) in self.0.iter().enumerate().rev() {
            v = v * x + c;
            if k > 0 {
                d = d * x + k as f64 * c;
            }
        }
        (v, d)
    }
}

impl Add for &Series {
    type Output = Series;
    fn add(self, rhs: &Series) -> Series {
        let n = self.len().max(rhs.len());
        Series((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &Series {
    type Output = Series;
    fn sub(self, rhs: &Series) -> Series {
        let n = self.len().max(rhs.len());
        Series((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Neg for &Series {
    type Output = Series;
    fn neg(self) -> Series {
        self.scale(-1.0)
    }
}

impl Mul for &Series {
    type Output = Series;
    /// Cauchy product truncated to the longer operand's length.
    fn mul(self, rhs: &Series) -> Series {
        let n = self.len().max(rhs.len());
        let mut out = Series::zeros(n);
        for i in 0..self.len() {
            let a = self.0[i];
            if a == 0.0 {
                continue;
            }
            for j in 0..rhs.len().min(n - i) {
                out.0[i + j] += a * rhs.0[j];
            }
        }
        out
    }
}

/// Fix unknown coefficients one order at a time.
///
/// `coeffs[..first]` are given. For each `j >= first`, the residual series
/// coefficient at order `residual_order(j)` must be affine in `coeffs[j]`
/// and independent of every higher coefficient; it is driven to zero.
/// Returns `None` at a resonance (the order-`j` equation does not involve
/// `coeffs[j]`).
pub fn solve_order_by_order(
    mut coeffs: Vec<f64>,
    first: usize,
    residual_order: impl Fn(usize) -> usize,
    residual: impl Fn(&Series) -> Series,
) -> Option<Series> {
    for j in first..coeffs.len() {
        let ord = residual_order(j);
        coeffs[j] = 0.0;
        let r0 = residual(&Series(coeffs.clone())).coeff(ord);
        // Probe at a size comparable to r0 so the difference keeps precision.
        let probe = r0.abs().max(1.0);
        coeffs[j] = probe;
        let slope = (residual(&Series(coeffs.clone())).coeff(ord) - r0) / probe;
        if !(slope.abs() > 1e-12) || !slope.is_finite() {
            return None;
        }
        coeffs[j] = -r0 / slope;
    }
    Some(Series(coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sin_cos_of_linear_series() {
        let x = Series::poly(&[0.3, 1.0], 8);
        let (s, c) = x.sin_cos();
        // sin(0.3 + h) = sin(0.3) + cos(0.3) h - sin(0.3) h^2/2 ...
        let h = 0.05;
        assert!((s.eval(h).0 - (0.3f64 + h).sin()).abs() < 1e-12);
        assert!((c.eval(h).0 - (0.3f64 + h).cos()).abs() < 1e-12);
    }

    #[test]
    fn product_and_eval() {
        let a = Series::poly(&[1.0, 2.0], 4);
        let b = Series::poly(&[3.0, 0.0, 1.0], 4);
        let p = &a * &b;
        assert_eq!(p.0, vec![3.0, 6.0, 1.0, 2.0]);
        let (v, d) = p.eval(2.0);
        assert_eq!(v, 3.0 + 12.0 + 4.0 + 16.0);
        assert_eq!(d, 6.0 + 2.0 * 2.0 + 6.0 * 4.0);
    }

    #[test]
    fn order_by_order_recovers_exponential() {
        // y' - y = 0, y(0) = 1: order-(j-1) residual fixes coefficient j.
        let s = solve_order_by_order(
            vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            1,
            |j| j - 1,
            |y| &y.derivative() - y,
        )
        .unwrap();
        let mut fact = 1.0;
        for k in 0..6 {
            if k > 0 {
                fact *= k as f64;
            }
            assert!((s.0[k] - 1.0 / fact).abs() < 1e-14);
        }
    }
}

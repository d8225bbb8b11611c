//! Truncated bivariate Taylor series in `(t, x)` for exact-derivative
//! evaluation of closed-form bindings.
//!
//! Coefficients `c[i][j]` of `dt^i dx^j` are kept for `i + j ≤ order`.
//! Elementary functions compose through their univariate Taylor
//! coefficients at the constant term, so every derivative up to `order` is
//! exact to rounding.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Closed-form field value as a function of the seeded `(t, x)` series.
pub type Binding = Box<dyn Fn(&Taylor2, &Taylor2) -> Taylor2 + Send + Sync>;

#[derive(Clone, Debug, PartialEq)]
pub struct Taylor2 {
    order: usize,
    c: Vec<f64>,
}

fn idx(order: usize, i: usize, j: usize) -> usize {
    i * (order + 1) + j
}

impl Taylor2 {
    pub fn constant(order: usize, v: f64) -> Self {
        let mut c = vec![0.0; (order + 1) * (order + 1)];
        c[0] = v;
        Taylor2 { order, c }
    }

    /// Seed for the time variable at `t0`.
    pub fn var_t(order: usize, t0: f64) -> Self {
        let mut s = Self::constant(order, t0);
        if order >= 1 {
            s.c[idx(order, 1, 0)] = 1.0;
        }
        s
    }

    /// Seed for the space variable at `x0`.
    pub fn var_x(order: usize, x0: f64) -> Self {
        let mut s = Self::constant(order, x0);
        if order >= 1 {
            s.c[idx(order, 0, 1)] = 1.0;
        }
        s
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > self.order {
            0.0
        } else {
            self.c[idx(self.order, i, j)]
        }
    }

    /// `∂_t^i ∂_x^j` at the expansion point.
    pub fn derivative(&self, i: usize, j: usize) -> f64 {
        self.coeff(i, j) * factorial(i) * factorial(j)
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }

    fn like(&self, v: f64) -> Self {
        Self::constant(self.order, v)
    }

    pub fn scale(&self, s: f64) -> Self {
        Taylor2 { order: self.order, c: self.c.iter().map(|v| v * s).collect() }
    }

    pub fn add_scalar(&self, s: f64) -> Self {
        let mut r = self.clone();
        r.c[0] += s;
        r
    }

    fn mul_series(&self, o: &Self) -> Self {
        let n = self.order;
        let mut r = Self::constant(n, 0.0);
        for i1 in 0..=n {
            for j1 in 0..=(n - i1) {
                let a = self.c[idx(n, i1, j1)];
                if a == 0.0 {
                    continue;
                }
                for i2 in 0..=(n - i1 - j1) {
                    for j2 in 0..=(n - i1 - j1 - i2) {
                        r.c[idx(n, i1 + i2, j1 + j2)] += a * o.c[idx(n, i2, j2)];
                    }
                }
            }
        }
        r
    }

    /// `Σ_k coeffs[k] · (self − self₀)^k`.
    fn compose(&self, coeffs: &[f64]) -> Self {
        let mut h = self.clone();
        h.c[0] = 0.0;
        let mut acc = self.like(coeffs[self.order]);
        for k in (0..self.order).rev() {
            acc = acc.mul_series(&h).add_scalar(coeffs[k]);
        }
        acc
    }

    pub fn recip(&self) -> Self {
        let a = self.value();
        let coeffs: Vec<f64> = (0..=self.order).map(|k| (-1f64).powi(k as i32) / a.powi(k as i32 + 1)).collect();
        self.compose(&coeffs)
    }

    pub fn exp(&self) -> Self {
        let ea = self.value().exp();
        let coeffs: Vec<f64> = (0..=self.order).map(|k| ea / factorial(k)).collect();
        self.compose(&coeffs)
    }

    pub fn ln(&self) -> Self {
        let a = self.value();
        let mut coeffs = vec![a.ln()];
        for k in 1..=self.order {
            coeffs.push((-1f64).powi(k as i32 + 1) / (k as f64 * a.powi(k as i32)));
        }
        self.compose(&coeffs)
    }

    /// Real power; the base must be positive unless `p` is an integer.
    pub fn powf(&self, p: f64) -> Self {
        let a = self.value();
        let mut coeffs = Vec::with_capacity(self.order + 1);
        let mut binom = 1.0;
        for k in 0..=self.order {
            coeffs.push(binom * a.powf(p - k as f64));
            binom *= (p - k as f64) / (k as f64 + 1.0);
        }
        self.compose(&coeffs)
    }

    pub fn powi(&self, n: i32) -> Self {
        if n >= 0 {
            let mut r = self.like(1.0);
            for _ in 0..n {
                r = r.mul_series(self);
            }
            r
        } else {
            self.recip().powi(-n)
        }
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    /// Real cube root, valid for negative base values.
    pub fn cbrt(&self) -> Self {
        let a = self.value();
        let mut coeffs = Vec::with_capacity(self.order + 1);
        let mut binom = 1.0;
        for k in 0..=self.order {
            coeffs.push(binom * a.cbrt() / a.powi(k as i32));
            binom *= (1.0 / 3.0 - k as f64) / (k as f64 + 1.0);
        }
        self.compose(&coeffs)
    }

    pub fn sin(&self) -> Self {
        let a = self.value();
        let coeffs: Vec<f64> =
            (0..=self.order).map(|k| (a + k as f64 * std::f64::consts::FRAC_PI_2).sin() / factorial(k)).collect();
        self.compose(&coeffs)
    }

    pub fn cos(&self) -> Self {
        let a = self.value();
        let coeffs: Vec<f64> =
            (0..=self.order).map(|k| (a + k as f64 * std::f64::consts::FRAC_PI_2).cos() / factorial(k)).collect();
        self.compose(&coeffs)
    }

    pub fn tan(&self) -> Self {
        self.sin() / self.cos()
    }

    pub fn atan(&self) -> Self {
        // atan' = 1/(1+s²); integrate the univariate series of the derivative.
        let a = self.value();
        let n = self.order;
        // Series of 1 + (a+s)² = (1+a²) + 2a s + s².
        let den = [1.0 + a * a, 2.0 * a, 1.0];
        let mut inv = vec![0.0; n + 1];
        for k in 0..=n {
            let mut v = if k == 0 { 1.0 } else { 0.0 };
            for m in 1..=k.min(2) {
                v -= den[m] * inv[k - m];
            }
            inv[k] = v / den[0];
        }
        let mut coeffs = vec![a.atan()];
        for k in 1..=n {
            coeffs.push(inv[k - 1] / k as f64);
        }
        self.compose(&coeffs)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

impl Add for &Taylor2 {
    type Output = Taylor2;
    fn add(self, o: &Taylor2) -> Taylor2 {
        Taylor2 { order: self.order, c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Taylor2 {
    type Output = Taylor2;
    fn sub(self, o: &Taylor2) -> Taylor2 {
        Taylor2 { order: self.order, c: self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect() }
    }
}

impl Mul for &Taylor2 {
    type Output = Taylor2;
    fn mul(self, o: &Taylor2) -> Taylor2 {
        self.mul_series(o)
    }
}

impl Div for &Taylor2 {
    type Output = Taylor2;
    fn div(self, o: &Taylor2) -> Taylor2 {
        self.mul_series(&o.recip())
    }
}

impl Neg for &Taylor2 {
    type Output = Taylor2;
    fn neg(self) -> Taylor2 {
        self.scale(-1.0)
    }
}

macro_rules! owned_ops {
    ($tr:ident, $m:ident) => {
        impl $tr for Taylor2 {
            type Output = Taylor2;
            fn $m(self, o: Taylor2) -> Taylor2 {
                (&self).$m(&o)
            }
        }
        impl $tr<&Taylor2> for Taylor2 {
            type Output = Taylor2;
            fn $m(self, o: &Taylor2) -> Taylor2 {
                (&self).$m(o)
            }
        }
        impl $tr<Taylor2> for &Taylor2 {
            type Output = Taylor2;
            fn $m(self, o: Taylor2) -> Taylor2 {
                self.$m(&o)
            }
        }
    };
}

owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);
owned_ops!(Div, div);

impl Neg for Taylor2 {
    type Output = Taylor2;
    fn neg(self) -> Taylor2 {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_elementary_functions() {
        let n = 5;
        let x = Taylor2::var_x(n, 0.7);
        let t = Taylor2::var_t(n, 0.3);
        let f = (&x * &t).sin();
        // ∂_t∂_x sin(xt) = cos(xt) − xt sin(xt)
        let xt: f64 = 0.21;
        assert!((f.derivative(1, 1) - (xt.cos() - xt * xt.sin())).abs() < 1e-14);
        let a = x.atan();
        // atan''' = (6x² − 2)/(1+x²)³
        let v: f64 = 0.7;
        assert!((a.derivative(0, 3) - (6.0 * v * v - 2.0) / (1.0 + v * v).powi(3)).abs() < 1e-13);
        let c = x.scale(-1.0).cbrt();
        assert!((c.derivative(0, 1) + 0.7f64.powf(-2.0 / 3.0) / 3.0).abs() < 1e-13);
        let l = x.ln().exp();
        assert!((l.derivative(0, 1) - 1.0).abs() < 1e-14 && l.derivative(0, 4).abs() < 1e-12);
        let s = x.sqrt() * x.sqrt();
        assert!((s.derivative(0, 1) - 1.0).abs() < 1e-14 && s.derivative(0, 2).abs() < 1e-13);
    }
}

//! Band-limited real functions and diffeomorphisms on the circle.
//!
//! A [`CircleField`] stores Fourier modes `c_0..c_N`; negative modes are the
//! conjugates. Linear operations are exact. Products are exact at the summed
//! bandlimit. Everything else (composition, division, pointwise maps) runs on
//! an oversampled grid and reports the coefficient mass dropped when cutting
//! back to the target bandlimit.
//!
//! A [`CircleDiffeo`] is `f(θ) = θ + h(θ)` with periodic `h`, so winding is
//! exact by construction.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ode::{self, OdeOptions};

pub const DEFAULT_BANDLIMIT: usize = 64;
pub const DEFAULT_OVERSAMPLE: usize = 4;
pub const DEFAULT_TRUNC_TOL: f64 = 1e-10;
pub const JET_TOL: f64 = 1e-9;

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("grid of {grid} points cannot resolve bandlimit {bandlimit}")]
    GridTooSmall { grid: usize, bandlimit: usize },
    #[error("truncation residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    Truncation { residual: f64, tol: f64 },
    #[error("map is not orientation preserving (min f' = {0:.3e})")]
    Orientation(f64),
    #[error("division by a field with min |g| = {0:.3e}")]
    NearZeroDivisor(f64),
    #[error("flow integration failed: {0}")]
    Flow(String),
    #[error("malformed field record: {0}")]
    Malformed(String),
}

pub type FieldResult<T> = Result<T, FieldError>;

/// Resolution policy for nonlinear operations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub bandlimit: usize,
    pub oversample: usize,
    pub trunc_tol: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self { bandlimit: DEFAULT_BANDLIMIT, oversample: DEFAULT_OVERSAMPLE, trunc_tol: DEFAULT_TRUNC_TOL }
    }
}

impl FieldConfig {
    pub fn with_bandlimit(bandlimit: usize) -> Self {
        Self { bandlimit, ..Self::default() }
    }

    pub fn grid_for(&self, content: usize) -> usize {
        let n = content.max(self.bandlimit);
        self.oversample.max(2) * (2 * n + 1)
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        let plan = if inverse { p.plan_fft_inverse(buf.len()) } else { p.plan_fft_forward(buf.len()) };
        plan.process(buf);
    });
}

/// Grid point `j` of an `m`-point uniform grid on `[0, 2π)`.
pub fn grid_point(j: usize, m: usize) -> f64 {
    TWO_PI * j as f64 / m as f64
}

pub fn grid(m: usize) -> Vec<f64> {
    (0..m).map(|j| grid_point(j, m)).collect()
}

#[derive(Clone, PartialEq)]
pub struct CircleField {
    modes: Vec<Complex64>,
}

impl fmt::Debug for CircleField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shown: Vec<String> = self
            .modes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() > 1e-14)
            .take(8)
            .map(|(k, c)| format!("c{k}={:.6}{:+.6}i", c.re, c.im))
            .collect();
        write!(f, "CircleField(N={}; {})", self.bandlimit(), shown.join(", "))
    }
}

impl CircleField {
    pub fn zeros(bandlimit: usize) -> Self {
        Self { modes: vec![Complex64::new(0.0, 0.0); bandlimit + 1] }
    }

    pub fn constant(value: f64, bandlimit: usize) -> Self {
        let mut z = Self::zeros(bandlimit);
        z.modes[0] = Complex64::new(value, 0.0);
        z
    }

    /// `a cos(kθ) + b sin(kθ)`.
    pub fn harmonic(k: usize, a: f64, b: f64, bandlimit: usize) -> Self {
        let mut z = Self::zeros(bandlimit.max(k));
        if k == 0 {
            z.modes[0] = Complex64::new(a, 0.0);
        } else {
            z.modes[k] = Complex64::new(a / 2.0, -b / 2.0);
        }
        z
    }

    pub fn cos(k: usize, bandlimit: usize) -> Self {
        Self::harmonic(k, 1.0, 0.0, bandlimit)
    }

    pub fn sin(k: usize, bandlimit: usize) -> Self {
        Self::harmonic(k, 0.0, 1.0, bandlimit)
    }

    /// Builds a field from `c_0..c_N`; the imaginary part of `c_0` is dropped.
    pub fn from_modes(mut modes: Vec<Complex64>) -> Self {
        if modes.is_empty() {
            modes.push(Complex64::new(0.0, 0.0));
        }
        modes[0].im = 0.0;
        Self { modes }
    }

    /// Interpolates uniform samples on `[0, 2π)` at the given bandlimit.
    pub fn from_samples(values: &[f64], bandlimit: usize) -> FieldResult<Self> {
        Ok(Self::fit_grid(values, bandlimit)?.0)
    }

    /// Interpolates uniform samples at the largest bandlimit the grid resolves.
    pub fn from_samples_auto(values: &[f64]) -> FieldResult<Self> {
        let n = values.len().saturating_sub(1) / 2;
        Self::from_samples(values, n)
    }

    /// Fits samples and returns the dropped coefficient mass `2 Σ_{k>N} |c_k|`,
    /// an upper bound on the sup-norm truncation error as seen by the grid.
    pub fn fit_grid(values: &[f64], bandlimit: usize) -> FieldResult<(Self, f64)> {
        let m = values.len();
        if m < 2 * bandlimit + 1 {
            return Err(FieldError::GridTooSmall { grid: m, bandlimit });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite(i));
        }
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_in_place(&mut buf, false);
        let inv = 1.0 / m as f64;
        let modes: Vec<Complex64> = buf[..=bandlimit].iter().map(|c| c * inv).collect();
        let half = (m - 1) / 2;
        let mut residual = 0.0;
        for k in bandlimit + 1..=half {
            residual += 2.0 * buf[k].norm() * inv;
        }
        if m % 2 == 0 && m / 2 > bandlimit {
            residual += buf[m / 2].norm() * inv;
        }
        Ok((Self::from_modes(modes), residual))
    }

    /// Samples `f` on an oversampled grid and truncates to the configured bandlimit.
    pub fn from_fn<F: Fn(f64) -> f64>(f: F, cfg: &FieldConfig) -> FieldResult<(Self, f64)> {
        let m = cfg.grid_for(cfg.bandlimit);
        let values: Vec<f64> = (0..m).map(|j| f(grid_point(j, m))).collect();
        Self::fit_grid(&values, cfg.bandlimit)
    }

    pub fn bandlimit(&self) -> usize {
        self.modes.len() - 1
    }

    pub fn modes(&self) -> &[Complex64] {
        &self.modes
    }

    /// Mode `k` for any integer `k`, using Hermitian symmetry.
    pub fn mode(&self, k: i64) -> Complex64 {
        let a = k.unsigned_abs() as usize;
        if a > self.bandlimit() {
            return Complex64::new(0.0, 0.0);
        }
        if k >= 0 {
            self.modes[a]
        } else {
            self.modes[a].conj()
        }
    }

    /// Samples on an `m`-point grid; `m ≥ 2N+1` avoids aliasing.
    pub fn samples(&self, m: usize) -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for (k, c) in self.modes.iter().enumerate() {
            let a = k % m;
            buf[a] += c;
            if k > 0 {
                let b = (m - a) % m;
                buf[b] += c.conj();
            }
        }
        fft_in_place(&mut buf, true);
        buf.iter().map(|c| c.re).collect()
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.eval_derivative(theta, 0)
    }

    /// `d^n f/dθ^n` at a point, by direct modal summation.
    pub fn eval_derivative(&self, theta: f64, order: u32) -> f64 {
        let mut acc = if order == 0 { self.modes[0].re } else { 0.0 };
        let step = Complex64::from_polar(1.0, theta);
        let mut e = step;
        for (k, c) in self.modes.iter().enumerate().skip(1) {
            let ik = Complex64::new(0.0, k as f64).powu(order);
            acc += 2.0 * (c * ik * e).re;
            e *= step;
        }
        acc
    }

    pub fn mean(&self) -> f64 {
        self.modes[0].re
    }

    pub fn derivative(&self, order: u32) -> Self {
        let modes = self
            .modes
            .iter()
            .enumerate()
            .map(|(k, c)| c * Complex64::new(0.0, k as f64).powu(order))
            .collect();
        Self::from_modes(modes)
    }

    /// Zero-mean antiderivative of the zero-mean part.
    pub fn antiderivative(&self) -> Self {
        let modes = self
            .modes
            .iter()
            .enumerate()
            .map(|(k, c)| if k == 0 { Complex64::new(0.0, 0.0) } else { c / Complex64::new(0.0, k as f64) })
            .collect();
        Self::from_modes(modes)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { modes: self.modes.iter().map(|c| c * s).collect() }
    }

    pub fn add_constant(&self, s: f64) -> Self {
        let mut z = self.clone();
        z.modes[0].re += s;
        z
    }

    /// Zero-pads (or truncates) to a new bandlimit.
    pub fn with_bandlimit(&self, bandlimit: usize) -> Self {
        self.truncate(bandlimit).0
    }

    /// Truncates to `bandlimit`, returning the dropped mass `2 Σ |c_k|`.
    pub fn truncate(&self, bandlimit: usize) -> (Self, f64) {
        let mut modes = self.modes.clone();
        let residual = if bandlimit < self.bandlimit() {
            2.0 * modes[bandlimit + 1..].iter().map(|c| c.norm()).sum::<f64>()
        } else {
            0.0
        };
        modes.resize(bandlimit + 1, Complex64::new(0.0, 0.0));
        (Self { modes }, residual)
    }

    /// Exact product at bandlimit `N₁ + N₂`.
    pub fn mul(&self, other: &Self) -> Self {
        let n = self.bandlimit() + other.bandlimit();
        if let Some(c) = self.constant_value() {
            return other.scale(c).with_bandlimit(n);
        }
        if let Some(c) = other.constant_value() {
            return self.scale(c).with_bandlimit(n);
        }
        let m = 2 * n + 2;
        let a = self.samples(m);
        let b = other.samples(m);
        let prod: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        Self::fit_grid(&prod, n).expect("product grid resolves the summed bandlimit").0
    }

    /// Highest mode index carrying a nonzero coefficient.
    pub fn effective_bandlimit(&self) -> usize {
        self.modes.iter().rposition(|c| c.re != 0.0 || c.im != 0.0).unwrap_or(0)
    }

    /// `Some(c)` when every nonzero mode vanishes exactly.
    pub fn constant_value(&self) -> Option<f64> {
        self.modes[1..].iter().all(|c| c.re == 0.0 && c.im == 0.0).then_some(self.modes[0].re)
    }

    /// Applies a pointwise map on an oversampled grid and re-truncates.
    pub fn map_pointwise<F: Fn(f64) -> f64>(&self, f: F, cfg: &FieldConfig) -> FieldResult<(Self, f64)> {
        let m = cfg.grid_for(self.bandlimit());
        let values: Vec<f64> = self.samples(m).into_iter().map(f).collect();
        Self::fit_grid(&values, cfg.bandlimit)
    }

    /// Pointwise quotient `self / g`, guarded against near-zero divisors.
    pub fn div(&self, g: &Self, cfg: &FieldConfig) -> FieldResult<Self> {
        let m = cfg.grid_for(self.bandlimit().max(g.bandlimit()));
        let a = self.samples(m);
        let b = g.samples(m);
        let min = b.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
        if min < 1e-8 {
            return Err(FieldError::NearZeroDivisor(min));
        }
        let q: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x / y).collect();
        let (field, residual) = Self::fit_grid(&q, cfg.bandlimit)?;
        check_residual(residual, cfg)?;
        Ok(field)
    }

    /// `f ∘ g`, evaluated pointwise then re-truncated.
    pub fn compose(&self, g: &CircleDiffeo, cfg: &FieldConfig) -> FieldResult<Self> {
        let (field, residual) = self.compose_report(g, cfg)?;
        check_residual(residual, cfg)?;
        Ok(field)
    }

    /// `f ∘ g` together with its truncation residual.
    pub fn compose_report(&self, g: &CircleDiffeo, cfg: &FieldConfig) -> FieldResult<(Self, f64)> {
        g.require_orientation()?;
        let out = cfg.bandlimit.max(self.bandlimit());
        if g.h.constant_value() == Some(0.0) {
            return Ok((self.with_bandlimit(out), 0.0));
        }
        let m = cfg.oversample.max(2) * (2 * (out + g.h.bandlimit()) + 1);
        let gs = g.h.samples(m);
        let values: Vec<f64> = (0..m).map(|j| self.eval(grid_point(j, m) + gs[j])).collect();
        Self::fit_grid(&values, out)
    }

    /// Sup norm estimated on a 4× oversampled grid.
    pub fn sup_norm(&self) -> f64 {
        let m = 4 * (2 * self.bandlimit() + 1);
        self.samples(m).iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// `sqrt(∫ dθ/2π f²)` via Parseval.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self
            .modes
            .iter()
            .enumerate()
            .map(|(k, c)| if k == 0 { c.norm_sqr() } else { 2.0 * c.norm_sqr() })
            .sum();
        s.sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.modes.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn to_record(&self) -> FieldRecord {
        FieldRecord { bandlimit: self.bandlimit(), modes: self.modes.iter().map(|c| [c.re, c.im]).collect() }
    }

    pub fn from_record(rec: &FieldRecord) -> FieldResult<Self> {
        if rec.modes.len() != rec.bandlimit + 1 {
            return Err(FieldError::Malformed(format!(
                "expected {} modes for bandlimit {}, got {}",
                rec.bandlimit + 1,
                rec.bandlimit,
                rec.modes.len()
            )));
        }
        if rec.modes.iter().flatten().any(|v| !v.is_finite()) {
            return Err(FieldError::Malformed("non-finite mode".into()));
        }
        Ok(Self::from_modes(rec.modes.iter().map(|[re, im]| Complex64::new(*re, *im)).collect()))
    }
}

pub(crate) fn check_residual(residual: f64, cfg: &FieldConfig) -> FieldResult<()> {
    if residual > cfg.trunc_tol {
        Err(FieldError::Truncation { residual, tol: cfg.trunc_tol })
    } else {
        Ok(())
    }
}

/// JSON carrier: modes ordered `k = 0..N`, negative modes implied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRecord {
    pub bandlimit: usize,
    pub modes: Vec<[f64; 2]>,
}

impl Serialize for CircleField {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_record().serialize(s)
    }
}

impl<'de> Deserialize<'de> for CircleField {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rec = FieldRecord::deserialize(d)?;
        Self::from_record(&rec).map_err(serde::de::Error::custom)
    }
}

fn zip_modes(a: &CircleField, b: &CircleField, op: impl Fn(Complex64, Complex64) -> Complex64) -> CircleField {
    let n = a.bandlimit().max(b.bandlimit());
    let modes = (0..=n)
        .map(|k| {
            let x = a.modes.get(k).copied().unwrap_or_default();
            let y = b.modes.get(k).copied().unwrap_or_default();
            op(x, y)
        })
        .collect();
    CircleField::from_modes(modes)
}

impl Add for &CircleField {
    type Output = CircleField;
    fn add(self, rhs: &CircleField) -> CircleField {
        zip_modes(self, rhs, |x, y| x + y)
    }
}

impl Sub for &CircleField {
    type Output = CircleField;
    fn sub(self, rhs: &CircleField) -> CircleField {
        zip_modes(self, rhs, |x, y| x - y)
    }
}

impl Neg for &CircleField {
    type Output = CircleField;
    fn neg(self) -> CircleField {
        self.scale(-1.0)
    }
}

impl Mul for &CircleField {
    type Output = CircleField;
    fn mul(self, rhs: &CircleField) -> CircleField {
        CircleField::mul(self, rhs)
    }
}

impl Mul<&CircleField> for f64 {
    type Output = CircleField;
    fn mul(self, rhs: &CircleField) -> CircleField {
        rhs.scale(self)
    }
}

/// Orientation-preserving circle map `f(θ) = θ + h(θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleDiffeo {
    h: CircleField,
    preserving: bool,
}

impl CircleDiffeo {
    /// Wraps a displacement, recording whether `1 + h' > 0` on a dense grid.
    pub fn new(h: CircleField) -> Self {
        let preserving = h.derivative(1).add_constant(1.0).samples(8 * (2 * h.bandlimit() + 1)).iter().all(|v| *v > 0.0);
        Self { h, preserving }
    }

    /// Like [`CircleDiffeo::new`] but rejects orientation-reversing or degenerate maps.
    pub fn try_new(h: CircleField) -> FieldResult<Self> {
        let d = Self::new(h);
        d.require_orientation()?;
        Ok(d)
    }

    pub fn identity(bandlimit: usize) -> Self {
        Self::new(CircleField::zeros(bandlimit))
    }

    pub fn rotation(a: f64, bandlimit: usize) -> Self {
        Self::new(CircleField::constant(a, bandlimit))
    }

    pub fn displacement(&self) -> &CircleField {
        &self.h
    }

    pub fn is_orientation_preserving(&self) -> bool {
        self.preserving
    }

    pub fn min_derivative(&self) -> f64 {
        let d = self.h.derivative(1).add_constant(1.0);
        d.samples(8 * (2 * self.h.bandlimit() + 1)).iter().fold(f64::INFINITY, |a, v| a.min(*v))
    }

    pub fn require_orientation(&self) -> FieldResult<()> {
        if self.preserving {
            Ok(())
        } else {
            Err(FieldError::Orientation(self.min_derivative()))
        }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        theta + self.h.eval(theta)
    }

    /// `f^(n)(θ)`; `n = 0` is the map itself.
    pub fn eval_derivative(&self, theta: f64, order: u32) -> f64 {
        match order {
            0 => self.eval(theta),
            1 => 1.0 + self.h.eval_derivative(theta, 1),
            n => self.h.eval_derivative(theta, n),
        }
    }

    /// `f'` as a field.
    pub fn jacobian(&self) -> CircleField {
        self.h.derivative(1).add_constant(1.0)
    }

    /// `(f(0), f'(0), f''(0), f'''(0))`.
    pub fn jet_at_zero(&self) -> [f64; 4] {
        [self.eval(0.0), self.eval_derivative(0.0, 1), self.eval_derivative(0.0, 2), self.eval_derivative(0.0, 3)]
    }

    /// Largest deviation of the `order`-jet at 0 from the identity jet.
    /// `order = 3` checks f, f', f''; `order = 4` adds f'''.
    pub fn diff0_defect(&self, order: usize) -> f64 {
        let target = [0.0, 1.0, 0.0, 0.0];
        self.jet_at_zero().iter().zip(target).take(order).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &CircleDiffeo, cfg: &FieldConfig) -> FieldResult<CircleDiffeo> {
        self.require_orientation()?;
        inner.require_orientation()?;
        let out = cfg.bandlimit.max(self.h.bandlimit()).max(inner.h.bandlimit());
        if inner.h.constant_value() == Some(0.0) {
            return CircleDiffeo::try_new(self.h.with_bandlimit(out));
        }
        let m = cfg.oversample.max(2) * (2 * (out + inner.h.bandlimit()) + 1);
        let hi = inner.h.samples(m);
        let values: Vec<f64> = (0..m).map(|j| hi[j] + self.h.eval(grid_point(j, m) + hi[j])).collect();
        let (h, residual) = CircleField::fit_grid(&values, out)?;
        check_residual(residual, cfg)?;
        CircleDiffeo::try_new(h)
    }

    /// Inverse map by Newton iteration at grid points.
    pub fn inverse(&self, cfg: &FieldConfig) -> FieldResult<CircleDiffeo> {
        self.require_orientation()?;
        let out = cfg.bandlimit.max(self.h.bandlimit());
        let m = cfg.grid_for(out);
        let mut values = Vec::with_capacity(m);
        for j in 0..m {
            let theta = grid_point(j, m);
            let mut y = theta - self.h.eval(theta);
            for _ in 0..100 {
                let r = y + self.h.eval(y) - theta;
                let d = 1.0 + self.h.eval_derivative(y, 1);
                let step = r / d;
                y -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            values.push(y - theta);
        }
        let (h, residual) = CircleField::fit_grid(&values, out)?;
        check_residual(residual, cfg)?;
        CircleDiffeo::try_new(h)
    }
}

/// Time-`t` flow of `dθ/dt = ξ(θ)`, integrated pointwise on the grid.
pub fn diffeo_flow(xi: &CircleField, t: f64, cfg: &FieldConfig) -> FieldResult<CircleDiffeo> {
    let out = cfg.bandlimit.max(xi.bandlimit());
    let m = cfg.grid_for(out);
    let theta0 = grid(m);
    let xi_d = xi.derivative(1);
    // State: positions followed by log f' (the variational equation), so a
    // fold of the map is detected during integration rather than after.
    let mut y0 = theta0.clone();
    y0.extend(std::iter::repeat(0.0).take(m));
    let sol = ode::integrate_guarded(
        |_, y, dy| {
            for j in 0..m {
                dy[j] = xi.eval(y[j]);
                dy[m + j] = xi_d.eval(y[j]);
            }
            if y[m..].iter().any(|v| !v.is_finite()) {
                return Err("non-finite Jacobian".into());
            }
            Ok(())
        },
        0.0,
        &y0,
        t,
        OdeOptions::tol(1e-13),
    )
    .map_err(|e| FieldError::Flow(e.to_string()))?;
    let values: Vec<f64> = (0..m).map(|j| sol.y_end[j] - theta0[j]).collect();
    let (h, residual) = CircleField::fit_grid(&values, out)?;
    check_residual(residual, cfg)?;
    let d = CircleDiffeo::new(h);
    d.require_orientation()?;
    Ok(d)
}

/// Jet of a field at `θ = 0`: values of the first `n` derivatives, starting at order 0.
pub fn jet_at_zero(f: &CircleField, n: u32) -> Vec<f64> {
    (0..n).map(|k| f.eval_derivative(0.0, k)).collect()
}

/// Whether ξ satisfies the Diff₀ generator conditions ξ(0) = ξ'(0) = ξ''(0) = 0.
pub fn satisfies_diff0_jets(xi: &CircleField) -> bool {
    jet_at_zero(xi, 3).iter().all(|v| v.abs() < JET_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_samples() {
        let f = CircleField::from_samples(&[1.0; 9], 4).unwrap();
        assert!((f.mean() - 1.0).abs() < 1e-15);
        assert!(f.modes()[1..].iter().all(|c| c.norm() < 1e-15));
    }

    #[test]
    fn cos_samples_33() {
        let v: Vec<f64> = grid(33).iter().map(|t| t.cos()).collect();
        let f = CircleField::from_samples_auto(&v).unwrap();
        assert_eq!(f.bandlimit(), 16);
        assert!((f.mode(1) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((f.mode(-1) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!(f.modes().iter().enumerate().filter(|(k, _)| *k != 1).all(|(_, c)| c.norm() < 1e-15));
    }

    #[test]
    fn nonfinite_rejected() {
        assert_eq!(CircleField::from_samples(&[1.0, f64::NAN, 0.0], 1), Err(FieldError::NonFinite(1)));
    }

    #[test]
    fn derivative_of_sin() {
        let s = CircleField::sin(1, 8);
        assert!((&s.derivative(1) - &CircleField::cos(1, 8)).sup_norm() < 1e-15);
        let s3 = CircleField::sin(3, 8).derivative(3);
        assert!((&s3 + &CircleField::cos(3, 8).scale(27.0)).sup_norm() < 1e-12);
        assert_eq!(CircleField::constant(2.0, 4).derivative(2).sup_norm(), 0.0);
    }

    #[test]
    fn mean_of_sin_squared() {
        let s = CircleField::sin(1, 4);
        assert!((s.mul(&s).mean() - 0.5).abs() < 1e-15);
        assert!(s.mean().abs() < 1e-15);
    }

    #[test]
    fn rotation_by_pi_negates_cos() {
        let cfg = FieldConfig::with_bandlimit(8);
        let c = CircleField::cos(1, 8);
        let r = c.compose(&CircleDiffeo::rotation(PI, 8), &cfg).unwrap();
        assert!((&r + &c).sup_norm() < 1e-12);
        let id = c.compose(&CircleDiffeo::identity(8), &cfg).unwrap();
        assert!((&id - &c).sup_norm() < 1e-14);
    }

    #[test]
    fn orientation_violation_reported() {
        let g = CircleDiffeo::new(CircleField::sin(1, 4).scale(1.5));
        assert!(!g.is_orientation_preserving());
        let err = CircleField::cos(1, 4).compose(&g, &FieldConfig::default()).unwrap_err();
        assert!(matches!(err, FieldError::Orientation(_)));
    }

    #[test]
    fn rigid_flow_and_identity_flow() {
        let cfg = FieldConfig::with_bandlimit(8);
        let r = diffeo_flow(&CircleField::constant(1.0, 8), 0.7, &cfg).unwrap();
        assert!((r.displacement() - &CircleField::constant(0.7, 8)).sup_norm() < 1e-11);
        let z = diffeo_flow(&CircleField::zeros(8), 0.7, &cfg).unwrap();
        assert!(z.displacement().sup_norm() < 1e-15);
    }

    #[test]
    fn record_round_trip() {
        let f = CircleField::harmonic(2, 0.3, -1.1, 5);
        let json = serde_json::to_string(&f).unwrap();
        let g: CircleField = serde_json::from_str(&json).unwrap();
        assert_eq!(f, g);
    }
}

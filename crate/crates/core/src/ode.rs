//! Adaptive Dormand-Prince 5(4) integrator for small dense systems.
//!
//! Steps are accepted under a mixed absolute/relative RMS norm. The solution
//! optionally records every accepted step so callers can post-process the
//! trajectory (monodromy product checks, reduced-dynamics CSV output).

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t:.6e}")]
    StepUnderflow { t: f64 },
    #[error("step budget of {max_steps} exhausted at t = {t:.6e}")]
    TooManySteps { max_steps: usize, t: f64 },
    #[error("non-finite state at t = {t:.6e}")]
    NonFinite { t: f64 },
    #[error("integration aborted at t = {t:.6e}: {reason}")]
    Aborted { t: f64, reason: String },
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Upper bound on |h|; zero means unbounded.
    pub hmax: f64,
    pub record: bool,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-14, max_steps: 2_000_000, hmax: 0.0, record: false }
    }
}

impl OdeOptions {
    pub fn tol(rtol: f64) -> Self {
        Self { rtol, atol: rtol * 1e-2, ..Self::default() }
    }

    pub fn recording(mut self) -> Self {
        self.record = true;
        self
    }

    pub fn with_hmax(mut self, hmax: f64) -> Self {
        self.hmax = hmax;
        self
    }
}

#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub y_end: Vec<f64>,
    pub accepted: usize,
    pub rejected: usize,
    /// Sum of accepted local error estimates in the scaled norm.
    pub error_estimate: f64,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
pub fn integrate<F>(mut f: F, t0: f64, y0: &[f64], t1: f64, opts: OdeOptions) -> Result<OdeSolution, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    integrate_guarded(|t, y, dy| {
        f(t, y, dy);
        Ok(())
    }, t0, y0, t1, opts)
}

/// Like [`integrate`], but the right-hand side may abort the run.
pub fn integrate_guarded<F>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t1: f64,
    opts: OdeOptions,
) -> Result<OdeSolution, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), String>,
{
    let n = y0.len();
    let mut sol = OdeSolution {
        t: Vec::new(),
        y: Vec::new(),
        y_end: y0.to_vec(),
        accepted: 0,
        rejected: 0,
        error_estimate: 0.0,
    };
    if opts.record {
        sol.t.push(t0);
        sol.y.push(y0.to_vec());
    }
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(sol);
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let call = |f: &mut F, t: f64, y: &[f64], out: &mut [f64]| -> Result<(), OdeError> {
        f(t, y, out).map_err(|reason| OdeError::Aborted { t, reason })
    };
    call(&mut f, t, &y, &mut k[0])?;

    let scale = |a: f64, b: f64| opts.atol + opts.rtol * a.abs().max(b.abs());
    // Initial step from the usual derivative-norm heuristic.
    let d0 = (y.iter().map(|v| (v / scale(*v, *v)).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d1 = (k[0].iter().zip(&y).map(|(d, v)| (d / scale(*v, *v)).powi(2)).sum::<f64>() / n as f64).sqrt();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(span.abs());
    if opts.hmax > 0.0 {
        h = h.min(opts.hmax);
    }
    h *= dir;

    let mut steps = 0usize;
    loop {
        if (t1 - t) * dir <= 0.0 {
            break;
        }
        if steps >= opts.max_steps {
            return Err(OdeError::TooManySteps { max_steps: opts.max_steps, t });
        }
        steps += 1;
        if (t + h - t1) * dir > 0.0 {
            h = t1 - t;
        }
        if h.abs() < 1e-14 * t.abs().max(1.0) {
            return Err(OdeError::StepUnderflow { t });
        }

        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k[0][i];
        }
        call(&mut f, t + C2 * h, &ytmp, &mut k[1])?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
        }
        call(&mut f, t + C3 * h, &ytmp, &mut k[2])?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
        }
        call(&mut f, t + C4 * h, &ytmp, &mut k[3])?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
        }
        call(&mut f, t + C5 * h, &ytmp, &mut k[4])?;
        for i in 0..n {
            ytmp[i] = y[i]
                + h * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
        }
        call(&mut f, t + h, &ytmp, &mut k[5])?;
        for i in 0..n {
            ynew[i] = y[i] + h * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
        }
        call(&mut f, t + h, &ynew, &mut k[6])?;

        let mut err = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            err += (e / scale(y[i], ynew[i])).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() {
            if ynew.iter().any(|v| !v.is_finite()) && h.abs() < 1e-10 {
                return Err(OdeError::NonFinite { t });
            }
            h *= 0.1;
            sol.rejected += 1;
            continue;
        }
        if err <= 1.0 {
            t += h;
            std::mem::swap(&mut y, &mut ynew);
            k.swap(0, 6);
            sol.accepted += 1;
            sol.error_estimate += err * opts.rtol;
            if opts.record {
                sol.t.push(t);
                sol.y.push(y.clone());
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            sol.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
        if opts.hmax > 0.0 && h.abs() > opts.hmax {
            h = opts.hmax * dir;
        }
    }
    sol.y_end = y;
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_period() {
        let sol = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            0.0,
            &[0.0, 1.0],
            2.0 * std::f64::consts::PI,
            OdeOptions::default(),
        )
        .unwrap();
        assert!(sol.y_end[0].abs() < 1e-10);
        assert!((sol.y_end[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn backward_exponential() {
        let sol = integrate(|_, y, dy| dy[0] = y[0], 1.0, &[1.0], 0.0, OdeOptions::default()).unwrap();
        assert!((sol.y_end[0] - (-1.0f64).exp()).abs() < 1e-12);
    }
}

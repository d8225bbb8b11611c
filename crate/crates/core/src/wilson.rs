//! Diff-Wilson loops: monodromies of the Hill operator and of `∇⁽³⁾`.
//!
//! Hill: `ψ'' + (u/2q) ψ = 0`, basis `φ₁ = (0, 1)`, `φ₂ = (1, 0)` in `(ψ, ψ')`,
//! monodromy rows `(φᵢ'(2π), φᵢ(2π))`.
//!
//! `∇⁽³⁾`: `q ψ''' + 2D ψ' + D' ψ = 0`, basis the unit vectors in
//! `(ψ, ψ', ψ'')`, monodromy rows `(φᵢ, φᵢ', φᵢ'')(2π)`.
//!
//! Products of Hill solutions for the potential `u = D` (same `q`) span the
//! `∇⁽³⁾` kernel: with `U = D/2q`, `y = f g` obeys `y''' + 4U y' + 2U' y = 0`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circlefield::{CircleDiffeo, CircleField, FieldConfig, FieldError};
use crate::ode::{self, OdeError, OdeOptions};
use crate::valgebra::{coadjoint_active, VirCoadjoint};

pub const TWO_PI: f64 = 2.0 * PI;
/// Tolerance for deciding that `ω` is an integer.
pub const INTEGER_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WilsonError {
    #[error("central charge q must be nonzero")]
    ZeroCharge,
    #[error("omega = 0 is degenerate; use the D = 0 monodromy instead")]
    DegenerateOmega,
    #[error(transparent)]
    Integrator(#[from] OdeError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("diffeomorphism violates the base-point jet conditions (defect {0:.3e})")]
    JetViolation(f64),
}

pub type WilsonResult<T> = Result<T, WilsonError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operator {
    Hill,
    Nabla3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monodromy {
    pub matrix: Vec<Vec<f64>>,
    pub order: usize,
    pub steps: usize,
    pub rtol: f64,
    pub error_estimate: f64,
}

impl Monodromy {
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.order, self.order, |i, j| self.matrix[i][j])
    }

    /// Determinant of the stored entries, evaluated exactly over the
    /// rationals. Hyperbolic monodromies have entries large enough that a
    /// floating-point LU loses more digits than the integration does.
    pub fn det(&self) -> f64 {
        let a: Option<Vec<Vec<BigRational>>> =
            self.matrix.iter().map(|r| r.iter().map(|v| BigRational::from_float(*v)).collect()).collect();
        let Some(a) = a else { return f64::NAN };
        let d = match self.order {
            2 => &a[0][0] * &a[1][1] - &a[0][1] * &a[1][0],
            3 => {
                &a[0][0] * (&a[1][1] * &a[2][2] - &a[1][2] * &a[2][1])
                    - &a[0][1] * (&a[1][0] * &a[2][2] - &a[1][2] * &a[2][0])
                    + &a[0][2] * (&a[1][0] * &a[2][1] - &a[1][1] * &a[2][0])
            }
            _ => return self.to_matrix().determinant(),
        };
        d.to_f64().unwrap_or(f64::NAN)
    }

    /// Largest entrywise difference.
    pub fn distance(&self, other: &Monodromy) -> f64 {
        (self.to_matrix() - other.to_matrix()).abs().max()
    }

    pub fn identity_defect(&self) -> f64 {
        (self.to_matrix() - DMatrix::identity(self.order, self.order)).abs().max()
    }

    fn from_rows(rows: Vec<Vec<f64>>, steps: usize, rtol: f64, error_estimate: f64) -> Self {
        let order = rows.len();
        Self { matrix: rows, order, steps, rtol, error_estimate }
    }
}

/// Integrator settings for monodromy runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilsonConfig {
    pub rtol: f64,
}

impl Default for WilsonConfig {
    fn default() -> Self {
        Self { rtol: 1e-10 }
    }
}

impl WilsonConfig {
    fn opts(&self) -> OdeOptions {
        OdeOptions::tol(self.rtol).with_hmax(0.1)
    }
}

pub fn monodromy(op: Operator, d: &CircleField, q: f64, cfg: &WilsonConfig) -> WilsonResult<Monodromy> {
    match op {
        Operator::Hill => monodromy_hill(d, q, cfg),
        Operator::Nabla3 => monodromy_nabla3(d, q, cfg),
    }
}

pub fn monodromy_hill(u: &CircleField, q: f64, cfg: &WilsonConfig) -> WilsonResult<Monodromy> {
    if q == 0.0 {
        return Err(WilsonError::ZeroCharge);
    }
    let k = 1.0 / (2.0 * q);
    let sol = ode::integrate(
        |t, y, dy| {
            let p = u.eval(t) * k;
            dy[0] = y[1];
            dy[1] = -p * y[0];
            dy[2] = y[3];
            dy[3] = -p * y[2];
        },
        0.0,
        &[0.0, 1.0, 1.0, 0.0],
        TWO_PI,
        cfg.opts(),
    )?;
    let y = &sol.y_end;
    Ok(Monodromy::from_rows(vec![vec![y[1], y[0]], vec![y[3], y[2]]], sol.accepted, cfg.rtol, sol.error_estimate))
}

fn nabla3_rhs<'a>(d: &'a CircleField, dp: &CircleField, q: f64) -> impl Fn(f64, &[f64], &mut [f64]) + 'a {
    let dp = dp.clone();
    move |t, y, dy| {
        let (dv, dpv) = (d.eval(t), dp.eval(t));
        for b in 0..y.len() / 3 {
            let s = &y[3 * b..3 * b + 3];
            dy[3 * b] = s[1];
            dy[3 * b + 1] = s[2];
            dy[3 * b + 2] = -(dpv * s[0] + 2.0 * dv * s[1]) / q;
        }
    }
}

pub fn monodromy_nabla3(d: &CircleField, q: f64, cfg: &WilsonConfig) -> WilsonResult<Monodromy> {
    if q == 0.0 {
        return Err(WilsonError::ZeroCharge);
    }
    let dp = d.derivative(1);
    let y0 = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let sol = ode::integrate(nabla3_rhs(d, &dp, q), 0.0, &y0, TWO_PI, cfg.opts())?;
    let rows = (0..3).map(|i| sol.y_end[3 * i..3 * i + 3].to_vec()).collect();
    Ok(Monodromy::from_rows(rows, sol.accepted, cfg.rtol, sol.error_estimate))
}

/// Closed-form `∇⁽³⁾` monodromy for a constant `D₀` with `ω = √(2D₀/q)`.
pub fn first_type_closed_form(omega: f64) -> WilsonResult<Monodromy> {
    if omega == 0.0 {
        return Err(WilsonError::DegenerateOmega);
    }
    let rows = if (omega - omega.round()).abs() < INTEGER_TOL {
        vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]
    } else {
        let (s, c) = (TWO_PI * omega).sin_cos();
        vec![
            vec![1.0, 0.0, 0.0],
            vec![s / omega, c, -omega * s],
            vec![(1.0 - c) / (omega * omega), s / omega, c],
        ]
    };
    Ok(Monodromy::from_rows(rows, 0, 0.0, 0.0))
}

/// Monodromy of `ψ''' = 0`: polynomial solutions `1, θ, θ²/2`.
pub fn free_monodromy() -> Monodromy {
    let t = TWO_PI;
    Monodromy::from_rows(vec![vec![1.0, 0.0, 0.0], vec![t, 1.0, 0.0], vec![t * t / 2.0, t, 1.0]], 0, 0.0, 0.0)
}

/// Outcome of comparing products of Hill solutions with `∇⁽³⁾` solutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductReport {
    /// Max difference between `fᵢfⱼ` and the `∇⁽³⁾` solution with the same 2-jet.
    pub trajectory: f64,
    /// Max of `|q y''' + 2D y' + D' y|` for `y = fᵢfⱼ`, using the Hill equation.
    pub algebraic: f64,
}

impl ProductReport {
    pub fn residual(&self) -> f64 {
        self.trajectory.max(self.algebraic)
    }
}

/// Integrates the Hill basis for potential `u = D` alongside the `∇⁽³⁾`
/// solutions seeded with the 2-jets of `f₁², f₁f₂, f₂²`.
pub fn hill_product_residual(d: &CircleField, q: f64, cfg: &WilsonConfig) -> WilsonResult<ProductReport> {
    if q == 0.0 {
        return Err(WilsonError::ZeroCharge);
    }
    let dp = d.derivative(1);
    let k = 1.0 / (2.0 * q);
    let n3 = nabla3_rhs(d, &dp, q);
    // Products of (f, f') pairs with f'' = -U f.
    let jet = |a: (f64, f64), b: (f64, f64), uu: f64| -> [f64; 3] {
        let (f, fp) = a;
        let (g, gp) = b;
        [f * g, fp * g + f * gp, -2.0 * uu * f * g + 2.0 * fp * gp]
    };
    let pairs = [(0usize, 0usize), (0, 1), (1, 1)];
    let u0 = d.eval(0.0) * k;
    let hill0 = [(0.0, 1.0), (1.0, 0.0)];
    let mut y0 = vec![0.0, 1.0, 1.0, 0.0];
    for (i, j) in pairs {
        y0.extend_from_slice(&jet(hill0[i], hill0[j], u0));
    }
    let sol = ode::integrate(
        |t, y, dy| {
            let p = d.eval(t) * k;
            dy[0] = y[1];
            dy[1] = -p * y[0];
            dy[2] = y[3];
            dy[3] = -p * y[2];
            n3(t, &y[4..], &mut dy[4..]);
        },
        0.0,
        &y0,
        TWO_PI,
        OdeOptions::tol(cfg.rtol.min(1e-12)).with_hmax(0.1).recording(),
    )?;
    let mut report = ProductReport { trajectory: 0.0, algebraic: 0.0 };
    for (t, y) in sol.t.iter().zip(&sol.y) {
        let (dv, dpv) = (d.eval(*t), dp.eval(*t));
        let uu = dv * k;
        let up = dpv * k;
        let h = [(y[0], y[1]), (y[2], y[3])];
        for (b, (i, j)) in pairs.iter().enumerate() {
            let ((f, fp), (g, gp)) = (h[*i], h[*j]);
            let p = jet(h[*i], h[*j], uu);
            for c in 0..3 {
                report.trajectory = report.trajectory.max((y[4 + 3 * b + c] - p[c]).abs());
            }
            // y''' from f''' = -U' f - U f'.
            let (f2, g2) = (-uu * f, -uu * g);
            let (f3, g3) = (-up * f - uu * fp, -up * g - uu * gp);
            let y3 = f3 * g + 3.0 * f2 * gp + 3.0 * fp * g2 + f * g3;
            let res = q * y3 + 2.0 * dv * p[1] + dpv * p[0];
            report.algebraic = report.algebraic.max(res.abs());
        }
    }
    Ok(report)
}

/// Result of transporting `D` by a base-point-fixing diffeomorphism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub residual: f64,
    /// Deviation of the relevant jet of `φ` at 0 from the identity jet.
    pub jet_defect: f64,
    pub admissible: bool,
    pub original: Monodromy,
    pub transformed: Monodromy,
}

/// Number of jet conditions at `θ = 0` each operator needs.
fn jet_order(op: Operator) -> usize {
    match op {
        Operator::Hill => 3,
        Operator::Nabla3 => 4,
    }
}

/// Computes `‖M[D^φ] − M[D]‖` with `D^φ = φ'² D∘φ + q Sφ` regardless of the
/// jet conditions; `admissible` records whether they hold.
pub fn diff0_invariance(
    op: Operator,
    d: &CircleField,
    q: f64,
    phi: &CircleDiffeo,
    field_cfg: &FieldConfig,
    cfg: &WilsonConfig,
) -> WilsonResult<InvarianceReport> {
    let jet_defect = phi.diff0_defect(jet_order(op));
    let transformed_d = coadjoint_active(&VirCoadjoint::new(d.clone(), q), phi, field_cfg)
        .map_err(|e| match e {
            crate::valgebra::AlgebraError::Field(f) => WilsonError::Field(f),
            other => WilsonError::Field(FieldError::Malformed(other.to_string())),
        })?
        .u;
    let original = monodromy(op, d, q, cfg)?;
    let transformed = monodromy(op, &transformed_d, q, cfg)?;
    Ok(InvarianceReport {
        residual: original.distance(&transformed),
        jet_defect,
        admissible: jet_defect < crate::circlefield::JET_TOL,
        original,
        transformed,
    })
}

/// Like [`diff0_invariance`], but rejects maps outside the base-point subgroup.
pub fn diff0_invariance_residual(
    op: Operator,
    d: &CircleField,
    q: f64,
    phi: &CircleDiffeo,
    field_cfg: &FieldConfig,
    cfg: &WilsonConfig,
) -> WilsonResult<f64> {
    let defect = phi.diff0_defect(jet_order(op));
    if defect >= crate::circlefield::JET_TOL {
        return Err(WilsonError::JetViolation(defect));
    }
    Ok(diff0_invariance(op, d, q, phi, field_cfg, cfg)?.residual)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrbitLabel {
    /// `ω = n ∈ ℤ∖{0}`: Diff S¹ / SL(2,ℝ)⁽ⁿ⁾.
    Exceptional { n: u64 },
    /// Non-integer real `ω`: Diff S¹ / S¹.
    Generic,
    /// `D₀ = 0`: the stabilizer contains every Möbius field.
    Degenerate,
    /// `2D₀/q < 0`: imaginary `ω`, stabilizer generated by `L₀`.
    Imaginary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitClass {
    pub omega_squared: f64,
    pub omega: Option<f64>,
    pub label: OrbitLabel,
    pub orbit: String,
    pub stabilizer: Vec<String>,
}

pub fn classify_orbit(d0: f64, q: f64) -> WilsonResult<OrbitClass> {
    if q == 0.0 {
        return Err(WilsonError::ZeroCharge);
    }
    let w2 = 2.0 * d0 / q;
    let omega = (w2 >= 0.0).then(|| w2.sqrt());
    let (label, orbit, stabilizer) = if d0 == 0.0 {
        (OrbitLabel::Degenerate, "Diff S1 / SL(2,R)".to_string(), vec!["L0".into(), "L1".into(), "L-1".into()])
    } else if let Some(w) = omega {
        let n = w.round();
        if (w - n).abs() < INTEGER_TOL && n >= 1.0 {
            let n = n as u64;
            (
                OrbitLabel::Exceptional { n },
                format!("Diff S1 / SL(2,R)^({n})"),
                vec!["L0".into(), format!("L{n}"), format!("L-{n}")],
            )
        } else {
            (OrbitLabel::Generic, "Diff S1 / S1".to_string(), vec!["L0".into()])
        }
    } else {
        (OrbitLabel::Imaginary, "Diff S1 / S1".to_string(), vec!["L0".into()])
    };
    Ok(OrbitClass { omega_squared: w2, omega, label, orbit, stabilizer })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfields as tf;

    fn close(a: &Monodromy, rows: &[[f64; 3]], tol: f64) {
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                assert!((a.matrix[i][j] - v).abs() < tol, "entry ({i},{j}): {} vs {v}", a.matrix[i][j]);
            }
        }
    }

    #[test]
    fn hill_constant_potentials() {
        let c = WilsonConfig::default();
        let m = monodromy_hill(&CircleField::zeros(2), 1.0, &c).unwrap();
        assert!((m.matrix[0][0] - 1.0).abs() < 1e-10 && (m.matrix[0][1] - TWO_PI).abs() < 1e-9);
        assert!(m.matrix[1][0].abs() < 1e-10 && (m.matrix[1][1] - 1.0).abs() < 1e-10);
        // u/2q = 1/4.
        let m = monodromy_hill(&CircleField::constant(0.5, 2), 1.0, &c).unwrap();
        assert!((m.to_matrix() + DMatrix::identity(2, 2)).abs().max() < 1e-8);
        let m = monodromy_hill(&CircleField::constant(2.0, 2), 1.0, &c).unwrap();
        assert!(m.identity_defect() < 1e-8);
    }

    #[test]
    fn nabla3_examples() {
        let c = WilsonConfig::default();
        let m = monodromy_nabla3(&CircleField::constant(0.125, 2), 1.0, &c).unwrap();
        close(&m, &[[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [8.0, 0.0, -1.0]], 1e-7);
        let m = monodromy_nabla3(&CircleField::zeros(2), 1.0, &c).unwrap();
        assert!(m.distance(&free_monodromy()) < 1e-8);
        let m = monodromy_nabla3(&CircleField::constant(0.5, 2), 1.0, &c).unwrap();
        assert!(m.identity_defect() < 1e-7);
    }

    #[test]
    fn closed_form_matches_ode() {
        let c = WilsonConfig::default();
        for w in [0.3, 0.5, 1.7] {
            let q = 1.3;
            let d0 = w * w * q / 2.0;
            let m = monodromy_nabla3(&CircleField::constant(d0, 2), q, &c).unwrap();
            assert!(m.distance(&first_type_closed_form(w).unwrap()) < 1e-7);
        }
        assert!(first_type_closed_form(2.0).unwrap().identity_defect() == 0.0);
        assert!(first_type_closed_form(0.0).is_err());
    }

    #[test]
    fn products_solve_nabla3() {
        let mut r = tf::rng(17);
        let d = tf::random_field(&mut r, 4, 0.6, 8);
        let rep = hill_product_residual(&d, 0.8, &WilsonConfig::default()).unwrap();
        assert!(rep.residual() < 1e-8, "{rep:?}");
    }

    #[test]
    fn invariance_and_negative_control() {
        let fc = FieldConfig::default();
        let c = WilsonConfig::default();
        let d = CircleField::constant(0.3, 4);
        let mut r = tf::rng(19);
        let phi = tf::random_diff0(&mut r, 3, 0.3, 16);
        let res = diff0_invariance_residual(Operator::Nabla3, &d, 1.0, &phi, &fc, &c).unwrap();
        assert!(res < 1e-6, "{res}");
        let bad = tf::second_jet_violator(0.3, 4);
        assert!(matches!(
            diff0_invariance_residual(Operator::Nabla3, &d, 1.0, &bad, &fc, &c),
            Err(WilsonError::JetViolation(_))
        ));
        let rep = diff0_invariance(Operator::Nabla3, &d, 1.0, &bad, &fc, &c).unwrap();
        assert!(!rep.admissible && rep.residual > 1e-3, "{}", rep.residual);
        let id = diff0_invariance_residual(Operator::Hill, &d, 1.0, &CircleDiffeo::identity(4), &fc, &c).unwrap();
        assert_eq!(id, 0.0);
    }

    #[test]
    fn orbit_labels() {
        assert_eq!(classify_orbit(2.0, 1.0).unwrap().label, OrbitLabel::Exceptional { n: 2 });
        assert_eq!(classify_orbit(1.125, 1.0).unwrap().label, OrbitLabel::Generic);
        assert_eq!(classify_orbit(0.0, 1.0).unwrap().label, OrbitLabel::Degenerate);
        assert_eq!(classify_orbit(-1.0, 1.0).unwrap().label, OrbitLabel::Imaginary);
        assert!(classify_orbit(1.0, 0.0).is_err());
    }
}

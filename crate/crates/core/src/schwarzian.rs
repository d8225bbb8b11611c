//! Schwarzian derivative on the circle and on intervals.
//!
//! `Sf = f'''/f' − (3/2)(f''/f')²`. Circle maps are handled spectrally
//! through their periodic displacement. Non-periodic maps (Möbius maps, `tan`)
//! go through [`ChebMap`], a Chebyshev interpolant on Lobatto points.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::circlefield::{check_residual, CircleDiffeo, CircleField, FieldConfig, FieldError, FieldResult};
use crate::valgebra::VirCoadjoint;

/// Minimum admissible `|f'|` before division.
pub const MIN_DERIVATIVE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub identity: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl IdentityCheck {
    pub fn new(identity: &str, residual: f64, tolerance: f64) -> Self {
        Self { identity: identity.to_string(), residual, tolerance, pass: residual.is_finite() && residual <= tolerance }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchwarzianReport {
    pub value: CircleField,
    /// Keys drawn from `composition`, `inverse`, `kernel`, `infinitesimal`.
    pub residuals: BTreeMap<String, f64>,
}

fn schwarzian_raw(f: &CircleDiffeo, cfg: &FieldConfig) -> FieldResult<(CircleField, f64)> {
    let h = f.displacement();
    let out = cfg.bandlimit.max(2 * h.effective_bandlimit());
    let m = cfg.grid_for(out);
    let d1 = h.derivative(1).samples(m);
    let d2 = h.derivative(2).samples(m);
    let d3 = h.derivative(3).samples(m);
    let mut values = Vec::with_capacity(m);
    for j in 0..m {
        let fp = 1.0 + d1[j];
        if fp.abs() < MIN_DERIVATIVE {
            return Err(FieldError::NearZeroDivisor(fp.abs()));
        }
        let r = d2[j] / fp;
        values.push(d3[j] / fp - 1.5 * r * r);
    }
    CircleField::fit_grid(&values, out)
}

/// Spectral Schwarzian of a circle diffeomorphism.
pub fn schwarzian(f: &CircleDiffeo, cfg: &FieldConfig) -> FieldResult<CircleField> {
    f.require_orientation()?;
    let (s, res) = schwarzian_raw(f, cfg)?;
    check_residual(res, cfg)?;
    Ok(s)
}

/// Schwarzian together with the standard identity residuals for `f`.
pub fn schwarzian_report(f: &CircleDiffeo, cfg: &FieldConfig) -> FieldResult<SchwarzianReport> {
    let value = schwarzian(f, cfg)?;
    let mut residuals = BTreeMap::new();
    residuals.insert("composition".into(), composition_residual(f, f, cfg)?);
    residuals.insert("inverse".into(), inverse_residual(f, cfg)?);
    let rot = CircleDiffeo::rotation(0.7, f.displacement().bandlimit());
    let rf = rot.compose(f, cfg)?;
    residuals.insert("kernel".into(), (&schwarzian(&rf, cfg)? - &value).sup_norm());
    let eta = f.displacement().add_constant(-f.displacement().mean());
    let eps = 1e-6;
    let inf = infinitesimal_schwarzian(&eta, eps, cfg)?;
    residuals.insert("infinitesimal".into(), (&inf + &eta.derivative(3)).sup_norm());
    Ok(SchwarzianReport { value, residuals })
}

/// `‖S(g∘f) − (f')² (Sg)∘f − Sf‖_∞`.
pub fn composition_residual(g: &CircleDiffeo, f: &CircleDiffeo, cfg: &FieldConfig) -> FieldResult<f64> {
    let gf = g.compose(f, cfg)?;
    let lhs = schwarzian(&gf, cfg)?;
    let sg = schwarzian(g, cfg)?.compose(f, cfg)?;
    let jac = f.jacobian();
    let rhs = &jac.mul(&jac).mul(&sg) + &schwarzian(f, cfg)?;
    Ok((&lhs - &rhs).sup_norm())
}

/// `‖S(f⁻¹) + ((f⁻¹)')² (Sf)∘f⁻¹‖_∞`.
pub fn inverse_residual(f: &CircleDiffeo, cfg: &FieldConfig) -> FieldResult<f64> {
    let finv = f.inverse(cfg)?;
    let lhs = schwarzian(&finv, cfg)?;
    let jac = finv.jacobian();
    let rhs = jac.mul(&jac).mul(&schwarzian(f, cfg)?.compose(&finv, cfg)?);
    Ok((&lhs + &rhs).sup_norm())
}

/// `S(θ − εη)/ε`, which tends to `−η'''` as `ε → 0`.
pub fn infinitesimal_schwarzian(eta: &CircleField, eps: f64, cfg: &FieldConfig) -> FieldResult<CircleField> {
    let f = CircleDiffeo::try_new(eta.scale(-eps))?;
    Ok(schwarzian(&f, cfg)?.scale(1.0 / eps))
}

/// Stepwise Schwarzian of `f₁ ∘ f₂ ∘ … ∘ fₙ` via the cocycle rule, with the
/// direct evaluation for comparison. Returns `(chain, direct)`.
pub fn schwarzian_chain(maps: &[CircleDiffeo], cfg: &FieldConfig) -> FieldResult<(CircleField, CircleField)> {
    let Some((first, rest)) = maps.split_first() else {
        return Ok((CircleField::zeros(0), CircleField::zeros(0)));
    };
    let mut acc = schwarzian(first, cfg)?;
    let mut total = first.clone();
    for f in rest {
        let jac = f.jacobian();
        let (next, res) = (&jac.mul(&jac).mul(&acc.compose(f, cfg)?) + &schwarzian(f, cfg)?).truncate(cfg.bandlimit);
        check_residual(res, cfg)?;
        acc = next;
        total = total.compose(f, cfg)?;
    }
    Ok((acc, schwarzian(&total, cfg)?))
}

/// `Σ = Γ' − Γ²/2`.
pub fn sigma_field(gamma: &CircleField) -> CircleField {
    &gamma.derivative(1) - &gamma.mul(gamma).scale(0.5)
}

/// `(Γ' − Γ²/2, 1)`: a coadjoint element of unit charge.
pub fn sigma_from_gamma(gamma: &CircleField) -> VirCoadjoint {
    VirCoadjoint::new(sigma_field(gamma), 1.0)
}

/// `Σ_k = Γ' + kΓ²`; only `k = −1/2` transforms as a coadjoint element.
pub fn sigma_k(gamma: &CircleField, k: f64) -> CircleField {
    &gamma.derivative(1) + &gamma.mul(gamma).scale(k)
}

/// Connection variation `δΓ = ξΓ' + Γξ' + ξ''`.
pub fn connection_variation(gamma: &CircleField, xi: &CircleField) -> CircleField {
    &(&xi.mul(&gamma.derivative(1)) + &gamma.mul(&xi.derivative(1))) + &xi.derivative(2)
}

/// `δΣ_k − (ξΣ_k' + 2ξ'Σ_k + ξ''')`. Equals `(1+2k) Γ ξ''` identically.
pub fn sigma_variation_defect(gamma: &CircleField, xi: &CircleField, k: f64) -> CircleField {
    let dg = connection_variation(gamma, xi);
    let dsigma = &dg.derivative(1) + &gamma.mul(&dg).scale(2.0 * k);
    let s = sigma_k(gamma, k);
    let coad = &(&xi.mul(&s.derivative(1)) + &xi.derivative(1).mul(&s).scale(2.0)) + &xi.derivative(3);
    &dsigma - &coad
}

/// The three evaluations of `2(𝒟∘x)x'²` used to cross-check the relation
/// between projective geodesic data and coadjoint elements.
#[derive(Debug, Clone, PartialEq)]
pub struct TwRoutes {
    /// `−2(Λ' + Λ²)` with `Λ = −x''/(2x') − x'(Γ∘x)/2`.
    pub riccati: CircleField,
    /// `x'² Σ∘x + Sx`.
    pub coadjoint: CircleField,
    /// `x'² [(Γ∘x)'/x' − (Γ∘x)²/2] + Sx`.
    pub pulled_back: CircleField,
}

impl TwRoutes {
    pub fn residual(&self) -> f64 {
        let a = (&self.riccati - &self.coadjoint).sup_norm();
        let b = (&self.riccati - &self.pulled_back).sup_norm();
        let c = (&self.coadjoint - &self.pulled_back).sup_norm();
        a.max(b).max(c)
    }
}

pub fn tw_routes(x: &CircleDiffeo, gamma: &CircleField, cfg: &FieldConfig) -> FieldResult<TwRoutes> {
    x.require_orientation()?;
    let jac = x.jacobian();
    let jac2 = jac.mul(&jac);
    let sx = schwarzian(x, cfg)?;
    let g_x = gamma.compose(x, cfg)?;

    let lambda = &x.displacement().derivative(2).div(&jac, cfg)?.scale(-0.5) - &jac.mul(&g_x).scale(0.5);
    let riccati = (&lambda.derivative(1) + &lambda.mul(&lambda)).scale(-2.0);

    let sigma_x = sigma_field(gamma).compose(x, cfg)?;
    let coadjoint = &jac2.mul(&sigma_x) + &sx;

    let dgx = g_x.derivative(1).div(&jac, cfg)?;
    let pulled_back = &jac2.mul(&(&dgx - &g_x.mul(&g_x).scale(0.5))) + &sx;
    Ok(TwRoutes { riccati, coadjoint, pulled_back })
}

/// Largest disagreement between the three routes to `2(𝒟∘x)x'²`.
pub fn tw_projective_residual(x: &CircleDiffeo, gamma: &CircleField, cfg: &FieldConfig) -> FieldResult<f64> {
    Ok(tw_routes(x, gamma, cfg)?.residual())
}

/// Relative coefficient size below which the Chebyshev tail is treated as
/// roundoff. Noise in kept coefficients is amplified by `k³` in `f'''`.
const CHOP: f64 = 1e-16;

/// Fraction of the half-width added on each side before fitting, so that
/// derivatives are only evaluated away from the Chebyshev endpoints.
const PAD: f64 = 0.25;

/// Chebyshev interpolant of a smooth map on `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebMap {
    pub a: f64,
    pub b: f64,
    coeffs: Vec<f64>,
}

impl ChebMap {
    /// Adaptive fit: doubles the degree until the tail is below roundoff.
    pub fn fit<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> FieldResult<Self> {
        let mut n = 16usize;
        loop {
            let c = Self::coefficients(&f, a, b, n)?;
            let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
            let tail = c[n - 3..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if tail <= 1e-15 * scale || n >= 2048 {
                let mut coeffs = c;
                while coeffs.len() > 1 && coeffs.last().is_some_and(|v| v.abs() <= CHOP * scale) {
                    coeffs.pop();
                }
                return Ok(Self { a, b, coeffs });
            }
            n *= 2;
        }
    }

    /// Fit on `[a, b]` widened by [`PAD`] on both sides.
    pub fn fit_padded<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> FieldResult<Self> {
        let w = PAD * 0.5 * (b - a);
        Self::fit(f, a - w, b + w)
    }

    fn coefficients<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> FieldResult<Vec<f64>> {
        let pi = std::f64::consts::PI;
        let vals: Vec<f64> = (0..=n)
            .map(|j| {
                let x = (pi * j as f64 / n as f64).cos();
                f(0.5 * (a + b) + 0.5 * (b - a) * x)
            })
            .collect();
        if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite(i));
        }
        let mut c = vec![0.0; n + 1];
        for (k, ck) in c.iter_mut().enumerate() {
            let mut s = 0.0;
            for (j, v) in vals.iter().enumerate() {
                let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                s += w * v * (pi * ((j * k) % (2 * n)) as f64 / n as f64).cos();
            }
            *ck = 2.0 * s / n as f64;
        }
        c[0] *= 0.5;
        c[n] *= 0.5;
        Ok(c)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn derivative(&self) -> Self {
        let n = self.coeffs.len();
        if n == 1 {
            return Self { a: self.a, b: self.b, coeffs: vec![0.0] };
        }
        let mut d = vec![0.0; n + 1];
        for k in (1..n).rev() {
            d[k - 1] = d[k + 1] + 2.0 * k as f64 * self.coeffs[k];
        }
        d[0] *= 0.5;
        d.truncate(n - 1);
        let s = 2.0 / (self.b - self.a);
        Self { a: self.a, b: self.b, coeffs: d.into_iter().map(|v| v * s).collect() }
    }

    /// Clenshaw evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        let t = (2.0 * x - self.a - self.b) / (self.b - self.a);
        let (mut b1, mut b2) = (0.0, 0.0);
        for c in self.coeffs.iter().skip(1).rev() {
            let b0 = c + 2.0 * t * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs[0] + t * b1 - b2
    }
}

/// Schwarzian of a non-periodic map sampled at `points` points on `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSchwarzian {
    pub x: Vec<f64>,
    pub value: Vec<f64>,
}

pub fn schwarzian_interval<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, points: usize) -> FieldResult<IntervalSchwarzian> {
    let c = ChebMap::fit_padded(f, a, b)?;
    let d1 = c.derivative();
    let d2 = d1.derivative();
    let d3 = d2.derivative();
    let mut x = Vec::with_capacity(points);
    let mut value = Vec::with_capacity(points);
    for j in 0..points {
        let t = a + (b - a) * j as f64 / (points.max(2) - 1) as f64;
        let fp = d1.eval(t);
        if fp.abs() < MIN_DERIVATIVE {
            return Err(FieldError::NearZeroDivisor(fp.abs()));
        }
        let r = d2.eval(t) / fp;
        x.push(t);
        value.push(d3.eval(t) / fp - 1.5 * r * r);
    }
    Ok(IntervalSchwarzian { x, value })
}

/// Interval version of the composition identity, `S(g∘f) − (f')²(Sg)∘f − Sf`,
/// where `f` maps `[a, b]` into the domain `[ga, gb]` of `g`.
pub fn composition_residual_interval<G, F>(g: G, f: F, a: f64, b: f64, ga: f64, gb: f64) -> FieldResult<f64>
where
    G: Fn(f64) -> f64,
    F: Fn(f64) -> f64,
{
    let n = 64;
    let gf = schwarzian_interval(|x| g(f(x)), a, b, n)?;
    let sf = schwarzian_interval(&f, a, b, n)?;
    let gc = ChebMap::fit_padded(&g, ga, gb)?;
    let (g1, g2, g3) = {
        let d1 = gc.derivative();
        let d2 = d1.derivative();
        let d3 = d2.derivative();
        (d1, d2, d3)
    };
    let fc = ChebMap::fit_padded(&f, a, b)?;
    let f1 = fc.derivative();
    let mut worst = 0.0f64;
    for j in 0..n {
        let x = gf.x[j];
        let y = f(x);
        let gp = g1.eval(y);
        let sg = g3.eval(y) / gp - 1.5 * (g2.eval(y) / gp).powi(2);
        let fp = f1.eval(x);
        worst = worst.max((gf.value[j] - fp * fp * sg - sf.value[j]).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfields as tf;

    #[test]
    fn rotation_has_zero_schwarzian() {
        let cfg = FieldConfig::with_bandlimit(8);
        let s = schwarzian(&CircleDiffeo::rotation(1.3, 8), &cfg).unwrap();
        assert!(s.sup_norm() == 0.0);
    }

    #[test]
    fn tan_is_two() {
        let s = schwarzian_interval(f64::tan, -0.6, 0.6, 41).unwrap();
        for v in s.value {
            assert!((v - 2.0).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn mobius_kernel() {
        let s = schwarzian_interval(|x| (2.0 * x + 1.0) / (0.5 * x + 3.0), -1.0, 1.0, 33).unwrap();
        assert!(s.value.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn projective_invariance_interval() {
        let r = composition_residual_interval(
            |y| (y + 2.0) / (0.3 * y + 1.5),
            |x| x + 0.2 * x.powi(3),
            -1.0,
            1.0,
            -1.5,
            1.5,
        )
        .unwrap();
        assert!(r < 1e-9, "{r}");
    }

    #[test]
    fn composition_and_inverse_identities() {
        let cfg = FieldConfig::default();
        let mut r = tf::rng(7);
        let f = tf::random_diffeo(&mut r, 4, 0.3, 16);
        let g = tf::random_diffeo(&mut r, 4, 0.3, 16);
        assert!(composition_residual(&g, &f, &cfg).unwrap() < 1e-8);
        assert!(inverse_residual(&f, &cfg).unwrap() < 1e-8);
        let id = CircleDiffeo::identity(16);
        assert_eq!(composition_residual(&g, &id, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn infinitesimal_limit() {
        let cfg = FieldConfig::with_bandlimit(16);
        let eta = CircleField::sin(1, 16);
        let s = infinitesimal_schwarzian(&eta, 1e-4, &cfg).unwrap();
        assert!((&s - &CircleField::cos(1, 16)).sup_norm() < 1e-3);
        let eta2 = CircleField::sin(2, 16);
        let e1 = (&infinitesimal_schwarzian(&eta2, 1e-3, &cfg).unwrap() + &eta2.derivative(3)).sup_norm();
        let e2 = (&infinitesimal_schwarzian(&eta2, 5e-4, &cfg).unwrap() + &eta2.derivative(3)).sup_norm();
        assert!((e1 / e2 - 2.0).abs() < 0.05, "{}", e1 / e2);
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma_field(&CircleField::zeros(4)).sup_norm(), 0.0);
        let s = sigma_field(&CircleField::constant(0.6, 4));
        assert!((&s - &CircleField::constant(-0.18, 0)).sup_norm() < 1e-15);
    }

    #[test]
    fn sigma_k_defect() {
        let g = CircleField::harmonic(1, 0.3, -0.2, 8).add_constant(0.1);
        let xi = CircleField::harmonic(2, 0.5, 0.4, 8);
        assert!(sigma_variation_defect(&g, &xi, -0.5).sup_norm() < 1e-13);
        let d = sigma_variation_defect(&g, &xi, 1.0);
        let want = g.mul(&xi.derivative(2)).scale(3.0);
        assert!((&d - &want).sup_norm() < 1e-12);
    }

    #[test]
    fn tw_identity_and_geodetic() {
        let cfg = FieldConfig::default();
        let mut r = tf::rng(11);
        let x = tf::random_diffeo(&mut r, 3, 0.3, 16);
        let gamma = tf::random_field(&mut r, 3, 0.5, 16);
        let routes = tw_routes(&x, &gamma, &cfg).unwrap();
        assert!(routes.residual() < 1e-8);
        let flat = tw_routes(&x, &CircleField::zeros(4), &cfg).unwrap();
        let sx = schwarzian(&x, &cfg).unwrap();
        assert!((&flat.riccati - &sx).sup_norm() < 1e-9);
        let id = tw_routes(&CircleDiffeo::identity(4), &gamma, &cfg).unwrap();
        assert!((&id.riccati - &sigma_field(&gamma)).sup_norm() < 1e-12);
    }

    #[test]
    fn chain_matches_direct() {
        let cfg = FieldConfig::default();
        let mut r = tf::rng(13);
        let maps: Vec<_> = (0..3).map(|_| tf::random_diffeo(&mut r, 3, 0.25, 16)).collect();
        let (chain, direct) = schwarzian_chain(&maps, &cfg).unwrap();
        assert!((&chain - &direct).sup_norm() < 1e-8);
    }
}

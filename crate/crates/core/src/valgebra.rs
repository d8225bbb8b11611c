//! Virasoro, Kac-Moody and semidirect-product algebra on circle fields.
//!
//! Conventions (all integrals are means `∫ dθ/2π`):
//! * pairing `⟨(u,b)|(ξ,a)⟩ = b a + ∫ u ξ`;
//! * Gelfand-Fuchs cocycle `c(ξ,η) = ∫ ξ' η''`;
//! * bracket `[(ξ,a),(η,a')] = (ξη' − ξ'η, −c(ξ,η) − κ ∫ ξ'η)` with linear
//!   center `κ` (zero by default);
//! * infinitesimal coadjoint `ad*_ξ (u,b) = (ξu' + 2ξ'u + b ξ''' + bκ ξ', b)`,
//!   which makes `⟨ad*_v b|w⟩ + ⟨b|[v,w]⟩ = 0` hold identically;
//! * active coadjoint `u ↦ (F')² u∘F + b SF`; passive is its inverse.
//!
//! Kac-Moody fields carry components in a basis with structure constants
//! `f_abc`; traces use the bilinear form `δ_ab`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circlefield::{check_residual, grid_point, CircleDiffeo, CircleField, FieldConfig, FieldError};
use crate::schwarzian;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("representation dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("structure constants fail the Jacobi identity (residual {0:.3e})")]
    Jacobi(f64),
    #[error("unknown structure {0:?}")]
    UnknownStructure(String),
}

pub type AlgebraResult<T> = Result<T, AlgebraError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirAdjoint {
    pub xi: CircleField,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirCoadjoint {
    pub u: CircleField,
    #[serde(rename = "charge")]
    pub b: f64,
}

impl VirAdjoint {
    pub fn field(xi: CircleField) -> Self {
        Self { xi, a: 0.0 }
    }
}

impl VirCoadjoint {
    pub fn new(u: CircleField, b: f64) -> Self {
        Self { u, b }
    }
}

/// Virasoro algebra with an optional linear center `κ`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Virasoro {
    pub linear_center: f64,
}

/// Gelfand-Fuchs cocycle `∫ dθ/2π ξ' η''`.
/// Evaluated in antisymmetrized form so that `c(ξ,ξ) = 0` holds exactly.
pub fn gf_cocycle(xi: &CircleField, eta: &CircleField) -> f64 {
    0.5 * (mean_product(&xi.derivative(1), &eta.derivative(2)) - mean_product(&eta.derivative(1), &xi.derivative(2)))
}

/// Covariant cocycle `c_Γ = c + ⟨Γ' − Γ²/2 | ξη' − ξ'η⟩`.
pub fn gf_cocycle_covariant(xi: &CircleField, eta: &CircleField, gamma: Option<&CircleField>) -> f64 {
    let c = gf_cocycle(xi, eta);
    match gamma {
        None => c,
        Some(g) => {
            let sigma = schwarzian::sigma_field(g);
            c + mean_product(&sigma, &bracket_field(xi, eta))
        }
    }
}

/// `∫ dθ/2π f g`, exact from the modes.
pub fn mean_product(f: &CircleField, g: &CircleField) -> f64 {
    let n = f.bandlimit().min(g.bandlimit());
    let fm = f.modes();
    let gm = g.modes();
    let mut s = fm[0].re * gm[0].re;
    for k in 1..=n {
        s += 2.0 * (fm[k] * gm[k].conj()).re;
    }
    s
}

/// Field part of the bracket, `ξη' − ξ'η`.
pub fn bracket_field(xi: &CircleField, eta: &CircleField) -> CircleField {
    &xi.mul(&eta.derivative(1)) - &xi.derivative(1).mul(eta)
}

impl Virasoro {
    pub fn bracket(&self, x: &VirAdjoint, y: &VirAdjoint) -> VirAdjoint {
        let mut a = -gf_cocycle(&x.xi, &y.xi);
        if self.linear_center != 0.0 {
            a -= self.linear_center * mean_product(&x.xi.derivative(1), &y.xi);
        }
        VirAdjoint { xi: bracket_field(&x.xi, &y.xi), a }
    }

    /// `ad*_ξ (u,b)`: returns the variation of `u` with the charge unchanged.
    pub fn coadjoint_infinitesimal(&self, b: &VirCoadjoint, x: &VirAdjoint) -> VirCoadjoint {
        let xi = &x.xi;
        let mut du = &(&xi.mul(&b.u.derivative(1)) + &xi.derivative(1).mul(&b.u).scale(2.0))
            + &xi.derivative(3).scale(b.b);
        if self.linear_center != 0.0 {
            du = &du + &xi.derivative(1).scale(b.b * self.linear_center);
        }
        VirCoadjoint { u: du, b: b.b }
    }

    pub fn kirillov_form(&self, b: &VirCoadjoint, x: &VirAdjoint, y: &VirAdjoint) -> f64 {
        pairing(b, &self.bracket(x, y))
    }
}

pub fn vir_bracket(x: &VirAdjoint, y: &VirAdjoint) -> VirAdjoint {
    Virasoro::default().bracket(x, y)
}

pub fn pairing(b: &VirCoadjoint, x: &VirAdjoint) -> f64 {
    b.b * x.a + mean_product(&b.u, &x.xi)
}

pub fn kirillov_form(b: &VirCoadjoint, x: &VirAdjoint, y: &VirAdjoint) -> f64 {
    Virasoro::default().kirillov_form(b, x, y)
}

/// `∇⁽³⁾_u ξ = q ξ''' + 2u ξ' + u' ξ`.
pub fn nabla3(u: &CircleField, q: f64, xi: &CircleField) -> CircleField {
    &(&xi.derivative(3).scale(q) + &u.mul(&xi.derivative(1)).scale(2.0)) + &u.derivative(1).mul(xi)
}

/// Finite and infinitesimal coadjoint modes.
#[derive(Debug, Clone)]
pub enum CoadjointAction<'a> {
    FinitePassive(&'a CircleDiffeo),
    FiniteActive(&'a CircleDiffeo),
    Infinitesimal(&'a VirAdjoint),
}

pub fn vir_coadjoint(b: &VirCoadjoint, g: CoadjointAction<'_>, cfg: &FieldConfig) -> AlgebraResult<VirCoadjoint> {
    match g {
        CoadjointAction::Infinitesimal(x) => Ok(Virasoro::default().coadjoint_infinitesimal(b, x)),
        CoadjointAction::FiniteActive(f) => coadjoint_active(b, f, cfg),
        CoadjointAction::FinitePassive(f) => coadjoint_passive(b, f, cfg),
    }
}

/// `u_F = (F')² u∘F + b SF`.
pub fn coadjoint_active(b: &VirCoadjoint, f: &CircleDiffeo, cfg: &FieldConfig) -> AlgebraResult<VirCoadjoint> {
    f.require_orientation()?;
    let uf = b.u.compose(f, cfg)?;
    let jac = f.jacobian();
    let s = schwarzian::schwarzian(f, cfg)?;
    let (u, res) = (&jac.mul(&jac).mul(&uf) + &s.scale(b.b)).truncate(cfg.bandlimit.max(b.u.bandlimit()));
    check_residual(res, cfg)?;
    Ok(VirCoadjoint { u, b: b.b })
}

/// `u_F(F(θ)) = (F'(θ))⁻² (u(θ) − b SF(θ))`, the inverse of the active map.
pub fn coadjoint_passive(b: &VirCoadjoint, f: &CircleDiffeo, cfg: &FieldConfig) -> AlgebraResult<VirCoadjoint> {
    f.require_orientation()?;
    let s = schwarzian::schwarzian(f, cfg)?;
    let jac = f.jacobian();
    let num = &b.u - &s.scale(b.b);
    let pulled = num.div(&jac.mul(&jac), cfg)?;
    let finv = f.inverse(cfg)?;
    let u = pulled.compose(&finv, cfg)?;
    Ok(VirCoadjoint { u, b: b.b })
}

/// Adjoint action dual to [`coadjoint_active`]: `ξ_F = ξ∘F / F'`,
/// `a_F = a − ∫ SF ξ_F`, so that the pairing is invariant.
pub fn adjoint_action(x: &VirAdjoint, f: &CircleDiffeo, cfg: &FieldConfig) -> AlgebraResult<VirAdjoint> {
    f.require_orientation()?;
    let xi = x.xi.compose(f, cfg)?.div(&f.jacobian(), cfg)?;
    let s = schwarzian::schwarzian(f, cfg)?;
    let a = x.a - mean_product(&s, &xi);
    Ok(VirAdjoint { xi, a })
}

/// Mode realization `L_m = i e^{imθ} d/dθ` of the bracket. Returns the
/// coefficient of `L_{m+n}` and the central term normalized so that a
/// central charge `c` contributes `(c/12) m³ δ_{m+n,0}`.
///
/// The field part is projected from samples; the central part is the
/// complex-bilinear extension of `−c(ξ,η)` scaled by `i c / 12`.
pub fn mode_commutator(m: i64, n: i64, c: f64) -> (Complex64, Complex64) {
    let k = 4 * (m.abs() + n.abs()) as usize + 8;
    let i = Complex64::new(0.0, 1.0);
    let mut field_coef = Complex64::new(0.0, 0.0);
    let mut center = Complex64::new(0.0, 0.0);
    for j in 0..k {
        let t = grid_point(j, k);
        let em = Complex64::from_polar(1.0, m as f64 * t);
        let en = Complex64::from_polar(1.0, n as f64 * t);
        let xi = i * em;
        let dxi = i * (i * m as f64) * em;
        let eta = i * en;
        let deta = i * (i * n as f64) * en;
        let ddeta = i * (i * n as f64).powu(2) * en;
        let br = xi * deta - dxi * eta;
        let lmn = i * Complex64::from_polar(1.0, (m + n) as f64 * t);
        field_coef += br * lmn.conj();
        center += -(dxi * ddeta);
    }
    field_coef /= k as f64;
    center /= k as f64;
    (field_coef, center * i * (c / 12.0))
}

/// Lie algebra data: structure constants and a faithful matrix representation.
#[derive(Debug, Clone, PartialEq)]
pub struct LieStructure {
    pub name: String,
    pub dim: usize,
    f: Vec<f64>,
    generators: Vec<DMatrix<f64>>,
    gram_inv: DMatrix<f64>,
}

impl LieStructure {
    /// so(3): `f_abc = ε_abc`, generators `(T_a)_bc = −ε_abc`.
    pub fn so3() -> Self {
        let mut f = vec![0.0; 27];
        let mut generators = vec![DMatrix::zeros(3, 3); 3];
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let e = levi_civita(a, b, c);
                    f[a * 9 + b * 3 + c] = e;
                    generators[a][(b, c)] = -e;
                }
            }
        }
        Self::new("so3", 3, f, generators).expect("so(3) data is consistent")
    }

    /// Abelian algebra of dimension `dim` (all `f_abc = 0`).
    pub fn abelian(dim: usize) -> Self {
        let generators = (0..dim)
            .map(|a| {
                let mut m = DMatrix::zeros(dim, dim);
                m[(a, a)] = 1.0;
                m
            })
            .collect();
        Self::new("abelian", dim, vec![0.0; dim * dim * dim], generators).expect("abelian data is consistent")
    }

    pub fn by_name(name: &str) -> AlgebraResult<Self> {
        match name {
            "so3" => Ok(Self::so3()),
            _ => Err(AlgebraError::UnknownStructure(name.to_string())),
        }
    }

    /// Validates total antisymmetry, the Jacobi identity and the representation.
    pub fn new(name: &str, dim: usize, f: Vec<f64>, generators: Vec<DMatrix<f64>>) -> AlgebraResult<Self> {
        if f.len() != dim * dim * dim || generators.len() != dim {
            return Err(AlgebraError::Dimension { expected: dim, got: generators.len() });
        }
        let at = |a: usize, b: usize, c: usize| f[a * dim * dim + b * dim + c];
        let mut jac = 0.0f64;
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    for d in 0..dim {
                        let mut s = 0.0;
                        for e in 0..dim {
                            s += at(a, b, e) * at(e, c, d) + at(b, c, e) * at(e, a, d) + at(c, a, e) * at(e, b, d);
                        }
                        jac = jac.max(s.abs());
                    }
                }
            }
        }
        if jac > 1e-12 {
            return Err(AlgebraError::Jacobi(jac));
        }
        for a in 0..dim {
            for b in 0..dim {
                let comm = &generators[a] * &generators[b] - &generators[b] * &generators[a];
                let mut rhs = DMatrix::zeros(comm.nrows(), comm.ncols());
                for c in 0..dim {
                    rhs += &generators[c] * at(a, b, c);
                }
                let r = (comm - rhs).abs().max();
                if r > 1e-12 {
                    return Err(AlgebraError::Jacobi(r));
                }
            }
        }
        let gram = DMatrix::from_fn(dim, dim, |a, b| generators[a].dot(&generators[b]));
        let gram_inv = gram.try_inverse().ok_or(AlgebraError::Dimension { expected: dim, got: 0 })?;
        Ok(Self { name: name.to_string(), dim, f, generators, gram_inv })
    }

    pub fn f(&self, a: usize, b: usize, c: usize) -> f64 {
        self.f[a * self.dim * self.dim + b * self.dim + c]
    }

    pub fn rep_dim(&self) -> usize {
        self.generators[0].nrows()
    }

    pub fn to_matrix(&self, comps: &[f64]) -> DMatrix<f64> {
        let r = self.rep_dim();
        let mut m = DMatrix::zeros(r, r);
        for (a, x) in comps.iter().enumerate() {
            m += &self.generators[a] * *x;
        }
        m
    }

    pub fn from_matrix(&self, m: &DMatrix<f64>) -> Vec<f64> {
        let proj: Vec<f64> = self.generators.iter().map(|t| t.dot(m)).collect();
        (0..self.dim).map(|a| (0..self.dim).map(|b| self.gram_inv[(a, b)] * proj[b]).sum()).collect()
    }
}

fn levi_civita(a: usize, b: usize, c: usize) -> f64 {
    match (a, b, c) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Lie-algebra-valued field `A = A_a T_a` with charge `a` (the inverse coupling).
#[derive(Debug, Clone, PartialEq)]
pub struct KMField {
    pub structure: LieStructure,
    pub components: Vec<CircleField>,
    pub charge: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KMRecord {
    pub basis_dim: usize,
    pub structure: String,
    pub components: Vec<CircleField>,
    pub charge: f64,
}

impl KMField {
    pub fn new(structure: LieStructure, components: Vec<CircleField>, charge: f64) -> AlgebraResult<Self> {
        if components.len() != structure.dim {
            return Err(AlgebraError::Dimension { expected: structure.dim, got: components.len() });
        }
        Ok(Self { structure, components, charge })
    }

    pub fn zeros(structure: LieStructure, bandlimit: usize, charge: f64) -> Self {
        let components = vec![CircleField::zeros(bandlimit); structure.dim];
        Self { structure, components, charge }
    }

    /// `Tr(A B)` with the `δ_ab` form.
    pub fn trace_product(&self, other: &KMField) -> CircleField {
        let mut acc = CircleField::zeros(0);
        for (x, y) in self.components.iter().zip(&other.components) {
            acc = &acc + &x.mul(y);
        }
        acc
    }

    /// Pointwise `[Λ, A]_c = f_abc Λ_a A_b`.
    pub fn commutator(&self, other: &KMField) -> Vec<CircleField> {
        let d = self.structure.dim;
        (0..d)
            .map(|c| {
                let mut acc = CircleField::zeros(0);
                for a in 0..d {
                    for b in 0..d {
                        let f = self.structure.f(a, b, c);
                        if f != 0.0 {
                            acc = &acc + &self.components[a].mul(&other.components[b]).scale(f);
                        }
                    }
                }
                acc
            })
            .collect()
    }

    pub fn to_record(&self) -> KMRecord {
        KMRecord {
            basis_dim: self.structure.dim,
            structure: self.structure.name.clone(),
            components: self.components.clone(),
            charge: self.charge,
        }
    }

    pub fn from_record(rec: KMRecord) -> AlgebraResult<Self> {
        let s = LieStructure::by_name(&rec.structure)?;
        if s.dim != rec.basis_dim {
            return Err(AlgebraError::Dimension { expected: s.dim, got: rec.basis_dim });
        }
        Self::new(s, rec.components, rec.charge)
    }

    pub fn sup_norm(&self) -> f64 {
        self.components.iter().map(|c| c.sup_norm()).fold(0.0, f64::max)
    }
}

/// `δA = −[Λ, A] + a Λ'` componentwise.
pub fn km_infinitesimal(a: &KMField, lambda: &KMField) -> AlgebraResult<KMField> {
    if a.structure.dim != lambda.structure.dim {
        return Err(AlgebraError::Dimension { expected: a.structure.dim, got: lambda.structure.dim });
    }
    let comm = lambda.commutator(a);
    let components = comm
        .iter()
        .zip(&lambda.components)
        .map(|(c, l)| &l.derivative(1).scale(a.charge) - c)
        .collect();
    Ok(KMField { structure: a.structure.clone(), components, charge: a.charge })
}

/// `A_g = g A g⁻¹ − a (∂g) g⁻¹` with `g(θ) = exp(X(θ))`, evaluated pointwise.
pub fn km_finite(a: &KMField, x: &KMField, cfg: &FieldConfig) -> AlgebraResult<KMField> {
    let s = &a.structure;
    if x.structure.dim != s.dim {
        return Err(AlgebraError::Dimension { expected: s.dim, got: x.structure.dim });
    }
    let content = a.components.iter().chain(&x.components).map(|c| c.bandlimit()).max().unwrap_or(0);
    let m = cfg.grid_for(content);
    let r = s.rep_dim();
    let a_s: Vec<Vec<f64>> = a.components.iter().map(|c| c.samples(m)).collect();
    let x_s: Vec<Vec<f64>> = x.components.iter().map(|c| c.samples(m)).collect();
    let dx_s: Vec<Vec<f64>> = x.components.iter().map(|c| c.derivative(1).samples(m)).collect();
    let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(m); s.dim];
    for j in 0..m {
        let pick = |v: &Vec<Vec<f64>>| v.iter().map(|c| c[j]).collect::<Vec<f64>>();
        let xm = s.to_matrix(&pick(&x_s));
        let dxm = s.to_matrix(&pick(&dx_s));
        // exp([[X, X'], [0, X]]) carries d/dθ exp(X) in its upper-right block.
        let mut big = DMatrix::zeros(2 * r, 2 * r);
        big.view_mut((0, 0), (r, r)).copy_from(&xm);
        big.view_mut((r, r), (r, r)).copy_from(&xm);
        big.view_mut((0, r), (r, r)).copy_from(&dxm);
        let e = big.exp();
        let g = e.view((0, 0), (r, r)).into_owned();
        let dg = e.view((0, r), (r, r)).into_owned();
        let ginv = (-&xm).exp();
        let am = s.to_matrix(&pick(&a_s));
        let res = &g * am * &ginv - (dg * &ginv) * a.charge;
        for (c, v) in s.from_matrix(&res).into_iter().enumerate() {
            out[c].push(v);
        }
    }
    let out_n = cfg.bandlimit.max(content);
    let mut components = Vec::with_capacity(s.dim);
    for v in out {
        let (f, res) = CircleField::fit_grid(&v, out_n)?;
        check_residual(res, cfg)?;
        components.push(f);
    }
    Ok(KMField { structure: s.clone(), components, charge: a.charge })
}

/// Central parameters of the semidirect product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemidirectParams {
    pub q: f64,
    pub beta: f64,
}

/// Returns `(δD, δA)` with
/// `δD = 2ξ'D + D'ξ + qξ''' + 2βξ' − Tr(AΛ')`,
/// `δA = A'ξ + ξ'A − [Λ,A] + e⁻¹Λ'` (the KM charge is `e⁻¹`).
pub fn semidirect_coadjoint(
    d: &CircleField,
    a: &KMField,
    xi: &CircleField,
    lambda: &KMField,
    p: SemidirectParams,
) -> AlgebraResult<(CircleField, KMField)> {
    let dxi = xi.derivative(1);
    let mut dd = &(&dxi.mul(d).scale(2.0) + &d.derivative(1).mul(xi)) + &xi.derivative(3).scale(p.q);
    dd = &dd + &dxi.scale(2.0 * p.beta);
    let lambda_prime = KMField {
        structure: lambda.structure.clone(),
        components: lambda.components.iter().map(|c| c.derivative(1)).collect(),
        charge: lambda.charge,
    };
    dd = &dd - &a.trace_product(&lambda_prime);
    let km = km_infinitesimal(a, lambda)?;
    let components = a
        .components
        .iter()
        .zip(&km.components)
        .map(|(ac, k)| &(&ac.derivative(1).mul(xi) + &dxi.mul(ac)) + k)
        .collect();
    Ok((dd, KMField { structure: a.structure.clone(), components, charge: a.charge }))
}

/// `D̃ = D + (e/2) Tr(AA)` with `e = 1/charge`.
pub fn gauge_invariant_shift(d: &VirCoadjoint, a: &KMField) -> VirCoadjoint {
    let e = 1.0 / a.charge;
    VirCoadjoint { u: &d.u + &a.trace_product(a).scale(e / 2.0), b: d.b }
}

/// Variation of `D̃` induced by `(δD, δA)`: `δD + e Tr(A δA)`.
pub fn shifted_variation(dd: &CircleField, a: &KMField, da: &KMField) -> CircleField {
    dd + &a.trace_product(da).scale(1.0 / a.charge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfields as tf;

    fn adj(xi: CircleField) -> VirAdjoint {
        VirAdjoint::field(xi)
    }

    #[test]
    fn sin_cos_bracket_is_minus_one() {
        let b = vir_bracket(&adj(CircleField::sin(1, 4)), &adj(CircleField::cos(1, 4)));
        assert!((&b.xi - &CircleField::constant(-1.0, 0)).sup_norm() < 1e-14);
    }

    #[test]
    fn cocycle_sin_cos() {
        assert!((gf_cocycle(&CircleField::sin(1, 4), &CircleField::cos(1, 4)) + 0.5).abs() < 1e-15);
        let x = CircleField::harmonic(3, 0.2, 0.7, 6);
        assert_eq!(gf_cocycle(&x, &x), 0.0);
    }

    #[test]
    fn mode_relation_two_minus_two() {
        let c = 3.7;
        let (f, z) = mode_commutator(2, -2, c);
        assert!((f - Complex64::new(4.0, 0.0)).norm() < 1e-12);
        assert!((z - Complex64::new(8.0 * c / 12.0, 0.0)).norm() < 1e-12);
        let (f, z) = mode_commutator(3, 1, c);
        assert!((f - Complex64::new(2.0, 0.0)).norm() < 1e-12);
        assert!(z.norm() < 1e-12);
    }

    #[test]
    fn pairing_examples() {
        let b = VirCoadjoint::new(CircleField::zeros(2), 1.0);
        assert_eq!(pairing(&b, &VirAdjoint { xi: CircleField::zeros(2), a: 5.0 }), 5.0);
        let b = VirCoadjoint::new(CircleField::cos(1, 2), 0.0);
        assert!((pairing(&b, &adj(CircleField::cos(1, 2))) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_orbit_isotropy() {
        let (n, b) = (3usize, 0.8);
        let u0 = b * (n * n) as f64 / 2.0;
        let v = Virasoro::default()
            .coadjoint_infinitesimal(&VirCoadjoint::new(CircleField::constant(u0, 8), b), &adj(CircleField::sin(n, 8)));
        assert!(v.u.sup_norm() < 1e-12);
        assert_eq!(v.b, b);
    }

    #[test]
    fn rotation_active_is_plain_composition() {
        let cfg = FieldConfig::with_bandlimit(16);
        let mut r = tf::rng(3);
        let u = tf::random_field(&mut r, 5, 1.0, 16);
        let f = CircleDiffeo::rotation(0.4, 16);
        let got = coadjoint_active(&VirCoadjoint::new(u.clone(), 2.0), &f, &cfg).unwrap();
        let want = u.compose(&f, &cfg).unwrap();
        assert!((&got.u - &want).sup_norm() < 1e-12);
    }

    #[test]
    fn passive_inverts_active() {
        let cfg = FieldConfig::default();
        let mut r = tf::rng(5);
        let u = tf::random_field(&mut r, 4, 1.0, 16);
        let f = tf::random_diffeo(&mut r, 3, 0.3, 16);
        let b = VirCoadjoint::new(u.clone(), 0.7);
        let act = coadjoint_active(&b, &f, &cfg).unwrap();
        let back = coadjoint_passive(&act, &f, &cfg).unwrap();
        assert!((&back.u - &u).sup_norm() < 1e-9);
    }

    #[test]
    fn so3_jacobi_and_abelian_direction() {
        let s = LieStructure::so3();
        let a = KMField::new(
            s.clone(),
            vec![CircleField::sin(1, 4), CircleField::zeros(4), CircleField::zeros(4)],
            1.0,
        )
        .unwrap();
        let l = KMField::new(s, vec![CircleField::constant(0.3, 4), CircleField::zeros(4), CircleField::zeros(4)], 1.0)
            .unwrap();
        let d = km_infinitesimal(&a, &l).unwrap();
        assert!(d.sup_norm() < 1e-15);
    }

    #[test]
    fn km_inhomogeneous_only_when_a_zero() {
        let s = LieStructure::so3();
        let a = KMField::zeros(s.clone(), 4, 2.0);
        let l = KMField::new(s, vec![CircleField::sin(1, 4), CircleField::cos(2, 4), CircleField::zeros(4)], 2.0)
            .unwrap();
        let d = km_infinitesimal(&a, &l).unwrap();
        for (dc, lc) in d.components.iter().zip(&l.components) {
            assert!((dc - &lc.derivative(1).scale(2.0)).sup_norm() < 1e-14);
        }
    }

    #[test]
    fn shift_examples() {
        let s = LieStructure::so3();
        let d = VirCoadjoint::new(CircleField::cos(1, 4), 1.0);
        let a0 = KMField::zeros(s.clone(), 4, 0.5);
        assert_eq!(gauge_invariant_shift(&d, &a0).u.with_bandlimit(4), d.u);
        let a1 = KMField::new(s, vec![CircleField::sin(1, 4), CircleField::zeros(4), CircleField::zeros(4)], 0.5)
            .unwrap();
        let z = VirCoadjoint::new(CircleField::zeros(4), 1.0);
        let sh = gauge_invariant_shift(&z, &a1);
        // e = 2, so D̃ = sin²θ.
        let want = CircleField::sin(1, 4).mul(&CircleField::sin(1, 4));
        assert!((&sh.u - &want).sup_norm() < 1e-14);
    }
}

//! Dirac constraint analysis over differential polynomials.
//!
//! Functionals are smeared densities `φ[ν] = ∫ νφ`, so delta functions never
//! appear: a bracket is the density `Σ (δF/δq·δG/δp − δF/δp·δG/δq)` taken
//! modulo total x-derivatives, and the local density of `{φ[ν], G}` is its
//! Euler derivative in `ν`.
//!
//! Weak reduction writes `p = Σ c_{ik} ∂^k φ_i + r` by linear algebra over a
//! finite candidate set `m · ∂^k φ_i` (monomial `m`, `k ≤ 3`). Candidates are
//! echelonized with the highest-derivative monomial as pivot, so the
//! remainder is the unique element free of pivot monomials.

use crate::diffpoly::{self, rat, DiffPoly, DiffPolyError, Monomial, SmearedFunctional};
use num_rational::BigRational;
use num_traits::Zero;
use serde::Deserialize;
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiracError {
    #[error("field `{0}` is not covered by the canonical pairs")]
    Uncovered(String),
    #[error("canonical name `{0}` appears twice")]
    DuplicateName(String),
    #[error("constraint chain did not terminate within {0} constraints")]
    NonTermination(usize),
    #[error("invalid case specification: {0}")]
    Spec(String),
    #[error(transparent)]
    Poly(#[from] DiffPolyError),
}

pub type Result<T> = std::result::Result<T, DiracError>;

// ---------------------------------------------------------------------------
// Phase space and brackets

/// Canonical pairs `(q, p)` with `{q(x), p(y)} = δ(x − y)`; every other
/// symbol in a density must be declared auxiliary (smearing, multiplier).
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalPairSet {
    pairs: Vec<(String, String)>,
    auxiliary: BTreeSet<String>,
}

impl CanonicalPairSet {
    pub fn new(pairs: &[(&str, &str)]) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (q, p) in pairs {
            for n in [q, p] {
                if !seen.insert(n.to_string()) {
                    return Err(DiracError::DuplicateName(n.to_string()));
                }
            }
        }
        Ok(CanonicalPairSet {
            pairs: pairs.iter().map(|(q, p)| (q.to_string(), p.to_string())).collect(),
            auxiliary: BTreeSet::new(),
        })
    }

    /// Adds non-canonical symbols (multipliers, gauge parameters).
    pub fn with_auxiliary(mut self, names: &[&str]) -> Result<Self> {
        for n in names {
            if self.is_canonical(n) {
                return Err(DiracError::DuplicateName(n.to_string()));
            }
            self.auxiliary.insert(n.to_string());
        }
        Ok(self)
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn auxiliary(&self) -> &BTreeSet<String> {
        &self.auxiliary
    }

    pub fn is_canonical(&self, name: &str) -> bool {
        self.pairs.iter().any(|(q, p)| q == name || p == name)
    }

    fn coordinate_of(&self, momentum: &str) -> Option<&str> {
        self.pairs.iter().find(|(_, p)| p == momentum).map(|(q, _)| q.as_str())
    }

    fn momentum_of(&self, coordinate: &str) -> Option<&str> {
        self.pairs.iter().find(|(q, _)| q == coordinate).map(|(_, p)| p.as_str())
    }

    fn check(&self, p: &DiffPoly, extra: &[&str]) -> Result<()> {
        for f in p.fields() {
            if !self.is_canonical(&f) && !self.auxiliary.contains(&f) && !extra.contains(&f.as_str()) {
                return Err(DiracError::Uncovered(f));
            }
        }
        Ok(())
    }

    /// A symbol name not used by any pair or auxiliary symbol.
    pub fn fresh(&self, base: &str) -> String {
        let mut name = base.to_string();
        while self.is_canonical(&name) || self.auxiliary.contains(&name) {
            name.push('_');
        }
        name
    }
}

/// `{∫f, ∫g}` as a density in normal form; `extra` lists further
/// non-canonical symbols (smearings) allowed in the densities.
pub fn bracket_densities(f: &DiffPoly, g: &DiffPoly, pairs: &CanonicalPairSet, extra: &[&str]) -> Result<DiffPoly> {
    pairs.check(f, extra)?;
    pairs.check(g, extra)?;
    let mut out = DiffPoly::zero();
    for (q, p) in &pairs.pairs {
        let fq = diffpoly::euler_variation(f, q)?;
        let fp = diffpoly::euler_variation(f, p)?;
        let gq = diffpoly::euler_variation(g, q)?;
        let gp = diffpoly::euler_variation(g, p)?;
        out = out.add(&fq.mul(&gp)).sub(&fp.mul(&gq));
    }
    Ok(out.normal_form_x())
}

/// `{F, G}` for smeared functionals; antisymmetric exactly.
pub fn poisson_bracket(f: &SmearedFunctional, g: &SmearedFunctional, pairs: &CanonicalPairSet) -> Result<DiffPoly> {
    bracket_densities(&f.density, &g.density, pairs, &[&f.smearing, &g.smearing])
}

/// Local density of `{φ(x), G}`: the Euler derivative of `{φ[ν], G}` in `ν`.
pub fn local_bracket(phi: &DiffPoly, g: &DiffPoly, pairs: &CanonicalPairSet, extra: &[&str]) -> Result<DiffPoly> {
    let nu = fresh_symbol("nu", pairs, extra);
    let mut all: Vec<&str> = extra.to_vec();
    all.push(&nu);
    let smeared = DiffPoly::var(&nu).mul(phi);
    let b = bracket_densities(&smeared, g, pairs, &all)?;
    Ok(diffpoly::euler_variation(&b, &nu)?)
}

fn fresh_symbol(base: &str, pairs: &CanonicalPairSet, extra: &[&str]) -> String {
    let mut name = pairs.fresh(base);
    while extra.contains(&name.as_str()) {
        name.push('_');
    }
    name
}

/// `δF = {F(x), G[ξ]}` for a canonical field `F`.
pub fn gauge_variation(field: &str, generator: &SmearedFunctional, pairs: &CanonicalPairSet) -> Result<DiffPoly> {
    pairs.check(&generator.density, &[&generator.smearing])?;
    if let Some(p) = pairs.momentum_of(field) {
        Ok(diffpoly::euler_variation(&generator.density, p)?)
    } else if let Some(q) = pairs.coordinate_of(field) {
        Ok(diffpoly::euler_variation(&generator.density, q)?.neg())
    } else {
        Err(DiracError::Uncovered(field.to_string()))
    }
}

// ---------------------------------------------------------------------------
// Weak reduction

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReduceOptions {
    /// Highest x-derivative of a constraint in the ansatz.
    pub max_constraint_derivative: u32,
    /// Highest jet order in the coefficient monomials.
    pub max_coefficient_order: u32,
    /// Rounds of candidate generation from newly introduced monomials.
    pub closure_rounds: usize,
    pub max_candidates: usize,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        ReduceOptions { max_constraint_derivative: 3, max_coefficient_order: 4, closure_rounds: 2, max_candidates: 20_000 }
    }
}

/// One term `coefficient · ∂^derivative φ_constraint` of a decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionTerm {
    pub constraint: usize,
    pub derivative: u32,
    pub coefficient: DiffPoly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakReduction {
    pub remainder: DiffPoly,
    pub decomposition: Vec<DecompositionTerm>,
    /// The candidate cap was hit; the remainder may be reducible further.
    pub capped: bool,
}

impl WeakReduction {
    pub fn is_weakly_zero(&self) -> bool {
        self.remainder.is_zero()
    }
}

fn derivative_weight(m: &Monomial) -> u32 {
    m.jets().map(|(j, e)| (j.t + j.x) * e.max(0) as u32).sum()
}

fn pivot_cmp(a: &Monomial, b: &Monomial) -> std::cmp::Ordering {
    (derivative_weight(a), a.max_jet_order(), a.jet_degree(), a).cmp(&(
        derivative_weight(b),
        b.max_jet_order(),
        b.jet_degree(),
        b,
    ))
}

fn leading(p: &DiffPoly) -> Option<(Monomial, BigRational)> {
    p.terms().max_by(|a, b| pivot_cmp(a.0, b.0)).map(|(m, c)| (m.clone(), c.clone()))
}

struct Row {
    poly: DiffPoly,
    combo: BTreeMap<usize, BigRational>,
}

fn axpy(combo: &mut BTreeMap<usize, BigRational>, s: &BigRational, other: &BTreeMap<usize, BigRational>) {
    for (k, v) in other {
        let e = combo.entry(*k).or_insert_with(BigRational::zero);
        *e += s * v;
        if e.is_zero() {
            combo.remove(k);
        }
    }
}

/// Reduce `p` modulo the span of `m · ∂^k φ_i`; see the module docs.
pub fn weak_reduce_with(p: &DiffPoly, constraints: &[DiffPoly], opts: &ReduceOptions) -> WeakReduction {
    let derivs: Vec<Vec<DiffPoly>> = constraints
        .iter()
        .map(|c| (0..=opts.max_constraint_derivative).map(|k| c.dx_n(k)).collect())
        .collect();
    let mut candidates: Vec<(usize, u32, Monomial)> = Vec::new();
    let mut seen: BTreeSet<(usize, u32, Monomial)> = BTreeSet::new();
    let mut targets: BTreeSet<Monomial> = p.terms().map(|(m, _)| m.clone()).collect();
    let mut capped = false;
    'rounds: for _ in 0..=opts.closure_rounds {
        let mut fresh_targets = BTreeSet::new();
        for (i, dk) in derivs.iter().enumerate() {
            for (k, d) in dk.iter().enumerate() {
                for (t, _) in d.terms() {
                    for m in &targets {
                        let Some(q) = m.divide(t) else { continue };
                        if q.max_jet_order() > opts.max_coefficient_order {
                            continue;
                        }
                        let key = (i, k as u32, q);
                        if seen.contains(&key) {
                            continue;
                        }
                        if candidates.len() >= opts.max_candidates {
                            capped = true;
                            break 'rounds;
                        }
                        for (m2, _) in d.mul_monomial(&key.2, &rat(1)).terms() {
                            if !targets.contains(m2) {
                                fresh_targets.insert(m2.clone());
                            }
                        }
                        seen.insert(key.clone());
                        candidates.push(key);
                    }
                }
            }
        }
        if fresh_targets.is_empty() {
            break;
        }
        targets.extend(fresh_targets);
    }

    // Echelon form keyed by pivot monomial.
    let mut rows: HashMap<Monomial, Row> = HashMap::new();
    for (idx, (i, k, q)) in candidates.iter().enumerate() {
        let mut v = derivs[*i][*k as usize].mul_monomial(q, &rat(1));
        let mut combo = BTreeMap::from([(idx, rat(1))]);
        while let Some((l, c)) = leading(&v) {
            match rows.get(&l) {
                Some(row) => {
                    v = v.sub(&row.poly.scale(&c));
                    axpy(&mut combo, &-c, &row.combo);
                }
                None => {
                    let inv = c.recip();
                    let poly = v.scale(&inv);
                    combo.values_mut().for_each(|x| *x *= &inv);
                    rows.insert(l, Row { poly, combo });
                    break;
                }
            }
        }
    }

    let mut r = p.clone();
    let mut remainder = DiffPoly::zero();
    let mut used: BTreeMap<usize, BigRational> = BTreeMap::new();
    while let Some((l, c)) = leading(&r) {
        match rows.get(&l) {
            Some(row) => {
                r = r.sub(&row.poly.scale(&c));
                axpy(&mut used, &c, &row.combo);
            }
            None => {
                remainder.add_term(l.clone(), c.clone());
                r = r.sub(&DiffPoly::from_term(l, c));
            }
        }
    }

    let mut coeffs: BTreeMap<(usize, u32), DiffPoly> = BTreeMap::new();
    for (idx, c) in used {
        let (i, k, q) = &candidates[idx];
        coeffs.entry((*i, *k)).or_insert_with(DiffPoly::zero).add_term(q.clone(), c);
    }
    let decomposition: Vec<DecompositionTerm> = coeffs
        .into_iter()
        .filter(|(_, c)| !c.is_zero())
        .map(|((constraint, derivative), coefficient)| DecompositionTerm { constraint, derivative, coefficient })
        .collect();
    debug_assert!({
        let mut rebuilt = remainder.clone();
        for t in &decomposition {
            rebuilt = rebuilt.add(&t.coefficient.mul(&derivs[t.constraint][t.derivative as usize]));
        }
        rebuilt == *p
    });
    WeakReduction { remainder, decomposition, capped }
}

pub fn weak_reduce(p: &DiffPoly, constraints: &[DiffPoly]) -> WeakReduction {
    weak_reduce_with(p, constraints, &ReduceOptions::default())
}

/// Scale so the pivot (highest-derivative) term has coefficient one.
pub fn normalize(p: &DiffPoly) -> (DiffPoly, BigRational) {
    match leading(p) {
        Some((_, c)) => {
            let s = c.recip();
            (p.scale(&s), s)
        }
        None => (p.clone(), rat(1)),
    }
}

// ---------------------------------------------------------------------------
// Consistency chain

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Primary,
    Secondary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassLabel {
    First,
    Second,
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassLabel::First => "first",
            ClassLabel::Second => "second",
        })
    }
}

/// How a missing multiplier condition is treated when classifying.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassMode {
    /// Brackets must reduce to zero modulo the constraints alone.
    Strict,
    /// A primary's smearing obeys the conditions derived for its multiplier.
    AdmissibleSmearing,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintEntry {
    pub label: String,
    /// Normalized density, `scale · raw`.
    pub density: DiffPoly,
    /// Remainder as produced by the consistency bracket (or the input primary).
    pub raw: DiffPoly,
    pub scale: BigRational,
    pub provenance: Provenance,
    pub step: usize,
    /// Constraint whose consistency bracket produced this one.
    pub parent: Option<usize>,
    pub multiplier: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierCondition {
    pub density: DiffPoly,
    pub raw: DiffPoly,
    pub scale: BigRational,
    pub multipliers: Vec<String>,
    pub parent: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Trivial,
    NewSecondary(usize),
    MultiplierCondition(usize),
    Inconsistency(DiffPoly),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainStep {
    pub constraint: usize,
    /// Local density of `{φ, H_T}`.
    pub bracket: DiffPoly,
    pub reduction: WeakReduction,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BracketEntry {
    pub i: usize,
    pub j: usize,
    /// Local density of `{φ_i, φ_j[μ]}` in the smearing `μ`.
    pub density: DiffPoly,
    pub strict: DiffPoly,
    pub admissible: DiffPoly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintChainReport {
    pub constraints: Vec<ConstraintEntry>,
    pub steps: Vec<ChainStep>,
    pub conditions: Vec<MultiplierCondition>,
    pub table: Vec<BracketEntry>,
    /// Smearing symbol of the second slot in the table.
    pub table_smearing: String,
    pub classes_strict: Vec<ClassLabel>,
    pub classes_admissible: Vec<ClassLabel>,
    pub terminated: bool,
    pub inconsistent: bool,
}

impl ConstraintChainReport {
    pub fn classes(&self, mode: ClassMode) -> &[ClassLabel] {
        match mode {
            ClassMode::Strict => &self.classes_strict,
            ClassMode::AdmissibleSmearing => &self.classes_admissible,
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> Option<&BracketEntry> {
        self.table.iter().find(|e| e.i == i && e.j == j)
    }

    pub fn secondaries(&self) -> usize {
        self.constraints.iter().filter(|c| c.provenance == Provenance::Secondary).count()
    }

    /// Labels of first-class constraints, i.e. the gauge generators.
    pub fn gauge_generators(&self, mode: ClassMode) -> Vec<String> {
        self.constraints
            .iter()
            .zip(self.classes(mode))
            .filter(|(_, c)| **c == ClassLabel::First)
            .map(|(e, _)| e.label.clone())
            .collect()
    }

    pub fn to_json(&self) -> Value {
        let constraints: Vec<Value> = self
            .constraints
            .iter()
            .enumerate()
            .map(|(k, c)| {
                json!({
                    "label": c.label,
                    "density": c.density.to_string(),
                    "raw": c.raw.to_string(),
                    "scale": c.scale.to_string(),
                    "provenance": match c.provenance { Provenance::Primary => "primary", Provenance::Secondary => "secondary" },
                    "step": c.step,
                    "parent": c.parent.map(|p| self.constraints[p].label.clone()),
                    "multiplier": c.multiplier,
                    "class_strict": self.classes_strict[k].to_string(),
                    "class_admissible": self.classes_admissible[k].to_string(),
                })
            })
            .collect();
        let steps: Vec<Value> = self
            .steps
            .iter()
            .map(|s| {
                let outcome = match &s.outcome {
                    Outcome::Trivial => json!({"kind": "trivial"}),
                    Outcome::NewSecondary(k) => json!({"kind": "secondary", "constraint": self.constraints[*k].label}),
                    Outcome::MultiplierCondition(k) => {
                        json!({"kind": "multiplier_condition", "condition": self.conditions[*k].density.to_string()})
                    }
                    Outcome::Inconsistency(p) => json!({"kind": "inconsistency", "remainder": p.to_string()}),
                };
                json!({
                    "constraint": self.constraints[s.constraint].label,
                    "bracket": s.bracket.to_string(),
                    "remainder": s.reduction.remainder.to_string(),
                    "capped": s.reduction.capped,
                    "outcome": outcome,
                })
            })
            .collect();
        let conditions: Vec<Value> = self
            .conditions
            .iter()
            .map(|c| {
                json!({
                    "density": c.density.to_string(),
                    "raw": c.raw.to_string(),
                    "scale": c.scale.to_string(),
                    "multipliers": c.multipliers,
                    "parent": self.constraints[c.parent].label,
                })
            })
            .collect();
        let table: Vec<Value> = self
            .table
            .iter()
            .map(|e| {
                json!({
                    "i": self.constraints[e.i].label,
                    "j": self.constraints[e.j].label,
                    "bracket": e.density.to_string(),
                    "weak_strict": e.strict.to_string(),
                    "weak_admissible": e.admissible.to_string(),
                })
            })
            .collect();
        json!({
            "constraints": constraints,
            "steps": steps,
            "multiplier_conditions": conditions,
            "bracket_table": table,
            "table_smearing": self.table_smearing,
            "gauge_generators": self.gauge_generators(ClassMode::AdmissibleSmearing),
            "terminated": self.terminated,
            "inconsistent": self.inconsistent,
        })
    }

    /// Plain-text summary table.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("{:<6} {:<10} {:<8} {:<8} {:<11} density\n", "label", "origin", "strict", "admiss.", "scale"));
        for (k, c) in self.constraints.iter().enumerate() {
            let origin = match (c.provenance, c.parent) {
                (Provenance::Primary, _) => "primary".to_string(),
                (Provenance::Secondary, Some(p)) => format!("<- {}", self.constraints[p].label),
                (Provenance::Secondary, None) => "secondary".to_string(),
            };
            s.push_str(&format!(
                "{:<6} {:<10} {:<8} {:<8} {:<11} {}\n",
                c.label,
                origin,
                self.classes_strict[k].to_string(),
                self.classes_admissible[k].to_string(),
                c.scale.to_string(),
                c.density
            ));
        }
        for c in &self.conditions {
            s.push_str(&format!("multiplier condition (from {}): {} ≈ 0\n", self.constraints[c.parent].label, c.density));
        }
        s.push_str(&format!("terminated: {}\n", self.terminated));
        s
    }
}

fn contains_any(p: &DiffPoly, names: &[String]) -> Vec<String> {
    names.iter().filter(|n| p.contains_field(n)).cloned().collect()
}

/// Run the Dirac consistency algorithm for `H_T = H + Σ λ_k φ_k`.
pub fn consistency_chain(
    hamiltonian: &DiffPoly,
    primaries: &[DiffPoly],
    multipliers: &[&str],
    pairs: &CanonicalPairSet,
) -> Result<ConstraintChainReport> {
    consistency_chain_with(hamiltonian, primaries, multipliers, pairs, &ReduceOptions::default(), 12)
}

pub fn consistency_chain_with(
    hamiltonian: &DiffPoly,
    primaries: &[DiffPoly],
    multipliers: &[&str],
    pairs: &CanonicalPairSet,
    opts: &ReduceOptions,
    max_constraints: usize,
) -> Result<ConstraintChainReport> {
    if primaries.len() != multipliers.len() {
        return Err(DiracError::Spec("one multiplier per primary constraint is required".into()));
    }
    let pairs = pairs.clone().with_auxiliary(
        &multipliers.iter().copied().filter(|m| !pairs.auxiliary().contains(*m)).collect::<Vec<_>>(),
    )?;
    let mult_names: Vec<String> = multipliers.iter().map(|s| s.to_string()).collect();
    pairs.check(hamiltonian, &[])?;
    let mut h_total = hamiltonian.clone();
    let mut constraints = Vec::new();
    for (k, (phi, lam)) in primaries.iter().zip(multipliers).enumerate() {
        pairs.check(phi, &[])?;
        h_total = h_total.add(&DiffPoly::var(lam).mul(phi));
        constraints.push(ConstraintEntry {
            label: format!("phi{}", k + 1),
            density: phi.clone(),
            raw: phi.clone(),
            scale: rat(1),
            provenance: Provenance::Primary,
            step: 0,
            parent: None,
            multiplier: Some(lam.to_string()),
        });
    }

    let mut steps = Vec::new();
    let mut conditions: Vec<MultiplierCondition> = Vec::new();
    let mut inconsistent = false;
    let mut next = 0;
    while next < constraints.len() {
        let bracket = local_bracket(&constraints[next].density, &h_total, &pairs, &[])?;
        let basis: Vec<DiffPoly> = constraints.iter().map(|c| c.density.clone()).collect();
        let reduction = weak_reduce_with(&bracket, &basis, opts);
        let rem = &reduction.remainder;
        let outcome = if rem.is_zero() {
            Outcome::Trivial
        } else if rem.jet_vars().is_empty() {
            inconsistent = true;
            Outcome::Inconsistency(rem.clone())
        } else {
            let involved = contains_any(rem, &mult_names);
            if involved.is_empty() {
                if constraints.len() >= max_constraints {
                    return Err(DiracError::NonTermination(max_constraints));
                }
                let (density, scale) = normalize(rem);
                let step = constraints[next].step + 1;
                constraints.push(ConstraintEntry {
                    label: format!("phi{}", constraints.len() + 1),
                    density,
                    raw: rem.clone(),
                    scale,
                    provenance: Provenance::Secondary,
                    step,
                    parent: Some(next),
                    multiplier: None,
                });
                Outcome::NewSecondary(constraints.len() - 1)
            } else {
                let mut known = basis.clone();
                known.extend(conditions.iter().map(|c| c.density.clone()));
                if weak_reduce_with(rem, &known, opts).is_weakly_zero() {
                    Outcome::Trivial
                } else {
                    let (density, scale) = normalize(rem);
                    conditions.push(MultiplierCondition {
                        density,
                        raw: rem.clone(),
                        scale,
                        multipliers: involved,
                        parent: next,
                    });
                    Outcome::MultiplierCondition(conditions.len() - 1)
                }
            }
        };
        steps.push(ChainStep { constraint: next, bracket, reduction, outcome });
        if inconsistent {
            break;
        }
        next += 1;
    }

    let mut extra: Vec<&str> = Vec::new();
    let mu = fresh_symbol("mu", &pairs, &extra);
    extra.push(&mu);
    let basis: Vec<DiffPoly> = constraints.iter().map(|c| c.density.clone()).collect();
    let n = constraints.len();
    let mut table = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let gj = DiffPoly::var(&mu).mul(&constraints[j].density);
            let density = local_bracket(&constraints[i].density, &gj, &pairs, &extra)?;
            let strict = weak_reduce_with(&density, &basis, opts).remainder;
            let admissible = match (&constraints[j].multiplier, strict.is_zero()) {
                (Some(lam), false) => {
                    let mut aug = basis.clone();
                    for c in conditions.iter().filter(|c| c.multipliers.contains(lam)) {
                        aug.push(c.density.rename_field(lam, &mu));
                    }
                    weak_reduce_with(&density, &aug, opts).remainder
                }
                _ => strict.clone(),
            };
            table.push(BracketEntry { i, j, density, strict, admissible });
        }
    }
    let classify = |pick: &dyn Fn(&BracketEntry) -> bool| -> Vec<ClassLabel> {
        (0..n)
            .map(|i| {
                let commutes = (0..n).all(|j| {
                    let a = table.iter().find(|e| e.i == i && e.j == j).map(pick).unwrap_or(false);
                    let b = table.iter().find(|e| e.i == j && e.j == i).map(pick).unwrap_or(false);
                    a || b
                });
                if commutes {
                    ClassLabel::First
                } else {
                    ClassLabel::Second
                }
            })
            .collect()
    };
    let classes_strict = classify(&|e| e.strict.is_zero());
    let classes_admissible = classify(&|e| e.admissible.is_zero());
    Ok(ConstraintChainReport {
        constraints,
        steps,
        conditions,
        table,
        table_smearing: mu.clone(),
        classes_strict,
        classes_admissible,
        terminated: !inconsistent,
        inconsistent,
    })
}

// ---------------------------------------------------------------------------
// Case studies

/// Input bundle for [`consistency_chain`].
#[derive(Clone, Debug)]
pub struct CaseStudy {
    pub name: String,
    pub pairs: CanonicalPairSet,
    pub hamiltonian: DiffPoly,
    pub primaries: Vec<DiffPoly>,
    pub multipliers: Vec<String>,
}

impl CaseStudy {
    pub fn run(&self) -> Result<ConstraintChainReport> {
        let m: Vec<&str> = self.multipliers.iter().map(|s| s.as_str()).collect();
        consistency_chain(&self.hamiltonian, &self.primaries, &m, &self.pairs)
    }
}

fn v(name: &str) -> DiffPoly {
    DiffPoly::var(name)
}

fn dx(name: &str, k: u32) -> DiffPoly {
    DiffPoly::dxn(name, k)
}

/// `XD′ + 2X′D + qX‴`.
pub fn diff_gauss() -> DiffPoly {
    v("X").mul(&dx("D", 1)).add(&dx("X", 1).mul(&v("D")).scale_int(2)).add(&DiffPoly::param("q").mul(&dx("X", 3)))
}

/// `ND′ + 2N′D + qN‴`.
pub fn coadjoint_shift() -> DiffPoly {
    v("N").mul(&dx("D", 1)).add(&dx("N", 1).mul(&v("D")).scale_int(2)).add(&DiffPoly::param("q").mul(&dx("N", 3)))
}

/// `X²/2`.
pub fn kinetic() -> DiffPoly {
    v("X").pow(2).scale(&diffpoly::ratio(1, 2))
}

/// `T = ½DX² − (q/4)X′² + (q/2)XX″`.
pub fn alternative_kinetic() -> DiffPoly {
    let q = DiffPoly::param("q");
    v("D")
        .mul(&v("X").pow(2))
        .scale(&diffpoly::ratio(1, 2))
        .sub(&q.mul(&dx("X", 1).pow(2)).scale(&diffpoly::ratio(1, 4)))
        .add(&q.mul(&v("X")).mul(&dx("X", 2)).scale(&diffpoly::ratio(1, 2)))
}

/// DXN theory: `H = X²/2 + X(ND′ + 2N′D + qN‴)`, primary `π`.
pub fn dxn_case() -> CaseStudy {
    CaseStudy {
        name: "dxn".into(),
        pairs: CanonicalPairSet::new(&[("D", "X"), ("N", "pi")]).expect("distinct names"),
        hamiltonian: kinetic().add(&v("X").mul(&coadjoint_shift())),
        primaries: vec![v("pi")],
        multipliers: vec!["lam".into()],
    }
}

/// Frozen theory: `H = 0`, primaries `X²/2` and the diff-Gauss law.
pub fn frozen_case() -> CaseStudy {
    CaseStudy {
        name: "frozen".into(),
        pairs: CanonicalPairSet::new(&[("D", "X")]).expect("distinct names"),
        hamiltonian: DiffPoly::zero(),
        primaries: vec![kinetic(), diff_gauss()],
        multipliers: vec!["mu1".into(), "mu2".into()],
    }
}

/// Single-constraint theory `T ≈ 0` built on the alternative kinetic term.
pub fn alternative_case() -> CaseStudy {
    CaseStudy {
        name: "alternative".into(),
        pairs: CanonicalPairSet::new(&[("D", "X")]).expect("distinct names"),
        hamiltonian: DiffPoly::zero(),
        primaries: vec![alternative_kinetic()],
        multipliers: vec!["lam".into()],
    }
}

/// Maxwell theory with fields depending on one spatial coordinate `x`:
/// `H = ½(A₂′² + A₃′²) + ½BᵢBⁱ − A₀∂ᵢBⁱ` with `BᵢBⁱ = −Σ(Bⁱ)²`.
pub fn maxwell_case() -> CaseStudy {
    let half = diffpoly::ratio(1, 2);
    let mut h = dx("A2", 1).pow(2).add(&dx("A3", 1).pow(2)).scale(&half);
    for i in 1..=3 {
        h = h.sub(&v(&format!("B{i}")).pow(2).scale(&half));
    }
    h = h.sub(&v("A0").mul(&dx("B1", 1)));
    CaseStudy {
        name: "maxwell".into(),
        pairs: CanonicalPairSet::new(&[("A0", "B0"), ("A1", "B1"), ("A2", "B2"), ("A3", "B3")]).expect("distinct names"),
        hamiltonian: h,
        primaries: vec![v("B0")],
        multipliers: vec!["lam".into()],
    }
}

/// JSON layout of a user-supplied case.
#[derive(Clone, Debug, Deserialize)]
pub struct CaseSpecFile {
    pub hamiltonian: String,
    pub pairs: Vec<(String, String)>,
    pub primaries: Vec<String>,
    pub multipliers: Vec<String>,
    #[serde(default)]
    pub params: Option<Vec<String>>,
}

pub fn custom_case(json_text: &str) -> Result<CaseStudy> {
    let spec: CaseSpecFile = serde_json::from_str(json_text).map_err(|e| DiracError::Spec(e.to_string()))?;
    let params: Vec<String> =
        spec.params.clone().unwrap_or_else(|| diffpoly::DEFAULT_PARAMS.iter().map(|s| s.to_string()).collect());
    let p: Vec<&str> = params.iter().map(|s| s.as_str()).collect();
    let pair_refs: Vec<(&str, &str)> = spec.pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    Ok(CaseStudy {
        name: "custom".into(),
        pairs: CanonicalPairSet::new(&pair_refs)?,
        hamiltonian: diffpoly::parse(&spec.hamiltonian, &p)?,
        primaries: spec.primaries.iter().map(|s| diffpoly::parse(s, &p)).collect::<diffpoly::Result<_>>()?,
        multipliers: spec.multipliers,
    })
}

pub fn case_by_name(name: &str) -> Option<CaseStudy> {
    match name {
        "dxn" => Some(dxn_case()),
        "frozen" => Some(frozen_case()),
        "alternative" => Some(alternative_case()),
        "maxwell" => Some(maxwell_case()),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Identity checks

/// Outcome of comparing a computed density with an expected display.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityCheck {
    pub name: String,
    pub computed: DiffPoly,
    pub expected: DiffPoly,
    /// `computed − expected` (modulo total derivatives where stated).
    pub residual: DiffPoly,
    /// `computed = sign · expected` when a sign flip relates them.
    pub sign: Option<i32>,
}

impl IdentityCheck {
    fn new(name: &str, computed: DiffPoly, expected: DiffPoly, modulo_x: bool) -> Self {
        let residual = computed.sub(&expected).normal_form(modulo_x);
        let sign = if residual.is_zero() {
            Some(1)
        } else if computed.add(&expected).normal_form(modulo_x).is_zero() {
            Some(-1)
        } else {
            None
        };
        IdentityCheck { name: name.to_string(), computed, expected, residual, sign }
    }

    pub fn holds(&self) -> bool {
        self.residual.is_zero()
    }

    pub fn holds_up_to_sign(&self) -> bool {
        self.sign.is_some()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "computed": self.computed.to_string(),
            "expected": self.expected.to_string(),
            "residual": self.residual.to_string(),
            "holds": self.holds(),
            "sign": self.sign,
        })
    }
}

fn smeared(phi: &DiffPoly, s: &str) -> SmearedFunctional {
    SmearedFunctional::smear(phi, s)
}

/// The three frozen-theory brackets plus the four gauge variations.
pub struct FrozenChecks {
    pub brackets: Vec<IdentityCheck>,
    /// The printed middle bracket with `φ₂′` where `φ₁′` is needed.
    pub printed_typo: IdentityCheck,
    pub gauge: Vec<IdentityCheck>,
}

pub fn frozen_checks() -> Result<FrozenChecks> {
    let pairs = CanonicalPairSet::new(&[("D", "X")])?;
    let (p1, p2) = (kinetic(), diff_gauss());
    let (mu, lam) = (v("mu"), v("lam"));
    let b11 = poisson_bracket(&smeared(&p1, "mu"), &smeared(&p1, "lam"), &pairs)?;
    let b12 = poisson_bracket(&smeared(&p1, "mu"), &smeared(&p2, "lam"), &pairs)?;
    let b22 = poisson_bracket(&smeared(&p2, "mu"), &smeared(&p2, "lam"), &pairs)?;
    let two = |p: DiffPoly| p.scale_int(2);
    let e12 = two(lam.mul(&dx("mu", 1)).mul(&p1)).add(&mu.mul(&lam).mul(&p1.dx()).scale_int(3)).neg();
    let e12_printed = two(lam.mul(&dx("mu", 1)).mul(&p1)).add(&mu.mul(&lam).mul(&p2.dx()).scale_int(3)).neg();
    let e22 = mu.mul(&dx("lam", 1)).sub(&dx("mu", 1).mul(&lam)).mul(&p2);
    let brackets = vec![
        IdentityCheck::new("{phi1[mu], phi1[lam]} = 0", b11, DiffPoly::zero(), true),
        IdentityCheck::new("{phi1[mu], phi2[lam]} = -(2 lam mu' phi1 + 3 mu lam phi1')", b12.clone(), e12, true),
        IdentityCheck::new("{phi2[mu], phi2[lam]} = (mu lam' - mu' lam) phi2", b22, e22, true),
    ];
    let printed_typo = IdentityCheck::new("{phi1[mu], phi2[lam]} as printed with phi2'", b12, e12_printed, true);

    let xi = v("xi");
    let g1 = smeared(&p1, "xi");
    let g2 = smeared(&p2, "xi");
    let q = DiffPoly::param("q");
    let d2d = xi.mul(&dx("D", 1)).add(&dx("xi", 1).mul(&v("D")).scale_int(2)).add(&q.mul(&dx("xi", 3)));
    let d2x = xi.mul(&dx("X", 1)).sub(&dx("xi", 1).mul(&v("X")));
    let gauge = vec![
        IdentityCheck::new("delta2 D", gauge_variation("D", &g2, &pairs)?, d2d, false),
        IdentityCheck::new("delta2 X", gauge_variation("X", &g2, &pairs)?, d2x, false),
        IdentityCheck::new("delta1 D", gauge_variation("D", &g1, &pairs)?, xi.mul(&v("X")), false),
        IdentityCheck::new("delta1 X", gauge_variation("X", &g1, &pairs)?, DiffPoly::zero(), false),
    ];
    Ok(FrozenChecks { brackets, printed_typo, gauge })
}

/// Identities of the alternative kinetic term `T`.
pub struct KineticTermChecks {
    /// `T′ − XG` as printed.
    pub t_prime_xg: IdentityCheck,
    /// `T′ − ½XG`, the identity that actually holds.
    pub t_prime_half_xg: IdentityCheck,
    pub t_t_bracket: IdentityCheck,
    pub t_g_bracket: IdentityCheck,
    pub d_bracket: IdentityCheck,
    pub x_bracket: IdentityCheck,
    /// `max |T|` on sampled `D = q S_x f`, `X = P(t)/f′` data.
    pub schwarzian_residual: f64,
}

impl KineticTermChecks {
    pub fn to_json(&self) -> Value {
        json!({
            "t_prime_equals_xg": self.t_prime_xg.to_json(),
            "t_prime_equals_half_xg": self.t_prime_half_xg.to_json(),
            "t_t_bracket": self.t_t_bracket.to_json(),
            "t_g_bracket": self.t_g_bracket.to_json(),
            "d_t_bracket": self.d_bracket.to_json(),
            "x_t_bracket": self.x_bracket.to_json(),
            "schwarzian_residual": self.schwarzian_residual,
        })
    }
}

pub fn kinetic_term_checks() -> Result<KineticTermChecks> {
    let pairs = CanonicalPairSet::new(&[("D", "X")])?;
    let t = alternative_kinetic();
    let g = diff_gauss();
    let x = v("X");
    let t_prime_xg = IdentityCheck::new("T' = X G", t.dx(), x.mul(&g), false);
    let t_prime_half_xg = IdentityCheck::new("T' = X G / 2", t.dx(), x.mul(&g).scale(&diffpoly::ratio(1, 2)), false);
    let tt = poisson_bracket(&smeared(&t, "mu"), &smeared(&t, "lam"), &pairs)?;
    let t_t_bracket = IdentityCheck::new("{T[mu], T[lam]} = 0", tt, DiffPoly::zero(), true);
    let tg = local_bracket(&t, &smeared(&g, "xi").density, &pairs, &["xi"])?;
    let t_g_bracket = IdentityCheck::new("{T, G[xi]} = -xi T'", tg, v("xi").mul(&t.dx()).neg(), false);
    let q = DiffPoly::param("q");
    let mu = v("mu");
    let d_expected = mu.mul(&v("D")).mul(&x).add(
        &q.mul(&dx("mu", 2).mul(&x).add(&dx("mu", 1).mul(&dx("X", 1)).scale_int(3)).add(&mu.mul(&dx("X", 2)).scale_int(3)))
            .scale(&diffpoly::ratio(1, 2)),
    );
    let d_bracket = IdentityCheck::new("{D, T[mu]}", gauge_variation("D", &smeared(&t, "mu"), &pairs)?, d_expected, false);
    let x_expected = mu.mul(&x.pow(2)).scale(&diffpoly::ratio(-1, 2));
    let x_bracket = IdentityCheck::new("{X, T[mu]}", gauge_variation("X", &smeared(&t, "mu"), &pairs)?, x_expected, false);
    let schwarzian_residual = schwarzian_solution_residual(&t)?;
    Ok(KineticTermChecks { t_prime_xg, t_prime_half_xg, t_t_bracket, t_g_bracket, d_bracket, x_bracket, schwarzian_residual })
}

/// `T` evaluated on `D = q S_x f`, `X = P(t)/f′` for two sample families:
/// `f = x + ε(t) sin x` and the first-type profile `f = tan(αx/2)`.
fn schwarzian_solution_residual(t: &DiffPoly) -> Result<f64> {
    use crate::taylor::{Binding, Taylor2};
    let q = 0.7;
    let params = BTreeMap::from([("q".to_string(), q)]);
    let mut worst: f64 = 0.0;
    let pts: Vec<(f64, f64)> = (0..12).map(|k| (0.1 * k as f64 - 0.4, 0.5 * k as f64 - 2.7)).collect();

    // f = x + ε(t) sin x, ε = 0.4 / (1 + t²); P = 1 + t/2.
    let eps = |t: &Taylor2| (t * t).add_scalar(1.0).recip().scale(0.4);
    let mut b: BTreeMap<String, Binding> = BTreeMap::new();
    b.insert(
        "D".into(),
        Box::new(move |t: &Taylor2, x: &Taylor2| {
            let e = eps(t);
            let f1 = (&e * &x.cos()).add_scalar(1.0);
            let f2 = -(&e * &x.sin());
            let f3 = -(&e * &x.cos());
            let r2 = &f2 / &f1;
            ((&f3 / &f1) - (&r2 * &r2).scale(1.5)).scale(q)
        }),
    );
    b.insert(
        "X".into(),
        Box::new(move |t: &Taylor2, x: &Taylor2| {
            let f1 = (&eps(t) * &x.cos()).add_scalar(1.0);
            &t.scale(0.5).add_scalar(1.0) / &f1
        }),
    );
    worst = worst.max(diffpoly::substitute_solution(t, &b, &params, &pts)?.max_abs);

    // f = tan(αx/2): S_x f = α²/2, 1/f′ = (2/α) cos²(αx/2).
    let alpha = 0.8;
    let mut b: BTreeMap<String, Binding> = BTreeMap::new();
    b.insert("D".into(), Box::new(move |t: &Taylor2, _x: &Taylor2| Taylor2::constant(t.order(), q * alpha * alpha / 2.0)));
    b.insert(
        "X".into(),
        Box::new(move |t: &Taylor2, x: &Taylor2| {
            let c = x.scale(alpha / 2.0).cos();
            &(&c * &c).scale(2.0 / alpha) * &(t * t).add_scalar(2.0)
        }),
    );
    worst = worst.max(diffpoly::substitute_solution(t, &b, &params, &pts)?.max_abs);
    Ok(worst)
}

/// Maxwell chain and gauge transformations.
pub struct MaxwellChecks {
    pub report: ConstraintChainReport,
    /// `δA_μ, δB^μ` generated by `ε₁B⁰ + ε₂∂ᵢBⁱ`.
    pub generated: Vec<(String, DiffPoly)>,
    /// After `ε₁ = ∂₀ε`, `ε₂ = −ε`: each `δA_μ − ∂_με`, and each `δB^μ`.
    pub residual: Vec<(String, DiffPoly)>,
}

impl MaxwellChecks {
    pub fn chain_ok(&self) -> bool {
        let r = &self.report;
        r.terminated
            && r.constraints.len() == 2
            && r.constraints[1].density == dx("B1", 1)
            && r.conditions.is_empty()
            && r.classes_strict.iter().all(|c| *c == ClassLabel::First)
    }

    pub fn gauge_ok(&self) -> bool {
        self.residual.iter().all(|(_, p)| p.is_zero())
    }
}

pub fn maxwell_checks() -> Result<MaxwellChecks> {
    let case = maxwell_case();
    let report = case.run()?;
    let pairs = case.pairs.clone().with_auxiliary(&["eps1", "eps2"])?;
    let gen_density = v("eps1").mul(&v("B0")).add(&v("eps2").mul(&dx("B1", 1)));
    let generator = SmearedFunctional { density: gen_density.clone(), smearing: "eps1".into() };
    let mut generated = Vec::new();
    let mut residual = Vec::new();
    let eps = DiffPoly::var("eps");
    for mu in 0..4 {
        for name in [format!("A{mu}"), format!("B{mu}")] {
            let d = gauge_variation(&name, &generator, &pairs)?;
            let sub = d
                .substitute_field("eps1", &eps.dt())?
                .substitute_field("eps2", &eps.neg())?;
            let target = if name.starts_with('A') {
                match mu {
                    0 => eps.dt(),
                    1 => eps.dx(),
                    _ => DiffPoly::zero(),
                }
            } else {
                DiffPoly::zero()
            };
            residual.push((name.clone(), sub.sub(&target)));
            generated.push((name, d));
        }
    }
    Ok(MaxwellChecks { report, generated, residual })
}

/// Expected DXN chain, compared exactly.
pub struct DxnChecks {
    pub report: ConstraintChainReport,
    pub phi2: bool,
    pub phi3: bool,
    pub phi4: bool,
    pub condition: bool,
    pub classes_admissible: bool,
    pub classes_strict: Vec<ClassLabel>,
    /// `{φ₃, φ₂[μ]} ≈ μ″X²` and `{φ₂, φ₃[μ]} ≈ −μ″X²`.
    pub cross_brackets: bool,
}

impl DxnChecks {
    pub fn all(&self) -> bool {
        self.phi2 && self.phi3 && self.phi4 && self.condition && self.classes_admissible && self.cross_brackets
    }
}

pub fn dxn_checks() -> Result<DxnChecks> {
    let report = dxn_case().run()?;
    let c = &report.constraints;
    let x2 = v("X").pow(2);
    let ok_prop = |k: usize, target: &DiffPoly| c.get(k).and_then(|e| e.raw.ratio_to(target)).is_some();
    let phi2 = c.len() > 1 && c[1].density == diff_gauss() && c[1].raw == diff_gauss();
    let phi3 = ok_prop(2, &dx("X", 1).mul(&v("X")));
    let phi4 = ok_prop(3, &dx("N", 2).mul(&x2));
    let condition = report.conditions.len() == 1 && report.conditions[0].raw.ratio_to(&dx("lam", 2).mul(&x2)).is_some();
    use ClassLabel::*;
    let classes_admissible = c.len() == 4 && report.classes_admissible == vec![First, Second, Second, First];
    let mu = &report.table_smearing;
    let mu2x2 = dx(mu, 2).mul(&x2);
    let cross_brackets = c.len() == 4
        && report.entry(2, 1).map(|e| e.strict == mu2x2).unwrap_or(false)
        && report.entry(1, 2).map(|e| e.strict == mu2x2.neg()).unwrap_or(false);
    Ok(DxnChecks {
        classes_strict: report.classes_strict.clone(),
        report,
        phi2,
        phi3,
        phi4,
        condition,
        classes_admissible,
        cross_brackets,
    })
}

/// `{F, G}` with `F`, `G` given as raw densities; used by property tests.
pub fn jacobi_residual(f: &DiffPoly, g: &DiffPoly, h: &DiffPoly, pairs: &CanonicalPairSet, extra: &[&str]) -> Result<DiffPoly> {
    let fg = bracket_densities(f, g, pairs, extra)?;
    let gh = bracket_densities(g, h, pairs, extra)?;
    let hf = bracket_densities(h, f, pairs, extra)?;
    Ok(bracket_densities(&fg, h, pairs, extra)?
        .add(&bracket_densities(&gh, f, pairs, extra)?)
        .add(&bracket_densities(&hf, g, pairs, extra)?)
        .normal_form_x())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dx_pairs() -> CanonicalPairSet {
        CanonicalPairSet::new(&[("D", "X")]).unwrap()
    }

    #[test]
    fn gauss_law_algebra_closes_on_itself() {
        let g = diff_gauss();
        let b = poisson_bracket(&smeared(&g, "mu"), &smeared(&g, "lam"), &dx_pairs()).unwrap();
        // Standard bracket: the algebra closes with structure (μ′λ − μλ′).
        let expected = dx("mu", 1).mul(&v("lam")).sub(&v("mu").mul(&dx("lam", 1))).mul(&g);
        assert!(b.equiv_x(&expected));
        let back = poisson_bracket(&smeared(&g, "lam"), &smeared(&g, "mu"), &dx_pairs()).unwrap();
        assert_eq!(back, b.neg());
    }

    #[test]
    fn weak_reduce_examples() {
        let g = diff_gauss();
        let n = v("N");
        let p = n.mul(&g.dx()).add(&dx("N", 1).mul(&g).scale_int(2)).add(&dx("X", 1).mul(&v("X")).scale_int(3));
        let r = weak_reduce(&p, &[g.clone()]);
        assert_eq!(r.remainder, dx("X", 1).mul(&v("X")).scale_int(3));
        assert!(weak_reduce(&g, &[g.clone()]).is_weakly_zero());
        let phi3 = dx("X", 1).mul(&v("X"));
        let p = n.mul(&phi3.dx()).sub(&dx("N", 1).mul(&phi3)).sub(&dx("N", 2).mul(&v("X").pow(2)));
        let r = weak_reduce(&p, &[g, phi3]);
        assert_eq!(r.remainder, dx("N", 2).mul(&v("X").pow(2)).neg());
    }

    #[test]
    fn dxn_chain_matches_expected_structure() {
        let c = dxn_checks().unwrap();
        assert!(c.phi2 && c.phi3 && c.phi4 && c.condition, "{}", c.report.to_table());
        assert_eq!(c.report.constraints[2].scale, diffpoly::ratio(1, 3));
        assert!(c.classes_admissible, "{}", c.report.to_table());
        assert!(c.cross_brackets);
        use ClassLabel::*;
        assert_eq!(c.classes_strict, vec![Second, Second, Second, Second]);
    }

    #[test]
    fn frozen_theory_is_first_class() {
        let r = frozen_case().run().unwrap();
        assert_eq!(r.constraints.len(), 2);
        assert!(r.classes_strict.iter().all(|c| *c == ClassLabel::First));
        let f = frozen_checks().unwrap();
        assert!(f.brackets[0].holds() && f.brackets[1].holds());
        assert_eq!(f.brackets[2].sign, Some(-1));
        assert!(!f.printed_typo.holds());
        let signs: Vec<Option<i32>> = f.gauge.iter().map(|g| g.sign).collect();
        assert_eq!(signs, vec![Some(-1), Some(-1), Some(1), Some(1)]);
    }

    #[test]
    fn maxwell_regression() {
        let m = maxwell_checks().unwrap();
        assert!(m.chain_ok(), "{}", m.report.to_table());
        assert!(m.gauge_ok());
    }

    #[test]
    fn alternative_kinetic_identities() {
        let k = kinetic_term_checks().unwrap();
        assert!(!k.t_prime_xg.holds());
        assert!(k.t_prime_half_xg.holds());
        assert!(k.t_t_bracket.holds());
        assert!(k.t_g_bracket.holds(), "{}", k.t_g_bracket.residual);
        assert!(k.d_bracket.holds() && k.x_bracket.holds());
        assert!(k.schwarzian_residual < 1e-10, "{}", k.schwarzian_residual);
    }

    #[test]
    fn uncovered_fields_are_rejected() {
        let f = smeared(&v("Y"), "mu");
        assert!(matches!(poisson_bracket(&f, &f, &dx_pairs()), Err(DiracError::Uncovered(_))));
    }

    #[test]
    fn custom_case_parses() {
        let spec = r#"{"hamiltonian": "X^2/2 + X*(N*D' + 2*N'*D + q*N''')", "pairs": [["D","X"],["N","pi"]],
                       "primaries": ["pi"], "multipliers": ["lam"]}"#;
        let r = custom_case(spec).unwrap().run().unwrap();
        assert_eq!(r.constraints.len(), 4);
    }
}

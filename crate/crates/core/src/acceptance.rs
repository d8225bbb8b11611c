//! End-to-end acceptance suite, criteria 1 to 14.
//!
//! Each criterion is a list of [`Part`]s with pinned tolerances. A part is
//! either expected to pass or is a documented failure: a printed claim that
//! the computation contradicts. Documented failures carry their own check of
//! *how* they fail, so a silent change in the mismatch is caught too.

use crate::circlefield::{CircleDiffeo, CircleField, FieldConfig};
use crate::dirac::{self, ClassLabel};
use crate::dynamics::{self, PhasePoint, ReducedSystem};
use crate::schwarzian;
use crate::testfields as tf;
use crate::transverse;
use crate::valgebra::{self, VirAdjoint, VirCoadjoint};
use crate::wilson::{self, Operator, WilsonConfig};
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expect {
    Pass,
    DocumentedFail,
}

#[derive(Clone, Debug, Serialize)]
pub struct Part {
    pub name: String,
    pub measured: String,
    pub tolerance: String,
    pub passed: bool,
    pub expect: Expect,
    /// For documented failures: the measured failure matches the recorded
    /// analysis. For expected passes this equals `passed`.
    pub as_documented: bool,
    pub note: Option<String>,
}

impl Part {
    fn check(name: &str, measured: f64, tol: f64) -> Self {
        Part {
            name: name.into(),
            measured: format!("{measured:.3e}"),
            tolerance: format!("< {tol:.0e}"),
            passed: measured < tol,
            expect: Expect::Pass,
            as_documented: measured < tol,
            note: None,
        }
    }

    fn exact(name: &str, ok: bool) -> Self {
        Part {
            name: name.into(),
            measured: if ok { "exact".into() } else { "mismatch".into() },
            tolerance: "exact".into(),
            passed: ok,
            expect: Expect::Pass,
            as_documented: ok,
            note: None,
        }
    }

    fn documented(mut self, as_documented: bool, note: &str) -> Self {
        self.expect = Expect::DocumentedFail;
        self.as_documented = as_documented && !self.passed;
        self.note = Some(note.into());
        self
    }

    fn noted(mut self, note: &str) -> Self {
        self.note = Some(note.into());
        self
    }

    fn error(name: &str, e: impl std::fmt::Display) -> Self {
        Part {
            name: name.into(),
            measured: format!("error: {e}"),
            tolerance: "-".into(),
            passed: false,
            expect: Expect::Pass,
            as_documented: false,
            note: None,
        }
    }

    pub fn ok(&self) -> bool {
        match self.expect {
            Expect::Pass => self.passed,
            Expect::DocumentedFail => self.as_documented,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    /// Every expected pass holds and every documented failure fails as recorded.
    DocumentedFail,
    Fail,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub parts: Vec<Part>,
    /// Wall time; kept out of the JSON so reruns are byte-identical.
    #[serde(skip)]
    pub seconds: f64,
}

impl CriterionResult {
    pub fn status(&self) -> Status {
        if self.parts.iter().all(|p| p.passed) {
            Status::Pass
        } else if self.parts.iter().all(|p| p.ok()) {
            Status::DocumentedFail
        } else {
            Status::Fail
        }
    }

    pub fn line(&self) -> String {
        let tag = match self.status() {
            Status::Pass => "PASS",
            Status::DocumentedFail => "FAIL (documented)",
            Status::Fail => "FAIL",
        };
        let failing: Vec<&str> = self.parts.iter().filter(|p| !p.passed).map(|p| p.name.as_str()).collect();
        if failing.is_empty() {
            format!("criterion {:>2} {:<28} {tag}", self.id, self.name)
        } else {
            format!("criterion {:>2} {:<28} {tag}: {}", self.id, self.name, failing.join("; "))
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "id": self.id,
            "name": self.name,
            "status": self.status(),
            "parts": self.parts,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct AcceptanceConfig {
    pub seed: u64,
    /// Bandlimit of the random fields and diffeomorphisms.
    pub bandlimit: usize,
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        AcceptanceConfig { seed: 20_240_917, bandlimit: 16 }
    }
}

pub const CRITERIA: [(u32, &str); 14] = [
    (1, "schwarzian"),
    (2, "pairing-invariance"),
    (3, "monodromy"),
    (4, "hill-products"),
    (5, "dirac-dxn"),
    (6, "frozen-theory"),
    (7, "alternative-kinetic"),
    (8, "maxwell"),
    (9, "transverse"),
    (10, "sigma-lift"),
    (11, "closed-forms"),
    (12, "reduced-dynamics"),
    (13, "kdv"),
    (14, "tw-relation"),
];

pub fn run_all(cfg: &AcceptanceConfig) -> Vec<CriterionResult> {
    CRITERIA.iter().map(|(id, _)| run_criterion(*id, cfg).expect("ids come from CRITERIA")).collect()
}

pub fn run_criterion(id: u32, cfg: &AcceptanceConfig) -> Option<CriterionResult> {
    let name = CRITERIA.iter().find(|(i, _)| *i == id)?.1;
    let start = std::time::Instant::now();
    let parts = match id {
        1 => schwarzian_suite(cfg),
        2 => pairing_suite(cfg),
        3 => monodromy_suite(cfg),
        4 => hill_product_suite(cfg),
        5 => dxn_suite(),
        6 => frozen_suite(),
        7 => kinetic_suite(),
        8 => maxwell_suite(),
        9 => transverse_suite(),
        10 => sigma_suite(),
        11 => closed_form_suite(),
        12 => reduced_suite(),
        13 => kdv_suite(),
        14 => tw_suite(cfg),
        _ => unreachable!(),
    };
    Some(CriterionResult { id, name, parts, seconds: start.elapsed().as_secs_f64() })
}

/// Summary table, one line per criterion.
pub fn summary(results: &[CriterionResult]) -> String {
    results.iter().map(|r| r.line()).collect::<Vec<_>>().join("\n")
}

fn max_over<E: std::fmt::Display>(name: &str, tol: f64, items: impl Iterator<Item = Result<f64, E>>) -> Part {
    let mut worst = 0.0f64;
    for r in items {
        match r {
            Ok(v) => worst = worst.max(if v.is_nan() { f64::INFINITY } else { v }),
            Err(e) => return Part::error(name, e),
        }
    }
    Part::check(name, worst, tol)
}

// ---------------------------------------------------------------------------

fn schwarzian_suite(cfg: &AcceptanceConfig) -> Vec<Part> {
    let fc = FieldConfig::default();
    let mut r = tf::rng(cfg.seed);
    let n = cfg.bandlimit;
    let pairs: Vec<(CircleDiffeo, CircleDiffeo)> =
        (0..20).map(|_| (tf::random_diffeo(&mut r, 4, 0.3, n), tf::random_diffeo(&mut r, 4, 0.3, n))).collect();
    let comp = max_over(
        "composition identity (20 pairs)",
        1e-8,
        pairs.iter().map(|(g, f)| schwarzian::composition_residual(g, f, &fc)),
    );
    let mut mob = Vec::new();
    for _ in 0..10 {
        // (a x + b)/(c x + d) with the pole outside [−1, 1].
        let (a, b, c) = (r.gen_range(0.5..2.0), r.gen_range(-1.0..1.0), r.gen_range(-0.4..0.4));
        let d = 1.0 + r.gen_range(0.0..1.0);
        mob.push(move |x: f64| (a * x + b) / (c * x + d));
    }
    let mobius = max_over(
        "Mobius kernel (10 maps)",
        1e-9,
        mob.iter().map(|f| {
            schwarzian::schwarzian_interval(f, -1.0, 1.0, 41).map(|s| s.value.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        }),
    );
    let tan = max_over(
        "S(tan) = 2 (interval)",
        1e-10,
        std::iter::once(
            schwarzian::schwarzian_interval(f64::tan, -0.6, 0.6, 41)
                .map(|s| s.value.iter().fold(0.0f64, |m, v| m.max((v - 2.0).abs()))),
        ),
    );
    vec![comp, mobius, tan]
}

fn pairing_suite(cfg: &AcceptanceConfig) -> Vec<Part> {
    let fc = FieldConfig::default();
    let mut r = tf::rng(cfg.seed + 1);
    let n = cfg.bandlimit;
    let vir = valgebra::Virasoro::default();
    let mut inf = 0.0f64;
    for _ in 0..20 {
        let b = VirCoadjoint::new(tf::random_field(&mut r, 5, 1.0, n), r.gen_range(-2.0..2.0));
        let x = VirAdjoint { xi: tf::random_field(&mut r, 5, 1.0, n), a: r.gen_range(-1.0..1.0) };
        let y = VirAdjoint { xi: tf::random_field(&mut r, 5, 1.0, n), a: r.gen_range(-1.0..1.0) };
        // ⟨ad*_x b, y⟩ + ⟨b, [x, y]⟩ = 0.
        // The variation carries no central component.
        let du = VirCoadjoint::new(vir.coadjoint_infinitesimal(&b, &x).u, 0.0);
        let lhs = valgebra::pairing(&du, &y) + valgebra::pairing(&b, &vir.bracket(&x, &y));
        inf = inf.max(lhs.abs());
    }
    let mut fin = Vec::new();
    for _ in 0..20 {
        let b = VirCoadjoint::new(tf::random_field(&mut r, 4, 1.0, n), r.gen_range(-2.0..2.0));
        let x = VirAdjoint { xi: tf::random_field(&mut r, 4, 1.0, n), a: r.gen_range(-1.0..1.0) };
        let f = tf::random_diffeo(&mut r, 3, 0.3, n);
        fin.push((|| -> Result<f64, valgebra::AlgebraError> {
            let bf = valgebra::coadjoint_active(&b, &f, &fc)?;
            let xf = valgebra::adjoint_action(&x, &f, &fc)?;
            Ok((valgebra::pairing(&bf, &xf) - valgebra::pairing(&b, &x)).abs())
        })());
    }
    vec![
        Part::check("infinitesimal invariance (20 triples)", inf, 1e-10),
        max_over("finite invariance (20 elements)", 1e-8, fin.into_iter()),
    ]
}

fn monodromy_suite(cfg: &AcceptanceConfig) -> Vec<Part> {
    let wc = WilsonConfig::default();
    let fc = FieldConfig::default();
    let mut r = tf::rng(cfg.seed + 2);
    let mut dets = Vec::new();
    // Amplitude 0.5 keeps ‖M‖ below ~3e3 on every seed. Far more hyperbolic
    // orbits push det − 1 to the f64 floor eps‖M‖², which passes 1e-8 near
    // ‖M‖ ≈ 6e3 whatever the integrator does.
    for _ in 0..30 {
        let d = tf::random_field(&mut r, 4, 0.5, 8);
        let q = r.gen_range(0.5..1.5);
        for op in [Operator::Hill, Operator::Nabla3] {
            dets.push(wilson::monodromy(op, &d, q, &wc).map(|m| (m.det() - 1.0).abs()));
        }
    }
    let q = 1.3;
    let sweep = (0..10).map(|k| {
        let w = 0.25 + 0.2 * k as f64;
        let ode = wilson::monodromy_nabla3(&CircleField::constant(w * w * q / 2.0, 2), q, &wc)?;
        Ok::<f64, wilson::WilsonError>(ode.distance(&wilson::first_type_closed_form(w)?))
    });
    let integer = [1.0, 2.0, 3.0].map(|w: f64| {
        wilson::monodromy_nabla3(&CircleField::constant(w * w / 2.0, 2), 1.0, &wc).map(|m| m.identity_defect())
    });
    let mut inv = Vec::new();
    for _ in 0..10 {
        let d = CircleField::constant(r.gen_range(0.05..1.5), 4);
        let phi = tf::random_diff0(&mut r, 3, 0.3, cfg.bandlimit);
        inv.push(wilson::diff0_invariance_residual(Operator::Nabla3, &d, 1.0, &phi, &fc, &wc));
    }
    let bad = tf::second_jet_violator(0.3, 4);
    let negative = wilson::diff0_invariance(Operator::Nabla3, &CircleField::constant(0.3, 4), 1.0, &bad, &fc, &wc);
    let neg = match negative {
        Ok(rep) => Part {
            name: "negative control (phi''(0) != 0)".into(),
            measured: format!("{:.3e}", rep.residual),
            tolerance: "> 1e-3".into(),
            passed: rep.residual > 1e-3,
            expect: Expect::Pass,
            as_documented: rep.residual > 1e-3,
            note: None,
        },
        Err(e) => Part::error("negative control (phi''(0) != 0)", e),
    };
    vec![
        max_over("det M = 1 (30 potentials, both operators)", 1e-8, dets.into_iter()),
        max_over("closed form vs ODE (10-point omega sweep)", 1e-7, sweep),
        max_over("omega in {1,2,3} gives identity", 1e-7, integer.into_iter()),
        max_over("Diff0 invariance (10 constants)", 1e-6, inv.into_iter()),
        neg,
    ]
}

fn hill_product_suite(cfg: &AcceptanceConfig) -> Vec<Part> {
    let mut r = tf::rng(cfg.seed + 3);
    let wc = WilsonConfig::default();
    let items: Vec<_> = (0..5)
        .map(|_| {
            let d = tf::random_field(&mut r, 4, 0.6, 8);
            let q = r.gen_range(0.5..1.5);
            wilson::hill_product_residual(&d, q, &wc).map(|p| p.residual())
        })
        .collect();
    vec![max_over("Hill products solve nabla3 (5 potentials)", 1e-8, items.into_iter())]
}

fn dxn_suite() -> Vec<Part> {
    match dirac::dxn_checks() {
        Err(e) => vec![Part::error("DXN chain", e)],
        Ok(c) => vec![
            Part::exact("phi2 = XD' + 2X'D + qX'''", c.phi2),
            Part::exact("phi3 proportional to X'X", c.phi3),
            Part::exact("phi4 proportional to N''X^2", c.phi4),
            Part::exact("multiplier condition proportional to lam''X^2", c.condition),
            Part::exact("{phi3, phi2[mu]} = mu''X^2 weakly", c.cross_brackets),
            Part::exact("classes {pi, phi4} first, {phi2, phi3} second", c.classes_admissible).noted(
                "classification with smearings restricted to the class that keeps the chain consistent; \
                 with unrestricted smearings every constraint is second class",
            ),
        ],
    }
}

fn frozen_suite() -> Vec<Part> {
    let f = match dirac::frozen_checks() {
        Ok(f) => f,
        Err(e) => return vec![Part::error("frozen theory", e)],
    };
    let sign_flip = |c: &dirac::IdentityCheck| c.sign == Some(-1);
    let mut parts = vec![
        Part::exact("{phi1, phi1} = 0", f.brackets[0].holds()),
        Part::exact("{phi1, phi2} with phi1' (corrected display)", f.brackets[1].holds()),
        Part::exact("{phi1, phi2} as displayed with phi2'", f.printed_typo.holds())
            .documented(!f.printed_typo.holds_up_to_sign(), "the displayed phi2' cannot be right; phi1' reproduces exactly"),
        Part::exact("{phi2, phi2} = (mu lam' - mu' lam) phi2", f.brackets[2].holds())
            .documented(sign_flip(&f.brackets[2]), "reproduced with the opposite overall sign under {D, X} = delta"),
    ];
    for (i, g) in f.gauge.iter().enumerate() {
        let p = Part::exact(&g.name, g.holds());
        parts.push(if i < 2 {
            p.documented(sign_flip(g), "reproduced with the opposite overall sign under {D, X} = delta")
        } else {
            p
        });
    }
    parts
}

fn kinetic_suite() -> Vec<Part> {
    match dirac::kinetic_term_checks() {
        Err(e) => vec![Part::error("alternative kinetic term", e)],
        Ok(k) => vec![
            Part::exact("T' - XG = 0", k.t_prime_xg.holds())
                .documented(k.t_prime_half_xg.holds(), "the identity that holds is T' = XG/2"),
            Part::exact("{T[mu], T[lam]} = 0", k.t_t_bracket.holds()),
            Part::exact("{T, G[xi]} = -xi T'", k.t_g_bracket.holds()),
            Part::exact("{D, T[mu]}", k.d_bracket.holds()),
            Part::exact("{X, T[mu]}", k.x_bracket.holds()),
            Part::check("T vanishes on D = q Sf, X = P/f'", k.schwarzian_residual, 1e-10),
        ],
    }
}

fn maxwell_suite() -> Vec<Part> {
    match dirac::maxwell_checks() {
        Err(e) => vec![Part::error("Maxwell", e)],
        Ok(m) => vec![
            Part::exact("B0 -> d_i B^i, chain terminates", m.chain_ok()),
            Part::exact("both constraints first class", m.report.classes_strict.iter().all(|c| *c == ClassLabel::First)),
            Part::exact("residual gauge delta A_mu = d_mu eps", m.gauge_ok()),
        ],
    }
}

fn transverse_suite() -> Vec<Part> {
    let mut parts = Vec::new();
    match transverse::transverse_checks() {
        Err(e) => parts.push(Part::error("transverse", e)),
        Ok(c) => {
            parts.push(Part::exact("momentum fixed point (full theory)", c.fixed_point_full));
            parts.push(Part::exact("chiral FE12 = 0", c.chiral_fe12_zero));
            parts.push(Part::exact("Gauss law from the N variation", c.gauss_law_from_n));
            parts.push(Part::exact("printed chiral Lagrangian", c.chiral_lagrangian_printed.exact()));
            for cmp in &c.printed_fe {
                let name = format!("printed BLRY {}", cmp.name);
                let mut p = Part::exact(&name, cmp.proportional());
                if let Some(r) = &cmp.ratio {
                    if !cmp.computed.is_zero() {
                        p = p.noted(&format!("reproduced up to the constant factor {r}"));
                    }
                    parts.push(p);
                } else {
                    let note = if cmp.name.starts_with("FE12") {
                        "agrees except for the sign of the linear-center term"
                    } else {
                        "coefficients disagree; the Euler equations of the displayed chiral Lagrangian \
                         match the computed equations instead"
                    };
                    let documented = if cmp.name.starts_with("FE12") {
                        cmp.computed
                            .substitute_param("b", &crate::diffpoly::DiffPoly::param("b").neg())
                            .map(|m| m == cmp.expected)
                            .unwrap_or(false)
                    } else {
                        c.printed_lagrangian_fe.iter().all(|x| x.exact())
                    };
                    parts.push(p.documented(documented, note));
                }
            }
        }
    }
    match transverse::ym_from_km_check() {
        Err(e) => parts.push(Part::error("YM from KM", e)),
        Ok(y) => parts.push(Part::exact("YM: pi = F iff c = 1", y.equality_iff_c_is_one())),
    }
    parts
}

fn sigma_suite() -> Vec<Part> {
    match transverse::sigma_lift_checks() {
        Err(e) => vec![Part::error("sigma lift", e)],
        Ok(s) => vec![
            Part::exact("1D reduction vanishes under the charge condition", s.reduction_1d.is_zero()),
            Part::exact("(a, e) = (2, -1): Delta_11 = 0", s.working_delta[2].is_zero()),
            Part::exact("Delta_01 needs Gamma^1_01 = 0", s.delta01_needs_g101),
            Part::exact("Delta_00 needs Gamma^1_00 = 0", s.delta00_needs_g100),
            Part::exact("generic Delta matches the displayed formula", s.generic_display_residual.iter().all(|r| r.is_zero())),
            Part::exact("b = 1 = c = -d case matches", s.simple_case_residual.iter().all(|r| r.is_zero())),
        ],
    }
}

fn closed_form_suite() -> Vec<Part> {
    let mut parts = Vec::new();
    for case in dynamics::CLOSED_FORM_CASES.iter().chain(&dynamics::CORRECTED_CASES) {
        let name = format!("closed form {case}");
        match dynamics::verify_closed_form(case) {
            Err(e) => parts.push(Part::error(&name, e)),
            Ok(r) => {
                let p = Part::check(&name, r.max_residual(), 1e-8);
                parts.push(match *case {
                    "chiral-alpha0" => p.documented(
                        r.max_printed_residual().is_some_and(|v| v > 1e-2),
                        "solves neither the derived nor the displayed equation; \
                         the derived decay rate is k^2 = (1 + 2b)/(6q)",
                    ),
                    "chiral-q0" => p.documented(
                        r.max_printed_residual().is_some_and(|v| v > 1e-2),
                        "the displayed constant 3/(4a) must be -2 c1^2 c2^2 for the derived equation",
                    ),
                    _ => p,
                });
            }
        }
    }
    parts
}

fn reduced_suite() -> Vec<Part> {
    let sys = ReducedSystem::default();
    let mut parts = Vec::new();
    let mut qdev = 0.0f64;
    let mut pdev = 0.0f64;
    let mut pdev_big = f64::INFINITY;
    for &q in &[0.05, 0.3, 0.7, 1.2, 2.0, 3.5, 8.0] {
        for &p in &[-1.3, 0.2, 0.9] {
            for &c in &[0.5, 1.0, 2.5] {
                match dynamics::reduced_rhs(PhasePoint { q, p }, &ReducedSystem::with_c(c)) {
                    Ok(r) => {
                        qdev = qdev.max(r.qdot_deviation());
                        pdev = pdev.max(r.pdot_deviation_4pi3());
                        pdev_big = pdev_big.min(r.pdot_deviation_4pi_cubed());
                    }
                    Err(e) => return vec![Part::error("reduced rhs", e)],
                }
            }
        }
    }
    parts.push(Part::check("Qdot from (H, omega) vs printed Z-form", qdev, 1e-12));
    parts.push(Part::check("Pdot from (H, omega) vs 4 pi^3 printing", pdev, 1e-12));
    parts.push(
        Part::check("Pdot discrepancy: (4 pi)^3 printing deviates by 15/16", (pdev_big - 15.0 / 16.0).abs(), 1e-12)
            .noted("measured relative deviation of the (4 pi)^3 printing; the 4 pi^3 printing is the consistent one"),
    );
    let runs = [
        (PhasePoint { q: 3.0, p: -0.1 }, 1.0),
        (PhasePoint { q: 0.5, p: 0.1 }, 1.0),
        (PhasePoint { q: 3.0, p: 0.1 }, 0.09),
    ];
    let drift = max_over(
        "relative H drift (3 trajectories)",
        1e-8,
        runs.iter().map(|(p0, t)| dynamics::integrate_reduced(*p0, &sys, *t, 0.01).map(|tr| tr.relative_h_drift())),
    );
    parts.push(drift.noted("Q=3, P=0.1 escapes to infinity near t = 0.094, so that run stops at t = 0.09"));
    let facts = dynamics::reduced_facts(&sys);
    let jet = facts.z_jet_at_one;
    let mut z = Part::check("Z(1) = Z'(1) = Z''(1) = 0", jet[..3].iter().fold(0.0f64, |m, v| m.max(v.abs())), 1e-12);
    if jet[3].abs() < 1e-3 {
        // Not a triple zero after all if Z''' vanishes too.
        z.passed = false;
        z.as_documented = false;
    }
    parts.push(z.noted(&format!("Z'''(1) = {:.6}", jet[3])));
    parts.push(Part::check("lim omega(Q -> 0) = 1/8 at Q = 1e-6", (facts.omega_near_zero - 0.125).abs(), 1e-3).documented(
        (facts.omega_deep - 0.125).abs() < 1e-3,
        "omega - 1/8 decays like 1/|ln Q|; omega(1e-6) = 0.1765, and 1e-3 is reached only near Q = 1e-300",
    ));
    let grows = facts.omega_near_one.windows(2).all(|w| w[1].1 > 10.0 * w[0].1);
    parts.push(
        Part::exact("omega(Q -> 1) diverges (printed limit 1 does not hold)", grows)
            .noted("Z has a triple zero at Q = 1, so omega grows like (Q - 1)^-6"),
    );
    parts
}

fn kdv_suite() -> Vec<Part> {
    let mut parts = Vec::new();
    match dynamics::soliton_check(36.0, 96, 2.5e-5) {
        Err(e) => parts.push(Part::error("soliton", e)),
        Ok(s) => {
            parts.push(Part::check("soliton shape error over one period", s.shape_error, 1e-4));
            parts.push(Part::check("mean conservation", s.mean_drift, 1e-14));
            parts.push(Part::check("L2 drift per unit time", s.l2_drift_per_time, 1e-6));
        }
    }
    parts.push(Part::exact(
        "EP with X = D maps to KdV (tau = -t/2, q = 1/2)",
        dynamics::ep_to_kdv_identity().map(|p| p.is_zero()).unwrap_or(false),
    ));
    parts
}

fn tw_suite(cfg: &AcceptanceConfig) -> Vec<Part> {
    let fc = FieldConfig::default();
    let mut r = tf::rng(cfg.seed + 14);
    let pairs: Vec<_> = (0..10)
        .map(|_| (tf::random_diffeo(&mut r, 3, 0.3, cfg.bandlimit), tf::random_field(&mut r, 3, 0.5, cfg.bandlimit)))
        .collect();
    let tw = max_over(
        "tw_projective_residual (10 pairs)",
        1e-8,
        pairs.iter().map(|(x, g)| schwarzian::tw_projective_residual(x, g, &fc)),
    );
    let geo = max_over(
        "geodetic Gamma = 0 reduces to Sx",
        1e-8,
        pairs.iter().map(|(x, _)| {
            let routes = schwarzian::tw_routes(x, &CircleField::zeros(4), &fc)?;
            let sx = schwarzian::schwarzian(x, &fc)?;
            Ok::<f64, crate::circlefield::FieldError>((&routes.riccati - &sx).sup_norm())
        }),
    );
    vec![tw, geo]
}

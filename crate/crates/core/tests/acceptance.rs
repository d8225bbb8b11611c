//! Acceptance gate: one line per criterion, then the expected status pattern.
//!
//! Criteria 6, 7, 9, 11 and 12 contain printed claims that the computation
//! contradicts. Those parts must keep failing in the recorded way; every
//! other part must pass.

use coadj_core::acceptance::{run_all, AcceptanceConfig, Expect, Status};
use std::io::Write;

const DOCUMENTED: [u32; 5] = [6, 7, 9, 11, 12];

#[test]
fn acceptance_criteria() {
    let results = run_all(&AcceptanceConfig::default());
    // Written straight to stdout so the table survives output capture.
    let mut out = std::io::stdout().lock();
    writeln!(out).unwrap();
    for r in &results {
        writeln!(out, "{}", r.line()).unwrap();
    }
    for r in &results {
        for p in r.parts.iter().filter(|p| !p.passed) {
            writeln!(out, "    criterion {} / {}: measured {} (want {})", r.id, p.name, p.measured, p.tolerance).unwrap();
        }
    }
    drop(out);

    assert_eq!(results.len(), 14);
    for r in &results {
        let want = if DOCUMENTED.contains(&r.id) { Status::DocumentedFail } else { Status::Pass };
        assert_eq!(r.status(), want, "criterion {}: {}", r.id, r.line());
        for p in &r.parts {
            match p.expect {
                Expect::Pass => assert!(p.passed, "criterion {} part {:?} regressed", r.id, p.name),
                Expect::DocumentedFail => {
                    assert!(!p.passed, "criterion {} part {:?} now passes; update the record", r.id, p.name);
                    assert!(p.as_documented, "criterion {} part {:?} fails differently than recorded", r.id, p.name);
                }
            }
        }
    }
}

#[test]
fn documented_failures_are_exactly_the_recorded_ones() {
    let results = run_all(&AcceptanceConfig::default());
    let mut names: Vec<(u32, String)> = results
        .iter()
        .flat_map(|r| r.parts.iter().filter(|p| p.expect == Expect::DocumentedFail).map(move |p| (r.id, p.name.clone())))
        .collect();
    names.sort();
    let want: Vec<(u32, &str)> = vec![
        (6, "delta2 D"),
        (6, "delta2 X"),
        (6, "{phi1, phi2} as displayed with phi2'"),
        (6, "{phi2, phi2} = (mu lam' - mu' lam) phi2"),
        (7, "T' - XG = 0"),
        (9, "printed BLRY FE11 chiral"),
        (9, "printed BLRY FE11 full-temporal"),
        (9, "printed BLRY FE12 full-temporal"),
        (9, "printed BLRY FE22 chiral"),
        (11, "closed form chiral-alpha0"),
        (11, "closed form chiral-q0"),
        (12, "lim omega(Q -> 0) = 1/8 at Q = 1e-6"),
    ];
    let got: Vec<(u32, &str)> = names.iter().map(|(i, n)| (*i, n.as_str())).collect();
    assert_eq!(got, want);
}

#[test]
fn results_serialize() {
    let cfg = AcceptanceConfig::default();
    let r = coadj_core::acceptance::run_criterion(4, &cfg).unwrap();
    let v = r.to_json();
    assert_eq!(v["id"], 4);
    assert_eq!(v["status"], "pass");
    assert!(coadj_core::acceptance::run_criterion(15, &cfg).is_none());
}

use std::sync::OnceLock;

use ineqforge::catalog::{self, CatalogEntry, CheckConfig, CheckReport, Status, Verdict};

fn entries() -> &'static [CatalogEntry] {
    static E: OnceLock<Vec<CatalogEntry>> = OnceLock::new();
    E.get_or_init(|| catalog::builtin_catalog().expect("builtin manifest loads"))
}

fn reports() -> &'static [CheckReport] {
    static R: OnceLock<Vec<CheckReport>> = OnceLock::new();
    R.get_or_init(|| catalog::check_all_parallel(entries(), &CheckConfig::default(), 4).unwrap())
}

fn report(id: &str) -> &'static CheckReport {
    let primary = catalog::lookup(entries(), id).unwrap().id().to_string();
    reports().iter().find(|r| r.entry_id == primary).unwrap()
}

#[test]
fn manifest_shape() {
    let e = entries();
    assert!(e.len() >= 75);
    let p241 = catalog::lookup(e, "P2.4.1").unwrap();
    assert_eq!(p241.chain.to_string(), "sinh(x) / x < 3 / (2 + cos(x)) < (2 + cosh(x)) / 3");
    assert_eq!(p241.domain_text(), "x:(0,pi / 2)");
    assert_eq!(catalog::lookup(e, "P1.9").unwrap().chain.exprs.len(), 7);
    let misprints: Vec<&CatalogEntry> = e.iter().filter(|x| x.status == Status::MisprintSuspected).collect();
    assert!(misprints.len() >= 6);
    for m in misprints {
        let base = m.id().strip_suffix("-as-printed").expect("misprint ids end in -as-printed");
        let fixed = catalog::lookup(e, base).unwrap();
        assert_eq!(fixed.status, Status::Corrected, "{base}");
        assert!(fixed.correction_note.is_some(), "{base}");
    }
    let mut ids: Vec<&str> = e.iter().flat_map(|x| x.ids.iter().map(String::as_str)).collect();
    let n = ids.len();
    ids.sort_unstable();
    ids.dedup();
    assert_eq!(ids.len(), n, "ids are unique");
}

#[test]
fn every_entry_meets_its_expectation() {
    let bad: Vec<String> = reports()
        .iter()
        .filter(|r| !r.as_expected() || r.n_domain_errors > 0)
        .map(|r| format!("{} {} ({} domain errors)", r.entry_id, r.verdict, r.n_domain_errors))
        .collect();
    assert!(bad.is_empty(), "{bad:?}");
    for r in reports() {
        assert_eq!(r.verdict == Verdict::Violated, !r.violations.is_empty(), "{}", r.entry_id);
        if r.verdict == Verdict::Holds {
            assert!(r.min_margin.unwrap() > 0.0, "{}", r.entry_id);
        }
    }
}

#[test]
fn documented_examples() {
    assert_eq!(report("P2.4.3").verdict, Verdict::Holds);
    assert!(report("P2.4.3").min_margin.unwrap() > 0.0);
    assert_eq!(report("P2.4.1").verdict, Verdict::Holds);
    assert_eq!(report("P2.5.3").verdict, Verdict::Holds);
    assert_eq!(report("P2.5.5").verdict, Verdict::Holds);
    assert_eq!(report("P3.29-as-printed").verdict, Verdict::Violated);

    // sin x/x + (sinh x/x)^q tends to 2 < q + 1 at the left end
    let r = report("P9.3.2-as-printed");
    assert_eq!(r.verdict, Verdict::Violated);
    let near_zero = r.violations.iter().any(|v| v.point.get("x").is_some_and(|&x| x < 0.05));
    assert!(near_zero, "{:?}", r.violations);

    // refinement spot-checks for the arcsin(tanh x) family
    assert_eq!(report("P6.3.1").verdict, Verdict::Holds);
    assert_eq!(report("P6.3.2").verdict, Verdict::Holds);
}

#[test]
fn runs_are_deterministic() {
    let cfg = CheckConfig::default().with_samples(301);
    let subset = &entries()[..40];
    let a = catalog::check_all(subset, &cfg).unwrap();
    let b = catalog::check_all_parallel(subset, &cfg, 3).unwrap();
    assert_eq!(a, b);
}

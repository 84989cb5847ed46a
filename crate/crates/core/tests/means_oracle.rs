use ineqforge::means::{eval_mean_normalized, MeanKind};

// Generated by tests/oracle/means_oracle.py at 50 significant digits.
const TABLE: &str = include_str!("oracle/normalized_means.csv");

#[test]
fn normalized_means_match_high_precision_oracle() {
    let mut worst = (0.0f64, String::new());
    let mut rows = 0;
    for line in TABLE.lines().skip(1) {
        let mut it = line.split(',');
        let (u, kind, want) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
        let u: f64 = u.parse().unwrap();
        let kind: MeanKind = kind.parse().unwrap();
        let want: f64 = want.parse().unwrap();
        let got = eval_mean_normalized(kind, u).unwrap();
        let err = ((got - want) / want).abs();
        if err > worst.0 {
            worst = (err, format!("{kind} at u={u}: {got} vs {want}"));
        }
        rows += 1;
    }
    assert_eq!(rows, 280);
    assert!(worst.0 <= 1e-13, "worst relative error {:e}: {}", worst.0, worst.1);
}

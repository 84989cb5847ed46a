//! Bivariate means and the trigonometric / hyperbolic parametrizations.
//!
//! Every mean is homogeneous of degree one, so evaluation goes through the
//! scale-free form `m(u) = Mean(1 + u, 1 - u)` with `u = (a - b)/(a + b)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeanError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unknown mean kind `{0}`")]
    UnknownKind(String),
}

pub type Result<T> = std::result::Result<T, MeanError>;

/// Below this |u| the singular kinds switch to their even Taylor series.
pub const SERIES_SWITCHOVER: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MeanKind {
    A,
    G,
    H,
    Q,
    /// Power mean with exponent k; `Ak(0)` is the geometric mean.
    Ak(f64),
    L,
    I,
    P,
    T,
    M,
    S,
    X,
    Y,
}

impl MeanKind {
    pub const FIXED: [MeanKind; 12] = [
        MeanKind::A,
        MeanKind::G,
        MeanKind::H,
        MeanKind::Q,
        MeanKind::L,
        MeanKind::I,
        MeanKind::P,
        MeanKind::T,
        MeanKind::M,
        MeanKind::S,
        MeanKind::X,
        MeanKind::Y,
    ];
}

impl fmt::Display for MeanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MeanKind::A => "A",
            MeanKind::G => "G",
            MeanKind::H => "H",
            MeanKind::Q => "Q",
            MeanKind::Ak(k) => return write!(f, "Ak({k})"),
            MeanKind::L => "L",
            MeanKind::I => "I",
            MeanKind::P => "P",
            MeanKind::T => "T",
            MeanKind::M => "M",
            MeanKind::S => "S",
            MeanKind::X => "X",
            MeanKind::Y => "Y",
        };
        f.write_str(s)
    }
}

impl FromStr for MeanKind {
    type Err = MeanError;

    /// Accepts the single-letter tags and `Ak(<number>)` or `Ak(<num>/<num>)`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let kind = match t {
            "A" => MeanKind::A,
            "G" => MeanKind::G,
            "H" => MeanKind::H,
            "Q" => MeanKind::Q,
            "L" => MeanKind::L,
            "I" => MeanKind::I,
            "P" => MeanKind::P,
            "T" => MeanKind::T,
            "M" => MeanKind::M,
            "S" => MeanKind::S,
            "X" => MeanKind::X,
            "Y" => MeanKind::Y,
            _ => {
                let inner = t
                    .strip_prefix("Ak(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| MeanError::UnknownKind(t.to_string()))?;
                let k = parse_exponent(inner).ok_or_else(|| MeanError::UnknownKind(t.to_string()))?;
                MeanKind::Ak(k)
            }
        };
        Ok(kind)
    }
}

fn parse_exponent(s: &str) -> Option<f64> {
    let k = match s.split_once('/') {
        Some((n, d)) => n.trim().parse::<f64>().ok()? / d.trim().parse::<f64>().ok()?,
        None => s.trim().parse::<f64>().ok()?,
    };
    k.is_finite().then_some(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositivePair {
    a: f64,
    b: f64,
}

impl PositivePair {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
            return Err(MeanError::Domain(format!("pair ({a}, {b}) is not positive and finite")));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn normalized(&self) -> NormalizedPair {
        let (hi, lo) = ordered(self.a, self.b);
        NormalizedPair {
            center: hi / 2.0 + lo / 2.0,
            u: (self.a - self.b) / (self.a + self.b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedPair {
    pub center: f64,
    pub u: f64,
}

impl NormalizedPair {
    pub fn to_pair(&self) -> Result<PositivePair> {
        if !(self.center > 0.0 && self.u.abs() < 1.0) {
            return Err(MeanError::Domain(format!(
                "normalized pair (center {}, u {}) out of range",
                self.center, self.u
            )));
        }
        PositivePair::new(self.center * (1.0 + self.u), self.center * (1.0 - self.u))
    }
}

fn ordered(a: f64, b: f64) -> (f64, f64) {
    if a >= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// The normalized pair (1 + u, 1 - u) with u >= 0. `p` and `q` are carried
/// separately so that q keeps full relative precision when u is close to 1.
#[derive(Debug, Clone, Copy)]
struct Unit {
    u: f64,
    p: f64,
    q: f64,
}

impl Unit {
    fn from_u(u: f64) -> Self {
        let u = u.abs();
        Unit { u, p: 1.0 + u, q: 1.0 - u }
    }

    fn from_sorted(hi: f64, lo: f64) -> (f64, Self) {
        let c = hi / 2.0 + lo / 2.0;
        let u = (hi - lo) / (hi + lo);
        (c, Unit { u, p: hi / c, q: lo / c })
    }
}

fn series(u: f64, c: [f64; 3]) -> f64 {
    let s = u * u;
    1.0 + s * (c[0] + s * (c[1] + s * c[2]))
}

// Even Taylor coefficients of m(u) for u^2, u^4, u^6.
const L_SERIES: [f64; 3] = [-1.0 / 3.0, -4.0 / 45.0, -44.0 / 945.0];
const P_SERIES: [f64; 3] = [-1.0 / 6.0, -17.0 / 360.0, -367.0 / 15120.0];
const T_SERIES: [f64; 3] = [1.0 / 3.0, -4.0 / 45.0, 44.0 / 945.0];
const M_SERIES: [f64; 3] = [1.0 / 6.0, -17.0 / 360.0, 367.0 / 15120.0];
const I_SERIES: [f64; 3] = [-1.0 / 6.0, -13.0 / 360.0, -737.0 / 45360.0];

fn unit_mean(kind: MeanKind, n: Unit) -> f64 {
    let Unit { u, p, q } = n;
    if u == 0.0 {
        return 1.0;
    }
    let small = u < SERIES_SWITCHOVER;
    match kind {
        MeanKind::A => 1.0,
        MeanKind::G => (p * q).sqrt(),
        MeanKind::H => p * q,
        MeanKind::Q => ((p * p + q * q) / 2.0).sqrt(),
        MeanKind::Ak(k) => {
            if k == 0.0 {
                (p * q).sqrt()
            } else {
                ((p.powf(k) + q.powf(k)) / 2.0).powf(1.0 / k)
            }
        }
        MeanKind::L if small => series(u, L_SERIES),
        // atanh(u) = ln(p/q)/2, written with ln_1p so q keeps its precision
        MeanKind::L => u / (0.5 * (2.0 * u / q).ln_1p()),
        MeanKind::P if small => series(u, P_SERIES),
        MeanKind::P => u / (u / (p * q).sqrt()).atan(),
        MeanKind::T if small => series(u, T_SERIES),
        MeanKind::T => u / u.atan(),
        MeanKind::M if small => series(u, M_SERIES),
        MeanKind::M => u / u.asinh(),
        MeanKind::I if small => series(u, I_SERIES),
        // ln m = atanh(u)/u - 1 + ln(pq)/2, which avoids dividing a rounded
        // difference of p ln p and q ln q by 2u
        MeanKind::I => {
            let atanh = 0.5 * (2.0 * u / q).ln_1p();
            (atanh / u - 1.0 + 0.5 * (u.ln_1p() + q.ln())).exp()
        }
        MeanKind::S => {
            let ql = if q > 0.0 { q * q.ln() } else { 0.0 };
            ((p * u.ln_1p() + ql) / 2.0).exp()
        }
        MeanKind::X => {
            let g = unit_mean(MeanKind::G, n);
            let pm = unit_mean(MeanKind::P, n);
            (g / pm - 1.0).exp()
        }
        MeanKind::Y => {
            let g = unit_mean(MeanKind::G, n);
            let l = unit_mean(MeanKind::L, n);
            g * (l - 1.0).exp()
        }
    }
}

fn check_kind(kind: MeanKind) -> Result<()> {
    match kind {
        MeanKind::Ak(k) if !k.is_finite() => Err(MeanError::Domain(format!("power-mean exponent {k} is not finite"))),
        _ => Ok(()),
    }
}

/// Mean(a, b). Symmetric by construction and exact when a == b.
pub fn eval_mean(kind: MeanKind, pair: PositivePair) -> Result<f64> {
    check_kind(kind)?;
    let (hi, lo) = ordered(pair.a, pair.b);
    if hi == lo {
        return Ok(hi);
    }
    let (c, n) = Unit::from_sorted(hi, lo);
    Ok(c * unit_mean(kind, n))
}

/// Checked convenience wrapper over [`eval_mean`] for raw arguments.
pub fn mean_of(kind: MeanKind, a: f64, b: f64) -> Result<f64> {
    eval_mean(kind, PositivePair::new(a, b)?)
}

/// Mean(1 + u, 1 - u).
pub fn eval_mean_normalized(kind: MeanKind, u: f64) -> Result<f64> {
    check_kind(kind)?;
    if !(u.abs() < 1.0) {
        return Err(MeanError::Domain(format!("|u| = {} must be below 1", u.abs())));
    }
    Ok(unit_mean(kind, Unit::from_u(u)))
}

/// (1 + sin x, 1 - sin x); A = 1, G = cos x and P = sin x / x on this pair.
pub fn trig_pair(x: f64) -> Result<PositivePair> {
    if !(x > 0.0 && x < std::f64::consts::FRAC_PI_2) {
        return Err(MeanError::Domain(format!("x = {x} outside (0, pi/2)")));
    }
    // 1 - sin x = 2 sin^2(pi/4 - x/2) keeps b accurate near pi/2
    let h = (std::f64::consts::FRAC_PI_4 - x / 2.0).sin();
    PositivePair::new(1.0 + x.sin(), 2.0 * h * h)
}

/// (e^x, e^-x); L = sinh x / x, A = cosh x, G = 1 on this pair.
pub fn hyp_pair(x: f64) -> Result<PositivePair> {
    if !(x > 0.0 && x <= 300.0) {
        return Err(MeanError::Domain(format!("x = {x} outside (0, 300]")));
    }
    PositivePair::new(x.exp(), (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, FRAC_PI_2, FRAC_PI_4, FRAC_PI_6, PI};

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn arithmetic_of_three_and_one() {
        assert_eq!(mean_of(MeanKind::A, 3.0, 1.0).unwrap(), 2.0);
    }

    #[test]
    fn equal_arguments_return_exactly() {
        for kind in MeanKind::FIXED {
            assert_eq!(mean_of(kind, 1.7, 1.7).unwrap(), 1.7);
        }
        assert_eq!(mean_of(MeanKind::Ak(2.0), 0.3, 0.3).unwrap(), 0.3);
    }

    #[test]
    fn seiffert_p_at_three_halves() {
        let p = mean_of(MeanKind::P, 1.5, 0.5).unwrap();
        assert!(rel(p, 3.0 / PI) < 1e-15);
    }

    #[test]
    fn log_mean_on_hyperbolic_pair_is_sinh() {
        let l = mean_of(MeanKind::L, E, 1.0 / E).unwrap();
        assert!(rel(l, 1f64.sinh()) < 1e-14);
    }

    // mpmath, 50 digits (tests/oracle/means_oracle.py)
    #[test]
    fn frozen_values_at_three_one() {
        let cases = [
            (MeanKind::G, 1.7320508075688772935),
            (MeanKind::H, 1.5),
            (MeanKind::Q, 2.2360679774997896964),
            (MeanKind::L, 1.8204784532536747872),
            (MeanKind::I, 1.9115576495069518779),
            (MeanKind::P, 1.9098593171027440292),
            (MeanKind::T, 2.1568104322916099846),
            (MeanKind::M, 2.0780869212350275376),
            (MeanKind::S, 2.279507056954777642),
            (MeanKind::X, 1.8222041917562244948),
            (MeanKind::Y, 1.5833539826401986681),
        ];
        for (kind, want) in cases {
            let got = mean_of(kind, 3.0, 1.0).unwrap();
            assert!(rel(got, want) < 2e-15, "{kind}: {got} vs {want}");
        }
    }

    #[test]
    fn frozen_values_at_ten_tenth() {
        let cases = [
            (MeanKind::L, 2.1497576854210965716),
            (MeanKind::I, 3.8539629769866176159),
            (MeanKind::P, 3.6092948613644257298),
            (MeanKind::T, 6.3838142851678846638),
            (MeanKind::M, 5.707355004685589817),
            (MeanKind::S, 9.5542812128537473834),
            (MeanKind::X, 2.4508886472031624063),
            (MeanKind::Y, 0.56309585441340455375),
        ];
        for (kind, want) in cases {
            let got = mean_of(kind, 10.0, 0.1).unwrap();
            assert!(rel(got, want) < 1e-14, "{kind}: {got} vs {want}");
        }
    }

    #[test]
    fn power_mean_third() {
        let got = mean_of(MeanKind::Ak(1.0 / 3.0), 4.0, 1.0).unwrap();
        assert!(rel(got, 2.1652161819092296766) < 1e-14);
        assert_eq!(
            mean_of(MeanKind::Ak(0.0), 4.0, 1.0).unwrap(),
            mean_of(MeanKind::G, 4.0, 1.0).unwrap()
        );
    }

    #[test]
    fn normalized_examples() {
        for kind in MeanKind::FIXED {
            assert_eq!(eval_mean_normalized(kind, 0.0).unwrap(), 1.0);
        }
        assert!(rel(eval_mean_normalized(MeanKind::G, 0.6).unwrap(), 0.8) < 1e-15);
        let l = eval_mean_normalized(MeanKind::L, 0.5).unwrap();
        assert!(rel(l, 0.91023922662683739361) < 1e-15);
        assert!(rel(l, 0.5 / 0.5f64.atanh()) < 1e-15);
        assert!(eval_mean_normalized(MeanKind::A, 1.0).is_err());
        assert!(eval_mean_normalized(MeanKind::A, -1.5).is_err());
    }

    #[test]
    fn normalized_near_one() {
        let cases = [
            (MeanKind::G, 0.0447101778122163142),
            (MeanKind::L, 0.26288082026006788246),
            (MeanKind::I, 0.73819376155494600503),
            (MeanKind::P, 0.65462212645113595669),
            (MeanKind::T, 1.2727769854577274886),
            (MeanKind::M, 1.1343683709784400111),
            (MeanKind::S, 1.9914178139077470032),
            (MeanKind::X, 0.39388322994584130708),
            (MeanKind::Y, 0.021393389822433271222),
        ];
        for (kind, want) in cases {
            let got = eval_mean_normalized(kind, 0.999).unwrap();
            assert!(rel(got, want) < 1e-13, "{kind}: {got} vs {want}");
        }
    }

    #[test]
    fn series_matches_direct_form_at_switchover() {
        let u = SERIES_SWITCHOVER;
        let n = Unit::from_u(u);
        let kinds = [
            (MeanKind::L, L_SERIES),
            (MeanKind::P, P_SERIES),
            (MeanKind::T, T_SERIES),
            (MeanKind::M, M_SERIES),
            (MeanKind::I, I_SERIES),
        ];
        // u == SERIES_SWITCHOVER takes the closed-form branch
        for (kind, c) in kinds {
            assert!(rel(series(u, c), unit_mean(kind, n)) < 1e-15, "{kind}");
        }
        let v = eval_mean_normalized(MeanKind::L, 1e-5).unwrap();
        assert!(rel(v, 0.99999999996666666667) < 1e-15);
        let v = eval_mean_normalized(MeanKind::T, 1e-5).unwrap();
        assert!(rel(v, 1.0000000000333333333) < 1e-15);
    }

    #[test]
    fn trig_pair_examples() {
        let p = trig_pair(FRAC_PI_6).unwrap();
        assert!((p.a() - 1.5).abs() < 1e-15 && (p.b() - 0.5).abs() < 1e-15);
        let p = trig_pair(FRAC_PI_2 - 1e-9).unwrap();
        assert!(p.b() > 0.0 && rel(p.b(), 5e-19) < 1e-6);
        let p = trig_pair(FRAC_PI_4).unwrap();
        let want = FRAC_PI_4.sin() / FRAC_PI_4;
        assert!(rel(eval_mean(MeanKind::P, p).unwrap(), want) < 1e-14);
        assert!(rel(want, 0.9003163161571061) < 1e-15);
        assert!(trig_pair(0.0).is_err() && trig_pair(FRAC_PI_2).is_err());
    }

    #[test]
    fn hyp_pair_identities() {
        let x = 1.0f64;
        let p = hyp_pair(x).unwrap();
        assert!(rel(eval_mean(MeanKind::A, p).unwrap(), x.cosh()) < 1e-15);
        let i = eval_mean(MeanKind::I, p).unwrap();
        assert!(rel(i, (1.0 / x.tanh() - 1.0).exp()) < 1e-14);
        let t = eval_mean(MeanKind::T, p).unwrap();
        assert!(rel(t, x.sinh() / x.tanh().atan()) < 1e-14);
        assert!(rel(t, 1.8055569233479241847) < 1e-14);
        let q = eval_mean(MeanKind::Q, p).unwrap();
        assert!(rel(q, (2.0 * x).cosh().sqrt()) < 1e-14);
        let s = eval_mean(MeanKind::S, p).unwrap();
        assert!(rel(s, (x * x.tanh()).exp()) < 1e-14);
        assert!(hyp_pair(301.0).is_err() && hyp_pair(-1.0).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(PositivePair::new(0.0, 1.0).is_err());
        assert!(PositivePair::new(f64::NAN, 1.0).is_err());
        assert!(PositivePair::new(1.0, f64::INFINITY).is_err());
        assert!(mean_of(MeanKind::Ak(f64::NAN), 1.0, 2.0).is_err());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("P".parse::<MeanKind>().unwrap(), MeanKind::P);
        assert_eq!("Ak(2/3)".parse::<MeanKind>().unwrap(), MeanKind::Ak(2.0 / 3.0));
        assert_eq!("Ak(2)".parse::<MeanKind>().unwrap(), MeanKind::Ak(2.0));
        assert!("Z".parse::<MeanKind>().is_err());
        assert_eq!(MeanKind::Ak(0.5).to_string(), "Ak(0.5)");
    }
}

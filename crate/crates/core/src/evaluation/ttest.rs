//! Paired Student t-test with a self-contained t distribution.

use serde::{Deserialize, Serialize};

use super::EvalError;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    /// `±inf` when every paired difference is the same nonzero value.
    #[serde(with = "signed_inf")]
    pub t_statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub alpha: f64,
    pub significant: bool,
}

/// Two-sided paired t-test of `b - a` at α = 0.05.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult, EvalError> {
    paired_t_test_at(a, b, DEFAULT_ALPHA)
}

pub fn paired_t_test_at(a: &[f64], b: &[f64], alpha: f64) -> Result<TTestResult, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch { left: a.len(), right: b.len() });
    }
    let k = a.len();
    if k < 2 {
        return Err(EvalError::TooFewPairs(k));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let kf = k as f64;
    let mean = d.iter().sum::<f64>() / kf;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (kf - 1.0);
    let sd = var.sqrt();
    let df = k - 1;
    let (t, p) = if sd == 0.0 {
        if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY.copysign(mean), 0.0)
        }
    } else {
        let t = mean / (sd / kf.sqrt());
        (t, two_tailed_p(t, df as f64))
    };
    Ok(TTestResult { t_statistic: t, degrees_of_freedom: df, p_value: p, alpha, significant: p <= alpha })
}

/// P(|T| ≥ |t|) for Student's t with `df` degrees of freedom.
pub fn two_tailed_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(x, df / 2.0, 0.5).clamp(0.0, 1.0)
}

pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * two_tailed_p(t, df);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// I_x(a, b) via the continued-fraction expansion (modified Lentz).
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - ln_front.exp() * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        for aa in [m * (b - m) * x / ((qam + m2) * (a + m2)), -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))] {
            d = 1.0 + aa * d;
            if d.abs() < TINY {
                d = TINY;
            }
            c = 1.0 + aa / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            h *= d * c;
        }
        if (d * c - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Lanczos approximation (g = 7, n = 9), accurate to ~1e-15.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

mod signed_inf {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Str(s) => Err(de::Error::custom(format!("expected number or ±inf, got {s:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_vectors() {
        let r = paired_t_test(&[0.5, 0.6, 0.7], &[0.5, 0.6, 0.7]).unwrap();
        assert_eq!((r.t_statistic, r.p_value, r.significant), (0.0, 1.0, false));
    }

    #[test]
    fn constant_nonzero_difference() {
        let r = paired_t_test(&[0.5, 0.6, 0.7], &[0.6, 0.7, 0.8 + 1e-17]).unwrap();
        assert!(r.p_value < 1e-6);
        let r = paired_t_test(&[1.0, 2.0], &[0.0, 1.0]).unwrap();
        assert_eq!((r.t_statistic, r.p_value), (f64::NEG_INFINITY, 0.0));
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"-inf\""));
        let back: TTestResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn ramp_differences() {
        let a = [0.0; 10];
        let b: Vec<f64> = (1..=10).map(f64::from).collect();
        let r = paired_t_test(&a, &b).unwrap();
        // mean 5.5, sample sd 3.02765 → t = 5.5 / (3.02765 / √10)
        assert!((r.t_statistic - 5.744562646538029).abs() < 1e-9);
        assert!((r.p_value - 2.78196011e-4).abs() < 1e-10);
        assert_eq!(r.degrees_of_freedom, 9);
    }

    #[test]
    fn critical_value_df9() {
        assert!((two_tailed_p(2.262, 9.0) - 0.05).abs() < 1e-3);
        // published two-sided 5% critical values
        for (df, crit) in [(1.0, 12.706), (5.0, 2.571), (9.0, 2.262), (30.0, 2.042)] {
            assert!((two_tailed_p(crit, df) - 0.05).abs() < 2e-4, "df {df}");
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(paired_t_test(&[1.0], &[1.0]), Err(EvalError::TooFewPairs(1))));
        assert!(matches!(paired_t_test(&[1.0, 2.0], &[1.0]), Err(EvalError::LengthMismatch { .. })));
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cdf_agrees_with_statrs() {
        use statrs::distribution::{ContinuousCDF, StudentsT};
        for df in [1.0, 2.0, 4.5, 9.0, 40.0, 300.0] {
            let dist = StudentsT::new(0.0, 1.0, df).unwrap();
            for t in [-8.0, -2.5, -0.3, 0.0, 0.7, 1.9, 4.0] {
                assert!((student_t_cdf(t, df) - dist.cdf(t)).abs() < 1e-10, "df {df} t {t}");
            }
        }
    }

    proptest! {
        #[test]
        fn antisymmetric(a in proptest::collection::vec(0.0..1.0f64, 2..15), shift in proptest::collection::vec(-0.2..0.2f64, 15)) {
            let b: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x + s).collect();
            let ab = paired_t_test(&a, &b).unwrap();
            let ba = paired_t_test(&b, &a).unwrap();
            prop_assert!((ab.t_statistic + ba.t_statistic).abs() <= 1e-9 * ab.t_statistic.abs().max(1.0));
            prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
            prop_assert_eq!(ab.significant, ab.p_value <= 0.05);
        }
    }
}

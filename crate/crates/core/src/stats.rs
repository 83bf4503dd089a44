//! Student-t distribution, Welch's two-sample test and Holm-Bonferroni correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BETA_CF_TOL: f64 = 1e-14;
const BETA_CF_MAX_ITER: usize = 300;

/// Standard errors below this fraction of the sample means are floating-point
/// noise; such windows are treated as having zero variance.
pub const ZERO_SPREAD_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    TwoSided,
    /// H1: mean(a) > mean(b).
    Greater,
    /// H1: mean(a) < mean(b).
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestOutcome {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    pub alternative: Alternative,
}

/// ln Γ(x) for x > 0 (Lanczos, g = 7, n = 9).
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
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=BETA_CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
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
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < BETA_CF_TOL {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`, with `one_minus_x` supplied
/// separately to avoid cancellation when `x` is close to 1.
fn reg_inc_beta(a: f64, b: f64, x: f64, one_minus_x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if one_minus_x <= 0.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * one_minus_x.ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, one_minus_x) / b
    }
}

/// `P(T > |t|)` for Student's t with `df` degrees of freedom.
fn t_upper_tail_abs(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let t2 = t * t;
    let denom = df + t2;
    0.5 * reg_inc_beta(0.5 * df, 0.5, df / denom, t2 / denom)
}

fn check_df(df: f64) -> Result<()> {
    if df.is_nan() || df <= 0.0 {
        return Err(Error::Domain(format!("degrees of freedom must be positive, got {df}")));
    }
    Ok(())
}

/// `(P(T <= t), P(T >= t))`.
fn t_tails(t: f64, df: f64) -> (f64, f64) {
    let tail = t_upper_tail_abs(t, df);
    if t >= 0.0 {
        (1.0 - tail, tail)
    } else {
        (tail, 1.0 - tail)
    }
}

/// CDF of Student's t distribution.
pub fn student_t_cdf(t: f64, df: f64) -> Result<f64> {
    check_df(df)?;
    if t.is_nan() {
        return Err(Error::Domain("t statistic is NaN".into()));
    }
    Ok(t_tails(t, df).0)
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, ss / (n - 1.0))
}

fn p_for(alternative: Alternative, lower: f64, upper: f64) -> f64 {
    match alternative {
        Alternative::Greater => upper,
        Alternative::Less => lower,
        Alternative::TwoSided => (2.0 * lower.min(upper)).min(1.0),
    }
}

/// Welch's unequal-variance two-sample t-test.
///
/// When both samples have (numerically) zero spread the test degenerates: equal
/// means give `t = 0` (two-sided p = 1, one-sided p = 1/2) and unequal means give
/// `t = ±inf` (two-sided p = 0).
pub fn welch_t_test(a: &[f64], b: &[f64], alternative: Alternative) -> Result<TTestOutcome> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "Welch test needs at least 2 values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    if !(ma.is_finite() && mb.is_finite() && va.is_finite() && vb.is_finite()) {
        return Err(Error::Domain("Welch test on non-finite samples".into()));
    }
    let sa = va / na;
    let sb = vb / nb;
    let se = (sa + sb).sqrt();
    let diff = ma - mb;

    let noise = ZERO_SPREAD_RTOL * ma.abs().max(mb.abs());
    if se <= noise {
        let df = na + nb - 2.0;
        let t = if diff.abs() <= noise { 0.0 } else { diff.signum() * f64::INFINITY };
        let (lower, upper) = if t == 0.0 {
            (0.5, 0.5)
        } else if t > 0.0 {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        return Ok(TTestOutcome {
            t_statistic: t,
            degrees_of_freedom: df,
            p_value: p_for(alternative, lower, upper),
            alternative,
        });
    }

    let t = diff / se;
    let mut denom = 0.0;
    if sa > 0.0 {
        denom += sa * sa / (na - 1.0);
    }
    if sb > 0.0 {
        denom += sb * sb / (nb - 1.0);
    }
    let df = (sa + sb) * (sa + sb) / denom;
    let (lower, upper) = t_tails(t, df);
    Ok(TTestOutcome { t_statistic: t, degrees_of_freedom: df, p_value: p_for(alternative, lower, upper), alternative })
}

/// Holm-Bonferroni step-down adjustment. Output is in input order.
pub fn holm_bonferroni(p: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::Domain(format!("p-value {bad} outside [0, 1]")));
    }
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p[i].total_cmp(&p[j]));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (k, &i) in order.iter().enumerate() {
        let scaled = ((m - k) as f64 * p[i]).min(1.0);
        running = running.max(scaled);
        adjusted[i] = running;
    }
    Ok(adjusted)
}

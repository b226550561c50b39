//! Student t distribution, Pearson correlation and the paired-sample t-test.
//!
//! The t CDF goes through the regularized incomplete beta function,
//! evaluated by Lentz's continued fraction; quantiles are found by bisection
//! on the CDF.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, n = 9).
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

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 100_000;
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
    for m in 1..=MAX_ITER {
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
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Student t distribution with `df` degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentT {
    df: f64,
}

impl StudentT {
    pub fn new(df: f64) -> Result<Self> {
        if !(df > 0.0 && df.is_finite()) {
            return Err(Error::invalid(format!("degrees of freedom must be positive, got {df}")));
        }
        Ok(StudentT { df })
    }

    pub fn df(&self) -> f64 {
        self.df
    }

    /// `P(T > t)` for `t >= 0` without cancellation.
    fn upper_tail(&self, t: f64) -> f64 {
        let x = self.df / (self.df + t * t);
        0.5 * regularized_incomplete_beta(self.df / 2.0, 0.5, x)
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t.is_nan() {
            return f64::NAN;
        }
        if t >= 0.0 {
            1.0 - self.upper_tail(t)
        } else {
            self.upper_tail(-t)
        }
    }

    /// Survival function `P(T > t)`.
    pub fn sf(&self, t: f64) -> f64 {
        if t >= 0.0 {
            self.upper_tail(t)
        } else {
            1.0 - self.upper_tail(-t)
        }
    }

    pub fn pdf(&self, t: f64) -> f64 {
        let v = self.df;
        let ln = ln_gamma((v + 1.0) / 2.0)
            - ln_gamma(v / 2.0)
            - 0.5 * (v * std::f64::consts::PI).ln()
            - (v + 1.0) / 2.0 * (1.0 + t * t / v).ln();
        ln.exp()
    }

    /// Quantile: the `t` with `cdf(t) = p`, by bisection.
    pub fn inverse_cdf(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid(format!("quantile probability must be in (0, 1), got {p}")));
        }
        let (mut lo, mut hi) = (-1.0, 1.0);
        while self.cdf(lo) > p {
            lo *= 2.0;
        }
        while self.cdf(hi) < p {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 * hi.abs().max(1.0) {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (n - 1 denominator).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("series lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::invalid("need at least two observations"));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::invalid("series contain non-finite values"));
    }
    Ok(())
}

/// Sample Pearson correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::degenerate("correlation undefined for a constant series"));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Paired-sample t-test output, one field per row of the conventional
/// summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestReport {
    pub mean_a: f64,
    pub mean_b: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub n: usize,
    /// `None` when either series is constant.
    pub pearson_r: Option<f64>,
    pub mean_diff: f64,
    pub sd_diff: f64,
    pub t: f64,
    pub df: usize,
    pub p_one_tail: f64,
    pub p_two_tail: f64,
    pub crit_one_tail: f64,
    pub crit_two_tail: f64,
    pub alpha: f64,
}

impl TTestReport {
    pub fn significant(&self) -> bool {
        self.p_two_tail < self.alpha
    }

    /// Renders the summary table. Means are multiplied by `scale` and
    /// variances by `scale²`.
    pub fn render_table(&self, label_a: &str, label_b: &str, scale: f64) -> String {
        let w = 26;
        let mut s = String::new();
        let rule = "=".repeat(w + 2 * 14);
        let _ = writeln!(s, "{rule}");
        let _ = writeln!(s, "{:<w$}{:>14}{:>14}", "", label_a, label_b);
        let _ = writeln!(s, "{}", "-".repeat(w + 2 * 14));
        let _ = writeln!(s, "{:<w$}{:>14.2}{:>14.2}", "Mean", self.mean_a * scale, self.mean_b * scale);
        let sq = scale * scale;
        let _ = writeln!(s, "{:<w$}{:>14.2}{:>14.2}", "Variance", self.var_a * sq, self.var_b * sq);
        let both = |s: &mut String, name: &str, value: String| {
            let _ = writeln!(s, "{name:<w$}{value:>28}");
        };
        both(&mut s, "Observations", self.n.to_string());
        both(
            &mut s,
            "Pearson Correlation",
            self.pearson_r.map_or("undefined".into(), |r| format!("{r:.3}")),
        );
        both(&mut s, "t Statistic", format!("{:.2}", self.t));
        both(&mut s, "Degrees of Freedom (df)", self.df.to_string());
        both(&mut s, "p-value (one-tail)", format!("{:.2e}", self.p_one_tail));
        both(&mut s, "p-value (two-tail)", format!("{:.2e}", self.p_two_tail));
        both(&mut s, "Critical Value (one-tail)", format!("{:.3}", self.crit_one_tail));
        both(&mut s, "Critical Value (two-tail)", format!("{:.3}", self.crit_two_tail));
        let _ = writeln!(s, "{rule}");
        let _ = writeln!(s, "alpha = {}", self.alpha);
        s
    }
}

/// Critical values at `alpha` (one-tail) and `alpha / 2` (two-tail).
pub fn critical_values(df: usize, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let dist = StudentT::new(df as f64)?;
    Ok((dist.inverse_cdf(1.0 - alpha)?, dist.inverse_cdf(1.0 - alpha / 2.0)?))
}

/// One-tail p-value is the tail beyond `|t|`; the two-tail value doubles it.
pub fn p_values(t: f64, df: usize) -> Result<(f64, f64)> {
    let one = StudentT::new(df as f64)?.sf(t.abs());
    Ok((one, (2.0 * one).min(1.0)))
}

/// Paired-sample t-test of `a - b`.
pub fn paired_ttest(a: &[f64], b: &[f64], alpha: f64) -> Result<TTestReport> {
    check_pair(a, b)?;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len();
    let mean_diff = mean(&diffs);
    let var_diff = sample_variance(&diffs);
    if var_diff <= 0.0 {
        return Err(Error::degenerate("differences have zero variance"));
    }
    let sd_diff = var_diff.sqrt();
    let t = mean_diff / (sd_diff / (n as f64).sqrt());
    let df = n - 1;
    let (p_one_tail, p_two_tail) = p_values(t, df)?;
    let (crit_one_tail, crit_two_tail) = critical_values(df, alpha)?;
    Ok(TTestReport {
        mean_a: mean(a),
        mean_b: mean(b),
        var_a: sample_variance(a),
        var_b: sample_variance(b),
        n,
        pearson_r: pearson(a, b).ok(),
        mean_diff,
        sd_diff,
        t,
        df,
        p_one_tail,
        p_two_tail,
        crit_one_tail,
        crit_two_tail,
        alpha,
    })
}

/// Paired t statistic from summary statistics, using
/// `var(d) = var_a + var_b - 2 r sd_a sd_b`.
pub fn t_from_summary(mean_a: f64, mean_b: f64, var_a: f64, var_b: f64, r: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid("need at least two observations"));
    }
    if !(var_a > 0.0 && var_b > 0.0) {
        return Err(Error::invalid("variances must be positive"));
    }
    if !(-1.0..=1.0).contains(&r) {
        return Err(Error::invalid(format!("correlation must lie in [-1, 1], got {r}")));
    }
    let var_d = var_a + var_b - 2.0 * r * var_a.sqrt() * var_b.sqrt();
    if var_d <= 1e-12 * (var_a + var_b) {
        return Err(Error::invalid(format!(
            "summary statistics imply non-positive variance of differences ({var_d})"
        )));
    }
    Ok((mean_a - mean_b) / (var_d / n as f64).sqrt())
}

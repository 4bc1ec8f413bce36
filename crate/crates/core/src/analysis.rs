//! Information analysis (ACF, PACF, lag study, classical decomposition) and
//! statistical tests (ADF, Jarque-Bera, Ljung-Box, runs test).
//!
//! Autocovariances use divisor `n` throughout, which keeps every partial
//! autocorrelation inside `[-1, 1]`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::{mean, median, SeriesError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("series is degenerate: {0}")]
    DegenerateSeries(String),
    #[error("lag {lag} is not below the series length {n}")]
    LagTooLarge { lag: usize, n: usize },
    #[error("series of length {len} is too short: {needed}")]
    SeriesTooShort { len: usize, needed: String },
    #[error("regression design matrix is singular")]
    SingularRegression,
    #[error("Toeplitz system is singular at order {0}")]
    SingularSystem(usize),
}

fn require_complete(x: &[f64]) -> Result<(), AnalysisError> {
    match x.iter().filter(|v| v.is_nan()).count() {
        0 => Ok(()),
        k => Err(SeriesError::MissingValues(k).into()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfResult {
    pub lags: Vec<usize>,
    pub rho: Vec<f64>,
    pub n: usize,
    pub ci_halfwidth: f64,
}

/// Sample autocorrelations for lags `0..=h`.
pub fn acf(x: &[f64], h: usize) -> Result<AcfResult, AnalysisError> {
    require_complete(x)?;
    let n = x.len();
    if h >= n {
        return Err(AnalysisError::LagTooLarge { lag: h, n });
    }
    let m = mean(x);
    let d: Vec<f64> = x.iter().map(|v| v - m).collect();
    let c0: f64 = d.iter().map(|v| v * v).sum();
    if !(c0 > 0.0) {
        return Err(AnalysisError::DegenerateSeries("zero variance".into()));
    }
    let mut rho = Vec::with_capacity(h + 1);
    rho.push(1.0);
    for k in 1..=h {
        let ck: f64 = (0..n - k).map(|t| d[t] * d[t + k]).sum();
        rho.push(ck / c0);
    }
    Ok(AcfResult {
        lags: (0..=h).collect(),
        rho,
        n,
        ci_halfwidth: 1.96 / (n as f64).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacfResult {
    pub lags: Vec<usize>,
    pub phi_kk: Vec<f64>,
}

/// Output of the Durbin-Levinson recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct Levinson {
    /// AR coefficients of the final order.
    pub phi: Vec<f64>,
    /// Partial autocorrelations for orders `1..=p`.
    pub pacf: Vec<f64>,
    /// Innovation variance relative to the lag-0 autocovariance.
    pub variance_ratio: f64,
}

/// Solves the Yule-Walker equations of order `p` from autocorrelations
/// `rho[0..=p]`.
pub fn durbin_levinson(rho: &[f64], p: usize) -> Result<Levinson, AnalysisError> {
    let mut phi: Vec<f64> = Vec::with_capacity(p);
    let mut pacf = Vec::with_capacity(p);
    let mut v = 1.0;
    for k in 1..=p {
        if !(v > 0.0) {
            return Err(AnalysisError::SingularSystem(k));
        }
        let num = rho[k] - (1..k).map(|j| phi[j - 1] * rho[k - j]).sum::<f64>();
        let a = num / v;
        let prev = phi.clone();
        for j in 1..k {
            phi[j - 1] = prev[j - 1] - a * prev[k - j - 1];
        }
        phi.push(a);
        pacf.push(a);
        v *= 1.0 - a * a;
    }
    Ok(Levinson {
        phi,
        pacf,
        variance_ratio: v,
    })
}

/// Partial autocorrelations for lags `1..=h`.
pub fn pacf(x: &[f64], h: usize) -> Result<PacfResult, AnalysisError> {
    let a = acf(x, h)?;
    let dl = durbin_levinson(&a.rho, h)?;
    Ok(PacfResult {
        lags: (1..=h).collect(),
        phi_kk: dl.pacf,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagRow {
    pub lag: usize,
    pub rho: f64,
    pub significant: bool,
}

/// Autocorrelation per lag, flagged against the `1.96/sqrt(n)` band.
pub fn lag_study(x: &[f64], h: usize) -> Result<Vec<LagRow>, AnalysisError> {
    let a = acf(x, h)?;
    Ok((1..=h)
        .map(|k| LagRow {
            lag: k,
            rho: a.rho[k],
            significant: a.rho[k].abs() > a.ci_halfwidth,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub period: usize,
    pub model: String,
    /// NaN where the centred moving average is undefined.
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub remainder: Vec<f64>,
    pub seasonal_strength: f64,
}

/// Centred moving average of window `s`; the `2 x s` average for even `s`.
pub fn centered_ma(x: &[f64], s: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![f64::NAN; n];
    let half = s / 2;
    if s % 2 == 1 {
        for t in half..n - half {
            out[t] = x[t - half..=t + half].iter().sum::<f64>() / s as f64;
        }
    } else {
        for t in half..n - half {
            let inner: f64 = x[t + 1 - half..t + half].iter().sum();
            out[t] = (0.5 * x[t - half] + inner + 0.5 * x[t + half]) / s as f64;
        }
    }
    out
}

/// Classical additive decomposition with period `s`.
pub fn decompose(x: &[f64], s: usize) -> Result<Decomposition, AnalysisError> {
    require_complete(x)?;
    let n = x.len();
    let s = s.max(1);
    if n < 2 * s || n == 0 {
        return Err(AnalysisError::SeriesTooShort {
            len: n,
            needed: format!("at least {} observations for period {s}", 2 * s),
        });
    }
    let trend = centered_ma(x, s);
    let mut pattern = vec![0.0; s];
    if s > 1 {
        let mut sums = vec![0.0; s];
        let mut counts = vec![0usize; s];
        for t in 0..n {
            if !trend[t].is_nan() {
                sums[t % s] += x[t] - trend[t];
                counts[t % s] += 1;
            }
        }
        for i in 0..s {
            pattern[i] = sums[i] / counts[i] as f64;
        }
        let centre = mean(&pattern);
        pattern.iter_mut().for_each(|p| *p -= centre);
    }
    let seasonal: Vec<f64> = (0..n).map(|t| pattern[t % s]).collect();
    let remainder: Vec<f64> = (0..n).map(|t| x[t] - trend[t] - seasonal[t]).collect();

    let defined: Vec<usize> = (0..n).filter(|&t| !trend[t].is_nan()).collect();
    let rem: Vec<f64> = defined.iter().map(|&t| remainder[t]).collect();
    let sr: Vec<f64> = defined.iter().map(|&t| remainder[t] + seasonal[t]).collect();
    let var = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|a| (a - m).powi(2)).sum::<f64>()
    };
    let denom = var(&sr);
    let seasonal_strength = if denom > 0.0 {
        (1.0 - var(&rem) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(Decomposition {
        period: s,
        model: "additive".into(),
        trend,
        seasonal,
        remainder,
        seasonal_strength,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// Curie of the test term.
    pub test: String,
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_values: Option<BTreeMap<String, f64>>,
    pub reject_at_5pct: bool,
    pub df_or_lags: i64,
}

/// Asymptotic Dickey-Fuller critical values, constant and no trend.
pub const ADF_CRITICAL: [(&str, f64); 3] = [("1%", -3.43), ("5%", -2.86), ("10%", -2.57)];

/// Least-squares fit returning coefficients and their standard errors.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>, f64), AnalysisError> {
    let (rows, cols) = x.shape();
    if rows <= cols {
        return Err(AnalysisError::SingularRegression);
    }
    let xtx = x.transpose() * x;
    let chol = xtx.cholesky().ok_or(AnalysisError::SingularRegression)?;
    let beta = chol.solve(&(x.transpose() * y));
    let resid = y - x * &beta;
    let s2 = resid.norm_squared() / (rows - cols) as f64;
    let inv = chol.inverse();
    let se = DVector::from_iterator(cols, (0..cols).map(|i| (s2 * inv[(i, i)]).sqrt()));
    if beta.iter().chain(se.iter()).any(|v| !v.is_finite()) {
        return Err(AnalysisError::SingularRegression);
    }
    Ok((beta, se, resid.norm_squared()))
}

/// Augmented Dickey-Fuller test with a constant and `p` lagged differences.
pub fn adf_test(x: &[f64], p: usize) -> Result<TestResult, AnalysisError> {
    require_complete(x)?;
    let n = x.len();
    if n < p + 10 {
        return Err(AnalysisError::SeriesTooShort {
            len: n,
            needed: format!("at least {} observations for {p} lags", p + 10),
        });
    }
    let dx: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    // rows t = p..dx.len()-1 regress dx[t] on 1, x[t], dx[t-1..t-p]
    let rows = dx.len() - p;
    let cols = 2 + p;
    let mut design = DMatrix::zeros(rows, cols);
    let mut target = DVector::zeros(rows);
    for (r, t) in (p..dx.len()).enumerate() {
        target[r] = dx[t];
        design[(r, 0)] = 1.0;
        design[(r, 1)] = x[t];
        for j in 1..=p {
            design[(r, 1 + j)] = dx[t - j];
        }
    }
    let (beta, se, _) = ols(&design, &target)?;
    let statistic = beta[1] / se[1];
    let critical: BTreeMap<String, f64> = ADF_CRITICAL.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    Ok(TestResult {
        test: "tswf:DickeyFuller".into(),
        statistic,
        p_value: None,
        reject_at_5pct: statistic < critical["5%"],
        critical_values: Some(critical),
        df_or_lags: p as i64,
    })
}

/// Jarque-Bera normality test; moments use divisor `n`.
pub fn jarque_bera(x: &[f64]) -> Result<TestResult, AnalysisError> {
    require_complete(x)?;
    let n = x.len();
    if n < 4 {
        return Err(AnalysisError::SeriesTooShort {
            len: n,
            needed: "at least 4 observations".into(),
        });
    }
    let m = mean(x);
    let moment = |k: i32| x.iter().map(|v| (v - m).powi(k)).sum::<f64>() / n as f64;
    let m2 = moment(2);
    if !(m2 > 0.0) {
        return Err(AnalysisError::DegenerateSeries("zero variance".into()));
    }
    let skew = moment(3) / m2.powf(1.5);
    let kurt = moment(4) / (m2 * m2) - 3.0;
    let jb = n as f64 / 6.0 * (skew * skew + kurt * kurt / 4.0);
    let p = (-jb / 2.0).exp();
    Ok(TestResult {
        test: "tswf:JarqueBera".into(),
        statistic: jb,
        p_value: Some(p),
        critical_values: None,
        reject_at_5pct: p < 0.05,
        df_or_lags: 2,
    })
}

/// Ljung-Box portmanteau statistic over lags `1..=h`.
pub fn ljung_box(x: &[f64], h: usize) -> Result<TestResult, AnalysisError> {
    if h == 0 {
        return Err(AnalysisError::LagTooLarge { lag: 0, n: x.len() });
    }
    let a = acf(x, h)?;
    let n = x.len() as f64;
    let q = n * (n + 2.0) * (1..=h).map(|k| a.rho[k].powi(2) / (n - k as f64)).sum::<f64>();
    let p = chi2_sf(q, h as f64);
    Ok(TestResult {
        test: "tswf:JungBox".into(),
        statistic: q,
        p_value: Some(p),
        critical_values: None,
        reject_at_5pct: p < 0.05,
        df_or_lags: h as i64,
    })
}

/// Wald-Wolfowitz runs test above and below the median; values equal to the
/// median are dropped.
pub fn runs_test(x: &[f64]) -> Result<TestResult, AnalysisError> {
    require_complete(x)?;
    if x.len() < 10 {
        return Err(AnalysisError::SeriesTooShort {
            len: x.len(),
            needed: "at least 10 observations".into(),
        });
    }
    let med = median(x);
    let signs: Vec<bool> = x.iter().filter(|&&v| v != med).map(|&v| v > med).collect();
    let n1 = signs.iter().filter(|&&s| s).count() as f64;
    let n2 = signs.len() as f64 - n1;
    if n1 == 0.0 || n2 == 0.0 {
        return Err(AnalysisError::DegenerateSeries(
            "all values lie on one side of the median".into(),
        ));
    }
    let runs = 1 + signs.windows(2).filter(|w| w[0] != w[1]).count();
    let n = n1 + n2;
    let mu = 2.0 * n1 * n2 / n + 1.0;
    let var = 2.0 * n1 * n2 * (2.0 * n1 * n2 - n) / (n * n * (n - 1.0));
    if !(var > 0.0) {
        return Err(AnalysisError::DegenerateSeries("zero runs variance".into()));
    }
    let z = (runs as f64 - mu) / var.sqrt();
    let p = (2.0 * (1.0 - normal_cdf(z.abs()))).clamp(0.0, 1.0);
    Ok(TestResult {
        test: "tswf:RunsTest".into(),
        statistic: z,
        p_value: Some(p),
        critical_values: None,
        reject_at_5pct: p < 0.05,
        df_or_lags: runs as i64,
    })
}

const GAMMA_EPS: f64 = 1e-15;
const GAMMA_MAX_ITER: usize = 10_000;

/// Natural log of the gamma function (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
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
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized lower incomplete gamma `P(a, x)` by its power series.
fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut sum = 1.0 / a;
    let mut term = sum;
    let mut ap = a;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Regularized upper incomplete gamma `Q(a, x)` by its continued fraction
/// (modified Lentz).
fn gamma_q_cf(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Regularized lower incomplete gamma function `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_cf(a, x)
    }
}

/// Regularized upper incomplete gamma function `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

pub fn chi2_cdf(x: f64, df: f64) -> f64 {
    gamma_p(df / 2.0, x / 2.0)
}

/// Chi-square survival function `1 - F(x; df)`.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    gamma_q(df / 2.0, x / 2.0)
}

pub fn erf(x: f64) -> f64 {
    let p = gamma_p(0.5, x * x);
    if x < 0.0 {
        -p
    } else {
        p
    }
}

pub fn normal_cdf(z: f64) -> f64 {
    if z < 0.0 {
        0.5 * gamma_q(0.5, z * z / 2.0)
    } else {
        0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn acf_hand_values() {
        let a = acf(&[1.0, 2.0, 3.0, 4.0, 5.0], 2).unwrap();
        assert_eq!(a.rho[0], 1.0);
        assert!((a.rho[1] - 0.4).abs() < 1e-15);
        assert!((a.rho[2] + 0.1).abs() < 1e-15);
        assert!(matches!(acf(&[1.0, 2.0], 2), Err(AnalysisError::LagTooLarge { .. })));
        assert!(matches!(acf(&[3.0; 5], 1), Err(AnalysisError::DegenerateSeries(_))));
    }

    #[test]
    fn pacf_base_case() {
        let x = [1.0, 3.0, 2.0, 5.0, 4.0, 6.0, 5.0, 8.0];
        let a = acf(&x, 3).unwrap();
        let p = pacf(&x, 3).unwrap();
        assert_eq!(p.phi_kk[0], a.rho[1]);
        assert!(p.phi_kk.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn lag_study_flags() {
        let trend: Vec<f64> = (1..=100).map(f64::from).collect();
        let rows = lag_study(&trend, 5).unwrap();
        assert!(rows[0].significant);
        assert!(rows[0].rho > 0.95);
        assert!(lag_study(&trend, 0).unwrap().is_empty());
    }

    #[test]
    fn decomposition_recovers_alternating_season() {
        let x: Vec<f64> = (0..20).map(|t| t as f64 + if t % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let d = decompose(&x, 2).unwrap();
        assert!(d.trend[0].is_nan() && d.trend[19].is_nan());
        for t in 1..19 {
            assert!((d.trend[t] - t as f64).abs() < 1e-9);
            assert!((d.seasonal[t] - if t % 2 == 0 { 1.0 } else { -1.0 }).abs() < 1e-9);
        }
        let c = decompose(&[4.0; 12], 4).unwrap();
        assert!(c.seasonal.iter().all(|&v| v == 0.0));
        assert!(c.remainder.iter().filter(|v| !v.is_nan()).all(|&v| v == 0.0));
        assert!(matches!(decompose(&[1.0; 5], 3), Err(AnalysisError::SeriesTooShort { .. })));
    }

    #[test]
    fn jarque_bera_alternating() {
        let x: Vec<f64> = (0..12).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let r = jarque_bera(&x).unwrap();
        assert_eq!(r.statistic, 2.0);
        assert!((r.p_value.unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(!r.reject_at_5pct);
    }

    #[test]
    fn chi_square_two_df_closed_form() {
        for i in 0..200 {
            let x = i as f64 * 0.25;
            assert!((chi2_cdf(x, 2.0) - (1.0 - (-x / 2.0).exp())).abs() < 1e-12, "{x}");
        }
        assert_eq!(chi2_sf(0.0, 3.0), 1.0);
    }

    #[test]
    fn ljung_box_zero_autocorrelation() {
        // a lag-1 and lag-2 autocorrelation of exactly zero
        let x = [1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0];
        let a = acf(&x, 2).unwrap();
        assert_eq!(a.rho[1], 0.0);
        let r = ljung_box(&x, 1).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, Some(1.0));
    }

    #[test]
    fn runs_examples() {
        let alt: Vec<f64> = (0..40).map(|i| (i % 2) as f64).collect();
        let r = runs_test(&alt).unwrap();
        assert!(r.statistic > 0.0 && r.reject_at_5pct);
        let sorted: Vec<f64> = (1..=50).map(f64::from).collect();
        let r = runs_test(&sorted).unwrap();
        assert_eq!(r.df_or_lags, 2);
        assert!(r.statistic < 0.0 && r.reject_at_5pct);
        assert!(runs_test(&[1.0; 12]).is_err());
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-12);
        assert!((normal_cdf(-1.0) - 0.158_655_253_931_457_05).abs() < 1e-12);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn adf_without_lags_is_plain_dickey_fuller() {
        let x: Vec<f64> = (0..40).map(|t| ((t * 7919) % 13) as f64).collect();
        let r = adf_test(&x, 0).unwrap();
        // direct simple regression of dx on (1, x_{t-1})
        let dx: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let lag = &x[..x.len() - 1];
        let (mx, my) = (mean(lag), mean(&dx));
        let sxx: f64 = lag.iter().map(|v| (v - mx).powi(2)).sum();
        let sxy: f64 = lag.iter().zip(&dx).map(|(a, b)| (a - mx) * (b - my)).sum();
        let b = sxy / sxx;
        let a = my - b * mx;
        let rss: f64 = lag.iter().zip(&dx).map(|(u, v)| (v - a - b * u).powi(2)).sum();
        let se = (rss / (dx.len() as f64 - 2.0) / sxx).sqrt();
        assert!((r.statistic - b / se).abs() < 1e-9);
        assert_eq!(r.p_value, None);
        assert_eq!(r.reject_at_5pct, r.statistic < -2.86);
    }
}

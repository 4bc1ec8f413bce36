//! Seasonal ARIMA fitted by conditional sum of squares.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde_json::json;
use nalgebra::{DMatrix, DVector};

use super::neldermead::{self, NelderMeadOptions};
use super::{ModelError, ModelFit, ModelState};
use crate::analysis::{acf, durbin_levinson, ols};
use crate::series::{box_cox, Differencing};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub sp: usize,
    pub sd: usize,
    pub sq: usize,
    /// Seasonal period; 1 means no seasonality.
    pub period: usize,
}

impl ArimaOrder {
    pub fn new(order: [usize; 3], seasonal: [usize; 3], period: usize) -> Self {
        ArimaOrder {
            p: order[0],
            d: order[1],
            q: order[2],
            sp: seasonal[0],
            sd: seasonal[1],
            sq: seasonal[2],
            period: period.max(1),
        }
    }

    fn has_constant(&self) -> bool {
        self.d + self.sd == 0
    }

    fn n_params(&self) -> usize {
        usize::from(self.has_constant()) + self.p + self.sp + self.q + self.sq
    }
}

/// Parameter vector split into its parts.
#[derive(Debug, Clone, PartialEq)]
pub struct ArimaParams {
    pub constant: f64,
    pub phi: Vec<f64>,
    pub seasonal_phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub seasonal_theta: Vec<f64>,
}

impl ArimaParams {
    fn unpack(order: &ArimaOrder, v: &[f64]) -> Self {
        let mut it = v.iter().copied();
        let constant = if order.has_constant() { it.next().unwrap() } else { 0.0 };
        let mut take = |k: usize| (0..k).map(|_| it.next().unwrap()).collect::<Vec<f64>>();
        let phi = take(order.p);
        let seasonal_phi = take(order.sp);
        let theta = take(order.q);
        let seasonal_theta = take(order.sq);
        ArimaParams {
            constant,
            phi,
            seasonal_phi,
            theta,
            seasonal_theta,
        }
    }

    fn pack(&self, order: &ArimaOrder) -> Vec<f64> {
        let mut v = Vec::with_capacity(order.n_params());
        if order.has_constant() {
            v.push(self.constant);
        }
        v.extend(&self.phi);
        v.extend(&self.seasonal_phi);
        v.extend(&self.theta);
        v.extend(&self.seasonal_theta);
        v
    }

    /// Lag coefficients of `(1 - sum phi_i B^i)(1 - sum Phi_i B^{is})`,
    /// returned as `a` with the polynomial equal to `1 - sum a_k B^k`.
    pub fn ar_lags(&self, period: usize) -> Vec<f64> {
        let a = poly_mul(&poly(&self.phi, 1, -1.0), &poly(&self.seasonal_phi, period, -1.0));
        a[1..].iter().map(|c| -c).collect()
    }

    /// Lag coefficients of `(1 + sum theta_j B^j)(1 + sum Theta_j B^{js})`,
    /// returned as `b` with the polynomial equal to `1 + sum b_k B^k`.
    pub fn ma_lags(&self, period: usize) -> Vec<f64> {
        let b = poly_mul(&poly(&self.theta, 1, 1.0), &poly(&self.seasonal_theta, period, 1.0));
        b[1..].to_vec()
    }
}

/// Coefficients `[1, sign*c_1 at lag step, ...]` of a lag polynomial.
fn poly(c: &[f64], step: usize, sign: f64) -> Vec<f64> {
    let mut out = vec![0.0; c.len() * step + 1];
    out[0] = 1.0;
    for (i, v) in c.iter().enumerate() {
        out[(i + 1) * step] = sign * v;
    }
    out
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Smallest modulus the roots of a lag polynomial may have.
pub const ROOT_MARGIN: f64 = 1.0 + 1e-6;

/// Whether every root of `1 + sum c_k z^k` lies outside the circle of
/// radius [`ROOT_MARGIN`]. The roots are the reciprocals of the eigenvalues
/// of the companion matrix.
pub fn roots_outside_unit_circle(c: &[f64]) -> bool {
    let deg = match c.iter().rposition(|v| *v != 0.0) {
        None => return true,
        Some(i) => i + 1,
    };
    if c[..deg].iter().any(|v| !v.is_finite()) {
        return false;
    }
    // companion matrix of z^deg + c_1 z^(deg-1) + ... + c_deg
    let mut m = DMatrix::<f64>::zeros(deg, deg);
    for j in 0..deg {
        m[(0, j)] = -c[j];
    }
    for i in 1..deg {
        m[(i, i - 1)] = 1.0;
    }
    let radius = m
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    radius * ROOT_MARGIN < 1.0
}

/// Conditional sum of squares with pre-sample values and errors set to zero.
/// Returns the residual series.
pub fn css_residuals(w: &[f64], constant: f64, ar: &[f64], ma: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; w.len()];
    for t in 0..w.len() {
        let mut pred = constant;
        for (i, a) in ar.iter().enumerate() {
            if t > i {
                pred += a * w[t - i - 1];
            }
        }
        for (j, b) in ma.iter().enumerate() {
            if t > j {
                pred += b * e[t - j - 1];
            }
        }
        e[t] = w[t] - pred;
    }
    e
}

/// The objective minimized by [`fit_arima`]; infinite outside the
/// stationary and invertible region.
pub fn css_objective(order: &ArimaOrder, w: &[f64], v: &[f64]) -> f64 {
    let params = ArimaParams::unpack(order, v);
    let ar = params.ar_lags(order.period);
    let ma = params.ma_lags(order.period);
    let neg_ar: Vec<f64> = ar.iter().map(|a| -a).collect();
    if !roots_outside_unit_circle(&neg_ar) || !roots_outside_unit_circle(&ma) {
        return f64::INFINITY;
    }
    css_residuals(w, params.constant, &ar, &ma)
        .iter()
        .map(|e| e * e)
        .sum()
}

/// Hannan-Rissanen style start: residuals of a long autoregression stand in
/// for the unobserved errors in a linear regression on lagged values and
/// lagged residuals.
fn initial_guess(order: &ArimaOrder, w: &[f64]) -> ArimaParams {
    let mut guess = ArimaParams {
        constant: if order.has_constant() { crate::series::mean(w) } else { 0.0 },
        phi: vec![0.0; order.p],
        seasonal_phi: vec![0.0; order.sp],
        theta: vec![0.0; order.q],
        seasonal_theta: vec![0.0; order.sq],
    };
    let (p, q) = (order.p, order.q);
    if p + q == 0 {
        return guess;
    }
    let n = w.len();
    let long = (p.max(q) + 3).max(((n as f64).ln().powi(2)) as usize).min(n / 3);
    let Ok(a) = acf(w, long.min(n - 1)) else { return guess };
    let Ok(dl) = durbin_levinson(&a.rho, long.min(n - 1)) else { return guess };
    let m = crate::series::mean(w);
    let resid: Vec<f64> = (0..n)
        .map(|t| {
            if t < long {
                0.0
            } else {
                w[t] - m - (0..long).map(|i| dl.phi[i] * (w[t - i - 1] - m)).sum::<f64>()
            }
        })
        .collect();
    let start = long + q;
    if n <= start + p + q + 2 {
        return guess;
    }
    let rows = n - start;
    let cols = 1 + p + q;
    let mut x = DMatrix::zeros(rows, cols);
    let mut y = DVector::zeros(rows);
    for (r, t) in (start..n).enumerate() {
        y[r] = w[t];
        x[(r, 0)] = 1.0;
        for i in 0..p {
            x[(r, 1 + i)] = w[t - i - 1];
        }
        for j in 0..q {
            x[(r, 1 + p + j)] = resid[t - j - 1];
        }
    }
    if let Ok((beta, _, _)) = ols(&x, &y) {
        if order.has_constant() {
            guess.constant = beta[0];
        }
        guess.phi = (0..p).map(|i| beta[1 + i]).collect();
        guess.theta = (0..q).map(|j| beta[1 + p + j]).collect();
    }
    guess
}

/// Pulls a starting point back toward zero until it is admissible.
fn make_admissible(order: &ArimaOrder, w: &[f64], mut guess: ArimaParams) -> Vec<f64> {
    for _ in 0..60 {
        let v = guess.pack(order);
        if css_objective(order, w, &v).is_finite() {
            return v;
        }
        for c in guess
            .phi
            .iter_mut()
            .chain(guess.seasonal_phi.iter_mut())
            .chain(guess.theta.iter_mut())
            .chain(guess.seasonal_theta.iter_mut())
        {
            *c *= 0.5;
        }
    }
    guess.phi.fill(0.0);
    guess.seasonal_phi.fill(0.0);
    guess.theta.fill(0.0);
    guess.seasonal_theta.fill(0.0);
    guess.pack(order)
}

pub fn fit_arima(x: &[f64], order: ArimaOrder, lambda: Option<f64>) -> Result<ModelFit, ModelError> {
    super::require_complete(x)?;
    let mut warnings = Vec::new();
    if order.period <= 1 && order.sp + order.sd + order.sq > 0 {
        warnings.push(
            "SeasonalPeriod: seasonal orders given without a seasonal period; they act on lag 1".to_string(),
        );
    }
    let z = match lambda {
        Some(l) => box_cox(x, l)?,
        None => x.to_vec(),
    };
    let lags = Differencing::lags(order.d, order.sd, order.period);
    let (w, diff) = Differencing::apply(&z, lags)?;
    let needed = 10 + order.p + order.q + order.sp + order.sq;
    if w.len() < needed {
        return Err(ModelError::SeriesTooShort {
            len: w.len(),
            needed: format!("{needed} observations after differencing"),
        });
    }

    let x0 = make_admissible(&order, &w, initial_guess(&order, &w));
    let opts = NelderMeadOptions {
        step: 0.1,
        ..NelderMeadOptions::default()
    };
    let nm = neldermead::minimize(|v| css_objective(&order, &w, v), &x0, opts);
    if !nm.converged {
        warnings.push(format!(
            "NonConvergence: simplex did not converge in {} iterations",
            nm.iterations
        ));
    }
    let params = ArimaParams::unpack(&order, &nm.x);
    let ar = params.ar_lags(order.period);
    let ma = params.ma_lags(order.period);
    let residuals = css_residuals(&w, params.constant, &ar, &ma);
    let fitted: Vec<f64> = w.iter().zip(&residuals).map(|(a, e)| a - e).collect();

    let mut coefficients = IndexMap::new();
    if order.has_constant() {
        coefficients.insert("intercept".to_string(), params.constant);
    }
    let named = [
        ("phi", &params.phi),
        ("Phi", &params.seasonal_phi),
        ("theta", &params.theta),
        ("Theta", &params.seasonal_theta),
    ];
    for (prefix, values) in named {
        for (i, v) in values.iter().enumerate() {
            coefficients.insert(format!("{prefix}.{}", i + 1), *v);
        }
    }

    Ok(ModelFit {
        model: "tswf:ARIMA".into(),
        params_resolved: BTreeMap::from([
            ("order".to_string(), json!([order.p, order.d, order.q])),
            ("seasonal".to_string(), json!([order.sp, order.sd, order.sq])),
            ("period".to_string(), json!(order.period)),
            ("lambda".to_string(), json!(lambda)),
        ]),
        coefficients,
        fitted,
        residuals: residuals.clone(),
        training_loss: nm.value,
        converged: nm.converged,
        iterations: nm.iterations,
        warnings,
        state: ModelState::Arima {
            constant: params.constant,
            ar,
            ma,
            w,
            e: residuals,
            diff,
            lambda,
        },
    })
}

/// Forecasts on the original scale.
pub(super) fn forecast_arima(
    constant: f64,
    ar: &[f64],
    ma: &[f64],
    w: &[f64],
    e: &[f64],
    diff: &Differencing,
    lambda: Option<f64>,
    h: usize,
) -> Vec<f64> {
    let n = w.len();
    let mut ws = w.to_vec();
    let mut es = e.to_vec();
    for t in n..n + h {
        let mut pred = constant;
        for (i, a) in ar.iter().enumerate() {
            if t > i {
                pred += a * ws[t - i - 1];
            }
        }
        for (j, b) in ma.iter().enumerate() {
            if t > j {
                pred += b * es[t - j - 1];
            }
        }
        ws.push(pred);
        es.push(0.0);
    }
    let z = diff.extend(&ws[n..]);
    match lambda {
        Some(l) => crate::series::inverse_box_cox(&z, l),
        None => z,
    }
}

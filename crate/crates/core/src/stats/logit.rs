//! Binomial logit by iteratively reweighted least squares, with sandwich
//! standard errors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Z_975;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovKind {
    #[default]
    Hc0,
    /// HC0 scaled by n / (n - k)
    Hc1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub cov: CovKind,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { max_iter: 50, tol: 1e-10, cov: CovKind::Hc0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogitFit {
    pub beta: DVector<f64>,
    pub fitted: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// per coefficient: no finite estimate exists (separation)
    pub separated: Vec<bool>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_lik(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    eta.iter()
        .zip(y.iter())
        .map(|(&e, &yi)| {
            // log(1 + exp(e)) computed stably
            let softplus = if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() };
            yi * e - softplus
        })
        .sum()
}

/// Columns that are linear combinations of earlier columns.
pub fn collinear_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut out = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let scale = col.norm().max(1.0);
        let mut r = col;
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&r);
                r -= q * proj;
            }
        }
        let norm = r.norm();
        if norm <= 1e-9 * scale {
            out.push(j);
        } else {
            basis.push(r / norm);
        }
    }
    out
}

fn binary_column(x: &DMatrix<f64>, j: usize) -> bool {
    x.column(j).iter().all(|&v| v == 0.0 || v == 1.0)
}

/// Maximum-likelihood logit. A singular design is an error naming the
/// collinear columns; separation yields a flagged, unconverged fit.
pub fn fit_logistic(y: &[bool], x: &DMatrix<f64>, names: &[String], opts: &FitOptions) -> Result<LogitFit> {
    let (n, k) = x.shape();
    if y.len() != n || names.len() != k {
        return Err(Error::invalid(format!("design is {n}x{k} but got {} outcomes and {} names", y.len(), names.len())));
    }
    if n < k {
        return Err(Error::invalid(format!("{n} rows cannot identify {k} coefficients")));
    }
    let dependent = collinear_columns(x);
    if !dependent.is_empty() {
        return Err(Error::SingularDesign(dependent.into_iter().map(|j| names[j].clone()).collect()));
    }
    let yv = DVector::from_iterator(n, y.iter().map(|&b| b as u8 as f64));

    // a binary indicator whose active rows share one outcome has no finite MLE
    let mut separated: Vec<bool> = (0..k)
        .map(|j| {
            let col = x.column(j);
            if !binary_column(x, j) {
                return false;
            }
            let on: Vec<f64> = (0..n).filter(|&i| col[i] == 1.0).map(|i| yv[i]).collect();
            !on.is_empty() && (on.iter().all(|&v| v == 1.0) || on.iter().all(|&v| v == 0.0))
        })
        .collect();

    let mut beta = DVector::zeros(k);
    let mut ll = log_lik(x, &yv, &beta);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let p = (x * &beta).map(sigmoid);
        let w = p.map(|pi| pi * (1.0 - pi));
        let xw = DMatrix::from_fn(n, k, |i, j| x[(i, j)] * w[i]);
        let info = x.transpose() * xw;
        let grad = x.transpose() * (&yv - &p);
        let Some(chol) = info.cholesky() else {
            break;
        };
        let mut step = chol.solve(&grad);
        let mut candidate = &beta + &step;
        let mut cand_ll = log_lik(x, &yv, &candidate);
        let mut halvings = 0;
        while cand_ll < ll - 1e-12 && halvings < 30 {
            step *= 0.5;
            candidate = &beta + &step;
            cand_ll = log_lik(x, &yv, &candidate);
            halvings += 1;
        }
        beta = candidate;
        ll = cand_ll;
        if step.amax() < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        for (j, s) in separated.iter_mut().enumerate() {
            *s |= beta[j].abs() > 10.0;
        }
    }
    let fitted = (x * &beta).map(sigmoid);
    Ok(LogitFit { beta, fitted, converged, iterations, separated })
}

fn bread(x: &DMatrix<f64>, fitted: &DVector<f64>) -> DMatrix<f64> {
    let (n, k) = x.shape();
    let xw = DMatrix::from_fn(n, k, |i, j| x[(i, j)] * fitted[i] * (1.0 - fitted[i]));
    x.transpose() * xw
}

/// Inverse Fisher information at the fitted values.
pub fn model_cov(fit: &LogitFit, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    bread(x, &fit.fitted)
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::invalid("information matrix is singular"))
}

/// Sandwich covariance `B^-1 M B^-1` with `M = sum x x' (y - p)^2`.
pub fn robust_cov(fit: &LogitFit, x: &DMatrix<f64>, y: &[bool], kind: CovKind) -> Result<DMatrix<f64>> {
    let (n, k) = x.shape();
    let b_inv = model_cov(fit, x)?;
    let xr = DMatrix::from_fn(n, k, |i, j| x[(i, j)] * (y[i] as u8 as f64 - fit.fitted[i]));
    let meat = xr.transpose() * &xr;
    let mut cov = &b_inv * meat * &b_inv;
    if kind == CovKind::Hc1 {
        if n <= k {
            return Err(Error::invalid("HC1 needs more rows than coefficients"));
        }
        cov *= n as f64 / (n - k) as f64;
    }
    Ok(cov)
}

/// A fitted model in report form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitModel {
    pub outcome: String,
    pub level: String,
    pub names: Vec<String>,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub ci95: Vec<(f64, f64)>,
    pub cov_kind: CovKind,
    pub converged: bool,
    pub iterations: usize,
    pub separated: Vec<bool>,
    pub n: usize,
}

/// Fits and attaches robust intervals `beta +- 1.959964 se`.
pub fn fit_model(
    outcome: &str,
    level: &str,
    y: &[bool],
    x: &DMatrix<f64>,
    names: &[String],
    opts: &FitOptions,
) -> Result<LogitModel> {
    let fit = fit_logistic(y, x, names, opts)?;
    let se: Vec<f64> = match robust_cov(&fit, x, y, opts.cov) {
        Ok(cov) => cov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect(),
        Err(_) => vec![f64::NAN; names.len()],
    };
    let beta: Vec<f64> = fit.beta.iter().copied().collect();
    let ci95 = beta.iter().zip(&se).map(|(b, s)| (b - Z_975 * s, b + Z_975 * s)).collect();
    Ok(LogitModel {
        outcome: outcome.to_owned(),
        level: level.to_owned(),
        names: names.to_vec(),
        beta,
        se,
        ci95,
        cov_kind: opts.cov,
        converged: fit.converged,
        iterations: fit.iterations,
        separated: fit.separated,
        n: y.len(),
    })
}

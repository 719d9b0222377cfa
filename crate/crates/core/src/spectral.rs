//! EigenScore: the mean log-eigenvalue of the regularized Gram matrix of
//! sentence embeddings.
//!
//! For `K` sentence embeddings stacked as rows of `Z` (`K x d`), each row is
//! centered over its own `d` coordinates and the `K x K` Gram matrix `Σ` of
//! the centered rows is formed. The score is
//!
//! ```text
//! E = (1/K) · log det(Σ + αI) = (1/K) · Σ_i log λ_i
//! ```
//!
//! where `λ_i` are the eigenvalues of `Σ + αI`. Semantically consistent
//! generations give a nearly rank-one `Σ` (most `λ_i` sit at the `α` floor),
//! divergent generations spread mass over many eigenvalues.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regularization added to the Gram diagonal.
pub const DEFAULT_ALPHA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LogBase {
    #[default]
    #[serde(rename = "10")]
    Ten,
    #[serde(rename = "e")]
    E,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Ten => x.log10(),
            LogBase::E => x.ln(),
        }
    }
}

impl std::str::FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "10" => Ok(LogBase::Ten),
            "e" | "E" => Ok(LogBase::E),
            other => Err(Error::InvalidArgument(format!(
                "log base must be `10` or `e`, got `{other}`"
            ))),
        }
    }
}

/// Which axis the embeddings are centered over before forming the Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Subtract each row's mean over its `d` coordinates (`Zᵀ J_d Z` with `J_d = I - 11ᵀ/d`).
    #[default]
    Feature,
    /// Subtract each column's mean over the `K` rows (conventional sample covariance).
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenConfig {
    pub alpha: f64,
    pub log_base: LogBase,
    pub centering: Centering,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            log_base: LogBase::Ten,
            centering: Centering::Feature,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub score: f64,
    /// Eigenvalues of `Σ + αI`, descending.
    pub eigenvalues: Vec<f64>,
    pub alpha: f64,
    pub log_base: LogBase,
}

fn check_embeddings(z: &DMatrix<f64>) -> Result<()> {
    if z.nrows() < 2 {
        return Err(Error::InsufficientGenerations(z.nrows()));
    }
    if z.ncols() == 0 {
        return Err(Error::Dimension {
            expected: 1,
            actual: 0,
        });
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite entry in embedding matrix".into()));
    }
    Ok(())
}

/// Feature-centered Gram matrix of the rows of `z` (`K x K`).
pub fn covariance_gram(z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    covariance_gram_with(z, Centering::Feature)
}

pub fn covariance_gram_with(z: &DMatrix<f64>, centering: Centering) -> Result<DMatrix<f64>> {
    check_embeddings(z)?;
    let mut centered = z.clone();
    match centering {
        Centering::Feature => {
            for mut row in centered.row_iter_mut() {
                let mean = row.mean();
                row.add_scalar_mut(-mean);
            }
        }
        Centering::Sample => {
            for mut col in centered.column_iter_mut() {
                let mean = col.mean();
                col.add_scalar_mut(-mean);
            }
        }
    }
    let gram = &centered * centered.transpose();
    // exact symmetry for the eigensolver
    Ok((&gram + gram.transpose()) * 0.5)
}

/// Mean log of a (regularized) spectrum.
pub fn score_from_spectrum(eigenvalues: &[f64], log_base: LogBase) -> f64 {
    let sum: f64 = eigenvalues.iter().map(|&l| log_base.log(l)).sum();
    sum / eigenvalues.len() as f64
}

/// EigenScore with feature centering.
pub fn eigenscore(z: &DMatrix<f64>, alpha: f64, log_base: LogBase) -> Result<EigenResult> {
    eigenscore_with(
        z,
        &EigenConfig {
            alpha,
            log_base,
            centering: Centering::Feature,
        },
    )
}

pub fn eigenscore_with(z: &DMatrix<f64>, config: &EigenConfig) -> Result<EigenResult> {
    if !(config.alpha > 0.0 && config.alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be positive, got {}",
            config.alpha
        )));
    }
    let gram = covariance_gram_with(z, config.centering)?;
    let k = gram.nrows();
    let eig = gram
        .try_symmetric_eigen(f64::EPSILON, 1000 * k)
        .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;

    // Round-off can push eigenvalues of a PSD Gram slightly negative.
    let mut eigenvalues: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0) + config.alpha)
        .collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));

    Ok(EigenResult {
        score: score_from_spectrum(&eigenvalues, config.log_base),
        eigenvalues,
        alpha: config.alpha,
        log_base: config.log_base,
    })
}

/// `(1/K) log det(Σ + αI)` through a Cholesky factorization, without an
/// eigendecomposition.
pub fn eigenscore_logdet(z: &DMatrix<f64>, config: &EigenConfig) -> Result<f64> {
    let mut gram = covariance_gram_with(z, config.centering)?;
    let k = gram.nrows();
    for i in 0..k {
        gram[(i, i)] += config.alpha;
    }
    let ln_det = cholesky_ln_det(&gram)?;
    let ln_base = match config.log_base {
        LogBase::Ten => std::f64::consts::LN_10,
        LogBase::E => 1.0,
    };
    Ok(ln_det / ln_base / k as f64)
}

/// Natural-log determinant of a symmetric positive-definite matrix.
fn cholesky_ln_det(a: &DMatrix<f64>) -> Result<f64> {
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut ln_det = 0.0;
    for j in 0..n {
        let mut diag = a[(j, j)];
        for p in 0..j {
            diag -= l[(j, p)] * l[(j, p)];
        }
        if !(diag.is_finite() && diag > 0.0) {
            return Err(Error::Numeric(format!(
                "matrix is not positive definite (pivot {j} = {diag})"
            )));
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        ln_det += 2.0 * ljj.ln();
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(ln_det)
}

/// Differential entropy (nats) of a multivariate Gaussian with covariance `cov`:
/// `½ ln det Σ + (d/2)(ln 2π + 1)`.
pub fn differential_entropy_gaussian(cov: &DMatrix<f64>) -> Result<f64> {
    if !cov.is_square() || cov.nrows() == 0 {
        return Err(Error::Numeric(format!(
            "covariance must be square and non-empty, got {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite covariance entry".into()));
    }
    let d = cov.nrows() as f64;
    let ln_det = cholesky_ln_det(cov)?;
    Ok(0.5 * ln_det + 0.5 * d * ((2.0 * std::f64::consts::PI).ln() + 1.0))
}

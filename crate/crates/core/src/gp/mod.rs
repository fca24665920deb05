//! Gaussian-process regression on encoded domain inputs.
//!
//! Inputs are encoded into `[0,1]` (continuous and discrete) or one-hot
//! blocks (categoricals); outputs are standardized and modelled with a zero
//! prior mean. Hyperparameters are fitted by maximizing the log marginal
//! likelihood with a bounded Nelder–Mead search in log space.

mod encode;
mod fit;
mod nelder_mead;

use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Row, ValidationError};
use crate::union::tagged_union;

pub use encode::{FeatureEncoding, InputEncoding, OneHotFeature, ScaledFeature};
pub use fit::{fit, fit_targets, FitConfig, LENGTHSCALE_BOUNDS, NOISE_BOUNDS, SIGNAL_BOUNDS};
pub use nelder_mead::{nelder_mead, NelderMeadResult};

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RbfKernel {
    #[serde(default)]
    pub ard: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Matern52Kernel {
    #[serde(default)]
    pub ard: bool,
}

tagged_union! {
    pub enum Kernel {
        Rbf(RbfKernel) => "RBFKernel",
        Matern52(Matern52Kernel) => "Matern52Kernel",
    }
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::Matern52(Matern52Kernel::default())
    }
}

impl Kernel {
    pub fn ard(&self) -> bool {
        match self {
            Kernel::Rbf(k) => k.ard,
            Kernel::Matern52(k) => k.ard,
        }
    }

    /// Covariance at scaled squared distance `r2`.
    fn at(&self, r2: f64, signal_variance: f64) -> f64 {
        match self {
            Kernel::Rbf(_) => signal_variance * (-0.5 * r2).exp(),
            Kernel::Matern52(_) => {
                let r = r2.sqrt();
                let s5r = 5f64.sqrt() * r;
                signal_variance * (1.0 + s5r + 5.0 * r2 / 3.0) * (-s5r).exp()
            }
        }
    }

    /// ∂k/∂(log ℓ_d) given the per-dimension scaled squared distance `r2_d`.
    fn dlog_lengthscale(&self, r2: f64, r2_d: f64, signal_variance: f64) -> f64 {
        match self {
            Kernel::Rbf(_) => self.at(r2, signal_variance) * r2_d,
            Kernel::Matern52(_) => {
                let s5r = 5f64.sqrt() * r2.sqrt();
                5.0 / 3.0 * signal_variance * (1.0 + s5r) * (-s5r).exp() * r2_d
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GpHyperparameters {
    /// One shared lengthscale, or one per encoded dimension.
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl GpHyperparameters {
    fn lengthscale(&self, d: usize) -> f64 {
        if self.lengthscales.len() == 1 {
            self.lengthscales[0]
        } else {
            self.lengthscales[d]
        }
    }

    /// `[log ℓ.., log σ², log σ_n²]`
    pub fn to_log(&self) -> Vec<f64> {
        self.lengthscales
            .iter()
            .chain([&self.signal_variance, &self.noise_variance])
            .map(|v| v.ln())
            .collect()
    }

    pub fn from_log(theta: &[f64]) -> Self {
        let n = theta.len();
        Self {
            lengthscales: theta[..n - 2].iter().map(|t| t.exp()).collect(),
            signal_variance: theta[n - 2].exp(),
            noise_variance: theta[n - 1].exp(),
        }
    }
}

fn scaled_sq_dist(a: &[f64], b: &[f64], hp: &GpHyperparameters) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(d, (x, y))| {
            let z = (x - y) / hp.lengthscale(d);
            z * z
        })
        .sum()
}

/// Cross-covariance between encoded point sets.
pub fn kernel_matrix(
    kernel: &Kernel,
    hp: &GpHyperparameters,
    a: &[Vec<f64>],
    b: &[Vec<f64>],
) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| {
        kernel.at(scaled_sq_dist(&a[i], &b[j], hp), hp.signal_variance)
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error("output `{output}` has {measured} measured rows; at least 2 are needed")]
    TooFewRows { output: String, measured: usize },
    #[error("covariance matrix not positive definite even with jitter {JITTER_MAX:e}")]
    Factorization,
    #[error("every hyperparameter restart failed")]
    AllRestartsFailed,
    #[error("input dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("{0} training targets for {1} training rows")]
    Length(usize, usize),
}

/// Cholesky factor of `K + (σ_n² + jitter) I` with the jitter that was needed.
pub(crate) fn factorize(
    mut k: DMatrix<f64>,
    noise: f64,
) -> Result<(Cholesky<f64, Dyn>, f64), GpError> {
    for i in 0..k.nrows() {
        k[(i, i)] += noise;
    }
    if let Some(c) = k.clone().cholesky() {
        return Ok((c, 0.0));
    }
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX * 1.000001 {
        let mut kj = k.clone();
        for i in 0..kj.nrows() {
            kj[(i, i)] += jitter;
        }
        if let Some(c) = kj.cholesky() {
            return Ok((c, jitter));
        }
        jitter *= 10.0;
    }
    Err(GpError::Factorization)
}

/// Log evidence of `y` (used as given; callers standardize) under the GP.
pub fn log_marginal_likelihood(
    kernel: &Kernel,
    hp: &GpHyperparameters,
    x: &[Vec<f64>],
    y: &[f64],
) -> Result<f64, GpError> {
    if x.len() != y.len() {
        return Err(GpError::Length(y.len(), x.len()));
    }
    let (chol, _) = factorize(kernel_matrix(kernel, hp, x, x), hp.noise_variance)?;
    let yv = DVector::from_column_slice(y);
    let alpha = chol.solve(&yv);
    let logdet = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>();
    let n = y.len() as f64;
    Ok(-0.5 * yv.dot(&alpha) - 0.5 * logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln())
}

/// Gradient of [`log_marginal_likelihood`] with respect to
/// `[log ℓ.., log σ², log σ_n²]`.
pub fn log_marginal_likelihood_grad(
    kernel: &Kernel,
    hp: &GpHyperparameters,
    x: &[Vec<f64>],
    y: &[f64],
) -> Result<Vec<f64>, GpError> {
    let n = x.len();
    let kf = kernel_matrix(kernel, hp, x, x);
    let (chol, _) = factorize(kf.clone(), hp.noise_variance)?;
    let alpha = chol.solve(&DVector::from_column_slice(y));
    let w = &alpha * alpha.transpose() - chol.inverse();
    let half_trace = |dk: &DMatrix<f64>| 0.5 * w.component_mul(dk).sum();

    let dims = x.first().map_or(0, Vec::len);
    let mut grad = Vec::new();
    let ls_groups: Vec<Vec<usize>> = if hp.lengthscales.len() == 1 {
        vec![(0..dims).collect()]
    } else {
        (0..dims).map(|d| vec![d]).collect()
    };
    for group in ls_groups {
        let dk = DMatrix::from_fn(n, n, |i, j| {
            let r2 = scaled_sq_dist(&x[i], &x[j], hp);
            let r2_d: f64 = group
                .iter()
                .map(|&d| {
                    let z = (x[i][d] - x[j][d]) / hp.lengthscale(d);
                    z * z
                })
                .sum();
            kernel.dlog_lengthscale(r2, r2_d, hp.signal_variance)
        });
        grad.push(half_trace(&dk));
    }
    grad.push(half_trace(&kf));
    grad.push(half_trace(&(DMatrix::identity(n, n) * hp.noise_variance)));
    Ok(grad)
}

/// Affine output standardization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OutputTransform {
    pub mean: f64,
    pub std: f64,
}

impl OutputTransform {
    /// Sample mean and standard deviation; a zero spread maps to 1.
    pub fn fit(y: &[f64]) -> Self {
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = if y.len() > 1 {
            y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let std = var.sqrt();
        Self {
            mean,
            std: if std > 0.0 && std.is_finite() {
                std
            } else {
                1.0
            },
        }
    }

    pub fn apply(&self, y: f64) -> f64 {
        (y - self.mean) / self.std
    }
}

#[derive(Debug, Clone)]
struct Cache {
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
}

/// A fitted GP: configuration, data and hyperparameters. The factorization
/// is rebuilt lazily and is not serialized.
#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct TrainedGp {
    /// Name of the modelled quantity (an output key or a derived target).
    pub target: String,
    pub kernel: Kernel,
    pub hyperparameters: GpHyperparameters,
    pub input_transform: InputEncoding,
    pub output_transform: OutputTransform,
    /// Encoded training inputs.
    pub train_x: Vec<Vec<f64>>,
    /// Raw training targets.
    pub train_y: Vec<f64>,
    #[serde(skip)]
    #[schemars(skip)]
    cache: OnceLock<Result<Cache, GpError>>,
}

impl PartialEq for TrainedGp {
    fn eq(&self, other: &Self) -> bool {
        self.target == other.target
            && self.kernel == other.kernel
            && self.hyperparameters == other.hyperparameters
            && self.input_transform == other.input_transform
            && self.output_transform == other.output_transform
            && self.train_x == other.train_x
            && self.train_y == other.train_y
    }
}

/// Posterior mean and standard deviation in output units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub mean: f64,
    pub std: f64,
}

impl TrainedGp {
    pub fn new(
        target: impl Into<String>,
        kernel: Kernel,
        hyperparameters: GpHyperparameters,
        input_transform: InputEncoding,
        output_transform: OutputTransform,
        train_x: Vec<Vec<f64>>,
        train_y: Vec<f64>,
    ) -> Self {
        Self {
            target: target.into(),
            kernel,
            hyperparameters,
            input_transform,
            output_transform,
            train_x,
            train_y,
            cache: OnceLock::new(),
        }
    }

    fn standardized_y(&self) -> Vec<f64> {
        self.train_y
            .iter()
            .map(|&y| self.output_transform.apply(y))
            .collect()
    }

    fn cache(&self) -> Result<&Cache, GpError> {
        self.cache
            .get_or_init(|| {
                let k = kernel_matrix(
                    &self.kernel,
                    &self.hyperparameters,
                    &self.train_x,
                    &self.train_x,
                );
                let (chol, jitter) = factorize(k, self.hyperparameters.noise_variance)?;
                let alpha = chol.solve(&DVector::from_vec(self.standardized_y()));
                Ok(Cache {
                    chol,
                    alpha,
                    jitter,
                })
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Jitter added to the diagonal to factorize the training covariance.
    pub fn jitter(&self) -> Result<f64, GpError> {
        Ok(self.cache()?.jitter)
    }

    pub fn log_marginal_likelihood(&self) -> Result<f64, GpError> {
        log_marginal_likelihood(
            &self.kernel,
            &self.hyperparameters,
            &self.train_x,
            &self.standardized_y(),
        )
    }

    /// Posterior at encoded points. `latent` drops the observation noise.
    pub fn predict_encoded(&self, x: &[Vec<f64>], latent: bool) -> Result<Vec<Posterior>, GpError> {
        let dim = self.input_transform.width();
        if let Some(bad) = x.iter().find(|r| r.len() != dim) {
            return Err(GpError::Dimension {
                expected: dim,
                got: bad.len(),
            });
        }
        let cache = self.cache()?;
        let hp = &self.hyperparameters;
        let ks = kernel_matrix(&self.kernel, hp, &self.train_x, x);
        let mean = ks.transpose() * &cache.alpha;
        let v = cache
            .chol
            .l_dirty()
            .solve_lower_triangular(&ks)
            .expect("factor has a nonzero diagonal");
        let t = self.output_transform;
        Ok((0..x.len())
            .map(|j| {
                let explained = v.column(j).norm_squared();
                let mut var = hp.signal_variance - explained;
                debug_assert!(
                    var >= -1e-8 * hp.signal_variance.max(1.0),
                    "posterior variance {var}"
                );
                var = var.max(0.0);
                if !latent {
                    var += hp.noise_variance;
                }
                Posterior {
                    mean: t.mean + t.std * mean[j],
                    std: t.std * var.sqrt(),
                }
            })
            .collect())
    }

    /// Posterior at domain rows, observation noise included.
    pub fn predict(&self, rows: &[Row]) -> Result<Vec<Posterior>, GpError> {
        self.predict_encoded(&self.input_transform.encode(rows), false)
    }

    /// Posterior with observations added at fixed hyperparameters and
    /// standardization (fantasy conditioning).
    pub fn condition_on(&self, x: &[Vec<f64>], y: &[f64]) -> TrainedGp {
        let mut train_x = self.train_x.clone();
        train_x.extend(x.iter().cloned());
        let mut train_y = self.train_y.clone();
        train_y.extend_from_slice(y);
        TrainedGp::new(
            self.target.clone(),
            self.kernel.clone(),
            self.hyperparameters.clone(),
            self.input_transform.clone(),
            self.output_transform,
            train_x,
            train_y,
        )
    }

    /// Self-contained invariants; paths relative to the GP document.
    pub fn validate(&self) -> Result<(), Vec<ValidationError>> {
        let mut errors = Vec::new();
        let hp = &self.hyperparameters;
        let dim = self.input_transform.width();
        if hp.lengthscales.is_empty()
            || (hp.lengthscales.len() != 1 && hp.lengthscales.len() != dim)
        {
            errors.push(ValidationError::new(
                "hyperparameters.lengthscales",
                format!("expected 1 or {dim} lengthscales"),
            ));
        }
        if !hp
            .lengthscales
            .iter()
            .chain([&hp.signal_variance, &hp.noise_variance])
            .all(|v| v.is_finite() && *v > 0.0)
        {
            errors.push(ValidationError::new(
                "hyperparameters",
                "hyperparameters must be positive and finite",
            ));
        }
        if !(self.output_transform.std > 0.0
            && self.output_transform.std.is_finite()
            && self.output_transform.mean.is_finite())
        {
            errors.push(ValidationError::new(
                "output_transform",
                "std must be positive and finite",
            ));
        }
        if self.train_x.len() != self.train_y.len() || self.train_x.is_empty() {
            errors.push(ValidationError::new(
                "train_y",
                "need one target per training row, at least one row",
            ));
        }
        for (i, r) in self.train_x.iter().enumerate() {
            if r.len() != dim || r.iter().any(|v| !v.is_finite()) {
                errors.push(ValidationError::new(
                    format!("train_x[{i}]"),
                    format!("expected {dim} finite values"),
                ));
            }
        }
        if self.train_y.iter().any(|v| !v.is_finite()) {
            errors.push(ValidationError::new("train_y", "targets must be finite"));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(ls: f64, sv: f64, nv: f64) -> GpHyperparameters {
        GpHyperparameters {
            lengthscales: vec![ls],
            signal_variance: sv,
            noise_variance: nv,
        }
    }

    #[test]
    fn kernel_values() {
        let rbf = Kernel::Rbf(RbfKernel { ard: false });
        let k = kernel_matrix(
            &rbf,
            &hp(1.0, 1.0, 0.0),
            &[vec![0.0]],
            &[vec![1.0], vec![0.0]],
        );
        assert!((k[(0, 0)] - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(k[(0, 1)], 1.0);
        let m = Kernel::default();
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let v = kernel_matrix(
                &m,
                &hp(0.3, 2.0, 0.0),
                &[vec![0.0]],
                &[vec![i as f64 * 0.05]],
            )[(0, 0)];
            if i == 0 {
                assert_eq!(v, 2.0);
            }
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-12);
    }

    #[test]
    fn evidence_single_point() {
        let k = Kernel::default();
        let l = log_marginal_likelihood(&k, &hp(1.0, 0.5, 0.5), &[vec![0.3]], &[0.0]).unwrap();
        assert!((l + 0.918_938_533_204_672_7).abs() < 1e-12);
        let v = 0.75 + 0.25;
        let l = log_marginal_likelihood(&k, &hp(1.0, 0.75, 0.25), &[vec![0.3]], &[1.0]).unwrap();
        let expected = -0.5 / v - 0.5 * f64::ln(v) - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((l - expected).abs() < 1e-12);
    }

    #[test]
    fn jitter_rescues_duplicates() {
        let k = kernel_matrix(
            &Kernel::default(),
            &hp(1.0, 1.0, 0.0),
            &[vec![0.1], vec![0.1]],
            &[vec![0.1], vec![0.1]],
        );
        let (_, jitter) = factorize(k, 0.0).unwrap();
        assert!(jitter >= JITTER_START);
    }

    #[test]
    fn log_roundtrip() {
        let h = GpHyperparameters {
            lengthscales: vec![0.5, 2.0],
            signal_variance: 3.0,
            noise_variance: 1e-4,
        };
        let back = GpHyperparameters::from_log(&h.to_log());
        for (a, b) in back.lengthscales.iter().zip(&h.lengthscales) {
            assert!((a - b).abs() < 1e-12 * b);
        }
    }
}

//! Closed-form evaluation of the weighted L2 statistic `U_{n,a}`.
//!
//! `U_{n,a} = n * integral |Lap(psi_n)(t) - (|t|^2 - d) psi_n(t)|^2 exp(-a|t|^2) dt`
//! where `psi_n` is the empirical characteristic function of the scaled
//! residuals. Expanding the square and integrating term by term gives a
//! double sum over pairs that depends only on `||Y_j||^2` and
//! `||Y_j - Y_k||^2`.
//!
//! Internally everything is computed as the *reduced* value
//! `(a/pi)^{d/2} U_{n,a}`, which is free of the `(pi/a)^{d/2}` prefactor.
//! The table normalization `d^{-2} (a/pi)^{d/2} U_{n,a}` is then just the
//! reduced value divided by `d^2`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::sample::ScaledResiduals;
use crate::sum::NeumaierSum;

/// How a statistic value is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// `U_{n,a}` itself.
    Raw,
    /// `d^{-2} (a/pi)^{d/2} U_{n,a}`, the scale used for critical-value tables.
    #[default]
    Table1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatisticConfig {
    pub a: f64,
    pub normalization: Normalization,
}

impl StatisticConfig {
    pub fn new(a: f64) -> Result<Self> {
        validate_a(a)?;
        Ok(Self {
            a,
            normalization: Normalization::default(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatisticResult {
    /// `U_{n,a}`.
    pub u: f64,
    /// `d^{-2} (a/pi)^{d/2} U_{n,a}`.
    pub scaled: f64,
    pub a: f64,
    pub n: usize,
    pub d: usize,
}

impl StatisticResult {
    pub fn value(&self, normalization: Normalization) -> f64 {
        match normalization {
            Normalization::Raw => self.u,
            Normalization::Table1 => self.scaled,
        }
    }
}

pub(crate) fn validate_a(a: f64) -> Result<()> {
    if a.is_finite() && a > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "tuning parameter a must be positive and finite, got {a}"
        )))
    }
}

/// `(pi/a)^{d/2}`.
pub fn gaussian_mass(d: usize, a: f64) -> f64 {
    (PI / a).powf(d as f64 / 2.0)
}

/// `integral (|t|^2 - d)^2 cos(t^T c) exp(-a |t|^2) dt` over `R^d`, as a
/// function of `|c|^2`.
pub fn weight_integral(c_sq: f64, d: usize, a: f64) -> Result<f64> {
    validate_a(a)?;
    if c_sq.is_nan() || c_sq < 0.0 || d == 0 {
        return Err(Error::invalid(format!(
            "weight_integral needs c_sq >= 0 and d >= 1 (got c_sq = {c_sq}, d = {d})"
        )));
    }
    let df = d as f64;
    let poly = 16.0 * df * df * a.powi(3) * (a - 1.0)
        + 4.0 * df * (df + 2.0) * a * a
        + (8.0 * df * a * a - 4.0 * (df + 2.0) * a) * c_sq
        + c_sq * c_sq;
    Ok(gaussian_mass(d, a) * poly / (16.0 * a.powi(4)) * (-c_sq / (4.0 * a)).exp())
}

/// Per-`a` constants of the pair kernel.
#[derive(Debug, Clone, Copy)]
struct PairKernel {
    inv_4a: f64,
    inv_4a2: f64,
    shift: f64,
    inv_16a4: f64,
    constant: f64,
    linear: f64,
    diagonal_constant: f64,
    diagonal_linear: f64,
}

impl PairKernel {
    fn new(d: usize, a: f64) -> Self {
        let df = d as f64;
        let a2 = a * a;
        let constant = 16.0 * df * df * a2 * a * (a - 1.0) + 4.0 * df * (df + 2.0) * a2;
        let inv_16a4 = 1.0 / (16.0 * a2 * a2);
        Self {
            inv_4a: 1.0 / (4.0 * a),
            inv_4a2: 1.0 / (4.0 * a2),
            shift: 2.0 * a * df * (2.0 * a - 1.0),
            inv_16a4,
            constant,
            linear: 8.0 * df * a2 - 4.0 * (df + 2.0) * a,
            // j == k: distance zero, exponential one.
            diagonal_constant: df * df * (a - 1.0) / a + df * (df + 2.0) / (4.0 * a2),
            diagonal_linear: df * (2.0 * a - 1.0) / a,
        }
    }

    #[inline]
    fn off_diagonal(&self, aj: f64, ak: f64, dist_sq: f64) -> f64 {
        let e = (-dist_sq * self.inv_4a).exp();
        let product = aj * ak;
        let cross = (aj + ak) * self.inv_4a2 * (dist_sq + self.shift);
        let quartic = self.inv_16a4 * (self.constant + dist_sq * dist_sq + self.linear * dist_sq);
        e * (product - cross + quartic)
    }

    #[inline]
    fn diagonal(&self, aj: f64) -> f64 {
        aj * aj - aj * self.diagonal_linear + self.diagonal_constant
    }
}

/// Reduced values `(a/pi)^{d/2} U_{n,a}` for every `a` in the grid, sharing
/// one pass over the cached pairwise distances.
pub fn reduced_statistic_grid(y: &ScaledResiduals, a_grid: &[f64]) -> Result<Vec<f64>> {
    for &a in a_grid {
        validate_a(a)?;
    }
    let (n, d) = (y.n(), y.d());
    let kernels: Vec<PairKernel> = a_grid.iter().map(|&a| PairKernel::new(d, a)).collect();
    let norms = y.sq_norms();
    let dists = y.packed_sq_dists();

    let mut off = vec![NeumaierSum::new(); kernels.len()];
    let mut idx = 0;
    for j in 0..n {
        let aj = norms[j];
        for &ak in &norms[j + 1..] {
            let dist_sq = dists[idx];
            idx += 1;
            for (acc, k) in off.iter_mut().zip(&kernels) {
                acc.add(k.off_diagonal(aj, ak, dist_sq));
            }
        }
    }

    Ok(kernels
        .iter()
        .zip(off)
        .map(|(k, acc)| {
            let mut total = NeumaierSum::new();
            total.add(2.0 * acc.value());
            for &aj in norms {
                total.add(k.diagonal(aj));
            }
            total.value() / n as f64
        })
        .collect())
}

/// `U_{n,a}` with both normalizations.
pub fn u_statistic(y: &ScaledResiduals, cfg: &StatisticConfig) -> Result<StatisticResult> {
    Ok(u_statistic_grid(y, &[cfg.a])?.remove(0))
}

/// `U_{n,a}` over a grid of tuning parameters.
pub fn u_statistic_grid(y: &ScaledResiduals, a_grid: &[f64]) -> Result<Vec<StatisticResult>> {
    let d = y.d();
    let d2 = (d * d) as f64;
    Ok(reduced_statistic_grid(y, a_grid)?
        .into_iter()
        .zip(a_grid)
        .map(|(reduced, &a)| StatisticResult {
            u: gaussian_mass(d, a) * reduced,
            scaled: reduced / d2,
            a,
            n: y.n(),
            d,
        })
        .collect())
}

/// Table-normalized values only; the Monte Carlo hot path.
pub(crate) fn scaled_statistic_grid(y: &ScaledResiduals, a_grid: &[f64]) -> Result<Vec<f64>> {
    let d2 = (y.d() * y.d()) as f64;
    let mut v = reduced_statistic_grid(y, a_grid)?;
    v.iter_mut().for_each(|x| *x /= d2);
    Ok(v)
}

/// Mardia's multivariate kurtosis `(1/n) sum ||Y_j||^4`.
pub fn mardia_kurtosis(y: &ScaledResiduals) -> f64 {
    let s: NeumaierSum = y.sq_norms().iter().map(|r| r * r).collect();
    s.value() / y.n() as f64
}

/// Mori-Rohatgi-Szekely skewness `(1/n^2) sum_{j,k} ||Y_j||^2 ||Y_k||^2 Y_j^T Y_k`,
/// evaluated as the squared norm of `(1/n) sum ||Y_j||^2 Y_j`.
pub fn mrs_skewness(y: &ScaledResiduals) -> f64 {
    let d = y.d();
    let mut acc = vec![NeumaierSum::new(); d];
    for (row, &r) in y.rows().zip(y.sq_norms()) {
        for (a, v) in acc.iter_mut().zip(row) {
            a.add(r * v);
        }
    }
    let n = y.n() as f64;
    acc.iter().map(|a| (a.value() / n).powi(2)).sum()
}

/// `(a/pi)^{d/2} U_{n,a} - d(d+2)/(4a^2)`; tends to
/// `mardia_kurtosis - d^2` as `a -> 0`.
pub fn small_a_transform(y: &ScaledResiduals, a: f64) -> Result<f64> {
    let reduced = reduced_statistic_grid(y, &[a])?[0];
    let d = y.d() as f64;
    Ok(reduced - d * (d + 2.0) / (4.0 * a * a))
}

/// `2 a^{d/2+1} U_{n,a} / (n pi^{d/2})`; tends to `mrs_skewness` as
/// `a -> infinity`.
pub fn large_a_transform(y: &ScaledResiduals, a: f64) -> Result<f64> {
    let reduced = reduced_statistic_grid(y, &[a])?[0];
    Ok(2.0 * a * reduced / y.n() as f64)
}

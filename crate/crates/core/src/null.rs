//! Null distribution of the statistic: the limiting covariance kernel, the
//! exact mean of the limit law, Monte Carlo critical values and p-values
//! for finite `n`, and limit-law quantiles from a Nystrom approximation of
//! the covariance operator.
//!
//! All Monte Carlo work is split into replications; replication `r` draws
//! from substream `r` of the master seed (see [`crate::rng`]), so results
//! do not depend on the rayon pool size.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{dot, gauss_hermite_grid, MAX_QUADRATURE_DIM};
use crate::rng::{derive_seed, Substreams};
use crate::sample::standardize_rows;
use crate::statistic::{gaussian_mass, scaled_statistic_grid, validate_a};

/// Minimum Monte Carlo replications for critical values and p-values.
pub const MIN_REPS: usize = 1_000;

/// Eigenvalues below `-NEGATIVE_EIGEN_WARN * lambda_1` are reported.
pub const NEGATIVE_EIGEN_WARN: f64 = 1e-8;

/// Covariance kernel `K(s, t)` of the limiting Gaussian process.
pub fn cov_kernel(s: &[f64], t: &[f64]) -> f64 {
    debug_assert_eq!(s.len(), t.len());
    let d = s.len() as f64;
    let ss = dot(s, s);
    let tt = dot(t, t);
    let st = dot(s, t);
    let diff = ss + tt - 2.0 * st;
    let psi_diff = (-diff / 2.0).exp();
    let psi_s_psi_t = (-(ss + tt) / 2.0).exp();
    psi_diff * (2.0 * d + ss * tt - 2.0 * st * diff - 4.0 * diff)
        + 2.0 * psi_s_psi_t * (2.0 * ss + 2.0 * tt - d - 2.0 * st - 4.0 * st * st)
}

/// Exact mean of the limit null law, `integral K(t, t) w_a(t) dt`.
pub fn mean_limit(d: usize, a: f64) -> Result<f64> {
    validate_a(a)?;
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let df = d as f64;
    let gamma = (a / (a + 1.0)).powf(df / 2.0);
    let a1 = a + 1.0;
    let bracket =
        1.0 - gamma + gamma / a1 - (df + 2.0) * gamma / (a1 * a1) + (df + 2.0) / (8.0 * a * a);
    Ok(2.0 * df * gaussian_mass(d, a) * bracket)
}

/// Order statistic at 1-based rank `ceil((1 - alpha) * len)` of an ascending
/// slice; no interpolation.
pub fn upper_quantile(sorted: &[f64], alpha: f64) -> f64 {
    assert!(!sorted.is_empty());
    let len = sorted.len();
    // Guard against 0.95 * 100_000 = 95000.00000000001.
    let rank = ((1.0 - alpha) * len as f64 - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(len) - 1]
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

fn validate_reps(reps: usize) -> Result<()> {
    if reps >= MIN_REPS {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "need at least {MIN_REPS} replications, got {reps}"
        )))
    }
}

/// Sample size of a critical-value table: finite, or the limit law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SampleSize {
    Finite(usize),
    Infinite,
}

impl fmt::Display for SampleSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleSize::Finite(n) => write!(f, "{n}"),
            SampleSize::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for SampleSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s == "∞" {
            return Ok(SampleSize::Infinite);
        }
        s.parse().map(SampleSize::Finite).map_err(|_| {
            Error::invalid(format!(
                "sample size must be an integer or \"inf\", got {s:?}"
            ))
        })
    }
}

impl Serialize for SampleSize {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SampleSize::Finite(n) => s.serialize_u64(*n as u64),
            SampleSize::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for SampleSize {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(u64),
            Str(String),
        }
        match Repr::deserialize(de)? {
            Repr::Num(n) => Ok(SampleSize::Finite(n as usize)),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub a: f64,
    /// Empirical `(1 - alpha)` quantile of `d^{-2} (a/pi)^{d/2} U_{n,a}`.
    pub quantile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValueTable {
    pub d: usize,
    pub n: SampleSize,
    pub alpha: f64,
    /// Replications (limit-law simulations for `n = inf`).
    pub reps: usize,
    pub seed: u64,
    /// Nystrom discretization size, for `n = inf` only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<NystromNodes>,
    pub entries: Vec<CriticalValue>,
}

impl CriticalValueTable {
    /// Critical value for tuning parameter `a`, matched to 1e-12.
    pub fn quantile_for(&self, a: f64) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| (e.a - a).abs() <= 1e-12 * a.abs().max(1.0))
            .map(|e| e.quantile)
    }

    pub fn a_grid(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.a).collect()
    }
}

/// Null replicates of the table-normalized statistic, one sorted vector per
/// tuning parameter.
#[derive(Debug, Clone)]
pub struct NullSample {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub a_grid: Vec<f64>,
    sorted: Vec<Vec<f64>>,
}

impl NullSample {
    pub fn reps(&self) -> usize {
        self.sorted.first().map_or(0, Vec::len)
    }

    /// Ascending replicates for the `i`-th grid entry.
    pub fn sorted_values(&self, i: usize) -> &[f64] {
        &self.sorted[i]
    }

    pub fn quantile(&self, i: usize, alpha: f64) -> f64 {
        upper_quantile(&self.sorted[i], alpha)
    }

    /// Add-one Monte Carlo p-value `(1 + #{replicate >= observed}) / (reps + 1)`.
    pub fn p_value(&self, i: usize, observed: f64) -> f64 {
        let values = &self.sorted[i];
        let below = values.partition_point(|&v| v < observed);
        let at_least = values.len() - below;
        (1 + at_least) as f64 / (values.len() + 1) as f64
    }
}

/// Simulate `reps` standard normal samples of size `n` in dimension `d` and
/// evaluate the table-normalized statistic over `a_grid` for each.
pub fn simulate_null(
    n: usize,
    d: usize,
    a_grid: &[f64],
    reps: usize,
    seed: u64,
) -> Result<NullSample> {
    if d == 0 || n <= d {
        return Err(Error::TooFewObservations { n, d });
    }
    if a_grid.is_empty() {
        return Err(Error::invalid("a grid is empty"));
    }
    for &a in a_grid {
        validate_a(a)?;
    }
    let streams = Substreams::new(seed);
    let rows: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = streams.stream(r);
            let data: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
            let y = standardize_rows(&data, n, d)?;
            scaled_statistic_grid(&y, a_grid)
        })
        .collect::<Result<_>>()?;

    let mut sorted: Vec<Vec<f64>> = (0..a_grid.len())
        .map(|i| rows.iter().map(|r| r[i]).collect())
        .collect();
    for v in &mut sorted {
        v.sort_by(f64::total_cmp);
    }
    Ok(NullSample {
        n,
        d,
        seed,
        a_grid: a_grid.to_vec(),
        sorted,
    })
}

/// Empirical critical values of the table-normalized statistic for sample
/// size `n`, computed from `reps` simulated standard normal samples.
pub fn critical_values_mc(
    n: usize,
    d: usize,
    a_grid: &[f64],
    alpha: f64,
    reps: usize,
    seed: u64,
) -> Result<CriticalValueTable> {
    validate_alpha(alpha)?;
    validate_reps(reps)?;
    let null = simulate_null(n, d, a_grid, reps, seed)?;
    Ok(CriticalValueTable {
        d,
        n: SampleSize::Finite(n),
        alpha,
        reps,
        seed,
        m: None,
        nodes: None,
        entries: a_grid
            .iter()
            .enumerate()
            .map(|(i, &a)| CriticalValue {
                a,
                quantile: null.quantile(i, alpha),
            })
            .collect(),
    })
}

/// Monte Carlo p-value of an observed table-normalized statistic.
pub fn p_value_mc(
    u_scaled_observed: f64,
    n: usize,
    d: usize,
    a: f64,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    validate_reps(reps)?;
    let null = simulate_null(n, d, &[a], reps, seed)?;
    Ok(null.p_value(0, u_scaled_observed))
}

/// Where the Nystrom discretization places its nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NystromNodes {
    /// `m` points drawn from the normalized weight `N(0, (2a)^{-1} I_d)`,
    /// each weighted `(pi/a)^{d/2} / m`.
    #[default]
    Sampled,
    /// Tensor Gauss-Hermite rule with `floor(m^{1/d})` nodes per axis
    /// (clamped to `[10, 100]`); deterministic, `d <= 4` only.
    GaussHermite,
}

impl fmt::Display for NystromNodes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NystromNodes::Sampled => "sampled",
            NystromNodes::GaussHermite => "gauss-hermite",
        })
    }
}

impl FromStr for NystromNodes {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sampled" => Ok(NystromNodes::Sampled),
            "gauss-hermite" | "gh" => Ok(NystromNodes::GaussHermite),
            other => Err(Error::invalid(format!(
                "unknown Nystrom nodes {other:?}, expected sampled or gauss-hermite"
            ))),
        }
    }
}

/// Eigenvalue approximation of the limit law `sum lambda_i N_i^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NystromLimit {
    pub d: usize,
    pub a: f64,
    /// Requested size.
    pub m: usize,
    #[serde(default)]
    pub nodes: NystromNodes,
    /// Nodes actually used (differs from `m` for Gauss-Hermite).
    pub node_count: usize,
    /// Nonincreasing, negatives clipped to zero. Raw (unnormalized) scale.
    pub eigenvalues: Vec<f64>,
    pub seed: u64,
    /// Eigenvalues that came out negative and were clipped.
    pub clipped: usize,
    /// Of those, how many were below `-1e-8 * lambda_1`.
    pub significant_negative: usize,
}

impl NystromLimit {
    /// Sum of eigenvalues; approximates [`mean_limit`].
    pub fn trace(&self) -> f64 {
        crate::sum::compensated_sum(self.eigenvalues.iter().copied())
    }

    /// Factor converting raw values to the table normalization.
    pub fn table1_factor(&self) -> f64 {
        1.0 / (gaussian_mass(self.d, self.a) * (self.d * self.d) as f64)
    }
}

/// Nystrom eigenvalues of the covariance operator `f -> integral K(., t) f(t) w_a(t) dt`
/// with sampled nodes.
///
/// Draws `m` points from `N(0, (2a)^{-1} I_d)`, whose density is
/// proportional to `w_a`, and takes the eigenvalues of
/// `(pi/a)^{d/2} K(t_i, t_j) / m`.
pub fn nystrom_eigenvalues(d: usize, a: f64, m: usize, seed: u64) -> Result<NystromLimit> {
    nystrom_eigenvalues_with(d, a, m, seed, NystromNodes::Sampled)
}

/// Nystrom eigenvalues with a choice of node placement. With weights `w_i`
/// the matrix is `W^{1/2} K W^{1/2}`.
pub fn nystrom_eigenvalues_with(
    d: usize,
    a: f64,
    m: usize,
    seed: u64,
    nodes: NystromNodes,
) -> Result<NystromLimit> {
    validate_a(a)?;
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    if m < 200 {
        return Err(Error::invalid(format!(
            "Nystrom size m must be at least 200, got {m}"
        )));
    }
    let (points, weights): (Vec<f64>, Vec<f64>) = match nodes {
        NystromNodes::Sampled => {
            let mut rng = Substreams::new(derive_seed(seed, "nystrom-points")).stream(0);
            let sd = (2.0 * a).sqrt().recip();
            let points = (0..m * d)
                .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                .collect();
            (points, vec![gaussian_mass(d, a) / m as f64; m])
        }
        NystromNodes::GaussHermite => {
            if d > MAX_QUADRATURE_DIM {
                return Err(Error::UnsupportedDimension(d));
            }
            let per_axis = ((m as f64).powf(1.0 / d as f64) + 1e-9).floor() as usize;
            let scheme = gauss_hermite_grid(d, per_axis.clamp(10, 100), a)?;
            let points = (0..scheme.len())
                .flat_map(|i| scheme.node(i).to_vec())
                .collect();
            (points, scheme.weights().to_vec())
        }
    };
    let count = weights.len();
    let root: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let mut gram = DMatrix::<f64>::zeros(count, count);
    for i in 0..count {
        let ti = &points[i * d..(i + 1) * d];
        for j in 0..=i {
            let v = root[i] * root[j] * cov_kernel(ti, &points[j * d..(j + 1) * d]);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let mut eigenvalues: Vec<f64> = gram.symmetric_eigenvalues().iter().copied().collect();
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "Nystrom eigensolve produced non-finite values".into(),
        ));
    }
    eigenvalues.sort_by(|x, y| y.total_cmp(x));
    let top = eigenvalues[0].max(0.0);
    let mut clipped = 0;
    let mut significant_negative = 0;
    for v in &mut eigenvalues {
        if *v < 0.0 {
            clipped += 1;
            if *v < -NEGATIVE_EIGEN_WARN * top {
                significant_negative += 1;
            }
            *v = 0.0;
        }
    }
    Ok(NystromLimit {
        d,
        a,
        m,
        nodes,
        node_count: count,
        eigenvalues,
        seed,
        clipped,
        significant_negative,
    })
}

/// Table-normalized quantiles of the limit null law at each `alpha`,
/// simulated as `sum lambda_i N_i^2` over `l_sims` draws, with sampled
/// Nystrom nodes.
pub fn limit_quantiles_nystrom(
    d: usize,
    a: f64,
    m: usize,
    l_sims: usize,
    alpha_list: &[f64],
    seed: u64,
) -> Result<(Vec<f64>, NystromLimit)> {
    limit_quantiles_nystrom_with(d, a, m, l_sims, alpha_list, seed, NystromNodes::Sampled)
}

pub fn limit_quantiles_nystrom_with(
    d: usize,
    a: f64,
    m: usize,
    l_sims: usize,
    alpha_list: &[f64],
    seed: u64,
    nodes: NystromNodes,
) -> Result<(Vec<f64>, NystromLimit)> {
    if l_sims < 10_000 {
        return Err(Error::invalid(format!(
            "need at least 10000 limit simulations, got {l_sims}"
        )));
    }
    for &alpha in alpha_list {
        validate_alpha(alpha)?;
    }
    let limit = nystrom_eigenvalues_with(d, a, m, seed, nodes)?;
    let positive: Vec<f64> = limit
        .eigenvalues
        .iter()
        .copied()
        .filter(|&v| v > 0.0)
        .collect();
    let streams = Substreams::new(derive_seed(seed, "nystrom-sims"));
    let factor = limit.table1_factor();
    let mut draws: Vec<f64> = (0..l_sims as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = streams.stream(s);
            let total: f64 = positive
                .iter()
                .map(|&lambda| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    lambda * z * z
                })
                .sum();
            total * factor
        })
        .collect();
    draws.sort_by(f64::total_cmp);
    let quantiles = alpha_list
        .iter()
        .map(|&alpha| upper_quantile(&draws, alpha))
        .collect();
    Ok((quantiles, limit))
}

/// Critical-value table for the limit law (`n = inf`) over an `a` grid.
pub fn critical_values_limit(
    d: usize,
    a_grid: &[f64],
    alpha: f64,
    m: usize,
    l_sims: usize,
    seed: u64,
) -> Result<CriticalValueTable> {
    critical_values_limit_with(d, a_grid, alpha, m, l_sims, seed, NystromNodes::Sampled)
}

pub fn critical_values_limit_with(
    d: usize,
    a_grid: &[f64],
    alpha: f64,
    m: usize,
    l_sims: usize,
    seed: u64,
    nodes: NystromNodes,
) -> Result<CriticalValueTable> {
    validate_alpha(alpha)?;
    let entries = a_grid
        .iter()
        .map(|&a| {
            let (q, _) = limit_quantiles_nystrom_with(d, a, m, l_sims, &[alpha], seed, nodes)?;
            Ok(CriticalValue { a, quantile: q[0] })
        })
        .collect::<Result<_>>()?;
    Ok(CriticalValueTable {
        d,
        n: SampleSize::Infinite,
        alpha,
        reps: l_sims,
        seed,
        m: Some(m),
        nodes: Some(nodes),
        entries,
    })
}

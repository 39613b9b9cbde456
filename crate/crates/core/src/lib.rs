//! Weighted L2 test for multivariate normality based on the empirical
//! characteristic function.
//!
//! The statistic `U_{n,a}` measures how far the empirical characteristic
//! function of the scaled residuals is from solving the harmonic-oscillator
//! equation `Lap f = (|t|^2 - d) f`, weighted by `exp(-a |t|^2)`. Large values
//! reject normality.
//!
//! ```
//! use ecfnorm::{standardize, u_statistic, Sample, StatisticConfig};
//!
//! let x = Sample::from_rows(&[vec![0.1], vec![-1.3], vec![0.7], vec![2.2], vec![-0.4]]).unwrap();
//! let y = standardize(&x).unwrap();
//! let u = u_statistic(&y, &StatisticConfig::new(1.0).unwrap()).unwrap();
//! assert!(u.u >= 0.0);
//! ```

pub mod alternatives;
pub mod error;
pub mod harness;
pub mod null;
pub mod oracle;
pub mod rng;
pub mod sample;
pub mod statistic;
pub mod sum;

pub use alternatives::{parse_alternative, AlternativeSpec, Family};
pub use error::{Error, Result};
pub use null::{
    critical_values_limit, critical_values_mc, limit_quantiles_nystrom, mean_limit,
    nystrom_eigenvalues, nystrom_eigenvalues_with, p_value_mc, simulate_null, CriticalValueTable,
    NystromNodes, SampleSize,
};
pub use oracle::{gauss_hermite_grid, u_statistic_quadrature, QuadratureScheme};
pub use sample::{load_sample, parse_csv, standardize, Sample, ScaledResiduals};
pub use statistic::{
    large_a_transform, mardia_kurtosis, mrs_skewness, small_a_transform, u_statistic,
    u_statistic_grid, weight_integral, Normalization, StatisticConfig, StatisticResult,
};

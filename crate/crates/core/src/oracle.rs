//! Definition-level evaluation of the empirical characteristic function and
//! of the weighted L2 statistics by tensor Gauss-Hermite quadrature.
//!
//! This is deliberately independent of the closed form in
//! [`crate::statistic`]: it integrates `S_n(t)^2 w_a(t)` numerically, so it
//! serves as the cross-check for that formula. It is also the only
//! evaluator of the comparator statistic `T_{n,a}`, which replaces
//! `(|t|^2 - d) psi_n(t)` by the Laplacian of the normal characteristic
//! function.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sample::ScaledResiduals;
use crate::statistic::validate_a;
use crate::sum::compensated_sum;

/// Largest dimension accepted by [`gauss_hermite_grid`].
pub const MAX_QUADRATURE_DIM: usize = 4;

/// Empirical characteristic function and its Laplacian at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcfPoint {
    pub re: f64,
    pub im: f64,
    pub laplacian_re: f64,
    pub laplacian_im: f64,
}

/// `psi_n(t)` and `Lap psi_n(t) = -(1/n) sum ||Y_j||^2 exp(i t^T Y_j)`.
pub fn ecf_point(y: &ScaledResiduals, t: &[f64]) -> EcfPoint {
    let mut re = Vec::with_capacity(y.n());
    let mut im = Vec::with_capacity(y.n());
    let mut lre = Vec::with_capacity(y.n());
    let mut lim = Vec::with_capacity(y.n());
    for (row, &r) in y.rows().zip(y.sq_norms()) {
        let (s, c) = dot(t, row).sin_cos();
        re.push(c);
        im.push(s);
        lre.push(-r * c);
        lim.push(-r * s);
    }
    let n = y.n() as f64;
    EcfPoint {
        re: compensated_sum(re) / n,
        im: compensated_sum(im) / n,
        laplacian_re: compensated_sum(lre) / n,
        laplacian_im: compensated_sum(lim) / n,
    }
}

/// `S_n(t) = n^{-1/2} sum (||Y_j||^2 + ||t||^2 - d)(cos(t^T Y_j) + sin(t^T Y_j))`.
pub fn sn_process(y: &ScaledResiduals, t: &[f64]) -> f64 {
    let shift = dot(t, t) - y.d() as f64;
    let terms = y.rows().zip(y.sq_norms()).map(|(row, &r)| {
        let (s, c) = dot(t, row).sin_cos();
        (r + shift) * (c + s)
    });
    compensated_sum(terms) / (y.n() as f64).sqrt()
}

/// Tensor-product quadrature rule for `integral f(t) exp(-a |t|^2) dt`.
#[derive(Debug, Clone)]
pub struct QuadratureScheme {
    d: usize,
    a: f64,
    nodes_per_dim: usize,
    /// Flattened, `d` coordinates per node.
    nodes: Vec<f64>,
    /// Include the weight function.
    weights: Vec<f64>,
}

impl QuadratureScheme {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn nodes_per_dim(&self) -> usize {
        self.nodes_per_dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.d..(i + 1) * self.d]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `sum_i w_i f(t_i)`, evaluated in parallel and summed in node order.
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let terms: Vec<f64> = self
            .nodes
            .par_chunks_exact(self.d)
            .zip(self.weights.par_iter())
            .map(|(t, w)| w * f(t))
            .collect();
        compensated_sum(terms)
    }
}

/// Default resolution: 60 nodes per axis for `d = 1`, 40 for `d = 2, 3`,
/// 24 for `d = 4`.
pub fn default_nodes_per_dim(d: usize) -> usize {
    match d {
        1 => 60,
        2 | 3 => 40,
        _ => 24,
    }
}

/// Gauss-Hermite nodes and weights for `integral f(x) exp(-x^2) dx`,
/// computed by Newton iteration on the orthonormal Hermite recurrence.
pub fn gauss_hermite_1d(count: usize) -> (Vec<f64>, Vec<f64>) {
    const EPS: f64 = 1e-15;
    let nf = count as f64;
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; count];
    let mut w = vec![0.0; count];
    let mut z = 0.0f64;
    for i in 0..count.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=count {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let step = p1 / pp;
            z -= step;
            if step.abs() <= EPS * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[count - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[count - 1 - i] = w[i];
    }
    // Ascending order.
    x.reverse();
    w.reverse();
    (x, w)
}

/// Tensor Gauss-Hermite rule for the weight `exp(-a |t|^2)` on `R^d`, via
/// the substitution `t = u / sqrt(a)`.
pub fn gauss_hermite_grid(d: usize, nodes_per_dim: usize, a: f64) -> Result<QuadratureScheme> {
    validate_a(a)?;
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    if d > MAX_QUADRATURE_DIM {
        return Err(Error::UnsupportedDimension(d));
    }
    if !(10..=100).contains(&nodes_per_dim) {
        return Err(Error::invalid(format!(
            "nodes_per_dim must lie in [10, 100], got {nodes_per_dim}"
        )));
    }
    let (x, w) = gauss_hermite_1d(nodes_per_dim);
    let scale = a.sqrt().recip();
    let total = nodes_per_dim.pow(d as u32);
    let mut nodes = Vec::with_capacity(total * d);
    let mut weights = Vec::with_capacity(total);
    let mut index = vec![0usize; d];
    let jacobian = scale.powi(d as i32);
    for _ in 0..total {
        let mut wt = jacobian;
        for &i in &index {
            nodes.push(x[i] * scale);
            wt *= w[i];
        }
        weights.push(wt);
        // Odometer increment, last axis fastest.
        for slot in index.iter_mut().rev() {
            *slot += 1;
            if *slot < nodes_per_dim {
                break;
            }
            *slot = 0;
        }
    }
    Ok(QuadratureScheme {
        d,
        a,
        nodes_per_dim,
        nodes,
        weights,
    })
}

fn check_dim(y: &ScaledResiduals, scheme: &QuadratureScheme) -> Result<()> {
    if y.d() != scheme.d() {
        return Err(Error::DimensionMismatch {
            expected: scheme.d(),
            found: y.d(),
        });
    }
    Ok(())
}

/// `U_{n,a} = integral S_n(t)^2 w_a(t) dt` by quadrature.
pub fn u_statistic_quadrature(y: &ScaledResiduals, scheme: &QuadratureScheme) -> Result<f64> {
    check_dim(y, scheme)?;
    Ok(scheme.integrate(|t| sn_process(y, t).powi(2)))
}

/// `T_{n,a} = n integral |Lap psi_n(t) - Lap psi(t)|^2 w_a(t) dt` by
/// quadrature, with `Lap psi(t) = (|t|^2 - d) exp(-|t|^2 / 2)`.
pub fn t_statistic_quadrature(y: &ScaledResiduals, scheme: &QuadratureScheme) -> Result<f64> {
    check_dim(y, scheme)?;
    let d = y.d() as f64;
    let integral = scheme.integrate(|t| {
        let p = ecf_point(y, t);
        let tt = dot(t, t);
        let target = (tt - d) * (-tt / 2.0).exp();
        (p.laplacian_re - target).powi(2) + p.laplacian_im.powi(2)
    });
    Ok(y.n() as f64 * integral)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn one_dim_rule_moments() {
        for count in [10, 20, 57, 100] {
            let (x, w) = gauss_hermite_1d(count);
            assert_relative_eq!(w.iter().sum::<f64>(), PI.sqrt(), max_relative = 1e-13);
            let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
            assert_relative_eq!(m2, PI.sqrt() / 2.0, max_relative = 1e-12);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn second_moment_d1() {
        let s = gauss_hermite_grid(1, 20, 1.0).unwrap();
        let v = s.integrate(|t| t[0] * t[0]);
        assert!((v - PI.sqrt() / 2.0).abs() < 1e-13);
    }

    #[test]
    fn normalization_d2() {
        let s = gauss_hermite_grid(2, 30, 2.0).unwrap();
        assert!((s.integrate(|_| 1.0) - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn fourth_moment_d3() {
        let s = gauss_hermite_grid(3, 40, 1.0).unwrap();
        let v = s.integrate(|t| dot(t, t).powi(2));
        assert_relative_eq!(v, 15.0 * PI.powf(1.5) / 4.0, max_relative = 1e-10);
    }

    #[test]
    fn weights_reproduce_gaussian_mass() {
        for d in 1..=3 {
            for a in [0.3, 1.0, 4.0] {
                let s = gauss_hermite_grid(d, 12, a).unwrap();
                let mass = (PI / a).powf(d as f64 / 2.0);
                assert_relative_eq!(
                    compensated_sum(s.weights().iter().copied()),
                    mass,
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn grid_guards() {
        assert!(matches!(
            gauss_hermite_grid(5, 20, 1.0),
            Err(Error::UnsupportedDimension(5))
        ));
        assert!(gauss_hermite_grid(2, 9, 1.0).is_err());
        assert!(gauss_hermite_grid(2, 101, 1.0).is_err());
        assert!(gauss_hermite_grid(2, 20, 0.0).is_err());
    }

    #[test]
    fn sn_process_hand_value() {
        let y = ScaledResiduals::from_standardized(vec![-1.0, 1.0], 2, 1).unwrap();
        assert_relative_eq!(
            sn_process(&y, &[1.0]),
            2f64.sqrt() * 1f64.cos(),
            max_relative = 1e-14
        );
        assert_eq!(sn_process(&y, &[0.0]), 0.0);
    }

    #[test]
    fn ecf_bounds() {
        let y = ScaledResiduals::from_standardized(vec![-1.3, 0.2, 1.1], 3, 1).unwrap();
        let p = ecf_point(&y, &[2.7]);
        assert!(p.re.abs() <= 1.0 && p.im.abs() <= 1.0);
        let max_r = y.sq_norms().iter().cloned().fold(0.0, f64::max);
        assert!(p.laplacian_re.abs() <= max_r && p.laplacian_im.abs() <= max_r);
    }
}

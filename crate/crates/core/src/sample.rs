//! Data ingestion and scaled residuals.
//!
//! Every statistic in this crate is a function of the scaled residuals
//! `Y_j = S^{-1/2} (X_j - mean)`, where `S` is the sample covariance with
//! the `1/n` denominator and `S^{-1/2}` is the symmetric positive definite
//! inverse square root.

use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue floor below which a covariance matrix is singular.
pub const SINGULARITY_THRESHOLD: f64 = 1e-12;

/// Absolute tolerance for the symmetry check in [`inv_sqrt_sym`], scaled by
/// the largest entry.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// A raw `n x d` sample, one observation per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: DMatrix<f64>,
    source: Option<String>,
}

impl Sample {
    /// Validates `n >= d + 1` and finiteness.
    pub fn new(values: DMatrix<f64>, source: Option<String>) -> Result<Self> {
        let (n, d) = values.shape();
        if n == 0 || d == 0 {
            return Err(Error::Empty);
        }
        if n <= d {
            return Err(Error::TooFewObservations { n, d });
        }
        for j in 0..n {
            for c in 0..d {
                if !values[(j, c)].is_finite() {
                    return Err(Error::NonFinite {
                        row: j + 1,
                        column: c + 1,
                    });
                }
            }
        }
        Ok(Self { values, source })
    }

    /// Build from a row-major buffer of `n * d` values.
    pub fn from_row_major(data: &[f64], n: usize, d: usize) -> Result<Self> {
        if data.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                found: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, d, data), None)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).ok_or(Error::Empty)?;
        let mut data = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::RaggedRow {
                    row: i + 1,
                    expected: d,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(&data, rows.len(), d)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    /// Apply `x -> A x + b` to every observation.
    pub fn affine(&self, a: &DMatrix<f64>, b: &[f64]) -> Result<Self> {
        let d = self.d();
        if a.shape() != (d, d) || b.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: b.len(),
            });
        }
        let mut out = &self.values * a.transpose();
        for mut row in out.row_iter_mut() {
            for (x, shift) in row.iter_mut().zip(b) {
                *x += shift;
            }
        }
        Self::new(out, self.source.clone())
    }
}

/// Read a comma-separated numeric table from `path`.
///
/// A single header row is skipped when any of its cells fails to parse as
/// a number. Whitespace around cells is ignored and blank lines are skipped.
pub fn load_sample(path: impl AsRef<Path>) -> Result<Sample> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    let mut sample = parse_csv(&text)?;
    sample.source = Some(path.display().to_string());
    Ok(sample)
}

/// Parse CSV text; see [`load_sample`].
pub fn parse_csv(text: &str) -> Result<Sample> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut data = Vec::new();
    let mut width = None;
    let mut n = 0;
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, &str>> = record
            .iter()
            .map(|cell| cell.parse::<f64>().map_err(|_| cell))
            .collect();
        if idx == 0 && parsed.iter().any(|c| c.is_err()) {
            continue;
        }
        let expected = *width.get_or_insert(parsed.len());
        if parsed.len() != expected {
            return Err(Error::RaggedRow {
                row: line,
                expected,
                found: parsed.len(),
            });
        }
        for (c, cell) in parsed.into_iter().enumerate() {
            match cell {
                Ok(v) if v.is_finite() => data.push(v),
                Ok(_) => {
                    return Err(Error::NonFinite {
                        row: line,
                        column: c + 1,
                    })
                }
                Err(s) => {
                    return Err(Error::NonNumeric {
                        row: line,
                        column: c + 1,
                        cell: s.to_string(),
                    })
                }
            }
        }
        n += 1;
    }
    let d = width.ok_or(Error::Empty)?;
    Sample::from_row_major(&data, n, d)
}

/// Symmetric positive definite inverse square root of a symmetric positive
/// definite matrix, via eigendecomposition.
///
/// Fails when the smallest eigenvalue is at most `1e-12` times the largest.
pub fn inv_sqrt_sym(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = m.nrows();
    if m.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: m.ncols(),
        });
    }
    let scale = m.amax().max(1.0);
    let asymmetry = (m - m.transpose()).amax();
    if asymmetry > SYMMETRY_TOLERANCE * scale {
        return Err(Error::NotSymmetric { asymmetry });
    }

    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "eigendecomposition produced non-finite values".into(),
        ));
    }
    let largest = eig.eigenvalues.max();
    let smallest = eig.eigenvalues.min();
    let threshold = SINGULARITY_THRESHOLD * largest.max(0.0);
    if largest <= 0.0 || smallest <= threshold {
        return Err(Error::SingularCovariance {
            smallest,
            threshold,
        });
    }
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (mut col, lambda) in scaled.column_iter_mut().zip(eig.eigenvalues.iter()) {
        col /= lambda.sqrt();
    }
    let r = &scaled * v.transpose();
    // Symmetrize away roundoff.
    Ok((&r + r.transpose()) * 0.5)
}

/// Scaled residuals of a sample with cached squared norms and a lazily
/// built cache of pairwise squared distances.
#[derive(Debug)]
pub struct ScaledResiduals {
    n: usize,
    d: usize,
    /// Row-major `n x d`.
    y: Vec<f64>,
    sq_norms: Vec<f64>,
    /// Packed strict upper triangle, row by row.
    sq_dists: OnceLock<Vec<f64>>,
}

impl Clone for ScaledResiduals {
    fn clone(&self) -> Self {
        Self {
            n: self.n,
            d: self.d,
            y: self.y.clone(),
            sq_norms: self.sq_norms.clone(),
            sq_dists: self.sq_dists.clone(),
        }
    }
}

impl ScaledResiduals {
    /// Wrap rows that are already standardized (mean zero, covariance
    /// identity). The invariants are not checked.
    pub fn from_standardized(y: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if y.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                found: y.len(),
            });
        }
        if n == 0 || d == 0 {
            return Err(Error::Empty);
        }
        let sq_norms = y
            .chunks_exact(d)
            .map(|row| row.iter().map(|v| v * v).sum())
            .collect();
        Ok(Self {
            n,
            d,
            y,
            sq_norms,
            sq_dists: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.y[j * self.d..(j + 1) * self.d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.y.chunks_exact(self.d)
    }

    /// Row-major residual matrix.
    pub fn as_slice(&self) -> &[f64] {
        &self.y
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.d, &self.y)
    }

    /// `||Y_j||^2` for every row.
    pub fn sq_norms(&self) -> &[f64] {
        &self.sq_norms
    }

    /// Pairwise squared distances `||Y_j - Y_k||^2` for `j < k`, packed row
    /// by row. Computed once on first use.
    pub fn packed_sq_dists(&self) -> &[f64] {
        self.sq_dists.get_or_init(|| {
            let n = self.n;
            let mut out = Vec::with_capacity(n * (n - 1) / 2);
            for j in 0..n {
                let yj = self.row(j);
                for k in (j + 1)..n {
                    out.push(
                        yj.iter()
                            .zip(self.row(k))
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum(),
                    );
                }
            }
            out
        })
    }

    /// `||Y_j - Y_k||^2`; symmetric with zero diagonal.
    pub fn sq_dist(&self, j: usize, k: usize) -> f64 {
        use std::cmp::Ordering;
        let (lo, hi) = match j.cmp(&k) {
            Ordering::Equal => return 0.0,
            Ordering::Less => (j, k),
            Ordering::Greater => (k, j),
        };
        let n = self.n;
        let offset = lo * (2 * n - lo - 1) / 2 + (hi - lo - 1);
        self.packed_sq_dists()[offset]
    }
}

/// Compute the scaled residuals of a sample.
pub fn standardize(sample: &Sample) -> Result<ScaledResiduals> {
    let (n, d) = (sample.n(), sample.d());
    let x = sample.values();
    let mean = x.row_mean();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let cov = (centered.transpose() * &centered) / n as f64;
    let root = inv_sqrt_sym(&cov)?;
    let y = centered * root;
    let mut rows = Vec::with_capacity(n * d);
    for row in y.row_iter() {
        rows.extend(row.iter());
    }
    ScaledResiduals::from_standardized(rows, n, d)
}

/// Standardize a row-major buffer without building a [`Sample`]; used in
/// the Monte Carlo hot loops.
pub(crate) fn standardize_rows(data: &[f64], n: usize, d: usize) -> Result<ScaledResiduals> {
    let sample = Sample {
        values: DMatrix::from_row_slice(n, d, data),
        source: None,
    };
    standardize(&sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parses_plain_csv() {
        let s = parse_csv("1,2\n3,4.5\n-1, 0\n").unwrap();
        assert_eq!((s.n(), s.d()), (3, 2));
        assert_eq!(s.values()[(1, 1)], 4.5);
        assert_eq!(s.values()[(2, 0)], -1.0);
    }

    #[test]
    fn skips_header() {
        let s = parse_csv("x,y\n1,2\n3,4\n5,7\n").unwrap();
        assert_eq!((s.n(), s.d()), (3, 2));
        assert_eq!(s.values()[(0, 0)], 1.0);
    }

    #[test]
    fn rejects_n_not_exceeding_d() {
        let err = parse_csv("1,2\n3,4\n").unwrap_err();
        assert!(err.to_string().contains("n must exceed d"), "{err}");
    }

    #[test]
    fn ragged_row_is_named() {
        let err = parse_csv("1,2\n3\n5,6\n").unwrap_err();
        assert!(
            matches!(
                err,
                Error::RaggedRow {
                    row: 2,
                    expected: 2,
                    found: 1
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn non_numeric_cell_is_named() {
        let err = parse_csv("1,2\n3,abc\n5,6\n").unwrap_err();
        match err {
            Error::NonNumeric { row, column, cell } => {
                assert_eq!((row, column, cell.as_str()), (2, 2, "abc"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(
            parse_csv("1\nNaN\n3\n").unwrap_err(),
            Error::NonFinite { row: 2, column: 1 }
        ));
    }

    #[test]
    fn inv_sqrt_of_identity_and_diagonal() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        assert_relative_eq!(inv_sqrt_sym(&i3).unwrap(), i3, epsilon = 1e-14);
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 9.0]));
        let r = inv_sqrt_sym(&m).unwrap();
        assert_relative_eq!(r[(0, 0)], 0.5, epsilon = 1e-14);
        assert_relative_eq!(r[(1, 1)], 1.0 / 3.0, epsilon = 1e-14);
        assert!(r[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn inv_sqrt_rejects_singular_and_asymmetric() {
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            inv_sqrt_sym(&singular),
            Err(Error::SingularCovariance { .. })
        ));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(
            inv_sqrt_sym(&asym),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn two_point_standardization() {
        let s = Sample::from_rows(&[vec![0.0], vec![2.0]]).unwrap();
        let y = standardize(&s).unwrap();
        assert_relative_eq!(y.row(0)[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(y.row(1)[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(y.sq_dist(0, 1), 4.0, epsilon = 1e-13);
        assert_eq!(y.sq_dist(1, 1), 0.0);
    }

    #[test]
    fn collinear_columns_are_singular() {
        let s = Sample::from_rows(&[
            vec![1.0, 2.0],
            vec![2.0, 4.0],
            vec![3.0, 6.0],
            vec![4.0, 8.0],
        ])
        .unwrap();
        assert!(standardize(&s).unwrap_err().is_numerical());
    }

    #[test]
    fn packed_index_matches_direct() {
        let s = Sample::from_rows(&[
            vec![0.3, 1.0],
            vec![2.0, -1.0],
            vec![-0.7, 0.2],
            vec![1.1, 1.9],
            vec![0.0, 0.0],
        ])
        .unwrap();
        let y = standardize(&s).unwrap();
        for j in 0..5 {
            for k in 0..5 {
                let direct: f64 = y
                    .row(j)
                    .iter()
                    .zip(y.row(k))
                    .map(|(a, b)| (a - b).powi(2))
                    .sum();
                assert_relative_eq!(y.sq_dist(j, k), direct, epsilon = 1e-14);
            }
        }
    }
}

use ecfnorm::sample::inv_sqrt_sym;
use ecfnorm::{load_sample, parse_csv, standardize, Error, Sample};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn skewed_sample(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Sample {
    // Exponentiated normals, so the data are far from spherical.
    let x = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal).exp());
    Sample::new(x, None).unwrap()
}

#[test]
fn residuals_have_zero_mean_and_identity_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for d in [1usize, 2, 3, 5] {
        for n in [d + 2, 20, 200] {
            let y = standardize(&skewed_sample(&mut rng, n, d)).unwrap();
            let m = y.to_matrix();
            let mean = m.row_mean();
            assert!(mean.norm() <= 1e-10, "d={d} n={n} mean {}", mean.norm());
            let cov = m.transpose() * &m / n as f64;
            let dev = (cov - DMatrix::<f64>::identity(d, d)).amax();
            assert!(dev <= 1e-9, "d={d} n={n} cov dev {dev:e}");
            let total: f64 = y.sq_norms().iter().sum();
            let nd = (n * d) as f64;
            assert!((total - nd).abs() <= 1e-8 * nd);
        }
    }
}

#[test]
fn sq_norms_and_distances_are_affine_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for d in [1usize, 2, 3, 5] {
        for _ in 0..100 {
            let x = skewed_sample(&mut rng, 15, d);
            let a = loop {
                let a = gaussian_matrix(&mut rng, d, d);
                if a.clone().svd(false, false).singular_values.min() > 0.1 {
                    break a;
                }
            };
            let b: Vec<f64> = (0..d)
                .map(|_| 5.0 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let y0 = standardize(&x).unwrap();
            let y1 = standardize(&x.affine(&a, &b).unwrap()).unwrap();
            for (p, q) in y0.sq_norms().iter().zip(y1.sq_norms()) {
                assert!((p - q).abs() <= 1e-8 * (1.0 + p), "d={d}: {p} vs {q}");
            }
            for (p, q) in y0.packed_sq_dists().iter().zip(y1.packed_sq_dists()) {
                assert!((p - q).abs() <= 1e-8 * (1.0 + p), "d={d}: {p} vs {q}");
            }
        }
    }
}

#[test]
fn inverse_root_of_random_spd_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for d in 1..=6 {
        let a = gaussian_matrix(&mut rng, d, d);
        let m = a.transpose() * &a + DMatrix::<f64>::identity(d, d);
        let r = inv_sqrt_sym(&m).unwrap();
        assert!((&r - r.transpose()).amax() <= 1e-12);
        let check = &r * &m * &r;
        assert!((check - DMatrix::<f64>::identity(d, d)).amax() <= 1e-8);
        assert!(r.symmetric_eigenvalues().min() > 0.0);
    }
}

#[test]
fn csv_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    std::fs::write(&path, "x, y\n 1.0, 2\n3,4.5\n\n-1e-1,7\n").unwrap();
    let s = load_sample(&path).unwrap();
    assert_eq!((s.n(), s.d()), (3, 2));
    assert_eq!(s.values()[(2, 0)], -0.1);
    assert_eq!(s.source(), Some(path.display().to_string().as_str()));
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_sample("/nonexistent/definitely/missing.csv").unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(!err.is_numerical());
}

#[test]
fn duplicated_rows_are_singular() {
    let s = parse_csv("1,2\n1,2\n1,2\n1,2\n").unwrap();
    let err = standardize(&s).unwrap_err();
    assert!(matches!(err, Error::SingularCovariance { .. }));
    assert!(err.is_numerical());
}

#[test]
fn standardized_residuals_are_shareable_across_threads() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let y = standardize(&skewed_sample(&mut rng, 40, 3)).unwrap();
    let expect = y.sq_dist(3, 17);
    std::thread::scope(|s| {
        for _ in 0..4 {
            s.spawn(|| assert_eq!(y.sq_dist(17, 3), expect));
        }
    });
}

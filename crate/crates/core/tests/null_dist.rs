use ecfnorm::alternatives::{self, parse_alternative};
use ecfnorm::null::{
    cov_kernel, critical_values_limit, critical_values_mc, mean_limit, nystrom_eigenvalues,
    nystrom_eigenvalues_with, p_value_mc, simulate_null, CriticalValueTable, NystromNodes,
    SampleSize,
};
use ecfnorm::oracle::gauss_hermite_grid;
use ecfnorm::standardize;
use ecfnorm::statistic::{u_statistic, StatisticConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[test]
fn kernel_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..1000 {
        let d = rng.random_range(1..=5);
        let s: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let t: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let (k1, k2) = (cov_kernel(&s, &t), cov_kernel(&t, &s));
        assert!((k1 - k2).abs() <= 1e-14 * (1.0 + k1.abs()));
    }
}

#[test]
fn mean_limit_is_the_integrated_diagonal() {
    for d in [1usize, 2] {
        for a in [0.5, 1.0, 2.0] {
            let scheme = gauss_hermite_grid(d, 60, a).unwrap();
            let quad = scheme.integrate(|t| cov_kernel(t, t));
            let exact = mean_limit(d, a).unwrap();
            assert!(
                (quad - exact).abs() <= 1e-8 * exact,
                "d={d} a={a}: {quad} vs {exact}"
            );
        }
    }
}

#[test]
fn quantiles_decrease_with_alpha() {
    let grid = [0.25, 1.0, 4.0];
    let tables: Vec<CriticalValueTable> = [0.10, 0.05, 0.01]
        .iter()
        .map(|&alpha| critical_values_mc(15, 2, &grid, alpha, 2000, 5).unwrap())
        .collect();
    for (i, a) in grid.iter().enumerate() {
        let q: Vec<f64> = tables.iter().map(|t| t.entries[i].quantile).collect();
        assert!(q[0] <= q[1] && q[1] <= q[2], "a={a}: {q:?}");
        assert!(q.iter().all(|v| v.is_finite() && *v > 0.0));
    }
}

#[test]
fn results_do_not_depend_on_the_thread_count() {
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let table = critical_values_mc(10, 3, &[0.5, 2.0], 0.05, 1500, 77).unwrap();
            let limit = nystrom_eigenvalues(2, 1.0, 300, 77).unwrap();
            let inf = critical_values_limit(1, &[1.0], 0.05, 300, 10_000, 77).unwrap();
            (table, limit, inf)
        })
    };
    let (t1, l1, i1) = run(1);
    let (t3, l3, i3) = run(3);
    assert_eq!(t1, t3);
    assert_eq!(l1, l3);
    assert_eq!(i1, i3);
}

#[test]
fn simulation_replays_bit_for_bit() {
    let a = simulate_null(12, 1, &[1.0], 1000, 9).unwrap();
    let b = simulate_null(12, 1, &[1.0], 1000, 9).unwrap();
    let c = simulate_null(12, 1, &[1.0], 1000, 10).unwrap();
    assert_eq!(a.sorted_values(0), b.sorted_values(0));
    assert_ne!(a.sorted_values(0), c.sorted_values(0));
}

#[test]
fn nystrom_matrix_is_numerically_psd() {
    for d in [1usize, 2, 3, 5] {
        let limit = nystrom_eigenvalues(d, 1.0, 1000, 3).unwrap();
        assert_eq!(limit.significant_negative, 0, "d={d}");
        assert_eq!(limit.eigenvalues.len(), 1000);
        assert!(limit.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        assert!(limit.eigenvalues.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn quadrature_nodes_reproduce_the_trace() {
    // 2000 nodes leave only 12 per axis in three dimensions.
    for (d, tol) in [(1usize, 1e-8), (2, 1e-6), (3, 1e-2)] {
        for a in [0.5, 1.0] {
            let limit =
                nystrom_eigenvalues_with(d, a, 2000, 0, NystromNodes::GaussHermite).unwrap();
            let exact = mean_limit(d, a).unwrap();
            let gap = (limit.trace() - exact).abs() / exact;
            assert!(gap <= tol, "d={d} a={a}: gap {gap:e}");
        }
    }
    assert!(nystrom_eigenvalues_with(5, 1.0, 2000, 0, NystromNodes::GaussHermite).is_err());
}

#[test]
fn sampled_trace_is_close_to_the_mean() {
    let limit = nystrom_eigenvalues(3, 1.0, 2000, 17).unwrap();
    let exact = mean_limit(3, 1.0).unwrap();
    assert!((limit.trace() - exact).abs() <= 0.1 * exact);
}

#[test]
fn limit_table_is_flagged_infinite() {
    let t = critical_values_limit(2, &[1.0], 0.05, 400, 10_000, 1).unwrap();
    assert_eq!(t.n, SampleSize::Infinite);
    assert_eq!(t.m, Some(400));
    assert!(t.entries[0].quantile > 0.5 && t.entries[0].quantile < 3.0);
}

#[test]
fn p_value_boundaries() {
    assert_eq!(p_value_mc(0.0, 10, 1, 1.0, 1000, 4).unwrap(), 1.0);
    assert_eq!(p_value_mc(1e9, 10, 1, 1.0, 1000, 4).unwrap(), 1.0 / 1001.0);
    assert!(p_value_mc(1.0, 10, 1, 1.0, 999, 4).is_err());
}

#[test]
fn lognormal_samples_are_detected() {
    let spec = parse_alternative("LN(0,1)").unwrap();
    let cfg = StatisticConfig::new(1.0).unwrap();
    let null = simulate_null(100, 1, &[1.0], 2000, 123).unwrap();
    let detected = (0..100)
        .filter(|&i| {
            let y = standardize(&alternatives::sample(&spec, 100, 5000 + i).unwrap()).unwrap();
            null.p_value(0, u_statistic(&y, &cfg).unwrap().scaled) < 0.05
        })
        .count();
    assert!(detected >= 99, "{detected} of 100");
}

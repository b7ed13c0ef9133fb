mod common;

use common::{brute_force_dtw, random_series, warping_paths};
use pvdtw::{
    broken_glass_profiles, distance_matrix, dtw, dtw_path, euclidean, generate_fleet, lb_keogh, BandConstraint,
    DayModel, DistanceMatrix, Verdict,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const UNC: BandConstraint = BandConstraint::Unconstrained;

#[test]
fn path_count_matches_delannoy_numbers() {
    let delannoy = [1, 3, 13, 63, 321, 1683];
    for (n, &d) in delannoy.iter().enumerate() {
        assert_eq!(warping_paths(n + 1, n + 1, None).len(), d);
    }
}

#[test]
fn dp_matches_enumeration_on_short_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut checked = 0;
    for _ in 0..240 {
        let n = rng.random_range(1..=8);
        let m = rng.random_range(1..=8);
        let x = random_series(&mut rng, n);
        let y = random_series(&mut rng, m);
        let radius = rng.random_bool(0.5).then(|| rng.random_range(n.abs_diff(m)..=8));
        let band = radius.map_or(UNC, BandConstraint::Radius);
        let expected = brute_force_dtw(&x, &y, radius).unwrap();
        let got = dtw(&x, &y, band).unwrap();
        assert!(
            (got - expected).abs() <= 1e-9,
            "{x:?} {y:?} {band}: {got} vs {expected}"
        );

        let (d, path) = dtw_path(&x, &y, band).unwrap();
        assert_eq!(d, got);
        assert!(path.is_valid(n, m, band));
        assert!((path.cost(&x, &y).sqrt() - expected).abs() <= 1e-9);
        checked += 1;
    }
    assert!(checked >= 200);
}

#[test]
fn infeasible_band_is_rejected() {
    assert!(dtw(&[1.0, 2.0, 3.0], &[1.0], BandConstraint::Radius(1)).is_err());
    assert!(brute_force_dtw(&[1.0, 2.0, 3.0], &[1.0], Some(1)).is_none());
}

#[test]
fn repeated_sample_costs_nothing() {
    let (x, y) = ([1.0, 2.0, 3.0], [1.0, 2.0, 2.0, 3.0]);
    assert_eq!(brute_force_dtw(&x, &y, None), Some(0.0));
    assert_eq!(dtw(&x, &y, UNC).unwrap(), 0.0);
    let (d, path) = dtw_path(&x, &y, UNC).unwrap();
    assert_eq!(d, 0.0);
    assert_eq!(path.pairs(), &[(0, 0), (1, 1), (1, 2), (2, 3)]);
}

#[test]
fn tie_break_prefers_diagonal_then_i() {
    // Every path costs the same, so backtracking order alone picks the path.
    let x = [0.0; 3];
    let y = [0.0; 2];
    let zero_paths = warping_paths(3, 2, None);
    assert_eq!(zero_paths.len(), 5);
    let (_, path) = dtw_path(&x, &y, UNC).unwrap();
    assert_eq!(path.pairs(), &[(0, 0), (1, 0), (2, 1)]);
}

#[test]
fn constant_offset() {
    let d = dtw(&[0.0; 3], &[1.0; 3], UNC).unwrap();
    assert!((d - 3f64.sqrt()).abs() < 1e-12);
    assert!((brute_force_dtw(&[0.0; 3], &[1.0; 3], None).unwrap() - d).abs() < 1e-12);
}

#[test]
fn symmetric_nonnegative_and_zero_on_self() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..500 {
        let n = rng.random_range(1..=40);
        let m = rng.random_range(1..=40);
        let x = random_series(&mut rng, n);
        let y = random_series(&mut rng, m);
        let band = if rng.random_bool(0.5) {
            BandConstraint::Radius(n.abs_diff(m) + rng.random_range(0..5))
        } else {
            UNC
        };
        let a = dtw(&x, &y, band).unwrap();
        let b = dtw(&y, &x, band).unwrap();
        assert!(a >= 0.0);
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        assert_eq!(dtw(&x, &x, band).unwrap(), 0.0);
    }
}

#[test]
fn widening_the_band_never_increases_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..100 {
        let n = rng.random_range(2..=30);
        let x = random_series(&mut rng, n);
        let y = random_series(&mut rng, n);
        let mut prev = f64::INFINITY;
        for r in 0..=n {
            let d = dtw(&x, &y, BandConstraint::Radius(r)).unwrap();
            assert!(d <= prev, "radius {r}: {d} > {prev}");
            prev = d;
        }
        assert_eq!(prev, dtw(&x, &y, UNC).unwrap());
        assert_eq!(dtw(&x, &y, BandConstraint::Radius(n + 7)).unwrap(), prev);
    }
}

#[test]
fn radius_zero_is_euclidean() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..200 {
        let n = rng.random_range(1..=50);
        let x = random_series(&mut rng, n);
        let y = random_series(&mut rng, n);
        let d = dtw(&x, &y, BandConstraint::Radius(0)).unwrap();
        assert!((d - euclidean(&x, &y).unwrap()).abs() <= 1e-12);
    }
}

#[test]
fn lb_keogh_is_a_lower_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..500 {
        let n = rng.random_range(1..=60);
        let r = rng.random_range(0..=n);
        let x = random_series(&mut rng, n);
        let y = random_series(&mut rng, n);
        let lb = lb_keogh(&x, &y, r).unwrap();
        let d = dtw(&x, &y, BandConstraint::Radius(r)).unwrap();
        assert!(lb <= d + 1e-9, "lb {lb} > dtw {d} at radius {r}");
    }
    assert!((lb_keogh(&[0.0; 3], &[5.0; 3], 0).unwrap() - 75f64.sqrt()).abs() < 1e-12);
}

#[test]
fn healthy_pairs_are_closer_than_mixed_pairs() {
    let (fleet, truth) = generate_fleet(12, &broken_glass_profiles(12, 4, 0.75), &DayModel::default(), 7).unwrap();
    let m = &distance_matrix(&fleet, BandConstraint::Radius(60)).unwrap();
    let labels = truth.labels();
    let healthy: Vec<usize> = (0..12).filter(|&i| labels[i] == Verdict::Healthy).collect();
    let faulty: Vec<usize> = (0..12).filter(|&i| labels[i] == Verdict::Abnormal).collect();
    let max_hh = healthy
        .iter()
        .flat_map(|&i| healthy.iter().filter(move |&&j| j != i).map(move |&j| m.get(i, j)))
        .fold(0.0, f64::max);
    let min_hf = healthy
        .iter()
        .flat_map(|&i| faulty.iter().map(move |&j| m.get(i, j)))
        .fold(f64::INFINITY, f64::min);
    assert!(min_hf > max_hh, "{min_hf} <= {max_hh}");
}

#[test]
fn matrix_round_trips_and_ignores_thread_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let rows: Vec<Vec<f64>> = (0..7).map(|_| random_series(&mut rng, 30)).collect();
    let fleet = common::fleet_of(&rows);
    let in_pool = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| distance_matrix(&fleet, UNC).unwrap())
    };
    let m = in_pool(1);
    assert_eq!(in_pool(4), m);
    for i in 0..7 {
        for j in 0..7 {
            assert_eq!(m.get(i, j).to_bits(), dtw(&rows[i], &rows[j], UNC).unwrap().to_bits());
        }
    }

    let mut json = Vec::new();
    m.write_json(&mut json).unwrap();
    assert_eq!(DistanceMatrix::read_json(&json[..]).unwrap(), m);
    let mut csv = Vec::new();
    m.write_csv(&mut csv).unwrap();
    assert_eq!(DistanceMatrix::read_csv(&csv[..]).unwrap(), m);
}

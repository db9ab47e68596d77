use super::*;
use crate::chart::Chart;

fn spec(points_per_axis: usize, directions: usize) -> ScanSpec {
    ScanSpec { points_per_axis, directions, ..ScanSpec::default() }
}

#[test]
fn round_three_sphere_biricci_is_three() {
    let r = biricci_scan(&Chart::sphere(3, 1.0), 1.0, &spec(4, 40)).unwrap();
    assert!((r.min - 3.0).abs() < 1e-4, "{}", r.min);
    assert!((r.max - 3.0).abs() < 1e-4, "{}", r.max);
}

#[test]
fn flat_space_scans_to_zero() {
    let chart = Chart::flat(3, 1.0);
    let b = biricci_scan(&chart, 1.0, &spec(3, 20)).unwrap();
    let r = ricci_scan(&chart, &spec(3, 20)).unwrap();
    assert!(b.min.abs() < 1e-8 && b.max.abs() < 1e-8);
    assert!(r.min.abs() < 1e-8);
}

#[test]
fn product_with_circle_has_positive_biricci_and_flat_ricci_direction() {
    let chart = Chart::sphere_times_circles(2, 1.0, vec![1.0]);
    let b = biricci_scan(&chart, 1.0, &spec(4, 64)).unwrap();
    let r = ricci_scan(&chart, &spec(4, 64)).unwrap();
    // Ric(v) = |v_S|² and K(v, w) = |v_S ∧ w_S|², which gives B₁Rc = 1 for every orthonormal pair.
    assert!((b.min - 1.0).abs() < 1e-5, "{}", b.min);
    assert!(r.min.abs() < 1e-6, "{}", r.min);
    let dir = &r.argmin_directions[0];
    assert!(dir[0].abs() < 1e-6 && dir[1].abs() < 1e-6);
}

#[test]
fn refining_directions_never_raises_the_minimum() {
    let chart = Chart::rotational(3, crate::chart::Warp::PerturbedSphere { eps: 0.3 }, 0.8);
    let mut last = f64::INFINITY;
    for d in [4, 8, 16, 32, 64] {
        let r = biricci_scan(&chart, 0.7, &spec(3, d)).unwrap();
        assert!(r.min <= last, "{d}: {} > {last}", r.min);
        last = r.min;
    }
}

#[test]
fn scans_are_deterministic() {
    let chart = Chart::rotational(3, crate::chart::Warp::PerturbedSphere { eps: 0.3 }, 0.8);
    let a = biricci_scan(&chart, 1.0, &spec(3, 30)).unwrap();
    let b = biricci_scan(&chart, 1.0, &spec(3, 30)).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn histogram_counts_every_sample() {
    let r = biricci_scan(&Chart::sphere_times_circles(2, 1.0, vec![0.5]), 0.5, &spec(3, 25)).unwrap();
    assert_eq!(r.histogram.counts.iter().sum::<usize>(), r.samples);
    assert_eq!(r.samples, 27 * 25);
}

#[test]
fn pairs_are_orthonormal() {
    let g = nalgebra::DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 0.5]);
    for (v, w) in direction_pairs(&g, 40, 9) {
        assert!((linalg::inner(&g, &v, &v) - 1.0).abs() < 1e-12);
        assert!((linalg::inner(&g, &w, &w) - 1.0).abs() < 1e-12);
        assert!(linalg::inner(&g, &v, &w).abs() < 1e-12);
    }
}

#[test]
fn one_dimensional_chart_is_rejected() {
    let err = biricci_scan(&Chart::flat(1, 1.0), 1.0, &spec(3, 4)).unwrap_err();
    assert!(matches!(err, Error::UnsupportedDimension { .. }));
}

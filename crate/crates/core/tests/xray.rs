mod common;

use common::{gaussian, max_abs, max_diff};
use proptest::prelude::*;
use std::f64::consts::PI;
use tomolab::fields::{inner, l2_norm, make_phantom, PhantomKind};
use tomolab::xray::*;
use tomolab::{GridSpec, RegionMask, ScalarField};

#[test]
fn disk_chord_through_origin() {
    let g = GridSpec::square(128).unwrap();
    let disk = ScalarField::from_fn(g, |x| if x[0].hypot(x[1]) <= 0.5 { 1.0 } else { 0.0 });
    for theta in [0.0, 0.4, 1.3, 2.9] {
        let v = xray_line(&disk, theta, 0.0).unwrap();
        assert!((v - 1.0).abs() <= 2.0 * g.spacing(), "θ = {theta}: {v}");
    }
}

#[test]
fn gaussian_line_integrals_match_closed_form() {
    let g = GridSpec::square(128).unwrap();
    let sigma = 0.2;
    let f = gaussian(g, [0.0, 0.0], sigma);
    for (theta, s) in [(0.0, 0.0), (0.7, 0.1), (1.9, -0.25), (2.5, 0.3)] {
        let exact = sigma * (2.0 * PI).sqrt() * (-s * s / (2.0 * sigma * sigma)).exp();
        let v = xray_line(&f, theta, s).unwrap();
        assert!((v - exact).abs() <= 1e-3 * exact, "({theta}, {s}): {v} vs {exact}");
    }
}

#[test]
fn rotating_the_field_shifts_the_angle() {
    let g = GridSpec::square(128).unwrap();
    let aniso = |x: f64, y: f64| (-(x - 0.1).powi(2) / 0.02 - (y + 0.05).powi(2) / 0.08).exp();
    let f = ScalarField::from_fn(g, |x| aniso(x[0], x[1]));
    let n_angles = 36;
    let phi = 5.0 * PI / n_angles as f64;
    let (c, s) = (phi.cos(), phi.sin());
    let rotated = ScalarField::from_fn(g, |x| aniso(c * x[0] - s * x[1], s * x[0] + c * x[1]));
    let lines = LineSet::uniform(n_angles, 61, 1.0).unwrap();
    let a = xray_forward(&rotated, &lines).unwrap();
    let b = xray_forward(&f, &lines).unwrap();
    let m = lines.n_offsets();
    let mut worst: f64 = 0.0;
    for k in 0..n_angles - 5 {
        let shifted = &b.values()[(k + 5) * m..(k + 6) * m];
        worst = worst.max(max_diff(a.row(k), shifted));
    }
    assert!(worst <= 1e-2 * b.max_abs(), "{worst}");
}

#[test]
fn zero_sinogram_backprojects_to_zero() {
    let g = GridSpec::square(32).unwrap();
    let lines = LineSet::for_grid(&g, 20, 1).unwrap();
    let bp = backproject(&Sinogram::zeros(lines.clone()), &g).unwrap();
    assert_eq!(bp.max_abs(), 0.0);
    assert_eq!(fbp_reconstruct(&Sinogram::zeros(lines), &g).unwrap().max_abs(), 0.0);
}

#[test]
fn impulse_backprojects_to_a_ridge() {
    let g = GridSpec::square(48).unwrap();
    let lines = LineSet::for_grid(&g, 12, 1).unwrap();
    let (a, l) = (3, lines.n_offsets() / 2 + 5);
    let mut v = vec![0.0; lines.len()];
    v[a * lines.n_offsets() + l] = 1.0;
    let bp = backproject(&Sinogram::new(lines.clone(), v).unwrap(), &g).unwrap();
    let (theta, s0, ds) = (lines.angles()[a], lines.offsets()[l], lines.offset_step());
    let mut support = 0;
    for k in 0..g.len() {
        if bp.values()[k] != 0.0 {
            let p = g.point(k);
            assert!((p[0] * theta.cos() + p[1] * theta.sin() - s0).abs() < ds * (1.0 + 1e-12));
            support += 1;
        }
    }
    assert!(support > 0);
}

#[test]
fn adjointness_on_smooth_pairs() {
    let g = GridSpec::square(64).unwrap();
    let lines = LineSet::for_grid(&g, 90, 1).unwrap();
    let f = make_phantom(g, PhantomKind::GaussianBumps, 11).unwrap().into_scalar().unwrap();
    let vals: Vec<f64> = (0..lines.len()).map(|k| ((k * 7919) % 1000) as f64 / 500.0 - 1.0).collect();
    let sino = Sinogram::new(lines.clone(), vals).unwrap();
    let xf = xray_forward(&f, &lines).unwrap();
    let gap = (xf.inner(&sino).unwrap() - inner(&f, &backproject(&sino, &g).unwrap()).unwrap()).abs();
    assert!(gap <= 1e-3 * xf.norm() * sino.norm());
}

#[test]
fn evenness_under_orientation_reversal() {
    let g = GridSpec::square(64).unwrap();
    let f = make_phantom(g, PhantomKind::EllipseSum, 2).unwrap().into_scalar().unwrap();
    for (theta, s) in [(0.2, 0.1), (1.1, -0.4), (2.8, 0.6)] {
        let a = xray_line(&f, theta, s).unwrap();
        let b = xray_line(&f, theta + PI, -s).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn normal_operator_constant_is_two() {
    let g = GridSpec::square(128).unwrap();
    let f = gaussian(g, [0.0, 0.0], 0.15);
    let lines = LineSet::for_grid(&g, 180, 1).unwrap();
    let plan = tomolab::spectral::SpectralPlan::default_for(g);
    let c = fit_normal_constant(&f, &lines, &RegionMask::disk(g, &[0.0, 0.0], 0.7), &plan).unwrap();
    assert!((c - 2.0).abs() <= 0.03 * 2.0, "c = {c}");
}

#[test]
fn normal_operator_of_zero_is_zero() {
    let g = GridSpec::square(32).unwrap();
    let lines = LineSet::for_grid(&g, 30, 1).unwrap();
    assert_eq!(normal_scalar(&ScalarField::zeros(g), &lines).unwrap().max_abs(), 0.0);
}

#[test]
fn normal_operator_translation_covariance() {
    let g = GridSpec::square(64).unwrap();
    let h = g.spacing();
    let lines = LineSet::for_grid(&g, 120, 1).unwrap();
    let f = gaussian(g, [0.0, 0.0], 0.12);
    let shifted = gaussian(g, [h, 0.0], 0.12);
    let a = normal_scalar(&f, &lines).unwrap();
    let b = normal_scalar(&shifted, &lines).unwrap();
    let n = g.n();
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for i in 8..n - 8 {
        for j in 8..n - 8 {
            let d = b.values()[(i + 1) * n + j] - a.values()[i * n + j];
            num += d * d;
            den += a.values()[i * n + j].powi(2);
        }
    }
    assert!((num / den).sqrt() <= 1e-2);
}

#[test]
fn fbp_recovers_ellipse_phantom() {
    let g = GridSpec::square(256).unwrap();
    let f = make_phantom(g, PhantomKind::EllipseSum, 0).unwrap().into_scalar().unwrap();
    let lines = LineSet::for_grid(&g, 360, 1).unwrap();
    assert_eq!(lines.n_offsets(), 363);
    let rec = fbp_reconstruct(&xray_forward(&f, &lines).unwrap(), &g).unwrap();
    let err = relative_error_on(&rec, &f, &RegionMask::disk(g, &[0.0, 0.0], 0.8)).unwrap();
    assert!(err <= 0.05, "{err}");
}

#[test]
fn fbp_is_linear() {
    let g = GridSpec::square(64).unwrap();
    let f = make_phantom(g, PhantomKind::GaussianBumps, 4).unwrap().into_scalar().unwrap();
    let lines = LineSet::for_grid(&g, 64, 1).unwrap();
    let sino = xray_forward(&f, &lines).unwrap();
    let a = fbp_reconstruct(&sino.scaled(2.5), &g).unwrap();
    let b = fbp_reconstruct(&sino, &g).unwrap().scaled(2.5);
    assert!(max_diff(a.values(), b.values()) <= 1e-12 * b.max_abs());
}

#[test]
fn region_flags() {
    let g = GridSpec::square(32).unwrap();
    // offsets inside ±L so that every line meets the square
    let lines = LineSet::new(vec![0.0, 0.5, 1.0, 2.0], (0..21).map(|k| -0.95 + 0.095 * k as f64).collect()).unwrap();
    assert!(lines_through_region(&lines, &RegionMask::full(g)).unwrap().iter().all(|&f| f));
    let disk = RegionMask::disk(g, &[0.0, 0.0], 0.2);
    let far = LineSet::new(vec![0.0, 0.9, 2.2], vec![-0.5, 0.5]).unwrap();
    assert!(lines_through_region(&far, &disk).unwrap().iter().all(|&f| !f));
}

#[test]
fn insufficient_angles_for_fbp() {
    let g = GridSpec::square(16).unwrap();
    let lines = LineSet::uniform(7, 23, 1.0).unwrap();
    assert!(matches!(fbp_reconstruct(&Sinogram::zeros(lines), &g), Err(tomolab::Error::InsufficientData(_))));
}

fn field_from(g: GridSpec, v: &[f64]) -> ScalarField {
    ScalarField::new(g, v.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn forward_and_backprojection_are_linear(
        a in proptest::collection::vec(-1.0f64..1.0, 256),
        b in proptest::collection::vec(-1.0f64..1.0, 256),
        alpha in -3.0f64..3.0,
    ) {
        let g = GridSpec::square(16).unwrap();
        let lines = LineSet::for_grid(&g, 12, 1).unwrap();
        let (fa, fb) = (field_from(g, &a), field_from(g, &b));
        let lhs = xray_forward(&fa.lin_comb(alpha, &fb, 1.0).unwrap(), &lines).unwrap();
        let rhs = xray_forward(&fa, &lines).unwrap().lin_comb(alpha, &xray_forward(&fb, &lines).unwrap(), 1.0).unwrap();
        prop_assert!(max_diff(lhs.values(), rhs.values()) <= 1e-12 * (1.0 + rhs.max_abs()));
        let n1 = normal_scalar(&fa.lin_comb(alpha, &fb, 1.0).unwrap(), &lines).unwrap();
        let n2 = normal_scalar(&fa, &lines).unwrap().lin_comb(alpha, &normal_scalar(&fb, &lines).unwrap(), 1.0).unwrap();
        prop_assert!(l2_norm(&n1.sub(&n2).unwrap()) <= 1e-10 * (1e-300 + l2_norm(&n2)));
    }

    #[test]
    fn flag_count_is_monotone_under_inclusion(
        i in 2usize..10, j in 2usize..10, size in 1usize..4, grow in 1usize..3,
    ) {
        let g = GridSpec::square(16).unwrap();
        let lines = LineSet::for_grid(&g, 24, 1).unwrap();
        let small = RegionMask::block(g, &[i, j], size).unwrap();
        let big = RegionMask::block(g, &[i - 1, j - 1], size + grow).unwrap();
        prop_assert!(small.is_subset_of(&big));
        let count = |m: &RegionMask| lines_through_region(&lines, m).unwrap().iter().filter(|&&f| f).count();
        prop_assert!(count(&small) <= count(&big));
    }

    #[test]
    fn forward_row_matches_projection(theta in 0.0f64..PI, s in -1.2f64..1.2) {
        let g = GridSpec::square(20).unwrap();
        let f = make_phantom(g, PhantomKind::GaussianBumps, 3).unwrap().into_scalar().unwrap();
        let row: f64 = xray_row(&g, theta, s).iter().map(|&(k, w)| w * f.values()[k]).sum();
        let direct = xray_line(&f, theta, s).unwrap();
        prop_assert!((row - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
    }
}

#[test]
fn sinogram_shape_is_checked() {
    let lines = LineSet::uniform(4, 5, 1.0).unwrap();
    assert!(Sinogram::new(lines, vec![0.0; 19]).is_err());
    let _ = max_abs(&[0.0]);
}

use proptest::prelude::*;

use thermosense::calib::{fit_material, FitConfig};
use thermosense::empirical::{extract_features, train_eval_pair, ClassifierConfig};
use thermosense::heatsim::{
    generate_trace, mean_temperature, normalize_trace, normalized_mean, surface_temperature, ContactConditions,
    MaterialSample, SensorParams,
};
use thermosense::perfmodel::{
    binary_map, f1_matrix, f1_pair, matrix_match, BinaryMap, EffusivityGrid, F1Matrix, MatrixConditions, MatrixSource,
};

fn sensor() -> SensorParams {
    SensorParams::default()
}

fn effusivity() -> impl Strategy<Value = f64> {
    (30.5f64.ln()..4.0e4f64.ln()).prop_map(f64::exp)
}

fn f1(e1: f64, e2: f64, c: &ContactConditions, sigma: f64) -> f64 {
    f1_pair(&sensor(), e1, e2, c, sigma).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn f1_grows_as_e2_moves_away(e in effusivity(), a in 0.0f64..0.5, b in 0.0f64..0.5, up in any::<bool>()) {
        let (near, far) = (a.min(b), a.max(b));
        let step = |f: f64| if up { e * (1.0 + f) } else { e / (1.0 + f) };
        let c = ContactConditions::default();
        prop_assert!(f1(e, step(near), &c, 0.05) <= f1(e, step(far), &c, 0.05));
    }

    #[test]
    fn longer_contact_never_hurts(e1 in effusivity(), e2 in effusivity(), t in 0.2f64..4.0, dt in 0.0f64..2.0) {
        let c1 = ContactConditions { t_contact: t, ..ContactConditions::default() };
        let c2 = ContactConditions { t_contact: t + dt, ..ContactConditions::default() };
        prop_assert!(f1(e1, e2, &c1, 0.05) <= f1(e1, e2, &c2, 0.05) + 1e-12);
    }

    #[test]
    fn more_noise_never_helps(e1 in effusivity(), e2 in effusivity(), s in 0.005f64..0.2, ds in 0.0f64..0.2) {
        let c = ContactConditions::default();
        prop_assert!(f1(e1, e2, &c, s + ds) <= f1(e1, e2, &c, s) + 1e-12);
    }

    #[test]
    fn wider_gap_never_hurts(e1 in effusivity(), e2 in effusivity(), gap in 1.0f64..15.0, more in 0.0f64..10.0) {
        let c = |g: f64| ContactConditions { t_sens0: 25.0 + g, ..ContactConditions::default() };
        prop_assert!(f1(e1, e2, &c(gap), 0.05) <= f1(e1, e2, &c(gap + more), 0.05) + 1e-12);
    }

    #[test]
    fn f1_is_bounded_and_symmetric(e1 in effusivity(), e2 in effusivity(), s in 0.005f64..0.2) {
        let c = ContactConditions::default();
        let (a, b) = (f1(e1, e2, &c, s), f1(e2, e1, &c, s));
        prop_assert_eq!(a, b);
        prop_assert!((0.5..=1.0).contains(&a));
    }

    #[test]
    fn surface_temperature_falls_with_effusivity(e in effusivity(), f in 1.0001f64..10.0) {
        let c = ContactConditions::default();
        let t = |e: f64| surface_temperature(&sensor(), &MaterialSample::new(e).unwrap(), &c);
        prop_assert!(t(e * f) < t(e));
    }

    #[test]
    fn mean_curves_keep_their_order(e1 in effusivity(), e2 in effusivity(), t in 1e-3f64..10.0) {
        prop_assume!((e1 / e2 - 1.0).abs() > 1e-6);
        let c = ContactConditions::default();
        let (m1, m2) = (MaterialSample::new(e1).unwrap(), MaterialSample::new(e2).unwrap());
        let gap_surf = surface_temperature(&sensor(), &m1, &c) - surface_temperature(&sensor(), &m2, &c);
        let gap_t = mean_temperature(&sensor(), &m1, &c, t).unwrap() - mean_temperature(&sensor(), &m2, &c, t).unwrap();
        prop_assert!(gap_t == 0.0 || gap_t.signum() == gap_surf.signum());
    }

    #[test]
    fn noiseless_normalization_is_the_normalized_mean(
        e in effusivity(),
        ts in 27.0f64..45.0,
        to in 15.0f64..26.0,
        t in 0.1f64..3.0,
    ) {
        let s = SensorParams { noise_sigma: 0.0, ..sensor() };
        let m = MaterialSample::new(e).unwrap();
        let c = ContactConditions { t_sens0: ts, t_obj0: to, t_contact: t };
        let trace = generate_trace(&s, &m, &c, 0).unwrap();
        prop_assert_eq!(trace.len(), (t * s.sample_rate + 1e-9).floor() as usize);
        let n = normalize_trace(&trace).unwrap();
        for (&ti, &v) in n.times().iter().zip(n.temps()) {
            prop_assert!((v - normalized_mean(&s, &m, ti)).abs() <= 1e-10);
        }
    }

    #[test]
    fn match_is_symmetric_and_exact_only_for_equal_maps(
        a in proptest::collection::vec(proptest::collection::vec(0.5f64..1.0, 6), 6),
        b in proptest::collection::vec(proptest::collection::vec(0.5f64..1.0, 6), 6),
    ) {
        let sym = |r: Vec<Vec<f64>>| -> F1Matrix {
            let r = (0..6)
                .map(|i| (0..6).map(|j| if i == j { 0.5 } else { r[i.min(j)][i.max(j)] }).collect())
                .collect();
            let grid = EffusivityGrid::new(0.0, 6.0, 6).unwrap();
            let cond = MatrixConditions { sensor: sensor(), contact: ContactConditions::default(), sigma: 0.05 };
            F1Matrix::from_rows(MatrixSource::Empirical, grid, cond, r).unwrap()
        };
        let (ma, mb): (BinaryMap, BinaryMap) = (binary_map(&sym(a), 0.9), binary_map(&sym(b), 0.9));
        let (ab, ba) = (matrix_match(&ma, &mb).unwrap(), matrix_match(&mb, &ma).unwrap());
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(ab == 100.0, ma == mb);
        prop_assert_eq!(matrix_match(&ma, &ma).unwrap(), 100.0);
    }
}

#[test]
fn model_matrix_is_exactly_symmetric() {
    let grid = EffusivityGrid::new(0.0, 4.0e4, 40).unwrap();
    let m = f1_matrix(&sensor(), &grid, &ContactConditions::default(), 0.05).unwrap();
    for i in 0..40 {
        assert_eq!(m.get(i, i), 0.5);
        for j in 0..40 {
            assert_eq!(m.get(i, j), m.get(j, i));
        }
    }
}

#[test]
fn classifier_is_deterministic() {
    let s = sensor();
    let c = ContactConditions::default();
    let traces = |e: f64, base: u64| -> Vec<_> {
        (0..15).map(|k| generate_trace(&s, &MaterialSample::new(e).unwrap(), &c, base + k).unwrap()).collect()
    };
    let (a, b) = (traces(800.0, 0), traces(900.0, 100));
    let cfg = ClassifierConfig::default();
    let r1 = train_eval_pair(&a, &b, 3, &cfg).unwrap();
    let r2 = train_eval_pair(&a, &b, 3, &cfg).unwrap();
    assert_eq!(r1, r2);
    let fv = extract_features(&a[0], cfg.slope_window).unwrap();
    assert_eq!(fv.values.len(), 2 * a[0].len());
}

#[test]
fn fit_is_bit_deterministic_and_in_bounds() {
    let s = sensor();
    let c = ContactConditions::default();
    let traces: Vec<_> = (0..3)
        .map(|k| generate_trace(&s, &MaterialSample::new(635.49).unwrap(), &c, 40 + k).unwrap())
        .collect();
    let cfg = FitConfig::default();
    let a = fit_material(&traces, &s, &cfg).unwrap();
    let b = fit_material(&traces, &s, &cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(a.e_obj >= cfg.e_bounds.0 && a.e_obj <= cfg.e_bounds.1);
    assert!(a.t_offset >= cfg.offset_bounds.0 && a.t_offset <= cfg.offset_bounds.1);
    assert!(a.sse >= 0.0);
}

#[test]
fn round_trip_error_is_worst_for_metals() {
    // Relative effusivity error scales like (e + e_sens)²/e, which is smallest
    // near the sensor's own effusivity. Polymers and ceramics straddle that
    // minimum, so only the metals are required to be clearly worse.
    let s = sensor();
    let c = ContactConditions::default();
    let median_err = |e: f64| -> f64 {
        let mut errs: Vec<f64> = (0..10)
            .map(|k| {
                let t = generate_trace(&s, &MaterialSample::new(e).unwrap(), &c, 500 + k).unwrap();
                let r = fit_material(std::slice::from_ref(&t), &s, &FitConfig::default()).unwrap();
                (r.e_obj / e - 1.0).abs()
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        0.5 * (errs[4] + errs[5])
    };
    let non_metals = [336.90, 635.49, 1433.31, 2749.87].map(median_err);
    let metals = [10184.17, 23049.18].map(median_err);
    let worst_non_metal = non_metals.iter().cloned().fold(0.0, f64::max);
    assert!(metals.iter().all(|&m| m > worst_non_metal), "{non_metals:?} vs {metals:?}");
    assert!(metals[0] <= metals[1]);
}

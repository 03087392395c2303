use std::ffi::CStr;
use std::ptr;

use thermosense_ffi::*;

fn last_error() -> String {
    let p = ts_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn scalar_functions() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(ts_erfc(0.0, &mut v), TsStatus::Ok);
        assert_eq!(v, 1.0);
        assert_eq!(ts_reg_inc_beta(0.5, 3.0, 3.0, &mut v), TsStatus::Ok);
        assert!((v - 0.5).abs() < 1e-14);
        assert_eq!(ts_noncentral_f_cdf(1.0, 400.0, 400.0, 0.0, &mut v), TsStatus::Ok);
        assert_eq!(v, 0.5);
    }
    assert!(ts_last_error().is_null());
}

#[test]
fn errors_set_status_and_message() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(ts_erfc(f64::NAN, &mut v), TsStatus::Domain);
        assert!(!last_error().is_empty());
        assert_eq!(ts_reg_inc_beta(1.5, 1.0, 1.0, &mut v), TsStatus::Domain);
        assert_eq!(ts_erfc(1.0, ptr::null_mut()), TsStatus::NullPointer);
        assert!(last_error().contains("out"));
        // a later success clears the message
        assert_eq!(ts_erfc(1.0, &mut v), TsStatus::Ok);
    }
    assert!(ts_last_error().is_null());
}

#[test]
fn pair_prediction_and_delta() {
    let s = ts_sensor_default();
    let c = ts_contact_default();
    let mut p = TsPairPrediction::default();
    unsafe {
        assert_eq!(ts_predict_pair(&s, 100.0, 30000.0, &c, 0.05, &mut p), TsStatus::Ok);
        assert!(p.f1 > 0.999);
        assert_eq!(p.n, 400);
        assert_eq!(ts_predict_pair(&s, 100.0, 30000.0, ptr::null(), 0.05, &mut p), TsStatus::NullPointer);
        let (mut found, mut delta) = (0, 0.0);
        assert_eq!(ts_min_distinguishable_difference(&s, 1000.0, &c, 0.05, 0.9, &mut found, &mut delta), TsStatus::Ok);
        assert_eq!(found, 1);
        assert!(delta > 0.0);
        assert_eq!(ts_min_distinguishable_difference(&s, 20000.0, &c, 50.0, 0.9, &mut found, &mut delta), TsStatus::Ok);
        assert_eq!(found, 0);
        assert!(delta.is_nan());
    }
}

#[test]
fn matrix_and_map_handles() {
    let s = ts_sensor_default();
    let c = ts_contact_default();
    unsafe {
        let mut m: *mut TsF1Matrix = ptr::null_mut();
        assert_eq!(ts_f1_matrix_new(&s, 0.0, 40000.0, 20, &c, 0.05, &mut m), TsStatus::Ok);
        assert_eq!(ts_f1_matrix_size(m), 20);
        let mut v = 0.0;
        assert_eq!(ts_f1_matrix_get(m, 3, 3, &mut v), TsStatus::Ok);
        assert_eq!(v, 0.5);
        assert_eq!(ts_f1_matrix_get(m, 20, 0, &mut v), TsStatus::OutOfBounds);

        let mut map: *mut TsBinaryMap = ptr::null_mut();
        assert_eq!(ts_binary_map_new(m, 0.9, &mut map), TsStatus::Ok);
        let mut bit = 7u8;
        assert_eq!(ts_binary_map_get(map, 0, 0, &mut bit), TsStatus::Ok);
        assert_eq!(bit, 0);
        let mut pct = 0.0;
        assert_eq!(ts_binary_map_match(map, map, &mut pct), TsStatus::Ok);
        assert_eq!(pct, 100.0);

        let dir = tempfile::tempdir().unwrap();
        let path = std::ffi::CString::new(dir.path().join("m.json").to_str().unwrap()).unwrap();
        assert_eq!(ts_f1_matrix_write_json(m, path.as_ptr()), TsStatus::Ok);
        let mut back: *mut TsF1Matrix = ptr::null_mut();
        assert_eq!(ts_f1_matrix_read_json(path.as_ptr(), &mut back), TsStatus::Ok);
        let mut w = 0.0;
        ts_f1_matrix_get(m, 2, 9, &mut v);
        ts_f1_matrix_get(back, 2, 9, &mut w);
        assert_eq!(v, w);

        let mut small: *mut TsF1Matrix = ptr::null_mut();
        ts_f1_matrix_new(&s, 0.0, 40000.0, 5, &c, 0.05, &mut small);
        let mut small_map: *mut TsBinaryMap = ptr::null_mut();
        ts_binary_map_new(small, 0.9, &mut small_map);
        assert_eq!(ts_binary_map_match(map, small_map, &mut pct), TsStatus::Dimension);

        ts_binary_map_free(small_map);
        ts_f1_matrix_free(small);
        ts_f1_matrix_free(back);
        ts_binary_map_free(map);
        ts_f1_matrix_free(m);
        ts_f1_matrix_free(ptr::null_mut());
    }
}

#[test]
fn builtin_database() {
    unsafe {
        let mut db: *mut TsMaterialDb = ptr::null_mut();
        assert_eq!(ts_material_db_builtin(&mut db), TsStatus::Ok);
        assert_eq!(ts_material_db_len(db), 12);
        let names: Vec<String> = (0..12)
            .map(|i| CStr::from_ptr(ts_material_db_name(db, i)).to_string_lossy().into_owned())
            .collect();
        let copper = names.iter().position(|n| n == "Copper").unwrap();
        let mut r = TsMaterialRange::default();
        assert_eq!(ts_material_db_range(db, copper, &mut r), TsStatus::Ok);
        assert_eq!((r.e_min, r.e_max, r.e_identified), (23049.18, 36761.16, 23049.18));
        assert!(ts_material_db_name(db, 12).is_null());
        assert_eq!(ts_material_db_range(db, 12, &mut r), TsStatus::OutOfBounds);
        ts_material_db_free(db);

        let missing = c"/nonexistent/materials.csv";
        assert_eq!(ts_material_db_load(missing.as_ptr(), &mut db), TsStatus::Io);
    }
}

#[test]
fn trace_generation_and_fit() {
    let s = ts_sensor_default();
    let c = ts_contact_default();
    unsafe {
        let mut handles = Vec::new();
        for seed in 0..5u64 {
            let mut t: *mut TsTrace = ptr::null_mut();
            assert_eq!(ts_trace_generate(&s, 1433.31, &c, -0.5, seed, &mut t), TsStatus::Ok);
            handles.push(t);
        }
        assert_eq!(ts_trace_len(handles[0]), 400);
        let temps = std::slice::from_raw_parts(ts_trace_temps(handles[0]), 400);
        assert!((temps[0] - 35.0).abs() < 0.5);
        let times = std::slice::from_raw_parts(ts_trace_times(handles[0]), 400);
        assert!((times[399] - 2.0).abs() < 1e-12);

        let ptrs: Vec<*const TsTrace> = handles.iter().map(|&t| t as *const _).collect();
        let mut r = std::mem::MaybeUninit::<TsFitResult>::uninit();
        assert_eq!(ts_fit_material(ptrs.as_ptr(), ptrs.len(), &s, 30.5, 40000.0, r.as_mut_ptr()), TsStatus::Ok);
        let r = r.assume_init();
        assert!((r.e_obj / 1433.31 - 1.0).abs() < 0.05);
        assert!((r.t_offset + 0.5).abs() < 0.05);
        assert_eq!(r.status, TsFitStatus::Converged);
        for t in handles {
            ts_trace_free(t);
        }
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(ts_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

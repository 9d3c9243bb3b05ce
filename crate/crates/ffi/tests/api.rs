use std::ffi::{CStr, CString};
use std::ptr;

use gbdp_ffi::*;

fn last_error() -> String {
    let p = gbdp_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn uniform(dims: &[usize], l: usize, gamma: f64) -> *mut GbdpParams {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { gbdp_params_uniform(dims.as_ptr(), dims.len(), l, gamma, &mut p) }, GbdpStatus::Ok);
    p
}

#[test]
fn normalize_then_kstep_matches_power() {
    let p = uniform(&[2, 2], 2, 1.0);
    let mut norm = ptr::null_mut();
    let mut rho = 0.0;
    unsafe {
        assert_eq!(gbdp_params_normalize(p, 0.0, &mut norm, &mut rho), GbdpStatus::Ok);
        assert!((rho - 4.0).abs() < 1e-12);
        let n = gbdp_params_num_states(norm);
        assert_eq!(n, 9);
        let mut spectral = vec![0.0; n * n];
        assert_eq!(gbdp_params_kstep(norm, 0.0, 6, spectral.as_mut_ptr(), spectral.len()), GbdpStatus::Ok);
        let mut model = ptr::null_mut();
        assert_eq!(gbdp_params_to_model(norm, &mut model), GbdpStatus::Ok);
        let mut power = vec![0.0; n * n];
        assert_eq!(gbdp_model_matrix_power(model, 6, power.as_mut_ptr(), power.len()), GbdpStatus::Ok);
        let d = spectral.iter().zip(&power).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d <= 1e-12, "{d}");
        for row in spectral.chunks(n) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let mut comm = f64::NAN;
        assert_eq!(gbdp_model_max_commutator(model, &mut comm), GbdpStatus::Ok);
        assert!(comm <= 1e-15);
        gbdp_model_free(model);
        gbdp_params_free(norm);
        gbdp_params_free(p);
    }
}

#[test]
fn small_buffer_and_null_handles() {
    let p = uniform(&[1, 1], 1, 0.25);
    let mut buf = vec![0.0; 3];
    unsafe {
        assert_eq!(gbdp_params_kstep(p, 0.0, 1, buf.as_mut_ptr(), buf.len()), GbdpStatus::BufferTooSmall);
        assert!(last_error().contains("need 16"));
        assert_eq!(gbdp_params_kstep(ptr::null(), 0.0, 1, buf.as_mut_ptr(), 3), GbdpStatus::NullPointer);
        assert_eq!(gbdp_params_num_states(ptr::null()), 0);
        gbdp_params_free(ptr::null_mut());
        gbdp_params_free(p);
    }
}

#[test]
fn parse_errors_map_to_status() {
    let bad = CString::new("format_version = 1\n[shape]\nq = 2\n").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { gbdp_model_parse(bad.as_ptr(), &mut m) }, GbdpStatus::Parse);
    assert!(m.is_null());
    assert!(last_error().starts_with("parse error"));
    let mut p = ptr::null_mut();
    let dims = [2usize, 2];
    assert_eq!(unsafe { gbdp_params_uniform(dims.as_ptr(), 2, 3, 1.0, &mut p) }, GbdpStatus::Shape);
}

#[test]
fn self_mass_out_of_range_is_domain_error() {
    let p = uniform(&[2, 2], 2, 0.1);
    let mut buf = vec![0.0; 81];
    unsafe {
        assert_eq!(gbdp_params_kstep(p, 1.5, 2, buf.as_mut_ptr(), 81), GbdpStatus::Domain);
        gbdp_params_free(p);
    }
}

#[test]
fn ranks_struct() {
    let mut r = GbdpRanks::default();
    let dims = [2usize, 2];
    assert_eq!(unsafe { gbdp_ranks(dims.as_ptr(), 2, 2, &mut r) }, GbdpStatus::Ok);
    assert_eq!((r.q_rows, r.q_cols, r.r_rows, r.r_cols), (36, 36, 15, 36));
    assert_eq!((r.rank_r, r.rank_formula_r, r.rank_formula_q), (14, 14, 22));
    assert_eq!(r.orthogonal, 1);
    let dims = [1usize, 1];
    assert_eq!(unsafe { gbdp_ranks(dims.as_ptr(), 2, 1, &mut r) }, GbdpStatus::Ok);
    assert_eq!((r.rank_q, r.rank_r, r.complementary), (3, 5, 1));
}

#[test]
fn model_round_trip_through_text() {
    let p = uniform(&[2], 1, 0.5);
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(gbdp_params_to_model(p, &mut m), GbdpStatus::Ok);
    }
    let text = gbdp::io::model_to_toml(&gbdp::param::build_model(
        &gbdp::Parametrization::uniform(gbdp::GridShape::balanced(vec![2], 1).unwrap(), 0.5).unwrap(),
    ));
    let c = CString::new(text).unwrap();
    let mut parsed = ptr::null_mut();
    let (mut a, mut b) = (vec![0.0; 9], vec![0.0; 9]);
    unsafe {
        assert_eq!(gbdp_model_parse(c.as_ptr(), &mut parsed), GbdpStatus::Ok);
        assert_eq!(gbdp_model_num_states(parsed), 3);
        assert_eq!(gbdp_model_full_matrix(m, a.as_mut_ptr(), 9), GbdpStatus::Ok);
        assert_eq!(gbdp_model_full_matrix(parsed, b.as_mut_ptr(), 9), GbdpStatus::Ok);
        gbdp_model_free(parsed);
        gbdp_model_free(m);
        gbdp_params_free(p);
    }
    assert_eq!(a, b);
    assert_eq!(a[1], 0.5);
}

use std::ffi::CStr;
use std::ptr;

use spectral_reg_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(sr_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn worked_adv_inf_coefficient_through_the_abi() {
    unsafe {
        let mut sys = ptr::null_mut();
        assert_eq!(sr_system_from_singular_values([1.0].as_ptr(), 1, &mut sys), SrStatus::Ok);
        let mut law = ptr::null_mut();
        assert_eq!(sr_law_from_moments([1.0].as_ptr(), [0.5].as_ptr(), 1, &mut law), SrStatus::Ok);
        let mut f = ptr::null_mut();
        assert_eq!(sr_filter_adv_inf(sys, law, 0.6, &mut f), SrStatus::Ok);
        let mut g = [0.0];
        let mut len = 0;
        assert_eq!(sr_filter_coefficients(f, g.as_mut_ptr(), 1, &mut len), SrStatus::Ok);
        assert_eq!(len, 1);
        // 1 / (1 - 0.6 (0.5 - 0.6) / (1 - 0.3))
        assert!((g[0] - 1.0 / (1.0 + 0.06 / 0.7)).abs() < 1e-15);
        sr_filter_free(f);
        sr_law_free(law);
        sr_system_free(sys);
    }
}

#[test]
fn generic_risk_of_mse_filter_equals_analytic() {
    unsafe {
        let (mut sys, mut law, mut noise, mut f) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(sr_system_synthetic(16, 1.0, &mut sys), SrStatus::Ok);
        let mut n = 0;
        assert_eq!(sr_system_len(sys, &mut n), SrStatus::Ok);
        assert_eq!(n, 16);
        assert_eq!(sr_law_from_decay(16, 2.0, &mut law), SrStatus::Ok);
        assert_eq!(sr_white_noise(16, 0.05, &mut noise), SrStatus::Ok);
        assert_eq!(sr_filter_mse(sys, law, noise, &mut f), SrStatus::Ok);
        let (mut a, mut b) = (0.0, 0.0);
        assert_eq!(sr_risk_analytic(sys, law, noise, &mut a), SrStatus::Ok);
        assert_eq!(sr_risk_generic(f, sys, law, noise, &mut b), SrStatus::Ok);
        assert!((a - b).abs() <= 1e-14 * a);
        // oracle: sum Pi Delta / (Pi sigma^2 + Delta)
        let want: f64 = (1..=16)
            .map(|k| {
                let (s, p, d) = (1.0 / k as f64, (k as f64).powi(-2), 0.0025);
                p * d / (p * s * s + d)
            })
            .sum();
        assert!((a - want).abs() <= 1e-14 * want);
        for h in [f] {
            sr_filter_free(h);
        }
        sr_noise_free(noise);
        sr_law_free(law);
        sr_system_free(sys);
    }
}

#[test]
fn worst_case_l2_with_uniform_gain_aligns_with_residual() {
    unsafe {
        let (mut sys, mut f) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(sr_system_from_singular_values([1.0, 1.0].as_ptr(), 2, &mut sys), SrStatus::Ok);
        assert_eq!(sr_filter_tikhonov(sys, 1.0, &mut f), SrStatus::Ok);
        // g = 1/2 everywhere: the best e is parallel to the residual, value (|v| + g delta)^2
        let mut v = 0.0;
        assert_eq!(sr_worst_case_l2(f, sys, [0.3, -0.2].as_ptr(), 2, 0.5, &mut v), SrStatus::Ok);
        let want = (0.5 * 0.13f64.sqrt() + 0.25).powi(2);
        assert!((v - want).abs() < 1e-12 * want, "{v} vs {want}");
        assert_eq!(sr_filter_tikhonov(sys, 0.0, &mut f), SrStatus::InvalidArgument);
        sr_filter_free(f);
        sr_system_free(sys);
    }
}

#[test]
fn matrix_constructor_reads_row_major() {
    unsafe {
        let mut sys = ptr::null_mut();
        let a = [3.0, 0.0, 0.0, 0.0, 2.0, 0.0];
        assert_eq!(sr_system_from_matrix(a.as_ptr(), 2, 3, &mut sys), SrStatus::Ok);
        let mut n = 0;
        sr_system_len(sys, &mut n);
        assert_eq!(n, 2);
        sr_system_free(sys);
    }
}

#[test]
fn errors_are_reported_with_codes_and_messages() {
    unsafe {
        let mut sys = ptr::null_mut();
        assert_eq!(sr_system_synthetic(0, 1.0, &mut sys), SrStatus::InvalidArgument);
        assert!(sys.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(sr_system_synthetic(4, 1.0, ptr::null_mut()), SrStatus::NullPointer);
        assert!(last_error().contains("null"));

        assert_eq!(sr_system_synthetic(4, 1.0, &mut sys), SrStatus::Ok);
        assert!(last_error().is_empty());
        let (mut law, mut noise, mut f) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        sr_law_from_decay(3, 2.0, &mut law);
        sr_white_noise(4, 0.1, &mut noise);
        assert_eq!(sr_filter_mse(sys, law, noise, &mut f), SrStatus::Dimension);
        assert!(f.is_null());

        let mut ok_law = ptr::null_mut();
        sr_law_from_decay(4, 2.0, &mut ok_law);
        assert_eq!(sr_filter_mse(sys, ok_law, noise, &mut f), SrStatus::Ok);
        let mut len = 0;
        let mut small = [0.0; 2];
        assert_eq!(sr_filter_coefficients(f, small.as_mut_ptr(), 2, &mut len), SrStatus::BufferTooSmall);
        assert_eq!(len, 4);
        assert_eq!(small, [0.0; 2]);

        assert_eq!(sr_system_len(ptr::null(), &mut len), SrStatus::NullPointer);
        sr_filter_free(f);
        sr_filter_free(ptr::null_mut());
        sr_law_free(law);
        sr_law_free(ok_law);
        sr_noise_free(noise);
        sr_system_free(sys);
    }
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(sr_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

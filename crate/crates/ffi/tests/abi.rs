use std::f64::consts::PI;
use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use tdp::*;

fn model(alpha: f64, beta: f64) -> *mut TdpModel {
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { tdp_model_new(alpha, beta, 1.0, &mut m) },
        TdpStatus::Ok
    );
    m
}

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    unsafe { tdp_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn charges_through_the_handle() {
    for (alpha, beta, expected) in [(0.0, 0.0, 2), (2.0, 0.0, 1), (0.0, -2.2, 0)] {
        let m = model(alpha, beta);
        let (mut c, mut res) = (0i64, f64::NAN);
        assert_eq!(
            unsafe { tdp_monopole_charge(m, 40, 80, &mut c, &mut res) },
            TdpStatus::Ok
        );
        assert_eq!(c.abs(), expected);
        assert!(res < 1e-6);
        unsafe { tdp_model_free(m) };
    }
}

#[test]
fn gap_closing_is_reported_with_a_message() {
    let m = model(0.0, -2.0);
    let (mut c, mut res) = (0i64, 0.0);
    assert_eq!(
        unsafe { tdp_monopole_charge(m, 40, 80, &mut c, &mut res) },
        TdpStatus::GapClosed
    );
    assert!(last_error().starts_with("GapClosedOnSphere"));
    let needed = unsafe { tdp_last_error_message(ptr::null_mut(), 0) };
    assert_eq!(needed, last_error().len());
    unsafe { tdp_model_free(m) };
}

#[test]
fn flux_parts_add_up_to_the_wilson_phase() {
    let m = model(0.0, -2.2);
    let mut f = TdpFlux::default();
    assert_eq!(
        unsafe { tdp_small_loop_flux(m, 0.2, 2048, &mut f) },
        TdpStatus::Ok
    );
    let sum = f.gamma_f + f.gamma_t + f.boundary;
    let d = (f.gamma - sum + PI).rem_euclid(2.0 * PI) - PI;
    assert!(d.abs() < 1e-3, "{f:?}");
    unsafe { tdp_model_free(m) };
}

#[test]
fn ground_state_at_north_pole_has_fz_minus_one() {
    let m = model(0.0, 0.0);
    let (mut f, mut n) = ([0.0; 3], [0.0; 9]);
    assert_eq!(
        unsafe { tdp_ground_moments(m, 0.0, 0.0, f.as_mut_ptr(), n.as_mut_ptr()) },
        TdpStatus::Ok
    );
    assert!((f[2] + 1.0).abs() < 1e-12 && f[0].abs() < 1e-12 && f[1].abs() < 1e-12);
    assert!((n[0] + n[4] + n[8]).abs() < 1e-12);
    assert_eq!(n[1], n[3]);
    unsafe { tdp_model_free(m) };
}

#[test]
fn invalid_arguments_are_rejected() {
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { tdp_model_new(0.0, 0.0, -1.0, &mut m) },
        TdpStatus::InvalidInput
    );
    assert!(m.is_null());
    assert_eq!(
        unsafe { tdp_model_new(0.0, 0.0, 1.0, ptr::null_mut()) },
        TdpStatus::NullPointer
    );
    let mut f = TdpFlux::default();
    assert_eq!(
        unsafe { tdp_small_loop_flux(ptr::null(), 0.2, 64, &mut f) },
        TdpStatus::NullPointer
    );
    let good = model(0.0, 0.0);
    assert_eq!(
        unsafe { tdp_small_loop_flux(good, 0.2, 4, &mut f) },
        TdpStatus::InvalidInput
    );
    unsafe { tdp_model_free(good) };
    unsafe { tdp_model_free(ptr::null_mut()) };
    let name = unsafe { CStr::from_ptr(tdp_status_name(TdpStatus::GapClosed)) };
    assert_eq!(name.to_str().unwrap(), "gap closed");
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "tdp.h"
int main(void) {
    TdpModel *m = NULL;
    if (tdp_model_new(0.0, 0.0, 1.0, &m) != TDP_STATUS_OK) return 1;
    int64_t c = 0; double res = 0.0;
    if (tdp_monopole_charge(m, 24, 48, &c, &res) != TDP_STATUS_OK) return 2;
    tdp_model_free(m);
    printf("%lld\n", (long long)c);
    return 0;
}
"#;

#[test]
fn header_compiles_and_links_from_c() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("libtdp.a");
    if !lib.exists() {
        panic!("static library not found at {}", lib.display());
    }
    let work = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let src = work.join("abi_check.c");
    let exe = work.join("abi_check");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("run C compiler");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "2");
}

use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use lmm_wkb_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(lmm_last_error()) }.to_string_lossy().into_owned()
}

fn engine(n: usize) -> *mut LmmEngine {
    let mut e = ptr::null_mut();
    assert_eq!(unsafe { lmm_engine_new_case_study(n, 1.0, &mut e) }, LmmStatus::Ok);
    assert!(!e.is_null());
    e
}

#[test]
fn european_price_and_delta() {
    let e = engine(6);
    let mut r = LmmEstimate::default();
    unsafe {
        assert_eq!(lmm_european(e, LMM_LEVEL_WKB1, 4000, 3, LMM_PRICE, &mut r), LmmStatus::Ok);
        assert!(r.value > 0.0 && r.std_dev > 0.0 && r.samples == 4000);
        assert_eq!(last_error(), "");
        let mut d = LmmEstimate::default();
        assert_eq!(lmm_european(e, LMM_LEVEL_EULER, 4000, 3, 5, &mut d), LmmStatus::Ok);
        assert!(d.value > 0.0);
        lmm_engine_free(e);
    }
}

#[test]
fn bermudan_needs_a_policy_and_round_trips_it() {
    let e = engine(6);
    let mut r = LmmEstimate::default();
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("p.txt").to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(lmm_bermudan(e, LMM_LEVEL_WKB1, 100, 1, LMM_PRICE, &mut r), LmmStatus::NoPolicy);
        assert!(last_error().contains("policy"));
        assert_eq!(lmm_engine_save_policy(e, path.as_ptr()), LmmStatus::NoPolicy);
        assert_eq!(lmm_engine_calibrate_policy(e, 100, 1), LmmStatus::Calibration);
        assert_eq!(lmm_engine_calibrate_policy(e, 10_000, 1), LmmStatus::Ok);
        assert_eq!(lmm_engine_save_policy(e, path.as_ptr()), LmmStatus::Ok);
        assert_eq!(lmm_bermudan(e, LMM_LEVEL_WKB1, 2000, 1, LMM_PRICE, &mut r), LmmStatus::Ok);
        let first = r;

        let other = engine(6);
        assert_eq!(lmm_engine_load_policy(other, path.as_ptr()), LmmStatus::Ok);
        assert_eq!(lmm_bermudan(other, LMM_LEVEL_WKB1, 2000, 1, LMM_PRICE, &mut r), LmmStatus::Ok);
        assert_eq!(r, first);

        // A policy for six rates does not fit a longer tenor structure.
        let longer = engine(10);
        assert_ne!(lmm_engine_load_policy(longer, path.as_ptr()), LmmStatus::Ok);
        for h in [e, other, longer] {
            lmm_engine_free(h);
        }
    }
}

#[test]
fn argument_errors() {
    let e = engine(4);
    let mut r = LmmEstimate::default();
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(lmm_european(ptr::null(), 0, 10, 1, LMM_PRICE, &mut r), LmmStatus::NullPointer);
        assert_eq!(lmm_european(e, 0, 10, 1, LMM_PRICE, ptr::null_mut()), LmmStatus::NullPointer);
        assert_eq!(lmm_european(e, 9, 10, 1, LMM_PRICE, &mut r), LmmStatus::InvalidParameter);
        assert_eq!(lmm_european(e, 0, 10, 1, 4, &mut r), LmmStatus::InvalidParameter);
        assert_eq!(lmm_european(e, 0, 1, 1, LMM_PRICE, &mut r), LmmStatus::InvalidParameter);
        assert_eq!(lmm_engine_new_case_study(0, 1.0, &mut out), LmmStatus::InvalidParameter);
        assert_eq!(lmm_engine_new_case_study(4, -1.0, &mut out), LmmStatus::InvalidParameter);
        assert!(out.is_null());
        assert_eq!(lmm_engine_num_rates(ptr::null()), 0);
        let missing = CString::new("/definitely/not/here.conf").unwrap();
        assert_eq!(lmm_engine_from_config(missing.as_ptr(), &mut out), LmmStatus::Io);
        assert!(last_error().contains("here.conf"));
        lmm_engine_free(e);
    }
}

#[test]
fn config_file_errors_report_their_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.conf");
    std::fs::write(&p, "n = 5\nvol = x\n").unwrap();
    let c = CString::new(p.to_str().unwrap()).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { lmm_engine_from_config(c.as_ptr(), &mut out) }, LmmStatus::Config);
    assert!(last_error().contains(":2:"), "{}", last_error());
}

/// Compiles the C smoke test against the generated header and static library.
#[test]
fn c_smoke_program() {
    let Ok(exe) = std::env::current_exe() else { return };
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("liblmm_wkb_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no static library or C compiler");
        return;
    }
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let bin = tempfile::tempdir().unwrap().keep().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(root.join("include"))
        .arg(root.join("tests/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}

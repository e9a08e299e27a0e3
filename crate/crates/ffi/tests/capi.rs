use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use hyfacial_ffi::*;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn last_error() -> String {
    let p = hyf_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// Two bright squares on a dark ground, with corners well inside the ORB border.
fn squares() -> *mut HyfImage {
    let bright = |y: usize, x: usize| (20..30).contains(&y) && (22..40).contains(&x) || (34..44).contains(&y) && (30..42).contains(&x);
    let px: Vec<f64> = (0..64 * 64).map(|i| if bright(i / 64, i % 64) { 0.8 } else { 0.1 }).collect();
    let mut img = ptr::null_mut();
    assert_eq!(unsafe { hyf_image_new(64, 64, px.as_ptr(), &mut img) }, HyfStatus::Ok);
    img
}

#[test]
fn descriptors_through_handles() {
    let img = squares();
    let mut orb = ptr::null_mut();
    unsafe {
        assert_eq!(hyf_orb_describe(img, &mut orb), HyfStatus::Ok);
        let n = hyf_descriptors_len(orb);
        assert!(n > 0);
        let mut row = vec![0.0; 256];
        assert_eq!(hyf_descriptors_row(orb, n - 1, row.as_mut_ptr(), 256), HyfStatus::Ok);
        assert!(row.iter().all(|&b| b == 0.0 || b == 1.0));
        assert_eq!(hyf_descriptors_row(orb, n, row.as_mut_ptr(), 256), HyfStatus::OutOfRange);
        let mut kp = [0.0; 4];
        assert_eq!(hyf_descriptors_keypoint(orb, 0, kp.as_mut_ptr()), HyfStatus::Ok);
        assert!(kp[0] >= 16.0 && kp[1] >= 16.0);
        hyf_descriptors_free(orb);

        let mut sift = ptr::null_mut();
        assert_eq!(hyf_sift_describe(img, &mut sift), HyfStatus::Ok);
        assert_eq!(hyf_descriptors_dim(sift), 128);
        hyf_descriptors_free(sift);
        hyf_image_free(img);
    }
}

#[test]
fn errors_set_status_and_message() {
    let mut img = ptr::null_mut();
    let px = [f64::NAN; 4];
    unsafe {
        assert_eq!(hyf_image_new(2, 2, px.as_ptr(), &mut img), HyfStatus::InvalidArgument);
        assert!(img.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(hyf_image_new(2, 2, ptr::null(), &mut img), HyfStatus::NullPointer);
        assert!(last_error().contains("pixels"));
        assert_eq!(hyf_sift_describe(ptr::null(), ptr::null_mut()), HyfStatus::NullPointer);
        assert_eq!(hyf_descriptors_len(ptr::null()), 0);
        hyf_image_free(ptr::null_mut());
        hyf_string_free(ptr::null_mut());
    }
    let ok = squares();
    assert!(hyf_last_error_message().is_null());
    unsafe { hyf_image_free(ok) };
}

#[test]
fn deep_features_load() {
    let path = CString::new(fixtures().join("fer_tiny_deep.hyf").to_str().unwrap()).unwrap();
    let mut t = ptr::null_mut();
    unsafe {
        assert_eq!(hyf_deep_features_load(path.as_ptr(), &mut t), HyfStatus::Ok);
        assert_eq!(hyf_deep_features_len(t), 200);
        let d = hyf_deep_features_dim(t);
        let mut row = vec![0.0; d];
        assert_eq!(hyf_deep_features_row(t, 199, row.as_mut_ptr(), d), HyfStatus::Ok);
        let mut id = ptr::null_mut();
        assert_eq!(hyf_deep_features_id(t, 199, &mut id), HyfStatus::Ok);
        assert_eq!(CStr::from_ptr(id).to_str().unwrap(), "199");
        hyf_string_free(id);
        hyf_deep_features_free(t);

        let missing = CString::new("/nonexistent/x.hyf").unwrap();
        assert_eq!(hyf_deep_features_load(missing.as_ptr(), &mut t), HyfStatus::Failed);
        assert!(t.is_null());
    }
}

#[test]
fn pipeline_round_trip_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixtures().join("signal_in_noise_config.json")).unwrap()).unwrap();
    cfg["out"] = dir.path().to_str().unwrap().into();
    let text = CString::new(cfg.to_string()).unwrap();
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(hyf_pipeline_run_json(text.as_ptr(), ptr::null(), &mut out), HyfStatus::Ok, "{}", last_error());
        let report: serde_json::Value = serde_json::from_str(CStr::from_ptr(out).to_str().unwrap()).unwrap();
        hyf_string_free(out);
        assert!(report["accuracy"].as_f64().unwrap() > 0.9);
        assert!(dir.path().join("report.json").is_file());

        cfg["sources"] = serde_json::json!([]);
        let bad = CString::new(cfg.to_string()).unwrap();
        assert_eq!(hyf_pipeline_run_json(bad.as_ptr(), ptr::null(), &mut out), HyfStatus::Validation);
        assert!(out.is_null());
        assert!(last_error().contains("source"));

        let junk = CString::new("{not json").unwrap();
        assert_eq!(hyf_pipeline_run_json(junk.as_ptr(), ptr::null(), &mut out), HyfStatus::Validation);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/hyfacial.h")).unwrap();
    for f in [
        "hyf_last_error_message",
        "hyf_version",
        "hyf_string_free",
        "hyf_image_new",
        "hyf_image_free",
        "hyf_sift_describe",
        "hyf_orb_describe",
        "hyf_descriptors_len",
        "hyf_descriptors_dim",
        "hyf_descriptors_keypoint",
        "hyf_descriptors_row",
        "hyf_descriptors_free",
        "hyf_deep_features_load",
        "hyf_deep_features_len",
        "hyf_deep_features_dim",
        "hyf_deep_features_row",
        "hyf_deep_features_id",
        "hyf_deep_features_free",
        "hyf_pipeline_run_json",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("HYF_STATUS_OK = 0"));
}

/// Compiles the C smoke program against the generated header and static library.
#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // tests run from target/<profile>/deps
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libhyfacial_ffi.a");
    assert!(lib.is_file(), "{} not built", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let cc = Command::new(std::env::var("CC").unwrap_or_else(|_| "cc".into()))
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(cc.status.success(), "{}", String::from_utf8_lossy(&cc.stderr));
    let run = Command::new(&exe).arg(fixtures().join("fer_tiny_deep.hyf")).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}

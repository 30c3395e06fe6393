use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::ptr;

use signeq_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    unsafe { signeq_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn model(spec: &str, seed: u64) -> *mut SigneqModel {
    let spec = CString::new(spec).unwrap();
    let mut m = ptr::null_mut();
    let s = unsafe { signeq_model_new(spec.as_ptr(), seed, &mut m) };
    assert_eq!(s, SigneqStatus::Ok, "{}", last_error());
    m
}

fn forward(m: *const SigneqModel, x: &[f64], shape: &[usize]) -> (Vec<f64>, Vec<usize>) {
    let mut len = 0;
    let mut rank = 0;
    let mut oshape = [0usize; 8];
    let s = unsafe {
        signeq_model_forward(
            m,
            x.as_ptr(),
            shape.as_ptr(),
            shape.len(),
            ptr::null_mut(),
            0,
            &mut len,
            oshape.as_mut_ptr(),
            8,
            &mut rank,
        )
    };
    assert_eq!(s, SigneqStatus::BufferTooSmall);
    let mut out = vec![0.0; len];
    let s = unsafe {
        signeq_model_forward(
            m,
            x.as_ptr(),
            shape.as_ptr(),
            shape.len(),
            out.as_mut_ptr(),
            len,
            &mut len,
            ptr::null_mut(),
            0,
            ptr::null_mut(),
        )
    };
    assert_eq!(s, SigneqStatus::Ok, "{}", last_error());
    (out, oshape[..rank].to_vec())
}

#[test]
fn elementwise_model_is_sign_equivariant_across_the_boundary() {
    let m = model(r#"{"arch":"sign_eq_elementwise","k":3,"widths":[8,8]}"#, 7);
    let x: Vec<f64> = (0..15).map(|i| ((i * 37 % 11) as f64 - 5.0) / 4.0).collect();
    let (y, shape) = forward(m, &x, &[5, 3]);
    assert_eq!(shape, vec![5, 3]);
    // flip column 1
    let xf: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, v)| if i % 3 == 1 { -v } else { *v })
        .collect();
    let (yf, _) = forward(m, &xf, &[5, 3]);
    for i in 0..15 {
        let expect = if i % 3 == 1 { -y[i] } else { y[i] };
        assert!((yf[i] - expect).abs() < 1e-12);
    }
    let mut count = 0;
    assert_eq!(unsafe { signeq_model_param_count(m, &mut count) }, SigneqStatus::Ok);
    assert!(count > 0);
    unsafe { signeq_model_free(m) };
}

#[test]
fn same_seed_same_weights() {
    let spec = r#"{"arch":"signnet","k":2,"widths":[4],"out":3}"#;
    let (a, b) = (model(spec, 1), model(spec, 1));
    let x = [0.1, -0.4, 0.3, 0.9, -0.2, 0.5];
    assert_eq!(forward(a, &x, &[3, 2]), forward(b, &x, &[3, 2]));
    unsafe {
        signeq_model_free(a);
        signeq_model_free(b);
    }
}

#[test]
fn spec_round_trips() {
    let m = model(r#"{"arch":"universal_pair_decoder","k":4,"width":8}"#, 0);
    let mut needed = 0;
    assert_eq!(
        unsafe { signeq_model_spec(m, ptr::null_mut(), 0, &mut needed) },
        SigneqStatus::BufferTooSmall
    );
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(
        unsafe { signeq_model_spec(m, buf.as_mut_ptr(), needed, &mut needed) },
        SigneqStatus::Ok
    );
    let json = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["arch"], "universal_pair_decoder");
    assert_eq!(v["k"], 4);
    unsafe { signeq_model_free(m) };
}

#[test]
fn errors_are_reported() {
    let mut m = ptr::null_mut();
    let bad = CString::new(r#"{"arch":"nope"}"#).unwrap();
    assert_eq!(
        unsafe { signeq_model_new(bad.as_ptr(), 0, &mut m) },
        SigneqStatus::InvalidArgument
    );
    assert!(m.is_null());
    assert!(last_error().contains("nope"));
    assert_eq!(
        unsafe { signeq_model_new(ptr::null(), 0, &mut m) },
        SigneqStatus::NullPointer
    );

    let m = model(r#"{"arch":"sign_eq_elementwise","k":3,"widths":[4]}"#, 0);
    let x = [0.0; 8];
    let mut len = 0;
    let s = unsafe {
        signeq_model_forward(
            m,
            x.as_ptr(),
            [4usize, 2].as_ptr(),
            2,
            ptr::null_mut(),
            0,
            &mut len,
            ptr::null_mut(),
            0,
            ptr::null_mut(),
        )
    };
    assert_eq!(s, SigneqStatus::ShapeMismatch, "{}", last_error());
    unsafe { signeq_model_free(m) };
    unsafe { signeq_model_free(ptr::null_mut()) };

    let mut small = [0 as c_char; 4];
    let full = unsafe { signeq_last_error(small.as_mut_ptr(), small.len()) };
    assert!(full > 3);
    assert_eq!(small[3], 0);
}

#[test]
fn dimension_formula_and_overflow() {
    let mut d = 0;
    assert_eq!(unsafe { signeq_fixed_dim(2, 1, 1, &mut d) }, SigneqStatus::Ok);
    assert_eq!(d, 2);
    assert_eq!(unsafe { signeq_fixed_dim(3, 1, 2, &mut d) }, SigneqStatus::Ok);
    assert_eq!(d, 0);
    assert_eq!(
        unsafe { signeq_fixed_dim(1, 1, 1, ptr::null_mut()) },
        SigneqStatus::NullPointer
    );
}

#[test]
fn quick_suite_passes() {
    let mut passed = 0;
    assert_eq!(unsafe { signeq_check(3, 1, &mut passed) }, SigneqStatus::Ok);
    assert_eq!(passed, 1, "{}", last_error());
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(signeq_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

/// Compiles a small C program against the generated header and static
/// library, then runs it.
#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header_dir = manifest.join("include");
    assert!(header_dir.join("signeq.h").exists());
    // tests live in target/<profile>/deps; the static library is one level up
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libsigneq_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "signeq.h"
int main(void) {
    SigneqModel *m = NULL;
    if (signeq_model_new("{\"arch\":\"sign_eq_elementwise\",\"k\":2,\"widths\":[4]}", 5, &m) != SIGNEQ_STATUS_OK) return 10;
    double x[4] = {0.5, -1.0, 0.25, 2.0}, y[4], yf[4];
    size_t shape[2] = {2, 2}, len = 0;
    if (signeq_model_forward(m, x, shape, 2, y, 4, &len, NULL, 0, NULL) != SIGNEQ_STATUS_OK || len != 4) return 11;
    x[0] = -x[0]; x[2] = -x[2];
    if (signeq_model_forward(m, x, shape, 2, yf, 4, &len, NULL, 0, NULL) != SIGNEQ_STATUS_OK) return 12;
    for (int i = 0; i < 4; i++) {
        double e = (i % 2 == 0) ? -y[i] : y[i];
        if (yf[i] - e > 1e-12 || e - yf[i] > 1e-12) return 13;
    }
    signeq_model_free(m);
    uint64_t d = 0;
    if (signeq_fixed_dim(4, 2, 2, &d) != SIGNEQ_STATUS_OK) return 14;
    printf("%llu\n", (unsigned long long)d);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = tmp.path().join("main");
    let status = std::process::Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("a C compiler is available");
    assert!(status.success());
    let out = std::process::Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let mut d = 0;
    unsafe { signeq_fixed_dim(4, 2, 2, &mut d) };
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), d.to_string());
}

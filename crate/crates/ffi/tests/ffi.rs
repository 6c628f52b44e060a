use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use fracevo_ffi::*;

fn last_error() -> String {
    let p = fracevo_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn diagonal(l: &[f64]) -> *mut FracevoOperator {
    let mut op = ptr::null_mut();
    assert_eq!(unsafe { fracevo_operator_diagonal(l.as_ptr(), l.len(), &mut op) }, FracevoStatus::Ok);
    op
}

fn problem(op: *const FracevoOperator, alpha: f64, u0: &[f64], kind: FracevoNonlinearity, c: f64, radius: f64) -> *mut FracevoProblem {
    let mut p = ptr::null_mut();
    let s = unsafe { fracevo_problem_new(op, alpha, u0.as_ptr(), u0.len(), ptr::null(), kind, c, radius, &mut p) };
    assert_eq!(s, FracevoStatus::Ok);
    p
}

fn values(u: *const FracevoTrajectory) -> (Vec<f64>, Vec<f64>) {
    unsafe {
        let n = fracevo_trajectory_len(u);
        let d = fracevo_trajectory_dim(u);
        let mut t = vec![0.0; n];
        let mut v = vec![0.0; n * d];
        assert_eq!(fracevo_trajectory_times(u, t.as_mut_ptr(), n), FracevoStatus::Ok);
        assert_eq!(fracevo_trajectory_values(u, v.as_mut_ptr(), n * d), FracevoStatus::Ok);
        (t, v)
    }
}

#[test]
fn linear_scalar_solve_through_handles() {
    let op = diagonal(&[1.0]);
    assert_eq!(unsafe { fracevo_operator_dim(op) }, 1);
    let p = problem(op, 0.5, &[1.0], FracevoNonlinearity::Zero, 0.0, 0.0);
    let mut u = ptr::null_mut();
    assert_eq!(unsafe { fracevo_solve(p, 1.0, 256, 0.0, &mut u) }, FracevoStatus::Ok);
    let (t, v) = values(u);
    assert_eq!(t.len(), 257);
    assert_eq!(t[256], 1.0);
    assert_eq!(v[0], 1.0);
    // e^t erfc(√t) at t = 1
    assert!((v[256] - 0.42758357615580705).abs() < 1e-6);
    unsafe {
        fracevo_trajectory_free(u);
        fracevo_problem_free(p);
        fracevo_operator_free(op);
    }
}

#[test]
fn laplacian_operator_reports_its_spectrum() {
    let mut op = ptr::null_mut();
    assert_eq!(unsafe { fracevo_operator_laplacian(4, 1.0, &mut op) }, FracevoStatus::Ok);
    let mut l = [0.0; 4];
    assert_eq!(unsafe { fracevo_operator_eigenvalues(op, l.as_mut_ptr(), 4) }, FracevoStatus::Ok);
    let pi2 = std::f64::consts::PI.powi(2);
    for (k, v) in l.iter().enumerate() {
        assert!((v - ((k + 1) * (k + 1)) as f64 * pi2).abs() < 1e-9);
    }
    assert_eq!(unsafe { fracevo_operator_eigenvalues(op, l.as_mut_ptr(), 3) }, FracevoStatus::Dimension);
    assert!(last_error().contains("expected 4"));
    unsafe { fracevo_operator_free(op) };
}

#[test]
fn semilinear_and_continuation() {
    let op = diagonal(&[1.0]);
    let cubic = problem(op, 0.5, &[1.0], FracevoNonlinearity::CubicDissipative, 1.0, 1.1);
    let mut u = ptr::null_mut();
    assert_eq!(unsafe { fracevo_solve(cubic, 1.0, 256, 1.0, &mut u) }, FracevoStatus::Ok);
    let (_, v) = values(u);
    assert!(v.iter().all(|x| x.is_finite() && *x <= 1.0 + 1e-12 && *x > 0.0));

    let quad_op = diagonal(&[0.1]);
    let q = problem(quad_op, 0.5, &[2.0], FracevoNonlinearity::Quadratic, -1.0, 0.0);
    let mut r = FracevoContinuation::default();
    let mut traj = ptr::null_mut();
    assert_eq!(unsafe { fracevo_continue(q, 10.0, &mut r, &mut traj) }, FracevoStatus::Ok);
    assert_eq!(r.blew_up, 1);
    assert!(r.lower <= r.t_star && r.t_star <= r.upper && r.upper < 0.05);
    assert!(unsafe { fracevo_trajectory_len(traj) } > 10);

    // without truncation the fixed-horizon solver rejects the local nonlinearity
    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { fracevo_solve(q, 1.0, 64, 0.0, &mut bad) }, FracevoStatus::InvalidArgument);
    assert!(bad.is_null());
    unsafe {
        fracevo_trajectory_free(u);
        fracevo_trajectory_free(traj);
        fracevo_problem_free(cubic);
        fracevo_problem_free(q);
        fracevo_operator_free(op);
        fracevo_operator_free(quad_op);
    }
}

#[test]
fn errors_map_to_codes() {
    let mut op = ptr::null_mut();
    assert_eq!(unsafe { fracevo_operator_diagonal(ptr::null(), 3, &mut op) }, FracevoStatus::NullPointer);
    assert!(last_error().contains("eigenvalues"));
    assert_eq!(unsafe { fracevo_operator_diagonal([-1.0].as_ptr(), 1, &mut op) }, FracevoStatus::InvalidArgument);
    assert!(op.is_null());

    let good = diagonal(&[1.0, 2.0]);
    let mut p = ptr::null_mut();
    let u0 = [1.0];
    let s = unsafe { fracevo_problem_new(good, 0.5, u0.as_ptr(), 1, ptr::null(), FracevoNonlinearity::Zero, 0.0, 0.0, &mut p) };
    assert_eq!(s, FracevoStatus::Dimension);
    let u0 = [1.0, 1.0];
    let s = unsafe { fracevo_problem_new(good, 1.0, u0.as_ptr(), 2, ptr::null(), FracevoNonlinearity::Zero, 0.0, 0.0, &mut p) };
    assert_eq!(s, FracevoStatus::InvalidArgument);
    assert!(last_error().contains("(0, 1)"), "{}", last_error());

    let mut x = 0.0;
    assert_eq!(unsafe { fracevo_mittag_leffler_neg(0.5, 1.0, 1.0, &mut x) }, FracevoStatus::Ok);
    assert!((x - 0.42758357615580705).abs() < 1e-14);
    assert!(fracevo_last_error_message().is_null());
    assert_eq!(unsafe { fracevo_mittag_leffler_neg(0.5, 1.0, -1.0, &mut x) }, FracevoStatus::InvalidArgument);

    assert_eq!(unsafe { fracevo_operator_dim(ptr::null()) }, 0);
    unsafe {
        fracevo_operator_free(ptr::null_mut());
        fracevo_operator_free(good);
    }
}

#[test]
fn run_config_writes_artifacts_and_reports_violations() {
    let preset = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/presets/linear-scalar.toml");
    let text = std::fs::read_to_string(preset).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let cfg = CString::new(text.clone()).unwrap();
    assert_eq!(unsafe { fracevo_run_config(cfg.as_ptr(), out.as_ptr()) }, FracevoStatus::Ok);
    assert!(dir.path().join("trajectory.csv").exists());

    let bad = CString::new(text.replace("alpha = 0.5", "alpha = 2.0")).unwrap();
    assert_eq!(unsafe { fracevo_run_config(bad.as_ptr(), out.as_ptr()) }, FracevoStatus::InvalidArgument);
    assert!(last_error().contains("problem.alpha"));
    assert_eq!(unsafe { fracevo_run_config(ptr::null(), out.as_ptr()) }, FracevoStatus::NullPointer);
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(fracevo_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/fracevo.h")).unwrap();
    for name in [
        "FracevoStatus fracevo_solve(",
        "FracevoStatus fracevo_continue(",
        "FracevoStatus fracevo_problem_new(",
        "void fracevo_trajectory_free(",
        "const char *fracevo_last_error_message(void)",
        "typedef struct FracevoOperator FracevoOperator;",
        "FRACEVO_STATUS_GRID_TOO_COARSE = 5",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_static_library() {
    let lib = target_dir().join("libfracevo_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no static library at {} or no C compiler", lib.display());
        return;
    }
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use uipdg_ffi::*;

fn last_error() -> String {
    let len = unsafe { uipdg_last_error(ptr::null_mut(), 0) };
    let mut buf = vec![0 as c_char; len + 1];
    unsafe { uipdg_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn solve(params: &UipdgSolveParams) -> Result<*mut UipdgSolution, UipdgStatus> {
    let mut sol = ptr::null_mut();
    match unsafe { uipdg_solve(params, &mut sol) } {
        UipdgStatus::Ok => Ok(sol),
        status => {
            assert!(sol.is_null());
            Err(status)
        }
    }
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(uipdg_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn solve_evaluate_and_free() {
    let mut params = uipdg_default_params();
    params.degree = 2;
    let sol = solve(&params).unwrap();

    let ndof = unsafe { uipdg_solution_num_dofs(sol) };
    assert_eq!(ndof, 2 * 8 * 8 * 6);

    let mut errors = UipdgErrors::default();
    assert_eq!(unsafe { uipdg_solution_errors(sol, &mut errors) }, UipdgStatus::Ok);
    assert_eq!(errors.dofs, ndof);
    assert!(errors.err_l2 > 0.0 && errors.err_l2 < 1e-2, "{errors:?}");
    assert!(errors.solver_residual <= 1e-10);

    // exact solution sin(pi x) sin(pi y) peaks at the center
    let mut v = 0.0;
    assert_eq!(unsafe { uipdg_solution_eval(sol, 0.5, 0.5, &mut v) }, UipdgStatus::Ok);
    assert!((v - 1.0).abs() < 1e-2, "{v}");
    assert_eq!(unsafe { uipdg_solution_eval(sol, 2.0, 0.5, &mut v) }, UipdgStatus::OutOfDomain);
    assert!(last_error().contains("outside"));

    let mut small = vec![0.0; 4];
    assert_eq!(
        unsafe { uipdg_solution_coefficients(sol, small.as_mut_ptr(), small.len()) },
        UipdgStatus::BufferTooSmall
    );
    let mut coeffs = vec![0.0; ndof];
    assert_eq!(unsafe { uipdg_solution_coefficients(sol, coeffs.as_mut_ptr(), ndof) }, UipdgStatus::Ok);
    assert!(coeffs.iter().any(|c| *c != 0.0));

    unsafe { uipdg_solution_free(sol) };
}

#[test]
fn kellogg_rate_through_the_c_interface() {
    let mut params = uipdg_default_params();
    params.test = UipdgTest::Kellogg;
    let mut prev: Option<UipdgErrors> = None;
    let mut rate = f64::NAN;
    for n in [16, 32] {
        params.n = n;
        let sol = solve(&params).unwrap();
        let mut e = UipdgErrors::default();
        unsafe { uipdg_solution_errors(sol, &mut e) };
        if let Some(p) = prev {
            rate = uipdg_ecr(p.err_energy, e.err_energy, p.h, e.h);
        }
        prev = Some(e);
        unsafe { uipdg_solution_free(sol) };
    }
    assert!((rate - 0.54).abs() < 0.1, "{rate}");
}

#[test]
fn bad_parameters_report_config_errors() {
    let mut params = uipdg_default_params();
    params.epsilon = 3;
    assert_eq!(solve(&params).unwrap_err(), UipdgStatus::Config);
    assert!(!last_error().is_empty());

    let mut params = uipdg_default_params();
    params.alpha0 = 2.0;
    assert_eq!(solve(&params).unwrap_err(), UipdgStatus::Config);

    let mut params = uipdg_default_params();
    params.n = 7;
    assert_eq!(solve(&params).unwrap_err(), UipdgStatus::Config);
    assert!(last_error().contains("even"));
}

#[test]
fn null_pointers_are_rejected() {
    let mut sol = ptr::null_mut();
    assert_eq!(unsafe { uipdg_solve(ptr::null(), &mut sol) }, UipdgStatus::InvalidArgument);
    assert_eq!(unsafe { uipdg_solution_errors(ptr::null(), ptr::null_mut()) }, UipdgStatus::InvalidArgument);
    assert_eq!(unsafe { uipdg_solution_num_dofs(ptr::null()) }, 0);
    unsafe { uipdg_solution_free(ptr::null_mut()) };
}

#[test]
fn last_error_truncates_to_the_buffer() {
    let mut params = uipdg_default_params();
    params.epsilon = 3;
    let _ = solve(&params);
    let full = last_error();
    let mut buf = [0 as c_char; 6];
    let len = unsafe { uipdg_last_error(buf.as_mut_ptr(), buf.len()) };
    assert_eq!(len, full.len());
    let short = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
    assert_eq!(short, &full[..5]);
}

#[test]
fn run_command_returns_cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("e.json");
    std::fs::write(&cfg_path, r#"{"test": {"name": "test1", "lambda": 10.0}, "mesh": {"n0": 4, "refinements": 0}}"#).unwrap();
    let cmd = CString::new("equivalence").unwrap();
    let cfg = CString::new(cfg_path.to_str().unwrap()).unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { uipdg_run_command(cmd.as_ptr(), cfg.as_ptr(), out.as_ptr()) }, 0);
    assert!(dir.path().join("equivalence.csv").exists());

    let missing = CString::new(dir.path().join("nope.json").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { uipdg_run_command(cmd.as_ptr(), missing.as_ptr(), ptr::null()) }, 2);
    assert_eq!(unsafe { uipdg_run_command(ptr::null(), cfg.as_ptr(), ptr::null()) }, 1);
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/uipdg.h")).unwrap();
    for name in [
        "uipdg_solve",
        "uipdg_solution_free",
        "uipdg_solution_eval",
        "uipdg_last_error",
        "typedef struct UipdgSolution UipdgSolution",
        "UIPDG_STATUS_SOLVER = 3",
    ] {
        assert!(header.contains(name), "{name} missing from the header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = std::process::Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler on PATH; skipping");
        return;
    };
    assert!(cc.status.success());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"uipdg.h\"\n\
         int main(void) {\n\
           UipdgSolveParams p = uipdg_default_params();\n\
           UipdgSolution *s = 0;\n\
           if (uipdg_solve(&p, &s) != UIPDG_STATUS_OK) return 1;\n\
           uipdg_solution_free(s);\n\
           return 0;\n\
         }\n",
    )
    .unwrap();
    let out = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

use std::ffi::CStr;
use std::ptr;

use sheetgame_ffi::*;

fn grid(n: u32) -> SgGrid {
    SgGrid { t_max: 1.0, x_max: 1.0, nt: n, nx: n }
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(sg_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(sg_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn sheet_roundtrip() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { sg_sheet_sample(grid(4), 7, 3, &mut h) }, SgStatus::Ok);
    assert_eq!(unsafe { sg_sheet_n_paths(h) }, 3);
    let mut v = f64::NAN;
    assert_eq!(unsafe { sg_sheet_value(h, 0, 0, 2, &mut v) }, SgStatus::Ok);
    assert_eq!(v, 0.0);
    assert_eq!(unsafe { sg_sheet_value(h, 1, 4, 4, &mut v) }, SgStatus::Ok);
    assert!(v.is_finite());

    let mut w = 0.0;
    let mut h2 = ptr::null_mut();
    unsafe { sg_sheet_sample(grid(4), 7, 3, &mut h2) };
    unsafe { sg_sheet_value(h2, 1, 4, 4, &mut w) };
    assert_eq!(v, w);

    assert_eq!(unsafe { sg_sheet_value(h, 3, 0, 0, &mut v) }, SgStatus::InvalidArgument);
    assert!(!last_error().is_empty());
    unsafe {
        sg_sheet_free(h);
        sg_sheet_free(h2);
        sg_sheet_free(ptr::null_mut());
    }
}

#[test]
fn null_and_bad_arguments() {
    assert_eq!(unsafe { sg_sheet_sample(grid(4), 0, 1, ptr::null_mut()) }, SgStatus::NullPointer);
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { sg_sheet_sample(grid(0), 0, 1, &mut h) }, SgStatus::InvalidArgument);
    assert!(h.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { sg_equilibrium_nash_pass(ptr::null()) }, -1);
    assert_eq!(unsafe { sg_equilibrium_n_nodes(ptr::null()) }, 0);
}

#[test]
fn scalar_helpers() {
    assert_eq!(sg_indicator_wedge(0.1, 0.9, 0.5, 0.2), 1);
    assert_eq!(sg_indicator_wedge(0.6, 0.9, 0.5, 0.2), 0);
    let r0 = sg_bessel_r0();
    assert!((r0 - 1.4457964907366962).abs() < 1e-12);
    let mut w = SgWellposedness::default();
    assert_eq!(unsafe { sg_wellposedness(0.5, 0.5, 1.0, &mut w) }, SgStatus::Ok);
    assert!(w.well_posed);
    assert!((w.r0 - r0).abs() < 1e-12);
}

#[test]
fn example1_deterministic_solution() {
    let p = SgExample1Params { a1: 1.0, a2: 1.0, c1: 1.0, c2: 1.0, sigma: 0.0, y0: 1.0 };
    let (mut a, mut b, mut r) = (0.0, 0.0, 0.0);
    assert_eq!(unsafe { sg_example1_reduction(p, &mut a, &mut b, &mut r) }, SgStatus::Ok);
    assert!(r > 0.0);

    let mut eq = ptr::null_mut();
    let st = unsafe { sg_example1_solve(p, SgExample1Strategy::BestResponse, grid(4), 1, 1, true, &mut eq) };
    assert_eq!(st, SgStatus::Ok, "{}", last_error());
    let n = unsafe { sg_equilibrium_n_nodes(eq) };
    assert_eq!(n, 25);
    let mut u1 = vec![0.0; n];
    let mut u2 = vec![0.0; n];
    unsafe {
        assert_eq!(sg_equilibrium_mean_field(eq, SgMeanField::U1, u1.as_mut_ptr(), n), SgStatus::Ok);
        assert_eq!(sg_equilibrium_mean_field(eq, SgMeanField::U2, u2.as_mut_ptr(), n), SgStatus::Ok);
        assert_eq!(sg_equilibrium_mean_field(eq, SgMeanField::State, u2.as_mut_ptr(), n - 1), SgStatus::InvalidArgument);
    }
    assert!(u1.iter().all(|v| v.is_finite()));
    assert!(u1.iter().zip(&u2).all(|(a, b)| (a - b).abs() < 1e-12));

    let mut c = SgCosts::default();
    assert_eq!(unsafe { sg_equilibrium_costs(eq, &mut c) }, SgStatus::Ok);
    assert!((c.j1 - c.j2).abs() < 1e-12);
    assert_eq!(unsafe { sg_equilibrium_nash_pass(eq) }, 1);
    assert!(unsafe { sg_equilibrium_iterations(eq) } >= 1);
    unsafe { sg_equilibrium_free(eq) };
}

#[test]
fn example2_quadrant_without_nash() {
    let zero = SgBilinear { c0: 0.0, ct: 0.0, cx: 0.0, ctx: 0.0 };
    let p = SgExample2Params {
        alpha1: 1.0,
        alpha2: 1.0,
        beta1: 1.0,
        beta2: 1.0,
        sigma: zero,
        source: SgBilinear { c0: 1.0, ..zero },
        y0: 0.0,
    };
    let v = SgExample2Variant { kind: SgExample2Kind::Quadrant, star_sign: 0.0, p_sign: 0.0 };
    let mut eq = ptr::null_mut();
    assert_eq!(unsafe { sg_example2_solve(p, v, grid(4), 0, 1, false, &mut eq) }, SgStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { sg_equilibrium_nash_pass(eq) }, -1);
    let n = unsafe { sg_equilibrium_n_nodes(eq) };
    let mut y = vec![0.0; n];
    unsafe { sg_equilibrium_mean_field(eq, SgMeanField::State, y.as_mut_ptr(), n) };
    assert!(y[n - 1] > 0.0);
    unsafe { sg_equilibrium_free(eq) };

    let bad = SgExample2Params { beta1: 0.0, ..p };
    let mut eq = ptr::null_mut();
    assert_eq!(unsafe { sg_example2_solve(bad, v, grid(4), 0, 1, false, &mut eq) }, SgStatus::InvalidArgument);
    assert!(eq.is_null());
}

#[test]
fn header_compiles_as_c() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/sheetgame.h");
    assert!(header.exists());
    let Some(cc) = ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok())
    else {
        eprintln!("no C compiler; skipping");
        return;
    };
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("t.c");
    std::fs::write(
        &src,
        "#include \"sheetgame.h\"\nint main(void) { SgGrid g = {1.0, 1.0, 4, 4}; SgSheetEnsemble *e = 0;\n\
         (void)g; (void)e; return SG_STATUS_OK; }\n",
    )
    .unwrap();
    let out = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

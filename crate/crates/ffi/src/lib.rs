//! C interface to `sheetgame`.
//!
//! Every fallible call returns an [`SgStatus`]; on failure the message is
//! available from [`sg_last_error`] on the same thread. Handles are opaque and
//! must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sheetgame::calculus::indicator_wedge;
use sheetgame::game::Player;
use sheetgame::identities::{bessel_r0, bspde_wellposedness};
use sheetgame::pollution::{
    example1_reduction, solve_example1, solve_example2, Bilinear, EquilibriumSolution, Example1Params, Example1Strategy,
    Example2Params, Example2Variant, SolveOptions,
};
use sheetgame::{Error, GridPoint, GridSpec, Point, SheetEnsemble};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Contract = 3,
    Numerical = 4,
    Convergence = 5,
    Unsupported = 6,
    Io = 7,
    Panic = 8,
}

/// Opaque sheet ensemble.
pub struct SgSheetEnsemble(SheetEnsemble);

/// Opaque equilibrium solution.
pub struct SgEquilibrium(EquilibriumSolution);

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SgGrid {
    pub t_max: f64,
    pub x_max: f64,
    pub nt: u32,
    pub nx: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SgBilinear {
    pub c0: f64,
    pub ct: f64,
    pub cx: f64,
    pub ctx: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SgExample1Params {
    pub a1: f64,
    pub a2: f64,
    pub c1: f64,
    pub c2: f64,
    pub sigma: f64,
    pub y0: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgExample1Strategy {
    Reduced = 0,
    BestResponse = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SgExample2Params {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub sigma: SgBilinear,
    pub source: SgBilinear,
    pub y0: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgExample2Kind {
    Displayed = 0,
    Quadrant = 1,
}

/// `star_sign` and `p_sign` are read only for [`SgExample2Kind::Displayed`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SgExample2Variant {
    pub kind: SgExample2Kind,
    pub star_sign: f64,
    pub p_sign: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgMeanField {
    U1 = 0,
    U2 = 1,
    State = 2,
    P1 = 3,
    P2 = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SgWellposedness {
    pub well_posed: bool,
    pub r0: f64,
    pub margin_k1: f64,
    pub margin_k2: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SgCosts {
    pub j1: f64,
    pub j1_stderr: f64,
    pub j2: f64,
    pub j2_stderr: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SgStatus {
    match e {
        Error::Config(_) | Error::Usage(_) => SgStatus::InvalidArgument,
        Error::Contract(_) => SgStatus::Contract,
        Error::Numerical { .. } => SgStatus::Numerical,
        Error::Convergence { .. } => SgStatus::Convergence,
        Error::Unsupported(_) => SgStatus::Unsupported,
        Error::Io(_) => SgStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Error>) -> SgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SgStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            SgStatus::Panic
        }
    }
}

fn grid_of(g: SgGrid) -> Result<GridSpec, Error> {
    GridSpec::new(g.t_max, g.x_max, g.nt as usize, g.nx as usize)
}

fn bilinear(b: SgBilinear) -> Bilinear {
    Bilinear { c0: b.c0, ct: b.ct, cx: b.cx, ctx: b.ctx }
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Sample `n_paths` sheet paths on `grid`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sg_sheet_sample(grid: SgGrid, seed: u64, n_paths: usize, out: *mut *mut SgSheetEnsemble) -> SgStatus {
    if out.is_null() {
        set_error("null pointer argument");
        return SgStatus::NullPointer;
    }
    guard(|| {
        let e = SheetEnsemble::sample(grid_of(grid)?, seed, n_paths)?;
        *out = Box::into_raw(Box::new(SgSheetEnsemble(e)));
        Ok(())
    })
}

/// `B(t_i, x_j)` on path `path`.
///
/// # Safety
/// `ens` must come from [`sg_sheet_sample`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_sheet_value(
    ens: *const SgSheetEnsemble,
    path: usize,
    i: u32,
    j: u32,
    out: *mut f64,
) -> SgStatus {
    if ens.is_null() || out.is_null() {
        set_error("null pointer argument");
        return SgStatus::NullPointer;
    }
    guard(|| {
        *out = (*ens).0.sheet_value(path, GridPoint::new(i as usize, j as usize))?;
        Ok(())
    })
}

/// Number of paths held by `ens` (0 for a null handle).
///
/// # Safety
/// `ens` must be null or come from [`sg_sheet_sample`].
#[no_mangle]
pub unsafe extern "C" fn sg_sheet_n_paths(ens: *const SgSheetEnsemble) -> usize {
    if ens.is_null() {
        0
    } else {
        (*ens).0.n_paths()
    }
}

/// # Safety
/// `ens` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sg_sheet_free(ens: *mut SgSheetEnsemble) {
    if !ens.is_null() {
        drop(Box::from_raw(ens));
    }
}

/// 1 when `t1 <= t2` and `x1 >= x2`, else 0.
#[no_mangle]
pub extern "C" fn sg_indicator_wedge(t1: f64, x1: f64, t2: f64, x2: f64) -> i32 {
    indicator_wedge(Point::new(t1, x1), Point::new(t2, x2)) as i32
}

/// Smallest positive root of `J₀(2√t)`.
#[no_mangle]
pub extern "C" fn sg_bessel_r0() -> f64 {
    bessel_r0()
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_wellposedness(k1: f64, k2: f64, area: f64, out: *mut SgWellposedness) -> SgStatus {
    if out.is_null() {
        set_error("null pointer argument");
        return SgStatus::NullPointer;
    }
    guard(|| {
        let w = bspde_wellposedness(k1, k2, area)?;
        *out = SgWellposedness { well_posed: w.well_posed, r0: w.r0, margin_k1: w.margin_k1, margin_k2: w.margin_k2 };
        Ok(())
    })
}

fn ex1(p: SgExample1Params) -> Example1Params {
    Example1Params { a: [p.a1, p.a2], c: [p.c1, p.c2], sigma: p.sigma, y0: p.y0 }
}

/// Reduced coefficients `(alpha, beta, ratio)` of Example 1.
///
/// # Safety
/// The three output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_example1_reduction(
    params: SgExample1Params,
    alpha: *mut f64,
    beta: *mut f64,
    ratio: *mut f64,
) -> SgStatus {
    if alpha.is_null() || beta.is_null() || ratio.is_null() {
        set_error("null pointer argument");
        return SgStatus::NullPointer;
    }
    guard(|| {
        let (a, b, r) = example1_reduction(&ex1(params))?;
        (*alpha, *beta, *ratio) = (a, b, r);
        Ok(())
    })
}

fn options(check_nash: bool) -> SolveOptions {
    let mut o = SolveOptions::default();
    if !check_nash {
        o.nash = None;
    }
    o
}

/// Solve Example 1.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_example1_solve(
    params: SgExample1Params,
    strategy: SgExample1Strategy,
    grid: SgGrid,
    seed: u64,
    n_paths: usize,
    check_nash: bool,
    out: *mut *mut SgEquilibrium,
) -> SgStatus {
    if out.is_null() {
        set_error("null pointer argument");
        return SgStatus::NullPointer;
    }
    guard(|| {
        let s = match strategy {
            SgExample1Strategy::Reduced => Example1Strategy::Reduced,
            SgExample1Strategy::BestResponse => Example1Strategy::BestResponse,
        };
        let sol = solve_example1(&ex1(params), s, grid_of(grid)?, seed, n_paths, &options(check_nash))?;
        *out = Box::into_raw(Box::new(SgEquilibrium(sol)));
        Ok(())
    })
}

/// Solve Example 2.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_example2_solve(
    params: SgExample2Params,
    variant: SgExample2Variant,
    grid: SgGrid,
    seed: u64,
    n_paths: usize,
    check_nash: bool,
    out: *mut *mut SgEquilibrium,
) -> SgStatus {
    if out.is_null() {
        set_error("null pointer argument");
        return SgStatus::NullPointer;
    }
    guard(|| {
        let p = Example2Params {
            alpha: [params.alpha1, params.alpha2],
            beta: [params.beta1, params.beta2],
            sigma: bilinear(params.sigma),
            source: bilinear(params.source),
            y0: params.y0,
        };
        let v = match variant.kind {
            SgExample2Kind::Displayed => Example2Variant::Displayed { star_sign: variant.star_sign, p_sign: variant.p_sign },
            SgExample2Kind::Quadrant => Example2Variant::Quadrant,
        };
        let sol = solve_example2(&p, v, grid_of(grid)?, seed, n_paths, &options(check_nash))?;
        *out = Box::into_raw(Box::new(SgEquilibrium(sol)));
        Ok(())
    })
}

/// Number of grid nodes, the length expected by [`sg_equilibrium_mean_field`].
///
/// # Safety
/// `eq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_equilibrium_n_nodes(eq: *const SgEquilibrium) -> usize {
    if eq.is_null() {
        0
    } else {
        (*eq).0.grid.n_nodes()
    }
}

/// Copy the node-wise mean of `which` into `out[0..len]`, node index
/// `i * (nx + 1) + j`.
///
/// # Safety
/// `eq` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_equilibrium_mean_field(
    eq: *const SgEquilibrium,
    which: SgMeanField,
    out: *mut f64,
    len: usize,
) -> SgStatus {
    if eq.is_null() || out.is_null() {
        set_error("null pointer argument");
        return SgStatus::NullPointer;
    }
    guard(|| {
        let s = &(*eq).0;
        let n = s.grid.n_nodes();
        if len != n {
            return Err(Error::Usage(format!("buffer holds {len} values, grid has {n} nodes")));
        }
        let src = match which {
            SgMeanField::U1 => s.mean_u(Player::One).into_values(),
            SgMeanField::U2 => s.mean_u(Player::Two).into_values(),
            SgMeanField::State => s.state.constant().to_vec(),
            SgMeanField::P1 => s.p[0].constant().to_vec(),
            SgMeanField::P2 => s.p[1].constant().to_vec(),
        };
        ptr::copy_nonoverlapping(src.as_ptr(), out, n);
        Ok(())
    })
}

/// # Safety
/// `eq` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_equilibrium_costs(eq: *const SgEquilibrium, out: *mut SgCosts) -> SgStatus {
    if eq.is_null() || out.is_null() {
        set_error("null pointer argument");
        return SgStatus::NullPointer;
    }
    let c = &(*eq).0.costs;
    *out = SgCosts { j1: c[0].mean, j1_stderr: c[0].stderr, j2: c[1].mean, j2_stderr: c[1].stderr };
    set_error("");
    SgStatus::Ok
}

/// 1 if the deviation check passed, 0 if it failed, -1 if it was not run
/// (or `eq` is null).
///
/// # Safety
/// `eq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_equilibrium_nash_pass(eq: *const SgEquilibrium) -> i32 {
    if eq.is_null() {
        return -1;
    }
    match &(*eq).0.nash {
        Some(r) => r.pass as i32,
        None => -1,
    }
}

/// Picard iterations used by the solver.
///
/// # Safety
/// `eq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sg_equilibrium_iterations(eq: *const SgEquilibrium) -> usize {
    if eq.is_null() {
        0
    } else {
        (*eq).0.trace.iterations
    }
}

/// # Safety
/// `eq` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sg_equilibrium_free(eq: *mut SgEquilibrium) {
    if !eq.is_null() {
        drop(Box::from_raw(eq));
    }
}

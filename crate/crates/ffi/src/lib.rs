//! C interface to `gbdp`.
//!
//! Objects are opaque heap handles released with the matching `_free`.
//! Every fallible call returns a [`GbdpStatus`]; on failure the message is
//! available from [`gbdp_last_error`] on the same thread. Matrices are
//! written row-major into caller buffers of `n * n` doubles, states in
//! lexicographic grid order.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gbdp::algebra::verify_orthocomplement;
use gbdp::commute::max_commutator;
use gbdp::param::build_model;
use gbdp::spectral::{k_step_with_self, matrix_power};
use gbdp::stochastic::normalization;
use gbdp::{io, GbdpError, GridShape, Parametrization, TransitionModel};
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GbdpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Shape = 3,
    Domain = 4,
    Unsupported = 5,
    Positivity = 6,
    Consistency = 7,
    Structure = 8,
    Convergence = 9,
    Parse = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

/// Vertex/edge parametrization of a commuting model.
pub struct GbdpParams(Parametrization);

/// Transition model with explicit probabilities.
pub struct GbdpModel(TransitionModel);

/// Orders and exact ranks of the constraint matrix Q and parameter matrix R.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GbdpRanks {
    pub q_rows: usize,
    pub q_cols: usize,
    pub r_rows: usize,
    pub r_cols: usize,
    pub rank_q: usize,
    pub rank_r: usize,
    pub rank_formula_q: i64,
    pub rank_formula_r: i64,
    /// 1 when Q Rᵀ = 0.
    pub orthogonal: u8,
    /// 1 when rank Q + rank R equals the column count.
    pub complementary: u8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(GbdpStatus, String);

impl From<GbdpError> for Failure {
    fn from(e: GbdpError) -> Self {
        let status = match &e {
            GbdpError::Shape(_) => GbdpStatus::Shape,
            GbdpError::Domain(_) => GbdpStatus::Domain,
            GbdpError::Unsupported(_) => GbdpStatus::Unsupported,
            GbdpError::Positivity(_) => GbdpStatus::Positivity,
            GbdpError::Consistency(_) => GbdpStatus::Consistency,
            GbdpError::Structure(_) => GbdpStatus::Structure,
            GbdpError::Convergence { .. } => GbdpStatus::Convergence,
            GbdpError::Parse(_) => GbdpStatus::Parse,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(GbdpStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GbdpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GbdpStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            GbdpStatus::Panic
        }
    }
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| Failure(GbdpStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn shape_from(dims: *const usize, q: usize, l: usize) -> Result<GridShape, Failure> {
    if dims.is_null() {
        return Err(null("dims"));
    }
    let d = std::slice::from_raw_parts(dims, q).to_vec();
    Ok(GridShape::balanced(d, l)?)
}

unsafe fn write_matrix(m: &DMatrix<f64>, out: *mut f64, len: usize) -> Result<(), Failure> {
    let need = m.nrows() * m.ncols();
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if len < need {
        return Err(Failure(
            GbdpStatus::BufferTooSmall,
            format!("buffer holds {len} doubles, need {need}"),
        ));
    }
    let buf = std::slice::from_raw_parts_mut(out, need);
    for (r, row) in m.row_iter().enumerate() {
        for (c, x) in row.iter().enumerate() {
            buf[r * m.ncols() + c] = *x;
        }
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null if none.
///
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn gbdp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parse a parameter document (TOML).
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gbdp_params_parse(toml: *const c_char, out: *mut *mut GbdpParams) -> GbdpStatus {
    guard(|| {
        let p = io::parse_params(text(toml, "toml")?)?;
        put(out, GbdpParams(p))
    })
}

/// Every Γ equal to `gamma`, every α equal to 1, on a grid with `q`
/// dimensions `dims[0..q]` and jump bound `l` in both directions.
///
/// # Safety
/// `dims` must point to `q` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gbdp_params_uniform(
    dims: *const usize,
    q: usize,
    l: usize,
    gamma: f64,
    out: *mut *mut GbdpParams,
) -> GbdpStatus {
    guard(|| {
        let p = Parametrization::uniform(shape_from(dims, q, l)?, gamma)?;
        put(out, GbdpParams(p))
    })
}

/// # Safety
/// `p` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn gbdp_params_free(p: *mut GbdpParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of grid states, 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gbdp_params_num_states(p: *const GbdpParams) -> usize {
    p.as_ref().map_or(0, |p| p.0.shape().num_states())
}

/// Perron-scale `p` so the full matrix plus `self_prob·I` is stochastic.
///
/// # Safety
/// `p` must be a live handle; `out` must be writable; `rho` may be null.
#[no_mangle]
pub unsafe extern "C" fn gbdp_params_normalize(
    p: *const GbdpParams,
    self_prob: f64,
    out: *mut *mut GbdpParams,
    rho: *mut f64,
) -> GbdpStatus {
    guard(|| {
        let n = normalization(&borrow(p, "params")?.0, self_prob)?;
        if !rho.is_null() {
            *rho = n.rho;
        }
        put(out, GbdpParams(n.params))
    })
}

/// Spectral `k`-step matrix of the model built from `p` with scalar
/// self-transition probability `self_prob`.
///
/// # Safety
/// `p` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gbdp_params_kstep(
    p: *const GbdpParams,
    self_prob: f64,
    k: u32,
    out: *mut f64,
    len: usize,
) -> GbdpStatus {
    guard(|| {
        let m = k_step_with_self(&borrow(p, "params")?.0, self_prob, k)?;
        write_matrix(&m, out, len)
    })
}

/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gbdp_params_to_model(p: *const GbdpParams, out: *mut *mut GbdpModel) -> GbdpStatus {
    guard(|| {
        let m = build_model(&borrow(p, "params")?.0);
        put(out, GbdpModel(m))
    })
}

/// Parse a model document (TOML).
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gbdp_model_parse(toml: *const c_char, out: *mut *mut GbdpModel) -> GbdpStatus {
    guard(|| {
        let m = io::parse_model(text(toml, "toml")?)?;
        put(out, GbdpModel(m))
    })
}

/// # Safety
/// `m` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn gbdp_model_free(m: *mut GbdpModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of grid states, 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gbdp_model_num_states(m: *const GbdpModel) -> usize {
    m.as_ref().map_or(0, |m| m.0.grid().len())
}

/// One-step matrix including self-transitions.
///
/// # Safety
/// `m` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gbdp_model_full_matrix(m: *const GbdpModel, out: *mut f64, len: usize) -> GbdpStatus {
    guard(|| write_matrix(&borrow(m, "model")?.0.full_matrix(), out, len))
}

/// `k`-th power of the one-step matrix by repeated squaring.
///
/// # Safety
/// `m` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gbdp_model_matrix_power(
    m: *const GbdpModel,
    k: u32,
    out: *mut f64,
    len: usize,
) -> GbdpStatus {
    guard(|| write_matrix(&matrix_power(&borrow(m, "model")?.0.full_matrix(), k), out, len))
}

/// Largest absolute entry over all pairwise commutators of the directional matrices.
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gbdp_model_max_commutator(m: *const GbdpModel, out: *mut f64) -> GbdpStatus {
    guard(|| {
        let m = borrow(m, "model")?;
        if out.is_null() {
            return Err(null("output"));
        }
        *out = max_commutator(&m.0);
        Ok(())
    })
}

/// Exact orders and ranks of Q and R for `dims[0..q]` and jump bound `l`.
///
/// # Safety
/// `dims` must point to `q` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gbdp_ranks(dims: *const usize, q: usize, l: usize, out: *mut GbdpRanks) -> GbdpStatus {
    guard(|| {
        let rep = verify_orthocomplement(&shape_from(dims, q, l)?)?;
        if out.is_null() {
            return Err(null("output"));
        }
        *out = GbdpRanks {
            q_rows: rep.q_order.0,
            q_cols: rep.q_order.1,
            r_rows: rep.r_order.0,
            r_cols: rep.r_order.1,
            rank_q: rep.rank_q,
            rank_r: rep.rank_r,
            rank_formula_q: rep.rank_formula_q,
            rank_formula_r: rep.rank_formula_r,
            orthogonal: rep.orthogonal as u8,
            complementary: rep.complementary() as u8,
        };
        Ok(())
    })
}

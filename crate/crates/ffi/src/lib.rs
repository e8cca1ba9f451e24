//! C interface to the worst-case oracle and the online learner.
//!
//! Every fallible function returns a [`WdroStatus`]. On failure a message is
//! kept per thread and can be read with [`wdro_last_error_message`]. Objects
//! cross the boundary as opaque handles that must be released with the
//! matching `_free` function. Panics are caught and reported as
//! `WDRO_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use wdro::bench::ExperimentConfig;
use wdro::budget::wasserstein_oracle;
use wdro::distribution::DiscreteDistribution;
use wdro::error::Error;
use wdro::learner::{step, LearnerState, Problem};
use wdro::model::SampleBuffer;
use wdro::reference::discrete_w1;

/// Result codes. Values 2 to 4 match the exit codes of the command-line tool.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WdroStatus {
    Ok = 0,
    NullArgument = 1,
    Input = 2,
    Scale = 3,
    Numeric = 4,
    Internal = 5,
    Panic = 6,
}

/// A parsed experiment: loss, decision set, radius and tolerances.
pub struct WdroProblem {
    problem: Problem,
    x1: Option<Vec<f64>>,
}

/// Learner state bound to a copy of its problem.
pub struct WdroLearner {
    problem: Problem,
    state: LearnerState,
}

/// Finitely supported distribution returned by the oracle.
pub struct WdroDistribution {
    inner: DiscreteDistribution,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> WdroStatus {
    match e.exit_code() {
        2 => WdroStatus::Input,
        3 => WdroStatus::Scale,
        _ => match e {
            Error::Internal(_) => WdroStatus::Internal,
            _ => WdroStatus::Numeric,
        },
    }
}

fn guard(f: impl FnOnce() -> Result<(), (WdroStatus, String)>) -> WdroStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            WdroStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside wdro".into());
            WdroStatus::Panic
        }
    }
}

fn lib(e: Error) -> (WdroStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (WdroStatus, String) {
    (WdroStatus::NullArgument, format!("{what} is null"))
}

unsafe fn doubles<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], (WdroStatus, String)> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wdro_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn wdro_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses an experiment configuration (TOML text).
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wdro_problem_from_toml(toml: *const c_char, out: *mut *mut WdroProblem) -> WdroStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null("toml"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(toml).to_str().map_err(|e| (WdroStatus::Input, format!("config is not UTF-8: {e}")))?;
        let cfg = ExperimentConfig::from_toml_str(text).map_err(lib)?;
        let problem = cfg.problem().map_err(lib)?;
        *out = Box::into_raw(Box::new(WdroProblem { problem, x1: cfg.experiment.x1.clone() }));
        Ok(())
    })
}

/// # Safety
/// `p` must be NULL or a handle from [`wdro_problem_from_toml`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wdro_problem_free(p: *mut WdroProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Dimensions of the decision and of a sample.
///
/// # Safety
/// `p` must be a live problem handle; the output pointers may be NULL.
#[no_mangle]
pub unsafe extern "C" fn wdro_problem_dims(p: *const WdroProblem, decision_dim: *mut usize, sample_dim: *mut usize) -> WdroStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        if let Some(d) = decision_dim.as_mut() {
            *d = p.problem.space.dim();
        }
        if let Some(m) = sample_dim.as_mut() {
            *m = p.problem.loss.sample_dim();
        }
        Ok(())
    })
}

/// Worst-case expectation at decision `x` (length `n`) over the ball around
/// the `t` samples stored row-major in `samples`.
///
/// Writes the value to `value` and, if `dist` is not NULL, the maximizing
/// distribution.
///
/// # Safety
/// Array pointers must be valid for the given lengths; `value` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wdro_oracle(
    p: *const WdroProblem,
    x: *const f64,
    n: usize,
    samples: *const f64,
    t: usize,
    value: *mut f64,
    dist: *mut *mut WdroDistribution,
) -> WdroStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        let value = value.as_mut().ok_or_else(|| null("value"))?;
        let x = doubles(x, n, "x")?;
        let m = p.problem.loss.sample_dim();
        let rows = doubles(samples, t * m, "samples")?;
        let buf = SampleBuffer::from_rows(m, rows.chunks_exact(m)).map_err(lib)?;
        let at = p.problem.loss.at(x).map_err(lib)?;
        let res = wasserstein_oracle(&at, &buf, &p.problem.ambiguity, &p.problem.tolerance).map_err(lib)?;
        *value = res.value;
        if !dist.is_null() {
            *dist = Box::into_raw(Box::new(WdroDistribution { inner: res.distribution }));
        }
        Ok(())
    })
}

/// Number of atoms, or 0 for NULL.
///
/// # Safety
/// `d` must be NULL or a live distribution handle.
#[no_mangle]
pub unsafe extern "C" fn wdro_distribution_len(d: *const WdroDistribution) -> usize {
    d.as_ref().map_or(0, |d| d.inner.len())
}

/// Atom dimension, or 0 for NULL.
///
/// # Safety
/// `d` must be NULL or a live distribution handle.
#[no_mangle]
pub unsafe extern "C" fn wdro_distribution_dim(d: *const WdroDistribution) -> usize {
    d.as_ref().map_or(0, |d| d.inner.dim())
}

/// Copies atoms (row-major, `len·dim` values) and weights (`len` values).
/// Either output may be NULL.
///
/// # Safety
/// Non-NULL outputs must have room for the counts above.
#[no_mangle]
pub unsafe extern "C" fn wdro_distribution_copy(d: *const WdroDistribution, atoms: *mut f64, weights: *mut f64) -> WdroStatus {
    guard(|| {
        let d = &d.as_ref().ok_or_else(|| null("distribution"))?.inner;
        if !atoms.is_null() {
            ptr::copy_nonoverlapping(d.atoms_flat().as_ptr(), atoms, d.atoms_flat().len());
        }
        if !weights.is_null() {
            ptr::copy_nonoverlapping(d.weights().as_ptr(), weights, d.len());
        }
        Ok(())
    })
}

/// # Safety
/// `d` must be NULL or a distribution handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wdro_distribution_free(d: *mut WdroDistribution) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Starts a learner at the configured `x1` or the center of the decision set.
///
/// # Safety
/// `p` must be a live problem handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wdro_learner_new(p: *const WdroProblem, out: *mut *mut WdroLearner) -> WdroStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let state = LearnerState::new(&p.problem, p.x1.clone()).map_err(lib)?;
        *out = Box::into_raw(Box::new(WdroLearner { problem: p.problem.clone(), state }));
        Ok(())
    })
}

/// Plays one round against the sample `xi` (length `m`). `loss_value`, if not
/// NULL, receives the expected loss of the played decision under the round's
/// worst case.
///
/// # Safety
/// `l` must be a live learner handle and `xi` valid for `m` values.
#[no_mangle]
pub unsafe extern "C" fn wdro_learner_step(l: *mut WdroLearner, xi: *const f64, m: usize, loss_value: *mut f64) -> WdroStatus {
    guard(|| {
        let l = l.as_mut().ok_or_else(|| null("learner"))?;
        let xi = doubles(xi, m, "xi")?;
        let r = step(&mut l.state, xi, &l.problem).map_err(lib)?;
        if let Some(v) = loss_value.as_mut() {
            *v = r.loss_value;
        }
        Ok(())
    })
}

/// Copies the next decision into `out` (length `n`).
///
/// # Safety
/// `l` must be a live learner handle and `out` valid for `n` values.
#[no_mangle]
pub unsafe extern "C" fn wdro_learner_decision(l: *const WdroLearner, out: *mut f64, n: usize) -> WdroStatus {
    guard(|| {
        let l = l.as_ref().ok_or_else(|| null("learner"))?;
        copy_vec(l.state.decision(), out, n)
    })
}

/// Copies the average of the decisions played so far into `out`.
///
/// # Safety
/// `l` must be a live learner handle and `out` valid for `n` values.
#[no_mangle]
pub unsafe extern "C" fn wdro_learner_average(l: *const WdroLearner, out: *mut f64, n: usize) -> WdroStatus {
    guard(|| {
        let l = l.as_ref().ok_or_else(|| null("learner"))?;
        copy_vec(l.state.average(), out, n)
    })
}

/// Rounds played, or 0 for NULL.
///
/// # Safety
/// `l` must be NULL or a live learner handle.
#[no_mangle]
pub unsafe extern "C" fn wdro_learner_rounds(l: *const WdroLearner) -> usize {
    l.as_ref().map_or(0, |l| l.state.rounds())
}

/// # Safety
/// `l` must be NULL or a learner handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wdro_learner_free(l: *mut WdroLearner) {
    if !l.is_null() {
        drop(Box::from_raw(l));
    }
}

unsafe fn copy_vec(v: &[f64], out: *mut f64, n: usize) -> Result<(), (WdroStatus, String)> {
    if n != v.len() {
        return Err((WdroStatus::Input, format!("output has length {n}, expected {}", v.len())));
    }
    if out.is_null() {
        return Err(null("out"));
    }
    ptr::copy_nonoverlapping(v.as_ptr(), out, n);
    Ok(())
}

/// 1-Wasserstein distance between two weighted point sets of dimension `dim`.
/// NULL weights mean uniform.
///
/// # Safety
/// Atom arrays must hold `count·dim` values, weight arrays `count` values.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn wdro_w1(
    dim: usize,
    atoms_a: *const f64,
    weights_a: *const f64,
    count_a: usize,
    atoms_b: *const f64,
    weights_b: *const f64,
    count_b: usize,
    out: *mut f64,
) -> WdroStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let build = |atoms: *const f64, weights: *const f64, count: usize, name: &str| {
            let a = doubles(atoms, count * dim, name)?.to_vec();
            let w = if weights.is_null() {
                vec![1.0 / count.max(1) as f64; count]
            } else {
                doubles(weights, count, name)?.to_vec()
            };
            DiscreteDistribution::new(dim, a, w).map_err(lib)
        };
        let p = build(atoms_a, weights_a, count_a, "atoms_a")?;
        let q = build(atoms_b, weights_b, count_b, "atoms_b")?;
        *out = discrete_w1(&p, &q).map_err(lib)?;
        Ok(())
    })
}

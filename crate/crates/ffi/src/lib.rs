//! C ABI surface over the circuit optimizer: opaque handles, status codes,
//! JSON circuit I/O, and the step interface of the optimization environment.
//!
//! All functions are null-safe. Functions returning `QcoptStatus` set a
//! thread-local error message retrievable with `qcopt_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use qcopt::env::{ActionCell, Env};
use qcopt::rules::prune;
use qcopt::unitary::{equivalent_up_to_phase, unitary_of, DEFAULT_QUBIT_CAP};
use qcopt::{Circuit, Error, QualityWeights};

/// Opaque circuit handle.
pub struct QcoptCircuit(Circuit);

/// Opaque environment handle (one optimization episode).
pub struct QcoptEnv(Env);

/// Status codes returned by fallible functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QcoptStatus {
    Ok = 0,
    /// A pointer argument was null or a value argument was out of range.
    InvalidArgument = 1,
    /// Malformed input (JSON, connectivity, qubit indices).
    Format = 2,
    /// The operation is unsupported for this input (e.g. too many qubits
    /// for a dense unitary).
    Unsupported = 3,
    /// The requested action cell is masked out.
    MaskedAction = 4,
    /// The episode has already finished.
    Done = 5,
    /// Any other failure; see `qcopt_last_error_message`.
    Internal = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: QcoptStatus, msg: impl Into<String>) -> QcoptStatus {
    set_error(msg.into());
    status
}

fn status_of(err: &Error) -> QcoptStatus {
    match err {
        Error::Format(_)
        | Error::QubitOutOfRange { .. }
        | Error::ConnectivityViolation { .. } => QcoptStatus::Format,
        Error::QubitCapExceeded { .. }
        | Error::TooManyNodes { .. }
        | Error::CapacityExceeded { .. } => QcoptStatus::Unsupported,
        Error::MaskedAction { .. } | Error::AllMasked => QcoptStatus::MaskedAction,
        Error::InvalidValue { .. } => QcoptStatus::InvalidArgument,
        _ => QcoptStatus::Internal,
    }
}

fn fail_err(err: Error) -> QcoptStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

/// The message of the last error raised on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qcopt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parse a circuit from its canonical JSON document.
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcopt_circuit_from_json(
    json: *const c_char,
    out: *mut *mut QcoptCircuit,
) -> QcoptStatus {
    if json.is_null() || out.is_null() {
        return fail(QcoptStatus::InvalidArgument, "null pointer");
    }
    let text = match CStr::from_ptr(json).to_str() {
        Ok(t) => t,
        Err(_) => return fail(QcoptStatus::Format, "input is not valid UTF-8"),
    };
    match Circuit::from_json(text) {
        Ok(c) => {
            *out = Box::into_raw(Box::new(QcoptCircuit(c)));
            QcoptStatus::Ok
        }
        Err(e) => fail_err(e),
    }
}

/// Serialize a circuit to its canonical JSON document. The returned string
/// must be released with `qcopt_string_free`.
///
/// # Safety
/// `circuit` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcopt_circuit_to_json(
    circuit: *const QcoptCircuit,
    out: *mut *mut c_char,
) -> QcoptStatus {
    if circuit.is_null() || out.is_null() {
        return fail(QcoptStatus::InvalidArgument, "null pointer");
    }
    match CString::new((*circuit).0.to_json()) {
        Ok(c) => {
            *out = c.into_raw();
            QcoptStatus::Ok
        }
        Err(_) => fail(QcoptStatus::Internal, "serialized JSON contains NUL"),
    }
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn qcopt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Release a circuit handle.
///
/// # Safety
/// `circuit` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn qcopt_circuit_free(circuit: *mut QcoptCircuit) {
    if !circuit.is_null() {
        drop(Box::from_raw(circuit));
    }
}

/// Number of qubits, or 0 for a null handle.
///
/// # Safety
/// `circuit` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qcopt_circuit_num_qubits(circuit: *const QcoptCircuit) -> usize {
    circuit.as_ref().map_or(0, |c| c.0.num_qubits())
}

/// Circuit depth (number of moments), or 0 for a null handle.
///
/// # Safety
/// `circuit` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qcopt_circuit_depth(circuit: *const QcoptCircuit) -> usize {
    circuit.as_ref().map_or(0, |c| c.0.depth())
}

/// Gate count, or 0 for a null handle.
///
/// # Safety
/// `circuit` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qcopt_circuit_gate_count(circuit: *const QcoptCircuit) -> usize {
    circuit.as_ref().map_or(0, |c| c.0.gate_count())
}

/// Quality `alpha * depth + beta * gate_count`.
///
/// # Safety
/// `circuit` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcopt_circuit_quality(
    circuit: *const QcoptCircuit,
    alpha: f64,
    beta: f64,
    out: *mut f64,
) -> QcoptStatus {
    if circuit.is_null() || out.is_null() {
        return fail(QcoptStatus::InvalidArgument, "null pointer");
    }
    let w = match QualityWeights::new(alpha, beta) {
        Ok(w) => w,
        Err(e) => return fail_err(e),
    };
    *out = qcopt::quality(&(*circuit).0, &w);
    QcoptStatus::Ok
}

/// Exhaustively apply the hard rewrite rules; returns a new handle.
///
/// # Safety
/// `circuit` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcopt_circuit_prune(
    circuit: *const QcoptCircuit,
    out: *mut *mut QcoptCircuit,
) -> QcoptStatus {
    if circuit.is_null() || out.is_null() {
        return fail(QcoptStatus::InvalidArgument, "null pointer");
    }
    *out = Box::into_raw(Box::new(QcoptCircuit(prune(&(*circuit).0))));
    QcoptStatus::Ok
}

/// Check phase-equivalence of two circuits' unitaries within `tol`.
/// Writes 1 or 0 to `out`; fails with `Unsupported` above the dense cap.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcopt_circuit_equivalent(
    a: *const QcoptCircuit,
    b: *const QcoptCircuit,
    tol: f64,
    out: *mut i32,
) -> QcoptStatus {
    if a.is_null() || b.is_null() || out.is_null() {
        return fail(QcoptStatus::InvalidArgument, "null pointer");
    }
    let ua = match unitary_of(&(*a).0, DEFAULT_QUBIT_CAP) {
        Ok(u) => u,
        Err(e) => return fail_err(e),
    };
    let ub = match unitary_of(&(*b).0, DEFAULT_QUBIT_CAP) {
        Ok(u) => u,
        Err(e) => return fail_err(e),
    };
    *out = i32::from(ua.num_qubits() == ub.num_qubits() && equivalent_up_to_phase(&ua, &ub, tol));
    QcoptStatus::Ok
}

/// Start an optimization episode on a circuit. `capacity` of 0 selects the
/// default (twice the start depth).
///
/// # Safety
/// `circuit` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcopt_env_new(
    circuit: *const QcoptCircuit,
    episode_len: usize,
    capacity: usize,
    out: *mut *mut QcoptEnv,
) -> QcoptStatus {
    if circuit.is_null() || out.is_null() {
        return fail(QcoptStatus::InvalidArgument, "null pointer");
    }
    let start = (*circuit).0.clone();
    let capacity = if capacity == 0 {
        Env::default_capacity(&start)
    } else {
        capacity
    };
    match Env::reset(start, episode_len, capacity) {
        Ok((env, _)) => {
            *out = Box::into_raw(Box::new(QcoptEnv(env)));
            QcoptStatus::Ok
        }
        Err(e) => fail_err(e),
    }
}

/// Release an environment handle.
///
/// # Safety
/// `env` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn qcopt_env_free(env: *mut QcoptEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Moment capacity of the observation grid, or 0 for a null handle.
///
/// # Safety
/// `env` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qcopt_env_capacity(env: *const QcoptEnv) -> usize {
    env.as_ref().map_or(0, |e| e.0.capacity())
}

/// 1 when the episode has finished, 0 otherwise (or for a null handle).
///
/// # Safety
/// `env` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qcopt_env_is_done(env: *const QcoptEnv) -> i32 {
    env.as_ref().map_or(0, |e| i32::from(e.0.is_done()))
}

/// Byte length of the observation buffer:
/// qubits * capacity * 8 gate-class channels, one byte per cell.
///
/// # Safety
/// `env` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qcopt_env_observation_len(env: *const QcoptEnv) -> usize {
    env.as_ref()
        .map_or(0, |e| e.0.observation().to_bytes().len())
}

/// Copy the one-hot observation grid, row-major (qubit, moment, channel).
///
/// # Safety
/// `env` must be a live handle; `buf` must hold at least `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn qcopt_env_observation(
    env: *const QcoptEnv,
    buf: *mut u8,
    len: usize,
) -> QcoptStatus {
    if env.is_null() || buf.is_null() {
        return fail(QcoptStatus::InvalidArgument, "null pointer");
    }
    let bytes = (*env).0.observation().to_bytes();
    if len < bytes.len() {
        return fail(
            QcoptStatus::InvalidArgument,
            format!("buffer holds {len} bytes, need {}", bytes.len()),
        );
    }
    ptr::copy_nonoverlapping(bytes.as_ptr(), buf, bytes.len());
    QcoptStatus::Ok
}

/// Byte length of the packed action-mask buffer.
///
/// # Safety
/// `env` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qcopt_env_mask_len(env: *const QcoptEnv) -> usize {
    env.as_ref().map_or(0, |e| e.0.mask().to_bytes().len())
}

/// Copy the action mask, 1-bit packed, row-major (qubit, moment, rule),
/// least significant bit first.
///
/// # Safety
/// `env` must be a live handle; `buf` must hold at least `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn qcopt_env_mask(
    env: *const QcoptEnv,
    buf: *mut u8,
    len: usize,
) -> QcoptStatus {
    if env.is_null() || buf.is_null() {
        return fail(QcoptStatus::InvalidArgument, "null pointer");
    }
    let bytes = (*env).0.mask().to_bytes();
    if len < bytes.len() {
        return fail(
            QcoptStatus::InvalidArgument,
            format!("buffer holds {len} bytes, need {}", bytes.len()),
        );
    }
    ptr::copy_nonoverlapping(bytes.as_ptr(), buf, bytes.len());
    QcoptStatus::Ok
}

/// Apply the soft transformation at an action-grid cell. Writes the reward
/// and the done flag.
///
/// # Safety
/// `env` must be a live handle; `reward` and `done` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcopt_env_step(
    env: *mut QcoptEnv,
    qubit: usize,
    moment: usize,
    rule: usize,
    reward: *mut f64,
    done: *mut i32,
) -> QcoptStatus {
    if env.is_null() || reward.is_null() || done.is_null() {
        return fail(QcoptStatus::InvalidArgument, "null pointer");
    }
    if (*env).0.is_done() {
        return fail(QcoptStatus::Done, "episode already finished");
    }
    match (*env).0.step(ActionCell {
        qubit,
        moment,
        rule,
    }) {
        Ok(outcome) => {
            *reward = outcome.reward;
            *done = i32::from(outcome.done);
            QcoptStatus::Ok
        }
        Err(e) => fail_err(e),
    }
}

/// Clone the environment's current circuit into a fresh handle.
///
/// # Safety
/// `env` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcopt_env_state(
    env: *const QcoptEnv,
    out: *mut *mut QcoptCircuit,
) -> QcoptStatus {
    if env.is_null() || out.is_null() {
        return fail(QcoptStatus::InvalidArgument, "null pointer");
    }
    *out = Box::into_raw(Box::new(QcoptCircuit((*env).0.state().clone())));
    QcoptStatus::Ok
}

#[cfg(test)]
mod tests {
    use super::*;

    fn make_circuit(json: &str) -> *mut QcoptCircuit {
        let cjson = CString::new(json).unwrap();
        let mut handle = ptr::null_mut();
        let status = unsafe { qcopt_circuit_from_json(cjson.as_ptr(), &mut handle) };
        assert_eq!(status, QcoptStatus::Ok);
        handle
    }

    const TWO_CNOTS: &str = r#"{"num_qubits":2,"gates":[
        {"type":"cnot","control":0,"target":1},
        {"type":"cnot","control":0,"target":1}]}"#;

    #[test]
    fn json_round_trip_and_metrics() {
        let c = make_circuit(TWO_CNOTS);
        unsafe {
            assert_eq!(qcopt_circuit_num_qubits(c), 2);
            assert_eq!(qcopt_circuit_depth(c), 2);
            assert_eq!(qcopt_circuit_gate_count(c), 2);
            let mut q = 0.0;
            assert_eq!(qcopt_circuit_quality(c, 1.0, 0.2, &mut q), QcoptStatus::Ok);
            assert!((q - 2.4).abs() < 1e-12);

            let mut json = ptr::null_mut();
            assert_eq!(qcopt_circuit_to_json(c, &mut json), QcoptStatus::Ok);
            let c2 = make_circuit(CStr::from_ptr(json).to_str().unwrap());
            assert_eq!(qcopt_circuit_gate_count(c2, ), 2);
            qcopt_string_free(json);
            qcopt_circuit_free(c2);
            qcopt_circuit_free(c);
        }
    }

    #[test]
    fn prune_cancels_the_cnot_pair_and_stays_equivalent() {
        let c = make_circuit(TWO_CNOTS);
        unsafe {
            let mut pruned = ptr::null_mut();
            assert_eq!(qcopt_circuit_prune(c, &mut pruned), QcoptStatus::Ok);
            assert_eq!(qcopt_circuit_gate_count(pruned), 0);
            let mut eq = 0;
            assert_eq!(
                qcopt_circuit_equivalent(c, pruned, 1e-8, &mut eq),
                QcoptStatus::Ok
            );
            assert_eq!(eq, 1);
            qcopt_circuit_free(pruned);
            qcopt_circuit_free(c);
        }
    }

    #[test]
    fn malformed_json_reports_format_error() {
        let cjson = CString::new("{nope").unwrap();
        let mut handle = ptr::null_mut();
        let status = unsafe { qcopt_circuit_from_json(cjson.as_ptr(), &mut handle) };
        assert_eq!(status, QcoptStatus::Format);
        let msg = unsafe { CStr::from_ptr(qcopt_last_error_message()) };
        assert!(!msg.to_bytes().is_empty());
    }

    #[test]
    fn env_lifecycle_over_the_ffi() {
        // A circuit with commuting structure so at least one soft move exists.
        let c = make_circuit(
            r#"{"num_qubits":2,"gates":[
                {"type":"zrot","qubit":0,"theta":0.7},
                {"type":"cnot","control":0,"target":1}]}"#,
        );
        unsafe {
            let mut env = ptr::null_mut();
            assert_eq!(qcopt_env_new(c, 10, 0, &mut env), QcoptStatus::Ok);
            assert_eq!(qcopt_env_capacity(env), 4);
            assert_eq!(qcopt_env_is_done(env), 0);

            let olen = qcopt_env_observation_len(env);
            assert_eq!(olen, 2 * 4 * 8);
            let mut obs = vec![0u8; olen];
            assert_eq!(
                qcopt_env_observation(env, obs.as_mut_ptr(), olen),
                QcoptStatus::Ok
            );
            assert_eq!(obs.iter().map(|&b| b as usize).sum::<usize>(), 2);

            let mlen = qcopt_env_mask_len(env);
            let mut mask = vec![0u8; mlen];
            assert_eq!(qcopt_env_mask(env, mask.as_mut_ptr(), mlen), QcoptStatus::Ok);
            let set_bits: u32 = mask.iter().map(|b| b.count_ones()).sum();
            assert!(set_bits >= 1);

            // Find the first legal cell from the packed mask and step it.
            let bit = (0..mlen * 8)
                .find(|i| mask[i / 8] >> (i % 8) & 1 == 1)
                .unwrap();
            let rules = 5;
            let capacity = 4;
            let qubit = bit / (capacity * rules);
            let moment = (bit / rules) % capacity;
            let rule = bit % rules;
            let mut reward = f64::NAN;
            let mut done = -1;
            assert_eq!(
                qcopt_env_step(env, qubit, moment, rule, &mut reward, &mut done),
                QcoptStatus::Ok
            );
            assert!(reward.is_finite());

            let mut state = ptr::null_mut();
            assert_eq!(qcopt_env_state(env, &mut state), QcoptStatus::Ok);
            assert_eq!(qcopt_circuit_gate_count(state), 2);

            // A clearly-masked cell is rejected.
            let status = qcopt_env_step(env, 1, 3, 4, &mut reward, &mut done);
            if qcopt_env_is_done(env) == 1 {
                assert_eq!(status, QcoptStatus::Done);
            } else {
                assert_eq!(status, QcoptStatus::MaskedAction);
            }

            qcopt_circuit_free(state);
            qcopt_env_free(env);
            qcopt_circuit_free(c);
        }
    }

    #[test]
    fn null_arguments_are_rejected_not_crashed() {
        unsafe {
            assert_eq!(qcopt_circuit_num_qubits(ptr::null()), 0);
            let mut q = 0.0;
            assert_eq!(
                qcopt_circuit_quality(ptr::null(), 1.0, 0.2, &mut q),
                QcoptStatus::InvalidArgument
            );
            qcopt_circuit_free(ptr::null_mut());
            qcopt_env_free(ptr::null_mut());
            qcopt_string_free(ptr::null_mut());
        }
    }
}

//! C ABI for the rational-proof laboratory.
//!
//! The surface follows the usual handle discipline: constructors return
//! opaque pointers through an out-parameter and a status code, accessors
//! never allocate, and every handle has exactly one `_free` function.
//! Failure details are kept per thread; call [`rplab_last_error`] right
//! after a non-zero status to read them.
//!
//! Strings returned by accessors point into the handle they were read
//! from and stay valid until that handle is freed. The error string stays
//! valid until the next failing call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use rplab::circuit::{BooleanCircuit, CountingInstance, CountingMode};
use rplab::error::Error;
use rplab::exec::ExecCfg;
use rplab::protocol::ProtocolSpec;
use rplab::protocols::{make_brier_count, make_pp_vote};
use rplab::solver::{solve_rational, verify_protocol};

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RplabStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Text input (circuit, number, or transcript) failed to parse.
    ParseError = 3,
    /// The instance has no strict majority, so the game is undefined.
    Tie = 4,
    /// The exact computation would exceed the configured enumeration bound.
    BoundExceeded = 5,
    /// The protocol shape or its reward grid is invalid.
    MalformedProtocol = 6,
    /// An exact value fell outside the dyadic number system.
    Unrepresentable = 7,
    /// An unclassified failure; see the error message.
    InternalError = 8,
}

/// An immutable boolean circuit.
pub struct CircuitHandle {
    circuit: BooleanCircuit,
}

/// A reward-paying interactive protocol.
pub struct ProtocolHandle {
    spec: ProtocolSpec,
    name: CString,
}

/// The result of solving a protocol exactly.
pub struct OutcomeHandle {
    value: CString,
    gap: CString,
    best_message: CString,
    node_count: u64,
    optimum_count: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean: String = msg.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(clean).unwrap());
}

fn status_of(err: &Error) -> RplabStatus {
    match err {
        Error::CircuitParse { .. }
        | Error::DyadicParse(_)
        | Error::CorpusFormat { .. }
        | Error::MalformedTranscript(_) => RplabStatus::ParseError,
        Error::TieNotAllowed | Error::OuterTie => RplabStatus::Tie,
        Error::BoundExceeded { .. } => RplabStatus::BoundExceeded,
        Error::MalformedSpec(_)
        | Error::WidthOverflow { .. }
        | Error::RewardOutOfRange { .. }
        | Error::RewardOffGrid { .. }
        | Error::MissingDelta(_)
        | Error::InvalidSplit { .. } => RplabStatus::MalformedProtocol,
        Error::NonDyadicValue(_) => RplabStatus::Unrepresentable,
        _ => RplabStatus::InternalError,
    }
}

fn fail(err: &Error) -> RplabStatus {
    set_error(&err.to_string());
    status_of(err)
}

fn fail_null(what: &str) -> RplabStatus {
    set_error(&format!("{what} must not be null"));
    RplabStatus::NullArgument
}

/// Run a body behind the unwind barrier so a bug can never unwind into C.
fn guarded(body: impl FnOnce() -> RplabStatus) -> RplabStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            RplabStatus::InternalError
        }
    }
}

/// # Safety
/// `ptr` must be null or a valid, nul-terminated C string.
unsafe fn str_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, RplabStatus> {
    if ptr.is_null() {
        return Err(fail_null(what));
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        set_error(&format!("{what} is not valid UTF-8"));
        RplabStatus::InvalidUtf8
    })
}

fn cfg_for(bound: u64, workers: u32) -> ExecCfg {
    ExecCfg {
        bound: u128::from(bound),
        workers: workers.max(1) as usize,
    }
}

/// The message for the most recent failure on this thread, or an empty
/// string when no call has failed yet. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn rplab_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Parse the textual gate-list format into a circuit.
///
/// # Safety
/// `text` must be a valid, nul-terminated C string and `out` a valid
/// pointer. On success `*out` owns the circuit; release it with
/// [`rplab_circuit_free`].
#[no_mangle]
pub unsafe extern "C" fn rplab_circuit_parse(
    text: *const c_char,
    out: *mut *mut CircuitHandle,
) -> RplabStatus {
    guarded(|| {
        if out.is_null() {
            return fail_null("out");
        }
        let text = match unsafe { str_arg(text, "text") } {
            Ok(t) => t,
            Err(status) => return status,
        };
        match text.parse::<BooleanCircuit>() {
            Ok(circuit) => {
                unsafe { *out = Box::into_raw(Box::new(CircuitHandle { circuit })) };
                RplabStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Release a circuit. Null is ignored.
///
/// # Safety
/// `handle` must be null or a pointer from [`rplab_circuit_parse`] that
/// has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn rplab_circuit_free(handle: *mut CircuitHandle) {
    if !handle.is_null() {
        drop(unsafe { Box::from_raw(handle) });
    }
}

/// Number of input bits, or 0 when `handle` is null.
///
/// # Safety
/// `handle` must be null or a live circuit handle.
#[no_mangle]
pub unsafe extern "C" fn rplab_circuit_input_count(handle: *const CircuitHandle) -> u32 {
    match unsafe { handle.as_ref() } {
        Some(h) => h.circuit.n_inputs(),
        None => 0,
    }
}

/// Count the accepting assignments by exhausting all of them.
///
/// # Safety
/// `handle` must be a live circuit handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rplab_circuit_accepting_count(
    handle: *const CircuitHandle,
    bound: u64,
    workers: u32,
    out: *mut u64,
) -> RplabStatus {
    guarded(|| {
        let (Some(h), Some(out)) = (unsafe { handle.as_ref() }, unsafe { out.as_mut() }) else {
            return fail_null("handle and out");
        };
        match h.circuit.count_accepting(&cfg_for(bound, workers)) {
            Ok(count) => {
                *out = count;
                RplabStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

fn protocol_out(spec: ProtocolSpec, out: *mut *mut ProtocolHandle) -> RplabStatus {
    let name = CString::new(spec.name().replace('\0', " ")).unwrap();
    unsafe { *out = Box::into_raw(Box::new(ProtocolHandle { spec, name })) };
    RplabStatus::Ok
}

/// Build the one-round majority vote game for a circuit. Fails with
/// `Tie` when the circuit accepts exactly half of all assignments.
///
/// # Safety
/// `circuit` must be a live circuit handle and `out` a valid pointer.
/// On success `*out` owns the protocol; release it with
/// [`rplab_protocol_free`].
#[no_mangle]
pub unsafe extern "C" fn rplab_vote_game(
    circuit: *const CircuitHandle,
    bound: u64,
    workers: u32,
    out: *mut *mut ProtocolHandle,
) -> RplabStatus {
    guarded(|| {
        if out.is_null() {
            return fail_null("out");
        }
        let Some(h) = (unsafe { circuit.as_ref() }) else {
            return fail_null("circuit");
        };
        let inst = CountingInstance::new(h.circuit.clone(), CountingMode::Majority);
        match make_pp_vote(&inst, &cfg_for(bound, workers)) {
            Ok(spec) => protocol_out(spec, out),
            Err(e) => fail(&e),
        }
    })
}

/// Build the quadratic-scoring count game for a circuit. The claimed
/// quantity is the accepting count, or its parity when `parity` is set.
///
/// # Safety
/// `circuit` must be a live circuit handle and `out` a valid pointer.
/// On success `*out` owns the protocol; release it with
/// [`rplab_protocol_free`].
#[no_mangle]
pub unsafe extern "C" fn rplab_count_game(
    circuit: *const CircuitHandle,
    parity: bool,
    out: *mut *mut ProtocolHandle,
) -> RplabStatus {
    guarded(|| {
        if out.is_null() {
            return fail_null("out");
        }
        let Some(h) = (unsafe { circuit.as_ref() }) else {
            return fail_null("circuit");
        };
        let mode = if parity { CountingMode::Parity } else { CountingMode::Count };
        let inst = CountingInstance::new(h.circuit.clone(), mode);
        match make_brier_count(&inst) {
            Ok(spec) => protocol_out(spec, out),
            Err(e) => fail(&e),
        }
    })
}

/// Release a protocol. Null is ignored.
///
/// # Safety
/// `handle` must be null or a live protocol handle.
#[no_mangle]
pub unsafe extern "C" fn rplab_protocol_free(handle: *mut ProtocolHandle) {
    if !handle.is_null() {
        drop(unsafe { Box::from_raw(handle) });
    }
}

/// The protocol's display name. Null when `handle` is null.
///
/// # Safety
/// `handle` must be null or a live protocol handle; the string is valid
/// while the handle lives.
#[no_mangle]
pub unsafe extern "C" fn rplab_protocol_name(handle: *const ProtocolHandle) -> *const c_char {
    match unsafe { handle.as_ref() } {
        Some(h) => h.name.as_ptr(),
        None => std::ptr::null(),
    }
}

/// Number of prover messages, or 0 when `handle` is null.
///
/// # Safety
/// `handle` must be null or a live protocol handle.
#[no_mangle]
pub unsafe extern "C" fn rplab_protocol_rounds(handle: *const ProtocolHandle) -> u32 {
    match unsafe { handle.as_ref() } {
        Some(h) => h.spec.rounds() as u32,
        None => 0,
    }
}

/// Solve a protocol exactly on `input` and return the outcome.
///
/// # Safety
/// `protocol` must be a live protocol handle, `input` a valid C string,
/// and `out` a valid pointer. On success `*out` owns the outcome; release
/// it with [`rplab_outcome_free`].
#[no_mangle]
pub unsafe extern "C" fn rplab_solve(
    protocol: *const ProtocolHandle,
    input: *const c_char,
    bound: u64,
    workers: u32,
    out: *mut *mut OutcomeHandle,
) -> RplabStatus {
    guarded(|| {
        if out.is_null() {
            return fail_null("out");
        }
        let Some(h) = (unsafe { protocol.as_ref() }) else {
            return fail_null("protocol");
        };
        let input = match unsafe { str_arg(input, "input") } {
            Ok(t) => t,
            Err(status) => return status,
        };
        match solve_rational(&h.spec, input, &cfg_for(bound, workers)) {
            Ok(outcome) => {
                let best = outcome
                    .root_argmax
                    .first()
                    .map(|m| m.to_string())
                    .unwrap_or_default();
                let handle = OutcomeHandle {
                    value: CString::new(outcome.root_value.to_string()).unwrap(),
                    gap: CString::new(outcome.delta().render()).unwrap(),
                    best_message: CString::new(best).unwrap(),
                    node_count: outcome.node_count,
                    optimum_count: outcome.root_argmax.len() as u64,
                };
                unsafe { *out = Box::into_raw(Box::new(handle)) };
                RplabStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Release an outcome. Null is ignored.
///
/// # Safety
/// `handle` must be null or a live outcome handle.
#[no_mangle]
pub unsafe extern "C" fn rplab_outcome_free(handle: *mut OutcomeHandle) {
    if !handle.is_null() {
        drop(unsafe { Box::from_raw(handle) });
    }
}

/// The exact optimal value, rendered as `num/2^exp`. Null when `handle`
/// is null.
///
/// # Safety
/// `handle` must be null or a live outcome handle; the string is valid
/// while the handle lives.
#[no_mangle]
pub unsafe extern "C" fn rplab_outcome_value(handle: *const OutcomeHandle) -> *const c_char {
    match unsafe { handle.as_ref() } {
        Some(h) => h.value.as_ptr(),
        None => std::ptr::null(),
    }
}

/// The smallest margin by which any suboptimal message loses, or `+inf`
/// when no message is ever suboptimal. Null when `handle` is null.
///
/// # Safety
/// `handle` must be null or a live outcome handle; the string is valid
/// while the handle lives.
#[no_mangle]
pub unsafe extern "C" fn rplab_outcome_gap(handle: *const OutcomeHandle) -> *const c_char {
    match unsafe { handle.as_ref() } {
        Some(h) => h.gap.as_ptr(),
        None => std::ptr::null(),
    }
}

/// The lowest-numbered optimal opening message, as a bit string. Null
/// when `handle` is null.
///
/// # Safety
/// `handle` must be null or a live outcome handle; the string is valid
/// while the handle lives.
#[no_mangle]
pub unsafe extern "C" fn rplab_outcome_best_message(
    handle: *const OutcomeHandle,
) -> *const c_char {
    match unsafe { handle.as_ref() } {
        Some(h) => h.best_message.as_ptr(),
        None => std::ptr::null(),
    }
}

/// Number of information sets the optimal strategy can reach.
///
/// # Safety
/// `handle` must be null or a live outcome handle.
#[no_mangle]
pub unsafe extern "C" fn rplab_outcome_node_count(handle: *const OutcomeHandle) -> u64 {
    match unsafe { handle.as_ref() } {
        Some(h) => h.node_count,
        None => 0,
    }
}

/// Number of distinct optimal opening messages.
///
/// # Safety
/// `handle` must be null or a live outcome handle.
#[no_mangle]
pub unsafe extern "C" fn rplab_outcome_optimum_count(handle: *const OutcomeHandle) -> u64 {
    match unsafe { handle.as_ref() } {
        Some(h) => h.optimum_count,
        None => 0,
    }
}

/// Check that every optimal strategy commits to `truth`. Writes the
/// verdict to `out_pass`.
///
/// # Safety
/// `protocol` must be a live protocol handle, `input` and `truth` valid
/// C strings, and `out_pass` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rplab_verify(
    protocol: *const ProtocolHandle,
    input: *const c_char,
    truth: *const c_char,
    bound: u64,
    workers: u32,
    out_pass: *mut bool,
) -> RplabStatus {
    guarded(|| {
        let Some(h) = (unsafe { protocol.as_ref() }) else {
            return fail_null("protocol");
        };
        let input = match unsafe { str_arg(input, "input") } {
            Ok(t) => t,
            Err(status) => return status,
        };
        let truth = match unsafe { str_arg(truth, "truth") } {
            Ok(t) => t,
            Err(status) => return status,
        };
        let Some(out_pass) = (unsafe { out_pass.as_mut() }) else {
            return fail_null("out_pass");
        };
        match verify_protocol(&h.spec, input, truth, &cfg_for(bound, workers)) {
            Ok(report) => {
                *out_pass = report.pass;
                RplabStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

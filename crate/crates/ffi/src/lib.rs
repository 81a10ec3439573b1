//! C ABI over the `ndar` library.
//!
//! Every fallible function returns an [`NdarStatus`]; on failure the message
//! is available from [`ndar_last_error`] on the same thread. Handles are
//! opaque and must be released with their `_free` function. Strings returned
//! by the library are released with [`ndar_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ndar::paramopt::{Strategy, TpeConfig};
use ndar::remap::{run_ndar, NdarConfig, NdarTrace, QaoaOptimizer, TerminationRule};
use ndar::simulator::{Backend, NoiseModel};
use ndar::solvers::brute_force;
use ndar::{Bitstring, Error, IsingHamiltonian};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NdarStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Capacity = 4,
    Config = 5,
    Invariant = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NdarBackend {
    Noiseless = 0,
    Trajectories = 1,
    Density = 2,
}

/// Parameters of one adaptive remapping run.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct NdarRunConfig {
    pub trials_per_iter: usize,
    pub shots_per_trial: usize,
    pub max_iters: usize,
    /// QAOA depth.
    pub p: usize,
    pub orderings_per_iter: usize,
    pub gamma_1q: f64,
    pub gamma_2q: f64,
    pub backend: NdarBackend,
    pub seed: u64,
    pub epsilon: f64,
    /// Also stop when an iteration fails to improve the best energy.
    pub stop_on_no_improvement: bool,
}

/// An Ising Hamiltonian.
pub struct NdarHamiltonian(IsingHamiltonian);

/// The trace of a finished run.
pub struct NdarResult(NdarTrace);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> NdarStatus {
    match e {
        Error::Dimension { .. } | Error::InvalidSize(_) | Error::InvalidReference(_) | Error::EmptyInput(_) => NdarStatus::InvalidArgument,
        Error::Parse { .. } => NdarStatus::Parse,
        Error::Capacity(_) => NdarStatus::Capacity,
        Error::Config(_) | Error::UndefinedStatistic(_) => NdarStatus::Config,
        Error::Objective { source, .. } => status_of(source),
        Error::Invariant(_) => NdarStatus::Invariant,
        Error::Io(_) | Error::Json(_) => NdarStatus::Io,
    }
}

struct Failure(NdarStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(NdarStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(NdarStatus::InvalidArgument, message.into())
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NdarStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NdarStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {message}"));
            NdarStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn read_bits(bits: *const u8, len: usize, n: usize) -> Result<Bitstring, Failure> {
    if len != n {
        return Err(Error::Dimension { expected: n, found: len }.into());
    }
    if bits.is_null() && len > 0 {
        return Err(null("bits"));
    }
    let s = if len == 0 { &[][..] } else { slice::from_raw_parts(bits, len) };
    if let Some(b) = s.iter().find(|&&b| b > 1) {
        return Err(invalid(format!("bit value {b} is not 0 or 1")));
    }
    Ok(Bitstring::from_bits(s.iter().copied()))
}

unsafe fn write_bits(x: &Bitstring, out: *mut u8, len: usize) -> Result<(), Failure> {
    if len != x.len() {
        return Err(Error::Dimension { expected: x.len(), found: len }.into());
    }
    if out.is_null() && len > 0 {
        return Err(null("output buffer"));
    }
    if len > 0 {
        slice::from_raw_parts_mut(out, len).copy_from_slice(x.bits());
    }
    Ok(())
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s).map(CString::into_raw).map_err(|e| invalid(e.to_string()))
}

/// Message of the last failed call on this thread, or null.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ndar_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string returned by this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn ndar_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Random Sherrington-Kirkpatrick instance with `+-1` couplings.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ndar_hamiltonian_generate_sk(n: usize, seed: u64, out: *mut *mut NdarHamiltonian) -> NdarStatus {
    guard(|| {
        let h = ndar::ising::generate_sk(n, seed)?;
        write_out(out, Box::into_raw(Box::new(NdarHamiltonian(h))), "out")
    })
}

/// Parses an instance in the text format.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ndar_hamiltonian_parse(text: *const c_char, out: *mut *mut NdarHamiltonian) -> NdarStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        let text = CStr::from_ptr(text).to_str().map_err(|e| invalid(e.to_string()))?;
        let h = ndar::ising::parse_instance(text)?;
        write_out(out, Box::into_raw(Box::new(NdarHamiltonian(h))), "out")
    })
}

/// Serializes to the text format; free the result with [`ndar_string_free`].
///
/// # Safety
/// `h` must be a live handle and `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ndar_hamiltonian_serialize(h: *const NdarHamiltonian, out: *mut *mut c_char) -> NdarStatus {
    guard(|| {
        let h = deref(h, "hamiltonian")?;
        write_out(out, into_c_string(ndar::ising::serialize_instance(&h.0))?, "out")
    })
}

/// Number of qubits, or 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ndar_hamiltonian_num_qubits(h: *const NdarHamiltonian) -> usize {
    h.as_ref().map_or(0, |h| h.0.n())
}

/// Energy of the bitstring `bits[0..len]`, one byte per bit.
///
/// # Safety
/// `h` must be a live handle, `bits` readable for `len` bytes and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ndar_hamiltonian_energy(h: *const NdarHamiltonian, bits: *const u8, len: usize, out: *mut f64) -> NdarStatus {
    guard(|| {
        let h = deref(h, "hamiltonian")?;
        let x = read_bits(bits, len, h.0.n())?;
        write_out(out, h.0.energy(&x)?, "out")
    })
}

/// Gauge-transformed copy of `h` by the flip mask `mask[0..len]`.
///
/// # Safety
/// `h` must be a live handle, `mask` readable for `len` bytes and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ndar_hamiltonian_gauge_transform(
    h: *const NdarHamiltonian,
    mask: *const u8,
    len: usize,
    out: *mut *mut NdarHamiltonian,
) -> NdarStatus {
    guard(|| {
        let h = deref(h, "hamiltonian")?;
        let y = read_bits(mask, len, h.0.n())?;
        let g = h.0.gauge_transform(&y)?;
        write_out(out, Box::into_raw(Box::new(NdarHamiltonian(g))), "out")
    })
}

/// # Safety
/// `h` must be null or a live handle, which is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ndar_hamiltonian_free(h: *mut NdarHamiltonian) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Exhaustive ground state: energy and the lowest-index minimizer.
///
/// # Safety
/// `h` must be a live handle, `energy` writable and `bits` writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ndar_brute_force(h: *const NdarHamiltonian, energy: *mut f64, bits: *mut u8, len: usize) -> NdarStatus {
    guard(|| {
        let h = deref(h, "hamiltonian")?;
        let gs = brute_force(&h.0)?;
        let x = gs.representative().ok_or(Error::EmptyInput("minimizers"))?;
        write_bits(x, bits, len)?;
        write_out(energy, gs.energy, "energy")
    })
}

/// Defaults: 20 trials of 100 shots, 5 iterations, depth 1, strong damping
/// on the trajectory backend.
#[no_mangle]
pub extern "C" fn ndar_run_config_default() -> NdarRunConfig {
    let noise = NoiseModel::strong(0);
    NdarRunConfig {
        trials_per_iter: 20,
        shots_per_trial: 100,
        max_iters: 5,
        p: 1,
        orderings_per_iter: 10,
        gamma_1q: noise.gamma_1q,
        gamma_2q: noise.gamma_2q,
        backend: NdarBackend::Trajectories,
        seed: 0,
        epsilon: 0.0,
        stop_on_no_improvement: true,
    }
}

/// Runs adaptive remapping on `h` with the all-zeros attractor.
///
/// `ground_energy` is used for approximation ratios; pass NaN if unknown.
///
/// # Safety
/// `h` and `cfg` must be valid pointers and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ndar_run(
    h: *const NdarHamiltonian,
    cfg: *const NdarRunConfig,
    ground_energy: f64,
    out: *mut *mut NdarResult,
) -> NdarStatus {
    guard(|| {
        let h = &deref(h, "hamiltonian")?.0;
        let c = *deref(cfg, "config")?;
        let n = h.n();
        let mut nc = NdarConfig::new(n, c.trials_per_iter, c.shots_per_trial, c.max_iters);
        nc.orderings_per_iter = c.orderings_per_iter;
        nc.epsilon = c.epsilon;
        if !c.stop_on_no_improvement {
            nc.termination = vec![TerminationRule::MaxIters];
        }
        nc.validate(n)?;
        let backend = match c.backend {
            NdarBackend::Noiseless => Backend::Noiseless,
            NdarBackend::Trajectories => Backend::Trajectories,
            NdarBackend::Density => Backend::Density,
        };
        let noise = NoiseModel::new(n, c.gamma_1q, c.gamma_2q)?;
        let mut opt = QaoaOptimizer::for_config(&nc, backend, noise, Strategy::Tpe(TpeConfig::default()), c.p, c.seed)?;
        let egs = (!ground_energy.is_nan()).then_some(ground_energy);
        let trace = run_ndar(h, &mut opt, &nc, egs).map_err(|f| Failure::from(f.error))?;
        write_out(out, Box::into_raw(Box::new(NdarResult(trace))), "out")
    })
}

/// Number of completed iterations, or 0 for a null handle.
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ndar_result_iterations(r: *const NdarResult) -> usize {
    r.as_ref().map_or(0, |r| r.0.records.len())
}

/// Best energy found and its bitstring in the original frame.
///
/// # Safety
/// `r` must be a live handle, `energy` writable and `bits` writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ndar_result_best(r: *const NdarResult, energy: *mut f64, bits: *mut u8, len: usize) -> NdarStatus {
    guard(|| {
        let best = deref(r, "result")?.0.best.as_ref().ok_or(Error::EmptyInput("iterations"))?;
        write_bits(&best.bitstring, bits, len)?;
        write_out(energy, best.energy, "energy")
    })
}

/// Energy of the attractor state under the Hamiltonian optimized in `iteration`.
///
/// # Safety
/// `r` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ndar_result_attractor_energy(r: *const NdarResult, iteration: usize, out: *mut f64) -> NdarStatus {
    guard(|| {
        let records = &deref(r, "result")?.0.records;
        let rec = records
            .get(iteration)
            .ok_or_else(|| invalid(format!("iteration {iteration} out of range 0..{}", records.len())))?;
        write_out(out, rec.attractor_energy, "out")
    })
}

/// Samples drawn up to and including `iteration`.
///
/// # Safety
/// `r` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ndar_result_samples_consumed(r: *const NdarResult, iteration: usize, out: *mut usize) -> NdarStatus {
    guard(|| {
        let records = &deref(r, "result")?.0.records;
        let rec = records
            .get(iteration)
            .ok_or_else(|| invalid(format!("iteration {iteration} out of range 0..{}", records.len())))?;
        write_out(out, rec.samples_consumed, "out")
    })
}

/// Full trace as JSON; free the result with [`ndar_string_free`].
///
/// # Safety
/// `r` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ndar_result_to_json(r: *const NdarResult, out: *mut *mut c_char) -> NdarStatus {
    guard(|| {
        let r = deref(r, "result")?;
        let json = serde_json::to_string(&r.0).map_err(Error::from)?;
        write_out(out, into_c_string(json)?, "out")
    })
}

/// # Safety
/// `r` must be null or a live handle, which is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ndar_result_free(r: *mut NdarResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

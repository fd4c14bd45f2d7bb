//! C ABI over the `dflsim` core: graph generation, steady-state and gain
//! computations, the diffusion model and gossip size estimation.
//!
//! Every fallible function returns a [`DflStatus`]; on failure the message is
//! kept per thread and can be read with [`dfl_last_error_message`]. Graphs are
//! opaque handles owned by the caller and released with [`dfl_graph_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dflsim::federation;
use dflsim::graph::{self, GraphModel};
use dflsim::neural::{self, Activation};
use dflsim::spectral::{self, MarkovMatrix, MixingMethod};
use dflsim::{diffusion, Graph};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DflStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    Graph = 4,
    Spectral = 5,
    Diffusion = 6,
    Neural = 7,
    Federation = 8,
    Panic = 9,
}

/// Opaque network handle.
pub struct DflGraph {
    inner: Graph,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

struct Failure(DflStatus, String);

impl Failure {
    fn new(status: DflStatus, msg: impl std::fmt::Display) -> Self {
        Failure(status, msg.to_string())
    }
}

type Res<T = ()> = Result<T, Failure>;

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Res) -> DflStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DflStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DflStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Res {
    if p.is_null() {
        Err(Failure::new(DflStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn graph_ref<'a>(g: *const DflGraph) -> Res<&'a Graph> {
    non_null(g, "graph")?;
    Ok(&(*g).inner)
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, needed: usize, name: &str) -> Res<&'a mut [T]> {
    non_null(p, name)?;
    if len < needed {
        return Err(Failure::new(
            DflStatus::BufferTooSmall,
            format!("{name} holds {len} elements, {needed} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

unsafe fn in_str<'a>(p: *const c_char, name: &str) -> Res<&'a str> {
    non_null(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(DflStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

fn put<T>(out: *mut T, value: T) {
    // SAFETY: callers check `out` for null first.
    unsafe { out.write(value) }
}

/// Copies the calling thread's last error message into `buf` as a
/// NUL-terminated string, truncating if needed. Returns the full message
/// length in bytes (excluding the terminator).
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn dfl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dfl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Generates a network. `model` is a TOML table such as
/// `family = "k_regular"\nk = 8` or `family = "cycle"`.
///
/// # Safety
/// `model` must be a NUL-terminated string and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn dfl_graph_generate(
    model: *const c_char,
    n: usize,
    seed: u64,
    out: *mut *mut DflGraph,
) -> DflStatus {
    guard(|| {
        non_null(out, "out")?;
        let text = in_str(model, "model")?;
        let model: GraphModel = toml::from_str(text).map_err(|e| Failure::new(DflStatus::InvalidArgument, e))?;
        let g = graph::generate(&model, n, seed).map_err(|e| Failure::new(DflStatus::Graph, e))?;
        put(out, Box::into_raw(Box::new(DflGraph { inner: g })));
        Ok(())
    })
}

/// Builds a network from `num_edges` pairs stored flat in `edges`
/// (`u0, v0, u1, v1, …`).
///
/// # Safety
/// `edges` must be valid for `2 * num_edges` reads (or null when
/// `num_edges` is 0) and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn dfl_graph_from_edges(
    n: usize,
    edges: *const usize,
    num_edges: usize,
    out: *mut *mut DflGraph,
) -> DflStatus {
    guard(|| {
        non_null(out, "out")?;
        let flat: &[usize] = if num_edges == 0 {
            &[]
        } else {
            non_null(edges, "edges")?;
            std::slice::from_raw_parts(edges, 2 * num_edges)
        };
        let pairs: Vec<(usize, usize)> = flat.chunks_exact(2).map(|c| (c[0], c[1])).collect();
        let g = Graph::from_edges(n, &pairs).map_err(|e| Failure::new(DflStatus::Graph, e))?;
        put(out, Box::into_raw(Box::new(DflGraph { inner: g })));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `g` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dfl_graph_free(g: *mut DflGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live handle; `nodes` and `edges` valid for one write each.
#[no_mangle]
pub unsafe extern "C" fn dfl_graph_size(g: *const DflGraph, nodes: *mut usize, edges: *mut usize) -> DflStatus {
    guard(|| {
        let g = graph_ref(g)?;
        non_null(nodes, "nodes")?;
        non_null(edges, "edges")?;
        put(nodes, g.n());
        put(edges, g.num_edges());
        Ok(())
    })
}

/// Writes the degree of every node; `len` must be at least the node count.
///
/// # Safety
/// `g` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn dfl_graph_degrees(g: *const DflGraph, out: *mut usize, len: usize) -> DflStatus {
    guard(|| {
        let g = graph_ref(g)?;
        out_slice(out, len, g.n(), "out")?.copy_from_slice(&g.degrees());
        Ok(())
    })
}

/// # Safety
/// `g` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn dfl_graph_is_connected(g: *const DflGraph, out: *mut bool) -> DflStatus {
    guard(|| {
        let g = graph_ref(g)?;
        non_null(out, "out")?;
        put(out, g.is_connected());
        Ok(())
    })
}

/// Stationary vector of the self-inclusive averaging operator. `pi` may be
/// null when only the norm is wanted; otherwise it needs room for every node.
///
/// # Safety
/// `g` must be a live handle, `pi` null or valid for `len` writes and `norm`
/// valid for one write.
#[no_mangle]
pub unsafe extern "C" fn dfl_steady_state(g: *const DflGraph, pi: *mut f64, len: usize, norm: *mut f64) -> DflStatus {
    guard(|| {
        let g = graph_ref(g)?;
        non_null(norm, "norm")?;
        let m = MarkovMatrix::from_graph(g);
        let ss = spectral::steady_state_exact(&m, spectral::DEFAULT_TOLERANCE, spectral::DEFAULT_MAX_ITER)
            .map_err(|e| Failure::new(DflStatus::Spectral, e))?;
        if !pi.is_null() {
            out_slice(pi, len, g.n(), "pi")?.copy_from_slice(&ss.pi);
        }
        put(norm, ss.norm);
        Ok(())
    })
}

/// Second-largest eigenvalue modulus of the averaging operator.
///
/// # Safety
/// `g` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn dfl_second_eigenvalue(g: *const DflGraph, out: *mut f64) -> DflStatus {
    guard(|| {
        let g = graph_ref(g)?;
        non_null(out, "out")?;
        let est = spectral::mixing_estimate(&MarkovMatrix::from_graph(g), MixingMethod::Spectral)
            .map_err(|e| Failure::new(DflStatus::Spectral, e))?;
        put(out, est.second_eigenvalue_modulus);
        Ok(())
    })
}

/// Compression-factor estimate from a degree sample and a size estimate.
///
/// # Safety
/// `degrees` must be valid for `len` reads and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn dfl_vsteady_norm_from_degrees(
    degrees: *const usize,
    len: usize,
    n_estimate: f64,
    out: *mut f64,
) -> DflStatus {
    guard(|| {
        non_null(degrees, "degrees")?;
        non_null(out, "out")?;
        let sample = std::slice::from_raw_parts(degrees, len);
        let v = spectral::vsteady_norm_from_degrees(sample, n_estimate)
            .map_err(|e| Failure::new(DflStatus::Spectral, e))?;
        put(out, v);
        Ok(())
    })
}

/// He standard deviation for a layer; `activation` is e.g. `"relu"`,
/// `"tanh"`, `"linear"` or `"leaky_relu:0.01"`.
///
/// # Safety
/// `activation` must be a NUL-terminated string and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn dfl_he_sigma(fan_in: usize, activation: *const c_char, out: *mut f64) -> DflStatus {
    guard(|| {
        non_null(out, "out")?;
        let act: Activation = in_str(activation, "activation")?
            .parse()
            .map_err(|e| Failure::new(DflStatus::Neural, e))?;
        put(
            out,
            neural::he_sigma(fan_in, act).map_err(|e| Failure::new(DflStatus::Neural, e))?,
        );
        Ok(())
    })
}

/// Runs the diffusion model and writes `rounds + 1` values of each spread
/// measure (index 0 is the initial state).
///
/// # Safety
/// `g` must be a live handle; `sigma_ap` and `sigma_an` valid for `len`
/// writes.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn dfl_diffusion_run(
    g: *const DflGraph,
    params: usize,
    sigma_init: f64,
    sigma_noise: f64,
    rounds: usize,
    seed: u64,
    sigma_ap: *mut f64,
    sigma_an: *mut f64,
    len: usize,
) -> DflStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let ap = out_slice(sigma_ap, len, rounds + 1, "sigma_ap")?;
        let an = out_slice(sigma_an, len, rounds + 1, "sigma_an")?;
        let trace = diffusion::run_diffusion(g, params, sigma_init, sigma_noise, rounds, seed)
            .map_err(|e| Failure::new(DflStatus::Diffusion, e))?;
        ap.copy_from_slice(&trace.sigma_ap);
        an.copy_from_slice(&trace.sigma_an);
        Ok(())
    })
}

/// Per-node network-size estimates by extrema propagation.
///
/// # Safety
/// `g` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn dfl_estimate_size(
    g: *const DflGraph,
    samples: usize,
    rounds: usize,
    seed: u64,
    out: *mut f64,
    len: usize,
) -> DflStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let dst = out_slice(out, len, g.n(), "out")?;
        let est = federation::estimate_n_gossip(g, samples, rounds, seed)
            .map_err(|e| Failure::new(DflStatus::Federation, e))?;
        dst.copy_from_slice(&est);
        Ok(())
    })
}

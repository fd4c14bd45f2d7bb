use std::ffi::{c_char, CString};
use std::ptr;

use dflsim_ffi::*;

fn generate(model: &str, n: usize, seed: u64) -> *mut DflGraph {
    let model = CString::new(model).unwrap();
    let mut g = ptr::null_mut();
    let status = unsafe { dfl_graph_generate(model.as_ptr(), n, seed, &mut g) };
    assert_eq!(status, DflStatus::Ok, "{}", last_error());
    g
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let len = unsafe { dfl_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..len.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn regular_graph_steady_state() {
    let g = generate("family = \"k_regular\"\nk = 4", 20, 1);
    let (mut n, mut m) = (0, 0);
    assert_eq!(unsafe { dfl_graph_size(g, &mut n, &mut m) }, DflStatus::Ok);
    assert_eq!((n, m), (20, 40));
    let mut pi = vec![0.0; 20];
    let mut norm = 0.0;
    assert_eq!(
        unsafe { dfl_steady_state(g, pi.as_mut_ptr(), pi.len(), &mut norm) },
        DflStatus::Ok
    );
    assert!(pi.iter().all(|&p| (p - 0.05).abs() < 1e-12));
    assert!((norm - 1.0 / 20f64.sqrt()).abs() < 1e-12);
    unsafe { dfl_graph_free(g) };
}

#[test]
fn star_from_edges() {
    let edges = [0usize, 1, 0, 2, 0, 3];
    let mut g = ptr::null_mut();
    assert_eq!(
        unsafe { dfl_graph_from_edges(4, edges.as_ptr(), 3, &mut g) },
        DflStatus::Ok
    );
    let mut deg = [0usize; 4];
    assert_eq!(unsafe { dfl_graph_degrees(g, deg.as_mut_ptr(), 4) }, DflStatus::Ok);
    assert_eq!(deg, [3, 1, 1, 1]);
    let mut norm = 0.0;
    assert_eq!(
        unsafe { dfl_steady_state(g, ptr::null_mut(), 0, &mut norm) },
        DflStatus::Ok
    );
    // π = (4, 2, 2, 2) / 10
    assert!((norm - 0.28f64.sqrt()).abs() < 1e-12);
    let mut est = 0.0;
    assert_eq!(
        unsafe { dfl_vsteady_norm_from_degrees(deg.as_ptr(), 4, 4.0, &mut est) },
        DflStatus::Ok
    );
    assert!((est - 0.28f64.sqrt()).abs() < 1e-12);
    unsafe { dfl_graph_free(g) };
}

#[test]
fn error_codes_and_messages() {
    let mut g = ptr::null_mut();
    let model = CString::new("family = \"k_regular\"\nk = 3").unwrap();
    assert_eq!(
        unsafe { dfl_graph_generate(model.as_ptr(), 7, 0, &mut g) },
        DflStatus::Graph
    );
    assert!(g.is_null());
    assert!(last_error().contains("odd"), "{}", last_error());

    let bad = CString::new("family = \"moebius\"").unwrap();
    assert_eq!(
        unsafe { dfl_graph_generate(bad.as_ptr(), 7, 0, &mut g) },
        DflStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { dfl_graph_generate(ptr::null(), 7, 0, &mut g) },
        DflStatus::NullPointer
    );

    let cycle = generate("family = \"cycle\"", 5, 0);
    let mut small = [0usize; 2];
    assert_eq!(
        unsafe { dfl_graph_degrees(cycle, small.as_mut_ptr(), 2) },
        DflStatus::BufferTooSmall
    );
    let mut out = 0.0;
    let act = CString::new("sigmoid").unwrap();
    assert_eq!(unsafe { dfl_he_sigma(10, act.as_ptr(), &mut out) }, DflStatus::Neural);
    let act = CString::new("relu").unwrap();
    assert_eq!(unsafe { dfl_he_sigma(8, act.as_ptr(), &mut out) }, DflStatus::Ok);
    assert_eq!(out, 0.5);
    assert_eq!(last_error(), "");
    unsafe { dfl_graph_free(cycle) };
    unsafe { dfl_graph_free(ptr::null_mut()) };
}

#[test]
fn diffusion_and_gossip() {
    let g = generate("family = \"complete\"", 16, 0);
    let (mut ap, mut an) = (vec![0.0; 6], vec![0.0; 6]);
    let s = unsafe { dfl_diffusion_run(g, 500, 1.0, 0.0, 5, 3, ap.as_mut_ptr(), an.as_mut_ptr(), 6) };
    assert_eq!(s, DflStatus::Ok, "{}", last_error());
    // one averaging round on a complete graph reaches consensus
    assert!(an[1] < 1e-12 && an[0] > 0.5);
    let mut est = vec![0.0; 16];
    assert_eq!(
        unsafe { dfl_estimate_size(g, 1000, 1, 2, est.as_mut_ptr(), 16) },
        DflStatus::Ok
    );
    assert!(est.iter().all(|&e| e == est[0] && (e - 16.0).abs() < 4.0));
    let mut l2 = 1.0;
    assert_eq!(unsafe { dfl_second_eigenvalue(g, &mut l2) }, DflStatus::Ok);
    assert!(l2.abs() < 1e-6);
    unsafe { dfl_graph_free(g) };
}

use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use ndar_ffi::*;

fn last_error() -> String {
    let p = ndar_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn sk(n: usize, seed: u64) -> *mut NdarHamiltonian {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { ndar_hamiltonian_generate_sk(n, seed, &mut h) }, NdarStatus::Ok);
    h
}

#[test]
fn parse_serialize_round_trip() {
    let h = sk(6, 3);
    unsafe {
        let mut text = ptr::null_mut();
        assert_eq!(ndar_hamiltonian_serialize(h, &mut text), NdarStatus::Ok);
        let mut h2 = ptr::null_mut();
        assert_eq!(ndar_hamiltonian_parse(text, &mut h2), NdarStatus::Ok);
        assert_eq!(ndar_hamiltonian_num_qubits(h2), 6);
        let mut again = ptr::null_mut();
        assert_eq!(ndar_hamiltonian_serialize(h2, &mut again), NdarStatus::Ok);
        assert_eq!(CStr::from_ptr(text), CStr::from_ptr(again));
        ndar_string_free(text);
        ndar_string_free(again);
        ndar_hamiltonian_free(h);
        ndar_hamiltonian_free(h2);
    }
}

#[test]
fn gauge_transform_preserves_energies() {
    let h = sk(5, 11);
    let mask = [1u8, 0, 1, 1, 0];
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(ndar_hamiltonian_gauge_transform(h, mask.as_ptr(), 5, &mut g), NdarStatus::Ok);
        for k in 0..32u8 {
            let x: Vec<u8> = (0..5).map(|i| (k >> i) & 1).collect();
            let xy: Vec<u8> = x.iter().zip(mask).map(|(a, b)| a ^ b).collect();
            let (mut e1, mut e2) = (0.0, 0.0);
            assert_eq!(ndar_hamiltonian_energy(g, x.as_ptr(), 5, &mut e1), NdarStatus::Ok);
            assert_eq!(ndar_hamiltonian_energy(h, xy.as_ptr(), 5, &mut e2), NdarStatus::Ok);
            assert_eq!(e1, e2);
        }
        ndar_hamiltonian_free(g);
        ndar_hamiltonian_free(h);
    }
}

#[test]
fn brute_force_finds_minimum() {
    let h = sk(8, 2);
    unsafe {
        let mut e = 0.0;
        let mut bits = [0u8; 8];
        assert_eq!(ndar_brute_force(h, &mut e, bits.as_mut_ptr(), 8), NdarStatus::Ok);
        let mut check = 0.0;
        ndar_hamiltonian_energy(h, bits.as_ptr(), 8, &mut check);
        assert_eq!(e, check);
        for k in 0..256u32 {
            let x: Vec<u8> = (0..8).map(|i| ((k >> i) & 1) as u8).collect();
            let mut ek = 0.0;
            ndar_hamiltonian_energy(h, x.as_ptr(), 8, &mut ek);
            assert!(ek >= e);
        }
        ndar_hamiltonian_free(h);
    }
}

#[test]
fn errors_set_status_and_message() {
    let h = sk(4, 1);
    unsafe {
        let mut e = 0.0;
        let bits = [0u8; 3];
        assert_eq!(ndar_hamiltonian_energy(h, bits.as_ptr(), 3, &mut e), NdarStatus::InvalidArgument);
        assert!(last_error().contains("dimension"));
        let bad = [0u8, 2, 0, 0];
        assert_eq!(ndar_hamiltonian_energy(h, bad.as_ptr(), 4, &mut e), NdarStatus::InvalidArgument);
        assert_eq!(ndar_hamiltonian_energy(ptr::null(), bad.as_ptr(), 4, &mut e), NdarStatus::NullPointer);
        let text = CString::new("n 2\n0 0 1.0\n").unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(ndar_hamiltonian_parse(text.as_ptr(), &mut out), NdarStatus::Parse);
        assert!(out.is_null());
        let mut big = ptr::null_mut();
        assert_ne!(ndar_hamiltonian_generate_sk(0, 1, &mut big), NdarStatus::Ok);
        ndar_hamiltonian_free(h);
        ndar_hamiltonian_free(ptr::null_mut());
        ndar_result_free(ptr::null_mut());
        ndar_string_free(ptr::null_mut());
    }
}

#[test]
fn run_reports_consistent_trace() {
    let h = sk(5, 4);
    let mut cfg = ndar_run_config_default();
    cfg.trials_per_iter = 4;
    cfg.shots_per_trial = 32;
    cfg.max_iters = 3;
    cfg.backend = NdarBackend::Density;
    cfg.seed = 9;
    unsafe {
        let (mut egs, mut gs) = (0.0, [0u8; 5]);
        ndar_brute_force(h, &mut egs, gs.as_mut_ptr(), 5);
        let mut r = ptr::null_mut();
        assert_eq!(ndar_run(h, &cfg, egs, &mut r), NdarStatus::Ok, "{}", last_error());
        let iters = ndar_result_iterations(r);
        assert!((1..=3).contains(&iters));
        let (mut best, mut bits) = (0.0, [0u8; 5]);
        assert_eq!(ndar_result_best(r, &mut best, bits.as_mut_ptr(), 5), NdarStatus::Ok);
        let mut e = 0.0;
        ndar_hamiltonian_energy(h, bits.as_ptr(), 5, &mut e);
        assert_eq!(e, best);
        assert!(best >= egs);
        for k in 0..iters {
            let mut m = 0;
            assert_eq!(ndar_result_samples_consumed(r, k, &mut m), NdarStatus::Ok);
            assert_eq!(m, 128 * (k + 1));
            let mut ea = 0.0;
            assert_eq!(ndar_result_attractor_energy(r, k, &mut ea), NdarStatus::Ok);
        }
        let mut ea = 0.0;
        assert_eq!(ndar_result_attractor_energy(r, iters, &mut ea), NdarStatus::InvalidArgument);
        let mut json = ptr::null_mut();
        assert_eq!(ndar_result_to_json(r, &mut json), NdarStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(v["records"].as_array().unwrap().len(), iters);
        ndar_string_free(json);
        ndar_result_free(r);

        cfg.max_iters = 0;
        let mut r2 = ptr::null_mut();
        assert_eq!(ndar_run(h, &cfg, f64::NAN, &mut r2), NdarStatus::Config);
        ndar_hamiltonian_free(h);
    }
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/ndar.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["ndar_hamiltonian_parse", "ndar_run", "ndar_last_error", "NDAR_STATUS_OK", "typedef struct NdarResult NdarResult"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"ndar.h\"\nint main(void) { NdarRunConfig c = ndar_run_config_default(); NdarHamiltonian *h = 0;\n\
         return ndar_hamiltonian_generate_sk(4, c.seed, &h) == NDAR_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .status()
        .expect("C compiler available");
    assert!(status.success());
}

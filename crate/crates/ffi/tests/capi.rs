use lrperc_ffi::*;
use std::ffi::{CStr, CString};
use std::ptr;

fn kernel(spec: &str, dim: usize) -> *mut LrpKernel {
    let s = CString::new(spec).unwrap();
    let mut k = ptr::null_mut();
    assert_eq!(unsafe { lrperc_kernel_parse(s.as_ptr(), dim, &mut k) }, LrpStatus::Ok);
    assert!(!k.is_null());
    k
}

fn last_error() -> String {
    let p = lrperc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn kernel_eval_matches_power_law() {
    let k = kernel("power_law(C=2,s=4)", 2);
    let mut v = 0.0;
    let x = [1i64, 1];
    assert_eq!(unsafe { lrperc_kernel_eval(k, x.as_ptr(), &mut v) }, LrpStatus::Ok);
    assert!((v - 2.0 / 4.0).abs() < 1e-12);
    let zero = [0i64, 0];
    assert_eq!(unsafe { lrperc_kernel_eval(k, zero.as_ptr(), &mut v) }, LrpStatus::InvalidParameter);
    assert!(last_error().contains("zero displacement"));
    unsafe { lrperc_kernel_free(k) };
}

#[test]
fn bad_kernel_reports_error() {
    let s = CString::new("power_law(C=1,s=2)").unwrap();
    let mut k = ptr::null_mut();
    let status = unsafe { lrperc_kernel_parse(s.as_ptr(), 2, &mut k) };
    assert_ne!(status, LrpStatus::Ok);
    assert!(k.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { lrperc_kernel_parse(ptr::null(), 2, &mut k) }, LrpStatus::NullPointer);
}

#[test]
fn sampling_is_reproducible_and_round_trips() {
    let k = kernel("power_law(C=1,s=4)", 2);
    let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(lrperc_sample_box(k, 1.0, 6, 42, 1e-3, &mut a), LrpStatus::Ok);
        assert_eq!(lrperc_sample_box(k, 1.0, 6, 42, 1e-3, &mut b), LrpStatus::Ok);
        assert_eq!(lrperc_config_num_vertices(a), 169);
        let m = lrperc_config_num_edges(a);
        assert_eq!(m, lrperc_config_num_edges(b));
        assert!(m > 0);
        for i in 0..m {
            let (mut x, mut y, mut u, mut v) = (0, 0, 0, 0);
            assert_eq!(lrperc_config_edge(a, i, &mut x, &mut y), LrpStatus::Ok);
            assert_eq!(lrperc_config_edge(b, i, &mut u, &mut v), LrpStatus::Ok);
            assert_eq!((x, y), (u, v));
        }
        let (mut x, mut y) = (0, 0);
        assert_eq!(lrperc_config_edge(a, m, &mut x, &mut y), LrpStatus::OutOfRange);

        let mut coords = [0i64; 2];
        assert_eq!(lrperc_config_point(a, 0, coords.as_mut_ptr()), LrpStatus::Ok);
        assert_eq!(coords, [-6, -6]);

        let largest = lrperc_config_largest_cluster(a);
        assert!((1..=169).contains(&largest));

        let mut text = ptr::null_mut();
        assert_eq!(lrperc_config_to_text(a, &mut text), LrpStatus::Ok);
        let mut c = ptr::null_mut();
        assert_eq!(lrperc_config_from_text(text, &mut c), LrpStatus::Ok);
        assert_eq!(lrperc_config_num_edges(c), m);
        assert_eq!(lrperc_config_largest_cluster(c), largest);

        lrperc_string_free(text);
        lrperc_config_free(a);
        lrperc_config_free(b);
        lrperc_config_free(c);
        lrperc_config_free(ptr::null_mut());
        lrperc_kernel_free(k);
    }
}

#[test]
fn estimators_through_the_abi() {
    let nn = kernel("nn(w=1)", 2);
    let (mut v, mut se) = (0.0, 0.0);
    assert_eq!(unsafe { lrperc_boundary_connection_prob(nn, 0.0, 4, 20, 1, &mut v, &mut se) }, LrpStatus::Ok);
    assert_eq!(v, 0.0);
    assert_eq!(unsafe { lrperc_boundary_connection_prob(nn, 50.0, 4, 20, 1, &mut v, &mut se) }, LrpStatus::Ok);
    assert_eq!(v, 1.0);

    // phi({0}) for nearest-neighbour bonds is 2d (1 - e^{-β})
    let (mut phi, mut upper) = (0.0, 0.0);
    let origin = [0i64, 0];
    assert_eq!(unsafe { lrperc_phi(nn, 0.2, origin.as_ptr(), 1, &mut phi, &mut upper) }, LrpStatus::Ok);
    assert!((phi - 4.0 * (1.0 - (-0.2f64).exp())).abs() < 1e-12);
    assert!(upper >= phi);
    let off = [1i64, 0];
    assert_eq!(unsafe { lrperc_phi(nn, 0.2, off.as_ptr(), 1, &mut phi, &mut upper) }, LrpStatus::InvalidParameter);
    unsafe { lrperc_kernel_free(nn) };
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/lrperc.h")).unwrap();
    for name in [
        "lrperc_last_error",
        "lrperc_kernel_parse",
        "lrperc_kernel_eval",
        "lrperc_kernel_free",
        "lrperc_sample_box",
        "lrperc_config_num_vertices",
        "lrperc_config_num_edges",
        "lrperc_config_edge",
        "lrperc_config_point",
        "lrperc_config_largest_cluster",
        "lrperc_config_to_text",
        "lrperc_config_from_text",
        "lrperc_config_free",
        "lrperc_string_free",
        "lrperc_boundary_connection_prob",
        "lrperc_phi",
        "typedef struct LrpKernel LrpKernel",
        "typedef struct LrpConfig LrpConfig",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile_dir();
    let src = dir.join("probe.c");
    std::fs::write(
        &src,
        "#include \"lrperc.h\"\nint main(void) { LrpKernel *k = 0; (void)k; return LRP_STATUS_OK; }\n",
    )
    .unwrap();
    let status = std::process::Command::new(cc)
        .args(["-fsyntax-only", "-Wall", "-Werror", "-I", concat!(env!("CARGO_MANIFEST_DIR"), "/include")])
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("lrperc-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use jetflow_ffi::*;

const CONFIG: &str = r#"{"dim":2,"order":2,"kernel":{"sigma":1.0},
    "integrator":{"dt":0.05,"t_final":1.0},
    "particles":[{"q":[-0.5,0.0]},{"q":[0.5,0.25]}]}"#;

fn system(json: &str, seed: Option<u64>) -> Result<*mut JetflowSystem, (JetflowStatus, String)> {
    let text = CString::new(json).unwrap();
    let seed_ptr = seed.as_ref().map_or(ptr::null(), |s| s as *const u64);
    let mut out = ptr::null_mut();
    let status = unsafe { jetflow_system_from_json(text.as_ptr(), seed_ptr, &mut out) };
    if status == JetflowStatus::Ok {
        Ok(out)
    } else {
        assert!(out.is_null());
        Err((status, last_error()))
    }
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(jetflow_last_error()) }
        .to_str()
        .unwrap()
        .to_string()
}

fn take_string(p: *mut std::ffi::c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string();
    unsafe { jetflow_string_free(p) };
    s
}

#[test]
fn seeded_system_integrates_and_conserves_energy() {
    let sys = system(CONFIG, Some(7)).unwrap();
    let (mut dim, mut order, mut n) = (0, 0, 0);
    assert_eq!(
        unsafe { jetflow_system_shape(sys, &mut dim, &mut order, &mut n) },
        JetflowStatus::Ok
    );
    assert_eq!((dim, order, n), (2, 2, 2));

    let mut h0 = 0.0;
    assert_eq!(unsafe { jetflow_system_hamiltonian(sys, &mut h0) }, JetflowStatus::Ok);
    assert!(h0 > 0.0);

    let mut needed = 0;
    assert_eq!(
        unsafe { jetflow_system_coordinates(sys, ptr::null_mut(), 0, &mut needed) },
        JetflowStatus::Ok
    );
    assert_eq!(needed, 2 * 2 * (2 + 4 + 8));
    let mut coords = vec![0.0; needed];
    assert_eq!(
        unsafe { jetflow_system_coordinates(sys, coords.as_mut_ptr(), coords.len(), ptr::null_mut()) },
        JetflowStatus::Ok
    );
    assert_eq!(&coords[..2], &[-0.5, 0.0]);

    let mut traj = ptr::null_mut();
    assert_eq!(
        unsafe { jetflow_integrate(sys, 1.0, 0.05, &mut traj) },
        JetflowStatus::Ok
    );
    let len = unsafe { jetflow_trajectory_len(traj) };
    assert_eq!(len, 21);
    let mut t = 0.0;
    assert_eq!(
        unsafe { jetflow_trajectory_time(traj, len - 1, &mut t) },
        JetflowStatus::Ok
    );
    assert_eq!(t, 1.0);

    let mut last = ptr::null_mut();
    assert_eq!(
        unsafe { jetflow_trajectory_state(traj, len - 1, &mut last) },
        JetflowStatus::Ok
    );
    let mut h1 = 0.0;
    unsafe { jetflow_system_hamiltonian(last, &mut h1) };
    assert!((h1 - h0).abs() <= 1e-5 * h0.max(1.0));

    let mut json = ptr::null_mut();
    assert_eq!(
        unsafe { jetflow_trajectory_to_json(traj, &mut json) },
        JetflowStatus::Ok
    );
    let value: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
    assert_eq!(value["states"].as_array().unwrap().len(), 21);

    let mut report = ptr::null_mut();
    assert_eq!(
        unsafe { jetflow_trajectory_audit_json(traj, &mut report) },
        JetflowStatus::Ok
    );
    assert!(take_string(report).contains("noether_s12[1]"));

    unsafe {
        jetflow_system_free(last);
        jetflow_trajectory_free(traj);
        jetflow_system_free(sys);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let (status, msg) = system("{\"dim\": 2", None).unwrap_err();
    assert_eq!(status, JetflowStatus::InvalidInput);
    assert!(!msg.is_empty());

    let (status, msg) = system(
        r#"{"dim":1,"order":0,"kernel":{},"integrator":{"dt":0.1,"t_final":1},"particles":[{"q":[0]},{"q":[0]}]}"#,
        None,
    )
    .unwrap_err();
    assert_eq!(status, JetflowStatus::InvalidInput);
    assert!(msg.contains("same initial position"), "{msg}");

    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { jetflow_system_from_json(ptr::null(), ptr::null(), &mut out) },
        JetflowStatus::NullPointer
    );
    let bytes = [0xffu8, 0xfe, 0x00];
    assert_eq!(
        unsafe { jetflow_system_from_json(bytes.as_ptr().cast(), ptr::null(), &mut out) },
        JetflowStatus::InvalidUtf8
    );

    let wild = system(
        r#"{"dim":1,"order":2,"kernel":{"sigma":0.1},"integrator":{"dt":0.5,"t_final":1},
            "particles":[{"q":[0],"pi_s":[[[1e8]]]},{"q":[0.05],"pi_q":[-1e8]}]}"#,
        None,
    )
    .unwrap();
    let mut traj = ptr::null_mut();
    assert_eq!(
        unsafe { jetflow_integrate(wild, 1.0, 0.5, &mut traj) },
        JetflowStatus::Divergence
    );
    assert!(traj.is_null());
    assert!(last_error().contains("step"));
    assert_eq!(
        unsafe { jetflow_integrate(wild, 1.0, -1.0, &mut traj) },
        JetflowStatus::InvalidInput
    );

    assert_eq!(
        unsafe { jetflow_integrate(wild, 0.0, 0.1, &mut traj) },
        JetflowStatus::Ok
    );
    let mut t = 0.0;
    assert_eq!(
        unsafe { jetflow_trajectory_time(traj, 1, &mut t) },
        JetflowStatus::OutOfRange
    );
    let mut q = [0.0; 1];
    assert_eq!(
        unsafe { jetflow_trajectory_position(traj, 0, 5, q.as_mut_ptr(), 1) },
        JetflowStatus::OutOfRange
    );
    assert_eq!(
        unsafe { jetflow_trajectory_position(traj, 0, 1, q.as_mut_ptr(), 1) },
        JetflowStatus::Ok
    );
    assert_eq!(q, [0.05]);
    assert_eq!(
        unsafe { jetflow_trajectory_position(traj, 0, 1, q.as_mut_ptr(), 0) },
        JetflowStatus::BufferTooSmall
    );
    let mut report = ptr::null_mut();
    assert_eq!(
        unsafe { jetflow_trajectory_audit_json(traj, &mut report) },
        JetflowStatus::InvalidInput
    );
    assert!(report.is_null());

    assert_eq!(
        unsafe { jetflow_system_hamiltonian(ptr::null(), &mut t) },
        JetflowStatus::NullPointer
    );
    assert_eq!(unsafe { jetflow_trajectory_len(ptr::null()) }, 0);
    unsafe {
        jetflow_trajectory_free(traj);
        jetflow_system_free(wild);
        jetflow_system_free(ptr::null_mut());
        jetflow_string_free(ptr::null_mut());
    }
}

#[test]
fn success_clears_the_last_error() {
    assert!(system("[", None).is_err());
    assert!(!last_error().is_empty());
    let sys = system(CONFIG, None).unwrap();
    assert!(last_error().is_empty());
    unsafe { jetflow_system_free(sys) };
}

#[test]
fn version_matches_the_package() {
    let v = unsafe { CStr::from_ptr(jetflow_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

#[test]
fn header_declares_the_exported_symbols() {
    let header = std::fs::read_to_string(header_dir().join("jetflow.h")).unwrap();
    for name in [
        "jetflow_last_error",
        "jetflow_version",
        "jetflow_system_from_json",
        "jetflow_system_free",
        "jetflow_system_shape",
        "jetflow_system_hamiltonian",
        "jetflow_system_coordinates",
        "jetflow_integrate",
        "jetflow_trajectory_free",
        "jetflow_trajectory_len",
        "jetflow_trajectory_time",
        "jetflow_trajectory_position",
        "jetflow_trajectory_state",
        "jetflow_trajectory_to_json",
        "jetflow_trajectory_audit_json",
        "jetflow_string_free",
        "JETFLOW_STATUS_DIVERGENCE",
        "typedef struct JetflowSystem JetflowSystem",
    ] {
        assert!(header.contains(name), "{name}");
    }
}

/// Compiles and runs a C program against the header and static library.
#[test]
fn c_program_links_and_runs() {
    let Some(cc) = ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
    else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib = deps.parent().unwrap().join("libjetflow_ffi.a");
    assert!(lib.exists(), "{} missing", lib.display());
    let dir = tempfile_dir();
    let exe = dir.join("smoke");
    let status = Command::new(cc)
        .arg(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/c/smoke.c"))
        .arg("-I")
        .arg(header_dir())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let line = String::from_utf8(out.stdout).unwrap();
    let fields: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(fields[0], "101");
    assert_eq!(fields[1].parse::<f64>().unwrap(), 0.25);
    assert_eq!(fields[4], "1");
    let _ = std::fs::remove_dir_all(dir);
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("jetflow-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

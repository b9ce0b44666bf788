use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use qek_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(qek_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn new_model(arch: QekArchitecture, n: usize, layers: usize) -> *mut QekModel {
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { qek_model_new(arch, n, layers, 1.0, &mut m) },
        QekStatus::Ok
    );
    assert!(!m.is_null());
    m
}

#[test]
fn version_is_nonempty() {
    let v = unsafe { CStr::from_ptr(qek_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn model_lifecycle_and_params() {
    let m = new_model(QekArchitecture::DataWeaved, 3, 2);
    unsafe {
        assert_eq!(qek_model_param_count(m), 12);
        assert_eq!(qek_model_init_params(m, 4), QekStatus::Ok);
        let mut theta = vec![0.0; 12];
        assert_eq!(
            qek_model_get_params(m, theta.as_mut_ptr(), 12),
            QekStatus::Ok
        );
        assert!(theta
            .iter()
            .all(|t| (0.0..std::f64::consts::TAU).contains(t)));
        let fresh: Vec<f64> = (0..12).map(|i| i as f64 * 0.1).collect();
        assert_eq!(qek_model_set_params(m, fresh.as_ptr(), 12), QekStatus::Ok);
        assert_eq!(
            qek_model_get_params(m, theta.as_mut_ptr(), 12),
            QekStatus::Ok
        );
        assert_eq!(theta, fresh);
        assert_eq!(
            qek_model_set_params(m, fresh.as_ptr(), 11),
            QekStatus::DimensionMismatch
        );
        assert!(last_error().contains("expected 12"));

        let mut counts = QekGateCounts::default();
        assert_eq!(qek_gate_counts(m, &mut counts), QekStatus::Ok);
        assert_eq!((counts.one_qubit, counts.two_qubit), (24, 6));
        qek_model_free(m);
        qek_model_free(ptr::null_mut());
    }
}

#[test]
fn invalid_construction() {
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(
            qek_model_new(QekArchitecture::DataFirst, 0, 1, 1.0, &mut m),
            QekStatus::InvalidArgument
        );
        assert!(m.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(
            qek_model_new(QekArchitecture::DataFirst, 2, 1, 1.0, ptr::null_mut()),
            QekStatus::NullPointer
        );
        assert_eq!(qek_model_param_count(ptr::null()), 0);
    }
}

#[test]
fn single_qubit_kernel_closed_form() {
    let m = new_model(QekArchitecture::DataWeaved, 1, 0);
    for (a, b) in [(0.0, 0.0), (0.3, 1.1), (2.0, -1.0)] {
        let mut k = f64::NAN;
        assert_eq!(
            unsafe { qek_kernel_value(m, &a, &b, 1, &mut k) },
            QekStatus::Ok
        );
        let expected = ((a - b) / 2.0f64).cos().powi(2);
        assert!((k - expected).abs() < 1e-12, "{k} vs {expected}");
    }
    let mut k = 0.0;
    assert_eq!(
        unsafe { qek_kernel_value(m, [0.0, 1.0].as_ptr(), [0.0, 1.0].as_ptr(), 2, &mut k) },
        QekStatus::DimensionMismatch
    );
    unsafe { qek_model_free(m) };
}

#[test]
fn matrix_alignment_and_svm() {
    let m = new_model(QekArchitecture::DataLast, 2, 1);
    let points = [0.1, 0.2, 0.15, 0.1, 0.9, 0.8, 0.85, 0.95];
    let labels = [0u32, 0, 1, 1];
    let mut gram = vec![0.0; 16];
    unsafe {
        assert_eq!(qek_model_init_params(m, 1), QekStatus::Ok);
        assert_eq!(
            qek_kernel_matrix(m, points.as_ptr(), 4, 2, gram.as_mut_ptr()),
            QekStatus::Ok
        );
        for i in 0..4 {
            assert!((gram[i * 4 + i] - 1.0).abs() < 1e-10);
            for j in 0..4 {
                assert!((gram[i * 4 + j] - gram[j * 4 + i]).abs() < 1e-12);
            }
        }

        let mut a = 0.0;
        let ideal: Vec<f64> = (0..16)
            .map(|k| {
                if labels[k / 4] == labels[k % 4] {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        assert_eq!(
            qek_target_alignment(ideal.as_ptr(), labels.as_ptr(), 4, &mut a),
            QekStatus::Ok
        );
        assert!((a - 1.0).abs() < 1e-12);
        let zeros = [0.0; 16];
        assert_eq!(
            qek_target_alignment(zeros.as_ptr(), labels.as_ptr(), 4, &mut a),
            QekStatus::InvalidArgument
        );

        let mut svm = ptr::null_mut();
        assert_eq!(
            qek_svm_fit(ideal.as_ptr(), labels.as_ptr(), 4, 1.0, &mut svm),
            QekStatus::Ok
        );
        let mut predicted = [9u32; 4];
        assert_eq!(
            qek_svm_predict(svm, ideal.as_ptr(), 4, 4, predicted.as_mut_ptr()),
            QekStatus::Ok
        );
        assert_eq!(predicted, labels);
        assert_eq!(
            qek_svm_predict(svm, ideal.as_ptr(), 4, 3, predicted.as_mut_ptr()),
            QekStatus::DimensionMismatch
        );
        qek_svm_free(svm);

        let same = [1u32; 4];
        let mut svm = ptr::null_mut();
        assert_eq!(
            qek_svm_fit(ideal.as_ptr(), same.as_ptr(), 4, 1.0, &mut svm),
            QekStatus::NumericFailure
        );
        qek_model_free(m);
    }
}

#[test]
fn erase_check_report() {
    let mut r = QekEraseReport::default();
    let status = unsafe { qek_erase_check(QekArchitecture::DataFirst, 5, 1, 20, 0, &mut r) };
    assert_eq!(status, QekStatus::Ok);
    assert_eq!(r.erased, 20);
    assert_eq!((r.before.one_qubit, r.before.two_qubit), (30, 10));
    assert_eq!((r.after.one_qubit, r.after.two_qubit), (20, 0));
    assert!(r.passed);
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok()
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(crate_dir().join("include/qek.h")).unwrap();
    for f in [
        "qek_version",
        "qek_last_error",
        "qek_model_new",
        "qek_model_free",
        "qek_model_param_count",
        "qek_model_get_params",
        "qek_model_set_params",
        "qek_model_init_params",
        "qek_gate_counts",
        "qek_kernel_value",
        "qek_kernel_matrix",
        "qek_target_alignment",
        "qek_erase_check",
        "qek_svm_fit",
        "qek_svm_predict",
        "qek_svm_free",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("typedef struct QekModel QekModel;"));
}

#[test]
fn header_compiles_as_c() {
    if !have_cc() {
        eprintln!("cc not available; skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"qek.h\"\nint main(void) { QekModel *m = 0; (void)m; return QEK_STATUS_OK; }\n",
    )
    .unwrap();
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(crate_dir().join("include"))
        .arg(&src)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn staticlib() -> Option<PathBuf> {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().ok()?;
    let lib = exe.parent()?.parent()?.join("libqek_ffi.a");
    lib.exists().then_some(lib)
}

#[test]
fn c_program_links_and_runs() {
    let Some(lib) = staticlib() else {
        eprintln!("static library not found; skipping");
        return;
    };
    if !have_cc() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let exe = dir.path().join("probe");
    let out = Command::new("cc")
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(Path::new(&exe)).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(
        run.status.success(),
        "{stdout}{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert_eq!(stdout.trim(), "ok 20");
}

const C_PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "qek.h"

int main(void) {
    QekModel *m = NULL;
    if (qek_model_new(QEK_ARCHITECTURE_DATA_WEAVED, 1, 0, 1.0, &m) != QEK_STATUS_OK) return 1;
    double x = 0.4, y = 1.3, k = 0.0;
    if (qek_kernel_value(m, &x, &y, 1, &k) != QEK_STATUS_OK) return 2;
    double c = cos((x - y) / 2.0);
    if (fabs(k - c * c) > 1e-12) return 3;
    qek_model_free(m);
    QekEraseReport r;
    if (qek_erase_check(QEK_ARCHITECTURE_DATA_FIRST, 5, 1, 5, 0, &r) != QEK_STATUS_OK) return 4;
    if (!r.passed) return 5;
    printf("ok %zu\n", r.erased);
    return 0;
}
"#;

use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use l2p_select_ffi::*;

/// Two informative columns out of six, 12 samples, two classes.
fn toy() -> (Vec<f64>, Vec<usize>, usize, usize) {
    let (rows, cols) = (12, 6);
    let mut features = Vec::with_capacity(rows * cols);
    let mut labels = Vec::with_capacity(rows);
    for i in 0..rows {
        let class = i % 2 + 1;
        let sign = if class == 1 { 1.0 } else { -1.0 };
        for j in 0..cols {
            let wobble = ((i * 7 + j * 13) % 11) as f64 / 11.0 - 0.5;
            let v = if j < 2 { 3.0 * sign + 0.3 * wobble } else { wobble };
            features.push(v);
        }
        labels.push(class);
    }
    (features, labels, rows, cols)
}

fn last_error() -> String {
    let p = l2p_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn select_round_trip() {
    let (features, labels, rows, cols) = toy();
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(
            l2p_dataset_from_dense(features.as_ptr(), rows, cols, labels.as_ptr(), 2, &mut ds),
            L2pStatus::Ok
        );
        assert_eq!(l2p_dataset_normalize(ds), L2pStatus::Ok);
        let (mut r, mut c) = (0, 0);
        assert_eq!(l2p_dataset_shape(ds, &mut r, &mut c), L2pStatus::Ok);
        assert_eq!((r, c), (rows, cols));

        let mut config = l2p_config_default();
        config.d = 2;
        let mut result = ptr::null_mut();
        assert_eq!(l2p_select(ds, &config, &mut result), L2pStatus::Ok);

        let mut selected = [usize::MAX; 2];
        let mut written = 0;
        assert_eq!(
            l2p_result_selected(result, selected.as_mut_ptr(), 2, &mut written),
            L2pStatus::Ok
        );
        assert_eq!(written, 2);
        let mut sorted = selected;
        sorted.sort();
        assert_eq!(sorted, [0, 1]);

        let mut norms = vec![0.0; cols];
        assert_eq!(
            l2p_result_row_norms(result, norms.as_mut_ptr(), cols, &mut written),
            L2pStatus::Ok
        );
        assert_eq!(written, cols);
        assert!(norms.iter().all(|&v| v >= 0.0));
        assert!(l2p_result_objective(result).is_finite());
        assert!(l2p_result_iterations(result) >= 1);
        let _ = l2p_result_converged(result);

        l2p_result_free(result);
        l2p_dataset_free(ds);
    }
}

#[test]
fn short_buffer_reports_needed_length() {
    let (features, labels, rows, cols) = toy();
    unsafe {
        let mut ds = ptr::null_mut();
        l2p_dataset_from_dense(features.as_ptr(), rows, cols, labels.as_ptr(), 2, &mut ds);
        let mut config = l2p_config_default();
        config.d = 3;
        let mut result = ptr::null_mut();
        assert_eq!(l2p_select(ds, &config, &mut result), L2pStatus::Ok);
        let mut one = [0usize; 1];
        let mut written = 0;
        assert_eq!(
            l2p_result_selected(result, one.as_mut_ptr(), 1, &mut written),
            L2pStatus::BufferTooSmall
        );
        assert_eq!(written, 3);
        l2p_result_free(result);
        l2p_dataset_free(ds);
    }
}

#[test]
fn errors_map_to_codes() {
    let (features, labels, rows, cols) = toy();
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(
            l2p_dataset_from_dense(ptr::null(), rows, cols, labels.as_ptr(), 2, &mut ds),
            L2pStatus::NullPointer
        );
        assert!(ds.is_null());

        let bad_labels = vec![3usize; rows];
        assert_eq!(
            l2p_dataset_from_dense(features.as_ptr(), rows, cols, bad_labels.as_ptr(), 2, &mut ds),
            L2pStatus::InvalidArgument
        );
        assert!(!last_error().is_empty());

        l2p_dataset_from_dense(features.as_ptr(), rows, cols, labels.as_ptr(), 2, &mut ds);
        let mut config = l2p_config_default();
        config.p = 3.0;
        let mut result = ptr::null_mut();
        assert_eq!(l2p_select(ds, &config, &mut result), L2pStatus::InvalidArgument);
        assert!(last_error().contains("outside (0, 2]"));
        assert!(result.is_null());
        l2p_dataset_free(ds);

        let missing = CString::new("/nonexistent/data.csv").unwrap();
        assert_eq!(l2p_dataset_read_csv(missing.as_ptr(), false, &mut ds), L2pStatus::Io);

        // Null handles are tolerated by the accessors and free functions.
        assert!(l2p_result_objective(ptr::null()).is_nan());
        assert!(!l2p_result_converged(ptr::null()));
        l2p_result_free(ptr::null_mut());
        l2p_dataset_free(ptr::null_mut());
    }
}

#[test]
fn csv_reader_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ragged.csv");
    std::fs::write(&path, "1,2,1\n3,4\n").unwrap();
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut ds = ptr::null_mut();
    unsafe {
        assert_eq!(l2p_dataset_read_csv(c_path.as_ptr(), false, &mut ds), L2pStatus::Parse);
    }
    assert!(last_error().contains("ragged.csv:2"));
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/l2p_select.h");
    assert!(header.exists(), "header not generated");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"l2p_select.h\"\n\
         int main(void) {\n\
           L2pConfig c = l2p_config_default();\n\
           L2pDataset *ds = NULL;\n\
           L2pStatus s = l2p_dataset_read_csv(\"x.csv\", false, &ds);\n\
           return (int)s + (int)c.d;\n\
         }\n",
    )
    .unwrap();
    let Ok(output) = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
    else {
        eprintln!("no C compiler available, skipping");
        return;
    };
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
}

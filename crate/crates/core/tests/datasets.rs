use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::thread;

use qek::datasets::{
    self, fetch, normalize_minmax, reduce_features, select_split, sha256_hex, split_deviation,
    stratified_split, Dataset, FetchOutcome, Manifest, ManifestEntry, Pca, ReduceMethod,
};
use qek::Error;

fn wine_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/wine.data")
}

fn wine() -> Dataset {
    datasets::load(Manifest::builtin().entry("wine").unwrap(), &wine_path()).unwrap()
}

/// Serves `body` to the next `n` HTTP requests.
fn serve(body: Vec<u8>, n: usize) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for stream in listener.incoming().take(n) {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            while reader.read_line(&mut line).unwrap() > 0 && line != "\r\n" {
                line.clear();
            }
            let head = format!(
                "HTTP/1.1 200 OK\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                body.len()
            );
            stream.write_all(head.as_bytes()).unwrap();
            stream.write_all(&body).unwrap();
        }
    });
    format!("http://{addr}/wine.data")
}

fn entry_for(url: String, sha256: Option<String>) -> ManifestEntry {
    ManifestEntry {
        url,
        sha256,
        ..Manifest::builtin().entry("wine").unwrap().clone()
    }
}

#[test]
fn wine_shape() {
    let ds = wine();
    assert_eq!(
        (ds.n_samples(), ds.n_features(), ds.n_classes()),
        (178, 13, 3)
    );
}

#[test]
fn fetch_downloads_then_caches() {
    let body = std::fs::read(wine_path()).unwrap();
    let digest = sha256_hex(&body);
    let url = serve(body, 1);
    let dir = tempfile::tempdir().unwrap();
    let entry = entry_for(url, Some(digest.clone()));

    let first = fetch(&entry, dir.path()).unwrap();
    assert!(matches!(first, FetchOutcome::Downloaded { ref sha256, .. } if *sha256 == digest));
    assert_eq!(
        datasets::load(&entry, first.path()).unwrap().n_samples(),
        178
    );
    // the server accepts only one request, so a second download would fail
    let second = fetch(&entry, dir.path()).unwrap();
    assert!(matches!(second, FetchOutcome::Cached { .. }));
}

#[test]
fn fetch_rejects_wrong_digest() {
    let url = serve(b"1,2.0\n".to_vec(), 1);
    let dir = tempfile::tempdir().unwrap();
    let expected = "0".repeat(64);
    let entry = entry_for(url, Some(expected.clone()));
    match fetch(&entry, dir.path()) {
        Err(Error::Checksum {
            expected: e,
            actual,
            ..
        }) => {
            assert_eq!(e, expected);
            assert_eq!(actual, sha256_hex(b"1,2.0\n"));
        }
        other => panic!("expected checksum error, got {other:?}"),
    }
    assert!(!dir.path().join("wine.data").exists());
}

#[test]
fn unpinned_fetch_records_digest_and_detects_tampering() {
    let body = std::fs::read(wine_path()).unwrap();
    let url = serve(body.clone(), 1);
    let dir = tempfile::tempdir().unwrap();
    let entry = entry_for(url, None);
    fetch(&entry, dir.path()).unwrap();
    let sidecar = std::fs::read_to_string(dir.path().join("wine.data.sha256")).unwrap();
    assert_eq!(sidecar.trim(), sha256_hex(&body));

    std::fs::write(dir.path().join("wine.data"), b"tampered").unwrap();
    assert!(matches!(
        fetch(&entry, dir.path()),
        Err(Error::Checksum { .. })
    ));
}

#[test]
fn unreachable_host_is_network_error() {
    let dir = tempfile::tempdir().unwrap();
    let entry = entry_for("http://127.0.0.1:1/wine.data".into(), None);
    let err = fetch(&entry, dir.path()).unwrap_err();
    assert!(matches!(err, Error::Network { .. }), "{err:?}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn normalization_bounds_on_wine() {
    let ds = normalize_minmax(&wine()).unwrap();
    for j in 0..ds.n_features() {
        let col: Vec<f64> = ds.features.iter().map(|r| r[j]).collect();
        let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo.abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
    }
}

#[test]
fn wine_pca_components_are_orthonormal() {
    let ds = normalize_minmax(&wine()).unwrap();
    let pca = Pca::fit(&ds.features, 5).unwrap();
    let v = &pca.components;
    let vtv = v.transpose().matmul(v).unwrap();
    for i in 0..5 {
        for j in 0..5 {
            let e = if i == j { 1.0 } else { 0.0 };
            assert!((vtv[(i, j)] - e).abs() < 1e-10);
        }
    }
    assert!(pca.explained_variance.windows(2).all(|w| w[0] >= w[1]));

    let reduced = reduce_features(&ds, 5, ReduceMethod::Pca).unwrap();
    assert_eq!(reduced.n_features(), 5);
    assert!(reduced
        .features
        .iter()
        .flatten()
        .all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(reduced, reduce_features(&ds, 5, ReduceMethod::Pca).unwrap());
}

#[test]
fn wine_split_choice_is_optimal_over_candidates() {
    let ds = normalize_minmax(&wine()).unwrap();
    let chosen = select_split(&ds, 25, 0.75, 0).unwrap();
    let score = |seed| {
        let (tr, te) = stratified_split(&ds, 0.75, seed).unwrap();
        split_deviation(&tr, &te)
    };
    let best = score(chosen);
    for seed in 0..25 {
        let s = score(seed);
        assert!(best <= s, "seed {seed} scores {s} < chosen {best}");
        if seed < chosen {
            assert!(s > best, "earlier seed {seed} ties the chosen one");
        }
    }
}

#[test]
fn wine_split_partitions() {
    let ds = wine();
    for (fraction, seed) in [(0.75, 0), (0.5, 3), (0.2, 9), (0.9, 1)] {
        let (tr, te) = datasets::split_indices(&ds, fraction, seed).unwrap();
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..ds.n_samples()).collect::<Vec<_>>());
        let (a, b) = stratified_split(&ds, fraction, seed).unwrap();
        assert!(a.class_counts().iter().all(|&c| c >= 1));
        assert!(b.class_counts().iter().all(|&c| c >= 1));
    }
}

//! Helpers shared by the integration test binaries.

#![allow(dead_code)]

use ndarray::Array2;
use serde::Deserialize;
use std::path::{Path, PathBuf};

/// Adjusted Rand index between two labelings of the same points. Noise
/// labels (-1) are treated as ordinary labels, so two clusterings agree
/// only if they also agree on what is noise.
pub fn adjusted_rand_index(a: &[i64], b: &[i64]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same points");
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut both = 0u64;
    let mut in_a = 0u64;
    let mut in_b = 0u64;
    for i in 0..n {
        for j in (i + 1)..n {
            let same_a = a[i] == a[j];
            let same_b = b[i] == b[j];
            if same_a {
                in_a += 1;
            }
            if same_b {
                in_b += 1;
            }
            if same_a && same_b {
                both += 1;
            }
        }
    }
    let pairs = (n as u64 * (n as u64 - 1) / 2) as f64;
    let expected = in_a as f64 * in_b as f64 / pairs;
    let max_index = (in_a + in_b) as f64 / 2.0;
    if (max_index - expected).abs() < 1e-12 {
        return 1.0;
    }
    (both as f64 - expected) / (max_index - expected)
}

#[derive(Debug, Deserialize)]
pub struct ClusterFixture {
    pub file: String,
    pub n_points: usize,
    pub dim: usize,
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub reference_clusters: usize,
    pub reference_noise: usize,
}

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn load_cluster_manifest() -> Vec<ClusterFixture> {
    let path = fixtures_dir().join("hdbscan/manifest.json");
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()));
    serde_json::from_str(&text).expect("manifest parses")
}

/// Loads a fixture CSV of `f0..f{d-1},label` rows.
pub fn load_cluster_fixture(fixture: &ClusterFixture) -> (Array2<f64>, Vec<i64>) {
    let path = fixtures_dir().join("hdbscan").join(&fixture.file);
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()));
    let mut points = Vec::with_capacity(fixture.n_points * fixture.dim);
    let mut labels = Vec::with_capacity(fixture.n_points);
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), fixture.dim + 1, "bad row in {}", fixture.file);
        for value in &fields[..fixture.dim] {
            points.push(value.parse::<f64>().expect("float field"));
        }
        labels.push(fields[fixture.dim].parse::<i64>().expect("label field"));
    }
    let matrix = Array2::from_shape_vec((labels.len(), fixture.dim), points).unwrap();
    assert_eq!(matrix.nrows(), fixture.n_points, "{} row count", fixture.file);
    (matrix, labels)
}

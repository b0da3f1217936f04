#!/usr/bin/env python3
"""Regenerates the frozen HDBSCAN reference fixtures.

Each dataset is a CSV of points with the labels scikit-learn's HDBSCAN
assigns, plus a manifest recording the parameters. The Rust test suite
checks its own implementation against these files, so they are committed
and this script is only needed to regenerate them.

Parameter mapping: scikit-learn counts a point as its own first neighbor
when computing core distances, while this project counts neighbors among
*other* points only. A run here with min_samples=m therefore corresponds
to a Rust run with min_samples=m-1; the manifest stores the Rust-side
value.

Requires: numpy, scikit-learn (generated with 1.7.2).
"""

import json
import os

import numpy as np
from sklearn.cluster import HDBSCAN

HERE = os.path.dirname(os.path.abspath(__file__))

DATASETS = [
    # (name, seed, dim, [(center_scale, spread, count)...], noise_count, mcs, rust_min_samples)
    ("blobs_00", 0, 2, [(0, 1.0, 120), (1, 1.0, 120), (2, 1.0, 120)], 20, 15, 14),
    ("blobs_01", 1, 2, [(0, 0.8, 80), (1, 1.2, 150), (2, 0.6, 60), (3, 1.0, 100)], 30, 12, 11),
    ("blobs_02", 2, 3, [(0, 1.0, 100), (1, 1.0, 100), (2, 1.0, 100)], 0, 20, 19),
    ("blobs_03", 3, 4, [(0, 1.5, 130), (1, 1.5, 130)], 40, 25, 24),
    ("blobs_04", 4, 2, [(0, 0.5, 60), (1, 0.5, 60), (2, 0.5, 60), (3, 0.5, 60), (4, 0.5, 60)], 25, 10, 9),
    ("blobs_05", 5, 5, [(0, 1.0, 150), (1, 1.0, 150), (2, 1.0, 150)], 50, 18, 17),
    ("blobs_06", 6, 2, [(0, 2.0, 200), (1, 1.0, 90)], 15, 15, 14),
    ("blobs_07", 7, 3, [(0, 0.7, 70), (1, 0.9, 110), (2, 1.1, 140), (3, 0.8, 90)], 35, 14, 13),
    ("blobs_08", 8, 8, [(0, 1.2, 120), (1, 1.2, 120), (2, 1.2, 120)], 20, 16, 15),
    ("blobs_09", 9, 2, [(0, 1.0, 250), (1, 1.0, 250), (2, 1.0, 100)], 60, 30, 29),
]


def make_dataset(seed, dim, blobs, noise_count):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-12.0, 12.0, size=(len(blobs), dim))
    parts = []
    for (idx, spread, count), center in zip(blobs, centers):
        parts.append(center + spread * rng.standard_normal((count, dim)))
    if noise_count:
        lo = centers.min() - 4.0
        hi = centers.max() + 4.0
        parts.append(rng.uniform(lo, hi, size=(noise_count, dim)))
    points = np.vstack(parts)
    order = rng.permutation(len(points))
    return points[order]


def main():
    manifest = []
    for name, seed, dim, blobs, noise_count, mcs, rust_min_samples in DATASETS:
        points = make_dataset(seed, dim, blobs, noise_count)
        sk_min_samples = rust_min_samples + 1
        labels = HDBSCAN(
            min_cluster_size=mcs,
            min_samples=sk_min_samples,
            cluster_selection_method="eom",
        ).fit_predict(points)

        path = os.path.join(HERE, f"{name}.csv")
        with open(path, "w") as f:
            f.write(",".join(f"f{i}" for i in range(dim)) + ",label\n")
            for row, label in zip(points, labels):
                coords = ",".join(f"{v:.17g}" for v in row)
                f.write(f"{coords},{label}\n")

        n_clusters = int(labels.max()) + 1 if labels.max() >= 0 else 0
        manifest.append(
            {
                "file": f"{name}.csv",
                "n_points": int(len(points)),
                "dim": int(dim),
                "min_cluster_size": int(mcs),
                "min_samples": int(rust_min_samples),
                "reference_clusters": n_clusters,
                "reference_noise": int((labels == -1).sum()),
            }
        )
        print(f"{name}: {len(points)} pts, {n_clusters} clusters, {(labels == -1).sum()} noise")

    with open(os.path.join(HERE, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()

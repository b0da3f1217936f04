//! Small deterministic linear-algebra kernels: a cyclic Jacobi eigensolver
//! for small symmetric matrices and a seeded randomized truncated SVD that
//! works on anything implementing [`LinearOp`]. All randomness comes from a
//! caller-supplied seed, so repeated runs are bit-identical.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::vectorizer::TermDocMatrix;

/// Matrix seen only through products with dense blocks.
pub trait LinearOp {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `A * b`, where `b` is `ncols x k`.
    fn mul(&self, b: &Array2<f64>) -> Array2<f64>;
    /// `A^T * b`, where `b` is `nrows x k`.
    fn t_mul(&self, b: &Array2<f64>) -> Array2<f64>;
}

impl LinearOp for TermDocMatrix {
    fn nrows(&self) -> usize {
        self.n_rows()
    }
    fn ncols(&self) -> usize {
        self.n_cols()
    }
    fn mul(&self, b: &Array2<f64>) -> Array2<f64> {
        self.mul_dense(b)
    }
    fn t_mul(&self, b: &Array2<f64>) -> Array2<f64> {
        self.t_mul_dense(b)
    }
}

impl LinearOp for Array2<f64> {
    fn nrows(&self) -> usize {
        self.shape()[0]
    }
    fn ncols(&self) -> usize {
        self.shape()[1]
    }
    fn mul(&self, b: &Array2<f64>) -> Array2<f64> {
        self.dot(b)
    }
    fn t_mul(&self, b: &Array2<f64>) -> Array2<f64> {
        self.t().dot(b)
    }
}

/// Eigendecomposition of a small symmetric matrix by cyclic Jacobi
/// rotations. Returns eigenvalues in descending order with matching
/// eigenvector columns.
pub fn jacobi_eigh(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);

    let off_diag_sq = |m: &Array2<f64>| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += m[(p, q)] * m[(p, q)];
            }
        }
        s
    };
    let scale = a.iter().map(|x| x * x).sum::<f64>().max(1e-300);

    for _ in 0..100 {
        if off_diag_sq(&m) <= 1e-28 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let mip = m[(i, p)];
                    let miq = m[(i, q)];
                    m[(i, p)] = c * mip - s * miq;
                    m[(i, q)] = s * mip + c * miq;
                }
                for i in 0..n {
                    let mpi = m[(p, i)];
                    let mqi = m[(q, i)];
                    m[(p, i)] = c * mpi - s * mqi;
                    m[(q, i)] = s * mpi + c * mqi;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = c * vip - s * viq;
                    v[(i, q)] = s * vip + c * viq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].partial_cmp(&m[(i, i)]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Array2::<f64>::zeros((n, n));
    for (col, &i) in order.iter().enumerate() {
        for row in 0..n {
            vectors[(row, col)] = v[(row, i)];
        }
    }
    (eigenvalues, vectors)
}

/// Orthonormalizes the columns of `y` in place with twice-applied modified
/// Gram-Schmidt. Columns that become numerically zero are left as zeros.
fn orthonormalize(y: &mut Array2<f64>) {
    let (n, k) = (y.nrows(), y.ncols());
    for j in 0..k {
        for _pass in 0..2 {
            for prev in 0..j {
                let mut dot = 0.0;
                for i in 0..n {
                    dot += y[(i, prev)] * y[(i, j)];
                }
                for i in 0..n {
                    let subtract = dot * y[(i, prev)];
                    y[(i, j)] -= subtract;
                }
            }
        }
        let norm = (0..n).map(|i| y[(i, j)] * y[(i, j)]).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for i in 0..n {
                y[(i, j)] /= norm;
            }
        } else {
            for i in 0..n {
                y[(i, j)] = 0.0;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// `nrows x k`, orthonormal columns.
    pub u: Array2<f64>,
    /// Singular values, descending.
    pub s: Vec<f64>,
    /// `k x ncols`, orthonormal rows.
    pub vt: Array2<f64>,
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; u1 away from zero keeps the log finite.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Rank-`k` randomized SVD with subspace (power) iteration. Deterministic
/// for a fixed seed. Suited to the small ranks used here (topic counts and
/// reduced embedding dimensions), not to high-precision full decompositions.
pub fn truncated_svd(a: &dyn LinearOp, k: usize, seed: u64) -> TruncatedSvd {
    let (d, n) = (a.nrows(), a.ncols());
    let max_rank = d.min(n);
    let k = k.min(max_rank).max(1);
    let l = (k + 8).min(max_rank);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut omega = Array2::<f64>::zeros((n, l));
    for i in 0..n {
        for j in 0..l {
            omega[(i, j)] = gaussian(&mut rng);
        }
    }

    let mut q = a.mul(&omega);
    orthonormalize(&mut q);
    for _ in 0..2 {
        let mut z = a.t_mul(&q);
        orthonormalize(&mut z);
        q = a.mul(&z);
        orthonormalize(&mut q);
    }

    // b = q^T a, computed as (a^T q)^T, so only operator products are needed.
    let bt = a.t_mul(&q); // n x l
    let b = bt.t().to_owned(); // l x n
    let gram = b.dot(&b.t()); // l x l
    let (eigenvalues, p) = jacobi_eigh(&gram);

    let mut u = Array2::<f64>::zeros((d, k));
    let mut s = vec![0.0; k];
    let mut vt = Array2::<f64>::zeros((k, n));
    let qp = q.dot(&p); // d x l
    for comp in 0..k {
        let sigma = eigenvalues[comp].max(0.0).sqrt();
        s[comp] = sigma;
        for i in 0..d {
            u[(i, comp)] = qp[(i, comp)];
        }
        if sigma > 1e-12 {
            for j in 0..n {
                let mut dot = 0.0;
                for row in 0..b.nrows() {
                    dot += b[(row, j)] * p[(row, comp)];
                }
                vt[(comp, j)] = dot / sigma;
            }
        }
    }

    // Fix the sign ambiguity: the largest-magnitude entry of each left
    // singular vector is made positive (lowest index wins ties).
    for comp in 0..k {
        let mut best = 0usize;
        for i in 1..d {
            if u[(i, comp)].abs() > u[(best, comp)].abs() {
                best = i;
            }
        }
        if u[(best, comp)] < 0.0 {
            for i in 0..d {
                u[(i, comp)] = -u[(i, comp)];
            }
            for j in 0..n {
                vt[(comp, j)] = -vt[(comp, j)];
            }
        }
    }

    TruncatedSvd { u, s, vt }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn jacobi_recovers_known_eigenvalues() {
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let (vals, vecs) = jacobi_eigh(&a);
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        // A v = lambda v for the top pair.
        let av = a.dot(&vecs.column(0).to_owned());
        for i in 0..2 {
            assert!((av[i] - 3.0 * vecs[(i, 0)]).abs() < 1e-10);
        }
    }

    #[test]
    fn jacobi_handles_diagonal_and_larger_matrices() {
        let a = array![[5.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 2.0]];
        let (vals, _) = jacobi_eigh(&a);
        assert_eq!(vals.len(), 3);
        assert!((vals[0] - 5.0).abs() < 1e-12);
        assert!((vals[1] - 2.0).abs() < 1e-12);
        assert!((vals[2] + 1.0).abs() < 1e-12);
    }

    fn reconstruction(svd: &TruncatedSvd) -> Array2<f64> {
        let k = svd.s.len();
        let mut scaled = svd.vt.clone();
        for comp in 0..k {
            for j in 0..scaled.ncols() {
                scaled[(comp, j)] *= svd.s[comp];
            }
        }
        svd.u.dot(&scaled)
    }

    #[test]
    fn svd_is_exact_on_low_rank_matrices() {
        // Rank-2 matrix built from two outer products.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (d, n) = (40, 25);
        let mut a = Array2::<f64>::zeros((d, n));
        for comp in 0..2 {
            let u: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
            let v: Vec<f64> = (0..n).map(|_| gaussian(&mut rng)).collect();
            let weight = if comp == 0 { 3.0 } else { 1.0 };
            for i in 0..d {
                for j in 0..n {
                    a[(i, j)] += weight * u[i] * v[j];
                }
            }
        }
        let svd = truncated_svd(&a, 2, 11);
        let err = (&a - &reconstruction(&svd))
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(err / norm < 1e-9, "relative error {}", err / norm);
        assert!(svd.s[0] >= svd.s[1]);
    }

    #[test]
    fn svd_singular_values_match_a_diagonal_construction() {
        // Diagonal-ish matrix with known singular values 4, 2, 1.
        let mut a = Array2::<f64>::zeros((6, 5));
        a[(0, 0)] = 4.0;
        a[(1, 1)] = 2.0;
        a[(2, 2)] = 1.0;
        let svd = truncated_svd(&a, 3, 3);
        assert!((svd.s[0] - 4.0).abs() < 1e-9);
        assert!((svd.s[1] - 2.0).abs() < 1e-9);
        assert!((svd.s[2] - 1.0).abs() < 1e-9);
        // Sign convention: dominant entries positive.
        assert!(svd.u[(0, 0)] > 0.99);
        assert!(svd.vt[(0, 0)] > 0.99);
    }

    #[test]
    fn svd_is_deterministic_for_a_fixed_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut a = Array2::<f64>::zeros((30, 20));
        for v in a.iter_mut() {
            *v = rng.gen::<f64>();
        }
        let s1 = truncated_svd(&a, 5, 99);
        let s2 = truncated_svd(&a, 5, 99);
        assert_eq!(s1.s, s2.s);
        assert_eq!(s1.u, s2.u);
        assert_eq!(s1.vt, s2.vt);
    }

    #[test]
    fn sparse_operator_agrees_with_dense() {
        let x = TermDocMatrix::from_columns(
            4,
            vec![vec![(0, 1.0), (2, 0.5)], vec![(1, 2.0)], vec![(0, 3.0), (3, 1.0)]],
        )
        .unwrap();
        let dense = x.to_dense();
        let sparse_svd = truncated_svd(&x, 3, 5);
        let dense_svd = truncated_svd(&dense, 3, 5);
        for i in 0..3 {
            assert!((sparse_svd.s[i] - dense_svd.s[i]).abs() < 1e-10);
        }
    }
}

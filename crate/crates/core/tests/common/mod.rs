//! Independent reference implementations and input generators for tests.
#![allow(dead_code)]

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sosunmix::amuse::{RotationMode, UnmixingModel, Whitener};
use sosunmix::spectra_model::{HyperspectralCube, WavelengthGrid};
use sosunmix::Matrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    let normal = Normal::new(0.0, 1.0).unwrap();
    Matrix::from_fn(rows, cols, |_, _| normal.sample(rng))
}

pub fn random_nonneg(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(0.0..1.0))
}

pub fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut acc = 0.0;
            for k in 0..a.ncols() {
                acc += a[(i, k)] * b[(k, j)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// `(1/T) sum_k x(k) x(k)^T` by explicit loops.
pub fn naive_covariance(x: &Matrix) -> Matrix {
    let (m, t) = x.shape();
    let mut out = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let mut acc = 0.0;
            for k in 0..t {
                acc += x[(i, k)] * x[(j, k)];
            }
            out[(i, j)] = acc / t as f64;
        }
    }
    out
}

/// `1/(T - tau) sum_{k = tau}^{T-1} x(k) x(k - tau)^T` by explicit loops.
pub fn naive_delayed(x: &Matrix, tau: usize) -> Matrix {
    let (n, t) = x.shape();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in tau..t {
                acc += x[(i, k)] * x[(j, k - tau)];
            }
            out[(i, j)] = acc / (t - tau) as f64;
        }
    }
    out
}

/// Inverse of a small square matrix by Gauss-Jordan with partial pivoting.
pub fn gauss_jordan_inverse(a: &Matrix) -> Matrix {
    let n = a.nrows();
    let mut aug = Matrix::zeros(n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            aug[(i, j)] = a[(i, j)];
        }
        aug[(i, n + i)] = 1.0;
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| aug[(p, col)].abs().total_cmp(&aug[(q, col)].abs()))
            .unwrap();
        aug.swap_rows(col, pivot);
        let d = aug[(col, col)];
        for j in 0..2 * n {
            aug[(col, j)] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = aug[(r, col)];
                for j in 0..2 * n {
                    aug[(r, j)] -= f * aug[(col, j)];
                }
            }
        }
    }
    Matrix::from_fn(n, n, |i, j| aug[(i, n + j)])
}

fn naive_unit_columns(a: &Matrix) -> Matrix {
    let mut out = a.clone();
    for j in 0..a.ncols() {
        let norm = (0..a.nrows())
            .map(|i| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        for i in 0..a.nrows() {
            out[(i, j)] = a[(i, j)] / norm;
        }
    }
    out
}

/// Amari index straight from its definition on unit-length columns, with
/// `pinv = (A^T A)^{-1} A^T`.
pub fn naive_amari(a_true: &Matrix, a_est: &Matrix) -> f64 {
    let a_true = naive_unit_columns(a_true);
    let a_est = naive_unit_columns(a_est);
    let at = a_est.transpose();
    let pinv = naive_matmul(&gauss_jordan_inverse(&naive_matmul(&at, &a_est)), &at);
    let g = naive_matmul(&pinv, &a_true);
    let n = g.nrows();
    let mut rows = 0.0;
    for i in 0..n {
        let max = (0..n).map(|j| g[(i, j)].abs()).fold(0.0, f64::max);
        rows += (0..n).map(|j| g[(i, j)].abs() / max).sum::<f64>() - 1.0;
    }
    let mut cols = 0.0;
    for j in 0..n {
        let max = (0..n).map(|i| g[(i, j)].abs()).fold(0.0, f64::max);
        cols += (0..n).map(|i| g[(i, j)].abs() / max).sum::<f64>() - 1.0;
    }
    (rows + cols) / (2.0 * n as f64 * (n as f64 - 1.0))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Brute-force best assignment by summed score, over all n! permutations.
pub fn brute_force_assignment(score: &[Vec<f64>]) -> (Vec<usize>, f64) {
    permutations(score.len())
        .into_iter()
        .map(|p| {
            let s = p.iter().enumerate().map(|(i, &j)| score[i][j]).sum::<f64>();
            (p, s)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
}

pub fn center_rows(x: &Matrix) -> Matrix {
    let mut c = x.clone();
    for mut row in c.row_iter_mut() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
    }
    c
}

fn sym_inv_sqrt(c: &Matrix) -> Matrix {
    let e = SymmetricEigen::new(c.clone());
    let d = e.eigenvalues.map(|l| 1.0 / l.sqrt());
    &e.eigenvectors * Matrix::from_diagonal(&d) * e.eigenvectors.transpose()
}

/// `n x t` sources whose in-sample lag-0 covariance is the identity and whose
/// symmetrized lag-`delay` covariance is diagonal with well-spread entries.
///
/// Built from AR(1) signals with distinct coefficients, then jointly
/// decorrelated by symmetric whitening and an eigen-rotation.
pub fn separable_sources(rng: &mut impl Rng, n: usize, t: usize, delay: usize) -> Matrix {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let coeffs = [0.95, 0.55, 0.1, -0.45];
    let mut z = Matrix::zeros(n, t);
    for i in 0..n {
        let phi: f64 = coeffs[i] + rng.random_range(-0.05..0.05);
        let mut prev = 0.0;
        for k in 0..t {
            prev = phi * prev + normal.sample(rng);
            z[(i, k)] = prev;
        }
    }
    let z = center_rows(&z);
    let y = sym_inv_sqrt(&(&z * z.transpose() / t as f64)) * z;
    let len = t - delay;
    let r = y.columns(delay, len) * y.columns(0, len).transpose() / len as f64;
    let rs = (&r + r.transpose()) * 0.5;
    let e = SymmetricEigen::new(rs);
    e.eigenvectors.transpose() * y
}

pub struct RandomCase {
    pub mixing: Matrix,
    pub sources: Matrix,
    pub cube: HyperspectralCube,
}

/// Noiseless exact-rank cube with `n <= m <= 8`, `n <= 4`, on `t` samples.
pub fn random_case(rng: &mut impl Rng, t: usize, delay: usize) -> RandomCase {
    let n = rng.random_range(1..=4);
    let m = rng.random_range(n..=8);
    let mut sources = separable_sources(rng, n, t, delay);
    for i in 0..n {
        let scale: f64 = rng.random_range(0.2..3.0);
        let offset: f64 = rng.random_range(0.0..2.0);
        let mut row = sources.row_mut(i);
        row *= scale;
        row.add_scalar_mut(offset);
    }
    let mixing = Matrix::from_fn(m, n, |_, _| rng.random_range(0.05..1.0));
    let grid = WavelengthGrid::new(400.0, 2.0, t).unwrap();
    let cube = HyperspectralCube::new(grid, &mixing * &sources).unwrap();
    RandomCase {
        mixing,
        sources,
        cube,
    }
}

/// A model carrying only `mixing` and `sources`; other fields are placeholders.
pub fn bare_model(mixing: Matrix, sources: Matrix) -> UnmixingModel {
    let n = sources.nrows();
    let m = mixing.nrows();
    let t = sources.ncols();
    UnmixingModel {
        grid: WavelengthGrid::new(0.0, 1.0, t).unwrap(),
        n_sources: n,
        delay: 1,
        mode: RotationMode::SymmetrizedEvd,
        whitener: Whitener {
            q: Matrix::zeros(n, m),
            q_pinv: Matrix::zeros(m, n),
        },
        means: vec![0.0; m],
        mixing_estimate: mixing,
        sources,
        rotation: Matrix::identity(n, n),
        delayed_spectrum: vec![0.0; n],
        signal_values: vec![1.0; n],
        noise_values: vec![],
        warnings: vec![],
        sign_correction: None,
    }
}

/// Flat `baseline` plus positive Gaussian bands `(center, width, height)`, in sample units.
pub fn peaked_row(t: usize, baseline: f64, peaks: &[(f64, f64, f64)]) -> Vec<f64> {
    (0..t)
        .map(|k| {
            let x = k as f64;
            baseline
                + peaks
                    .iter()
                    .map(|&(c, w, h)| h * (-0.5 * ((x - c) / w).powi(2)).exp())
                    .sum::<f64>()
        })
        .collect()
}

/// One to three positive peaks whose +-3 sigma supports together cover
/// less than `max_fraction` of the `t` samples.
pub fn random_peaks(rng: &mut impl Rng, t: usize, max_fraction: f64) -> Vec<(f64, f64, f64)> {
    let count = rng.random_range(1..=3usize);
    let budget = max_fraction * t as f64 / count as f64;
    // a peak spans about 6 sigma + 1 samples
    let max_width = ((budget - 1.0) / 6.0).max(0.31);
    (0..count)
        .map(|_| {
            let w: f64 = rng.random_range(0.3..max_width);
            let c = rng.random_range(3.0 * w + 1.0..t as f64 - 2.0 - 3.0 * w);
            (c, w, rng.random_range(0.2..2.0))
        })
        .collect()
}

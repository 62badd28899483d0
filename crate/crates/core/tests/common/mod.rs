//! Independent reference implementations and fixtures shared by the
//! integration tests. Nothing here calls into the library's numerics.

#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn normal_rows(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..p).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

pub fn uniform_rows(rng: &mut ChaCha8Rng, n: usize, p: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..p).map(|_| rng.random_range(lo..hi)).collect()).collect()
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let inner = b.len();
    let cols = b[0].len();
    a.iter().map(|row| (0..cols).map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum()).collect()).collect()
}

pub fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Random symmetric matrix with entries in [-1, 1].
pub fn random_symmetric(rng: &mut ChaCha8Rng, q: usize) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; q]; q];
    for i in 0..q {
        for j in i..q {
            let v = rng.random_range(-1.0..1.0);
            a[i][j] = v;
            a[j][i] = v;
        }
    }
    a
}

/// `MᵀM + I` for a random `M`.
pub fn random_spd(rng: &mut ChaCha8Rng, q: usize) -> Vec<Vec<f64>> {
    let m = normal_rows(rng, q, q);
    let mut s = matmul(&transpose(&m), &m);
    for (i, row) in s.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    s
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let q = a.len();
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..q).map(|j| f64::from(u8::from(i == j))));
            row
        })
        .collect();
    for col in 0..q {
        let piv = (col..q).max_by(|&x, &y| aug[x][col].abs().total_cmp(&aug[y][col].abs())).unwrap();
        aug.swap(col, piv);
        let d = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= d;
        }
        for r in 0..q {
            if r != col {
                let f = aug[r][col];
                if f != 0.0 {
                    let pivot_row = aug[col].clone();
                    for (v, pv) in aug[r].iter_mut().zip(pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
    }
    aug.into_iter().map(|r| r[q..].to_vec()).collect()
}

/// Lower-triangular `L` with `LLᵀ = A`.
pub fn cholesky_lower(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let q = a.len();
    let mut l = vec![vec![0.0; q]; q];
    for i in 0..q {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][j] = (a[i][i] - s).sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// Category probabilities written straight from the multinomial logit
/// formula: `exp(η_j) / (1 + Σ_k exp(η_k))`, reference last.
pub fn reference_probabilities(x: &[f64], betas: &[Vec<f64>]) -> Vec<f64> {
    let exps: Vec<f64> = betas.iter().map(|b| b.iter().zip(x).map(|(b, x)| b * x).sum::<f64>().exp()).collect();
    let denom = 1.0 + exps.iter().sum::<f64>();
    let mut p: Vec<f64> = exps.iter().map(|e| e / denom).collect();
    p.push(1.0 / denom);
    p
}

pub fn reference_log_likelihood(rows: &[Vec<f64>], codes: &[usize], betas: &[Vec<f64>]) -> f64 {
    rows.iter().zip(codes).map(|(x, &c)| reference_probabilities(x, betas)[c].ln()).sum()
}

/// Analytic gradient of [`reference_log_likelihood`]: `Σ_l x_l (y_lj − π_lj)`.
pub fn reference_gradient(rows: &[Vec<f64>], codes: &[usize], betas: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = rows[0].len();
    let mut g = vec![vec![0.0; p]; betas.len()];
    for (x, &c) in rows.iter().zip(codes) {
        let pi = reference_probabilities(x, betas);
        for (j, gj) in g.iter_mut().enumerate() {
            let r = f64::from(u8::from(c == j)) - pi[j];
            for (gi, xi) in gj.iter_mut().zip(x) {
                *gi += r * xi;
            }
        }
    }
    g
}

fn flatten(b: &[Vec<f64>]) -> Vec<f64> {
    b.iter().flatten().copied().collect()
}

fn unflatten(v: &[f64], p: usize) -> Vec<Vec<f64>> {
    v.chunks(p).map(<[f64]>::to_vec).collect()
}

/// Maximizes the multinomial log-likelihood by BFGS with a backtracking
/// Armijo line search, from zero.
pub fn bfgs_maximize(rows: &[Vec<f64>], codes: &[usize], m: usize) -> Vec<Vec<f64>> {
    let p = rows[0].len();
    let dim = p * (m - 1);
    let f = |v: &[f64]| -reference_log_likelihood(rows, codes, &unflatten(v, p));
    let g = |v: &[f64]| -> Vec<f64> {
        flatten(&reference_gradient(rows, codes, &unflatten(v, p))).into_iter().map(|x| -x).collect()
    };

    let mut x = vec![0.0; dim];
    let mut h: Vec<Vec<f64>> = (0..dim).map(|i| (0..dim).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let mut fx = f(&x);
    let mut gx = g(&x);
    for _ in 0..5000 {
        if gx.iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-8 {
            break;
        }
        let dir: Vec<f64> = h.iter().map(|r| -r.iter().zip(&gx).map(|(a, b)| a * b).sum::<f64>()).collect();
        let slope: f64 = dir.iter().zip(&gx).map(|(a, b)| a * b).sum();
        let mut t = 1.0;
        let mut xn;
        let mut fxn;
        loop {
            xn = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect::<Vec<_>>();
            fxn = f(&xn);
            if fxn <= fx + 1e-4 * t * slope || t < 1e-14 {
                break;
            }
            t *= 0.5;
        }
        if fxn >= fx {
            // any further decrease is below the floating-point resolution of f
            break;
        }
        let gn = g(&xn);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&gx).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-300 {
            let hy: Vec<f64> = h.iter().map(|r| r.iter().zip(&y).map(|(a, b)| a * b).sum()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..dim {
                for j in 0..dim {
                    h[i][j] += (sy + yhy) * s[i] * s[j] / (sy * sy) - (hy[i] * s[j] + s[i] * hy[j]) / sy;
                }
            }
        }
        x = xn;
        fx = fxn;
        gx = gn;
    }
    unflatten(&x, p)
}

/// Draws a category from probabilities by inverse CDF.
pub fn draw_category(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

/// A well-conditioned random multinomial sample with every level observed.
pub struct Sample {
    pub rows: Vec<Vec<f64>>,
    pub codes: Vec<usize>,
    pub truth: Vec<Vec<f64>>,
}

pub fn random_sample(rng: &mut ChaCha8Rng, n: usize, p: usize, m: usize) -> Sample {
    loop {
        let rows = normal_rows(rng, n, p);
        let truth: Vec<Vec<f64>> = (0..m - 1).map(|_| (0..p).map(|_| rng.random_range(-0.8..0.8)).collect()).collect();
        let codes: Vec<usize> = rows.iter().map(|x| draw_category(rng, &reference_probabilities(x, &truth))).collect();
        if (0..m).all(|k| codes.iter().filter(|&&c| c == k).count() >= 5) {
            return Sample { rows, codes, truth };
        }
    }
}

/// The bundled 6×6 leaf-texture correlation matrix, four decimals.
pub fn leaf_correlation() -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(fixture("leaf_texture_correlation.csv")).unwrap();
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').skip(1).map(|v| v.trim().parse().unwrap()).collect())
        .collect()
}

/// Condition number of that matrix, `sqrt(λmax/λmin)`, computed
/// offline with a 50-digit eigensolver before any library code existed.
pub const LEAF_CONDITION_NUMBER: f64 = 278.592_994_318_986_79;

/// `|a − b| ≤ tol · max(|a|, |b|)`.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

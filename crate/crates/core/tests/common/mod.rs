//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use vrm_core::SampleSet;

/// All permutations of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut p: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    let mut out = vec![p.clone()];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            out.push(p.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Exhaustive minimum of `sum_n ||z'_{p(n)} - z_n||` with terms summed in
/// index order.
pub fn brute_force_min_cost(z: &SampleSet, zp: &SampleSet) -> f64 {
    permutations(z.len())
        .iter()
        .map(|p| p.iter().enumerate().map(|(n, &j)| dist(zp.row(j), z.row(n))).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Ridge weights `(X'X/N + penalty I)^{-1} X'y/N` for a scalar output,
/// no intercept. Inputs are the first `i` coordinates, the target the last.
pub fn ridge(z: &SampleSet, i: usize, penalty: f64) -> Vec<f64> {
    let n = z.len() as f64;
    let mut a = vec![vec![0.0; i]; i];
    let mut b = vec![0.0; i];
    for r in z.rows() {
        for p in 0..i {
            for q in 0..i {
                a[p][q] += r[p] * r[q] / n;
            }
            b[p] += r[p] * r[i] / n;
        }
    }
    for (p, row) in a.iter_mut().enumerate() {
        row[p] += penalty;
    }
    solve(a, b)
}

/// Beta(alpha, alpha) density.
pub fn beta_density(alpha: f64, x: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let ln_b = 2.0 * ln_gamma(alpha) - ln_gamma(2.0 * alpha);
    ((alpha - 1.0) * (x.ln() + (1.0 - x).ln()) - ln_b).exp()
}

/// Mixup vicinal risk by midpoint quadrature over `grid` values of lambda and
/// exhaustive enumeration of partners drawn from the anchors themselves.
pub fn mixup_quadrature(f: impl Fn(&[f64]) -> f64, z: &SampleSet, alpha: f64, grid: usize) -> f64 {
    let lambdas: Vec<f64> = (0..grid).map(|g| (g as f64 + 0.5) / grid as f64).collect();
    let weights: Vec<f64> = lambdas.iter().map(|&l| beta_density(alpha, l)).collect();
    let total: f64 = weights.iter().sum();
    let n = z.len();
    let mut acc = 0.0;
    let mut point = vec![0.0; z.dim()];
    for a in z.rows() {
        for b in z.rows() {
            for (l, w) in lambdas.iter().zip(&weights) {
                for k in 0..point.len() {
                    point[k] = l * a[k] + (1.0 - l) * b[k];
                }
                acc += w / total * f(&point);
            }
        }
    }
    acc / (n * n) as f64
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// `(<w, x> - y)^2` on a joint point with scalar output.
pub fn squared_residual(w: &[f64], z: &[f64]) -> f64 {
    let pred: f64 = w.iter().zip(z).map(|(a, b)| a * b).sum();
    (pred - z[w.len()]).powi(2)
}

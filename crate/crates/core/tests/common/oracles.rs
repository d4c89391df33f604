//! Independent reference computations shared by the integration and
//! acceptance suites. Nothing here calls the routine it checks.
#![allow(dead_code)]

use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use spca_core::algos::{cov_thresh, diag_thresh, greedy_corr, rtpm_iterate, CandidateVector};
use spca_core::linalg::{eig_top_m, good_ortho_basis, householder_to, top_r, SymMatrix};
use spca_core::models::{sample_covariance, sample_gaussian, CovOperator};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn ip(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = ip(&v, &v).sqrt();
    for x in &mut v {
        *x /= n;
    }
    v
}

pub fn random_sym(rng: &mut ChaCha8Rng, d: usize) -> SymMatrix {
    let g: Vec<Vec<f64>> = (0..d).map(|_| gaussian_vec(rng, d)).collect();
    SymMatrix::from_fn(d, |i, j| 0.5 * (g[i][j] + g[j][i])).unwrap()
}

/// Cyclic Jacobi rotations until the off-diagonal mass vanishes; eigenvalues descending.
pub fn jacobi_eigenvalues(m: &SymMatrix) -> Vec<f64> {
    let n = m.dim();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| m.row(i).to_vec()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Worst `|λ_i - λ_i^{ref}|` over `count` random symmetric matrices of dimension 1..=6.
pub fn eig_vs_jacobi(count: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0_f64;
    for i in 0..count {
        let d = 1 + i % 6;
        let m = random_sym(&mut r, d);
        let got: Vec<f64> = eig_top_m(&m, d).unwrap().iter().map(|p| p.value).collect();
        for (a, b) in got.iter().zip(jacobi_eigenvalues(&m)) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

fn trunc_rhs(s: usize, r: usize, c: f64) -> f64 {
    let q = (s as f64 / r as f64).sqrt();
    let rest = (1.0 - c * c).max(0.0);
    q * rest.sqrt().min((1.0 + q) * rest)
}

/// Largest violation over random `(u, v, s, r)` of the two-sided truncation
/// bound and over random `(u, R, s, r)` of the subspace bound. `≤ 0` means
/// both hold exactly.
pub struct TruncationStats {
    pub checked: usize,
    pub two_sided_violation: f64,
    pub subspace_violation: f64,
}

pub fn truncation_suite(count: usize, seed: u64) -> TruncationStats {
    let mut g = rng(seed);
    let mut two = f64::NEG_INFINITY;
    let mut sub = f64::NEG_INFINITY;
    for _ in 0..count {
        let d = g.random_range(2..=40);
        let s = g.random_range(1..=d);
        let r = g.random_range(s..=d);
        let support = sample(&mut g, d, s).into_vec();

        // s-sparse unit v; u mixes v with noise so correlations cover [0, 1]
        let mut v = vec![0.0; d];
        for &i in &support {
            v[i] = g.sample(StandardNormal);
        }
        let v = unit(v);
        let w = unit(gaussian_vec(&mut g, d));
        let a: f64 = g.random();
        let u = unit((0..d).map(|i| a * v[i] + (1.0 - a) * w[i]).collect());
        let tu = top_r(&u, r).unwrap();
        let c = ip(&u, &v).abs();
        let lhs = (ip(&tu, &v).abs() - c).abs();
        two = two.max(lhs - trunc_rhs(s, r, c));

        // orthonormal R with k columns supported on `support`
        let k = g.random_range(1..=s);
        let mut cols: Vec<Vec<f64>> = Vec::new();
        while cols.len() < k {
            let mut x = vec![0.0; d];
            for &i in &support {
                x[i] = g.sample(StandardNormal);
            }
            for _ in 0..2 {
                for c in &cols {
                    let p = ip(&x, c);
                    for i in 0..d {
                        x[i] -= p * c[i];
                    }
                }
            }
            let n = ip(&x, &x).sqrt();
            if n > 1e-6 {
                cols.push(x.iter().map(|y| y / n).collect());
            }
        }
        let coef = gaussian_vec(&mut g, k);
        let inside: Vec<f64> = (0..d).map(|i| (0..k).map(|j| coef[j] * cols[j][i]).sum()).collect();
        let inside = unit(inside);
        let b: f64 = g.random();
        let u = unit((0..d).map(|i| b * inside[i] + (1.0 - b) * w[i]).collect());
        let tu = top_r(&u, r).unwrap();
        let proj = |x: &[f64]| cols.iter().map(|c| ip(x, c).powi(2)).sum::<f64>().sqrt();
        let pu = proj(&u).min(1.0);
        sub = sub.max(pu - trunc_rhs(s, r, pu) - proj(&tu));
    }
    TruncationStats {
        checked: count,
        two_sided_violation: two,
        subspace_violation: sub,
    }
}

/// `(max |Qx - t|, max |QQ^T - I|)` over random unit pairs.
pub fn householder_suite(count: usize, seed: u64) -> (f64, f64) {
    let mut g = rng(seed);
    let (mut e1, mut e2) = (0.0_f64, 0.0_f64);
    for i in 0..count {
        let d = 2 + i % 30;
        let x = unit(gaussian_vec(&mut g, d));
        let t = if i % 50 == 0 { x.clone() } else { unit(gaussian_vec(&mut g, d)) };
        let q = householder_to(&x, &t).unwrap();
        let qx: Vec<f64> = (0..d).map(|a| ip(q.row(a), &x)).collect();
        e1 = e1.max(qx.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt());
        for a in 0..d {
            for b in 0..d {
                let target = if a == b { 1.0 } else { 0.0 };
                e2 = e2.max((ip(q.row(a), q.row(b)) - target).abs());
            }
        }
    }
    (e1, e2)
}

/// Worst `|<u_i, e_1> - 1/√d|` over `i ≥ 2` and the worst Gram error, for d in the range.
pub fn ortho_basis_suite(dims: std::ops::RangeInclusive<usize>) -> (f64, f64) {
    let (mut first, mut gram) = (0.0_f64, 0.0_f64);
    for d in dims {
        let b = good_ortho_basis(d).unwrap();
        let target = 1.0 / (d as f64).sqrt();
        for c in b.columns.iter().skip(1) {
            first = first.max((c[0] - target).abs());
        }
        for (i, a) in b.columns.iter().enumerate() {
            for (j, c) in b.columns.iter().enumerate() {
                let t = if i == j { 1.0 } else { 0.0 };
                gram = gram.max((ip(a, c) - t).abs());
            }
        }
    }
    (first, gram)
}

/// `s` indices of the largest scores by repeated argmax, ties to the smaller index.
fn naive_top(scores: &[f64], s: usize) -> Vec<usize> {
    let mut taken = vec![false; scores.len()];
    let mut out = Vec::new();
    for _ in 0..s {
        let mut best: Option<usize> = None;
        for i in 0..scores.len() {
            if !taken[i] && best.is_none_or(|b| scores[i] > scores[b]) {
                best = Some(i);
            }
        }
        let b = best.unwrap();
        taken[b] = true;
        out.push(b);
    }
    out.sort_unstable();
    out
}

fn naive_local_top(cov: &SymMatrix, set: &[usize]) -> Vec<f64> {
    let k = set.len();
    let sub = SymMatrix::from_fn(k, |a, b| cov.get(set[a], set[b])).unwrap();
    let top = &eig_top_m(&sub, 1).unwrap()[0].vector;
    let mut out = vec![0.0; cov.dim()];
    for (a, &i) in set.iter().enumerate() {
        out[i] = top[a];
    }
    let n = ip(&out, &out).sqrt();
    out.iter().map(|x| x / n).collect()
}

pub fn naive_diag_thresh(cov: &SymMatrix, s: usize) -> Vec<f64> {
    let diag: Vec<f64> = (0..cov.dim()).map(|i| cov.get(i, i)).collect();
    naive_local_top(cov, &naive_top(&diag, s))
}

pub fn naive_cov_thresh(cov: &SymMatrix, tau: f64) -> Vec<f64> {
    let d = cov.dim();
    let t = SymMatrix::from_fn(d, |i, j| if cov.get(i, j).abs() >= tau { cov.get(i, j) } else { 0.0 }).unwrap();
    let v = eig_top_m(&t, 1).unwrap()[0].vector.clone();
    let n = ip(&v, &v).sqrt();
    v.iter().map(|x| x / n).collect()
}

pub fn naive_greedy_corr(cov: &SymMatrix, s: usize, i_star: usize) -> Vec<f64> {
    let d = cov.dim();
    let scores: Vec<f64> = (0..d)
        .map(|i| {
            let mut acc = 0.0;
            for k in 0..d {
                acc += cov.get(i_star, k) * cov.get(i, k);
            }
            acc.abs()
        })
        .collect();
    naive_local_top(cov, &naive_top(&scores, s))
}

/// Number of instances (out of `count`) on which any of the three baselines
/// differs from its naive transcription in any bit.
pub fn baseline_mismatches(count: usize, seed: u64) -> usize {
    let mut g = rng(seed);
    let mut bad = 0;
    for _ in 0..count {
        let d = g.random_range(3..=20);
        let s = g.random_range(1..=d);
        let x: Vec<Vec<f64>> = (0..d + 2).map(|_| gaussian_vec(&mut g, d)).collect();
        let cov = SymMatrix::from_fn(d, |i, j| x.iter().map(|r| r[i] * r[j]).sum::<f64>() / x.len() as f64).unwrap();
        let i_star = g.random_range(0..d);
        let tau = cov.get(0, 0).abs() * g.random_range(0.05..0.5);
        let same = diag_thresh(&cov, s).unwrap().values() == naive_diag_thresh(&cov, s).as_slice()
            && greedy_corr(&cov, s, i_star).unwrap().values() == naive_greedy_corr(&cov, s, i_star).as_slice()
            && cov_thresh(&cov, tau, s).unwrap().values() == naive_cov_thresh(&cov, tau).as_slice();
        if !same {
            bad += 1;
        }
    }
    bad
}

/// Largest coordinate gap between RTPM iterate sequences on the sample
/// operator and on the materialized sample covariance, over every restart.
pub fn matrix_free_vs_dense(d: usize, n: usize, r: usize, t: usize, seed: u64) -> f64 {
    let mut g = rng(seed);
    let sigma = {
        let a: Vec<Vec<f64>> = (0..d).map(|_| gaussian_vec(&mut g, d)).collect();
        SymMatrix::from_fn(d, |i, j| {
            (0..d).map(|k| a[i][k] * a[j][k]).sum::<f64>() / d as f64 + if i == j { 0.5 } else { 0.0 }
        })
        .unwrap()
    };
    let data = Arc::new(sample_gaussian(&sigma, n, seed).unwrap());
    let free = CovOperator::from_data(Arc::clone(&data));
    let dense = CovOperator::dense(sample_covariance(&data).unwrap());
    let mut worst = 0.0_f64;
    for i in 0..d {
        let mut a = CandidateVector::basis(d, i, r);
        let mut b = a.clone();
        for _ in 0..t {
            a = rtpm_iterate(&free, &a, r).unwrap();
            b = rtpm_iterate(&dense, &b, r).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    worst
}

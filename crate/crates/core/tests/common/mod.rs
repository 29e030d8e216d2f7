//! Brute-force reference for probit GP classification on tiny data sets.
//!
//! The exact latent posterior is integrated on a Gauss-Hermite tensor grid in
//! whitened coordinates f = m + L z, with L L^T = K. Given f, the test latent
//! is Gaussian, so E[Phi(f*) | f] = Phi(m*/sqrt(1 + s*)) is exact.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Standard normal CDF, computed here independently of the crate.
pub fn phi(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Gauss-Hermite rule for a standard normal weight, by Golub-Welsch.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i] * std::f64::consts::SQRT_2, v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

pub fn rbf(a: f64, b: f64, ell: f64, s2: f64) -> f64 {
    s2 * (-(a - b) * (a - b) / (2.0 * ell * ell)).exp()
}

pub struct Reference {
    pub probs: Vec<f64>,
    pub log_evidence: f64,
}

/// Exact predictive class probabilities at `tests` and log evidence for a
/// probit GP with an RBF kernel and constant mean `m0`.
pub fn reference(
    xs: &[f64],
    ys: &[u8],
    tests: &[f64],
    ell: f64,
    s2: f64,
    m0: f64,
    jitter: f64,
    nodes: usize,
) -> Reference {
    let n = xs.len();
    let k = DMatrix::from_fn(n, n, |i, j| rbf(xs[i], xs[j], ell, s2) + if i == j { jitter } else { 0.0 });
    let l = k.clone().cholesky().expect("positive definite").l();
    // For each test point, m* = m0 + a^T z and s* = k** - |a|^2 with a = L^{-1} k*.
    let mut a_vecs = Vec::new();
    let mut s_star = Vec::new();
    for &t in tests {
        let ks = DVector::from_fn(n, |i, _| rbf(xs[i], t, ell, s2));
        let a = l.solve_lower_triangular(&ks).expect("triangular solve");
        s_star.push((s2 + jitter - a.norm_squared()).max(0.0));
        a_vecs.push(a);
    }
    let (gx, gw) = gauss_hermite(nodes);
    let signs: Vec<f64> = ys.iter().map(|&y| if y == 1 { 1.0 } else { -1.0 }).collect();
    let mut idx = vec![0usize; n];
    let mut z = vec![0.0; n];
    let mut total = 0.0;
    let mut acc = vec![0.0; tests.len()];
    loop {
        let mut w = 1.0;
        for d in 0..n {
            z[d] = gx[idx[d]];
            w *= gw[idx[d]];
        }
        let mut lik = 1.0;
        for i in 0..n {
            let mut f = m0;
            for j in 0..=i {
                f += l[(i, j)] * z[j];
            }
            lik *= phi(signs[i] * f);
        }
        let wl = w * lik;
        total += wl;
        for (t, a) in a_vecs.iter().enumerate() {
            let mut mu = m0;
            for d in 0..n {
                mu += a[d] * z[d];
            }
            acc[t] += wl * phi(mu / (1.0 + s_star[t]).sqrt());
        }
        let mut d = 0;
        loop {
            if d == n {
                let probs = acc.iter().map(|v| v / total).collect();
                return Reference { probs, log_evidence: total.ln() };
            }
            idx[d] += 1;
            if idx[d] < nodes {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// A small training set with its kernel settings.
pub struct Fixture {
    pub xs: Vec<f64>,
    pub ys: Vec<u8>,
    pub ell: f64,
    pub s2: f64,
    pub m0: f64,
}

pub fn fixtures() -> Vec<Fixture> {
    let f = |xs: &[f64], ys: &[u8], ell, s2, m0| Fixture { xs: xs.to_vec(), ys: ys.to_vec(), ell, s2, m0 };
    vec![
        f(&[0.5], &[1], 0.3, 1.0, 0.0),
        f(&[0.5], &[0], 0.2, 4.0, 0.0),
        f(&[0.2, 0.8], &[1, 0], 0.3, 1.0, 0.0),
        f(&[0.3, 0.35, 0.7], &[1, 0, 1], 0.3, 2.0, 0.0),
        f(&[0.1, 0.4, 0.6, 0.9], &[0, 1, 1, 0], 0.2, 1.0, 0.0),
        f(&[0.1, 0.4, 0.6, 0.9], &[0, 1, 1, 0], 0.25, 4.0, 0.0),
        f(&[0.25, 0.5, 0.75, 1.0], &[1, 1, 0, 0], 0.5, 4.0, 0.0),
        f(&[0.0, 0.3, 0.6, 0.9], &[1, 0, 0, 1], 0.3, 1.0, 0.5),
    ]
}

pub fn test_points() -> Vec<f64> {
    (0..11).map(|i| i as f64 / 10.0).collect()
}

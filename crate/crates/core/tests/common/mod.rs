//! Reference implementations used as test oracles. Written from the
//! textbook formulas with dense Gauss-Jordan elimination, sharing no code
//! with the library's Cholesky path.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Matérn-5/2 or RBF with ARD lengthscales, evaluated directly.
pub fn kernel(matern: bool, ls: &[f64], s2: f64, u: &[f64], v: &[f64]) -> f64 {
    let r2: f64 = u
        .iter()
        .zip(v)
        .zip(ls)
        .map(|((a, b), l)| ((a - b) / l).powi(2))
        .sum();
    if matern {
        let r = r2.sqrt();
        let t = 5f64.sqrt() * r;
        s2 * (1.0 + t + 5.0 * r * r / 3.0) * (-t).exp()
    } else {
        s2 * (-0.5 * r2).exp()
    }
}

/// Inverse and log-determinant by Gauss-Jordan with partial pivoting.
pub fn inverse_and_logdet(a: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    let mut logdet = 0.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| m[i][c].abs().partial_cmp(&m[j][c].abs()).unwrap())
            .unwrap();
        m.swap(c, p);
        let piv = m[c][c];
        logdet += piv.abs().ln();
        for x in m[c].iter_mut() {
            *x /= piv;
        }
        for i in 0..n {
            if i != c {
                let f = m[i][c];
                if f != 0.0 {
                    for j in 0..2 * n {
                        m[i][j] -= f * m[c][j];
                    }
                }
            }
        }
    }
    (m.into_iter().map(|r| r[n..].to_vec()).collect(), logdet)
}

pub fn matvec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A GP problem in plain vectors.
#[derive(Debug, Clone)]
pub struct Instance {
    pub matern: bool,
    pub ls: Vec<f64>,
    pub s2: f64,
    pub noise: f64,
    pub mean: f64,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl Instance {
    pub fn random(
        rng: &mut ChaCha8Rng,
        max_d: usize,
        max_n: usize,
        noise_range: (f64, f64),
    ) -> Self {
        let d = rng.random_range(1..=max_d);
        let n = rng.random_range(1..=max_n);
        let log_uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
            (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
        };
        Self {
            matern: rng.random::<bool>(),
            ls: (0..d).map(|_| log_uniform(rng, 0.1, 2.0)).collect(),
            s2: log_uniform(rng, 0.1, 10.0),
            noise: log_uniform(rng, noise_range.0, noise_range.1),
            mean: rng.random_range(-1.0..1.0),
            x: (0..n)
                .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
                .collect(),
            y: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
        }
    }

    /// A noise-free instance whose inputs are at least `min_sep`
    /// lengthscale units apart, so the Gram matrix is usefully conditioned.
    pub fn separated(rng: &mut ChaCha8Rng, max_d: usize, max_n: usize, min_sep: f64) -> Self {
        let mut inst = Self::random(rng, max_d, max_n, (1e-6, 1e-5));
        inst.noise = 0.0;
        inst.ls
            .iter_mut()
            .for_each(|l| *l = 0.05 + 0.15 * rng.random::<f64>());
        let n = inst.x.len();
        let mut x: Vec<Vec<f64>> = Vec::with_capacity(n);
        while x.len() < n {
            let cand: Vec<f64> = (0..inst.d()).map(|_| rng.random::<f64>()).collect();
            let far = x.iter().all(|p| {
                p.iter()
                    .zip(&cand)
                    .zip(&inst.ls)
                    .map(|((a, b), l)| ((a - b) / l).powi(2))
                    .sum::<f64>()
                    .sqrt()
                    >= min_sep
            });
            if far {
                x.push(cand);
            }
        }
        inst.x = x;
        inst
    }

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn d(&self) -> usize {
        self.ls.len()
    }

    fn k(&self, u: &[f64], v: &[f64]) -> f64 {
        kernel(self.matern, &self.ls, self.s2, u, v)
    }

    /// `K + σ² I`.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        let n = self.x.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| self.k(&self.x[i], &self.x[j]) + if i == j { self.noise } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    /// Posterior mean and variance at `q`.
    pub fn posterior(&self, q: &[f64]) -> (f64, f64) {
        let (inv, _) = inverse_and_logdet(&self.gram());
        let kq: Vec<f64> = self.x.iter().map(|xi| self.k(q, xi)).collect();
        let r: Vec<f64> = self.y.iter().map(|y| y - self.mean).collect();
        let mean = self.mean + dot(&kq, &matvec(&inv, &r));
        let var = self.k(q, q) - dot(&kq, &matvec(&inv, &kq));
        (mean, var)
    }

    /// Log marginal likelihood.
    pub fn mll(&self) -> f64 {
        let (inv, logdet) = inverse_and_logdet(&self.gram());
        let r: Vec<f64> = self.y.iter().map(|y| y - self.mean).collect();
        let n = r.len() as f64;
        -0.5 * dot(&r, &matvec(&inv, &r))
            - 0.5 * logdet
            - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    /// Log marginal likelihood at log-parameters
    /// `[ln ℓ…, ln s², ln σ², m]`.
    pub fn mll_at(&self, p: &[f64]) -> f64 {
        let d = self.d();
        let mut other = self.clone();
        other.ls = p[..d].iter().map(|v| v.exp()).collect();
        other.s2 = p[d].exp();
        other.noise = p[d + 1].exp();
        other.mean = p[d + 2];
        other.mll()
    }

    pub fn log_params(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.ls.iter().map(|l| l.ln()).collect();
        p.extend([self.s2.ln(), self.noise.ln(), self.mean]);
        p
    }
}

/// `|a − b| ≤ tol · max(1, |a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

/// Standard normal CDF by composite Simpson integration of the density
/// from 0 to `z`.
pub fn cdf_by_quadrature(z: f64) -> f64 {
    let n = 20_000;
    let h = z / n as f64;
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = pdf(0.0) + pdf(z);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * pdf(i as f64 * h);
    }
    0.5 + s * h / 3.0
}

/// `n` standard normals by Box–Muller from a `ChaCha8` stream.
pub fn box_muller(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0fb0_c5);
    let mut out = Vec::with_capacity(n + 1);
    while out.len() < n {
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let t = 2.0 * std::f64::consts::PI * u2;
        out.push(r * t.cos());
        out.push(r * t.sin());
    }
    out.truncate(n);
    out
}

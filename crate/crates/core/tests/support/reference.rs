//! Straight-from-the-equations evaluator for the factor models, written
//! without any of the library's code. Dense covariance matrices, explicit
//! determinants by elimination, and the LKJ density on the correlation matrix
//! itself with a forward-mode Jacobian of `y -> R`.
#![allow(dead_code)]

use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct RefModel {
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub d: usize,
    pub affine: bool,
    pub hierarchical: bool,
    /// Model profiles (M rows) and dataset profiles (N rows); constrained when set.
    pub h: Option<Vec<Vec<f64>>>,
    pub g: Option<Vec<Vec<f64>>>,
    pub sigma_u: f64,
    pub sigma_v: f64,
    pub sigma_w: f64,
    pub sigma_b: f64,
    pub sigma_y: f64,
    pub sigma_x: f64,
    pub eta: f64,
    pub lambda: f64,
    /// `Some(σ)` fixes the noise; `None` samples `log σ`.
    pub noise: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RefParams {
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub mu_u: Vec<f64>,
    pub mu_v: Vec<f64>,
    pub cpc_u: Vec<f64>,
    pub cpc_v: Vec<f64>,
    pub log_tau_u: Vec<f64>,
    pub log_tau_v: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    pub log_sigma: f64,
}

fn take<'a>(v: &'a [f64], at: &mut usize, k: usize) -> &'a [f64] {
    let s = &v[*at..*at + k];
    *at += k;
    s
}

fn rows(flat: &[f64], r: usize, c: usize) -> Vec<Vec<f64>> {
    (0..r).map(|i| flat[i * c..(i + 1) * c].to_vec()).collect()
}

impl RefModel {
    pub fn k(&self) -> usize {
        self.h.as_ref().map_or(0, |h| h[0].len())
    }

    pub fn j(&self) -> usize {
        self.g.as_ref().map_or(0, |g| g[0].len())
    }

    pub fn n_params(&self) -> usize {
        let d = self.d;
        let mut n = (self.m + self.n) * d;
        if self.affine {
            n += 2 * self.s;
        }
        if self.hierarchical {
            n += 2 * d + d * (d - 1) + 2 * d;
        }
        n += (self.k() + self.j()) * d;
        if self.noise.is_none() {
            n += 1;
        }
        n
    }

    /// Order: U, V, w, b, μ_U, μ_V, cpc_U, cpc_V, log τ_U, log τ_V, Y, X, log σ.
    pub fn unpack(&self, v: &[f64]) -> RefParams {
        assert_eq!(v.len(), self.n_params());
        let d = self.d;
        let c = d * (d - 1) / 2;
        let mut at = 0;
        let u = rows(take(v, &mut at, self.m * d), self.m, d);
        let vv = rows(take(v, &mut at, self.n * d), self.n, d);
        let (w, b) = if self.affine {
            (take(v, &mut at, self.s).to_vec(), take(v, &mut at, self.s).to_vec())
        } else {
            (vec![1.0; self.s], vec![0.0; self.s])
        };
        let (mut mu_u, mut mu_v, mut cpc_u, mut cpc_v, mut tu, mut tv) = Default::default();
        if self.hierarchical {
            mu_u = take(v, &mut at, d).to_vec();
            mu_v = take(v, &mut at, d).to_vec();
            cpc_u = take(v, &mut at, c).to_vec();
            cpc_v = take(v, &mut at, c).to_vec();
            tu = take(v, &mut at, d).to_vec();
            tv = take(v, &mut at, d).to_vec();
        }
        let y = rows(take(v, &mut at, self.k() * d), self.k(), d);
        let x = rows(take(v, &mut at, self.j() * d), self.j(), d);
        let log_sigma = match self.noise {
            Some(s) => s.ln(),
            None => take(v, &mut at, 1)[0],
        };
        RefParams {
            u,
            v: vv,
            w,
            b,
            mu_u,
            mu_v,
            cpc_u,
            cpc_v,
            log_tau_u: tu,
            log_tau_v: tv,
            y,
            x,
            log_sigma,
        }
    }

    fn effective(&self, base: &[Vec<f64>], prof: &Option<Vec<Vec<f64>>>, eff: &[Vec<f64>]) -> Vec<Vec<f64>> {
        base.iter()
            .enumerate()
            .map(|(i, row)| {
                (0..self.d)
                    .map(|k| {
                        let extra = prof
                            .as_ref()
                            .map_or(0.0, |p| (0..p[i].len()).map(|f| p[i][f] * eff[f][k]).sum());
                        row[k] + extra
                    })
                    .collect()
            })
            .collect()
    }

    /// `means[m][n][s]`.
    pub fn means(&self, v: &[f64]) -> Vec<Vec<Vec<f64>>> {
        let p = self.unpack(v);
        let up = self.effective(&p.u, &self.h, &p.y);
        let vp = self.effective(&p.v, &self.g, &p.x);
        (0..self.m)
            .map(|m| {
                (0..self.n)
                    .map(|n| {
                        let inner: f64 = (0..self.d).map(|k| up[m][k] * vp[n][k]).sum();
                        (0..self.s).map(|s| inner * p.w[s] + p.b[s]).collect()
                    })
                    .collect()
            })
            .collect()
    }

    pub fn log_likelihood(&self, obs: &[(usize, usize, usize, f64)], v: &[f64]) -> f64 {
        let mu = self.means(v);
        let sigma = self.unpack(v).log_sigma.exp();
        obs.iter()
            .map(|&(m, n, s, r)| normal_logpdf(r, mu[m][n][s], sigma))
            .sum()
    }

    pub fn log_prior(&self, v: &[f64]) -> f64 {
        let p = self.unpack(v);
        let mut lp = 0.0;
        if self.hierarchical {
            lp += hierarchical_logpdf(&p.u, &p.mu_u, &p.cpc_u, &p.log_tau_u, self.eta, self.lambda);
            lp += hierarchical_logpdf(&p.v, &p.mu_v, &p.cpc_v, &p.log_tau_v, self.eta, self.lambda);
        } else {
            lp +=
                p.u.iter()
                    .flatten()
                    .map(|x| normal_logpdf(*x, 0.0, self.sigma_u))
                    .sum::<f64>();
            lp +=
                p.v.iter()
                    .flatten()
                    .map(|x| normal_logpdf(*x, 0.0, self.sigma_v))
                    .sum::<f64>();
        }
        if self.affine {
            lp += p.w.iter().map(|x| normal_logpdf(*x, 0.0, self.sigma_w)).sum::<f64>();
            lp += p.b.iter().map(|x| normal_logpdf(*x, 0.0, self.sigma_b)).sum::<f64>();
        }
        lp += self.log_profile_prior(v);
        if self.noise.is_none() {
            // σ ~ HalfNormal(1), density on log σ
            let s = p.log_sigma.exp();
            lp += (2.0f64).ln() + normal_logpdf(s, 0.0, 1.0) + p.log_sigma;
        }
        lp
    }

    /// Prior terms of the profile-effect matrices Y and X only.
    pub fn log_profile_prior(&self, v: &[f64]) -> f64 {
        let p = self.unpack(v);
        p.y.iter()
            .flatten()
            .map(|x| normal_logpdf(*x, 0.0, self.sigma_y))
            .sum::<f64>()
            + p.x
                .iter()
                .flatten()
                .map(|x| normal_logpdf(*x, 0.0, self.sigma_x))
                .sum::<f64>()
    }

    pub fn log_joint(&self, obs: &[(usize, usize, usize, f64)], v: &[f64]) -> f64 {
        self.log_likelihood(obs, v) + self.log_prior(v)
    }
}

pub fn normal_logpdf(x: f64, mu: f64, sd: f64) -> f64 {
    -0.5 * (2.0 * PI).ln() - sd.ln() - 0.5 * ((x - mu) / sd).powi(2)
}

/// `log N(μ | 0, Σ) + Σ_r log N(row_r | μ, Σ) + log LKJ(R | η) + log|∂R/∂y|
///  + Σ_d [log Exp(τ_d | λ) + t_d]`, `Σ = diag(τ) R diag(τ)`, `τ = exp(t)`.
fn hierarchical_logpdf(rows: &[Vec<f64>], mu: &[f64], cpc: &[f64], log_tau: &[f64], eta: f64, lambda: f64) -> f64 {
    let d = mu.len();
    let (r, log_jac) = correlation_with_jacobian(cpc, d);
    let tau: Vec<f64> = log_tau.iter().map(|t| t.exp()).collect();
    let cov: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| tau[i] * r[i][j] * tau[j]).collect())
        .collect();
    let mut lp = mvn_logpdf(mu, &vec![0.0; d], &cov);
    for row in rows {
        lp += mvn_logpdf(row, mu, &cov);
    }
    lp += (eta - 1.0) * log_det(&r) - lkj_log_normalizer(d, eta) + log_jac;
    for (t, ta) in log_tau.iter().zip(&tau) {
        lp += lambda.ln() - lambda * ta + t;
    }
    lp
}

pub fn mvn_logpdf(x: &[f64], mu: &[f64], cov: &[Vec<f64>]) -> f64 {
    let d = x.len();
    let diff: Vec<f64> = x.iter().zip(mu).map(|(a, b)| a - b).collect();
    let sol = solve(cov, &diff);
    let quad: f64 = diff.iter().zip(&sol).map(|(a, b)| a * b).sum();
    -0.5 * d as f64 * (2.0 * PI).ln() - 0.5 * log_det(cov) - 0.5 * quad
}

/// Gaussian elimination with partial pivoting.
pub fn log_det(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut m = a.to_vec();
    let mut total = 0.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        let piv = m[c][c];
        total += piv.abs().ln();
        for r in c + 1..n {
            let f = m[r][c] / piv;
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    total
}

pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| row.iter().copied().chain([bi]).collect())
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = m[r][c] / m[c][c];
                for k in c..=n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
    }
    (0..n).map(|i| m[i][n] / m[i][i]).collect()
}

/// Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut a = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `log ∫ det(R)^(η−1) dR` over `d×d` correlation matrices.
pub fn lkj_log_normalizer(d: usize, eta: f64) -> f64 {
    let mut total = 0.0;
    for k in 1..d {
        let beta = eta + (d - 1 - k) as f64 / 2.0;
        let ln_b = 2.0 * ln_gamma(beta) - ln_gamma(2.0 * beta);
        // each of the d − k partial correlations at level k integrates (1 − z²)^(β−1)
        total += (d - k) as f64 * ((2.0 * beta - 1.0) * (2.0f64).ln() + ln_b);
    }
    total
}

/// Forward-mode dual number carrying a gradient.
#[derive(Debug, Clone)]
struct Dual {
    v: f64,
    g: Vec<f64>,
}

impl Dual {
    fn var(v: f64, i: usize, n: usize) -> Dual {
        let mut g = vec![0.0; n];
        g[i] = 1.0;
        Dual { v, g }
    }

    fn cst(v: f64, n: usize) -> Dual {
        Dual { v, g: vec![0.0; n] }
    }

    fn add(&self, o: &Dual) -> Dual {
        Dual {
            v: self.v + o.v,
            g: self.g.iter().zip(&o.g).map(|(a, b)| a + b).collect(),
        }
    }

    fn sub(&self, o: &Dual) -> Dual {
        Dual {
            v: self.v - o.v,
            g: self.g.iter().zip(&o.g).map(|(a, b)| a - b).collect(),
        }
    }

    fn mul(&self, o: &Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            g: self.g.iter().zip(&o.g).map(|(a, b)| a * o.v + self.v * b).collect(),
        }
    }

    fn sqrt(&self) -> Dual {
        let s = self.v.sqrt();
        Dual {
            v: s,
            g: self.g.iter().map(|a| a * 0.5 / s).collect(),
        }
    }

    fn tanh(&self) -> Dual {
        let t = self.v.tanh();
        Dual {
            v: t,
            g: self.g.iter().map(|a| a * (1.0 - t * t)).collect(),
        }
    }
}

/// Correlation matrix from canonical partial correlations `tanh(y)` (strictly
/// lower, row-major) and `log |det ∂(R_ij, i>j) / ∂y|`.
pub fn correlation_with_jacobian(y: &[f64], d: usize) -> (Vec<Vec<f64>>, f64) {
    let n = y.len();
    assert_eq!(n, d * (d - 1) / 2);
    let mut l: Vec<Vec<Dual>> = vec![vec![Dual::cst(0.0, n); d]; d];
    l[0][0] = Dual::cst(1.0, n);
    let mut k = 0;
    for i in 1..d {
        let mut rem = Dual::cst(1.0, n);
        for j in 0..i {
            let z = Dual::var(y[k], k, n).tanh();
            l[i][j] = z.mul(&rem.sqrt());
            rem = rem.sub(&l[i][j].mul(&l[i][j]));
            k += 1;
        }
        l[i][i] = rem.sqrt();
    }
    let mut r = vec![vec![0.0; d]; d];
    let mut jac = Vec::with_capacity(n);
    for i in 0..d {
        for j in 0..d {
            let mut acc = Dual::cst(0.0, n);
            for t in 0..d {
                acc = acc.add(&l[i][t].mul(&l[j][t]));
            }
            r[i][j] = acc.v;
            if i > j {
                jac.push(acc.g);
            }
        }
    }
    let log_jac = if n == 0 { 0.0 } else { log_det(&jac) };
    (r, log_jac)
}

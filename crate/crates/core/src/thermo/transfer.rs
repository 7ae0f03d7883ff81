use crate::error::{Error, Result};

use super::{Potential, Support};

const TOLERANCE: f64 = 1e-13;
const MAX_ITERATIONS: usize = 100_000;
const POWER_BUDGET: usize = 4_000;
const DENSE_LIMIT: usize = 128;

/// Perron data of the transfer matrix `B_{qφ}[u][v] = 2^{qφ(u·b)}` on a support.
#[derive(Clone, Debug)]
pub struct TransferSystem {
    memory: usize,
    support: Support,
    // Edge weights divided by 2^scale so the largest is 1.
    weights: Vec<f64>,
    scale: f64,
    lambda: f64,
    right: Vec<f64>,
    left: Vec<f64>,
    iterations: usize,
}

impl TransferSystem {
    pub fn new(potential: &Potential, q: f64) -> Result<TransferSystem> {
        TransferSystem::with_support(potential, q, &Support::full(potential.memory()))
    }

    pub fn with_support(potential: &Potential, q: f64, support: &Support) -> Result<TransferSystem> {
        if !q.is_finite() {
            return Err(Error::param(format!("inverse temperature {q} is not finite")));
        }
        let lifted;
        let potential = if potential.memory() < support.memory() {
            lifted = potential.lift(support.memory())?;
            &lifted
        } else if potential.memory() > support.memory() {
            return Err(Error::param("support memory is smaller than the potential memory"));
        } else {
            potential
        };
        let memory = support.memory();
        let scale = support
            .edges()
            .map(|c| q * potential.value(c as u64))
            .fold(f64::NEG_INFINITY, f64::max);
        let weights = (0..1usize << memory)
            .map(|c| {
                if support.allows(c) {
                    (q * potential.value(c as u64) - scale).exp2()
                } else {
                    0.0
                }
            })
            .collect();
        let mut system = TransferSystem {
            memory,
            support: support.clone(),
            weights,
            scale,
            lambda: 1.0,
            right: Vec::new(),
            left: Vec::new(),
            iterations: 0,
        };
        system.solve()?;
        Ok(system)
    }

    fn states(&self) -> usize {
        1 << (self.memory - 1)
    }

    fn apply_right(&self, h: &[f64], out: &mut [f64]) {
        let n = self.states();
        let top = self.memory - 1;
        for (u, slot) in out.iter_mut().enumerate() {
            let c0 = u;
            let c1 = u | (1 << top);
            *slot = self.weights[c0] * h[c0 >> 1] + self.weights[c1] * h[c1 >> 1];
        }
        debug_assert_eq!(out.len(), n);
    }

    fn apply_left(&self, nu: &[f64], out: &mut [f64]) {
        let smask = self.states() - 1;
        for (v, slot) in out.iter_mut().enumerate() {
            let c0 = 2 * v;
            let c1 = 2 * v + 1;
            *slot = self.weights[c0] * nu[c0 & smask] + self.weights[c1] * nu[c1 & smask];
        }
    }

    fn initial(&self) -> Vec<f64> {
        (0..self.states())
            .map(|s| if self.support.is_active(s) { 1.0 } else { 0.0 })
            .collect()
    }

    fn residuals(&self, lambda: f64, h: &[f64], nu: &[f64]) -> f64 {
        let n = self.states();
        let mut bh = vec![0.0; n];
        let mut nub = vec![0.0; n];
        self.apply_right(h, &mut bh);
        self.apply_left(nu, &mut nub);
        relative_residual(lambda, h, &bh).max(relative_residual(lambda, nu, &nub))
    }

    fn solve(&mut self) -> Result<()> {
        let n = self.states();
        let mut h = self.initial();
        let mut nu = self.initial();
        let mut bh = vec![0.0; n];
        let mut nub = vec![0.0; n];
        let mut lambda = 0.0;
        let mut residual = f64::INFINITY;
        let budget = if n <= DENSE_LIMIT { POWER_BUDGET } else { MAX_ITERATIONS };
        for it in 1..=budget {
            self.apply_right(&h, &mut bh);
            self.apply_left(&nu, &mut nub);
            let num: f64 = nu.iter().zip(&bh).map(|(a, b)| a * b).sum();
            let den: f64 = nu.iter().zip(&h).map(|(a, b)| a * b).sum();
            let estimate = num / den;
            residual = relative_residual(estimate, &h, &bh).max(relative_residual(estimate, &nu, &nub));
            if residual < TOLERANCE {
                lambda = estimate;
                self.iterations = it;
                break;
            }
            // Shifting by the current estimate damps eigenvalues near −λ.
            for (x, b) in h.iter_mut().zip(&bh) {
                *x = b + lambda * *x;
            }
            for (x, b) in nu.iter_mut().zip(&nub) {
                *x = b + lambda * *x;
            }
            normalize_max(&mut h);
            normalize_max(&mut nu);
            lambda = estimate;
        }
        if residual >= TOLERANCE {
            if n <= DENSE_LIMIT {
                let (lam, hh, nn) = self.dense_perron();
                residual = self.residuals(lam, &hh, &nn);
                if residual.is_nan() || residual >= 1e-10 {
                    return Err(Error::NoConvergence {
                        iterations: budget,
                        residual,
                    });
                }
                lambda = lam;
                h = hh;
                nu = nn;
                self.iterations = budget;
            } else {
                return Err(Error::NoConvergence {
                    iterations: budget,
                    residual,
                });
            }
        }
        let total: f64 = nu.iter().sum();
        nu.iter_mut().for_each(|x| *x /= total);
        let pair: f64 = nu.iter().zip(&h).map(|(a, b)| a * b).sum();
        h.iter_mut().for_each(|x| *x /= pair);
        self.lambda = lambda;
        self.right = h;
        self.left = nu;
        Ok(())
    }

    /// Repeated squaring of the normalized dense matrix; used when power iteration stalls.
    fn dense_perron(&self) -> (f64, Vec<f64>, Vec<f64>) {
        let n = self.states();
        let mut m = vec![0.0; n * n];
        let top = self.memory - 1;
        for u in 0..n {
            for b in 0..2 {
                let c = u | (b << top);
                m[u * n + (c >> 1)] += self.weights[c];
            }
        }
        let mut p = m.clone();
        for _ in 0..64 {
            let mut sq = vec![0.0; n * n];
            for i in 0..n {
                for k in 0..n {
                    let a = p[i * n + k];
                    if a == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        sq[i * n + j] += a * p[k * n + j];
                    }
                }
            }
            let norm = sq.iter().fold(0.0f64, |a, v| a.max(*v));
            sq.iter_mut().for_each(|x| *x /= norm);
            p = sq;
        }
        // Columns of the limit are multiples of h, rows multiples of ν.
        let mut h: Vec<f64> = (0..n).map(|i| (0..n).map(|j| p[i * n + j]).sum()).collect();
        let mut nu: Vec<f64> = (0..n).map(|j| (0..n).map(|i| p[i * n + j]).sum()).collect();
        normalize_max(&mut h);
        normalize_max(&mut nu);
        let mut bh = vec![0.0; n];
        self.apply_right(&h, &mut bh);
        let num: f64 = nu.iter().zip(&bh).map(|(a, b)| a * b).sum();
        let den: f64 = nu.iter().zip(&h).map(|(a, b)| a * b).sum();
        (num / den, h, nu)
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    /// Perron eigenvalue of the unscaled matrix.
    pub fn lambda(&self) -> f64 {
        self.lambda * self.scale.exp2()
    }

    /// `log₂ λ`.
    pub fn pressure(&self) -> f64 {
        self.lambda.log2() + self.scale
    }

    /// Right eigenvector `h`, normalized by `⟨ν, h⟩ = 1`.
    pub fn right(&self) -> &[f64] {
        &self.right
    }

    /// Left eigenvector `ν`, a probability vector on states.
    pub fn left(&self) -> &[f64] {
        &self.left
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Scaled edge weight and eigenvalue, sharing the same factor.
    pub(crate) fn scaled_weight(&self, code: usize) -> f64 {
        self.weights[code]
    }

    pub(crate) fn scaled_lambda(&self) -> f64 {
        self.lambda
    }

    /// Estimate of `|λ₂| / λ` by power iteration on the complement of the Perron direction.
    pub fn spectral_gap_estimate(&self) -> f64 {
        let n = self.states();
        if n == 1 {
            return 0.0;
        }
        let mut y: Vec<f64> = (0..n)
            .map(|i| {
                if self.support.is_active(i) {
                    ((i as f64 + 1.0) * 0.754_877_666).fract() - 0.5
                } else {
                    0.0
                }
            })
            .collect();
        let project = |y: &mut Vec<f64>| {
            let c: f64 = self.left.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
            for (x, hv) in y.iter_mut().zip(&self.right) {
                *x -= c * hv;
            }
        };
        project(&mut y);
        let mut by = vec![0.0; n];
        let mut log_growth = 0.0;
        let mut counted = 0;
        for it in 0..300 {
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return 0.0;
            }
            y.iter_mut().for_each(|v| *v /= norm);
            self.apply_right(&y, &mut by);
            project(&mut by);
            std::mem::swap(&mut y, &mut by);
            if it >= 200 {
                let g = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                if g == 0.0 {
                    return 0.0;
                }
                log_growth += g.ln();
                counted += 1;
            }
        }
        ((log_growth / counted as f64).exp() / self.lambda).min(1.0)
    }
}

/// Largest componentwise relative error of `Bx = λx` over the support of `x`.
fn relative_residual(lambda: f64, x: &[f64], bx: &[f64]) -> f64 {
    let floor = x.iter().fold(0.0f64, |a, v| a.max(v.abs())) * 1e-250;
    x.iter()
        .zip(bx)
        .filter(|(v, _)| **v > floor)
        .fold(0.0f64, |a, (v, b)| a.max(((b - lambda * v) / (lambda * v)).abs()))
}

fn normalize_max(x: &mut [f64]) {
    let m = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m > 0.0 {
        x.iter_mut().for_each(|v| *v /= m);
    }
}

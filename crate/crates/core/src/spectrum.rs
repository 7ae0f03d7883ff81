//! Pressure curves, the entropy spectrum and the predicted covering dimensions.
//!
//! For a potential `φ` the local entropy levels are `t(q) = ∫(−φ) dμ_{qφ} = −P′(qφ)`
//! and the spectrum is the Legendre transform `E(t) = P(qφ) + q·t` at the `q` solving
//! `t(q) = t`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::thermo::{GibbsChain, Potential, Support, TransferSystem};

/// Bracket for the inverse-temperature search.
pub const Q_CAP: f64 = 64.0;
/// Distance to `e^±` below which a spectrum value is flagged approximate.
pub const ENDPOINT_FLAG: f64 = 1.0 / 1_048_576.0;
/// Graphs up to this many states keep Karp's full table and recover an optimal cycle.
const KARP_TABLE_LIMIT: usize = 1024;

/// An optimal mean cycle of the de Bruijn graph.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleMean {
    pub mean: f64,
    /// The mean as an exact rational of the binary table entries on the cycle.
    #[serde(skip)]
    pub exact: Option<BigRational>,
    /// Edge codes of the cycle, when recovered.
    pub cycle: Vec<u64>,
}

/// Minimum mean of `weights[c]` over cycles of the support (Karp).
pub fn min_mean_cycle(support: &Support, weights: &[f64]) -> CycleMean {
    let states = support.active_states();
    let n = states.len();
    let total = support.state_count();
    let mut index = vec![usize::MAX; total];
    for (i, &s) in states.iter().enumerate() {
        index[s] = i;
    }
    let smask = total - 1;
    let edges: Vec<(usize, usize, usize)> = support
        .edges()
        .map(|c| (index[c & smask], index[c >> 1], c))
        .collect();
    let inf = f64::INFINITY;
    let keep = n <= KARP_TABLE_LIMIT;
    let mut table: Vec<Vec<f64>> = Vec::new();
    let mut pred: Vec<Vec<u32>> = Vec::new();
    let mut prev = vec![inf; n];
    prev[0] = 0.0;
    if keep {
        table.push(prev.clone());
        pred.push(vec![u32::MAX; n]);
    }
    for _ in 1..=n {
        let mut cur = vec![inf; n];
        let mut p = vec![u32::MAX; if keep { n } else { 0 }];
        for &(u, v, c) in &edges {
            let d = prev[u] + weights[c];
            if d < cur[v] {
                cur[v] = d;
                if keep {
                    p[v] = c as u32;
                }
            }
        }
        if keep {
            table.push(cur.clone());
            pred.push(p);
        }
        prev = cur;
    }
    let dn = prev;
    // Second pass without a table: recompute D_k on the fly.
    let mut best_ratio = vec![f64::NEG_INFINITY; n];
    if keep {
        for (k, dk) in table.iter().enumerate().take(n) {
            for v in 0..n {
                if dn[v].is_finite() && dk[v].is_finite() {
                    let r = (dn[v] - dk[v]) / (n - k) as f64;
                    best_ratio[v] = best_ratio[v].max(r);
                }
            }
        }
    } else {
        let mut dk = vec![inf; n];
        dk[0] = 0.0;
        for k in 0..n {
            for v in 0..n {
                if dn[v].is_finite() && dk[v].is_finite() {
                    let r = (dn[v] - dk[v]) / (n - k) as f64;
                    best_ratio[v] = best_ratio[v].max(r);
                }
            }
            let mut next = vec![inf; n];
            for &(u, v, c) in &edges {
                next[v] = next[v].min(dk[u] + weights[c]);
            }
            dk = next;
        }
    }
    let (vstar, mean) = (0..n)
        .filter(|&v| dn[v].is_finite())
        .map(|v| (v, best_ratio[v]))
        .fold((0, inf), |acc, x| if x.1 < acc.1 { x } else { acc });
    let mut cycle = Vec::new();
    if keep {
        // The optimal walk of length n into the minimizing state contains an optimal cycle.
        let mut path = Vec::with_capacity(n);
        let mut v = vstar;
        for k in (1..=n).rev() {
            let c = pred[k][v] as usize;
            path.push(c);
            v = index[c & smask];
        }
        path.reverse();
        cycle = best_closed_subwalk(&path, &index, smask, weights, mean);
    }
    let exact = exact_mean(&cycle, weights)
        .filter(|r| r.to_f64().is_some_and(|x| (x - mean).abs() <= 1e-9 * (1.0 + mean.abs())));
    if exact.is_none() {
        cycle.clear();
    }
    let mean = exact.as_ref().and_then(|r| r.to_f64()).unwrap_or(mean);
    CycleMean { mean, exact, cycle }
}

/// The closed subwalk of `path` whose mean is closest to `target`.
fn best_closed_subwalk(path: &[usize], index: &[usize], smask: usize, weights: &[f64], target: f64) -> Vec<u64> {
    let mut best: Option<(f64, Vec<u64>)> = None;
    let start_state = |c: usize| index[c & smask];
    let end_state = |c: usize| index[c >> 1];
    for i in 0..path.len() {
        let mut sum = 0.0;
        for j in i..path.len() {
            sum += weights[path[j]];
            if end_state(path[j]) == start_state(path[i]) {
                let m = sum / (j - i + 1) as f64;
                let d = (m - target).abs();
                if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                    best = Some((d, path[i..=j].iter().map(|&c| c as u64).collect()));
                }
            }
        }
    }
    best.map(|(_, c)| c).unwrap_or_default()
}

fn exact_mean(cycle: &[u64], weights: &[f64]) -> Option<BigRational> {
    if cycle.is_empty() {
        return None;
    }
    let mut sum = BigRational::zero();
    for &c in cycle {
        sum += BigRational::from_f64(weights[c as usize])?;
    }
    Some(sum / BigRational::from_integer(BigInt::from(cycle.len())))
}

pub fn max_mean_cycle(support: &Support, weights: &[f64]) -> CycleMean {
    let neg: Vec<f64> = weights.iter().map(|w| -w).collect();
    let m = min_mean_cycle(support, &neg);
    CycleMean {
        mean: -m.mean,
        exact: m.exact.map(|r| -r),
        cycle: m.cycle,
    }
}

/// A value of the entropy spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectrumValue {
    pub t: f64,
    pub q: f64,
    pub value: f64,
    /// Set within `2^{−20}` of an endpoint of `[e⁻, e⁺]`, where `E` may jump.
    pub approximate: bool,
}

/// The extremal local entropies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Extremes {
    pub e_minus: f64,
    pub e_max: f64,
    pub e_plus: f64,
    pub h_mu: f64,
    pub degenerate: bool,
}

/// Evaluator for `P(qφ)`, `t(q)` and `E(t)` of one potential on one support.
#[derive(Clone, Debug)]
pub struct Spectrum {
    potential: Potential,
    support: Support,
    minus: CycleMean,
    plus: CycleMean,
    extremes: Extremes,
}

impl Spectrum {
    pub fn new(potential: &Potential) -> Result<Spectrum> {
        Spectrum::with_support(potential, &Support::full(potential.memory()))
    }

    pub fn with_support(potential: &Potential, support: &Support) -> Result<Spectrum> {
        let potential = potential.lift(support.memory())?;
        let neg: Vec<f64> = potential.table().iter().map(|v| -v).collect();
        let minus = min_mean_cycle(support, &neg);
        let plus = max_mean_cycle(support, &neg);
        let degenerate = match (&minus.exact, &plus.exact) {
            (Some(a), Some(b)) => a == b,
            _ => (plus.mean - minus.mean).abs() <= 1e-12,
        };
        let mut s = Spectrum {
            potential,
            support: support.clone(),
            extremes: Extremes {
                e_minus: minus.mean,
                e_max: minus.mean,
                e_plus: plus.mean,
                h_mu: minus.mean,
                degenerate,
            },
            minus,
            plus,
        };
        s.extremes.e_max = s.t_of_q(0.0)?;
        s.extremes.h_mu = s.t_of_q(1.0)?;
        if degenerate {
            s.extremes.e_max = s.extremes.e_minus;
            s.extremes.h_mu = s.extremes.e_minus;
        }
        Ok(s)
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn extremes(&self) -> Extremes {
        self.extremes
    }

    pub fn min_cycle(&self) -> &CycleMean {
        &self.minus
    }

    pub fn max_cycle(&self) -> &CycleMean {
        &self.plus
    }

    pub fn system(&self, q: f64) -> Result<TransferSystem> {
        TransferSystem::with_support(&self.potential, q, &self.support)
    }

    pub fn pressure(&self, q: f64) -> Result<f64> {
        Ok(self.system(q)?.pressure())
    }

    /// `∫(−φ) dμ_{qφ}` from the exact Gibbs chain of `qφ`.
    pub fn t_of_q(&self, q: f64) -> Result<f64> {
        Ok(self.pressure_and_t(q)?.1)
    }

    fn pressure_and_t(&self, q: f64) -> Result<(f64, f64)> {
        let sys = self.system(q)?;
        let chain = GibbsChain::from_system(&sys, &self.potential.scaled(q));
        let pi = chain.stationary();
        let smask = pi.len() - 1;
        let t = -chain
            .transitions()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(c, &p)| pi[c & smask] * p * self.potential.value(c as u64))
            .sum::<f64>();
        Ok((sys.pressure(), t))
    }

    /// Central finite difference `−(P(q+δ) − P(q−δ)) / 2δ`, kept as a cross-check.
    pub fn t_of_q_fd(&self, q: f64, step: f64) -> Result<f64> {
        Ok(-(self.pressure(q + step)? - self.pressure(q - step)?) / (2.0 * step))
    }

    /// `E(t)`, or `None` when the level set is empty.
    pub fn entropy_spectrum(&self, t: f64) -> Result<Option<SpectrumValue>> {
        let Extremes {
            e_minus, e_plus, ..
        } = self.extremes;
        let tol = 1e-12 * (1.0 + t.abs());
        if self.extremes.degenerate {
            if (t - e_minus).abs() <= tol {
                return Ok(Some(SpectrumValue {
                    t,
                    q: 0.0,
                    value: self.pressure(0.0)?,
                    approximate: false,
                }));
            }
            return Ok(None);
        }
        if !t.is_finite() || t < e_minus - tol || t > e_plus + tol {
            return Ok(None);
        }
        let approximate = (t - e_minus).abs() < ENDPOINT_FLAG || (e_plus - t).abs() < ENDPOINT_FLAG;
        let (p_hi, t_hi) = self.pressure_and_t(-Q_CAP)?;
        if t >= t_hi {
            return Ok(Some(SpectrumValue {
                t,
                q: -Q_CAP,
                value: p_hi - Q_CAP * t,
                approximate: true,
            }));
        }
        let (p_lo, t_lo) = self.pressure_and_t(Q_CAP)?;
        if t <= t_lo {
            return Ok(Some(SpectrumValue {
                t,
                q: Q_CAP,
                value: p_lo + Q_CAP * t,
                approximate: true,
            }));
        }
        // t(q) is decreasing; Illinois regula falsi on g(q) = t(q) − t.
        let (mut a, mut ga) = (-Q_CAP, t_hi - t);
        let (mut b, mut gb) = (Q_CAP, t_lo - t);
        let mut side = 0i8;
        let mut best = (a, p_hi, ga);
        for _ in 0..200 {
            let mut q = (a * gb - b * ga) / (gb - ga);
            if !q.is_finite() || q <= a || q >= b {
                q = 0.5 * (a + b);
            }
            let (p, tq) = self.pressure_and_t(q)?;
            let g = tq - t;
            if g.abs() < best.2.abs() {
                best = (q, p, g);
            }
            if g.abs() <= 1e-13 * (1.0 + t.abs()) || (b - a) <= 1e-13 {
                break;
            }
            if g > 0.0 {
                a = q;
                ga = g;
                if side == 1 {
                    gb *= 0.5;
                }
                side = 1;
            } else {
                b = q;
                gb = g;
                if side == -1 {
                    ga *= 0.5;
                }
                side = -1;
            }
        }
        let (q, p, _) = best;
        Ok(Some(SpectrumValue {
            t,
            q,
            value: p + q * t,
            approximate,
        }))
    }

    /// `E(t)` with empty level sets read as 0.
    pub fn entropy_or_zero(&self, t: f64) -> Result<f64> {
        Ok(self
            .entropy_spectrum(t)?
            .map(|v| v.value.max(0.0))
            .unwrap_or(0.0))
    }

    pub fn profile(&self, q_grid: &[f64]) -> Result<SpectrumProfile> {
        let mut pressure = Vec::with_capacity(q_grid.len());
        let mut t = Vec::with_capacity(q_grid.len());
        let mut e = Vec::with_capacity(q_grid.len());
        for &q in q_grid {
            let (p, tq) = self.pressure_and_t(q)?;
            pressure.push(p);
            t.push(tq);
            e.push(p + q * tq);
        }
        Ok(SpectrumProfile {
            q: q_grid.to_vec(),
            pressure,
            t,
            e,
            extremes: self.extremes,
            kappa_f: 1.0 / self.extremes.e_plus,
        })
    }

    /// The paper's predicted dimensions of `F^κ` and `I^κ` at the given `κ`.
    pub fn predict_cover(&self, psi: Option<&Potential>, kappa: f64) -> Result<CoverPrediction> {
        if !kappa.is_finite() || kappa <= 0.0 {
            return Err(Error::param(format!("kappa must be positive, got {kappa}")));
        }
        let Extremes {
            e_max,
            e_plus,
            h_mu,
            ..
        } = self.extremes;
        let s = 1.0 / kappa;
        let f_empty = s > e_plus;
        let dim_f = if s <= e_max {
            1.0
        } else if f_empty {
            0.0
        } else {
            self.entropy_or_zero(s)?
        };
        let dim_i = if s <= h_mu {
            s
        } else if s < e_max {
            self.entropy_or_zero(s)?
        } else {
            1.0
        };
        let kappa_phi_psi = match psi {
            Some(psi) => {
                let chain = GibbsChain::new(psi)?;
                1.0 / -chain.integrate(&self.potential)
            }
            None => 1.0 / h_mu,
        };
        Ok(CoverPrediction {
            kappa,
            inv_kappa: s,
            dim_f: dim_f.clamp(0.0, 1.0),
            dim_i: dim_i.clamp(0.0, 1.0),
            kappa_phi_psi,
            kappa_f: 1.0 / e_plus,
            f_empty,
            boundary_caveat: (s - e_plus).abs() <= 1e-12,
        })
    }
}

/// Grid of `(q, P(qφ), t(q), E(t(q)))` with the extremes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumProfile {
    pub q: Vec<f64>,
    pub pressure: Vec<f64>,
    pub t: Vec<f64>,
    pub e: Vec<f64>,
    pub extremes: Extremes,
    pub kappa_f: f64,
}

impl SpectrumProfile {
    /// `(t, sup_{s ≤ t} E(s), sup_{s ≥ t} E(s))` along the grid sorted by `t`.
    pub fn envelopes(&self) -> Vec<(f64, f64, f64)> {
        let mut pts: Vec<(f64, f64)> = self.t.iter().copied().zip(self.e.iter().copied()).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut below = Vec::with_capacity(pts.len());
        let mut run = f64::NEG_INFINITY;
        for &(_, e) in &pts {
            run = run.max(e);
            below.push(run);
        }
        let mut above = vec![0.0; pts.len()];
        run = f64::NEG_INFINITY;
        for i in (0..pts.len()).rev() {
            run = run.max(pts[i].1);
            above[i] = run;
        }
        pts.iter()
            .zip(below.into_iter().zip(above))
            .map(|(&(t, _), (b, a))| (t, b, a))
            .collect()
    }
}

/// `n` points uniform on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// The default grid: 513 points on `[−8, 8]`.
pub fn default_q_grid() -> Vec<f64> {
    uniform_grid(-8.0, 8.0, 513)
}

/// Predicted covering dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoverPrediction {
    pub kappa: f64,
    pub inv_kappa: f64,
    pub dim_f: f64,
    pub dim_i: f64,
    pub kappa_phi_psi: f64,
    pub kappa_f: f64,
    pub f_empty: bool,
    /// `1/κ = e⁺`, where the dimension of `F^κ` is not determined.
    pub boundary_caveat: bool,
}

pub fn t_of_q(potential: &Potential, q: f64) -> Result<f64> {
    Spectrum::new(potential)?.t_of_q(q)
}

pub fn entropy_spectrum(potential: &Potential, t: f64) -> Result<Option<SpectrumValue>> {
    Spectrum::new(potential)?.entropy_spectrum(t)
}

pub fn entropy_extremes(potential: &Potential) -> Result<Extremes> {
    Ok(Spectrum::new(potential)?.extremes())
}

pub fn predict_cover(phi: &Potential, psi: Option<&Potential>, kappa: f64) -> Result<CoverPrediction> {
    Spectrum::new(phi)?.predict_cover(psi, kappa)
}

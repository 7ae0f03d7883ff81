use rand::RngCore;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::orbit::{Orbit, OrbitBuilder, OrbitMeta, MAX_ORBIT_LEN};
use crate::rng::{self, Generator};
use crate::symbolic::{low_mask, Word};

use super::{Potential, Support, TransferSystem};

/// The Gibbs measure of a locally constant potential as a Markov chain on `(m−1)`-words.
#[derive(Clone, Debug)]
pub struct GibbsChain {
    memory: usize,
    stationary: Vec<f64>,
    transitions: Vec<f64>,
    log2_stationary: Vec<f64>,
    log2_transitions: Vec<f64>,
    potential: Potential,
    support: Support,
    pressure: f64,
}

/// Exact two-sided constants of the Gibbs and quasi-Bernoulli properties.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GibbsConstants {
    /// Smallest `γ ≥ 1` with `γ⁻¹ ≤ μ(C_n(x)) / 2^{S_nφ(x)} ≤ γ`.
    pub gamma: f64,
    pub qb_lower: f64,
    pub qb_upper: f64,
    /// Longest word length examined; the extremes are attained by then.
    pub certified_length: usize,
}

impl GibbsChain {
    pub fn new(potential: &Potential) -> Result<GibbsChain> {
        GibbsChain::with_support(potential, &Support::full(potential.memory()))
    }

    /// The equilibrium state of `potential` restricted to a subshift.
    pub fn with_support(potential: &Potential, support: &Support) -> Result<GibbsChain> {
        let system = TransferSystem::with_support(potential, 1.0, support)?;
        Ok(GibbsChain::from_system(&system, potential))
    }

    pub fn from_system(system: &TransferSystem, potential: &Potential) -> GibbsChain {
        let memory = system.memory();
        let states = 1usize << (memory - 1);
        let smask = states - 1;
        let h = system.right();
        let nu = system.left();
        let lam = system.scaled_lambda();
        let mut transitions: Vec<f64> = (0..1usize << memory)
            .map(|c| {
                let (u, v) = (c & smask, c >> 1);
                let w = system.scaled_weight(c);
                if w == 0.0 || h[u] == 0.0 {
                    0.0
                } else {
                    w * h[v] / (lam * h[u])
                }
            })
            .collect();
        // Remove the eigen-solver's rounding so rows are exactly stochastic.
        for u in 0..states {
            let c1 = u | (1 << (memory - 1));
            let row = transitions[u] + transitions[c1];
            if row > 0.0 {
                transitions[u] /= row;
                transitions[c1] /= row;
            }
        }
        let mut stationary: Vec<f64> = nu.iter().zip(h).map(|(a, b)| a * b).collect();
        normalize_sum(&mut stationary);
        let mut next = vec![0.0; states];
        for _ in 0..64 {
            next.iter_mut().for_each(|x| *x = 0.0);
            for (c, &p) in transitions.iter().enumerate() {
                next[c >> 1] += stationary[c & smask] * p;
            }
            normalize_sum(&mut next);
            let change = next
                .iter()
                .zip(&stationary)
                .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            std::mem::swap(&mut stationary, &mut next);
            if change < 1e-16 {
                break;
            }
        }
        let pressure = system.pressure();
        let lifted = potential
            .lift(memory)
            .expect("support memory is at least the potential memory");
        GibbsChain {
            memory,
            log2_stationary: stationary.iter().map(|p| p.log2()).collect(),
            log2_transitions: transitions.iter().map(|p| p.log2()).collect(),
            stationary,
            transitions,
            potential: lifted.shifted(-pressure).with_normalized_flag(true),
            support: system.support().clone(),
            pressure,
        }
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    /// Pressure of the source potential on the support; the chain uses the potential minus it.
    pub fn source_pressure(&self) -> f64 {
        self.pressure
    }

    /// The normalized potential whose equilibrium state this is.
    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// `P(next symbol = b | state u)` indexed by the edge code `u | b << (m−1)`.
    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    /// `μ([w])` for a word of any length.
    pub fn measure_symbols(&self, w: &[u8]) -> f64 {
        let k = self.memory - 1;
        let n = w.len();
        if n < k {
            let code = pack(w);
            let mask = low_mask(n) as usize;
            return self
                .stationary
                .iter()
                .enumerate()
                .filter(|(s, _)| s & mask == code)
                .map(|(_, p)| p)
                .sum();
        }
        let mut state = pack(&w[..k]);
        let mut mass = self.stationary[state];
        for &b in &w[k..] {
            let c = state | ((b as usize) << k);
            mass *= self.transitions[c];
            state = c >> 1;
        }
        mass
    }

    pub fn cylinder_measure(&self, w: &Word) -> f64 {
        self.measure_symbols(&w.symbols())
    }

    /// `log₂ μ` of every prefix of `w`, index `i` holding the prefix of length `i`.
    pub fn prefix_log2_measures(&self, w: &[u8]) -> Vec<f64> {
        let k = self.memory - 1;
        let mut out = Vec::with_capacity(w.len() + 1);
        out.push(0.0);
        for i in 1..=w.len().min(k) {
            out.push(self.measure_symbols(&w[..i]).log2());
        }
        if w.len() > k {
            let mut state = pack(&w[..k]);
            let mut acc = self.log2_stationary[state];
            for &b in &w[k..] {
                let c = state | ((b as usize) << k);
                acc += self.log2_transitions[c];
                state = c >> 1;
                out.push(acc);
            }
        }
        out
    }

    /// Calls `f(code, μ)` for every word of length `n` with positive measure.
    pub fn for_each_word(&self, n: usize, mut f: impl FnMut(u64, f64)) {
        let k = self.memory - 1;
        if n < k {
            let mask = low_mask(n) as usize;
            let mut marginal = vec![0.0; 1 << n];
            for (s, p) in self.stationary.iter().enumerate() {
                marginal[s & mask] += p;
            }
            for (code, p) in marginal.into_iter().enumerate() {
                if p > 0.0 {
                    f(code as u64, p);
                }
            }
            return;
        }
        for (s, &p) in self.stationary.iter().enumerate() {
            if p > 0.0 {
                self.extend(s, s as u64, k, n, p, &mut f);
            }
        }
    }

    fn extend(&self, state: usize, code: u64, depth: usize, n: usize, mass: f64, f: &mut impl FnMut(u64, f64)) {
        if depth == n {
            f(code, mass);
            return;
        }
        let k = self.memory - 1;
        for b in 0..2usize {
            let c = state | (b << k);
            let p = self.transitions[c];
            if p > 0.0 {
                self.extend(c >> 1, code | ((b as u64) << depth), depth + 1, n, mass * p, f);
            }
        }
    }

    /// Metric entropy `h_μ` in bits.
    pub fn entropy(&self) -> f64 {
        let smask = self.stationary.len() - 1;
        -self
            .transitions
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(c, &p)| self.stationary[c & smask] * p * p.log2())
            .sum::<f64>()
    }

    /// `∫ f dμ` for a locally constant function.
    pub fn integrate(&self, f: &Potential) -> f64 {
        let m = f.memory().max(self.memory);
        let lifted = f.lift(m).expect("memory within bounds");
        let mut total = 0.0;
        self.for_each_word(m, |code, mass| total += mass * lifted.value(code));
        total
    }

    /// Samples `x_0 … x_{len−1}` from the chain with a fresh generator seeded by `seed`.
    pub fn sample_orbit(&self, len: usize, seed: u64) -> Result<Orbit> {
        let mut g = rng::generator(seed);
        let o = self.sample_orbit_with(len, &mut g)?;
        Ok(o.with_meta(OrbitMeta {
            source: "gibbs".into(),
            seed: Some(seed),
        }))
    }

    pub fn sample_orbit_with(&self, len: usize, g: &mut Generator) -> Result<Orbit> {
        if len > MAX_ORBIT_LEN {
            return Err(Error::Budget(format!(
                "orbit length {len} exceeds {MAX_ORBIT_LEN}"
            )));
        }
        let k = self.memory - 1;
        let mut b = OrbitBuilder::with_capacity(len);
        let u = rng::unit(g.next_u64());
        let mut acc = 0.0;
        let mut state = self
            .stationary
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(0);
        for (s, &p) in self.stationary.iter().enumerate() {
            acc += p;
            if p > 0.0 && u < acc {
                state = s;
                break;
            }
        }
        for i in 0..k.min(len) {
            b.push(((state >> i) & 1) as u64);
        }
        let thresholds: Vec<u64> = (0..self.stationary.len())
            .map(|s| threshold(self.transitions[s | (1 << k)]))
            .collect();
        if k == 0 {
            let t = thresholds[0];
            for _ in 0..len {
                b.push((g.next_u64() < t) as u64);
            }
        } else {
            let high = k - 1;
            for _ in k.min(len)..len {
                let bit = (g.next_u64() < thresholds[state]) as usize;
                b.push(bit as u64);
                state = (state >> 1) | (bit << high);
            }
        }
        Ok(b.finish(OrbitMeta {
            source: "gibbs".into(),
            seed: None,
        }))
    }

    /// Exact Gibbs and quasi-Bernoulli constants by exhaustive search.
    pub fn gibbs_constants(&self, max_len: usize) -> Result<GibbsConstants> {
        let k = self.memory - 1;
        let n_star = max_len.max(2 * k).max(1);
        if n_star + k > 30 {
            return Err(Error::Budget(format!(
                "Gibbs constant search over words of length {} is too large",
                n_star + k
            )));
        }
        let phi = &self.potential;
        let mut gamma: f64 = 1.0;
        for n in 1..=n_star {
            let mut words: Vec<(u64, f64)> = Vec::new();
            self.for_each_word(n, |c, p| words.push((c, p)));
            for (code, mass) in words {
                let w = Word::from_bits(code, n)?.symbols();
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for tail in 0..1u64 << k {
                    let mut ext = w.clone();
                    ext.extend((0..k).map(|i| ((tail >> i) & 1) as u8));
                    if !self.support.admits(&ext) {
                        continue;
                    }
                    let s = birkhoff_over(phi, &ext, n);
                    lo = lo.min(s);
                    hi = hi.max(s);
                }
                let lm = mass.log2();
                gamma = gamma.max((lm - lo).exp2()).max((hi - lm).exp2());
            }
        }
        let qb_len = k.max(1).min(max_len.max(1));
        let mut table: Vec<Vec<(u64, f64)>> = vec![Vec::new(); qb_len + 1];
        for (n, slot) in table.iter_mut().enumerate().skip(1) {
            self.for_each_word(n, |c, p| slot.push((c, p)));
        }
        let mut qb_lower = f64::INFINITY;
        let mut qb_upper: f64 = 0.0;
        for a_len in 1..=qb_len {
            for &(a, pa) in &table[a_len] {
                for (b_len, row) in table.iter().enumerate().skip(1) {
                    for &(b, pb) in row {
                        let mut ab = Word::from_bits(a, a_len)?.symbols();
                        ab.extend(Word::from_bits(b, b_len)?.symbols());
                        let r = self.measure_symbols(&ab) / (pa * pb);
                        qb_lower = qb_lower.min(r);
                        qb_upper = qb_upper.max(r);
                    }
                }
            }
        }
        Ok(GibbsConstants {
            gamma,
            qb_lower,
            qb_upper,
            certified_length: n_star,
        })
    }
}

/// `S_n φ` of a sequence whose first `n + m − 1` symbols are `ext`.
fn birkhoff_over(phi: &Potential, ext: &[u8], n: usize) -> f64 {
    let m = phi.memory();
    (0..n).map(|j| phi.value(pack(&ext[j..j + m]) as u64)).sum()
}

fn normalize_sum(x: &mut [f64]) {
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= total);
}

fn pack(w: &[u8]) -> usize {
    w.iter()
        .enumerate()
        .fold(0usize, |acc, (i, &b)| acc | ((b as usize) << i))
}

fn threshold(p: f64) -> u64 {
    if p <= 0.0 {
        0
    } else if p >= 1.0 {
        u64::MAX
    } else {
        (p * 18_446_744_073_709_551_616.0) as u64
    }
}

//! Hitting and return times of orbit segments to cylinders.
//!
//! `τ(x, C) = min{l ≥ 1 : σˡx ∈ C}`; the window at `l = 0` is never counted. A hit at
//! `l` for an `n`-cylinder needs `l + n ≤ L`, so larger `l` is beyond the horizon.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::orbit::Orbit;
use crate::symbolic::{low_mask, neighbor_cylinders, Word};
use crate::thermo::GibbsChain;

/// Per-`n` hitting times with their exponents.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HittingProfile {
    pub target: String,
    /// `tau[n − 1] = τₙ`; `None` when no hit occurs within the horizon.
    pub tau: Vec<Option<u64>>,
    pub horizon: u64,
    /// `(1/n) log₂ τₙ` where defined.
    pub alpha_estimates: Vec<Option<f64>>,
    /// Minimum of the estimates over `n ∈ [lo, hi]`.
    pub alpha: Option<f64>,
    /// Set when some `n` in the window exceeded the horizon, so `alpha` is a lower bound.
    pub censored: bool,
    pub alpha_window: (usize, usize),
}

impl HittingProfile {
    pub fn new(target: String, tau: Vec<Option<u64>>, horizon: u64) -> HittingProfile {
        let n_max = tau.len();
        let alpha_estimates = tau
            .iter()
            .enumerate()
            .map(|(i, t)| t.map(|t| (t as f64).log2() / (i + 1) as f64))
            .collect();
        let mut p = HittingProfile {
            target,
            tau,
            horizon,
            alpha_estimates,
            alpha: None,
            censored: false,
            alpha_window: (0, 0),
        };
        p.set_alpha_window((n_max / 2).max(1), n_max);
        p
    }

    /// Recomputes `alpha` over `n ∈ [lo, hi]`.
    pub fn set_alpha_window(&mut self, lo: usize, hi: usize) {
        let hi = hi.min(self.tau.len());
        let lo = lo.max(1);
        self.alpha_window = (lo, hi);
        if lo > hi {
            self.alpha = None;
            self.censored = false;
            return;
        }
        let window = &self.alpha_estimates[lo - 1..hi];
        self.censored = window.iter().any(Option::is_none);
        self.alpha = window
            .iter()
            .flatten()
            .copied()
            .fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.min(v))));
    }

    pub fn n_max(&self) -> usize {
        self.tau.len()
    }

    /// `τₙ` for `n ≥ 1`.
    pub fn tau_at(&self, n: usize) -> Option<u64> {
        self.tau[n - 1]
    }
}

/// Longest common prefix of `σˡx` and `target` for every `l` (index 0 included).
///
/// Entries near the end are truncated by the orbit length.
pub fn lcp_profile(o: &Orbit, target: &[u8]) -> Vec<u32> {
    if target.len() <= 64 {
        lcp_profile_packed(o, target)
    } else {
        lcp_profile_z(o, target)
    }
}

fn pack_target(target: &[u8]) -> u64 {
    target
        .iter()
        .enumerate()
        .fold(0u64, |acc, (i, &b)| acc | ((b as u64 & 1) << i))
}

fn lcp_profile_packed(o: &Orbit, target: &[u8]) -> Vec<u32> {
    let n = target.len();
    let t = pack_target(target);
    let len = o.len();
    (0..len)
        .map(|l| {
            let avail = n.min(len - l);
            let x = (o.window_bits(l) ^ t) & low_mask(avail);
            (x.trailing_zeros() as usize).min(avail) as u32
        })
        .collect()
}

/// The Z-algorithm path: works for targets of any length.
pub fn lcp_profile_z(o: &Orbit, target: &[u8]) -> Vec<u32> {
    let n = target.len();
    let mut s: Vec<u8> = Vec::with_capacity(n + 1 + o.len());
    s.extend_from_slice(target);
    s.push(2);
    s.extend(o.symbols());
    let z = z_array(&s);
    (0..o.len()).map(|l| z[n + 1 + l].min(n) as u32).collect()
}

fn z_array(s: &[u8]) -> Vec<usize> {
    let n = s.len();
    let mut z = vec![0; n];
    if n == 0 {
        return z;
    }
    z[0] = n;
    let (mut l, mut r) = (0usize, 0usize);
    for i in 1..n {
        if i < r {
            z[i] = (r - i).min(z[i - l]);
        }
        while i + z[i] < n && s[z[i]] == s[i + z[i]] {
            z[i] += 1;
        }
        if i + z[i] > r {
            l = i;
            r = i + z[i];
        }
    }
    z
}

/// `τₙ(x, target)` for `n = 1..=n_max` in one pass with early exit.
pub fn hitting_times(o: &Orbit, target: &[u8], n_max: usize) -> Result<HittingProfile> {
    if n_max > target.len() {
        return Err(Error::param(format!(
            "n_max {n_max} exceeds target length {}",
            target.len()
        )));
    }
    let target = &target[..n_max];
    let len = o.len();
    let mut tau = vec![None; n_max];
    let mut found = 0usize;
    if n_max <= 64 {
        let t = pack_target(target);
        for l in 1..len {
            let avail = n_max.min(len - l);
            if avail <= found {
                break;
            }
            let x = o.window_bits(l) ^ t;
            let lcp = (x.trailing_zeros() as usize).min(avail);
            if lcp > found {
                for slot in &mut tau[found..lcp] {
                    *slot = Some(l as u64);
                }
                found = lcp;
                if found == n_max {
                    break;
                }
            }
        }
    } else {
        let lcp = lcp_profile_z(o, target);
        for (l, &m) in lcp.iter().enumerate().skip(1) {
            let m = m as usize;
            if m > found {
                for slot in &mut tau[found..m] {
                    *slot = Some(l as u64);
                }
                found = m;
            }
        }
    }
    Ok(HittingProfile::new(
        describe(target),
        tau,
        len as u64,
    ))
}

fn describe(target: &[u8]) -> String {
    target.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
}

/// `τₙ(x, x)`: returns of the orbit's own prefix.
pub fn return_profile(o: &Orbit, n_max: usize) -> Result<HittingProfile> {
    let n_max = n_max.min(o.len());
    let prefix: Vec<u8> = (0..n_max).map(|i| o.symbol(i)).collect();
    let mut p = hitting_times(o, &prefix, n_max)?;
    p.target = "return".into();
    Ok(p)
}

/// First `l ≥ from` with `σˡx ∈ [w]`.
pub fn first_occurrence(o: &Orbit, w: &Word, from: usize) -> Option<u64> {
    let n = w.len();
    let len = o.len();
    if n > len {
        return None;
    }
    let mask = low_mask(n);
    let bits = w.bits();
    (from..=len - n)
        .find(|&l| o.window_bits(l) & mask == bits)
        .map(|l| l as u64)
}

/// Hitting times of the target and of its two lexicographic neighbors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StarProfile {
    pub plain: HittingProfile,
    pub minus: Vec<Option<u64>>,
    pub plus: Vec<Option<u64>>,
    /// `τ*ₙ = min(τₙ⁻, τₙ, τₙ⁺)`.
    pub star: HittingProfile,
}

pub fn star_hitting_times(o: &Orbit, target: &[u8], n_max: usize) -> Result<StarProfile> {
    if n_max > 64 {
        return Err(Error::WordTooLong(n_max));
    }
    let plain = hitting_times(o, target, n_max)?;
    let full = Word::from_symbols(&target[..n_max])?;
    let mut minus = Vec::with_capacity(n_max);
    let mut plus = Vec::with_capacity(n_max);
    let mut star = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let (pred, succ) = neighbor_cylinders(&full.prefix(n));
        let m = first_occurrence(o, &pred, 1);
        let p = first_occurrence(o, &succ, 1);
        minus.push(m);
        plus.push(p);
        star.push([m, plain.tau[n - 1], p].into_iter().flatten().min());
    }
    let star = HittingProfile::new(format!("star:{}", plain.target), star, o.len() as u64);
    Ok(StarProfile {
        plain,
        minus,
        plus,
        star,
    })
}

/// One row of a hitting-exponent versus local-entropy comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChazottesPoint {
    pub n: usize,
    pub tau: Option<u64>,
    pub hit_exponent: Option<f64>,
    pub local_entropy: f64,
}

/// For each cylinder `C_n`, `(1/n) log₂ τ(x, C_n)` against `−(1/n) log₂ μ(C_n)`.
pub fn chazottes_profile(o: &Orbit, chain: &GibbsChain, cylinders: &[Word]) -> Vec<ChazottesPoint> {
    cylinders
        .iter()
        .map(|c| {
            let n = c.len();
            let tau = first_occurrence(o, c, 1);
            ChazottesPoint {
                n,
                tau,
                hit_exponent: tau.map(|t| (t as f64).log2() / n as f64),
                local_entropy: -chain.cylinder_measure(c).log2() / n as f64,
            }
        })
        .collect()
}

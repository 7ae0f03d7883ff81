//! Covering estimators: hit censuses, dimension slopes of `F^κ` and `I^κ`, the subword
//! census by local entropy, and direct covering of the circle by shrinking intervals.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::orbit::Orbit;
use crate::spectrum::{CoverPrediction, Spectrum};
use crate::stats::{linear_fit, Regression};
use crate::symbolic::{low_mask, CirclePoint};
use crate::thermo::{GibbsChain, Support};

/// Largest word length for a membership bitmap.
pub const MAX_CENSUS_LEN: usize = 30;
/// Largest word length for first-visit tables and the subword census.
pub const MAX_TABLE_LEN: usize = 26;
/// Default horizon slack `ε` in `K_n = 2^{(1/κ − ε)n}`.
pub const DEFAULT_SLACK: f64 = 0.05;

const NEVER: u32 = u32::MAX;

/// A set of `n`-words as a bitmap over their codes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HitBitmap {
    n: usize,
    words: Vec<u64>,
}

impl HitBitmap {
    pub fn new(n: usize) -> Result<HitBitmap> {
        if n > MAX_CENSUS_LEN {
            return Err(Error::Budget(format!(
                "a census of {n}-words needs 2^{n} bits; the limit is n = {MAX_CENSUS_LEN}"
            )));
        }
        Ok(HitBitmap {
            n,
            words: vec![0; (1usize << n).div_ceil(64)],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn insert(&mut self, code: u64) {
        self.words[(code >> 6) as usize] |= 1 << (code & 63);
    }

    #[inline]
    pub fn contains(&self, code: u64) -> bool {
        self.words[(code >> 6) as usize] >> (code & 63) & 1 == 1
    }

    pub fn count(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Merges a shard computed over another stretch of the same orbit.
    pub fn union_with(&mut self, other: &HitBitmap) {
        assert_eq!(self.n, other.n);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn codes(&self) -> impl Iterator<Item = u64> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as u64;
                w &= w - 1;
                Some(((i as u64) << 6) | b)
            })
        })
    }
}

/// Distinct `n`-windows among positions `1..=K`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HitCensus {
    pub n: usize,
    pub horizon: u64,
    pub distinct: u64,
    pub bitmap: HitBitmap,
}

impl HitCensus {
    pub fn unhit(&self) -> u64 {
        (1u64 << self.n) - self.distinct
    }
}

pub fn hit_census(o: &Orbit, n: usize, horizon: u64) -> Result<HitCensus> {
    hit_census_range(o, n, 1, horizon)
}

/// Census over positions `from..=to`; shards of a census union to the whole.
pub fn hit_census_range(o: &Orbit, n: usize, from: u64, to: u64) -> Result<HitCensus> {
    let mut bitmap = HitBitmap::new(n)?;
    let last = o.len().checked_sub(n).ok_or_else(|| Error::param("word longer than the orbit"))?;
    if to > last as u64 {
        return Err(Error::param(format!(
            "horizon {to} exceeds L − n = {last}"
        )));
    }
    let mask = low_mask(n);
    for l in from as usize..=to as usize {
        bitmap.insert(o.window_bits(l) & mask);
    }
    Ok(HitCensus {
        n,
        horizon: to,
        distinct: bitmap.count(),
        bitmap,
    })
}

/// First position `l ≥ 1` of every `n`-word for all `n ≤ n_max`, from a single scan.
#[derive(Clone, Debug)]
pub struct FirstVisits {
    orbit_len: usize,
    tables: Vec<Vec<u32>>,
}

impl FirstVisits {
    pub fn new(o: &Orbit, n_max: usize) -> Result<FirstVisits> {
        if n_max == 0 || n_max > MAX_TABLE_LEN {
            return Err(Error::Budget(format!(
                "first-visit tables need 1 ≤ n ≤ {MAX_TABLE_LEN}, got {n_max}"
            )));
        }
        let len = o.len();
        if len <= n_max {
            return Err(Error::param("orbit shorter than the longest word"));
        }
        let mask = low_mask(n_max);
        let mut top = vec![NEVER; 1 << n_max];
        for l in 1..=len - n_max {
            let slot = &mut top[(o.window_bits(l) & mask) as usize];
            if *slot == NEVER {
                *slot = l as u32;
            }
        }
        let mut tables = vec![top];
        for n in (1..n_max).rev() {
            let above = tables.last().expect("non-empty");
            let half = 1usize << n;
            let mut t: Vec<u32> = (0..half).map(|c| above[c].min(above[c | half])).collect();
            // The window at L − n is an n-window with no (n+1)-extension inside the orbit.
            let l = len - n;
            let code = (o.window_bits(l) & low_mask(n)) as usize;
            t[code] = t[code].min(l as u32);
            tables.push(t);
        }
        tables.reverse();
        Ok(FirstVisits {
            orbit_len: len,
            tables,
        })
    }

    pub fn n_max(&self) -> usize {
        self.tables.len()
    }

    pub fn orbit_len(&self) -> usize {
        self.orbit_len
    }

    /// `τ(x, [w])` for the `n`-word with code `code`, if seen.
    pub fn first(&self, n: usize, code: u64) -> Option<u64> {
        let v = self.tables[n - 1][code as usize];
        (v != NEVER).then_some(v as u64)
    }

    pub fn table(&self, n: usize) -> &[u32] {
        &self.tables[n - 1]
    }

    /// `D_n(K)`: words first seen at some `l ≤ K`, optionally among admissible codes only.
    pub fn hit_count(&self, n: usize, horizon: u64, admissible: Option<&[bool]>) -> u64 {
        let t = self.table(n);
        match admissible {
            None => t.iter().filter(|&&v| (v as u64) <= horizon && v != NEVER).count() as u64,
            Some(a) => t
                .iter()
                .zip(a)
                .filter(|(&v, &ok)| ok && v != NEVER && (v as u64) <= horizon)
                .count() as u64,
        }
    }
}

/// Which `n`-word codes are admissible for a support.
pub fn admissible_codes(support: &Support, n: usize) -> Vec<bool> {
    (0..1u64 << n)
        .map(|c| {
            let symbols: Vec<u8> = (0..n).map(|i| (c >> i & 1) as u8).collect();
            support.admits(&symbols)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverOptions {
    pub slack: f64,
    /// Restrict censuses to words admissible for this support.
    pub restrict: Option<Support>,
}

impl Default for CoverOptions {
    fn default() -> Self {
        CoverOptions {
            slack: DEFAULT_SLACK,
            restrict: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoverRow {
    pub n: usize,
    pub horizon: u64,
    /// `2^{n/κ} > L − n`: the horizon is capped by the orbit.
    pub saturated: bool,
    pub words: u64,
    pub hit: u64,
    pub unhit: u64,
    pub dim_i_est: f64,
    pub dim_f_est: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverEstimate {
    pub kappa: f64,
    pub slack: f64,
    pub orbit_len: usize,
    pub rows: Vec<CoverRow>,
    /// Least squares of `log₂ D_n` against `n`.
    pub slope_i: Option<Regression>,
    /// Least squares of `log₂ max(U_n, 1)` against `n`.
    pub slope_f: Option<Regression>,
    pub prediction: Option<CoverPrediction>,
}

impl CoverEstimate {
    pub fn feasible_rows(&self) -> impl Iterator<Item = &CoverRow> {
        self.rows.iter().filter(|r| !r.saturated)
    }
}

pub fn estimate_dims(o: &Orbit, spectrum: &Spectrum, kappa: f64, n_grid: &[usize]) -> Result<CoverEstimate> {
    let n_max = n_grid.iter().copied().max().unwrap_or(1);
    let visits = FirstVisits::new(o, n_max)?;
    estimate_dims_with(&visits, Some(spectrum), kappa, n_grid, &CoverOptions::default())
}

/// Dimension estimates from precomputed first visits; `K_n = min(⌊2^{(1/κ − ε)n}⌋, L − n)`.
pub fn estimate_dims_with(
    visits: &FirstVisits,
    spectrum: Option<&Spectrum>,
    kappa: f64,
    n_grid: &[usize],
    options: &CoverOptions,
) -> Result<CoverEstimate> {
    if !kappa.is_finite() || kappa <= 0.0 {
        return Err(Error::param(format!("kappa must be positive, got {kappa}")));
    }
    let len = visits.orbit_len();
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        if n == 0 || n > visits.n_max() {
            return Err(Error::param(format!("word length {n} outside 1..={}", visits.n_max())));
        }
        let cap = (len - n) as u64;
        let exponent = (1.0 / kappa - options.slack) * n as f64;
        let horizon = if exponent >= 63.0 {
            cap
        } else {
            (exponent.exp2().floor() as u64).min(cap)
        };
        let saturated = (n as f64 / kappa).exp2() > cap as f64;
        let admissible = options.restrict.as_ref().map(|s| admissible_codes(s, n));
        let words = admissible
            .as_ref()
            .map_or(1u64 << n, |a| a.iter().filter(|&&x| x).count() as u64);
        let hit = visits.hit_count(n, horizon, admissible.as_deref());
        let unhit = words - hit;
        rows.push(CoverRow {
            n,
            horizon,
            saturated,
            words,
            hit,
            unhit,
            dim_i_est: (hit.max(1) as f64).log2() / n as f64,
            dim_f_est: (unhit.max(1) as f64).log2() / n as f64,
        });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let li: Vec<f64> = rows.iter().map(|r| (r.hit.max(1) as f64).log2()).collect();
    let lf: Vec<f64> = rows.iter().map(|r| (r.unhit.max(1) as f64).log2()).collect();
    let prediction = match spectrum {
        Some(s) => Some(s.predict_cover(None, kappa)?),
        None => None,
    };
    Ok(CoverEstimate {
        kappa,
        slack: options.slack,
        orbit_len: len,
        slope_i: linear_fit(&ns, &li),
        slope_f: linear_fit(&ns, &lf),
        rows,
        prediction,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CensusBin {
    pub beta: f64,
    pub count: u64,
    pub log2_count_over_n: f64,
    /// `max(0, min(E(β), E(β) − β + log₂L / n))` at the bin center.
    pub predicted: f64,
    /// Bins with fewer than 32 words are excluded from comparisons.
    pub included: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CensusReport {
    pub n: usize,
    pub length: usize,
    pub bin_width: f64,
    pub total: u64,
    pub bins: Vec<CensusBin>,
}

pub const CENSUS_MIN_COUNT: u64 = 32;

/// Distinct `n`-subwords among the windows at positions `0..L`, binned by `β = −(1/n) log₂ μ`.
pub fn subword_census(
    o: &Orbit,
    chain: &GibbsChain,
    spectrum: &Spectrum,
    n: usize,
    length: usize,
    bin_width: f64,
) -> Result<CensusReport> {
    if n == 0 || n > MAX_TABLE_LEN {
        return Err(Error::Budget(format!("census word length {n} outside 1..={MAX_TABLE_LEN}")));
    }
    if bin_width.is_nan() || bin_width <= 0.0 {
        return Err(Error::param("bin width must be positive"));
    }
    if length == 0 || length + n - 1 > o.len() {
        return Err(Error::param(format!(
            "{length} windows of length {n} do not fit in an orbit of length {}",
            o.len()
        )));
    }
    let mut bitmap = HitBitmap::new(n)?;
    let mask = low_mask(n);
    for l in 0..length {
        bitmap.insert(o.window_bits(l) & mask);
    }
    let mut log_mass = vec![f64::NEG_INFINITY; 1 << n];
    chain.for_each_word(n, |code, mass| log_mass[code as usize] = mass.log2());
    let mut counts: std::collections::BTreeMap<i64, u64> = Default::default();
    for code in bitmap.codes() {
        let beta = -log_mass[code as usize] / n as f64;
        *counts.entry((beta / bin_width).floor() as i64).or_default() += 1;
    }
    let log_len = (length as f64).log2() / n as f64;
    let mut bins = Vec::with_capacity(counts.len());
    for (idx, count) in counts {
        let beta = (idx as f64 + 0.5) * bin_width;
        let e = spectrum.entropy_or_zero(beta)?;
        bins.push(CensusBin {
            beta,
            count,
            log2_count_over_n: (count as f64).log2() / n as f64,
            predicted: e.min(e - beta + log_len).max(0.0),
            included: count >= CENSUS_MIN_COUNT,
        });
    }
    Ok(CensusReport {
        n,
        length,
        bin_width,
        total: bitmap.count(),
        bins,
    })
}

pub const MAX_CIRCLE_DEPTH: usize = 24;
const LISTED_CELLS: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CircleCoverReport {
    pub kappa: f64,
    pub depth: usize,
    pub n_min: u64,
    pub n_max: u64,
    pub cells: u64,
    pub uncovered: u64,
    /// Indices `j` of uncovered cells `[j 2^{−d}, (j+1) 2^{−d})`, truncated.
    pub uncovered_cells: Vec<u64>,
    pub truncated: bool,
}

/// Covers the circle by `(Tⁿs − n^{−κ}, Tⁿs + n^{−κ})` for `n ∈ [N, M]` and counts empty dyadic cells.
pub fn circle_cover_report(
    start: CirclePoint,
    kappa: f64,
    depth: usize,
    range: (u64, u64),
) -> Result<CircleCoverReport> {
    let mut s = start;
    for _ in 0..range.0 {
        s = s.double();
    }
    let mut cur = s;
    cover_with(kappa, depth, range, |_| {
        let v = cur.value();
        cur = cur.double();
        v
    })
}

/// As [`circle_cover_report`], with `Tⁿs = π(σⁿx)` read from 53 symbols of the orbit.
pub fn circle_cover_orbit(o: &Orbit, kappa: f64, depth: usize, range: (u64, u64)) -> Result<CircleCoverReport> {
    if range.1 as usize >= o.len() {
        return Err(Error::param(format!(
            "n up to {} needs an orbit longer than {}",
            range.1,
            o.len()
        )));
    }
    cover_with(kappa, depth, range, |n| orbit_point(o, n as usize))
}

/// `π(σⁿx)` to double precision.
pub fn orbit_point(o: &Orbit, n: usize) -> f64 {
    (o.window_bits(n).reverse_bits() >> 11) as f64 / (1u64 << 53) as f64
}

fn cover_with(
    kappa: f64,
    depth: usize,
    (n_min, n_max): (u64, u64),
    mut point: impl FnMut(u64) -> f64,
) -> Result<CircleCoverReport> {
    if depth == 0 || depth > MAX_CIRCLE_DEPTH {
        return Err(Error::Budget(format!("depth {depth} outside 1..={MAX_CIRCLE_DEPTH}")));
    }
    if kappa.is_nan() || kappa <= 0.0 || n_min < 1 || n_min > n_max {
        return Err(Error::param("need κ > 0 and 1 ≤ N ≤ M"));
    }
    if (n_min as f64).powf(-kappa) >= 0.5 {
        return Err(Error::param(format!("r_N = N^(−κ) must be below 1/2 (N = {n_min}, κ = {kappa})")));
    }
    let cells = 1i64 << depth;
    let scale = cells as f64;
    let mut diff = vec![0i32; cells as usize + 1];
    let mut mark = |lo: i64, hi: i64| {
        diff[lo as usize] += 1;
        diff[hi as usize + 1] -= 1;
    };
    for n in n_min..=n_max {
        let c = point(n);
        let r = (n as f64).powf(-kappa);
        let lo = ((c - r) * scale).floor() as i64;
        let hi = ((c + r) * scale).ceil() as i64 - 1;
        let lo_w = lo.rem_euclid(cells);
        let hi_w = hi.rem_euclid(cells);
        if hi - lo + 1 >= cells {
            mark(0, cells - 1);
        } else if lo_w <= hi_w {
            mark(lo_w, hi_w);
        } else {
            mark(lo_w, cells - 1);
            mark(0, hi_w);
        }
    }
    let mut uncovered = 0u64;
    let mut list = Vec::new();
    let mut run = 0i32;
    for (j, d) in diff[..cells as usize].iter().enumerate() {
        run += d;
        if run == 0 {
            uncovered += 1;
            if list.len() < LISTED_CELLS {
                list.push(j as u64);
            }
        }
    }
    Ok(CircleCoverReport {
        kappa,
        depth,
        n_min,
        n_max,
        cells: cells as u64,
        uncovered,
        truncated: uncovered as usize > list.len(),
        uncovered_cells: list,
    })
}

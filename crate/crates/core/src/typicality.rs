//! Good cylinders, visit counts of typical orbits, tree counts, and the empirical Cantor
//! construction behind the mass transference lower bound.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::Serialize;

use crate::covering::{HitBitmap, MAX_TABLE_LEN};
use crate::error::{Error, Result};
use crate::orbit::{Orbit, OrbitMeta};
use crate::symbolic::{low_mask, Word};
use crate::thermo::GibbsChain;

/// Default minimum distance `n₀` between a rung and the first counted level above it.
pub const DEFAULT_N0: usize = 8;

const BAND_TOL: f64 = 1e-12;

/// Local-entropy band `[h − ε, h + ε]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Band {
    pub h: f64,
    pub epsilon: f64,
}

impl Band {
    pub fn new(chain: &GibbsChain, epsilon: f64) -> Result<Band> {
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::param(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Band {
            h: chain.entropy(),
            epsilon,
        })
    }

    pub fn widened(&self, factor: f64) -> Band {
        Band {
            h: self.h,
            epsilon: self.epsilon * factor,
        }
    }

    /// Whether an `n`-cylinder of mass `2^{log2_mass}` is `(n, ε)`-good.
    pub fn admits(&self, log2_mass: f64, n: usize) -> bool {
        if n == 0 {
            return true;
        }
        let beta = -log2_mass / n as f64;
        beta >= self.h - self.epsilon - BAND_TOL && beta <= self.h + self.epsilon + BAND_TOL
    }
}

pub fn is_good(chain: &GibbsChain, w: &[u8], epsilon: f64) -> Result<bool> {
    Ok(Band::new(chain, epsilon)?.admits(chain.measure_symbols(w).log2(), w.len()))
}

/// The `(n, ε)`-good `n`-words.
#[derive(Clone, Debug)]
pub struct GoodCylinderSet {
    pub n: usize,
    pub epsilon: f64,
    pub h: f64,
    pub count: u64,
    members: HitBitmap,
}

impl GoodCylinderSet {
    pub fn contains(&self, w: &Word) -> bool {
        w.len() == self.n && self.members.contains(w.bits())
    }

    /// `2^{(h+ε)n}`.
    pub fn upper_bound(&self) -> f64 {
        ((self.h + self.epsilon) * self.n as f64).exp2()
    }

    /// `(1 − ε) 2^{(h−ε)n}`, valid only past a threshold in `n`.
    pub fn lower_bound(&self) -> f64 {
        (1.0 - self.epsilon) * ((self.h - self.epsilon) * self.n as f64).exp2()
    }

    pub fn members(&self) -> impl Iterator<Item = Word> + '_ {
        self.members
            .codes()
            .map(|c| Word::from_bits(c, self.n).expect("length checked"))
    }
}

pub fn good_cylinders(chain: &GibbsChain, n: usize, epsilon: f64) -> Result<GoodCylinderSet> {
    if n == 0 || n > MAX_TABLE_LEN {
        return Err(Error::Budget(format!("good-cylinder enumeration needs 1 ≤ n ≤ {MAX_TABLE_LEN}")));
    }
    let band = Band::new(chain, epsilon)?;
    let mut members = HitBitmap::new(n)?;
    chain.for_each_word(n, |code, mass| {
        if band.admits(mass.log2(), n) {
            members.insert(code);
        }
    });
    Ok(GoodCylinderSet {
        n,
        epsilon,
        h: band.h,
        count: members.count(),
        members,
    })
}

/// Caches `log₂ μ` of the prefixes of orbit words.
struct MeasureCache<'a> {
    chain: &'a GibbsChain,
    cache: HashMap<(u64, usize), Vec<f64>>,
}

impl<'a> MeasureCache<'a> {
    fn new(chain: &'a GibbsChain) -> Self {
        MeasureCache {
            chain,
            cache: HashMap::new(),
        }
    }

    fn prefixes(&mut self, code: u64, len: usize) -> &[f64] {
        let chain = self.chain;
        self.cache.entry((code, len)).or_insert_with(|| {
            let symbols: Vec<u8> = (0..len).map(|i| (code >> i & 1) as u8).collect();
            chain.prefix_log2_measures(&symbols)
        })
    }

    fn log2_mass(&mut self, code: u64, len: usize) -> f64 {
        self.prefixes(code, len)[len]
    }
}

/// Positions `j` in `[2^{|D|}+1, ⌊2^{cL″}⌋]` where `x` visits `D` followed by an
/// `(L″ − |D|, ε)`-good word.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VisitCount {
    pub window: (u64, u64),
    pub count: u64,
    /// `2^{(c−ε)L″}`.
    pub threshold: f64,
    /// The window was cut short by the orbit length.
    pub truncated: bool,
}

fn time_window(start: u64, c: f64, level: usize, orbit_len: usize) -> (u64, u64, bool) {
    let want = (c * level as f64).exp2().floor() as u64;
    let cap = orbit_len.saturating_sub(level) as u64;
    (start, want.min(cap), want > cap)
}

fn check_word_len(n: usize) -> Result<()> {
    if n > Word::MAX_LEN {
        return Err(Error::WordTooLong(n));
    }
    Ok(())
}

pub fn visit_counts(
    o: &Orbit,
    chain: &GibbsChain,
    d: &Word,
    epsilon: f64,
    c: f64,
    l_pp: usize,
) -> Result<VisitCount> {
    check_word_len(l_pp)?;
    let k = d.len();
    if k > l_pp {
        return Err(Error::param("prefix longer than the visit level"));
    }
    let band = Band::new(chain, epsilon)?;
    let (lo, hi, truncated) = time_window((1u64 << k) + 1, c, l_pp, o.len());
    let rest = l_pp - k;
    let dmask = low_mask(k);
    let rmask = low_mask(rest);
    let mut cache = MeasureCache::new(chain);
    let mut count = 0u64;
    for j in lo..=hi {
        let bits = o.window_bits(j as usize);
        if bits & dmask != d.bits() {
            continue;
        }
        let tail = if k == 64 { 0 } else { (bits >> k) & rmask };
        if band.admits(cache.log2_mass(tail, rest), rest) {
            count += 1;
        }
    }
    Ok(VisitCount {
        window: (lo, hi),
        count,
        threshold: ((c - epsilon) * l_pp as f64).exp2(),
        truncated,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LevelCount {
    pub level: usize,
    pub count: u64,
    /// `2^{(c−2ε)(ℓ−L′)}`.
    pub threshold: f64,
    pub met: bool,
}

/// Tree counts `T(x, D, ℓ, ε)` for `ℓ ∈ [L′ + n₀, L″]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreeCounts {
    pub prefix: Word,
    pub l_p: usize,
    pub l_pp: usize,
    pub window: (u64, u64),
    pub truncated: bool,
    /// Distinct seen `(L″, 2ε)`-good leaves with prefix `D`.
    pub leaves: u64,
    pub levels: Vec<LevelCount>,
}

impl TreeCounts {
    pub fn all_met(&self) -> bool {
        self.levels.iter().all(|l| l.met)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn tree_counts(
    o: &Orbit,
    chain: &GibbsChain,
    d: &Word,
    l_pp: usize,
    epsilon: f64,
    c: f64,
    n0: usize,
) -> Result<TreeCounts> {
    check_word_len(l_pp)?;
    let l_p = d.len();
    if l_p + n0 > l_pp {
        return Err(Error::param(format!(
            "no levels between L′ + n₀ = {} and L″ = {l_pp}",
            l_p + n0
        )));
    }
    let band = Band::new(chain, epsilon)?;
    let leaf_band = band.widened(2.0);
    let (lo, hi, truncated) = time_window((1u64 << l_p) + 1, c, l_pp, o.len());
    let mask = low_mask(l_pp);
    let dmask = low_mask(l_p);
    let mut seen = BTreeSet::new();
    for j in lo..=hi {
        let bits = o.window_bits(j as usize) & mask;
        if bits & dmask == d.bits() {
            seen.insert(bits);
        }
    }
    let mut cache = MeasureCache::new(chain);
    let levels_range = l_p + n0..=l_pp;
    let mut sets: Vec<HashSet<u64>> = levels_range.clone().map(|_| HashSet::new()).collect();
    let mut leaves = 0u64;
    for &leaf in &seen {
        if !leaf_band.admits(cache.log2_mass(leaf, l_pp), l_pp) {
            continue;
        }
        leaves += 1;
        let suffix = if l_p == 64 { 0 } else { leaf >> l_p };
        let logs = cache.prefixes(suffix, l_pp - l_p);
        for (i, level) in levels_range.clone().enumerate() {
            let g = level - l_p;
            if band.admits(logs[g], g) {
                sets[i].insert(suffix & low_mask(g));
            }
        }
    }
    let levels = levels_range
        .zip(sets)
        .map(|(level, s)| {
            let threshold = ((c - 2.0 * epsilon) * (level - l_p) as f64).exp2();
            LevelCount {
                level,
                count: s.len() as u64,
                threshold,
                met: s.len() as f64 >= threshold,
            }
        })
        .collect();
    Ok(TreeCounts {
        prefix: *d,
        l_p,
        l_pp,
        window: (lo, hi),
        truncated,
        leaves,
        levels,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CantorLevel {
    pub level: usize,
    pub count: u64,
    /// `log₂ ♯𝔠_ℓ / ℓ`.
    pub slope: f64,
}

/// Empirical Cantor family `𝔠_ℓ` and the resulting dimension lower bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CantorReport {
    pub ladder: Vec<usize>,
    pub epsilon: f64,
    pub c: f64,
    pub n0: usize,
    pub windows: Vec<(u64, u64)>,
    pub truncated: bool,
    pub levels: Vec<CantorLevel>,
    /// `min_ℓ log₂ ♯𝔠_ℓ / ℓ`.
    pub lower_bound: f64,
    /// `max_ℓ log₂ ♯𝔠_ℓ / ℓ`, an empirical box-type slope.
    pub upper_slope: f64,
}

/// Builds `𝔠_ℓ` rung by rung along `0 = L₀ < L₁ < …`.
///
/// Rung `k` collects the `L_k`-words seen at `j ∈ [s_k, ⌊2^{cL_k}⌋]`, `s_1 = 1` and
/// `s_k = 2^{L_{k−1}} + 1`, that are `(L_k, 2ε)`-good and extend a member of
/// `𝔠_{L_{k−1}}`. For `ℓ ∈ [L_{k−1} + n₀, L_k]`, `𝔠_ℓ` holds their `(ℓ, ε)`-good
/// `ℓ`-prefixes.
pub fn cantor_lower_bound(
    o: &Orbit,
    chain: &GibbsChain,
    ladder: &[usize],
    epsilon: f64,
    c: f64,
    n0: usize,
) -> Result<CantorReport> {
    if ladder.first() != Some(&0) || ladder.len() < 2 {
        return Err(Error::param("the ladder must start at 0 and have at least two rungs"));
    }
    for w in ladder.windows(2) {
        if w[1] < w[0] + n0.max(1) {
            return Err(Error::param(format!(
                "rungs {} and {} are closer than n₀ = {n0}",
                w[0], w[1]
            )));
        }
    }
    check_word_len(*ladder.last().expect("non-empty"))?;
    let band = Band::new(chain, epsilon)?;
    if c.is_nan() || c <= 0.0 || c >= band.h {
        return Err(Error::param(format!(
            "need 0 < c < h = {:.6}, got c = {c}",
            band.h
        )));
    }
    let leaf_band = band.widened(2.0);
    let mut family: Vec<u64> = vec![0];
    let mut levels = Vec::new();
    let mut windows = Vec::new();
    let mut truncated = false;
    for (k, w) in ladder.windows(2).enumerate() {
        let (prev, rung) = (w[0], w[1]);
        let start = if k == 0 { 1 } else { (1u64 << prev) + 1 };
        let (lo, hi, cut) = time_window(start, c, rung, o.len());
        if hi < lo {
            return Err(Error::param(format!(
                "rung {rung} has an empty time window; need c·{rung} > {prev}"
            )));
        }
        truncated |= cut;
        windows.push((lo, hi));
        let mask = low_mask(rung);
        let pmask = low_mask(prev);
        let seen = if prev <= 24 {
            let mut table = vec![false; 1 << prev];
            family.iter().for_each(|&f| table[f as usize] = true);
            table
        } else {
            Vec::new()
        };
        let member = |p: u64| {
            if prev <= 24 {
                seen[p as usize]
            } else {
                family.binary_search(&p).is_ok()
            }
        };
        let mut leaves: Vec<u64> = (lo..=hi)
            .map(|j| o.window_bits(j as usize) & mask)
            .filter(|bits| member(bits & pmask))
            .collect();
        leaves.sort_unstable();
        leaves.dedup();
        let range = prev + n0..=rung;
        // Keys hold the leaf reversed, so leaves sharing an ℓ-prefix are adjacent.
        let mut keyed: Vec<(u64, u64)> = Vec::new();
        let mut symbols = vec![0u8; rung];
        for &leaf in &leaves {
            for (i, s) in symbols.iter_mut().enumerate() {
                *s = (leaf >> i & 1) as u8;
            }
            let logs = chain.prefix_log2_measures(&symbols);
            if !leaf_band.admits(logs[rung], rung) {
                continue;
            }
            let good = range
                .clone()
                .enumerate()
                .filter(|&(_, level)| band.admits(logs[level], level))
                .fold(0u64, |m, (i, _)| m | 1 << i);
            keyed.push((leaf.reverse_bits() >> (64 - rung), good));
        }
        keyed.sort_unstable();
        for (i, level) in range.clone().enumerate() {
            let shift = rung - level;
            let count = keyed
                .iter()
                .enumerate()
                .filter(|&(k, &(key, good))| {
                    good >> i & 1 == 1 && (k == 0 || keyed[k - 1].0 >> shift != key >> shift)
                })
                .count();
            if count == 0 {
                return Err(Error::EmptyLevel(level));
            }
            let slope = (count as f64).log2() / level as f64;
            levels.push(CantorLevel {
                level,
                count: count as u64,
                slope,
            });
        }
        let top = range.count() - 1;
        family = keyed
            .iter()
            .filter(|&&(_, good)| good >> top & 1 == 1)
            .map(|&(key, _)| key.reverse_bits() >> (64 - rung))
            .collect();
        family.sort_unstable();
    }
    let slopes = levels.iter().map(|l| l.slope);
    let lower_bound = slopes.clone().fold(f64::INFINITY, f64::min);
    let upper_slope = slopes.fold(f64::NEG_INFINITY, f64::max);
    Ok(CantorReport {
        ladder: ladder.to_vec(),
        epsilon,
        c,
        n0,
        windows,
        truncated,
        levels,
        lower_bound,
        upper_slope,
    })
}

/// Orbit length needed to run a ladder at exponent `c`.
pub fn cantor_orbit_len(ladder: &[usize], c: f64) -> usize {
    let top = *ladder.last().unwrap_or(&0);
    (c * top as f64).exp2().floor() as usize + top + 1
}

/// Everything the `tree` experiment reports for one orbit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TypicalityReport {
    pub orbit: OrbitMeta,
    pub orbit_len: usize,
    pub visits: Option<VisitCount>,
    pub tree: Option<TreeCounts>,
    pub cantor: Option<CantorReport>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::builtin::*;
    use proptest::prelude::*;

    fn quarter() -> GibbsChain {
        GibbsChain::new(&bernoulli_quarter()).unwrap()
    }

    /// The tree count straight from its definition: enumerate every candidate `G′`.
    fn naive_tree(x: &[u8], chain: &GibbsChain, d: &[u8], l_pp: usize, eps: f64, c: f64, n0: usize) -> Vec<u64> {
        let l_p = d.len();
        let h = chain.entropy();
        let good = |w: &[u8], e: f64| {
            let b = -chain.measure_symbols(w).log2() / w.len() as f64;
            b >= h - e - 1e-12 && b <= h + e + 1e-12
        };
        let lo = (1usize << l_p) + 1;
        let hi = ((c * l_pp as f64).exp2().floor() as usize).min(x.len() - l_pp);
        let leaves: Vec<&[u8]> = (lo..=hi)
            .map(|j| &x[j..j + l_pp])
            .filter(|w| &w[..l_p] == d && good(w, 2.0 * eps))
            .collect();
        (l_p + n0..=l_pp)
            .map(|level| {
                let g = level - l_p;
                (0u64..1 << g)
                    .filter(|code| {
                        let gw: Vec<u8> = (0..g).map(|i| (code >> i & 1) as u8).collect();
                        good(&gw, eps) && leaves.iter().any(|leaf| leaf[l_p..level] == gw[..])
                    })
                    .count() as u64
            })
            .collect()
    }

    #[test]
    fn fair_coin_everything_good() {
        let chain = GibbsChain::new(&fair_coin()).unwrap();
        for n in [1, 5, 12] {
            assert_eq!(good_cylinders(&chain, n, 0.01).unwrap().count, 1 << n);
        }
    }

    #[test]
    fn quarter_good_words_have_two_zeros() {
        let g = good_cylinders(&quarter(), 8, 0.1).unwrap();
        assert_eq!(g.count, 28);
        assert!(g.members().all(|w| w.len() - w.ones() as usize == 2));
    }

    #[test]
    fn good_counts_respect_upper_bound() {
        for pot in [bernoulli_quarter(), markov_test()] {
            let chain = GibbsChain::new(&pot).unwrap();
            for n in 1..=16 {
                for eps in [0.02, 0.1, 0.3] {
                    let g = good_cylinders(&chain, n, eps).unwrap();
                    assert!(g.count as f64 <= g.upper_bound() * (1.0 + 1e-12));
                }
            }
            let g = good_cylinders(&chain, 24, 0.1).unwrap();
            assert!(g.count as f64 >= g.lower_bound(), "{pot:?}");
        }
    }

    #[test]
    fn visits_with_empty_prefix_count_good_windows() {
        let chain = quarter();
        let o = chain.sample_orbit(4096, 3).unwrap();
        let v = visit_counts(&o, &chain, &Word::empty(), 0.2, 0.5, 20).unwrap();
        let mut expect = 0;
        for j in v.window.0..=v.window.1 {
            let w: Vec<u8> = (0..20).map(|i| o.symbol(j as usize + i)).collect();
            expect += is_good(&chain, &w, 0.2).unwrap() as u64;
        }
        assert_eq!(v.count, expect);
        assert_eq!(v.window, (2, 1024));
    }

    #[test]
    fn fair_coin_visit_rate() {
        let chain = GibbsChain::new(&fair_coin()).unwrap();
        let d: Word = "01".parse().unwrap();
        let mut total = 0.0;
        for seed in 0..100 {
            let o = chain.sample_orbit(1100, seed).unwrap();
            let v = visit_counts(&o, &chain, &d, 0.1, 0.5, 20).unwrap();
            total += v.count as f64 / (v.window.1 - v.window.0 + 1) as f64;
        }
        assert!((total / 100.0 - 0.25).abs() < 0.01);
    }

    #[test]
    fn leaf_level_counts_good_leaves() {
        let chain = quarter();
        let o = chain.sample_orbit(1 << 12, 8).unwrap();
        let d: Word = "1111".parse().unwrap();
        let t = tree_counts(&o, &chain, &d, 16, 0.1, 0.6, 8).unwrap();
        let last = t.levels.last().unwrap();
        assert_eq!(last.level, 16);
        let band = Band::new(&chain, 0.1).unwrap();
        let mut leaves = BTreeSet::new();
        for j in t.window.0..=t.window.1 {
            let w: Vec<u8> = (0..16).map(|i| o.symbol(j as usize + i)).collect();
            if w[..4] == [1, 1, 1, 1]
                && band.widened(2.0).admits(chain.measure_symbols(&w).log2(), 16)
                && band.admits(chain.measure_symbols(&w[4..]).log2(), 12)
            {
                leaves.insert(w);
            }
        }
        assert_eq!(last.count, leaves.len() as u64);
    }

    #[test]
    fn fair_coin_tree_counts_prefixes() {
        let chain = GibbsChain::new(&fair_coin()).unwrap();
        let o = chain.sample_orbit(1 << 12, 2).unwrap();
        let d: Word = "0".parse().unwrap();
        let t = tree_counts(&o, &chain, &d, 14, 0.05, 0.8, 8).unwrap();
        for lc in &t.levels {
            let mut s = BTreeSet::new();
            for j in t.window.0..=t.window.1 {
                if o.symbol(j as usize) == 0 {
                    s.insert(o.window(j as usize, lc.level).unwrap());
                }
            }
            assert_eq!(lc.count, s.len() as u64);
        }
    }

    #[test]
    fn cantor_guards() {
        let chain = quarter();
        let o = chain.sample_orbit(1 << 10, 1).unwrap();
        assert!(cantor_lower_bound(&o, &chain, &[0, 16], 0.1, 0.9, 8).is_err());
        assert!(cantor_lower_bound(&o, &chain, &[4, 16], 0.1, 0.5, 8).is_err());
        assert!(cantor_lower_bound(&o, &chain, &[0, 4], 0.1, 0.5, 8).is_err());
    }

    #[test]
    fn cantor_bound_on_fair_coin() {
        let chain = GibbsChain::new(&fair_coin()).unwrap();
        let ladder = [0, 16, 40];
        let o = chain.sample_orbit(cantor_orbit_len(&ladder, 0.5), 11).unwrap();
        let r = cantor_lower_bound(&o, &chain, &ladder, 0.1, 0.5, DEFAULT_N0).unwrap();
        assert!(r.lower_bound >= 0.5 - 0.2 - 0.1, "{}", r.lower_bound);
        assert!(!r.truncated);
    }

    #[test]
    fn truncating_the_ladder_keeps_counts() {
        let chain = quarter();
        let ladder = [0, 14, 26];
        let o = chain.sample_orbit(cantor_orbit_len(&ladder, 0.6), 5).unwrap();
        let full = cantor_lower_bound(&o, &chain, &ladder, 0.1, 0.6, 8).unwrap();
        let cut = cantor_lower_bound(&o, &chain, &ladder[..2], 0.1, 0.6, 8).unwrap();
        assert_eq!(&full.levels[..cut.levels.len()], &cut.levels[..]);
        assert!(cut.lower_bound >= full.lower_bound);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn tree_counts_match_definition(seed in 0u64..1000, dlen in 1usize..4, eps in 0.05f64..0.4) {
            let chain = GibbsChain::new(&markov_test()).unwrap();
            let o = chain.sample_orbit(1 << 12, seed).unwrap();
            let x = o.symbols();
            let d = &x[..dlen];
            let t = tree_counts(&o, &chain, &Word::from_symbols(d).unwrap(), 12, eps, 0.6, 6).unwrap();
            let naive = naive_tree(&x, &chain, d, 12, eps, 0.6, 6);
            prop_assert_eq!(t.levels.iter().map(|l| l.count).collect::<Vec<_>>(), naive);
        }
    }
}

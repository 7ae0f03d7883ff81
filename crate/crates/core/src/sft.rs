//! Subshifts of finite type: restricted pressure, restricted spectrum, and the covering
//! predictions for targets inside `Σ_A`.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::covering::{estimate_dims_with, CoverEstimate, CoverOptions, FirstVisits};
use crate::error::{Error, Result};
use crate::spectrum::{Extremes, Spectrum, SpectrumValue};
use crate::symbolic::Word;
use crate::thermo::{GibbsChain, Potential, Support, TransferSystem};

const BOUNDARY_TOL: f64 = 1e-12;

/// A subshift given by forbidden words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SftSpec {
    forbidden: Vec<Word>,
}

impl SftSpec {
    pub fn new(mut forbidden: Vec<Word>) -> Result<SftSpec> {
        for w in &forbidden {
            if w.is_empty() || w.len() > Potential::MAX_MEMORY {
                return Err(Error::param(format!(
                    "forbidden word {w:?} must have length 1..={}",
                    Potential::MAX_MEMORY
                )));
            }
        }
        forbidden.sort_by_key(|w| (w.len(), w.lex_rank()));
        forbidden.dedup();
        Ok(SftSpec { forbidden })
    }

    /// The full shift.
    pub fn full() -> SftSpec {
        SftSpec { forbidden: Vec::new() }
    }

    /// Forbids `11`.
    pub fn golden_mean() -> SftSpec {
        SftSpec {
            forbidden: vec!["11".parse().expect("valid word")],
        }
    }

    pub fn forbidden(&self) -> &[Word] {
        &self.forbidden
    }

    pub fn is_full(&self) -> bool {
        self.forbidden.is_empty()
    }

    /// Length of the longest forbidden word, at least 1.
    pub fn order(&self) -> usize {
        self.forbidden.iter().map(Word::len).max().unwrap_or(1)
    }

    /// Whether no forbidden word occurs in `symbols`.
    pub fn admits(&self, symbols: &[u8]) -> bool {
        self.forbidden.iter().all(|f| {
            let fs = f.symbols();
            fs.len() > symbols.len() || !symbols.windows(fs.len()).any(|w| w == fs)
        })
    }

    /// The de Bruijn support of memory `max(memory, order)`.
    pub fn support(&self, memory: usize) -> Result<Support> {
        let m = memory.max(self.order());
        if self.is_full() {
            return Ok(Support::full(m));
        }
        let allowed = (0..1u64 << m)
            .map(|c| {
                let s: Vec<u8> = (0..m).map(|i| (c >> i & 1) as u8).collect();
                self.admits(&s)
            })
            .collect();
        Support::from_allowed(m, allowed)
    }

    /// One forbidden word per line; `#` starts a comment and `forbid` may prefix a word.
    pub fn parse(text: &str, origin: &str) -> Result<SftSpec> {
        let mut words = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let token = line.strip_prefix("forbid").map_or(line, str::trim);
            let w: Word = token
                .parse()
                .map_err(|_| Error::parse(origin, idx + 1, format!("bad word {token:?}")))?;
            if w.is_empty() {
                return Err(Error::parse(origin, idx + 1, "empty forbidden word"));
            }
            words.push(w);
        }
        SftSpec::new(words)
    }

    pub fn load(path: &Path) -> Result<SftSpec> {
        let text = std::fs::read_to_string(path)?;
        SftSpec::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for w in &self.forbidden {
            let _ = writeln!(s, "forbid {w}");
        }
        s
    }
}

/// Restricted thermodynamics of one potential on one subshift.
#[derive(Clone, Debug)]
pub struct SftModel {
    sft: SftSpec,
    support: Support,
    spectrum: Spectrum,
    pressure: f64,
    dim_sigma: f64,
}

/// Summary of the restricted spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SftProfile {
    /// `P_A(φ|Σ_A)`.
    pub p_a: f64,
    pub dim_sigma_a: f64,
    pub e_a_minus: f64,
    pub e_a_max: f64,
    pub e_a_plus: f64,
    /// Metric entropy of `μ_{φ_A}`.
    pub h_a: f64,
    pub degenerate: bool,
    /// `I^κ_A` is empty for `1/κ` below this.
    pub i_empty_below: f64,
    /// `F^κ_A` is empty for `1/κ` above this.
    pub f_empty_above: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SftPrediction {
    pub kappa: f64,
    pub inv_kappa: f64,
    pub dim_f: f64,
    pub dim_i: f64,
    pub f_empty: bool,
    pub i_empty: bool,
    /// `1/κ` sits on a case boundary, evaluated by continuity.
    pub boundary: bool,
}

impl SftModel {
    pub fn new(sft: &SftSpec, potential: &Potential) -> Result<SftModel> {
        let support = sft.support(potential.memory())?;
        let spectrum = Spectrum::with_support(potential, &support)?;
        let pressure = spectrum.pressure(1.0)?;
        let zero = Potential::constant(support.memory(), 0.0)?;
        let dim_sigma = TransferSystem::with_support(&zero, 1.0, &support)?.pressure();
        Ok(SftModel {
            sft: sft.clone(),
            support,
            spectrum,
            pressure,
            dim_sigma,
        })
    }

    pub fn sft(&self) -> &SftSpec {
        &self.sft
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    /// The spectrum of `φ` on `Σ_A`, whose `E` is `E_A`.
    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// `P_A(qφ|Σ_A)`.
    pub fn pressure(&self, q: f64) -> Result<f64> {
        self.spectrum.pressure(q)
    }

    pub fn dim_sigma(&self) -> f64 {
        self.dim_sigma
    }

    /// `φ_A = φ − P_A`, normalized on `Σ_A`.
    pub fn normalized_potential(&self) -> Potential {
        self.spectrum.potential().shifted(-self.pressure)
    }

    /// The Gibbs chain of `φ_A`.
    pub fn chain(&self) -> Result<GibbsChain> {
        GibbsChain::with_support(self.spectrum.potential(), &self.support)
    }

    pub fn profile(&self) -> Result<SftProfile> {
        let Extremes {
            e_minus,
            e_max,
            e_plus,
            h_mu,
            degenerate,
        } = self.spectrum.extremes();
        Ok(SftProfile {
            p_a: self.pressure,
            dim_sigma_a: self.dim_sigma,
            e_a_minus: e_minus,
            e_a_max: e_max,
            e_a_plus: e_plus,
            h_a: h_mu + self.pressure,
            degenerate,
            i_empty_below: -self.pressure,
            f_empty_above: e_plus,
        })
    }

    /// `E_A(α)`, or `None` outside `[e_A⁻, e_A⁺]`.
    pub fn entropy_spectrum(&self, alpha: f64) -> Result<Option<SpectrumValue>> {
        self.spectrum.entropy_spectrum(alpha)
    }

    pub fn predict(&self, kappa: f64) -> Result<SftPrediction> {
        if !kappa.is_finite() || kappa <= 0.0 {
            return Err(Error::param(format!("kappa must be positive, got {kappa}")));
        }
        let p = self.profile()?;
        let s = 1.0 / kappa;
        let t1 = p.h_a - p.p_a;
        let e_at = |s: f64| -> Result<f64> { self.spectrum.entropy_or_zero(s) };
        let f_empty = s > p.e_a_plus;
        let dim_f = if s <= p.e_a_max {
            p.dim_sigma_a
        } else if f_empty {
            0.0
        } else {
            e_at(s)?
        };
        let i_empty = s < p.i_empty_below;
        let dim_i = if i_empty {
            0.0
        } else if s <= t1 {
            s + p.p_a
        } else if s < p.e_a_max {
            e_at(s)?
        } else {
            p.dim_sigma_a
        };
        let near = |b: f64| (s - b).abs() <= BOUNDARY_TOL * (1.0 + b.abs());
        Ok(SftPrediction {
            kappa,
            inv_kappa: s,
            dim_f: dim_f.clamp(0.0, 1.0),
            dim_i: dim_i.clamp(0.0, 1.0),
            f_empty,
            i_empty,
            boundary: [p.i_empty_below, t1, p.e_a_max, p.e_a_plus]
                .into_iter()
                .any(near),
        })
    }

    /// Covering estimates over `A`-admissible targets from a full-shift orbit.
    pub fn cover(
        &self,
        visits: &FirstVisits,
        kappa: f64,
        n_grid: &[usize],
        slack: f64,
    ) -> Result<(CoverEstimate, SftPrediction)> {
        let options = CoverOptions {
            slack,
            restrict: Some(self.support.clone()),
        };
        let est = estimate_dims_with(visits, None, kappa, n_grid, &options)?;
        Ok((est, self.predict(kappa)?))
    }
}

pub fn sft_pressure(sft: &SftSpec, potential: &Potential, q: f64) -> Result<f64> {
    let support = sft.support(potential.memory())?;
    Ok(TransferSystem::with_support(potential, q, &support)?.pressure())
}

pub fn sft_extremes(sft: &SftSpec, potential: &Potential) -> Result<SftProfile> {
    SftModel::new(sft, potential)?.profile()
}

pub fn sft_spectrum(sft: &SftSpec, potential: &Potential, alpha: f64) -> Result<Option<SpectrumValue>> {
    SftModel::new(sft, potential)?.entropy_spectrum(alpha)
}

pub fn sft_predict(sft: &SftSpec, potential: &Potential, kappa: f64) -> Result<SftPrediction> {
    SftModel::new(sft, potential)?.predict(kappa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{entropy_extremes, entropy_spectrum};
    use crate::thermo::{builtin::*, normalize, pressure};
    use proptest::prelude::*;

    fn golden_log() -> f64 {
        ((1.0 + 5.0f64.sqrt()) / 2.0).log2()
    }

    fn minus_one() -> Potential {
        Potential::constant(1, -1.0).unwrap()
    }

    #[test]
    fn parse_round_trip() {
        let s = SftSpec::parse("# golden mean\nforbid 11\n\n", "t").unwrap();
        assert_eq!(s, SftSpec::golden_mean());
        assert_eq!(SftSpec::parse(&s.to_text(), "t").unwrap(), s);
        let err = SftSpec::parse("forbid 12", "sft.txt").unwrap_err();
        assert!(err.to_string().starts_with("sft.txt:1:"));
    }

    #[test]
    fn golden_mean_values() {
        let g = SftSpec::golden_mean();
        let p = sft_pressure(&g, &minus_one(), 1.0).unwrap();
        assert!((p - (golden_log() - 1.0)).abs() < 1e-12);
        assert!((p + 0.305758).abs() < 1e-6);
        let prof = sft_extremes(&g, &minus_one()).unwrap();
        assert!((prof.dim_sigma_a - golden_log()).abs() < 1e-12);
        assert!(prof.degenerate);
        assert!((prof.e_a_minus - 1.0).abs() < 1e-12 && (prof.e_a_plus - 1.0).abs() < 1e-12);
        let e = sft_spectrum(&g, &minus_one(), 1.0).unwrap().unwrap();
        assert!((e.value - golden_log()).abs() < 1e-12);
        assert!(sft_spectrum(&g, &minus_one(), 1.1).unwrap().is_none());
    }

    #[test]
    fn golden_mean_quarter_extremes() {
        let prof = sft_extremes(&SftSpec::golden_mean(), &bernoulli_quarter()).unwrap();
        assert!((prof.e_a_plus - 2.0).abs() < 1e-12);
        let e_minus = (2.0 + (4.0f64 / 3.0).log2()) / 2.0;
        assert!((prof.e_a_minus - e_minus).abs() < 1e-12);
        assert!(prof.e_a_minus <= prof.e_a_max && prof.e_a_max <= prof.e_a_plus);
    }

    #[test]
    fn golden_mean_predictions() {
        let g = SftSpec::golden_mean();
        let p = sft_predict(&g, &minus_one(), 1.0 / 0.2).unwrap();
        assert!(p.i_empty);
        let p = sft_predict(&g, &minus_one(), 1.0 / 1.2).unwrap();
        assert!(p.f_empty && !p.i_empty);
        let p = sft_predict(&g, &minus_one(), 2.0).unwrap();
        assert!((p.dim_i - (0.5 + golden_log() - 1.0)).abs() < 1e-12);
        assert!(!p.i_empty && !p.f_empty);
        let edge = 1.0 / (1.0 - golden_log());
        assert!(sft_predict(&g, &minus_one(), edge * (1.0 + 1e-9)).unwrap().i_empty);
        assert!(!sft_predict(&g, &minus_one(), edge * (1.0 - 1e-9)).unwrap().i_empty);
    }

    #[test]
    fn full_mask_reduces_exactly() {
        let full = SftSpec::full();
        for pot in [bernoulli_quarter(), markov_test(), fair_coin()] {
            for q in [-3.0, -0.5, 0.0, 1.0, 2.5] {
                assert_eq!(sft_pressure(&full, &pot, q).unwrap(), pressure(&pot, q).unwrap());
            }
            let a = sft_extremes(&full, &pot).unwrap();
            let b = entropy_extremes(&pot).unwrap();
            assert_eq!((a.e_a_minus, a.e_a_max, a.e_a_plus), (b.e_minus, b.e_max, b.e_plus));
            assert_eq!(a.p_a, pressure(&pot, 1.0).unwrap());
            for t in [0.5, 1.0, 1.5] {
                assert_eq!(
                    sft_spectrum(&full, &pot, t).unwrap(),
                    entropy_spectrum(&pot, t).unwrap()
                );
            }
        }
    }

    #[test]
    fn shifted_spectrum_identity() {
        // E_A(α) = Ẽ_A(α + P_A) with Ẽ_A the spectrum of the normalized φ_A.
        let model = SftModel::new(&SftSpec::golden_mean(), &bernoulli_quarter()).unwrap();
        let p_a = model.pressure(1.0).unwrap();
        let tilde = Spectrum::with_support(&model.normalized_potential(), model.support()).unwrap();
        for alpha in [1.25, 1.4, 1.6, 1.8, 1.95] {
            let a = model.entropy_spectrum(alpha).unwrap().unwrap().value;
            let b = tilde.entropy_spectrum(alpha + p_a).unwrap().unwrap().value;
            assert!((a - b).abs() < 1e-9, "{alpha}: {a} vs {b}");
        }
    }

    #[test]
    fn local_entropy_shift_is_bounded() {
        let model = SftModel::new(&SftSpec::golden_mean(), &markov_test()).unwrap();
        let p_a = model.pressure(1.0).unwrap();
        let restricted = model.chain().unwrap();
        let full = GibbsChain::new(&markov_test()).unwrap();
        let mut worst = vec![0.0f64; 13];
        for (n, slot) in worst.iter_mut().enumerate().skip(1) {
            restricted.for_each_word(n, |code, mass| {
                let w = Word::from_bits(code, n).unwrap();
                let d = -mass.log2() + full.cylinder_measure(&w).log2() - n as f64 * p_a;
                *slot = slot.max(d.abs());
            });
        }
        assert!(worst[12] <= worst[6] + 1e-9, "{worst:?}");
        assert!(worst[12] < 5.0);
    }

    #[test]
    fn restricted_below_full() {
        let g = SftSpec::golden_mean();
        let pot = markov_test();
        let model = SftModel::new(&g, &pot).unwrap();
        let spec = Spectrum::new(&pot).unwrap();
        for q in crate::spectrum::uniform_grid(-6.0, 6.0, 25) {
            assert!(model.pressure(q).unwrap() <= pressure(&pot, q).unwrap() + 1e-12);
        }
        let prof = model.profile().unwrap();
        for a in crate::spectrum::uniform_grid(prof.e_a_minus, prof.e_a_plus, 30) {
            if let (Some(ea), Some(e)) = (model.entropy_spectrum(a).unwrap(), spec.entropy_spectrum(a).unwrap()) {
                assert!(ea.value <= e.value + 1e-9);
            }
        }
    }

    #[test]
    fn non_primitive_rejected() {
        let s = SftSpec::parse("00\n11\n", "t").unwrap();
        assert!(matches!(s.support(2), Err(Error::NotPrimitive(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn restricted_pressure_is_nonpositive(table in proptest::collection::vec(-3.0f64..1.0, 8)) {
            let pot = normalize(&Potential::new(3, table).unwrap()).unwrap();
            let p = sft_pressure(&SftSpec::golden_mean(), &pot, 1.0).unwrap();
            prop_assert!(p <= 1e-12);
        }
    }
}

//! Binary words, cylinders and the coding of the circle.
//!
//! Words are packed least-significant-bit first: symbol `i` lives in bit `i`.
//! The lexicographic rank of a word reads it most-significant-symbol first.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const fn low_mask(len: usize) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

/// A finite binary word of length at most 64, naming the cylinder of sequences it prefixes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Word {
    bits: u64,
    len: u8,
}

impl Word {
    pub const MAX_LEN: usize = 64;

    pub const fn empty() -> Self {
        Word { bits: 0, len: 0 }
    }

    /// Builds a word from its packed code; bits above `len` are discarded.
    pub fn from_bits(bits: u64, len: usize) -> Result<Self> {
        if len > Self::MAX_LEN {
            return Err(Error::WordTooLong(len));
        }
        Ok(Word {
            bits: bits & low_mask(len),
            len: len as u8,
        })
    }

    pub fn from_symbols(symbols: &[u8]) -> Result<Self> {
        if symbols.len() > Self::MAX_LEN {
            return Err(Error::WordTooLong(symbols.len()));
        }
        let mut bits = 0u64;
        for (i, &s) in symbols.iter().enumerate() {
            match s {
                0 => {}
                1 => bits |= 1 << i,
                other => return Err(Error::InvalidSymbol(char::from(b'0' + other.min(9)))),
            }
        }
        Ok(Word {
            bits,
            len: symbols.len() as u8,
        })
    }

    /// The word `s^len`.
    pub fn constant(symbol: u8, len: usize) -> Result<Self> {
        Word::from_bits(if symbol == 0 { 0 } else { u64::MAX }, len)
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Packed code, symbol `i` in bit `i`.
    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn symbol(&self, i: usize) -> u8 {
        debug_assert!(i < self.len());
        ((self.bits >> i) & 1) as u8
    }

    pub fn symbols(&self) -> Vec<u8> {
        (0..self.len()).map(|i| self.symbol(i)).collect()
    }

    pub fn ones(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn prefix(&self, k: usize) -> Word {
        let k = k.min(self.len());
        Word {
            bits: self.bits & low_mask(k),
            len: k as u8,
        }
    }

    /// The subword of length `k` starting at `start`.
    pub fn slice(&self, start: usize, k: usize) -> Word {
        debug_assert!(start + k <= self.len());
        Word {
            bits: if start >= 64 { 0 } else { (self.bits >> start) & low_mask(k) },
            len: k as u8,
        }
    }

    pub fn concat(&self, other: &Word) -> Result<Word> {
        let len = self.len() + other.len();
        if len > Self::MAX_LEN {
            return Err(Error::WordTooLong(len));
        }
        let shifted = if self.len() >= 64 { 0 } else { other.bits << self.len() };
        Ok(Word {
            bits: self.bits | shifted,
            len: len as u8,
        })
    }

    pub fn starts_with(&self, prefix: &Word) -> bool {
        prefix.len() <= self.len() && self.prefix(prefix.len()) == *prefix
    }

    /// Position of the word in lexicographic order among words of its length.
    pub fn lex_rank(&self) -> u64 {
        if self.len == 0 {
            0
        } else {
            self.bits.reverse_bits() >> (64 - self.len())
        }
    }

    pub fn from_lex_rank(rank: u64, len: usize) -> Result<Word> {
        if len == 0 {
            return Ok(Word::empty());
        }
        if len > Self::MAX_LEN {
            return Err(Error::WordTooLong(len));
        }
        let rank = rank & low_mask(len);
        Word::from_bits(rank.reverse_bits() >> (64 - len), len)
    }

    /// Left endpoint of the dyadic interval coded by the cylinder.
    pub fn project(&self) -> CirclePoint {
        project_to_circle(&self.symbols(), &[])
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            f.write_str(if self.symbol(i) == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word(\"{self}\")")
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Word> {
        Word::from_symbols(&parse_symbols(s)?)
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Word, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a string of `0`/`1` characters, ignoring whitespace.
pub fn parse_symbols(s: &str) -> Result<Vec<u8>> {
    s.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Error::InvalidSymbol(other)),
        })
        .collect()
}

/// Lexicographic predecessor and successor among words of the same length, wrapping mod `2^n`.
pub fn neighbor_cylinders(w: &Word) -> (Word, Word) {
    let n = w.len();
    if n == 0 {
        return (*w, *w);
    }
    let rank = w.lex_rank();
    let mask = low_mask(n);
    let pred = Word::from_lex_rank(rank.wrapping_sub(1) & mask, n).expect("length checked");
    let succ = Word::from_lex_rank(rank.wrapping_add(1) & mask, n).expect("length checked");
    (pred, succ)
}

/// Non-wrapping variant: `0^n` has no predecessor and `1^n` no successor.
pub fn neighbor_cylinders_open(w: &Word) -> (Option<Word>, Option<Word>) {
    let n = w.len();
    if n == 0 {
        return (None, None);
    }
    let (pred, succ) = neighbor_cylinders(w);
    let rank = w.lex_rank();
    (
        (rank != 0).then_some(pred),
        (rank != low_mask(n)).then_some(succ),
    )
}

/// A point of the circle `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct CirclePoint(f64);

impl CirclePoint {
    pub fn new(value: f64) -> Self {
        let v = value.rem_euclid(1.0);
        CirclePoint(if v >= 1.0 { 0.0 } else { v })
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    /// The doubling map.
    pub fn double(&self) -> CirclePoint {
        CirclePoint::new(2.0 * self.0)
    }

    pub fn distance(&self, other: &CirclePoint) -> f64 {
        let d = (self.0 - other.0).abs();
        d.min(1.0 - d)
    }
}

/// Exact value of `π(prefix · cycle^∞)` reduced mod 1.
pub fn project_exact(prefix: &[u8], cycle: &[u8]) -> BigRational {
    let digits = |s: &[u8]| {
        s.iter()
            .fold(BigInt::zero(), |acc, &b| (acc << 1usize) + BigInt::from(b))
    };
    let p = prefix.len();
    let head = BigRational::new(digits(prefix), BigInt::one() << p);
    let value = if cycle.is_empty() {
        head
    } else {
        let period = (BigInt::one() << cycle.len()) - BigInt::one();
        let tail = BigRational::new(digits(cycle), period * (BigInt::one() << p));
        head + tail
    };
    let floor = value.floor();
    value - floor
}

/// `π(prefix · cycle^∞)` as a circle point; an empty cycle means trailing zeros.
pub fn project_to_circle(prefix: &[u8], cycle: &[u8]) -> CirclePoint {
    CirclePoint::new(project_exact(prefix, cycle).to_f64().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn neighbors_of_small_words() {
        assert_eq!(neighbor_cylinders(&w("1")), (w("0"), w("0")));
        assert_eq!(neighbor_cylinders(&w("0101")), (w("0100"), w("0110")));
        assert_eq!(neighbor_cylinders(&w("000")), (w("111"), w("001")));
        assert_eq!(neighbor_cylinders_open(&w("000")), (None, Some(w("001"))));
        assert_eq!(neighbor_cylinders_open(&w("11")), (Some(w("10")), None));
    }

    #[test]
    fn projections() {
        assert_eq!(project_to_circle(&[], &[1, 0]).value(), 2.0 / 3.0);
        assert_eq!(project_to_circle(&[0, 1], &[]).value(), 0.25);
        assert_eq!(project_to_circle(&[], &[1]).value(), 0.0);
        assert_eq!(w("011").project().value(), 0.375);
    }

    #[test]
    fn word_display_and_slices() {
        let x = w("0011010");
        assert_eq!(x.to_string(), "0011010");
        assert_eq!(x.slice(2, 3), w("110"));
        assert_eq!(x.prefix(4), w("0011"));
        assert_eq!(w("01").concat(&w("1")).unwrap(), w("011"));
        assert!(Word::from_symbols(&[0; 65]).is_err());
        assert!("01a".parse::<Word>().is_err());
    }

    proptest! {
        #[test]
        fn neighbors_invert(bits in any::<u64>(), len in 1usize..=64) {
            let x = Word::from_bits(bits, len).unwrap();
            let (pred, succ) = neighbor_cylinders(&x);
            prop_assert_eq!(neighbor_cylinders(&pred).1, x);
            prop_assert_eq!(neighbor_cylinders(&succ).0, x);
        }

        #[test]
        fn lex_rank_round_trips(bits in any::<u64>(), len in 1usize..=64) {
            let x = Word::from_bits(bits, len).unwrap();
            prop_assert_eq!(Word::from_lex_rank(x.lex_rank(), len).unwrap(), x);
        }

        #[test]
        fn projection_lies_in_its_dyadic_interval(bits in any::<u64>(), len in 1usize..=40, tail in proptest::collection::vec(0u8..2, 1..8)) {
            let x = Word::from_bits(bits, len).unwrap();
            let left = x.project().value();
            let mut prefix = x.symbols();
            prefix.extend_from_slice(&tail);
            let p = project_to_circle(&prefix, &[]).value();
            prop_assert!(p >= left && p <= left + (-(len as f64)).exp2());
        }
    }
}

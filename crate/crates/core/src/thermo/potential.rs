use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::symbolic::Word;

/// A potential depending on the first `memory` symbols, tabulated by packed word code.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    memory: usize,
    table: Vec<f64>,
    normalized: bool,
}

impl Potential {
    pub const MAX_MEMORY: usize = 16;

    pub fn new(memory: usize, table: Vec<f64>) -> Result<Potential> {
        if memory == 0 || memory > Self::MAX_MEMORY {
            return Err(Error::Memory(memory));
        }
        let expected = 1usize << memory;
        if table.len() != expected {
            return Err(Error::TableSize {
                memory,
                expected,
                found: table.len(),
            });
        }
        if let Some(code) = table.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                word: Word::from_bits(code as u64, memory)?.to_string(),
            });
        }
        Ok(Potential {
            memory,
            table,
            normalized: false,
        })
    }

    pub fn constant(memory: usize, value: f64) -> Result<Potential> {
        Potential::new(memory, vec![value; 1 << memory.min(Self::MAX_MEMORY + 1)])
    }

    /// The i.i.d. potential with `P(x_0 = 0) = p_zero`.
    pub fn bernoulli(p_zero: f64) -> Result<Potential> {
        if !(p_zero > 0.0 && p_zero < 1.0) {
            return Err(Error::param(format!("Bernoulli weight {p_zero} not in (0, 1)")));
        }
        let mut p = Potential::new(1, vec![p_zero.log2(), (1.0 - p_zero).log2()])?;
        p.normalized = true;
        Ok(p)
    }

    /// Builds a potential from `(word, value)` pairs covering every word of length `memory`.
    pub fn from_entries(memory: usize, entries: &[(&str, f64)]) -> Result<Potential> {
        let mut table = vec![f64::NAN; 1 << memory.min(Self::MAX_MEMORY)];
        for (word, value) in entries {
            let w: Word = word.parse()?;
            if w.len() != memory {
                return Err(Error::param(format!("entry {word} has length != {memory}")));
            }
            table[w.bits() as usize] = *value;
        }
        Potential::new(memory, table)
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Marks the potential as normalized without checking; see `thermo::normalize`.
    pub(crate) fn with_normalized_flag(mut self, flag: bool) -> Potential {
        self.normalized = flag;
        self
    }

    #[inline]
    pub fn value(&self, code: u64) -> f64 {
        self.table[code as usize]
    }

    pub fn value_of(&self, w: &Word) -> f64 {
        debug_assert_eq!(w.len(), self.memory);
        self.table[w.bits() as usize]
    }

    pub fn min(&self) -> f64 {
        self.table.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.table.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, q: f64) -> Potential {
        Potential {
            memory: self.memory,
            table: self.table.iter().map(|v| q * v).collect(),
            normalized: false,
        }
    }

    pub fn shifted(&self, c: f64) -> Potential {
        Potential {
            memory: self.memory,
            table: self.table.iter().map(|v| v + c).collect(),
            normalized: false,
        }
    }

    /// The same function read as a potential with larger memory.
    pub fn lift(&self, memory: usize) -> Result<Potential> {
        if memory < self.memory {
            return Err(Error::param(format!(
                "cannot lift memory {} down to {memory}",
                self.memory
            )));
        }
        if memory > Self::MAX_MEMORY {
            return Err(Error::Memory(memory));
        }
        if memory == self.memory {
            return Ok(self.clone());
        }
        let mask = (1u64 << self.memory) - 1;
        let table = (0..1u64 << memory)
            .map(|c| self.table[(c & mask) as usize])
            .collect();
        Ok(Potential {
            memory,
            table,
            normalized: self.normalized,
        })
    }

    /// `S_k φ` over the `k = len − memory + 1` windows lying inside `symbols`.
    pub fn birkhoff_sum(&self, symbols: &[u8]) -> f64 {
        if symbols.len() < self.memory {
            return 0.0;
        }
        let mask = (1u64 << self.memory) - 1;
        let mut code = 0u64;
        let mut sum = 0.0;
        for (i, &s) in symbols.iter().enumerate() {
            code = (code >> 1) | ((s as u64) << (self.memory - 1));
            code &= mask;
            if i + 1 >= self.memory {
                sum += self.table[code as usize];
            }
        }
        sum
    }

    /// Parses the `key = value` potential format.
    pub fn parse(text: &str, origin: &str) -> Result<Potential> {
        let mut memory: Option<usize> = None;
        let mut normalized = false;
        let mut entries: Vec<(usize, Word, f64)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, line_no, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "memory" => {
                    memory = Some(value.parse().map_err(|_| {
                        Error::parse(origin, line_no, format!("bad memory {value:?}"))
                    })?)
                }
                "normalized" => {
                    normalized = value.parse().map_err(|_| {
                        Error::parse(origin, line_no, format!("bad flag {value:?}"))
                    })?
                }
                word => {
                    let w: Word = word.parse().map_err(|_| {
                        Error::parse(origin, line_no, format!("unknown key {word:?}"))
                    })?;
                    let v: f64 = value.parse().map_err(|_| {
                        Error::parse(origin, line_no, format!("bad value {value:?}"))
                    })?;
                    entries.push((line_no, w, v));
                }
            }
        }
        let memory = memory.ok_or_else(|| Error::parse(origin, 0, "missing `memory`"))?;
        if memory == 0 || memory > Self::MAX_MEMORY {
            return Err(Error::Memory(memory));
        }
        let mut table = vec![None; 1 << memory];
        for (line_no, w, v) in entries {
            if w.len() != memory {
                return Err(Error::parse(
                    origin,
                    line_no,
                    format!("word {w} does not have length {memory}"),
                ));
            }
            if table[w.bits() as usize].replace(v).is_some() {
                return Err(Error::parse(origin, line_no, format!("duplicate word {w}")));
            }
        }
        if let Some(code) = table.iter().position(Option::is_none) {
            return Err(Error::parse(
                origin,
                0,
                format!(
                    "missing entry for word {}",
                    Word::from_bits(code as u64, memory)?
                ),
            ));
        }
        let p = Potential::new(memory, table.into_iter().map(Option::unwrap).collect())?;
        if normalized {
            let pressure = super::pressure(&p, 1.0)?;
            if pressure.abs() > 1e-10 {
                return Err(Error::NotNormalized(pressure));
            }
        }
        Ok(p.with_normalized_flag(normalized))
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("memory = {}\nnormalized = {}\n", self.memory, self.normalized);
        for (code, v) in self.table.iter().enumerate() {
            let w = Word::from_bits(code as u64, self.memory).expect("memory <= 16");
            let _ = writeln!(s, "{w} = {v:?}");
        }
        s
    }

    pub fn load(path: &Path) -> Result<Potential> {
        let text = std::fs::read_to_string(path)?;
        Potential::parse(&text, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

//! Finite orbit segments of the shift, stored bit-packed.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::symbolic::{low_mask, parse_symbols, Word};

/// Longest orbit the library will hold in memory.
pub const MAX_ORBIT_LEN: usize = 1 << 31;

const MAGIC: &[u8; 4] = b"THCV";
const FORMAT_VERSION: u32 = 1;

/// Where an orbit came from.
#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct OrbitMeta {
    pub source: String,
    pub seed: Option<u64>,
}

/// A finite prefix `x_0 … x_{L-1}` of a point of the shift.
#[derive(Clone, PartialEq, Eq)]
pub struct Orbit {
    // One trailing zero limb so that 64-bit reads never run off the end.
    limbs: Vec<u64>,
    len: usize,
    meta: OrbitMeta,
}

impl std::fmt::Debug for Orbit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Orbit")
            .field("len", &self.len)
            .field("meta", &self.meta)
            .finish()
    }
}

/// Incremental orbit construction.
pub struct OrbitBuilder {
    limbs: Vec<u64>,
    current: u64,
    len: usize,
}

impl OrbitBuilder {
    pub fn with_capacity(len: usize) -> Self {
        OrbitBuilder {
            limbs: Vec::with_capacity(len / 64 + 2),
            current: 0,
            len: 0,
        }
    }

    #[inline]
    pub fn push(&mut self, bit: u64) {
        self.current |= bit << (self.len & 63);
        self.len += 1;
        if self.len & 63 == 0 {
            self.limbs.push(self.current);
            self.current = 0;
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn finish(mut self, meta: OrbitMeta) -> Orbit {
        if self.len & 63 != 0 {
            self.limbs.push(self.current);
        }
        self.limbs.push(0);
        Orbit {
            limbs: self.limbs,
            len: self.len,
            meta,
        }
    }
}

impl Orbit {
    fn from_limbs(mut limbs: Vec<u64>, len: usize, meta: OrbitMeta) -> Orbit {
        limbs.truncate(len.div_ceil(64));
        limbs.resize(len.div_ceil(64), 0);
        if len & 63 != 0 {
            let last = limbs.len() - 1;
            limbs[last] &= low_mask(len & 63);
        }
        limbs.push(0);
        Orbit { limbs, len, meta }
    }

    pub fn from_symbols(symbols: &[u8]) -> Result<Orbit> {
        let mut b = OrbitBuilder::with_capacity(symbols.len());
        for &s in symbols {
            if s > 1 {
                return Err(Error::InvalidSymbol(char::from(b'0' + s.min(9))));
            }
            b.push(s as u64);
        }
        Ok(b.finish(OrbitMeta {
            source: "explicit".into(),
            seed: None,
        }))
    }

    /// Parses `0`/`1` text, ignoring whitespace.
    pub fn from_text(text: &str) -> Result<Orbit> {
        Orbit::from_symbols(&parse_symbols(text)?)
    }

    /// `pattern` repeated to length `len`.
    pub fn periodic(pattern: &[u8], len: usize) -> Result<Orbit> {
        if pattern.is_empty() {
            return Err(Error::param("periodic orbit needs a non-empty pattern"));
        }
        let symbols: Vec<u8> = pattern.iter().copied().cycle().take(len).collect();
        let mut o = Orbit::from_symbols(&symbols)?;
        o.meta.source = "periodic".into();
        Ok(o)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn meta(&self) -> &OrbitMeta {
        &self.meta
    }

    pub fn with_meta(mut self, meta: OrbitMeta) -> Orbit {
        self.meta = meta;
        self
    }

    pub fn symbol(&self, i: usize) -> u8 {
        debug_assert!(i < self.len);
        ((self.limbs[i >> 6] >> (i & 63)) & 1) as u8
    }

    pub fn symbols(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.symbol(i)).collect()
    }

    /// The 64 symbols starting at `i`, packed; positions past the end read as zero.
    #[inline]
    pub fn window_bits(&self, i: usize) -> u64 {
        let (q, r) = (i >> 6, i & 63);
        if q + 1 >= self.limbs.len() {
            return if q < self.limbs.len() { self.limbs[q] >> r } else { 0 };
        }
        let lo = self.limbs[q] >> r;
        if r == 0 {
            lo
        } else {
            lo | (self.limbs[q + 1] << (64 - r))
        }
    }

    /// The word `x_i … x_{i+n-1}`.
    pub fn window(&self, i: usize, n: usize) -> Result<Word> {
        if n > Word::MAX_LEN {
            return Err(Error::WordTooLong(n));
        }
        if i + n > self.len {
            return Err(Error::param(format!(
                "window [{i}, {}) exceeds orbit length {}",
                i + n,
                self.len
            )));
        }
        Word::from_bits(self.window_bits(i), n)
    }

    /// All length-`n` windows `(i, x_i … x_{i+n-1})`; empty when `n > L`.
    pub fn windows(&self, n: usize) -> impl Iterator<Item = (usize, Word)> + '_ {
        assert!(n <= Word::MAX_LEN, "window length {n} exceeds 64");
        let count = (self.len + 1).saturating_sub(n);
        let mask = low_mask(n);
        (0..count).map(move |i| {
            (
                i,
                Word::from_bits(self.window_bits(i) & mask, n).expect("length checked"),
            )
        })
    }

    /// The orbit shifted by `k`.
    pub fn shifted(&self, k: usize) -> Orbit {
        let k = k.min(self.len);
        let mut b = OrbitBuilder::with_capacity(self.len - k);
        for i in k..self.len {
            b.push(self.symbol(i) as u64);
        }
        b.finish(self.meta.clone())
    }

    pub fn to_text(&self) -> String {
        (0..self.len)
            .map(|i| if self.symbol(i) == 1 { '1' } else { '0' })
            .collect()
    }

    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        out.write_all(&(self.len as u64).to_le_bytes())?;
        for limb in &self.limbs[..self.len.div_ceil(64)] {
            out.write_all(&limb.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R, origin: &Path) -> Result<Orbit> {
        let bad = |message: &str| Error::OrbitFormat {
            path: origin.to_path_buf(),
            message: message.to_string(),
        };
        let mut header = [0u8; 16];
        input
            .read_exact(&mut header)
            .map_err(|_| bad("truncated header"))?;
        if &header[..4] != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let len = u64::from_le_bytes(header[8..16].try_into().unwrap());
        if len > MAX_ORBIT_LEN as u64 {
            return Err(Error::Budget(format!(
                "orbit length {len} exceeds {MAX_ORBIT_LEN}"
            )));
        }
        let len = len as usize;
        let mut bytes = vec![0u8; len.div_ceil(64) * 8];
        input
            .read_exact(&mut bytes)
            .map_err(|_| bad("truncated payload"))?;
        let limbs = bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Orbit::from_limbs(
            limbs,
            len,
            OrbitMeta {
                source: origin.display().to_string(),
                seed: None,
            },
        ))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        self.write_binary(&mut out)?;
        out.flush()?;
        Ok(())
    }

    /// Loads a binary orbit file, or a `0`/`1` text file when the magic is absent.
    pub fn load(path: &Path) -> Result<Orbit> {
        let bytes = fs::read(path)?;
        if bytes.starts_with(MAGIC) {
            Orbit::read_binary(bytes.as_slice(), path)
        } else {
            let text = String::from_utf8(bytes).map_err(|_| Error::OrbitFormat {
                path: path.to_path_buf(),
                message: "neither binary nor text".into(),
            })?;
            let o = Orbit::from_text(&text)?;
            Ok(o.with_meta(OrbitMeta {
                source: path.display().to_string(),
                seed: None,
            }))
        }
    }
}

use crate::error::{Error, Result};

/// The edges of the de Bruijn graph that a transfer operator may use.
///
/// States are words of length `memory − 1`; the edge labelled by the `memory`-word
/// with code `c` runs from state `c & (2^{memory−1} − 1)` to state `c >> 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Support {
    memory: usize,
    allowed: Vec<bool>,
    active: Vec<bool>,
    full: bool,
}

impl Support {
    pub fn full(memory: usize) -> Support {
        Support {
            memory,
            allowed: vec![true; 1 << memory],
            active: vec![true; 1 << (memory - 1)],
            full: true,
        }
    }

    /// Keeps only states lying on bi-infinite paths and requires the result to be primitive.
    pub fn from_allowed(memory: usize, allowed: Vec<bool>) -> Result<Support> {
        assert_eq!(allowed.len(), 1 << memory);
        if allowed.iter().all(|&a| a) {
            return Ok(Support::full(memory));
        }
        let states = 1usize << (memory - 1);
        let smask = states - 1;
        let mut active = vec![true; states];
        loop {
            let mut has_out = vec![false; states];
            let mut has_in = vec![false; states];
            for (c, &ok) in allowed.iter().enumerate() {
                let (u, v) = (c & smask, c >> 1);
                if ok && active[u] && active[v] {
                    has_out[u] = true;
                    has_in[v] = true;
                }
            }
            let mut changed = false;
            for s in 0..states {
                if active[s] && !(has_out[s] && has_in[s]) {
                    active[s] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let support = Support {
            memory,
            allowed,
            active,
            full: false,
        };
        support.check_primitive()?;
        Ok(support)
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn is_full(&self) -> bool {
        self.full
    }

    pub fn state_count(&self) -> usize {
        1 << (self.memory - 1)
    }

    #[inline]
    pub fn is_active(&self, state: usize) -> bool {
        self.active[state]
    }

    /// Whether the edge with `memory`-word code `c` is usable.
    #[inline]
    pub fn allows(&self, code: usize) -> bool {
        let smask = self.state_count() - 1;
        self.allowed[code] && self.active[code & smask] && self.active[code >> 1]
    }

    pub fn active_states(&self) -> Vec<usize> {
        (0..self.state_count()).filter(|&s| self.active[s]).collect()
    }

    /// Usable edge codes.
    pub fn edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..1usize << self.memory).filter(move |&c| self.allows(c))
    }

    /// Whether every `memory`-window of `symbols` is a usable edge.
    pub fn admits(&self, symbols: &[u8]) -> bool {
        if self.full {
            return true;
        }
        let m = self.memory;
        if symbols.len() < m {
            return self.admits_short(symbols);
        }
        let mask = (1usize << m) - 1;
        let mut code = 0usize;
        for (i, &s) in symbols.iter().enumerate() {
            code = ((code >> 1) | ((s as usize) << (m - 1))) & mask;
            if i + 1 >= m && !self.allows(code) {
                return false;
            }
        }
        true
    }

    fn admits_short(&self, symbols: &[u8]) -> bool {
        let n = symbols.len();
        let prefix = symbols
            .iter()
            .enumerate()
            .fold(0usize, |acc, (i, &s)| acc | ((s as usize) << i));
        let mask = (1usize << n) - 1;
        self.edges().any(|c| c & mask == prefix)
    }

    fn check_primitive(&self) -> Result<()> {
        let states = self.active_states();
        let Some(&root) = states.first() else {
            return Err(Error::NotPrimitive("no admissible bi-infinite sequence".into()));
        };
        let n = self.state_count();
        let smask = n - 1;
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut inc: Vec<Vec<usize>> = vec![Vec::new(); n];
        for c in self.edges() {
            out[c & smask].push(c >> 1);
            inc[c >> 1].push(c & smask);
        }
        let bfs = |adj: &Vec<Vec<usize>>| {
            let mut level = vec![usize::MAX; n];
            level[root] = 0;
            let mut queue = std::collections::VecDeque::from([root]);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if level[v] == usize::MAX {
                        level[v] = level[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            level
        };
        let fwd = bfs(&out);
        let bwd = bfs(&inc);
        if states
            .iter()
            .any(|&s| fwd[s] == usize::MAX || bwd[s] == usize::MAX)
        {
            return Err(Error::NotPrimitive("graph is not irreducible".into()));
        }
        let mut period = 0usize;
        for c in self.edges() {
            let (u, v) = (c & smask, c >> 1);
            let diff = (fwd[u] + 1).abs_diff(fwd[v]);
            period = gcd(period, diff);
        }
        if period != 1 {
            return Err(Error::NotPrimitive(format!("graph has period {period}")));
        }
        Ok(())
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

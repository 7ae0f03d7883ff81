use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use dyncover::covering::{MAX_CENSUS_LEN, MAX_CIRCLE_DEPTH, MAX_TABLE_LEN};
use dyncover::sft::SftSpec;
use dyncover::thermo::builtin;
use dyncover::{Potential, Word};

use crate::output::Manifest;

pub const MAX_LENGTH: usize = 1 << 31;
pub const MAX_REPLICATES: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Spectrum,
    Hit,
    Cover,
    Census,
    Tree,
    Sft,
    Circle,
    Decay,
    Selftest,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Spectrum => "spectrum",
            Kind::Hit => "hit",
            Kind::Cover => "cover",
            Kind::Census => "census",
            Kind::Tree => "tree",
            Kind::Sft => "sft",
            Kind::Circle => "circle",
            Kind::Decay => "decay",
            Kind::Selftest => "selftest",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Event {
    /// Some heavy cylinder is not hit before `2^{hn}`.
    LateHit,
    /// Many light cylinders are all hit early.
    EarlyHits,
    /// A tree level falls below its count threshold.
    TreeFailure,
}

/// One experiment. Every field has a default, so a config file lists only what it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<Kind>,
    /// Potential file, or `builtin:<name>`.
    pub potential: String,
    /// Second potential whose Gibbs measure draws the targets.
    pub target: Option<String>,
    /// Forbidden-word file.
    pub sft: Option<String>,
    pub kappa: Vec<f64>,
    /// Word lengths.
    pub n: Vec<usize>,
    /// Orbit length `L`.
    pub length: usize,
    pub seed: u64,
    pub replicates: usize,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub out: PathBuf,
    pub slack: f64,
    pub q_range: [f64; 2],
    pub q_points: usize,
    pub bin_width: f64,
    pub epsilon: f64,
    pub c: f64,
    pub n0: usize,
    pub ladder: Vec<usize>,
    /// Tree root `D`; defaults to the heaviest cylinder of length `prefix_len`.
    pub prefix: Option<Word>,
    pub prefix_len: usize,
    pub leaf_len: usize,
    pub depth: usize,
    /// `[N, M]` for the circle cover.
    pub circle: [u64; 2],
    pub event: Event,
    pub gamma: f64,
    pub horizon_exponent: f64,
    pub cylinder_exponent: f64,
    pub count_exponent: f64,
    /// Fixed number of early hits, replacing `2^{count_exponent·n}`.
    pub hits: Option<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: None,
            potential: "builtin:bernoulli-quarter".into(),
            target: None,
            sft: None,
            kappa: vec![1.0],
            n: (1..=16).collect(),
            length: 1 << 20,
            seed: 0,
            replicates: 1,
            threads: 0,
            out: PathBuf::from("results"),
            slack: 0.05,
            q_range: [-8.0, 8.0],
            q_points: 513,
            bin_width: 0.05,
            epsilon: 0.1,
            c: 0.6,
            n0: 8,
            ladder: vec![0, 16, 40],
            prefix: None,
            prefix_len: 4,
            leaf_len: 16,
            depth: 16,
            circle: [8, 1 << 16],
            event: Event::LateHit,
            gamma: 0.25,
            horizon_exponent: 0.5,
            cylinder_exponent: 0.25,
            count_exponent: 0.2,
            hits: None,
        }
    }
}

/// A config file plus the input texts a manifest carries.
pub struct Loaded {
    pub config: ExperimentConfig,
    pub inputs: BTreeMap<String, String>,
}

/// Reads a TOML config or a `manifest.json` from an earlier run.
pub fn load(path: &Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        let m: Manifest = serde_json::from_str(&text)
            .with_context(|| format!("malformed manifest {}", path.display()))?;
        return Ok(Loaded {
            config: m.config,
            inputs: m.inputs,
        });
    }
    let config = toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
    Ok(Loaded {
        config,
        inputs: BTreeMap::new(),
    })
}

fn field(name: &str, message: impl std::fmt::Display) -> anyhow::Error {
    anyhow::anyhow!("config field `{name}`: {message}")
}

impl ExperimentConfig {
    pub fn n_max(&self) -> usize {
        self.n.iter().copied().max().unwrap_or(0)
    }

    pub fn validate(&self, kind: Kind) -> Result<()> {
        if self.length == 0 || self.length > MAX_LENGTH {
            return Err(field("length", format!("{} is outside 1..=2^31", self.length)));
        }
        if self.replicates == 0 || self.replicates > MAX_REPLICATES {
            return Err(field("replicates", format!("{} is outside 1..=2^20", self.replicates)));
        }
        if self.n.is_empty() || self.n.contains(&0) {
            return Err(field("n", "needs at least one positive word length"));
        }
        if self.n.windows(2).any(|w| w[0] >= w[1]) {
            return Err(field("n", "word lengths must be strictly increasing"));
        }
        if let Some(k) = self.kappa.iter().find(|k| !k.is_finite() || **k <= 0.0) {
            return Err(field("kappa", format!("{k} is not a positive number")));
        }
        if self.kappa.is_empty() && matches!(kind, Kind::Spectrum | Kind::Cover | Kind::Sft | Kind::Circle) {
            return Err(field("kappa", "needs at least one value"));
        }
        let limit = match kind {
            Kind::Cover | Kind::Decay => MAX_TABLE_LEN,
            Kind::Census => MAX_CENSUS_LEN,
            _ => Word::MAX_LEN,
        };
        if self.n_max() > limit {
            return Err(field("n", format!("{} exceeds the limit {limit} for `{}`", self.n_max(), kind.name())));
        }
        if self.n_max() >= self.length && matches!(kind, Kind::Hit | Kind::Cover | Kind::Census) {
            return Err(field("n", format!("{} does not fit in an orbit of length {}", self.n_max(), self.length)));
        }
        if !(0.0..1.0).contains(&self.slack) {
            return Err(field("slack", format!("{} is outside [0, 1)", self.slack)));
        }
        if self.q_points == 0 || self.q_range[0].is_nan() || self.q_range[0] > self.q_range[1] {
            return Err(field("q_range", "needs lo <= hi and q_points > 0"));
        }
        if self.bin_width.is_nan() || self.bin_width <= 0.0 {
            return Err(field("bin_width", "must be positive"));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(field("epsilon", "must be positive"));
        }
        if self.depth == 0 || self.depth > MAX_CIRCLE_DEPTH {
            return Err(field("depth", format!("{} is outside 1..={MAX_CIRCLE_DEPTH}", self.depth)));
        }
        if self.circle[0] == 0 || self.circle[0] > self.circle[1] || self.circle[1] as usize > MAX_LENGTH {
            return Err(field("circle", "needs 1 <= N <= M <= 2^31"));
        }
        if kind == Kind::Sft && self.sft.is_none() {
            return Err(field("sft", "the `sft` experiment needs a forbidden-word file"));
        }
        Ok(())
    }

    /// The tree root `D`.
    pub fn tree_prefix(&self, chain: &dyncover::GibbsChain) -> Result<Word> {
        if let Some(d) = self.prefix {
            return Ok(d);
        }
        if self.prefix_len == 0 || self.prefix_len > Word::MAX_LEN {
            return Err(field("prefix_len", format!("{} is outside 1..=64", self.prefix_len)));
        }
        let mut best = (f64::NEG_INFINITY, 0u64);
        chain.for_each_word(self.prefix_len, |code, mass| {
            if mass > best.0 {
                best = (mass, code);
            }
        });
        Ok(Word::from_bits(best.1, self.prefix_len)?)
    }

    /// The config with run-local settings cleared, as hashed into the manifest.
    pub fn canonical(&self) -> ExperimentConfig {
        ExperimentConfig {
            threads: 0,
            out: PathBuf::new(),
            ..self.clone()
        }
    }
}

/// Source text for an input: the manifest copy when present, otherwise the named file.
fn source(role: &str, spec: &str, inputs: &BTreeMap<String, String>) -> Result<(String, String)> {
    if let Some(text) = inputs.get(role) {
        return Ok((text.clone(), format!("{spec} (manifest copy)")));
    }
    let text = std::fs::read_to_string(spec).with_context(|| format!("cannot read {role} file {spec}"))?;
    Ok((text, spec.to_string()))
}

/// Loads a potential and returns it with the text to record in the manifest.
pub fn potential(role: &str, spec: &str, inputs: &BTreeMap<String, String>) -> Result<(Potential, String)> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        let Some(p) = builtin::by_name(name) else {
            bail!("unknown builtin potential {name:?}; known: fair-coin, bernoulli-quarter, markov-test, bernoulli:<p>");
        };
        let text = p.to_text();
        return Ok((p, text));
    }
    let (text, origin) = source(role, spec, inputs)?;
    let p = Potential::parse(&text, &origin)?;
    Ok((p, text))
}

pub fn sft(spec: &str, inputs: &BTreeMap<String, String>) -> Result<(SftSpec, String)> {
    match spec {
        "builtin:golden-mean" => {
            let s = SftSpec::golden_mean();
            let text = s.to_text();
            Ok((s, text))
        }
        "builtin:full" => Ok((SftSpec::full(), SftSpec::full().to_text())),
        _ => {
            let (text, origin) = source("sft", spec, inputs)?;
            Ok((SftSpec::parse(&text, &origin)?, text))
        }
    }
}

/// `"4..12"` (inclusive) or `"4,8,12"`.
pub fn parse_grid(s: &str) -> std::result::Result<Vec<usize>, String> {
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| format!("bad range start {lo:?}"))?;
        let hi: usize = hi.trim().trim_start_matches('=').parse().map_err(|_| format!("bad range end {hi:?}"))?;
        if lo > hi {
            return Err(format!("empty range {s}"));
        }
        return Ok((lo..=hi).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| format!("bad word length {t:?}")))
        .collect()
}

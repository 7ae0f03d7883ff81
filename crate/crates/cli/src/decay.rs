//! Monte Carlo frequencies of the rare events behind the covering bounds.

use anyhow::{bail, ensure, Result};
use serde::Serialize;

use dyncover::covering::hit_census;
use dyncover::rng::stream;
use dyncover::stats::{linear_fit, wilson_interval, Regression};
use dyncover::typicality::tree_counts;
use dyncover::{GibbsChain, Orbit, Word};

use crate::config::{Event, ExperimentConfig, MAX_LENGTH};
use crate::output::{csv, json, num, Artifact};
use crate::pipelines::Context;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayRow {
    pub n: usize,
    /// Orbit length sampled per replicate.
    pub orbit_len: usize,
    /// Cylinders the event is about; 0 for tree failures.
    pub cylinders: usize,
    pub replicates: u64,
    pub events: u64,
    pub frequency: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayReport {
    pub event: Event,
    pub rows: Vec<DecayRow>,
    /// Least squares of `log₂ frequency` against `n` over rows with events.
    pub slope: Option<Regression>,
    /// Smallest grid `n` from which the frequency decreases strictly until it reaches zero.
    pub decreasing_from: Option<usize>,
}

/// Per-length setup shared by every replicate.
enum Setup {
    Cylinders {
        horizon: u64,
        codes: Vec<u64>,
        /// The event fires when at least this many codes are hit; `None` when any miss fires it.
        needed: Option<u64>,
    },
    Tree(Word),
}

fn words_where(chain: &GibbsChain, n: usize, keep: impl Fn(f64) -> bool) -> Vec<(u64, f64)> {
    let mut out = Vec::new();
    chain.for_each_word(n, |code, mass| {
        let log_mass = mass.log2();
        if keep(log_mass) {
            out.push((code, log_mass));
        }
    });
    out
}

fn setup(chain: &GibbsChain, cfg: &ExperimentConfig, n: usize) -> Result<(Setup, usize)> {
    let h = chain.entropy();
    let nf = n as f64;
    match cfg.event {
        Event::LateHit => {
            let gamma = cfg.gamma;
            ensure!(gamma > 0.0 && gamma < h, "late-hit needs 0 < gamma < h = {h:.6}, got {gamma}");
            let horizon = (h * nf).exp2().floor() as u64;
            let floor = -(h - gamma) * nf - 1e-12;
            let codes: Vec<u64> = words_where(chain, n, |m| m >= floor).into_iter().map(|w| w.0).collect();
            if codes.is_empty() {
                bail!("late-hit: no cylinder of length {n} has measure at least 2^-(h-gamma)n; raise gamma");
            }
            let len = horizon as usize + n;
            Ok((Setup::Cylinders { horizon, codes, needed: None }, len))
        }
        Event::EarlyHits => {
            let (a, b, c, gamma) = (cfg.horizon_exponent, cfg.cylinder_exponent, cfg.count_exponent, cfg.gamma);
            ensure!(a > 0.0 && b > 0.0, "early-hits needs positive horizon and cylinder exponents, got {a} and {b}");
            ensure!(
                cfg.hits.is_some() || c > 0.0,
                "early-hits needs a positive count exponent or a fixed `hits`"
            );
            ensure!(
                gamma > (b - c).max(0.0),
                "early-hits needs gamma > max(cylinder_exponent - count_exponent, 0) = {}, got {gamma}",
                (b - c).max(0.0)
            );
            let horizon = (a * nf).exp2().floor().max(1.0) as u64;
            let count = (b * nf).exp2().floor().max(1.0) as usize;
            let needed = cfg.hits.unwrap_or((c * nf).exp2().ceil() as u64);
            let ceiling = -(a + gamma) * nf + 1e-12;
            let mut light = words_where(chain, n, |m| m <= ceiling);
            if light.len() < count {
                bail!(
                    "early-hits: only {} cylinders of length {n} have measure at most 2^-(a+gamma)n, {count} requested",
                    light.len()
                );
            }
            // Heaviest first, ties by code.
            light.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
            let codes = light[..count].iter().map(|w| w.0).collect();
            let len = horizon as usize + n;
            Ok((Setup::Cylinders { horizon, codes, needed: Some(needed) }, len))
        }
        Event::TreeFailure => {
            let prefix = cfg.tree_prefix(chain)?;
            let (lp, c) = (prefix.len(), cfg.c);
            ensure!(c > 0.0 && c < h, "tree-failure needs 0 < c < h = {h:.6}, got {c}");
            ensure!(lp + cfg.n0 <= n, "tree-failure needs |D| + n0 <= n, got {lp} + {} > {n}", cfg.n0);
            ensure!(c * nf > lp as f64, "tree-failure needs c·n > |D| for a non-empty time window at n = {n}");
            Ok((Setup::Tree(prefix), (c * nf).exp2().floor() as usize + n + 1))
        }
    }
}

fn fires(setup: &Setup, o: &Orbit, chain: &GibbsChain, cfg: &ExperimentConfig, n: usize) -> Result<bool> {
    match setup {
        Setup::Cylinders { horizon, codes, needed } => {
            let seen = hit_census(o, n, *horizon)?;
            let hit = codes.iter().filter(|&&c| seen.bitmap.contains(c)).count() as u64;
            Ok(match needed {
                None => hit < codes.len() as u64,
                Some(k) => hit >= *k,
            })
        }
        Setup::Tree(prefix) => {
            let t = tree_counts(o, chain, prefix, n, cfg.epsilon, cfg.c, cfg.n0)?;
            Ok(!t.all_met())
        }
    }
}

pub fn decay_experiment(ctx: &Context) -> Result<DecayReport> {
    let cfg = &ctx.config;
    let chain = ctx.chain()?;
    let reps = cfg.replicates as u64;
    let mut rows = Vec::with_capacity(cfg.n.len());
    for (i, &n) in cfg.n.iter().enumerate() {
        let (s, len) = setup(&chain, cfg, n)?;
        if len > MAX_LENGTH {
            bail!("config field `n`: the {:?} event at n = {n} needs orbits of length {len}, above 2^31", cfg.event);
        }
        let base = i as u64 * reps;
        let outcomes = ctx.replicates(|r| {
            let o = chain.sample_orbit_with(len, &mut stream(cfg.seed, base + r))?;
            fires(&s, &o, &chain, cfg, n)
        })?;
        let events = outcomes.iter().filter(|&&e| e).count() as u64;
        let (lo, hi) = wilson_interval(events, reps, 1.96);
        rows.push(DecayRow {
            n,
            orbit_len: len,
            cylinders: match &s {
                Setup::Cylinders { codes, .. } => codes.len(),
                Setup::Tree(_) => 0,
            },
            replicates: reps,
            events,
            frequency: events as f64 / reps as f64,
            wilson_low: lo,
            wilson_high: hi,
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.events > 0)
        .map(|r| (r.n as f64, r.frequency.log2()))
        .unzip();
    Ok(DecayReport {
        event: cfg.event,
        slope: linear_fit(&xs, &ys),
        decreasing_from: decreasing_from(&rows),
        rows,
    })
}

fn decreasing_from(rows: &[DecayRow]) -> Option<usize> {
    let step_ok = |w: &[DecayRow]| w[1].frequency < w[0].frequency || (w[0].events == 0 && w[1].events == 0);
    let mut start = rows.len().checked_sub(1)?;
    while start > 0 && step_ok(&rows[start - 1..=start]) {
        start -= 1;
    }
    Some(rows[start].n)
}

pub fn decay(ctx: &Context) -> Result<Vec<Artifact>> {
    let report = decay_experiment(ctx)?;
    let rows = report.rows.iter().map(|r| {
        vec![
            r.n.to_string(),
            r.orbit_len.to_string(),
            r.cylinders.to_string(),
            r.replicates.to_string(),
            r.events.to_string(),
            num(r.frequency),
            num(r.wilson_low),
            num(r.wilson_high),
        ]
    });
    let header = [
        "n", "orbit_len", "cylinders", "replicates", "events", "frequency", "wilson_low", "wilson_high",
    ];
    Ok(vec![csv("decay.csv", &header, rows)?, json("decay.json", &report)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use dyncover::hitting::hitting_times;
    use dyncover::thermo::builtin::bernoulli_quarter;

    fn context(cfg: ExperimentConfig) -> Context {
        Context {
            potential: bernoulli_quarter(),
            target: None,
            sft: None,
            pool: rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap(),
            config: cfg,
        }
    }

    #[test]
    fn single_early_hit_is_the_first_hit_rate() {
        let cfg = ExperimentConfig {
            event: Event::EarlyHits,
            hits: Some(1),
            horizon_exponent: 0.6,
            cylinder_exponent: 0.3,
            gamma: 0.35,
            ..Default::default()
        };
        let chain = GibbsChain::new(&bernoulli_quarter()).unwrap();
        let n = 10;
        let (s, len) = setup(&chain, &cfg, n).unwrap();
        let Setup::Cylinders { horizon, codes, .. } = &s else { unreachable!() };
        let mut fired = 0;
        for r in 0..200 {
            let o = chain.sample_orbit_with(len, &mut stream(5, r)).unwrap();
            let direct = codes.iter().any(|&c| {
                let w = Word::from_bits(c, n).unwrap();
                hitting_times(&o, &w.symbols(), n).unwrap().tau_at(n).is_some_and(|t| t <= *horizon)
            });
            let event = fires(&s, &o, &chain, &cfg, n).unwrap();
            assert_eq!(event, direct, "replicate {r}");
            fired += event as u32;
        }
        assert!(fired > 0 && fired < 200);
    }

    #[test]
    fn late_hits_become_rare() {
        let ctx = context(ExperimentConfig {
            n: (6..=14).collect(),
            replicates: 400,
            ..Default::default()
        });
        let rep = decay_experiment(&ctx).unwrap();
        let from = rep.decreasing_from.unwrap();
        assert!(from <= 8, "{:?}", rep.rows.iter().map(|r| r.events).collect::<Vec<_>>());
        assert!(rep.rows.iter().all(|r| (0.0..=1.0).contains(&r.frequency)));
    }

    #[test]
    fn trees_do_not_fail_on_feasible_ladders() {
        let ctx = context(ExperimentConfig {
            event: Event::TreeFailure,
            n: vec![20, 22],
            prefix_len: 4,
            c: 0.6,
            epsilon: 0.1,
            n0: 8,
            replicates: 100,
            ..Default::default()
        });
        let rep = decay_experiment(&ctx).unwrap();
        assert!(rep.rows.iter().all(|r| r.events == 0), "{:?}", rep.rows);
    }

    #[test]
    fn hypotheses_are_checked() {
        let chain = GibbsChain::new(&bernoulli_quarter()).unwrap();
        let bad = ExperimentConfig {
            event: Event::EarlyHits,
            cylinder_exponent: 0.5,
            count_exponent: 0.1,
            gamma: 0.2,
            ..Default::default()
        };
        let msg = setup(&chain, &bad, 10).err().unwrap().to_string();
        assert!(msg.contains("gamma"), "{msg}");
        let late = ExperimentConfig {
            gamma: 2.0,
            ..Default::default()
        };
        assert!(setup(&chain, &late, 10).is_err());
    }

    #[test]
    fn decreasing_tail() {
        let row = |n, events| DecayRow {
            n,
            orbit_len: 0,
            cylinders: 0,
            replicates: 10,
            events,
            frequency: events as f64 / 10.0,
            wilson_low: 0.0,
            wilson_high: 1.0,
        };
        let rows = [row(4, 3), row(5, 5), row(6, 2), row(7, 0), row(8, 0)];
        assert_eq!(decreasing_from(&rows), Some(5));
    }
}

use std::collections::BTreeMap;

use anyhow::{Context as _, Result};
use rayon::prelude::*;
use serde::Serialize;

use dyncover::covering::{circle_cover_orbit, estimate_dims_with, subword_census, CircleCoverReport, CoverOptions, FirstVisits};
use dyncover::hitting::{hitting_times, return_profile, HittingProfile};
use dyncover::rng::stream;
use dyncover::sft::{SftModel, SftPrediction, SftProfile, SftSpec};
use dyncover::spectrum::{uniform_grid, CoverPrediction, Extremes, Spectrum};
use dyncover::stats::{median, Regression};
use dyncover::thermo::normalize;
use dyncover::typicality::{cantor_lower_bound, cantor_orbit_len, tree_counts, CantorReport, TreeCounts};
use dyncover::{GibbsChain, Potential};

use crate::config::ExperimentConfig;
use crate::output::{csv, json, num, opt_num, Artifact};

/// Resolved inputs and the worker pool for one run.
pub struct Context {
    pub config: ExperimentConfig,
    pub potential: Potential,
    pub target: Option<Potential>,
    pub sft: Option<SftSpec>,
    pub pool: rayon::ThreadPool,
}

impl Context {
    /// Runs `f(r)` for every replicate; results come back in replicate order.
    pub fn replicates<T: Send>(&self, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
        let r = self.config.replicates as u64;
        self.pool.install(|| (0..r).into_par_iter().map(f).collect())
    }

    pub fn chain(&self) -> Result<GibbsChain> {
        GibbsChain::new(&self.potential).context("building the Gibbs measure of `potential`")
    }
}

#[derive(Serialize)]
struct SpectrumSummary {
    extremes: Extremes,
    kappa_f: f64,
    pressure_at_one: f64,
    predictions: Vec<CoverPrediction>,
}

pub fn spectrum(ctx: &Context) -> Result<Vec<Artifact>> {
    let cfg = &ctx.config;
    let s = Spectrum::new(&ctx.potential)?;
    let grid = uniform_grid(cfg.q_range[0], cfg.q_range[1], cfg.q_points);
    let profile = s.profile(&grid)?;
    let rows = (0..grid.len()).map(|i| {
        vec![
            num(profile.q[i]),
            num(profile.pressure[i]),
            num(profile.t[i]),
            num(profile.e[i]),
        ]
    });
    let predictions = cfg
        .kappa
        .iter()
        .map(|&k| s.predict_cover(ctx.target.as_ref(), k))
        .collect::<dyncover::Result<Vec<_>>>()?;
    let summary = SpectrumSummary {
        extremes: profile.extremes,
        kappa_f: profile.kappa_f,
        pressure_at_one: s.pressure(1.0)?,
        predictions,
    };
    Ok(vec![
        csv("spectrum.csv", &["q", "pressure", "t", "entropy"], rows)?,
        json("summary.json", &summary)?,
    ])
}

#[derive(Serialize)]
struct HitLength {
    n: usize,
    median_exponent: f64,
    missed: usize,
}

#[derive(Serialize)]
struct HitSummary {
    mode: &'static str,
    /// `h` for return times, `∫ −φ dμ_ψ` for targets drawn from `ψ`.
    reference: f64,
    lengths: Vec<HitLength>,
    alpha: Vec<Option<f64>>,
    censored: usize,
}

pub fn hit(ctx: &Context) -> Result<Vec<Artifact>> {
    let cfg = &ctx.config;
    let chain = ctx.chain()?;
    let target = ctx.target.as_ref().map(GibbsChain::new).transpose()?;
    let n_max = cfg.n_max();
    let profiles: Vec<HittingProfile> = ctx.replicates(|r| {
        Ok(match &target {
            Some(tc) => {
                let x = chain.sample_orbit_with(cfg.length, &mut stream(cfg.seed, 2 * r))?;
                let y = tc.sample_orbit_with(n_max, &mut stream(cfg.seed, 2 * r + 1))?;
                hitting_times(&x, &y.symbols(), n_max)?
            }
            None => {
                let x = chain.sample_orbit_with(cfg.length, &mut stream(cfg.seed, r))?;
                return_profile(&x, n_max)?
            }
        })
    })?;
    let exponent = |p: &HittingProfile, n: usize| {
        p.tau_at(n)
            .map_or(f64::INFINITY, |t| (t as f64).log2() / n as f64)
    };
    let rows = profiles.iter().enumerate().flat_map(|(r, p)| {
        cfg.n.iter().map(move |&n| {
            vec![
                r.to_string(),
                n.to_string(),
                p.tau_at(n).map(|t| t.to_string()).unwrap_or_default(),
                num(exponent(p, n)),
            ]
        })
    });
    let hits = csv("hit.csv", &["replicate", "n", "tau", "exponent"], rows)?;
    let reference = match &target {
        Some(tc) => -tc.integrate(&normalize(&ctx.potential)?),
        None => chain.entropy(),
    };
    let lengths = cfg
        .n
        .iter()
        .map(|&n| {
            let e: Vec<f64> = profiles.iter().map(|p| exponent(p, n)).collect();
            HitLength {
                n,
                median_exponent: median(&e).unwrap_or(f64::NAN),
                missed: e.iter().filter(|x| x.is_infinite()).count(),
            }
        })
        .collect();
    let summary = HitSummary {
        mode: if target.is_some() { "target" } else { "return" },
        reference,
        lengths,
        alpha: profiles.iter().map(|p| p.alpha).collect(),
        censored: profiles.iter().filter(|p| p.censored).count(),
    };
    Ok(vec![hits, json("summary.json", &summary)?])
}

#[derive(Serialize)]
struct CoverSummary {
    replicate: usize,
    kappa: f64,
    slope_i: Option<Regression>,
    slope_f: Option<Regression>,
    prediction: Option<CoverPrediction>,
    sft_prediction: Option<SftPrediction>,
}

pub fn cover(ctx: &Context) -> Result<Vec<Artifact>> {
    let cfg = &ctx.config;
    let chain = ctx.chain()?;
    let spectrum = Spectrum::new(&ctx.potential)?;
    let model = ctx.sft.as_ref().map(|s| SftModel::new(s, &ctx.potential)).transpose()?;
    let options = CoverOptions {
        slack: cfg.slack,
        restrict: model.as_ref().map(|m| m.support().clone()),
    };
    let sft_predictions = match &model {
        Some(m) => cfg.kappa.iter().map(|&k| m.predict(k).map(Some)).collect::<dyncover::Result<Vec<_>>>()?,
        None => vec![None; cfg.kappa.len()],
    };
    let estimates = ctx.replicates(|r| {
        let o = chain.sample_orbit_with(cfg.length, &mut stream(cfg.seed, r))?;
        let visits = FirstVisits::new(&o, cfg.n_max())?;
        let spec = if model.is_some() { None } else { Some(&spectrum) };
        cfg.kappa
            .iter()
            .map(|&k| Ok(estimate_dims_with(&visits, spec, k, &cfg.n, &options)?))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (r, per_kappa) in estimates.iter().enumerate() {
        for (est, sft_pred) in per_kappa.iter().zip(&sft_predictions) {
            let (dim_i, dim_f) = match (sft_pred, &est.prediction) {
                (Some(p), _) => (Some(p.dim_i), Some(p.dim_f)),
                (None, Some(p)) => (Some(p.dim_i), Some(p.dim_f)),
                _ => (None, None),
            };
            for row in &est.rows {
                rows.push(vec![
                    r.to_string(),
                    num(est.kappa),
                    row.n.to_string(),
                    row.horizon.to_string(),
                    row.hit.to_string(),
                    row.unhit.to_string(),
                    row.saturated.to_string(),
                    num(row.dim_i_est),
                    num(row.dim_f_est),
                    opt_num(dim_i),
                    opt_num(dim_f),
                ]);
            }
            summary.push(CoverSummary {
                replicate: r,
                kappa: est.kappa,
                slope_i: est.slope_i,
                slope_f: est.slope_f,
                prediction: est.prediction,
                sft_prediction: *sft_pred,
            });
        }
    }
    let header = [
        "replicate", "kappa", "n", "K_n", "D_n", "U_n", "saturated", "dim_I_est", "dim_F_est", "dim_I_pred", "dim_F_pred",
    ];
    Ok(vec![csv("cover.csv", &header, rows)?, json("summary.json", &summary)?])
}

pub fn census(ctx: &Context) -> Result<Vec<Artifact>> {
    let cfg = &ctx.config;
    let chain = ctx.chain()?;
    let spectrum = Spectrum::new(&ctx.potential)?;
    let reports = ctx.replicates(|r| {
        let o = chain.sample_orbit_with(cfg.length + cfg.n_max() - 1, &mut stream(cfg.seed, r))?;
        cfg.n
            .iter()
            .map(|&n| Ok(subword_census(&o, &chain, &spectrum, n, cfg.length, cfg.bin_width)?))
            .collect::<Result<Vec<_>>>()
    })?;
    let rows = reports.iter().enumerate().flat_map(|(r, per_n)| {
        per_n.iter().flat_map(move |rep| {
            rep.bins.iter().map(move |b| {
                vec![
                    r.to_string(),
                    rep.n.to_string(),
                    num(b.beta),
                    b.count.to_string(),
                    num(b.log2_count_over_n),
                    num(b.predicted),
                    b.included.to_string(),
                ]
            })
        })
    });
    let header = ["replicate", "n", "beta_bin", "count", "log2_count_over_n", "predicted", "included"];
    Ok(vec![csv("census.csv", &header, rows)?])
}

#[derive(Serialize)]
struct TreeReplicate {
    replicate: usize,
    tree: TreeCounts,
    cantor: Option<CantorReport>,
    cantor_error: Option<String>,
}

#[derive(Serialize)]
struct TreeReport {
    ladder: Vec<usize>,
    c: f64,
    epsilon: f64,
    n0: usize,
    orbit_len: usize,
    thresholds_met: usize,
    median_lower_bound: Option<f64>,
    replicates: Vec<TreeReplicate>,
}

pub fn tree(ctx: &Context) -> Result<Vec<Artifact>> {
    let cfg = &ctx.config;
    let chain = ctx.chain()?;
    let leaf_window = (cfg.c * cfg.leaf_len as f64).exp2().floor() as usize + cfg.leaf_len + 1;
    let len = cantor_orbit_len(&cfg.ladder, cfg.c).max(leaf_window);
    if len > crate::config::MAX_LENGTH {
        anyhow::bail!("config fields `ladder`/`c`: the construction needs an orbit of length {len}, above 2^31");
    }
    let prefix = cfg.tree_prefix(&chain)?;
    let results = ctx.replicates(|r| {
        let o = chain.sample_orbit_with(len, &mut stream(cfg.seed, r))?;
        let tree = tree_counts(&o, &chain, &prefix, cfg.leaf_len, cfg.epsilon, cfg.c, cfg.n0)?;
        let (cantor, cantor_error) = match cantor_lower_bound(&o, &chain, &cfg.ladder, cfg.epsilon, cfg.c, cfg.n0) {
            Ok(rep) => (Some(rep), None),
            Err(e @ dyncover::Error::EmptyLevel(_)) => (None, Some(e.to_string())),
            Err(e) => return Err(e.into()),
        };
        Ok(TreeReplicate {
            replicate: r as usize,
            tree,
            cantor,
            cantor_error,
        })
    })?;
    let bounds: Vec<f64> = results
        .iter()
        .map(|t| t.cantor.as_ref().map_or(0.0, |c| c.lower_bound))
        .collect();
    let levels = results.iter().flat_map(|t| {
        t.cantor.iter().flat_map(move |c| {
            c.levels
                .iter()
                .map(move |l| vec![t.replicate.to_string(), l.level.to_string(), l.count.to_string(), num(l.slope)])
        })
    });
    let levels = csv("cantor_levels.csv", &["replicate", "level", "count", "slope"], levels)?;
    let report = TreeReport {
        ladder: cfg.ladder.clone(),
        c: cfg.c,
        epsilon: cfg.epsilon,
        n0: cfg.n0,
        orbit_len: len,
        thresholds_met: results.iter().filter(|t| t.tree.all_met()).count(),
        median_lower_bound: median(&bounds),
        replicates: results,
    };
    Ok(vec![json("tree.json", &report)?, levels])
}

#[derive(Serialize)]
struct SftReport {
    forbidden: Vec<String>,
    profile: SftProfile,
    predictions: Vec<SftPrediction>,
}

pub fn sft(ctx: &Context) -> Result<Vec<Artifact>> {
    let cfg = &ctx.config;
    let spec = ctx.sft.as_ref().expect("validated");
    let model = SftModel::new(spec, &ctx.potential)?;
    let profile = model.profile()?;
    let predictions = cfg
        .kappa
        .iter()
        .map(|&k| model.predict(k))
        .collect::<dyncover::Result<Vec<_>>>()?;
    let grid = uniform_grid(profile.e_a_minus, profile.e_a_plus, cfg.q_points);
    let rows = grid
        .iter()
        .map(|&t| Ok(vec![num(t), opt_num(model.entropy_spectrum(t)?.map(|v| v.value))]))
        .collect::<Result<Vec<_>>>()?;
    let report = SftReport {
        forbidden: spec.forbidden().iter().map(|w| w.to_string()).collect(),
        profile,
        predictions,
    };
    Ok(vec![
        json("sft.json", &report)?,
        csv("sft_spectrum.csv", &["t", "entropy"], rows)?,
    ])
}

#[derive(Serialize)]
struct CircleRun {
    replicate: usize,
    report: CircleCoverReport,
}

pub fn circle(ctx: &Context) -> Result<Vec<Artifact>> {
    let cfg = &ctx.config;
    let chain = ctx.chain()?;
    let [lo, hi] = cfg.circle;
    let runs = ctx.replicates(|r| {
        let o = chain.sample_orbit_with(hi as usize + 64, &mut stream(cfg.seed, r))?;
        cfg.kappa
            .iter()
            .map(|&k| {
                Ok(CircleRun {
                    replicate: r as usize,
                    report: circle_cover_orbit(&o, k, cfg.depth, (lo, hi))?,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let runs: Vec<CircleRun> = runs.into_iter().flatten().collect();
    let mut by_kappa: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    for run in &runs {
        by_kappa.entry(num(run.report.kappa)).or_default().push(run.report.uncovered);
    }
    Ok(vec![json("circle.json", &serde_json::json!({ "runs": runs, "uncovered_by_kappa": by_kappa }))?])
}

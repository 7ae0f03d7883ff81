//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if any fail.
//!
//! Run a subset by number: `cargo test -p dyncover-validation --test acceptance -- 5 7`.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use dyncover::covering::{estimate_dims_with, hit_census, subword_census, CoverOptions, FirstVisits};
use dyncover::hitting::{hitting_times, return_profile};
use dyncover::rng::{generator, stream};
use dyncover::sft::{sft_extremes, sft_predict, sft_pressure, sft_spectrum, SftSpec};
use dyncover::spectrum::{default_q_grid, entropy_extremes, entropy_spectrum, uniform_grid, Spectrum};
use dyncover::stats::median;
use dyncover::thermo::builtin::{bernoulli_quarter, markov_test};
use dyncover::thermo::{normalize, pressure};
use dyncover::typicality::{cantor_lower_bound, cantor_orbit_len, tree_counts};
use dyncover::{GibbsChain, Potential, Word};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn log2_quarter_closed(q: f64) -> f64 {
    (0.25f64.powf(q) + 0.75f64.powf(q)).log2()
}

/// Random normalized potentials of memory 1..=4 from a fixed seed.
fn battery(seed: u64, count: usize) -> Vec<Potential> {
    let mut g = generator(seed);
    (0..count)
        .map(|i| {
            let m = 1 + i % 4;
            let table = (0..1 << m).map(|_| g.gen_range(-3.0..1.0)).collect();
            normalize(&Potential::new(m, table).expect("valid table")).expect("primitive")
        })
        .collect()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let pot = bernoulli_quarter();
    let curve = default_q_grid()
        .iter()
        .map(|&q| (pressure(&pot, q).unwrap() - log2_quarter_closed(q)).abs())
        .fold(0.0f64, f64::max);
    let ex = entropy_extremes(&pot).unwrap();
    let l43 = (4.0f64 / 3.0).log2();
    let closed = [l43, (2.0 + l43) / 2.0, 2.0, 0.25 * 2.0 + 0.75 * l43];
    let got = [ex.e_minus, ex.e_max, ex.e_plus, ex.h_mu];
    let listed = [0.415037, 1.207518, 2.0, 0.811278];
    let err = got.iter().zip(closed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let rounding = got.iter().zip(listed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    verdict(
        curve < 1e-10 && err < 1e-9 && rounding < 1e-6 && elapsed < Duration::from_secs(1),
        format!("pressure err {curve:.1e}, extremes err {err:.1e}, {elapsed:.2?}"),
    )
}

fn criterion_2_3() -> (Verdict, Verdict) {
    let start = Instant::now();
    let pots = battery(0x5eed_0002, 20);
    let grid = default_q_grid();
    let results: Vec<(f64, f64, f64)> = pots
        .par_iter()
        .map(|pot| {
            let s = Spectrum::new(pot).unwrap();
            let mut legendre = 0.0f64;
            let mut above_diag = f64::NEG_INFINITY;
            for &q in &grid {
                let p = s.pressure(q).unwrap();
                let t = s.t_of_q(q).unwrap();
                let e = s.entropy_spectrum(t).unwrap().expect("t(q) lies in the range").value;
                legendre = legendre.max((e - (p + q * t)).abs());
                above_diag = above_diag.max(e - t);
            }
            let ex = s.extremes();
            for t in uniform_grid(ex.e_minus, ex.e_plus, 201) {
                if let Some(v) = s.entropy_spectrum(t).unwrap() {
                    above_diag = above_diag.max(v.value - t);
                }
            }
            let tangency = (s.entropy_spectrum(ex.h_mu).unwrap().unwrap().value - ex.h_mu).abs();
            (legendre, above_diag, tangency)
        })
        .collect();
    let elapsed = start.elapsed();
    let legendre = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let above = results.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let tangency = results.iter().map(|r| r.2).fold(0.0, f64::max);
    (
        verdict(
            legendre < 1e-8 && elapsed < Duration::from_secs(10),
            format!("max residual {legendre:.1e} over 20 potentials x 513 q, {elapsed:.2?}"),
        ),
        verdict(
            above <= 1e-9 && tangency < 1e-6,
            format!("max E(t) - t = {above:.1e}, max |E(h) - h| = {tangency:.1e}"),
        ),
    )
}

fn criterion_4() -> Verdict {
    let pot = markov_test();
    let chain = GibbsChain::new(&pot).unwrap();
    // Constants from the shortest certified search, then checked far beyond it.
    let c = chain.gibbs_constants(1).unwrap();
    let mut worst_gibbs = 0.0f64;
    let mut masses: Vec<Vec<f64>> = vec![vec![1.0]];
    for n in 1..=12usize {
        let mut row = vec![0.0; 1 << n];
        for code in 0..1u64 << n {
            let w: Vec<u8> = (0..n).map(|i| (code >> i & 1) as u8).collect();
            let mass = chain.measure_symbols(&w);
            row[code as usize] = mass;
            for tail in 0..2u8 {
                let mut ext = w.clone();
                ext.push(tail);
                let r = mass / pot.birkhoff_sum(&ext).exp2();
                worst_gibbs = worst_gibbs.max((r.log2().abs().exp2() - c.gamma).max(0.0));
            }
        }
        masses.push(row);
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for a_len in 1..12usize {
        for b_len in 1..=12 - a_len {
            for a in 0..1u64 << a_len {
                for b in 0..1u64 << b_len {
                    let ab = masses[a_len + b_len][(a | b << a_len) as usize];
                    let r = ab / (masses[a_len][a as usize] * masses[b_len][b as usize]);
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
            }
        }
    }
    let within = lo >= c.qb_lower - 1e-9 && hi <= c.qb_upper + 1e-9 && worst_gibbs <= 1e-9;
    let listed = (c.qb_lower - 0.522407).abs() < 1e-6 && (c.qb_upper - 1.477593).abs() < 1e-6;
    verdict(
        within && listed,
        format!(
            "ratios in [{lo:.9}, {hi:.9}], derived [{:.9}, {:.9}], gamma {:.6}",
            c.qb_lower, c.qb_upper, c.gamma
        ),
    )
}

fn exponent(tau: Option<u64>, n: usize) -> f64 {
    tau.map_or(f64::INFINITY, |t| (t as f64).log2() / n as f64)
}

fn criterion_5() -> Verdict {
    let start = Instant::now();
    let chain = GibbsChain::new(&bernoulli_quarter()).unwrap();
    let h = chain.entropy();
    let values: Vec<f64> = (0..200u64)
        .into_par_iter()
        .map(|r| {
            let o = chain.sample_orbit_with(1 << 24, &mut stream(0x0a55, r)).unwrap();
            exponent(return_profile(&o, 16).unwrap().tau_at(16), 16)
        })
        .collect();
    let m = median(&values).unwrap();
    let elapsed = start.elapsed();
    verdict(
        (m - h).abs() <= 0.06 && elapsed < Duration::from_secs(300),
        format!("median {m:.4} vs h = {h:.6}, {elapsed:.1?}"),
    )
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let phi = GibbsChain::new(&bernoulli_quarter()).unwrap();
    let psi = GibbsChain::new(&markov_test()).unwrap();
    let target = -psi.integrate(&bernoulli_quarter());
    let values: Vec<f64> = (0..200u64)
        .into_par_iter()
        .map(|r| {
            let x = phi.sample_orbit_with(1 << 24, &mut stream(0x0c4a, 2 * r)).unwrap();
            let y = psi.sample_orbit_with(16, &mut stream(0x0c4a, 2 * r + 1)).unwrap();
            exponent(hitting_times(&x, &y.symbols(), 16).unwrap().tau_at(16), 16)
        })
        .collect();
    let m = median(&values).unwrap();
    let elapsed = start.elapsed();
    verdict(
        (m - target).abs() <= 0.06 && elapsed < Duration::from_secs(300),
        format!("median {m:.4} vs integral {target:.6}, {elapsed:.1?}"),
    )
}

fn criterion_7() -> Verdict {
    let chain = GibbsChain::new(&bernoulli_quarter()).unwrap();
    let kappa = 1.0 / 2.5;
    let grid: Vec<usize> = (1..=16).collect();
    let rows: Vec<(Vec<usize>, bool, usize)> = (0..100u64)
        .into_par_iter()
        .map(|r| {
            let o = chain.sample_orbit_with(1 << 26, &mut stream(0x0f7e, r)).unwrap();
            let fv = FirstVisits::new(&o, 16).unwrap();
            let est = estimate_dims_with(&fv, None, kappa, &grid, &CoverOptions::default()).unwrap();
            let missed = est.feasible_rows().filter(|row| row.unhit > 0).map(|row| row.n).collect();
            let literal = est.rows.iter().all(|row| row.unhit == 0);
            (missed, literal, est.feasible_rows().count())
        })
        .collect();
    let ok = rows.iter().filter(|r| r.0.is_empty()).count();
    let literal = rows.iter().filter(|r| r.1).count();
    let n_top = rows[0].2;
    let mut tally = vec![0usize; n_top + 1];
    rows.iter().flat_map(|r| &r.0).for_each(|&n| tally[n] += 1);
    let misses: Vec<String> = (1..=n_top)
        .filter(|&n| tally[n] > 0)
        .map(|n| format!("n={n}:{}", tally[n]))
        .collect();
    verdict(
        ok >= 99,
        format!(
            "U_n = 0 for all unsaturated n <= {n_top} in {ok}/100 seeds, for every n <= 16 in {literal}/100; seeds missing a word [{}]",
            misses.join(" ")
        ),
    )
}

fn criterion_8() -> Verdict {
    let start = Instant::now();
    let spec = Spectrum::new(&bernoulli_quarter()).unwrap();
    let chain = GibbsChain::new(&bernoulli_quarter()).unwrap();
    let o = chain.sample_orbit_with(1 << 26, &mut stream(0x0d18, 0)).unwrap();
    let fv = FirstVisits::new(&o, 18).unwrap();
    let grid: Vec<usize> = (12..=18).collect();
    let opts = CoverOptions::default();
    let f = estimate_dims_with(&fv, Some(&spec), 1.0 / 1.5, &grid, &opts).unwrap();
    let i = estimate_dims_with(&fv, Some(&spec), 2.0, &grid, &opts).unwrap();
    let e15 = spec.entropy_spectrum(1.5).unwrap().unwrap().value;
    let sf = f.slope_f.unwrap().slope;
    let si = i.slope_i.unwrap().slope;
    let elapsed = start.elapsed();
    verdict(
        (sf - e15).abs() <= 0.15 && (si - 0.5).abs() <= 0.1 && elapsed < Duration::from_secs(600),
        format!("F slope {sf:.4} vs E(1.5) = {e15:.4}; I slope {si:.4} vs 0.5; {elapsed:.1?}"),
    )
}

fn criterion_9() -> Verdict {
    let pot = bernoulli_quarter();
    let chain = GibbsChain::new(&pot).unwrap();
    let spec = Spectrum::new(&pot).unwrap();
    let length = 1 << 20;
    let o = chain.sample_orbit_with(length + 9, &mut stream(0x0ce5, 0)).unwrap();
    let report = subword_census(&o, &chain, &spec, 10, length, 0.05).unwrap();
    let mut worst = (0.0f64, 0.0f64);
    for b in report.bins.iter().filter(|b| b.included) {
        let d = (b.log2_count_over_n - b.predicted).abs();
        if d > worst.0 {
            worst = (d, b.beta);
        }
    }
    let included = report.bins.iter().filter(|b| b.included).count();
    verdict(
        worst.0 <= 0.15,
        format!(
            "{included} bins with count >= 32; worst |diff| {:.3} at beta {:.3}",
            worst.0, worst.1
        ),
    )
}

fn criterion_10() -> Verdict {
    let chain = GibbsChain::new(&bernoulli_quarter()).unwrap();
    let ladder = [0usize, 16, 40];
    let len = cantor_orbit_len(&ladder, 0.6);
    let bounds: Vec<f64> = (0..50u64)
        .into_par_iter()
        .map(|r| {
            let o = chain.sample_orbit_with(len, &mut stream(0x0ca7, r)).unwrap();
            cantor_lower_bound(&o, &chain, &ladder, 0.1, 0.6, 8)
                .map(|rep| rep.lower_bound)
                .unwrap_or(0.0)
        })
        .collect();
    let ok = bounds.iter().filter(|&&b| b >= 0.6 - 0.15).count();
    verdict(
        ok >= 45,
        format!(
            "bound >= 0.45 in {ok}/50 seeds (ladder {ladder:?}, median {:.3})",
            median(&bounds).unwrap()
        ),
    )
}

fn criterion_11() -> Verdict {
    let g = SftSpec::golden_mean();
    let minus_one = Potential::constant(1, -1.0).unwrap();
    let golden = ((1.0 + 5.0f64.sqrt()) / 2.0).log2();
    let p_a = sft_pressure(&g, &minus_one, 1.0).unwrap();
    let dim = sft_extremes(&g, &minus_one).unwrap().dim_sigma_a;
    let values = (p_a - (golden - 1.0)).abs() < 1e-9
        && (dim - golden).abs() < 1e-9
        && (p_a + 0.305758).abs() < 5e-7
        && (dim - 0.694242).abs() < 5e-7;

    let pots = battery(0x5eed_0011, 20);
    let nonpositive = pots
        .iter()
        .map(|p| sft_pressure(&g, p, 1.0).unwrap())
        .fold(f64::NEG_INFINITY, f64::max);

    let full = SftSpec::full();
    let mut exact = true;
    for pot in pots.iter().take(5).chain([bernoulli_quarter(), markov_test()].iter()) {
        for q in [-4.0, -1.0, 0.0, 0.5, 1.0, 3.0] {
            exact &= sft_pressure(&full, pot, q).unwrap() == pressure(pot, q).unwrap();
        }
        let a = sft_extremes(&full, pot).unwrap();
        let b = entropy_extremes(pot).unwrap();
        exact &= (a.e_a_minus, a.e_a_max, a.e_a_plus) == (b.e_minus, b.e_max, b.e_plus);
        for t in uniform_grid(b.e_minus, b.e_plus, 9) {
            exact &= sft_spectrum(&full, pot, t).unwrap() == entropy_spectrum(pot, t).unwrap();
        }
    }

    let edge = -p_a;
    let below = sft_predict(&g, &minus_one, 1.0 / (edge * (1.0 - 1e-6))).unwrap();
    let above = sft_predict(&g, &minus_one, 1.0 / (edge * (1.0 + 1e-6))).unwrap();
    let flags = below.i_empty && !above.i_empty;
    verdict(
        values && nonpositive <= 0.0 && exact && flags,
        format!(
            "P_A = {p_a:.9}, dim = {dim:.9}, max P_A over battery {nonpositive:.3e}, reductions exact: {exact}, flags: {flags}"
        ),
    )
}

fn naive_tau(x: &[u8], y: &[u8]) -> Vec<Option<u64>> {
    (1..=y.len())
        .map(|n| {
            (1..x.len())
                .find(|&l| l + n <= x.len() && x[l..l + n] == y[..n])
                .map(|l| l as u64)
        })
        .collect()
}

fn naive_census(x: &[u8], n: usize, k: usize) -> u64 {
    (1..=k).map(|l| &x[l..l + n]).collect::<HashSet<_>>().len() as u64
}

#[allow(clippy::too_many_arguments)]
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
            let seen: HashSet<&[u8]> = leaves.iter().map(|w| &w[l_p..level]).collect();
            let g = level - l_p;
            (0u64..1 << g)
                .filter(|code| {
                    let gw: Vec<u8> = (0..g).map(|i| (code >> i & 1) as u8).collect();
                    seen.contains(&gw[..]) && good(&gw, eps)
                })
                .count() as u64
        })
        .collect()
}

fn criterion_12() -> Verdict {
    let chains = [
        GibbsChain::new(&bernoulli_quarter()).unwrap(),
        GibbsChain::new(&markov_test()).unwrap(),
    ];
    let mut g = generator(0x0012);
    let (mut hits, mut census, mut trees) = (0, 0, 0);
    let mut first_failure = None;
    for i in 0..200 {
        let chain = &chains[i % 2];
        let len = g.gen_range(64..=4096usize);
        let o = chain.sample_orbit_with(len, &mut g).unwrap();
        let x = o.symbols();

        let n = g.gen_range(1..=14usize);
        let y: Vec<u8> = if g.gen_bool(0.5) {
            let at = g.gen_range(0..len - n);
            x[at..at + n].to_vec()
        } else {
            (0..n).map(|_| g.gen_range(0..2u8)).collect()
        };
        if hitting_times(&o, &y, n).unwrap().tau == naive_tau(&x, &y) {
            hits += 1;
        } else {
            first_failure.get_or_insert(format!("hitting instance {i}"));
        }

        let k = g.gen_range(1..=len - n);
        let fv = FirstVisits::new(&o, n).unwrap();
        let expect = naive_census(&x, n, k);
        if hit_census(&o, n, k as u64).unwrap().distinct == expect && fv.hit_count(n, k as u64, None) == expect {
            census += 1;
        } else {
            first_failure.get_or_insert(format!("census instance {i}"));
        }

        let l_pp = g.gen_range(10..=14usize);
        let l_p = g.gen_range(1..=3usize);
        let n0 = g.gen_range(3..=l_pp - l_p);
        let eps = g.gen_range(0.05..0.4);
        let c = g.gen_range(0.5..0.85);
        let tree_orbit = chain.sample_orbit_with(4096, &mut g).unwrap();
        let tx = tree_orbit.symbols();
        let d = &tx[..l_p];
        let t = tree_counts(&tree_orbit, chain, &Word::from_symbols(d).unwrap(), l_pp, eps, c, n0).unwrap();
        if t.levels.iter().map(|l| l.count).collect::<Vec<_>>() == naive_tree(&tx, chain, d, l_pp, eps, c, n0) {
            trees += 1;
        } else {
            first_failure.get_or_insert(format!("tree instance {i}"));
        }
    }
    verdict(
        hits == 200 && census == 200 && trees == 200,
        format!(
            "hitting {hits}/200, census {census}/200, trees {trees}/200{}",
            first_failure.map(|f| format!("; first mismatch: {f}")).unwrap_or_default()
        ),
    )
}

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run = |id: u32| wanted.is_empty() || wanted.contains(&id);
    let names = [
        "exact thermodynamics",
        "Legendre duality",
        "diagonal tangency",
        "Gibbs sandwich and quasi-Bernoulli",
        "return times (Ornstein-Weiss)",
        "hitting exponent of independent targets",
        "F emptiness",
        "dimension slopes",
        "subword census",
        "Cantor lower bound",
        "SFT battery",
        "oracle equivalence",
    ];
    let mut outcomes: Vec<(u32, Verdict, Duration)> = Vec::new();
    let mut pending_3 = None;
    for id in 1..=12u32 {
        if !run(id) {
            continue;
        }
        let start = Instant::now();
        let v = match id {
            1 => criterion_1(),
            2 | 3 => {
                if id == 3 {
                    if let Some(v) = pending_3.take() {
                        v
                    } else {
                        criterion_2_3().1
                    }
                } else {
                    let (a, b) = criterion_2_3();
                    pending_3 = Some(b);
                    a
                }
            }
            4 => criterion_4(),
            5 => criterion_5(),
            6 => criterion_6(),
            7 => criterion_7(),
            8 => criterion_8(),
            9 => criterion_9(),
            10 => criterion_10(),
            11 => criterion_11(),
            12 => criterion_12(),
            _ => unreachable!(),
        };
        let elapsed = start.elapsed();
        println!(
            "{} {:>2} {:<40} {:>8.2?}  {}",
            if v.pass { "PASS" } else { "FAIL" },
            id,
            names[id as usize - 1],
            elapsed,
            v.detail
        );
        outcomes.push((id, v, elapsed));
    }
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.1.pass).map(|o| o.0).collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        outcomes.len() - failed.len(),
        failed.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(" ({failed:?})")
        }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}

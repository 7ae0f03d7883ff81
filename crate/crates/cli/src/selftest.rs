use std::collections::HashSet;

use dyncover::covering::{hit_census, FirstVisits};
use dyncover::hitting::hitting_times;
use dyncover::rng::stream;
use dyncover::sft::{sft_pressure, SftSpec};
use dyncover::spectrum::{default_q_grid, entropy_extremes, Spectrum};
use dyncover::thermo::builtin::{bernoulli_quarter, markov_test};
use dyncover::thermo::pressure;
use dyncover::{GibbsChain, Potential};

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> dyncover::Result<(bool, String)>) -> Check {
    match f() {
        Ok((pass, detail)) => Check { name, pass, detail },
        Err(e) => Check {
            name,
            pass: false,
            detail: format!("error: {e}"),
        },
    }
}

pub fn run() -> Vec<Check> {
    vec![
        check("bernoulli pressure", || {
            let p = bernoulli_quarter();
            let mut worst = 0.0f64;
            for q in default_q_grid() {
                let exact = (0.25f64.powf(q) + 0.75f64.powf(q)).log2();
                worst = worst.max((pressure(&p, q)? - exact).abs());
            }
            Ok((worst < 1e-10, format!("max error {worst:.1e}")))
        }),
        check("bernoulli extremes", || {
            let e = entropy_extremes(&bernoulli_quarter())?;
            let l = (4.0f64 / 3.0).log2();
            let err = [
                e.e_minus - l,
                e.e_max - (2.0 + l) / 2.0,
                e.e_plus - 2.0,
                e.h_mu - (0.5 + 0.75 * l),
            ]
            .iter()
            .fold(0.0f64, |m, d| m.max(d.abs()));
            Ok((err < 1e-9, format!("max error {err:.1e}")))
        }),
        check("legendre duality", || {
            let s = Spectrum::new(&markov_test())?;
            let mut worst = 0.0f64;
            for q in [-6.0, -2.0, -0.5, 0.0, 0.5, 1.0, 3.0, 7.0] {
                let t = s.t_of_q(q)?;
                let e = s.entropy_spectrum(t)?.map_or(f64::NAN, |v| v.value);
                worst = worst.max((e - s.pressure(q)? - q * t).abs());
            }
            Ok((worst < 1e-8, format!("max residual {worst:.1e}")))
        }),
        check("golden mean pressure", || {
            let golden = ((1.0 + 5.0f64.sqrt()) / 2.0).log2();
            let p = sft_pressure(&SftSpec::golden_mean(), &Potential::constant(1, -1.0)?, 1.0)?;
            Ok(((p - (golden - 1.0)).abs() < 1e-9, format!("P_A = {p:.9}")))
        }),
        check("hitting times against a scan", || {
            let chain = GibbsChain::new(&markov_test())?;
            let o = chain.sample_orbit_with(3000, &mut stream(11, 0))?;
            let x = o.symbols();
            let y = x[1200..1212].to_vec();
            let got = hitting_times(&o, &y, 12)?.tau;
            let naive: Vec<Option<u64>> = (1..=12)
                .map(|n| (1..=x.len() - n).find(|&l| x[l..l + n] == y[..n]).map(|l| l as u64))
                .collect();
            Ok((got == naive, format!("tau_12 = {:?}", got[11])))
        }),
        check("hit census against a set", || {
            let chain = GibbsChain::new(&bernoulli_quarter())?;
            let o = chain.sample_orbit_with(5000, &mut stream(11, 1))?;
            let x = o.symbols();
            let visits = FirstVisits::new(&o, 12)?;
            let mut ok = true;
            for (n, k) in [(3usize, 5usize), (8, 700), (12, 4000)] {
                let naive = (1..=k).map(|l| &x[l..l + n]).collect::<HashSet<_>>().len() as u64;
                ok &= hit_census(&o, n, k as u64)?.distinct == naive && visits.hit_count(n, k as u64, None) == naive;
            }
            Ok((ok, "n = 3, 8, 12".into()))
        }),
    ]
}

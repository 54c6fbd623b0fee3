//! Finds the natural-frequency perturbation of a second-order loop whose
//! first-entry-time distribution (template `F[0, tau](abs(e) < 0.05)`) is at
//! a given sup-distance from the nominal loop's.
//!
//! `cargo run --release --example calibrate_second_order -- [target] [samples]`

use conforma::engine::{critical_vector, TestConfig};
use conforma::stats::{delta_scalar, SampleSet};
use conforma::stl::{parse_formula, ParamDecl};
use conforma::systems::{path_seed, GreyBoxSystem, Input, SecondOrder};

const WN: f64 = 2.0;
const ZETA: f64 = 0.7;
const NOISE_SD: f64 = 1.0;
const INIT_SD: f64 = 0.5;
const HORIZON: f64 = 4.0;
const STEP: f64 = 0.01;

fn entry_times(wn: f64, side: u64, samples: usize) -> SampleSet<f64> {
    let sys = SecondOrder::new(wn, ZETA, NOISE_SD, 0.05)
        .and_then(|s| s.with_initial(0.0, INIT_SD))
        .expect("valid parameters");
    let pf = parse_formula(
        "F[0, tau](abs(e) < 0.05)",
        &["y", "e", "u"],
        &[ParamDecl::increasing("tau", 0.0, HORIZON)],
    )
    .expect("template parses");
    let cfg = TestConfig::new(0.1, 0.9);
    let input = Input::constant("u", 1.0);
    let values: Vec<f64> = (0..samples as u64)
        .map(|i| {
            let tr = sys
                .sample_path(&input, path_seed(2024, side, i), HORIZON, STEP)
                .expect("simulates");
            critical_vector(&tr, &pf, cfg.tol).expect("critical value")[0]
        })
        .collect();
    SampleSet::scalar(&values).expect("non-empty")
}

fn main() {
    let mut args = std::env::args().skip(1);
    let target: f64 = args.next().map_or(0.36, |s| s.parse().expect("target distance"));
    let samples: usize = args.next().map_or(100_000, |s| s.parse().expect("sample count"));
    let nominal = entry_times(WN, 0, samples);
    let mut sorted = nominal.coordinate(0);
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| sorted[((sorted.len() - 1) as f64 * p) as usize];
    println!(
        "nominal entry time quantiles 1/50/99%: {:.3} {:.3} {:.3}",
        q(0.01),
        q(0.5),
        q(0.99)
    );
    let gamma = |wn: f64| delta_scalar(&nominal, &entry_times(wn, 1, samples)).expect("statistic");
    println!("noise floor (same wn, other seeds): {:.4}", gamma(WN));
    let (mut lo, mut hi) = (WN, 2.0 * WN);
    for _ in 0..14 {
        let mid = 0.5 * (lo + hi);
        let g = gamma(mid);
        println!("wn = {mid:.6}  gamma = {g:.4}");
        if g < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let wn = 0.5 * (lo + hi);
    println!("calibrated wn = {wn:.4}, gamma = {:.4}", gamma(wn));
}

use conforma::engine::{run_conformance, run_equality_test, Assertion, FnSampler, TestConfig};
use conforma::stats::{confidence_level, delta_multi, delta_scalar, SampleSet};
use conforma::stl::{parse_formula, ParamDecl};
use conforma::systems::{path_seed, trace_replay_system, EventTime, GreyBoxSystem, HittingModel, Input};
use conforma::traces::{load_traces_csv, write_traces_csv};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform(seed: u64, side: u64, shift: f64, dim: usize) -> FnSampler<impl Fn(u64) -> Vec<f64> + Sync> {
    FnSampler::new(dim, move |i| {
        let mut r = ChaCha8Rng::seed_from_u64(path_seed(seed, side, i));
        (0..dim)
            .map(|k| r.random::<f64>() + if k == 0 { shift } else { 0.0 })
            .collect()
    })
}

fn draws(seed: u64, side: u64, shift: f64, dim: usize, count: usize) -> SampleSet<f64> {
    let mut set = SampleSet::new(dim).unwrap();
    for i in 0..count as u64 {
        let mut r = ChaCha8Rng::seed_from_u64(path_seed(seed, side, i));
        let p: Vec<f64> = (0..dim)
            .map(|k| r.random::<f64>() + if k == 0 { shift } else { 0.0 })
            .collect();
        set.push(&p).unwrap();
    }
    set
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// The report is consistent with a recomputation from the drawn samples,
    /// and a decision is only taken once the confidence target is reached.
    #[test]
    fn stopping_rule_is_sound(seed in any::<u64>(), shift in 0.0f64..0.6, c in 0.15f64..0.5, k1 in 1usize..4, k2 in 1usize..4) {
        let cfg = TestConfig { seed, k1, k2, max_samples: 4000, ..TestConfig::new(c, 0.9) };
        let r = run_equality_test(&uniform(seed, 0, shift, 1), &uniform(seed, 1, shift / 2.0, 1), &cfg).unwrap();
        prop_assert_eq!(r.n % k1, 0);
        prop_assert_eq!(r.m % k2, 0);
        prop_assert_eq!(r.n / k1, r.m / k2);
        let delta = delta_scalar(&draws(seed, 0, shift, 1, r.n), &draws(seed, 1, shift / 2.0, 1, r.m)).unwrap();
        prop_assert_eq!(r.delta, delta);
        prop_assert!((r.alpha - confidence_level(delta, c, r.n, r.m)).abs() < 1e-12);
        match r.assertion {
            Assertion::Inconclusive => prop_assert!(r.alpha < 0.9 && (r.n + k1 > 4000 || r.m + k2 > 4000)),
            a => {
                prop_assert!(r.alpha >= 0.9);
                prop_assert_eq!(a == Assertion::Conform, delta < c);
            }
        }
    }
}

#[test]
fn two_dimensional_test_matches_recomputation() {
    let cfg = TestConfig {
        seed: 8,
        ..TestConfig::new(0.3, 0.9)
    };
    let r = run_equality_test(&uniform(8, 0, 0.0, 2), &uniform(8, 1, 0.0, 2), &cfg).unwrap();
    assert_eq!(r.assertion, Assertion::Conform);
    let delta = delta_multi(&draws(8, 0, 0.0, 2, r.n), &draws(8, 1, 0.0, 2, r.m)).unwrap();
    assert_eq!(r.delta, delta);
    assert_eq!(r.dim, 2);
}

#[test]
fn thread_count_does_not_change_the_report() {
    let sys1 = HittingModel::new(EventTime::Uniform { a: 0.0, b: 1.0 }).unwrap();
    let sys2 = HittingModel::new(EventTime::Uniform { a: 0.3, b: 1.3 }).unwrap();
    let pf = parse_formula("F[0, tau](x < 0.5)", &["x"], &[ParamDecl::increasing("tau", 0.0, 2.0)]).unwrap();
    let cfg = TestConfig {
        seed: 17,
        k1: 4,
        k2: 4,
        horizon: 2.0,
        ..TestConfig::new(0.15, 0.95)
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_conformance(&sys1, &sys2, &Input::new(), &pf, &cfg).unwrap())
            .without_times()
    };
    let base = run(1);
    assert_eq!(base.assertion, Assertion::NonConform);
    for threads in [2, 3, 5] {
        assert_eq!(run(threads), base);
    }
}

#[test]
fn csv_corpus_replays_as_a_system() {
    let dir = tempfile::tempdir().unwrap();
    let model = HittingModel::new(EventTime::Uniform { a: 0.0, b: 1.0 }).unwrap();
    let traces: Vec<_> = (0..19)
        .map(|i| model.sample_path(&Input::new(), path_seed(3, 0, i), 2.0, 0.01).unwrap())
        .collect();
    write_traces_csv(&traces, dir.path().join("corpus.csv")).unwrap();
    let loaded = load_traces_csv::<f64>(dir.path()).unwrap();
    assert_eq!(loaded.len(), 19);
    for (a, b) in traces.iter().zip(&loaded) {
        assert_eq!(a.timestamps(), b.timestamps());
    }

    let replay = trace_replay_system(loaded, 11).unwrap();
    let pf = parse_formula("F[0, tau](x < 0.5)", &["x"], &[ParamDecl::increasing("tau", 0.0, 2.0)]).unwrap();
    let cfg = TestConfig {
        horizon: 2.0,
        ..TestConfig::new(0.05, 0.99)
    };
    let r = run_conformance(&replay, &model, &Input::new(), &pf, &cfg).unwrap();
    assert_eq!(r.assertion, Assertion::Inconclusive);
    assert_eq!(r.n, 19);
    assert!(r.reason.unwrap().contains("trace pool exhausted"));
}

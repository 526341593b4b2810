//! Seeded statistical checks of the samplers and simulators.

use std::collections::BTreeMap;

use mtasep::config::{Configuration, Counts, RingConfig};
use mtasep::exact::{stationary_weights, tv_distance};
use mtasep::multiline::{class_lines, MultiLineConfig};
use mtasep::simulate::{
    derive_seed, gillespie_multiline, gillespie_tasep, rng_from_seed, sample_stationary_ring_with,
    sample_uniform_multiline, Horizon, RunOptions, WindowSampler,
};
use mtasep::stats::{
    burke_test, chi_square_fit, factorization_test, renewal_emptiness_check, Contingency, Outcome,
};

fn ring(codes: &[u32], n: usize) -> RingConfig {
    RingConfig::from_codes(codes, n).unwrap()
}

fn within(x: f64, p: f64, n: f64, sigmas: f64) -> bool {
    (x - p).abs() <= sigmas * (p * (1.0 - p) / n).sqrt()
}

#[test]
fn ring_sampler_hits_the_three_site_table() {
    let counts = Counts::new(vec![1, 1]);
    let mut rng = rng_from_seed(31);
    let mut freq: BTreeMap<RingConfig, f64> = BTreeMap::new();
    let n = 9000;
    for _ in 0..n {
        *freq.entry(sample_stationary_ring_with(&mut rng, 3, &counts).unwrap()).or_insert(0.0) += 1.0;
    }
    let f = |c: &[u32]| freq.get(&ring(c, 2)).copied().unwrap_or(0.0) / n as f64;
    assert!(within(f(&[0, 2, 1]), 1.0 / 9.0, n as f64, 3.0), "{}", f(&[0, 2, 1]));
    assert!(within(f(&[0, 1, 2]), 2.0 / 9.0, n as f64, 3.0), "{}", f(&[0, 1, 2]));
}

#[test]
fn single_class_ring_sampler_is_uniform() {
    let counts = Counts::new(vec![2]);
    let mut rng = rng_from_seed(32);
    let mut freq: BTreeMap<RingConfig, u64> = BTreeMap::new();
    for _ in 0..10_000 {
        *freq.entry(sample_stationary_ring_with(&mut rng, 5, &counts).unwrap()).or_insert(0) += 1;
    }
    assert_eq!(freq.len(), 10);
    let observed: Vec<u64> = freq.values().copied().collect();
    let fit = chi_square_fit(&observed, &[0.1; 10]);
    assert!(fit.p_value > 0.001, "{fit:?}");
}

#[test]
fn two_site_occupation_is_even() {
    let u0 = ring(&[1, 0], 1);
    let mut opts = RunOptions::events(200_000, 33);
    opts.keep_events = false;
    let (_, occ) = gillespie_tasep(&u0, &opts).unwrap();
    for w in occ.normalized().values() {
        assert!((w - 0.5).abs() < 0.01);
    }
}

#[test]
fn multiline_run_pushes_forward_to_the_stationary_law() {
    let x0 = MultiLineConfig::new(vec![ring(&[1, 0, 0, 0], 1), ring(&[1, 1, 0, 0], 1)]).unwrap();
    let mut opts = RunOptions::events(400_000, 34);
    opts.keep_events = false;
    let (_, occ) = gillespie_multiline(&x0, &opts).unwrap();
    let bottom = occ.map(|x| class_lines(x).unwrap().into_bottom());
    let exact = stationary_weights(4, &Counts::new(vec![1, 1])).unwrap().normalized();
    let tv = tv_distance(&bottom.normalized(), &exact);
    assert!(tv < 0.02, "tv {tv}");
}

/// Two-time law of one line of the stationary multiline process against a
/// directly simulated single-type process started uniformly.
#[test]
fn each_line_moves_like_a_single_type_process() {
    let (n_sites, q, lag, reps) = (4, [1usize, 2], 0.4, 20_000u64);
    let mut table = Contingency::new();
    let key = |a: &RingConfig, b: &RingConfig| {
        a.codes().iter().chain(&b.codes()).fold(0u64, |acc, &c| acc * 2 + u64::from(c))
    };
    for r in 0..reps {
        let mut rng = rng_from_seed(derive_seed(35, r));
        let x0 = sample_uniform_multiline(&mut rng, n_sites, &q).unwrap();
        let opts = RunOptions {
            horizon: Horizon::Time(lag),
            seed: derive_seed(36, r),
            record_every: None,
            keep_events: false,
        };
        let (trace, _) = gillespie_multiline(&x0, &opts).unwrap();
        table.add(0, key(x0.line(2), trace.final_state.line(2)));
        let line0 = sample_uniform_multiline(&mut rng, n_sites, &q[1..]).unwrap().into_lines().remove(0);
        let (trace, _) = gillespie_tasep(&line0, &RunOptions { seed: derive_seed(37, r), ..opts }).unwrap();
        table.add(1, key(&line0, &trace.final_state));
    }
    let chi = table.chi_square();
    assert!(chi.df > 5);
    assert!(chi.p_value > 0.001, "{chi:?}");
}

#[test]
fn window_sampler_class_densities_and_bernoulli_levels() {
    let lambdas = [0.2, 0.3];
    let sampler = WindowSampler::new(&lambdas, -50, 50, 100).unwrap();
    let mut rng = rng_from_seed(38);
    let samples = 2000;
    let mut count = [0u64; 3];
    let mut le1_pairs = [0u64; 2];
    let mut le1_total = 0u64;
    for _ in 0..samples {
        let s = sampler.sample(&mut rng).unwrap();
        let v = s.config.sites();
        for w in v {
            match w.class_index() {
                Some(k) => count[k - 1] += 1,
                None => count[2] += 1,
            }
        }
        le1_total += v.iter().filter(|x| x.at_most(1)).count() as u64;
        for w in v.windows(2) {
            if w[0].at_most(1) {
                le1_pairs[usize::from(w[1].at_most(1))] += 1;
            }
        }
    }
    let sites = (samples * 101) as f64;
    assert!(within(count[0] as f64 / sites, 0.2, sites, 4.0));
    let le2 = (count[0] + count[1]) as f64 / sites;
    assert!(within(le2, 0.5, sites, 4.0), "{le2}");
    assert!(within(le1_total as f64 / sites, 0.2, sites, 4.0));
    let next = le1_pairs[1] as f64 / (le1_pairs[0] + le1_pairs[1]) as f64;
    assert!(within(next, 0.2, (le1_pairs[0] + le1_pairs[1]) as f64, 4.0), "{next}");
    let holes = count[2] as f64 / sites;
    assert!(within(holes, 0.5, sites, 4.0));
    let class2 = count[1] as f64 / sites;
    assert!((class2 - 0.3).abs() < 0.01);
}

#[test]
fn second_class_particle_is_a_renewal_state() {
    let r = renewal_emptiness_check(&[0.3, 0.2], 100_000, 40, &[2]).unwrap();
    assert_eq!(r.outcome, Outcome::Pass);
    let f = factorization_test(&[0.3, 0.2], &[2], 2, 2, 20_000, 41).unwrap();
    assert_eq!(f.outcome, Outcome::Pass, "{f:?}");
}

#[test]
fn non_renewal_control_carries_no_verdict() {
    let f = factorization_test(&[0.2, 0.2, 0.2], &[1, 2], 1, 1, 2_000, 42).unwrap();
    assert_eq!(f.outcome, Outcome::Inconclusive);
    assert!(!f.pass);
    assert!(f.notes.contains("control"));
}

#[test]
fn heavy_traffic_departures_are_still_bernoulli() {
    let r = burke_test(0.4, 0.45, 1_000_000, 43).unwrap();
    assert_eq!(r.outcome, Outcome::Pass, "{r:?}");
    assert!(r.notes.contains("burn-in"));
}

#[test]
fn rare_renewal_string_is_inconclusive_not_passed() {
    let r = renewal_emptiness_check(&[0.01, 0.01, 0.01, 0.01], 1000, 44, &[4, 1, 2, 3, 1, 2]).unwrap();
    assert_eq!(r.outcome, Outcome::Inconclusive);
    assert!(!r.pass);
}

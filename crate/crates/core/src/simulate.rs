//! Continuous-time simulation and stationary samplers.
//!
//! All randomness comes from [`SimRng`] (ChaCha8 from `rand_chacha` 0.3),
//! seeded with `seed_from_u64`. Variates are drawn through explicitly
//! 64-bit paths so a seed reproduces the same stream on every platform.
//!
//! Gillespie runs realize one rate-1 bell per site: the waiting time to the
//! next bell is exponential with rate `N` and the ringing site is uniform.
//! Occupation measures are time weighted.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ClassValue, Configuration, Counts, RingConfig, WindowConfig};
use crate::error::{Error, Result};
use crate::multiline::{class_lines, forward_jump, run_tandem, MultiLineConfig, TandemRun};
use crate::queueing::QueueState;

/// The simulation RNG.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent child seed `index` of a master seed (SplitMix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform integer in `0..n`.
pub fn uniform_below(rng: &mut SimRng, n: u64) -> u64 {
    rng.gen_range(0..n)
}

/// Uniform real in `[0, 1)` with 53 random bits.
pub fn uniform_unit(rng: &mut SimRng) -> f64 {
    (rng.gen::<u64>() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn bernoulli(rng: &mut SimRng, p: f64) -> bool {
    uniform_unit(rng) < p
}

/// Exponential variate with the given rate.
pub fn exponential(rng: &mut SimRng, rate: f64) -> f64 {
    -(1.0 - uniform_unit(rng)).ln() / rate
}

/// Geometric variate on `{0, 1, ...}` with `P(k) = (1 - r) r^k`.
pub fn geometric(rng: &mut SimRng, ratio: f64) -> usize {
    if ratio <= 0.0 {
        return 0;
    }
    let u = 1.0 - uniform_unit(rng);
    (u.ln() / ratio.ln()).floor() as usize
}

/// Uniform `k`-subset of `0..n`, sorted (Floyd's algorithm).
pub fn uniform_subset(rng: &mut SimRng, n: usize, k: usize) -> Vec<usize> {
    let mut chosen = std::collections::BTreeSet::new();
    for j in n - k..n {
        let t = uniform_below(rng, j as u64 + 1) as usize;
        if !chosen.insert(t) {
            chosen.insert(j);
        }
    }
    chosen.into_iter().collect()
}

/// Stopping rule for a simulation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Horizon {
    Events(u64),
    Time(f64),
}

/// One bell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEvent {
    pub t: f64,
    pub site: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot<S> {
    pub t: f64,
    pub state: S,
}

/// Reproducible record of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace<S> {
    pub seed: u64,
    pub events: Vec<TraceEvent>,
    pub snapshots: Vec<Snapshot<S>>,
    pub final_state: S,
}

/// Time-weighted occupation measure.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalDistribution<S: Ord> {
    pub weights: BTreeMap<S, f64>,
    pub total_time: f64,
}

impl<S: Ord + Clone> EmpiricalDistribution<S> {
    pub fn new() -> Self {
        EmpiricalDistribution {
            weights: BTreeMap::new(),
            total_time: 0.0,
        }
    }

    pub fn add(&mut self, state: &S, time: f64) {
        if let Some(w) = self.weights.get_mut(state) {
            *w += time;
        } else {
            self.weights.insert(state.clone(), time);
        }
        self.total_time += time;
    }

    pub fn normalized(&self) -> BTreeMap<S, f64> {
        self.weights
            .iter()
            .map(|(s, &w)| (s.clone(), w / self.total_time))
            .collect()
    }

    /// Sum of two occupation measures (order independent).
    pub fn merge(mut self, other: &Self) -> Self {
        for (s, &w) in &other.weights {
            *self.weights.entry(s.clone()).or_insert(0.0) += w;
        }
        self.total_time += other.total_time;
        self
    }

    /// Image under `f`, summing weights of states with the same image.
    pub fn map<T: Ord + Clone>(&self, mut f: impl FnMut(&S) -> T) -> EmpiricalDistribution<T> {
        let mut out = EmpiricalDistribution::new();
        for (s, &w) in &self.weights {
            out.add(&f(s), w);
        }
        out
    }
}

impl<S: Ord + Clone> Default for EmpiricalDistribution<S> {
    fn default() -> Self {
        Self::new()
    }
}

/// Simulation settings shared by the Gillespie drivers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub horizon: Horizon,
    pub seed: u64,
    /// Snapshot the state after every `k` events.
    pub record_every: Option<u64>,
    /// Keep the per-event log in the trace.
    pub keep_events: bool,
}

impl RunOptions {
    pub fn events(n: u64, seed: u64) -> Self {
        RunOptions {
            horizon: Horizon::Events(n),
            seed,
            record_every: None,
            keep_events: true,
        }
    }
}

fn run_gillespie<S: Clone + Ord>(
    initial: S,
    n_sites: usize,
    opts: &RunOptions,
    mut apply: impl FnMut(&mut S, usize) -> Result<()>,
) -> Result<(Trace<S>, EmpiricalDistribution<S>)> {
    if n_sites == 0 {
        return Err(Error::Parameter("no sites to simulate".into()));
    }
    let mut rng = rng_from_seed(opts.seed);
    let rate = n_sites as f64;
    let mut state = initial;
    let mut t = 0.0;
    let mut occupation = EmpiricalDistribution::new();
    let mut events = Vec::new();
    let mut snapshots = Vec::new();
    let mut count: u64 = 0;
    loop {
        if let Horizon::Events(n) = opts.horizon {
            if count >= n {
                break;
            }
        }
        let dt = exponential(&mut rng, rate);
        if let Horizon::Time(end) = opts.horizon {
            if t + dt >= end {
                occupation.add(&state, end - t);
                break;
            }
        }
        occupation.add(&state, dt);
        t += dt;
        let site = uniform_below(&mut rng, n_sites as u64) as usize;
        apply(&mut state, site)?;
        count += 1;
        if opts.keep_events {
            events.push(TraceEvent { t, site });
        }
        if let Some(k) = opts.record_every {
            if k > 0 && count % k == 0 {
                snapshots.push(Snapshot {
                    t,
                    state: state.clone(),
                });
            }
        }
    }
    Ok((
        Trace {
            seed: opts.seed,
            events,
            snapshots,
            final_state: state,
        },
        occupation,
    ))
}

/// Gillespie simulation of the `n`-type process on a ring.
pub fn gillespie_tasep(
    u0: &RingConfig,
    opts: &RunOptions,
) -> Result<(Trace<RingConfig>, EmpiricalDistribution<RingConfig>)> {
    run_gillespie(u0.clone(), u0.len(), opts, |u, site| {
        u.swap_adjacent_in_place(site as i64).map(|_| ())
    })
}

type RingLines = MultiLineConfig<RingConfig>;

/// Gillespie simulation of the multiline process: bells on the bottom line
/// only, each applying the forward jump.
pub fn gillespie_multiline(
    x0: &MultiLineConfig<RingConfig>,
    opts: &RunOptions,
) -> Result<(Trace<RingLines>, EmpiricalDistribution<RingLines>)> {
    let n_sites = x0.lines()[0].len();
    run_gillespie(x0.clone(), n_sites, opts, |x, site| {
        *x = forward_jump(x, site as i64)?;
        Ok(())
    })
}

/// Uniform multiline state with `q[m-1]` particles on line `m`.
pub fn sample_uniform_multiline(
    rng: &mut SimRng,
    n_sites: usize,
    q: &[usize],
) -> Result<MultiLineConfig<RingConfig>> {
    let lines = q
        .iter()
        .map(|&qm| {
            if qm > n_sites {
                return Err(Error::Infeasible(format!("{qm} particles on {n_sites} sites")));
            }
            RingConfig::binary(n_sites, uniform_subset(rng, n_sites, qm))
        })
        .collect::<Result<Vec<_>>>()?;
    MultiLineConfig::new(lines)
}

/// Exact stationary sample on the ring: uniform multiline state, then the
/// bottom line of its class assignment.
pub fn sample_stationary_ring_with(
    rng: &mut SimRng,
    n_sites: usize,
    counts: &Counts,
) -> Result<RingConfig> {
    if n_sites == 0 || counts.n_classes() == 0 {
        return Err(Error::Parameter("need at least one site and one class".into()));
    }
    counts.check_fits(n_sites)?;
    let x = sample_uniform_multiline(rng, n_sites, &counts.prefix_sums())?;
    Ok(class_lines(&x)?.into_bottom())
}

pub fn sample_stationary_ring(n_sites: usize, counts: &Counts, seed: u64) -> Result<RingConfig> {
    sample_stationary_ring_with(&mut rng_from_seed(seed), n_sites, counts)
}

/// Heuristic burn-in `ceil(50 / (1 - sum lambda))`.
pub fn default_burn_in(lambdas: &[f64]) -> usize {
    let slack = 1.0 - lambdas.iter().sum::<f64>();
    (50.0 / slack).ceil() as usize
}

pub fn check_rates(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::Parameter("at least one class density is required".into()));
    }
    if lambdas.len() > ClassValue::MAX_CLASS - 1 {
        return Err(Error::Parameter(format!("{} classes is too many", lambdas.len())));
    }
    if lambdas.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
        return Err(Error::Parameter(format!(
            "densities {lambdas:?} must lie in (0, 1)"
        )));
    }
    if lambdas.iter().sum::<f64>() >= 1.0 {
        return Err(Error::Parameter(format!(
            "densities {lambdas:?} must sum to less than 1"
        )));
    }
    Ok(())
}

/// Window sample with every intermediate line and queue state.
#[derive(Clone, Debug)]
pub struct WindowSample {
    /// The `n`-type configuration on the requested window.
    pub config: WindowConfig,
    /// Binary lines on the extended window (burn-in included).
    pub lines: MultiLineConfig<WindowConfig>,
    /// Tandem queues run over the extended window.
    pub tandem: TandemRun,
}

impl WindowSample {
    /// State of queue `m` just after site `j` (a label in the extended window).
    pub fn queue_after(&self, m: usize, j: i64) -> &QueueState {
        let lo = self.lines.lines()[0].lo();
        &self.tandem.queue_states[m - 1][(j - lo) as usize]
    }
}

/// Stationary sampler for windows of `Z` with class densities `lambdas`.
///
/// Line `m` is Bernoulli with rate `lambda_1 + ... + lambda_m` on
/// `[lo - burn_in, hi]`; the tandem queues start empty at the left end.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSampler {
    lambdas: Vec<f64>,
    line_rates: Vec<f64>,
    lo: i64,
    hi: i64,
    burn_in: usize,
}

impl WindowSampler {
    pub fn new(lambdas: &[f64], lo: i64, hi: i64, burn_in: usize) -> Result<Self> {
        check_rates(lambdas)?;
        if hi < lo {
            return Err(Error::Parameter(format!("empty window [{lo}, {hi}]")));
        }
        let line_rates = lambdas
            .iter()
            .scan(0.0, |acc, &l| {
                *acc += l;
                Some(*acc)
            })
            .collect();
        Ok(WindowSampler {
            lambdas: lambdas.to_vec(),
            line_rates,
            lo,
            hi,
            burn_in,
        })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn n_classes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn sample(&self, rng: &mut SimRng) -> Result<WindowSample> {
        let start = self.lo - self.burn_in as i64;
        let len = (self.hi - start + 1) as usize;
        let lines = self
            .line_rates
            .iter()
            .map(|&rate| {
                let sites = (0..len)
                    .map(|_| {
                        if bernoulli(rng, rate) {
                            ClassValue::FIRST
                        } else {
                            ClassValue::HOLE
                        }
                    })
                    .collect();
                WindowConfig::new(start, sites, 1)
            })
            .collect::<Result<Vec<_>>>()?;
        let lines = MultiLineConfig::new(lines)?;
        let inits: Vec<QueueState> = (1..self.n_classes()).map(QueueState::empty).collect();
        let tandem = run_tandem(&lines, &inits)?;
        let config = tandem.classes.bottom().restrict(self.lo, self.hi)?;
        Ok(WindowSample {
            config,
            lines,
            tandem,
        })
    }
}

/// Site-by-site form of the window sampler that keeps only the current
/// queue states. Useful for very long windows.
#[derive(Clone, Debug)]
pub struct TandemStream {
    line_rates: Vec<f64>,
    queues: Vec<QueueState>,
    rng: SimRng,
    site: i64,
}

impl TandemStream {
    /// Stream starting at site `start` with empty queues.
    pub fn new(lambdas: &[f64], start: i64, rng: SimRng) -> Result<Self> {
        check_rates(lambdas)?;
        let line_rates = lambdas
            .iter()
            .scan(0.0, |acc, &l| {
                *acc += l;
                Some(*acc)
            })
            .collect();
        Ok(TandemStream {
            line_rates,
            queues: (1..lambdas.len()).map(QueueState::empty).collect(),
            rng,
            site: start,
        })
    }

    /// Label of the next site to be produced.
    pub fn site(&self) -> i64 {
        self.site
    }

    /// `queues()[m - 1]` is queue `m` just after the last produced site.
    pub fn queues(&self) -> &[QueueState] {
        &self.queues
    }

    pub fn queues_empty(&self) -> bool {
        self.queues.iter().all(QueueState::is_empty)
    }

    /// Value of the bottom class line at the next site.
    pub fn next_value(&mut self) -> ClassValue {
        let mut v = if bernoulli(&mut self.rng, self.line_rates[0]) {
            ClassValue::FIRST
        } else {
            ClassValue::HOLE
        };
        for m in 1..self.line_rates.len() {
            let service = bernoulli(&mut self.rng, self.line_rates[m]);
            v = self.queues[m - 1]
                .advance(v, service)
                .expect("arrival classes never exceed the queue level");
        }
        self.site += 1;
        v
    }

    /// Advance `k` sites, discarding the output.
    pub fn skip(&mut self, k: usize) {
        for _ in 0..k {
            self.next_value();
        }
    }
}

/// Stationary sample on `[-k, k]` with class densities `lambdas`.
pub fn sample_stationary_window(
    half_width: usize,
    lambdas: &[f64],
    burn_in: usize,
    seed: u64,
) -> Result<WindowConfig> {
    let k = half_width as i64;
    let sampler = WindowSampler::new(lambdas, -k, k, burn_in)?;
    Ok(sampler.sample(&mut rng_from_seed(seed))?.config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_trace() {
        let u0 = RingConfig::from_codes(&[1, 2, 0, 2, 0], 2).unwrap();
        let opts = RunOptions::events(500, 11);
        let a = gillespie_tasep(&u0, &opts).unwrap();
        let b = gillespie_tasep(&u0, &opts).unwrap();
        assert_eq!(a, b);
        let c = gillespie_tasep(&u0, &RunOptions::events(500, 12)).unwrap();
        assert_ne!(a.0.events, c.0.events);
    }

    #[test]
    fn event_times_increase_and_counts_conserved() {
        let u0 = RingConfig::from_codes(&[1, 2, 0, 2, 0, 3], 3).unwrap();
        let mut opts = RunOptions::events(2000, 3);
        opts.record_every = Some(10);
        let (trace, occ) = gillespie_tasep(&u0, &opts).unwrap();
        assert_eq!(trace.events.len(), 2000);
        assert_eq!(trace.snapshots.len(), 200);
        assert!(trace.events.windows(2).all(|w| w[0].t < w[1].t));
        for s in occ.weights.keys() {
            assert_eq!(s.class_counts(), u0.class_counts());
        }
        let t_last = trace.events.last().unwrap().t;
        assert!((occ.total_time - t_last).abs() < 1e-9);
    }

    #[test]
    fn time_horizon_stops_at_time() {
        let u0 = RingConfig::from_codes(&[1, 0, 0], 1).unwrap();
        let opts = RunOptions {
            horizon: Horizon::Time(25.0),
            seed: 5,
            record_every: None,
            keep_events: true,
        };
        let (trace, occ) = gillespie_tasep(&u0, &opts).unwrap();
        assert!((occ.total_time - 25.0).abs() < 1e-9);
        assert!(trace.events.iter().all(|e| e.t < 25.0));
    }

    #[test]
    fn multiline_conserves_line_counts() {
        let mut rng = rng_from_seed(1);
        let x0 = sample_uniform_multiline(&mut rng, 6, &[2, 3, 5]).unwrap();
        let (trace, occ) = gillespie_multiline(&x0, &RunOptions::events(3000, 8)).unwrap();
        assert_eq!(trace.final_state.line_counts(), vec![2, 3, 5]);
        assert!(occ.weights.keys().all(|x| x.line_counts() == vec![2, 3, 5]));
    }

    #[test]
    fn subset_and_variates() {
        let mut rng = rng_from_seed(9);
        for k in 0..=6 {
            let s = uniform_subset(&mut rng, 6, k);
            assert_eq!(s.len(), k);
            assert!(s.windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(geometric(&mut rng, 0.0), 0);
        assert!(exponential(&mut rng, 2.0) >= 0.0);
    }

    #[test]
    fn ring_sample_has_requested_counts() {
        let counts = Counts::new(vec![1, 2, 1]);
        let mut rng = rng_from_seed(2);
        for _ in 0..50 {
            let u = sample_stationary_ring_with(&mut rng, 7, &counts).unwrap();
            assert_eq!(u.class_counts(), counts);
        }
        assert!(sample_stationary_ring(3, &Counts::new(vec![4, 1]), 0).is_err());
    }

    #[test]
    fn single_class_window_is_the_bernoulli_line() {
        let sampler = WindowSampler::new(&[0.5], -10, 10, 30).unwrap();
        let sample = sampler.sample(&mut rng_from_seed(4)).unwrap();
        let line = sample.lines.line(1).restrict(-10, 10).unwrap();
        assert_eq!(sample.config.codes(), line.codes());
        assert_eq!(sample.config.len(), 21);
    }

    #[test]
    fn window_rate_validation() {
        assert!(WindowSampler::new(&[0.5, 0.6], 0, 3, 0).is_err());
        assert!(WindowSampler::new(&[0.0, 0.2], 0, 3, 0).is_err());
        assert!(WindowSampler::new(&[], 0, 3, 0).is_err());
        assert_eq!(default_burn_in(&[0.2, 0.3]), 100);
    }

    #[test]
    fn stream_matches_window_sampler_in_law_of_first_line() {
        let mut stream = TandemStream::new(&[0.3], 0, rng_from_seed(3)).unwrap();
        let ones = (0..20000).filter(|_| stream.next_value().is_particle()).count();
        assert!((ones as f64 / 20000.0 - 0.3).abs() < 0.015);
        assert_eq!(stream.site(), 20000);
    }

    #[test]
    fn stream_conserves_queue_nesting() {
        let mut stream = TandemStream::new(&[0.2, 0.2, 0.2], 0, rng_from_seed(5)).unwrap();
        for _ in 0..1000 {
            let v = stream.next_value();
            assert!(v.is_hole() || v.class_index().unwrap() <= 3);
            let q = &stream.queues()[1];
            assert!(q.at_most(1) <= q.at_most(2));
        }
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::BTreeSet<u64> = (0..100).map(|i| derive_seed(7, i)).collect();
        assert_eq!(seeds.len(), 100);
    }
}

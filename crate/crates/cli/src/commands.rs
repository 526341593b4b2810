use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use mtasep::codec::{
    distribution_to_csv, distribution_to_json, multiline_to_json, parse_class_list,
    parse_int_list, parse_multiline_json, parse_rate_list, parse_ring_json, report_to_json,
    ring_to_json, trace_to_jsonl, window_to_json,
};
use mtasep::config::{ClassValue, Configuration, Counts, RingConfig};
use mtasep::exact::{
    is_minimal_state, stationary_weights_capped, verify_balance_capped, verify_minimal_weights,
    DEFAULT_ENUMERATION_CAP,
};
use mtasep::multiline::{
    commutation_check, enumerate_ring_states, forward_map, reverse_map, MultiLineConfig,
};
use mtasep::queueing::{f_ring, f_ring_by_recurrence, immediate_arrivals, service_process};
use mtasep::simulate::{
    bernoulli, default_burn_in, gillespie_multiline, gillespie_tasep, rng_from_seed,
    sample_stationary_ring_with, uniform_below, Horizon, RunOptions, SimRng, WindowSampler,
};
use mtasep::stats::{
    burke_test, coupling_experiment, factorization_test, hole_independence_test,
    queue_length_fit, renewal_emptiness_check, Outcome, TestReport,
};
use mtasep::Error;

/// An error that ends the program with a specific exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub const VERIFY: u8 = 2;
    pub const INCONCLUSIVE: u8 = 3;
    pub const USAGE: u8 = 64;
    pub const INFEASIBLE: u8 = 65;
    const IO: u8 = 74;

    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: Self::USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Infeasible(_) | Error::Resource { .. } | Error::Overflow(_) => Failure::INFEASIBLE,
            _ => Failure::USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<u8, Failure>;

#[derive(Parser, Debug)]
#[command(name = "mtasep", version, about = "Multi-type TASEP: exact stationary weights, sampling, simulation and verification")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact stationary weights on a ring.
    Exact(ExactArgs),
    /// Draw stationary samples.
    #[command(subcommand)]
    Sample(SampleCmd),
    /// Simulate the ring dynamics and write a trace as JSON lines.
    #[command(subcommand)]
    Simulate(SimulateCmd),
    /// Run an invariant suite.
    Verify(VerifyArgs),
    /// Run a statistical test and print its report as JSON.
    #[command(subcommand)]
    Stats(StatsCmd),
}

#[derive(Args, Debug)]
struct Output {
    /// Write to this file instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl Output {
    fn write(&self, text: &str) -> Result<(), Failure> {
        let res = match &self.output {
            Some(path) => fs::write(path, text),
            None => std::io::stdout().lock().write_all(text.as_bytes()),
        };
        res.map_err(|e| Failure {
            code: Failure::IO,
            message: e.to_string(),
        })
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct ExactArgs {
    /// Number of ring sites N.
    #[arg(long)]
    sites: usize,
    /// Number of particle classes n.
    #[arg(long)]
    classes: usize,
    /// Particles per class, comma separated (p1,...,pn).
    #[arg(long)]
    counts: String,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Verify global balance exactly and report the verdict.
    #[arg(long)]
    check_balance: bool,
    /// List the states of weight 1 and check them against the local rule.
    #[arg(long)]
    list_minimal: bool,
    /// Largest number of multiline states to enumerate.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: u128,
    #[command(flatten)]
    out: Output,
}

#[derive(Subcommand, Debug)]
enum SampleCmd {
    /// Exact stationary samples on a ring, one JSON configuration per line.
    Ring {
        #[arg(long)]
        sites: usize,
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        counts: String,
        #[arg(long, default_value_t = 1)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Approximate stationary samples on the window [-K, K] of the line.
    Line {
        /// Class densities, comma separated, summing to less than 1.
        #[arg(long)]
        rates: String,
        /// Half-width K of the window.
        #[arg(long)]
        window: usize,
        /// Sites simulated left of the window (default ceil(50 / (1 - sum of rates))).
        #[arg(long)]
        burnin: Option<usize>,
        #[arg(long, default_value_t = 1)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Args, Debug)]
struct HorizonArgs {
    /// Stop after this many bells.
    #[arg(long, conflicts_with = "time")]
    events: Option<u64>,
    /// Stop at this time.
    #[arg(long)]
    time: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Record a snapshot every K bells.
    #[arg(long)]
    record_every: Option<u64>,
    /// Write the time-weighted occupation measure as JSON to this file.
    #[arg(long)]
    occupation: Option<PathBuf>,
}

impl HorizonArgs {
    fn options(&self) -> Result<RunOptions, Failure> {
        let horizon = match (self.events, self.time) {
            (Some(n), None) => Horizon::Events(n),
            (None, Some(t)) if t.is_finite() && t >= 0.0 => Horizon::Time(t),
            (None, Some(t)) => return Err(Failure::usage(format!("invalid time {t}"))),
            _ => return Err(Failure::usage("give exactly one of --events and --time")),
        };
        Ok(RunOptions {
            horizon,
            seed: self.seed,
            record_every: self.record_every,
            keep_events: true,
        })
    }
}

#[derive(Subcommand, Debug)]
enum SimulateCmd {
    /// The n-type process. Starts from --initial, or from classes in
    /// increasing order followed by holes.
    Tasep {
        /// Initial configuration as JSON.
        #[arg(long, conflicts_with_all = ["sites", "classes", "counts"])]
        initial: Option<String>,
        #[arg(long)]
        sites: Option<usize>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        counts: Option<String>,
        #[command(flatten)]
        horizon: HorizonArgs,
        #[command(flatten)]
        out: Output,
    },
    /// The multiline process. Starts from --initial, or with the particles of
    /// each line packed from site 0.
    Multiline {
        /// Initial multiline state as JSON.
        #[arg(long, conflicts_with_all = ["sites", "lines"])]
        initial: Option<String>,
        #[arg(long)]
        sites: Option<usize>,
        /// Particles per line, comma separated.
        #[arg(long)]
        lines: Option<String>,
        #[command(flatten)]
        horizon: HorizonArgs,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Suite {
    Bijection,
    Balance,
    Minimal,
    Commutation,
    Queues,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(value_enum)]
    suite: Suite,
    #[arg(long)]
    sites: usize,
    /// Number of lines (or classes for balance and minimal, queue levels for queues).
    #[arg(long)]
    lines: usize,
    /// Counts for balance and minimal; all count vectors when omitted.
    #[arg(long)]
    counts: Option<String>,
    /// Check every case.
    #[arg(long, conflicts_with = "trials")]
    exhaustive: bool,
    /// Check this many random cases.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Subcommand, Debug)]
enum StatsCmd {
    /// Departures of a single-class queue against a Bernoulli process.
    Burke {
        #[arg(long)]
        arrival: f64,
        #[arg(long)]
        service: f64,
        #[arg(long, default_value_t = 1_000_000)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Queue-length ratios against the geometric law.
    Qlen {
        /// Two rates: arrival density and second-class density.
        #[arg(long)]
        rates: String,
        #[arg(long, default_value_t = 1_000_000)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Coupling with the configuration seen from a second-class particle.
    Coupling {
        #[arg(long)]
        rates: String,
        #[arg(long, default_value_t = 1000)]
        window: usize,
        #[arg(long, default_value_t = 10_000)]
        paths: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Queue emptiness after each occurrence of a renewal string.
    Renewal {
        #[arg(long)]
        rates: String,
        /// The string, comma separated.
        #[arg(long)]
        string: String,
        #[arg(long, default_value_t = 100_000)]
        window: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Left-right independence conditional on a class string.
    Factorization {
        #[arg(long)]
        rates: String,
        #[arg(long)]
        string: String,
        #[arg(long, default_value_t = 2)]
        left: usize,
        #[arg(long, default_value_t = 2)]
        right: usize,
        #[arg(long, default_value_t = 20_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Holes to the right (first-class particles to the left) against the
    /// configuration on the other side.
    Independence {
        #[arg(long)]
        rates: String,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 5)]
        span: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
}

pub fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Exact(args) => cmd_exact(args),
        Command::Sample(cmd) => cmd_sample(cmd),
        Command::Simulate(cmd) => cmd_simulate(cmd),
        Command::Verify(args) => cmd_verify(args),
        Command::Stats(cmd) => cmd_stats(cmd),
    }
}

fn counts_arg(classes: usize, counts: &str) -> Result<Counts, Failure> {
    let p = parse_int_list(counts)?;
    if p.len() != classes {
        return Err(Failure::usage(format!(
            "{} counts given for {classes} classes",
            p.len()
        )));
    }
    Ok(Counts::new(p))
}

fn cmd_exact(args: ExactArgs) -> CmdResult {
    let counts = counts_arg(args.classes, &args.counts)?;
    let dist = stationary_weights_capped(args.sites, &counts, args.cap)?;
    let mut ok = true;
    let balance = if args.check_balance {
        let r = verify_balance_capped(&dist, args.cap)?;
        ok &= r.balanced;
        Some(r.balanced)
    } else {
        None
    };
    let minimal = if args.list_minimal {
        let r = verify_minimal_weights(&dist)?;
        ok &= r.holds;
        Some(r)
    } else {
        None
    };
    match args.format {
        Format::Json => {
            let mut doc = distribution_to_json(&dist);
            if let Some(b) = balance {
                doc["balance"] = json!(b);
            }
            if let Some(r) = &minimal {
                doc["minimal"] = json!(r.minimal_states.iter().map(|u| u.codes()).collect::<Vec<_>>());
                doc["minimal_rule_holds"] = json!(r.holds);
            }
            args.out.write(&format!("{doc}\n"))?;
        }
        Format::Csv => {
            args.out.write(&distribution_to_csv(&dist))?;
            if let Some(b) = balance {
                eprintln!("balance: {b}");
            }
            if let Some(r) = &minimal {
                eprintln!("minimal states: {}", r.minimal_states.len());
                for u in &r.minimal_states {
                    eprintln!("{:?}", u.codes());
                }
            }
        }
    }
    Ok(if ok { 0 } else { Failure::VERIFY })
}

fn cmd_sample(cmd: SampleCmd) -> CmdResult {
    match cmd {
        SampleCmd::Ring {
            sites,
            classes,
            counts,
            samples,
            seed,
            out,
        } => {
            let counts = counts_arg(classes, &counts)?;
            let mut rng = rng_from_seed(seed);
            let mut text = String::new();
            for _ in 0..samples {
                let u = sample_stationary_ring_with(&mut rng, sites, &counts)?;
                text.push_str(&ring_to_json(&u).to_string());
                text.push('\n');
            }
            out.write(&text)?;
        }
        SampleCmd::Line {
            rates,
            window,
            burnin,
            samples,
            seed,
            out,
        } => {
            let lambdas = parse_rate_list(&rates)?;
            let k = i64::try_from(window).map_err(|_| Failure::usage("window too large"))?;
            let burn_in = burnin.unwrap_or_else(|| default_burn_in(&lambdas));
            let sampler = WindowSampler::new(&lambdas, -k, k, burn_in)?;
            let mut rng = rng_from_seed(seed);
            let mut text = String::new();
            for _ in 0..samples {
                text.push_str(&window_to_json(&sampler.sample(&mut rng)?.config).to_string());
                text.push('\n');
            }
            out.write(&text)?;
        }
    }
    Ok(0)
}

fn packed_ring(sites: usize, counts: &Counts) -> Result<RingConfig, Failure> {
    counts.check_fits(sites)?;
    let mut values = Vec::with_capacity(sites);
    for (k, &p) in counts.per_class().iter().enumerate() {
        values.extend(std::iter::repeat(ClassValue::class(k + 1)).take(p));
    }
    values.resize(sites, ClassValue::HOLE);
    Ok(RingConfig::new(values, counts.n_classes())?)
}

fn write_occupation<S: Ord + Clone>(
    path: &Option<PathBuf>,
    occ: &mtasep::simulate::EmpiricalDistribution<S>,
    encode: impl Fn(&S) -> Value,
) -> Result<(), Failure> {
    if let Some(path) = path {
        let states: Vec<Value> = occ
            .normalized()
            .iter()
            .map(|(s, w)| json!({"state": encode(s), "weight": w}))
            .collect();
        let doc = json!({"total_time": occ.total_time, "states": states});
        Output {
            output: Some(path.clone()),
        }
        .write(&format!("{doc}\n"))?;
    }
    Ok(())
}

fn cmd_simulate(cmd: SimulateCmd) -> CmdResult {
    match cmd {
        SimulateCmd::Tasep {
            initial,
            sites,
            classes,
            counts,
            horizon,
            out,
        } => {
            let u0 = match (initial, sites, classes, counts) {
                (Some(text), _, _, _) => parse_ring_json(&text)?,
                (None, Some(n), Some(c), Some(p)) => packed_ring(n, &counts_arg(c, &p)?)?,
                _ => return Err(Failure::usage("give --initial or all of --sites, --classes, --counts")),
            };
            let (trace, occ) = gillespie_tasep(&u0, &horizon.options()?)?;
            write_occupation(&horizon.occupation, &occ, ring_to_json)?;
            out.write(&trace_to_jsonl(&trace, ring_to_json))?;
        }
        SimulateCmd::Multiline {
            initial,
            sites,
            lines,
            horizon,
            out,
        } => {
            let x0 = match (initial, sites, lines) {
                (Some(text), _, _) => parse_multiline_json(&text)?,
                (None, Some(n), Some(q)) => {
                    let q = parse_int_list(&q)?;
                    let lines = q
                        .iter()
                        .map(|&k| {
                            if k > n {
                                Err(Error::Infeasible(format!("{k} particles on {n} sites")))
                            } else {
                                RingConfig::binary(n, 0..k)
                            }
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    MultiLineConfig::new(lines)?
                }
                _ => return Err(Failure::usage("give --initial or both --sites and --lines")),
            };
            let (trace, occ) = gillespie_multiline(&x0, &horizon.options()?)?;
            write_occupation(&horizon.occupation, &occ, multiline_to_json)?;
            out.write(&trace_to_jsonl(&trace, multiline_to_json))?;
        }
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// verify

struct Tally {
    cases: u64,
    failures: u64,
    first_failure: Option<Value>,
}

impl Tally {
    fn new() -> Self {
        Tally {
            cases: 0,
            failures: 0,
            first_failure: None,
        }
    }

    fn record(&mut self, ok: bool, case: impl FnOnce() -> Value) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(case());
            }
        }
    }
}

enum Mode {
    Exhaustive,
    Trials(u64, Box<SimRng>),
}

fn random_ring(rng: &mut SimRng, n: usize, m: usize) -> Result<RingConfig, Error> {
    let codes: Vec<u32> = (0..n).map(|_| uniform_below(rng, m as u64 + 1) as u32).collect();
    RingConfig::from_codes(&codes, m)
}

fn random_multiline(rng: &mut SimRng, n: usize, lines: usize) -> Result<MultiLineConfig<RingConfig>, Error> {
    let ls = (0..lines)
        .map(|_| RingConfig::binary(n, (0..n).filter(|_| bernoulli(rng, 0.5))))
        .collect::<Result<Vec<_>, _>>()?;
    MultiLineConfig::new(ls)
}

fn all_rings(n: usize, m: usize) -> Result<Vec<RingConfig>, Failure> {
    let base = (m + 1) as u128;
    let total = base.checked_pow(n as u32).filter(|&t| t <= DEFAULT_ENUMERATION_CAP);
    let total = total.ok_or_else(|| Failure::from(Error::Resource {
        size: base.saturating_pow(n as u32),
        cap: DEFAULT_ENUMERATION_CAP,
    }))?;
    (0..total)
        .map(|mut code| {
            let codes: Vec<u32> = (0..n)
                .map(|_| {
                    let c = (code % base) as u32;
                    code /= base;
                    c
                })
                .collect();
            RingConfig::from_codes(&codes, m).map_err(Failure::from)
        })
        .collect()
}

/// All count vectors of `classes` entries with total in `1..=sites`.
fn all_counts(sites: usize, classes: usize) -> Vec<Counts> {
    fn go(left: usize, classes: usize, cur: &mut Vec<usize>, out: &mut Vec<Counts>) {
        if cur.len() == classes {
            if cur.iter().sum::<usize>() > 0 {
                out.push(Counts::new(cur.clone()));
            }
            return;
        }
        for p in 0..=left {
            cur.push(p);
            go(left - p, classes, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(sites, classes, &mut Vec::new(), &mut out);
    out
}

/// The local rule for weight-one states assumes every class is present.
fn candidate_counts(sites: usize, classes: usize, suite: Suite) -> Vec<Counts> {
    let mut all = all_counts(sites, classes);
    if suite == Suite::Minimal {
        all.retain(|c| c.per_class().iter().all(|&p| p > 0));
    }
    all
}

fn queue_case(a: &RingConfig, s: &RingConfig, t: &mut Tally) {
    let (c, r) = (f_ring(a, s), f_ring_by_recurrence(a, s));
    let mut ok = c == r;
    if let Ok(d) = &c {
        if is_minimal_state(d) {
            ok &= &immediate_arrivals(d) == a && &service_process(d) == s;
        }
    }
    t.record(ok, || json!({"arrivals": a.codes(), "services": s.codes()}));
}

fn identity_case(d: &RingConfig, t: &mut Tally) {
    let back = f_ring(&immediate_arrivals(d), &service_process(d));
    t.record(back.as_ref() == Ok(d), || json!({"departures": d.codes()}));
}

fn cmd_verify(args: VerifyArgs) -> CmdResult {
    let (n, lines) = (args.sites, args.lines);
    if n == 0 || lines == 0 {
        return Err(Failure::usage("--sites and --lines must be positive"));
    }
    let mut mode = match (args.exhaustive, args.trials) {
        (true, None) => Mode::Exhaustive,
        (false, Some(k)) => Mode::Trials(k, Box::new(rng_from_seed(args.seed))),
        _ => return Err(Failure::usage("give --exhaustive or --trials")),
    };
    let mut t = Tally::new();
    match args.suite {
        Suite::Bijection | Suite::Commutation => {
            let bits = n.checked_mul(lines).filter(|&b| b < 63);
            let states: Box<dyn Iterator<Item = (MultiLineConfig<RingConfig>, Option<i64>)>> = match &mut mode {
                Mode::Exhaustive => {
                    if bits.map_or(true, |b| (1u128 << b) * n as u128 > DEFAULT_ENUMERATION_CAP) {
                        return Err(Error::Resource {
                            size: u128::MAX,
                            cap: DEFAULT_ENUMERATION_CAP,
                        }
                        .into());
                    }
                    Box::new(enumerate_ring_states(n, lines)?.map(|x| (x, None)))
                }
                Mode::Trials(k, rng) => {
                    let mut v = Vec::new();
                    for _ in 0..*k {
                        let x = random_multiline(rng, n, lines)?;
                        let i = uniform_below(rng, n as u64) as i64;
                        v.push((x, Some(i)));
                    }
                    Box::new(v.into_iter())
                }
            };
            for (x, site) in states {
                let sites: Vec<i64> = site.map_or_else(|| (0..n as i64).collect(), |i| vec![i]);
                for i in sites {
                    if args.suite == Suite::Bijection {
                        let (y, j) = forward_map(&x, i)?;
                        let (x2, i2) = reverse_map(&y, j)?;
                        t.record(x2 == x && i2 == i, || json!({"state": multiline_to_json(&x), "site": i}));
                    } else if x.line_counts().windows(2).all(|w| w[0] <= w[1]) {
                        let ok = commutation_check(&x, i)?;
                        t.record(ok, || json!({"state": multiline_to_json(&x), "site": i}));
                    }
                }
            }
        }
        Suite::Queues => match &mut mode {
            Mode::Exhaustive => {
                let services = all_rings(n, 1)?;
                for m in 1..=lines {
                    for a in all_rings(n, m)? {
                        for s in &services {
                            queue_case(&a, s, &mut t);
                        }
                    }
                    for d in all_rings(n, m + 1)? {
                        identity_case(&d, &mut t);
                    }
                }
            }
            Mode::Trials(k, rng) => {
                for _ in 0..*k {
                    let m = 1 + uniform_below(rng, lines as u64) as usize;
                    let a = random_ring(rng, n, m)?;
                    let s = random_ring(rng, n, 1)?;
                    queue_case(&a, &s, &mut t);
                    identity_case(&random_ring(rng, n, m + 1)?, &mut t);
                }
            }
        },
        Suite::Balance | Suite::Minimal => {
            let list = match (&args.counts, &mut mode) {
                (Some(c), _) => vec![counts_arg(lines, c)?],
                (None, Mode::Exhaustive) => candidate_counts(n, lines, args.suite),
                (None, Mode::Trials(k, rng)) => {
                    let all = candidate_counts(n, lines, args.suite);
                    if all.is_empty() {
                        return Err(Error::Infeasible(format!("{lines} classes on {n} sites")).into());
                    }
                    (0..*k)
                        .map(|_| all[uniform_below(rng, all.len() as u64) as usize].clone())
                        .collect()
                }
            };
            for counts in list {
                let dist = stationary_weights_capped(n, &counts, DEFAULT_ENUMERATION_CAP)?;
                let ok = if args.suite == Suite::Balance {
                    verify_balance_capped(&dist, DEFAULT_ENUMERATION_CAP)?.balanced
                } else {
                    verify_minimal_weights(&dist)?.holds
                };
                t.record(ok, || json!({"counts": counts.per_class()}));
            }
        }
    }
    let pass = t.failures == 0;
    let doc = json!({
        "suite": format!("{:?}", args.suite).to_lowercase(),
        "sites": n,
        "lines": lines,
        "mode": if args.exhaustive { "exhaustive" } else { "trials" },
        "cases": t.cases,
        "failures": t.failures,
        "first_failure": t.first_failure,
        "pass": pass,
    });
    args.out.write(&format!("{doc}\n"))?;
    Ok(if pass { 0 } else { Failure::VERIFY })
}

// ---------------------------------------------------------------------------
// stats

fn two_rates(rates: &str) -> Result<(f64, f64), Failure> {
    match parse_rate_list(rates)?.as_slice() {
        &[a, b] => Ok((a, b)),
        other => Err(Failure::usage(format!("expected two rates, got {}", other.len()))),
    }
}

fn class_string(s: &str, n: usize) -> Result<Vec<usize>, Failure> {
    parse_class_list(s, n)?
        .into_iter()
        .map(|v| v.class_index().ok_or_else(|| Failure::usage("holes are not allowed in a class string")))
        .collect()
}

fn exit_for(report: &TestReport) -> u8 {
    match report.outcome {
        Outcome::Pass => 0,
        Outcome::Fail => Failure::VERIFY,
        Outcome::Inconclusive => Failure::INCONCLUSIVE,
    }
}

fn cmd_stats(cmd: StatsCmd) -> CmdResult {
    let (report, out) = match cmd {
        StatsCmd::Burke {
            arrival,
            service,
            steps,
            seed,
            out,
        } => (burke_test(arrival, service, steps, seed)?, out),
        StatsCmd::Qlen {
            rates,
            steps,
            seed,
            out,
        } => {
            let (l1, l2) = two_rates(&rates)?;
            (queue_length_fit(l1, l2, steps, seed)?, out)
        }
        StatsCmd::Coupling {
            rates,
            window,
            paths,
            seed,
            out,
        } => {
            let (l1, l2) = two_rates(&rates)?;
            (coupling_experiment(l1, l2, window, paths, seed)?, out)
        }
        StatsCmd::Renewal {
            rates,
            string,
            window,
            seed,
            out,
        } => {
            let lambdas = parse_rate_list(&rates)?;
            let w = class_string(&string, lambdas.len())?;
            (renewal_emptiness_check(&lambdas, window, seed, &w)?, out)
        }
        StatsCmd::Factorization {
            rates,
            string,
            left,
            right,
            samples,
            seed,
            out,
        } => {
            let lambdas = parse_rate_list(&rates)?;
            let w = class_string(&string, lambdas.len())?;
            (factorization_test(&lambdas, &w, left, right, samples, seed)?, out)
        }
        StatsCmd::Independence {
            rates,
            samples,
            span,
            seed,
            out,
        } => {
            let lambdas = parse_rate_list(&rates)?;
            (hole_independence_test(&lambdas, span, samples, seed)?, out)
        }
    };
    out.write(&format!("{}\n", report_to_json(&report)))?;
    Ok(exit_for(&report))
}

//! Statistical and deterministic checks of the distributional properties of
//! the queueing construction.
//!
//! Every report has one of three outcomes. `Inconclusive` means there was
//! not enough data (for example a conditioning event that never occurred)
//! and is never reported as a pass.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::config::ClassValue;
use crate::error::{Error, Result};
use crate::simulate::{
    bernoulli, default_burn_in, derive_seed, geometric, rng_from_seed, SimRng, TandemStream,
};

/// Chi-square tests pass when the p-value exceeds this.
pub const P_VALUE_THRESHOLD: f64 = 0.001;
/// Width of the acceptance band for moment checks, in standard deviations.
pub const SIGMA_BAND: f64 = 4.0;
/// Tolerance on the empirical queue-length ratio.
pub const RATIO_TOLERANCE: f64 = 0.02;
/// Minimum expected cell count after pooling.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

/// One sub-check of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(deserialize_with = "nullable_f64")]
    pub statistic: f64,
    #[serde(deserialize_with = "nullable_f64")]
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    /// Headline statistic; its meaning is given per test.
    #[serde(deserialize_with = "nullable_f64")]
    pub statistic: f64,
    #[serde(deserialize_with = "nullable_f64")]
    pub threshold: f64,
    pub pass: bool,
    pub samples: u64,
    pub notes: String,
    pub outcome: Outcome,
    #[serde(default)]
    pub checks: Vec<Check>,
    /// Auxiliary named values (rates, ratios, counts).
    #[serde(default, deserialize_with = "nullable_map")]
    pub values: BTreeMap<String, f64>,
}

// NaN is written as JSON null.
fn nullable_f64<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

fn nullable_map<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<BTreeMap<String, f64>, D::Error> {
    let m = BTreeMap::<String, Option<f64>>::deserialize(d)?;
    Ok(m.into_iter().map(|(k, v)| (k, v.unwrap_or(f64::NAN))).collect())
}

impl TestReport {
    fn new(name: &str, statistic: f64, threshold: f64, outcome: Outcome, samples: u64) -> Self {
        TestReport {
            name: name.to_string(),
            statistic,
            threshold,
            pass: outcome == Outcome::Pass,
            samples,
            notes: String::new(),
            outcome,
            checks: Vec::new(),
            values: BTreeMap::new(),
        }
    }

    fn inconclusive(name: &str, samples: u64, notes: String) -> Self {
        let mut r = TestReport::new(name, f64::NAN, f64::NAN, Outcome::Inconclusive, samples);
        r.notes = notes;
        r
    }

    fn with_checks(mut self, checks: Vec<Check>) -> Self {
        self.checks = checks;
        self
    }

    fn value(mut self, key: &str, v: f64) -> Self {
        self.values.insert(key.to_string(), v);
        self
    }

    fn note(mut self, notes: impl Into<String>) -> Self {
        self.notes = notes.into();
        self
    }
}

fn outcome_of(checks: &[Check]) -> Outcome {
    if checks.iter().all(|c| c.pass) {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

fn check(name: &str, statistic: f64, threshold: f64, pass: bool) -> Check {
    Check {
        name: name.to_string(),
        statistic,
        threshold,
        pass,
    }
}

/// Ratio of the stationary geometric queue-length law of a queue with
/// Bernoulli(`lambda`) arrivals and Bernoulli(`mu`) services, from detailed
/// balance on the birth-death chain.
pub fn queue_length_ratio(lambda: f64, mu: f64) -> f64 {
    lambda * (1.0 - mu) / ((1.0 - lambda) * mu)
}

// ---------------------------------------------------------------------------
// Chi-square independence with pooling

/// Result of a pooled chi-square independence test.
#[derive(Clone, Debug, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub rows: usize,
    pub cols: usize,
    pub n: u64,
}

/// Contingency table with rows and columns keyed by category.
#[derive(Clone, Debug, Default)]
pub struct Contingency {
    cells: BTreeMap<(u64, u64), u64>,
}

impl Contingency {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, row: u64, col: u64) {
        *self.cells.entry((row, col)).or_insert(0) += 1;
    }

    pub fn merge(mut self, other: &Contingency) -> Self {
        for (&k, &c) in &other.cells {
            *self.cells.entry(k).or_insert(0) += c;
        }
        self
    }

    pub fn total(&self) -> u64 {
        self.cells.values().sum()
    }

    /// Pearson test of independence. The row or column category with the
    /// smallest margin is merged into the next smallest until every
    /// expected count is at least [`MIN_EXPECTED`].
    pub fn chi_square(&self) -> ChiSquareResult {
        let row_keys: BTreeSet<u64> = self.cells.keys().map(|k| k.0).collect();
        let col_keys: BTreeSet<u64> = self.cells.keys().map(|k| k.1).collect();
        let mut table: Vec<Vec<f64>> = row_keys
            .iter()
            .map(|&r| {
                col_keys
                    .iter()
                    .map(|&c| *self.cells.get(&(r, c)).unwrap_or(&0) as f64)
                    .collect()
            })
            .collect();
        let n: f64 = table.iter().flatten().sum();
        loop {
            let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
            let cols: Vec<f64> = (0..table.first().map_or(0, Vec::len))
                .map(|j| table.iter().map(|r| r[j]).sum())
                .collect();
            if rows.len() < 2 || cols.len() < 2 {
                return ChiSquareResult {
                    statistic: 0.0,
                    df: 0,
                    p_value: 1.0,
                    rows: rows.len(),
                    cols: cols.len(),
                    n: n as u64,
                };
            }
            let (ri, rmin) = argmin2(&rows);
            let (cj, cmin) = argmin2(&cols);
            if rmin.0 * cmin.0 / n >= MIN_EXPECTED {
                let mut stat = 0.0;
                for (i, row) in table.iter().enumerate() {
                    for (j, &o) in row.iter().enumerate() {
                        let e = rows[i] * cols[j] / n;
                        stat += (o - e) * (o - e) / e;
                    }
                }
                let df = (rows.len() - 1) * (cols.len() - 1);
                let p_value = ChiSquared::new(df as f64)
                    .map(|d| d.sf(stat))
                    .unwrap_or(f64::NAN);
                return ChiSquareResult {
                    statistic: stat,
                    df,
                    p_value,
                    rows: rows.len(),
                    cols: cols.len(),
                    n: n as u64,
                };
            }
            let merge_rows = match (rows.len(), cols.len()) {
                (2, _) => false,
                (_, 2) => true,
                _ => rmin.0 <= cmin.0,
            };
            if merge_rows {
                let (a, b) = ri;
                let moved = table.remove(a.max(b));
                let keep = a.min(b);
                for (x, y) in table[keep].iter_mut().zip(moved) {
                    *x += y;
                }
            } else {
                let (a, b) = cj;
                let (hi, lo) = (a.max(b), a.min(b));
                for row in &mut table {
                    let y = row.remove(hi);
                    row[lo] += y;
                }
            }
        }
    }
}

/// Indices and values of the two smallest entries (len >= 2).
fn argmin2(v: &[f64]) -> ((usize, usize), (f64, f64)) {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    ((idx[0], idx[1]), (v[idx[0]], v[idx[1]]))
}

/// Pearson goodness of fit against the given probabilities. Bins with small
/// expected counts are pooled from the tail.
pub fn chi_square_fit(observed: &[u64], probs: &[f64]) -> ChiSquareResult {
    let n: u64 = observed.iter().sum();
    let nf = n as f64;
    let mut o: Vec<f64> = Vec::new();
    let mut e: Vec<f64> = Vec::new();
    let (mut oacc, mut eacc) = (0.0, 0.0);
    for (&ob, &p) in observed.iter().zip(probs) {
        oacc += ob as f64;
        eacc += p * nf;
        if eacc >= MIN_EXPECTED {
            o.push(oacc);
            e.push(eacc);
            oacc = 0.0;
            eacc = 0.0;
        }
    }
    if eacc > 0.0 || oacc > 0.0 {
        if let (Some(lo), Some(le)) = (o.last_mut(), e.last_mut()) {
            *lo += oacc;
            *le += eacc;
        } else {
            o.push(oacc);
            e.push(eacc);
        }
    }
    let stat: f64 = o.iter().zip(&e).map(|(o, e)| (o - e) * (o - e) / e).sum();
    let df = e.len().saturating_sub(1);
    let p_value = if df == 0 {
        1.0
    } else {
        ChiSquared::new(df as f64).map(|d| d.sf(stat)).unwrap_or(f64::NAN)
    };
    ChiSquareResult {
        statistic: stat,
        df,
        p_value,
        rows: e.len(),
        cols: 1,
        n,
    }
}

// ---------------------------------------------------------------------------
// Renewal strings

/// Whether `w` is a renewal string for the `n`-type process: it starts with
/// `n`, ends with `2`, and for every `m` in `3..n` some `j_m < r` has
/// `w(j_m) = m` with every later entry at most `m`.
pub fn is_renewal_string(w: &[usize], n: usize) -> bool {
    let Some((&last, _)) = w.split_last() else {
        return false;
    };
    if n < 2 || w[0] != n || last != 2 || w.iter().any(|&c| c == 0 || c > n) {
        return false;
    }
    let r = w.len() - 1;
    (3..n).all(|m| {
        (0..r)
            .rev()
            .take_while(|&j| w[j + 1..].iter().all(|&c| c <= m))
            .any(|j| w[j] == m)
    })
}

fn encode_class(v: ClassValue) -> u64 {
    u64::from(v.code())
}

fn matches(window: &VecDeque<ClassValue>, w: &[usize]) -> bool {
    window.len() == w.len()
        && window
            .iter()
            .zip(w)
            .all(|(v, &c)| v.class_index() == Some(c))
}

/// Checks that every tandem queue is empty right after each occurrence of
/// the renewal string `w` in one stationary window of `window` sites.
pub fn renewal_emptiness_check(
    lambdas: &[f64],
    window: usize,
    seed: u64,
    w: &[usize],
) -> Result<TestReport> {
    let n = lambdas.len();
    if !is_renewal_string(w, n) {
        return Err(Error::Parameter(format!("{w:?} is not a renewal string for n = {n}")));
    }
    let burn_in = default_burn_in(lambdas);
    let mut stream = TandemStream::new(lambdas, -(burn_in as i64), rng_from_seed(seed))?;
    stream.skip(burn_in);
    let mut recent = VecDeque::with_capacity(w.len());
    let (mut occurrences, mut violations) = (0u64, 0u64);
    let mut first_violation = None;
    for _ in 0..window {
        let j = stream.site();
        if recent.len() == w.len() {
            recent.pop_front();
        }
        recent.push_back(stream.next_value());
        if matches(&recent, w) {
            occurrences += 1;
            if !stream.queues_empty() {
                violations += 1;
                first_violation.get_or_insert(j);
            }
        }
    }
    let name = "renewal_emptiness";
    let notes = format!(
        "string {w:?}, rates {lambdas:?}, window {window}, burn-in {burn_in}, {occurrences} occurrences"
    );
    if occurrences == 0 {
        return Ok(TestReport::inconclusive(name, 0, notes));
    }
    let outcome = if violations == 0 {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    let mut report = TestReport::new(name, violations as f64, 0.0, outcome, occurrences)
        .note(notes)
        .value("occurrences", occurrences as f64)
        .value("violations", violations as f64);
    if let Some(j) = first_violation {
        report = report.value("first_violation_end", j as f64);
    }
    Ok(report)
}

/// Sites between the end of one used occurrence and the next usable start.
const OCCURRENCE_GAP: usize = 64;
/// Sites per streamed window in the factorization test.
const FACTORIZATION_WINDOW: usize = 1 << 20;
const FACTORIZATION_MAX_WINDOWS: u64 = 256;

/// Conditional on `w` at `[0, r]`, chi-square test of independence between
/// the `left` sites before 0 and the `right` sites after `r`.
///
/// Occurrences are collected from long stationary windows, keeping only
/// occurrences whose cylinders are at least a fixed gap apart. With a
/// string that is not a renewal string the report carries no verdict.
pub fn factorization_test(
    lambdas: &[f64],
    w: &[usize],
    left: usize,
    right: usize,
    samples: u64,
    seed: u64,
) -> Result<TestReport> {
    let n = lambdas.len();
    let renewal = is_renewal_string(w, n);
    if w.is_empty() || w.iter().any(|&c| c == 0 || c > n) {
        return Err(Error::Parameter(format!("{w:?} is not a class string for n = {n}")));
    }
    if left == 0 || right == 0 {
        return Err(Error::Parameter("cylinders must be nonempty".into()));
    }
    let span = left + w.len() + right;
    let burn_in = default_burn_in(lambdas);
    let mut table = Contingency::new();
    let mut collected = 0u64;
    let mut windows = 0u64;
    while collected < samples && windows < FACTORIZATION_MAX_WINDOWS {
        let rng = rng_from_seed(derive_seed(seed, windows));
        windows += 1;
        let mut stream = TandemStream::new(lambdas, 0, rng)?;
        stream.skip(burn_in);
        let mut recent: VecDeque<ClassValue> = VecDeque::with_capacity(span);
        // (left key, right key so far, right sites still to read)
        let mut pending: Option<(u64, u64, usize)> = None;
        let mut blocked_until = 0usize;
        for t in 0..FACTORIZATION_WINDOW {
            if recent.len() == span {
                recent.pop_front();
            }
            let v = stream.next_value();
            recent.push_back(v);
            if let Some((lkey, rkey, remaining)) = pending.as_mut() {
                *rkey = *rkey * 256 + encode_class(v);
                *remaining -= 1;
                if *remaining == 0 {
                    table.add(*lkey, *rkey);
                    collected += 1;
                    pending = None;
                    blocked_until = t + OCCURRENCE_GAP;
                    if collected >= samples {
                        break;
                    }
                }
                continue;
            }
            let k = recent.len();
            if t < blocked_until || k < left + w.len() {
                continue;
            }
            if recent.range(k - w.len()..).zip(w).all(|(v, &c)| v.class_index() == Some(c)) {
                let lkey = recent
                    .range(k - w.len() - left..k - w.len())
                    .fold(0u64, |acc, &v| acc * 256 + encode_class(v));
                pending = Some((lkey, 0, right));
            }
        }
    }
    let name = "factorization";
    let notes = format!(
        "string {w:?} ({}), rates {lambdas:?}, cylinders {left}+{right}, burn-in {burn_in}, {windows} windows",
        if renewal { "renewal" } else { "control, no verdict" }
    );
    if collected < samples {
        return Ok(TestReport::inconclusive(
            name,
            collected,
            format!("{notes}; only {collected} of {samples} conditioned samples"),
        ));
    }
    let chi = table.chi_square();
    let outcome = if !renewal || chi.df == 0 {
        Outcome::Inconclusive
    } else if chi.p_value > P_VALUE_THRESHOLD {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    Ok(TestReport::new(name, chi.p_value, P_VALUE_THRESHOLD, outcome, collected)
        .note(notes)
        .value("chi_square", chi.statistic)
        .value("df", chi.df as f64))
}


// ---------------------------------------------------------------------------
// Independence of holes to the right (and first-class particles to the left)

/// Burn-in floor for tests that look at both sides of the origin.
const INDEPENDENCE_MIN_BURN_IN: usize = 500;

/// Two chi-square tests on `samples` independent stationary windows:
/// the hole indicators on `1..=span` against `(u(0), u(-1))`, and the
/// first-class indicators on `-span..=-1` against `(u(0), u(1))`.
pub fn hole_independence_test(
    lambdas: &[f64],
    span: usize,
    samples: u64,
    seed: u64,
) -> Result<TestReport> {
    if span == 0 || span > 16 {
        return Err(Error::Parameter(format!("span {span} must lie in 1..=16")));
    }
    let burn_in = default_burn_in(lambdas).max(INDEPENDENCE_MIN_BURN_IN);
    TandemStream::new(lambdas, 0, rng_from_seed(seed))?;
    let keys: Vec<[u64; 4]> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let s = span as i64;
            let start = -s - burn_in as i64;
            let mut stream = TandemStream::new(lambdas, start, rng_from_seed(derive_seed(seed, i)))
                .expect("rates checked above");
            stream.skip(burn_in);
            let u: Vec<ClassValue> = (0..2 * span + 1).map(|_| stream.next_value()).collect();
            let at = |j: i64| u[(j + s) as usize];
            let holes = (1..=s).fold(0u64, |acc, j| acc << 1 | u64::from(at(j).is_hole()));
            let firsts = (-s..0).fold(0u64, |acc, j| {
                acc << 1 | u64::from(at(j) == ClassValue::FIRST)
            });
            let left = encode_class(at(0)) * 256 + encode_class(at(-1));
            let right = encode_class(at(0)) * 256 + encode_class(at(1));
            [left, holes, firsts, right]
        })
        .collect();
    let mut holes_table = Contingency::new();
    let mut firsts_table = Contingency::new();
    for [left, holes, firsts, right] in keys {
        holes_table.add(left, holes);
        firsts_table.add(firsts, right);
    }
    let a = holes_table.chi_square();
    let b = firsts_table.chi_square();
    let checks = vec![
        check("holes_right_vs_left_cylinder", a.p_value, P_VALUE_THRESHOLD, a.p_value > P_VALUE_THRESHOLD),
        check("firsts_left_vs_right_cylinder", b.p_value, P_VALUE_THRESHOLD, b.p_value > P_VALUE_THRESHOLD),
    ];
    let outcome = if a.df == 0 || b.df == 0 {
        Outcome::Inconclusive
    } else {
        outcome_of(&checks)
    };
    Ok(TestReport::new(
        "hole_independence",
        a.p_value.min(b.p_value),
        P_VALUE_THRESHOLD,
        outcome,
        samples,
    )
    .with_checks(checks)
    .value("df_holes", a.df as f64)
    .value("df_firsts", b.df as f64)
    .note(format!("rates {lambdas:?}, span {span}, burn-in {burn_in}")))
}

// ---------------------------------------------------------------------------
// Single-class queue

fn check_queue_rates(lambda: f64, mu: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda < mu && mu < 1.0) {
        return Err(Error::Parameter(format!(
            "need 0 <= arrival < service < 1, got {lambda} and {mu}"
        )));
    }
    Ok(())
}

/// Burn-in used by the single-queue tests, scaled with the relaxation time.
fn queue_burn_in(lambda: f64, mu: f64) -> usize {
    let gap = (mu.sqrt() - lambda.sqrt()).powi(2);
    ((50.0 / gap).ceil() as usize).max(1000)
}

/// Departure indicators of a stationary single-class queue.
fn departures(rng: &mut SimRng, lambda: f64, mu: f64, steps: usize, burn_in: usize) -> Vec<bool> {
    let mut q = geometric(rng, queue_length_ratio(lambda, mu));
    let mut out = Vec::with_capacity(steps);
    for t in 0..burn_in + steps {
        let a = bernoulli(rng, lambda);
        let s = bernoulli(rng, mu);
        let d = s && (q > 0 || a);
        q = (q + usize::from(a)).saturating_sub(usize::from(s));
        if t >= burn_in {
            out.push(d);
        }
    }
    out
}

/// Departures from a queue with Bernoulli(`lambda`) arrivals and
/// Bernoulli(`mu`) services: rate, lag 1 to 5 autocorrelations and the
/// inter-departure gap law, each against a Bernoulli(`lambda`) process.
pub fn burke_test(lambda: f64, mu: f64, steps: u64, seed: u64) -> Result<TestReport> {
    check_queue_rates(lambda, mu)?;
    let burn_in = queue_burn_in(lambda, mu);
    let d = departures(&mut rng_from_seed(seed), lambda, mu, steps as usize, burn_in);
    let count = d.iter().filter(|&&x| x).count();
    let notes = format!("arrival {lambda}, service {mu}, burn-in {burn_in} from the geometric law");
    if count < 2 || count == d.len() {
        return Ok(TestReport::inconclusive("burke", steps, format!("{notes}; {count} departures")));
    }
    let n = d.len() as f64;
    let rate = count as f64 / n;
    let sigma = (lambda * (1.0 - lambda) / n).sqrt();
    let mut checks = vec![check(
        "rate",
        (rate - lambda).abs(),
        SIGMA_BAND * sigma,
        (rate - lambda).abs() <= SIGMA_BAND * sigma,
    )];
    let x: Vec<f64> = d.iter().map(|&b| f64::from(u8::from(b)) - rate).collect();
    let var: f64 = x.iter().map(|v| v * v).sum();
    let band = SIGMA_BAND / n.sqrt();
    for lag in 1..=5 {
        let cov: f64 = x.iter().zip(&x[lag..]).map(|(a, b)| a * b).sum();
        let rho = cov / var;
        checks.push(check(&format!("autocorrelation_lag{lag}"), rho.abs(), band, rho.abs() <= band));
    }
    let times: Vec<usize> = d.iter().enumerate().filter(|(_, &b)| b).map(|(t, _)| t).collect();
    let gaps: Vec<usize> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let max_gap = *gaps.iter().max().expect("at least one gap");
    let mut observed = vec![0u64; max_gap];
    for g in &gaps {
        observed[g - 1] += 1;
    }
    let mut probs: Vec<f64> = (1..max_gap)
        .map(|g| lambda * (1.0 - lambda).powi(g as i32 - 1))
        .collect();
    probs.push((1.0 - lambda).powi(max_gap as i32 - 1));
    let fit = chi_square_fit(&observed, &probs);
    checks.push(check("gap_chi_square_p", fit.p_value, P_VALUE_THRESHOLD, fit.p_value > P_VALUE_THRESHOLD));
    let outcome = outcome_of(&checks);
    Ok(TestReport::new("burke", (rate - lambda).abs() / sigma, SIGMA_BAND, outcome, steps)
        .with_checks(checks)
        .value("departure_rate", rate)
        .value("gap_p_value", fit.p_value)
        .note(notes))
}

/// Empirical ratios `P(Q = k + 1) / P(Q = k)`, `k = 0..=3`, for the queue with
/// arrival rate `lambda1` and service rate `lambda1 + lambda2`, compared with
/// the detailed-balance ratio and with `lambda1 / (lambda1 + lambda2)`.
pub fn queue_length_fit(lambda1: f64, lambda2: f64, steps: u64, seed: u64) -> Result<TestReport> {
    let mu = lambda1 + lambda2;
    if lambda2.is_nan() || lambda2 <= 0.0 {
        return Err(Error::Parameter(format!("second rate {lambda2} must be positive")));
    }
    check_queue_rates(lambda1, mu)?;
    let r_db = queue_length_ratio(lambda1, mu);
    let r_p = lambda1 / mu;
    let burn_in = queue_burn_in(lambda1, mu);
    let mut rng = rng_from_seed(seed);
    let mut q = 0usize;
    let mut hist = vec![0u64; 5];
    for t in 0..burn_in as u64 + steps {
        let a = bernoulli(&mut rng, lambda1);
        let s = bernoulli(&mut rng, mu);
        q = (q + usize::from(a)).saturating_sub(usize::from(s));
        if t >= burn_in as u64 && q < hist.len() {
            hist[q] += 1;
        }
    }
    let notes = format!(
        "histogram Q=0..4 {hist:?}; detailed-balance ratio {r_db}; stated parameter {r_p}; burn-in {burn_in} from empty"
    );
    if hist.contains(&0) {
        return Ok(TestReport::inconclusive("queue_length_fit", steps, notes));
    }
    let ratios: Vec<f64> = (0..4).map(|k| hist[k + 1] as f64 / hist[k] as f64).collect();
    let dev = |r: f64| ratios.iter().map(|x| (x - r).abs()).fold(0.0, f64::max);
    let checks: Vec<Check> = ratios
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            check(&format!("ratio_k{k}"), x, RATIO_TOLERANCE, (x - r_db).abs() <= RATIO_TOLERANCE)
        })
        .collect();
    let mut report = TestReport::new(
        "queue_length_fit",
        dev(r_db),
        RATIO_TOLERANCE,
        outcome_of(&checks),
        steps,
    )
    .with_checks(checks)
    .value("ratio_detailed_balance", r_db)
    .value("ratio_stated", r_p)
    .value("max_deviation_detailed_balance", dev(r_db))
    .value("max_deviation_stated", dev(r_p))
    .value("matches_detailed_balance", f64::from(u8::from(dev(r_db) <= RATIO_TOLERANCE)))
    .value("matches_stated", f64::from(u8::from(dev(r_p) <= RATIO_TOLERANCE)))
    .note(notes);
    for (k, x) in ratios.iter().enumerate() {
        report = report.value(&format!("empirical_ratio_k{k}"), *x);
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Coupling of the stationary law with the law seen from a second-class particle

/// Per-path tallies of one half of the coupling.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct CouplingTally {
    paths: u64,
    queue_violations: u64,
    order_violations: u64,
    coalescence_violations: u64,
    /// Paths where the queues never met inside the window.
    uncoalesced: u64,
    /// Paths with `u(T) != u'(T)` at the meeting site `T`.
    differ_at_meeting: u64,
    /// `disagree[j - 1]` counts paths with `u(j) != u'(j)`.
    disagree: Vec<u64>,
}

impl CouplingTally {
    fn merge(mut self, other: CouplingTally) -> CouplingTally {
        if self.disagree.is_empty() {
            return other;
        }
        self.paths += other.paths;
        self.queue_violations += other.queue_violations;
        self.order_violations += other.order_violations;
        self.coalescence_violations += other.coalescence_violations;
        self.uncoalesced += other.uncoalesced;
        self.differ_at_meeting += other.differ_at_meeting;
        for (a, b) in self.disagree.iter_mut().zip(other.disagree) {
            *a += b;
        }
        self
    }

    fn violations(&self) -> u64 {
        self.queue_violations + self.order_violations + self.coalescence_violations
    }
}

/// Value at a site of a queue-built two-type configuration: 1 for a
/// departure, 2 for an unused service, 3 for no service.
fn two_type_value(q_prev: usize, a: bool, s: bool) -> u8 {
    match (s, q_prev > 0 || a) {
        (false, _) => 3,
        (true, true) => 1,
        (true, false) => 2,
    }
}

fn coupling_path(rng: &mut SimRng, lambda: f64, mu: f64, k: usize) -> CouplingTally {
    let mut t = CouplingTally {
        paths: 1,
        disagree: vec![0; k],
        ..Default::default()
    };
    let mut q = geometric(rng, queue_length_ratio(lambda, mu));
    let mut qc = 0usize;
    let mut meeting = (q == 0).then_some(0usize);
    for j in 1..=k {
        let a = bernoulli(rng, lambda);
        let s = bernoulli(rng, mu);
        let u = two_type_value(q, a, s);
        let uc = two_type_value(qc, a, s);
        q = (q + usize::from(a)).saturating_sub(usize::from(s));
        qc = (qc + usize::from(a)).saturating_sub(usize::from(s));
        t.queue_violations += u64::from(q < qc);
        t.order_violations += u64::from(u > uc);
        if u != uc {
            t.disagree[j - 1] += 1;
            match meeting {
                Some(m) if j > m => t.coalescence_violations += 1,
                Some(m) if j == m => t.differ_at_meeting += 1,
                _ => {}
            }
        }
        if meeting.is_none() && q == 0 {
            meeting = Some(j);
        }
    }
    t.uncoalesced = u64::from(meeting.is_none());
    t
}

fn coupling_half(lambda: f64, mu: f64, k: usize, paths: u64, seed: u64) -> CouplingTally {
    (0..paths)
        .into_par_iter()
        .map(|i| coupling_path(&mut rng_from_seed(derive_seed(seed, i)), lambda, mu, k))
        .reduce(CouplingTally::default, CouplingTally::merge)
}

/// Least-squares slope of `ln p_j` against `j` over sites with at least
/// `min_count` disagreements.
fn log_linear_slope(disagree: &[u64], min_count: u64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = disagree
        .iter()
        .enumerate()
        .filter(|(_, &c)| c >= min_count)
        .map(|(i, &c)| ((i + 1) as f64, (c as f64).ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / m, sy / m);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Couples a stationary two-type configuration `u` with one conditioned on a
/// second-class particle at the origin, `u'`, through shared arrivals and
/// services. Right of the origin `u` starts from a stationary queue and `u'`
/// from an empty one; left of the origin the same is done for the reflected
/// process (left-right reversal with class order reversed), whose first-class
/// density is the hole density.
///
/// Checked on every path: queue dominance, `u <= u'` (right) and `u >= u'`
/// (left), and `u = u'` at every site after the queues meet.
pub fn coupling_experiment(
    lambda1: f64,
    lambda2: f64,
    k: usize,
    paths: u64,
    seed: u64,
) -> Result<TestReport> {
    let mu = lambda1 + lambda2;
    if !(lambda1 > 0.0 && lambda2 > 0.0 && mu < 1.0) {
        return Err(Error::Parameter(format!(
            "rates ({lambda1}, {lambda2}) must be positive with sum below 1"
        )));
    }
    if k == 0 || paths == 0 {
        return Err(Error::Parameter("window and path count must be positive".into()));
    }
    let right = coupling_half(lambda1, mu, k, paths, derive_seed(seed, 0));
    let left = coupling_half(1.0 - mu, 1.0 - lambda1, k, paths, derive_seed(seed, 1));
    let violations = right.violations() + left.violations();
    let slope_right = log_linear_slope(&right.disagree, 20);
    let slope_left = log_linear_slope(&left.disagree, 20);
    let mut checks = vec![check("violations", violations as f64, 0.0, violations == 0)];
    let mut inconclusive = false;
    for (name, slope) in [("slope_right", slope_right), ("slope_left", slope_left)] {
        match slope {
            Some(s) => checks.push(check(name, s, 0.0, s < 0.0)),
            None => inconclusive = true,
        }
    }
    if k >= 50 {
        let (p10, p50) = (right.disagree[9], right.disagree[49]);
        checks.push(check("decay_10_to_50", p50 as f64 / paths as f64, p10 as f64 / paths as f64, p50 < p10));
    }
    let outcome = if checks.iter().any(|c| !c.pass) {
        Outcome::Fail
    } else if inconclusive {
        Outcome::Inconclusive
    } else {
        Outcome::Pass
    };
    let p = |t: &CouplingTally, j: usize| t.disagree.get(j - 1).map_or(f64::NAN, |&c| c as f64 / paths as f64);
    Ok(TestReport::new("coupling", violations as f64, 0.0, outcome, 2 * paths)
        .with_checks(checks)
        .value("queue_violations", (right.queue_violations + left.queue_violations) as f64)
        .value("order_violations", (right.order_violations + left.order_violations) as f64)
        .value("coalescence_violations", (right.coalescence_violations + left.coalescence_violations) as f64)
        .value("differ_at_meeting_site", (right.differ_at_meeting + left.differ_at_meeting) as f64)
        .value("uncoalesced_paths", (right.uncoalesced + left.uncoalesced) as f64)
        .value("disagreement_j1", p(&right, 1))
        .value("disagreement_j10", p(&right, 10))
        .value("disagreement_j50", p(&right, 50))
        .value("slope_right", slope_right.unwrap_or(f64::NAN))
        .value("slope_left", slope_left.unwrap_or(f64::NAN))
        .note(format!(
            "rates ({lambda1}, {lambda2}), window {k}, {paths} paths per side; initial queue geometric with ratio {}",
            queue_length_ratio(lambda1, mu)
        )))
}

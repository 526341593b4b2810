//! Exact stationary distributions on the ring by enumeration.
//!
//! The stationary law of the `n`-type process with counts `p` is the image
//! of the uniform law on multiline states with `q_m = p_1 + ... + p_m`
//! particles on line `m`, read off the bottom line of the class assignment.
//! Counting preimages therefore gives integer weights over the common
//! denominator `M = prod_m C(N, q_m)`.
//!
//! Everything here is integer arithmetic. Stationarity is checked
//! independently against the generator by exact global balance.

use std::collections::{BTreeMap, HashMap};

use itertools::Itertools;
use rayon::prelude::*;

use crate::config::{ClassValue, Configuration, Counts, RingConfig};
use crate::error::{Error, Result};
use crate::multiline::{class_lines, MultiLineConfig};

/// Default bound on the number of configurations any enumeration may visit.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// Binomial coefficient with overflow detection.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = acc.checked_mul(u128::from(n - i))? / u128::from(i + 1);
    }
    Some(acc)
}

/// `M = prod_m C(N, q_m)`, the number of multiline states with these counts.
pub fn common_denominator(n_sites: usize, counts: &Counts) -> Result<u128> {
    counts.check_fits(n_sites)?;
    counts.prefix_sums().into_iter().try_fold(1u128, |acc, q| {
        binomial(n_sites as u64, q as u64)
            .and_then(|c| acc.checked_mul(c))
            .ok_or_else(|| Error::Overflow(format!("M for N={n_sites}, p={:?}", counts.per_class())))
    })
}

/// Exact stationary weights over configurations with fixed counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightedDistribution {
    n_sites: usize,
    counts: Counts,
    denominator: u128,
    weights: BTreeMap<RingConfig, u128>,
}

impl WeightedDistribution {
    /// Build from explicit weights. `denominator` must equal the weight sum.
    pub fn new(
        n_sites: usize,
        counts: Counts,
        denominator: u128,
        weights: BTreeMap<RingConfig, u128>,
    ) -> Result<Self> {
        counts.check_fits(n_sites)?;
        let mut total: u128 = 0;
        for (u, &w) in &weights {
            if u.len() != n_sites || u.class_counts() != counts {
                return Err(Error::Shape(format!(
                    "state {u:?} does not have {n_sites} sites and counts {:?}",
                    counts.per_class()
                )));
            }
            total = total
                .checked_add(w)
                .ok_or_else(|| Error::Overflow("weight sum".into()))?;
        }
        if total != denominator {
            return Err(Error::Parameter(format!(
                "weights sum to {total}, not the denominator {denominator}"
            )));
        }
        Ok(WeightedDistribution {
            n_sites,
            counts,
            denominator,
            weights,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_classes(&self) -> usize {
        self.counts.n_classes()
    }

    pub fn counts(&self) -> &Counts {
        &self.counts
    }

    pub fn denominator(&self) -> u128 {
        self.denominator
    }

    pub fn weights(&self) -> &BTreeMap<RingConfig, u128> {
        &self.weights
    }

    /// Weight of `u`; zero for states not in the support.
    pub fn weight(&self, u: &RingConfig) -> u128 {
        self.weights.get(u).copied().unwrap_or(0)
    }

    pub fn total_weight(&self) -> u128 {
        self.weights.values().sum()
    }

    /// Probabilities `weight / M`.
    pub fn normalized(&self) -> BTreeMap<RingConfig, f64> {
        let m = self.denominator as f64;
        self.weights
            .iter()
            .map(|(u, &w)| (u.clone(), w as f64 / m))
            .collect()
    }

    /// Adjust one weight (and the denominator with it). Used to build
    /// deliberately broken distributions in tests and diagnostics.
    pub fn with_weight(mut self, u: RingConfig, weight: u128) -> Result<Self> {
        let old = self.weight(&u);
        if u.len() != self.n_sites || u.class_counts() != self.counts {
            return Err(Error::Shape(format!("state {u:?} is outside the state space")));
        }
        self.denominator = (self.denominator - old)
            .checked_add(weight)
            .ok_or_else(|| Error::Overflow("denominator".into()))?;
        self.weights.insert(u, weight);
        Ok(self)
    }
}

fn subsets(n_sites: usize, k: usize) -> Vec<RingConfig> {
    (0..n_sites)
        .combinations(k)
        .map(|occ| RingConfig::binary(n_sites, occ).expect("indices in range"))
        .collect()
}

/// Counts preimages of each line-`line` configuration under the class
/// assignment, over all multiline states with line counts `q`.
fn pushforward(
    n_sites: usize,
    q: &[usize],
    line: usize,
    cap: u128,
) -> Result<HashMap<RingConfig, u128>> {
    let size = q.iter().try_fold(1u128, |acc, &qm| {
        binomial(n_sites as u64, qm as u64).and_then(|c| acc.checked_mul(c))
    });
    match size {
        Some(s) if s <= cap => {}
        Some(s) => return Err(Error::Resource { size: s, cap }),
        None => return Err(Error::Resource { size: u128::MAX, cap }),
    }
    let per_line: Vec<Vec<RingConfig>> = q.iter().map(|&qm| subsets(n_sites, qm)).collect();
    let rest = &per_line[1..];
    per_line[0]
        .par_iter()
        .map(|top| {
            let mut local: HashMap<RingConfig, u128> = HashMap::new();
            let mut odometer = vec![0usize; rest.len()];
            'outer: loop {
                let mut lines = Vec::with_capacity(q.len());
                lines.push(top.clone());
                lines.extend(rest.iter().zip(&odometer).map(|(opts, &k)| opts[k].clone()));
                let x = MultiLineConfig::new(lines)?;
                let v = class_lines(&x)?;
                *local.entry(v.line(line).clone()).or_insert(0) += 1;
                for (slot, opts) in odometer.iter_mut().zip(rest).rev() {
                    *slot += 1;
                    if *slot < opts.len() {
                        continue 'outer;
                    }
                    *slot = 0;
                }
                break;
            }
            Ok(local)
        })
        .try_reduce(HashMap::new, |mut a, b| {
            for (u, w) in b {
                *a.entry(u).or_insert(0) += w;
            }
            Ok(a)
        })
}

/// Exact stationary weights with the default enumeration cap.
pub fn stationary_weights(n_sites: usize, counts: &Counts) -> Result<WeightedDistribution> {
    stationary_weights_capped(n_sites, counts, DEFAULT_ENUMERATION_CAP)
}

/// Exact stationary weights of the `n`-type process with counts `counts`:
/// `weight(u)` is the number of multiline states whose class assignment has
/// bottom line `u`.
pub fn stationary_weights_capped(
    n_sites: usize,
    counts: &Counts,
    cap: u128,
) -> Result<WeightedDistribution> {
    line_marginal_weights(n_sites, counts, counts.n_classes(), cap)
}

/// Weights of line `line` of the class assignment under the uniform
/// multiline law with counts `counts`, normalised by the full multiline
/// state count.
pub fn line_marginal_weights(
    n_sites: usize,
    counts: &Counts,
    line: usize,
    cap: u128,
) -> Result<WeightedDistribution> {
    if n_sites == 0 {
        return Err(Error::Parameter("a ring needs at least one site".into()));
    }
    if counts.n_classes() == 0 || line == 0 || line > counts.n_classes() {
        return Err(Error::Parameter(format!(
            "line {line} requested from {} classes",
            counts.n_classes()
        )));
    }
    let denominator = common_denominator(n_sites, counts)?;
    let q = counts.prefix_sums();
    let weights: BTreeMap<_, _> = pushforward(n_sites, &q, line, cap)?.into_iter().collect();
    WeightedDistribution::new(n_sites, counts.truncated(line), denominator, weights)
}

/// Every ring configuration with exactly these counts.
pub fn enumerate_states(n_sites: usize, counts: &Counts, cap: u128) -> Result<Vec<RingConfig>> {
    counts.check_fits(n_sites)?;
    if n_sites == 0 {
        return Err(Error::Parameter("a ring needs at least one site".into()));
    }
    // multinomial N! / (p_1! ... p_n! holes!) as a product of binomials
    let mut remaining = n_sites as u64;
    let mut size: Option<u128> = Some(1);
    for &p in counts.per_class() {
        size = size.and_then(|s| binomial(remaining, p as u64).and_then(|c| s.checked_mul(c)));
        remaining -= p as u64;
    }
    match size {
        Some(s) if s <= cap => {}
        Some(s) => return Err(Error::Resource { size: s, cap }),
        None => return Err(Error::Resource { size: u128::MAX, cap }),
    }

    fn fill(
        pos: usize,
        left: &mut Vec<usize>,
        current: &mut Vec<ClassValue>,
        n_classes: usize,
        out: &mut Vec<RingConfig>,
    ) {
        if pos == current.len() {
            out.push(RingConfig::from_parts_unchecked(current.clone(), n_classes));
            return;
        }
        for slot in 0..left.len() {
            if left[slot] == 0 {
                continue;
            }
            left[slot] -= 1;
            current[pos] = if slot == n_classes {
                ClassValue::HOLE
            } else {
                ClassValue::class(slot + 1)
            };
            fill(pos + 1, left, current, n_classes, out);
            left[slot] += 1;
        }
    }

    let n_classes = counts.n_classes();
    let mut left: Vec<usize> = counts.per_class().to_vec();
    left.push(n_sites - counts.total());
    let mut current = vec![ClassValue::HOLE; n_sites];
    let mut out = Vec::new();
    fill(0, &mut left, &mut current, n_classes, &mut out);
    Ok(out)
}

/// The local characterization of states of weight exactly 1: for every `j`,
/// a hole is followed by a hole or class `n`, and class `m` is followed by a
/// value `>= m - 1`.
pub fn is_minimal_state(u: &RingConfig) -> bool {
    let n = u.n_classes();
    let len = u.len();
    (0..len).all(|j| {
        let next = u.at(j + 1);
        match u.at(j).class_index() {
            None => next.is_hole() || next.class_index() == Some(n),
            Some(m) => next.is_hole() || next.class_index().is_some_and(|k| k + 1 >= m),
        }
    })
}

/// A state where inflow and outflow of probability mass differ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BalanceViolation {
    pub state: RingConfig,
    pub inflow: u128,
    pub outflow: u128,
}

/// Result of the exact global-balance check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BalanceReport {
    pub balanced: bool,
    pub states_checked: usize,
    pub counterexample: Option<BalanceViolation>,
}

/// Exact global balance against the generator.
///
/// Every bell rings at rate 1, so for each state `y`:
/// `sum_x w(x) #{i : x(i-1) > x(i), x^(i-1,i) = y} = w(y) #{i : y(i-1) > y(i)}`.
pub fn verify_balance(dist: &WeightedDistribution) -> Result<BalanceReport> {
    verify_balance_capped(dist, DEFAULT_ENUMERATION_CAP)
}

pub fn verify_balance_capped(dist: &WeightedDistribution, cap: u128) -> Result<BalanceReport> {
    let states = enumerate_states(dist.n_sites, &dist.counts, cap)?;
    let n = dist.n_sites;
    let mut inflow: HashMap<RingConfig, u128> = HashMap::with_capacity(states.len());
    let mut outflow: HashMap<RingConfig, u128> = HashMap::with_capacity(states.len());
    let overflow = || Error::Overflow("balance flow".into());
    for x in &states {
        let w = dist.weight(x);
        if w == 0 {
            continue;
        }
        for i in 0..n {
            let left = (i + n - 1) % n;
            if x.at(left) > x.at(i) {
                let y = x.swap_adjacent(i as i64)?;
                let slot = inflow.entry(y).or_insert(0);
                *slot = slot.checked_add(w).ok_or_else(overflow)?;
                let slot = outflow.entry(x.clone()).or_insert(0);
                *slot = slot.checked_add(w).ok_or_else(overflow)?;
            }
        }
    }
    for y in &states {
        let inn = inflow.get(y).copied().unwrap_or(0);
        let out = outflow.get(y).copied().unwrap_or(0);
        if inn != out {
            return Ok(BalanceReport {
                balanced: false,
                states_checked: states.len(),
                counterexample: Some(BalanceViolation {
                    state: y.clone(),
                    inflow: inn,
                    outflow: out,
                }),
            });
        }
    }
    Ok(BalanceReport {
        balanced: true,
        states_checked: states.len(),
        counterexample: None,
    })
}

/// Result of comparing weight-1 states with the local minimality predicate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinimalWeightReport {
    pub holds: bool,
    pub min_weight: u128,
    pub total_weight: u128,
    pub denominator: u128,
    /// States satisfying [`is_minimal_state`], in sorted order.
    pub minimal_states: Vec<RingConfig>,
    /// First state where weight-1 membership and the predicate disagree.
    pub mismatch: Option<RingConfig>,
}

/// Checks: every state has weight at least 1, weights sum to `M`, and the
/// weight-1 states are exactly the minimal states.
pub fn verify_minimal_weights(dist: &WeightedDistribution) -> Result<MinimalWeightReport> {
    let states = enumerate_states(dist.n_sites, &dist.counts, DEFAULT_ENUMERATION_CAP)?;
    let min_weight = states.iter().map(|u| dist.weight(u)).min().unwrap_or(0);
    let total_weight = dist.total_weight();
    let minimal_states: Vec<RingConfig> = states
        .iter()
        .filter(|u| is_minimal_state(u))
        .cloned()
        .sorted()
        .collect();
    let mismatch = states
        .iter()
        .find(|u| (dist.weight(u) == 1) != is_minimal_state(u))
        .cloned();
    Ok(MinimalWeightReport {
        holds: min_weight == 1 && total_weight == dist.denominator && mismatch.is_none(),
        min_weight,
        total_weight,
        denominator: dist.denominator,
        minimal_states,
        mismatch,
    })
}

/// Reflects sites `j -> -j mod N` and reverses the order `1 < ... < n < HOLE`
/// (class `k` becomes `n + 2 - k`, class 1 and holes exchange).
///
/// The image of an `n`-type process is again an `n`-type process.
pub fn reflect_reverse(u: &RingConfig) -> RingConfig {
    let n = u.n_classes();
    let len = u.len();
    let map = |v: ClassValue| match v.class_index() {
        None => ClassValue::class(1),
        Some(1) => ClassValue::HOLE,
        Some(k) => ClassValue::class(n + 2 - k),
    };
    let mut sites = vec![ClassValue::HOLE; len];
    for (j, &v) in u.sites().iter().enumerate() {
        sites[(len - j) % len] = map(v);
    }
    RingConfig::from_parts_unchecked(sites, n)
}

/// Counts after [`reflect_reverse`]: `(N - q_n, p_n, p_{n-1}, ..., p_2)`.
pub fn reflected_counts(n_sites: usize, counts: &Counts) -> Result<Counts> {
    counts.check_fits(n_sites)?;
    let p = counts.per_class();
    let mut out = Vec::with_capacity(p.len());
    out.push(n_sites - counts.total());
    out.extend(p[1..].iter().rev());
    Ok(Counts::new(out))
}

/// Pushes a distribution through [`reflect_reverse`].
pub fn reflect_distribution(dist: &WeightedDistribution) -> Result<WeightedDistribution> {
    let weights = dist
        .weights
        .iter()
        .map(|(u, &w)| (reflect_reverse(u), w))
        .collect();
    WeightedDistribution::new(
        dist.n_sites,
        reflected_counts(dist.n_sites, &dist.counts)?,
        dist.denominator,
        weights,
    )
}

/// Total variation distance `1/2 sum |a - b|` over the union of supports.
pub fn tv_distance<K: Ord>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let mut sum = 0.0;
    for (k, pa) in a {
        sum += (pa - b.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, pb) in b {
        if !a.contains_key(k) {
            sum += pb.abs();
        }
    }
    0.5 * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: u32 = 0;

    fn ring(codes: &[u32], n: usize) -> RingConfig {
        RingConfig::from_codes(codes, n).unwrap()
    }

    fn counts(p: &[usize]) -> Counts {
        Counts::new(p.to_vec())
    }

    #[test]
    fn denominator_examples() {
        assert_eq!(common_denominator(9, &counts(&[3, 3])).unwrap(), 7056);
        assert_eq!(common_denominator(3, &counts(&[1, 1, 1])).unwrap(), 9);
        assert_eq!(common_denominator(5, &counts(&[0, 0])).unwrap(), 1);
        assert_eq!(common_denominator(4, &counts(&[1, 1, 1, 1])).unwrap(), 96);
    }

    #[test]
    fn denominator_errors() {
        assert!(matches!(
            common_denominator(3, &counts(&[4, 1])),
            Err(Error::Infeasible(_))
        ));
        // C(200, 100)^2 does not fit in 128 bits
        assert!(matches!(
            common_denominator(200, &counts(&[100, 0])),
            Err(Error::Overflow(_))
        ));
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(9, 3), Some(84));
        assert_eq!(binomial(9, 6), Some(84));
        assert_eq!(binomial(3, 4), Some(0));
        assert_eq!(binomial(0, 0), Some(1));
        assert_eq!(binomial(60, 30), Some(118_264_581_564_861_424));
    }

    #[test]
    fn three_site_two_class_table() {
        let dist = stationary_weights(3, &counts(&[1, 1])).unwrap();
        assert_eq!(dist.denominator(), 9);
        let expect = [
            (&[1, H, 2][..], 1),
            (&[2, 1, H], 1),
            (&[H, 2, 1], 1),
            (&[1, 2, H], 2),
            (&[H, 1, 2], 2),
            (&[2, H, 1], 2),
        ];
        for (codes, w) in expect {
            assert_eq!(dist.weight(&ring(codes, 2)), w, "{codes:?}");
        }
        assert_eq!(dist.weights().len(), 6);
    }

    #[test]
    fn single_class_is_uniform() {
        let dist = stationary_weights(6, &counts(&[2])).unwrap();
        assert_eq!(dist.denominator(), 15);
        assert_eq!(dist.weights().len(), 15);
        assert!(dist.weights().values().all(|&w| w == 1));
    }

    #[test]
    fn three_classes_on_three_sites() {
        let dist = stationary_weights(3, &counts(&[1, 1, 1])).unwrap();
        assert_eq!(dist.denominator(), 9);
        for codes in [[3, 2, 1], [1, 3, 2], [2, 1, 3]] {
            assert_eq!(dist.weight(&ring(&codes, 3)), 1);
        }
        for codes in [[1, 2, 3], [3, 1, 2], [2, 3, 1]] {
            assert_eq!(dist.weight(&ring(&codes, 3)), 2);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let err = stationary_weights_capped(6, &counts(&[2, 1]), 100).unwrap_err();
        assert_eq!(err, Error::Resource { size: 300, cap: 100 });
    }

    #[test]
    fn minimal_predicate_examples() {
        assert!(is_minimal_state(&ring(&[H, H, H, 2, 2, 2, 1, 1, 1], 2)));
        assert!(is_minimal_state(&ring(&[H, 2, H, H, 2, 1, 2, 1, 1], 2)));
        assert!(!is_minimal_state(&ring(&[H, 1, 2], 2)));
        assert!(is_minimal_state(&ring(&[H, 1, H, 1, 1], 1)));
    }

    #[test]
    fn balance_detects_perturbation() {
        let dist = stationary_weights(3, &counts(&[1, 1])).unwrap();
        assert!(verify_balance(&dist).unwrap().balanced);
        let bumped = dist.with_weight(ring(&[1, H, 2], 2), 2).unwrap();
        let report = verify_balance(&bumped).unwrap();
        assert!(!report.balanced);
        assert!(report.counterexample.is_some());
    }

    #[test]
    fn uniform_single_class_balances() {
        let states = enumerate_states(5, &counts(&[2]), 1000).unwrap();
        assert_eq!(states.len(), 10);
        let weights = states.into_iter().map(|u| (u, 1u128)).collect();
        let dist = WeightedDistribution::new(5, counts(&[2]), 10, weights).unwrap();
        assert!(verify_balance(&dist).unwrap().balanced);
        let report = verify_minimal_weights(&dist).unwrap();
        assert!(report.holds);
        assert_eq!(report.minimal_states.len(), 10);
    }

    #[test]
    fn minimal_weights_small() {
        let dist = stationary_weights(3, &counts(&[1, 1])).unwrap();
        let report = verify_minimal_weights(&dist).unwrap();
        assert!(report.holds);
        assert_eq!(report.minimal_states.len(), 3);

        let dist = stationary_weights(4, &counts(&[1, 1, 1, 1])).unwrap();
        let report = verify_minimal_weights(&dist).unwrap();
        assert!(report.holds);
        assert_eq!(report.denominator, 96);
        let shifts: Vec<RingConfig> = (0..4)
            .map(|s| {
                let base = [4u32, 3, 2, 1];
                let codes: Vec<u32> = (0..4).map(|j| base[(j + s) % 4]).collect();
                ring(&codes, 4)
            })
            .sorted()
            .collect();
        assert_eq!(report.minimal_states, shifts);
    }

    #[test]
    fn reflection_examples() {
        let u = ring(&[1, 2, H], 2);
        assert_eq!(reflect_reverse(&u), ring(&[H, 1, 2], 2));
        assert_eq!(reflect_reverse(&reflect_reverse(&u)), u);
        assert_eq!(reflect_reverse(&ring(&[H; 4], 3)), ring(&[1; 4], 3));
        assert_eq!(
            reflected_counts(7, &counts(&[1, 2, 3])).unwrap(),
            counts(&[1, 3, 2])
        );
    }

    #[test]
    fn tv_examples() {
        let a: BTreeMap<u8, f64> = [(0, 0.5), (1, 0.5)].into_iter().collect();
        let b: BTreeMap<u8, f64> = [(0, 1.0)].into_iter().collect();
        let c: BTreeMap<u8, f64> = [(2, 1.0)].into_iter().collect();
        assert_eq!(tv_distance(&a, &a), 0.0);
        assert_eq!(tv_distance(&a, &b), 0.5);
        assert_eq!(tv_distance(&b, &c), 1.0);
    }
}

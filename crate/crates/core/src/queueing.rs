//! Discrete-time multiclass priority queue.
//!
//! Sites are read as time slots. The arrival process carries customers of
//! classes `1..=m` (or no arrival), the service process is binary, and the
//! departure process records the class served at each service slot, with
//! `m + 1` marking an unused service and a hole marking "no service".
//!
//! Customers of equal class are indistinguishable, so the queue is kept as
//! the nested counts `Q^{<=1} <= ... <= Q^{<=m}`.
//!
//! On the ring two routes compute the departure process: the iterated
//! collapse ([`f_ring`]) and the queue-length recurrence driven by the
//! cyclic supremum ([`f_ring_by_recurrence`]). They must agree.

use std::collections::BTreeSet;

use crate::config::{ClassValue, Configuration, RingConfig, WindowConfig};
use crate::error::{Error, Result};

/// Nested class-count vector `(Q^{<=1}, ..., Q^{<=m})` of a priority queue.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QueueState {
    q_le: Vec<usize>,
}

impl QueueState {
    /// Empty queue serving `m` arrival classes.
    pub fn empty(m: usize) -> Self {
        QueueState { q_le: vec![0; m] }
    }

    pub fn new(q_le: Vec<usize>) -> Result<Self> {
        if q_le.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Parameter(format!(
                "queue counts {q_le:?} are not nested"
            )));
        }
        Ok(QueueState { q_le })
    }

    /// Number of arrival classes `m`.
    pub fn levels(&self) -> usize {
        self.q_le.len()
    }

    /// `Q^{<=k}` for `1 <= k <= m`.
    pub fn at_most(&self, k: usize) -> usize {
        self.q_le[k - 1]
    }

    pub fn counts(&self) -> &[usize] {
        &self.q_le
    }

    /// Total number of customers present.
    pub fn len(&self) -> usize {
        self.q_le.last().copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Advance one time slot. See [`step_queue`].
    pub fn step(&self, arrival: ClassValue, service: bool) -> Result<(QueueState, ClassValue)> {
        let mut next = self.clone();
        let d = next.advance(arrival, service)?;
        Ok((next, d))
    }

    /// In-place form of [`QueueState::step`]; returns the departure.
    pub fn advance(&mut self, arrival: ClassValue, service: bool) -> Result<ClassValue> {
        let m = self.q_le.len();
        if let Some(k) = arrival.class_index() {
            if k > m {
                return Err(Error::Domain {
                    value: k as u32,
                    n_classes: m,
                });
            }
        }
        let departure = if service {
            (1..=m)
                .find(|&k| self.q_le[k - 1] > 0 || arrival.at_most(k))
                .map(ClassValue::class)
                .unwrap_or_else(|| unused_service(m))
        } else {
            ClassValue::HOLE
        };
        for k in 1..=m {
            let q = &mut self.q_le[k - 1];
            let grown = *q + usize::from(arrival.at_most(k));
            *q = grown.saturating_sub(usize::from(service));
        }
        Ok(departure)
    }
}

fn unused_service(m: usize) -> ClassValue {
    ClassValue::try_class(m + 1)
        .unwrap_or_else(|| panic!("departure class {} not representable", m + 1))
}

fn check_levels(m: usize) -> Result<()> {
    if m + 1 > ClassValue::MAX_CLASS {
        return Err(Error::Parameter(format!(
            "a queue with {m} arrival classes produces an unrepresentable class {}",
            m + 1
        )));
    }
    Ok(())
}

/// One slot of the priority queue: returns the next state and the departure.
///
/// With a service, the departing class is the smallest `k` such that a
/// customer of class `<= k` was waiting or has just arrived; class `m + 1`
/// marks an unused service. Without a service the departure is a hole.
pub fn step_queue(
    state: &QueueState,
    arrival: ClassValue,
    service: bool,
) -> Result<(QueueState, ClassValue)> {
    check_levels(state.levels())?;
    state.step(arrival, service)
}

/// Reads a binary service process: `true` where a service is available.
pub fn service_slots<C: Configuration>(s: &C) -> Result<Vec<bool>> {
    s.sites()
        .iter()
        .map(|v| match v.class_index() {
            None => Ok(false),
            Some(1) => Ok(true),
            Some(k) => Err(Error::Domain {
                value: k as u32,
                n_classes: 1,
            }),
        })
        .collect()
}

fn check_window_pair(a: &WindowConfig, s: &WindowConfig, init: &QueueState) -> Result<()> {
    if !a.same_extent(s) {
        return Err(Error::Shape(format!(
            "arrival window [{}, {}] and service window [{}, {}] differ",
            a.lo(),
            a.hi(),
            s.lo(),
            s.hi()
        )));
    }
    if init.levels() != a.n_classes() {
        return Err(Error::Shape(format!(
            "initial queue has {} levels but arrivals have {} classes",
            init.levels(),
            a.n_classes()
        )));
    }
    check_levels(a.n_classes())
}

/// Output of running a queue across a window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowRun {
    pub departures: WindowConfig,
    /// Queue state just after each site of the window.
    pub states: Vec<QueueState>,
}

impl WindowRun {
    /// State after the last site (the initial state for an empty window).
    pub fn final_state<'a>(&'a self, init: &'a QueueState) -> &'a QueueState {
        self.states.last().unwrap_or(init)
    }
}

/// Runs the queue left to right over a window from `init`.
pub fn run_window(a: &WindowConfig, s: &WindowConfig, init: &QueueState) -> Result<WindowRun> {
    check_window_pair(a, s, init)?;
    let services = service_slots(s)?;
    let mut state = init.clone();
    let mut states = Vec::with_capacity(a.len());
    let mut departures = Vec::with_capacity(a.len());
    for (&arrival, &service) in a.sites().iter().zip(&services) {
        departures.push(state.advance(arrival, service)?);
        states.push(state.clone());
    }
    Ok(WindowRun {
        departures: WindowConfig::new(a.lo(), departures, a.n_classes() + 1)?,
        states,
    })
}

/// Queue states `Q_j` just after each site `j` of the window.
pub fn queue_lengths_window(
    a: &WindowConfig,
    s: &WindowConfig,
    init: &QueueState,
) -> Result<Vec<QueueState>> {
    Ok(run_window(a, s, init)?.states)
}

/// Departure process of the queue on a window, plus the final queue state.
pub fn f_window(
    a: &WindowConfig,
    s: &WindowConfig,
    init: &QueueState,
) -> Result<(WindowConfig, QueueState)> {
    let run = run_window(a, s, init)?;
    let last = run.final_state(init).clone();
    Ok((run.departures, last))
}

fn check_ring_pair(a: &RingConfig, s: &RingConfig) -> Result<Vec<bool>> {
    if a.len() != s.len() {
        return Err(Error::Shape(format!(
            "arrival ring has {} sites, service ring has {}",
            a.len(),
            s.len()
        )));
    }
    check_levels(a.n_classes())?;
    let services = service_slots(s)?;
    let n_services = services.iter().filter(|&&x| x).count();
    let n_arrivals = a.sites().iter().filter(|v| v.is_particle()).count();
    if n_arrivals > n_services {
        return Err(Error::Infeasible(format!(
            "{n_arrivals} arrivals exceed {n_services} services on the ring"
        )));
    }
    Ok(services)
}

/// Queue states on the ring from the cyclic supremum
/// `Q_j^{<=k} = max_i (A^{<=k}_{[i,j]} - S_{[i,j]})_+` over cyclic intervals
/// ending at `j` (lengths `1..=N`).
pub fn queue_lengths_ring(a: &RingConfig, s: &RingConfig) -> Result<Vec<QueueState>> {
    let services = check_ring_pair(a, s)?;
    let n = a.len();
    let m = a.n_classes();
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let mut q_le = vec![0usize; m];
        for (k, slot) in q_le.iter_mut().enumerate() {
            let level = k + 1;
            let mut excess: i64 = 0;
            let mut best: i64 = 0;
            for back in 0..n {
                let site = (j + n - back) % n;
                excess += i64::from(a.at(site).at_most(level));
                excess -= i64::from(services[site]);
                best = best.max(excess);
            }
            *slot = best as usize;
        }
        out.push(QueueState { q_le });
    }
    Ok(out)
}

/// Departure process on the ring from the queue-length recurrence: the
/// departure at `j` is decided by `Q_{j-1}` (cyclically) and the inputs at `j`.
pub fn f_ring_by_recurrence(a: &RingConfig, s: &RingConfig) -> Result<RingConfig> {
    let states = queue_lengths_ring(a, s)?;
    let services = service_slots(s)?;
    let n = a.len();
    let mut d = Vec::with_capacity(n);
    for j in 0..n {
        let prev = &states[(j + n - 1) % n];
        let (_, dj) = prev.step(a.at(j), services[j])?;
        d.push(dj);
    }
    RingConfig::new(d, a.n_classes() + 1)
}

/// Single-class collapse on `Z_N`.
///
/// Each arrival, taken in the given order, moves rightward (cyclically) to
/// the first service site not yet used. Returns the filled sites.
pub fn collapse_ring(
    n_sites: usize,
    arrivals: &[usize],
    services: &BTreeSet<usize>,
) -> Result<BTreeSet<usize>> {
    let range_err = |j: usize| Error::Range {
        index: j as i64,
        lo: 0,
        hi: n_sites as i64 - 1,
    };
    let mut available = vec![false; n_sites];
    for &j in services {
        *available.get_mut(j).ok_or_else(|| range_err(j))? = true;
    }
    let mut seen = vec![false; n_sites];
    for &i in arrivals {
        let slot = seen.get_mut(i).ok_or_else(|| range_err(i))?;
        if *slot {
            return Err(Error::Parameter(format!("arrival site {i} listed twice")));
        }
        *slot = true;
    }
    if arrivals.len() > services.len() {
        return Err(Error::Infeasible(format!(
            "{} arrivals exceed {} services",
            arrivals.len(),
            services.len()
        )));
    }
    let mut filled = BTreeSet::new();
    for &i in arrivals {
        let mut j = i;
        while !available[j] {
            j = (j + 1) % n_sites;
        }
        available[j] = false;
        filled.insert(j);
    }
    Ok(filled)
}

/// The ring queueing operator via iterated collapse: class `r` arrivals
/// collapse onto the services left over by classes `< r`; leftover services
/// become class `m + 1`.
pub fn f_ring(a: &RingConfig, s: &RingConfig) -> Result<RingConfig> {
    let services = check_ring_pair(a, s)?;
    let n = a.len();
    let m = a.n_classes();
    let mut available: BTreeSet<usize> = (0..n).filter(|&j| services[j]).collect();
    let mut d = vec![ClassValue::HOLE; n];
    for r in 1..=m {
        let class = ClassValue::class(r);
        let arrivals: Vec<usize> = (0..n).filter(|&j| a.at(j) == class).collect();
        let filled = collapse_ring(n, &arrivals, &available)?;
        for j in filled {
            available.remove(&j);
            d[j] = class;
        }
    }
    for j in available {
        d[j] = unused_service(m);
    }
    RingConfig::new(d, m + 1)
}

/// The service process implied by a departure process: a service wherever
/// the departure is not a hole.
pub fn service_process<C: Configuration>(d: &C) -> C {
    let sites = d
        .sites()
        .iter()
        .map(|v| {
            if v.is_hole() {
                ClassValue::HOLE
            } else {
                ClassValue::FIRST
            }
        })
        .collect();
    d.with_sites(sites, 1)
        .expect("binary values are valid for one class")
}

/// The arrival process in which every customer departs immediately:
/// unused services (class `m + 1`) become holes, other values are kept.
///
/// `d` must declare `m + 1 >= 1` classes.
pub fn immediate_arrivals<C: Configuration>(d: &C) -> C {
    let m = d.n_classes().saturating_sub(1);
    let sites = d
        .sites()
        .iter()
        .map(|&v| if v.at_most(m) { v } else { ClassValue::HOLE })
        .collect();
    d.with_sites(sites, m)
        .expect("values at most m are valid for m classes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: u32 = 0;

    fn ring(codes: &[u32], n: usize) -> RingConfig {
        RingConfig::from_codes(codes, n).unwrap()
    }

    fn window(codes: &[u32], n: usize) -> WindowConfig {
        WindowConfig::from_codes(0, codes, n).unwrap()
    }

    fn set(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().copied().collect()
    }

    #[test]
    fn step_immediate_departure() {
        let (q, d) = step_queue(&QueueState::empty(1), ClassValue::class(1), true).unwrap();
        assert_eq!(q, QueueState::empty(1));
        assert_eq!(d, ClassValue::class(1));
    }

    #[test]
    fn step_serves_waiting_second_class() {
        let q0 = QueueState::new(vec![0, 1]).unwrap();
        let (q, d) = step_queue(&q0, ClassValue::HOLE, true).unwrap();
        assert_eq!(q, QueueState::empty(2));
        assert_eq!(d, ClassValue::class(2));
    }

    #[test]
    fn step_unused_service() {
        let (q, d) = step_queue(&QueueState::empty(1), ClassValue::HOLE, true).unwrap();
        assert_eq!(q, QueueState::empty(1));
        assert_eq!(d, ClassValue::class(2));
    }

    #[test]
    fn step_rejects_class_above_m() {
        let err = step_queue(&QueueState::empty(1), ClassValue::class(2), true).unwrap_err();
        assert!(matches!(err, Error::Domain { value: 2, .. }));
    }

    #[test]
    fn window_lengths_examples() {
        let a = window(&[1, H, 1, 1], 1);
        let s = window(&[H, 1, 1, H], 1);
        let qs = queue_lengths_window(&a, &s, &QueueState::empty(1)).unwrap();
        let lens: Vec<usize> = qs.iter().map(|q| q.at_most(1)).collect();
        assert_eq!(lens, vec![1, 0, 0, 1]);

        let a = window(&[1, 1], 1);
        let s = window(&[H, H], 1);
        let qs = queue_lengths_window(&a, &s, &QueueState::empty(1)).unwrap();
        assert_eq!(qs.iter().map(QueueState::len).collect::<Vec<_>>(), vec![1, 2]);

        let a = window(&[H, H, H], 1);
        let s = window(&[1, H, 1], 1);
        let qs = queue_lengths_window(&a, &s, &QueueState::empty(1)).unwrap();
        assert!(qs.iter().all(QueueState::is_empty));
    }

    #[test]
    fn window_shape_errors() {
        let a = window(&[1, H], 1);
        let s = WindowConfig::from_codes(1, &[1, 1], 1).unwrap();
        assert!(matches!(
            f_window(&a, &s, &QueueState::empty(1)),
            Err(Error::Shape(_))
        ));
        let s = window(&[1, 1], 1);
        assert!(matches!(
            f_window(&a, &s, &QueueState::empty(2)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn f_window_examples() {
        let a = window(&[1, H, 1, 1], 1);
        let s = window(&[H, 1, 1, H], 1);
        let (d, last) = f_window(&a, &s, &QueueState::empty(1)).unwrap();
        assert_eq!(d.codes(), vec![H, 1, 1, H]);
        assert_eq!(last, QueueState::new(vec![1]).unwrap());

        let a = window(&[H, H, H], 2);
        let s = window(&[1, H, 1], 1);
        let (d, _) = f_window(&a, &s, &QueueState::empty(2)).unwrap();
        assert_eq!(d.codes(), vec![3, H, 3]);

        let a = window(&[2, 1], 2);
        let s = window(&[1, 1], 1);
        let (d, last) = f_window(&a, &s, &QueueState::empty(2)).unwrap();
        assert_eq!(d.codes(), vec![2, 1]);
        assert!(last.is_empty());
    }

    #[test]
    fn ring_lengths_example() {
        // class 2 at 0, class 1 at 1, services at {1, 3}
        let a = ring(&[2, 1, H, H, H], 2);
        let s = ring(&[H, 1, H, 1, H], 1);
        let qs = queue_lengths_ring(&a, &s).unwrap();
        let le1: Vec<usize> = qs.iter().map(|q| q.at_most(1)).collect();
        let le2: Vec<usize> = qs.iter().map(|q| q.at_most(2)).collect();
        assert_eq!(le1, vec![0, 0, 0, 0, 0]);
        assert_eq!(le2, vec![1, 1, 1, 0, 0]);
    }

    #[test]
    fn ring_lengths_trivial() {
        let s = ring(&[1, H, 1, H], 1);
        let qs = queue_lengths_ring(&ring(&[H; 4], 1), &s).unwrap();
        assert!(qs.iter().all(QueueState::is_empty));
        let qs = queue_lengths_ring(&ring(&[H, H, 1, H], 1), &ring(&[H, H, 1, H], 1)).unwrap();
        assert!(qs.iter().all(QueueState::is_empty));
    }

    #[test]
    fn ring_infeasible() {
        let a = ring(&[1, 1, H], 1);
        let s = ring(&[1, H, H], 1);
        assert!(matches!(queue_lengths_ring(&a, &s), Err(Error::Infeasible(_))));
        assert!(matches!(f_ring(&a, &s), Err(Error::Infeasible(_))));
        assert!(matches!(
            collapse_ring(3, &[0, 1], &set(&[0])),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn f_ring_examples() {
        let a = ring(&[2, 1, H, H, H], 2);
        let s = ring(&[H, 1, H, 1, H], 1);
        let d = f_ring(&a, &s).unwrap();
        assert_eq!(d.codes(), vec![H, 1, H, 2, H]);
        assert_eq!(f_ring_by_recurrence(&a, &s).unwrap(), d);

        let s = ring(&[1, H, 1, 1], 1);
        let d = f_ring(&ring(&[H; 4], 2), &s).unwrap();
        assert_eq!(d.codes(), vec![3, H, 3, 3]);

        let a = ring(&[H, H, H, 1], 1);
        let s = ring(&[H, 1, H, H], 1);
        assert_eq!(f_ring(&a, &s).unwrap().codes(), vec![H, 1, H, H]);
    }

    #[test]
    fn collapse_examples() {
        assert_eq!(collapse_ring(4, &[0], &set(&[1, 3])).unwrap(), set(&[1]));
        assert_eq!(collapse_ring(4, &[3], &set(&[1, 2])).unwrap(), set(&[1]));
        assert_eq!(
            collapse_ring(5, &[0, 2, 4], &set(&[0, 2, 4])).unwrap(),
            set(&[0, 2, 4])
        );
    }

    #[test]
    fn service_and_arrival_recovery() {
        let d = ring(&[1, 3, H], 3);
        assert_eq!(service_process(&d).codes(), vec![1, 1, H]);
        assert_eq!(immediate_arrivals(&d).codes(), vec![1, H, H]);
        assert_eq!(immediate_arrivals(&d).n_classes(), 2);

        let d = ring(&[2, 2, 1, H, 3], 3);
        assert_eq!(service_process(&d).codes(), vec![1, 1, 1, H, 1]);
        assert_eq!(service_process(&ring(&[H; 3], 2)).codes(), vec![H; 3]);

        let d = ring(&[3, H, 1], 3);
        assert_eq!(immediate_arrivals(&d).codes(), vec![H, H, 1]);
    }
}

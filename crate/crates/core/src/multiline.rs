//! The multiline process.
//!
//! `n` binary TASEP lines whose bells are coupled. A bell at site `i` on the
//! bottom line `n` rings line `m` at `b_m`, where `b_m = b_{m+1}` if line
//! `m + 1` holds a particle at `b_{m+1}` and `b_m = b_{m+1} + 1` otherwise.
//! Each rung line then sorts its pair `(b_m - 1, b_m)`.
//!
//! The reverse process rings line 1 first and cascades downwards, moving
//! particles to the right. The pair `T(x, i) = (Y(x, i), b_0)` and its
//! reverse `T*(y, j) = (X(y, j), c_{n+1})` are mutually inverse bijections on
//! ring states times sites, which is what makes the uniform law stationary.
//!
//! [`class_lines`] assigns classes to the particles of a multiline state by
//! feeding line `m` as the arrival process and line `m + 1` as the service
//! process of a priority queue.

use crate::config::{ClassValue, Configuration, RingConfig, WindowConfig};
use crate::error::{Error, Result};
use crate::queueing::{f_ring, run_window, service_slots, QueueState};

/// State of the multiline process: `n` binary lines on the same sites.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiLineConfig<C = RingConfig> {
    lines: Vec<C>,
}

impl<C: Configuration> MultiLineConfig<C> {
    pub fn new(lines: Vec<C>) -> Result<Self> {
        if lines.is_empty() {
            return Err(Error::Parameter("a multiline state needs at least one line".into()));
        }
        let extent = lines[0].extent();
        for (m, line) in lines.iter().enumerate() {
            if line.extent() != extent {
                return Err(Error::Shape(format!(
                    "line {} has extent {:?}, line 1 has {:?}",
                    m + 1,
                    line.extent(),
                    extent
                )));
            }
            service_slots(line)?;
        }
        Ok(MultiLineConfig { lines })
    }

    pub fn lines(&self) -> &[C] {
        &self.lines
    }

    pub fn into_lines(self) -> Vec<C> {
        self.lines
    }

    /// Line `m`, counted from 1 (top) to `n` (bottom).
    pub fn line(&self, m: usize) -> &C {
        &self.lines[m - 1]
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    /// Particles per line, top to bottom.
    pub fn line_counts(&self) -> Vec<usize> {
        self.lines
            .iter()
            .map(|l| l.sites().iter().filter(|v| v.is_particle()).count())
            .collect()
    }

    fn is_particle(&self, m: usize, site: i64) -> Result<bool> {
        let line = &self.lines[m - 1];
        match line.get(site) {
            Ok(v) => Ok(v.is_particle()),
            Err(_) => Err(Error::Boundary { line: m, site }),
        }
    }
}

/// Sites at which one bell rings on each line.
///
/// Forward cascades store `(b_0, b_1, ..., b_n)`; reverse cascades store
/// `(c_1, ..., c_{n+1})`. [`BellCascade::at`] indexes by line number either
/// way.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BellCascade {
    first_line: usize,
    sites: Vec<i64>,
}

impl BellCascade {
    /// Bell site for line `m`.
    pub fn at(&self, m: usize) -> i64 {
        self.sites[m - self.first_line]
    }

    /// Index of the first stored line (0 forward, 1 reverse).
    pub fn first_line(&self) -> usize {
        self.first_line
    }

    /// Stored sites in line order.
    pub fn sites(&self) -> &[i64] {
        &self.sites
    }
}

/// Forward cascade from a bell at `i` on the bottom line.
pub fn bell_cascade<C: Configuration>(x: &MultiLineConfig<C>, i: i64) -> Result<BellCascade> {
    let n = x.n_lines();
    x.lines[n - 1].offset(i)?;
    let mut sites = vec![0i64; n + 1];
    sites[n] = i;
    for m in (0..n).rev() {
        let above = sites[m + 1];
        sites[m] = if x.is_particle(m + 1, above)? {
            above
        } else {
            x.lines[m].shift(above, 1)
        };
    }
    Ok(BellCascade {
        first_line: 0,
        sites,
    })
}

/// Reverse cascade from a bell at `j` on the top line.
pub fn reverse_cascade<C: Configuration>(y: &MultiLineConfig<C>, j: i64) -> Result<BellCascade> {
    let n = y.n_lines();
    y.lines[0].offset(j)?;
    let mut sites = Vec::with_capacity(n + 1);
    sites.push(j);
    for m in 1..=n {
        let c = sites[m - 1];
        let left = y.lines[m - 1].shift(c, -1);
        sites.push(if y.is_particle(m, left)? { c } else { left });
    }
    Ok(BellCascade {
        first_line: 1,
        sites,
    })
}

fn sort_pair<C: Configuration>(line: &mut C, m: usize, site: i64, descending: bool) -> Result<()> {
    let boundary = || Error::Boundary { line: m, site };
    let right = line.offset(site).map_err(|_| boundary())?;
    let left = line
        .predecessor(site)
        .and_then(|l| line.offset(l))
        .map_err(|_| boundary())?;
    let sites = line.sites_mut();
    let out_of_order = if descending {
        sites[left] < sites[right]
    } else {
        sites[left] > sites[right]
    };
    if out_of_order {
        sites.swap(left, right);
    }
    Ok(())
}

/// `Y(x, i)`: the state after a bottom-line bell at `i`.
pub fn forward_jump<C: Configuration>(x: &MultiLineConfig<C>, i: i64) -> Result<MultiLineConfig<C>> {
    Ok(forward_jump_with_cascade(x, i)?.0)
}

/// [`forward_jump`] together with the cascade that drove it.
pub fn forward_jump_with_cascade<C: Configuration>(
    x: &MultiLineConfig<C>,
    i: i64,
) -> Result<(MultiLineConfig<C>, BellCascade)> {
    let cascade = bell_cascade(x, i)?;
    let mut y = x.clone();
    for m in 1..=x.n_lines() {
        sort_pair(&mut y.lines[m - 1], m, cascade.at(m), false)?;
    }
    Ok((y, cascade))
}

/// `X(y, j)`: the reverse-process state after a top-line bell at `j`.
pub fn reverse_jump<C: Configuration>(y: &MultiLineConfig<C>, j: i64) -> Result<MultiLineConfig<C>> {
    Ok(reverse_jump_with_cascade(y, j)?.0)
}

fn reverse_jump_with_cascade<C: Configuration>(
    y: &MultiLineConfig<C>,
    j: i64,
) -> Result<(MultiLineConfig<C>, BellCascade)> {
    let cascade = reverse_cascade(y, j)?;
    let mut x = y.clone();
    for m in 1..=y.n_lines() {
        sort_pair(&mut x.lines[m - 1], m, cascade.at(m), true)?;
    }
    Ok((x, cascade))
}

/// `T(x, i) = (Y(x, i), b_0(x, i))` on the ring.
pub fn forward_map(x: &MultiLineConfig<RingConfig>, i: i64) -> Result<(MultiLineConfig<RingConfig>, i64)> {
    let (y, cascade) = forward_jump_with_cascade(x, i)?;
    Ok((y, cascade.at(0)))
}

/// `T*(y, j) = (X(y, j), c_{n+1}(y, j))` on the ring; inverse of [`forward_map`].
pub fn reverse_map(y: &MultiLineConfig<RingConfig>, j: i64) -> Result<(MultiLineConfig<RingConfig>, i64)> {
    let (x, cascade) = reverse_jump_with_cascade(y, j)?;
    let n = y.n_lines();
    Ok((x, cascade.at(n + 1)))
}

/// Lines `v_1, ..., v_n` of the class assignment; line `m` carries classes `1..=m`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiTypeConfig<C = RingConfig> {
    lines: Vec<C>,
}

impl<C: Configuration> MultiTypeConfig<C> {
    pub fn lines(&self) -> &[C] {
        &self.lines
    }

    /// Line `m`, counted from 1.
    pub fn line(&self, m: usize) -> &C {
        &self.lines[m - 1]
    }

    /// The bottom line `v_n`, an `n`-type configuration.
    pub fn bottom(&self) -> &C {
        self.lines.last().expect("at least one line")
    }

    pub fn into_bottom(mut self) -> C {
        self.lines.pop().expect("at least one line")
    }
}

/// `V^{(N)}`: class assignment on the ring, `v_1 = x_1`, `v_{m+1} = F(v_m, x_{m+1})`.
///
/// Needs nondecreasing line counts so that every queue is feasible.
pub fn class_lines(x: &MultiLineConfig<RingConfig>) -> Result<MultiTypeConfig<RingConfig>> {
    let counts = x.line_counts();
    if counts.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Infeasible(format!(
            "line particle counts {counts:?} are not nondecreasing"
        )));
    }
    let mut lines: Vec<RingConfig> = Vec::with_capacity(x.n_lines());
    lines.push(x.lines[0].with_n_classes(1)?);
    for service in &x.lines[1..] {
        let next = f_ring(lines.last().expect("nonempty"), service)?;
        lines.push(next);
    }
    Ok(MultiTypeConfig { lines })
}

/// Result of running the tandem queues across a window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TandemRun {
    pub classes: MultiTypeConfig<WindowConfig>,
    /// `queue_states[m - 1][t]` is the state of queue `m` just after site
    /// offset `t`; queue `m` has arrivals `v_m` and services `x_{m+1}`.
    pub queue_states: Vec<Vec<QueueState>>,
}

/// Class assignment on a window with explicit initial queue states
/// (`inits[m - 1]` for queue `m`, serving `m` classes).
pub fn class_lines_window(
    x: &MultiLineConfig<WindowConfig>,
    inits: &[QueueState],
) -> Result<MultiTypeConfig<WindowConfig>> {
    Ok(run_tandem(x, inits)?.classes)
}

/// [`class_lines_window`] keeping every intermediate queue state.
pub fn run_tandem(x: &MultiLineConfig<WindowConfig>, inits: &[QueueState]) -> Result<TandemRun> {
    let n = x.n_lines();
    if inits.len() != n - 1 {
        return Err(Error::Shape(format!(
            "{} lines need {} initial queue states, got {}",
            n,
            n - 1,
            inits.len()
        )));
    }
    let first = &x.lines[0];
    let mut lines = vec![WindowConfig::new(first.lo(), first.sites().to_vec(), 1)?];
    let mut queue_states = Vec::with_capacity(n - 1);
    for (service, init) in x.lines[1..].iter().zip(inits) {
        let run = run_window(lines.last().expect("nonempty"), service, init)?;
        lines.push(run.departures);
        queue_states.push(run.states);
    }
    Ok(TandemRun {
        classes: MultiTypeConfig { lines },
        queue_states,
    })
}

/// One-step form of the realization property: for every line `m`, the class
/// assignment of `Y(x, i)` equals the class assignment of `x` after a bell at
/// `b_m(x, i)`.
pub fn commutation_check(x: &MultiLineConfig<RingConfig>, i: i64) -> Result<bool> {
    let before = class_lines(x)?;
    let (y, cascade) = forward_jump_with_cascade(x, i)?;
    let after = class_lines(&y)?;
    for m in 1..=x.n_lines() {
        let expected = before.line(m).swap_adjacent(cascade.at(m))?;
        if &expected != after.line(m) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// All binary ring lines on `n_sites` sites, by bitmask.
fn binary_line(n_sites: usize, mask: u64) -> RingConfig {
    let sites = (0..n_sites)
        .map(|j| {
            if mask >> j & 1 == 1 {
                ClassValue::FIRST
            } else {
                ClassValue::HOLE
            }
        })
        .collect();
    RingConfig::from_parts_unchecked(sites, 1)
}

/// Every multiline ring state with `n_lines` lines on `n_sites` sites
/// (`2^(n_sites * n_lines)` states; the product must stay below 64 bits).
pub fn enumerate_ring_states(
    n_sites: usize,
    n_lines: usize,
) -> Result<impl Iterator<Item = MultiLineConfig<RingConfig>>> {
    let bits = n_sites * n_lines;
    if n_sites == 0 || n_lines == 0 || bits >= 63 {
        return Err(Error::Parameter(format!(
            "cannot enumerate {n_lines} lines of {n_sites} sites"
        )));
    }
    let line_mask = (1u64 << n_sites) - 1;
    Ok((0..1u64 << bits).map(move |state| {
        let lines = (0..n_lines)
            .map(|m| binary_line(n_sites, state >> (m * n_sites) & line_mask))
            .collect();
        MultiLineConfig { lines }
    }))
}

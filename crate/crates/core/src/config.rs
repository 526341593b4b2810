//! Site values and configurations of the multi-type exclusion process.
//!
//! A site holds either a particle of class `1..=n` or a hole. Holes are
//! ordered above every class, so the elementary jump at a bell is simply
//! "sort the pair `(i-1, i)` into `(min, max)`".
//!
//! Two topologies are supported: the ring `Z_N` with sites `0..N` and
//! cyclic successor, and finite windows `[lo, hi]` of `Z`.

use std::fmt;

use crate::error::{Error, Result};

/// Content of one site: a particle class in `1..=254` or [`ClassValue::HOLE`].
///
/// The derived order is `1 < 2 < ... < HOLE`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassValue(u8);

impl ClassValue {
    pub const HOLE: ClassValue = ClassValue(u8::MAX);
    /// Largest representable class.
    pub const MAX_CLASS: usize = u8::MAX as usize - 1;
    /// Particle of class 1; also the "occupied" value of a binary line.
    pub const FIRST: ClassValue = ClassValue(1);

    /// Particle of class `k`. Panics unless `1 <= k <= MAX_CLASS`.
    pub fn class(k: usize) -> Self {
        Self::try_class(k).unwrap_or_else(|| panic!("class {k} out of range"))
    }

    pub fn try_class(k: usize) -> Option<Self> {
        (1..=Self::MAX_CLASS)
            .contains(&k)
            .then_some(ClassValue(k as u8))
    }

    pub fn is_hole(self) -> bool {
        self == Self::HOLE
    }

    pub fn is_particle(self) -> bool {
        !self.is_hole()
    }

    /// The class number, or `None` for a hole.
    pub fn class_index(self) -> Option<usize> {
        self.is_particle().then_some(self.0 as usize)
    }

    /// External integer code: 0 for a hole, `k` for class `k`.
    pub fn code(self) -> u32 {
        match self.class_index() {
            Some(k) => k as u32,
            None => 0,
        }
    }

    /// Inverse of [`ClassValue::code`], validated against `n_classes`.
    pub fn from_code(code: u32, n_classes: usize) -> Result<Self> {
        if code == 0 {
            return Ok(Self::HOLE);
        }
        if code as usize > n_classes || code as usize > Self::MAX_CLASS {
            return Err(Error::Domain {
                value: code,
                n_classes,
            });
        }
        Ok(ClassValue(code as u8))
    }

    /// `true` iff this value is a particle of class at most `k`.
    pub fn at_most(self, k: usize) -> bool {
        self.class_index().is_some_and(|c| c <= k)
    }
}

impl fmt::Debug for ClassValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for ClassValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.class_index() {
            Some(k) => write!(f, "{k}"),
            None => f.write_str("∞"),
        }
    }
}

/// Per-class particle counts `(p_1, ..., p_n)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Counts {
    p: Vec<usize>,
}

impl Counts {
    pub fn new(p: Vec<usize>) -> Self {
        Counts { p }
    }

    pub fn per_class(&self) -> &[usize] {
        &self.p
    }

    pub fn n_classes(&self) -> usize {
        self.p.len()
    }

    /// Prefix sums `q_m = p_1 + ... + p_m`.
    pub fn prefix_sums(&self) -> Vec<usize> {
        self.p
            .iter()
            .scan(0usize, |acc, &x| {
                *acc += x;
                Some(*acc)
            })
            .collect()
    }

    pub fn total(&self) -> usize {
        self.p.iter().sum()
    }

    /// Rebuild counts from nondecreasing prefix sums.
    pub fn from_prefix_sums(q: &[usize]) -> Result<Self> {
        let mut p = Vec::with_capacity(q.len());
        let mut prev = 0;
        for &qm in q {
            if qm < prev {
                return Err(Error::Infeasible(format!(
                    "line particle counts {q:?} are not nondecreasing"
                )));
            }
            p.push(qm - prev);
            prev = qm;
        }
        Ok(Counts { p })
    }

    /// Counts restricted to the first `m` classes.
    pub fn truncated(&self, m: usize) -> Counts {
        Counts::new(self.p[..m.min(self.p.len())].to_vec())
    }

    /// Checks `q_n <= n_sites` and that the class number is representable.
    pub fn check_fits(&self, n_sites: usize) -> Result<()> {
        if self.p.len() > ClassValue::MAX_CLASS {
            return Err(Error::Parameter(format!(
                "{} classes exceeds the maximum of {}",
                self.p.len(),
                ClassValue::MAX_CLASS
            )));
        }
        let total = self.p.iter().try_fold(0usize, |acc, &x| acc.checked_add(x));
        match total {
            Some(t) if t <= n_sites => Ok(()),
            _ => Err(Error::Infeasible(format!(
                "counts {:?} exceed {} sites",
                self.p, n_sites
            ))),
        }
    }
}

/// Shared behaviour of ring and window configurations.
///
/// Site labels are `i64`: `0..N` on a ring, `lo..=hi` on a window.
pub trait Configuration: Clone {
    fn sites(&self) -> &[ClassValue];
    fn sites_mut(&mut self) -> &mut [ClassValue];
    fn n_classes(&self) -> usize;

    /// Storage offset of a site label.
    fn offset(&self, site: i64) -> Result<usize>;
    /// Label of the site to the left.
    fn predecessor(&self, site: i64) -> Result<i64>;
    /// Label of the site to the right.
    fn successor(&self, site: i64) -> Result<i64>;

    /// Label `delta` steps to the right: wraps on a ring, plain addition on
    /// a window (the result may fall outside the window).
    fn shift(&self, site: i64, delta: i64) -> i64;

    /// `(first label, number of sites)`.
    fn extent(&self) -> (i64, usize);

    /// A configuration on the same sites with different values.
    fn with_sites(&self, sites: Vec<ClassValue>, n_classes: usize) -> Result<Self>;

    fn len(&self) -> usize {
        self.sites().len()
    }

    fn is_empty(&self) -> bool {
        self.sites().is_empty()
    }

    fn get(&self, site: i64) -> Result<ClassValue> {
        Ok(self.sites()[self.offset(site)?])
    }

    /// Sort the pair `(site-1, site)` in place. Returns whether anything moved.
    fn swap_adjacent_in_place(&mut self, site: i64) -> Result<bool> {
        let right = self.offset(site)?;
        let left = self.offset(self.predecessor(site)?)?;
        let sites = self.sites_mut();
        if sites[left] > sites[right] {
            sites.swap(left, right);
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// The configuration after a bell at `site`: `u^(site-1, site)`.
    fn swap_adjacent(&self, site: i64) -> Result<Self> {
        let mut out = self.clone();
        out.swap_adjacent_in_place(site)?;
        Ok(out)
    }

    /// Exact per-class counts; holes are not counted.
    fn class_counts(&self) -> Counts {
        let mut p = vec![0usize; self.n_classes()];
        for v in self.sites() {
            if let Some(k) = v.class_index() {
                p[k - 1] += 1;
            }
        }
        Counts::new(p)
    }

    /// Integer codes of the sites (0 for holes).
    fn codes(&self) -> Vec<u32> {
        self.sites().iter().map(|v| v.code()).collect()
    }
}

fn validate(sites: &[ClassValue], n_classes: usize) -> Result<()> {
    if n_classes > ClassValue::MAX_CLASS {
        return Err(Error::Parameter(format!(
            "{n_classes} classes exceeds the maximum of {}",
            ClassValue::MAX_CLASS
        )));
    }
    for v in sites {
        if let Some(k) = v.class_index() {
            if k > n_classes {
                return Err(Error::Domain {
                    value: k as u32,
                    n_classes,
                });
            }
        }
    }
    Ok(())
}

/// Configuration on the ring `Z_N`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RingConfig {
    sites: Vec<ClassValue>,
    n_classes: usize,
}

impl RingConfig {
    pub fn new(sites: Vec<ClassValue>, n_classes: usize) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Parameter("a ring needs at least one site".into()));
        }
        validate(&sites, n_classes)?;
        Ok(RingConfig { sites, n_classes })
    }

    /// Build from integer codes (0 = hole).
    pub fn from_codes(codes: &[u32], n_classes: usize) -> Result<Self> {
        let sites = codes
            .iter()
            .map(|&c| ClassValue::from_code(c, n_classes))
            .collect::<Result<Vec<_>>>()?;
        Self::new(sites, n_classes)
    }

    pub fn all_holes(n_sites: usize, n_classes: usize) -> Result<Self> {
        Self::new(vec![ClassValue::HOLE; n_sites], n_classes)
    }

    /// Binary configuration (class 1 or hole) with particles at `occupied`.
    pub fn binary(n_sites: usize, occupied: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut sites = vec![ClassValue::HOLE; n_sites];
        for j in occupied {
            if j >= n_sites {
                return Err(Error::Range {
                    index: j as i64,
                    lo: 0,
                    hi: n_sites as i64 - 1,
                });
            }
            sites[j] = ClassValue::FIRST;
        }
        Self::new(sites, 1)
    }

    pub(crate) fn from_parts_unchecked(sites: Vec<ClassValue>, n_classes: usize) -> Self {
        RingConfig { sites, n_classes }
    }

    /// Site indices holding particles (any class).
    pub fn occupied(&self) -> Vec<usize> {
        self.sites
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_particle())
            .map(|(j, _)| j)
            .collect()
    }

    /// Value at `j mod N`.
    pub fn at(&self, j: usize) -> ClassValue {
        self.sites[j % self.sites.len()]
    }

    pub fn into_sites(self) -> Vec<ClassValue> {
        self.sites
    }

    /// The same values relabelled with a different class bound.
    pub fn with_n_classes(&self, n_classes: usize) -> Result<Self> {
        Self::new(self.sites.clone(), n_classes)
    }
}

impl Configuration for RingConfig {
    fn sites(&self) -> &[ClassValue] {
        &self.sites
    }

    fn sites_mut(&mut self) -> &mut [ClassValue] {
        &mut self.sites
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn offset(&self, site: i64) -> Result<usize> {
        let n = self.sites.len() as i64;
        if (0..n).contains(&site) {
            Ok(site as usize)
        } else {
            Err(Error::Range {
                index: site,
                lo: 0,
                hi: n - 1,
            })
        }
    }

    fn predecessor(&self, site: i64) -> Result<i64> {
        let n = self.sites.len() as i64;
        self.offset(site)?;
        Ok((site + n - 1) % n)
    }

    fn successor(&self, site: i64) -> Result<i64> {
        let n = self.sites.len() as i64;
        self.offset(site)?;
        Ok((site + 1) % n)
    }

    fn shift(&self, site: i64, delta: i64) -> i64 {
        (site + delta).rem_euclid(self.sites.len() as i64)
    }

    fn extent(&self) -> (i64, usize) {
        (0, self.sites.len())
    }

    fn with_sites(&self, sites: Vec<ClassValue>, n_classes: usize) -> Result<Self> {
        if sites.len() != self.sites.len() {
            return Err(Error::Shape(format!(
                "ring of {} sites given {} values",
                self.sites.len(),
                sites.len()
            )));
        }
        Self::new(sites, n_classes)
    }
}

impl fmt::Debug for RingConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ring{:?}", self.sites)
    }
}

/// Finite window `[lo, lo + len - 1]` of a configuration on `Z`.
///
/// An empty window has `len == 0` and `hi == lo - 1`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WindowConfig {
    lo: i64,
    sites: Vec<ClassValue>,
    n_classes: usize,
}

impl WindowConfig {
    pub fn new(lo: i64, sites: Vec<ClassValue>, n_classes: usize) -> Result<Self> {
        validate(&sites, n_classes)?;
        if lo.checked_add(sites.len() as i64).is_none() {
            return Err(Error::Parameter("window extent overflows i64".into()));
        }
        Ok(WindowConfig {
            lo,
            sites,
            n_classes,
        })
    }

    pub fn from_codes(lo: i64, codes: &[u32], n_classes: usize) -> Result<Self> {
        let sites = codes
            .iter()
            .map(|&c| ClassValue::from_code(c, n_classes))
            .collect::<Result<Vec<_>>>()?;
        Self::new(lo, sites, n_classes)
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.sites.len() as i64 - 1
    }

    /// Same sites and labels, restricted to `[lo, hi]`.
    pub fn restrict(&self, lo: i64, hi: i64) -> Result<Self> {
        if lo < self.lo || hi > self.hi() || hi < lo - 1 {
            return Err(Error::Range {
                index: if lo < self.lo { lo } else { hi },
                lo: self.lo,
                hi: self.hi(),
            });
        }
        let start = (lo - self.lo) as usize;
        let end = (hi - self.lo + 1) as usize;
        Self::new(lo, self.sites[start..end].to_vec(), self.n_classes)
    }

    pub fn same_extent(&self, other: &WindowConfig) -> bool {
        self.lo == other.lo && self.sites.len() == other.sites.len()
    }
}

impl Configuration for WindowConfig {
    fn sites(&self) -> &[ClassValue] {
        &self.sites
    }

    fn sites_mut(&mut self) -> &mut [ClassValue] {
        &mut self.sites
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn offset(&self, site: i64) -> Result<usize> {
        if site >= self.lo && site <= self.hi() {
            Ok((site - self.lo) as usize)
        } else {
            Err(Error::Range {
                index: site,
                lo: self.lo,
                hi: self.hi(),
            })
        }
    }

    fn predecessor(&self, site: i64) -> Result<i64> {
        self.offset(site)?;
        self.offset(site - 1)?;
        Ok(site - 1)
    }

    fn successor(&self, site: i64) -> Result<i64> {
        self.offset(site)?;
        self.offset(site + 1)?;
        Ok(site + 1)
    }

    fn shift(&self, site: i64, delta: i64) -> i64 {
        site + delta
    }

    fn extent(&self) -> (i64, usize) {
        (self.lo, self.sites.len())
    }

    fn with_sites(&self, sites: Vec<ClassValue>, n_classes: usize) -> Result<Self> {
        if sites.len() != self.sites.len() {
            return Err(Error::Shape(format!(
                "window of {} sites given {} values",
                self.sites.len(),
                sites.len()
            )));
        }
        Self::new(self.lo, sites, n_classes)
    }
}

impl fmt::Debug for WindowConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Window@{}{:?}", self.lo, self.sites)
    }
}

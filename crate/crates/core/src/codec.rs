//! External encodings. Holes are written as `0` and classes as `1..=n`.
//!
//! Configurations: `{"topology": "ring" | "window", "lo": .., "classes": n,
//! "sites": [..]}` (`lo` only for windows). Multiline states:
//! `{"lines": [[0|1, ..], ..]}`. Weighted distributions are JSON with weights
//! and `M` as decimal strings, or CSV with one state per row. Traces are JSON
//! lines.
//!
//! Every `parse_*` function returns an error on malformed input and never
//! panics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{ClassValue, Configuration, Counts, RingConfig, WindowConfig};
use crate::error::{Error, Result};
use crate::exact::WeightedDistribution;
use crate::multiline::MultiLineConfig;
use crate::simulate::{Snapshot, Trace, TraceEvent};
use crate::stats::TestReport;

fn decode(msg: impl std::fmt::Display) -> Error {
    Error::Decode(msg.to_string())
}

/// A configuration of either topology.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnyConfig {
    Ring(RingConfig),
    Window(WindowConfig),
}

impl AnyConfig {
    pub fn codes(&self) -> Vec<u32> {
        match self {
            AnyConfig::Ring(u) => u.codes(),
            AnyConfig::Window(u) => u.codes(),
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            AnyConfig::Ring(u) => u.n_classes(),
            AnyConfig::Window(u) => u.n_classes(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    topology: String,
    #[serde(default)]
    lo: Option<i64>,
    classes: usize,
    sites: Vec<u32>,
}

pub fn ring_to_json(u: &RingConfig) -> Value {
    json!({"topology": "ring", "classes": u.n_classes(), "sites": u.codes()})
}

pub fn window_to_json(u: &WindowConfig) -> Value {
    json!({"topology": "window", "lo": u.lo(), "classes": u.n_classes(), "sites": u.codes()})
}

pub fn config_to_json(u: &AnyConfig) -> Value {
    match u {
        AnyConfig::Ring(u) => ring_to_json(u),
        AnyConfig::Window(u) => window_to_json(u),
    }
}

fn config_from_value(v: Value) -> Result<AnyConfig> {
    let doc: ConfigDoc = serde_json::from_value(v).map_err(decode)?;
    match (doc.topology.as_str(), doc.lo) {
        ("ring", None) => Ok(AnyConfig::Ring(RingConfig::from_codes(&doc.sites, doc.classes)?)),
        ("ring", Some(_)) => Err(decode("ring configurations take no \"lo\"")),
        ("window", Some(lo)) => Ok(AnyConfig::Window(WindowConfig::from_codes(
            lo,
            &doc.sites,
            doc.classes,
        )?)),
        ("window", None) => Err(decode("window configurations need \"lo\"")),
        (t, _) => Err(decode(format!("unknown topology {t:?}"))),
    }
}

pub fn parse_config_json(s: &str) -> Result<AnyConfig> {
    config_from_value(serde_json::from_str(s).map_err(decode)?)
}

pub fn parse_ring_json(s: &str) -> Result<RingConfig> {
    match parse_config_json(s)? {
        AnyConfig::Ring(u) => Ok(u),
        AnyConfig::Window(_) => Err(decode("expected a ring configuration")),
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MultiLineDoc {
    lines: Vec<Vec<u32>>,
}

pub fn multiline_to_json(x: &MultiLineConfig<RingConfig>) -> Value {
    json!({"lines": x.lines().iter().map(|l| l.codes()).collect::<Vec<_>>()})
}

pub fn parse_multiline_json(s: &str) -> Result<MultiLineConfig<RingConfig>> {
    let doc: MultiLineDoc = serde_json::from_str(s).map_err(decode)?;
    let lines = doc
        .lines
        .iter()
        .map(|l| RingConfig::from_codes(l, 1))
        .collect::<Result<Vec<_>>>()?;
    MultiLineConfig::new(lines)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateDoc {
    config: Vec<u32>,
    weight: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistributionDoc {
    #[serde(rename = "N")]
    n_sites: usize,
    n: usize,
    counts: Vec<usize>,
    #[serde(rename = "M")]
    denominator: String,
    states: Vec<StateDoc>,
}

pub fn distribution_to_json(dist: &WeightedDistribution) -> Value {
    let states: Vec<Value> = dist
        .weights()
        .iter()
        .map(|(u, w)| json!({"config": u.codes(), "weight": w.to_string()}))
        .collect();
    json!({
        "N": dist.n_sites(),
        "n": dist.n_classes(),
        "counts": dist.counts().per_class(),
        "M": dist.denominator().to_string(),
        "states": states,
    })
}

fn parse_u128(s: &str) -> Result<u128> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(decode(format!("{s:?} is not a decimal integer")));
    }
    s.parse().map_err(decode)
}

pub fn parse_distribution_json(s: &str) -> Result<WeightedDistribution> {
    let doc: DistributionDoc = serde_json::from_str(s).map_err(decode)?;
    if doc.counts.len() != doc.n {
        return Err(decode(format!(
            "{} counts given for {} classes",
            doc.counts.len(),
            doc.n
        )));
    }
    let mut weights = BTreeMap::new();
    for st in &doc.states {
        let u = RingConfig::from_codes(&st.config, doc.n)?;
        if weights.insert(u, parse_u128(&st.weight)?).is_some() {
            return Err(decode(format!("state {:?} listed twice", st.config)));
        }
    }
    WeightedDistribution::new(doc.n_sites, Counts::new(doc.counts), parse_u128(&doc.denominator)?, weights)
}

/// CSV with header `s0,..,s{N-1},weight`; the denominator is the weight sum.
pub fn distribution_to_csv(dist: &WeightedDistribution) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (0..dist.n_sites()).map(|j| format!("s{j}")).collect();
    header.push("weight".into());
    w.write_record(&header).expect("writing to memory");
    for (u, weight) in dist.weights() {
        let mut row: Vec<String> = u.codes().iter().map(u32::to_string).collect();
        row.push(weight.to_string());
        w.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("ascii output")
}

/// Inverse of [`distribution_to_csv`]; the class count is given separately.
pub fn parse_distribution_csv(s: &str, n_classes: usize) -> Result<WeightedDistribution> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(s.as_bytes());
    let header = r.headers().map_err(decode)?.clone();
    let n_sites = header.len().checked_sub(1).ok_or_else(|| decode("empty header"))?;
    for (j, h) in header.iter().enumerate() {
        let want = if j == n_sites { "weight".to_string() } else { format!("s{j}") };
        if h != want {
            return Err(decode(format!("header field {j} is {h:?}, expected {want:?}")));
        }
    }
    let mut weights = BTreeMap::new();
    let mut counts = None;
    let mut total: u128 = 0;
    for rec in r.records() {
        let rec = rec.map_err(decode)?;
        if rec.len() != n_sites + 1 {
            return Err(decode(format!("row has {} fields, expected {}", rec.len(), n_sites + 1)));
        }
        let codes = rec
            .iter()
            .take(n_sites)
            .map(|f| f.parse::<u32>().map_err(decode))
            .collect::<Result<Vec<_>>>()?;
        let u = RingConfig::from_codes(&codes, n_classes)?;
        let weight = parse_u128(&rec[n_sites])?;
        total = total.checked_add(weight).ok_or_else(|| Error::Overflow("weight sum".into()))?;
        counts.get_or_insert_with(|| u.class_counts());
        if weights.insert(u, weight).is_some() {
            return Err(decode(format!("state {codes:?} listed twice")));
        }
    }
    let counts = counts.ok_or_else(|| decode("no states"))?;
    WeightedDistribution::new(n_sites, counts, total, weights)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventDoc {
    t: f64,
    site: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotDoc {
    t: f64,
    snapshot: Value,
}

/// Events and snapshots of a trace as JSON lines, in time order, with
/// snapshot states written by `encode`.
pub fn trace_to_jsonl<S>(trace: &Trace<S>, encode: impl Fn(&S) -> Value) -> String {
    let mut out = String::new();
    let mut snaps = trace.snapshots.iter().peekable();
    for e in &trace.events {
        out.push_str(&json!({"t": e.t, "site": e.site}).to_string());
        out.push('\n');
        while let Some(s) = snaps.next_if(|s| s.t <= e.t) {
            out.push_str(&json!({"t": s.t, "snapshot": encode(&s.state)}).to_string());
            out.push('\n');
        }
    }
    for s in snaps {
        out.push_str(&json!({"t": s.t, "snapshot": encode(&s.state)}).to_string());
        out.push('\n');
    }
    out
}

/// Events and snapshots from [`trace_to_jsonl`] output. Blank lines are
/// skipped; times must be finite and strictly increasing across events.
pub fn parse_trace_jsonl(s: &str) -> Result<(Vec<TraceEvent>, Vec<Snapshot<RingConfig>>)> {
    let mut events: Vec<TraceEvent> = Vec::new();
    let mut snapshots = Vec::new();
    for (i, line) in s.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(line).map_err(|e| decode(format!("line {}: {e}", i + 1)))?;
        if v.get("snapshot").is_some() {
            let doc: SnapshotDoc = serde_json::from_value(v).map_err(decode)?;
            let state = match config_from_value(doc.snapshot)? {
                AnyConfig::Ring(u) => u,
                AnyConfig::Window(_) => return Err(decode("trace snapshots are rings")),
            };
            snapshots.push(Snapshot { t: doc.t, state });
        } else {
            let doc: EventDoc = serde_json::from_value(v).map_err(decode)?;
            if !doc.t.is_finite() || events.last().is_some_and(|e| e.t >= doc.t) {
                return Err(decode(format!("line {}: event times must increase", i + 1)));
            }
            events.push(TraceEvent { t: doc.t, site: doc.site });
        }
    }
    Ok((events, snapshots))
}

pub fn report_to_json(report: &TestReport) -> String {
    serde_json::to_string(report).expect("reports serialize")
}

pub fn parse_report_json(s: &str) -> Result<TestReport> {
    serde_json::from_str(s).map_err(decode)
}

/// Comma-separated nonnegative integers, e.g. `1,2,3`.
pub fn parse_int_list(s: &str) -> Result<Vec<usize>> {
    if s.trim().is_empty() {
        return Err(decode("empty list"));
    }
    s.split(',')
        .map(|f| {
            let f = f.trim();
            f.parse::<usize>()
                .map_err(|e| decode(format!("{f:?}: {e}")))
        })
        .collect()
}

/// Comma-separated finite reals, e.g. `0.2,0.3`.
pub fn parse_rate_list(s: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Err(decode("empty list"));
    }
    s.split(',')
        .map(|f| {
            let f = f.trim();
            match f.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                Ok(_) => Err(decode(format!("{f:?} is not finite"))),
                Err(e) => Err(decode(format!("{f:?}: {e}"))),
            }
        })
        .collect()
}

/// Parse a class string such as `3,2` into class values.
pub fn parse_class_list(s: &str, n_classes: usize) -> Result<Vec<ClassValue>> {
    parse_int_list(s)?
        .into_iter()
        .map(|c| {
            let code = u32::try_from(c).map_err(decode)?;
            ClassValue::from_code(code, n_classes)
        })
        .collect()
}

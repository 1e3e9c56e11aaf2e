//! Per-episode service metrics and their CSV form.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{node_loads, LinkReport};
use crate::config::{Phase, ScenarioConfig};
use crate::error::{Error, Result};
use crate::reward::jain_index;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyTag {
    Gmappo,
    Kmeans,
    Random,
}

impl PolicyTag {
    pub const ALL: [PolicyTag; 3] = [PolicyTag::Gmappo, PolicyTag::Kmeans, PolicyTag::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyTag::Gmappo => "gmappo",
            PolicyTag::Kmeans => "kmeans",
            PolicyTag::Random => "random",
        }
    }
}

impl fmt::Display for PolicyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown policy tag {s:?}")))
    }
}

/// Snapshot of the network at one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepMetrics {
    pub throughput_mbps: f64,
    pub jain_rate: f64,
    pub coverage: f64,
    pub min_rate_mbps: f64,
    pub load_jfi: f64,
}

/// One row of `metrics.csv`. Column order is the field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub episode: u64,
    pub phase: Phase,
    pub policy: PolicyTag,
    pub throughput_mbps: f64,
    pub jain_rate: f64,
    pub coverage: f64,
    pub min_rate_mbps: f64,
    pub load_jfi: f64,
    pub total_reward: f64,
    pub reward_variance_window: f64,
}

pub const CSV_HEADER: [&str; 10] = [
    "episode",
    "phase",
    "policy",
    "throughput_mbps",
    "jain_rate",
    "coverage",
    "min_rate_mbps",
    "load_jfi",
    "total_reward",
    "reward_variance_window",
];

pub fn compute_metrics(links: &[LinkReport], n_uavs: usize, cfg: &ScenarioConfig) -> StepMetrics {
    let rates: Vec<f64> = links.iter().map(|l| l.rate_bps).collect();
    let m = rates.len().max(1) as f64;
    let loads: Vec<f64> = node_loads(links, n_uavs).iter().map(|&c| c as f64).collect();
    StepMetrics {
        throughput_mbps: rates.iter().sum::<f64>() / 1e6,
        jain_rate: jain_index(&rates),
        coverage: rates.iter().filter(|&&r| r >= cfg.channel.rate_threshold_bps).count() as f64 / m,
        min_rate_mbps: rates.iter().copied().reduce(f64::min).unwrap_or(0.0) / 1e6,
        load_jfi: jain_index(&loads),
    }
}

/// Averages step metrics over the last `ceil(fraction * horizon)` steps.
#[derive(Debug, Clone)]
pub struct TailAverage {
    first_counted: usize,
    sum: StepMetrics,
    n: usize,
}

impl TailAverage {
    pub fn new(horizon: usize, fraction: f64) -> Self {
        let tail = ((fraction * horizon as f64).ceil() as usize).clamp(1, horizon.max(1));
        TailAverage {
            first_counted: horizon.saturating_sub(tail),
            sum: StepMetrics::default(),
            n: 0,
        }
    }

    /// `step` is the 0-based index of the step that produced `m`.
    pub fn record(&mut self, step: usize, m: StepMetrics) {
        if step < self.first_counted {
            return;
        }
        self.sum.throughput_mbps += m.throughput_mbps;
        self.sum.jain_rate += m.jain_rate;
        self.sum.coverage += m.coverage;
        self.sum.min_rate_mbps += m.min_rate_mbps;
        self.sum.load_jfi += m.load_jfi;
        self.n += 1;
    }

    pub fn mean(&self) -> StepMetrics {
        let k = self.n.max(1) as f64;
        StepMetrics {
            throughput_mbps: self.sum.throughput_mbps / k,
            jain_rate: self.sum.jain_rate / k,
            coverage: self.sum.coverage / k,
            min_rate_mbps: self.sum.min_rate_mbps / k,
            load_jfi: self.sum.load_jfi / k,
        }
    }
}

/// Population variance of the last `window` entries.
pub fn rolling_variance(history: &[f64], window: usize) -> f64 {
    let tail = &history[history.len().saturating_sub(window)..];
    if tail.is_empty() {
        return 0.0;
    }
    let n = tail.len() as f64;
    let mean = tail.iter().sum::<f64>() / n;
    tail.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

impl MetricsRecord {
    pub fn new(episode: u64, phase: Phase, policy: PolicyTag, m: StepMetrics, total_reward: f64, var: f64) -> Self {
        MetricsRecord {
            episode,
            phase,
            policy,
            throughput_mbps: m.throughput_mbps,
            jain_rate: m.jain_rate,
            coverage: m.coverage,
            min_rate_mbps: m.min_rate_mbps,
            load_jfi: m.load_jfi,
            total_reward,
            reward_variance_window: var,
        }
    }
}

pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> MetricsWriter<W> {
    /// Writes the header immediately.
    pub fn new(w: W) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        inner.write_record(CSV_HEADER)?;
        Ok(MetricsWriter { inner })
    }

    pub fn write(&mut self, rec: &MetricsRecord) -> Result<()> {
        self.inner.serialize(rec)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io("metrics", e))
    }
}

/// Parses a metrics file. Lines starting with `#` are skipped.
pub fn read_metrics<R: Read>(r: R) -> Result<Vec<MetricsRecord>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::InvalidArgument(format!("unexpected metrics header {headers:?}")));
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

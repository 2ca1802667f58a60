//! Run metrics: per-class latency statistics, classification rates,
//! delayed-frame counts and per-link utilization, with stable CSV output.

use crate::model::StreamKey;

use super::scenario::{Mode, Ns};

/// Everything recorded about one frame. The engine aggregates these
/// streaming; they are retained only when the frame trace is requested.
#[derive(Debug, Clone, Copy)]
pub struct FrameRecord {
    pub stream: StreamKey,
    pub truth_tt: bool,
    /// Priority tag applied at the ingress switch; `None` when the frame
    /// never reached it.
    pub tag: Option<u8>,
    pub created: Ns,
    pub delivered: Option<Ns>,
    pub dropped: bool,
    /// Ground-truth period for the delayed-frame deadline, periodic
    /// streams only.
    pub period: Option<Ns>,
    pub path_hash: u64,
}

#[derive(Debug, Clone, Default)]
pub struct LatencyStats {
    pub count: u64,
    pub min_ms: f64,
    pub mean_ms: f64,
    pub max_ms: f64,
    pub p50_ms: f64,
    pub p99_ms: f64,
}

impl LatencyStats {
    fn from_samples(samples: &mut [u64]) -> LatencyStats {
        if samples.is_empty() {
            return LatencyStats::default();
        }
        samples.sort_unstable();
        let count = samples.len() as u64;
        let sum: u128 = samples.iter().map(|&v| v as u128).sum();
        let to_ms = |ns: u64| ns as f64 / 1e6;
        let pct = |q: f64| {
            let idx = ((q * count as f64).ceil() as usize).clamp(1, samples.len()) - 1;
            to_ms(samples[idx])
        };
        LatencyStats {
            count,
            min_ms: to_ms(samples[0]),
            mean_ms: sum as f64 / count as f64 / 1e6,
            max_ms: to_ms(*samples.last().unwrap()),
            p50_ms: pct(0.5),
            p99_ms: pct(0.99),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ClassStats {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight: u64,
    pub latency: LatencyStats,
}

#[derive(Debug, Clone)]
pub struct UtilRow {
    pub period_index: u32,
    pub link: String,
    pub bytes: u64,
    pub utilization: f64,
    pub active_weight: f64,
}

#[derive(Debug, Clone)]
pub struct StreamSummary {
    pub key: StreamKey,
    pub truth_tt: bool,
    pub final_class: &'static str,
    pub sent: u64,
    pub delivered: u64,
    pub delayed: u64,
    pub mean_ms: f64,
    pub placed: bool,
}

/// Full report of one simulation run.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub mode: Mode,
    pub seed: u64,
    pub tt: ClassStats,
    pub be: ClassStats,
    /// Delivered periodic frames whose latency exceeded their period.
    pub delayed_tt: u64,
    /// Correctly tagged frames over all tagged frames.
    pub cr: f64,
    /// Correctly tagged best-effort frames over tagged best-effort frames.
    pub tnr: f64,
    pub unplaced_streams: u64,
    pub control_events: u64,
    pub migrations: u64,
    pub relearn_events: u64,
    pub streams: Vec<StreamSummary>,
    pub link_util: Vec<UtilRow>,
    pub frames: Vec<FrameRecord>,
}

/// Streaming aggregation of frame outcomes.
#[derive(Debug, Default)]
pub struct MetricsAccumulator {
    tt_sent: u64,
    be_sent: u64,
    tt_delivered: u64,
    be_delivered: u64,
    tt_dropped: u64,
    be_dropped: u64,
    tt_latencies: Vec<u64>,
    be_latencies: Vec<u64>,
    delayed_tt: u64,
    tagged: u64,
    tagged_correct: u64,
    be_tagged: u64,
    be_tagged_correct: u64,
}

impl MetricsAccumulator {
    pub fn on_sent(&mut self, truth_tt: bool) {
        if truth_tt {
            self.tt_sent += 1;
        } else {
            self.be_sent += 1;
        }
    }

    /// A frame was tagged at its ingress switch. Periodic frames are
    /// correctly classified when tagged high, best-effort ones when tagged
    /// low.
    pub fn on_tagged(&mut self, truth_tt: bool, tag: u8) {
        self.tagged += 1;
        let correct = if truth_tt { tag == 7 } else { tag != 7 };
        if correct {
            self.tagged_correct += 1;
        }
        if !truth_tt {
            self.be_tagged += 1;
            if correct {
                self.be_tagged_correct += 1;
            }
        }
    }

    pub fn on_dropped(&mut self, truth_tt: bool) {
        if truth_tt {
            self.tt_dropped += 1;
        } else {
            self.be_dropped += 1;
        }
    }

    pub fn on_delivered(&mut self, truth_tt: bool, latency: Ns, period: Option<Ns>) {
        if truth_tt {
            self.tt_delivered += 1;
            self.tt_latencies.push(latency);
            if let Some(p) = period {
                if latency > p {
                    self.delayed_tt += 1;
                }
            }
        } else {
            self.be_delivered += 1;
            self.be_latencies.push(latency);
        }
    }

    pub fn classification_rate(&self) -> f64 {
        if self.tagged == 0 {
            1.0
        } else {
            self.tagged_correct as f64 / self.tagged as f64
        }
    }

    pub fn true_negative_rate(&self) -> f64 {
        if self.be_tagged == 0 {
            1.0
        } else {
            self.be_tagged_correct as f64 / self.be_tagged as f64
        }
    }

    pub fn finish(mut self, mode: Mode, seed: u64) -> MetricsReport {
        let cr = self.classification_rate();
        let tnr = self.true_negative_rate();
        MetricsReport {
            mode,
            seed,
            tt: ClassStats {
                sent: self.tt_sent,
                delivered: self.tt_delivered,
                dropped: self.tt_dropped,
                in_flight: self.tt_sent - self.tt_delivered - self.tt_dropped,
                latency: LatencyStats::from_samples(&mut self.tt_latencies),
            },
            be: ClassStats {
                sent: self.be_sent,
                delivered: self.be_delivered,
                dropped: self.be_dropped,
                in_flight: self.be_sent - self.be_delivered - self.be_dropped,
                latency: LatencyStats::from_samples(&mut self.be_latencies),
            },
            delayed_tt: self.delayed_tt,
            cr,
            tnr,
            unplaced_streams: 0,
            control_events: 0,
            migrations: 0,
            relearn_events: 0,
            streams: Vec::new(),
            link_util: Vec::new(),
            frames: Vec::new(),
        }
    }
}

/// Builds the classification and delay metrics from complete frame records;
/// equivalent to the streaming path and usable on captured traces.
pub fn compute_metrics(records: &[FrameRecord], mode: Mode, seed: u64) -> MetricsReport {
    let mut acc = MetricsAccumulator::default();
    for r in records {
        acc.on_sent(r.truth_tt);
        if let Some(tag) = r.tag {
            acc.on_tagged(r.truth_tt, tag);
        }
        if let Some(d) = r.delivered {
            acc.on_delivered(r.truth_tt, d - r.created, r.period);
        } else if r.dropped {
            acc.on_dropped(r.truth_tt);
        }
    }
    acc.finish(mode, seed)
}

impl MetricsReport {
    /// Per-class metric rows. Byte-stable for a fixed scenario and seed.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from(
            "mode,seed,kind,sent,delivered,dropped,in_flight,min_ms,mean_ms,max_ms,p50_ms,\
             p99_ms,delayed,cr,tnr,unplaced,control_events,migrations,relearns\n",
        );
        for (kind, stats, delayed) in [("tt", &self.tt, self.delayed_tt), ("be", &self.be, 0u64)] {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{:.6},{:.6},{},{},{},{}\n",
                self.mode.as_str(),
                self.seed,
                kind,
                stats.sent,
                stats.delivered,
                stats.dropped,
                stats.in_flight,
                stats.latency.min_ms,
                stats.latency.mean_ms,
                stats.latency.max_ms,
                stats.latency.p50_ms,
                stats.latency.p99_ms,
                delayed,
                self.cr,
                self.tnr,
                self.unplaced_streams,
                self.control_events,
                self.migrations,
                self.relearn_events,
            ));
        }
        out
    }

    pub fn links_csv(&self) -> String {
        let mut out = String::from("period,link,bytes,utilization,active_weight\n");
        for row in &self.link_util {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6}\n",
                row.period_index, row.link, row.bytes, row.utilization, row.active_weight
            ));
        }
        out
    }

    pub fn streams_csv(&self) -> String {
        let mut out =
            String::from("stream,kind,final_class,sent,delivered,delayed,mean_ms,placed\n");
        for s in &self.streams {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.6},{}\n",
                s.key,
                if s.truth_tt { "tt" } else { "be" },
                s.final_class,
                s.sent,
                s.delivered,
                s.delayed,
                s.mean_ms,
                s.placed,
            ));
        }
        out
    }

    pub fn frames_csv(&self) -> String {
        let mut out = String::from("stream,tag,created_ns,delivered_ns,path_hash\n");
        for f in &self.frames {
            out.push_str(&format!(
                "{},{},{},{},{:016x}\n",
                f.stream,
                f.tag.map(|t| t.to_string()).unwrap_or_default(),
                f.created,
                f.delivered.map(|d| d.to_string()).unwrap_or_default(),
                f.path_hash,
            ));
        }
        out
    }

    /// Human-readable summary table.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "mode={} seed={} cr={:.4} tnr={:.4} delayed_tt={} unplaced={} control_events={} \
             migrations={} relearns={}\n",
            self.mode.as_str(),
            self.seed,
            self.cr,
            self.tnr,
            self.delayed_tt,
            self.unplaced_streams,
            self.control_events,
            self.migrations,
            self.relearn_events,
        ));
        out.push_str("kind    sent  delivered  dropped  min_ms   mean_ms  max_ms   p99_ms\n");
        for (kind, s) in [("tt", &self.tt), ("be", &self.be)] {
            out.push_str(&format!(
                "{:<5} {:>6} {:>10} {:>8} {:>8.3} {:>8.3} {:>8.3} {:>8.3}\n",
                kind,
                s.sent,
                s.delivered,
                s.dropped,
                s.latency.min_ms,
                s.latency.mean_ms,
                s.latency.max_ms,
                s.latency.p99_ms,
            ));
        }
        out
    }
}

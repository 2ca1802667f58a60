//! The event loop: hosts emitting frames, strict-priority output ports,
//! flow tables fed by the controller, ingress learning and flow migration.
//!
//! Determinism: one binary heap ordered by (time, sequence number); every
//! random draw comes from a per-stream generator seeded from the scenario
//! seed and the stream index, so interleaving never alters the traffic.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::dpce::Dpce;
use crate::learner::{StreamClass, StreamObservation, Transition};
use crate::model::{Demand, HostId, LinkId, Path, StreamKey, SwitchId, CLASS_TT};
use crate::tsor;

use super::metrics::{FrameRecord, MetricsAccumulator, MetricsReport, StreamSummary, UtilRow};
use super::scenario::{Mode, Ns, Scenario};
use super::SimError;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x1000_0000_01b3;

fn serialization_ns(bytes: u32, rate_bps: u64) -> Ns {
    ((bytes as u128) * 8 * 1_000_000_000 / rate_bps as u128) as Ns
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Ev {
    Emit {
        stream: u32,
    },
    PortEnqueue {
        frame: u32,
        port: u32,
    },
    TxDone {
        port: u32,
        frame: u32,
    },
    ArriveSwitch {
        frame: u32,
        sw: u32,
    },
    Delivered {
        frame: u32,
    },
    RuleActive {
        sw: u32,
        stream: u32,
        port: u32,
        tag_high: bool,
    },
    Place {
        stream: u32,
    },
    StatsTick,
}

#[derive(Debug)]
struct Frame {
    stream: u32,
    created: Ns,
    tag: Option<u8>,
    bytes: u32,
    path_hash: u64,
}

#[derive(Debug)]
struct Port {
    rate_bps: u64,
    /// What the transmitted frame reaches next.
    target: PortTarget,
    queues: [std::collections::VecDeque<u32>; 8],
    queued_bytes: [u64; 8],
    busy: bool,
}

#[derive(Debug, Clone, Copy)]
enum PortTarget {
    Switch(SwitchId),
    Host(#[allow(dead_code)] HostId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StreamKind {
    Tt { period: Ns, offset: Ns },
    Be,
}

struct StreamState {
    key: StreamKey,
    kind: StreamKind,
    src_host: HostId,
    ingress: SwitchId,
    egress: SwitchId,
    dst_host: HostId,
    rng: ChaCha8Rng,
    /// Priority applied to frames at the ingress switch.
    tag: u8,
    obs: Option<StreamObservation>,
    learned_period: Option<f64>,
    placed: Option<Path>,
    unplaced: bool,
    // per-stream accounting
    sent: u64,
    delivered: u64,
    delayed: u64,
    latency_sum: u128,
}

impl StreamState {
    fn truth_tt(&self) -> bool {
        matches!(self.kind, StreamKind::Tt { .. })
    }

    fn period_ns(&self) -> Option<Ns> {
        match self.kind {
            StreamKind::Tt { period, .. } => Some(period),
            StreamKind::Be => None,
        }
    }
}

pub(super) struct Engine<'a> {
    sc: &'a Scenario,
    now: Ns,
    seq: u64,
    queue: BinaryHeap<Reverse<(Ns, u64, Ev)>>,
    frames: Vec<Frame>,
    streams: Vec<StreamState>,
    ports: Vec<Port>,
    /// Flow table per switch: stream index -> egress port.
    tables: Vec<Vec<Option<u32>>>,
    /// Rules dispatched but not yet active, per (switch, stream).
    pending: BTreeMap<(u32, u32), Ns>,
    /// Frames held at a switch until the stream's rule activates.
    parked: BTreeMap<(u32, u32), Vec<u32>>,
    dpce: Dpce,
    /// Placed periodic demands in placement order.
    placements: Vec<(StreamKey, Demand, Path)>,
    acc: MetricsAccumulator,
    records: Vec<FrameRecord>,
    link_bytes: Vec<u64>,
    util_rows: Vec<UtilRow>,
    period_index: u32,
    control_events: u64,
    migrations: u64,
    relearns: u64,
}

impl<'a> Engine<'a> {
    pub(super) fn new(sc: &'a Scenario) -> Result<Self, SimError> {
        sc.validate()?;
        let topo = &sc.topology;
        let nl = topo.links().len();
        let nh = topo.num_hosts();

        let mut ports = Vec::with_capacity(nl + 2 * nh);
        for l in topo.links() {
            ports.push(Port {
                rate_bps: l.capacity_bps as u64,
                target: PortTarget::Switch(l.dst),
                queues: Default::default(),
                queued_bytes: [0; 8],
                busy: false,
            });
        }
        let host_rate = crate::model::DEFAULT_CAPACITY_BPS as u64;
        for h in 0..nh {
            let host = HostId(h as u32);
            ports.push(Port {
                rate_bps: host_rate,
                target: PortTarget::Switch(topo.host(host).switch),
                queues: Default::default(),
                queued_bytes: [0; 8],
                busy: false,
            });
        }
        for h in 0..nh {
            ports.push(Port {
                rate_bps: host_rate,
                target: PortTarget::Host(HostId(h as u32)),
                queues: Default::default(),
                queued_bytes: [0; 8],
                busy: false,
            });
        }

        let mut engine = Engine {
            sc,
            now: 0,
            seq: 0,
            queue: BinaryHeap::new(),
            frames: Vec::new(),
            streams: Vec::new(),
            ports,
            tables: vec![Vec::new(); topo.num_switches()],
            pending: BTreeMap::new(),
            parked: BTreeMap::new(),
            dpce: Dpce::new(topo, sc.dpce.clone()),
            placements: Vec::new(),
            acc: MetricsAccumulator::default(),
            records: Vec::new(),
            link_bytes: vec![0; nl],
            util_rows: Vec::new(),
            period_index: 0,
            control_events: 0,
            migrations: 0,
            relearns: 0,
        };
        engine.build_streams()?;
        for t in &mut engine.tables {
            t.resize(engine.streams.len(), None);
        }
        Ok(engine)
    }

    fn uplink(&self, h: HostId) -> u32 {
        (self.sc.topology.links().len() + h.index()) as u32
    }

    fn downlink(&self, h: HostId) -> u32 {
        (self.sc.topology.links().len() + self.sc.topology.num_hosts() + h.index()) as u32
    }

    /// Draws talker/listener pairs and per-stream seeds. Identical across
    /// modes for a fixed scenario seed.
    fn build_streams(&mut self) -> Result<(), SimError> {
        let topo = &self.sc.topology;
        let mut master = ChaCha8Rng::seed_from_u64(self.sc.seed);
        let nh = topo.num_hosts() as u32;
        let total = self.sc.tt_sources + self.sc.be_sources;
        for i in 0..total {
            let is_tt = i < self.sc.tt_sources;
            // Rejection-sample a pair on distinct switches.
            let (src, dst) = loop {
                let a = HostId(master.gen_range(0..nh));
                let b = HostId(master.gen_range(0..nh));
                if a != b && topo.host(a).switch != topo.host(b).switch {
                    break (a, b);
                }
            };
            let kind = if is_tt {
                let period = master.gen_range(self.sc.tt_period_min..=self.sc.tt_period_max);
                let offset = master.gen_range(0..period);
                StreamKind::Tt { period, offset }
            } else {
                StreamKind::Be
            };
            let stream_seed: u64 = master.gen();
            let obs = if self.sc.mode == Mode::ScTsn {
                Some(StreamObservation::new(i as u64, self.sc.learner.clone()))
            } else {
                None
            };
            self.streams.push(StreamState {
                key: StreamKey {
                    src,
                    dst,
                    index: i as u16,
                },
                kind,
                src_host: src,
                ingress: topo.host(src).switch,
                egress: topo.host(dst).switch,
                dst_host: dst,
                rng: ChaCha8Rng::seed_from_u64(stream_seed),
                tag: if self.sc.mode == Mode::Srp && is_tt {
                    7
                } else {
                    0
                },
                obs,
                learned_period: None,
                placed: None,
                unplaced: false,
                sent: 0,
                delivered: 0,
                delayed: 0,
                latency_sum: 0,
            });
        }
        Ok(())
    }

    fn schedule(&mut self, at: Ns, ev: Ev) {
        self.seq += 1;
        self.queue.push(Reverse((at, self.seq, ev)));
    }

    /// A-priori placement of every periodic demand before traffic starts.
    fn preplace_srp(&mut self) -> Result<(), SimError> {
        for s in 0..self.streams.len() {
            if !self.streams[s].truth_tt() {
                continue;
            }
            let period = self.streams[s].period_ns().unwrap() as f64 / 1e9;
            match self.place_stream(s, period)? {
                Some(path) => {
                    self.install_path_now(s as u32, &path);
                    self.streams[s].placed = Some(path);
                }
                None => {
                    self.streams[s].unplaced = true;
                }
            }
        }
        Ok(())
    }

    /// Runs the incremental optimization for one stream; returns its path
    /// or `None` when infeasible. The placement ledger is updated.
    fn place_stream(&mut self, s: usize, period_s: f64) -> Result<Option<Path>, SimError> {
        let topo = &self.sc.topology;
        let stream = &self.streams[s];
        let load = Demand::periodic_load_bps(self.sc.frame_bytes, period_s);
        let bound = tsor::default_latency_bound(topo, stream.ingress, stream.egress)
            .map_err(|e| SimError::Tsor(e.to_string()))?;
        let demand = Demand {
            id: stream.key,
            class: CLASS_TT,
            load_bps: load,
            latency_bound: bound,
            period: Some(period_s),
            frame_bytes: self.sc.frame_bytes,
        };
        let mut demands: Vec<Demand> = self.placements.iter().map(|(_, d, _)| d.clone()).collect();
        let existing: Vec<(StreamKey, Path)> = self
            .placements
            .iter()
            .map(|(k, _, p)| (*k, p.clone()))
            .collect();
        let replacing = self
            .placements
            .iter()
            .position(|(k, _, _)| *k == stream.key);
        match replacing {
            Some(i) => demands[i] = demand.clone(),
            None => demands.push(demand.clone()),
        }
        let inst = tsor::build_instance(topo, &demands, &existing, self.sc.k_paths)
            .map_err(|e| SimError::Tsor(e.to_string()))?;
        let target = replacing.unwrap_or(demands.len() - 1);
        match tsor::solve(&inst) {
            Ok(sol) => {
                let links: Vec<LinkId> = inst.candidates[target][sol.path_choice[target]]
                    .iter()
                    .map(|&e| LinkId(e as u32))
                    .collect();
                let path = Path::new(topo, links).map_err(SimError::Model)?;
                match replacing {
                    Some(i) => self.placements[i] = (demand.id, demand, path.clone()),
                    None => self.placements.push((demand.id, demand, path.clone())),
                }
                Ok(Some(path))
            }
            Err(tsor::TsorError::Infeasible(_)) => Ok(None),
            Err(e) => Err(SimError::Tsor(e.to_string())),
        }
    }

    /// Installs rules along a fabric path plus the listener downlink,
    /// synchronously (pre-start configuration).
    fn install_path_now(&mut self, stream: u32, path: &Path) {
        let topo = &self.sc.topology;
        let dst_host = self.streams[stream as usize].dst_host;
        for &l in path.links() {
            let sw = topo.link(l).src;
            self.tables[sw.index()][stream as usize] = Some(l.0);
        }
        let egress = path.target(topo);
        self.tables[egress.index()][stream as usize] = Some(self.downlink(dst_host));
    }

    /// Dispatches rule installation events for a path: all non-ingress
    /// switches first, the ingress rule one control delay later. Switches
    /// already holding the identical rule (a shared tail with the old path)
    /// are reused, not reinstalled; the ingress rule is always dispatched
    /// since it carries the switchover.
    fn install_path_ordered(&mut self, stream: u32, path: &Path, tag_high: bool) {
        let topo = &self.sc.topology;
        let dst_host = self.streams[stream as usize].dst_host;
        let ingress = path.source(topo);
        let egress = path.target(topo);
        let t_rest = self.now + self.sc.control_delay;
        let t_ingress = self.now + 2 * self.sc.control_delay;
        let mut rules: Vec<(SwitchId, u32)> = path
            .links()
            .iter()
            .map(|&l| (topo.link(l).src, l.0))
            .collect();
        rules.push((egress, self.downlink(dst_host)));
        for (sw, port) in rules {
            let at_ingress = sw == ingress;
            if !at_ingress && self.tables[sw.index()][stream as usize] == Some(port) {
                continue;
            }
            let at = if at_ingress { t_ingress } else { t_rest };
            self.pending.insert((sw.0, stream), at);
            self.schedule(
                at,
                Ev::RuleActive {
                    sw: sw.0,
                    stream,
                    port,
                    tag_high: tag_high && at_ingress,
                },
            );
            self.control_events += 1;
        }
    }

    /// Default-path rule installation triggered by a table miss: the
    /// controller pushes the current default route for the stream's pair
    /// onto every switch from the ingress to the listener.
    fn install_default_route(&mut self, stream: u32) -> Result<(), SimError> {
        let s = &self.streams[stream as usize];
        let (ingress, egress) = (s.ingress, s.egress);
        let path = self.dpce.route(ingress, egress).cloned().ok_or_else(|| {
            SimError::Internal(format!(
                "no default route between {} and {}",
                self.sc.topology.switch_name(ingress),
                self.sc.topology.switch_name(egress)
            ))
        })?;
        let topo = &self.sc.topology;
        let dst_host = s.dst_host;
        let at = self.now + self.sc.control_delay;
        let mut rules: Vec<(SwitchId, u32)> = path
            .links()
            .iter()
            .map(|&l| (topo.link(l).src, l.0))
            .collect();
        rules.push((egress, self.downlink(dst_host)));
        for (sw, port) in rules {
            self.pending.insert((sw.0, stream), at);
            self.schedule(
                at,
                Ev::RuleActive {
                    sw: sw.0,
                    stream,
                    port,
                    tag_high: false,
                },
            );
        }
        self.control_events += 1;
        Ok(())
    }

    /// Starts transmission of the highest-priority queued frame if the port
    /// is idle.
    fn try_start(&mut self, port: u32) {
        let (frame, ser) = {
            let p = &mut self.ports[port as usize];
            if p.busy {
                return;
            }
            let mut picked = None;
            for q in (0..8).rev() {
                if let Some(&frame) = p.queues[q].front() {
                    picked = Some((q, frame));
                    break;
                }
            }
            let Some((q, frame)) = picked else { return };
            let bytes = self.frames[frame as usize].bytes;
            p.queues[q].pop_front();
            p.queued_bytes[q] -= bytes as u64;
            p.busy = true;
            (frame, serialization_ns(bytes, p.rate_bps))
        };
        self.schedule(self.now + ser, Ev::TxDone { port, frame });
    }

    fn enqueue(&mut self, frame: u32, port: u32) {
        let tag = self.frames[frame as usize].tag.unwrap_or(0) as usize;
        let bytes = self.frames[frame as usize].bytes as u64;
        let p = &mut self.ports[port as usize];
        if p.queued_bytes[tag] + bytes > self.sc.queue_limit_bytes as u64 {
            let stream = self.frames[frame as usize].stream;
            let truth = self.streams[stream as usize].truth_tt();
            self.acc.on_dropped(truth);
            if self.sc.frame_trace {
                self.records[frame as usize].dropped = true;
            }
            return;
        }
        p.queues[tag].push_back(frame);
        p.queued_bytes[tag] += bytes;
        self.try_start(port);
    }

    fn on_emit(&mut self, stream: u32) {
        let frame = self.frames.len() as u32;
        let bytes = self.sc.frame_bytes;
        self.frames.push(Frame {
            stream,
            created: self.now,
            tag: None,
            bytes,
            path_hash: FNV_OFFSET,
        });
        let mean_ia = self.sc.be_mean_interarrival;
        let (truth, uplink, next) = {
            let s = &mut self.streams[stream as usize];
            s.sent += 1;
            let next = match s.kind {
                StreamKind::Tt { period, .. } => self.now + period,
                StreamKind::Be => {
                    let exp = rand_distr::Exp::new(1.0 / mean_ia).unwrap();
                    self.now + (s.rng.sample::<f64, _>(exp) * 1e9).round() as Ns
                }
            };
            (s.truth_tt(), s.src_host, next)
        };
        let uplink = self.uplink(uplink);
        self.acc.on_sent(truth);
        if self.sc.frame_trace {
            self.records.push(FrameRecord {
                stream: self.streams[stream as usize].key,
                truth_tt: truth,
                tag: None,
                created: self.now,
                delivered: None,
                dropped: false,
                period: self.streams[stream as usize].period_ns(),
                path_hash: 0,
            });
        }
        if next < self.sc.duration {
            self.schedule(next, Ev::Emit { stream });
        }
        self.enqueue(frame, uplink);
    }

    fn on_tx_done(&mut self, port: u32, frame: u32) {
        let target = self.ports[port as usize].target;
        self.ports[port as usize].busy = false;
        if (port as usize) < self.link_bytes.len() {
            self.link_bytes[port as usize] += self.frames[frame as usize].bytes as u64;
        }
        {
            let f = &mut self.frames[frame as usize];
            f.path_hash = (f.path_hash ^ port as u64).wrapping_mul(FNV_PRIME);
        }
        match target {
            PortTarget::Switch(sw) => {
                self.schedule(
                    self.now + self.sc.prop_delay,
                    Ev::ArriveSwitch { frame, sw: sw.0 },
                );
            }
            PortTarget::Host(_) => {
                self.schedule(self.now + self.sc.prop_delay, Ev::Delivered { frame });
            }
        }
        self.try_start(port);
    }

    fn on_arrive_switch(&mut self, frame: u32, sw: u32) -> Result<(), SimError> {
        let stream = self.frames[frame as usize].stream;
        let at_ingress = self.streams[stream as usize].ingress.0 == sw;

        if at_ingress && self.frames[frame as usize].tag.is_none() {
            // Ingress learning, self-configuring mode only.
            if self.streams[stream as usize].obs.is_some() {
                self.observe_arrival(stream)?;
            }
            let tag = match self.sc.mode {
                Mode::ScTsn => self.streams[stream as usize].tag,
                Mode::Srp => {
                    if self.streams[stream as usize].truth_tt() {
                        7
                    } else {
                        0
                    }
                }
            };
            self.frames[frame as usize].tag = Some(tag);
            let truth = self.streams[stream as usize].truth_tt();
            self.acc.on_tagged(truth, tag);
            if self.sc.frame_trace {
                self.records[frame as usize].tag = Some(tag);
            }
        }

        match self.tables[sw as usize][stream as usize] {
            Some(port) => {
                self.schedule(
                    self.now + self.sc.proc_delay,
                    Ev::PortEnqueue { frame, port },
                );
            }
            None => {
                let key = (sw, stream);
                let pending = self.pending.contains_key(&key);
                self.parked.entry(key).or_default().push(frame);
                if !pending {
                    self.install_default_route(stream)?;
                }
            }
        }
        Ok(())
    }

    /// Feeds the ingress learner and reacts to classification transitions.
    fn observe_arrival(&mut self, stream: u32) -> Result<(), SimError> {
        let t = self.now as f64 / 1e9;
        let transition = {
            let obs = self.streams[stream as usize].obs.as_mut().unwrap();
            obs.record_arrival(t)
                .map_err(|e| SimError::Learner(e.to_string()))?
        };
        match transition {
            Some(Transition::ClassifiedTt(est)) => {
                self.streams[stream as usize].learned_period = Some(est.period);
                self.schedule(self.now + self.sc.solve_delay, Ev::Place { stream });
            }
            Some(Transition::ClassifiedBe) => {}
            Some(Transition::Relearn) => {
                self.relearns += 1;
                self.streams[stream as usize].tag = 0;
            }
            None => {}
        }
        Ok(())
    }

    fn on_place(&mut self, stream: u32) -> Result<(), SimError> {
        let s = stream as usize;
        // The stream may have deviated between classification and this
        // event; place only if it is still considered periodic.
        let still_tt = self.streams[s]
            .obs
            .as_ref()
            .is_some_and(|o| o.class() == StreamClass::Tt);
        if !still_tt {
            return Ok(());
        }
        let Some(period) = self.streams[s].learned_period else {
            return Ok(());
        };
        match self.place_stream(s, period)? {
            Some(path) => {
                let same = self.streams[s].placed.as_ref() == Some(&path);
                if same {
                    // Already routed there; just restore the high tag.
                    self.streams[s].tag = 7;
                } else {
                    self.migrations += 1;
                    self.install_path_ordered(stream, &path, true);
                    self.streams[s].placed = Some(path);
                }
                self.streams[s].unplaced = false;
            }
            None => {
                // No feasible placement: the stream keeps its default path
                // but carries its classified priority.
                self.streams[s].unplaced = true;
                self.streams[s].tag = 7;
            }
        }
        Ok(())
    }

    fn on_rule_active(&mut self, sw: u32, stream: u32, port: u32, tag_high: bool) {
        self.tables[sw as usize][stream as usize] = Some(port);
        self.pending.remove(&(sw, stream));
        if tag_high {
            self.streams[stream as usize].tag = 7;
        }
        if let Some(waiting) = self.parked.remove(&(sw, stream)) {
            for frame in waiting {
                self.schedule(
                    self.now + self.sc.proc_delay,
                    Ev::PortEnqueue { frame, port },
                );
            }
        }
    }

    fn on_delivered(&mut self, frame: u32) {
        let f = &self.frames[frame as usize];
        let stream = f.stream;
        let latency = self.now - f.created;
        let s = &mut self.streams[stream as usize];
        s.delivered += 1;
        s.latency_sum += latency as u128;
        let period = s.period_ns();
        if let Some(p) = period {
            if latency > p {
                s.delayed += 1;
            }
        }
        let truth = s.truth_tt();
        self.acc.on_delivered(truth, latency, period);
        if self.sc.frame_trace {
            let rec = &mut self.records[frame as usize];
            rec.delivered = Some(self.now);
            rec.path_hash = f.path_hash;
        }
    }

    fn on_stats_tick(&mut self) -> Result<(), SimError> {
        let topo = &self.sc.topology;
        let period_s = self.sc.stats_period as f64 / 1e9;
        let utilization: Vec<f64> = self
            .link_bytes
            .iter()
            .enumerate()
            .map(|(l, &bytes)| {
                let cap = topo.links()[l].capacity_bps;
                (bytes as f64 * 8.0 / (cap * period_s)).min(1.0)
            })
            .collect();
        let delta = self
            .dpce
            .observe_period(topo, &utilization)
            .map_err(|e| SimError::Internal(e.to_string()))?;
        for (l, &bytes) in self.link_bytes.iter().enumerate() {
            self.util_rows.push(UtilRow {
                period_index: self.period_index,
                link: topo.link_name(LinkId(l as u32)),
                bytes,
                utilization: utilization[l],
                active_weight: self.dpce.link_state(l).active,
            });
        }
        self.link_bytes.iter_mut().for_each(|b| *b = 0);
        self.period_index += 1;

        if !delta.changed.is_empty() {
            // Re-route the default-routed streams whose pair moved.
            let changed: BTreeMap<(SwitchId, SwitchId), Path> = delta.changed.into_iter().collect();
            for s in 0..self.streams.len() {
                let stream = &self.streams[s];
                if stream.placed.is_some() && !stream.unplaced {
                    continue;
                }
                // Only streams with rules already installed need an update.
                if self.tables[stream.ingress.index()][s].is_none() {
                    continue;
                }
                if let Some(path) = changed.get(&(stream.ingress, stream.egress)) {
                    let path = path.clone();
                    self.install_path_ordered(s as u32, &path, false);
                }
            }
        }
        let next = self.now + self.sc.stats_period;
        if next <= self.sc.duration {
            self.schedule(next, Ev::StatsTick);
        }
        Ok(())
    }

    pub(super) fn run(mut self) -> Result<MetricsReport, SimError> {
        if self.sc.mode == Mode::Srp {
            self.preplace_srp()?;
        }
        for s in 0..self.streams.len() {
            let at = match self.streams[s].kind {
                StreamKind::Tt { offset, .. } => offset,
                StreamKind::Be => {
                    let exp = rand_distr::Exp::new(1.0 / self.sc.be_mean_interarrival).unwrap();
                    (self.streams[s].rng.sample::<f64, _>(exp) * 1e9).round() as Ns
                }
            };
            if at < self.sc.duration {
                self.schedule(at, Ev::Emit { stream: s as u32 });
            }
        }
        self.schedule(self.sc.stats_period, Ev::StatsTick);

        while let Some(Reverse((at, _, ev))) = self.queue.pop() {
            if at > self.sc.duration {
                break;
            }
            self.now = at;
            match ev {
                Ev::Emit { stream } => self.on_emit(stream),
                Ev::PortEnqueue { frame, port } => self.enqueue(frame, port),
                Ev::TxDone { port, frame } => self.on_tx_done(port, frame),
                Ev::ArriveSwitch { frame, sw } => self.on_arrive_switch(frame, sw)?,
                Ev::Delivered { frame } => self.on_delivered(frame),
                Ev::RuleActive {
                    sw,
                    stream,
                    port,
                    tag_high,
                } => self.on_rule_active(sw, stream, port, tag_high),
                Ev::Place { stream } => self.on_place(stream)?,
                Ev::StatsTick => self.on_stats_tick()?,
            }
        }

        let unplaced = self.streams.iter().filter(|s| s.unplaced).count() as u64;
        let streams: Vec<StreamSummary> = self
            .streams
            .iter()
            .map(|s| StreamSummary {
                key: s.key,
                truth_tt: s.truth_tt(),
                final_class: match (&s.obs, self.sc.mode) {
                    (Some(o), _) => match o.class() {
                        StreamClass::Tt => "tt",
                        StreamClass::Be => "be",
                        StreamClass::Undecided => "undecided",
                    },
                    (None, _) => {
                        if s.truth_tt() {
                            "tt"
                        } else {
                            "be"
                        }
                    }
                },
                sent: s.sent,
                delivered: s.delivered,
                delayed: s.delayed,
                mean_ms: if s.delivered > 0 {
                    s.latency_sum as f64 / s.delivered as f64 / 1e6
                } else {
                    0.0
                },
                placed: s.placed.is_some(),
            })
            .collect();

        let mut report = self.acc.finish(self.sc.mode, self.sc.seed);
        report.unplaced_streams = unplaced;
        report.control_events = self.control_events;
        report.migrations = self.migrations;
        report.relearn_events = self.relearns;
        report.streams = streams;
        report.link_util = self.util_rows;
        report.frames = self.records;
        Ok(report)
    }
}

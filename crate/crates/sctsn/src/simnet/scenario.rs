//! Scenario definition and file format.
//!
//! ```text
//! version 1
//! topology topologies/getnet.topo   # path relative to this file
//! mode sctsn                        # or srp
//! seed 1
//! duration_s 100
//! stats_period_s 2
//! tt_sources 23
//! tt_period_min_ms 2
//! tt_period_max_ms 20
//! be_sources 11
//! be_mean_interarrival_ms 100
//! frame_bytes 1522
//! k_paths 8
//! control_delay_ms 1
//! switch_proc_us 5
//! prop_delay_us 1
//! queue_limit_kib 512
//! solve_delay_ms 0
//! ```
//!
//! Only `version`, `topology` and `mode` are mandatory; everything else has
//! the defaults shown.

use std::path::Path as FsPath;

use crate::dpce::DpceConfig;
use crate::learner::LearnerConfig;
use crate::model::{classify_switch_roles, load_topology, Role, Topology};

use super::SimError;

/// Simulation time in nanoseconds.
pub type Ns = u64;

pub const MS: Ns = 1_000_000;
pub const US: Ns = 1_000;
pub const SEC: Ns = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Self-configuring: streams start untagged on default paths, edge
    /// switches learn their periodicity, classified streams migrate to
    /// optimized paths.
    ScTsn,
    /// A-priori baseline: every periodic stream is known and placed on its
    /// optimized path before traffic starts.
    Srp,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::ScTsn => "sctsn",
            Mode::Srp => "srp",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "sctsn" => Some(Mode::ScTsn),
            "srp" => Some(Mode::Srp),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub topology: Topology,
    pub mode: Mode,
    pub seed: u64,
    pub duration: Ns,
    pub stats_period: Ns,
    pub tt_sources: u32,
    pub tt_period_min: Ns,
    pub tt_period_max: Ns,
    pub be_sources: u32,
    /// Mean of the exponential interarrival of best-effort sources, seconds.
    pub be_mean_interarrival: f64,
    pub frame_bytes: u32,
    pub k_paths: usize,
    pub control_delay: Ns,
    pub proc_delay: Ns,
    pub prop_delay: Ns,
    pub queue_limit_bytes: u32,
    /// Virtual time charged per optimization solve before a migration is
    /// dispatched.
    pub solve_delay: Ns,
    pub learner: LearnerConfig,
    pub dpce: DpceConfig,
    /// Retain per-frame records for the frame-level trace output.
    pub frame_trace: bool,
}

impl Scenario {
    pub fn new(topology: Topology, mode: Mode, seed: u64) -> Scenario {
        Scenario {
            topology,
            mode,
            seed,
            duration: 100 * SEC,
            stats_period: 2 * SEC,
            tt_sources: 0,
            tt_period_min: 2 * MS,
            tt_period_max: 20 * MS,
            be_sources: 0,
            be_mean_interarrival: 0.1,
            frame_bytes: 1522,
            k_paths: crate::model::DEFAULT_K_PATHS,
            control_delay: MS,
            proc_delay: 5 * US,
            prop_delay: US,
            queue_limit_bytes: 512 * 1024,
            solve_delay: 0,
            learner: LearnerConfig::default(),
            dpce: DpceConfig::default(),
            frame_trace: false,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !self.topology.roles_assigned() {
            return Err(SimError::Scenario("topology roles not assigned".into()));
        }
        if self.duration <= self.stats_period {
            return Err(SimError::Scenario(
                "duration must exceed the statistics period".into(),
            ));
        }
        if self.be_sources > 0
            && (self.be_mean_interarrival.is_nan() || self.be_mean_interarrival <= 0.0)
        {
            return Err(SimError::Scenario(
                "best-effort mean interarrival must be positive".into(),
            ));
        }
        if self.tt_sources > 0
            && (self.tt_period_min == 0 || self.tt_period_max < self.tt_period_min)
        {
            return Err(SimError::Scenario(
                "bad periodic-source period range".into(),
            ));
        }
        if self.frame_bytes == 0 {
            return Err(SimError::Scenario("frame size must be positive".into()));
        }
        if self.k_paths == 0 {
            return Err(SimError::Scenario("k_paths must be at least 1".into()));
        }
        let hosted_switches: std::collections::BTreeSet<_> =
            self.topology.hosts().iter().map(|h| h.switch).collect();
        if (self.tt_sources > 0 || self.be_sources > 0) && hosted_switches.len() < 2 {
            return Err(SimError::Scenario(
                "sources need hosts on at least two distinct edge switches".into(),
            ));
        }
        for s in &hosted_switches {
            if self.topology.role(*s) != Some(Role::Edge) {
                return Err(SimError::Scenario(format!(
                    "host attached to non-edge switch `{}`",
                    self.topology.switch_name(*s)
                )));
            }
        }
        Ok(())
    }

    /// Loads a scenario file; the topology path inside is resolved relative
    /// to the scenario file's directory.
    pub fn from_file(path: &FsPath) -> Result<Scenario, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Scenario(format!("cannot read {}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(FsPath::new("."));
        Scenario::from_str_with_dir(&text, dir)
    }

    pub fn from_str_with_dir(text: &str, dir: &FsPath) -> Result<Scenario, SimError> {
        let err = |line: usize, msg: String| SimError::Scenario(format!("line {line}: {msg}"));
        let mut topology: Option<Topology> = None;
        let mut mode: Option<Mode> = None;
        let mut saw_version = false;
        let mut sc = Scenario::new(Topology::new(), Mode::ScTsn, 0);
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| err(lineno, format!("expected `key value`, got `{line}`")))?;
            let value = value.trim();
            let ns_from_ms = |v: &str| -> Result<Ns, SimError> {
                let ms: f64 = v
                    .parse()
                    .map_err(|_| err(lineno, format!("bad number `{v}`")))?;
                Ok((ms * MS as f64).round() as Ns)
            };
            let ns_from_us = |v: &str| -> Result<Ns, SimError> {
                let us: f64 = v
                    .parse()
                    .map_err(|_| err(lineno, format!("bad number `{v}`")))?;
                Ok((us * US as f64).round() as Ns)
            };
            match key {
                "version" => {
                    if value != "1" {
                        return Err(err(lineno, "unsupported version".into()));
                    }
                    saw_version = true;
                }
                "topology" => {
                    let tp = dir.join(value);
                    let topo = load_topology(&tp)?;
                    topology = Some(classify_switch_roles(topo));
                }
                "mode" => {
                    mode = Some(
                        Mode::parse(value)
                            .ok_or_else(|| err(lineno, format!("unknown mode `{value}`")))?,
                    );
                }
                "seed" => {
                    sc.seed = value
                        .parse()
                        .map_err(|_| err(lineno, format!("bad seed `{value}`")))?;
                }
                "duration_s" => {
                    let s: f64 = value
                        .parse()
                        .map_err(|_| err(lineno, format!("bad number `{value}`")))?;
                    sc.duration = (s * SEC as f64).round() as Ns;
                }
                "stats_period_s" => {
                    let s: f64 = value
                        .parse()
                        .map_err(|_| err(lineno, format!("bad number `{value}`")))?;
                    sc.stats_period = (s * SEC as f64).round() as Ns;
                }
                "tt_sources" => {
                    sc.tt_sources = value
                        .parse()
                        .map_err(|_| err(lineno, format!("bad count `{value}`")))?;
                }
                "tt_period_min_ms" => sc.tt_period_min = ns_from_ms(value)?,
                "tt_period_max_ms" => sc.tt_period_max = ns_from_ms(value)?,
                "be_sources" => {
                    sc.be_sources = value
                        .parse()
                        .map_err(|_| err(lineno, format!("bad count `{value}`")))?;
                }
                "be_mean_interarrival_ms" => {
                    let ms: f64 = value
                        .parse()
                        .map_err(|_| err(lineno, format!("bad number `{value}`")))?;
                    sc.be_mean_interarrival = ms / 1000.0;
                }
                "frame_bytes" => {
                    sc.frame_bytes = value
                        .parse()
                        .map_err(|_| err(lineno, format!("bad size `{value}`")))?;
                }
                "k_paths" => {
                    sc.k_paths = value
                        .parse()
                        .map_err(|_| err(lineno, format!("bad count `{value}`")))?;
                }
                "control_delay_ms" => sc.control_delay = ns_from_ms(value)?,
                "switch_proc_us" => sc.proc_delay = ns_from_us(value)?,
                "prop_delay_us" => sc.prop_delay = ns_from_us(value)?,
                "queue_limit_kib" => {
                    let kib: u32 = value
                        .parse()
                        .map_err(|_| err(lineno, format!("bad size `{value}`")))?;
                    sc.queue_limit_bytes = kib * 1024;
                }
                "solve_delay_ms" => sc.solve_delay = ns_from_ms(value)?,
                "frame_trace" => {
                    sc.frame_trace = match value {
                        "true" | "1" => true,
                        "false" | "0" => false,
                        _ => return Err(err(lineno, format!("bad flag `{value}`"))),
                    };
                }
                _ => return Err(err(lineno, format!("unknown key `{key}`"))),
            }
        }
        if !saw_version {
            return Err(SimError::Scenario("missing `version 1` header".into()));
        }
        sc.topology =
            topology.ok_or_else(|| SimError::Scenario("missing `topology` entry".into()))?;
        sc.mode = mode.ok_or_else(|| SimError::Scenario("missing `mode` entry".into()))?;
        sc.validate()?;
        Ok(sc)
    }
}

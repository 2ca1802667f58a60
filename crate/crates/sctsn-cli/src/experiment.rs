//! Experiment grids: a base scenario crossed with sweep axes and repeated
//! over seeds.
//!
//! Format:
//!
//! ```text
//! version 1
//! scenario scenarios/integra_base.scn
//! seeds 1 2 3 4 5
//! axis mu_ms 10 20 50 100 1000
//! axis mode sctsn srp
//! axis tt_count 13 26 53 107
//! axis topology topologies/getnet.topo topologies/integra.topo
//! ```
//!
//! Axes are optional; omitted axes keep the base scenario's value. Cells
//! run concurrently, each in its own simulator world; failures are recorded
//! in the row and the sweep continues.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use sctsn::model::classify_switch_roles;
use sctsn::simnet::{self, Mode, Scenario};

use crate::CliError;

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub base_dir: PathBuf,
    pub scenario: PathBuf,
    pub seeds: Vec<u64>,
    pub mu_ms: Vec<f64>,
    pub modes: Vec<Mode>,
    pub tt_counts: Vec<u32>,
    pub topologies: Vec<PathBuf>,
}

impl ExperimentSpec {
    pub fn from_file(path: &Path) -> Result<ExperimentSpec, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::parse(&text, dir)
    }

    fn parse(text: &str, base_dir: PathBuf) -> Result<ExperimentSpec, CliError> {
        let err = |line: usize, msg: String| CliError::Validation(format!("line {line}: {msg}"));
        let mut spec = ExperimentSpec {
            base_dir,
            scenario: PathBuf::new(),
            seeds: Vec::new(),
            mu_ms: Vec::new(),
            modes: Vec::new(),
            tt_counts: Vec::new(),
            topologies: Vec::new(),
        };
        let mut saw_version = false;
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
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens[0] {
                "version" => {
                    if tokens.get(1) != Some(&"1") {
                        return Err(err(lineno, "unsupported version".into()));
                    }
                    saw_version = true;
                }
                "scenario" => {
                    if tokens.len() != 2 {
                        return Err(err(lineno, "scenario takes one path".into()));
                    }
                    spec.scenario = spec.base_dir.join(tokens[1]);
                }
                "seeds" => {
                    for t in &tokens[1..] {
                        let s: u64 = t
                            .parse()
                            .map_err(|_| err(lineno, format!("bad seed `{t}`")))?;
                        if spec.seeds.contains(&s) {
                            return Err(err(lineno, format!("duplicate seed {s}")));
                        }
                        spec.seeds.push(s);
                    }
                }
                "axis" => {
                    let axis = tokens.get(1).copied().unwrap_or("");
                    let values = &tokens[2..];
                    if values.is_empty() {
                        return Err(err(lineno, format!("axis {axis} has no values")));
                    }
                    match axis {
                        "mu_ms" => {
                            for v in values {
                                spec.mu_ms.push(
                                    v.parse()
                                        .map_err(|_| err(lineno, format!("bad number `{v}`")))?,
                                );
                            }
                        }
                        "mode" => {
                            for v in values {
                                spec.modes.push(
                                    Mode::parse(v).ok_or_else(|| {
                                        err(lineno, format!("unknown mode `{v}`"))
                                    })?,
                                );
                            }
                        }
                        "tt_count" => {
                            for v in values {
                                spec.tt_counts.push(
                                    v.parse()
                                        .map_err(|_| err(lineno, format!("bad count `{v}`")))?,
                                );
                            }
                        }
                        "topology" => {
                            for v in values {
                                spec.topologies.push(spec.base_dir.join(v));
                            }
                        }
                        other => return Err(err(lineno, format!("unknown axis `{other}`"))),
                    }
                }
                other => return Err(err(lineno, format!("unknown key `{other}`"))),
            }
        }
        if !saw_version {
            return Err(CliError::Validation("missing `version 1` header".into()));
        }
        if spec.scenario.as_os_str().is_empty() {
            return Err(CliError::Validation("missing `scenario` entry".into()));
        }
        if spec.seeds.is_empty() {
            return Err(CliError::Validation("missing `seeds` entry".into()));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
struct Cell {
    mu_ms: Option<f64>,
    mode: Option<Mode>,
    tt_count: Option<u32>,
    topology: Option<PathBuf>,
    seed: u64,
}

fn cell_label(cell: &Cell, base: &Scenario) -> (String, String, String, String) {
    let mu = cell.mu_ms.unwrap_or(base.be_mean_interarrival * 1000.0);
    let mode = cell.mode.unwrap_or(base.mode);
    let tt = cell.tt_count.unwrap_or(base.tt_sources);
    let topo = cell
        .topology
        .as_ref()
        .and_then(|p| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "base".into());
    (
        format!("{mu}"),
        mode.as_str().to_string(),
        format!("{tt}"),
        topo,
    )
}

pub fn run_sweep(spec: &ExperimentSpec) -> Result<(String, String), CliError> {
    let base =
        Scenario::from_file(&spec.scenario).map_err(|e| CliError::Validation(e.to_string()))?;

    let opt_axis = |v: &[f64]| -> Vec<Option<f64>> {
        if v.is_empty() {
            vec![None]
        } else {
            v.iter().copied().map(Some).collect()
        }
    };
    let mus = opt_axis(&spec.mu_ms);
    let modes: Vec<Option<Mode>> = if spec.modes.is_empty() {
        vec![None]
    } else {
        spec.modes.iter().copied().map(Some).collect()
    };
    let tts: Vec<Option<u32>> = if spec.tt_counts.is_empty() {
        vec![None]
    } else {
        spec.tt_counts.iter().copied().map(Some).collect()
    };
    let topos: Vec<Option<PathBuf>> = if spec.topologies.is_empty() {
        vec![None]
    } else {
        spec.topologies.iter().cloned().map(Some).collect()
    };

    let mut cells = Vec::new();
    for topology in &topos {
        for tt_count in &tts {
            for mu_ms in &mus {
                for mode in &modes {
                    for &seed in &spec.seeds {
                        cells.push(Cell {
                            mu_ms: *mu_ms,
                            mode: *mode,
                            tt_count: *tt_count,
                            topology: topology.clone(),
                            seed,
                        });
                    }
                }
            }
        }
    }

    type CellOutcome = (Cell, Result<simnet::MetricsReport, String>);
    let results: Vec<CellOutcome> = cells
        .par_iter()
        .map(|cell| {
            let mut sc = base.clone();
            if let Some(mu) = cell.mu_ms {
                sc.be_mean_interarrival = mu / 1000.0;
            }
            if let Some(mode) = cell.mode {
                sc.mode = mode;
            }
            if let Some(tt) = cell.tt_count {
                sc.tt_sources = tt;
            }
            let outcome = (|| {
                if let Some(path) = &cell.topology {
                    let topo = sctsn::model::load_topology(path).map_err(|e| e.to_string())?;
                    sc.topology = classify_switch_roles(topo);
                }
                sc.seed = cell.seed;
                sc.validate().map_err(|e| e.to_string())?;
                simnet::run(&sc).map_err(|e| e.to_string())
            })();
            (cell.clone(), outcome)
        })
        .collect();

    let mut rows = String::from(
        "topology,tt_count,mu_ms,mode,seed,tt_sent,tt_mean_ms,tt_max_ms,be_sent,be_mean_ms,\
         be_max_ms,cr,tnr,delayed_tt,unplaced,migrations,error\n",
    );
    // (topology, tt, mu, mode) -> per-metric sums and count
    type GroupKey = (String, String, String, String);
    let mut groups: std::collections::BTreeMap<GroupKey, (Vec<f64>, u64)> = Default::default();
    for (cell, outcome) in &results {
        let (mu, mode, tt, topo) = cell_label(cell, &base);
        match outcome {
            Ok(r) => {
                rows.push_str(&format!(
                    "{topo},{tt},{mu},{mode},{},{},{:.6},{:.6},{},{:.6},{:.6},{:.6},{:.6},{},{},{},\n",
                    cell.seed,
                    r.tt.sent,
                    r.tt.latency.mean_ms,
                    r.tt.latency.max_ms,
                    r.be.sent,
                    r.be.latency.mean_ms,
                    r.be.latency.max_ms,
                    r.cr,
                    r.tnr,
                    r.delayed_tt,
                    r.unplaced_streams,
                    r.migrations,
                ));
                let entry = groups
                    .entry((topo, tt, mu, mode))
                    .or_insert((vec![0.0; 6], 0));
                entry.0[0] += r.tt.latency.mean_ms;
                entry.0[1] += r.tt.latency.max_ms;
                entry.0[2] += r.be.latency.mean_ms;
                entry.0[3] += r.cr;
                entry.0[4] += r.tnr;
                entry.0[5] += r.delayed_tt as f64;
                entry.1 += 1;
            }
            Err(e) => {
                rows.push_str(&format!(
                    "{topo},{tt},{mu},{mode},{},,,,,,,,,,,,{}\n",
                    cell.seed,
                    e.replace(',', ";"),
                ));
            }
        }
    }
    let mut agg = String::from(
        "topology,tt_count,mu_ms,mode,seeds,tt_mean_ms,tt_max_ms,be_mean_ms,cr,tnr,delayed_tt\n",
    );
    for ((topo, tt, mu, mode), (sums, n)) in &groups {
        let n_f = *n as f64;
        agg.push_str(&format!(
            "{topo},{tt},{mu},{mode},{n},{:.6},{:.6},{:.6},{:.6},{:.6},{:.3}\n",
            sums[0] / n_f,
            sums[1] / n_f,
            sums[2] / n_f,
            sums[3] / n_f,
            sums[4] / n_f,
            sums[5] / n_f,
        ));
    }
    Ok((rows, agg))
}

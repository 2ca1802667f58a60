//! Time-sensitive optimal routing: a mixed-integer program assigning each
//! demand to one candidate path while choosing per-link, per-class
//! gate-opening frequencies.
//!
//! Decision variables: binary `x[d,p]` (demand `d` uses path `p`) and
//! continuous `g[e,s]` in `[0,1]` (fraction of time the gate for class `s`
//! on link `e` is open). Constraints: one path per demand, link capacity,
//! gate fractions summing to one per link, per-demand latency bounds of the
//! form `sum over path links of l_o + l_q * (1 - g)`, gate fractions
//! covering the offered load per class, and preassignment pins. The
//! objective minimizes the same latency expression summed over selected
//! paths. The `x * g` products are linearized exactly with McCormick
//! envelopes before solving.

mod brute;
mod fileio;
mod linearize;
mod solve;

pub use brute::brute_force_solve;
pub use fileio::{dump_solution_csv, load_instance, load_instance_str};
pub use linearize::{
    linearize, ConstraintFamily, LinearizedModel, Rel, Sense, StandardConstraint, StandardForm,
};
pub use solve::{solve, solve_form_relaxation};

use std::fmt;

use thiserror::Error;

use crate::model::{k_shortest_paths, Demand, ModelError, Path, StreamKey, Topology, NUM_CLASSES};

/// Link parameters as seen by the optimizer.
#[derive(Debug, Clone)]
pub struct TsorLink {
    pub name: String,
    pub capacity_bps: f64,
    pub base_delay: f64,
    pub queue_factor: f64,
}

/// Demand parameters as seen by the optimizer.
#[derive(Debug, Clone)]
pub struct TsorDemand {
    pub name: String,
    pub class: u8,
    pub load_bps: f64,
    pub latency_bound: f64,
}

/// A self-contained optimization instance. Candidate paths are sequences of
/// indices into `links`.
#[derive(Debug, Clone, Default)]
pub struct TsorInstance {
    pub links: Vec<TsorLink>,
    pub demands: Vec<TsorDemand>,
    /// `candidates[d][p]` lists the links of candidate path `p` of demand `d`.
    pub candidates: Vec<Vec<Vec<usize>>>,
    /// Path index pinned by an existing configuration, per demand.
    pub preassigned: Vec<Option<usize>>,
}

/// Optimizer output: one path index per demand plus the gate split of every
/// link, with the objective recomputed from those values.
#[derive(Debug, Clone)]
pub struct TsorSolution {
    pub path_choice: Vec<usize>,
    pub gates: Vec<[f64; NUM_CLASSES]>,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Assignment,
    Capacity,
    GateSum,
    Latency,
    GateCongestion,
    Preassignment,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Assignment => "assignment",
            Family::Capacity => "capacity",
            Family::GateSum => "gate-sum",
            Family::Latency => "latency",
            Family::GateCongestion => "gate-congestion",
            Family::Preassignment => "preassignment",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct InfeasibilityReport {
    pub family: Family,
    pub detail: String,
}

impl fmt::Display for InfeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} constraint unsatisfiable: {}",
            self.family, self.detail
        )
    }
}

#[derive(Debug, Error)]
pub enum TsorError {
    #[error("infeasible: {0}")]
    Infeasible(InfeasibilityReport),
    #[error("invalid instance: {0}")]
    BadInstance(String),
    #[error("oracle size guard: {0}")]
    OracleGuard(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl TsorInstance {
    pub fn validate(&self) -> Result<(), TsorError> {
        if self.demands.is_empty() {
            return Err(TsorError::BadInstance("no demands".into()));
        }
        if self.demands.len() != self.candidates.len()
            || self.demands.len() != self.preassigned.len()
        {
            return Err(TsorError::BadInstance("field lengths disagree".into()));
        }
        for l in &self.links {
            if l.capacity_bps <= 0.0 {
                return Err(TsorError::BadInstance(format!(
                    "link {} has non-positive capacity",
                    l.name
                )));
            }
            if l.base_delay < 0.0 || l.queue_factor < 0.0 {
                return Err(TsorError::BadInstance(format!(
                    "link {} has negative delay parameters",
                    l.name
                )));
            }
        }
        for (d, demand) in self.demands.iter().enumerate() {
            if demand.class as usize >= NUM_CLASSES {
                return Err(TsorError::BadInstance(format!(
                    "demand {} class out of range",
                    demand.name
                )));
            }
            if demand.load_bps <= 0.0 || demand.latency_bound <= 0.0 {
                return Err(TsorError::BadInstance(format!(
                    "demand {} has non-positive load or latency bound",
                    demand.name
                )));
            }
            if self.candidates[d].is_empty() {
                return Err(TsorError::Infeasible(InfeasibilityReport {
                    family: Family::Assignment,
                    detail: format!("demand {} has no candidate path", demand.name),
                }));
            }
            for path in &self.candidates[d] {
                if path.is_empty() {
                    return Err(TsorError::BadInstance(format!(
                        "demand {} has an empty candidate path",
                        demand.name
                    )));
                }
                for &e in path {
                    if e >= self.links.len() {
                        return Err(TsorError::BadInstance(format!(
                            "demand {} references unknown link {e}",
                            demand.name
                        )));
                    }
                }
            }
            if let Some(p) = self.preassigned[d] {
                if p >= self.candidates[d].len() {
                    return Err(TsorError::BadInstance(format!(
                        "demand {} preassigned to unknown path {p}",
                        demand.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Service classes that occur among the demands, ascending.
    pub fn active_classes(&self) -> Vec<u8> {
        let mut present = [false; NUM_CLASSES];
        for d in &self.demands {
            present[d.class as usize] = true;
        }
        (0..NUM_CLASSES as u8)
            .filter(|&c| present[c as usize])
            .collect()
    }

    /// Base-delay length of a candidate path.
    pub fn path_base_delay(&self, d: usize, p: usize) -> f64 {
        self.candidates[d][p]
            .iter()
            .map(|&e| self.links[e].base_delay)
            .sum()
    }

    /// Worst-case latency of a candidate path (all gates closed).
    pub fn path_max_delay(&self, d: usize, p: usize) -> f64 {
        self.candidates[d][p]
            .iter()
            .map(|&e| self.links[e].base_delay + self.links[e].queue_factor)
            .sum()
    }
}

/// Builds an instance from a classified topology: candidate paths are the
/// `k` hop-shortest fabric paths between each demand's ingress and egress
/// edge switches. Paths already holding an assignment are force-included
/// as an extra candidate when they fall outside the top `k`, and pinned via
/// the preassignment matrix.
pub fn build_instance(
    topo: &Topology,
    demands: &[Demand],
    existing: &[(StreamKey, Path)],
    k: usize,
) -> Result<TsorInstance, TsorError> {
    if demands.is_empty() {
        return Err(TsorError::BadInstance("no demands".into()));
    }
    if k == 0 {
        return Err(TsorError::BadInstance("k must be at least 1".into()));
    }
    let links = topo
        .links()
        .iter()
        .enumerate()
        .map(|(i, l)| TsorLink {
            name: topo.link_name(crate::model::LinkId(i as u32)),
            capacity_bps: l.capacity_bps,
            base_delay: l.base_delay,
            queue_factor: l.queue_factor,
        })
        .collect();
    let mut inst = TsorInstance {
        links,
        demands: Vec::with_capacity(demands.len()),
        candidates: Vec::with_capacity(demands.len()),
        preassigned: Vec::with_capacity(demands.len()),
    };
    for demand in demands {
        demand.validate()?;
        let src_sw = topo.host(demand.id.src).switch;
        let dst_sw = topo.host(demand.id.dst).switch;
        if src_sw == dst_sw {
            return Err(TsorError::Infeasible(InfeasibilityReport {
                family: Family::Assignment,
                detail: format!("demand {} has no fabric path (same edge switch)", demand.id),
            }));
        }
        let paths = k_shortest_paths(topo, src_sw, dst_sw, k)?;
        if paths.is_empty() {
            return Err(TsorError::Infeasible(InfeasibilityReport {
                family: Family::Assignment,
                detail: format!("demand {} is disconnected", demand.id),
            }));
        }
        let mut candidate_links: Vec<Vec<usize>> = paths
            .iter()
            .map(|p| p.links().iter().map(|l| l.index()).collect())
            .collect();
        let mut pre = None;
        if let Some((_, placed)) = existing.iter().find(|(key, _)| *key == demand.id) {
            let placed_links: Vec<usize> = placed.links().iter().map(|l| l.index()).collect();
            match candidate_links.iter().position(|c| *c == placed_links) {
                Some(i) => pre = Some(i),
                None => {
                    candidate_links.push(placed_links);
                    pre = Some(candidate_links.len() - 1);
                }
            }
        }
        inst.demands.push(TsorDemand {
            name: demand.id.to_string(),
            class: demand.class.0,
            load_bps: demand.load_bps,
            latency_bound: demand.latency_bound,
        });
        inst.candidates.push(candidate_links);
        inst.preassigned.push(pre);
    }
    inst.validate()?;
    Ok(inst)
}

/// Default latency bound for demands that do not state one: twice the
/// worst-case delay of the hop-shortest candidate path.
pub fn default_latency_bound(
    topo: &Topology,
    src: crate::model::SwitchId,
    dst: crate::model::SwitchId,
) -> Result<f64, TsorError> {
    let paths = k_shortest_paths(topo, src, dst, 1)?;
    let p = paths.first().ok_or_else(|| {
        TsorError::Infeasible(InfeasibilityReport {
            family: Family::Assignment,
            detail: "disconnected demand".into(),
        })
    })?;
    Ok(2.0
        * p.links()
            .iter()
            .map(|&l| topo.link(l).base_delay + topo.link(l).queue_factor)
            .sum::<f64>())
}

/// Maximum violation per constraint family, all computed directly from the
/// instance data and the solution values.
#[derive(Debug, Clone, Default)]
pub struct ResidualReport {
    pub assignment: f64,
    pub capacity: f64,
    pub gate_sum: f64,
    pub latency: f64,
    pub gate_congestion: f64,
    pub preassignment: f64,
    /// Largest distance of any gate value from the `[0,1]` interval.
    pub gate_range: f64,
    /// `|reported objective - objective recomputed from the solution|`.
    pub objective_delta: f64,
    pub worst: Vec<(Family, String, f64)>,
}

impl ResidualReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.assignment,
            self.capacity,
            self.gate_sum,
            self.latency,
            self.gate_congestion,
            self.preassignment,
            self.gate_range,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

impl fmt::Display for ResidualReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "assignment      {:.3e}", self.assignment)?;
        writeln!(f, "capacity        {:.3e}", self.capacity)?;
        writeln!(f, "gate-sum        {:.3e}", self.gate_sum)?;
        writeln!(f, "latency         {:.3e}", self.latency)?;
        writeln!(f, "gate-congestion {:.3e}", self.gate_congestion)?;
        writeln!(f, "preassignment   {:.3e}", self.preassignment)?;
        writeln!(f, "gate-range      {:.3e}", self.gate_range)?;
        write!(f, "objective-delta {:.3e}", self.objective_delta)
    }
}

/// Recomputes the objective expression from a path choice and gate split.
pub fn objective_value(inst: &TsorInstance, choice: &[usize], gates: &[[f64; NUM_CLASSES]]) -> f64 {
    let mut total = 0.0;
    for (d, demand) in inst.demands.iter().enumerate() {
        let s = demand.class as usize;
        for &e in &inst.candidates[d][choice[d]] {
            let link = &inst.links[e];
            total += link.base_delay + link.queue_factor * (1.0 - gates[e][s]);
        }
    }
    total
}

/// Checks a solution against every constraint family. Report-only; never
/// fails.
#[allow(clippy::needless_range_loop)] // parallel-array index code
pub fn verify_solution(inst: &TsorInstance, sol: &TsorSolution) -> ResidualReport {
    let mut r = ResidualReport::default();
    let ne = inst.links.len();
    let note = |report: &mut ResidualReport, family: Family, what: String, v: f64| {
        if v > 1e-12 {
            report.worst.push((family, what, v));
        }
    };

    // Assignment (one path per demand): structural given the representation,
    // but an out-of-range choice is a full violation.
    for (d, demand) in inst.demands.iter().enumerate() {
        if sol
            .path_choice
            .get(d)
            .is_none_or(|&p| p >= inst.candidates[d].len())
        {
            r.assignment = r.assignment.max(1.0);
            note(&mut r, Family::Assignment, demand.name.clone(), 1.0);
        }
    }
    if r.assignment > 0.0 {
        return r;
    }

    // Loads per link and per (link, class).
    let mut load = vec![0.0f64; ne];
    let mut load_cls = vec![[0.0f64; NUM_CLASSES]; ne];
    for (d, demand) in inst.demands.iter().enumerate() {
        for &e in &inst.candidates[d][sol.path_choice[d]] {
            load[e] += demand.load_bps;
            load_cls[e][demand.class as usize] += demand.load_bps;
        }
    }

    for e in 0..ne {
        let cap = inst.links[e].capacity_bps;
        let v = (load[e] / cap - 1.0).max(0.0);
        if v > r.capacity {
            r.capacity = v;
        }
        note(&mut r, Family::Capacity, inst.links[e].name.clone(), v);

        let sum: f64 = sol.gates[e].iter().sum();
        let v = (sum - 1.0).abs();
        if v > r.gate_sum {
            r.gate_sum = v;
        }
        note(&mut r, Family::GateSum, inst.links[e].name.clone(), v);

        for s in 0..NUM_CLASSES {
            let g = sol.gates[e][s];
            r.gate_range = r.gate_range.max((-g).max(g - 1.0).max(0.0));
            let v = (load_cls[e][s] / cap - g).max(0.0);
            if v > r.gate_congestion {
                r.gate_congestion = v;
            }
            note(
                &mut r,
                Family::GateCongestion,
                format!("{} class {s}", inst.links[e].name),
                v,
            );
        }
    }

    for (d, demand) in inst.demands.iter().enumerate() {
        let s = demand.class as usize;
        let latency: f64 = inst.candidates[d][sol.path_choice[d]]
            .iter()
            .map(|&e| {
                inst.links[e].base_delay + inst.links[e].queue_factor * (1.0 - sol.gates[e][s])
            })
            .sum();
        let v = (latency - demand.latency_bound).max(0.0);
        if v > r.latency {
            r.latency = v;
        }
        note(&mut r, Family::Latency, demand.name.clone(), v);

        if let Some(p) = inst.preassigned[d] {
            let v = if sol.path_choice[d] == p { 0.0 } else { 1.0 };
            if v > r.preassignment {
                r.preassignment = v;
            }
            note(&mut r, Family::Preassignment, demand.name.clone(), v);
        }
    }

    r.objective_delta = (objective_value(inst, &sol.path_choice, &sol.gates) - sol.objective).abs();
    r.worst.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap());
    r.worst.truncate(8);
    r
}

/// Fixture builders shared between the unit, integration and acceptance
/// test layers.
#[doc(hidden)]
pub mod testing {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// A two-link chain instance with one demand: the closed-form optimum
    /// opens the demand's gate fully on both links.
    pub fn two_link_chain() -> TsorInstance {
        TsorInstance {
            links: vec![
                TsorLink {
                    name: "e0".into(),
                    capacity_bps: 100e6,
                    base_delay: 1.0,
                    queue_factor: 0.5,
                },
                TsorLink {
                    name: "e1".into(),
                    capacity_bps: 100e6,
                    base_delay: 1.0,
                    queue_factor: 0.5,
                },
            ],
            demands: vec![TsorDemand {
                name: "d0".into(),
                class: 7,
                load_bps: 1.2e6,
                latency_bound: 6.0,
            }],
            candidates: vec![vec![vec![0, 1]]],
            preassigned: vec![None],
        }
    }

    /// Random small instances for oracle comparison. Roughly one in five is
    /// infeasible by construction (tight capacities or latency bounds).
    pub fn random_instance(seed: u64) -> TsorInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ne = rng.gen_range(4..=12);
        let links: Vec<TsorLink> = (0..ne)
            .map(|i| TsorLink {
                name: format!("e{i}"),
                capacity_bps: rng.gen_range(5e6..100e6),
                base_delay: rng.gen_range(0.5..2.0),
                queue_factor: rng.gen_range(0.0..1.0),
            })
            .collect();
        let nd = rng.gen_range(1..=5);
        let mut demands = Vec::new();
        let mut candidates = Vec::new();
        let mut preassigned = Vec::new();
        for d in 0..nd {
            let np = rng.gen_range(1..=4);
            let mut paths = Vec::new();
            for _ in 0..np {
                let len = rng.gen_range(1..=3.min(ne));
                // distinct links per path: sample without replacement
                let mut pool: Vec<usize> = (0..ne).collect();
                let mut path = Vec::new();
                for _ in 0..len {
                    let i = rng.gen_range(0..pool.len());
                    path.push(pool.swap_remove(i));
                }
                paths.push(path);
            }
            paths.dedup();
            let tight = rng.gen_bool(0.25);
            let load = if tight {
                rng.gen_range(10e6..60e6)
            } else {
                rng.gen_range(0.5e6..5e6)
            };
            let bound = if rng.gen_bool(0.1) {
                rng.gen_range(0.4..1.2)
            } else {
                rng.gen_range(4.0..12.0)
            };
            let pre = if rng.gen_bool(0.2) {
                Some(rng.gen_range(0..paths.len()))
            } else {
                None
            };
            demands.push(TsorDemand {
                name: format!("d{d}"),
                class: rng.gen_range(0..8),
                load_bps: load,
                latency_bound: bound,
            });
            candidates.push(paths);
            preassigned.push(pre);
        }
        TsorInstance {
            links,
            demands,
            candidates,
            preassigned,
        }
    }
}

//! Branch-and-bound over the path-assignment binaries with LP relaxation
//! bounds.
//!
//! Nodes carry the set of still-allowed candidate paths per demand. Each
//! node solves a reduced LP: demands pinned to a single path are substituted
//! as constants, gate variables exist only for the classes that occur in
//! the instance (the remaining classes collapse into one aggregate share
//! per link), and McCormick auxiliaries are created only for free demands.
//! The reduction is exact, and `verify_solution` re-checks every returned
//! optimum against the unreduced constraints.
//!
//! Branching picks the first fractional assignment variable in
//! (demand index, path rank) order and explores the `x = 1` child first.
//! Ties between equal-objective incumbents resolve to the first one found,
//! so results are deterministic.

#![allow(clippy::needless_range_loop)] // parallel-array index code

use crate::linprog::Rel as LpRel;
use crate::linprog::{solve_lp, Lp, LpError, Row};

use super::{
    objective_value, Family, InfeasibilityReport, TsorError, TsorInstance, TsorSolution,
    NUM_CLASSES,
};

const INT_TOL: f64 = 1e-7;
const BOUND_GAP: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;

/// Solves the continuous relaxation of a linearized standard form directly,
/// without any of the reductions `solve` applies. Diagnostic surface: the
/// value is a lower bound on the mixed-integer optimum.
pub fn solve_form_relaxation(form: &super::StandardForm) -> Result<f64, TsorError> {
    use super::Rel;
    let mut rows: Vec<Row> = form
        .constraints
        .iter()
        .map(|c| Row {
            coeffs: c.coeffs.clone(),
            rel: match c.rel {
                Rel::Le => LpRel::Le,
                Rel::Eq => LpRel::Eq,
                Rel::Ge => LpRel::Ge,
            },
            rhs: c.rhs,
        })
        .collect();
    for (v, &(lo, hi)) in form.bounds.iter().enumerate() {
        debug_assert_eq!(lo, 0.0, "standard-form variables are nonnegative");
        if hi.is_finite() {
            rows.push(Row {
                coeffs: vec![(v, 1.0)],
                rel: LpRel::Le,
                rhs: hi,
            });
        }
    }
    let lp = Lp {
        num_vars: form.num_vars,
        objective: form.objective.clone(),
        rows,
    };
    match solve_lp(&lp) {
        Ok(sol) => Ok(sol.objective + form.objective_constant),
        Err(LpError::Infeasible { .. }) => Err(TsorError::Infeasible(InfeasibilityReport {
            family: Family::Assignment,
            detail: "relaxation infeasible".into(),
        })),
        Err(e) => Err(TsorError::Solver(e.to_string())),
    }
}

pub fn solve(inst: &TsorInstance) -> Result<TsorSolution, TsorError> {
    inst.validate()?;

    // Cheap whole-demand diagnostics first, so the common infeasibilities
    // come back with a pointed report.
    for (d, demand) in inst.demands.iter().enumerate() {
        let all_over_capacity = inst.candidates[d].iter().all(|path| {
            path.iter()
                .any(|&e| demand.load_bps > inst.links[e].capacity_bps * (1.0 + FEAS_TOL))
        });
        if all_over_capacity {
            return Err(TsorError::Infeasible(InfeasibilityReport {
                family: Family::Capacity,
                detail: format!(
                    "demand {} exceeds capacity on every candidate path",
                    demand.name
                ),
            }));
        }
        let all_over_latency = (0..inst.candidates[d].len())
            .all(|p| inst.path_base_delay(d, p) > demand.latency_bound + FEAS_TOL);
        if all_over_latency {
            return Err(TsorError::Infeasible(InfeasibilityReport {
                family: Family::Latency,
                detail: format!(
                    "demand {} cannot meet its bound on any candidate path",
                    demand.name
                ),
            }));
        }
    }

    let root: Vec<Vec<usize>> = inst
        .demands
        .iter()
        .enumerate()
        .map(|(d, _)| match inst.preassigned[d] {
            Some(p) => vec![p],
            None => (0..inst.candidates[d].len()).collect(),
        })
        .collect();

    let mut stack = vec![root];
    let mut best: Option<(f64, Vec<usize>, Vec<[f64; NUM_CLASSES]>)> = None;
    let mut infeasible_families: Vec<Family> = Vec::new();

    while let Some(node) = stack.pop() {
        let rel = match solve_node(inst, &node) {
            Ok(rel) => rel,
            Err(NodeOutcome::Infeasible(family)) => {
                infeasible_families.push(family);
                continue;
            }
            Err(NodeOutcome::Solver(msg)) => return Err(TsorError::Solver(msg)),
        };
        if let Some((best_obj, _, _)) = &best {
            if rel.objective >= best_obj - BOUND_GAP {
                continue;
            }
        }
        match first_fractional(inst, &node, &rel) {
            None => {
                let choice = integral_choice(inst, &node, &rel);
                let gates = finish_gates(inst, &choice, rel.gates);
                let obj = objective_value(inst, &choice, &gates);
                let improves = match &best {
                    None => true,
                    Some((best_obj, _, _)) => obj < best_obj - 1e-12,
                };
                if improves {
                    best = Some((obj, choice, gates));
                }
            }
            Some((d, p)) => {
                // x = 0 child pushed first so the x = 1 child pops first.
                let mut without = node.clone();
                without[d].retain(|&q| q != p);
                if !without[d].is_empty() {
                    stack.push(without);
                }
                let mut with = node.clone();
                with[d] = vec![p];
                stack.push(with);
            }
        }
    }

    match best {
        Some((objective, path_choice, gates)) => Ok(TsorSolution {
            path_choice,
            gates,
            objective,
        }),
        None => {
            let family = dominant_family(&infeasible_families);
            Err(TsorError::Infeasible(InfeasibilityReport {
                family,
                detail: "no assignment satisfies the constraint system".into(),
            }))
        }
    }
}

fn dominant_family(families: &[Family]) -> Family {
    let mut counts = [0usize; 2];
    for f in families {
        match f {
            Family::Capacity => counts[0] += 1,
            _ => counts[1] += 1,
        }
    }
    if counts[0] >= counts[1] && counts[0] > 0 {
        Family::Capacity
    } else if counts[1] > 0 {
        Family::Latency
    } else {
        Family::Assignment
    }
}

enum NodeOutcome {
    Infeasible(Family),
    Solver(String),
}

struct Relaxation {
    objective: f64,
    /// LP value of each (demand, candidate path) pair; pinned demands carry
    /// exactly one entry at 1.0.
    x: Vec<Vec<(usize, f64)>>,
    /// Per link and instance class 0..8; aggregate share already folded
    /// into best effort.
    gates: Vec<[f64; NUM_CLASSES]>,
}

fn first_fractional(
    inst: &TsorInstance,
    node: &[Vec<usize>],
    rel: &Relaxation,
) -> Option<(usize, usize)> {
    for d in 0..inst.demands.len() {
        if node[d].len() == 1 {
            continue;
        }
        for &(p, v) in &rel.x[d] {
            if v > INT_TOL && v < 1.0 - INT_TOL {
                return Some((d, p));
            }
        }
    }
    None
}

fn integral_choice(inst: &TsorInstance, node: &[Vec<usize>], rel: &Relaxation) -> Vec<usize> {
    (0..inst.demands.len())
        .map(|d| {
            if node[d].len() == 1 {
                node[d][0]
            } else {
                rel.x[d]
                    .iter()
                    .find(|&&(_, v)| v > 1.0 - INT_TOL)
                    .map(|&(p, _)| p)
                    .expect("integral relaxation has a unit assignment")
            }
        })
        .collect()
}

/// Normalizes gates on links that carry no selected demand to an open
/// best-effort gate, keeping every reported solution deterministic.
fn finish_gates(
    inst: &TsorInstance,
    choice: &[usize],
    mut gates: Vec<[f64; NUM_CLASSES]>,
) -> Vec<[f64; NUM_CLASSES]> {
    let mut loaded = vec![false; inst.links.len()];
    for (d, &p) in choice.iter().enumerate() {
        for &e in &inst.candidates[d][p] {
            loaded[e] = true;
        }
    }
    for (e, gate) in gates.iter_mut().enumerate() {
        if !loaded[e] {
            *gate = [0.0; NUM_CLASSES];
            gate[0] = 1.0;
        }
    }
    gates
}

fn solve_node(inst: &TsorInstance, node: &[Vec<usize>]) -> Result<Relaxation, NodeOutcome> {
    let ne = inst.links.len();
    let nd = inst.demands.len();
    let active = inst.active_classes();

    // Constant loads and latency contributions of pinned demands.
    let mut fixed_load = vec![0.0f64; ne];
    let mut fixed_load_cls = vec![[0.0f64; NUM_CLASSES]; ne];
    for d in 0..nd {
        if node[d].len() == 1 {
            let demand = &inst.demands[d];
            for &e in &inst.candidates[d][node[d][0]] {
                fixed_load[e] += demand.load_bps;
                fixed_load_cls[e][demand.class as usize] += demand.load_bps;
            }
        }
    }
    for e in 0..ne {
        if fixed_load[e] > inst.links[e].capacity_bps * (1.0 + FEAS_TOL) {
            return Err(NodeOutcome::Infeasible(Family::Capacity));
        }
    }
    for d in 0..nd {
        if node[d].len() == 1
            && inst.path_base_delay(d, node[d][0]) > inst.demands[d].latency_bound + FEAS_TOL
        {
            // Even a fully open gate cannot meet the bound.
            return Err(NodeOutcome::Infeasible(Family::Latency));
        }
    }

    if active.len() == 1 {
        solve_node_single_class(inst, node, &fixed_load, active[0])
    } else {
        solve_node_general(inst, node, &fixed_load, &fixed_load_cls, &active)
    }
}

/// With one service class in play the optimal gate split is forced: the
/// active class gets the whole gate on every loaded link, making latency
/// and objective terms plain base delays. Only the assignment variables
/// remain.
fn solve_node_single_class(
    inst: &TsorInstance,
    node: &[Vec<usize>],
    fixed_load: &[f64],
    class: u8,
) -> Result<Relaxation, NodeOutcome> {
    let ne = inst.links.len();
    let nd = inst.demands.len();
    let mut var_of: Vec<Vec<(usize, usize)>> = Vec::new(); // (d, p) per var
    let mut x_index: Vec<Vec<Option<usize>>> = vec![Vec::new(); nd];
    let mut num_vars = 0usize;
    for d in 0..nd {
        x_index[d] = vec![None; inst.candidates[d].len()];
        if node[d].len() > 1 {
            for &p in &node[d] {
                x_index[d][p] = Some(num_vars);
                var_of.push(vec![(d, p)]);
                num_vars += 1;
            }
        }
    }

    let mut objective = vec![0.0f64; num_vars];
    let mut constant = 0.0f64;
    let mut rows = Vec::new();
    let mut families = Vec::new();

    for d in 0..nd {
        if node[d].len() == 1 {
            constant += inst.path_base_delay(d, node[d][0]);
            continue;
        }
        let mut coeffs = Vec::new();
        let mut latency = Vec::new();
        for &p in &node[d] {
            let v = x_index[d][p].unwrap();
            let delay = inst.path_base_delay(d, p);
            objective[v] = delay;
            coeffs.push((v, 1.0));
            latency.push((v, delay));
        }
        rows.push(Row {
            coeffs,
            rel: LpRel::Eq,
            rhs: 1.0,
        });
        families.push(Family::Assignment);
        rows.push(Row {
            coeffs: latency,
            rel: LpRel::Le,
            rhs: inst.demands[d].latency_bound,
        });
        families.push(Family::Latency);
    }

    for e in 0..ne {
        let cap = inst.links[e].capacity_bps;
        let mut coeffs = Vec::new();
        for d in 0..nd {
            if node[d].len() == 1 {
                continue;
            }
            for &p in &node[d] {
                if inst.candidates[d][p].contains(&e) {
                    coeffs.push((x_index[d][p].unwrap(), inst.demands[d].load_bps / cap));
                }
            }
        }
        if !coeffs.is_empty() {
            rows.push(Row {
                coeffs,
                rel: LpRel::Le,
                rhs: 1.0 - fixed_load[e] / cap,
            });
            families.push(Family::Capacity);
        }
    }

    let lp = Lp {
        num_vars,
        objective,
        rows,
    };
    let sol = match solve_lp(&lp) {
        Ok(s) => s,
        Err(LpError::Infeasible { worst_row, .. }) => {
            return Err(NodeOutcome::Infeasible(families[worst_row]));
        }
        Err(e) => return Err(NodeOutcome::Solver(e.to_string())),
    };

    let mut x = vec![Vec::new(); nd];
    for d in 0..nd {
        if node[d].len() == 1 {
            x[d].push((node[d][0], 1.0));
        } else {
            for &p in &node[d] {
                x[d].push((p, sol.x[x_index[d][p].unwrap()]));
            }
        }
    }
    // Loaded links open the active class fully; `finish_gates` later resets
    // the links that end up idle.
    let mut gates = vec![[0.0f64; NUM_CLASSES]; ne];
    for gate in gates.iter_mut() {
        gate[class as usize] = 1.0;
    }
    Ok(Relaxation {
        objective: sol.objective + constant,
        x,
        gates,
    })
}

fn solve_node_general(
    inst: &TsorInstance,
    node: &[Vec<usize>],
    fixed_load: &[f64],
    fixed_load_cls: &[[f64; NUM_CLASSES]],
    active: &[u8],
) -> Result<Relaxation, NodeOutcome> {
    let ne = inst.links.len();
    let nd = inst.demands.len();
    let has_aggregate = active.len() < NUM_CLASSES;

    // Variable layout: free x, then per-link gate vars for each active
    // class (+ aggregate), then z per (free demand, path, link-on-path).
    let mut num_vars = 0usize;
    let mut x_index: Vec<Vec<Option<usize>>> = vec![Vec::new(); nd];
    for d in 0..nd {
        x_index[d] = vec![None; inst.candidates[d].len()];
        if node[d].len() > 1 {
            for &p in &node[d] {
                x_index[d][p] = Some(num_vars);
                num_vars += 1;
            }
        }
    }
    let g_base = num_vars;
    let per_link = active.len() + usize::from(has_aggregate);
    num_vars += ne * per_link;
    let g_of = |e: usize, s: u8| -> usize {
        let si = active
            .iter()
            .position(|&a| a == s)
            .expect("class is active");
        g_base + e * per_link + si
    };
    let agg_of = |e: usize| -> usize { g_base + e * per_link + active.len() };

    let mut z_index: Vec<Vec<Vec<usize>>> = vec![Vec::new(); nd];
    for d in 0..nd {
        if node[d].len() > 1 {
            z_index[d] = vec![Vec::new(); inst.candidates[d].len()];
            for &p in &node[d] {
                for _ in &inst.candidates[d][p] {
                    z_index[d][p].push(num_vars);
                    num_vars += 1;
                }
            }
        }
    }

    let mut objective = vec![0.0f64; num_vars];
    let mut constant = 0.0f64;
    let mut rows = Vec::new();
    let mut families = Vec::new();

    // Assignment rows.
    for d in 0..nd {
        if node[d].len() > 1 {
            let coeffs = node[d]
                .iter()
                .map(|&p| (x_index[d][p].unwrap(), 1.0))
                .collect();
            rows.push(Row {
                coeffs,
                rel: LpRel::Eq,
                rhs: 1.0,
            });
            families.push(Family::Assignment);
        }
    }

    // Capacity rows, normalized by capacity.
    for e in 0..ne {
        let cap = inst.links[e].capacity_bps;
        let mut coeffs = Vec::new();
        for d in 0..nd {
            if node[d].len() == 1 {
                continue;
            }
            for &p in &node[d] {
                if inst.candidates[d][p].contains(&e) {
                    coeffs.push((x_index[d][p].unwrap(), inst.demands[d].load_bps / cap));
                }
            }
        }
        if !coeffs.is_empty() {
            rows.push(Row {
                coeffs,
                rel: LpRel::Le,
                rhs: 1.0 - fixed_load[e] / cap,
            });
            families.push(Family::Capacity);
        }
    }

    // Gate sums.
    for e in 0..ne {
        let mut coeffs: Vec<(usize, f64)> = active.iter().map(|&s| (g_of(e, s), 1.0)).collect();
        if has_aggregate {
            coeffs.push((agg_of(e), 1.0));
        }
        rows.push(Row {
            coeffs,
            rel: LpRel::Eq,
            rhs: 1.0,
        });
        families.push(Family::GateSum);
    }

    // Latency rows and objective.
    for d in 0..nd {
        let demand = &inst.demands[d];
        let s = demand.class;
        if node[d].len() == 1 {
            // sum l_o + l_q (1 - g) <= bound  =>  sum l_q g >= sum(l_o + l_q) - bound
            let path = &inst.candidates[d][node[d][0]];
            let mut coeffs = Vec::new();
            let mut worst = 0.0;
            for &e in path {
                let link = &inst.links[e];
                worst += link.base_delay + link.queue_factor;
                constant += link.base_delay + link.queue_factor;
                if link.queue_factor != 0.0 {
                    coeffs.push((g_of(e, s), link.queue_factor));
                    objective[g_of(e, s)] -= link.queue_factor;
                }
            }
            let rhs = worst - demand.latency_bound;
            if rhs > 0.0 && !coeffs.is_empty() {
                rows.push(Row {
                    coeffs,
                    rel: LpRel::Ge,
                    rhs,
                });
                families.push(Family::Latency);
            }
        } else {
            let mut coeffs = Vec::new();
            for &p in &node[d] {
                let x = x_index[d][p].unwrap();
                let mut x_coeff = 0.0;
                for (i, &e) in inst.candidates[d][p].iter().enumerate() {
                    let link = &inst.links[e];
                    x_coeff += link.base_delay + link.queue_factor;
                    if link.queue_factor != 0.0 {
                        let z = z_index[d][p][i];
                        coeffs.push((z, -link.queue_factor));
                        objective[z] -= link.queue_factor;
                    }
                }
                coeffs.push((x, x_coeff));
                objective[x] += x_coeff;
            }
            rows.push(Row {
                coeffs,
                rel: LpRel::Le,
                rhs: demand.latency_bound,
            });
            families.push(Family::Latency);
        }
    }

    // Gate-congestion rows: g[e,s] >= fixed share + free share.
    for e in 0..ne {
        let cap = inst.links[e].capacity_bps;
        for &s in active {
            let mut coeffs = vec![(g_of(e, s), 1.0)];
            for d in 0..nd {
                if node[d].len() == 1 || inst.demands[d].class != s {
                    continue;
                }
                for &p in &node[d] {
                    if inst.candidates[d][p].contains(&e) {
                        coeffs.push((x_index[d][p].unwrap(), -inst.demands[d].load_bps / cap));
                    }
                }
            }
            let rhs = fixed_load_cls[e][s as usize] / cap;
            if coeffs.len() > 1 || rhs > 0.0 {
                rows.push(Row {
                    coeffs,
                    rel: LpRel::Ge,
                    rhs,
                });
                families.push(Family::GateCongestion);
            }
        }
    }

    // McCormick envelopes for free-demand products.
    for d in 0..nd {
        if node[d].len() == 1 {
            continue;
        }
        let s = inst.demands[d].class;
        for &p in &node[d] {
            let x = x_index[d][p].unwrap();
            for (i, &e) in inst.candidates[d][p].iter().enumerate() {
                let z = z_index[d][p][i];
                let g = g_of(e, s);
                rows.push(Row {
                    coeffs: vec![(z, 1.0), (x, -1.0)],
                    rel: LpRel::Le,
                    rhs: 0.0,
                });
                families.push(Family::Latency);
                rows.push(Row {
                    coeffs: vec![(z, 1.0), (g, -1.0)],
                    rel: LpRel::Le,
                    rhs: 0.0,
                });
                families.push(Family::Latency);
                rows.push(Row {
                    coeffs: vec![(x, 1.0), (g, 1.0), (z, -1.0)],
                    rel: LpRel::Le,
                    rhs: 1.0,
                });
                families.push(Family::Latency);
            }
        }
    }

    let lp = Lp {
        num_vars,
        objective,
        rows,
    };
    let sol = match solve_lp(&lp) {
        Ok(s) => s,
        Err(LpError::Infeasible { worst_row, .. }) => {
            return Err(NodeOutcome::Infeasible(families[worst_row]));
        }
        Err(e) => return Err(NodeOutcome::Solver(e.to_string())),
    };

    let mut x = vec![Vec::new(); nd];
    for d in 0..nd {
        if node[d].len() == 1 {
            x[d].push((node[d][0], 1.0));
        } else {
            for &p in &node[d] {
                x[d].push((p, sol.x[x_index[d][p].unwrap()]));
            }
        }
    }
    let mut gates = vec![[0.0f64; NUM_CLASSES]; ne];
    for e in 0..ne {
        for &s in active {
            gates[e][s as usize] = sol.x[g_of(e, s)];
        }
        if has_aggregate {
            gates[e][0] += sol.x[agg_of(e)];
        }
    }
    Ok(Relaxation {
        objective: sol.objective + constant,
        x,
        gates,
    })
}

//! Exhaustive reference solver.
//!
//! Enumerates every admissible path assignment and solves the residual
//! program over the gate fractions, which is linear once the assignment is
//! fixed (no McCormick auxiliaries involved). Guarded to small instances;
//! exists so the branch-and-bound path can be checked against an
//! independent construction.

#![allow(clippy::needless_range_loop)] // parallel-array index code

use crate::linprog::Rel as LpRel;
use crate::linprog::{solve_lp, Lp, LpError, Row};

use super::{
    objective_value, Family, InfeasibilityReport, TsorError, TsorInstance, TsorSolution,
    NUM_CLASSES,
};

const FEAS_TOL: f64 = 1e-9;

pub fn brute_force_solve(inst: &TsorInstance) -> Result<TsorSolution, TsorError> {
    inst.validate()?;
    let nd = inst.demands.len();
    if nd > 6 {
        return Err(TsorError::OracleGuard(format!(
            "{nd} demands exceed the limit of 6"
        )));
    }
    let mut combos: usize = 1;
    for c in &inst.candidates {
        combos = combos.saturating_mul(c.len());
        if combos > 4096 {
            return Err(TsorError::OracleGuard(
                "assignment space exceeds 4096".into(),
            ));
        }
    }

    let mut choice: Vec<usize> = inst
        .preassigned
        .iter()
        .enumerate()
        .map(|(d, pre)| pre.unwrap_or(0).min(inst.candidates[d].len() - 1))
        .collect();
    let mut best: Option<(f64, Vec<usize>, Vec<[f64; NUM_CLASSES]>)> = None;
    let mut any_capacity_ok = false;

    loop {
        if capacity_ok(inst, &choice) {
            any_capacity_ok = true;
            if let Some(gates) = residual_gate_lp(inst, &choice)? {
                let gates = normalize_idle(inst, &choice, gates);
                let obj = objective_value(inst, &choice, &gates);
                let improves = match &best {
                    None => true,
                    Some((best_obj, _, _)) => obj < best_obj - 1e-12,
                };
                if improves {
                    best = Some((obj, choice.clone(), gates));
                }
            }
        }
        if !advance(inst, &mut choice) {
            break;
        }
    }

    match best {
        Some((objective, path_choice, gates)) => Ok(TsorSolution {
            path_choice,
            gates,
            objective,
        }),
        None => Err(TsorError::Infeasible(InfeasibilityReport {
            family: if any_capacity_ok {
                Family::Latency
            } else {
                Family::Capacity
            },
            detail: "exhaustive search found no feasible assignment".into(),
        })),
    }
}

/// Lexicographic successor over the admissible assignments; preassigned
/// demands never move.
fn advance(inst: &TsorInstance, choice: &mut [usize]) -> bool {
    for d in (0..choice.len()).rev() {
        if inst.preassigned[d].is_some() {
            continue;
        }
        if choice[d] + 1 < inst.candidates[d].len() {
            choice[d] += 1;
            return true;
        }
        choice[d] = 0;
    }
    false
}

fn capacity_ok(inst: &TsorInstance, choice: &[usize]) -> bool {
    let mut load = vec![0.0f64; inst.links.len()];
    for (d, &p) in choice.iter().enumerate() {
        for &e in &inst.candidates[d][p] {
            load[e] += inst.demands[d].load_bps;
        }
    }
    load.iter()
        .zip(&inst.links)
        .all(|(&l, link)| l <= link.capacity_bps * (1.0 + FEAS_TOL))
}

/// Solves the gate program for a fixed assignment. Returns `None` when the
/// latency system is unsatisfiable for this assignment.
fn residual_gate_lp(
    inst: &TsorInstance,
    choice: &[usize],
) -> Result<Option<Vec<[f64; NUM_CLASSES]>>, TsorError> {
    let ne = inst.links.len();
    let g = |e: usize, s: usize| e * NUM_CLASSES + s;
    let num_vars = ne * NUM_CLASSES;

    let mut load_cls = vec![[0.0f64; NUM_CLASSES]; ne];
    for (d, &p) in choice.iter().enumerate() {
        for &e in &inst.candidates[d][p] {
            load_cls[e][inst.demands[d].class as usize] += inst.demands[d].load_bps;
        }
    }

    let mut rows = Vec::new();
    for e in 0..ne {
        rows.push(Row {
            coeffs: (0..NUM_CLASSES).map(|s| (g(e, s), 1.0)).collect(),
            rel: LpRel::Eq,
            rhs: 1.0,
        });
        let cap = inst.links[e].capacity_bps;
        for s in 0..NUM_CLASSES {
            if load_cls[e][s] > 0.0 {
                rows.push(Row {
                    coeffs: vec![(g(e, s), 1.0)],
                    rel: LpRel::Ge,
                    rhs: load_cls[e][s] / cap,
                });
            }
        }
    }
    let mut objective = vec![0.0f64; num_vars];
    for (d, &p) in choice.iter().enumerate() {
        let demand = &inst.demands[d];
        let s = demand.class as usize;
        let mut worst = 0.0;
        let mut coeffs = Vec::new();
        for &e in &inst.candidates[d][p] {
            let link = &inst.links[e];
            worst += link.base_delay + link.queue_factor;
            if link.queue_factor != 0.0 {
                coeffs.push((g(e, s), link.queue_factor));
                objective[g(e, s)] -= link.queue_factor;
            }
        }
        let rhs = worst - demand.latency_bound;
        if rhs > 0.0 {
            if coeffs.is_empty() {
                return Ok(None); // no queueing slack to recover the bound
            }
            rows.push(Row {
                coeffs,
                rel: LpRel::Ge,
                rhs,
            });
        }
    }

    match solve_lp(&Lp {
        num_vars,
        objective,
        rows,
    }) {
        Ok(sol) => {
            let mut gates = vec![[0.0f64; NUM_CLASSES]; ne];
            for e in 0..ne {
                for s in 0..NUM_CLASSES {
                    gates[e][s] = sol.x[g(e, s)];
                }
            }
            Ok(Some(gates))
        }
        Err(LpError::Infeasible { .. }) => Ok(None),
        Err(e) => Err(TsorError::Solver(e.to_string())),
    }
}

fn normalize_idle(
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

//! Exact linearization of the routing program.
//!
//! Every product `x[d,p] * g[e,s(d)]` that appears in a latency constraint
//! or the objective is replaced by an auxiliary variable `z` constrained by
//! its McCormick envelope, which is tight because `x` is binary and `g`
//! lies in `[0,1]`:
//!
//! ```text
//! z <= x        z <= g        z >= x + g - 1        z >= 0
//! ```
//!
//! The output is a solver-neutral standard form: variable bounds, sparse
//! linear constraints tagged with the originating constraint family, and a
//! minimization objective.

use super::{TsorInstance, NUM_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintFamily {
    Assignment,
    Capacity,
    GateSum,
    Latency,
    GateCongestion,
    Preassignment,
    McCormick,
}

#[derive(Debug, Clone)]
pub struct StandardConstraint {
    pub coeffs: Vec<(usize, f64)>,
    pub rel: Rel,
    pub rhs: f64,
    pub family: ConstraintFamily,
}

#[derive(Debug, Clone)]
pub struct StandardForm {
    pub num_vars: usize,
    pub var_names: Vec<String>,
    /// Inclusive lower/upper bounds per variable.
    pub bounds: Vec<(f64, f64)>,
    /// Indices of the variables that must take integer values.
    pub integer_vars: Vec<usize>,
    pub objective: Vec<f64>,
    pub objective_constant: f64,
    pub sense: Sense,
    pub constraints: Vec<StandardConstraint>,
}

impl StandardForm {
    pub fn count_family(&self, family: ConstraintFamily) -> usize {
        self.constraints
            .iter()
            .filter(|c| c.family == family)
            .count()
    }
}

/// The standard form plus the variable index maps.
#[derive(Debug, Clone)]
pub struct LinearizedModel {
    pub form: StandardForm,
    x_base: Vec<usize>,
    g_base: usize,
    z_index: Vec<Vec<Vec<usize>>>,
}

impl LinearizedModel {
    pub fn x_var(&self, d: usize, p: usize) -> usize {
        self.x_base[d] + p
    }

    pub fn g_var(&self, e: usize, s: usize) -> usize {
        self.g_base + e * NUM_CLASSES + s
    }

    /// Auxiliary variable for `x[d,p] * g[e,s(d)]`; `i` indexes the links
    /// of candidate path `p`.
    pub fn z_var(&self, d: usize, p: usize, i: usize) -> usize {
        self.z_index[d][p][i]
    }
}

/// Emits constraints and objective in standard form, with all `x * g`
/// products replaced by McCormick-bounded auxiliaries.
pub fn linearize(inst: &TsorInstance) -> LinearizedModel {
    let ne = inst.links.len();
    let nd = inst.demands.len();

    let mut var_names = Vec::new();
    let mut x_base = Vec::with_capacity(nd);
    for (d, demand) in inst.demands.iter().enumerate() {
        x_base.push(var_names.len());
        for p in 0..inst.candidates[d].len() {
            var_names.push(format!("x[{},{p}]", demand.name));
        }
    }
    let g_base = var_names.len();
    for e in 0..ne {
        for s in 0..NUM_CLASSES {
            var_names.push(format!("g[{},{s}]", inst.links[e].name));
        }
    }
    let mut z_index = Vec::with_capacity(nd);
    for (d, demand) in inst.demands.iter().enumerate() {
        let mut per_path = Vec::with_capacity(inst.candidates[d].len());
        for (p, path) in inst.candidates[d].iter().enumerate() {
            let mut per_link = Vec::with_capacity(path.len());
            for &e in path {
                per_link.push(var_names.len());
                var_names.push(format!("z[{},{p},{}]", demand.name, inst.links[e].name));
            }
            per_path.push(per_link);
        }
        z_index.push(per_path);
    }
    let num_vars = var_names.len();
    let bounds = vec![(0.0, 1.0); num_vars];
    let integer_vars: Vec<usize> = (0..g_base).collect();

    let model = LinearizedModel {
        form: StandardForm {
            num_vars,
            var_names,
            bounds,
            integer_vars,
            objective: vec![0.0; num_vars],
            objective_constant: 0.0,
            sense: Sense::Minimize,
            constraints: Vec::new(),
        },
        x_base,
        g_base,
        z_index,
    };
    let mut form = model.form.clone();

    // One path per demand.
    for d in 0..nd {
        let coeffs = (0..inst.candidates[d].len())
            .map(|p| (model.x_var(d, p), 1.0))
            .collect();
        form.constraints.push(StandardConstraint {
            coeffs,
            rel: Rel::Eq,
            rhs: 1.0,
            family: ConstraintFamily::Assignment,
        });
    }

    // Link capacity.
    for e in 0..ne {
        let mut coeffs = Vec::new();
        for (d, demand) in inst.demands.iter().enumerate() {
            for (p, path) in inst.candidates[d].iter().enumerate() {
                if path.contains(&e) {
                    coeffs.push((model.x_var(d, p), demand.load_bps));
                }
            }
        }
        form.constraints.push(StandardConstraint {
            coeffs,
            rel: Rel::Le,
            rhs: inst.links[e].capacity_bps,
            family: ConstraintFamily::Capacity,
        });
    }

    // Gate fractions sum to one per link.
    for e in 0..ne {
        let coeffs = (0..NUM_CLASSES).map(|s| (model.g_var(e, s), 1.0)).collect();
        form.constraints.push(StandardConstraint {
            coeffs,
            rel: Rel::Eq,
            rhs: 1.0,
            family: ConstraintFamily::GateSum,
        });
    }

    // Per-demand latency across the selected path:
    //   sum_p sum_{e in p} (l_o + l_q) x[d,p] - l_q z[d,p,e]  <=  bound.
    for (d, demand) in inst.demands.iter().enumerate() {
        let mut coeffs = Vec::new();
        for (p, path) in inst.candidates[d].iter().enumerate() {
            let mut x_coeff = 0.0;
            for (i, &e) in path.iter().enumerate() {
                let link = &inst.links[e];
                x_coeff += link.base_delay + link.queue_factor;
                if link.queue_factor != 0.0 {
                    coeffs.push((model.z_var(d, p, i), -link.queue_factor));
                }
            }
            coeffs.push((model.x_var(d, p), x_coeff));
        }
        form.constraints.push(StandardConstraint {
            coeffs,
            rel: Rel::Le,
            rhs: demand.latency_bound,
            family: ConstraintFamily::Latency,
        });
    }

    // Gate fraction covers the per-class load on each link.
    for e in 0..ne {
        let cap = inst.links[e].capacity_bps;
        for s in 0..NUM_CLASSES {
            let mut coeffs = vec![(model.g_var(e, s), 1.0)];
            for (d, demand) in inst.demands.iter().enumerate() {
                if demand.class as usize != s {
                    continue;
                }
                for (p, path) in inst.candidates[d].iter().enumerate() {
                    if path.contains(&e) {
                        coeffs.push((model.x_var(d, p), -demand.load_bps / cap));
                    }
                }
            }
            form.constraints.push(StandardConstraint {
                coeffs,
                rel: Rel::Ge,
                rhs: 0.0,
                family: ConstraintFamily::GateCongestion,
            });
        }
    }

    // Preassignment pins.
    for d in 0..nd {
        if let Some(p) = inst.preassigned[d] {
            form.constraints.push(StandardConstraint {
                coeffs: vec![(model.x_var(d, p), 1.0)],
                rel: Rel::Ge,
                rhs: 1.0,
                family: ConstraintFamily::Preassignment,
            });
        }
    }

    // McCormick envelope per product, plus the objective.
    for (d, demand) in inst.demands.iter().enumerate() {
        let s = demand.class as usize;
        for (p, path) in inst.candidates[d].iter().enumerate() {
            let x = model.x_var(d, p);
            for (i, &e) in path.iter().enumerate() {
                let z = model.z_var(d, p, i);
                let g = model.g_var(e, s);
                form.constraints.push(StandardConstraint {
                    coeffs: vec![(z, 1.0), (x, -1.0)],
                    rel: Rel::Le,
                    rhs: 0.0,
                    family: ConstraintFamily::McCormick,
                });
                form.constraints.push(StandardConstraint {
                    coeffs: vec![(z, 1.0), (g, -1.0)],
                    rel: Rel::Le,
                    rhs: 0.0,
                    family: ConstraintFamily::McCormick,
                });
                form.constraints.push(StandardConstraint {
                    coeffs: vec![(x, 1.0), (g, 1.0), (z, -1.0)],
                    rel: Rel::Le,
                    rhs: 1.0,
                    family: ConstraintFamily::McCormick,
                });
                let link = &inst.links[e];
                form.objective[x] += link.base_delay + link.queue_factor;
                form.objective[z] -= link.queue_factor;
            }
        }
    }

    LinearizedModel { form, ..model }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tsor::testing::two_link_chain;
    use crate::tsor::{TsorDemand, TsorLink};

    /// Feasible interval for one z variable given fixed x and g values,
    /// read off the emitted McCormick rows.
    fn z_interval(model: &LinearizedModel, z: usize, values: &[(usize, f64)]) -> (f64, f64) {
        let mut lo = 0.0f64;
        let mut hi = f64::INFINITY;
        for c in &model.form.constraints {
            if c.family != ConstraintFamily::McCormick {
                continue;
            }
            let Some(&(_, zc)) = c.coeffs.iter().find(|&&(v, _)| v == z) else {
                continue;
            };
            let rest: f64 = c
                .coeffs
                .iter()
                .filter(|&&(v, _)| v != z)
                .map(|&(v, a)| {
                    a * values
                        .iter()
                        .find(|&&(w, _)| w == v)
                        .map(|&(_, x)| x)
                        .unwrap_or(0.0)
                })
                .sum();
            // zc * z + rest <= rhs
            debug_assert_eq!(c.rel, Rel::Le);
            if zc > 0.0 {
                hi = hi.min((c.rhs - rest) / zc);
            } else {
                lo = lo.max((c.rhs - rest) / zc);
            }
        }
        (lo, hi)
    }

    #[test]
    fn mccormick_tight_at_binary_x() {
        let inst = two_link_chain();
        let model = linearize(&inst);
        let z = model.z_var(0, 0, 0);
        let x = model.x_var(0, 0);
        let g = model.g_var(0, 7);
        // x = 1, g = 0.4 forces z to exactly 0.4
        let (lo, hi) = z_interval(&model, z, &[(x, 1.0), (g, 0.4)]);
        assert!((lo - 0.4).abs() < 1e-12 && (hi - 0.4).abs() < 1e-12);
        // x = 0 forces z = 0 whatever g is
        let (lo, hi) = z_interval(&model, z, &[(x, 0.0), (g, 0.9)]);
        assert!(lo <= 0.0 && hi.abs() < 1e-12);
    }

    #[test]
    fn census_matches_closed_form() {
        // 2 demands x 2 paths, 3 links, 2 active classes. Path link counts:
        // d0: [e0], [e1, e2]; d1: [e0], [e1, e2].
        let links = (0..3)
            .map(|i| TsorLink {
                name: format!("e{i}"),
                capacity_bps: 100e6,
                base_delay: 1.0,
                queue_factor: 0.5,
            })
            .collect();
        let inst = TsorInstance {
            links,
            demands: vec![
                TsorDemand {
                    name: "d0".into(),
                    class: 7,
                    load_bps: 1e6,
                    latency_bound: 9.0,
                },
                TsorDemand {
                    name: "d1".into(),
                    class: 0,
                    load_bps: 1e6,
                    latency_bound: 9.0,
                },
            ],
            candidates: vec![vec![vec![0], vec![1, 2]], vec![vec![0], vec![1, 2]]],
            preassigned: vec![None, Some(0)],
        };
        let model = linearize(&inst);
        let f = &model.form;
        let x_count = 4; // |D| * |P|
        let g_count = 3 * NUM_CLASSES; // |E| * |S|
        let z_count = (1 + 2) + (1 + 2); // sum of path lengths
        assert_eq!(f.num_vars, x_count + g_count + z_count);
        assert_eq!(f.integer_vars.len(), x_count);
        assert_eq!(f.count_family(ConstraintFamily::Assignment), 2);
        assert_eq!(f.count_family(ConstraintFamily::Capacity), 3);
        assert_eq!(f.count_family(ConstraintFamily::GateSum), 3);
        assert_eq!(f.count_family(ConstraintFamily::Latency), 2);
        assert_eq!(
            f.count_family(ConstraintFamily::GateCongestion),
            3 * NUM_CLASSES
        );
        assert_eq!(f.count_family(ConstraintFamily::Preassignment), 1);
        assert_eq!(f.count_family(ConstraintFamily::McCormick), 3 * z_count);
        assert_eq!(
            f.constraints.len(),
            2 + 3 + 3 + 2 + 3 * NUM_CLASSES + 1 + 3 * z_count
        );
    }

    #[test]
    fn variable_names_are_unique() {
        let inst = two_link_chain();
        let model = linearize(&inst);
        let mut names = model.form.var_names.clone();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), model.form.num_vars);
    }
}

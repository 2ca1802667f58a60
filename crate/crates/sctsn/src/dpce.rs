//! Default Path Computation Element.
//!
//! Low-priority and not-yet-classified traffic rides default paths chosen
//! by link weights that track utilization: weights stay flat while a link
//! is lightly used and grow linearly toward `w_max` as it saturates. Raw
//! weights are smoothed over the last three collection periods and the
//! routing weight only moves when the smoothed value drifts more than a
//! threshold away from it, which damps route oscillation under noisy load.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{min_weight_path, Path, Role, SwitchId, Topology};

#[derive(Debug, Error)]
pub enum DpceError {
    #[error("utilization {0} outside [0, 1]")]
    UtilizationRange(f64),
    #[error("weight history is empty")]
    EmptyHistory,
}

#[derive(Debug, Clone)]
pub struct DpceConfig {
    /// Utilization below which the weight stays at `w_min`.
    pub u_low: f64,
    pub w_min: f64,
    pub w_max: f64,
    /// Relative change of the smoothed weight that triggers an update.
    pub update_threshold: f64,
}

impl Default for DpceConfig {
    fn default() -> Self {
        DpceConfig {
            u_low: 0.3,
            w_min: 1.0,
            w_max: 10.0,
            update_threshold: 0.2,
        }
    }
}

/// Smoothing coefficients, newest first.
const SMOOTH: [f64; 3] = [0.5, 0.3, 0.2];

/// Piecewise-linear utilization-to-weight map: flat at `w_min` up to
/// `u_low`, then linear to `w_max` at full utilization.
pub fn map_utilization_to_weight(u: f64, cfg: &DpceConfig) -> Result<f64, DpceError> {
    if !(0.0..=1.0).contains(&u) {
        return Err(DpceError::UtilizationRange(u));
    }
    if u <= cfg.u_low {
        Ok(cfg.w_min)
    } else {
        Ok(cfg.w_min + (cfg.w_max - cfg.w_min) * (u - cfg.u_low) / (1.0 - cfg.u_low))
    }
}

/// Weighted average of up to the last three raw weights (newest first),
/// with the coefficients renormalized while the history is still filling.
pub fn smooth_weight(history: &[f64]) -> Result<f64, DpceError> {
    if history.is_empty() {
        return Err(DpceError::EmptyHistory);
    }
    let n = history.len().min(3);
    let norm: f64 = SMOOTH[..n].iter().sum();
    Ok(history[..n]
        .iter()
        .zip(&SMOOTH[..n])
        .map(|(w, c)| w * c)
        .sum::<f64>()
        / norm)
}

/// Strictly-greater comparison: a change of exactly the threshold does not
/// update.
pub fn should_update(new_weight: f64, active_weight: f64, cfg: &DpceConfig) -> bool {
    (new_weight - active_weight).abs() / active_weight > cfg.update_threshold
}

/// Per-link adaptive weight state.
#[derive(Debug, Clone)]
pub struct LinkWeightState {
    pub utilization: f64,
    /// Raw mapped weights of the most recent periods, newest first.
    history: Vec<f64>,
    pub active: f64,
}

impl LinkWeightState {
    fn new(w_min: f64) -> Self {
        LinkWeightState {
            utilization: 0.0,
            history: Vec::new(),
            active: w_min,
        }
    }

    /// Feeds one collection period's utilization; returns true when the
    /// active weight moved.
    pub fn observe(&mut self, u: f64, cfg: &DpceConfig) -> Result<bool, DpceError> {
        self.utilization = u;
        let raw = map_utilization_to_weight(u, cfg)?;
        self.history.insert(0, raw);
        self.history.truncate(3);
        let smoothed = smooth_weight(&self.history)?;
        if should_update(smoothed, self.active, cfg) {
            self.active = smoothed;
            Ok(true)
        } else {
            Ok(false)
        }
    }
}

/// Routing table delta produced by one recomputation.
#[derive(Debug, Clone, Default)]
pub struct RouteDelta {
    /// Ordered edge-switch pairs whose path changed, with the new path.
    pub changed: Vec<((SwitchId, SwitchId), Path)>,
    /// Pairs with no route under the current weights.
    pub disconnected: Vec<(SwitchId, SwitchId)>,
}

/// Routing engine state: per-link weights plus the current default path per
/// ordered edge-switch pair.
#[derive(Debug, Clone)]
pub struct Dpce {
    cfg: DpceConfig,
    states: Vec<LinkWeightState>,
    routes: BTreeMap<(SwitchId, SwitchId), Path>,
    /// Count of collection periods that changed at least one route.
    pub route_changes: u64,
}

impl Dpce {
    pub fn new(topo: &Topology, cfg: DpceConfig) -> Self {
        let states = (0..topo.links().len())
            .map(|_| LinkWeightState::new(cfg.w_min))
            .collect();
        let mut dpce = Dpce {
            cfg,
            states,
            routes: BTreeMap::new(),
            route_changes: 0,
        };
        // Initial table under the resting weights; not counted as a change.
        let _ = dpce.recompute(topo);
        dpce.route_changes = 0;
        dpce
    }

    pub fn config(&self) -> &DpceConfig {
        &self.cfg
    }

    pub fn link_state(&self, link: usize) -> &LinkWeightState {
        &self.states[link]
    }

    pub fn active_weights(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.active).collect()
    }

    pub fn route(&self, src: SwitchId, dst: SwitchId) -> Option<&Path> {
        self.routes.get(&(src, dst))
    }

    /// Feeds one collection period of per-link utilization. Paths are
    /// recomputed only when some active weight moved; the delta lists the
    /// pairs whose default path actually changed.
    pub fn observe_period(
        &mut self,
        topo: &Topology,
        utilization: &[f64],
    ) -> Result<RouteDelta, DpceError> {
        let mut any = false;
        for (state, &u) in self.states.iter_mut().zip(utilization) {
            any |= state.observe(u, &self.cfg)?;
        }
        if !any {
            return Ok(RouteDelta::default());
        }
        let delta = self.recompute(topo);
        if !delta.changed.is_empty() {
            self.route_changes += 1;
        }
        Ok(delta)
    }

    /// Minimum-weight default path for every ordered pair of edge switches.
    fn recompute(&mut self, topo: &Topology) -> RouteDelta {
        let weights = self.active_weights();
        let mut delta = RouteDelta::default();
        let edges: Vec<SwitchId> = topo
            .switches()
            .filter(|&s| topo.role(s) == Some(Role::Edge))
            .collect();
        for &src in &edges {
            for &dst in &edges {
                if src == dst {
                    continue;
                }
                match min_weight_path(topo, src, dst, &weights) {
                    Some(path) => {
                        let changed = self.routes.get(&(src, dst)) != Some(&path);
                        if changed {
                            self.routes.insert((src, dst), path.clone());
                            delta.changed.push(((src, dst), path));
                        }
                    }
                    None => {
                        self.routes.remove(&(src, dst));
                        delta.disconnected.push((src, dst));
                    }
                }
            }
        }
        delta
    }
}

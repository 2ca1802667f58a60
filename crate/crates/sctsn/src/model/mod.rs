//! Core domain model: switch-fabric topology, traffic demands, candidate
//! paths and the helpers shared by the routing and simulation modules.
//!
//! A topology is a set of switches connected by directed links (topology
//! files list undirected edges, each of which expands to the two directions)
//! plus end-hosts attached to switches. Switches are classified as `Edge` or
//! `Backbone` from their inter-switch degree; only edge switches accept host
//! attachments and run the ingress learning module.

mod ksp;
mod topofile;

pub use ksp::{all_simple_paths, k_shortest_paths, min_weight_path};
pub use topofile::{load_topology, load_topology_str};

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Default link capacity in bit/s used when a topology file gives none.
pub const DEFAULT_CAPACITY_BPS: f64 = 100e6;
/// Default per-link base delay in abstract latency units.
pub const DEFAULT_BASE_DELAY: f64 = 1.0;
/// Default per-link queueing factor in abstract latency units.
pub const DEFAULT_QUEUE_FACTOR: f64 = 0.5;
/// Default number of candidate paths generated per demand.
pub const DEFAULT_K_PATHS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SwitchId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HostId(pub u32);

impl SwitchId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl LinkId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Id of the link running in the opposite direction. Directed links are
    /// created in pairs, `2i` and `2i + 1`.
    pub fn reverse(self) -> LinkId {
        LinkId(self.0 ^ 1)
    }
}

impl HostId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Edge,
    Backbone,
}

/// One directed link of the switch fabric.
#[derive(Debug, Clone)]
pub struct Link {
    pub src: SwitchId,
    pub dst: SwitchId,
    /// Capacity in bit/s.
    pub capacity_bps: f64,
    /// Base delay `l^o` in abstract latency units.
    pub base_delay: f64,
    /// Queueing factor `l^q` in abstract latency units.
    pub queue_factor: f64,
}

#[derive(Debug, Clone)]
pub struct Host {
    pub name: String,
    pub switch: SwitchId,
}

#[derive(Debug, Clone, Default)]
pub struct Topology {
    switch_names: Vec<String>,
    name_index: BTreeMap<String, SwitchId>,
    links: Vec<Link>,
    hosts: Vec<Host>,
    /// Outgoing link ids per switch, sorted by destination name for
    /// deterministic traversal.
    out_links: Vec<Vec<LinkId>>,
    roles: Vec<Option<Role>>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid topology: {0}")]
    Invalid(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
}

impl Topology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_switch(&mut self, name: &str) -> Result<SwitchId, ModelError> {
        if self.name_index.contains_key(name) {
            return Err(ModelError::Invalid(format!("duplicate node `{name}`")));
        }
        let id = SwitchId(self.switch_names.len() as u32);
        self.switch_names.push(name.to_string());
        self.name_index.insert(name.to_string(), id);
        self.out_links.push(Vec::new());
        self.roles.push(None);
        Ok(id)
    }

    /// Adds an undirected edge as a pair of directed links and returns the
    /// id of the forward direction.
    pub fn add_edge(
        &mut self,
        a: SwitchId,
        b: SwitchId,
        capacity_bps: f64,
        base_delay: f64,
        queue_factor: f64,
    ) -> Result<LinkId, ModelError> {
        if a == b {
            return Err(ModelError::Invalid(format!(
                "self-loop on node `{}`",
                self.switch_name(a)
            )));
        }
        if capacity_bps <= 0.0 {
            return Err(ModelError::Invalid(format!(
                "link {}-{} has non-positive capacity",
                self.switch_name(a),
                self.switch_name(b)
            )));
        }
        if base_delay < 0.0 || queue_factor < 0.0 {
            return Err(ModelError::Invalid(format!(
                "link {}-{} has negative delay parameters",
                self.switch_name(a),
                self.switch_name(b)
            )));
        }
        let fwd = LinkId(self.links.len() as u32);
        self.links.push(Link {
            src: a,
            dst: b,
            capacity_bps,
            base_delay,
            queue_factor,
        });
        let rev = LinkId(self.links.len() as u32);
        self.links.push(Link {
            src: b,
            dst: a,
            capacity_bps,
            base_delay,
            queue_factor,
        });
        self.out_links[a.index()].push(fwd);
        self.out_links[b.index()].push(rev);
        Ok(fwd)
    }

    pub fn add_host(&mut self, name: &str, switch: SwitchId) -> Result<HostId, ModelError> {
        if self.hosts.iter().any(|h| h.name == name) {
            return Err(ModelError::Invalid(format!("duplicate host `{name}`")));
        }
        let id = HostId(self.hosts.len() as u32);
        self.hosts.push(Host {
            name: name.to_string(),
            switch,
        });
        Ok(id)
    }

    /// Sorts adjacency lists by destination name. Called once after
    /// construction so traversals are deterministic.
    pub(crate) fn finish(&mut self) {
        let links = &self.links;
        let names = &self.switch_names;
        for out in &mut self.out_links {
            out.sort_by(|x, y| {
                names[links[x.index()].dst.index()].cmp(&names[links[y.index()].dst.index()])
            });
        }
    }

    pub fn num_switches(&self) -> usize {
        self.switch_names.len()
    }

    pub fn num_hosts(&self) -> usize {
        self.hosts.len()
    }

    pub fn switches(&self) -> impl Iterator<Item = SwitchId> + '_ {
        (0..self.switch_names.len() as u32).map(SwitchId)
    }

    pub fn switch_name(&self, id: SwitchId) -> &str {
        &self.switch_names[id.index()]
    }

    pub fn switch_by_name(&self, name: &str) -> Option<SwitchId> {
        self.name_index.get(name).copied()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.index()]
    }

    pub fn link_name(&self, id: LinkId) -> String {
        let l = self.link(id);
        format!("{}->{}", self.switch_name(l.src), self.switch_name(l.dst))
    }

    pub fn hosts(&self) -> &[Host] {
        &self.hosts
    }

    pub fn host(&self, id: HostId) -> &Host {
        &self.hosts[id.index()]
    }

    pub fn host_by_name(&self, name: &str) -> Option<HostId> {
        self.hosts
            .iter()
            .position(|h| h.name == name)
            .map(|i| HostId(i as u32))
    }

    pub fn out_links(&self, s: SwitchId) -> &[LinkId] {
        &self.out_links[s.index()]
    }

    /// Directed link from `a` to `b`, if present.
    pub fn link_between(&self, a: SwitchId, b: SwitchId) -> Option<LinkId> {
        self.out_links[a.index()]
            .iter()
            .copied()
            .find(|&l| self.links[l.index()].dst == b)
    }

    /// Inter-switch degree (host attachments excluded).
    pub fn degree(&self, s: SwitchId) -> usize {
        self.out_links[s.index()].len()
    }

    pub fn role(&self, s: SwitchId) -> Option<Role> {
        self.roles[s.index()]
    }

    pub fn roles_assigned(&self) -> bool {
        self.roles.iter().all(|r| r.is_some()) && !self.roles.is_empty()
    }

    pub fn edge_switches(&self) -> Vec<SwitchId> {
        self.switches()
            .filter(|&s| self.roles[s.index()] == Some(Role::Edge))
            .collect()
    }

    /// Average inter-switch degree over the switch graph.
    pub fn average_degree(&self) -> f64 {
        if self.switch_names.is_empty() {
            return 0.0;
        }
        self.links.len() as f64 / self.switch_names.len() as f64
    }

    /// Structural validation: link endpoints declared, parameters positive,
    /// and, once roles are assigned, hosts attached to edge switches only.
    pub fn validate(&self) -> Result<(), ModelError> {
        for l in &self.links {
            if l.src.index() >= self.num_switches() || l.dst.index() >= self.num_switches() {
                return Err(ModelError::Invalid("link endpoint out of range".into()));
            }
            if l.capacity_bps <= 0.0 {
                return Err(ModelError::Invalid(format!(
                    "link {} has non-positive capacity",
                    self.link_name(LinkId(0))
                )));
            }
        }
        for h in &self.hosts {
            if h.switch.index() >= self.num_switches() {
                return Err(ModelError::UnknownNode(h.name.clone()));
            }
            if let Some(role) = self.roles[h.switch.index()] {
                if role != Role::Edge {
                    return Err(ModelError::Invalid(format!(
                        "host `{}` attached to backbone switch `{}`",
                        h.name,
                        self.switch_name(h.switch)
                    )));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn set_role(&mut self, s: SwitchId, role: Role) {
        self.roles[s.index()] = Some(role);
    }
}

/// Assigns edge/backbone roles: a switch is an edge switch iff its
/// inter-switch degree is strictly below the average switch degree.
pub fn classify_switch_roles(mut topo: Topology) -> Topology {
    let avg = topo.average_degree();
    for s in 0..topo.num_switches() {
        let id = SwitchId(s as u32);
        let role = if (topo.degree(id) as f64) < avg {
            Role::Edge
        } else {
            Role::Backbone
        };
        topo.set_role(id, role);
    }
    topo
}

/// Service class, 0..=7. Class 7 is the highest priority, class 0 is
/// best-effort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ServiceClass(pub u8);

pub const NUM_CLASSES: usize = 8;
pub const CLASS_TT: ServiceClass = ServiceClass(7);
pub const CLASS_BE: ServiceClass = ServiceClass(0);

impl ServiceClass {
    pub fn new(c: u8) -> Result<Self, ModelError> {
        if c > 7 {
            return Err(ModelError::Invalid(format!(
                "service class {c} out of range"
            )));
        }
        Ok(ServiceClass(c))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Identifier of a stream: talker host, listener host and a per-pair index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StreamKey {
    pub src: HostId,
    pub dst: HostId,
    pub index: u16,
}

impl fmt::Display for StreamKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.src.0, self.dst.0, self.index)
    }
}

/// A stream's routing-relevant profile.
#[derive(Debug, Clone)]
pub struct Demand {
    pub id: StreamKey,
    pub class: ServiceClass,
    /// Offered load in bit/s.
    pub load_bps: f64,
    /// Latency bound in abstract latency units.
    pub latency_bound: f64,
    /// Frame period in seconds; absent for best-effort demands.
    pub period: Option<f64>,
    pub frame_bytes: u32,
}

impl Demand {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.load_bps <= 0.0 {
            return Err(ModelError::Invalid(format!(
                "demand {} has non-positive load",
                self.id
            )));
        }
        if self.latency_bound <= 0.0 {
            return Err(ModelError::Invalid(format!(
                "demand {} has non-positive latency bound",
                self.id
            )));
        }
        if let Some(p) = self.period {
            let expected = self.frame_bytes as f64 * 8.0 / p;
            if (expected - self.load_bps).abs() > 1e-6 * expected.max(1.0) {
                return Err(ModelError::Invalid(format!(
                    "demand {}: load {} does not match frame size / period ({expected})",
                    self.id, self.load_bps
                )));
            }
        }
        Ok(())
    }

    /// Load implied by a frame size and period.
    pub fn periodic_load_bps(frame_bytes: u32, period_s: f64) -> f64 {
        frame_bytes as f64 * 8.0 / period_s
    }
}

/// A simple directed path through the switch fabric, stored as the ordered
/// list of traversed links.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    links: Vec<LinkId>,
}

impl Path {
    /// Builds a path and checks the structural invariants: consecutive links
    /// share a node and no node repeats.
    pub fn new(topo: &Topology, links: Vec<LinkId>) -> Result<Self, ModelError> {
        if links.is_empty() {
            return Err(ModelError::Invalid("empty path".into()));
        }
        let mut seen = vec![false; topo.num_switches()];
        let first = topo.link(links[0]);
        seen[first.src.index()] = true;
        let mut at = first.src;
        for &l in &links {
            let link = topo.link(l);
            if link.src != at {
                return Err(ModelError::Invalid("path links not contiguous".into()));
            }
            at = link.dst;
            if seen[at.index()] {
                return Err(ModelError::Invalid("path revisits a node".into()));
            }
            seen[at.index()] = true;
        }
        Ok(Path { links })
    }

    pub fn links(&self) -> &[LinkId] {
        &self.links
    }

    pub fn hops(&self) -> usize {
        self.links.len()
    }

    pub fn source(&self, topo: &Topology) -> SwitchId {
        topo.link(self.links[0]).src
    }

    pub fn target(&self, topo: &Topology) -> SwitchId {
        topo.link(*self.links.last().unwrap()).dst
    }

    /// Node sequence, source first.
    pub fn nodes(&self, topo: &Topology) -> Vec<SwitchId> {
        let mut nodes = vec![self.source(topo)];
        nodes.extend(self.links.iter().map(|&l| topo.link(l).dst));
        nodes
    }

    pub fn contains_link(&self, l: LinkId) -> bool {
        self.links.contains(&l)
    }

    pub fn display(&self, topo: &Topology) -> String {
        self.nodes(topo)
            .iter()
            .map(|&n| topo.switch_name(n))
            .collect::<Vec<_>>()
            .join("->")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Topology {
        let mut t = Topology::new();
        let a = t.add_switch("a").unwrap();
        let b = t.add_switch("b").unwrap();
        let c = t.add_switch("c").unwrap();
        t.add_edge(a, b, 100e6, 1.0, 0.5).unwrap();
        t.add_edge(b, c, 100e6, 1.0, 0.5).unwrap();
        t.add_edge(a, c, 100e6, 1.0, 0.5).unwrap();
        t.finish();
        t
    }

    #[test]
    fn undirected_edges_expand_to_directed_pairs() {
        let t = triangle();
        assert_eq!(t.links().len(), 6);
        let ab = t.link_between(SwitchId(0), SwitchId(1)).unwrap();
        assert_eq!(t.link(ab.reverse()).src, SwitchId(1));
        assert_eq!(t.link(ab.reverse()).dst, SwitchId(0));
    }

    #[test]
    fn star_roles_forced_by_definition() {
        let mut t = Topology::new();
        let hub = t.add_switch("hub").unwrap();
        for n in ["l1", "l2", "l3"] {
            let leaf = t.add_switch(n).unwrap();
            t.add_edge(hub, leaf, 100e6, 1.0, 0.5).unwrap();
        }
        t.finish();
        let t = classify_switch_roles(t);
        assert_eq!(t.role(hub), Some(Role::Backbone));
        for s in t.switches().skip(1) {
            assert_eq!(t.role(s), Some(Role::Edge));
        }
    }

    #[test]
    fn ring_has_no_edge_switches() {
        let mut t = Topology::new();
        let ids: Vec<_> = (0..5)
            .map(|i| t.add_switch(&format!("r{i}")).unwrap())
            .collect();
        for i in 0..5 {
            t.add_edge(ids[i], ids[(i + 1) % 5], 100e6, 1.0, 0.5)
                .unwrap();
        }
        t.finish();
        let t = classify_switch_roles(t);
        assert!(t.switches().all(|s| t.role(s) == Some(Role::Backbone)));
    }

    #[test]
    fn role_classification_ignores_hosts() {
        // Attaching many hosts to one leaf must not change its role.
        let mut t = Topology::new();
        let hub = t.add_switch("hub").unwrap();
        let l1 = t.add_switch("l1").unwrap();
        let l2 = t.add_switch("l2").unwrap();
        let l3 = t.add_switch("l3").unwrap();
        for l in [l1, l2, l3] {
            t.add_edge(hub, l, 100e6, 1.0, 0.5).unwrap();
        }
        for i in 0..10 {
            t.add_host(&format!("h{i}"), l1).unwrap();
        }
        t.finish();
        let t = classify_switch_roles(t);
        assert_eq!(t.role(l1), Some(Role::Edge));
    }

    #[test]
    fn path_invariants_enforced() {
        let t = triangle();
        let ab = t.link_between(SwitchId(0), SwitchId(1)).unwrap();
        let bc = t.link_between(SwitchId(1), SwitchId(2)).unwrap();
        let ca = t.link_between(SwitchId(2), SwitchId(0)).unwrap();
        assert!(Path::new(&t, vec![ab, bc]).is_ok());
        // not contiguous
        assert!(Path::new(&t, vec![ab, ca]).is_err());
        // revisits node a
        assert!(Path::new(&t, vec![ab, bc, ca]).is_err());
    }

    #[test]
    fn periodic_demand_load_consistency() {
        let d = Demand {
            id: StreamKey {
                src: HostId(0),
                dst: HostId(1),
                index: 0,
            },
            class: CLASS_TT,
            load_bps: Demand::periodic_load_bps(1522, 0.01),
            latency_bound: 6.0,
            period: Some(0.01),
            frame_bytes: 1522,
        };
        d.validate().unwrap();
        let bad = Demand { load_bps: 1.0, ..d };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn role_classification_invariant_under_relabeling() {
        // Same structure built under permuted names: roles follow the node,
        // not the label.
        let build = |names: [&str; 4]| {
            let mut t = Topology::new();
            let ids: Vec<_> = names.iter().map(|n| t.add_switch(n).unwrap()).collect();
            t.add_edge(ids[0], ids[1], 100e6, 1.0, 0.5).unwrap();
            t.add_edge(ids[0], ids[2], 100e6, 1.0, 0.5).unwrap();
            t.add_edge(ids[0], ids[3], 100e6, 1.0, 0.5).unwrap();
            t.finish();
            classify_switch_roles(t)
        };
        let a = build(["hub", "x", "y", "z"]);
        let b = build(["zz", "b", "a", "c"]);
        for i in 0..4 {
            assert_eq!(a.role(SwitchId(i)), b.role(SwitchId(i)));
        }
    }

    #[test]
    fn host_on_backbone_rejected() {
        let mut t = Topology::new();
        let hub = t.add_switch("hub").unwrap();
        for n in ["l1", "l2", "l3"] {
            let leaf = t.add_switch(n).unwrap();
            t.add_edge(hub, leaf, 100e6, 1.0, 0.5).unwrap();
        }
        t.add_host("h0", hub).unwrap();
        t.finish();
        let t = classify_switch_roles(t);
        assert!(t.validate().is_err());
    }
}

//! Topology file parsing.
//!
//! Format (UTF-8, `#` starts a comment, blank lines ignored):
//!
//! ```text
//! version 1
//!
//! [nodes]
//! a
//! b
//!
//! [edges]
//! # undirected; expands to both directions. Optional overrides:
//! a b cap=200e6 lo=1.0 lq=0.5
//!
//! [hosts]
//! # either explicit attachments ...
//! h1 a
//! # ... or a per-edge-switch count (hosts named <switch>_h<i>):
//! per_edge 10
//! ```
//!
//! `per_edge` materializes hosts on the switches whose inter-switch degree
//! is below average, the same rule `classify_switch_roles` applies later.

use std::fs;
use std::path::Path as FsPath;

use super::{
    classify_switch_roles, ModelError, Role, Topology, DEFAULT_BASE_DELAY, DEFAULT_CAPACITY_BPS,
    DEFAULT_QUEUE_FACTOR,
};

#[derive(PartialEq, Clone, Copy)]
enum Section {
    None,
    Nodes,
    Edges,
    Hosts,
}

fn err(line: usize, msg: impl Into<String>) -> ModelError {
    ModelError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Loads and validates a topology from a file. Roles are not assigned; call
/// [`classify_switch_roles`] afterwards.
pub fn load_topology(path: &FsPath) -> Result<Topology, ModelError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ModelError::Invalid(format!("cannot read {}: {e}", path.display())))?;
    load_topology_str(&text)
}

/// Parses a topology from text. See the module docs for the grammar.
pub fn load_topology_str(text: &str) -> Result<Topology, ModelError> {
    let mut topo = Topology::new();
    let mut section = Section::None;
    let mut saw_version = false;
    let mut per_edge: Option<(usize, u32)> = None; // (line, count)

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
        match line {
            "[nodes]" => {
                section = Section::Nodes;
                continue;
            }
            "[edges]" => {
                section = Section::Edges;
                continue;
            }
            "[hosts]" => {
                section = Section::Hosts;
                continue;
            }
            _ => {}
        }
        if line.starts_with('[') {
            return Err(err(lineno, format!("unknown section `{line}`")));
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match section {
            Section::None => {
                if tokens[0] == "version" {
                    if tokens.len() != 2 || tokens[1] != "1" {
                        return Err(err(lineno, "unsupported version"));
                    }
                    saw_version = true;
                } else {
                    return Err(err(lineno, "expected `version 1` before sections"));
                }
            }
            Section::Nodes => {
                if tokens.len() != 1 {
                    return Err(err(lineno, "node lines hold a single name"));
                }
                topo.add_switch(tokens[0])
                    .map_err(|e| err(lineno, e.to_string()))?;
            }
            Section::Edges => {
                if tokens.len() < 2 {
                    return Err(err(lineno, "edge lines need two node names"));
                }
                let a = topo
                    .switch_by_name(tokens[0])
                    .ok_or_else(|| err(lineno, format!("unknown node `{}`", tokens[0])))?;
                let b = topo
                    .switch_by_name(tokens[1])
                    .ok_or_else(|| err(lineno, format!("unknown node `{}`", tokens[1])))?;
                let mut cap = DEFAULT_CAPACITY_BPS;
                let mut lo = DEFAULT_BASE_DELAY;
                let mut lq = DEFAULT_QUEUE_FACTOR;
                for t in &tokens[2..] {
                    let (key, value) = t
                        .split_once('=')
                        .ok_or_else(|| err(lineno, format!("expected key=value, got `{t}`")))?;
                    let v: f64 = value
                        .parse()
                        .map_err(|_| err(lineno, format!("bad number `{value}`")))?;
                    match key {
                        "cap" => cap = v,
                        "lo" => lo = v,
                        "lq" => lq = v,
                        _ => return Err(err(lineno, format!("unknown edge attribute `{key}`"))),
                    }
                }
                topo.add_edge(a, b, cap, lo, lq)
                    .map_err(|e| err(lineno, e.to_string()))?;
            }
            Section::Hosts => {
                if tokens[0] == "per_edge" {
                    if tokens.len() != 2 {
                        return Err(err(lineno, "per_edge takes a single count"));
                    }
                    let count: u32 = tokens[1]
                        .parse()
                        .map_err(|_| err(lineno, format!("bad count `{}`", tokens[1])))?;
                    per_edge = Some((lineno, count));
                } else {
                    if tokens.len() != 2 {
                        return Err(err(lineno, "host lines are `<host> <switch>`"));
                    }
                    let sw = topo
                        .switch_by_name(tokens[1])
                        .ok_or_else(|| err(lineno, format!("unknown node `{}`", tokens[1])))?;
                    topo.add_host(tokens[0], sw)
                        .map_err(|e| err(lineno, e.to_string()))?;
                }
            }
        }
    }
    if !saw_version {
        return Err(err(1, "missing `version 1` header"));
    }
    topo.finish();
    if let Some((lineno, count)) = per_edge {
        // Materialize hosts on the switches the degree rule will classify as
        // edge switches. Roles themselves stay unassigned.
        let classified = classify_switch_roles(topo.clone());
        let mut any = false;
        for s in classified.switches() {
            if classified.role(s) == Some(Role::Edge) {
                any = true;
                for i in 1..=count {
                    let name = format!("{}_h{}", classified.switch_name(s), i);
                    topo.add_host(&name, s)
                        .map_err(|e| err(lineno, e.to_string()))?;
                }
            }
        }
        if !any && count > 0 {
            return Err(err(
                lineno,
                "per_edge given but no switch has below-average degree",
            ));
        }
    }
    topo.validate()?;
    Ok(topo)
}

//! Instance files and solution dumps for the standalone `solve` command.
//!
//! Instance format (UTF-8, `#` comments):
//!
//! ```text
//! version 1
//! [links]
//! e0 cap=100e6 lo=1.0 lq=0.5
//! e1                                # defaults: cap=100e6 lo=1.0 lq=0.5
//! [demands]
//! d0 class=7 load=2e6 bound=6.0
//! [paths]
//! d0 e0 e1                          # candidates accumulate in rank order
//! [preassign]
//! d0 0                              # pin demand d0 to its candidate 0
//! ```

use std::fs;
use std::path::Path as FsPath;

use crate::model::{DEFAULT_BASE_DELAY, DEFAULT_CAPACITY_BPS, DEFAULT_QUEUE_FACTOR, NUM_CLASSES};

use super::{TsorDemand, TsorError, TsorInstance, TsorLink, TsorSolution};

fn err(line: usize, msg: impl Into<String>) -> TsorError {
    TsorError::BadInstance(format!("line {line}: {}", msg.into()))
}

pub fn load_instance(path: &FsPath) -> Result<TsorInstance, TsorError> {
    let text = fs::read_to_string(path)
        .map_err(|e| TsorError::BadInstance(format!("cannot read {}: {e}", path.display())))?;
    load_instance_str(&text)
}

pub fn load_instance_str(text: &str) -> Result<TsorInstance, TsorError> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Links,
        Demands,
        Paths,
        Preassign,
    }
    let mut section = Section::None;
    let mut saw_version = false;
    let mut inst = TsorInstance::default();

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
            "[links]" => {
                section = Section::Links;
                continue;
            }
            "[demands]" => {
                section = Section::Demands;
                continue;
            }
            "[paths]" => {
                section = Section::Paths;
                continue;
            }
            "[preassign]" => {
                section = Section::Preassign;
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
                if tokens.len() == 2 && tokens[0] == "version" && tokens[1] == "1" {
                    saw_version = true;
                } else {
                    return Err(err(lineno, "expected `version 1`"));
                }
            }
            Section::Links => {
                let name = tokens[0].to_string();
                if inst.links.iter().any(|l| l.name == name) {
                    return Err(err(lineno, format!("duplicate link `{name}`")));
                }
                let mut link = TsorLink {
                    name,
                    capacity_bps: DEFAULT_CAPACITY_BPS,
                    base_delay: DEFAULT_BASE_DELAY,
                    queue_factor: DEFAULT_QUEUE_FACTOR,
                };
                for t in &tokens[1..] {
                    let (k, v) = t
                        .split_once('=')
                        .ok_or_else(|| err(lineno, format!("expected key=value, got `{t}`")))?;
                    let v: f64 = v
                        .parse()
                        .map_err(|_| err(lineno, format!("bad number `{v}`")))?;
                    match k {
                        "cap" => link.capacity_bps = v,
                        "lo" => link.base_delay = v,
                        "lq" => link.queue_factor = v,
                        _ => return Err(err(lineno, format!("unknown link attribute `{k}`"))),
                    }
                }
                inst.links.push(link);
            }
            Section::Demands => {
                let name = tokens[0].to_string();
                if inst.demands.iter().any(|d| d.name == name) {
                    return Err(err(lineno, format!("duplicate demand `{name}`")));
                }
                let mut class: Option<u8> = None;
                let mut load: Option<f64> = None;
                let mut bound: Option<f64> = None;
                for t in &tokens[1..] {
                    let (k, v) = t
                        .split_once('=')
                        .ok_or_else(|| err(lineno, format!("expected key=value, got `{t}`")))?;
                    match k {
                        "class" => {
                            let c: u8 = v
                                .parse()
                                .map_err(|_| err(lineno, format!("bad class `{v}`")))?;
                            if c as usize >= NUM_CLASSES {
                                return Err(err(lineno, format!("class {c} out of range")));
                            }
                            class = Some(c);
                        }
                        "load" => {
                            load = Some(
                                v.parse()
                                    .map_err(|_| err(lineno, format!("bad number `{v}`")))?,
                            )
                        }
                        "bound" => {
                            bound = Some(
                                v.parse()
                                    .map_err(|_| err(lineno, format!("bad number `{v}`")))?,
                            )
                        }
                        _ => return Err(err(lineno, format!("unknown demand attribute `{k}`"))),
                    }
                }
                inst.demands.push(TsorDemand {
                    name,
                    class: class.ok_or_else(|| err(lineno, "demand needs class="))?,
                    load_bps: load.ok_or_else(|| err(lineno, "demand needs load="))?,
                    latency_bound: bound.ok_or_else(|| err(lineno, "demand needs bound="))?,
                });
                inst.candidates.push(Vec::new());
                inst.preassigned.push(None);
            }
            Section::Paths => {
                if tokens.len() < 2 {
                    return Err(err(lineno, "path lines are `<demand> <link...>`"));
                }
                let d = inst
                    .demands
                    .iter()
                    .position(|x| x.name == tokens[0])
                    .ok_or_else(|| err(lineno, format!("unknown demand `{}`", tokens[0])))?;
                let mut path = Vec::new();
                for t in &tokens[1..] {
                    let e = inst
                        .links
                        .iter()
                        .position(|l| l.name == *t)
                        .ok_or_else(|| err(lineno, format!("unknown link `{t}`")))?;
                    path.push(e);
                }
                inst.candidates[d].push(path);
            }
            Section::Preassign => {
                if tokens.len() != 2 {
                    return Err(err(lineno, "preassign lines are `<demand> <path index>`"));
                }
                let d = inst
                    .demands
                    .iter()
                    .position(|x| x.name == tokens[0])
                    .ok_or_else(|| err(lineno, format!("unknown demand `{}`", tokens[0])))?;
                let p: usize = tokens[1]
                    .parse()
                    .map_err(|_| err(lineno, format!("bad path index `{}`", tokens[1])))?;
                inst.preassigned[d] = Some(p);
            }
        }
    }
    if !saw_version {
        return Err(err(1, "missing `version 1` header"));
    }
    inst.validate()?;
    Ok(inst)
}

/// CSV dump of a solution: one row per assignment variable and per gate
/// variable, then the objective.
pub fn dump_solution_csv(inst: &TsorInstance, sol: &TsorSolution) -> String {
    let mut out = String::from("variable,value\n");
    for (d, demand) in inst.demands.iter().enumerate() {
        for p in 0..inst.candidates[d].len() {
            let v = if sol.path_choice[d] == p { 1.0 } else { 0.0 };
            out.push_str(&format!("x[{},{p}],{v:.0}\n", demand.name));
        }
    }
    for (e, link) in inst.links.iter().enumerate() {
        for (s, g) in sol.gates[e].iter().enumerate() {
            out.push_str(&format!("g[{},{s}],{g:.9}\n", link.name));
        }
    }
    out.push_str(&format!("objective,{:.9}\n", sol.objective));
    out
}

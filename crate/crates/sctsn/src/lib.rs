//! Self-configuring TSN controller loop and simulator.
//!
//! New streams enter the network untagged and ride utilization-adaptive
//! default paths ([`dpce`]) while the ingress edge switch learns their
//! frame period from arrival timestamps ([`learner`]). Streams classified
//! time-triggered are placed on optimized paths with per-class gate
//! fractions by a mixed-integer routing program ([`tsor`]) and migrated
//! with an ordered rule update. The deterministic discrete-event simulator
//! ([`simnet`]) executes this loop, or an a-priori baseline where every
//! periodic demand is known before traffic starts, and reports latency,
//! classification and delayed-frame metrics.
//!
//! ```no_run
//! use sctsn::model::{classify_switch_roles, load_topology};
//! use sctsn::simnet::{run, Mode, Scenario};
//!
//! let topo = classify_switch_roles(load_topology("net.topo".as_ref())?);
//! let mut scenario = Scenario::new(topo, Mode::ScTsn, 42);
//! scenario.tt_sources = 10;
//! scenario.be_sources = 5;
//! let report = run(&scenario)?;
//! println!("{}", report.summary());
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod dpce;
pub mod learner;
pub(crate) mod linprog;
pub mod model;
pub mod simnet;
pub mod tsor;

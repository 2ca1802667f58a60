use std::fs;
use std::path::{Path, PathBuf};

use sctsn::learner::{self, LearnerConfig};
use sctsn::model::{classify_switch_roles, load_topology};
use sctsn::simnet::{self, Mode, Scenario};
use sctsn::tsor;

use crate::experiment::{self, ExperimentSpec};
use crate::CliError;

fn ensure_out(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", out.display())))
}

/// Writes via a temporary file so concurrent cells never expose partial
/// output.
fn write_atomic(path: &Path, content: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content)
        .and_then(|()| fs::rename(&tmp, path))
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

pub fn cmd_run(
    scenario_path: &Path,
    seed: Option<u64>,
    mode: Option<&str>,
    k_paths: Option<usize>,
    trace: bool,
    out: &Path,
) -> Result<(), CliError> {
    let mut sc =
        Scenario::from_file(scenario_path).map_err(|e| CliError::Validation(e.to_string()))?;
    if let Some(seed) = seed {
        sc.seed = seed;
    }
    if let Some(mode) = mode {
        sc.mode = Mode::parse(mode).expect("clap restricts the values");
    }
    if let Some(k) = k_paths {
        sc.k_paths = k;
    }
    sc.frame_trace |= trace;
    sc.validate()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let report = simnet::run(&sc).map_err(|e| CliError::Internal(e.to_string()))?;
    ensure_out(out)?;
    let stem = scenario_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    let base = format!("{stem}_{}_{}", sc.mode.as_str(), sc.seed);
    write_atomic(
        &out.join(format!("{base}_metrics.csv")),
        &report.metrics_csv(),
    )?;
    write_atomic(&out.join(format!("{base}_links.csv")), &report.links_csv())?;
    write_atomic(
        &out.join(format!("{base}_streams.csv")),
        &report.streams_csv(),
    )?;
    if sc.frame_trace {
        write_atomic(
            &out.join(format!("{base}_frames.csv")),
            &report.frames_csv(),
        )?;
    }
    print!("{}", report.summary());
    println!("reports written to {}", out.display());
    Ok(())
}

pub fn cmd_sweep(experiment_path: &Path, out: &Path) -> Result<(), CliError> {
    let spec = ExperimentSpec::from_file(experiment_path)?;
    ensure_out(out)?;
    let (rows, agg) = experiment::run_sweep(&spec)?;
    write_atomic(&out.join("sweep.csv"), &rows)?;
    write_atomic(&out.join("sweep_agg.csv"), &agg)?;
    println!("sweep written to {}", out.display());
    Ok(())
}

pub fn cmd_learn_test(
    traces: &[PathBuf],
    window: Option<usize>,
    out: &Path,
) -> Result<(), CliError> {
    if traces.is_empty() {
        return Err(CliError::Validation("no trace files given".into()));
    }
    let cfg = LearnerConfig::default();
    let mut csv =
        String::from("trace,arrivals,class,valid,period_us,p_max_us,confidence,mean_ia_us\n");
    println!(
        "{:<24} {:>8} {:>10} {:>12} {:>10} {:>11} {:>12}",
        "trace", "arrivals", "class", "period_us", "p_max_us", "confidence", "mean_ia_us"
    );
    for path in traces {
        let ts = learner::load_trace(path).map_err(|e| CliError::Validation(e.to_string()))?;
        let mean_ia = learner::mean_interarrival(&ts).unwrap_or(0.0) * 1e6;
        let slice = match window {
            Some(w) if w < ts.len() => &ts[ts.len() - w..],
            _ => &ts[..],
        };
        let est = learner::estimate_period(slice, &cfg)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let class = if est.valid && est.confidence >= cfg.confidence_threshold {
            "tt"
        } else if slice.len() >= cfg.window {
            "be"
        } else {
            "undecided"
        };
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        println!(
            "{:<24} {:>8} {:>10} {:>12.3} {:>10.3} {:>11.3} {:>12.3}",
            name,
            slice.len(),
            class,
            est.period * 1e6,
            est.p_max * 1e6,
            est.confidence,
            mean_ia
        );
        csv.push_str(&format!(
            "{},{},{},{},{:.3},{:.3},{:.6},{:.3}\n",
            name,
            slice.len(),
            class,
            est.valid,
            est.period * 1e6,
            est.p_max * 1e6,
            est.confidence,
            mean_ia
        ));
    }
    ensure_out(out)?;
    write_atomic(&out.join("learn_test.csv"), &csv)?;
    Ok(())
}

pub fn cmd_solve(instance_path: &Path, brute: bool, out: &Path) -> Result<(), CliError> {
    let inst = tsor::load_instance(instance_path).map_err(map_tsor_err)?;
    let sol = tsor::solve(&inst).map_err(map_tsor_err)?;
    let report = tsor::verify_solution(&inst, &sol);
    println!("objective {:.9}", sol.objective);
    println!("residuals:\n{report}");
    if brute {
        let oracle = tsor::brute_force_solve(&inst).map_err(map_tsor_err)?;
        let delta = (sol.objective - oracle.objective).abs();
        println!(
            "reference objective {:.9} (|delta| = {delta:.3e})",
            oracle.objective
        );
        if delta > 1e-6 {
            return Err(CliError::Internal(format!(
                "solver and reference disagree by {delta:.3e}"
            )));
        }
    }
    ensure_out(out)?;
    let stem = instance_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into());
    write_atomic(
        &out.join(format!("{stem}_solution.csv")),
        &tsor::dump_solution_csv(&inst, &sol),
    )?;
    Ok(())
}

fn map_tsor_err(e: tsor::TsorError) -> CliError {
    match e {
        tsor::TsorError::Infeasible(report) => CliError::Infeasible(report.to_string()),
        tsor::TsorError::BadInstance(m) => CliError::Validation(m),
        tsor::TsorError::OracleGuard(m) => CliError::Validation(m),
        tsor::TsorError::Model(m) => CliError::Validation(m.to_string()),
        tsor::TsorError::Solver(m) => CliError::Internal(m),
    }
}

pub fn cmd_validate(file: &Path) -> Result<(), CliError> {
    let ext = file.extension().and_then(|e| e.to_str()).unwrap_or("");
    match ext {
        "topo" => {
            let topo = load_topology(file).map_err(|e| CliError::Validation(e.to_string()))?;
            let topo = classify_switch_roles(topo);
            topo.validate()
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let edges = topo.edge_switches().len();
            println!(
                "ok: {} switches ({edges} edge, {} backbone), {} directed links, {} hosts",
                topo.num_switches(),
                topo.num_switches() - edges,
                topo.links().len(),
                topo.num_hosts()
            );
        }
        "scn" => {
            let sc = Scenario::from_file(file).map_err(|e| CliError::Validation(e.to_string()))?;
            println!(
                "ok: mode {}, {} periodic and {} best-effort sources, duration {}s",
                sc.mode.as_str(),
                sc.tt_sources,
                sc.be_sources,
                sc.duration as f64 / 1e9
            );
        }
        "tsi" => {
            let inst = tsor::load_instance(file).map_err(map_tsor_err)?;
            println!(
                "ok: {} links, {} demands, {} candidate paths",
                inst.links.len(),
                inst.demands.len(),
                inst.candidates.iter().map(|c| c.len()).sum::<usize>()
            );
        }
        other => {
            return Err(CliError::Validation(format!(
                "unknown file extension `.{other}` (expected .topo, .scn or .tsi)"
            )))
        }
    }
    Ok(())
}

//! Subcommand implementations. Everything flows from one config: build the
//! scenario, map the load to per-station demand, solve or evaluate the
//! requested scheme, and validate stable points by simulation.

use std::path::Path;

use rayon::prelude::*;

use hetnet_core::power::{alternate, PowerBudget, PowerError, PowerIterationConfig, PowerStep};
use hetnet_core::sim::simulate;
use hetnet_core::{
    build_efficiency_table, full_reuse_baseline, solve, solve_orthogonal_baseline, Deployment,
    HexGrid, OptimizerError, Scenario, SolveReport, SolveStatus, SpectralEfficiencyTable,
    TrafficProfile, SUPPORT_THRESHOLD,
};

use crate::config::{ExperimentConfig, LoadScale, Scheme, TrafficMode};
use crate::output::{emit, render_csv, sig9, RowStatus, SweepRow};
use crate::CliError;

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

pub fn build_scenario(cfg: &ExperimentConfig) -> Result<Scenario, CliError> {
    let t = &cfg.topology;
    let grid =
        HexGrid::generate(t.area_width_m, t.area_height_m, t.spacing_m).map_err(config_err)?;
    let deployment = Deployment::generate(grid, t.num_bts, t.seed).map_err(config_err)?;
    let table = build_efficiency_table(&deployment, &cfg.radio).map_err(config_err)?;
    Ok(Scenario {
        deployment,
        radio: cfg.radio.clone(),
        table,
    })
}

/// Per-station arrival rates for one scalar load figure.
pub fn traffic_for(
    cfg: &ExperimentConfig,
    deployment: &Deployment,
    load: f64,
) -> Result<TrafficProfile, CliError> {
    let k = deployment.num_bts();
    let weights: Vec<f64> = match cfg.traffic.mode {
        TrafficMode::Uniform => vec![1.0; k],
        TrafficMode::Proportional => {
            let mut served = vec![0.0; k];
            for assoc in &deployment.association {
                for a in assoc {
                    served[a.bts] += a.weight;
                }
            }
            served
        }
    };
    let total: f64 = weights.iter().sum();
    let scale = match cfg.traffic.scale {
        LoadScale::PerStation => load * k as f64 / total,
        LoadScale::NetworkTotal => load / total,
    };
    TrafficProfile::new(weights.iter().map(|w| w * scale).collect()).map_err(config_err)
}

fn scheme_report(
    scheme: Scheme,
    table: &SpectralEfficiencyTable,
    traffic: &TrafficProfile,
    cfg: &ExperimentConfig,
) -> Result<SolveReport, OptimizerError> {
    match scheme {
        Scheme::Optimal => solve(table, traffic, &cfg.solver),
        Scheme::Orthogonal => solve_orthogonal_baseline(table, traffic, &cfg.solver),
        Scheme::FullReuse => full_reuse_baseline(table, traffic),
    }
}

/// Solve and simulate one (load, scheme) point. Solver failures become an
/// in-row status so sweeps keep going; the note carries the detail.
fn eval_point(
    scenario: &Scenario,
    cfg: &ExperimentConfig,
    load: f64,
    scheme: Scheme,
    sim_seed: u64,
) -> (SweepRow, Option<String>) {
    let traffic = match traffic_for(cfg, &scenario.deployment, load) {
        Ok(t) => t,
        Err(e) => {
            return (
                SweepRow::empty(load, scheme, RowStatus::Error),
                Some(format!("load {load} ({scheme}): {e}")),
            )
        }
    };
    let report = match scheme_report(scheme, &scenario.table, &traffic, cfg) {
        Ok(r) => r,
        Err(e) => {
            return (
                SweepRow::empty(load, scheme, RowStatus::Error),
                Some(format!("load {load} ({scheme}): {e}")),
            )
        }
    };
    let Some(solution) = report.solution else {
        return (SweepRow::empty(load, scheme, RowStatus::Infeasible), None);
    };
    if report.status == SolveStatus::Infeasible {
        return (SweepRow::empty(load, scheme, RowStatus::Infeasible), None);
    }

    let mut sim_cfg = cfg.sim.clone();
    sim_cfg.seed = sim_seed;
    let sim = match simulate(&scenario.table, &solution.partition, &traffic, &sim_cfg) {
        Ok(s) => s,
        Err(e) => {
            return (
                SweepRow::empty(load, scheme, RowStatus::Error),
                Some(format!("load {load} ({scheme}) simulation: {e}")),
            )
        }
    };
    let support_size = solution.support_size();
    let (simulated, ci, status) = if sim.replications_used == 0 {
        (None, None, RowStatus::Diverged)
    } else if sim.diverged {
        (
            Some(sim.aggregate_sojourn),
            Some(sim.aggregate_ci95),
            RowStatus::Diverged,
        )
    } else {
        (
            Some(sim.aggregate_sojourn),
            Some(sim.aggregate_ci95),
            RowStatus::Ok,
        )
    };
    (
        SweepRow {
            load,
            scheme,
            analytic_delay: Some(solution.objective),
            simulated_delay: simulated,
            ci95: ci,
            support_size,
            status,
        },
        None,
    )
}

/// All (load, scheme) points in config order. Points run in parallel;
/// the row order is fixed by the config regardless of completion order.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let scenario = build_scenario(cfg)?;
    let points: Vec<(f64, Scheme, u64)> = cfg
        .sweep
        .loads
        .iter()
        .enumerate()
        .flat_map(|(li, &load)| {
            // One seed per load, shared by every scheme: comparisons at a
            // load then see identical arrival processes.
            let seed = cfg
                .sim
                .seed
                .wrapping_add((li as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            cfg.sweep
                .schemes
                .iter()
                .map(move |&scheme| (load, scheme, seed))
        })
        .collect();

    let evaluated: Vec<(SweepRow, Option<String>)> = points
        .par_iter()
        .map(|&(load, scheme, seed)| eval_point(&scenario, cfg, load, scheme, seed))
        .collect();

    let mut rows = Vec::with_capacity(evaluated.len());
    for (row, note) in evaluated {
        if let Some(note) = note {
            eprintln!("warning: {note}");
        }
        rows.push(row);
    }

    emit(&render_csv(&rows), cfg.output.as_deref())?;

    if rows.iter().any(|r| r.status == RowStatus::Ok) {
        Ok(())
    } else if rows.iter().all(|r| r.status == RowStatus::Infeasible) {
        Err(CliError::Infeasible(
            "every sweep point is infeasible".into(),
        ))
    } else {
        Err(CliError::Numeric(
            "no sweep point produced a usable result".into(),
        ))
    }
}

fn optimizer_err(e: OptimizerError) -> CliError {
    CliError::Numeric(e.to_string())
}

pub fn cmd_solve(
    cfg: &ExperimentConfig,
    load: f64,
    report_path: Option<&Path>,
) -> Result<(), CliError> {
    let scenario = build_scenario(cfg)?;
    let traffic = traffic_for(cfg, &scenario.deployment, load)?;
    let report = solve(&scenario.table, &traffic, &cfg.solver).map_err(optimizer_err)?;

    if let Some(path) = report_path {
        let text = serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::Numeric(format!("cannot serialize report: {e}")))?;
        std::fs::write(path, text)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    }

    match (&report.status, &report.solution) {
        (SolveStatus::Infeasible, _) | (_, None) => Err(CliError::Infeasible(format!(
            "no stable partition at load {load}"
        ))),
        (status, Some(sol)) => {
            println!("status           {status:?}");
            println!("objective        {}", sig9(sol.objective));
            println!("outer iterations {}", report.outer_iterations);
            println!(
                "segments         {} (stations: {})",
                sol.support_size(),
                scenario.table.num_bts()
            );
            for (b, f) in sol.partition.support(SUPPORT_THRESHOLD) {
                println!("  {b:<12} width {}", sig9(f));
            }
            for (i, (r, l)) in sol.rates.iter().zip(traffic.rates()).enumerate() {
                println!(
                    "  bts {i}: demand {} service {} margin {}",
                    sig9(*l),
                    sig9(*r),
                    sig9(r - l)
                );
            }
            Ok(())
        }
    }
}

pub fn cmd_simulate(cfg: &ExperimentConfig, load: f64, scheme: Scheme) -> Result<(), CliError> {
    let scenario = build_scenario(cfg)?;
    let (row, note) = eval_point(&scenario, cfg, load, scheme, cfg.sim.seed);
    if let Some(note) = note {
        eprintln!("warning: {note}");
    }
    emit(
        &render_csv(std::slice::from_ref(&row)),
        cfg.output.as_deref(),
    )?;
    match row.status {
        RowStatus::Ok | RowStatus::Diverged => Ok(()),
        RowStatus::Infeasible => Err(CliError::Infeasible(format!(
            "{scheme} is unstable at load {load}"
        ))),
        RowStatus::Error => Err(CliError::Numeric(format!(
            "solver failed at load {load} ({scheme})"
        ))),
    }
}

/// Textual support table: one row per station, one column per segment,
/// columns in bitmask order, `#` marking membership.
pub fn cmd_partition(cfg: &ExperimentConfig, load: f64) -> Result<(), CliError> {
    let scenario = build_scenario(cfg)?;
    let traffic = traffic_for(cfg, &scenario.deployment, load)?;
    let report = solve(&scenario.table, &traffic, &cfg.solver).map_err(optimizer_err)?;
    let sol = match (report.status, report.solution) {
        (SolveStatus::Infeasible, _) | (_, None) => {
            return Err(CliError::Infeasible(format!(
                "no stable partition at load {load}"
            )))
        }
        (_, Some(sol)) => sol,
    };

    let k = scenario.table.num_bts();
    let support = sol.partition.support(SUPPORT_THRESHOLD);
    println!(
        "load {}  objective {}  segments {} (stations {k})",
        sig9(load),
        sig9(sol.objective),
        support.len()
    );
    println!();

    let labels: Vec<String> = support.iter().map(|(b, _)| b.to_string()).collect();
    let widths: Vec<String> = support.iter().map(|(_, f)| format!("{f:.4}")).collect();
    let cols: Vec<usize> = labels
        .iter()
        .zip(&widths)
        .map(|(l, w)| l.len().max(w.len()))
        .collect();

    let head = |name: &str, cells: &[String]| {
        let mut line = format!("{name:<8}");
        for (c, cell) in cells.iter().enumerate() {
            line.push_str(&format!("  {:<width$}", cell, width = cols[c]));
        }
        println!("{}", line.trim_end());
    };
    head("segment", &labels);
    head("width", &widths);
    for i in 0..k {
        let marks: Vec<String> = support
            .iter()
            .map(|(b, _)| {
                if b.contains(i) {
                    "#".into()
                } else {
                    ".".into()
                }
            })
            .collect();
        head(&format!("bts {i}"), &marks);
    }
    Ok(())
}

pub fn cmd_power(
    cfg: &ExperimentConfig,
    load: f64,
    pmax: f64,
    max_rounds: usize,
) -> Result<(), CliError> {
    let scenario = build_scenario(cfg)?;
    let traffic = traffic_for(cfg, &scenario.deployment, load)?;
    let budget = PowerBudget::uniform(scenario.deployment.num_bts(), pmax)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let power_cfg = PowerIterationConfig {
        max_rounds,
        solver: cfg.solver.clone(),
        ..PowerIterationConfig::default()
    };
    let out = alternate(
        &scenario.deployment,
        &scenario.radio,
        &budget,
        &traffic,
        &power_cfg,
    )
    .map_err(|e| match e {
        PowerError::Infeasible { round } => CliError::Infeasible(format!(
            "demand became unsupportable in round {round} at load {load}"
        )),
        other => CliError::Numeric(other.to_string()),
    })?;

    let mut text = String::from("phase,round,objective,support_size\n");
    let mut round = 0usize;
    for point in &out.trace {
        let phase = match point.step {
            PowerStep::Init => "init",
            PowerStep::PsdUpdate => {
                round += 1;
                "psd_update"
            }
            PowerStep::SpectrumUpdate => "spectrum_update",
        };
        text.push_str(&format!(
            "{phase},{round},{},{}\n",
            sig9(point.objective),
            point.support_size
        ));
    }
    text.push_str(&format!(
        "converged={},{},{},{}\n",
        out.converged,
        out.rounds,
        sig9(out.objective),
        out.partition.support_size(SUPPORT_THRESHOLD)
    ));
    emit(&text, cfg.output.as_deref())
}

pub fn cmd_gen(cfg: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let scenario = build_scenario(cfg)?;
    scenario
        .save(out)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", out.display())))?;
    let d = &scenario.deployment;
    println!(
        "wrote {}: {} stations on {} cells ({} vertices), seed {}",
        out.display(),
        d.num_bts(),
        d.grid.cells.len(),
        d.grid.vertices.len(),
        cfg.topology.seed
    );
    Ok(())
}

//! Subcommand implementations. Each returns `Ok(false)` only when a
//! reproduction check fails.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use dynsolow::analysis::{analyze_trajectory, cycle_durations, detrend, duration_histogram, regime_fraction};
use dynsolow::equilibria::{condition_forms_disagree, equilibria as find_equilibria, probe_limit_cycle, SCAN_HORIZON};
use dynsolow::integrator::{phase_portrait, AttractorLabel};
use dynsolow::params::{fmt_f64, is_param_key, load_config, set_param, validate, InitialState, ModelParams, RegimeMode, SimConfig};
use dynsolow::reproduce::run_scenario;
use dynsolow::stochastic::mix_seed;
use dynsolow::integrator::simulate as run;
use dynsolow::{EquilibriumPoint, ReducedState};
use rayon::prelude::*;

use crate::output::{ensure_dir, write_atomic, write_text, Manifest};
use crate::Common;

struct Loaded {
    params: ModelParams,
    sim: SimConfig,
}

fn load(common: &Common) -> Result<Loaded> {
    let text = match &common.config {
        Some(path) => fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        None => String::new(),
    };
    let loaded = load_config(&text)?;
    for w in loaded.params.warnings() {
        eprintln!("warning: {w}");
    }
    let params = *loaded.params.params();
    let mut sim = loaded.sim;
    if let Some(seed) = common.seed {
        sim.seed = seed;
    }
    if let Some(mode) = common.mode {
        sim.regime_mode = mode;
        if !loaded.overrides.iter().any(|k| k.starts_with("initial_")) {
            sim.initial = InitialState::default_for(&params, mode);
        }
    }
    sim.validate()?;
    Ok(Loaded { params, sim })
}

pub fn simulate(common: &Common, out: &Path) -> Result<bool> {
    let started = Instant::now();
    let cfg = load(common)?;
    ensure_dir(out)?;
    let traj = run(&cfg.params, &cfg.sim)?;
    write_atomic(&out.join("trajectory.csv"), |w| traj.write_csv(w))?;
    Manifest {
        command: "simulate",
        params: &cfg.params,
        sim: &cfg.sim,
        extra: vec![("samples".into(), traj.len().to_string())],
        outputs: vec!["trajectory.csv".into()],
        elapsed: started.elapsed(),
    }
    .write(out)?;
    println!("wrote {} samples to {}", traj.len(), out.join("trajectory.csv").display());
    Ok(true)
}

fn fmt_eigen(e: &EquilibriumPoint) -> String {
    let parts: Vec<String> = e
        .eigenvalues
        .iter()
        .map(|c| format!("{:+.6e}{:+.6e}i", c.re, c.im))
        .collect();
    parts.join(" ")
}

pub fn equilibria(common: &Common) -> Result<bool> {
    let cfg = load(common)?;
    if let Some((derived, unscaled)) = condition_forms_disagree(&cfg.params) {
        eprintln!(
            "warning: the equilibrium condition without the rho factor on c2 gives {unscaled} equilibria; \
             the reduced system has {derived}"
        );
    }
    let points = find_equilibria(&cfg.params)?;
    println!("s,h,z,eigenvalues,kind,stability");
    for e in &points {
        println!(
            "{},{},{},{},{},{}",
            fmt_f64(e.s),
            fmt_f64(e.h),
            fmt_f64(e.z),
            fmt_eigen(e),
            e.kind,
            e.stability
        );
    }
    Ok(true)
}

/// Starting points for phase portraits: a 5 x 5 grid in `(s, h)` at `z = 0`.
fn portrait_grid() -> Vec<ReducedState> {
    let axis = [-0.8, -0.4, 0.0, 0.4, 0.8];
    axis.iter()
        .flat_map(|&s| axis.iter().map(move |&h| ReducedState::new(s, h, 0.0)))
        .collect()
}

pub fn portrait(common: &Common, out: &Path) -> Result<bool> {
    let started = Instant::now();
    let cfg = load(common)?;
    ensure_dir(out)?;
    let (points, runs) = phase_portrait(&cfg.params, &portrait_grid(), cfg.sim.t_end)?;
    let mut eq = String::from("index,s,h,z,kind,stability\n");
    for (i, e) in points.iter().enumerate() {
        let _ = writeln!(eq, "{i},{},{},{},{},{}", fmt_f64(e.s), fmt_f64(e.h), fmt_f64(e.z), e.kind, e.stability);
    }
    write_text(&out.join("equilibria.csv"), &eq)?;
    write_atomic(&out.join("portrait.csv"), |w| {
        writeln!(w, "trajectory,label,t,s,h,z")?;
        for (id, run) in runs.iter().enumerate() {
            let label = match run.label {
                AttractorLabel::Equilibrium(i) => format!("equilibrium_{i}"),
                AttractorLabel::Cycle => "cycle".into(),
                AttractorLabel::Unresolved => "unresolved".into(),
            };
            let c = run.trajectory.reduced().expect("portrait runs are reduced");
            for (i, t) in run.trajectory.times.iter().enumerate() {
                writeln!(w, "{id},{label},{},{},{},{}", fmt_f64(*t), fmt_f64(c.s[i]), fmt_f64(c.h[i]), fmt_f64(c.z[i]))?;
            }
        }
        Ok(())
    })?;
    Manifest {
        command: "portrait",
        params: &cfg.params,
        sim: &cfg.sim,
        extra: vec![("trajectories".into(), runs.len().to_string())],
        outputs: vec!["equilibria.csv".into(), "portrait.csv".into()],
        elapsed: started.elapsed(),
    }
    .write(out)?;
    println!("{} equilibria, {} trajectories", points.len(), runs.len());
    Ok(true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub name: String,
    pub values: Vec<f64>,
}

pub fn parse_grid(spec: &str) -> Result<GridAxis> {
    let Some((name, list)) = spec.split_once('=') else {
        bail!(dynsolow::Error::InvalidConfig {
            field: "grid",
            reason: format!("`{spec}` is not of the form name=v1,v2,..."),
        });
    };
    let name = name.trim().to_string();
    if name != "seed" && !is_param_key(&name) {
        bail!(dynsolow::Error::InvalidConfig {
            field: "grid",
            reason: format!("`{name}` is neither a model parameter nor `seed`"),
        });
    }
    let values = list
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<f64>().map_err(|e| dynsolow::Error::MalformedValue {
                line: 0,
                key: name.clone(),
                reason: format!("grid value `{v}`: {e}"),
            })
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(GridAxis { name, values })
}

/// Cartesian product with the last axis varying fastest.
pub fn grid_points(axes: &[GridAxis]) -> Vec<Vec<f64>> {
    if axes.is_empty() {
        return Vec::new();
    }
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}

fn thread_pool(parallel: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(parallel).build()?)
}

fn csv_safe(s: &str) -> String {
    s.replace([',', '\n'], ";")
}

struct PointSetup {
    params: ModelParams,
    sim: SimConfig,
}

fn point_setup(base: &Loaded, axes: &[GridAxis], values: &[f64], index: usize) -> Result<PointSetup> {
    let mut params = base.params;
    let mut sim = base.sim;
    sim.seed = mix_seed(base.sim.seed, index as u64);
    for (axis, &v) in axes.iter().zip(values) {
        if axis.name == "seed" {
            if !(v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64) {
                bail!(dynsolow::Error::InvalidConfig {
                    field: "seed",
                    reason: format!("grid seed {v} is not a non-negative integer"),
                });
            }
            sim.seed = v as u64;
        } else {
            set_param(&mut params, &axis.name, v).expect("grid names are checked");
        }
    }
    let params = validate(params)?.into_inner();
    Ok(PointSetup { params, sim })
}

fn sweep_reduced_row(setup: &PointSetup) -> Result<String> {
    let points = find_equilibria(&setup.params)?;
    let cycle = probe_limit_cycle(&setup.params, SCAN_HORIZON)?;
    let kinds: Vec<String> = points.iter().map(|e| e.kind.to_string()).collect();
    let stab: Vec<String> = points.iter().map(|e| e.stability.to_string()).collect();
    let (period, amp) = cycle.map_or((String::new(), String::new()), |c| (fmt_f64(c.period), fmt_f64(c.amplitude)));
    Ok(format!("ok,{},{},{},{period},{amp},", points.len(), kinds.join(";"), stab.join(";")))
}

fn sweep_run_row(setup: &PointSetup, dir: &Path, elapsed_from: Instant) -> Result<String> {
    let traj = run(&setup.params, &setup.sim)?;
    let report = analyze_trajectory(&setup.params, &traj)?;
    let fraction = match setup.sim.regime_mode {
        RegimeMode::General => fmt_f64(regime_fraction(&traj)?),
        _ => String::new(),
    };
    ensure_dir(dir)?;
    write_text(&dir.join("report.txt"), &report.to_text())?;
    Manifest {
        command: "sweep",
        params: &setup.params,
        sim: &setup.sim,
        extra: Vec::new(),
        outputs: vec!["report.txt".into()],
        elapsed: elapsed_from.elapsed(),
    }
    .write(dir)?;
    Ok(format!(
        "ok,{},{},{},{},{fraction},",
        fmt_f64(report.y.slope),
        fmt_f64(report.k_s.slope),
        fmt_f64(report.k_d.slope),
        fmt_f64(report.mean_sentiment)
    ))
}

pub fn sweep(common: &Common, grid: &[String], parallel: usize, out: &Path) -> Result<bool> {
    let started = Instant::now();
    let base = load(common)?;
    let axes = grid.iter().map(|g| parse_grid(g)).collect::<Result<Vec<_>>>()?;
    let points = grid_points(&axes);
    ensure_dir(out)?;
    let reduced = base.sim.regime_mode == RegimeMode::ReducedDeterministic;

    let names: Vec<&str> = axes.iter().map(|a| a.name.as_str()).collect();
    let mut header = String::from("index,seed");
    for n in &names {
        header.push(',');
        header.push_str(n);
    }
    header.push_str(if reduced {
        ",status,n_equilibria,kinds,stabilities,cycle_period_days,cycle_amplitude,error"
    } else {
        ",status,slope_y,slope_k_s,slope_k_d,mean_sentiment,regime_fraction,error"
    });
    let empty_cols = ",,,,,";

    let rows: Vec<String> = thread_pool(parallel)?.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(index, values)| {
                let mut prefix = index.to_string();
                let setup = point_setup(&base, &axes, values, index);
                let seed = setup.as_ref().map(|s| s.sim.seed.to_string()).unwrap_or_default();
                let _ = write!(prefix, ",{seed}");
                for v in values {
                    let _ = write!(prefix, ",{}", fmt_f64(*v));
                }
                let body = setup.and_then(|s| {
                    if reduced {
                        sweep_reduced_row(&s)
                    } else {
                        sweep_run_row(&s, &out.join(format!("point_{index:05}")), Instant::now())
                    }
                });
                match body {
                    Ok(b) => format!("{prefix},{b}"),
                    Err(e) => format!("{prefix},error{empty_cols},{}", csv_safe(&format!("{e:#}"))),
                }
            })
            .collect()
    });

    write_atomic(&out.join("sweep.csv"), |w| {
        writeln!(w, "{header}")?;
        for r in &rows {
            writeln!(w, "{r}")?;
        }
        Ok(())
    })?;
    let grid_meta: Vec<String> = grid.iter().map(|g| g.replace(' ', "")).collect();
    Manifest {
        command: "sweep",
        params: &base.params,
        sim: &base.sim,
        extra: vec![
            ("grid".into(), grid_meta.join(" ")),
            ("points".into(), rows.len().to_string()),
        ],
        outputs: vec!["sweep.csv".into()],
        elapsed: started.elapsed(),
    }
    .write(out)?;
    let failed = rows.iter().filter(|r| r.contains(",error,")).count();
    println!("{} grid points, {failed} with errors", rows.len());
    Ok(true)
}

pub fn analyze(common: &Common, out: &Path) -> Result<bool> {
    let started = Instant::now();
    let cfg = load(common)?;
    ensure_dir(out)?;
    let traj = run(&cfg.params, &cfg.sim)?;
    let report = analyze_trajectory(&cfg.params, &traj)?;
    let mut text = report.to_text();
    let mut outputs = vec!["report.txt".to_string()];
    if cfg.sim.regime_mode == RegimeMode::General {
        let _ = writeln!(text, "regime_fraction: {}", fmt_f64(regime_fraction(&traj)?));
        let y = &traj.full().expect("general runs are full").y;
        let resid = detrend(&traj.times, y)?;
        match cycle_durations(&traj.times, &resid) {
            Ok(d) => {
                let h = duration_histogram(&d);
                let _ = writeln!(text, "cycles: {}", h.total);
                let _ = writeln!(text, "band_fraction: {}", fmt_f64(h.band_fraction));
                write_atomic(&out.join("histogram.csv"), |w| h.write_csv(w))?;
                outputs.push("histogram.csv".into());
            }
            Err(e) => {
                let _ = writeln!(text, "cycles: {e}");
            }
        }
    }
    write_text(&out.join("report.txt"), &text)?;
    Manifest {
        command: "analyze",
        params: &cfg.params,
        sim: &cfg.sim,
        extra: Vec::new(),
        outputs,
        elapsed: started.elapsed(),
    }
    .write(out)?;
    print!("{text}");
    Ok(true)
}

pub fn reproduce(scenario: &str, parallel: usize, out: &Path) -> Result<bool> {
    let report = thread_pool(parallel)?.install(|| run_scenario(scenario))?;
    let dir = out.join(scenario);
    ensure_dir(&dir)?;
    let text = report.to_text();
    write_text(&dir.join("report.txt"), &text)?;
    for (name, content) in &report.files {
        write_text(&dir.join(name), content)?;
    }
    print!("{text}");
    Ok(report.passed())
}

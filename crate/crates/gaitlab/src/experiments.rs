//! The experiments behind each subcommand. Each writes its artifacts into
//! `out` and returns a one-line summary. When a gait fails partway, the
//! artifacts gathered so far are written before the error is returned.

use std::path::{Path, PathBuf};

use gaitlab_core::biped::{impact_map, to_quasi, BipedState};
use gaitlab_core::biped_analysis::{
    find_stable_fixed_point, lift_to_full_state, lip_seed, stability_report, yaw_period_check,
    BipedPoincareReport, Reduced, ReportSettings, SolverStep, YawReport,
};
use gaitlab_core::control::{closed_loop_step, ClosedLoop, IMPACT_TOLERANCE};
use gaitlab_core::hybrid::{run_hybrid, HybridTrace, ImpactRecord};
use gaitlab_core::lip::{
    flow, kinetic_energy, step, sync_measure, synchronized_start, LipModel, LipState,
};
use gaitlab_core::lip_analysis::{
    analytic_lambda, convergence_experiment, lambda_sample, lip_poincare_report, perturbed_start,
    ConvergenceRow, LambdaSample, LipPoincareReport, LipReportSettings,
};
use gaitlab_core::Error;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{jitter, ExperimentConfig};
use crate::error::CliError;
use crate::table::{self, Field};

pub const LIP_SIM_STEPS: usize = 10;
pub const LIP_CONVERGENCE_STEPS: usize = 10;
pub const BIPED_SIM_STEPS: usize = 20;
pub const BIPED_REPORT_STEPS: usize = 40;

pub const STEP_HEADER: [&str; 5] = ["n", "alpha", "gamma", "thetadot_y", "v"];
pub const SWEEP_HEADER: [&str; 7] = [
    "x0",
    "y0",
    "K0",
    "lambda_analytic",
    "lambda_numeric",
    "abs_diff",
    "feasible",
];

fn prepare(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|source| CliError::Io {
        path: out.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: PathBuf, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    table::write_text(&path, &text)
}

fn fail_after<T>(failure: Option<Error>, ok: T) -> Result<T, CliError> {
    match failure {
        Some(e) => Err(CliError::Model(e)),
        None => Ok(ok),
    }
}

/// Synchronized start with the configured measure offset.
fn lip_start(cfg: &ExperimentConfig) -> Result<LipState, CliError> {
    let lip = &cfg.lip;
    let p = &lip.params;
    let mut rng = cfg.rng();
    let l0 = p.gamma_star() * (lip.perturbation + jitter(&mut rng, lip.random_perturbation));
    let mut s = synchronized_start(p, lip.k0)?;
    s.ydot = (l0 - p.gamma_star()) / s.xdot;
    Ok(s)
}

/// Steps with the polished closed-form crossing, sampled every
/// `step_size` for the trace.
fn exact_trace(start: &LipState, cfg: &ExperimentConfig, n: usize) -> HybridTrace<4> {
    let p = &cfg.lip.params;
    let h = cfg.lip.integrator.step_size;
    let mut trace = HybridTrace {
        phases: Vec::new(),
        events: Vec::new(),
        failure: None,
    };
    let (mut t0, mut s) = (0.0, *start);
    for _ in 0..n {
        match step(&s, p, &cfg.lip.integrator) {
            Ok(r) => {
                let k = (r.duration / h).ceil() as usize;
                let mut phase: Vec<(f64, [f64; 4])> = (0..k)
                    .map(|i| (t0 + i as f64 * h, flow(&s, p, i as f64 * h).to_array()))
                    .collect();
                phase.push((t0 + r.duration, r.pre_impact.to_array()));
                trace.phases.push(phase);
                t0 += r.duration;
                trace.events.push(ImpactRecord {
                    time: t0,
                    pre_impact: r.pre_impact.to_array(),
                    post_impact: r.post_impact.to_array(),
                });
                s = r.post_impact;
            }
            Err(e) => {
                trace.failure = Some(e);
                break;
            }
        }
    }
    if trace.failure.is_none() {
        trace.phases.push(vec![(t0, s.to_array())]);
    }
    trace
}

#[derive(Serialize)]
struct LipSimSummary {
    steps_requested: usize,
    events: usize,
    start: LipState,
    final_state: Option<LipState>,
    failure: Option<String>,
}

pub fn lip_sim(cfg: &ExperimentConfig, out: &Path) -> Result<String, CliError> {
    prepare(out)?;
    let p = cfg.lip.params;
    let n = cfg.steps.unwrap_or(LIP_SIM_STEPS);
    let start = lip_start(cfg)?;
    let model = LipModel {
        params: p,
        closed_form: cfg.lip.closed_form,
    };
    let trace = if cfg.lip.closed_form {
        exact_trace(&start, cfg, n)
    } else {
        run_hybrid(&model, &start.to_array(), n, &cfg.lip.integrator)
    };

    let samples: Vec<Vec<Field>> = trace
        .phases
        .iter()
        .flatten()
        .map(|(t, x)| vec![(*t).into(), x[0].into(), x[1].into(), x[2].into(), x[3].into()])
        .collect();
    table::write(&out.join("lip_trace.csv"), &["t", "x", "y", "xdot", "ydot"], &samples)?;

    let event_row = |n: usize, t: f64, s: &LipState| {
        vec![
            n.into(),
            t.into(),
            s.x.into(),
            s.y.into(),
            s.xdot.into(),
            s.ydot.into(),
            kinetic_energy(s).into(),
            sync_measure(s, &p).into(),
        ]
    };
    let mut events = vec![event_row(0, 0.0, &start)];
    for (i, e) in trace.events.iter().enumerate() {
        events.push(event_row(i + 1, e.time, &LipState::from_array(e.post_impact)));
    }
    table::write(
        &out.join("lip_events.csv"),
        &["n", "t", "x", "y", "xdot", "ydot", "kinetic", "sync_measure"],
        &events,
    )?;

    let summary = LipSimSummary {
        steps_requested: n,
        events: trace.events.len(),
        start,
        final_state: trace.final_state().map(|x| LipState::from_array(*x)),
        failure: trace.failure.as_ref().map(|e| e.to_string()),
    };
    write_json(out.join("lip_sim.json"), &summary)?;
    let msg = format!("lip-sim: {} of {n} steps", summary.events);
    fail_after(trace.failure, msg)
}

fn convergence_rows(rows: &[ConvergenceRow]) -> Vec<Vec<Field>> {
    rows.iter()
        .map(|r| vec![r.n.into(), r.l.into(), r.alpha.into(), r.gamma.into(), r.v.into()])
        .collect()
}

const CONVERGENCE_HEADER: [&str; 5] = ["n", "L", "alpha", "gamma", "v"];

fn lip_report_settings(cfg: &ExperimentConfig) -> LipReportSettings {
    let mut rng = cfg.rng();
    LipReportSettings {
        k0: cfg.lip.k0,
        fd_step: cfg.lip.fd_step,
        relative_perturbation: cfg.lip.perturbation + jitter(&mut rng, cfg.lip.random_perturbation),
        n_steps: cfg.steps.unwrap_or(LIP_CONVERGENCE_STEPS),
    }
}

pub fn lip_poincare(cfg: &ExperimentConfig, out: &Path) -> Result<String, CliError> {
    prepare(out)?;
    let p = &cfg.lip.params;
    let settings = lip_report_settings(cfg);
    let report: LipPoincareReport = lip_poincare_report(p, &settings, &cfg.lip.integrator)?;
    let start = perturbed_start(p, settings.k0, settings.relative_perturbation * p.gamma_star())?;
    let record = convergence_experiment(&start, p, settings.n_steps, &cfg.lip.integrator);
    table::write(
        &out.join("lip_convergence.csv"),
        &CONVERGENCE_HEADER,
        &convergence_rows(&record.rows),
    )?;
    write_json(out.join("lip_poincare.json"), &report)?;
    let jgg = report.jacobian[(1, 1)];
    Ok(format!(
        "lip-poincare: lambda = {:.12}, J_gamma_gamma = {:.12}, |J + lambda| = {:.3e}",
        report.analytic_lambda,
        jgg,
        (jgg + report.analytic_lambda).abs()
    ))
}

#[derive(Serialize)]
struct ConvergenceSummary<'a> {
    analytic_lambda: f64,
    rows: &'a [ConvergenceRow],
    ratios: Vec<f64>,
    failure: Option<String>,
}

pub fn lip_convergence(cfg: &ExperimentConfig, out: &Path) -> Result<String, CliError> {
    prepare(out)?;
    let p = &cfg.lip.params;
    let settings = lip_report_settings(cfg);
    let lambda = analytic_lambda(p, settings.k0)?;
    let start = perturbed_start(p, settings.k0, settings.relative_perturbation * p.gamma_star())?;
    let record = convergence_experiment(&start, p, settings.n_steps, &cfg.lip.integrator);
    table::write(
        &out.join("lip_convergence.csv"),
        &CONVERGENCE_HEADER,
        &convergence_rows(&record.rows),
    )?;
    let ratios = record.ratios();
    write_json(
        out.join("lip_convergence.json"),
        &ConvergenceSummary {
            analytic_lambda: lambda,
            rows: &record.rows,
            ratios: ratios.clone(),
            failure: record.failure.as_ref().map(|e| e.to_string()),
        },
    )?;
    let last = ratios.last().copied().unwrap_or(f64::NAN);
    let msg = format!("lip-convergence: last ratio {last:.9}, -lambda = {:.9}", -lambda);
    fail_after(record.failure, msg)
}

/// Evaluates the sweep grid in parallel; rows come back in grid order
/// (`x0` slowest, `K0` fastest).
pub fn sweep_samples(cfg: &ExperimentConfig) -> Vec<LambdaSample> {
    let s = &cfg.sweep;
    let grid: Vec<(f64, f64, f64)> = s
        .x0
        .iter()
        .flat_map(|&x| s.y0.iter().flat_map(move |&y| s.k0.iter().map(move |&k| (x, y, k))))
        .collect();
    grid.par_iter()
        .map(|&(x, y, k)| lambda_sample(&cfg.lip.params, x, y, k, s.fd_step, &cfg.lip.integrator))
        .collect()
}

pub fn lambda_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<String, CliError> {
    prepare(out)?;
    let samples = sweep_samples(cfg);
    let rows: Vec<Vec<Field>> = samples
        .iter()
        .map(|s| {
            vec![
                s.x0.into(),
                s.y0.into(),
                s.k0.into(),
                s.lambda_analytic.into(),
                s.lambda_numeric.into(),
                s.abs_diff.into(),
                s.feasible.into(),
            ]
        })
        .collect();
    table::write(&out.join("lambda_sweep.csv"), &SWEEP_HEADER, &rows)?;
    let feasible: Vec<&LambdaSample> = samples.iter().filter(|s| s.feasible).collect();
    let worst = feasible.iter().map(|s| s.abs_diff).fold(0.0, f64::max);
    Ok(format!(
        "lambda-sweep: {} points, {} feasible, max |diff| = {worst:.3e}",
        samples.len(),
        feasible.len()
    ))
}

fn biped_model(cfg: &ExperimentConfig) -> Result<ClosedLoop, CliError> {
    ClosedLoop::new(&cfg.biped.params, &cfg.biped.control).map_err(CliError::invalid)
}

fn biped_seed(cfg: &ExperimentConfig, model: &ClosedLoop) -> Result<Reduced, CliError> {
    match cfg.biped.start {
        Some(s) => Ok(s),
        None => Ok(lip_seed(model, cfg.biped.control.nominal_k0)?),
    }
}

fn perturbation(cfg: &ExperimentConfig) -> Reduced {
    let mut rng = cfg.rng();
    let b = &cfg.biped;
    core::array::from_fn(|i| b.perturbation[i] + jitter(&mut rng, b.random_perturbation))
}

fn step_row(n: usize, x: &Reduced) -> Vec<Field> {
    vec![n.into(), x[0].into(), x[1].into(), x[2].into(), x[3].into()]
}

#[derive(Serialize)]
struct BipedSimSummary {
    start: Reduced,
    steps_requested: usize,
    steps_completed: usize,
    final_state: BipedState,
    failure: Option<String>,
}

pub fn biped_sim(cfg: &ExperimentConfig, out: &Path) -> Result<String, CliError> {
    prepare(out)?;
    let model = biped_model(cfg)?;
    let c = &model.controller;
    let n = cfg.steps.unwrap_or(BIPED_SIM_STEPS);
    let seed = biped_seed(cfg, &model)?;
    let dx = perturbation(cfg);
    let start: Reduced = core::array::from_fn(|i| seed[i] + dx[i]);
    let mut state = lift_to_full_state(&start, &c.config.gait, &c.params)?;

    let mut steps = vec![step_row(0, &start)];
    let mut diag = Vec::new();
    let mut failure = None;
    for k in 1..=n {
        let next = impact_map(&state, &c.params, IMPACT_TOLERANCE)
            .and_then(|post| closed_loop_step(&model, &post, &cfg.biped.integrator))
            .and_then(|s| Ok((to_quasi(&s.pre_impact, &c.params)?.reduced(), s)));
        match next {
            Ok((xr, s)) => {
                steps.push(step_row(k, &xr));
                diag.push(vec![
                    k.into(),
                    s.duration.into(),
                    s.pre_impact.world_yaw().into(),
                    s.outputs.max_error().into(),
                    s.min_clearance.into(),
                ]);
                state = s.pre_impact;
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    table::write(&out.join("biped_steps.csv"), &STEP_HEADER, &steps)?;
    table::write(
        &out.join("biped_sim_diagnostics.csv"),
        &["n", "duration", "world_yaw", "m_p_residual", "min_clearance"],
        &diag,
    )?;
    write_json(
        out.join("biped_sim.json"),
        &BipedSimSummary {
            start,
            steps_requested: n,
            steps_completed: diag.len(),
            final_state: state,
            failure: failure.as_ref().map(|e| e.to_string()),
        },
    )?;
    let msg = format!("biped-sim: {} of {n} steps", diag.len());
    fail_after(failure, msg)
}

#[derive(Serialize)]
struct FixedPointSummary {
    point: Reduced,
    residual: f64,
    iterations: usize,
    history: Vec<(SolverStep, f64)>,
}

#[derive(Serialize)]
struct BipedPoincareSummary<'a> {
    seed: Reduced,
    fixed_point: FixedPointSummary,
    report: &'a BipedPoincareReport,
    yaw: &'a YawReport,
}

pub fn biped_poincare(cfg: &ExperimentConfig, out: &Path) -> Result<String, CliError> {
    prepare(out)?;
    let model = biped_model(cfg)?;
    let b = &cfg.biped;
    let seed = biped_seed(cfg, &model)?;
    let fp = find_stable_fixed_point(&seed, b.settle_steps, &model, &b.integrator)?;
    let settings = ReportSettings {
        perturbation: perturbation(cfg),
        n_steps: cfg.steps.unwrap_or(BIPED_REPORT_STEPS),
        fd_step: b.fd_step,
    };
    let report = stability_report(&fp.point, &model, &b.integrator, &settings)?;
    let yaw = yaw_period_check(&fp.point, &model, &b.integrator, b.yaw_check_steps, b.yaw_offset)?;

    let steps: Vec<Vec<Field>> = report
        .step_sequence
        .iter()
        .map(|r| step_row(r.n, &r.reduced()))
        .collect();
    table::write(&out.join("biped_steps.csv"), &STEP_HEADER, &steps)?;
    let spectrum: Vec<Vec<Field>> = report
        .spectrum
        .iter()
        .enumerate()
        .map(|(k, z)| vec![k.into(), z.re.into(), z.im.into(), z.norm().into()])
        .collect();
    table::write(&out.join("biped_spectrum.csv"), &["k", "re", "im", "abs"], &spectrum)?;
    let residuals: Vec<Vec<Field>> = report
        .m_p_residuals
        .iter()
        .enumerate()
        .map(|(k, r)| vec![(k + 1).into(), (*r).into()])
        .collect();
    table::write(&out.join("biped_residuals.csv"), &["n", "m_p_residual"], &residuals)?;
    write_json(
        out.join("biped_poincare.json"),
        &BipedPoincareSummary {
            seed,
            fixed_point: FixedPointSummary {
                point: fp.point,
                residual: fp.residual,
                iterations: fp.iterations,
                history: fp.history.clone(),
            },
            report: &report,
            yaw: &yaw,
        },
    )?;
    Ok(format!(
        "biped-poincare: residual {:.2e}, spectral radius {:.6}, observed ratio {:.6}, yaw 2-period error {:.2e}{}",
        fp.residual,
        report.spectral_radius,
        report.observed_ratio,
        yaw.two_period_error,
        if report.valid { "" } else { " (impact tolerance exceeded)" }
    ))
}

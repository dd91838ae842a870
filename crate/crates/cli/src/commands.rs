use std::path::{Path, PathBuf};
use std::time::Instant;

use layercon::constraints::{check_propagation_conditions, plan_inputs, tighten_state, PlanningSets, PropagationProblem};
use layercon::sim::{run, sweep_frequencies, Design, InitPair, MonitorSummary, RunOptions, Setup, SweepRow, Synthesis, TraceLog};
use layercon::simfunc::SynthesisMethod;
use layercon::{Error, PlanningSetKind};
use serde::Serialize;

use crate::error::CliError;
use crate::output::{rows, vec_of, write_atomic, write_toml};
use crate::plots;
use crate::scenario::{Loaded, MethodSpec, Rows, Scenario};

/// Options shared by every command.
#[derive(Debug, Clone)]
pub struct Context {
    pub out: PathBuf,
    pub method: Option<SynthesisMethod>,
    pub strict_lowlevel_output: bool,
    pub seed: u64,
    pub samples: usize,
}

impl Context {
    pub fn new(out: PathBuf) -> Self {
        Self {
            out,
            method: None,
            strict_lowlevel_output: false,
            seed: 0,
            samples: 10_000,
        }
    }
}

/// Seed from `LAYERCON_SEED`, zero when unset.
pub fn seed_from_env() -> Result<u64, CliError> {
    match std::env::var("LAYERCON_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("LAYERCON_SEED must be an unsigned integer, got {s:?}"))),
        Err(_) => Ok(0),
    }
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    Scenario::load(path)?.validate()
}

/// Synthesises at the scenario's tracking rate and fills in `v0_max` from
/// the initial pair.
pub fn synthesize(sc: &Loaded, method: Option<SynthesisMethod>) -> Result<(Design<f64>, Synthesis<f64>), CliError> {
    let mut design = sc.design(method);
    let syn = design.synthesize(sc.spec.rates.t_l)?;
    if let Some(x0) = sc.x0() {
        design.planning.v0_max = syn.sf.eval_v(&sc.xbar0, &x0)?.sqrt();
    }
    Ok((design, syn))
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthReport {
    pub scenario: String,
    pub method: MethodSpec,
    #[serde(rename = "T_L")]
    pub t_l: f64,
    #[serde(rename = "T_H")]
    pub t_h: f64,
    pub lambda: f64,
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tracking_epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_bar_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision_error: Option<String>,
    pub v0_max: f64,
    pub residual_cp: f64,
    pub residual_sylvester: f64,
    /// `min eig(M − CᵀC)`.
    pub output_slack: f64,
    /// `min eig((1 − 2λ)M − A_clᵀ M A_cl)`.
    pub decay_slack: f64,
    pub gamma_gap: f64,
    pub lmi_valid: bool,
    pub r_pseudo_inverse: bool,
    pub seconds: f64,
    #[serde(rename = "P")]
    pub p: Rows,
    #[serde(rename = "Q")]
    pub q: Rows,
    #[serde(rename = "M")]
    pub m: Rows,
    #[serde(rename = "K")]
    pub k: Rows,
    #[serde(rename = "R")]
    pub r: Rows,
}

pub fn synth_report(sc: &Loaded, design: &Design<f64>, syn: &Synthesis<f64>, seconds: f64) -> Result<SynthReport, CliError> {
    let sf = &syn.sf;
    let check = sf.check(&syn.lower_l, &syn.higher_l)?;
    let precision = design.precision(syn);
    let (epsilon, tracking_epsilon, u_bar_max, precision_error) = match &precision {
        Ok(ip) => (Some(ip.epsilon), Some(ip.tracking_epsilon), Some(ip.u_bar_max), None),
        Err(e) => (None, None, None, Some(e.to_string())),
    };
    Ok(SynthReport {
        scenario: sc.spec.name.clone(),
        method: sf.method.into(),
        t_l: syn.rates.t_l(),
        t_h: syn.rates.t_h(),
        lambda: sf.lambda,
        gamma: sf.gamma,
        epsilon,
        tracking_epsilon,
        u_bar_max,
        precision_error,
        v0_max: design.planning.v0_max,
        residual_cp: check.residual_cp,
        residual_sylvester: check.residual_sylv,
        output_slack: check.output_slack,
        decay_slack: check.decay_slack,
        gamma_gap: check.gamma_gap,
        lmi_valid: check.is_valid(1e-8),
        r_pseudo_inverse: sf.r_pseudo_inverse,
        seconds,
        p: rows(sf.p()),
        q: rows(sf.q()),
        m: rows(&sf.m),
        k: rows(&sf.k),
        r: rows(&sf.r),
    })
}

/// Writes `synthesis.toml`.
pub fn cmd_synth(path: &Path, ctx: &Context) -> Result<SynthReport, CliError> {
    let sc = load(path)?;
    let start = Instant::now();
    let (design, syn) = synthesize(&sc, ctx.method)?;
    let seconds = start.elapsed().as_secs_f64();
    let report = synth_report(&sc, &design, &syn, seconds)?;
    write_toml(&ctx.out.join("synthesis.toml"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct SetDump {
    pub empty: bool,
    #[serde(rename = "F")]
    pub f: Rows,
    #[serde(rename = "f")]
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PieceDump {
    pub index: usize,
    pub empty: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_worst_row: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_worst_row: Option<usize>,
    #[serde(rename = "F")]
    pub f: Rows,
    #[serde(rename = "f")]
    pub h: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropagateReport {
    pub scenario: String,
    pub feasible: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empty_piece: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empty_kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tracking_epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_bar_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check_passed: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_margin: Option<f64>,
    pub samples: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub up: Option<SetDump>,
    pub pieces: Vec<PieceDump>,
}

/// Planning sets for the scenario, or the dump explaining why they are empty.
pub fn propagate(
    sc: &Loaded,
    design: &Design<f64>,
    syn: &Synthesis<f64>,
    ctx: &Context,
    check: bool,
) -> Result<(PropagateReport, Result<PlanningSets<f64>, Error>), CliError> {
    let mut report = PropagateReport {
        scenario: sc.spec.name.clone(),
        feasible: false,
        empty_piece: None,
        empty_kind: None,
        epsilon: None,
        tracking_epsilon: None,
        u_bar_max: None,
        delta: None,
        check_passed: None,
        worst_margin: None,
        samples: if check { ctx.samples } else { 0 },
        seed: ctx.seed,
        up: None,
        pieces: Vec::new(),
    };
    let built = design.propagate(syn);
    match &built {
        Ok(ps) => {
            report.feasible = true;
            report.epsilon = Some(ps.epsilon);
            report.tracking_epsilon = Some(ps.tracking_epsilon);
            report.u_bar_max = Some(ps.u_bar_max);
            report.delta = Some(ps.delta);
            report.up = Some(SetDump {
                empty: false,
                f: rows(ps.up.f()),
                h: vec_of(ps.up.h()),
            });
            let checked = if check {
                let mut rng = layercon::seeded_rng(ctx.seed);
                let r = check_propagation_conditions(&syn.sf, syn.higher_l.c(), ps, &sc.y_pieces, &sc.u, ctx.samples, &mut rng)?;
                report.check_passed = Some(r.passed());
                report.worst_margin = Some(r.worst_margin());
                Some(r)
            } else {
                None
            };
            for (i, xp) in ps.xp.iter().enumerate() {
                let pr = checked.as_ref().map(|c| &c.pieces[i]);
                report.pieces.push(PieceDump {
                    index: i,
                    empty: false,
                    output_margin: pr.map(|p| p.output.margin),
                    output_worst_row: pr.map(|p| p.output.worst_row),
                    input_margin: pr.map(|p| p.input.margin),
                    input_worst_row: pr.map(|p| p.input.worst_row),
                    f: rows(xp.f()),
                    h: vec_of(xp.h()),
                });
            }
        }
        Err(Error::EmptyPlanningSet { piece, kind }) => {
            report.empty_kind = Some(
                match kind {
                    PlanningSetKind::State => "state",
                    PlanningSetKind::Input => "input",
                }
                .into(),
            );
            report.empty_piece = Some(*piece);
            // dump every piece with its own verdict
            let prob = PropagationProblem {
                cbar: syn.higher_l.c(),
                y_pieces: &sc.y_pieces,
                u: &sc.u,
                xbar: &sc.xbar,
                ubar: &sc.ubar,
            };
            let planned = plan_inputs(&syn.sf, &prob, &design.planning);
            if let (Err(_), Some(eps)) = (&planned, design.planning.epsilon) {
                // the input side failed first; the state pieces at the pinned precision still say which corridors survive
                let delta = design.planning.delta.unwrap_or(0.0);
                report.epsilon = Some(eps);
                report.up = Some(SetDump {
                    empty: true,
                    f: Vec::new(),
                    h: Vec::new(),
                });
                for (i, (y, xb)) in sc.y_pieces.iter().zip(&sc.xbar).enumerate() {
                    let xp = tighten_state(syn.sf.q(), y, syn.higher_l.c(), xb, eps, delta)?;
                    report.pieces.push(PieceDump {
                        index: i,
                        empty: xp.is_empty()?,
                        output_margin: None,
                        output_worst_row: None,
                        input_margin: None,
                        input_worst_row: None,
                        f: rows(xp.f()),
                        h: vec_of(xp.h()),
                    });
                }
            }
            if let Ok(ip) = planned {
                report.epsilon = Some(ip.epsilon);
                report.tracking_epsilon = Some(ip.tracking_epsilon);
                report.u_bar_max = Some(ip.u_bar_max);
                report.delta = Some(ip.delta);
                report.up = Some(SetDump {
                    empty: ip.up.is_empty()?,
                    f: rows(ip.up.f()),
                    h: vec_of(ip.up.h()),
                });
                for (i, (y, xb)) in sc.y_pieces.iter().zip(&sc.xbar).enumerate() {
                    let xp = tighten_state(syn.sf.q(), y, syn.higher_l.c(), xb, ip.epsilon, ip.delta)?;
                    report.pieces.push(PieceDump {
                        index: i,
                        empty: xp.is_empty()?,
                        output_margin: None,
                        output_worst_row: None,
                        input_margin: None,
                        input_worst_row: None,
                        f: rows(xp.f()),
                        h: vec_of(xp.h()),
                    });
                }
            }
        }
        Err(_) => {}
    }
    Ok((report, built))
}

/// Writes `planning_sets.toml`; empty pieces exit with their own code.
pub fn cmd_propagate(path: &Path, ctx: &Context) -> Result<PropagateReport, CliError> {
    let sc = load(path)?;
    let (design, syn) = synthesize(&sc, ctx.method)?;
    let (report, built) = propagate(&sc, &design, &syn, ctx, true)?;
    write_toml(&ctx.out.join("planning_sets.toml"), &report)?;
    built?;
    if report.check_passed == Some(false) {
        return Err(CliError::Monitor(format!(
            "propagation conditions violated, worst margin {:e}",
            report.worst_margin.unwrap_or(f64::NAN)
        )));
    }
    Ok(report)
}

/// Handoff waypoints must sit inside the tightened output sets of both pieces.
fn check_handoffs(sc: &Loaded, eps: f64) -> Result<(), CliError> {
    let m = &sc.mission;
    for (i, w) in m.waypoints.iter().enumerate() {
        let here = m.piece_of_waypoint[i];
        let next = m.piece_of_waypoint.get(i + 1).copied().unwrap_or(m.goal_piece);
        for piece in [here, next] {
            let (margin, _) = sc.y_pieces[piece].margin(w)?;
            if margin < eps - 1e-12 {
                return Err(CliError::Scenario(format!(
                    "mission.waypoints[{i}] lies {margin} inside piece {piece}, less than epsilon = {eps}"
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct MonitorReport {
    pub scenario: String,
    pub passed: bool,
    pub completed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub epsilon: f64,
    pub max_distance: f64,
    pub max_distance_step: usize,
    pub eps_ok: bool,
    pub output_violations_high: usize,
    pub output_violations_low: usize,
    pub strict_lowlevel_output: bool,
    pub input_violations: usize,
    pub v_bound: f64,
    pub v_excess: f64,
    pub v_ok: bool,
    pub mpc_value_increases: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub goal_reached_at: Option<f64>,
    pub records: usize,
}

fn monitor_report(sc: &Loaded, log: &TraceLog<f64>, s: &MonitorSummary<f64>, failure: Option<String>) -> MonitorReport {
    MonitorReport {
        scenario: sc.spec.name.clone(),
        passed: failure.is_none() && s.passed(),
        completed: failure.is_none(),
        failure,
        epsilon: log.epsilon,
        max_distance: s.eps.max_dist,
        max_distance_step: s.eps.argmax,
        eps_ok: s.eps.passed,
        output_violations_high: s.output_high_violations,
        output_violations_low: s.output_low_violations,
        strict_lowlevel_output: s.strict_lowlevel_output,
        input_violations: s.input_violations,
        v_bound: log.v_bound,
        v_excess: s.v_excess,
        v_ok: s.v_ok(),
        mpc_value_increases: s.value_increases,
        goal_reached_at: s.goal_reached_at,
        records: log.len(),
    }
}

/// Trace CSV with the fixed column schema.
pub fn trace_csv(log: &TraceLog<f64>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let first = log.low.first();
    let dims = first.map_or((0, 0, 0, 0, 0, 0), |r| (r.xbar.len(), r.ubar.len(), r.x.len(), r.u.len(), r.ybar.len(), r.y.len()));
    let mut header = vec!["t".to_string()];
    for (name, n) in [("xbar", dims.0), ("ubar", dims.1), ("x", dims.2), ("u", dims.3), ("ybar", dims.4), ("y", dims.5)] {
        header.extend((0..n).map(|i| format!("{name}{i}")));
    }
    header.extend(["V", "dist", "eps_ok", "y_in_Y", "u_in_U"].map(String::from));
    let csv_err = |e: csv::Error| CliError::Scenario(format!("writing trace: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    let flag = |b: bool| if b { "1".to_string() } else { "0".to_string() };
    for r in &log.low {
        let mut rec = vec![r.t.to_string()];
        for v in [&r.xbar, &r.ubar, &r.x, &r.u, &r.ybar, &r.y] {
            rec.extend(v.iter().map(|x| x.to_string()));
        }
        rec.push(r.v.to_string());
        rec.push(r.dist.to_string());
        rec.push(flag(r.eps_ok));
        rec.push(flag(r.y_in_y));
        rec.push(flag(r.u_in_u));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Scenario(format!("writing trace: {e}")))
}

fn write_run(sc: &Loaded, log: &TraceLog<f64>, report: &MonitorReport, out: &Path) -> Result<(), CliError> {
    write_atomic(&out.join("trace.csv"), &trace_csv(log)?)?;
    write_toml(&out.join("monitors.toml"), report)?;
    let plot_err = |e: String| CliError::Scenario(format!("plotting: {e}"));
    write_atomic(&out.join("trajectory.svg"), plots::trajectory_svg(sc, log).map_err(plot_err)?.as_bytes())?;
    write_atomic(&out.join("distance.svg"), plots::distance_svg(log).map_err(plot_err)?.as_bytes())?;
    write_atomic(&out.join("inputs.svg"), plots::inputs_svg(log, sc.spec.constraints.u.as_box()).map_err(plot_err)?.as_bytes())?;
    Ok(())
}

/// Result of a completed simulation.
#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub report: MonitorReport,
    pub log: TraceLog<f64>,
    pub synth: SynthReport,
}

/// Simulates the mission and writes the trace, monitor verdicts, synthesis
/// report, planning sets and plots. Monitor failures exit with their own code
/// after the artifacts are written.
pub fn simulate(path: &Path, ctx: &Context) -> Result<SimulateOutcome, (CliError, Option<SimulateOutcome>)> {
    let sc = load(path).map_err(|e| (e, None))?;
    let start = Instant::now();
    let (design, syn) = synthesize(&sc, ctx.method).map_err(|e| (e, None))?;
    let synth = synth_report(&sc, &design, &syn, start.elapsed().as_secs_f64()).map_err(|e| (e, None))?;
    write_toml(&ctx.out.join("synthesis.toml"), &synth).map_err(|e| (e, None))?;
    let (prop, built) = propagate(&sc, &design, &syn, ctx, false).map_err(|e| (e, None))?;
    write_toml(&ctx.out.join("planning_sets.toml"), &prop).map_err(|e| (e, None))?;
    let ps = built.map_err(|e| (CliError::Core(e), None))?;
    check_handoffs(&sc, ps.epsilon).map_err(|e| (e, None))?;

    let init = match sc.x0() {
        Some(x0) => InitPair {
            xbar0: sc.xbar0.clone(),
            x0,
        },
        None => InitPair::lifted(&syn.sf, sc.xbar0.clone()),
    };
    let region = sc.region();
    init.validate(&syn.lower_l, &syn.higher_l, &region)
        .map_err(|e| (CliError::Scenario(format!("init: {e}")), None))?;
    let setup = Setup {
        lower: &syn.lower_l,
        higher_l: &syn.higher_l,
        higher_h: &syn.higher_h,
        sf: &syn.sf,
        ps: &ps,
        y: &region,
        u: &sc.u,
        planner: &sc.planner,
        rates: syn.rates,
    };
    let opts = RunOptions {
        strict_lowlevel_output: ctx.strict_lowlevel_output,
    };
    match run(&setup, &sc.mission, &init, &opts) {
        Ok(log) => {
            let summary = log.summary();
            let report = monitor_report(&sc, &log, &summary, None);
            write_run(&sc, &log, &report, &ctx.out).map_err(|e| (e, None))?;
            let outcome = SimulateOutcome { report, log, synth };
            if outcome.report.passed {
                Ok(outcome)
            } else {
                let s = &outcome.report;
                let msg = format!(
                    "eps_ok={} output_violations_high={} output_violations_low={} input_violations={} v_ok={}",
                    s.eps_ok, s.output_violations_high, s.output_violations_low, s.input_violations, s.v_ok
                );
                Err((CliError::Monitor(msg), Some(outcome)))
            }
        }
        Err(fail) => {
            let log = *fail.partial;
            let summary = log.summary();
            let report = monitor_report(&sc, &log, &summary, Some(fail.error.to_string()));
            write_run(&sc, &log, &report, &ctx.out).map_err(|e| (e, None))?;
            Err((CliError::Core(fail.error), Some(SimulateOutcome { report, log, synth })))
        }
    }
}

pub fn cmd_simulate(path: &Path, ctx: &Context) -> Result<SimulateOutcome, CliError> {
    simulate(path, ctx).map_err(|(e, _)| e)
}

/// Parses `a,b,c`.
pub fn parse_freqs(s: &str) -> Result<Vec<f64>, CliError> {
    let freqs = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|f| *f > 0.0 && f.is_finite())
                .ok_or_else(|| CliError::Usage(format!("invalid frequency {t:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if freqs.is_empty() {
        return Err(CliError::Usage("frequency list is empty".into()));
    }
    Ok(freqs)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn sweep_csv(rows: &[SweepRow<f64>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Scenario(format!("writing sweep: {e}"));
    w.write_record(["freq_hz", "gamma", "epsilon", "u_bar_max", "feasible"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.freq_hz.to_string(),
            opt(r.gamma),
            opt(r.epsilon),
            opt(r.u_bar_max),
            if r.feasible { "1".into() } else { "0".into() },
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Scenario(format!("writing sweep: {e}")))
}

/// Writes `sweep.csv` and `sweep.svg`.
pub fn cmd_sweep(path: &Path, freqs: &[f64], ctx: &Context) -> Result<Vec<SweepRow<f64>>, CliError> {
    if freqs.is_empty() {
        return Err(CliError::Usage("frequency list is empty".into()));
    }
    let sc = load(path)?;
    let design = sc.design(ctx.method);
    let rows = sweep_frequencies(&design, freqs);
    write_atomic(&ctx.out.join("sweep.csv"), &sweep_csv(&rows)?)?;
    let svg = plots::sweep_svg(&rows).map_err(|e| CliError::Scenario(format!("plotting: {e}")))?;
    write_atomic(&ctx.out.join("sweep.svg"), svg.as_bytes())?;
    Ok(rows)
}

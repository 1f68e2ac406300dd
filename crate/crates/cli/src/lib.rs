//! Command-line front end: `analyze`, `simulate`, `sweep`, `stability` and `compare`.
//!
//! Exit codes are 0 on success, 2 on bad input, 3 on unstable parameters and
//! 4 when a simulation diverges.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use aoii::baselines::{
    aoi_mm11, aoi_mm11_abandon, aoi_mm11_preempt, aoii_mm11_noiseless, aos_mm11_noiseless,
    comparison_report,
};
use aoii::collision::corollary3_via_system;
use aoii::shs::{average_aoii, expected_age_vectors, stationary_distribution};
use aoii::stability::{generic_check, theorem2_check, theorem3_check, StabilityVerdict};
use aoii::Error;

pub mod eval;
pub mod output;
pub mod params;

use eval::{Evaluation, Status};
use output::{sig12, Row};
use params::{ParamArgs, Params, Scenario, SimArgs, PARAM_NAMES};

pub const EXIT_BAD_INPUT: i32 = 2;
pub const EXIT_UNSTABLE: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "aoii",
    version,
    about = "Age of incorrect information: analysis, simulation and sweeps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed form and generic engine side by side
    Analyze(ModelArgs),
    /// Monte Carlo estimate with confidence interval
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Write the summary row as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// One CSV row per value of a varied parameter
    Sweep(SweepArgs),
    /// Stability verdicts for a parameter set
    Stability(ModelArgs),
    /// Baseline age formulas and the relations between them
    Compare {
        #[command(flatten)]
        params: ParamArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    pub scenario: Scenario,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    pub scenario: Scenario,
    /// Parameter to vary (any model flag name, or rho for lambda = rho·mu)
    #[arg(long)]
    pub vary: String,
    /// Comma-separated values
    #[arg(
        long,
        value_delimiter = ',',
        required = true,
        allow_negative_numbers = true
    )]
    pub values: Vec<f64>,
    /// Output file; standard output when absent
    #[arg(long, visible_alias = "out")]
    pub csv: Option<PathBuf>,
    /// Add a simulated column
    #[arg(long)]
    pub with_sim: bool,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::UnstableParameters(_)
            | Error::Unstable(_)
            | Error::Singular { .. }
            | Error::SingularBalance => EXIT_UNSTABLE,
            _ => EXIT_BAD_INPUT,
        };
        Self::new(code, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new(1, format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::new(1, format!("csv error: {e}"))
    }
}

type CliResult = Result<(), CliError>;

pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult {
    match cli.command {
        Command::Analyze(m) => analyze(m.scenario, &m.params.resolve(), out),
        Command::Simulate { model, sim, csv } => simulate(
            model.scenario,
            &model.params.resolve(),
            &sim,
            csv.as_deref(),
            out,
        ),
        Command::Sweep(s) => sweep(&s, out),
        Command::Stability(m) => stability(m.scenario, &m.params.resolve(), out),
        Command::Compare { params } => compare(&params.resolve(), out),
    }
}

fn write_params(s: Scenario, p: &Params, out: &mut dyn Write) -> std::io::Result<()> {
    let pairs: Vec<String> = p
        .describe(s)
        .into_iter()
        .map(|(k, v)| format!("{k}={}", sig12(v)))
        .collect();
    writeln!(out, "scenario: {s}")?;
    writeln!(out, "parameters: {}", pairs.join(" "))
}

fn determinant_name(s: Scenario) -> &'static str {
    match s {
        Scenario::CollisionS3 => "Pi",
        _ => "det(C)",
    }
}

fn write_unstable(s: Scenario, ev: &Evaluation, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "stability: UNSTABLE")?;
    if !ev.detail.is_empty() {
        writeln!(out, "reason: {}", ev.detail)?;
    }
    if let Some(d) = ev.determinant {
        writeln!(out, "{}: {}", determinant_name(s), sig12(d))?;
    }
    Ok(())
}

fn analyze(s: Scenario, p: &Params, out: &mut dyn Write) -> CliResult {
    write_params(s, p, out)?;
    let ev = eval::analytic(s, p)?;
    if ev.status == Status::Unstable {
        write_unstable(s, &ev, out)?;
        return Err(CliError::new(EXIT_UNSTABLE, "unstable parameters"));
    }
    let model = eval::scenario_model(s, p)?;
    let pi = stationary_distribution(&model)?;
    let ages = expected_age_vectors(&model, &pi)?;
    let last = model.aoii_component();

    writeln!(out, "{:<6} {:>20} {:>20}", "state", "pi", "v_last")?;
    for q in 0..model.num_states() {
        writeln!(
            out,
            "{:<6} {:>20} {:>20}",
            model.label(q),
            sig12(pi.get(q)),
            sig12(ages.state(q)[last])
        )?;
    }
    let closed = ev.analytic.expect("stable rows carry a value");
    let engine = average_aoii(&ages);
    let mut diff = rel_diff(closed, engine);
    writeln!(out, "closed form: {}", sig12(closed))?;
    writeln!(out, "engine: {}", sig12(engine))?;
    if s == Scenario::CollisionS3 {
        let via = corollary3_via_system(&p.collision()?, &p.consts()?)?;
        writeln!(out, "reduced system: {}", sig12(via))?;
        diff = diff.max(rel_diff(closed, via)).max(rel_diff(engine, via));
    }
    if let Some(d) = ev.determinant {
        writeln!(out, "{}: {}", determinant_name(s), sig12(d))?;
    }
    writeln!(out, "relative difference: {}", sig12(diff))?;
    Ok(())
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn simulate(
    s: Scenario,
    p: &Params,
    sim: &SimArgs,
    csv: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult {
    write_params(s, p, out)?;
    let cfg = sim.config();
    cfg.validate()?;
    let mut ev = eval::analytic(s, p)?;
    let model = eval::scenario_model(s, p)?;
    let r = aoii::sim::replicate_with(&model, &cfg, sim.execution())?;

    writeln!(
        out,
        "seed: {}  replications: {}  events per replication: {}",
        cfg.seed, cfg.replications, cfg.max_events
    )?;
    if r.diverged {
        writeln!(
            out,
            "DIVERGED: age exceeded {} after {} events",
            sig12(cfg.divergence_threshold),
            r.events
        )?;
    } else {
        writeln!(
            out,
            "time average: {} +/- {}",
            sig12(r.time_average),
            sig12(r.ci_half_width95)
        )?;
    }
    match (ev.status, ev.analytic) {
        (Status::Ok, Some(a)) => {
            let inside = if r.diverged {
                String::new()
            } else if r.covers(a) {
                " (inside the interval)".into()
            } else {
                " (outside the interval)".into()
            };
            writeln!(out, "analytic: {}{inside}", sig12(a))?;
        }
        _ => write_unstable(s, &ev, out)?,
    }
    let rec = &r.recurrence;
    writeln!(
        out,
        "recurrences to state {} with zero age: {} (mean interval {}, halves {} / {})",
        model.label(0),
        rec.count(),
        sig12(rec.mean()),
        sig12(rec.halves[0].mean()),
        sig12(rec.halves[1].mean())
    )?;

    let diverged = r.diverged;
    if diverged {
        ev.status = Status::Diverged;
    }
    ev.sim = Some(r);
    if let Some(path) = csv {
        let mut meta = output::default_meta(cfg.seed);
        meta.extend(sim_meta(sim));
        meta.push(("scenario", s.to_string()));
        meta.extend(p.describe(s).into_iter().map(|(k, v)| (k, v.to_string())));
        let row = Row {
            scenario: s,
            varied: None,
            eval: &ev,
        };
        output::write_csv(
            BufWriter::new(File::create(path)?),
            &output::meta_line(&meta),
            &[row],
        )?;
    }
    if diverged {
        return Err(CliError::new(EXIT_DIVERGED, "simulation diverged"));
    }
    Ok(())
}

fn sim_meta(sim: &SimArgs) -> Vec<(&'static str, String)> {
    vec![
        ("events", sim.events.to_string()),
        ("reps", sim.reps.to_string()),
        ("warmup", sim.warmup.to_string()),
        ("batches", sim.batches.to_string()),
        ("threshold", sim.threshold.to_string()),
    ]
}

/// Parameters overwritten by setting `name`.
fn overwritten_by(name: &str) -> &'static [&'static str] {
    match name {
        "rho" => &["lambda", "lambdac"],
        "lambda" => &["lambda"],
        _ => &[],
    }
}

fn sweep(a: &SweepArgs, out: &mut dyn Write) -> CliResult {
    let name = a.vary.as_str();
    if !PARAM_NAMES.contains(&name) {
        return Err(CliError::new(
            EXIT_BAD_INPUT,
            format!(
                "unknown parameter '{name}' (expected one of {})",
                PARAM_NAMES.join(", ")
            ),
        ));
    }
    if a.params.is_set(name) {
        return Err(CliError::new(
            EXIT_BAD_INPUT,
            format!("'{name}' is both varied and fixed"),
        ));
    }
    if a.values.is_empty() || a.values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::new(
            EXIT_BAD_INPUT,
            "--values must be finite numbers",
        ));
    }
    let base = a.params.resolve();
    let cfg = a.sim.config();
    if a.with_sim {
        cfg.validate()?;
    }
    let exec = a.sim.execution();

    let mut evals = Vec::with_capacity(a.values.len());
    for &v in &a.values {
        let mut p = base.clone();
        p.set(name, v)
            .map_err(|m| CliError::new(EXIT_BAD_INPUT, m))?;
        let ev = eval::evaluate(a.scenario, &p, a.with_sim.then_some((&cfg, exec)))
            .map_err(|e| CliError::new(EXIT_BAD_INPUT, format!("{name}={v}: {e}")))?;
        evals.push(ev);
    }

    let hidden = overwritten_by(name);
    let mut meta = output::default_meta(cfg.seed);
    meta.push(("scenario", a.scenario.to_string()));
    meta.push(("vary", name.to_string()));
    meta.extend(
        base.describe(a.scenario)
            .into_iter()
            .filter(|(k, _)| *k != name && !hidden.contains(k))
            .map(|(k, v)| (k, v.to_string())),
    );
    meta.push(("with_sim", a.with_sim.to_string()));
    if a.with_sim {
        meta.extend(sim_meta(&a.sim));
    }
    let rows: Vec<Row<'_>> = a
        .values
        .iter()
        .zip(&evals)
        .map(|(&v, ev)| Row {
            scenario: a.scenario,
            varied: Some((name, v)),
            eval: ev,
        })
        .collect();
    let meta = output::meta_line(&meta);
    match &a.csv {
        Some(path) => {
            output::write_csv(BufWriter::new(File::create(path)?), &meta, &rows)?;
            writeln!(out, "wrote {} rows to {}", rows.len(), path.display())?;
        }
        None => output::write_csv(&mut *out, &meta, &rows)?,
    }
    Ok(())
}

fn write_verdict(
    label: &str,
    v: &StabilityVerdict,
    det_name: &str,
    out: &mut dyn Write,
) -> CliResult {
    writeln!(out, "{label}: {}", v.status)?;
    writeln!(out, "  {}", v.detail)?;
    if let Some(d) = v.determinant {
        writeln!(out, "  {det_name}: {}", sig12(d))?;
    }
    Ok(())
}

fn stability(s: Scenario, p: &Params, out: &mut dyn Write) -> CliResult {
    write_params(s, p, out)?;
    let model = eval::scenario_model(s, p)?;
    match s {
        Scenario::NoisyS2 => {
            let v = theorem2_check(&p.noisy()?, &p.consts()?);
            write_verdict("exact criterion", &v, "det(C)", out)?;
        }
        Scenario::CollisionS3 => {
            let v = theorem3_check(&p.collision()?, &p.consts()?);
            write_verdict("sufficient criterion", &v, "Pi", out)?;
        }
        Scenario::NoisyS1 | Scenario::Baselines => {}
    }
    write_verdict(
        "numeric check",
        &generic_check(&model),
        "normalized det",
        out,
    )
}

fn compare(p: &Params, out: &mut dyn Write) -> CliResult {
    let b = p.baseline()?;
    let pairs = p.describe(Scenario::Baselines);
    let pairs: Vec<String> = pairs
        .iter()
        .map(|(k, v)| format!("{k}={}", sig12(*v)))
        .collect();
    writeln!(out, "parameters: {}", pairs.join(" "))?;
    let values = [
        ("AoI M/M/1/1 blocking", aoi_mm11(&b)),
        ("AoI M/M/1/1 preemptive", aoi_mm11_preempt(&b)),
        ("AoI M/M/1/1 abandonment", aoi_mm11_abandon(&b)),
        ("AoII noiseless", aoii_mm11_noiseless(&b)),
        ("AoS noiseless", aos_mm11_noiseless(&b)),
    ];
    for (name, v) in values {
        writeln!(out, "{name:<26} {}", sig12(v))?;
    }
    let pf = |ok: bool| if ok { "PASS" } else { "FAIL" };
    match comparison_report(&b) {
        Ok(r) => {
            let checks = [
                ("blocking AoI = preemptive AoI + AoS", r.identity),
                ("preemptive AoI > 4 AoS >= 4 AoII", r.preempt_dominates),
                ("blocking AoI > 5 AoS", r.blocking_dominates),
                ("AoS < 1/mu", r.aos_below_generate_at_will),
                ("AoS < 1/(2 mu)", r.aos_below_half_service),
                ("preemptive AoI > 2/mu", r.preempt_above_two_services),
            ];
            for (name, ok) in checks {
                writeln!(out, "{name:<38} {}", pf(ok))?;
            }
            Ok(())
        }
        Err(e) => {
            writeln!(out, "relations: NOT-APPLICABLE ({e})")?;
            Err(e.into())
        }
    }
}

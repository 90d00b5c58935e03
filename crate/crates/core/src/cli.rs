//! Command-line front end.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success (for `analyze`: natural and atomicity decided) |
//! | 1 | I/O failure |
//! | 2 | usage, parse, physicality or input-vector error |
//! | 3 | not natural (`analyze` bit flag; `equilibrium` refuses) |
//! | 4 | atomicity unknown (`analyze` bit flag, combines with 3 into 7) |
//! | 5 | integration failure |
//!
//! Settings resolve as flag, then `EVSYS_*` environment variable, then default.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::wegscheider_check;
use crate::equilibrium::{base_strong_equilibrium_with, class_equilibrium_with, EquilibriumOptions, EquilibriumResult};
use crate::error::Error;
use crate::parser::parse_system;
use crate::report::{analyze, fmt_fvec, AnalysisConfig, Setting, Source};
use crate::simulate::{
    integrate, run_monitors, simulate_to_equilibrium, Method, MonitorReport, NegativityPolicy, SampleGrid,
    SimOptions, Trajectory,
};
use crate::system::EventSystem;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOT_NATURAL: i32 = 3;
pub const EXIT_INTEGRATION: i32 = 5;

#[derive(Parser, Debug)]
#[command(name = "evsys", version, about = "Analyze and simulate reversible mass-action event-systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a system file and print its canonical events.
    Validate { file: PathBuf },
    /// Conservation laws, naturality, atomicity and atom laws.
    Analyze {
        file: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
        /// Emit the full JSON report.
        #[arg(long)]
        json: bool,
    },
    /// Positive strong equilibria of a natural system.
    Equilibrium {
        file: PathBuf,
        /// Positive point selecting a conservation class, e.g. `2,1`. Repeatable.
        #[arg(long = "at", value_name = "P")]
        at: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Integrate the mass-action ODE.
    Simulate {
        file: PathBuf,
        /// Initial state, e.g. `4,1`.
        #[arg(long, value_name = "X0")]
        x0: String,
        /// Final time [default: 100, or 10000 with --to-equilibrium].
        #[arg(long, env = "EVSYS_T_END")]
        t_end: Option<f64>,
        #[arg(long, env = "EVSYS_REL_TOL", default_value_t = 1e-8)]
        rel_tol: f64,
        #[arg(long, env = "EVSYS_ABS_TOL", default_value_t = 1e-10)]
        abs_tol: f64,
        /// Trajectory CSV path; without it the CSV goes to stdout and the
        /// summary to stderr.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stop once the equilibrium residual is reached.
        #[arg(long)]
        to_equilibrium: bool,
        /// Use the implicit midpoint integrator.
        #[arg(long)]
        stiff: bool,
        /// Floor negative components at zero instead of rejecting the step.
        #[arg(long)]
        clamp: bool,
        /// Number of geometrically spaced samples; 0 records every step.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, env = "EVSYS_MAX_STEPS", default_value_t = 1_000_000)]
        max_steps: usize,
    },
    /// Write the JSON analysis report.
    Report {
        file: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct AnalysisArgs {
    /// Largest total degree explored by the atomicity search.
    #[arg(long, env = "EVSYS_BUDGET_DEGREE")]
    budget_degree: Option<u32>,
    /// Largest number of monomials explored per search.
    #[arg(long, env = "EVSYS_BUDGET_NODES")]
    budget_nodes: Option<usize>,
    /// Class points whose equilibria are included. Repeatable.
    #[arg(long = "at", value_name = "P")]
    at: Vec<String>,
    /// Worker threads for independent class solves.
    #[arg(long, env = "EVSYS_JOBS", default_value_t = 1)]
    jobs: usize,
}

fn source_of(m: &ArgMatches, id: &str) -> Source {
    match m.value_source(id) {
        Some(ValueSource::CommandLine) => Source::Flag,
        Some(ValueSource::EnvVariable) => Source::Env,
        _ => Source::Default,
    }
}

fn analysis_config(args: &AnalysisArgs, m: &ArgMatches) -> AnalysisConfig {
    let base = AnalysisConfig::default();
    AnalysisConfig {
        budget_degree: match args.budget_degree {
            Some(d) => Setting::new(Some(d), source_of(m, "budget_degree")),
            None => base.budget_degree,
        },
        budget_nodes: match args.budget_nodes {
            Some(n) => Setting::new(n, source_of(m, "budget_nodes")),
            None => base.budget_nodes,
        },
        jobs: Setting::new(args.jobs, source_of(m, "jobs")),
        equilibrium: base.equilibrium,
    }
}

/// Parse a comma-separated vector such as `2,1` or `0.5, 1e-3`.
pub fn parse_vector(s: &str) -> Option<Vec<f64>> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect()
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

macro_rules! say {
    ($w:expr, $($arg:tt)*) => {{
        let _ = writeln!($w, $($arg)*);
    }};
}

fn load(path: &Path, io: &mut Io) -> Result<EventSystem, i32> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            say!(io.err, "error: cannot read {}: {e}", path.display());
            return Err(EXIT_IO);
        }
    };
    parse_system(&text).map_err(|e| {
        say!(io.err, "error: {}: {e}", path.display());
        EXIT_INPUT
    })
}

fn vectors(raw: &[String], n: usize, what: &str, io: &mut Io) -> Result<Vec<Vec<f64>>, i32> {
    raw.iter()
        .map(|s| match parse_vector(s) {
            Some(v) if v.len() == n => Ok(v),
            Some(v) => {
                say!(io.err, "error: {what} `{s}` has {} entries, the system has {n} species", v.len());
                Err(EXIT_INPUT)
            }
            None => {
                say!(io.err, "error: {what} `{s}` is not a comma-separated list of numbers");
                Err(EXIT_INPUT)
            }
        })
        .collect()
}

/// Run the CLI on `args` (including the program name); returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut io = Io { out, err };
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(io.err, "{text}");
            } else {
                let _ = write!(io.out, "{text}");
            }
            return e.exit_code();
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(io.err, "{}", e.render());
            return EXIT_INPUT;
        }
    };
    let sub = matches.subcommand().map(|(_, m)| m.clone()).expect("subcommand is required");
    match cli.command {
        Command::Validate { file } => cmd_validate(&file, &mut io),
        Command::Analyze { file, analysis, json } => cmd_analyze(&file, &analysis, json, &sub, &mut io),
        Command::Equilibrium { file, at, json } => cmd_equilibrium(&file, &at, json, &mut io),
        Command::Simulate {
            file,
            x0,
            t_end,
            rel_tol,
            abs_tol,
            out,
            to_equilibrium,
            stiff,
            clamp,
            samples,
            max_steps,
        } => {
            let opts = SimOptions {
                rel_tol,
                abs_tol,
                t_end: t_end.unwrap_or(if to_equilibrium { 1e4 } else { 100.0 }),
                max_steps,
                negativity_policy: if clamp {
                    NegativityPolicy::Clamp
                } else {
                    NegativityPolicy::Reject
                },
                method: if stiff {
                    Method::ImplicitMidpoint
                } else {
                    Method::DormandPrince
                },
                samples: if samples == 0 {
                    SampleGrid::Steps
                } else {
                    SampleGrid::Geometric { count: samples }
                },
                ..SimOptions::default()
            };
            cmd_simulate(&file, &x0, &opts, out.as_deref(), to_equilibrium, &mut io)
        }
        Command::Report { file, analysis, out } => cmd_report(&file, &analysis, out.as_deref(), &sub, &mut io),
    }
}

fn cmd_validate(file: &Path, io: &mut Io) -> i32 {
    let sys = match load(file, io) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let names = sys.species();
    for (e, label) in sys.events().iter().zip(sys.labels()) {
        match label {
            Some(l) => say!(io.out, "{l}: {}", e.display_with(names)),
            None => say!(io.out, "{}", e.display_with(names)),
        }
    }
    EXIT_OK
}

fn cmd_analyze(file: &Path, args: &AnalysisArgs, json: bool, m: &ArgMatches, io: &mut Io) -> i32 {
    let sys = match load(file, io) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let points = match vectors(&args.at, sys.dim(), "--at", io) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let report = analyze(&sys, &points, &analysis_config(args, m));
    if json {
        say!(io.out, "{}", report.to_json());
    } else {
        let _ = write!(io.out, "{}", report.to_text());
    }
    report.exit_code()
}

fn cmd_report(file: &Path, args: &AnalysisArgs, out: Option<&Path>, m: &ArgMatches, io: &mut Io) -> i32 {
    let sys = match load(file, io) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let points = match vectors(&args.at, sys.dim(), "--at", io) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let json = analyze(&sys, &points, &analysis_config(args, m)).to_json() + "\n";
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, json) {
                say!(io.err, "error: cannot write {}: {e}", path.display());
                return EXIT_IO;
            }
        }
        None => {
            let _ = write!(io.out, "{json}");
        }
    }
    EXIT_OK
}

#[derive(Serialize)]
struct ClassOutput {
    at: Vec<f64>,
    result: EquilibriumResult,
}

#[derive(Serialize)]
struct EquilibriumOutput {
    base: Vec<f64>,
    base_detailed_balance_residual: f64,
    classes: Vec<ClassOutput>,
    options: EquilibriumOptions,
}

fn cmd_equilibrium(file: &Path, at: &[String], json: bool, io: &mut Io) -> i32 {
    let sys = match load(file, io) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let points = match vectors(at, sys.dim(), "--at", io) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let verdict = wegscheider_check(&sys);
    if !verdict.natural {
        say!(io.err, "error: system is not natural");
        for c in verdict.energy_cycles() {
            say!(
                io.err,
                "  energy cycle {:?}: product {} (weight {:.12})",
                c.combination,
                c.exact_product,
                c.weight
            );
        }
        return EXIT_NOT_NATURAL;
    }
    let opts = EquilibriumOptions::default();
    let base = match base_strong_equilibrium_with(&sys, &opts) {
        Ok(c) => c,
        Err(e) => {
            say!(io.err, "error: {e}");
            return EXIT_NOT_NATURAL;
        }
    };
    let mut classes = Vec::new();
    for p in points {
        match class_equilibrium_with(&sys, &base, &p, &opts) {
            Ok(result) => classes.push(ClassOutput { at: p, result }),
            Err(e) => {
                say!(io.err, "error: class of {}: {e}", fmt_fvec(&p));
                return match e {
                    Error::Domain(_) | Error::Dimension { .. } => EXIT_INPUT,
                    _ => EXIT_INTEGRATION,
                };
            }
        }
    }
    let output = EquilibriumOutput {
        base_detailed_balance_residual: sys.detailed_balance_residual(&base),
        base,
        classes,
        options: opts,
    };
    if json {
        say!(io.out, "{}", serde_json::to_string_pretty(&output).expect("serializable"));
    } else {
        say!(io.out, "species: {}", sys.species().join(", "));
        say!(io.out, "base equilibrium: {}", fmt_fvec(&output.base));
        say!(io.out, "detailed-balance residual: {:e}", output.base_detailed_balance_residual);
        for c in &output.classes {
            say!(io.out, "class of {}: {}", fmt_fvec(&c.at), fmt_fvec(&c.result.c));
            say!(
                io.out,
                "  iterations {}  gradient {:e}  class residual {:e}",
                c.result.iterations,
                c.result.gradient_norm,
                c.result.class_residual
            );
        }
    }
    EXIT_OK
}

fn write_summary(w: &mut dyn Write, sys: &EventSystem, traj: &Trajectory, rep: &MonitorReport) {
    say!(w, "final time: {:?}", traj.final_time());
    say!(w, "final state: {}", fmt_fvec(traj.final_state()));
    say!(
        w,
        "steps: {} accepted, {} rejected ({} for negativity), {} clamped",
        traj.stats.accepted,
        traj.stats.rejected,
        traj.stats.negativity_rejections,
        rep.clamped_steps
    );
    say!(w, "min component: {:?}", rep.min_component);
    say!(w, "max component: {:?}", rep.max_component);
    for (i, d) in rep.max_conservation_drift.iter().enumerate() {
        say!(w, "conservation drift {}: {d:e}", i + 1);
    }
    if rep.natural {
        if let Some(inc) = rep.max_lyapunov_increase {
            say!(w, "max Lyapunov increase: {inc:e}");
        }
    } else {
        say!(w, "system is not natural: no Lyapunov monitor");
    }
    let _ = sys;
}

fn cmd_simulate(file: &Path, x0: &str, opts: &SimOptions, out: Option<&Path>, to_eq: bool, io: &mut Io) -> i32 {
    let sys = match load(file, io) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let x0 = match vectors(&[x0.to_string()], sys.dim(), "--x0", io) {
        Ok(mut v) => v.remove(0),
        Err(code) => return code,
    };

    let outcome = if to_eq {
        simulate_to_equilibrium(&sys, &x0, opts).map(|run| (run.trajectory.clone(), Some(run)))
    } else {
        integrate(&sys, &x0, opts).map(|t| (t, None))
    };
    let (traj, eq_run) = match outcome {
        Ok(v) => v,
        Err(e @ (Error::Domain(_) | Error::Dimension { .. })) => {
            say!(io.err, "error: {e}");
            return EXIT_INPUT;
        }
        Err(e) => {
            say!(io.err, "integration failed: {e}");
            match &e {
                Error::Timeout { best_state, .. } => {
                    say!(io.err, "best state: {}", fmt_fvec(best_state))
                }
                Error::StepUnderflow { state, .. } | Error::MaxSteps { state, .. } => {
                    say!(io.err, "last state: {}", fmt_fvec(state))
                }
                _ => {}
            }
            return EXIT_INTEGRATION;
        }
    };

    let report = run_monitors(&sys, traj.reference.as_deref(), &traj);
    let summary: &mut dyn Write = match out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, traj.to_csv()) {
                say!(io.err, "error: cannot write {}: {e}", path.display());
                return EXIT_IO;
            }
            &mut *io.out
        }
        None => {
            let _ = write!(io.out, "{}", traj.to_csv());
            &mut *io.err
        }
    };
    say!(summary, "species: {}", sys.species().join(", "));
    write_summary(summary, &sys, &traj, &report);
    if let Some(run) = eq_run {
        say!(summary, "equilibrium reached at t = {:?}", run.time);
        say!(summary, "equilibrium state: {}", fmt_fvec(&run.state));
        say!(summary, "equilibrium residual: {:e}", run.residual);
        match &run.cross_check {
            Some(cc) => {
                say!(summary, "convex solve: {}", fmt_fvec(&cc.convex));
                say!(
                    summary,
                    "cross-check: max relative difference {:e} ({})",
                    cc.max_rel_diff,
                    if cc.agrees { "agrees" } else { "DISAGREES" }
                );
            }
            None => say!(summary, "cross-check: not applicable (needs a natural atomic system and positive x0)"),
        }
    }
    EXIT_OK
}

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use splitbound::config::{bundled_names, ProblemConfig};
use splitbound::engine::{BoundsReport, Engine, EngineState, StopSpec};
use splitbound::montecarlo::mc_check;

const CHECKPOINT_FORMAT: &str = "splitbound.checkpoint/1";

#[derive(Parser)]
#[command(name = "splitbound", version, about = "Certified probability bounds by splitting input space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Start a search from a problem config.
    Run(RunArgs),
    /// Continue a search from a checkpoint.
    Resume(ResumeArgs),
    /// Uncertified Monte Carlo estimate under the density the bound lies beneath.
    McCheck(McArgs),
    /// List the configs built into the binary.
    Configs,
}

#[derive(Args)]
struct StopArgs {
    #[arg(long)]
    max_iterations: Option<u64>,
    #[arg(long)]
    max_seconds: Option<f64>,
    #[arg(long)]
    target_gap: Option<f64>,
}

impl StopArgs {
    fn apply(&self, base: &StopSpec) -> StopSpec {
        if self.max_iterations.is_none() && self.max_seconds.is_none() && self.target_gap.is_none() {
            return base.clone();
        }
        StopSpec {
            max_iterations: self.max_iterations,
            max_seconds: self.max_seconds,
            target_gap: self.target_gap,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Config file, or the name of a built-in config.
    #[arg(long)]
    config: PathBuf,
    /// Where to write the JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write a checkpoint for `resume`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[command(flatten)]
    stop: StopArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Replaces the model's criterion.
    #[arg(long)]
    criterion: Option<String>,
}

#[derive(Args)]
struct ResumeArgs {
    /// Checkpoint to continue from.
    #[arg(long)]
    resume: PathBuf,
    /// Where to write the new checkpoint; defaults to the one resumed.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    stop: StopArgs,
    #[arg(long)]
    threads: Option<usize>,
    /// Switch to a new criterion, keeping the current boxes.
    #[arg(long)]
    criterion: Option<String>,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 1000)]
    mc_samples: u64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    criterion: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// An error and the exit code it maps to.
struct Failure {
    code: u8,
    msg: String,
}

fn config_err(msg: impl std::fmt::Display) -> Failure {
    Failure {
        code: 2,
        msg: msg.to_string(),
    }
}

fn runtime_err(msg: impl std::fmt::Display) -> Failure {
    Failure {
        code: 3,
        msg: msg.to_string(),
    }
}

fn checkpoint_err(msg: impl std::fmt::Display) -> Failure {
    Failure {
        code: 4,
        msg: msg.to_string(),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(runtime_err)?;
    fs::write(path, text + "\n").map_err(|e| runtime_err(format!("{}: {e}", path.display())))
}

fn save_checkpoint(path: &Path, config: &ProblemConfig, state: &EngineState) -> Result<(), Failure> {
    let doc = json!({ "format": CHECKPOINT_FORMAT, "config": config, "state": state });
    let text = serde_json::to_string(&doc).map_err(runtime_err)?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).map_err(|e| runtime_err(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| runtime_err(format!("{}: {e}", path.display())))
}

fn load_checkpoint(path: &Path) -> Result<(ProblemConfig, EngineState), Failure> {
    let text = fs::read_to_string(path).map_err(|e| checkpoint_err(format!("{}: {e}", path.display())))?;
    let mut doc: Value =
        serde_json::from_str(&text).map_err(|e| checkpoint_err(format!("{}: {e}", path.display())))?;
    let format = doc.get("format").and_then(Value::as_str).unwrap_or("");
    if format != CHECKPOINT_FORMAT {
        return Err(checkpoint_err(format!(
            "{}: unsupported checkpoint format `{format}`, expected `{CHECKPOINT_FORMAT}`",
            path.display()
        )));
    }
    let config = serde_json::from_value(doc["config"].take())
        .map_err(|e| checkpoint_err(format!("{}: config: {e}", path.display())))?;
    let state = serde_json::from_value(doc["state"].take())
        .map_err(|e| checkpoint_err(format!("{}: state: {e}", path.display())))?;
    Ok((config, state))
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn fmt_interval(x: [f64; 2]) -> String {
    format!("[{:.6}, {:.6}]", x[0], x[1])
}

fn print_summary(r: &BoundsReport) {
    let mut o = String::new();
    let reason = r
        .stop_reason
        .map(|s| serde_json::to_value(s).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
        .unwrap_or_else(|| "-".into());
    let _ = writeln!(o, "criterion    {}", r.criterion);
    let _ = writeln!(o, "pass         {}", fmt_interval(r.pass));
    let _ = writeln!(o, "fail         {}", fmt_interval(r.fail));
    let _ = writeln!(o, 
        "gap          {:.6}  (floor {:.6}, mass fraction {:.6}{})",
        r.gap,
        r.gap_floor,
        r.mass_fraction,
        if r.mass_estimated { ", estimated" } else { "" }
    );
    let _ = writeln!(o, "iterations   {}  (stopped: {reason}, {:.2} s)", r.iterations, r.wall_seconds);
    let c = &r.regions;
    let _ = writeln!(o, 
        "boxes        {} queued ({} unsure, {} pass, {} fail), {} frozen, {} infeasible",
        c.queued,
        c.unsure,
        c.marked_pass,
        c.marked_fail,
        c.frozen,
        c.infeasible
    );
    let h = &r.history;
    if h.len() > 1 {
        let _ = writeln!(o, "history      iteration  lb_pass   lb_fail");
        let shown = 8.min(h.len());
        for i in 0..shown {
            let p = &h[i * (h.len() - 1) / (shown - 1).max(1)];
            let _ = writeln!(o, "             {:>9}  {:.6}  {:.6}", p.iteration, p.lb_pass, p.lb_fail);
        }
    }
    emit(&o);
}

fn finish(
    engine: &Engine,
    report: &BoundsReport,
    config: &ProblemConfig,
    out: Option<&Path>,
    checkpoint: Option<&Path>,
) -> Result<(), Failure> {
    print_summary(report);
    if let Some(p) = out {
        write_json(p, report)?;
    }
    if let Some(p) = checkpoint {
        save_checkpoint(p, config, &engine.state())?;
    }
    Ok(())
}

fn load_config(path: &Path) -> Result<ProblemConfig, Failure> {
    ProblemConfig::load(path).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let mut config = load_config(&a.config)?;
    if let Some(c) = a.criterion {
        config.criterion = Some(c);
    }
    if let Some(s) = a.seed {
        config.engine.seed = s;
    }
    if let Some(t) = a.threads {
        config.engine.threads = t;
    }
    let problem = config.build().map_err(|e| config_err(format!("{}: {e}", a.config.display())))?;
    let stop = a.stop.apply(&config.stop);
    let mut engine = Engine::new(problem, config.engine.clone()).map_err(runtime_err)?;
    let report = engine.run(&stop).map_err(runtime_err)?;
    finish(&engine, &report, &config, a.out.as_deref(), a.checkpoint.as_deref())
}

fn cmd_resume(a: ResumeArgs) -> Result<(), Failure> {
    let (mut config, state) = load_checkpoint(&a.resume)?;
    if let Some(t) = a.threads {
        config.engine.threads = t;
    }
    config.criterion = Some(state.criterion.clone());
    let problem = config.build().map_err(checkpoint_err)?;
    let mut engine = Engine::from_state(problem, config.engine.clone(), state).map_err(checkpoint_err)?;
    if let Some(c) = a.criterion {
        engine.set_criterion(&c).map_err(config_err)?;
        config.criterion = Some(c);
    }
    let stop = a.stop.apply(&config.stop);
    let report = engine.run(&stop).map_err(runtime_err)?;
    let checkpoint = a.checkpoint.unwrap_or(a.resume);
    finish(&engine, &report, &config, a.out.as_deref(), Some(&checkpoint))
}

fn cmd_mc(a: McArgs) -> Result<(), Failure> {
    let mut config = load_config(&a.config)?;
    if let Some(c) = a.criterion {
        config.criterion = Some(c);
    }
    let seed = a.seed.unwrap_or(config.engine.seed);
    let problem = config.build().map_err(|e| config_err(format!("{}: {e}", a.config.display())))?;
    let e = mc_check(&problem, a.mc_samples, seed).map_err(runtime_err)?;
    let mut o = String::new();
    let _ = writeln!(o, "Monte Carlo estimate (uncertified)");
    let _ = writeln!(o, "criterion    {}", problem.criterion_text());
    let _ = writeln!(o, "samples      {}  (seed {seed})", e.samples);
    let _ = writeln!(o, "pass         {:.6}  (standard error {:.6})", e.estimate, e.std_error);
    let _ = writeln!(o, "fail         {:.6}", 1.0 - e.estimate);
    if e.undefined > 0 {
        let _ = writeln!(o, "undefined    {} points", e.undefined);
    }
    emit(&o);
    if let Some(p) = a.out {
        write_json(
            &p,
            &json!({
                "format": "splitbound.mc/1",
                "criterion": problem.criterion_text(),
                "seed": seed,
                "certified": false,
                "estimate": e,
            }),
        )?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Resume(a) => cmd_resume(a),
        Command::McCheck(a) => cmd_mc(a),
        Command::Configs => {
            emit(&bundled_names().map(|n| format!("{n}\n")).collect::<String>());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

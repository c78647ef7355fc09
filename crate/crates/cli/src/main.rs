mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crossover::bounds::{lemma5_bound, optimize_r0_with};
use crossover::construct::{construct_with, SearchConfig};
use crossover::efficiency::efficiency_report;
use crossover::model::{criteria, ModelKind};
use crossover::table1::reproduce_table1;
use crossover::verify::{certify_with_report, verify_totally_balanced, Verdict};
use crossover::{fixtures, Design, Error, Execution};

use report::ReportEnvelope;

#[derive(Parser)]
#[command(name = "crossover", version, about = "Test-versus-control crossover designs")]
struct Cli {
    /// Output form.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args, Clone, Copy)]
struct Dims {
    #[arg(long)]
    t: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    n: usize,
}

#[derive(Args, Clone)]
struct Budget {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_restarts: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build a totally balanced design and certify it.
    Construct {
        #[command(flatten)]
        dims: Dims,
        #[command(flatten)]
        budget: Budget,
    },
    /// Check the balance conditions and certify a design file.
    Verify { file: PathBuf },
    /// Closed-form lower bound at one control replication.
    Bound {
        #[command(flatten)]
        dims: Dims,
        #[arg(long)]
        r0: usize,
    },
    /// Bound profile over control replications and its minimizer.
    #[command(name = "optimize-r0")]
    OptimizeR0 {
        #[command(flatten)]
        dims: Dims,
    },
    /// Criteria and efficiencies of a design file.
    Eval {
        file: PathBuf,
        /// Report criteria for one model only.
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
    },
    /// Reproduce the fifteen-row efficiency table.
    Table1 {
        #[command(flatten)]
        budget: Budget,
    },
    /// Write the bundled reference designs to a directory.
    Examples {
        #[arg(long)]
        out: PathBuf,
        /// Replace existing files.
        #[arg(long)]
        force: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Carryover,
    TwoWay,
    OneWay,
    ZeroWay,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Carryover => ModelKind::Carryover,
            ModelArg::TwoWay => ModelKind::TwoWay,
            ModelArg::OneWay => ModelKind::OneWay,
            ModelArg::ZeroWay => ModelKind::ZeroWay,
        }
    }
}

/// Bad input the user can fix: exit 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

struct Output {
    envelope: ReportEnvelope,
    text: String,
    /// Success by the command's own standard.
    ok: bool,
}

fn search_config(budget: &Budget, mode: Execution) -> SearchConfig {
    let mut cfg = SearchConfig {
        execution: mode,
        ..SearchConfig::default()
    };
    if let Some(s) = budget.seed {
        cfg.seed = s;
    }
    if let Some(r) = budget.max_restarts {
        cfg.max_restarts = r;
    }
    if let Some(i) = budget.max_iters {
        cfg.max_iters_per_restart = i;
    }
    cfg
}

fn read_design(path: &Path) -> anyhow::Result<Design> {
    let text = fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
    Design::parse(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())).into())
}

fn to_value(x: impl serde::Serialize) -> anyhow::Result<Value> {
    serde_json::to_value(x).context("serializing report")
}

fn certify(d: &Design) -> (crossover::BalanceReport, crossover::Certificate) {
    let report = verify_totally_balanced(d);
    let cert = certify_with_report(d, &report);
    (report, cert)
}

fn run(cli: &Cli) -> anyhow::Result<Output> {
    let mode = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    match &cli.command {
        Command::Construct { dims, budget } => {
            let cfg = search_config(budget, mode);
            let mut env = ReportEnvelope::new("construct", to_value(json!({"t": dims.t, "p": dims.p, "n": dims.n, "search": &cfg}))?);
            env.seed = Some(cfg.seed);
            let d = construct_with(dims.t, dims.p, dims.n, &cfg)?;
            let (_, cert) = certify(&d);
            let ok = cert.verdict.is_optimal();
            let text = format!("{}\n{}", d.render(), report::certificate_text(&cert));
            env.results = json!({"design_text": d.render(), "design": to_value(&d)?, "certificate": to_value(&cert)?});
            Ok(Output { envelope: env, text, ok })
        }
        Command::Verify { file } => {
            let d = read_design(file)?;
            let mut env = ReportEnvelope::new("verify", json!({"file": file.display().to_string()}));
            let (balance, cert) = certify(&d);
            if !cert.in_lambda {
                env.warnings.push("design lies outside the evenly-spread-control, no-self-adjacency class".into());
            }
            let ok = !matches!(cert.verdict, Verdict::NotCertified { .. });
            let text = format!("{}\n{}", report::balance_text(&balance), report::certificate_text(&cert));
            env.results = json!({"balance": to_value(&balance)?, "certificate": to_value(&cert)?});
            Ok(Output { envelope: env, text, ok })
        }
        Command::Bound { dims, r0 } => {
            let env_params = json!({"t": dims.t, "p": dims.p, "n": dims.n, "r0": r0});
            let mut env = ReportEnvelope::new("bound", env_params);
            let b = lemma5_bound(dims.t, dims.p, dims.n, *r0)?;
            env.results = to_value(b)?;
            Ok(Output { envelope: env, text: report::bound_text(&b), ok: true })
        }
        Command::OptimizeR0 { dims } => {
            let mut env = ReportEnvelope::new("optimize-r0", json!({"t": dims.t, "p": dims.p, "n": dims.n}));
            let prof = optimize_r0_with(mode, dims.t, dims.p, dims.n)?;
            env.results = to_value(&prof)?;
            Ok(Output { envelope: env, text: report::profile_text(&prof), ok: true })
        }
        Command::Eval { file, model } => {
            let d = read_design(file)?;
            let kinds: Vec<ModelKind> = match model {
                Some(m) => vec![(*m).into()],
                None => ModelKind::ALL.to_vec(),
            };
            let mut env = ReportEnvelope::new(
                "eval",
                json!({"file": file.display().to_string(), "models": kinds.iter().map(|k| k.name()).collect::<Vec<_>>()}),
            );
            let mut text = String::new();
            let mut crit = serde_json::Map::new();
            for k in &kinds {
                let (a, mv) = criteria(&d, *k)?;
                text.push_str(&format!("{:<10} trace {a:.6}  max var {mv:.6}\n", k.name()));
                crit.insert(k.name().into(), json!({"a_criterion": a, "mv_criterion": mv}));
            }
            let eff = efficiency_report(&d)?;
            if let Some(note) = &eff.e_c_note {
                env.warnings.push(note.clone());
            }
            text.push_str(&report::efficiency_text(&eff));
            env.results = json!({"criteria": crit, "efficiency": to_value(&eff)?});
            Ok(Output { envelope: env, text, ok: true })
        }
        Command::Table1 { budget } => {
            let cfg = search_config(budget, mode);
            let mut env = ReportEnvelope::new("table1", to_value(json!({"search": &cfg}))?);
            env.seed = Some(cfg.seed);
            let entries = reproduce_table1(&cfg, mode);
            for e in &entries {
                if e.report.is_none() {
                    env.warnings.push(format!("row {} not evaluated", e.reference.row));
                }
            }
            env.results = to_value(&entries)?;
            Ok(Output { envelope: env, text: report::table1_text(&entries), ok: true })
        }
        Command::Examples { out, force } => {
            let mut env = ReportEnvelope::new("examples", json!({"out": out.display().to_string(), "force": force}));
            guard_output_dir(out)?;
            fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
            let mut written = Vec::new();
            for (name, body) in fixtures::ALL {
                let path = out.join(name);
                if path.exists() && !force {
                    return Err(UsageError(format!("{} exists; pass --force to replace it", path.display())).into());
                }
                fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
                written.push(path.display().to_string());
            }
            let text = written.iter().map(|p| format!("wrote {p}\n")).collect();
            env.results = json!({"written": written});
            Ok(Output { envelope: env, text, ok: true })
        }
    }
}

/// The workspace `examples/` directory holds reference sources, not output.
fn guard_output_dir(out: &Path) -> anyhow::Result<()> {
    let reserved = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../examples");
    if let (Ok(a), Ok(b)) = (out.canonicalize(), reserved.canonicalize()) {
        if a == b {
            bail!(UsageError(format!("refusing to write into {}", b.display())));
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Parse { .. } | Error::Dimension(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            match cli.format {
                Format::Json => match serde_json::to_string_pretty(&out.envelope) {
                    Ok(s) => println!("{s}"),
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(1);
                    }
                },
                Format::Text => {
                    print!("{}", out.text);
                    for w in &out.envelope.warnings {
                        eprintln!("warning: {w}");
                    }
                }
            }
            ExitCode::from(if out.ok { 0 } else { 1 })
        }
        Err(err) => {
            let code = exit_code(&err);
            if cli.format == Format::Json {
                let body = json!({"command": command_name(&cli.command), "error": format!("{err:#}"), "exit_code": code});
                println!("{}", serde_json::to_string_pretty(&body).unwrap_or_default());
            }
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Construct { .. } => "construct",
        Command::Verify { .. } => "verify",
        Command::Bound { .. } => "bound",
        Command::OptimizeR0 { .. } => "optimize-r0",
        Command::Eval { .. } => "eval",
        Command::Table1 { .. } => "table1",
        Command::Examples { .. } => "examples",
    }
}

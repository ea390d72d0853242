use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use log::error;

use otr_core::bench::{combined_ranking, emit_report, oracle, run_method, ReportFormat, Scope};
use otr_core::dcopf::solve_opf;
use otr_core::error::OtrError;
use otr_core::matpower::read_case;
use otr_core::network::Network;
use otr_core::pivot::{improved_heuristic_with, iterative_line_opening, DEFAULT_T};
use otr_core::sensitivity::{baseline_criterion, rank_lines, rank_lines_ruiz, Method};

#[derive(Parser)]
#[command(name = "otr", version, about = "DC-OPF line switching and bus splitting heuristics")]
struct Cli {
    /// Multiply every finite line limit by this factor before solving.
    #[arg(long, global = true, default_value_t = 1.0)]
    limit_factor: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    M0,
    M1,
    M2,
    M3,
    M4,
    Ruiz,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::M0 => Method::M0,
            MethodArg::M1 => Method::M1,
            MethodArg::M2 => Method::M2,
            MethodArg::M3 => Method::M3,
            MethodArg::M4 => Method::M4,
            MethodArg::Ruiz => Method::Ruiz,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Lines,
    Splits,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Markdown,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Markdown => ReportFormat::Markdown,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the DC-OPF and print primal and dual values as JSON.
    Solve { case: PathBuf },
    /// Rank candidate actions by first-order score.
    Rank {
        case: PathBuf,
        #[arg(long, value_enum, default_value = "m2")]
        method: MethodArg,
        #[arg(long)]
        top: Option<usize>,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
    },
    /// Pick one action with a method, apply it and report the re-solved cost.
    Run {
        case: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
    },
    /// Refine the top candidates with one simplex pivot and print the report.
    Refine {
        case: PathBuf,
        #[arg(long, default_value_t = DEFAULT_T)]
        t: usize,
        /// Also re-solve every refined action.
        #[arg(long)]
        oracle: bool,
    },
    /// Apply every single action in scope and tabulate the re-solved costs.
    Oracle {
        case: PathBuf,
        #[arg(long, value_enum, default_value = "lines")]
        scope: ScopeArg,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
    },
    /// Open lines one at a time using a line ranking.
    Iterate {
        case: PathBuf,
        #[arg(long, value_enum, default_value = "m2")]
        method: MethodArg,
        #[arg(long, default_value_t = 5)]
        max_open: usize,
    },
    /// Run M0 to M4 on each case and print a comparison table.
    Report {
        #[arg(required = true)]
        cases: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "markdown")]
        format: FormatArg,
    },
}

fn load(path: &PathBuf, factor: f64) -> Result<Network, OtrError> {
    let net = read_case(path)?;
    if factor <= 0.0 || !factor.is_finite() {
        return Err(OtrError::Validation(format!("limit factor must be positive, got {factor}")));
    }
    Ok(if factor == 1.0 { net } else { net.with_scaled_limits(factor) })
}

fn print_json(v: &serde_json::Value) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let f = cli.limit_factor;
    match cli.command {
        Command::Solve { case } => {
            let net = load(&case, f)?;
            let s = solve_opf(&net)?;
            print_json(&s.solution.to_json())?;
        }
        Command::Rank {
            case,
            method,
            top,
            format,
        } => {
            let net = load(&case, f)?;
            let solved = solve_opf(&net)?;
            let method = Method::from(method);
            let mut ranking = match method {
                Method::M0 | Method::M1 => baseline_criterion(&net, &solved.solution, method)?,
                Method::M2 => rank_lines(&net, &solved.solution),
                Method::Ruiz => rank_lines_ruiz(&net, &solved.solution),
                Method::M3 => combined_ranking(&net, &solved)?,
                Method::M4 => anyhow::bail!(OtrError::Validation(
                    "M4 has no first-order ranking; use `otr refine`".into()
                )),
            };
            if let Some(t) = top {
                ranking.entries.truncate(t);
            }
            match format {
                FormatArg::Csv => print!("{}", ranking.to_csv(&net)),
                _ => print_json(&ranking.to_json(&net))?,
            }
        }
        Command::Run { case, method } => {
            let net = load(&case, f)?;
            let r = run_method(&net, method.into())?;
            print_json(&serde_json::to_value(&r)?)?;
        }
        Command::Refine { case, t, oracle } => {
            let net = load(&case, f)?;
            let solved = solve_opf(&net)?;
            let (_, mut report) = improved_heuristic_with(&net, &solved, t)?;
            if oracle {
                report.fill_oracle(&net);
            }
            print_json(&report.to_json())?;
        }
        Command::Oracle {
            case,
            scope,
            format,
        } => {
            let net = load(&case, f)?;
            let scope = match scope {
                ScopeArg::Lines => Scope::Lines,
                ScopeArg::Splits => Scope::Splits,
                ScopeArg::Both => Scope::Both,
            };
            let r = oracle(&net, scope)?;
            match format {
                FormatArg::Csv => print!("{}", r.to_csv()),
                _ => print_json(&serde_json::to_value(&r)?)?,
            }
        }
        Command::Iterate {
            case,
            method,
            max_open,
        } => {
            let net = load(&case, f)?;
            let r = iterative_line_opening(&net, method.into(), max_open)?;
            print_json(&serde_json::to_value(&r)?)?;
        }
        Command::Report { cases, format } => {
            let mut results = Vec::new();
            for case in &cases {
                let net = load(case, f)?;
                for m in [Method::M0, Method::M1, Method::M2, Method::M3, Method::M4] {
                    results.push(run_method(&net, m).with_context(|| {
                        format!("{} on {}", m.as_str(), case.display())
                    })?);
                }
            }
            print!("{}", emit_report(&results, format.into()));
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<OtrError>() {
        Some(e) if e.is_input_error() => 2,
        Some(OtrError::Islanded { .. }) => 2,
        Some(OtrError::Infeasible(_)) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e:#}");
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

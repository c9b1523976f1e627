mod commands;
mod report;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use commands::{CliError, Epi, Form, Settings, Suite};
use report::Report;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// Workbench for finite presites, gluing and completions.
#[derive(Debug, Parser)]
#[command(name = "glutos", version)]
struct Cli {
    /// Workspace bundle (JSON); may be repeated. Built-in fixtures are always loaded.
    #[arg(short, long = "workspace", global = true)]
    workspaces: Vec<PathBuf>,
    /// Section-size bound for sheaf fragments.
    #[arg(long, global = true, env = "GLUTOS_BOUND", default_value_t = 2)]
    bound: usize,
    /// Saturation depth for closures.
    #[arg(long, global = true, default_value_t = 8)]
    depth: usize,
    /// Seed for randomized trials.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Count proxy passes as passes in the exit status.
    #[arg(long, global = true)]
    allow_proxy: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an axiom suite on a presite, or on `topos` (the bounded topos of finite sets).
    Check {
        #[arg(long, value_enum, default_value_t = Suite::Glutos)]
        suite: Suite,
        #[arg(long)]
        target: String,
        #[arg(long, value_enum, default_value_t = Form::Strong)]
        form: Form,
        #[arg(long, value_enum, default_value_t = Epi::Yoneda)]
        epi: Epi,
    },
    /// Subcanonical closure of a presite inside its bounded sheaf fragment.
    CompleteSub {
        #[arg(long)]
        site: String,
    },
    /// Glue a named gluon, every clopen M-gluon of a site, or test the local pullback criterion.
    Glue {
        #[arg(long)]
        site: Option<String>,
        #[arg(long)]
        gluon: Option<String>,
        #[arg(long)]
        local_pullback: bool,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 3)]
        max_index: usize,
    },
    /// Build the charts-and-atlases completion of a functor between presites.
    Atlas {
        #[arg(long)]
        source: String,
        #[arg(long)]
        target: String,
        /// Named functor; defaults to the inclusion by object and arrow names.
        #[arg(long)]
        functor: Option<String>,
        #[arg(long, value_enum, default_value_t = Epi::Yoneda)]
        epi: Epi,
        #[arg(long, default_value_t = 2)]
        max_index: usize,
    },
    /// Apply the M, L and SG operators; optionally verify their algebraic laws.
    Operators {
        #[arg(long)]
        site: String,
        #[arg(long)]
        verify_rels: bool,
    },
    /// Realize frame sheaves as sections of glued spaces and compare.
    Nglu {
        #[arg(long)]
        site: Option<String>,
        #[arg(long)]
        sheaf: Option<String>,
    },
    /// Pretopology validation and operator laws for every loaded presite.
    Report,
}

fn run(cli: &Cli) -> Result<Report, CliError> {
    let ws = workspace::parse_workspace(&cli.workspaces)?;
    let st = Settings { bound: cli.bound, depth: cli.depth, seed: cli.seed };
    let mut params = json!({"bound": st.bound, "depth": st.depth, "seed": st.seed});
    let (name, sections) = match &cli.command {
        Command::Check { suite, target, form, epi } => {
            params["target"] = json!(target);
            ("check", commands::check(&ws, &st, *suite, target, *form, *epi)?)
        }
        Command::CompleteSub { site } => {
            params["site"] = json!(site);
            ("complete-sub", commands::complete_sub(&ws, &st, site)?)
        }
        Command::Glue { site, gluon, local_pullback, trials, max_index } => {
            params["site"] = json!(site);
            params["gluon"] = json!(gluon);
            ("glue", commands::glue(&ws, &st, site.as_deref(), gluon.as_deref(), *local_pullback, *trials, *max_index)?)
        }
        Command::Atlas { source, target, functor, epi, max_index } => {
            params["source"] = json!(source);
            params["target"] = json!(target);
            ("atlas", commands::atlas(&ws, &st, source, target, functor.as_deref(), *epi, *max_index)?)
        }
        Command::Operators { site, verify_rels } => {
            params["site"] = json!(site);
            ("operators", commands::operators(&ws, site, *verify_rels)?)
        }
        Command::Nglu { site, sheaf } => {
            params["site"] = json!(site);
            params["sheaf"] = json!(sheaf);
            ("nglu", commands::nglu(&ws, &st, site.as_deref(), sheaf.as_deref())?)
        }
        Command::Report => ("report", commands::report(&ws, &st)?),
    };
    Ok(Report::new(name, params, sections, cli.allow_proxy))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            let out = match cli.format {
                Format::Text => report.text(),
                Format::Json => report.json(),
            };
            print!("{out}");
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

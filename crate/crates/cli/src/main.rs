//! `matchforge`: run deferred acceptance, check choice rules, matching rules
//! and matchings against the axiom library, verify characterizations, and
//! generate seeded instances.
//!
//! Exit codes: 0 pass, 1 internal contract violation, 2 instance or usage
//! error, 3 enumeration guard exceeded, 4 witness found, 5 incompatible
//! axioms.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use matchforge::Guards;

use report::{Failure, Format, Report};

#[derive(Parser, Debug)]
#[command(name = "matchforge", version, about = "Deferred acceptance and exhaustive axiom verification")]
struct Cli {
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Largest ground set for pairwise choice-rule checks; overrides
    /// MATCHFORGE_MAX_GROUND.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    max_ground: Option<u64>,
    /// Largest number of preference profiles or matchings to enumerate.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    max_profiles: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run deferred acceptance on an instance.
    Run(RunArgs),
    /// Check a choice rule, a matching rule or a matching.
    #[command(subcommand)]
    Check(CheckCommand),
    /// Verify a characterization, the forward direction, the lemma chain or
    /// the strengthening counterexample.
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Write a seeded random instance.
    Gen(GenArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    instance: PathBuf,
    /// A rule for every institution, or a comma list of `institution=rule`
    /// with an optional bare default.
    #[arg(long, default_value = "responsive")]
    rule: String,
    /// Include the step log.
    #[arg(long)]
    trace: bool,
}

/// A market given by file or generated from a shape.
#[derive(Args, Debug)]
struct MarketArgs {
    #[arg(long, conflicts_with = "shape")]
    instance: Option<PathBuf>,
    /// `AGENTSxINSTITUTIONS`, one contract per pair, generated from `--seed`.
    #[arg(long)]
    shape: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Reserve types for generated markets.
    #[arg(long, default_value_t = 1)]
    types: usize,
}

#[derive(Subcommand, Debug)]
enum CheckCommand {
    /// Choice-rule properties and punctual axioms, per institution.
    Choice(CheckChoiceArgs),
    /// Properties of a matching rule over every preference profile.
    Rule(CheckRuleArgs),
    /// Matching axioms and stability of one matching.
    Matching(CheckMatchingArgs),
}

#[derive(Args, Debug)]
struct CheckChoiceArgs {
    /// Comma list of path-independence, size-monotonicity,
    /// substitutability, irc, axiom names or axiom-set names.
    #[arg(long)]
    axiom: String,
    #[arg(long, default_value = "responsive")]
    rule: String,
    #[arg(long, conflicts_with = "table", required_unless_present = "table")]
    instance: Option<PathBuf>,
    /// Only this institution.
    #[arg(long)]
    institution: Option<String>,
    /// A tabulated rule instead of an instance.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckRuleArgs {
    /// Comma list of strategy-proofness, individual-rationality, axiom
    /// names or axiom-set names (checked through their extensions).
    #[arg(long, default_value = "strategy-proofness")]
    axiom: String,
    /// DA based on a designed rule, or immediate-acceptance.
    #[arg(long, default_value = "responsive")]
    rule: String,
    #[command(flatten)]
    market: MarketArgs,
}

#[derive(Args, Debug)]
struct CheckMatchingArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Comma-separated contract ids; empty for the empty matching.
    #[arg(long, allow_hyphen_values = true)]
    matching: String,
    /// Choice rules for the stability check.
    #[arg(long, default_value = "responsive")]
    rule: String,
    /// Comma list of stability, individual-rationality, axiom names or
    /// axiom-set names; defaults to stability and every axiom the instance
    /// has data for.
    #[arg(long)]
    axiom: Option<String>,
}

#[derive(Subcommand, Debug)]
enum VerifyCommand {
    /// Whether an axiom family selects exactly a target rule, per
    /// institution.
    Characterization(CharacterizationArgs),
    /// DA based on a rule satisfies individual rationality, the extended
    /// characterizing axioms, and strategy-proofness.
    Forward(ChainArgs),
    /// Every individually rational matching satisfying the extended axioms
    /// is stable, and the DA outcome satisfies them.
    LemmaChain(ChainArgs),
    /// The two-contract market refuting the strengthened characterization.
    #[command(alias = "appendix-h")]
    StrengtheningCounterexample,
}

#[derive(Args, Debug)]
struct CharacterizationArgs {
    /// Comma list of axiom names or axiom-set names.
    #[arg(long)]
    axioms: String,
    #[arg(long)]
    target: String,
    #[command(flatten)]
    market: MarketArgs,
    #[arg(long)]
    institution: Option<String>,
}

#[derive(Args, Debug)]
struct ChainArgs {
    #[arg(long, default_value = "responsive")]
    rule: String,
    #[command(flatten)]
    market: MarketArgs,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    agents: usize,
    #[arg(long)]
    institutions: usize,
    #[arg(long, default_value_t = 0)]
    types: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Capacity of every institution; random when omitted.
    #[arg(long)]
    capacity: Option<usize>,
    #[arg(long, default_value_t = 25, value_parser = clap::value_parser!(u32).range(0..=100))]
    returning_percent: u32,
    /// Write here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn guards(cli: &Cli) -> Result<Guards, Failure> {
    let mut g = Guards::from_env()?;
    if let Some(n) = cli.max_ground {
        g.max_ground = n as usize;
    }
    if let Some(n) = cli.max_profiles {
        g.max_profiles = n as u128;
    }
    Ok(g)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::Gen(args) = &cli.command {
        return match commands::gen(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(f) => {
                eprintln!("error: {}", match &f {
                    Failure::Instance(m) | Failure::Guard(m) | Failure::Internal(m) => m,
                });
                ExitCode::from(report::exit_for(&f))
            }
        };
    }
    let name = match &cli.command {
        Command::Run(_) => "run",
        Command::Check(CheckCommand::Choice(_)) => "check choice",
        Command::Check(CheckCommand::Rule(_)) => "check rule",
        Command::Check(CheckCommand::Matching(_)) => "check matching",
        Command::Verify(VerifyCommand::Characterization(_)) => "verify characterization",
        Command::Verify(VerifyCommand::Forward(_)) => "verify forward",
        Command::Verify(VerifyCommand::LemmaChain(_)) => "verify lemma-chain",
        Command::Verify(VerifyCommand::StrengtheningCounterexample) => "verify strengthening-counterexample",
        Command::Gen(_) => unreachable!("handled above"),
    };
    let result = guards(&cli).and_then(|g| {
        let mut report = Report::new(name);
        match &cli.command {
            Command::Run(a) => commands::run(a, &mut report)?,
            Command::Check(CheckCommand::Choice(a)) => commands::check_choice(a, &g, &mut report)?,
            Command::Check(CheckCommand::Rule(a)) => commands::check_rule(a, &g, &mut report)?,
            Command::Check(CheckCommand::Matching(a)) => commands::check_matching(a, &mut report)?,
            Command::Verify(VerifyCommand::Characterization(a)) => commands::characterization(a, &g, &mut report)?,
            Command::Verify(VerifyCommand::Forward(a)) => commands::forward(a, &g, &mut report)?,
            Command::Verify(VerifyCommand::LemmaChain(a)) => commands::lemma_chain(a, &g, &mut report)?,
            Command::Verify(VerifyCommand::StrengtheningCounterexample) => {
                commands::strengthening(&g, &mut report)?
            }
            Command::Gen(_) => unreachable!("handled above"),
        }
        Ok(report)
    });
    match result {
        Ok(report) => report.emit(cli.format),
        Err(f) => Report::failed(name, &f).emit(cli.format),
    }
}

//! Batch front end: run demos and experiment sweeps, load variable
//! definitions, emit reports.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 usage or validation
//! error (including malformed variable files), 3 exhaustion-dominated run
//! (fewer than half of the trials terminated).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{
    self, derive_trial_seed, no_signaling_audit, resource_count, signaling_demo_monte_carlo,
    signaling_demo_von_neumann, AuditScenario, TerminationLaw,
};
use crate::linalg;
use crate::protocols::{
    run_product_basis_protocol, run_three_party, run_universal_two_party, ProtocolConfig,
    ProtocolRun, ProtocolStatus,
};
use crate::qsim::{Disposal, OutcomeDriver, Site};
use crate::report::{OutputFormat, Report};
use crate::variable::NonlocalVariable;

/// Fewer terminated trials than this fraction exits with code 3.
const EXHAUSTION_FLOOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    /// Human-readable aligned table.
    Table,
    /// Line-oriented `key value` document with a schema header.
    Machine,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Table => OutputFormat::Table,
            FormatArg::Machine => OutputFormat::Machine,
        }
    }
}

/// A validated run specification.
#[derive(Debug, Parser)]
#[command(
    name = "nlvsim",
    version,
    about = "Instantaneous nonlocal-variable measurement protocols, simulated and audited"
)]
pub struct RunSpec {
    #[command(subcommand)]
    pub command: Command,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Report rendering.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Table)]
    pub format: FormatArg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Product-basis demo: decode each of the four eigenstates, many runs.
    DemoEq1 {
        /// Runs per eigenstate.
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Universal two-party measurement sweep over eigenstate inputs.
    Universal {
        /// Built-in name (eq1, bell-basis, ghz-basis) or a variable file.
        #[arg(long)]
        variable: String,
        /// Restrict the sweep to one eigenbasis column.
        #[arg(long)]
        eigenstate: Option<usize>,
        #[arg(long, default_value_t = 50)]
        max_rounds: u32,
        /// Runs per eigenstate input.
        #[arg(long, default_value_t = 500)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Three-party measurement sweep over eigenstate inputs.
    ThreeParty {
        /// Built-in name (ghz-basis) or a variable file over sites A, B, C.
        #[arg(long)]
        variable: String,
        #[arg(long)]
        eigenstate: Option<usize>,
        #[arg(long, default_value_t = 30)]
        max_rounds: u32,
        /// Runs per eigenstate input.
        #[arg(long, default_value_t = 200)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Signaling gap of the ideal von Neumann measurement, plus the
    /// no-signaling audit of the verification protocols.
    SignalingDemo {
        /// Monte Carlo trials per arm.
        #[arg(long, default_value_t = 10000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Empirical termination-round statistics against the closed-form law.
    TerminationStats {
        #[arg(long = "K", visible_alias = "k", default_value_t = 1)]
        k: u32,
        #[arg(long, default_value_t = 4000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        max_rounds: u32,
    },
    /// Analytic entanglement budget per round.
    Resources {
        #[arg(long = "K", visible_alias = "k", default_value_t = 1)]
        k: u32,
        #[arg(long, default_value_t = 4)]
        rounds: u32,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(std::io::Error),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) | CliError::Internal(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

/// Parse command-line arguments into a validated [`RunSpec`].
pub fn parse_args<I, T>(args: I) -> Result<RunSpec, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    RunSpec::try_parse_from(args)
}

/// Resolve a `--variable` argument: built-in name first, then file path.
fn load_variable(spec: &str) -> CliResult<NonlocalVariable> {
    if let Some(builtin) = NonlocalVariable::builtin(spec) {
        return Ok(builtin);
    }
    let path = PathBuf::from(spec);
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "`{spec}` is neither a built-in variable (eq1, bell-basis, ghz-basis) nor a readable file"
        )));
    }
    let text = std::fs::read_to_string(&path)?;
    NonlocalVariable::from_text(&text)
        .map_err(|e| CliError::Usage(format!("variable file {}: {e}", path.display())))
}

/// Execute a run spec. Returns the report and the process exit code
/// (0, or 3 for an exhaustion-dominated run).
pub fn execute(spec: &RunSpec) -> CliResult<(Report, u8)> {
    match &spec.command {
        Command::DemoEq1 { trials, seed } => demo_eq1(*trials, *seed),
        Command::Universal {
            variable,
            eigenstate,
            max_rounds,
            trials,
            seed,
        } => universal(variable, *eigenstate, *max_rounds, *trials, *seed),
        Command::ThreeParty {
            variable,
            eigenstate,
            max_rounds,
            trials,
            seed,
        } => three_party(variable, *eigenstate, *max_rounds, *trials, *seed),
        Command::SignalingDemo { trials, seed } => signaling_demo(*trials, *seed),
        Command::TerminationStats {
            k,
            trials,
            seed,
            max_rounds,
        } => termination_stats(*k, *trials, *seed, *max_rounds),
        Command::Resources { k, rounds } => resources(*k, *rounds),
    }
}

fn push_shape(report: &mut Report, k_label: &str, k: usize, n: u128, m: u128) {
    report.push(k_label, k);
    report.push("n", n);
    report.push("m", m);
}

fn show_pairs(p: u128) -> String {
    if p == u128::MAX {
        "saturated".into()
    } else {
        p.to_string()
    }
}

fn demo_eq1(trials: u64, seed: u64) -> CliResult<(Report, u8)> {
    let variable = NonlocalVariable::eq1();
    let mut report = Report::new("demo-eq1");
    report.push("seed", seed);
    push_shape(&mut report, "k", 1, 4, 16);
    report.push("rounds", 1);
    report.push("trials-per-eigenstate", trials);
    let mut all_correct = true;
    for col in 0..variable.dim() {
        let input = variable.eigenstate(col);
        let mut correct = 0u64;
        for trial in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_trial_seed(seed ^ col as u64, trial));
            let mut driver = OutcomeDriver::sampled(&mut rng);
            let run = run_product_basis_protocol(&input, &mut driver, Disposal::Consume)
                .map_err(internal)?;
            if run.label == col {
                correct += 1;
            }
        }
        report.push(&format!("eigenstate-{}-correct", col + 1), correct);
        all_correct &= correct == trials;
    }
    report.push("epr-pairs-per-run", 1);
    report.push("all-correct", all_correct);
    Ok((report, 0))
}

struct SweepTally {
    runs: u64,
    terminated: u64,
    correct: u64,
    rounds_sum: u64,
    round_one: u64,
    pairs_active: u128,
    pairs_analytic: u128,
    decoded_values: Vec<f64>,
}

impl SweepTally {
    fn new() -> Self {
        SweepTally {
            runs: 0,
            terminated: 0,
            correct: 0,
            rounds_sum: 0,
            round_one: 0,
            pairs_active: 0,
            pairs_analytic: 0,
            decoded_values: Vec::new(),
        }
    }

    fn absorb(&mut self, run: &ProtocolRun, expected_value: f64) {
        self.runs += 1;
        self.pairs_active = self
            .pairs_active
            .saturating_add(run.diagnostics.active_path_pairs);
        self.pairs_analytic = self
            .pairs_analytic
            .saturating_add(run.result.epr_pairs_consumed);
        if run.result.status == ProtocolStatus::Decoded {
            self.terminated += 1;
            self.rounds_sum += run.result.rounds_used as u64;
            if run.result.rounds_used == 1 {
                self.round_one += 1;
            }
            let value = run.result.eigenvalue.expect("decoded");
            self.decoded_values.push(value);
            if value == expected_value {
                self.correct += 1;
            }
        }
    }
}

fn sweep_columns(variable: &NonlocalVariable, eigenstate: Option<usize>) -> CliResult<Vec<usize>> {
    match eigenstate {
        Some(col) if col < variable.dim() => Ok(vec![col]),
        Some(col) => Err(CliError::Usage(format!(
            "eigenstate {col} out of range 0..{}",
            variable.dim()
        ))),
        None => Ok((0..variable.dim()).collect()),
    }
}

fn finish_sweep(mut report: Report, tally: SweepTally) -> CliResult<(Report, u8)> {
    let decoded_fraction = tally.terminated as f64 / tally.runs.max(1) as f64;
    report.push("runs", tally.runs);
    report.push("terminated", tally.terminated);
    report.push("decoded-fraction", decoded_fraction);
    report.push("correct", tally.correct);
    report.push(
        "mean-rounds",
        tally.rounds_sum as f64 / tally.terminated.max(1) as f64,
    );
    report.push(
        "round-1-fraction",
        tally.round_one as f64 / tally.runs.max(1) as f64,
    );
    report.push("epr-pairs-active-total", show_pairs(tally.pairs_active));
    report.push("epr-pairs-analytic-total", show_pairs(tally.pairs_analytic));
    let code = if decoded_fraction < EXHAUSTION_FLOOR {
        3
    } else {
        0
    };
    report.push("exit-code", code);
    Ok((report, code))
}

fn universal(
    variable_spec: &str,
    eigenstate: Option<usize>,
    max_rounds: u32,
    trials: u64,
    seed: u64,
) -> CliResult<(Report, u8)> {
    let variable = load_variable(variable_spec)?;
    let (k_alice, k_bob) = match variable.partition() {
        [(Site::A, ka), (Site::B, kb)] => (*ka, *kb),
        other => {
            return Err(CliError::Usage(format!(
                "universal needs a variable over sites A and B, got {other:?}"
            )))
        }
    };
    let config = ProtocolConfig {
        max_rounds,
        seed,
        ..ProtocolConfig::default()
    };
    let mut report = Report::new("universal");
    report.push("variable", variable_spec);
    report.push("seed", seed);
    push_shape(
        &mut report,
        "k-bob",
        k_bob,
        4u128.pow(k_bob as u32),
        4u128.pow((k_alice + k_bob) as u32),
    );
    report.push("k-alice", k_alice);
    report.push("rounds", max_rounds);
    report.push("trials-per-eigenstate", trials);

    let mut tally = SweepTally::new();
    for col in sweep_columns(&variable, eigenstate)? {
        let input = variable.eigenstate(col);
        let expected = variable.eigenvalue(col);
        let mut correct = 0u64;
        let mut terminated = 0u64;
        for trial in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_trial_seed(
                seed ^ (col as u64).wrapping_mul(0x9E37),
                trial,
            ));
            let mut driver = OutcomeDriver::sampled(&mut rng);
            let run = run_universal_two_party(&variable, &input, &config, &mut driver)
                .map_err(internal)?;
            if run.result.status == ProtocolStatus::Decoded {
                terminated += 1;
                if run.result.eigenvalue == Some(expected) {
                    correct += 1;
                }
            }
            tally.absorb(&run, expected);
        }
        report.push(&format!("eigenstate-{col}-terminated"), terminated);
        report.push(&format!("eigenstate-{col}-correct"), correct);
    }
    finish_sweep(report, tally)
}

fn three_party(
    variable_spec: &str,
    eigenstate: Option<usize>,
    max_rounds: u32,
    trials: u64,
    seed: u64,
) -> CliResult<(Report, u8)> {
    let variable = load_variable(variable_spec)?;
    let ks: Vec<usize> = match variable.partition() {
        [(Site::A, ka), (Site::B, kb), (Site::C, kc)] => vec![*ka, *kb, *kc],
        other => {
            return Err(CliError::Usage(format!(
                "three-party needs a variable over sites A, B and C, got {other:?}"
            )))
        }
    };
    let total: usize = ks.iter().sum();
    let config = ProtocolConfig {
        max_rounds,
        seed,
        ..ProtocolConfig::default()
    };
    let mut report = Report::new("three-party");
    report.push("variable", variable_spec);
    report.push("seed", seed);
    push_shape(
        &mut report,
        "k-per-party",
        ks[0],
        4u128.pow(ks[0] as u32),
        4u128.pow(total as u32),
    );
    report.push("rounds", max_rounds);
    report.push("trials-per-eigenstate", trials);

    let mut tally = SweepTally::new();
    for col in sweep_columns(&variable, eigenstate)? {
        let input = variable.eigenstate(col);
        let expected = variable.eigenvalue(col);
        let mut correct = 0u64;
        let mut terminated = 0u64;
        for trial in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_trial_seed(
                seed ^ (col as u64).wrapping_mul(0x51ED),
                trial,
            ));
            let mut driver = OutcomeDriver::sampled(&mut rng);
            let run = run_three_party(&variable, &input, &config, &mut driver).map_err(internal)?;
            if run.result.status == ProtocolStatus::Decoded {
                terminated += 1;
                if run.result.eigenvalue == Some(expected) {
                    correct += 1;
                }
            }
            tally.absorb(&run, expected);
        }
        report.push(&format!("eigenstate-{col}-terminated"), terminated);
        report.push(&format!("eigenstate-{col}-correct"), correct);
    }
    finish_sweep(report, tally)
}

fn signaling_demo(trials: u64, seed: u64) -> CliResult<(Report, u8)> {
    let mut report = Report::new("signaling-demo");
    report.push("seed", seed);
    push_shape(&mut report, "k", 1, 4, 16);
    report.push("rounds", 1);
    report.push("trials", trials);

    let (p_flip, p_noflip) = signaling_demo_von_neumann().map_err(internal)?;
    report.push("p-flip", p_flip);
    report.push("p-noflip", p_noflip);
    report.push("signaling-gap", p_flip - p_noflip);

    let (mc_flip, mc_noflip) = signaling_demo_monte_carlo(trials, seed).map_err(internal)?;
    report.push("mc-p-flip", mc_flip);
    report.push("mc-p-noflip", mc_noflip);

    let variable = NonlocalVariable::eq1();
    let input = variable.eigenstate(0);
    let flip = linalg::pauli_x();
    let dev_product = no_signaling_audit(&AuditScenario::ProductBasis { input: &input }, &flip)
        .map_err(internal)?;
    let dev_universal = no_signaling_audit(
        &AuditScenario::UniversalRoundOne {
            variable: &variable,
            input: &input,
        },
        &flip,
    )
    .map_err(internal)?;
    let dev_oracle = no_signaling_audit(
        &AuditScenario::IdealProjective {
            variable: &variable,
            input: &input,
        },
        &flip,
    )
    .map_err(internal)?;
    report.push("audit-product-basis-deviation", dev_product);
    report.push("audit-universal-round1-deviation", dev_universal);
    report.push("audit-von-neumann-deviation", dev_oracle);
    report.push("epr-pairs-per-audit-branch", 3);
    Ok((report, 0))
}

fn termination_stats(k: u32, trials: u64, seed: u64, max_rounds: u32) -> CliResult<(Report, u8)> {
    let law = TerminationLaw::two_party(k).map_err(internal)?;
    let partition = vec![(Site::A, k as usize), (Site::B, k as usize)];
    let variable = NonlocalVariable::computational(partition).map_err(internal)?;
    let input = variable.eigenstate(0);
    let config = ProtocolConfig {
        max_rounds,
        seed,
        ..ProtocolConfig::default()
    };
    let runner = |trial_seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
        let mut driver = OutcomeDriver::sampled(&mut rng);
        let run = run_universal_two_party(&variable, &input, &config, &mut driver)
            .map_err(analysis::AnalysisError::Protocol)?;
        Ok(match run.result.status {
            ProtocolStatus::Decoded => Some(run.result.rounds_used),
            ProtocolStatus::Exhausted => None,
        })
    };
    let stats = analysis::empirical_termination(runner, trials, seed, &law, max_rounds)
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let mut report = Report::new("termination-stats");
    report.push("seed", seed);
    push_shape(
        &mut report,
        "k",
        k as usize,
        law.n() as u128,
        law.m() as u128,
    );
    report.push("rounds", max_rounds);
    report.push("trials", trials);
    for r in 1..=stats.binned_rounds.min(8) {
        report.push(&format!("round-{r}-observed"), stats.frequency(r));
        report.push(&format!("round-{r}-law"), law.round_probability(r));
    }
    report.push("exhausted", stats.exhausted);
    report.push("cumulative-2-observed", stats.cumulative_frequency(2));
    report.push("cumulative-2-law", law.cumulative(2));
    report.push("chi-square", stats.chi_square);
    report.push("chi-square-df", stats.degrees_of_freedom);
    report.push("p-value", stats.p_value);
    let budget = resource_count(k, 2, 2).map_err(internal)?;
    report.push("epr-pairs-two-rounds", show_pairs(budget.epr_pairs_total));
    Ok((report, 0))
}

fn resources(k: u32, rounds: u32) -> CliResult<(Report, u8)> {
    let budget = resource_count(k, 2, rounds).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut report = Report::new("resources");
    report.push("seed", 0);
    push_shape(&mut report, "k", k as usize, 4u128.pow(k), 4u128.pow(2 * k));
    report.push("rounds", rounds);
    for (i, (channels, pairs)) in budget
        .channels_per_round
        .iter()
        .zip(&budget.pairs_per_round)
        .enumerate()
    {
        report.push(&format!("round-{}-channels", i + 1), channels);
        report.push(&format!("round-{}-epr-pairs", i + 1), pairs);
    }
    report.push("epr-pairs-total", show_pairs(budget.epr_pairs_total));
    Ok((report, 0))
}

/// Entry point used by `main`: parse, execute, write, map to exit code.
pub fn main_impl() -> ExitCode {
    let spec = RunSpec::parse();
    match execute(&spec) {
        Ok((report, code)) => {
            let rendered = report.render(spec.format.into());
            match &spec.output {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, rendered) {
                        eprintln!("i/o error: {e}");
                        return ExitCode::from(1);
                    }
                }
                None => print!("{rendered}"),
            }
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_universal_run_spec() {
        let spec = parse_args([
            "nlvsim",
            "universal",
            "--variable",
            "eq1",
            "--trials",
            "2000",
            "--seed",
            "7",
        ])
        .unwrap();
        match spec.command {
            Command::Universal {
                ref variable,
                trials,
                seed,
                max_rounds,
                eigenstate,
            } => {
                assert_eq!(variable, "eq1");
                assert_eq!(trials, 2000);
                assert_eq!(seed, 7);
                assert_eq!(max_rounds, 50);
                assert_eq!(eigenstate, None);
            }
            _ => panic!("wrong subcommand"),
        }
    }

    #[test]
    fn signaling_demo_needs_no_variable() {
        let spec = parse_args(["nlvsim", "signaling-demo"]).unwrap();
        assert!(matches!(spec.command, Command::SignalingDemo { .. }));
    }

    #[test]
    fn universal_without_variable_is_a_usage_error() {
        let err = parse_args(["nlvsim", "universal"]).unwrap_err();
        assert_ne!(err.exit_code(), 0);
    }

    #[test]
    fn unknown_flag_is_a_usage_error() {
        assert!(parse_args(["nlvsim", "resources", "--bogus"]).is_err());
    }

    #[test]
    fn signaling_demo_report_carries_the_gap() {
        let (report, code) = signaling_demo(2000, 3).unwrap();
        assert_eq!(code, 0);
        let value = |key: &str| report.get(key).unwrap().parse::<f64>().unwrap();
        assert!(value("p-noflip").abs() < 1e-10);
        assert!((value("p-flip") - 0.5).abs() < 1e-10);
        assert_eq!(report.get("mc-p-noflip"), Some("0"));
    }

    #[test]
    fn machine_reports_are_reproducible() {
        let render = || {
            let (report, _) = termination_stats(1, 1000, 1, 20).unwrap();
            report.render(OutputFormat::Machine)
        };
        assert_eq!(render(), render());
    }

    #[test]
    fn nonexistent_variable_is_a_usage_error() {
        let err = load_variable("no-such-thing").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn resources_report_matches_the_budget() {
        let (report, code) = resources(1, 4).unwrap();
        assert_eq!(code, 0);
        assert_eq!(report.get("epr-pairs-total"), Some("2895"));
        assert_eq!(report.get("round-1-channels"), Some("2"));
        assert_eq!(report.get("round-3-channels"), Some("90"));
    }
}

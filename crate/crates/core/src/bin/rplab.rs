//! Batch front end for the laboratory. Generates circuit corpora with
//! brute-forced ground truths, runs decision protocols over them with the
//! exact solver, audits sampler claims across the whole probability grid,
//! and merges the resulting report files.
//!
//! Exit codes: 0 on success, 1 when a verified property fails, 2 on usage
//! or input errors. Reports carry no timing or machine-specific data (wall
//! time goes to stderr), so the same configuration always produces the same
//! bytes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rplab::circuit::{CountingInstance, CountingMode};
use rplab::corpus::{self, CorpusEntry};
use rplab::dyadic::Dyadic;
use rplab::error::{Error, Result};
use rplab::exec::ExecCfg;
use rplab::parity::{brier_full, brier_truncated, constant_claim, parity_audit};
use rplab::protocol::{DeltaRule, InputCheck, ProtocolSpec, RewardRule, ValueRule, VerifierRule};
use rplab::protocols::{
    compare_expectations_prob, compose_with_machine, knockout_argmax, make_brier_count,
    make_pp_vote, one_bit_transform, pp_oracle_round, split_at_round, MachineStep, OracleMachine,
};
use rplab::report::{summarize, AuditFile, RunRecord, RunReport};
use rplab::solver::{solve_rational, verify_protocol};

#[derive(Parser)]
#[command(
    name = "rplab",
    version,
    about = "Exact laboratory for reward-paying interactive decision games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a protocol on every instance in a corpus and verify each
    /// rational branch against the recorded ground truth.
    Run(RunArgs),
    /// Expand a sampler's reward polynomials and audit its rational claims
    /// on every grid probability.
    AuditParity(AuditArgs),
    /// Generate a deterministic circuit corpus with brute-forced truths.
    GenCorpus(GenArgs),
    /// Merge report files into one pass/fail summary.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RunKind {
    /// One-bit majority vote on each circuit.
    PpVote,
    /// Quadratic-score count claim on each circuit.
    BrierCount,
    /// Majority vote with the reward collapsed to a single bit.
    OneBit,
    /// Acceptance-probability comparison of circuit pairs.
    CompareExp,
    /// Extra claim round over circuit pairs; rejects split decisions.
    PpOracleRound,
    /// A one-question decision machine composed with the majority vote.
    Compose,
    /// Split-consistency check of the expectation-eliciting wrapper over
    /// circuit pairs.
    Elicit,
    /// Majority vote with the optimal message re-derived by knockout
    /// tournament.
    Knockout,
}

#[derive(Clone, Copy, ValueEnum)]
enum AuditKind {
    /// Count claim scored quadratically against one sampled output bit.
    BrierCount,
    /// Degenerate sampler that always claims the same parity.
    ConstantClaim,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    /// Pretty-printed JSON with a fixed field order.
    Structured,
    /// Flat rows for plotting.
    Csv,
}

#[derive(Args)]
struct OutArgs {
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Structured)]
    format: Format,
}

#[derive(Args)]
struct RunArgs {
    /// Protocol to run.
    #[arg(long, value_enum)]
    protocol: RunKind,
    /// Corpus file: circuit texts with truth headers, separated by ---.
    #[arg(long, value_name = "PATH")]
    instances: PathBuf,
    /// Largest enumeration the solver may attempt.
    #[arg(long, default_value_t = 1u128 << 24)]
    max_enum: u128,
    /// Worker threads for enumeration.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Flip each instance's decision layer so verification must fail; a
    /// forced-failure fixture for exit-code plumbing.
    #[arg(long)]
    sabotage: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct AuditArgs {
    /// Sampler family to audit.
    #[arg(long, value_enum, default_value_t = AuditKind::BrierCount)]
    protocol: AuditKind,
    /// Grid exponent: every probability k/2^n with 0 <= k < 2^n is audited.
    #[arg(long)]
    n: u32,
    /// Claim width in bits (default: the sampler's full width).
    #[arg(long)]
    width: Option<u8>,
    /// Message budget as a fraction p/2^q of n; the claim width becomes
    /// ceil(alpha * n).
    #[arg(long, value_parser = parse_alpha, conflicts_with = "width")]
    alpha: Option<Dyadic>,
    /// Succeed when the audit finds failures instead of when it is clean.
    #[arg(long)]
    expect_failure: bool,
    /// Largest accepted grid exponent.
    #[arg(long, default_value_t = 16)]
    max_n: u32,
    /// Largest enumeration the expansion may attempt.
    #[arg(long, default_value_t = 1u128 << 24)]
    max_enum: u128,
    /// Worker threads for the grid sweep.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct GenArgs {
    /// Generator seed; the same seed yields byte-identical output.
    #[arg(long)]
    seed: u64,
    /// Number of circuits to emit.
    #[arg(long, default_value_t = 20)]
    count: usize,
    /// Smallest input count drawn.
    #[arg(long, default_value_t = 1)]
    min_n: u32,
    /// Largest input count drawn; the tie-breaking shift may add two more.
    #[arg(long = "n", default_value_t = 6)]
    max_n: u32,
    /// Largest enumeration the truth recount may attempt.
    #[arg(long, default_value_t = 1u128 << 24)]
    max_enum: u128,
    /// Worker threads for counting.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Write the corpus here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Report files to merge.
    #[arg(long, value_name = "PATH", num_args = 1.., required = true)]
    instances: Vec<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::AuditParity(args) => cmd_audit_parity(args),
        Command::GenCorpus(args) => cmd_gen_corpus(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn cmd_run(args: RunArgs) -> Result<u8> {
    let started = Instant::now();
    let cfg = exec_cfg(args.max_enum, args.workers);
    let entries = corpus::parse(&read_file(&args.instances)?)?;
    let kind = kind_name(args.protocol);
    let records = match args.protocol {
        RunKind::PpVote => per_circuit(&entries, args.sabotage, &cfg, |e, cfg| {
            Ok((vote_spec(e, cfg)?, bitstr(e.truth.majority)))
        })?,
        RunKind::BrierCount => per_circuit(&entries, args.sabotage, &cfg, |e, _| {
            let inst = CountingInstance::new(e.circuit.clone(), CountingMode::Count);
            Ok((make_brier_count(&inst)?, e.truth.count.to_string()))
        })?,
        RunKind::OneBit => per_circuit(&entries, args.sabotage, &cfg, |e, cfg| {
            Ok((one_bit_transform(&vote_spec(e, cfg)?)?, bitstr(e.truth.majority)))
        })?,
        RunKind::Compose => per_circuit(&entries, args.sabotage, &cfg, |e, cfg| {
            Ok((echo_compose(e, cfg)?, bitstr(e.truth.majority)))
        })?,
        RunKind::CompareExp => compare_records(&entries, args.sabotage, &cfg)?,
        RunKind::PpOracleRound => oracle_round_records(&entries, args.sabotage, &cfg)?,
        RunKind::Elicit => elicit_records(&entries, args.sabotage, &cfg)?,
        RunKind::Knockout => knockout_records(&entries, args.sabotage, &cfg)?,
    };
    let report = RunReport::new(kind, records);
    let rendered = match args.out.format {
        Format::Structured => report.to_json()?,
        Format::Csv => report.to_csv()?,
    };
    emit(&args.out.out, &rendered)?;
    eprintln!(
        "{kind}: {} instances in {:?}",
        report.instances.len(),
        started.elapsed()
    );
    Ok(u8::from(!report.pass))
}

fn cmd_audit_parity(args: AuditArgs) -> Result<u8> {
    let started = Instant::now();
    if args.n == 0 || args.n > args.max_n {
        return Err(Error::Report(format!(
            "grid exponent n={} is outside the bound 1..={}",
            args.n, args.max_n
        )));
    }
    let cfg = exec_cfg(args.max_enum, args.workers);
    let full = match args.protocol {
        AuditKind::BrierCount => args.n as u8 + 1,
        AuditKind::ConstantClaim => 1,
    };
    let width = match (args.width, &args.alpha) {
        (Some(w), _) => w,
        (None, Some(a)) => width_from_alpha(a, args.n)?,
        (None, None) => full,
    };
    let proto = match args.protocol {
        AuditKind::BrierCount => {
            if width > full {
                return Err(Error::Report(format!(
                    "claim width {width} exceeds the full width {full}"
                )));
            }
            if width == full {
                brier_full(args.n)?
            } else {
                brier_truncated(args.n, width)?
            }
        }
        AuditKind::ConstantClaim => constant_claim(args.n, width, false)?,
    };
    let report = parity_audit(&proto, &cfg)?;
    let file = AuditFile::new(&report, args.alpha.as_ref());
    let rendered = match args.out.format {
        Format::Structured => file.to_json()?,
        Format::Csv => file.to_csv()?,
    };
    emit(&args.out.out, &rendered)?;
    eprintln!(
        "audit-parity: {} grid points, {} failures in {:?}",
        1u64 << args.n,
        report.failures.len(),
        started.elapsed()
    );
    Ok(u8::from(!report.passes() != args.expect_failure))
}

fn cmd_gen_corpus(args: GenArgs) -> Result<u8> {
    let started = Instant::now();
    let cfg = exec_cfg(args.max_enum, args.workers);
    let entries = corpus::generate(args.seed, args.count, args.min_n, args.max_n, &cfg)?;
    // Recount every recorded truth before shipping the corpus.
    corpus::check(&entries, &cfg)?;
    let mut text = corpus::to_text(&entries);
    if !text.ends_with('\n') {
        text.push('\n');
    }
    emit(&args.out, &text)?;
    eprintln!(
        "gen-corpus: {} circuits in {:?}",
        entries.len(),
        started.elapsed()
    );
    Ok(0)
}

fn cmd_report(args: ReportArgs) -> Result<u8> {
    let started = Instant::now();
    let mut inputs = Vec::with_capacity(args.instances.len());
    for path in &args.instances {
        let text = read_file(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::Report(format!("{}: {e}", path.display())))?;
        inputs.push((path.display().to_string(), value));
    }
    let summary = summarize(&inputs)?;
    let rendered = match args.out.format {
        Format::Structured => summary.to_json()?,
        Format::Csv => summary.to_csv()?,
    };
    emit(&args.out.out, &rendered)?;
    eprintln!(
        "report: merged {} files ({}) in {:?}",
        summary.reports,
        summary.verdict,
        started.elapsed()
    );
    Ok(u8::from(!summary.all_pass()))
}

fn vote_spec(entry: &CorpusEntry, cfg: &ExecCfg) -> Result<ProtocolSpec> {
    let inst = CountingInstance::new(entry.circuit.clone(), CountingMode::Majority);
    make_pp_vote(&inst, cfg)
}

/// Solves and verifies one spec per corpus circuit.
fn per_circuit(
    entries: &[CorpusEntry],
    sabotage: bool,
    cfg: &ExecCfg,
    build: impl Fn(&CorpusEntry, &ExecCfg) -> Result<(ProtocolSpec, String)>,
) -> Result<Vec<RunRecord>> {
    entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let (mut spec, truth) = build(e, cfg)?;
            if sabotage {
                spec = sabotaged(&spec)?;
            }
            let outcome = solve_rational(&spec, "", cfg)?;
            let verify = verify_protocol(&spec, "", &truth, cfg)?;
            Ok(RunRecord::new(
                format!("instance[{i}]"),
                &spec,
                "",
                &outcome,
                &verify,
            ))
        })
        .collect()
}

/// A one-question machine that accepts exactly when the queried protocol
/// decides 1, composed with the majority vote on the entry's circuit.
fn echo_compose(entry: &CorpusEntry, cfg: &ExecCfg) -> Result<ProtocolSpec> {
    let machine = OracleMachine::new(
        1,
        Arc::new(|_: &str, answers: &[bool]| match answers.first() {
            None => MachineStep::Query("target".to_string()),
            Some(true) => MachineStep::Accept,
            Some(false) => MachineStep::Reject,
        }),
    );
    let inst = CountingInstance::new(entry.circuit.clone(), CountingMode::Majority);
    let cfg = *cfg;
    let family = move |q: &str| -> Result<ProtocolSpec> {
        if q == "target" {
            make_pp_vote(&inst, &cfg)
        } else {
            Err(Error::MalformedSpec(format!("unknown question {q:?}")))
        }
    };
    compose_with_machine(&machine, &family, "")
}

fn compare_records(
    entries: &[CorpusEntry],
    sabotage: bool,
    cfg: &ExecCfg,
) -> Result<Vec<RunRecord>> {
    if sabotage {
        return Err(Error::Report(
            "--sabotage needs a decision protocol; compare-exp computes a \
             probability directly"
                .into(),
        ));
    }
    let half = Dyadic::new(1, 1);
    paired(entries, "compare-exp")?
        .enumerate()
        .map(|(j, (a, b))| {
            let prob = compare_expectations_prob(&a.circuit, &b.circuit, cfg)?;
            let swapped = compare_expectations_prob(&b.circuit, &a.circuit, cfg)?;
            let total = &prob + &swapped;
            let decision = prob >= half;
            // Independent check against the recorded counts: E1 >= E0 after
            // clearing denominators.
            let truth = (u128::from(b.truth.count) << a.circuit.n_inputs())
                >= (u128::from(a.truth.count) << b.circuit.n_inputs());
            let mut witnesses = Vec::new();
            if total != Dyadic::one() {
                witnesses.push(format!("orderings sum to {total} instead of 1"));
            }
            if decision != truth {
                witnesses.push(format!(
                    "acceptance probability {prob} contradicts the recorded counts"
                ));
            }
            let gap = &prob - &half;
            let gap = if gap.is_negative() { -&gap } else { gap };
            Ok(RunRecord {
                instance: format!("pair[{j}]"),
                protocol: "compare-exp".to_string(),
                truth: bitstr(truth),
                pass: witnesses.is_empty(),
                root_value: prob.to_string(),
                argmax: Vec::new(),
                decisions: vec![bitstr(decision)],
                delta_exact: gap.to_string(),
                delta_declared: None,
                node_count: 0,
                branches: 2,
                witnesses,
            })
        })
        .collect()
}

fn oracle_round_records(
    entries: &[CorpusEntry],
    sabotage: bool,
    cfg: &ExecCfg,
) -> Result<Vec<RunRecord>> {
    paired(entries, "pp-oracle-round")?
        .enumerate()
        .map(|(j, (a, b))| {
            let mut spec = pp_oracle_round(&[vote_spec(a, cfg)?, vote_spec(b, cfg)?], cfg)?;
            if sabotage {
                spec = sabotaged(&spec)?;
            }
            // Construction rejects split decisions, so the pair agrees.
            let truth = bitstr(a.truth.majority);
            let outcome = solve_rational(&spec, "", cfg)?;
            let verify = verify_protocol(&spec, "", &truth, cfg)?;
            Ok(RunRecord::new(
                format!("pair[{j}]"),
                &spec,
                "",
                &outcome,
                &verify,
            ))
        })
        .collect()
}

fn elicit_records(
    entries: &[CorpusEntry],
    sabotage: bool,
    cfg: &ExecCfg,
) -> Result<Vec<RunRecord>> {
    if sabotage {
        return Err(Error::Report(
            "--sabotage needs a decision protocol; elicit checks a split identity".into(),
        ));
    }
    paired(entries, "elicit")?
        .enumerate()
        .map(|(j, (a, b))| {
            let base = pp_oracle_round(&[vote_spec(a, cfg)?, vote_spec(b, cfg)?], cfg)?;
            let outcome = solve_rational(&base, "", cfg)?;
            let split = split_at_round(&base, "", 1, cfg)?;
            Ok(RunRecord {
                instance: format!("pair[{j}]"),
                protocol: format!("elicit-split({})", base.name()),
                truth: split.truncated_root.to_string(),
                pass: split.pass,
                root_value: split.full_root.to_string(),
                argmax: outcome.root_argmax.iter().map(|m| m.to_string()).collect(),
                decisions: Vec::new(),
                delta_exact: outcome.delta().render(),
                delta_declared: base.declared_delta("").map(|d| d.to_string()),
                node_count: outcome.node_count,
                branches: split.compared_nodes,
                witnesses: split.notes.clone(),
            })
        })
        .collect()
}

fn knockout_records(
    entries: &[CorpusEntry],
    sabotage: bool,
    cfg: &ExecCfg,
) -> Result<Vec<RunRecord>> {
    entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mut spec = vote_spec(e, cfg)?;
            if sabotage {
                spec = sabotaged(&spec)?;
            }
            let outcome = solve_rational(&spec, "", cfg)?;
            let verify = verify_protocol(&spec, "", &bitstr(e.truth.majority), cfg)?;
            let winner = knockout_argmax(&spec, "", cfg)?;
            let mut record = RunRecord::new(format!("instance[{i}]"), &spec, "", &outcome, &verify);
            if !outcome.root_argmax.contains(&winner) {
                record.pass = false;
                record
                    .witnesses
                    .push(format!("knockout winner {winner} is not a maximizer"));
            }
            Ok(record)
        })
        .collect()
}

/// Replaces the decision layer with its negation while forwarding the
/// verifier, reward, gap declaration, and input check untouched. Solving is
/// unaffected; verification must fail.
fn sabotaged(spec: &ProtocolSpec) -> Result<ProtocolSpec> {
    let fwd = spec.clone();
    let verifier: VerifierRule = Arc::new(move |input, ms, rs| fwd.verifier_msg(input, ms, rs));
    let fwd = spec.clone();
    let reward: RewardRule = Arc::new(move |input, ms, rs| fwd.reward(input, ms, rs));
    let fwd = spec.clone();
    let value: ValueRule = Arc::new(move |input, ms, vs| match fwd.value(input, ms, vs).as_str() {
        "0" => "1".to_string(),
        "1" => "0".to_string(),
        other => format!("not {other}"),
    });
    let mut out = ProtocolSpec::new(
        format!("sabotaged({})", spec.name()),
        spec.msg_bits().to_vec(),
        spec.rand_bits().to_vec(),
        verifier,
        reward,
        value,
    )?
    .with_nesting_depth(spec.nesting_depth());
    if let Some(res) = spec.reward_resolution_bits() {
        out = out.with_resolution_bits(res);
    }
    if spec.has_declared_delta() {
        let fwd = spec.clone();
        let rule: DeltaRule =
            Arc::new(move |input| fwd.declared_delta(input).expect("declaration present"));
        out = out.with_declared_delta(rule);
    }
    let fwd = spec.clone();
    let check: InputCheck = Arc::new(move |input| fwd.check_input(input));
    Ok(out.with_input_check(check))
}

/// Views the corpus as consecutive pairs; pair modes need an even count.
fn paired<'a>(
    entries: &'a [CorpusEntry],
    kind: &str,
) -> Result<impl Iterator<Item = (&'a CorpusEntry, &'a CorpusEntry)>> {
    if entries.is_empty() || entries.len() % 2 != 0 {
        return Err(Error::Report(format!(
            "{kind} consumes circuit pairs; the corpus holds {} instances",
            entries.len()
        )));
    }
    Ok(entries.chunks(2).map(|pair| (&pair[0], &pair[1])))
}

fn kind_name(kind: RunKind) -> &'static str {
    match kind {
        RunKind::PpVote => "pp-vote",
        RunKind::BrierCount => "brier-count",
        RunKind::OneBit => "one-bit",
        RunKind::CompareExp => "compare-exp",
        RunKind::PpOracleRound => "pp-oracle-round",
        RunKind::Compose => "compose",
        RunKind::Elicit => "elicit",
        RunKind::Knockout => "knockout",
    }
}

fn bitstr(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

fn exec_cfg(max_enum: u128, workers: usize) -> ExecCfg {
    ExecCfg {
        bound: max_enum,
        workers: workers.max(1),
    }
}

fn parse_alpha(s: &str) -> std::result::Result<Dyadic, String> {
    let d: Dyadic = s.parse().map_err(|e| format!("{e}"))?;
    if d.is_negative() || !d.in_unit_interval() {
        return Err(format!("budget fraction {d} is outside [0, 1]"));
    }
    Ok(d)
}

/// ceil(alpha * n) in exact arithmetic.
fn width_from_alpha(alpha: &Dyadic, n: u32) -> Result<u8> {
    let p: u64 = alpha
        .numerator()
        .try_into()
        .map_err(|_| Error::Report(format!("budget fraction {alpha} is too fine a grid")))?;
    let q = alpha.exponent();
    if q >= 64 {
        return Err(Error::Report(format!(
            "budget fraction {alpha} is too fine a grid"
        )));
    }
    let w = (u128::from(p) * u128::from(n) + ((1u128 << q) - 1)) >> q;
    u8::try_from(w).map_err(|_| Error::Report(format!("derived claim width {w} does not fit")))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Report(format!("{}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Error::Report(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_fractions_round_up_to_claim_widths() {
        let half = parse_alpha("1/2^1").unwrap();
        assert_eq!(width_from_alpha(&half, 8).unwrap(), 4);
        assert_eq!(width_from_alpha(&half, 7).unwrap(), 4);
        let third_ish = parse_alpha("3/2^3").unwrap();
        assert_eq!(width_from_alpha(&third_ish, 8).unwrap(), 3);
        assert_eq!(width_from_alpha(&parse_alpha("1").unwrap(), 5).unwrap(), 5);
        assert_eq!(width_from_alpha(&parse_alpha("0").unwrap(), 5).unwrap(), 0);
    }

    #[test]
    fn out_of_range_fractions_are_rejected() {
        assert!(parse_alpha("3/2^1").is_err());
        assert!(parse_alpha("-1/2^1").is_err());
        assert!(parse_alpha("junk").is_err());
    }
}

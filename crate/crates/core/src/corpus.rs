//! Deterministic circuit corpora. A corpus file is a sequence of blocks
//! separated by `---` lines; each block is a `truth:` header recording the
//! brute-force ground truth followed by one circuit in canonical text:
//!
//! ```text
//! truth: count=3 majority=1 parity=1
//! inputs 2
//! g1 = OR x1 x2
//! output g1
//! ---
//! ...
//! ```
//!
//! Generation is seeded and byte-reproducible. Circuits whose accepting
//! count lands exactly on half of all assignments are replaced by a
//! two-extra-input shift that preserves the decision semantics while making
//! the accepting count odd, so majority instances never tie.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{BooleanCircuit, Gate, GateKind, Operand};
use crate::error::{Error, Result};
use crate::exec::ExecCfg;

/// Brute-force ground truth of one circuit: the accepting-assignment count
/// and the two decision bits derived from it.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct TruthRecord {
    pub count: u64,
    pub majority: bool,
    pub parity: bool,
}

impl fmt::Display for TruthRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "truth: count={} majority={} parity={}",
            self.count,
            u8::from(self.majority),
            u8::from(self.parity)
        )
    }
}

/// One corpus instance: a circuit and its recorded ground truth.
#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub circuit: BooleanCircuit,
    pub truth: TruthRecord,
}

/// Counts accepting assignments and derives both decision bits. Errors on
/// an exact majority tie; corpus construction removes ties before stamping.
pub fn measure(circuit: &BooleanCircuit, cfg: &ExecCfg) -> Result<TruthRecord> {
    let count = circuit.count_accepting(cfg)?;
    let half = 1u64 << (circuit.n_inputs().saturating_sub(1));
    if circuit.n_inputs() > 0 && count == half {
        return Err(Error::TieNotAllowed);
    }
    Ok(TruthRecord {
        count,
        majority: 2 * count > 1 << circuit.n_inputs(),
        parity: count & 1 == 1,
    })
}

/// The tie-removing shift: two fresh inputs `u, v` are prepended and the
/// circuit becomes
///
/// ```text
///     (u AND old) OR (NOT u AND v) OR (NOT u AND NOT v AND all-zero)
/// ```
///
/// which accepts `2k + 2^n + 1` of the `2^(n+2)` assignments: an odd count,
/// so it can never equal half. A count of exactly half maps to a strict
/// majority of ones.
pub fn tie_shift(circuit: &BooleanCircuit) -> Result<BooleanCircuit> {
    let n = circuit.n_inputs();
    if n == 0 {
        return Err(Error::MalformedSpec(
            "the tie shift needs at least one original input".into(),
        ));
    }
    let mut gates: Vec<Gate> = circuit
        .gates()
        .iter()
        .map(|g| Gate {
            id: g.id,
            kind: g.kind,
            args: g
                .args
                .iter()
                .map(|a| match *a {
                    Operand::Input(i) => Operand::Input(i + 2),
                    gate => gate,
                })
                .collect(),
        })
        .collect();
    let mut next = gates.last().map_or(0, |g| g.id) + 1;
    let mut push = |gates: &mut Vec<Gate>, kind, args| {
        let id = next;
        gates.push(Gate { id, kind, args });
        next += 1;
        id
    };

    // all-zero over the shifted original inputs
    let mut all_zero = None;
    for i in 0..n {
        let inverted = push(&mut gates, GateKind::Not, vec![Operand::Input(i + 2)]);
        all_zero = Some(match all_zero {
            None => inverted,
            Some(acc) => push(
                &mut gates,
                GateKind::And,
                vec![Operand::Gate(acc), Operand::Gate(inverted)],
            ),
        });
    }
    let all_zero = all_zero.expect("circuits have at least one input");

    let u = Operand::Input(0);
    let v = Operand::Input(1);
    let keep = push(&mut gates, GateKind::And, vec![u, Operand::Gate(circuit.output())]);
    let not_u = push(&mut gates, GateKind::Not, vec![u]);
    let take_v = push(&mut gates, GateKind::And, vec![Operand::Gate(not_u), v]);
    let not_v = push(&mut gates, GateKind::Not, vec![v]);
    let neither = push(
        &mut gates,
        GateKind::And,
        vec![Operand::Gate(not_u), Operand::Gate(not_v)],
    );
    let zero_branch = push(
        &mut gates,
        GateKind::And,
        vec![Operand::Gate(neither), Operand::Gate(all_zero)],
    );
    let either = push(
        &mut gates,
        GateKind::Or,
        vec![Operand::Gate(keep), Operand::Gate(take_v)],
    );
    let out = push(
        &mut gates,
        GateKind::Or,
        vec![Operand::Gate(either), Operand::Gate(zero_branch)],
    );
    BooleanCircuit::new(n + 2, gates, out)
}

/// Deterministically generates `instances` random circuits with input
/// counts in `min_inputs..=max_inputs`, stamping each with its brute-force
/// truth. Ties are shifted away, which adds two inputs to the affected
/// instances.
pub fn generate(
    seed: u64,
    instances: usize,
    min_inputs: u32,
    max_inputs: u32,
    cfg: &ExecCfg,
) -> Result<Vec<CorpusEntry>> {
    if min_inputs == 0 || min_inputs > max_inputs || max_inputs > 61 {
        return Err(Error::MalformedSpec(format!(
            "input range {min_inputs}..={max_inputs} is not usable"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(instances);
    for _ in 0..instances {
        let n = rng.gen_range(min_inputs..=max_inputs);
        let gate_count = rng.gen_range(1..=2 * n as usize + 2);
        let mut gates = Vec::with_capacity(gate_count);
        for id in 1..=gate_count as u32 {
            let kind = match rng.gen_range(0..4) {
                0 => GateKind::And,
                1 => GateKind::Or,
                2 => GateKind::Xor,
                _ => GateKind::Not,
            };
            let pick = |rng: &mut ChaCha8Rng| {
                let choices = n + id - 1;
                let roll = rng.gen_range(0..choices);
                if roll < n {
                    Operand::Input(roll)
                } else {
                    Operand::Gate(roll - n + 1)
                }
            };
            let args = (0..kind.arity()).map(|_| pick(&mut rng)).collect();
            gates.push(Gate { id, kind, args });
        }
        let output = gate_count as u32;
        let mut circuit = BooleanCircuit::new(n, gates, output)?;
        let count = circuit.count_accepting(cfg)?;
        if count == 1 << (n - 1) {
            circuit = tie_shift(&circuit)?;
        }
        entries.push(CorpusEntry {
            truth: measure(&circuit, cfg)?,
            circuit,
        });
    }
    Ok(entries)
}

/// Renders a corpus in the block format, byte-stable for a given entry
/// list.
pub fn to_text(entries: &[CorpusEntry]) -> String {
    let mut out = String::new();
    for (i, entry) in entries.iter().enumerate() {
        if i > 0 {
            out.push_str("---\n");
        }
        out.push_str(&entry.truth.to_string());
        out.push('\n');
        out.push_str(&entry.circuit.canonical_text());
    }
    out
}

fn parse_truth(line: &str, line_no: usize) -> Result<TruthRecord> {
    let err = |msg: String| Error::CorpusFormat { line: line_no, msg };
    let rest = line
        .strip_prefix("truth:")
        .ok_or_else(|| err("expected a `truth:` header".to_string()))?;
    let mut count = None;
    let mut majority = None;
    let mut parity = None;
    for field in rest.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| err(format!("bad truth field {field:?}")))?;
        match key {
            "count" => {
                count = Some(value.parse::<u64>().map_err(|e| err(format!("count: {e}")))?)
            }
            "majority" | "parity" => {
                let bit = match value {
                    "0" => false,
                    "1" => true,
                    _ => return Err(err(format!("{key} must be 0 or 1, got {value:?}"))),
                };
                if key == "majority" {
                    majority = Some(bit);
                } else {
                    parity = Some(bit);
                }
            }
            _ => return Err(err(format!("unknown truth field {key:?}"))),
        }
    }
    match (count, majority, parity) {
        (Some(count), Some(majority), Some(parity)) => Ok(TruthRecord {
            count,
            majority,
            parity,
        }),
        _ => Err(err("truth header needs count, majority and parity".to_string())),
    }
}

/// Parses the block format. Purely syntactic: recorded truths are taken at
/// face value here and revalidated by [`check`].
pub fn parse(text: &str) -> Result<Vec<CorpusEntry>> {
    let mut entries = Vec::new();
    let mut truth: Option<TruthRecord> = None;
    let mut circuit_lines: Vec<&str> = Vec::new();
    let mut block_start = 0usize;

    let flush = |truth: &mut Option<TruthRecord>,
                     lines: &mut Vec<&str>,
                     entries: &mut Vec<CorpusEntry>,
                     at_line: usize|
     -> Result<()> {
        match truth.take() {
            None if lines.is_empty() => Ok(()),
            None => Err(Error::CorpusFormat {
                line: at_line,
                msg: "block is missing its `truth:` header".to_string(),
            }),
            Some(t) => {
                let circuit: BooleanCircuit = lines.join("\n").parse()?;
                lines.clear();
                entries.push(CorpusEntry { circuit, truth: t });
                Ok(())
            }
        }
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line == "---" {
            flush(&mut truth, &mut circuit_lines, &mut entries, block_start)?;
            continue;
        }
        if truth.is_none() && circuit_lines.is_empty() {
            if line.is_empty() {
                continue;
            }
            block_start = line_no;
            truth = Some(parse_truth(line, line_no)?);
        } else if !line.is_empty() || !circuit_lines.is_empty() {
            circuit_lines.push(raw);
        }
    }
    flush(&mut truth, &mut circuit_lines, &mut entries, block_start)?;
    if entries.is_empty() {
        return Err(Error::CorpusFormat {
            line: 0,
            msg: "corpus contains no instances".to_string(),
        });
    }
    Ok(entries)
}

/// Recomputes every recorded truth by brute force and rejects the corpus on
/// the first disagreement.
pub fn check(entries: &[CorpusEntry], cfg: &ExecCfg) -> Result<()> {
    for (index, entry) in entries.iter().enumerate() {
        let fresh = measure(&entry.circuit, cfg).map_err(|e| match e {
            Error::TieNotAllowed => Error::TruthMismatch {
                index,
                msg: "majority is recorded but the circuit ties".to_string(),
            },
            other => other,
        })?;
        if fresh != entry.truth {
            return Err(Error::TruthMismatch {
                index,
                msg: format!("recorded `{}`, recounted `{}`", entry.truth, fresh),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ExecCfg {
        ExecCfg::default()
    }

    #[test]
    fn generation_is_byte_reproducible() {
        let a = generate(7, 20, 2, 6, &cfg()).unwrap();
        let b = generate(7, 20, 2, 6, &cfg()).unwrap();
        assert_eq!(to_text(&a), to_text(&b));
        let c = generate(8, 20, 2, 6, &cfg()).unwrap();
        assert_ne!(to_text(&a), to_text(&c), "different seeds diverge");
    }

    #[test]
    fn no_generated_instance_ties() {
        for seed in 0..6 {
            for entry in generate(seed, 25, 1, 5, &cfg()).unwrap() {
                let n = entry.circuit.n_inputs();
                assert_ne!(entry.truth.count, 1 << (n - 1), "seed {seed}");
            }
        }
    }

    #[test]
    fn recorded_truths_match_an_independent_recount() {
        let entries = generate(11, 30, 1, 6, &cfg()).unwrap();
        check(&entries, &cfg()).unwrap();
        // Recount by direct evaluation, not through count_accepting.
        for entry in &entries {
            let eval = entry.circuit.evaluator();
            let mut scratch = Vec::new();
            let mut count = 0u64;
            for assignment in 0..1u64 << entry.circuit.n_inputs() {
                if eval.eval(assignment, &mut scratch) {
                    count += 1;
                }
            }
            assert_eq!(count, entry.truth.count);
            assert_eq!(count & 1 == 1, entry.truth.parity);
            assert_eq!(
                2 * count > 1 << entry.circuit.n_inputs(),
                entry.truth.majority
            );
        }
    }

    #[test]
    fn the_shift_adds_the_expected_count_and_breaks_the_tie() {
        // x1 alone accepts exactly half of the 2 assignments.
        let tied: BooleanCircuit = "inputs 1\ng1 = OR x1 x1\noutput g1".parse().unwrap();
        assert_eq!(tied.count_accepting(&cfg()).unwrap(), 1);
        let shifted = tie_shift(&tied).unwrap();
        assert_eq!(shifted.n_inputs(), 3);
        // 2k + 2^n + 1 with k = 1, n = 1.
        assert_eq!(shifted.count_accepting(&cfg()).unwrap(), 5);
        let truth = measure(&shifted, &cfg()).unwrap();
        assert!(truth.majority, "half maps to a strict majority of ones");
        assert!(truth.parity);

        // The same arithmetic holds for a non-tied circuit.
        let or2: BooleanCircuit = "inputs 2\ng1 = OR x1 x2\noutput g1".parse().unwrap();
        let shifted = tie_shift(&or2).unwrap();
        assert_eq!(shifted.count_accepting(&cfg()).unwrap(), 2 * 3 + 4 + 1);
    }

    #[test]
    fn the_block_format_round_trips() {
        let entries = generate(3, 12, 1, 5, &cfg()).unwrap();
        let text = to_text(&entries);
        let parsed = parse(&text).unwrap();
        assert_eq!(parsed.len(), entries.len());
        for (a, b) in entries.iter().zip(&parsed) {
            assert_eq!(a.truth, b.truth);
            assert_eq!(a.circuit, b.circuit);
        }
        assert_eq!(to_text(&parsed), text, "render is stable");
        // A trailing separator is tolerated.
        let padded = format!("{text}---\n");
        assert_eq!(parse(&padded).unwrap().len(), entries.len());
    }

    #[test]
    fn malformed_corpora_are_rejected_with_line_numbers() {
        let missing_header = "inputs 1\ng1 = NOT x1\noutput g1";
        assert!(matches!(
            parse(missing_header),
            Err(Error::CorpusFormat { .. })
        ));
        let bad_bit = "truth: count=1 majority=2 parity=1\ninputs 1\ng1 = NOT x1\noutput g1";
        match parse(bad_bit) {
            Err(Error::CorpusFormat { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected a corpus format error, got {other:?}"),
        }
        assert!(matches!(parse("\n\n"), Err(Error::CorpusFormat { .. })));
    }

    #[test]
    fn tampered_truths_are_caught() {
        let mut entries = generate(5, 4, 1, 4, &cfg()).unwrap();
        entries[2].truth.count ^= 1;
        match check(&entries, &cfg()) {
            Err(Error::TruthMismatch { index, .. }) => assert_eq!(index, 2),
            other => panic!("expected a truth mismatch, got {other:?}"),
        }
    }
}

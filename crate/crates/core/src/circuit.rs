//! Boolean circuits over a fixed input width, used as the instance language
//! for counting problems. The text format is line based:
//!
//! ```text
//! inputs 3            # input width
//! g1 = AND x1 x2      # gates in strictly increasing id order
//! g2 = OR g1 x3       # operands name inputs (1-based) or earlier gates
//! output g2           # final line names the output gate
//! ```
//!
//! `AND`, `OR`, `XOR` are binary, `NOT` is unary, `CONST0` and `CONST1` take
//! no operands. `#` starts a comment. Canonical serialization lists gates in
//! id order with single spaces, so parse followed by serialize is idempotent.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_chunks, ExecCfg};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GateKind {
    And,
    Or,
    Not,
    Xor,
    Const0,
    Const1,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::And | GateKind::Or | GateKind::Xor => 2,
            GateKind::Not => 1,
            GateKind::Const0 | GateKind::Const1 => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Or => "OR",
            GateKind::Not => "NOT",
            GateKind::Xor => "XOR",
            GateKind::Const0 => "CONST0",
            GateKind::Const1 => "CONST1",
        }
    }

    fn parse(token: &str) -> Option<Self> {
        Some(match token {
            "AND" => GateKind::And,
            "OR" => GateKind::Or,
            "NOT" => GateKind::Not,
            "XOR" => GateKind::Xor,
            "CONST0" => GateKind::Const0,
            "CONST1" => GateKind::Const1,
            _ => return None,
        })
    }
}

/// A gate operand: either a circuit input (0-based index, rendered 1-based)
/// or an earlier gate named by id.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Operand {
    Input(u32),
    Gate(u32),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Input(i) => write!(f, "x{}", i + 1),
            Operand::Gate(id) => write!(f, "g{id}"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Gate {
    pub id: u32,
    pub kind: GateKind,
    pub args: Vec<Operand>,
}

/// A boolean circuit in topological order with a single output gate.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BooleanCircuit {
    n_inputs: u32,
    gates: Vec<Gate>,
    output: u32,
}

impl BooleanCircuit {
    /// Validates and builds a circuit. Gate ids must be strictly increasing
    /// and operands may only name inputs or gates defined earlier.
    pub fn new(n_inputs: u32, gates: Vec<Gate>, output: u32) -> Result<Self> {
        let c = BooleanCircuit {
            n_inputs,
            gates,
            output,
        };
        c.validate().map_err(|msg| Error::CircuitParse { line: 0, msg })?;
        Ok(c)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let mut prev_id: Option<u32> = None;
        for gate in &self.gates {
            if prev_id.is_some_and(|p| gate.id <= p) {
                return Err(format!("gate ids must be strictly increasing at g{}", gate.id));
            }
            if gate.args.len() != gate.kind.arity() {
                return Err(format!(
                    "{} takes {} operand(s), g{} has {}",
                    gate.kind.name(),
                    gate.kind.arity(),
                    gate.id,
                    gate.args.len()
                ));
            }
            for arg in &gate.args {
                match *arg {
                    Operand::Input(i) if i >= self.n_inputs => {
                        return Err(format!("g{} references input x{} of {}", gate.id, i + 1, self.n_inputs));
                    }
                    Operand::Gate(id) if !self.gates.iter().take_while(|g| g.id < gate.id).any(|g| g.id == id) => {
                        return Err(format!("g{} references undefined or later gate g{id}", gate.id));
                    }
                    _ => {}
                }
            }
            prev_id = Some(gate.id);
        }
        if self.gates.is_empty() {
            return Err("circuit has no gates".to_string());
        }
        if !self.gates.iter().any(|g| g.id == self.output) {
            return Err(format!("output references undefined gate g{}", self.output));
        }
        Ok(())
    }

    pub fn n_inputs(&self) -> u32 {
        self.n_inputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn output(&self) -> u32 {
        self.output
    }

    /// Canonical text form: gates in id order, single spaces, no comments.
    pub fn canonical_text(&self) -> String {
        let mut out = format!("inputs {}\n", self.n_inputs);
        for gate in &self.gates {
            out.push_str(&format!("g{} = {}", gate.id, gate.kind.name()));
            for arg in &gate.args {
                out.push_str(&format!(" {arg}"));
            }
            out.push('\n');
        }
        out.push_str(&format!("output g{}\n", self.output));
        out
    }

    /// Prepares the fast evaluator (operands resolved to dense positions).
    pub fn evaluator(&self) -> Evaluator {
        let pos_of = |id: u32| self.gates.binary_search_by_key(&id, |g| g.id).unwrap();
        let steps = self
            .gates
            .iter()
            .map(|gate| {
                let mut args = [Slot::Unused; 2];
                for (slot, arg) in args.iter_mut().zip(&gate.args) {
                    *slot = match *arg {
                        Operand::Input(i) => Slot::Input(i),
                        Operand::Gate(id) => Slot::Gate(pos_of(id)),
                    };
                }
                (gate.kind, args)
            })
            .collect();
        Evaluator {
            steps,
            out_pos: pos_of(self.output),
            n_inputs: self.n_inputs,
        }
    }

    /// Evaluates the circuit on one assignment; bit `i` of `assignment` is
    /// input `x(i+1)`.
    pub fn eval(&self, assignment: u64) -> bool {
        let mut scratch = Vec::new();
        self.evaluator().eval(assignment, &mut scratch)
    }

    /// Counts accepting assignments by exhaustive enumeration, split across
    /// workers in contiguous chunks so the result is worker-independent.
    pub fn count_accepting(&self, cfg: &ExecCfg) -> Result<u64> {
        if self.n_inputs > 63 {
            return Err(Error::WidthOverflow {
                bits: self.n_inputs,
            });
        }
        let total = 1u64 << self.n_inputs;
        cfg.check(total as u128)?;
        let counts = map_chunks(total, cfg.workers, |range| {
            let ev = self.evaluator();
            let mut scratch = Vec::new();
            range.filter(|&a| ev.eval(a, &mut scratch)).count() as u64
        });
        Ok(counts.into_iter().sum())
    }
}

#[derive(Clone, Copy)]
enum Slot {
    Input(u32),
    Gate(usize),
    Unused,
}

/// Resolved form of a circuit for tight evaluation loops.
pub struct Evaluator {
    steps: Vec<(GateKind, [Slot; 2])>,
    out_pos: usize,
    n_inputs: u32,
}

impl Evaluator {
    pub fn eval(&self, assignment: u64, scratch: &mut Vec<bool>) -> bool {
        debug_assert!(self.n_inputs as usize <= 64);
        scratch.clear();
        scratch.reserve(self.steps.len());
        for (kind, args) in &self.steps {
            let read = |slot: &Slot, scratch: &Vec<bool>| match *slot {
                Slot::Input(i) => (assignment >> i) & 1 == 1,
                Slot::Gate(pos) => scratch[pos],
                Slot::Unused => false,
            };
            let v = match kind {
                GateKind::And => read(&args[0], scratch) & read(&args[1], scratch),
                GateKind::Or => read(&args[0], scratch) | read(&args[1], scratch),
                GateKind::Xor => read(&args[0], scratch) ^ read(&args[1], scratch),
                GateKind::Not => !read(&args[0], scratch),
                GateKind::Const0 => false,
                GateKind::Const1 => true,
            };
            scratch.push(v);
        }
        scratch[self.out_pos]
    }
}

impl FromStr for BooleanCircuit {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::CircuitParse { line, msg };
        let mut n_inputs: Option<u32> = None;
        let mut gates: Vec<Gate> = Vec::new();
        let mut output: Option<u32> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if output.is_some() {
                return Err(err(line_no, "content after the output line".to_string()));
            }
            match tokens[0] {
                "inputs" => {
                    if n_inputs.is_some() {
                        return Err(err(line_no, "duplicate inputs line".to_string()));
                    }
                    if tokens.len() != 2 {
                        return Err(err(line_no, "expected `inputs N`".to_string()));
                    }
                    let n = tokens[1]
                        .parse::<u32>()
                        .map_err(|_| err(line_no, format!("bad input count {:?}", tokens[1])))?;
                    n_inputs = Some(n);
                }
                "output" => {
                    if n_inputs.is_none() {
                        return Err(err(line_no, "output before inputs line".to_string()));
                    }
                    if tokens.len() != 2 {
                        return Err(err(line_no, "expected `output gID`".to_string()));
                    }
                    let id = parse_gate_id(tokens[1])
                        .ok_or_else(|| err(line_no, format!("bad output reference {:?}", tokens[1])))?;
                    output = Some(id);
                }
                first => {
                    let Some(n) = n_inputs else {
                        return Err(err(line_no, "gate before inputs line".to_string()));
                    };
                    let id = parse_gate_id(first)
                        .ok_or_else(|| err(line_no, format!("expected a gate id, got {first:?}")))?;
                    if tokens.len() < 3 || tokens[1] != "=" {
                        return Err(err(line_no, "expected `gID = KIND operands...`".to_string()));
                    }
                    let kind = GateKind::parse(tokens[2])
                        .ok_or_else(|| err(line_no, format!("unknown gate kind {:?}", tokens[2])))?;
                    let args = tokens[3..]
                        .iter()
                        .map(|t| parse_operand(t, n).ok_or_else(|| err(line_no, format!("bad operand {t:?}"))))
                        .collect::<Result<Vec<_>>>()?;
                    if args.len() != kind.arity() {
                        return Err(err(
                            line_no,
                            format!("{} takes {} operand(s), got {}", kind.name(), kind.arity(), args.len()),
                        ));
                    }
                    if gates.last().is_some_and(|g| g.id >= id) {
                        return Err(err(line_no, format!("gate ids must be strictly increasing at g{id}")));
                    }
                    for arg in &args {
                        if let Operand::Gate(rid) = arg {
                            if !gates.iter().any(|g| g.id == *rid) {
                                return Err(err(line_no, format!("g{id} references undefined gate g{rid}")));
                            }
                        }
                    }
                    gates.push(Gate { id, kind, args });
                }
            }
        }

        let n = n_inputs.ok_or_else(|| err(0, "missing inputs line".to_string()))?;
        let out = output.ok_or_else(|| err(0, "missing output line".to_string()))?;
        BooleanCircuit::new(n, gates, out)
    }
}

fn parse_gate_id(token: &str) -> Option<u32> {
    let digits = token.strip_prefix('g')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn parse_operand(token: &str, n_inputs: u32) -> Option<Operand> {
    if let Some(digits) = token.strip_prefix('x') {
        let i: u32 = digits.parse().ok()?;
        if i == 0 || i > n_inputs {
            return None;
        }
        Some(Operand::Input(i - 1))
    } else {
        parse_gate_id(token).map(Operand::Gate)
    }
}

/// What a counting instance asks about the accepting-assignment count.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountingMode {
    Majority,
    Parity,
    Count,
}

impl fmt::Display for CountingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CountingMode::Majority => "majority",
            CountingMode::Parity => "parity",
            CountingMode::Count => "count",
        })
    }
}

impl FromStr for CountingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "majority" => Ok(CountingMode::Majority),
            "parity" => Ok(CountingMode::Parity),
            "count" => Ok(CountingMode::Count),
            other => Err(Error::Report(format!("unknown counting mode {other:?}"))),
        }
    }
}

/// A circuit together with the question asked of it.
#[derive(Clone, Debug)]
pub struct CountingInstance {
    pub circuit: BooleanCircuit,
    pub mode: CountingMode,
}

impl CountingInstance {
    pub fn new(circuit: BooleanCircuit, mode: CountingMode) -> Self {
        CountingInstance { circuit, mode }
    }

    /// The ground-truth answer: the majority bit (ties are an error, the
    /// strict-majority convention), the parity bit, or the raw count.
    pub fn membership(&self, cfg: &ExecCfg) -> Result<u64> {
        let count = self.circuit.count_accepting(cfg)?;
        match self.mode {
            CountingMode::Majority => {
                let half = 1u64 << (self.circuit.n_inputs().saturating_sub(1));
                if self.circuit.n_inputs() > 0 && count == half {
                    return Err(Error::TieNotAllowed);
                }
                Ok(u64::from(count > half || (self.circuit.n_inputs() == 0 && count == 1)))
            }
            CountingMode::Parity => Ok(count & 1),
            CountingMode::Count => Ok(count),
        }
    }
}

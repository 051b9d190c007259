//! Composition with a bounded-query decision machine. A deterministic
//! machine asks up to `L` yes/no questions, each answered by running a
//! reward-gapped sub-protocol on the question string, and then accepts or
//! rejects. The composed protocol runs all answered sub-protocols in
//! parallel lanes: the first message claims the query count, the answer
//! bits, and lane one's first sub-message; later rounds carry one
//! sub-message per lane; each draw carries one randomness slice per lane.
//!
//! The reward geometrically discounts the lanes,
//!
//! ```text
//!     sum over j of delta^j * R_{j+1} / 2^{j+1}  +  delta^l / 2^{l+1},
//! ```
//!
//! so overstating an answer can win at most the tail of the series while it
//! forfeits at least one sub-protocol's gap earlier in the series. A
//! transcript that deviates in a recognizable way pays zero outright: a
//! claimed query count that disagrees with rerunning the machine on the
//! claimed answers, nonzero bits in unused answer positions or inactive
//! lanes, a lane message too wide for its sub-protocol, or an answer bit
//! that contradicts the claim its own lane's transcript settles on.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::protocol::{
    BitString, InputCheck, ProtocolSpec, RewardRule, ValueRule, VerifierRule,
};

/// One move of the decision machine, given the input and the answers
/// received so far.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MachineStep {
    /// Ask this question next.
    Query(String),
    Accept,
    Reject,
}

/// What a complete machine run did: the questions it asked, in order, and
/// its verdict.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MachineRun {
    pub queries: Vec<String>,
    pub verdict: bool,
}

type MachineProgram = Arc<dyn Fn(&str, &[bool]) -> MachineStep + Send + Sync>;

/// A deterministic oracle machine: `program(input, answers)` must always
/// return the same step for the same arguments, and must reach a verdict
/// within `query_bound` questions on every answer sequence.
#[derive(Clone)]
pub struct OracleMachine {
    query_bound: usize,
    program: MachineProgram,
}

impl OracleMachine {
    pub fn new(query_bound: usize, program: MachineProgram) -> Self {
        OracleMachine { query_bound, program }
    }

    pub fn query_bound(&self) -> usize {
        self.query_bound
    }

    /// Runs the machine, feeding it `answers` one per question. Errors if
    /// it asks for an answer that was not supplied.
    pub fn run(&self, input: &str, answers: &[bool]) -> Result<MachineRun> {
        let mut queries = Vec::new();
        loop {
            match (self.program)(input, &answers[..queries.len()]) {
                MachineStep::Query(q) => {
                    if queries.len() == answers.len() {
                        return Err(Error::MalformedSpec(format!(
                            "the machine asked {:?} but only {} answers were supplied",
                            q,
                            answers.len()
                        )));
                    }
                    queries.push(q);
                }
                MachineStep::Accept => return Ok(MachineRun { queries, verdict: true }),
                MachineStep::Reject => return Ok(MachineRun { queries, verdict: false }),
            }
        }
    }

    /// Every question the machine can ask on this input, over all possible
    /// answer sequences. Errors if some sequence makes it exceed its query
    /// bound.
    pub fn reachable_queries(&self, input: &str) -> Result<BTreeSet<String>> {
        let mut queries = BTreeSet::new();
        let mut stack = vec![Vec::new()];
        while let Some(prefix) = stack.pop() {
            match (self.program)(input, &prefix) {
                MachineStep::Query(q) => {
                    if prefix.len() == self.query_bound {
                        return Err(Error::MalformedSpec(format!(
                            "the machine asks {:?} after {} answers, past its \
                             bound of {}",
                            q,
                            prefix.len(),
                            self.query_bound
                        )));
                    }
                    queries.insert(q);
                    for bit in [false, true] {
                        let mut next = prefix.clone();
                        next.push(bit);
                        stack.push(next);
                    }
                }
                MachineStep::Accept | MachineStep::Reject => {}
            }
        }
        Ok(queries)
    }
}

/// The discounted series the composed protocol pays on a well-formed
/// transcript with `sub_rewards.len()` answered questions.
pub fn composition_reward(delta: &Dyadic, sub_rewards: &[Dyadic]) -> Dyadic {
    let mut total = Dyadic::zero();
    for (j, r) in sub_rewards.iter().enumerate() {
        let weight = delta.pow(j as u32).mul_pow2(-(j as i64 + 1));
        total = &total + &(&weight * r);
    }
    let l = sub_rewards.len();
    &total + &delta.pow(l as u32).mul_pow2(-(l as i64 + 1))
}

struct ComposeCtx {
    machine: OracleMachine,
    inners: BTreeMap<String, ProtocolSpec>,
    lanes: usize,
    count_bits: u8,
    msg_slot_bits: Vec<u8>,
    rand_slot_bits: Vec<u8>,
}

impl ComposeCtx {
    fn claimed_count(&self, first: BitString) -> u64 {
        first.high(self.count_bits).value()
    }

    fn claimed_answers(&self, first: BitString) -> Vec<bool> {
        let field = first
            .low(first.width() - self.count_bits)
            .high(self.lanes as u8)
            .value();
        (0..self.lanes)
            .map(|j| (field >> (self.lanes - 1 - j)) & 1 == 1)
            .collect()
    }

    /// The machine run determined by the claimed answer bits. Total: the
    /// construction-time reachability check proved the machine halts within
    /// its bound on every answer sequence.
    fn simulate(&self, input: &str, first: BitString) -> MachineRun {
        self.machine
            .run(input, &self.claimed_answers(first))
            .expect("machine halts on all answer sequences; checked at construction")
    }

    /// Lane `j`'s raw slot value in the round-`t` message (both 0-based).
    fn msg_slot(&self, t: usize, ms: &[BitString], j: usize) -> u64 {
        let w = self.msg_slot_bits[t] as usize;
        let field = if t == 0 {
            ms[0].low((self.lanes * w) as u8).value()
        } else {
            ms[t].value()
        };
        (field >> ((self.lanes - 1 - j) * w)) & mask(w)
    }

    /// Lane `j`'s raw slot value in the round-`t` draw.
    fn rand_slot(&self, t: usize, rs: &[BitString], j: usize) -> u64 {
        let w = self.rand_slot_bits[t] as usize;
        (rs[t].value() >> ((self.lanes - 1 - j) * w)) & mask(w)
    }

    /// Lane `j`'s sub-messages and sub-draws for the first `t` rounds,
    /// masked down to the sub-protocol's widths. The second return is false
    /// if some message slot had bits above the sub-protocol's width, which
    /// the reward treats as a recognizable deviation.
    fn lane_play(
        &self,
        query: &str,
        j: usize,
        ms: &[BitString],
        rs: &[BitString],
    ) -> (Vec<BitString>, Vec<BitString>, bool) {
        let inner = &self.inners[query];
        let mut sub_ms = Vec::with_capacity(ms.len());
        let mut sub_rs = Vec::with_capacity(rs.len());
        let mut fits = true;
        for t in 0..ms.len() {
            let raw = self.msg_slot(t, ms, j);
            let w = inner.msg_bits()[t];
            if raw >= 1 << w {
                fits = false;
            }
            sub_ms.push(BitString::new(raw & mask(w as usize), w));
        }
        for t in 0..rs.len() {
            let raw = self.rand_slot(t, rs, j);
            let w = inner.rand_bits()[t];
            sub_rs.push(BitString::new(raw & mask(w as usize), w));
        }
        (sub_ms, sub_rs, fits)
    }
}

fn mask(bits: usize) -> u64 {
    if bits == 0 {
        0
    } else {
        u64::MAX >> (64 - bits)
    }
}

fn bits_for(max: usize) -> u8 {
    if max == 0 {
        0
    } else {
        (64 - (max as u64).leading_zeros()) as u8
    }
}

/// Composes a bounded-query decision machine with a family of answer
/// sub-protocols, specialized to one `input`. `family` maps each question
/// string the machine can ask to the sub-protocol answering it; every
/// sub-protocol must have the same round count, declare a reward gap in
/// `(0, 1]`, and accept its question string as input.
pub fn compose_with_machine(
    machine: &OracleMachine,
    family: &dyn Fn(&str) -> Result<ProtocolSpec>,
    input: &str,
) -> Result<ProtocolSpec> {
    let reachable = machine.reachable_queries(input)?;
    if reachable.is_empty() {
        return Err(Error::MalformedSpec(
            "the machine never asks a question, so there is nothing to compose".into(),
        ));
    }

    let mut inners = BTreeMap::new();
    let mut delta_min: Option<Dyadic> = None;
    let mut delta_exp_max = 0u32;
    let mut rounds = 0usize;
    let mut res_max: Option<u32> = Some(0);
    let mut depth_max = 0u32;
    for query in &reachable {
        let inner = family(query)?;
        inner.check_input(query)?;
        let delta = inner
            .declared_delta(query)
            .ok_or_else(|| Error::MissingDelta(inner.name().to_string()))?;
        if delta.is_zero() || !delta.in_unit_interval() {
            return Err(Error::MalformedSpec(format!(
                "{} declares gap {}, outside (0, 1]",
                inner.name(),
                delta
            )));
        }
        if inners.is_empty() {
            rounds = inner.rounds();
        } else if inner.rounds() != rounds {
            return Err(Error::MalformedSpec(format!(
                "sub-protocols disagree on round count: {} has {}, expected {}",
                inner.name(),
                inner.rounds(),
                rounds
            )));
        }
        delta_exp_max = delta_exp_max.max(delta.exponent());
        delta_min = Some(match delta_min {
            Some(d) if d <= delta => d,
            _ => delta,
        });
        res_max = match (res_max, inner.reward_resolution_bits()) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        depth_max = depth_max.max(inner.nesting_depth());
        inners.insert(query.clone(), inner);
    }
    let delta_min = delta_min.expect("reachable set is nonempty");

    let lanes = machine.query_bound();
    let count_bits = bits_for(lanes);
    let mut msg_slot_bits = Vec::with_capacity(rounds);
    let mut rand_slot_bits = Vec::with_capacity(rounds);
    for t in 0..rounds {
        msg_slot_bits.push(inners.values().map(|p| p.msg_bits()[t]).max().unwrap());
        rand_slot_bits.push(inners.values().map(|p| p.rand_bits()[t]).max().unwrap());
    }

    let mut msg_bits = Vec::with_capacity(rounds);
    let mut rand_bits = Vec::with_capacity(rounds);
    for t in 0..rounds {
        let lane_bits = lanes as u32 * msg_slot_bits[t] as u32;
        let header = if t == 0 { count_bits as u32 + lanes as u32 } else { 0 };
        let width = header + lane_bits;
        if width > 63 {
            return Err(Error::WidthOverflow { bits: width });
        }
        msg_bits.push(width as u8);
        let draw = lanes as u32 * rand_slot_bits[t] as u32;
        if draw > 63 {
            return Err(Error::WidthOverflow { bits: draw });
        }
        rand_bits.push(draw as u8);
    }

    let ctx = Arc::new(ComposeCtx {
        machine: machine.clone(),
        inners,
        lanes,
        count_bits,
        msg_slot_bits,
        rand_slot_bits,
    });
    let fixed_input = input.to_string();

    let c = ctx.clone();
    let verifier: VerifierRule = Arc::new(move |input, ms, rs| {
        let run = c.simulate(input, ms[0]);
        let mut reply = BitString::empty();
        for (j, query) in run.queries.iter().enumerate() {
            let (sub_ms, sub_rs, _) = c.lane_play(query, j, ms, rs);
            reply = reply.concat(c.inners[query].verifier_msg(query, &sub_ms, &sub_rs));
        }
        reply
    });

    let c = ctx.clone();
    let rounds_total = rounds;
    let reward: RewardRule = Arc::new(move |input, ms, rs| {
        let zero = Dyadic::zero();
        let run = c.simulate(input, ms[0]);
        let asked = run.queries.len();
        if c.claimed_count(ms[0]) != asked as u64 {
            return zero;
        }
        let answers = c.claimed_answers(ms[0]);
        if answers[asked..].iter().any(|&y| y) {
            return zero;
        }
        for t in 0..rounds_total {
            for j in asked..c.lanes {
                if c.msg_slot(t, ms, j) != 0 {
                    return zero;
                }
            }
        }
        let mut sub_rewards = Vec::with_capacity(asked);
        let mut delta_play: Option<Dyadic> = None;
        for (j, query) in run.queries.iter().enumerate() {
            let inner = &c.inners[query];
            let (sub_ms, sub_rs, fits) = c.lane_play(query, j, ms, rs);
            if !fits {
                return zero;
            }
            let replies: Vec<BitString> = (1..rounds_total)
                .map(|t| inner.verifier_msg(query, &sub_ms[..t], &sub_rs[..t]))
                .collect();
            let claim = inner.value(query, &sub_ms, &replies);
            if answers[j] != (claim == "1") {
                return zero;
            }
            sub_rewards.push(inner.reward(query, &sub_ms, &sub_rs));
            let delta = inner
                .declared_delta(query)
                .expect("checked at construction");
            delta_play = Some(match delta_play {
                Some(d) if d <= delta => d,
                _ => delta,
            });
        }
        let delta_play = delta_play.unwrap_or_else(Dyadic::one);
        composition_reward(&delta_play, &sub_rewards)
    });

    let c = ctx.clone();
    let value: ValueRule = Arc::new(move |input, ms, _| {
        BitString::bit_str(u64::from(c.simulate(input, ms[0]).verdict))
    });

    let expected = fixed_input.clone();
    let check: InputCheck = Arc::new(move |input| {
        if input == expected {
            Ok(())
        } else {
            Err(Error::MalformedSpec(format!(
                "this composition is specialized to input {expected:?}"
            )))
        }
    });

    let declared = delta_min.pow(lanes as u32 + 1).mul_pow2(-(lanes as i64 + 1));
    let mut spec = ProtocolSpec::new(
        format!("compose(queries<={lanes}, rounds={rounds})"),
        msg_bits,
        rand_bits,
        verifier,
        reward,
        value,
    )?
    .with_declared_delta(Arc::new(move |_| declared.clone()))
    .with_nesting_depth(depth_max + 1)
    .with_input_check(check);
    if let Some(res) = res_max {
        let lanes = lanes as u64;
        let series = (lanes.saturating_sub(1)) * delta_exp_max as u64 + lanes + res as u64;
        let tail = lanes * delta_exp_max as u64 + lanes + 1;
        spec = spec.with_resolution_bits(series.max(tail).min(u32::MAX as u64) as u32);
    }
    Ok(spec)
}

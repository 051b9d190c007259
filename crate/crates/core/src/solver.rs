//! Exact solving of a protocol from the prover's side. The prover only
//! observes the verifier's replies, so solving is backward induction over
//! observable transcripts: at a prover turn the value is the maximum over
//! next messages, at a pending verifier reply it is the belief-weighted
//! average over the fresh draw, and at the end of the last round it is the
//! expected reward. Beliefs are uniform over the randomness prefixes
//! consistent with the replies observed so far, so every expectation divides
//! by `|belief| * 2^rand_bits` and stays exactly representable whenever the
//! consistent set has power-of-two size (which every construction in this
//! crate guarantees).

use std::collections::{BTreeMap, BTreeSet};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::exec::{map_chunks, ExecCfg};
use crate::protocol::{BitString, ProtocolSpec, Transcript};

/// One randomness draw per completed round.
pub type RandPrefix = Vec<BitString>;

/// The observable part of a transcript, used as the information-set key.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct NodeKey {
    pub prover: Vec<BitString>,
    pub verifier: Vec<BitString>,
}

impl NodeKey {
    pub fn root() -> Self {
        NodeKey {
            prover: Vec::new(),
            verifier: Vec::new(),
        }
    }

    /// True when the prover moves next at this node.
    pub fn prover_turn(&self) -> bool {
        self.prover.len() == self.verifier.len()
    }

    pub fn to_transcript(&self, input: &str) -> Transcript {
        Transcript {
            input: input.to_string(),
            prover: self.prover.clone(),
            verifier: self.verifier.clone(),
        }
    }
}

/// Everything the solver learned about one information set.
#[derive(Clone, Debug)]
pub struct NodeInfo {
    /// Exact value under rational play from here on.
    pub value: Dyadic,
    /// Maximizing next messages, ascending; empty at reply-pending nodes.
    pub argmax: Vec<BitString>,
    /// At a prover turn: the value of every candidate message. At a pending
    /// reply: the value of every reply that has positive probability.
    pub children: Vec<(BitString, Dyadic)>,
    /// Randomness prefixes consistent with the observed replies (uniform).
    pub belief: Vec<RandPrefix>,
    /// Best minus second-best distinct child value at a prover turn, when a
    /// suboptimal message exists here.
    pub gap: Option<Dyadic>,
}

/// Map from observable transcripts to solved node data, restricted to nodes
/// reachable when the prover always plays maximizing messages.
#[derive(Clone, Debug, Default)]
pub struct InfoSetTable {
    nodes: BTreeMap<NodeKey, NodeInfo>,
}

impl InfoSetTable {
    pub fn get(&self, key: &NodeKey) -> Option<&NodeInfo> {
        self.nodes.get(key)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeKey, &NodeInfo)> {
        self.nodes.iter()
    }
}

/// Result of measuring the smallest suboptimality gap.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum DeltaOutcome {
    /// The smallest gap between a best and a second-best distinct message
    /// over all rationally reachable prover turns.
    Gap(Dyadic),
    /// Every reachable prover turn has all messages tied; there is nothing
    /// to deviate to, reported as an infinite gap.
    NoSuboptimalMessage,
}

impl DeltaOutcome {
    pub fn as_gap(&self) -> Option<&Dyadic> {
        match self {
            DeltaOutcome::Gap(g) => Some(g),
            DeltaOutcome::NoSuboptimalMessage => None,
        }
    }

    /// Report rendering: a dyadic literal, or `+inf` for the sentinel.
    pub fn render(&self) -> String {
        match self {
            DeltaOutcome::Gap(g) => g.to_string(),
            DeltaOutcome::NoSuboptimalMessage => "+inf".to_string(),
        }
    }
}

/// Full output of [`solve_rational`].
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub root_value: Dyadic,
    pub root_argmax: Vec<BitString>,
    pub table: InfoSetTable,
    /// Smallest gap over reachable prover turns; `None` when no reachable
    /// turn has a suboptimal message.
    pub min_gap: Option<Dyadic>,
    pub node_count: u64,
}

impl SolveOutcome {
    pub fn delta(&self) -> DeltaOutcome {
        match &self.min_gap {
            Some(g) => DeltaOutcome::Gap(g.clone()),
            None => DeltaOutcome::NoSuboptimalMessage,
        }
    }
}

struct Solver<'a> {
    spec: &'a ProtocolSpec,
    input: &'a str,
    record: bool,
    nodes: BTreeMap<NodeKey, NodeInfo>,
}

impl<'a> Solver<'a> {
    fn new(spec: &'a ProtocolSpec, input: &'a str, record: bool) -> Self {
        Solver {
            spec,
            input,
            record,
            nodes: BTreeMap::new(),
        }
    }

    fn check_reward(&self, r: &Dyadic) -> Result<()> {
        if !r.in_unit_interval() {
            return Err(Error::RewardOutOfRange {
                context: self.spec.name().to_string(),
                value: r.to_string(),
            });
        }
        if let Some(p) = self.spec.reward_resolution_bits() {
            if r.exponent() > p {
                return Err(Error::RewardOffGrid {
                    context: self.spec.name().to_string(),
                    value: r.to_string(),
                    resolution_bits: p,
                });
            }
        }
        Ok(())
    }

    fn divide(&self, total: Dyadic, belief_size: usize, rand_bits: u8) -> Result<Dyadic> {
        total
            .mul_pow2(-(rand_bits as i64))
            .div_exact(belief_size as u64)
            .ok_or_else(|| {
                Error::NonDyadicValue(format!(
                    "conditioning on {belief_size} consistent draws in {}",
                    self.spec.name()
                ))
            })
    }

    /// Value of the node where the prover has just sent its last message of
    /// `ms`, with `vs` replies observed. Records the reply-pending node.
    fn message_value(
        &mut self,
        ms: &mut Vec<BitString>,
        vs: &mut Vec<BitString>,
        belief: &[RandPrefix],
    ) -> Result<Dyadic> {
        let i = vs.len();
        let rb = self.spec.rand_bits()[i];
        let (value, children) = if ms.len() == self.spec.rounds() {
            let mut total = Dyadic::zero();
            let mut rs: Vec<BitString> = Vec::with_capacity(i + 1);
            for rp in belief {
                rs.clear();
                rs.extend_from_slice(rp);
                rs.push(BitString::empty());
                for r in BitString::all(rb) {
                    *rs.last_mut().unwrap() = r;
                    let rew = self.spec.reward(self.input, ms, &rs);
                    self.check_reward(&rew)?;
                    total = &total + &rew;
                }
            }
            (self.divide(total, belief.len(), rb)?, Vec::new())
        } else {
            let mut groups: BTreeMap<BitString, Vec<RandPrefix>> = BTreeMap::new();
            for rp in belief {
                for r in BitString::all(rb) {
                    let mut rs = Vec::with_capacity(i + 1);
                    rs.extend_from_slice(rp);
                    rs.push(r);
                    let reply = self.spec.verifier_msg(self.input, ms, &rs);
                    groups.entry(reply).or_default().push(rs);
                }
            }
            let mut weighted = Dyadic::zero();
            let mut children = Vec::with_capacity(groups.len());
            for (reply, sub_belief) in groups {
                vs.push(reply);
                let (child_value, _) = self.prover_node(ms, vs, &sub_belief)?;
                vs.pop();
                weighted = &weighted + &child_value.scale_int(sub_belief.len() as u64);
                children.push((reply, child_value));
            }
            (self.divide(weighted, belief.len(), rb)?, children)
        };
        if self.record {
            self.nodes.insert(
                NodeKey {
                    prover: ms.clone(),
                    verifier: vs.clone(),
                },
                NodeInfo {
                    value: value.clone(),
                    argmax: Vec::new(),
                    children,
                    belief: belief.to_vec(),
                    gap: None,
                },
            );
        }
        Ok(value)
    }

    /// Value and per-message values at a prover turn. Records the node.
    fn prover_node(
        &mut self,
        ms: &mut Vec<BitString>,
        vs: &mut Vec<BitString>,
        belief: &[RandPrefix],
    ) -> Result<(Dyadic, Vec<(BitString, Dyadic)>)> {
        let i = vs.len();
        debug_assert_eq!(ms.len(), i);
        let w = self.spec.msg_bits()[i];
        let mut children = Vec::with_capacity(1 << w);
        for m in BitString::all(w) {
            ms.push(m);
            let v = self.message_value(ms, vs, belief)?;
            ms.pop();
            children.push((m, v));
        }
        self.finish_prover_node(ms, vs, belief, children)
    }

    fn finish_prover_node(
        &mut self,
        ms: &[BitString],
        vs: &[BitString],
        belief: &[RandPrefix],
        children: Vec<(BitString, Dyadic)>,
    ) -> Result<(Dyadic, Vec<(BitString, Dyadic)>)> {
        let best = children
            .iter()
            .map(|(_, v)| v)
            .max()
            .expect("message space is never empty")
            .clone();
        let argmax: Vec<BitString> = children
            .iter()
            .filter(|(_, v)| *v == best)
            .map(|(m, _)| *m)
            .collect();
        let second = children.iter().map(|(_, v)| v).filter(|v| **v != best).max();
        let gap = second.map(|s| &best - s);
        if self.record {
            self.nodes.insert(
                NodeKey {
                    prover: ms.to_vec(),
                    verifier: vs.to_vec(),
                },
                NodeInfo {
                    value: best.clone(),
                    argmax,
                    children: children.clone(),
                    belief: belief.to_vec(),
                    gap,
                },
            );
        }
        Ok((best, children))
    }
}

fn preflight(spec: &ProtocolSpec, input: &str, cfg: &ExecCfg) -> Result<()> {
    spec.check_input(input)?;
    cfg.check(spec.enumeration_size())
}

/// Solves the whole protocol exactly and returns the information-set table
/// restricted to nodes reachable under maximizing play, along with the root
/// value, the root argmax set, and the smallest observed gap.
pub fn solve_rational(spec: &ProtocolSpec, input: &str, cfg: &ExecCfg) -> Result<SolveOutcome> {
    preflight(spec, input, cfg)?;
    let root_belief: Vec<RandPrefix> = vec![Vec::new()];
    let w = spec.msg_bits()[0];
    let total = 1u64 << w;

    // The subtrees under distinct first messages are independent; evaluate
    // them on separate workers with separate node maps and merge in message
    // order. Exact arithmetic makes the merge worker-count independent.
    let chunks = map_chunks(total, cfg.workers, |range| {
        let mut solver = Solver::new(spec, input, true);
        let mut out = Vec::with_capacity((range.end - range.start) as usize);
        for v in range {
            let m = BitString::new(v, w);
            let mut ms = vec![m];
            let mut vs = Vec::new();
            let r = solver.message_value(&mut ms, &mut vs, &root_belief);
            out.push((m, r));
        }
        (out, solver.nodes)
    });

    let mut solver = Solver::new(spec, input, true);
    let mut children = Vec::with_capacity(total as usize);
    for (pairs, nodes) in chunks {
        for (m, r) in pairs {
            children.push((m, r?));
        }
        solver.nodes.extend(nodes);
    }
    let (root_value, _) = solver.finish_prover_node(&[], &[], &root_belief, children)?;

    let mut nodes = solver.nodes;
    prune_unreachable(&mut nodes);
    let root = nodes
        .get(&NodeKey::root())
        .expect("root node is always recorded");
    let root_argmax = root.argmax.clone();
    let min_gap = nodes
        .values()
        .filter_map(|n| n.gap.as_ref())
        .min()
        .cloned();
    let node_count = nodes.len() as u64;
    Ok(SolveOutcome {
        root_value,
        root_argmax,
        table: InfoSetTable { nodes },
        min_gap,
        node_count,
    })
}

/// Drops every node that maximizing play cannot reach.
fn prune_unreachable(nodes: &mut BTreeMap<NodeKey, NodeInfo>) {
    let mut reachable: BTreeSet<NodeKey> = BTreeSet::new();
    let mut stack = vec![NodeKey::root()];
    while let Some(key) = stack.pop() {
        if !reachable.insert(key.clone()) {
            continue;
        }
        let Some(info) = nodes.get(&key) else { continue };
        if key.prover_turn() {
            for m in info.argmax.clone() {
                let mut prover = key.prover.clone();
                prover.push(m);
                stack.push(NodeKey {
                    prover,
                    verifier: key.verifier.clone(),
                });
            }
        } else {
            for (reply, _) in &info.children {
                let mut verifier = key.verifier.clone();
                verifier.push(*reply);
                stack.push(NodeKey {
                    prover: key.prover.clone(),
                    verifier,
                });
            }
        }
    }
    nodes.retain(|k, _| reachable.contains(k));
}

/// Exact value of an arbitrary well-formed transcript prefix: the expected
/// reward under rational play from that point, conditioning on the observed
/// replies. Fails when no randomness is consistent with the transcript.
pub fn info_set_value(
    spec: &ProtocolSpec,
    transcript: &Transcript,
    cfg: &ExecCfg,
) -> Result<Dyadic> {
    let input = transcript.input.as_str();
    preflight(spec, input, cfg)?;
    transcript.validate_shape(spec)?;
    let belief = consistent_prefixes(spec, transcript)?;
    let mut solver = Solver::new(spec, input, false);
    let mut ms = transcript.prover.clone();
    let mut vs = transcript.verifier.clone();
    if transcript.at_round_boundary() {
        if ms.len() == spec.rounds() {
            // Complete play: average the reward over the consistent draws.
            let mut total = Dyadic::zero();
            for rs in &belief {
                let rew = spec.reward(input, &ms, rs);
                solver.check_reward(&rew)?;
                total = &total + &rew;
            }
            solver.divide(total, belief.len(), 0)
        } else {
            Ok(solver.prover_node(&mut ms, &mut vs, &belief)?.0)
        }
    } else {
        solver.message_value(&mut ms, &mut vs, &belief)
    }
}

/// Enumerates the randomness prefixes consistent with a transcript's
/// replies. For a transcript ending in an unanswered prover message the
/// prefix covers only the answered rounds.
pub fn consistent_prefixes(spec: &ProtocolSpec, transcript: &Transcript) -> Result<Vec<RandPrefix>> {
    let input = transcript.input.as_str();
    let mut belief: Vec<RandPrefix> = vec![Vec::new()];
    let full_rounds = if transcript.prover.len() == spec.rounds() && transcript.at_round_boundary()
    {
        // A complete play conditions on all rounds, including draws made
        // after the final reply would have been computed.
        spec.rounds()
    } else {
        transcript.verifier.len()
    };
    for j in 0..full_rounds {
        let rb = spec.rand_bits()[j];
        let ms = &transcript.prover[..j + 1];
        let mut next = Vec::new();
        for rp in &belief {
            for r in BitString::all(rb) {
                let mut rs = rp.clone();
                rs.push(r);
                if j >= transcript.verifier.len()
                    || spec.verifier_msg(input, ms, &rs) == transcript.verifier[j]
                {
                    next.push(rs);
                }
            }
        }
        if next.is_empty() {
            return Err(Error::InconsistentTranscript(format!(
                "no draw matches reply {} of {}",
                j + 1,
                spec.name()
            )));
        }
        belief = next;
    }
    Ok(belief)
}

/// Measures the exact smallest suboptimality gap over rationally reachable
/// prover turns, or reports that no suboptimal message exists anywhere.
pub fn delta_exact(spec: &ProtocolSpec, input: &str, cfg: &ExecCfg) -> Result<DeltaOutcome> {
    Ok(solve_rational(spec, input, cfg)?.delta())
}

/// Result of exploring every maximizing branch and checking the claimed
/// value against the expected truth.
#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub pass: bool,
    pub truth: String,
    /// Every value claimed on some maximizing branch.
    pub decisions: BTreeSet<String>,
    pub branches: u64,
    /// Transcripts of failing branches, capped at a few examples.
    pub witnesses: Vec<Transcript>,
}

const MAX_WITNESSES: usize = 8;

/// Explores every branch a maximizing prover can produce and checks that the
/// protocol's value rule yields `truth` on all of them.
pub fn verify_protocol(
    spec: &ProtocolSpec,
    input: &str,
    truth: &str,
    cfg: &ExecCfg,
) -> Result<VerifyReport> {
    let outcome = solve_rational(spec, input, cfg)?;
    let mut report = VerifyReport {
        pass: true,
        truth: truth.to_string(),
        decisions: BTreeSet::new(),
        branches: 0,
        witnesses: Vec::new(),
    };
    let mut stack = vec![NodeKey::root()];
    while let Some(key) = stack.pop() {
        let info = outcome
            .table
            .get(&key)
            .expect("maximizing walk stays inside the table");
        if key.prover.len() == spec.rounds() {
            unreachable!("walk stops before the final reply");
        }
        let last_round = key.prover.len() + 1 == spec.rounds();
        for m in &info.argmax {
            let mut ms = key.prover.clone();
            ms.push(*m);
            if last_round {
                let claimed = spec.value(input, &ms, &key.verifier);
                report.branches += 1;
                report.decisions.insert(claimed.clone());
                if claimed != truth {
                    report.pass = false;
                    if report.witnesses.len() < MAX_WITNESSES {
                        report.witnesses.push(Transcript {
                            input: input.to_string(),
                            prover: ms.clone(),
                            verifier: key.verifier.clone(),
                        });
                    }
                }
            } else {
                let reply_key = NodeKey {
                    prover: ms.clone(),
                    verifier: key.verifier.clone(),
                };
                let reply = outcome
                    .table
                    .get(&reply_key)
                    .expect("maximizing walk stays inside the table");
                for (a, _) in &reply.children {
                    let mut verifier = key.verifier.clone();
                    verifier.push(*a);
                    stack.push(NodeKey {
                        prover: ms.clone(),
                        verifier,
                    });
                }
            }
        }
    }
    Ok(report)
}

/// A finished (or truncated) interaction.
#[derive(Clone, Debug)]
pub struct Played {
    pub transcript: Transcript,
    pub randomness: Vec<BitString>,
    pub reward: Dyadic,
    /// Set when the prover emitted a message of the wrong width; the reward
    /// is zero and the transcript stops before the offending message.
    pub truncated: bool,
}

/// Plays one interaction with the given randomness (one draw per round).
pub fn play_with_randomness(
    spec: &ProtocolSpec,
    input: &str,
    strategy: &mut dyn FnMut(&Transcript) -> BitString,
    draws: &[BitString],
) -> Result<Played> {
    spec.check_input(input)?;
    assert_eq!(draws.len(), spec.rounds(), "one draw per round");
    let mut t = Transcript::root(input);
    let mut rs: Vec<BitString> = Vec::new();
    for i in 0..spec.rounds() {
        let m = strategy(&t);
        if m.width() != spec.msg_bits()[i] {
            return Ok(Played {
                transcript: t,
                randomness: rs,
                reward: Dyadic::zero(),
                truncated: true,
            });
        }
        t.prover.push(m);
        rs.push(draws[i]);
        let reply = spec.verifier_msg(input, &t.prover, &rs);
        t.verifier.push(reply);
    }
    let reward = spec.reward(input, &t.prover, &rs);
    Ok(Played {
        transcript: t,
        randomness: rs,
        reward,
        truncated: false,
    })
}

/// Plays one interaction with seeded randomness. The same seed always yields
/// the same draws, transcript and reward.
pub fn run_interaction(
    spec: &ProtocolSpec,
    input: &str,
    strategy: &mut dyn FnMut(&Transcript) -> BitString,
    seed: u64,
) -> Result<Played> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<BitString> = spec
        .rand_bits()
        .iter()
        .map(|&rb| {
            let mask = if rb == 0 { 0 } else { u64::MAX >> (64 - rb) };
            BitString::new(rng.next_u64() & mask, rb)
        })
        .collect();
    play_with_randomness(spec, input, strategy, &draws)
}

/// A strategy that always plays the lowest maximizing message from a solved
/// table. Panics if play leaves the solved region, which maximizing play
/// never does.
pub fn argmax_strategy(outcome: &SolveOutcome) -> impl FnMut(&Transcript) -> BitString + '_ {
    move |t: &Transcript| {
        let key = NodeKey {
            prover: t.prover.clone(),
            verifier: t.verifier.clone(),
        };
        let node = outcome
            .table
            .get(&key)
            .expect("argmax strategy left the solved region");
        node.argmax[0]
    }
}

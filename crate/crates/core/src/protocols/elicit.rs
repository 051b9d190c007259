//! Eliciting the continuation value of a protocol prefix. Given a `k`-round
//! protocol and a boundary `i`, the wrapper is a `(k-i)`-round protocol whose
//! input is a serialized `i`-round transcript prefix. Its first message
//! carries a claimed expectation `E` alongside the next regular message; the
//! verifier reconstructs a full play by drawing a uniform consistent
//! randomness prefix (selector bits) plus fresh randomness for the remaining
//! rounds, and pays `R/2 + (delta/4)(1 - (E - R)^2)` where `R` is the
//! underlying reward. For any fixed continuation strategy the quadratic is
//! uniquely maximized at `E` = that strategy's expected reward, claiming `E`
//! off the optimum loses exactly `(delta/4)(E - E*)^2`, and distorting the
//! continuation loses at least `delta/2` on the reward half while the
//! quadratic can repay at most `delta/4`, so the unique rational claim is
//! the prefix's exact continuation value.
//!
//! `split_at_round` uses that wrapper as an oracle: it truncates the base
//! protocol at round `i`, pays the elicited value of the reached prefix as
//! the whole reward, and reports whether values and argmax sets of the
//! truncation agree with the full solve everywhere, and whether the oracle's
//! claimed decision matches the direct one at every reachable prefix.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::exec::ExecCfg;
use crate::protocol::{
    BitString, InputCheck, ProtocolSpec, RewardRule, Transcript, ValueRule, VerifierRule,
};
use crate::solver::{consistent_prefixes, solve_rational, NodeKey, RandPrefix, SolveOutcome};

struct ElicitCtx {
    base: ProtocolSpec,
    split: usize,
    /// Claimed expectations live on the `2^-p_bits` grid.
    p_bits: u32,
    e_width: u8,
    selector_bits: u8,
    cache: Mutex<BTreeMap<String, Arc<CachedPrefix>>>,
}

struct CachedPrefix {
    transcript: Transcript,
    belief: Vec<RandPrefix>,
}

impl ElicitCtx {
    /// Parses and conditions on a prefix input. Only called on inputs the
    /// input check has already validated, hence the expects.
    fn lookup(&self, input: &str) -> Arc<CachedPrefix> {
        if let Some(hit) = self.cache.lock().unwrap().get(input) {
            return hit.clone();
        }
        let entry = Arc::new(
            self.load(input)
                .expect("inputs are validated before any rule runs"),
        );
        self.cache
            .lock()
            .unwrap()
            .insert(input.to_string(), entry.clone());
        entry
    }

    fn load(&self, input: &str) -> Result<CachedPrefix> {
        let transcript = Transcript::from_input_string(input)?;
        if !transcript.at_round_boundary() || transcript.prover.len() != self.split {
            return Err(Error::MalformedTranscript(format!(
                "the wrapper input must be a complete {}-round prefix",
                self.split
            )));
        }
        transcript.validate_shape(&self.base)?;
        self.base.check_input(&transcript.input)?;
        let belief = consistent_prefixes(&self.base, &transcript)?;
        if !belief.len().is_power_of_two() {
            return Err(Error::NonDyadicValue(format!(
                "prefix belief has size {}, not a power of two; the selector \
                 draw cannot pick uniformly",
                belief.len()
            )));
        }
        Ok(CachedPrefix { transcript, belief })
    }

    /// Splices wrapper messages and draws into full-protocol ones. Works on
    /// any wrapper-consistent partial pair (same number of messages and
    /// draws).
    fn reconstruct(
        &self,
        cached: &CachedPrefix,
        ms: &[BitString],
        rs: &[BitString],
    ) -> (Vec<BitString>, Vec<BitString>) {
        let first = ms[0];
        let next_msg = first.low(first.width() - self.e_width);
        let mut full_ms = cached.transcript.prover.clone();
        full_ms.push(next_msg);
        full_ms.extend_from_slice(&ms[1..]);

        let selector = rs[0].high(self.selector_bits).value() as usize;
        let chosen = &cached.belief[selector % cached.belief.len()];
        let mut full_rs = chosen.clone();
        full_rs.push(rs[0].low(rs[0].width() - self.selector_bits));
        full_rs.extend_from_slice(&rs[1..]);
        (full_ms, full_rs)
    }

    fn claimed(&self, ms: &[BitString]) -> Option<Dyadic> {
        let e_raw = ms[0].high(self.e_width).value();
        if e_raw > 1 << self.p_bits {
            None
        } else {
            Some(Dyadic::new(e_raw, self.p_bits))
        }
    }
}

/// Builds the expectation-eliciting wrapper for the boundary after round
/// `i`, with `1 <= i < k`. The base protocol must declare a gap bound and a
/// reward grid.
pub fn elicit_expectation(base: &ProtocolSpec, i: usize) -> Result<ProtocolSpec> {
    let k = base.rounds();
    if i < 1 || i >= k {
        return Err(Error::InvalidSplit { round: i, rounds: k });
    }
    if !base.has_declared_delta() {
        return Err(Error::MissingDelta(base.name().to_string()));
    }
    let p_bits = base.value_resolution_bits().ok_or_else(|| {
        Error::MalformedSpec(format!(
            "{} declares no reward grid, so claimed expectations have no \
             finite encoding",
            base.name()
        ))
    })?;
    if p_bits + 1 + base.msg_bits()[i] as u32 > 63 {
        return Err(Error::WidthOverflow {
            bits: p_bits + 1 + base.msg_bits()[i] as u32,
        });
    }
    let selector_bits: u32 = base.rand_bits()[..i].iter().map(|&b| b as u32).sum();
    if selector_bits + base.rand_bits()[i] as u32 > 63 {
        return Err(Error::WidthOverflow {
            bits: selector_bits + base.rand_bits()[i] as u32,
        });
    }

    let e_width = (p_bits + 1) as u8;
    let mut msg_bits = vec![e_width + base.msg_bits()[i]];
    msg_bits.extend_from_slice(&base.msg_bits()[i + 1..]);
    let mut rand_bits = vec![selector_bits as u8 + base.rand_bits()[i]];
    rand_bits.extend_from_slice(&base.rand_bits()[i + 1..]);

    let ctx = Arc::new(ElicitCtx {
        base: base.clone(),
        split: i,
        p_bits,
        e_width,
        selector_bits: selector_bits as u8,
        cache: Mutex::new(BTreeMap::new()),
    });

    let c = ctx.clone();
    let verifier: VerifierRule = Arc::new(move |input, ms, rs| {
        let cached = c.lookup(input);
        let (full_ms, full_rs) = c.reconstruct(&cached, ms, rs);
        c.base.verifier_msg(&cached.transcript.input, &full_ms, &full_rs)
    });

    let c = ctx.clone();
    let reward: RewardRule = Arc::new(move |input, ms, rs| {
        let Some(e) = c.claimed(ms) else {
            return Dyadic::zero();
        };
        let cached = c.lookup(input);
        let (full_ms, full_rs) = c.reconstruct(&cached, ms, rs);
        let r = c.base.reward(&cached.transcript.input, &full_ms, &full_rs);
        let delta = c
            .base
            .declared_delta(&cached.transcript.input)
            .expect("declaration checked at construction");
        let quad = &Dyadic::one() - &(&e - &r).square();
        &r.mul_pow2(-1) + &(&delta.mul_pow2(-2) * &quad)
    });

    let c = ctx.clone();
    let value: ValueRule = Arc::new(move |input, ms, vs| {
        let cached = c.lookup(input);
        let first = ms[0];
        let next_msg = first.low(first.width() - c.e_width);
        let mut full_ms = cached.transcript.prover.clone();
        full_ms.push(next_msg);
        full_ms.extend_from_slice(&ms[1..]);
        let mut full_vs = cached.transcript.verifier.clone();
        full_vs.extend_from_slice(vs);
        c.base.value(&cached.transcript.input, &full_ms, &full_vs)
    });

    let c = ctx.clone();
    let check: InputCheck = Arc::new(move |input| {
        if c.cache.lock().unwrap().contains_key(input) {
            return Ok(());
        }
        let entry = Arc::new(c.load(input)?);
        c.cache.lock().unwrap().insert(input.to_string(), entry);
        Ok(())
    });

    Ok(ProtocolSpec::new(
        format!("elicit[after round {i}]({})", base.name()),
        msg_bits,
        rand_bits,
        verifier,
        reward,
        value,
    )?
    .with_nesting_depth(base.nesting_depth() + 1)
    .with_input_check(check))
}

/// Everything `split_at_round` measures. `notes` lists each disagreement;
/// the report passes only when it is empty.
#[derive(Clone, Debug)]
pub struct SplitReport {
    pub pass: bool,
    pub compared_nodes: u64,
    pub prefix_checks: u64,
    pub full_root: Dyadic,
    pub truncated_root: Dyadic,
    pub notes: Vec<String>,
}

/// Truncates `base` at round `i`, paying the oracle-elicited continuation
/// value of the reached prefix as the entire reward, and checks that the
/// truncation solves identically to the full protocol on rounds `1..=i`,
/// that the oracle's claimed expectation equals the solver's value at every
/// rational-reachable boundary prefix, and that the oracle's claimed
/// decision is one the full solve can produce from that prefix.
pub fn split_at_round(
    base: &ProtocolSpec,
    input: &str,
    i: usize,
    cfg: &ExecCfg,
) -> Result<SplitReport> {
    let wrapper = elicit_expectation(base, i)?;
    let e_width = wrapper.msg_bits()[0] - base.msg_bits()[i];
    let p_bits = base
        .value_resolution_bits()
        .expect("checked by elicit_expectation");
    let full = solve_rational(base, input, cfg)?;

    // The one-shot oracle: solve the wrapper on a serialized prefix, read
    // the claimed expectation off the rational first message, and follow
    // one rational branch to the claimed decision.
    let oracle_cache: Arc<Mutex<BTreeMap<String, (Dyadic, String)>>> =
        Arc::new(Mutex::new(BTreeMap::new()));
    let oracle = {
        let wrapper = wrapper.clone();
        let cache = oracle_cache.clone();
        let cfg = *cfg;
        move |prefix_key: &str| -> (Dyadic, String) {
            if let Some(hit) = cache.lock().unwrap().get(prefix_key) {
                return hit.clone();
            }
            let out = solve_rational(&wrapper, prefix_key, &cfg)
                .expect("the wrapper solves wherever the base does");
            let e_star = Dyadic::new(out.root_argmax[0].high(e_width).value(), p_bits);
            let phi = playout_decision(&wrapper, prefix_key, &out);
            let entry = (e_star, phi);
            cache
                .lock()
                .unwrap()
                .insert(prefix_key.to_string(), entry.clone());
            entry
        }
    };

    // The truncated protocol: rounds 1..=i of the base, reward = elicited
    // continuation value of the transcript actually reached.
    let truncated = {
        let b = base.clone();
        let oracle = oracle.clone();
        let verifier: VerifierRule = {
            let b = base.clone();
            Arc::new(move |input, ms, rs| b.verifier_msg(input, ms, rs))
        };
        let reward: RewardRule = Arc::new(move |input, ms, rs| {
            let mut replies = Vec::with_capacity(ms.len());
            for t in 0..ms.len() {
                replies.push(b.verifier_msg(input, &ms[..t + 1], &rs[..t + 1]));
            }
            let prefix = Transcript {
                input: input.to_string(),
                prover: ms.to_vec(),
                verifier: replies,
            };
            oracle(&prefix.to_input_string()).0
        });
        // The truncation only exists to compare values and argmax sets; its
        // transcripts claim nothing on their own.
        let value: ValueRule = Arc::new(|_, _, _| String::new());
        ProtocolSpec::new(
            format!("split[at round {i}]({})", base.name()),
            base.msg_bits()[..i].to_vec(),
            base.rand_bits()[..i].to_vec(),
            verifier,
            reward,
            value,
        )?
    };

    let trunc = solve_rational(&truncated, input, cfg)?;
    let mut notes = Vec::new();
    let mut compared = 0u64;
    for (key, node) in trunc.table.iter() {
        compared += 1;
        match full.table.get(key) {
            None => notes.push(format!(
                "truncation reaches {key:?} but rational full play does not"
            )),
            Some(full_node) => {
                if full_node.value != node.value {
                    notes.push(format!(
                        "value at {key:?}: full {} vs truncated {}",
                        full_node.value, node.value
                    ));
                }
                if key.prover_turn() && full_node.argmax != node.argmax {
                    notes.push(format!(
                        "argmax at {key:?}: full {:?} vs truncated {:?}",
                        full_node.argmax, node.argmax
                    ));
                }
            }
        }
    }

    // Oracle agreement at every rational-reachable boundary prefix.
    let mut prefix_checks = 0u64;
    for (key, node) in full.table.iter() {
        if !(key.prover_turn() && key.prover.len() == i) {
            continue;
        }
        prefix_checks += 1;
        let prefix_key = key.to_transcript(input).to_input_string();
        let (e_star, phi) = oracle(&prefix_key);
        if e_star != node.value {
            notes.push(format!(
                "oracle claims {} at {key:?}, solver value is {}",
                e_star, node.value
            ));
        }
        let direct = decisions_from(base, input, &full, key);
        if !direct.contains(&phi) {
            notes.push(format!(
                "oracle decides {phi:?} at {key:?}, direct play decides {direct:?}"
            ));
        }
    }

    Ok(SplitReport {
        pass: notes.is_empty(),
        compared_nodes: compared,
        prefix_checks,
        full_root: full.root_value,
        truncated_root: trunc.root_value,
        notes,
    })
}

/// Follows one rational branch of a solved protocol (lowest argmax message,
/// lowest reply) to the final round and returns the transcript's claim.
fn playout_decision(spec: &ProtocolSpec, input: &str, out: &SolveOutcome) -> String {
    let mut key = NodeKey::root();
    loop {
        let node = out
            .table
            .get(&key)
            .expect("rational play stays inside the table");
        if key.prover_turn() {
            let m = node.argmax[0];
            key.prover.push(m);
            if key.prover.len() == spec.rounds() {
                return spec.value(input, &key.prover, &key.verifier);
            }
        } else {
            key.verifier.push(node.children[0].0);
        }
    }
}

/// Collects the claims of every rational branch below `start` in a solved
/// table.
fn decisions_from(
    spec: &ProtocolSpec,
    input: &str,
    out: &SolveOutcome,
    start: &NodeKey,
) -> BTreeSet<String> {
    let mut decisions = BTreeSet::new();
    let mut stack = vec![start.clone()];
    while let Some(key) = stack.pop() {
        let node = out
            .table
            .get(&key)
            .expect("rational play stays inside the table");
        if key.prover_turn() {
            for m in &node.argmax {
                let mut next = key.clone();
                next.prover.push(*m);
                if next.prover.len() == spec.rounds() {
                    decisions.insert(spec.value(input, &next.prover, &next.verifier));
                } else {
                    stack.push(next);
                }
            }
        } else {
            for (a, _) in &node.children {
                let mut next = key.clone();
                next.verifier.push(*a);
                stack.push(next);
            }
        }
    }
    decisions
}

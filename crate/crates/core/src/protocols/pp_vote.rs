//! The one-round majority vote. The prover announces a bit, the verifier
//! draws a uniform assignment for the circuit and pays 1 exactly when the
//! announced bit matches the circuit's output on that assignment. Announcing
//! the strict-majority bit is the unique maximizer, so the rational root
//! value is `max(k, 2^n - k) / 2^n` for a circuit with `k` accepting
//! assignments.

use std::sync::Arc;

use crate::circuit::{CountingInstance, CountingMode};
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::exec::ExecCfg;
use crate::protocol::{BitString, ProtocolSpec, RewardRule, ValueRule, VerifierRule};

/// Builds the vote protocol for a strict-majority instance. Fails with
/// `TieNotAllowed` when exactly half the assignments accept, because then
/// both announcements tie and the game decides nothing.
pub fn make_pp_vote(inst: &CountingInstance, cfg: &ExecCfg) -> Result<ProtocolSpec> {
    if inst.mode != CountingMode::Majority {
        return Err(Error::MalformedSpec(format!(
            "the vote game needs a majority instance, got mode {}",
            inst.mode
        )));
    }
    // Surfaces ties (and enumeration-bound violations) before any play.
    inst.membership(cfg)?;
    let n = inst.circuit.n_inputs();
    if n > 63 {
        return Err(Error::WidthOverflow { bits: n });
    }
    let n = n as u8;
    let ev = inst.circuit.evaluator();

    let verifier: VerifierRule = Arc::new(|_, _, _| BitString::empty());
    let reward: RewardRule = Arc::new(move |_, ms, rs| {
        let mut scratch = Vec::new();
        let hit = u64::from(ev.eval(rs[0].value(), &mut scratch));
        if ms[0].value() == hit {
            Dyadic::one()
        } else {
            Dyadic::zero()
        }
    });
    let value: ValueRule = Arc::new(|_, ms, _| ms[0].to_string());

    Ok(
        ProtocolSpec::new(format!("pp-vote(n={n})"), vec![1], vec![n], verifier, reward, value)?
            .with_resolution_bits(0)
            .with_declared_delta(Arc::new(move |_| Dyadic::pow2_inv(n as u32))),
    )
}

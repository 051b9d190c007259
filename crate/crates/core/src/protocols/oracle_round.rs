//! One extra claim round on top of a family of subprotocols. The prover
//! first announces a bit `b`; the verifier samples an index `y`, reveals it,
//! and the pair then plays the `y`-th subprotocol. The payment is half the
//! subprotocol reward plus a bonus `delta/4` when `b` matches the claim the
//! sub-play itself makes. Distorting the sub-play to flip its claim gains at
//! most `delta/4` but loses at least `delta/2`, so rational play keeps every
//! subprotocol honest and `b` equals the majority of the subprotocol
//! decisions over `y`.

use std::sync::Arc;

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::exec::ExecCfg;
use crate::protocol::{ProtocolSpec, RewardRule, ValueRule, VerifierRule};
use crate::solver::verify_protocol;

/// Builds the wrapped protocol from `2^q` subprotocols of identical shape,
/// each with a declared gap bound and an unambiguous rational decision.
/// Fails with `OuterTie` when the decisions split exactly in half.
pub fn pp_oracle_round(inners: &[ProtocolSpec], cfg: &ExecCfg) -> Result<ProtocolSpec> {
    if inners.len() < 2 || !inners.len().is_power_of_two() {
        return Err(Error::MalformedSpec(format!(
            "need a power-of-two family of at least 2 subprotocols, got {}",
            inners.len()
        )));
    }
    let q = inners.len().trailing_zeros() as u8;
    let shape = (inners[0].msg_bits().to_vec(), inners[0].rand_bits().to_vec());
    for inner in inners {
        if (inner.msg_bits(), inner.rand_bits()) != (&shape.0[..], &shape.1[..]) {
            return Err(Error::MalformedSpec(
                "subprotocols must share one message and randomness shape".into(),
            ));
        }
    }

    // Each subprotocol must decide one bit unambiguously under rational
    // play; the majority of those bits is what the outer claim is about.
    let mut ones = 0u64;
    let mut delta_star: Option<Dyadic> = None;
    for (y, inner) in inners.iter().enumerate() {
        let declared = inner
            .declared_delta("")
            .ok_or_else(|| Error::MissingDelta(inner.name().to_string()))?;
        if declared.is_zero() || declared.is_negative() {
            return Err(Error::MalformedSpec(format!(
                "subprotocol {y} declares a non-positive gap bound"
            )));
        }
        delta_star = Some(match delta_star {
            Some(d) if d <= declared => d,
            _ => declared,
        });
        // The decision is read off the rational branches themselves; the
        // truth argument is only a comparison value here.
        let report = verify_protocol(inner, "", "0", cfg)?;
        if report.decisions.len() != 1 {
            return Err(Error::MalformedSpec(format!(
                "subprotocol {y} has an ambiguous rational decision"
            )));
        }
        match report.decisions.iter().next().unwrap().as_str() {
            "0" => {}
            "1" => ones += 1,
            other => {
                return Err(Error::MalformedSpec(format!(
                    "subprotocol {y} decides {other:?}, not a bit"
                )))
            }
        }
    }
    let half = inners.len() as u64 / 2;
    if ones == half {
        return Err(Error::OuterTie);
    }
    let delta_star = delta_star.expect("at least two subprotocols");

    let mut msg_bits = vec![1u8];
    msg_bits.extend_from_slice(&shape.0);
    let mut rand_bits = vec![q];
    rand_bits.extend_from_slice(&shape.1);
    let k_in = shape.0.len();

    let family: Arc<Vec<ProtocolSpec>> = Arc::new(inners.to_vec());

    let fam = family.clone();
    let verifier: VerifierRule = Arc::new(move |_, ms, rs| {
        if ms.len() == 1 {
            // Reveal the sampled index so the prover knows which
            // subprotocol it is playing.
            rs[0]
        } else {
            let inner = &fam[rs[0].value() as usize];
            inner.verifier_msg("", &ms[1..], &rs[1..])
        }
    });

    let fam = family.clone();
    let bonus = delta_star.mul_pow2(-2);
    let reward: RewardRule = Arc::new(move |_, ms, rs| {
        let inner = &fam[rs[0].value() as usize];
        let sub_ms = &ms[1..];
        let sub_rs = &rs[1..];
        let r = inner.reward("", sub_ms, sub_rs);
        let mut replies = Vec::with_capacity(k_in);
        for t in 0..k_in.saturating_sub(1) {
            replies.push(inner.verifier_msg("", &sub_ms[..t + 1], &sub_rs[..t + 1]));
        }
        let claim = inner.value("", sub_ms, &replies);
        let hit = (claim == "1") == (ms[0].value() == 1);
        let mut total = r.mul_pow2(-1);
        if hit {
            total = &total + &bonus;
        }
        total
    });

    let value: ValueRule = Arc::new(|_, ms, _| ms[0].to_string());

    let mut spec = ProtocolSpec::new(
        format!("pp-oracle-round(q={q}, inner={})", inners[0].name()),
        msg_bits,
        rand_bits,
        verifier,
        reward,
        value,
    )?
    .with_nesting_depth(inners.iter().map(|i| i.nesting_depth()).max().unwrap_or(0));

    if let Some(res_in) = inners
        .iter()
        .map(|i| i.reward_resolution_bits())
        .collect::<Option<Vec<_>>>()
        .map(|v| v.into_iter().max().unwrap_or(0))
    {
        spec = spec.with_resolution_bits((1 + res_in).max(2 + delta_star.exponent()));
    }
    let d = delta_star;
    Ok(spec.with_declared_delta(Arc::new(move |_| d.mul_pow2(-(q as i64 + 1)))))
}

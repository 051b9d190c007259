//! Collapsing a graded reward to a single bit. If every reward of a protocol
//! is a multiple of `2^-p`, the verifier can draw `p` extra uniform bits `u`
//! in the final round and pay the single bit `I{u/2^p < R}`. The conditional
//! expectation of that bit is exactly `R` at every node, so values, argmax
//! sets and gaps are all unchanged while the paid reward becomes 0/1, and
//! neither the round count nor the prover's message widths grow.

use std::sync::Arc;

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::protocol::{BitString, ProtocolSpec, RewardRule, ValueRule, VerifierRule};

/// Rebuilds `base` with the payment collapsed to one bit. Requires `base` to
/// declare its reward grid; solving `base` first proves the declaration (the
/// solver rejects any off-grid reward it enumerates).
pub fn one_bit_transform(base: &ProtocolSpec) -> Result<ProtocolSpec> {
    let p = base.reward_resolution_bits().ok_or_else(|| {
        Error::MalformedSpec(format!(
            "{} declares no reward grid to collapse",
            base.name()
        ))
    })?;
    let k = base.rounds();
    let last = base.rand_bits()[k - 1] as u32;
    if last + p > 63 {
        return Err(Error::WidthOverflow { bits: last + p });
    }
    let p = p as u8;
    let orig_last = last as u8;
    let mut rand_bits = base.rand_bits().to_vec();
    rand_bits[k - 1] += p;

    // The auxiliary bits ride in the low end of the final draw; every base
    // rule sees the draw with them stripped.
    let strip = move |rs: &[BitString]| -> Vec<BitString> {
        let mut out = rs.to_vec();
        if out.len() == k {
            out[k - 1] = out[k - 1].high(orig_last);
        }
        out
    };

    let b = base.clone();
    let verifier: VerifierRule = Arc::new(move |input, ms, rs| {
        if rs.len() == k {
            b.verifier_msg(input, ms, &strip(rs))
        } else {
            b.verifier_msg(input, ms, rs)
        }
    });
    let b = base.clone();
    let reward: RewardRule = Arc::new(move |input, ms, rs| {
        let u = rs[k - 1].low(p).value();
        let r = b.reward(input, ms, &strip(rs));
        if Dyadic::new(u, p as u32) < r {
            Dyadic::one()
        } else {
            Dyadic::zero()
        }
    });
    let b = base.clone();
    let value: ValueRule = Arc::new(move |input, ms, vs| b.value(input, ms, vs));

    let mut spec = ProtocolSpec::new(
        format!("one-bit({})", base.name()),
        base.msg_bits().to_vec(),
        rand_bits,
        verifier,
        reward,
        value,
    )?
    .with_resolution_bits(0)
    .with_nesting_depth(base.nesting_depth());
    if base.has_declared_delta() {
        let b = base.clone();
        spec = spec.with_declared_delta(Arc::new(move |input| {
            b.declared_delta(input).expect("declaration checked above")
        }));
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{CountingInstance, CountingMode};
    use crate::exec::ExecCfg;
    use crate::protocols::{make_brier_count, make_pp_vote};
    use crate::solver::solve_rational;

    fn constant_reward_spec(r: Dyadic, p: u32) -> ProtocolSpec {
        let verifier: VerifierRule = Arc::new(|_, _, _| BitString::empty());
        let reward: RewardRule = Arc::new(move |_, _, _| r.clone());
        let value: ValueRule = Arc::new(|_, _, _| "0".into());
        ProtocolSpec::new("const", vec![1], vec![0], verifier, reward, value)
            .unwrap()
            .with_resolution_bits(p)
    }

    #[test]
    fn constant_five_eighths_pays_on_exactly_five_outcomes() {
        let spec = one_bit_transform(&constant_reward_spec(Dyadic::new(5, 3), 3)).unwrap();
        assert_eq!(spec.rand_bits(), &[3]);
        let mut paid = 0;
        for u in BitString::all(3) {
            let r = spec.reward("", &[BitString::new(0, 1)], &[u]);
            assert!(r.is_zero() || r == Dyadic::one());
            if r == Dyadic::one() {
                paid += 1;
            }
        }
        assert_eq!(paid, 5);
        let out = solve_rational(&spec, "", &ExecCfg::default()).unwrap();
        assert_eq!(out.root_value, Dyadic::new(5, 3));
    }

    #[test]
    fn zero_reward_stays_identically_zero() {
        let spec = one_bit_transform(&constant_reward_spec(Dyadic::zero(), 3)).unwrap();
        for u in BitString::all(3) {
            assert!(spec.reward("", &[BitString::new(1, 1)], &[u]).is_zero());
        }
    }

    #[test]
    fn vote_and_count_protocols_keep_their_tables() {
        let cfg = ExecCfg::default();
        let vote = make_pp_vote(
            &CountingInstance::new(
                "inputs 3\ng1 = AND x2 x3\ng2 = OR x1 g1\noutput g2".parse().unwrap(),
                CountingMode::Majority,
            ),
            &cfg,
        )
        .unwrap();
        let count = make_brier_count(&CountingInstance::new(
            "inputs 2\ng1 = OR x1 x2\noutput g1".parse().unwrap(),
            CountingMode::Parity,
        ))
        .unwrap();
        for base in [vote, count] {
            let transformed = one_bit_transform(&base).unwrap();
            assert_eq!(base.msg_bits(), transformed.msg_bits());
            assert_eq!(base.rounds(), transformed.rounds());
            let before = solve_rational(&base, "", &cfg).unwrap();
            let after = solve_rational(&transformed, "", &cfg).unwrap();
            assert_eq!(before.root_value, after.root_value, "{}", base.name());
            assert_eq!(before.root_argmax, after.root_argmax);
            assert_eq!(before.min_gap, after.min_gap);
            // Node-by-node: same keys, same values, same argmax sets.
            assert_eq!(before.node_count, after.node_count);
            for ((ka, na), (kb, nb)) in before.table.iter().zip(after.table.iter()) {
                assert_eq!(ka, kb);
                assert_eq!(na.value, nb.value);
                assert_eq!(na.argmax, nb.argmax);
            }
        }
    }

    #[test]
    fn missing_grid_declaration_is_an_error() {
        let verifier: VerifierRule = Arc::new(|_, _, _| BitString::empty());
        let reward: RewardRule = Arc::new(|_, _, _| Dyadic::one());
        let value: ValueRule = Arc::new(|_, _, _| "0".into());
        let spec =
            ProtocolSpec::new("no-grid", vec![1], vec![1], verifier, reward, value).unwrap();
        assert!(matches!(
            one_bit_transform(&spec),
            Err(Error::MalformedSpec(_))
        ));
    }
}

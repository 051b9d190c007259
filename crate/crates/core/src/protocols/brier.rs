//! The one-round count claim under a quadratic score. The prover claims a
//! count `c` for an `n`-input circuit; the verifier draws one assignment,
//! evaluates the output bit `b`, and pays `1 - (c/2^n - b)^2`. The score is
//! strictly proper: the expected reward `1 - q^2 + (2q - 1) p` with
//! `q = c/2^n` and `p = k/2^n` is uniquely maximized at the true count
//! `c = k`, and moving the claim to `c'` costs exactly `((k - c')/2^n)^2`.

use std::sync::Arc;

use crate::circuit::{CountingInstance, CountingMode};
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::protocol::{BitString, ProtocolSpec, RewardRule, ValueRule, VerifierRule};

/// Builds the count-claim protocol. The claim field is `n + 1` bits so the
/// full count `2^n` is expressible; claims above `2^n` are malformed and pay
/// zero. In parity mode the transcript's value is the claim's low bit, in
/// count mode the claim itself.
pub fn make_brier_count(inst: &CountingInstance) -> Result<ProtocolSpec> {
    if inst.mode == CountingMode::Majority {
        return Err(Error::MalformedSpec(
            "the count-claim game answers count or parity questions, not majority".into(),
        ));
    }
    let n = inst.circuit.n_inputs();
    if n > 62 {
        return Err(Error::WidthOverflow { bits: n + 1 });
    }
    let n = n as u8;
    let ev = inst.circuit.evaluator();
    let mode = inst.mode;

    let verifier: VerifierRule = Arc::new(|_, _, _| BitString::empty());
    let reward: RewardRule = Arc::new(move |_, ms, rs| {
        let c = ms[0].value();
        if c > 1 << n {
            return Dyadic::zero();
        }
        let mut scratch = Vec::new();
        let b = i64::from(ev.eval(rs[0].value(), &mut scratch));
        let q = Dyadic::new(c, n as u32);
        &Dyadic::one() - &(&q - &Dyadic::from_int(b)).square()
    });
    let value: ValueRule = Arc::new(move |_, ms, _| match mode {
        CountingMode::Parity => BitString::bit_str(ms[0].value()),
        _ => ms[0].value().to_string(),
    });

    Ok(ProtocolSpec::new(
        format!("brier-count(n={n}, {mode})"),
        vec![n + 1],
        vec![n],
        verifier,
        reward,
        value,
    )?
    .with_resolution_bits(2 * n as u32)
    .with_declared_delta(Arc::new(move |_| Dyadic::pow2_inv(2 * n as u32))))
}

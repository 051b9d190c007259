//! Exact comparison of two acceptance expectations. The verifier samples an
//! input for each circuit independently, accepts outright when the second
//! output beats the first, rejects when it loses, and flips a fair coin on a
//! tie. Enumerating every `(r, r', coin)` triple gives the acceptance
//! probability `1/2 + (E1 - E0)/2` exactly, which is at least `1/2` if and
//! only if the first expectation does not exceed the second.

use crate::circuit::BooleanCircuit;
use crate::dyadic::Dyadic;
use crate::error::Result;
use crate::exec::ExecCfg;

/// Exhaustively computes the acceptance probability of the comparison game
/// between `c0` and `c1`.
pub fn compare_expectations_prob(
    c0: &BooleanCircuit,
    c1: &BooleanCircuit,
    cfg: &ExecCfg,
) -> Result<Dyadic> {
    let n0 = c0.n_inputs();
    let n1 = c1.n_inputs();
    cfg.check(
        1u128
            .checked_shl(n0 + n1 + 1)
            .unwrap_or(u128::MAX),
    )?;
    let e0 = c0.evaluator();
    let e1 = c1.evaluator();
    let mut scratch = Vec::new();
    let outs0: Vec<bool> = (0..1u64 << n0).map(|r| e0.eval(r, &mut scratch)).collect();
    let outs1: Vec<bool> = (0..1u64 << n1).map(|r| e1.eval(r, &mut scratch)).collect();

    // Two acceptance units per decisive pair (both coin outcomes agree),
    // one per tied pair (one coin outcome accepts).
    let mut acceptance_units: u64 = 0;
    for &b0 in &outs0 {
        for &b1 in &outs1 {
            if b1 && !b0 {
                acceptance_units += 2;
            } else if b0 == b1 {
                acceptance_units += 1;
            }
        }
    }
    Ok(Dyadic::new(acceptance_units, n0 + n1 + 1))
}

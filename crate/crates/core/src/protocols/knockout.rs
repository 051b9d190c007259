//! Selecting an optimal first message by knockout tournament. For a
//! one-round protocol every message's expected reward is computed exactly,
//! then messages meet in a single-elimination bracket in numeric order. The
//! comparator asks "is the left expectation at most the right?" and advances
//! the right message on a tie, so the winner always carries the maximum
//! expectation and an all-tie field crowns the highest index.

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::exec::{map_chunks, ExecCfg};
use crate::protocol::{BitString, ProtocolSpec};

/// Runs the tournament and returns the winning message, which is always a
/// member of the root argmax set.
pub fn knockout_argmax(spec: &ProtocolSpec, input: &str, cfg: &ExecCfg) -> Result<BitString> {
    if spec.rounds() != 1 {
        return Err(Error::MalformedSpec(format!(
            "the knockout tournament plays one-round protocols, {} has {} rounds",
            spec.name(),
            spec.rounds()
        )));
    }
    spec.check_input(input)?;
    cfg.check(spec.enumeration_size())?;
    let w = spec.msg_bits()[0];
    let rb = spec.rand_bits()[0];

    // Expected reward of every message, exact, in message order.
    let chunks = map_chunks(1 << w, cfg.workers, |range| {
        let mut values = Vec::with_capacity((range.end - range.start) as usize);
        for v in range {
            let m = BitString::new(v, w);
            let mut total = Dyadic::zero();
            for r in BitString::all(rb) {
                total = &total + &spec.reward(input, &[m], &[r]);
            }
            values.push(total.mul_pow2(-(rb as i64)));
        }
        values
    });
    let expectations: Vec<Dyadic> = chunks.into_iter().flatten().collect();

    let mut field: Vec<u64> = (0..1u64 << w).collect();
    while field.len() > 1 {
        field = field
            .chunks(2)
            .map(|pair| {
                let (a, b) = (pair[0], pair[1]);
                if expectations[a as usize] <= expectations[b as usize] {
                    b
                } else {
                    a
                }
            })
            .collect();
    }
    Ok(BitString::new(field[0], w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{CountingInstance, CountingMode};
    use crate::protocols::make_brier_count;
    use crate::solver::solve_rational;
    use std::sync::Arc;

    #[test]
    fn count_claim_tournament_finds_the_true_count() {
        let spec = make_brier_count(&CountingInstance::new(
            "inputs 2\ng1 = AND x1 x2\noutput g1".parse().unwrap(),
            CountingMode::Count,
        ))
        .unwrap();
        let cfg = ExecCfg::default();
        let winner = knockout_argmax(&spec, "", &cfg).unwrap();
        assert_eq!(winner, BitString::new(1, 3));
        let out = solve_rational(&spec, "", &cfg).unwrap();
        assert!(out.root_argmax.contains(&winner));
    }

    #[test]
    fn single_message_wins_by_default() {
        let spec = ProtocolSpec::new(
            "lonely",
            vec![0],
            vec![1],
            Arc::new(|_, _, _| BitString::empty()),
            Arc::new(|_, _, _| Dyadic::one()),
            Arc::new(|_, _, _| "0".into()),
        )
        .unwrap();
        let winner = knockout_argmax(&spec, "", &ExecCfg::default()).unwrap();
        assert_eq!(winner, BitString::empty());
    }

    #[test]
    fn all_ties_crown_the_highest_index() {
        let spec = ProtocolSpec::new(
            "flat",
            vec![3],
            vec![2],
            Arc::new(|_, _, _| BitString::empty()),
            Arc::new(|_, _, _| Dyadic::new(1, 1)),
            Arc::new(|_, ms: &[BitString], _| ms[0].to_string()),
        )
        .unwrap();
        let cfg = ExecCfg::default();
        let winner = knockout_argmax(&spec, "", &cfg).unwrap();
        assert_eq!(winner, BitString::new(7, 3));
        let out = solve_rational(&spec, "", &cfg).unwrap();
        assert_eq!(out.root_argmax.len(), 8, "every message ties");
        assert!(out.root_argmax.contains(&winner));
    }

    #[test]
    fn multi_round_protocols_are_rejected() {
        let spec = ProtocolSpec::new(
            "two-round",
            vec![1, 1],
            vec![1, 1],
            Arc::new(|_, _, _| BitString::empty()),
            Arc::new(|_, _, _| Dyadic::zero()),
            Arc::new(|_, _, _| "0".into()),
        )
        .unwrap();
        assert!(matches!(
            knockout_argmax(&spec, "", &ExecCfg::default()),
            Err(Error::MalformedSpec(_))
        ));
    }
}

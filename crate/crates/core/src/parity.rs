//! Sampler protocols and the parity audit. A sampler protocol is a single
//! exchange against a verifier who holds `s` uniform bits and `d` coin flips
//! that each come up 1 with probability `p = k/2^n`: the prover sends one
//! message `m`, the verifier pays `R(m, a, r)`, and `m` carries a one-bit
//! claim about the parity of `k`. The expected reward of each message is a
//! polynomial `Q_m(p)` of degree at most `d`, expanded here with exact
//! dyadic coefficients. The audit asks, at every grid point `k`, whether
//! every reward-maximizing message claims `k`'s parity; low-degree reward
//! polynomials cannot alternate often enough to track parity across the
//! grid once the message budget shrinks, and the audit exhibits that
//! failure concretely.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::dyadic::{Dyadic, DyadicPolynomial};
use crate::error::{Error, Result};
use crate::exec::{map_chunks, ExecCfg};

/// Pays a message given the uniform draw `a` (width `s`) and the Bernoulli
/// draw `r` (width `d`), both passed as raw bit values.
pub type SamplerReward = Arc<dyn Fn(u64, u64, u64) -> Dyadic + Send + Sync>;

/// The one-bit claim a message carries.
pub type SamplerClaim = Arc<dyn Fn(u64) -> bool + Send + Sync>;

/// A one-message protocol against a verifier with `s` uniform bits and `d`
/// independent Bernoulli(`k/2^n`) bits. The audit grid runs over
/// `k = 0, 1, ..., 2^n - 1`.
#[derive(Clone)]
pub struct SamplerProtocol {
    name: String,
    n: u32,
    msg_bits: u8,
    s: u8,
    d: u8,
    reward: SamplerReward,
    claim: SamplerClaim,
}

impl SamplerProtocol {
    pub fn new(
        name: impl Into<String>,
        n: u32,
        msg_bits: u8,
        s: u8,
        d: u8,
        reward: SamplerReward,
        claim: SamplerClaim,
    ) -> Result<Self> {
        if msg_bits > 63 || s > 63 || d > 63 {
            return Err(Error::WidthOverflow {
                bits: msg_bits.max(s).max(d) as u32,
            });
        }
        if n > 63 {
            return Err(Error::WidthOverflow { bits: n });
        }
        Ok(SamplerProtocol {
            name: name.into(),
            n,
            msg_bits,
            s,
            d,
            reward,
            claim,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn msg_bits(&self) -> u8 {
        self.msg_bits
    }

    pub fn sample_bits(&self) -> u8 {
        self.d
    }

    pub fn uniform_bits(&self) -> u8 {
        self.s
    }

    pub fn reward(&self, m: u64, a: u64, r: u64) -> Dyadic {
        (self.reward)(m, a, r)
    }

    pub fn claim(&self, m: u64) -> bool {
        (self.claim)(m)
    }

    /// Grid points audited: `k` ranges over `0..2^n`.
    pub fn grid_size(&self) -> u64 {
        1 << self.n
    }
}

/// Expands the expected reward of message `m` as an exact polynomial in the
/// Bernoulli parameter `p`,
///
/// ```text
///     Q_m(p) = 2^-s * sum over a, r of R(m, a, r) * p^|r| * (1-p)^(d-|r|),
/// ```
///
/// of degree at most `d`. Every reward the sum touches must lie in [0, 1].
pub fn bernoulli_poly(sp: &SamplerProtocol, m: u64, cfg: &ExecCfg) -> Result<DyadicPolynomial> {
    cfg.check(1u128 << (sp.s as u32 + sp.d as u32))?;
    let d = sp.d as usize;
    // Group the enumeration by the number of ones in r: only the weight
    // class of r affects the polynomial basis it multiplies.
    let mut class_sums = vec![Dyadic::zero(); d + 1];
    for a in 0..1u64 << sp.s {
        for r in 0..1u64 << sp.d {
            let pay = sp.reward(m, a, r);
            if pay.is_negative() || !pay.in_unit_interval() {
                return Err(Error::RewardOutOfRange {
                    context: format!("{} message {}", sp.name, m),
                    value: pay.to_string(),
                });
            }
            let class = r.count_ones() as usize;
            let bumped = &class_sums[class] + &pay;
            class_sums[class] = bumped;
        }
    }

    let p = DyadicPolynomial::new(vec![Dyadic::zero(), Dyadic::one()]);
    let q = DyadicPolynomial::new(vec![Dyadic::one(), -&Dyadic::one()]);
    let mut poly = DyadicPolynomial::zero();
    let mut p_pow = DyadicPolynomial::constant(Dyadic::one());
    for (w, sum) in class_sums.iter().enumerate() {
        if !sum.is_zero() {
            let mut basis = p_pow.clone();
            for _ in w..d {
                basis = basis.mul(&q);
            }
            poly = poly.add(&basis.scale(&sum.mul_pow2(-(sp.s as i64))));
        }
        p_pow = p_pow.mul(&p);
    }
    Ok(poly)
}

/// Expected reward of message `m` at `p = k/2^n`, by direct weighted
/// enumeration rather than through the polynomial. `parity_audit` uses the
/// polynomial route; this is the independent slow path for cross-checks.
pub fn expected_reward_at(sp: &SamplerProtocol, m: u64, k: u64) -> Dyadic {
    let p = Dyadic::new(k, sp.n);
    let one_minus = &Dyadic::one() - &p;
    let mut total = Dyadic::zero();
    for a in 0..1u64 << sp.s {
        for r in 0..1u64 << sp.d {
            let ones = r.count_ones();
            let weight = &p.pow(ones) * &one_minus.pow(sp.d as u32 - ones);
            total = &total + &(&sp.reward(m, a, r) * &weight);
        }
    }
    total.mul_pow2(-(sp.s as i64))
}

/// One audited grid point where rational play can misreport the parity:
/// some reward-maximizing message claims `wrong_bit` even though `k`'s
/// parity is the opposite.
#[derive(Clone, Debug, Serialize)]
pub struct ParityFailure {
    pub k: u64,
    /// Every reward-maximizing message at this grid point.
    pub argmax: Vec<u64>,
    /// The incorrect parity bit some maximizer claims: `1 - (k mod 2)`.
    pub wrong_bit: u8,
}

/// What the audit found: the reward polynomial of every message and each
/// grid point where an optimal message misreports the parity.
#[derive(Clone, Debug)]
pub struct AuditReport {
    pub name: String,
    pub n: u32,
    pub msg_bits: u8,
    pub failures: Vec<ParityFailure>,
    pub polynomials: BTreeMap<u64, DyadicPolynomial>,
}

impl AuditReport {
    pub fn passes(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Audits every grid point `k` in `0..2^n`: expands each message's reward
/// polynomial once, evaluates all of them at `p = k/2^n`, and records a
/// failure whenever some maximizing message claims the wrong parity.
pub fn parity_audit(sp: &SamplerProtocol, cfg: &ExecCfg) -> Result<AuditReport> {
    let messages = 1u64 << sp.msg_bits;
    cfg.check((messages as u128) << (sp.s as u32 + sp.d as u32))?;
    cfg.check((sp.grid_size() as u128) * messages as u128)?;

    let poly_chunks = map_chunks(messages, cfg.workers, |range| {
        range
            .map(|m| bernoulli_poly(sp, m, cfg))
            .collect::<Result<Vec<_>>>()
    });
    let mut polys = Vec::with_capacity(messages as usize);
    for chunk in poly_chunks {
        polys.extend(chunk?);
    }

    let failure_chunks = map_chunks(sp.grid_size(), cfg.workers, |range| {
        let mut failures = Vec::new();
        for k in range {
            let p = Dyadic::new(k, sp.n);
            let values: Vec<Dyadic> = polys.iter().map(|q| q.eval(&p)).collect();
            let best = values.iter().max().expect("at least one message");
            let argmax: Vec<u64> = (0..messages).filter(|&m| &values[m as usize] == best).collect();
            let parity = k & 1 == 1;
            if argmax.iter().any(|&m| sp.claim(m) != parity) {
                failures.push(ParityFailure {
                    k,
                    argmax,
                    wrong_bit: u8::from(!parity),
                });
            }
        }
        failures
    });

    let mut failures = Vec::new();
    for chunk in failure_chunks {
        failures.extend(chunk);
    }
    Ok(AuditReport {
        name: sp.name.clone(),
        n: sp.n,
        msg_bits: sp.msg_bits,
        failures,
        polynomials: (0..messages).zip(polys).collect(),
    })
}

/// Counts sign changes of `Q_{m0} - Q_{m1}` across the grid `k/2^n` for
/// `k` in `0..2^n`, skipping exact zeros. Unless the two polynomials are
/// identical, the count is at most the degree of the difference, hence at
/// most `d`.
pub fn sign_alternations(sp: &SamplerProtocol, m0: u64, m1: u64, cfg: &ExecCfg) -> Result<u32> {
    let diff = bernoulli_poly(sp, m0, cfg)?.sub(&bernoulli_poly(sp, m1, cfg)?);
    let mut changes = 0;
    let mut last = 0i8;
    for k in 0..sp.grid_size() {
        let v = diff.eval(&Dyadic::new(k, sp.n));
        let sign = if v.is_zero() {
            0
        } else if v.is_negative() {
            -1
        } else {
            1
        };
        if sign != 0 {
            if last != 0 && sign != last {
                changes += 1;
            }
            last = sign;
        }
    }
    Ok(changes)
}

/// The quadratic-score counting sampler with full-width messages: `m`
/// claims the count itself on the grid `m/2^n` (claims above `2^n` pay
/// nothing), the verifier flips one Bernoulli bit, and the payment is
/// `1 - (claim - flip)^2`. The parity claim is the low bit of `m`.
pub fn brier_full(n: u32) -> Result<SamplerProtocol> {
    let width = (n + 1).try_into().map_err(|_| Error::WidthOverflow { bits: n + 1 })?;
    let reward: SamplerReward = Arc::new(move |m, _, r| {
        if m > 1 << n {
            return Dyadic::zero();
        }
        let gap = &Dyadic::new(m, n) - &Dyadic::from_int(r as i64);
        &Dyadic::one() - &gap.square()
    });
    SamplerProtocol::new(
        format!("brier-sampler(n={n})"),
        n,
        width,
        0,
        1,
        reward,
        Arc::new(|m| m & 1 == 1),
    )
}

/// The same quadratic score with the message budget cut to `width` bits:
/// `m` can only claim `m/2^width`. Neighboring grid points then share their
/// maximizing message, so its parity bit must be wrong for one of them.
pub fn brier_truncated(n: u32, width: u8) -> Result<SamplerProtocol> {
    if width == 0 {
        return Err(Error::MalformedSpec(
            "a truncated claim needs at least one message bit".into(),
        ));
    }
    let reward: SamplerReward = Arc::new(move |m, _, r| {
        let gap = &Dyadic::new(m, width as u32) - &Dyadic::from_int(r as i64);
        &Dyadic::one() - &gap.square()
    });
    SamplerProtocol::new(
        format!("brier-sampler(n={n}, width={width})"),
        n,
        width,
        0,
        1,
        reward,
        Arc::new(|m| m & 1 == 1),
    )
}

/// A degenerate sampler whose reward ignores the coin flips entirely and
/// whose every message claims the same fixed bit. Every grid point whose
/// parity differs from that bit is a failure: exactly half the grid.
pub fn constant_claim(n: u32, msg_bits: u8, bit: bool) -> Result<SamplerProtocol> {
    SamplerProtocol::new(
        format!("constant-claim(n={n}, bit={})", u8::from(bit)),
        n,
        msg_bits,
        0,
        0,
        Arc::new(|_, _, _| Dyadic::one()),
        Arc::new(move |_| bit),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> ExecCfg {
        ExecCfg::default()
    }

    #[test]
    fn a_single_bernoulli_bit_expands_to_p() {
        let sp = SamplerProtocol::new(
            "pass-through",
            2,
            1,
            0,
            1,
            Arc::new(|_, _, r| Dyadic::from_int(r as i64)),
            Arc::new(|m| m == 1),
        )
        .unwrap();
        let q = bernoulli_poly(&sp, 0, &cfg()).unwrap();
        assert_eq!(
            q,
            DyadicPolynomial::new(vec![Dyadic::zero(), Dyadic::one()])
        );
    }

    #[test]
    fn an_equality_test_on_two_bits_expands_to_the_known_quadratic() {
        let sp = SamplerProtocol::new(
            "agreement",
            2,
            1,
            0,
            2,
            Arc::new(|_, _, r| Dyadic::from_int(i64::from(r == 0 || r == 3))),
            Arc::new(|m| m == 1),
        )
        .unwrap();
        // p^2 + (1-p)^2 = 1 - 2p + 2p^2.
        let q = bernoulli_poly(&sp, 0, &cfg()).unwrap();
        assert_eq!(
            q,
            DyadicPolynomial::new(vec![
                Dyadic::one(),
                Dyadic::from_int(-2),
                Dyadic::from_int(2)
            ])
        );
        assert_eq!(q.degree(), Some(2));
    }

    #[test]
    fn the_counting_sampler_matches_its_closed_form() {
        let n = 3;
        let sp = brier_full(n).unwrap();
        for c in 0..=1u64 << n {
            let q = bernoulli_poly(&sp, c, &cfg()).unwrap();
            let claim = Dyadic::new(c, n);
            let constant = &Dyadic::one() - &claim.square();
            let slope = &claim.mul_pow2(1) - &Dyadic::one();
            assert_eq!(
                q,
                DyadicPolynomial::new(vec![constant, slope]),
                "claim {c}"
            );
        }
        // Claims above the grid pay nothing and expand to the zero
        // polynomial.
        let q = bernoulli_poly(&sp, (1 << n) + 1, &cfg()).unwrap();
        assert!(q.is_zero());
    }

    #[test]
    fn polynomials_agree_with_direct_enumeration_on_the_grid() {
        let sp = brier_truncated(4, 2).unwrap();
        for m in 0..1u64 << 2 {
            let q = bernoulli_poly(&sp, m, &cfg()).unwrap();
            for k in 0..sp.grid_size() {
                assert_eq!(
                    q.eval(&Dyadic::new(k, 4)),
                    expected_reward_at(&sp, m, k),
                    "message {m} at k={k}"
                );
            }
        }
    }

    #[test]
    fn full_width_counting_audits_clean() {
        for n in 1..=5 {
            let report = parity_audit(&brier_full(n).unwrap(), &cfg()).unwrap();
            assert!(report.passes(), "n={n}: {:?}", report.failures);
            assert_eq!(report.polynomials.len(), 2 << n);
        }
    }

    #[test]
    fn a_halved_message_budget_fails_the_audit() {
        let report = parity_audit(&brier_truncated(8, 4).unwrap(), &cfg()).unwrap();
        assert!(!report.passes());
        // p = 1/256 sits closer to claim 0/16 than to 1/16, so the unique
        // maximizer at k = 1 claims even parity.
        let first = &report.failures[0];
        assert_eq!(first.k, 1);
        assert_eq!(first.argmax, vec![0]);
        assert_eq!(first.wrong_bit, 0);
        let ks: Vec<u64> = report.failures.iter().map(|f| f.k).collect();
        let mut sorted = ks.clone();
        sorted.sort_unstable();
        assert_eq!(ks, sorted, "failures arrive in grid order");
    }

    #[test]
    fn a_coin_blind_sampler_fails_on_exactly_half_the_grid() {
        let n = 4;
        let report = parity_audit(&constant_claim(n, 2, false).unwrap(), &cfg()).unwrap();
        assert_eq!(report.failures.len(), 1 << (n - 1));
        assert!(report.failures.iter().all(|f| f.k & 1 == 1));
        // Every message is maximizing when the reward is constant.
        assert!(report.failures.iter().all(|f| f.argmax.len() == 4));
    }

    #[test]
    fn alternation_counts_match_the_crossing_geometry() {
        let sp = brier_full(3).unwrap();
        assert_eq!(sign_alternations(&sp, 2, 2, &cfg()).unwrap(), 0);
        // Two distinct lines cross at most once.
        assert_eq!(sign_alternations(&sp, 2, 5, &cfg()).unwrap(), 1);
        let deg = sp.sample_bits() as u32;
        for m0 in 0..1u64 << sp.msg_bits() {
            for m1 in 0..m0 {
                let a = sign_alternations(&sp, m0, m1, &cfg()).unwrap();
                let q0 = bernoulli_poly(&sp, m0, &cfg()).unwrap();
                let q1 = bernoulli_poly(&sp, m1, &cfg()).unwrap();
                if q0 != q1 {
                    assert!(a <= deg, "{m0} vs {m1}: {a} alternations");
                }
            }
        }
    }

    #[test]
    fn audits_are_worker_count_independent() {
        let sp = brier_truncated(6, 3).unwrap();
        let lone = parity_audit(&sp, &ExecCfg::default()).unwrap();
        let pooled = parity_audit(&sp, &ExecCfg::with_workers(4)).unwrap();
        assert_eq!(lone.failures.len(), pooled.failures.len());
        for (a, b) in lone.failures.iter().zip(&pooled.failures) {
            assert_eq!(a.k, b.k);
            assert_eq!(a.argmax, b.argmax);
        }
        assert_eq!(lone.polynomials, pooled.polynomials);
    }

    #[test]
    fn out_of_range_rewards_are_refused() {
        let sp = SamplerProtocol::new(
            "overpaying",
            2,
            1,
            0,
            1,
            Arc::new(|_, _, _| Dyadic::from_int(2)),
            Arc::new(|_| false),
        )
        .unwrap();
        assert!(matches!(
            bernoulli_poly(&sp, 0, &cfg()),
            Err(Error::RewardOutOfRange { .. })
        ));
    }

    proptest! {
        /// The expansion and the direct weighted enumeration are two
        /// independent routes to the same expected reward; they must agree
        /// at every grid point for any reward table.
        #[test]
        fn expansion_agrees_with_enumeration(
            table in proptest::collection::vec(0u64..=16, 32),
            d in 0u8..=3,
            s in 0u8..=2,
        ) {
            let table = std::sync::Arc::new(
                table.into_iter().map(|v| Dyadic::new(v, 4)).collect::<Vec<_>>(),
            );
            let lookup = table.clone();
            let sp = SamplerProtocol::new(
                "random-table",
                3,
                1,
                s,
                d,
                Arc::new(move |m, a, r| {
                    let idx = (m ^ (a << 1) ^ (r << 2)) as usize % lookup.len();
                    lookup[idx].clone()
                }),
                Arc::new(|m| m == 1),
            )
            .unwrap();
            for m in 0..2 {
                let q = bernoulli_poly(&sp, m, &cfg()).unwrap();
                prop_assert!(q.degree().unwrap_or(0) <= d as usize);
                for k in 0..sp.grid_size() {
                    prop_assert_eq!(
                        q.eval(&Dyadic::new(k, 3)),
                        expected_reward_at(&sp, m, k)
                    );
                }
            }
        }
    }
}

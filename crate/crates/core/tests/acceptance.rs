//! Acceptance gate for the laboratory. Each test covers one shipping
//! criterion, checks it against an independent oracle (brute-force counts,
//! closed forms, or direct enumeration), prints a single pass/fail line,
//! and enforces the criterion's time budget.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rplab::circuit::{BooleanCircuit, CountingInstance, CountingMode};
use rplab::corpus::{self, CorpusEntry};
use rplab::dyadic::Dyadic;
use rplab::exec::ExecCfg;
use rplab::parity::{brier_full, brier_truncated, expected_reward_at, parity_audit, sign_alternations};
use rplab::protocol::{BitString, ProtocolSpec, RewardRule, ValueRule, VerifierRule};
use rplab::protocols::{
    compare_expectations_prob, compose_with_machine, composition_reward, elicit_expectation,
    knockout_argmax, make_brier_count, make_pp_vote, one_bit_transform, pp_oracle_round,
    MachineStep, OracleMachine,
};
use rplab::report::{AuditFile, RunRecord, RunReport};
use rplab::solver::{info_set_value, solve_rational, verify_protocol, DeltaOutcome, NodeKey};

fn conclude(label: &str, started: Instant, budget_secs: u64, failures: Vec<String>) {
    let elapsed = started.elapsed();
    let in_budget = elapsed <= Duration::from_secs(budget_secs);
    let verdict = if failures.is_empty() && in_budget {
        "pass"
    } else {
        "FAIL"
    };
    println!("criterion {label}: {verdict} ({elapsed:.2?})");
    assert!(
        failures.is_empty(),
        "{label}: {} problem(s): {}",
        failures.len(),
        failures.join(" | ")
    );
    assert!(
        in_budget,
        "{label}: exceeded the {budget_secs}s budget: {elapsed:?}"
    );
}

fn bit(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

/// Independent accepting-assignment count: a plain evaluation loop, not the
/// library's counting path.
fn brute_count(c: &BooleanCircuit) -> u64 {
    (0..1u64 << c.n_inputs()).filter(|&r| c.eval(r)).count() as u64
}

fn vote(entry: &CorpusEntry, cfg: &ExecCfg) -> ProtocolSpec {
    let inst = CountingInstance::new(entry.circuit.clone(), CountingMode::Majority);
    make_pp_vote(&inst, cfg).expect("generated corpora never tie")
}

#[test]
fn c01_majority_vote_corpus() {
    let started = Instant::now();
    let cfg = ExecCfg::default();
    let entries = corpus::generate(11, 100, 1, 8, &cfg).unwrap();
    let mut failures = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        let n = e.circuit.n_inputs();
        if n > 10 {
            failures.push(format!("instance {i} has {n} certificate bits"));
            continue;
        }
        let k = brute_count(&e.circuit);
        if k != e.truth.count {
            failures.push(format!("instance {i}: recount {k} != recorded {}", e.truth.count));
        }
        let spec = vote(e, &cfg);
        let out = solve_rational(&spec, "", &cfg).unwrap();
        let expected = Dyadic::new(k.max((1u64 << n) - k), n);
        if out.root_value != expected {
            failures.push(format!(
                "instance {i}: root {} != max(k, 2^n-k)/2^n = {expected}",
                out.root_value
            ));
        }
        let verify = verify_protocol(&spec, "", &bit(2 * k > 1 << n), &cfg).unwrap();
        if !verify.pass {
            failures.push(format!("instance {i}: a maximizing branch claims the minority"));
        }
    }
    if entries.len() < 100 {
        failures.push(format!("only {} instances generated", entries.len()));
    }
    conclude("1 (majority vote suite)", started, 10, failures);
}

#[test]
fn c02_comparison_exactness() {
    let started = Instant::now();
    let cfg = ExecCfg::default();
    let entries = corpus::generate(12, 100, 1, 6, &cfg).unwrap();
    let mut failures = Vec::new();
    let half = Dyadic::new(1, 1);
    for (j, pair) in entries.chunks(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        if a.circuit.n_inputs() > 8 || b.circuit.n_inputs() > 8 {
            failures.push(format!("pair {j} exceeds 8 inputs"));
            continue;
        }
        let prob = compare_expectations_prob(&a.circuit, &b.circuit, &cfg).unwrap();
        let swapped = compare_expectations_prob(&b.circuit, &a.circuit, &cfg).unwrap();
        // Closed form from independent recounts: 1/2 + (E1 - E0)/2.
        let e0 = Dyadic::new(brute_count(&a.circuit), a.circuit.n_inputs());
        let e1 = Dyadic::new(brute_count(&b.circuit), b.circuit.n_inputs());
        let expected = &half + &(&e1 - &e0).mul_pow2(-1);
        if prob != expected {
            failures.push(format!("pair {j}: probability {prob} != closed form {expected}"));
        }
        if &prob + &swapped != Dyadic::one() {
            failures.push(format!("pair {j}: orderings sum to {}", &prob + &swapped));
        }
    }
    conclude("2 (comparison exactness)", started, 5, failures);
}

/// A mixed bag of one- and two-round protocols with reward grids, all on
/// empty input.
fn grid_protocol_battery(cfg: &ExecCfg) -> Vec<ProtocolSpec> {
    let entries = corpus::generate(13, 12, 1, 4, cfg).unwrap();
    let mut specs = Vec::new();
    for e in &entries[..6] {
        specs.push(vote(e, cfg));
    }
    for e in &entries[6..9] {
        let inst = CountingInstance::new(e.circuit.clone(), CountingMode::Count);
        specs.push(make_brier_count(&inst).unwrap());
    }
    // Same-decision same-shape pairs for the extra claim round.
    let mut buckets: BTreeMap<(u32, bool), Vec<&CorpusEntry>> = BTreeMap::new();
    for e in &entries {
        buckets
            .entry((e.circuit.n_inputs(), e.truth.majority))
            .or_default()
            .push(e);
    }
    let mut stacked = 0;
    for members in buckets.values() {
        if members.len() >= 2 && stacked < 2 {
            let inners = [vote(members[0], cfg), vote(members[1], cfg)];
            specs.push(pp_oracle_round(&inners, cfg).unwrap());
            stacked += 1;
        }
    }
    specs.push(reveal_game());
    specs.push(two_bit_reveal_game());
    specs
}

#[test]
fn c03_one_bit_rewards_preserve_play() {
    let started = Instant::now();
    let cfg = ExecCfg::default();
    let mut failures = Vec::new();
    for spec in grid_protocol_battery(&cfg) {
        let base = solve_rational(&spec, "", &cfg).unwrap();
        let flat = match one_bit_transform(&spec) {
            Ok(s) => s,
            Err(e) => {
                failures.push(format!("{}: transform refused: {e}", spec.name()));
                continue;
            }
        };
        if (flat.msg_bits(), flat.rounds()) != (spec.msg_bits(), spec.rounds()) {
            failures.push(format!("{}: message shape changed", spec.name()));
        }
        let after = solve_rational(&flat, "", &cfg).unwrap();
        if base.table.len() != after.table.len() {
            failures.push(format!(
                "{}: table sizes differ: {} vs {}",
                spec.name(),
                base.table.len(),
                after.table.len()
            ));
            continue;
        }
        for ((ka, na), (kb, nb)) in base.table.iter().zip(after.table.iter()) {
            if ka != kb {
                failures.push(format!("{}: node sets differ", spec.name()));
                break;
            }
            if na.value != nb.value || na.argmax != nb.argmax {
                failures.push(format!(
                    "{}: node {:?} changed: value {} -> {}, argmax {:?} -> {:?}",
                    spec.name(),
                    ka,
                    na.value,
                    nb.value,
                    na.argmax,
                    nb.argmax
                ));
                break;
            }
        }
    }
    conclude("3 (one-bit reward collapse)", started, 30, failures);
}

/// Two rounds: the first bit earns a flat half when set, the second must
/// echo the revealed high bit of the first draw. Rewards sit on the
/// half-grid and the tight per-node gap is 1/2.
fn reveal_game() -> ProtocolSpec {
    let verifier: VerifierRule = Arc::new(|_, ms, rs| {
        if ms.len() == 1 {
            rs[0].high(1)
        } else {
            BitString::empty()
        }
    });
    let reward: RewardRule = Arc::new(|_, ms, rs| {
        let mut total = Dyadic::zero();
        if ms[0].value() == 1 {
            total = &total + &Dyadic::new(1, 1);
        }
        if ms[1] == rs[0].high(1) {
            total = &total + &Dyadic::new(1, 1);
        }
        total
    });
    let value: ValueRule = Arc::new(|_, ms, _| ms[0].to_string());
    ProtocolSpec::new("reveal-game", vec![1, 1], vec![2, 0], verifier, reward, value)
        .unwrap()
        .with_resolution_bits(1)
        .with_declared_delta(Arc::new(|_| Dyadic::new(1, 1)))
}

/// Two 2-bit messages against a 3-bit draw: quarter pay for matching the
/// low pair, half pay for matching the high pair, top bit revealed between
/// rounds.
fn two_bit_reveal_game() -> ProtocolSpec {
    let verifier: VerifierRule = Arc::new(|_, ms, rs| {
        if ms.len() == 1 {
            rs[0].high(1)
        } else {
            BitString::empty()
        }
    });
    let reward: RewardRule = Arc::new(|_, ms, rs| {
        let draw = rs[0].value();
        let mut total = Dyadic::zero();
        if ms[1].value() == (draw & 3) {
            total = &total + &Dyadic::new(1, 2);
        }
        if ms[0].value() == draw >> 1 {
            total = &total + &Dyadic::new(1, 1);
        }
        total
    });
    let value: ValueRule = Arc::new(|_, ms, _| ms[0].to_string());
    ProtocolSpec::new(
        "two-bit-reveal",
        vec![2, 2],
        vec![3, 1],
        verifier,
        reward,
        value,
    )
    .unwrap()
    .with_resolution_bits(2)
    .with_declared_delta(Arc::new(|_| Dyadic::new(1, 2)))
}

#[test]
fn c04_elicited_expectations_are_exact() {
    let started = Instant::now();
    let cfg = ExecCfg::default();
    let mut failures = Vec::new();

    let entries = corpus::generate(21, 8, 2, 2, &cfg).unwrap();
    let mut bases = vec![reveal_game(), two_bit_reveal_game()];
    let mut buckets: BTreeMap<(u32, bool), Vec<&CorpusEntry>> = BTreeMap::new();
    for e in &entries {
        buckets
            .entry((e.circuit.n_inputs(), e.truth.majority))
            .or_default()
            .push(e);
    }
    for members in buckets.values() {
        if members.len() >= 2 {
            let inners = [vote(members[0], &cfg), vote(members[1], &cfg)];
            bases.push(pp_oracle_round(&inners, &cfg).unwrap());
        }
    }

    for base in &bases {
        assert_eq!(base.rounds(), 2, "battery holds two-round protocols");
        assert!(base.msg_bits().iter().all(|&w| w <= 4));
        assert!(base.rand_bits().iter().map(|&b| b as u32).sum::<u32>() <= 10);
        let wrapper = elicit_expectation(base, 1).unwrap();
        let e_width = wrapper.msg_bits()[0] - base.msg_bits()[1];
        let p_bits = base.value_resolution_bits().unwrap();
        let delta = base.declared_delta("").unwrap();
        let quarter_delta = delta.mul_pow2(-2);
        let full = solve_rational(base, "", &cfg).unwrap();

        let mut prefixes = 0;
        for (key, _) in full.table.iter() {
            if !key.prover_turn() || key.prover.len() != 1 {
                continue;
            }
            prefixes += 1;
            let transcript = key.to_transcript("");
            let star = info_set_value(base, &transcript, &cfg).unwrap();
            let prefix_input = transcript.to_input_string();
            let out = solve_rational(&wrapper, &prefix_input, &cfg).unwrap();

            for m in &out.root_argmax {
                let claimed = Dyadic::new(m.high(e_width).value(), p_bits);
                if claimed != star {
                    failures.push(format!(
                        "{}: optimal claim {claimed} != continuation value {star}",
                        base.name()
                    ));
                }
            }

            // Best achievable value per claim, off-optimum losses included.
            let root = out.table.get(&NodeKey::root()).unwrap();
            let mut best: BTreeMap<u64, Dyadic> = BTreeMap::new();
            for (msg, val) in &root.children {
                let e_raw = msg.high(e_width).value();
                match best.get(&e_raw) {
                    Some(v) if v >= val => {}
                    _ => {
                        best.insert(e_raw, val.clone());
                    }
                }
            }
            for (e_raw, achieved) in &best {
                if *e_raw > 1 << p_bits {
                    if !achieved.is_zero() {
                        failures.push(format!(
                            "{}: unrepresentable claim {e_raw} pays {achieved}",
                            base.name()
                        ));
                    }
                    continue;
                }
                let gap = &Dyadic::new(*e_raw, p_bits) - &star;
                let expected_loss = &quarter_delta * &gap.square();
                let actual_loss = &out.root_value - achieved;
                if actual_loss != expected_loss {
                    failures.push(format!(
                        "{}: claim {e_raw} loses {actual_loss}, expected {expected_loss}",
                        base.name()
                    ));
                }
            }
        }
        if prefixes == 0 {
            failures.push(format!("{}: no rational prefixes to check", base.name()));
        }
    }
    if bases.len() < 3 {
        failures.push("battery too small".to_string());
    }
    conclude("4 (elicited expectations)", started, 30, failures);
}

#[test]
fn c05_machine_composition_decides_like_the_machine() {
    let started = Instant::now();
    let cfg = ExecCfg::default();
    let mut failures = Vec::new();

    // The discounted two-step payment rule against hand arithmetic.
    let quarter = Dyadic::new(1, 2);
    for (r1, r2) in [
        (Dyadic::zero(), Dyadic::one()),
        (Dyadic::one(), Dyadic::new(1, 1)),
        (Dyadic::new(3, 2), Dyadic::new(5, 3)),
    ] {
        let got = composition_reward(&quarter, &[r1.clone(), r2.clone()]);
        let want = &(&r1.mul_pow2(-1) + &(&quarter.mul_pow2(-2) * &r2))
            + &quarter.square().mul_pow2(-3);
        if got != want {
            failures.push(format!("payment rule: {got} != {want}"));
        }
    }

    let entries = corpus::generate(14, 150, 1, 3, &cfg).unwrap();
    let small: Vec<&CorpusEntry> = entries
        .iter()
        .filter(|e| e.circuit.n_inputs() <= 3)
        .collect();
    assert!(small.len() >= 3, "corpus too thin for trios");
    let mut instances = 0;
    while instances < 50 {
        let trio: Vec<&CorpusEntry> = (0..3)
            .map(|j| small[(3 * instances + j) % small.len()])
            .collect();
        let truths: Vec<bool> = trio
            .iter()
            .map(|e| {
                let n = e.circuit.n_inputs();
                2 * brute_count(&e.circuit) > 1 << n
            })
            .collect();

        // Alternate between an adaptive two-question machine and a
        // three-question majority machine.
        let majority_machine = instances % 3 == 0;
        let (machine, verdict): (OracleMachine, bool) = if majority_machine {
            let program = Arc::new(|_: &str, answers: &[bool]| {
                if answers.len() < 3 {
                    MachineStep::Query(format!("c{}", answers.len()))
                } else if answers.iter().filter(|&&a| a).count() >= 2 {
                    MachineStep::Accept
                } else {
                    MachineStep::Reject
                }
            });
            let verdict = truths.iter().filter(|&&t| t).count() >= 2;
            (OracleMachine::new(3, program), verdict)
        } else {
            let program = Arc::new(|_: &str, answers: &[bool]| match answers.len() {
                0 => MachineStep::Query("c0".to_string()),
                1 => MachineStep::Query(if answers[0] { "c1" } else { "c2" }.to_string()),
                _ => {
                    if answers[1] {
                        MachineStep::Accept
                    } else {
                        MachineStep::Reject
                    }
                }
            });
            let verdict = if truths[0] { truths[1] } else { truths[2] };
            (OracleMachine::new(2, program), verdict)
        };

        let specs: Vec<ProtocolSpec> = trio.iter().map(|e| vote(e, &cfg)).collect();
        let family = |q: &str| -> rplab::error::Result<ProtocolSpec> {
            let i: usize = q[1..].parse().unwrap();
            Ok(specs[i].clone())
        };
        let spec = compose_with_machine(&machine, &family, "").unwrap();
        let verify = verify_protocol(&spec, "", &bit(verdict), &cfg).unwrap();
        if !verify.pass {
            failures.push(format!("instance {instances}: decision differs from the verdict"));
        }
        if verify.decisions.len() != 1 {
            failures.push(format!(
                "instance {instances}: branches disagree: {:?}",
                verify.decisions
            ));
        }
        instances += 1;
    }
    if instances < 50 {
        failures.push(format!("only {instances} composed instances"));
    }
    conclude("5 (machine composition)", started, 60, failures);
}

#[test]
fn c06_first_bit_is_the_exact_majority_of_decisions() {
    let started = Instant::now();
    let cfg = ExecCfg::default();
    let mut failures = Vec::new();
    let entries = corpus::generate(15, 120, 1, 3, &cfg).unwrap();
    let mut buckets: BTreeMap<(u32, bool), Vec<&CorpusEntry>> = BTreeMap::new();
    for e in &entries {
        buckets
            .entry((e.circuit.n_inputs(), e.truth.majority))
            .or_default()
            .push(e);
    }

    // Unanimous families of every size up to 16, cycling bucket members
    // when a bucket is short.
    let mut families: Vec<Vec<&CorpusEntry>> = Vec::new();
    let mut ranked: Vec<&Vec<&CorpusEntry>> = buckets.values().collect();
    ranked.sort_by_key(|b| std::cmp::Reverse(b.len()));
    for q in 1..=4u32 {
        for bucket in ranked.iter().take(2) {
            let size = 1usize << q;
            let family: Vec<&CorpusEntry> =
                (0..size).map(|i| bucket[i % bucket.len()]).collect();
            families.push(family);
        }
    }
    // Mixed 3-vs-1 families from same-width buckets of opposite decisions.
    let mut mixed = 0;
    for ((n0, m0), b0) in &buckets {
        if mixed >= 2 {
            break;
        }
        if let Some(b1) = buckets.get(&(*n0, !*m0)) {
            if b0.len() >= 3 && !b1.is_empty() {
                families.push(vec![b0[0], b0[1], b0[2], b1[0]]);
                mixed += 1;
            }
        }
    }

    for (f, family) in families.iter().enumerate() {
        let ones = family
            .iter()
            .filter(|e| {
                let n = e.circuit.n_inputs();
                2 * brute_count(&e.circuit) > 1 << n
            })
            .count();
        let expected = 2 * ones > family.len();
        if 2 * ones == family.len() {
            failures.push(format!("family {f} ties; fixture bug"));
            continue;
        }
        let inners: Vec<ProtocolSpec> = family.iter().map(|e| vote(e, &cfg)).collect();
        let spec = pp_oracle_round(&inners, &cfg).unwrap();
        let out = solve_rational(&spec, "", &cfg).unwrap();
        if out.root_argmax.is_empty() {
            failures.push(format!("family {f}: empty argmax"));
        }
        for m in &out.root_argmax {
            if (m.value() == 1) != expected {
                failures.push(format!(
                    "family {f}: rational first bit {} but {} of {} decisions are 1",
                    m.value(),
                    ones,
                    family.len()
                ));
            }
        }
    }
    if families.len() < 8 {
        failures.push("family battery too small".to_string());
    }
    conclude("6 (claim-round majority)", started, 30, failures);
}

/// One round, two random bits, every message worth exactly one half.
fn flat_game() -> ProtocolSpec {
    let verifier: VerifierRule = Arc::new(|_, _, _| BitString::empty());
    let reward: RewardRule = Arc::new(|_, _, _| Dyadic::new(1, 1));
    let value: ValueRule = Arc::new(|_, ms, _| ms[0].to_string());
    ProtocolSpec::new("flat-game", vec![2], vec![2], verifier, reward, value)
        .unwrap()
        .with_resolution_bits(1)
}

/// One round where exactly the odd messages are optimal.
fn two_winner_game() -> ProtocolSpec {
    let verifier: VerifierRule = Arc::new(|_, _, _| BitString::empty());
    let reward: RewardRule = Arc::new(|_, ms, _| {
        if ms[0].value() % 2 == 1 {
            Dyadic::new(3, 2)
        } else {
            Dyadic::new(1, 2)
        }
    });
    let value: ValueRule = Arc::new(|_, ms, _| ms[0].to_string());
    ProtocolSpec::new("two-winner", vec![2], vec![1], verifier, reward, value)
        .unwrap()
        .with_resolution_bits(2)
}

#[test]
fn c07_knockout_lands_in_the_argmax_set() {
    let started = Instant::now();
    let cfg = ExecCfg::default();
    let mut failures = Vec::new();
    let entries = corpus::generate(16, 50, 1, 6, &cfg).unwrap();
    let mut battery: Vec<ProtocolSpec> = entries.iter().map(|e| vote(e, &cfg)).collect();
    for e in entries.iter().take(10) {
        let inst = CountingInstance::new(e.circuit.clone(), CountingMode::Count);
        battery.push(make_brier_count(&inst).unwrap());
    }
    battery.push(flat_game());
    battery.push(two_winner_game());

    for spec in &battery {
        let out = solve_rational(spec, "", &cfg).unwrap();
        let winner = knockout_argmax(spec, "", &cfg).unwrap();
        if !out.root_argmax.contains(&winner) {
            failures.push(format!(
                "{}: tournament winner {winner} outside the {} maximizers",
                spec.name(),
                out.root_argmax.len()
            ));
        }
        if spec.name() == "flat-game" && out.root_argmax.len() != 4 {
            failures.push(format!(
                "flat-game: expected an all-tie field, argmax has {}",
                out.root_argmax.len()
            ));
        }
        if spec.name() == "two-winner" {
            let values: Vec<u64> = out.root_argmax.iter().map(|m| m.value()).collect();
            if values != vec![1, 3] {
                failures.push(format!("two-winner: argmax {values:?} != [1, 3]"));
            }
        }
    }
    conclude("7 (knockout selection)", started, 10, failures);
}

#[test]
fn c08_declared_gaps_never_exceed_real_ones() {
    let started = Instant::now();
    let cfg = ExecCfg::default();
    let mut failures = Vec::new();
    let entries = corpus::generate(17, 30, 1, 6, &cfg).unwrap();

    let mut battery: Vec<ProtocolSpec> = Vec::new();
    for e in &entries {
        battery.push(vote(e, &cfg));
    }
    for e in entries.iter().take(10) {
        let inst = CountingInstance::new(e.circuit.clone(), CountingMode::Count);
        battery.push(make_brier_count(&inst).unwrap());
    }
    for e in entries.iter().take(10) {
        battery.push(one_bit_transform(&vote(e, &cfg)).unwrap());
    }
    let mut buckets: BTreeMap<(u32, bool), Vec<&CorpusEntry>> = BTreeMap::new();
    for e in &entries {
        buckets
            .entry((e.circuit.n_inputs(), e.truth.majority))
            .or_default()
            .push(e);
    }
    for members in buckets.values() {
        if members.len() >= 2 {
            let inners = [vote(members[0], &cfg), vote(members[1], &cfg)];
            battery.push(pp_oracle_round(&inners, &cfg).unwrap());
        }
    }
    for e in entries.iter().take(6) {
        let machine = OracleMachine::new(
            1,
            Arc::new(|_: &str, answers: &[bool]| match answers.first() {
                None => MachineStep::Query("target".to_string()),
                Some(true) => MachineStep::Accept,
                Some(false) => MachineStep::Reject,
            }),
        );
        let inst = CountingInstance::new(e.circuit.clone(), CountingMode::Majority);
        let cfg2 = cfg;
        let family = move |q: &str| -> rplab::error::Result<ProtocolSpec> {
            assert_eq!(q, "target");
            make_pp_vote(&inst, &cfg2)
        };
        battery.push(compose_with_machine(&machine, &family, "").unwrap());
    }

    for spec in &battery {
        let declared = spec.declared_delta("");
        let out = solve_rational(spec, "", &cfg).unwrap();
        match out.delta() {
            DeltaOutcome::Gap(g) => {
                if !g.is_negative() && g.is_zero() {
                    failures.push(format!("{}: zero gap", spec.name()));
                }
                if g.is_negative() {
                    failures.push(format!("{}: negative gap {g}", spec.name()));
                }
                if let Some(d) = declared {
                    if d > g {
                        failures.push(format!(
                            "{}: declares {d} but the real gap is {g}",
                            spec.name()
                        ));
                    }
                } else {
                    failures.push(format!("{}: no declared gap", spec.name()));
                }
            }
            DeltaOutcome::NoSuboptimalMessage => {
                failures.push(format!(
                    "{}: gap sentinel outside the constant fixture",
                    spec.name()
                ));
            }
        }
    }

    // Only the constant-reward fixture earns the sentinel.
    let flat = solve_rational(&flat_game(), "", &cfg).unwrap();
    if flat.delta() != DeltaOutcome::NoSuboptimalMessage {
        failures.push("flat-game: expected the no-suboptimal-message sentinel".to_string());
    }
    if DeltaOutcome::NoSuboptimalMessage.render() != "+inf" {
        failures.push("sentinel renders wrong".to_string());
    }
    conclude("8 (gap discipline)", started, 30, failures);
}

#[test]
fn c09_sampler_polynomials_and_audits() {
    let started = Instant::now();
    let cfg = ExecCfg::default();
    let mut failures = Vec::new();

    let mut audited = Vec::new();
    for n in 1..=8u32 {
        audited.push((brier_full(n).unwrap(), true));
    }
    audited.push((brier_truncated(8, 4).unwrap(), false));

    for (proto, expect_clean) in &audited {
        let report = parity_audit(proto, &cfg).unwrap();
        if *expect_clean && !report.passes() {
            failures.push(format!(
                "{}: {} unexpected failures",
                proto.name(),
                report.failures.len()
            ));
        }
        if !*expect_clean && report.passes() {
            failures.push(format!("{}: expected at least one failure", proto.name()));
        }
        let d = proto.sample_bits() as usize;
        for (m, poly) in &report.polynomials {
            if poly.degree().unwrap_or(0) > d {
                failures.push(format!("{}: message {m} exceeds degree {d}", proto.name()));
            }
            for k in 0..proto.grid_size() {
                let direct = expected_reward_at(proto, *m, k);
                if poly.eval(&Dyadic::new(k, proto.n())) != direct {
                    failures.push(format!(
                        "{}: message {m} disagrees with enumeration at k={k}",
                        proto.name()
                    ));
                    break;
                }
            }
        }
        let messages: Vec<u64> = report.polynomials.keys().copied().collect();
        for (i, &m0) in messages.iter().enumerate() {
            for &m1 in &messages[i + 1..] {
                let alternations = sign_alternations(proto, m0, m1, &cfg).unwrap();
                if alternations as usize > d {
                    failures.push(format!(
                        "{}: pair ({m0}, {m1}) crosses {alternations} times, degree is {d}",
                        proto.name()
                    ));
                }
            }
        }
    }
    conclude("9 (sampler audit mechanics)", started, 120, failures);
}

#[test]
fn c10_reports_are_worker_count_invariant() {
    let started = Instant::now();
    let mut failures = Vec::new();
    let mut artifacts: Vec<(String, String, String)> = Vec::new();
    for workers in [1usize, 2, 8] {
        let cfg = ExecCfg::with_workers(workers);
        let entries = corpus::generate(18, 20, 1, 6, &cfg).unwrap();
        let corpus_text = corpus::to_text(&entries);

        let mut records = Vec::new();
        for (i, e) in entries.iter().take(10).enumerate() {
            let spec = vote(e, &cfg);
            let out = solve_rational(&spec, "", &cfg).unwrap();
            let verify = verify_protocol(&spec, "", &bit(e.truth.majority), &cfg).unwrap();
            records.push(RunRecord::new(format!("instance[{i}]"), &spec, "", &out, &verify));
        }
        let run_json = RunReport::new("pp-vote", records).to_json().unwrap();

        let audit = parity_audit(&brier_truncated(8, 4).unwrap(), &cfg).unwrap();
        let audit_json = AuditFile::new(&audit, Some(&Dyadic::new(1, 1)))
            .to_json()
            .unwrap();
        artifacts.push((corpus_text, run_json, audit_json));
    }
    for later in &artifacts[1..] {
        if later.0 != artifacts[0].0 {
            failures.push("corpus bytes depend on the worker count".to_string());
        }
        if later.1 != artifacts[0].1 {
            failures.push("run report bytes depend on the worker count".to_string());
        }
        if later.2 != artifacts[0].2 {
            failures.push("audit bytes depend on the worker count".to_string());
        }
    }
    conclude("10 (report determinism)", started, 60, failures);
}

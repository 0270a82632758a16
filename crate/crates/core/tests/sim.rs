mod common;

use common::{frac, r};
use twoway::channel::ChannelConfig;
use twoway::schemes::{compile, compile_four_message, MessageSet, SchemeKind, SchemeSpec, Term};
use twoway::sim::*;

fn cfg(n: usize, m: usize, nb: usize, mb: usize, l: (i64, i64)) -> ChannelConfig {
    ChannelConfig::of(n, m, nb, mb, l)
}

fn set(spec: &SchemeSpec, values: &[(&str, u8)]) -> MessageSet {
    let mut m = MessageSet::zeros(spec);
    for (name, v) in values {
        m.bits[spec.msg_index(name).unwrap()] = *v;
    }
    m
}

#[test]
fn type1_example_block() {
    let c = cfg(1, 3, 1, 1, (1, 2));
    let spec = compile(SchemeKind::TypeI, &c).unwrap();
    let m = set(&spec, &[("a1", 1), ("a2", 0), ("a3", 1), ("b1", 0), ("b2", 1), ("b3", 1)]);
    let (tr, dec) = run_block(&spec, &c, &m).unwrap();
    assert_eq!(dec, m);
    assert_eq!(tr.len(), 2);
    // Slot 0: 1~ gets (b1, b2, a1); both feed back b2 ^ a2 on the single level.
    assert_eq!(tr.slots[0].y[0].bits(), &[0, 1, 1]);
    assert_eq!(tr.slots[0].yb.as_ref().unwrap()[0].bits(), &[1]);
    // Slot 1: user 1 sends (a3, b2).
    assert_eq!(tr.slots[1].x[0].bits(), &[1, 1, 0]);
    assert!(tr.slots[1].yb.is_none());
    assert!(tr.channel_law_holds(&c));
}

#[test]
fn four_message_example_block() {
    let c = cfg(2, 1, 0, 1, (1, 1));
    let spec = compile_four_message(&c).unwrap();
    let m = set(&spec, &[("a1", 1), ("a2", 1), ("b1", 0), ("b2", 1), ("\u{e3}", 1), ("b\u{303}", 0)]);
    let (tr, dec) = run_block(&spec, &c, &m).unwrap();
    assert_eq!(dec, m);
    assert!(tr.channel_law_holds(&c));
    // User 1 hears b~ in slot 0 and puts it on top in slot 1.
    assert_eq!(tr.slots[0].yb.as_ref().unwrap()[0].bits(), &[0]);
    assert_eq!(tr.slots[1].x[0].bits(), &[0, 1]);
    assert_eq!(tr.slots[1].x[1].bits(), &[1, 1]);
}

#[test]
fn zero_messages_give_zero_transcript() {
    for (kind, c) in [
        (SchemeKind::TypeI, cfg(1, 3, 1, 1, (1, 2))),
        (SchemeKind::TypeIII, cfg(3, 1, 3, 1, (1, 2))),
    ] {
        let spec = compile(kind, &c).unwrap();
        let (tr, dec) = run_block(&spec, &c, &MessageSet::zeros(&spec)).unwrap();
        assert!(dec.bits.iter().all(|&b| b == 0));
        for s in &tr.slots {
            assert!(s.x.iter().chain(&s.y).all(|v| v.is_zero()));
            assert!(s.xb.iter().flatten().all(|v| v.is_zero()));
        }
    }
}

#[test]
fn verify_examples() {
    for (kind, c) in [(SchemeKind::TypeI, cfg(1, 3, 1, 1, (1, 2))), (SchemeKind::TypeII, cfg(2, 1, 1, 1, (1, 2)))] {
        let spec = compile(kind, &c).unwrap();
        let rep = verify_exhaustive(&spec, &c, DEFAULT_LIMIT).unwrap();
        assert!(rep.exhaustive);
        assert_eq!(rep.tested, 64);
        assert_eq!(rep.failures, 0);
        assert_eq!(rep.rate.forward_sum, r(3));
        assert!(rep.passed());
    }
}

#[test]
fn sampling_above_the_limit() {
    let c = cfg(1, 3, 1, 1, (1, 2));
    let spec = compile(SchemeKind::TypeI, &c).unwrap();
    let rep = verify_exhaustive(&spec, &c, 32).unwrap();
    assert!(!rep.exhaustive);
    assert_eq!(rep.tested, SAMPLE_COUNT as u64);
    assert_eq!(rep.failures, 0);
}

#[test]
fn corrupted_feedback_is_caught() {
    let c = cfg(1, 3, 1, 1, (1, 2));
    let mut spec = compile(SchemeKind::TypeI, &c).unwrap();
    // User 1~ stops feeding back and sends a constant instead.
    spec.backward[0][0] = Some(vec![vec![]]);
    let rep = verify_exhaustive(&spec, &c, DEFAULT_LIMIT).unwrap();
    assert!(rep.failures > 0);
    assert!(!rep.passed());
    let cx = rep.counterexample.as_ref().unwrap();
    assert!(!cx.wrong.is_empty());
    let tr = cx.transcript.as_ref().unwrap();
    assert_eq!(tr.len(), 2);
    assert!(tr.channel_law_holds(&c));
    let (_, dec) = run_block(&spec, &c, &cx.messages).unwrap();
    assert_ne!(dec, expected_decode(&spec, &cx.messages));
    let json = rep.to_json(&spec);
    assert_eq!(json["status"], "FAIL");
    assert!(json["first_counterexample"]["transcript"].is_array());
}

#[test]
fn corrupted_relay_is_caught() {
    let c = cfg(2, 1, 1, 1, (1, 2));
    let mut spec = compile(SchemeKind::TypeII, &c).unwrap();
    let relay = &mut spec.forward[1][0][0];
    relay.retain(|t| !matches!(t, Term::Rx { .. }));
    let rep = verify_exhaustive(&spec, &c, DEFAULT_LIMIT).unwrap();
    assert!(rep.failures > 0);
}

#[test]
fn budget_examples() {
    let c = cfg(1, 3, 1, 1, (1, 2));
    let spec = compile(SchemeKind::TypeI, &c).unwrap();
    let (tr, _) = run_block(&spec, &c, &MessageSet::zeros(&spec)).unwrap();
    let b = budget_check(&tr, &c);
    assert_eq!((b.used, b.allowed, b.ok), ([1, 1], r(1), true));

    let c0 = cfg(1, 3, 1, 1, (0, 1));
    let spec = compile(SchemeKind::TypeI, &c0).unwrap();
    let (tr, _) = run_block(&spec, &c0, &MessageSet::zeros(&spec)).unwrap();
    assert_eq!(budget_check(&tr, &c0).used, [0, 0]);

    // Only C_pf - C_no = 1 extra bit per user is worth feeding back here,
    // so one private level is loaded out of the two available.
    let c = cfg(3, 1, 3, 1, (1, 2));
    let spec = compile(SchemeKind::TypeIII, &c).unwrap();
    let (tr, _) = run_block(&spec, &c, &MessageSet::zeros(&spec)).unwrap();
    let b = budget_check(&tr, &c);
    assert_eq!(b.allowed, r(3));
    assert_eq!(b.used, [spec.extra_bits_per_user; 2]);
    assert!(b.ok);
}

#[test]
fn transcripts_are_deterministic() {
    let c = cfg(2, 1, 1, 1, (1, 2));
    let spec = compile(SchemeKind::TypeII, &c).unwrap();
    for i in 0..64 {
        let m = MessageSet::from_index(&spec, i);
        let a = run_block(&spec, &c, &m).unwrap().0.to_json_lines();
        let b = run_block(&spec, &c, &m).unwrap().0.to_json_lines();
        assert_eq!(a, b);
    }
    let r1 = verify_with_seed(&spec, &c, 1, 99).unwrap();
    let r2 = verify_with_seed(&spec, &c, 1, 99).unwrap();
    assert_eq!(r1.to_json(&spec), r2.to_json(&spec));
}

#[test]
fn json_lines_shape() {
    let c = cfg(1, 3, 1, 1, (1, 2));
    let spec = compile(SchemeKind::TypeI, &c).unwrap();
    let (tr, _) = run_block(&spec, &c, &MessageSet::from_index(&spec, 0b101101)).unwrap();
    let text = tr.to_json_lines();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["slot"], 0);
    assert!(lines[0]["xb1"].is_array());
    assert!(lines[1]["xb1"].is_null() && lines[1]["yb1"].is_null());
    assert_eq!(lines[1]["x1"].as_array().unwrap().len(), 3);
}

#[test]
fn tampered_transcript_breaks_channel_law() {
    let c = cfg(1, 3, 1, 1, (1, 2));
    let spec = compile(SchemeKind::TypeI, &c).unwrap();
    let (mut tr, _) = run_block(&spec, &c, &MessageSet::from_index(&spec, 5)).unwrap();
    assert!(tr.channel_law_holds(&c));
    let flipped: Vec<u8> = tr.slots[1].y[1].bits().iter().map(|b| b ^ 1).collect();
    tr.slots[1].y[1] = twoway::channel::LevelVector::from_bits(&flipped);
    assert!(!tr.channel_law_holds(&c));
}

#[test]
fn input_validation() {
    let c = cfg(1, 3, 1, 1, (1, 2));
    let spec = compile(SchemeKind::TypeI, &c).unwrap();
    let other = cfg(1, 3, 1, 1, (1, 4));
    assert!(matches!(run_block(&spec, &other, &MessageSet::zeros(&spec)), Err(SimError::ConfigMismatch)));
    let short = MessageSet { bits: vec![0; 3] };
    assert!(matches!(run_block(&spec, &c, &short), Err(SimError::MessageLength { expected: 6, got: 3 })));
    assert!(verify_exhaustive(&spec, &other, 64).is_err());
}

#[test]
fn steady_state_schemes_verify() {
    // lambda = 1 with a strong channel needs bits carried between blocks.
    for c in [cfg(1, 4, 1, 1, (1, 1)), cfg(2, 5, 1, 2, (1, 1))] {
        let spec = compile(SchemeKind::TypeI, &c).unwrap();
        let rep = verify_exhaustive(&spec, &c, DEFAULT_LIMIT).unwrap();
        assert!(rep.passed(), "{c:?}");
        assert_eq!(rep.rate.forward_sum, twoway::capacity::inner_sum(&c));
    }
    let _ = frac(1, 1);
}

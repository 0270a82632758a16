mod common;

use common::ref_receive;
use twoway::channel::{
    shift_down, transmit_backward, transmit_forward, visible_part, ChannelConfig, ChannelError, LevelVector,
};

fn lv(bits: &[u8]) -> LevelVector {
    LevelVector::from_bits(bits)
}

#[test]
fn shift_examples() {
    assert_eq!(shift_down(&lv(&[1, 0, 1]), 0), lv(&[1, 0, 1]));
    assert_eq!(shift_down(&lv(&[1, 0, 1]), 1), lv(&[0, 1, 0]));
    assert_eq!(shift_down(&lv(&[1, 1]), 5), lv(&[0, 0]));
}

#[test]
fn forward_two_one() {
    let cfg = ChannelConfig::of(2, 1, 1, 1, (0, 1));
    let (y1, _) = transmit_forward(&lv(&[1, 0]), &lv(&[0, 1]), &cfg).unwrap();
    assert_eq!(y1, lv(&[1, 0]));
    assert_eq!(y1.bits(), ref_receive(&[1, 0], &[0, 1], 2, 1).as_slice());
}

#[test]
fn strong_cross_puts_own_signal_at_bottom() {
    // x1 = [a1, a2, 0], x2 = [b1, b2, 0]; user 1~ sees (b1, b2) on top and a1 below.
    let cfg = ChannelConfig::of(1, 3, 1, 1, (1, 2));
    for a1 in 0..2u8 {
        for a2 in 0..2u8 {
            for b1 in 0..2u8 {
                for b2 in 0..2u8 {
                    let (y1, _) = transmit_forward(&lv(&[a1, a2, 0]), &lv(&[b1, b2, 0]), &cfg).unwrap();
                    assert_eq!(y1, lv(&[b1, b2, a1]));
                }
            }
        }
    }
}

#[test]
fn zero_in_zero_out() {
    for (n, m) in [(0, 0), (2, 1), (1, 3), (3, 3)] {
        let cfg = ChannelConfig::of(n, m, m, n, (0, 1));
        let z = LevelVector::zeros(cfg.q());
        let (y1, y2) = transmit_forward(&z, &z, &cfg).unwrap();
        assert!(y1.is_zero() && y2.is_zero());
        let zb = LevelVector::zeros(cfg.qb());
        let (p, q) = transmit_backward(&zb, &zb, &cfg).unwrap();
        assert!(p.is_zero() && q.is_zero());
    }
}

#[test]
fn symmetric_backward_gives_same_signal() {
    let cfg = ChannelConfig::of(1, 3, 1, 1, (1, 2));
    for b2 in 0..2u8 {
        for a2 in 0..2u8 {
            let (yb1, yb2) = transmit_backward(&lv(&[b2]), &lv(&[a2]), &cfg).unwrap();
            assert_eq!(yb1, lv(&[b2 ^ a2]));
            assert_eq!(yb2, lv(&[a2 ^ b2]));
        }
    }
}

#[test]
fn private_backward_level_stays_private() {
    let cfg = ChannelConfig::of(2, 1, 2, 1, (1, 2));
    for p in 0..2u8 {
        let (yb1, yb2) = transmit_backward(&lv(&[0, p]), &lv(&[0, 0]), &cfg).unwrap();
        assert_eq!(yb1, lv(&[0, p]));
        assert_eq!(yb2, lv(&[0, 0]));
    }
}

#[test]
fn visible_part_examples() {
    assert_eq!(visible_part(&lv(&[1, 0, 1]), 1).unwrap(), lv(&[1]));
    assert_eq!(visible_part(&lv(&[1, 0, 1]), 3).unwrap(), lv(&[1, 0, 1]));
    assert_eq!(visible_part(&lv(&[1, 1]), 1).unwrap(), lv(&[1]));
    assert!(matches!(visible_part(&lv(&[1]), 2), Err(ChannelError::Visible { .. })));
}

#[test]
fn length_mismatch_is_rejected() {
    let cfg = ChannelConfig::of(2, 1, 1, 1, (0, 1));
    assert!(matches!(
        transmit_forward(&lv(&[1]), &lv(&[0, 1]), &cfg),
        Err(ChannelError::Length { expected: 2, got: 1 })
    ));
    assert!(transmit_backward(&lv(&[1, 0]), &lv(&[0]), &cfg).is_err());
    assert!(lv(&[1]).xor(&lv(&[1, 0])).is_err());
}

#[test]
fn lambda_outside_unit_interval_is_rejected() {
    use twoway::channel::Rational;
    assert!(ChannelConfig::new(1, 1, 1, 1, Rational::new(3, 2)).is_err());
    assert!(ChannelConfig::new(1, 1, 1, 1, Rational::new(-1, 2)).is_err());
}

/// Every pair of inputs for every (n, m) with q <= 3 against the matrix model.
#[test]
fn matches_shift_matrix_model_exhaustively() {
    for n in 0..=3 {
        for m in 0..=3 {
            let q = n.max(m);
            let cfg = ChannelConfig::of(n, m, n, m, (0, 1));
            for a in 0u32..(1 << q) {
                for b in 0u32..(1 << q) {
                    let x1: Vec<u8> = (0..q).map(|i| ((a >> i) & 1) as u8).collect();
                    let x2: Vec<u8> = (0..q).map(|i| ((b >> i) & 1) as u8).collect();
                    let (y1, y2) = transmit_forward(&lv(&x1), &lv(&x2), &cfg).unwrap();
                    assert_eq!(y1.bits(), ref_receive(&x1, &x2, n, m).as_slice());
                    assert_eq!(y2.bits(), ref_receive(&x2, &x1, n, m).as_slice());
                    let (p, r) = transmit_backward(&lv(&x1), &lv(&x2), &cfg).unwrap();
                    assert_eq!((p, r), (y1, y2));
                }
            }
        }
    }
}

mod common;

use common::{brute_force_pairing, frac, r, ref_c_no, ref_c_pf, ref_inner, ref_outer, ref_outer_raw};
use twoway::capacity::*;
use twoway::channel::{ChannelConfig, Rational};

fn cfg(n: usize, m: usize, nb: usize, mb: usize, l: (i64, i64)) -> ChannelConfig {
    ChannelConfig::of(n, m, nb, mb, l)
}

#[test]
fn c_no_examples() {
    assert_eq!(c_no(2, 1), r(2));
    assert_eq!(c_no(1, 3), r(2));
    for n in 0..6 {
        assert_eq!(c_no(n, 0), r(2 * n as i64));
    }
    assert_eq!(c_no(0, 4), r(0));
    assert_eq!(c_no(0, 0), r(0));
}

#[test]
fn c_pf_examples() {
    assert_eq!(c_pf(2, 1), r(3));
    assert_eq!(c_pf(1, 3), r(3));
    for n in 0..6 {
        assert_eq!(c_pf(n, n), r(n as i64));
    }
}

#[test]
fn inner_examples() {
    assert_eq!(inner_sum(&cfg(1, 3, 1, 1, (1, 2))), r(3));
    assert_eq!(inner_sum(&cfg(2, 1, 1, 1, (1, 2))), r(3));
    for (n, m) in [(1, 3), (2, 1), (3, 2), (5, 1), (0, 2)] {
        assert_eq!(inner_sum(&cfg(n, m, 4, 1, (0, 1))), c_no(n, m));
    }
}

#[test]
fn outer_examples() {
    assert_eq!(outer_sum(&cfg(2, 1, 1, 1, (1, 1))), r(3));
    assert_eq!(outer_sum(&cfg(1, 3, 1, 1, (1, 2))), r(3));
    for (nb, mb, l) in [(1, 1, (1, 2)), (5, 0, (1, 1)), (0, 3, (0, 1))] {
        assert_eq!(outer_sum(&cfg(3, 2, nb, mb, l)), r(4));
    }
}

#[test]
fn outer_raw_examples() {
    assert_eq!(outer_raw(&cfg(1, 3, 1, 1, (1, 2))), r(3));
    assert_eq!(outer_raw(&cfg(2, 1, 1, 1, (1, 2))), r(3));
    assert_eq!(outer_raw(&cfg(2, 1, 1, 1, (0, 1))), r(2));
}

#[test]
fn matched_examples() {
    for p in 0..=4 {
        assert!(is_matched(&cfg(2, 1, 1, 1, (p, 4))));
    }
    // Inside the open region at lambda = 1/2 both bounds hit C_pf = 5.
    let c = cfg(3, 1, 2, 1, (1, 2));
    assert_eq!((inner_sum(&c), outer_sum(&c)), (r(5), r(5)));
    assert!(is_matched(&c));
    let c = cfg(3, 1, 2, 1, (1, 4));
    assert_eq!((inner_sum(&c), outer_sum(&c)), (frac(9, 2), r(5)));
    assert!(!is_matched(&c));
    assert!(is_matched(&cfg(3, 1, 2, 1, (0, 1))));
}

#[test]
fn net_gain_examples() {
    let c = cfg(2, 1, 1, 1, (0, 1));
    let curve = net_gain(&c, &[frac(0, 1), frac(1, 2), frac(1, 1)]);
    let p = &curve.points;
    assert_eq!((p[0].fb_gain, p[0].indep_gain), (r(0), r(0)));
    assert_eq!((p[1].fb_gain, p[1].indep_gain), (r(1), frac(1, 2)));
    assert_eq!(p[1].fb_gain - p[1].indep_gain, frac(1, 2));
    assert_eq!(p[2].fb_gain, r(1));
    assert_eq!(curve.label, NetGain::Gain);
    // fb_gain = min(2 lambda, 1) across the curve.
    for q in net_gain(&c, &lambda_grid(17)).points {
        assert_eq!(q.fb_gain, (r(2) * q.lambda).min(r(1)));
        assert_eq!(q.indep_gain, q.lambda);
    }
}

#[test]
fn classify_examples() {
    let l = classify_regime(&cfg(1, 3, 1, 1, (1, 2)));
    assert_eq!((l.forward, l.netgain), (ForwardRegime::VeryStrong, NetGain::Gain));
    for (nb, mb) in [(1, 1), (3, 0), (2, 5)] {
        let l = classify_regime(&cfg(3, 2, nb, mb, (1, 2)));
        assert_eq!((l.forward, l.netgain), (ForwardRegime::Moderate, NetGain::NoGain));
    }
    let l = classify_regime(&cfg(3, 1, 3, 1, (1, 2)));
    assert_eq!(
        (l.forward, l.backward, l.netgain),
        (ForwardRegime::Weak, BackwardRegime::PrivateHeavy, NetGain::Open)
    );
}

#[test]
fn regime_boundaries() {
    assert_eq!(forward_regime(1, 2), ForwardRegime::VeryStrong);
    assert_eq!(forward_regime(3, 2), ForwardRegime::Moderate);
    assert_eq!(forward_regime(4, 2), ForwardRegime::Weak);
    assert_eq!(forward_regime(0, 3), ForwardRegime::VeryStrong);
    assert_eq!(backward_regime(2, 1), BackwardRegime::CrossHeavy);
    assert_eq!(backward_regime(3, 1), BackwardRegime::PrivateHeavy);
}

#[test]
fn weak_interaction_examples() {
    assert_eq!(weak_interaction_bound((2, 1), (1, 1), r(0), frac(1, 4)), (frac(3, 2), r(1)));
    assert_eq!(weak_interaction_bound((2, 1), (1, 1), r(0), r(0)), (r(2), r(0)));
    assert_eq!(weak_interaction_bound((2, 1), (1, 1), frac(1, 3), r(1)).0, r(0));
    // Closed forms on the example instance.
    for a in 0..=6 {
        for b in 0..=6 {
            let (l, lt) = (frac(a, 6), frac(b, 6));
            let (rs, rt) = weak_interaction_bound((2, 1), (1, 1), l, lt);
            assert_eq!(rs, (r(2) * (r(1) - lt) + r(2) * l).min(r(3) * (r(1) - lt)));
            assert_eq!(rt, (r(4) * lt).min(r(1) - l));
        }
    }
}

#[test]
fn weak_optimum_examples() {
    let w = weak_for_target((2, 1), (1, 1), r(1)).unwrap();
    assert_eq!((w.lambda, w.lambda_t, w.r_sum), (r(0), frac(1, 4), frac(3, 2)));
    assert!(w.rt_sum >= r(1));
    assert_eq!(weak_for_target((2, 1), (1, 1), r(0)).unwrap().r_sum, r(3));
    assert!(weak_for_target((2, 1), (1, 1), r(2)).is_none());
}

/// The optimum must dominate every point of a fine grid that meets the target.
#[test]
fn weak_optimum_beats_grid() {
    for target in [frac(1, 4), frac(1, 2), frac(3, 4), r(1)] {
        let w = weak_for_target((2, 1), (1, 1), target).unwrap();
        for a in 0..=24 {
            for b in 0..=24 {
                let (rs, rt) = weak_interaction_bound((2, 1), (1, 1), frac(a, 24), frac(b, 24));
                if rt >= target {
                    assert!(rs <= w.r_sum);
                }
            }
        }
    }
}

#[test]
fn pairing_examples() {
    let p = pair_subchannels(&[(2, 1)], &[(1, 1)], frac(1, 2)).unwrap();
    assert_eq!(p.pairs, vec![(0, 0)]);
    assert_eq!(p.total, frac(1, 2));
    for b in [(1, 1), (4, 0), (0, 3)] {
        assert_eq!(pair_subchannels(&[(3, 2)], &[b], frac(1, 2)).unwrap().total, r(0));
    }
    let f = [(1, 3), (3, 2)];
    let b = [(4, 4), (1, 1)];
    let p = pair_subchannels(&f, &b, frac(1, 2)).unwrap();
    assert_eq!(p.pairs, vec![(0, 1), (1, 0)]);
    assert!(p.gains[0] > r(0));
    let (perm, total) = brute_force_pairing(2, |i, j| pair_net_gain(f[i], b[j], frac(1, 2)));
    assert_eq!(p.total, total);
    assert_eq!(perm, vec![1, 0]);
}

#[test]
fn pairing_errors() {
    assert_eq!(pair_subchannels(&[], &[], r(1)), Err(PairingError::Empty));
    assert_eq!(
        pair_subchannels(&[(1, 1)], &[(1, 1), (2, 1)], r(1)),
        Err(PairingError::Mismatch { forwards: 1, backwards: 2 })
    );
}

#[test]
fn pairing_matches_brute_force() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let k = rng.gen_range(1..=5);
        let f: Vec<(usize, usize)> = (0..k).map(|_| (rng.gen_range(0..5), rng.gen_range(0..5))).collect();
        let b: Vec<(usize, usize)> = (0..k).map(|_| (rng.gen_range(0..5), rng.gen_range(0..5))).collect();
        let l = frac(rng.gen_range(0..=4), 4);
        let p = pair_subchannels(&f, &b, l).unwrap();
        let (perm, total) = brute_force_pairing(k, |i, j| pair_net_gain(f[i], b[j], l));
        assert_eq!(p.total, total);
        assert_eq!(p.pairs.iter().map(|&(_, j)| j).collect::<Vec<_>>(), perm);
    }
}

#[test]
fn formulas_match_reference_on_grid() {
    for n in 0..=8 {
        for m in 0..=8 {
            assert_eq!(c_no(n, m), ref_c_no(n, m), "c_no({n},{m})");
            assert_eq!(c_pf(n, m), ref_c_pf(n, m));
            for nb in 0..=4 {
                for mb in 0..=4 {
                    for p in 0..=4 {
                        let l = frac(p, 4);
                        let c = ChannelConfig::new(n, m, nb, mb, l).unwrap();
                        assert_eq!(inner_sum(&c), ref_inner(n, m, nb, mb, l));
                        assert_eq!(outer_sum(&c), ref_outer(n, m, nb, mb, l));
                        assert_eq!(outer_raw(&c), ref_outer_raw(n, m, nb, mb, l));
                    }
                }
            }
        }
    }
}

#[test]
fn report_fields_agree() {
    let c = cfg(2, 1, 1, 1, (1, 2));
    let rep = capacity_report(&c);
    assert_eq!((rep.c_no, rep.c_pf, rep.inner, rep.outer, rep.matched), (r(2), r(3), r(3), r(3), true));
    assert_eq!(fb_gain_outer(&c), r(1));
    let _: Rational = indep_gain(&c);
}

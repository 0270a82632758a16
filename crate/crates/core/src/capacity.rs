//! Closed-form sum-capacity expressions, regime labels, net feedback gain,
//! the weak-interaction bound and sub-channel pairing.
//!
//! Everything is exact over `Ratio<i64>`. Ratio thresholds are compared by
//! cross-multiplication so that `n = 0` needs no special casing: `m >= 2n`
//! holds for every `m` when `n = 0`, which puts that case (and the degenerate
//! `(0,0)` channel) on the very-strong branch.

use num_traits::{Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::channel::{ChannelConfig, Rational};

fn r(x: usize) -> Rational {
    Rational::from_integer(x as i64)
}

fn rmin(a: Rational, b: Rational) -> Rational {
    if a < b {
        a
    } else {
        b
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ForwardRegime {
    VeryStrong,
    Moderate,
    Weak,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum BackwardRegime {
    CrossHeavy,
    PrivateHeavy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum NetGain {
    Gain,
    NoGain,
    Open,
}

impl NetGain {
    pub fn as_str(&self) -> &'static str {
        match self {
            NetGain::Gain => "Gain",
            NetGain::NoGain => "NoGain",
            NetGain::Open => "Open",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct RegimeLabel {
    pub forward: ForwardRegime,
    pub backward: BackwardRegime,
    pub netgain: NetGain,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CapacityReport {
    pub c_no: Rational,
    pub c_pf: Rational,
    pub inner: Rational,
    pub outer: Rational,
    pub matched: bool,
    pub regime: RegimeLabel,
}

pub fn forward_regime(n: usize, m: usize) -> ForwardRegime {
    if m >= 2 * n {
        ForwardRegime::VeryStrong
    } else if 3 * m < 2 * n {
        ForwardRegime::Weak
    } else {
        ForwardRegime::Moderate
    }
}

/// `(nb, 0)` with `nb > 0` is the only way to get alpha~ = 0; `nb = 0` reads as +inf.
pub fn backward_regime(nb: usize, mb: usize) -> BackwardRegime {
    if 2 * mb >= nb {
        BackwardRegime::CrossHeavy
    } else {
        BackwardRegime::PrivateHeavy
    }
}

pub fn c_no(n: usize, m: usize) -> Rational {
    match forward_regime(n, m) {
        ForwardRegime::VeryStrong => r(2 * n),
        ForwardRegime::Weak => r(2 * (n - m).max(m)),
        ForwardRegime::Moderate => r((2 * n - m).max(m)),
    }
}

pub fn c_pf(n: usize, m: usize) -> Rational {
    r((2 * n).saturating_sub(m).max(m))
}

/// Levels per backward use that carry feedback in the achievable schemes.
pub fn feedback_levels_inner(cfg: &ChannelConfig) -> usize {
    match forward_regime(cfg.n, cfg.m) {
        ForwardRegime::VeryStrong => cfg.nb,
        ForwardRegime::Weak => cfg.nb.saturating_sub(cfg.mb).max(cfg.mb),
        ForwardRegime::Moderate => 0,
    }
}

fn feedback_levels_outer(cfg: &ChannelConfig) -> usize {
    match forward_regime(cfg.n, cfg.m) {
        ForwardRegime::VeryStrong => cfg.nb,
        ForwardRegime::Weak => cfg.nb.max(cfg.mb),
        ForwardRegime::Moderate => 0,
    }
}

fn capped(cfg: &ChannelConfig, levels: usize) -> Rational {
    let base = c_no(cfg.n, cfg.m);
    if forward_regime(cfg.n, cfg.m) == ForwardRegime::Moderate {
        return base;
    }
    rmin(base + Rational::from_integer(2) * cfg.lambda * r(levels), c_pf(cfg.n, cfg.m))
}

pub fn inner_sum(cfg: &ChannelConfig) -> Rational {
    capped(cfg, feedback_levels_inner(cfg))
}

pub fn outer_sum(cfg: &ChannelConfig) -> Rational {
    capped(cfg, feedback_levels_outer(cfg))
}

pub fn outer_raw(cfg: &ChannelConfig) -> Rational {
    let (n, m, nb, mb) = (cfg.n, cfg.m, cfg.nb, cfg.mb);
    let two_l = Rational::from_integer(2) * cfg.lambda;
    let t1 = r(2 * n) + two_l * r(nb);
    let t2 = r(n.saturating_sub(m) + n.max(m));
    let t3 = r(2 * n.saturating_sub(m).max(m)) + two_l * r(nb.max(mb));
    rmin(rmin(t1, t2), t3)
}

/// Bounds provably coincide outside (alpha < 2/3, alpha~ < 1); inside that
/// region they may still coincide numerically, e.g. at lambda = 0.
pub fn is_matched(cfg: &ChannelConfig) -> bool {
    let open = 3 * cfg.m < 2 * cfg.n && cfg.mb < cfg.nb;
    !open || inner_sum(cfg) == outer_sum(cfg)
}

/// Net-gain label from the closed-form comparison of `min{2 lambda F, C_pf - C_no}`
/// against `lambda C_no(nb, mb)`, which is lambda-free for lambda > 0.
pub fn netgain_label(n: usize, m: usize, nb: usize, mb: usize) -> NetGain {
    match forward_regime(n, m) {
        ForwardRegime::Moderate => NetGain::NoGain,
        ForwardRegime::VeryStrong => {
            // alpha = 2 exactly leaves no room above C_no.
            if m > 2 * n && mb > 0 && mb < 2 * nb {
                NetGain::Gain
            } else {
                NetGain::NoGain
            }
        }
        ForwardRegime::Weak => {
            if m == 0 || (nb == 0 && mb == 0) {
                NetGain::NoGain
            } else if 3 * mb > 2 * nb {
                NetGain::Gain
            } else {
                NetGain::Open
            }
        }
    }
}

pub fn classify_regime(cfg: &ChannelConfig) -> RegimeLabel {
    RegimeLabel {
        forward: forward_regime(cfg.n, cfg.m),
        backward: backward_regime(cfg.nb, cfg.mb),
        netgain: netgain_label(cfg.n, cfg.m, cfg.nb, cfg.mb),
    }
}

pub fn capacity_report(cfg: &ChannelConfig) -> CapacityReport {
    CapacityReport {
        c_no: c_no(cfg.n, cfg.m),
        c_pf: c_pf(cfg.n, cfg.m),
        inner: inner_sum(cfg),
        outer: outer_sum(cfg),
        matched: is_matched(cfg),
        regime: classify_regime(cfg),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetGainPoint {
    pub lambda: Rational,
    pub fb_gain: Rational,
    pub indep_gain: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetGainCurve {
    pub points: Vec<NetGainPoint>,
    pub label: NetGain,
}

pub fn fb_gain(cfg: &ChannelConfig) -> Rational {
    inner_sum(cfg) - c_no(cfg.n, cfg.m)
}

pub fn indep_gain(cfg: &ChannelConfig) -> Rational {
    cfg.lambda * c_no(cfg.nb, cfg.mb)
}

/// Outer-bound counterpart of `fb_gain`, an optimistic figure in the open regime.
pub fn fb_gain_outer(cfg: &ChannelConfig) -> Rational {
    outer_sum(cfg) - c_no(cfg.n, cfg.m)
}

pub fn net_gain(cfg: &ChannelConfig, grid: &[Rational]) -> NetGainCurve {
    let points: Vec<NetGainPoint> = grid
        .iter()
        .map(|&lambda| {
            let c = cfg.with_lambda(lambda);
            NetGainPoint { lambda, fb_gain: fb_gain(&c), indep_gain: indep_gain(&c) }
        })
        .collect();
    let label = if points.iter().any(|p| p.fb_gain > p.indep_gain) {
        NetGain::Gain
    } else {
        match netgain_label(cfg.n, cfg.m, cfg.nb, cfg.mb) {
            NetGain::Gain => NetGain::NoGain,
            other => other,
        }
    };
    NetGainCurve { points, label }
}

/// `k` evenly spaced points `0, 1/(k-1), ..., 1`.
pub fn lambda_grid(k: usize) -> Vec<Rational> {
    assert!(k >= 2);
    (0..k).map(|i| Rational::new(i as i64, (k - 1) as i64)).collect()
}

/// Sum-rate bounds when the forward IC spends a fraction `lambda_t` on relaying
/// backward messages and the backward IC a fraction `lambda` on feedback,
/// with no mixing of message types inside a channel use.
pub fn weak_interaction_bound(
    fwd: (usize, usize),
    bwd: (usize, usize),
    lambda: Rational,
    lambda_t: Rational,
) -> (Rational, Rational) {
    let (n, m) = fwd;
    let (nb, mb) = bwd;
    let one = Rational::from_integer(1);
    let two = Rational::from_integer(2);
    let cfg = ChannelConfig { n, m, nb, mb, lambda };
    let x = r(feedback_levels_outer(&cfg));
    let r_sum = rmin((one - lambda_t) * c_no(n, m) + two * lambda * x, (one - lambda_t) * c_pf(n, m));
    let rt_sum = rmin(two * lambda_t * r(n), (one - lambda) * c_no(nb, mb));
    (r_sum, rt_sum)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeakOptimum {
    pub lambda: Rational,
    pub lambda_t: Rational,
    pub r_sum: Rational,
    pub rt_sum: Rational,
}

/// Largest forward bound subject to the backward bound reaching `target`.
/// Both bounds are piecewise linear in `(lambda, lambda_t)`, so the optimum sits
/// on a pairwise intersection of the constraint and breakpoint lines.
/// Ties go to the smallest `lambda_t`, then the smallest `lambda`.
pub fn weak_for_target(fwd: (usize, usize), bwd: (usize, usize), target: Rational) -> Option<WeakOptimum> {
    let (n, m) = fwd;
    let zero = Rational::zero();
    let one = Rational::from_integer(1);
    let cb = c_no(bwd.0, bwd.1);
    let probe = ChannelConfig { n, m, nb: bwd.0, mb: bwd.1, lambda: zero };
    let x = r(feedback_levels_outer(&probe));
    let d = c_pf(n, m) - c_no(n, m);
    // a * lambda + b * lambda_t = c
    let mut lines: Vec<(Rational, Rational, Rational)> = vec![
        (one, zero, zero),
        (one, zero, one),
        (zero, one, zero),
        (zero, one, one),
        (zero, Rational::from_integer(2) * r(n), target),
        (cb, zero, cb - target),
        (Rational::from_integer(2) * x, d, d),
    ];
    lines.retain(|(a, b, _)| !(a.is_zero() && b.is_zero()));
    let mut best: Option<WeakOptimum> = None;
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let (a1, b1, c1) = lines[i];
            let (a2, b2, c2) = lines[j];
            let det = a1 * b2 - a2 * b1;
            if det.is_zero() {
                continue;
            }
            let l = (c1 * b2 - c2 * b1) / det;
            let lt = (a1 * c2 - a2 * c1) / det;
            if l.is_negative() || lt.is_negative() || l > one || lt > one {
                continue;
            }
            let (rs, rt) = weak_interaction_bound(fwd, bwd, l, lt);
            if rt < target {
                continue;
            }
            let cand = WeakOptimum { lambda: l, lambda_t: lt, r_sum: rs, rt_sum: rt };
            let better = match &best {
                None => true,
                Some(b) => (cand.r_sum, -cand.lambda_t, -cand.lambda) > (b.r_sum, -b.lambda_t, -b.lambda),
            };
            if better {
                best = Some(cand);
            }
        }
    }
    best
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PairingError {
    #[error("sub-channel lists are empty")]
    Empty,
    #[error("{forwards} forward and {backwards} backward sub-channels cannot be paired")]
    Mismatch { forwards: usize, backwards: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pairing {
    /// `(forward index, backward index)`, sorted by forward index.
    pub pairs: Vec<(usize, usize)>,
    pub gains: Vec<Rational>,
    pub total: Rational,
}

pub fn pair_net_gain(fwd: (usize, usize), bwd: (usize, usize), lambda: Rational) -> Rational {
    let cfg = ChannelConfig { n: fwd.0, m: fwd.1, nb: bwd.0, mb: bwd.1, lambda };
    let g = fb_gain(&cfg) - indep_gain(&cfg);
    if g.is_positive() {
        g
    } else {
        Rational::zero()
    }
}

/// Maximum total net gain over perfect matchings; among optimal matchings the
/// lexicographically smallest backward-index sequence wins.
pub fn pair_subchannels(
    forwards: &[(usize, usize)],
    backwards: &[(usize, usize)],
    lambda: Rational,
) -> Result<Pairing, PairingError> {
    if forwards.is_empty() || backwards.is_empty() {
        return Err(PairingError::Empty);
    }
    if forwards.len() != backwards.len() {
        return Err(PairingError::Mismatch { forwards: forwards.len(), backwards: backwards.len() });
    }
    let k = forwards.len();
    let gains: Vec<Vec<Rational>> = forwards
        .iter()
        .map(|&f| backwards.iter().map(|&b| pair_net_gain(f, b, lambda)).collect())
        .collect();
    let den = gains.iter().flatten().fold(1i64, |acc, g| num_integer::lcm(acc, *g.denom()));
    let w: Vec<Vec<i128>> = gains
        .iter()
        .map(|row| row.iter().map(|g| (*g.numer() as i128) * (den / g.denom()) as i128).collect())
        .collect();
    let best = assignment_value(&w, &vec![None; k]);
    let mut fixed: Vec<Option<usize>> = vec![None; k];
    for i in 0..k {
        for j in 0..k {
            if fixed.contains(&Some(j)) {
                continue;
            }
            fixed[i] = Some(j);
            if assignment_value(&w, &fixed) == best {
                break;
            }
            fixed[i] = None;
        }
    }
    let pairs: Vec<(usize, usize)> = fixed.iter().enumerate().map(|(i, j)| (i, j.unwrap())).collect();
    let chosen: Vec<Rational> = pairs.iter().map(|&(i, j)| gains[i][j]).collect();
    let total = chosen.iter().fold(Rational::zero(), |a, &b| a + b);
    Ok(Pairing { pairs, gains: chosen, total })
}

/// Maximum weight of a perfect matching where row `i` is forced onto
/// column `fixed[i]` when set.
fn assignment_value(w: &[Vec<i128>], fixed: &[Option<usize>]) -> i128 {
    let k = w.len();
    let mut base = 0i128;
    let rows: Vec<usize> = (0..k).filter(|&i| fixed[i].is_none()).collect();
    let cols: Vec<usize> = (0..k).filter(|&j| !fixed.contains(&Some(j))).collect();
    for (i, f) in fixed.iter().enumerate() {
        if let Some(j) = f {
            base += w[i][*j];
        }
    }
    if rows.is_empty() {
        return base;
    }
    let cost: Vec<Vec<i128>> = rows.iter().map(|&i| cols.iter().map(|&j| -w[i][j]).collect()).collect();
    base - hungarian(&cost)
}

/// Minimum-cost perfect assignment on a square matrix (potentials form of the
/// Hungarian method, O(k^3)).
fn hungarian(cost: &[Vec<i128>]) -> i128 {
    let k = cost.len();
    let inf = i128::MAX / 4;
    let mut u = vec![0i128; k + 1];
    let mut v = vec![0i128; k + 1];
    let mut p = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for i in 1..=k {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=k {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=k).map(|j| cost[p[j] - 1][j - 1]).sum()
}

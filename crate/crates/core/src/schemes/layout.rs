//! Level layouts for each scheme kind.

use std::collections::VecDeque;

use num_integer::Integer;

use super::{
    assemble, moderate_code, regime_of, schedule, to_usize, weak_path_levels, Draft, LevelSource, ModerateCode,
    MsgBit, Role, Schedule, SchemeError, SchemeKind, SchemeSpec, Terminal, MAX_SLOTS_PER_STAGE,
};
use crate::capacity::{self, BackwardRegime, ForwardRegime};
use crate::channel::{ChannelConfig, Rational};

/// Which backward levels carry the feedback of a weak-regime scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeakPath {
    /// User k~ returns its clean extra bits over the cross link (Type II).
    Cross,
    /// User k~ returns extra-plus-private sums over private levels (Type III).
    Private,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Family {
    Strong,
    Weak(WeakPath),
}

const K_NO_CARRY: usize = 64;
const K_CARRY: usize = 16;

fn regime_error(kind: SchemeKind, cfg: &ChannelConfig, reason: &str) -> SchemeError {
    SchemeError::Regime { kind, n: cfg.n, m: cfg.m, nb: cfg.nb, mb: cfg.mb, reason: reason.to_string() }
}

/// The scheme reaching `inner_sum` for this configuration.
pub fn default_kind(cfg: &ChannelConfig) -> SchemeKind {
    match regime_of(cfg) {
        ForwardRegime::VeryStrong => SchemeKind::TypeI,
        ForwardRegime::Moderate => SchemeKind::NonFeedback,
        ForwardRegime::Weak => match capacity::backward_regime(cfg.nb, cfg.mb) {
            BackwardRegime::CrossHeavy => SchemeKind::TypeII,
            BackwardRegime::PrivateHeavy => SchemeKind::TypeIII,
        },
    }
}

pub fn compile(kind: SchemeKind, cfg: &ChannelConfig) -> Result<SchemeSpec, SchemeError> {
    let fwd = regime_of(cfg);
    let bwd = capacity::backward_regime(cfg.nb, cfg.mb);
    match kind {
        SchemeKind::NonFeedback => nonfeedback(cfg),
        SchemeKind::TypeI => {
            if fwd != ForwardRegime::VeryStrong {
                return Err(regime_error(kind, cfg, "needs m >= 2n"));
            }
            two_stage(kind, cfg, Family::Strong)
        }
        SchemeKind::TypeII => {
            if fwd != ForwardRegime::Weak || bwd != BackwardRegime::CrossHeavy {
                return Err(regime_error(kind, cfg, "needs 3m < 2n and 2mb >= nb"));
            }
            two_stage(kind, cfg, Family::Weak(WeakPath::Cross))
        }
        SchemeKind::TypeIII => {
            if fwd != ForwardRegime::Weak || bwd != BackwardRegime::PrivateHeavy {
                return Err(regime_error(kind, cfg, "needs 3m < 2n and 2mb < nb"));
            }
            two_stage(kind, cfg, Family::Weak(WeakPath::Private))
        }
        SchemeKind::FourMessage => compile_four_message(cfg),
        SchemeKind::LinearWitness => Err(regime_error(kind, cfg, "witnesses come from the oracle search")),
    }
}

/// Either weak-regime construction regardless of the backward ratio.
pub fn compile_weak_path(cfg: &ChannelConfig, path: WeakPath) -> Result<SchemeSpec, SchemeError> {
    let kind = match path {
        WeakPath::Cross => SchemeKind::TypeII,
        WeakPath::Private => SchemeKind::TypeIII,
    };
    if regime_of(cfg) != ForwardRegime::Weak {
        return Err(regime_error(kind, cfg, "needs 3m < 2n"));
    }
    two_stage(kind, cfg, Family::Weak(path))
}

struct Builder {
    q: usize,
    qb: usize,
    msgs: Vec<MsgBit>,
    counters: [usize; 4],
    primes: [usize; 2],
    priors: Vec<(Terminal, Vec<usize>)>,
    obligations: Vec<(Terminal, Vec<usize>)>,
    forward: Vec<[Vec<LevelSource>; 2]>,
    backward: Vec<[Option<Vec<LevelSource>>; 2]>,
}

const STEMS: [&str; 4] = ["a", "b", "ã", "b̃"];

impl Builder {
    fn new(cfg: &ChannelConfig) -> Self {
        Builder {
            q: cfg.q(),
            qb: cfg.qb(),
            msgs: Vec::new(),
            counters: [0; 4],
            primes: [0; 2],
            priors: Vec::new(),
            obligations: Vec::new(),
            forward: Vec::new(),
            backward: Vec::new(),
        }
    }

    fn bit(&mut self, owner: Terminal, target: Option<Terminal>, role: Role) -> usize {
        let o = owner.index();
        let name = if role == Role::CarryIn {
            self.primes[o] += 1;
            format!("{}'{}", STEMS[o], self.primes[o])
        } else {
            self.counters[o] += 1;
            format!("{}{}", STEMS[o], self.counters[o])
        };
        self.msgs.push(MsgBit { name, owner, target, role });
        self.msgs.len() - 1
    }

    fn silent_forward(&self) -> [Vec<LevelSource>; 2] {
        [0, 1].map(|_| vec![LevelSource::Intent(Vec::new()); self.q])
    }

    fn finish(mut self, kind: SchemeKind, cfg: &ChannelConfig, m_slots: usize, fresh: usize, extra: usize, carry: usize) -> Draft {
        // A lone backward bit goes by its bare stem.
        for o in 2..4 {
            if self.counters[o] == 1 {
                if let Some(b) = self.msgs.iter_mut().find(|b| b.owner.index() == o) {
                    b.name = STEMS[o].to_string();
                }
            }
        }
        let backward_message_bits = self.msgs.iter().filter(|b| !b.owner.is_tx()).count();
        Draft {
            kind,
            cfg: cfg.clone(),
            m_slots,
            fresh_bits_per_user_per_stage: fresh,
            extra_bits_per_user: extra,
            backward_message_bits,
            carry_bits_per_user: carry,
            messages: self.msgs,
            priors: self.priors,
            obligations: self.obligations,
            forward: self.forward,
            backward: self.backward,
        }
    }
}

/// Forward level roles of the two-stage layouts.
struct Geometry {
    fresh: Vec<usize>,
    extra: Vec<usize>,
}

fn geometry(cfg: &ChannelConfig, family: Family) -> Geometry {
    let (n, m) = (cfg.n, cfg.m);
    match family {
        Family::Strong => Geometry { fresh: (0..n).collect(), extra: (n..m.saturating_sub(n)).collect() },
        Family::Weak(_) => {
            let u = (2 * m).saturating_sub(n);
            let e = m.min(2 * n - 3 * m);
            Geometry { fresh: (0..u).chain(m..n).collect(), extra: (u..u + e).collect() }
        }
    }
}

#[derive(Clone, Copy)]
struct Item {
    msg: usize,
    polluted: Option<usize>,
}

fn feedback_levels(cfg: &ChannelConfig, family: Family) -> usize {
    match family {
        Family::Strong => cfg.nb,
        Family::Weak(path) => weak_path_levels(cfg, path),
    }
}

/// Finds the block length and schedule, enlarging `M` beyond the smallest
/// integral choice only when the smallest one has no causal schedule.
fn plan_block(cfg: &ChannelConfig, e: usize, f: usize) -> Result<(usize, usize, Schedule), SchemeError> {
    let two_lambda = cfg.lambda * 2;
    let g = (two_lambda * Rational::from_integer(f as i64)).min(Rational::from_integer(e as i64));
    let m0 = (*g.denom() as usize).lcm(&(*two_lambda.denom() as usize));
    for (carry, k_max) in [(false, K_NO_CARRY), (true, K_CARRY)] {
        for k in 1..=k_max {
            let m = m0 * k;
            if m > MAX_SLOTS_PER_STAGE {
                break;
            }
            let b = to_usize(g * Rational::from_integer(m as i64));
            let a_max = to_usize(two_lambda * Rational::from_integer(m as i64));
            if let Some(s) = schedule(m, e, f, b, a_max, carry) {
                return Ok((m, b, s));
            }
        }
    }
    Err(SchemeError::UnsupportedLambda(cfg.lambda.to_string()))
}

fn two_stage(kind: SchemeKind, cfg: &ChannelConfig, family: Family) -> Result<SchemeSpec, SchemeError> {
    let geo = geometry(cfg, family);
    let e = geo.extra.len();
    let f = feedback_levels(cfg, family);
    let (m_slots, b, sched) = plan_block(cfg, e, f)?;
    let t = 2 * m_slots;
    let (n, m) = (cfg.n, cfg.m);
    let mut bd = Builder::new(cfg);

    // Extras originated by user u wait for feedback, then for a relay by the other user.
    let mut await_fb: [VecDeque<Item>; 2] = [VecDeque::new(), VecDeque::new()];
    let mut await_relay: [VecDeque<Item>; 2] = [VecDeque::new(), VecDeque::new()];
    for u in 0..2 {
        let (tx_u, tx_o) = (Terminal::tx(u), Terminal::tx(1 - u));
        let (rx_u, rx_o) = (Terminal::rx(u), Terminal::rx(1 - u));
        for _ in 0..sched.carry {
            let item = match family {
                Family::Strong => {
                    let x = bd.bit(tx_u, Some(rx_u), Role::CarryIn);
                    bd.priors.push((tx_o, vec![x]));
                    Item { msg: x, polluted: None }
                }
                Family::Weak(_) => {
                    let h = bd.bit(tx_u, None, Role::CarryIn);
                    let p = bd.bit(tx_o, Some(rx_o), Role::CarryIn);
                    bd.priors.push((tx_o, vec![h]));
                    bd.priors.push((rx_u, vec![h]));
                    bd.priors.push((rx_o, vec![p, h]));
                    Item { msg: h, polluted: Some(p) }
                }
            };
            await_relay[u].push_back(item);
        }
    }

    let mut extras_desc = geo.extra.clone();
    extras_desc.reverse();
    for s in 0..t {
        let mut levels = bd.silent_forward();
        let mut fresh_at: [Vec<Option<usize>>; 2] = [vec![None; bd.q], vec![None; bd.q]];
        let mut originated: [Vec<(usize, Item)>; 2] = [Vec::new(), Vec::new()];
        let (r, o) = (sched.relay[s], sched.originate[s]);
        for k in 0..2 {
            let mut role = vec![0u8; bd.q];
            for &l in &geo.fresh {
                role[l] = 1;
            }
            for &l in extras_desc.iter().take(r) {
                role[l] = 2;
            }
            for &l in extras_desc.iter().skip(r).take(o) {
                role[l] = 3;
            }
            for l in 0..bd.q {
                match role[l] {
                    1 => {
                        let x = bd.bit(Terminal::tx(k), Some(Terminal::rx(k)), Role::Fresh);
                        fresh_at[k][l] = Some(x);
                        levels[k][l] = LevelSource::Intent(vec![x]);
                    }
                    2 => {
                        let item = await_relay[1 - k]
                            .pop_front()
                            .ok_or_else(|| SchemeError::Causality(format!("slot {s}: relay before feedback")))?;
                        levels[k][l] = LevelSource::Intent(vec![item.msg]);
                    }
                    3 => {
                        let x = bd.bit(Terminal::tx(k), Some(Terminal::rx(k)), Role::Fresh);
                        originated[k].push((l, Item { msg: x, polluted: None }));
                        levels[k][l] = LevelSource::Intent(vec![x]);
                    }
                    _ => {}
                }
            }
        }
        for u in 0..2 {
            for (l, mut item) in originated[u].drain(..) {
                if let Family::Weak(_) = family {
                    let hit = l + n - m;
                    item.polluted = Some(fresh_at[1 - u].get(hit).copied().flatten().ok_or_else(|| {
                        SchemeError::Malformed(format!("extra level {l} does not land on a private bit"))
                    })?);
                }
                await_fb[u].push_back(item);
            }
        }
        bd.forward.push(levels);

        let fb = sched.feedback[s];
        let mut back: [Option<Vec<LevelSource>>; 2] = [None, None];
        if fb > 0 {
            for u in 0..2 {
                let sender = match family {
                    Family::Weak(WeakPath::Cross) => u,
                    _ => 1 - u,
                };
                let base = match family {
                    Family::Weak(WeakPath::Private) => cfg.mb,
                    _ => 0,
                };
                let mut v = vec![LevelSource::Intent(Vec::new()); bd.qb];
                for j in 0..fb {
                    let item = await_fb[u]
                        .pop_front()
                        .ok_or_else(|| SchemeError::Causality(format!("slot {s}: feedback before origination")))?;
                    let ids = match (family, item.polluted) {
                        (Family::Weak(WeakPath::Private), Some(p)) => vec![item.msg, p],
                        _ => vec![item.msg],
                    };
                    v[base + j] = LevelSource::Intent(ids);
                    await_relay[u].push_back(item);
                }
                back[sender] = Some(v);
            }
        }
        bd.backward.push(back);
    }

    for u in 0..2 {
        if !await_fb[u].is_empty() || await_relay[u].len() != sched.carry {
            return Err(SchemeError::Malformed("extra bits left unscheduled".into()));
        }
        let (tx_o, rx_u, rx_o) = (Terminal::tx(1 - u), Terminal::rx(u), Terminal::rx(1 - u));
        for item in await_relay[u].drain(..) {
            match item.polluted {
                None => {
                    bd.msgs[item.msg].role = Role::Deferred;
                    bd.obligations.push((tx_o, vec![item.msg]));
                }
                Some(p) => {
                    bd.msgs[p].role = Role::Deferred;
                    bd.obligations.push((tx_o, vec![item.msg]));
                    bd.obligations.push((rx_u, vec![item.msg]));
                    bd.obligations.push((rx_o, vec![p, item.msg]));
                }
            }
        }
    }
    let fresh = m_slots * geo.fresh.len();
    assemble(bd.finish(kind, cfg, m_slots, fresh, b, sched.carry))
}

fn nonfeedback(cfg: &ChannelConfig) -> Result<SchemeSpec, SchemeError> {
    let quiet = cfg.with_lambda(Rational::from_integer(0));
    match regime_of(cfg) {
        ForwardRegime::VeryStrong => relabel(two_stage(SchemeKind::NonFeedback, &quiet, Family::Strong)?, cfg),
        ForwardRegime::Weak => {
            relabel(two_stage(SchemeKind::NonFeedback, &quiet, Family::Weak(WeakPath::Cross))?, cfg)
        }
        ForwardRegime::Moderate => {
            let code = moderate_code(cfg.n, cfg.m).ok_or(SchemeError::NoModerateCode(cfg.n, cfg.m))?;
            moderate_block(cfg, &code)
        }
    }
}

fn relabel(mut spec: SchemeSpec, cfg: &ChannelConfig) -> Result<SchemeSpec, SchemeError> {
    spec.cfg = cfg.clone();
    Ok(spec)
}

fn moderate_block(cfg: &ChannelConfig, code: &ModerateCode) -> Result<SchemeSpec, SchemeError> {
    let mut bd = Builder::new(cfg);
    for slot in 0..2 {
        let mut levels = bd.silent_forward();
        for k in 0..2 {
            let cols = if (slot + k) % 2 == 0 { &code.g_a } else { &code.g_b };
            let bits: Vec<usize> =
                (0..cols.len()).map(|_| bd.bit(Terminal::tx(k), Some(Terminal::rx(k)), Role::Fresh)).collect();
            for (l, level) in levels[k].iter_mut().enumerate() {
                let taps = ModerateCode::level_taps(cols, l);
                *level = LevelSource::Intent(taps.into_iter().map(|j| bits[j]).collect());
            }
        }
        bd.forward.push(levels);
        bd.backward.push([None, None]);
    }
    let fresh = code.r1.max(code.r2);
    assemble(bd.finish(SchemeKind::NonFeedback, cfg, 1, fresh, 0, 0))
}

/// Two-slot exchange of two forward bits per user and one backward bit per
/// user over forward IC (2,1) with the whole backward channel in use.
pub fn compile_four_message(cfg: &ChannelConfig) -> Result<SchemeSpec, SchemeError> {
    let kind = SchemeKind::FourMessage;
    if (cfg.n, cfg.m) != (2, 1) {
        return Err(regime_error(kind, cfg, "needs forward IC (2,1)"));
    }
    if cfg.lambda != Rational::from_integer(1) {
        return Err(regime_error(kind, cfg, "uses the backward channel in every slot"));
    }
    if cfg.qb() != 1 {
        return Err(SchemeError::Wiring(cfg.nb, cfg.mb));
    }
    let mut bd = Builder::new(cfg);
    let a1 = bd.bit(Terminal::Tx1, Some(Terminal::Rx1), Role::Fresh);
    let b1 = bd.bit(Terminal::Tx2, Some(Terminal::Rx2), Role::Fresh);
    let ta = bd.bit(Terminal::Rx1, Some(Terminal::Tx1), Role::Fresh);
    let tb = bd.bit(Terminal::Rx2, Some(Terminal::Tx2), Role::Fresh);
    let a2 = bd.bit(Terminal::Tx1, Some(Terminal::Rx1), Role::Fresh);
    let b2 = bd.bit(Terminal::Tx2, Some(Terminal::Rx2), Role::Fresh);
    let it = |ids: &[usize]| LevelSource::Intent(ids.to_vec());
    bd.forward.push([vec![it(&[]), it(&[a1])], vec![it(&[]), it(&[b1])]]);
    bd.backward.push([Some(vec![it(&[ta])]), Some(vec![it(&[tb])])]);
    bd.forward.push([vec![it(&[tb]), it(&[a2])], vec![it(&[ta]), it(&[b2])]]);
    bd.backward.push([Some(vec![it(&[tb])]), Some(vec![it(&[ta])])]);
    match assemble(bd.finish(kind, cfg, 1, 1, 0, 0)) {
        Err(SchemeError::Unresolvable { .. } | SchemeError::Undecodable { .. }) => {
            Err(SchemeError::Wiring(cfg.nb, cfg.mb))
        }
        other => other,
    }
}

/// Schemes for the two corners of the four-message region on forward (2,1),
/// backward `(nb, mb)`: forward-only `(3, 0)` by Type II at half feedback, and
/// backward-only `(0, 1)` by Type I run on the reversed channel, where the
/// forward IC carries the feedback. The second spec is expressed in reversed
/// roles: its forward rate is the backward rate of the original channel.
pub fn four_message_corners(nb: usize, mb: usize) -> Result<(SchemeSpec, SchemeSpec), SchemeError> {
    let half = Rational::new(1, 2);
    let cfg = ChannelConfig::new(2, 1, nb, mb, half).map_err(|e| SchemeError::Malformed(e.to_string()))?;
    let forward_corner = compile(SchemeKind::TypeII, &cfg)?;
    let backward_corner = compile(default_kind(&cfg.reversed()), &cfg.reversed())?;
    Ok((forward_corner, backward_corner))
}

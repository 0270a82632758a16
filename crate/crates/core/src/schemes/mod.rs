//! Transmission plans for the two-way IC.
//!
//! A plan lists, for every slot and transmitter, what each level should carry
//! as an XOR of message bits (the *intent*). Assembly replays the block
//! symbolically: every intent is rewritten as an XOR of bits the transmitter
//! actually has at that time (own messages, carried-over knowledge, earlier
//! receptions), and every receiver gets one decoding formula per wanted bit.
//! Both steps are GF(2) elimination; a plan that would need a bit before it is
//! available fails to assemble.
//!
//! Timing inside slot `i`: the forward transmission happens first and may use
//! backward receptions of slots `< i`; the backward transmission follows and
//! may use forward receptions of slots `<= i`.

mod json;
mod layout;
mod moderate;
mod schedule;

use std::fmt;
use std::ops::{BitXor, BitXorAssign};

use num_traits::ToPrimitive;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capacity::{self, ForwardRegime};
use crate::channel::{superpose, ChannelConfig, LevelVector, Rational};
use crate::gf2::{BitRow, Span};

pub use json::spec_from_json;
pub use layout::{compile, compile_four_message, compile_weak_path, default_kind, four_message_corners, WeakPath};
pub use moderate::{moderate_code, ModerateCode};
pub use schedule::{schedule, Schedule};

/// Largest number of slots per stage tried before a feedback fraction is rejected.
pub const MAX_SLOTS_PER_STAGE: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeKind {
    NonFeedback,
    TypeI,
    TypeII,
    TypeIII,
    FourMessage,
    /// Found by the bounded linear search rather than compiled from a layout.
    LinearWitness,
}

impl SchemeKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::NonFeedback => "nofb",
            SchemeKind::TypeI => "type1",
            SchemeKind::TypeII => "type2",
            SchemeKind::TypeIII => "type3",
            SchemeKind::FourMessage => "fourmsg",
            SchemeKind::LinearWitness => "witness",
        }
    }
}

/// Users 1, 2 send forward and receive feedback; users 1~, 2~ receive forward
/// and send backward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Terminal {
    Tx1,
    Tx2,
    Rx1,
    Rx2,
}

impl Terminal {
    pub const ALL: [Terminal; 4] = [Terminal::Tx1, Terminal::Tx2, Terminal::Rx1, Terminal::Rx2];

    pub fn index(self) -> usize {
        self as usize
    }

    /// 0 for user 1 / 1~, 1 for user 2 / 2~.
    pub fn user(self) -> usize {
        match self {
            Terminal::Tx1 | Terminal::Rx1 => 0,
            Terminal::Tx2 | Terminal::Rx2 => 1,
        }
    }

    pub fn is_tx(self) -> bool {
        matches!(self, Terminal::Tx1 | Terminal::Tx2)
    }

    pub fn tx(user: usize) -> Terminal {
        [Terminal::Tx1, Terminal::Tx2][user]
    }

    pub fn rx(user: usize) -> Terminal {
        [Terminal::Rx1, Terminal::Rx2][user]
    }

    pub fn label(self) -> &'static str {
        match self {
            Terminal::Tx1 => "1",
            Terminal::Tx2 => "2",
            Terminal::Rx1 => "1~",
            Terminal::Rx2 => "2~",
        }
    }

    pub fn parse(s: &str) -> Option<Terminal> {
        Terminal::ALL.into_iter().find(|t| t.label() == s)
    }
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    /// Originates in this block and is decoded in it.
    Fresh,
    /// Originates in this block; its decoding completes in the next block.
    Deferred,
    /// Left over from the previous block.
    CarryIn,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MsgBit {
    pub name: String,
    pub owner: Terminal,
    pub target: Option<Terminal>,
    pub role: Role,
}

impl MsgBit {
    pub fn is_forward(&self) -> bool {
        self.owner.is_tx()
    }

    /// Counted towards the block's rate.
    pub fn is_new(&self) -> bool {
        self.role != Role::CarryIn
    }

    /// Has to be recovered at its target by the end of this block.
    pub fn due(&self) -> Option<Terminal> {
        if self.role == Role::Deferred {
            None
        } else {
            self.target
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Msg(usize),
    /// Index into `SchemeSpec::priors`.
    Prior(usize),
    /// Own reception at `(slot, level)`.
    Rx { slot: usize, level: usize },
}

pub type Expr = Vec<Term>;

/// A linear form known to `terminal` before the block starts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Knowledge {
    pub terminal: Terminal,
    pub form: BitRow,
}

#[derive(Clone, Debug)]
pub struct SchemeSpec {
    pub kind: SchemeKind,
    pub cfg: ChannelConfig,
    /// Slots per stage; the block has `2 * m_slots` slots.
    pub m_slots: usize,
    pub fresh_bits_per_user_per_stage: usize,
    pub extra_bits_per_user: usize,
    pub backward_message_bits: usize,
    pub carry_bits_per_user: usize,
    pub messages: Vec<MsgBit>,
    pub priors: Vec<Knowledge>,
    /// Knowledge that must hold at block end so the next block can start.
    pub obligations: Vec<Knowledge>,
    /// Intended content of every forward level, as a linear form over messages.
    pub level_plan: Vec<[Vec<BitRow>; 2]>,
    /// Same for backward levels; `None` marks a silent user.
    pub feedback_plan: Vec<[Option<Vec<BitRow>>; 2]>,
    pub forward: Vec<[Vec<Expr>; 2]>,
    pub backward: Vec<[Option<Vec<Expr>>; 2]>,
    pub decoders: [Vec<(usize, Expr)>; 4],
    pub obligation_exprs: Vec<Expr>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemeError {
    #[error("{kind:?} does not apply to (n,m,nb,mb)=({n},{m},{nb},{mb}): {reason}")]
    Regime { kind: SchemeKind, n: usize, m: usize, nb: usize, mb: usize, reason: String },
    #[error("feedback fraction {0} needs more than the supported number of slots per stage")]
    UnsupportedLambda(String),
    #[error("no linear code found for the moderate channel ({0},{1})")]
    NoModerateCode(usize, usize),
    #[error("terminal {terminal} cannot form the content of slot {slot} level {level} from what it knows")]
    Unresolvable { terminal: Terminal, slot: usize, level: usize },
    #[error("terminal {terminal} cannot recover {bit}")]
    Undecodable { terminal: Terminal, bit: String },
    #[error("terminal {terminal} does not hold carried knowledge at block end")]
    Obligation { terminal: Terminal },
    #[error("causality violation: {0}")]
    Causality(String),
    #[error("backward wiring (nb,mb)=({0},{1}) cannot carry the four-message exchange")]
    Wiring(usize, usize),
    #[error("malformed plan: {0}")]
    Malformed(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
}

/// Rational rates in bits per forward channel use.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatePoint {
    pub forward: [Rational; 2],
    pub backward: [Rational; 2],
    pub forward_sum: Rational,
    pub backward_sum: Rational,
}

/// Values for every message bit of a spec, in `spec.messages` order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MessageSet {
    pub bits: Vec<u8>,
}

impl MessageSet {
    pub fn zeros(spec: &SchemeSpec) -> Self {
        MessageSet { bits: vec![0; spec.messages.len()] }
    }

    /// Bit `i` of `index` becomes message `i`.
    pub fn from_index(spec: &SchemeSpec, index: u64) -> Self {
        MessageSet { bits: (0..spec.messages.len()).map(|i| ((index >> i) & 1) as u8).collect() }
    }

    pub fn random<R: Rng>(spec: &SchemeSpec, rng: &mut R) -> Self {
        MessageSet { bits: (0..spec.messages.len()).map(|_| rng.gen_range(0..2u8)).collect() }
    }

    fn select(&self, spec: &SchemeSpec, owner: Terminal) -> Vec<u8> {
        spec.messages.iter().zip(&self.bits).filter(|(m, _)| m.owner == owner).map(|(_, &b)| b).collect()
    }

    /// Bits owned by user `k` (0 or 1) for the forward direction.
    pub fn forward(&self, spec: &SchemeSpec, user: usize) -> Vec<u8> {
        self.select(spec, Terminal::tx(user))
    }

    pub fn backward(&self, spec: &SchemeSpec, user: usize) -> Vec<u8> {
        self.select(spec, Terminal::rx(user))
    }
}

pub(crate) trait Lane: Copy + Default + PartialEq + BitXor<Output = Self> + BitXorAssign {}
impl Lane for u8 {}
impl Lane for u64 {}

/// Per-slot, per-terminal history of a block.
#[derive(Clone, Debug)]
pub(crate) struct Replay<T> {
    pub fwd_tx: Vec<[Vec<T>; 2]>,
    pub fwd_rx: Vec<[Vec<T>; 2]>,
    pub bwd_tx: Vec<[Option<Vec<T>>; 2]>,
    pub bwd_rx: Vec<Option<[Vec<T>; 2]>>,
    pub priors: Vec<T>,
}

fn parity<T: Lane>(form: &BitRow, msgs: &[T]) -> T {
    let mut acc = T::default();
    for i in form.ones() {
        acc ^= msgs[i];
    }
    acc
}

pub(crate) fn eval_term<T: Lane>(spec: &SchemeSpec, r: &Replay<T>, t: Terminal, term: &Term, msgs: &[T]) -> Option<T> {
    match *term {
        Term::Msg(i) => Some(msgs[i]),
        Term::Prior(p) => r.priors.get(p).copied(),
        Term::Rx { slot, level } => {
            let k = t.user();
            if t.is_tx() {
                r.bwd_rx.get(slot)?.as_ref()?.get(k)?.get(level).copied()
            } else {
                let _ = spec;
                r.fwd_rx.get(slot)?.get(k)?.get(level).copied()
            }
        }
    }
}

pub(crate) fn eval_expr<T: Lane>(spec: &SchemeSpec, r: &Replay<T>, t: Terminal, e: &Expr, msgs: &[T]) -> Option<T> {
    let mut acc = T::default();
    for term in e {
        acc ^= eval_term(spec, r, t, term, msgs)?;
    }
    Some(acc)
}

impl SchemeSpec {
    pub fn slots(&self) -> usize {
        2 * self.m_slots
    }

    pub fn stages(&self) -> usize {
        2
    }

    pub fn total_bits(&self) -> usize {
        self.messages.len()
    }

    pub fn msg_index(&self, name: &str) -> Option<usize> {
        self.messages.iter().position(|m| m.name == name)
    }

    pub fn backward_active_slots(&self) -> usize {
        self.feedback_plan.iter().filter(|s| s.iter().any(|u| u.is_some())).count()
    }

    /// Plan-active backward levels per backward user over the block.
    pub fn backward_levels_used(&self) -> [usize; 2] {
        let mut used = [0, 0];
        for slot in &self.feedback_plan {
            for (k, u) in slot.iter().enumerate() {
                if let Some(levels) = u {
                    used[k] += levels.iter().filter(|f| !f.is_zero()).count();
                }
            }
        }
        used
    }

    /// `N * lambda * max(nb, mb)` with `N` the block length.
    pub fn backward_budget(&self) -> Rational {
        Rational::from_integer(self.slots() as i64) * self.cfg.lambda * Rational::from_integer(self.cfg.qb() as i64)
    }

    pub fn due_bits(&self, t: Terminal) -> Vec<usize> {
        (0..self.messages.len()).filter(|&i| self.messages[i].due() == Some(t)).collect()
    }

    /// Runs the whole block on lanes of message values.
    pub(crate) fn replay<T: Lane>(&self, msgs: &[T]) -> Replay<T> {
        let cfg = &self.cfg;
        let t = self.slots();
        let priors: Vec<T> = self.priors.iter().map(|p| parity(&p.form, msgs)).collect();
        let mut r = Replay {
            fwd_tx: Vec::with_capacity(t),
            fwd_rx: Vec::with_capacity(t),
            bwd_tx: Vec::with_capacity(t),
            bwd_rx: Vec::with_capacity(t),
            priors,
        };
        for i in 0..t {
            let x: [Vec<T>; 2] = [0, 1].map(|k| {
                self.forward[i][k]
                    .iter()
                    .map(|e| eval_expr(self, &r, Terminal::tx(k), e, msgs).expect("forward plan is causal"))
                    .collect()
            });
            let y = [superpose(&x[0], &x[1], cfg.n, cfg.m), superpose(&x[1], &x[0], cfg.n, cfg.m)];
            r.fwd_tx.push(x);
            r.fwd_rx.push(y);
            let xb: [Option<Vec<T>>; 2] = [0, 1].map(|k| {
                self.backward[i][k].as_ref().map(|levels| {
                    levels
                        .iter()
                        .map(|e| eval_expr(self, &r, Terminal::rx(k), e, msgs).expect("backward plan is causal"))
                        .collect()
                })
            });
            let yb = if xb.iter().all(|v| v.is_none()) {
                None
            } else {
                let z = vec![T::default(); cfg.qb()];
                let a = xb[0].clone().unwrap_or_else(|| z.clone());
                let b = xb[1].clone().unwrap_or(z);
                Some([superpose(&a, &b, cfg.nb, cfg.mb), superpose(&b, &a, cfg.nb, cfg.mb)])
            };
            r.bwd_tx.push(xb);
            r.bwd_rx.push(yb);
        }
        r
    }

    pub fn rate(&self) -> RatePoint {
        scheme_rate(self)
    }
}

/// Exact rates: new bits per user divided by the block length. Carried-in bits
/// are not counted; in steady state they replace the deferred ones one for one.
pub fn scheme_rate(spec: &SchemeSpec) -> RatePoint {
    let t = spec.slots() as i64;
    let count = |owner: Terminal| {
        let c = spec.messages.iter().filter(|m| m.owner == owner && m.is_new()).count();
        Rational::new(c as i64, t)
    };
    let forward = [count(Terminal::Tx1), count(Terminal::Tx2)];
    let backward = [count(Terminal::Rx1), count(Terminal::Rx2)];
    RatePoint { forward, backward, forward_sum: forward[0] + forward[1], backward_sum: backward[0] + backward[1] }
}

fn level_vector_u8(v: &[u8]) -> LevelVector {
    LevelVector::from_bits(v)
}

/// Forward signal of user `user` (0 or 1) in `slot`, from its messages and its
/// backward receptions `fb_history[j]` for `j < slot` (`None` for silent slots).
pub fn encode_forward(
    spec: &SchemeSpec,
    user: usize,
    slot: usize,
    msgs: &MessageSet,
    fb_history: &[Option<LevelVector>],
) -> Result<LevelVector, SchemeError> {
    let t = Terminal::tx(user);
    let plan = spec.forward.get(slot).ok_or_else(|| SchemeError::Malformed(format!("slot {slot}")))?;
    let mut out = Vec::with_capacity(plan[user].len());
    for (level, e) in plan[user].iter().enumerate() {
        let mut acc = 0u8;
        for term in e {
            acc ^= match *term {
                Term::Rx { slot: s, level: l } => {
                    if s >= slot {
                        return Err(SchemeError::Causality(format!(
                            "user {t} slot {slot} level {level} reads backward slot {s}"
                        )));
                    }
                    fb_history
                        .get(s)
                        .and_then(|v| v.as_ref())
                        .map(|v| v.get(l))
                        .ok_or_else(|| SchemeError::Causality(format!("user {t} lacks backward reception {s}")))?
                }
                Term::Msg(i) => msgs.bits[i],
                Term::Prior(p) => parity(&spec.priors[p].form, &msgs.bits),
            };
        }
        out.push(acc);
    }
    Ok(level_vector_u8(&out))
}

/// Backward signal of user `user`~ in `slot`, or `None` when silent.
/// `rx_history[j]` holds its forward receptions for `j <= slot`.
pub fn encode_backward(
    spec: &SchemeSpec,
    user: usize,
    slot: usize,
    rx_history: &[LevelVector],
    msgs: &MessageSet,
) -> Result<Option<LevelVector>, SchemeError> {
    let t = Terminal::rx(user);
    let plan = spec.backward.get(slot).ok_or_else(|| SchemeError::Malformed(format!("slot {slot}")))?;
    let Some(levels) = &plan[user] else {
        return Ok(None);
    };
    let mut out = Vec::with_capacity(levels.len());
    for (level, e) in levels.iter().enumerate() {
        let mut acc = 0u8;
        for term in e {
            acc ^= match *term {
                Term::Rx { slot: s, level: l } => {
                    if s > slot {
                        return Err(SchemeError::Causality(format!(
                            "user {t} slot {slot} level {level} reads forward slot {s}"
                        )));
                    }
                    rx_history
                        .get(s)
                        .map(|v| v.get(l))
                        .ok_or_else(|| SchemeError::Causality(format!("user {t} lacks forward reception {s}")))?
                }
                Term::Msg(i) => {
                    if spec.messages[i].owner != t {
                        return Err(SchemeError::Causality(format!("user {t} reads foreign bit")));
                    }
                    msgs.bits[i]
                }
                Term::Prior(p) => parity(&spec.priors[p].form, &msgs.bits),
            };
        }
        out.push(acc);
    }
    Ok(Some(level_vector_u8(&out)))
}

/// Receptions of one terminal over a block: forward outputs for users k~,
/// backward outputs (possibly silent) for users k.
pub enum Receptions<'a> {
    Forward(&'a [LevelVector]),
    Backward(&'a [Option<LevelVector>]),
}

/// Bits recovered by terminal `t` from its receptions plus its own messages
/// and carried knowledge, in `spec.due_bits(t)` order. Only bits owned by `t`
/// are read from `own`; carried knowledge of `t` is evaluated on it as a
/// stand-in for what the previous block left behind.
pub fn decode(
    spec: &SchemeSpec,
    t: Terminal,
    rx: Receptions<'_>,
    own: &MessageSet,
) -> Result<Vec<(usize, u8)>, SchemeError> {
    let mut out = Vec::new();
    for (bit, e) in &spec.decoders[t.index()] {
        let mut acc = 0u8;
        for term in e {
            acc ^= match *term {
                Term::Msg(i) => {
                    if spec.messages[i].owner != t {
                        return Err(SchemeError::Malformed(format!("decoder of {t} reads a foreign bit")));
                    }
                    own.bits[i]
                }
                Term::Prior(p) => {
                    if spec.priors[p].terminal != t {
                        return Err(SchemeError::Malformed(format!("decoder of {t} reads foreign knowledge")));
                    }
                    parity(&spec.priors[p].form, &own.bits)
                }
                Term::Rx { slot, level } => match &rx {
                    Receptions::Forward(v) => v.get(slot).map(|x| x.get(level)),
                    Receptions::Backward(v) => v.get(slot).and_then(|x| x.as_ref()).map(|x| x.get(level)),
                }
                .ok_or_else(|| SchemeError::Malformed(format!("missing reception slot {slot}")))?,
            };
        }
        out.push((*bit, acc));
    }
    Ok(out)
}

/// What a plan supplies for a level: a linear form to be realised by
/// elimination, or an explicit expression.
#[derive(Clone, Debug)]
pub(crate) enum LevelSource {
    Intent(Vec<usize>),
    Explicit(Expr),
}

pub(crate) struct Draft {
    pub kind: SchemeKind,
    pub cfg: ChannelConfig,
    pub m_slots: usize,
    pub fresh_bits_per_user_per_stage: usize,
    pub extra_bits_per_user: usize,
    pub backward_message_bits: usize,
    pub carry_bits_per_user: usize,
    pub messages: Vec<MsgBit>,
    pub priors: Vec<(Terminal, Vec<usize>)>,
    pub obligations: Vec<(Terminal, Vec<usize>)>,
    pub forward: Vec<[Vec<LevelSource>; 2]>,
    pub backward: Vec<[Option<Vec<LevelSource>>; 2]>,
}

fn form_of(ids: &[usize], k: usize) -> BitRow {
    let mut f = BitRow::zeros(k);
    for &i in ids {
        f.flip(i);
    }
    f
}

/// What one terminal knows, with the term that produced each inserted row.
struct KnowledgeBase {
    span: Span,
    terms: Vec<Term>,
}

impl KnowledgeBase {
    fn add(&mut self, row: &BitRow, term: Term) {
        let label = self.span.insert(row);
        debug_assert_eq!(label, self.terms.len());
        self.terms.push(term);
    }

    fn realise(&self, target: &BitRow) -> Option<Expr> {
        self.span.express(target).map(|labels| labels.into_iter().map(|l| self.terms[l]).collect())
    }
}

fn expr_form(
    e: &Expr,
    t: Terminal,
    slot_limit: usize,
    backward: bool,
    k: usize,
    prior_forms: &[BitRow],
    fwd_rx: &[[Vec<BitRow>; 2]],
    bwd_rx: &[Option<[Vec<BitRow>; 2]>],
    messages: &[MsgBit],
) -> Result<BitRow, SchemeError> {
    let mut f = BitRow::zeros(k);
    for term in e {
        match *term {
            Term::Msg(i) => {
                if i >= k || messages[i].owner != t {
                    return Err(SchemeError::Causality(format!("{t} uses a bit it does not own")));
                }
                f.flip(i);
            }
            Term::Prior(p) => {
                let form = prior_forms.get(p).ok_or_else(|| SchemeError::Malformed("prior index".into()))?;
                f ^= form;
            }
            Term::Rx { slot, level } => {
                let ok = if backward { slot <= slot_limit } else { slot < slot_limit };
                if !ok {
                    return Err(SchemeError::Causality(format!("{t} reads slot {slot} too early")));
                }
                let row = if t.is_tx() {
                    bwd_rx.get(slot).and_then(|r| r.as_ref()).and_then(|r| r[t.user()].get(level))
                } else {
                    fwd_rx.get(slot).and_then(|r| r[t.user()].get(level))
                };
                f ^= row.ok_or_else(|| SchemeError::Causality(format!("{t} reads a missing reception")))?;
            }
        }
    }
    Ok(f)
}

pub(crate) fn assemble(d: Draft) -> Result<SchemeSpec, SchemeError> {
    let cfg = d.cfg.clone();
    let (q, qb) = (cfg.q(), cfg.qb());
    let k = d.messages.len();
    let slots = 2 * d.m_slots;
    if d.forward.len() != slots || d.backward.len() != slots {
        return Err(SchemeError::Malformed("plan length differs from 2M".into()));
    }
    let prior_forms: Vec<BitRow> = d.priors.iter().map(|(_, ids)| form_of(ids, k)).collect();
    let mut kb: Vec<KnowledgeBase> =
        (0..4).map(|_| KnowledgeBase { span: Span::new(), terms: Vec::new() }).collect();
    for (i, msg) in d.messages.iter().enumerate() {
        kb[msg.owner.index()].add(&BitRow::unit(k, i), Term::Msg(i));
    }
    for (p, (t, _)) in d.priors.iter().enumerate() {
        kb[t.index()].add(&prior_forms[p], Term::Prior(p));
    }
    let mut fwd_rx: Vec<[Vec<BitRow>; 2]> = Vec::with_capacity(slots);
    let mut bwd_rx: Vec<Option<[Vec<BitRow>; 2]>> = Vec::with_capacity(slots);
    let mut level_plan = Vec::with_capacity(slots);
    let mut feedback_plan = Vec::with_capacity(slots);
    let mut forward = Vec::with_capacity(slots);
    let mut backward = Vec::with_capacity(slots);

    for i in 0..slots {
        let mut forms: [Vec<BitRow>; 2] = [Vec::new(), Vec::new()];
        let mut exprs: [Vec<Expr>; 2] = [Vec::new(), Vec::new()];
        for user in 0..2 {
            let t = Terminal::tx(user);
            let plan = &d.forward[i][user];
            if plan.len() != q {
                return Err(SchemeError::Malformed(format!("slot {i} user {t} has {} levels", plan.len())));
            }
            for (level, src) in plan.iter().enumerate() {
                let (form, expr) = match src {
                    LevelSource::Intent(ids) => {
                        let form = form_of(ids, k);
                        let expr = kb[t.index()]
                            .realise(&form)
                            .ok_or(SchemeError::Unresolvable { terminal: t, slot: i, level })?;
                        (form, expr)
                    }
                    LevelSource::Explicit(e) => {
                        (expr_form(e, t, i, false, k, &prior_forms, &fwd_rx, &bwd_rx, &d.messages)?, e.clone())
                    }
                };
                forms[user].push(form);
                exprs[user].push(expr);
            }
        }
        let y = [
            superpose_rows(&forms[0], &forms[1], cfg.n, cfg.m),
            superpose_rows(&forms[1], &forms[0], cfg.n, cfg.m),
        ];
        for user in 0..2 {
            for (level, row) in y[user].iter().enumerate() {
                kb[Terminal::rx(user).index()].add(row, Term::Rx { slot: i, level });
            }
        }
        fwd_rx.push(y);
        level_plan.push(forms);
        forward.push(exprs);

        let mut bforms: [Option<Vec<BitRow>>; 2] = [None, None];
        let mut bexprs: [Option<Vec<Expr>>; 2] = [None, None];
        for user in 0..2 {
            let t = Terminal::rx(user);
            let Some(plan) = &d.backward[i][user] else { continue };
            if plan.len() != qb {
                return Err(SchemeError::Malformed(format!("backward slot {i} user {t} has {} levels", plan.len())));
            }
            let mut fs = Vec::with_capacity(qb);
            let mut es = Vec::with_capacity(qb);
            for (level, src) in plan.iter().enumerate() {
                let (form, expr) = match src {
                    LevelSource::Intent(ids) => {
                        let form = form_of(ids, k);
                        let expr = kb[t.index()]
                            .realise(&form)
                            .ok_or(SchemeError::Unresolvable { terminal: t, slot: i, level })?;
                        (form, expr)
                    }
                    LevelSource::Explicit(e) => {
                        (expr_form(e, t, i, true, k, &prior_forms, &fwd_rx, &bwd_rx, &d.messages)?, e.clone())
                    }
                };
                fs.push(form);
                es.push(expr);
            }
            bforms[user] = Some(fs);
            bexprs[user] = Some(es);
        }
        let yb = if bforms.iter().all(|b| b.is_none()) {
            None
        } else {
            let z = vec![BitRow::zeros(k); qb];
            let a = bforms[0].clone().unwrap_or_else(|| z.clone());
            let b = bforms[1].clone().unwrap_or(z);
            let yb = [superpose_rows(&a, &b, cfg.nb, cfg.mb), superpose_rows(&b, &a, cfg.nb, cfg.mb)];
            for user in 0..2 {
                for (level, row) in yb[user].iter().enumerate() {
                    kb[Terminal::tx(user).index()].add(row, Term::Rx { slot: i, level });
                }
            }
            Some(yb)
        };
        bwd_rx.push(yb);
        feedback_plan.push(bforms);
        backward.push(bexprs);
    }

    let mut decoders: [Vec<(usize, Expr)>; 4] = Default::default();
    for (i, msg) in d.messages.iter().enumerate() {
        if let Some(t) = msg.due() {
            let e = kb[t.index()]
                .realise(&BitRow::unit(k, i))
                .ok_or_else(|| SchemeError::Undecodable { terminal: t, bit: msg.name.clone() })?;
            decoders[t.index()].push((i, e));
        }
    }
    let obligations: Vec<Knowledge> =
        d.obligations.iter().map(|(t, ids)| Knowledge { terminal: *t, form: form_of(ids, k) }).collect();
    let mut obligation_exprs = Vec::with_capacity(obligations.len());
    for ob in &obligations {
        let e = kb[ob.terminal.index()].realise(&ob.form).ok_or(SchemeError::Obligation { terminal: ob.terminal })?;
        obligation_exprs.push(e);
    }
    let priors =
        d.priors.iter().zip(prior_forms).map(|((t, _), form)| Knowledge { terminal: *t, form }).collect();

    let spec = SchemeSpec {
        kind: d.kind,
        cfg,
        m_slots: d.m_slots,
        fresh_bits_per_user_per_stage: d.fresh_bits_per_user_per_stage,
        extra_bits_per_user: d.extra_bits_per_user,
        backward_message_bits: d.backward_message_bits,
        carry_bits_per_user: d.carry_bits_per_user,
        messages: d.messages,
        priors,
        obligations,
        level_plan,
        feedback_plan,
        forward,
        backward,
        decoders,
        obligation_exprs,
    };
    check_budget(&spec)?;
    Ok(spec)
}

fn superpose_rows(own: &[BitRow], other: &[BitRow], direct: usize, cross: usize) -> Vec<BitRow> {
    let q = direct.max(cross);
    (0..q)
        .map(|i| {
            let mut acc = BitRow::default();
            let sd = q - direct;
            let sc = q - cross;
            if i >= sd {
                acc ^= &own[i - sd];
            }
            if i >= sc {
                acc ^= &other[i - sc];
            }
            acc
        })
        .collect()
}

fn check_budget(spec: &SchemeSpec) -> Result<(), SchemeError> {
    let allowed_slots = Rational::from_integer(spec.slots() as i64) * spec.cfg.lambda;
    let active = spec.backward_active_slots();
    let carries_messages = spec.messages.iter().any(|m| !m.owner.is_tx());
    if !carries_messages && Rational::from_integer(active as i64) > allowed_slots {
        return Err(SchemeError::Budget(format!("{active} backward slots used, {allowed_slots} allowed")));
    }
    let budget = spec.backward_budget();
    for used in spec.backward_levels_used() {
        if Rational::from_integer(used as i64) > budget {
            return Err(SchemeError::Budget(format!("{used} backward levels used, {budget} allowed")));
        }
    }
    Ok(())
}

/// Feedback levels per backward use for a weak-regime path.
pub(crate) fn weak_path_levels(cfg: &ChannelConfig, path: WeakPath) -> usize {
    match path {
        WeakPath::Cross => cfg.mb,
        WeakPath::Private => cfg.nb.saturating_sub(cfg.mb),
    }
}

pub(crate) fn to_usize(r: Rational) -> usize {
    debug_assert!(r.is_integer());
    r.to_integer().to_usize().expect("nonnegative integer")
}

pub(crate) fn regime_of(cfg: &ChannelConfig) -> ForwardRegime {
    capacity::forward_regime(cfg.n, cfg.m)
}

//! Block simulation, budget accounting and exhaustive decoding checks.
//!
//! `run_block` drives one message set through the channel law slot by slot
//! using the per-terminal encoders. `verify_exhaustive` runs the same plan on
//! 64 message sets at once, one per bit of a `u64`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::cli::rational_json;
use crate::channel::{transmit_backward, transmit_forward, ChannelConfig, ChannelError, LevelVector, Rational};
use crate::schemes::{
    decode, encode_backward, encode_forward, eval_expr, scheme_rate, MessageSet, RatePoint, Receptions, SchemeError,
    SchemeSpec, Terminal,
};

/// Seed of the sampled verification when exhaustive enumeration is too large.
pub const SAMPLE_SEED: u64 = 20_240_601;
pub const SAMPLE_COUNT: usize = 10_000;
pub const DEFAULT_LIMIT: u64 = 1 << 20;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("spec was compiled for a different channel")]
    ConfigMismatch,
    #[error("message set has {got} bits, spec needs {expected}")]
    MessageLength { expected: usize, got: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotRecord {
    pub x: [LevelVector; 2],
    pub y: [LevelVector; 2],
    /// `None` for a silent backward user.
    pub xb: [Option<LevelVector>; 2],
    /// `None` when both backward users are silent.
    pub yb: Option<[LevelVector; 2]>,
    /// Backward levels the plan loads, per backward user.
    pub active_levels: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transcript {
    pub slots: Vec<SlotRecord>,
}

fn bits(v: &LevelVector) -> Value {
    Value::from(v.bits().to_vec())
}

impl Transcript {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// One JSON object per slot, newline separated.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.slots.iter().enumerate() {
            let opt = |v: &Option<LevelVector>| v.as_ref().map(bits).unwrap_or(Value::Null);
            let yb = |k: usize| s.yb.as_ref().map(|y| bits(&y[k])).unwrap_or(Value::Null);
            let line = json!({
                "slot": i,
                "x1": bits(&s.x[0]), "x2": bits(&s.x[1]),
                "y1": bits(&s.y[0]), "y2": bits(&s.y[1]),
                "xb1": opt(&s.xb[0]), "xb2": opt(&s.xb[1]),
                "yb1": yb(0), "yb2": yb(1),
                "active_levels": s.active_levels,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }

    /// Re-applies the channel law to every slot's transmissions.
    pub fn channel_law_holds(&self, cfg: &ChannelConfig) -> bool {
        self.slots.iter().all(|s| {
            let fwd = transmit_forward(&s.x[0], &s.x[1], cfg).map(|(a, b)| [a, b]);
            let fwd_ok = fwd.map(|y| y == s.y).unwrap_or(false);
            let bwd_ok = match (&s.xb, &s.yb) {
                ([None, None], None) => true,
                ([a, b], Some(yb)) => {
                    let z = LevelVector::zeros(cfg.qb());
                    let a = a.clone().unwrap_or_else(|| z.clone());
                    let b = b.clone().unwrap_or(z);
                    transmit_backward(&a, &b, cfg).map(|(p, q)| [p, q] == *yb).unwrap_or(false)
                }
                _ => false,
            };
            fwd_ok && bwd_ok
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BudgetReport {
    pub used: [usize; 2],
    pub allowed: Rational,
    pub ok: bool,
}

/// Backward levels loaded per user against `N * lambda * max(nb, mb)`.
pub fn budget_check(transcript: &Transcript, cfg: &ChannelConfig) -> BudgetReport {
    let mut used = [0, 0];
    for s in &transcript.slots {
        for k in 0..2 {
            if s.xb[k].is_some() {
                used[k] += s.active_levels[k];
            }
        }
    }
    let allowed = Rational::from_integer(transcript.len() as i64) * cfg.lambda * Rational::from_integer(cfg.qb() as i64);
    let ok = used.iter().all(|&u| Rational::from_integer(u as i64) <= allowed);
    BudgetReport { used, allowed, ok }
}

/// Runs one block. Bits of the returned set that no terminal has to recover
/// in this block are left at 0.
pub fn run_block(spec: &SchemeSpec, cfg: &ChannelConfig, msgs: &MessageSet) -> Result<(Transcript, MessageSet), SimError> {
    if *cfg != spec.cfg {
        return Err(SimError::ConfigMismatch);
    }
    if msgs.bits.len() != spec.messages.len() {
        return Err(SimError::MessageLength { expected: spec.messages.len(), got: msgs.bits.len() });
    }
    let mut fb: [Vec<Option<LevelVector>>; 2] = [Vec::new(), Vec::new()];
    let mut rx: [Vec<LevelVector>; 2] = [Vec::new(), Vec::new()];
    let mut slots = Vec::with_capacity(spec.slots());
    for i in 0..spec.slots() {
        let x = [encode_forward(spec, 0, i, msgs, &fb[0])?, encode_forward(spec, 1, i, msgs, &fb[1])?];
        let (y1, y2) = transmit_forward(&x[0], &x[1], cfg)?;
        rx[0].push(y1.clone());
        rx[1].push(y2.clone());
        let xb = [encode_backward(spec, 0, i, &rx[0], msgs)?, encode_backward(spec, 1, i, &rx[1], msgs)?];
        let yb = if xb.iter().all(Option::is_none) {
            None
        } else {
            let z = LevelVector::zeros(cfg.qb());
            let a = xb[0].clone().unwrap_or_else(|| z.clone());
            let b = xb[1].clone().unwrap_or(z);
            let (p, q) = transmit_backward(&a, &b, cfg)?;
            Some([p, q])
        };
        for k in 0..2 {
            fb[k].push(yb.as_ref().map(|y| y[k].clone()));
        }
        let active_levels = [0, 1].map(|k| {
            spec.feedback_plan[i][k].as_ref().map(|l| l.iter().filter(|f| !f.is_zero()).count()).unwrap_or(0)
        });
        slots.push(SlotRecord { x, y: [y1, y2], xb, yb, active_levels });
    }
    let mut decoded = MessageSet::zeros(spec);
    for t in Terminal::ALL {
        let receptions = if t.is_tx() { Receptions::Backward(&fb[t.user()]) } else { Receptions::Forward(&rx[t.user()]) };
        for (bit, value) in decode(spec, t, receptions, msgs)? {
            decoded.bits[bit] = value;
        }
    }
    Ok((Transcript { slots }, decoded))
}

/// The bits a correct run has to reproduce.
pub fn expected_decode(spec: &SchemeSpec, msgs: &MessageSet) -> MessageSet {
    let mut out = MessageSet::zeros(spec);
    for (i, m) in spec.messages.iter().enumerate() {
        if m.due().is_some() {
            out.bits[i] = msgs.bits[i];
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct Counterexample {
    pub messages: MessageSet,
    /// Names of bits decoded wrongly, or of terminals missing carried knowledge.
    pub wrong: Vec<String>,
    pub transcript: Option<Transcript>,
}

#[derive(Clone, Debug)]
pub struct VerificationReport {
    pub scheme: String,
    pub tested: u64,
    pub exhaustive: bool,
    pub failures: u64,
    pub counterexample: Option<Counterexample>,
    pub rate: RatePoint,
    pub budget: BudgetReport,
    pub backward_active_slots: usize,
    pub carry_bits_per_user: usize,
    /// Failures per terminal, indexed like `Terminal::ALL`.
    pub terminal_failures: [u64; 4],
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.budget.ok
    }
}

/// Lanes of message values: lane `j` of word `i` is bit `i` of message set `j`.
fn check_lanes(spec: &SchemeSpec, lanes: &[u64], valid: u64) -> ([u64; 4], u64) {
    let replay = spec.replay(lanes);
    let mut per_terminal = [0u64; 4];
    for t in Terminal::ALL {
        let mut bad = 0u64;
        for (bit, e) in &spec.decoders[t.index()] {
            let got = eval_expr(spec, &replay, t, e, lanes).expect("decoder reads existing receptions");
            bad |= got ^ lanes[*bit];
        }
        for (ob, e) in spec.obligations.iter().zip(&spec.obligation_exprs) {
            if ob.terminal == t {
                let got = eval_expr(spec, &replay, t, e, lanes).expect("obligation reads existing receptions");
                let want = ob.form.ones().fold(0u64, |acc, i| acc ^ lanes[i]);
                bad |= got ^ want;
            }
        }
        per_terminal[t.index()] = bad & valid;
    }
    let any = per_terminal.iter().fold(0, |a, b| a | b);
    (per_terminal, any)
}

fn wrong_bits(spec: &SchemeSpec, msgs: &MessageSet) -> Vec<String> {
    let lanes: Vec<u64> = msgs.bits.iter().map(|&b| b as u64).collect();
    let replay = spec.replay(&lanes);
    let mut out = Vec::new();
    for t in Terminal::ALL {
        for (bit, e) in &spec.decoders[t.index()] {
            if eval_expr(spec, &replay, t, e, &lanes) != Some(lanes[*bit]) {
                out.push(format!("{}@{}", spec.messages[*bit].name, t));
            }
        }
        for (ob, e) in spec.obligations.iter().zip(&spec.obligation_exprs) {
            let want = ob.form.ones().fold(0u64, |acc, i| acc ^ lanes[i]);
            if ob.terminal == t && eval_expr(spec, &replay, t, e, &lanes) != Some(want) {
                out.push(format!("carry@{t}"));
            }
        }
    }
    out
}

/// Checks every message set when there are at most `limit` of them, otherwise
/// `SAMPLE_COUNT` sets drawn with `SAMPLE_SEED`.
pub fn verify_exhaustive(spec: &SchemeSpec, cfg: &ChannelConfig, limit: u64) -> Result<VerificationReport, SimError> {
    verify_with_seed(spec, cfg, limit, SAMPLE_SEED)
}

pub fn verify_with_seed(
    spec: &SchemeSpec,
    cfg: &ChannelConfig,
    limit: u64,
    seed: u64,
) -> Result<VerificationReport, SimError> {
    if *cfg != spec.cfg {
        return Err(SimError::ConfigMismatch);
    }
    let k = spec.messages.len();
    let exhaustive = k < 63 && (1u64 << k) <= limit.max(1);
    let total: u64 = if exhaustive { 1u64 << k } else { SAMPLE_COUNT as u64 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0u64;
    let mut terminal_failures = [0u64; 4];
    let mut first: Option<MessageSet> = None;
    let mut lanes = vec![0u64; k];
    let mut start = 0u64;
    while start < total {
        let width = (total - start).min(64);
        let valid = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
        if exhaustive {
            for (i, lane) in lanes.iter_mut().enumerate() {
                *lane = (0..width).fold(0u64, |acc, j| acc | ((((start + j) >> i) & 1) << j));
            }
        } else {
            for lane in lanes.iter_mut() {
                *lane = rand::Rng::gen::<u64>(&mut rng) & valid;
            }
        }
        let (per_terminal, any) = check_lanes(spec, &lanes, valid);
        for (acc, bad) in terminal_failures.iter_mut().zip(per_terminal) {
            *acc += bad.count_ones() as u64;
        }
        failures += any.count_ones() as u64;
        if any != 0 && first.is_none() {
            let j = any.trailing_zeros();
            first = Some(MessageSet { bits: lanes.iter().map(|l| ((l >> j) & 1) as u8).collect() });
        }
        start += width;
    }
    let (zero_run, _) = run_block(spec, cfg, &MessageSet::zeros(spec))?;
    let counterexample = match first {
        Some(messages) => {
            let wrong = wrong_bits(spec, &messages);
            let transcript = run_block(spec, cfg, &messages).ok().map(|(t, _)| t);
            Some(Counterexample { messages, wrong, transcript })
        }
        None => None,
    };
    Ok(VerificationReport {
        scheme: spec.kind.name().to_string(),
        tested: total,
        exhaustive,
        failures,
        counterexample,
        rate: scheme_rate(spec),
        budget: budget_check(&zero_run, cfg),
        backward_active_slots: spec.backward_active_slots(),
        carry_bits_per_user: spec.carry_bits_per_user,
        terminal_failures,
    })
}


impl VerificationReport {
    pub fn to_json(&self, spec: &SchemeSpec) -> Value {
        let ce = self.counterexample.as_ref().map(|c| {
            let msgs: serde_json::Map<String, Value> =
                spec.messages.iter().zip(&c.messages.bits).map(|(m, &b)| (m.name.clone(), json!(b))).collect();
            json!({
                "messages": msgs,
                "wrong": c.wrong,
                "transcript": c.transcript.as_ref().map(|t| {
                    t.to_json_lines().lines().filter_map(|l| serde_json::from_str(l).ok()).collect::<Vec<Value>>()
                }),
            })
        });
        json!({
            "scheme": self.scheme,
            "status": if self.passed() { "PASS" } else { "FAIL" },
            "messages_tested": self.tested,
            "exhaustive": self.exhaustive,
            "decode_failures": self.failures,
            "first_counterexample": ce,
            "rate": {
                "forward": [rational_json(&self.rate.forward[0]), rational_json(&self.rate.forward[1])],
                "backward": [rational_json(&self.rate.backward[0]), rational_json(&self.rate.backward[1])],
                "forward_sum": rational_json(&self.rate.forward_sum),
                "backward_sum": rational_json(&self.rate.backward_sum),
            },
            "budget_ok": self.budget.ok,
            "budget_used": self.budget.used,
            "budget_allowed": rational_json(&self.budget.allowed),
            "backward_active_slots": self.backward_active_slots,
            "slots": spec.slots(),
            "carry_bits_per_user": self.carry_bits_per_user,
            "steady_state": self.carry_bits_per_user > 0,
        })
    }
}

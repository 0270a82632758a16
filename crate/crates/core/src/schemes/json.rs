//! JSON form of a `SchemeSpec`.
//!
//! ```text
//! {
//!   "kind": "TypeI",
//!   "cfg": {"n":1,"m":3,"nb":1,"mb":1,"lambda":"1/2"},
//!   "M": 1, "stages": 2,
//!   "fresh_bits_per_user_per_stage": 1, "extra_bits_per_user": 1,
//!   "backward_message_bits": 0, "carry_bits_per_user": 0,
//!   "messages": [{"name":"a1","owner":"1","target":"1~","role":"Fresh"}, ...],
//!   "priors": [{"terminal":"1","form":["b'1"]}],
//!   "obligations": [...],
//!   "level_plan": [{"slot":0,"x1":["a1","a2","0"],"x2":["b1","b2","0"]}, ...],
//!   "forward_terms": [{"slot":1,"x1":[["a3"],["y0.0","a2"],[]],"x2":[...]}, ...],
//!   "feedback_plan": [{"slot":0,"xb1":[["y0.1"]],"xb2":[["y0.1"]]}, {"slot":1,"xb1":null,"xb2":null}]
//! }
//! ```
//!
//! `level_plan` holds the intended content of each level (`^` joins bits, `0`
//! is an empty level). `forward_terms` and `feedback_plan` hold what the user
//! actually computes, as XOR lists over: message names, `yS.L` (own reception
//! in slot `S` at level `L`) and `kP` (carried knowledge number `P`).

use serde_json::{json, Value};

use super::{assemble, Draft, Expr, LevelSource, MsgBit, Role, SchemeError, SchemeKind, SchemeSpec, Term, Terminal};
use crate::channel::{parse_rational, ChannelConfig};
use crate::gf2::BitRow;

fn kind_from(s: &str) -> Option<SchemeKind> {
    Some(match s {
        "NonFeedback" => SchemeKind::NonFeedback,
        "TypeI" => SchemeKind::TypeI,
        "TypeII" => SchemeKind::TypeII,
        "TypeIII" => SchemeKind::TypeIII,
        "FourMessage" => SchemeKind::FourMessage,
        "LinearWitness" => SchemeKind::LinearWitness,
        _ => return None,
    })
}

impl SchemeSpec {
    fn form_string(&self, f: &BitRow) -> String {
        let names: Vec<&str> = f.ones().map(|i| self.messages[i].name.as_str()).collect();
        if names.is_empty() {
            "0".to_string()
        } else {
            names.join("^")
        }
    }

    fn form_names(&self, f: &BitRow) -> Vec<String> {
        f.ones().map(|i| self.messages[i].name.clone()).collect()
    }

    pub fn term_string(&self, t: &Term) -> String {
        match *t {
            Term::Msg(i) => self.messages[i].name.clone(),
            Term::Prior(p) => format!("k{p}"),
            Term::Rx { slot, level } => format!("y{slot}.{level}"),
        }
    }

    fn expr_json(&self, e: &Expr) -> Value {
        Value::from(e.iter().map(|t| self.term_string(t)).collect::<Vec<_>>())
    }

    pub fn to_json(&self) -> Value {
        let messages: Vec<Value> = self
            .messages
            .iter()
            .map(|m| {
                json!({
                    "name": m.name,
                    "owner": m.owner.label(),
                    "target": m.target.map(|t| t.label()),
                    "role": format!("{:?}", m.role),
                })
            })
            .collect();
        let knowledge = |ks: &[super::Knowledge]| -> Vec<Value> {
            ks.iter().map(|k| json!({"terminal": k.terminal.label(), "form": self.form_names(&k.form)})).collect()
        };
        let level_plan: Vec<Value> = self
            .level_plan
            .iter()
            .enumerate()
            .map(|(s, x)| {
                let row = |k: usize| x[k].iter().map(|f| self.form_string(f)).collect::<Vec<_>>();
                json!({"slot": s, "x1": row(0), "x2": row(1)})
            })
            .collect();
        let forward_terms: Vec<Value> = self
            .forward
            .iter()
            .enumerate()
            .map(|(s, x)| {
                let row = |k: usize| x[k].iter().map(|e| self.expr_json(e)).collect::<Vec<_>>();
                json!({"slot": s, "x1": row(0), "x2": row(1)})
            })
            .collect();
        let feedback_plan: Vec<Value> = self
            .backward
            .iter()
            .enumerate()
            .map(|(s, x)| {
                let row = |k: usize| {
                    x[k].as_ref().map(|levels| levels.iter().map(|e| self.expr_json(e)).collect::<Vec<_>>())
                };
                json!({"slot": s, "xb1": row(0), "xb2": row(1)})
            })
            .collect();
        json!({
            "kind": format!("{:?}", self.kind),
            "cfg": {
                "n": self.cfg.n, "m": self.cfg.m, "nb": self.cfg.nb, "mb": self.cfg.mb,
                "lambda": self.cfg.lambda.to_string(),
            },
            "M": self.m_slots,
            "stages": self.stages(),
            "fresh_bits_per_user_per_stage": self.fresh_bits_per_user_per_stage,
            "extra_bits_per_user": self.extra_bits_per_user,
            "backward_message_bits": self.backward_message_bits,
            "carry_bits_per_user": self.carry_bits_per_user,
            "messages": messages,
            "priors": knowledge(&self.priors),
            "obligations": knowledge(&self.obligations),
            "level_plan": level_plan,
            "forward_terms": forward_terms,
            "feedback_plan": feedback_plan,
        })
    }
}

fn bad(what: &str) -> SchemeError {
    SchemeError::Malformed(format!("json: {what}"))
}

fn get_usize(v: &Value, key: &str) -> Result<usize, SchemeError> {
    v.get(key).and_then(Value::as_u64).map(|x| x as usize).ok_or_else(|| bad(key))
}

fn terminal(v: &Value) -> Result<Terminal, SchemeError> {
    v.as_str().and_then(Terminal::parse).ok_or_else(|| bad("terminal"))
}

/// Rebuilds a spec from its JSON form. Everything derived (forms, decoders)
/// is recomputed from the explicit terms, so a tampered plan is re-checked.
pub fn spec_from_json(v: &Value) -> Result<SchemeSpec, SchemeError> {
    let kind = v.get("kind").and_then(Value::as_str).and_then(kind_from).ok_or_else(|| bad("kind"))?;
    let c = v.get("cfg").ok_or_else(|| bad("cfg"))?;
    let lambda = parse_rational(c.get("lambda").and_then(Value::as_str).ok_or_else(|| bad("lambda"))?)
        .map_err(|e| bad(&e.to_string()))?;
    let cfg = ChannelConfig::new(get_usize(c, "n")?, get_usize(c, "m")?, get_usize(c, "nb")?, get_usize(c, "mb")?, lambda)
        .map_err(|e| bad(&e.to_string()))?;
    let mut messages = Vec::new();
    for m in v.get("messages").and_then(Value::as_array).ok_or_else(|| bad("messages"))? {
        let role = match m.get("role").and_then(Value::as_str) {
            Some("Fresh") => Role::Fresh,
            Some("Deferred") => Role::Deferred,
            Some("CarryIn") => Role::CarryIn,
            _ => return Err(bad("role")),
        };
        let target = match m.get("target") {
            Some(Value::Null) | None => None,
            Some(t) => Some(terminal(t)?),
        };
        messages.push(MsgBit {
            name: m.get("name").and_then(Value::as_str).ok_or_else(|| bad("name"))?.to_string(),
            owner: terminal(m.get("owner").ok_or_else(|| bad("owner"))?)?,
            target,
            role,
        });
    }
    let index = |name: &str| messages.iter().position(|m| m.name == name).ok_or_else(|| bad(name));
    let knowledge = |key: &str| -> Result<Vec<(Terminal, Vec<usize>)>, SchemeError> {
        let mut out = Vec::new();
        for k in v.get(key).and_then(Value::as_array).ok_or_else(|| bad(key))? {
            let t = terminal(k.get("terminal").ok_or_else(|| bad("terminal"))?)?;
            let ids = k
                .get("form")
                .and_then(Value::as_array)
                .ok_or_else(|| bad("form"))?
                .iter()
                .map(|n| n.as_str().ok_or_else(|| bad("form")).and_then(index))
                .collect::<Result<Vec<_>, _>>()?;
            out.push((t, ids));
        }
        Ok(out)
    };
    let priors = knowledge("priors")?;
    let obligations = knowledge("obligations")?;
    let term = |s: &str| -> Result<Term, SchemeError> {
        if let Some(rest) = s.strip_prefix('y') {
            if let Some((a, b)) = rest.split_once('.') {
                if let (Ok(slot), Ok(level)) = (a.parse(), b.parse()) {
                    return Ok(Term::Rx { slot, level });
                }
            }
        }
        if let Some(rest) = s.strip_prefix('k') {
            if let Ok(p) = rest.parse() {
                return Ok(Term::Prior(p));
            }
        }
        index(s).map(Term::Msg)
    };
    let levels = |x: &Value| -> Result<Vec<LevelSource>, SchemeError> {
        x.as_array()
            .ok_or_else(|| bad("levels"))?
            .iter()
            .map(|e| {
                e.as_array()
                    .ok_or_else(|| bad("expr"))?
                    .iter()
                    .map(|t| t.as_str().ok_or_else(|| bad("term")).and_then(term))
                    .collect::<Result<Expr, _>>()
                    .map(LevelSource::Explicit)
            })
            .collect()
    };
    let mut forward = Vec::new();
    for s in v.get("forward_terms").and_then(Value::as_array).ok_or_else(|| bad("forward_terms"))? {
        forward.push([levels(s.get("x1").ok_or_else(|| bad("x1"))?)?, levels(s.get("x2").ok_or_else(|| bad("x2"))?)?]);
    }
    let mut backward = Vec::new();
    for s in v.get("feedback_plan").and_then(Value::as_array).ok_or_else(|| bad("feedback_plan"))? {
        let side = |key: &str| -> Result<Option<Vec<LevelSource>>, SchemeError> {
            match s.get(key) {
                None | Some(Value::Null) => Ok(None),
                Some(x) => levels(x).map(Some),
            }
        };
        backward.push([side("xb1")?, side("xb2")?]);
    }
    let backward_message_bits = messages.iter().filter(|m| !m.owner.is_tx()).count();
    assemble(Draft {
        kind,
        cfg,
        m_slots: get_usize(v, "M")?,
        fresh_bits_per_user_per_stage: get_usize(v, "fresh_bits_per_user_per_stage")?,
        extra_bits_per_user: get_usize(v, "extra_bits_per_user")?,
        backward_message_bits,
        carry_bits_per_user: get_usize(v, "carry_bits_per_user")?,
        messages,
        priors,
        obligations,
        forward,
        backward,
    })
}

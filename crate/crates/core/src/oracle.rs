//! Rank-based verification that does not go through the simulator.
//!
//! Every plan and the channel are GF(2)-linear, so each terminal observes
//! `M_t * w` with `w` the stacked message bits. `transfer_matrices` builds the
//! `M_t` with its own copy of the channel law; `rank_decodable` decides by
//! elimination whether the targets are functions of the observations and the
//! terminal's own bits. `search_linear` looks for small symmetric linear
//! strategies reaching a rate point.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::channel::{ChannelConfig, Rational};
use crate::schemes::{
    assemble, Draft, LevelSource, MessageSet, MsgBit, RatePoint, Role, SchemeKind, SchemeSpec, Term, Terminal,
};
use crate::sim::run_block;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("plan refers to a reception that does not exist: {0}")]
    Dangling(String),
    #[error("search bounds exceeded: {0}")]
    Bounds(String),
    #[error("rate point is not reachable with integer bit counts: {0}")]
    Target(String),
}

type Row = Vec<bool>;

fn zero(k: usize) -> Row {
    vec![false; k]
}

fn xor_into(acc: &mut Row, r: &Row) {
    for (a, b) in acc.iter_mut().zip(r) {
        *a ^= *b;
    }
}

/// Output of one receiver: own signal over `direct` levels, the other's over `cross`.
fn receive(own: &[Row], other: &[Row], direct: usize, cross: usize, k: usize) -> Vec<Row> {
    let q = direct.max(cross);
    (0..q)
        .map(|i| {
            let mut r = zero(k);
            if i + direct >= q {
                xor_into(&mut r, &own[i + direct - q]);
            }
            if i + cross >= q {
                xor_into(&mut r, &other[i + cross - q]);
            }
            r
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub columns: usize,
    pub names: Vec<String>,
    /// Observation rows per terminal, in `Terminal::ALL` order.
    pub observations: [Vec<Row>; 4],
    /// Where each observation row comes from: `(slot, level)`.
    pub positions: [Vec<(usize, usize)>; 4],
    /// Message columns owned by each terminal.
    pub own: [Vec<usize>; 4],
    /// Carried knowledge per terminal.
    pub known: [Vec<Row>; 4],
}

/// Observation matrices of every terminal of a compiled plan.
pub fn transfer_matrices(spec: &SchemeSpec, cfg: &ChannelConfig) -> Result<LinearSystem, OracleError> {
    let k = spec.messages.len();
    let prior_rows: Vec<Row> = spec.priors.iter().map(|p| (0..k).map(|i| p.form.get(i)).collect()).collect();
    let mut obs: [Vec<Row>; 4] = Default::default();
    let mut pos: [Vec<(usize, usize)>; 4] = Default::default();
    // Receptions indexed [terminal][slot] -> levels; None while silent.
    let mut recv: [Vec<Option<Vec<Row>>>; 4] = Default::default();
    let eval = |t: Terminal, e: &[Term], recv: &[Vec<Option<Vec<Row>>>; 4]| -> Result<Row, OracleError> {
        let mut r = zero(k);
        for term in e {
            match *term {
                Term::Msg(i) => r[i] ^= true,
                Term::Prior(p) => xor_into(&mut r, &prior_rows[p]),
                Term::Rx { slot, level } => {
                    let row = recv[t.index()]
                        .get(slot)
                        .and_then(|s| s.as_ref())
                        .and_then(|s| s.get(level))
                        .ok_or_else(|| OracleError::Dangling(format!("{t} slot {slot} level {level}")))?;
                    xor_into(&mut r, row);
                }
            }
        }
        Ok(r)
    };
    for i in 0..spec.slots() {
        let mut x: Vec<Vec<Row>> = Vec::new();
        for user in 0..2 {
            let t = Terminal::tx(user);
            x.push(spec.forward[i][user].iter().map(|e| eval(t, e, &recv)).collect::<Result<_, _>>()?);
        }
        for user in 0..2 {
            let y = receive(&x[user], &x[1 - user], cfg.n, cfg.m, k);
            let t = Terminal::rx(user);
            for (l, r) in y.iter().enumerate() {
                obs[t.index()].push(r.clone());
                pos[t.index()].push((i, l));
            }
            recv[t.index()].push(Some(y));
        }
        let mut xb: Vec<Option<Vec<Row>>> = Vec::new();
        for user in 0..2 {
            let t = Terminal::rx(user);
            xb.push(match &spec.backward[i][user] {
                Some(levels) => Some(levels.iter().map(|e| eval(t, e, &recv)).collect::<Result<_, _>>()?),
                None => None,
            });
        }
        for user in 0..2 {
            let t = Terminal::tx(user);
            if xb.iter().all(Option::is_none) {
                recv[t.index()].push(None);
                continue;
            }
            let silent = vec![zero(k); cfg.qb()];
            let own = xb[user].as_ref().unwrap_or(&silent);
            let other = xb[1 - user].as_ref().unwrap_or(&silent);
            let y = receive(own, other, cfg.nb, cfg.mb, k);
            for (l, r) in y.iter().enumerate() {
                obs[t.index()].push(r.clone());
                pos[t.index()].push((i, l));
            }
            recv[t.index()].push(Some(y));
        }
    }
    let mut own: [Vec<usize>; 4] = Default::default();
    for (i, m) in spec.messages.iter().enumerate() {
        own[m.owner.index()].push(i);
    }
    let mut known: [Vec<Row>; 4] = Default::default();
    for (p, row) in spec.priors.iter().zip(&prior_rows) {
        known[p.terminal.index()].push(row.clone());
    }
    Ok(LinearSystem {
        columns: k,
        names: spec.messages.iter().map(|m| m.name.clone()).collect(),
        observations: obs,
        positions: pos,
        own,
        known,
    })
}

/// Reduced row echelon basis with pivot columns.
struct Echelon {
    rows: Vec<(usize, Row)>,
}

impl Echelon {
    fn new() -> Self {
        Echelon { rows: Vec::new() }
    }

    fn reduce(&self, r: &mut Row) {
        for (p, b) in &self.rows {
            if r[*p] {
                xor_into(r, b);
            }
        }
    }

    fn push(&mut self, mut r: Row) {
        self.reduce(&mut r);
        if let Some(p) = r.iter().position(|&b| b) {
            for (_, b) in self.rows.iter_mut() {
                if b[p] {
                    xor_into(b, &r);
                }
            }
            self.rows.push((p, r));
        }
    }

    fn contains(&self, r: &Row) -> bool {
        let mut v = r.clone();
        self.reduce(&mut v);
        v.iter().all(|&b| !b)
    }
}

fn knowledge_of(sys: &LinearSystem, t: Terminal) -> Echelon {
    let mut e = Echelon::new();
    for &c in &sys.own[t.index()] {
        let mut r = zero(sys.columns);
        r[c] = true;
        e.push(r);
    }
    for r in sys.known[t.index()].iter().chain(&sys.observations[t.index()]) {
        e.push(r.clone());
    }
    e
}

/// True iff every target column is a function of what `t` observes and owns.
pub fn rank_decodable(sys: &LinearSystem, t: Terminal, targets: &[usize]) -> bool {
    if targets.is_empty() {
        return true;
    }
    let e = knowledge_of(sys, t);
    targets.iter().all(|&c| {
        let mut r = zero(sys.columns);
        r[c] = true;
        e.contains(&r)
    })
}

/// True iff the linear form is known to `t` at block end.
pub fn rank_holds(sys: &LinearSystem, t: Terminal, form: &[bool]) -> bool {
    knowledge_of(sys, t).contains(&form.to_vec())
}

/// Oracle verdict per terminal: its due bits are decodable and its carried
/// knowledge for the next block is available.
pub fn terminal_verdicts(spec: &SchemeSpec, sys: &LinearSystem) -> [bool; 4] {
    Terminal::ALL.map(|t| {
        let due = spec.due_bits(t);
        let obligations_ok = spec
            .obligations
            .iter()
            .filter(|o| o.terminal == t)
            .all(|o| rank_holds(sys, t, &(0..sys.columns).map(|i| o.form.get(i)).collect::<Vec<_>>()));
        rank_decodable(sys, t, &due) && obligations_ok
    })
}

/// Compares `M_t * w` with the simulated receptions on `count` seeded message sets.
pub fn spot_check(spec: &SchemeSpec, sys: &LinearSystem, count: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..count {
        let msgs = MessageSet::random(spec, &mut rng);
        let (tr, _) = run_block(spec, &spec.cfg, &msgs).map_err(|e| e.to_string())?;
        for t in Terminal::ALL {
            for (row, &(slot, level)) in sys.observations[t.index()].iter().zip(&sys.positions[t.index()]) {
                let predicted = row.iter().zip(&msgs.bits).fold(0u8, |acc, (&r, &b)| acc ^ (r as u8 & b));
                let s = &tr.slots[slot];
                let actual = if t.is_tx() {
                    s.yb.as_ref().map(|y| y[t.user()].get(level))
                } else {
                    Some(s.y[t.user()].get(level))
                };
                if actual != Some(predicted) {
                    return Err(format!("trial {trial}: {t} slot {slot} level {level} differs"));
                }
            }
        }
    }
    Ok(())
}

/// Result of the bounded search. `NotFound` means only that no symmetric
/// linear strategy exists inside the bounds.
#[derive(Debug)]
pub enum SearchOutcome {
    Found(Box<SchemeSpec>),
    NotFound { candidates: u64 },
}

pub const MAX_BLOCK: usize = 2;
pub const MAX_LEVELS: usize = 3;
pub const MAX_CANDIDATES: u64 = 50_000_000;

/// All `d`-dimensional subspaces of GF(2)^`n`, each as `d` basis vectors in
/// reduced row echelon form (bit `j` of a vector is coordinate `j`).
pub fn subspaces(n: usize, d: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    if d > n {
        return out;
    }
    let mut pivots = Vec::new();
    fn choose(start: usize, n: usize, d: usize, cur: &mut Vec<usize>, all: &mut Vec<Vec<usize>>) {
        if cur.len() == d {
            all.push(cur.clone());
            return;
        }
        for p in start..n {
            cur.push(p);
            choose(p + 1, n, d, cur, all);
            cur.pop();
        }
    }
    choose(0, n, d, &mut Vec::new(), &mut pivots);
    for piv in pivots {
        // Free entries: in row r, columns after pivot r that are not pivots.
        let free: Vec<(usize, usize)> = (0..d)
            .flat_map(|r| ((piv[r] + 1)..n).filter(|c| !piv.contains(c)).map(move |c| (r, c)))
            .collect();
        for mask in 0u64..(1u64 << free.len()) {
            let mut rows: Vec<u64> = piv.iter().map(|&p| 1u64 << p).collect();
            for (j, &(r, c)) in free.iter().enumerate() {
                if (mask >> j) & 1 == 1 {
                    rows[r] |= 1 << c;
                }
            }
            out.push(rows);
        }
    }
    out
}

fn in_span(rows: &[u64], target: u64) -> bool {
    let mut basis = [0u64; 64];
    for &r in rows {
        let mut v = r;
        while v != 0 {
            let h = 63 - v.leading_zeros() as usize;
            if basis[h] == 0 {
                basis[h] = v;
                break;
            }
            v ^= basis[h];
        }
    }
    let mut v = target;
    while v != 0 {
        let h = 63 - v.leading_zeros() as usize;
        if basis[h] == 0 {
            return false;
        }
        v ^= basis[h];
    }
    true
}

/// One symmetric strategy: both users apply the same maps.
struct Candidate<'a> {
    active: &'a [usize],
    /// Forward message encoding: basis vectors over the `L*q` forward positions.
    enc: &'a [u64],
    /// Backward message encoding over the `A*qb` backward positions.
    benc: &'a [u64],
    /// `feedback[a][l]`: mask over forward receptions up to that slot.
    feedback: Vec<Vec<u64>>,
    /// `relay[i][l]`: mask over backward receptions of earlier active slots.
    relay: Vec<Vec<u64>>,
}

struct Dims {
    q: usize,
    qb: usize,
    block: usize,
    d: usize,
    db: usize,
}

impl Dims {
    fn fwd_col(&self, user: usize, c: usize) -> usize {
        user * self.d + c
    }

    fn bwd_col(&self, user: usize, c: usize) -> usize {
        2 * self.d + user * self.db + c
    }
}

/// Symbolic forms (masks over message columns) of every reception.
struct Forms {
    y: Vec<[Vec<u64>; 2]>,
    yb: Vec<Option<[Vec<u64>; 2]>>,
}

fn receive_u64(own: &[u64], other: &[u64], direct: usize, cross: usize) -> Vec<u64> {
    let q = direct.max(cross);
    (0..q)
        .map(|i| {
            let mut r = 0;
            if i + direct >= q {
                r ^= own[i + direct - q];
            }
            if i + cross >= q {
                r ^= other[i + cross - q];
            }
            r
        })
        .collect()
}

fn simulate(cfg: &ChannelConfig, dims: &Dims, c: &Candidate<'_>) -> Forms {
    let (q, qb) = (dims.q, dims.qb);
    let mut forms = Forms { y: Vec::new(), yb: Vec::new() };
    for i in 0..dims.block {
        let mut x = [vec![0u64; q], vec![0u64; q]];
        for user in 0..2 {
            for l in 0..q {
                let p = i * q + l;
                let mut v = 0;
                for (col, basis) in c.enc.iter().enumerate() {
                    if (basis >> p) & 1 == 1 {
                        v ^= 1 << dims.fwd_col(user, col);
                    }
                }
                let inputs = earlier_backward(&forms, user, i);
                for (j, f) in inputs.iter().enumerate() {
                    if (c.relay[i][l] >> j) & 1 == 1 {
                        v ^= f;
                    }
                }
                x[user][l] = v;
            }
        }
        let y = [receive_u64(&x[0], &x[1], cfg.n, cfg.m), receive_u64(&x[1], &x[0], cfg.n, cfg.m)];
        forms.y.push(y);
        match c.active.iter().position(|&s| s == i) {
            None => forms.yb.push(None),
            Some(a) => {
                let mut xb = [vec![0u64; qb], vec![0u64; qb]];
                for user in 0..2 {
                    let inputs: Vec<u64> = forms.y.iter().flat_map(|y| y[user].iter().copied()).collect();
                    for l in 0..qb {
                        let p = a * qb + l;
                        let mut v = 0;
                        for (col, basis) in c.benc.iter().enumerate() {
                            if (basis >> p) & 1 == 1 {
                                v ^= 1 << dims.bwd_col(user, col);
                            }
                        }
                        for (j, f) in inputs.iter().enumerate() {
                            if (c.feedback[a][l] >> j) & 1 == 1 {
                                v ^= f;
                            }
                        }
                        xb[user][l] = v;
                    }
                }
                forms.yb.push(Some([
                    receive_u64(&xb[0], &xb[1], cfg.nb, cfg.mb),
                    receive_u64(&xb[1], &xb[0], cfg.nb, cfg.mb),
                ]));
            }
        }
    }
    forms
}

fn earlier_backward(forms: &Forms, user: usize, slot: usize) -> Vec<u64> {
    forms.yb.iter().take(slot).flatten().flat_map(|y| y[user].iter().copied()).collect()
}

/// User 1 and user 1~ recover their targets; user 2's side mirrors this.
fn candidate_works(dims: &Dims, forms: &Forms) -> bool {
    let mut rx: Vec<u64> = forms.y.iter().flat_map(|y| y[0].iter().copied()).collect();
    rx.extend((0..dims.db).map(|c| 1u64 << dims.bwd_col(0, c)));
    if !(0..dims.d).all(|c| in_span(&rx, 1 << dims.fwd_col(0, c))) {
        return false;
    }
    let mut tx: Vec<u64> = forms.yb.iter().flatten().flat_map(|y| y[0].iter().copied()).collect();
    tx.extend((0..dims.d).map(|c| 1u64 << dims.fwd_col(0, c)));
    (0..dims.db).all(|c| in_span(&tx, 1 << dims.bwd_col(0, c)))
}

fn integral_bits(rate: Rational, block: usize) -> Result<usize, OracleError> {
    let bits = rate * Rational::from_integer(block as i64) / 2;
    if !bits.is_integer() || bits < Rational::from_integer(0) {
        return Err(OracleError::Target(format!("sum rate {rate} over {block} slots")));
    }
    Ok(*bits.numer() as usize)
}

fn subsets_upto(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (0u32..(1 << n))
        .filter(|m| m.count_ones() as usize <= k)
        .map(|m| (0..n).filter(|i| (m >> i) & 1 == 1).collect())
        .collect();
    out.sort_by_key(|s| (s.len(), s.clone()));
    out
}

/// Enumerates symmetric linear strategies of `block_len` slots whose forward
/// and backward sum rates equal `target`'s sums. Both users use the same
/// encoders, feedback maps and relay maps; message encodings are enumerated
/// up to a change of basis (one representative per column space). At most
/// `budget_cap` backward slots are used (default: `floor(lambda * block_len)`).
pub fn search_linear(
    cfg: &ChannelConfig,
    target: &RatePoint,
    block_len: usize,
    budget_cap: Option<usize>,
) -> Result<SearchOutcome, OracleError> {
    let (q, qb) = (cfg.q(), cfg.qb());
    if block_len != MAX_BLOCK || q > MAX_LEVELS || qb > MAX_LEVELS {
        return Err(OracleError::Bounds(format!(
            "block length must be {MAX_BLOCK} and level counts at most {MAX_LEVELS} (got L={block_len}, q={q}, qb={qb})"
        )));
    }
    let allowed = (cfg.lambda * Rational::from_integer(block_len as i64)).floor().to_integer() as usize;
    let cap = budget_cap.map_or(allowed, |b| b.min(allowed));
    let dims = Dims {
        q,
        qb,
        block: block_len,
        d: integral_bits(target.forward_sum, block_len)?,
        db: integral_bits(target.backward_sum, block_len)?,
    };
    let encodings = subspaces(block_len * q, dims.d);
    let mut explored = 0u64;
    for active in subsets_upto(block_len, cap) {
        let a = active.len();
        if dims.db > 0 && a == 0 {
            continue;
        }
        let bencodings = subspaces(a * qb, dims.db);
        // Free bits of the feedback and relay maps, one digit per map row.
        let fb_widths: Vec<usize> = active.iter().map(|&s| q * (s + 1)).collect();
        let relay_widths: Vec<usize> =
            (0..block_len).map(|i| qb * active.iter().filter(|&&s| s < i).count()).collect();
        let map_bits: usize = fb_widths.iter().map(|w| w * qb).sum::<usize>()
            + relay_widths.iter().map(|w| w * q).sum::<usize>();
        if map_bits > 40 {
            return Err(OracleError::Bounds(format!("{map_bits} free map bits")));
        }
        let per = (encodings.len() as u64) * (bencodings.len() as u64);
        let total = per.saturating_mul(1u64 << map_bits);
        if explored.saturating_add(total) > MAX_CANDIDATES {
            return Err(OracleError::Bounds(format!("more than {MAX_CANDIDATES} candidates")));
        }
        for maps in 0u64..(1u64 << map_bits) {
            let mut cursor = maps;
            let mut take = |w: usize| {
                let v = cursor & ((1u64 << w) - 1);
                cursor >>= w;
                v
            };
            let feedback: Vec<Vec<u64>> = fb_widths.iter().map(|&w| (0..qb).map(|_| take(w)).collect()).collect();
            let relay: Vec<Vec<u64>> = relay_widths.iter().map(|&w| (0..q).map(|_| take(w)).collect()).collect();
            for enc in &encodings {
                for benc in &bencodings {
                    explored += 1;
                    let c = Candidate { active: &active, enc, benc, feedback: feedback.clone(), relay: relay.clone() };
                    let forms = simulate(cfg, &dims, &c);
                    if candidate_works(&dims, &forms) {
                        return witness(cfg, &dims, &c).map(|s| SearchOutcome::Found(Box::new(s)));
                    }
                }
            }
        }
    }
    Ok(SearchOutcome::NotFound { candidates: explored })
}

fn witness(cfg: &ChannelConfig, dims: &Dims, c: &Candidate<'_>) -> Result<SchemeSpec, OracleError> {
    let (q, qb) = (dims.q, dims.qb);
    let mut messages = Vec::new();
    let stems = ["a", "b", "ã", "b̃"];
    for (t, count) in [(Terminal::Tx1, dims.d), (Terminal::Tx2, dims.d), (Terminal::Rx1, dims.db), (Terminal::Rx2, dims.db)] {
        let target = Some(if t.is_tx() { Terminal::rx(t.user()) } else { Terminal::tx(t.user()) });
        for j in 0..count {
            let stem = stems[t.index()];
            let name = if !t.is_tx() && count == 1 { stem.to_string() } else { format!("{stem}{}", j + 1) };
            messages.push(MsgBit { name, owner: t, target, role: Role::Fresh });
        }
    }
    // Message columns follow the search layout: a's, b's, then backward bits.
    let mut forward = Vec::new();
    let mut backward = Vec::new();
    for i in 0..dims.block {
        let mut x: [Vec<LevelSource>; 2] = [Vec::new(), Vec::new()];
        for (user, levels) in x.iter_mut().enumerate() {
            let inputs: Vec<(usize, usize)> = c
                .active
                .iter()
                .filter(|&&s| s < i)
                .flat_map(|&s| (0..qb).map(move |l| (s, l)))
                .collect();
            for l in 0..q {
                let p = i * q + l;
                let mut e = Vec::new();
                for (col, basis) in c.enc.iter().enumerate() {
                    if (basis >> p) & 1 == 1 {
                        e.push(Term::Msg(dims.fwd_col(user, col)));
                    }
                }
                for (j, &(slot, level)) in inputs.iter().enumerate() {
                    if (c.relay[i][l] >> j) & 1 == 1 {
                        e.push(Term::Rx { slot, level });
                    }
                }
                levels.push(LevelSource::Explicit(e));
            }
        }
        forward.push(x);
        match c.active.iter().position(|&s| s == i) {
            None => backward.push([None, None]),
            Some(a) => {
                let mut xb: [Option<Vec<LevelSource>>; 2] = [None, None];
                for (user, slot) in xb.iter_mut().enumerate() {
                    let inputs: Vec<(usize, usize)> = (0..=i).flat_map(|s| (0..q).map(move |l| (s, l))).collect();
                    let mut levels = Vec::new();
                    for l in 0..qb {
                        let p = a * qb + l;
                        let mut e = Vec::new();
                        for (col, basis) in c.benc.iter().enumerate() {
                            if (basis >> p) & 1 == 1 {
                                e.push(Term::Msg(dims.bwd_col(user, col)));
                            }
                        }
                        for (j, &(s, lv)) in inputs.iter().enumerate() {
                            if (c.feedback[a][l] >> j) & 1 == 1 {
                                e.push(Term::Rx { slot: s, level: lv });
                            }
                        }
                        levels.push(LevelSource::Explicit(e));
                    }
                    *slot = Some(levels);
                }
                backward.push(xb);
            }
        }
    }
    assemble(Draft {
        kind: SchemeKind::LinearWitness,
        cfg: cfg.clone(),
        m_slots: dims.block / 2,
        fresh_bits_per_user_per_stage: dims.d / 2,
        extra_bits_per_user: 0,
        backward_message_bits: 2 * dims.db,
        carry_bits_per_user: 0,
        messages,
        priors: Vec::new(),
        obligations: Vec::new(),
        forward,
        backward,
    })
    .map_err(|e| OracleError::Bounds(format!("witness failed to assemble: {e}")))
}

//! Slot timing for the extra bits of the two-stage schemes.
//!
//! Every extra bit goes through three events: it is originated on a forward
//! level, fed back on a backward level, and relayed on a forward level of a
//! later slot. Originations are packed into the first stage, feedback uses one
//! contiguous window of backward slots, relays are packed towards the end.

/// Counts per slot; all vectors have length `2M`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schedule {
    pub originate: Vec<usize>,
    pub feedback: Vec<usize>,
    pub relay: Vec<usize>,
    /// Bits relayed at the start of the block that were fed back in the
    /// previous block; the same number is fed back in the last slot here.
    pub carry: usize,
}

impl Schedule {
    pub fn active_backward_slots(&self) -> usize {
        self.feedback.iter().filter(|&&f| f > 0).count()
    }
}

/// `m`: slots per stage, `e`: extra levels per forward slot, `f`: feedback
/// levels per backward slot, `b`: extra bits per user, `a_max`: backward slots
/// allowed. With `allow_carry` the last backward slot may be used.
pub fn schedule(m: usize, e: usize, f: usize, b: usize, a_max: usize, allow_carry: bool) -> Option<Schedule> {
    let t = 2 * m;
    if b == 0 {
        return Some(Schedule { originate: vec![0; t], feedback: vec![0; t], relay: vec![0; t], carry: 0 });
    }
    if e == 0 || f == 0 || b > m * e {
        return None;
    }
    let mut originate = vec![0; t];
    let mut left = b;
    for o in originate.iter_mut().take(m) {
        *o = left.min(e);
        left -= *o;
    }
    let a = b.div_ceil(f);
    if a > a_max || a > t {
        return None;
    }
    let last_start = if allow_carry { t - a } else { (t - 1).checked_sub(a)? };
    'start: for s in 0..=last_start {
        let mut feedback = vec![0; t];
        for (j, slot) in feedback.iter_mut().enumerate().skip(s).take(a) {
            *slot = if j + 1 == s + a { b - f * (a - 1) } else { f };
        }
        let (mut cum_o, mut cum_f) = (0, 0);
        for j in 0..t {
            cum_o += originate[j];
            cum_f += feedback[j];
            if cum_f > cum_o {
                continue 'start;
            }
        }
        let carry = feedback[t - 1];
        let mut relay = vec![0; t];
        let mut left = b;
        for j in (0..t).rev() {
            relay[j] = left.min(e - originate[j]);
            left -= relay[j];
        }
        if left > 0 {
            return None;
        }
        let (mut cum_r, mut avail) = (0, carry);
        for j in 0..t {
            cum_r += relay[j];
            if cum_r > avail {
                continue 'start;
            }
            avail += feedback[j];
        }
        return Some(Schedule { originate, feedback, relay, carry });
    }
    None
}

//! Linear deterministic channel arithmetic.
//!
//! Signals are GF(2) level vectors, index 0 being the most significant level.
//! A link with `g` levels delivers the top `g` levels of the sender's vector,
//! down-shifted by `q - g` where `q = max(direct, cross)`.

use std::fmt;
use std::ops::BitXor;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Rational = Ratio<i64>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChannelError {
    #[error("level vector length {got} does not match expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("visible part of {m} levels requested from a {len}-level vector")]
    Visible { m: usize, len: usize },
    #[error("lambda must lie in [0,1], got {0}")]
    Lambda(String),
    #[error("malformed rational '{0}'")]
    Parse(String),
}

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LevelVector {
    bits: Vec<u8>,
}

impl LevelVector {
    pub fn zeros(len: usize) -> Self {
        LevelVector { bits: vec![0; len] }
    }

    /// Any nonzero input byte is read as 1.
    pub fn from_bits(bits: &[u8]) -> Self {
        LevelVector { bits: bits.iter().map(|&b| (b != 0) as u8).collect() }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> u8 {
        self.bits[i]
    }

    pub fn is_zero(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }

    pub fn xor(&self, other: &LevelVector) -> Result<LevelVector, ChannelError> {
        if self.len() != other.len() {
            return Err(ChannelError::Length { expected: self.len(), got: other.len() });
        }
        Ok(LevelVector { bits: self.bits.iter().zip(&other.bits).map(|(a, b)| a ^ b).collect() })
    }
}

impl fmt::Debug for LevelVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, b) in self.bits.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, "]")
    }
}

/// Forward IC `(n, m)`, backward IC `(nb, mb)` and the feedback time fraction.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ChannelConfig {
    pub n: usize,
    pub m: usize,
    pub nb: usize,
    pub mb: usize,
    pub lambda: Rational,
}

impl ChannelConfig {
    pub fn new(n: usize, m: usize, nb: usize, mb: usize, lambda: Rational) -> Result<Self, ChannelError> {
        if lambda < Rational::from_integer(0) || lambda > Rational::from_integer(1) {
            return Err(ChannelError::Lambda(lambda.to_string()));
        }
        Ok(ChannelConfig { n, m, nb, mb, lambda })
    }

    /// Panics on a lambda outside [0,1]; meant for literals in tests and tables.
    pub fn of(n: usize, m: usize, nb: usize, mb: usize, lambda: (i64, i64)) -> Self {
        Self::new(n, m, nb, mb, Rational::new(lambda.0, lambda.1)).expect("lambda in [0,1]")
    }

    pub fn q(&self) -> usize {
        self.n.max(self.m)
    }

    pub fn qb(&self) -> usize {
        self.nb.max(self.mb)
    }

    pub fn with_lambda(&self, lambda: Rational) -> Self {
        ChannelConfig { lambda, ..self.clone() }
    }

    /// The same two-way channel seen from the other side: backward becomes forward.
    pub fn reversed(&self) -> Self {
        ChannelConfig { n: self.nb, m: self.mb, nb: self.n, mb: self.m, lambda: self.lambda }
    }
}

/// Parses `p/q`, an integer, or a finite decimal such as `0.25`.
pub fn parse_rational(s: &str) -> Result<Rational, ChannelError> {
    let bad = || ChannelError::Parse(s.to_string());
    let t = s.trim();
    if let Some((p, q)) = t.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|_| bad())?;
        let q: i64 = q.trim().parse().map_err(|_| bad())?;
        if q == 0 {
            return Err(bad());
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((whole, frac)) = t.split_once('.') {
        if frac.is_empty() || frac.len() > 12 || !frac.bytes().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = whole.starts_with('-');
        let w: i64 = if whole.is_empty() || whole == "-" { 0 } else { whole.parse().map_err(|_| bad())? };
        let den = 10i64.pow(frac.len() as u32);
        let f: i64 = frac.parse().map_err(|_| bad())?;
        let mag = w.abs() * den + f;
        return Ok(Rational::new(if neg { -mag } else { mag }, den));
    }
    t.parse::<i64>().map(Rational::from_integer).map_err(|_| bad())
}

/// `out[i] = v[i - s]` for `i >= s`, zero above.
pub fn shift_down(v: &LevelVector, s: usize) -> LevelVector {
    LevelVector { bits: shifted(&v.bits, s) }
}

pub(crate) fn shifted<T: Copy + Default>(v: &[T], s: usize) -> Vec<T> {
    let len = v.len();
    (0..len).map(|i| if i >= s { v[i - s] } else { T::default() }).collect()
}

/// Received signal at one receiver: own transmitter over `direct` levels plus
/// the other transmitter over `cross` levels, both vectors of length max(direct, cross).
pub(crate) fn superpose<T>(own: &[T], other: &[T], direct: usize, cross: usize) -> Vec<T>
where
    T: Copy + Default + BitXor<Output = T>,
{
    let q = direct.max(cross);
    let a = shifted(own, q - direct);
    let b = shifted(other, q - cross);
    a.into_iter().zip(b).map(|(x, y)| x ^ y).collect()
}

fn check_len(v: &LevelVector, q: usize) -> Result<(), ChannelError> {
    if v.len() != q {
        return Err(ChannelError::Length { expected: q, got: v.len() });
    }
    Ok(())
}

/// `(y1, y2)` received by users 1~ and 2~.
pub fn transmit_forward(
    x1: &LevelVector,
    x2: &LevelVector,
    cfg: &ChannelConfig,
) -> Result<(LevelVector, LevelVector), ChannelError> {
    let q = cfg.q();
    check_len(x1, q)?;
    check_len(x2, q)?;
    Ok((
        LevelVector { bits: superpose(&x1.bits, &x2.bits, cfg.n, cfg.m) },
        LevelVector { bits: superpose(&x2.bits, &x1.bits, cfg.n, cfg.m) },
    ))
}

/// `xb1`, `xb2` are sent by users 1~ and 2~; `yb_k` is received at user k.
/// A silent user passes an all-zero vector.
pub fn transmit_backward(
    xb1: &LevelVector,
    xb2: &LevelVector,
    cfg: &ChannelConfig,
) -> Result<(LevelVector, LevelVector), ChannelError> {
    let q = cfg.qb();
    check_len(xb1, q)?;
    check_len(xb2, q)?;
    Ok((
        LevelVector { bits: superpose(&xb1.bits, &xb2.bits, cfg.nb, cfg.mb) },
        LevelVector { bits: superpose(&xb2.bits, &xb1.bits, cfg.nb, cfg.mb) },
    ))
}

/// Top `m` levels, the part of a signal that reaches the unintended receiver.
pub fn visible_part(x: &LevelVector, m: usize) -> Result<LevelVector, ChannelError> {
    if m > x.len() {
        return Err(ChannelError::Visible { m, len: x.len() });
    }
    Ok(LevelVector { bits: x.bits[..m].to_vec() })
}

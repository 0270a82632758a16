//! Packed GF(2) rows and an incremental span with combination tracking.

use std::ops::BitXorAssign;

#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct BitRow {
    words: Vec<u64>,
}

impl BitRow {
    pub fn zeros(len: usize) -> Self {
        BitRow { words: vec![0; len.div_ceil(64)] }
    }

    pub fn unit(len: usize, i: usize) -> Self {
        let mut r = Self::zeros(len);
        r.set(i);
        r
    }

    pub fn get(&self, i: usize) -> bool {
        self.words.get(i / 64).is_some_and(|w| (w >> (i % 64)) & 1 == 1)
    }

    pub fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn first_one(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(k, w)| k * 64 + w.trailing_zeros() as usize)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let t = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(k * 64 + t)
            })
        })
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Parity of the AND with a packed value vector.
    pub fn dot(&self, values: &BitRow) -> bool {
        self.words.iter().zip(&values.words).fold(0u32, |acc, (a, b)| acc ^ (a & b).count_ones()) & 1 == 1
    }
}

impl BitXorAssign<&BitRow> for BitRow {
    fn bitxor_assign(&mut self, rhs: &BitRow) {
        if self.words.len() < rhs.words.len() {
            self.words.resize(rhs.words.len(), 0);
        }
        for (a, b) in self.words.iter_mut().zip(&rhs.words) {
            *a ^= b;
        }
    }
}

impl std::ops::BitXor for BitRow {
    type Output = BitRow;
    fn bitxor(mut self, rhs: BitRow) -> BitRow {
        self ^= &rhs;
        self
    }
}

/// Rows inserted with a label; `express` writes a target as an XOR of labels.
#[derive(Clone, Debug)]
pub struct Span {
    basis: Vec<(usize, BitRow, BitRow)>,
    labels: usize,
}

impl Span {
    pub fn new() -> Self {
        Span { basis: Vec::new(), labels: 0 }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Returns the label index assigned to this row.
    pub fn insert(&mut self, row: &BitRow) -> usize {
        let label = self.labels;
        self.labels += 1;
        let mut v = row.clone();
        let mut combo = BitRow::zeros(label + 1);
        combo.set(label);
        for (p, b, c) in &self.basis {
            if v.get(*p) {
                v ^= b;
                combo ^= c;
            }
        }
        if let Some(p) = v.first_one() {
            self.basis.push((p, v, combo));
        }
        label
    }

    pub fn express(&self, target: &BitRow) -> Option<Vec<usize>> {
        let mut v = target.clone();
        let mut combo = BitRow::zeros(self.labels.max(1));
        for (p, b, c) in &self.basis {
            if v.get(*p) {
                v ^= b;
                combo ^= c;
            }
        }
        if v.is_zero() {
            Some(combo.ones().collect())
        } else {
            None
        }
    }

    pub fn contains(&self, target: &BitRow) -> bool {
        let mut v = target.clone();
        for (p, b, _) in &self.basis {
            if v.get(*p) {
                v ^= b;
            }
        }
        v.is_zero()
    }
}

impl Default for Span {
    fn default() -> Self {
        Self::new()
    }
}

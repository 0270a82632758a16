//! Reference computations written independently of the library: a dense
//! shift-matrix channel, the sum-rate formulas spelled out case by case with
//! the ratios compared as fractions, and brute-force pairing.
#![allow(dead_code)]

use twoway::channel::Rational;

pub fn r(x: i64) -> Rational {
    Rational::from_integer(x)
}

pub fn frac(p: i64, q: i64) -> Rational {
    Rational::new(p, q)
}

/// `S^s` as a dense q x q matrix acting on column vectors.
fn shift_matrix(q: usize, s: usize) -> Vec<Vec<u8>> {
    (0..q).map(|i| (0..q).map(|j| u8::from(i >= s && j == i - s)).collect()).collect()
}

fn mat_vec(a: &[Vec<u8>], v: &[u8]) -> Vec<u8> {
    a.iter().map(|row| row.iter().zip(v).fold(0, |acc, (x, y)| acc ^ (x & y))).collect()
}

/// Receiver output `S^{q-direct} own + S^{q-cross} other` by matrix products.
pub fn ref_receive(own: &[u8], other: &[u8], direct: usize, cross: usize) -> Vec<u8> {
    let q = direct.max(cross);
    let a = mat_vec(&shift_matrix(q, q - direct), own);
    let b = mat_vec(&shift_matrix(q, q - cross), other);
    a.iter().zip(&b).map(|(x, y)| x ^ y).collect()
}

/// alpha = m/n as an extended fraction: None stands for +infinity.
fn ratio(n: usize, m: usize) -> Option<Rational> {
    if n == 0 {
        None
    } else {
        Some(frac(m as i64, n as i64))
    }
}

fn ge(a: Option<Rational>, b: Rational) -> bool {
    a.is_none_or(|a| a >= b)
}

fn lt(a: Option<Rational>, b: Rational) -> bool {
    a.is_some_and(|a| a < b)
}

pub fn ref_c_no(n: usize, m: usize) -> Rational {
    let (n, m) = (n as i64, m as i64);
    let a = ratio(n as usize, m as usize);
    if n == 0 && m == 0 {
        r(0)
    } else if ge(a, r(2)) {
        r(2 * n)
    } else if lt(a, frac(2, 3)) {
        r(2 * (n - m).max(m))
    } else {
        r((2 * n - m).max(m))
    }
}

pub fn ref_c_pf(n: usize, m: usize) -> Rational {
    r((2 * n as i64 - m as i64).max(m as i64))
}

pub fn ref_inner(n: usize, m: usize, nb: usize, mb: usize, lambda: Rational) -> Rational {
    let a = ratio(n, m);
    let cno = ref_c_no(n, m);
    let cpf = ref_c_pf(n, m);
    if n == 0 && m == 0 {
        return r(0);
    }
    if ge(a, r(2)) {
        (cno + r(2) * lambda * r(nb as i64)).min(cpf)
    } else if lt(a, frac(2, 3)) {
        let t = (nb as i64 - mb as i64).max(mb as i64);
        (cno + r(2) * lambda * r(t)).min(cpf)
    } else {
        cno
    }
}

pub fn ref_outer(n: usize, m: usize, nb: usize, mb: usize, lambda: Rational) -> Rational {
    let a = ratio(n, m);
    let cno = ref_c_no(n, m);
    let cpf = ref_c_pf(n, m);
    if n == 0 && m == 0 {
        return r(0);
    }
    if ge(a, r(2)) {
        (cno + r(2) * lambda * r(nb as i64)).min(cpf)
    } else if lt(a, frac(2, 3)) {
        (cno + r(2) * lambda * r(nb.max(mb) as i64)).min(cpf)
    } else {
        cno
    }
}

/// The three raw outer-bound terms, written out one by one.
pub fn ref_outer_raw(n: usize, m: usize, nb: usize, mb: usize, lambda: Rational) -> Rational {
    let (n, m, nb, mb) = (n as i64, m as i64, nb as i64, mb as i64);
    let t1 = r(2 * n) + r(2) * lambda * r(nb);
    let t2 = r((n - m).max(0) + n.max(m));
    let t3 = r(2 * (n - m).max(m)) + r(2) * lambda * r(nb.max(mb));
    t1.min(t2).min(t3)
}

/// Best total of `gain(i, perm[i])` over all permutations, with the
/// lexicographically smallest optimal permutation.
pub fn brute_force_pairing(k: usize, gain: impl Fn(usize, usize) -> Rational) -> (Vec<usize>, Rational) {
    fn perms(k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in perms(k - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, k - 1);
                out.push(q);
            }
        }
        out.sort();
        out
    }
    let mut best: Option<(Vec<usize>, Rational)> = None;
    for p in perms(k) {
        let total = p.iter().enumerate().fold(r(0), |acc, (i, &j)| acc + gain(i, j));
        if best.as_ref().is_none_or(|(_, b)| total > *b) {
            best = Some((p, total));
        }
    }
    best.expect("at least one permutation")
}

//! Linear nonfeedback codes for 2/3 <= alpha < 2.
//!
//! Over a two-slot block user 1 sends `r1` bits through precoder `G_A` in the
//! first slot and `r2` bits through `G_B` in the second; user 2 does the
//! opposite, so both users get `r1 + r2 = C_no` bits per block. The precoders
//! are found by a seeded random search and checked by rank conditions.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::capacity;
use crate::gf2::{BitRow, Span};

const SEED: u64 = 0x7477_6f77_6179;
const TRIALS: usize = 20_000;

/// Precoders are `q x r` matrices stored column by column.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModerateCode {
    pub r1: usize,
    pub r2: usize,
    pub g_a: Vec<BitRow>,
    pub g_b: Vec<BitRow>,
}

impl ModerateCode {
    /// Row `level` of a precoder as the list of message columns it combines.
    pub fn level_taps(cols: &[BitRow], level: usize) -> Vec<usize> {
        (0..cols.len()).filter(|&j| cols[j].get(level)).collect()
    }
}

fn shift_col(c: &BitRow, q: usize, s: usize) -> BitRow {
    let mut out = BitRow::zeros(q);
    for i in c.ones() {
        if i + s < q {
            out.set(i + s);
        }
    }
    out
}

fn rank(cols: &[BitRow]) -> usize {
    let mut s = Span::new();
    for c in cols {
        s.insert(c);
    }
    s.rank()
}

/// `own` through `direct` levels, `other` through `cross` levels: can the
/// receiver solve for all of `own`?
fn decodable(own: &[BitRow], other: &[BitRow], q: usize, n: usize, m: usize) -> bool {
    let a: Vec<BitRow> = own.iter().map(|c| shift_col(c, q, q - n)).collect();
    let b: Vec<BitRow> = other.iter().map(|c| shift_col(c, q, q - m)).collect();
    let rb = rank(&b);
    let mut all = a;
    all.extend(b);
    rank(&all) == own.len() + rb
}

fn random_cols<R: Rng>(rng: &mut R, q: usize, r: usize) -> Vec<BitRow> {
    (0..r)
        .map(|_| {
            let mut c = BitRow::zeros(q);
            for i in 0..q {
                if rng.gen::<bool>() {
                    c.set(i);
                }
            }
            c
        })
        .collect()
}

fn search(n: usize, m: usize) -> Option<ModerateCode> {
    let q = n.max(m);
    let total = crate::schemes::to_usize(capacity::c_no(n, m));
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ ((n as u64) << 16) ^ m as u64);
    for r1 in total.div_ceil(2)..=total {
        let r2 = total - r1;
        for _ in 0..TRIALS {
            let g_a = random_cols(&mut rng, q, r1);
            let g_b = random_cols(&mut rng, q, r2);
            if decodable(&g_a, &g_b, q, n, m) && decodable(&g_b, &g_a, q, n, m) {
                return Some(ModerateCode { r1, r2, g_a, g_b });
            }
        }
    }
    None
}

/// Cached per `(n, m)`; deterministic because the search is seeded.
pub fn moderate_code(n: usize, m: usize) -> Option<ModerateCode> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Option<ModerateCode>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().expect("cache lock").get(&(n, m)) {
        return hit.clone();
    }
    let code = search(n, m);
    cache.lock().expect("cache lock").insert((n, m), code.clone());
    code
}

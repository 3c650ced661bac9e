//! Exhaustive enumeration of monotone (and antipodal monotone) Boolean
//! functions for `n ≤ 6`, a flip-chain sampler, and the single-flip move set
//! used by the extremal search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boolean::BooleanFunction;
use crate::error::{Error, Result};

/// Largest dimension for exhaustive enumeration.
pub const MAX_ENUM_N: usize = 6;

/// Number of monotone functions on `n` variables, `n = 0..=6`.
pub const DEDEKIND: [u64; 7] = [2, 3, 6, 20, 168, 7581, 7_828_354];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    Monotone,
    AntipodalMonotone,
}

/// Streaming enumerator over monotone truth tables.
///
/// Points are decided from the top index down; a point may take value 1
/// only if every immediate superset already has value 1. Choosing 0 before 1
/// at each point makes the emission order ascending in the table encoding.
#[derive(Debug, Clone)]
pub struct EnumerationCursor {
    n: usize,
    constraint: Constraint,
    next: Option<u64>,
}

impl EnumerationCursor {
    pub fn new(n: usize, constraint: Constraint) -> Result<Self> {
        if n > MAX_ENUM_N {
            return Err(Error::TooLarge { what: "monotone enumeration", n, limit: MAX_ENUM_N });
        }
        Ok(Self { n, constraint, next: Some(0) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    /// Next raw table, as the low `2^n` bits of a word.
    pub fn next_table(&mut self) -> Option<u64> {
        loop {
            let table = self.next?;
            self.next = successor(self.n, table);
            match self.constraint {
                Constraint::Monotone => return Some(table),
                Constraint::AntipodalMonotone => {
                    let f = BooleanFunction::from_u64(self.n, table).expect("valid table");
                    if f.is_antipodal() {
                        return Some(table);
                    }
                }
            }
        }
    }
}

impl Iterator for EnumerationCursor {
    type Item = BooleanFunction;

    fn next(&mut self) -> Option<BooleanFunction> {
        self.next_table().map(|t| BooleanFunction::from_u64(self.n, t).expect("valid table"))
    }
}

#[inline]
fn supersets_all_set(n: usize, table: u64, idx: usize) -> bool {
    (0..n).all(|i| idx >> i & 1 == 1 || table >> (idx | 1 << i) & 1 == 1)
}

/// Next monotone table in ascending order, or `None` after the last one.
fn successor(n: usize, table: u64) -> Option<u64> {
    let size = 1usize << n;
    // deepest undecided alternative: lowest index that is 0 but free to be 1
    let idx = (0..size).find(|&idx| table >> idx & 1 == 0 && supersets_all_set(n, table, idx))?;
    let above = if idx + 1 >= 64 { 0 } else { table & !((1u64 << (idx + 1)) - 1) };
    Some(above | 1 << idx)
}

pub fn enumerate_monotone(n: usize) -> Result<EnumerationCursor> {
    EnumerationCursor::new(n, Constraint::Monotone)
}

pub fn enumerate_antipodal_monotone(n: usize) -> Result<EnumerationCursor> {
    EnumerationCursor::new(n, Constraint::AntipodalMonotone)
}

/// Default chain length for [`random_monotone`]: `50·2^n`.
pub fn default_steps(n: usize) -> u64 {
    50u64 << n
}

/// Whether flipping point `idx` keeps a monotone `f` monotone.
pub fn flip_keeps_monotone(f: &BooleanFunction, idx: usize) -> bool {
    let n = f.n();
    if f.get(idx) {
        // 1 → 0 needs every immediate subset at 0
        (0..n).all(|i| idx >> i & 1 == 0 || !f.get(idx & !(1 << i)))
    } else {
        (0..n).all(|i| idx >> i & 1 == 1 || f.get(idx | 1 << i))
    }
}

/// Runs the flip chain from the all-zeros function: each step proposes a
/// uniformly random point and flips it iff the result is monotone. The
/// uniform law on monotone functions is stationary; no mixing bound is
/// claimed for finite `steps`.
pub fn random_monotone(n: usize, seed: u64, steps: u64) -> Result<BooleanFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = BooleanFunction::zeros(n)?;
    run_flip_chain(&mut f, &mut rng, steps);
    Ok(f)
}

pub(crate) fn run_flip_chain<R: Rng>(f: &mut BooleanFunction, rng: &mut R, steps: u64) {
    let size = f.len();
    for _ in 0..steps {
        let idx = rng.random_range(0..size);
        if flip_keeps_monotone(f, idx) {
            f.flip(idx);
        }
    }
}

/// All monotone functions one point-flip away from `f`, in index order.
pub fn monotone_neighbors(f: &BooleanFunction) -> Result<Vec<BooleanFunction>> {
    if !f.is_monotone() {
        return Err(Error::NotMonotone);
    }
    Ok((0..f.len())
        .filter(|&idx| flip_keeps_monotone(f, idx))
        .map(|idx| {
            let mut g = f.clone();
            g.flip(idx);
            g
        })
        .collect())
}

/// Antipodal monotone functions reachable from `f` by flipping a point
/// together with its antipode.
pub fn antipodal_neighbors(f: &BooleanFunction) -> Result<Vec<BooleanFunction>> {
    if !f.is_monotone() {
        return Err(Error::NotMonotone);
    }
    if !f.is_antipodal() {
        return Err(Error::NotAntipodal);
    }
    let top = f.len() - 1;
    Ok((0..f.len())
        .filter(|&idx| idx < top - idx)
        .filter_map(|idx| {
            let mut g = f.clone();
            g.flip(idx);
            g.flip(top - idx);
            g.is_monotone().then_some(g)
        })
        .collect())
}

//! Exact Boolean-side quantities: truth tables, discrete derivatives,
//! influences, the second-order matrix `V`, Walsh–Fourier coefficients and
//! correlation.
//!
//! Points of `{-1,1}^n` are addressed by an index whose bit `i` is set iff
//! coordinate `i` (zero-based) equals `+1`. Everything here is integer or
//! rational arithmetic.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Rational;

/// Largest dimension accepted by any table operation.
pub const MAX_N: usize = 24;

/// Masks selecting, inside one 64-bit word, the indices whose bit `i` is zero.
const LOW_MASKS: [u64; 6] = [
    0x5555_5555_5555_5555,
    0x3333_3333_3333_3333,
    0x0f0f_0f0f_0f0f_0f0f,
    0x00ff_00ff_00ff_00ff,
    0x0000_ffff_0000_ffff,
    0x0000_0000_ffff_ffff,
];

/// Influence normalization.
///
/// `Std` is the probability that a coordinate is pivotal; `Paper` is
/// `2·E|∂_i f|` with the unit-step derivative, i.e. twice `Std` for
/// `{0,1}`-valued functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    Std,
    Paper,
}

impl Normalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::Std => "std",
            Normalization::Paper => "paper",
        }
    }
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "std" => Ok(Normalization::Std),
            "paper" => Ok(Normalization::Paper),
            other => Err(Error::field("normalization", format!("unknown value `{other}`"))),
        }
    }
}

/// A function `{-1,1}^n -> {0,1}` stored as a packed truth table.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BooleanFunction {
    n: usize,
    words: Vec<u64>,
}

fn word_count(n: usize) -> usize {
    if n <= 6 {
        1
    } else {
        1 << (n - 6)
    }
}

fn tail_mask(n: usize) -> u64 {
    if n >= 6 {
        u64::MAX
    } else {
        (1u64 << (1 << n)) - 1
    }
}

fn check_n(n: usize) -> Result<()> {
    if n > MAX_N {
        return Err(Error::TooLarge { what: "truth tables", n, limit: MAX_N });
    }
    Ok(())
}

impl BooleanFunction {
    /// The constant-zero function.
    pub fn zeros(n: usize) -> Result<Self> {
        check_n(n)?;
        Ok(Self { n, words: vec![0; word_count(n)] })
    }

    pub fn constant(n: usize, value: bool) -> Result<Self> {
        let mut f = Self::zeros(n)?;
        if value {
            for w in &mut f.words {
                *w = u64::MAX;
            }
            f.words[0] &= tail_mask(n);
        }
        Ok(f)
    }

    /// Builds a table from a predicate on point indices.
    pub fn from_fn(n: usize, mut value: impl FnMut(usize) -> bool) -> Result<Self> {
        let mut f = Self::zeros(n)?;
        for idx in 0..f.len() {
            if value(idx) {
                f.words[idx >> 6] |= 1 << (idx & 63);
            }
        }
        Ok(f)
    }

    /// Builds a table from a predicate on sign vectors.
    pub fn from_point_fn(n: usize, mut value: impl FnMut(&[i8]) -> bool) -> Result<Self> {
        let mut x = vec![0i8; n];
        Self::from_fn(n, |idx| {
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = if idx >> i & 1 == 1 { 1 } else { -1 };
            }
            value(&x)
        })
    }

    /// Table with at most 64 entries, given as the low `2^n` bits of `bits`.
    pub fn from_u64(n: usize, bits: u64) -> Result<Self> {
        if n > 6 {
            return Err(Error::TooLarge { what: "single-word tables", n, limit: 6 });
        }
        if bits & !tail_mask(n) != 0 {
            return Err(Error::field("table", "bits set beyond 2^n entries"));
        }
        Ok(Self { n, words: vec![bits] })
    }

    pub fn from_words(n: usize, words: Vec<u64>) -> Result<Self> {
        check_n(n)?;
        if words.len() != word_count(n) {
            return Err(Error::field("table", format!("expected {} words, got {}", word_count(n), words.len())));
        }
        if words[0] & !tail_mask(n) != 0 {
            return Err(Error::field("table", "bits set beyond 2^n entries"));
        }
        Ok(Self { n, words })
    }

    /// `x ↦ 1{x_coord = 1}`.
    pub fn dictator(n: usize, coord: usize) -> Result<Self> {
        if coord >= n {
            return Err(Error::CoordinateOutOfRange { coord, n });
        }
        Self::from_fn(n, |idx| idx >> coord & 1 == 1)
    }

    /// Logical AND of all coordinates (value 1 only at the all-ones point).
    pub fn and(n: usize) -> Result<Self> {
        Self::from_fn(n, |idx| idx == (1 << n) - 1)
    }

    pub fn or(n: usize) -> Result<Self> {
        Self::from_fn(n, |idx| idx != 0)
    }

    /// Majority: 1 iff strictly more than half of the coordinates are `+1`.
    pub fn majority(n: usize) -> Result<Self> {
        Self::from_fn(n, |idx| 2 * (idx.count_ones() as usize) > n)
    }

    /// Parity of the number of `+1` coordinates.
    pub fn parity(n: usize) -> Result<Self> {
        Self::from_fn(n, |idx| idx.count_ones() % 2 == 1)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of points, `2^n`.
    pub fn len(&self) -> usize {
        1 << self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// The whole table as one word, for `n ≤ 6`.
    pub fn as_u64(&self) -> Option<u64> {
        (self.n <= 6).then(|| self.words[0])
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        self.words[idx >> 6] >> (idx & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, idx: usize, value: bool) {
        let bit = 1u64 << (idx & 63);
        if value {
            self.words[idx >> 6] |= bit;
        } else {
            self.words[idx >> 6] &= !bit;
        }
    }

    #[inline]
    pub fn flip(&mut self, idx: usize) {
        self.words[idx >> 6] ^= 1 << (idx & 63);
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Index encoding of a sign vector.
    pub fn index_of(&self, x: &[i8]) -> Result<usize> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        let mut idx = 0;
        for (i, &xi) in x.iter().enumerate() {
            match xi {
                1 => idx |= 1 << i,
                -1 => {}
                other => return Err(Error::NotASignVector { index: i, value: other as i64 }),
            }
        }
        Ok(idx)
    }

    /// `f(x)` for a sign vector `x`.
    pub fn evaluate(&self, x: &[i8]) -> Result<u8> {
        Ok(self.get(self.index_of(x)?) as u8)
    }

    /// `∂_coord f(x) = f(x; x_coord → 1) − f(x; x_coord → −1)`; zero-based coordinate.
    pub fn discrete_derivative(&self, coord: usize, x: &[i8]) -> Result<i8> {
        if coord >= self.n {
            return Err(Error::CoordinateOutOfRange { coord, n: self.n });
        }
        let idx = self.index_of(x)?;
        let up = self.get(idx | 1 << coord) as i8;
        let down = self.get(idx & !(1 << coord)) as i8;
        Ok(up - down)
    }

    /// `E_μ[f]`.
    pub fn mean(&self) -> Rational {
        Rational::new(self.count_ones() as i128, self.len() as i128)
    }

    /// True iff every discrete derivative is nonnegative everywhere.
    pub fn is_monotone(&self) -> bool {
        for i in 0..self.n {
            if i < 6 {
                let shift = 1 << i;
                let low = LOW_MASKS[i];
                // value at idx (bit i clear) must not exceed value at idx | bit i
                if self.words.iter().any(|&w| (w & low) & !(w >> shift) != 0) {
                    return false;
                }
            } else {
                let stride = 1 << (i - 6);
                for (k, &w) in self.words.iter().enumerate() {
                    if k & stride == 0 && w & !self.words[k | stride] != 0 {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// True iff `f(x) = 1 − f(−x)` for every `x`.
    pub fn is_antipodal(&self) -> bool {
        // −x has index idx ^ (2^n − 1), i.e. the table read backwards.
        if self.n <= 6 {
            let w = self.words[0];
            let size = 1u32 << self.n;
            let rev = w.reverse_bits() >> (64 - size);
            return w ^ rev == tail_mask(self.n);
        }
        let m = self.words.len();
        (0..m).all(|k| self.words[k] ^ self.words[m - 1 - k].reverse_bits() == u64::MAX)
    }

    /// For each coordinate, the number of points at which it is pivotal
    /// (so that `inf_std_i = count_i / 2^n`).
    pub fn pivotal_counts(&self) -> Vec<u64> {
        (0..self.n)
            .map(|i| {
                if i < 6 {
                    let shift = 1 << i;
                    let low = LOW_MASKS[i];
                    2 * self
                        .words
                        .iter()
                        .map(|&w| ((w ^ (w >> shift)) & low).count_ones() as u64)
                        .sum::<u64>()
                } else {
                    let stride = 1 << (i - 6);
                    2 * (0..self.words.len())
                        .filter(|k| k & stride == 0)
                        .map(|k| (self.words[k] ^ self.words[k | stride]).count_ones() as u64)
                        .sum::<u64>()
                }
            })
            .collect()
    }

    /// Row-major `n × n` matrix of `Σ_x ∂_i ∂_j f(x)`; diagonal is zero.
    pub fn second_derivative_sums(&self) -> Vec<i64> {
        let n = self.n;
        let mut out = vec![0i64; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let (bi, bj) = (1usize << i, 1usize << j);
                let mut acc = 0i64;
                for idx in 0..self.len() {
                    if idx & (bi | bj) != 0 {
                        continue;
                    }
                    acc += self.get(idx | bi | bj) as i64 - self.get(idx | bi) as i64 - self.get(idx | bj) as i64
                        + self.get(idx) as i64;
                }
                // each of the 2^n points sees the same second difference as its base point
                out[i * n + j] = 4 * acc;
                out[j * n + i] = 4 * acc;
            }
        }
        out
    }

    /// Walsh–Fourier coefficients by the fast transform, `O(n·2^n)`.
    pub fn walsh_fourier(&self) -> FourierSpectrum {
        let len = self.len();
        let mut a: Vec<i64> = (0..len).map(|idx| self.get(idx) as i64).collect();
        let mut h = 1;
        while h < len {
            for block in (0..len).step_by(2 * h) {
                for idx in block..block + h {
                    let (lo, hi) = (a[idx], a[idx + h]);
                    // lo sits at x_i = −1, hi at x_i = +1
                    a[idx] = lo + hi;
                    a[idx + h] = hi - lo;
                }
            }
            h *= 2;
        }
        FourierSpectrum { n: self.n, numerators: a }
    }

    /// Lowercase little-endian hex: digit `k` holds entries `4k..4k+3`,
    /// entry `4k` in the least significant bit of the digit.
    pub fn to_hex(&self) -> String {
        let digits = self.len().div_ceil(4);
        (0..digits)
            .map(|k| {
                let nib = (self.words[(4 * k) >> 6] >> ((4 * k) & 63)) & 0xf;
                char::from_digit(nib as u32, 16).expect("nibble")
            })
            .collect()
    }

    pub fn from_hex(n: usize, hex: &str) -> Result<Self> {
        check_n(n)?;
        let mut f = Self::zeros(n)?;
        let digits = f.len().div_ceil(4);
        if hex.len() != digits {
            return Err(Error::field("table_hex", format!("expected {digits} hex digits for n = {n}, got {}", hex.len())));
        }
        for (k, ch) in hex.chars().enumerate() {
            if ch.is_ascii_uppercase() {
                return Err(Error::field("table_hex", "hex digits must be lowercase"));
            }
            let nib = ch
                .to_digit(16)
                .ok_or_else(|| Error::field("table_hex", format!("invalid hex digit `{ch}`")))? as u64;
            f.words[(4 * k) >> 6] |= nib << ((4 * k) & 63);
        }
        if f.words[0] & !tail_mask(n) != 0 {
            return Err(Error::field("table_hex", "bits set beyond 2^n entries"));
        }
        Ok(f)
    }

    pub fn to_file(&self) -> FunctionFile {
        FunctionFile { n: self.n, table_hex: self.to_hex() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: FunctionFile = crate::error::parse_json(s, "function")?;
        file.to_function()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn store(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

impl fmt::Debug for BooleanFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BooleanFunction(n={}, {})", self.n, self.to_hex())
    }
}

/// On-disk form of a Boolean function: `{"n": int, "table_hex": string}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionFile {
    pub n: usize,
    pub table_hex: String,
}

impl FunctionFile {
    pub fn to_function(&self) -> Result<BooleanFunction> {
        BooleanFunction::from_hex(self.n, &self.table_hex)
    }
}

/// Walsh–Fourier coefficients `f̂(S) = numerators[S] / 2^n`, with `S` a
/// coordinate bitmask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FourierSpectrum {
    n: usize,
    numerators: Vec<i64>,
}

impl FourierSpectrum {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn numerators(&self) -> &[i64] {
        &self.numerators
    }

    pub fn coefficient(&self, set: usize) -> Rational {
        Rational::new(self.numerators[set] as i128, 1i128 << self.n)
    }

    /// `f̂({i, j})` for zero-based `i ≠ j`.
    pub fn pair(&self, i: usize, j: usize) -> Rational {
        self.coefficient(1 << i | 1 << j)
    }

    /// `Σ_S f̂(S)²`.
    pub fn squared_norm(&self) -> Rational {
        let num: i128 = self.numerators.iter().map(|&c| (c as i128) * (c as i128)).sum();
        Rational::new(num, 1i128 << (2 * self.n))
    }
}

/// All spectral data of one function; see the module docs for conventions.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    pub n: usize,
    pub mean: Rational,
    /// Probability that coordinate `i` is pivotal.
    pub inf_std: Vec<Rational>,
    /// `2·E|∂_i f|`; twice `inf_std`.
    pub inf_paper: Vec<Rational>,
    /// `V_{ij} = E[∂_i ∂_j f]`, row-major, zero diagonal.
    pub v: Vec<Rational>,
    pub fourier: FourierSpectrum,
    pub monotone: bool,
    pub antipodal: bool,
    /// Integer numerators over `2^n`: pivotal counts and `Σ_x ∂_i∂_j f`.
    pub pivotal: Vec<u64>,
    pub second: Vec<i64>,
}

impl SpectralSummary {
    pub fn influences(&self, norm: Normalization) -> &[Rational] {
        match norm {
            Normalization::Std => &self.inf_std,
            Normalization::Paper => &self.inf_paper,
        }
    }

    pub fn v_at(&self, i: usize, j: usize) -> Rational {
        self.v[i * self.n + j]
    }

    /// Row `V_i(f) = (E ∂_1∂_i f, …, E ∂_n∂_i f)`.
    pub fn v_row(&self, i: usize) -> &[Rational] {
        &self.v[i * self.n..(i + 1) * self.n]
    }

    /// Fourier-normalized second-order entry `f̂({i,j})` (zero on the diagonal).
    pub fn v_fourier(&self, i: usize, j: usize) -> Rational {
        if i == j {
            Rational::from_integer(0)
        } else {
            self.fourier.pair(i, j)
        }
    }
}

/// Computes every spectral quantity of `f` exactly.
pub fn spectral_summary(f: &BooleanFunction) -> Result<SpectralSummary> {
    check_n(f.n())?;
    let n = f.n();
    let size = 1i128 << n;
    let pivotal = f.pivotal_counts();
    let second = f.second_derivative_sums();
    let inf_std: Vec<Rational> = pivotal.iter().map(|&c| Rational::new(c as i128, size)).collect();
    let inf_paper = inf_std.iter().map(|r| r * Rational::from_integer(2)).collect();
    let v = second.iter().map(|&s| Rational::new(s as i128, size)).collect();
    Ok(SpectralSummary {
        n,
        mean: f.mean(),
        inf_std,
        inf_paper,
        v,
        fourier: f.walsh_fourier(),
        monotone: f.is_monotone(),
        antipodal: f.is_antipodal(),
        pivotal,
        second,
    })
}

/// `Cor(f,g) = E[fg] − E[f]E[g]`, exact.
pub fn correlation(f: &BooleanFunction, g: &BooleanFunction) -> Result<Rational> {
    if f.n() != g.n() {
        return Err(Error::DimensionMismatch { expected: f.n(), got: g.n() });
    }
    let both: u64 = f.words.iter().zip(&g.words).map(|(a, b)| (a & b).count_ones() as u64).sum();
    Ok(correlation_from_counts(f.n(), both, f.count_ones(), g.count_ones()))
}

/// `(2^n·Σfg − Σf·Σg) / 4^n` from integer counts.
pub fn correlation_from_counts(n: usize, both: u64, ones_f: u64, ones_g: u64) -> Rational {
    let num = ((both as i128) << n) - (ones_f as i128) * (ones_g as i128);
    Rational::new(num, 1i128 << (2 * n))
}

//! Right-hand sides of the correlation lower bounds with the universal
//! constant set to 1.
//!
//! Every kernel returns `None` when a logarithm in a denominator is not
//! positive (possible for the `paper` normalization or non-monotone input),
//! and `Some(0)` in the zero limit `x / log(e/x) → 0`.

use crate::scalar::Real;

fn log_e_over<T: Real>(x: T) -> Option<T> {
    let l = (T::E() / x).ln();
    (l > T::zero()).then_some(l)
}

/// `m1 / log(e/m1)`.
pub fn talagrand<T: Real>(m1: T) -> Option<T> {
    if m1 == T::zero() {
        return Some(T::zero());
    }
    if m1 < T::zero() {
        return None;
    }
    Some(m1 / log_e_over(m1)?)
}

/// One coordinate of the KMS sum: `a·b / sqrt(log(e/a)·log(e/b))`.
pub fn kms_term<T: Real>(a: T, b: T) -> Option<T> {
    if a == T::zero() || b == T::zero() {
        return Some(T::zero());
    }
    if a < T::zero() || b < T::zero() {
        return None;
    }
    Some(a * b / (log_e_over(a)? * log_e_over(b)?).sqrt())
}

/// `min(m1 / sqrt(log(e/m1)), m1² / |m2|)`; the second branch is `+∞` when `m2 = 0`.
pub fn main_tal<T: Real>(m1: T, m2: T) -> Option<T> {
    if m1 == T::zero() {
        return Some(T::zero());
    }
    if m1 < T::zero() {
        return None;
    }
    let first = m1 / log_e_over(m1)?.sqrt();
    if m2 == T::zero() {
        return Some(first);
    }
    Some(first.min(m1 * m1 / m2.abs()))
}

/// One coordinate of the refined KMS sum:
/// `p·min(1/sqrt(log(e/p)), p/|v|)` with `p = I_i(f)I_i(g)` and
/// `v = ⟨V_i(f), V_i(g)⟩`.
pub fn main_coord_term<T: Real>(p: T, v: T) -> Option<T> {
    if p == T::zero() {
        return Some(T::zero());
    }
    if p < T::zero() {
        return None;
    }
    let first = T::one() / log_e_over(p)?.sqrt();
    if v == T::zero() {
        return Some(p * first);
    }
    Some(p * first.min(p / v.abs()))
}

/// `m1 / sqrt(log(2e/m1))`.
pub fn symm<T: Real>(m1: T) -> Option<T> {
    if m1 == T::zero() {
        return Some(T::zero());
    }
    if m1 < T::zero() {
        return None;
    }
    let l = (T::lit(2.0) * T::E() / m1).ln();
    (l > T::zero()).then(|| m1 / l.sqrt())
}

/// Empirical constant `m2 / (m1·log(e/m1))`; undefined for `m1 = 0`.
pub fn remark_constant<T: Real>(m1: T, m2: T) -> Option<T> {
    if m1 <= T::zero() {
        return None;
    }
    Some(m2 / (m1 * log_e_over(m1)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // reference values evaluated independently in Python (math.log/sqrt)
    #[test]
    fn reference_values() {
        assert_abs_diff_eq!(talagrand(0.75_f64).unwrap(), 0.58244190553339, epsilon = 1e-12);
        assert_abs_diff_eq!(talagrand(1.0_f64).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(talagrand(0.0_f64), Some(0.0));
        assert_abs_diff_eq!(main_tal(0.5_f64, 2.0).unwrap(), 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(main_tal(0.75_f64, 0.0).unwrap(), 0.6609322424803035, epsilon = 1e-12);
        assert_abs_diff_eq!(remark_constant(0.5_f64, 2.0).unwrap(), 2.362464436598565, epsilon = 1e-12);
        assert_eq!(remark_constant(0.0_f64, 1.0), None);
    }

    #[test]
    fn out_of_domain() {
        assert_eq!(talagrand(4.0_f64), None);
        assert_eq!(kms_term(3.0_f64, 0.5), None);
        assert!(symm(4.0_f64).is_some());
        assert_eq!(talagrand(-0.1_f64), None);
    }

    #[test]
    fn generic_over_f32() {
        let r: f32 = main_tal(0.5_f32, 2.0).unwrap();
        assert!((r - 0.125).abs() < 1e-6);
    }
}

//! Real-number abstraction and deterministic summation.
//!
//! All metric reductions go through [`pairwise_sum`], a fixed-shape pairwise
//! tree whose shape depends only on the term count.  Every schedule and
//! engine accumulates the same terms in the same order, which is what makes
//! their outputs bitwise comparable.

/// Minimal real-number trait; implemented for `f32` and `f64`.
pub trait Real:
    Copy
    + PartialOrd
    + core::ops::Add<Output = Self>
    + core::ops::Mul<Output = Self>
    + core::ops::Div<Output = Self>
    + Send
    + Sync
    + 'static
{
    const ZERO: Self;
    const ONE: Self;
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f32 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Real for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// Choice of floating-point width for a metric computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Precision {
    Single,
    Double,
}

impl Precision {
    pub fn bytes(self) -> u64 {
        match self {
            Precision::Single => 4,
            Precision::Double => 8,
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "single" | "f32" => Ok(Precision::Single),
            "double" | "f64" => Ok(Precision::Double),
            other => Err(format!("unknown precision {other:?} (expected single or double)")),
        }
    }
}

/// Sum by a balanced pairwise tree.  The tree shape is a function of
/// `terms.len()` alone, so the result is reproducible for a fixed term
/// order regardless of how callers were scheduled.
pub fn pairwise_sum<T: Real>(terms: &[T]) -> T {
    match terms.len() {
        0 => T::ZERO,
        1 => terms[0],
        2 => terms[0] + terms[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&terms[..mid]) + pairwise_sum(&terms[mid..])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_exact_values() {
        let v: Vec<f64> = (1..=17).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), v.iter().sum::<f64>());
        assert_eq!(pairwise_sum::<f64>(&[]), 0.0);
        assert_eq!(pairwise_sum(&[3.5f64]), 3.5);
    }
}

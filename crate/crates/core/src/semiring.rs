use crate::numeric::{log_add, LOG_ZERO};

/// Weight algebra of a transducer. Weights are natural-log values in both
/// semirings: `Log` sums path mass, `Tropical` keeps the best path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Semiring {
    Log,
    Tropical,
}

impl Semiring {
    #[inline]
    pub fn zero(self) -> f64 {
        LOG_ZERO
    }

    #[inline]
    pub fn one(self) -> f64 {
        0.0
    }

    #[inline]
    pub fn plus(self, a: f64, b: f64) -> f64 {
        match self {
            Semiring::Log => log_add(a, b),
            Semiring::Tropical => a.max(b),
        }
    }

    #[inline]
    pub fn times(self, a: f64, b: f64) -> f64 {
        if a == LOG_ZERO || b == LOG_ZERO {
            LOG_ZERO
        } else {
            a + b
        }
    }

    pub fn sum(self, values: impl IntoIterator<Item = f64>) -> f64 {
        values.into_iter().fold(self.zero(), |acc, v| self.plus(acc, v))
    }

    /// Kleene closure `1 ⊕ a ⊕ a⊗a ⊕ ...`; `None` when the series diverges.
    pub fn star(self, a: f64) -> Option<f64> {
        if a == LOG_ZERO {
            return Some(0.0);
        }
        match self {
            Semiring::Log if a < 0.0 => Some(-(-a.exp()).ln_1p()),
            Semiring::Tropical if a <= 0.0 => Some(0.0),
            _ => None,
        }
    }
}

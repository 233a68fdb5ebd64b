use num::{One, Zero};

use super::RlError;
use crate::rational::Rational;

/// Summable discount `γ_t` (t ≥ 1) with an exact tail `Γ_t = Σ_{k≥t} γ_k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Discount {
    /// `γ_t = γ^t` with `0 < γ < 1`.
    Geometric(Rational),
    /// `γ_t = 1` for `t ≤ H`, zero afterwards.
    FiniteHorizon(u64),
}

impl Discount {
    pub fn geometric(gamma: Rational) -> Result<Self, RlError> {
        if gamma <= Rational::zero() || gamma >= Rational::one() {
            return Err(RlError::BadDiscount(format!(
                "geometric factor {} is not in (0, 1)",
                crate::rational::show(&gamma)
            )));
        }
        Ok(Discount::Geometric(gamma))
    }

    pub fn gamma(&self, t: u64) -> Rational {
        match self {
            Discount::Geometric(g) => num::pow::pow(g.clone(), t as usize),
            Discount::FiniteHorizon(h) => {
                if t >= 1 && t <= *h {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            }
        }
    }

    pub fn tail(&self, t: u64) -> Rational {
        match self {
            Discount::Geometric(g) => num::pow::pow(g.clone(), t as usize) / (Rational::one() - g),
            Discount::FiniteHorizon(h) => {
                let t = t.max(1);
                Rational::from_integer((h + 1).saturating_sub(t).into())
            }
        }
    }

    /// `γ_t / Γ_t`, the weight of the immediate reward in a normalized value.
    pub fn step_weight(&self, t: u64) -> Rational {
        match self {
            Discount::Geometric(g) => Rational::one() - g,
            _ => ratio(&self.gamma(t), &self.tail(t)),
        }
    }

    /// `Γ_{t+1} / Γ_t`, the weight of the continuation value.
    pub fn continuation(&self, t: u64) -> Rational {
        match self {
            Discount::Geometric(g) => g.clone(),
            _ => ratio(&self.tail(t + 1), &self.tail(t)),
        }
    }

    /// `Γ_{t+m} / Γ_t`.
    pub fn tail_ratio(&self, t: u64, m: u64) -> Rational {
        match self {
            Discount::Geometric(g) => num::pow::pow(g.clone(), m as usize),
            _ => ratio(&self.tail(t + m), &self.tail(t)),
        }
    }

    /// Values at time `t` depend on `t` only through the state.
    pub fn is_stationary(&self) -> bool {
        matches!(self, Discount::Geometric(_))
    }
}

fn ratio(a: &Rational, b: &Rational) -> Rational {
    if b.is_zero() {
        Rational::zero()
    } else {
        a / b
    }
}

/// Smallest `H ≥ 0` with `Γ_{t+H} / Γ_t ≤ ε`.
pub fn effective_horizon(discount: &Discount, t: u64, eps: &Rational) -> Result<u64, RlError> {
    if *eps <= Rational::zero() {
        return Err(RlError::BadPrecision);
    }
    let base = discount.tail(t);
    if base.is_zero() {
        return Err(RlError::ZeroTail(t));
    }
    match discount {
        Discount::Geometric(g) => {
            let mut h = 0u64;
            let mut r = Rational::one();
            while r > *eps {
                r *= g;
                h += 1;
            }
            Ok(h)
        }
        Discount::FiniteHorizon(_) => {
            // Γ_{t+H} / Γ_t = (B - H) / B for B = Γ_t; solve B - H ≤ ε B.
            let b = base;
            let mut h = 0u64;
            while (&b - Rational::from_integer(h.into())) / &b > *eps {
                h += 1;
            }
            Ok(h)
        }
    }
}

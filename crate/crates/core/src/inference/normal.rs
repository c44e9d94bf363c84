//! Standard normal tail probabilities in log space.

use libm::{erf, erfc};
use statrs::function::erf::erfc_inv;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_2: f64 = std::f64::consts::LN_2;

/// Above this, `erfc` is evaluated through its scaled continued fraction.
const ERFC_DIRECT_LIMIT: f64 = 25.0;

/// `ln(exp(x^2) erfc(x))` for `x >= ERFC_DIRECT_LIMIT`.
fn ln_erfcx_large(x: f64) -> f64 {
    // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let mut tail = x;
    for k in (1..=60).rev() {
        tail = x + (k as f64 / 2.0) / tail;
    }
    -(tail.ln()) - 0.5 * std::f64::consts::PI.ln()
}

/// `ln P(Z > x)` for standard normal `Z`.
pub fn log_q(x: f64) -> f64 {
    if x == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    let z = x / SQRT_2;
    if z < ERFC_DIRECT_LIMIT {
        (0.5 * erfc(z)).ln()
    } else {
        ln_erfcx_large(z) - z * z - LN_2
    }
}

/// `ln(1 - exp(x))` for `x <= 0`.
pub fn log1mexp(x: f64) -> f64 {
    if x > -LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `ln(exp(a) + exp(b))`.
pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

pub fn log_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, log_add)
}

/// `ln P(a < Z < b)` for standard normal `Z`, with `a <= b`.
pub fn log_mass(a: f64, b: f64) -> f64 {
    if !(a < b) {
        return f64::NEG_INFINITY;
    }
    if a >= 0.0 {
        let (qa, qb) = (log_q(a), log_q(b));
        qa + log1mexp(qb - qa)
    } else if b <= 0.0 {
        let (qa, qb) = (log_q(-b), log_q(-a));
        qa + log1mexp(qb - qa)
    } else {
        (0.5 * (erf(b / SQRT_2) + erf(-a / SQRT_2))).ln()
    }
}

/// Standard normal CDF.
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Upper `p`-quantile: the `z` with `P(Z > z) = p`.
pub fn upper_quantile(p: f64) -> f64 {
    let mut z = SQRT_2 * erfc_inv(2.0 * p);
    if !z.is_finite() {
        return z;
    }
    for _ in 0..2 {
        let density = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if density == 0.0 {
            break;
        }
        z += (0.5 * erfc(z / SQRT_2) - p) / density;
    }
    z
}

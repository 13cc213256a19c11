//! Upper tail dependence.
//!
//! The symmetric negative binomial copula has
//! `λ_U(a) = 1 - C(2a, a) / 4^a`, tending to `1 - 1/sqrt(pi a)` for large
//! `a`; the Poisson copula has no upper tail dependence even though its
//! density is unbounded at `(1, 1)`. The empirical estimator is the plug-in
//! ratio `P(U > t, V > t) / (1 - t)`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::engine::Samples;
use crate::error::{Error, Result};

/// Exact `λ_U(a) = 1 - C(2a, a) / 4^a` for the symmetric negative binomial
/// copula. Exact integer arithmetic up to `a = 33`; log-gamma beyond.
pub fn lambda_u_nb_exact(a: u32) -> Result<f64> {
    if a < 1 {
        return Err(Error::invalid("a", "must be a positive integer"));
    }
    // central binomial over 4^a; the denominator is a power of two, so the
    // small-a branch is exact in f64
    let ratio = if a <= 33 {
        let mut c: u128 = 1;
        for k in 1..=u128::from(a) {
            // C(2a, a) running product: multiply before divide stays exact
            c = c * (u128::from(a) + k) / k;
        }
        c as f64 / 4f64.powi(a as i32)
    } else {
        let a_f = f64::from(a);
        (ln_gamma(2.0 * a_f + 1.0) - 2.0 * ln_gamma(a_f + 1.0) - a_f * 4f64.ln()).exp()
    };
    Ok(1.0 - ratio)
}

/// Large-`a` asymptotic `1 - 1/sqrt(pi a)`, clamped into `[0, 1]`.
pub fn lambda_u_nb_asymptotic(a: f64) -> f64 {
    (1.0 - 1.0 / (std::f64::consts::PI * a).sqrt()).clamp(0.0, 1.0)
}

/// A plug-in upper tail estimate at threshold `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub threshold: f64,
    pub estimate: f64,
    pub sample_count: usize,
}

/// `λ̂ = #{rows with both coordinates > t} / (N (1 - t))`, clamped to
/// `[0, 1]`; `samples` must be bivariate.
pub fn empirical_lambda_u(samples: &Samples, t: f64) -> Result<TailEstimate> {
    if samples.d() != 2 {
        return Err(Error::invalid(
            "samples",
            format!("tail estimation is bivariate, got d = {}", samples.d()),
        ));
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::invalid("t", format!("threshold must lie in (0,1), got {t}")));
    }
    let n = samples.count();
    if n == 0 {
        return Err(Error::invalid("samples", "empty sample"));
    }
    let hits = samples.rows().filter(|r| r[0] > t && r[1] > t).count();
    let raw = hits as f64 / (n as f64 * (1.0 - t));
    Ok(TailEstimate {
        threshold: t,
        estimate: raw.clamp(0.0, 1.0),
        sample_count: n,
    })
}

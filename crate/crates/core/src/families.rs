//! Partition-of-unity families.
//!
//! A family assigns to every `u ∈ (0,1)` a discrete distribution
//! `{φ_i(u)}_{i ≥ 0}` over the component index, with marginal masses
//! `α_i = ∫ φ_i` and component densities `f_i = φ_i / α_i`. Two families are
//! provided:
//!
//! * negative binomial: `φ_i(u) = C(a+i-1, i) u^i (1-u)^a` for integer
//!   `a ≥ 1`; `α_i = a / ((a+i)(a+i+1))` (a discrete Pareto law) and `f_i`
//!   is the Beta(i+1, a+1) density;
//! * Poisson: `φ_i(u) = (1-u)^a a^i L(u)^i / i!` with `L(u) = -ln(1-u)` and
//!   real `a > 0`; `α_i = a^i / (a+1)^{i+1}` (geometric) and `f_i` is the
//!   density of `1 - exp(-Y)` for `Y ~ Gamma(i+1, rate a+1)`.
//!
//! The driver quantile inverts the cumulative `α` masses, so a uniform (or
//! copula-distributed) variate maps to a component index with the right law.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    NegativeBinomial,
    Poisson,
}

/// A partition family together with its parameter `a`.
///
/// For the negative binomial family `a` is restricted to positive integers;
/// the Poisson family accepts any positive real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyParams {
    kind: FamilyKind,
    a: f64,
}

impl FamilyParams {
    pub fn negative_binomial(a: u32) -> Result<Self> {
        if a < 1 {
            return Err(Error::invalid("a", "negative binomial parameter must be >= 1"));
        }
        Ok(Self {
            kind: FamilyKind::NegativeBinomial,
            a: f64::from(a),
        })
    }

    pub fn poisson(a: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::invalid("a", format!("Poisson parameter must be positive, got {a}")));
        }
        Ok(Self {
            kind: FamilyKind::Poisson,
            a,
        })
    }

    /// Validating constructor from a runtime kind tag.
    pub fn new(kind: FamilyKind, a: f64) -> Result<Self> {
        match kind {
            FamilyKind::NegativeBinomial => {
                if !(a > 0.0) || a.fract() != 0.0 || a > f64::from(u32::MAX) {
                    return Err(Error::invalid(
                        "a",
                        format!("negative binomial parameter must be a positive integer, got {a}"),
                    ));
                }
                Self::negative_binomial(a as u32)
            }
            FamilyKind::Poisson => Self::poisson(a),
        }
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// Partition weight `φ_i(u)`; requires `0 < u < 1`.
    pub fn phi_weight(&self, i: u64, u: f64) -> Result<f64> {
        check_open_unit(u)?;
        Ok(self.phi_unchecked(i, u))
    }

    fn phi_unchecked(&self, i: u64, u: f64) -> f64 {
        let a = self.a;
        let i_f = i as f64;
        match self.kind {
            FamilyKind::NegativeBinomial => {
                // C(a+i-1, i) u^i (1-u)^a, with the binomial coefficient in
                // log space to survive large i.
                let log_binom = ln_gamma(a + i_f) - ln_gamma(i_f + 1.0) - ln_gamma(a);
                (log_binom + i_f * u.ln() + a * (-u).ln_1p()).exp()
            }
            FamilyKind::Poisson => {
                let ell = -(-u).ln_1p();
                let log_term = if i == 0 {
                    0.0
                } else {
                    i_f * (a * ell).ln() - ln_gamma(i_f + 1.0)
                };
                (log_term + a * (-u).ln_1p()).exp()
            }
        }
    }

    /// Marginal component mass `α_i = ∫_0^1 φ_i(u) du`.
    pub fn marginal_alpha(&self, i: u64) -> f64 {
        let a = self.a;
        let i_f = i as f64;
        match self.kind {
            FamilyKind::NegativeBinomial => a / ((a + i_f) * (a + i_f + 1.0)),
            FamilyKind::Poisson => (i_f * (a.ln() - (a + 1.0).ln()) - (a + 1.0).ln()).exp(),
        }
    }

    /// Component density `f_i(u) = φ_i(u) / α_i`; requires `0 < u < 1`.
    pub fn component_density(&self, i: u64, u: f64) -> Result<f64> {
        check_open_unit(u)?;
        Ok(self.component_density_unchecked(i, u))
    }

    pub(crate) fn component_density_unchecked(&self, i: u64, u: f64) -> f64 {
        let a = self.a;
        let i_f = i as f64;
        match self.kind {
            FamilyKind::NegativeBinomial => {
                // Beta(i+1, a+1) density.
                let log_norm = ln_gamma(i_f + a + 2.0) - ln_gamma(i_f + 1.0) - ln_gamma(a + 1.0);
                (log_norm + i_f * u.ln() + a * (-u).ln_1p()).exp()
            }
            FamilyKind::Poisson => {
                let ell = -(-u).ln_1p();
                let log_l = if i == 0 { 0.0 } else { i_f * ell.ln() - ln_gamma(i_f + 1.0) };
                ((i_f + 1.0) * (a + 1.0).ln() + log_l + a * (-u).ln_1p()).exp()
            }
        }
    }

    /// Draw from the component distribution `f_i` using an exact sampler;
    /// the result is strictly inside `(0, 1)`.
    pub fn sample_component<R: Rng + ?Sized>(&self, i: u64, rng: &mut R) -> f64 {
        let a = self.a;
        let shape = i as f64 + 1.0;
        match self.kind {
            FamilyKind::NegativeBinomial => {
                let beta = Beta::new(shape, a + 1.0).expect("valid Beta parameters");
                loop {
                    let v = beta.sample(rng);
                    if v > 0.0 && v < 1.0 {
                        return v;
                    }
                }
            }
            FamilyKind::Poisson => {
                // U = 1 - exp(-Y) with Y ~ Gamma(i+1, rate a+1); the rate
                // parameterisation is forced by the gamma kernel of f_i.
                let gamma = Gamma::new(shape, 1.0 / (a + 1.0)).expect("valid Gamma parameters");
                loop {
                    let y = gamma.sample(rng);
                    let v = -(-y).exp_m1();
                    if v > 0.0 && v < 1.0 {
                        return v;
                    }
                }
            }
        }
    }

    /// Cumulative driver mass `F(i) = Σ_{j ≤ i} α_j`.
    pub fn driver_cdf(&self, i: u64) -> f64 {
        let a = self.a;
        let i_f = i as f64;
        match self.kind {
            // telescoping sum of a/((a+j)(a+j+1))
            FamilyKind::NegativeBinomial => (i_f + 1.0) / (a + i_f + 1.0),
            // geometric partial sum 1 - (a/(a+1))^{i+1}
            FamilyKind::Poisson => -((i_f + 1.0) * (a.ln() - (a + 1.0).ln())).exp_m1(),
        }
    }

    /// `F(i - 1)` with the convention `F(-1) = 0`.
    pub fn driver_cdf_before(&self, i: u64) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.driver_cdf(i - 1)
        }
    }

    /// Generalized inverse of the driver cdf: the unique `i` with
    /// `F(i-1) ≤ û < F(i)`. Requires `0 < û < 1`.
    pub fn driver_quantile(&self, u_hat: f64) -> Result<u64> {
        check_open_unit(u_hat)?;
        Ok(self.driver_quantile_unchecked(u_hat))
    }

    pub(crate) fn driver_quantile_unchecked(&self, u_hat: f64) -> u64 {
        let a = self.a;
        // Closed-form floor as an initial guess, then settle boundary
        // rounding against the cdf so the quantile/cdf duality is exact.
        let guess = match self.kind {
            FamilyKind::NegativeBinomial => (a * u_hat / (1.0 - u_hat)).floor(),
            FamilyKind::Poisson => (-(-u_hat).ln_1p() / ((a + 1.0).ln() - a.ln())).floor(),
        };
        let mut i = if guess.is_finite() && guess > 0.0 {
            guess as u64
        } else {
            0
        };
        while i > 0 && u_hat < self.driver_cdf(i - 1) {
            i -= 1;
        }
        let mut steps = 0;
        while u_hat >= self.driver_cdf(i) {
            i += 1;
            steps += 1;
            // the cdf saturates in f64 for astronomically large i
            if steps > 1024 {
                break;
            }
        }
        i
    }
}

fn check_open_unit(u: f64) -> Result<()> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::invalid("u", format!("must lie strictly inside (0,1), got {u}")));
    }
    Ok(())
}

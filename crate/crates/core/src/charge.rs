//! Analytic charge-density families with exact gradients.
//!
//! The four variants realize the hypotheses used throughout: a constant
//! background, a polynomially or exponentially coercive profile, and a
//! constant with a localized dip (the strict-inequality family).

use crate::error::{CoreError, Result};
use crate::grid::Grid;
use std::fmt;

/// Analytic form of the density.
#[derive(Debug, Clone, PartialEq)]
pub enum RhoVariant {
    /// rho(x) = rho_inf
    Constant { rho_inf: f64 },
    /// rho(x) = rho0 * (1 + |x|^2)^{s/2}
    CoercivePower { rho0: f64, s: f64 },
    /// rho(x) = rho_inf - a * exp(-|x - xb|^2 / sigma^2), 0 < a < rho_inf
    BumpedConstant {
        rho_inf: f64,
        a: f64,
        sigma: f64,
        xb: [f64; 3],
    },
    /// rho(x) = rho0 * exp(beta * (1 + |x|)^alpha)
    ExpCoercive { rho0: f64, beta: f64, alpha: f64 },
}

/// Decay constants of the far-field estimates attached to each family:
/// `u <= C exp(-sqrt(a_const) (1+|x|)^alpha)` and
/// `rho u^2 = O(exp((beta - 2 sqrt(a_const)) (1+|x|)^alpha))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayConstants {
    pub a_const: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoMetadata {
    /// Limit at infinity; `None` encodes a coercive (unbounded) profile.
    pub rho_inf: Option<f64>,
    pub decay: DecayConstants,
}

/// A density family together with the scaling-identity constant `k` used by
/// the `k rho <= (x, grad rho)` hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeDensity {
    variant: RhoVariant,
    k: f64,
}

pub fn eval_rho(cd: &ChargeDensity, x: [f64; 3]) -> f64 {
    cd.eval(x)
}

pub fn grad_rho(cd: &ChargeDensity, x: [f64; 3]) -> [f64; 3] {
    cd.grad(x)
}

#[derive(Debug, Clone, Copy)]
pub struct KConditionCheck {
    pub holds: bool,
    pub worst_margin: f64,
}

/// Checks `k rho(x) <= (x, grad rho(x))` at every grid point.
pub fn verify_k_condition(cd: &ChargeDensity, sample: &Grid) -> KConditionCheck {
    let mut worst = f64::INFINITY;
    for x in sample.positions() {
        let g = cd.grad(x);
        let margin = x[0] * g[0] + x[1] * g[1] + x[2] * g[2] - cd.k() * cd.eval(x);
        if margin < worst {
            worst = margin;
        }
    }
    KConditionCheck {
        holds: worst >= -1e-12,
        worst_margin: worst,
    }
}

impl ChargeDensity {
    pub fn new(variant: RhoVariant, k: f64) -> Result<Self> {
        match &variant {
            RhoVariant::Constant { rho_inf } => {
                if !(*rho_inf >= 0.0) {
                    return Err(CoreError::BadChargeDensity(format!(
                        "constant density must be nonnegative, got {rho_inf}"
                    )));
                }
            }
            RhoVariant::CoercivePower { rho0, s } => {
                if !(*rho0 > 0.0) || !(*s > 0.0) {
                    return Err(CoreError::BadChargeDensity(format!(
                        "coercive power needs rho0 > 0 and s > 0, got rho0 = {rho0}, s = {s}"
                    )));
                }
            }
            RhoVariant::BumpedConstant { rho_inf, a, sigma, .. } => {
                if !(*a > 0.0 && *a < *rho_inf) {
                    return Err(CoreError::BadChargeDensity(format!(
                        "bump depth must satisfy 0 < a < rho_inf, got a = {a}, rho_inf = {rho_inf}"
                    )));
                }
                if !(*sigma > 0.0) {
                    return Err(CoreError::BadChargeDensity(format!(
                        "bump width must be positive, got {sigma}"
                    )));
                }
            }
            RhoVariant::ExpCoercive { rho0, beta, alpha } => {
                if !(*rho0 > 0.0) || !(*beta > 0.0) || !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(CoreError::BadChargeDensity(format!(
                        "exp-coercive needs rho0 > 0, beta > 0, alpha in (0,1], got rho0 = {rho0}, beta = {beta}, alpha = {alpha}"
                    )));
                }
            }
        }
        Ok(ChargeDensity { variant, k })
    }

    pub fn constant(rho_inf: f64) -> Self {
        ChargeDensity::new(RhoVariant::Constant { rho_inf }, 0.0).expect("valid")
    }

    pub fn variant(&self) -> &RhoVariant {
        &self.variant
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.k = k;
        self
    }

    /// `k` is admissible for exponent `p in (2,3)` iff `k > -2(p-2)/(p-1)`.
    pub fn check_k_admissible(&self, p: f64) -> Result<()> {
        if p > 2.0 && p < 3.0 {
            let threshold = -2.0 * (p - 2.0) / (p - 1.0);
            if self.k <= threshold {
                return Err(CoreError::InadmissibleK {
                    k: self.k,
                    p,
                    threshold,
                });
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: [f64; 3]) -> f64 {
        match &self.variant {
            RhoVariant::Constant { rho_inf } => *rho_inf,
            RhoVariant::CoercivePower { rho0, s } => {
                let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
                rho0 * (1.0 + r2).powf(s / 2.0)
            }
            RhoVariant::BumpedConstant {
                rho_inf,
                a,
                sigma,
                xb,
            } => {
                let d2 = (x[0] - xb[0]).powi(2) + (x[1] - xb[1]).powi(2) + (x[2] - xb[2]).powi(2);
                rho_inf - a * (-d2 / (sigma * sigma)).exp()
            }
            RhoVariant::ExpCoercive { rho0, beta, alpha } => {
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                rho0 * (beta * (1.0 + r).powf(*alpha)).exp()
            }
        }
    }

    pub fn grad(&self, x: [f64; 3]) -> [f64; 3] {
        match &self.variant {
            RhoVariant::Constant { .. } => [0.0; 3],
            RhoVariant::CoercivePower { rho0, s } => {
                let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
                let c = rho0 * s * (1.0 + r2).powf(s / 2.0 - 1.0);
                [c * x[0], c * x[1], c * x[2]]
            }
            RhoVariant::BumpedConstant { a, sigma, xb, .. } => {
                let d = [x[0] - xb[0], x[1] - xb[1], x[2] - xb[2]];
                let d2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                let s2 = sigma * sigma;
                let c = (2.0 * a / s2) * (-d2 / s2).exp();
                [c * d[0], c * d[1], c * d[2]]
            }
            RhoVariant::ExpCoercive { rho0, beta, alpha } => {
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                if r == 0.0 {
                    return [0.0; 3];
                }
                let v = rho0 * (beta * (1.0 + r).powf(*alpha)).exp();
                let c = v * beta * alpha * (1.0 + r).powf(alpha - 1.0) / r;
                [c * x[0], c * x[1], c * x[2]]
            }
        }
    }

    /// Limit at infinity and the decay constants of the far-field estimates.
    pub fn metadata(&self) -> RhoMetadata {
        match &self.variant {
            RhoVariant::Constant { rho_inf } => RhoMetadata {
                rho_inf: Some(*rho_inf),
                decay: DecayConstants {
                    a_const: *rho_inf,
                    alpha: 0.5,
                    beta: 0.0,
                },
            },
            RhoVariant::BumpedConstant { rho_inf, .. } => RhoMetadata {
                rho_inf: Some(*rho_inf),
                decay: DecayConstants {
                    a_const: *rho_inf,
                    alpha: 0.5,
                    beta: 0.0,
                },
            },
            RhoVariant::CoercivePower { rho0, s } => RhoMetadata {
                rho_inf: None,
                decay: DecayConstants {
                    // rho |x|^{1-2 alpha} -> rho0 with alpha = (s+1)/2
                    a_const: *rho0,
                    alpha: (s + 1.0) / 2.0,
                    beta: 0.0,
                },
            },
            RhoVariant::ExpCoercive { beta, alpha, .. } => RhoMetadata {
                rho_inf: None,
                // any A with beta < 2 sqrt(A) works for the coercive lower
                // bound; A = beta^2 makes rho u^2 = O(e^{-beta (1+r)^alpha})
                decay: DecayConstants {
                    a_const: beta * beta,
                    alpha: *alpha,
                    beta: *beta,
                },
            },
        }
    }

    /// Exponential growth rate `b` of `|grad rho| = O(|x|^a e^{b|x|})`;
    /// zero for all subexponential families.
    pub fn grad_growth_rate(&self) -> f64 {
        match &self.variant {
            RhoVariant::ExpCoercive { beta, alpha, .. } => {
                if *alpha == 1.0 {
                    *beta
                } else {
                    0.0
                }
            }
            _ => 0.0,
        }
    }
}

impl fmt::Display for ChargeDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.variant {
            RhoVariant::Constant { rho_inf } => write!(f, "constant(rho_inf={rho_inf})")?,
            RhoVariant::CoercivePower { rho0, s } => {
                write!(f, "coercive_power(rho0={rho0}, s={s})")?
            }
            RhoVariant::BumpedConstant {
                rho_inf,
                a,
                sigma,
                xb,
            } => write!(
                f,
                "bumped_constant(rho_inf={rho_inf}, a={a}, sigma={sigma}, xb=[{},{},{}])",
                xb[0], xb[1], xb[2]
            )?,
            RhoVariant::ExpCoercive { rho0, beta, alpha } => {
                write!(f, "exp_coercive(rho0={rho0}, beta={beta}, alpha={alpha})")?
            }
        }
        write!(f, ", k={}", self.k)
    }
}

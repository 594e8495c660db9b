//! Model parameters and the dimensionless quantities derived from them.
//!
//! The insurer's capital follows
//!
//! ```text
//! dX_t = (c + a_k X_t) dt + s_k X_t dW_t - dZ_t,
//! a_k = r + kappa (a - r),   s_k = kappa sigma,
//! ```
//!
//! where a constant fraction `kappa` of capital is held in a risky asset
//! (drift `a`, volatility `sigma`) and the rest earns the riskless rate `r`.
//! Claims arrive as a compound Poisson process `Z` with rate `lambda` and
//! exponential(`mu`) claim sizes; premiums accrue at rate `c`.
//!
//! All of the analysis runs on three dimensionless ratios:
//! `gamma = 2 a_k / s_k^2`, `beta = 2 c / s_k^2`, `nu = 2 lambda / s_k^2`.
//! Survival is nondegenerate precisely when `gamma > 1`, and `gamma - 1` is
//! the power-law decay order of the ruin probability.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Primitive model inputs. Construct with [`ModelParams::new`] or parse with
/// [`ModelParams::from_json_str`]; both enforce the constraints documented
/// per field, so a value of this type is always usable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Claim arrival intensity of the Poisson process. Must be > 0.
    pub lambda: f64,
    /// Rate of the exponential claim-size law (mean claim = 1/mu). Must be > 0.
    pub mu: f64,
    /// Premium income rate. Must be > 0.
    pub c: f64,
    /// Riskless interest rate. Any finite value.
    pub r: f64,
    /// Drift of the risky asset. Any finite value.
    pub a: f64,
    /// Volatility of the risky asset. Must be > 0.
    pub sigma: f64,
    /// Fraction of capital invested in the risky asset. Must lie in (0, 1];
    /// kappa = 0 (no investment at all) degenerates the diffusion and is
    /// rejected: the no-investment model is a different, first-order problem.
    pub kappa: f64,
}

/// Dimensionless quantities the solver actually works with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// Portfolio drift a_k = r + kappa (a - r).
    pub a_kappa: f64,
    /// Portfolio volatility s_k = kappa sigma.
    pub sigma_kappa: f64,
    /// gamma = 2 a_k / s_k^2; tail decay order of ruin is gamma - 1.
    pub gamma: f64,
    /// beta = 2 c / s_k^2.
    pub beta: f64,
    /// nu = 2 lambda / s_k^2.
    pub nu: f64,
}

/// Coefficients of the doubly confluent Heun form of the density equation.
///
/// In the variable `zeta = -mu u` the survival density satisfies
/// `zeta^2 y'' + (-zeta^2 + c_h zeta + d_h) y' + (-b_h zeta + a_h) y = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeunParams {
    /// a_h = mu beta + gamma - nu.
    pub a_h: f64,
    /// b_h = gamma.
    pub b_h: f64,
    /// c_h = gamma + 2.
    pub c_h: f64,
    /// d_h = -mu beta; always < 0 for valid model parameters.
    pub d_h: f64,
}

fn require(ok: bool, name: &'static str, value: f64, constraint: &'static str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            constraint,
        })
    }
}

impl ModelParams {
    pub fn new(
        lambda: f64,
        mu: f64,
        c: f64,
        r: f64,
        a: f64,
        sigma: f64,
        kappa: f64,
    ) -> Result<Self> {
        let p = ModelParams {
            lambda,
            mu,
            c,
            r,
            a,
            sigma,
            kappa,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        require(
            self.lambda.is_finite() && self.lambda > 0.0,
            "lambda",
            self.lambda,
            "must be finite and > 0",
        )?;
        require(
            self.mu.is_finite() && self.mu > 0.0,
            "mu",
            self.mu,
            "must be finite and > 0",
        )?;
        require(
            self.c.is_finite() && self.c > 0.0,
            "c",
            self.c,
            "must be finite and > 0",
        )?;
        require(self.r.is_finite(), "r", self.r, "must be finite")?;
        require(self.a.is_finite(), "a", self.a, "must be finite")?;
        require(
            self.sigma.is_finite() && self.sigma > 0.0,
            "sigma",
            self.sigma,
            "must be finite and > 0",
        )?;
        require(
            self.kappa.is_finite() && self.kappa > 0.0 && self.kappa <= 1.0,
            "kappa",
            self.kappa,
            "must lie in (0, 1]",
        )?;
        Ok(())
    }

    /// Parse from a flat JSON object holding exactly the seven field names.
    /// Unknown or missing keys are an error, as is any constraint violation.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let p: ModelParams = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    /// Same model with the investment fraction replaced (re-validated).
    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        let mut p = *self;
        p.kappa = kappa;
        p.validate()?;
        Ok(p)
    }

    pub fn derive(&self) -> DerivedParams {
        // r (1 - kappa) + kappa a rather than r + kappa (a - r): equivalent in
        // exact arithmetic, and at kappa = 1 it yields `a` bitwise.
        let a_kappa = self.r * (1.0 - self.kappa) + self.kappa * self.a;
        let sigma_kappa = self.kappa * self.sigma;
        let s2 = sigma_kappa * sigma_kappa;
        DerivedParams {
            a_kappa,
            sigma_kappa,
            gamma: 2.0 * a_kappa / s2,
            beta: 2.0 * self.c / s2,
            nu: 2.0 * self.lambda / s2,
        }
    }

    pub fn heun_params(&self) -> HeunParams {
        self.derive().heun(self.mu)
    }
}

impl DerivedParams {
    /// Survival is nondegenerate only for gamma > 1; otherwise the
    /// investment risk overwhelms the drift and ruin is certain.
    pub fn check_nondegeneracy(&self) -> Result<()> {
        if self.gamma > 1.0 {
            Ok(())
        } else {
            Err(Error::DegenerateModel { gamma: self.gamma })
        }
    }

    pub fn heun(&self, mu: f64) -> HeunParams {
        let mu_beta = mu * self.beta;
        HeunParams {
            a_h: mu_beta + (self.gamma - self.nu),
            b_h: self.gamma,
            c_h: self.gamma + 2.0,
            d_h: -mu_beta,
        }
    }
}

/// gamma as a function of the investment fraction, holding the rest of the
/// model fixed. Routed through [`ModelParams::derive`] so equal inputs give
/// bitwise-equal results.
pub fn gamma_of_kappa(base: &ModelParams, kappa: f64) -> Result<f64> {
    Ok(base.with_kappa(kappa)?.derive().gamma)
}

//! Formal power-series representation of the regular density branch near 0.
//!
//! Writing the survival density as H(u) = sum_k f_k zeta^k in zeta = -mu u,
//! the Heun-form equation forces the three-term recurrence
//!
//! ```text
//! d_h (k+1) f_{k+1} + [k (k + c_h - 1) + a_h] f_k - (k - 1 + b_h) f_{k-1} = 0,
//! f_{-1} = 0, f_0 = 1.
//! ```
//!
//! The series has zero radius of convergence (u = 0 is an irregular singular
//! point), but it is asymptotic: truncating at the smallest-magnitude term
//! gives an approximation whose error is bounded by the first omitted term.
//! For u0 of order 1e-2/mu that error sits far below f64 resolution, which is
//! what makes the series usable as an integration seed.

use crate::error::{Error, Result};
use crate::params::HeunParams;

/// Hard cap on recurrence depth; the optimal truncation index for any seed
/// point we accept is far below this.
const K_CAP: usize = 200_000;

/// Smallest admissible seed point, as a multiple of 1/mu.
const U0_FLOOR: f64 = 1e-12;

/// Largest admissible seed point, as a multiple of 1/mu.
const U0_CEIL: f64 = 1e-2;

/// Coefficients f_0 ..= f_k_max of the formal series, by direct forward
/// recurrence. Stops early if a coefficient overflows f64.
pub fn recurrence_coeffs(heun: &HeunParams, k_max: usize) -> Result<Vec<f64>> {
    if heun.d_h == 0.0 || !heun.d_h.is_finite() {
        return Err(Error::InvalidParameter {
            name: "d_h",
            value: heun.d_h,
            constraint: "must be finite and nonzero for the series recurrence",
        });
    }
    let mut f = Vec::with_capacity(k_max + 1);
    f.push(1.0);
    let mut f_km1 = 0.0; // f_{-1}
    let mut f_k = 1.0;
    for k in 0..k_max {
        let kf = k as f64;
        let f_kp1 = ((kf - 1.0 + heun.b_h) * f_km1 - (kf * (kf + heun.c_h - 1.0) + heun.a_h) * f_k)
            / (heun.d_h * (kf + 1.0));
        if !f_kp1.is_finite() {
            break;
        }
        f.push(f_kp1);
        f_km1 = f_k;
        f_k = f_kp1;
    }
    Ok(f)
}

/// The series truncated at its optimal index for a fixed seed point `u0`,
/// together with the data needed to evaluate H, H' and the primitive of H
/// anywhere in [0, u0].
#[derive(Debug, Clone)]
pub struct SeriesExpansion {
    pub heun: HeunParams,
    pub mu: f64,
    /// Seed point: evaluations are trusted on [0, u0] only.
    pub u0: f64,
    /// Retained coefficients f_0 ..= f_{k_used}.
    pub coeffs: Vec<f64>,
    /// Index of the last retained term.
    pub k_used: usize,
    /// First omitted coefficient, for error estimates at u <= u0.
    omitted: f64,
    /// |first omitted term| at u0: the optimal-truncation error bound there.
    pub err_est: f64,
    /// H(u0).
    pub h0: f64,
    /// H'(u0).
    pub hp0: f64,
}

/// Build the truncated series at `u0`, requiring the optimal-truncation error
/// to be at most `rel_budget * |H(u0)|`.
pub fn seed_at(heun: &HeunParams, mu: f64, u0: f64, rel_budget: f64) -> Result<SeriesExpansion> {
    if !(u0 > 0.0) || !u0.is_finite() {
        return Err(Error::InvalidParameter {
            name: "u0",
            value: u0,
            constraint: "seed point must be finite and > 0",
        });
    }
    if heun.d_h == 0.0 || !heun.d_h.is_finite() {
        return Err(Error::InvalidParameter {
            name: "d_h",
            value: heun.d_h,
            constraint: "must be finite and nonzero for the series recurrence",
        });
    }
    let zeta = -mu * u0;

    // Walk the recurrence, accumulating terms until their magnitude turns
    // upward (the asymptotic-series minimum) or underflows to zero.
    let mut coeffs = vec![1.0];
    let mut f_km1 = 0.0;
    let mut f_k = 1.0f64;
    let mut zeta_pow = 1.0; // zeta^k
    let mut term_prev = 1.0f64; // |f_k zeta^k|
    let mut grew = 0u32;
    let mut k_stop = None;
    let mut omitted = 0.0;
    for k in 0..K_CAP {
        let kf = k as f64;
        let f_kp1 = ((kf - 1.0 + heun.b_h) * f_km1 - (kf * (kf + heun.c_h - 1.0) + heun.a_h) * f_k)
            / (heun.d_h * (kf + 1.0));
        zeta_pow *= zeta;
        let term = (f_kp1 * zeta_pow).abs();
        if term == 0.0 || !f_kp1.is_finite() {
            // Underflow: the remainder is below anything representable.
            omitted = if f_kp1.is_finite() { f_kp1 } else { 0.0 };
            k_stop = Some(k + 1);
            break;
        }
        if term > term_prev {
            grew += 1;
            if grew >= 2 {
                // Two consecutive growing terms: the minimum is behind us.
                // Drop the first grower (already pushed) and truncate ahead
                // of it; that popped coefficient is the first omitted one.
                omitted = coeffs.pop().expect("at least f_0 present");
                k_stop = Some(k + 1);
                break;
            }
        } else {
            grew = 0;
        }
        coeffs.push(f_kp1);
        f_km1 = f_k;
        f_k = f_kp1;
        term_prev = term;
    }
    let _k_first_omitted = match k_stop {
        Some(k) => k,
        None => {
            return Err(Error::SeedDiverged {
                u0,
                err_est: term_prev,
                budget: rel_budget,
            })
        }
    };
    let k_used = coeffs.len() - 1;
    let err_est = (omitted * zeta.powi(k_used as i32 + 1))
        .abs()
        .max(f64::MIN_POSITIVE);

    let mut s = SeriesExpansion {
        heun: *heun,
        mu,
        u0,
        coeffs,
        k_used,
        omitted,
        err_est,
        h0: 0.0,
        hp0: 0.0,
    };
    let (h0, hp0) = s.eval(u0)?;
    s.h0 = h0;
    s.hp0 = hp0;
    if !(s.err_est <= rel_budget * h0.abs()) || !h0.is_finite() {
        return Err(Error::SeedDiverged {
            u0,
            err_est: s.err_est,
            budget: rel_budget * h0.abs(),
        });
    }
    Ok(s)
}

/// Pick the seed point automatically: the largest u0 <= 1e-2/mu (halving from
/// there) whose optimal-truncation error is below `rel_budget * |H(u0)|`.
pub fn choose_seed(heun: &HeunParams, mu: f64, rel_budget: f64) -> Result<SeriesExpansion> {
    let mut u0 = U0_CEIL / mu;
    let floor = U0_FLOOR / mu;
    let mut last_err = None;
    while u0 > floor {
        match seed_at(heun, mu, u0, rel_budget) {
            Ok(s) => return Ok(s),
            Err(e @ Error::SeedDiverged { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
        u0 *= 0.5;
    }
    Err(last_err.unwrap_or(Error::SeedDiverged {
        u0,
        err_est: f64::INFINITY,
        budget: rel_budget,
    }))
}

impl SeriesExpansion {
    /// H(u) and H'(u) from the frozen truncation. Only valid on [0, u0].
    pub fn eval(&self, u: f64) -> Result<(f64, f64)> {
        self.check_range(u)?;
        Ok(self.eval_raw(u))
    }

    /// [`Self::eval`] without the domain gate. The truncation remains a
    /// usable asymptotic approximant somewhat beyond u0, with [`Self::err_at`]
    /// quantifying how fast it degrades; consistency checks compare it
    /// against the integrated branch at 2 u0. Production evaluation stays
    /// inside [0, u0].
    pub fn eval_raw(&self, u: f64) -> (f64, f64) {
        let zeta = -self.mu * u;
        // Horner over the truncated polynomial in zeta; derivative alongside.
        // dH/du = -mu * d/dzeta [sum f_k zeta^k].
        let mut p = 0.0f64;
        let mut dp = 0.0f64;
        for &fk in self.coeffs.iter().rev() {
            dp = dp * zeta + p;
            p = p * zeta + fk;
        }
        (p, -self.mu * dp)
    }

    /// Optimal-truncation error bound at u <= u0 (first omitted term).
    pub fn err_at(&self, u: f64) -> f64 {
        let zeta = -self.mu * u;
        (self.omitted * zeta.powi(self.k_used as i32 + 1))
            .abs()
            .max(f64::MIN_POSITIVE)
    }

    /// Termwise primitive: integral of H over [0, u], u <= u0.
    /// int_0^u zeta^k dv = u zeta^k / (k+1), so the sum is u * sum f_k zeta^k / (k+1).
    pub fn integral(&self, u: f64) -> Result<f64> {
        self.check_range(u)?;
        let zeta = -self.mu * u;
        let mut acc = 0.0f64;
        for (k, &fk) in self.coeffs.iter().enumerate().rev() {
            acc = acc * zeta + fk / (k as f64 + 1.0);
        }
        Ok(u * acc)
    }

    fn check_range(&self, u: f64) -> Result<()> {
        if u.is_finite() && (0.0..=self.u0).contains(&u) {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                u,
                lo: 0.0,
                hi: self.u0,
            })
        }
    }
}

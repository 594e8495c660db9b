//! Normalization of the density into the survival probability Phi and ruin
//! probability Psi, plus the integro-differential residual validator.
//!
//! With H the regular density branch scaled to H(0) = 1, the survival
//! probability is Phi(u) = C (c/lambda + int_0^u H) where
//! C = (c/lambda + int_0^infty H)^{-1}. The infinite integral splits into the
//! series segment [0, u0], grid quadrature over [u0, u_max], and the analytic
//! remainder of the fitted power tail beyond u_max. Psi is assembled from the
//! suffix side of the same panel sums, so deep-tail values never suffer the
//! cancellation of forming 1 - Phi explicitly.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::density::DensityGrid;
use crate::error::{Error, Result};
use crate::params::{DerivedParams, HeunParams, ModelParams};
use crate::quad::adaptive_gk;
use crate::tail::{self, TailFit, MIN_FIT_NODES, WINDOW_RATIO};

/// Pipeline knobs for [`solve`]. `Default` gives the standard configuration;
/// unset optional fields are chosen automatically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Relative tolerance of the density integration.
    pub tol: f64,
    /// Grid endpoint. None: start from the fit-window requirement and let the
    /// remainder check extend. Pinning it disables automatic extension.
    pub u_max: Option<f64>,
    /// Cap on (tail remainder) / (c/lambda + quadrature) in the normalization.
    pub remainder_cap: f64,
    /// Tail-fit window. None: [`tail::default_fit_window`].
    pub fit_window: Option<(f64, f64)>,
    /// Cap on the tail-fit plateau spread.
    pub spread_cap: f64,
    /// Allow growing u_max when the fit or the remainder check demands it.
    pub auto_extend: bool,
    /// Budget of u_max extensions.
    pub max_extensions: u32,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            u_max: None,
            remainder_cap: 1e-6,
            fit_window: None,
            spread_cap: 0.01,
            auto_extend: true,
            max_extensions: 8,
        }
    }
}

/// Normalized solution: immutable after assembly; all evaluators are pure.
#[derive(Debug, Clone)]
pub struct SurvivalSolution {
    pub params: ModelParams,
    pub derived: DerivedParams,
    pub heun: HeunParams,
    pub grid: DensityGrid,
    pub tail: TailFit,
    /// Normalization constant C = (c/lambda + int_0^infty H)^{-1}.
    pub c_norm: f64,
    /// Phi(0) = C c / lambda.
    pub phi0: f64,
    /// Analytic integral of the fitted tail over [u_max, infinity).
    pub remainder: f64,
    /// remainder / (c/lambda + quadrature): the share of 1/C taken on trust
    /// from the tail fit.
    pub remainder_ratio: f64,
}

/// Run the full pipeline: integrate the density, fit the tail plateau, and
/// normalize. With automatic extension enabled (and u_max not pinned), a
/// failed plateau pushes the window right and a failed remainder check grows
/// u_max by the power-law-predicted factor.
pub fn solve(params: &ModelParams, opts: &SolveOptions) -> Result<SurvivalSolution> {
    params.validate()?;
    validate_opts(opts)?;
    let derived = params.derive();
    derived.check_nondegeneracy()?;
    let mu = params.mu;

    let u_max0 = match (opts.u_max, opts.fit_window) {
        (Some(v), _) => v,
        (None, Some((_, hi))) => hi / 0.9,
        (None, None) => {
            let (lo, _) = tail::default_fit_window(&derived, mu, f64::INFINITY, opts.spread_cap);
            lo * WINDOW_RATIO / 0.9
        }
    };

    let mut grid = DensityGrid::integrate(params, u_max0, opts.tol)?;
    let mut extensions_left = opts.max_extensions;
    let mut lo_boost = 1.0f64;
    let may_extend = opts.auto_extend && opts.u_max.is_none();
    let base = params.c / params.lambda;

    loop {
        let window = match opts.fit_window {
            Some(w) => w,
            None => {
                let (lo, _) = tail::default_fit_window(&derived, mu, grid.u_max(), opts.spread_cap);
                let lo = lo * lo_boost;
                (lo, (WINDOW_RATIO * lo).min(0.9 * grid.u_max()))
            }
        };
        if !(window.0 < window.1) {
            return Err(Error::WindowTooNarrow {
                u_lo: window.0,
                u_hi: window.1,
                n: 0,
                need: MIN_FIT_NODES,
            });
        }

        let fit = match tail::fit_k1(&grid, window.0, window.1, opts.spread_cap) {
            Ok(f) => f,
            Err(e @ (Error::PlateauNotReached { .. } | Error::WindowTooNarrow { .. }))
                if opts.fit_window.is_none() && may_extend && extensions_left > 0 =>
            {
                extensions_left -= 1;
                if matches!(e, Error::PlateauNotReached { .. }) {
                    lo_boost *= 2.0;
                }
                let (lo, _) = tail::default_fit_window(&derived, mu, grid.u_max(), opts.spread_cap);
                let need = lo * lo_boost * WINDOW_RATIO / 0.9;
                let new_u_max = need.max(1.5 * grid.u_max());
                if new_u_max > 1e12 {
                    return Err(e);
                }
                grid.extend(new_u_max)?;
                continue;
            }
            Err(e) => return Err(e),
        };

        let remainder = tail::tail_remainder(&fit, grid.u_max());
        let quad = grid.series_integral() + grid.grid_integral();
        let ratio = remainder / (base + quad);
        if ratio > opts.remainder_cap {
            if may_extend && extensions_left > 0 {
                extensions_left -= 1;
                // Under Psi ~ u^{-(gamma-1)}, shrinking the remainder by
                // ratio/cap takes a factor (ratio/cap)^{1/(gamma-1)}; 1.5x
                // margin covers the fit constant drifting as u_max grows.
                let factor = ((ratio / opts.remainder_cap).powf(1.0 / (derived.gamma - 1.0)) * 1.5)
                    .clamp(2.0, 1e6);
                let new_u_max = grid.u_max() * factor;
                if !(new_u_max <= 1e12) {
                    return Err(Error::TailTooHeavy {
                        ratio,
                        cap: opts.remainder_cap,
                        u_max: grid.u_max(),
                    });
                }
                grid.extend(new_u_max)?;
                continue;
            }
            return Err(Error::TailTooHeavy {
                ratio,
                cap: opts.remainder_cap,
                u_max: grid.u_max(),
            });
        }

        return assemble(grid, fit, params, opts.remainder_cap);
    }
}

/// Normalize a density grid with its tail fit into a [`SurvivalSolution`].
/// Rejects mismatched inputs and remainder shares above `remainder_cap`.
pub fn assemble(
    grid: DensityGrid,
    fit: TailFit,
    params: &ModelParams,
    remainder_cap: f64,
) -> Result<SurvivalSolution> {
    let derived = params.derive();
    if fit.gamma.to_bits() != grid.derived.gamma.to_bits()
        || fit.mu.to_bits() != grid.mu.to_bits()
        || derived.gamma.to_bits() != grid.derived.gamma.to_bits()
    {
        return Err(Error::InvalidParameter {
            name: "tail_fit",
            value: fit.gamma,
            constraint: "fit, grid, and params must describe the same model",
        });
    }
    if fit.window.1 > grid.u_max() {
        return Err(Error::InvalidParameter {
            name: "fit_window",
            value: fit.window.1,
            constraint: "fit window must lie inside the integrated range",
        });
    }
    let base = params.c / params.lambda;
    let remainder = tail::tail_remainder(&fit, grid.u_max());
    let quad = grid.series_integral() + grid.grid_integral();
    let ratio = remainder / (base + quad);
    if ratio > remainder_cap {
        return Err(Error::TailTooHeavy {
            ratio,
            cap: remainder_cap,
            u_max: grid.u_max(),
        });
    }
    let c_norm = 1.0 / (base + quad + remainder);
    let phi0 = c_norm * base;
    debug_assert!(phi0 > 0.0 && phi0 < 1.0);
    let heun = grid.heun;
    Ok(SurvivalSolution {
        params: *params,
        derived: grid.derived,
        heun,
        grid,
        tail: fit,
        c_norm,
        phi0,
        remainder,
        remainder_ratio: ratio,
    })
}

impl SurvivalSolution {
    fn check_u(&self, u: f64) -> Result<()> {
        if u.is_finite() && u >= 0.0 {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                u,
                lo: 0.0,
                hi: f64::INFINITY,
            })
        }
    }

    /// Ruin-tail constant: Psi(u) ~ k_ruin u^{-(gamma-1)}.
    pub fn k_ruin(&self) -> f64 {
        self.c_norm * (self.tail.log_k1 - self.tail.gamma * self.params.mu.ln()).exp()
            / (self.tail.gamma - 1.0)
    }

    /// Unnormalized density H and H' at u >= 0 up to the grid endpoint:
    /// series representation left of the seed point, dense grid right of it.
    pub fn h_at(&self, u: f64) -> Result<(f64, f64)> {
        self.check_u(u)?;
        if u < self.grid.u0() {
            self.grid.series.eval(u)
        } else {
            self.grid.eval_h(u)
        }
    }

    /// int_0^u H, valid through the grid endpoint.
    fn int_h_raw(&self, u: f64) -> f64 {
        let g = &self.grid;
        if u < g.u0() {
            g.series.integral(u).expect("u inside the series range")
        } else {
            g.series_integral() + g.cum_integral(u).expect("u inside the grid range")
        }
    }

    fn phi_cum_raw(&self, u: f64) -> f64 {
        self.c_norm * (self.params.c / self.params.lambda + self.int_h_raw(u))
    }

    /// Survival probability through the cumulative integral,
    /// Phi(u) = C (c/lambda + int_0^u H). Algebraically equal to
    /// [`Self::phi`]; kept separate because it scales linearly with the
    /// normalization constant, which the residual validator relies on.
    pub fn phi_cum(&self, u: f64) -> Result<f64> {
        self.check_u(u)?;
        if u > self.grid.u_max() {
            return Err(Error::OutOfRange {
                u,
                lo: 0.0,
                hi: self.grid.u_max(),
            });
        }
        Ok(self.phi_cum_raw(u))
    }

    /// Ruin probability Psi(u), u >= 0. Inside the grid this is
    /// C (int_u^{u_max} H + remainder) via suffix sums; beyond u_max the
    /// fitted power law takes over (continuously).
    pub fn psi(&self, u: f64) -> Result<f64> {
        self.check_u(u)?;
        let g = &self.grid;
        if u >= g.u_max() {
            return Ok(tail::psi_tail(&self.tail, self.c_norm, u));
        }
        let tail_part = if u >= g.u0() {
            g.tail_integral(u).expect("u inside the grid range")
        } else {
            let series_rest = g.series_integral() - g.series.integral(u).expect("u below u0");
            series_rest + g.grid_integral()
        };
        Ok(self.c_norm * (tail_part + self.remainder))
    }

    /// Survival probability Phi(u) = 1 - Psi(u), u >= 0.
    pub fn phi(&self, u: f64) -> Result<f64> {
        Ok(1.0 - self.psi(u)?)
    }

    /// Signed residual of the integro-differential balance equation
    ///
    /// ```text
    /// 1/2 sigma_k^2 u^2 Phi'' + (a_k u + c) Phi'
    ///     - lambda e^{-mu u} Phi(u)
    ///     + lambda int_0^u (Phi(z) - Phi(u)) mu e^{-mu(u-z)} dz
    /// ```
    ///
    /// at u in [0, u_max], with Phi' = C H, Phi'' = C H', and the convolution
    /// integrated adaptively to absolute tolerance `qtol`. Zero for the exact
    /// solution up to the combined tolerance budget. Every Phi term goes
    /// through the cumulative representation, so the residual is homogeneous
    /// in C: it validates that H solves the equation, while mis-normalization
    /// must be caught by the Monte Carlo comparison instead.
    pub fn ide_residual(&self, u: f64, qtol: f64) -> Result<f64> {
        let (h, hp) = self.h_at(u)?;
        self.ide_residual_inner(
            u,
            qtol,
            &|z| self.phi_cum_raw(z),
            self.c_norm * h,
            self.c_norm * hp,
        )
    }

    /// [`Self::ide_residual`] divided by the natural drift scale
    /// max(1, a_k u + c).
    pub fn ide_residual_scaled(&self, u: f64, qtol: f64) -> Result<f64> {
        let scale = (self.derived.a_kappa * u + self.params.c).max(1.0);
        Ok(self.ide_residual(u, qtol)? / scale)
    }

    fn ide_residual_inner(
        &self,
        u: f64,
        qtol: f64,
        phi: &dyn Fn(f64) -> f64,
        dphi: f64,
        d2phi: f64,
    ) -> Result<f64> {
        let p = &self.params;
        let d = &self.derived;
        let phi_u = phi(u);
        let conv = if u > 0.0 {
            let f = |z: f64| (phi(z) - phi_u) * p.mu * (-p.mu * (u - z)).exp();
            adaptive_gk(f, 0.0, u, qtol, 50_000)?.0
        } else {
            0.0
        };
        Ok(
            0.5 * d.sigma_kappa * d.sigma_kappa * u * u * d2phi + (d.a_kappa * u + p.c) * dphi
                - p.lambda * phi_u * (-p.mu * u).exp()
                + p.lambda * conv,
        )
    }

    /// Residual of the perturbed candidate Phi + eps u/(1+u): a sensitivity
    /// probe showing the residual responds linearly to solution errors.
    #[doc(hidden)]
    pub fn ide_residual_perturbed(&self, u: f64, qtol: f64, eps: f64) -> Result<f64> {
        let (h, hp) = self.h_at(u)?;
        let opu = 1.0 + u;
        self.ide_residual_inner(
            u,
            qtol,
            &|z| self.phi_cum_raw(z) + eps * z / (1.0 + z),
            self.c_norm * h + eps / (opu * opu),
            self.c_norm * hp - 2.0 * eps / (opu * opu * opu),
        )
    }

    /// Test hook: multiply the normalization constant by `factor`. Used to
    /// prove that the Monte Carlo comparison catches a mis-normalized C that
    /// the (C-homogeneous) residual validator cannot see.
    #[doc(hidden)]
    pub fn scale_normalization(&mut self, factor: f64) {
        self.c_norm *= factor;
        self.phi0 *= factor;
    }

    /// Probe table as CSV: u, Phi, Psi per row.
    pub fn write_probe_csv<W: Write>(&self, w: &mut W, probes: &[f64]) -> Result<()> {
        writeln!(w, "u,phi,psi")?;
        for &u in probes {
            let psi = self.psi(u)?;
            writeln!(w, "{:e},{:e},{:e}", u, 1.0 - psi, psi)?;
        }
        Ok(())
    }
}

/// n probes evenly spaced over [lo, hi] (n >= 2), endpoints included.
pub fn linear_probes(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && hi > lo && n >= 2) {
        return Err(Error::InvalidParameter {
            name: "probes",
            value: lo,
            constraint: "need finite lo < hi and n >= 2",
        });
    }
    let step = (hi - lo) / (n - 1) as f64;
    // Last point pinned so the endpoint is exact, not a rounding neighbour.
    Ok((0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect())
}

/// n probes log-spaced over [lo, hi] (lo > 0, n >= 2), endpoints included.
pub fn log_probes(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi.is_finite() && hi > lo && n >= 2) {
        return Err(Error::InvalidParameter {
            name: "probes",
            value: lo,
            constraint: "need 0 < lo < hi and n >= 2",
        });
    }
    let lr = (hi / lo).ln() / (n - 1) as f64;
    Ok((0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo * (lr * i as f64).exp()
            }
        })
        .collect())
}

fn validate_opts(opts: &SolveOptions) -> Result<()> {
    if !(opts.remainder_cap > 0.0 && opts.remainder_cap < 1.0) {
        return Err(Error::InvalidParameter {
            name: "remainder_cap",
            value: opts.remainder_cap,
            constraint: "must lie in (0, 1)",
        });
    }
    if !(opts.spread_cap > 0.0 && opts.spread_cap <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "spread_cap",
            value: opts.spread_cap,
            constraint: "must lie in (0, 1]",
        });
    }
    if let Some(u_max) = opts.u_max {
        if !(u_max.is_finite() && u_max > 0.0) {
            return Err(Error::InvalidParameter {
                name: "u_max",
                value: u_max,
                constraint: "must be finite and positive",
            });
        }
    }
    if let Some((lo, hi)) = opts.fit_window {
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
            return Err(Error::InvalidParameter {
                name: "fit_window",
                value: lo,
                constraint: "window must satisfy 0 < u_lo < u_hi, both finite",
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn baseline(kappa: f64) -> ModelParams {
        ModelParams::new(1.0, 1.0, 0.5, 0.05, 0.15, 0.4, kappa).unwrap()
    }

    fn quick_opts() -> SolveOptions {
        SolveOptions {
            tol: 1e-8,
            ..SolveOptions::default()
        }
    }

    // 1. Normalization algebra: C (c/lambda + Q + R) = 1, phi0 = C c/lambda,
    // and the boundary identity c C H(0) = lambda Phi(0) to machine precision.
    #[test]
    fn normalization_algebra() {
        let p = baseline(0.4);
        let sol = solve(&p, &quick_opts()).unwrap();
        let inv =
            p.c / p.lambda + sol.grid.series_integral() + sol.grid.grid_integral() + sol.remainder;
        assert!((sol.c_norm * inv - 1.0).abs() <= 1e-14);
        assert!((sol.phi0 - sol.c_norm * p.c / p.lambda).abs() <= 1e-16);
        assert!(sol.phi0 > 0.0 && sol.phi0 < 1.0);
        let phi0 = sol.phi(0.0).unwrap();
        let lhs = p.c * sol.c_norm; // c Phi'(0), H(0) = 1
        assert!(
            (lhs - p.lambda * phi0).abs() <= 1e-13 * p.lambda * phi0,
            "boundary identity off: {lhs} vs {}",
            p.lambda * phi0
        );
        assert!(sol.remainder_ratio <= 1e-6);
    }

    // 2. No claims in the limit: lambda -> 0 sends C -> lambda/c and phi0 -> 1.
    #[test]
    fn lambda_to_zero_certain_survival() {
        let p = ModelParams::new(1e-8, 1.0, 0.5, 0.05, 0.15, 0.4, 0.4).unwrap();
        let sol = solve(&p, &quick_opts()).unwrap();
        assert!((sol.c_norm * p.c / p.lambda - 1.0).abs() <= 1e-5);
        assert!(sol.phi0 > 1.0 - 1e-5);
    }

    // 3. Psi is nonincreasing, Phi nondecreasing, both in [0, 1], and
    // phi + psi = 1, across all four evaluation branches (series region,
    // grid, endpoint, fitted tail).
    #[test]
    fn monotone_and_in_range() {
        let p = baseline(0.4);
        let sol = solve(&p, &quick_opts()).unwrap();
        let u_max = sol.grid.u_max();
        let mut probes = vec![0.0, sol.grid.u0() * 0.5, sol.grid.u0()];
        probes.extend(log_probes(0.01, 2.0 * u_max, 400).unwrap());
        probes.push(u_max);
        probes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut last = f64::INFINITY;
        for &u in &probes {
            let psi = sol.psi(u).unwrap();
            let phi = sol.phi(u).unwrap();
            assert!((0.0..=1.0).contains(&psi), "psi({u}) = {psi}");
            assert!((phi + psi - 1.0).abs() <= 1e-15);
            assert!(phi >= sol.phi0 * (1.0 - 1e-12));
            assert!(
                psi <= last * (1.0 + 1e-12),
                "psi not monotone at u = {u}: {psi} > {last}"
            );
            last = psi;
        }
    }

    // 4. The evaluation branches agree at their seams (u0 and u_max). Psi
    // itself varies by about (gamma - 1) * 2e-9 relative across each probe
    // pair (its tail log-slope), so the tolerance allows that plus rounding.
    #[test]
    fn branch_continuity() {
        let p = baseline(0.4);
        let sol = solve(&p, &quick_opts()).unwrap();
        let slope_allowance = 3.0 * (sol.derived.gamma - 1.0) * 1e-9 + 1e-9;
        let u0 = sol.grid.u0();
        let um = sol.grid.u_max();
        for (a, b) in [
            (u0 * (1.0 - 1e-9), u0 * (1.0 + 1e-9)),
            (um * (1.0 - 1e-9), um * (1.0 + 1e-9)),
        ] {
            let pa = sol.psi(a).unwrap();
            let pb = sol.psi(b).unwrap();
            assert!(
                (pa - pb).abs() <= slope_allowance * pa.max(pb) + 1e-300,
                "seam {a}..{b}: {pa} vs {pb}"
            );
        }
    }

    // 5. phi and phi_cum are the same function within rounding wherever both
    // are defined (the dual representations of the normalization).
    #[test]
    fn phi_equals_phi_cum() {
        let p = baseline(0.4);
        let sol = solve(&p, &quick_opts()).unwrap();
        for &u in &[0.0, 0.005, 0.3, 1.0, 5.0, 50.0, 1000.0] {
            let a = sol.phi(u).unwrap();
            let b = sol.phi_cum(u).unwrap();
            assert!((a - b).abs() <= 1e-12, "u = {u}: {a} vs {b}");
        }
    }

    // 6. Residual validator: tiny on the exact solution, linear in a solution
    // perturbation, and vanishing at u -> 0+ (the boundary relation).
    #[test]
    fn ide_residual_behaviour() {
        let p = baseline(0.4);
        let sol = solve(&p, &quick_opts()).unwrap();
        for &u in &[0.1, 1.0, 7.0, 40.0] {
            let r = sol.ide_residual_scaled(u, 1e-9).unwrap();
            assert!(r.abs() <= 1e-6, "residual at {u}: {r:e}");
        }
        assert!(sol.ide_residual(0.0, 1e-9).unwrap().abs() <= 1e-13);
        assert!(sol.ide_residual(1e-9, 1e-9).unwrap().abs() <= 1e-10);
        // Linearity: eps and eps/10 perturbations differ 10x in residual.
        let u = 2.0;
        let r0 = sol.ide_residual(u, 1e-11).unwrap();
        let r1 = sol.ide_residual_perturbed(u, 1e-11, 1e-4).unwrap() - r0;
        let r2 = sol.ide_residual_perturbed(u, 1e-11, 1e-5).unwrap() - r0;
        assert!((r1 / r2 - 10.0).abs() <= 0.05, "ratio {}", r1 / r2);
    }

    // 7. Mis-normalization is invisible to the residual (homogeneity) but
    // shifts Phi(0) by the injected factor.
    #[test]
    fn residual_blind_to_normalization() {
        let p = baseline(0.4);
        let mut sol = solve(&p, &quick_opts()).unwrap();
        let before = sol.ide_residual_scaled(1.0, 1e-9).unwrap();
        let phi0_before = sol.phi(0.0).unwrap();
        sol.scale_normalization(1.01);
        let after = sol.ide_residual_scaled(1.0, 1e-9).unwrap();
        let phi0_after = sol.phi(0.0).unwrap();
        assert!((after - 1.01 * before).abs() <= 1e-8);
        assert!(after.abs() <= 1e-6, "scaled residual still passes: {after}");
        let shift = (phi0_before - phi0_after).abs();
        assert!(
            (shift - 0.01 * (1.0 - phi0_before)).abs() <= 1e-6,
            "phi(0) shift {shift}"
        );
    }

    // 8. Normalization stability: doubling u_max moves C by less than the
    // remainder cap (relative).
    #[test]
    fn normalization_stable_under_u_max() {
        let p = baseline(0.4);
        let sol1 = solve(&p, &quick_opts()).unwrap();
        let opts2 = SolveOptions {
            u_max: Some(2.0 * sol1.grid.u_max()),
            ..quick_opts()
        };
        let sol2 = solve(&p, &opts2).unwrap();
        assert!(
            ((sol1.c_norm - sol2.c_norm) / sol2.c_norm).abs() <= 1e-6,
            "C moved: {} vs {}",
            sol1.c_norm,
            sol2.c_norm
        );
    }

    // 9. Tail handoff: psi at and beyond u_max follows k_ruin u^{-(gamma-1)},
    // and the ratio psi/psi_tail stays within the fit spread inside the
    // window.
    #[test]
    fn tail_handoff() {
        let p = baseline(0.4);
        let sol = solve(&p, &quick_opts()).unwrap();
        let um = sol.grid.u_max();
        let k = sol.k_ruin();
        for &u in &[um, 2.0 * um, 10.0 * um] {
            let psi = sol.psi(u).unwrap();
            let law = k * u.powf(-(sol.derived.gamma - 1.0));
            assert!((psi - law).abs() <= 1e-10 * law, "u = {u}: {psi} vs {law}");
        }
        let (w_lo, w_hi) = sol.tail.window;
        for &u in &[w_lo, (w_lo * w_hi).sqrt(), w_hi] {
            let psi = sol.psi(u).unwrap();
            let law = k * u.powf(-(sol.derived.gamma - 1.0));
            let tol = 2.0 * sol.tail.rel_spread + 1e-6;
            assert!(
                (psi / law - 1.0).abs() <= tol,
                "u = {u}: ratio {} vs spread {}",
                psi / law,
                sol.tail.rel_spread
            );
        }
    }

    // 10. Pinned u_max too small for the tail: TailTooHeavy, no silent
    // extension; pinned window below the plateau: PlateauNotReached.
    #[test]
    fn pinned_settings_fail_honestly() {
        let p = baseline(0.9);
        let opts = SolveOptions {
            u_max: Some(500.0),
            ..quick_opts()
        };
        match solve(&p, &opts) {
            Err(Error::TailTooHeavy { ratio, cap, .. }) => assert!(ratio > cap),
            Err(Error::WindowTooNarrow { .. }) => {}
            other => panic!("expected a tail failure, got {other:?}"),
        }
        let p4 = baseline(0.4);
        let opts = SolveOptions {
            fit_window: Some((0.5, 5.0)),
            ..quick_opts()
        };
        match solve(&p4, &opts) {
            Err(Error::PlateauNotReached { rel_spread, .. }) => assert!(rel_spread > 0.01),
            other => panic!("expected PlateauNotReached, got {other:?}"),
        }
    }

    // 11. Probe helpers: endpoints included, spacing correct, bad input
    // rejected.
    #[test]
    fn probe_helpers() {
        let lin = linear_probes(1.0, 3.0, 5).unwrap();
        assert_eq!(lin, vec![1.0, 1.5, 2.0, 2.5, 3.0]);
        let lg = log_probes(1.0, 100.0, 3).unwrap();
        assert!((lg[1] - 10.0).abs() <= 1e-12);
        assert_eq!(lg.len(), 3);
        assert!(linear_probes(3.0, 1.0, 5).is_err());
        assert!(log_probes(0.0, 1.0, 5).is_err());
    }

    // 12. CSV export writes a header plus one row per probe.
    #[test]
    fn csv_export() {
        let p = baseline(0.4);
        let sol = solve(&p, &quick_opts()).unwrap();
        let mut buf = Vec::new();
        sol.write_probe_csv(&mut buf, &[0.0, 1.0, 10.0]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "u,phi,psi");
        assert!(lines[1].starts_with("0e0,"));
    }
}

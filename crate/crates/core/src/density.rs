//! The survival density branch H on a seeded adaptive grid.
//!
//! H solves, for u > 0,
//!
//! ```text
//! u^2 H'' + [mu u^2 + (gamma + 2) u + beta] H' + [mu gamma u + a_h] H = 0,
//! ```
//!
//! the u-space form of the doubly confluent Heun equation, with H(0) = 1 and
//! H'(0) = -a_h / beta. u = 0 is an irregular singular point, so integration
//! starts from a series seed at a small u0 > 0 and proceeds outward; forward
//! integration is stable because the power-law branch we want dominates both
//! the exp(beta/u) branch (decaying away from 0) and the e^{-mu u} branch in
//! the tail. Alongside the grid this module maintains per-step integrals of
//! H (5-point Gauss-Legendre on the dense output, which integrates the
//! quartic interpolant exactly), accumulated as prefix sums from u0 and as
//! suffix sums from u_max; the suffix form lets tail integrals of a rapidly
//! decaying H retain full relative accuracy instead of cancelling.

use std::io::Write;

use crate::dopri::{self, DenseStep, Options};
use crate::error::{Error, Result};
use crate::params::{DerivedParams, HeunParams, ModelParams};
use crate::quad::gauss5;
use crate::series::{choose_seed, SeriesExpansion};

/// Absolute tolerance floor: keeps error control relative even when H has
/// decayed to the bottom of the f64 range.
pub const ATOL_FLOOR: f64 = 1e-300;

/// Requested relative tolerances outside this range are either unattainable
/// in f64 or too loose to mean anything for this problem.
pub const TOL_RANGE: (f64, f64) = (1e-12, 1e-6);

/// Residual of the density equation at (u, g, g', g''). Identically zero for
/// exact solutions; for a numerical solution its size, scaled by
/// [`residual_scale`], measures the defect.
pub fn ode_residual(u: f64, g: f64, g1: f64, g2: f64, d: &DerivedParams, mu: f64) -> f64 {
    let heun = d.heun(mu);
    u * u * g2 + (mu * u * u + heun.c_h * u + d.beta) * g1 + (mu * d.gamma * u + heun.a_h) * g
}

/// Natural magnitude of the residual's constituent terms, floored at 1.
pub fn residual_scale(u: f64, g: f64, g1: f64, g2: f64, d: &DerivedParams, mu: f64) -> f64 {
    let heun = d.heun(mu);
    (u * u * g2)
        .abs()
        .max(((mu * u * u + heun.c_h * u + d.beta) * g1).abs())
        .max(((mu * d.gamma * u + heun.a_h) * g).abs())
        .max(1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub u: f64,
    /// H(u).
    pub h: f64,
    /// H'(u).
    pub h_prime: f64,
    /// WRMS error norm of the step ending here (0 for the seed node).
    pub err_norm: f64,
}

#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub mu: f64,
    pub derived: DerivedParams,
    pub heun: HeunParams,
    /// Series representation of H on [0, u0].
    pub series: SeriesExpansion,
    pub tol: f64,
    nodes: Vec<Node>,
    steps: Vec<DenseStep>,
    /// Per-step integrals of H.
    panels: Vec<f64>,
    /// prefix[i] = integral of H over [u0, u_i].
    prefix: Vec<f64>,
    /// suffix[i] = integral of H over [u_i, u_max].
    suffix: Vec<f64>,
    /// Integral of H over [0, u0], from the series termwise.
    s0: f64,
}

/// Compensated (Kahan) accumulator: panel sums stay at full precision even
/// over tens of thousands of steps.
#[derive(Clone, Copy, Default)]
struct Kahan {
    s: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.s + y;
        self.c = (t - self.s) - y;
        self.s = t;
    }
}

impl DensityGrid {
    /// Seed at an automatically chosen u0 and integrate the density equation
    /// out to `u_max` at relative tolerance `tol`.
    pub fn integrate(params: &ModelParams, u_max: f64, tol: f64) -> Result<Self> {
        if !(TOL_RANGE.0..=TOL_RANGE.1).contains(&tol) {
            return Err(Error::InvalidParameter {
                name: "tol",
                value: tol,
                constraint: "must lie in [1e-12, 1e-6]",
            });
        }
        params.validate()?;
        let derived = params.derive();
        derived.check_nondegeneracy()?;
        let heun = derived.heun(params.mu);
        let series = choose_seed(&heun, params.mu, tol / 10.0)?;
        if !(u_max.is_finite() && u_max > 2.0 * series.u0) {
            return Err(Error::InvalidParameter {
                name: "u_max",
                value: u_max,
                constraint: "must be finite and well above the series seed point",
            });
        }

        let run = dopri::integrate(
            rhs(&derived, &heun, params.mu),
            series.u0,
            [series.h0, series.hp0],
            u_max,
            &Options::new(tol, ATOL_FLOOR),
        )?;
        let s0 = series.integral(series.u0)?;
        let mut grid = DensityGrid {
            mu: params.mu,
            derived,
            heun,
            series,
            tol,
            nodes: Vec::new(),
            steps: Vec::new(),
            panels: Vec::new(),
            prefix: Vec::new(),
            suffix: Vec::new(),
            s0,
        };
        grid.absorb(run)?;
        Ok(grid)
    }

    /// Continue the integration to a larger endpoint, reusing everything
    /// already computed.
    pub fn extend(&mut self, new_u_max: f64) -> Result<()> {
        let u_max = self.u_max();
        if !(new_u_max.is_finite() && new_u_max > u_max) {
            return Err(Error::InvalidParameter {
                name: "u_max",
                value: new_u_max,
                constraint: "extension endpoint must exceed the current one",
            });
        }
        let last = self.nodes.last().expect("grid is nonempty");
        let mut opts = Options::new(self.tol, ATOL_FLOOR);
        opts.h_init = Some(self.steps.last().expect("grid is nonempty").h);
        let run = dopri::integrate(
            rhs(&self.derived, &self.heun, self.mu),
            u_max,
            [last.h, last.h_prime],
            new_u_max,
            &opts,
        )?;
        self.absorb(run)
    }

    /// Fold a raw integration into nodes, positivity checks, panel integrals
    /// and the prefix/suffix sums.
    fn absorb(&mut self, run: dopri::Integration) -> Result<()> {
        let first_new = self.steps.len();
        if self.nodes.is_empty() {
            self.nodes.push(Node {
                u: self.series.u0,
                h: self.series.h0,
                h_prime: self.series.hp0,
                err_norm: 0.0,
            });
        }
        for (j, step) in run.steps.iter().enumerate() {
            let y = if j + 1 < run.steps.len() {
                [run.steps[j + 1].rcont[0][0], run.steps[j + 1].rcont[1][0]]
            } else {
                run.y_end
            };
            self.nodes.push(Node {
                u: step.end(),
                h: y[0],
                h_prime: y[1],
                err_norm: step.err_norm,
            });
        }
        self.steps.extend(run.steps);

        // The regular branch is strictly positive; a sign change means the
        // integration latched onto a wrong branch. Check nodes and the
        // Gauss-Legendre evaluation points while forming the panels.
        for node in &self.nodes[first_new..] {
            if !(node.h > 0.0) || !node.h.is_finite() {
                return Err(Error::NegativeDensity {
                    u: node.u,
                    h: node.h,
                });
            }
        }
        for step in &self.steps[first_new..] {
            let mut bad = None;
            let panel = gauss5(
                |v| {
                    let h = step.eval_comp(v, 0);
                    if !(h > 0.0) && bad.is_none() {
                        bad = Some((v, h));
                    }
                    h
                },
                step.u,
                step.end(),
            );
            if let Some((v, h)) = bad {
                return Err(Error::NegativeDensity { u: v, h });
            }
            self.panels.push(panel);
        }

        // Prefix sums grow from u0; suffix sums are rebuilt from the far end
        // so every entry is a sum of same-signed, decreasing terms.
        self.prefix.clear();
        let mut acc = Kahan::default();
        self.prefix.push(0.0);
        for &p in &self.panels {
            acc.add(p);
            self.prefix.push(acc.s);
        }
        self.suffix.clear();
        self.suffix.resize(self.nodes.len(), 0.0);
        let mut acc = Kahan::default();
        for i in (0..self.panels.len()).rev() {
            acc.add(self.panels[i]);
            self.suffix[i] = acc.s;
        }
        Ok(())
    }

    pub fn u0(&self) -> f64 {
        self.series.u0
    }

    pub fn u_max(&self) -> f64 {
        self.nodes.last().expect("grid is nonempty").u
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Integral of H over [0, u0] (series part of the normalization).
    pub fn series_integral(&self) -> f64 {
        self.s0
    }

    /// Integral of H over [u0, u_max].
    pub fn grid_integral(&self) -> f64 {
        self.suffix[0]
    }

    fn check_range(&self, u: f64) -> Result<()> {
        let (lo, hi) = (self.u0(), self.u_max());
        if u.is_finite() && (lo..=hi).contains(&u) {
            Ok(())
        } else {
            Err(Error::OutOfRange { u, lo, hi })
        }
    }

    /// H and H' at any u in [u0, u_max]. Grid nodes reproduce their stored
    /// values bitwise; interior points use the dense interpolant.
    pub fn eval_h(&self, u: f64) -> Result<(f64, f64)> {
        self.check_range(u)?;
        let i = dopri::find_step(&self.steps, u);
        let s = &self.steps[i];
        if u == s.u {
            let n = &self.nodes[i];
            return Ok((n.h, n.h_prime));
        }
        if u == s.end() {
            let n = &self.nodes[i + 1];
            return Ok((n.h, n.h_prime));
        }
        Ok((s.eval_comp(u, 0), s.eval_comp(u, 1)))
    }

    /// Integral of H over [u0, u], via prefix sums plus a partial panel.
    pub fn cum_integral(&self, u: f64) -> Result<f64> {
        self.check_range(u)?;
        let i = dopri::find_step(&self.steps, u);
        let s = &self.steps[i];
        let partial = if u > s.u {
            gauss5(|v| s.eval_comp(v, 0), s.u, u)
        } else {
            0.0
        };
        Ok(self.prefix[i] + partial)
    }

    /// Integral of H over [u, u_max], via suffix sums plus a partial panel;
    /// no cancellation, so deep-tail values keep relative accuracy.
    pub fn tail_integral(&self, u: f64) -> Result<f64> {
        self.check_range(u)?;
        let i = dopri::find_step(&self.steps, u);
        let s = &self.steps[i];
        let partial = if u < s.end() {
            gauss5(|v| s.eval_comp(v, 0), u, s.end())
        } else {
            0.0
        };
        Ok(self.suffix[i + 1] + partial)
    }

    /// Sum of local error estimates (error norm times tolerance scale) over
    /// all steps up to `u_hi`: a conservative global-error budget for H there.
    pub fn err_budget_to(&self, u_hi: f64) -> f64 {
        let mut acc = 0.0;
        for (j, s) in self.steps.iter().enumerate() {
            if s.u >= u_hi {
                break;
            }
            let scale = self.nodes[j].h.abs().max(self.nodes[j + 1].h.abs());
            acc += s.err_norm * (ATOL_FLOOR + self.tol * scale);
        }
        acc
    }

    /// Max over grid nodes of |ode_residual| / residual_scale, with H''
    /// reconstructed from the stored H' values by 7-point finite differences
    /// (Fornberg weights on the uneven grid). Independent of the integrator's
    /// own error estimate, so it catches wrong-equation bugs, not just
    /// wrong-tolerance ones.
    pub fn node_residual_max(&self) -> f64 {
        let n = self.nodes.len();
        if n < 7 {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..n {
            let lo = i.saturating_sub(3).min(n - 7);
            let xs: Vec<f64> = self.nodes[lo..lo + 7].iter().map(|nd| nd.u).collect();
            let w = fd_weights_first(&xs, self.nodes[i].u);
            let mut g2 = 0.0;
            for (k, wk) in w.iter().enumerate() {
                g2 += wk * self.nodes[lo + k].h_prime;
            }
            let nd = &self.nodes[i];
            let r = ode_residual(nd.u, nd.h, nd.h_prime, g2, &self.derived, self.mu);
            let scale = residual_scale(nd.u, nd.h, nd.h_prime, g2, &self.derived, self.mu);
            worst = worst.max((r / scale).abs());
        }
        worst
    }

    /// Debug dump: one row per grid node.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "u,H,H_prime")?;
        for nd in &self.nodes {
            writeln!(w, "{:e},{:e},{:e}", nd.u, nd.h, nd.h_prime)?;
        }
        Ok(())
    }
}

fn rhs(derived: &DerivedParams, heun: &HeunParams, mu: f64) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] {
    let (gamma, beta) = (derived.gamma, derived.beta);
    let (a_h, c_h) = (heun.a_h, heun.c_h);
    move |u: f64, y: &[f64; 2]| {
        let u2 = u * u;
        [
            y[1],
            -((mu * u2 + c_h * u + beta) * y[1] + (mu * gamma * u + a_h) * y[0]) / u2,
        ]
    }
}

/// First-derivative finite-difference weights at `x0` for arbitrarily spaced
/// nodes `x` (Fornberg's recurrence, specialized to derivative order 1).
fn fd_weights_first(x: &[f64], x0: f64) -> Vec<f64> {
    let n = x.len();
    let m = 1usize;
    let mut c = vec![[0.0f64; 2]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - x0;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[1]).collect()
}

//! Structured run reports and the command implementations behind the CLI
//! binary. Each `cmd_*` function is the whole command minus argument parsing,
//! so integration tests can drive them in-process.
//!
//! Output discipline: everything written is deterministic for a fixed config
//! and seed. Timings are the one exception and therefore live behind an
//! opt-in flag, leaving the default byte stream reproducible.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::FileConfig;
use crate::error::Result;
use crate::mc::{estimate_psi, McConfig, McResult};
use crate::params::{gamma_of_kappa, DerivedParams, HeunParams, ModelParams};
use crate::survival::{log_probes, solve, SurvivalSolution};
use crate::tail::TailFit;

/// One row of the probe table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub u: f64,
    pub phi: f64,
    pub psi: f64,
}

/// Supremum summary of an integro-differential residual sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub n_probes: usize,
    pub qtol: f64,
    /// sup of the drift-scaled |residual| over the probes.
    pub max_abs_scaled: f64,
    /// Probe location attaining the supremum.
    pub at_u: f64,
}

/// One solver-vs-simulation comparison row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McComparisonRow {
    pub u: f64,
    pub psi_exact: f64,
    pub psi_hat: f64,
    pub std_err: f64,
    /// survived_censored / n_paths: the downward bias bound on psi_hat.
    pub censored_share: f64,
    /// 3 std_err + censored_share: the acceptance band.
    pub allowance: f64,
    pub abs_diff: f64,
    pub pass: bool,
}

/// Wall-clock stage timings in milliseconds. Nondeterministic by nature, so
/// reports carry them only when explicitly requested.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub solve_ms: f64,
    pub residual_ms: Option<f64>,
    pub mc_ms: Option<f64>,
}

/// Everything a solve/verify run produced, JSON-serializable and
/// round-trippable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub params: ModelParams,
    pub derived: DerivedParams,
    pub heun: HeunParams,
    /// Normalization constant C of Phi = C (c/lambda + int H).
    pub c_norm: f64,
    pub phi0: f64,
    pub u0: f64,
    pub u_max: f64,
    /// Share of the normalization integral carried by the analytic tail
    /// remainder beyond u_max (~ Psi(u_max)).
    pub remainder_ratio: f64,
    pub tail: TailFit,
    /// Psi(u) ~ k_ruin u^{-(gamma-1)}.
    pub k_ruin: f64,
    pub probes: Vec<ProbeRow>,
    pub residuals: Option<ResidualSummary>,
    pub mc: Vec<McComparisonRow>,
    pub timings: Option<Timings>,
}

/// One verification criterion with its measured numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyLine {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl std::fmt::Display for VerifyLine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Result of [`cmd_verify`]: the criterion lines plus the full report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub lines: Vec<VerifyLine>,
    pub all_pass: bool,
    pub report: RunReport,
}

fn base_report(sol: &SurvivalSolution, probes: &[f64]) -> Result<RunReport> {
    let mut rows = Vec::with_capacity(probes.len());
    for &u in probes {
        let psi = sol.psi(u)?;
        rows.push(ProbeRow {
            u,
            phi: 1.0 - psi,
            psi,
        });
    }
    Ok(RunReport {
        params: sol.params,
        derived: sol.derived,
        heun: sol.heun,
        c_norm: sol.c_norm,
        phi0: sol.phi0,
        u0: sol.grid.u0(),
        u_max: sol.grid.u_max(),
        remainder_ratio: sol.remainder_ratio,
        tail: sol.tail,
        k_ruin: sol.k_ruin(),
        probes: rows,
        residuals: None,
        mc: Vec::new(),
        timings: None,
    })
}

/// Print the parameter block: model echo, derived quantities, Heun
/// coefficients, tail order. Rejects degenerate models.
pub fn cmd_derive<W: Write>(cfg: &FileConfig, kappas: &[f64], w: &mut W) -> Result<()> {
    let list = if kappas.is_empty() {
        vec![cfg.model.kappa]
    } else {
        kappas.to_vec()
    };
    for &kappa in &list {
        let p = cfg.params_for(kappa)?;
        let d = p.derive();
        d.check_nondegeneracy()?;
        let h = d.heun(p.mu);
        writeln!(
            w,
            "model: lambda={} mu={} c={} r={} a={} sigma={} kappa={}",
            p.lambda, p.mu, p.c, p.r, p.a, p.sigma, p.kappa
        )?;
        writeln!(
            w,
            "derived: a_kappa={} sigma_kappa={} gamma={} beta={} nu={}",
            d.a_kappa, d.sigma_kappa, d.gamma, d.beta, d.nu
        )?;
        writeln!(
            w,
            "heun: a_h={} b_h={} c_h={} d_h={}",
            h.a_h, h.b_h, h.c_h, h.d_h
        )?;
        writeln!(w, "tail: psi decays like u^-{} for large u", d.gamma - 1.0)?;
    }
    Ok(())
}

/// CSV table of the decay exponent per strategy: kappa, gamma, gamma - 1.
/// An empty kappa list yields just the header.
pub fn cmd_table_gamma<W: Write>(cfg: &FileConfig, kappas: &[f64], w: &mut W) -> Result<()> {
    let base = cfg.params()?;
    writeln!(w, "kappa,gamma,tail_order")?;
    for &kappa in kappas {
        let gamma = gamma_of_kappa(&base, kappa)?;
        writeln!(w, "{},{},{}", kappa, gamma, gamma - 1.0)?;
    }
    Ok(())
}

/// Full pipeline for the configured strategy: solve, evaluate the output
/// probe grid, optionally write the (u, phi, psi) CSV, and return the report.
pub fn cmd_solve(cfg: &FileConfig, csv_out: Option<&Path>, timings: bool) -> Result<RunReport> {
    let p = cfg.params()?;
    let probes = cfg.output.probes()?;
    let t0 = Instant::now();
    let sol = solve(&p, &cfg.solver)?;
    let solve_ms = t0.elapsed().as_secs_f64() * 1e3;
    let mut report = base_report(&sol, &probes)?;
    if let Some(path) = csv_out {
        let mut file = std::fs::File::create(path)?;
        sol.write_probe_csv(&mut file, &probes)?;
    }
    if timings {
        report.timings = Some(Timings {
            solve_ms,
            ..Timings::default()
        });
    }
    Ok(report)
}

/// Figure-ready CSV: one `u` column and one `psi_kappa_*` column per
/// strategy, on the probe grid the output section's scale selects.
pub fn cmd_plot_data<W: Write>(cfg: &FileConfig, kappas: &[f64], w: &mut W) -> Result<()> {
    let probes = cfg.output.probes()?;
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(kappas.len());
    for &kappa in kappas {
        let p = cfg.params_for(kappa)?;
        let sol = solve(&p, &cfg.solver)?;
        let mut col = Vec::with_capacity(probes.len());
        for &u in &probes {
            col.push(sol.psi(u)?);
        }
        columns.push(col);
    }
    write!(w, "u")?;
    for &kappa in kappas {
        write!(w, ",psi_kappa_{kappa}")?;
    }
    writeln!(w)?;
    for (i, &u) in probes.iter().enumerate() {
        write!(w, "{u:e}")?;
        for col in &columns {
            write!(w, ",{:e}", col[i])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Monte Carlo estimates at the given initial capitals, one result per u.
pub fn cmd_simulate(cfg: &FileConfig, us: &[f64]) -> Result<Vec<McResult>> {
    let p = cfg.params()?;
    us.iter().map(|&u| estimate_psi(u, &p, &cfg.mc)).collect()
}

/// Default capital probes for verification runs.
pub const VERIFY_PROBES: [f64; 5] = [0.0, 1.0, 2.0, 5.0, 10.0];

/// Number of log-spaced residual probes a verify run sweeps.
pub const RESIDUAL_PROBES: usize = 50;

/// Quadrature tolerance of the verify residual sweep.
pub const RESIDUAL_QTOL: f64 = 1e-9;

/// Scaled-residual acceptance threshold of a verify run.
pub const RESIDUAL_CAP: f64 = 1e-6;

/// Relative tolerance of the boundary-identity check.
pub const BOUNDARY_RTOL: f64 = 1e-12;

/// Verification stages against an existing solution: boundary identity,
/// residual sweep, Monte Carlo comparison. Split from [`cmd_verify`] so a
/// deliberately corrupted solution can be pushed through the same checks.
pub fn verify_solution(
    sol: &SurvivalSolution,
    mc_cfg: &McConfig,
    us: &[f64],
) -> Result<(Vec<VerifyLine>, ResidualSummary, Vec<McComparisonRow>)> {
    let mut lines = Vec::new();
    let p = &sol.params;

    // Boundary identity c Phi'(0) = lambda Phi(0).
    let h0 = sol.h_at(0.0)?.0;
    let lhs = p.c * sol.c_norm * h0;
    let rhs = p.lambda * sol.phi0;
    let err = (lhs - rhs).abs();
    let bound = BOUNDARY_RTOL * rhs;
    lines.push(VerifyLine {
        name: "boundary-identity".into(),
        pass: err <= bound,
        detail: format!("|c phi'(0) - lambda phi(0)| = {err:.3e} (allowed {bound:.3e})"),
    });

    // Scaled integro-differential residual over log-spaced probes.
    let u_max = sol.grid.u_max();
    let probes = log_probes(0.1, 0.9 * u_max, RESIDUAL_PROBES)?;
    let mut max_abs: f64 = 0.0;
    let mut at_u = probes[0];
    for &u in &probes {
        let r = sol.ide_residual_scaled(u, RESIDUAL_QTOL)?.abs();
        if r > max_abs {
            max_abs = r;
            at_u = u;
        }
    }
    let residuals = ResidualSummary {
        n_probes: probes.len(),
        qtol: RESIDUAL_QTOL,
        max_abs_scaled: max_abs,
        at_u,
    };
    lines.push(VerifyLine {
        name: "ide-residual".into(),
        pass: max_abs <= RESIDUAL_CAP,
        detail: format!(
            "sup scaled |residual| = {max_abs:.3e} at u = {at_u:.3e} over {} probes (allowed {RESIDUAL_CAP:.1e})",
            probes.len()
        ),
    });

    // Monte Carlo comparison: solver within 3 stderr + censoring share.
    let mut rows = Vec::with_capacity(us.len());
    for &u in us {
        let exact = sol.psi(u)?;
        let r = estimate_psi(u, p, mc_cfg)?;
        let censored_share = r.survived_censored as f64 / r.n_paths as f64;
        let allowance = 3.0 * r.std_err + censored_share;
        let abs_diff = (exact - r.psi_hat).abs();
        let pass = abs_diff <= allowance;
        lines.push(VerifyLine {
            name: format!("mc-comparison u={u}"),
            pass,
            detail: format!(
                "|psi - psi_hat| = {abs_diff:.3e} (psi = {exact:.6e}, psi_hat = {:.6e}, allowed {allowance:.3e})",
                r.psi_hat
            ),
        });
        rows.push(McComparisonRow {
            u,
            psi_exact: exact,
            psi_hat: r.psi_hat,
            std_err: r.std_err,
            censored_share,
            allowance,
            abs_diff,
            pass,
        });
    }
    Ok((lines, residuals, rows))
}

/// Solve, then verify: residual sweep and Monte Carlo comparison with
/// PASS/FAIL lines. `us` empty means [`VERIFY_PROBES`].
pub fn cmd_verify(cfg: &FileConfig, us: &[f64], timings: bool) -> Result<VerifyOutcome> {
    let p = cfg.params()?;
    let us = if us.is_empty() {
        VERIFY_PROBES.to_vec()
    } else {
        us.to_vec()
    };
    let t0 = Instant::now();
    let sol = solve(&p, &cfg.solver)?;
    let solve_ms = t0.elapsed().as_secs_f64() * 1e3;
    let probes = cfg.output.probes()?;
    let mut report = base_report(&sol, &probes)?;

    let t1 = Instant::now();
    let (lines, residuals, mc_rows) = verify_solution(&sol, &cfg.mc, &us)?;
    let verify_ms = t1.elapsed().as_secs_f64() * 1e3;

    report.residuals = Some(residuals);
    report.mc = mc_rows;
    if timings {
        report.timings = Some(Timings {
            solve_ms,
            residual_ms: Some(verify_ms),
            mc_ms: None,
        });
    }
    let all_pass = lines.iter().all(|l| l.pass);
    Ok(VerifyOutcome {
        lines,
        all_pass,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{OutputSection, Scale};

    fn quick_cfg() -> FileConfig {
        let mut cfg = FileConfig::default();
        cfg.solver.tol = 1e-8;
        cfg.mc.n_paths = 2_000;
        cfg.mc.dt = 0.02;
        cfg.mc.horizon = 60.0;
        cfg.output = OutputSection {
            u_min: 0.01,
            u_max: 100.0,
            u_points: 9,
            scale: Scale::Loglog,
        };
        cfg
    }

    // 1. RunReport JSON round-trips exactly, including optional sections.
    #[test]
    fn report_round_trips() {
        let cfg = quick_cfg();
        let report = cmd_solve(&cfg, None, false).unwrap();
        let text = serde_json::to_string_pretty(&report).unwrap();
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(report, back);
        assert!(report.timings.is_none());
        assert_eq!(report.probes.len(), 9);
    }

    // 2. The probe table is internally consistent: phi + psi = 1, phi
    // monotone nondecreasing in u.
    #[test]
    fn report_consistency() {
        let report = cmd_solve(&quick_cfg(), None, false).unwrap();
        let mut last = -1.0;
        for row in &report.probes {
            assert!((row.phi + row.psi - 1.0).abs() <= 1e-15);
            assert!(row.phi >= last);
            last = row.phi;
        }
        assert!((report.phi0 - report.c_norm * report.params.c).abs() <= 1e-15);
    }

    // 3. Derive block prints the strategy table values; degenerate models are
    // rejected through the same path.
    #[test]
    fn derive_block() {
        let cfg = quick_cfg();
        let mut out = Vec::new();
        cmd_derive(&cfg, &[0.2], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let gamma: f64 = text
            .split("gamma=")
            .nth(1)
            .unwrap()
            .split_whitespace()
            .next()
            .unwrap()
            .parse()
            .unwrap();
        assert!((gamma - 21.875).abs() <= 1e-10, "{text}");
        assert!(text.contains("kappa=0.2"));

        let mut bad = cfg.clone();
        bad.model.sigma = 10.0;
        bad.model.kappa = 1.0;
        let err = cmd_derive(&bad, &[], &mut Vec::new()).unwrap_err();
        assert!(err.to_string().contains("gamma"), "{err}");
    }

    // 4. Gamma table: documented strategies, empty list gives header only.
    #[test]
    fn gamma_table() {
        let cfg = quick_cfg();
        let mut out = Vec::new();
        cmd_table_gamma(&cfg, &[0.2, 0.4, 0.9], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "kappa,gamma,tail_order");
        let row =
            |i: usize| -> Vec<f64> { lines[i].split(',').map(|f| f.parse().unwrap()).collect() };
        for (i, (kappa, gamma)) in [(0.2, 21.875), (0.4, 7.03125), (0.9, 2.1604938271604937)]
            .into_iter()
            .enumerate()
        {
            let fields = row(i + 1);
            assert_eq!(fields[0], kappa);
            assert!(
                (fields[1] - gamma).abs() <= 1e-10 * gamma,
                "{}",
                lines[i + 1]
            );
            assert!((fields[2] - (gamma - 1.0)).abs() <= 1e-10 * gamma);
        }

        let mut empty = Vec::new();
        cmd_table_gamma(&cfg, &[], &mut empty).unwrap();
        assert_eq!(
            String::from_utf8(empty).unwrap(),
            "kappa,gamma,tail_order\n"
        );
    }

    // 5. Plot data: one column per strategy, identical values at shared u
    // across scales (the scale only changes the grid).
    #[test]
    fn plot_data_columns() {
        let mut cfg = quick_cfg();
        cfg.output.u_points = 5;
        cfg.output.u_min = 1.0;
        cfg.output.u_max = 16.0;
        let mut out = Vec::new();
        cmd_plot_data(&cfg, &[0.4, 0.9], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "u,psi_kappa_0.4,psi_kappa_0.9");
        assert_eq!(lines.len(), 6);

        cfg.output.scale = Scale::Semilog;
        let mut lin = Vec::new();
        cmd_plot_data(&cfg, &[0.4, 0.9], &mut lin).unwrap();
        let lin_text = String::from_utf8(lin).unwrap();
        // Shared endpoints u = 1 and u = 16 carry identical psi values.
        let first = |t: &str, which: usize| t.lines().nth(which).unwrap().to_string();
        assert_eq!(first(&text, 1), first(&lin_text, 1));
        assert_eq!(first(&text, 5), first(&lin_text, 5));
    }

    // 6. Verify on a sound solution passes every line; the boundary and
    // residual criteria carry finite measured numbers.
    #[test]
    fn verify_passes_on_baseline() {
        let cfg = quick_cfg();
        let out = cmd_verify(&cfg, &[0.0, 1.0], false).unwrap();
        assert!(out.all_pass, "{:#?}", out.lines);
        assert_eq!(out.lines.len(), 2 + 2);
        assert!(out.report.residuals.unwrap().max_abs_scaled <= RESIDUAL_CAP);
        assert_eq!(out.report.mc.len(), 2);
        let text = out.lines[0].to_string();
        assert!(text.starts_with("PASS boundary-identity"), "{text}");
    }

    // 7. Fault injection: scaling C by 1.01 leaves the (C-homogeneous)
    // residual criterion passing but breaks the MC comparison at u = 0.
    #[test]
    fn verify_catches_mis_normalization() {
        let cfg = quick_cfg();
        let p = cfg.params().unwrap();
        let mut sol = solve(&p, &cfg.solver).unwrap();
        sol.scale_normalization(1.01);
        let mut mc = cfg.mc;
        mc.n_paths = 60_000;
        let (lines, _, rows) = verify_solution(&sol, &mc, &[0.0]).unwrap();
        let residual_line = lines.iter().find(|l| l.name == "ide-residual").unwrap();
        assert!(residual_line.pass, "{residual_line}");
        let mc_line = lines.iter().find(|l| l.name.starts_with("mc-")).unwrap();
        assert!(!mc_line.pass, "{mc_line}");
        // The shift is exactly the 1% mis-scaling of Phi(0).
        assert!(rows[0].abs_diff >= 0.005, "{:?}", rows[0]);
    }

    // 8. cmd_simulate returns one deterministic result per capital.
    #[test]
    fn simulate_rows() {
        let cfg = quick_cfg();
        let a = cmd_simulate(&cfg, &[0.0, 2.0]).unwrap();
        let b = cmd_simulate(&cfg, &[0.0, 2.0]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert!(a[0].psi_hat >= a[1].psi_hat);
    }
}

//! Cross-module properties: the series recurrence against the density
//! operator, coefficient identities under random parameters, probability
//! axioms of full solves, and report round-trips.

use heunruin::config::FileConfig;
use heunruin::report::{cmd_verify, VerifyOutcome};
use heunruin::series::recurrence_coeffs;
use heunruin::survival::{solve, SolveOptions};
use heunruin::ModelParams;
use proptest::prelude::*;

fn quick_opts() -> SolveOptions {
    SolveOptions {
        tol: 1e-8,
        ..SolveOptions::default()
    }
}

fn params_strategy() -> impl Strategy<Value = ModelParams> {
    (
        0.5f64..2.0,  // lambda
        0.7f64..1.5,  // mu
        0.4f64..1.0,  // c
        0.0f64..0.05, // r
        0.1f64..0.2,  // a
        0.3f64..0.5,  // sigma
        0.35f64..1.0, // kappa
    )
        .prop_map(|(lambda, mu, c, r, a, sigma, kappa)| {
            ModelParams::new(lambda, mu, c, r, a, sigma, kappa).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    // 1. Heun coefficient identities hold for arbitrary valid parameters:
    // b_h = gamma and c_h = gamma + 2 bitwise, d_h = -mu beta bitwise, and
    // a_h - b_h + nu = mu beta up to the rounding of a_h's single addition.
    #[test]
    fn heun_identities_random(p in params_strategy()) {
        let d = p.derive();
        let h = d.heun(p.mu);
        prop_assert_eq!(h.b_h.to_bits(), d.gamma.to_bits());
        prop_assert_eq!(h.c_h.to_bits(), (d.gamma + 2.0).to_bits());
        prop_assert_eq!((-h.d_h).to_bits(), (p.mu * d.beta).to_bits());
        let lhs = h.a_h - h.b_h + d.nu;
        let scale = (p.mu * d.beta).abs() + h.b_h.abs() + d.nu.abs();
        prop_assert!((lhs - p.mu * d.beta).abs() <= 4.0 * f64::EPSILON * scale);
    }

    // 2. The zeta-space recurrence produces exactly the kernel of the u-space
    // density operator: applying
    //   u^2 P'' + (mu u^2 + (gamma+2) u + beta) P' + (mu gamma u + a_h) P
    // to the truncated series P(u) = sum f_k (-mu u)^k leaves no residual
    // below the truncation order. This ties the series module's seed to the
    // operator the grid integrator enforces.
    #[test]
    fn series_lies_in_operator_kernel(p in params_strategy()) {
        let d = p.derive();
        let h = d.heun(p.mu);
        const K: usize = 30;
        let f = recurrence_coeffs(&h, K).unwrap();
        prop_assume!(f.len() == K + 1);
        // a_k = f_k (-mu)^k: series coefficients in plain powers of u.
        let mut a = vec![0.0f64; K + 1];
        let mut pw = 1.0;
        for k in 0..=K {
            a[k] = f[k] * pw;
            pw *= -p.mu;
        }
        let at = |i: i64| -> f64 {
            if (0..=K as i64).contains(&i) { a[i as usize] } else { 0.0 }
        };
        for m in 0..K as i64 {
            let mf = m as f64;
            let t1 = (mf * (mf + d.gamma + 1.0) + h.a_h) * at(m);
            let t2 = p.mu * (mf - 1.0 + d.gamma) * at(m - 1);
            let t3 = d.beta * (mf + 1.0) * at(m + 1);
            let r = t1 + t2 + t3;
            let scale = t1.abs().max(t2.abs()).max(t3.abs()).max(1e-300);
            prop_assert!(
                r.abs() <= 64.0 * f64::EPSILON * scale,
                "order {m}: residual {r:.3e} vs scale {scale:.3e}"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    // 3. Probability axioms of the full pipeline under random parameters:
    // psi decreasing in u, bounded in [0, 1], phi0 = C c / lambda, boundary
    // identity to near rounding.
    #[test]
    fn solve_satisfies_probability_axioms(p in params_strategy()) {
        prop_assume!(p.derive().gamma > 2.0);
        let sol = solve(&p, &quick_opts()).unwrap();
        prop_assert!(sol.phi0 > 0.0 && sol.phi0 < 1.0);
        let mut last = 1.0f64 + 1e-15;
        for &u in &[0.0, 0.5, 2.0, 10.0, 100.0, 1e4] {
            let psi = sol.psi(u).unwrap();
            prop_assert!((0.0..=1.0).contains(&psi), "psi({u}) = {psi}");
            prop_assert!(psi <= last * (1.0 + 1e-12), "not monotone at {u}");
            last = psi;
        }
        let lhs = p.c * sol.c_norm * sol.h_at(0.0).unwrap().0;
        let rhs = p.lambda * sol.phi0;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
    }
}

// 4. Two identical solves give bitwise-identical numbers: the pipeline has
// no hidden nondeterminism.
#[test]
fn solve_bitwise_deterministic() {
    let p = ModelParams::new(1.0, 1.0, 0.5, 0.05, 0.15, 0.4, 0.4).unwrap();
    let a = solve(&p, &quick_opts()).unwrap();
    let b = solve(&p, &quick_opts()).unwrap();
    assert_eq!(a.c_norm.to_bits(), b.c_norm.to_bits());
    assert_eq!(a.tail.k1.to_bits(), b.tail.k1.to_bits());
    assert_eq!(a.grid.nodes().len(), b.grid.nodes().len());
    for &u in &[0.0, 0.01, 1.0, 42.0, 1e4] {
        assert_eq!(
            a.psi(u).unwrap().to_bits(),
            b.psi(u).unwrap().to_bits(),
            "psi({u})"
        );
    }
}

// 5. VerifyOutcome (lines + full report) survives a JSON round trip.
#[test]
fn verify_outcome_round_trips() {
    let mut cfg = FileConfig::default();
    cfg.solver.tol = 1e-8;
    cfg.mc.n_paths = 800;
    cfg.mc.dt = 0.05;
    cfg.mc.horizon = 30.0;
    cfg.output.u_points = 5;
    let outcome = cmd_verify(&cfg, &[0.0, 1.0], false).unwrap();
    let text = serde_json::to_string(&outcome).unwrap();
    let back: VerifyOutcome = serde_json::from_str(&text).unwrap();
    assert_eq!(outcome, back);
    assert_eq!(outcome.lines.len(), 4);
}

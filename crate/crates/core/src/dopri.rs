//! Embedded Dormand-Prince 5(4) integrator with dense output.
//!
//! Specialized to the two-component first-order system used by the density
//! equation. Standard machinery: FSAL evaluation reuse, WRMS error norm with
//! mixed relative/absolute tolerance, PI step-size controller, and the
//! order-4 continuous extension, whose coefficients are retained per step so
//! the solution (and its derivative) can be evaluated anywhere afterwards.

use crate::error::{Error, Result};

pub type State = [f64; 2];

// Butcher tableau of the Dormand-Prince 5(4) pair.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Error coefficients: 5th-order weights minus the embedded 4th-order ones.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Weights of the order-4 continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// PI controller constants (the classic DOPRI5 tuning).
const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_SHRINK_MAX: f64 = 5.0; // at most h/5 after a rejection
const FAC_GROW_MAX: f64 = 10.0; // at most 10 h after an acceptance

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; picked automatically when absent.
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Options {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Options {
            rtol,
            atol,
            h_init: None,
            max_steps: 20_000_000,
        }
    }
}

/// One accepted step together with its dense-output polynomial.
#[derive(Debug, Clone)]
pub struct DenseStep {
    /// Left endpoint of the step.
    pub u: f64,
    pub h: f64,
    /// Continuous-extension coefficients, one set per component.
    pub rcont: [[f64; 5]; 2],
    /// WRMS error-norm of the step (dimensionless; <= 1 since accepted).
    pub err_norm: f64,
}

impl DenseStep {
    pub fn end(&self) -> f64 {
        self.u + self.h
    }

    fn theta(&self, u: f64) -> f64 {
        (u - self.u) / self.h
    }

    /// Dense value of one component at u inside [u, u+h].
    pub fn eval_comp(&self, u: f64, comp: usize) -> f64 {
        let t = self.theta(u);
        let r = &self.rcont[comp];
        r[0] + t * (r[1] + (1.0 - t) * (r[2] + t * (r[3] + (1.0 - t) * r[4])))
    }

    pub fn eval(&self, u: f64) -> State {
        [self.eval_comp(u, 0), self.eval_comp(u, 1)]
    }

    /// d/du of the dense polynomial for one component.
    pub fn eval_deriv(&self, u: f64, comp: usize) -> f64 {
        let t = self.theta(u);
        let r = &self.rcont[comp];
        let bp = r[3] + (1.0 - 2.0 * t) * r[4];
        let b = r[2] + t * (r[3] + (1.0 - t) * r[4]);
        let a = r[1] + (1.0 - t) * b;
        let ap = -b + (1.0 - t) * bp;
        (a + t * ap) / self.h
    }
}

#[derive(Debug, Clone)]
pub struct Integration {
    pub steps: Vec<DenseStep>,
    pub u_end: f64,
    pub y_end: State,
    pub h_last: f64,
    pub n_rejected: usize,
}

fn wrms(e: &State, y0: &State, y1: &State, opts: &Options) -> f64 {
    let mut acc = 0.0;
    for i in 0..2 {
        let sc = opts.atol + opts.rtol * y0[i].abs().max(y1[i].abs());
        let q = e[i] / sc;
        acc += q * q;
    }
    let err = (acc / 2.0).sqrt();
    if err.is_finite() {
        err
    } else {
        f64::INFINITY
    }
}

fn hinit<F: Fn(f64, &State) -> State>(
    rhs: &F,
    u0: f64,
    y0: &State,
    f0: &State,
    u_end: f64,
    opts: &Options,
) -> f64 {
    let span = u_end - u0;
    // A bad guess only costs a few rejections, so the result is floored at a
    // small positive width rather than allowed to collapse to zero.
    let floor = (1e3 * f64::EPSILON * span).min(span);
    let sc = |y: &State, i: usize| opts.atol + opts.rtol * y[i].abs();
    // Quotients are clamped so squaring cannot overflow to infinity when a
    // component sits hundreds of orders of magnitude above its scale (pure
    // relative control uses a ~1e-300 atol).
    let q = |v: f64, s: f64| {
        let r = (v / s).abs();
        if r.is_finite() {
            r.min(1e140)
        } else {
            1e140
        }
    };
    let mut d0 = 0.0f64;
    let mut d1 = 0.0f64;
    for i in 0..2 {
        d0 += q(y0[i], sc(y0, i)).powi(2);
        d1 += q(f0[i], sc(y0, i)).powi(2);
    }
    d0 = (d0 / 2.0).sqrt();
    d1 = (d1 / 2.0).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span).max(floor);
    let y1 = [y0[0] + h0 * f0[0], y0[1] + h0 * f0[1]];
    let f1 = rhs(u0 + h0, &y1);
    let mut d2 = 0.0f64;
    for i in 0..2 {
        d2 += q(f1[i] - f0[i], sc(y0, i)).powi(2);
    }
    d2 = (d2 / 2.0).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span).max(floor)
}

/// Integrate y' = rhs(u, y) forward from (u0, y0) to u_end, retaining every
/// accepted step's dense polynomial.
pub fn integrate<F: Fn(f64, &State) -> State>(
    rhs: F,
    u0: f64,
    y0: State,
    u_end: f64,
    opts: &Options,
) -> Result<Integration> {
    assert!(u_end > u0, "integration must move forward");
    let mut steps: Vec<DenseStep> = Vec::new();
    let mut u = u0;
    let mut y = y0;
    let mut k1 = rhs(u, &y);
    let mut h = match opts.h_init {
        Some(h) => h.min(u_end - u0),
        None => hinit(&rhs, u0, &y0, &k1, u_end, opts),
    };
    let mut fac_old = 1e-4f64;
    let mut rejected_last = false;
    let mut n_rejected = 0usize;
    let mut n_steps = 0usize;

    loop {
        n_steps += 1;
        if n_steps > opts.max_steps {
            return Err(Error::StepLimit {
                u,
                steps: opts.max_steps,
            });
        }
        let h_min = 16.0 * f64::EPSILON * u.abs().max(u0.abs());
        // <= so a step that collapsed to zero errors even where h_min is 0.
        if h <= h_min || !h.is_finite() {
            return Err(Error::StepSizeUnderflow { u, h });
        }
        let last = u + h >= u_end;
        if last {
            h = u_end - u;
        }

        // The six intermediate stages; k7 is the FSAL evaluation at the end.
        let st = |y: &State, coefs: &[(f64, &State)]| -> State {
            let mut out = *y;
            for &(a, k) in coefs {
                out[0] += h * a * k[0];
                out[1] += h * a * k[1];
            }
            out
        };
        let k2 = rhs(u + C2 * h, &st(&y, &[(A21, &k1)]));
        let k3 = rhs(u + C3 * h, &st(&y, &[(A31, &k1), (A32, &k2)]));
        let k4 = rhs(u + C4 * h, &st(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = rhs(
            u + C5 * h,
            &st(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = rhs(
            u + h,
            &st(
                &y,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y1 = st(
            &y,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let k7 = rhs(u + h, &y1);

        let mut e = [0.0f64; 2];
        for i in 0..2 {
            e[i] =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let err = wrms(&e, &y, &y1, opts);

        if err <= 1.0 {
            // Accept: store the continuous extension of this step.
            let mut rcont = [[0.0f64; 5]; 2];
            for i in 0..2 {
                let ydiff = y1[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                rcont[i][0] = y[i];
                rcont[i][1] = ydiff;
                rcont[i][2] = bspl;
                rcont[i][3] = ydiff - h * k7[i] - bspl;
                rcont[i][4] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            steps.push(DenseStep {
                u,
                h,
                rcont,
                err_norm: err,
            });
            u += h;
            y = y1;
            k1 = k7;
            if last {
                return Ok(Integration {
                    steps,
                    u_end: u,
                    y_end: y,
                    h_last: h,
                    n_rejected,
                });
            }
            let fac11 = err.powf(EXPO1);
            let mut fac = fac11 / fac_old.powf(BETA);
            fac = (fac / SAFETY).clamp(1.0 / FAC_GROW_MAX, FAC_SHRINK_MAX);
            let mut h_new = h / fac;
            if rejected_last {
                // No growth immediately after a rejection.
                h_new = h_new.min(h);
            }
            fac_old = err.max(1e-4);
            rejected_last = false;
            h = h_new;
        } else {
            let fac11 = err.powf(EXPO1);
            h /= (fac11 / SAFETY).min(FAC_SHRINK_MAX);
            rejected_last = true;
            n_rejected += 1;
        }
    }
}

/// Locate the dense step covering u (steps are contiguous and sorted).
pub fn find_step(steps: &[DenseStep], u: f64) -> usize {
    let i = steps.partition_point(|s| s.end() < u);
    i.min(steps.len() - 1)
}

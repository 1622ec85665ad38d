//! Adaptive Dormand–Prince 5(4) integrator for fixed-size real systems.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    DormandPrince54,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_step: T,
    pub method: Method,
}

impl<T: Real> Default for IntegratorConfig<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(1e-10),
            abs_tol: T::lit(1e-12),
            max_step: T::lit(0.5),
            method: Method::DormandPrince54,
        }
    }
}

impl<T: Real> IntegratorConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > T::zero() && self.abs_tol > T::zero() && self.max_step > T::zero()) {
            return invalid("integrator tolerances and max_step must be > 0");
        }
        Ok(())
    }

    pub fn with_tolerances(&self, rel_tol: T, abs_tol: T) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..*self
        }
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` and returns the state at each checkpoint
/// (ascending, all `>= t0`). Steps land exactly on checkpoints.
pub fn integrate<T, F, const N: usize>(
    mut f: F,
    t0: T,
    y0: [T; N],
    checkpoints: &[T],
    cfg: &IntegratorConfig<T>,
) -> Result<Vec<[T; N]>>
where
    T: Real,
    F: FnMut(T, &[T; N]) -> [T; N],
{
    cfg.validate()?;
    if checkpoints.windows(2).any(|w| w[1] < w[0]) || checkpoints.iter().any(|&t| t < t0) {
        return invalid("checkpoints must be ascending and >= t0");
    }
    let a: [[T; 6]; 7] = A.map(|row| row.map(T::lit));
    let c: [T; 7] = C.map(T::lit);
    let e: [T; 7] = E.map(T::lit);
    let safety = T::lit(0.9);
    let fmin = T::lit(0.2);
    let fmax = T::lit(5.0);

    let mut t = t0;
    let mut y = y0;
    let mut k = [[T::zero(); N]; 7];
    k[0] = f(t, &y);
    let mut h = cfg.max_step.min(T::lit(1e-2));
    let mut out = Vec::with_capacity(checkpoints.len());

    for &target in checkpoints {
        while t < target {
            let remaining = target - t;
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            let mut stage = [T::zero(); N];
            for s in 1..7 {
                for i in 0..N {
                    let mut acc = T::zero();
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc = acc + a[s][j] * kj[i];
                    }
                    stage[i] = y[i] + step * acc;
                }
                k[s] = f(t + c[s] * step, &stage);
            }
            // stage now holds the fifth-order solution (FSAL row).
            let mut err = T::zero();
            for i in 0..N {
                let mut d = T::zero();
                for (s, ks) in k.iter().enumerate() {
                    d = d + e[s] * ks[i];
                }
                let sc = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(stage[i].abs());
                let r = (step * d / sc).abs();
                err = err.max(r);
            }
            if !err.is_finite() || stage.iter().any(|v| !v.is_finite()) {
                return Err(failure(t, "non-finite state", &y));
            }
            if err <= T::one() {
                t = if last { target } else { t + step };
                y = stage;
                k[0] = k[6];
                let factor = if err == T::zero() {
                    fmax
                } else {
                    (safety * err.powf(T::lit(-0.2))).min(fmax).max(fmin)
                };
                if !last || factor < T::one() {
                    h = (step * factor).min(cfg.max_step);
                }
            } else {
                let factor = (safety * err.powf(T::lit(-0.2))).max(fmin);
                h = step * factor;
            }
            if h <= T::epsilon() * T::lit(16.0) * t.abs().max(T::one()) {
                return Err(failure(t, "step size underflow", &y));
            }
        }
        out.push(y);
    }
    Ok(out)
}

fn failure<T: Real, const N: usize>(t: T, reason: &str, y: &[T; N]) -> Error {
    Error::Integration {
        time: t.to_f64_lossy(),
        reason: reason.to_string(),
        state: format!("{:?}", y.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>()),
    }
}

//! Recovers `Im S[omega, omega]` from the phase a qubit accumulates under the two-tone
//! filter `lambda (sin 2 omega t + cos omega t)`.
//!
//! Over whole filter periods the first-order (mean) response cancels and the phase grows
//! linearly at rate `lambda^3 Im S[omega, omega] / 8 + O(lambda^5)`. The switch-on transient adds
//! a constant offset, so rates are measured as increments after a burn-in.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{s_total, FreqTriple};
use crate::error::{invalid, Error, Result};
use crate::model::{CavityParams, FilterSpec};
use crate::ode::IntegratorConfig;
use crate::phase_space::{integrate_chi_at, linear_fit};
use crate::scalar::Real;

/// Ratio between the secular phase rate and `lambda^3 Im S[omega, omega]`.
pub const CUBIC_COEFFICIENT: f64 = 1.0 / 8.0;

const MAX_CONDITION: f64 = 1e8;

fn period<T: Real>(omega: T) -> T {
    T::TAU() / omega
}

/// `400 / gamma` rounded to the nearest whole number of filter periods (at least one).
pub fn default_t_f<T: Real>(gamma: T, omega: T) -> T {
    let per = period(omega);
    (T::lit(400.0) / gamma / per).round().max(T::one()) * per
}

/// Whole number of periods covering `20 / gamma`, at most half of `t_f`.
pub fn default_burn_in<T: Real>(gamma: T, omega: T, t_f: T) -> T {
    let per = period(omega);
    let want = (T::lit(20.0) / gamma / per).ceil();
    let cap = (t_f / per * T::lit(0.5)).floor();
    want.min(cap).max(T::zero()) * per
}

/// `lambda^3 Im S[omega, omega] / 8` from the closed-form bispectrum.
pub fn analytic_prediction<T: Real>(p: &CavityParams<T>, omega: T, lambda: T) -> T {
    lambda * lambda * lambda * s_total(p, FreqTriple::new(omega, omega)).im * T::lit(CUBIC_COEFFICIENT)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint<T> {
    pub lambda: T,
    /// `[Im chi(t_f) - Im chi(t_b)] / (t_f - t_b)`.
    pub rate: T,
    /// Phase accumulated between burn-in and `t_f`.
    pub increment: T,
    /// `Im chi(t_f) / t_f`, including the transient offset.
    pub naive_rate: T,
    pub prediction: T,
    pub sign_flip: bool,
}

/// Secular phase rate for each coupling strength (parallel over `lambdas`).
pub fn secular_rates<T: Real>(
    p: &CavityParams<T>,
    omega: T,
    lambdas: &[T],
    t_f: T,
    cfg: &IntegratorConfig<T>,
) -> Result<Vec<RatePoint<T>>> {
    p.validate()?;
    if !(omega > T::zero()) {
        return invalid("omega must be > 0");
    }
    let per = period(omega);
    let k = t_f / per;
    if !(t_f > T::zero()) || (k - k.round()).abs() > T::lit(1e-6) {
        return invalid(format!("t_f = {t_f} is not a whole number of periods {per}"));
    }
    let t_b = default_burn_in(p.gamma, omega, t_f);
    lambdas
        .par_iter()
        .map(|&lambda| {
            let fs = FilterSpec::two_tone(lambda, omega, t_f)?;
            let times = if t_b > T::zero() { vec![t_b, t_f] } else { vec![t_f] };
            let chi = integrate_chi_at(p, &fs, cfg, &times)?;
            let end = chi.last().unwrap().im;
            let start = if t_b > T::zero() { chi[0].im } else { T::zero() };
            let increment = end - start;
            let rate = increment / (t_f - t_b);
            let prediction = analytic_prediction(p, omega, lambda);
            let sign_flip = rate != T::zero()
                && prediction != T::zero()
                && rate.signum() != prediction.signum();
            Ok(RatePoint {
                lambda,
                rate,
                increment,
                naive_rate: end / t_f,
                prediction,
                sign_flip,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImBispectrumEstimate<T> {
    pub estimate: T,
    pub stderr: T,
    pub rates: Vec<RatePoint<T>>,
    /// Couplings whose phase rate has the opposite sign to the cubic prediction.
    pub sign_flips: Vec<T>,
}

/// Fits `rate = a lambda^3 + b lambda^5` and returns `8 a` with its standard error.
pub fn estimate_im_bispectrum<T: Real>(
    p: &CavityParams<T>,
    omega: T,
    lambdas: &[T],
    t_f: T,
    cfg: &IntegratorConfig<T>,
) -> Result<ImBispectrumEstimate<T>> {
    if lambdas.len() < 3 {
        return Err(Error::IllConditioned(format!(
            "need at least 3 coupling values, got {}",
            lambdas.len()
        )));
    }
    if lambdas.iter().any(|&l| !(l > T::zero())) || lambdas.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("couplings must be positive, distinct and ascending");
    }
    let rates = secular_rates(p, omega, lambdas, t_f, cfg)?;
    let x1: Vec<T> = lambdas.iter().map(|&l| l.powi(3)).collect();
    let x2: Vec<T> = lambdas.iter().map(|&l| l.powi(5)).collect();
    let y: Vec<T> = rates.iter().map(|r| r.rate).collect();
    let (a, se_a) = two_term_fit(&x1, &x2, &y)?;
    let scale = T::one() / T::lit(CUBIC_COEFFICIENT);
    Ok(ImBispectrumEstimate {
        estimate: a * scale,
        stderr: se_a * scale,
        sign_flips: rates.iter().filter(|r| r.sign_flip).map(|r| r.lambda).collect(),
        rates,
    })
}

/// Least squares `y = a x1 + b x2`; returns `(a, stderr(a))`.
fn two_term_fit<T: Real>(x1: &[T], x2: &[T], y: &[T]) -> Result<(T, T)> {
    let dot = |u: &[T], v: &[T]| u.iter().zip(v).map(|(&a, &b)| a * b).sum::<T>();
    let n1 = dot(x1, x1).sqrt();
    let n2 = dot(x2, x2).sqrt();
    let c = dot(x1, x2) / (n1 * n2);
    let cond = (T::one() + c.abs()) / (T::one() - c.abs());
    if !cond.is_finite() || cond > T::lit(MAX_CONDITION) {
        return Err(Error::IllConditioned(format!("condition number {cond}")));
    }
    // Normalized columns u = x1/n1, v = x2/n2 with Gram matrix [[1, c], [c, 1]].
    let det = T::one() - c * c;
    let uy = dot(x1, y) / n1;
    let vy = dot(x2, y) / n2;
    let alpha = (uy - c * vy) / det;
    let beta = (vy - c * uy) / det;
    let a = alpha / n1;
    let b = beta / n2;
    let rss: T = x1
        .iter()
        .zip(x2)
        .zip(y)
        .map(|((&p, &q), &v)| {
            let r = v - a * p - b * q;
            r * r
        })
        .sum();
    let dof = T::from_usize_lossy(y.len() - 2);
    let s2 = rss / dof;
    let se = (s2 / det).sqrt() / n1;
    Ok((a, se))
}

/// Log–log slope of `|rate|` against `lambda` over the smaller half of the resolvable points.
pub fn scaling_exponent<T: Real>(
    p: &CavityParams<T>,
    omega: T,
    lambdas: &[T],
    t_f: T,
    cfg: &IntegratorConfig<T>,
) -> Result<T> {
    if lambdas.len() < 4 {
        return invalid("need at least 4 coupling values");
    }
    if lambdas.iter().any(|&l| !(l > T::zero())) || lambdas.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("couplings must be positive, distinct and ascending");
    }
    if lambdas[lambdas.len() - 1] / lambdas[0] < T::lit(10.0) {
        return invalid("couplings must span at least one decade");
    }
    let rates = secular_rates(p, omega, lambdas, t_f, cfg)?;
    let floor = T::lit(100.0) * cfg.abs_tol;
    let usable: Vec<&RatePoint<T>> = rates.iter().filter(|r| r.increment.abs() >= floor).collect();
    if usable.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} coupling values rise above the noise floor",
            usable.len()
        )));
    }
    let take = usable.len().div_ceil(2).max(3);
    let xs: Vec<T> = usable[..take].iter().map(|r| r.lambda.ln()).collect();
    let ys: Vec<T> = usable[..take].iter().map(|r| r.rate.abs().ln()).collect();
    Ok(linear_fit(&xs, &ys).0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_times_are_whole_periods() {
        let t = default_t_f(1.0, 3.0);
        let per = std::f64::consts::TAU / 3.0;
        assert!(((t / per) - (t / per).round()).abs() < 1e-12);
        assert!((t - 400.0).abs() <= per / 2.0);
        let b = default_burn_in(1.0, 3.0, t);
        assert!(b >= 20.0 && b < 20.0 + per);
    }

    #[test]
    fn fit_recovers_exact_polynomial() {
        let l = [0.05, 0.1, 0.2, 0.3];
        let x1: Vec<f64> = l.iter().map(|v: &f64| v.powi(3)).collect();
        let x2: Vec<f64> = l.iter().map(|v: &f64| v.powi(5)).collect();
        let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| 2.0 * a - 7.0 * b).collect();
        let (a, se) = two_term_fit(&x1, &x2, &y).unwrap();
        assert!((a - 2.0).abs() < 1e-12);
        assert!(se < 1e-10);
    }

    #[test]
    fn collinear_fit_is_rejected() {
        let x = [1.0, 2.0, 3.0];
        assert!(matches!(two_term_fit(&x, &x, &x), Err(Error::IllConditioned(_))));
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = CavityParams::<f64>::with_drive_photons(1.0, 10.0, 1.0, 0.0).unwrap();
        let cfg = IntegratorConfig::default();
        let t_f = default_t_f(1.0, 3.0);
        assert!(matches!(
            estimate_im_bispectrum(&p, 3.0, &[0.1, 0.2], t_f, &cfg),
            Err(Error::IllConditioned(_))
        ));
        assert!(estimate_im_bispectrum(&p, 3.0, &[0.1, 0.2, 0.3], 100.0, &cfg).is_err());
        assert!(scaling_exponent(&p, 3.0, &[0.1, 0.2, 0.3, 0.5], t_f, &cfg).is_err());
    }

    #[test]
    fn quiet_cavity_has_no_phase() {
        let p = CavityParams::<f64>::thermal(1.0, 0.0).unwrap();
        let cfg = IntegratorConfig::default();
        let t_f = default_t_f(1.0, 3.0);
        let est = estimate_im_bispectrum(&p, 3.0, &[0.05, 0.1, 0.2, 0.3], t_f, &cfg).unwrap();
        assert!(est.estimate.abs() <= est.stderr, "{est:?}");
        let r = scaling_exponent(&p, 3.0, &[0.05, 0.1, 0.2, 0.5], t_f, &cfg);
        assert!(matches!(r, Err(Error::InsufficientData(_))));
    }
}

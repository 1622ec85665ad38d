//! Qubit coherence under a filtered photon-number coupling, from the closed set of ODEs obeyed
//! by a Gaussian-times-displacement phase-space ansatz.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{CavityParams, FilterSpec};
use crate::ode::{integrate, IntegratorConfig};
use crate::scalar::{Complex, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceState<T> {
    pub nu_th: Complex<T>,
    pub nu_dr: Complex<T>,
    pub sigma_s: Complex<T>,
    pub x_bar: Complex<T>,
    pub p_bar: Complex<T>,
}

impl<T: Real> PhaseSpaceState<T> {
    pub fn chi(&self) -> Complex<T> {
        -(self.nu_th + self.nu_dr)
    }

    fn to_array(self) -> [T; 10] {
        [
            self.nu_th.re,
            self.nu_th.im,
            self.sigma_s.re,
            self.sigma_s.im,
            self.nu_dr.re,
            self.nu_dr.im,
            self.x_bar.re,
            self.x_bar.im,
            self.p_bar.re,
            self.p_bar.im,
        ]
    }

    fn from_array(y: &[T; 10]) -> Self {
        Self {
            nu_th: Complex::new(y[0], y[1]),
            sigma_s: Complex::new(y[2], y[3]),
            nu_dr: Complex::new(y[4], y[5]),
            x_bar: Complex::new(y[6], y[7]),
            p_bar: Complex::new(y[8], y[9]),
        }
    }
}

/// Fixed point of the ODEs at zero coupling: stationary cavity, `nu = 0`.
pub fn steady_init<T: Real>(p: &CavityParams<T>) -> PhaseSpaceState<T> {
    let half_g = p.gamma * T::lit(0.5);
    let det = half_g * half_g + p.delta * p.delta;
    let s2 = T::SQRT_2();
    let x = (half_g * s2 * p.drive_im - p.delta * s2 * p.drive_re) / det;
    let pb = (half_g * s2 * p.drive_re + p.delta * s2 * p.drive_im) / det;
    let zero = Complex::new(T::zero(), T::zero());
    PhaseSpaceState {
        nu_th: zero,
        nu_dr: zero,
        sigma_s: Complex::new(p.n_th + T::lit(0.5), T::zero()),
        x_bar: Complex::new(x, T::zero()),
        p_bar: Complex::new(pb, T::zero()),
    }
}

fn rhs<T: Real>(p: &CavityParams<T>, fs: &FilterSpec<T>, t: T, y: &[T; 10]) -> [T; 10] {
    let s = PhaseSpaceState::from_array(y);
    let g = fs.lambda() * fs.unit_shape(t);
    let ig = Complex::new(T::zero(), g);
    let half = T::lit(0.5);
    let half_g = p.gamma * half;
    let s2 = T::SQRT_2();
    let r = |v: T| Complex::new(v, T::zero());

    let d_nu_th = ig * (s.sigma_s - r(half));
    let d_sigma = r(p.gamma * (p.n_th + half)) - s.sigma_s * p.gamma - ig * s.sigma_s * s.sigma_s
        + ig * T::lit(0.25);
    let d_nu_dr = ig * half * (s.x_bar * s.x_bar + s.p_bar * s.p_bar);
    let d_x = -s.p_bar * p.delta + r(s2 * p.drive_im) - ig * s.sigma_s * s.x_bar - s.x_bar * half_g;
    let d_p = s.x_bar * p.delta + r(s2 * p.drive_re) - ig * s.sigma_s * s.p_bar - s.p_bar * half_g;

    PhaseSpaceState {
        nu_th: d_nu_th,
        nu_dr: d_nu_dr,
        sigma_s: d_sigma,
        x_bar: d_x,
        p_bar: d_p,
    }
    .to_array()
}

/// Full ODE state at each requested time (ascending, within `[0, t_f]`).
pub fn integrate_states<T: Real>(
    p: &CavityParams<T>,
    fs: &FilterSpec<T>,
    cfg: &IntegratorConfig<T>,
    times: &[T],
) -> Result<Vec<PhaseSpaceState<T>>> {
    p.validate()?;
    if times.iter().any(|&t| t > fs.t_f()) {
        return invalid("checkpoint beyond the filter duration");
    }
    let y0 = steady_init(p).to_array();
    let out = integrate(|t, y| rhs(p, fs, t, y), T::zero(), y0, times, cfg)?;
    Ok(out.iter().map(PhaseSpaceState::from_array).collect())
}

/// `chi = ln Lambda` at each requested time.
pub fn integrate_chi_at<T: Real>(
    p: &CavityParams<T>,
    fs: &FilterSpec<T>,
    cfg: &IntegratorConfig<T>,
    times: &[T],
) -> Result<Vec<Complex<T>>> {
    Ok(integrate_states(p, fs, cfg, times)?
        .iter()
        .map(PhaseSpaceState::chi)
        .collect())
}

/// `chi(t_f) = -(nu_th + nu_dr)` starting from the stationary state.
pub fn integrate_chi<T: Real>(
    p: &CavityParams<T>,
    fs: &FilterSpec<T>,
    cfg: &IntegratorConfig<T>,
) -> Result<Complex<T>> {
    Ok(integrate_chi_at(p, fs, cfg, &[fs.t_f()])?[0])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyShift<T> {
    pub slope: T,
    pub intercept: T,
    pub rms_residual: T,
    /// Set when the linear model does not describe `Im chi(t_f)`.
    pub flagged: bool,
}

/// Long-time slope of `Im chi` against `t_f` from a linear fit over `t_f_list`.
pub fn frequency_shift<T: Real>(
    p: &CavityParams<T>,
    fs: &FilterSpec<T>,
    cfg: &IntegratorConfig<T>,
    t_f_list: &[T],
) -> Result<FrequencyShift<T>> {
    if t_f_list.len() < 2 {
        return invalid("need at least two t_f values");
    }
    if t_f_list.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("t_f values must be strictly ascending");
    }
    if let Some(period) = fs.fundamental_period() {
        let off = t_f_list.iter().any(|&t| {
            let k = t / period;
            (k - k.round()).abs() > T::lit(1e-6)
        });
        if off {
            return invalid("each t_f must be a whole number of filter periods");
        }
    }
    let last = *t_f_list.last().unwrap();
    let fs = fs.with_t_f(last)?;
    let ys: Vec<T> = integrate_chi_at(p, &fs, cfg, t_f_list)?
        .iter()
        .map(|c| c.im)
        .collect();
    let (slope, intercept, rms) = linear_fit(t_f_list, &ys);
    let span = last - t_f_list[0];
    let allowed = T::lit(1e-2) * slope.abs() * span + T::lit(100.0) * cfg.abs_tol;
    Ok(FrequencyShift {
        slope,
        intercept,
        rms_residual: rms,
        flagged: rms > allowed,
    })
}

/// Least-squares line; returns `(slope, intercept, rms residual)`.
pub(crate) fn linear_fit<T: Real>(x: &[T], y: &[T]) -> (T, T, T) {
    let n = T::from_usize_lossy(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let sxx: T = x.iter().map(|&a| (a - mx) * (a - mx)).sum();
    let sxy: T = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: T = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    (slope, intercept, (ss / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::c_thermal_2;

    #[test]
    fn steady_init_examples() {
        let p = CavityParams::<f64>::thermal(1.0, 0.7).unwrap();
        let s = steady_init(&p);
        assert_eq!(s.x_bar, Complex::new(0.0, 0.0));
        assert_eq!(s.p_bar, Complex::new(0.0, 0.0));
        assert_eq!(s.sigma_s, Complex::new(1.2, 0.0));
        let p = CavityParams::<f64>::new(1.0, 0.0, Complex::new(0.5, 0.0), 0.0).unwrap();
        let s = steady_init(&p);
        assert!(s.x_bar.norm() < 1e-15);
        assert!((s.p_bar.re - 2f64.sqrt()).abs() < 1e-15);
        let vac = CavityParams::<f64>::thermal(1.0, 0.0).unwrap();
        assert_eq!(steady_init(&vac).sigma_s.re, 0.5);
    }

    #[test]
    fn steady_init_mean_photons_match_drive() {
        let p = CavityParams::<f64>::new(1.3, -0.8, Complex::new(0.4, -0.9), 0.2).unwrap();
        let s = steady_init(&p);
        let n = (s.x_bar * s.x_bar + s.p_bar * s.p_bar).re / 2.0;
        assert!((n - p.drive_photons()).abs() < 1e-14);
    }

    #[test]
    fn zero_coupling_gives_zero_chi() {
        let p = CavityParams::<f64>::with_drive_photons(1.0, 2.0, 1.0, 0.5).unwrap();
        let fs = FilterSpec::<f64>::two_tone(0.0, 3.0, 20.0).unwrap();
        let chi = integrate_chi(&p, &fs, &IntegratorConfig::default()).unwrap();
        assert_eq!(chi, Complex::new(0.0, 0.0));
    }

    #[test]
    fn weak_constant_coupling_matches_second_cumulant() {
        // -Re chi ~ (lambda^2 / 2) ∬ C2(t - t') = (lambda^2/2) * 2 n(n+1) [t/g - (1 - e^{-g t})/g^2]
        let p = CavityParams::<f64>::thermal(1.0, 1.0).unwrap();
        let lambda = 1e-3;
        let t_f = 10.0;
        let fs = FilterSpec::<f64>::constant(lambda, t_f).unwrap();
        let cfg = IntegratorConfig::default().with_tolerances(1e-12, 1e-16);
        let chi = integrate_chi(&p, &fs, &cfg).unwrap();
        // Oracle: direct double quadrature of the thermal second cumulant.
        let rule = crate::quadrature::PanelRule::<f64>::new(10);
        let double = rule.integrate(
            |t| rule.integrate(|s| c_thermal_2(&p, t - s), 0.0, t, 8),
            0.0,
            t_f,
            20,
        ) * 2.0;
        let expected = 0.5 * lambda * lambda * double;
        assert!(((-chi.re) - expected).abs() < 1e-3 * expected, "{} vs {expected}", -chi.re);
        // First order: Im chi = -lambda n t_f.
        assert!((chi.im + lambda * t_f).abs() < 1e-3 * lambda * t_f);
    }

    #[test]
    fn gaussian_sector_stays_undisplaced() {
        let p = CavityParams::<f64>::thermal(1.0, 0.0).unwrap();
        let fs = FilterSpec::<f64>::two_tone(0.8, 1.5, 12.0).unwrap();
        let states =
            integrate_states(&p, &fs, &IntegratorConfig::default(), &[3.0, 12.0]).unwrap();
        for s in states {
            assert_eq!(s.nu_dr, Complex::new(0.0, 0.0));
            assert_eq!(s.x_bar, Complex::new(0.0, 0.0));
            assert_eq!(s.p_bar, Complex::new(0.0, 0.0));
        }
    }

    #[test]
    fn filter_sign_average_cancels_odd_orders() {
        let p = CavityParams::<f64>::with_drive_photons(1.0, 10.0, 1.0, 0.0).unwrap();
        let period = std::f64::consts::TAU / 3.0;
        let fs = FilterSpec::<f64>::two_tone(0.2, 3.0, 60.0 * period).unwrap();
        let cfg = IntegratorConfig::default();
        let times: Vec<f64> = (30..=60).step_by(10).map(|k| k as f64 * period).collect();
        let plus = frequency_shift(&p, &fs, &cfg, &times).unwrap();
        let minus = frequency_shift(&p, &fs.negated(), &cfg, &times).unwrap();
        assert!(!plus.flagged && !minus.flagged);
        assert!((plus.slope + minus.slope).abs() < 1e-6 * plus.slope.abs().max(1e-12));
        assert!(plus.slope.abs() > 0.0);
    }

    #[test]
    fn odd_part_scales_cubically() {
        let p = CavityParams::<f64>::with_drive_photons(1.0, 10.0, 1.0, 0.0).unwrap();
        let period = std::f64::consts::TAU / 3.0;
        let cfg = IntegratorConfig::default();
        let odd = |lambda: f64| {
            let fs = FilterSpec::<f64>::two_tone(lambda, 3.0, 100.0 * period).unwrap();
            let a = integrate_chi(&p, &fs, &cfg).unwrap();
            let b = integrate_chi(&p, &fs.negated(), &cfg).unwrap();
            ((a - b) / 2.0).im
        };
        // The mean photon number enters at first order and cancels over whole periods, so
        // the odd part is dominated by the third cumulant.
        let (l1, l2) = (0.05, 0.1);
        let exponent = (odd(l2) / odd(l1)).abs().ln() / (l2 / l1).ln();
        assert!((exponent - 3.0).abs() < 0.1, "{exponent}");
    }

    #[test]
    fn tolerance_halving_is_consistent() {
        let p = CavityParams::<f64>::with_drive_photons(1.0, 2.0, 1.0, 0.5).unwrap();
        let fs = FilterSpec::<f64>::two_tone(0.3, 1.0, 40.0).unwrap();
        let cfg = IntegratorConfig::default().with_tolerances(1e-8, 1e-10);
        let a = integrate_chi(&p, &fs, &cfg).unwrap();
        let b = integrate_chi(&p, &fs, &cfg.with_tolerances(5e-9, 5e-11)).unwrap();
        assert!((a - b).norm() < 10.0 * 1e-8 * a.norm().max(1.0), "{a} {b}");
    }

    #[test]
    fn frequency_shift_zero_coupling() {
        let p = CavityParams::<f64>::with_drive_photons(1.0, 10.0, 1.0, 0.0).unwrap();
        let period = std::f64::consts::TAU / 3.0;
        let fs = FilterSpec::<f64>::two_tone(0.0, 3.0, 20.0 * period).unwrap();
        let fsh = frequency_shift(&p, &fs, &IntegratorConfig::default(), &[10.0 * period, 20.0 * period])
            .unwrap();
        assert_eq!(fsh.slope, 0.0);
        assert!(!fsh.flagged);
        assert!(frequency_shift(&p, &fs, &IntegratorConfig::default(), &[1.0, 2.0]).is_err());
    }

    #[test]
    fn matches_truncated_fock_coherence() {
        // Reference: direct integration of the qubit-coherence master equation
        // dv/dt = L v - (i/2) lambda F(t) {n, v} in a 36-level Fock space, chi = ln Tr v.
        let p = CavityParams::<f64>::with_drive_photons(1.0, 2.0, 0.5, 0.3).unwrap();
        let fs = FilterSpec::<f64>::two_tone(0.4, 1.0, 10.0).unwrap();
        let cfg = IntegratorConfig::default().with_tolerances(1e-12, 1e-14);
        let chi = integrate_chi(&p, &fs, &cfg).unwrap();
        let reference = Complex::new(-0.992_805_476_631_53, 0.036_323_389_940_09);
        assert!((chi - reference).norm() < 1e-9, "{chi}");
    }
}

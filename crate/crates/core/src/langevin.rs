//! Classical stochastic models of the cavity and Monte-Carlo estimators of third cumulants
//! and bispectra.
//!
//! Trajectory `k` draws from the ChaCha8 stream `k` of the configured seed, so results do not
//! depend on the thread count. Per-trajectory results are collected in index order and reduced
//! sequentially.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{s_drive_classical_shape, s_thermal, thermal_prefactor, FreqTriple};
use crate::error::{invalid, Error, Result};
use crate::model::{
    BispectrumSurface, CavityParams, FreqGrid2D, ParamsSnapshot, Source, SqueezedBathParams,
};
use crate::scalar::{cx, Complex, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig<T> {
    pub dt: T,
    /// Recorded duration after burn-in.
    pub total_time: T,
    pub burn_in: T,
    pub n_traj: usize,
    pub seed: u64,
    /// Keep every `stride`-th step.
    pub stride: usize,
}

impl<T: Real> SdeConfig<T> {
    /// `burn_in = 10 / gamma`, `stride = 1`.
    pub fn new(gamma: T, dt: T, total_time: T, n_traj: usize, seed: u64) -> Self {
        Self {
            dt,
            total_time,
            burn_in: T::lit(10.0) / gamma,
            n_traj,
            seed,
            stride: 1,
        }
    }

    pub fn with_stride(self, stride: usize) -> Self {
        Self { stride, ..self }
    }

    pub fn validate(&self, gamma: T) -> Result<()> {
        if !(self.dt > T::zero()) || !(self.total_time > T::zero()) {
            return invalid("dt and total_time must be > 0");
        }
        if self.dt * gamma > T::lit(0.05) * (T::one() + T::lit(1e-9)) {
            return invalid(format!("dt = {} exceeds 0.05 / gamma", self.dt));
        }
        if self.burn_in * gamma < T::lit(10.0) * (T::one() - T::lit(1e-9)) {
            return invalid(format!("burn_in = {} is shorter than 10 / gamma", self.burn_in));
        }
        if self.n_traj == 0 || self.stride == 0 {
            return invalid("n_traj and stride must be >= 1");
        }
        if self.recorded_len() < 2 {
            return invalid("total_time must cover at least two recorded samples");
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.total_time / self.dt).round().to_usize().unwrap_or(0)
    }

    pub fn burn_in_steps(&self) -> usize {
        (self.burn_in / self.dt).ceil().to_usize().unwrap_or(0)
    }

    pub fn recorded_len(&self) -> usize {
        self.steps() / self.stride.max(1)
    }

    pub fn sample_spacing(&self) -> T {
        self.dt * T::from_usize_lossy(self.stride)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "kebab-case")]
pub enum Samples<T> {
    /// Mode amplitude `c(t)`.
    Amplitude(Vec<Complex<T>>),
    /// Quadratures `(x(t), p(t))`.
    Quadratures(Vec<(T, T)>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub samples: Samples<T>,
    /// Spacing between recorded samples.
    pub dt: T,
    pub params: ParamsSnapshot<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        match &self.samples {
            Samples::Amplitude(v) => v.len(),
            Samples::Quadratures(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `|c|^2` or `(x^2 + p^2) / 2`.
    pub fn photon_number(&self) -> Vec<T> {
        match &self.samples {
            Samples::Amplitude(v) => v.iter().map(|z| z.norm_sqr()).collect(),
            Samples::Quadratures(v) => v
                .iter()
                .map(|&(x, p)| (x * x + p * p) * T::lit(0.5))
                .collect(),
        }
    }
}

/// Classical occupation `n + 1/2` that reproduces symmetrized quantum second moments.
pub fn effective_occupation<T: Real>(n: T) -> T {
    n + T::lit(0.5)
}

/// Noise-free fixed point `i f / (gamma/2 - i delta)` of the driven amplitude equation.
pub fn driven_fixed_point<T: Real>(p: &CavityParams<T>) -> Complex<T> {
    cx(T::zero(), T::one()) * p.drive() / cx(p.gamma * T::lit(0.5), -p.delta)
}

fn rng(seed: u64, stream: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream as u64);
    r
}

fn normal<T: Real>(r: &mut ChaCha8Rng) -> T {
    let v: f64 = StandardNormal.sample(r);
    T::lit(v)
}

fn driven_trajectory<T: Real>(p: &CavityParams<T>, cfg: &SdeConfig<T>, index: usize) -> Trajectory<T> {
    let mut r = rng(cfg.seed, index);
    let dt = cfg.dt;
    let a = cx(p.gamma * T::lit(0.5), -p.delta);
    let force = cx(T::zero(), T::one()) * p.drive();
    let amp = (p.gamma * effective_occupation(p.n_th) * dt * T::lit(0.5)).sqrt();
    let mut c = driven_fixed_point(p);
    let mut step = |c: &mut Complex<T>| {
        let dw = cx(normal::<T>(&mut r), normal::<T>(&mut r)) * amp;
        *c = *c + (force - a * *c) * dt + dw;
    };
    for _ in 0..cfg.burn_in_steps() {
        step(&mut c);
    }
    let mut out = Vec::with_capacity(cfg.recorded_len());
    for _ in 0..cfg.recorded_len() {
        for _ in 0..cfg.stride {
            step(&mut c);
        }
        out.push(c);
    }
    Trajectory {
        samples: Samples::Amplitude(out),
        dt: cfg.sample_spacing(),
        params: ParamsSnapshot::Cavity(*p),
    }
}

fn squeezed_trajectory<T: Real>(
    sp: &SqueezedBathParams<T>,
    cfg: &SdeConfig<T>,
    index: usize,
) -> Trajectory<T> {
    let mut r = rng(cfg.seed, index);
    let dt = cfg.dt;
    let half_g = sp.gamma * T::lit(0.5);
    let base = (sp.gamma * effective_occupation(sp.n_cl) * dt).sqrt();
    let (ax, ap) = (base * sp.r.exp(), base * (-sp.r).exp());
    let (mut x, mut p) = (T::zero(), T::zero());
    let mut step = |x: &mut T, p: &mut T| {
        let (w1, w2) = (normal::<T>(&mut r), normal::<T>(&mut r));
        let nx = *x + (-sp.delta * *p - half_g * *x) * dt + ax * w1;
        let np = *p + (sp.delta * *x - half_g * *p) * dt + ap * w2;
        *x = nx;
        *p = np;
    };
    for _ in 0..cfg.burn_in_steps() {
        step(&mut x, &mut p);
    }
    let mut out = Vec::with_capacity(cfg.recorded_len());
    for _ in 0..cfg.recorded_len() {
        for _ in 0..cfg.stride {
            step(&mut x, &mut p);
        }
        out.push((x, p));
    }
    Trajectory {
        samples: Samples::Quadratures(out),
        dt: cfg.sample_spacing(),
        params: ParamsSnapshot::Squeezed(*sp),
    }
}

/// Simulates the driven model and maps each trajectory through `f` without storing it;
/// results are in trajectory order.
pub fn map_driven<T, R, F>(p: &CavityParams<T>, cfg: &SdeConfig<T>, f: F) -> Result<Vec<R>>
where
    T: Real,
    R: Send,
    F: Fn(Trajectory<T>) -> R + Sync,
{
    p.validate()?;
    cfg.validate(p.gamma)?;
    Ok((0..cfg.n_traj)
        .into_par_iter()
        .map(|k| f(driven_trajectory(p, cfg, k)))
        .collect())
}

pub fn map_squeezed<T, R, F>(sp: &SqueezedBathParams<T>, cfg: &SdeConfig<T>, f: F) -> Result<Vec<R>>
where
    T: Real,
    R: Send,
    F: Fn(Trajectory<T>) -> R + Sync,
{
    sp.validate()?;
    cfg.validate(sp.gamma)?;
    Ok((0..cfg.n_traj)
        .into_par_iter()
        .map(|k| f(squeezed_trajectory(sp, cfg, k)))
        .collect())
}

/// Euler–Maruyama for `dc = -(gamma/2 - i delta) c dt + i f dt + sqrt(gamma n_eff) dW` with
/// `<dW* dW> = dt`, `<dW dW> = 0`.
pub fn simulate_driven<T: Real>(p: &CavityParams<T>, cfg: &SdeConfig<T>) -> Result<Vec<Trajectory<T>>> {
    map_driven(p, cfg, |t| t)
}

/// Euler–Maruyama for `dx = (-delta p - gamma x / 2) dt + e^r sqrt(gamma n_eff) dW1`,
/// `dp = (delta x - gamma p / 2) dt + e^-r sqrt(gamma n_eff) dW2`.
pub fn simulate_squeezed<T: Real>(
    sp: &SqueezedBathParams<T>,
    cfg: &SdeConfig<T>,
) -> Result<Vec<Trajectory<T>>> {
    map_squeezed(sp, cfg, |t| t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate<T> {
    pub mean: T,
    pub stderr: T,
}

/// Mean and standard error across independent per-trajectory values (infinite stderr for a
/// single value).
pub fn mean_stderr<T: Real>(values: &[T]) -> Estimate<T> {
    let n = T::from_usize_lossy(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    if values.len() < 2 {
        return Estimate {
            mean,
            stderr: T::infinity(),
        };
    }
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / (n - T::one());
    Estimate {
        mean,
        stderr: (var / n).sqrt(),
    }
}

fn lag_steps<T: Real>(tau: T, spacing: T) -> Result<i64> {
    let k = tau / spacing;
    let r = k.round();
    if (k - r).abs() > T::lit(1e-6) * r.abs().max(T::one()) {
        return invalid(format!("lag {tau} is not a multiple of the sample spacing {spacing}"));
    }
    r.to_i64()
        .ok_or_else(|| Error::InvalidParameter(format!("lag {tau} out of range")))
}

/// Time-averaged `<dn(t) dn(t + tau1) dn(t + tau2)>` of one photon-number record.
pub fn third_moment_single<T: Real>(n: &[T], spacing: T, tau_pairs: &[(T, T)]) -> Result<Vec<T>> {
    let len = n.len() as i64;
    let mean = n.iter().copied().sum::<T>() / T::from_usize_lossy(n.len().max(1));
    let d: Vec<T> = n.iter().map(|&v| v - mean).collect();
    tau_pairs
        .iter()
        .map(|&(t1, t2)| {
            let (k1, k2) = (lag_steps(t1, spacing)?, lag_steps(t2, spacing)?);
            let lo = 0.min(k1).min(k2);
            let hi = 0.max(k1).max(k2);
            let start = -lo;
            let end = len - hi;
            if end - start < 1 {
                return Err(Error::InsufficientData(format!(
                    "lags ({t1}, {t2}) exceed the record span"
                )));
            }
            let mut acc = T::zero();
            for t in start..end {
                acc = acc + d[t as usize] * d[(t + k1) as usize] * d[(t + k2) as usize];
            }
            Ok(acc / T::from_usize_lossy((end - start) as usize))
        })
        .collect()
}

/// Third central moment of the photon number at the given lag pairs, averaged within each
/// trajectory; mean and standard error across trajectories.
pub fn estimate_c3<T: Real>(trajs: &[Trajectory<T>], tau_pairs: &[(T, T)]) -> Result<Vec<Estimate<T>>> {
    if trajs.is_empty() {
        return Err(Error::InsufficientData("no trajectories".into()));
    }
    let per: Vec<Vec<T>> = trajs
        .par_iter()
        .map(|t| third_moment_single(&t.photon_number(), t.dt, tau_pairs))
        .collect::<Result<_>>()?;
    Ok(combine_c3(&per, tau_pairs.len()))
}

pub fn combine_c3<T: Real>(per_traj: &[Vec<T>], n_pairs: usize) -> Vec<Estimate<T>> {
    (0..n_pairs)
        .map(|i| mean_stderr(&per_traj.iter().map(|v| v[i]).collect::<Vec<_>>()))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    Rectangular,
    Hann,
}

impl Window {
    fn weights<T: Real>(self, len: usize) -> Vec<T> {
        match self {
            Window::Rectangular => vec![T::one(); len],
            Window::Hann => (0..len)
                .map(|k| {
                    let x = T::PI() * T::from_usize_lossy(2 * k + 1) / T::from_usize_lossy(2 * len);
                    let s = x.sin();
                    s * s
                })
                .collect(),
        }
    }

    /// 50% for Hann, none for rectangular.
    pub fn default_overlap(self) -> f64 {
        match self {
            Window::Rectangular => 0.0,
            Window::Hann => 0.5,
        }
    }
}

/// Segment-averaged triple-product bispectrum estimator for records with a fixed spacing.
///
/// `B(w1, w2) = X(w1) X(w2) X*(w1 + w2) / (spacing * sum w^3)` with
/// `X(w) = spacing * sum_k w_k dn_k e^{-i w t_k}` on mean-subtracted segments.
#[derive(Clone, Debug)]
pub struct BispectrumEstimator<T> {
    grid: FreqGrid2D<T>,
    spacing: T,
    segment_len: usize,
    hop: usize,
    weights: Vec<T>,
    norm: T,
    /// Non-negative frequencies whose transforms are needed.
    freqs: Vec<T>,
    /// For each grid point, indices into `freqs` and whether to conjugate, for w1, w2, w1 + w2.
    plan: Vec<[(usize, bool); 3]>,
}

impl<T: Real> BispectrumEstimator<T> {
    pub fn new(grid: &FreqGrid2D<T>, spacing: T, segment_len: usize, window: Window) -> Result<Self> {
        Self::with_overlap(grid, spacing, segment_len, window, T::lit(window.default_overlap()))
    }

    pub fn with_overlap(
        grid: &FreqGrid2D<T>,
        spacing: T,
        segment_len: usize,
        window: Window,
        overlap: T,
    ) -> Result<Self> {
        if segment_len < 4 {
            return invalid("segment_len must be >= 4 samples");
        }
        if !(spacing > T::zero()) || !(overlap >= T::zero() && overlap < T::one()) {
            return invalid("spacing must be > 0 and overlap in [0, 1)");
        }
        let nyquist = T::PI() / spacing;
        let mut freqs: Vec<T> = Vec::new();
        let mut plan = Vec::with_capacity(grid.len());
        let tol = T::epsilon() * T::lit(64.0) * nyquist;
        let lookup = |w: T, freqs: &mut Vec<T>| -> Result<(usize, bool)> {
            if w.abs() > nyquist * (T::one() + T::lit(1e-12)) {
                return invalid(format!("frequency {w} beyond Nyquist {nyquist}"));
            }
            let a = w.abs();
            let idx = match freqs.iter().position(|&f| (f - a).abs() <= tol) {
                Some(i) => i,
                None => {
                    freqs.push(a);
                    freqs.len() - 1
                }
            };
            Ok((idx, w < T::zero()))
        };
        for (w1, w2) in grid.points() {
            plan.push([
                lookup(w1, &mut freqs)?,
                lookup(w2, &mut freqs)?,
                lookup(w1 + w2, &mut freqs)?,
            ]);
        }
        let weights = window.weights::<T>(segment_len);
        let norm = spacing * weights.iter().map(|&w| w * w * w).sum::<T>();
        let hop = ((T::one() - overlap) * T::from_usize_lossy(segment_len))
            .round()
            .to_usize()
            .unwrap_or(segment_len)
            .max(1);
        Ok(Self {
            grid: grid.clone(),
            spacing,
            segment_len,
            hop,
            weights,
            norm,
            freqs,
            plan,
        })
    }

    pub fn segments_in(&self, len: usize) -> usize {
        if len < self.segment_len {
            0
        } else {
            (len - self.segment_len) / self.hop + 1
        }
    }

    /// Average over the segments of one record (row-major over the grid).
    pub fn record_average(&self, x: &[T]) -> Result<Vec<Complex<T>>> {
        let nseg = self.segments_in(x.len());
        if nseg == 0 {
            return Err(Error::InsufficientData(format!(
                "record of {} samples is shorter than a segment of {}",
                x.len(),
                self.segment_len
            )));
        }
        let m = self.segment_len;
        let mut acc = vec![cx(T::zero(), T::zero()); self.plan.len()];
        let mut seg = vec![T::zero(); m];
        let mut spectra = vec![cx(T::zero(), T::zero()); self.freqs.len()];
        for s in 0..nseg {
            let chunk = &x[s * self.hop..s * self.hop + m];
            let mean = chunk.iter().copied().sum::<T>() / T::from_usize_lossy(m);
            for k in 0..m {
                seg[k] = (chunk[k] - mean) * self.weights[k];
            }
            for (out, &w) in spectra.iter_mut().zip(&self.freqs) {
                // Rotating phasor with periodic exact resets to bound drift.
                let step = cx((w * self.spacing).cos(), -(w * self.spacing).sin());
                let mut ph = cx(T::one(), T::zero());
                let mut sum = cx(T::zero(), T::zero());
                for (k, &v) in seg.iter().enumerate() {
                    if k % 256 == 0 {
                        let a = -w * self.spacing * T::from_usize_lossy(k);
                        ph = cx(a.cos(), a.sin());
                    }
                    sum = sum + ph * v;
                    ph = ph * step;
                }
                *out = sum * self.spacing;
            }
            let get = |(i, conj): (usize, bool)| {
                if conj {
                    spectra[i].conj()
                } else {
                    spectra[i]
                }
            };
            for (a, pl) in acc.iter_mut().zip(&self.plan) {
                *a = *a + get(pl[0]) * get(pl[1]) * get(pl[2]).conj() / self.norm;
            }
        }
        let inv = T::one() / T::from_usize_lossy(nseg);
        Ok(acc.into_iter().map(|z| z * inv).collect())
    }

    /// Mean and standard errors across per-record averages.
    pub fn combine(&self, per_record: &[Vec<Complex<T>>], params: ParamsSnapshot<T>) -> LangevinBispectrum<T> {
        let npts = self.plan.len();
        let mut values = Vec::with_capacity(npts);
        let mut stderr_re = Vec::with_capacity(npts);
        let mut stderr_im = Vec::with_capacity(npts);
        for i in 0..npts {
            let re: Vec<T> = per_record.iter().map(|v| v[i].re).collect();
            let im: Vec<T> = per_record.iter().map(|v| v[i].im).collect();
            let (a, b) = (mean_stderr(&re), mean_stderr(&im));
            values.push(cx(a.mean, b.mean));
            stderr_re.push(a.stderr);
            stderr_im.push(b.stderr);
        }
        let uncertainty = stderr_re
            .iter()
            .zip(&stderr_im)
            .map(|(a, b)| (*a * *a + *b * *b).sqrt())
            .collect();
        LangevinBispectrum {
            surface: BispectrumSurface {
                grid: self.grid.clone(),
                values,
                source: Source::Langevin,
                params,
                uncertainty: Some(uncertainty),
            },
            stderr_re,
            stderr_im,
            records: per_record.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LangevinBispectrum<T> {
    /// Uncertainty is the combined standard error `sqrt(se_re^2 + se_im^2)`.
    pub surface: BispectrumSurface<T>,
    pub stderr_re: Vec<T>,
    pub stderr_im: Vec<T>,
    pub records: usize,
}

/// Bispectrum of the photon number from stored trajectories.
pub fn estimate_bispectrum<T: Real>(
    trajs: &[Trajectory<T>],
    grid: &FreqGrid2D<T>,
    segment_len: usize,
    window: Window,
) -> Result<LangevinBispectrum<T>> {
    let first = trajs
        .first()
        .ok_or_else(|| Error::InsufficientData("no trajectories".into()))?;
    let est = BispectrumEstimator::new(grid, first.dt, segment_len, window)?;
    let per: Vec<Vec<Complex<T>>> = trajs
        .par_iter()
        .map(|t| est.record_average(&t.photon_number()))
        .collect::<Result<_>>()?;
    Ok(est.combine(&per, first.params))
}

/// Classical-model bispectrum: `2 n_eff^3` times the thermal shape plus
/// `(2 n_th + 1)^2 n_dr` times the classical drive shape.
pub fn classical_bispectrum<T: Real>(p: &CavityParams<T>, w: FreqTriple<T>) -> T {
    let n_eff = effective_occupation(p.n_th);
    let unit = CavityParams {
        n_th: T::one(),
        ..*p
    };
    let shape = s_thermal(&unit, w) / thermal_prefactor(T::one());
    let two = T::lit(2.0);
    two * n_eff.powi(3) * shape
        + (two * p.n_th + T::one()).powi(2) * p.drive_photons() * s_drive_classical_shape(p, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n_traj: usize, total: f64) -> SdeConfig<f64> {
        SdeConfig::new(1.0, 0.01, total, n_traj, 7)
    }

    #[test]
    fn config_validation() {
        assert!(cfg(2, 10.0).validate(1.0).is_ok());
        assert!(SdeConfig { dt: 0.1, ..cfg(2, 10.0) }.validate(1.0).is_err());
        assert!(SdeConfig { burn_in: 5.0, ..cfg(2, 10.0) }.validate(1.0).is_err());
        assert!(SdeConfig { n_traj: 0, ..cfg(2, 10.0) }.validate(1.0).is_err());
        assert_eq!(cfg(1, 10.0).steps(), 1000);
        assert_eq!(cfg(1, 10.0).with_stride(4).recorded_len(), 250);
    }

    #[test]
    fn thermal_second_moments() {
        let p = CavityParams::<f64>::thermal(1.0, 2.0).unwrap();
        let trajs = simulate_driven(&p, &cfg(40, 200.0).with_stride(10)).unwrap();
        let abs2: Vec<f64> = trajs
            .iter()
            .map(|t| t.photon_number().iter().sum::<f64>() / t.len() as f64)
            .collect();
        let zz: Vec<(f64, f64)> = trajs
            .iter()
            .map(|t| match &t.samples {
                Samples::Amplitude(v) => {
                    let s: Complex<f64> = v.iter().map(|z| z * z).sum();
                    (s.re / v.len() as f64, s.im / v.len() as f64)
                }
                _ => unreachable!(),
            })
            .collect();
        let e = mean_stderr(&abs2);
        assert!((e.mean - 2.5).abs() < 3.0 * e.stderr, "{e:?}");
        let r = mean_stderr(&zz.iter().map(|v| v.0).collect::<Vec<_>>());
        let i = mean_stderr(&zz.iter().map(|v| v.1).collect::<Vec<_>>());
        assert!(r.mean.abs() < 3.0 * r.stderr && i.mean.abs() < 3.0 * i.stderr);
    }

    #[test]
    fn driven_mean_amplitude() {
        let p = CavityParams::<f64>::with_drive_photons(1.0, 2.0, 3.0, 1.0).unwrap();
        let c0 = driven_fixed_point(&p);
        assert!((c0.norm_sqr() - 3.0).abs() < 1e-12);
        let trajs = simulate_driven(&p, &cfg(20, 100.0).with_stride(10)).unwrap();
        let means: Vec<Complex<f64>> = trajs
            .iter()
            .map(|t| match &t.samples {
                Samples::Amplitude(v) => v.iter().sum::<Complex<f64>>() / v.len() as f64,
                _ => unreachable!(),
            })
            .collect();
        let re = mean_stderr(&means.iter().map(|z| z.re).collect::<Vec<_>>());
        let im = mean_stderr(&means.iter().map(|z| z.im).collect::<Vec<_>>());
        assert!((re.mean - c0.re).abs() < 3.0 * re.stderr, "{re:?} {c0}");
        assert!((im.mean - c0.im).abs() < 3.0 * im.stderr, "{im:?} {c0}");
    }

    #[test]
    fn seeds_are_deterministic_across_thread_counts() {
        let p = CavityParams::<f64>::with_drive_photons(1.0, 1.0, 1.0, 0.5).unwrap();
        let c = cfg(6, 5.0);
        let a = simulate_driven(&p, &c).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| simulate_driven(&p, &c).unwrap());
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        let other = simulate_driven(&p, &SdeConfig { seed: 8, ..c }).unwrap();
        assert_ne!(a[0], other[0]);
    }

    /// Stationary covariance of the two-quadrature model from the Lyapunov equation.
    fn lyapunov(sp: &SqueezedBathParams<f64>) -> (f64, f64, f64) {
        // A S + S A^T + D = 0 with A = [[-g, -d], [d, -g]], g = gamma / 2.
        let (g, d) = (sp.gamma / 2.0, sp.delta);
        let q = sp.gamma * (sp.n_cl + 0.5);
        let (dx, dp) = (q * (2.0 * sp.r).exp(), q * (-2.0 * sp.r).exp());
        // Unknowns (sxx, sxp, spp):
        // -2g sxx - 2d sxp + dx = 0
        // d sxx - 2g sxp - d spp = 0
        // 2d sxp - 2g spp + dp = 0
        let m = [[-2.0 * g, -2.0 * d, 0.0], [d, -2.0 * g, -d], [0.0, 2.0 * d, -2.0 * g]];
        let rhs = [-dx, 0.0, -dp];
        let det = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let d0 = det(m);
        let col = |k: usize| {
            let mut mm = m;
            for r in 0..3 {
                mm[r][k] = rhs[r];
            }
            det(mm) / d0
        };
        (col(0), col(1), col(2))
    }

    fn quadrature_variances(trajs: &[Trajectory<f64>]) -> (Estimate<f64>, Estimate<f64>) {
        let (vx, vp): (Vec<f64>, Vec<f64>) = trajs
            .iter()
            .map(|t| match &t.samples {
                Samples::Quadratures(v) => {
                    let n = v.len() as f64;
                    (v.iter().map(|q| q.0 * q.0).sum::<f64>() / n, v.iter().map(|q| q.1 * q.1).sum::<f64>() / n)
                }
                _ => unreachable!(),
            })
            .unzip();
        (mean_stderr(&vx), mean_stderr(&vp))
    }

    #[test]
    fn squeezed_unsqueezed_quadratures_are_alike() {
        let sp = SqueezedBathParams::<f64>::new(1.0, 0.0, 0.0, 0.5).unwrap();
        let trajs = simulate_squeezed(&sp, &cfg(40, 200.0).with_stride(10)).unwrap();
        let (x, p) = quadrature_variances(&trajs);
        let z = (x.mean - p.mean) / (x.stderr.powi(2) + p.stderr.powi(2)).sqrt();
        assert!(z.abs() < 3.0, "{x:?} {p:?}");
    }

    #[test]
    fn squeezed_variance_ratio_matches_lyapunov() {
        let sp = SqueezedBathParams::<f64>::new(1.0, 0.3, 0.5, 0.3).unwrap();
        let (sxx, _, spp) = lyapunov(&sp);
        let trajs = simulate_squeezed(&sp, &cfg(40, 200.0).with_stride(10)).unwrap();
        let (x, p) = quadrature_variances(&trajs);
        let ratio = x.mean / p.mean;
        let se = ratio * ((x.stderr / x.mean).powi(2) + (p.stderr / p.mean).powi(2)).sqrt();
        assert!((ratio - sxx / spp).abs() < 3.0 * se + 0.01 * ratio, "{ratio} vs {}", sxx / spp);
    }

    #[test]
    fn fast_damping_decorrelates() {
        let sp = SqueezedBathParams::<f64>::new(20.0, 0.0, 0.0, 0.5).unwrap();
        let c = SdeConfig::new(20.0, 0.0025, 20.0, 4, 3);
        let trajs = simulate_squeezed(&sp, &c).unwrap();
        for t in &trajs {
            let Samples::Quadratures(v) = &t.samples else { unreachable!() };
            let lag = 200; // 10 / gamma
            let n = (v.len() - lag) as f64;
            let c0 = v.iter().map(|q| q.0 * q.0).sum::<f64>() / v.len() as f64;
            let cl = v.windows(lag + 1).map(|w| w[0].0 * w[lag].0).sum::<f64>() / n;
            assert!((cl / c0).abs() < 0.3, "{}", cl / c0);
        }
    }

    #[test]
    fn gaussian_surrogate_has_no_third_cumulant() {
        let mut r = rng(11, 0);
        let trajs: Vec<Trajectory<f64>> = (0..30)
            .map(|_| Trajectory {
                samples: Samples::Quadratures(
                    (0..4000).map(|_| (normal::<f64>(&mut r) * 2.0, 0.0)).collect(),
                ),
                dt: 0.1,
                params: ParamsSnapshot::Squeezed(SqueezedBathParams::new(1.0, 0.0, 0.0, 0.0).unwrap()),
            })
            .collect();
        // photon number (x^2 + p^2)/2 of Gaussian x is chi-square, so test x directly instead.
        let xs: Vec<Vec<f64>> = trajs
            .iter()
            .map(|t| match &t.samples {
                Samples::Quadratures(v) => v.iter().map(|q| q.0).collect(),
                _ => unreachable!(),
            })
            .collect();
        let pairs = [(0.0, 0.0), (0.1, 0.3), (-0.2, 0.5)];
        let per: Vec<Vec<f64>> = xs.iter().map(|x| third_moment_single(x, 0.1, &pairs).unwrap()).collect();
        for e in combine_c3(&per, pairs.len()) {
            assert!(e.mean.abs() < 3.0 * e.stderr, "{e:?}");
        }
        assert!(third_moment_single(&xs[0], 0.1, &[(0.15, 0.0)]).is_err());
        assert!(third_moment_single(&xs[0][..3], 0.1, &[(0.5, 0.0)]).is_err());
    }

    #[test]
    fn estimator_symmetry_and_nyquist() {
        let x: Vec<f64> = (0..512).map(|k| ((k * 37 % 101) as f64).sin() + 0.1 * (k as f64 * 0.3).cos()).collect();
        let grid = FreqGrid2D::new(vec![-1.0, -0.5, 0.5, 1.0], vec![-0.7, 0.7]).unwrap();
        let est = BispectrumEstimator::new(&grid, 0.5, 128, Window::Hann).unwrap();
        let v = est.record_average(&x).unwrap();
        // (w1, w2) at (i, j) and (-w1, -w2) at (3 - i, 1 - j).
        for i in 0..4 {
            for j in 0..2 {
                assert_eq!(v[i * 2 + j], v[(3 - i) * 2 + (1 - j)].conj());
            }
        }
        assert_eq!(est.segments_in(512), 7);
        assert!(BispectrumEstimator::new(&FreqGrid2D::single(6.0, 1.0), 0.5, 128, Window::Hann).is_err());
        assert!(est.record_average(&x[..100]).is_err());
    }

    #[test]
    fn estimator_recovers_known_bispectrum() {
        // x_k = e_k + b (e_{k-1}^2 - 1) with unit white noise e. Nonzero third moments:
        // E[e_i e_i u_{i+1}] = 2b for each placement of u, and E[u^3] = 8 b^3 with u = e^2 - 1.
        let b = 0.5;
        let mut r = rng(5, 1);
        let records: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let e: Vec<f64> = (0..4097).map(|_| normal::<f64>(&mut r)).collect();
                (1..4097).map(|k| e[k] + b * (e[k - 1] * e[k - 1] - 1.0)).collect()
            })
            .collect();
        let (w1, w2) = (0.5f64, 1.0f64);
        let grid = FreqGrid2D::single(w1, w2);
        let est = BispectrumEstimator::new(&grid, 1.0, 256, Window::Rectangular).unwrap();
        let per: Vec<Vec<Complex<f64>>> = records.iter().map(|x| est.record_average(x).unwrap()).collect();
        let snap = ParamsSnapshot::Squeezed(SqueezedBathParams::new(1.0, 0.0, 0.0, 0.0).unwrap());
        let out = est.combine(&per, snap);
        let ph = |a: f64| Complex::new(a.cos(), a.sin());
        let exact = (ph(w1 + w2) + ph(-w1) + ph(-w2)) * (2.0 * b) + 8.0 * b * b * b;
        let v = out.surface.values[0];
        let tol = 0.03 * exact.norm();
        assert!((v.re - exact.re).abs() < 3.0 * out.stderr_re[0] + tol, "{v} vs {exact} ({})", out.stderr_re[0]);
        assert!((v.im - exact.im).abs() < 3.0 * out.stderr_im[0] + tol, "{v} vs {exact} ({})", out.stderr_im[0]);
    }

    #[test]
    fn classical_bispectrum_reduces_to_parts() {
        let p = CavityParams::<f64>::with_drive_photons(1.0, 0.0, 0.0, 3.0).unwrap();
        let w = FreqTriple::new(0.4, -1.1);
        let q = s_thermal(&p, w);
        // 2 n_eff^3 versus n(n+1)(2n+1) = 2 n_eff^3 - n_eff / 2
        let ne = 3.5f64;
        assert!((classical_bispectrum(&p, w) - q * 2.0 * ne.powi(3) / (2.0 * ne.powi(3) - ne / 2.0)).abs() < 1e-12);
    }
}

//! Parameter types, filter functions and frequency grids.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::{Complex, Real};

/// Driven-damped cavity mode coupled to a thermal bath.
///
/// Frequencies and rates share one unit (the library reports everything in units of `gamma`
/// when `gamma = 1`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityParams<T> {
    pub gamma: T,
    pub delta: T,
    pub drive_re: T,
    pub drive_im: T,
    pub n_th: T,
}

impl<T: Real> CavityParams<T> {
    pub fn new(gamma: T, delta: T, drive: Complex<T>, n_th: T) -> Result<Self> {
        let p = Self {
            gamma,
            delta,
            drive_re: drive.re,
            drive_im: drive.im,
            n_th,
        };
        p.validate()?;
        Ok(p)
    }

    /// Real drive amplitude chosen so that the coherent intracavity population equals `n_dr`.
    pub fn with_drive_photons(gamma: T, delta: T, n_dr: T, n_th: T) -> Result<Self> {
        if !(n_dr >= T::zero()) {
            return invalid(format!("n_dr must be >= 0, got {n_dr}"));
        }
        let four = T::lit(4.0);
        let f = (n_dr * (gamma * gamma + four * delta * delta) / four).sqrt();
        Self::new(gamma, delta, Complex::new(f, T::zero()), n_th)
    }

    pub fn thermal(gamma: T, n_th: T) -> Result<Self> {
        Self::new(gamma, T::zero(), Complex::new(T::zero(), T::zero()), n_th)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.gamma, self.delta, self.drive_re, self.drive_im, self.n_th];
        if all.iter().any(|x| !x.is_finite()) {
            return invalid("cavity parameters must be finite");
        }
        if !(self.gamma > T::zero()) {
            return invalid(format!("gamma must be > 0, got {}", self.gamma));
        }
        if !(self.n_th >= T::zero()) {
            return invalid(format!("n_th must be >= 0, got {}", self.n_th));
        }
        Ok(())
    }

    pub fn drive(&self) -> Complex<T> {
        Complex::new(self.drive_re, self.drive_im)
    }

    pub fn drive_photons(&self) -> T {
        intracavity_drive_photons(self)
    }

    /// Same parameters with the detuning sign flipped.
    pub fn mirrored(&self) -> Self {
        Self {
            delta: -self.delta,
            ..*self
        }
    }
}

/// Coherent intracavity photon number `4|f|^2 / (gamma^2 + 4 delta^2)`.
pub fn intracavity_drive_photons<T: Real>(p: &CavityParams<T>) -> T {
    let four = T::lit(4.0);
    four * (p.drive_re * p.drive_re + p.drive_im * p.drive_im)
        / (p.gamma * p.gamma + four * p.delta * p.delta)
}

/// Undriven mode damped through `c cosh r + c† sinh r` by a bath of occupation `n_cl`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezedBathParams<T> {
    pub gamma: T,
    pub delta: T,
    pub r: T,
    pub n_cl: T,
}

impl<T: Real> SqueezedBathParams<T> {
    pub fn new(gamma: T, delta: T, r: T, n_cl: T) -> Result<Self> {
        let p = Self {
            gamma,
            delta,
            r,
            n_cl,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if [self.gamma, self.delta, self.r, self.n_cl]
            .iter()
            .any(|x| !x.is_finite())
        {
            return invalid("squeezed-bath parameters must be finite");
        }
        if !(self.gamma > T::zero()) {
            return invalid(format!("gamma must be > 0, got {}", self.gamma));
        }
        if !(self.n_cl >= T::zero()) {
            return invalid(format!("n_cl must be >= 0, got {}", self.n_cl));
        }
        Ok(())
    }

    /// Steady-state mean photon number `(n_cl + 1/2) cosh 2r - 1/2` at zero detuning;
    /// used only to size Fock truncations.
    pub fn photon_scale(&self) -> T {
        let half = T::lit(0.5);
        (self.n_cl + half) * (self.r + self.r).cosh() - half
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Sine,
    Cosine,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Harmonic<T> {
    pub shape: Shape,
    pub frequency: T,
    pub weight: T,
}

/// Qubit-noise coupling `F(t) = lambda * sum_k weight_k * shape_k(frequency_k t)` on `[0, t_f]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec<T> {
    lambda: T,
    components: Vec<Harmonic<T>>,
    t_f: T,
}

impl<T: Real> FilterSpec<T> {
    pub fn new(lambda: T, components: Vec<Harmonic<T>>, t_f: T) -> Result<Self> {
        if !lambda.is_finite() {
            return invalid("lambda must be finite");
        }
        if !(t_f > T::zero()) || !t_f.is_finite() {
            return invalid(format!("t_f must be finite and > 0, got {t_f}"));
        }
        for c in &components {
            if !(c.frequency >= T::zero()) || !c.frequency.is_finite() || !c.weight.is_finite() {
                return invalid("filter components need finite frequency >= 0 and finite weight");
            }
        }
        Ok(Self {
            lambda,
            components,
            t_f,
        })
    }

    /// `lambda * (sin 2 omega t + cos omega t)`.
    pub fn two_tone(lambda: T, omega: T, t_f: T) -> Result<Self> {
        let one = T::one();
        Self::new(
            lambda,
            vec![
                Harmonic {
                    shape: Shape::Sine,
                    frequency: omega + omega,
                    weight: one,
                },
                Harmonic {
                    shape: Shape::Cosine,
                    frequency: omega,
                    weight: one,
                },
            ],
            t_f,
        )
    }

    pub fn constant(lambda: T, t_f: T) -> Result<Self> {
        Self::new(
            lambda,
            vec![Harmonic {
                shape: Shape::Cosine,
                frequency: T::zero(),
                weight: T::one(),
            }],
            t_f,
        )
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn t_f(&self) -> T {
        self.t_f
    }

    pub fn components(&self) -> &[Harmonic<T>] {
        &self.components
    }

    pub fn with_lambda(&self, lambda: T) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    pub fn with_t_f(&self, t_f: T) -> Result<Self> {
        Self::new(self.lambda, self.components.clone(), t_f)
    }

    /// `F -> -F`.
    pub fn negated(&self) -> Self {
        self.with_lambda(-self.lambda)
    }

    /// Smallest common period of all non-constant components, if the frequencies are
    /// commensurate integer multiples of the lowest one.
    pub fn fundamental_period(&self) -> Option<T> {
        let lowest = self
            .components
            .iter()
            .map(|c| c.frequency)
            .filter(|w| *w > T::zero())
            .fold(None, |acc: Option<T>, w| Some(acc.map_or(w, |a| a.min(w))))?;
        let commensurate = self.components.iter().all(|c| {
            let ratio = c.frequency / lowest;
            (ratio - ratio.round()).abs() < T::lit(1e-9)
        });
        commensurate.then(|| T::TAU() / lowest)
    }

    /// Unit-strength shape `F(t) / lambda`, without range checks.
    #[inline]
    pub fn unit_shape(&self, t: T) -> T {
        self.components
            .iter()
            .map(|c| {
                let arg = c.frequency * t;
                c.weight
                    * match c.shape {
                        Shape::Sine => arg.sin(),
                        Shape::Cosine => arg.cos(),
                    }
            })
            .sum()
    }
}

/// Evaluates `F(t)`; rejects `t` outside `[0, t_f]`.
pub fn eval_filter<T: Real>(fs: &FilterSpec<T>, t: T) -> Result<T> {
    if !(t >= T::zero() && t <= fs.t_f) {
        return invalid(format!("t = {t} outside [0, {}]", fs.t_f));
    }
    Ok(fs.lambda * fs.unit_shape(t))
}

/// Symmetric step: 1 above zero, 0 below, 1/2 at zero.
pub fn heaviside_sym<T: Real>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        T::zero()
    } else {
        T::lit(0.5)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreqGrid2D<T> {
    omega1: Vec<T>,
    omega2: Vec<T>,
}

impl<T: Real> FreqGrid2D<T> {
    pub fn new(omega1: Vec<T>, omega2: Vec<T>) -> Result<Self> {
        for (name, axis) in [("omega1", &omega1), ("omega2", &omega2)] {
            if axis.is_empty() {
                return invalid(format!("{name} axis is empty"));
            }
            if axis.iter().any(|w| !w.is_finite()) {
                return invalid(format!("{name} axis has non-finite values"));
            }
            if axis.windows(2).any(|w| !(w[1] > w[0])) {
                return invalid(format!("{name} axis is not strictly ascending"));
            }
        }
        Ok(Self { omega1, omega2 })
    }

    /// Square grid with `count` inclusive points on `[min, max]` along both axes.
    pub fn square(min: T, max: T, count: usize) -> Result<Self> {
        let axis = linspace(min, max, count)?;
        Self::new(axis.clone(), axis)
    }

    pub fn single(omega1: T, omega2: T) -> Self {
        Self {
            omega1: vec![omega1],
            omega2: vec![omega2],
        }
    }

    pub fn omega1(&self) -> &[T] {
        &self.omega1
    }

    pub fn omega2(&self) -> &[T] {
        &self.omega2
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.omega1.len(), self.omega2.len())
    }

    pub fn len(&self) -> usize {
        self.omega1.len() * self.omega2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major iterator over `(omega1, omega2)`.
    pub fn points(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.omega1
            .iter()
            .flat_map(move |&w1| self.omega2.iter().map(move |&w2| (w1, w2)))
    }
}

/// `count` evenly spaced values on `[min, max]`, endpoints included.
pub fn linspace<T: Real>(min: T, max: T, count: usize) -> Result<Vec<T>> {
    if !min.is_finite() || !max.is_finite() {
        return invalid("range endpoints must be finite");
    }
    match count {
        0 => invalid("count must be >= 1"),
        1 if min == max => Ok(vec![min]),
        1 => invalid("count = 1 needs min == max"),
        _ if !(max > min) => invalid(format!("need max > min, got {min}:{max}")),
        _ => {
            let n = T::from_usize_lossy(count - 1);
            Ok((0..count)
                .map(|k| {
                    if k + 1 == count {
                        max
                    } else {
                        min + (max - min) * T::from_usize_lossy(k) / n
                    }
                })
                .collect())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    AnalyticThermal,
    AnalyticDrive,
    AnalyticTotal,
    Lindblad,
    Langevin,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ParamsSnapshot<T> {
    Cavity(CavityParams<T>),
    Squeezed(SqueezedBathParams<T>),
}

/// Complex bispectrum sampled on a frequency grid (row = `omega1` index).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BispectrumSurface<T> {
    pub grid: FreqGrid2D<T>,
    pub values: Vec<Complex<T>>,
    pub source: Source,
    pub params: ParamsSnapshot<T>,
    /// Per-point error bound or standard error, when the source provides one.
    pub uncertainty: Option<Vec<T>>,
}

impl<T: Real> BispectrumSurface<T> {
    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.values[i * self.grid.omega2.len() + j]
    }

    pub fn uncertainty_at(&self, i: usize, j: usize) -> Option<T> {
        self.uncertainty
            .as_ref()
            .map(|u| u[i * self.grid.omega2.len() + j])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drive_photons_examples() {
        let p = CavityParams::<f64>::new(1.0, 0.0, Complex::new(0.5, 0.0), 0.0).unwrap();
        assert_eq!(intracavity_drive_photons(&p), 1.0);
        let p = CavityParams::<f64>::new(1.0, 3.7, Complex::new(0.0, 0.0), 0.0).unwrap();
        assert_eq!(intracavity_drive_photons(&p), 0.0);
        let p = CavityParams::<f64>::new(1.0, 0.5, Complex::new(0.5, 0.0), 0.0).unwrap();
        assert_eq!(intracavity_drive_photons(&p), 0.5);
    }

    #[test]
    fn drive_photons_roundtrip() {
        let p = CavityParams::<f64>::with_drive_photons(1.0, 2.5, 0.7, 0.0).unwrap();
        assert!((p.drive_photons() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(CavityParams::<f64>::new(0.0, 0.0, Complex::new(0.0, 0.0), 0.0).is_err());
        assert!(CavityParams::<f64>::new(1.0, 0.0, Complex::new(0.0, 0.0), -1.0).is_err());
        assert!(CavityParams::<f64>::new(1.0, f64::NAN, Complex::new(0.0, 0.0), 0.0).is_err());
        assert!(SqueezedBathParams::<f64>::new(1.0, 0.0, f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn filter_examples() {
        let fs = FilterSpec::<f64>::two_tone(1.0, 1.0, 10.0).unwrap();
        assert_eq!(eval_filter(&fs, 0.0).unwrap(), 1.0);
        let c = FilterSpec::<f64>::constant(2.0, 5.0).unwrap();
        assert_eq!(eval_filter(&c, 3.3).unwrap(), 2.0);
        let fs = FilterSpec::<f64>::two_tone(0.1, 2.0, 10.0).unwrap();
        let v = eval_filter(&fs, std::f64::consts::FRAC_PI_4).unwrap();
        assert!(v.abs() < 1e-16);
        assert!(eval_filter(&fs, -0.1).is_err());
        assert!(eval_filter(&fs, 10.5).is_err());
    }

    #[test]
    fn filter_period() {
        let fs = FilterSpec::<f64>::two_tone(1.0, 3.0, 10.0).unwrap();
        let t = fs.fundamental_period().unwrap();
        assert!((t - std::f64::consts::TAU / 3.0).abs() < 1e-15);
        assert!(FilterSpec::<f64>::constant(1.0, 1.0).unwrap().fundamental_period().is_none());
    }

    #[test]
    fn heaviside_values() {
        assert_eq!(heaviside_sym(3.2), 1.0);
        assert_eq!(heaviside_sym(-0.1), 0.0);
        assert_eq!(heaviside_sym(0.0), 0.5);
        assert_eq!(heaviside_sym(-0.0), 0.5);
    }

    #[test]
    fn grid_validation() {
        assert!(FreqGrid2D::new(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(FreqGrid2D::new(vec![], vec![1.0]).is_err());
        let g = FreqGrid2D::square(-1.0, 1.0, 3).unwrap();
        assert_eq!(g.omega1(), &[-1.0, 0.0, 1.0]);
        assert_eq!(g.points().count(), 9);
        assert!(linspace(1.0, 0.0, 4).is_err());
        assert_eq!(linspace(2.0, 2.0, 1).unwrap(), vec![2.0]);
    }

    #[test]
    fn f32_params() {
        let p = CavityParams::<f32>::with_drive_photons(1.0, 0.0, 1.0, 0.0).unwrap();
        assert!((p.drive_photons() - 1.0).abs() < 1e-6);
    }
}

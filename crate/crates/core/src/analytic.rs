//! Closed-form cumulants and bispectra of the cavity photon number.

use rayon::prelude::*;

use crate::model::{
    intracavity_drive_photons, BispectrumSurface, CavityParams, FreqGrid2D, ParamsSnapshot,
    Source, SqueezedBathParams,
};
use crate::scalar::{cx, re, Complex, Real};

/// Frequency triple with `omega3 = -omega1 - omega2` enforced by construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreqTriple<T> {
    omega1: T,
    omega2: T,
}

impl<T: Real> FreqTriple<T> {
    pub fn new(omega1: T, omega2: T) -> Self {
        Self { omega1, omega2 }
    }

    pub fn omega1(&self) -> T {
        self.omega1
    }

    pub fn omega2(&self) -> T {
        self.omega2
    }

    pub fn omega3(&self) -> T {
        -self.omega1 - self.omega2
    }

    pub fn as_array(&self) -> [T; 3] {
        [self.omega1, self.omega2, self.omega3()]
    }

    /// The pair obtained by moving the components `(a, b)` of the triple into the first two slots.
    pub fn permuted(&self, a: usize, b: usize) -> Self {
        let w = self.as_array();
        Self::new(w[a], w[b])
    }
}

/// Ordered index pairs `(alpha, beta)` with `alpha != beta`.
const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)];

/// `n (n + 1) (2n + 1)`.
pub fn thermal_prefactor<T: Real>(n: T) -> T {
    n * (n + T::one()) * (n + n + T::one())
}

/// Bispectrum of the undriven thermal fluctuations.
pub fn s_thermal<T: Real>(p: &CavityParams<T>, w: FreqTriple<T>) -> T {
    let g2 = p.gamma * p.gamma;
    let ws = w.as_array();
    let sum_sq: T = ws.iter().map(|x| *x * *x).sum();
    let den: T = ws.iter().fold(T::one(), |acc, x| acc * (g2 + *x * *x));
    thermal_prefactor(p.n_th) * g2 * (T::lit(6.0) * g2 + sum_sq) / den
}

/// Temperature-scaled classical shape of the drive bispectrum (non-negative).
pub fn s_drive_classical_shape<T: Real>(p: &CavityParams<T>, w: FreqTriple<T>) -> T {
    let four = T::lit(4.0);
    let ws = w.as_array();
    let lorentz = |x: T| {
        let y = x / p.gamma;
        T::one() + four * y * y
    };
    let sum: T = PAIRS
        .iter()
        .map(|&(a, b)| T::one() / (lorentz(ws[a] + p.delta) * lorentz(ws[b] - p.delta)))
        .sum();
    four / (p.gamma * p.gamma) * sum
}

/// Temperature-independent quantum correction to the drive bispectrum.
pub fn s_drive_quantum_shape<T: Real>(p: &CavityParams<T>, w: FreqTriple<T>) -> Complex<T> {
    let ws = w.as_array();
    let half_g = re(p.gamma * T::lit(0.5));
    let g = re(p.gamma);
    let d2 = re(p.delta * p.delta);
    let sum: Complex<T> = PAIRS
        .iter()
        .map(|&(a, b)| {
            let num = half_g + cx(T::zero(), ws[b]);
            let den = (g - cx(T::zero(), ws[a])) * (num * num + d2);
            num / den
        })
        .fold(re(T::zero()), |acc, x| acc + x);
    sum * re(T::lit(-0.5))
}

pub fn s_drive<T: Real>(p: &CavityParams<T>, w: FreqTriple<T>) -> Complex<T> {
    let n_dr = intracavity_drive_photons(p);
    let m = p.n_th + p.n_th + T::one();
    (re(m * m * s_drive_classical_shape(p, w)) + s_drive_quantum_shape(p, w)) * re(n_dr)
}

pub fn s_total<T: Real>(p: &CavityParams<T>, w: FreqTriple<T>) -> Complex<T> {
    re(s_thermal(p, w)) + s_drive(p, w)
}

/// `S_dr(0, 0) / n_dr`, defined also at zero drive.
pub fn zero_frequency_drive_ratio<T: Real>(p: &CavityParams<T>) -> T {
    let w = FreqTriple::new(T::zero(), T::zero());
    let m = p.n_th + p.n_th + T::one();
    m * m * s_drive_classical_shape(p, w) + s_drive_quantum_shape(p, w).re
}

/// The three spectral building blocks, abstracted so validation checks can be run against
/// deliberately corrupted variants.
pub trait SpectrumFormulas<T: Real>: Sync {
    fn thermal(&self, p: &CavityParams<T>, w: FreqTriple<T>) -> T;
    fn classical_shape(&self, p: &CavityParams<T>, w: FreqTriple<T>) -> T;
    fn quantum_shape(&self, p: &CavityParams<T>, w: FreqTriple<T>) -> Complex<T>;

    fn total(&self, p: &CavityParams<T>, w: FreqTriple<T>) -> Complex<T> {
        let n_dr = intracavity_drive_photons(p);
        let m = p.n_th + p.n_th + T::one();
        re(self.thermal(p, w))
            + (re(m * m * self.classical_shape(p, w)) + self.quantum_shape(p, w)) * re(n_dr)
    }
}

/// The production formulas.
#[derive(Clone, Copy, Debug, Default)]
pub struct ClosedForm;

impl<T: Real> SpectrumFormulas<T> for ClosedForm {
    fn thermal(&self, p: &CavityParams<T>, w: FreqTriple<T>) -> T {
        s_thermal(p, w)
    }

    fn classical_shape(&self, p: &CavityParams<T>, w: FreqTriple<T>) -> T {
        s_drive_classical_shape(p, w)
    }

    fn quantum_shape(&self, p: &CavityParams<T>, w: FreqTriple<T>) -> Complex<T> {
        s_drive_quantum_shape(p, w)
    }

    fn total(&self, p: &CavityParams<T>, w: FreqTriple<T>) -> Complex<T> {
        s_total(p, w)
    }
}

pub fn c_thermal_1<T: Real>(p: &CavityParams<T>) -> T {
    p.n_th
}

pub fn c_thermal_2<T: Real>(p: &CavityParams<T>, tau: T) -> T {
    p.n_th * (p.n_th + T::one()) * (-p.gamma * tau.abs()).exp()
}

pub fn c_thermal_3<T: Real>(p: &CavityParams<T>, t1: T, t2: T, t3: T) -> T {
    let s = (t1 - t2).abs() + (t2 - t3).abs() + (t1 - t3).abs();
    thermal_prefactor(p.n_th) * (-p.gamma * T::lit(0.5) * s).exp()
}

/// Third cumulant `C(0, t, t)` of the photon number for a squeezed bath.
pub fn c3_squeezed_equal_time<T: Real>(sp: &SqueezedBathParams<T>, t: T) -> T {
    let one = T::one();
    let two_r = sp.r + sp.r;
    let m = sp.n_cl + sp.n_cl + one;
    let f = (-sp.gamma * t.abs()).exp() * two_r.cosh() / T::lit(4.0);
    let g2 = sp.gamma * sp.gamma;
    let sh = two_r.sinh();
    let ch = two_r.cosh();
    let ccl = ch * ch
        + g2 * sh * sh / (g2 + T::lit(4.0) * sp.delta * sp.delta)
            * (one + T::lit(2.0) * (sp.delta * t + sp.delta * t.abs()).cos());
    m * m * m * f * (ccl - one / (m * m))
}

/// Classical-limit drive cumulant `C_dr(0, t, t)` divided by `n_dr (2 n_th + 1)^2`:
/// `e^{-gamma|t|}/2 + e^{-gamma|t|/2} cos(delta t)`. Even in `t`.
pub fn classical_drive_skewness_shape<T: Real>(p: &CavityParams<T>, t: T) -> T {
    let a = (-p.gamma * t.abs()).exp();
    let b = (-p.gamma * t.abs() * T::lit(0.5)).exp();
    a * T::lit(0.5) + b * (p.delta * t).cos()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnalyticPart {
    Thermal,
    Drive,
    Total,
}

impl AnalyticPart {
    pub fn source(self) -> Source {
        match self {
            AnalyticPart::Thermal => Source::AnalyticThermal,
            AnalyticPart::Drive => Source::AnalyticDrive,
            AnalyticPart::Total => Source::AnalyticTotal,
        }
    }
}

pub fn eval_surface<T: Real>(
    p: &CavityParams<T>,
    grid: &FreqGrid2D<T>,
    which: AnalyticPart,
) -> BispectrumSurface<T> {
    let w2 = grid.omega2();
    let values: Vec<Complex<T>> = grid
        .omega1()
        .par_iter()
        .flat_map_iter(|&a| {
            w2.iter().map(move |&b| {
                let w = FreqTriple::new(a, b);
                match which {
                    AnalyticPart::Thermal => re(s_thermal(p, w)),
                    AnalyticPart::Drive => s_drive(p, w),
                    AnalyticPart::Total => s_total(p, w),
                }
            })
        })
        .collect();
    BispectrumSurface {
        grid: grid.clone(),
        values,
        source: which.source(),
        params: ParamsSnapshot::Cavity(*p),
        uncertainty: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn thermal(n: f64) -> CavityParams<f64> {
        CavityParams::<f64>::thermal(1.0, n).unwrap()
    }

    #[test]
    fn thermal_values() {
        let w0 = FreqTriple::new(0.0, 0.0);
        assert_eq!(s_thermal(&thermal(0.0), FreqTriple::new(0.3, 1.2)), 0.0);
        assert_eq!(s_thermal(&thermal(1.0), w0), 36.0);
        // (1, -1, 0): 6 * (6 + 2) / (2 * 2 * 1)
        assert_eq!(s_thermal(&thermal(1.0), FreqTriple::new(1.0, -1.0)), 12.0);
    }

    #[test]
    fn classical_shape_values() {
        let w0 = FreqTriple::new(0.0, 0.0);
        let p = CavityParams::<f64>::with_drive_photons(1.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(s_drive_classical_shape(&p, w0), 24.0);
        let p1 = CavityParams::<f64>::with_drive_photons(1.0, 1.0, 1.0, 0.0).unwrap();
        assert!((s_drive_classical_shape(&p1, w0) - 0.96).abs() < 1e-15);
        let far = CavityParams::<f64>::with_drive_photons(1.0, 1e8, 1.0, 0.0).unwrap();
        assert!(s_drive_classical_shape(&far, FreqTriple::new(0.4, -2.0)) < 1e-30);
    }

    #[test]
    fn quantum_shape_values() {
        let w0 = FreqTriple::new(0.0, 0.0);
        let p = CavityParams::<f64>::with_drive_photons(1.0, 0.0, 1.0, 0.0).unwrap();
        let q = s_drive_quantum_shape(&p, w0);
        assert_eq!(q, Complex::new(-6.0, 0.0));
        for delta in [0.3, 1.0, 7.0] {
            let p = CavityParams::<f64>::with_drive_photons(1.0, delta, 1.0, 0.0).unwrap();
            assert_eq!(s_drive_quantum_shape(&p, w0).im, 0.0);
        }
        let p = CavityParams::<f64>::with_drive_photons(1.0, 1.0, 1.0, 0.0).unwrap();
        let a = s_drive_quantum_shape(&p, FreqTriple::new(1.0, 0.5));
        let b = s_drive_quantum_shape(&p, FreqTriple::new(-1.0, -0.5));
        assert!((a - b.conj()).norm() < 1e-15);
        // Frozen from an independent mpmath evaluation of the six-term sum.
        assert!((a.re - -0.856_108_597_285_067_9).abs() < 1e-13, "{a}");
        assert!((a.im - -0.621_719_457_013_574_7).abs() < 1e-13, "{a}");
    }

    #[test]
    fn drive_values() {
        let w0 = FreqTriple::new(0.0, 0.0);
        let p = CavityParams::<f64>::with_drive_photons(1.0, 0.0, 1.0, 0.0).unwrap();
        assert!((s_drive(&p, w0) - Complex::new(18.0, 0.0)).norm() < 1e-13);
        let undriven = CavityParams::<f64>::thermal(1.0, 2.0).unwrap();
        assert_eq!(s_drive(&undriven, FreqTriple::new(0.1, 0.7)), Complex::new(0.0, 0.0));
        assert_eq!(
            s_total(&undriven, FreqTriple::new(0.1, 0.7)).re,
            s_thermal(&undriven, FreqTriple::new(0.1, 0.7))
        );
    }

    #[test]
    fn classical_limit_ratio() {
        let w = FreqTriple::new(0.4, -1.3);
        let p = CavityParams::<f64>::with_drive_photons(1.0, 2.0, 1.0, 1e5).unwrap();
        let ratio = s_drive(&p, w) / (1.0 * (2.0 * 1e5 + 1.0f64).powi(2));
        assert!((ratio.re - s_drive_classical_shape(&p, w)).abs() < 1e-9);
        assert!(ratio.im.abs() < 1e-9);
    }

    #[test]
    fn zero_frequency_sign_change() {
        // n_th = 0: 6/(1+4d^2) * (4/(1+4d^2) - 1), zero at |delta| = sqrt(3)/2.
        let crit = 3f64.sqrt() / 2.0;
        for (delta, sign) in [(0.0, 1.0), (crit - 0.01, 1.0), (crit + 0.01, -1.0), (10.0, -1.0)] {
            let p = CavityParams::<f64>::with_drive_photons(1.0, delta, 1.0, 0.0).unwrap();
            let v = zero_frequency_drive_ratio(&p);
            let x = 1.0 + 4.0 * delta * delta;
            assert!((v - 6.0 / x * (4.0 / x - 1.0)).abs() < 1e-13);
            assert_eq!(v.signum(), sign);
        }
        let p = CavityParams::<f64>::with_drive_photons(1.0, crit, 1.0, 0.0).unwrap();
        assert!(zero_frequency_drive_ratio(&p).abs() < 1e-14);
    }

    #[test]
    fn time_domain_thermal() {
        let p = thermal(1.0);
        assert_eq!(c_thermal_1(&p), 1.0);
        assert_eq!(c_thermal_2(&p, 0.0), 2.0);
        assert_eq!(c_thermal_3(&thermal(0.0), 0.1, 2.0, -1.0), 0.0);
        assert_eq!(c_thermal_3(&p, 0.7, 0.7, 0.7), 6.0);
        assert!((c_thermal_3(&p, 0.0, 1.0, 1.0) - 6.0 * (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn squeezed_values() {
        let sp = SqueezedBathParams::<f64>::new(1.0, 0.7, 0.0, 1.0).unwrap();
        assert!((c3_squeezed_equal_time(&sp, 1.0) - 6.0 * (-1.0f64).exp()).abs() < 1e-15);
        let sp = SqueezedBathParams::<f64>::new(1.0, 1.0, 0.5, 0.3).unwrap();
        let t = 0.8;
        assert!((c3_squeezed_equal_time(&sp, t) - c3_squeezed_equal_time(&sp, -t)).abs() > 1e-3);
        let sp0 = SqueezedBathParams::<f64>::new(1.0, 0.0, 0.5, 0.3).unwrap();
        for t in [0.1, 0.9, 2.5] {
            assert_eq!(c3_squeezed_equal_time(&sp0, t), c3_squeezed_equal_time(&sp0, -t));
        }
    }

    #[test]
    fn surface_examples() {
        let p = thermal(1.0);
        let s = eval_surface(&p, &FreqGrid2D::single(0.0, 0.0), AnalyticPart::Thermal);
        assert_eq!(s.values, vec![Complex::new(36.0, 0.0)]);
        let quiet = thermal(0.0);
        let grid = FreqGrid2D::square(-2.0, 2.0, 9).unwrap();
        let s = eval_surface(&quiet, &grid, AnalyticPart::Total);
        assert!(s.values.iter().all(|v| *v == Complex::new(0.0, 0.0)));
        let p = CavityParams::<f64>::with_drive_photons(1.0, 1.5, 0.8, 0.3).unwrap();
        let s = eval_surface(&p, &grid, AnalyticPart::Total);
        for i in 0..9 {
            for j in 0..9 {
                let a = s.get(i, j);
                let b = s.get(8 - i, 8 - j);
                assert!((a - b.conj()).norm() <= 1e-12 * a.norm());
            }
        }
    }

    #[test]
    fn quantum_limit_has_negative_region() {
        let p = CavityParams::<f64>::with_drive_photons(1.0, 10.0, 1.0, 0.0).unwrap();
        let grid = FreqGrid2D::square(-15.0, 15.0, 61).unwrap();
        let s = eval_surface(&p, &grid, AnalyticPart::Total);
        let min = s.values.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
        assert!(min < 0.0);
    }

    #[test]
    fn generic_over_f32() {
        let p = CavityParams::<f32>::thermal(1.0, 1.0).unwrap();
        assert!((s_thermal(&p, FreqTriple::new(0.0, 0.0)) - 36.0).abs() < 1e-4);
    }
}

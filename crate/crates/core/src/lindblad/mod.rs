//! Truncated-Fock master-equation oracle: Liouvillian, steady state, multi-time correlators
//! by quantum regression, and a numerically transformed bispectrum.
//!
//! Density matrices are vectorized column-major (`vec[i + j * dim] = rho[i, j]`).

mod commutator;
mod correlator;
pub mod linalg;
mod spectrum;

pub use commutator::{linear_commutator_check, CommutatorReport};
pub use correlator::{
    equal_time_terms, keldysh_c2, keldysh_c3, keldysh_c3_kernel_sum, ordered_moment, three_point,
    EqualTimeTerms, OrderedCorrelator, Placement,
};
pub use spectrum::{oracle_bispectrum, LagTable, OracleBispectrum};

use ndarray::Array2;

use crate::error::{invalid, Error, Result};
use crate::model::{CavityParams, ParamsSnapshot, SqueezedBathParams};
use crate::scalar::{cx, re, Complex, Real};
use linalg::{BandedLu, Csr, ExpAction};

/// Largest tolerated population of the top Fock level.
pub const LEAKAGE_THRESHOLD: f64 = 1e-8;

const MAX_AUTO_DIM: usize = 200;

type Triplets<T> = Vec<(usize, usize, Complex<T>)>;

/// Immutable truncated-Fock model with its steady state; shareable across threads.
#[derive(Clone, Debug)]
pub struct FockWorkspace<T> {
    dim: usize,
    annihilation: Array2<Complex<T>>,
    number: Array2<Complex<T>>,
    liouvillian: Csr<T>,
    liouvillian_t: Csr<T>,
    norm: T,
    steady_state: Array2<Complex<T>>,
    mean_number: T,
    params: ParamsSnapshot<T>,
    squeezed: bool,
}

/// Sparse `dim x dim` operator as triplets.
fn lowering<T: Real>(dim: usize) -> Triplets<T> {
    (1..dim)
        .map(|n| (n - 1, n, re(T::from_usize_lossy(n).sqrt())))
        .collect()
}

fn dagger<T: Real>(a: &Triplets<T>) -> Triplets<T> {
    a.iter().map(|&(i, j, v)| (j, i, v.conj())).collect()
}

fn scale<T: Real>(a: &Triplets<T>, s: Complex<T>) -> Triplets<T> {
    a.iter().map(|&(i, j, v)| (i, j, v * s)).collect()
}

fn product<T: Real>(dim: usize, a: &Triplets<T>, b: &Triplets<T>) -> Triplets<T> {
    let mut m = vec![cx(T::zero(), T::zero()); dim * dim];
    for &(i, k, u) in a {
        for &(k2, j, v) in b {
            if k == k2 {
                m[i * dim + j] = m[i * dim + j] + u * v;
            }
        }
    }
    m.into_iter()
        .enumerate()
        .filter(|(_, v)| v.norm() != T::zero())
        .map(|(idx, v)| (idx / dim, idx % dim, v))
        .collect()
}

/// Superoperator builder over column-major vectorization.
struct SuperOp<T> {
    dim: usize,
    entries: Triplets<T>,
}

impl<T: Real> SuperOp<T> {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    /// `rho -> s X rho`
    fn pre(&mut self, x: &Triplets<T>, s: Complex<T>) {
        let d = self.dim;
        for &(i, k, v) in x {
            for j in 0..d {
                self.entries.push((i + j * d, k + j * d, v * s));
            }
        }
    }

    /// `rho -> s rho X`
    fn post(&mut self, x: &Triplets<T>, s: Complex<T>) {
        let d = self.dim;
        for &(k, j, v) in x {
            for i in 0..d {
                self.entries.push((i + j * d, i + k * d, v * s));
            }
        }
    }

    /// `rho -> s A rho B`
    fn sandwich(&mut self, a: &Triplets<T>, b: &Triplets<T>, s: Complex<T>) {
        let d = self.dim;
        for &(i, k, u) in a {
            for &(l, j, v) in b {
                self.entries.push((i + j * d, k + l * d, u * v * s));
            }
        }
    }

    fn hamiltonian(&mut self, h: &Triplets<T>) {
        let i = cx(T::zero(), T::one());
        self.pre(h, -i);
        self.post(h, i);
    }

    fn dissipator(&mut self, a: &Triplets<T>, rate: T) {
        if rate == T::zero() {
            return;
        }
        let ad = dagger(a);
        let ada = product(self.dim, &ad, a);
        let half = re(-rate * T::lit(0.5));
        self.sandwich(a, &ad, re(rate));
        self.pre(&ada, half);
        self.post(&ada, half);
    }

    fn finish(self) -> Csr<T> {
        Csr::from_triplets(self.dim * self.dim, self.entries)
    }
}

fn dense<T: Real>(dim: usize, a: &Triplets<T>) -> Array2<Complex<T>> {
    let mut m = Array2::from_elem((dim, dim), cx(T::zero(), T::zero()));
    for &(i, j, v) in a {
        m[[i, j]] = m[[i, j]] + v;
    }
    m
}

pub(crate) fn to_vec<T: Real>(m: &Array2<Complex<T>>) -> Vec<Complex<T>> {
    let d = m.nrows();
    (0..d).flat_map(|j| (0..d).map(move |i| m[[i, j]])).collect()
}

pub(crate) fn from_vec<T: Real>(v: &[Complex<T>], dim: usize) -> Array2<Complex<T>> {
    Array2::from_shape_fn((dim, dim), |(i, j)| v[i + j * dim])
}

/// Default truncation for a given photon scale: `ceil(8 (n + 1))`, at least 4.
pub fn default_dim<T: Real>(photons: T) -> usize {
    (T::lit(8.0) * (photons.max(T::zero()) + T::one()))
        .ceil()
        .to_usize()
        .unwrap_or(4)
        .max(4)
}

impl<T: Real> FockWorkspace<T> {
    /// Driven-damped cavity with rotating-frame Hamiltonian `-delta n - (f c + f* c†)`.
    pub fn build(p: &CavityParams<T>, dim: usize) -> Result<Self> {
        p.validate()?;
        check_dim(dim)?;
        let c = lowering::<T>(dim);
        let cd = dagger(&c);
        let f = p.drive();
        let mut h: Triplets<T> = (0..dim)
            .map(|n| (n, n, re(-p.delta * T::from_usize_lossy(n))))
            .collect();
        h.extend(scale(&c, -f));
        h.extend(scale(&cd, -f.conj()));
        let mut sup = SuperOp::new(dim);
        sup.hamiltonian(&h);
        sup.dissipator(&c, p.gamma * (p.n_th + T::one()));
        sup.dissipator(&cd, p.gamma * p.n_th);
        Self::assemble(dim, &c, sup.finish(), ParamsSnapshot::Cavity(*p), false, p.gamma)
    }

    /// Undriven mode damped through `s = c cosh r + c† sinh r`.
    pub fn build_squeezed(sp: &SqueezedBathParams<T>, dim: usize) -> Result<Self> {
        sp.validate()?;
        check_dim(dim)?;
        let c = lowering::<T>(dim);
        let cd = dagger(&c);
        let mut s = scale(&c, re(sp.r.cosh()));
        s.extend(scale(&cd, re(sp.r.sinh())));
        let h: Triplets<T> = (0..dim)
            .map(|n| (n, n, re(-sp.delta * T::from_usize_lossy(n))))
            .collect();
        let mut sup = SuperOp::new(dim);
        sup.hamiltonian(&h);
        sup.dissipator(&s, sp.gamma * (sp.n_cl + T::one()));
        sup.dissipator(&dagger(&s), sp.gamma * sp.n_cl);
        Self::assemble(dim, &c, sup.finish(), ParamsSnapshot::Squeezed(*sp), true, sp.gamma)
    }

    /// Builds at the default truncation and grows it by 5 until the top level is empty enough.
    pub fn build_auto(p: &CavityParams<T>) -> Result<Self> {
        grow(default_dim(p.n_th + p.drive_photons()), |d| Self::build(p, d))
    }

    pub fn build_squeezed_auto(sp: &SqueezedBathParams<T>) -> Result<Self> {
        grow(default_dim(sp.photon_scale()), |d| Self::build_squeezed(sp, d))
    }

    fn assemble(
        dim: usize,
        c: &Triplets<T>,
        liouvillian: Csr<T>,
        params: ParamsSnapshot<T>,
        squeezed: bool,
        gamma: T,
    ) -> Result<Self> {
        let rho = steady_state(&liouvillian, dim, gamma)?;
        let top = rho[[dim - 1, dim - 1]].re;
        if !(top < T::lit(LEAKAGE_THRESHOLD)) {
            return Err(Error::Leakage {
                dim,
                population: top.to_f64_lossy(),
            });
        }
        let annihilation = dense(dim, c);
        let number = Array2::from_shape_fn((dim, dim), |(i, j)| {
            if i == j {
                re(T::from_usize_lossy(i))
            } else {
                cx(T::zero(), T::zero())
            }
        });
        let mean_number = (0..dim)
            .map(|n| T::from_usize_lossy(n) * rho[[n, n]].re)
            .sum();
        let liouvillian_t = liouvillian.transpose();
        let norm = liouvillian.norm1();
        Ok(Self {
            dim,
            annihilation,
            number,
            liouvillian,
            liouvillian_t,
            norm,
            steady_state: rho,
            mean_number,
            params,
            squeezed,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn annihilation(&self) -> &Array2<Complex<T>> {
        &self.annihilation
    }

    pub fn number(&self) -> &Array2<Complex<T>> {
        &self.number
    }

    pub fn liouvillian(&self) -> &Csr<T> {
        &self.liouvillian
    }

    pub fn steady_state(&self) -> &Array2<Complex<T>> {
        &self.steady_state
    }

    pub fn mean_number(&self) -> T {
        self.mean_number
    }

    pub fn params(&self) -> &ParamsSnapshot<T> {
        &self.params
    }

    pub fn is_squeezed(&self) -> bool {
        self.squeezed
    }

    pub fn gamma(&self) -> T {
        match self.params {
            ParamsSnapshot::Cavity(p) => p.gamma,
            ParamsSnapshot::Squeezed(s) => s.gamma,
        }
    }

    /// Diagonal of `n - <n>`.
    pub fn fluctuation_diagonal(&self) -> Vec<T> {
        (0..self.dim)
            .map(|n| T::from_usize_lossy(n) - self.mean_number)
            .collect()
    }

    /// `n - <n>` as a matrix.
    pub fn fluctuation(&self) -> Array2<Complex<T>> {
        let d = self.fluctuation_diagonal();
        Array2::from_shape_fn((self.dim, self.dim), |(i, j)| {
            if i == j {
                re(d[i])
            } else {
                cx(T::zero(), T::zero())
            }
        })
    }

    pub(crate) fn exp_action(&self) -> ExpAction<'_, T> {
        ExpAction::with_norm(&self.liouvillian, self.norm)
    }

    pub(crate) fn exp_action_adjoint(&self) -> ExpAction<'_, T> {
        ExpAction::with_norm(&self.liouvillian_t, self.liouvillian_t.norm1())
    }

    /// `e^{L dt} M`.
    pub fn propagate(&self, m: &Array2<Complex<T>>, dt: T) -> Result<Array2<Complex<T>>> {
        if m.dim() != (self.dim, self.dim) {
            return invalid(format!(
                "matrix shape {:?} does not match dim {}",
                m.dim(),
                self.dim
            ));
        }
        if !(dt >= T::zero()) {
            return invalid(format!("dt must be >= 0, got {dt}"));
        }
        if dt == T::zero() {
            return Ok(m.clone());
        }
        let v = self.exp_action().apply(&to_vec(m), dt)?;
        Ok(from_vec(&v, self.dim))
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 4 {
        return invalid(format!("dim must be >= 4, got {dim}"));
    }
    Ok(())
}

fn grow<T, F>(start: usize, build: F) -> Result<T>
where
    F: Fn(usize) -> Result<T>,
{
    let mut dim = start;
    loop {
        match build(dim) {
            Err(Error::Leakage { .. }) if dim + 5 <= MAX_AUTO_DIM => dim += 5,
            other => return other,
        }
    }
}

fn normalized_trace<T: Real>(v: &[Complex<T>], dim: usize) -> Result<Vec<Complex<T>>> {
    let tr: Complex<T> = (0..dim).map(|i| v[i + i * dim]).sum();
    if !(tr.norm() > T::zero()) || !tr.re.is_finite() {
        return Err(Error::Singular("steady-state candidate has zero trace".into()));
    }
    Ok(v.iter().map(|&x| x / tr).collect())
}

fn inverse_iteration<T: Real>(
    lu: &BandedLu<T>,
    start: Vec<Complex<T>>,
    dim: usize,
) -> Result<Vec<Complex<T>>> {
    let tol = T::epsilon() * T::lit(100.0);
    let mut x = normalized_trace(&start, dim)?;
    for _ in 0..50 {
        let mut y = x.clone();
        lu.solve_in_place(&mut y);
        let y = normalized_trace(&y, dim)?;
        let change = y
            .iter()
            .zip(&x)
            .map(|(a, b)| (*a - *b).norm())
            .fold(T::zero(), T::max);
        x = y;
        if change <= tol {
            break;
        }
    }
    Ok(x)
}

/// Null vector of the Liouvillian by shifted inverse iteration from two different starts.
fn steady_state<T: Real>(l: &Csr<T>, dim: usize, gamma: T) -> Result<Array2<Complex<T>>> {
    let shift = re(-(T::epsilon().sqrt() * gamma));
    let lu = BandedLu::factor(l, shift)?;
    let zero = cx(T::zero(), T::zero());
    let mut start_a = vec![zero; dim * dim];
    let mut start_b = vec![zero; dim * dim];
    for n in 0..dim {
        start_a[n + n * dim] = re(T::one());
        start_b[n + n * dim] = re(T::lit(0.5).powi(n as i32));
    }
    let a = inverse_iteration(&lu, start_a, dim)?;
    let b = inverse_iteration(&lu, start_b, dim)?;
    let diff = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (*x - *y).norm())
        .fold(T::zero(), T::max);
    if diff > T::epsilon().sqrt() {
        return Err(Error::DegenerateSteadyState(format!(
            "inverse iteration from two starts differs by {diff}"
        )));
    }
    let residual = l
        .matvec(&a)
        .iter()
        .map(|z| z.norm())
        .fold(T::zero(), T::max);
    if residual > T::epsilon().sqrt() * l.norm1() {
        return Err(Error::Singular(format!("steady-state residual {residual}")));
    }
    let m = from_vec(&a, dim);
    let rho = Array2::from_shape_fn((dim, dim), |(i, j)| {
        (m[[i, j]] + m[[j, i]].conj()) * T::lit(0.5)
    });
    if !is_positive(&rho, T::lit(1e-10).max(T::epsilon() * T::lit(100.0))) {
        return Err(Error::Singular(
            "steady state is not positive semidefinite".into(),
        ));
    }
    Ok(rho)
}

/// Cholesky of `m + shift I` succeeds.
fn is_positive<T: Real>(m: &Array2<Complex<T>>, shift: T) -> bool {
    let n = m.nrows();
    let mut l = vec![cx(T::zero(), T::zero()); n * n];
    for j in 0..n {
        let mut d = m[[j, j]].re + shift;
        for k in 0..j {
            d = d - l[j * n + k].norm_sqr();
        }
        if !(d > T::zero()) {
            return false;
        }
        let djj = d.sqrt();
        l[j * n + j] = re(djj);
        for i in j + 1..n {
            let mut s = m[[i, j]];
            for k in 0..j {
                s = s - l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / djj;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(m: &Array2<Complex<f64>>) -> Complex<f64> {
        (0..m.nrows()).map(|i| m[[i, i]]).sum()
    }

    #[test]
    fn thermal_steady_state() {
        let p = CavityParams::<f64>::thermal(1.0, 1.0).unwrap();
        let ws = FockWorkspace::build(&p, 40).unwrap();
        assert!((ws.mean_number() - 1.0).abs() < 1e-6);
        let rho = ws.steady_state();
        for n in 0..10 {
            assert!((rho[[n, n]].re - 0.5f64.powi(n as i32 + 1)).abs() < 1e-9);
        }
        assert!((trace(rho) - 1.0).norm() < 1e-10);
    }

    #[test]
    fn driven_mean_photon_number() {
        let p = CavityParams::<f64>::with_drive_photons(1.0, 1.0, 0.5, 0.5).unwrap();
        let ws = FockWorkspace::build(&p, 30).unwrap();
        assert!((ws.mean_number() - 1.0).abs() < 1e-6, "{}", ws.mean_number());
        let rho = ws.steady_state();
        for i in 0..30 {
            for j in 0..30 {
                assert!((rho[[i, j]] - rho[[j, i]].conj()).norm() < 1e-14);
            }
        }
        // <c> = i f* / (gamma/2 - i delta)
        let f = p.drive();
        let c0 = Complex::new(0.0, 1.0) * f.conj() / Complex::new(0.5, -1.0);
        let mean_c: Complex<f64> = (1..30)
            .map(|n| (n as f64).sqrt() * rho[[n, n - 1]])
            .sum();
        assert!((mean_c - c0).norm() < 1e-8, "{mean_c} {c0}");
    }

    #[test]
    fn squeezed_without_squeezing_is_thermal() {
        let sp = SqueezedBathParams::<f64>::new(1.0, 1.0, 0.0, 0.3).unwrap();
        let p = CavityParams::<f64>::new(1.0, 1.0, Complex::new(0.0, 0.0), 0.3).unwrap();
        let a = FockWorkspace::build_squeezed(&sp, 20).unwrap();
        let b = FockWorkspace::build(&p, 20).unwrap();
        assert!(a.is_squeezed());
        let diff = (a.steady_state() - b.steady_state()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn squeezed_mean_number() {
        // <c†c> = (n_cl + 1/2) cosh 2r - 1/2 when delta = 0.
        let sp = SqueezedBathParams::<f64>::new(1.0, 0.0, 0.5, 0.3).unwrap();
        let ws = FockWorkspace::build_squeezed_auto(&sp).unwrap();
        assert!((ws.mean_number() - sp.photon_scale()).abs() < 1e-7, "{}", ws.mean_number());
    }

    #[test]
    fn small_truncation_reports_leakage() {
        let p = CavityParams::<f64>::thermal(1.0, 1.0).unwrap();
        assert!(matches!(FockWorkspace::build(&p, 10), Err(Error::Leakage { dim: 10, .. })));
        assert!(FockWorkspace::build(&p, 3).is_err());
        let ws = FockWorkspace::build_auto(&p).unwrap();
        assert!(ws.dim() >= 16 && ws.steady_state()[[ws.dim() - 1, ws.dim() - 1]].re < 1e-8);
    }

    #[test]
    fn propagate_basics() {
        let p = CavityParams::<f64>::with_drive_photons(1.0, 2.0, 0.5, 0.2).unwrap();
        let ws = FockWorkspace::build(&p, 20).unwrap();
        let m = Array2::from_shape_fn((20, 20), |(i, j)| {
            let a = Complex::new(((i * 7 + j * 3) % 5) as f64 * 0.1, ((i + 2 * j) % 3) as f64 * 0.05);
            let b = Complex::new(((j * 7 + i * 3) % 5) as f64 * 0.1, ((j + 2 * i) % 3) as f64 * 0.05);
            (a + b.conj()) * 0.5
        });
        assert_eq!(ws.propagate(&m, 0.0).unwrap(), m);
        let out = ws.propagate(&m, 0.7).unwrap();
        assert!((trace(&out) - trace(&m)).norm() < 1e-10);
        let ss = ws.propagate(ws.steady_state(), 3.0).unwrap();
        let diff = (&ss - ws.steady_state()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-9);
        assert!(ws.propagate(&m, -1.0).is_err());
        assert!(ws.propagate(&Array2::zeros((3, 3)), 1.0).is_err());
    }

    #[test]
    fn positivity_check() {
        let mut m = Array2::from_elem((2, 2), Complex::new(0.0, 0.0));
        m[[0, 0]] = Complex::new(1.0, 0.0);
        assert!(is_positive(&m, 1e-10));
        m[[1, 1]] = Complex::new(-1e-3, 0.0);
        assert!(!is_positive(&m, 1e-10));
    }
}

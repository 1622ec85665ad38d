//! Whether unequal-time commutators of a noise operator are c-numbers.
//!
//! For a closed mode the quadrature `x(t) = x cos t + p sin t` has `[x(t), x(t')]`
//! proportional to the identity, while the photon number of a driven mode does not.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::{cx, re, Complex, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorReport<T> {
    pub dim: usize,
    /// Block size (lowest Fock levels) free of truncation artifacts.
    pub block: usize,
    pub time_pairs: Vec<(T, T)>,
    /// Largest deviation of `[x(t), x(t')]` from a multiple of the identity.
    pub linear_residue: T,
    /// Smallest deviation of `[n(t), n(t')]` from a multiple of the identity.
    pub number_residue: T,
    /// Largest entry of either commutator at `t = t'`.
    pub equal_time_norm: T,
}

impl<T: Real> CommutatorReport<T> {
    pub fn passed(&self) -> bool {
        self.linear_residue < T::lit(1e-10)
            && self.number_residue > T::lit(1e-2)
            && self.equal_time_norm < T::lit(1e-10)
    }
}

type M<T> = Array2<Complex<T>>;

fn lowering<T: Real>(dim: usize) -> M<T> {
    Array2::from_shape_fn((dim, dim), |(i, j)| {
        if j == i + 1 {
            re(T::from_usize_lossy(j).sqrt())
        } else {
            cx(T::zero(), T::zero())
        }
    })
}

fn dagger<T: Real>(m: &M<T>) -> M<T> {
    m.t().mapv(|z| z.conj())
}

fn commutator<T: Real>(a: &M<T>, b: &M<T>) -> M<T> {
    a.dot(b) - b.dot(a)
}

/// Deviation from `s I` on the leading `block x block` corner, with `s` the mean diagonal.
fn off_identity<T: Real>(m: &M<T>, block: usize) -> T {
    let s: Complex<T> =
        (0..block).map(|k| m[[k, k]]).sum::<Complex<T>>() / T::from_usize_lossy(block);
    let mut worst = T::zero();
    for i in 0..block {
        for j in 0..block {
            let target = if i == j { s } else { cx(T::zero(), T::zero()) };
            worst = worst.max((m[[i, j]] - target).norm());
        }
    }
    worst
}

fn max_entry<T: Real>(m: &M<T>, block: usize) -> T {
    let mut worst = T::zero();
    for i in 0..block {
        for j in 0..block {
            worst = worst.max(m[[i, j]].norm());
        }
    }
    worst
}

/// Closed-mode commutator check at unit frequency; the number operator uses detuning 1 and
/// drive 1 so `c(t) = e^{i t}(c + 1) - 1`.
pub fn linear_commutator_check<T: Real>(dim: usize) -> Result<CommutatorReport<T>> {
    if dim < 10 {
        return invalid(format!("dim must be >= 10, got {dim}"));
    }
    let block = dim - 5;
    let c = lowering::<T>(dim);
    let cd = dagger(&c);
    let sqrt2 = T::lit(2.0).sqrt();
    let x = (&c + &cd).mapv(|z| z / sqrt2);
    let p = (&c - &cd).mapv(|z| z / (cx(T::zero(), sqrt2)));
    let x_at = |t: T| x.mapv(|z| z * t.cos()) + p.mapv(|z| z * t.sin());
    let ident = Array2::from_shape_fn((dim, dim), |(i, j)| {
        if i == j {
            re(T::one())
        } else {
            cx(T::zero(), T::zero())
        }
    });
    let c_at = |t: T| {
        let ph = cx(t.cos(), t.sin());
        (&c + &ident).mapv(|z| z * ph) - &ident
    };
    let n_at = |t: T| {
        let ct = c_at(t);
        dagger(&ct).dot(&ct)
    };
    let pairs: Vec<(T, T)> = [(0.3, 1.7), (0.0, 1.0), (-2.1, 0.4), (2.5, 5.9), (1.1, -0.6)]
        .iter()
        .map(|&(a, b)| (T::lit(a), T::lit(b)))
        .collect();
    let mut linear_residue = T::zero();
    let mut number_residue = T::infinity();
    for &(t, s) in &pairs {
        linear_residue = linear_residue.max(off_identity(&commutator(&x_at(t), &x_at(s)), block));
        number_residue = number_residue.min(off_identity(&commutator(&n_at(t), &n_at(s)), block));
    }
    let t0 = T::lit(0.9);
    let equal_time_norm = max_entry(&commutator(&x_at(t0), &x_at(t0)), block)
        .max(max_entry(&commutator(&n_at(t0), &n_at(t0)), block));
    Ok(CommutatorReport {
        dim,
        block,
        time_pairs: pairs,
        linear_residue,
        number_residue,
        equal_time_norm,
    })
}

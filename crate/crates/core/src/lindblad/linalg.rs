//! Sparse superoperators, their exponential action, and a banded LU solver.

use crate::error::{Error, Result};
use crate::scalar::{Complex, Real};

/// Compressed sparse row matrix.
#[derive(Clone, Debug)]
pub struct Csr<T> {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<Complex<T>>,
}

impl<T: Real> Csr<T> {
    /// Square matrix from `(row, col, value)` triplets; duplicates are summed, exact zeros dropped.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, Complex<T>)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data: Vec<Complex<T>> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                let top = data.len() - 1;
                data[top] = data[top] + v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            indptr[r + 1] += indptr[r];
        }
        let mut m = Self {
            n,
            indptr,
            indices,
            data,
        };
        m.prune();
        m
    }

    fn prune(&mut self) {
        let zero = Complex::new(T::zero(), T::zero());
        let mut indptr = vec![0usize; self.n + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut data = Vec::with_capacity(self.data.len());
        for r in 0..self.n {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.data[k] != zero {
                    indices.push(self.indices[k]);
                    data.push(self.data[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.data = data;
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex<T>)> + '_ {
        (0..self.n).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.data[k]))
        })
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.n, self.triplets().map(|(r, c, v)| (c, r, v)).collect())
    }

    pub fn matvec_into(&self, x: &[Complex<T>], y: &mut [Complex<T>]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = Complex::new(T::zero(), T::zero());
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc = acc + self.data[k] * x[self.indices[k]];
            }
            *out = acc;
        }
    }

    pub fn matvec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut y = vec![Complex::new(T::zero(), T::zero()); self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> T {
        let mut cols = vec![T::zero(); self.n];
        for (_, c, v) in self.triplets() {
            cols[c] = cols[c] + v.norm();
        }
        cols.into_iter().fold(T::zero(), T::max)
    }

    /// Lower and upper bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        self.triplets().fold((0, 0), |(kl, ku), (r, c, _)| {
            if r > c {
                (kl.max(r - c), ku)
            } else {
                (kl, ku.max(c - r))
            }
        })
    }
}

fn max_abs<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().map(|z| z.norm()).fold(T::zero(), T::max)
}

/// `e^{A t} v` by truncated Taylor series on `s` substeps with `|A t / s|_1 <= 1`.
#[derive(Clone, Debug)]
pub struct ExpAction<'a, T> {
    a: &'a Csr<T>,
    norm: T,
}

impl<'a, T: Real> ExpAction<'a, T> {
    pub fn new(a: &'a Csr<T>) -> Self {
        Self { a, norm: a.norm1() }
    }

    pub fn with_norm(a: &'a Csr<T>, norm: T) -> Self {
        Self { a, norm }
    }

    pub fn apply(&self, v: &[Complex<T>], t: T) -> Result<Vec<Complex<T>>> {
        let mut out = v.to_vec();
        self.apply_in_place(&mut out, t)?;
        Ok(out)
    }

    pub fn apply_in_place(&self, v: &mut [Complex<T>], t: T) -> Result<()> {
        if t == T::zero() {
            return Ok(());
        }
        let n = v.len();
        let steps = (self.norm * t.abs())
            .ceil()
            .to_usize()
            .unwrap_or(usize::MAX)
            .max(1);
        if steps > 50_000_000 {
            return Err(Error::ExpmConvergence {
                norm: self.norm.to_f64_lossy(),
                dt: t.to_f64_lossy(),
            });
        }
        let h = t / T::from_usize_lossy(steps);
        let eps = T::epsilon();
        let mut term = vec![Complex::new(T::zero(), T::zero()); n];
        let mut next = term.clone();
        for _ in 0..steps {
            term.copy_from_slice(v);
            let mut converged = false;
            for k in 1..=80usize {
                self.a.matvec_into(&term, &mut next);
                let scale = h / T::from_usize_lossy(k);
                for (tk, nk) in term.iter_mut().zip(&next) {
                    *tk = *nk * scale;
                }
                for (vk, tk) in v.iter_mut().zip(&term) {
                    *vk = *vk + *tk;
                }
                if max_abs(&term) <= eps * max_abs(v) {
                    converged = true;
                    break;
                }
            }
            if !converged || v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::ExpmConvergence {
                    norm: self.norm.to_f64_lossy(),
                    dt: t.to_f64_lossy(),
                });
            }
        }
        Ok(())
    }
}

/// LU factorization with partial pivoting of a banded matrix.
#[derive(Clone, Debug)]
pub struct BandedLu<T> {
    n: usize,
    kl: usize,
    width: usize,
    /// Row `r` holds columns `r - kl ..= r + ku + kl`.
    rows: Vec<Complex<T>>,
    multipliers: Vec<Complex<T>>,
    pivots: Vec<usize>,
    span: usize,
}

impl<T: Real> BandedLu<T> {
    /// Factorizes `A + shift * I`.
    pub fn factor(a: &Csr<T>, shift: Complex<T>) -> Result<Self> {
        let n = a.dim();
        let (kl, ku) = a.bandwidths();
        let span = ku + kl;
        let width = 2 * kl + ku + 1;
        let zero = Complex::new(T::zero(), T::zero());
        let mut rows = vec![zero; n * width];
        let at = |r: usize, c: usize| r * width + (c + kl - r);
        for (r, c, v) in a.triplets() {
            rows[at(r, c)] = v;
        }
        for r in 0..n {
            rows[at(r, r)] = rows[at(r, r)] + shift;
        }
        let mut multipliers = vec![zero; n * kl.max(1)];
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + span).min(n - 1);
            let mut p = k;
            let mut best = rows[at(k, k)].norm();
            for r in k + 1..=last_row {
                let v = rows[at(r, k)].norm();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(Error::Singular(format!("zero pivot in column {k}")));
            }
            pivots[k] = p;
            if p != k {
                for c in k..=last_col {
                    rows.swap(at(k, c), at(p, c));
                }
            }
            let piv = rows[at(k, k)];
            for r in k + 1..=last_row {
                let m = rows[at(r, k)] / piv;
                multipliers[k * kl.max(1) + (r - k - 1)] = m;
                rows[at(r, k)] = zero;
                if m != zero {
                    for c in k + 1..=last_col {
                        let u = rows[at(k, c)];
                        let idx = at(r, c);
                        rows[idx] = rows[idx] - m * u;
                    }
                }
            }
        }
        Ok(Self {
            n,
            kl,
            width,
            rows,
            multipliers,
            pivots,
            span,
        })
    }

    pub fn solve_in_place(&self, b: &mut [Complex<T>]) {
        let (n, kl, width) = (self.n, self.kl, self.width);
        let at = |r: usize, c: usize| r * width + (c + kl - r);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for r in k + 1..=(k + kl).min(n - 1) {
                let m = self.multipliers[k * kl.max(1) + (r - k - 1)];
                b[r] = b[r] - m * bk;
            }
        }
        for k in (0..n).rev() {
            let mut acc = b[k];
            for c in k + 1..=(k + self.span).min(n - 1) {
                acc = acc - self.rows[at(k, c)] * b[c];
            }
            b[k] = acc / self.rows[at(k, k)];
        }
    }
}

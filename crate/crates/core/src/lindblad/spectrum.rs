//! Bispectrum from the tabulated Keldysh third cumulant on a uniform lag grid.
//!
//! All lag differences on the grid are multiples of the step `h`, so the two regression
//! correlators are tabulated once per gap pair `(a h, b h)`: forward states
//! `V_a = e^{L a h}(rho dn)` and adjoint functionals `phi_b = e^{L^T b h} vec(dn^T)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{to_vec, FockWorkspace};
use crate::error::{invalid, Result};
use crate::model::{BispectrumSurface, FreqGrid2D, ParamsSnapshot, Source};
use crate::scalar::{cx, Complex, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleBispectrum<T> {
    /// Per-point uncertainty = Richardson discretization estimate + tail bound.
    pub surface: BispectrumSurface<T>,
    pub lag_step: T,
    /// Bound on the contribution from lags outside the window.
    pub tail_bound: T,
    /// Largest Richardson estimate over the grid.
    pub discretization_error: T,
    /// Set when the tail bound exceeds `1e-3` of the largest surface magnitude.
    pub flagged: bool,
}

fn sinc<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-4) {
        T::one() - x * x / T::lit(6.0)
    } else {
        x.sin() / x
    }
}

/// Lag table `C[j][k] = C3(0, tau_j, tau_k)` with `tau_j = (j - c) h`, `c = (n - 1) / 2`.
fn lag_table<T: Real>(ws: &FockWorkspace<T>, h: T, n: usize) -> Result<Vec<T>> {
    let d = ws.dim();
    let dn = ws.fluctuation_diagonal();
    let mut u0 = to_vec(ws.steady_state());
    for (idx, z) in u0.iter_mut().enumerate() {
        *z = *z * dn[idx / d];
    }
    let mut w0 = vec![cx(T::zero(), T::zero()); d * d];
    for k in 0..d {
        w0[k + k * d] = cx(dn[k], T::zero());
    }
    let chain = |start: Vec<Complex<T>>, adjoint: bool| -> Result<Vec<Vec<Complex<T>>>> {
        let exp = if adjoint {
            ws.exp_action_adjoint()
        } else {
            ws.exp_action()
        };
        let mut out = Vec::with_capacity(n);
        let mut cur = start;
        out.push(cur.clone());
        for _ in 1..n {
            exp.apply_in_place(&mut cur, h)?;
            out.push(cur.clone());
        }
        Ok(out)
    };
    let (fwd, adj) = rayon::join(|| chain(u0, false), || chain(w0, true));
    let (fwd, adj) = (fwd?, adj?);
    // V dn (chronological) and dn V (mixed) for each gap a.
    let (vc, vm): (Vec<_>, Vec<_>) = fwd
        .par_iter()
        .map(|v| {
            let mut c = v.clone();
            let mut m = v.clone();
            for idx in 0..d * d {
                c[idx] = c[idx] * dn[idx / d];
                m[idx] = m[idx] * dn[idx % d];
            }
            (c, m)
        })
        .unzip();
    let dot = |x: &[Complex<T>], y: &[Complex<T>]| -> Complex<T> {
        x.iter().zip(y).map(|(a, b)| *a * *b).sum()
    };
    // g[b * n + a] = Re(G_chrono + G_mixed) / 2 at gaps (a h, b h).
    let g: Vec<T> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (b, a) = (idx / n, idx % n);
            if a + b > n - 1 {
                return T::zero();
            }
            let phi = &adj[b];
            (dot(phi, &vc[a]).re + dot(phi, &vm[a]).re) * T::lit(0.5)
        })
        .collect();
    let c = (n - 1) / 2;
    let mut table = vec![T::zero(); n * n];
    for j in 0..n {
        for k in j..n {
            let mut s = [0i64, j as i64 - c as i64, k as i64 - c as i64];
            s.sort_unstable();
            let a = (s[1] - s[0]) as usize;
            let b = (s[2] - s[1]) as usize;
            let v = g[b * n + a];
            table[j * n + k] = v;
            table[k * n + j] = v;
        }
    }
    Ok(table)
}

/// `h^2 W(w1, w2) sum_jk C_jk e^{-i(w1 tau_j + w2 tau_k)}` on the grid; `W` is the Fourier
/// transform of the piecewise-linear interpolant on the lag mesh, which is exact for the
/// kinks of the cumulant along `tau1 = 0`, `tau2 = 0` and `tau1 = tau2`.
fn transform<T: Real>(table: &[T], n: usize, stride: usize, h: T, grid: &FreqGrid2D<T>) -> Vec<Complex<T>> {
    let c = (n - 1) / 2;
    let idx: Vec<usize> = (0..n).filter(|j| (*j as i64 - c as i64) % stride as i64 == 0).collect();
    let step = h * T::from_usize_lossy(stride);
    let taus: Vec<T> = idx
        .iter()
        .map(|&j| (T::from_usize_lossy(j) - T::from_usize_lossy(c)) * h)
        .collect();
    let phases = |omegas: &[T]| -> Vec<Vec<Complex<T>>> {
        omegas
            .iter()
            .map(|&w| {
                taus.iter()
                    .map(|&t| {
                        let ph = -w * t;
                        cx(ph.cos(), ph.sin())
                    })
                    .collect()
            })
            .collect()
    };
    let e1 = phases(grid.omega1());
    let e2 = phases(grid.omega2());
    // A[i][k] = sum_j e1[i][j] C[j][k]
    let a: Vec<Vec<Complex<T>>> = e1
        .par_iter()
        .map(|row| {
            let mut acc = vec![cx(T::zero(), T::zero()); idx.len()];
            for (jj, &j) in idx.iter().enumerate() {
                let e = row[jj];
                for (kk, &k) in idx.iter().enumerate() {
                    acc[kk] = acc[kk] + e * table[j * n + k];
                }
            }
            acc
        })
        .collect();
    let half = T::lit(0.5);
    grid.omega1()
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, &w1)| {
            let a = &a[i];
            let e2 = &e2;
            grid.omega2().iter().enumerate().map(move |(jj, &w2)| {
                let s: Complex<T> = a.iter().zip(&e2[jj]).map(|(x, y)| *x * *y).sum();
                let weight = sinc(w1 * step * half) * sinc(w2 * step * half) * sinc((w1 + w2) * step * half);
                s * (step * step * weight)
            })
        })
        .collect()
}

/// Tabulated cumulant on `[-window_t, window_t]^2` with `n_tau` (odd) lags per axis; can be
/// transformed to any set of frequencies.
#[derive(Clone, Debug)]
pub struct LagTable<T> {
    table: Vec<T>,
    n: usize,
    h: T,
    window_t: T,
    gamma: T,
    params: ParamsSnapshot<T>,
}

impl<T: Real> LagTable<T> {
    pub fn new(ws: &FockWorkspace<T>, window_t: T, n_tau: usize) -> Result<Self> {
        if n_tau < 5 || n_tau % 2 == 0 {
            return invalid(format!("n_tau must be odd and >= 5, got {n_tau}"));
        }
        if !(window_t > T::zero()) || !window_t.is_finite() {
            return invalid("window_T must be > 0");
        }
        let h = T::lit(2.0) * window_t / T::from_usize_lossy(n_tau - 1);
        Ok(Self {
            table: lag_table(ws, h, n_tau)?,
            n: n_tau,
            h,
            window_t,
            gamma: ws.gamma(),
            params: *ws.params(),
        })
    }

    pub fn lag_step(&self) -> T {
        self.h
    }

    /// `C3(0, tau_j, tau_k)` with `tau_j = (j - (n_tau - 1) / 2) h`.
    pub fn get(&self, j: usize, k: usize) -> T {
        self.table[j * self.n + k]
    }

    /// Bound on the part of the transform coming from lags outside the window, assuming
    /// decay at least as fast as `e^{-gamma |tau| / 2}` beyond the largest edge value.
    pub fn tail_bound(&self) -> T {
        let n = self.n;
        let t = &self.table;
        let edge = (0..n)
            .flat_map(|j| [t[j], t[(n - 1) * n + j], t[j * n], t[j * n + n - 1]])
            .map(|v| v.abs())
            .fold(T::zero(), T::max);
        let kappa = self.gamma * T::lit(0.5);
        edge * T::lit(8.0) * (self.window_t / kappa + T::one() / (kappa * kappa))
    }

    pub fn transform(&self, grid: &FreqGrid2D<T>) -> OracleBispectrum<T> {
        let (n, h) = (self.n, self.h);
        let values = transform(&self.table, n, 1, h, grid);
        let richardson: Vec<T> = if ((n - 1) / 2) % 2 == 0 {
            let coarse = transform(&self.table, n, 2, h, grid);
            values
                .iter()
                .zip(&coarse)
                .map(|(f, g)| (*f - *g).norm() / T::lit(3.0))
                .collect()
        } else {
            vec![T::zero(); values.len()]
        };
        let tail_bound = self.tail_bound();
        let peak = values.iter().map(|z| z.norm()).fold(T::zero(), T::max);
        let discretization_error = richardson.iter().copied().fold(T::zero(), T::max);
        let uncertainty = richardson.iter().map(|&r| r + tail_bound).collect();
        OracleBispectrum {
            surface: BispectrumSurface {
                grid: grid.clone(),
                values,
                source: Source::Lindblad,
                params: self.params,
                uncertainty: Some(uncertainty),
            },
            lag_step: h,
            tail_bound,
            discretization_error,
            flagged: tail_bound > T::lit(1e-3) * peak,
        }
    }

    /// Transform at scattered points; returns `(value, uncertainty)` pairs.
    pub fn transform_points(&self, points: &[(T, T)]) -> Vec<(Complex<T>, T)> {
        points
            .iter()
            .map(|&(a, b)| {
                let out = self.transform(&FreqGrid2D::single(a, b));
                (out.surface.values[0], out.surface.uncertainty.as_ref().map_or(T::zero(), |u| u[0]))
            })
            .collect()
    }
}

/// Numerical bispectrum of the workspace on `[-window_t, window_t]^2` with `n_tau` (odd) lags
/// per axis.
pub fn oracle_bispectrum<T: Real>(
    ws: &FockWorkspace<T>,
    grid: &FreqGrid2D<T>,
    window_t: T,
    n_tau: usize,
) -> Result<OracleBispectrum<T>> {
    Ok(LagTable::new(ws, window_t, n_tau)?.transform(grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{s_thermal, FreqTriple};
    use crate::lindblad::keldysh_c3;
    use crate::model::CavityParams;

    #[test]
    fn lag_table_matches_pointwise_cumulant() {
        let p = CavityParams::<f64>::with_drive_photons(1.0, 1.0, 0.5, 0.2).unwrap();
        let ws = FockWorkspace::build(&p, 22).unwrap();
        let n = 9;
        let h = 0.5;
        let table = LagTable::new(&ws, 2.0, n).unwrap();
        assert_eq!(table.lag_step(), h);
        for &(j, k) in &[(0, 8), (4, 4), (2, 7), (6, 1), (4, 6), (8, 8)] {
            let t1 = (j as f64 - 4.0) * h;
            let t2 = (k as f64 - 4.0) * h;
            let v = keldysh_c3(&ws, t1, t2).unwrap();
            assert!((table.get(j, k) - v).abs() < 1e-10, "({t1},{t2}) {} vs {v}", table.get(j, k));
        }
        let pts = table.transform_points(&[(0.5, -0.2)]);
        let grid = table.transform(&FreqGrid2D::single(0.5, -0.2));
        assert_eq!(pts[0].0, grid.surface.values[0]);
    }

    #[test]
    fn thermal_surface() {
        let p = CavityParams::<f64>::thermal(1.0, 1.0).unwrap();
        let ws = FockWorkspace::build(&p, 40).unwrap();
        let grid = FreqGrid2D::new(vec![-1.5, 0.0, 0.7], vec![0.0, 1.0, 2.0]).unwrap();
        let out = oracle_bispectrum(&ws, &grid, 30.0, 241).unwrap();
        assert!(!out.flagged);
        for (i, &w1) in grid.omega1().iter().enumerate() {
            for (j, &w2) in grid.omega2().iter().enumerate() {
                let v = out.surface.get(i, j);
                let e = s_thermal(&p, FreqTriple::new(w1, w2));
                assert!((v.re - e).abs() < 0.02 * e.abs(), "({w1},{w2}) {v} vs {e}");
                assert!(v.im.abs() < 1e-8 * e.abs());
                assert!(out.surface.uncertainty_at(i, j).unwrap() < 0.02 * e.abs());
            }
        }
    }

    #[test]
    fn rejects_bad_lag_grid() {
        let p = CavityParams::<f64>::thermal(1.0, 0.5).unwrap();
        let ws = FockWorkspace::build(&p, 20).unwrap();
        let grid = FreqGrid2D::single(0.0, 0.0);
        assert!(oracle_bispectrum(&ws, &grid, 10.0, 10).is_err());
        assert!(oracle_bispectrum(&ws, &grid, 0.0, 11).is_err());
    }
}

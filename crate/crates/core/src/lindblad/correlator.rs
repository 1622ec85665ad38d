//! Multi-time correlators by quantum regression and their Keldysh-ordered combinations.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{to_vec, FockWorkspace};
use crate::error::{invalid, Error, Result};
use crate::model::heaviside_sym;
use crate::scalar::{cx, re, Complex, Real};

/// Operator arrangement of `<dn(t_a) dn(t_b) dn(t_c)>` for sorted times `r1 <= r2 <= r3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// `X(r1) Y(r2) Z(r3)`
    Chrono,
    /// `X(r1) Z(r3) Y(r2)`
    Mixed,
    /// `Z(r3) Y(r2) X(r1)`, the conjugate of `Chrono`.
    Anti,
    /// `Y(r2) Z(r3) X(r1)`, the conjugate of `Mixed`.
    MixedRev,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderedCorrelator<T> {
    pub times: [T; 3],
    pub placement: Placement,
    pub value: Complex<T>,
}

impl<T: Real> OrderedCorrelator<T> {
    pub fn compute(ws: &FockWorkspace<T>, placement: Placement, times: [T; 3]) -> Result<Self> {
        let value = three_point(ws, placement, times[0], times[1], times[2])?;
        Ok(Self {
            times,
            placement,
            value,
        })
    }
}

/// `<O_1(t_1) ... O_k(t_k)>` in the steady state.
///
/// The time sequence must rise (weakly) and then fall (weakly); every Keldysh-ordered product
/// has this form.
pub fn ordered_moment<T: Real>(
    ws: &FockWorkspace<T>,
    ops: &[(&Array2<Complex<T>>, T)],
) -> Result<Complex<T>> {
    let d = ws.dim();
    if ops.iter().any(|(m, t)| m.dim() != (d, d) || !t.is_finite()) {
        return invalid("operator shape mismatch or non-finite time");
    }
    if ops.is_empty() {
        return Ok(re(T::one()));
    }
    let mut split = 1;
    while split < ops.len() && ops[split].1 >= ops[split - 1].1 {
        split += 1;
    }
    if ops[split..].windows(2).any(|w| w[1].1 > w[0].1) {
        return invalid("operator times must rise and then fall");
    }
    // Right-multiplications in string order, left-multiplications in reverse string order;
    // both sequences are ascending in time.
    let right = &ops[..split];
    let left: Vec<_> = ops[split..].iter().rev().collect();
    let (mut i, mut j) = (0, 0);
    let mut x = ws.steady_state().clone();
    let mut now = right[0].1.min(left.first().map_or(right[0].1, |o| o.1));
    while i < right.len() || j < left.len() {
        let take_right = j >= left.len() || (i < right.len() && right[i].1 <= left[j].1);
        let (m, t) = if take_right { right[i] } else { *left[j] };
        if t > now {
            x = ws.propagate(&x, t - now)?;
            now = t;
        }
        x = if take_right { x.dot(m) } else { m.dot(&x) };
        if take_right {
            i += 1;
        } else {
            j += 1;
        }
    }
    Ok((0..d).map(|k| x[[k, k]]).sum())
}

fn scale_right<T: Real>(v: &mut [Complex<T>], dn: &[T]) {
    let d = dn.len();
    for (idx, z) in v.iter_mut().enumerate() {
        *z = *z * dn[idx / d];
    }
}

fn scale_left<T: Real>(v: &mut [Complex<T>], dn: &[T]) {
    let d = dn.len();
    for (idx, z) in v.iter_mut().enumerate() {
        *z = *z * dn[idx % d];
    }
}

fn trace_with<T: Real>(v: &[Complex<T>], dn: &[T]) -> Complex<T> {
    let d = dn.len();
    (0..d).map(|k| v[k + k * d] * dn[k]).sum()
}

/// Regression correlator of three `dn` insertions at sorted times.
pub fn three_point<T: Real>(
    ws: &FockWorkspace<T>,
    placement: Placement,
    r1: T,
    r2: T,
    r3: T,
) -> Result<Complex<T>> {
    if !(r1 <= r2 && r2 <= r3) || !r3.is_finite() || !r1.is_finite() {
        return invalid(format!("times must be sorted, got ({r1}, {r2}, {r3})"));
    }
    let dn = ws.fluctuation_diagonal();
    let exp = ws.exp_action();
    let mut v = to_vec(ws.steady_state());
    scale_right(&mut v, &dn);
    exp.apply_in_place(&mut v, r2 - r1)?;
    match placement {
        Placement::Chrono | Placement::Anti => scale_right(&mut v, &dn),
        Placement::Mixed | Placement::MixedRev => scale_left(&mut v, &dn),
    }
    exp.apply_in_place(&mut v, r3 - r2)?;
    let g = trace_with(&v, &dn);
    Ok(match placement {
        Placement::Chrono | Placement::Mixed => g,
        Placement::Anti | Placement::MixedRev => g.conj(),
    })
}

fn residue_tolerance<T: Real>(scale: T) -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(1e4)) * scale.max(T::one())
}

fn real_part<T: Real>(z: Complex<T>, what: &str) -> Result<T> {
    if z.im.abs() > residue_tolerance(z.re.abs()) {
        return Err(Error::Singular(format!(
            "{what} has imaginary residue {} (real part {})",
            z.im, z.re
        )));
    }
    Ok(z.re)
}

/// `<dn^3>`
fn skewness_at_coincidence<T: Real>(ws: &FockWorkspace<T>) -> T {
    let dn = ws.fluctuation_diagonal();
    let rho = ws.steady_state();
    (0..ws.dim()).map(|k| dn[k].powi(3) * rho[[k, k]].re).sum()
}

fn sorted3<T: Real>(mut t: [T; 3]) -> [T; 3] {
    t.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    t
}

/// Keldysh-ordered third cumulant of `n` at times `(0, tau1, tau2)`.
///
/// Evaluated as `Re[G_chrono + G_mixed] / 2` at the sorted times, which equals the six-term
/// kernel sum with `Theta(0) = 1/2` whenever at most two times coincide. At a triple
/// coincidence the continuous value `<dn^3>` is returned.
pub fn keldysh_c3<T: Real>(ws: &FockWorkspace<T>, tau1: T, tau2: T) -> Result<T> {
    if !tau1.is_finite() || !tau2.is_finite() {
        return invalid("lags must be finite");
    }
    let [r1, r2, r3] = sorted3([T::zero(), tau1, tau2]);
    if r1 == r3 {
        return Ok(skewness_at_coincidence(ws));
    }
    let chrono = three_point(ws, Placement::Chrono, r1, r2, r3)?;
    let mixed = three_point(ws, Placement::Mixed, r1, r2, r3)?;
    Ok((chrono.re + mixed.re) * T::lit(0.5))
}

/// Literal kernel-weighted sum `(1/4) sum_perms K <dn dn dn>` with `Theta(0) = 1/2`,
/// each ordering evaluated independently by regression; the imaginary residue is checked.
pub fn keldysh_c3_kernel_sum<T: Real>(ws: &FockWorkspace<T>, tau1: T, tau2: T) -> Result<T> {
    let times = [T::zero(), tau1, tau2];
    let dn = ws.fluctuation();
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut acc = cx(T::zero(), T::zero());
    for p in PERMS {
        let [a, b, c] = p.map(|k| times[k]);
        let kernel = T::one() - heaviside_sym(a - b) * heaviside_sym(c - b);
        if kernel == T::zero() {
            continue;
        }
        let g = ordered_moment(ws, &[(&dn, a), (&dn, b), (&dn, c)])?;
        acc = acc + g * kernel;
    }
    real_part(acc * T::lit(0.25), "kernel sum")
}

/// Symmetrized two-time correlator `Re <dn(0) dn(tau)>`.
pub fn keldysh_c2<T: Real>(ws: &FockWorkspace<T>, tau: T) -> Result<T> {
    if !tau.is_finite() {
        return invalid("lag must be finite");
    }
    let dn = ws.fluctuation_diagonal();
    let mut v = to_vec(ws.steady_state());
    scale_right(&mut v, &dn);
    ws.exp_action().apply_in_place(&mut v, tau.abs())?;
    Ok(trace_with(&v, &dn).re)
}

/// Terms of the equal-time decomposition of `C3(t, t)` with `N = dn(t)`, `n0 = dn(0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqualTimeTerms<T> {
    pub t: T,
    /// `<{n0, N^2}> / 2`
    pub anticommutator: T,
    /// `<[N, [N, n0]]>`; only Keldysh-ordered (and needed) for `t <= 0`.
    pub double_commutator: Option<T>,
}

impl<T: Real> EqualTimeTerms<T> {
    /// `anticommutator - Theta(-t) double_commutator / 4`
    pub fn combined(&self) -> T {
        let weight = heaviside_sym(-self.t);
        match self.double_commutator {
            Some(d) if weight > T::zero() => self.anticommutator - weight * d * T::lit(0.25),
            _ => self.anticommutator,
        }
    }
}

/// Evaluates each operator product of the decomposition by its own regression call.
pub fn equal_time_terms<T: Real>(ws: &FockWorkspace<T>, t: T) -> Result<EqualTimeTerms<T>> {
    let dn = ws.fluctuation();
    let dn2 = dn.dot(&dn);
    let zero = T::zero();
    let n0_n2 = ordered_moment(ws, &[(&dn, zero), (&dn2, t)])?;
    let n2_n0 = ordered_moment(ws, &[(&dn2, t), (&dn, zero)])?;
    let anti = (n0_n2 + n2_n0) * T::lit(0.5);
    let double_commutator = if t <= zero {
        let n_n0_n = ordered_moment(ws, &[(&dn, t), (&dn, zero), (&dn, t)])?;
        let double = n2_n0 - n_n0_n * T::lit(2.0) + n0_n2;
        Some(real_part(double, "double commutator")?)
    } else {
        None
    };
    Ok(EqualTimeTerms {
        t,
        anticommutator: real_part(anti, "anticommutator")?,
        double_commutator,
    })
}

/// `<dn^2>` from the matrices, used by tests as an independent variance.
#[cfg(test)]
fn variance<T: Real>(ws: &FockWorkspace<T>) -> T {
    let dn = ws.fluctuation();
    let m = dn.dot(&dn).dot(ws.steady_state());
    (0..ws.dim()).map(|k| m[[k, k]].re).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{c_thermal_2, c_thermal_3};
    use crate::model::CavityParams;

    fn thermal() -> (CavityParams<f64>, FockWorkspace<f64>) {
        let p = CavityParams::<f64>::thermal(1.0, 1.0).unwrap();
        let ws = FockWorkspace::build(&p, 40).unwrap();
        (p, ws)
    }

    fn driven(delta: f64, n_th: f64, dim: usize) -> FockWorkspace<f64> {
        let p = CavityParams::<f64>::with_drive_photons(1.0, delta, 0.5, n_th).unwrap();
        FockWorkspace::build(&p, dim).unwrap()
    }

    #[test]
    fn coincident_three_point_is_skewness() {
        let ws = driven(1.0, 0.2, 24);
        let v = three_point(&ws, Placement::Chrono, 0.0, 0.0, 0.0).unwrap();
        assert!(v.im.abs() < 1e-14);
        assert!((v.re - skewness_at_coincidence(&ws)).abs() < 1e-12);
        assert!(three_point(&ws, Placement::Mixed, 1.0, 0.0, 2.0).is_err());
    }

    #[test]
    fn vacuum_has_no_fluctuations() {
        let p = CavityParams::<f64>::thermal(1.0, 0.0).unwrap();
        let ws = FockWorkspace::build(&p, 6).unwrap();
        for pl in [Placement::Chrono, Placement::Mixed, Placement::Anti, Placement::MixedRev] {
            assert!(three_point(&ws, pl, 0.0, 0.3, 1.0).unwrap().norm() < 1e-14);
        }
    }

    #[test]
    fn placements_match_general_strings() {
        let ws = driven(1.0, 0.3, 22);
        let dn = ws.fluctuation();
        let (r1, r2, r3) = (-0.4, 0.3, 1.1);
        let cases = [
            (Placement::Chrono, [r1, r2, r3]),
            (Placement::Mixed, [r1, r3, r2]),
            (Placement::Anti, [r3, r2, r1]),
            (Placement::MixedRev, [r2, r3, r1]),
        ];
        for (pl, t) in cases {
            let a = three_point(&ws, pl, r1, r2, r3).unwrap();
            let b = ordered_moment(&ws, &[(&dn, t[0]), (&dn, t[1]), (&dn, t[2])]).unwrap();
            assert!((a - b).norm() < 1e-12, "{pl:?}: {a} vs {b}");
        }
        assert!(ordered_moment(&ws, &[(&dn, 1.0), (&dn, 0.0), (&dn, 1.0)]).is_err());
    }

    #[test]
    fn thermal_third_cumulant_matches_closed_form() {
        let (p, ws) = thermal();
        for &(t1, t2) in &[(0.5, 0.5), (1.0, 0.3), (-0.7, 0.4), (-1.2, -0.2), (2.0, 0.0)] {
            let v = keldysh_c3(&ws, t1, t2).unwrap();
            let e = c_thermal_3(&p, 0.0, t1, t2);
            assert!((v - e).abs() < 1e-4 * e.abs(), "({t1},{t2}): {v} vs {e}");
        }
        let t = 0.8;
        assert!((keldysh_c3(&ws, t, t).unwrap() - 6.0 * (-t as f64).exp()).abs() < 1e-4);
        assert!((keldysh_c3(&ws, 0.0, 0.0).unwrap() - 6.0).abs() < 1e-6);
    }

    #[test]
    fn combinator_equals_kernel_sum() {
        let ws = driven(2.0, 0.2, 24);
        for &(t1, t2) in &[(0.6, 0.6), (-0.6, -0.6), (0.9, -0.4), (0.0, 0.7), (0.7, 0.0), (1.5, 0.2)] {
            let a = keldysh_c3(&ws, t1, t2).unwrap();
            let b = keldysh_c3_kernel_sum(&ws, t1, t2).unwrap();
            assert!((a - b).abs() < 1e-10 * a.abs().max(1e-3), "({t1},{t2}): {a} vs {b}");
            let s = keldysh_c3(&ws, t2, t1).unwrap();
            assert_eq!(a, s);
        }
    }

    #[test]
    fn kernel_sum_at_triple_coincidence() {
        // Literal kernel weights give 9/8 of the continuous value there.
        let ws = driven(1.0, 0.2, 24);
        let lit = keldysh_c3_kernel_sum(&ws, 0.0, 0.0).unwrap();
        let cont = keldysh_c3(&ws, 0.0, 0.0).unwrap();
        assert!((lit - 9.0 / 8.0 * cont).abs() < 1e-12 * cont.abs());
        let near = keldysh_c3(&ws, 1e-6, 2e-6).unwrap();
        assert!((near - cont).abs() < 1e-4 * cont.abs());
    }

    #[test]
    fn equal_time_decomposition() {
        let ws = driven(5.0, 0.0, 24);
        for &t in &[0.2, 0.7, 1.5] {
            for s in [t, -t] {
                let terms = equal_time_terms(&ws, s).unwrap();
                let c = keldysh_c3(&ws, s, s).unwrap();
                assert!((terms.combined() - c).abs() < 1e-9 * c.abs(), "t={s}: {terms:?} vs {c}");
            }
            let pos = keldysh_c3(&ws, t, t).unwrap();
            let neg = keldysh_c3(&ws, -t, -t).unwrap();
            assert!((pos - neg).abs() > 1e-3 * pos.abs());
        }
        let at0 = equal_time_terms(&ws, 0.0).unwrap();
        assert!(at0.double_commutator.unwrap().abs() < 1e-12);
        assert!(equal_time_terms(&ws, 0.5).unwrap().double_commutator.is_none());
    }

    #[test]
    fn second_cumulant() {
        let (p, ws) = thermal();
        for &tau in &[0.0, 0.4, -1.3, 3.0] {
            let v = keldysh_c2(&ws, tau).unwrap();
            assert!((v - c_thermal_2(&p, tau)).abs() < 1e-6, "{tau}: {v}");
        }
        let ws = driven(1.0, 0.3, 24);
        assert!((keldysh_c2(&ws, 0.0).unwrap() - variance(&ws)).abs() < 1e-12);
    }

    #[test]
    fn truncation_convergence() {
        let a = driven(1.0, 0.5, 25);
        let b = driven(1.0, 0.5, 30);
        for &(t1, t2) in &[(0.5, 0.5), (-0.5, 1.0), (0.0, 2.0)] {
            let x = keldysh_c3(&a, t1, t2).unwrap();
            let y = keldysh_c3(&b, t1, t2).unwrap();
            assert!((x - y).abs() < 1e-4 * x.abs().max(1e-3), "{x} {y}");
        }
    }
}

//! Validation suite: each criterion cross-checks the closed forms against an independent
//! computation (quadrature, truncated-Fock oracle, phase-space integration, Monte Carlo).
//!
//! Closed forms enter only through [`SpectrumFormulas`], so the same checks can be run
//! against deliberately corrupted formulas ([`Mutation`]) to show that they would notice.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    c3_squeezed_equal_time, c_thermal_3, s_total, ClosedForm, FreqTriple, SpectrumFormulas,
};
use crate::error::Result;
use crate::langevin::{
    classical_bispectrum, combine_c3, map_driven, map_squeezed, third_moment_single,
    BispectrumEstimator, SdeConfig, Window,
};
use crate::lindblad::{equal_time_terms, keldysh_c3, FockWorkspace, LagTable};
use crate::model::{
    linspace, CavityParams, FreqGrid2D, ParamsSnapshot, SqueezedBathParams,
};
use crate::ode::IntegratorConfig;
use crate::quadrature::fourier_transform_lag_function;
use crate::scalar::Complex;
use crate::spectroscopy::{default_t_f, estimate_im_bispectrum, scaling_exponent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Level {
    /// Reduced sample counts; well under a minute.
    Quick,
    /// Sample counts and sizes as stated in each criterion.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<34} {} ({:.1} s): {}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.seconds,
            self.detail
        )
    }
}

fn report(id: u8, name: &str, start: Instant, outcome: Result<(bool, String)>) -> CriterionReport {
    let (passed, detail) = match outcome {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionReport {
        id,
        name: name.to_string(),
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn close(a: Complex<f64>, b: Complex<f64>, rel: f64, abs: f64) -> bool {
    (a - b).norm() <= rel * a.norm().max(b.norm()) + abs
}

// ---------------------------------------------------------------------------------------------
// Criterion 1

/// Symmetry identities of the closed forms on random parameters and frequencies.
pub fn analytic_identities<F: SpectrumFormulas<f64>>(f: &F, samples: usize, seed: u64) -> (bool, String) {
    const REL: f64 = 1e-12;
    const ABS: f64 = 1e-10;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures: Vec<String> = Vec::new();
    let mut note = |what: &str, p: &CavityParams<f64>, w: (f64, f64)| {
        if failures.len() < 3 {
            failures.push(format!(
                "{what} at gamma={:.3} delta={:.3} n_th={:.3} w=({:.3},{:.3})",
                p.gamma, p.delta, p.n_th, w.0, w.1
            ));
        }
    };
    let mut count = 0usize;
    for _ in 0..samples {
        let gamma = rng.random_range(0.5..2.0);
        let delta = rng.random_range(-5.0..5.0);
        let n_th = rng.random_range(0.0..3.0);
        let n_dr: f64 = rng.random_range(0.0..3.0);
        let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let w1 = rng.random_range(-10.0..10.0);
        let w2 = rng.random_range(-10.0..10.0);
        let amp = (n_dr * (gamma * gamma + 4.0 * delta * delta) / 4.0).sqrt();
        let p = CavityParams::new(gamma, delta, Complex::from_polar(amp, phase), n_th)
            .expect("valid sample");
        let w = FreqTriple::new(w1, w2);
        let s = f.total(&p, w);
        let mut bad = false;
        for (a, b) in [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)] {
            if !close(f.total(&p, w.permuted(a, b)), s, REL, ABS) {
                note("permutation symmetry", &p, (w1, w2));
                bad = true;
                break;
            }
        }
        if !close(f.total(&p, FreqTriple::new(-w1, -w2)), s.conj(), REL, ABS) {
            note("Hermitian symmetry", &p, (w1, w2));
            bad = true;
        }
        for axis in [FreqTriple::new(0.0, w2), FreqTriple::new(w1, 0.0), FreqTriple::new(w1, -w1)] {
            let v = f.total(&p, axis);
            if v.im.abs() > REL * v.norm() + ABS {
                note("axis reality", &p, (axis.omega1(), axis.omega2()));
                bad = true;
            }
        }
        if f.thermal(&p, w) < 0.0 {
            note("thermal positivity", &p, (w1, w2));
            bad = true;
        }
        if f.classical_shape(&p, w) < 0.0 {
            note("classical-shape positivity", &p, (w1, w2));
            bad = true;
        }
        if !close(f.total(&p.mirrored(), w), s, REL, ABS) {
            note("detuning parity", &p, (w1, w2));
            bad = true;
        }
        let rotated = CavityParams::new(gamma, delta, Complex::new(amp, 0.0), n_th).expect("valid");
        if !close(f.total(&rotated, w), s, REL, ABS) {
            note("drive-phase invariance", &p, (w1, w2));
            bad = true;
        }
        count += usize::from(bad);
    }
    if count == 0 {
        (true, format!("{samples} samples, all identities hold"))
    } else {
        (false, format!("{count}/{samples} samples violate: {}", failures.join("; ")))
    }
}

// ---------------------------------------------------------------------------------------------
// Criterion 2

const FOURIER_AXIS: [f64; 5] = [-2.0, -0.7, 0.0, 0.9, 2.5];

/// Numerical transform of the thermal time-domain cumulant (`gamma = 1`, `n_th = 1`,
/// window `40 / gamma`) at the 5 x 5 frequency sample.
pub fn thermal_transform_samples() -> Result<Vec<((f64, f64), Complex<f64>)>> {
    let p = CavityParams::thermal(1.0, 1.0)?;
    let c = |a: f64, b: f64| c_thermal_3(&p, 0.0, a, b);
    let mut out = Vec::with_capacity(25);
    for &w1 in &FOURIER_AXIS {
        for &w2 in &FOURIER_AXIS {
            out.push(((w1, w2), fourier_transform_lag_function(c, w1, w2, 40.0, 1e-8)?));
        }
    }
    Ok(out)
}

pub fn fourier_consistency<F: SpectrumFormulas<f64>>(
    f: &F,
    samples: &[((f64, f64), Complex<f64>)],
) -> (bool, String) {
    let p = CavityParams::thermal(1.0, 1.0).expect("valid");
    let mut worst: f64 = 0.0;
    for &((w1, w2), v) in samples {
        let e = f.thermal(&p, FreqTriple::new(w1, w2));
        worst = worst.max((v - Complex::new(e, 0.0)).norm() / e.abs().max(1e-300));
    }
    (worst < 1e-4, format!("{} pairs, max relative error {worst:.2e} (< 1e-4)", samples.len()))
}

// ---------------------------------------------------------------------------------------------
// Criterion 3

pub const THERMAL_LAG_PAIRS: [(f64, f64); 20] = [
    (0.25, 0.25),
    (0.5, 0.5),
    (1.0, 1.0),
    (2.0, 2.0),
    (0.5, 0.0),
    (0.0, 1.5),
    (1.0, 0.3),
    (0.3, 2.2),
    (-0.5, -0.5),
    (-1.0, -1.0),
    (-2.0, -0.7),
    (-0.3, -1.8),
    (0.8, -0.6),
    (-1.2, 0.4),
    (1.5, -1.5),
    (-2.5, 0.5),
    (3.0, 1.0),
    (-3.0, -2.0),
    (0.1, -0.1),
    (2.5, 2.4),
];

pub fn lindblad_thermal() -> Result<(bool, String)> {
    let p = CavityParams::thermal(1.0, 1.0)?;
    let ws = FockWorkspace::build(&p, 40)?;
    let mut worst: f64 = 0.0;
    for &(t1, t2) in &THERMAL_LAG_PAIRS {
        let v = keldysh_c3(&ws, t1, t2)?;
        let e = c_thermal_3(&p, 0.0, t1, t2);
        worst = worst.max((v - e).abs() / e.abs());
    }
    Ok((
        worst < 1e-3,
        format!("dim 40, 20 lag pairs, max relative error {worst:.2e} (< 1e-3)"),
    ))
}

// ---------------------------------------------------------------------------------------------
// Criterion 4

/// Sample frequencies for the driven comparison. Points where the total nearly cancels
/// (such as the origin at `n_th = 0`) are excluded because a relative criterion is
/// meaningless there.
pub const DRIVEN_SAMPLE_POINTS: [(f64, f64); 10] = [
    (0.5, 0.5),
    (1.0, 0.25),
    (2.0, 1.0),
    (-1.5, 0.7),
    (0.3, 2.2),
    (-2.5, -0.4),
    (1.2, 0.0),
    (4.0, -1.0),
    (0.8, -1.7),
    (-0.6, 1.9),
];

/// Oracle bispectrum values at [`DRIVEN_SAMPLE_POINTS`] for `n_th = 0` and `0.5`.
#[derive(Clone, Debug)]
pub struct DrivenOracle {
    pub cases: Vec<(CavityParams<f64>, Vec<((f64, f64), Complex<f64>, f64)>)>,
    pub dim: usize,
    pub window_t: f64,
    pub n_tau: usize,
}

pub fn driven_oracle(dim: usize, window_t: f64, n_tau: usize) -> Result<DrivenOracle> {
    let mut cases = Vec::new();
    for n_th in [0.0, 0.5] {
        let p = CavityParams::with_drive_photons(1.0, 1.0, 0.5, n_th)?;
        let ws = FockWorkspace::build(&p, dim)?;
        let table = LagTable::new(&ws, window_t, n_tau)?;
        let values = table.transform_points(&DRIVEN_SAMPLE_POINTS);
        cases.push((
            p,
            DRIVEN_SAMPLE_POINTS
                .iter()
                .zip(values)
                .map(|(&w, (v, u))| (w, v, u))
                .collect(),
        ));
    }
    Ok(DrivenOracle {
        cases,
        dim,
        window_t,
        n_tau,
    })
}

pub fn lindblad_driven<F: SpectrumFormulas<f64>>(f: &F, oracle: &DrivenOracle) -> (bool, String) {
    let mut worst: f64 = 0.0;
    let mut at = (0.0, (0.0, 0.0));
    for (p, points) in &oracle.cases {
        for &((w1, w2), v, _) in points {
            let e = f.total(p, FreqTriple::new(w1, w2));
            let rel = (v - e).norm() / e.norm().max(1e-300);
            if rel > worst {
                worst = rel;
                at = (p.n_th, (w1, w2));
            }
        }
    }
    (
        worst < 0.05,
        format!(
            "dim {}, window {}, {} lags; max relative error {worst:.2e} at n_th={} w={:?} (< 5e-2)",
            oracle.dim, oracle.window_t, oracle.n_tau, at.0, at.1
        ),
    )
}

// ---------------------------------------------------------------------------------------------
// Criterion 5

pub fn equal_time_decomposition() -> Result<(bool, String)> {
    let p = CavityParams::with_drive_photons(1.0, 5.0, 1.0, 0.0)?;
    let ws = FockWorkspace::build_auto(&p)?;
    let mut worst: f64 = 0.0;
    let mut asym: f64 = 0.0;
    for k in 1..=10 {
        let t = 0.2 * k as f64;
        let mut vals = [0.0; 2];
        for (i, s) in [t, -t].into_iter().enumerate() {
            let c = keldysh_c3(&ws, s, s)?;
            let terms = equal_time_terms(&ws, s)?;
            worst = worst.max((terms.combined() - c).abs() / c.abs().max(1e-12));
            vals[i] = c;
        }
        asym = asym.max((vals[0] - vals[1]).abs() / vals[0].abs().max(vals[1].abs()));
    }
    Ok((
        worst < 1e-6 && asym > 1e-2,
        format!(
            "dim {}, 10 |t| values: max relative mismatch {worst:.2e} (< 1e-6); max |c3(t)-c3(-t)|/|c3| = {asym:.2}",
            ws.dim()
        ),
    ))
}

// ---------------------------------------------------------------------------------------------
// Criterion 6

pub fn spectroscopy_check() -> Result<(bool, String)> {
    let p = CavityParams::<f64>::with_drive_photons(1.0, 10.0, 1.0, 0.0)?;
    let omega = 3.0;
    let cfg = IntegratorConfig::default();
    let t_f = default_t_f(1.0, omega);
    let exact = s_total(&p, FreqTriple::new(omega, omega)).im;
    let est = estimate_im_bispectrum(&p, omega, &[0.05, 0.1, 0.2, 0.3], t_f, &cfg)?;
    let rel = (est.estimate - exact).abs() / exact.abs();
    let lambdas = linspace(0.05, 0.5, 10)?;
    let slope = scaling_exponent(&p, omega, &lambdas, t_f, &cfg)?;
    Ok((
        rel < 0.1 && (slope - 3.0).abs() <= 0.1,
        format!(
            "Im S = {:.4e} vs {exact:.4e} (relative {rel:.1e}, < 0.1); exponent {slope:.3} (3 +/- 0.1)",
            est.estimate
        ),
    ))
}

// ---------------------------------------------------------------------------------------------
// Criterion 7

pub const LANGEVIN_SAMPLE_POINTS: [(f64, f64); 5] =
    [(0.5, 0.5), (1.0, -0.5), (0.3, 1.0), (-1.0, 0.4), (1.5, 0.5)];

pub fn langevin_driven(n_traj: usize, seed: u64) -> Result<(bool, String)> {
    let p = CavityParams::<f64>::with_drive_photons(1.0, 0.0, 10.0, 50.0)?;
    let cfg = SdeConfig::<f64>::new(1.0, 0.01, 200.0, n_traj, seed).with_stride(5);
    let segment = (100.0 / cfg.sample_spacing()).round() as usize;
    let ests: Vec<BispectrumEstimator<f64>> = LANGEVIN_SAMPLE_POINTS
        .iter()
        .map(|&(a, b)| {
            BispectrumEstimator::new(&FreqGrid2D::single(a, b), cfg.sample_spacing(), segment, Window::Hann)
        })
        .collect::<Result<_>>()?;
    let per = map_driven(&p, &cfg, |t| {
        let n = t.photon_number();
        ests.iter()
            .map(|e| e.record_average(&n).map(|v| v[0]))
            .collect::<Result<Vec<_>>>()
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut ok = true;
    let mut worst_z: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    for (i, &(a, b)) in LANGEVIN_SAMPLE_POINTS.iter().enumerate() {
        let rec: Vec<Vec<Complex<f64>>> = per.iter().map(|v| vec![v[i]]).collect();
        let out = ests[i].combine(&rec, ParamsSnapshot::Cavity(p));
        let v = out.surface.values[0];
        let e = classical_bispectrum(&p, FreqTriple::new(a, b));
        let dev = (v.re - e).abs();
        ok &= dev <= 3.0 * out.stderr_re[0] + 0.1 * e.abs();
        ok &= v.im.abs() <= 3.0 * out.stderr_im[0] + 0.1 * e.abs();
        worst_z = worst_z.max(dev / out.stderr_re[0]);
        worst_rel = worst_rel.max(dev / e.abs());
    }
    Ok((
        ok,
        format!(
            "{n_traj} trajectories x 200/gamma; worst deviation {worst_z:.2} sigma, {:.1}% of reference",
            100.0 * worst_rel
        ),
    ))
}

// ---------------------------------------------------------------------------------------------
// Criterion 8

pub fn squeezed_bath(n_traj: usize, seed: u64) -> Result<(bool, String)> {
    // r = 0 reduction
    let mut reduction: f64 = 0.0;
    for &(delta, n_cl) in &[(0.0, 1.0), (1.0, 0.3), (-2.0, 2.5)] {
        let sp = SqueezedBathParams::<f64>::new(1.0, delta, 0.0, n_cl)?;
        let p = CavityParams::thermal(1.0, n_cl)?;
        for &t in &[-1.5, -0.3, 0.0, 0.4, 2.0] {
            let a = c3_squeezed_equal_time(&sp, t);
            let b = c_thermal_3(&p, 0.0, t, t);
            reduction = reduction.max((a - b).abs() / b.abs());
        }
    }
    // truncated-Fock oracle with the squeezed dissipator
    let sp = SqueezedBathParams::<f64>::new(1.0, 1.0, 0.5, 0.3)?;
    let ws = FockWorkspace::build_squeezed(&sp, 30)?;
    let mut oracle: f64 = 0.0;
    for &t in &[-2.0, -1.0, -0.5, -0.25, 0.25, 0.5, 1.0, 2.0] {
        let v = keldysh_c3(&ws, t, t)?;
        let e = c3_squeezed_equal_time(&sp, t);
        oracle = oracle.max((v - e).abs() / e.abs());
    }
    // classical two-quadrature model: time asymmetry
    let cfg = SdeConfig::<f64>::new(1.0, 0.01, 200.0, n_traj, seed).with_stride(5);
    let pairs = [(1.0, 1.0), (-1.0, -1.0)];
    let per = map_squeezed(&sp, &cfg, |t| third_moment_single(&t.photon_number(), t.dt, &pairs))?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let e = combine_c3(&per, 2);
    let z = (e[0].mean - e[1].mean).abs() / (e[0].stderr.powi(2) + e[1].stderr.powi(2)).sqrt();
    Ok((
        reduction < 1e-12 && oracle < 0.02 && z > 3.0,
        format!(
            "r=0 reduction {reduction:.1e} (< 1e-12); Fock oracle {oracle:.1e} (< 2e-2); classical asymmetry {z:.1} sigma (> 3)"
        ),
    ))
}

// ---------------------------------------------------------------------------------------------
// Criterion 9

/// Sign patterns of the closed-form surfaces (evaluated in memory).
pub fn surface_patterns<F: SpectrumFormulas<f64>>(f: &F) -> Result<(bool, String)> {
    let surface = |p: &CavityParams<f64>, min: f64, max: f64, count: usize| -> Result<Vec<((f64, f64), Complex<f64>)>> {
        let grid = FreqGrid2D::square(min, max, count)?;
        Ok(grid.points().map(|(a, b)| ((a, b), f.total(p, FreqTriple::new(a, b)))).collect())
    };
    let mut msgs = Vec::new();
    let mut ok = true;
    // Classical limit: real and positive.
    let classical = CavityParams::with_drive_photons(1.0, 10.0, 1.0, 1e6)?;
    let s = surface(&classical, -15.0, 15.0, 101)?;
    let max_re = s.iter().map(|v| v.1.re).fold(f64::MIN, f64::max);
    let min_re = s.iter().map(|v| v.1.re).fold(f64::MAX, f64::min);
    let max_im = s.iter().map(|v| v.1.im.abs()).fold(0.0, f64::max);
    let a = min_re > 0.0 && max_im < 1e-6 * max_re;
    ok &= a;
    msgs.push(format!("classical min Re {min_re:.2e} > 0, max|Im|/max Re {:.1e}", max_im / max_re));
    // Quantum limit: negative real part and nonzero imaginary part.
    let quantum = CavityParams::with_drive_photons(1.0, 10.0, 1.0, 0.0)?;
    let s = surface(&quantum, -15.0, 15.0, 101)?;
    let min_re = s.iter().map(|v| v.1.re).fold(f64::MAX, f64::min);
    let max_im = s.iter().map(|v| v.1.im.abs()).fold(0.0, f64::max);
    let b = min_re < 0.0 && max_im > 0.0;
    ok &= b;
    msgs.push(format!("quantum min Re {min_re:.2e} < 0, max|Im| {max_im:.2e} > 0"));
    // Imaginary parts at delta = 0 and delta = gamma: nonzero, vanishing on the axes.
    for delta in [0.0, 1.0] {
        let p = CavityParams::with_drive_photons(1.0, delta, 1.0, 0.0)?;
        let s = surface(&p, -5.0, 5.0, 101)?;
        let max_im = s.iter().map(|v| v.1.im.abs()).fold(0.0, f64::max);
        let scale = s.iter().map(|v| v.1.norm()).fold(0.0, f64::max);
        let on_axes = s
            .iter()
            .filter(|((a, b), _)| *a == 0.0 || *b == 0.0 || (a + b).abs() < 1e-12)
            .map(|v| v.1.im.abs())
            .fold(0.0, f64::max);
        let c = max_im > 1e-3 * scale && on_axes < 1e-10 * scale;
        ok &= c;
        msgs.push(format!("delta={delta}: max|Im| {max_im:.2e}, on axes {on_axes:.1e}"));
    }
    Ok((ok, msgs.join("; ")))
}

// ---------------------------------------------------------------------------------------------
// Criterion 10

/// Single-term corruptions of the closed forms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mutation {
    /// `6 gamma^2` in the thermal numerator.
    ThermalConstant,
    /// `sum omega^2` in the thermal numerator.
    ThermalQuadratic,
    /// `omega_1^2` in the first thermal denominator factor.
    ThermalDenominator,
    /// Overall sign of the classical drive shape.
    ClassicalPrefactor,
    /// `4 (omega/gamma)^2` in the Lorentzian factors.
    ClassicalLorentzian,
    /// `+delta` shift of the first frequency of each pair.
    ClassicalDetuning,
    /// One of the six ordered-pair terms of the classical shape.
    ClassicalPairTerm,
    /// Overall `-1/2` of the quantum shape.
    QuantumPrefactor,
    /// `gamma / 2` in the numerator.
    QuantumNumeratorRate,
    /// `i omega_beta` in the numerator.
    QuantumNumeratorFrequency,
    /// `i omega_alpha` in the pole factor.
    QuantumPoleFrequency,
    /// `delta^2` in the denominator.
    QuantumDetuning,
    /// One of the six ordered-pair terms of the quantum shape.
    QuantumPairTerm,
}

impl Mutation {
    pub const ALL: [Mutation; 13] = [
        Mutation::ThermalConstant,
        Mutation::ThermalQuadratic,
        Mutation::ThermalDenominator,
        Mutation::ClassicalPrefactor,
        Mutation::ClassicalLorentzian,
        Mutation::ClassicalDetuning,
        Mutation::ClassicalPairTerm,
        Mutation::QuantumPrefactor,
        Mutation::QuantumNumeratorRate,
        Mutation::QuantumNumeratorFrequency,
        Mutation::QuantumPoleFrequency,
        Mutation::QuantumDetuning,
        Mutation::QuantumPairTerm,
    ];

    pub fn name(self) -> String {
        serde_json::to_string(&self)
            .map(|s| s.trim_matches('"').to_string())
            .unwrap_or_else(|_| format!("{self:?}"))
    }
}

impl std::str::FromStr for Mutation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Mutation::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<String> = Mutation::ALL.iter().map(|m| m.name()).collect();
                format!("unknown mutation '{s}' (expected one of {})", names.join(", "))
            })
    }
}

const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)];

/// Closed forms with exactly one term's sign flipped.
#[derive(Clone, Copy, Debug)]
pub struct Mutated(pub Mutation);

impl Mutated {
    fn flip(&self, m: Mutation) -> f64 {
        if self.0 == m {
            -1.0
        } else {
            1.0
        }
    }
}

impl SpectrumFormulas<f64> for Mutated {
    fn thermal(&self, p: &CavityParams<f64>, w: FreqTriple<f64>) -> f64 {
        let g2 = p.gamma * p.gamma;
        let ws = w.as_array();
        let sum_sq: f64 = ws.iter().map(|x| x * x).sum();
        let mut den = 1.0;
        for (k, x) in ws.iter().enumerate() {
            let s = if k == 0 { self.flip(Mutation::ThermalDenominator) } else { 1.0 };
            den *= g2 + s * x * x;
        }
        let n = p.n_th;
        n * (n + 1.0) * (2.0 * n + 1.0) * g2
            * (self.flip(Mutation::ThermalConstant) * 6.0 * g2
                + self.flip(Mutation::ThermalQuadratic) * sum_sq)
            / den
    }

    fn classical_shape(&self, p: &CavityParams<f64>, w: FreqTriple<f64>) -> f64 {
        let ws = w.as_array();
        let l = |x: f64| 1.0 + self.flip(Mutation::ClassicalLorentzian) * 4.0 * (x / p.gamma).powi(2);
        let sum: f64 = PAIRS
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| {
                let s = if k == 0 { self.flip(Mutation::ClassicalPairTerm) } else { 1.0 };
                s / (l(ws[a] + self.flip(Mutation::ClassicalDetuning) * p.delta) * l(ws[b] - p.delta))
            })
            .sum();
        self.flip(Mutation::ClassicalPrefactor) * 4.0 / (p.gamma * p.gamma) * sum
    }

    fn quantum_shape(&self, p: &CavityParams<f64>, w: FreqTriple<f64>) -> Complex<f64> {
        let ws = w.as_array();
        let i = Complex::new(0.0, 1.0);
        let sum: Complex<f64> = PAIRS
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| {
                let num = self.flip(Mutation::QuantumNumeratorRate) * p.gamma / 2.0
                    + self.flip(Mutation::QuantumNumeratorFrequency) * i * ws[b];
                let den = (p.gamma - self.flip(Mutation::QuantumPoleFrequency) * i * ws[a])
                    * (num * num + self.flip(Mutation::QuantumDetuning) * p.delta * p.delta);
                let s = if k == 0 { self.flip(Mutation::QuantumPairTerm) } else { 1.0 };
                num / den * s
            })
            .sum();
        sum * (self.flip(Mutation::QuantumPrefactor) * -0.5)
    }
}

/// Cached oracle data reused by the formula-dependent criteria.
#[derive(Clone, Debug)]
pub struct OracleCache {
    pub fourier: Vec<((f64, f64), Complex<f64>)>,
    pub driven: DrivenOracle,
}

impl OracleCache {
    pub fn compute() -> Result<Self> {
        Ok(Self {
            fourier: thermal_transform_samples()?,
            driven: driven_oracle(25, 30.0, 241)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MutationOutcome {
    pub mutation: Mutation,
    /// Formula-dependent criteria (1, 2, 4, 9) that failed.
    pub failed: Vec<u8>,
}

impl MutationOutcome {
    pub fn caught(&self) -> bool {
        self.failed.iter().any(|&c| (1..=4).contains(&c))
    }
}

/// Runs the formula-dependent criteria against `formulas`; returns the ids that fail.
pub fn failing_formula_criteria<F: SpectrumFormulas<f64>>(
    formulas: &F,
    cache: &OracleCache,
    identity_samples: usize,
) -> Vec<u8> {
    let mut failed = Vec::new();
    if !analytic_identities(formulas, identity_samples, 1).0 {
        failed.push(1);
    }
    if !fourier_consistency(formulas, &cache.fourier).0 {
        failed.push(2);
    }
    if !lindblad_driven(formulas, &cache.driven).0 {
        failed.push(4);
    }
    if !matches!(surface_patterns(formulas), Ok((true, _))) {
        failed.push(9);
    }
    failed
}

pub fn mutation_outcomes(cache: &OracleCache, identity_samples: usize) -> Vec<MutationOutcome> {
    Mutation::ALL
        .iter()
        .map(|&m| MutationOutcome {
            mutation: m,
            failed: failing_formula_criteria(&Mutated(m), cache, identity_samples),
        })
        .collect()
}

pub fn mutation_sentinel(cache: &OracleCache, identity_samples: usize) -> (bool, String) {
    let outcomes = mutation_outcomes(cache, identity_samples);
    let missed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.caught())
        .map(|o| o.mutation.name())
        .collect();
    let clean = failing_formula_criteria(&ClosedForm, cache, identity_samples);
    let summary: Vec<String> = outcomes
        .iter()
        .map(|o| format!("{}->{:?}", o.mutation.name(), o.failed))
        .collect();
    (
        missed.is_empty() && clean.is_empty(),
        if missed.is_empty() {
            format!("all {} mutations caught by criteria 1-4 [{}]", outcomes.len(), summary.join(", "))
        } else {
            format!("not caught: {}", missed.join(", "))
        },
    )
}

// ---------------------------------------------------------------------------------------------

pub fn identity_samples(level: Level) -> usize {
    match level {
        Level::Quick => 200,
        Level::Full => 1000,
    }
}

fn trajectories(level: Level, full: usize) -> usize {
    match level {
        Level::Quick => full / 4,
        Level::Full => full,
    }
}

/// Criteria 1-10 in order, with oracle data shared by 2, 4 and 10.
pub fn run_suite(level: Level) -> Vec<CriterionReport> {
    run_suite_with(level, &ClosedForm)
}

/// As [`run_suite`] with the formula-dependent criteria evaluated against `formulas`.
pub fn run_suite_with<F: SpectrumFormulas<f64>>(level: Level, formulas: &F) -> Vec<CriterionReport> {
    let mut out = Vec::with_capacity(10);
    let n_id = identity_samples(level);

    let t = Instant::now();
    out.push(report(1, "analytic identities", t, Ok(analytic_identities(formulas, n_id, 1))));

    let t = Instant::now();
    let fourier = thermal_transform_samples();
    let c2 = fourier.as_ref().map(|s| fourier_consistency(formulas, s)).map_err(Clone::clone);
    out.push(report(2, "Fourier consistency", t, c2));

    let t = Instant::now();
    out.push(report(3, "Lindblad vs thermal cumulant", t, lindblad_thermal()));

    let t = Instant::now();
    let driven = driven_oracle(25, 30.0, 241);
    let c4 = driven.as_ref().map(|d| lindblad_driven(formulas, d)).map_err(Clone::clone);
    out.push(report(4, "Lindblad vs driven bispectrum", t, c4));

    let t = Instant::now();
    out.push(report(5, "equal-time decomposition", t, equal_time_decomposition()));

    let t = Instant::now();
    out.push(report(6, "spectroscopy", t, spectroscopy_check()));

    let t = Instant::now();
    out.push(report(7, "Langevin vs classical bispectrum", t, langevin_driven(trajectories(level, 2000), 2024)));

    let t = Instant::now();
    out.push(report(8, "squeezed bath", t, squeezed_bath(trajectories(level, 1000), 7)));

    let t = Instant::now();
    out.push(report(9, "surface sign patterns", t, surface_patterns(formulas)));

    let t = Instant::now();
    let c10 = match (fourier, driven) {
        (Ok(fourier), Ok(driven)) => Ok(mutation_sentinel(&OracleCache { fourier, driven }, n_id)),
        (Err(e), _) | (_, Err(e)) => Err(e),
    };
    out.push(report(10, "mutation sentinel", t, c10));
    out
}

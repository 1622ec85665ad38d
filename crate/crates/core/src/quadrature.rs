//! Gauss–Legendre panel quadrature and a 2D Fourier transform for lag functions that are
//! smooth away from the lines `tau1 = 0`, `tau2 = 0` and `tau1 = tau2`.

use crate::error::{invalid, Error, Result};
use crate::scalar::{Complex, Real};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule: nodes and weights on `[a, b]` split into `panels` pieces.
#[derive(Clone, Debug)]
pub struct PanelRule<T> {
    unit_nodes: Vec<T>,
    unit_weights: Vec<T>,
}

impl<T: Real> PanelRule<T> {
    pub fn new(order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        Self {
            unit_nodes: x.into_iter().map(T::lit).collect(),
            unit_weights: w.into_iter().map(T::lit).collect(),
        }
    }

    pub fn points(&self, a: T, b: T, panels: usize) -> impl Iterator<Item = (T, T)> + '_ {
        let width = (b - a) / T::from_usize_lossy(panels.max(1));
        let half = width * T::lit(0.5);
        (0..panels.max(1)).flat_map(move |k| {
            let mid = a + width * (T::from_usize_lossy(k) + T::lit(0.5));
            self.unit_nodes
                .iter()
                .zip(&self.unit_weights)
                .map(move |(&x, &w)| (mid + half * x, half * w))
        })
    }

    pub fn integrate<F: FnMut(T) -> T>(&self, mut f: F, a: T, b: T, panels: usize) -> T {
        self.points(a, b, panels).map(|(x, w)| w * f(x)).sum()
    }
}

/// `∬_{[-window, window]^2} c(tau1, tau2) e^{-i(omega1 tau1 + omega2 tau2)}` for a function that
/// is smooth on each of the six regions cut out by `tau1 = 0`, `tau2 = 0`, `tau1 = tau2`.
///
/// Panel widths are halved until two successive estimates agree to `rel_tol`.
pub fn fourier_transform_lag_function<T, F>(
    c: F,
    omega1: T,
    omega2: T,
    window: T,
    rel_tol: T,
) -> Result<Complex<T>>
where
    T: Real,
    F: Fn(T, T) -> T,
{
    if !(window > T::zero()) || !(rel_tol > T::zero()) {
        return invalid("window and tolerance must be > 0");
    }
    let rule = PanelRule::<T>::new(10);
    let mut width = T::lit(1.0).min(window);
    let mut prev = transform_at_width(&c, omega1, omega2, window, width, &rule);
    for _ in 0..8 {
        width = width * T::lit(0.5);
        let next = transform_at_width(&c, omega1, omega2, window, width, &rule);
        let scale = next.norm().max(T::min_positive_value());
        if (next - prev).norm() <= rel_tol * scale {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::InsufficientData(format!(
        "lag-function Fourier quadrature did not reach rel_tol {rel_tol} at ({omega1}, {omega2})"
    )))
}

fn transform_at_width<T: Real, F: Fn(T, T) -> T>(
    c: &F,
    w1: T,
    w2: T,
    window: T,
    width: T,
    rule: &PanelRule<T>,
) -> Complex<T> {
    let zero = T::zero();
    let panels = |len: T| (len / width).ceil().to_usize().unwrap_or(1).max(1);
    let kernel = |t1: T, t2: T| {
        let phase = -(w1 * t1 + w2 * t2);
        Complex::new(phase.cos(), phase.sin()) * c(t1, t2)
    };
    let mut acc = Complex::new(zero, zero);
    let n = panels(window);
    // Opposite-sign quadrants: rectangles.
    for (x1, v1) in rule.points(-window, zero, n) {
        for (x2, v2) in rule.points(zero, window, n) {
            acc = acc + (kernel(x1, x2) + kernel(x2, x1)) * (v1 * v2);
        }
    }
    // Same-sign quadrants, each split along the diagonal: 0 <= a <= b <= window.
    for (b, vb) in rule.points(zero, window, n) {
        let m = panels(b);
        for (a, va) in rule.points(zero, b, m) {
            let w = va * vb;
            acc = acc + (kernel(a, b) + kernel(b, a) + kernel(-a, -b) + kernel(-b, -a)) * w;
        }
    }
    acc
}

//! Riemann–Liouville fractional integrals and derivatives on a uniform grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid `t_m = m dt`, `m = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_max: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, n_steps: usize) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) || n_steps == 0 {
            return Err(Error::Domain(format!(
                "time grid needs t_max > 0 and n_steps > 0, got t_max = {t_max}, n_steps = {n_steps}"
            )));
        }
        Ok(Self { t_max, n_steps })
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.t_max / self.n_steps as f64
    }

    #[inline]
    pub fn node(&self, m: usize) -> f64 {
        m as f64 * self.dt()
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(|m| self.node(m))
    }
}

/// Samples of a function at every node of a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: TimeGrid, g: impl Fn(f64) -> f64) -> Self {
        Self { grid, values: grid.nodes().map(g).collect() }
    }
}

fn check_order(alpha: f64) {
    assert!(alpha > 0.0 && alpha < 1.0, "fractional order must lie in (0, 1), got {alpha}");
}

/// Product-trapezoidal `J^α`: exact for piecewise-linear samples.
///
/// # Panics
/// If `alpha` is outside `(0, 1)`.
pub fn frac_integral(g: &SampledFunction, alpha: f64) -> SampledFunction {
    check_order(alpha);
    let n = g.grid.n_steps;
    let scale = g.grid.dt().powf(alpha) / libm::tgamma(alpha + 2.0);
    let p: Vec<f64> = (0..=n + 1).map(|k| (k as f64).powf(alpha + 1.0)).collect();
    let mut out = vec![0.0; n + 1];
    for (m, o) in out.iter_mut().enumerate().skip(1) {
        let mf = m as f64;
        let mut acc = (p[m - 1] - (mf - 1.0 - alpha) * mf.powf(alpha)) * g.values[0] + g.values[m];
        for j in 1..m {
            let k = m - j;
            acc += (p[k + 1] - 2.0 * p[k] + p[k - 1]) * g.values[j];
        }
        *o = scale * acc;
    }
    SampledFunction { grid: g.grid, values: out }
}

/// Precomputed L1 weights for `D^α` on a fixed grid.
#[derive(Debug, Clone)]
pub struct FracDerivative {
    alpha: f64,
    dt: f64,
    w: Vec<f64>,
}

impl FracDerivative {
    /// # Panics
    /// If `alpha` is outside `(0, 1)`.
    pub fn new(grid: TimeGrid, alpha: f64) -> Self {
        check_order(alpha);
        let dt = grid.dt();
        let c = dt.powf(-alpha) / libm::tgamma(2.0 - alpha);
        let w = (0..grid.n_steps)
            .map(|k| c * ((k as f64 + 1.0).powf(1.0 - alpha) - (k as f64).powf(1.0 - alpha)))
            .collect();
        Self { alpha, dt, w }
    }

    /// `D^α` at node `n` from the samples `r[0..=n]`.
    ///
    /// A nonzero `r[0]` contributes `r[0] t^{-α} / Γ(1-α)`, which is infinite
    /// at `n = 0`.
    pub fn at(&self, r: &[f64], n: usize) -> f64 {
        let mut acc = 0.0;
        for j in 1..=n {
            acc += (r[j] - r[j - 1]) * self.w[n - j];
        }
        if r[0] != 0.0 {
            let t = n as f64 * self.dt;
            acc += r[0] * t.powf(-self.alpha) / libm::tgamma(1.0 - self.alpha);
        }
        acc
    }
}

/// L1 realisation of `D^α`: the exact derivative of the product-quadrature
/// `J^{1-α}` applied to the piecewise-linear interpolant of the samples.
///
/// # Panics
/// If `alpha` is outside `(0, 1)`.
pub fn frac_derivative(g: &SampledFunction, alpha: f64) -> SampledFunction {
    let op = FracDerivative::new(g.grid, alpha);
    let values = (0..=g.grid.n_steps).map(|n| op.at(&g.values, n)).collect();
    SampledFunction { grid: g.grid, values }
}

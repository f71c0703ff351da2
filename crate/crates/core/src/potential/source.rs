//! Source potentials of time-independent forcing and of initial data.
//!
//! For a forcing `f_k` on bond `k`, the spatial convolution with the
//! fundamental solution at time lag `s`,
//! `G(x, s) = ∫_{B_k} s^{-1/3} f((x - ξ) s^{-1/3}) f_k(ξ) dξ`,
//! is available in closed form for the supported families. The forcing
//! potential is `F_k(x, t) = (1/π) ∫_0^t G(x, s) ds`; initial data `u_0`
//! contributes `G(x, t)/π`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fractional::TimeGrid;
use crate::graph::{BondKind, BondSpec};
use crate::quadrature::adaptive;
use crate::special::airy::{ai_scaled, ai_tail_integral, airy_all};
use crate::special::profile::{profile_triplet, ProfileKind};

/// A Gaussian is treated as compactly supported within this many widths.
pub const GAUSSIAN_SUPPORT_WIDTHS: f64 = 4.8;

/// Named analytic forcing or initial-data profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SourceTerm {
    Zero,
    /// `amplitude · exp(-(x - center)^2 / width^2)` on one bond.
    GaussianBump { bond: usize, center: f64, width: f64, amplitude: f64 },
    /// `amplitude` on `[start, end]` of one bond, zero elsewhere.
    Indicator { bond: usize, start: f64, end: f64, amplitude: f64 },
}

impl SourceTerm {
    pub fn bond(&self) -> Option<usize> {
        match *self {
            SourceTerm::Zero => None,
            SourceTerm::GaussianBump { bond, .. } | SourceTerm::Indicator { bond, .. } => Some(bond),
        }
    }

    /// `x`-derivative of order `order` of the profile itself.
    pub fn value(&self, x: f64, order: usize) -> f64 {
        match *self {
            SourceTerm::Zero => 0.0,
            SourceTerm::GaussianBump { center, width, amplitude, .. } => {
                let y = (x - center) / width;
                let g = amplitude * (-y * y).exp();
                match order {
                    0 => g,
                    1 => -2.0 * y / width * g,
                    _ => (4.0 * y * y - 2.0) / (width * width) * g,
                }
            }
            SourceTerm::Indicator { start, end, amplitude, .. } => {
                if order > 0 || x < start || x > end {
                    0.0
                } else if x == start || x == end {
                    0.5 * amplitude
                } else {
                    amplitude
                }
            }
        }
    }

    /// Problems with the term on `bond`, truncated at radius `truncation`.
    pub fn violations(&self, bond: &BondSpec, truncation: f64, prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        let (lo, hi) = match bond.kind {
            BondKind::IncomingHalfLine => (-truncation, 0.0),
            BondKind::FiniteSegment => bond.range,
            BondKind::OutgoingHalfLine => (0.0, truncation),
        };
        let (a, b) = match *self {
            SourceTerm::Zero => return out,
            SourceTerm::GaussianBump { center, width, amplitude, .. } => {
                if !(width > 0.0 && width.is_finite()) {
                    out.push(format!("{prefix}.width = {width}: must be positive"));
                }
                if !amplitude.is_finite() || !center.is_finite() {
                    out.push(format!("{prefix}: center and amplitude must be finite"));
                }
                let r = GAUSSIAN_SUPPORT_WIDTHS * width.abs();
                (center - r, center + r)
            }
            SourceTerm::Indicator { start, end, amplitude, .. } => {
                if !(start < end) {
                    out.push(format!("{prefix}: start = {start} must be below end = {end}"));
                }
                if !amplitude.is_finite() {
                    out.push(format!("{prefix}.amplitude must be finite"));
                }
                (start, end)
            }
        };
        if !(a >= lo && b <= hi) {
            out.push(format!(
                "{prefix}: support [{a}, {b}] leaves bond {} (usable range [{lo}, {hi}])",
                bond.id
            ));
        }
        out
    }

    /// `∂_x^order G(x, s)` for this term; at `s = 0` the limit `π ∂_x^order u`.
    pub fn lag_kernel(&self, x: f64, s: f64, order: usize) -> f64 {
        if s <= 0.0 {
            return PI * self.value(x, order);
        }
        match *self {
            SourceTerm::Zero => 0.0,
            SourceTerm::GaussianBump { center, width, amplitude, .. } => {
                gaussian_lag_kernel(x - center, s, width, amplitude, order)
            }
            SourceTerm::Indicator { start, end, amplitude, .. } => {
                let r = s.cbrt();
                let (ys, ye) = ((x - start) / r, (x - end) / r);
                match order {
                    0 => amplitude * PI * (ai_tail_integral(-ys / crate::special::profile::KAPPA)
                        - ai_tail_integral(-ye / crate::special::profile::KAPPA)),
                    1 => amplitude / r * (profile_triplet(ys, ProfileKind::F).0 - profile_triplet(ye, ProfileKind::F).0),
                    _ => amplitude / (r * r) * (profile_triplet(ys, ProfileKind::F).1 - profile_triplet(ye, ProfileKind::F).1),
                }
            }
        }
    }
}

/// Closed-form convolution of the fundamental solution with a Gaussian,
/// `rel = x - center`.
fn gaussian_lag_kernel(rel: f64, s: f64, width: f64, amplitude: f64, order: usize) -> f64 {
    let cs = (3.0 * s).cbrt();
    let sig = width / (std::f64::consts::SQRT_2 * cs);
    let xp = rel / cs;
    let a = 0.5 * sig * sig;
    let z = a * a - xp;
    let (e, ai, aip) = if z > 0.0 {
        let eps = xp / (a * a);
        let r = if eps.abs() < 1e-3 {
            let e2 = eps * eps;
            -3.0 / 8.0 * e2 - e2 * eps / 16.0 - 3.0 / 128.0 * e2 * e2 - 3.0 / 256.0 * e2 * e2 * eps
        } else {
            1.0 - (1.0 - eps).powf(1.5) - 1.5 * eps
        };
        let (ai, aip) = ai_scaled(z);
        (2.0 / 3.0 * a * a * a * r, ai, aip)
    } else {
        let v = airy_all(z);
        (-a * xp + 2.0 / 3.0 * a * a * a, v.ai, v.aip)
    };
    let pre = PI * amplitude * (2.0 * PI).sqrt() * sig * e.exp();
    match order {
        0 => pre * ai,
        1 => pre * (-a * ai - aip) / cs,
        _ => pre * (a * a * ai + 2.0 * a * aip + z * ai) / (cs * cs),
    }
}

fn integrate_cell(terms: &[SourceTerm], x: f64, lo: f64, hi: f64, order: usize) -> Result<f64> {
    let g = |s: f64| terms.iter().map(|t| t.lag_kernel(x, s, order)).sum::<f64>();
    let (v, err, ok) = adaptive(g, lo, hi, 1e-15, 1e-12, 200);
    if !ok || !v.is_finite() {
        return Err(Error::Accuracy(format!(
            "source potential at x = {x} on [{lo}, {hi}] (estimated error {err:e})"
        )));
    }
    Ok(v)
}

/// Forcing potential `∂_x^order F(x, t)` of a single term.
pub fn source_potential(term: &SourceTerm, x: f64, t: f64, order: usize) -> Result<f64> {
    if t <= 0.0 || matches!(term, SourceTerm::Zero) {
        return Ok(0.0);
    }
    Ok(integrate_cell(std::slice::from_ref(term), x, 0.0, t, order)? / PI)
}

/// Forcing and initial-data terms grouped by bond.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SourcePotentialSet {
    forcing: [Vec<SourceTerm>; 7],
    initial: [Vec<SourceTerm>; 7],
}

impl SourcePotentialSet {
    pub fn new(forcing: &[SourceTerm], initial: &[SourceTerm]) -> Self {
        let mut set = Self::default();
        for t in forcing {
            if let Some(b) = t.bond() {
                set.forcing[b - 1].push(*t);
            }
        }
        for t in initial {
            if let Some(b) = t.bond() {
                set.initial[b - 1].push(*t);
            }
        }
        set
    }

    pub fn forcing(&self, bond: usize) -> &[SourceTerm] {
        &self.forcing[bond - 1]
    }

    pub fn initial(&self, bond: usize) -> &[SourceTerm] {
        &self.initial[bond - 1]
    }

    pub fn is_zero(&self, bond: usize) -> bool {
        self.forcing[bond - 1].is_empty() && self.initial[bond - 1].is_empty()
    }

    /// Forcing density `f_k(x)`.
    pub fn forcing_value(&self, bond: usize, x: f64) -> f64 {
        self.forcing[bond - 1].iter().map(|t| t.value(x, 0)).sum()
    }

    /// Initial datum `u_0(x)` on `bond`.
    pub fn initial_value(&self, bond: usize, x: f64) -> f64 {
        self.initial[bond - 1].iter().map(|t| t.value(x, 0)).sum()
    }

    fn initial_part(&self, bond: usize, x: f64, t: f64, order: usize) -> f64 {
        self.initial[bond - 1].iter().map(|term| term.lag_kernel(x, t, order)).sum::<f64>() / PI
    }

    /// `∂_x^order` of the full source potential on `bond` at `(x, t)`.
    pub fn value(&self, bond: usize, x: f64, t: f64, order: usize) -> Result<f64> {
        let forcing = &self.forcing[bond - 1];
        let f = if forcing.is_empty() || t <= 0.0 {
            0.0
        } else {
            integrate_cell(forcing, x, 0.0, t, order)? / PI
        };
        Ok(f + self.initial_part(bond, x, t, order))
    }

    /// The source potential at every node of `grid`, accumulating the time
    /// integral cell by cell.
    pub fn series(&self, bond: usize, x: f64, grid: &TimeGrid, order: usize) -> Result<Vec<f64>> {
        let n = grid.n_steps;
        let mut out = vec![0.0; n + 1];
        let forcing = &self.forcing[bond - 1];
        if !forcing.is_empty() {
            let mut acc = 0.0;
            for m in 0..n {
                acc += integrate_cell(forcing, x, grid.node(m), grid.node(m + 1), order)?;
                out[m + 1] = acc / PI;
            }
        }
        if !self.initial[bond - 1].is_empty() {
            for (m, o) in out.iter_mut().enumerate() {
                *o += self.initial_part(bond, x, grid.node(m), order);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump() -> SourceTerm {
        SourceTerm::GaussianBump { bond: 2, center: 0.5, width: 0.1, amplitude: 1.0 }
    }

    /// `G` by direct quadrature over ξ.
    fn lag_kernel_direct(term: &SourceTerm, x: f64, s: f64, order: usize) -> f64 {
        let r = s.cbrt();
        let (v, _, ok) = adaptive(
            |xi| {
                let (p, dp, ddp) = profile_triplet((x - xi) / r, ProfileKind::F);
                let k = [p, dp, ddp][order] / r.powi(order as i32 + 1);
                k * term.value(xi, 0)
            },
            -1.0,
            2.0,
            1e-15,
            1e-13,
            2000,
        );
        assert!(ok);
        v
    }

    #[test]
    fn gaussian_closed_form_matches_quadrature() {
        let t = bump();
        for &(x, s) in &[(0.5, 0.01), (0.1, 0.2), (0.9, 0.5), (0.0, 1.0), (0.7, 0.003)] {
            for order in 0..3 {
                let a = t.lag_kernel(x, s, order);
                let b = lag_kernel_direct(&t, x, s, order);
                assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()), "x {x} s {s} order {order}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn small_lag_limit_recovers_profile() {
        let t = bump();
        for x in [0.3, 0.5, 0.62] {
            let a = t.lag_kernel(x, 1e-12, 0);
            assert!((a - PI * t.value(x, 0)).abs() < 1e-6, "{x}");
        }
    }

    #[test]
    fn indicator_matches_quadrature() {
        let t = SourceTerm::Indicator { bond: 2, start: 0.0, end: 1.0, amplitude: 1.0 };
        for &(x, s) in &[(0.5, 0.1), (0.2, 0.5), (0.95, 0.02)] {
            for order in 0..3 {
                let a = t.lag_kernel(x, s, order);
                let b = lag_kernel_direct(&t, x, s, order);
                assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "x {x} s {s} order {order}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_forcing_and_zero_time() {
        assert_eq!(source_potential(&SourceTerm::Zero, 0.3, 0.7, 0).unwrap(), 0.0);
        assert_eq!(source_potential(&bump(), 0.3, 0.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn series_matches_direct_values() {
        let set = SourcePotentialSet::new(&[bump()], &[]);
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let ser = set.series(2, 0.0, &grid, 1).unwrap();
        for m in [3, 16] {
            let v = set.value(2, 0.0, grid.node(m), 1).unwrap();
            assert!((ser[m] - v).abs() < 1e-12);
        }
        assert!(set.series(4, 0.0, &grid, 0).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn support_checks() {
        let b2 = BondSpec::new(2, 1.0).unwrap();
        assert!(bump().violations(&b2, 8.0, "forcing").is_empty());
        let wide = SourceTerm::GaussianBump { bond: 2, center: 0.5, width: 0.2, amplitude: 1.0 };
        assert_eq!(wide.violations(&b2, 8.0, "forcing").len(), 1);
        let b4 = BondSpec::new(4, 1.0).unwrap();
        let far = SourceTerm::GaussianBump { bond: 4, center: 9.0, width: 0.2, amplitude: 1.0 };
        assert_eq!(far.violations(&b4, 8.0, "forcing").len(), 1);
    }
}

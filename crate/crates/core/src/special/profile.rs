//! Profile functions `f`, `φ` and the fundamental solutions `U`, `V`.
//!
//! `f(x) = (π/κ) Ai(-x/κ)` and `φ(x) = (π/κ) Bi(-x/κ)` for `x ≥ 0`, `φ = 0`
//! for `x < 0`, with `κ = 3^{1/3}`. Both satisfy `P'' = -(x/3) P`.

use std::f64::consts::PI;

use super::airy::{airy_all, neg_tail_moments};
use crate::error::{Error, Result};
use crate::quadrature;

/// `3^{1/3}`.
pub const KAPPA: f64 = 1.442_249_570_307_408_3;
/// `π / 3^{1/3}`.
pub const PROFILE_SCALE: f64 = PI / KAPPA;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ProfileKind {
    F,
    Phi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum FundamentalKind {
    U,
    V,
}

impl FundamentalKind {
    pub fn profile(self) -> ProfileKind {
        match self {
            FundamentalKind::U => ProfileKind::F,
            FundamentalKind::V => ProfileKind::Phi,
        }
    }
}

/// The three integral identities of the profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileIdentity {
    /// `∫_{-∞}^0 f`
    FNegative,
    /// `∫_0^∞ f`
    FPositive,
    /// `∫_0^∞ φ`
    PhiPositive,
}

/// `(P, P', P'')` at `x`. For `φ` the values at `0` are right limits.
#[inline]
pub fn profile_triplet(x: f64, kind: ProfileKind) -> (f64, f64, f64) {
    if kind == ProfileKind::Phi && x < 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let v = airy_all(-x / KAPPA);
    let (w, dw) = match kind {
        ProfileKind::F => (v.ai, v.aip),
        ProfileKind::Phi => (v.bi, v.bip),
    };
    let p = PROFILE_SCALE * w;
    (p, -PROFILE_SCALE / KAPPA * dw, -x / 3.0 * p)
}

/// Derivative of order `order` (0, 1 or 2) of the profile `kind` at `x`.
///
/// # Panics
/// If `order > 2`.
pub fn profile(x: f64, kind: ProfileKind, order: usize) -> f64 {
    let (p, dp, ddp) = profile_triplet(x, kind);
    match order {
        0 => p,
        1 => dp,
        2 => ddp,
        _ => panic!("profile derivative order must be at most 2, got {order}"),
    }
}

/// `x`-derivative of order `x_order` of `U` or `V` with source point `(xi, eta)`.
///
/// # Panics
/// If `x_order > 2`.
pub fn fundamental(x: f64, t: f64, xi: f64, eta: f64, kind: FundamentalKind, x_order: usize) -> f64 {
    let s = t - eta;
    if s <= 0.0 {
        return 0.0;
    }
    let r = s.cbrt();
    let scale = r.powi(-(x_order as i32 + 1));
    scale * profile((x - xi) / r, kind.profile(), x_order)
}

/// `∫_0^Y Ai(-y) dy` and `∫_0^Y Bi(-y) dy` by panels of Gauss–Legendre.
fn neg_side_integrals(y_end: f64) -> (f64, f64) {
    let panels = (y_end * 2.0).ceil().max(1.0) as usize;
    let h = y_end / panels as f64;
    let rule = quadrature::gl20();
    let mut a = 0.0;
    let mut b = 0.0;
    for i in 0..panels {
        let lo = i as f64 * h;
        a += rule.integrate(lo, lo + h, |y| airy_all(-y).ai);
        b += rule.integrate(lo, lo + h, |y| airy_all(-y).bi);
    }
    (a, b)
}

/// Numerical value of one of the three profile integral identities.
///
/// The oscillatory tails on the negative Airy axis are closed by repeated
/// integration by parts, so only a finite window is integrated numerically.
pub fn profile_integral_check(which: ProfileIdentity) -> Result<f64> {
    const Y_CUT: f64 = 30.0;
    let scale = PROFILE_SCALE * KAPPA;
    match which {
        ProfileIdentity::FNegative => {
            let (v, _, ok) = quadrature::adaptive(|y| airy_all(y).ai, 0.0, 40.0, 1e-15, 1e-14, 400);
            if !ok {
                return Err(Error::Accuracy("∫_0^∞ Ai did not converge".into()));
            }
            Ok(scale * v)
        }
        ProfileIdentity::FPositive | ProfileIdentity::PhiPositive => {
            let (wa, wb) = neg_side_integrals(Y_CUT);
            let (ta, tb) = neg_tail_moments(Y_CUT, 0.0);
            let (head, tail) = if which == ProfileIdentity::FPositive { (wa, ta) } else { (wb, tb) };
            if !tail.is_finite() || tail.abs() > 1.0 {
                return Err(Error::Accuracy("oscillatory tail expansion did not settle".into()));
            }
            Ok(scale * (head + tail))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_origin() {
        let g23 = libm::tgamma(2.0 / 3.0);
        let g13 = libm::tgamma(1.0 / 3.0);
        assert!((profile(0.0, ProfileKind::F, 0) - PI / (3.0 * g23)).abs() < 1e-14);
        assert!((profile(0.0, ProfileKind::Phi, 0) - PI / (3f64.sqrt() * g23)).abs() < 1e-14);
        assert!((profile(0.0, ProfileKind::F, 1) - PI / (3.0 * g13)).abs() < 1e-14);
        assert!((profile(0.0, ProfileKind::Phi, 1) + PI / (3f64.sqrt() * g13)).abs() < 1e-14);
        assert_eq!(profile(-1.0, ProfileKind::Phi, 0), 0.0);
        assert_eq!(profile(-1e-12, ProfileKind::Phi, 2), 0.0);
    }

    #[test]
    fn kappa_constant() {
        assert_eq!(KAPPA, 3f64.cbrt());
    }

    #[test]
    fn fundamental_examples() {
        assert_eq!(fundamental(0.3, 1.0, 0.1, 2.0, FundamentalKind::U, 0), 0.0);
        let f0 = PI / (3.0 * libm::tgamma(2.0 / 3.0));
        assert!((fundamental(0.0, 1.0, 0.0, 0.0, FundamentalKind::U, 0) - f0).abs() < 1e-14);
        assert_eq!(fundamental(-0.5, 1.0, 0.0, 0.0, FundamentalKind::V, 0), 0.0);
    }

    #[test]
    fn second_derivative_matches_finite_difference() {
        for kind in [ProfileKind::F, ProfileKind::Phi] {
            for &x in &[0.5, 2.0, 7.5, 14.0] {
                let h = 1e-4;
                let fd = (profile(x + h, kind, 1) - profile(x - h, kind, 1)) / (2.0 * h);
                assert!((fd - profile(x, kind, 2)).abs() < 1e-7 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn fundamental_solves_the_equation() {
        // residual of u_t - u_xxx at a smooth point, second-order differences
        let (x, t) = (0.4, 0.7);
        let mut prev = f64::INFINITY;
        for h in [2e-2, 1e-2, 5e-3] {
            let u = |x: f64, t: f64| fundamental(x, t, 0.0, 0.0, FundamentalKind::U, 0);
            let ut = (u(x, t + h) - u(x, t - h)) / (2.0 * h);
            let uxxx = (u(x + 2.0 * h, t) - 2.0 * u(x + h, t) + 2.0 * u(x - h, t) - u(x - 2.0 * h, t))
                / (2.0 * h * h * h);
            let r = (ut - uxxx).abs();
            assert!(r < prev);
            prev = r;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn integral_identities() {
        let a = profile_integral_check(ProfileIdentity::FNegative).unwrap();
        let b = profile_integral_check(ProfileIdentity::FPositive).unwrap();
        let c = profile_integral_check(ProfileIdentity::PhiPositive).unwrap();
        assert!((a - PI / 3.0).abs() < 1e-10, "{a}");
        assert!((b - 2.0 * PI / 3.0).abs() < 1e-10, "{b}");
        assert!(c.abs() < 1e-10, "{c}");
    }
}

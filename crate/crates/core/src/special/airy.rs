//! Airy functions of real argument.
//!
//! Values inside `[-10, 10]` come from a table of anchor points spaced 0.25
//! apart plus a local Taylor expansion generated by the recurrence of the
//! Airy equation `w'' = z w`. Outside that interval the classical asymptotic
//! expansions are summed to their smallest term.

use std::f64::consts::{FRAC_PI_4, PI};
use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const AI0: f64 = 0.355_028_053_887_817_239_26;
pub const AIP0: f64 = -0.258_819_403_792_806_798_41;
pub const BI0: f64 = 0.614_926_627_446_000_735_15;
pub const BIP0: f64 = 0.448_288_357_353_826_357_91;

const TABLE_HALF: f64 = 10.0;
const SPACING: f64 = 0.25;
const N_ANCHOR: usize = 81;
/// Above this argument `Bi` no longer fits in a double.
const BI_OVERFLOW: f64 = 104.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AiryKind {
    Ai,
    Bi,
    AiPrime,
    BiPrime,
}

/// Ai, Ai', Bi and Bi' at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AiryValues {
    pub ai: f64,
    pub aip: f64,
    pub bi: f64,
    pub bip: f64,
}

#[derive(Clone, Copy)]
struct Anchor {
    z: f64,
    ai: f64,
    aip: f64,
    bi: f64,
    bip: f64,
}

/// Advances a pair of solutions of `w'' = z w` from `z0` by `h`.
#[inline]
fn taylor_step(z0: f64, h: f64, w: [f64; 2], dw: [f64; 2]) -> ([f64; 2], [f64; 2]) {
    let mut out = [0.0; 2];
    let mut dout = [0.0; 2];
    for s in 0..2 {
        // c[n-1], c[n], c[n+1]
        let mut cm1 = w[s];
        let mut c0 = dw[s];
        let mut c1 = 0.5 * z0 * w[s];
        let mut hp = h; // h^n for n = 1
        let mut val = w[s] + c0 * h;
        let mut der = c0;
        let scale = w[s].abs().max(dw[s].abs()).max(1e-300);
        let mut n = 1usize;
        loop {
            // term for index n + 1
            let hn1 = hp * h;
            let t = c1 * hn1;
            val += t;
            der += (n + 1) as f64 * c1 * hp;
            n += 1;
            let c2 = (z0 * c0 + cm1) / ((n as f64) * (n as f64 + 1.0));
            cm1 = c0;
            c0 = c1;
            c1 = c2;
            hp = hn1;
            if n > 6 && t.abs() < 1e-19 * scale && (c1 * hp * h).abs() < 1e-19 * scale {
                break;
            }
            if n > 80 {
                break;
            }
        }
        out[s] = val;
        dout[s] = der;
    }
    (out, dout)
}

fn u_coeffs() -> &'static [f64; 40] {
    static U: OnceLock<[f64; 40]> = OnceLock::new();
    U.get_or_init(|| {
        let mut u = [0.0; 40];
        u[0] = 1.0;
        for k in 1..40 {
            let kf = k as f64;
            u[k] = u[k - 1] * (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0)
                / ((2.0 * kf - 1.0) * 216.0 * kf);
        }
        u
    })
}

#[inline]
fn v_coeff(k: usize) -> f64 {
    if k == 0 {
        1.0
    } else {
        let kf = k as f64;
        -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u_coeffs()[k]
    }
}

/// Sums `Σ s_k c_k / ζ^k` up to its smallest term, where `s_k` is
/// the sign pattern and `c` the coefficient generator.
fn asym_sum(zeta: f64, c: impl Fn(usize) -> f64, sign: impl Fn(usize) -> f64, start: usize, step: usize) -> f64 {
    let mut acc = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = start;
    let mut i = 0usize;
    while k < 40 {
        let term = sign(i) * c(k) / zeta.powi(k as i32);
        if term.abs() > prev {
            break;
        }
        acc += term;
        if term.abs() < 1e-18 * acc.abs().max(1e-300) {
            break;
        }
        prev = term.abs();
        k += step;
        i += 1;
    }
    acc
}

/// Asymptotic Ai, Ai' for large positive z with the factor `exp(-ζ)` removed.
fn ai_pos_asym_scaled(z: f64) -> (f64, f64) {
    let zeta = 2.0 / 3.0 * z * z.sqrt();
    let q = z.powf(0.25);
    let u = u_coeffs();
    let alt = |i: usize| if i % 2 == 0 { 1.0 } else { -1.0 };
    let su = asym_sum(zeta, |k| u[k], alt, 0, 1);
    let sv = asym_sum(zeta, v_coeff, alt, 0, 1);
    let norm = 0.5 / PI.sqrt();
    (norm * su / q, -norm * q * sv)
}

/// Asymptotic Bi, Bi' for large positive z with the factor `exp(ζ)` removed.
fn bi_pos_asym_scaled(z: f64) -> (f64, f64) {
    let zeta = 2.0 / 3.0 * z * z.sqrt();
    let q = z.powf(0.25);
    let u = u_coeffs();
    let one = |_: usize| 1.0;
    let su = asym_sum(zeta, |k| u[k], one, 0, 1);
    let sv = asym_sum(zeta, v_coeff, one, 0, 1);
    let norm = 1.0 / PI.sqrt();
    (norm * su / q, norm * q * sv)
}

/// Asymptotic values of all four functions at `-x`, `x` large.
fn neg_asym(x: f64) -> AiryValues {
    let zeta = 2.0 / 3.0 * x * x.sqrt();
    let q = x.powf(0.25);
    let u = u_coeffs();
    let alt = |i: usize| if i % 2 == 0 { 1.0 } else { -1.0 };
    let ue = asym_sum(zeta, |k| u[k], alt, 0, 2);
    let uo = asym_sum(zeta, |k| u[k], alt, 1, 2);
    let ve = asym_sum(zeta, v_coeff, alt, 0, 2);
    let vo = asym_sum(zeta, v_coeff, alt, 1, 2);
    let (s, c) = (zeta - FRAC_PI_4).sin_cos();
    let rp = 1.0 / PI.sqrt();
    AiryValues {
        ai: rp / q * (c * ue + s * uo),
        aip: rp * q * (s * ve - c * vo),
        bi: rp / q * (-s * ue + c * uo),
        bip: rp * q * (c * ve + s * vo),
    }
}

fn anchors() -> &'static [Anchor; N_ANCHOR] {
    static TABLE: OnceLock<[Anchor; N_ANCHOR]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let blank = Anchor { z: 0.0, ai: 0.0, aip: 0.0, bi: 0.0, bip: 0.0 };
        let mut t = [blank; N_ANCHOR];
        let mid = N_ANCHOR / 2;
        for (k, a) in t.iter_mut().enumerate() {
            a.z = -TABLE_HALF + SPACING * k as f64;
        }
        t[mid].ai = AI0;
        t[mid].aip = AIP0;
        t[mid].bi = BI0;
        t[mid].bip = BIP0;
        // Both solutions oscillate on the negative axis, so stepping is stable there.
        for k in (0..mid).rev() {
            let (w, dw) = half_steps(t[k + 1].z, -SPACING, [t[k + 1].ai, t[k + 1].bi], [t[k + 1].aip, t[k + 1].bip]);
            t[k].ai = w[0];
            t[k].bi = w[1];
            t[k].aip = dw[0];
            t[k].bip = dw[1];
        }
        // Bi is dominant going right.
        for k in mid + 1..N_ANCHOR {
            let (w, dw) = half_steps(t[k - 1].z, SPACING, [t[k - 1].bi, 0.0], [t[k - 1].bip, 0.0]);
            t[k].bi = w[0];
            t[k].bip = dw[0];
        }
        // Ai is dominant going left from the asymptotic region.
        let zt = t[N_ANCHOR - 1].z;
        let (s, sp) = ai_pos_asym_scaled(zt);
        let e = (-(2.0 / 3.0) * zt * zt.sqrt()).exp();
        t[N_ANCHOR - 1].ai = s * e;
        t[N_ANCHOR - 1].aip = sp * e;
        for k in (mid + 1..N_ANCHOR - 1).rev() {
            let (w, dw) = half_steps(t[k + 1].z, -SPACING, [t[k + 1].ai, 0.0], [t[k + 1].aip, 0.0]);
            t[k].ai = w[0];
            t[k].aip = dw[0];
        }
        t
    })
}

fn half_steps(z0: f64, h: f64, w: [f64; 2], dw: [f64; 2]) -> ([f64; 2], [f64; 2]) {
    let (w1, dw1) = taylor_step(z0, 0.5 * h, w, dw);
    taylor_step(z0 + 0.5 * h, 0.5 * h, w1, dw1)
}

/// All four Airy values at `z`. `Bi` and `Bi'` are infinite beyond the
/// representable range.
pub fn airy_all(z: f64) -> AiryValues {
    if z.abs() <= TABLE_HALF {
        let t = anchors();
        let k = (((z + TABLE_HALF) / SPACING).round() as usize).min(N_ANCHOR - 1);
        let a = &t[k];
        let (w, dw) = taylor_step(a.z, z - a.z, [a.ai, a.bi], [a.aip, a.bip]);
        return AiryValues { ai: w[0], aip: dw[0], bi: w[1], bip: dw[1] };
    }
    if z < 0.0 {
        return neg_asym(-z);
    }
    let zeta = 2.0 / 3.0 * z * z.sqrt();
    let (a, ap) = ai_pos_asym_scaled(z);
    let ea = (-zeta).exp();
    let (bi, bip) = if z > BI_OVERFLOW {
        (f64::INFINITY, f64::INFINITY)
    } else {
        let (b, bp) = bi_pos_asym_scaled(z);
        let eb = zeta.exp();
        (b * eb, bp * eb)
    };
    AiryValues { ai: a * ea, aip: ap * ea, bi, bip }
}

/// `(Ai(z) e^ζ, Ai'(z) e^ζ)` with `ζ = (2/3) z^{3/2}`, for `z ≥ 0`.
pub fn ai_scaled(z: f64) -> (f64, f64) {
    debug_assert!(z >= 0.0);
    if z > TABLE_HALF {
        return ai_pos_asym_scaled(z);
    }
    let v = airy_all(z);
    let e = (2.0 / 3.0 * z * z.sqrt()).exp();
    (v.ai * e, v.aip * e)
}

/// Single Airy function value with explicit saturation and domain errors.
pub fn airy(x: f64, which: AiryKind) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("airy argument must be finite, got {x}")));
    }
    let v = airy_all(x);
    let out = match which {
        AiryKind::Ai => v.ai,
        AiryKind::AiPrime => v.aip,
        AiryKind::Bi => v.bi,
        AiryKind::BiPrime => v.bip,
    };
    if !out.is_finite() {
        return Err(Error::Saturation(format!("{which:?}({x}) exceeds the double range")));
    }
    Ok(out)
}

/// `∫_Y^∞ y^{-m} W(y) dy` for `W(y) = Ai(-y)` and `W(y) = Bi(-y)`, `Y` large.
///
/// Integration by parts with `W'' = -y W` gives
/// `I_m = Y^{-m-1} W'(Y) + (m+1) Y^{-m-2} W(Y) - (m+1)(m+2) I_{m+3}`
/// where `W'(y) = -Ai'(-y)`; the series is summed until its terms stop
/// shrinking.
pub fn neg_tail_moments(y: f64, m: f64) -> (f64, f64) {
    let v = airy_all(-y);
    let (wa, wb) = (v.ai, v.bi);
    let (dwa, dwb) = (-v.aip, -v.bip);
    let mut acc = (0.0, 0.0);
    let mut coef = 1.0;
    let mut mm = m;
    let mut prev = f64::INFINITY;
    for _ in 0..60 {
        let p1 = y.powf(-mm - 1.0);
        let p2 = (mm + 1.0) * y.powf(-mm - 2.0);
        let ta = coef * (p1 * dwa + p2 * wa);
        let tb = coef * (p1 * dwb + p2 * wb);
        let size = ta.abs().max(tb.abs());
        if size > prev {
            break;
        }
        acc.0 += ta;
        acc.1 += tb;
        if size < 1e-18 {
            break;
        }
        prev = size;
        coef *= -(mm + 1.0) * (mm + 2.0);
        mm += 3.0;
    }
    acc
}

/// `∫_z^∞ Ai(v) dv`.
pub fn ai_tail_integral(z: f64) -> f64 {
    let rule = crate::quadrature::gl20();
    if z >= 0.0 {
        // Ai(30) is below 1e-47
        if z >= 30.0 {
            return 0.0;
        }
        let n = (30.0 - z).ceil() as usize;
        let h = (30.0 - z) / n as f64;
        return (0..n).map(|i| rule.integrate(z + h * i as f64, z + h * (i + 1) as f64, |v| airy_all(v).ai)).sum();
    }
    let y = -z;
    if y > 30.0 {
        // 1/3 + ∫_0^∞ Ai(-v) dv - ∫_y^∞ Ai(-v) dv
        return 1.0 - neg_tail_moments(y, 0.0).0;
    }
    let n = y.ceil().max(1.0) as usize;
    let h = y / n as f64;
    let head: f64 = (0..n).map(|i| rule.integrate(h * i as f64, h * (i + 1) as f64, |v| airy_all(-v).ai)).sum();
    1.0 / 3.0 + head
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed with an arbitrary-precision library.
    const REF: [(f64, f64, f64, f64, f64); 8] = [
        (-20.0, -0.17640612707798468959, -0.20013930932265134928, 0.8928628567364712384, -0.79142903383953647936),
        (-7.3, 0.33577037051514727697, 0.070874113769896473903, -0.18009580448329365985, 0.90998427043632458172),
        (-2.5, -0.11232506769296608919, -0.43242247184070529303, 0.67885273426479436337, -0.22042015487462958768),
        (-0.6, 0.49484952543114968436, 0.32879184076086944987, -0.17736259869656603959, 0.52540115229915356153),
        (1.3, 0.093474665771502704523, 1.5522841623445438089, -0.12033386559018357707, 1.4069858538563175628),
        (4.6, 0.00026543212392445045001, 280.03639880129124647, -0.00058291417781033360493, 584.22732232556525377),
        (9.9, 1.5181958141049101607e-10, 333230648.25676943782, -4.8144951964682430672e-10, 1039893202.0639836771),
        (15.0, 2.164962520737992299e-18, 18982099567493589.685, -8.4205679540177727661e-18, 73197492034070104.962),
    ];

    #[test]
    fn values_at_zero_match_closed_forms() {
        let g23 = libm::tgamma(2.0 / 3.0);
        let g13 = libm::tgamma(1.0 / 3.0);
        assert!((airy(0.0, AiryKind::Ai).unwrap() - 1.0 / (3f64.powf(2.0 / 3.0) * g23)).abs() < 1e-15);
        assert!((airy(0.0, AiryKind::AiPrime).unwrap() + 1.0 / (3f64.cbrt() * g13)).abs() < 1e-15);
        assert!((airy(0.0, AiryKind::Bi).unwrap() - 1.0 / (3f64.powf(1.0 / 6.0) * g23)).abs() < 1e-15);
    }

    #[test]
    fn matches_reference_table() {
        for &(z, ai, bi, aip, bip) in REF.iter() {
            let v = airy_all(z);
            let tol = |r: f64| 1e-13_f64.max(1e-12 * r.abs());
            assert!((v.ai - ai).abs() < tol(ai), "Ai({z}) = {} vs {ai}", v.ai);
            assert!((v.aip - aip).abs() < tol(aip), "Ai'({z}) = {} vs {aip}", v.aip);
            assert!((v.bi - bi).abs() < tol(bi), "Bi({z}) = {} vs {bi}", v.bi);
            assert!((v.bip - bip).abs() < tol(bip), "Bi'({z}) = {} vs {bip}", v.bip);
        }
    }

    #[test]
    fn backward_table_agrees_with_origin() {
        let v = airy_all(0.124);
        let (w, dw) = taylor_step(0.0, 0.124, [AI0, BI0], [AIP0, BIP0]);
        assert!((v.ai - w[0]).abs() < 1e-15);
        assert!((v.aip - dw[0]).abs() < 1e-15);
    }

    #[test]
    fn table_and_asymptotics_agree_at_the_switch() {
        for z in [-10.0f64, -9.5, 9.5, 10.0] {
            let t = airy_all(z);
            let a = if z < 0.0 {
                neg_asym(-z)
            } else {
                let zeta = 2.0 / 3.0 * z * z.sqrt();
                let (ai, aip) = ai_pos_asym_scaled(z);
                let (bi, bip) = bi_pos_asym_scaled(z);
                AiryValues { ai: ai * (-zeta).exp(), aip: aip * (-zeta).exp(), bi: bi * zeta.exp(), bip: bip * zeta.exp() }
            };
            let s = t.bi.abs().max(1.0);
            assert!((t.ai - a.ai).abs() < 1e-14, "Ai at {z}");
            assert!((t.aip - a.aip).abs() < 1e-14, "Ai' at {z}");
            assert!((t.bi - a.bi).abs() < 1e-14 * s, "Bi at {z}");
            assert!((t.bip - a.bip).abs() < 1e-13 * s, "Bi' at {z}");
        }
    }

    #[test]
    fn wronskian_holds() {
        let mut z = -20.0;
        while z <= 2.0 {
            let v = airy_all(z);
            assert!((v.ai * v.bip - v.aip * v.bi - 1.0 / PI).abs() < 1e-13, "z = {z}");
            z += 0.037;
        }
    }

    #[test]
    fn tail_integral_limits_and_continuity() {
        assert!((ai_tail_integral(0.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((ai_tail_integral(-300.0) - 1.0).abs() < 1e-2);
        let (a, b) = (ai_tail_integral(-30.0 + 1e-9), ai_tail_integral(-30.0 - 1e-9));
        assert!((a - b + 2e-9 * airy_all(-30.0).ai).abs() < 1e-13, "{}", a - b);
        // derivative of the tail integral is -Ai
        let h = 1e-5;
        for z in [-4.0, -0.3, 2.5] {
            let fd = (ai_tail_integral(z + h) - ai_tail_integral(z - h)) / (2.0 * h);
            assert!((fd + airy_all(z).ai).abs() < 1e-9);
        }
    }

    #[test]
    fn bi_saturates_with_error() {
        assert!(matches!(airy(200.0, AiryKind::Bi), Err(Error::Saturation(_))));
        assert!(airy(200.0, AiryKind::Ai).unwrap() >= 0.0);
    }

    #[test]
    fn tail_moments_match_quadrature() {
        let y0 = 12.0;
        for m in [0.0, 1.0, 2.0 / 3.0, 1.5] {
            let (ta, tb) = neg_tail_moments(y0, m);
            // finite window plus the moment at the far end
            let far = 60.0;
            let (fa, fb) = neg_tail_moments(far, m);
            let mut qa = 0.0;
            let mut qb = 0.0;
            let n = 4000;
            let h = (far - y0) / n as f64;
            for i in 0..n {
                let lo = y0 + i as f64 * h;
                qa += crate::quadrature::gl12().integrate(lo, lo + h, |y| y.powf(-m) * airy_all(-y).ai);
                qb += crate::quadrature::gl12().integrate(lo, lo + h, |y| y.powf(-m) * airy_all(-y).bi);
            }
            assert!((ta - (qa + fa)).abs() < 1e-12, "m = {m}");
            assert!((tb - (qb + fb)).abs() < 1e-12, "m = {m}");
        }
    }
}

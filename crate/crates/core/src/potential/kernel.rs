//! Fractional primitives of the layer kernels and the Volterra kernel tables.
//!
//! A layer of profile `P` anchored at distance `d = x - ξ` has the time kernel
//! `k(s) = s^{-(p+1)/3} P^{(p)}(d s^{-1/3})` for the `p`-th `x`-derivative.
//! Everything here is expressed through `J^β k`, computed after the
//! substitution `z = |d| s^{-1/3}`:
//!
//! `J^β k(t) = 3|d|^{2-p}/Γ(β) ∫_{z_t}^∞ (t - |d|^3 z^{-3})^{β-1} z^{p-3} P^{(p)}(σ z) dz`
//!
//! with `z_t = |d| t^{-1/3}` and `σ = sign d`. Oscillatory tails for `σ > 0`
//! are closed with the Airy moment recurrence.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fractional::TimeGrid;
use crate::quadrature::{gl12, GaussRule};
use crate::special::airy::neg_tail_moments;
use crate::special::profile::{profile, profile_triplet, ProfileKind, KAPPA, PROFILE_SCALE};

const JACOBI_POINTS: usize = 16;

fn jacobi_rule(b: f64) -> Arc<GaussRule> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("rule cache poisoned");
    guard
        .entry(b.to_bits())
        .or_insert_with(|| Arc::new(GaussRule::jacobi(JACOBI_POINTS, 0.0, b)))
        .clone()
}

#[inline]
fn deriv(z: f64, kind: ProfileKind, p: usize) -> f64 {
    let (v, dv, ddv) = profile_triplet(z, kind);
    match p {
        0 => v,
        1 => dv,
        _ => ddv,
    }
}

#[inline]
fn phase(z: f64) -> f64 {
    2.0 / 3.0 * (z / KAPPA).powf(1.5)
}

/// `∫_Z^∞ z^{-m} P(z) dz` for `Z` in the asymptotic range.
fn profile_moment(m: f64, z: f64, kind: ProfileKind) -> f64 {
    let (a, b) = neg_tail_moments(z / KAPPA, m);
    let w = if kind == ProfileKind::F { a } else { b };
    PROFILE_SCALE * KAPPA.powf(1.0 - m) * w
}

/// Panel edges on `[zt, z1]`: geometric grading below 1, then panels of
/// bounded phase (oscillatory side) or bounded length (decaying side).
fn panel_edges(zt: f64, z1: f64, oscillatory: bool) -> Vec<f64> {
    let mut edges = vec![zt];
    let mut z = zt;
    while z < 1.0 && 2.0 * z < z1 {
        z *= 2.0;
        edges.push(z);
    }
    let n = if oscillatory {
        (phase(z1) - phase(z)).ceil() as usize + 1
    } else {
        ((z1 - z) / 1.25).ceil() as usize
    }
    .max(1);
    let h = (z1 - z) / n as f64;
    for i in 1..n {
        edges.push(z + h * i as f64);
    }
    edges.push(z1);
    edges
}

fn gen_binom(g: f64, j: usize) -> f64 {
    let mut c = 1.0;
    for i in 0..j {
        c *= (g - i as f64) / (i as f64 + 1.0);
    }
    c
}

/// `J^β k(t)` for the layer kernel of profile `kind`, offset `d` and
/// derivative order `p`.
///
/// At `d = 0` only `p < 2` is a locally integrable kernel; the second
/// derivative there is a jump handled by the caller, and `NaN` is returned.
pub fn layer_primitive(beta: f64, t: f64, d: f64, kind: ProfileKind, p: usize) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if d == 0.0 {
        if p >= 2 {
            return f64::NAN;
        }
        let g = (p as f64 + 1.0) / 3.0;
        let c = profile(0.0, kind, p);
        return c * libm::tgamma(1.0 - g) / libm::tgamma(1.0 - g + beta) * t.powf(beta - g);
    }
    let sg = d.signum();
    if sg < 0.0 && kind == ProfileKind::Phi {
        return 0.0;
    }
    let ad = d.abs();
    let zt = ad / t.cbrt();
    let pf = p as f64;
    let pre = 3.0 * ad.powf(2.0 - pf) / libm::tgamma(beta);
    // the moment recurrence is asymptotic; at z = 30 its smallest term is far below rounding
    let z1 = if sg > 0.0 { (2.0 * zt).max(30.0) } else { (zt + 1.0).max(25.0) };
    let edges = panel_edges(zt, z1, sg > 0.0);
    let g = beta - 1.0;
    let mut total = 0.0;
    for (i, w) in edges.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        if i == 0 && g != 0.0 && beta < 2.0 {
            let rule = jacobi_rule(g);
            total += rule.integrate_left_singular(a, b, |z| {
                let z3 = z * z * z;
                z.powf(pf - 3.0) * deriv(sg * z, kind, p) * (t * (z * z + z * zt + zt * zt) / z3).powf(g)
            });
        } else {
            total += gl12().integrate(a, b, |z| {
                let fac = t - ad * ad * ad / (z * z * z);
                let fac = if g == 0.0 { 1.0 } else { fac.powf(g) };
                z.powf(pf - 3.0) * deriv(sg * z, kind, p) * fac
            });
        }
    }
    if sg > 0.0 {
        let mut tail = 0.0;
        let tg = t.powf(g);
        for j in 0..=60usize {
            let jf = j as f64;
            let cj = gen_binom(g, j) * if j % 2 == 0 { 1.0 } else { -1.0 } * zt.powf(3.0 * jf) * tg;
            if cj == 0.0 {
                break;
            }
            let val = match p {
                0 => profile_moment(3.0 + 3.0 * jf, z1, kind),
                1 => {
                    let m = 2.0 + 3.0 * jf;
                    -z1.powf(-m) * profile(z1, kind, 0) + m * profile_moment(m + 1.0, z1, kind)
                }
                _ => -profile_moment(3.0 * jf, z1, kind) / 3.0,
            };
            tail += cj * val;
            if (cj * val).abs() < 1e-18 * tail.abs().max(1e-300) {
                break;
            }
        }
        total += tail;
    }
    pre * total
}

/// `J^1 k` and `J^2 k` at every node of `grid`, accumulated cell by cell.
#[derive(Debug, Clone)]
pub struct NodePrimitives {
    pub j1: Vec<f64>,
    pub j2: Vec<f64>,
}

/// # Panics
/// If `d == 0` and `p == 2`.
pub fn node_primitives(grid: &TimeGrid, d: f64, kind: ProfileKind, p: usize) -> NodePrimitives {
    let n = grid.n_steps;
    let mut j1 = vec![0.0; n + 1];
    let mut j2 = vec![0.0; n + 1];
    if d == 0.0 {
        assert!(p < 2, "second-derivative layer kernel at d = 0 is a jump");
        for m in 1..=n {
            let t = grid.node(m);
            j1[m] = layer_primitive(1.0, t, 0.0, kind, p);
            j2[m] = layer_primitive(2.0, t, 0.0, kind, p);
        }
        return NodePrimitives { j1, j2 };
    }
    let sg = d.signum();
    if sg < 0.0 && kind == ProfileKind::Phi {
        return NodePrimitives { j1, j2 };
    }
    let ad = d.abs();
    let pf = p as f64;
    let t1 = grid.node(1);
    j1[1] = layer_primitive(1.0, t1, d, kind, p);
    j2[1] = layer_primitive(2.0, t1, d, kind, p);
    let mut moment = t1 * j1[1] - j2[1];
    let c1 = 3.0 * ad.powf(2.0 - pf);
    let c2 = 3.0 * ad.powf(5.0 - pf);
    let rule = gl12();
    for m in 1..n {
        let zb = ad / grid.node(m + 1).cbrt();
        let za = ad / grid.node(m).cbrt();
        let panels = if sg > 0.0 {
            (phase(za) - phase(zb)).ceil() as usize + 1
        } else {
            (za - zb).ceil() as usize + 1
        };
        let h = (za - zb) / panels as f64;
        let (mut s1, mut s2) = (0.0, 0.0);
        for k in 0..panels {
            let lo = zb + h * k as f64;
            let mid = lo + 0.5 * h;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let z = mid + 0.5 * h * x;
                let base = z.powf(pf - 3.0) * deriv(sg * z, kind, p) * w;
                s1 += base;
                s2 += base / (z * z * z);
            }
        }
        j1[m + 1] = j1[m] + c1 * 0.5 * h * s1;
        moment += c2 * 0.5 * h * s2;
        j2[m + 1] = grid.node(m + 1) * j1[m + 1] - moment;
    }
    NodePrimitives { j1, j2 }
}

/// Product-integration weights for `∫_0^{t_n} K(t_n - η) g(η) dη` with `g`
/// piecewise linear, from samples of a double primitive `q` of `K` and of
/// its derivative `qp`. Fills `out[0..=n]`.
pub fn product_weights(q: &[f64], qp: &[f64], n: usize, dt: f64, out: &mut [f64]) {
    out[..=n].iter_mut().for_each(|w| *w = 0.0);
    if n == 0 {
        return;
    }
    out[n] = q[1] / dt;
    for j in 1..n {
        out[n - j] = (q[j + 1] - 2.0 * q[j] + q[j - 1]) / dt;
    }
    out[0] = qp[n] - (q[n] - q[n - 1]) / dt;
}

/// Row type of a vertex equation, which fixes the fractional transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowKind {
    Value,
    Slope,
    Curvature,
}

impl RowKind {
    /// `x`-derivative order carried by the layer kernel.
    pub fn order(self) -> usize {
        match self {
            RowKind::Value => 0,
            RowKind::Slope => 1,
            RowKind::Curvature => 2,
        }
    }

    /// Orders of `J` giving the double primitive and its derivative.
    pub fn betas(self) -> (f64, f64) {
        match self {
            RowKind::Value => (4.0 / 3.0, 1.0 / 3.0),
            RowKind::Slope => (5.0 / 3.0, 2.0 / 3.0),
            RowKind::Curvature => (2.0, 1.0),
        }
    }

    /// Normalisation of the fractional derivative applied to the row.
    pub fn scale(self) -> f64 {
        match self {
            RowKind::Value => 1.0 / libm::tgamma(2.0 / 3.0),
            RowKind::Slope => 1.0 / libm::tgamma(1.0 / 3.0),
            RowKind::Curvature => 1.0,
        }
    }

    /// Order of the fractional derivative applied to source traces.
    pub fn derivative_order(self) -> Option<f64> {
        match self {
            RowKind::Value => Some(2.0 / 3.0),
            RowKind::Slope => Some(1.0 / 3.0),
            RowKind::Curvature => None,
        }
    }
}

/// Volterra kernels of the vertex system. `K1`–`K3` couple `α` across a
/// finite bond (offset `-L`), `K4`–`K6` couple `φ_2`, `φ_3` to the far
/// vertex (offset `+L`), and the `V` variants do the same for `β`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelId {
    K1,
    K2,
    K3,
    K4,
    K5,
    K6,
    K4V,
    K5V,
    K6V,
}

impl KernelId {
    pub const ALL: [KernelId; 9] = [
        KernelId::K1,
        KernelId::K2,
        KernelId::K3,
        KernelId::K4,
        KernelId::K5,
        KernelId::K6,
        KernelId::K4V,
        KernelId::K5V,
        KernelId::K6V,
    ];

    /// `K1`..`K6` by number.
    pub fn from_number(id: usize) -> Option<Self> {
        Self::ALL.get(id.checked_sub(1)?).copied().filter(|_| id <= 6)
    }

    pub fn row(self) -> RowKind {
        match self {
            KernelId::K1 | KernelId::K4 | KernelId::K4V => RowKind::Value,
            KernelId::K2 | KernelId::K5 | KernelId::K5V => RowKind::Slope,
            KernelId::K3 | KernelId::K6 | KernelId::K6V => RowKind::Curvature,
        }
    }

    pub fn profile(self) -> ProfileKind {
        match self {
            KernelId::K4V | KernelId::K5V | KernelId::K6V => ProfileKind::Phi,
            _ => ProfileKind::F,
        }
    }

    /// Offset `d` of the layer for bond length `length`.
    pub fn offset(self, length: f64) -> f64 {
        match self {
            KernelId::K1 | KernelId::K2 | KernelId::K3 => -length,
            _ => length,
        }
    }

    /// Double primitive `Q` and `Q'` of the kernel at lag `s`.
    pub fn primitives(self, s: f64, length: f64) -> (f64, f64) {
        let row = self.row();
        let (b2, b1) = row.betas();
        let d = self.offset(length);
        let sc = row.scale();
        (
            sc * layer_primitive(b2, s, d, self.profile(), row.order()),
            sc * layer_primitive(b1, s, d, self.profile(), row.order()),
        )
    }
}

/// Pointwise value of the Volterra kernel `K(t - η)`; zero for `η ≥ t`.
///
/// Curvature kernels are the layer kernel itself. Value and slope kernels
/// are the fractional derivative of the layer kernel, obtained here by a
/// five-point difference of the first primitive.
pub fn kernel_eval(id: KernelId, t: f64, eta: f64, length: f64) -> f64 {
    let s = t - eta;
    if s <= 0.0 {
        return 0.0;
    }
    let row = id.row();
    let d = id.offset(length);
    if row == RowKind::Curvature {
        return deriv(d / s.cbrt(), id.profile(), 2) / s;
    }
    let h = 1e-2 * s;
    let qp = |u: f64| id.primitives(u, length).1;
    (qp(s - 2.0 * h) - 8.0 * qp(s - h) + 8.0 * qp(s + h) - qp(s + 2.0 * h)) / (12.0 * h)
}

/// `Q`, `Q'` and the lag weights of one kernel on a uniform grid.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub id: KernelId,
    pub dt: f64,
    pub q: Vec<f64>,
    pub qp: Vec<f64>,
    /// `lag[0] = Q(dt)/dt`, `lag[j] = (Q(t_{j+1}) - 2Q(t_j) + Q(t_{j-1}))/dt`.
    pub lag: Vec<f64>,
}

impl KernelTable {
    pub fn new(id: KernelId, grid: &TimeGrid, length: f64) -> Self {
        let n = grid.n_steps;
        let dt = grid.dt();
        let pairs: Vec<(f64, f64)> = (0..=n).into_par_iter().map(|m| id.primitives(grid.node(m), length)).collect();
        let q: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let qp: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let mut lag = vec![0.0; n];
        if n > 0 {
            lag[0] = q[1] / dt;
            for j in 1..n {
                lag[j] = (q[j + 1] - 2.0 * q[j] + q[j - 1]) / dt;
            }
        }
        Self { id, dt, q, qp, lag }
    }

    /// Weight of the first sample `Φ(0)` at step `n ≥ 1`.
    #[inline]
    pub fn first_weight(&self, n: usize) -> f64 {
        self.qp[n] - (self.q[n] - self.q[n - 1]) / self.dt
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive;

    /// Direct `J^β k(t)` in the original variable, for decaying kernels.
    fn direct(beta: f64, t: f64, d: f64, kind: ProfileKind, p: usize) -> f64 {
        let k = |s: f64| s.powf(-(p as f64 + 1.0) / 3.0) * deriv(d / s.cbrt(), kind, p);
        // substitution s = t - u^{1/β} removes the endpoint singularity
        let inv = 1.0 / beta;
        let (v, _, ok) = adaptive(
            |u: f64| {
                let s = t - u.powf(inv);
                if s <= 0.0 {
                    0.0
                } else {
                    inv * k(s)
                }
            },
            0.0,
            t.powf(beta),
            1e-15,
            1e-13,
            4000,
        );
        assert!(ok);
        v / libm::tgamma(beta)
    }

    #[test]
    fn decaying_side_matches_direct_quadrature() {
        for &(beta, p) in &[(4.0 / 3.0, 0), (1.0 / 3.0, 0), (5.0 / 3.0, 1), (2.0 / 3.0, 1), (2.0, 2), (1.0, 2)] {
            for &t in &[0.3, 1.0] {
                let a = layer_primitive(beta, t, -1.0, ProfileKind::F, p);
                let b = direct(beta, t, -1.0, ProfileKind::F, p);
                assert!((a - b).abs() < 1e-11 * (1.0 + b.abs()), "beta {beta} p {p} t {t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn oscillatory_side_matches_reference_values() {
        // arbitrary-precision quadrature of the substituted integral with an
        // oscillatory tail extrapolation
        let cases = [
            (2.0, ProfileKind::F, 0, 8.0, 0.5, 27.3163236513928196),
            (1.0, ProfileKind::F, 0, 8.0, 0.5, 5.5592685856360462),
            (4.0 / 3.0, ProfileKind::F, 0, 8.0, 0.5, 10.1340316189245327),
            (2.0, ProfileKind::Phi, 0, 8.0, 0.5, 26.5465223286196248),
            (5.0 / 3.0, ProfileKind::Phi, 1, 8.0, 0.5, -14.0403440953502265),
            (2.0, ProfileKind::F, 2, 8.0, 0.5, -14.184557709971745),
            (2.0, ProfileKind::F, 0, 0.5, 1.0, 0.189267265933428195),
            (1.0 / 3.0, ProfileKind::F, 0, 0.5, 1.0, 1.38796257542475216),
            (2.0 / 3.0, ProfileKind::Phi, 1, 0.5, 1.0, -1.28824129302946984),
            (1.0, ProfileKind::Phi, 2, 0.5, 1.0, 1.1157804066103509),
        ];
        for (beta, kind, p, t, d, reference) in cases {
            let v = layer_primitive(beta, t, d, kind, p);
            assert!((v - reference).abs() < 1e-11 * (1.0 + reference.abs()), "{beta} {kind:?} {p} {t} {d}: {v} vs {reference}");
        }
    }

    #[test]
    fn d_derivative_identity() {
        // ∂_d J^β k_{d,p} = J^β k_{d,p+1}
        for &(d, kind) in &[(1.0, ProfileKind::F), (-1.0, ProfileKind::F), (1.0, ProfileKind::Phi), (0.3, ProfileKind::F)] {
            for &(beta, t) in &[(2.0, 0.5), (5.0 / 3.0, 1.0), (4.0 / 3.0, 0.2)] {
                let h = 1e-4;
                let fd = (layer_primitive(beta, t, d + h, kind, 0) - layer_primitive(beta, t, d - h, kind, 0)) / (2.0 * h);
                let exact = layer_primitive(beta, t, d, kind, 1);
                assert!((fd - exact).abs() < 1e-7 * (1.0 + exact.abs()), "{d} {kind:?} {beta} {t}: {fd} vs {exact}");
            }
        }
    }

    #[test]
    fn zero_offset_closed_form() {
        let f0 = profile(0.0, ProfileKind::F, 0);
        let v = layer_primitive(1.0, 0.7, 0.0, ProfileKind::F, 0);
        assert!((v - 1.5 * 0.7f64.powf(2.0 / 3.0) * f0).abs() < 1e-14);
        assert!(layer_primitive(1.0, 0.7, 0.0, ProfileKind::F, 2).is_nan());
    }

    #[test]
    fn cumulative_matches_direct_primitives() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        for &(d, kind, p) in &[
            (0.75, ProfileKind::F, 0),
            (0.0625, ProfileKind::F, 0),
            (2.0, ProfileKind::Phi, 0),
            (-0.5, ProfileKind::F, 0),
            (0.4, ProfileKind::F, 1),
            (0.4, ProfileKind::Phi, 2),
            (-0.25, ProfileKind::F, 2),
        ] {
            let np = node_primitives(&grid, d, kind, p);
            for m in [1, 7, 33, 64] {
                let t = grid.node(m);
                let a1 = layer_primitive(1.0, t, d, kind, p);
                let a2 = layer_primitive(2.0, t, d, kind, p);
                assert!((np.j1[m] - a1).abs() < 1e-11 * (1.0 + a1.abs()), "{d} {kind:?} {p} j1 at {m}");
                assert!((np.j2[m] - a2).abs() < 1e-11 * (1.0 + a2.abs()), "{d} {kind:?} {p} j2 at {m}");
            }
        }
    }

    #[test]
    fn offset_limit_vanishes() {
        let mut prev = f64::INFINITY;
        for l in [4.0, 8.0, 12.0, 16.0] {
            let v = kernel_eval(KernelId::K1, 1.0, 0.0, l).abs();
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-8, "{prev}");
    }

    #[test]
    fn kernels_vanish_outside_support() {
        for id in KernelId::ALL {
            assert_eq!(kernel_eval(id, 0.5, 0.5, 1.0), 0.0);
            assert_eq!(kernel_eval(id, 0.5, 0.7, 1.0), 0.0);
        }
    }

    #[test]
    fn product_weights_integrate_linear_densities_exactly() {
        // K = layer kernel with d = 0, p = 0: ∫_0^t (t-η)^{-1/3} f(0) g(η) dη for g(η) = 1 + η
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let np = node_primitives(&grid, 0.0, ProfileKind::F, 0);
        let f0 = profile(0.0, ProfileKind::F, 0);
        let mut w = vec![0.0; 17];
        product_weights(&np.j2, &np.j1, 16, grid.dt(), &mut w);
        let g: Vec<f64> = grid.nodes().map(|t| 1.0 + t).collect();
        let v: f64 = w.iter().zip(&g).map(|(a, b)| a * b).sum();
        let exact = f0 * (1.5 + 1.0 / (2.0 / 3.0 * 5.0 / 3.0));
        assert!((v - exact).abs() < 1e-13, "{v} vs {exact}");
    }

    #[test]
    fn identity_between_decaying_kernels() {
        // for d < 0 the value, slope and curvature primitives coincide
        for t in [0.25, 1.0, 3.0] {
            let a = layer_primitive(4.0 / 3.0, t, -1.0, ProfileKind::F, 0);
            let b = layer_primitive(5.0 / 3.0, t, -1.0, ProfileKind::F, 1);
            let c = layer_primitive(2.0, t, -1.0, ProfileKind::F, 2);
            assert!((a - b).abs() < 1e-12 && (a - c).abs() < 1e-12, "{a} {b} {c}");
        }
    }
}

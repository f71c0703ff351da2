//! Quadrature rules shared by the kernel, source and diagnostic integrals.
//!
//! Gauss rules come from the Golub–Welsch eigenvalue construction on the
//! Jacobi matrix of the weight `(1 - x)^a (1 + x)^b` on `[-1, 1]`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of a Gauss rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Exponent of `(1 + x)` in the weight function.
    pub b: f64,
}

impl GaussRule {
    /// Gauss–Jacobi rule for the weight `(1 - x)^a (1 + x)^b`, `a, b > -1`.
    pub fn jacobi(n: usize, a: f64, b: f64) -> Self {
        assert!(n > 0 && a > -1.0 && b > -1.0);
        let ab = a + b;
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n.saturating_sub(1)];
        for (k, d) in diag.iter_mut().enumerate() {
            let kf = k as f64;
            let denom = (2.0 * kf + ab) * (2.0 * kf + ab + 2.0);
            *d = if denom.abs() < 1e-300 {
                (b - a) / (ab + 2.0)
            } else {
                (b * b - a * a) / denom
            };
        }
        for (k, o) in off.iter_mut().enumerate() {
            let n1 = (k + 1) as f64;
            let s = 2.0 * n1 + ab;
            let beta = if k == 0 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                4.0 * n1 * (n1 + a) * (n1 + b) * (n1 + ab) / (s * s * (s + 1.0) * (s - 1.0))
            };
            *o = beta.sqrt();
        }
        let mut jm = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            jm[(k, k)] = diag[k];
            if k + 1 < n {
                jm[(k, k + 1)] = off[k];
                jm[(k + 1, k)] = off[k];
            }
        }
        let mu0 = 2f64.powf(ab + 1.0) * libm::tgamma(a + 1.0) * libm::tgamma(b + 1.0)
            / libm::tgamma(ab + 2.0);
        let eig = SymmetricEigen::new(jm);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let v0 = eig.eigenvectors[(0, k)];
                (eig.eigenvalues[k], mu0 * v0 * v0)
            })
            .collect();
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
            b,
        }
    }

    pub fn legendre(n: usize) -> Self {
        Self::jacobi(n, 0.0, 0.0)
    }

    /// `∫_lo^hi g(x) dx` for a plain Legendre rule.
    #[inline]
    pub fn integrate<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut g: F) -> f64 {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * g(mid + half * x);
        }
        acc * half
    }

    /// `∫_lo^hi (x - lo)^b g(x) dx` for a rule built with `(1 + x)^b` weight.
    pub fn integrate_left_singular<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut g: F) -> f64 {
        let half = 0.5 * (hi - lo);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * g(lo + half * (x + 1.0));
        }
        acc * half.powf(1.0 + self.b)
    }
}

/// Twelve-point Gauss–Legendre rule, used for smooth panels.
pub fn gl12() -> &'static GaussRule {
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    RULE.get_or_init(|| GaussRule::legendre(12))
}

/// Twenty-point Gauss–Legendre rule.
pub fn gl20() -> &'static GaussRule {
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    RULE.get_or_init(|| GaussRule::legendre(20))
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: FnMut(f64) -> f64>(g: &mut F, lo: f64, hi: f64) -> (f64, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = g(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = g(c - dx) + g(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integration with a global bisection queue.
///
/// Returns the integral, or the best estimate together with an error flag when
/// `max_intervals` is exhausted.
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut g: F,
    lo: f64,
    hi: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> (f64, f64, bool) {
    if hi == lo {
        return (0.0, 0.0, true);
    }
    let mut pieces = vec![{
        let (v, e) = gk15(&mut g, lo, hi);
        (lo, hi, v, e)
    }];
    loop {
        let total: f64 = pieces.iter().map(|p| p.2).sum();
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return (total, err, true);
        }
        if pieces.len() >= max_intervals {
            return (total, err, false);
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .3.total_cmp(&b.1 .3))
            .expect("nonempty");
        let (a, b, _, _) = pieces.swap_remove(idx);
        let m = 0.5 * (a + b);
        let (v1, e1) = gk15(&mut g, a, m);
        let (v2, e2) = gk15(&mut g, m, b);
        pieces.push((a, m, v1, e1));
        pieces.push((m, b, v2, e2));
    }
}

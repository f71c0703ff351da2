//! Energy, vertex residuals and field comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{block_bonds, TreeGraph};
use crate::potential::source::SourceTerm;
use crate::wavefield::{BondEnd, BondSamples, WaveField, VERTEX_ENDS};

/// `E(t) = Σ_k ∫ u_k² dx` at each time sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySeries {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
}

fn trapezoid(v: impl Iterator<Item = f64>, dx: f64) -> f64 {
    let v: Vec<f64> = v.collect();
    match v.len() {
        0 | 1 => 0.0,
        n => dx * (v[1..n - 1].iter().sum::<f64>() + 0.5 * (v[0] + v[n - 1])),
    }
}

fn bond_energy(b: &BondSamples, it: usize) -> f64 {
    trapezoid(b.values[it].iter().map(|u| u * u), b.dx())
}

pub fn energy(field: &WaveField) -> EnergySeries {
    let energy = (0..field.times.len()).map(|it| field.bonds.iter().map(|b| bond_energy(b, it)).sum()).collect();
    EnergySeries { times: field.times.clone(), energy }
}

/// `‖g‖_Γ` on the spatial grid of `field`, with the energy's quadrature.
pub fn graph_norm(field: &WaveField, g: impl Fn(usize, f64) -> f64) -> f64 {
    field
        .bonds
        .iter()
        .map(|b| trapezoid(b.x.iter().map(|&x| g(b.bond, x).powi(2)), b.dx()))
        .sum::<f64>()
        .sqrt()
}

/// `‖f‖_Γ` for a set of time-independent forcing terms.
pub fn forcing_norm(field: &WaveField, forcing: &[SourceTerm]) -> f64 {
    graph_norm(field, |bond, x| forcing.iter().filter(|t| t.bond() == Some(bond)).map(|t| t.value(x, 0)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCheck {
    pub passed: bool,
    /// Largest `(E^{n+1} - E^n)/dt - 2‖f‖‖u‖`, over steps.
    pub worst_margin: f64,
    pub worst_step: usize,
}

/// Checks `(E^{n+1} - E^n)/dt ≤ 2‖f‖‖u‖ + tolerance` at every step, with
/// `f_u` the product `‖f‖_Γ‖u‖_Γ` at each node averaged over the step.
pub fn energy_rate_check(series: &EnergySeries, f_u: &[f64], tolerance: f64) -> Result<RateCheck> {
    if f_u.len() != series.energy.len() || series.times.len() != series.energy.len() {
        return Err(Error::Domain("energy and norm series are not aligned".into()));
    }
    let mut worst = (f64::NEG_INFINITY, 0);
    for n in 0..series.energy.len().saturating_sub(1) {
        let dt = series.times[n + 1] - series.times[n];
        let rate = (series.energy[n + 1] - series.energy[n]) / dt;
        let m = rate - (f_u[n] + f_u[n + 1]);
        if m > worst.0 {
            worst = (m, n);
        }
    }
    if series.energy.len() < 2 {
        worst.0 = 0.0;
    }
    Ok(RateCheck { passed: worst.0 <= tolerance, worst_margin: worst.0, worst_step: worst.1 })
}

/// Largest single-step increase `E^{n+1} - E^n`.
pub fn max_energy_increase(series: &EnergySeries) -> f64 {
    series.energy.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
}

/// Names of the fifteen vertex conditions, in row order.
pub fn condition_names() -> Vec<String> {
    let mut v = Vec::with_capacity(15);
    for block in 1..=3 {
        let (_, q, r) = block_bonds(block);
        let vx = block - 1;
        v.push(format!("v{vx}_value_{q}"));
        v.push(format!("v{vx}_value_{r}"));
        v.push(format!("v{vx}_slope_{q}"));
        v.push(format!("v{vx}_slope_{r}"));
        v.push(format!("v{vx}_curvature"));
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub names: Vec<String>,
    /// Residual of every condition at every time sample.
    pub per_time: Vec<[f64; 15]>,
    pub times: Vec<f64>,
    /// Largest absolute residual over time, per condition.
    pub max_abs: [f64; 15],
    /// Largest `|u|` at truncated far ends.
    pub far_field: f64,
    /// RMS of the discrete PDE residual on bond 2, when computed.
    pub interior_pde: Option<f64>,
}

impl ResidualReport {
    /// Largest residual over conditions, ignoring times before `t_from`.
    pub fn max_after(&self, t_from: f64) -> [f64; 15] {
        let mut out = [0.0f64; 15];
        for (t, r) in self.times.iter().zip(&self.per_time) {
            if *t >= t_from {
                for (o, v) in out.iter_mut().zip(r) {
                    *o = o.max(v.abs());
                }
            }
        }
        out
    }
}

/// One-sided value, slope and curvature at a bond end from samples.
fn stencil_trace(b: &BondSamples, end: BondEnd, it: usize) -> Result<[f64; 3]> {
    let n = b.x.len();
    if n < 4 {
        return Err(Error::Domain(format!("bond {} has too few samples for vertex differences", b.bond)));
    }
    let row = &b.values[it];
    let (u, s) = match end {
        BondEnd::Left => ([row[0], row[1], row[2], row[3]], 1.0),
        BondEnd::Right => ([row[n - 1], row[n - 2], row[n - 3], row[n - 4]], -1.0),
    };
    let h = b.dx();
    Ok([u[0], s * (-1.5 * u[0] + 2.0 * u[1] - 0.5 * u[2]) / h, (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / (h * h)])
}

fn end_trace(field: &WaveField, bond: usize, end: BondEnd, it: usize) -> Result<[f64; 3]> {
    if let Some(tr) = &field.traces {
        if let Some(e) = tr.iter().find(|e| e.bond == bond && e.end == end) {
            return Ok([e.derivs[0][it], e.derivs[1][it], e.derivs[2][it]]);
        }
    }
    let b = field.bond(bond)?;
    stencil_trace(b, end, it)
}

/// Evaluates the fifteen vertex conditions at every time sample.
pub fn vertex_residuals(field: &WaveField, graph: &TreeGraph) -> Result<ResidualReport> {
    let w = &graph.weights;
    let mut per_time = Vec::with_capacity(field.times.len());
    for it in 0..field.times.len() {
        let mut r = [0.0; 15];
        for (block, ends) in VERTEX_ENDS.iter().enumerate() {
            let tr: Vec<[f64; 3]> = ends.iter().map(|&(b, e)| end_trace(field, b, e, it)).collect::<Result<_>>()?;
            let p = ends[0].0;
            let (ap, bp) = if p == 1 { (1.0, 1.0) } else { (w.a(p), w.b(p)) };
            let (q, rr) = (ends[1].0, ends[2].0);
            let base = 5 * block;
            r[base] = ap * tr[0][0] - w.a(q) * tr[1][0];
            r[base + 1] = ap * tr[0][0] - w.a(rr) * tr[2][0];
            r[base + 2] = bp * tr[0][1] - w.b(q) * tr[1][1];
            r[base + 3] = bp * tr[0][1] - w.b(rr) * tr[2][1];
            r[base + 4] = tr[0][2] / ap - tr[1][2] / w.a(q) - tr[2][2] / w.a(rr);
        }
        per_time.push(r);
    }
    let mut max_abs = [0.0f64; 15];
    for r in &per_time {
        for (m, v) in max_abs.iter_mut().zip(r) {
            *m = m.max(v.abs());
        }
    }
    let mut far_field = 0.0f64;
    for b in &field.bonds {
        let idx = match b.bond {
            1 => Some(0),
            4..=7 => Some(b.x.len() - 1),
            _ => None,
        };
        if let Some(j) = idx {
            far_field = b.values.iter().fold(far_field, |m, row| m.max(row[j].abs()));
        }
    }
    Ok(ResidualReport {
        names: condition_names(),
        per_time,
        times: field.times.clone(),
        max_abs,
        far_field,
        interior_pde: None,
    })
}

/// RMS of `u_t - u_xxx - f` on `bond`, by centred differences at step
/// midpoints over interior samples with `t ≥ t_from`.
pub fn interior_pde_residual(field: &WaveField, bond: usize, forcing: &[SourceTerm], t_from: f64) -> Result<f64> {
    let b = field.bond(bond)?;
    let h = b.dx();
    let nx = b.x.len();
    if nx < 5 || field.times.len() < 2 {
        return Err(Error::Domain("too few samples for an interior residual".into()));
    }
    let f: Vec<f64> =
        b.x.iter().map(|&x| forcing.iter().filter(|t| t.bond() == Some(bond)).map(|t| t.value(x, 0)).sum()).collect();
    let d3 = |row: &[f64], i: usize| (row[i + 2] - 2.0 * row[i + 1] + 2.0 * row[i - 1] - row[i - 2]) / (2.0 * h * h * h);
    let (mut acc, mut count) = (0.0, 0usize);
    for n in 0..field.times.len() - 1 {
        if field.times[n] < t_from {
            continue;
        }
        let dt = field.times[n + 1] - field.times[n];
        let (u0, u1) = (&b.values[n], &b.values[n + 1]);
        for i in 2..nx - 2 {
            let r = (u1[i] - u0[i]) / dt - 0.5 * (d3(u0, i) + d3(u1, i)) - f[i];
            acc += r * r;
            count += 1;
        }
    }
    Ok(if count == 0 { 0.0 } else { (acc / count as f64).sqrt() })
}

/// Observation window for comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// `‖a - b‖₂ / max(‖a‖₂, ε)` over the window.
    pub rel_l2: f64,
    pub sup: f64,
    pub points: usize,
    /// Per time sample of `a` inside the window: `(t, rel_l2, sup)`.
    pub per_time: Vec<(f64, f64, f64)>,
}

/// Compares `b` against `a` at the sample points of `a` inside `window`,
/// interpolating `b` bilinearly.
pub fn compare_fields(a: &WaveField, b: &WaveField, window: &Window) -> Result<Comparison> {
    const EPS: f64 = 1e-300;
    let (mut diff2, mut norm2, mut sup, mut points) = (0.0, 0.0, 0.0f64, 0usize);
    let mut per_time = Vec::new();
    for (it, &t) in a.times.iter().enumerate() {
        if t < window.t_min - 1e-12 || t > window.t_max + 1e-12 {
            continue;
        }
        let (mut d2, mut n2, mut s) = (0.0, 0.0, 0.0f64);
        for ba in &a.bonds {
            let w = ba.dx();
            for (j, &x) in ba.x.iter().enumerate() {
                if x.abs() > window.x_max + 1e-12 {
                    continue;
                }
                let va = ba.values[it][j];
                let vb = b
                    .sample(ba.bond, x, t)
                    .ok_or_else(|| Error::Domain(format!("second field does not cover bond {} x = {x} t = {t}", ba.bond)))?;
                d2 += w * (va - vb).powi(2);
                n2 += w * va * va;
                s = s.max((va - vb).abs());
                points += 1;
            }
        }
        per_time.push((t, d2.sqrt() / n2.sqrt().max(EPS), s));
        diff2 += d2;
        norm2 += n2;
        sup = sup.max(s);
    }
    if points == 0 {
        return Err(Error::Domain("observation window contains no samples".into()));
    }
    Ok(Comparison { rel_l2: diff2.sqrt() / norm2.sqrt().max(EPS), sup, points, per_time })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::VertexWeights;
    use crate::wavefield::uniform_nodes;

    fn field_with(g: impl Fn(usize, f64, f64) -> f64, cells: usize) -> WaveField {
        let times: Vec<f64> = (0..=4).map(|n| n as f64 * 0.25).collect();
        let bonds = (1..=7)
            .map(|bond| {
                let x = match bond {
                    1 => uniform_nodes(-5.0, 0.0, 5 * cells),
                    2 | 3 => uniform_nodes(0.0, 1.0, cells),
                    _ => uniform_nodes(0.0, 5.0, 5 * cells),
                };
                let values = times.iter().map(|&t| x.iter().map(|&x| g(bond, x, t)).collect()).collect();
                BondSamples { bond, x, values }
            })
            .collect();
        WaveField { times, bonds, traces: None }
    }

    #[test]
    fn zero_field_has_zero_energy_and_residuals() {
        let f = field_with(|_, _, _| 0.0, 8);
        assert!(energy(&f).energy.iter().all(|e| *e == 0.0));
        let g = TreeGraph::new(VertexWeights::uniform(0.9, 1.5), 1.0).unwrap();
        let r = vertex_residuals(&f, &g).unwrap();
        assert!(r.max_abs.iter().all(|v| *v == 0.0));
        assert_eq!(r.names.len(), 15);
    }

    #[test]
    fn unit_field_on_bond_two_has_unit_energy() {
        let f = field_with(|b, _, _| if b == 2 { 1.0 } else { 0.0 }, 8);
        assert!(energy(&f).energy.iter().all(|e| (e - 1.0).abs() < 1e-15));
    }

    #[test]
    fn energy_scales_quadratically() {
        let f = field_with(|b, x, t| (b as f64) * x.sin() * (1.0 + t), 8);
        let (e1, e2) = (energy(&f), energy(&f.scaled(3.0)));
        for (a, b) in e1.energy.iter().zip(&e2.energy) {
            assert!((9.0 * a - b).abs() <= 1e-13 * b);
        }
    }

    #[test]
    fn rate_check_cases() {
        let times: Vec<f64> = (0..=100).map(|n| n as f64 * 0.01).collect();
        let zero = EnergySeries { times: times.clone(), energy: vec![0.0; 101] };
        assert!(energy_rate_check(&zero, &[0.0; 101], 0.0).unwrap().passed);
        let e: Vec<f64> = times.iter().map(|t| (2.0 * t).exp()).collect();
        let s = EnergySeries { times, energy: e.clone() };
        let c = energy_rate_check(&s, &e, 0.0).unwrap();
        assert!(c.passed && c.worst_margin.abs() < 1e-3, "{c:?}");
        let c = energy_rate_check(&s, &vec![0.0; 101], 0.0).unwrap();
        assert!(!c.passed);
        assert!(energy_rate_check(&s, &[0.0; 3], 0.0).is_err());
    }

    #[test]
    fn comparison_of_shifted_fields() {
        let f = field_with(|_, x, t| (x * t).cos(), 8);
        let w = Window { x_max: 5.0, t_min: 0.2, t_max: 1.0 };
        let c = compare_fields(&f, &f, &w).unwrap();
        assert_eq!((c.rel_l2, c.sup), (0.0, 0.0));
        let g = field_with(|_, x, t| (x * t).cos() + 0.125, 8);
        let c = compare_fields(&f, &g, &w).unwrap();
        assert!((c.sup - 0.125).abs() < 1e-15);
    }

    #[test]
    fn stencils_are_exact_on_quadratics() {
        // continuous values, matching slopes and balanced curvature at the root
        let w = VertexWeights::uniform(1.0, 1.0);
        let g = TreeGraph::new(w, 1.0).unwrap();
        let f = field_with(
            |b, x, _| match b {
                1 => 1.0 + x + x * x,
                2 | 3 => 1.0 + x + 0.5 * x * x,
                _ => 0.0,
            },
            8,
        );
        let r = vertex_residuals(&f, &g).unwrap();
        for i in 0..5 {
            assert!(r.max_abs[i] < 1e-12, "{i}: {}", r.max_abs[i]);
        }
    }

    proptest::proptest! {
        #[test]
        fn comparison_is_symmetric_on_a_common_grid(c in -1.0f64..1.0, s in 0.1f64..3.0) {
            let f = field_with(|_, x, t| (s * x).sin() * t, 8);
            let g = field_with(|_, x, t| (s * x).sin() * t + c * x.cos(), 8);
            let w = Window { x_max: 5.0, t_min: 0.0, t_max: 1.0 };
            let (ab, ba) = (compare_fields(&f, &g, &w).unwrap(), compare_fields(&g, &f, &w).unwrap());
            proptest::prop_assert!((ab.sup - ba.sup).abs() < 1e-14);
        }
    }
}

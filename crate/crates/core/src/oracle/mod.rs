//! Implicit finite-difference solver on the truncated tree, used as an
//! independent reference for the potential solver.
//!
//! Each bond carries uniform nodes. A bond of `N` cells has the third
//! derivative imposed at nodes `2..N`, two conditions at its left end and
//! one at its right end: vertex conditions where it meets a vertex, and
//! `u = u_x = 0` (bond 1) or `u = 0` (bonds 4 to 7) at truncated ends.

pub mod banded;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{block_bonds, TreeGraph};
use crate::potential::source::SourceTerm;
use crate::wavefield::{BondSamples, WaveField};
use banded::{BandLu, BandMatrix};

/// Grid of the truncated problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedMesh {
    pub length: f64,
    /// Bond 1 is cut to `[-X, 0]` and bonds 4 to 7 to `[0, X]`.
    pub truncation: f64,
    pub dx: f64,
    pub t_max: f64,
    pub n_steps: usize,
    /// 1/2 is Crank–Nicolson, 1 is backward Euler.
    pub theta: f64,
}

impl TruncatedMesh {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let integral = |v: f64| (v - v.round()).abs() < 1e-9 * v.max(1.0) && v.round() >= 4.0;
        if !(self.length > 0.0 && self.dx > 0.0 && self.t_max > 0.0 && self.n_steps > 0) {
            bad.push("length, dx, t_max and n_steps must be positive".to_string());
        } else {
            if !integral(self.length / self.dx) {
                bad.push(format!("dx = {} must divide L = {} into at least 4 cells", self.dx, self.length));
            }
            if !integral(self.truncation / self.dx) {
                bad.push(format!("dx = {} must divide X = {} into at least 4 cells", self.dx, self.truncation));
            }
        }
        if !(self.truncation >= 5.0 * self.length) {
            bad.push(format!("truncation X = {} must be at least 5 L", self.truncation));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            bad.push(format!("theta = {} outside [1/2, 1]", self.theta));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.n_steps as f64
    }

    pub fn cells(&self, bond: usize) -> usize {
        let span = if matches!(bond, 2 | 3) { self.length } else { self.truncation };
        (span / self.dx).round() as usize
    }

    /// Coordinate of node `i` on `bond`.
    pub fn node_x(&self, bond: usize, i: usize) -> f64 {
        let x = i as f64 * self.dx;
        if bond == 1 {
            x - self.cells(1) as f64 * self.dx
        } else {
            x
        }
    }
}

#[derive(Debug, Clone)]
struct Equation {
    home: usize,
    coeffs: Vec<(usize, f64)>,
    pde: bool,
}

/// The assembled and factorised step operator.
#[derive(Debug, Clone)]
pub struct OracleSystem {
    pub mesh: TruncatedMesh,
    cells: [usize; 7],
    offsets: [usize; 7],
    n: usize,
    position: Vec<usize>,
    equations: Vec<Equation>,
    lu: BandLu,
}

/// Third-difference weights at offsets −3..=1, for the last interior node.
const ONE_SIDED_D3: [f64; 5] = [0.5, -3.0, 6.0, -5.0, 1.5];

impl OracleSystem {
    fn slot(&self, bond: usize, i: usize) -> usize {
        self.offsets[bond - 1] + i
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of vertex-condition rows.
    pub fn vertex_rows(&self) -> usize {
        self.equations.iter().filter(|e| !e.pde).count() - 2 - 4
    }

    /// Nodal values of `bond` within a state vector.
    pub fn bond_slice<'a>(&self, u: &'a [f64], bond: usize) -> &'a [f64] {
        let o = self.offsets[bond - 1];
        &u[o..=o + self.cells[bond - 1]]
    }

    /// Samples `g(bond, x)` at every node.
    pub fn nodal(&self, g: impl Fn(usize, f64) -> f64) -> Vec<f64> {
        let mut u = vec![0.0; self.n];
        for bond in 1..=7 {
            for i in 0..=self.cells[bond - 1] {
                u[self.slot(bond, i)] = g(bond, self.mesh.node_x(bond, i));
            }
        }
        u
    }

    /// Largest vertex and far-field constraint residual of a state.
    pub fn constraint_residual(&self, u: &[f64]) -> f64 {
        self.equations
            .iter()
            .filter(|e| !e.pde)
            .map(|e| e.coeffs.iter().map(|&(s, c)| c * u[s]).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    /// Advances one step; `f` holds nodal forcing values.
    pub fn step(&self, u: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        let dt = self.mesh.dt();
        let th = self.mesh.theta;
        let mut b = vec![0.0; self.n];
        for e in &self.equations {
            if e.pde {
                let d3: f64 = e.coeffs.iter().map(|&(s, c)| c * u[s]).sum();
                b[self.position[e.home]] = u[e.home] + (1.0 - th) * dt * d3 + dt * f[e.home];
            }
        }
        self.lu.solve_in_place(&mut b);
        let out: Vec<f64> = (0..self.n).map(|s| b[self.position[s]]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite state after finite-difference step".into()));
        }
        Ok(out)
    }
}

/// Assembles and factorises the step operator.
pub fn build_system(graph: &TreeGraph, mesh: &TruncatedMesh) -> Result<OracleSystem> {
    mesh.validate()?;
    if (mesh.length - graph.length).abs() > 1e-12 * graph.length {
        return Err(Error::Config(vec![format!(
            "mesh length {} differs from graph length {}",
            mesh.length, graph.length
        )]));
    }
    let cells: [usize; 7] = std::array::from_fn(|k| mesh.cells(k + 1));
    let mut offsets = [0usize; 7];
    for k in 1..7 {
        offsets[k] = offsets[k - 1] + cells[k - 1] + 1;
    }
    let n = offsets[6] + cells[6] + 1;
    let slot = |bond: usize, i: usize| offsets[bond - 1] + i;
    let h = mesh.dx;
    let w = &graph.weights;

    let mut equations = Vec::with_capacity(n);
    for bond in 1..=7 {
        let nc = cells[bond - 1];
        for i in 2..nc {
            let coeffs = if i + 2 <= nc {
                [(-2i64, -1.0), (-1, 2.0), (1, -2.0), (2, 1.0)]
                    .iter()
                    .map(|&(o, c)| (slot(bond, (i as i64 + o) as usize), c / (2.0 * h * h * h)))
                    .collect()
            } else {
                ONE_SIDED_D3
                    .iter()
                    .enumerate()
                    .map(|(j, c)| (slot(bond, i + j - 3), c / (h * h * h)))
                    .collect()
            };
            equations.push(Equation { home: slot(bond, i), coeffs, pde: true });
        }
    }

    // one-sided value, slope and curvature stencils at a bond end
    let end_stencil = |bond: usize, right: bool, order: usize| -> Vec<(usize, f64)> {
        let nc = cells[bond - 1];
        let node = |j: usize| if right { slot(bond, nc - j) } else { slot(bond, j) };
        let sgn = if right { -1.0 } else { 1.0 };
        match order {
            0 => vec![(node(0), 1.0)],
            1 => vec![(node(0), -1.5 * sgn / h), (node(1), 2.0 * sgn / h), (node(2), -0.5 * sgn / h)],
            _ => [2.0, -5.0, 4.0, -1.0].iter().enumerate().map(|(j, c)| (node(j), c / (h * h))).collect(),
        }
    };
    let combine = |terms: &[(f64, Vec<(usize, f64)>)]| -> Vec<(usize, f64)> {
        terms.iter().flat_map(|(s, st)| st.iter().map(move |&(k, c)| (k, s * c))).collect()
    };
    for block in 1..=3 {
        let (p, q, r) = block_bonds(block);
        let (ap, bp) = if p == 1 { (1.0, 1.0) } else { (w.a(p), w.b(p)) };
        let mut eqs = Vec::new();
        for k in [q, r] {
            eqs.push(combine(&[(ap, end_stencil(p, true, 0)), (-w.a(k), end_stencil(k, false, 0))]));
        }
        for k in [q, r] {
            eqs.push(combine(&[(bp, end_stencil(p, true, 1)), (-w.b(k), end_stencil(k, false, 1))]));
        }
        eqs.push(combine(&[
            (1.0 / ap, end_stencil(p, true, 2)),
            (-1.0 / w.a(q), end_stencil(q, false, 2)),
            (-1.0 / w.a(r), end_stencil(r, false, 2)),
        ]));
        let homes = [
            slot(p, cells[p - 1]),
            slot(q, 0),
            slot(q, 1),
            slot(r, 0),
            slot(r, 1),
        ];
        for (home, coeffs) in homes.into_iter().zip(eqs) {
            equations.push(Equation { home, coeffs, pde: false });
        }
    }
    equations.push(Equation { home: slot(1, 0), coeffs: end_stencil(1, false, 0), pde: false });
    equations.push(Equation { home: slot(1, 1), coeffs: end_stencil(1, false, 1), pde: false });
    for k in 4..=7 {
        equations.push(Equation { home: slot(k, cells[k - 1]), coeffs: end_stencil(k, true, 0), pde: false });
    }
    debug_assert_eq!(equations.len(), n);

    // interleave bonds level by level so that every equation stays near the diagonal
    let mut position = vec![0usize; n];
    let mut next = 0;
    for level in [&[1usize][..], &[2, 3], &[4, 5, 6, 7]] {
        let m = cells[level[0] - 1];
        for i in 0..=m {
            for &k in level {
                position[slot(k, i)] = next;
                next += 1;
            }
        }
    }
    let dt = mesh.dt();
    let row_entries = |e: &Equation| -> Vec<(usize, f64)> {
        if e.pde {
            let mut v: Vec<(usize, f64)> = e.coeffs.iter().map(|&(s, c)| (s, -mesh.theta * dt * c)).collect();
            v.push((e.home, 1.0));
            v
        } else {
            e.coeffs.clone()
        }
    };
    let (mut kl, mut ku) = (0usize, 0usize);
    for e in &equations {
        let r = position[e.home];
        for (s, _) in row_entries(e) {
            let c = position[s];
            kl = kl.max(r.saturating_sub(c));
            ku = ku.max(c.saturating_sub(r));
        }
    }
    let mut band = BandMatrix::zeros(n, kl, ku);
    for e in &equations {
        let r = position[e.home];
        for (s, v) in row_entries(e) {
            band.add(r, position[s], v);
        }
    }
    let lu = band
        .factor()
        .map_err(|e| Error::Numerical(format!("finite-difference step operator is singular: {e}")))?;
    Ok(OracleSystem { mesh: *mesh, cells, offsets, n, position, equations, lu })
}

/// A finished oracle run at full mesh resolution.
#[derive(Debug, Clone)]
pub struct OracleRun {
    pub field: WaveField,
    /// Nodal forcing, constant in time.
    pub forcing: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Marches from `initial` data under time-independent `forcing`.
pub fn run(graph: &TreeGraph, mesh: &TruncatedMesh, initial: &[SourceTerm], forcing: &[SourceTerm]) -> Result<OracleRun> {
    let sys = build_system(graph, mesh)?;
    let sample = |terms: &[SourceTerm]| {
        sys.nodal(|bond, x| terms.iter().filter(|t| t.bond() == Some(bond)).map(|t| t.value(x, 0)).sum())
    };
    let f = sample(forcing);
    let mut u = sample(initial);
    let mut warnings = Vec::new();
    let scale = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mismatch = sys.constraint_residual(&u);
    if mismatch > 1e-8 * scale.max(1.0) {
        let msg = format!("initial data violates the vertex conditions by {mismatch:.3e}");
        warn!("{msg}");
        warnings.push(msg);
    }
    let mut states = Vec::with_capacity(mesh.n_steps + 1);
    states.push(u.clone());
    for n in 0..mesh.n_steps {
        u = sys.step(&u, &f).map_err(|e| Error::Numerical(format!("step {}: {e}", n + 1)))?;
        states.push(u.clone());
    }
    let bonds = (1..=7)
        .map(|bond| BondSamples {
            bond,
            x: (0..=sys.cells[bond - 1]).map(|i| mesh.node_x(bond, i)).collect(),
            values: states.iter().map(|s| sys.bond_slice(s, bond).to_vec()).collect(),
        })
        .collect();
    let times = (0..=mesh.n_steps).map(|n| n as f64 * mesh.dt()).collect();
    Ok(OracleRun { field: WaveField { times, bonds, traces: None }, forcing: f, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::VertexWeights;

    fn mesh(theta: f64) -> TruncatedMesh {
        TruncatedMesh { length: 1.0, truncation: 5.0, dx: 1.0 / 16.0, t_max: 0.25, n_steps: 16, theta }
    }

    fn graph(w: VertexWeights) -> TreeGraph {
        TreeGraph::new(w, 1.0).unwrap()
    }

    fn bump(bond: usize, amplitude: f64) -> SourceTerm {
        SourceTerm::GaussianBump { bond, center: 0.5, width: 0.1, amplitude }
    }

    #[test]
    fn system_is_square_with_fifteen_vertex_rows() {
        let sys = build_system(&graph(VertexWeights::uniform(1.0, 1.0)), &mesh(0.5)).unwrap();
        assert_eq!(sys.vertex_rows(), 15);
        assert_eq!(sys.equations.len(), sys.len());
    }

    #[test]
    fn unit_weights_give_plain_continuity() {
        let sys = build_system(&graph(VertexWeights::uniform(1.0, 1.0)), &mesh(0.5)).unwrap();
        let vertex: Vec<&Equation> = sys.equations.iter().filter(|e| !e.pde).collect();
        let n1 = sys.cells[0];
        assert_eq!(vertex[0].coeffs, vec![(sys.slot(1, n1), 1.0), (sys.slot(2, 0), -1.0)]);
        // slopes match when u is the same linear function of the path coordinate
        let u = sys.nodal(|bond, x| if bond == 1 { x } else if matches!(bond, 2 | 3) { x } else { 0.0 });
        let slope: f64 = vertex[2].coeffs.iter().map(|&(s, c)| c * u[s]).sum();
        assert!(slope.abs() < 1e-12);
    }

    #[test]
    fn zero_data_stays_zero() {
        let r = run(&graph(VertexWeights::uniform(0.9, 1.5)), &mesh(0.5), &[], &[]).unwrap();
        assert!(r.field.bonds.iter().all(|b| b.values.iter().flatten().all(|v| *v == 0.0)));
    }

    #[test]
    fn step_is_linear() {
        let g = graph(VertexWeights { a: [0.9, 0.8, 0.9, 0.8, 0.9, 0.8], b: [1.5; 6] });
        let sys = build_system(&g, &mesh(0.5)).unwrap();
        let u = sys.nodal(|b, x| if b == 2 { (-((x - 0.5) / 0.1f64).powi(2)).exp() } else { 0.0 });
        let f = sys.nodal(|b, x| if b == 4 { x * (-x * x).exp() } else { 0.0 });
        let one = sys.step(&u, &f).unwrap();
        let u3: Vec<f64> = u.iter().map(|v| 3.0 * v).collect();
        let f3: Vec<f64> = f.iter().map(|v| 3.0 * v).collect();
        let three = sys.step(&u3, &f3).unwrap();
        for (a, b) in one.iter().zip(&three) {
            assert!((3.0 * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        assert!(sys.constraint_residual(&one) < 1e-9);
    }

    #[test]
    fn mirrored_subtrees_give_mirrored_fields() {
        let w = VertexWeights { a: [0.9, 0.8, 0.7, 0.95, 0.85, 0.75], b: [1.5, 1.6, 2.2, 2.3, 2.1, 2.4] };
        let r1 = run(&graph(w), &mesh(1.0), &[], &[bump(2, 1.0)]).unwrap();
        let r2 = run(&graph(w.mirrored()), &mesh(1.0), &[], &[bump(3, 1.0)]).unwrap();
        for (a, b) in [(1, 1), (2, 3), (3, 2), (4, 6), (5, 7), (6, 4), (7, 5)] {
            let (fa, fb) = (r1.field.bond(a).unwrap(), r2.field.bond(b).unwrap());
            for (ra, rb) in fa.values.iter().zip(&fb.values) {
                for (x, y) in ra.iter().zip(rb) {
                    assert!((x - y).abs() < 1e-12, "bond {a}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn incompatible_initial_data_is_warned() {
        let g = graph(VertexWeights::uniform(1.0, 1.0));
        let step = SourceTerm::Indicator { bond: 2, start: 0.0, end: 0.5, amplitude: 1.0 };
        let r = run(&g, &mesh(1.0), &[step], &[]).unwrap();
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn bad_meshes_list_every_problem() {
        let m = TruncatedMesh { truncation: 2.0, dx: 0.3, theta: 0.2, ..mesh(0.5) };
        match m.validate() {
            Err(Error::Config(v)) => assert_eq!(v.len(), 4, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }
}

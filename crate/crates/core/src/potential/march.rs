//! Time marching of the fifteen-unknown Volterra system.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::kernel::{KernelId, KernelTable, RowKind};
use super::source::SourcePotentialSet;
use super::vertex::{assemble_vertex_matrix, couplings, Coupling, N_UNKNOWNS};
use crate::error::{Error, Result};
use crate::fractional::{FracDerivative, TimeGrid};
use crate::graph::{block_bonds, TreeGraph};

/// The densities at one time, grouped by role.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DensityVector {
    /// `φ_1..φ_7`
    pub phi: [f64; 7],
    /// `ψ_4..ψ_7`
    pub psi: [f64; 4],
    /// `α_2, α_3`
    pub alpha: [f64; 2],
    /// `β_2, β_3`
    pub beta: [f64; 2],
}

impl DensityVector {
    /// From the solver's column order.
    pub fn from_columns(c: &[f64; N_UNKNOWNS]) -> Self {
        Self {
            phi: [c[0], c[1], c[2], c[6], c[7], c[11], c[12]],
            psi: [c[8], c[9], c[13], c[14]],
            alpha: [c[5], c[10]],
            beta: [c[3], c[4]],
        }
    }

    pub fn to_columns(&self) -> [f64; N_UNKNOWNS] {
        let (p, s, a, b) = (&self.phi, &self.psi, &self.alpha, &self.beta);
        [p[0], p[1], p[2], b[0], b[1], a[0], p[3], p[4], s[0], s[1], a[1], p[5], p[6], s[2], s[3]]
    }
}

/// Density samples at every node of a time grid, in column order.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySeries {
    pub grid: TimeGrid,
    pub values: Vec<[f64; N_UNKNOWNS]>,
}

impl DensitySeries {
    pub fn zeros(grid: TimeGrid) -> Self {
        Self { grid, values: vec![[0.0; N_UNKNOWNS]; grid.len()] }
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[col]).collect()
    }

    pub fn at(&self, n: usize) -> DensityVector {
        DensityVector::from_columns(&self.values[n])
    }
}

/// Which trace enters a vertex right-hand side: bond, position, derivative order.
type Trace = (usize, f64, usize);

/// Right-hand sides of all rows at all nodes.
fn right_hand_sides(graph: &TreeGraph, sources: &SourcePotentialSet, grid: &TimeGrid) -> Result<Vec<Vec<f64>>> {
    let w = &graph.weights;
    let l = graph.length;
    let n = grid.n_steps;
    let mut cache: Vec<(Trace, Vec<f64>)> = Vec::new();
    let mut trace = |bond: usize, x: f64, order: usize| -> Result<Vec<f64>> {
        if let Some((_, v)) = cache.iter().find(|(k, _)| *k == (bond, x, order)) {
            return Ok(v.clone());
        }
        let v = if sources.is_zero(bond) { vec![0.0; n + 1] } else { sources.series(bond, x, grid, order)? };
        cache.push(((bond, x, order), v.clone()));
        Ok(v)
    };
    let d23 = FracDerivative::new(*grid, 2.0 / 3.0);
    let d13 = FracDerivative::new(*grid, 1.0 / 3.0);
    let frac = |op: &FracDerivative, r: Vec<f64>, scale: f64| -> Vec<f64> {
        // the node at t = 0 is left at zero: compatible data has a vanishing
        // combination there and the t^{-α} term is not representable
        let mut out = vec![0.0; n + 1];
        for (m, o) in out.iter_mut().enumerate().skip(1) {
            *o = scale * op.at(&r, m);
        }
        out
    };
    let sv = RowKind::Value.scale();
    let ss = RowKind::Slope.scale();
    let mut rows = vec![Vec::new(); N_UNKNOWNS];
    for block in 1..=3 {
        let (p, q, r) = block_bonds(block);
        let base = 5 * (block - 1);
        // the incoming bond meets the vertex at its right end
        let xp = if p == 1 { 0.0 } else { l };
        let (ap, bp) = if p == 1 { (1.0, 1.0) } else { (w.a(p), w.b(p)) };
        let up = trace(p, xp, 0)?;
        let upx = trace(p, xp, 1)?;
        let upxx = trace(p, xp, 2)?;
        let mut curv: Vec<f64> = upxx.iter().map(|v| v / ap).collect();
        for (i, k) in [q, r].into_iter().enumerate() {
            let uk = trace(k, 0.0, 0)?;
            let ukx = trace(k, 0.0, 1)?;
            let ukxx = trace(k, 0.0, 2)?;
            let val: Vec<f64> = uk.iter().zip(&up).map(|(a, b)| w.a(k) * a - ap * b).collect();
            let slope: Vec<f64> = ukx.iter().zip(&upx).map(|(a, b)| w.b(k) * a - bp * b).collect();
            rows[base + i] = frac(&d23, val, sv);
            rows[base + 2 + i] = frac(&d13, slope, ss);
            for (c, v) in curv.iter_mut().zip(&ukxx) {
                *c -= v / w.a(k);
            }
        }
        rows[base + 4] = curv;
    }
    for (i, row) in rows.iter().enumerate() {
        if let Some(m) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite right-hand side in row {i} at node {m}")));
        }
    }
    Ok(rows)
}

/// Kernel tables for the ids used by `couplings`.
pub fn kernel_tables(graph: &TreeGraph, grid: &TimeGrid) -> Vec<KernelTable> {
    KernelId::ALL.iter().map(|&id| KernelTable::new(id, grid, graph.length)).collect()
}

fn table_index(id: KernelId) -> usize {
    KernelId::ALL.iter().position(|&k| k == id).expect("known kernel")
}

/// Solves the Volterra system on `grid` by product integration.
pub fn march_volterra(
    graph: &TreeGraph,
    sources: &SourcePotentialSet,
    grid: &TimeGrid,
    tolerance: f64,
) -> Result<DensitySeries> {
    let tables = kernel_tables(graph, grid);
    march_with_tables(graph, sources, grid, tolerance, &tables)
}

/// As [`march_volterra`] with precomputed kernel tables.
pub fn march_with_tables(
    graph: &TreeGraph,
    sources: &SourcePotentialSet,
    grid: &TimeGrid,
    tolerance: f64,
    tables: &[KernelTable],
) -> Result<DensitySeries> {
    let a = assemble_vertex_matrix(&graph.weights, tolerance)?;
    let rhs = right_hand_sides(graph, sources, grid)?;
    let links: Vec<(Coupling, &KernelTable)> =
        couplings(&graph.weights).into_iter().map(|c| (c, &tables[table_index(c.kernel)])).collect();
    let n = grid.n_steps;

    let mut stepped: DMatrix<f64> = a.clone();
    for (c, t) in &links {
        stepped[(c.row, c.col)] += c.coef * t.lag[0];
    }
    let lu0 = a.lu();
    let lu = stepped.lu();
    if !lu.is_invertible() {
        return Err(Error::Numerical("step matrix of the Volterra march is singular".into()));
    }

    let mut series = DensitySeries::zeros(*grid);
    let mut b = DVector::zeros(N_UNKNOWNS);
    for i in 0..N_UNKNOWNS {
        b[i] = rhs[i][0];
    }
    let x0 = lu0.solve(&b).ok_or_else(|| Error::Numerical("vertex matrix is singular".into()))?;
    series.values[0].copy_from_slice(x0.as_slice());

    let mut cols: Vec<Vec<f64>> = vec![vec![0.0; n + 1]; N_UNKNOWNS];
    for (i, c) in cols.iter_mut().enumerate() {
        c[0] = series.values[0][i];
    }
    for step in 1..=n {
        for i in 0..N_UNKNOWNS {
            b[i] = rhs[i][step];
        }
        for (c, t) in &links {
            let hist = &cols[c.col];
            let mut acc = t.first_weight(step) * hist[0];
            for m in 1..step {
                acc += t.lag[step - m] * hist[m];
            }
            b[c.row] -= c.coef * acc;
        }
        let x = lu.solve(&b).ok_or_else(|| Error::Numerical(format!("linear solve failed at step {step}")))?;
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite density {i} at step {step}")));
        }
        for i in 0..N_UNKNOWNS {
            cols[i][step] = x[i];
            series.values[step][i] = x[i];
        }
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::VertexWeights;
    use crate::potential::source::SourceTerm;

    fn reference_graph() -> TreeGraph {
        TreeGraph::new(VertexWeights { a: [0.9, 0.8, 0.9, 0.8, 0.9, 0.8], b: [1.5; 6] }, 1.0).unwrap()
    }

    fn bump(amplitude: f64) -> SourceTerm {
        SourceTerm::GaussianBump { bond: 2, center: 0.5, width: 0.1, amplitude }
    }

    #[test]
    fn zero_forcing_gives_zero_densities() {
        let g = reference_graph();
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let s = march_volterra(&g, &SourcePotentialSet::default(), &grid, 1e-10).unwrap();
        assert!(s.values.iter().all(|v| v.iter().all(|x| *x == 0.0)));
    }

    #[test]
    fn densities_scale_linearly() {
        let g = reference_graph();
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let tables = kernel_tables(&g, &grid);
        let s1 = march_with_tables(&g, &SourcePotentialSet::new(&[bump(1.0)], &[]), &grid, 1e-10, &tables).unwrap();
        let s2 = march_with_tables(&g, &SourcePotentialSet::new(&[bump(2.0)], &[]), &grid, 1e-10, &tables).unwrap();
        for (a, b) in s1.values.iter().zip(&s2.values) {
            for (x, y) in a.iter().zip(b) {
                assert!((2.0 * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }
    }

    #[test]
    fn extending_the_horizon_leaves_earlier_steps_unchanged() {
        let g = reference_graph();
        let src = SourcePotentialSet::new(&[bump(1.0)], &[]);
        let short = march_volterra(&g, &src, &TimeGrid::new(0.5, 8).unwrap(), 1e-10).unwrap();
        let long = march_volterra(&g, &src, &TimeGrid::new(1.0, 16).unwrap(), 1e-10).unwrap();
        for (a, b) in short.values.iter().zip(&long.values) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-13 * (1.0 + y.abs()), "{x} {y}");
            }
        }
        assert!(long.values[16].iter().any(|v| *v != 0.0));
    }

    #[test]
    fn density_vector_round_trip() {
        let c: [f64; 15] = std::array::from_fn(|i| i as f64);
        assert_eq!(DensityVector::from_columns(&c).to_columns(), c);
        let d = DensityVector::from_columns(&c);
        assert_eq!(d.alpha, [5.0, 10.0]);
        assert_eq!(d.psi, [8.0, 9.0, 13.0, 14.0]);
    }

    #[test]
    fn singular_weights_are_rejected() {
        let mut w = VertexWeights::uniform(1.0, 1.0);
        let (a2, b2, a3) = (w.a(2), w.b(2), w.a(3));
        w.b[1] = -a2 * b2 / (a2 * b2 * a3 + a3 * (a2 + b2) / a2 + a2 * b2 / a3);
        let g = TreeGraph::new(w, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let err = march_volterra(&g, &SourcePotentialSet::new(&[bump(1.0)], &[]), &grid, 1e-10).unwrap_err();
        assert!(matches!(err, Error::WellPosedness { block: 1, .. }));
    }
}

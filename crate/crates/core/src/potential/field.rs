//! The solution on each bond as a sum of layer potentials and the source
//! potential.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{layer_primitive, node_primitives, product_weights};
use super::march::DensitySeries;
use super::source::SourcePotentialSet;
use crate::error::{Error, Result};
use crate::graph::TreeGraph;
use crate::special::ProfileKind;
use crate::wavefield::{uniform_nodes, BondEnd, BondSamples, EndTrace, WaveField, VERTEX_ENDS};

/// Where to sample a solution for output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputGrid {
    /// Spacing in `x`; must divide `L` and `window`.
    pub dx: f64,
    /// Unbounded bonds are sampled on `|x| ≤ window`.
    pub window: f64,
    /// Keep every `t_stride`-th time node.
    pub t_stride: usize,
}

impl OutputGrid {
    /// Sample positions on `bond`.
    pub fn nodes(&self, bond: usize, length: f64) -> Vec<f64> {
        let cells = |span: f64| ((span / self.dx).round() as usize).max(1);
        match bond {
            1 => uniform_nodes(-self.window, 0.0, cells(self.window)),
            2 | 3 => uniform_nodes(0.0, length, cells(length)),
            _ => uniform_nodes(0.0, self.window, cells(self.window)),
        }
    }
}

/// One layer potential seen from a bond: density column, profile and
/// offset `x - ξ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub col: usize,
    pub kind: ProfileKind,
    pub offset: f64,
    /// `+1` when the bond lies on the `x > ξ` side of the layer.
    pub side: f64,
}

/// Layers contributing to the field on `bond` at `x`.
pub fn layers(bond: usize, x: f64, length: f64) -> Vec<Layer> {
    use ProfileKind::{Phi, F};
    let l = |col, kind, offset, side| Layer { col, kind, offset, side };
    match bond {
        1 => vec![l(0, F, x, -1.0)],
        2 => vec![l(1, F, x, 1.0), l(5, F, x - length, -1.0), l(3, Phi, x, 1.0)],
        3 => vec![l(2, F, x, 1.0), l(10, F, x - length, -1.0), l(4, Phi, x, 1.0)],
        4 => vec![l(6, F, x, 1.0), l(8, Phi, x, 1.0)],
        5 => vec![l(7, F, x, 1.0), l(9, Phi, x, 1.0)],
        6 => vec![l(11, F, x, 1.0), l(13, Phi, x, 1.0)],
        7 => vec![l(12, F, x, 1.0), l(14, Phi, x, 1.0)],
        _ => Vec::new(),
    }
}

/// Limit of the second-derivative layer at its own anchor, as a multiple
/// of the density.
fn anchor_jump(layer: &Layer) -> f64 {
    match layer.kind {
        ProfileKind::Phi => 0.0,
        ProfileKind::F if layer.side > 0.0 => -2.0 * PI / 3.0,
        ProfileKind::F => PI / 3.0,
    }
}

/// Densities together with everything needed to evaluate the field.
#[derive(Debug, Clone)]
pub struct PotentialSolution {
    pub graph: TreeGraph,
    pub sources: SourcePotentialSet,
    pub densities: DensitySeries,
}

impl PotentialSolution {
    fn check(&self, bond: usize, x: f64, order: usize) -> Result<()> {
        let spec = self.graph.bond(bond)?;
        if !x.is_finite() || !spec.contains(x) {
            return Err(Error::Domain(format!("x = {x} is outside bond {bond}")));
        }
        if order > 2 {
            return Err(Error::Domain(format!("x-derivative order {order} is not supported")));
        }
        Ok(())
    }

    /// `∂_x^order u` on `bond` at `x` for the listed time nodes.
    pub fn node_values(&self, bond: usize, x: f64, order: usize, nodes: &[usize]) -> Result<Vec<f64>> {
        self.check(bond, x, order)?;
        let grid = &self.densities.grid;
        let n = grid.n_steps;
        if let Some(&m) = nodes.iter().find(|&&m| m > n) {
            return Err(Error::Domain(format!("time node {m} beyond the grid")));
        }
        let src = self.sources.series(bond, x, grid, order)?;
        let mut out: Vec<f64> = nodes.iter().map(|&m| src[m]).collect();
        let mut w = vec![0.0; n + 1];
        for layer in layers(bond, x, self.graph.length) {
            let dens = self.densities.column(layer.col);
            if layer.offset == 0.0 && order == 2 {
                let jump = anchor_jump(&layer);
                for (o, &m) in out.iter_mut().zip(nodes) {
                    *o += jump * dens[m];
                }
                continue;
            }
            let prim = node_primitives(grid, layer.offset, layer.kind, order);
            for (o, &m) in out.iter_mut().zip(nodes) {
                product_weights(&prim.j2, &prim.j1, m, grid.dt(), &mut w);
                *o += w[..=m].iter().zip(&dens).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        Ok(out)
    }

    /// `∂_x^order u` at every time node.
    pub fn node_series(&self, bond: usize, x: f64, order: usize) -> Result<Vec<f64>> {
        let nodes: Vec<usize> = (0..self.densities.grid.len()).collect();
        self.node_values(bond, x, order, &nodes)
    }

    /// Samples the solution on `out` together with exact vertex traces.
    pub fn wave_field(&self, out: &OutputGrid) -> Result<WaveField> {
        let grid = &self.densities.grid;
        let nodes: Vec<usize> = (0..grid.len()).step_by(out.t_stride.max(1)).collect();
        let mut nodes = nodes;
        if nodes.last() != Some(&grid.n_steps) {
            nodes.push(grid.n_steps);
        }
        let l = self.graph.length;
        let points: Vec<(usize, f64)> = (1..=7).flat_map(|b| out.nodes(b, l).into_iter().map(move |x| (b, x))).collect();
        let columns: Vec<Vec<f64>> =
            points.par_iter().map(|&(b, x)| self.node_values(b, x, 0, &nodes)).collect::<Result<_>>()?;
        let mut bonds = Vec::with_capacity(7);
        let mut k = 0;
        for b in 1..=7 {
            let x = out.nodes(b, l);
            let cols = &columns[k..k + x.len()];
            k += x.len();
            let values = (0..nodes.len()).map(|it| cols.iter().map(|c| c[it]).collect()).collect();
            bonds.push(BondSamples { bond: b, x, values });
        }
        let ends: Vec<(usize, BondEnd)> = VERTEX_ENDS.iter().flatten().copied().collect();
        let traces = ends
            .par_iter()
            .map(|&(b, end)| {
                let x = match (b, end) {
                    (2 | 3, BondEnd::Right) => l,
                    _ => 0.0,
                };
                let d = [0, 1, 2].map(|o| self.node_values(b, x, o, &nodes));
                let [d0, d1, d2] = d;
                Ok(EndTrace { bond: b, end, derivs: [d0?, d1?, d2?] })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(WaveField { times: nodes.iter().map(|&m| grid.node(m)).collect(), bonds, traces: Some(traces) })
    }

    /// `∂_x^order u` on `bond` at an arbitrary `(x, t)` with `0 ≤ t ≤ t_max`,
    /// treating the densities as piecewise linear in time.
    pub fn evaluate(&self, bond: usize, x: f64, t: f64, order: usize) -> Result<f64> {
        self.check(bond, x, order)?;
        let grid = &self.densities.grid;
        if !(0.0..=grid.t_max * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::Domain(format!("t = {t} outside [0, {}]", grid.t_max)));
        }
        let dt = grid.dt();
        let mut total = self.sources.value(bond, x, t, order)?;
        for layer in layers(bond, x, self.graph.length) {
            let dens = self.densities.column(layer.col);
            let linear = |s: f64| {
                let m = ((s / dt).floor() as usize).min(grid.n_steps - 1);
                let th = s / dt - m as f64;
                dens[m] * (1.0 - th) + dens[m + 1] * th
            };
            if layer.offset == 0.0 && order == 2 {
                total += anchor_jump(&layer) * linear(t);
                continue;
            }
            let q = |beta: f64, s: f64| layer_primitive(beta, s, layer.offset, layer.kind, order);
            let mut v = dens[0] * q(1.0, t);
            for m in 0..grid.n_steps {
                let tm = grid.node(m);
                if tm >= t {
                    break;
                }
                let slope = (dens[m + 1] - dens[m]) / dt;
                if slope != 0.0 {
                    v += slope * (q(2.0, t - tm) - q(2.0, (t - tm - dt).max(0.0)));
                }
            }
            total += v;
        }
        Ok(total)
    }
}

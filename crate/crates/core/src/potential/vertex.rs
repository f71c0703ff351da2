//! The fifteen vertex conditions as rows of the Volterra system.
//!
//! Unknown order: `(φ1, φ2, φ3, β2, β3 | α2, φ4, φ5, ψ4, ψ5 | α3, φ6, φ7, ψ6, ψ7)`.
//! Rows of each block: two value equalities, two slope equalities and the
//! curvature balance, in that order.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix5};

use super::kernel::KernelId;
use crate::error::{Error, Result};
use crate::graph::{block_bonds, VertexWeights};
use crate::special::profile::{profile, ProfileKind};

pub const N_UNKNOWNS: usize = 15;

/// Column of `φ_k`, `k = 1..=7`.
pub fn phi_index(k: usize) -> usize {
    [0, 1, 2, 6, 7, 11, 12][k - 1]
}

/// Column of `ψ_k`, `k = 4..=7`.
pub fn psi_index(k: usize) -> usize {
    [8, 9, 13, 14][k - 4]
}

/// Column of `α_k`, `k = 2, 3`.
pub fn alpha_index(k: usize) -> usize {
    [5, 10][k - 2]
}

/// Column of `β_k`, `k = 2, 3`.
pub fn beta_index(k: usize) -> usize {
    [3, 4][k - 2]
}

/// Human-readable names of the unknowns in column order.
pub const UNKNOWN_NAMES: [&str; N_UNKNOWNS] = [
    "phi1", "phi2", "phi3", "beta2", "beta3", "alpha2", "phi4", "phi5", "psi4", "psi5", "alpha3", "phi6", "phi7",
    "psi6", "psi7",
];

/// `f(0), f'(0), φ(0), φ'(0)`.
#[derive(Debug, Clone, Copy)]
pub struct ProfileTraces {
    pub f0: f64,
    pub f1: f64,
    pub p0: f64,
    pub p1: f64,
}

impl ProfileTraces {
    pub fn new() -> Self {
        Self {
            f0: profile(0.0, ProfileKind::F, 0),
            f1: profile(0.0, ProfileKind::F, 1),
            p0: profile(0.0, ProfileKind::Phi, 0),
            p1: profile(0.0, ProfileKind::Phi, 1),
        }
    }
}

impl Default for ProfileTraces {
    fn default() -> Self {
        Self::new()
    }
}

fn block_matrix(w: &VertexWeights, block: usize, corner: f64) -> Matrix5<f64> {
    let c = ProfileTraces::new();
    let (p, q, r) = block_bonds(block);
    let (wa, wb) = if block == 1 { (1.0, 1.0) } else { (w.a(p), w.b(p)) };
    let mut m = Matrix5::zeros();
    for (i, k) in [q, r].into_iter().enumerate() {
        m[(i, 0)] = wa * c.f0;
        m[(i, 1 + i)] = -w.a(k) * c.f0;
        m[(i, 3 + i)] = -w.a(k) * c.p0;
        m[(2 + i, 0)] = wb * c.f1;
        m[(2 + i, 1 + i)] = -w.b(k) * c.f1;
        m[(2 + i, 3 + i)] = -w.b(k) * c.p1;
    }
    m[(4, 0)] = corner;
    m[(4, 1)] = -2.0 * PI / (3.0 * w.a(q));
    m[(4, 2)] = -2.0 * PI / (3.0 * w.a(r));
    m
}

/// The 5×5 block used by the solver.
///
/// For the downstream vertices the curvature row carries the incoming bond's
/// jump `-π/(3 a_p)` in its first column, as the balance
/// `u_pxx / a_p = u_qxx / a_q + u_rxx / a_r` requires.
pub fn bond_matrix(w: &VertexWeights, block: usize) -> Matrix5<f64> {
    let corner = if block == 1 { -PI / 3.0 } else { -PI / (3.0 * w.a(block_bonds(block).0)) };
    block_matrix(w, block, corner)
}

/// The 5×5 block with `-π/3` in the curvature row for every vertex.
pub fn displayed_bond_matrix(w: &VertexWeights, block: usize) -> Matrix5<f64> {
    block_matrix(w, block, -PI / 3.0)
}

/// The block-diagonal 15×15 matrix, gated on the block determinants.
pub fn assemble_vertex_matrix(w: &VertexWeights, tolerance: f64) -> Result<DMatrix<f64>> {
    let mut a = DMatrix::zeros(N_UNKNOWNS, N_UNKNOWNS);
    for block in 1..=3 {
        let m = bond_matrix(w, block);
        let det = m.determinant();
        if !(det.abs() >= tolerance) {
            return Err(Error::WellPosedness { block, det, tolerance });
        }
        let o = 5 * (block - 1);
        a.view_mut((o, o), (5, 5)).copy_from(&m);
    }
    Ok(a)
}

/// One Volterra term `coef · (K * Φ_col)` in row `row`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub row: usize,
    pub col: usize,
    pub kernel: KernelId,
    pub coef: f64,
}

/// All history couplings. Only the downstream blocks see the upstream
/// densities and vice versa through `α`, so the couplings are off the
/// block diagonal except for the `φ_2`/`β_2` terms of blocks 2 and 3.
pub fn couplings(w: &VertexWeights) -> Vec<Coupling> {
    let mut out = Vec::new();
    for (i, k) in [2usize, 3].into_iter().enumerate() {
        let al = alpha_index(k);
        out.push(Coupling { row: i, col: al, kernel: KernelId::K1, coef: -w.a(k) });
        out.push(Coupling { row: 2 + i, col: al, kernel: KernelId::K2, coef: -w.b(k) });
        out.push(Coupling { row: 4, col: al, kernel: KernelId::K3, coef: 1.0 / w.a(k) });
    }
    for block in 2..=3 {
        let (p, _, _) = block_bonds(block);
        let base = 5 * (block - 1);
        let (ph, be) = (phi_index(p), beta_index(p));
        for i in 0..2 {
            out.push(Coupling { row: base + i, col: ph, kernel: KernelId::K4, coef: w.a(p) });
            out.push(Coupling { row: base + i, col: be, kernel: KernelId::K4V, coef: w.a(p) });
            out.push(Coupling { row: base + 2 + i, col: ph, kernel: KernelId::K5, coef: w.b(p) });
            out.push(Coupling { row: base + 2 + i, col: be, kernel: KernelId::K5V, coef: w.b(p) });
        }
        out.push(Coupling { row: base + 4, col: ph, kernel: KernelId::K6, coef: -1.0 / w.a(p) });
        out.push(Coupling { row: base + 4, col: be, kernel: KernelId::K6V, coef: -1.0 / w.a(p) });
    }
    out
}

//! The fixed seven-bond tree, its vertex weights and the well-posedness gate.
//!
//! ```text
//!                      B4
//!                    /
//!            B2 -- V1
//!          /         \ B5
//! B1 -- V0
//!          \         / B6
//!            B3 -- V2
//!                    \ B7
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::vertex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BondKind {
    IncomingHalfLine,
    FiniteSegment,
    OutgoingHalfLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BondSpec {
    pub id: usize,
    pub kind: BondKind,
    /// Closed coordinate range; infinite ends are `±∞`.
    pub range: (f64, f64),
}

impl BondSpec {
    pub fn kind_for(id: usize) -> Option<BondKind> {
        match id {
            1 => Some(BondKind::IncomingHalfLine),
            2 | 3 => Some(BondKind::FiniteSegment),
            4..=7 => Some(BondKind::OutgoingHalfLine),
            _ => None,
        }
    }

    pub fn new(id: usize, length: f64) -> Result<Self> {
        let kind = Self::kind_for(id).ok_or_else(|| Error::InvalidGraph(format!("bond id {id} outside 1..=7")))?;
        let range = match kind {
            BondKind::IncomingHalfLine => (f64::NEG_INFINITY, 0.0),
            BondKind::FiniteSegment => (0.0, length),
            BondKind::OutgoingHalfLine => (0.0, f64::INFINITY),
        };
        Ok(Self { id, kind, range })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.range.0 && x <= self.range.1
    }
}

/// Weights `a_k`, `b_k` for `k = 2..=7`, stored at index `k - 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VertexWeights {
    pub a: [f64; 6],
    pub b: [f64; 6],
}

impl VertexWeights {
    pub fn uniform(a: f64, b: f64) -> Self {
        Self { a: [a; 6], b: [b; 6] }
    }

    /// `a_k` for `k` in `2..=7`.
    #[inline]
    pub fn a(&self, k: usize) -> f64 {
        self.a[k - 2]
    }

    /// `b_k` for `k` in `2..=7`.
    #[inline]
    pub fn b(&self, k: usize) -> f64 {
        self.b[k - 2]
    }

    /// Names of weights that are zero or not finite.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for k in 2..=7 {
            for (name, v) in [("a", self.a(k)), ("b", self.b(k))] {
                if v == 0.0 || !v.is_finite() {
                    out.push(format!("{name}_{k} = {v}: weights must be finite and nonzero"));
                }
            }
        }
        out
    }

    /// The subtree swap `(2, 4, 5) <-> (3, 6, 7)`.
    pub fn mirrored(&self) -> Self {
        let perm = [1, 0, 4, 5, 2, 3];
        let mut out = *self;
        for (i, &p) in perm.iter().enumerate() {
            out.a[i] = self.a[p];
            out.b[i] = self.b[p];
        }
        out
    }
}

/// Bonds `(parent, first child, second child)` meeting at vertex `V{block-1}`.
pub fn block_bonds(block: usize) -> (usize, usize, usize) {
    match block {
        1 => (1, 2, 3),
        2 => (2, 4, 5),
        3 => (3, 6, 7),
        _ => panic!("block index must be 1, 2 or 3, got {block}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeGraph {
    pub bonds: Vec<BondSpec>,
    pub weights: VertexWeights,
    pub length: f64,
}

impl TreeGraph {
    pub fn new(weights: VertexWeights, length: f64) -> Result<Self> {
        let mut problems = weights.violations();
        if !(length > 0.0 && length.is_finite()) {
            problems.push(format!("L = {length}: finite bond length must be positive"));
        }
        if !problems.is_empty() {
            return Err(Error::InvalidGraph(problems.join("; ")));
        }
        let bonds = (1..=7).map(|id| BondSpec::new(id, length)).collect::<Result<Vec<_>>>()?;
        Ok(Self { bonds, weights, length })
    }

    pub fn bond(&self, id: usize) -> Result<&BondSpec> {
        self.bonds
            .get(id.wrapping_sub(1))
            .ok_or_else(|| Error::InvalidGraph(format!("bond id {id} outside 1..=7")))
    }

    /// Checks the structural invariants of a possibly hand-built graph.
    pub fn check_structure(&self) -> Result<()> {
        let mut problems = self.weights.violations();
        if !(self.length > 0.0 && self.length.is_finite()) {
            problems.push(format!("L = {}: finite bond length must be positive", self.length));
        }
        if self.bonds.len() != 7 {
            problems.push(format!("expected 7 bonds, found {}", self.bonds.len()));
        }
        for (i, b) in self.bonds.iter().enumerate() {
            match BondSpec::new(i + 1, self.length) {
                Ok(expected) if expected == *b => {}
                _ => problems.push(format!("bond at position {} is inconsistent with the fixed topology", i + 1)),
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidGraph(problems.join("; ")))
        }
    }
}

/// Reference closed-form determinant of each vertex block.
///
/// For blocks 2 and 3 this carries the parent weights in mixed products and
/// matches neither the assembled block nor the solvability value in general.
pub fn det_bond_matrix_closed_form(w: &VertexWeights, block: usize) -> f64 {
    let c = -PI.powi(3) / 27.0;
    let (p, q, r) = block_bonds(block);
    let (aq, bq, ar, br) = (w.a(q), w.b(q), w.a(r), w.b(r));
    if block == 1 {
        c * (aq * bq * ar * br + ar * br * (aq + bq) / aq + aq * bq * (ar + br) / ar)
    } else {
        let (ap, bp) = (w.a(p), w.b(p));
        c * (aq * bq * ar * br + ar * br * (aq * bp + ap * bq) / aq + aq * bq * (ar * bp + ap * br) / ar)
    }
}

/// Left-hand side of the solvability condition for index `i` (1, 2 or 3).
pub fn solvability_value(w: &VertexWeights, i: usize) -> f64 {
    assert!((1..=3).contains(&i), "condition index must be 1, 2 or 3, got {i}");
    let (a0, b0, a1, b1) = (w.a(2 * i), w.b(2 * i), w.a(2 * i + 1), w.b(2 * i + 1));
    a0 * b0 * a1 * b1 + a1 * b1 * (a0 + b0) / a0 + a0 * b0 * (a1 + b1) / a1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellPosednessReport {
    /// [`det_bond_matrix_closed_form`] per block.
    pub det_closed: [f64; 3],
    /// LU determinants of the matrices assembled by the solver.
    pub det_numeric: [f64; 3],
    /// LU determinants with `-π/3` in every curvature row, see
    /// [`crate::potential::vertex::displayed_bond_matrix`].
    pub det_displayed: [f64; 3],
    /// `|det_closed - det_numeric| / |det_numeric|`.
    pub closed_form_deviation: [f64; 3],
    pub solvability_value: [f64; 3],
    pub solvable: [bool; 3],
    /// `1/b_{2i}^2 + 1/b_{2i+1}^2 <= 1`.
    pub uniqueness_condition: [bool; 3],
    /// Per-vertex sign of the boundary flux in the energy balance: at `V0`
    /// the test above, at `V1`, `V2` the parent slope weight enters as
    /// `b_p^2 (1/b_q^2 + 1/b_r^2) <= 1`.
    pub vertex_dissipative: [bool; 3],
    pub physical_regime: bool,
    pub tolerance: f64,
}

impl WellPosednessReport {
    /// First block whose assembled determinant is below tolerance.
    pub fn failing_block(&self) -> Option<usize> {
        (0..3).find(|&i| !(self.det_numeric[i].abs() >= self.tolerance)).map(|i| i + 1)
    }

    pub fn gate(&self) -> Result<()> {
        match self.failing_block() {
            Some(block) => Err(Error::WellPosedness {
                block,
                det: self.det_numeric[block - 1],
                tolerance: self.tolerance,
            }),
            None => Ok(()),
        }
    }

    pub fn energy_condition_holds(&self) -> bool {
        self.uniqueness_condition.iter().all(|&c| c)
    }
}

pub const DEFAULT_DET_TOLERANCE: f64 = 1e-10;

pub fn validate_graph(graph: &TreeGraph, tolerance: f64) -> Result<WellPosednessReport> {
    graph.check_structure()?;
    let w = &graph.weights;
    let mut rep = WellPosednessReport {
        det_closed: [0.0; 3],
        det_numeric: [0.0; 3],
        det_displayed: [0.0; 3],
        closed_form_deviation: [0.0; 3],
        solvability_value: [0.0; 3],
        solvable: [false; 3],
        uniqueness_condition: [false; 3],
        vertex_dissipative: [false; 3],
        physical_regime: false,
        tolerance,
    };
    for i in 1..=3 {
        let k = i - 1;
        rep.det_closed[k] = det_bond_matrix_closed_form(w, i);
        rep.det_numeric[k] = vertex::bond_matrix(w, i).determinant();
        rep.det_displayed[k] = vertex::displayed_bond_matrix(w, i).determinant();
        rep.closed_form_deviation[k] =
            (rep.det_closed[k] - rep.det_numeric[k]).abs() / rep.det_numeric[k].abs().max(f64::MIN_POSITIVE);
        rep.solvability_value[k] = solvability_value(w, i);
        rep.solvable[k] = rep.solvability_value[k].abs() > tolerance;
        let (p, q, r) = block_bonds(i);
        let s = 1.0 / w.b(q).powi(2) + 1.0 / w.b(r).powi(2);
        rep.uniqueness_condition[k] = s <= 1.0;
        let parent = if p == 1 { 1.0 } else { w.b(p).powi(2) };
        rep.vertex_dissipative[k] = parent * s <= 1.0;
    }
    rep.physical_regime = 1.0 > w.a(2) && w.a(2) > w.a(3) && w.a(3) > 0.0 && 1.0 > w.b(2) && w.b(2) > w.b(3) && w.b(3) > 0.0;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pi3() -> f64 {
        PI.powi(3) / 27.0
    }

    #[test]
    fn closed_form_examples() {
        let ones = VertexWeights::uniform(1.0, 1.0);
        assert!((det_bond_matrix_closed_form(&ones, 1) + 5.0 * pi3()).abs() < 1e-12);
        assert!((det_bond_matrix_closed_form(&ones, 2) + 5.0 * pi3()).abs() < 1e-12);
        let anti = VertexWeights::uniform(1.0, -1.0);
        assert!((det_bond_matrix_closed_form(&anti, 1) + pi3()).abs() < 1e-12);
    }

    #[test]
    fn solvability_examples() {
        assert_eq!(solvability_value(&VertexWeights::uniform(1.0, 1.0), 1), 5.0);
        assert_eq!(solvability_value(&VertexWeights::uniform(1.0, -1.0), 1), 1.0);
        let mut w = VertexWeights::uniform(1.0, 1.0);
        w.a[0] = 2.0;
        assert_eq!(solvability_value(&w, 1), 7.5);
    }

    #[test]
    fn uniqueness_and_regime_flags() {
        let mut w = VertexWeights::uniform(0.5, 2f64.sqrt());
        let g = TreeGraph::new(w, 1.0).unwrap();
        assert!(validate_graph(&g, 1e-10).unwrap().uniqueness_condition[0]);
        w.b = [1.0; 6];
        let g = TreeGraph::new(w, 1.0).unwrap();
        assert!(!validate_graph(&g, 1e-10).unwrap().uniqueness_condition[0]);
        let w = VertexWeights { a: [0.8, 0.5, 0.4, 0.3, 0.2, 0.1], b: [0.9, 0.4, 0.3, 0.2, 0.15, 0.1] };
        let g = TreeGraph::new(w, 1.0).unwrap();
        assert!(validate_graph(&g, 1e-10).unwrap().physical_regime);
    }

    #[test]
    fn rejects_zero_weight_and_length() {
        let mut w = VertexWeights::uniform(1.0, 1.0);
        w.b[0] = 0.0;
        let err = TreeGraph::new(w, 1.0).unwrap_err().to_string();
        assert!(err.contains("b_2"), "{err}");
        assert!(TreeGraph::new(VertexWeights::uniform(1.0, 1.0), -1.0).is_err());
    }

    #[test]
    fn tampered_topology_is_rejected() {
        let mut g = TreeGraph::new(VertexWeights::uniform(1.0, 1.0), 1.0).unwrap();
        g.bonds[3].range = (0.0, 2.0);
        assert!(matches!(validate_graph(&g, 1e-10), Err(Error::InvalidGraph(_))));
    }

    #[test]
    fn gate_reports_failing_block() {
        let mut w = VertexWeights::uniform(1.0, 1.0);
        // zero of the first block determinant, linear in b_3
        let (a2, b2, a3) = (w.a(2), w.b(2), w.a(3));
        w.b[1] = -a2 * b2 / (a2 * b2 * a3 + a3 * (a2 + b2) / a2 + a2 * b2 / a3);
        let g = TreeGraph::new(w, 1.0).unwrap();
        let rep = validate_graph(&g, 1e-10).unwrap();
        assert_eq!(rep.failing_block(), Some(1));
        assert!(matches!(rep.gate(), Err(Error::WellPosedness { block: 1, .. })));
    }

    fn weight() -> impl Strategy<Value = f64> {
        prop_oneof![-2.0f64..-0.05, 0.05f64..2.0]
    }

    proptest! {
        #[test]
        fn closed_form_matches_solvability_for_first_block(a in proptest::array::uniform6(weight()), b in proptest::array::uniform6(weight())) {
            let w = VertexWeights { a, b };
            let lhs = det_bond_matrix_closed_form(&w, 1);
            let rhs = -pi3() * solvability_value(&w, 1);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn equal_weights_give_equal_conditions(c in weight()) {
            let w = VertexWeights::uniform(c, c);
            let v1 = solvability_value(&w, 1);
            prop_assert_eq!(v1, solvability_value(&w, 2));
            prop_assert_eq!(v1, solvability_value(&w, 3));
        }

        #[test]
        fn validation_is_deterministic(a in proptest::array::uniform6(weight()), b in proptest::array::uniform6(weight())) {
            let g = TreeGraph::new(VertexWeights { a, b }, 1.0).unwrap();
            let r1 = validate_graph(&g, 1e-10).unwrap();
            let r2 = validate_graph(&g, 1e-10).unwrap();
            prop_assert_eq!(r1, r2);
        }
    }
}

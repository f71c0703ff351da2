//! Space-time samples of a solution on every bond.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples on one bond: `values[it][ix]` at `x[ix]`, `x` ascending and
/// uniformly spaced.
#[derive(Debug, Clone, PartialEq)]
pub struct BondSamples {
    pub bond: usize,
    pub x: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl BondSamples {
    pub fn dx(&self) -> f64 {
        if self.x.len() < 2 {
            return 0.0;
        }
        self.x[1] - self.x[0]
    }

    /// Linear interpolation in `x` at time index `it`; `None` off the grid.
    pub fn interpolate(&self, x: f64, it: usize) -> Option<f64> {
        let (first, last) = (*self.x.first()?, *self.x.last()?);
        let tol = 1e-12 * (1.0 + first.abs().max(last.abs()));
        if x < first - tol || x > last + tol {
            return None;
        }
        let row = &self.values[it];
        if self.x.len() == 1 {
            return Some(row[0]);
        }
        let s = ((x - first) / self.dx()).clamp(0.0, (self.x.len() - 1) as f64);
        let j = (s.floor() as usize).min(self.x.len() - 2);
        let th = s - j as f64;
        Some(row[j] * (1.0 - th) + row[j + 1] * th)
    }
}

/// Which end of a bond touches a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BondEnd {
    Left,
    Right,
}

/// `u`, `u_x`, `u_xx` at a bond end for every time sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EndTrace {
    pub bond: usize,
    pub end: BondEnd,
    pub derivs: [Vec<f64>; 3],
}

/// Bond ends meeting at each of the three vertices: incoming first.
pub const VERTEX_ENDS: [[(usize, BondEnd); 3]; 3] = [
    [(1, BondEnd::Right), (2, BondEnd::Left), (3, BondEnd::Left)],
    [(2, BondEnd::Right), (4, BondEnd::Left), (5, BondEnd::Left)],
    [(3, BondEnd::Right), (6, BondEnd::Left), (7, BondEnd::Left)],
];

/// A solution sampled on a common time grid.
///
/// `traces`, when present, holds vertex values and derivatives computed by
/// the solver itself rather than by differencing the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub times: Vec<f64>,
    pub bonds: Vec<BondSamples>,
    pub traces: Option<Vec<EndTrace>>,
}

impl WaveField {
    pub fn bond(&self, id: usize) -> Result<&BondSamples> {
        self.bonds
            .iter()
            .find(|b| b.bond == id)
            .ok_or_else(|| Error::Domain(format!("field has no samples on bond {id}")))
    }

    /// Bilinear interpolation at `(x, t)`; `None` outside the sampled region.
    pub fn sample(&self, bond: usize, x: f64, t: f64) -> Option<f64> {
        let b = self.bond(bond).ok()?;
        let (t0, t1) = (*self.times.first()?, *self.times.last()?);
        let tol = 1e-12 * (1.0 + t1.abs());
        if t < t0 - tol || t > t1 + tol {
            return None;
        }
        let k = match self.times.partition_point(|&s| s <= t) {
            0 => 0,
            p => (p - 1).min(self.times.len().saturating_sub(2)),
        };
        if self.times.len() == 1 {
            return b.interpolate(x, 0);
        }
        let th = ((t - self.times[k]) / (self.times[k + 1] - self.times[k])).clamp(0.0, 1.0);
        Some(b.interpolate(x, k)? * (1.0 - th) + b.interpolate(x, k + 1)? * th)
    }

    /// Keeps every `x_stride`-th sample with `|x| ≤ window` and every
    /// `t_stride`-th time, always including both ends of each range.
    pub fn restrict(&self, window: f64, x_stride: usize, t_stride: usize) -> WaveField {
        let pick = |len: usize, stride: usize| -> Vec<usize> {
            let stride = stride.max(1);
            let mut v: Vec<usize> = (0..len).step_by(stride).collect();
            if len > 0 && v.last() != Some(&(len - 1)) {
                v.push(len - 1);
            }
            v
        };
        let times_idx = pick(self.times.len(), t_stride);
        let bonds = self
            .bonds
            .iter()
            .map(|b| {
                let inside: Vec<usize> = (0..b.x.len()).filter(|&j| b.x[j].abs() <= window + 1e-12).collect();
                let keep: Vec<usize> = pick(inside.len(), x_stride).into_iter().map(|j| inside[j]).collect();
                BondSamples {
                    bond: b.bond,
                    x: keep.iter().map(|&j| b.x[j]).collect(),
                    values: times_idx.iter().map(|&it| keep.iter().map(|&j| b.values[it][j]).collect()).collect(),
                }
            })
            .collect();
        let traces = self.traces.as_ref().map(|tr| {
            tr.iter()
                .map(|e| EndTrace {
                    bond: e.bond,
                    end: e.end,
                    derivs: std::array::from_fn(|o| times_idx.iter().map(|&it| e.derivs[o][it]).collect()),
                })
                .collect()
        });
        WaveField { times: times_idx.iter().map(|&it| self.times[it]).collect(), bonds, traces }
    }

    /// Multiplies every sample and trace by `c`.
    pub fn scaled(&self, c: f64) -> WaveField {
        let mut out = self.clone();
        for b in &mut out.bonds {
            b.values.iter_mut().flatten().for_each(|v| *v *= c);
        }
        if let Some(tr) = &mut out.traces {
            for e in tr {
                e.derivs.iter_mut().flatten().for_each(|v| *v *= c);
            }
        }
        out
    }
}

/// Uniform nodes from `lo` to `hi` with `cells` cells.
pub fn uniform_nodes(lo: f64, hi: f64, cells: usize) -> Vec<f64> {
    let h = (hi - lo) / cells as f64;
    (0..=cells).map(|j| if j == cells { hi } else { lo + h * j as f64 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_field() -> WaveField {
        let x = uniform_nodes(0.0, 1.0, 4);
        let times = vec![0.0, 0.5, 1.0];
        let values = times.iter().map(|t| x.iter().map(|x| 2.0 * x + t).collect()).collect();
        WaveField { times, bonds: vec![BondSamples { bond: 2, x, values }], traces: None }
    }

    #[test]
    fn bilinear_sampling_is_exact_for_linear_data() {
        let f = linear_field();
        let v = f.sample(2, 0.3, 0.7).unwrap();
        assert!((v - 1.3).abs() < 1e-14);
        assert!(f.sample(2, 1.2, 0.5).is_none());
        assert!(f.sample(2, 0.5, 1.5).is_none());
        assert!(f.sample(4, 0.5, 0.5).is_none());
    }

    #[test]
    fn restriction_keeps_ends() {
        let f = linear_field().restrict(0.6, 2, 2);
        assert_eq!(f.times, vec![0.0, 1.0]);
        assert_eq!(f.bonds[0].x, vec![0.0, 0.5]);
        assert_eq!(f.bonds[0].values[1], vec![1.0, 2.0]);
    }

    #[test]
    fn scaling_scales_every_sample() {
        let f = linear_field();
        let g = f.scaled(-3.0);
        assert_eq!(g.bonds[0].values[2][4], -3.0 * f.bonds[0].values[2][4]);
    }
}

//! Banded LU factorisation with partial pivoting.

use crate::error::{Error, Result};

/// An `n × n` matrix with `kl` sub- and `ku` super-diagonals, stored with
/// room for the `kl` extra super-diagonals that row exchanges can create.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn slot(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.kl >= r && c <= r + self.kl + self.ku);
        r * self.width + (c + self.kl - r)
    }

    /// # Panics
    /// If `(r, c)` lies outside the declared band.
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        assert!(c + self.kl >= r && c <= r + self.ku, "entry ({r}, {c}) outside the band");
        let s = self.slot(r, c);
        self.data[s] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if c + self.kl < r || c > r + self.kl + self.ku {
            return 0.0;
        }
        self.data[self.slot(r, c)]
    }

    /// Factorises in place.
    pub fn factor(mut self) -> Result<BandLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut piv = vec![0usize; n];
        for i in 0..n {
            let last = (i + kl).min(n - 1);
            let mut p = i;
            let mut best = self.get(i, i).abs();
            for r in i + 1..=last {
                let v = self.get(r, i).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= 1e-14 * scale || !best.is_finite() {
                return Err(Error::Numerical(format!("banded factorisation: no usable pivot in column {i}")));
            }
            piv[i] = p;
            let cmax = (i + kl + ku).min(n - 1);
            if p != i {
                for c in i..=cmax {
                    let (a, b) = (self.slot(i, c), self.slot(p, c));
                    self.data.swap(a, b);
                }
            }
            let d = self.data[self.slot(i, i)];
            for r in i + 1..=last {
                let s = self.slot(r, i);
                let l = self.data[s] / d;
                self.data[s] = l;
                if l == 0.0 {
                    continue;
                }
                for c in i + 1..=cmax {
                    let u = self.data[self.slot(i, c)];
                    let t = self.slot(r, c);
                    self.data[t] -= l * u;
                }
            }
        }
        Ok(BandLu { m: self, piv })
    }
}

/// Factors of a [`BandMatrix`].
#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    /// Overwrites `b` with the solution.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let m = &self.m;
        let (n, kl, ku) = (m.n, m.kl, m.ku);
        for i in 0..n {
            b.swap(i, self.piv[i]);
            let bi = b[i];
            if bi != 0.0 {
                for r in i + 1..=(i + kl).min(n - 1) {
                    b[r] -= m.data[m.slot(r, i)] * bi;
                }
            }
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for c in i + 1..=(i + kl + ku).min(n - 1) {
                acc -= m.data[m.slot(i, c)] * b[c];
            }
            b[i] = acc / m.data[m.slot(i, i)];
        }
    }
}

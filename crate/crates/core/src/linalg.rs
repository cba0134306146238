//! Banded LU factorization with partial pivoting, plus a solver front-end
//! that picks between dense and banded storage.
//!
//! Finite-element models and their harmonic-balance Jacobians are banded when
//! unknowns are numbered node-major; exploiting that keeps full-order solves
//! tractable without pulling in an external sparse solver.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// General band matrix in LAPACK-style storage with room for pivoting fill-in.
///
/// `kl` subdiagonals and `ku` superdiagonals are populated by assembly; an
/// extra `kl` superdiagonals hold fill-in during factorization. Entry (i, j)
/// lives at row `kl + ku + i - j` of column `j` in `data` (column-major,
/// `2*kl + ku + 1` rows per column).
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    stride: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let stride = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            stride,
            data: vec![0.0; stride * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn reset(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Storable iff i <= j + kl and j <= i + kl + ku (the ku..kl+ku
    /// superdiagonal range is reserved for factorization fill-in).
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(
            i <= j + self.kl && j <= i + self.kl + self.ku,
            "entry ({i},{j}) outside band storage"
        );
        j * self.stride + (self.ku + self.kl + i - j)
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    /// In-place LU with partial pivoting (the gbtrf algorithm).
    pub fn factorize(mut self) -> Result<BandLu> {
        let n = self.n;
        let kl = self.kl;
        let kv = self.kl + self.ku; // upper bandwidth of U after pivoting
        let mut pivots = vec![0usize; n];
        for j in 0..n {
            let last = (j + kl).min(n - 1);
            let mut p = j;
            let mut pmax = self.get(j, j).abs();
            for i in (j + 1)..=last {
                let v = self.get(i, j).abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            if pmax == 0.0 {
                return Err(Error::Singular(format!(
                    "banded LU: zero pivot at column {j}"
                )));
            }
            pivots[j] = p;
            let jend = (j + kv).min(n - 1);
            if p != j {
                for c in j..=jend {
                    let a = self.get(j, c);
                    let b = self.get(p, c);
                    self.set(j, c, b);
                    self.set(p, c, a);
                }
            }
            let diag = self.get(j, j);
            for i in (j + 1)..=last {
                let m = self.get(i, j) / diag;
                self.set(i, j, m);
                if m != 0.0 {
                    for c in (j + 1)..=jend {
                        let u = self.get(j, c);
                        if u != 0.0 {
                            let k = self.idx(i, c);
                            self.data[k] -= m * u;
                        }
                    }
                }
            }
        }
        Ok(BandLu { mat: self, pivots })
    }
}

/// Factorized band matrix ready for repeated solves.
#[derive(Debug, Clone)]
pub struct BandLu {
    mat: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn solve_in_place(&self, b: &mut DVector<f64>) {
        let n = self.mat.n;
        let kl = self.mat.kl;
        let kv = self.mat.kl + self.mat.ku;
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                b.swap_rows(j, p);
            }
            let bj = b[j];
            if bj != 0.0 {
                let last = (j + kl).min(n - 1);
                for i in (j + 1)..=last {
                    b[i] -= self.mat.get(i, j) * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let first = j.saturating_sub(kv);
            let x = b[j] / self.mat.get(j, j);
            b[j] = x;
            if x != 0.0 {
                for i in first..j {
                    b[i] -= self.mat.get(i, j) * x;
                }
            }
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(&mut x);
        x
    }
}

/// Assembly target that is either dense or banded; solvers write entries
/// through one interface and factorize whichever representation was chosen.
#[derive(Debug, Clone)]
pub enum SystemMatrix {
    Dense(DMatrix<f64>),
    Banded(BandMatrix),
}

impl SystemMatrix {
    /// A banded layout pays off once the band is well under the dimension.
    pub fn new(n: usize, half_bandwidth: usize) -> Self {
        if n > 4 * (2 * half_bandwidth + 1) && n > 64 {
            SystemMatrix::Banded(BandMatrix::zeros(n, half_bandwidth, half_bandwidth))
        } else {
            SystemMatrix::Dense(DMatrix::zeros(n, n))
        }
    }

    pub fn reset(&mut self) {
        match self {
            SystemMatrix::Dense(m) => m.fill(0.0),
            SystemMatrix::Banded(m) => m.reset(),
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        match self {
            SystemMatrix::Dense(m) => m[(i, j)] += v,
            SystemMatrix::Banded(m) => m.add(i, j, v),
        }
    }

    pub fn factorize(self) -> Result<SystemLu> {
        match self {
            SystemMatrix::Dense(m) => {
                let lu = m.lu();
                if !lu.is_invertible() {
                    return Err(Error::Singular("dense LU: matrix not invertible".into()));
                }
                Ok(SystemLu::Dense(Box::new(lu)))
            }
            SystemMatrix::Banded(m) => Ok(SystemLu::Banded(Box::new(m.factorize()?))),
        }
    }
}

pub enum SystemLu {
    Dense(Box<nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>),
    Banded(Box<BandLu>),
}

impl SystemLu {
    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            SystemLu::Dense(lu) => lu
                .solve(b)
                .ok_or_else(|| Error::Singular("dense LU solve failed".into())),
            SystemLu::Banded(lu) => Ok(lu.solve(b)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band_and_dense(
        n: usize,
        kl: usize,
        ku: usize,
        fill: impl Fn(usize, usize) -> f64,
    ) -> (BandMatrix, DMatrix<f64>) {
        let mut band = BandMatrix::zeros(n, kl, ku);
        let mut dense = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i <= j + kl && j <= i + ku {
                    let v = fill(i, j);
                    if v != 0.0 {
                        band.add(i, j, v);
                        dense[(i, j)] += v;
                    }
                }
            }
        }
        (band, dense)
    }

    #[test]
    fn banded_lu_matches_dense() {
        for (n, kl, ku) in [
            (1usize, 0usize, 0usize),
            (5, 1, 1),
            (12, 2, 3),
            (40, 4, 2),
            (60, 5, 5),
        ] {
            let (band, dense) = band_and_dense(n, kl, ku, |i, j| {
                let base = ((i * 7 + j * 13 + 3) % 17) as f64 - 8.0;
                if i == j {
                    base + 25.0
                } else {
                    base * 0.3
                }
            });
            let b = DVector::from_fn(n, |i, _| (i as f64 * 0.7).sin() + 0.2);
            let x_dense = dense.clone().lu().solve(&b).unwrap();
            let lu = band.factorize().unwrap();
            let x_band = lu.solve(&b);
            let err = (&x_dense - &x_band).amax();
            assert!(err < 1e-10 * x_dense.amax().max(1.0), "err {err} at n={n}");
        }
    }

    #[test]
    fn banded_lu_needs_pivoting() {
        // Zero on the diagonal forces a row swap.
        let mut band = BandMatrix::zeros(3, 1, 1);
        band.add(0, 1, 2.0);
        band.add(1, 0, 1.0);
        band.add(1, 1, 1.0);
        band.add(1, 2, 1.0);
        band.add(2, 1, 3.0);
        band.add(2, 2, 1.0);
        let mut dense = DMatrix::zeros(3, 3);
        dense[(0, 1)] = 2.0;
        dense[(1, 0)] = 1.0;
        dense[(1, 1)] = 1.0;
        dense[(1, 2)] = 1.0;
        dense[(2, 1)] = 3.0;
        dense[(2, 2)] = 1.0;
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x_ref = dense.lu().solve(&b).unwrap();
        let x = band.factorize().unwrap().solve(&b);
        assert!((x - x_ref).amax() < 1e-12);
    }

    #[test]
    fn singular_band_is_reported() {
        let band = BandMatrix::zeros(4, 1, 1);
        assert!(matches!(band.factorize(), Err(Error::Singular(_))));
    }
}

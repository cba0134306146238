//! Generalized eigenproblem `K φ = ω² M φ` and mass-proportional damping.

use crate::error::{Error, Result};
use crate::model::{FullOrderModel, SparseMatrixSym};
use nalgebra::{DMatrix, DVector};

/// One vibration mode: angular frequency and mass-normalized shape
/// (`φᵀ M φ = 1`, largest-magnitude component positive).
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub omega: f64,
    pub shape: DVector<f64>,
}

impl EigenPair {
    pub fn frequency_hz(&self) -> f64 {
        self.omega / (2.0 * std::f64::consts::PI)
    }
}

/// The `k` lowest modes, ascending in frequency.
///
/// Dense symmetric-definite reduction via Cholesky of M: robust at the
/// model sizes this toolkit targets (n up to a few thousand).
pub fn solve_eigs(model: &FullOrderModel, k: usize) -> Result<Vec<EigenPair>> {
    let n = model.n();
    if k == 0 || k > n {
        return Err(Error::Config(format!(
            "requested {k} modes from an {n}-dof model"
        )));
    }
    let m_dense = model.m.to_dense();
    let k_dense = model.k.to_dense();
    let chol = nalgebra::Cholesky::new(m_dense.clone())
        .ok_or_else(|| Error::NotSpd("mass matrix in eigensolve".into()))?;
    let l = chol.l();
    // A = L⁻¹ K L⁻ᵀ, symmetrized against roundoff.
    let t1 = l
        .solve_lower_triangular(&k_dense)
        .ok_or_else(|| Error::Singular("triangular solve in eigensolve".into()))?;
    let t2 = l
        .solve_lower_triangular(&t1.transpose())
        .ok_or_else(|| Error::Singular("triangular solve in eigensolve".into()))?;
    let a = (&t2 + t2.transpose()) * 0.5;
    let eig = a.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let lt = l.transpose();
    let mut pairs = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let lambda = eig.eigenvalues[idx].max(0.0);
        let y = eig.eigenvectors.column(idx).into_owned();
        let mut phi = lt
            .solve_upper_triangular(&y)
            .ok_or_else(|| Error::Singular("back substitution in eigensolve".into()))?;
        // Sign convention: largest-magnitude component positive.
        let mut imax = 0;
        for i in 0..n {
            if phi[i].abs() > phi[imax].abs() {
                imax = i;
            }
        }
        if phi[imax] < 0.0 {
            phi.neg_mut();
        }
        let omega = lambda.sqrt();
        // Residual check: ‖Kφ − ω²Mφ‖ ≤ 1e-8 ‖Kφ‖.
        let kphi = &k_dense * &phi;
        let res = (&kphi - &m_dense * &phi * lambda).norm();
        if res > 1e-8 * kphi.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::NonConvergence {
                context: format!("eigenpair residual check (mode at {omega:.6e} rad/t)"),
                iterations: 0,
                residual: res,
            });
        }
        pairs.push(EigenPair { omega, shape: phi });
    }
    Ok(pairs)
}

/// Mass-proportional Rayleigh damping `C = (ω0/Q)·M`.
pub fn rayleigh_damping(model: &FullOrderModel, omega0: f64, q: f64) -> Result<SparseMatrixSym> {
    if q <= 0.0 {
        return Err(Error::Config(format!("quality factor must be positive, got {q}")));
    }
    Ok(model.m.scaled(omega0 / q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CubicTensor, ForcingSpec, QuarticTensor};
    use approx::assert_relative_eq;

    fn diag_model(masses: &[f64], stiffs: &[f64]) -> FullOrderModel {
        let n = masses.len();
        FullOrderModel::new(
            SparseMatrixSym::from_diagonal(masses),
            SparseMatrixSym::zeros(n, true),
            SparseMatrixSym::from_diagonal(stiffs),
            CubicTensor::empty(n),
            QuarticTensor::empty(n),
            ForcingSpec::zero(n),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn scalar_mode() {
        let model = diag_model(&[1.0], &[1.0]);
        let eigs = solve_eigs(&model, 1).unwrap();
        assert_relative_eq!(eigs[0].omega, 1.0, max_relative = 1e-12);
        assert_relative_eq!(eigs[0].shape[0], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn diagonal_two_dof_frequencies_ascending() {
        let model = diag_model(&[1.0, 1.0], &[4.0, 1.0]);
        let eigs = solve_eigs(&model, 2).unwrap();
        assert_relative_eq!(eigs[0].omega, 1.0, max_relative = 1e-12);
        assert_relative_eq!(eigs[1].omega, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn mass_orthonormality() {
        // Coupled 3-dof chain.
        let m = SparseMatrixSym::from_triplets(
            3,
            true,
            [(0, 0, 2.0), (1, 1, 1.5), (2, 2, 1.0), (0, 1, 0.2)],
        )
        .unwrap();
        let k = SparseMatrixSym::from_triplets(
            3,
            true,
            [
                (0, 0, 4.0),
                (1, 1, 5.0),
                (2, 2, 3.0),
                (0, 1, -1.0),
                (1, 2, -1.0),
            ],
        )
        .unwrap();
        let model = FullOrderModel::new(
            m.clone(),
            SparseMatrixSym::zeros(3, true),
            k,
            CubicTensor::empty(3),
            QuarticTensor::empty(3),
            ForcingSpec::zero(3),
            vec![],
        )
        .unwrap();
        let eigs = solve_eigs(&model, 3).unwrap();
        let md = m.to_dense();
        for (i, a) in eigs.iter().enumerate() {
            for (j, b) in eigs.iter().enumerate() {
                let dot = (a.shape.transpose() * &md * &b.shape)[(0, 0)];
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-8, "M-orthonormality {i},{j}: {dot}");
            }
        }
        assert!(eigs[0].omega <= eigs[1].omega && eigs[1].omega <= eigs[2].omega);
    }

    #[test]
    fn rayleigh_scalar() {
        let model = diag_model(&[1.0], &[1.0]);
        let c = rayleigh_damping(&model, 1.0, 50.0).unwrap();
        assert_relative_eq!(c.to_dense()[(0, 0)], 0.02, max_relative = 1e-14);
        assert!(rayleigh_damping(&model, 1.0, 0.0).is_err());
        // Q → ∞ limit: scaling factor → 0.
        let c_inf = rayleigh_damping(&model, 1.0, 1e18).unwrap();
        assert!(c_inf.to_dense()[(0, 0)] < 1e-17);
    }
}

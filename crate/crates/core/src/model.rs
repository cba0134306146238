//! Discrete equations of motion with exact polynomial force decomposition:
//!
//! ```text
//! M D̈ + C Ḋ + K D + G(D,D) + H(D,D,D) = β F0 cos(ωt + φ)
//! ```
//!
//! The quadratic and cubic force tensors are stored sparse with canonical
//! trailing-index ordering (j ≤ k, resp. j ≤ k ≤ l) and symmetrized values,
//! so one pass over the entries evaluates `G_i = Σ value·D_j·D_k`.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Sparse matrix in coordinate form; when `symmetric` only the upper
/// triangle (row ≤ col) is stored and the transpose entries are implied.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrixSym {
    n: usize,
    symmetric: bool,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrixSym {
    /// Assemble from triplets: duplicates are summed, symmetric storage is
    /// canonicalized to the upper triangle, exact zeros are dropped.
    pub fn from_triplets<I>(n: usize, symmetric: bool, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (r, c, v) in triplets {
            if r >= n || c >= n {
                return Err(Error::Dimension(format!(
                    "matrix entry ({r},{c}) outside dimension {n}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Format(format!("non-finite entry at ({r},{c})")));
            }
            let (r, c) = if symmetric && r > c { (c, r) } else { (r, c) };
            entries.push((r, c, v));
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut folded: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match folded.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => folded.push((r, c, v)),
            }
        }
        folded.retain(|&(_, _, v)| v != 0.0);
        Ok(SparseMatrixSym {
            n,
            symmetric,
            entries: folded,
        })
    }

    pub fn zeros(n: usize, symmetric: bool) -> Self {
        SparseMatrixSym {
            n,
            symmetric,
            entries: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrixSym {
            n,
            symmetric: true,
            entries: (0..n).map(|i| (i, i, 1.0)).collect(),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SparseMatrixSym {
            n: diag.len(),
            symmetric: true,
            entries: diag
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, &v)| (i, i, v))
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.entries.iter_mut().for_each(|e| e.2 *= factor);
        out
    }

    /// Visit every logical entry (i, j, value), expanding implied transposes.
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, usize, f64)) {
        for &(r, c, v) in &self.entries {
            f(r, c, v);
            if self.symmetric && r != c {
                f(c, r, v);
            }
        }
    }

    pub fn mul_vec_into(&self, x: &DVector<f64>, y: &mut DVector<f64>, scale: f64) {
        for &(r, c, v) in &self.entries {
            y[r] += scale * v * x[c];
            if self.symmetric && r != c {
                y[c] += scale * v * x[r];
            }
        }
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.n);
        self.mul_vec_into(x, &mut y, 1.0);
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        self.for_each_entry(|i, j, v| m[(i, j)] += v);
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        self.for_each_entry(|_, _, v| s += v * v);
        s.sqrt()
    }

    /// Largest |row - col| over stored entries.
    pub fn half_bandwidth(&self) -> usize {
        self.entries
            .iter()
            .map(|&(r, c, _)| r.abs_diff(c))
            .max()
            .unwrap_or(0)
    }

    /// Congruence projection `Uᵀ A U` onto a reduced basis.
    pub fn project(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let p = u.ncols();
        let mut out = DMatrix::zeros(p, p);
        self.for_each_entry(|r, c, v| {
            for i in 0..p {
                let urv = v * u[(r, i)];
                if urv != 0.0 {
                    for j in 0..p {
                        out[(i, j)] += urv * u[(c, j)];
                    }
                }
            }
        });
        out
    }
}

/// Quadratic force tensor: `G_i(D,D) = Σ value·D_j·D_k` over entries
/// (i, j, k, value) with j ≤ k and the permutation multiplicity folded in.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicTensor {
    n: usize,
    entries: Vec<(usize, usize, usize, f64)>,
}

impl CubicTensor {
    pub fn empty(n: usize) -> Self {
        CubicTensor {
            n,
            entries: Vec::new(),
        }
    }

    /// From raw indicial coefficients `G_ijk` (force = Σ_jk G_ijk D_j D_k):
    /// values of (j,k) and (k,j) fold into one canonical entry.
    pub fn from_raw<I>(n: usize, raw: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, usize, f64)>,
    {
        let canonical = raw
            .into_iter()
            .map(|(i, j, k, v)| if j <= k { (i, j, k, v) } else { (i, k, j, v) });
        Self::build(n, canonical)
    }

    /// From entries already in the symmetrized convention (j ≤ k, value
    /// includes multiplicity). Duplicate coordinates are summed.
    pub fn from_canonical<I>(n: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, usize, f64)>,
    {
        Self::build(n, entries.into_iter())
    }

    fn build<I>(n: usize, entries: I) -> Result<Self>
    where
        I: Iterator<Item = (usize, usize, usize, f64)>,
    {
        let mut list: Vec<(usize, usize, usize, f64)> = Vec::new();
        for (i, j, k, v) in entries {
            if i >= n || j >= n || k >= n {
                return Err(Error::Dimension(format!(
                    "cubic tensor entry ({i},{j},{k}) outside dimension {n}"
                )));
            }
            if j > k {
                return Err(Error::Format(format!(
                    "cubic tensor entry ({i},{j},{k}) violates j <= k"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Format(format!("non-finite value at ({i},{j},{k})")));
            }
            list.push((i, j, k, v));
        }
        list.sort_by_key(|&(i, j, k, _)| (i, j, k));
        let mut folded: Vec<(usize, usize, usize, f64)> = Vec::with_capacity(list.len());
        for (i, j, k, v) in list {
            match folded.last_mut() {
                Some(last) if last.0 == i && last.1 == j && last.2 == k => last.3 += v,
                _ => folded.push((i, j, k, v)),
            }
        }
        folded.retain(|&(_, _, _, v)| v != 0.0);
        Ok(CubicTensor { n, entries: folded })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, usize, usize, f64)] {
        &self.entries
    }

    pub fn eval_into(&self, d: &DVector<f64>, out: &mut DVector<f64>, scale: f64) {
        for &(i, j, k, v) in &self.entries {
            out[i] += scale * v * d[j] * d[k];
        }
    }

    /// Exact derivative ∂G_i/∂D_m of the symmetrized evaluation.
    pub fn tangent_for_each(&self, d: &DVector<f64>, mut f: impl FnMut(usize, usize, f64)) {
        for &(i, j, k, v) in &self.entries {
            f(i, j, v * d[k]);
            f(i, k, v * d[j]);
        }
    }

    pub fn half_bandwidth(&self) -> usize {
        self.entries
            .iter()
            .map(|&(i, j, k, _)| i.abs_diff(j).max(i.abs_diff(k)))
            .max()
            .unwrap_or(0)
    }
}

/// Cubic force tensor: `H_i(D,D,D) = Σ value·D_j·D_k·D_l` with j ≤ k ≤ l.
#[derive(Debug, Clone, PartialEq)]
pub struct QuarticTensor {
    n: usize,
    entries: Vec<(usize, usize, usize, usize, f64)>,
}

impl QuarticTensor {
    pub fn empty(n: usize) -> Self {
        QuarticTensor {
            n,
            entries: Vec::new(),
        }
    }

    pub fn from_raw<I>(n: usize, raw: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, usize, usize, f64)>,
    {
        Self::build(
            n,
            raw.into_iter().map(|(i, j, k, l, v)| {
                let mut t = [j, k, l];
                t.sort_unstable();
                (i, t[0], t[1], t[2], v)
            }),
        )
    }

    pub fn from_canonical<I>(n: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, usize, usize, f64)>,
    {
        Self::build(n, entries.into_iter())
    }

    fn build<I>(n: usize, entries: I) -> Result<Self>
    where
        I: Iterator<Item = (usize, usize, usize, usize, f64)>,
    {
        let mut list: Vec<(usize, usize, usize, usize, f64)> = Vec::new();
        for (i, j, k, l, v) in entries {
            if i >= n || j >= n || k >= n || l >= n {
                return Err(Error::Dimension(format!(
                    "quartic tensor entry ({i},{j},{k},{l}) outside dimension {n}"
                )));
            }
            if j > k || k > l {
                return Err(Error::Format(format!(
                    "quartic tensor entry ({i},{j},{k},{l}) violates j <= k <= l"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Format(format!(
                    "non-finite value at ({i},{j},{k},{l})"
                )));
            }
            list.push((i, j, k, l, v));
        }
        list.sort_by_key(|&(i, j, k, l, _)| (i, j, k, l));
        let mut folded: Vec<(usize, usize, usize, usize, f64)> = Vec::with_capacity(list.len());
        for (i, j, k, l, v) in list {
            match folded.last_mut() {
                Some(last) if last.0 == i && last.1 == j && last.2 == k && last.3 == l => {
                    last.4 += v
                }
                _ => folded.push((i, j, k, l, v)),
            }
        }
        folded.retain(|&(_, _, _, _, v)| v != 0.0);
        Ok(QuarticTensor { n, entries: folded })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, usize, usize, usize, f64)] {
        &self.entries
    }

    pub fn eval_into(&self, d: &DVector<f64>, out: &mut DVector<f64>, scale: f64) {
        for &(i, j, k, l, v) in &self.entries {
            out[i] += scale * v * d[j] * d[k] * d[l];
        }
    }

    pub fn tangent_for_each(&self, d: &DVector<f64>, mut f: impl FnMut(usize, usize, f64)) {
        for &(i, j, k, l, v) in &self.entries {
            f(i, j, v * d[k] * d[l]);
            f(i, k, v * d[j] * d[l]);
            f(i, l, v * d[j] * d[k]);
        }
    }

    pub fn half_bandwidth(&self) -> usize {
        self.entries
            .iter()
            .map(|&(i, j, k, l, _)| i.abs_diff(j).max(i.abs_diff(k)).max(i.abs_diff(l)))
            .max()
            .unwrap_or(0)
    }
}

/// Harmonic body load `F(t) = β·F0·cos(ωt + phase)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSpec {
    pub f0: DVector<f64>,
    pub beta: f64,
    pub omega: f64,
    pub phase: f64,
}

impl ForcingSpec {
    pub fn new(f0: DVector<f64>, beta: f64, omega: f64, phase: f64) -> Result<Self> {
        if f0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("forcing vector has non-finite entries".into()));
        }
        Ok(ForcingSpec {
            f0,
            beta,
            omega,
            phase,
        })
    }

    pub fn zero(n: usize) -> Self {
        ForcingSpec {
            f0: DVector::zeros(n),
            beta: 0.0,
            omega: 1.0,
            phase: 0.0,
        }
    }

    pub fn eval_into(&self, t: f64, out: &mut DVector<f64>, sign: f64) {
        let amp = sign * self.beta * (self.omega * t + self.phase).cos();
        if amp != 0.0 {
            out.axpy(amp, &self.f0, 1.0);
        }
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.f0.len());
        self.eval_into(t, &mut out, 1.0);
        out
    }
}

/// Named linear functional of the displacement field.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    pub name: String,
    pub weights: DVector<f64>,
}

impl Observable {
    pub fn eval(&self, d: &DVector<f64>) -> f64 {
        self.weights.dot(d)
    }
}

/// State-dependent generalized force added to the right-hand side, used for
/// electrostatic coupling on reduced models. Implementations must provide the
/// exact displacement tangent so Newton loops and Floquet analysis see it.
pub trait ExtraForce: Sync {
    /// Force vector at displacement `d`, excitation frequency `omega`, time `t`.
    fn force(&self, d: &DVector<f64>, omega: f64, t: f64) -> Result<DVector<f64>>;

    /// ∂force/∂d as a dense matrix (these forces act on reduced models).
    fn tangent(&self, d: &DVector<f64>, omega: f64, t: f64) -> Result<DMatrix<f64>>;
}

/// The assembled full-order model. Immutable after construction; all
/// evaluation routines are pure, so a model can be shared across workers.
#[derive(Debug, Clone)]
pub struct FullOrderModel {
    n: usize,
    pub m: SparseMatrixSym,
    pub c: SparseMatrixSym,
    pub k: SparseMatrixSym,
    pub g: CubicTensor,
    pub h: QuarticTensor,
    pub forcing: ForcingSpec,
    pub observables: Vec<Observable>,
    k_frob: f64,
    half_bandwidth: usize,
}

impl FullOrderModel {
    pub fn new(
        m: SparseMatrixSym,
        c: SparseMatrixSym,
        k: SparseMatrixSym,
        g: CubicTensor,
        h: QuarticTensor,
        forcing: ForcingSpec,
        observables: Vec<Observable>,
    ) -> Result<Self> {
        let n = m.n();
        if [c.n(), k.n(), g.n(), h.n()].iter().any(|&d| d != n) {
            return Err(Error::Dimension(
                "model pieces disagree on dimension".into(),
            ));
        }
        if forcing.f0.len() != n {
            return Err(Error::Dimension("forcing vector length != n".into()));
        }
        for o in &observables {
            if o.weights.len() != n {
                return Err(Error::Dimension(format!(
                    "observable '{}' length != n",
                    o.name
                )));
            }
        }
        if !(m.is_symmetric() && c.is_symmetric() && k.is_symmetric()) {
            return Err(Error::Format(
                "M, C, K must be stored with the symmetry flag".into(),
            ));
        }
        // SPD check by attempted factorization.
        if nalgebra::Cholesky::new(m.to_dense()).is_none() {
            return Err(Error::NotSpd("mass matrix".into()));
        }
        let k_frob = k.frobenius_norm();
        let half_bandwidth = m
            .half_bandwidth()
            .max(c.half_bandwidth())
            .max(k.half_bandwidth())
            .max(g.half_bandwidth())
            .max(h.half_bandwidth());
        Ok(FullOrderModel {
            n,
            m,
            c,
            k,
            g,
            h,
            forcing,
            observables,
            k_frob,
            half_bandwidth,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_frobenius(&self) -> f64 {
        self.k_frob
    }

    pub fn half_bandwidth(&self) -> usize {
        self.half_bandwidth
    }

    pub fn observable_names(&self) -> Vec<String> {
        self.observables.iter().map(|o| o.name.clone()).collect()
    }

    pub fn with_forcing(&self, beta: f64, omega: f64) -> Self {
        let mut out = self.clone();
        out.forcing.beta = beta;
        out.forcing.omega = omega;
        out
    }

    fn check_len(&self, d: &DVector<f64>, what: &str) -> Result<()> {
        if d.len() != self.n {
            return Err(Error::Dimension(format!(
                "{what} has length {}, model dimension is {}",
                d.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// `K·D + G(D,D) + H(D,D,D)`.
    pub fn internal_force(&self, d: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(d, "displacement")?;
        let mut f = self.k.mul_vec(d);
        self.g.eval_into(d, &mut f, 1.0);
        self.h.eval_into(d, &mut f, 1.0);
        Ok(f)
    }

    /// `G(D,D) + H(D,D,D)` only (the part harmonic balance treats by AFT).
    pub fn nonlinear_force_into(&self, d: &DVector<f64>, out: &mut DVector<f64>) {
        self.g.eval_into(d, out, 1.0);
        self.h.eval_into(d, out, 1.0);
    }

    /// Exact tangent stiffness `K + ∂G/∂D + ∂H/∂D` as coordinate entries.
    /// The result is general (symmetry of the nonlinear part is not assumed).
    pub fn tangent_stiffness(&self, d: &DVector<f64>) -> Result<SparseMatrixSym> {
        self.check_len(d, "displacement")?;
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        self.k.for_each_entry(|i, j, v| triplets.push((i, j, v)));
        self.g.tangent_for_each(d, |i, j, v| triplets.push((i, j, v)));
        self.h.tangent_for_each(d, |i, j, v| triplets.push((i, j, v)));
        SparseMatrixSym::from_triplets(self.n, false, triplets)
    }

    /// Stream tangent stiffness entries (with duplicates) into a callback;
    /// the fast path used by the implicit solvers.
    pub fn tangent_for_each(&self, d: &DVector<f64>, mut f: impl FnMut(usize, usize, f64)) {
        self.k.for_each_entry(&mut f);
        self.g.tangent_for_each(d, &mut f);
        self.h.tangent_for_each(d, &mut f);
    }

    /// Nonlinear part of the tangent only (`∂G/∂D + ∂H/∂D`).
    pub fn nonlinear_tangent_for_each(
        &self,
        d: &DVector<f64>,
        mut f: impl FnMut(usize, usize, f64),
    ) {
        self.g.tangent_for_each(d, &mut f);
        self.h.tangent_for_each(d, &mut f);
    }

    /// Dynamic residual `M·A + C·V + f_int(D) − β F0 cos(ωt + phase)`.
    pub fn residual(
        &self,
        d: &DVector<f64>,
        v: &DVector<f64>,
        a: &DVector<f64>,
        t: f64,
    ) -> Result<DVector<f64>> {
        self.check_len(d, "displacement")?;
        self.check_len(v, "velocity")?;
        self.check_len(a, "acceleration")?;
        let mut r = self.internal_force(d)?;
        self.m.mul_vec_into(a, &mut r, 1.0);
        self.c.mul_vec_into(v, &mut r, 1.0);
        self.forcing.eval_into(t, &mut r, -1.0);
        Ok(r)
    }

    pub fn observable_values(&self, d: &DVector<f64>) -> Vec<(String, f64)> {
        self.observables
            .iter()
            .map(|o| (o.name.clone(), o.eval(d)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar_model() -> FullOrderModel {
        // n=1: M=1, C=0, K=2, G=(0,0,0,0.5), H=(0,0,0,0,0.1)
        FullOrderModel::new(
            SparseMatrixSym::identity(1),
            SparseMatrixSym::zeros(1, true),
            SparseMatrixSym::from_triplets(1, true, [(0, 0, 2.0)]).unwrap(),
            CubicTensor::from_canonical(1, [(0, 0, 0, 0.5)]).unwrap(),
            QuarticTensor::from_canonical(1, [(0, 0, 0, 0, 0.1)]).unwrap(),
            ForcingSpec::zero(1),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn internal_force_zero_at_origin() {
        let model = scalar_model();
        let f = model.internal_force(&DVector::zeros(1)).unwrap();
        assert_eq!(f[0], 0.0);
    }

    #[test]
    fn internal_force_scalar_example() {
        let model = scalar_model();
        let f = model
            .internal_force(&DVector::from_vec(vec![2.0]))
            .unwrap();
        // 2·2 + 0.5·4 + 0.1·8 = 6.8
        assert_relative_eq!(f[0], 6.8, max_relative = 1e-14);
    }

    #[test]
    fn tangent_scalar_example() {
        let model = scalar_model();
        let kt = model
            .tangent_stiffness(&DVector::from_vec(vec![2.0]))
            .unwrap()
            .to_dense();
        // 2 + 2·0.5·2 + 3·0.1·4 = 5.2
        assert_relative_eq!(kt[(0, 0)], 5.2, max_relative = 1e-14);
    }

    #[test]
    fn tangent_at_origin_is_k() {
        let model = scalar_model();
        let kt = model.tangent_stiffness(&DVector::zeros(1)).unwrap();
        assert_eq!(kt.to_dense()[(0, 0)], 2.0);
    }

    #[test]
    fn raw_tensor_folds_symmetric_pairs() {
        // Raw G_ijk with G_012 = 1, G_021 = 2 folds to the canonical slot (0,1,2).
        let g = CubicTensor::from_raw(3, [(0, 1, 2, 1.0), (0, 2, 1, 2.0)]).unwrap();
        assert_eq!(g.nnz(), 1);
        let d = DVector::from_vec(vec![0.0, 3.0, 5.0]);
        let mut out = DVector::zeros(3);
        g.eval_into(&d, &mut out, 1.0);
        assert_relative_eq!(out[0], 3.0 * 3.0 * 5.0, max_relative = 1e-15);
    }

    #[test]
    fn non_spd_mass_rejected() {
        let bad = FullOrderModel::new(
            SparseMatrixSym::from_triplets(1, true, [(0, 0, -1.0)]).unwrap(),
            SparseMatrixSym::zeros(1, true),
            SparseMatrixSym::identity(1),
            CubicTensor::empty(1),
            QuarticTensor::empty(1),
            ForcingSpec::zero(1),
            vec![],
        );
        assert!(matches!(bad, Err(Error::NotSpd(_))));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let model = scalar_model();
        assert!(model.internal_force(&DVector::zeros(2)).is_err());
    }

    #[test]
    fn residual_is_sum_of_terms() {
        let model = scalar_model().with_forcing(0.3, 2.0);
        let (d, v, a) = (
            DVector::from_vec(vec![0.7]),
            DVector::from_vec(vec![-0.4]),
            DVector::from_vec(vec![1.1]),
        );
        let t = 0.9;
        let r = model.residual(&d, &v, &a, t).unwrap();
        let expect = 1.0 * 1.1 + 0.0 + (2.0 * 0.7 + 0.5 * 0.49 + 0.1 * 0.343)
            - 0.3 * (2.0 * t).cos();
        assert_relative_eq!(r[0], expect, max_relative = 1e-14);
    }
}

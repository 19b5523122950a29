//! Truncated-Fock-space operator algebra.
//!
//! Composite indices follow the layout order with the first factor most
//! significant, i.e. the same ordering as `A ⊗ B ⊗ C`.
//!
//! Qubit convention (used everywhere in the crate): basis index 0 is the
//! ground state |g⟩ and index 1 is |e⟩, with σ_z|e⟩ = +|e⟩ and
//! σ_z|g⟩ = −|g⟩. With this ordering σ_− = |g⟩⟨e| coincides with the
//! two-level ladder operator, so a transmon truncated to two levels is
//! the qubit.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::sparse::SparseMatrix;

pub type C64 = Complex64;
pub type Matrix = DMatrix<C64>;
pub type Ket = DVector<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorKind {
    Cavity,
    Qubit,
    Transmon,
    Mech,
}

impl FactorKind {
    /// Bosonic factors are the ones the frame stepper displaces.
    pub fn is_displaced_mode(self) -> bool {
        matches!(self, FactorKind::Cavity | FactorKind::Mech)
    }
}

impl fmt::Display for FactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FactorKind::Cavity => "cavity",
            FactorKind::Qubit => "qubit",
            FactorKind::Transmon => "transmon",
            FactorKind::Mech => "mech",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub kind: FactorKind,
    pub dim: usize,
}

/// Ordered tensor-product structure of the simulated Hilbert space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertLayout {
    factors: Vec<Factor>,
}

impl HilbertLayout {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(SimError::InvalidLayout("no factors".into()));
        }
        for (i, f) in factors.iter().enumerate() {
            if f.dim == 0 {
                return Err(SimError::InvalidDimension { dim: 0, reason: "factor dimension must be positive" });
            }
            if factors[..i].iter().any(|g| g.kind == f.kind) {
                return Err(SimError::InvalidLayout(format!("duplicate factor label {}", f.kind)));
            }
            if f.kind == FactorKind::Qubit && f.dim != 2 {
                return Err(SimError::InvalidDimension { dim: f.dim, reason: "qubit factor must have dimension 2" });
            }
        }
        Ok(Self { factors })
    }

    /// Convenience constructor from (kind, dim) pairs.
    pub fn from_pairs(pairs: &[(FactorKind, usize)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(kind, dim)| Factor { kind, dim }).collect())
    }

    pub fn single(kind: FactorKind, dim: usize) -> Result<Self> {
        Self::from_pairs(&[(kind, dim)])
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).product()
    }

    pub fn position(&self, kind: FactorKind) -> Option<usize> {
        self.factors.iter().position(|f| f.kind == kind)
    }

    pub fn contains(&self, kind: FactorKind) -> bool {
        self.position(kind).is_some()
    }

    pub fn factor_dim(&self, kind: FactorKind) -> Result<usize> {
        self.position(kind).map(|p| self.factors[p].dim).ok_or(SimError::UnknownFactor(kind))
    }

    /// (product of dims before, factor dim, product of dims after).
    pub(crate) fn split(&self, kind: FactorKind) -> Result<(usize, usize, usize)> {
        let p = self.position(kind).ok_or(SimError::UnknownFactor(kind))?;
        let before = self.factors[..p].iter().map(|f| f.dim).product();
        let after = self.factors[p + 1..].iter().map(|f| f.dim).product();
        Ok((before, self.factors[p].dim, after))
    }

    pub fn ensure_same(&self, other: &HilbertLayout) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(SimError::LayoutMismatch(format!("{:?} vs {:?}", self.factors, other.factors)))
        }
    }
}

/// Operator on a composite space, stored sparse.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    layout: HilbertLayout,
    matrix: SparseMatrix,
}

impl Operator {
    pub fn new(layout: HilbertLayout, matrix: SparseMatrix) -> Result<Self> {
        if matrix.dim() != layout.dim() {
            return Err(SimError::InvalidDimension { dim: matrix.dim(), reason: "operator does not match layout dimension" });
        }
        Ok(Self { layout, matrix })
    }

    pub fn from_dense(layout: HilbertLayout, m: &Matrix) -> Result<Self> {
        Self::new(layout, SparseMatrix::from_dense(m))
    }

    pub fn identity(layout: &HilbertLayout) -> Self {
        Self { matrix: SparseMatrix::identity(layout.dim()), layout: layout.clone() }
    }

    pub fn zero(layout: &HilbertLayout) -> Self {
        Self { matrix: SparseMatrix::zeros(layout.dim()), layout: layout.clone() }
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn to_dense(&self) -> Matrix {
        self.matrix.to_dense()
    }

    pub fn adjoint(&self) -> Self {
        Self { layout: self.layout.clone(), matrix: self.matrix.adjoint() }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { layout: self.layout.clone(), matrix: self.matrix.scale(s) }
    }

    pub fn add(&self, other: &Operator) -> Result<Self> {
        self.layout.ensure_same(&other.layout)?;
        Ok(Self { layout: self.layout.clone(), matrix: self.matrix.add(&other.matrix) })
    }

    pub fn sub(&self, other: &Operator) -> Result<Self> {
        self.add(&other.scale(-ONE))
    }

    pub fn mul(&self, other: &Operator) -> Result<Self> {
        self.layout.ensure_same(&other.layout)?;
        Ok(Self { layout: self.layout.clone(), matrix: self.matrix.matmul(&other.matrix) })
    }

    pub fn commutator(&self, other: &Operator) -> Result<Self> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.max_abs()
    }

    /// Passes when ‖H − H†‖_max < 1e−12 · ‖H‖_max.
    pub fn check_hermitian(&self) -> Result<()> {
        let defect = self.matrix.hermiticity_defect();
        let scale = self.matrix.max_abs();
        if defect <= 1e-12 * scale || defect == 0.0 {
            Ok(())
        } else {
            Err(SimError::NonHermitian { defect, scale })
        }
    }
}

/// Hermitian, unit-trace state on a composite space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    layout: HilbertLayout,
    data: Matrix,
}

pub const TRACE_TOL: f64 = 1e-8;
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-7;

impl DensityMatrix {
    pub fn new(layout: HilbertLayout, data: Matrix) -> Result<Self> {
        let d = layout.dim();
        if data.nrows() != d || data.ncols() != d {
            return Err(SimError::InvalidState(format!("matrix is {}x{}, layout needs {d}", data.nrows(), data.ncols())));
        }
        let rho = Self { layout, data };
        let tr = rho.trace();
        if (tr - 1.0).abs() >= TRACE_TOL {
            return Err(SimError::InvalidState(format!("trace {tr} differs from 1")));
        }
        let h = rho.hermiticity_defect();
        if h >= HERMITICITY_TOL {
            return Err(SimError::InvalidState(format!("Hermiticity defect {h:e}")));
        }
        Ok(rho)
    }

    pub(crate) fn new_unchecked(layout: HilbertLayout, data: Matrix) -> Self {
        Self { layout, data }
    }

    pub fn from_ket(layout: HilbertLayout, psi: &Ket) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(SimError::InvalidState("zero ket".into()));
        }
        let v = psi / C64::new(norm, 0.0);
        Self::new(layout, &v * v.adjoint())
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut Matrix {
        &mut self.data
    }

    pub fn into_data(self) -> Matrix {
        self.data
    }

    pub fn trace(&self) -> f64 {
        self.data.trace().re
    }

    pub fn purity(&self) -> f64 {
        // Tr ρ² = Σ |ρ_ij|² for Hermitian ρ
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.data)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.data + self.data.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn expect(&self, op: &Operator) -> Result<C64> {
        self.layout.ensure_same(op.layout())?;
        // Tr[Oρ] = Σ_ij O_ij ρ_ji
        Ok(op.matrix().iter().map(|(i, j, v)| v * self.data[(j, i)]).sum())
    }

    /// Tr[(A on `kind`) ρ] without materializing the embedded operator.
    pub fn expect_local(&self, a: &Matrix, kind: FactorKind) -> Result<C64> {
        let (before, d, after) = self.layout.split(kind)?;
        check_local(a, d)?;
        let mut acc = ZERO;
        for b in 0..before {
            for r in 0..after {
                for f in 0..d {
                    for g in 0..d {
                        let v = a[(f, g)];
                        if v == ZERO {
                            continue;
                        }
                        let i = (b * d + f) * after + r;
                        let j = (b * d + g) * after + r;
                        acc += v * self.data[(j, i)];
                    }
                }
            }
        }
        Ok(acc)
    }

    /// Reduced state of one factor.
    pub fn partial_trace(&self, keep: FactorKind) -> Result<Matrix> {
        let (before, d, after) = self.layout.split(keep)?;
        let mut out = Matrix::zeros(d, d);
        for f in 0..d {
            for g in 0..d {
                let mut acc = ZERO;
                for b in 0..before {
                    for r in 0..after {
                        acc += self.data[((b * d + f) * after + r, (b * d + g) * after + r)];
                    }
                }
                out[(f, g)] = acc;
            }
        }
        Ok(out)
    }

    /// Population of the highest Fock level of `kind`.
    pub fn top_level_population(&self, kind: FactorKind) -> Result<f64> {
        let red = self.partial_trace(kind)?;
        let n = red.nrows();
        Ok(red[(n - 1, n - 1)].re)
    }

    /// ρ → U ρ U† with U acting on one factor.
    pub fn conjugate_local(&mut self, u: &Matrix, kind: FactorKind) -> Result<()> {
        let (before, d, after) = self.layout.split(kind)?;
        check_local(u, d)?;
        apply_local_rows(u, before, d, after, &mut self.data);
        let mut adj = self.data.adjoint();
        apply_local_rows(u, before, d, after, &mut adj);
        self.data = adj.adjoint();
        Ok(())
    }

    /// Fidelity with a pure target, ⟨ψ|ρ|ψ⟩.
    pub fn overlap(&self, psi: &Ket) -> f64 {
        (psi.adjoint() * &self.data * psi)[(0, 0)].re
    }
}

pub(crate) fn hermiticity_defect(m: &Matrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in j..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn check_local(a: &Matrix, d: usize) -> Result<()> {
    if a.nrows() != d || a.ncols() != d {
        return Err(SimError::InvalidDimension { dim: a.nrows(), reason: "local operator does not match factor dimension" });
    }
    Ok(())
}

/// Left-multiplies every column of `m` by (I ⊗ U ⊗ I).
pub(crate) fn apply_local_rows(u: &Matrix, before: usize, d: usize, after: usize, m: &mut Matrix) {
    let n = before * d * after;
    debug_assert_eq!(m.nrows(), n);
    let ncols = m.ncols();
    let data = m.as_mut_slice();
    let mut buf = vec![ZERO; d];
    for col in 0..ncols {
        let c = &mut data[col * n..(col + 1) * n];
        for b in 0..before {
            for r in 0..after {
                for (f, slot) in buf.iter_mut().enumerate() {
                    let mut acc = ZERO;
                    for g in 0..d {
                        acc += u[(f, g)] * c[(b * d + g) * after + r];
                    }
                    *slot = acc;
                }
                for (f, v) in buf.iter().enumerate() {
                    c[(b * d + f) * after + r] = *v;
                }
            }
        }
    }
}

/// Pure state on a composite space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    layout: HilbertLayout,
    data: Ket,
}

impl StateVector {
    pub fn new(layout: HilbertLayout, data: Ket) -> Result<Self> {
        if data.len() != layout.dim() {
            return Err(SimError::InvalidState(format!("ket length {} vs layout {}", data.len(), layout.dim())));
        }
        let n = data.norm();
        if (n - 1.0).abs() > 1e-8 {
            return Err(SimError::InvalidState(format!("ket norm {n} differs from 1")));
        }
        Ok(Self { layout, data })
    }

    /// Normalized tensor product of per-factor kets given in layout order.
    pub fn product(layout: HilbertLayout, parts: &[Ket]) -> Result<Self> {
        if parts.len() != layout.factors().len() {
            return Err(SimError::InvalidState("one ket per factor required".into()));
        }
        let mut v = Ket::from_element(1, ONE);
        for (p, f) in parts.iter().zip(layout.factors()) {
            if p.len() != f.dim {
                return Err(SimError::InvalidDimension { dim: p.len(), reason: "factor ket has wrong length" });
            }
            v = v.kronecker(p);
        }
        let n = v.norm();
        Self::new(layout, v / C64::new(n, 0.0))
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn data(&self) -> &Ket {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut Ket {
        &mut self.data
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::new_unchecked(self.layout.clone(), &self.data * self.data.adjoint())
    }

    pub fn expect(&self, op: &Operator) -> Result<C64> {
        self.layout.ensure_same(op.layout())?;
        let hpsi = op.matrix().mul_vec(&self.data);
        Ok(self.data.dotc(&hpsi))
    }

    pub fn expect_local(&self, a: &Matrix, kind: FactorKind) -> Result<C64> {
        let (before, d, after) = self.layout.split(kind)?;
        check_local(a, d)?;
        let mut applied = Matrix::from_column_slice(self.data.len(), 1, self.data.as_slice());
        apply_local_rows(a, before, d, after, &mut applied);
        Ok(self.data.iter().zip(applied.iter()).map(|(x, y)| x.conj() * y).sum())
    }

    pub fn apply_local(&mut self, u: &Matrix, kind: FactorKind) -> Result<()> {
        let (before, d, after) = self.layout.split(kind)?;
        check_local(u, d)?;
        let mut m = Matrix::from_column_slice(self.data.len(), 1, self.data.as_slice());
        apply_local_rows(u, before, d, after, &mut m);
        self.data = Ket::from_column_slice(m.as_slice());
        Ok(())
    }

    pub fn partial_trace(&self, keep: FactorKind) -> Result<Matrix> {
        let (before, d, after) = self.layout.split(keep)?;
        let mut out = Matrix::zeros(d, d);
        for b in 0..before {
            for r in 0..after {
                for f in 0..d {
                    let x = self.data[(b * d + f) * after + r];
                    for g in 0..d {
                        out[(f, g)] += x * self.data[(b * d + g) * after + r].conj();
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn top_level_population(&self, kind: FactorKind) -> Result<f64> {
        let red = self.partial_trace(kind)?;
        let n = red.nrows();
        Ok(red[(n - 1, n - 1)].re)
    }
}

/// Simulation state: a ket for lossless runs, a density matrix otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum State {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl State {
    pub fn layout(&self) -> &HilbertLayout {
        match self {
            State::Pure(s) => s.layout(),
            State::Mixed(r) => r.layout(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            State::Pure(s) => s.to_density(),
            State::Mixed(r) => r.clone(),
        }
    }

    /// Mixed copy; pure states are promoted.
    pub fn into_mixed(self) -> State {
        match self {
            State::Pure(s) => State::Mixed(s.to_density()),
            m => m,
        }
    }

    pub fn expect(&self, op: &Operator) -> Result<C64> {
        match self {
            State::Pure(s) => s.expect(op),
            State::Mixed(r) => r.expect(op),
        }
    }

    pub fn expect_local(&self, a: &Matrix, kind: FactorKind) -> Result<C64> {
        match self {
            State::Pure(s) => s.expect_local(a, kind),
            State::Mixed(r) => r.expect_local(a, kind),
        }
    }

    pub fn partial_trace(&self, keep: FactorKind) -> Result<Matrix> {
        match self {
            State::Pure(s) => s.partial_trace(keep),
            State::Mixed(r) => r.partial_trace(keep),
        }
    }

    pub fn top_level_population(&self, kind: FactorKind) -> Result<f64> {
        match self {
            State::Pure(s) => s.top_level_population(kind),
            State::Mixed(r) => r.top_level_population(kind),
        }
    }

    /// U on one factor: ψ → Uψ or ρ → UρU†.
    pub fn transform_local(&mut self, u: &Matrix, kind: FactorKind) -> Result<()> {
        match self {
            State::Pure(s) => s.apply_local(u, kind),
            State::Mixed(r) => r.conjugate_local(u, kind),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            State::Pure(s) => s.data().norm_squared(),
            State::Mixed(r) => r.trace(),
        }
    }

    /// Rescales to unit trace and returns the trace that was removed.
    pub fn renormalize(&mut self) -> f64 {
        let tr = self.trace();
        match self {
            State::Pure(s) => {
                let n = tr.sqrt();
                s.data_mut().iter_mut().for_each(|z| *z /= n);
            }
            State::Mixed(r) => {
                r.data_mut().iter_mut().for_each(|z| *z /= tr);
            }
        }
        1.0 - tr
    }

    /// ⟨ψ|ρ|ψ⟩ against a pure composite target.
    pub fn overlap(&self, psi: &Ket) -> f64 {
        match self {
            State::Pure(s) => (s.data().adjoint() * psi)[(0, 0)].norm_sqr(),
            State::Mixed(r) => r.overlap(psi),
        }
    }
}

/// Annihilation operator truncated to `dim` levels.
pub fn ladder(dim: usize) -> Result<Matrix> {
    if dim < 2 {
        return Err(SimError::InvalidDimension { dim, reason: "ladder operator needs at least two levels" });
    }
    let mut a = Matrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(a)
}

pub fn number(dim: usize) -> Matrix {
    Matrix::from_diagonal(&DVector::from_fn(dim, |n, _| C64::new(n as f64, 0.0)))
}

pub fn fock(dim: usize, n: usize) -> Ket {
    let mut v = Ket::zeros(dim);
    v[n] = ONE;
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliKind {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

pub fn pauli(kind: PauliKind) -> Matrix {
    let z = ZERO;
    let o = ONE;
    let entries = match kind {
        PauliKind::X => [z, o, o, z],
        PauliKind::Y => [z, I, -I, z],
        PauliKind::Z => [-o, z, z, o],
        PauliKind::Plus => [z, z, o, z],
        PauliKind::Minus => [z, o, z, z],
    };
    Matrix::from_row_slice(2, 2, &entries)
}

pub fn qubit_ground() -> Ket {
    fock(2, 0)
}

pub fn qubit_excited() -> Ket {
    fock(2, 1)
}

/// Places a single-factor operator on `target`, identity elsewhere.
pub fn embed(op: &Matrix, target: FactorKind, layout: &HilbertLayout) -> Result<Operator> {
    let (before, d, after) = layout.split(target)?;
    check_local(op, d)?;
    let m = SparseMatrix::identity(before)
        .kron(&SparseMatrix::from_dense(op))
        .kron(&SparseMatrix::identity(after));
    Operator::new(layout.clone(), m)
}

/// Kronecker product of one local matrix per factor (layout order).
pub fn tensor(parts: &[&Matrix], layout: &HilbertLayout) -> Result<Operator> {
    if parts.len() != layout.factors().len() {
        return Err(SimError::LayoutMismatch("one local operator per factor required".into()));
    }
    let mut m = SparseMatrix::identity(1);
    for (p, f) in parts.iter().zip(layout.factors()) {
        check_local(p, f.dim)?;
        m = m.kron(&SparseMatrix::from_dense(p));
    }
    Operator::new(layout.clone(), m)
}

/// Occupation below which a displacement is considered safely inside the
/// truncation (mean photon number relative to the dimension).
pub const DISPLACEMENT_SAFE_FRACTION: f64 = 0.5;

/// D(α) = exp(α a† − α* a) in the truncated space.
pub fn displacement(alpha: C64, dim: usize) -> Result<Matrix> {
    let a = ladder(dim)?;
    if alpha.norm_sqr() > DISPLACEMENT_SAFE_FRACTION * dim as f64 {
        log::warn!(
            "displacement |alpha|^2 = {:.3} is not small against truncation {dim}; result is truncation-limited",
            alpha.norm_sqr()
        );
    }
    let gen = a.adjoint() * alpha - &a * alpha.conj();
    Ok(gen.exp())
}

/// S(ξ) = exp((ξ a†² − ξ* a²)/2).
pub fn squeeze(xi: C64, dim: usize) -> Result<Matrix> {
    if dim < 4 {
        return Err(SimError::InvalidDimension { dim, reason: "squeeze operator needs at least four levels" });
    }
    let a = ladder(dim)?;
    let a2 = &a * &a;
    let gen = (a2.adjoint() * xi - a2 * xi.conj()) * C64::new(0.5, 0.0);
    Ok(gen.exp())
}

/// R(φ) = exp(−iφ a†a).
pub fn rotation(phi: f64, dim: usize) -> Matrix {
    Matrix::from_diagonal(&DVector::from_fn(dim, |n, _| C64::from_polar(1.0, -(n as f64) * phi)))
}

/// R_y(θ/2) = exp(−i(θ/2)σ_y); the argument is θ/2.
pub fn qubit_rotation_y(theta_half: f64) -> Matrix {
    let (s, c) = theta_half.sin_cos();
    // cos(θ/2) I − i sin(θ/2) σ_y, with σ_y = [[0, i], [−i, 0]] in (g, e)
    Matrix::from_row_slice(2, 2, &[C64::new(c, 0.0), C64::new(s, 0.0), C64::new(-s, 0.0), C64::new(c, 0.0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn max_diff(a: &Matrix, b: &Matrix) -> f64 {
        (a - b).camax()
    }

    #[test]
    fn ladder_entries_and_errors() {
        let a = ladder(2).unwrap();
        assert_eq!(a, Matrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]));
        assert!(matches!(ladder(1), Err(SimError::InvalidDimension { .. })));
        let a = ladder(6).unwrap();
        assert!(max_diff(&(a.adjoint() * &a), &number(6)) < 1e-14);
    }

    #[test]
    fn truncated_commutator() {
        let d = 7;
        let a = ladder(d).unwrap();
        let comm = &a * a.adjoint() - a.adjoint() * &a;
        let mut expect = Matrix::identity(d, d);
        expect[(d - 1, d - 1)] = C64::new(1.0 - d as f64, 0.0);
        assert!(max_diff(&comm, &expect) < 1e-13);
    }

    #[test]
    fn pauli_algebra() {
        let (x, y, z, p, m) = (
            pauli(PauliKind::X),
            pauli(PauliKind::Y),
            pauli(PauliKind::Z),
            pauli(PauliKind::Plus),
            pauli(PauliKind::Minus),
        );
        let id = Matrix::identity(2, 2);
        assert!(max_diff(&(&p * &m + &m * &p), &id) < 1e-15);
        assert!(max_diff(&(&p + &m), &x) < 1e-15);
        assert!(max_diff(&(&p * &m - &m * &p), &z) < 1e-15);
        assert!(max_diff(&(&x * &y - &y * &x), &(&z * C64::new(0.0, 2.0))) < 1e-15);
        // σ_− lowers |e⟩ to |g⟩, σ_z|e⟩ = +|e⟩
        assert_eq!(&m * qubit_excited(), qubit_ground());
        assert_eq!(&z * qubit_excited(), qubit_excited());
        assert_eq!(m, ladder(2).unwrap());
    }

    #[test]
    fn embed_identity_and_commuting_factors() {
        let layout = HilbertLayout::from_pairs(&[(FactorKind::Cavity, 4), (FactorKind::Qubit, 2), (FactorKind::Mech, 3)]).unwrap();
        let id = embed(&Matrix::identity(2, 2), FactorKind::Qubit, &layout).unwrap();
        assert_eq!(id, Operator::identity(&layout));
        let a = embed(&ladder(4).unwrap(), FactorKind::Cavity, &layout).unwrap();
        let b = embed(&ladder(3).unwrap(), FactorKind::Mech, &layout).unwrap();
        assert_eq!(a.commutator(&b).unwrap().max_abs(), 0.0);
        assert!(embed(&ladder(3).unwrap(), FactorKind::Cavity, &layout).is_err());
        assert!(matches!(
            embed(&ladder(3).unwrap(), FactorKind::Transmon, &layout),
            Err(SimError::UnknownFactor(FactorKind::Transmon))
        ));
    }

    #[test]
    fn embed_respects_products() {
        let layout = HilbertLayout::from_pairs(&[(FactorKind::Cavity, 5), (FactorKind::Qubit, 2)]).unwrap();
        let a = ladder(5).unwrap();
        let b = displacement(C64::new(0.3, -0.2), 5).unwrap();
        let lhs = embed(&(&a * &b), FactorKind::Cavity, &layout).unwrap();
        let rhs = embed(&a, FactorKind::Cavity, &layout).unwrap().mul(&embed(&b, FactorKind::Cavity, &layout).unwrap()).unwrap();
        assert!(max_diff(&lhs.to_dense(), &rhs.to_dense()) < 1e-15);
    }

    #[test]
    fn partial_trace_consistency() {
        let layout = HilbertLayout::from_pairs(&[(FactorKind::Cavity, 4), (FactorKind::Qubit, 2)]).unwrap();
        let cav = Ket::from_vec(vec![C64::new(0.5, 0.0), C64::new(0.5, 0.1), C64::new(0.0, 0.6), C64::new(0.2, 0.0)]);
        let q = Ket::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        let psi = StateVector::product(layout.clone(), &[cav.clone(), q]).unwrap();
        let rho = psi.to_density();
        let n_op = embed(&number(4), FactorKind::Cavity, &layout).unwrap();
        let cav = &cav / C64::new(cav.norm(), 0.0);
        let direct = (cav.adjoint() * number(4) * &cav)[(0, 0)];
        assert_abs_diff_eq!(rho.expect(&n_op).unwrap().re, direct.re, epsilon = 1e-14);
        assert_abs_diff_eq!(rho.expect_local(&number(4), FactorKind::Cavity).unwrap().re, direct.re, epsilon = 1e-14);
        assert_abs_diff_eq!(psi.expect_local(&number(4), FactorKind::Cavity).unwrap().re, direct.re, epsilon = 1e-14);
        let red = rho.partial_trace(FactorKind::Cavity).unwrap();
        assert!(max_diff(&red, &psi.partial_trace(FactorKind::Cavity).unwrap()) < 1e-15);
        assert!(max_diff(&red, &(&cav * cav.adjoint())) < 1e-14);
    }

    #[test]
    fn displacement_makes_coherent_state() {
        let d = 40;
        assert!(max_diff(&displacement(ZERO, d).unwrap(), &Matrix::identity(d, d)) < 1e-15);
        let alpha = C64::new(1.1, -0.4);
        let psi = displacement(alpha, d).unwrap() * fock(d, 0);
        let nbar = alpha.norm_sqr();
        let mut fact = 1.0;
        for k in 0..10 {
            if k > 0 {
                fact *= k as f64;
            }
            let p = (-nbar).exp() * nbar.powi(k as i32) / fact;
            assert_abs_diff_eq!(psi[k].norm_sqr(), p, epsilon = 1e-12);
        }
    }

    #[test]
    fn displacement_shifts_ladder_on_low_block() {
        let d = 40;
        let alpha = C64::new(0.7, 0.5);
        let dm = displacement(alpha, d).unwrap();
        let a = ladder(d).unwrap();
        let shifted = dm.adjoint() * &a * &dm;
        let expect = &a + Matrix::identity(d, d) * alpha;
        let block = 15;
        let diff = (shifted - expect).view((0, 0), (block, block)).camax();
        assert!(diff < 1e-9, "{diff}");
    }

    #[test]
    fn displacement_composition_phase() {
        let d = 40;
        let (al, be) = (C64::new(0.8, 0.3), C64::new(-0.4, 0.6));
        let lhs = displacement(al, d).unwrap() * displacement(be, d).unwrap();
        let phase = ((al * be.conj() - al.conj() * be) * 0.5).exp();
        let rhs = displacement(al + be, d).unwrap() * phase;
        let block = 12;
        assert!((lhs - rhs).view((0, 0), (block, block)).camax() < 1e-8);
    }

    #[test]
    fn unitarity_on_low_block() {
        let d = 40;
        for u in [
            displacement(C64::new(1.2, -0.7), d).unwrap(),
            squeeze(C64::new(0.3, 0.2), d).unwrap(),
            rotation(0.77, d),
        ] {
            let uu = u.adjoint() * &u;
            let block = 15;
            let diff = (uu - Matrix::identity(d, d)).view((0, 0), (block, block)).camax();
            assert!(diff < 1e-9, "{diff}");
        }
        let r = qubit_rotation_y(0.4);
        assert!(max_diff(&(r.adjoint() * &r), &Matrix::identity(2, 2)) < 1e-15);
    }

    #[test]
    fn squeeze_variances() {
        let d = 60;
        assert!(max_diff(&squeeze(ZERO, d).unwrap(), &Matrix::identity(d, d)) < 1e-15);
        let r = 0.4;
        let psi = squeeze(C64::new(r, 0.0), d).unwrap() * fock(d, 0);
        let a = ladder(d).unwrap();
        let x = (&a + a.adjoint()) * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let p = (&a - a.adjoint()) * C64::new(0.0, -std::f64::consts::FRAC_1_SQRT_2);
        let vx = (psi.adjoint() * &x * &x * &psi)[(0, 0)].re;
        let vp = (psi.adjoint() * &p * &p * &psi)[(0, 0)].re;
        assert_abs_diff_eq!(vx, (2.0 * r).exp() / 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(vp, (-2.0 * r).exp() / 2.0, epsilon = 1e-10);
    }

    #[test]
    fn squeeze_inverse_pair() {
        let d = 30;
        let xi = C64::from_polar(0.5, 0.9);
        let prod = squeeze(xi, d).unwrap() * squeeze(-xi, d).unwrap();
        assert!(max_diff(&prod, &Matrix::identity(d, d)) < 1e-10);
    }

    #[test]
    fn rotation_properties() {
        let d = 8;
        assert!(max_diff(&rotation(0.0, d), &Matrix::identity(d, d)) < 1e-15);
        assert!(max_diff(&rotation(2.0 * std::f64::consts::PI, d), &Matrix::identity(d, d)) < 1e-12);
        let phi = 0.37;
        let r = rotation(phi, d);
        let a = ladder(d).unwrap();
        let lhs = r.adjoint() * &a * &r;
        assert!(max_diff(&lhs, &(&a * C64::from_polar(1.0, -phi))) < 1e-14);
    }

    #[test]
    fn qubit_rotation_algebra() {
        assert!(max_diff(&qubit_rotation_y(0.0), &Matrix::identity(2, 2)) < 1e-15);
        let theta: f64 = 0.83;
        let r = qubit_rotation_y(theta / 2.0);
        let lhs = r.adjoint() * pauli(PauliKind::Z) * &r;
        let rhs = pauli(PauliKind::Z) * C64::new(theta.cos(), 0.0) - pauli(PauliKind::X) * C64::new(theta.sin(), 0.0);
        assert!(max_diff(&lhs, &rhs) < 1e-15);
        // θ = π/2: |g⟩ → (|g⟩ − |e⟩)/√2
        let g = qubit_rotation_y(std::f64::consts::FRAC_PI_4) * qubit_ground();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(g[0].re, h, epsilon = 1e-15);
        assert_abs_diff_eq!(g[1].re, -h, epsilon = 1e-15);
    }

    #[test]
    fn density_matrix_validation() {
        let layout = HilbertLayout::single(FactorKind::Cavity, 3).unwrap();
        let mut m = Matrix::zeros(3, 3);
        m[(0, 0)] = C64::new(0.5, 0.0);
        assert!(DensityMatrix::new(layout.clone(), m.clone()).is_err());
        m[(1, 1)] = C64::new(0.5, 0.0);
        m[(0, 1)] = C64::new(0.1, 0.1);
        assert!(DensityMatrix::new(layout.clone(), m.clone()).is_err());
        m[(1, 0)] = C64::new(0.1, -0.1);
        let rho = DensityMatrix::new(layout, m).unwrap();
        assert!(rho.min_eigenvalue() > -1e-12);
    }

    #[test]
    fn layout_validation() {
        assert!(HilbertLayout::from_pairs(&[(FactorKind::Cavity, 3), (FactorKind::Cavity, 3)]).is_err());
        assert!(HilbertLayout::from_pairs(&[(FactorKind::Qubit, 3)]).is_err());
        assert!(HilbertLayout::from_pairs(&[]).is_err());
        let l = HilbertLayout::from_pairs(&[(FactorKind::Cavity, 3), (FactorKind::Qubit, 2), (FactorKind::Mech, 4)]).unwrap();
        assert_eq!(l.dim(), 24);
    }
}

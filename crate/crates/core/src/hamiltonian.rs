//! Hamiltonians as sums of normal-ordered monomials.
//!
//! A term is `c · e^{iωt} · a†^m a^n ⊗ X ⊗ b†^p b^q`, where `X` is a small
//! dense matrix on the qubit or transmon factor. Displacing the cavity or
//! mechanics is then a binomial expansion of each monomial, which stays
//! normal ordered and never touches a dense conjugation.

use crate::error::{Result, SimError};
use crate::fockops::{ladder, FactorKind, HilbertLayout, Matrix, Operator, C64, ZERO};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coeff: C64,
    /// Angular frequency of the e^{iωt} factor; zero for static terms.
    pub omega: f64,
    /// (m, n) in a†^m a^n.
    pub cav: (u32, u32),
    /// (p, q) in b†^p b^q.
    pub mech: (u32, u32),
    /// Operator on the qubit/transmon factor.
    pub aux: Option<Matrix>,
}

impl Term {
    pub fn new(coeff: C64) -> Self {
        Self { coeff, omega: 0.0, cav: (0, 0), mech: (0, 0), aux: None }
    }

    pub fn real(c: f64) -> Self {
        Self::new(C64::new(c, 0.0))
    }

    pub fn cav(mut self, m: u32, n: u32) -> Self {
        self.cav = (m, n);
        self
    }

    pub fn mech(mut self, p: u32, q: u32) -> Self {
        self.mech = (p, q);
        self
    }

    pub fn aux(mut self, x: Matrix) -> Self {
        self.aux = Some(x);
        self
    }

    pub fn oscillating(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn adjoint(&self) -> Self {
        Self {
            coeff: self.coeff.conj(),
            omega: -self.omega,
            cav: (self.cav.1, self.cav.0),
            mech: (self.mech.1, self.mech.0),
            aux: self.aux.as_ref().map(|x| x.adjoint()),
        }
    }

    fn is_scalar(&self) -> bool {
        self.cav == (0, 0) && self.mech == (0, 0) && self.aux.is_none()
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Expands x†^m x^n under x → x + z into Σ c_{jk} x†^j x^k.
fn expand_monomial(m: u32, n: u32, z: C64) -> Vec<(u32, u32, C64)> {
    let mut out = Vec::new();
    for j in 0..=m {
        for k in 0..=n {
            let c = binomial(m, j) * binomial(n, k);
            let w = z.conj().powu(m - j) * z.powu(n - k) * c;
            if w != ZERO {
                out.push((j, k, w));
            }
        }
    }
    out
}

/// Time-dependent Hermitian operator H(t) = H_0 + Σ_k e^{iω_k t} M_k.
#[derive(Debug, Clone)]
pub struct Generator {
    pub static_part: SparseMatrix,
    pub oscillating: Vec<(f64, SparseMatrix)>,
}

impl Generator {
    pub fn dim(&self) -> usize {
        self.static_part.dim()
    }

    pub fn is_static(&self) -> bool {
        self.oscillating.is_empty()
    }

    /// Y += s·H(t)·X
    pub fn apply_acc(&self, t: f64, s: C64, x: &Matrix, y: &mut Matrix) {
        self.static_part.mul_dense_acc(s, x, y);
        for (w, m) in &self.oscillating {
            m.mul_dense_acc(s * C64::from_polar(1.0, w * t), x, y);
        }
    }

    /// y += s·H(t)·x on a single vector.
    pub fn apply_vec_acc(&self, t: f64, s: C64, x: &[C64], y: &mut [C64]) {
        self.static_part.mul_vec_acc(s, x, y);
        for (w, m) in &self.oscillating {
            m.mul_vec_acc(s * C64::from_polar(1.0, w * t), x, y);
        }
    }

    pub fn at(&self, t: f64) -> SparseMatrix {
        self.oscillating
            .iter()
            .fold(self.static_part.clone(), |acc, (w, m)| acc.add(&m.scale(C64::from_polar(1.0, w * t))))
    }

    /// Bound on the spectral width plus the fastest explicit modulation.
    pub fn stiffness(&self) -> f64 {
        let bound = self.oscillating.iter().fold(self.static_part.clone(), |acc, (_, m)| acc.add(m));
        let (lo, hi) = bound.gershgorin_interval();
        let extra: f64 = self.oscillating.iter().map(|(_, m)| m.gershgorin_interval().1.abs()).sum();
        let fastest = self.oscillating.iter().map(|(w, _)| w.abs()).fold(0.0, f64::max);
        (hi - lo) + 2.0 * extra + fastest
    }

    /// Subtracts c·I from the static part.
    pub fn shifted(&self, c: f64) -> Self {
        let n = self.dim();
        Self {
            static_part: self.static_part.sub(&SparseMatrix::identity(n).scale(C64::new(c, 0.0))),
            oscillating: self.oscillating.clone(),
        }
    }

    /// Midpoint of the Gershgorin interval of the static part.
    pub fn center(&self) -> f64 {
        let (lo, hi) = self.static_part.gershgorin_interval();
        0.5 * (lo + hi)
    }
}

#[derive(Debug, Clone)]
pub struct PolyHamiltonian {
    layout: HilbertLayout,
    aux_kind: Option<FactorKind>,
    terms: Vec<Term>,
}

impl PolyHamiltonian {
    pub fn new(layout: HilbertLayout) -> Self {
        let aux_kind = [FactorKind::Qubit, FactorKind::Transmon].into_iter().find(|k| layout.contains(*k));
        Self { layout, aux_kind, terms: Vec::new() }
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Adds a term that is Hermitian on its own.
    pub fn add(&mut self, t: Term) -> &mut Self {
        self.terms.push(t);
        self
    }

    /// Adds `t + t†`.
    pub fn add_with_adjoint(&mut self, t: Term) -> &mut Self {
        let adj = t.adjoint();
        self.terms.push(t);
        self.terms.push(adj);
        self
    }

    pub fn extend(&mut self, other: &PolyHamiltonian) -> Result<&mut Self> {
        self.layout.ensure_same(&other.layout)?;
        self.terms.extend(other.terms.iter().cloned());
        Ok(self)
    }

    /// D†(α, β) H D(α, β) by a → a + α, b → b + β.
    pub fn displaced(&self, alpha: C64, beta: C64) -> Self {
        let mut terms = Vec::new();
        for t in &self.terms {
            let cav = expand_monomial(t.cav.0, t.cav.1, alpha);
            let mech = expand_monomial(t.mech.0, t.mech.1, beta);
            for &(j, k, cw) in &cav {
                for &(p, q, mw) in &mech {
                    terms.push(Term {
                        coeff: t.coeff * cw * mw,
                        omega: t.omega,
                        cav: (j, k),
                        mech: (p, q),
                        aux: t.aux.clone(),
                    });
                }
            }
        }
        Self { layout: self.layout.clone(), aux_kind: self.aux_kind, terms }
    }

    fn local_power(kind: FactorKind, layout: &HilbertLayout, m: u32, n: u32) -> Result<Option<Matrix>> {
        if (m, n) == (0, 0) {
            return Ok(None);
        }
        let d = layout.factor_dim(kind)?;
        let a = ladder(d)?;
        let ad = a.adjoint();
        let mut out = Matrix::identity(d, d);
        for _ in 0..m {
            out = &out * &ad;
        }
        for _ in 0..n {
            out = &out * &a;
        }
        Ok(Some(out))
    }

    fn term_matrix(&self, t: &Term) -> Result<SparseMatrix> {
        let cav = Self::local_power(FactorKind::Cavity, &self.layout, t.cav.0, t.cav.1)?;
        let mech = Self::local_power(FactorKind::Mech, &self.layout, t.mech.0, t.mech.1)?;
        if t.aux.is_some() && self.aux_kind.is_none() {
            return Err(SimError::UnknownFactor(FactorKind::Qubit));
        }
        let mut m = SparseMatrix::identity(1);
        for f in self.layout.factors() {
            let local = match f.kind {
                FactorKind::Cavity => cav.as_ref(),
                FactorKind::Mech => mech.as_ref(),
                k if Some(k) == self.aux_kind => t.aux.as_ref(),
                _ => None,
            };
            let piece = match local {
                Some(x) => {
                    if x.nrows() != f.dim {
                        return Err(SimError::InvalidDimension { dim: x.nrows(), reason: "term operator does not match factor" });
                    }
                    SparseMatrix::from_dense(x)
                }
                None => SparseMatrix::identity(f.dim),
            };
            m = m.kron(&piece);
        }
        Ok(m.scale(t.coeff))
    }

    /// Sparse generator; scalar (identity) terms are dropped.
    pub fn assemble(&self) -> Result<Generator> {
        let n = self.layout.dim();
        let mut static_trip = Vec::new();
        let mut osc: Vec<(f64, Vec<(usize, usize, C64)>)> = Vec::new();
        for t in self.terms.iter().filter(|t| !t.is_scalar() && t.coeff != ZERO) {
            let m = self.term_matrix(t)?;
            if t.omega == 0.0 {
                static_trip.extend(m.iter());
            } else {
                match osc.iter_mut().find(|(w, _)| *w == t.omega) {
                    Some((_, v)) => v.extend(m.iter()),
                    None => osc.push((t.omega, m.iter().collect())),
                }
            }
        }
        let static_part = SparseMatrix::from_triplets(n, static_trip);
        let oscillating = osc.into_iter().map(|(w, v)| (w, SparseMatrix::from_triplets(n, v))).collect();
        let g = Generator { static_part, oscillating };
        let check = Operator::new(self.layout.clone(), g.at(0.37e-9))?;
        check.check_hermitian()?;
        Ok(g)
    }

    /// Full operator at time t including scalar offsets.
    pub fn operator_at(&self, t: f64) -> Result<Operator> {
        let n = self.layout.dim();
        let mut trip = Vec::new();
        for term in &self.terms {
            let phase = C64::from_polar(1.0, term.omega * t);
            if term.is_scalar() {
                trip.extend((0..n).map(|i| (i, i, term.coeff * phase)));
            } else {
                trip.extend(self.term_matrix(term)?.iter().map(|(r, c, v)| (r, c, v * phase)));
            }
        }
        Operator::new(self.layout.clone(), SparseMatrix::from_triplets(n, trip))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockops::{displacement, embed, pauli, PauliKind};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn conj_dense(h: &Matrix, layout: &HilbertLayout, alpha: C64, beta: C64) -> Matrix {
        let nc = layout.factor_dim(FactorKind::Cavity).unwrap();
        let nm = layout.factor_dim(FactorKind::Mech).unwrap();
        let da = embed(&displacement(alpha, nc).unwrap(), FactorKind::Cavity, layout).unwrap().to_dense();
        let db = embed(&displacement(beta, nm).unwrap(), FactorKind::Mech, layout).unwrap().to_dense();
        let d = da * db;
        d.adjoint() * h * d
    }

    #[test]
    fn free_cavity_gains_linear_drive() {
        let layout = HilbertLayout::single(FactorKind::Cavity, 8).unwrap();
        let mut h = PolyHamiltonian::new(layout.clone());
        h.add(Term::real(2.0).cav(1, 1));
        let alpha = c(0.4, 0.0);
        let hd = h.displaced(alpha, ZERO).operator_at(0.0).unwrap().to_dense();
        let a = ladder(8).unwrap();
        let expect = &a.adjoint() * &a * c(2.0, 0.0)
            + (&a + a.adjoint()) * c(0.8, 0.0)
            + Matrix::identity(8, 8) * c(2.0 * 0.16, 0.0);
        assert!((hd - expect).camax() < 1e-14);
    }

    #[test]
    fn zero_displacement_is_identity() {
        let layout = HilbertLayout::from_pairs(&[(FactorKind::Cavity, 4), (FactorKind::Qubit, 2), (FactorKind::Mech, 3)]).unwrap();
        let mut h = PolyHamiltonian::new(layout);
        h.add(Term::real(1.3).cav(1, 1).mech(1, 0)).add(Term::real(1.3).cav(1, 1).mech(0, 1));
        h.add_with_adjoint(Term::real(0.7).cav(1, 0).aux(pauli(PauliKind::Minus)));
        let a = h.operator_at(0.0).unwrap().to_dense();
        let b = h.displaced(ZERO, ZERO).operator_at(0.0).unwrap().to_dense();
        assert!((a - b).camax() < 1e-15);
    }

    #[test]
    fn optomechanical_substitution_matches_dense_conjugation() {
        let big = HilbertLayout::from_pairs(&[(FactorKind::Cavity, 20), (FactorKind::Mech, 20)]).unwrap();
        let mut h = PolyHamiltonian::new(big.clone());
        h.add(Term::real(1.0).cav(1, 1).mech(1, 0)).add(Term::real(1.0).cav(1, 1).mech(0, 1));
        let (alpha, beta) = (c(0.6, -0.3), c(0.2, 0.4));
        let sub = h.displaced(alpha, beta).operator_at(0.0).unwrap().to_dense();
        let dense = conj_dense(&h.operator_at(0.0).unwrap().to_dense(), &big, alpha, beta);
        // compare on the 6×6 low-Fock block of each mode
        let mut worst = 0.0f64;
        for i in 0..36 {
            for j in 0..36 {
                let r = (i / 6) * 20 + i % 6;
                let s = (j / 6) * 20 + j % 6;
                worst = worst.max((sub[(r, s)] - dense[(r, s)]).norm());
            }
        }
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn assemble_drops_scalars_and_groups_frequencies() {
        let layout = HilbertLayout::from_pairs(&[(FactorKind::Cavity, 3), (FactorKind::Qubit, 2)]).unwrap();
        let mut h = PolyHamiltonian::new(layout);
        h.add(Term::real(5.0));
        h.add_with_adjoint(Term::real(1.0).cav(1, 0).aux(pauli(PauliKind::Plus)).oscillating(3.0));
        let g = h.assemble().unwrap();
        assert_eq!(g.static_part.nnz(), 0);
        assert_eq!(g.oscillating.len(), 2);
        let t = 0.4;
        let full = h.operator_at(t).unwrap().to_dense() - Matrix::identity(6, 6) * c(5.0, 0.0);
        assert!((g.at(t).to_dense() - full).camax() < 1e-14);
    }

    #[test]
    fn non_hermitian_sum_is_rejected() {
        let layout = HilbertLayout::single(FactorKind::Cavity, 3).unwrap();
        let mut h = PolyHamiltonian::new(layout);
        h.add(Term::real(1.0).cav(1, 0));
        assert!(matches!(h.assemble(), Err(SimError::NonHermitian { .. })));
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(3, 0), 1.0);
        assert_eq!(binomial(2, 2), 1.0);
    }
}

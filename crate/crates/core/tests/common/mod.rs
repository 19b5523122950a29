//! Invariant checks shared by the property tests and the acceptance run.
#![allow(dead_code)]

use framesim::fockops::{displacement, fock, ladder, pauli, rotation, squeeze, FactorKind, HilbertLayout, Matrix, PauliKind, State, StateVector, C64};
use framesim::frames::{ChannelSpec, FrameModel, FrameStepper, StepperConfig};
use framesim::hamiltonian::{PolyHamiltonian, Term};
use framesim::theory::compose_squeezes;

pub const ZERO: C64 = C64::new(0.0, 0.0);

/// Parameters of a small driven, lossy cavity–qubit–mechanics instance.
#[derive(Debug, Clone, Copy)]
pub struct Instance {
    pub drive: f64,
    pub detuning: f64,
    pub g: f64,
    pub g0: f64,
    pub kappa: f64,
    pub gamma: f64,
}

impl Instance {
    pub fn layout(&self) -> HilbertLayout {
        HilbertLayout::from_pairs(&[(FactorKind::Cavity, 5), (FactorKind::Qubit, 2), (FactorKind::Mech, 4)]).unwrap()
    }

    /// Rotating-frame Hamiltonian in units where τ = 1.
    pub fn hamiltonian(&self, layout: &HilbertLayout) -> PolyHamiltonian {
        let mut h = PolyHamiltonian::new(layout.clone());
        h.add(Term::real(self.detuning).cav(1, 1));
        h.add(Term::real(0.5 * self.detuning).aux(pauli(PauliKind::Z)));
        h.add(Term::real(1.3).mech(1, 1));
        h.add_with_adjoint(Term::real(self.g).cav(1, 0).aux(pauli(PauliKind::Minus)));
        h.add(Term::real(-self.g0).cav(1, 1).mech(1, 0));
        h.add(Term::real(-self.g0).cav(1, 1).mech(0, 1));
        h.add_with_adjoint(Term::real(0.5 * self.drive).cav(1, 0));
        h
    }

    pub fn model(&self) -> FrameModel {
        let layout = self.layout();
        let channels = vec![ChannelSpec { kind: FactorKind::Cavity, rate: self.kappa }, ChannelSpec { kind: FactorKind::Qubit, rate: self.gamma }];
        FrameModel { hamiltonian: self.hamiltonian(&layout), channels }
    }
}

/// Largest violations seen while stepping a mixed state.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvolutionReport {
    pub trace_drift: f64,
    pub hermiticity: f64,
    pub min_eigenvalue: f64,
    pub max_offset: f64,
}

pub fn evolve_instance(inst: &Instance, intervals: usize) -> EvolutionReport {
    let model = inst.model();
    let layout = model.layout().clone();
    let psi = StateVector::product(layout, &[fock(5, 1), fock(2, 1), fock(4, 0)]).unwrap();
    let mut cfg = StepperConfig { tau: 1.0, leakage_limit: None, ..StepperConfig::default() };
    cfg.integrator.dt = 0.02;
    let mut st = FrameStepper::new(model, State::Pure(psi).into_mixed(), ZERO, ZERO, 0.0, cfg).unwrap();
    let mut rep = EvolutionReport::default();
    let a = ladder(5).unwrap();
    let b = ladder(4).unwrap();
    for _ in 0..intervals {
        st.step().unwrap();
        rep.min_eigenvalue = rep.min_eigenvalue.min(st.check_positivity());
        let State::Mixed(rho) = st.state() else { unreachable!() };
        rep.trace_drift = rep.trace_drift.max((rho.trace() - 1.0).abs());
        rep.hermiticity = rep.hermiticity.max(rho.hermiticity_defect());
        let da = rho.expect_local(&a, FactorKind::Cavity).unwrap().norm();
        let db = rho.expect_local(&b, FactorKind::Mech).unwrap().norm();
        rep.max_offset = rep.max_offset.max(da).max(db);
    }
    rep
}

/// ‖U†U − I‖_max for displacement and squeeze operators.
pub fn unitarity_defect(alpha: C64, xi: C64, dim: usize) -> f64 {
    let id = Matrix::identity(dim, dim);
    let d = displacement(alpha, dim).unwrap();
    let s = squeeze(xi, dim).unwrap();
    let dd = (d.adjoint() * &d - &id).camax();
    let ss = (s.adjoint() * &s - &id).camax();
    dd.max(ss)
}

/// Low-block distance between S(ξ1)S(ξ2) and S(ξ3)R(−θ), up to a global phase.
pub fn composition_defect(xi1: C64, xi2: C64) -> f64 {
    let d = 60;
    let lhs = squeeze(xi1, d).unwrap() * squeeze(xi2, d).unwrap();
    let (xi3, theta) = compose_squeezes(xi1, xi2);
    let rhs = squeeze(xi3, d).unwrap() * rotation(-theta, d);
    let phase = lhs[(0, 0)] / rhs[(0, 0)];
    let phase = phase / phase.norm();
    (&lhs - &rhs * phase).view((0, 0), (12, 12)).camax()
}

/// Hermiticity defect of the assembled Hamiltonian relative to its scale.
pub fn hamiltonian_defect(inst: &Instance) -> f64 {
    let layout = inst.layout();
    let h = inst.hamiltonian(&layout).operator_at(0.0).unwrap().to_dense();
    (&h - h.adjoint()).camax() / h.camax()
}

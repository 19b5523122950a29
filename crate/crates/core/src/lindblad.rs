//! Lindblad master equation: right-hand side and fixed-step RK4.
//!
//! Frequencies and rates are angular (rad/s) throughout; ħ = 1.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::fockops::{hermiticity_defect, DensityMatrix, Ket, Matrix, Operator, State, StateVector, C64, I, ONE};
use crate::hamiltonian::Generator;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseChannel {
    pub operator: Operator,
    pub rate: f64,
}

impl CollapseChannel {
    pub fn new(operator: Operator, rate: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(SimError::Config(format!("collapse rate must be finite and non-negative, got {rate}")));
        }
        Ok(Self { operator, rate })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    /// Nominal substep (s); refined when the generator is stiffer.
    pub dt: f64,
    /// Largest spectral-width × dt allowed per substep.
    pub phase_max: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { dt: 0.1e-9, phase_max: 0.5 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::Config(format!("integrator dt must be positive, got {}", self.dt)));
        }
        if !(self.phase_max > 0.0 && self.phase_max.is_finite()) {
            return Err(SimError::Config(format!("phase_max must be positive, got {}", self.phase_max)));
        }
        Ok(())
    }
}

pub const TRACE_DRIFT_LIMIT: f64 = 1e-9;
pub const HERMITICITY_DRIFT_LIMIT: f64 = 1e-9;
/// Relative per-interval norm change tolerated before renormalizing. RK4
/// damps the fastest components, so loss is allowed more slack than growth.
pub const NORM_GROWTH_LIMIT: f64 = 1e-4;
pub const NORM_LOSS_LIMIT: f64 = 1e-2;

/// LρL† − ½{L†L, ρ}
pub fn dissipator(l: &Operator, rho: &DensityMatrix) -> Result<Matrix> {
    l.layout().ensure_same(rho.layout())?;
    let lm = l.matrix();
    let lr = lm.mul_dense(rho.data());
    let jump = lm.mul_dense(&lr.adjoint()).adjoint();
    let ldl = lm.adjoint().matmul(lm);
    let k = ldl.mul_dense(rho.data());
    Ok(jump - (&k + k.adjoint()) * C64::new(0.5, 0.0))
}

/// −i[H, ρ] + Σ rate·𝒟[L]ρ
pub fn rhs(h: &Operator, channels: &[CollapseChannel], rho: &DensityMatrix) -> Result<Matrix> {
    h.layout().ensure_same(rho.layout())?;
    h.check_hermitian()?;
    let hr = h.matrix().mul_dense(rho.data());
    let mut out = (&hr - hr.adjoint()) * (-I);
    for ch in channels {
        out += dissipator(&ch.operator, rho)? * C64::new(ch.rate, 0.0);
    }
    Ok(out)
}

const ZERO_C: C64 = C64::new(0.0, 0.0);

/// y = x + h·k
fn axpy_into(y: &mut Matrix, x: &Matrix, k: &Matrix, h: f64) {
    for ((y, x), k) in y.iter_mut().zip(x.iter()).zip(k.iter()) {
        *y = x + k * h;
    }
}

/// m ← m + m†
fn hermitize(m: &mut Matrix) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..=j {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            m[(i, j)] = a + b.conj();
            m[(j, i)] = b + a.conj();
        }
    }
}

fn adjoint_in_place(m: &mut Matrix) {
    let n = m.nrows();
    for j in 0..n {
        m[(j, j)] = m[(j, j)].conj();
        for i in 0..j {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            m[(i, j)] = b.conj();
            m[(j, i)] = a.conj();
        }
    }
}

/// Precomputed Liouvillian pieces for repeated RK4 stages.
pub struct Propagator {
    gen: Generator,
    jumps: Vec<(f64, SparseMatrix)>,
    /// ½ Σ r L†L
    k: SparseMatrix,
    /// −i H_static − K, the static part of G
    g_static: SparseMatrix,
    /// (ω, −i H_ω)
    g_osc: Vec<(f64, SparseMatrix)>,
}

impl Propagator {
    pub fn new(gen: &Generator, channels: &[CollapseChannel]) -> Result<Self> {
        let n = gen.dim();
        let mut k = SparseMatrix::zeros(n);
        let mut jumps = Vec::new();
        for ch in channels.iter().filter(|c| c.rate > 0.0) {
            let l = ch.operator.matrix();
            if l.dim() != n {
                return Err(SimError::LayoutMismatch("collapse operator dimension differs from Hamiltonian".into()));
            }
            k = k.add(&l.adjoint().matmul(l).scale(C64::new(0.5 * ch.rate, 0.0)));
            jumps.push((ch.rate, l.clone()));
        }
        // a scalar shift leaves ρ dynamics untouched and keeps the ket phase slow
        let gen = gen.shifted(gen.center());
        let g_static = gen.static_part.scale(-I).sub(&k);
        let g_osc = gen.oscillating.iter().map(|(w, m)| (*w, m.scale(-I))).collect();
        Ok(Self { gen, jumps, k, g_static, g_osc })
    }

    pub fn is_lossless(&self) -> bool {
        self.jumps.is_empty()
    }

    /// Substep count for a span so that stiffness·dt ≤ phase_max.
    pub fn substeps(&self, span: f64, cfg: &IntegratorConfig) -> usize {
        let nominal = (span / cfg.dt).round().max(1.0);
        // a scalar part of K cancels against the jump terms, so only its spread counts
        let (lo, hi) = self.k.gershgorin_interval();
        let width = self.gen.stiffness() + 2.0 * (hi - lo);
        let needed = (span * width / cfg.phase_max).ceil();
        nominal.max(needed) as usize
    }

    fn rhs_mixed(&self, t: f64, rho: &Matrix, out: &mut Matrix, scratch: &mut Matrix) {
        out.fill(ZERO_C);
        // Gρ with G = −iH − K; then out = Gρ + (Gρ)†
        self.g_static.mul_dense_acc(ONE, rho, out);
        for (w, m) in &self.g_osc {
            m.mul_dense_acc(C64::from_polar(1.0, w * t), rho, out);
        }
        hermitize(out);
        for (r, l) in &self.jumps {
            scratch.fill(ZERO_C);
            l.mul_dense_acc(ONE, rho, scratch);
            adjoint_in_place(scratch);
            l.mul_dense_acc(C64::new(*r, 0.0), scratch, out);
        }
    }

    fn rhs_pure(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        self.gen.apply_vec_acc(t, -I, psi, out);
    }

    pub fn evolve_mixed(&self, rho: &mut Matrix, t0: f64, span: f64, cfg: &IntegratorConfig) -> Result<()> {
        let steps = self.substeps(span, cfg);
        let dt = span / steps as f64;
        let n = rho.nrows();
        let tr0 = rho.trace().re;
        let z = || Matrix::zeros(n, n);
        let (mut k1, mut k2, mut k3, mut k4) = (z(), z(), z(), z());
        let (mut y, mut scratch) = (z(), z());
        for s in 0..steps {
            let t = t0 + s as f64 * dt;
            self.rhs_mixed(t, rho, &mut k1, &mut scratch);
            axpy_into(&mut y, rho, &k1, 0.5 * dt);
            self.rhs_mixed(t + 0.5 * dt, &y, &mut k2, &mut scratch);
            axpy_into(&mut y, rho, &k2, 0.5 * dt);
            self.rhs_mixed(t + 0.5 * dt, &y, &mut k3, &mut scratch);
            axpy_into(&mut y, rho, &k3, dt);
            self.rhs_mixed(t + dt, &y, &mut k4, &mut scratch);
            let w = dt / 6.0;
            for (i, r) in rho.iter_mut().enumerate() {
                *r += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * w;
            }
        }
        let t_end = t0 + span;
        if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(SimError::IntegratorDivergence { time: t_end, reason: "non-finite density matrix".into() });
        }
        let drift = (rho.trace().re - tr0).abs();
        if drift > TRACE_DRIFT_LIMIT {
            return Err(SimError::IntegratorDivergence { time: t_end, reason: format!("trace drift {drift:e}") });
        }
        let herm = hermiticity_defect(rho);
        if herm > HERMITICITY_DRIFT_LIMIT {
            return Err(SimError::IntegratorDivergence { time: t_end, reason: format!("Hermiticity defect {herm:e}") });
        }
        Ok(())
    }

    pub fn evolve_pure(&self, psi: &mut Ket, t0: f64, span: f64, cfg: &IntegratorConfig) -> Result<()> {
        if !self.is_lossless() {
            return Err(SimError::Precondition("pure-state evolution requires zero collapse rates".into()));
        }
        let steps = self.substeps(span, cfg);
        let dt = span / steps as f64;
        let n = psi.len();
        let norm0 = psi.norm();
        let (mut k1, mut k2, mut k3, mut k4) = (vec![C64::default(); n], vec![C64::default(); n], vec![C64::default(); n], vec![C64::default(); n]);
        let mut y = vec![C64::default(); n];
        for s in 0..steps {
            let t = t0 + s as f64 * dt;
            let x = psi.as_slice();
            self.rhs_pure(t, x, &mut k1);
            y.iter_mut().zip(x).zip(&k1).for_each(|((y, x), k)| *y = x + k * (0.5 * dt));
            self.rhs_pure(t + 0.5 * dt, &y, &mut k2);
            y.iter_mut().zip(x).zip(&k2).for_each(|((y, x), k)| *y = x + k * (0.5 * dt));
            self.rhs_pure(t + 0.5 * dt, &y, &mut k3);
            y.iter_mut().zip(x).zip(&k3).for_each(|((y, x), k)| *y = x + k * dt);
            self.rhs_pure(t + dt, &y, &mut k4);
            let w = dt / 6.0;
            for (i, z) in psi.iter_mut().enumerate() {
                *z += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * w;
            }
        }
        let t_end = t0 + span;
        let norm = psi.norm();
        if !norm.is_finite() {
            return Err(SimError::IntegratorDivergence { time: t_end, reason: "non-finite state vector".into() });
        }
        let drift = (norm * norm - norm0 * norm0) / (norm0 * norm0);
        if drift > NORM_GROWTH_LIMIT || -drift > NORM_LOSS_LIMIT {
            return Err(SimError::IntegratorDivergence { time: t_end, reason: format!("norm drift {drift:e}") });
        }
        *psi *= C64::new(norm0 / norm, 0.0);
        Ok(())
    }

    /// Advances a state by `span` starting at absolute time `t0`.
    pub fn evolve(&self, state: &mut State, t0: f64, span: f64, cfg: &IntegratorConfig) -> Result<()> {
        if !(span > 0.0) {
            return Err(SimError::Precondition(format!("integration span must be positive, got {span}")));
        }
        cfg.validate()?;
        match state {
            State::Pure(s) => {
                if self.is_lossless() {
                    self.evolve_pure(s.data_mut(), t0, span, cfg)
                } else {
                    let mut rho = s.to_density();
                    self.evolve_mixed(rho.data_mut(), t0, span, cfg)?;
                    *state = State::Mixed(rho);
                    Ok(())
                }
            }
            State::Mixed(r) => self.evolve_mixed(r.data_mut(), t0, span, cfg),
        }
    }
}

/// One-shot propagation of ρ0 under H(t) and channels.
pub fn integrate(
    rho0: &DensityMatrix,
    gen: &Generator,
    channels: &[CollapseChannel],
    t0: f64,
    span: f64,
    cfg: &IntegratorConfig,
) -> Result<DensityMatrix> {
    let p = Propagator::new(gen, channels)?;
    let mut state = State::Mixed(rho0.clone());
    p.evolve(&mut state, t0, span, cfg)?;
    Ok(state.to_density())
}

/// Pure-state counterpart of [`integrate`].
pub fn integrate_pure(psi0: &StateVector, gen: &Generator, t0: f64, span: f64, cfg: &IntegratorConfig) -> Result<StateVector> {
    let p = Propagator::new(gen, &[])?;
    let mut state = State::Pure(psi0.clone());
    p.evolve(&mut state, t0, span, cfg)?;
    match state {
        State::Pure(s) => Ok(s),
        State::Mixed(_) => unreachable!("lossless propagation keeps kets"),
    }
}

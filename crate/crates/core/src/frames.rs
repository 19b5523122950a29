//! Interval-wise evolution in adaptively displaced cavity and mechanics
//! frames.
//!
//! After each interval of length τ the state is recentered by
//! δα = Tr[aρ], δβ = Tr[bρ]; the accumulated (α, β) shift the Hamiltonian
//! and the cavity loss operator for the next interval. The lab-frame state
//! is carried as the pair (ρ^D, α, β) and never materialized.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::fockops::{
    displacement, embed, ladder, FactorKind, HilbertLayout, Matrix, Operator, State, C64, ZERO,
};
use crate::hamiltonian::{PolyHamiltonian, Term};
use crate::io::{fmt_f64, CsvHeader};
use crate::lindblad::{CollapseChannel, IntegratorConfig, Propagator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub t: f64,
    pub delta_alpha: C64,
    pub delta_beta: C64,
    pub alpha: C64,
    pub beta: C64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameTrajectory {
    pub tau: f64,
    pub records: Vec<FrameRecord>,
}

impl FrameTrajectory {
    pub fn new(tau: f64) -> Self {
        Self { tau, records: Vec::new() }
    }

    pub fn last(&self) -> Option<&FrameRecord> {
        self.records.last()
    }

    pub const CSV_COLUMNS: [&'static str; 9] =
        ["t_ns", "re_dalpha", "im_dalpha", "re_dbeta", "im_dbeta", "re_alpha", "im_alpha", "re_beta", "im_beta"];

    pub fn write_csv<W: Write>(&self, mut w: W, header: &CsvHeader) -> std::io::Result<()> {
        header.write(&mut w)?;
        writeln!(w, "{}", Self::CSV_COLUMNS.join(","))?;
        for r in &self.records {
            let cols = [
                r.t * 1e9,
                r.delta_alpha.re,
                r.delta_alpha.im,
                r.delta_beta.re,
                r.delta_beta.im,
                r.alpha.re,
                r.alpha.im,
                r.beta.re,
                r.beta.im,
            ];
            writeln!(w, "{}", cols.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepperConfig {
    pub tau: f64,
    pub n_intervals: usize,
    pub recenter_mech: bool,
    /// Residual |⟨a⟩|, |⟨b⟩| allowed after recentering.
    pub recenter_tol: f64,
    /// Top-Fock population limit for cavity and mechanics; `None` disables the guard.
    pub leakage_limit: Option<f64>,
    /// Smallest-eigenvalue check every this many intervals (0 disables).
    pub positivity_every: usize,
    pub integrator: IntegratorConfig,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            tau: 1e-9,
            n_intervals: 1,
            recenter_mech: true,
            recenter_tol: 1e-7,
            leakage_limit: Some(5e-3),
            positivity_every: 0,
            integrator: IntegratorConfig::default(),
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(SimError::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if self.integrator.dt > self.tau * (1.0 + 1e-12) {
            return Err(SimError::Config("integrator dt exceeds interval length".into()));
        }
        self.integrator.validate()
    }
}

/// Loss on one factor's lowering operator (a, σ_−, q or b).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub kind: FactorKind,
    pub rate: f64,
}

/// Lab-frame description the stepper displaces each interval.
#[derive(Debug, Clone)]
pub struct FrameModel {
    pub hamiltonian: PolyHamiltonian,
    pub channels: Vec<ChannelSpec>,
}

impl FrameModel {
    pub fn layout(&self) -> &HilbertLayout {
        self.hamiltonian.layout()
    }
}

/// D†(α, β) H D(α, β) by polynomial substitution.
pub fn frame_hamiltonian(h: &PolyHamiltonian, alpha: C64, beta: C64) -> PolyHamiltonian {
    h.displaced(alpha, beta)
}

/// Collapse operators in the displaced frame: a → a + α, b → b + β.
pub fn frame_channels(specs: &[ChannelSpec], layout: &HilbertLayout, alpha: C64, beta: C64) -> Result<Vec<CollapseChannel>> {
    specs
        .iter()
        .filter(|s| s.rate > 0.0)
        .map(|s| {
            let d = layout.factor_dim(s.kind)?;
            let mut l = ladder(d)?;
            let shift = match s.kind {
                FactorKind::Cavity => alpha,
                FactorKind::Mech => beta,
                _ => ZERO,
            };
            for i in 0..d {
                l[(i, i)] += shift;
            }
            CollapseChannel::new(embed(&l, s.kind, layout)?, s.rate)
        })
        .collect()
}

/// Maximum corrective displacements applied in one recentering.
const MAX_RECENTER_PASSES: usize = 8;

/// Recenters cavity (and optionally mechanics) on ⟨a⟩, ⟨b⟩.
///
/// Returns the total displacement removed. Corrective passes repeat until
/// the residual is below `tol`, since a truncated displacement is exact
/// only on the low-Fock block.
pub fn recenter(state: &mut State, recenter_mech: bool, tol: f64, time: f64) -> Result<(C64, C64)> {
    let layout = state.layout().clone();
    let mut targets = vec![FactorKind::Cavity];
    if recenter_mech && layout.contains(FactorKind::Mech) {
        targets.push(FactorKind::Mech);
    }
    let mut total = [ZERO; 2];
    for (slot, kind) in targets.iter().enumerate() {
        let d = layout.factor_dim(*kind)?;
        let a = ladder(d)?;
        let mut residual = state.expect_local(&a, *kind)?;
        let mut passes = 0;
        while residual.norm() >= tol {
            if passes == MAX_RECENTER_PASSES {
                return Err(SimError::FrameDrift { time, residual: residual.norm(), tolerance: tol });
            }
            state.transform_local(&displacement(-residual, d)?, *kind)?;
            total[slot] += residual;
            residual = state.expect_local(&a, *kind)?;
            passes += 1;
        }
    }
    let lost = state.renormalize();
    if lost.abs() > 1e-12 {
        log::debug!("recentering at t = {time:e} s changed the trace by {lost:e}");
    }
    Ok((total[0], if targets.len() > 1 { total[1] } else { ZERO }))
}

/// Centered state plus accumulated frame amplitudes.
#[derive(Debug, Clone)]
pub struct Reconstructed {
    pub centered: State,
    pub alpha: C64,
    pub beta: C64,
}

impl Reconstructed {
    /// Lab-frame expectation of a normal-ordered monomial, evaluated on ρ^D.
    pub fn expect(&self, term: &Term) -> Result<C64> {
        let mut poly = PolyHamiltonian::new(self.centered.layout().clone());
        poly.add(term.clone());
        let shifted = poly.displaced(self.alpha, self.beta).operator_at(0.0)?;
        self.centered.expect(&shifted)
    }

    pub fn coherent_photons(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    pub fn coherent_phonons(&self) -> f64 {
        self.beta.norm_sqr()
    }
}

/// Runtime diagnostics collected by a stepper.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct StepperStats {
    pub intervals: usize,
    pub max_top_population_cav: f64,
    pub max_top_population_mech: f64,
    pub min_eigenvalue: f64,
    pub max_trace_loss: f64,
}

pub struct FrameStepper {
    model: FrameModel,
    cfg: StepperConfig,
    state: State,
    alpha: C64,
    beta: C64,
    t: f64,
    trajectory: FrameTrajectory,
    stats: StepperStats,
}

impl FrameStepper {
    /// Starts from a state that is recentered immediately; the removed
    /// amplitude seeds (α_0, β_0) on top of `alpha0`, `beta0`.
    pub fn new(model: FrameModel, mut state: State, alpha0: C64, beta0: C64, t0: f64, cfg: StepperConfig) -> Result<Self> {
        cfg.validate()?;
        model.layout().ensure_same(state.layout())?;
        let (da, db) = recenter(&mut state, cfg.recenter_mech, cfg.recenter_tol, t0)?;
        Ok(Self {
            model,
            cfg,
            state,
            alpha: alpha0 + da,
            beta: beta0 + db,
            t: t0,
            trajectory: FrameTrajectory::new(cfg.tau),
            stats: StepperStats { min_eigenvalue: f64::INFINITY, ..Default::default() },
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    pub fn beta(&self) -> C64 {
        self.beta
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    pub fn model(&self) -> &FrameModel {
        &self.model
    }

    pub fn trajectory(&self) -> &FrameTrajectory {
        &self.trajectory
    }

    pub fn stats(&self) -> StepperStats {
        self.stats
    }

    /// Swaps the lab-frame model (e.g. at a drive switch); state and frame
    /// amplitudes carry over unchanged.
    pub fn set_model(&mut self, model: FrameModel) -> Result<()> {
        model.layout().ensure_same(self.state.layout())?;
        self.model = model;
        Ok(())
    }

    /// Applies a unitary on one factor of the centered state.
    pub fn transform_local(&mut self, u: &Matrix, kind: FactorKind) -> Result<()> {
        self.state.transform_local(u, kind)
    }

    /// Advances one interval τ and returns the new record.
    pub fn step(&mut self) -> Result<FrameRecord> {
        let tau = self.cfg.tau;
        let layout = self.model.layout().clone();
        let h = frame_hamiltonian(&self.model.hamiltonian, self.alpha, self.beta).assemble()?;
        let channels = frame_channels(&self.model.channels, &layout, self.alpha, self.beta)?;
        let prop = Propagator::new(&h, &channels)?;
        prop.evolve(&mut self.state, self.t, tau, &self.cfg.integrator)?;
        let t_end = self.t + tau;
        self.check_leakage(t_end)?;
        let (da, db) = recenter(&mut self.state, self.cfg.recenter_mech, self.cfg.recenter_tol, t_end)?;
        self.alpha += da;
        self.beta += db;
        self.t = t_end;
        self.stats.intervals += 1;
        if self.cfg.positivity_every > 0 && self.stats.intervals % self.cfg.positivity_every == 0 {
            self.check_positivity();
        }
        let rec = FrameRecord { t: self.t, delta_alpha: da, delta_beta: db, alpha: self.alpha, beta: self.beta };
        self.trajectory.records.push(rec);
        Ok(rec)
    }

    /// Runs `n` intervals, calling `observe` after each one.
    pub fn run<F>(&mut self, n: usize, mut observe: F) -> Result<()>
    where
        F: FnMut(&FrameStepper, &FrameRecord) -> Result<()>,
    {
        for _ in 0..n {
            let rec = self.step()?;
            observe(self, &rec)?;
        }
        Ok(())
    }

    fn check_leakage(&mut self, time: f64) -> Result<()> {
        for kind in [FactorKind::Cavity, FactorKind::Mech] {
            if !self.state.layout().contains(kind) {
                continue;
            }
            let top = self.state.top_level_population(kind)?;
            let slot = match kind {
                FactorKind::Cavity => &mut self.stats.max_top_population_cav,
                _ => &mut self.stats.max_top_population_mech,
            };
            *slot = slot.max(top);
            if let Some(limit) = self.cfg.leakage_limit {
                if top > limit {
                    return Err(SimError::Leakage { time, factor: kind, occupation: top, limit });
                }
            }
        }
        Ok(())
    }

    /// Records the smallest eigenvalue; never modifies the state.
    pub fn check_positivity(&mut self) -> f64 {
        let ev = match &self.state {
            State::Pure(_) => 0.0,
            State::Mixed(r) => r.min_eigenvalue(),
        };
        self.stats.min_eigenvalue = self.stats.min_eigenvalue.min(ev);
        if ev < -crate::fockops::POSITIVITY_TOL {
            log::warn!("density matrix eigenvalue {ev:e} at t = {:e} s", self.t);
        }
        ev
    }

    pub fn reconstruct(&self) -> Reconstructed {
        Reconstructed { centered: self.state.clone(), alpha: self.alpha, beta: self.beta }
    }

    pub fn into_parts(self) -> (State, FrameTrajectory, C64, C64, f64) {
        (self.state, self.trajectory, self.alpha, self.beta, self.t)
    }
}

/// Frame-free reference: plain evolution of the full state under a
/// lab-frame model, in `n` intervals of τ.
pub fn brute_force(model: &FrameModel, state: &State, t0: f64, tau: f64, n: usize, cfg: &IntegratorConfig) -> Result<State> {
    let layout = model.layout();
    let h = model.hamiltonian.assemble()?;
    let channels = frame_channels(&model.channels, layout, ZERO, ZERO)?;
    let prop = Propagator::new(&h, &channels)?;
    let mut s = state.clone();
    for k in 0..n {
        prop.evolve(&mut s, t0 + k as f64 * tau, tau, cfg)?;
    }
    Ok(s)
}

/// Lab-frame operator for a monomial, for comparisons against full-space runs.
pub fn monomial_operator(layout: &HilbertLayout, term: &Term) -> Result<Operator> {
    let mut poly = PolyHamiltonian::new(layout.clone());
    poly.add(term.clone());
    poly.operator_at(0.0)
}

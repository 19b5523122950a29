//! The three-step transfer scheme (ring-up on resonance, non-adiabatic switch
//! to the red sideband, transfer for half a swap), the single-mode JC
//! experiments, the driven-cavity benchmark, model variants and sweeps.
//!
//! Superposition inputs such as |+⟩ carry their own ⟨a⟩, so their centered
//! frames drift apart from those of the vacuum. Their states are mapped into
//! the frames of a |0⟩ reference run before comparing with |P⟩, and the
//! reference run fixes the transfer drive and duration.

use std::io::Write;

use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    deformation_report, moments, phase_extract, phase_optimized_fidelity, recenter_mode, squeeze_about_mean, squeeze_extract, DeformationReport, SqueezeEstimate,
};
use crate::error::{Result, SimError};
use crate::fockops::{embed, fock, ladder, number, qubit_ground, DensityMatrix, FactorKind, HilbertLayout, Ket, Matrix, State, StateVector, C64};
use crate::frames::{FrameModel, FrameStepper, FrameTrajectory, StepperConfig, StepperStats};
use crate::hamiltonian::{PolyHamiltonian, Term};
use crate::io::{fmt_f64, CsvHeader};
use crate::models::{
    angular, dressed_params, initial_state, jc_hamiltonian, rabi_hamiltonian, rotated_displaced, stationary_drive, transfer_drive_amplitude,
    transmon_hamiltonian, CavityInit, DerivedScales, ModelParams, SwitchMoments,
};
use crate::theory;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Qubit model used for the cavity-QED part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Variant {
    #[default]
    Jc,
    Rabi,
    Transmon { anharmonicity_hz: f64 },
}

impl Variant {
    pub const NOMINAL_TRANSMON: Variant = Variant::Transmon { anharmonicity_hz: 200e6 };

    pub fn aux_kind(self) -> FactorKind {
        match self {
            Variant::Transmon { .. } => FactorKind::Transmon,
            _ => FactorKind::Qubit,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::Jc => "jc",
            Variant::Rabi => "rabi",
            Variant::Transmon { .. } => "transmon",
        }
    }

    pub fn hamiltonian(self, p: &ModelParams, layout: &HilbertLayout, omega_d: f64, e_c: C64) -> Result<PolyHamiltonian> {
        match self {
            Variant::Jc => jc_hamiltonian(p, layout, omega_d, e_c),
            Variant::Rabi => rabi_hamiltonian(p, layout, omega_d, e_c),
            Variant::Transmon { anharmonicity_hz } => transmon_hamiltonian(p, layout, angular(anharmonicity_hz), omega_d, e_c),
        }
    }

    /// Bound-state estimate ω_q/4K for the transmon.
    pub fn excitation_bound(self, p: &ModelParams) -> Option<f64> {
        match self {
            Variant::Transmon { anharmonicity_hz } => Some(p.omega_q_hz / (4.0 * anharmonicity_hz)),
            _ => None,
        }
    }

    fn validate(self) -> Result<()> {
        if let Variant::Transmon { anharmonicity_hz } = self {
            if !(anharmonicity_hz > 0.0 && anharmonicity_hz.is_finite()) {
                return Err(SimError::Config(format!("variant.anharmonicity_hz must be positive (Hz), got {anharmonicity_hz}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Truncation {
    pub n_cav: usize,
    pub n_mech: usize,
    pub n_transmon: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { n_cav: 20, n_mech: 15, n_transmon: 10 }
    }
}

impl Truncation {
    pub fn layout(&self, variant: Variant, with_mech: bool) -> Result<HilbertLayout> {
        let aux = match variant {
            Variant::Transmon { .. } => (FactorKind::Transmon, self.n_transmon),
            _ => (FactorKind::Qubit, 2),
        };
        let mut pairs = vec![(FactorKind::Cavity, self.n_cav), aux];
        if with_mech {
            pairs.push((FactorKind::Mech, self.n_mech));
        }
        HilbertLayout::from_pairs(&pairs)
    }
}

/// Rectangular on-resonance drive of amplitude 𝓔₁ for t_r.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ringup {
    pub e1_hz: f64,
    pub t_r_s: f64,
}

impl Ringup {
    /// Duration that reaches n_target = (𝓔₁t_r/2)² for a linear cavity.
    pub fn for_target(e1_hz: f64, n_target: f64) -> Self {
        Self { e1_hz, t_r_s: 2.0 * n_target.sqrt() / angular(e1_hz) }
    }

    pub fn n_target(&self) -> f64 {
        (0.5 * angular(self.e1_hz) * self.t_r_s).powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransferStep {
    /// `None` runs for t_swap = π/(2 g0|α|) with α at the switch.
    pub duration_s: Option<f64>,
    pub dry_run_periods: f64,
    /// Largest |α(t) − α(0)|/|α(0)| accepted in the dry run.
    pub drift_limit: f64,
}

impl Default for TransferStep {
    fn default() -> Self {
        Self { duration_s: None, dry_run_periods: 3.0, drift_limit: 0.02 }
    }
}

fn default_observe_every() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub model: ModelParams,
    pub init: CavityInit,
    pub ringup: Ringup,
    #[serde(default)]
    pub transfer: TransferStep,
    #[serde(default)]
    pub variant: Variant,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default)]
    pub stepper: StepperConfig,
    #[serde(default = "default_observe_every")]
    pub observe_every: usize,
}

impl ProtocolConfig {
    pub fn new(model: ModelParams, init: CavityInit, ringup: Ringup) -> Self {
        Self {
            model,
            init,
            ringup,
            transfer: TransferStep::default(),
            variant: Variant::Jc,
            truncation: Truncation::default(),
            stepper: StepperConfig::default(),
            observe_every: default_observe_every(),
        }
    }

    /// Full-scale point: 𝓔₁/2π = 200 MHz up to n = 10⁶, g0/2π = 100 Hz.
    pub fn full_scale(init: CavityInit) -> Self {
        Self::new(ModelParams::nominal(), init, Ringup::for_target(200e6, 1e6))
    }

    /// Same g_OM with g0/2π = 1 kHz and n = 10⁴, so the ring-up is 10× shorter.
    pub fn scaled(init: CavityInit) -> Self {
        let model = ModelParams { g0_hz: 1e3, ..ModelParams::nominal() };
        Self::new(model, init, Ringup::for_target(200e6, 1e4))
    }

    /// Reads the ring-up (segment 0) and optional transfer (segment 1) from
    /// the model's drive segments. The transfer amplitude is always computed.
    pub fn from_model(model: ModelParams, init: CavityInit) -> Result<Self> {
        model.validate()?;
        let segs = &model.drive_segments;
        let first = segs
            .first()
            .ok_or_else(|| SimError::Config("model.drive_segments: the transfer scenario needs a ring-up segment (Hz, s)".into()))?;
        if (first.omega_d_hz - model.omega_cav_hz).abs() > 1e-6 * model.omega_cav_hz {
            return Err(SimError::Config(format!(
                "model.drive_segments[0].omega_d_hz: ring-up must drive at omega_cav_hz = {} Hz",
                model.omega_cav_hz
            )));
        }
        let ringup = Ringup { e1_hz: first.amplitude().norm() / angular(1.0), t_r_s: first.duration() };
        let mut cfg = Self::new(model.clone(), init, ringup);
        if let Some(second) = segs.get(1) {
            let target = model.omega_cav_hz - model.omega_m_hz;
            if (second.omega_d_hz - target).abs() > 1e-6 * model.omega_cav_hz {
                return Err(SimError::Config(format!(
                    "model.drive_segments[1].omega_d_hz: transfer must drive at omega_cav_hz - omega_m_hz = {target} Hz"
                )));
            }
            cfg.transfer.duration_s = Some(second.duration());
        }
        if segs.len() > 2 {
            return Err(SimError::Config("model.drive_segments: at most two segments (ring-up, transfer)".into()));
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.stepper.validate()?;
        self.variant.validate()?;
        if !(self.ringup.e1_hz >= 0.0 && self.ringup.t_r_s >= 0.0 && self.ringup.e1_hz.is_finite() && self.ringup.t_r_s.is_finite()) {
            return Err(SimError::Config("ringup.e1_hz (Hz) and ringup.t_r_s (s) must be non-negative".into()));
        }
        if let Some(d) = self.transfer.duration_s {
            if !(d > 0.0 && d.is_finite()) {
                return Err(SimError::Config(format!("transfer.duration_s must be positive (s), got {d}")));
            }
        }
        if self.observe_every == 0 {
            return Err(SimError::Config("observe_every must be at least 1".into()));
        }
        let t = &self.truncation;
        if t.n_cav < 2 || t.n_mech < 2 || (self.variant.aux_kind() == FactorKind::Transmon && t.n_transmon < 2) {
            return Err(SimError::Config("truncation dimensions must be at least 2".into()));
        }
        Ok(())
    }

    fn intervals(&self, span: f64) -> usize {
        (span / self.stepper.tau).round() as usize
    }
}

/// One row of observables.csv; `delta_phi` and `fidelity` compare the
/// cavity with |P⟩, while `aux_excitation` is ⟨σ_+σ_−⟩ or ⟨q†q⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observation {
    pub t: f64,
    pub n_cav_centered: f64,
    pub n_mech_centered: f64,
    pub squeeze_ratio: f64,
    pub delta_phi: f64,
    pub fidelity: f64,
    pub aux_excitation: f64,
}

pub const OBSERVATION_COLUMNS: [&str; 6] = ["t_ns", "n_cav_centered", "n_mech_centered", "squeeze_ratio", "delta_phi", "fidelity"];

pub fn write_observations_csv<W: Write>(w: W, header: &CsvHeader, rows: &[Observation]) -> std::io::Result<()> {
    let table: Vec<Vec<f64>> =
        rows.iter().map(|o| vec![o.t * 1e9, o.n_cav_centered, o.n_mech_centered, o.squeeze_ratio, o.delta_phi, o.fidelity]).collect();
    crate::io::write_table(w, header, &OBSERVATION_COLUMNS, &table)
}

/// Frame amplitudes (α, β) after k intervals; entry 0 is the initial frame.
pub type FrameTrack = Vec<(C64, C64)>;

fn track_of(stepper: &FrameStepper, initial: (C64, C64)) -> FrameTrack {
    std::iter::once(initial).chain(stepper.trajectory().records.iter().map(|r| (r.alpha, r.beta))).collect()
}

fn reduced(state: &State, kind: FactorKind) -> Result<Option<Matrix>> {
    if state.layout().contains(kind) {
        Ok(Some(state.partial_trace(kind)?))
    } else {
        Ok(None)
    }
}

fn observe(st: &FrameStepper, init: CavityInit, reference: Option<&FrameTrack>, aux: FactorKind) -> Result<Observation> {
    let state = st.state();
    let cav = state.partial_trace(FactorKind::Cavity)?;
    let (_, _, n_cav) = moments(&cav)?;
    let n_mech = match reduced(state, FactorKind::Mech)? {
        Some(m) => moments(&m)?.2,
        None => 0.0,
    };
    let squeeze_ratio = squeeze_extract(&cav)?.ratio;
    let mapped = match reference.and_then(|r| r.get(st.trajectory().records.len())) {
        Some(&(a_ref, _)) => recenter_mode(&cav, st.alpha(), a_ref)?,
        None => cav,
    };
    let phase = phase_extract(&mapped, init)?;
    let aux_excitation = if state.layout().contains(aux) {
        state.expect_local(&number(state.layout().factor_dim(aux)?), aux)?.re
    } else {
        0.0
    };
    Ok(Observation {
        t: st.time(),
        n_cav_centered: n_cav,
        n_mech_centered: n_mech,
        squeeze_ratio,
        delta_phi: phase.delta_phi,
        fidelity: phase.fidelity,
        aux_excitation,
    })
}

fn run_observed(
    st: &mut FrameStepper,
    n: usize,
    every: usize,
    init: CavityInit,
    reference: Option<&FrameTrack>,
    aux: FactorKind,
    out: &mut Vec<Observation>,
) -> Result<()> {
    for k in 1..=n {
        st.step()?;
        if k % every == 0 || k == n {
            out.push(observe(st, init, reference, aux)?);
        }
    }
    Ok(())
}

pub struct RingupOutcome {
    pub stepper: FrameStepper,
    pub initial_frame: (C64, C64),
    pub observations: Vec<Observation>,
}

/// Evolves |P⟩ ⊗ |g⟩ ⊗ |0⟩ under the on-resonance drive for t_r.
pub fn run_ringup(cfg: &ProtocolConfig, reference: Option<&FrameTrack>) -> Result<RingupOutcome> {
    cfg.validate()?;
    let p = &cfg.model;
    let layout = cfg.truncation.layout(cfg.variant, true)?;
    let omega_d = p.omega_cav();
    let e1 = C64::new(angular(cfg.ringup.e1_hz), 0.0);
    let model = FrameModel { hamiltonian: cfg.variant.hamiltonian(p, &layout, omega_d, e1)?, channels: p.channels(&layout) };
    let psi = initial_state(&layout, cfg.init, None)?;
    let mut stepper = FrameStepper::new(model, State::Pure(psi), ZERO, ZERO, 0.0, cfg.stepper)?;
    let initial_frame = (stepper.alpha(), stepper.beta());
    let aux = cfg.variant.aux_kind();
    let mut observations = vec![observe(&stepper, cfg.init, reference, aux)?];
    let n = cfg.intervals(cfg.ringup.t_r_s);
    run_observed(&mut stepper, n, cfg.observe_every, cfg.init, reference, aux, &mut observations)?;
    Ok(RingupOutcome { stepper, initial_frame, observations })
}

/// Transfer drive and duration; taken from the reference run when there is one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwitchReport {
    pub t_switch: f64,
    pub alpha: C64,
    pub beta: C64,
    pub sigma_minus: C64,
    pub omega_d: f64,
    pub e2: C64,
    /// Relative |⟨a⟩| excursion in the g0 = 0 dry run.
    pub drift: f64,
    pub g_om: f64,
    pub duration: f64,
}

/// Dominant eigenvector of a Hermitian matrix.
fn dominant_vector(rho: &Matrix) -> Ket {
    let eig = SymmetricEigen::new(rho.clone());
    let k = eig.eigenvalues.imax();
    eig.eigenvectors.column(k).into_owned()
}

/// Runs the switched drive without optomechanics or loss on
/// |0⟩_cav ⊗ (dominant aux state) for a few mechanical periods and returns
/// max_t |α(t) − α(0)| / max(|α(0)|, 1).
pub fn dry_run_drift(cfg: &ProtocolConfig, alpha: C64, aux_state: &Matrix, e2: C64, omega_d: f64, t0: f64) -> Result<f64> {
    let p = ModelParams { g0_hz: 0.0, kappa_hz: 0.0, gamma_hz: 0.0, ..cfg.model.clone() };
    let layout = cfg.truncation.layout(cfg.variant, false)?;
    let model = FrameModel { hamiltonian: cfg.variant.hamiltonian(&p, &layout, omega_d, e2)?, channels: Vec::new() };
    let psi = initial_state(&layout, CavityInit::Zero, Some(&dominant_vector(aux_state)))?;
    // only α is tracked here; a badly mismatched drive may spread the state freely
    let stepper_cfg = StepperConfig { recenter_mech: false, leakage_limit: None, recenter_tol: cfg.stepper.recenter_tol.max(1e-3), ..cfg.stepper };
    let mut st = FrameStepper::new(model, State::Pure(psi), alpha, ZERO, t0, stepper_cfg)?;
    let a0 = st.alpha();
    let span = cfg.transfer.dry_run_periods * std::f64::consts::TAU / p.omega_m();
    let scale = a0.norm().max(1.0);
    let mut drift: f64 = 0.0;
    for _ in 0..cfg.intervals(span).max(1) {
        let rec = match st.step() {
            Ok(rec) => rec,
            Err(SimError::FrameDrift { .. }) => return Ok(f64::INFINITY),
            Err(e) => return Err(e),
        };
        drift = drift.max((rec.alpha - a0).norm() / scale);
    }
    Ok(drift)
}

fn transfer_model(cfg: &ProtocolConfig, layout: &HilbertLayout, omega_d: f64, e2: C64) -> Result<FrameModel> {
    Ok(FrameModel { hamiltonian: cfg.variant.hamiltonian(&cfg.model, layout, omega_d, e2)?, channels: cfg.model.channels(layout) })
}

/// Switches the drive to ω_cav − Ω_m. The state is untouched; frame
/// amplitudes carry over as they are at the switch instant. Without a
/// `plan` the amplitude follows from the current moments and is checked by
/// a dry run; otherwise the planned drive and duration are used verbatim.
pub fn switch_to_transfer(stepper: &mut FrameStepper, cfg: &ProtocolConfig, plan: Option<&SwitchReport>) -> Result<SwitchReport> {
    let p = &cfg.model;
    let omega_d = p.omega_cav() - p.omega_m();
    let layout = stepper.model().layout().clone();
    let report = match plan {
        Some(plan) => SwitchReport { t_switch: stepper.time(), alpha: stepper.alpha(), beta: stepper.beta(), ..*plan },
        None => {
            let state = stepper.state();
            let aux = cfg.variant.aux_kind();
            let lower = ladder(layout.factor_dim(aux)?)?;
            let a = stepper.alpha() + state.expect_local(&ladder(cfg.truncation.n_cav)?, FactorKind::Cavity)?;
            let b = stepper.beta() + state.expect_local(&ladder(cfg.truncation.n_mech)?, FactorKind::Mech)?;
            let sigma_minus = state.expect_local(&lower, aux)?;
            let e2 = transfer_drive_amplitude(&SwitchMoments { a, b, sigma_minus }, p, omega_d);
            let drift = dry_run_drift(cfg, stepper.alpha(), &state.partial_trace(aux)?, e2, omega_d, stepper.time())?;
            if drift > cfg.transfer.drift_limit {
                return Err(SimError::MisconfiguredSwitch { drift, limit: cfg.transfer.drift_limit });
            }
            let g_om = DerivedScales::g_om(p, a);
            let duration = match cfg.transfer.duration_s {
                Some(d) => d,
                None if g_om > 0.0 => std::f64::consts::PI / (2.0 * g_om),
                None => return Err(SimError::Config("transfer.duration_s is required when g0|α| = 0".into())),
            };
            SwitchReport { t_switch: stepper.time(), alpha: a, beta: b, sigma_minus, omega_d, e2, drift, g_om, duration }
        }
    };
    stepper.set_model(transfer_model(cfg, &layout, report.omega_d, report.e2)?)?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct TransferResult {
    pub init: CavityInit,
    pub variant: Variant,
    pub trajectory: FrameTrajectory,
    pub frames: FrameTrack,
    pub observations: Vec<Observation>,
    pub switch: SwitchReport,
    /// Reduced mechanical state in the (reference) displaced frame.
    pub mech_state: Matrix,
    pub mech_fidelity: f64,
    pub mech_delta_phi: f64,
    /// Cavity reduced state at the switch, in the (reference) frame.
    pub cavity_at_switch: Matrix,
    pub ringup_intervals: usize,
    pub stats: StepperStats,
}

impl TransferResult {
    pub fn n_cav_series(&self) -> Vec<(f64, f64)> {
        self.observations.iter().map(|o| (o.t, o.n_cav_centered)).collect()
    }

    pub fn n_mech_series(&self) -> Vec<(f64, f64)> {
        self.observations.iter().map(|o| (o.t, o.n_mech_centered)).collect()
    }

    /// (mean, max) of the qubit/transmon excitation during ring-up.
    pub fn ringup_aux_excitation(&self, t_switch: f64) -> (f64, f64) {
        let xs: Vec<f64> = self.observations.iter().filter(|o| o.t <= t_switch).map(|o| o.aux_excitation).collect();
        let mean = xs.iter().sum::<f64>() / xs.len().max(1) as f64;
        (mean, xs.iter().copied().fold(0.0, f64::max))
    }
}

/// Evolves for the switch duration and extracts the mechanical state.
pub fn run_transfer(
    cfg: &ProtocolConfig,
    ringup: RingupOutcome,
    plan: Option<&SwitchReport>,
    reference: Option<&FrameTrack>,
) -> Result<TransferResult> {
    let RingupOutcome { mut stepper, initial_frame, mut observations } = ringup;
    let ringup_intervals = stepper.trajectory().records.len();
    let cav = stepper.state().partial_trace(FactorKind::Cavity)?;
    let cavity_at_switch = match reference.and_then(|r| r.get(ringup_intervals)) {
        Some(&(a_ref, _)) => recenter_mode(&cav, stepper.alpha(), a_ref)?,
        None => cav,
    };
    let switch = switch_to_transfer(&mut stepper, cfg, plan)?;
    let n = cfg.intervals(switch.duration);
    run_observed(&mut stepper, n, cfg.observe_every, cfg.init, reference, cfg.variant.aux_kind(), &mut observations)?;
    let mech = stepper.state().partial_trace(FactorKind::Mech)?;
    let k = stepper.trajectory().records.len();
    let mech_state = match reference.and_then(|r| r.get(k)) {
        Some(&(_, b_ref)) => recenter_mode(&mech, stepper.beta(), b_ref)?,
        None => mech,
    };
    let est = phase_optimized_fidelity(&mech_state, &cfg.init.ket(mech_state.nrows()))?;
    let frames = track_of(&stepper, initial_frame);
    let stats = stepper.stats();
    let (_, trajectory, ..) = stepper.into_parts();
    Ok(TransferResult {
        init: cfg.init,
        variant: cfg.variant,
        trajectory,
        frames,
        observations,
        switch,
        mech_state,
        mech_fidelity: est.fidelity,
        mech_delta_phi: est.delta_phi,
        cavity_at_switch,
        ringup_intervals,
        stats,
    })
}

pub struct ProtocolOutcome {
    pub result: TransferResult,
    /// The |0⟩ run used for frames and drive schedule, for superposition inputs.
    pub reference: Option<TransferResult>,
}

fn run_single(cfg: &ProtocolConfig, plan: Option<&SwitchReport>, reference: Option<&FrameTrack>) -> Result<TransferResult> {
    let ringup = run_ringup(cfg, reference)?;
    run_transfer(cfg, ringup, plan, reference)
}

/// Ring-up, switch and transfer for `cfg.init`.
pub fn run_protocol(cfg: &ProtocolConfig) -> Result<ProtocolOutcome> {
    cfg.validate()?;
    if cfg.init.is_rotation_invariant() {
        return Ok(ProtocolOutcome { result: run_single(cfg, None, None)?, reference: None });
    }
    let ref_cfg = ProtocolConfig { init: CavityInit::Zero, ..cfg.clone() };
    let reference = run_single(&ref_cfg, None, None)?;
    let result = run_single(cfg, Some(&reference.switch), Some(&reference.frames))?;
    Ok(ProtocolOutcome { result, reference: Some(reference) })
}

/// Variant run with its validity report.
#[derive(Debug, Clone, Serialize)]
pub struct VariantReport {
    pub variant: Variant,
    pub mech_fidelity: f64,
    pub mean_aux_excitation: f64,
    pub max_aux_excitation: f64,
    pub excitation_bound: Option<f64>,
    /// The transmon left the bound-state estimate.
    pub flagged: bool,
}

pub fn run_variant(variant: Variant, cfg: &ProtocolConfig) -> Result<(ProtocolOutcome, VariantReport)> {
    let cfg = ProtocolConfig { variant, ..cfg.clone() };
    let out = run_protocol(&cfg)?;
    let (mean, max) = out.result.ringup_aux_excitation(out.result.switch.t_switch);
    let bound = variant.excitation_bound(&cfg.model);
    let flagged = bound.is_some_and(|b| max >= b);
    if flagged {
        log::warn!("transmon excitation {max:.3} reached the bound-state estimate {:.3}", bound.unwrap_or_default());
    }
    let report = VariantReport {
        variant,
        mech_fidelity: out.result.mech_fidelity,
        mean_aux_excitation: mean,
        max_aux_excitation: max,
        excitation_bound: bound,
        flagged,
    };
    Ok((out, report))
}

/// Grid of protocol points; an empty list keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    pub kappa_hz: Vec<f64>,
    pub gamma_hz: Vec<f64>,
    /// Ring-up amplitudes; t_r is rescaled to keep the target photon number.
    pub e1_hz: Vec<f64>,
    pub variants: Vec<Variant>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub kappa_hz: f64,
    pub gamma_hz: f64,
    pub e1_hz: f64,
    pub variant: Variant,
    pub mech_fidelity: Option<f64>,
    pub g_om_hz: Option<f64>,
    pub error: Option<String>,
}

impl SweepGrid {
    pub fn points(&self, base: &ProtocolConfig) -> Vec<ProtocolConfig> {
        let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
        let variants = if self.variants.is_empty() { vec![base.variant] } else { self.variants.clone() };
        let n_target = base.ringup.n_target();
        let mut out = Vec::new();
        for &variant in &variants {
            for &e1 in &or(&self.e1_hz, base.ringup.e1_hz) {
                for &kappa in &or(&self.kappa_hz, base.model.kappa_hz) {
                    for &gamma in &or(&self.gamma_hz, base.model.gamma_hz) {
                        let mut c = base.clone();
                        c.variant = variant;
                        c.model.kappa_hz = kappa;
                        c.model.gamma_hz = gamma;
                        if e1 != base.ringup.e1_hz {
                            c.ringup = Ringup::for_target(e1, n_target);
                        }
                        out.push(c);
                    }
                }
            }
        }
        out
    }
}

/// Worker count from FRAMESIM_THREADS, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("FRAMESIM_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs every grid point in a work pool; failures are recorded per row.
pub fn sweep(base: &ProtocolConfig, grid: &SweepGrid, threads: Option<usize>) -> Result<Vec<SweepRow>> {
    let points = grid.points(base);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| SimError::Config(format!("thread pool: {e}")))?;
    let mut rows: Vec<SweepRow> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(index, c)| {
                let run = run_protocol(c);
                let (mech_fidelity, g_om_hz, error) = match run {
                    Ok(o) => (Some(o.result.mech_fidelity), Some(o.result.switch.g_om / angular(1.0)), None),
                    Err(e) => (None, None, Some(e.to_string())),
                };
                SweepRow {
                    index,
                    kappa_hz: c.model.kappa_hz,
                    gamma_hz: c.model.gamma_hz,
                    e1_hz: c.ringup.e1_hz,
                    variant: c.variant,
                    mech_fidelity,
                    g_om_hz,
                    error,
                }
            })
            .collect()
    });
    rows.sort_by_key(|r| r.index);
    Ok(rows)
}

pub const SWEEP_COLUMNS: [&str; 8] = ["index", "kappa_hz", "gamma_hz", "e1_hz", "variant", "mech_fidelity", "g_om_hz", "error"];

pub fn write_sweep_csv<W: Write>(mut w: W, header: &CsvHeader, rows: &[SweepRow]) -> std::io::Result<()> {
    header.write(&mut w)?;
    writeln!(w, "{}", SWEEP_COLUMNS.join(","))?;
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    for r in rows {
        let err = r.error.as_deref().map(|e| format!("\"{}\"", e.replace('"', "'"))).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.index,
            fmt_f64(r.kappa_hz),
            fmt_f64(r.gamma_hz),
            fmt_f64(r.e1_hz),
            r.variant.label(),
            opt(r.mech_fidelity),
            opt(r.g_om_hz),
            err
        )?;
    }
    Ok(())
}

/// Least-squares slope and intercept.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fits y = A e^{−bx}; returns (A, b, R²).
pub fn fit_exponential_decay(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let amp = |b: f64| {
        let (num, den) = x.iter().zip(y).fold((0.0, 0.0), |(n, d), (&xi, &yi)| {
            let e = (-b * xi).exp();
            (n + yi * e, d + e * e)
        });
        num / den
    };
    let sse = |b: f64| {
        let a = amp(b);
        x.iter().zip(y).map(|(&xi, &yi)| (yi - a * (-b * xi).exp()).powi(2)).sum::<f64>()
    };
    let xmax = x.iter().copied().fold(f64::MIN_POSITIVE, f64::max);
    // scan log-spaced rates, then refine
    let grid: Vec<f64> = (0..=400).map(|k| 10f64.powf(-3.0 + 6.0 * k as f64 / 400.0) / xmax).collect();
    let k = (0..grid.len()).min_by(|&i, &j| sse(grid[i]).total_cmp(&sse(grid[j]))).unwrap_or(0);
    let (mut lo, mut hi) = (grid[k.saturating_sub(1)], grid[(k + 1).min(grid.len() - 1)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    while hi - lo > 1e-12 * hi {
        let (c, d) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if sse(c) < sse(d) {
            hi = d;
        } else {
            lo = c;
        }
    }
    let b = 0.5 * (lo + hi);
    let my = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    (amp(b), b, 1.0 - sse(b) / sst)
}

fn unwrap_phases(xs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut offset = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        if i > 0 {
            let d = x - xs[i - 1];
            offset -= std::f64::consts::TAU * (d / std::f64::consts::TAU).round();
        }
        out.push(x + offset);
    }
    out
}

/// Displaced-JC run in the rotated-displaced frame at n_cav = |α|².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisplacedJcSpec {
    pub variant: Variant,
    pub n_cav: f64,
    pub duration_s: f64,
    pub samples: usize,
    pub n_cav_dim: usize,
    /// Adds the drive that cancels the g_z displacement term.
    pub compensate: bool,
}

#[derive(Debug, Clone)]
pub struct DisplacedJcRun {
    pub init: CavityInit,
    pub n_cav: f64,
    pub reports: Vec<DeformationReport>,
    /// Frame amplitude relative to α at each report.
    pub frames: Vec<C64>,
    pub final_cavity: Matrix,
}

/// Evolves |P⟩ ⊗ |g̃⟩ under the rotated-displaced Hamiltonian and reports
/// deformations at evenly spaced times. `reference` gives the |0⟩ run's frame
/// at each report time and is required for non-centered |P⟩.
pub fn run_displaced_jc_experiment(
    p: &ModelParams,
    spec: &DisplacedJcSpec,
    init: CavityInit,
    stepper: &StepperConfig,
    reference: Option<&[C64]>,
) -> Result<DisplacedJcRun> {
    if matches!(spec.variant, Variant::Transmon { .. }) {
        return Err(SimError::Config("displaced-JC experiment supports the jc and rabi variants".into()));
    }
    if spec.samples < 2 {
        return Err(SimError::Config("samples must be at least 2".into()));
    }
    let layout = HilbertLayout::from_pairs(&[(FactorKind::Cavity, spec.n_cav_dim), (FactorKind::Qubit, 2)])?;
    let alpha = C64::new(spec.n_cav.sqrt(), 0.0);
    let omega_d = p.omega_cav();
    let drive = if spec.compensate { stationary_drive(p, alpha, omega_d)? } else { ZERO };
    let dressed = dressed_params(p, alpha, omega_d)?;
    let h = rotated_displaced(&spec.variant.hamiltonian(p, &layout, omega_d, drive)?, alpha, &dressed.basis());
    let model = FrameModel { hamiltonian: h, channels: p.channels(&layout) };
    let psi = initial_state(&layout, init, None)?;
    let cfg = StepperConfig { recenter_mech: false, ..*stepper };
    let mut st = FrameStepper::new(model, State::Pure(psi), ZERO, ZERO, 0.0, cfg)?;
    let n = (spec.duration_s / cfg.tau).round().max(1.0) as usize;
    let marks: Vec<usize> = (0..spec.samples).map(|j| (j * n + (spec.samples - 1) / 2) / (spec.samples - 1)).collect();
    let mut reports = Vec::with_capacity(marks.len());
    let mut frames = Vec::with_capacity(marks.len());
    let mut last = Matrix::zeros(0, 0);
    let mut k = 0;
    for (j, &m) in marks.iter().enumerate() {
        while k < m {
            st.step()?;
            k += 1;
        }
        let cav = st.state().partial_trace(FactorKind::Cavity)?;
        let mapped = match reference {
            Some(r) => recenter_mode(&cav, st.alpha(), *r.get(j).ok_or_else(|| SimError::Precondition("reference shorter than sample grid".into()))?)?,
            None => cav,
        };
        reports.push(deformation_report(&mapped, init, st.time())?);
        frames.push(st.alpha());
        last = mapped;
    }
    Ok(DisplacedJcRun { init, n_cav: spec.n_cav, reports, frames, final_cavity: last })
}

/// Runs each |P⟩, using a |0⟩ run as the frame reference where needed.
pub fn displaced_jc_series(p: &ModelParams, spec: &DisplacedJcSpec, inits: &[CavityInit], stepper: &StepperConfig) -> Result<Vec<DisplacedJcRun>> {
    let zero = run_displaced_jc_experiment(p, spec, CavityInit::Zero, stepper, None)?;
    inits
        .iter()
        .map(|&init| match init {
            CavityInit::Zero => Ok(zero.clone()),
            i if i.is_rotation_invariant() => run_displaced_jc_experiment(p, spec, i, stepper, None),
            i => run_displaced_jc_experiment(p, spec, i, stepper, Some(&zero.frames)),
        })
        .collect()
}

/// χ and J from the short-time slopes Δφ ≈ −χt and |ξ| ≈ 2|J|t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiJFit {
    pub n_cav: f64,
    pub chi: f64,
    pub j: f64,
    pub chi_theory: f64,
    pub j_theory: f64,
}

/// Fits χ(n) and |J(n)| over a window of `window / |χ(n)|`.
pub fn fit_chi_j(p: &ModelParams, n_cav: f64, n_cav_dim: usize, window: f64, samples: usize, stepper: &StepperConfig) -> Result<ChiJFit> {
    let s = p.scales();
    let chi_theory = theory::chi_of_n(n_cav, s.chi0, s.n_crit);
    let j_theory = theory::j_of_n(n_cav, s.chi0, s.n_crit);
    let spec = DisplacedJcSpec {
        variant: Variant::Jc,
        n_cav,
        duration_s: window / chi_theory.abs(),
        samples,
        n_cav_dim,
        compensate: true,
    };
    let runs = displaced_jc_series(p, &spec, &CavityInit::ALL, stepper)?;
    let mut chis = Vec::new();
    let mut js = Vec::new();
    for run in &runs {
        let t: Vec<f64> = run.reports.iter().map(|r| r.t).collect();
        if run.init.is_rotation_invariant() {
            let r: Vec<f64> = run.reports.iter().map(|r| r.squeeze.map_or(0.0, |s| s.r)).collect();
            js.push(0.5 * linear_fit(&t, &r).0);
        } else {
            let phi: Vec<f64> = run.reports.iter().map(|r| r.delta_phi).collect();
            chis.push(-linear_fit(&t, &unwrap_phases(&phi)).0);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(ChiJFit { n_cav, chi: mean(&chis), j: mean(&js), chi_theory, j_theory: j_theory.abs() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DrivenJcResult {
    pub e_c: f64,
    pub n_target: f64,
    pub n_reached: f64,
    pub t_end: f64,
    /// False when the drive could not pass the dispersive barrier in time.
    pub reached: bool,
    /// Squeeze of the reduced cavity state.
    pub squeeze: SqueezeEstimate,
    /// Squeeze of the cavity conditioned on the adiabatic (dressed-ground) branch.
    pub branch_squeeze: SqueezeEstimate,
    /// Population left in the dressed-excited branch.
    pub excited_population: f64,
    /// e^{4|ξ|} of the cumulative-squeeze estimate at n_reached.
    pub theory_ratio: f64,
}

/// Drives |P⟩ ⊗ |g⟩ on resonance until |α|² ≥ n_target or `budget` times
/// the linear ring-up time has elapsed.
pub fn run_driven_jc_experiment(
    p: &ModelParams,
    init: CavityInit,
    e_c_hz: f64,
    n_target: f64,
    n_cav_dim: usize,
    budget: f64,
    stepper: &StepperConfig,
) -> Result<DrivenJcResult> {
    let layout = HilbertLayout::from_pairs(&[(FactorKind::Cavity, n_cav_dim), (FactorKind::Qubit, 2)])?;
    let e_c = angular(e_c_hz);
    let model = FrameModel { hamiltonian: jc_hamiltonian(p, &layout, p.omega_cav(), C64::new(e_c, 0.0))?, channels: p.channels(&layout) };
    let psi = initial_state(&layout, init, None)?;
    let cfg = StepperConfig { recenter_mech: false, ..*stepper };
    let mut st = FrameStepper::new(model, State::Pure(psi), ZERO, ZERO, 0.0, cfg)?;
    let t_max = budget * 2.0 * n_target.sqrt() / e_c;
    let max_steps = (t_max / cfg.tau).ceil() as usize;
    let mut reached = false;
    for _ in 0..max_steps {
        let rec = st.step()?;
        if rec.alpha.norm_sqr() >= n_target {
            reached = true;
            break;
        }
    }
    let n_reached = st.alpha().norm_sqr();
    let squeeze = squeeze_extract(&st.state().partial_trace(FactorKind::Cavity)?)?;
    let u = dressed_params(p, st.alpha(), p.omega_cav())?.basis();
    let (branch, excited_population) = dressed_branch_cavity(st.state(), &u)?;
    let branch_squeeze = squeeze_about_mean(&branch)?;
    let s = p.scales();
    let xi = theory::cumulative_squeeze(n_reached, s.n_crit, s.chi0, e_c);
    Ok(DrivenJcResult {
        e_c,
        n_target,
        n_reached,
        t_end: st.time(),
        reached,
        squeeze,
        branch_squeeze,
        excited_population,
        theory_ratio: (4.0 * xi).exp(),
    })
}

/// Cavity state conditioned on the dressed ground state of a cavity ⊗ qubit
/// state, with the dressed-excited population. `u` maps dressed to bare.
pub fn dressed_branch_cavity(state: &State, u: &Matrix) -> Result<(Matrix, f64)> {
    let mut rho = state.to_density();
    rho.conjugate_local(&u.adjoint(), FactorKind::Qubit)?;
    let layout = rho.layout().clone();
    let ground = qubit_ground();
    let proj = embed(&(&ground * ground.adjoint()), FactorKind::Qubit, &layout)?.to_dense();
    let m = &proj * rho.data() * &proj;
    let p_ground = m.trace().re;
    if !(p_ground > 0.0) {
        return Err(SimError::InvalidState("no population in the dressed ground branch".into()));
    }
    let cond = DensityMatrix::new(layout, m / C64::new(p_ground, 0.0))?;
    Ok((cond.partial_trace(FactorKind::Cavity)?, 1.0 - p_ground))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForcedJcRun {
    pub n_cav: f64,
    pub delta_c: f64,
    pub t: Vec<f64>,
    pub ratio: Vec<f64>,
    pub theory: Vec<f64>,
}

/// Coherent |α⟩ ⊗ dressed qubit under the red-detuned drive (Δ_c = Ω_m)
/// that holds α stationary; records the squeeze ratio every `every` intervals.
pub fn run_forced_jc_experiment(
    p: &ModelParams,
    n_cav: f64,
    duration: f64,
    n_cav_dim: usize,
    every: usize,
    stepper: &StepperConfig,
) -> Result<ForcedJcRun> {
    let layout = HilbertLayout::from_pairs(&[(FactorKind::Cavity, n_cav_dim), (FactorKind::Qubit, 2)])?;
    let omega_d = p.omega_cav() - p.omega_m();
    let alpha = C64::new(n_cav.sqrt(), 0.0);
    let drive = stationary_drive(p, alpha, omega_d)?;
    let model = FrameModel { hamiltonian: jc_hamiltonian(p, &layout, omega_d, drive)?, channels: p.channels(&layout) };
    let qubit = dressed_params(p, alpha, omega_d)?.ground_state();
    let psi = StateVector::product(layout.clone(), &[fock(n_cav_dim, 0), qubit])?;
    let cfg = StepperConfig { recenter_mech: false, ..*stepper };
    let mut st = FrameStepper::new(model, State::Pure(psi), alpha, ZERO, 0.0, cfg)?;
    let s = p.scales();
    let delta_c = p.delta_c(omega_d);
    let mut out = ForcedJcRun { n_cav, delta_c, t: Vec::new(), ratio: Vec::new(), theory: Vec::new() };
    let n = (duration / cfg.tau).round() as usize;
    let every = every.max(1);
    for k in 0..=n {
        if k > 0 {
            st.step()?;
        }
        if k % every == 0 {
            let est = squeeze_extract(&st.state().partial_trace(FactorKind::Cavity)?)?;
            out.t.push(st.time());
            out.ratio.push(est.ratio);
            out.theory.push((4.0 * theory::transfer_squeeze(st.time(), n_cav, s.n_crit, s.chi0, delta_c)).exp());
        }
    }
    Ok(out)
}

/// Error rates of the displaced-frame method on a resonantly driven,
/// lossless empty cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchmarkPoint {
    pub e_c_hz: f64,
    pub tau: f64,
    pub n_cav_dim: usize,
    pub u: f64,
    /// max |dn_ε/d|α_th||
    pub r_eps: f64,
    /// max |dn_disp/d|α_th||
    pub r_disp: f64,
    pub final_alpha: C64,
    pub final_alpha_theory: C64,
}

pub const BENCHMARK_COLUMNS: [&str; 6] = ["e_c_hz", "tau_ns", "n_cav_dim", "u", "r_eps", "r_disp"];

pub fn run_benchmark(e_c_hz: f64, duration: f64, n_cav_dim: usize, stepper: &StepperConfig) -> Result<BenchmarkPoint> {
    let layout = HilbertLayout::single(FactorKind::Cavity, n_cav_dim)?;
    let e_c = angular(e_c_hz);
    let mut h = PolyHamiltonian::new(layout.clone());
    h.add_with_adjoint(Term::real(0.5 * e_c).cav(1, 0));
    let model = FrameModel { hamiltonian: h, channels: Vec::new() };
    let psi = StateVector::new(layout, fock(n_cav_dim, 0))?;
    let cfg = StepperConfig { recenter_mech: false, ..*stepper };
    let mut st = FrameStepper::new(model, State::Pure(psi), ZERO, ZERO, 0.0, cfg)?;
    let theory = |t: f64| C64::new(0.0, -0.5 * e_c * t);
    let n = (duration / cfg.tau).round().max(1.0) as usize;
    let (mut eps_prev, mut disp_prev) = (0.0, 0.0);
    let (mut r_eps, mut r_disp): (f64, f64) = (0.0, 0.0);
    let d_alpha = 0.5 * e_c * cfg.tau;
    for _ in 0..n {
        st.step()?;
        let cav = st.state().partial_trace(FactorKind::Cavity)?;
        let (a_res, _, n_res) = moments(&cav)?;
        let alpha_sim = st.alpha() + a_res;
        let eps = n_res;
        let disp = (alpha_sim - theory(st.time())).norm_sqr();
        r_eps = r_eps.max((eps - eps_prev).abs() / d_alpha);
        r_disp = r_disp.max((disp - disp_prev).abs() / d_alpha);
        eps_prev = eps;
        disp_prev = disp;
    }
    Ok(BenchmarkPoint {
        e_c_hz,
        tau: cfg.tau,
        n_cav_dim,
        u: theory::truncation_error_u(n_cav_dim as f64, e_c * cfg.tau),
        r_eps,
        r_disp,
        final_alpha: st.alpha(),
        final_alpha_theory: theory(st.time()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_stepper() -> StepperConfig {
        let mut c = StepperConfig { tau: 0.5e-9, ..StepperConfig::default() };
        c.integrator.dt = 0.05e-9;
        c
    }

    fn scaled_small(init: CavityInit) -> ProtocolConfig {
        let mut c = ProtocolConfig::scaled(init);
        c.model = c.model.lossless();
        c.truncation = Truncation { n_cav: 8, n_mech: 6, n_transmon: 6 };
        c.stepper = small_stepper();
        c
    }

    #[test]
    fn ringup_targets() {
        let r = Ringup::for_target(200e6, 1e4);
        assert_abs_diff_eq!(r.n_target(), 1e4, epsilon = 1e-6);
        assert_abs_diff_eq!(r.t_r_s, 2.0 * 100.0 / angular(200e6), epsilon = 1e-18);
    }

    #[test]
    fn config_round_trip_and_unknown_keys() {
        let c = ProtocolConfig::scaled(CavityInit::Plus);
        let text = serde_json::to_string(&c).unwrap();
        let back: ProtocolConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(serde_json::from_value::<ProtocolConfig>(v).is_err());
    }

    #[test]
    fn from_model_reads_segments() {
        use crate::models::DriveSegment;
        let mut m = ModelParams::nominal();
        assert!(matches!(ProtocolConfig::from_model(m.clone(), CavityInit::One), Err(SimError::Config(_))));
        m.drive_segments = vec![DriveSegment::new(0.0, 1e-6, m.omega_cav_hz, C64::new(200e6, 0.0))];
        let c = ProtocolConfig::from_model(m.clone(), CavityInit::One).unwrap();
        assert_abs_diff_eq!(c.ringup.e1_hz, 200e6, epsilon = 1e-3);
        assert_eq!(c.transfer.duration_s, None);
        m.drive_segments.push(DriveSegment::new(1e-6, 3.5e-6, m.omega_cav_hz - m.omega_m_hz, ZERO));
        let c = ProtocolConfig::from_model(m.clone(), CavityInit::One).unwrap();
        assert_abs_diff_eq!(c.transfer.duration_s.unwrap(), 2.5e-6, epsilon = 1e-15);
        m.drive_segments[1].omega_d_hz = m.omega_cav_hz;
        assert!(ProtocolConfig::from_model(m, CavityInit::One).is_err());
    }

    #[test]
    fn undriven_cavity_stays_put() {
        let mut c = scaled_small(CavityInit::Plus);
        c.ringup = Ringup { e1_hz: 0.0, t_r_s: 20e-9 };
        let out = run_ringup(&c, None).unwrap();
        assert!((out.stepper.alpha().norm() - 0.5).abs() < 0.01);
        // dispersive phase: Δφ ≈ −χ0 t
        let last = out.observations.last().unwrap();
        let expected = -c.model.scales().chi0 * last.t;
        assert_abs_diff_eq!(last.delta_phi, expected, epsilon = 0.05 * expected.abs());
    }

    #[test]
    fn qubit_free_ringup_is_linear() {
        let mut c = scaled_small(CavityInit::Zero);
        c.model.g_hz = 0.0;
        c.model.g0_hz = 0.0;
        c.ringup = Ringup::for_target(200e6, 400.0);
        let out = run_ringup(&c, None).unwrap();
        let expected = (0.5 * angular(c.ringup.e1_hz) * out.stepper.time()).powi(2);
        assert_abs_diff_eq!(out.stepper.alpha().norm_sqr(), expected, epsilon = 1e-5 * expected);
    }

    #[test]
    fn switch_amplitude_reduces_without_coupling() {
        let mut p = ModelParams::nominal().lossless();
        p.g_hz = 0.0;
        p.g0_hz = 0.0;
        let wd = p.omega_cav() - p.omega_m();
        let m = SwitchMoments { a: C64::new(3.0, 1.0), b: C64::new(0.2, 0.0), sigma_minus: C64::new(0.1, 0.0) };
        let e = transfer_drive_amplitude(&m, &p, wd);
        assert_abs_diff_eq!((e - (-2.0 * p.delta_c(wd) * m.a)).norm(), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn wrong_switch_amplitude_is_detected() {
        let c = scaled_small(CavityInit::Zero);
        let wd = c.model.omega_cav() - c.model.omega_m();
        let alpha = C64::new(100.0, 0.0);
        let aux = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(1.0, 0.0), ZERO]));
        let q = dressed_params(&c.model, alpha, wd).unwrap().ground_state();
        let dressed = &q * q.adjoint();
        let good = stationary_drive(&c.model, alpha, wd).unwrap();
        let ok = dry_run_drift(&c, alpha, &dressed, good, wd, 0.0).unwrap();
        assert!(ok < 0.02, "{ok}");
        let bad = dry_run_drift(&c, alpha, &aux, ZERO, wd, 0.0).unwrap();
        assert!(bad > 0.5, "{bad}");
    }

    #[test]
    fn lossless_transfer_swaps_excitations() {
        let c = scaled_small(CavityInit::One);
        let out = run_protocol(&c).unwrap();
        let r = &out.result;
        assert_abs_diff_eq!(r.switch.g_om / angular(1.0), 1e5, epsilon = 1e3);
        let post: Vec<&Observation> = r.observations.iter().filter(|o| o.t > r.switch.t_switch).collect();
        let total0 = post[0].n_cav_centered + post[0].n_mech_centered;
        for o in &post {
            let total = o.n_cav_centered + o.n_mech_centered;
            assert!((total - total0).abs() < 0.08 * total0, "{total} vs {total0}");
        }
        assert!(r.mech_fidelity > 0.95, "{}", r.mech_fidelity);
        // excitation curves cross near t_swap/2
        let mid = r.switch.t_switch + 0.5 * r.switch.duration;
        let cross = post.windows(2).find(|w| w[0].n_mech_centered < w[0].n_cav_centered && w[1].n_mech_centered >= w[1].n_cav_centered).unwrap();
        assert!((cross[1].t - mid).abs() < 0.05 * r.switch.duration);
    }

    #[test]
    fn sweep_single_point_matches_direct_run() {
        let c = {
            let mut c = scaled_small(CavityInit::One);
            c.transfer.duration_s = Some(200e-9);
            c
        };
        let direct = run_protocol(&c).unwrap().result.mech_fidelity;
        let rows = sweep(&c, &SweepGrid::default(), Some(1)).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].mech_fidelity, Some(direct));
        let grid = SweepGrid { kappa_hz: vec![1e3, -1.0], ..SweepGrid::default() };
        let rows = sweep(&c, &grid, Some(2)).unwrap();
        assert!(rows[0].error.is_none() && rows[1].error.is_some());
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &CsvHeader::new("x"), &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("index,kappa_hz"));
    }

    #[test]
    fn exponential_fit_recovers_parameters() {
        let x: Vec<f64> = (0..8).map(|k| 1e3 * 3f64.powi(k)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.9 * (-v / 2e5).exp()).collect();
        let (a, b, r2) = fit_exponential_decay(&x, &y);
        assert_abs_diff_eq!(a, 0.9, epsilon = 1e-6);
        assert_abs_diff_eq!(b * 2e5, 1.0, epsilon = 1e-6);
        assert!(r2 > 1.0 - 1e-9);
    }

    #[test]
    fn displaced_dispersive_limit_phase_slope() {
        let p = ModelParams::nominal().lossless();
        let spec = DisplacedJcSpec { variant: Variant::Jc, n_cav: 0.0, duration_s: 100e-9, samples: 6, n_cav_dim: 8, compensate: true };
        let runs = displaced_jc_series(&p, &spec, &[CavityInit::Plus], &small_stepper()).unwrap();
        let t: Vec<f64> = runs[0].reports.iter().map(|r| r.t).collect();
        let phi: Vec<f64> = runs[0].reports.iter().map(|r| r.delta_phi).collect();
        let chi0 = p.scales().chi0;
        assert_abs_diff_eq!(-linear_fit(&t, &phi).0 / chi0, 1.0, epsilon = 0.01);
    }

    #[test]
    fn driven_jc_follows_cumulative_squeeze() {
        let p = ModelParams::nominal().lossless();
        let n = 100.0 * p.scales().n_crit;
        let r = run_driven_jc_experiment(&p, CavityInit::Zero, 200e6, n, 10, 3.0, &StepperConfig::default()).unwrap();
        assert!(r.reached && r.n_reached >= n);
        assert!(r.excited_population < 1e-2, "{}", r.excited_population);
        assert_abs_diff_eq!(r.branch_squeeze.ratio / r.theory_ratio, 1.0, epsilon = 0.02);
    }

    #[test]
    fn benchmark_small_displacements_are_accurate() {
        let b = run_benchmark(50e6, 50e-9, 20, &StepperConfig { leakage_limit: None, ..StepperConfig::default() }).unwrap();
        assert!(b.u < 1e-10);
        assert!(b.r_eps < 1e-3 && b.r_disp < 1e-3, "{b:?}");
        assert_abs_diff_eq!((b.final_alpha - b.final_alpha_theory).norm(), 0.0, epsilon = 1e-6);
    }
}

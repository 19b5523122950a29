//! Model parameters and Hamiltonian builders for the hybrid system and its
//! cavity-QED reductions (JC, Rabi, transmon), the dressed qubit basis, and
//! the drive amplitudes that hold the cavity amplitude stationary.
//!
//! Configuration values are ordinary frequencies in Hz; every builder works
//! in angular units (rad/s) with time in seconds.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::fockops::{fock, ladder, pauli, qubit_ground, qubit_rotation_y, FactorKind, HilbertLayout, Ket, Matrix, PauliKind, State, StateVector, C64, ONE};
use crate::frames::ChannelSpec;
use crate::hamiltonian::{PolyHamiltonian, Term};
use crate::theory;

/// Hz → rad/s.
pub fn angular(hz: f64) -> f64 {
    TAU * hz
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSegment {
    pub t_start_s: f64,
    pub t_end_s: f64,
    pub omega_d_hz: f64,
    pub e_re_hz: f64,
    pub e_im_hz: f64,
}

impl DriveSegment {
    pub fn new(t_start_s: f64, t_end_s: f64, omega_d_hz: f64, e_hz: C64) -> Self {
        Self { t_start_s, t_end_s, omega_d_hz, e_re_hz: e_hz.re, e_im_hz: e_hz.im }
    }

    /// Complex drive amplitude 𝓔_c in rad/s.
    pub fn amplitude(&self) -> C64 {
        C64::new(angular(self.e_re_hz), angular(self.e_im_hz))
    }

    pub fn omega_d(&self) -> f64 {
        angular(self.omega_d_hz)
    }

    pub fn duration(&self) -> f64 {
        self.t_end_s - self.t_start_s
    }
}

/// Piecewise-constant drive, segments back to back.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DriveSchedule {
    pub segments: Vec<DriveSegment>,
}

impl DriveSchedule {
    pub fn new(segments: Vec<DriveSegment>) -> Result<Self> {
        let errs = check_segments(&segments, "drive_segments");
        if errs.is_empty() {
            Ok(Self { segments })
        } else {
            Err(SimError::Config(errs.join("; ")))
        }
    }

    pub fn segment_at(&self, t: f64) -> Option<&DriveSegment> {
        self.segments.iter().find(|s| t >= s.t_start_s && t < s.t_end_s)
    }

    pub fn end(&self) -> Option<f64> {
        self.segments.last().map(|s| s.t_end_s)
    }
}

fn check_segments(segments: &[DriveSegment], path: &str) -> Vec<String> {
    let mut errs = Vec::new();
    for (i, s) in segments.iter().enumerate() {
        let p = format!("{path}[{i}]");
        for (name, v) in [("t_start_s", s.t_start_s), ("t_end_s", s.t_end_s), ("omega_d_hz", s.omega_d_hz), ("e_re_hz", s.e_re_hz), ("e_im_hz", s.e_im_hz)] {
            if !v.is_finite() {
                errs.push(format!("{p}.{name}: must be finite"));
            }
        }
        if s.t_start_s < 0.0 {
            errs.push(format!("{p}.t_start_s: must be >= 0 s, got {}", s.t_start_s));
        }
        if s.t_end_s <= s.t_start_s {
            errs.push(format!("{p}.t_end_s: must exceed t_start_s ({} s), got {} s", s.t_start_s, s.t_end_s));
        }
        if s.omega_d_hz < 0.0 {
            errs.push(format!("{p}.omega_d_hz: must be >= 0 Hz, got {}", s.omega_d_hz));
        }
        if i > 0 {
            let prev = &segments[i - 1];
            let gap = s.t_start_s - prev.t_end_s;
            if gap.abs() > 1e-12 * prev.t_end_s.abs().max(1e-9) {
                let what = if gap < 0.0 { "overlaps" } else { "leaves a gap after" };
                errs.push(format!("{p}.t_start_s: segment {what} the previous one (previous ends at {} s)", prev.t_end_s));
            }
        }
    }
    errs
}

/// Physical parameters of the hybrid system, in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub omega_cav_hz: f64,
    pub omega_q_hz: f64,
    pub omega_m_hz: f64,
    pub g_hz: f64,
    pub g0_hz: f64,
    pub kappa_hz: f64,
    pub gamma_hz: f64,
    #[serde(default)]
    pub drive_segments: Vec<DriveSegment>,
}

impl ModelParams {
    /// g/2π = 5 MHz, Δ/2π = −100 MHz, Ω_m/2π = 1 MHz, g0/2π = 100 Hz,
    /// κ/2π = 1 kHz, γ/2π = 10 kHz.
    pub fn nominal() -> Self {
        Self {
            omega_cav_hz: 5.7e9,
            omega_q_hz: 5.6e9,
            omega_m_hz: 1e6,
            g_hz: 5e6,
            g0_hz: 100.0,
            kappa_hz: 1e3,
            gamma_hz: 10e3,
            drive_segments: Vec::new(),
        }
    }

    pub fn lossless(mut self) -> Self {
        self.kappa_hz = 0.0;
        self.gamma_hz = 0.0;
        self
    }

    /// All violations, each naming its field and unit.
    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let fields = [
            ("omega_cav_hz", self.omega_cav_hz),
            ("omega_q_hz", self.omega_q_hz),
            ("omega_m_hz", self.omega_m_hz),
            ("g_hz", self.g_hz),
            ("g0_hz", self.g0_hz),
            ("kappa_hz", self.kappa_hz),
            ("gamma_hz", self.gamma_hz),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                errs.push(format!("{name}: must be a finite frequency in Hz"));
            } else if v < 0.0 {
                errs.push(format!("{name}: must be >= 0 Hz, got {v}"));
            }
        }
        if self.omega_m_hz <= 0.0 && self.omega_m_hz.is_finite() {
            errs.push("omega_m_hz: mechanical frequency must be > 0 Hz".into());
        }
        if self.omega_q_hz == self.omega_cav_hz && self.g_hz > 0.0 {
            errs.push("omega_q_hz: qubit must be detuned from the cavity (omega_q_hz != omega_cav_hz)".into());
        }
        errs.extend(check_segments(&self.drive_segments, "drive_segments"));
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(SimError::Config(errs.join("; ")))
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let p: Self = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn schedule(&self) -> Result<DriveSchedule> {
        DriveSchedule::new(self.drive_segments.clone())
    }

    pub fn g(&self) -> f64 {
        angular(self.g_hz)
    }

    pub fn g0(&self) -> f64 {
        angular(self.g0_hz)
    }

    pub fn omega_m(&self) -> f64 {
        angular(self.omega_m_hz)
    }

    pub fn kappa(&self) -> f64 {
        angular(self.kappa_hz)
    }

    pub fn gamma(&self) -> f64 {
        angular(self.gamma_hz)
    }

    /// Δ_c = ω_cav − ω_d.
    pub fn delta_c(&self, omega_d: f64) -> f64 {
        angular(self.omega_cav_hz) - omega_d
    }

    /// Δ_q = ω_q − ω_d.
    pub fn delta_q(&self, omega_d: f64) -> f64 {
        angular(self.omega_q_hz) - omega_d
    }

    pub fn omega_cav(&self) -> f64 {
        angular(self.omega_cav_hz)
    }

    pub fn scales(&self) -> DerivedScales {
        DerivedScales::new(self)
    }

    /// Loss channels present in `layout` with nonzero rate.
    pub fn channels(&self, layout: &HilbertLayout) -> Vec<ChannelSpec> {
        let mut out = Vec::new();
        if layout.contains(FactorKind::Cavity) && self.kappa_hz > 0.0 {
            out.push(ChannelSpec { kind: FactorKind::Cavity, rate: self.kappa() });
        }
        for k in [FactorKind::Qubit, FactorKind::Transmon] {
            if layout.contains(k) && self.gamma_hz > 0.0 {
                out.push(ChannelSpec { kind: k, rate: self.gamma() });
            }
        }
        out
    }
}

/// Scales derived from the bare parameters, angular units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedScales {
    /// Δ = ω_q − ω_cav
    pub delta: f64,
    /// χ0 = g²/Δ
    pub chi0: f64,
    /// n_crit = Δ²/4g²
    pub n_crit: f64,
}

impl DerivedScales {
    pub fn new(p: &ModelParams) -> Self {
        let delta = angular(p.omega_q_hz - p.omega_cav_hz);
        let g = p.g();
        Self { delta, chi0: g * g / delta, n_crit: delta * delta / (4.0 * g * g) }
    }

    /// Linearized optomechanical coupling g_OM = g0 |α|.
    pub fn g_om(p: &ModelParams, alpha: C64) -> f64 {
        p.g0() * alpha.norm()
    }
}

/// Dressed qubit basis for a cavity displaced by α: the qubit part
/// Δ_q σ_z/2 + g(α*σ_− + ασ_+) is diagonalized by U = Z R_y(θ/2) with
/// θ = atan(2g|α|/Δ_q) on the principal branch and Z = diag(1, e^{i arg α}).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DressedParams {
    pub theta: f64,
    /// arg α
    pub phase: f64,
    /// Δ_q of the frame the parameters were computed in.
    pub delta_q: f64,
    pub delta_tilde: f64,
    pub g_z: f64,
    pub g_1: f64,
    pub g_2: f64,
}

impl DressedParams {
    pub fn new(g: f64, delta_q: f64, alpha: C64) -> Result<Self> {
        if delta_q == 0.0 && alpha.norm() == 0.0 {
            return Err(SimError::Precondition("dressed basis undefined for Δ_q = 0 and α = 0".into()));
        }
        let r = alpha.norm();
        let theta = if delta_q == 0.0 { -std::f64::consts::FRAC_PI_2 } else { (2.0 * g * r / delta_q).atan() };
        let (s, c) = theta.sin_cos();
        Ok(Self {
            theta,
            phase: alpha.arg(),
            delta_q,
            delta_tilde: (delta_q * delta_q + 4.0 * g * g * r * r).sqrt(),
            g_z: g * s,
            g_1: 0.5 * g * (1.0 + c),
            g_2: 0.5 * g * (1.0 - c),
        })
    }

    /// Qubit unitary U taking the dressed basis to the bare (g, e) basis.
    pub fn basis(&self) -> Matrix {
        let z = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![ONE, C64::from_polar(1.0, self.phase)]));
        z * qubit_rotation_y(0.5 * self.theta)
    }

    /// Dressed state adiabatically connected to |g⟩, in the bare basis.
    pub fn ground_state(&self) -> Ket {
        self.basis() * qubit_ground()
    }
}

pub fn dressed_params(p: &ModelParams, alpha: C64, omega_d: f64) -> Result<DressedParams> {
    DressedParams::new(p.g(), p.delta_q(omega_d), alpha)
}

/// Cavity input states {|0⟩, |1⟩, |±⟩, |±i⟩}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CavityInit {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
    #[serde(rename = "+i")]
    PlusI,
    #[serde(rename = "-i")]
    MinusI,
}

impl CavityInit {
    pub const ALL: [CavityInit; 6] =
        [CavityInit::Zero, CavityInit::One, CavityInit::Plus, CavityInit::Minus, CavityInit::PlusI, CavityInit::MinusI];

    /// Amplitudes (c0, c1) on |0⟩, |1⟩.
    pub fn amplitudes(self) -> (C64, C64) {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            CavityInit::Zero => (ONE, C64::new(0.0, 0.0)),
            CavityInit::One => (C64::new(0.0, 0.0), ONE),
            CavityInit::Plus => (C64::new(h, 0.0), C64::new(h, 0.0)),
            CavityInit::Minus => (C64::new(h, 0.0), C64::new(-h, 0.0)),
            CavityInit::PlusI => (C64::new(h, 0.0), C64::new(0.0, h)),
            CavityInit::MinusI => (C64::new(h, 0.0), C64::new(0.0, -h)),
        }
    }

    pub fn ket(self, dim: usize) -> Ket {
        let (c0, c1) = self.amplitudes();
        fock(dim, 0) * c0 + fock(dim, 1) * c1
    }

    /// |0⟩ and |1⟩ are invariant under cavity rotations.
    pub fn is_rotation_invariant(self) -> bool {
        matches!(self, CavityInit::Zero | CavityInit::One)
    }

    pub fn label(self) -> &'static str {
        match self {
            CavityInit::Zero => "0",
            CavityInit::One => "1",
            CavityInit::Plus => "+",
            CavityInit::Minus => "-",
            CavityInit::PlusI => "+i",
            CavityInit::MinusI => "-i",
        }
    }

    /// File-name friendly label.
    pub fn slug(self) -> &'static str {
        match self {
            CavityInit::Zero => "zero",
            CavityInit::One => "one",
            CavityInit::Plus => "plus",
            CavityInit::Minus => "minus",
            CavityInit::PlusI => "plus_i",
            CavityInit::MinusI => "minus_i",
        }
    }
}

impl fmt::Display for CavityInit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}>", self.label())
    }
}

impl FromStr for CavityInit {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches('|').trim_end_matches('>').trim_end_matches('⟩');
        CavityInit::ALL
            .into_iter()
            .find(|p| p.label() == t || p.slug() == t)
            .ok_or_else(|| SimError::Config(format!("unknown cavity state '{s}', expected one of 0, 1, +, -, +i, -i")))
    }
}

/// |P⟩ ⊗ |qubit⟩ ⊗ |0_mech⟩ on `layout`; the qubit (or transmon) starts in
/// `qubit` when given, else in its ground state.
pub fn initial_state(layout: &HilbertLayout, p: CavityInit, qubit: Option<&Ket>) -> Result<StateVector> {
    let mut parts = Vec::new();
    for f in layout.factors() {
        let v = match f.kind {
            FactorKind::Cavity => {
                if f.dim < 2 {
                    return Err(SimError::InvalidDimension { dim: f.dim, reason: "cavity needs at least two levels" });
                }
                p.ket(f.dim)
            }
            FactorKind::Qubit | FactorKind::Transmon => match qubit {
                Some(q) if q.len() == f.dim => q.clone(),
                Some(q) => return Err(SimError::InvalidDimension { dim: q.len(), reason: "qubit state does not match factor" }),
                None => fock(f.dim, 0),
            },
            FactorKind::Mech => fock(f.dim, 0),
        };
        parts.push(v);
    }
    StateVector::product(layout.clone(), &parts)
}

/// Rotated-displaced initial state |P⟩ ⊗ |g⟩ for the Hamiltonian of
/// [`displaced_jc_hamiltonian`].
pub fn dressed_initial_state(layout: &HilbertLayout, p: CavityInit) -> Result<State> {
    Ok(State::Pure(initial_state(layout, p, None)?))
}

fn require(layout: &HilbertLayout, kinds: &[FactorKind]) -> Result<()> {
    for &k in kinds {
        if !layout.contains(k) {
            return Err(SimError::UnknownFactor(k));
        }
    }
    Ok(())
}

fn sigma(kind: PauliKind) -> Matrix {
    pauli(kind)
}

fn add_cavity_and_drive(h: &mut PolyHamiltonian, p: &ModelParams, omega_d: f64, e_c: C64) {
    h.add(Term::real(p.delta_c(omega_d)).cav(1, 1));
    if e_c.norm() > 0.0 {
        h.add_with_adjoint(Term::new(0.5 * e_c).cav(1, 0));
    }
}

fn add_mechanics(h: &mut PolyHamiltonian, p: &ModelParams) {
    h.add(Term::real(p.omega_m()).mech(1, 1));
    if p.g0_hz > 0.0 {
        h.add_with_adjoint(Term::real(p.g0()).cav(1, 1).mech(0, 1));
    }
}

/// Driven JC model in the drive frame, plus mechanics if the layout has it:
/// Δ_c a†a + Δ_q σ_z/2 + g(a†σ_− + aσ_+) + (𝓔_c/2)a† + (𝓔_c*/2)a [+ Ω_m b†b + g0 a†a(b†+b)].
pub fn jc_hamiltonian(p: &ModelParams, layout: &HilbertLayout, omega_d: f64, e_c: C64) -> Result<PolyHamiltonian> {
    require(layout, &[FactorKind::Cavity, FactorKind::Qubit])?;
    let mut h = PolyHamiltonian::new(layout.clone());
    add_cavity_and_drive(&mut h, p, omega_d, e_c);
    h.add(Term::real(0.5 * p.delta_q(omega_d)).aux(sigma(PauliKind::Z)));
    h.add_with_adjoint(Term::real(p.g()).cav(1, 0).aux(sigma(PauliKind::Minus)));
    if layout.contains(FactorKind::Mech) {
        add_mechanics(&mut h, p);
    }
    Ok(h)
}

/// Full hybrid Hamiltonian; the layout must contain cavity, qubit and mechanics.
pub fn hybrid_hamiltonian(p: &ModelParams, layout: &HilbertLayout, omega_d: f64, e_c: C64) -> Result<PolyHamiltonian> {
    require(layout, &[FactorKind::Mech])?;
    jc_hamiltonian(p, layout, omega_d, e_c)
}

/// JC model with the counter-rotating terms g(a†σ_+ e^{2iω_d t} + aσ_− e^{−2iω_d t}).
pub fn rabi_hamiltonian(p: &ModelParams, layout: &HilbertLayout, omega_d: f64, e_c: C64) -> Result<PolyHamiltonian> {
    let mut h = jc_hamiltonian(p, layout, omega_d, e_c)?;
    h.add_with_adjoint(Term::real(p.g()).cav(1, 0).aux(sigma(PauliKind::Plus)).oscillating(2.0 * omega_d));
    Ok(h)
}

/// Transmon as a Kerr oscillator q with anharmonicity K (rad/s):
/// Δ_c a†a + Δ_q q†q − (K/2)q†²q² + g(a†q + aq†) + drive [+ mechanics].
pub fn transmon_hamiltonian(p: &ModelParams, layout: &HilbertLayout, k: f64, omega_d: f64, e_c: C64) -> Result<PolyHamiltonian> {
    require(layout, &[FactorKind::Cavity, FactorKind::Transmon])?;
    let d = layout.factor_dim(FactorKind::Transmon)?;
    let q = ladder(d)?;
    let qd = q.adjoint();
    let mut h = PolyHamiltonian::new(layout.clone());
    add_cavity_and_drive(&mut h, p, omega_d, e_c);
    let n = &qd * &q;
    let kerr = &qd * &qd * &q * &q;
    h.add(Term::new(C64::new(1.0, 0.0)).aux(n * C64::new(p.delta_q(omega_d), 0.0) - kerr * C64::new(0.5 * k, 0.0)));
    h.add_with_adjoint(Term::real(p.g()).cav(1, 0).aux(q));
    if layout.contains(FactorKind::Mech) {
        add_mechanics(&mut h, p);
    }
    Ok(h)
}

/// Re-expresses `h` with the cavity displaced by α and the qubit in the
/// dressed basis `u`: U† D†(α) H D(α) U.
pub fn rotated_displaced(h: &PolyHamiltonian, alpha: C64, u: &Matrix) -> PolyHamiltonian {
    let ud = u.adjoint();
    let mut out = PolyHamiltonian::new(h.layout().clone());
    for t in h.displaced(alpha, C64::new(0.0, 0.0)).terms() {
        let mut t = t.clone();
        t.aux = t.aux.map(|x| &ud * x * u);
        out.add(t);
    }
    out
}

/// Undriven JC model in the cavity frame, displaced by α and rotated into
/// the dressed qubit basis. For real α and Δ < 0 this is
/// −Δ̃σ_z/2 + g_z(a†+a)σ_z/2 + g_1(a†σ_− + aσ_+) − g_2(a†σ_+ + aσ_−).
pub fn displaced_jc_hamiltonian(p: &ModelParams, layout: &HilbertLayout, alpha: C64) -> Result<(PolyHamiltonian, DressedParams)> {
    let omega_d = p.omega_cav();
    let dressed = dressed_params(p, alpha, omega_d)?;
    let h = jc_hamiltonian(p, layout, omega_d, C64::new(0.0, 0.0))?;
    Ok((rotated_displaced(&h, alpha, &dressed.basis()), dressed))
}

/// Coefficients of the effective cavity Hamiltonian with σ_z → −1:
/// (Δ_c − χ)a†a − J(a†² + a²) + net_drive (a† + a).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveCavity {
    pub detuning: f64,
    pub squeeze: f64,
    pub net_drive: f64,
    pub chi: f64,
    pub j: f64,
}

/// Effective off-resonant cavity Hamiltonian for real α and real 𝓔_c.
pub fn off_resonant_effective_hamiltonian(p: &ModelParams, alpha: f64, omega_d: f64, e_c: f64) -> Result<EffectiveCavity> {
    let s = p.scales();
    let n = alpha * alpha;
    let chi = theory::chi_of_n(n, s.chi0, s.n_crit);
    let j = theory::j_of_n(n, s.chi0, s.n_crit);
    let dressed = dressed_params(p, C64::new(alpha, 0.0), omega_d)?;
    let dc = p.delta_c(omega_d);
    Ok(EffectiveCavity { detuning: dc - chi, squeeze: -j, net_drive: 0.5 * e_c + dc * alpha - 0.5 * dressed.g_z, chi, j })
}

/// Drive 𝓔_c that cancels the net linear cavity term when the qubit sits in
/// its dressed state: 𝓔_c/2 = −Δ_c α − g⟨σ_−⟩.
pub fn stationary_drive(p: &ModelParams, alpha: C64, omega_d: f64) -> Result<C64> {
    let dressed = dressed_params(p, alpha, omega_d)?;
    let q = dressed.ground_state();
    let sm = (q.adjoint() * sigma(PauliKind::Minus) * &q)[(0, 0)];
    Ok(-2.0 * (p.delta_c(omega_d) * alpha + p.g() * sm))
}

/// Expectation values at the switch instant, in the new drive frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwitchMoments {
    pub a: C64,
    pub b: C64,
    pub sigma_minus: C64,
}

/// 𝓔₂/2 = −Δ_c⟨a⟩ − g⟨σ_−⟩ − g0⟨a⟩(⟨b†⟩ + ⟨b⟩).
pub fn transfer_drive_amplitude(m: &SwitchMoments, p: &ModelParams, omega_d: f64) -> C64 {
    let x = m.b.conj() + m.b;
    -2.0 * (p.delta_c(omega_d) * m.a + p.g() * m.sigma_minus + p.g0() * m.a * x)
}

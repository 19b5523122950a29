//! Characterization of single-mode states centered on their coherent
//! amplitude: squeezing angle and parameter, phase shift by fidelity
//! maximization, residual photon number, fidelity and Wigner grids.
//!
//! Quadratures are x = (a + a†)/√2 and p = −i(a − a†)/√2, so the vacuum
//! variance is 1/2.

use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Result, SimError};
use crate::fockops::{ladder, squeeze, FactorKind, Ket, Matrix, State, C64};
use crate::io::{fmt_f64, CsvHeader};
use crate::models::CavityInit;

/// Tolerance on |⟨a⟩| for a state to count as centered.
pub const CENTERED_TOL: f64 = 1e-6;

const GRID_POINTS: usize = 720;
const GOLDEN_TOL: f64 = 1e-6;

/// (⟨a⟩, ⟨b⟩) of the state; zero for absent factors.
pub fn coherent_amplitudes(state: &State) -> Result<(C64, C64)> {
    let layout = state.layout();
    let mut out = [C64::new(0.0, 0.0); 2];
    for (slot, kind) in [FactorKind::Cavity, FactorKind::Mech].into_iter().enumerate() {
        if layout.contains(kind) {
            out[slot] = state.expect_local(&ladder(layout.factor_dim(kind)?)?, kind)?;
        }
    }
    Ok((out[0], out[1]))
}

fn check_square(rho: &Matrix) -> Result<usize> {
    if rho.nrows() != rho.ncols() || rho.nrows() < 2 {
        return Err(SimError::InvalidDimension { dim: rho.nrows(), reason: "single-mode density matrix must be square with dim >= 2" });
    }
    Ok(rho.nrows())
}

fn trace_product(rho: &Matrix, op: &Matrix) -> C64 {
    (rho * op).trace()
}

/// (⟨a⟩, ⟨a²⟩, ⟨a†a⟩) of a single-mode density matrix.
pub fn moments(rho: &Matrix) -> Result<(C64, C64, f64)> {
    let d = check_square(rho)?;
    let a = ladder(d)?;
    let a2 = &a * &a;
    let n = a.adjoint() * &a;
    Ok((trace_product(rho, &a), trace_product(rho, &a2), trace_product(rho, &n).re))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqueezeEstimate {
    /// Angle of the anti-squeezed quadrature x_θ = x cosθ + p sinθ.
    pub theta: f64,
    pub r: f64,
    pub var_sq: f64,
    pub var_asq: f64,
    pub ratio: f64,
}

impl SqueezeEstimate {
    /// Squeeze parameter ξ = r e^{2iθ} in the convention of `fockops::squeeze`.
    pub fn xi(&self) -> C64 {
        C64::from_polar(self.r, 2.0 * self.theta)
    }
}

/// Squeezing of a centered single-mode state from its second moments.
pub fn squeeze_extract(rho: &Matrix) -> Result<SqueezeEstimate> {
    let (a, a2, n) = moments(rho)?;
    if a.norm() > CENTERED_TOL {
        return Err(SimError::Precondition(format!("state is not centered: |<a>| = {:.3e}", a.norm())));
    }
    squeeze_from_moments(a2, n)
}

/// Squeeze of the fluctuations δa = a − ⟨a⟩, for states that are not centered.
pub fn squeeze_about_mean(rho: &Matrix) -> Result<SqueezeEstimate> {
    let (a, a2, n) = moments(rho)?;
    squeeze_from_moments(a2 - a * a, n - a.norm_sqr())
}

fn squeeze_from_moments(a2: C64, n: f64) -> Result<SqueezeEstimate> {
    // ⟨x²⟩ − ⟨p²⟩ = 2 Re⟨a²⟩ and ⟨xp + px⟩ = 2 Im⟨a²⟩
    let theta = if a2.norm() == 0.0 { 0.0 } else { 0.5 * a2.im.atan2(a2.re) };
    let var_asq = n + 0.5 + a2.norm();
    let var_sq = n + 0.5 - a2.norm();
    if var_sq <= 0.0 {
        return Err(SimError::InvalidState(format!("non-physical quadrature variance {var_sq:e}")));
    }
    let ratio = var_asq / var_sq;
    Ok(SqueezeEstimate { theta, r: 0.25 * ratio.ln(), var_sq, var_asq, ratio })
}

/// F(β) = ⟨ψ|R(β) ρ R†(β)|ψ⟩ with R(β) = e^{−iβ a†a}.
fn rotated_overlap(rho: &Matrix, psi: &Ket, beta: f64) -> f64 {
    let support: Vec<usize> = (0..psi.len()).filter(|&k| psi[k].norm() > 0.0).collect();
    let mut f = C64::new(0.0, 0.0);
    for &m in &support {
        for &n in &support {
            let phase = C64::from_polar(1.0, (n as f64 - m as f64) * beta);
            f += psi[m].conj() * psi[n] * rho[(m, n)] * phase;
        }
    }
    f.re
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let k = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - k * (hi - lo);
    let mut x2 = lo + k * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + k * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - k * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

fn wrap(phi: f64) -> f64 {
    let t = std::f64::consts::TAU;
    let w = (phi + std::f64::consts::PI).rem_euclid(t) - std::f64::consts::PI;
    if w >= std::f64::consts::PI { w - t } else { w }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseEstimate {
    /// Δφ such that ρ ≈ R(Δφ)|ψ⟩⟨ψ|R†(Δφ), in [−π, π).
    pub delta_phi: f64,
    pub fidelity: f64,
    /// The target is rotation invariant, so Δφ carries no information.
    pub degenerate: bool,
}

/// Maximizes ⟨ψ|R(β)ρR†(β)|ψ⟩ over β; Δφ = −β_opt.
pub fn phase_optimized_fidelity(rho: &Matrix, psi: &Ket) -> Result<PhaseEstimate> {
    let d = check_square(rho)?;
    if psi.len() > d {
        return Err(SimError::InvalidDimension { dim: psi.len(), reason: "target longer than the state" });
    }
    if (psi.norm() - 1.0).abs() > 1e-8 {
        return Err(SimError::InvalidState("target state is not normalized".into()));
    }
    let levels = psi.iter().filter(|c| c.norm() > 0.0).count();
    if levels <= 1 {
        return Ok(PhaseEstimate { delta_phi: 0.0, fidelity: rotated_overlap(rho, psi, 0.0).clamp(0.0, 1.0), degenerate: true });
    }
    let step = std::f64::consts::TAU / GRID_POINTS as f64;
    let (best, _) = (0..GRID_POINTS)
        .map(|k| {
            let b = -std::f64::consts::PI + k as f64 * step;
            (b, rotated_overlap(rho, psi, b))
        })
        .fold((0.0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let beta = golden_max(|b| rotated_overlap(rho, psi, b), best - step, best + step, GOLDEN_TOL);
    Ok(PhaseEstimate { delta_phi: wrap(-beta), fidelity: rotated_overlap(rho, psi, beta).clamp(0.0, 1.0), degenerate: false })
}

/// Phase shift and optimal fidelity relative to |P⟩.
pub fn phase_extract(rho: &Matrix, p: CavityInit) -> Result<PhaseEstimate> {
    let d = check_square(rho)?;
    phase_optimized_fidelity(rho, &p.ket(d))
}

/// ⟨ψ|ρ|ψ⟩
pub fn fidelity(rho: &Matrix, psi: &Ket) -> Result<f64> {
    let d = check_square(rho)?;
    if psi.len() != d {
        return Err(SimError::InvalidDimension { dim: psi.len(), reason: "target does not match state" });
    }
    if (psi.norm() - 1.0).abs() > 1e-8 {
        return Err(SimError::InvalidState("target state is not normalized".into()));
    }
    Ok((psi.adjoint() * rho * psi)[(0, 0)].re.clamp(0.0, 1.0))
}

/// Tr[a†a ρ] − ⟨P|a†a|P⟩
pub fn photon_change(rho_corrected: &Matrix, p: CavityInit) -> Result<f64> {
    let (_, _, n) = moments(rho_corrected)?;
    let (_, c1) = p.amplitudes();
    Ok(n - c1.norm_sqr())
}

/// ρ^C = S†(ξ) R†(Δφ) ρ R(Δφ) S(ξ): undoes the rotation, then the squeeze
/// measured on the de-rotated state.
pub fn correct(rho: &Matrix, delta_phi: f64) -> Result<(Matrix, SqueezeEstimate)> {
    let d = check_square(rho)?;
    let r = crate::fockops::rotation(delta_phi, d);
    let derotated = r.adjoint() * rho * &r;
    let est = squeeze_extract(&derotated)?;
    let s = squeeze(est.xi(), d)?;
    Ok((s.adjoint() * derotated * s, est))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeformationReport {
    pub t: f64,
    pub delta_phi: f64,
    pub delta_n: f64,
    pub fidelity: f64,
    pub degenerate: bool,
    /// Present when the de-rotated state is centered (|P⟩ = |0⟩, |1⟩).
    pub squeeze: Option<SqueezeEstimate>,
}

/// Deformation of a cavity state relative to |P⟩. Squeezing is only
/// extracted for centered states; otherwise Δn is measured after undoing
/// the rotation alone.
pub fn deformation_report(rho: &Matrix, p: CavityInit, t: f64) -> Result<DeformationReport> {
    let phase = phase_extract(rho, p)?;
    let (a, _, _) = moments(rho)?;
    let (corrected, squeeze) = if a.norm() <= CENTERED_TOL {
        let (c, s) = correct(rho, phase.delta_phi)?;
        (c, Some(s))
    } else {
        let r = crate::fockops::rotation(phase.delta_phi, rho.nrows());
        (r.adjoint() * rho * &r, None)
    };
    Ok(DeformationReport {
        t,
        delta_phi: phase.delta_phi,
        delta_n: photon_change(&corrected, p)?,
        fidelity: phase.fidelity,
        degenerate: phase.degenerate,
        squeeze,
    })
}

impl DeformationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Re-expresses a single-mode state centered on `from` in a frame centered
/// on `to`: D(from − to) ρ D†(from − to).
pub fn recenter_mode(rho: &Matrix, from: C64, to: C64) -> Result<Matrix> {
    let d = check_square(rho)?;
    let shift = from - to;
    if shift.norm() == 0.0 {
        return Ok(rho.clone());
    }
    let dd = crate::fockops::displacement(shift, d)?;
    Ok(&dd * rho * dd.adjoint())
}

/// L_n^{(k)}(x) by the three-term recurrence.
fn laguerre(n: usize, k: usize, x: f64) -> f64 {
    let k = k as f64;
    let (mut l0, mut l1) = (1.0, 1.0 + k - x);
    if n == 0 {
        return l0;
    }
    for m in 1..n {
        let m = m as f64;
        let l2 = ((2.0 * m + 1.0 + k - x) * l1 - (m + k) * l0) / (m + 1.0);
        l0 = l1;
        l1 = l2;
    }
    l1
}

/// Wigner function W(α) = (2/π)Tr[D†(α)ρD(α)Π] on the grid α = re + i·im;
/// rows follow `im`, columns follow `re`, and ∫W d²α = 1.
pub fn wigner(rho: &Matrix, re: &[f64], im: &[f64]) -> Result<DMatrix<f64>> {
    let d = check_square(rho)?;
    let mut w = DMatrix::zeros(im.len(), re.len());
    for (i, &y) in im.iter().enumerate() {
        for (j, &x) in re.iter().enumerate() {
            let alpha = C64::new(x, y);
            let b = 4.0 * alpha.norm_sqr();
            let two_a = 2.0 * alpha;
            let mut acc = 0.0;
            for m in 0..d {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * rho[(m, m)].re * laguerre(m, 0, b);
                // (2α)^{n−m} √(m!/n!) built incrementally
                let mut coef = C64::new(1.0, 0.0);
                for n in m + 1..d {
                    coef = coef * two_a / (n as f64).sqrt();
                    let v = rho[(m, n)];
                    if v.norm() > 0.0 {
                        acc += 2.0 * sign * (v * coef).re * laguerre(m, n - m, b);
                    }
                }
            }
            w[(i, j)] = 2.0 / std::f64::consts::PI * (-0.5 * b).exp() * acc;
        }
    }
    Ok(w)
}

/// Wigner grid as CSV: the re grid row, the im grid row, then one row of
/// values per im point.
pub fn write_wigner_csv<W: Write>(mut w: W, header: &CsvHeader, re: &[f64], im: &[f64], values: &DMatrix<f64>) -> std::io::Result<()> {
    header.write(&mut w)?;
    let row = |xs: &mut dyn Iterator<Item = f64>| xs.map(fmt_f64).collect::<Vec<_>>().join(",");
    writeln!(w, "{}", row(&mut re.iter().copied()))?;
    writeln!(w, "{}", row(&mut im.iter().copied()))?;
    for i in 0..values.nrows() {
        writeln!(w, "{}", row(&mut values.row(i).iter().copied()))?;
    }
    Ok(())
}

/// Evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

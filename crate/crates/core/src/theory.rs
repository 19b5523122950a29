//! Closed-form results: dispersive shift and squeezing rate of the
//! displaced JC model, cumulative and forced-oscillation squeezing,
//! SU(1,1) squeeze composition and the per-interval truncation error.
//!
//! All frequencies share one unit (angular by convention); functions never
//! convert.

use num_complex::Complex64 as C64;
use serde::Serialize;
use statrs::function::gamma::gamma_lr;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SWCoefficients {
    pub chi: f64,
    pub j: f64,
    pub g_z: f64,
    pub delta_tilde: f64,
}

/// χ(n) = χ0 (1 + n/2n_c)(1 + n/n_c)^{−3/2}
pub fn chi_of_n(n_cav: f64, chi0: f64, n_crit: f64) -> f64 {
    let u = n_cav / n_crit;
    chi0 * (1.0 + 0.5 * u) * (1.0 + u).powf(-1.5)
}

/// J(n) = (χ0/4)(n/n_c)(1 + n/n_c)^{−3/2}
pub fn j_of_n(n_cav: f64, chi0: f64, n_crit: f64) -> f64 {
    let u = n_cav / n_crit;
    0.25 * chi0 * u * (1.0 + u).powf(-1.5)
}

/// Peak squeezing rate J0 = χ0/(6√3), reached at n = 2n_c.
pub fn j_peak(chi0: f64) -> f64 {
    chi0 / (6.0 * 3f64.sqrt())
}

/// Second-order coefficients from the dressed couplings for a real
/// displacement α and qubit detuning Δ (no cavity detuning).
pub fn sw_coefficients(alpha: f64, delta: f64, g: f64) -> SWCoefficients {
    let theta = (2.0 * g * alpha / delta).atan();
    let delta_tilde = (delta * delta + 4.0 * g * g * alpha * alpha).sqrt();
    let (s, c) = theta.sin_cos();
    let g1 = 0.5 * g * (1.0 + c);
    let g2 = 0.5 * g * (1.0 - c);
    SWCoefficients { chi: -(g1 * g1 + g2 * g2) / delta_tilde, j: -g1 * g2 / delta_tilde, g_z: g * s, delta_tilde }
}

/// |ξ(t_r)| for a ring-up to n_final with n(t) = (𝓔t/2)².
pub fn cumulative_squeeze(n_final: f64, n_crit: f64, chi0: f64, e_c: f64) -> f64 {
    let u = n_final / n_crit;
    let bracket = ((1.0 + u).sqrt() + u.sqrt()).ln() - (u / (1.0 + u)).sqrt();
    chi0.abs() * n_crit.sqrt() / e_c * bracket
}

/// Large-n_final form of [`cumulative_squeeze`].
pub fn cumulative_squeeze_simplified(n_final: f64, n_crit: f64, chi0: f64, e_c: f64) -> f64 {
    let u = n_final / n_crit;
    chi0.abs() * n_crit.sqrt() / (2.0 * e_c) * (u.ln() + 2.0 * (2f64.ln() - 1.0))
}

/// |ξ(t)| during forced oscillation at cavity detuning Δ_c.
pub fn transfer_squeeze(t: f64, n_cav: f64, n_crit: f64, chi0: f64, delta_c: f64) -> f64 {
    let chi = chi_of_n(n_cav, chi0, n_crit);
    let j = j_of_n(n_cav, chi0, n_crit);
    let w = delta_c - chi;
    (2.0 * j / w).abs() * ((w * w - 4.0 * j * j).sqrt() * t).sin().abs()
}

/// Oscillation frequency of [`transfer_squeeze`]'s argument.
pub fn transfer_frequency(n_cav: f64, n_crit: f64, chi0: f64, delta_c: f64) -> f64 {
    let chi = chi_of_n(n_cav, chi0, n_crit);
    let j = j_of_n(n_cav, chi0, n_crit);
    ((delta_c - chi).powi(2) - 4.0 * j * j).sqrt()
}

/// Envelope amplitude |2J/(Δ_c − χ)| of [`transfer_squeeze`].
pub fn transfer_squeeze_amplitude(n_cav: f64, n_crit: f64, chi0: f64, delta_c: f64) -> f64 {
    (2.0 * j_of_n(n_cav, chi0, n_crit) / (delta_c - chi_of_n(n_cav, chi0, n_crit))).abs()
}

/// |J|, |χ| ≪ Δ_c limit of [`transfer_squeeze`].
pub fn transfer_squeeze_limit(t: f64, n_cav: f64, n_crit: f64, chi0: f64, delta_c: f64) -> f64 {
    chi0.abs() / (2.0 * delta_c) * (n_crit / n_cav).sqrt() * (delta_c * t).sin().abs()
}

/// Squeeze r that diagonalizes Δ_c a†a + J a†² + J* a².
pub fn static_squeeze(j: f64, delta_c: f64) -> f64 {
    0.5 * (2.0 * j.abs() / delta_c.abs()).atanh()
}

/// Unapproximated |ξ̃(t)| for forced oscillation from the composition of
/// S(r) and S(r e^{i(2Δ̃t + π)}).
pub fn forced_jc_squeeze_exact(r_static: f64, delta_tilde: f64, t: f64) -> f64 {
    let tr = r_static.tanh();
    let e = C64::from_polar(1.0, 2.0 * delta_tilde * t + std::f64::consts::PI);
    let ratio = (e + 1.0) * tr / (e * tr * tr + 1.0);
    ratio.norm().atanh()
}

/// Leading order 2|J|/|Δ_c| · |sin(Δ̃_c t)|, Δ̃_c = √(Δ_c² − 4|J|²).
pub fn forced_jc_squeeze_leading(j: f64, delta_c: f64, t: f64) -> f64 {
    let dt = (delta_c * delta_c - 4.0 * j * j).sqrt();
    2.0 * j.abs() / delta_c.abs() * (dt * t).sin().abs()
}

/// S(ξ1)S(ξ2) = S(ξ3)R(−θ) up to the global phase e^{iθ/2}; returns (ξ3, θ).
pub fn compose_squeezes(xi1: C64, xi2: C64) -> (C64, f64) {
    let (r1, p1) = xi1.to_polar();
    let (r2, p2) = xi2.to_polar();
    let tt = r1.tanh() * r2.tanh();
    let num = C64::from_polar(tt, p1 - p2) + 1.0;
    let den = C64::from_polar(tt, p2 - p1) + 1.0;
    // −(i/2) log(num/den) is real since num and den are conjugates
    let theta = (-0.5 * C64::i() * (num / den).ln()).re;
    let z = (C64::from_polar(r1.tanh(), p1) + C64::from_polar(r2.tanh(), p2)) / den;
    let xi3 = if z.norm() == 0.0 { C64::new(0.0, 0.0) } else { C64::from_polar(z.norm().atanh(), z.arg()) };
    (xi3, theta)
}

/// Poisson tail P(k ≥ ⌊N⌋) with mean λ = |𝓔τ/2|².
pub fn truncation_error_u(n_cav: f64, e_tau: f64) -> f64 {
    let k = n_cav.floor();
    let lambda = (0.5 * e_tau).powi(2);
    if k <= 0.0 {
        return 1.0;
    }
    if lambda == 0.0 {
        return 0.0;
    }
    gamma_lr(k, lambda)
}

/// One row of the design trade-off: cumulative (ring-up) and peak
/// transfer squeeze ratios e^{4|ξ|} at fixed χ0 as n_crit varies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffPoint {
    pub n_crit: f64,
    pub ringup_ratio: f64,
    pub transfer_ratio: f64,
}

pub fn tradeoff(n_crit: f64, chi0: f64, e_c: f64, delta_c: f64, n_cav: f64) -> TradeoffPoint {
    let ringup = cumulative_squeeze(n_cav, n_crit, chi0, e_c);
    let transfer = transfer_squeeze_amplitude(n_cav, n_crit, chi0, delta_c);
    TradeoffPoint { n_crit, ringup_ratio: (4.0 * ringup).exp(), transfer_ratio: (4.0 * transfer).exp() }
}

//! WebAssembly bindings for the static demo in `www/`. Everything returns
//! flat `Float64Array`s so the page needs no glue beyond wasm-bindgen.

use framesim::analysis::{linspace, wigner};
use framesim::fockops::{fock, squeeze, C64};
use framesim::models::angular;
use framesim::theory;
use wasm_bindgen::prelude::*;

/// Dispersive scales of a qubit detuned by `delta_hz` with coupling `g_hz`.
#[wasm_bindgen]
#[derive(Debug, Clone, Copy)]
pub struct Scales {
    chi0: f64,
    n_crit: f64,
}

#[wasm_bindgen]
impl Scales {
    #[wasm_bindgen(constructor)]
    pub fn new(g_hz: f64, delta_hz: f64) -> Result<Scales, JsError> {
        if !(g_hz > 0.0 && delta_hz != 0.0 && g_hz.is_finite() && delta_hz.is_finite()) {
            return Err(JsError::new("need g_hz > 0 and a nonzero finite delta_hz"));
        }
        let (g, d) = (angular(g_hz), angular(delta_hz));
        Ok(Scales { chi0: g * g / d, n_crit: d * d / (4.0 * g * g) })
    }

    #[wasm_bindgen(getter)]
    pub fn chi0(&self) -> f64 {
        self.chi0
    }

    #[wasm_bindgen(getter)]
    pub fn n_crit(&self) -> f64 {
        self.n_crit
    }

    /// Rows of (n/n_crit, χ/χ0, J/J0) on a log grid, flattened.
    pub fn chi_j_curves(&self, u_min: f64, u_max: f64, points: usize) -> Vec<f64> {
        let j0 = theory::j_peak(self.chi0);
        log_grid(u_min, u_max, points)
            .into_iter()
            .flat_map(|u| {
                let n = u * self.n_crit;
                [u, theory::chi_of_n(n, self.chi0, self.n_crit) / self.chi0, theory::j_of_n(n, self.chi0, self.n_crit) / j0]
            })
            .collect()
    }

    /// Rows of (n_final, e^{4|ξ|}) for a resonant ring-up at `e_c_hz`.
    pub fn cumulative_squeeze(&self, e_c_hz: f64, n_max: f64, points: usize) -> Vec<f64> {
        let e_c = angular(e_c_hz);
        log_grid(1.0, n_max.max(1.0), points)
            .into_iter()
            .flat_map(|n| [n, (4.0 * theory::cumulative_squeeze(n, self.n_crit, self.chi0, e_c)).exp()])
            .collect()
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if !(lo > 0.0 && hi >= lo) {
        return Vec::new();
    }
    linspace(lo.log10(), hi.log10(), n).into_iter().map(|x| 10f64.powf(x)).collect()
}

/// Wigner function of S(r e^{iφ})|m⟩ for m = 0 or 1, on a `points`²
/// grid over [−extent, extent]²; row-major with rows along Im α.
#[wasm_bindgen]
pub fn squeezed_wigner(fock_n: usize, r: f64, phi: f64, extent: f64, points: usize, dim: usize) -> Result<Vec<f64>, JsError> {
    if fock_n > 1 || dim < 4 {
        return Err(JsError::new("fock_n must be 0 or 1 and dim at least 4"));
    }
    let s = squeeze(C64::from_polar(r, phi), dim).map_err(|e| JsError::new(&e.to_string()))?;
    let psi = s * fock(dim, fock_n);
    let rho = &psi * psi.adjoint();
    let grid = linspace(-extent, extent, points);
    let w = wigner(&rho, &grid, &grid).map_err(|e| JsError::new(&e.to_string()))?;
    Ok(w.transpose().as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nominal_scales() {
        let s = Scales::new(5e6, -100e6).unwrap();
        assert!((s.n_crit() - 100.0).abs() < 1e-9);
        assert!((s.chi0() / angular(-250e3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn curves_are_flat_rows() {
        let s = Scales::new(5e6, -100e6).unwrap();
        let c = s.chi_j_curves(0.01, 100.0, 9);
        assert_eq!(c.len(), 27);
        assert!((c[0] - 0.01).abs() < 1e-12 && (c[24] - 100.0).abs() < 1e-9);
        let peak = c.chunks(3).map(|r| r[2]).fold(0.0, f64::max);
        assert!(peak <= 1.0 + 1e-12 && peak > 0.5);
        let cum = s.cumulative_squeeze(200e6, 1e6, 5);
        assert_eq!(cum.len(), 10);
        assert!(cum.chunks(2).all(|r| r[1] >= 1.0));
    }

    #[test]
    fn wigner_grid_normalizes() {
        let n = 61;
        let w = squeezed_wigner(1, 0.3, 0.0, 4.0, n, 30).unwrap();
        assert_eq!(w.len(), n * n);
        let h = 8.0 / (n - 1) as f64;
        let total: f64 = w.iter().sum::<f64>() * h * h;
        assert!((total - 1.0).abs() < 1e-3, "{total}");
        // |1⟩ is negative at the origin
        assert!(w[n * n / 2] < 0.0);
    }
}

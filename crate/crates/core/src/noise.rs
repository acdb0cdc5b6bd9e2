//! Imperfections applied to heralded states before analysis.
//!
//! Collective dephasing models common-mode magnetic-field noise during the
//! transfer and analysis pulses: both memories pick up the same random phase
//! on |↑⟩. A coherence between basis states whose `↑` counts differ by `k`
//! acquires `e^{i k ϕ/2}`, where `ϕ ~ N(0, σ²)` is the phase of the
//! `|↓↓⟩–|↑↑⟩` coherence. The `{|↓↑⟩, |↑↓⟩}` span (`k = 0`) is untouched, so
//! Ψ states are immune while the Φ coherence shrinks by `e^{−σ²/2}`.
//!
//! Detection-electronics jitter is not modeled here; see
//! [`DetectorModel::jitter_sigma`](crate::detection::DetectorModel).

use nalgebra::Matrix4;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_probability, invalid, Result};
use crate::quantum::DensityMatrix4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Std of the collective random phase on the Φ coherence, rad.
    pub sigma_phi: f64,
    /// Delay over which that phase accrues, seconds. Informational only.
    pub analysis_delay: f64,
    pub depol_p: f64,
    /// Symmetric bright/dark misassignment probability per memory.
    pub meas_error: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma_phi: 0.0,
            analysis_delay: 50e-6,
            depol_p: 0.0,
            meas_error: 0.0,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_phi >= 0.0) || !self.sigma_phi.is_finite() {
            return Err(invalid("sigma_phi", format!("{} must be >= 0", self.sigma_phi)));
        }
        check_probability("depol_p", self.depol_p)?;
        check_probability("meas_error", self.meas_error)
    }

    pub fn is_noiseless(&self) -> bool {
        self.sigma_phi == 0.0 && self.depol_p == 0.0 && self.meas_error == 0.0
    }

    /// Applies dephasing then depolarizing to `state`.
    pub fn apply_state_channels(&self, state: &DensityMatrix4) -> Result<DensityMatrix4> {
        let s = apply_collective_dephasing(state, self.sigma_phi);
        apply_depolarizing(&s, self.depol_p)
    }
}

fn up_count(index: usize) -> i32 {
    (index as u32).count_ones() as i32
}

/// Gaussian-averaged collective dephasing with std `sigma_phi` on the Φ
/// coherence. Diagonal entries are never changed.
pub fn apply_collective_dephasing(state: &DensityMatrix4, sigma_phi: f64) -> DensityMatrix4 {
    if sigma_phi == 0.0 {
        return *state;
    }
    let s2 = sigma_phi * sigma_phi;
    state.map_entries(|i, j, z| {
        let k = (up_count(i) - up_count(j)) as f64;
        z * (-k * k * s2 / 8.0).exp()
    })
}

/// One shot of collective dephasing: draws `ϕ ~ N(0, σ²)` and applies the
/// corresponding common-mode phase unitary.
pub fn sample_collective_dephasing<R: Rng + ?Sized>(
    state: &DensityMatrix4,
    sigma_phi: f64,
    rng: &mut R,
) -> DensityMatrix4 {
    if sigma_phi == 0.0 {
        return *state;
    }
    let phi = Normal::new(0.0, sigma_phi).expect("finite sigma").sample(rng);
    let u = Matrix4::from_fn(|i, j| {
        if i == j {
            Complex64::from_polar(1.0, up_count(i) as f64 * phi / 2.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    state.conjugate_by(&u)
}

/// `ρ → (1−p)ρ + p·I/4`.
pub fn apply_depolarizing(state: &DensityMatrix4, p: f64) -> Result<DensityMatrix4> {
    check_probability("depol_p", p)?;
    if p == 0.0 {
        return Ok(*state);
    }
    Ok(state.map_entries(|i, j, z| {
        let mixed = if i == j { 0.25 * p } else { 0.0 };
        z * (1.0 - p) + Complex64::new(mixed, 0.0)
    }))
}

/// Flips each memory's bright/dark outcome independently with probability
/// `eps`; populations are in `(↓↓, ↓↑, ↑↓, ↑↑)` order.
pub fn apply_measurement_error(pops: &[f64; 4], eps: f64) -> Result<[f64; 4]> {
    check_probability("meas_error", eps)?;
    let flip = |a: usize, b: usize| if a == b { 1.0 - eps } else { eps };
    let mut out = [0.0; 4];
    for (obs, slot) in out.iter_mut().enumerate() {
        *slot = (0..4)
            .map(|actual| flip(obs >> 1, actual >> 1) * flip(obs & 1, actual & 1) * pops[actual])
            .sum();
    }
    Ok(out)
}

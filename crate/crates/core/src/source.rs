//! Memory emission model and the polarization-to-frequency mapping that sets
//! the photon frequency difference Δω.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{check_probability, invalid, Result};
use crate::quantum::BellFamily;

/// One quantum memory as seen by the photonic link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryParams {
    /// Shift μ of |↑⟩ above line center in rad/s; |↓⟩ sits at −μ.
    pub zeeman_shift: f64,
    /// Radiative lifetime τ in seconds (linewidth Γ = 1/τ).
    pub lifetime_tau: f64,
    /// Collection × detection efficiency.
    pub efficiency: f64,
}

impl MemoryParams {
    pub fn new(zeeman_shift: f64, lifetime_tau: f64, efficiency: f64) -> Result<Self> {
        let p = Self {
            zeeman_shift,
            lifetime_tau,
            efficiency,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lifetime_tau > 0.0) || !self.lifetime_tau.is_finite() {
            return Err(invalid("lifetime_tau", format!("{} must be > 0", self.lifetime_tau)));
        }
        if !(self.zeeman_shift >= 0.0) || !self.zeeman_shift.is_finite() {
            return Err(invalid("zeeman_shift", format!("{} must be >= 0", self.zeeman_shift)));
        }
        check_probability("efficiency", self.efficiency)
    }

    pub fn linewidth(&self) -> f64 {
        1.0 / self.lifetime_tau
    }

    /// Normalized temporal intensity profile `(1/τ) e^{−t/τ}` for `t ≥ 0`.
    pub fn profile(&self, t: f64) -> f64 {
        if t < 0.0 {
            0.0
        } else {
            (-t / self.lifetime_tau).exp() / self.lifetime_tau
        }
    }
}

/// How photon polarization is tied to memory state at the analyzer.
///
/// `Waveplate` models a λ/2 plate at π/4 in memory B's path, which swaps H and
/// V for that memory; `Conventional` is the plate at 0 (or absent).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mapping {
    Conventional,
    Waveplate,
}

impl Mapping {
    pub fn as_str(self) -> &'static str {
        match self {
            Mapping::Conventional => "conventional",
            Mapping::Waveplate => "waveplate",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "conventional" => Some(Mapping::Conventional),
            "waveplate" => Some(Mapping::Waveplate),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    pub memory_a: MemoryParams,
    pub memory_b: MemoryParams,
    pub mapping: Mapping,
    /// Stable intermemory phase φ₀.
    pub phi_0: f64,
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        self.memory_a.validate()?;
        self.memory_b.validate()
    }

    /// Signed same-polarization photon frequency difference Δω (rad/s).
    ///
    /// Conventional: same-polarization photons come from the same atomic
    /// state, so Δω = μ_B − μ_A. Waveplate: they come from |↑⟩_A and |↓⟩_B,
    /// so Δω = μ_A + μ_B.
    pub fn delta_omega(&self) -> f64 {
        let (a, b) = (self.memory_a.zeeman_shift, self.memory_b.zeeman_shift);
        match self.mapping {
            Mapping::Conventional => b - a,
            Mapping::Waveplate => a + b,
        }
    }

    pub fn heralded_family(&self) -> BellFamily {
        match self.mapping {
            Mapping::Conventional => BellFamily::Psi,
            Mapping::Waveplate => BellFamily::Phi,
        }
    }

    pub fn swapped(&self) -> Self {
        Self {
            memory_a: self.memory_b,
            memory_b: self.memory_a,
            ..*self
        }
    }
}

/// Draws a photon emission time from `(1/τ) e^{−t/τ}`, measured from the
/// excitation trigger.
pub fn sample_emission_time<R: Rng + ?Sized>(params: &MemoryParams, rng: &mut R) -> f64 {
    // lifetime_tau > 0 is a MemoryParams invariant
    Exp::new(params.linewidth())
        .expect("positive rate")
        .sample(rng)
}

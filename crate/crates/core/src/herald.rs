//! Two-photon events through the partial Bell state analyzer (50:50
//! beamsplitter, a polarizing beamsplitter on each output port, four
//! detectors) and the memory state each herald projects onto.
//!
//! Heralding-pattern probabilities do not depend on Δω: the two amplitudes
//! contributing to a mixed-polarization coincidence are attached to
//! orthogonal memory states and never interfere in the click statistics.
//! Arrival times and routing are therefore sampled independently, and
//! same-polarization coincidences are simply non-heralding.
//!
//! Timing sign convention: the interarrival time entering the state phase is
//! `Δt = t_V − t_H`, the V-detector click time minus the H-detector click
//! time. It is signed, so for matched lifetimes it is Laplace distributed.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;

use crate::error::{invalid, Result};
use crate::quantum::{bell_state, BellFamily, PureState4};
use crate::source::{sample_emission_time, LinkConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Port {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarization {
    H,
    V,
}

/// One of the four analyzer detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DetectorId {
    pub port: Port,
    pub pol: Polarization,
}

impl DetectorId {
    pub const ALL: [DetectorId; 4] = [
        DetectorId::new(Port::One, Polarization::H),
        DetectorId::new(Port::One, Polarization::V),
        DetectorId::new(Port::Two, Polarization::H),
        DetectorId::new(Port::Two, Polarization::V),
    ];

    pub const fn new(port: Port, pol: Polarization) -> Self {
        Self { port, pol }
    }

    /// Two-character code such as `1H` or `2V`.
    pub fn code(&self) -> &'static str {
        match (self.port, self.pol) {
            (Port::One, Polarization::H) => "1H",
            (Port::One, Polarization::V) => "1V",
            (Port::Two, Polarization::H) => "2H",
            (Port::Two, Polarization::V) => "2V",
        }
    }

    pub fn parse(code: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.code() == code.trim())
    }
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Detector-pair phase φ_D: 0 when both clicks share a beamsplitter output
/// port, π when they come from opposite ports.
pub fn detector_pair_phase(first: DetectorId, second: DetectorId) -> f64 {
    if first.port == second.port {
        0.0
    } else {
        PI
    }
}

/// A successful two-photon coincidence. Times are in seconds from the
/// excitation trigger, ordered by click (`t1_true ≤ t2_true`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeraldEvent {
    pub event_id: u64,
    pub det_first: DetectorId,
    pub det_second: DetectorId,
    pub t1_true: f64,
    pub t2_true: f64,
    pub phi_d: f64,
    pub family: BellFamily,
    pub delta_omega: f64,
}

impl HeraldEvent {
    /// Click time of the H detector.
    pub fn t_h(&self) -> f64 {
        if self.det_first.pol == Polarization::H {
            self.t1_true
        } else {
            self.t2_true
        }
    }

    /// Click time of the V detector.
    pub fn t_v(&self) -> f64 {
        if self.det_first.pol == Polarization::V {
            self.t1_true
        } else {
            self.t2_true
        }
    }

    /// Signed interarrival time `t_V − t_H`.
    pub fn signed_dt(&self) -> f64 {
        self.t_v() - self.t_h()
    }

    /// `+1` when the H detector fired first, else `−1`.
    pub fn orientation(&self) -> f64 {
        if self.det_first.pol == Polarization::H {
            1.0
        } else {
            -1.0
        }
    }

    pub fn phi_d_is_pi(&self) -> bool {
        self.phi_d != 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoHerald {
    /// A photon was lost to collection/detection inefficiency.
    Efficiency,
    /// A photon arrived after the coincidence window closed.
    Window,
    /// Both photons had the same polarization.
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeraldOutcome {
    Herald(HeraldEvent),
    NoHerald(NoHerald),
}

impl HeraldOutcome {
    pub fn event(self) -> Option<HeraldEvent> {
        match self {
            HeraldOutcome::Herald(e) => Some(e),
            HeraldOutcome::NoHerald(_) => None,
        }
    }
}

/// Simulates one excitation attempt.
///
/// Draw order is fixed (both arrival times, both efficiency trials, then
/// port and polarization for each photon) so a given RNG stream always maps
/// to the same outcome.
pub fn sample_event<R: Rng + ?Sized>(
    config: &LinkConfig,
    window_t: f64,
    event_id: u64,
    rng: &mut R,
) -> Result<HeraldOutcome> {
    if !(window_t > 0.0) {
        return Err(invalid("window_T", format!("{window_t} must be > 0")));
    }
    let t_a = sample_emission_time(&config.memory_a, rng);
    let t_b = sample_emission_time(&config.memory_b, rng);
    let kept_a = rng.random::<f64>() < config.memory_a.efficiency;
    let kept_b = rng.random::<f64>() < config.memory_b.efficiency;
    let det_a = random_detector(rng);
    let det_b = random_detector(rng);

    if !(kept_a && kept_b) {
        return Ok(HeraldOutcome::NoHerald(NoHerald::Efficiency));
    }
    if t_a > window_t || t_b > window_t {
        return Ok(HeraldOutcome::NoHerald(NoHerald::Window));
    }
    if det_a.pol == det_b.pol {
        return Ok(HeraldOutcome::NoHerald(NoHerald::Pattern));
    }
    let ((t1, d1), (t2, d2)) = if t_a <= t_b {
        ((t_a, det_a), (t_b, det_b))
    } else {
        ((t_b, det_b), (t_a, det_a))
    };
    Ok(HeraldOutcome::Herald(HeraldEvent {
        event_id,
        det_first: d1,
        det_second: d2,
        t1_true: t1,
        t2_true: t2,
        phi_d: detector_pair_phase(d1, d2),
        family: config.heralded_family(),
        delta_omega: config.delta_omega(),
    }))
}

fn random_detector<R: Rng + ?Sized>(rng: &mut R) -> DetectorId {
    let port = if rng.random::<bool>() { Port::Two } else { Port::One };
    let pol = if rng.random::<bool>() {
        Polarization::V
    } else {
        Polarization::H
    };
    DetectorId::new(port, pol)
}

/// Relative phase θ of the heralded state after waiting `t_prime`:
/// `Δω·Δt + 2Δω·t′ − φ_D + φ₀` for Ψ and `Δω·Δt + 2Δω·t′ + φ_D + φ₀` for Φ.
pub fn state_phase(
    family: BellFamily,
    delta_omega: f64,
    dt: f64,
    t_prime: f64,
    phi_d: f64,
    phi_0: f64,
) -> f64 {
    let sign_d = match family {
        BellFamily::Psi => -1.0,
        BellFamily::Phi => 1.0,
    };
    delta_omega * dt + 2.0 * delta_omega * t_prime + sign_d * phi_d + phi_0
}

/// Weight of the second branch (`|↑↓⟩` for Ψ, `|↑↑⟩` for Φ) given the click
/// times. That branch has memory A's photon on the V detector and memory B's
/// on the H detector, so
/// `w = f_A(t_V) f_B(t_H) / (f_A(t_H) f_B(t_V) + f_A(t_V) f_B(t_H))`.
/// Exactly ½ for matched lifetimes.
pub fn branch_weight(config: &LinkConfig, t_h: f64, t_v: f64) -> f64 {
    let (ta, tb) = (config.memory_a.lifetime_tau, config.memory_b.lifetime_tau);
    if ta == tb {
        return 0.5;
    }
    // log-ratio of the two amplitudes' intensities; the 1/τ prefactors cancel
    let log_second = -t_v / ta - t_h / tb;
    let log_first = -t_h / ta - t_v / tb;
    1.0 / (1.0 + (log_first - log_second).exp())
}

/// The memory state projected by `event`, evaluated `t_prime` after the
/// second click. Lifetime mismatch changes amplitudes, never the phase.
pub fn conditioned_state(
    event: &HeraldEvent,
    t_prime: f64,
    config: &LinkConfig,
) -> Result<PureState4> {
    if !(t_prime >= 0.0) {
        return Err(invalid("t_prime", format!("{t_prime} must be >= 0")));
    }
    let theta = state_phase(
        event.family,
        event.delta_omega,
        event.signed_dt(),
        t_prime,
        event.phi_d,
        config.phi_0,
    );
    let w = branch_weight(config, event.t_h(), event.t_v());
    bell_state(event.family, theta, w)
}

/// Closed-form herald probability per attempt:
/// `η_A η_B (1 − e^{−T/τ_A})(1 − e^{−T/τ_B}) / 2`.
pub fn herald_probability(config: &LinkConfig, window_t: f64) -> f64 {
    let a = &config.memory_a;
    let b = &config.memory_b;
    let in_window = |tau: f64| 1.0 - (-window_t / tau).exp();
    0.5 * a.efficiency * b.efficiency * in_window(a.lifetime_tau) * in_window(b.lifetime_tau)
}

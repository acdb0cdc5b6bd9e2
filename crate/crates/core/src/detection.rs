//! Detector timing chain: Gaussian jitter, floor quantization onto the
//! t_r grid, and the coincidence-window check on measured times.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Result};
use crate::herald::HeraldEvent;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    /// Timing resolution (bin width), seconds.
    pub t_r: f64,
    /// Gaussian 1σ timing jitter per click, seconds.
    pub jitter_sigma: f64,
    /// Coincidence window T, seconds.
    pub window_t: f64,
}

impl DetectorModel {
    pub fn new(t_r: f64, jitter_sigma: f64, window_t: f64) -> Result<Self> {
        let m = Self {
            t_r,
            jitter_sigma,
            window_t,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_r > 0.0) {
            return Err(invalid("t_r", format!("{} must be > 0", self.t_r)));
        }
        if !(self.jitter_sigma >= 0.0) {
            return Err(invalid("jitter_sigma", format!("{} must be >= 0", self.jitter_sigma)));
        }
        if !(self.window_t > 0.0) {
            return Err(invalid("window_T", format!("{} must be > 0", self.window_t)));
        }
        Ok(())
    }

    /// Bin index of a measured time (floor, TDC style). The 1e-9-bin nudge
    /// keeps grid-aligned times in their own bin despite rounding in `t / t_r`.
    pub fn bin_of(&self, t: f64) -> i64 {
        (t / self.t_r + 1e-9).floor() as i64
    }

    /// Phase spread Δω·t_r of a single herald; coherent only when this is ≪ 2π.
    pub fn phase_uncertainty(&self, delta_omega: f64) -> f64 {
        delta_omega.abs() * self.t_r
    }
}

/// Detector-level view of a herald.
///
/// `t1_*`/`t2_*` follow the event's click order. `dt_q` is the signed
/// quantized interval V-click minus H-click, an integer multiple of `t_r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingRecord {
    pub t1_meas: f64,
    pub t2_meas: f64,
    pub bin1: i64,
    pub bin2: i64,
    pub t1_q: f64,
    pub t2_q: f64,
    pub dt_q: f64,
    pub t_r: f64,
}

impl TimingRecord {
    /// Builds a record from bin indices; `orientation` is `+1` when click 1
    /// is the H detector.
    pub fn from_bins(bin1: i64, bin2: i64, orientation: f64, t_r: f64) -> Self {
        let t1_q = bin1 as f64 * t_r;
        let t2_q = bin2 as f64 * t_r;
        Self {
            t1_meas: t1_q,
            t2_meas: t2_q,
            bin1,
            bin2,
            t1_q,
            t2_q,
            dt_q: orientation * (bin2 - bin1) as f64 * t_r,
            t_r,
        }
    }

    /// Signed bin offset V minus H.
    pub fn dt_bins(&self) -> i64 {
        (self.dt_q / self.t_r).round() as i64
    }
}

/// Jitters, quantizes and window-checks both clicks of `event`. Returns
/// `None` when either measured time falls outside `[0, T]`.
pub fn record<R: Rng + ?Sized>(
    event: &HeraldEvent,
    model: &DetectorModel,
    rng: &mut R,
) -> Option<TimingRecord> {
    let (t1_meas, t2_meas) = if model.jitter_sigma > 0.0 {
        let normal = Normal::new(0.0, model.jitter_sigma).expect("finite sigma");
        (
            event.t1_true + normal.sample(rng),
            event.t2_true + normal.sample(rng),
        )
    } else {
        (event.t1_true, event.t2_true)
    };
    let inside = |t: f64| (0.0..=model.window_t).contains(&t);
    if !inside(t1_meas) || !inside(t2_meas) {
        return None;
    }
    let bin1 = model.bin_of(t1_meas);
    let bin2 = model.bin_of(t2_meas);
    let mut rec = TimingRecord::from_bins(bin1, bin2, event.orientation(), model.t_r);
    rec.t1_meas = t1_meas;
    rec.t2_meas = t2_meas;
    Some(rec)
}

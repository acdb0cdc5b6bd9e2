//! Mitigation strategies for the Δt-dependent phase: postselection on the
//! interarrival time, gating the coincidence window, and feedforward.

use std::f64::consts::TAU;
use std::fmt;

use rayon::prelude::*;

use crate::analysis::{scan_coordinate, ParityScan, ScanMode};
use crate::detection::{record, DetectorModel, TimingRecord};
use crate::error::{invalid, Error, Result};
use crate::herald::{sample_event, HeraldEvent};
use crate::quantum::BellFamily;
use crate::rng::{stream, Domain};
use crate::source::LinkConfig;
use crate::units::{ns, to_ns};

/// How a feedforward correction is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedforwardMechanism {
    /// Wait `t′` so the `2Δω·t′` evolution brings the phase to φ_c.
    Wait,
    /// Relabel the analysis phases by the known `Δω·dt_q`.
    PhaseShift,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    AcceptAll,
    /// Keep heralds with `|dt_q| ≤ dt_max`, or `|dt_q| < dt_max` when
    /// `strict` (with `dt_max = t_r` that is "same bin only").
    Postselect { dt_max: f64, strict: bool },
    /// Shrink the coincidence window: both clicks' bins must end by `window`.
    Gate { window: f64 },
    Feedforward { phi_c: f64, mechanism: FeedforwardMechanism },
}

// Absolute slack for comparing quantized times, far below any t_r.
const TIME_EPS: f64 = 1e-15;

impl Strategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Strategy::Postselect { dt_max, .. } if !(dt_max > 0.0) => {
                Err(invalid("dt_max", format!("{dt_max} must be > 0")))
            }
            Strategy::Gate { window } if !(window > 0.0) => {
                Err(invalid("window", format!("{window} must be > 0")))
            }
            _ => Ok(()),
        }
    }

    /// Whether the strategy keeps this herald.
    ///
    /// Gating works on quantized times: a click passes when its whole bin
    /// lies inside the window, which for a window on the t_r grid is the
    /// same as the measured time being inside it.
    pub fn accept(&self, rec: &TimingRecord) -> bool {
        match *self {
            Strategy::AcceptAll | Strategy::Feedforward { .. } => true,
            Strategy::Postselect { dt_max, strict: false } => rec.dt_q.abs() <= dt_max + TIME_EPS,
            Strategy::Postselect { dt_max, strict: true } => rec.dt_q.abs() < dt_max - TIME_EPS,
            Strategy::Gate { window } => {
                rec.t1_q + rec.t_r <= window + TIME_EPS && rec.t2_q + rec.t_r <= window + TIME_EPS
            }
        }
    }

    /// Parses `accept-all`, `postselect:dt_max_ns=5[,strict=true]`,
    /// `gate:window_ns=5`, `feedforward:phi_c_rad=0,mech=wait|phaseshift`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec_err = |reason: String| Error::StrategySpec {
            spec: spec.to_string(),
            reason,
        };
        let (name, args) = spec.trim().split_once(':').unwrap_or((spec.trim(), ""));
        let mut kv = Vec::new();
        for part in args.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| spec_err(format!("`{part}` is not key=value")))?;
            kv.push((k.trim(), v.trim()));
        }
        let num = |key: &str| -> Result<Option<f64>> {
            match kv.iter().find(|(k, _)| *k == key) {
                Some((_, v)) => v
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| spec_err(format!("`{key}` value `{v}` is not a number"))),
                None => Ok(None),
            }
        };
        let known = |allowed: &[&str]| -> Result<()> {
            match kv.iter().find(|(k, _)| !allowed.contains(k)) {
                Some((k, _)) => Err(spec_err(format!("unknown argument `{k}`"))),
                None => Ok(()),
            }
        };
        let s = match name {
            "accept-all" => {
                known(&[])?;
                Strategy::AcceptAll
            }
            "postselect" => {
                known(&["dt_max_ns", "strict"])?;
                let dt = num("dt_max_ns")?.ok_or_else(|| spec_err("missing dt_max_ns".into()))?;
                let strict = match kv.iter().find(|(k, _)| *k == "strict") {
                    None => false,
                    Some((_, v)) => v
                        .parse::<bool>()
                        .map_err(|_| spec_err(format!("strict value `{v}` is not true/false")))?,
                };
                Strategy::Postselect { dt_max: ns(dt), strict }
            }
            "gate" => {
                known(&["window_ns"])?;
                let w = num("window_ns")?.ok_or_else(|| spec_err("missing window_ns".into()))?;
                Strategy::Gate { window: ns(w) }
            }
            "feedforward" => {
                known(&["phi_c_rad", "mech"])?;
                let phi_c = num("phi_c_rad")?.unwrap_or(0.0);
                let mechanism = match kv.iter().find(|(k, _)| *k == "mech").map(|(_, v)| *v) {
                    None | Some("wait") => FeedforwardMechanism::Wait,
                    Some("phaseshift") | Some("shift") | Some("phase-shift") => FeedforwardMechanism::PhaseShift,
                    Some(other) => return Err(spec_err(format!("unknown mechanism `{other}`"))),
                };
                Strategy::Feedforward { phi_c, mechanism }
            }
            other => return Err(spec_err(format!("unknown strategy `{other}`"))),
        };
        s.validate().map_err(|e| spec_err(e.to_string()))?;
        Ok(s)
    }

    /// Canonical spec string; `parse(tag())` returns the same strategy.
    pub fn tag(&self) -> String {
        match *self {
            Strategy::AcceptAll => "accept-all".into(),
            Strategy::Postselect { dt_max, strict: false } => {
                format!("postselect:dt_max_ns={}", ns_text(dt_max))
            }
            Strategy::Postselect { dt_max, strict: true } => {
                format!("postselect:dt_max_ns={},strict=true", ns_text(dt_max))
            }
            Strategy::Gate { window } => format!("gate:window_ns={}", ns_text(window)),
            Strategy::Feedforward { phi_c, mechanism } => format!(
                "feedforward:phi_c_rad={},mech={}",
                phi_c,
                match mechanism {
                    FeedforwardMechanism::Wait => "wait",
                    FeedforwardMechanism::PhaseShift => "phaseshift",
                }
            ),
        }
    }
}

/// Nanoseconds rounded to 1 fs, so `5e-9` prints as `5`.
fn ns_text(t: f64) -> f64 {
    (to_ns(t) * 1e6).round() / 1e6
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

/// Wait time after the herald that brings the state phase to `phi_c`:
/// `t′ = mod₂π(φ_c ± φ_D − φ₀ − Δω·dt_q) / 2Δω`, upper sign for Φ.
/// The result lies in `[0, π/|Δω|)`.
pub fn feedforward_wait(
    dt_q: f64,
    phi_d: f64,
    family: BellFamily,
    delta_omega: f64,
    phi_0: f64,
    phi_c: f64,
) -> Result<f64> {
    if delta_omega == 0.0 || !delta_omega.is_finite() {
        return Err(Error::ZeroDeltaOmega);
    }
    let sign_d = match family {
        BellFamily::Phi => 1.0,
        BellFamily::Psi => -1.0,
    };
    let target = phi_c + sign_d * phi_d - phi_0 - delta_omega * dt_q;
    // for Δω < 0 the accrued phase 2Δω·t′ runs backwards
    let t = if delta_omega > 0.0 {
        target.rem_euclid(TAU) / (2.0 * delta_omega)
    } else {
        (-target).rem_euclid(TAU) / (-2.0 * delta_omega)
    };
    Ok(t)
}

/// Longest wait `feedforward_wait` can return: `π/|Δω|`.
pub fn max_feedforward_wait(delta_omega: f64) -> f64 {
    std::f64::consts::PI / delta_omega.abs()
}

/// Re-expresses a scan as if its analysis phases had been advanced by the
/// known phase `Δω·dt_q`, which aligns fringes from different Δt bins.
///
/// Each point's fringe coordinate moves by `−Δω·dt_q` for Φ (the fringe is
/// `cos(φ_a + φ_b − Δω·Δt − …)`) and `+Δω·dt_q` for Ψ, split evenly over the
/// two analysis phases.
pub fn postprocess_shift(scan: &ParityScan, family: BellFamily, delta_omega: f64, dt_q: f64) -> ParityScan {
    let shift = delta_omega * dt_q;
    let mut out = scan.clone();
    for p in &mut out.points {
        let before = scan_coordinate(family, p.phi_a, p.phi_b);
        match family {
            BellFamily::Phi => {
                p.phi_a -= shift / 2.0;
                p.phi_b -= shift / 2.0;
            }
            BellFamily::Psi => {
                p.phi_a += shift / 2.0;
                p.phi_b -= shift / 2.0;
            }
        }
        debug_assert!({
            let after = scan_coordinate(family, p.phi_a, p.phi_b);
            let expected = if family == BellFamily::Phi { -shift } else { shift };
            (after - before - expected).abs() < 1e-9
        });
    }
    if out.mode != ScanMode::Free && scan.mode != ScanMode::for_family(family) {
        out.mode = ScanMode::Free;
    }
    out
}

/// Fraction of heralds a strategy keeps relative to accepting all of them
/// within the same coincidence window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub r_over_r0: f64,
    /// `None` when no heralds were accepted.
    pub stderr: Option<f64>,
    pub accepted: usize,
    pub total: usize,
    pub closed_form: Option<f64>,
}

impl RateEstimate {
    pub fn from_counts(accepted: usize, total: usize, closed_form: Option<f64>) -> Self {
        let r = if total == 0 { f64::NAN } else { accepted as f64 / total as f64 };
        let stderr = if accepted == 0 || total == 0 {
            None
        } else {
            Some((r * (1.0 - r) / total as f64).sqrt())
        };
        Self {
            r_over_r0: r,
            stderr,
            accepted,
            total,
            closed_form,
        }
    }
}

/// Heralded, recorded events for attempt indices `0..`, in index order,
/// until `n_events` have been collected. Each attempt uses its own stream,
/// so the result is independent of the thread count.
pub fn heralded_records(
    link: &LinkConfig,
    detector: &DetectorModel,
    n_events: usize,
    seed: u64,
) -> Result<Vec<(HeraldEvent, TimingRecord)>> {
    link.validate()?;
    detector.validate()?;
    let p = crate::herald::herald_probability(link, detector.window_t);
    if n_events > 0 && p <= 0.0 {
        return Err(invalid("efficiency", "herald probability is zero"));
    }
    let mut out = Vec::with_capacity(n_events);
    let mut next = 0u64;
    while out.len() < n_events {
        let missing = (n_events - out.len()) as f64;
        let chunk = ((missing / p) * 1.1 + 64.0) as u64;
        let batch: Vec<Option<(HeraldEvent, TimingRecord)>> = (next..next + chunk)
            .into_par_iter()
            .map(|i| -> Result<_> {
                let mut rng = stream(seed, Domain::Events, i);
                let outcome = sample_event(link, detector.window_t, i, &mut rng)?;
                Ok(outcome
                    .event()
                    .and_then(|ev| record(&ev, detector, &mut rng).map(|r| (ev, r))))
            })
            .collect::<Result<_>>()?;
        next += chunk;
        out.extend(batch.into_iter().flatten().take(n_events - out.len()));
    }
    Ok(out)
}

/// Monte Carlo `R/R₀` over `n_events` heralds, with the closed form when
/// one exists.
pub fn relative_rate(
    strategy: &Strategy,
    link: &LinkConfig,
    detector: &DetectorModel,
    n_events: usize,
    seed: u64,
) -> Result<RateEstimate> {
    if n_events < 1000 {
        return Err(invalid("n_events", format!("{n_events} < 1000")));
    }
    let events = heralded_records(link, detector, n_events, seed)?;
    let accepted = events.iter().filter(|(_, r)| strategy.accept(r)).count();
    Ok(RateEstimate::from_counts(
        accepted,
        events.len(),
        closed_form_rate(strategy, link, detector),
    ))
}

/// Probability that a photon lands in each `t_r` bin of the window, for an
/// exponential profile truncated at the window.
fn bin_probabilities(tau: f64, t_r: f64, window: f64) -> Vec<f64> {
    let n = (window / t_r - 1e-9).ceil().max(1.0) as usize;
    let z = 1.0 - (-window / tau).exp();
    (0..n)
        .map(|k| {
            let lo = k as f64 * t_r;
            let hi = ((k + 1) as f64 * t_r).min(window);
            ((-lo / tau).exp() - (-hi / tau).exp()) / z
        })
        .collect()
}

/// Exact `R/R₀` for matched lifetimes and zero jitter, including the window
/// truncation. `None` when those assumptions do not hold.
pub fn closed_form_rate(strategy: &Strategy, link: &LinkConfig, detector: &DetectorModel) -> Option<f64> {
    let tau = link.memory_a.lifetime_tau;
    if link.memory_b.lifetime_tau != tau || detector.jitter_sigma != 0.0 {
        return None;
    }
    let (t_r, window) = (detector.t_r, detector.window_t);
    match *strategy {
        Strategy::AcceptAll | Strategy::Feedforward { .. } => Some(1.0),
        Strategy::Gate { window: g } => {
            let bins = ((g + TIME_EPS) / t_r).floor();
            let edge = (bins * t_r).min(window);
            let frac = (1.0 - (-edge / tau).exp()) / (1.0 - (-window / tau).exp());
            Some(frac * frac)
        }
        Strategy::Postselect { dt_max, strict } => {
            let ratio = dt_max / t_r;
            let max_bins = if strict {
                (ratio - 1e-9).ceil() as i64 - 1
            } else {
                (ratio + 1e-9).floor() as i64
            };
            if max_bins < 0 {
                return Some(0.0);
            }
            let p = bin_probabilities(tau, t_r, window);
            let mut total = 0.0;
            for (i, pi) in p.iter().enumerate() {
                for (j, pj) in p.iter().enumerate() {
                    if (i as i64 - j as i64).abs() <= max_bins {
                        total += pi * pj;
                    }
                }
            }
            Some(total)
        }
    }
}

/// Same-bin probability for an untruncated exponential profile:
/// `(1 − e^{−t_r/τ})² / (1 − e^{−2t_r/τ})`.
pub fn same_bin_rate_untruncated(tau: f64, t_r: f64) -> f64 {
    let q = (-t_r / tau).exp();
    (1.0 - q).powi(2) / (1.0 - q * q)
}

/// Reference `R/R₀` values reported for the experiment, for context only.
pub fn experimental_reference(strategy: &Strategy) -> Option<f64> {
    match strategy {
        Strategy::AcceptAll | Strategy::Feedforward { .. } => Some(1.0),
        Strategy::Postselect { .. } => Some(0.2),
        Strategy::Gate { .. } => Some(0.07),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{fit_fringe, ScanPoint};
    use crate::herald::state_phase;
    use crate::units::{mhz_to_angular, wrap_pi};
    use approx::assert_abs_diff_eq;

    fn rec(t1_ns: f64, t2_ns: f64, t_r_ns: f64) -> TimingRecord {
        let m = DetectorModel::new(ns(t_r_ns), 0.0, ns(60.0)).unwrap();
        TimingRecord::from_bins(m.bin_of(ns(t1_ns)), m.bin_of(ns(t2_ns)), 1.0, ns(t_r_ns))
    }

    #[test]
    fn accept_examples() {
        let ps = Strategy::Postselect { dt_max: ns(5.0), strict: false };
        assert!(ps.accept(&rec(2.0, 3.0, 5.0)));
        assert!(!ps.accept(&rec(2.0, 12.0, 5.0)));
        let gate = Strategy::Gate { window: ns(5.0) };
        assert!(gate.accept(&rec(2.0, 4.0, 5.0)));
        assert!(!gate.accept(&rec(2.0, 7.0, 5.0)));
        assert!(gate.accept(&rec(2.0, 4.0, 0.001)));
        assert!(!gate.accept(&rec(2.0, 7.0, 0.001)));
        let strict = Strategy::Postselect { dt_max: ns(5.0), strict: true };
        assert!(strict.accept(&rec(1.0, 4.0, 5.0)));
        assert!(!strict.accept(&rec(4.0, 6.0, 5.0)));
        assert!(ps.accept(&rec(4.0, 6.0, 5.0)));
        assert!(Strategy::AcceptAll.accept(&rec(0.0, 59.0, 5.0)));
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in [
            "accept-all",
            "postselect:dt_max_ns=5",
            "postselect:dt_max_ns=5,strict=true",
            "gate:window_ns=5",
            "feedforward:phi_c_rad=0,mech=wait",
            "feedforward:phi_c_rad=1.5,mech=phaseshift",
        ] {
            let parsed = Strategy::parse(s).unwrap();
            assert_eq!(parsed.tag(), s);
            assert_eq!(Strategy::parse(&parsed.tag()).unwrap(), parsed);
        }
        assert!(Strategy::parse("postselect").is_err());
        assert!(Strategy::parse("postselect:dt_max_ns=-1").is_err());
        assert!(Strategy::parse("gate:width=3").is_err());
        assert!(Strategy::parse("teleport").is_err());
        assert!(Strategy::parse("feedforward:mech=magic").is_err());
    }

    #[test]
    fn wait_bounds() {
        let slow = mhz_to_angular(1.35);
        let fast = mhz_to_angular(28.35);
        assert_abs_diff_eq!(max_feedforward_wait(slow), ns(370.4), epsilon = ns(0.05));
        assert_abs_diff_eq!(max_feedforward_wait(fast), ns(17.6), epsilon = ns(0.05));
        let t = feedforward_wait(0.0, 0.0, BellFamily::Phi, fast, 0.0, 0.0).unwrap();
        assert_eq!(t, 0.0);
        assert!(matches!(
            feedforward_wait(0.0, 0.0, BellFamily::Psi, 0.0, 0.0, 0.0),
            Err(Error::ZeroDeltaOmega)
        ));
    }

    #[test]
    fn wait_reaches_target_phase() {
        for &dw in &[mhz_to_angular(28.35), mhz_to_angular(-1.35), mhz_to_angular(1.35)] {
            for family in [BellFamily::Psi, BellFamily::Phi] {
                for &(dt, phi_d, phi_0, phi_c) in &[
                    (ns(3.0), 0.0, 0.2, 1.0),
                    (ns(-17.0), std::f64::consts::PI, -1.1, -2.5),
                    (ns(40.0), std::f64::consts::PI, 0.0, 0.0),
                ] {
                    let t = feedforward_wait(dt, phi_d, family, dw, phi_0, phi_c).unwrap();
                    assert!(t >= 0.0 && t < max_feedforward_wait(dw));
                    let theta = state_phase(family, dw, dt, t, phi_d, phi_0);
                    assert_abs_diff_eq!(wrap_pi(theta - phi_c), 0.0, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn shift_aligns_bins() {
        let dw = mhz_to_angular(28.35);
        let family = BellFamily::Phi;
        let mut phases = Vec::new();
        let mut shifted = Vec::new();
        for k in 0..4 {
            let dt = ns(5.0 * k as f64);
            let scan = ParityScan {
                mode: ScanMode::SumPhase,
                points: crate::analysis::scan_design(family, 16)
                    .into_iter()
                    .map(|(a, b)| ScanPoint {
                        phi_a: a,
                        phi_b: b,
                        p_odd: 0.5 - 0.4 * (a + b - dw * dt - 0.3).cos(),
                        shots: 1,
                    })
                    .collect(),
                exact: true,
            };
            phases.push(fit_fringe(&scan, family).unwrap().phase);
            shifted.push(fit_fringe(&postprocess_shift(&scan, family, dw, dt), family).unwrap().phase);
        }
        for w in phases.windows(2) {
            assert_abs_diff_eq!(wrap_pi(w[0] - w[1]), 0.8906, epsilon = 1e-4);
        }
        for p in &shifted {
            assert_abs_diff_eq!(wrap_pi(p - shifted[0]), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_shift_is_identity() {
        let scan = ParityScan {
            mode: ScanMode::SumPhase,
            points: vec![ScanPoint { phi_a: 0.1, phi_b: 0.1, p_odd: 0.3, shots: 4 }],
            exact: false,
        };
        assert_eq!(postprocess_shift(&scan, BellFamily::Phi, 1e8, 0.0), scan);
    }

    #[test]
    fn closed_forms() {
        let link = crate::scenario::paper_link(crate::source::Mapping::Waveplate);
        let det = DetectorModel::new(ns(5.0), 0.0, ns(60.0)).unwrap();
        let gate = closed_form_rate(&Strategy::Gate { window: ns(5.0) }, &link, &det).unwrap();
        let q = (-5.0f64 / 8.1).exp();
        assert_abs_diff_eq!(gate, ((1.0 - q) / (1.0 - (-60.0f64 / 8.1).exp())).powi(2), epsilon = 1e-12);
        assert_abs_diff_eq!(gate, 0.2124, epsilon = 1e-4);
        let same = closed_form_rate(&Strategy::Postselect { dt_max: ns(5.0), strict: true }, &link, &det).unwrap();
        assert_abs_diff_eq!(same, 0.2996, epsilon = 1e-4);
        assert_abs_diff_eq!(same_bin_rate_untruncated(8.1, 5.0), 0.2992, epsilon = 1e-4);
        let all = closed_form_rate(&Strategy::Postselect { dt_max: ns(60.0), strict: false }, &link, &det).unwrap();
        assert_abs_diff_eq!(all, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn postselect_rate_monotone() {
        let link = crate::scenario::paper_link(crate::source::Mapping::Waveplate);
        let det = DetectorModel::new(ns(5.0), 0.0, ns(60.0)).unwrap();
        let events = heralded_records(&link, &det, 5000, 7).unwrap();
        let mut last = 0.0;
        for k in 1..=12 {
            let s = Strategy::Postselect { dt_max: ns(5.0 * k as f64), strict: false };
            let r = events.iter().filter(|(_, r)| s.accept(r)).count() as f64 / events.len() as f64;
            assert!(r >= last);
            last = r;
        }
        assert_eq!(last, 1.0);
    }

    #[test]
    fn rate_requires_enough_events() {
        let link = crate::scenario::paper_link(crate::source::Mapping::Waveplate);
        let det = DetectorModel::new(ns(5.0), 0.0, ns(60.0)).unwrap();
        assert!(relative_rate(&Strategy::AcceptAll, &link, &det, 10, 0).is_err());
        let r = relative_rate(&Strategy::AcceptAll, &link, &det, 2000, 0).unwrap();
        assert_eq!(r.r_over_r0, 1.0);
        let none = RateEstimate::from_counts(0, 100, None);
        assert!(none.stderr.is_none());
    }
}

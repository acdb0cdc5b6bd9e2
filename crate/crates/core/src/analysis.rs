//! Parity scans, fringe fitting and fidelity estimation.
//!
//! The odd-parity fringe after π/2 analysis pulses with phases `φ_a`, `φ_b`
//! is modeled as
//!
//! ```text
//! P^o = C − Π·cos(x + c)
//! ```
//!
//! with scan coordinate `x = φ_a − φ_b` for Ψ and `x = φ_a + φ_b` for Φ. For
//! an ideal herald `c = Δω·Δt − φ_D + φ₀` (Ψ) or `c = −(Δω·Δt + φ_D + φ₀)`
//! (Φ), so the fitted phase advances with `+Δω` for Ψ and `−Δω` for Φ.
//! The fit is linear in `(C, Π cos c, Π sin c)` and therefore exact and
//! deterministic.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{invalid, Error, Result};
use crate::noise::{apply_measurement_error, NoiseModel};
use crate::quantum::{apply_local_rotations, populations, BellFamily, DensityMatrix4, Rotation};
use crate::units::wrap_pi;

/// How the two analysis phases are tied together in a scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanMode {
    /// `φ_a = −φ_b`: only the Ψ fringe moves.
    DiffPhase,
    /// `φ_a = φ_b`: only the Φ fringe moves.
    SumPhase,
    Free,
}

impl ScanMode {
    pub fn for_family(family: BellFamily) -> Self {
        match family {
            BellFamily::Psi => ScanMode::DiffPhase,
            BellFamily::Phi => ScanMode::SumPhase,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub phi_a: f64,
    pub phi_b: f64,
    pub p_odd: f64,
    /// Number of shots behind `p_odd`; for exact scans this is the number
    /// of heralds the point stands for and only sets its fit weight.
    pub shots: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParityScan {
    pub mode: ScanMode,
    pub points: Vec<ScanPoint>,
    /// `p_odd` values are exact probabilities rather than shot frequencies.
    pub exact: bool,
}

impl ParityScan {
    pub fn validate(&self) -> Result<()> {
        for p in &self.points {
            if p.shots == 0 {
                return Err(invalid("shots", "every scan point needs at least one shot"));
            }
            if !(0.0..=1.0).contains(&p.p_odd) {
                return Err(invalid("p_odd", format!("{} is not a probability", p.p_odd)));
            }
        }
        Ok(())
    }

    /// Concatenates scans that share a mode. Used to pool shifted bins.
    pub fn merged<'a>(scans: impl IntoIterator<Item = &'a ParityScan>) -> Option<ParityScan> {
        let mut iter = scans.into_iter();
        let first = iter.next()?;
        let mut out = first.clone();
        for s in iter {
            out.points.extend_from_slice(&s.points);
            out.exact &= s.exact;
            if s.mode != out.mode {
                out.mode = ScanMode::Free;
            }
        }
        Some(out)
    }
}

/// Fringe coordinate `x` for a pair of analysis phases.
pub fn scan_coordinate(family: BellFamily, phi_a: f64, phi_b: f64) -> f64 {
    match family {
        BellFamily::Psi => phi_a - phi_b,
        BellFamily::Phi => phi_a + phi_b,
    }
}

/// `n` equally spaced fringe coordinates over 2π, split symmetrically over
/// the two analysis phases.
pub fn scan_design(family: BellFamily, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let x = TAU * k as f64 / n as f64;
            match family {
                BellFamily::Psi => (x / 2.0, -x / 2.0),
                BellFamily::Phi => (x / 2.0, x / 2.0),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParityMeasurement {
    pub p_odd: f64,
    /// Outcome counts in `(00, 0↑, ↑0, ↑↑)` order; zero in exact mode.
    pub counts: [u64; 4],
}

/// Draws `shots` multinomial samples from `probs`.
pub fn sample_counts<R: Rng + ?Sized>(probs: &[f64; 4], shots: u64, rng: &mut R) -> [u64; 4] {
    let mut counts = [0u64; 4];
    let mut remaining = shots;
    let mut mass = 1.0;
    for k in 0..3 {
        if remaining == 0 {
            break;
        }
        let p = if mass > 0.0 { (probs[k] / mass).clamp(0.0, 1.0) } else { 0.0 };
        let c = Binomial::new(remaining, p).expect("p in [0, 1]").sample(rng);
        counts[k] = c;
        remaining -= c;
        mass -= probs[k];
    }
    counts[3] = remaining;
    counts
}

fn observed_populations(state: &DensityMatrix4, noise: &NoiseModel) -> Result<[f64; 4]> {
    let noisy = noise.apply_state_channels(state)?;
    apply_measurement_error(&populations(&noisy), noise.meas_error)
}

/// Odd-parity probability after the analysis pulses, including noise and
/// state-detection error. `shots == 0` returns the exact probability.
pub fn measure_parity<R: Rng + ?Sized>(
    state: &DensityMatrix4,
    phi_a: f64,
    phi_b: f64,
    shots: u64,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<ParityMeasurement> {
    let noisy = noise.apply_state_channels(state)?;
    let rotated = apply_local_rotations(&noisy, &Rotation::analysis(phi_a), &Rotation::analysis(phi_b));
    let pops = apply_measurement_error(&populations(&rotated), noise.meas_error)?;
    Ok(finish_measurement(&pops, shots, rng, |p| p[1] + p[2]))
}

/// Populations without analysis pulses, as used for the fidelity's
/// population term.
pub fn measure_populations<R: Rng + ?Sized>(
    state: &DensityMatrix4,
    shots: u64,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<([f64; 4], [u64; 4])> {
    let pops = observed_populations(state, noise)?;
    if shots == 0 {
        return Ok((pops, [0; 4]));
    }
    let counts = sample_counts(&pops, shots, rng);
    let freq = counts.map(|c| c as f64 / shots as f64);
    Ok((freq, counts))
}

fn finish_measurement<R: Rng + ?Sized>(
    pops: &[f64; 4],
    shots: u64,
    rng: &mut R,
    stat: impl Fn(&[f64; 4]) -> f64,
) -> ParityMeasurement {
    if shots == 0 {
        return ParityMeasurement {
            p_odd: stat(pops).clamp(0.0, 1.0),
            counts: [0; 4],
        };
    }
    let counts = sample_counts(pops, shots, rng);
    ParityMeasurement {
        p_odd: (counts[1] + counts[2]) as f64 / shots as f64,
        counts,
    }
}

/// Runs a full scan on `state` over `n_phases` equally spaced coordinates.
/// `weight` is stored as the point's shot count in exact mode.
pub fn simulate_scan<R: Rng + ?Sized>(
    state: &DensityMatrix4,
    family: BellFamily,
    n_phases: usize,
    shots: u64,
    weight: u64,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<ParityScan> {
    let mut points = Vec::with_capacity(n_phases);
    for (phi_a, phi_b) in scan_design(family, n_phases) {
        let m = measure_parity(state, phi_a, phi_b, shots, noise, rng)?;
        points.push(ScanPoint {
            phi_a,
            phi_b,
            p_odd: m.p_odd,
            shots: if shots == 0 { weight.max(1) } else { shots },
        });
    }
    Ok(ParityScan {
        mode: ScanMode::for_family(family),
        points,
        exact: shots == 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeFit {
    /// Fringe contrast Π (the coherence magnitude for a Bell-family state).
    pub contrast_pi: f64,
    /// Constant `c` in `C − Π cos(x + c)`, in `(−π, π]`.
    pub phase: f64,
    pub offset: f64,
    pub rms_residual: f64,
    pub phase_stderr: f64,
    pub pi_stderr: f64,
    pub n_points: usize,
}

fn check_coverage(xs: &[f64]) -> Result<()> {
    let mut wrapped: Vec<f64> = xs.iter().map(|x| x.rem_euclid(TAU)).collect();
    wrapped.sort_by(f64::total_cmp);
    wrapped.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if wrapped.len() < 3 {
        return Err(Error::FitFailure(format!(
            "need at least 3 distinct scan phases, got {}",
            wrapped.len()
        )));
    }
    let mut max_gap = wrapped[0] + TAU - wrapped[wrapped.len() - 1];
    for w in wrapped.windows(2) {
        max_gap = max_gap.max(w[1] - w[0]);
    }
    if TAU - max_gap <= PI {
        return Err(Error::FitFailure(format!(
            "scan phases span only {:.3} rad of the fringe",
            TAU - max_gap
        )));
    }
    Ok(())
}

/// Weighted linear least-squares fit of the odd-parity fringe.
///
/// Exact scans are weighted by their `shots` (event counts). Sampled scans
/// use binomial weights `n / p̃(1−p̃)` with `p̃ = (k + ½)/(n + 1)` so that
/// points at 0 or 1 keep a finite variance.
pub fn fit_fringe(scan: &ParityScan, family: BellFamily) -> Result<FringeFit> {
    scan.validate()?;
    let xs: Vec<f64> = scan
        .points
        .iter()
        .map(|p| scan_coordinate(family, p.phi_a, p.phi_b))
        .collect();
    check_coverage(&xs)?;

    let weights: Vec<f64> = scan
        .points
        .iter()
        .map(|p| {
            let n = p.shots as f64;
            if scan.exact {
                n
            } else {
                let smoothed = (p.p_odd * n + 0.5) / (n + 1.0);
                n / (smoothed * (1.0 - smoothed))
            }
        })
        .collect();

    // y = C − a·cos x + b·sin x, with a = Π cos c and b = Π sin c
    let mut normal = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for ((x, p), w) in xs.iter().zip(&scan.points).zip(&weights) {
        let row = Vector3::new(1.0, -x.cos(), x.sin());
        normal += row * row.transpose() * *w;
        rhs += row * (p.p_odd * w);
    }
    let inverse = normal
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::FitFailure("degenerate design matrix".into()))?;
    let beta = inverse * rhs;
    let (offset, a, b) = (beta[0], beta[1], beta[2]);

    let mut sq = 0.0;
    let mut wsq = 0.0;
    for ((x, p), w) in xs.iter().zip(&scan.points).zip(&weights) {
        let r = p.p_odd - (offset - a * x.cos() + b * x.sin());
        sq += r * r;
        wsq += w * r * r;
    }
    let n = scan.points.len();
    let rms_residual = (sq / n as f64).sqrt();

    let cov = if scan.exact {
        let dof = n.saturating_sub(3).max(1) as f64;
        inverse * (wsq / dof)
    } else {
        inverse
    };

    let pi = a.hypot(b);
    let phase = wrap_pi(b.atan2(a));
    let (var_a, var_b, cov_ab) = (cov[(1, 1)], cov[(2, 2)], cov[(1, 2)]);
    let (pi_stderr, phase_stderr) = if pi > 0.0 {
        let pi2 = pi * pi;
        let var_pi = (a * a * var_a + b * b * var_b + 2.0 * a * b * cov_ab) / pi2;
        let var_phase = (b * b * var_a + a * a * var_b - 2.0 * a * b * cov_ab) / (pi2 * pi2);
        (var_pi.max(0.0).sqrt(), var_phase.max(0.0).sqrt())
    } else {
        (((var_a + var_b) / 2.0).max(0.0).sqrt(), PI)
    };

    Ok(FringeFit {
        contrast_pi: pi,
        phase,
        offset,
        rms_residual,
        phase_stderr,
        pi_stderr,
        n_points: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityEstimate {
    /// `pop_term + coherence_term`. Finite-shot estimates may land slightly
    /// outside `[0, 1]`.
    pub value: f64,
    pub pop_term: f64,
    pub coherence_term: f64,
    pub stderr: f64,
}

/// `½(P_0↑ + P_↑0) + Π` for Ψ, `½(P_00 + P_↑↑) + Π` for Φ.
/// `pop_shots == 0` means the populations are exact.
pub fn fidelity_from_scan(
    pops: &[f64; 4],
    pop_shots: u64,
    fit: &FringeFit,
    family: BellFamily,
) -> Result<FidelityEstimate> {
    let total: f64 = pops.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(invalid("populations", format!("sum to {total}, expected 1")));
    }
    let in_family = match family {
        BellFamily::Psi => pops[1] + pops[2],
        BellFamily::Phi => pops[0] + pops[3],
    };
    let pop_term = 0.5 * in_family;
    let pop_se = if pop_shots == 0 {
        0.0
    } else {
        0.5 * (in_family * (1.0 - in_family) / pop_shots as f64).sqrt()
    };
    Ok(FidelityEstimate {
        value: pop_term + fit.contrast_pi,
        pop_term,
        coherence_term: fit.contrast_pi,
        stderr: pop_se.hypot(fit.pi_stderr),
    })
}

/// Spread of per-herald coherences around their mean, as standard errors of
/// the ensemble coherence's magnitude and phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceDispersion {
    pub mean: Complex64,
    pub magnitude_stderr: f64,
    pub phase_stderr: f64,
}

pub fn coherence_dispersion(coherences: &[Complex64]) -> CoherenceDispersion {
    let n = coherences.len();
    let mean = coherences.iter().sum::<Complex64>() / n.max(1) as f64;
    if n < 2 {
        return CoherenceDispersion {
            mean,
            magnitude_stderr: f64::NAN,
            phase_stderr: f64::NAN,
        };
    }
    let mag = mean.norm();
    let dir = if mag > 0.0 { mean / mag } else { Complex64::new(1.0, 0.0) };
    let (mut par, mut perp) = (0.0, 0.0);
    for z in coherences {
        let d = (z - mean) * dir.conj();
        par += d.re * d.re;
        perp += d.im * d.im;
    }
    let denom = (n - 1) as f64 * n as f64;
    let par_se = (par / denom).sqrt();
    let perp_se = (perp / denom).sqrt();
    CoherenceDispersion {
        mean,
        magnitude_stderr: par_se,
        phase_stderr: if mag > 0.0 { perp_se / mag } else { PI },
    }
}

/// One Δt group's fitted fringe phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseGroup {
    /// Quantized interval of the group, seconds.
    pub dt: f64,
    pub phi_d: f64,
    pub phase: f64,
    pub phase_stderr: f64,
    pub n_events: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSlope {
    /// Slope of the unwrapped phase vs Δt, rad/s.
    pub slope: f64,
    pub intercept: f64,
    pub stderr_slope: f64,
    /// `slope` mapped back to Δω with the family's sign.
    pub delta_omega: f64,
    /// Intercept mapped back to φ₀, in `(−π, π]`.
    pub phi_0: f64,
    /// A step between neighbouring groups came close to ±π, so the
    /// unwrapping may have slipped a cycle.
    pub unwrap_ambiguous: bool,
    /// `(dt, unwrapped phase with φ_D removed, stderr)` per group, sorted by dt.
    pub points: Vec<(f64, f64, f64)>,
}

/// Phase steps above this fraction of π between neighbouring groups are
/// reported as ambiguous.
pub const UNWRAP_AMBIGUITY_FRACTION: f64 = 0.9;

/// Recovers Δω from the fitted phase of each Δt group.
///
/// φ_D is removed by adding it back (for both families the fitted phase is
/// `±(Δω·Δt + φ₀) − φ_D`), the phases are unwrapped by nearest-multiple-of-2π
/// chaining outward from the best-populated group, and a weighted linear
/// regression gives the slope.
pub fn phase_vs_dt(groups: &[PhaseGroup], family: BellFamily) -> Result<PhaseSlope> {
    let mut pts: Vec<(f64, f64, f64, usize)> = groups
        .iter()
        .filter(|g| g.phase.is_finite())
        .map(|g| (g.dt, wrap_pi(g.phase + g.phi_d), g.phase_stderr, g.n_events))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let distinct_dt = {
        let mut d: Vec<f64> = pts.iter().map(|p| p.0).collect();
        d.dedup();
        d.len()
    };
    if pts.len() < 2 || distinct_dt < 2 {
        return Err(Error::TooFewGroups(distinct_dt));
    }

    let anchor = pts
        .iter()
        .enumerate()
        .max_by_key(|(i, p)| (p.3, std::cmp::Reverse(*i)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut ambiguous = false;
    let limit = UNWRAP_AMBIGUITY_FRACTION * PI;
    for i in anchor + 1..pts.len() {
        let step = wrap_pi(pts[i].1 - pts[i - 1].1);
        ambiguous |= step.abs() > limit;
        pts[i].1 = pts[i - 1].1 + step;
    }
    for i in (0..anchor).rev() {
        let step = wrap_pi(pts[i].1 - pts[i + 1].1);
        ambiguous |= step.abs() > limit;
        pts[i].1 = pts[i + 1].1 + step;
    }

    let floor = 1e-9;
    let w: Vec<f64> = pts.iter().map(|p| 1.0 / p.2.max(floor).powi(2)).collect();
    let sw: f64 = w.iter().sum();
    let xbar = pts.iter().zip(&w).map(|(p, w)| w * p.0).sum::<f64>() / sw;
    let ybar = pts.iter().zip(&w).map(|(p, w)| w * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().zip(&w).map(|(p, w)| w * (p.0 - xbar).powi(2)).sum();
    let sxy: f64 = pts.iter().zip(&w).map(|(p, w)| w * (p.0 - xbar) * (p.1 - ybar)).sum();
    if sxx <= 0.0 {
        return Err(Error::TooFewGroups(distinct_dt));
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let chi2: f64 = pts
        .iter()
        .zip(&w)
        .map(|(p, w)| w * (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let dof = pts.len().saturating_sub(2).max(1) as f64;
    let scale = (chi2 / dof).max(1.0);
    let stderr_slope = (scale / sxx).sqrt();

    let sign = match family {
        BellFamily::Psi => 1.0,
        BellFamily::Phi => -1.0,
    };
    Ok(PhaseSlope {
        slope,
        intercept,
        stderr_slope,
        delta_omega: sign * slope,
        phi_0: wrap_pi(sign * intercept),
        unwrap_ambiguous: ambiguous,
        points: pts.iter().map(|p| (p.0, p.1, p.2)).collect(),
    })
}

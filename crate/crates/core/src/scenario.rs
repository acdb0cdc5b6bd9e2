//! Figure-level experiments: simulate heralds into event-log records, then
//! analyze those records.
//!
//! Analysis always starts from [`EventLogRecord`]s, so a log written by
//! `simulate` and re-read by `analyze` gives the same tables byte for byte.
//! Events are grouped by quantized interval and φ_D; each group's ensemble
//! state is scanned (exactly when `shots_per_point = 0`) and fitted.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Matrix4;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::analysis::{
    coherence_dispersion, fidelity_from_scan, fit_fringe, measure_populations, phase_vs_dt,
    simulate_scan, FidelityEstimate, FringeFit, ParityScan, PhaseGroup, PhaseSlope,
};
use crate::config::{default_zeeman_mhz, ScenarioConfig, ScenarioKind};
use crate::detection::TimingRecord;
use crate::error::{invalid, Error, Result};
use crate::eventlog::{EventLog, EventLogRecord, LogHeader};
use crate::herald::conditioned_state;
use crate::noise::NoiseModel;
use crate::quantum::{BellFamily, DensityMatrix4, PureState4};
use crate::rng::{mix, stream, Domain};
use crate::source::{LinkConfig, Mapping, MemoryParams};
use crate::strategy::{
    closed_form_rate, experimental_reference, feedforward_wait, heralded_records, postprocess_shift,
    FeedforwardMechanism, RateEstimate, Strategy,
};
use crate::units::{angular_to_mhz, from_ps, mhz_to_angular, ns, to_ns};

pub const TOOL_VERSION: &str = concat!("heraldkit ", env!("CARGO_PKG_VERSION"));

/// Matched 8.1 ns lifetimes, unit efficiency, φ₀ = 0 and the default
/// Zeeman shifts for `mapping` (Δω = 2π×1.35 MHz or 2π×28.35 MHz).
pub fn paper_link(mapping: Mapping) -> LinkConfig {
    let (za, zb) = default_zeeman_mhz(mapping);
    let memory = |mhz: f64| MemoryParams {
        zeeman_shift: mhz_to_angular(mhz),
        lifetime_tau: ns(8.1),
        efficiency: 1.0,
    };
    LinkConfig {
        memory_a: memory(za),
        memory_b: memory(zb),
        mapping,
        phi_0: 0.0,
    }
}

/// Provenance lines shared by the event log and every output table.
pub fn provenance(cfg: &ScenarioConfig) -> Vec<(String, String)> {
    vec![
        ("tool".into(), TOOL_VERSION.into()),
        ("seed".into(), cfg.seed.to_string()),
        ("config_sha256".into(), cfg.sha256()),
        ("scenario".into(), cfg.scenario.as_str().into()),
        ("strategy".into(), cfg.strategy.tag()),
    ]
}

/// Heralded events for `cfg`, flagged with `cfg.strategy`.
pub fn simulate_records(cfg: &ScenarioConfig) -> Result<Vec<EventLogRecord>> {
    cfg.validate()?;
    let link = cfg.link()?;
    let detector = cfg.detector()?;
    let t_r_ps = cfg.t_r_ps();
    let tag = cfg.strategy.tag();
    let events = heralded_records(&link, &detector, cfg.n_events, cfg.seed)?;
    Ok(events
        .iter()
        .map(|(ev, timing)| {
            let mut rec = EventLogRecord::from_event(ev, timing, t_r_ps, false, &tag);
            rec.accepted = cfg.strategy.accept(&rec.timing(t_r_ps));
            rec
        })
        .collect())
}

pub fn event_log(cfg: &ScenarioConfig, records: Vec<EventLogRecord>) -> EventLog {
    EventLog {
        header: LogHeader {
            provenance: provenance(cfg),
            config_text: Some(cfg.to_text()),
        },
        records,
    }
}

/// Rebuilds the config embedded in a log, optionally swapping the strategy.
pub fn config_from_log(log: &EventLog, strategy: Option<Strategy>) -> Result<ScenarioConfig> {
    let text = log.header.config_text.as_deref().ok_or_else(|| Error::EventLog {
        line: 1,
        message: "log has no embedded `# config:` lines".into(),
    })?;
    let mut cfg = ScenarioConfig::parse(text)?;
    if let Some(s) = strategy {
        cfg.strategy = s;
    }
    Ok(cfg)
}

struct Context {
    family: BellFamily,
    delta_omega: f64,
    t_r: f64,
    noise: NoiseModel,
    n_phases: usize,
    shots: u64,
    seed: u64,
    shift: bool,
}

struct Prepared {
    dt_bin: i64,
    phi_d_is_pi: bool,
    timing: TimingRecord,
    state: PureState4,
}

fn prepare(cfg: &ScenarioConfig, records: &[EventLogRecord]) -> Result<(Context, Vec<Prepared>)> {
    cfg.validate()?;
    let link = cfg.link()?;
    let family = link.heralded_family();
    let delta_omega = link.delta_omega();
    let t_r_ps = cfg.t_r_ps();
    let t_prime = ns(cfg.t_prime_ns);
    if let Some(r) = records.iter().find(|r| r.family != family) {
        return Err(invalid(
            "family",
            format!("event {} is {} but the link heralds {}", r.event_id, r.family, family),
        ));
    }
    let prepared = records
        .par_iter()
        .map(|r| -> Result<Prepared> {
            let timing = r.timing(t_r_ps);
            let event = r.herald_event(delta_omega);
            let wait = match cfg.strategy {
                Strategy::Feedforward {
                    phi_c,
                    mechanism: FeedforwardMechanism::Wait,
                } => feedforward_wait(timing.dt_q, event.phi_d, family, delta_omega, link.phi_0, phi_c)?,
                _ => t_prime,
            };
            Ok(Prepared {
                dt_bin: r.dt_q_ps / t_r_ps,
                phi_d_is_pi: r.phi_d_is_pi,
                timing,
                state: conditioned_state(&event, wait, &link)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ctx = Context {
        family,
        delta_omega,
        t_r: from_ps(t_r_ps),
        noise: cfg.noise(),
        n_phases: cfg.n_phases,
        shots: cfg.shots_per_point,
        seed: cfg.seed,
        shift: matches!(
            cfg.strategy,
            Strategy::Feedforward {
                mechanism: FeedforwardMechanism::PhaseShift,
                ..
            }
        ),
    };
    Ok((ctx, prepared))
}

/// Coherence of a Bell-family state oriented as `√(w(1−w))·e^{iθ}`.
fn oriented_coherence(state: &PureState4, family: BellFamily) -> Complex64 {
    let a = state.amplitudes();
    match family {
        BellFamily::Psi => a[1] * a[2].conj(),
        BellFamily::Phi => -(a[3] * a[0].conj()),
    }
}

type GroupKey = (i64, bool);

fn group_by_key<'a>(members: impl IntoIterator<Item = &'a Prepared>) -> BTreeMap<GroupKey, Vec<&'a Prepared>> {
    let mut groups: BTreeMap<GroupKey, Vec<&Prepared>> = BTreeMap::new();
    for p in members {
        groups.entry((p.dt_bin, p.phi_d_is_pi)).or_default().push(p);
    }
    groups
}

struct GroupOutcome {
    key: GroupKey,
    n: usize,
    raw: ParityScan,
    shifted: ParityScan,
    pops: [f64; 4],
    pop_counts: [u64; 4],
    pop_shots: u64,
    raw_coherences: Vec<Complex64>,
    shifted_coherences: Vec<Complex64>,
}

fn ensemble(members: &[&Prepared]) -> Result<DensityMatrix4> {
    let mut m = Matrix4::<Complex64>::zeros();
    for p in members {
        let v = p.state.to_vector();
        m += v * v.adjoint();
    }
    DensityMatrix4::new(m / Complex64::new(members.len() as f64, 0.0))
}

/// Scans one group's ensemble state with `shots` per point (0 = exact).
fn run_group(ctx: &Context, key: GroupKey, members: &[&Prepared], shots: u64, tag: u64) -> Result<GroupOutcome> {
    let rho = ensemble(members)?;
    let mut rng = stream(
        ctx.seed,
        Domain::Shots,
        mix(&[tag, key.0 as u64, key.1 as u64]),
    );
    let n = members.len();
    let raw = simulate_scan(&rho, ctx.family, ctx.n_phases, shots, n as u64, &ctx.noise, &mut rng)?;
    let dt_q = key.0 as f64 * ctx.t_r;
    let shifted = postprocess_shift(&raw, ctx.family, ctx.delta_omega, dt_q);
    let (pops, pop_counts) = measure_populations(&rho, shots, &ctx.noise, &mut rng)?;
    let raw_coherences: Vec<Complex64> = members
        .iter()
        .map(|p| oriented_coherence(&p.state, ctx.family))
        .collect();
    let undo = Complex64::from_polar(1.0, -ctx.delta_omega * dt_q);
    let shifted_coherences = raw_coherences.iter().map(|c| c * undo).collect();
    Ok(GroupOutcome {
        key,
        n,
        raw,
        shifted,
        pops,
        pop_counts,
        pop_shots: shots,
        raw_coherences,
        shifted_coherences,
    })
}

/// Fit and fidelity of one φ_D class pooled over its Δt groups.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassFit {
    pub phi_d_is_pi: bool,
    pub n_events: usize,
    pub fit: FringeFit,
    pub fidelity: FidelityEstimate,
}

fn pool_class(ctx: &Context, phi_d_is_pi: bool, groups: &[&GroupOutcome], shifted: bool) -> Result<ClassFit> {
    let scans: Vec<&ParityScan> = groups
        .iter()
        .map(|g| if shifted { &g.shifted } else { &g.raw })
        .collect();
    let merged = ParityScan::merged(scans.iter().copied()).ok_or_else(|| invalid("events", "empty class"))?;
    let fit = fit_fringe(&merged, ctx.family)?;
    let n_events: usize = groups.iter().map(|g| g.n).sum();
    let exact = ctx.shots == 0;
    let (pops, pop_shots) = if exact {
        let mut p = [0.0; 4];
        for g in groups {
            for (acc, v) in p.iter_mut().zip(g.pops) {
                *acc += v * g.n as f64;
            }
        }
        (p.map(|v| v / n_events as f64), 0)
    } else {
        let shots: u64 = groups.iter().map(|g| g.pop_shots).sum();
        let mut c = [0u64; 4];
        for g in groups {
            for (acc, v) in c.iter_mut().zip(g.pop_counts) {
                *acc += v;
            }
        }
        (c.map(|v| v as f64 / shots as f64), shots)
    };
    let mut fidelity = fidelity_from_scan(&pops, pop_shots, &fit, ctx.family)?;
    if exact {
        // exact scans carry no shot noise; report the event-to-event spread
        let all: Vec<Complex64> = groups
            .iter()
            .flat_map(|g| if shifted { &g.shifted_coherences } else { &g.raw_coherences })
            .copied()
            .collect();
        let d = coherence_dispersion(&all);
        let scale = if d.mean.norm() > 1e-12 { fit.contrast_pi / d.mean.norm() } else { 1.0 };
        fidelity.stderr = d.magnitude_stderr * scale;
    }
    Ok(ClassFit {
        phi_d_is_pi,
        n_events,
        fit,
        fidelity,
    })
}

/// Event-weighted fidelity over φ_D classes.
fn combine(classes: &[ClassFit]) -> FidelityEstimate {
    let n: usize = classes.iter().map(|c| c.n_events).sum();
    if n == 0 {
        return FidelityEstimate {
            value: f64::NAN,
            pop_term: f64::NAN,
            coherence_term: f64::NAN,
            stderr: f64::NAN,
        };
    }
    let mut out = FidelityEstimate {
        value: 0.0,
        pop_term: 0.0,
        coherence_term: 0.0,
        stderr: 0.0,
    };
    let mut var = 0.0;
    for c in classes {
        let w = c.n_events as f64 / n as f64;
        out.value += w * c.fidelity.value;
        out.pop_term += w * c.fidelity.pop_term;
        out.coherence_term += w * c.fidelity.coherence_term;
        var += (w * c.fidelity.stderr).powi(2);
    }
    out.stderr = var.sqrt();
    out
}

struct SetAnalysis {
    groups: Vec<GroupOutcome>,
    raw: Vec<ClassFit>,
    shifted: Vec<ClassFit>,
}

/// Groups `members`, scans every group with shots in proportion to its
/// share of the φ_D class, and pools each class with and without the
/// postprocessing shift.
fn analyze_set(ctx: &Context, members: &[&Prepared], tag: u64) -> Result<SetAnalysis> {
    let grouped = group_by_key(members.iter().copied());
    let mut class_size = [0usize; 2];
    for (k, v) in &grouped {
        class_size[k.1 as usize] += v.len();
    }
    let jobs: Vec<(GroupKey, Vec<&Prepared>)> = grouped.into_iter().collect();
    let groups = jobs
        .par_iter()
        .map(|(key, m)| {
            let shots = if ctx.shots == 0 {
                0
            } else {
                let share = m.len() as f64 / class_size[key.1 as usize] as f64;
                ((ctx.shots as f64 * share).ceil() as u64).max(1)
            };
            run_group(ctx, *key, m, shots, tag)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut raw = Vec::new();
    let mut shifted = Vec::new();
    for class in [false, true] {
        let members: Vec<&GroupOutcome> = groups.iter().filter(|g| g.key.1 == class).collect();
        if members.is_empty() {
            continue;
        }
        raw.push(pool_class(ctx, class, &members, false)?);
        shifted.push(pool_class(ctx, class, &members, true)?);
    }
    Ok(SetAnalysis { groups, raw, shifted })
}

impl SetAnalysis {
    fn fidelity(&self, shift: bool) -> FidelityEstimate {
        combine(if shift { &self.shifted } else { &self.raw })
    }

    fn classes(&self, shift: bool) -> &[ClassFit] {
        if shift {
            &self.shifted
        } else {
            &self.raw
        }
    }
}

/// One fitted Δt group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupFit {
    pub dt_bin: i64,
    /// Quantized interval, seconds.
    pub dt: f64,
    pub phi_d_is_pi: bool,
    pub n_events: usize,
    pub fit: FringeFit,
    /// Fit error combined with the event-to-event phase spread.
    pub phase_stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseAnalysis {
    pub family: BellFamily,
    /// Δω implied by the link config, rad/s.
    pub expected_delta_omega: f64,
    pub groups: Vec<GroupFit>,
    pub slope: PhaseSlope,
}

/// Fits each sufficiently populated `(dt_q, φ_D)` group and regresses the
/// phase on `dt_q`.
pub fn analyze_phase_vs_dt(cfg: &ScenarioConfig, records: &[EventLogRecord]) -> Result<PhaseAnalysis> {
    let (ctx, events) = prepare(cfg, records)?;
    let accepted = events.iter().filter(|p| cfg.strategy.accept(&p.timing));
    let jobs: Vec<(GroupKey, Vec<&Prepared>)> = group_by_key(accepted)
        .into_iter()
        .filter(|(_, m)| m.len() >= cfg.min_group_events)
        .collect();
    let groups = jobs
        .par_iter()
        .map(|(key, m)| -> Result<GroupFit> {
            let g = run_group(&ctx, *key, m, ctx.shots, 1)?;
            let (scan, coherences) = if ctx.shift {
                (&g.shifted, &g.shifted_coherences)
            } else {
                (&g.raw, &g.raw_coherences)
            };
            let fit = fit_fringe(scan, ctx.family)?;
            let phase_stderr = if ctx.shots == 0 {
                let d = coherence_dispersion(coherences);
                fit.phase_stderr.hypot(d.phase_stderr)
            } else {
                fit.phase_stderr
            };
            Ok(GroupFit {
                dt_bin: key.0,
                dt: key.0 as f64 * ctx.t_r,
                phi_d_is_pi: key.1,
                n_events: g.n,
                fit,
                phase_stderr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let phase_groups: Vec<PhaseGroup> = groups
        .iter()
        .map(|g| PhaseGroup {
            dt: g.dt,
            phi_d: if g.phi_d_is_pi { std::f64::consts::PI } else { 0.0 },
            phase: g.fit.phase,
            phase_stderr: g.phase_stderr,
            n_events: g.n_events,
        })
        .collect();
    let slope = phase_vs_dt(&phase_groups, ctx.family)?;
    Ok(PhaseAnalysis {
        family: ctx.family,
        expected_delta_omega: ctx.delta_omega,
        groups,
        slope,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityPoint {
    /// Postselection threshold, seconds.
    pub dt_max: f64,
    pub n_accepted: usize,
    pub n_total: usize,
    pub fidelity: FidelityEstimate,
    pub classes: Vec<ClassFit>,
}

/// Fidelity of the pooled state for each `dt_max` in the config, on top of
/// the configured strategy.
pub fn analyze_fidelity_vs_dtmax(cfg: &ScenarioConfig, records: &[EventLogRecord]) -> Result<Vec<FidelityPoint>> {
    let (ctx, events) = prepare(cfg, records)?;
    let base: Vec<&Prepared> = events.iter().filter(|p| cfg.strategy.accept(&p.timing)).collect();
    cfg.dt_max_values()
        .into_par_iter()
        .enumerate()
        .map(|(k, dt_max)| {
            let cut = Strategy::Postselect { dt_max, strict: false };
            let members: Vec<&Prepared> = base.iter().copied().filter(|p| cut.accept(&p.timing)).collect();
            let (fidelity, classes) = if members.is_empty() {
                (combine(&[]), Vec::new())
            } else {
                let set = analyze_set(&ctx, &members, mix(&[2, k as u64]))?;
                (set.fidelity(ctx.shift), set.classes(ctx.shift).to_vec())
            };
            Ok(FidelityPoint {
                dt_max,
                n_accepted: members.len(),
                n_total: events.len(),
                fidelity,
                classes,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftGroup {
    pub dt_bin: i64,
    pub phi_d_is_pi: bool,
    pub n_events: usize,
    pub raw: FringeFit,
    pub shifted: FringeFit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftAnalysis {
    pub groups: Vec<ShiftGroup>,
    /// All accepted events pooled as measured.
    pub raw: FidelityEstimate,
    /// All accepted events pooled after shifting each group by `Δω·dt_q`.
    pub shifted: FidelityEstimate,
    /// Events with `dt_q = 0` only.
    pub zero_bin: FidelityEstimate,
    pub n_events: usize,
    pub n_zero_bin: usize,
}

pub fn analyze_postprocess_shift(cfg: &ScenarioConfig, records: &[EventLogRecord]) -> Result<ShiftAnalysis> {
    let (ctx, events) = prepare(cfg, records)?;
    let members: Vec<&Prepared> = events.iter().filter(|p| cfg.strategy.accept(&p.timing)).collect();
    if members.is_empty() {
        return Err(invalid("events", "no accepted events"));
    }
    let set = analyze_set(&ctx, &members, 3)?;
    let zero: Vec<&Prepared> = members.iter().copied().filter(|p| p.dt_bin == 0).collect();
    let zero_bin = if zero.is_empty() {
        combine(&[])
    } else {
        analyze_set(&ctx, &zero, 3)?.fidelity(false)
    };
    let groups = set
        .groups
        .iter()
        .filter(|g| g.n >= cfg.min_group_events)
        .map(|g| -> Result<ShiftGroup> {
            Ok(ShiftGroup {
                dt_bin: g.key.0,
                phi_d_is_pi: g.key.1,
                n_events: g.n,
                raw: fit_fringe(&g.raw, ctx.family)?,
                shifted: fit_fringe(&g.shifted, ctx.family)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ShiftAnalysis {
        groups,
        raw: set.fidelity(false),
        shifted: set.fidelity(true),
        zero_bin,
        n_events: members.len(),
        n_zero_bin: zero.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub label: &'static str,
    pub strategy: Strategy,
    pub estimate: RateEstimate,
    pub reference: Option<f64>,
}

/// Relative rates of the standard strategies at this detector resolution,
/// plus the configured one.
pub fn analyze_rates(cfg: &ScenarioConfig, records: &[EventLogRecord]) -> Result<Vec<RateRow>> {
    cfg.validate()?;
    let link = cfg.link()?;
    let detector = cfg.detector()?;
    let t_r_ps = cfg.t_r_ps();
    let t_r = from_ps(t_r_ps);
    let timings: Vec<TimingRecord> = records.iter().map(|r| r.timing(t_r_ps)).collect();
    let mut list = vec![
        ("accept-all", Strategy::AcceptAll),
        ("same-bin", Strategy::Postselect { dt_max: t_r, strict: true }),
        ("adjacent-bin", Strategy::Postselect { dt_max: t_r, strict: false }),
        ("gate", Strategy::Gate { window: t_r }),
        (
            "feedforward",
            Strategy::Feedforward {
                phi_c: 0.0,
                mechanism: FeedforwardMechanism::Wait,
            },
        ),
    ];
    if !list.iter().any(|(_, s)| s.tag() == cfg.strategy.tag()) {
        list.push(("configured", cfg.strategy));
    }
    Ok(list
        .into_iter()
        .map(|(label, strategy)| {
            let accepted = timings.iter().filter(|t| strategy.accept(t)).count();
            RateRow {
                label,
                strategy,
                estimate: RateEstimate::from_counts(
                    accepted,
                    timings.len(),
                    closed_form_rate(&strategy, &link, &detector),
                ),
                reference: match label {
                    "same-bin" | "adjacent-bin" | "gate" => experimental_reference(&strategy),
                    _ => None,
                },
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioResult {
    PhaseVsDt(PhaseAnalysis),
    FidelityVsDtmax(Vec<FidelityPoint>),
    PostprocessShift(ShiftAnalysis),
    Rates(Vec<RateRow>),
}

pub fn run_analysis(cfg: &ScenarioConfig, records: &[EventLogRecord]) -> Result<ScenarioResult> {
    Ok(match cfg.scenario {
        ScenarioKind::PhaseVsDt => ScenarioResult::PhaseVsDt(analyze_phase_vs_dt(cfg, records)?),
        ScenarioKind::FidelityVsDtmax => ScenarioResult::FidelityVsDtmax(analyze_fidelity_vs_dtmax(cfg, records)?),
        ScenarioKind::PostprocessShift => {
            ScenarioResult::PostprocessShift(analyze_postprocess_shift(cfg, records)?)
        }
        ScenarioKind::Rates => ScenarioResult::Rates(analyze_rates(cfg, records)?),
    })
}

/// Simulates and analyzes in one go.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(Vec<EventLogRecord>, ScenarioResult)> {
    let records = simulate_records(cfg)?;
    let result = run_analysis(cfg, &records)?;
    Ok((records, result))
}

/// A CSV table with its file name.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file_name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    /// CSV text: `# key = value` provenance lines, header, rows.
    pub fn render(&self, provenance: &[(String, String)]) -> String {
        let mut s = String::new();
        for (k, v) in provenance {
            s.push_str(&format!("# {k} = {v}\n"));
        }
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.9}")
    } else {
        "nan".into()
    }
}

fn ns_str(t: f64) -> String {
    format!("{:.3}", to_ns(t))
}

fn phi_d_str(is_pi: bool) -> String {
    num(if is_pi { std::f64::consts::PI } else { 0.0 })
}

fn fringe_row(dt: f64, phi_d_is_pi: bool, fit: &FringeFit, phase_stderr: f64, n: usize) -> Vec<String> {
    vec![
        ns_str(dt),
        phi_d_str(phi_d_is_pi),
        num(fit.contrast_pi),
        num(fit.phase),
        num(phase_stderr),
        num(fit.offset),
        n.to_string(),
    ]
}

const FRINGE_COLUMNS: [&str; 7] = [
    "dt_bin_ns",
    "phi_D",
    "Pi",
    "phase_rad",
    "phase_stderr",
    "offset",
    "n_events",
];

impl ScenarioResult {
    pub fn tables(&self) -> Vec<Table> {
        match self {
            ScenarioResult::PhaseVsDt(a) => {
                let fringes = Table {
                    file_name: "fringes.csv",
                    columns: FRINGE_COLUMNS.to_vec(),
                    rows: a
                        .groups
                        .iter()
                        .map(|g| fringe_row(g.dt, g.phi_d_is_pi, &g.fit, g.phase_stderr, g.n_events))
                        .collect(),
                };
                // slope points follow the groups' (dt, φ_D) order
                let phase = Table {
                    file_name: "phase_vs_dt.csv",
                    columns: vec![
                        "dt_bin_ns",
                        "phi_D",
                        "phase_rad",
                        "phase_unwrapped_rad",
                        "phase_stderr",
                        "n_events",
                    ],
                    rows: a
                        .groups
                        .iter()
                        .zip(&a.slope.points)
                        .map(|(g, p)| {
                            vec![
                                ns_str(g.dt),
                                phi_d_str(g.phi_d_is_pi),
                                num(g.fit.phase),
                                num(p.1),
                                num(p.2),
                                g.n_events.to_string(),
                            ]
                        })
                        .collect(),
                };
                let s = &a.slope;
                let slope = Table {
                    file_name: "phase_slope.csv",
                    columns: vec![
                        "family",
                        "slope_rad_per_ns",
                        "slope_stderr_rad_per_ns",
                        "delta_omega_mhz",
                        "delta_omega_stderr_mhz",
                        "expected_delta_omega_mhz",
                        "phi0_rad",
                        "n_groups",
                        "unwrap_ambiguous",
                    ],
                    rows: vec![vec![
                        a.family.as_str().to_string(),
                        num(s.slope * 1e-9),
                        num(s.stderr_slope * 1e-9),
                        num(angular_to_mhz(s.delta_omega)),
                        num(angular_to_mhz(s.stderr_slope)),
                        num(angular_to_mhz(a.expected_delta_omega)),
                        num(s.phi_0),
                        a.groups.len().to_string(),
                        s.unwrap_ambiguous.to_string(),
                    ]],
                };
                vec![fringes, phase, slope]
            }
            ScenarioResult::FidelityVsDtmax(points) => {
                let class_value = |p: &FidelityPoint, pi: bool| {
                    p.classes
                        .iter()
                        .find(|c| c.phi_d_is_pi == pi)
                        .map_or(f64::NAN, |c| c.fidelity.value)
                };
                vec![Table {
                    file_name: "fidelity_vs_dtmax.csv",
                    columns: vec![
                        "dt_max_ns",
                        "n_accepted",
                        "r_over_r0",
                        "fidelity",
                        "fidelity_stderr",
                        "pop_term",
                        "coherence_term",
                        "fidelity_phi_D_0",
                        "fidelity_phi_D_pi",
                    ],
                    rows: points
                        .iter()
                        .map(|p| {
                            vec![
                                ns_str(p.dt_max),
                                p.n_accepted.to_string(),
                                num(p.n_accepted as f64 / p.n_total.max(1) as f64),
                                num(p.fidelity.value),
                                num(p.fidelity.stderr),
                                num(p.fidelity.pop_term),
                                num(p.fidelity.coherence_term),
                                num(class_value(p, false)),
                                num(class_value(p, true)),
                            ]
                        })
                        .collect(),
                }]
            }
            ScenarioResult::PostprocessShift(a) => {
                let mut rows = Vec::new();
                for g in &a.groups {
                    for (label, fit) in [("group_raw", &g.raw), ("group_shifted", &g.shifted)] {
                        rows.push(vec![
                            label.to_string(),
                            g.dt_bin.to_string(),
                            phi_d_str(g.phi_d_is_pi),
                            g.n_events.to_string(),
                            num(fit.contrast_pi),
                            num(fit.phase),
                            "nan".into(),
                            "nan".into(),
                        ]);
                    }
                }
                for (label, f, n) in [
                    ("aggregate_raw", &a.raw, a.n_events),
                    ("aggregate_shifted", &a.shifted, a.n_events),
                    ("zero_bin", &a.zero_bin, a.n_zero_bin),
                ] {
                    rows.push(vec![
                        label.to_string(),
                        "".into(),
                        "".into(),
                        n.to_string(),
                        num(f.coherence_term),
                        "nan".into(),
                        num(f.value),
                        num(f.stderr),
                    ]);
                }
                vec![Table {
                    file_name: "postprocess_shift.csv",
                    columns: vec![
                        "row",
                        "dt_bin",
                        "phi_D",
                        "n_events",
                        "Pi",
                        "phase_rad",
                        "fidelity",
                        "fidelity_stderr",
                    ],
                    rows,
                }]
            }
            ScenarioResult::Rates(rows) => vec![Table {
                file_name: "rates.csv",
                columns: vec![
                    "label",
                    "strategy",
                    "accepted",
                    "total",
                    "r_over_r0",
                    "stderr",
                    "closed_form",
                    "experimental_reference",
                ],
                rows: rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.label.to_string(),
                            // strategy tags may contain commas
                            format!("\"{}\"", r.strategy.tag()),
                            r.estimate.accepted.to_string(),
                            r.estimate.total.to_string(),
                            num(r.estimate.r_over_r0),
                            r.estimate.stderr.map_or("nan".into(), num),
                            r.estimate.closed_form.map_or("nan".into(), num),
                            r.reference.map_or("nan".into(), num),
                        ]
                    })
                    .collect(),
            }],
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes the result tables (and the event log, if given) into `dir`.
pub fn write_outputs(
    dir: &Path,
    cfg: &ScenarioConfig,
    result: &ScenarioResult,
    records: Option<&[EventLogRecord]>,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let prov = provenance(cfg);
    let mut written = Vec::new();
    if let Some(records) = records {
        let path = dir.join("events.csv");
        let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        crate::eventlog::write_event_log(std::io::BufWriter::new(file), &event_log(cfg, records.to_vec()))
            .map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    for table in result.tables() {
        let path = dir.join(table.file_name);
        fs::write(&path, table.render(&prov)).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

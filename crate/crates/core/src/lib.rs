//! Simulation and analysis of heralded entanglement between two quantum
//! memories whose photons differ in frequency by Δω.
//!
//! A herald with click-time difference Δt leaves the memories in a Bell
//! state with phase `Δω·Δt + …`. Averaging over Δt washes out the
//! coherence; postselection, gating and feedforward trade rate against that
//! loss. Internally all times are seconds and angular frequencies rad/s;
//! files use ns and MHz.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod detection;
pub mod error;
pub mod eventlog;
pub mod herald;
pub mod noise;
pub mod quantum;
pub mod rng;
pub mod scenario;
pub mod source;
pub mod stats;
pub mod strategy;
pub mod units;

pub use analysis::{
    fidelity_from_scan, fit_fringe, measure_parity, phase_vs_dt, FidelityEstimate, FringeFit, ParityScan,
    PhaseSlope, ScanMode, ScanPoint,
};
pub use config::{ScenarioConfig, ScenarioKind};
pub use detection::{DetectorModel, TimingRecord};
pub use error::{Error, Result};
pub use eventlog::{read_event_log, write_event_log, EventLog, EventLogRecord};
pub use herald::{conditioned_state, sample_event, DetectorId, HeraldEvent, HeraldOutcome};
pub use noise::NoiseModel;
pub use quantum::{bell_state, BellFamily, DensityMatrix4, PureState4, Rotation};
pub use scenario::{run_analysis, run_scenario, ScenarioResult};
pub use source::{LinkConfig, Mapping, MemoryParams};
pub use strategy::{feedforward_wait, postprocess_shift, relative_rate, FeedforwardMechanism, Strategy};

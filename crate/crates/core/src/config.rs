//! Flat `key = value` scenario configuration.
//!
//! Values are kept in file units (ns, MHz, ps, µs, rad) so the canonical text
//! form round-trips exactly; the model types are built on demand.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::detection::DetectorModel;
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::source::{LinkConfig, Mapping, MemoryParams};
use crate::strategy::Strategy;
use crate::units::{mhz_to_angular, ns, PS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    PhaseVsDt,
    FidelityVsDtmax,
    PostprocessShift,
    Rates,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::PhaseVsDt,
        ScenarioKind::FidelityVsDtmax,
        ScenarioKind::PostprocessShift,
        ScenarioKind::Rates,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::PhaseVsDt => "phase_vs_dt",
            ScenarioKind::FidelityVsDtmax => "fidelity_vs_dtmax",
            ScenarioKind::PostprocessShift => "postprocess_shift",
            ScenarioKind::Rates => "rates",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub tau_a_ns: f64,
    pub tau_b_ns: f64,
    pub zeeman_a_mhz: f64,
    pub zeeman_b_mhz: f64,
    pub mapping: Mapping,
    pub phi0_rad: f64,
    pub efficiency_a: f64,
    pub efficiency_b: f64,

    pub t_r_ns: f64,
    pub jitter_ps: f64,
    pub window_ns: f64,

    pub sigma_phi_rad: f64,
    pub depol_p: f64,
    pub meas_error: f64,
    pub analysis_delay_us: f64,

    pub strategy: Strategy,
    pub n_events: usize,
    pub n_phases: usize,
    /// Shots per scan point; `0` evaluates scans exactly.
    pub shots_per_point: u64,
    pub seed: u64,
    pub scenario: ScenarioKind,
    pub dt_max_values_ns: Vec<f64>,
    pub t_prime_ns: f64,
    /// Δt groups with fewer accepted events are not fitted.
    pub min_group_events: usize,
}

/// Zeeman shifts (MHz) used when the file gives none: they reproduce the
/// two measured frequency differences, 1.35 MHz and 28.35 MHz.
pub fn default_zeeman_mhz(mapping: Mapping) -> (f64, f64) {
    match mapping {
        Mapping::Conventional => (0.0, 1.35),
        Mapping::Waveplate => (14.175, 14.175),
    }
}

impl ScenarioConfig {
    /// Defaults with the given seed: waveplate link, 8.1 ns lifetimes,
    /// 5 ns resolution, 60 ns window, no noise.
    pub fn new(seed: u64) -> Self {
        let (za, zb) = default_zeeman_mhz(Mapping::Waveplate);
        Self {
            tau_a_ns: 8.1,
            tau_b_ns: 8.1,
            zeeman_a_mhz: za,
            zeeman_b_mhz: zb,
            mapping: Mapping::Waveplate,
            phi0_rad: 0.0,
            efficiency_a: 1.0,
            efficiency_b: 1.0,
            t_r_ns: 5.0,
            jitter_ps: 0.0,
            window_ns: 60.0,
            sigma_phi_rad: 0.0,
            depol_p: 0.0,
            meas_error: 0.0,
            analysis_delay_us: 50.0,
            strategy: Strategy::AcceptAll,
            n_events: 20_000,
            n_phases: 16,
            shots_per_point: 200,
            seed,
            scenario: ScenarioKind::PhaseVsDt,
            dt_max_values_ns: (1..=12).map(|k| 5.0 * k as f64).collect(),
            t_prime_ns: 0.0,
            min_group_events: 20,
        }
    }

    pub const KEYS: [&'static str; 24] = [
        "tau_a_ns",
        "tau_b_ns",
        "zeeman_a_mhz",
        "zeeman_b_mhz",
        "mapping",
        "phi0_rad",
        "efficiency_a",
        "efficiency_b",
        "t_r_ns",
        "jitter_ps",
        "window_ns",
        "sigma_phi_rad",
        "depol_p",
        "meas_error",
        "analysis_delay_us",
        "strategy",
        "n_events",
        "n_phases",
        "shots_per_point",
        "seed",
        "scenario",
        "dt_max_values_ns",
        "t_prime_ns",
        "min_group_events",
    ];

    /// Sets one key from its text value. Errors carry line 0; the parser
    /// fills in the real line.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config {
            line: 0,
            message: format!("`{key}`: {what}"),
        };
        let float = || -> Result<f64> {
            let v: f64 = value.parse().map_err(|_| bad(&format!("`{value}` is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad("must be finite"))
            }
        };
        let uint = || -> Result<u64> {
            value
                .parse::<u64>()
                .map_err(|_| bad(&format!("`{value}` is not a non-negative integer")))
        };
        match key {
            "tau_a_ns" => self.tau_a_ns = float()?,
            "tau_b_ns" => self.tau_b_ns = float()?,
            "zeeman_a_mhz" => self.zeeman_a_mhz = float()?,
            "zeeman_b_mhz" => self.zeeman_b_mhz = float()?,
            "mapping" => {
                self.mapping = Mapping::parse(value)
                    .ok_or_else(|| bad("expected `conventional` or `waveplate`"))?
            }
            "phi0_rad" => self.phi0_rad = float()?,
            "efficiency_a" => self.efficiency_a = float()?,
            "efficiency_b" => self.efficiency_b = float()?,
            "t_r_ns" => self.t_r_ns = float()?,
            "jitter_ps" => self.jitter_ps = float()?,
            "window_ns" => self.window_ns = float()?,
            "sigma_phi_rad" => self.sigma_phi_rad = float()?,
            "depol_p" => self.depol_p = float()?,
            "meas_error" => self.meas_error = float()?,
            "analysis_delay_us" => self.analysis_delay_us = float()?,
            "strategy" => self.strategy = Strategy::parse(value).map_err(|e| bad(&e.to_string()))?,
            "n_events" => self.n_events = uint()? as usize,
            "n_phases" => self.n_phases = uint()? as usize,
            "shots_per_point" => self.shots_per_point = uint()?,
            "seed" => self.seed = uint()?,
            "scenario" => {
                self.scenario = ScenarioKind::parse(value).ok_or_else(|| {
                    bad("expected phase_vs_dt, fidelity_vs_dtmax, postprocess_shift or rates")
                })?
            }
            "dt_max_values_ns" => {
                self.dt_max_values_ns = parse_value_list(value).map_err(|m| bad(&m))?
            }
            "t_prime_ns" => self.t_prime_ns = float()?,
            "min_group_events" => self.min_group_events = uint()? as usize,
            _ => return Err(bad("unknown key")),
        }
        Ok(())
    }

    /// Parses config text. `seed` is required; Zeeman shifts default per
    /// mapping when both are absent.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::new(0);
        let mut seen: Vec<(String, usize)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if let Some((_, first)) = seen.iter().find(|(k, _)| k == key) {
                return Err(Error::Config {
                    line,
                    message: format!("`{key}` already set on line {first}"),
                });
            }
            cfg.set(key, value).map_err(|e| at_line(e, line))?;
            seen.push((key.to_string(), line));
        }
        let line_of = |key: &str| seen.iter().find(|(k, _)| k == key).map_or(0, |(_, l)| *l);
        if line_of("seed") == 0 {
            return Err(Error::Config {
                line: 0,
                message: "missing required key `seed`".into(),
            });
        }
        let (za, zb) = (line_of("zeeman_a_mhz"), line_of("zeeman_b_mhz"));
        if za == 0 && zb == 0 {
            (cfg.zeeman_a_mhz, cfg.zeeman_b_mhz) = default_zeeman_mhz(cfg.mapping);
        } else if za == 0 || zb == 0 {
            return Err(Error::Config {
                line: za.max(zb),
                message: "set both zeeman_a_mhz and zeeman_b_mhz, or neither".into(),
            });
        }
        if let Err((key, e)) = cfg.validate_keyed() {
            return Err(at_line(e, line_of(key)));
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_keyed().map_err(|(_, e)| e)
    }

    fn validate_keyed(&self) -> std::result::Result<(), (&'static str, Error)> {
        let fail = |key: &'static str, msg: String| {
            Err((
                key,
                Error::Config {
                    line: 0,
                    message: format!("`{key}`: {msg}"),
                },
            ))
        };
        let wrap = |key: &'static str, r: Result<()>| {
            r.map_err(|e| {
                (
                    key,
                    Error::Config {
                        line: 0,
                        message: format!("`{key}`: {e}"),
                    },
                )
            })
        };
        wrap("tau_a_ns", self.memory_a().map(drop))?;
        wrap("tau_b_ns", self.memory_b().map(drop))?;
        wrap("t_r_ns", self.detector().map(drop))?;
        wrap("sigma_phi_rad", self.noise().validate())?;
        let t_r_ps = self.t_r_ns * 1000.0;
        if (t_r_ps - t_r_ps.round()).abs() > 1e-6 {
            return fail("t_r_ns", format!("{} is not a whole number of picoseconds", self.t_r_ns));
        }
        if self.n_events < 1 {
            return fail("n_events", "must be >= 1".into());
        }
        if self.n_phases < 3 {
            return fail("n_phases", "must be >= 3".into());
        }
        if self.min_group_events < 1 {
            return fail("min_group_events", "must be >= 1".into());
        }
        if !(self.t_prime_ns >= 0.0) {
            return fail("t_prime_ns", "must be >= 0".into());
        }
        if !(self.analysis_delay_us >= 0.0) {
            return fail("analysis_delay_us", "must be >= 0".into());
        }
        if self.dt_max_values_ns.is_empty() || self.dt_max_values_ns.iter().any(|v| !(*v > 0.0)) {
            return fail("dt_max_values_ns", "needs one or more values > 0".into());
        }
        Ok(())
    }

    fn memory_a(&self) -> Result<MemoryParams> {
        MemoryParams::new(mhz_to_angular(self.zeeman_a_mhz), ns(self.tau_a_ns), self.efficiency_a)
    }

    fn memory_b(&self) -> Result<MemoryParams> {
        MemoryParams::new(mhz_to_angular(self.zeeman_b_mhz), ns(self.tau_b_ns), self.efficiency_b)
    }

    pub fn link(&self) -> Result<LinkConfig> {
        Ok(LinkConfig {
            memory_a: self.memory_a()?,
            memory_b: self.memory_b()?,
            mapping: self.mapping,
            phi_0: self.phi0_rad,
        })
    }

    pub fn detector(&self) -> Result<DetectorModel> {
        DetectorModel::new(ns(self.t_r_ns), self.jitter_ps * PS, ns(self.window_ns))
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel {
            sigma_phi: self.sigma_phi_rad,
            analysis_delay: self.analysis_delay_us * 1e-6,
            depol_p: self.depol_p,
            meas_error: self.meas_error,
        }
    }

    pub fn t_r_ps(&self) -> i64 {
        (self.t_r_ns * 1000.0).round() as i64
    }

    pub fn dt_max_values(&self) -> Vec<f64> {
        self.dt_max_values_ns.iter().map(|v| ns(*v)).collect()
    }

    /// Every key in a fixed order; `parse(to_text())` gives back `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("tau_a_ns", self.tau_a_ns.to_string());
        kv("tau_b_ns", self.tau_b_ns.to_string());
        kv("zeeman_a_mhz", self.zeeman_a_mhz.to_string());
        kv("zeeman_b_mhz", self.zeeman_b_mhz.to_string());
        kv("mapping", self.mapping.as_str().to_string());
        kv("phi0_rad", self.phi0_rad.to_string());
        kv("efficiency_a", self.efficiency_a.to_string());
        kv("efficiency_b", self.efficiency_b.to_string());
        kv("t_r_ns", self.t_r_ns.to_string());
        kv("jitter_ps", self.jitter_ps.to_string());
        kv("window_ns", self.window_ns.to_string());
        kv("sigma_phi_rad", self.sigma_phi_rad.to_string());
        kv("depol_p", self.depol_p.to_string());
        kv("meas_error", self.meas_error.to_string());
        kv("analysis_delay_us", self.analysis_delay_us.to_string());
        kv("strategy", self.strategy.tag());
        kv("n_events", self.n_events.to_string());
        kv("n_phases", self.n_phases.to_string());
        kv("shots_per_point", self.shots_per_point.to_string());
        kv("seed", self.seed.to_string());
        kv("scenario", self.scenario.as_str().to_string());
        kv(
            "dt_max_values_ns",
            self.dt_max_values_ns.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
        );
        kv("t_prime_ns", self.t_prime_ns.to_string());
        kv("min_group_events", self.min_group_events.to_string());
        s
    }

    /// Hex SHA-256 of the canonical text.
    pub fn sha256(&self) -> String {
        Sha256::digest(self.to_text().as_bytes())
            .iter()
            .fold(String::with_capacity(64), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            })
    }
}

fn at_line(e: Error, line: usize) -> Error {
    match e {
        Error::Config { message, .. } => Error::Config { line, message },
        other => Error::Config {
            line,
            message: other.to_string(),
        },
    }
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_value_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    let s = s.trim();
    let num = |t: &str| -> std::result::Result<f64, String> {
        t.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("`{}` is not a number", t.trim()))
    };
    let parts: Vec<&str> = s.split(':').collect();
    match parts.len() {
        1 => s.split(',').map(num).collect(),
        3 => {
            let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if !(step > 0.0) || stop < start {
                return Err(format!("bad range `{s}`: need start <= stop and step > 0"));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            if n > 100_000 {
                return Err(format!("range `{s}` has too many values"));
            }
            Ok((0..=n).map(|k| start + k as f64 * step).collect())
        }
        _ => Err(format!("`{s}` is neither start:stop:step nor a comma list")),
    }
}

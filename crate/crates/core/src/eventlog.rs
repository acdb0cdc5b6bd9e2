//! Herald event logs: one CSV line per heralded event, times as exact
//! decimal nanoseconds on a 1 ps grid.
//!
//! The file opens with `#` lines holding provenance and the canonical
//! scenario config (`# config: key = value`), followed by the column header.
//! Every data line must end in a newline; a final line without one is
//! treated as truncated.

use std::io::{BufRead, Write};

use crate::detection::TimingRecord;
use crate::error::{Error, Result};
use crate::herald::{detector_pair_phase, DetectorId, HeraldEvent};
use crate::quantum::BellFamily;
use crate::units::{format_ps_as_ns, from_ps, parse_ns_as_ps};

pub const COLUMNS: [&str; 12] = [
    "event_id",
    "det_first",
    "det_second",
    "t1_true_ns",
    "t2_true_ns",
    "t1_q_ns",
    "t2_q_ns",
    "dt_q_ns",
    "phi_D_units_of_pi",
    "family",
    "accepted_flag",
    "strategy_tag",
];

const CONFIG_PREFIX: &str = "# config: ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventLogRecord {
    pub event_id: u64,
    pub det_first: DetectorId,
    pub det_second: DetectorId,
    pub t1_true_ps: i64,
    pub t2_true_ps: i64,
    pub t1_q_ps: i64,
    pub t2_q_ps: i64,
    /// Signed V-minus-H quantized interval.
    pub dt_q_ps: i64,
    pub phi_d_is_pi: bool,
    pub family: BellFamily,
    pub accepted: bool,
    pub strategy_tag: String,
}

impl EventLogRecord {
    /// Captures a simulated herald on the picosecond grid. `t_r_ps` must be
    /// the detector's bin width in ps.
    pub fn from_event(
        event: &HeraldEvent,
        timing: &TimingRecord,
        t_r_ps: i64,
        accepted: bool,
        strategy_tag: &str,
    ) -> Self {
        let orientation = if event.orientation() > 0.0 { 1 } else { -1 };
        Self {
            event_id: event.event_id,
            det_first: event.det_first,
            det_second: event.det_second,
            t1_true_ps: crate::units::to_ps(event.t1_true),
            t2_true_ps: crate::units::to_ps(event.t2_true),
            t1_q_ps: timing.bin1 * t_r_ps,
            t2_q_ps: timing.bin2 * t_r_ps,
            dt_q_ps: orientation * (timing.bin2 - timing.bin1) * t_r_ps,
            phi_d_is_pi: event.phi_d_is_pi(),
            family: event.family,
            accepted,
            strategy_tag: strategy_tag.to_string(),
        }
    }

    pub fn phi_d(&self) -> f64 {
        if self.phi_d_is_pi {
            std::f64::consts::PI
        } else {
            0.0
        }
    }

    /// The herald with its times on the picosecond grid.
    pub fn herald_event(&self, delta_omega: f64) -> HeraldEvent {
        HeraldEvent {
            event_id: self.event_id,
            det_first: self.det_first,
            det_second: self.det_second,
            t1_true: from_ps(self.t1_true_ps),
            t2_true: from_ps(self.t2_true_ps),
            phi_d: self.phi_d(),
            family: self.family,
            delta_omega,
        }
    }

    /// Timing record on a `t_r_ps` grid. Measured times are not logged, so
    /// they are set to the quantized ones.
    pub fn timing(&self, t_r_ps: i64) -> TimingRecord {
        let orientation = if self.det_first.pol == crate::herald::Polarization::H {
            1.0
        } else {
            -1.0
        };
        TimingRecord::from_bins(
            self.t1_q_ps.div_euclid(t_r_ps),
            self.t2_q_ps.div_euclid(t_r_ps),
            orientation,
            from_ps(t_r_ps),
        )
    }

    fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.event_id,
            self.det_first.code(),
            self.det_second.code(),
            format_ps_as_ns(self.t1_true_ps),
            format_ps_as_ns(self.t2_true_ps),
            format_ps_as_ns(self.t1_q_ps),
            format_ps_as_ns(self.t2_q_ps),
            format_ps_as_ns(self.dt_q_ps),
            if self.phi_d_is_pi { 1 } else { 0 },
            self.family.as_str(),
            if self.accepted { 1 } else { 0 },
            self.strategy_tag,
        )
    }

    fn from_line(line: &str, line_no: usize) -> Result<Self> {
        let err = |message: String| Error::EventLog {
            line: line_no,
            message,
        };
        // the strategy tag may itself contain commas, so it takes the rest
        let fields: Vec<&str> = line.splitn(COLUMNS.len(), ',').collect();
        if fields.len() != COLUMNS.len() {
            return Err(err(format!(
                "expected {} fields, found {}",
                COLUMNS.len(),
                fields.len()
            )));
        }
        let time = |i: usize| {
            parse_ns_as_ps(fields[i])
                .ok_or_else(|| err(format!("{} `{}` is not a ps-grid time", COLUMNS[i], fields[i])))
        };
        let det = |i: usize| {
            DetectorId::parse(fields[i])
                .ok_or_else(|| err(format!("{} `{}` is not a detector code", COLUMNS[i], fields[i])))
        };
        let flag = |i: usize| match fields[i] {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(err(format!("{} `{other}` must be 0 or 1", COLUMNS[i]))),
        };
        let rec = Self {
            event_id: fields[0]
                .parse()
                .map_err(|_| err(format!("event_id `{}` is not an integer", fields[0])))?,
            det_first: det(1)?,
            det_second: det(2)?,
            t1_true_ps: time(3)?,
            t2_true_ps: time(4)?,
            t1_q_ps: time(5)?,
            t2_q_ps: time(6)?,
            dt_q_ps: time(7)?,
            phi_d_is_pi: flag(8)?,
            family: BellFamily::parse(fields[9])
                .ok_or_else(|| err(format!("family `{}` is not Psi or Phi", fields[9])))?,
            accepted: flag(10)?,
            strategy_tag: fields[11].to_string(),
        };
        rec.check().map_err(err)?;
        Ok(rec)
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.det_first.pol == self.det_second.pol {
            return Err("both clicks have the same polarization".into());
        }
        if self.t1_true_ps > self.t2_true_ps {
            return Err("t1_true_ns is after t2_true_ns".into());
        }
        let expected_d = detector_pair_phase(self.det_first, self.det_second) != 0.0;
        if expected_d != self.phi_d_is_pi {
            return Err("phi_D does not match the detector pair".into());
        }
        let span = self.t2_q_ps - self.t1_q_ps;
        let expected = if self.det_first.pol == crate::herald::Polarization::H { span } else { -span };
        if self.dt_q_ps != expected {
            return Err("dt_q_ns is not the V-minus-H quantized interval".into());
        }
        crate::strategy::Strategy::parse(&self.strategy_tag).map_err(|e| e.to_string())?;
        Ok(())
    }
}

/// Provenance and config lines written above the column header.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LogHeader {
    /// `(key, value)` pairs written as `# key = value`.
    pub provenance: Vec<(String, String)>,
    /// Canonical config text, if the log came from a simulation.
    pub config_text: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    pub header: LogHeader,
    pub records: Vec<EventLogRecord>,
}

pub fn write_event_log<W: Write>(mut w: W, log: &EventLog) -> std::io::Result<()> {
    writeln!(w, "# heraldkit event log")?;
    for (k, v) in &log.header.provenance {
        writeln!(w, "# {k} = {v}")?;
    }
    if let Some(cfg) = &log.header.config_text {
        for line in cfg.lines() {
            writeln!(w, "{CONFIG_PREFIX}{line}")?;
        }
    }
    writeln!(w, "{}", COLUMNS.join(","))?;
    for r in &log.records {
        writeln!(w, "{}", r.to_line())?;
    }
    w.flush()
}

pub fn read_event_log<R: BufRead>(r: R) -> Result<EventLog> {
    let mut log = EventLog::default();
    let mut config_lines: Vec<String> = Vec::new();
    let mut saw_columns = false;
    let mut buf = Vec::new();
    let mut reader = r;
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(|e| Error::EventLog {
            line: line_no + 1,
            message: e.to_string(),
        })?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let terminated = buf.last() == Some(&b'\n');
        let text = std::str::from_utf8(&buf).map_err(|_| Error::EventLog {
            line: line_no,
            message: "not valid UTF-8".into(),
        })?;
        let line = text.trim_end_matches(['\n', '\r']);
        if !terminated {
            return Err(Error::EventLog {
                line: line_no,
                message: "truncated line (no terminating newline)".into(),
            });
        }
        if let Some(cfg) = line.strip_prefix(CONFIG_PREFIX) {
            config_lines.push(cfg.to_string());
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                log.header
                    .provenance
                    .push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !saw_columns {
            if line != COLUMNS.join(",") {
                return Err(Error::EventLog {
                    line: line_no,
                    message: format!("expected column header `{}`", COLUMNS.join(",")),
                });
            }
            saw_columns = true;
            continue;
        }
        log.records.push(EventLogRecord::from_line(line, line_no)?);
    }
    if !saw_columns {
        return Err(Error::EventLog {
            line: line_no.max(1),
            message: "missing column header".into(),
        });
    }
    if !config_lines.is_empty() {
        let mut text = config_lines.join("\n");
        text.push('\n');
        log.header.config_text = Some(text);
    }
    Ok(log)
}

//! Conversions between the SI values used internally (s, rad/s) and the
//! units used in files and on the command line (ns, MHz, ps).

use std::f64::consts::TAU;

pub const NS: f64 = 1e-9;
pub const PS: f64 = 1e-12;

/// `f` in MHz (cycles) to angular frequency in rad/s.
pub fn mhz_to_angular(f: f64) -> f64 {
    TAU * f * 1e6
}

pub fn angular_to_mhz(omega: f64) -> f64 {
    omega / (TAU * 1e6)
}

pub fn ns(t: f64) -> f64 {
    t * NS
}

pub fn to_ns(t: f64) -> f64 {
    t / NS
}

/// Rounds a time in seconds onto the integer-picosecond grid used by event logs.
pub fn to_ps(t: f64) -> i64 {
    (t / PS).round() as i64
}

pub fn from_ps(ps: i64) -> f64 {
    ps as f64 * PS
}

/// Exact decimal nanoseconds for an integer picosecond count, e.g. `12345 → "12.345"`.
pub fn format_ps_as_ns(ps: i64) -> String {
    let sign = if ps < 0 { "-" } else { "" };
    let a = ps.unsigned_abs();
    format!("{sign}{}.{:03}", a / 1000, a % 1000)
}

/// Parses a decimal nanosecond string with at most three fractional digits.
pub fn parse_ns_as_ps(s: &str) -> Option<i64> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() || frac.len() > 3 || !int.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let whole: i64 = int.parse().ok()?;
    let mut frac_ps: i64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    for _ in frac.len()..3 {
        frac_ps *= 10;
    }
    let v = whole.checked_mul(1000)?.checked_add(frac_ps)?;
    Some(if neg { -v } else { v })
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_pi(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > std::f64::consts::PI {
        r - TAU
    } else {
        r
    }
}

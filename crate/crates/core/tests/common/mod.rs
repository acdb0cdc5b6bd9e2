//! Reference values computed independently of the library: plain
//! quadrature over the truncated exponential photon profile.

#![allow(dead_code)]

pub const TAU_NS: f64 = 8.1;
pub const WINDOW_NS: f64 = 60.0;
pub const T_R_NS: f64 = 5.0;

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// Emission-time density truncated to the window.
pub fn truncated_density(t: f64) -> f64 {
    let z = 1.0 - (-WINDOW_NS / TAU_NS).exp();
    (-t / TAU_NS).exp() / TAU_NS / z
}

/// `P(both clicks in window and |bin_V − bin_H| ≤ max_bins)` given a herald,
/// by 2D midpoint quadrature on a grid aligned with the bins.
pub fn bin_offset_rate(max_bins: i64, cells_per_bin: usize) -> f64 {
    let n_bins = (WINDOW_NS / T_R_NS).round() as usize;
    let n = n_bins * cells_per_bin;
    let h = WINDOW_NS / n as f64;
    let weights: Vec<f64> = (0..n).map(|i| truncated_density((i as f64 + 0.5) * h) * h).collect();
    let mut total = 0.0;
    for i in 0..n {
        let bi = (i / cells_per_bin) as i64;
        for j in 0..n {
            let bj = (j / cells_per_bin) as i64;
            if (bi - bj).abs() <= max_bins {
                total += weights[i] * weights[j];
            }
        }
    }
    let norm: f64 = weights.iter().sum();
    total / (norm * norm)
}

/// `P(t_H ≤ g, t_V ≤ g)` given a herald.
pub fn gate_rate(g_ns: f64) -> f64 {
    let p = simpson(truncated_density, 0.0, g_ns, 2000);
    p * p
}

/// `|E[e^{iωt}]|²` for the truncated profile, i.e. `E[cos(ω(t_V − t_H))]`.
pub fn interval_coherence(omega_per_ns: f64) -> f64 {
    let re = simpson(|t| truncated_density(t) * (omega_per_ns * t).cos(), 0.0, WINDOW_NS, 20_000);
    let im = simpson(|t| truncated_density(t) * (omega_per_ns * t).sin(), 0.0, WINDOW_NS, 20_000);
    re * re + im * im
}

/// Noise-free pooled fidelity with every herald accepted.
pub fn pooled_fidelity(delta_omega_mhz: f64) -> f64 {
    let omega = std::f64::consts::TAU * delta_omega_mhz * 1e-3;
    0.5 + 0.5 * interval_coherence(omega)
}

/// Pooled fidelity over heralds with `|bin_V − bin_H| ≤ max_bins`, by 2D
/// midpoint quadrature with the interval taken as `t_V − t_H`.
pub fn postselected_fidelity(delta_omega_mhz: f64, max_bins: i64, cells_per_bin: usize) -> f64 {
    let omega = std::f64::consts::TAU * delta_omega_mhz * 1e-3;
    let n_bins = (WINDOW_NS / T_R_NS).round() as usize;
    let n = n_bins * cells_per_bin;
    let h = WINDOW_NS / n as f64;
    let t: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
    let w: Vec<f64> = t.iter().map(|&x| truncated_density(x)).collect();
    let (mut re, mut im, mut mass) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if ((i / cells_per_bin) as i64 - (j / cells_per_bin) as i64).abs() <= max_bins {
                let p = w[i] * w[j];
                let phase = omega * (t[i] - t[j]);
                re += p * phase.cos();
                im += p * phase.sin();
                mass += p;
            }
        }
    }
    0.5 + 0.5 * (re * re + im * im).sqrt() / mass
}

//! Two-memory state algebra.
//!
//! Basis ordering is `|↓↓⟩, |↓↑⟩, |↑↓⟩, |↑↑⟩` with memory A as the left
//! factor, so the index of a basis state is `2·a + b` with `↓ = 0`, `↑ = 1`.
//! The π transfer pulse `|↓⟩ → |0⟩` is treated as a relabeling: "dark" is
//! `|↓⟩` (read as `|0⟩`) and "bright" is `|↑⟩`.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};
use std::fmt;

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// Tolerance on trace, Hermiticity and normalization.
pub const STRUCTURE_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted as non-negative.
pub const EIGEN_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Which Bell-state family a herald projects onto.
///
/// `Psi` lives in the odd-parity span `{|↓↑⟩, |↑↓⟩}` and `Phi` in the
/// even-parity span `{|↓↓⟩, |↑↑⟩}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BellFamily {
    Psi,
    Phi,
}

impl BellFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            BellFamily::Psi => "psi",
            BellFamily::Phi => "phi",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "psi" => Some(BellFamily::Psi),
            "phi" => Some(BellFamily::Phi),
            _ => None,
        }
    }

    pub fn other(self) -> Self {
        match self {
            BellFamily::Psi => BellFamily::Phi,
            BellFamily::Phi => BellFamily::Psi,
        }
    }

    /// Indices of the two basis states carrying this family's coherence.
    pub fn coherence_indices(self) -> (usize, usize) {
        match self {
            BellFamily::Psi => (1, 2),
            BellFamily::Phi => (0, 3),
        }
    }
}

impl fmt::Display for BellFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Normalized pure state of the two memories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureState4 {
    amplitudes: [Complex64; 4],
}

impl PureState4 {
    pub fn new(amplitudes: [Complex64; 4]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > STRUCTURE_TOL {
            return Err(Error::InvalidState(format!(
                "squared amplitudes sum to {norm}, expected 1"
            )));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes `amplitudes`; fails only on the zero vector.
    pub fn normalized(amplitudes: [Complex64; 4]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        Ok(Self {
            amplitudes: amplitudes.map(|a| a / norm),
        })
    }

    pub fn amplitudes(&self) -> &[Complex64; 4] {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amplitudes[index]
    }

    pub fn to_vector(&self) -> Vector4<Complex64> {
        Vector4::from_column_slice(&self.amplitudes)
    }

    pub fn to_density(&self) -> DensityMatrix4 {
        let v = self.to_vector();
        DensityMatrix4 {
            entries: v * v.adjoint(),
        }
    }
}

/// Two-memory density matrix; constructed only through validated paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix4 {
    entries: Matrix4<Complex64>,
}

impl DensityMatrix4 {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(entries: Matrix4<Complex64>) -> Result<Self> {
        let rho = Self { entries };
        rho.check_invariants()?;
        Ok(rho)
    }

    pub fn maximally_mixed() -> Self {
        Self {
            entries: Matrix4::identity() * Complex64::new(0.25, 0.0),
        }
    }

    /// Convex combination `Σ wᵢ ρᵢ / Σ wᵢ`.
    pub fn mixture<'a, I>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, &'a DensityMatrix4)>,
    {
        let mut total = 0.0;
        let mut acc = Matrix4::<Complex64>::zeros();
        for (w, rho) in terms {
            if !(w >= 0.0) {
                return Err(invalid("weight", format!("mixture weight {w} is negative")));
            }
            total += w;
            acc += rho.entries * Complex64::new(w, 0.0);
        }
        if total <= 0.0 {
            return Err(invalid("weight", "mixture has zero total weight"));
        }
        Ok(Self {
            entries: acc / Complex64::new(total, 0.0),
        })
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.entries
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        let ev = self.entries.symmetric_eigenvalues();
        [ev[0], ev[1], ev[2], ev[3]]
    }

    pub fn check_invariants(&self) -> Result<()> {
        let m = &self.entries;
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite entry".into()));
        }
        let herm = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > STRUCTURE_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (max |ρ - ρ†| = {herm:e})"
            )));
        }
        let tr = m.trace();
        if (tr - ONE).norm() > STRUCTURE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let min_ev = self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min_ev < -EIGEN_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min_ev:e}"
            )));
        }
        Ok(())
    }

    pub(crate) fn map_entries(&self, f: impl Fn(usize, usize, Complex64) -> Complex64) -> Self {
        Self {
            entries: Matrix4::from_fn(|i, j| f(i, j, self.entries[(i, j)])),
        }
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, unitary: &Matrix4<Complex64>) -> Self {
        Self {
            entries: unitary * self.entries * unitary.adjoint(),
        }
    }
}

impl From<PureState4> for DensityMatrix4 {
    fn from(state: PureState4) -> Self {
        state.to_density()
    }
}

/// Microwave rotation `R̂(θ, φ)` on one memory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    theta: f64,
    phi: f64,
}

impl Rotation {
    /// Angles are reduced into `[0, 2π)`.
    pub fn new(theta: f64, phi: f64) -> Self {
        Self {
            theta: theta.rem_euclid(TAU),
            phi: phi.rem_euclid(TAU),
        }
    }

    /// The π/2 analysis pulse with microwave phase `phi`.
    pub fn analysis(phi: f64) -> Self {
        Self::new(std::f64::consts::FRAC_PI_2, phi)
    }

    pub fn identity() -> Self {
        Self::new(0.0, 0.0)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// `[[cos θ/2, −i e^{−iφ} sin θ/2], [−i e^{iφ} sin θ/2, cos θ/2]]` in the
    /// `(|↓⟩, |↑⟩)` basis. With this sign of φ the odd parity after two π/2
    /// pulses on `bell_state(Psi, θ, ½)` is `½ − ½cos(φ_a − φ_b + θ)`.
    pub fn matrix(&self) -> Matrix2<Complex64> {
        let (s, c) = (self.theta / 2.0).sin_cos();
        let minus_i = Complex64::new(0.0, -1.0);
        Matrix2::new(
            Complex64::new(c, 0.0),
            minus_i * Complex64::from_polar(s, -self.phi),
            minus_i * Complex64::from_polar(s, self.phi),
            Complex64::new(c, 0.0),
        )
    }
}

fn kron(a: &Matrix2<Complex64>, b: &Matrix2<Complex64>) -> Matrix4<Complex64> {
    Matrix4::from_fn(|i, j| a[(i / 2, j / 2)] * b[(i % 2, j % 2)])
}

/// Builds the heralded Bell state with relative phase `phase` and weight
/// `weight` on the second branch:
///
/// * `Psi`: `√(1−w)|↓↑⟩ + √w·e^{−i·phase}|↑↓⟩`
/// * `Phi`: `√(1−w)|↓↓⟩ − √w·e^{+i·phase}|↑↑⟩`
pub fn bell_state(family: BellFamily, phase: f64, weight: f64) -> Result<PureState4> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(invalid("weight", format!("{weight} is outside [0, 1]")));
    }
    let first = Complex64::new((1.0 - weight).sqrt(), 0.0);
    let mut amps = [ZERO; 4];
    match family {
        BellFamily::Psi => {
            amps[1] = first;
            amps[2] = Complex64::from_polar(weight.sqrt(), -phase);
        }
        BellFamily::Phi => {
            amps[0] = first;
            amps[3] = -Complex64::from_polar(weight.sqrt(), phase);
        }
    }
    PureState4::normalized(amps)
}

/// Balanced (`w = ½`) Bell state; never fails.
pub fn balanced_bell(family: BellFamily, phase: f64) -> PureState4 {
    let mut amps = [ZERO; 4];
    let (i, j) = family.coherence_indices();
    amps[i] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    amps[j] = match family {
        BellFamily::Psi => Complex64::from_polar(FRAC_1_SQRT_2, -phase),
        BellFamily::Phi => -Complex64::from_polar(FRAC_1_SQRT_2, phase),
    };
    PureState4 { amplitudes: amps }
}

/// `(U_a ⊗ U_b) ρ (U_a ⊗ U_b)†`.
pub fn apply_local_rotations(
    state: &DensityMatrix4,
    rot_a: &Rotation,
    rot_b: &Rotation,
) -> DensityMatrix4 {
    state.conjugate_by(&kron(&rot_a.matrix(), &rot_b.matrix()))
}

/// Diagonal of ρ in basis order `(P_↓↓, P_↓↑, P_↑↓, P_↑↑)`, i.e.
/// `(P_00, P_0↑, P_↑0, P_↑↑)` after the transfer relabeling.
pub fn populations(state: &DensityMatrix4) -> [f64; 4] {
    let mut p = [0.0; 4];
    for (k, slot) in p.iter_mut().enumerate() {
        *slot = state.entry(k, k).re.clamp(0.0, 1.0);
    }
    p
}

pub fn odd_parity(state: &DensityMatrix4) -> f64 {
    let p = populations(state);
    (p[1] + p[2]).clamp(0.0, 1.0)
}

/// `⟨target|ρ|target⟩`, clamped to `[0, 1]`.
pub fn fidelity_pure(state: &DensityMatrix4, target: &PureState4) -> f64 {
    let v = target.to_vector();
    let f = (v.adjoint() * state.matrix() * v)[(0, 0)];
    f.re.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn assert_amps(state: &PureState4, expected: [f64; 4]) {
        for (a, e) in state.amplitudes().iter().zip(expected) {
            assert_abs_diff_eq!(a.re, e, epsilon = 1e-12);
            assert_abs_diff_eq!(a.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bell_state_examples() {
        let h = FRAC_1_SQRT_2;
        assert_amps(&bell_state(BellFamily::Psi, 0.0, 0.5).unwrap(), [0.0, h, h, 0.0]);
        assert_amps(&bell_state(BellFamily::Psi, PI, 0.5).unwrap(), [0.0, h, -h, 0.0]);
        assert_amps(&bell_state(BellFamily::Phi, 0.0, 1.0).unwrap(), [0.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn bell_state_rejects_bad_weight() {
        assert!(bell_state(BellFamily::Psi, 0.0, -0.1).is_err());
        assert!(bell_state(BellFamily::Phi, 0.0, 1.5).is_err());
        assert!(bell_state(BellFamily::Phi, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn balanced_matches_general_constructor() {
        for family in [BellFamily::Psi, BellFamily::Phi] {
            for phase in [-2.0, 0.0, 0.3, 3.0] {
                let a = balanced_bell(family, phase);
                let b = bell_state(family, phase, 0.5).unwrap();
                for k in 0..4 {
                    assert_abs_diff_eq!((a.amplitude(k) - b.amplitude(k)).norm(), 0.0, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn identity_rotation_leaves_state() {
        let rho = bell_state(BellFamily::Phi, 0.4, 0.3).unwrap().to_density();
        let out = apply_local_rotations(&rho, &Rotation::identity(), &Rotation::identity());
        assert_abs_diff_eq!((out.matrix() - rho.matrix()).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn psi_parity_matches_fringe_formula() {
        for &theta in &[0.0, 0.7, -2.1, 3.0] {
            let rho = bell_state(BellFamily::Psi, theta, 0.5).unwrap().to_density();
            for &(a, b) in &[(0.0, 0.0), (0.3, -1.2), (2.0, 0.5)] {
                let out = apply_local_rotations(&rho, &Rotation::analysis(a), &Rotation::analysis(b));
                let expected = 0.5 - 0.5 * (a - b + theta).cos();
                assert_abs_diff_eq!(odd_parity(&out), expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn mixed_state_parity_is_half() {
        let rho = DensityMatrix4::maximally_mixed();
        for &(a, b) in &[(0.0, 0.0), (1.0, 2.0), (-3.0, 0.4)] {
            let out = apply_local_rotations(&rho, &Rotation::analysis(a), &Rotation::analysis(b));
            assert_abs_diff_eq!(odd_parity(&out), 0.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn population_examples() {
        let psi = bell_state(BellFamily::Psi, 0.0, 0.5).unwrap().to_density();
        let phi = bell_state(BellFamily::Phi, 0.0, 0.5).unwrap().to_density();
        let p = populations(&psi);
        assert_abs_diff_eq!(p[..], [0.0, 0.5, 0.5, 0.0][..], epsilon = 1e-12);
        let p = populations(&phi);
        assert_abs_diff_eq!(p[..], [0.5, 0.0, 0.0, 0.5][..], epsilon = 1e-12);
        let p = populations(&DensityMatrix4::maximally_mixed());
        assert_abs_diff_eq!(p[..], [0.25; 4][..], epsilon = 1e-15);
        assert_abs_diff_eq!(odd_parity(&psi), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(odd_parity(&phi), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_examples() {
        let psi = bell_state(BellFamily::Psi, 0.0, 0.5).unwrap();
        assert_abs_diff_eq!(fidelity_pure(&psi.to_density(), &psi), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity_pure(&DensityMatrix4::maximally_mixed(), &psi), 0.25, epsilon = 1e-12);

        // Opposite-phase mixture: ½|Ψ(0)⟩⟨Ψ(0)| + ½|Ψ(π)⟩⟨Ψ(π)| = ½(|↓↑⟩⟨↓↑| + |↑↓⟩⟨↑↓|).
        let psi_pi = bell_state(BellFamily::Psi, PI, 0.5).unwrap().to_density();
        let psi0 = psi.to_density();
        let mix = DensityMatrix4::mixture([(0.5, &psi0), (0.5, &psi_pi)]).unwrap();
        let mut direct = Matrix4::<Complex64>::zeros();
        direct[(1, 1)] = Complex64::new(0.5, 0.0);
        direct[(2, 2)] = Complex64::new(0.5, 0.0);
        assert_abs_diff_eq!((mix.matrix() - direct).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity_pure(&mix, &psi), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn validation_rejects_bad_matrices() {
        let mut m = Matrix4::<Complex64>::identity() * Complex64::new(0.5, 0.0);
        assert!(DensityMatrix4::new(m).is_err());
        m = Matrix4::<Complex64>::identity() * Complex64::new(0.25, 0.0);
        m[(0, 1)] = Complex64::new(0.0, 0.1);
        assert!(DensityMatrix4::new(m).is_err());
        m[(1, 0)] = Complex64::new(0.0, -0.1);
        assert!(DensityMatrix4::new(m).is_ok());
        let mut neg = Matrix4::<Complex64>::zeros();
        neg[(0, 0)] = Complex64::new(1.2, 0.0);
        neg[(1, 1)] = Complex64::new(-0.2, 0.0);
        assert!(DensityMatrix4::new(neg).is_err());
    }

    #[test]
    fn pure_state_requires_normalization() {
        assert!(PureState4::new([ONE, ONE, ZERO, ZERO]).is_err());
        assert!(PureState4::normalized([ZERO; 4]).is_err());
    }

    #[test]
    fn rotation_reduces_angles() {
        let r = Rotation::new(-PI / 2.0, 7.0);
        assert_abs_diff_eq!(r.theta(), 1.5 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(r.phi(), 7.0 - TAU, epsilon = 1e-12);
    }
}

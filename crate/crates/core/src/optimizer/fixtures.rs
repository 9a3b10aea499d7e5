//! Deterministic near-optimal (state, plan) seed pairs.
//!
//! These reproduce the explicit constructions that approximate the
//! worst-case optima: the diagonal-basis parametrization for low
//! entanglement, the rotated-basis one for high entanglement, and the
//! GHZ-witness deviations for even and odd party counts.

use super::OptimizerError;
use crate::misalignment::{
    ghz_plan, pauli_triad, tomography_open_triad, GhzParity, MeasurementPlan,
};
use crate::quantum::{BlochVector, PureState};
use crate::witness::biseparable_fixture;
use num_complex::Complex64;

/// Rotated-basis constants for the high-entanglement parametrization.
pub const HIGH_THETA: f64 = 0.9961;
pub const HIGH_PHI: f64 = 0.4980;
pub const HIGH_GAMMA: f64 = 2.7946;

/// Concurrence ranges where the two-qubit parametrizations are near-optimal.
pub const LOW_CONCURRENCE_MAX: f64 = 0.56;
pub const HIGH_CONCURRENCE_MIN: f64 = 0.87;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixtureKind {
    LowAlpha { alpha: f64 },
    HighAlpha { alpha: f64 },
    EvenGhz { n: usize },
    OddGhz { n: usize },
}

#[derive(Debug, Clone)]
pub struct SeedFixture {
    pub state: PureState,
    pub plan: MeasurementPlan,
    /// Whether the parameters lie in the construction's validity domain.
    pub in_domain: bool,
}

pub(crate) fn diagonal_direction() -> BlochVector {
    let r = 1.0 / 3f64.sqrt();
    BlochVector::new(r, r, r)
}

/// `e^{i 2pi/3} cos(a) |s+ s+> + sin(a) |s- s->` in the diagonal basis.
pub fn low_alpha_state(alpha: f64) -> PureState {
    let s = diagonal_direction();
    let plus = PureState::bloch_eigenstate(&s, true);
    let minus = PureState::bloch_eigenstate(&s, false);
    let pp = plus.tensor(&plus);
    let mm = minus.tensor(&minus);
    let phase = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let amps = pp.amplitudes().map(|z| z * phase * alpha.cos())
        + mm.amplitudes().scale(alpha.sin());
    PureState::new(amps).expect("schmidt combination stays normalized")
}

/// Axis of the rotated observable used by the high-entanglement basis.
pub fn high_alpha_axis() -> BlochVector {
    let (s, c) = (HIGH_THETA.sin(), HIGH_THETA.cos());
    BlochVector::new(s / 2f64.sqrt(), c, s / 2f64.sqrt())
}

/// `cos(a) |t+ t+> + sin(a) |t- t->` with the phase `<0|t+> = e^{i phi} c+`.
pub fn high_alpha_state(alpha: f64) -> PureState {
    let u = high_alpha_axis();
    let phase = Complex64::from_polar(1.0, HIGH_PHI);
    let plus_amps = PureState::bloch_eigenstate(&u, true).amplitudes().map(|z| z * phase);
    let plus = PureState::new(plus_amps).expect("phase preserves norm");
    let minus = PureState::bloch_eigenstate(&u, false);
    let pp = plus.tensor(&plus);
    let mm = minus.tensor(&minus);
    let amps = pp.amplitudes().scale(alpha.cos()) + mm.amplitudes().scale(alpha.sin());
    PureState::new(amps).expect("schmidt combination stays normalized")
}

/// Actual axes for the high-entanglement construction.
pub fn high_alpha_axes(eps: f64) -> [BlochVector; 3] {
    let (se, ce) = (eps.sin(), eps.cos());
    let (sg, cg) = (HIGH_GAMMA.sin(), HIGH_GAMMA.cos());
    let r = se / 2f64.sqrt();
    [
        BlochVector::new(ce, se * cg, se * sg),
        BlochVector::new(-r, ce, -r),
        BlochVector::new(se * sg, se * cg, ce),
    ]
}

/// Builds the requested fixture at deviation `eps`.
pub fn seed_fixture(kind: &FixtureKind, eps: f64) -> Result<SeedFixture, OptimizerError> {
    match *kind {
        FixtureKind::LowAlpha { alpha } => {
            if !(0.0..=std::f64::consts::FRAC_PI_4 + 1e-12).contains(&alpha) {
                return Err(OptimizerError::OutOfRange(format!("alpha = {alpha}")));
            }
            let plan = MeasurementPlan::new_local(
                vec![pauli_triad(); 2],
                vec![tomography_open_triad(eps).to_vec(); 2],
            )?;
            Ok(SeedFixture {
                state: low_alpha_state(alpha),
                plan,
                in_domain: (2.0 * alpha).sin() <= LOW_CONCURRENCE_MAX + 1e-12,
            })
        }
        FixtureKind::HighAlpha { alpha } => {
            if !(0.0..=std::f64::consts::FRAC_PI_4 + 1e-12).contains(&alpha) {
                return Err(OptimizerError::OutOfRange(format!("alpha = {alpha}")));
            }
            let plan = MeasurementPlan::new_local(
                vec![pauli_triad(); 2],
                vec![high_alpha_axes(eps).to_vec(); 2],
            )?;
            Ok(SeedFixture {
                state: high_alpha_state(alpha),
                plan,
                in_domain: (2.0 * alpha).sin() >= HIGH_CONCURRENCE_MIN - 1e-12,
            })
        }
        FixtureKind::EvenGhz { n } => {
            let plan = ghz_plan(n, eps, GhzParity::Even)?;
            Ok(SeedFixture {
                state: biseparable_fixture(n, GhzParity::Even)?,
                plan,
                in_domain: eps <= crate::misalignment::ghz_eps_soft_limit(n) + 1e-12,
            })
        }
        FixtureKind::OddGhz { n } => {
            let plan = ghz_plan(n, eps, GhzParity::Odd)?;
            Ok(SeedFixture {
                state: biseparable_fixture(n, GhzParity::Odd)?,
                plan,
                in_domain: eps <= crate::misalignment::ghz_eps_soft_limit(n) + 1e-12,
            })
        }
    }
}

/// Low-entanglement fixture state as local-basis angles
/// `(theta, phi, gamma)` per party, matching the optimizer's chart.
pub fn low_alpha_basis_angles() -> [f64; 3] {
    let theta = (1.0 / 3f64.sqrt()).acos();
    [theta, std::f64::consts::FRAC_PI_4, -std::f64::consts::PI / 3.0]
}

/// High-entanglement fixture state as local-basis angles per party.
pub fn high_alpha_basis_angles() -> [f64; 3] {
    let u = high_alpha_axis();
    let theta = u.z.clamp(-1.0, 1.0).acos();
    let phi = u.y.atan2(u.x);
    [theta, phi, -HIGH_PHI]
}

//! Intended vs. actual measurement frames under a bounded angular deviation.
//!
//! A [`MeasurementPlan`] stores one list of intended directions per party and
//! the actual directions that were (or would be) measured. Actual directions
//! are indexed either per local setting, or — in correlated mode — per joint
//! setting tuple, so that one party's deviation may depend on every party's
//! choice of setting.
//!
//! Joint setting tuples are linearized in mixed radix with party 0 as the
//! most significant digit.

use crate::quantum::BlochVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DIRECTION_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("direction for party {party}, entry {index} has norm {norm}, expected 1")]
    NotUnit { party: usize, index: usize, norm: f64 },
    #[error("intended and actual shapes differ for party {party}: {intended} vs {actual}")]
    ShapeMismatch { party: usize, intended: usize, actual: usize },
    #[error("plan must have at least one party")]
    NoParties,
    #[error("party {0} has no settings")]
    NoSettings(usize),
    #[error("epsilon {0} outside [0, pi]")]
    InvalidEpsilon(f64),
    #[error("joint tuple {0:?} does not match the plan's setting counts")]
    BadJointTuple(Vec<usize>),
    #[error("GHZ plan needs n >= 3, got {0}")]
    GhzTooSmall(usize),
    #[error("GHZ deviation parity {parity:?} inconsistent with n = {n}")]
    GhzParityMismatch { n: usize, parity: GhzParity },
    #[error("cannot project the zero vector onto a cone")]
    ZeroVector,
    #[error("malformed plan document: {0}")]
    Malformed(String),
}

/// Maximal angular deviation budget, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MisalignmentBudget {
    epsilon: f64,
}

impl MisalignmentBudget {
    pub fn new(epsilon: f64) -> Result<Self, PlanError> {
        if !(0.0..=std::f64::consts::PI).contains(&epsilon) {
            return Err(PlanError::InvalidEpsilon(epsilon));
        }
        Ok(Self { epsilon })
    }

    pub fn from_degrees(deg: f64) -> Result<Self, PlanError> {
        Self::new(deg.to_radians())
    }

    pub fn radians(&self) -> f64 {
        self.epsilon
    }

    pub fn degrees(&self) -> f64 {
        self.epsilon.to_degrees()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanMode {
    Local,
    Correlated,
}

#[derive(Debug, Clone, PartialEq)]
enum ActualDirections {
    /// `[party][setting]`
    Local(Vec<Vec<BlochVector>>),
    /// `[party][joint setting index]`
    Correlated(Vec<Vec<BlochVector>>),
}

/// Per-party intended and actual measurement directions.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementPlan {
    intended: Vec<Vec<BlochVector>>,
    actual: ActualDirections,
}

fn check_units(dirs: &[Vec<BlochVector>]) -> Result<(), PlanError> {
    for (party, list) in dirs.iter().enumerate() {
        if list.is_empty() {
            return Err(PlanError::NoSettings(party));
        }
        for (index, v) in list.iter().enumerate() {
            if !v.is_unit(DIRECTION_NORM_TOL) {
                return Err(PlanError::NotUnit { party, index, norm: v.norm() });
            }
        }
    }
    Ok(())
}

impl MeasurementPlan {
    /// Plan with local (per-setting) actual directions.
    pub fn new_local(
        intended: Vec<Vec<BlochVector>>,
        actual: Vec<Vec<BlochVector>>,
    ) -> Result<Self, PlanError> {
        if intended.is_empty() {
            return Err(PlanError::NoParties);
        }
        check_units(&intended)?;
        check_units(&actual)?;
        for party in 0..intended.len() {
            let a = actual.get(party).map_or(0, Vec::len);
            if a != intended[party].len() {
                return Err(PlanError::ShapeMismatch {
                    party,
                    intended: intended[party].len(),
                    actual: a,
                });
            }
        }
        Ok(Self { intended, actual: ActualDirections::Local(actual) })
    }

    /// Plan whose actual directions depend on the full joint setting tuple.
    pub fn new_correlated(
        intended: Vec<Vec<BlochVector>>,
        actual: Vec<Vec<BlochVector>>,
    ) -> Result<Self, PlanError> {
        if intended.is_empty() {
            return Err(PlanError::NoParties);
        }
        check_units(&intended)?;
        check_units(&actual)?;
        let joint = intended.iter().map(Vec::len).product::<usize>();
        for party in 0..intended.len() {
            let a = actual.get(party).map_or(0, Vec::len);
            if a != joint {
                return Err(PlanError::ShapeMismatch { party, intended: joint, actual: a });
            }
        }
        Ok(Self { intended, actual: ActualDirections::Correlated(actual) })
    }

    /// Plan with no misalignment (actual = intended).
    pub fn ideal(intended: Vec<Vec<BlochVector>>) -> Result<Self, PlanError> {
        let actual = intended.clone();
        Self::new_local(intended, actual)
    }

    pub fn n_parties(&self) -> usize {
        self.intended.len()
    }

    pub fn mode(&self) -> PlanMode {
        match self.actual {
            ActualDirections::Local(_) => PlanMode::Local,
            ActualDirections::Correlated(_) => PlanMode::Correlated,
        }
    }

    pub fn intended_directions(&self) -> &[Vec<BlochVector>] {
        &self.intended
    }

    pub fn n_settings(&self, party: usize) -> usize {
        self.intended[party].len()
    }

    pub fn n_joint_settings(&self) -> usize {
        self.intended.iter().map(Vec::len).product()
    }

    pub fn intended_direction(&self, party: usize, setting: usize) -> &BlochVector {
        &self.intended[party][setting]
    }

    /// Linear index of a joint setting tuple (party 0 most significant).
    pub fn joint_index(&self, tuple: &[usize]) -> Result<usize, PlanError> {
        if tuple.len() != self.n_parties() {
            return Err(PlanError::BadJointTuple(tuple.to_vec()));
        }
        let mut idx = 0;
        for (party, &k) in tuple.iter().enumerate() {
            let n = self.n_settings(party);
            if k >= n {
                return Err(PlanError::BadJointTuple(tuple.to_vec()));
            }
            idx = idx * n + k;
        }
        Ok(idx)
    }

    /// All joint setting tuples in linear-index order.
    pub fn joint_settings(&self) -> Vec<Vec<usize>> {
        let mut tuples = vec![vec![]];
        for party in 0..self.n_parties() {
            let mut next = Vec::with_capacity(tuples.len() * self.n_settings(party));
            for t in &tuples {
                for k in 0..self.n_settings(party) {
                    let mut t2 = t.clone();
                    t2.push(k);
                    next.push(t2);
                }
            }
            tuples = next;
        }
        tuples
    }

    /// Actual direction measured by `party` within the given joint tuple.
    pub fn actual_direction(&self, party: usize, tuple: &[usize]) -> Result<BlochVector, PlanError> {
        match &self.actual {
            ActualDirections::Local(dirs) => {
                let k = *tuple.get(party).ok_or_else(|| PlanError::BadJointTuple(tuple.to_vec()))?;
                if k >= dirs[party].len() {
                    return Err(PlanError::BadJointTuple(tuple.to_vec()));
                }
                Ok(dirs[party][k])
            }
            ActualDirections::Correlated(dirs) => {
                let idx = self.joint_index(tuple)?;
                Ok(dirs[party][idx])
            }
        }
    }

    /// Per-setting actual directions; only available in local mode.
    pub fn local_actual(&self) -> Option<&[Vec<BlochVector>]> {
        match &self.actual {
            ActualDirections::Local(dirs) => Some(dirs),
            ActualDirections::Correlated(_) => None,
        }
    }

    /// Lifts a local plan to correlated mode (every joint tuple gets the
    /// same per-setting direction). Statistics are unchanged.
    pub fn to_correlated(&self) -> Result<Self, PlanError> {
        let tuples = self.joint_settings();
        let mut actual = vec![Vec::with_capacity(tuples.len()); self.n_parties()];
        for t in &tuples {
            for (party, row) in actual.iter_mut().enumerate() {
                row.push(self.actual_direction(party, t)?);
            }
        }
        Self::new_correlated(self.intended.clone(), actual)
    }

    /// Maximal angular deviation between intended and actual directions
    /// (Bloch-sphere angle), over joint tuples in correlated mode.
    pub fn max_angular_deviation(&self) -> f64 {
        let mut max = 0.0f64;
        match &self.actual {
            ActualDirections::Local(dirs) => {
                for party in 0..self.n_parties() {
                    for (k, actual) in dirs[party].iter().enumerate() {
                        max = max.max(self.intended[party][k].angle_to(actual));
                    }
                }
            }
            ActualDirections::Correlated(dirs) => {
                for t in self.joint_settings() {
                    let idx = self.joint_index(&t).expect("tuple from own iterator");
                    for party in 0..self.n_parties() {
                        let actual = &dirs[party][idx];
                        max = max.max(self.intended[party][t[party]].angle_to(actual));
                    }
                }
            }
        }
        max
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(PlanJson::from(self)).expect("plan serialization")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, PlanError> {
        let raw: PlanJson =
            serde_json::from_value(value.clone()).map_err(|e| PlanError::Malformed(e.to_string()))?;
        raw.try_into()
    }
}

/// JSON layout: `{n_parties, mode, intended: [[[x,y,z],..],..], actual: ...}`.
#[derive(Debug, Serialize, Deserialize)]
struct PlanJson {
    n_parties: usize,
    mode: PlanMode,
    intended: Vec<Vec<BlochVector>>,
    actual: Vec<Vec<BlochVector>>,
}

impl From<&MeasurementPlan> for PlanJson {
    fn from(plan: &MeasurementPlan) -> Self {
        let (mode, actual) = match &plan.actual {
            ActualDirections::Local(d) => (PlanMode::Local, d.clone()),
            ActualDirections::Correlated(d) => (PlanMode::Correlated, d.clone()),
        };
        Self { n_parties: plan.n_parties(), mode, intended: plan.intended.clone(), actual }
    }
}

impl TryFrom<PlanJson> for MeasurementPlan {
    type Error = PlanError;

    fn try_from(raw: PlanJson) -> Result<Self, PlanError> {
        if raw.intended.len() != raw.n_parties {
            return Err(PlanError::ShapeMismatch {
                party: 0,
                intended: raw.n_parties,
                actual: raw.intended.len(),
            });
        }
        match raw.mode {
            PlanMode::Local => MeasurementPlan::new_local(raw.intended, raw.actual),
            PlanMode::Correlated => MeasurementPlan::new_correlated(raw.intended, raw.actual),
        }
    }
}

/// Standard Pauli triad `{x, y, z}`.
pub fn pauli_triad() -> Vec<BlochVector> {
    vec![BlochVector::x_axis(), BlochVector::y_axis(), BlochVector::z_axis()]
}

/// Ideal plan measuring the Pauli triad on every party.
pub fn standard_pauli_plan(n_parties: usize) -> MeasurementPlan {
    let intended = vec![pauli_triad(); n_parties];
    MeasurementPlan::ideal(intended).expect("pauli triad is unit norm")
}

/// Tomography deviation family: the Pauli triad opened uniformly away from
/// the `(1,1,1)/sqrt(3)` diagonal, each axis tilted by exactly `eps`.
pub fn tomography_open_triad(eps: f64) -> [BlochVector; 3] {
    let c = eps.cos();
    let s = eps.sin() / 2f64.sqrt();
    [
        BlochVector::new(c, -s, -s),
        BlochVector::new(-s, c, -s),
        BlochVector::new(-s, -s, c),
    ]
}

/// Witness deviation family: the Pauli triad closed uniformly towards the
/// diagonal (opposite signs to [`tomography_open_triad`]).
pub fn witness_closed_triad(eps: f64) -> [BlochVector; 3] {
    let c = eps.cos();
    let s = eps.sin() / 2f64.sqrt();
    [
        BlochVector::new(c, s, s),
        BlochVector::new(s, c, s),
        BlochVector::new(s, s, c),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GhzParity {
    Even,
    Odd,
}

/// Direction in the XY plane at the given azimuthal angle.
fn xy_direction(angle: f64) -> BlochVector {
    BlochVector::new(angle.cos(), angle.sin(), 0.0)
}

/// Intended settings for the GHZ witness: `n` equally spaced XY directions
/// at angles `k pi / n` (k = 1..n) plus the z axis as the last setting.
pub fn ghz_intended_settings(n: usize) -> Vec<BlochVector> {
    let mut dirs: Vec<BlochVector> = (1..=n)
        .map(|k| xy_direction(k as f64 * std::f64::consts::PI / n as f64))
        .collect();
    dirs.push(BlochVector::z_axis());
    dirs
}

/// Soft validity threshold `pi / (2n)` for the GHZ deviation families.
pub fn ghz_eps_soft_limit(n: usize) -> f64 {
    std::f64::consts::PI / (2.0 * n as f64)
}

/// GHZ-witness plan with the paired (even n) or alternating (odd n) in-plane
/// deviation of the XY settings; the z setting stays unperturbed.
pub fn ghz_plan(n: usize, eps: f64, parity: GhzParity) -> Result<MeasurementPlan, PlanError> {
    if n < 3 {
        return Err(PlanError::GhzTooSmall(n));
    }
    let even = n % 2 == 0;
    match parity {
        GhzParity::Even if !even => return Err(PlanError::GhzParityMismatch { n, parity }),
        GhzParity::Odd if even => return Err(PlanError::GhzParityMismatch { n, parity }),
        _ => {}
    }
    let intended = vec![ghz_intended_settings(n); n];
    let mut actual = Vec::with_capacity(n);
    for j in 1..=n {
        let mut dirs = Vec::with_capacity(n + 1);
        for k in 1..=n {
            let base = k as f64 * std::f64::consts::PI / n as f64;
            let g = match parity {
                GhzParity::Even => {
                    let side = if 2 * j <= n { 1.0 } else { -1.0 };
                    side * (-1f64).powi(k as i32)
                }
                GhzParity::Odd => {
                    let n_minus = (n - 1) / 2;
                    let n_plus = (n + 1) / 2;
                    let nu = if n_minus % 2 == 0 { 1.0 } else { -1.0 };
                    let a = k as f64 - n_plus as f64;
                    let b = j as f64 - n as f64 / 2.0;
                    if a == 0.0 {
                        0.0
                    } else {
                        nu * (-1f64).powi(k as i32) * (a * b).signum()
                    }
                }
            };
            dirs.push(xy_direction(base + g * eps));
        }
        dirs.push(BlochVector::z_axis());
        actual.push(dirs);
    }
    MeasurementPlan::new_local(intended, actual)
}

/// Deterministic tangent direction used for azimuth reference frames and the
/// antipodal tie-break in [`project_to_cone`].
pub fn reference_tangent(center: &BlochVector) -> BlochVector {
    let pick = if center.z.abs() < 0.9 { BlochVector::z_axis() } else { BlochVector::x_axis() };
    let proj = center.scale(pick.dot(center));
    pick.sub(&proj).normalized().expect("reference axis not parallel to center")
}

/// Orthonormal tangent frame `(e1, e2)` at a unit vector.
pub fn tangent_frame(center: &BlochVector) -> (BlochVector, BlochVector) {
    let e1 = reference_tangent(center);
    let e2 = center.cross(&e1);
    (e1, e2)
}

/// Unit vector at polar angle `beta` from `center`, azimuth `phi` in the
/// [`tangent_frame`] of `center`.
pub fn direction_from_cone_angles(center: &BlochVector, beta: f64, phi: f64) -> BlochVector {
    let (e1, e2) = tangent_frame(center);
    let radial = center.scale(beta.cos());
    let tangent = e1.scale(phi.cos()).add(&e2.scale(phi.sin())).scale(beta.sin());
    radial.add(&tangent)
}

/// Inverse of [`direction_from_cone_angles`]: `(beta, phi)` for a unit
/// direction near `center`. `phi` is zero when the deviation is degenerate.
pub fn cone_angles_for_direction(center: &BlochVector, dir: &BlochVector) -> (f64, f64) {
    let beta = center.angle_to(dir);
    let (e1, e2) = tangent_frame(center);
    let (a, b) = (dir.dot(&e1), dir.dot(&e2));
    if a.abs() < 1e-15 && b.abs() < 1e-15 {
        (beta, 0.0)
    } else {
        (beta, b.atan2(a))
    }
}

/// Nearest unit vector to `v` within angle `eps` of the unit vector `center`.
///
/// Antipodal `v` is mapped onto the cone boundary along the deterministic
/// [`reference_tangent`] direction.
pub fn project_to_cone(
    v: &BlochVector,
    center: &BlochVector,
    eps: f64,
) -> Result<BlochVector, PlanError> {
    let unit = v.normalized().ok_or(PlanError::ZeroVector)?;
    let angle = center.angle_to(&unit);
    if angle <= eps {
        return Ok(unit);
    }
    let tangent_part = unit.sub(&center.scale(unit.dot(center)));
    let tangent = match tangent_part.normalized() {
        Some(t) => t,
        None => reference_tangent(center), // antipodal tie-break
    };
    Ok(center.scale(eps.cos()).add(&tangent.scale(eps.sin())))
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEG: f64 = std::f64::consts::PI / 180.0;

    fn s_hat() -> BlochVector {
        let r = 1.0 / 3f64.sqrt();
        BlochVector::new(r, r, r)
    }

    #[test]
    fn standard_plan_fixtures() {
        let plan = standard_pauli_plan(1);
        assert_eq!(plan.n_settings(0), 3);
        assert!(plan.intended_direction(0, 0).sub(&BlochVector::x_axis()).norm() < 1e-15);
        assert!(plan.intended_direction(0, 1).sub(&BlochVector::y_axis()).norm() < 1e-15);
        assert!(plan.intended_direction(0, 2).sub(&BlochVector::z_axis()).norm() < 1e-15);
        assert_eq!(plan.max_angular_deviation(), 0.0);

        let plan2 = standard_pauli_plan(2);
        assert_eq!(plan2.n_parties(), 2);
        assert_eq!(plan2.intended_directions()[0], plan2.intended_directions()[1]);
    }

    #[test]
    fn max_deviation_detects_flip() {
        let intended = vec![pauli_triad()];
        let mut actual = vec![pauli_triad()];
        actual[0][2] = BlochVector::new(0.0, 0.0, -1.0);
        let plan = MeasurementPlan::new_local(intended, actual).unwrap();
        assert!((plan.max_angular_deviation() - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn open_triad_geometry() {
        let eps = 2.0 * DEG;
        let triad = tomography_open_triad(eps);
        let axes = pauli_triad();
        for (n, m) in triad.iter().zip(axes.iter()) {
            assert!(n.is_unit(1e-15));
            assert!((n.angle_to(m) - eps).abs() < 1e-12);
        }
        // components match the closed form
        assert!((triad[0].x - eps.cos()).abs() < 1e-15);
        assert!((triad[0].y + eps.sin() / 2f64.sqrt()).abs() < 1e-15);
    }

    // The diagonal s is an eigenvector of the induced linear map with
    // eigenvalue cos eps - sqrt(2) sin eps.
    #[test]
    fn open_triad_diagonal_eigenvector() {
        let eps = 2.0 * DEG;
        let triad = tomography_open_triad(eps);
        let s = s_hat();
        let mapped = BlochVector::new(triad[0].dot(&s), triad[1].dot(&s), triad[2].dot(&s));
        let lambda = eps.cos() - 2f64.sqrt() * eps.sin();
        assert!(mapped.sub(&s.scale(lambda)).norm() < 1e-14);
    }

    #[test]
    fn closed_triad_geometry() {
        let eps = 2.0 * DEG;
        let triad = witness_closed_triad(eps);
        for (n, m) in triad.iter().zip(pauli_triad().iter()) {
            assert!(n.is_unit(1e-15));
            assert!((n.angle_to(m) - eps).abs() < 1e-12);
        }
        assert!((triad[0].y - eps.sin() / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn families_meet_their_budget() {
        for deg in [0.0, 1.0, 2.0, 5.0, 10.0] {
            let eps = deg * DEG;
            let open = tomography_open_triad(eps);
            let plan =
                MeasurementPlan::new_local(vec![pauli_triad()], vec![open.to_vec()]).unwrap();
            assert!((plan.max_angular_deviation() - eps).abs() < 1e-12);

            let closed = witness_closed_triad(eps);
            let plan =
                MeasurementPlan::new_local(vec![pauli_triad(); 2], vec![closed.to_vec(); 2])
                    .unwrap();
            assert!((plan.max_angular_deviation() - eps).abs() < 1e-12);

            for (n, parity) in [(4, GhzParity::Even), (5, GhzParity::Odd)] {
                let plan = ghz_plan(n, eps, parity).unwrap();
                assert!(
                    (plan.max_angular_deviation() - eps).abs() < 1e-12,
                    "ghz n={n} eps={deg}deg"
                );
            }
        }
    }

    #[test]
    fn ghz_plan_fixtures() {
        let plan = ghz_plan(4, 0.0, GhzParity::Even).unwrap();
        for party in 0..4 {
            for k in 0..5 {
                let tuple = vec![k; 4];
                let actual = plan.actual_direction(party, &tuple).unwrap();
                assert!(actual.sub(plan.intended_direction(party, k)).norm() < 1e-15);
            }
        }

        // n=4, k=1, j=1: in-plane angle pi/4 - eps
        let eps = 5.0 * DEG;
        let plan = ghz_plan(4, eps, GhzParity::Even).unwrap();
        let d = plan.actual_direction(0, &[0; 4]).unwrap();
        let angle = d.y.atan2(d.x);
        assert!((angle - (std::f64::consts::FRAC_PI_4 - eps)).abs() < 1e-12);
        // z setting untouched
        let z = plan.actual_direction(0, &[4; 4]).unwrap();
        assert!(z.sub(&BlochVector::z_axis()).norm() < 1e-15);

        assert!(ghz_plan(2, eps, GhzParity::Even).is_err());
        assert!(ghz_plan(4, eps, GhzParity::Odd).is_err());
        assert!(ghz_plan(5, eps, GhzParity::Even).is_err());
    }

    #[test]
    fn odd_ghz_middle_setting_unperturbed() {
        // k = n_plus makes the sign factor vanish
        let n = 5;
        let eps = 3.0 * DEG;
        let plan = ghz_plan(n, eps, GhzParity::Odd).unwrap();
        let k = (n + 1) / 2 - 1; // 0-based index of setting n_plus
        for party in 0..n {
            let d = plan.actual_direction(party, &vec![k; n]).unwrap();
            assert!(d.sub(plan.intended_direction(party, k)).norm() < 1e-12);
        }
    }

    #[test]
    fn cone_projection_cases() {
        let center = BlochVector::z_axis();
        let eps = std::f64::consts::FRAC_PI_4;

        let inside = BlochVector::new(0.1, 0.0, 2.0);
        let p = project_to_cone(&inside, &center, eps).unwrap();
        assert!(p.sub(&inside.normalized().unwrap()).norm() < 1e-12);

        let ortho = BlochVector::x_axis();
        let p = project_to_cone(&ortho, &center, eps).unwrap();
        assert!((p.angle_to(&center) - eps).abs() < 1e-12);
        assert!((p.angle_to(&ortho) - eps).abs() < 1e-12);

        let anti = center.scale(-1.0);
        let p = project_to_cone(&anti, &center, eps).unwrap();
        assert!((p.angle_to(&center) - eps).abs() < 1e-12);
        // idempotent
        let pp = project_to_cone(&p, &center, eps).unwrap();
        assert!(pp.sub(&p).norm() < 1e-12);

        assert!(project_to_cone(&BlochVector::zero(), &center, eps).is_err());
    }

    #[test]
    fn cone_angle_round_trip() {
        let mut rng = crate::rng::CounterRng::new(9);
        for _ in 0..200 {
            let center = BlochVector::from(rng.unit_vector());
            let beta = rng.uniform_in(1e-6, std::f64::consts::PI - 1e-6);
            let phi = rng.uniform_in(-std::f64::consts::PI, std::f64::consts::PI);
            let dir = direction_from_cone_angles(&center, beta, phi);
            assert!(dir.is_unit(1e-12));
            let (b2, p2) = cone_angles_for_direction(&center, &dir);
            assert!((b2 - beta).abs() < 1e-9);
            let dphi = (p2 - phi).rem_euclid(std::f64::consts::TAU);
            assert!(dphi < 1e-9 || (std::f64::consts::TAU - dphi) < 1e-9);
        }
    }

    #[test]
    fn correlated_lift_preserves_directions() {
        let eps = 2.0 * DEG;
        let plan = MeasurementPlan::new_local(
            vec![pauli_triad(); 2],
            vec![tomography_open_triad(eps).to_vec(); 2],
        )
        .unwrap();
        let lifted = plan.to_correlated().unwrap();
        assert_eq!(lifted.mode(), PlanMode::Correlated);
        assert!((lifted.max_angular_deviation() - eps).abs() < 1e-12);
        for tuple in plan.joint_settings() {
            for party in 0..2 {
                let a = plan.actual_direction(party, &tuple).unwrap();
                let b = lifted.actual_direction(party, &tuple).unwrap();
                assert!(a.sub(&b).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let plan = MeasurementPlan::new_local(
            vec![pauli_triad(); 2],
            vec![tomography_open_triad(0.03).to_vec(); 2],
        )
        .unwrap();
        let json = plan.to_json();
        assert_eq!(json["mode"], "local");
        assert_eq!(json["n_parties"], 2);
        let back = MeasurementPlan::from_json(&json).unwrap();
        assert_eq!(plan, back);

        let corr = plan.to_correlated().unwrap();
        let back = MeasurementPlan::from_json(&corr.to_json()).unwrap();
        assert_eq!(corr, back);
    }

    #[test]
    fn rejects_non_unit_directions() {
        let bad = vec![vec![BlochVector::new(0.5, 0.0, 0.0)]];
        assert!(MeasurementPlan::ideal(bad).is_err());
    }

    #[test]
    fn budget_bounds() {
        assert!(MisalignmentBudget::new(-0.1).is_err());
        assert!(MisalignmentBudget::new(4.0).is_err());
        let b = MisalignmentBudget::from_degrees(2.0).unwrap();
        assert!((b.degrees() - 2.0).abs() < 1e-12);
    }
}

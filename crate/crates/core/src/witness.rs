//! Entanglement witnesses and their misalignment-deformed versions.
//!
//! A witness is stored together with the measurement decomposition it is
//! evaluated from: a real identity coefficient, correlation terms
//! `coeff * (x)_j (m_k_j . sigma)`, and products of single-qubit outcome
//! projectors. Deforming a witness under a plan substitutes the plan's
//! actual directions into that decomposition — two witnesses with the same
//! observable but different decompositions deform differently, which is why
//! the decomposition is data, not something re-derived.

use crate::misalignment::{ghz_intended_settings, pauli_triad, MeasurementPlan, PlanError};
use crate::quantum::{
    direction_observable, kron_list, outcome_projector, pauli, CMatrix, CVector, DensityMatrix,
    PureState, QuantumError,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DECOMPOSITION_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum WitnessError {
    #[error("witness needs at least {min} parties, got {got}")]
    TooFewParties { min: usize, got: usize },
    #[error("no closed-form correction for n = {0}; use the optimizer")]
    NoClosedForm(usize),
    #[error("n = {n} does not match parity {parity}")]
    ParityMismatch { n: usize, parity: &'static str },
    #[error("decomposition does not reassemble the observable (deviation {0:.3e})")]
    DecompositionMismatch(f64),
    #[error("plan does not match the witness decomposition: {0}")]
    PlanMismatch(String),
    #[error("witness shift must be non-positive, got {0}")]
    InvalidShift(f64),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

/// Correlation term: `coeff * tensor_j (direction(settings[j]) . sigma)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessTerm {
    pub coeff: f64,
    /// Per-party intended setting index.
    pub settings: Vec<usize>,
}

/// Projector product term:
/// `coeff * tensor_j (1 + signs[j] * direction(setting) . sigma) / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectorTerm {
    pub coeff: f64,
    /// Setting index shared by all parties (one physical measurement).
    pub setting: usize,
    pub signs: Vec<i8>,
}

/// Hermitian witness observable with its local-measurement decomposition.
#[derive(Debug, Clone)]
pub struct WitnessSpec {
    n_parties: usize,
    observable: CMatrix,
    identity_coeff: f64,
    terms: Vec<WitnessTerm>,
    projector_terms: Vec<ProjectorTerm>,
    /// Intended measurement directions per party, indexed by the terms.
    settings: Vec<Vec<crate::quantum::BlochVector>>,
}

impl WitnessSpec {
    /// Builds a spec and verifies that the decomposition reassembles the
    /// observable at zero misalignment.
    pub fn new(
        n_parties: usize,
        observable: CMatrix,
        identity_coeff: f64,
        terms: Vec<WitnessTerm>,
        projector_terms: Vec<ProjectorTerm>,
        settings: Vec<Vec<crate::quantum::BlochVector>>,
    ) -> Result<Self, WitnessError> {
        let spec = Self { n_parties, observable, identity_coeff, terms, projector_terms, settings };
        let ideal = MeasurementPlan::ideal(spec.settings.clone())?;
        let rebuilt = spec.effective_observable(&ideal)?;
        let dev = (&rebuilt - &spec.observable).map(|z| z.norm()).max();
        if dev > DECOMPOSITION_TOL {
            return Err(WitnessError::DecompositionMismatch(dev));
        }
        Ok(spec)
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    pub fn dim(&self) -> usize {
        1 << self.n_parties
    }

    pub fn observable(&self) -> &CMatrix {
        &self.observable
    }

    pub fn identity_coeff(&self) -> f64 {
        self.identity_coeff
    }

    pub fn terms(&self) -> &[WitnessTerm] {
        &self.terms
    }

    pub fn projector_terms(&self) -> &[ProjectorTerm] {
        &self.projector_terms
    }

    pub fn settings(&self) -> &[Vec<crate::quantum::BlochVector>] {
        &self.settings
    }

    /// The ideal plan measuring this witness's decomposition settings.
    pub fn ideal_plan(&self) -> MeasurementPlan {
        MeasurementPlan::ideal(self.settings.clone()).expect("witness settings are unit norm")
    }

    fn check_plan(&self, plan: &MeasurementPlan) -> Result<(), WitnessError> {
        if plan.n_parties() != self.n_parties {
            return Err(WitnessError::PlanMismatch(format!(
                "plan has {} parties, witness {}",
                plan.n_parties(),
                self.n_parties
            )));
        }
        for party in 0..self.n_parties {
            if plan.n_settings(party) != self.settings[party].len() {
                return Err(WitnessError::PlanMismatch(format!(
                    "party {party}: plan has {} settings, witness {}",
                    plan.n_settings(party),
                    self.settings[party].len()
                )));
            }
            for (k, dir) in self.settings[party].iter().enumerate() {
                if plan.intended_direction(party, k).sub(dir).norm() > 1e-12 {
                    return Err(WitnessError::PlanMismatch(format!(
                        "party {party} setting {k} intended direction differs"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Per-term single-qubit factors under a plan's actual directions:
    /// `(coeff, [op_1, ..., op_n])` for every decomposition term, with the
    /// identity contribution as an explicit all-identity term.
    pub fn effective_term_factors(
        &self,
        plan: &MeasurementPlan,
    ) -> Result<Vec<(f64, Vec<CMatrix>)>, WitnessError> {
        self.check_plan(plan)?;
        let n = self.n_parties;
        let mut out = Vec::with_capacity(1 + self.terms.len() + self.projector_terms.len());
        if self.identity_coeff != 0.0 {
            out.push((self.identity_coeff, vec![pauli(0); n]));
        }
        for term in &self.terms {
            if term.settings.len() != n {
                return Err(WitnessError::PlanMismatch("term arity mismatch".into()));
            }
            let ops = (0..n)
                .map(|party| {
                    plan.actual_direction(party, &term.settings)
                        .map(|d| direction_observable(&d))
                })
                .collect::<Result<Vec<_>, _>>()?;
            out.push((term.coeff, ops));
        }
        for term in &self.projector_terms {
            if term.signs.len() != n {
                return Err(WitnessError::PlanMismatch("projector arity mismatch".into()));
            }
            let tuple = vec![term.setting; n];
            let ops = (0..n)
                .map(|party| {
                    plan.actual_direction(party, &tuple)
                        .map(|d| outcome_projector(&d, term.signs[party] as f64))
                })
                .collect::<Result<Vec<_>, _>>()?;
            out.push((term.coeff, ops));
        }
        Ok(out)
    }

    /// Effective observable with the plan's actual directions substituted
    /// into the decomposition. Reduces to the stored observable when the
    /// plan has no misalignment.
    pub fn effective_observable(&self, plan: &MeasurementPlan) -> Result<CMatrix, WitnessError> {
        let dim = self.dim();
        let mut acc = CMatrix::zeros(dim, dim);
        for (coeff, ops) in self.effective_term_factors(plan)? {
            acc += kron_list(&ops).scale(coeff);
        }
        Ok(acc)
    }

    /// `tr(W rho)` for the undeformed witness.
    pub fn expectation(&self, rho: &DensityMatrix) -> f64 {
        rho.expectation(&self.observable)
    }

    /// JSON layout: `{n, identity_coeff, terms, projector_terms, settings}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n_parties,
            "identity_coeff": self.identity_coeff,
            "terms": self.terms,
            "projector_terms": self.projector_terms,
            "settings": self.settings,
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, WitnessError> {
        #[derive(Deserialize)]
        struct Raw {
            n: usize,
            identity_coeff: f64,
            terms: Vec<WitnessTerm>,
            projector_terms: Vec<ProjectorTerm>,
            settings: Vec<Vec<crate::quantum::BlochVector>>,
        }
        let raw: Raw = serde_json::from_value(value.clone())
            .map_err(|e| WitnessError::PlanMismatch(e.to_string()))?;
        let spec = Self {
            n_parties: raw.n,
            observable: CMatrix::zeros(1 << raw.n, 1 << raw.n),
            identity_coeff: raw.identity_coeff,
            terms: raw.terms,
            projector_terms: raw.projector_terms,
            settings: raw.settings,
        };
        // rebuild the observable from the decomposition
        let ideal = MeasurementPlan::ideal(spec.settings.clone())?;
        let observable = spec.effective_observable(&ideal)?;
        Ok(Self { observable, ..spec })
    }
}

/// `(1/sqrt(2)) (|0..0> + |1..1>)`.
pub fn ghz_state(n: usize) -> PureState {
    let dim = 1usize << n;
    let mut amps = CVector::zeros(dim);
    let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    amps[0] = r;
    amps[dim - 1] = r;
    PureState::new(amps).expect("ghz amplitudes normalized")
}

/// `(1/sqrt(2)) (|01> - |10>)`.
pub fn singlet_state() -> PureState {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    PureState::new(CVector::from_vec(vec![
        Complex64::new(0.0, 0.0),
        Complex64::new(r, 0.0),
        Complex64::new(-r, 0.0),
        Complex64::new(0.0, 0.0),
    ]))
    .expect("singlet amplitudes normalized")
}

/// Two-qubit witness `1/2 - |singlet><singlet|`, measured as
/// `1/4 + (1/4) sum_k sigma_k x sigma_k` in the Pauli triad.
pub fn singlet_witness() -> WitnessSpec {
    let proj = singlet_state().to_density();
    let id4 = kron_list(&[pauli(0), pauli(0)]);
    let observable = id4.scale(0.5) - proj.matrix();
    let terms = (0..3).map(|k| WitnessTerm { coeff: 0.25, settings: vec![k, k] }).collect();
    WitnessSpec::new(2, observable, 0.25, terms, vec![], vec![pauli_triad(); 2])
        .expect("singlet decomposition is exact")
}

/// n-party witness `1/2 - |GHZ><GHZ|` with the economical decomposition:
/// z-projector products plus `n` shared XY settings at angles `k pi / n`.
pub fn ghz_witness(n: usize) -> Result<WitnessSpec, WitnessError> {
    if n < 3 {
        return Err(WitnessError::TooFewParties { min: 3, got: n });
    }
    let dim = 1usize << n;
    let proj = ghz_state(n).to_density();
    let observable = CMatrix::identity(dim, dim).scale(0.5) - proj.matrix();

    let mut terms = Vec::with_capacity(n);
    for k in 1..=n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        terms.push(WitnessTerm { coeff: -sign / (2.0 * n as f64), settings: vec![k - 1; n] });
    }
    let projector_terms = vec![
        ProjectorTerm { coeff: -0.5, setting: n, signs: vec![1; n] },
        ProjectorTerm { coeff: -0.5, setting: n, signs: vec![-1; n] },
    ];
    let settings = vec![ghz_intended_settings(n); n];
    WitnessSpec::new(n, observable, 0.5, terms, projector_terms, settings)
}

/// Correction factor for the singlet witness under the closed-triad
/// deviation: `(cos 2e - 2 sqrt(2) sin 2e - 1) / 8`.
pub fn singlet_correction_closed_form(eps: f64) -> f64 {
    ((2.0 * eps).cos() - 2.0 * 2f64.sqrt() * (2.0 * eps).sin() - 1.0) / 8.0
}

/// Closed-form GHZ correction factor: `-sin(n e)/4` for even n >= 4 and the
/// longer odd-n expression for odd n >= 5. n = 3 has no closed form.
pub fn ghz_correction_closed_form(n: usize, eps: f64) -> Result<f64, WitnessError> {
    if n < 3 {
        return Err(WitnessError::TooFewParties { min: 3, got: n });
    }
    if n == 3 {
        return Err(WitnessError::NoClosedForm(3));
    }
    let nf = n as f64;
    if n % 2 == 0 {
        Ok(-0.25 * (nf * eps).sin())
    } else {
        let tan_half = (std::f64::consts::PI / (2.0 * nf)).tan();
        Ok((nf - 2.0 - (nf - 1.0) * eps.cos() + (nf * eps).cos() - (nf * eps).sin() / tan_half)
            / (4.0 * nf))
    }
}

/// Shifted witness `W' = W - w 1` compensating a non-positive correction
/// factor `w`.
pub fn shift_witness(spec: &WitnessSpec, w: f64) -> Result<WitnessSpec, WitnessError> {
    if w > 0.0 {
        return Err(WitnessError::InvalidShift(w));
    }
    let dim = spec.dim();
    let observable = &spec.observable - CMatrix::identity(dim, dim).scale(w);
    Ok(WitnessSpec {
        n_parties: spec.n_parties,
        observable,
        identity_coeff: spec.identity_coeff - w,
        terms: spec.terms.clone(),
        projector_terms: spec.projector_terms.clone(),
        settings: spec.settings.clone(),
    })
}

/// `(1/sqrt(2)) (|0..0> + e^{i phase} |1..1>)` on `k` qubits.
fn phased_ghz(k: usize, phase: f64) -> PureState {
    let dim = 1usize << k;
    let mut amps = CVector::zeros(dim);
    amps[0] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    amps[dim - 1] = Complex64::from_polar(std::f64::consts::FRAC_1_SQRT_2, phase);
    PureState::new(amps).expect("normalized")
}

/// Biseparable state achieving the GHZ closed-form corrections: the halved
/// phased-GHZ product for even n, the `(n-1)/2 : (n+1)/2` split for odd n.
pub fn biseparable_fixture(
    n: usize,
    parity: crate::misalignment::GhzParity,
) -> Result<PureState, WitnessError> {
    use crate::misalignment::GhzParity;
    match parity {
        GhzParity::Even => {
            if n < 4 || n % 2 != 0 {
                return Err(WitnessError::ParityMismatch { n, parity: "even" });
            }
            let half = n / 2;
            let a = phased_ghz(half, std::f64::consts::FRAC_PI_4);
            let b = phased_ghz(half, -std::f64::consts::FRAC_PI_4);
            Ok(a.tensor(&b))
        }
        GhzParity::Odd => {
            if n < 5 || n % 2 == 0 {
                return Err(WitnessError::ParityMismatch { n, parity: "odd" });
            }
            let n_minus = (n - 1) / 2;
            let n_plus = (n + 1) / 2;
            let nu = if n_minus % 2 == 0 { 1.0 } else { -1.0 };
            let phi = nu * (3.0 * n as f64 + nu) * std::f64::consts::PI / (4.0 * n as f64);
            let a = phased_ghz(n_minus, -phi);
            let b = phased_ghz(n_plus, phi);
            Ok(a.tensor(&b))
        }
    }
}

/// The separable two-qubit state that pushes the deformed singlet witness to
/// its closed-form minimum.
pub fn singlet_fixture_state() -> PureState {
    let chi = (1.0 / 3f64.sqrt()).acos() / 2.0;
    let (c, s) = (chi.cos(), chi.sin());
    let f1 = PureState::new(CVector::from_vec(vec![
        Complex64::new(c, 0.0),
        Complex64::from_polar(s, std::f64::consts::FRAC_PI_4),
    ]))
    .expect("normalized");
    let f2 = PureState::new(CVector::from_vec(vec![
        Complex64::new(s, 0.0),
        Complex64::from_polar(c, -3.0 * std::f64::consts::FRAC_PI_4),
    ]))
    .expect("normalized");
    f1.tensor(&f2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::misalignment::{ghz_plan, witness_closed_triad, GhzParity, MeasurementPlan};
    use crate::quantum::trace_product_re;
    use crate::rng::CounterRng;

    const DEG: f64 = std::f64::consts::PI / 180.0;

    #[test]
    fn singlet_witness_fixtures() {
        let w = singlet_witness();
        // both forms agree (checked in the constructor at 1e-10; tighten here)
        let rebuilt = w.effective_observable(&w.ideal_plan()).unwrap();
        let dev = (&rebuilt - w.observable()).map(|z| z.norm()).max();
        assert!(dev < 1e-12);

        assert!((w.expectation(&singlet_state().to_density()) + 0.5).abs() < 1e-12);
        // tr(W) = 1, so the maximally mixed state scores 1/4 (separable, >= 0)
        assert!((w.expectation(&DensityMatrix::maximally_mixed(2)) - 0.25).abs() < 1e-12);
        let zz = PureState::basis_state(2, 0).to_density();
        assert!((w.expectation(&zz) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ghz_witness_fixtures() {
        let w = ghz_witness(4).unwrap();
        assert!((w.expectation(&ghz_state(4).to_density()) + 0.5).abs() < 1e-12);
        let zeros = PureState::basis_state(4, 0).to_density();
        assert!(w.expectation(&zeros).abs() < 1e-12);
        assert!(ghz_witness(2).is_err());
    }

    #[test]
    fn ghz_decomposition_matches_on_random_states() {
        let w = ghz_witness(4).unwrap();
        let dec = w.effective_observable(&w.ideal_plan()).unwrap();
        let mut rng = CounterRng::new(17);
        for _ in 0..100 {
            let psi = PureState::new(CVector::from_vec(rng.haar_amplitudes(16))).unwrap();
            let rho = psi.to_density();
            let via_obs = w.expectation(&rho);
            let via_dec = trace_product_re(rho.matrix(), &dec);
            assert!((via_obs - via_dec).abs() < 1e-10);
        }
    }

    #[test]
    fn ghz_decomposition_identity_up_to_eight() {
        for n in 3..=8 {
            let w = ghz_witness(n).unwrap();
            let rebuilt = w.effective_observable(&w.ideal_plan()).unwrap();
            let dev = (&rebuilt - w.observable()).map(|z| z.norm()).max();
            assert!(dev < 1e-9, "n={n}: deviation {dev:.3e}");
        }
    }

    #[test]
    fn singlet_closed_form_matches_direct_expectation() {
        let w = singlet_witness();
        let psi = singlet_fixture_state().to_density();
        for deg in 0..=10 {
            let eps = deg as f64 * DEG;
            let plan = MeasurementPlan::new_local(
                vec![pauli_triad(); 2],
                vec![witness_closed_triad(eps).to_vec(); 2],
            )
            .unwrap();
            let eff = w.effective_observable(&plan).unwrap();
            let direct = trace_product_re(psi.matrix(), &eff);
            let closed = singlet_correction_closed_form(eps);
            assert!(
                (direct - closed).abs() < 1e-12,
                "eps={deg}deg: direct {direct:.15} vs closed {closed:.15}"
            );
        }
        assert!(singlet_correction_closed_form(0.0).abs() < 1e-15);
        assert!(singlet_correction_closed_form(2.0 * DEG) < 0.0);
    }

    #[test]
    fn ghz_closed_form_matches_direct_expectation() {
        for (n, parity) in [(4, GhzParity::Even), (6, GhzParity::Even), (5, GhzParity::Odd)] {
            let w = ghz_witness(n).unwrap();
            let psi = biseparable_fixture(n, parity).unwrap().to_density();
            for deg in 0..=10 {
                let eps = deg as f64 * DEG;
                let plan = ghz_plan(n, eps, parity).unwrap();
                let eff = w.effective_observable(&plan).unwrap();
                let direct = trace_product_re(psi.matrix(), &eff);
                let closed = ghz_correction_closed_form(n, eps).unwrap();
                assert!(
                    (direct - closed).abs() < 1e-10,
                    "n={n} eps={deg}deg: direct {direct:.15} vs closed {closed:.15}"
                );
            }
        }
        assert!(matches!(ghz_correction_closed_form(3, 0.1), Err(WitnessError::NoClosedForm(3))));
        assert!(ghz_correction_closed_form(2, 0.1).is_err());
        // -sin(pi/2)/4 = -0.25 at n=4, eps=pi/8
        let v = ghz_correction_closed_form(4, std::f64::consts::PI / 8.0).unwrap();
        assert!((v + 0.25).abs() < 1e-15);
        // odd n=5 vanishes at eps=0
        assert!(ghz_correction_closed_form(5, 0.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn shift_restores_nonnegativity() {
        let eps = 2.0 * DEG;
        let w = singlet_witness();
        let corr = singlet_correction_closed_form(eps);
        let shifted = shift_witness(&w, corr).unwrap();
        let plan = MeasurementPlan::new_local(
            vec![pauli_triad(); 2],
            vec![witness_closed_triad(eps).to_vec(); 2],
        )
        .unwrap();
        let eff = shifted.effective_observable(&plan).unwrap();
        let psi = singlet_fixture_state().to_density();
        let v = trace_product_re(psi.matrix(), &eff);
        assert!(v >= -1e-12, "shifted expectation {v:.3e}");

        // linearity: tr(W' mixed) = tr(W mixed) - w
        let mixed = DensityMatrix::maximally_mixed(2);
        let before = w.expectation(&mixed);
        let after = shifted.expectation(&mixed);
        assert!((after - (before - corr)).abs() < 1e-12);

        // unchanged at w = 0
        let same = shift_witness(&w, 0.0).unwrap();
        assert!((same.identity_coeff() - w.identity_coeff()).abs() < 1e-15);
        assert!(shift_witness(&w, 0.1).is_err());
    }

    #[test]
    fn biseparable_fixture_structure() {
        // n=4 amplitudes: 1/2 over |0000>, |0011> (phase -pi/4), |1100>
        // (phase pi/4), |1111>
        let psi = biseparable_fixture(4, GhzParity::Even).unwrap();
        let a = psi.amplitudes();
        assert!((a[0].re - 0.5).abs() < 1e-12 && a[0].im.abs() < 1e-12);
        assert!((a[3] - Complex64::from_polar(0.5, -std::f64::consts::FRAC_PI_4)).norm() < 1e-12);
        assert!((a[12] - Complex64::from_polar(0.5, std::f64::consts::FRAC_PI_4)).norm() < 1e-12);
        assert!((a[15].re - 0.5).abs() < 1e-12);
        for i in 0..16 {
            if ![0, 3, 12, 15].contains(&i) {
                assert!(a[i].norm() < 1e-15);
            }
        }

        // product across the stated cut: reduced state on the first half is pure
        let rho = psi.to_density();
        let first_half = rho.partial_trace(&[0, 1]).unwrap();
        assert!((first_half.purity() - 1.0).abs() < 1e-12);

        // overlap with GHZ checked against the direct inner product
        let g = ghz_state(4);
        let ov = g.overlap(&psi).norm();
        let direct = (g.amplitudes()[0].conj() * a[0]) + (g.amplitudes()[15].conj() * a[15]);
        assert!((ov - direct.norm()).abs() < 1e-12);

        assert!(biseparable_fixture(5, GhzParity::Even).is_err());
        assert!(biseparable_fixture(4, GhzParity::Odd).is_err());
    }

    // At zero misalignment a witness stays non-negative on its separable set.
    #[test]
    fn witness_property_random_sampling() {
        let mut rng = CounterRng::new(71);
        let w = singlet_witness();
        for _ in 0..1000 {
            let a = PureState::new(CVector::from_vec(rng.haar_amplitudes(2))).unwrap();
            let b = PureState::new(CVector::from_vec(rng.haar_amplitudes(2))).unwrap();
            let v = w.expectation(&a.tensor(&b).to_density());
            assert!(v >= -1e-10, "singlet witness negative on product state: {v:.3e}");
        }

        let g = ghz_witness(3).unwrap();
        for _ in 0..1000 {
            // random bipartition of 3 parties: singleton party p on one side
            let p = (rng.next_u64() % 3) as usize;
            let single = PureState::new(CVector::from_vec(rng.haar_amplitudes(2))).unwrap();
            let pair = PureState::new(CVector::from_vec(rng.haar_amplitudes(4))).unwrap();
            let state = match p {
                0 => single.tensor(&pair),
                2 => pair.tensor(&single),
                _ => {
                    // middle party: interleave amplitudes directly
                    let mut amps = CVector::zeros(8);
                    for i in 0..2 {
                        for j in 0..2 {
                            for k in 0..2 {
                                amps[(i << 2) | (j << 1) | k] =
                                    pair.amplitudes()[(i << 1) | k] * single.amplitudes()[j];
                            }
                        }
                    }
                    PureState::new(amps).unwrap()
                }
            };
            let v = g.expectation(&state.to_density());
            assert!(v >= -1e-10, "GHZ witness negative on biseparable state: {v:.3e}");
        }
    }

    #[test]
    fn witness_json_round_trip() {
        let w = ghz_witness(4).unwrap();
        let json = w.to_json();
        let back = WitnessSpec::from_json(&json).unwrap();
        assert_eq!(back.n_parties(), 4);
        let dev = (back.observable() - w.observable()).map(|z| z.norm()).max();
        assert!(dev < 1e-10);
        assert_eq!(back.terms(), w.terms());
    }

    // The fixture's marginals sit on the +/- diagonal, matching the closed
    // triad deviation geometry.
    #[test]
    fn fixture_marginals_point_along_diagonal() {
        let rho = singlet_fixture_state().to_density();
        let m1 = crate::quantum::bloch_from_state(&rho.partial_trace(&[0]).unwrap()).unwrap();
        let m2 = crate::quantum::bloch_from_state(&rho.partial_trace(&[1]).unwrap()).unwrap();
        let s = crate::quantum::BlochVector::new(1.0, 1.0, 1.0).normalized().unwrap();
        assert!(m1.sub(&s).norm() < 1e-12);
        assert!(m2.add(&s).norm() < 1e-12);
    }
}

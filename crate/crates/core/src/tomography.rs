//! Born-rule statistics and state reconstruction under misaligned frames.
//!
//! Statistics are generated from the *actual* measurement directions of a
//! plan; reconstruction only ever sees the *intended* ones. Two
//! reconstruction routes are provided: linear inversion of the Pauli
//! correlators, and an iterative maximum-likelihood solver whose fixed point
//! `rho = N[R rho R]` characterizes the constrained likelihood maximum. The
//! statistics are treated as exact (negligible statistical error), so
//! per-setting weights equal the outcome probabilities themselves.

use crate::misalignment::{MeasurementPlan, PlanError};
use crate::quantum::{
    hermitian_eigen, kron_list, outcome_projector, pauli, trace_distance, trace_product_re,
    CMatrix, DensityMatrix, QuantumError,
};
use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Observed weights below this threshold are dropped from the likelihood and
/// the R operator (0 log 0 = 0).
pub const ZERO_PROB_GUARD: f64 = 1e-14;

/// Eigenvalues below this mark a linear-inversion result as unphysical.
pub const PHYSICALITY_TOL: f64 = -1e-10;

#[derive(Debug, Error)]
pub enum TomographyError {
    #[error("state has {state} qubits but plan has {plan} parties")]
    DimensionMismatch { state: usize, plan: usize },
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("intended plan is not tomographically complete: {0}")]
    NotTomographicallyComplete(String),
    #[error("linear inversion produced an unphysical matrix (min eigenvalue {min_eigenvalue:.3e})")]
    UnphysicalReconstruction { min_eigenvalue: f64 },
    #[error("statistics shape does not match the plan")]
    ShapeMismatch,
    #[error("target state is not pure (purity {0})")]
    TargetNotPure(f64),
}

/// Conditional outcome probabilities `P(a_1..a_n | k_1..k_n)`.
///
/// Joint settings are linearized with party 0 most significant; outcome
/// index bit `n-1-j` holds party j's outcome, bit value 0 meaning `+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeStatistics {
    n_parties: usize,
    settings_per_party: Vec<usize>,
    probs: Vec<Vec<f64>>,
}

impl OutcomeStatistics {
    pub fn new(
        n_parties: usize,
        settings_per_party: Vec<usize>,
        probs: Vec<Vec<f64>>,
    ) -> Result<Self, TomographyError> {
        let joint: usize = settings_per_party.iter().product();
        let outcomes = 1usize << n_parties;
        if settings_per_party.len() != n_parties || probs.len() != joint {
            return Err(TomographyError::ShapeMismatch);
        }
        for dist in &probs {
            if dist.len() != outcomes {
                return Err(TomographyError::ShapeMismatch);
            }
            let sum: f64 = dist.iter().sum();
            if (sum - 1.0).abs() > 1e-12 || dist.iter().any(|&p| !(-1e-12..=1.0 + 1e-12).contains(&p))
            {
                return Err(TomographyError::ShapeMismatch);
            }
        }
        Ok(Self { n_parties, settings_per_party, probs })
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    pub fn settings_per_party(&self) -> &[usize] {
        &self.settings_per_party
    }

    pub fn n_outcomes(&self) -> usize {
        1usize << self.n_parties
    }

    fn joint_index(&self, tuple: &[usize]) -> usize {
        tuple
            .iter()
            .enumerate()
            .fold(0, |acc, (party, &k)| acc * self.settings_per_party[party] + k)
    }

    pub fn joint_settings(&self) -> Vec<Vec<usize>> {
        let mut tuples = vec![vec![]];
        for &count in &self.settings_per_party {
            let mut next = Vec::with_capacity(tuples.len() * count);
            for t in &tuples {
                for k in 0..count {
                    let mut t2 = t.clone();
                    t2.push(k);
                    next.push(t2);
                }
            }
            tuples = next;
        }
        tuples
    }

    /// Outcome sign of party `j` in outcome index `o`.
    pub fn outcome_sign(&self, o: usize, party: usize) -> f64 {
        if (o >> (self.n_parties - 1 - party)) & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn probability(&self, tuple: &[usize], outcome: usize) -> f64 {
        self.probs[self.joint_index(tuple)][outcome]
    }

    pub fn distribution(&self, tuple: &[usize]) -> &[f64] {
        &self.probs[self.joint_index(tuple)]
    }

    /// Expectation of the product of outcomes over `subset` at a joint tuple.
    pub fn correlator(&self, tuple: &[usize], subset: &[usize]) -> f64 {
        let dist = self.distribution(tuple);
        let mut acc = 0.0;
        for (o, &p) in dist.iter().enumerate() {
            let mut sign = 1.0;
            for &j in subset {
                sign *= self.outcome_sign(o, j);
            }
            acc += sign * p;
        }
        acc
    }

    /// Single-qubit correlator vector `c_k = P(+1|k) - P(-1|k)`.
    pub fn correlator_vector(&self) -> Option<Vec<f64>> {
        (self.n_parties == 1)
            .then(|| (0..self.settings_per_party[0]).map(|k| self.correlator(&[k], &[0])).collect())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let entries: Vec<serde_json::Value> = self
            .joint_settings()
            .iter()
            .map(|t| {
                serde_json::json!({
                    "setting": t,
                    "probs": self.distribution(t),
                })
            })
            .collect();
        serde_json::json!({
            "n_parties": self.n_parties,
            "settings": self.settings_per_party,
            "entries": entries,
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, TomographyError> {
        #[derive(Deserialize)]
        struct Entry {
            setting: Vec<usize>,
            probs: Vec<f64>,
        }
        #[derive(Deserialize)]
        struct Raw {
            n_parties: usize,
            settings: Vec<usize>,
            entries: Vec<Entry>,
        }
        let raw: Raw = serde_json::from_value(value.clone())
            .map_err(|_| TomographyError::ShapeMismatch)?;
        let joint: usize = raw.settings.iter().product();
        let mut probs = vec![Vec::new(); joint];
        let mut stats = Self { n_parties: raw.n_parties, settings_per_party: raw.settings, probs: vec![] };
        for e in raw.entries {
            if e.setting.len() != raw.n_parties {
                return Err(TomographyError::ShapeMismatch);
            }
            let idx = stats.joint_index(&e.setting);
            if idx >= joint {
                return Err(TomographyError::ShapeMismatch);
            }
            probs[idx] = e.probs;
        }
        stats.probs = probs;
        Self::new(stats.n_parties, stats.settings_per_party, stats.probs)
    }
}

/// Born-rule outcome statistics of `tau` measured with the plan's actual
/// directions (joint-indexed in correlated mode).
pub fn simulate_statistics(
    tau: &DensityMatrix,
    plan: &MeasurementPlan,
) -> Result<OutcomeStatistics, TomographyError> {
    let n = plan.n_parties();
    if tau.n_qubits() != n {
        return Err(TomographyError::DimensionMismatch { state: tau.n_qubits(), plan: n });
    }
    let outcomes = 1usize << n;
    let mut probs = Vec::new();
    for tuple in plan.joint_settings() {
        let dirs: Vec<_> = (0..n)
            .map(|party| plan.actual_direction(party, &tuple))
            .collect::<Result<_, _>>()?;
        let mut dist = Vec::with_capacity(outcomes);
        for o in 0..outcomes {
            let projectors: Vec<CMatrix> = (0..n)
                .map(|party| {
                    let sign = if (o >> (n - 1 - party)) & 1 == 0 { 1.0 } else { -1.0 };
                    outcome_projector(&dirs[party], sign)
                })
                .collect();
            let element = kron_list(&projectors);
            dist.push(tau.expectation(&element).max(0.0));
        }
        probs.push(dist);
    }
    OutcomeStatistics::new(n, (0..n).map(|p| plan.n_settings(p)).collect(), probs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReconstructionMethod {
    LinearInversion,
    Mle,
}

/// A reconstructed state together with solver diagnostics.
#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub rho: DensityMatrix,
    pub method: ReconstructionMethod,
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
    pub linear_inversion_physical: bool,
    /// Log-likelihood after each accepted iteration, when tracking is on.
    pub likelihood_trace: Option<Vec<f64>>,
}

impl ReconstructionResult {
    /// JSON export with the state as a row-major interleaved re/im array.
    pub fn to_json(&self) -> serde_json::Value {
        let dim = self.rho.dim();
        let mut flat = Vec::with_capacity(2 * dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                let z = self.rho.matrix()[(i, j)];
                flat.push(z.re);
                flat.push(z.im);
            }
        }
        serde_json::json!({
            "dim": dim,
            "method": self.method,
            "converged": self.converged,
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "linear_inversion_physical": self.linear_inversion_physical,
            "rho_interleaved": flat,
        })
    }
}

fn intended_basis_inverses(plan: &MeasurementPlan) -> Result<Vec<Matrix3<f64>>, TomographyError> {
    let mut inverses = Vec::with_capacity(plan.n_parties());
    for party in 0..plan.n_parties() {
        if plan.n_settings(party) != 3 {
            return Err(TomographyError::NotTomographicallyComplete(format!(
                "party {party} has {} settings, need exactly 3",
                plan.n_settings(party)
            )));
        }
        let mut b = Matrix3::zeros();
        for k in 0..3 {
            let d = plan.intended_direction(party, k);
            b[(k, 0)] = d.x;
            b[(k, 1)] = d.y;
            b[(k, 2)] = d.z;
        }
        let inv = b.try_inverse().ok_or_else(|| {
            TomographyError::NotTomographicallyComplete(format!(
                "party {party} directions are coplanar"
            ))
        })?;
        inverses.push(inv);
    }
    Ok(inverses)
}

/// Pauli string `sigma_{s_1} x ... x sigma_{s_n}` for digits in 0..4.
fn pauli_string(digits: &[usize]) -> CMatrix {
    let factors: Vec<CMatrix> = digits.iter().map(|&d| pauli(d)).collect();
    kron_list(&factors)
}

/// Solves the Born-rule equations, returning the (possibly unphysical)
/// solution matrix and its smallest eigenvalue.
fn linear_inversion_matrix(
    stats: &OutcomeStatistics,
    intended_plan: &MeasurementPlan,
) -> Result<(CMatrix, f64), TomographyError> {
    let n = intended_plan.n_parties();
    if stats.n_parties() != n
        || stats.settings_per_party() != (0..n).map(|p| intended_plan.n_settings(p)).collect::<Vec<_>>()
    {
        return Err(TomographyError::ShapeMismatch);
    }
    let inverses = intended_basis_inverses(intended_plan)?;

    let dim = 1usize << n;
    let mut mat = CMatrix::zeros(dim, dim);
    // digits[j] in 0..4: 0 = identity, 1..3 = axis index + 1
    let mut digits = vec![0usize; n];
    loop {
        let subset: Vec<usize> = (0..n).filter(|&j| digits[j] > 0).collect();
        let coeff = if subset.is_empty() {
            1.0
        } else {
            // Correlator tensor over settings of the subset, any fixed
            // setting (0) elsewhere, then per-party basis inversion.
            let m = subset.len();
            let mut tensor = vec![0.0f64; 3usize.pow(m as u32)];
            let mut ks = vec![0usize; m];
            'outer: loop {
                let mut tuple = vec![0usize; n];
                for (i, &j) in subset.iter().enumerate() {
                    tuple[j] = ks[i];
                }
                let flat = ks.iter().fold(0, |acc, &k| acc * 3 + k);
                tensor[flat] = stats.correlator(&tuple, &subset);
                for i in (0..m).rev() {
                    ks[i] += 1;
                    if ks[i] < 3 {
                        continue 'outer;
                    }
                    ks[i] = 0;
                }
                break;
            }
            // contract mode i with the inverse for party subset[i]
            for (i, &j) in subset.iter().enumerate() {
                let inv = &inverses[j];
                let stride_after: usize = 3usize.pow((m - 1 - i) as u32);
                let stride_block = stride_after * 3;
                let mut out = vec![0.0f64; tensor.len()];
                for block in 0..tensor.len() / stride_block {
                    for rest in 0..stride_after {
                        let base = block * stride_block + rest;
                        for axis in 0..3 {
                            let mut acc = 0.0;
                            for k in 0..3 {
                                acc += inv[(axis, k)] * tensor[base + k * stride_after];
                            }
                            out[base + axis * stride_after] = acc;
                        }
                    }
                }
                tensor = out;
            }
            // pick the element for these axis digits
            let flat = subset
                .iter()
                .fold(0, |acc, &j| acc * 3 + (digits[j] - 1));
            tensor[flat]
        };
        if coeff.abs() > 0.0 {
            mat += pauli_string(&digits).scale(coeff);
        }

        let mut done = true;
        for j in (0..n).rev() {
            digits[j] += 1;
            if digits[j] < 4 {
                done = false;
                break;
            }
            digits[j] = 0;
        }
        if done {
            break;
        }
    }
    mat = mat.scale(1.0 / dim as f64);
    mat = (&mat + mat.adjoint()).scale(0.5);

    let (vals, _) = hermitian_eigen(&mat);
    let min_eig = vals.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((mat, min_eig))
}

/// Solves the Born-rule equations for the intended directions.
///
/// All `4^n - 1` Pauli coefficients are recovered from joint-setting
/// correlators and the per-party inverse of the intended direction matrix.
/// Fails with [`TomographyError::UnphysicalReconstruction`] when the solved
/// matrix has an eigenvalue below `-1e-10`.
pub fn linear_inversion(
    stats: &OutcomeStatistics,
    intended_plan: &MeasurementPlan,
) -> Result<ReconstructionResult, TomographyError> {
    let (mat, min_eig) = linear_inversion_matrix(stats, intended_plan)?;
    if min_eig < PHYSICALITY_TOL {
        return Err(TomographyError::UnphysicalReconstruction { min_eigenvalue: min_eig });
    }
    Ok(ReconstructionResult {
        rho: DensityMatrix::from_matrix_unchecked(mat),
        method: ReconstructionMethod::LinearInversion,
        converged: true,
        iterations: 0,
        final_residual: 0.0,
        linear_inversion_physical: true,
        likelihood_trace: None,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct MleOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub track_likelihood: bool,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 100_000, track_likelihood: false }
    }
}

struct WeightedElement {
    weight: f64,
    element: CMatrix,
}

fn mle_elements(
    stats: &OutcomeStatistics,
    intended_plan: &MeasurementPlan,
) -> Result<Vec<WeightedElement>, TomographyError> {
    let n = intended_plan.n_parties();
    let mut elements = Vec::new();
    for tuple in stats.joint_settings() {
        let dist = stats.distribution(&tuple);
        for (o, &w) in dist.iter().enumerate() {
            if w < ZERO_PROB_GUARD {
                continue;
            }
            let projectors: Vec<CMatrix> = (0..n)
                .map(|party| {
                    let sign = stats.outcome_sign(o, party);
                    outcome_projector(intended_plan.intended_direction(party, tuple[party]), sign)
                })
                .collect();
            elements.push(WeightedElement { weight: w, element: kron_list(&projectors) });
        }
    }
    Ok(elements)
}

fn log_likelihood(elements: &[WeightedElement], rho: &CMatrix) -> f64 {
    elements
        .iter()
        .map(|e| {
            let p = trace_product_re(rho, &e.element).max(1e-300);
            e.weight * p.ln()
        })
        .sum()
}

/// R operator normalized so `tr(R rho) = 1` for the probabilities of `rho`.
fn r_operator(elements: &[WeightedElement], rho: &CMatrix, total_weight: f64) -> CMatrix {
    let dim = rho.nrows();
    let mut r = CMatrix::zeros(dim, dim);
    for e in elements {
        let p = trace_product_re(rho, &e.element).max(1e-300);
        r += e.element.scale(e.weight / (p * total_weight));
    }
    r
}

fn normalize_trace(mut m: CMatrix) -> CMatrix {
    let tr: f64 = (0..m.nrows()).map(|i| m[(i, i)].re).sum();
    m = m.scale(1.0 / tr);
    (&m + m.adjoint()).scale(0.5)
}

/// Nearest PSD unit-trace matrix: hermitize, clamp negative eigenvalues,
/// renormalize.
fn project_state(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let n = m.nrows();
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let w = Complex64::new(v.max(0.0), 0.0);
        for i in 0..n {
            scaled[(i, j)] *= w;
        }
    }
    normalize_trace(&scaled * vecs.adjoint())
}

/// Iterative maximum-likelihood reconstruction using the intended POVM.
///
/// The update is the symmetric `rho <- N[R rho R]` step with a diluted
/// fallback `rho <- N[(1 + kappa R) rho (1 + kappa R)]`, halving `kappa`
/// whenever the log-likelihood would decrease, which keeps the likelihood
/// non-decreasing across accepted iterations. Iteration starts from the
/// maximally mixed state and stops when the trace-norm fixed-point residual
/// drops below `opts.tol`. Non-convergence is flagged, not an error.
pub fn mle_reconstruct(
    stats: &OutcomeStatistics,
    intended_plan: &MeasurementPlan,
    opts: &MleOptions,
) -> Result<ReconstructionResult, TomographyError> {
    mle_reconstruct_from(stats, intended_plan, opts, None)
}

/// As [`mle_reconstruct`], but starting from a caller-provided full-rank
/// state. The fixed point is unique, so this only changes the iteration
/// count, which matters when a nearby state (like the clipped linear
/// inversion) is already known.
pub fn mle_reconstruct_from(
    stats: &OutcomeStatistics,
    intended_plan: &MeasurementPlan,
    opts: &MleOptions,
    init: Option<&CMatrix>,
) -> Result<ReconstructionResult, TomographyError> {
    let n = intended_plan.n_parties();
    if stats.n_parties() != n
        || stats.settings_per_party() != (0..n).map(|p| intended_plan.n_settings(p)).collect::<Vec<_>>()
    {
        return Err(TomographyError::ShapeMismatch);
    }
    let elements = mle_elements(stats, intended_plan)?;
    let total_weight: f64 = elements.iter().map(|e| e.weight).sum();
    let dim = 1usize << n;
    let sqrt_dim = (dim as f64).sqrt();

    let mut rho = match init {
        Some(m) if m.nrows() == dim => m.clone(),
        _ => CMatrix::identity(dim, dim).scale(1.0 / dim as f64),
    };
    let mut likelihood = log_likelihood(&elements, &rho);
    let mut trace = opts.track_likelihood.then(|| vec![likelihood]);

    let mut converged = false;
    let mut final_residual = f64::INFINITY;
    let mut iterations = 0;
    let identity = CMatrix::identity(dim, dim);

    // One likelihood-monotone update: the plain symmetric step when it does
    // not decrease the likelihood, otherwise the diluted step with kappa
    // halved until it does. Also returns the plain candidate for the
    // fixed-point residual. `None` means numerically stationary.
    let monotone_step = |rho: &CMatrix, likelihood: f64| -> (CMatrix, Option<(CMatrix, f64)>) {
        let r = r_operator(&elements, rho, total_weight);
        let plain = normalize_trace(&r * rho * &r);
        let l = log_likelihood(&elements, &plain);
        if l + 1e-13 >= likelihood {
            return (plain.clone(), Some((plain, l)));
        }
        let mut kappa = 1.0;
        while kappa > 1e-10 {
            let m = &identity + r.scale(kappa);
            let cand = normalize_trace(&m * rho * m.adjoint());
            let l = log_likelihood(&elements, &cand);
            if l + 1e-13 >= likelihood {
                return (plain, Some((cand, l)));
            }
            kappa *= 0.5;
        }
        (plain, None)
    };

    let residual_of = |plain: &CMatrix, rho: &CMatrix| -> f64 {
        let diff = plain - rho;
        let fro: f64 = diff.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if fro * sqrt_dim <= 10.0 * opts.tol.max(1e-15) {
            let (vals, _) = hermitian_eigen(&diff);
            vals.iter().map(|v| v.abs()).sum::<f64>() * 0.5
        } else {
            fro // within sqrt(dim) of the trace norm; still above tolerance
        }
    };

    while iterations < opts.max_iter {
        iterations += 1;
        let (plain, stepped) = monotone_step(&rho, likelihood);
        let residual = residual_of(&plain, &rho);
        final_residual = residual;
        if residual <= opts.tol {
            converged = true;
            break;
        }
        let Some((g1, l1)) = stepped else {
            break; // stationary within likelihood precision
        };

        // Squared-extrapolation acceleration: combine two monotone steps
        // and jump along the estimated fixed-point direction, keeping the
        // plain two-step iterate whenever the jump loses likelihood.
        let (_, stepped2) = monotone_step(&g1, l1);
        let (g2, l2) = stepped2.unwrap_or((g1.clone(), l1));
        let delta1 = &g1 - &rho;
        let v = &g2 - &g1 - &delta1;
        let norm_d1: f64 = delta1.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let norm_v: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let mut accepted = (g2, l2);
        if norm_v > 1e-280 {
            let alpha = -(norm_d1 / norm_v);
            let cand = project_state(&(&rho - delta1.scale(2.0 * alpha) + v.scale(alpha * alpha)));
            let lc = log_likelihood(&elements, &cand);
            if lc >= accepted.1 {
                accepted = (cand, lc);
            }
        }
        rho = accepted.0;
        likelihood = accepted.1;
        if let Some(t) = trace.as_mut() {
            t.push(likelihood);
        }
    }

    Ok(ReconstructionResult {
        rho: DensityMatrix::from_matrix_unchecked(rho),
        method: ReconstructionMethod::Mle,
        converged,
        iterations,
        final_residual,
        linear_inversion_physical: true,
        likelihood_trace: trace,
    })
}

/// Reconstruction policy used throughout: linear inversion when physical,
/// otherwise the maximum-likelihood solver.
///
/// The likelihood iteration starts from the clipped linear-inversion matrix
/// blended with a small identity component (the maximizer is usually close,
/// and the multiplicative update cannot grow support from exact zeros).
pub fn reconstruct(
    stats: &OutcomeStatistics,
    intended_plan: &MeasurementPlan,
    opts: &MleOptions,
) -> Result<ReconstructionResult, TomographyError> {
    reconstruct_impl(stats, intended_plan, opts, false)
}

/// As [`reconstruct`], but the likelihood maximum is located by an
/// unconstrained quasi-Newton search over the square-root parametrization
/// `rho = G G^dag / tr(G G^dag)` with analytic gradients. The maximizer is
/// the same; the returned state is certified by its fixed-point residual
/// and handed to the iterative solver in the rare case the certificate
/// fails. Used inside optimizer objectives where reconstruction runs
/// hundreds of thousands of times.
pub fn reconstruct_fast(
    stats: &OutcomeStatistics,
    intended_plan: &MeasurementPlan,
    opts: &MleOptions,
) -> Result<ReconstructionResult, TomographyError> {
    reconstruct_impl(stats, intended_plan, opts, true)
}

fn reconstruct_impl(
    stats: &OutcomeStatistics,
    intended_plan: &MeasurementPlan,
    opts: &MleOptions,
    fast: bool,
) -> Result<ReconstructionResult, TomographyError> {
    let (mat, min_eig) = linear_inversion_matrix(stats, intended_plan)?;
    if min_eig >= PHYSICALITY_TOL {
        return Ok(ReconstructionResult {
            rho: DensityMatrix::from_matrix_unchecked(mat),
            method: ReconstructionMethod::LinearInversion,
            converged: true,
            iterations: 0,
            final_residual: 0.0,
            linear_inversion_physical: true,
            likelihood_trace: None,
        });
    }
    let dim = mat.nrows();
    let eta = 0.01;
    let mut init = project_state(&mat).scale(1.0 - eta)
        + CMatrix::identity(dim, dim).scale(eta / dim as f64);
    if fast {
        match sqrt_param_mle(stats, intended_plan, opts, &init)? {
            SqrtSolve::Certified(mut result) => {
                result.linear_inversion_physical = false;
                return Ok(result);
            }
            // hand the uncertified point to the iterative solver, reopening
            // clipped support with a small identity blend
            SqrtSolve::Uncertified(rho) => {
                init = rho.scale(1.0 - 1e-4)
                    + CMatrix::identity(dim, dim).scale(1e-4 / dim as f64);
            }
        }
    }
    let mut result = mle_reconstruct_from(stats, intended_plan, opts, Some(&init))?;
    result.linear_inversion_physical = false;
    Ok(result)
}

enum SqrtSolve {
    Certified(ReconstructionResult),
    Uncertified(CMatrix),
}

/// Likelihood maximization through the square-root chart regardless of the
/// physicality of linear inversion, certified by the fixed-point residual
/// and falling back to the iterative solver when certification fails. Same
/// maximizer as [`mle_reconstruct`], usually far fewer iterations.
pub fn mle_reconstruct_certified(
    stats: &OutcomeStatistics,
    intended_plan: &MeasurementPlan,
    opts: &MleOptions,
) -> Result<ReconstructionResult, TomographyError> {
    let dim = 1usize << intended_plan.n_parties();
    let init = CMatrix::identity(dim, dim).scale(1.0 / dim as f64);
    match sqrt_param_mle(stats, intended_plan, opts, &init)? {
        SqrtSolve::Certified(result) => Ok(result),
        SqrtSolve::Uncertified(rho) => {
            let blend =
                rho.scale(1.0 - 1e-4) + CMatrix::identity(dim, dim).scale(1e-4 / dim as f64);
            mle_reconstruct_from(stats, intended_plan, opts, Some(&blend))
        }
    }
}

// --- square-root-parametrized likelihood maximization (fast path) ---------

fn flat_of(m: &CMatrix) -> Vec<Complex64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            out.push(m[(i, j)]);
        }
    }
    out
}

fn flat_to_matrix(d: usize, flat: &[Complex64]) -> CMatrix {
    CMatrix::from_fn(d, d, |i, j| flat[i * d + j])
}

#[inline]
fn flat_gram(d: usize, g: &[Complex64], out: &mut [Complex64]) {
    // out = g g†
    for i in 0..d {
        for j in 0..d {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..d {
                acc += g[i * d + k] * g[j * d + k].conj();
            }
            out[i * d + j] = acc;
        }
    }
}

#[inline]
fn flat_trace_product_re(d: usize, a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..d {
        for k in 0..d {
            let p = a[i * d + k] * b[k * d + i];
            acc += p.re;
        }
    }
    acc
}

struct GradSolve {
    x: Vec<f64>,
    iterations: usize,
}

/// Plain L-BFGS with caller-supplied analytic gradient (unconstrained).
fn lbfgs_with_grad<F: Fn(&[f64], &mut [f64]) -> f64>(
    eval: F,
    x0: Vec<f64>,
    gtol: f64,
    max_iters: usize,
) -> GradSolve {
    let n = x0.len();
    let memory = 10;
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = eval(&x, &mut g);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();

    while iterations < max_iters {
        iterations += 1;
        let grad_inf = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if grad_inf <= gtol {
            break;
        }
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let m = s_hist.len();
        let mut alphas = vec![0.0; m];
        for i in (0..m).rev() {
            let a = rho_hist[i] * dot(&s_hist[i], &d);
            alphas[i] = a;
            for (dj, yj) in d.iter_mut().zip(&y_hist[i]) {
                *dj -= a * yj;
            }
        }
        if m > 0 {
            let gamma = dot(&s_hist[m - 1], &y_hist[m - 1]) / dot(&y_hist[m - 1], &y_hist[m - 1]);
            for v in d.iter_mut() {
                *v *= gamma;
            }
        }
        for i in 0..m {
            let b = rho_hist[i] * dot(&y_hist[i], &d);
            let corr = alphas[i] - b;
            for (dj, sj) in d.iter_mut().zip(&s_hist[i]) {
                *dj += corr * sj;
            }
        }
        if dot(&d, &g) >= 0.0 {
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            d = g.iter().map(|v| -v).collect();
        }

        let mut t = 1.0;
        let mut accepted = None;
        let slope = dot(&d, &g);
        for _ in 0..40 {
            let xt: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            let mut gt = vec![0.0; n];
            let ft = eval(&xt, &mut gt);
            if ft <= fx + 1e-4 * t * slope {
                accepted = Some((xt, ft, gt));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else { break };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            s_hist.push(s);
            y_hist.push(y);
            rho_hist.push(1.0 / sy);
            if s_hist.len() > memory {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
        }
        let delta = (fx - f_new).abs();
        x = x_new;
        fx = f_new;
        g = g_new;
        if delta <= 1e-15 * (1.0 + fx.abs()) {
            break;
        }
    }
    GradSolve { x, iterations }
}

/// Maximizes the likelihood over `rho = G G^dag / tr` and certifies the
/// result with the fixed-point residual.
fn sqrt_param_mle(
    stats: &OutcomeStatistics,
    intended_plan: &MeasurementPlan,
    opts: &MleOptions,
    init: &CMatrix,
) -> Result<SqrtSolve, TomographyError> {
    let elements = mle_elements(stats, intended_plan)?;
    let total_weight: f64 = elements.iter().map(|e| e.weight).sum();
    let d = init.nrows();
    let flat_elems: Vec<(f64, Vec<Complex64>)> =
        elements.iter().map(|e| (e.weight, flat_of(&e.element))).collect();

    let g0 = flat_of(&crate::quantum::sqrt_psd(init));
    let x0: Vec<f64> = g0.iter().flat_map(|z| [z.re, z.im]).collect();

    let eval = |x: &[f64], grad: &mut [f64]| -> f64 {
        let g: Vec<Complex64> =
            (0..d * d).map(|i| Complex64::new(x[2 * i], x[2 * i + 1])).collect();
        let mut rho = vec![Complex64::new(0.0, 0.0); d * d];
        flat_gram(d, &g, &mut rho);
        let t: f64 = (0..d).map(|i| rho[i * d + i].re).sum();
        if t < 1e-30 {
            for (gi, xi) in grad.iter_mut().zip(x) {
                *gi = -xi;
            }
            return 1e6;
        }
        let mut f = 0.0;
        let mut a_mat = vec![Complex64::new(0.0, 0.0); d * d];
        for (w, pi) in &flat_elems {
            let p = (flat_trace_product_re(d, &rho, pi) / t).max(1e-300);
            f -= w * p.ln();
            let scale = w / p;
            for (ai, pij) in a_mat.iter_mut().zip(pi) {
                *ai += pij * scale;
            }
        }
        // grad of -L wrt G*: -(A G - W G)/t, times 2 for the real chart
        for i in 0..d {
            for j in 0..d {
                let mut ag = Complex64::new(0.0, 0.0);
                for k in 0..d {
                    ag += a_mat[i * d + k] * g[k * d + j];
                }
                let z = (ag - g[i * d + j] * total_weight) * (-2.0 / t);
                grad[2 * (i * d + j)] = z.re;
                grad[2 * (i * d + j) + 1] = z.im;
            }
        }
        f
    };

    // Successive rounds restart the curvature history, which reliably
    // escapes line-search stalls in the chart's degenerate directions.
    let mut x = x0;
    let mut total_iters = 0;
    let mut last_rho = None;
    for _round in 0..3 {
        let solved = lbfgs_with_grad(&eval, x, 1e-9 * total_weight.max(1.0), 200);
        total_iters += solved.iterations;
        x = solved.x;

        let g: Vec<Complex64> =
            (0..d * d).map(|i| Complex64::new(x[2 * i], x[2 * i + 1])).collect();
        let mut rho_flat = vec![Complex64::new(0.0, 0.0); d * d];
        flat_gram(d, &g, &mut rho_flat);
        let t: f64 = (0..d).map(|i| rho_flat[i * d + i].re).sum();
        if t < 1e-30 {
            return Ok(SqrtSolve::Uncertified(init.clone()));
        }
        let rho = flat_to_matrix(d, &rho_flat).scale(1.0 / t);

        // fixed-point certificate
        let r = r_operator(&elements, &rho, total_weight);
        let plain = normalize_trace(&r * &rho * &r);
        let (vals, _) = hermitian_eigen(&(&plain - &rho));
        let residual = vals.iter().map(|v| v.abs()).sum::<f64>() * 0.5;
        if residual <= opts.tol {
            return Ok(SqrtSolve::Certified(ReconstructionResult {
                rho: DensityMatrix::from_matrix_unchecked(rho),
                method: ReconstructionMethod::Mle,
                converged: true,
                iterations: total_iters,
                final_residual: residual,
                linear_inversion_physical: true,
                likelihood_trace: None,
            }));
        }
        last_rho = Some(rho);
    }
    Ok(SqrtSolve::Uncertified(last_rho.unwrap_or_else(|| init.clone())))
}

/// Upper edge of the validated domain for the single-qubit worst case,
/// `acos(sqrt(2/3))` (about 35 degrees).
pub fn single_qubit_domain_max() -> f64 {
    (2f64 / 3.0).sqrt().acos()
}

/// Worst-case single-qubit fidelity `f(eps) = (1 + cos eps - sqrt(2) sin eps) / 2`.
pub fn worst_case_fidelity_single(eps: f64) -> f64 {
    0.5 * (1.0 + eps.cos() - 2f64.sqrt() * eps.sin())
}

/// Worst-case fidelity for an n-partite product state, `f(eps)^n`.
pub fn worst_case_fidelity_product(n: usize, eps: f64) -> f64 {
    worst_case_fidelity_single(eps).powi(n as i32)
}

/// Radius factor `lambda = 1 - cos eps + sqrt(2) sin eps` of the ball that
/// encloses all correlator vectors compatible with deviation `eps`.
pub fn lambda_ball_radius(eps: f64) -> f64 {
    1.0 - eps.cos() + 2f64.sqrt() * eps.sin()
}

/// Forward-difference susceptibility `(f(eps_probe) - 1) / eps_probe` of a
/// worst-case fidelity curve with `f(0) = 1`.
pub fn susceptibility<F: Fn(f64) -> f64>(curve: F, eps_probe: f64) -> f64 {
    (curve(eps_probe) - 1.0) / eps_probe
}

/// Split of the fidelity loss `1 - tr(rho tau)` (pure `tau`) into the part
/// carried by the product of the marginals and the remainder.
#[derive(Debug, Clone, Copy)]
pub struct FidelityLossDecomposition {
    pub total: f64,
    pub marginal_term: f64,
    pub correlation_term: f64,
}

impl FidelityLossDecomposition {
    pub fn marginal_share(&self) -> Option<f64> {
        (self.total.abs() > 1e-15).then(|| self.marginal_term / self.total)
    }
}

/// Decomposes the two-qubit fidelity loss against a pure target.
///
/// With `tau_s`, `rho_s` the tensor products of the respective partial
/// traces, the marginal term is `tr[tau_s (tau_s - rho_s)]`; the correlation
/// term is the remainder, so the two always add up to the total loss.
pub fn fidelity_loss_decomposition(
    rho: &DensityMatrix,
    tau: &DensityMatrix,
) -> Result<FidelityLossDecomposition, TomographyError> {
    if rho.dim() != 4 || tau.dim() != 4 {
        return Err(QuantumError::WrongDimension { expected: 4, got: rho.dim().max(tau.dim()) }.into());
    }
    let purity = tau.purity();
    if purity < 1.0 - 1e-8 {
        return Err(TomographyError::TargetNotPure(purity));
    }
    let total = 1.0 - trace_product_re(rho.matrix(), tau.matrix());
    let tau_s = tau.partial_trace(&[0])?.tensor(&tau.partial_trace(&[1])?);
    let rho_s = rho.partial_trace(&[0])?.tensor(&rho.partial_trace(&[1])?);
    let marginal_term = trace_product_re(tau_s.matrix(), tau_s.matrix())
        - trace_product_re(tau_s.matrix(), rho_s.matrix());
    Ok(FidelityLossDecomposition {
        total,
        marginal_term,
        correlation_term: total - marginal_term,
    })
}

/// Trace distance between two reconstructions' states.
pub fn reconstruction_distance(a: &ReconstructionResult, b: &ReconstructionResult) -> f64 {
    trace_distance(a.rho.matrix(), b.rho.matrix())
}

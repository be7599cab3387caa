use std::collections::BTreeMap;

use serde::Serialize;

use super::{
    infinitesimal_constant, pointwise_constant, structural_conditions, testing_constant, weighted_norm_constant, StructuralEntry,
    StructuralOptions, WeightedNorm, Witnessed,
};
use crate::error::{Error, Result};
use crate::kernel::KernelModel;
use crate::solver::{guaranteed_solve_small, picard_solve, Certificate, SolveOptions, SolveStatus};
use crate::space::{AtomicMeasure, ConjugatePair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    SolvableCertified,
    UnsolvableCertified,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerdictOptions {
    /// Scale of the source `f = epsilon K omega`.
    pub epsilon: f64,
    pub solve: SolveOptions,
    pub structural: StructuralOptions,
    /// Run the bisection for the threshold in `epsilon`.
    pub threshold: bool,
    pub threshold_tol: f64,
    pub threshold_solve: SolveOptions,
}

impl Default for VerdictOptions {
    fn default() -> Self {
        VerdictOptions {
            epsilon: 1.0,
            solve: super::default_solve(),
            structural: StructuralOptions::default(),
            threshold: true,
            threshold_tol: 1e-6,
            threshold_solve: SolveOptions {
                tol: 1e-13,
                max_iter: 1_000_000,
                ..SolveOptions::default()
            },
        }
    }
}

/// Bracket for `sup { e : e f is solvable }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EpsilonThreshold {
    /// Largest scale known to be solvable.
    pub lower: f64,
    /// Smallest scale known (or, if `upper_certified` is false, suspected)
    /// to be unsolvable.
    pub upper: f64,
    pub upper_certified: bool,
    /// Scale below which the small-constant hypothesis holds.
    pub small_constant_scale: f64,
    /// Scale above which the scalar minorant rules out solutions.
    pub minorant_scale: f64,
    pub picard_runs: usize,
}

/// Largest `int f dsigma` compatible with a solution: on `supp sigma`,
/// `u >= m int u^q dsigma + f` with `m = min K`, and Jensen reduces this to
/// `U >= a U^q + F` with `a = m |sigma|^{2-q}`, which needs
/// `F <= p^{-1} q^{1-p} a^{1-p}`. Returns `(F, bound)`.
pub fn scalar_minorant_bound(kernel: &KernelModel, sigma: &AtomicMeasure, q: f64, f: &[f64]) -> Result<(f64, f64)> {
    let pq = ConjugatePair::from_q(q)?;
    kernel.space().check_measure(sigma)?;
    kernel.space().check_function(f, "f")?;
    let supp: Vec<usize> = sigma.support().collect();
    let big_f: f64 = supp.iter().map(|&i| sigma.weight(i) * f[i]).sum();
    if supp.is_empty() {
        return Ok((0.0, f64::INFINITY));
    }
    let mut m = f64::INFINITY;
    for &i in &supp {
        for &j in &supp {
            m = m.min(kernel.k(i, j));
        }
    }
    let a = m * sigma.total().powf(2.0 - q);
    let bound = a.powf(1.0 - pq.p) / (pq.p * q.powf(pq.p - 1.0));
    Ok((big_f, bound))
}

/// Brackets the solvability threshold of `e f` by bisection on `e` with
/// Picard runs, seeded by the small-constant and scalar-minorant scales.
pub fn epsilon_threshold(
    kernel: &KernelModel,
    sigma: &AtomicMeasure,
    q: f64,
    f: &[f64],
    tol: f64,
    solve: SolveOptions,
) -> Result<EpsilonThreshold> {
    let pq = ConjugatePair::from_q(q)?;
    let af = crate::solver::apply_a(kernel, sigma, q, f)?;
    let mut ratio = 0.0f64;
    for (a, v) in af.iter().zip(f) {
        if *a > 0.0 {
            ratio = ratio.max(if *v > 0.0 { a / v } else { f64::INFINITY });
        }
    }
    // A(e f) = e^q A f <= e bound f once e^{q-1} ratio <= bound.
    let small = if ratio == 0.0 {
        f64::INFINITY
    } else {
        (pq.small_solution_constant() / ratio).powf(1.0 / (q - 1.0))
    };
    let (big_f, bound) = scalar_minorant_bound(kernel, sigma, q, f)?;
    let minorant = if big_f > 0.0 { bound / big_f } else { f64::INFINITY };
    let mut out = EpsilonThreshold {
        lower: small,
        upper: minorant,
        upper_certified: true,
        small_constant_scale: small,
        minorant_scale: minorant,
        picard_runs: 0,
    };
    if !small.is_finite() || !minorant.is_finite() {
        return Ok(out);
    }
    let (mut lo, mut hi) = (small, minorant);
    const SPLIT: f64 = 0.5 - 0.0137;
    while hi / lo - 1.0 > tol {
        let mid = lo.powf(1.0 - SPLIT) * hi.powf(SPLIT);
        let g: Vec<f64> = f.iter().map(|v| v * mid).collect();
        out.picard_runs += 1;
        match picard_solve(kernel, sigma, q, &g, solve)?.status {
            SolveStatus::Converged => lo = mid,
            SolveStatus::Diverged => {
                hi = mid;
                out.upper_certified = true;
            }
            SolveStatus::Indeterminate => {
                hi = mid;
                out.upper_certified = false;
            }
        }
        if out.picard_runs > 400 {
            break;
        }
    }
    out.lower = lo;
    out.upper = hi;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriteriaReport {
    #[serde(rename = "pointwiseC")]
    pub pointwise_c: Witnessed,
    #[serde(rename = "infinitesimalC")]
    pub infinitesimal_c: Witnessed,
    #[serde(rename = "testingC")]
    pub testing_c: Witnessed,
    #[serde(rename = "weightedC")]
    pub weighted_c: WeightedNorm,
    pub structural: BTreeMap<String, StructuralEntry>,
    pub verdict: Verdict,
    #[serde(rename = "smallConstantBound")]
    pub small_constant_bound: f64,
    pub epsilon: f64,
    #[serde(rename = "picardStatus")]
    pub picard_status: Option<SolveStatus>,
    #[serde(rename = "picardIterations")]
    pub picard_iterations: usize,
    pub certificates: Vec<Certificate>,
    /// All four constants finite, or all infinite.
    #[serde(rename = "constantsConsistent")]
    pub constants_consistent: bool,
    /// `(int f dsigma, largest value compatible with a solution)`.
    #[serde(rename = "scalarMinorant")]
    pub scalar_minorant: (f64, f64),
    #[serde(rename = "epsilonThreshold")]
    pub epsilon_threshold: Option<EpsilonThreshold>,
    pub vacuous: bool,
    /// Picard solution for `f = epsilon K omega`, when it converged.
    #[serde(skip)]
    pub solution: Option<Vec<f64>>,
}

/// Computes every constant and decides solvability of
/// `u = K(u^q dsigma) + epsilon K omega`.
pub fn verdict(kernel: &KernelModel, sigma: &AtomicMeasure, q: f64, omega: &AtomicMeasure, opts: VerdictOptions) -> Result<CriteriaReport> {
    let pq = ConjugatePair::from_q(q)?;
    kernel.space().check_measure(sigma)?;
    kernel.space().check_measure(omega)?;
    if !(opts.epsilon >= 0.0 && opts.epsilon.is_finite()) {
        return crate::error::input(format!("epsilon must be finite and nonnegative, got {}", opts.epsilon));
    }
    let structural = structural_conditions(kernel, sigma, q, opts.structural)?;
    let bound = pq.small_solution_constant();
    if omega.is_zero() {
        return Ok(CriteriaReport {
            pointwise_c: Witnessed::zero(),
            infinitesimal_c: Witnessed::zero(),
            testing_c: Witnessed::zero(),
            weighted_c: WeightedNorm {
                value: 0.0,
                exact: true,
                upper: 0.0,
                method: "vacuous",
            },
            structural,
            verdict: Verdict::SolvableCertified,
            small_constant_bound: bound,
            epsilon: opts.epsilon,
            picard_status: None,
            picard_iterations: 0,
            certificates: Vec::new(),
            constants_consistent: true,
            scalar_minorant: (0.0, f64::INFINITY),
            epsilon_threshold: None,
            vacuous: true,
            solution: Some(vec![0.0; kernel.len()]),
        });
    }
    let pointwise_c = pointwise_constant(kernel, sigma, q, omega)?;
    let infinitesimal_c = infinitesimal_constant(kernel, sigma, q, omega)?;
    let testing_c = testing_constant(kernel, sigma, q, omega)?;
    let weighted_c = weighted_norm_constant(kernel, sigma, omega, pq.p)?;
    let finite = [pointwise_c.value, infinitesimal_c.value, testing_c.value, weighted_c.value].map(f64::is_finite);
    let constants_consistent = finite.iter().all(|b| *b) || finite.iter().all(|b| !*b);

    let k_omega = kernel.potential(omega)?;
    let f: Vec<f64> = k_omega.iter().map(|v| v * opts.epsilon).collect();
    let mut certificates = Vec::new();
    // A(e K omega) <= e^{q-1} C (e K omega), so the hypothesis scales.
    let small = opts.epsilon.powf(q - 1.0) * pointwise_c.value <= bound * (1.0 + 1e-12);
    if small {
        match guaranteed_solve_small(kernel, sigma, q, &f, opts.solve) {
            Ok(rep) => certificates.extend(rep.certificates),
            Err(Error::HypothesisNotMet { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let rep = picard_solve(kernel, sigma, q, &f, opts.solve)?;
    let scalar_minorant = scalar_minorant_bound(kernel, sigma, q, &f)?;
    let verdict = if small || rep.converged() {
        Verdict::SolvableCertified
    } else if rep.status == SolveStatus::Diverged && scalar_minorant.0 > scalar_minorant.1 {
        Verdict::UnsolvableCertified
    } else {
        Verdict::Boundary
    };
    let epsilon_threshold = if opts.threshold {
        Some(epsilon_threshold(kernel, sigma, q, &k_omega, opts.threshold_tol, opts.threshold_solve)?)
    } else {
        None
    };
    Ok(CriteriaReport {
        pointwise_c,
        infinitesimal_c,
        testing_c,
        weighted_c,
        structural,
        verdict,
        small_constant_bound: bound,
        epsilon: opts.epsilon,
        picard_status: Some(rep.status),
        picard_iterations: rep.iterations,
        certificates,
        constants_consistent,
        scalar_minorant,
        epsilon_threshold,
        vacuous: false,
        solution: rep.converged().then_some(rep.u),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::tests::{single_atom, two_point};

    #[test]
    fn scalar_minorant_is_exact_on_one_atom() {
        let k = single_atom(2.0);
        let s = AtomicMeasure::new(vec![0.5]).unwrap();
        let (big_f, bound) = scalar_minorant_bound(&k, &s, 3.0, &[1.0]).unwrap();
        let pq = ConjugatePair::from_q(3.0).unwrap();
        // f threshold p^{-1} q^{1-p} (k w)^{1-p}, integrated against w.
        let f_max = (2.0f64 * 0.5).powf(1.0 - pq.p) / (pq.p * 3f64.powf(pq.p - 1.0));
        assert_eq!(big_f, 0.5);
        assert!((bound - 0.5 * f_max).abs() < 1e-14);
    }

    #[test]
    fn boundary_scalar_is_certified() {
        // K omega = 1/4 with k = w = 1: pointwise constant 1/4.
        let k = single_atom(1.0);
        let s = AtomicMeasure::uniform(1, 1.0).unwrap();
        let omega = AtomicMeasure::new(vec![0.25]).unwrap();
        let opts = VerdictOptions {
            threshold: false,
            solve: SolveOptions {
                tol: 1e-13,
                max_iter: 2_000_000,
                ..Default::default()
            },
            ..Default::default()
        };
        let r = verdict(&k, &s, 2.0, &omega, opts).unwrap();
        assert!((r.pointwise_c.value - 0.25).abs() < 1e-15);
        assert_eq!(r.verdict, Verdict::SolvableCertified);
        assert!(r.certificates.iter().all(|c| c.holds), "{:?}", r.certificates);
    }

    #[test]
    fn two_point_threshold() {
        let k = two_point();
        let s = AtomicMeasure::uniform(2, 1.0).unwrap();
        let r = verdict(&k, &s, 2.0, &s, VerdictOptions::default()).unwrap();
        assert_eq!(r.pointwise_c.value, 9.0);
        assert_eq!(r.verdict, Verdict::UnsolvableCertified);
        let t = r.epsilon_threshold.unwrap();
        assert!(t.lower < t.upper && t.upper / t.lower - 1.0 <= 1e-6 * 1.01);
        assert!(t.small_constant_scale <= t.lower && t.upper <= t.minorant_scale);
        // By symmetry u is constant: u = 3 u^2 + 3 e solvable iff e <= 1/36.
        assert!(t.lower <= 1.0 / 36.0 && 1.0 / 36.0 <= t.upper * (1.0 + 1e-12), "{t:?}");
        assert!(r.constants_consistent);
    }

    #[test]
    fn vacuous_when_omega_zero() {
        let k = two_point();
        let s = AtomicMeasure::uniform(2, 1.0).unwrap();
        let r = verdict(&k, &s, 2.0, &AtomicMeasure::zero(2), VerdictOptions::default()).unwrap();
        assert!(r.vacuous);
        assert_eq!(r.verdict, Verdict::SolvableCertified);
    }
}

use serde::Serialize;

use super::{apply_a_unchecked, check_nonneg, picard_solve, SolveOptions, SolveStatus};
use crate::error::{input, Result};
use crate::kernel::KernelModel;
use crate::space::{AtomicMeasure, ConjugatePair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZNormMethod {
    Bisection,
    IteratedLimit,
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZNormOptions {
    /// Relative width of the final bisection bracket.
    pub tol: f64,
    pub solve: SolveOptions,
    pub max_bisection_steps: usize,
    /// Number of iterates for the `(A^n f)^{1/q^n}` estimate.
    pub iterated_steps: usize,
}

impl Default for ZNormOptions {
    fn default() -> Self {
        ZNormOptions {
            tol: 1e-6,
            solve: SolveOptions::default(),
            max_bisection_steps: 200,
            iterated_steps: 40,
        }
    }
}

/// Bracket for `||f||_Z = inf { l > 0 : f / l solvable }`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ZNormBracket {
    pub lower: f64,
    pub upper: f64,
    pub method: ZNormMethod,
    /// `(sup_{supp f} A f / f)^{1/(q-1)}`; infinite if `A f > 0` off `supp f`.
    pub local_norm: f64,
    /// `p q^{p-1} |f|_Z`, an upper bound whenever `local_norm` is finite.
    pub local_upper: f64,
    /// `sup (A^n f)^{1/q^n}` at the last computed `n`.
    pub iterated_limit: f64,
    pub picard_runs: usize,
    pub indeterminate_runs: usize,
}

/// Brackets `||f||_Z` by bisection on `l`, deciding membership of `f / l`
/// with Picard iteration. An indeterminate run at `l` counts as divergent
/// for steering, and contributes the upper bound `p q^{p-1} l`.
pub fn znorm(kernel: &KernelModel, sigma: &AtomicMeasure, q: f64, f: &[f64], opts: ZNormOptions) -> Result<ZNormBracket> {
    kernel.space().check_measure(sigma)?;
    kernel.space().check_function(f, "f")?;
    check_nonneg(f, "f")?;
    if f.iter().all(|&v| v == 0.0) {
        return input("the Z-norm needs f with nonempty support");
    }
    if !(opts.tol > 0.0) {
        return input("tol must be positive");
    }
    let pq = ConjugatePair::from_q(q)?;
    let gauge = pq.gauge_factor();
    let af = apply_a_unchecked(kernel, sigma, q, f);

    let mut local_ratio = 0.0f64;
    for (a, v) in af.iter().zip(f) {
        if *v > 0.0 {
            local_ratio = local_ratio.max(a / v);
        } else if *a > 0.0 {
            local_ratio = f64::INFINITY;
        }
    }
    let local_norm = local_ratio.powf(1.0 / (q - 1.0));
    let local_upper = gauge * local_norm;
    let iterated_limit = iterated_limit(kernel, sigma, q, f, opts.iterated_steps);

    if local_ratio == 0.0 {
        // A f vanishes: every multiple of f is its own solution.
        return Ok(ZNormBracket {
            lower: 0.0,
            upper: 0.0,
            method: ZNormMethod::Local,
            local_norm,
            local_upper,
            iterated_limit,
            picard_runs: 0,
            indeterminate_runs: 0,
        });
    }

    let mut runs = 0usize;
    let mut indeterminate = 0usize;
    let mut cert_lower = 0.0f64;
    // When A f <= q^{-1} p^{1-q} f / l^{q-1} the scaled source is solvable
    // without running anything.
    let mut cert_upper = local_upper;
    let probe = |lambda: f64, runs: &mut usize, indeterminate: &mut usize| -> Result<SolveStatus> {
        let scaled: Vec<f64> = f.iter().map(|v| v / lambda).collect();
        *runs += 1;
        let st = picard_solve(kernel, sigma, q, &scaled, opts.solve)?.status;
        if st == SolveStatus::Indeterminate {
            *indeterminate += 1;
        }
        Ok(st)
    };

    let mut hi = local_upper;
    if !hi.is_finite() {
        hi = 1.0;
        let mut guard = 0;
        loop {
            match probe(hi, &mut runs, &mut indeterminate)? {
                SolveStatus::Converged => {
                    cert_upper = cert_upper.min(hi);
                    break;
                }
                SolveStatus::Diverged => cert_lower = cert_lower.max(hi),
                SolveStatus::Indeterminate => cert_upper = cert_upper.min(gauge * hi),
            }
            hi *= 2.0;
            guard += 1;
            if guard > 200 {
                return input("could not find a solvable multiple of f");
            }
        }
    }
    let mut lo = if cert_lower > 0.0 { cert_lower } else { hi / 2.0 };
    let mut guard = 0;
    while cert_lower == 0.0 {
        match probe(lo, &mut runs, &mut indeterminate)? {
            SolveStatus::Converged => {
                cert_upper = cert_upper.min(lo);
                hi = lo;
            }
            SolveStatus::Diverged => {
                cert_lower = lo;
                break;
            }
            SolveStatus::Indeterminate => cert_upper = cert_upper.min(gauge * lo),
        }
        lo /= 2.0;
        guard += 1;
        if guard > 200 {
            return input("could not find an unsolvable multiple of f");
        }
    }
    // Split slightly off the geometric middle so that probes do not land on
    // round thresholds, where Picard stalls.
    const SPLIT: f64 = 0.5 - 0.0137;
    for _ in 0..opts.max_bisection_steps {
        if hi / lo - 1.0 <= opts.tol {
            break;
        }
        let mid = lo.powf(1.0 - SPLIT) * hi.powf(SPLIT);
        match probe(mid, &mut runs, &mut indeterminate)? {
            SolveStatus::Converged => {
                cert_upper = cert_upper.min(mid);
                hi = mid;
            }
            SolveStatus::Diverged => {
                cert_lower = cert_lower.max(mid);
                lo = mid;
            }
            SolveStatus::Indeterminate => {
                cert_upper = cert_upper.min(gauge * mid);
                lo = mid;
            }
        }
    }
    if local_upper.is_finite() {
        cert_upper = cert_upper.min(local_upper);
    }
    Ok(ZNormBracket {
        lower: cert_lower,
        upper: cert_upper,
        method: ZNormMethod::Bisection,
        local_norm,
        local_upper,
        iterated_limit,
        picard_runs: runs,
        indeterminate_runs: indeterminate,
    })
}

/// `sup (A^n f)^{1/q^n}` after `steps` iterations, tracked in log scale so
/// neither overflow nor underflow occurs.
pub fn iterated_limit(kernel: &KernelModel, sigma: &AtomicMeasure, q: f64, f: &[f64], steps: usize) -> f64 {
    let s0 = f.iter().copied().fold(0.0, f64::max);
    if s0 == 0.0 {
        return 0.0;
    }
    let mut h: Vec<f64> = f.iter().map(|v| v / s0).collect();
    let mut log_l = s0.ln();
    let mut scale = 1.0f64;
    for _ in 0..steps {
        let ah = apply_a_unchecked(kernel, sigma, q, &h);
        let s = ah.iter().copied().fold(0.0, f64::max);
        if s == 0.0 {
            return 0.0;
        }
        log_l = q * log_l + s.ln();
        scale *= q;
        h = ah.iter().map(|v| v / s).collect();
        if scale > 1e300 {
            break;
        }
    }
    (log_l / scale).exp()
}

//! Monotone iteration for `u = K(u^q dsigma) + f`.

mod znorm;
mod zprime;

pub use znorm::{znorm, ZNormBracket, ZNormMethod, ZNormOptions};
pub use zprime::{zprime_norm, ZPrimeOptions, ZPrimeReport};

use serde::Serialize;

use crate::error::{input, Error, Result};
use crate::kernel::KernelModel;
use crate::space::{AtomicMeasure, ConjugatePair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    Diverged,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Divergence threshold; `None` means `1e12 (1 + sup f)`.
    pub blowup: Option<f64>,
    /// Consecutive steps with pointwise nondecreasing increments needed to
    /// declare divergence before the blowup threshold is reached.
    pub growth_window: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_iter: 10_000,
            blowup: None,
            growth_window: 10,
        }
    }
}

/// A checked two-sided bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Certificate {
    pub name: String,
    pub holds: bool,
    /// Largest violation (`<= 0` when the bound holds).
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SolveReport {
    pub status: SolveStatus,
    pub u: Vec<f64>,
    pub iterations: usize,
    /// `sup |u - (A u + f)|` at the returned iterate.
    pub residual: f64,
    pub certificates: Vec<Certificate>,
    /// Every step satisfied `u_n >= u_{n-1}`.
    pub monotone: bool,
    /// Why the run stopped.
    pub reason: String,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    pub fn sup(&self) -> f64 {
        self.u.iter().copied().fold(0.0, f64::max)
    }
}

fn check_nonneg(f: &[f64], name: &str) -> Result<()> {
    for (i, v) in f.iter().enumerate() {
        if !(v.is_finite() && *v >= 0.0) {
            return input(format!("`{name}` must be finite and nonnegative (index {i} is {v})"));
        }
    }
    Ok(())
}

fn sup(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

/// `A f = K(f^q dsigma)`.
pub fn apply_a(kernel: &KernelModel, sigma: &AtomicMeasure, q: f64, f: &[f64]) -> Result<Vec<f64>> {
    kernel.space().check_measure(sigma)?;
    kernel.space().check_function(f, "f")?;
    check_nonneg(f, "f")?;
    Ok(apply_a_unchecked(kernel, sigma, q, f))
}

pub(crate) fn apply_a_unchecked(kernel: &KernelModel, sigma: &AtomicMeasure, q: f64, f: &[f64]) -> Vec<f64> {
    let w: Vec<f64> = sigma
        .weights()
        .iter()
        .zip(f)
        .map(|(s, v)| if *s == 0.0 || *v == 0.0 { 0.0 } else { s * v.powf(q) })
        .collect();
    kernel.apply(&w)
}

/// Picard iteration `u_0 = 0`, `u_n = A u_{n-1} + f`.
///
/// Divergence is declared when `sup u_n` passes the blowup threshold, or when
/// the increments `u_n - u_{n-1}` have been pointwise nondecreasing for
/// `growth_window` consecutive steps: for this convex monotone map that
/// persists forever once it happens, so the iterates are unbounded.
pub fn picard_solve(kernel: &KernelModel, sigma: &AtomicMeasure, q: f64, f: &[f64], opts: SolveOptions) -> Result<SolveReport> {
    kernel.space().check_measure(sigma)?;
    kernel.space().check_function(f, "f")?;
    check_nonneg(f, "f")?;
    if !(q > 1.0 && q.is_finite()) {
        return input(format!("exponent q must be > 1, got {q}"));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return input("tol must be positive and max_iter at least 1");
    }
    let sup_f = sup(f);
    let blowup = opts.blowup.unwrap_or(1e12 * (1.0 + sup_f));
    if !(blowup > sup_f) {
        return input(format!("blowup threshold {blowup} must exceed sup f = {sup_f}"));
    }
    let n = f.len();
    let mut u = vec![0.0; n];
    let mut prev_inc = vec![0.0; n];
    let mut growth = 0usize;
    let mut monotone = true;
    for it in 1..=opts.max_iter {
        let au = apply_a_unchecked(kernel, sigma, q, &u);
        let next: Vec<f64> = au.iter().zip(f).map(|(a, f)| a + f).collect();
        let mut delta = 0.0f64;
        let mut grows = it > 2;
        let mut any_pos = false;
        let mut inc = vec![0.0; n];
        for i in 0..n {
            let d = next[i] - u[i];
            if d < -1e-12 * (1.0 + next[i].abs()) {
                monotone = false;
            }
            inc[i] = d;
            delta = delta.max(d.abs());
            if d > 0.0 {
                any_pos = true;
            }
            if d < prev_inc[i] * (1.0 + 1e-9) && !(prev_inc[i] == 0.0 && d >= 0.0) {
                grows = false;
            }
        }
        let s = sup(&next);
        u = next;
        if !s.is_finite() || s > blowup {
            return Ok(report(kernel, sigma, q, f, u, it, SolveStatus::Diverged, monotone, format!("sup u exceeded {blowup:e}")));
        }
        if delta <= opts.tol * (1.0 + s) {
            return Ok(report(kernel, sigma, q, f, u, it, SolveStatus::Converged, monotone, "increment below tolerance".into()));
        }
        growth = if grows && any_pos { growth + 1 } else { 0 };
        if opts.growth_window > 0 && growth >= opts.growth_window {
            return Ok(report(
                kernel,
                sigma,
                q,
                f,
                u,
                it,
                SolveStatus::Diverged,
                monotone,
                format!("increments nondecreasing for {growth} consecutive steps"),
            ));
        }
        prev_inc = inc;
    }
    Ok(report(
        kernel,
        sigma,
        q,
        f,
        u,
        opts.max_iter,
        SolveStatus::Indeterminate,
        monotone,
        "iteration cap reached".into(),
    ))
}

#[allow(clippy::too_many_arguments)]
fn report(
    kernel: &KernelModel,
    sigma: &AtomicMeasure,
    q: f64,
    f: &[f64],
    u: Vec<f64>,
    iterations: usize,
    status: SolveStatus,
    monotone: bool,
    reason: String,
) -> SolveReport {
    let residual = if status == SolveStatus::Diverged {
        f64::INFINITY
    } else {
        let au = apply_a_unchecked(kernel, sigma, q, &u);
        u.iter().zip(&au).zip(f).map(|((u, a), f)| (u - a - f).abs()).fold(0.0, f64::max)
    };
    SolveReport {
        status,
        u,
        iterations,
        residual,
        certificates: Vec::new(),
        monotone,
        reason,
    }
}

/// `lo <= u <= hi` pointwise, with slack `tol`.
fn sandwich(name: &str, lo: &[f64], u: &[f64], hi: &[f64], tol: f64) -> Certificate {
    let worst = lo
        .iter()
        .zip(u)
        .zip(hi)
        .map(|((l, u), h)| (l - u).max(u - h))
        .fold(f64::NEG_INFINITY, f64::max);
    Certificate {
        name: name.to_string(),
        holds: worst <= tol,
        worst,
    }
}

/// Worst pointwise ratio `num / den` (`0/0 = 0`, `x/0 = inf`).
fn worst_ratio(num: &[f64], den: &[f64]) -> f64 {
    num.iter()
        .zip(den)
        .map(|(a, b)| {
            if *a == 0.0 {
                0.0
            } else if *b == 0.0 {
                f64::INFINITY
            } else {
                a / b
            }
        })
        .fold(0.0, f64::max)
}

/// Solve under `A f <= q^{-1} p^{1-q} f`, certifying `f <= u <= p f`.
pub fn guaranteed_solve_small(kernel: &KernelModel, sigma: &AtomicMeasure, q: f64, f: &[f64], opts: SolveOptions) -> Result<SolveReport> {
    let pq = ConjugatePair::from_q(q)?;
    let af = apply_a(kernel, sigma, q, f)?;
    let bound = pq.small_solution_constant();
    let ratio = worst_ratio(&af, f);
    if ratio > bound * (1.0 + 1e-12) {
        return Err(Error::HypothesisNotMet { worst_ratio: ratio, bound });
    }
    let mut rep = picard_solve(kernel, sigma, q, f, opts)?;
    let hi: Vec<f64> = f.iter().map(|v| pq.p * v).collect();
    let tol = 1e-9 * rep.sup().max(f64::MIN_POSITIVE);
    rep.certificates.push(sandwich("f <= u <= p f", f, &rep.u, &hi, tol));
    Ok(rep)
}

/// Solve under `A^2 f <= q^{-q} p^{q(1-q)} A f`, certifying
/// `f + A f <= u <= f + p^q A f`.
pub fn guaranteed_solve_iterated(kernel: &KernelModel, sigma: &AtomicMeasure, q: f64, f: &[f64], opts: SolveOptions) -> Result<SolveReport> {
    let pq = ConjugatePair::from_q(q)?;
    let af = apply_a(kernel, sigma, q, f)?;
    let aaf = apply_a_unchecked(kernel, sigma, q, &af);
    let bound = q.powf(-q) * pq.p.powf(q * (1.0 - q));
    let ratio = worst_ratio(&aaf, &af);
    if ratio > bound * (1.0 + 1e-12) {
        return Err(Error::HypothesisNotMet { worst_ratio: ratio, bound });
    }
    let mut rep = picard_solve(kernel, sigma, q, f, opts)?;
    let lo: Vec<f64> = f.iter().zip(&af).map(|(f, a)| f + a).collect();
    let hi: Vec<f64> = f.iter().zip(&af).map(|(f, a)| f + pq.p.powf(q) * a).collect();
    let tol = 1e-9 * rep.sup().max(f64::MIN_POSITIVE);
    rep.certificates.push(sandwich("f + Af <= u <= f + p^q Af", &lo, &rep.u, &hi, tol));
    Ok(rep)
}

/// `max_x A(f+g) - ((Af)^{1/q} + (Ag)^{1/q})^q`; nonpositive up to rounding.
pub fn subadditivity_check(kernel: &KernelModel, sigma: &AtomicMeasure, q: f64, f: &[f64], g: &[f64]) -> Result<f64> {
    kernel.space().check_function(g, "g")?;
    check_nonneg(g, "g")?;
    let af = apply_a(kernel, sigma, q, f)?;
    let ag = apply_a_unchecked(kernel, sigma, q, g);
    let fg: Vec<f64> = f.iter().zip(g).map(|(a, b)| a + b).collect();
    let afg = apply_a_unchecked(kernel, sigma, q, &fg);
    Ok(afg
        .iter()
        .zip(af.iter().zip(&ag))
        .map(|(s, (a, b))| s - (a.powf(1.0 / q) + b.powf(1.0 / q)).powf(q))
        .fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::tests::{single_atom, two_point};

    fn one() -> AtomicMeasure {
        AtomicMeasure::uniform(1, 1.0).unwrap()
    }

    #[test]
    fn apply_a_examples() {
        let k = single_atom(1.0);
        assert_eq!(apply_a(&k, &one(), 2.0, &[0.5]).unwrap(), vec![0.25]);
        assert_eq!(apply_a(&k, &one(), 2.0, &[0.0]).unwrap(), vec![0.0]);
        assert!(apply_a(&k, &one(), 2.0, &[-1.0]).is_err());
        let k2 = two_point();
        let s2 = AtomicMeasure::uniform(2, 1.0).unwrap();
        assert_eq!(apply_a(&k2, &s2, 2.0, &[1.0, 1.0]).unwrap(), vec![3.0, 3.0]);
    }

    #[test]
    fn scalar_picard() {
        let k = single_atom(1.0);
        let r = picard_solve(&k, &one(), 2.0, &[0.1], SolveOptions::default()).unwrap();
        assert!(r.converged() && r.monotone);
        let exact = (1.0 - 0.6f64.sqrt()) / 2.0;
        assert!((r.u[0] - exact).abs() < 1e-9);
        let d = picard_solve(&k, &one(), 2.0, &[0.3], SolveOptions::default()).unwrap();
        assert_eq!(d.status, SolveStatus::Diverged);
        let z = picard_solve(&k, &one(), 2.0, &[0.0], SolveOptions::default()).unwrap();
        assert!(z.converged() && z.u[0] == 0.0);
    }

    #[test]
    fn picard_validates() {
        let k = single_atom(1.0);
        let bad = SolveOptions { tol: 0.0, ..Default::default() };
        assert!(picard_solve(&k, &one(), 2.0, &[0.1], bad).is_err());
        let low = SolveOptions { blowup: Some(0.01), ..Default::default() };
        assert!(picard_solve(&k, &one(), 2.0, &[0.1], low).is_err());
    }

    #[test]
    fn guaranteed_small() {
        let k = single_atom(1.0);
        let r = guaranteed_solve_small(&k, &one(), 2.0, &[0.1], SolveOptions::default()).unwrap();
        assert!(r.certificates[0].holds);
        assert!(r.u[0] >= 0.1 && r.u[0] <= 0.2);
        match guaranteed_solve_small(&k, &one(), 2.0, &[0.3], SolveOptions::default()) {
            Err(Error::HypothesisNotMet { worst_ratio, bound }) => {
                assert!((worst_ratio - 0.3).abs() < 1e-15 && bound == 0.25)
            }
            other => panic!("unexpected {other:?}"),
        }
        let z = guaranteed_solve_small(&k, &one(), 2.0, &[0.0], SolveOptions::default()).unwrap();
        assert_eq!(z.u, vec![0.0]);
    }

    #[test]
    fn guaranteed_iterated() {
        let k = single_atom(1.0);
        let r = guaranteed_solve_iterated(&k, &one(), 2.0, &[0.2], SolveOptions::default()).unwrap();
        assert!(r.certificates[0].holds);
        assert!((r.u[0] - (1.0 - 0.2f64.sqrt()) / 2.0).abs() < 1e-8);
        assert!(guaranteed_solve_iterated(&k, &one(), 2.0, &[0.3], SolveOptions::default()).is_err());
    }

    #[test]
    fn subadditivity_edge_cases() {
        let k = two_point();
        let s = AtomicMeasure::uniform(2, 1.0).unwrap();
        let f = [0.3, 0.7];
        assert!(subadditivity_check(&k, &s, 2.0, &f, &[0.0, 0.0]).unwrap().abs() < 1e-15);
        assert!(subadditivity_check(&k, &s, 2.0, &f, &f).unwrap().abs() < 1e-14);
        assert!(subadditivity_check(&k, &s, 2.0, &f, &[0.9, 0.1]).unwrap() <= 1e-14);
    }
}

//! Solvability criteria: pointwise, infinitesimal, testing and weighted
//! norm constants, plus the structural conditions on `sigma`.

mod ball;
mod structural;
mod verdict;

pub use ball::{nondegeneracy_check, phi_ball, Nondegeneracy, PhiBall};
pub use structural::{
    structural_conditions, tail_integral_sup, RadiusWindow, StructuralEntry, StructuralOptions, LOCAL_DOUBLING, LOCAL_TAIL,
    MEASURE_DECAY, MEASURE_DOUBLING, NEIGHBOUR, TAIL_INTEGRAL,
};
pub use verdict::{epsilon_threshold, scalar_minorant_bound, verdict, CriteriaReport, EpsilonThreshold, Verdict, VerdictOptions};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{input, Error, Result};
use crate::kernel::KernelModel;
use crate::solver::SolveOptions;
use crate::space::{AtomicMeasure, BallTable, ConjugatePair};

/// A supremum together with where it was attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Witnessed {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
}

impl Witnessed {
    pub fn zero() -> Self {
        Witnessed { value: 0.0, x: None, a: None }
    }

    fn at(value: f64, x: usize, a: Option<f64>) -> Self {
        Witnessed { value, x: Some(x), a }
    }

    fn max(self, other: Self) -> Self {
        if other.value > self.value || (self.value.is_nan() && !other.value.is_nan()) {
            other
        } else {
            self
        }
    }
}

fn check_q(q: f64) -> Result<ConjugatePair> {
    ConjugatePair::from_q(q)
}

/// `sup_{supp sigma} K((K omega)^q dsigma) / K omega`.
pub fn pointwise_constant(kernel: &KernelModel, sigma: &AtomicMeasure, q: f64, omega: &AtomicMeasure) -> Result<Witnessed> {
    check_q(q)?;
    kernel.space().check_measure(sigma)?;
    let k_omega = kernel.potential(omega)?;
    if omega.is_zero() {
        return input("the pointwise constant needs a nonzero omega");
    }
    let lhs = kernel.apply_with(sigma, &k_omega.iter().map(|v| v.powf(q)).collect::<Vec<_>>());
    let mut best = Witnessed::zero();
    for x in sigma.support() {
        if k_omega[x] == 0.0 {
            return Err(Error::Degenerate(format!("K omega vanishes at `{}`", kernel.space().id(x))));
        }
        best = best.max(Witnessed::at(lhs[x] / k_omega[x], x, None));
    }
    Ok(best)
}

/// `sup_{x, a} M(x, a)^{p/q} L_a omega(x)`, maximised exactly on every
/// interval between breakpoints.
pub fn infinitesimal_constant(kernel: &KernelModel, sigma: &AtomicMeasure, q: f64, omega: &AtomicMeasure) -> Result<Witnessed> {
    let pq = check_q(q)?;
    kernel.space().check_measure(sigma)?;
    kernel.space().check_measure(omega)?;
    if omega.is_zero() || sigma.is_zero() {
        return Ok(Witnessed::zero());
    }
    let s = pq.p / pq.q;
    let best = (0..kernel.len())
        .into_par_iter()
        .map(|x| {
            let ts = BallTable::new(kernel.space(), x, sigma.weights(), None);
            let tw = BallTable::new(kernel.space(), x, omega.weights(), None);
            let total_inv_w = tw.total_inverse();
            let radii = ts.radii();
            let mut best = Witnessed::zero();
            for (k, &r) in radii.iter().enumerate() {
                let (b, a_) = ts.coefficients(r);
                let (d, inv_w) = tw.coefficients(r);
                let c = total_inv_w - inv_w;
                let phi = |u: f64| (a_ - b * u).max(0.0).powf(s) * (c + d * u);
                let u_hi = 1.0 / r;
                let u_lo = radii.get(k + 1).map_or(0.0, |r1| 1.0 / r1);
                let mut cands = vec![u_hi, u_lo];
                if d * b > 0.0 {
                    let u_star = (d * a_ - s * b * c) / (d * b * (1.0 + s));
                    if u_star > u_lo && u_star < u_hi {
                        cands.push(u_star);
                    }
                }
                for u in cands {
                    if u > 0.0 {
                        best = best.max(Witnessed::at(phi(u), x, Some(1.0 / u)));
                    }
                }
            }
            best
        })
        .reduce(Witnessed::zero, Witnessed::max);
    Ok(best)
}

/// `sup_B int_B (K omega_B)^q dsigma / |B|_omega` over all balls centred at
/// atoms with breakpoint radii.
pub fn testing_constant(kernel: &KernelModel, sigma: &AtomicMeasure, q: f64, omega: &AtomicMeasure) -> Result<Witnessed> {
    check_q(q)?;
    kernel.space().check_measure(sigma)?;
    kernel.space().check_measure(omega)?;
    if omega.is_zero() {
        return input("the testing constant needs a nonzero omega");
    }
    let n = kernel.len();
    let best = (0..n)
        .into_par_iter()
        .map(|x| {
            let row = kernel.space().rho_row(x);
            let order = kernel.space().neighbors_by_distance(x);
            let mut pot = vec![0.0; n];
            let mut in_ball = Vec::with_capacity(n);
            let mut mass = 0.0;
            let mut best = Witnessed::zero();
            for (idx, &j) in order.iter().enumerate() {
                let j = j as usize;
                let w = omega.weight(j);
                if w > 0.0 {
                    for (i, p) in pot.iter_mut().enumerate() {
                        *p += kernel.k(i, j) * w;
                    }
                    mass += w;
                }
                in_ball.push(j);
                let last_of_radius = order.get(idx + 1).is_none_or(|&nx| row[nx as usize] > row[j]);
                if last_of_radius && mass > 0.0 {
                    let lhs: f64 = in_ball.iter().map(|&i| sigma.weight(i) * pot[i].powf(q)).sum();
                    best = best.max(Witnessed::at(lhs / mass, x, Some(row[j])));
                }
            }
            best
        })
        .reduce(Witnessed::zero, Witnessed::max);
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WeightedNorm {
    pub value: f64,
    /// `true` for the p = 2 eigenvalue computation, `false` for lower bounds.
    pub exact: bool,
    /// For `exact`, a certified upper bound from the Collatz-Wielandt ratio.
    pub upper: f64,
    pub method: &'static str,
}

/// Best constant in `int (K(g dsigma))^p domega <= C int g^p dsigma`.
pub fn weighted_norm_constant(kernel: &KernelModel, sigma: &AtomicMeasure, omega: &AtomicMeasure, p: f64) -> Result<WeightedNorm> {
    ConjugatePair::from_p(p)?;
    if (p - 2.0).abs() < 1e-15 {
        weighted_norm_p2(kernel, sigma, omega)
    } else {
        weighted_norm_lower_bound(kernel, sigma, omega, p)
    }
}

/// Squared spectral norm of `diag(omega^1/2) K diag(sigma^1/2)` by power
/// iteration on the Gram matrix, restricted to `supp sigma`.
pub fn weighted_norm_p2(kernel: &KernelModel, sigma: &AtomicMeasure, omega: &AtomicMeasure) -> Result<WeightedNorm> {
    kernel.space().check_measure(sigma)?;
    kernel.space().check_measure(omega)?;
    let cols: Vec<usize> = sigma.support().collect();
    let rows: Vec<usize> = omega.support().collect();
    if cols.is_empty() || rows.is_empty() {
        return Ok(WeightedNorm {
            value: 0.0,
            exact: true,
            upper: 0.0,
            method: "power-iteration",
        });
    }
    let (m, n) = (rows.len(), cols.len());
    let mut a = vec![0.0; m * n];
    for (r, &i) in rows.iter().enumerate() {
        let wi = omega.weight(i).sqrt();
        for (c, &j) in cols.iter().enumerate() {
            a[r * n + c] = wi * kernel.k(i, j) * sigma.weight(j).sqrt();
        }
    }
    let gram = |v: &[f64]| -> Vec<f64> {
        let av: Vec<f64> = (0..m).map(|r| (0..n).map(|c| a[r * n + c] * v[c]).sum()).collect();
        (0..n).map(|c| (0..m).map(|r| a[r * n + c] * av[r]).sum()).collect()
    };
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let (mut lower, mut upper) = (0.0f64, f64::INFINITY);
    for _ in 0..20_000 {
        let bv = gram(&v);
        let rq: f64 = bv.iter().zip(&v).map(|(a, b)| a * b).sum();
        let cw = bv.iter().zip(&v).map(|(a, b)| a / b).fold(0.0, f64::max);
        lower = lower.max(rq);
        upper = upper.min(cw);
        let norm = bv.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = bv.iter().map(|x| x / norm).collect();
        if upper - lower <= 1e-14 * upper {
            break;
        }
    }
    Ok(WeightedNorm {
        value: lower,
        exact: true,
        upper,
        method: "power-iteration",
    })
}

fn rayleigh(kernel: &KernelModel, sigma: &AtomicMeasure, omega: &AtomicMeasure, p: f64, g: &[f64]) -> f64 {
    let den: f64 = sigma.weights().iter().zip(g).map(|(s, g)| s * g.powf(p)).sum();
    if den <= 0.0 {
        return 0.0;
    }
    let kg = kernel.apply_with(sigma, g);
    let num: f64 = omega.weights().iter().zip(&kg).map(|(w, v)| w * v.powf(p)).sum();
    num / den
}

/// Certified lower bound from ball indicators, truncated kernels
/// `L_a(x, .)^{q-1}` and the nonlinear power iteration
/// `g <- (K(omega (K g)^{p-1}))^{q-1}`.
pub fn weighted_norm_lower_bound(kernel: &KernelModel, sigma: &AtomicMeasure, omega: &AtomicMeasure, p: f64) -> Result<WeightedNorm> {
    let pq = ConjugatePair::from_p(p)?;
    kernel.space().check_measure(sigma)?;
    kernel.space().check_measure(omega)?;
    let n = kernel.len();
    let none = WeightedNorm {
        value: 0.0,
        exact: false,
        upper: f64::INFINITY,
        method: "test-functions",
    };
    if sigma.is_zero() || omega.is_zero() {
        return Ok(WeightedNorm { upper: 0.0, ..none });
    }
    // Ball indicators, incrementally per center.
    let balls = (0..n)
        .into_par_iter()
        .map(|x| {
            let row = kernel.space().rho_row(x);
            let order = kernel.space().neighbors_by_distance(x);
            let mut pot = vec![0.0; n];
            let mut mass = 0.0;
            let mut best = (0.0f64, x, 0.0);
            for (idx, &j) in order.iter().enumerate() {
                let j = j as usize;
                let s = sigma.weight(j);
                if s > 0.0 {
                    for (i, v) in pot.iter_mut().enumerate() {
                        *v += kernel.k(i, j) * s;
                    }
                    mass += s;
                }
                let last = order.get(idx + 1).is_none_or(|&nx| row[nx as usize] > row[j]);
                if last && mass > 0.0 {
                    let num: f64 = omega.weights().iter().zip(&pot).map(|(w, v)| w * v.powf(p)).sum();
                    if num / mass > best.0 {
                        best = (num / mass, x, row[j]);
                    }
                }
            }
            best
        })
        .reduce(|| (0.0, 0, 0.0), |a, b| if b.0 > a.0 { b } else { a });
    let mut value = balls.0;

    // Truncated kernels at a few radii per center.
    let stride = (n / 64).max(1);
    let truncated = (0..n)
        .into_par_iter()
        .filter(|x| x % stride == 0)
        .map(|x| {
            let bp = kernel.space().breakpoints(x);
            let picks = 4.min(bp.len());
            let mut best = 0.0f64;
            for t in 0..picks {
                let a = bp[(t * (bp.len() - 1)) / picks.max(1).saturating_sub(1).max(1)];
                let g: Vec<f64> = kernel.row(x).iter().map(|k| k.min(1.0 / a).powf(pq.q - 1.0)).collect();
                best = best.max(rayleigh(kernel, sigma, omega, p, &g));
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    value = value.max(truncated);

    // Nonlinear power iteration from the constant function.
    let mut g: Vec<f64> = sigma.weights().iter().map(|s| if *s > 0.0 { 1.0 } else { 0.0 }).collect();
    let mut last = 0.0;
    for _ in 0..2000 {
        let r = rayleigh(kernel, sigma, omega, p, &g);
        value = value.max(r);
        if (r - last).abs() <= 1e-14 * r {
            break;
        }
        last = r;
        let kg = kernel.apply_with(sigma, &g);
        let w: Vec<f64> = omega.weights().iter().zip(&kg).map(|(w, v)| w * v.powf(p - 1.0)).collect();
        let back = kernel.apply(&w);
        let mut next: Vec<f64> = back
            .iter()
            .zip(sigma.weights())
            .map(|(b, s)| if *s > 0.0 { b.powf(pq.q - 1.0) } else { 0.0 })
            .collect();
        let norm = next.iter().copied().fold(0.0, f64::max);
        if norm == 0.0 {
            break;
        }
        next.iter_mut().for_each(|v| *v /= norm);
        g = next;
    }
    Ok(WeightedNorm { value, ..none })
}

/// `max_x (Kg)^s / (s (2k)^{s-1} K(g (Kg)^{s-1}))` with `Kg = K(g dsigma)`;
/// points where `Kg = 0` are skipped.
pub fn hardy_property_check(kernel: &KernelModel, sigma: &AtomicMeasure, g: &[f64], s: f64) -> Result<Witnessed> {
    kernel.space().check_measure(sigma)?;
    kernel.space().check_function(g, "g")?;
    if !(s >= 1.0 && s.is_finite()) {
        return input(format!("exponent s must be >= 1, got {s}"));
    }
    if g.iter().any(|v| !(*v >= 0.0)) {
        return input("g must be nonnegative");
    }
    let kg = kernel.apply_with(sigma, g);
    let inner: Vec<f64> = g.iter().zip(&kg).map(|(g, k)| g * k.powf(s - 1.0)).collect();
    let rhs = kernel.apply_with(sigma, &inner);
    let c = s * (2.0 * kernel.kappa()).powf(s - 1.0);
    let mut best = Witnessed::zero();
    for x in 0..kernel.len() {
        if kg[x] > 0.0 {
            best = best.max(Witnessed::at(kg[x].powf(s) / (c * rhs[x]), x, None));
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IteratedWeights {
    /// `C_n` for `domega_n = f_n^q dsigma`, `f_n = A f_{n-1}`.
    pub constants: Vec<f64>,
    /// `C_n^{1/q^n}`.
    pub roots: Vec<f64>,
    pub sup_root: f64,
    /// `false` when the constants are lower bounds (p != 2).
    pub exact: bool,
    /// The sequence left the floating-point range upwards (signals `f` not in Z).
    pub overflow: bool,
    /// The sequence fell below the floating-point range (limit reached).
    pub underflow: bool,
}

pub fn iterated_weight_constants(kernel: &KernelModel, sigma: &AtomicMeasure, q: f64, f: &[f64], n_max: usize) -> Result<IteratedWeights> {
    let pq = check_q(q)?;
    let mut fn_ = f.to_vec();
    crate::solver::apply_a(kernel, sigma, q, &fn_)?;
    let mut out = IteratedWeights {
        constants: Vec::new(),
        roots: Vec::new(),
        sup_root: 0.0,
        exact: (pq.p - 2.0).abs() < 1e-15,
        overflow: false,
        underflow: false,
    };
    for n in 0..=n_max {
        let omega = sigma.with_density_pow(&fn_, q)?;
        let c = weighted_norm_constant(kernel, sigma, &omega, pq.p)?.value;
        let root = c.powf(q.powi(-(n as i32)));
        out.constants.push(c);
        out.roots.push(root);
        out.sup_root = out.sup_root.max(root);
        if n == n_max {
            break;
        }
        fn_ = crate::solver::apply_a(kernel, sigma, q, &fn_)?;
        let sup = fn_.iter().copied().fold(0.0, f64::max);
        if !sup.is_finite() || sup > 1e150 {
            out.overflow = true;
            out.sup_root = f64::INFINITY;
            break;
        }
        if sup < 1e-150 {
            out.underflow = sup > 0.0 || f.iter().any(|v| *v > 0.0);
            break;
        }
    }
    Ok(out)
}

/// Pointwise condition for the Poisson embedding: with
/// `domega_1 = t domega` on the interior points and `sigma_1` on the
/// boundary points, returns
/// `sup K((K sigma_1)^p domega_1) / K sigma_1` over `supp omega_1`.
pub fn carleson_pointwise_constant(kernel: &KernelModel, sigma: &AtomicMeasure, omega: &AtomicMeasure, p: f64) -> Result<Witnessed> {
    let heights: Vec<f64> = kernel
        .space()
        .points()
        .iter()
        .map(|pt| pt.coords.as_ref().and_then(|c| c.last().copied()).unwrap_or(0.0))
        .collect();
    let boundary: Vec<usize> = (0..kernel.len()).filter(|&i| heights[i] == 0.0).collect();
    let sigma1 = sigma.restricted(boundary);
    let omega1 = omega.weighted_by(&heights)?;
    if omega1.is_zero() {
        return Ok(Witnessed::zero());
    }
    let p_pair = ConjugatePair::from_p(p)?;
    pointwise_constant(kernel, &omega1, p_pair.p, &sigma1)
}

/// Solve options used by the verdict cross-checks.
pub(crate) fn default_solve() -> SolveOptions {
    SolveOptions::default()
}

//! Nonlinear capacity `Cap E = inf { int g^p dsigma : K(g dsigma) >= 1 on E }`
//! on atomic spaces, and the ball and set-family estimates built on it.

mod program;

pub use program::{ProgramOptions, ProgramSolution};

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{structural_conditions, RadiusWindow, StructuralOptions};
use crate::error::{input, Result};
use crate::kernel::{KernelModel, LocalProfiles};
use crate::space::{AtomicMeasure, ConjugatePair};
use program::Program;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CapacityResult {
    pub value: f64,
    /// `(point index, g)` on the atoms where `g* > 0`.
    #[serde(skip)]
    pub g_star: Vec<(usize, f64)>,
    pub dual_bound: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    /// No admissible `g` exists (sigma vanishes where it is needed).
    pub infeasible: bool,
}

impl CapacityResult {
    fn trivial(value: f64, infeasible: bool) -> Self {
        CapacityResult {
            value,
            g_star: Vec::new(),
            dual_bound: value,
            kkt_residual: 0.0,
            iterations: 0,
            infeasible,
        }
    }

    /// `g*` as a dense vector over the points of the space.
    pub fn dense(&self, n: usize) -> Vec<f64> {
        let mut g = vec![0.0; n];
        for &(j, v) in &self.g_star {
            g[j] = v;
        }
        g
    }
}

fn check_set(kernel: &KernelModel, set: &[usize]) -> Result<()> {
    if set.is_empty() {
        return input("the set E must be nonempty");
    }
    for &e in set {
        if e >= kernel.len() {
            return input(format!("point index {e} out of range"));
        }
    }
    Ok(())
}

/// General program: `min sum_j c_j g_j^p` subject to
/// `sum_j a(e, j) g_j >= target_e` for `e` in `set`, over the columns `cols`.
fn solve_columns<F>(set: &[usize], cols: &[usize], a: F, c: &[f64], target: &[f64], p: f64, opts: ProgramOptions) -> CapacityResult
where
    F: Fn(usize, usize) -> f64,
{
    let rows: Vec<usize> = set.iter().copied().filter(|&e| target[e] > 0.0).collect();
    if rows.is_empty() {
        return CapacityResult::trivial(0.0, false);
    }
    if cols.is_empty() {
        return CapacityResult::trivial(f64::INFINITY, true);
    }
    let n = cols.len();
    let mut mat = vec![0.0; rows.len() * n];
    for (r, &e) in rows.iter().enumerate() {
        for (k, &j) in cols.iter().enumerate() {
            mat[r * n + k] = a(e, j);
        }
    }
    let w: Vec<f64> = rows.iter().map(|&e| target[e]).collect();
    let cc: Vec<f64> = cols.iter().map(|&j| c[j]).collect();
    let sol = Program { a: &mat, c: &cc, w: &w, p }.solve(opts);
    CapacityResult {
        value: sol.value,
        g_star: cols.iter().zip(&sol.g).filter(|(_, g)| **g > 0.0).map(|(&j, &g)| (j, g)).collect(),
        dual_bound: sol.dual.min(sol.value),
        kkt_residual: sol.kkt,
        iterations: sol.iterations,
        infeasible: false,
    }
}

/// `Cap E` with target `weight` on `E` (default 1), constraints at every
/// point of `E`.
pub fn capacity(kernel: &KernelModel, sigma: &AtomicMeasure, p: f64, set: &[usize], weight: Option<&[f64]>) -> Result<CapacityResult> {
    capacity_with(kernel, sigma, p, set, weight, ProgramOptions::default())
}

pub fn capacity_with(
    kernel: &KernelModel,
    sigma: &AtomicMeasure,
    p: f64,
    set: &[usize],
    weight: Option<&[f64]>,
    opts: ProgramOptions,
) -> Result<CapacityResult> {
    ConjugatePair::from_p(p)?;
    kernel.space().check_measure(sigma)?;
    check_set(kernel, set)?;
    let ones = vec![1.0; kernel.len()];
    let target = match weight {
        Some(w) => {
            kernel.space().check_function(w, "weight")?;
            if w.iter().any(|v| !(*v >= 0.0)) {
                return input("weight must be nonnegative");
            }
            w
        }
        None => &ones,
    };
    let cols: Vec<usize> = sigma.support().collect();
    Ok(solve_columns(
        set,
        &cols,
        |e, j| kernel.k(e, j) * sigma.weight(j),
        sigma.weights(),
        target,
        p,
        opts,
    ))
}

/// The variant with constraints only sigma-almost everywhere on `E`.
pub fn capacity_ae(kernel: &KernelModel, sigma: &AtomicMeasure, p: f64, set: &[usize]) -> Result<CapacityResult> {
    check_set(kernel, set)?;
    let on_support: Vec<usize> = set.iter().copied().filter(|&e| sigma.weight(e) > 0.0).collect();
    if on_support.is_empty() {
        return Ok(CapacityResult::trivial(0.0, false));
    }
    capacity(kernel, sigma, p, &on_support, None)
}

/// `inf { sum g^p delta^{1-p} dx : K(g dx) >= delta on E }`.
pub fn weighted_capacity(kernel: &KernelModel, dx: &AtomicMeasure, delta: &[f64], p: f64, set: &[usize]) -> Result<CapacityResult> {
    ConjugatePair::from_p(p)?;
    kernel.space().check_measure(dx)?;
    kernel.space().check_function(delta, "delta")?;
    check_set(kernel, set)?;
    if delta.iter().any(|d| !(*d > 0.0)) {
        return input("delta must be positive");
    }
    let cols: Vec<usize> = dx.support().collect();
    let c: Vec<f64> = (0..kernel.len()).map(|j| delta[j].powf(1.0 - p) * dx.weight(j)).collect();
    Ok(solve_columns(
        set,
        &cols,
        |e, j| kernel.k(e, j) * dx.weight(j),
        &c,
        delta,
        p,
        ProgramOptions::default(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BallUpper {
    /// `int g~^p dsigma` for the rescaled truncated kernel `g~`.
    pub objective: f64,
    /// `(2 k)^p N(x, a)^{-p/q}`.
    pub bound: f64,
    pub tail: f64,
    /// `L_a(g dsigma)(x) / N(x, a)`, which equals `q`.
    pub truncated_ratio: f64,
    /// `min_{B_a(x)} K(g~ dsigma)`; at least 1 when `g~` is admissible.
    pub min_potential: f64,
    pub vacuous: bool,
}

/// Upper estimate of `Cap B_a(x)` from `g = L_a(x, .)^{q-1}`, rescaled by
/// `2k / (q N(x, a))`.
pub fn capacity_ball_upper(kernel: &KernelModel, sigma: &AtomicMeasure, p: f64, q: f64, x: usize, a: f64) -> Result<BallUpper> {
    let pq = ConjugatePair::new(p, q)?;
    if !(a > 0.0) {
        return input(format!("radius must be positive, got {a}"));
    }
    if x >= kernel.len() {
        return input(format!("point index {x} out of range"));
    }
    let prof = LocalProfiles::new(kernel, sigma, q)?;
    let tail = prof.table(x).tail(a);
    let ball: Vec<usize> = kernel.space().ball(x, a).collect();
    if ball.is_empty() {
        return Ok(BallUpper {
            objective: 0.0,
            bound: 0.0,
            tail,
            truncated_ratio: f64::NAN,
            min_potential: f64::INFINITY,
            vacuous: true,
        });
    }
    if !(tail > 0.0) {
        return input("N(x, a) vanishes; the ball estimate needs sigma nonzero");
    }
    let g: Vec<f64> = kernel.row(x).iter().map(|k| k.min(1.0 / a).powf(q - 1.0)).collect();
    let la_g: f64 = (0..kernel.len()).map(|y| sigma.weight(y) * kernel.row(x)[y].min(1.0 / a) * g[y]).sum();
    let kappa = kernel.kappa();
    let scale = 2.0 * kappa / (q * tail);
    let gt: Vec<f64> = g.iter().map(|v| v * scale).collect();
    let pot = kernel.apply_with(sigma, &gt);
    let min_potential = ball.iter().map(|&y| pot[y]).fold(f64::INFINITY, f64::min);
    let objective: f64 = gt.iter().zip(sigma.weights()).map(|(g, s)| s * g.powf(pq.p)).sum();
    Ok(BallUpper {
        objective,
        bound: (2.0 * kappa).powf(pq.p) * tail.powf(-pq.p / pq.q),
        tail,
        truncated_ratio: la_g / tail,
        min_potential,
        vacuous: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BallRatio {
    pub x: usize,
    pub a: f64,
    pub capacity: f64,
    pub tail: f64,
    /// `Cap B * N^{p/q}`.
    pub ratio: f64,
    pub upper: BallUpper,
    /// `Cap B <= (2 k)^p N^{-p/q}`.
    pub upper_holds: bool,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BallRatioTable {
    pub rows: Vec<BallRatio>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub all_upper_hold: bool,
    /// The lower direction is only meaningful for stable measures.
    pub lower_asserted: bool,
    /// Stable-measure constants of sigma, when the lower direction is asserted.
    pub stability: Option<(f64, f64)>,
}

/// Table of `Cap B_a(x) N(x, a)^{p/q}` over the sampled balls.
pub fn capacity_ball_bounds_check(
    kernel: &KernelModel,
    sigma: &AtomicMeasure,
    p: f64,
    q: f64,
    sample: &[(usize, f64)],
    assert_lower: bool,
) -> Result<BallRatioTable> {
    let pq = ConjugatePair::new(p, q)?;
    let prof = LocalProfiles::new(kernel, sigma, q)?;
    let rows: Vec<BallRatio> = sample
        .par_iter()
        .map(|&(x, a)| -> Result<BallRatio> {
            let upper = capacity_ball_upper(kernel, sigma, p, q, x, a)?;
            let ball: Vec<usize> = kernel.space().ball(x, a).collect();
            let tail = prof.table(x).tail(a);
            if ball.is_empty() {
                return Ok(BallRatio {
                    x,
                    a,
                    capacity: 0.0,
                    tail,
                    ratio: 0.0,
                    upper,
                    upper_holds: true,
                    skipped: true,
                });
            }
            let cap = capacity(kernel, sigma, p, &ball, None)?;
            let bound = upper.bound;
            Ok(BallRatio {
                x,
                a,
                capacity: cap.value,
                tail,
                ratio: cap.value * tail.powf(pq.p / pq.q),
                upper,
                upper_holds: cap.value <= bound * (1.0 + 1e-9) && cap.value <= upper.objective * (1.0 + 1e-9),
                skipped: false,
            })
        })
        .collect::<Result<_>>()?;
    let live = rows.iter().filter(|r| !r.skipped);
    let min_ratio = live.clone().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = live.map(|r| r.ratio).fold(0.0, f64::max);
    let stability = if assert_lower {
        let s = structural_conditions(kernel, sigma, q, StructuralOptions::default())?;
        Some((
            s[crate::criteria::MEASURE_DOUBLING].constant,
            s[crate::criteria::MEASURE_DECAY].constant,
        ))
    } else {
        None
    };
    Ok(BallRatioTable {
        all_upper_hold: rows.iter().all(|r| r.upper_holds),
        rows,
        min_ratio,
        max_ratio,
        lower_asserted: assert_lower,
        stability,
    })
}

/// Set family searched by [`capacity_condition_constant`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SetFamily {
    #[serde(rename = "balls")]
    Balls,
    #[serde(rename = "atoms")]
    Atoms,
    #[serde(rename = "balls+atoms")]
    BallsAndAtoms,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CapacityCondition {
    /// `sup |E|_omega / Cap E` over the family; a lower bound for the sup
    /// over all sets.
    pub value: f64,
    pub witness: Vec<usize>,
    pub sets_checked: usize,
    /// The family was larger than `max_sets` and was thinned.
    pub truncated: bool,
}

/// All distinct balls centred at atoms with breakpoint radii, as sorted
/// index sets.
pub fn distinct_balls(kernel: &KernelModel) -> Vec<Vec<usize>> {
    let mut seen = BTreeSet::new();
    for x in 0..kernel.len() {
        let row = kernel.space().rho_row(x);
        let order = kernel.space().neighbors_by_distance(x);
        let mut members = Vec::new();
        for (i, &j) in order.iter().enumerate() {
            members.push(j as usize);
            let last = order.get(i + 1).is_none_or(|&nx| row[nx as usize] > row[j as usize]);
            if last {
                let mut m = members.clone();
                m.sort_unstable();
                seen.insert(m);
            }
        }
    }
    seen.into_iter().collect()
}

pub fn capacity_condition_constant(
    kernel: &KernelModel,
    sigma: &AtomicMeasure,
    p: f64,
    omega: &AtomicMeasure,
    family: SetFamily,
    max_sets: usize,
) -> Result<CapacityCondition> {
    ConjugatePair::from_p(p)?;
    kernel.space().check_measure(sigma)?;
    kernel.space().check_measure(omega)?;
    let mut sets = Vec::new();
    if matches!(family, SetFamily::Atoms | SetFamily::BallsAndAtoms) {
        sets.extend((0..kernel.len()).map(|i| vec![i]));
    }
    if matches!(family, SetFamily::Balls | SetFamily::BallsAndAtoms) {
        sets.extend(distinct_balls(kernel));
    }
    sets.retain(|e| e.iter().any(|&i| omega.weight(i) > 0.0));
    sets.sort();
    sets.dedup();
    let truncated = max_sets > 0 && sets.len() > max_sets;
    if truncated {
        let stride = sets.len().div_ceil(max_sets);
        sets = sets.into_iter().step_by(stride).collect();
    }
    if sets.is_empty() {
        return Ok(CapacityCondition {
            value: 0.0,
            witness: Vec::new(),
            sets_checked: 0,
            truncated,
        });
    }
    let best = sets
        .par_iter()
        .map(|e| -> Result<(f64, &Vec<usize>)> {
            let mass: f64 = e.iter().map(|&i| omega.weight(i)).sum();
            let cap = capacity(kernel, sigma, p, e, None)?;
            let r = if cap.infeasible {
                0.0
            } else if cap.value == 0.0 {
                f64::INFINITY
            } else {
                mass / cap.value
            };
            Ok((r, e))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((0.0f64, &sets[0]), |a, b| if b.0 > a.0 { b } else { a });
    Ok(CapacityCondition {
        value: best.0,
        witness: best.1.clone(),
        sets_checked: sets.len(),
        truncated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TailIntegralReport {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Constant of `M(x, a) <= C a^{q-1} N(x, a)` on the same window.
    pub local_tail_constant: f64,
    pub skipped: bool,
    pub note: String,
}

/// `sup M(x,a)^{p/q} int_a^R N(x,t)^{-p/q} t^{-2} dt`, skipped when the
/// local tail balance fails on the window.
pub fn tail_integral_check(kernel: &KernelModel, sigma: &AtomicMeasure, p: f64, q: f64, window: Option<RadiusWindow>) -> Result<TailIntegralReport> {
    ConjugatePair::new(p, q)?;
    let s = structural_conditions(kernel, sigma, q, StructuralOptions { window, ..Default::default() })?;
    let lt = &s[crate::criteria::LOCAL_TAIL];
    let ti = &s[crate::criteria::TAIL_INTEGRAL];
    Ok(TailIntegralReport {
        value: if ti.skipped { f64::NAN } else { ti.constant },
        x: ti.x,
        a: ti.a,
        local_tail_constant: lt.constant,
        skipped: ti.skipped,
        note: if lt.vacuous { "sigma is zero".into() } else { ti.note.clone() },
    })
}

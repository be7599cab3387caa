use serde::Serialize;

use super::Interval1DProblem;
use crate::capacity::weighted_capacity;
use crate::criteria::{epsilon_threshold, pointwise_constant, EpsilonThreshold, Witnessed};
use crate::error::{input, Result};
use crate::solver::SolveOptions;
use crate::space::{AtomicMeasure, ConjugatePair};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryOptions {
    /// Cap on the number of intervals tried by the capacity and testing
    /// conditions.
    pub max_sets: usize,
    pub threshold_tol: f64,
    pub solve: SolveOptions,
}

impl Default for BatteryOptions {
    fn default() -> Self {
        BatteryOptions {
            max_sets: 64,
            threshold_tol: 1e-3,
            solve: SolveOptions {
                tol: 1e-12,
                max_iter: 100_000,
                ..SolveOptions::default()
            },
        }
    }
}

/// A sup over index intervals `[lo, hi]` of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IntervalSup {
    pub value: f64,
    pub interval: Option<(usize, usize)>,
    pub sets_checked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BatteryReport {
    /// `sup G(G omega)^q / G omega` with `dsigma` the quadrature measure.
    pub pointwise: Witnessed,
    /// `sup_E int_E d domega / Cap(E)`.
    pub capacity: IntervalSup,
    /// `sup_E int_E (G omega_E)^q d dx / int_E d domega`.
    pub testing: IntervalSup,
    pub threshold: Option<EpsilonThreshold>,
    /// `(min, max)` of `G omega / (x(1-x))` on the grid.
    pub green_band: (f64, f64),
    pub green_potential_infinite: bool,
    /// Conditions whose finiteness disagrees with the others.
    pub cross_flags: Vec<String>,
}

/// Contiguous index ranges of dyadic lengths with half-length strides,
/// thinned evenly to at most `max_sets`.
fn intervals(n: usize, max_sets: usize) -> Vec<(usize, usize)> {
    let mut all = Vec::new();
    let mut len = 1;
    loop {
        let len_c = len.min(n);
        let stride = (len_c / 2).max(1);
        let mut lo = 0;
        while lo + len_c <= n {
            all.push((lo, lo + len_c - 1));
            lo += stride;
        }
        if all.last().is_none_or(|&(_, hi)| hi != n - 1) {
            all.push((n - len_c, n - 1));
        }
        if len_c == n {
            break;
        }
        len *= 2;
    }
    all.sort();
    all.dedup();
    if all.len() <= max_sets || max_sets == 0 {
        return all;
    }
    let step = all.len() as f64 / max_sets as f64;
    let mut out: Vec<_> = (0..max_sets).map(|i| all[(i as f64 * step) as usize]).collect();
    // Always keep the whole grid.
    if !out.contains(&(0, n - 1)) {
        out.push((0, n - 1));
    }
    out
}

/// Pointwise, capacity and testing conditions, the Picard threshold in
/// `epsilon`, and the comparability band of `G omega` with `x(1-x)`, for
/// the quadrature problem. `sigma` is expected to be Lebesgue quadrature.
pub fn dirichlet_battery(problem: &Interval1DProblem, opts: BatteryOptions) -> Result<BatteryReport> {
    problem.validate()?;
    if problem.omega.is_zero() {
        return input("the battery needs a nonzero omega");
    }
    let q = problem.q;
    let pq = ConjugatePair::from_q(q)?;
    let n = problem.grid.len();
    let green = problem.green_kernel()?;
    let d = problem.boundary_weight();
    let g_omega = green.potential(&problem.omega)?;
    let infinite = problem
        .source
        .as_ref()
        .is_some_and(|(_, s, o)| s.green_potential_infinite() || o.green_potential_infinite());

    let band = g_omega
        .iter()
        .zip(&d)
        .map(|(g, d)| g / d)
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
    let pointwise = pointwise_constant(&green, &problem.sigma, q, &problem.omega)?;

    let sets = intervals(n, opts.max_sets);
    let dx = &problem.sigma;
    let mut capacity = IntervalSup {
        value: 0.0,
        interval: None,
        sets_checked: 0,
    };
    let mut testing = capacity;
    for &(lo, hi) in &sets {
        let set: Vec<usize> = (lo..=hi).collect();
        let mass: f64 = set.iter().map(|&i| d[i] * problem.omega.weight(i)).sum();
        if mass == 0.0 {
            continue;
        }
        let cap = weighted_capacity(&green, dx, &d, pq.p, &set)?;
        capacity.sets_checked += 1;
        let r = if cap.infeasible { f64::INFINITY } else { mass / cap.value };
        if r > capacity.value {
            capacity.value = r;
            capacity.interval = Some((lo, hi));
        }

        let omega_e = problem.omega.restricted(set.iter().copied());
        let pot = green.potential(&omega_e)?;
        let lhs: f64 = set.iter().map(|&i| pot[i].powf(q) * d[i] * dx.weight(i)).sum();
        testing.sets_checked += 1;
        if lhs / mass > testing.value {
            testing.value = lhs / mass;
            testing.interval = Some((lo, hi));
        }
    }

    let threshold = if problem.sigma.is_zero() {
        None
    } else {
        Some(epsilon_threshold(&green, &problem.sigma, q, &g_omega, opts.threshold_tol, opts.solve)?)
    };

    let mut finite = vec![
        ("pointwise", pointwise.value.is_finite()),
        ("capacity", capacity.value.is_finite()),
        ("testing", testing.value.is_finite()),
    ];
    if let Some(t) = &threshold {
        finite.push(("threshold", t.lower > 0.0));
    }
    let mut cross_flags = Vec::new();
    let any_finite = finite.iter().any(|f| f.1);
    for (name, ok) in &finite {
        if *ok != any_finite {
            cross_flags.push(format!("{name} disagrees with the other conditions"));
        }
    }
    if infinite && any_finite {
        cross_flags.push("green potential of omega is infinite; discrete constants are not meaningful".into());
    }
    Ok(BatteryReport {
        pointwise,
        capacity,
        testing,
        threshold,
        green_band: band,
        green_potential_infinite: infinite,
        cross_flags,
    })
}

/// `(G omega)(x) / (x(1-x))` for an explicit measure on the grid.
pub fn green_band(problem: &Interval1DProblem, omega: &AtomicMeasure) -> Result<Vec<f64>> {
    let g = problem.green_kernel()?.potential(omega)?;
    Ok(g.iter().zip(problem.boundary_weight()).map(|(g, d)| g / d).collect())
}

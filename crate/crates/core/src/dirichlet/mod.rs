//! `-u'' = sigma u^q + epsilon omega` on (0, 1) with zero boundary values,
//! through the Green kernel `min(x(1-y), y(1-x))` and its boundary
//! normalisation.

mod battery;
mod scan;

pub use battery::{dirichlet_battery, green_band, BatteryOptions, BatteryReport, IntervalSup};
pub use scan::{model_c11_triple_scan, naim1d_triple_scan, TripleScan};

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::kernel::{make_kernel, KernelFamily, KernelModel, KernelOptions, NaimTransform};
use crate::solver::{picard_solve, SolveOptions, SolveReport};
use crate::space::{AtomicMeasure, KappaPolicy, Point};

fn check_unit(x: f64, name: &str) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return input(format!("{name} = {x} must lie in (0, 1)"));
    }
    Ok(())
}

/// `G(x, y) = min(x(1-y), y(1-x))`.
pub fn green1d(x: f64, y: f64) -> Result<f64> {
    check_unit(x, "x")?;
    check_unit(y, "y")?;
    Ok((x * (1.0 - y)).min(y * (1.0 - x)))
}

/// `rho(x, y) = (1 - min(x, y)) max(x, y)`, the inverse of
/// `G(x, y) / (x(1-x) y(1-y))`.
pub fn naim1d_rho(x: f64, y: f64) -> Result<f64> {
    check_unit(x, "x")?;
    check_unit(y, "y")?;
    Ok((1.0 - x.min(y)) * x.max(y))
}

/// `d^n + (dx^2 + dy^2) d^{n-2}` for Euclidean gap `d`.
pub fn model_c11_from_gap(d: f64, dx: f64, dy: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::Unsupported(format!("the model kernel needs n >= 3, got {n}")));
    }
    if !(dx >= 0.0 && dy >= 0.0 && d >= 0.0) {
        return input("distances to the boundary and gaps must be nonnegative");
    }
    Ok(d.powi(n as i32) + (dx * dx + dy * dy) * d.powi(n as i32 - 2))
}

pub fn model_c11_distance(x: &[f64], y: &[f64], dx: f64, dy: f64, n: usize) -> Result<f64> {
    if x.len() != y.len() {
        return input("points of different dimension");
    }
    let d = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    model_c11_from_gap(d, dx, dy, n)
}

/// Quasi-triangle constant asserted for the model kernel: the per-term
/// constants `2^{n-1}` and `3 2^{n-3}` added.
pub fn model_c11_constant_bound(n: usize) -> f64 {
    2f64.powi(n as i32 - 1) + 3.0 * 2f64.powi(n as i32 - 3)
}

/// A measure on (0, 1), given by a density or by atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum DensitySpec {
    Zero,
    Constant { value: f64 },
    /// `coefficient x^left (1-x)^right`.
    Power { coefficient: f64, left: f64, right: f64 },
    Atoms { atoms: Vec<Atom> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub weight: f64,
}

impl DensitySpec {
    pub fn lebesgue() -> Self {
        DensitySpec::Constant { value: 1.0 }
    }

    fn density(&self, x: f64) -> Option<f64> {
        match self {
            DensitySpec::Zero => Some(0.0),
            DensitySpec::Constant { value } => Some(*value),
            DensitySpec::Power { coefficient, left, right } => Some(coefficient * x.powf(*left) * (1.0 - x).powf(*right)),
            DensitySpec::Atoms { .. } => None,
        }
    }

    fn atoms(&self) -> &[Atom] {
        match self {
            DensitySpec::Atoms { atoms } => atoms,
            _ => &[],
        }
    }

    /// `int x(1-x) d mu = inf`: the Green potential is infinite.
    pub fn green_potential_infinite(&self) -> bool {
        match self {
            DensitySpec::Power { coefficient, left, right } => *coefficient != 0.0 && (*left <= -2.0 || *right <= -2.0),
            _ => false,
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        match self {
            DensitySpec::Zero => Ok(()),
            DensitySpec::Constant { value } if *value >= 0.0 && value.is_finite() => Ok(()),
            DensitySpec::Power { coefficient, left, right }
                if *coefficient >= 0.0 && coefficient.is_finite() && left.is_finite() && right.is_finite() =>
            {
                Ok(())
            }
            DensitySpec::Atoms { atoms } => {
                for a in atoms {
                    check_unit(a.x, &format!("{name} atom position"))?;
                    if !(a.weight >= 0.0 && a.weight.is_finite()) {
                        return input(format!("{name}: atom weights must be finite and nonnegative"));
                    }
                }
                Ok(())
            }
            _ => input(format!("{name}: densities must be finite and nonnegative")),
        }
    }
}

/// Discretised problem on a grid of interior points.
#[derive(Debug, Clone, PartialEq)]
pub struct Interval1DProblem {
    pub grid: Vec<f64>,
    pub sigma: AtomicMeasure,
    pub omega: AtomicMeasure,
    /// Node densities, when the measure is absolutely continuous.
    pub sigma_density: Option<Vec<f64>>,
    pub omega_density: Option<Vec<f64>>,
    pub q: f64,
    pub epsilon: f64,
    /// `(cells, sigma, omega)` when built from densities; enables the
    /// half-resolution comparison.
    pub source: Option<(usize, DensitySpec, DensitySpec)>,
}

impl Interval1DProblem {
    /// Explicit grid and atom weights.
    pub fn new(grid: Vec<f64>, sigma: Vec<f64>, omega: Vec<f64>, q: f64, epsilon: f64) -> Result<Self> {
        let p = Interval1DProblem {
            sigma: AtomicMeasure::new(sigma)?,
            omega: AtomicMeasure::new(omega)?,
            grid,
            sigma_density: None,
            omega_density: None,
            q,
            epsilon,
            source: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// Midpoint quadrature on `cells` uniform cells; atoms are added as
    /// extra nodes.
    pub fn from_specs(cells: usize, sigma: DensitySpec, omega: DensitySpec, q: f64, epsilon: f64) -> Result<Self> {
        if cells < 2 {
            return input("at least two cells are needed");
        }
        sigma.validate("sigma")?;
        omega.validate("omega")?;
        let h = 1.0 / cells as f64;
        let mut nodes: Vec<(f64, f64, f64, bool)> = (0..cells).map(|i| ((i as f64 + 0.5) * h, 0.0, 0.0, true)).collect();
        for a in sigma.atoms() {
            nodes.push((a.x, a.weight, 0.0, false));
        }
        for a in omega.atoms() {
            nodes.push((a.x, 0.0, a.weight, false));
        }
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Merge coincident nodes.
        let mut merged: Vec<(f64, f64, f64, bool)> = Vec::new();
        for nd in nodes {
            match merged.last_mut() {
                Some(last) if last.0 == nd.0 => {
                    last.1 += nd.1;
                    last.2 += nd.2;
                    last.3 |= nd.3;
                }
                _ => merged.push(nd),
            }
        }
        let grid: Vec<f64> = merged.iter().map(|m| m.0).collect();
        let mut sw = Vec::with_capacity(grid.len());
        let mut ow = Vec::with_capacity(grid.len());
        for m in &merged {
            let cell = if m.3 { h } else { 0.0 };
            sw.push(m.1 + cell * sigma.density(m.0).unwrap_or(0.0));
            ow.push(m.2 + cell * omega.density(m.0).unwrap_or(0.0));
        }
        let dens = |s: &DensitySpec| -> Option<Vec<f64>> { grid.iter().map(|&x| s.density(x)).collect() };
        let p = Interval1DProblem {
            sigma_density: dens(&sigma),
            omega_density: dens(&omega),
            sigma: AtomicMeasure::new(sw)?,
            omega: AtomicMeasure::new(ow)?,
            grid,
            q,
            epsilon,
            source: Some((cells, sigma, omega)),
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        if n == 0 {
            return input("the grid is empty");
        }
        for (i, &x) in self.grid.iter().enumerate() {
            check_unit(x, "grid point")?;
            if i > 0 && !(x > self.grid[i - 1]) {
                return input("the grid must be strictly increasing");
            }
        }
        if self.sigma.len() != n || self.omega.len() != n {
            return input("measure weights must match the grid length");
        }
        if !(self.q > 1.0 && self.q.is_finite()) {
            return input(format!("exponent q must be > 1, got {}", self.q));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return input(format!("epsilon must be finite and >= 0, got {}", self.epsilon));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<Point> {
        self.grid
            .iter()
            .enumerate()
            .map(|(i, &x)| Point::with_coords(format!("x{i}"), vec![x]))
            .collect()
    }

    /// `x(1-x)` on the grid.
    pub fn boundary_weight(&self) -> Vec<f64> {
        self.grid.iter().map(|x| x * (1.0 - x)).collect()
    }

    /// Green kernel on the grid. Its quasi-metric constant is sampled.
    pub fn green_kernel(&self) -> Result<KernelModel> {
        make_kernel(&KernelFamily::Green1d, self.points(), sampled_kappa())
    }

    pub fn naim_kernel(&self) -> Result<KernelModel> {
        make_kernel(&KernelFamily::Naim1d, self.points(), sampled_kappa())
    }

    /// `s1 = s2 = 1 / (x(1-x))`.
    pub fn naim_transform(&self) -> Result<NaimTransform> {
        let s: Vec<f64> = self.boundary_weight().iter().map(|d| 1.0 / d).collect();
        NaimTransform::new(s.clone(), s)
    }
}

fn sampled_kappa() -> KernelOptions {
    KernelOptions {
        kappa: KappaPolicy::Sampled { triples: 20_000, seed: 7 },
        self_distance: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BVPReport {
    pub u: Vec<f64>,
    /// `max |-D^2 u - sigma u^q - epsilon omega|` over grid nodes with both
    /// neighbours on the grid; `None` for atomic data.
    pub fd_residual: Option<f64>,
    pub solve: SolveReport,
    pub naim_solve: SolveReport,
    /// `sup |u_direct - u_via_transform|` when both converged.
    pub transform_gap: Option<f64>,
    /// Both paths reached the same status.
    pub consistent: bool,
    /// `max |u_h - I u_{2h}| / 3` with `I` linear interpolation.
    pub richardson: Option<f64>,
    /// Largest grid spacing.
    pub h: f64,
    pub green_potential_infinite: bool,
}

/// Three-point second difference on a nonuniform grid.
fn second_difference(x: &[f64], u: &[f64], i: usize) -> f64 {
    let (hm, hp) = (x[i] - x[i - 1], x[i + 1] - x[i]);
    2.0 * ((u[i + 1] - u[i]) / hp - (u[i] - u[i - 1]) / hm) / (hp + hm)
}

pub fn fd_residual(problem: &Interval1DProblem, u: &[f64]) -> Option<f64> {
    let (sd, od) = (problem.sigma_density.as_ref()?, problem.omega_density.as_ref()?);
    let x = &problem.grid;
    let mut worst = 0.0f64;
    for i in 1..x.len().saturating_sub(1) {
        let r = -second_difference(x, u, i) - sd[i] * u[i].powf(problem.q) - problem.epsilon * od[i];
        worst = worst.max(r.abs());
    }
    Some(worst)
}

fn max_spacing(grid: &[f64]) -> f64 {
    let mut h = grid[0].max(1.0 - grid[grid.len() - 1]);
    for w in grid.windows(2) {
        h = h.max(w[1] - w[0]);
    }
    h
}

fn interpolate(xs: &[f64], us: &[f64], x: f64) -> f64 {
    // Zero boundary values at 0 and 1.
    let k = xs.partition_point(|&v| v <= x);
    let (x0, u0) = if k == 0 { (0.0, 0.0) } else { (xs[k - 1], us[k - 1]) };
    let (x1, u1) = if k == xs.len() { (1.0, 0.0) } else { (xs[k], us[k]) };
    if x1 == x0 {
        return u0;
    }
    u0 + (u1 - u0) * (x - x0) / (x1 - x0)
}

/// Direct Green solve and the solve through the normalised kernel.
pub fn solve_bvp_1d(problem: &Interval1DProblem, opts: SolveOptions) -> Result<BVPReport> {
    solve_bvp_1d_with(problem, opts, true)
}

fn solve_bvp_1d_with(problem: &Interval1DProblem, opts: SolveOptions, richardson: bool) -> Result<BVPReport> {
    problem.validate()?;
    let q = problem.q;
    let green = problem.green_kernel()?;
    let g_omega = green.potential(&problem.omega)?;
    let f: Vec<f64> = g_omega.iter().map(|v| v * problem.epsilon).collect();
    let solve = picard_solve(&green, &problem.sigma, q, &f, opts)?;

    let naim = problem.naim_kernel()?;
    let t = problem.naim_transform()?;
    let sigma_t = t.sigma(&problem.sigma, q)?;
    let ft = t.forward(&f);
    let mut naim_solve = picard_solve(&naim, &sigma_t, q, &ft, opts)?;
    naim_solve.u = t.back(&naim_solve.u);

    let transform_gap = (solve.converged() && naim_solve.converged()).then(|| {
        solve
            .u
            .iter()
            .zip(&naim_solve.u)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    });
    let consistent = solve.status == naim_solve.status;
    let fd = if solve.converged() { fd_residual(problem, &solve.u) } else { None };
    let rich = match (&problem.source, richardson && solve.converged()) {
        (Some((cells, s, o)), true) if *cells >= 4 => {
            let coarse = Interval1DProblem::from_specs(cells / 2, s.clone(), o.clone(), q, problem.epsilon)?;
            let rc = solve_bvp_1d_with(&coarse, opts, false)?;
            rc.solve.converged().then(|| {
                problem
                    .grid
                    .iter()
                    .zip(&solve.u)
                    .map(|(&x, &u)| (u - interpolate(&coarse.grid, &rc.solve.u, x)).abs())
                    .fold(0.0, f64::max)
                    / 3.0
            })
        }
        _ => None,
    };
    let infinite = problem.source.as_ref().is_some_and(|(_, s, o)| s.green_potential_infinite() || o.green_potential_infinite());
    Ok(BVPReport {
        u: solve.u.clone(),
        fd_residual: fd,
        solve,
        naim_solve,
        transform_gap,
        consistent,
        richardson: rich,
        h: max_spacing(&problem.grid),
        green_potential_infinite: infinite,
    })
}

/// Experimental: adds the affine extension `phi0 (1-x) + phi1 x` of the
/// boundary data to the source and solves on the Green kernel.
pub fn solve_bvp_1d_affine_boundary(problem: &Interval1DProblem, phi0: f64, phi1: f64, opts: SolveOptions) -> Result<SolveReport> {
    problem.validate()?;
    if !(phi0 >= 0.0 && phi1 >= 0.0) {
        return input("boundary data must be nonnegative");
    }
    let green = problem.green_kernel()?;
    let g_omega = green.potential(&problem.omega)?;
    let f: Vec<f64> = g_omega
        .iter()
        .zip(&problem.grid)
        .map(|(v, x)| v * problem.epsilon + phi0 * (1.0 - x) + phi1 * x)
        .collect();
    picard_solve(&green, &problem.sigma, problem.q, &f, opts)
}

/// Pointwise constant on the Green kernel and on the normalised kernel
/// with transformed measures.
pub fn transform_invariance(problem: &Interval1DProblem) -> Result<(f64, f64)> {
    use crate::criteria::pointwise_constant;
    let q = problem.q;
    let green = problem.green_kernel()?;
    let a = pointwise_constant(&green, &problem.sigma, q, &problem.omega)?.value;
    let t = problem.naim_transform()?;
    let naim = problem.naim_kernel()?;
    let b = pointwise_constant(&naim, &t.sigma(&problem.sigma, q)?, q, &t.omega(&problem.omega)?)?.value;
    Ok((a, b))
}

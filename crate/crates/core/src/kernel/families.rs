use serde::Serialize;
use statrs::function::gamma::gamma;

use super::KernelModel;
use crate::dirichlet::{green1d, model_c11_from_gap, naim1d_rho};
use crate::error::{input, Error, Result};
use crate::space::{KappaPolicy, Point, QuasiMetricSpace};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "camelCase")]
pub enum KernelFamily {
    /// Explicit quasi-metric table.
    Custom,
    /// `rho = |x-y|^(n-alpha) / C(n, alpha)`.
    Riesz { n: usize, alpha: f64 },
    /// `rho = 1 / min(x(1-y), y(1-x))` on (0, 1).
    Green1d,
    /// `rho = (1 - min(x, y)) max(x, y)` on (0, 1).
    Naim1d,
    /// `rho = |x-y|^(n-2) (|x-y|^2 + delta(x)^2 + delta(y)^2)`.
    #[serde(rename = "modelC11")]
    ModelC11 { n: usize },
    /// Points `(x, t)` in the closed upper half-space,
    /// `K = (|x-y|^2 + (t+tau)^2)^(-(n+1)/2)`.
    Poisson { n: usize },
    /// `s1(x) G(x, y) s2(y)` built from another kernel.
    Transformed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelOptions {
    pub kappa: KappaPolicy,
    /// Euclidean stand-in for `|x - x|` on the diagonal, where the formula
    /// would vanish. Defaults to half the distance to the nearest neighbour.
    pub self_distance: Option<f64>,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions {
            kappa: KappaPolicy::Estimate,
            self_distance: None,
        }
    }
}

/// `C(n, alpha) = pi^{-n/2} 2^{-alpha} Gamma((n-alpha)/2) / Gamma(alpha/2)`.
pub fn riesz_constant(n: usize, alpha: f64) -> Result<f64> {
    let nf = n as f64;
    if n == 0 || !(alpha > 0.0 && alpha < nf) {
        return input(format!("riesz kernel needs 0 < alpha < n, got n = {n}, alpha = {alpha}"));
    }
    Ok(std::f64::consts::PI.powf(-nf / 2.0) * 2f64.powf(-alpha) * gamma((nf - alpha) / 2.0) / gamma(alpha / 2.0))
}

/// Euclidean radius of the quasi-metric ball `B_r` of the Riesz kernel.
pub fn riesz_euclidean_radius(n: usize, alpha: f64, r: f64) -> Result<f64> {
    Ok((riesz_constant(n, alpha)? * r).powf(1.0 / (n as f64 - alpha)))
}

fn coords<'a>(p: &'a Point, dim: usize, family: &str) -> Result<&'a [f64]> {
    match &p.coords {
        Some(c) if c.len() == dim && c.iter().all(|v| v.is_finite()) => Ok(c),
        Some(c) => input(format!(
            "{family}: point `{}` has {} finite coordinates, expected {dim}",
            p.id,
            c.len()
        )),
        None => input(format!("{family}: point `{}` has no coordinates", p.id)),
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Per-point diagonal stand-ins: a fixed value, or half the distance to the
/// nearest distinct neighbour.
fn self_distances(pts: &[&[f64]], fixed: Option<f64>, family: &str) -> Result<Vec<f64>> {
    if let Some(d) = fixed {
        if !(d > 0.0 && d.is_finite()) {
            return input(format!("{family}: selfDistance must be positive, got {d}"));
        }
        return Ok(vec![d; pts.len()]);
    }
    if pts.len() < 2 {
        return input(format!("{family}: a single point needs an explicit selfDistance"));
    }
    Ok(pts
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let nn = pts
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| dist(a, b))
                .fold(f64::INFINITY, f64::min);
            0.5 * nn
        })
        .collect())
}

/// Builds a family kernel on the given points.
pub fn make_kernel(family: &KernelFamily, points: Vec<Point>, opts: KernelOptions) -> Result<KernelModel> {
    let n = points.len();
    let mut table = vec![0.0; n * n];
    match *family {
        KernelFamily::Custom | KernelFamily::Transformed => {
            return Err(Error::Input("custom kernels are built from an explicit rho table".into()));
        }
        KernelFamily::Riesz { n: dim, alpha } => {
            let c = riesz_constant(dim, alpha)?;
            let pts = points.iter().map(|p| coords(p, dim, "riesz")).collect::<Result<Vec<_>>>()?;
            let diag = self_distances(&pts, opts.self_distance, "riesz")?;
            let e = dim as f64 - alpha;
            for i in 0..n {
                for j in 0..n {
                    let d = if i == j { diag[i] } else { dist(pts[i], pts[j]) };
                    table[i * n + j] = d.powf(e) / c;
                }
            }
        }
        KernelFamily::Green1d | KernelFamily::Naim1d => {
            let pts = points.iter().map(|p| coords(p, 1, "1D kernel")).collect::<Result<Vec<_>>>()?;
            for i in 0..n {
                for j in 0..n {
                    let (x, y) = (pts[i][0], pts[j][0]);
                    table[i * n + j] = if *family == KernelFamily::Green1d {
                        1.0 / green1d(x, y)?
                    } else {
                        naim1d_rho(x, y)?
                    };
                }
            }
        }
        KernelFamily::ModelC11 { n: dim } => {
            let pts = points.iter().map(|p| coords(p, dim, "modelC11")).collect::<Result<Vec<_>>>()?;
            let deltas = points
                .iter()
                .map(|p| match p.delta {
                    Some(d) if d > 0.0 && d.is_finite() => Ok(d),
                    _ => input(format!("modelC11: point `{}` needs a positive boundary distance", p.id)),
                })
                .collect::<Result<Vec<_>>>()?;
            let diag = self_distances(&pts, opts.self_distance, "modelC11")?;
            for i in 0..n {
                for j in 0..n {
                    let d = if i == j { diag[i] } else { dist(pts[i], pts[j]) };
                    table[i * n + j] = model_c11_from_gap(d, deltas[i], deltas[j], dim)?;
                }
            }
        }
        KernelFamily::Poisson { n: dim } => {
            if dim == 0 {
                return input("poisson kernel needs n >= 1");
            }
            let pts = points.iter().map(|p| coords(p, dim + 1, "poisson")).collect::<Result<Vec<_>>>()?;
            for p in &pts {
                if p[dim] < 0.0 {
                    return input("poisson: the last coordinate (height) must be >= 0");
                }
            }
            let diag = if pts.iter().any(|p| p[dim] == 0.0) {
                let base: Vec<&[f64]> = pts.iter().map(|p| &p[..dim]).collect();
                Some(self_distances(&base, opts.self_distance, "poisson")?)
            } else {
                None
            };
            let e = (dim as f64 + 1.0) / 2.0;
            for i in 0..n {
                for j in 0..n {
                    let (a, b) = (pts[i], pts[j]);
                    let h = a[dim] + b[dim];
                    let mut s = dist(&a[..dim], &b[..dim]).powi(2) + h * h;
                    if i == j && s == 0.0 {
                        s = diag.as_ref().map(|d| d[i] * d[i]).unwrap_or(0.0);
                    }
                    table[i * n + j] = s.powf(e);
                }
            }
        }
    }
    let space = QuasiMetricSpace::new(points, table, opts.kappa)?;
    Ok(KernelModel::new(space, family.clone()))
}

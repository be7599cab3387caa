//! Kernels `K = 1/rho`, potentials and the lower/upper split.

mod families;
mod profile;
mod transform;

pub use families::{make_kernel, riesz_constant, riesz_euclidean_radius, KernelFamily, KernelOptions};
pub use profile::{LocalProfile, LocalProfiles};
pub use transform::NaimTransform;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{input, Result};
use crate::space::{AtomicMeasure, BallTable, QuasiMetricSpace};

/// Rows above this size are processed in parallel.
const PAR_THRESHOLD: usize = 96;

#[derive(Debug, Clone)]
pub struct KernelModel {
    space: QuasiMetricSpace,
    k: Vec<f64>,
    family: KernelFamily,
}

impl KernelModel {
    pub fn new(space: QuasiMetricSpace, family: KernelFamily) -> Self {
        let k = space.rho_table().iter().map(|r| 1.0 / r).collect();
        KernelModel { space, k, family }
    }

    /// Kernel on an explicit quasi-metric table.
    pub fn custom(space: QuasiMetricSpace) -> Self {
        Self::new(space, KernelFamily::Custom)
    }

    pub fn space(&self) -> &QuasiMetricSpace {
        &self.space
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn kappa(&self) -> f64 {
        self.space.kappa()
    }

    #[inline]
    pub fn k(&self, x: usize, y: usize) -> f64 {
        self.k[x * self.len() + y]
    }

    #[inline]
    pub fn row(&self, x: usize) -> &[f64] {
        let n = self.len();
        &self.k[x * n..(x + 1) * n]
    }

    /// `x -> sum_j K(x, y_j) w_j` for a dense weight vector.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        let n = self.len();
        debug_assert_eq!(w.len(), n);
        let dot = |i: usize| self.row(i).iter().zip(w).map(|(k, w)| k * w).sum::<f64>();
        if n >= PAR_THRESHOLD {
            (0..n).into_par_iter().map(dot).collect()
        } else {
            (0..n).map(dot).collect()
        }
    }

    /// `K(g dsigma)`.
    pub fn apply_with(&self, sigma: &AtomicMeasure, g: &[f64]) -> Vec<f64> {
        let w: Vec<f64> = sigma.weights().iter().zip(g).map(|(s, g)| if *s == 0.0 { 0.0 } else { s * g }).collect();
        self.apply(&w)
    }

    /// The potential `K omega`.
    pub fn potential(&self, omega: &AtomicMeasure) -> Result<Vec<f64>> {
        self.space.check_measure(omega)?;
        Ok(self.apply(omega.weights()))
    }

    /// The potential evaluated through `int_0^inf |B_r(x)|/r^2 dr`, integrating
    /// the step function exactly between breakpoints.
    pub fn potential_via_balls(&self, omega: &AtomicMeasure) -> Result<Vec<f64>> {
        self.space.check_measure(omega)?;
        let eval = |x: usize| {
            let t = BallTable::new(&self.space, x, omega.weights(), None);
            let r = t.radii();
            let mut sum = 0.0;
            for k in 0..r.len() {
                let mass = t.mass(r[k]);
                sum += if k + 1 < r.len() {
                    mass * (1.0 / r[k] - 1.0 / r[k + 1])
                } else {
                    mass / r[k]
                };
            }
            sum
        };
        let n = self.len();
        Ok(if n >= PAR_THRESHOLD {
            (0..n).into_par_iter().map(eval).collect()
        } else {
            (0..n).map(eval).collect()
        })
    }

    /// Dense `L_a = min(K, 1/a)` and `U_a = K - L_a`.
    pub fn split(&self, a: f64) -> Result<SplitKernel> {
        if !(a > 0.0) {
            return input(format!("split radius must be positive, got {a}"));
        }
        let cap = 1.0 / a;
        let lower: Vec<f64> = self.k.iter().map(|&k| k.min(cap)).collect();
        let upper = self.k.iter().zip(&lower).map(|(k, l)| k - l).collect();
        Ok(SplitKernel {
            n: self.len(),
            a,
            lower,
            upper,
        })
    }

    /// `L_a omega` without materialising the split.
    pub fn lower_potential(&self, omega: &AtomicMeasure, a: f64) -> Result<Vec<f64>> {
        if !(a > 0.0) {
            return input(format!("split radius must be positive, got {a}"));
        }
        self.space.check_measure(omega)?;
        let cap = 1.0 / a;
        Ok((0..self.len())
            .map(|x| self.row(x).iter().zip(omega.weights()).map(|(k, w)| k.min(cap) * w).sum())
            .collect())
    }

    /// `U_a omega`.
    pub fn upper_potential(&self, omega: &AtomicMeasure, a: f64) -> Result<Vec<f64>> {
        if !(a > 0.0) {
            return input(format!("split radius must be positive, got {a}"));
        }
        self.space.check_measure(omega)?;
        let cap = 1.0 / a;
        Ok((0..self.len())
            .map(|x| self.row(x).iter().zip(omega.weights()).map(|(k, w)| (k - k.min(cap)) * w).sum())
            .collect())
    }

    /// Checks `(2k)^-1 sup_B L_a w <= L_a w(x) <= 2k inf_B L_a w` over balls
    /// `B = B_a(x)`. With `sample = None` every center and every breakpoint
    /// radius is visited; otherwise `(count, seed)` random pairs.
    pub fn harnack_check(&self, omega: &AtomicMeasure, sample: Option<(usize, u64)>) -> Result<WorstRatio> {
        self.space.check_measure(omega)?;
        let n = self.len();
        let tables: Vec<BallTable> = (0..n)
            .into_par_iter()
            .map(|y| BallTable::new(&self.space, y, omega.weights(), None))
            .collect();
        let two_k = 2.0 * self.kappa();
        let check = |x: usize, a: f64| -> (f64, usize, f64) {
            let lx = tables[x].lower(a);
            if lx <= 0.0 {
                return (0.0, x, a);
            }
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for y in self.space.ball(x, a) {
                let ly = tables[y].lower(a);
                lo = lo.min(ly);
                hi = hi.max(ly);
            }
            if hi == 0.0 {
                return (0.0, x, a);
            }
            let r = (hi / (two_k * lx)).max(lx / (two_k * lo));
            (r, x, a)
        };
        let pairs: Vec<(usize, f64)> = match sample {
            None => (0..n).flat_map(|x| self.space.breakpoints(x).into_iter().map(move |a| (x, a))).collect(),
            Some((count, seed)) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..count)
                    .map(|_| {
                        let x = rng.random_range(0..n);
                        let bp = self.space.breakpoints(x);
                        (x, bp[rng.random_range(0..bp.len())])
                    })
                    .collect()
            }
        };
        let worst = pairs
            .par_iter()
            .map(|&(x, a)| check(x, a))
            .reduce(|| (0.0, 0, 0.0), |p, q| if q.0 > p.0 { q } else { p });
        Ok(WorstRatio {
            ratio: worst.0,
            x: worst.1,
            a: worst.2,
            checked: pairs.len(),
        })
    }

    /// Worst ratio `L_a w(x) / (max(1, b/a) L_b w(x))` over all centers and
    /// pairs of breakpoints.
    pub fn lower_stability_check(&self, omega: &AtomicMeasure) -> Result<WorstRatio> {
        self.space.check_measure(omega)?;
        let n = self.len();
        let worst = (0..n)
            .into_par_iter()
            .map(|x| {
                let t = BallTable::new(&self.space, x, omega.weights(), None);
                let bp = t.radii();
                let vals: Vec<f64> = bp.iter().map(|&a| t.lower(a)).collect();
                let mut best = (0.0, x, 0.0);
                for (i, &a) in bp.iter().enumerate() {
                    for (j, &b) in bp.iter().enumerate() {
                        let rhs = (b / a).max(1.0) * vals[j];
                        if rhs > 0.0 {
                            let r = vals[i] / rhs;
                            if r > best.0 {
                                best = (r, x, a);
                            }
                        }
                    }
                }
                best
            })
            .reduce(|| (0.0, 0, 0.0), |p, q| if q.0 > p.0 { q } else { p });
        Ok(WorstRatio {
            ratio: worst.0,
            x: worst.1,
            a: worst.2,
            checked: n,
        })
    }
}

/// Worst observed ratio of a pointwise check; `<= 1` means pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorstRatio {
    pub ratio: f64,
    pub x: usize,
    pub a: f64,
    pub checked: usize,
}

#[derive(Debug, Clone)]
pub struct SplitKernel {
    n: usize,
    pub a: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SplitKernel {
    pub fn lower(&self, x: usize, y: usize) -> f64 {
        self.lower[x * self.n + y]
    }

    pub fn upper(&self, x: usize, y: usize) -> f64 {
        self.upper[x * self.n + y]
    }

    pub fn lower_row(&self, x: usize) -> &[f64] {
        &self.lower[x * self.n..(x + 1) * self.n]
    }

    pub fn upper_row(&self, x: usize) -> &[f64] {
        &self.upper[x * self.n..(x + 1) * self.n]
    }
}

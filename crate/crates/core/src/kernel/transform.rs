use super::{KernelFamily, KernelModel};
use crate::error::{input, Result};
use crate::space::{AtomicMeasure, KappaPolicy, QuasiMetricSpace};

/// Kernel rescaling `K'(x, y) = s1(x) K(x, y) s2(y)` together with the
/// matching changes of measures and unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct NaimTransform {
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl NaimTransform {
    pub fn new(s1: Vec<f64>, s2: Vec<f64>) -> Result<Self> {
        if s1.len() != s2.len() {
            return input("transform weights s1 and s2 differ in length");
        }
        for (i, (a, b)) in s1.iter().zip(&s2).enumerate() {
            if !(*a > 0.0 && *b > 0.0 && a.is_finite() && b.is_finite()) {
                return input(format!("transform weights must be positive and finite (index {i}: s1 = {a}, s2 = {b})"));
            }
        }
        Ok(NaimTransform { s1, s2 })
    }

    pub fn identity(n: usize) -> Self {
        NaimTransform {
            s1: vec![1.0; n],
            s2: vec![1.0; n],
        }
    }

    pub fn s1(&self) -> &[f64] {
        &self.s1
    }

    pub fn s2(&self) -> &[f64] {
        &self.s2
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if self.s1.len() != n {
            return input(format!("transform has {} weights but the space has {n} points", self.s1.len()));
        }
        Ok(())
    }

    /// The transformed kernel. Its quasi-metric constant is re-estimated.
    pub fn apply(&self, kernel: &KernelModel) -> Result<KernelModel> {
        let n = kernel.len();
        self.check_len(n)?;
        let mut rho = vec![0.0; n * n];
        for x in 0..n {
            for y in 0..n {
                rho[x * n + y] = 1.0 / (self.s1[x] * kernel.k(x, y) * self.s2[y]);
            }
        }
        for x in 0..n {
            for y in (x + 1)..n {
                let (a, b) = (rho[x * n + y], rho[y * n + x]);
                if (a - b).abs() > 1e-12 * a.max(b) {
                    return input("transformed kernel is not symmetric; s1/s2 must be proportional");
                }
            }
        }
        let space = QuasiMetricSpace::new(kernel.space().points().to_vec(), rho, KappaPolicy::Estimate)?;
        Ok(KernelModel::new(space, KernelFamily::Transformed))
    }

    /// `s2^{-1} s1^{-q} sigma`.
    pub fn sigma(&self, sigma: &AtomicMeasure, q: f64) -> Result<AtomicMeasure> {
        self.check_len(sigma.len())?;
        let d: Vec<f64> = self.s1.iter().zip(&self.s2).map(|(a, b)| 1.0 / (b * a.powf(q))).collect();
        sigma.weighted_by(&d)
    }

    /// `omega / s2`, so that `s1 K omega = K' (omega / s2)`.
    pub fn omega(&self, omega: &AtomicMeasure) -> Result<AtomicMeasure> {
        self.check_len(omega.len())?;
        let d: Vec<f64> = self.s2.iter().map(|b| 1.0 / b).collect();
        omega.weighted_by(&d)
    }

    /// `s1 f`.
    pub fn forward(&self, f: &[f64]) -> Vec<f64> {
        f.iter().zip(&self.s1).map(|(f, s)| f * s).collect()
    }

    /// `u = u~ / s1`.
    pub fn back(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.s1).map(|(u, s)| u / s).collect()
    }

    /// Source measure for the weighted norm inequality: `s2^{-q} sigma`.
    pub fn weighted_norm_sigma(&self, sigma: &AtomicMeasure, q: f64) -> Result<AtomicMeasure> {
        self.check_len(sigma.len())?;
        let d: Vec<f64> = self.s2.iter().map(|b| b.powf(-q)).collect();
        sigma.weighted_by(&d)
    }

    /// Target measure for the weighted norm inequality: `s1^{-p} omega`.
    pub fn weighted_norm_omega(&self, omega: &AtomicMeasure, p: f64) -> Result<AtomicMeasure> {
        self.check_len(omega.len())?;
        let d: Vec<f64> = self.s1.iter().map(|a| a.powf(-p)).collect();
        omega.weighted_by(&d)
    }
}

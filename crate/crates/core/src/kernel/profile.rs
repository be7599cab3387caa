use rayon::prelude::*;

use super::KernelModel;
use crate::error::{input, Result};
use crate::space::{AtomicMeasure, BallTable};

/// Ball tables of `sigma` at every center, for the local quantities
/// `M(x, a) = U_a sigma(x)`, `M*(x, a)` and `N(x, a)`.
#[derive(Debug, Clone)]
pub struct LocalProfiles<'k> {
    kernel: &'k KernelModel,
    q: f64,
    tables: Vec<BallTable>,
}

impl<'k> LocalProfiles<'k> {
    pub fn new(kernel: &'k KernelModel, sigma: &AtomicMeasure, q: f64) -> Result<Self> {
        kernel.space().check_measure(sigma)?;
        if !(q > 1.0 && q.is_finite()) {
            return input(format!("exponent q must be > 1, got {q}"));
        }
        let tables = (0..kernel.len())
            .into_par_iter()
            .map(|x| BallTable::new(kernel.space(), x, sigma.weights(), Some(q)))
            .collect();
        Ok(LocalProfiles { kernel, q, tables })
    }

    pub fn kernel(&self) -> &KernelModel {
        self.kernel
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn table(&self, x: usize) -> &BallTable {
        &self.tables[x]
    }

    pub fn at(&self, x: usize) -> LocalProfile<'_> {
        LocalProfile { profiles: self, x }
    }

    #[inline]
    pub(crate) fn m(&self, x: usize, a: f64) -> f64 {
        self.tables[x].upper(a)
    }

    /// `max(M(x, a), max_{y in B_a(x)} M(y, a))`. The center is always
    /// included, which only matters when `rho(x, x) > a`.
    pub(crate) fn m_star(&self, x: usize, a: f64) -> f64 {
        self.kernel
            .space()
            .ball(x, a)
            .map(|y| self.m(y, a))
            .fold(self.m(x, a), f64::max)
    }
}

/// View of the local quantities at one center.
#[derive(Debug, Clone, Copy)]
pub struct LocalProfile<'p> {
    profiles: &'p LocalProfiles<'p>,
    pub x: usize,
}

impl LocalProfile<'_> {
    fn check(a: f64) -> Result<()> {
        if !(a > 0.0) {
            return input(format!("radius must be positive, got {a}"));
        }
        Ok(())
    }

    /// `M(x, a) = sum_{rho_j <= a} sigma_j (1/rho_j - 1/a)`.
    pub fn m(&self, a: f64) -> Result<f64> {
        Self::check(a)?;
        Ok(self.profiles.m(self.x, a))
    }

    /// `M*(x, a) = sup_{y in B_a(x)} M(y, a)`.
    pub fn m_star(&self, a: f64) -> Result<f64> {
        Self::check(a)?;
        Ok(self.profiles.m_star(self.x, a))
    }

    /// `N(x, a) = sum_j sigma_j max(rho_j, a)^{-q} / q`.
    pub fn n(&self, a: f64) -> Result<f64> {
        Self::check(a)?;
        Ok(self.profiles.tables[self.x].tail(a))
    }

    /// `|B_a(x)|_sigma`.
    pub fn mass(&self, a: f64) -> Result<f64> {
        Self::check(a)?;
        Ok(self.profiles.tables[self.x].mass(a))
    }
}

//! Finite quasi-metric spaces and atomic measures.
//!
//! A space is a finite list of points together with a symmetric table of
//! quasi-distances `rho(x, y) = 1 / K(x, y)`. The diagonal `rho(x, x)` is
//! allowed to be positive; zero and infinite entries are rejected so that
//! every potential is a finite sum.
//!
//! Balls are closed: `B_r(x) = { y : rho(x, y) <= r }`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{input, Error, Result};

/// Relative slack used when comparing a measured quasi-metric constant
/// against a declared one.
pub const KAPPA_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Point {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<f64>>,
    /// Distance to the boundary of an ambient domain, when one exists.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl Point {
    pub fn new(id: impl Into<String>) -> Self {
        Point {
            id: id.into(),
            coords: None,
            delta: None,
        }
    }

    pub fn with_coords(id: impl Into<String>, coords: Vec<f64>) -> Self {
        Point {
            id: id.into(),
            coords: Some(coords),
            delta: None,
        }
    }

    pub fn delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }
}

/// How the quasi-metric constant of a new space is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaPolicy {
    /// Use the given constant; construction fails if any triple violates it.
    Declared(f64),
    /// Use `max(1, kappa_hat)` from the exhaustive triple scan.
    Estimate,
    /// Use `max(1, kappa_hat)` from a random sample of triples. The stored
    /// constant is then only a lower bound for the true one.
    Sampled { triples: usize, seed: u64 },
}

/// Result of a triple scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct KappaEstimate {
    pub value: f64,
    /// Ordered triple `(x, y, z)` attaining `value`.
    pub witness: [usize; 3],
    /// `false` when obtained by sampling (a lower bound only).
    pub exact: bool,
}

#[derive(Debug, Clone)]
pub struct QuasiMetricSpace {
    points: Vec<Point>,
    index: HashMap<String, usize>,
    rho: Vec<f64>,
    kappa: f64,
    kappa_estimate: KappaEstimate,
    /// For every point, all point indices sorted by `rho(x, .)`.
    order: Vec<Vec<u32>>,
}

impl QuasiMetricSpace {
    /// Builds a space from a dense row-major `n x n` table.
    pub fn new(points: Vec<Point>, rho: Vec<f64>, policy: KappaPolicy) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return input("a space needs at least one point");
        }
        if rho.len() != n * n {
            return input(format!("rho table has {} entries, expected {}", rho.len(), n * n));
        }
        let mut index = HashMap::with_capacity(n);
        for (i, p) in points.iter().enumerate() {
            if index.insert(p.id.clone(), i).is_some() {
                return input(format!("duplicate point id `{}`", p.id));
            }
        }
        for i in 0..n {
            for j in i..n {
                let a = rho[i * n + j];
                let b = rho[j * n + i];
                if !(a.is_finite() && a > 0.0) {
                    return input(format!(
                        "rho({}, {}) = {a} must be finite and positive",
                        points[i].id, points[j].id
                    ));
                }
                if (a - b).abs() > 1e-12 * a.max(b) {
                    return input(format!(
                        "rho is not symmetric at ({}, {}): {a} vs {b}",
                        points[i].id, points[j].id
                    ));
                }
            }
        }
        // Symmetrize exactly so downstream sums do not depend on orientation.
        let mut rho = rho;
        for i in 0..n {
            for j in (i + 1)..n {
                rho[j * n + i] = rho[i * n + j];
            }
        }
        let order = (0..n)
            .into_par_iter()
            .map(|x| {
                let row = &rho[x * n..(x + 1) * n];
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| row[a as usize].total_cmp(&row[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();

        let mut space = QuasiMetricSpace {
            points,
            index,
            rho,
            kappa: 1.0,
            kappa_estimate: KappaEstimate {
                value: 0.0,
                witness: [0, 0, 0],
                exact: true,
            },
            order,
        };
        match policy {
            KappaPolicy::Declared(kappa) => {
                if !(kappa.is_finite() && kappa >= 1.0) {
                    return input(format!("declared kappa {kappa} must be finite and >= 1"));
                }
                let est = space.estimate_kappa();
                space.kappa = kappa;
                space.kappa_estimate = est;
                space.check_kappa(&est)?;
            }
            KappaPolicy::Estimate => {
                let est = space.estimate_kappa();
                space.kappa = est.value.max(1.0);
                space.kappa_estimate = est;
            }
            KappaPolicy::Sampled { triples, seed } => {
                let est = space.estimate_kappa_sampled(triples, seed);
                space.kappa = est.value.max(1.0);
                space.kappa_estimate = est;
            }
        }
        Ok(space)
    }

    /// Builds a space by evaluating `rho` on every pair `(i, j)` with `i <= j`.
    pub fn from_fn<F>(points: Vec<Point>, policy: KappaPolicy, rho: F) -> Result<Self>
    where
        F: Fn(&Point, &Point, bool) -> f64 + Sync,
    {
        let n = points.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| rho(&points[i], &points[j], i == j)).collect())
            .collect();
        let table = rows.into_iter().flatten().collect();
        Self::new(points, table, policy)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &Point {
        &self.points[i]
    }

    pub fn id(&self, i: usize) -> &str {
        &self.points[i].id
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownPoint(id.to_string()))
    }

    #[inline]
    pub fn rho(&self, x: usize, y: usize) -> f64 {
        self.rho[x * self.len() + y]
    }

    pub fn rho_row(&self, x: usize) -> &[f64] {
        let n = self.len();
        &self.rho[x * n..(x + 1) * n]
    }

    pub fn rho_table(&self) -> &[f64] {
        &self.rho
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// The triple scan performed at construction time.
    pub fn kappa_estimate(&self) -> KappaEstimate {
        self.kappa_estimate
    }

    /// `true` if the stored constant came from sampling.
    pub fn kappa_is_lower_bound(&self) -> bool {
        !self.kappa_estimate.exact
    }

    /// Point indices sorted by distance from `x` (ties broken by index).
    pub fn neighbors_by_distance(&self, x: usize) -> &[u32] {
        &self.order[x]
    }

    /// Indices of the closed ball `B_r(x)`.
    pub fn ball(&self, x: usize, r: f64) -> impl Iterator<Item = usize> + '_ {
        let row = self.rho_row(x);
        self.order[x]
            .iter()
            .map(|&j| j as usize)
            .take_while(move |&j| row[j] <= r)
    }

    /// Mass of the closed ball `B_r(x)` under `measure`.
    pub fn ball_measure(&self, measure: &AtomicMeasure, x: usize, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return input(format!("ball radius must be positive, got {r}"));
        }
        self.check_measure(measure)?;
        if x >= self.len() {
            return input(format!("point index {x} out of range"));
        }
        Ok(self.ball(x, r).map(|j| measure.weight(j)).sum())
    }

    /// Same as [`ball_measure`](Self::ball_measure) addressed by point id.
    pub fn ball_measure_by_id(&self, measure: &AtomicMeasure, id: &str, r: f64) -> Result<f64> {
        let x = self.index_of(id)?;
        self.ball_measure(measure, x, r)
    }

    /// Distinct values of `rho(x, .)` in increasing order.
    pub fn breakpoints(&self, x: usize) -> Vec<f64> {
        let row = self.rho_row(x);
        let mut out: Vec<f64> = Vec::with_capacity(self.len());
        for &j in &self.order[x] {
            let d = row[j as usize];
            if out.last() != Some(&d) {
                out.push(d);
            }
        }
        out
    }

    /// All distinct distances in the space, sorted.
    pub fn all_breakpoints(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.rho.clone();
        all.sort_by(f64::total_cmp);
        all.dedup();
        all
    }

    /// Largest distance in the space.
    pub fn diameter(&self) -> f64 {
        self.rho.iter().copied().fold(0.0, f64::max)
    }

    /// Exhaustive scan of all ordered triples:
    /// `max rho(x,y) / (rho(x,z) + rho(z,y))`.
    pub fn estimate_kappa(&self) -> KappaEstimate {
        let n = self.len();
        let best = (0..n)
            .into_par_iter()
            .map(|x| {
                let rx = self.rho_row(x);
                let mut best = (f64::NEG_INFINITY, [x, x, x]);
                for y in 0..n {
                    let ry = self.rho_row(y);
                    let mut min_sum = f64::INFINITY;
                    let mut arg = 0;
                    for z in 0..n {
                        let s = rx[z] + ry[z];
                        if s < min_sum {
                            min_sum = s;
                            arg = z;
                        }
                    }
                    let ratio = rx[y] / min_sum;
                    if ratio > best.0 {
                        best = (ratio, [x, y, arg]);
                    }
                }
                best
            })
            .reduce(
                || (f64::NEG_INFINITY, [0, 0, 0]),
                |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
            );
        KappaEstimate {
            value: best.0,
            witness: best.1,
            exact: true,
        }
    }

    /// Random-triple lower bound for the quasi-metric constant.
    pub fn estimate_kappa_sampled(&self, triples: usize, seed: u64) -> KappaEstimate {
        let n = self.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = (f64::NEG_INFINITY, [0, 0, 0]);
        for _ in 0..triples.max(1) {
            let (x, y, z) = (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n));
            let ratio = self.rho(x, y) / (self.rho(x, z) + self.rho(z, y));
            if ratio > best.0 {
                best = (ratio, [x, y, z]);
            }
        }
        KappaEstimate {
            value: best.0,
            witness: best.1,
            exact: false,
        }
    }

    /// Fails with the witnessing triple if `est` exceeds the stored constant.
    pub fn check_kappa(&self, est: &KappaEstimate) -> Result<()> {
        if est.value > self.kappa * (1.0 + KAPPA_SLACK) {
            let [x, y, z] = est.witness;
            return Err(Error::QuasiMetricViolation {
                x: self.id(x).to_string(),
                y: self.id(y).to_string(),
                z: self.id(z).to_string(),
                ratio: est.value,
                kappa: self.kappa,
            });
        }
        Ok(())
    }

    pub(crate) fn check_measure(&self, m: &AtomicMeasure) -> Result<()> {
        if m.len() != self.len() {
            return input(format!(
                "measure has {} atoms but the space has {} points",
                m.len(),
                self.len()
            ));
        }
        Ok(())
    }

    pub(crate) fn check_function(&self, f: &[f64], name: &str) -> Result<()> {
        if f.len() != self.len() {
            return input(format!(
                "function `{name}` has {} values but the space has {} points",
                f.len(),
                self.len()
            ));
        }
        Ok(())
    }
}

/// Nonnegative weights on the points of a space, stored densely by point index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomicMeasure {
    weights: Vec<f64>,
}

impl AtomicMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        for (i, &w) in weights.iter().enumerate() {
            if !(w.is_finite() && w >= 0.0) {
                return input(format!("measure weight at index {i} is {w}; must be finite and >= 0"));
            }
        }
        Ok(AtomicMeasure { weights })
    }

    pub fn zero(n: usize) -> Self {
        AtomicMeasure {
            weights: vec![0.0; n],
        }
    }

    pub fn uniform(n: usize, w: f64) -> Result<Self> {
        Self::new(vec![w; n])
    }

    /// Builds a measure from `(id, weight)` pairs; unlisted points get zero.
    pub fn from_pairs<'a, I>(space: &QuasiMetricSpace, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let mut weights = vec![0.0; space.len()];
        for (id, w) in pairs {
            let i = space.index_of(id)?;
            weights[i] += w;
        }
        Self::new(weights)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(i, _)| i)
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        AtomicMeasure {
            weights: self.weights.iter().map(|w| w * lambda).collect(),
        }
    }

    /// `density * self`, pointwise.
    pub fn weighted_by(&self, density: &[f64]) -> Result<Self> {
        if density.len() != self.len() {
            return input("density length does not match the measure");
        }
        Self::new(self.weights.iter().zip(density).map(|(w, d)| w * d).collect())
    }

    /// Restriction to the index set `keep`.
    pub fn restricted(&self, keep: impl IntoIterator<Item = usize>) -> Self {
        let mut weights = vec![0.0; self.len()];
        for i in keep {
            weights[i] = self.weights[i];
        }
        AtomicMeasure { weights }
    }

    /// `f^q d(self)` for a function `f >= 0`.
    pub fn with_density_pow(&self, f: &[f64], q: f64) -> Result<Self> {
        if f.len() != self.len() {
            return input("density length does not match the measure");
        }
        Self::new(
            self.weights
                .iter()
                .zip(f)
                .map(|(w, v)| if *w == 0.0 { 0.0 } else { w * v.powf(q) })
                .collect(),
        )
    }
}

/// Conjugate exponents `1/p + 1/q = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConjugatePair {
    pub p: f64,
    pub q: f64,
}

impl ConjugatePair {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p > 1.0 && q > 1.0 && p.is_finite() && q.is_finite()) {
            return input(format!("exponents must be finite and > 1, got p = {p}, q = {q}"));
        }
        if (1.0 / p + 1.0 / q - 1.0).abs() > 1e-12 {
            return input(format!("p = {p} and q = {q} are not conjugate"));
        }
        Ok(ConjugatePair { p, q })
    }

    pub fn from_q(q: f64) -> Result<Self> {
        if !(q > 1.0 && q.is_finite()) {
            return input(format!("exponent q must be finite and > 1, got {q}"));
        }
        Ok(ConjugatePair { p: q / (q - 1.0), q })
    }

    pub fn from_p(p: f64) -> Result<Self> {
        let pair = Self::from_q(p)?;
        Ok(ConjugatePair { p: pair.q, q: pair.p })
    }

    /// `q^{-1} p^{1-q}`: the largest constant `c` for which `Af <= c f`
    /// still guarantees a solution between `f` and `p f`.
    pub fn small_solution_constant(&self) -> f64 {
        self.p.powf(1.0 - self.q) / self.q
    }

    /// `p q^{p-1}`: the norm-comparison factor.
    pub fn gauge_factor(&self) -> f64 {
        self.p * self.q.powf(self.p - 1.0)
    }
}

/// Sorted step table of a measure as seen from one center.
///
/// Radii are the distinct distances from the center to every point of the
/// space; cumulative sums are taken over closed balls.
#[derive(Debug, Clone)]
pub struct BallTable {
    radii: Vec<f64>,
    cum_mass: Vec<f64>,
    cum_inv: Vec<f64>,
    total_inv: f64,
    cum_pow: Vec<f64>,
    total_pow: f64,
    exponent: Option<f64>,
}

impl BallTable {
    /// Table for center `x` and weights `w`. When `exponent = Some(q)` the
    /// table also tracks `sum w rho^{-q}` so that the tail integral
    /// `N(x, a)` can be evaluated.
    pub fn new(space: &QuasiMetricSpace, x: usize, w: &[f64], exponent: Option<f64>) -> Self {
        let row = space.rho_row(x);
        let mut radii = Vec::new();
        let mut cum_mass = Vec::new();
        let mut cum_inv = Vec::new();
        let mut cum_pow = Vec::new();
        let (mut m, mut inv, mut pw) = (0.0, 0.0, 0.0);
        for &j in space.neighbors_by_distance(x) {
            let j = j as usize;
            let d = row[j];
            let wj = w[j];
            m += wj;
            inv += wj / d;
            if let Some(q) = exponent {
                pw += wj * d.powf(-q);
            }
            if radii.last() == Some(&d) {
                *cum_mass.last_mut().unwrap() = m;
                *cum_inv.last_mut().unwrap() = inv;
                if exponent.is_some() {
                    *cum_pow.last_mut().unwrap() = pw;
                }
            } else {
                radii.push(d);
                cum_mass.push(m);
                cum_inv.push(inv);
                if exponent.is_some() {
                    cum_pow.push(pw);
                }
            }
        }
        BallTable {
            radii,
            cum_mass,
            cum_inv,
            total_inv: inv,
            cum_pow,
            total_pow: pw,
            exponent,
        }
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Number of breakpoints `<= a`.
    #[inline]
    pub fn count_le(&self, a: f64) -> usize {
        self.radii.partition_point(|&r| r <= a)
    }

    #[inline]
    fn at(v: &[f64], k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            v[k - 1]
        }
    }

    /// `|B_a(x)|`.
    pub fn mass(&self, a: f64) -> f64 {
        Self::at(&self.cum_mass, self.count_le(a))
    }

    pub fn total_mass(&self) -> f64 {
        self.cum_mass.last().copied().unwrap_or(0.0)
    }

    /// `sum_{rho <= a} w / rho`.
    pub fn inner_inverse(&self, a: f64) -> f64 {
        Self::at(&self.cum_inv, self.count_le(a))
    }

    pub fn total_inverse(&self) -> f64 {
        self.total_inv
    }

    /// Lower part `L_a mu(x) = int_a^inf |B_r|/r^2 dr`.
    pub fn lower(&self, a: f64) -> f64 {
        let k = self.count_le(a);
        Self::at(&self.cum_mass, k) / a + (self.total_inv - Self::at(&self.cum_inv, k))
    }

    /// Upper part `U_a mu(x) = int_0^a |B_r|/r^2 dr`.
    pub fn upper(&self, a: f64) -> f64 {
        let k = self.count_le(a);
        (Self::at(&self.cum_inv, k) - Self::at(&self.cum_mass, k) / a).max(0.0)
    }

    /// Tail integral `int_a^inf |B_t|/t^{1+q} dt`. Requires an exponent.
    pub fn tail(&self, a: f64) -> f64 {
        let q = self.exponent.expect("ball table built without an exponent");
        let k = self.count_le(a);
        (Self::at(&self.cum_mass, k) * a.powf(-q) + (self.total_pow - Self::at(&self.cum_pow, k))) / q
    }

    /// Coefficients of the affine-in-`1/a` forms valid on the interval
    /// containing `a`: `(mass_in, inverse_in, mass_out_inverse)` where
    /// `U = inverse_in - mass_in / a` and `L = mass_in / a + (total_inv - inverse_in)`.
    pub fn coefficients(&self, a: f64) -> (f64, f64) {
        let k = self.count_le(a);
        (Self::at(&self.cum_mass, k), Self::at(&self.cum_inv, k))
    }

    /// `(mass_in, pow_out)` so that `tail(a) = (mass_in a^{-q} + pow_out) / q`.
    pub fn tail_coefficients(&self, a: f64) -> (f64, f64) {
        let k = self.count_le(a);
        (Self::at(&self.cum_mass, k), self.total_pow - Self::at(&self.cum_pow, k))
    }

    pub fn exponent(&self) -> Option<f64> {
        self.exponent
    }
}

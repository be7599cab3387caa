//! `min sum_j c_j g_j^p  s.t.  A g >= w, g >= 0` through its concave dual
//! `d(l) = l.w - (p - 1) sum_j c_j (s_j / (p c_j))^q`, `s = A^T l`,
//! maximised over `l >= 0` by projected Newton.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProgramOptions {
    /// Target for the relative projected dual gradient.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ProgramOptions {
    fn default() -> Self {
        ProgramOptions { tol: 1e-13, max_iter: 500 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProgramSolution {
    /// Primal feasible point.
    pub g: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Objective at `g`.
    pub value: f64,
    /// Dual objective at `lambda`, a lower bound for the optimum.
    pub dual: f64,
    /// Relative projected dual gradient (primal constraint violation on
    /// free multipliers, complementary slackness elsewhere).
    pub kkt: f64,
    pub iterations: usize,
}

pub(crate) struct Program<'a> {
    /// Row-major `m x n`.
    pub a: &'a [f64],
    pub c: &'a [f64],
    pub w: &'a [f64],
    pub p: f64,
}

impl Program<'_> {
    fn m(&self) -> usize {
        self.w.len()
    }

    fn n(&self) -> usize {
        self.c.len()
    }

    fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    fn s(&self, lambda: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut s = vec![0.0; n];
        for (e, &l) in lambda.iter().enumerate() {
            if l != 0.0 {
                for (j, sj) in s.iter_mut().enumerate() {
                    *sj += self.a[e * n + j] * l;
                }
            }
        }
        s
    }

    fn primal(&self, s: &[f64]) -> Vec<f64> {
        let q = self.q();
        s.iter().zip(self.c).map(|(s, c)| (s / (self.p * c)).max(0.0).powf(q - 1.0)).collect()
    }

    fn ag(&self, g: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..self.m()).map(|e| (0..n).map(|j| self.a[e * n + j] * g[j]).sum()).collect()
    }

    fn objective(&self, g: &[f64]) -> f64 {
        g.iter().zip(self.c).map(|(g, c)| c * g.powf(self.p)).sum()
    }

    /// `(d, g, grad)` at `lambda`.
    fn dual(&self, lambda: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let g = self.primal(&self.s(lambda));
        let lw: f64 = lambda.iter().zip(self.w).map(|(l, w)| l * w).sum();
        let d = lw - (self.p - 1.0) * self.objective(&g);
        let ag = self.ag(&g);
        let grad = self.w.iter().zip(&ag).map(|(w, a)| w - a).collect();
        (d, g, grad)
    }

    fn kkt(&self, lambda: &[f64], grad: &[f64]) -> f64 {
        let scale = self.w.iter().copied().fold(0.0, f64::max);
        lambda
            .iter()
            .zip(grad)
            .map(|(l, g)| if *l > 0.0 { g.abs() } else { g.max(0.0) })
            .fold(0.0, f64::max)
            / scale
    }

    pub fn solve(&self, opts: ProgramOptions) -> ProgramSolution {
        let (m, n) = (self.m(), self.n());
        let q = self.q();
        // Start on the ray through the all-ones multiplier at its best scale.
        let mut lambda = vec![1.0; m];
        let g1 = self.primal(&self.s(&lambda));
        let lw: f64 = self.w.iter().sum();
        let t = (lw / (self.p * self.objective(&g1))).powf(1.0 / (q - 1.0));
        lambda.iter_mut().for_each(|l| *l = t);

        let (mut d, mut g, mut grad) = self.dual(&lambda);
        let mut kkt = self.kkt(&lambda, &grad);
        let mut it = 0;
        while it < opts.max_iter && kkt > opts.tol {
            it += 1;
            let s = self.s(&lambda);
            let free: Vec<usize> = (0..m).filter(|&e| lambda[e] > 0.0 || grad[e] > 0.0).collect();
            let dj: Vec<f64> = (0..n).map(|j| if s[j] > 0.0 { (q - 1.0) * g[j] / s[j] } else { 0.0 }).collect();
            let k = free.len();
            let mut h = DMatrix::<f64>::zeros(k, k);
            for (r, &e) in free.iter().enumerate() {
                for (c, &f) in free.iter().enumerate().skip(r) {
                    let v: f64 = (0..n).map(|j| self.a[e * n + j] * dj[j] * self.a[f * n + j]).sum();
                    h[(r, c)] = v;
                    h[(c, r)] = v;
                }
            }
            let rhs = DVector::from_iterator(k, free.iter().map(|&e| grad[e]));
            let trace = h.trace().max(f64::MIN_POSITIVE);
            let mut step = None;
            let mut ridge = 0.0;
            for _ in 0..8 {
                let mut hr = h.clone();
                for i in 0..k {
                    hr[(i, i)] += ridge;
                }
                if let Some(ch) = hr.cholesky() {
                    step = Some(ch.solve(&rhs));
                    break;
                }
                ridge = if ridge == 0.0 { 1e-14 * trace } else { ridge * 100.0 };
            }
            let mut dir = vec![0.0; m];
            if let Some(st) = step {
                for (r, &e) in free.iter().enumerate() {
                    dir[e] = st[r];
                }
            }
            let mut accepted = self.search(&lambda, d, &grad, &dir);
            if accepted.is_none() {
                // Scaled projected gradient.
                let dir: Vec<f64> = grad.iter().map(|g| g / trace * k as f64).collect();
                accepted = self.search(&lambda, d, &grad, &dir);
            }
            let Some((l_new, d_new, g_new, grad_new)) = accepted else {
                break;
            };
            let progress = d_new - d;
            lambda = l_new;
            d = d_new;
            g = g_new;
            grad = grad_new;
            kkt = self.kkt(&lambda, &grad);
            if progress <= 1e-16 * d.abs() && kkt <= opts.tol.sqrt() {
                break;
            }
        }
        // Scale the primal point onto the feasible set.
        let ag = self.ag(&g);
        let scale = self
            .w
            .iter()
            .zip(&ag)
            .map(|(w, a)| if *w > 0.0 { w / a } else { 0.0 })
            .fold(0.0, f64::max);
        let g: Vec<f64> = g.iter().map(|v| v * scale).collect();
        ProgramSolution {
            value: self.objective(&g),
            g,
            lambda,
            dual: d,
            kkt,
            iterations: it,
        }
    }

    #[allow(clippy::type_complexity)]
    fn search(&self, lambda: &[f64], d: f64, grad: &[f64], dir: &[f64]) -> Option<(Vec<f64>, f64, Vec<f64>, Vec<f64>)> {
        let mut t = 1.0;
        for _ in 0..60 {
            let cand: Vec<f64> = lambda.iter().zip(dir).map(|(l, v)| (l + t * v).max(0.0)).collect();
            let gain: f64 = cand.iter().zip(lambda).zip(grad).map(|((c, l), g)| (c - l) * g).sum();
            if gain <= 0.0 {
                if cand == lambda {
                    return None;
                }
                t *= 0.5;
                continue;
            }
            let (dn, gn, gr) = self.dual(&cand);
            if dn >= d + 1e-4 * gain {
                return Some((cand, dn, gn, gr));
            }
            t *= 0.5;
        }
        None
    }
}

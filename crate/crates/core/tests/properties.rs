use proptest::prelude::*;

use qms_core::capacity::{capacity, capacity_ae};
use qms_core::criteria::{
    epsilon_threshold, infinitesimal_constant, pointwise_constant, testing_constant, weighted_norm_constant, weighted_norm_lower_bound,
    weighted_norm_p2,
};
use qms_core::dirichlet::{naim1d_rho, solve_bvp_1d, DensitySpec, Interval1DProblem};
use qms_core::solver::{apply_a, picard_solve, znorm, SolveOptions, ZNormOptions};
use qms_core::{make_kernel, AtomicMeasure, ConjugatePair, KappaPolicy, KernelFamily, KernelModel, KernelOptions, Point, QuasiMetricSpace};

#[derive(Debug, Clone)]
struct Instance {
    coords: Vec<(f64, f64)>,
    alpha: f64,
    sigma: Vec<f64>,
    omega: Vec<f64>,
    q: f64,
}

impl Instance {
    fn kernel(&self) -> KernelModel {
        let pts = self
            .coords
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Point::with_coords(format!("p{i}"), vec![x, y]))
            .collect();
        let opts = KernelOptions {
            self_distance: (self.coords.len() == 1).then_some(0.05),
            ..Default::default()
        };
        make_kernel(&KernelFamily::Riesz { n: 2, alpha: self.alpha }, pts, opts).unwrap()
    }

    fn sigma(&self) -> AtomicMeasure {
        AtomicMeasure::new(self.sigma.clone()).unwrap()
    }

    fn omega(&self) -> AtomicMeasure {
        AtomicMeasure::new(self.omega.clone()).unwrap()
    }

    fn n(&self) -> usize {
        self.coords.len()
    }
}

fn distinct(coords: &[(f64, f64)]) -> bool {
    for (i, a) in coords.iter().enumerate() {
        for b in &coords[..i] {
            if (a.0 - b.0).hypot(a.1 - b.1) < 1e-3 {
                return false;
            }
        }
    }
    true
}

fn weight() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 4 => 0.05f64..1.0]
}

fn instance(max_n: usize) -> impl Strategy<Value = Instance> {
    (1..=max_n)
        .prop_flat_map(|n| {
            (
                prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), n),
                0.3f64..1.7,
                prop::collection::vec(weight(), n),
                prop::collection::vec(weight(), n),
                1.3f64..4.0,
            )
        })
        .prop_filter_map("distinct points and nonzero measures", |(coords, alpha, sigma, omega, q)| {
            let nonzero = |w: &[f64]| w.iter().any(|v| *v > 0.0);
            (distinct(&coords) && nonzero(&sigma) && nonzero(&omega)).then_some(Instance {
                coords,
                alpha,
                sigma,
                omega,
                q,
            })
        })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn solve_opts() -> SolveOptions {
    SolveOptions {
        tol: 1e-13,
        max_iter: 1_000_000,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ball_mass_is_a_right_continuous_step_function(inst in instance(12)) {
        let k = inst.kernel();
        let space = k.space();
        let ones = AtomicMeasure::uniform(inst.n(), 1.0).unwrap();
        for x in 0..inst.n() {
            let bps = space.breakpoints(x);
            let mut prev = 0.0;
            for (i, &b) in bps.iter().enumerate() {
                let at = space.ball_measure(&ones, x, b).unwrap();
                let below = space.ball_measure(&ones, x, b * (1.0 - 1e-12)).unwrap();
                prop_assert!(at > below);
                prop_assert_eq!(below, prev);
                let next = bps.get(i + 1).copied().unwrap_or(2.0 * b);
                let mid = space.ball_measure(&ones, x, 0.5 * (b + next)).unwrap();
                prop_assert_eq!(mid, at);
                prev = at;
            }
        }
    }

    #[test]
    fn kappa_is_scale_invariant_and_never_violated(inst in instance(12), lambda in 0.01f64..100.0) {
        let k = inst.kernel();
        let space = k.space();
        let n = inst.n();
        let scaled: Vec<f64> = space.rho_table().iter().map(|r| r * lambda).collect();
        let s2 = QuasiMetricSpace::new(space.points().to_vec(), scaled, KappaPolicy::Estimate).unwrap();
        prop_assert!(rel(s2.kappa(), space.kappa()) < 1e-12);
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    prop_assert!(space.rho(x, y) <= space.kappa() * (space.rho(x, z) + space.rho(z, y)) * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn lower_part_is_monotone_stable(inst in instance(10)) {
        let k = inst.kernel();
        let omega = inst.omega();
        let radii = k.space().all_breakpoints();
        let lower: Vec<Vec<f64>> = radii.iter().map(|&a| k.lower_potential(&omega, a).unwrap()).collect();
        for (i, &a) in radii.iter().enumerate() {
            for (j, &b) in radii.iter().enumerate() {
                let c = (b / a).max(1.0);
                for x in 0..inst.n() {
                    prop_assert!(lower[i][x] <= c * lower[j][x] * (1.0 + 1e-12));
                }
            }
        }
        prop_assert!(k.harnack_check(&omega, None).unwrap().ratio <= 1.0 + 1e-12);
    }

    #[test]
    fn picard_is_monotone_and_minimal(inst in instance(10), frac in 0.0f64..1.0, t_frac in 0.05f64..1.0) {
        let k = inst.kernel();
        let sigma = inst.sigma();
        let q = inst.q;
        // A supersolution: v >= A v + f once t^{q-1} <= min v / A v.
        let v0: Vec<f64> = inst.omega.iter().map(|w| 0.5 + w).collect();
        let av = apply_a(&k, &sigma, q, &v0).unwrap();
        let m = v0.iter().zip(&av).map(|(v, a)| if *a > 0.0 { v / a } else { f64::INFINITY }).fold(f64::INFINITY, f64::min);
        let t = if m.is_finite() { (t_frac * m).powf(1.0 / (q - 1.0)) } else { 1.0 };
        let v: Vec<f64> = v0.iter().map(|x| x * t).collect();
        let avt = apply_a(&k, &sigma, q, &v).unwrap();
        let f: Vec<f64> = v.iter().zip(&avt).map(|(v, a)| frac * (v - a).max(0.0)).collect();
        let rep = picard_solve(&k, &sigma, q, &f, solve_opts()).unwrap();
        prop_assert!(rep.monotone);
        prop_assert!(rep.converged());
        for (u, v) in rep.u.iter().zip(&v) {
            prop_assert!(*u <= v + 1e-9 * v.max(1.0));
        }
    }

    #[test]
    fn solvable_set_is_convex(inst in instance(8), s in 0.01f64..1.0) {
        let k = inst.kernel();
        let sigma = inst.sigma();
        let q = inst.q;
        let f: Vec<f64> = inst.omega.iter().map(|w| s * w).collect();
        let g: Vec<f64> = inst.sigma.iter().map(|w| s * (1.0 - w)).collect();
        let opts = solve_opts();
        if picard_solve(&k, &sigma, q, &f, opts).unwrap().converged() && picard_solve(&k, &sigma, q, &g, opts).unwrap().converged() {
            for t in [0.25, 0.5, 0.75] {
                let h: Vec<f64> = f.iter().zip(&g).map(|(a, b)| t * a + (1.0 - t) * b).collect();
                prop_assert!(picard_solve(&k, &sigma, q, &h, opts).unwrap().converged());
            }
        }
    }

    #[test]
    fn znorm_within_local_bound(inst in instance(6)) {
        let k = inst.kernel();
        let sigma = inst.sigma();
        let f: Vec<f64> = inst.omega.iter().map(|w| w + 0.1).collect();
        let z = znorm(&k, &sigma, inst.q, &f, ZNormOptions { tol: 1e-6, solve: solve_opts(), ..Default::default() }).unwrap();
        prop_assert!(z.lower <= z.upper);
        if z.local_norm.is_finite() {
            let pq = ConjugatePair::from_q(inst.q).unwrap();
            prop_assert!(rel(z.local_upper, pq.p * pq.q.powf(pq.p - 1.0) * z.local_norm) < 1e-12);
            prop_assert!(z.lower <= z.local_upper * (1.0 + 1e-9));
        }
    }

    #[test]
    fn criteria_constants_are_homogeneous(inst in instance(10), lambda in 0.1f64..10.0) {
        let k = inst.kernel();
        let sigma = inst.sigma();
        let q = inst.q;
        let (o, ol) = (inst.omega(), inst.omega().scaled(lambda));
        let pw = pointwise_constant(&k, &sigma, q, &o).unwrap().value;
        let pwl = pointwise_constant(&k, &sigma, q, &ol).unwrap().value;
        prop_assert!(rel(pwl, lambda.powf(q - 1.0) * pw) < 1e-9);
        let te = testing_constant(&k, &sigma, q, &o).unwrap().value;
        let tel = testing_constant(&k, &sigma, q, &ol).unwrap().value;
        prop_assert!(rel(tel, lambda.powf(q - 1.0) * te) < 1e-9);
        let inf = infinitesimal_constant(&k, &sigma, q, &o).unwrap().value;
        let infl = infinitesimal_constant(&k, &sigma, q, &ol).unwrap().value;
        prop_assert!(rel(infl, lambda * inf) < 1e-9);
        let w = weighted_norm_constant(&k, &sigma, &o, 2.0).unwrap().value;
        let wl = weighted_norm_constant(&k, &sigma, &ol, 2.0).unwrap().value;
        prop_assert!(rel(wl, lambda * w) < 1e-8);
    }

    #[test]
    fn lower_bound_mode_stays_below_exact(inst in instance(10)) {
        let k = inst.kernel();
        let exact = weighted_norm_p2(&k, &inst.sigma(), &inst.omega()).unwrap();
        let lower = weighted_norm_lower_bound(&k, &inst.sigma(), &inst.omega(), 2.0).unwrap();
        prop_assert!(exact.value <= exact.upper * (1.0 + 1e-12));
        prop_assert!(lower.value <= exact.upper * (1.0 + 1e-9));
    }

    #[test]
    fn capacity_duality_feasibility_and_scaling(inst in instance(10), p in 1.3f64..4.0, lambda in 0.2f64..5.0, pick in prop::collection::vec(any::<bool>(), 10)) {
        let k = inst.kernel();
        let n = inst.n();
        let sigma = AtomicMeasure::new(inst.sigma.iter().map(|w| w + 0.05).collect()).unwrap();
        let mut set: Vec<usize> = (0..n).filter(|&i| pick[i]).collect();
        if set.is_empty() {
            set.push(0);
        }
        let c = capacity(&k, &sigma, p, &set, None).unwrap();
        prop_assert!(!c.infeasible);
        prop_assert!(c.dual_bound <= c.value * (1.0 + 1e-12));
        prop_assert!(c.value - c.dual_bound <= 1e-6 * c.value);
        let g = c.dense(n);
        prop_assert!(g.iter().all(|v| *v >= 0.0));
        let pot = k.apply_with(&sigma, &g);
        for &e in &set {
            prop_assert!(pot[e] >= 1.0 - 1e-8);
        }
        // Nested sets.
        let mut bigger = set.clone();
        bigger.extend((0..n).filter(|i| !set.contains(i)).take(2));
        let cb = capacity(&k, &sigma, p, &bigger, None).unwrap();
        prop_assert!(c.value <= cb.value * (1.0 + 1e-8));
        // K -> lambda K.
        let rho: Vec<f64> = k.space().rho_table().iter().map(|r| r / lambda).collect();
        let kl = KernelModel::custom(QuasiMetricSpace::new(k.space().points().to_vec(), rho, KappaPolicy::Estimate).unwrap());
        let cl = capacity(&kl, &sigma, p, &set, None).unwrap();
        prop_assert!(rel(cl.value, lambda.powf(-p) * c.value) < 1e-8);
        // Full support: the a.e. and everywhere definitions agree.
        let ae = capacity_ae(&k, &sigma, p, &set).unwrap();
        prop_assert!(rel(ae.value, c.value) < 1e-12);
    }

    #[test]
    fn interval_rho_is_a_metric(x in 0.001f64..0.999, y in 0.001f64..0.999, z in 0.001f64..0.999) {
        let r = naim1d_rho(x, y).unwrap();
        prop_assert!(r <= naim1d_rho(x, z).unwrap() + naim1d_rho(z, y).unwrap() + 1e-12);
        prop_assert_eq!(r, naim1d_rho(y, x).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn threshold_is_monotone_in_the_measures(
        sigma in prop::collection::vec(0.0f64..1.0, 12),
        omega in prop::collection::vec(0.0f64..1.0, 12),
        extra in prop::collection::vec(0.0f64..0.5, 12),
        q in 1.5f64..3.0,
    ) {
        prop_assume!(sigma.iter().any(|v| *v > 0.0) && omega.iter().any(|v| *v > 0.0));
        let grid: Vec<f64> = (0..12).map(|i| (i as f64 + 0.5) / 12.0).collect();
        let bigger = |w: &[f64]| -> Vec<f64> { w.iter().zip(&extra).map(|(a, b)| a + b).collect() };
        let thr = |s: &[f64], o: &[f64]| {
            let p = Interval1DProblem::new(grid.clone(), s.to_vec(), o.to_vec(), q, 1.0).unwrap();
            let k = p.green_kernel().unwrap();
            let f = k.potential(&p.omega).unwrap();
            epsilon_threshold(&k, &p.sigma, q, &f, 1e-4, solve_opts()).unwrap()
        };
        let base = thr(&sigma, &omega);
        let more_sigma = thr(&bigger(&sigma), &omega);
        let more_omega = thr(&sigma, &bigger(&omega));
        prop_assert!(more_sigma.lower <= base.upper);
        prop_assert!(more_omega.lower <= base.upper);
    }
}

#[test]
fn green_reproduces_polynomial_loads() {
    // -u'' = x gives (x - x^3) / 6; -u'' = x - x^2 gives x/12 - x^3/6 + x^4/12.
    let cases: [(DensitySpec, fn(f64) -> f64); 2] = [
        (
            DensitySpec::Power {
                coefficient: 1.0,
                left: 1.0,
                right: 0.0,
            },
            |x| (x - x * x * x) / 6.0,
        ),
        (
            DensitySpec::Power {
                coefficient: 1.0,
                left: 1.0,
                right: 1.0,
            },
            |x| x / 12.0 - x.powi(3) / 6.0 + x.powi(4) / 12.0,
        ),
    ];
    for (load, exact) in cases {
        let mut prev: Option<f64> = None;
        for cells in [32, 64, 128] {
            let p = Interval1DProblem::from_specs(cells, DensitySpec::Zero, load.clone(), 2.0, 1.0).unwrap();
            let r = solve_bvp_1d(&p, SolveOptions::default()).unwrap();
            let err = p.grid.iter().zip(&r.u).map(|(x, u)| (u - exact(*x)).abs()).fold(0.0, f64::max);
            let h = 1.0 / cells as f64;
            assert!(err <= h * h, "cells {cells}: error {err}");
            if let Some(e) = prev {
                assert!((e / err).log2() > 1.9);
            }
            prev = Some(err);
        }
    }
}

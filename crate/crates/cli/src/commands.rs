use serde::Serialize;
use serde_json::{json, Value};

use qms_core::capacity::{capacity, capacity_ae, capacity_ball_bounds_check, capacity_condition_constant};
use qms_core::criteria::{verdict, RadiusWindow, StructuralOptions, VerdictOptions, Witnessed};
use qms_core::dirichlet::{
    dirichlet_battery, solve_bvp_1d, solve_bvp_1d_affine_boundary, BatteryOptions, Interval1DProblem,
};
use qms_core::solver::{
    guaranteed_solve_iterated, guaranteed_solve_small, picard_solve, znorm, zprime_norm, SolveOptions, ZNormOptions,
    ZPrimeOptions,
};
use qms_core::{
    make_kernel, AtomicMeasure, ConjugatePair, Error, KappaPolicy, KernelFamily, KernelModel, KernelOptions, Point,
    QuasiMetricSpace,
};

use crate::output::{fmt_f64, Table};
use crate::scenario::{
    DirichletSpec, KappaSpec, RhoSpec, Scenario, SolveMode, SolveSpec, SourceSpec, WindowSpec,
};

/// Failures, split by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad scenario or arguments (exit 1).
    Input(String),
    /// A declared constant or a hypothesis was refuted (exit 2).
    Refuted(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::QuasiMetricViolation { .. } | Error::HypothesisNotMet { .. } => Failure::Refuted(e),
            other => Failure::Input(other.to_string()),
        }
    }
}

type Res<T> = std::result::Result<T, Failure>;

fn missing<T>(what: &str) -> Res<T> {
    Err(Failure::Input(format!("the scenario has no `{what}`")))
}

pub struct Outcome {
    pub result: Value,
    pub tables: Vec<Table>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

pub struct Context<'a> {
    pub scenario: &'a Scenario,
    pub seed: u64,
}

impl Context<'_> {
    fn kernel(&self) -> Res<KernelModel> {
        let Some(space) = &self.scenario.space else {
            return missing("space");
        };
        let Some(spec) = &self.scenario.kernel else {
            return missing("kernel");
        };
        let points: Vec<Point> = space
            .points
            .iter()
            .map(|p| Point {
                id: p.id.clone(),
                coords: p.coords.clone(),
                delta: p.delta,
            })
            .collect();
        let kappa = match spec.kappa {
            None | Some(KappaSpec::Estimate) => KappaPolicy::Estimate,
            Some(KappaSpec::Declared { value }) => KappaPolicy::Declared(value),
            Some(KappaSpec::Sampled { triples }) => KappaPolicy::Sampled { triples, seed: self.seed },
        };
        let need = |v: Option<usize>, name: &str| v.ok_or_else(|| Failure::Input(format!("kernel `{}` needs `{name}`", spec.family)));
        let family = match spec.family.as_str() {
            "custom" => None,
            "riesz" => Some(KernelFamily::Riesz {
                n: need(spec.n, "n")?,
                alpha: spec
                    .alpha
                    .ok_or_else(|| Failure::Input("kernel `riesz` needs `alpha`".into()))?,
            }),
            "green1d" => Some(KernelFamily::Green1d),
            "naim1d" => Some(KernelFamily::Naim1d),
            "modelC11" => Some(KernelFamily::ModelC11 { n: need(spec.n, "n")? }),
            "poisson" => Some(KernelFamily::Poisson { n: need(spec.n, "n")? }),
            other => {
                return Err(Failure::Input(format!(
                    "unknown kernel family `{other}` (expected custom, riesz, green1d, naim1d, modelC11 or poisson)"
                )))
            }
        };
        match (family, &space.rho) {
            (Some(f), None) => Ok(make_kernel(
                &f,
                points,
                KernelOptions {
                    kappa,
                    self_distance: spec.self_distance,
                },
            )?),
            (Some(_), Some(_)) => Err(Failure::Input(format!(
                "`space.rho` is only read by the custom family, not `{}`",
                spec.family
            ))),
            (None, None) => Err(Failure::Input("the custom family needs `space.rho`".into())),
            (None, Some(rho)) => {
                let n = points.len();
                let table = match rho {
                    RhoSpec::Upper(upper) => {
                        if upper.len() != n * (n + 1) / 2 {
                            return Err(Failure::Input(format!(
                                "`space.rho.upper` has {} entries, expected {} for {n} points",
                                upper.len(),
                                n * (n + 1) / 2
                            )));
                        }
                        let mut t = vec![0.0; n * n];
                        let mut it = upper.iter();
                        for i in 0..n {
                            for j in i..n {
                                let v = *it.next().unwrap();
                                t[i * n + j] = v;
                                t[j * n + i] = v;
                            }
                        }
                        t
                    }
                    RhoSpec::EuclideanPower { power, diagonal } => {
                        let mut t = vec![*diagonal; n * n];
                        for i in 0..n {
                            for j in 0..n {
                                if i == j {
                                    continue;
                                }
                                let (Some(a), Some(b)) = (&points[i].coords, &points[j].coords) else {
                                    return Err(Failure::Input("`euclideanPower` needs coordinates on every point".into()));
                                };
                                if a.len() != b.len() {
                                    return Err(Failure::Input("points have different dimensions".into()));
                                }
                                let d = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                                t[i * n + j] = d.powf(*power);
                            }
                        }
                        t
                    }
                };
                Ok(KernelModel::custom(QuasiMetricSpace::new(points, table, kappa)?))
            }
        }
    }

    fn measure(&self, kernel: &KernelModel, name: &str) -> Res<AtomicMeasure> {
        let Some(atoms) = self.scenario.measures.get(name) else {
            let known: Vec<&str> = self.scenario.measures.keys().map(String::as_str).collect();
            return Err(Failure::Input(format!("unknown measure `{name}` (defined: {})", known.join(", "))));
        };
        Ok(AtomicMeasure::from_pairs(
            kernel.space(),
            atoms.iter().map(|a| (a.id.as_str(), a.weight)),
        )?)
    }

    fn named(&self, kernel: &KernelModel, field: &str, value: &Option<String>) -> Res<AtomicMeasure> {
        match value {
            Some(name) => self.measure(kernel, name),
            None => missing(field),
        }
    }

    fn q(&self) -> Res<ConjugatePair> {
        Ok(match (self.scenario.q, self.scenario.p) {
            (Some(q), None) => ConjugatePair::from_q(q)?,
            (None, Some(p)) => ConjugatePair::from_p(p)?,
            (Some(q), Some(p)) => ConjugatePair::new(p, q)?,
            (None, None) => return missing("q"),
        })
    }

    fn source(&self, kernel: &KernelModel) -> Res<Vec<f64>> {
        let n = kernel.len();
        match &self.scenario.f {
            None => missing("f"),
            Some(SourceSpec::Constant { value }) => Ok(vec![*value; n]),
            Some(SourceSpec::Potential { measure, scale }) => {
                let m = self.measure(kernel, measure)?;
                Ok(kernel.potential(&m)?.into_iter().map(|v| v * scale).collect())
            }
            Some(SourceSpec::Values { values }) => {
                let mut f = vec![0.0; n];
                for v in values {
                    f[kernel.space().index_of(&v.id)?] = v.value;
                }
                Ok(f)
            }
        }
    }
}

fn solve_options(spec: Option<&SolveSpec>, base: SolveOptions) -> SolveOptions {
    let Some(s) = spec else { return base };
    SolveOptions {
        tol: s.tol.unwrap_or(base.tol),
        max_iter: s.max_iter.unwrap_or(base.max_iter),
        blowup: s.blowup.or(base.blowup),
        growth_window: s.growth_window.unwrap_or(base.growth_window),
    }
}

fn ids(kernel: &KernelModel) -> Vec<String> {
    kernel.space().points().iter().map(|p| p.id.clone()).collect()
}

fn witness_row(name: &str, kernel: &KernelModel, w: &Witnessed) -> Vec<String> {
    vec![
        name.to_string(),
        fmt_f64(w.value),
        w.x.map(|x| kernel.space().id(x).to_string()).unwrap_or_default(),
        w.a.map(fmt_f64).unwrap_or_default(),
    ]
}

pub fn check_kernel(ctx: &Context) -> Res<Outcome> {
    let kernel = ctx.kernel()?;
    let space = kernel.space();
    let est = space.kappa_estimate();
    let mut result = json!({
        "family": to_value(kernel.family()),
        "points": kernel.len(),
        "kappa": kernel.kappa(),
        "kappaEstimate": to_value(&est),
        "kappaLowerBoundOnly": space.kappa_is_lower_bound(),
        "diameter": space.diameter(),
    });
    let witness: Vec<String> = est.witness.iter().map(|&i| space.id(i).to_string()).collect();
    result["kappaWitness"] = json!(witness);
    if let Some(name) = &ctx.scenario.omega {
        let omega = ctx.measure(&kernel, name)?;
        let h = kernel.harnack_check(&omega, None)?;
        let l = kernel.lower_stability_check(&omega)?;
        result["harnack"] = json!({ "worstRatio": h.ratio, "x": space.id(h.x), "a": h.a, "checked": h.checked });
        result["lowerStability"] = json!({ "worstRatio": l.ratio, "x": space.id(l.x), "a": l.a, "checked": l.checked });
    }
    let mut rho = Table::new("rho", &["x", "y", "rho"]);
    for i in 0..kernel.len() {
        for j in i..kernel.len() {
            rho.push(vec![space.id(i).into(), space.id(j).into(), fmt_f64(space.rho(i, j))]);
        }
    }
    Ok(Outcome { result, tables: vec![rho] })
}

pub fn solve(ctx: &Context) -> Res<Outcome> {
    let kernel = ctx.kernel()?;
    let sigma = ctx.named(&kernel, "sigma", &ctx.scenario.sigma)?;
    let pq = ctx.q()?;
    let f = ctx.source(&kernel)?;
    let spec = ctx.scenario.solve.unwrap_or_default();
    let opts = solve_options(Some(&spec), SolveOptions::default());
    let report = match spec.mode {
        SolveMode::Picard => picard_solve(&kernel, &sigma, pq.q, &f, opts)?,
        SolveMode::Small => guaranteed_solve_small(&kernel, &sigma, pq.q, &f, opts)?,
        SolveMode::Iterated => guaranteed_solve_iterated(&kernel, &sigma, pq.q, &f, opts)?,
    };
    let mut table = Table::new("solution", &["id", "f", "u"]);
    for (i, id) in ids(&kernel).into_iter().enumerate() {
        table.push(vec![id, fmt_f64(f[i]), fmt_f64(report.u[i])]);
    }
    let mut result = to_value(&report);
    result["sup"] = json!(report.sup());
    Ok(Outcome { result, tables: vec![table] })
}

pub fn znorm_cmd(ctx: &Context) -> Res<Outcome> {
    let kernel = ctx.kernel()?;
    let sigma = ctx.named(&kernel, "sigma", &ctx.scenario.sigma)?;
    let pq = ctx.q()?;
    let f = ctx.source(&kernel)?;
    let spec = ctx.scenario.znorm.unwrap_or_default();
    let base = ZNormOptions::default();
    let opts = ZNormOptions {
        tol: spec.tol.unwrap_or(base.tol),
        solve: solve_options(ctx.scenario.solve.as_ref(), base.solve),
        max_bisection_steps: spec.max_bisection_steps.unwrap_or(base.max_bisection_steps),
        iterated_steps: spec.iterated_steps.unwrap_or(base.iterated_steps),
    };
    let bracket = znorm(&kernel, &sigma, pq.q, &f, opts)?;
    let mut result = json!({ "znorm": to_value(&bracket) });
    let mut tables = Vec::new();
    if spec.dual {
        let d = zprime_norm(&kernel, &sigma, pq.q, &f, ZPrimeOptions::default())?;
        let mut t = Table::new("dual-minimizer", &["id", "g", "h"]);
        for (i, id) in ids(&kernel).into_iter().enumerate() {
            t.push(vec![id, fmt_f64(f[i]), fmt_f64(d.minimizer[i])]);
        }
        tables.push(t);
        result["dual"] = to_value(&d);
    }
    Ok(Outcome { result, tables })
}

pub fn criteria(ctx: &Context) -> Res<Outcome> {
    let kernel = ctx.kernel()?;
    let sigma = ctx.named(&kernel, "sigma", &ctx.scenario.sigma)?;
    let omega = ctx.named(&kernel, "omega", &ctx.scenario.omega)?;
    let pq = ctx.q()?;
    let spec = ctx.scenario.criteria.unwrap_or_default();
    let base = VerdictOptions::default();
    let opts = VerdictOptions {
        epsilon: spec.epsilon.unwrap_or(base.epsilon),
        solve: solve_options(ctx.scenario.solve.as_ref(), base.solve),
        structural: StructuralOptions {
            window: spec.window.map(|w| match w {
                WindowSpec::Unbounded => RadiusWindow::Unbounded,
                WindowSpec::UpTo { radius } => RadiusWindow::UpTo(radius),
            }),
            delta: spec.delta.unwrap_or(base.structural.delta),
        },
        threshold: spec.threshold.unwrap_or(base.threshold),
        threshold_tol: spec.threshold_tol.unwrap_or(base.threshold_tol),
        threshold_solve: base.threshold_solve,
    };
    let report = verdict(&kernel, &sigma, pq.q, &omega, opts)?;
    let mut t = Table::new("witnesses", &["condition", "value", "x", "a"]);
    t.push(witness_row("pointwiseC", &kernel, &report.pointwise_c));
    t.push(witness_row("infinitesimalC", &kernel, &report.infinitesimal_c));
    t.push(witness_row("testingC", &kernel, &report.testing_c));
    for (name, e) in &report.structural {
        let w = Witnessed {
            value: e.constant,
            x: e.x,
            a: e.a,
        };
        t.push(witness_row(name, &kernel, &w));
    }
    let mut tables = vec![t];
    if let Some(u) = &report.solution {
        let mut s = Table::new("solution", &["id", "u"]);
        for (i, id) in ids(&kernel).into_iter().enumerate() {
            s.push(vec![id, fmt_f64(u[i])]);
        }
        tables.push(s);
    }
    Ok(Outcome {
        result: to_value(&report),
        tables,
    })
}

pub fn capacity_cmd(ctx: &Context) -> Res<Outcome> {
    let kernel = ctx.kernel()?;
    let sigma = ctx.named(&kernel, "sigma", &ctx.scenario.sigma)?;
    let Some(spec) = &ctx.scenario.capacity else {
        return missing("capacity");
    };
    let p = match (ctx.scenario.p, ctx.scenario.q) {
        (Some(p), _) => p,
        (None, Some(q)) => ConjugatePair::from_q(q)?.p,
        (None, None) => return missing("p"),
    };
    let space = kernel.space();
    let mut sets: Vec<(String, Vec<usize>)> = Vec::new();
    for (k, ids) in spec.sets.iter().enumerate() {
        let set = ids.iter().map(|id| space.index_of(id)).collect::<qms_core::Result<Vec<_>>>()?;
        sets.push((format!("set{k}"), set));
    }
    for b in &spec.balls {
        let x = space.index_of(&b.center)?;
        sets.push((format!("ball({},{})", b.center, fmt_f64(b.radius)), space.ball(x, b.radius).collect()));
    }
    let mut rows = Vec::new();
    let mut g_table = Table::new("g-star", &["set", "id", "g"]);
    for (label, set) in &sets {
        let r = if spec.ae {
            capacity_ae(&kernel, &sigma, p, set)?
        } else {
            capacity(&kernel, &sigma, p, set, None)?
        };
        let mut g = serde_json::Map::new();
        for &(j, v) in &r.g_star {
            g.insert(space.id(j).to_string(), json!(v));
            g_table.push(vec![label.clone(), space.id(j).into(), fmt_f64(v)]);
        }
        let members: Vec<&str> = set.iter().map(|&i| space.id(i)).collect();
        let mut v = to_value(&r);
        v["set"] = json!(label);
        v["members"] = json!(members);
        v["gStar"] = Value::Object(g);
        rows.push(v);
    }
    let mut result = json!({ "p": p, "capacities": rows });
    if let Some(c) = &spec.condition {
        let omega = ctx.named(&kernel, "omega", &ctx.scenario.omega)?;
        let r = capacity_condition_constant(&kernel, &sigma, p, &omega, c.family, c.max_sets)?;
        let witness: Vec<&str> = r.witness.iter().map(|&i| space.id(i)).collect();
        let mut v = to_value(&r);
        v["witness"] = json!(witness);
        result["condition"] = v;
    }
    let mut tables = vec![g_table];
    if let Some(b) = &spec.ball_bounds {
        let q = ConjugatePair::from_p(p)?.q;
        let sample = b
            .sample
            .iter()
            .map(|s| Ok((space.index_of(&s.center)?, s.radius)))
            .collect::<qms_core::Result<Vec<_>>>()?;
        let r = capacity_ball_bounds_check(&kernel, &sigma, p, q, &sample, b.assert_lower)?;
        let mut t = Table::new("ball-bounds", &["x", "a", "capacity", "tail", "ratio", "upperHolds"]);
        for row in &r.rows {
            t.push(vec![
                space.id(row.x).into(),
                fmt_f64(row.a),
                fmt_f64(row.capacity),
                fmt_f64(row.tail),
                fmt_f64(row.ratio),
                row.upper_holds.to_string(),
            ]);
        }
        tables.push(t);
        result["ballBounds"] = to_value(&r);
    }
    Ok(Outcome { result, tables })
}

fn interval_problem(spec: &DirichletSpec) -> Res<Interval1DProblem> {
    Ok(Interval1DProblem::from_specs(
        spec.grid.cells,
        spec.sigma.clone(),
        spec.omega.clone(),
        spec.q,
        spec.epsilon,
    )?)
}

pub fn dirichlet1d(ctx: &Context) -> Res<Outcome> {
    let Some(spec) = &ctx.scenario.dirichlet else {
        return missing("dirichlet");
    };
    let problem = interval_problem(spec)?;
    let opts = solve_options(
        spec.solve.as_ref(),
        SolveOptions {
            tol: 1e-13,
            max_iter: 1_000_000,
            ..SolveOptions::default()
        },
    );
    let mut table = Table::new("solution", &["x", "u"]);
    let result = if let Some(b) = spec.boundary {
        let r = solve_bvp_1d_affine_boundary(&problem, b.phi0, b.phi1, opts)?;
        for (x, u) in problem.grid.iter().zip(&r.u) {
            table.push(vec![fmt_f64(*x), fmt_f64(*u)]);
        }
        json!({ "experimental": true, "boundary": { "phi0": b.phi0, "phi1": b.phi1 }, "solve": to_value(&r) })
    } else {
        let r = solve_bvp_1d(&problem, opts)?;
        for (x, u) in problem.grid.iter().zip(&r.u) {
            table.push(vec![fmt_f64(*x), fmt_f64(*u)]);
        }
        to_value(&r)
    };
    Ok(Outcome {
        result,
        tables: vec![table],
    })
}

pub fn battery(ctx: &Context) -> Res<Outcome> {
    let Some(spec) = &ctx.scenario.dirichlet else {
        return missing("dirichlet");
    };
    let problem = interval_problem(spec)?;
    let b = ctx.scenario.battery.unwrap_or_default();
    let base = BatteryOptions::default();
    let opts = BatteryOptions {
        max_sets: b.max_sets.unwrap_or(base.max_sets),
        threshold_tol: b.threshold_tol.unwrap_or(base.threshold_tol),
        solve: solve_options(spec.solve.as_ref(), base.solve),
    };
    let r = dirichlet_battery(&problem, opts)?;
    let grid = &problem.grid;
    let mut t = Table::new("witnesses", &["condition", "value", "from", "to"]);
    let x = |i: usize| fmt_f64(grid[i]);
    t.push(vec![
        "pointwise".into(),
        fmt_f64(r.pointwise.value),
        r.pointwise.x.map(x).unwrap_or_default(),
        r.pointwise.x.map(x).unwrap_or_default(),
    ]);
    for (name, s) in [("capacity", &r.capacity), ("testing", &r.testing)] {
        let (a, b) = s.interval.map(|(lo, hi)| (x(lo), x(hi))).unwrap_or_default();
        t.push(vec![name.into(), fmt_f64(s.value), a, b]);
    }
    Ok(Outcome {
        result: to_value(&r),
        tables: vec![t],
    })
}

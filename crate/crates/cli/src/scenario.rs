//! Scenario files. One JSON object per run; each command reads the
//! sections it needs.

use std::collections::BTreeMap;

use serde::Deserialize;

use qms_core::dirichlet::DensitySpec;

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Scenario {
    /// Free-form label copied into the report.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub space: Option<SpaceSpec>,
    #[serde(default)]
    pub kernel: Option<KernelSpec>,
    /// Measure name -> atoms.
    #[serde(default)]
    pub measures: BTreeMap<String, Vec<WeightEntry>>,
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub sigma: Option<String>,
    #[serde(default)]
    pub omega: Option<String>,
    #[serde(default)]
    pub f: Option<SourceSpec>,
    #[serde(default)]
    pub solve: Option<SolveSpec>,
    #[serde(default)]
    pub znorm: Option<ZNormSpec>,
    #[serde(default)]
    pub criteria: Option<CriteriaSpec>,
    #[serde(default)]
    pub capacity: Option<CapacitySpec>,
    #[serde(default)]
    pub dirichlet: Option<DirichletSpec>,
    #[serde(default)]
    pub battery: Option<BatterySpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SpaceSpec {
    pub points: Vec<PointSpec>,
    /// Required for the custom family.
    #[serde(default)]
    pub rho: Option<RhoSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PointSpec {
    pub id: String,
    #[serde(default)]
    pub coords: Option<Vec<f64>>,
    #[serde(default)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub enum RhoSpec {
    /// Row-wise upper triangle including the diagonal.
    Upper(Vec<f64>),
    /// `|x - y|^power` from coordinates, with a fixed diagonal.
    EuclideanPower { power: f64, diagonal: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct KernelSpec {
    pub family: String,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub kappa: Option<KappaSpec>,
    #[serde(default)]
    pub self_distance: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "camelCase", tag = "policy", deny_unknown_fields)]
pub enum KappaSpec {
    Estimate,
    Declared { value: f64 },
    /// Seeded from `--seed`.
    Sampled { triples: usize },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct WeightEntry {
    pub id: String,
    pub weight: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ValueEntry {
    pub id: String,
    pub value: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind", deny_unknown_fields)]
pub enum SourceSpec {
    /// `scale K measure`.
    Potential {
        measure: String,
        #[serde(default = "one")]
        scale: f64,
    },
    Constant { value: f64 },
    /// Unlisted points get zero.
    Values { values: Vec<ValueEntry> },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SolveMode {
    #[default]
    Picard,
    /// Certified `f <= u <= p f` under the small-constant hypothesis.
    Small,
    /// Certified `f + A f <= u <= f + p^q A f`.
    Iterated,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SolveSpec {
    #[serde(default)]
    pub mode: SolveMode,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub blowup: Option<f64>,
    #[serde(default)]
    pub growth_window: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ZNormSpec {
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_bisection_steps: Option<usize>,
    #[serde(default)]
    pub iterated_steps: Option<usize>,
    /// Also evaluate the dual program for this function.
    #[serde(default)]
    pub dual: bool,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind", deny_unknown_fields)]
pub enum WindowSpec {
    Unbounded,
    UpTo { radius: f64 },
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CriteriaSpec {
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub threshold: Option<bool>,
    #[serde(default)]
    pub threshold_tol: Option<f64>,
    #[serde(default)]
    pub window: Option<WindowSpec>,
    #[serde(default)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BallSpec {
    pub center: String,
    pub radius: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ConditionSpec {
    pub family: qms_core::capacity::SetFamily,
    #[serde(default)]
    pub max_sets: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BallBoundsSpec {
    pub sample: Vec<BallSpec>,
    #[serde(default)]
    pub assert_lower: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CapacitySpec {
    /// Explicit sets of point ids.
    #[serde(default)]
    pub sets: Vec<Vec<String>>,
    #[serde(default)]
    pub balls: Vec<BallSpec>,
    /// Use the sigma-a.e. definition.
    #[serde(default)]
    pub ae: bool,
    #[serde(default)]
    pub condition: Option<ConditionSpec>,
    #[serde(default)]
    pub ball_bounds: Option<BallBoundsSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GridSpec {
    pub cells: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BoundarySpec {
    pub phi0: f64,
    pub phi1: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DirichletSpec {
    pub grid: GridSpec,
    pub sigma: DensitySpec,
    pub omega: DensitySpec,
    pub q: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub solve: Option<SolveSpec>,
    /// Experimental affine boundary data.
    #[serde(default)]
    pub boundary: Option<BoundarySpec>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BatterySpec {
    #[serde(default)]
    pub max_sets: Option<usize>,
    #[serde(default)]
    pub threshold_tol: Option<f64>,
}

/// Parses with field-path and line/column diagnostics.
pub fn parse(text: &str) -> Result<Scenario, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        format!("at `{path}` (line {}, column {}): {inner}", inner.line(), inner.column())
    })
}

//! Experiment and verification configs (TOML).

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use fixop::operators::{ClassCertificate, OperatorHandle, PrimitiveSet};
use fixop::solver::{self, EadcStep, Preset, Schedule, StepRule, StoppingRule};
use fixop::{LinearMap, Point};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    Hyperplane { normal: Point, offset: f64 },
    Halfspace { normal: Point, offset: f64 },
    Ball { center: Point, radius: f64 },
    Box { lower: Point, upper: Point },
}

impl SetSpec {
    fn build(&self) -> fixop::Result<PrimitiveSet> {
        match self {
            SetSpec::Hyperplane { normal, offset } => PrimitiveSet::hyperplane(normal.clone(), *offset),
            SetSpec::Halfspace { normal, offset } => PrimitiveSet::halfspace(normal.clone(), *offset),
            SetSpec::Ball { center, radius } => PrimitiveSet::ball(center.clone(), *radius),
            SetSpec::Box { lower, upper } => PrimitiveSet::cube(lower.clone(), upper.clone()),
        }
    }
}

/// Operator expression tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Identity,
    Project { set: String },
    Reflect { set: String },
    Relax { lambda: f64, of: Box<OperatorSpec> },
    /// `outer ∘ inner`.
    Compose { outer: Box<OperatorSpec>, inner: Box<OperatorSpec> },
    /// Applied in list order.
    Chain { ops: Vec<OperatorSpec> },
    Convex { weights: Vec<f64>, ops: Vec<OperatorSpec> },
    Landweber { of: Box<OperatorSpec>, map: String },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    #[serde(default)]
    pub sets: BTreeMap<String, SetSpec>,
    /// Named matrices, given by rows.
    #[serde(default)]
    pub maps: BTreeMap<String, Vec<Vec<f64>>>,
}

/// Built problem: sets and maps with cached norms.
pub struct World {
    sets: BTreeMap<String, PrimitiveSet>,
    maps: BTreeMap<String, LinearMap>,
}

impl Problem {
    pub fn build(&self, seed: u64) -> Result<World> {
        let mut sets = BTreeMap::new();
        for (name, spec) in &self.sets {
            let set = spec.build().with_context(|| format!("problem.sets.{name}"))?;
            sets.insert(name.clone(), set);
        }
        let mut maps = BTreeMap::new();
        for (name, rows) in &self.maps {
            let mut m = LinearMap::from_rows(rows).with_context(|| format!("problem.maps.{name}"))?;
            let iters = 10 * m.cols().max(m.rows()).max(10);
            m.estimate_norm(iters, seed)
                .with_context(|| format!("problem.maps.{name}"))?;
            maps.insert(name.clone(), m);
        }
        Ok(World { sets, maps })
    }
}

impl World {
    pub fn set(&self, name: &str, field: &str) -> Result<&PrimitiveSet> {
        self.sets
            .get(name)
            .ok_or_else(|| anyhow!("{field}: unknown set `{name}`"))
    }

    pub fn map(&self, name: &str, field: &str) -> Result<&LinearMap> {
        self.maps
            .get(name)
            .ok_or_else(|| anyhow!("{field}: unknown map `{name}`"))
    }

    pub fn sets(&self) -> Vec<PrimitiveSet> {
        self.sets.values().cloned().collect()
    }

    pub fn dim(&self) -> Option<usize> {
        self.sets
            .values()
            .map(|s| s.dim())
            .chain(self.maps.values().map(|m| m.cols()))
            .next()
    }

    pub fn operator(&self, spec: &OperatorSpec, field: &str) -> Result<OperatorHandle> {
        let op = match spec {
            OperatorSpec::Identity => {
                let dim = self
                    .dim()
                    .ok_or_else(|| anyhow!("{field}: identity needs at least one set to fix the dimension"))?;
                OperatorHandle::identity(dim)
            }
            OperatorSpec::Project { set } => OperatorHandle::projection(self.set(set, field)?.clone()),
            OperatorSpec::Reflect { set } => OperatorHandle::reflection(self.set(set, field)?.clone()),
            OperatorSpec::Relax { lambda, of } => self
                .operator(of, &format!("{field}.of"))?
                .relax(*lambda)
                .with_context(|| format!("{field}.lambda"))?,
            OperatorSpec::Compose { outer, inner } => {
                let u = self.operator(outer, &format!("{field}.outer"))?;
                let t = self.operator(inner, &format!("{field}.inner"))?;
                u.compose(&t).with_context(|| field.to_string())?
            }
            OperatorSpec::Chain { ops } => {
                let ops = self.operators(ops, field)?;
                OperatorHandle::chain(&ops).with_context(|| format!("{field}.ops"))?
            }
            OperatorSpec::Convex { weights, ops } => {
                let ops = self.operators(ops, field)?;
                OperatorHandle::convex_combination(&ops, weights)
                    .with_context(|| format!("{field}.weights"))?
            }
            OperatorSpec::Landweber { of, map } => {
                let s = self.operator(of, &format!("{field}.of"))?;
                OperatorHandle::landweber(&s, self.map(map, &format!("{field}.map"))?)
                    .with_context(|| field.to_string())?
            }
        };
        Ok(op)
    }

    fn operators(&self, specs: &[OperatorSpec], field: &str) -> Result<Vec<OperatorHandle>> {
        specs
            .iter()
            .enumerate()
            .map(|(i, s)| self.operator(s, &format!("{field}.ops[{i}]")))
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    /// One value for a constant schedule, several for a cyclic one.
    pub values: Vec<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_epsilon() -> f64 {
    solver::DEFAULT_EPSILON
}

impl ScheduleSpec {
    fn build(&self, field: &str) -> Result<StepRule> {
        let schedule = match self.values.as_slice() {
            [] => bail!("{field}.values: must not be empty"),
            [v] => Schedule::Constant(*v),
            vs => Schedule::Cyclic(vs.to_vec()),
        };
        StepRule::new(schedule, self.epsilon).with_context(|| field.to_string())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EadcStepSpec {
    Common,
    BallAffine,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CustomSigma {
    /// λ_k only.
    None,
    /// σ = 1/λ from the operator's relaxed-cutter certificate.
    Certified,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodKind {
    Dr {
        a: String,
        b: String,
    },
    Raspc {
        a: String,
        b: String,
        lambda: f64,
        mu: f64,
    },
    Eadc {
        a: String,
        b: String,
        lambda: f64,
        mu: f64,
        #[serde(default = "default_eadc_step")]
        step: EadcStepSpec,
    },
    Moudafi {
        s: OperatorSpec,
        u: OperatorSpec,
        map: String,
        lambda: f64,
        mu: f64,
    },
    Custom {
        operator: OperatorSpec,
        #[serde(default = "default_sigma")]
        sigma: CustomSigma,
    },
}

fn default_eadc_step() -> EadcStepSpec {
    EadcStepSpec::Common
}

fn default_sigma() -> CustomSigma {
    CustomSigma::None
}

// Unknown keys are rejected by the flattened method variant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodSpec {
    /// Used for the `{method}` placeholder and the summary line.
    pub name: String,
    #[serde(flatten)]
    pub kind: MethodKind,
    pub schedule: Option<ScheduleSpec>,
}

impl MethodSpec {
    pub fn build(&self, world: &World, field: &str) -> Result<Preset> {
        let rule = match &self.schedule {
            Some(s) => s.build(&format!("{field}.schedule"))?,
            None => StepRule::default(),
        };
        let preset = match &self.kind {
            MethodKind::Dr { a, b } => solver::preset_dr(
                world.set(a, &format!("{field}.a"))?,
                world.set(b, &format!("{field}.b"))?,
                rule,
            ),
            MethodKind::Raspc { a, b, lambda, mu } => solver::preset_raspc(
                world.set(a, &format!("{field}.a"))?,
                world.set(b, &format!("{field}.b"))?,
                *lambda,
                *mu,
                rule,
            ),
            MethodKind::Eadc { a, b, lambda, mu, step } => solver::preset_eadc(
                world.set(a, &format!("{field}.a"))?,
                world.set(b, &format!("{field}.b"))?,
                *lambda,
                *mu,
                match step {
                    EadcStepSpec::Common => EadcStep::Common,
                    EadcStepSpec::BallAffine => EadcStep::BallAffine,
                },
                rule,
            ),
            MethodKind::Moudafi { s, u, map, lambda, mu } => solver::preset_moudafi(
                &world.operator(s, &format!("{field}.s"))?,
                &world.operator(u, &format!("{field}.u"))?,
                world.map(map, &format!("{field}.map"))?,
                *lambda,
                *mu,
                rule,
            ),
            MethodKind::Custom { operator, sigma } => {
                let op = world.operator(operator, &format!("{field}.operator"))?;
                match sigma {
                    CustomSigma::Certified => solver::preset_certified(&op, rule),
                    CustomSigma::None => Ok(Preset {
                        name: self.name.clone(),
                        v_base: op,
                        rule,
                        factors: None,
                    }),
                }
            }
        };
        let mut preset = preset.with_context(|| field.to_string())?;
        preset.name = self.name.clone();
        Ok(preset)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppingSpec {
    pub residual_tol: f64,
    pub max_iters: usize,
    pub stall_window: Option<usize>,
    pub stall_min_decrease: Option<f64>,
}

impl StoppingSpec {
    pub fn build(&self) -> Result<StoppingRule> {
        let rule = StoppingRule::new(self.residual_tol, self.max_iters).context("stopping")?;
        match (self.stall_window, self.stall_min_decrease) {
            (None, None) => Ok(rule),
            (Some(w), Some(d)) => rule.with_stall(w, d).context("stopping.stall_window"),
            _ => bail!("stopping: stall_window and stall_min_decrease must be given together"),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Path template; `{method}` is replaced by the method name.
    pub csv: Option<String>,
    pub json: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub allow_max_iters: bool,
    pub x0: Point,
    pub reference: Option<Point>,
    #[serde(default)]
    pub problem: Problem,
    pub stopping: StoppingSpec,
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertySpec {
    /// One of ne, fne, cutter, rfne, spc, relaxed_cutter, demicontraction.
    pub class: String,
    pub parameter: Option<f64>,
}

impl PropertySpec {
    pub fn build(&self) -> Result<ClassCertificate> {
        let need = |p: Option<f64>| p.ok_or_else(|| anyhow!("property.parameter: required for `{}`", self.class));
        let c = match self.class.as_str() {
            "ne" => ClassCertificate::Ne,
            "fne" => ClassCertificate::Fne,
            "cutter" => ClassCertificate::Cutter,
            "rfne" => ClassCertificate::Rfne(need(self.parameter)?),
            "spc" => ClassCertificate::Spc(need(self.parameter)?),
            "relaxed_cutter" => ClassCertificate::RelaxedCutter(need(self.parameter)?),
            "demicontraction" => ClassCertificate::Demicontraction(need(self.parameter)?),
            other => bail!("property.class: unknown class `{other}`"),
        };
        c.validate().context("property.parameter")
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    /// Explicit centers; when absent, points around the problem's sets.
    pub centers: Option<Vec<Point>>,
    pub radii: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default)]
    pub seed: u64,
    pub samples: usize,
    #[serde(default)]
    pub problem: Problem,
    pub operator: OperatorSpec,
    /// Defaults to the operator's own certificate.
    pub property: Option<PropertySpec>,
    #[serde(default)]
    pub sampler: SamplerSpec,
    /// Known fixed points; drawn from the operator's fixed-point set when absent.
    pub fix_points: Option<Vec<Point>>,
    pub output: Option<String>,
}

pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

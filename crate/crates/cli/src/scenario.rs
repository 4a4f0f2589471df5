//! Scenario documents: parsing, defaults and validation.

use std::path::{Path, PathBuf};

use ahflow_core::flow::Background;
use ahflow_core::geometry::RadialChart;
use ahflow_core::scalar::{PiRational, Rational};
use ahflow_core::tensor::{random_kappa, random_symmetric_kappa, KappaTensor, SymTensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    VerifyExpansions,
    VerifyDeturck,
    KappaOde,
    GeonMass,
    ChMass,
    FlowPde,
    ScalingStudy,
    ConvergenceStudy,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::VerifyExpansions => "verify-expansions",
            Task::VerifyDeturck => "verify-deturck",
            Task::KappaOde => "kappa-ode",
            Task::GeonMass => "geon-mass",
            Task::ChMass => "ch-mass",
            Task::FlowPde => "flow-pde",
            Task::ScalingStudy => "scaling-study",
            Task::ConvergenceStudy => "convergence-study",
        }
    }

    pub fn grid_based(self) -> bool {
        matches!(self, Task::GeonMass | Task::FlowPde | Task::ConvergenceStudy)
    }
}

/// One run of one task.
#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub task: Task,
    /// Seed for random boundary data.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub parameters: Parameters,
    #[serde(default)]
    pub output: Output,
}

/// Task parameters. Each task reads the subset it needs and rejects values
/// outside its preconditions.
#[derive(Clone, Debug, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    /// Dimension of the manifold.
    pub n: Option<usize>,
    /// Boundary curvature: 0 for a flat torus, 1 for a round sphere.
    pub k: Option<u8>,
    /// Inclusive range of expansion orders.
    pub m_range: Option<[usize; 2]>,
    /// Expansion order for the coefficient system.
    pub m: Option<usize>,
    /// Periods of the `n - 2` torus angles other than the geon circle,
    /// written as `"2pi"`, `"3/2 pi"` or a plain rational.
    pub moduli: Option<Vec<String>>,
    pub kappa: Option<KappaSpec>,
    /// Second tensor for the DeTurck checks, with the same forms as `kappa`.
    pub w: Option<KappaSpec>,
    pub background: Option<BackgroundSpec>,
    pub grid: Option<GridSpec>,
    /// End time of an evolution.
    pub t_end: Option<f64>,
    /// Number of equal output intervals.
    pub samples: Option<usize>,
    /// Explicit step as a fraction of the stability limit.
    pub courant: Option<f64>,
    /// Fixed step for the coefficient system.
    pub dt: Option<f64>,
    /// Asymptotic curvature radius of a single flow.
    pub ell: Option<f64>,
    /// Radii for the flux mass.
    pub radii: Option<Vec<f64>>,
    /// Curvature radii for the scaling study.
    pub ells: Option<Vec<f64>>,
    /// Comparison time for the scaling study, or the sample time of the
    /// residual study.
    pub time: Option<f64>,
    /// Also run the radial flow in the scaling study.
    pub pde: Option<bool>,
    /// Number of grid levels, each halving the spacing.
    pub levels: Option<usize>,
    /// Overrides the task's default acceptance tolerance.
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum KappaSpec {
    /// Constant tensor `diag(radial, boundary...)` with rational entries.
    Blocks {
        radial: String,
        boundary: Vec<String>,
    },
    /// `count` seeded tensors with entries `p/q`, `|p| <= 9`, `1 <= q <= 9`.
    Random { count: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BackgroundSpec {
    Geon,
    Hyperbolic {
        x_max: f64,
    },
    Perturbed {
        x_max: f64,
        kappa_xi: f64,
        kappa_theta: f64,
    },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub points: usize,
    pub stretch: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Output {
    /// Directory for report files, relative to the working directory.
    pub dir: Option<PathBuf>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Schema(format!("cannot read {}: {e}", path.display())))?;
        let s: Scenario = serde_json::from_str(&text)
            .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
        s.validate()?;
        Ok(s)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    /// Checks everything that does not need a computation.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Schema(m));
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return bad(format!(
                "name {:?} must be nonempty and use only letters, digits, '-' and '_'",
                self.name
            ));
        }
        let p = &self.parameters;
        let n = self.n();
        if !(3..=6).contains(&n) {
            return bad(format!("n = {n} outside the supported range 3..=6"));
        }
        if self.k() > 1 {
            return bad(format!("k = {} must be 0 or 1", self.k()));
        }
        if let Some([lo, hi]) = p.m_range {
            if lo < 1 || hi > n || lo > hi {
                return bad(format!("m_range [{lo}, {hi}] must lie in 1..={n}"));
            }
        }
        if let Some(m) = p.m {
            if m < 1 || m > n {
                return bad(format!("m = {m} outside 1..={n}"));
            }
        }
        self.chart()?;
        for spec in [&p.kappa, &p.w].into_iter().flatten() {
            self.kappa_samples(spec, 0)?;
        }
        if let Some(g) = p.grid {
            if g.points < 12 {
                return bad(format!("grid.points = {} must be at least 12", g.points));
            }
            if let Some(s) = g.stretch {
                if !(0.0..1.0).contains(&s) {
                    return bad(format!("grid.stretch = {s} outside [0, 1)"));
                }
            }
        }
        let positive = |name: &str, v: Option<f64>| match v {
            Some(v) if !(v > 0.0 && v.is_finite()) => bad(format!("{name} = {v} must be positive")),
            _ => Ok(()),
        };
        positive("t_end", p.t_end)?;
        positive("dt", p.dt)?;
        positive("ell", p.ell)?;
        positive("time", p.time)?;
        positive("tolerance", p.tolerance)?;
        if let Some(c) = p.courant {
            if !(c > 0.0 && c <= 1.0) {
                return bad(format!("courant = {c} outside (0, 1]"));
            }
        }
        for (name, list) in [("radii", &p.radii), ("ells", &p.ells)] {
            if let Some(v) = list {
                if v.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                    return bad(format!("{name} must be positive"));
                }
            }
        }
        if let Some(l) = p.levels {
            if !(2..=6).contains(&l) {
                return bad(format!("levels = {l} outside 2..=6"));
            }
        }
        match self.task {
            Task::FlowPde | Task::ScalingStudy | Task::ConvergenceStudy | Task::GeonMass
                if self.k() != 0 =>
            {
                bad(format!("task {} needs a torus boundary (k = 0)", self.task.name()))
            }
            Task::FlowPde if p.samples == Some(0) => bad("flow-pde needs samples >= 1".into()),
            Task::ScalingStudy if p.ells.as_ref().is_some_and(|e| e.len() < 2) => {
                bad("scaling-study needs at least two ells".into())
            }
            _ => Ok(()),
        }
    }

    pub fn n(&self) -> usize {
        self.parameters.n.unwrap_or(3)
    }

    pub fn k(&self) -> u8 {
        self.parameters.k.unwrap_or(0)
    }

    pub fn m_range(&self) -> [usize; 2] {
        self.parameters.m_range.unwrap_or([1, self.n()])
    }

    pub fn tolerance(&self, default: f64) -> f64 {
        self.parameters.tolerance.unwrap_or(default)
    }

    pub fn chart(&self) -> Result<RadialChart, CliError> {
        let n = self.n();
        let chart = match (self.k(), &self.parameters.moduli) {
            (1, Some(_)) => {
                return Err(CliError::Schema("moduli apply only to torus boundaries".into()))
            }
            (1, None) => RadialChart::sphere(n),
            (_, None) => RadialChart::unit_torus(n),
            (_, Some(m)) => {
                if m.len() != n - 2 {
                    return Err(CliError::Schema(format!(
                        "moduli lists {} periods, n = {n} needs {}",
                        m.len(),
                        n - 2
                    )));
                }
                let periods = m.iter().map(|s| parse_period(s)).collect::<Result<_, _>>()?;
                RadialChart::torus(n, periods)
            }
        };
        chart.map_err(|e| CliError::Schema(e.to_string()))
    }

    /// Boundary tensors described by `spec`. Random draws use the scenario
    /// seed offset by `stream`, so different tensors never share a stream.
    pub fn kappa_samples(
        &self,
        spec: &KappaSpec,
        stream: u64,
    ) -> Result<Vec<KappaTensor<Rational>>, CliError> {
        let n = self.n();
        match spec {
            KappaSpec::Blocks { radial, boundary } => {
                if boundary.len() != n - 1 {
                    return Err(CliError::Schema(format!(
                        "kappa.blocks.boundary has {} entries, n = {n} needs {}",
                        boundary.len(),
                        n - 1
                    )));
                }
                let r = parse_rational(radial)?;
                let b = boundary.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>, _>>()?;
                Ok(vec![SymTensor::from_blocks(r, &b)])
            }
            KappaSpec::Random { count } => {
                if *count == 0 || *count > 1000 {
                    return Err(CliError::Schema(format!(
                        "kappa.random.count = {count} outside 1..=1000"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(stream));
                Ok((0..*count)
                    .map(|_| {
                        if self.k() == 1 {
                            random_symmetric_kappa(n, &mut rng)
                        } else {
                            random_kappa(n, &mut rng)
                        }
                    })
                    .collect())
            }
        }
    }

    pub fn background(&self) -> Background {
        match self.parameters.background {
            None | Some(BackgroundSpec::Geon) => Background::Geon,
            Some(BackgroundSpec::Hyperbolic { x_max }) => Background::Hyperbolic { x_max },
            Some(BackgroundSpec::Perturbed {
                x_max,
                kappa_xi,
                kappa_theta,
            }) => Background::Perturbed {
                x_max,
                kappa_xi,
                kappa_theta,
            },
        }
    }
}

pub fn parse_rational(s: &str) -> Result<Rational, CliError> {
    s.trim()
        .parse::<Rational>()
        .map_err(|_| CliError::Schema(format!("{s:?} is not a rational number")))
}

/// `"2pi"`, `"3/2 pi"`, `"pi"` or a plain rational.
pub fn parse_period(s: &str) -> Result<PiRational, CliError> {
    let t = s.trim();
    let v = match t.strip_suffix("pi") {
        Some(head) => {
            let head = head.trim().trim_end_matches('*').trim();
            let coeff = if head.is_empty() {
                Rational::from_integer(1.into())
            } else {
                parse_rational(head)?
            };
            PiRational::new(coeff, 1)
        }
        None => PiRational::rational(parse_rational(t)?),
    };
    if !v.is_positive() {
        return Err(CliError::Schema(format!("period {s:?} must be positive")));
    }
    Ok(v)
}

/// JSON schema of the scenario document.
pub fn schema_json() -> String {
    let schema = schemars::schema_for!(Scenario);
    serde_json::to_string_pretty(&schema).expect("schema serializes")
}

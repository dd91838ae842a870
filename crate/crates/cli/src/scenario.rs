//! Scenario files: TOML documents describing both layers, the rates, the
//! constraint sets, the synthesis and planner settings and the mission.

use std::path::Path;

use layercon::constraints::{xbar_from_output, HPolytope, PlanningOptions, SafeRegion};
use layercon::numerics::solve_lstsq;
use layercon::planner::{Mission, PlannerConfig};
use layercon::sim::Design;
use layercon::simfunc::{AssembleOptions, SynthesisMethod};
use layercon::systems::{CtSystem, RatePair};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub lower_system: SystemSpec,
    pub higher_system: SystemSpec,
    pub rates: RatesSpec,
    pub constraints: ConstraintsSpec,
    pub synthesis: SynthesisSpec,
    #[serde(default)]
    pub planner: PlannerSpec,
    pub mission: MissionSpec,
    #[serde(default)]
    pub init: InitSpec,
}

/// Continuous-time `ẋ = Ax + Bu`, `y = Cx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(rename = "C")]
    pub c: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSpec {
    #[serde(rename = "T_L")]
    pub t_l: f64,
    #[serde(rename = "T_H")]
    pub t_h: f64,
    #[serde(rename = "T")]
    pub t: f64,
}

/// A box or an explicit halfspace list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolytopeSpec {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Halfspaces {
        #[serde(rename = "F")]
        f: Rows,
        #[serde(rename = "f")]
        h: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsSpec {
    /// Safe output region as a union of pieces.
    #[serde(rename = "Y")]
    pub y: Vec<PolytopeSpec>,
    #[serde(rename = "U")]
    pub u: PolytopeSpec,
    #[serde(rename = "Ubar")]
    pub ubar: PolytopeSpec,
    /// `X̄` per piece; defaults to the states whose output lies in the piece.
    #[serde(rename = "Xbar", default, skip_serializing_if = "Option::is_none")]
    pub xbar: Option<Vec<PolytopeSpec>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodSpec {
    Lyapunov,
    Sdp,
}

impl From<MethodSpec> for SynthesisMethod {
    fn from(m: MethodSpec) -> Self {
        match m {
            MethodSpec::Lyapunov => SynthesisMethod::Lyapunov,
            MethodSpec::Sdp => SynthesisMethod::Sdp,
        }
    }
}

impl From<SynthesisMethod> for MethodSpec {
    fn from(m: SynthesisMethod) -> Self {
        match m {
            SynthesisMethod::Lyapunov => MethodSpec::Lyapunov,
            SynthesisMethod::Sdp => MethodSpec::Sdp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSpec {
    pub method: MethodSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Pins `ū_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_bar_max: Option<f64>,
    /// Pins the tightening `ε`; zero disables propagation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_pd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_weight: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_weight: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_weight: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointSpec {
    pub point: Vec<f64>,
    pub piece: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    pub piece: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionSpec {
    /// Output-space start; the higher state is the least-norm state with this output.
    pub start: Vec<f64>,
    #[serde(default)]
    pub waypoints: Vec<WaypointSpec>,
    pub goal: GoalSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    /// `x₀ = P x̄₀`.
    #[serde(default = "yes")]
    pub lifted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xbar0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

fn yes() -> bool {
    true
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            lifted: true,
            xbar0: None,
            x0: None,
        }
    }
}

fn bad(field: impl Into<String>, msg: impl std::fmt::Display) -> CliError {
    CliError::Scenario(format!("{}: {msg}", field.into()))
}

fn matrix(field: &str, rows: &Rows) -> Result<DMatrix<f64>, CliError> {
    let r = rows.len();
    if r == 0 {
        return Err(bad(field, "matrix has no rows"));
    }
    let c = rows[0].len();
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != c) {
        return Err(bad(format!("{field}[{i}]"), format!("expected {c} entries, got {}", row.len())));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(bad(field, "entries must be finite"));
    }
    Ok(DMatrix::from_row_iterator(r, c, rows.iter().flatten().copied()))
}

fn vector(field: &str, v: &[f64], len: usize) -> Result<DVector<f64>, CliError> {
    if v.len() != len {
        return Err(bad(field, format!("expected {len} entries, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(bad(field, "entries must be finite"));
    }
    Ok(DVector::from_column_slice(v))
}

impl PolytopeSpec {
    pub fn build(&self, field: &str, dim: usize) -> Result<HPolytope<f64>, CliError> {
        match self {
            PolytopeSpec::Box { lo, hi } => {
                vector(&format!("{field}.lo"), lo, dim)?;
                vector(&format!("{field}.hi"), hi, dim)?;
                if let Some(i) = (0..dim).find(|&i| lo[i] > hi[i]) {
                    return Err(bad(field, format!("lo[{i}] exceeds hi[{i}]")));
                }
                HPolytope::from_box(lo, hi).map_err(|e| bad(field, e))
            }
            PolytopeSpec::Halfspaces { f, h } => {
                let fm = matrix(&format!("{field}.F"), f)?;
                if fm.ncols() != dim {
                    return Err(bad(format!("{field}.F"), format!("expected {dim} columns, got {}", fm.ncols())));
                }
                let hv = vector(&format!("{field}.f"), h, fm.nrows())?;
                HPolytope::new(fm, hv).map_err(|e| bad(field, e))
            }
        }
    }

    /// Axis bounds when the piece is a box.
    pub fn as_box(&self) -> Option<(&[f64], &[f64])> {
        match self {
            PolytopeSpec::Box { lo, hi } => Some((lo, hi)),
            PolytopeSpec::Halfspaces { .. } => None,
        }
    }
}

impl SystemSpec {
    fn build(&self, field: &str) -> Result<CtSystem<f64>, CliError> {
        let a = matrix(&format!("{field}.A"), &self.a)?;
        let b = matrix(&format!("{field}.B"), &self.b)?;
        let c = matrix(&format!("{field}.C"), &self.c)?;
        CtSystem::new(a, b, c).map_err(|e| bad(field, e))
    }
}

/// A scenario with every cross-dimension check done.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub spec: Scenario,
    pub lower: CtSystem<f64>,
    pub higher: CtSystem<f64>,
    pub y_pieces: Vec<HPolytope<f64>>,
    pub u: HPolytope<f64>,
    pub ubar: HPolytope<f64>,
    pub xbar: Vec<HPolytope<f64>>,
    pub planner: PlannerConfig<f64>,
    pub mission: Mission<f64>,
    pub xbar0: DVector<f64>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Scenario(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Scenario(msg) => CliError::Scenario(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Scenario(e.to_string()))
    }

    /// Builds every object and checks all dimensions.
    pub fn validate(&self) -> Result<Loaded, CliError> {
        let lower = self.lower_system.build("lower_system")?;
        let higher = self.higher_system.build("higher_system")?;
        let (p, m, mb, nb) = (lower.n_outputs(), lower.n_inputs(), higher.n_inputs(), higher.n_states());
        if higher.n_outputs() != p {
            return Err(bad("higher_system.C", format!("expected {p} outputs, got {}", higher.n_outputs())));
        }
        RatePair::new(self.rates.t_l, self.rates.t_h, self.rates.t).map_err(|e| bad("rates", e))?;

        if self.constraints.y.is_empty() {
            return Err(bad("constraints.Y", "needs at least one piece"));
        }
        let y_pieces = self
            .constraints
            .y
            .iter()
            .enumerate()
            .map(|(i, s)| s.build(&format!("constraints.Y[{i}]"), p))
            .collect::<Result<Vec<_>, _>>()?;
        let u = self.constraints.u.build("constraints.U", m)?;
        let ubar = self.constraints.ubar.build("constraints.Ubar", mb)?;
        let cbar = higher.c().clone();
        let xbar = match &self.constraints.xbar {
            None => y_pieces
                .iter()
                .map(|y| xbar_from_output(y, &cbar).map_err(|e| bad("constraints.Xbar", e)))
                .collect::<Result<Vec<_>, _>>()?,
            Some(list) => {
                if list.len() != y_pieces.len() {
                    return Err(bad(
                        "constraints.Xbar",
                        format!("expected one set per Y piece ({}), got {}", y_pieces.len(), list.len()),
                    ));
                }
                list.iter()
                    .enumerate()
                    .map(|(i, s)| s.build(&format!("constraints.Xbar[{i}]"), nb))
                    .collect::<Result<Vec<_>, _>>()?
            }
        };

        let syn = &self.synthesis;
        if let Some(b) = syn.beta {
            if !(b > 0.0 && b < 1.0) {
                return Err(bad("synthesis.beta", "must lie in (0, 1)"));
            }
        }
        for (name, v) in [
            ("synthesis.delta", syn.delta),
            ("synthesis.u_bar_max", syn.u_bar_max),
            ("synthesis.epsilon", syn.epsilon),
        ] {
            if v.is_some_and(|x| !(x >= 0.0) || !x.is_finite()) {
                return Err(bad(name, "must be a finite non-negative number"));
            }
        }

        let mut planner = PlannerConfig::with_dims(p, mb);
        if let Some(hz) = self.planner.horizon {
            planner.horizon = hz;
        }
        if let Some(w) = &self.planner.state_weight {
            planner.state_weight = matrix("planner.state_weight", w)?;
        }
        if let Some(w) = &self.planner.input_weight {
            planner.input_weight = matrix("planner.input_weight", w)?;
        }
        if let Some(w) = &self.planner.terminal_weight {
            planner.terminal_weight = matrix("planner.terminal_weight", w)?;
        }
        if let Some(r) = self.planner.switch_radius {
            planner.waypoint_switch_radius = r;
        }
        planner.validate(p, mb).map_err(|e| bad("planner", e))?;

        let ms = &self.mission;
        let start = vector("mission.start", &ms.start, p)?;
        let n_pieces = y_pieces.len();
        let mut points = Vec::with_capacity(ms.waypoints.len());
        let mut pieces = Vec::with_capacity(ms.waypoints.len());
        for (i, w) in ms.waypoints.iter().enumerate() {
            points.push(vector(&format!("mission.waypoints[{i}].point"), &w.point, p)?);
            if w.piece >= n_pieces {
                return Err(bad(format!("mission.waypoints[{i}].piece"), format!("only {n_pieces} pieces")));
            }
            pieces.push(w.piece);
        }
        let center = vector("mission.goal.center", &ms.goal.center, p)?;
        if ms.goal.piece >= n_pieces {
            return Err(bad("mission.goal.piece", format!("only {n_pieces} pieces")));
        }
        let mission = Mission::new(points, pieces, center, ms.goal.radius, ms.goal.piece, planner.waypoint_switch_radius)
            .map_err(|e| bad("mission", e))?;

        let xbar0 = match &self.init.xbar0 {
            Some(v) => {
                let x = vector("init.xbar0", v, nb)?;
                let gap = (higher.c() * &x - &start).amax();
                if gap > 1e-9 {
                    return Err(bad("init.xbar0", format!("output differs from mission.start by {gap}")));
                }
                x
            }
            None => {
                let sol = solve_lstsq(higher.c(), &DMatrix::from_column_slice(p, 1, start.as_slice()))
                    .map_err(|e| bad("mission.start", e))?;
                sol.x.column(0).into_owned()
            }
        };
        if let Some(x0) = &self.init.x0 {
            if self.init.lifted {
                return Err(bad("init.x0", "cannot be given together with lifted = true"));
            }
            vector("init.x0", x0, lower.n_states())?;
        } else if !self.init.lifted {
            return Err(bad("init.x0", "required when lifted = false"));
        }
        SafeRegion::new(y_pieces.clone()).map_err(|e| bad("constraints.Y", e))?;

        Ok(Loaded {
            spec: self.clone(),
            lower,
            higher,
            y_pieces,
            u,
            ubar,
            xbar,
            planner,
            mission,
            xbar0,
        })
    }
}

impl Loaded {
    pub fn method(&self) -> SynthesisMethod {
        self.spec.synthesis.method.into()
    }

    pub fn region(&self) -> SafeRegion<f64> {
        SafeRegion::new(self.y_pieces.clone()).expect("validated at load")
    }

    /// Continuous-time design with an optional method override.
    pub fn design(&self, method: Option<SynthesisMethod>) -> Design<f64> {
        let syn = &self.spec.synthesis;
        let mut assemble = AssembleOptions {
            method: method.unwrap_or_else(|| self.method()),
            ..AssembleOptions::default()
        };
        if let Some(b) = syn.beta {
            assemble.lyapunov.beta = b;
        }
        if let Some(e) = syn.eps_pd {
            assemble.sdp.eps_pd = e;
        }
        if let Some(l) = syn.lambda_min {
            assemble.sdp.lambda_min = l;
        }
        Design {
            lower: self.lower.clone(),
            higher: self.higher.clone(),
            t_h: self.spec.rates.t_h,
            t_total: self.spec.rates.t,
            y_pieces: self.y_pieces.clone(),
            u: self.u.clone(),
            ubar: self.ubar.clone(),
            xbar: self.xbar.clone(),
            assemble,
            planning: PlanningOptions {
                delta: syn.delta,
                u_bar_max: syn.u_bar_max,
                epsilon: syn.epsilon,
                v0_max: 0.0,
            },
        }
    }

    /// Explicit `x₀` when the scenario is not lifted.
    pub fn x0(&self) -> Option<DVector<f64>> {
        self.spec.init.x0.as_ref().map(|v| DVector::from_column_slice(v))
    }
}

//! Scenario files: TOML with a `schema = 1` version key.
//!
//! ```toml
//! schema = 1
//! seed = 7
//!
//! [shape]
//! axes = [1.0, 0.8, 0.6]      # or: preset = "sphere"
//!
//! [density]
//! kind = "constant"           # or: kind = "inertia", targets = [I1, I2, I3]
//! value = 1.0
//!
//! [movements]
//! kind = "rigid-shell"        # or: kind = "presets", list = [...]
//! count = 5
//!
//! [model]
//! kind = "transport"          # "boundary" | "parametric"
//! added_mass = "oracle"       # or "bem"
//!
//! [controls]
//! duration = 2.0
//! segments = [{ start = 0.0, end = 1.0, values = [0.1, 0.0, 0.0, 0.0, 0.0] }]
//!
//! [target]
//! tolerance = 1e-2
//! waypoints = [
//!   { t = 0.0, quaternion = [1.0, 0.0, 0.0, 0.0], position = [0.0, 0.0, 0.0] },
//!   { t = 1.0, quaternion = [1.0, 0.0, 0.0, 0.0], position = [0.05, 0.0, 0.0] },
//! ]
//!
//! [numerics]
//! refinement = 3
//! step = 1e-2
//! ```

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use swimmer_core::dynamics::{
    rigid_shell_config_seeded, rectify_fields_seeded, smooth_controls, BoundaryModel, ControlSchedule, Harmonic, MassModel, Segment,
    ShellRigidModel, DEFAULT_SEED,
};
use swimmer_core::geometry::{ball_quadrature, surface_mesh, BallQuadrature, DeformationField, DensityField, SwimmerConfig};
use swimmer_core::potential::{added_mass_matrix, density_for_inertia, ellipsoid_added_mass};
use swimmer_core::Error;

pub const SCHEMA_VERSION: u32 = 1;

/// A scenario that cannot be used, with the offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ScenarioError {}

fn invalid(field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError { field: field.to_string(), message: message.into() }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub shape: Option<ShapeSpec>,
    #[serde(default)]
    pub density: DensitySpec,
    #[serde(default)]
    pub movements: Option<MovementSpec>,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub controls: Option<ControlSpec>,
    #[serde(default)]
    pub target: Option<TargetSpec>,
    #[serde(default)]
    pub numerics: Numerics,
    /// Directory of the scenario file; relative paths inside it resolve here.
    #[serde(skip)]
    pub origin: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSpec {
    pub axes: Option<[f64; 3]>,
    pub preset: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensitySpec {
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
    Inertia {
        targets: [f64; 3],
    },
}

impl Default for DensitySpec {
    fn default() -> Self {
        DensitySpec::Constant { value: 1.0 }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MovementSpec {
    RigidShell {
        count: usize,
    },
    Presets {
        list: Vec<PresetSpec>,
        #[serde(default = "yes")]
        rectify: bool,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PresetSpec {
    Dilation {
        coefficient: f64,
    },
    Translation {
        direction: [f64; 3],
        #[serde(default = "one")]
        coefficient: f64,
    },
    Rotation {
        axis: [f64; 3],
        #[serde(default = "one")]
        coefficient: f64,
    },
    Bump {
        exponents: [u8; 3],
        direction: usize,
        #[serde(default = "one")]
        coefficient: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Rigid-shell movements with the added mass carried by rigid transport.
    Transport {
        #[serde(default)]
        added_mass: AddedMassSource,
    },
    /// Boundary problems re-solved on every deformed interface.
    Boundary,
    /// Abstract rigid-shell model with prescribed constants.
    Parametric { inertia: [f64; 3], mass: f64, mu: [f64; 6] },
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Transport { added_mass: AddedMassSource::default() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AddedMassSource {
    /// Closed form for ellipsoidal shapes, panel solver otherwise.
    #[default]
    Oracle,
    Bem,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    pub duration: Option<f64>,
    pub segments: Option<Vec<SegmentSpec>>,
    pub waveforms: Option<Vec<WaveformSpec>>,
    /// Schedule CSV as written by `swimmer plan`.
    pub file: Option<PathBuf>,
    pub mollify: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub start: f64,
    pub end: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformSpec {
    pub field: usize,
    pub amplitude: f64,
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub tolerance: f64,
    pub waypoints: Vec<WaypointSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointSpec {
    pub t: f64,
    /// `[w, x, y, z]`; normalised on load.
    pub quaternion: [f64; 4],
    pub position: [f64; 3],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub refinement: usize,
    pub quadrature: usize,
    pub step: f64,
    pub rank_tolerance: f64,
    pub bracket_step: f64,
    pub depth: usize,
    pub initial_legs: usize,
    pub max_legs: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            refinement: 3,
            quadrature: 12,
            step: 1e-2,
            rank_tolerance: 1e-8,
            bracket_step: 1e-4,
            depth: 2,
            initial_legs: 8,
            max_legs: 1 << 15,
        }
    }
}

/// Command-line overrides applied after parsing.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub refinement: Option<usize>,
    pub step: Option<f64>,
    pub seed: Option<u64>,
}

pub fn load(path: &Path, overrides: Overrides) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid("scenario", format!("cannot read {}: {e}", path.display())))?;
    let mut sc = parse(&text)?;
    sc.origin = path.parent().map(Path::to_path_buf).unwrap_or_default();
    if let Some(k) = overrides.refinement {
        sc.numerics.refinement = k;
    }
    if let Some(h) = overrides.step {
        sc.numerics.step = h;
    }
    if overrides.seed.is_some() {
        sc.seed = overrides.seed;
    }
    sc.validate()?;
    Ok(sc)
}

pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
    let sc: Scenario = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        let mut field = e.span().map(|s| key_at(text, s.start)).unwrap_or_else(|| "scenario".into());
        if let Some(name) = msg.strip_prefix("unknown field `").and_then(|r| r.split('`').next()) {
            let table = e.span().and_then(|s| table_at(text, s.start));
            field = table.map_or_else(|| name.to_string(), |t| format!("{t}.{name}"));
        }
        invalid(&field, msg)
    })?;
    if sc.schema != SCHEMA_VERSION {
        return Err(invalid("schema", format!("unsupported schema {}, expected {SCHEMA_VERSION}", sc.schema)));
    }
    Ok(sc)
}

fn table_at(text: &str, offset: usize) -> Option<String> {
    // a span may start on the header line itself
    let end = text[offset.min(text.len())..].find('\n').map_or(text.len(), |k| offset + k);
    text[..end]
        .lines()
        .rev()
        .find_map(|l| l.trim().strip_prefix('[').and_then(|r| r.strip_suffix(']')).map(|t| t.trim_matches(['[', ']']).to_string()))
}

/// Best-effort dotted key for an error position: the enclosing table and key.
fn key_at(text: &str, offset: usize) -> String {
    let before = &text[..offset.min(text.len())];
    let table = table_at(text, offset);
    let line = before.lines().last().unwrap_or("");
    let key = line.split('=').next().map(str::trim).filter(|k| !k.is_empty() && !k.starts_with('['));
    match (table, key) {
        (Some(t), Some(k)) => format!("{t}.{k}"),
        (Some(t), None) => t,
        (None, Some(k)) => k.to_string(),
        (None, None) => "scenario".into(),
    }
}

fn positive(field: &str, v: f64) -> Result<(), ScenarioError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        match (&self.shape, &self.model) {
            (Some(shape), _) => {
                match (&shape.axes, shape.preset.as_deref()) {
                    (Some(_), Some(_)) => return Err(invalid("shape", "give either axes or preset, not both")),
                    (None, None) => return Err(invalid("shape", "axes or preset required")),
                    (Some(a), None) => {
                        for (k, v) in a.iter().enumerate() {
                            positive(&format!("shape.axes[{k}]"), *v)?;
                        }
                    }
                    (None, Some("sphere")) => {}
                    (None, Some(p)) => return Err(invalid("shape.preset", format!("unknown preset {p:?}, expected \"sphere\""))),
                }
            }
            (None, ModelSpec::Parametric { .. }) => {}
            (None, _) => return Err(invalid("shape", "required unless model.kind = \"parametric\"")),
        }
        match &self.density {
            DensitySpec::Constant { value } => positive("density.value", *value)?,
            DensitySpec::Inertia { targets } => {
                for (k, v) in targets.iter().enumerate() {
                    positive(&format!("density.targets[{k}]"), *v)?;
                }
            }
        }
        match &self.movements {
            Some(MovementSpec::RigidShell { count }) if *count == 0 || *count > 6 => {
                return Err(invalid("movements.count", format!("must be between 1 and 6, got {count}")))
            }
            Some(MovementSpec::Presets { list, .. }) => {
                if list.is_empty() {
                    return Err(invalid("movements.list", "at least one movement required"));
                }
                for (k, p) in list.iter().enumerate() {
                    if let PresetSpec::Bump { direction, .. } = p {
                        if *direction > 2 {
                            return Err(invalid(&format!("movements.list[{k}].direction"), "must be 0, 1 or 2"));
                        }
                    }
                }
                if matches!(self.model, ModelSpec::Transport { .. } | ModelSpec::Parametric { .. }) {
                    return Err(invalid("model.kind", "preset movements need model.kind = \"boundary\""));
                }
            }
            _ => {}
        }
        if let ModelSpec::Parametric { inertia, mass, mu } = &self.model {
            for (k, v) in inertia.iter().enumerate() {
                positive(&format!("model.inertia[{k}]"), *v)?;
            }
            positive("model.mass", *mass)?;
            for (k, v) in mu.iter().enumerate() {
                if !(*v >= 0.0) {
                    return Err(invalid(&format!("model.mu[{k}]"), format!("must be non-negative, got {v}")));
                }
            }
            if !matches!(self.movements, Some(MovementSpec::RigidShell { .. })) {
                return Err(invalid("movements", "parametric models need kind = \"rigid-shell\""));
            }
        }
        let nm = &self.numerics;
        if nm.refinement > 6 {
            return Err(invalid("numerics.refinement", format!("at most 6, got {}", nm.refinement)));
        }
        if nm.quadrature < 2 {
            return Err(invalid("numerics.quadrature", "at least 2"));
        }
        positive("numerics.step", nm.step)?;
        positive("numerics.rank_tolerance", nm.rank_tolerance)?;
        positive("numerics.bracket_step", nm.bracket_step)?;
        if nm.depth == 0 {
            return Err(invalid("numerics.depth", "at least 1"));
        }
        if nm.initial_legs == 0 || nm.max_legs < nm.initial_legs {
            return Err(invalid("numerics.max_legs", "need 1 <= initial_legs <= max_legs"));
        }
        if let Some(c) = &self.controls {
            let given = [c.segments.is_some(), c.waveforms.is_some(), c.file.is_some()].iter().filter(|b| **b).count();
            if given != 1 {
                return Err(invalid("controls", "give exactly one of segments, waveforms or file"));
            }
            if let Some(d) = c.duration {
                positive("controls.duration", d)?;
            }
            if c.waveforms.is_some() && c.duration.is_none() {
                return Err(invalid("controls.duration", "required for waveforms"));
            }
            if let Some(w) = c.mollify {
                positive("controls.mollify", w)?;
            }
            if let Some(segs) = &c.segments {
                for (k, s) in segs.iter().enumerate() {
                    if !(s.end > s.start) || s.start < 0.0 {
                        return Err(invalid(&format!("controls.segments[{k}]"), "need 0 <= start < end"));
                    }
                }
            }
        }
        if let Some(t) = &self.target {
            positive("target.tolerance", t.tolerance)?;
            if t.waypoints.len() < 2 {
                return Err(invalid("target.waypoints", "at least two waypoints"));
            }
            if t.waypoints[0].t != 0.0 {
                return Err(invalid("target.waypoints[0].t", "first waypoint must be at t = 0"));
            }
            for (k, w) in t.waypoints.windows(2).enumerate() {
                if !(w[1].t > w[0].t) {
                    return Err(invalid(&format!("target.waypoints[{}].t", k + 1), "times must increase strictly"));
                }
            }
            for (k, w) in t.waypoints.iter().enumerate() {
                let q = w.quaternion;
                if !(q.iter().map(|v| v * v).sum::<f64>() > 0.0) {
                    return Err(invalid(&format!("target.waypoints[{k}].quaternion"), "must be nonzero"));
                }
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn n(&self) -> usize {
        match &self.movements {
            Some(MovementSpec::RigidShell { count }) => *count,
            Some(MovementSpec::Presets { list, .. }) => list.len(),
            None => 0,
        }
    }

    pub fn axes(&self) -> Option<[f64; 3]> {
        self.shape.as_ref().map(|s| s.axes.unwrap_or([1.0; 3]))
    }

    pub fn quadrature(&self) -> BallQuadrature {
        ball_quadrature(self.numerics.quadrature)
    }

    pub fn base(&self) -> Option<DeformationField> {
        self.axes().map(|[a, b, c]| DeformationField::ellipsoid(a, b, c))
    }

    pub fn density_field(&self, quad: &BallQuadrature) -> Result<DensityField, Error> {
        match &self.density {
            DensitySpec::Constant { value } => Ok(DensityField::Constant(*value)),
            DensitySpec::Inertia { targets } => density_for_inertia(&self.base().unwrap_or_else(DeformationField::zero), *targets, quad),
        }
    }

    /// Swimmer configuration; `None` for parametric models without a shape.
    pub fn config(&self, quad: &BallQuadrature) -> Result<Option<SwimmerConfig>, Error> {
        let Some(base) = self.base() else { return Ok(None) };
        let density = self.density_field(quad)?;
        let cfg = match &self.movements {
            None => SwimmerConfig::new(density, base, vec![]),
            Some(MovementSpec::RigidShell { count }) => rigid_shell_config_seeded(&density, &base, *count, quad, self.seed())?,
            Some(MovementSpec::Presets { list, rectify }) => {
                let fields: Vec<DeformationField> = list
                    .iter()
                    .map(|p| match p {
                        PresetSpec::Dilation { coefficient } => DeformationField::dilation(*coefficient),
                        PresetSpec::Translation { direction, coefficient } => DeformationField::translation(Vector3::from(*direction) * *coefficient),
                        PresetSpec::Rotation { axis, coefficient } => DeformationField::cross_base(Vector3::from(*axis) * *coefficient, &base),
                        PresetSpec::Bump { exponents, direction, coefficient } => DeformationField::bump(*exponents, *direction).scaled(*coefficient),
                    })
                    .collect();
                if *rectify {
                    rectify_fields_seeded(&density, &base, &fields, quad, self.seed())?
                } else {
                    SwimmerConfig::new(density, base, fields)
                }
            }
        };
        Ok(Some(cfg))
    }

    /// Mass model of the scenario.
    pub fn model(&self) -> Result<MassModel, Error> {
        let quad = self.quadrature();
        let config = self.config(&quad)?;
        let n = self.n();
        let model = match (&self.model, &config) {
            (ModelSpec::Parametric { inertia, mass, mu }, _) => MassModel::ShellRigid(ShellRigidModel::parametric(*inertia, *mass, *mu, n)),
            (ModelSpec::Transport { added_mass }, Some(cfg)) => {
                let mf = match (added_mass, self.axes()) {
                    (AddedMassSource::Oracle, Some([a, b, c])) => ellipsoid_added_mass(a, b, c),
                    _ => added_mass_matrix(&surface_mesh(cfg, &nalgebra::DVector::zeros(n), self.numerics.refinement)?)?,
                };
                MassModel::ShellRigid(ShellRigidModel::from_config(cfg, mf, &quad))
            }
            (ModelSpec::Boundary, Some(cfg)) => MassModel::Boundary(BoundaryModel::new(cfg.clone(), self.numerics.refinement, &quad)),
            (_, None) => return Err(Error::InvalidInput("a shape is required for this model".into())),
        };
        Ok(model)
    }

    /// Control schedule, read from disk when given as a file.
    pub fn schedule(&self) -> Result<Option<ControlSchedule>, ScenarioError> {
        let Some(c) = &self.controls else { return Ok(None) };
        let n = self.n();
        let sched = if let Some(segs) = &c.segments {
            for (k, s) in segs.iter().enumerate() {
                if s.values.len() != n {
                    return Err(invalid(&format!("controls.segments[{k}].values"), format!("need {n} values, got {}", s.values.len())));
                }
            }
            let segments: Vec<Segment> = segs.iter().map(|s| Segment { start: s.start, end: s.end, values: s.values.clone() }).collect();
            let end = segments.iter().map(|s| s.end).fold(0.0, f64::max);
            let mut sched = ControlSchedule::piecewise(n, segments).map_err(|e| invalid("controls.segments", e.to_string()))?;
            if let Some(d) = c.duration {
                if d < end {
                    return Err(invalid("controls.duration", format!("shorter than the last segment end {end}")));
                }
                if let ControlSchedule::Piecewise { duration, .. } = &mut sched {
                    *duration = d;
                }
            }
            sched
        } else if let Some(waves) = &c.waveforms {
            for (k, w) in waves.iter().enumerate() {
                if w.field >= n {
                    return Err(invalid(&format!("controls.waveforms[{k}].field"), format!("must be below {n}")));
                }
            }
            let terms = waves.iter().map(|w| Harmonic { field: w.field, amplitude: w.amplitude, frequency: w.frequency, phase: w.phase }).collect();
            ControlSchedule::harmonic(n, c.duration.unwrap_or(0.0), terms).map_err(|e| invalid("controls.waveforms", e.to_string()))?
        } else {
            let path = self.origin.join(c.file.as_ref().unwrap());
            let file = std::fs::File::open(&path).map_err(|e| invalid("controls.file", format!("cannot open {}: {e}", path.display())))?;
            let sched = ControlSchedule::read_csv(std::io::BufReader::new(file)).map_err(|e| invalid("controls.file", e.to_string()))?;
            if sched.dim() != n {
                return Err(invalid("controls.file", format!("schedule drives {} fields, scenario has {n}", sched.dim())));
            }
            sched
        };
        match c.mollify {
            Some(w) => smooth_controls(&sched, w).map(Some).map_err(|e| invalid("controls.mollify", e.to_string())),
            None => Ok(Some(sched)),
        }
    }

    /// Waypoint times, rotations and positions.
    pub fn waypoints(&self) -> Option<(Vec<f64>, Vec<Matrix3<f64>>, Vec<Vector3<f64>>)> {
        let t = self.target.as_ref()?;
        let times = t.waypoints.iter().map(|w| w.t).collect();
        let rots = t
            .waypoints
            .iter()
            .map(|w| {
                let [qw, qx, qy, qz] = w.quaternion;
                UnitQuaternion::from_quaternion(Quaternion::new(qw, qx, qy, qz)).to_rotation_matrix().into_inner()
            })
            .collect();
        let pos = t.waypoints.iter().map(|w| Vector3::from(w.position)).collect();
        Some((times, rots, pos))
    }
}

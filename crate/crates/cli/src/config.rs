//! Experiment configuration: one TOML file with `system`, `experiment`,
//! `numeric` and `output` tables.
//!
//! ```toml
//! [system]
//! kind = "perturbed_anosov"
//! delta = 0.01
//!
//! [experiment]
//! kind = "holonomy"
//! side = "u"
//!
//! [numeric]
//! n_pairs = 200
//! seed = 7
//!
//! [output]
//! dir = "out/holonomy"
//! plots = true
//! ```
//!
//! Every field except `experiment.kind` has a default that depends on the
//! experiment kind; see [`ExperimentConfig::resolve`].

use std::fmt;
use std::path::{Path, PathBuf};

use hlab_core::systems::{BaseShape, FiberShape, CAT};
use hlab_core::{SystemKind, SystemSpec};
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Bunching,
    Section,
    Holonomy,
    Conjugacy,
    Suspension,
    Leafexp,
    Gallery,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Bunching,
        ExperimentKind::Section,
        ExperimentKind::Holonomy,
        ExperimentKind::Conjugacy,
        ExperimentKind::Suspension,
        ExperimentKind::Leafexp,
        ExperimentKind::Gallery,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Bunching => "bunching",
            ExperimentKind::Section => "section",
            ExperimentKind::Holonomy => "holonomy",
            ExperimentKind::Conjugacy => "conjugacy",
            ExperimentKind::Suspension => "suspension",
            ExperimentKind::Leafexp => "leafexp",
            ExperimentKind::Gallery => "gallery",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// The library module an experiment of this kind exercises, for messages.
    pub fn module(self) -> &'static str {
        match self {
            ExperimentKind::Bunching => "bunching",
            ExperimentKind::Section => "sections",
            ExperimentKind::Holonomy => "foliations",
            ExperimentKind::Conjugacy | ExperimentKind::Suspension | ExperimentKind::Leafexp => "conjugacy",
            ExperimentKind::Gallery => "gallery",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    pub kind: Option<String>,
    pub matrix: Option<[[i64; 2]; 2]>,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    pub base_shape: Option<String>,
    pub fiber_shape: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    pub kind: Option<String>,
    /// Exponent condition names, e.g. `"ThmA_cu"`.
    pub conditions: Option<Vec<String>>,
    /// `"uniform"` or `"pointwise"`.
    pub mode: Option<String>,
    /// Leaf side for holonomy: `"u"` or `"s"`.
    pub side: Option<String>,
    /// Conjugacy method: `"center"` or `"stable"`.
    pub method: Option<String>,
    /// Tilt of the center fibers in degrees.
    pub tilt: Option<f64>,
    /// Gallery name.
    pub gallery: Option<String>,
    pub source_base: Option<[f64; 2]>,
    pub source_direction: Option<[f64; 2]>,
    pub target_base: Option<[f64; 2]>,
    pub target_direction: Option<[f64; 2]>,
    pub path: Option<Vec<[f64; 2]>>,
    /// Probe and control points of the leaf-expansivity experiment.
    pub point: Option<[f64; 2]>,
    pub control: Option<[f64; 2]>,
    /// Fiber contraction `(c·x, k·y + A·sin(ω·x/c))` of the section experiment.
    pub base_scale: Option<f64>,
    pub fiber_scale: Option<f64>,
    pub shear_amp: Option<f64>,
    pub shear_freq: Option<f64>,
    pub domain: Option<[f64; 2]>,
    pub fiber_bound: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericBlock {
    /// Points per side of base grids.
    pub grid: Option<usize>,
    /// Points along the fiber circle of T³ grids.
    pub fiber_grid: Option<usize>,
    /// Cells of the section grid.
    pub cells: Option<usize>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    /// Cone iterations per splitting estimate.
    pub splitting_iters: Option<usize>,
    pub margin: Option<f64>,
    pub radius: Option<f64>,
    pub n_pairs: Option<usize>,
    pub scale_min: Option<f64>,
    pub scale_max: Option<f64>,
    pub seed: Option<u64>,
    pub t_steps: Option<usize>,
    pub k_max: Option<usize>,
    /// Allowed shortfall of the fitted exponent below the prediction.
    pub verdict_margin: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: Option<PathBuf>,
    pub plots: Option<bool>,
}

/// The file as written by the user.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub system: SystemBlock,
    #[serde(default)]
    pub experiment: ExperimentBlock,
    #[serde(default)]
    pub numeric: NumericBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

/// Command-line settings that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub kind: Option<ExperimentKind>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub plots: bool,
    pub gallery: Option<String>,
}

/// A configuration with every default filled in and every name resolved.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub kind: ExperimentKind,
    pub system: SystemSpec,
    pub experiment: ExperimentBlock,
    pub numeric: NumericBlock,
    pub out_dir: PathBuf,
    pub plots: bool,
    /// The effective configuration, re-serialized; hashed into the manifest.
    pub canonical: String,
}

impl Resolved {
    pub fn seed(&self) -> u64 {
        self.numeric.seed.expect("filled by resolve")
    }
}

fn bad(field: &str, msg: impl fmt::Display) -> Failure {
    Failure::config("lab", format!("{field}: {msg}"))
}

fn one_of<T: Copy>(field: &str, value: &str, options: &[T], name: impl Fn(T) -> &'static str) -> Result<T, Failure> {
    options.iter().copied().find(|&o| name(o) == value).ok_or_else(|| {
        let names: Vec<&str> = options.iter().map(|&o| name(o)).collect();
        bad(field, format!("unknown value `{value}` (expected one of {})", names.join(", ")))
    })
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, Failure> {
        toml::from_str(text).map_err(|e| Failure::config("lab", format!("config does not parse: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config("lab", format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|f| f.context(&path.display().to_string()))
    }

    /// Apply overrides and per-kind defaults, and check every identifier.
    pub fn resolve(mut self, ov: &Overrides) -> Result<Resolved, Failure> {
        let kind = match (&self.experiment.kind, ov.kind) {
            (Some(k), Some(want)) if k != want.name() => {
                return Err(bad(
                    "experiment.kind",
                    format!("config describes `{k}` but the `{want}` subcommand was used"),
                ))
            }
            (_, Some(want)) => want,
            (Some(k), None) => one_of("experiment.kind", k, &ExperimentKind::ALL, ExperimentKind::name)?,
            (None, None) => return Err(bad("experiment.kind", "missing; name the experiment to run")),
        };
        self.experiment.kind = Some(kind.name().to_string());
        if let Some(g) = &ov.gallery {
            self.experiment.gallery = Some(g.clone());
        }
        if let Some(s) = ov.seed {
            self.numeric.seed = Some(s);
        }
        if let Some(d) = &ov.out {
            self.output.dir = Some(d.clone());
        }
        if ov.plots {
            self.output.plots = Some(true);
        }
        fill_defaults(kind, &mut self);
        let system = build_system(&self.system)?;
        check_system(kind, &self.experiment, &system)?;
        check_numeric(&self.numeric)?;
        let canonical = toml::to_string(&self).map_err(|e| Failure::config("lab", e.to_string()))?;
        Ok(Resolved {
            kind,
            system,
            experiment: self.experiment,
            numeric: self.numeric,
            out_dir: self.output.dir.unwrap_or_else(|| PathBuf::from("out").join(kind.name())),
            plots: self.output.plots.unwrap_or(false),
            canonical,
        })
    }
}

fn fill_defaults(kind: ExperimentKind, c: &mut ExperimentConfig) {
    let (s, e, n) = (&mut c.system, &mut c.experiment, &mut c.numeric);
    let default_system = match kind {
        ExperimentKind::Holonomy => "linear_anosov",
        ExperimentKind::Bunching => "perturbed_anosov",
        ExperimentKind::Conjugacy if e.method.as_deref() == Some("stable") => "perturbed_anosov",
        ExperimentKind::Conjugacy | ExperimentKind::Suspension => "perturbed_skew",
        ExperimentKind::Leafexp => "quotient_cat",
        ExperimentKind::Section | ExperimentKind::Gallery => "linear_anosov",
    };
    let sys_kind = s.kind.get_or_insert_with(|| default_system.to_string()).clone();
    s.matrix.get_or_insert(CAT);
    let perturbed = matches!(sys_kind.as_str(), "perturbed_anosov" | "perturbed_skew");
    s.delta.get_or_insert(if perturbed { 0.01 } else { 0.0 });
    let skew = matches!(sys_kind.as_str(), "skew_product" | "perturbed_skew");
    s.epsilon.get_or_insert(if skew { 0.05 } else { 0.0 });
    s.base_shape.get_or_insert_with(|| BaseShape::SinCross.name().to_string());
    s.fiber_shape.get_or_insert_with(|| FiberShape::SinB1.name().to_string());

    n.seed.get_or_insert(7);
    n.tol.get_or_insert(match kind {
        ExperimentKind::Conjugacy => 1e-7,
        _ => 1e-8,
    });
    n.verdict_margin.get_or_insert(0.05);
    match kind {
        ExperimentKind::Bunching => {
            e.mode.get_or_insert_with(|| "uniform".into());
            n.grid.get_or_insert(16);
            n.fiber_grid.get_or_insert(4);
            n.splitting_iters.get_or_insert(30);
            n.margin.get_or_insert(hlab_core::bunching::DEFAULT_MARGIN);
        }
        ExperimentKind::Section => {
            e.base_scale.get_or_insert(1.0 / 9.0);
            e.fiber_scale.get_or_insert(1.0 / 3.0);
            e.shear_amp.get_or_insert(1.0);
            e.shear_freq.get_or_insert(50.0);
            e.domain.get_or_insert([-1.0, 1.0]);
            e.fiber_bound.get_or_insert(2.0);
            n.cells.get_or_insert(1 << 16);
            n.max_iters.get_or_insert(100);
            n.n_pairs.get_or_insert(2000);
            n.scale_min.get_or_insert(1e-6);
            n.scale_max.get_or_insert(1e-3);
        }
        ExperimentKind::Holonomy => {
            let side = e.side.get_or_insert_with(|| "u".into()).clone();
            e.mode.get_or_insert_with(|| "uniform".into());
            let slope = (5f64.sqrt() - 1.0) / 2.0;
            let (dir, end) = if side == "s" { (-1.0 / slope, -0.5 / slope) } else { (slope, 0.5 * slope) };
            e.source_base.get_or_insert([0.0, 0.0]);
            e.source_direction.get_or_insert([0.0, 1.0]);
            e.target_direction.get_or_insert([0.0, 1.0]);
            if s.matrix == Some(CAT) {
                e.target_base.get_or_insert([0.5, end.rem_euclid(1.0)]);
                let wrap = |y: f64| y.rem_euclid(1.0);
                e.path.get_or_insert_with(|| {
                    vec![
                        [0.0, 0.0],
                        [0.125, wrap(0.125 * dir)],
                        [0.25, wrap(0.25 * dir)],
                        [0.375, wrap(0.375 * dir)],
                        [0.5, wrap(end)],
                    ]
                });
            }
            e.conditions.get_or_insert_with(|| vec![if side == "s" { "Es".into() } else { "Eu".into() }]);
            n.radius.get_or_insert(0.1);
            n.grid.get_or_insert(16);
            n.splitting_iters.get_or_insert(30);
            n.margin.get_or_insert(hlab_core::bunching::DEFAULT_MARGIN);
            n.n_pairs.get_or_insert(200);
            n.scale_min.get_or_insert(1e-6);
            n.scale_max.get_or_insert(1e-2);
        }
        ExperimentKind::Conjugacy => {
            e.method.get_or_insert_with(|| "center".into());
            n.radius.get_or_insert(0.1);
            n.grid.get_or_insert(8);
            n.fiber_grid.get_or_insert(2);
        }
        ExperimentKind::Suspension => {
            n.radius.get_or_insert(0.1);
            n.grid.get_or_insert(2);
            n.fiber_grid.get_or_insert(2);
            n.t_steps.get_or_insert(64);
        }
        ExperimentKind::Leafexp => {
            e.point.get_or_insert([0.02, 0.01]);
            e.control.get_or_insert([0.027, 0.004]);
            n.k_max.get_or_insert(25);
        }
        ExperimentKind::Gallery => {
            e.gallery.get_or_insert_with(|| "slanted-conjugacy".into());
            n.n_pairs.get_or_insert(400);
        }
    }
}

fn build_system(s: &SystemBlock) -> Result<SystemSpec, Failure> {
    let kind = s.kind.as_deref().expect("filled by defaults");
    let kind = one_of("system.kind", kind, &SystemKind::ALL, SystemKind::name)?;
    let base = s.base_shape.as_deref().expect("filled by defaults");
    let base = BaseShape::parse(base).ok_or_else(|| bad("system.base_shape", format!("unknown value `{base}`")))?;
    let fiber = s.fiber_shape.as_deref().expect("filled by defaults");
    let fiber = FiberShape::parse(fiber).ok_or_else(|| {
        bad("system.fiber_shape", format!("unknown value `{fiber}` (expected sin_b1 or sin_z_cos_b1)"))
    })?;
    SystemSpec::new(
        kind,
        s.matrix.expect("filled by defaults"),
        s.delta.expect("filled by defaults"),
        s.epsilon.expect("filled by defaults"),
        base,
        fiber,
    )
    .map_err(|e| Failure::from_lab("systems", e).context("[system]"))
    .and_then(|sys| {
        if sys.delta() == 0.0 && sys.epsilon() == 0.0 {
            return Ok(sys);
        }
        hlab_core::bunching::admission_check(&sys).map(|_| sys).map_err(|e| {
            Failure::config(
                "bunching",
                format!("system.delta/system.epsilon: amplitudes outside the validity bounds ({e})"),
            )
        })
    })
}

fn check_system(kind: ExperimentKind, e: &ExperimentBlock, sys: &SystemSpec) -> Result<(), Failure> {
    let need = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(bad("system.kind", format!("`{}` cannot be used here: {kind} needs {what}", sys.kind())))
        }
    };
    match kind {
        ExperimentKind::Holonomy => {
            need(sys.dim() == 2 && sys.kind() != SystemKind::QuotientCat, "a map of T²")?;
            one_of("experiment.side", e.side.as_deref().unwrap_or(""), &["u", "s"], |s| s)?;
            if e.path.is_none() || e.target_base.is_none() {
                return Err(bad(
                    "experiment.path",
                    "required (with experiment.target_base) for matrices other than the Cat map",
                ));
            }
        }
        ExperimentKind::Conjugacy => {
            let method = one_of("experiment.method", e.method.as_deref().unwrap_or(""), &["center", "stable"], |s| s)?;
            if method == "center" {
                need(matches!(sys.kind(), SystemKind::SkewProduct | SystemKind::PerturbedSkew), "a skew product")?;
            } else {
                need(matches!(sys.kind(), SystemKind::LinearAnosov | SystemKind::PerturbedAnosov), "a map of T²")?;
                if e.tilt.is_some() {
                    return Err(bad("experiment.tilt", "only applies to the center method"));
                }
            }
        }
        ExperimentKind::Suspension => {
            need(matches!(sys.kind(), SystemKind::SkewProduct | SystemKind::PerturbedSkew), "a skew product")?;
        }
        ExperimentKind::Leafexp => need(sys.kind() == SystemKind::QuotientCat, "quotient_cat")?,
        ExperimentKind::Bunching | ExperimentKind::Section | ExperimentKind::Gallery => {}
    }
    if let Some(mode) = &e.mode {
        one_of("experiment.mode", mode, &["uniform", "pointwise"], |s| s)?;
    }
    if let Some(conds) = &e.conditions {
        for c in conds {
            hlab_core::bunching::ExponentCondition::parse(c)
                .ok_or_else(|| bad("experiment.conditions", format!("unknown condition `{c}`")))?;
        }
    }
    if let Some(g) = &e.gallery {
        hlab_core::gallery::GalleryName::parse(g)
            .map_err(|err| Failure::from_lab("gallery", err).context("experiment.gallery"))?;
    }
    Ok(())
}

fn check_numeric(n: &NumericBlock) -> Result<(), Failure> {
    let positive = |field: &str, v: Option<f64>| match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(bad(field, format!("must be positive and finite, got {x}"))),
        _ => Ok(()),
    };
    positive("numeric.tol", n.tol)?;
    positive("numeric.radius", n.radius)?;
    positive("numeric.scale_min", n.scale_min)?;
    positive("numeric.scale_max", n.scale_max)?;
    positive("numeric.verdict_margin", n.verdict_margin)?;
    if let Some(m) = n.margin {
        if !(m >= 0.0) {
            return Err(bad("numeric.margin", format!("must be >= 0, got {m}")));
        }
    }
    for (field, v, lo, hi) in [
        ("numeric.grid", n.grid, 1, 256),
        ("numeric.fiber_grid", n.fiber_grid, 1, 64),
        ("numeric.cells", n.cells, 2, 1 << 22),
        ("numeric.n_pairs", n.n_pairs, 1, 1_000_000),
        ("numeric.t_steps", n.t_steps, 16, 4096),
        ("numeric.k_max", n.k_max, 1, 60),
        ("numeric.splitting_iters", n.splitting_iters, 1, 200),
        ("numeric.max_iters", n.max_iters, 1, 10_000),
    ] {
        if let Some(v) = v {
            if v < lo || v > hi {
                return Err(bad(field, format!("{v} is outside [{lo}, {hi}]")));
            }
        }
    }
    Ok(())
}

//! Run configuration: a single strict JSON document. See `docs/config.md`.

use std::path::Path;
use std::sync::Arc;

use emfield_core::grid::{AngularScheme, GridSpec, LightconeGrid};
use emfield_core::ladder::{FieldKind, OpKind};
use emfield_core::pairing::{GramContext, LabelId, PhysicalConstants};
use emfield_core::presets;
use emfield_core::tensor::{AntisymTensor2, FourVector};
use emfield_core::testfn::AnalyticTestFunction;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub constants: PhysicalConstants,
    pub functions: Vec<FunctionDecl>,
    pub suites: Vec<String>,
    pub seed: Option<u64>,
    pub deterministic: bool,
    pub tolerances: Tolerances,
    /// Operator words for `expect`, each entry `"create <label>"` or `"annihilate <label>"`.
    pub words: Vec<Vec<String>>,
    /// Field products for `expect`.
    pub fields: Vec<Vec<FieldDecl>>,
    /// Labels for `covariance` and `sample`; defaults to every real function.
    pub sample_labels: Vec<String>,
    pub samples: Option<usize>,
    pub lorentz: LorentzConfig,
    pub convergence: ConvergenceConfig,
    /// Largest operator-word length the ladder engine accepts.
    pub word_cap: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub algebraic: f64,
    pub maps: f64,
    pub pairing: f64,
    pub commutator: f64,
    pub equivalence: f64,
    pub positivity: f64,
    pub rotation: f64,
    pub boost: f64,
    pub convergence: f64,
    /// Lower bound on the φ contrast and on the box non-linearity.
    pub contrast: f64,
    /// Width of the moment bands, in standard errors.
    pub band_sigmas: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            algebraic: 1e-12,
            maps: 1e-13,
            pairing: 1e-13,
            commutator: 1e-13,
            equivalence: 1e-13,
            positivity: 1e-10,
            rotation: 1e-13,
            boost: 1e-3,
            convergence: 1e-6,
            contrast: 1e-3,
            band_sigmas: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LorentzConfig {
    pub rapidities: Vec<f64>,
    /// Spatial boost axis: 0 = x, 1 = y, 2 = z.
    pub axis: usize,
    pub grid: GridSpec,
}

impl Default for LorentzConfig {
    fn default() -> Self {
        LorentzConfig {
            rapidities: vec![0.3],
            axis: 2,
            grid: GridSpec::new(32, AngularScheme::Cube98),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub radial_levels: Vec<usize>,
    pub angular: Vec<AngularScheme>,
    /// Two function names; the built-in default pair when absent.
    pub pair: Option<[String; 2]>,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            radial_levels: vec![8, 16, 32],
            angular: vec![AngularScheme::Lebedev26, AngularScheme::Cube98],
            pair: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDecl {
    pub kind: FieldKind,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionDecl {
    Gaussian {
        name: String,
        /// Six `[re, im]` pairs in the order 01, 02, 03, 12, 13, 23, or
        /// sixteen pairs giving the full row-major 4×4 matrix.
        amplitude: Vec<[f64; 2]>,
        /// Three components: on-shell center `(|c⃗|, c⃗)`. Four: explicit `(c⁰, c⃗)`.
        center: Vec<f64>,
        width: f64,
        #[serde(default)]
        real: bool,
    },
    PureGauge {
        name: String,
        w: [f64; 4],
        center: Vec<f64>,
        width: f64,
    },
}

impl FunctionDecl {
    pub fn name(&self) -> &str {
        match self {
            FunctionDecl::Gaussian { name, .. } | FunctionDecl::PureGauge { name, .. } => name,
        }
    }

    pub fn is_real(&self) -> bool {
        matches!(self, FunctionDecl::Gaussian { real: true, .. })
    }

    pub fn build(&self) -> Result<AnalyticTestFunction, CliError> {
        let bad = |msg: String| CliError::Config(format!("function `{}`: {msg}", self.name()));
        match self {
            FunctionDecl::Gaussian {
                amplitude,
                center,
                width,
                real,
                ..
            } => {
                let amplitude = parse_amplitude(amplitude).map_err(bad)?;
                let center = parse_center(center).map_err(bad)?;
                AnalyticTestFunction::gaussian_packet(amplitude, center, *width, *real)
                    .map_err(|e| bad(e.to_string()))
            }
            FunctionDecl::PureGauge { w, center, width, .. } => {
                let center = parse_center(center).map_err(bad)?;
                AnalyticTestFunction::pure_gauge(*w, center, *width).map_err(|e| bad(e.to_string()))
            }
        }
    }
}

fn parse_amplitude(pairs: &[[f64; 2]]) -> Result<AntisymTensor2, String> {
    let c = |p: &[f64; 2]| Complex64::new(p[0], p[1]);
    match pairs.len() {
        6 => Ok(AntisymTensor2::from_components(std::array::from_fn(|i| c(&pairs[i])))),
        16 => {
            let m: [[Complex64; 4]; 4] = std::array::from_fn(|r| std::array::from_fn(|s| c(&pairs[4 * r + s])));
            AntisymTensor2::try_from_matrix(&m).map_err(|e| e.to_string())
        }
        n => Err(format!("amplitude needs 6 or 16 [re, im] pairs, got {n}")),
    }
}

fn parse_center(center: &[f64]) -> Result<FourVector, String> {
    if center.iter().any(|x| !x.is_finite()) {
        return Err("center components must be finite".into());
    }
    match *center {
        [x, y, z] => Ok(FourVector::on_shell([x, y, z])),
        [t, x, y, z] => Ok(FourVector::new(t, x, y, z)),
        _ => Err(format!("center needs 3 or 4 components, got {}", center.len())),
    }
}

pub const SUITES: [&str; 11] = [
    "tensor",
    "grid",
    "maps",
    "pairing",
    "commutators",
    "equivalence",
    "appendix",
    "covariance",
    "sampler",
    "lorentz",
    "convergence",
];

pub const DEFAULT_SAMPLES: usize = 200_000;

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |e: emfield_core::Error| CliError::Config(e.to_string());
        self.grid.validate().map_err(cfg)?;
        self.lorentz.grid.validate().map_err(cfg)?;
        self.constants.validate().map_err(cfg)?;
        let mut seen = std::collections::HashSet::new();
        for f in &self.functions {
            if !seen.insert(f.name()) {
                return Err(CliError::Config(format!("duplicate function name `{}`", f.name())));
            }
            f.build()?;
        }
        for s in &self.suites {
            if s != "all" && !SUITES.contains(&s.as_str()) {
                return Err(CliError::Config(format!("unknown suite `{s}`")));
            }
        }
        if self.convergence.radial_levels.len() < 3 {
            return Err(CliError::Config(format!(
                "convergence needs at least 3 radial levels, got {}",
                self.convergence.radial_levels.len()
            )));
        }
        if self.convergence.radial_levels.contains(&0) {
            return Err(CliError::Config("radial levels must be positive".into()));
        }
        if self.lorentz.axis > 2 {
            return Err(CliError::Config(format!("boost axis must be 0, 1 or 2, got {}", self.lorentz.axis)));
        }
        if self.samples == Some(0) {
            return Err(CliError::Config("samples must be at least 1".into()));
        }
        for word in &self.words {
            for entry in word {
                let mut parts = entry.split_whitespace();
                let kind = parts.next().unwrap_or_default();
                kind.parse::<OpKind>().map_err(cfg)?;
            }
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("algebraic", t.algebraic),
            ("maps", t.maps),
            ("pairing", t.pairing),
            ("commutator", t.commutator),
            ("equivalence", t.equivalence),
            ("positivity", t.positivity),
            ("rotation", t.rotation),
            ("boost", t.boost),
            ("convergence", t.convergence),
            ("contrast", t.contrast),
            ("band_sigmas", t.band_sigmas),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("tolerance `{name}` must be a finite non-negative number")));
            }
        }
        Ok(())
    }

    /// Suites named on the command line win over those in the file; `all` expands.
    pub fn resolve_suites(&self, cli: &[String]) -> Result<Vec<&'static str>, CliError> {
        let requested: Vec<&str> = if !cli.is_empty() {
            cli.iter().map(String::as_str).collect()
        } else if !self.suites.is_empty() {
            self.suites.iter().map(String::as_str).collect()
        } else {
            vec!["all"]
        };
        let mut out: Vec<&'static str> = Vec::new();
        for name in requested {
            if name == "all" {
                out.extend(SUITES);
            } else if let Some(s) = SUITES.iter().find(|s| **s == name) {
                out.push(s);
            } else {
                return Err(CliError::Config(format!("unknown suite `{name}`")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        out.retain(|s| seen.insert(*s));
        Ok(out)
    }

    pub fn grid(&self) -> Result<Arc<LightconeGrid>, CliError> {
        LightconeGrid::build(&self.grid)
            .map(Arc::new)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn analytic(&self, name: &str) -> Result<AnalyticTestFunction, CliError> {
        self.functions
            .iter()
            .find(|f| f.name() == name)
            .ok_or_else(|| CliError::Config(format!("unknown function `{name}`")))?
            .build()
    }

    /// Registers every declared function sampled on the configured grid.
    pub fn context(&self, grid: &Arc<LightconeGrid>) -> Result<GramContext, CliError> {
        let mut ctx = GramContext::new(self.constants);
        if let Some(cap) = self.word_cap {
            ctx.set_word_cap(cap).map_err(|e| CliError::Config(e.to_string()))?;
        }
        for f in &self.functions {
            ctx.register(f.name(), f.build()?.sample_on_grid(grid))
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(ctx)
    }

    /// Labels for the sampler: `sample_labels` if given, else every real
    /// declared function, else three seeded random real packets.
    pub fn sample_labels(&self, ctx: &mut GramContext, seed: u64) -> Result<Vec<LabelId>, CliError> {
        if !self.sample_labels.is_empty() {
            return self
                .sample_labels
                .iter()
                .map(|n| ctx.lookup(n).map_err(|e| CliError::Config(e.to_string())))
                .collect();
        }
        let declared: Vec<&str> = self.functions.iter().filter(|f| f.is_real()).map(|f| f.name()).collect();
        if !declared.is_empty() {
            return declared
                .iter()
                .map(|n| ctx.lookup(n).map_err(|e| CliError::Config(e.to_string())))
                .collect();
        }
        let grid = self.grid()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..3)
            .map(|i| {
                let f = presets::random_packet(&mut rng, true).sample_on_grid(&grid);
                ctx.register(&format!("random{i}"), f)
                    .map_err(|e| CliError::Config(e.to_string()))
            })
            .collect()
    }
}

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{DensityBounds, EosSpec};
use crate::gamma::{DEFAULT_ORDER_CAP, MAX_WEIGHTED_ORDER};
use crate::integrator::{BreakdownCriteria, StepControl};
use crate::spectral::Grid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Delta,
    Eps,
}

impl SweepParam {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Delta => "delta",
            Self::Eps => "eps",
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(Self::Delta),
            "eps" => Ok(Self::Eps),
            other => Err(Error::Config(format!("unknown sweep parameter '{other}' (expected delta or eps)"))),
        }
    }
}

/// Irrotational profile pair `(χ, χ̃)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BumpProfile {
    /// `χ = e^{−|x|²}`, `χ̃ = (1 − |x|²)e^{−|x|²}`.
    Gauss,
    /// `χ = (1 + x¹/2)e^{−|x|²}`, `χ̃ = e^{−|x|²}`.
    GaussTilted,
}

/// Stream-function profile `ψ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlobProfile {
    /// `ψ = e^{−|x|²}`: a single vortex.
    Gauss,
    /// `ψ = x¹e^{−|x|²}`: a vortex pair.
    Dipole,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n: usize,
    pub half_width: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: 256,
            half_width: 16.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub eps_target: f64,
    pub delta_target: f64,
    pub bump: BumpProfile,
    pub blob: BlobProfile,
    /// Derivative count in the data-size functionals.
    pub k_max: usize,
    /// Largest center offset drawn from the seed.
    pub jitter: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            eps_target: 0.1,
            delta_target: 0.01,
            bump: BumpProfile::Gauss,
            blob: BlobProfile::Gauss,
            k_max: 3,
            jitter: 0.25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlConfig {
    pub cfl: f64,
    pub dt_max: f64,
    /// Absent: integrate to the end of the domain-of-dependence window.
    pub t_end: Option<f64>,
    pub dealias_each_stage: bool,
}

impl Default for ControlConfig {
    fn default() -> Self {
        let s = StepControl::default();
        Self {
            cfl: s.cfl,
            dt_max: s.dt_max,
            t_end: None,
            dealias_each_stage: s.dealias_each_stage,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    pub m_max: usize,
    pub order_cap: usize,
    pub report_every: f64,
    /// Absent: no checkpoints.
    pub checkpoint_every: Option<f64>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            m_max: 2,
            order_cap: DEFAULT_ORDER_CAP,
            report_every: 2.5,
            checkpoint_every: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BreakdownConfig {
    pub gradient_factor: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub tail_fraction: f64,
}

impl Default for BreakdownConfig {
    fn default() -> Self {
        let c = BreakdownCriteria::default();
        Self {
            gradient_factor: c.gradient_factor,
            rho_min: c.bounds.rho_min,
            rho_max: c.bounds.rho_max,
            tail_fraction: c.tail_fraction,
        }
    }
}

impl BreakdownConfig {
    pub fn criteria(&self) -> BreakdownCriteria {
        BreakdownCriteria {
            gradient_factor: self.gradient_factor,
            bounds: DensityBounds {
                rho_min: self.rho_min,
                rho_max: self.rho_max,
            },
            tail_fraction: self.tail_fraction,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub param: Option<SweepParam>,
    pub values: Vec<f64>,
    /// 0 uses every available core.
    pub threads: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub out_dir: PathBuf,
    /// Write measured wall times into the sweep CSV (breaks byte-for-byte
    /// reproducibility of the file).
    pub wall_time: bool,
    /// Write one norms CSV per run.
    pub norms: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            wall_time: false,
            norms: true,
        }
    }
}

/// Everything that determines a run or a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub eos: EosSpec,
    pub grid: GridConfig,
    pub data: DataConfig,
    pub control: ControlConfig,
    pub diagnostics: DiagnosticsConfig,
    pub breakdown: BreakdownConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            seed: 0,
            eos: EosSpec::chaplygin(),
            grid: GridConfig::default(),
            data: DataConfig::default(),
            control: ControlConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
            breakdown: BreakdownConfig::default(),
            sweep: SweepConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Shipped scenarios.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Chaplygin gas, `ε = 0.1`, vorticity size swept.
    ChaplyginDelta,
    /// Polytropic gas with `γ = 2`, irrotational, data size swept.
    PolytropicEps,
    /// Small and fast.
    Smoke,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::ChaplyginDelta, Preset::PolytropicEps, Preset::Smoke];

    pub fn name(&self) -> &'static str {
        match self {
            Self::ChaplyginDelta => "chaplygin-delta",
            Self::PolytropicEps => "polytropic-eps",
            Self::Smoke => "smoke",
        }
    }

    pub fn config(&self) -> ScenarioConfig {
        let mut c = ScenarioConfig {
            name: self.name().into(),
            ..ScenarioConfig::default()
        };
        match self {
            Self::ChaplyginDelta => {
                c.grid = GridConfig {
                    n: 512,
                    half_width: 32.0,
                };
                c.data.eps_target = 0.1;
                c.data.delta_target = 0.01;
                c.sweep = SweepConfig {
                    param: Some(SweepParam::Delta),
                    values: vec![0.04, 0.02, 0.01, 0.005],
                    threads: 0,
                };
            }
            Self::PolytropicEps => {
                c.eos = EosSpec::polytropic(2.0);
                c.grid = GridConfig {
                    n: 512,
                    half_width: 32.0,
                };
                c.data.eps_target = 0.2;
                c.data.delta_target = 0.0;
                c.sweep = SweepConfig {
                    param: Some(SweepParam::Eps),
                    values: vec![0.4, 0.28, 0.2, 0.14],
                    threads: 0,
                };
            }
            Self::Smoke => {
                c.grid = GridConfig {
                    n: 64,
                    half_width: 8.0,
                };
                c.control.t_end = Some(1.0);
                c.diagnostics.report_every = 0.5;
                c.sweep = SweepConfig {
                    param: Some(SweepParam::Delta),
                    values: vec![0.02, 0.01],
                    threads: 0,
                };
            }
        }
        c
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|p| p.name()).collect();
            Error::Config(format!("unknown preset '{s}' (available: {})", names.join(", ")))
        })
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// A preset with the keys present in `text` laid over it.
    pub fn preset_with_overrides(preset: Preset, text: &str) -> Result<Self> {
        let overlay: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut base = toml::Table::try_from(preset.config()).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut base, overlay);
        let cfg: Self = base.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.n, self.grid.half_width)
    }

    pub fn step_control(&self, t_end: f64) -> StepControl {
        StepControl {
            cfl: self.control.cfl,
            dt_max: self.control.dt_max,
            t_end,
            dealias_each_stage: self.control.dealias_each_stage,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.eos.validate()?;
        self.grid()?;
        let d = &self.data;
        if !(d.eps_target >= 0.0 && d.eps_target <= 0.5) {
            return Err(Error::Config(format!("eps_target must lie in [0, 0.5], got {}", d.eps_target)));
        }
        if !(d.delta_target >= 0.0 && d.delta_target <= d.eps_target) {
            return Err(Error::Config(format!(
                "delta_target must lie in [0, eps_target = {}], got {}",
                d.eps_target, d.delta_target
            )));
        }
        if d.k_max > MAX_WEIGHTED_ORDER {
            return Err(Error::Config(format!("k_max = {} exceeds {MAX_WEIGHTED_ORDER}", d.k_max)));
        }
        if !(d.jitter >= 0.0 && d.jitter <= 1.0) {
            return Err(Error::Config(format!("jitter must lie in [0, 1], got {}", d.jitter)));
        }
        let g = &self.diagnostics;
        if g.m_max > g.order_cap {
            return Err(Error::Config(format!("m_max = {} exceeds order_cap = {}", g.m_max, g.order_cap)));
        }
        if !(g.report_every > 0.0) {
            return Err(Error::Config("report_every must be positive".into()));
        }
        if let Some(c) = g.checkpoint_every {
            if !(c > 0.0) {
                return Err(Error::Config("checkpoint_every must be positive".into()));
            }
        }
        let b = &self.breakdown;
        if !(b.rho_min > 0.0 && b.rho_min < 1.0 && b.rho_max > 1.0) {
            return Err(Error::Config("density window must contain 1 with rho_min > 0".into()));
        }
        if !(b.gradient_factor > 1.0 && b.tail_fraction > 0.0 && b.tail_fraction < 1.0) {
            return Err(Error::Config("gradient_factor must exceed 1 and tail_fraction lie in (0, 1)".into()));
        }
        self.step_control(self.control.t_end.unwrap_or(0.0)).validate()?;
        validate_sweep_values(&self.sweep.values)
    }
}

/// Sweep values must be positive and strictly descending.
pub fn validate_sweep_values(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Config(format!("sweep values must be positive, got {values:?}")));
    }
    if values.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Config(format!("sweep values must be descending, got {values:?}")));
    }
    Ok(())
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parses `0.04,0.02,0.01`.
pub fn parse_values(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| Error::Config(format!("bad sweep value '{s}': {e}"))))
        .collect()
}

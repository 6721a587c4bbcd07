use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use echotomo::flow::TraceLimits;
use echotomo::reconstruct::{ReconstructionConfig, SegmentationParams};

/// Everything a run depends on. Output files are a function of this value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scene: PathBuf,
    pub out: PathBuf,
    /// Entry angles of the direction-sweep spectrum.
    pub x_grid: usize,
    /// Directions per entry angle of the direction-sweep spectrum.
    pub dir_grid: usize,
    /// Columns of the diagonal spectrum.
    pub diag_grid: usize,
    /// Base direction sweep of the two-point geodesic search.
    pub sweep: usize,
    /// Angular stencil of the slope estimate.
    pub stencil: f64,
    pub max_reflections: usize,
    /// Time budget; defaults to 100 S0 radii.
    pub max_time: Option<f64>,
    pub tangency_threshold: f64,
    pub k_max: usize,
    pub max_gap_columns: usize,
    pub max_cusp_columns: usize,
    pub cusp_tolerance: f64,
    pub hull_directions: usize,
    pub hull_offsets: usize,
    /// Keep directions and branch labels in stored datasets.
    pub oracle: bool,
    /// Rays in the `simulate` fan.
    pub rays: usize,
    /// Polar angle of the fan's entry point, radians.
    pub entry_angle: f64,
    /// Half opening of the fan about the inward normal, radians.
    pub fan_half_angle: f64,
    /// Random rays per property in `verify`.
    pub checks: usize,
    pub cover_radius: f64,
    pub exclusion: f64,
    /// Seed of the random test points in `verify`; sweeps never use it.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let seg = SegmentationParams::default();
        Self {
            scene: PathBuf::from("scene.json"),
            out: PathBuf::from("out"),
            x_grid: 256,
            dir_grid: 1024,
            diag_grid: 4096,
            sweep: echotomo::spectrum::DEFAULT_SWEEP,
            stencil: echotomo::spectrum::DEFAULT_STENCIL,
            max_reflections: 200,
            max_time: None,
            tangency_threshold: 1e-7,
            k_max: 6,
            max_gap_columns: seg.max_gap_columns,
            max_cusp_columns: seg.max_cusp_columns,
            cusp_tolerance: seg.cusp_tolerance,
            hull_directions: 360,
            hull_offsets: 2048,
            oracle: false,
            rays: 16,
            entry_angle: std::f64::consts::PI,
            fan_half_angle: 1.2,
            checks: 10_000,
            cover_radius: 0.01,
            exclusion: 0.05,
            seed: 1,
        }
    }
}

/// Flags mirroring [`RunConfig`]; each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON file with a full or partial run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub x_grid: Option<usize>,
    #[arg(long)]
    pub dir_grid: Option<usize>,
    #[arg(long)]
    pub diag_grid: Option<usize>,
    #[arg(long)]
    pub sweep: Option<usize>,
    #[arg(long)]
    pub stencil: Option<f64>,
    #[arg(long)]
    pub max_reflections: Option<usize>,
    #[arg(long)]
    pub max_time: Option<f64>,
    #[arg(long)]
    pub tangency_threshold: Option<f64>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub max_gap_columns: Option<usize>,
    #[arg(long)]
    pub max_cusp_columns: Option<usize>,
    #[arg(long)]
    pub cusp_tolerance: Option<f64>,
    #[arg(long)]
    pub hull_directions: Option<usize>,
    #[arg(long)]
    pub hull_offsets: Option<usize>,
    /// Keep oracle columns in stored datasets.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long)]
    pub rays: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub entry_angle: Option<f64>,
    #[arg(long)]
    pub fan_half_angle: Option<f64>,
    #[arg(long)]
    pub checks: Option<usize>,
    #[arg(long)]
    pub cover_radius: Option<f64>,
    #[arg(long)]
    pub exclusion: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

macro_rules! apply {
    ($cfg:ident, $o:ident, $($f:ident),*) => {
        $(if let Some(v) = $o.$f.clone() { $cfg.$f = v; })*
    };
}

impl Overrides {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => load(p)?,
            None => RunConfig::default(),
        };
        apply!(
            cfg,
            self,
            scene,
            out,
            x_grid,
            dir_grid,
            diag_grid,
            sweep,
            stencil,
            max_reflections,
            tangency_threshold,
            k_max,
            max_gap_columns,
            max_cusp_columns,
            cusp_tolerance,
            hull_directions,
            hull_offsets,
            rays,
            entry_angle,
            fan_half_angle,
            checks,
            cover_radius,
            exclusion,
            seed
        );
        if self.max_time.is_some() {
            cfg.max_time = self.max_time;
        }
        cfg.oracle |= self.oracle;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load(path: &Path) -> Result<RunConfig> {
    let s = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&s).with_context(|| format!("parsing {}", path.display()))
}

const MIN_RESOLUTION: usize = 256;
const MAX_RESOLUTION: usize = 65536;

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("x_grid", self.x_grid),
            ("dir_grid", self.dir_grid),
            ("diag_grid", self.diag_grid),
        ] {
            if !v.is_power_of_two() || !(MIN_RESOLUTION..=MAX_RESOLUTION).contains(&v) {
                bail!("{name} = {v} must be a power of two in {MIN_RESOLUTION}..={MAX_RESOLUTION}");
            }
        }
        for (name, v) in [
            ("stencil", self.stencil),
            ("tangency_threshold", self.tangency_threshold),
            ("cusp_tolerance", self.cusp_tolerance),
            ("cover_radius", self.cover_radius),
            ("exclusion", self.exclusion),
            ("fan_half_angle", self.fan_half_angle),
            ("max_time", self.max_time.unwrap_or(1.0)),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{name} = {v} must be positive");
            }
        }
        if self.fan_half_angle >= std::f64::consts::FRAC_PI_2 {
            bail!("fan_half_angle must be below pi/2");
        }
        for (name, v) in [
            ("sweep", self.sweep),
            ("max_reflections", self.max_reflections),
            ("k_max", self.k_max),
            ("hull_directions", self.hull_directions),
            ("hull_offsets", self.hull_offsets),
            ("rays", self.rays),
        ] {
            if v == 0 {
                bail!("{name} must be positive");
            }
        }
        Ok(())
    }

    pub fn limits(&self) -> TraceLimits {
        TraceLimits {
            max_reflections: self.max_reflections,
            max_time: self.max_time,
            tangency_threshold: self.tangency_threshold,
        }
    }

    pub fn reconstruction(&self) -> ReconstructionConfig {
        ReconstructionConfig {
            k_max: self.k_max,
            segmentation: SegmentationParams {
                max_gap_columns: self.max_gap_columns,
                max_cusp_columns: self.max_cusp_columns,
                cusp_tolerance: self.cusp_tolerance,
                ..SegmentationParams::default()
            },
        }
    }

    /// Hash of everything but the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        echotomo::io::config_hash(&c)
    }
}

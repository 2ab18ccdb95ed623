//! JSON run configuration: strict parsing (unknown keys rejected with the
//! offending key named), eager model validation, and assembly into the
//! runtime structures.

use crate::criterion::CheckConfig;
use crate::error::{MyersError, Result};
use crate::expr::ScalarFieldExpr;
use crate::geometry::{GeomParams, ManifoldModel, ScalarField};
use crate::sde::SamplerConfig;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub manifold: ManifoldSection,
    #[serde(default = "default_h")]
    pub h: String,
    #[serde(default)]
    pub sde: SdeSection,
    #[serde(default)]
    pub spectral: SpectralSection,
    #[serde(default)]
    pub geometry: Option<GeometrySection>,
    #[serde(default)]
    pub probes: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub output: Option<String>,
}

fn default_h() -> String {
    "0".to_string()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum ManifoldSection {
    Sphere {
        radius: f64,
    },
    FlatTorus {
        lu: f64,
        lv: f64,
    },
    ExpressionMetric {
        lu: f64,
        lv: f64,
        g11: String,
        g12: String,
        g22: String,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeSection {
    #[serde(default = "d_dt")]
    pub dt: f64,
    #[serde(default = "d_tmax")]
    pub t_max: f64,
    #[serde(default = "d_npaths")]
    pub n_paths: usize,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_stride")]
    pub record_stride: usize,
    #[serde(default = "d_margin")]
    pub chart_switch_margin: f64,
}

fn d_dt() -> f64 {
    2e-3
}
fn d_tmax() -> f64 {
    10.0
}
fn d_npaths() -> usize {
    20_000
}
fn d_seed() -> u64 {
    42
}
fn d_stride() -> usize {
    10
}
fn d_margin() -> f64 {
    1.5
}

impl Default for SdeSection {
    fn default() -> Self {
        SdeSection {
            dt: d_dt(),
            t_max: d_tmax(),
            n_paths: d_npaths(),
            seed: d_seed(),
            record_stride: d_stride(),
            chart_switch_margin: d_margin(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSection {
    #[serde(default = "d_resolution")]
    pub resolution: usize,
    #[serde(default = "d_subdivision")]
    pub subdivision: u32,
    #[serde(default)]
    pub rho_shift: f64,
}

fn d_resolution() -> usize {
    64
}
fn d_subdivision() -> u32 {
    5
}

impl Default for SpectralSection {
    fn default() -> Self {
        SpectralSection {
            resolution: d_resolution(),
            subdivision: d_subdivision(),
            rho_shift: 0.0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    #[serde(default = "d_fd")]
    pub fd_step: f64,
    #[serde(default = "d_fd2")]
    pub fd2_step: f64,
}

fn d_fd() -> f64 {
    1e-4
}
fn d_fd2() -> f64 {
    1e-3
}

/// Everything a subcommand needs, validated.
pub struct RunSetup {
    pub model: ManifoldModel,
    pub h: ScalarField,
    pub check: CheckConfig,
    pub output_dir: std::path::PathBuf,
}

pub fn parse_config_str(text: &str, origin: &str) -> Result<RunConfigFile> {
    serde_json::from_str(text).map_err(|e| MyersError::Config {
        path: origin.to_string(),
        message: e.to_string(),
    })
}

pub fn load_config_file(path: &std::path::Path) -> Result<RunConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|source| MyersError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text, &path.display().to_string())
}

fn positive(value: f64, path: &str) -> Result<()> {
    if value > 0.0 {
        Ok(())
    } else {
        Err(MyersError::Config {
            path: path.to_string(),
            message: format!("must be positive, got {value}"),
        })
    }
}

impl RunConfigFile {
    pub fn build(self) -> Result<RunSetup> {
        let mut model = match &self.manifold {
            ManifoldSection::Sphere { radius } => {
                positive(*radius, "manifold.radius")?;
                ManifoldModel::sphere(*radius)
            }
            ManifoldSection::FlatTorus { lu, lv } => {
                positive(*lu, "manifold.lu")?;
                positive(*lv, "manifold.lv")?;
                ManifoldModel::flat_torus(*lu, *lv)
            }
            ManifoldSection::ExpressionMetric {
                lu,
                lv,
                g11,
                g12,
                g22,
            } => {
                positive(*lu, "manifold.lu")?;
                positive(*lv, "manifold.lv")?;
                ManifoldModel::expression_metric(
                    "expression_metric",
                    *lu,
                    *lv,
                    ScalarFieldExpr::parse(g11)?,
                    ScalarFieldExpr::parse(g12)?,
                    ScalarFieldExpr::parse(g22)?,
                )
            }
        };
        if let Some(geom) = &self.geometry {
            positive(geom.fd_step, "geometry.fd_step")?;
            positive(geom.fd2_step, "geometry.fd2_step")?;
            model.params = GeomParams {
                fd_step: geom.fd_step,
                fd2_step: geom.fd2_step,
            };
        }
        let h = ScalarField::parse(&self.h)?;
        model.validate(&h)?;

        positive(self.sde.dt, "sde.dt")?;
        positive(self.sde.t_max, "sde.t_max")?;
        if self.sde.n_paths == 0 {
            return Err(MyersError::Config {
                path: "sde.n_paths".into(),
                message: "must be at least 1".into(),
            });
        }
        if self.spectral.resolution < 16 && !model.is_sphere() {
            return Err(MyersError::Config {
                path: "spectral.resolution".into(),
                message: "grid resolution below 16 is unusably coarse".into(),
            });
        }
        if self.spectral.subdivision < 2 && model.is_sphere() {
            return Err(MyersError::Config {
                path: "spectral.subdivision".into(),
                message: "icosphere subdivision below 2 is unusably coarse".into(),
            });
        }
        let sampler = SamplerConfig {
            dt: self.sde.dt,
            t_max: self.sde.t_max,
            seed: self.sde.seed,
            n_paths: self.sde.n_paths,
            chart_switch_margin: self.sde.chart_switch_margin,
            record_stride: self.sde.record_stride,
        };
        sampler.validate()?;
        let check = CheckConfig {
            sampler,
            resolution: self.spectral.resolution,
            subdivision: self.spectral.subdivision,
            rho_shift: self.spectral.rho_shift,
            probes: self.probes.clone(),
        };
        let output_dir = std::path::PathBuf::from(self.output.clone().unwrap_or_else(|| "out".into()));
        Ok(RunSetup {
            model,
            h,
            check,
            output_dir,
        })
    }
}

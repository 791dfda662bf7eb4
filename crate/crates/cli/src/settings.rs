use std::path::{Path, PathBuf};

use argon::attributes::AttributeKind;
use argon::{Error, Result};
use clap::{Args, ValueEnum};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reg {
    Nm,
    Pl,
    Pt,
}

impl Reg {
    pub const ALL: [Reg; 3] = [Reg::Nm, Reg::Pl, Reg::Pt];

    pub fn name(&self) -> &'static str {
        match self {
            Reg::Nm => "nm",
            Reg::Pl => "pl",
            Reg::Pt => "pt",
        }
    }
}

/// Flags shared by every subcommand. Any of them may also come from the
/// config file; flags win.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Flags {
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of synthetic melodies.
    #[arg(long, global = true)]
    pub size: Option<usize>,
    #[arg(long, global = true, value_parser = parse_attribute)]
    #[serde(deserialize_with = "de_attribute")]
    pub attribute: Option<AttributeKind>,
    #[arg(long, global = true)]
    pub reg: Option<Reg>,
    /// Weight of the attribute-regularization term.
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true)]
    pub beta_max: Option<f64>,
    /// Slope of the pairwise regularizer's tanh.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub iters: Option<u64>,
    #[arg(long, global = true)]
    pub batch: Option<usize>,
    #[arg(long, global = true)]
    pub latent_dim: Option<usize>,
    /// Experiment directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

fn parse_attribute(s: &str) -> std::result::Result<AttributeKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn de_attribute<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<AttributeKind>, D::Error> {
    let s: Option<String> = Option::deserialize(d)?;
    s.map(|s| s.parse().map_err(serde::de::Error::custom)).transpose()
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub size: usize,
    pub attribute: AttributeKind,
    pub reg: Reg,
    pub gamma: f64,
    pub beta_max: f64,
    pub delta: f64,
    pub iters: u64,
    pub batch: usize,
    pub latent_dim: usize,
    pub out: PathBuf,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: 0,
            size: 2048,
            attribute: AttributeKind::Contour,
            reg: Reg::Nm,
            gamma: 1.0,
            beta_max: 1e-3,
            delta: 10.0,
            iters: 3000,
            batch: 64,
            latent_dim: 16,
            out: PathBuf::from("argon-out"),
        }
    }
}

impl Flags {
    /// Fills unset fields from `lower`.
    fn or(self, lower: Flags) -> Flags {
        Flags {
            seed: self.seed.or(lower.seed),
            size: self.size.or(lower.size),
            attribute: self.attribute.or(lower.attribute),
            reg: self.reg.or(lower.reg),
            gamma: self.gamma.or(lower.gamma),
            beta_max: self.beta_max.or(lower.beta_max),
            delta: self.delta.or(lower.delta),
            iters: self.iters.or(lower.iters),
            batch: self.batch.or(lower.batch),
            latent_dim: self.latent_dim.or(lower.latent_dim),
            out: self.out.or(lower.out),
        }
    }
}

pub fn read_config(path: &Path) -> Result<Flags> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {}", path.display(), e.message())))
}

pub fn resolve(flags: Flags, config: Option<&Path>) -> Result<Settings> {
    let f = match config {
        Some(p) => flags.or(read_config(p)?),
        None => flags,
    };
    let d = Settings::default();
    let s = Settings {
        seed: f.seed.unwrap_or(d.seed),
        size: f.size.unwrap_or(d.size),
        attribute: f.attribute.unwrap_or(d.attribute),
        reg: f.reg.unwrap_or(d.reg),
        gamma: f.gamma.unwrap_or(d.gamma),
        beta_max: f.beta_max.unwrap_or(d.beta_max),
        delta: f.delta.unwrap_or(d.delta),
        iters: f.iters.unwrap_or(d.iters),
        batch: f.batch.unwrap_or(d.batch),
        latent_dim: f.latent_dim.unwrap_or(d.latent_dim),
        out: f.out.unwrap_or(d.out),
    };
    if s.size == 0 || s.iters == 0 || s.batch == 0 || s.latent_dim == 0 {
        return Err(Error::InvalidConfig("size, iters, batch and latent-dim must be positive".into()));
    }
    Ok(s)
}

/// Name of a training run: attribute, regularizer and gamma.
pub fn run_name(attribute: AttributeKind, reg: Reg, gamma: f64) -> String {
    format!("{attribute}_{}_g{gamma}", reg.name())
}

//! JSON job configuration.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use psslab::fock::StructureFunction;
use psslab::grid::Grid;
use psslab::realizations::{BoundaryConvention, ModulationFunction};
use psslab::superpotential::{DiagonalPairSpec, H4Choice, Polynomial};
use serde::Deserialize;

/// Which realization a job builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    FixedMatrices,
    Sec2Charges,
    Superpotential,
    GdoaA,
    GdoaB,
    OssqmKhare,
    BosonizedA(usize),
    BosonizedB(usize),
    Relativistic,
}

impl FromStr for Selector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let component = |rest: &str| -> Result<usize, String> {
            match rest.parse::<usize>() {
                Ok(mu) if mu <= 2 => Ok(mu),
                _ => Err(format!("component in {s:?} must be 0, 1 or 2")),
            }
        };
        Ok(match s {
            "fixed_matrices" => Self::FixedMatrices,
            "sec2_charges" => Self::Sec2Charges,
            "superpotential" => Self::Superpotential,
            "gdoa_a" => Self::GdoaA,
            "gdoa_b" => Self::GdoaB,
            "ossqm_khare" => Self::OssqmKhare,
            "relativistic" => Self::Relativistic,
            _ => {
                if let Some(rest) = s.strip_prefix("bosonized_a:") {
                    Self::BosonizedA(component(rest)?)
                } else if let Some(rest) = s.strip_prefix("bosonized_b:") {
                    Self::BosonizedB(component(rest)?)
                } else {
                    return Err(format!("unknown realization {s:?}"));
                }
            }
        })
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::FixedMatrices => f.write_str("fixed_matrices"),
            Self::Sec2Charges => f.write_str("sec2_charges"),
            Self::Superpotential => f.write_str("superpotential"),
            Self::GdoaA => f.write_str("gdoa_a"),
            Self::GdoaB => f.write_str("gdoa_b"),
            Self::OssqmKhare => f.write_str("ossqm_khare"),
            Self::BosonizedA(mu) => write!(f, "bosonized_a:{mu}"),
            Self::BosonizedB(mu) => write!(f, "bosonized_b:{mu}"),
            Self::Relativistic => f.write_str("relativistic"),
        }
    }
}

impl<'de> Deserialize<'de> for Selector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolyConfig {
    Poly { coeffs: Vec<f64> },
}

impl PolyConfig {
    pub fn polynomial(&self) -> Polynomial {
        let PolyConfig::Poly { coeffs } = self;
        Polynomial::new(coeffs.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SuperpotentialConfig {
    Poly {
        coeffs: Vec<f64>,
    },
    /// A pair `W₁, W₂ = (W₊ ± W₋)/2` diagonalizing the Hamiltonian.
    DiagPair {
        w_plus: PolyConfig,
        #[serde(rename = "C")]
        c: f64,
        #[serde(rename = "D")]
        d: f64,
        #[serde(default)]
        base: f64,
    },
}

impl SuperpotentialConfig {
    pub fn pair_spec(&self) -> Option<DiagonalPairSpec> {
        match self {
            Self::Poly { .. } => None,
            Self::DiagPair { w_plus, c, d, base } => Some(DiagonalPairSpec {
                w_plus: w_plus.polynomial(),
                c: *c,
                d: *d,
                base: *base,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum H4Config {
    Zero,
    IWPrime,
    Imaginary { coeffs: Vec<f64> },
    Complex { re: Vec<f64>, im: Vec<f64> },
}

impl H4Config {
    pub fn choice(&self) -> H4Choice {
        match self {
            Self::Zero => H4Choice::Zero,
            Self::IWPrime => H4Choice::IWPrime,
            Self::Imaginary { coeffs } => H4Choice::Imaginary(Polynomial::new(coeffs.clone())),
            Self::Complex { re, im } => H4Choice::Complex {
                re: Polynomial::new(re.clone()),
                im: Polynomial::new(im.clone()),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl GridConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.x_min, self.x_max, self.n_points).context("invalid grid")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub cutoff: Option<f64>,
    pub cluster_tol: Option<f64>,
    /// Highest cycle index of the closed-form level list.
    pub k_max: Option<usize>,
    /// Tolerance of the closed-form comparison.
    pub tolerance: Option<f64>,
}

/// Residual convergence over successive grid doublings.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub refinements: usize,
    pub min_order: f64,
    pub max_order: f64,
}

/// Perturbation of one diagonal Hamiltonian entry, for fault-injection runs.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptConfig {
    pub block: usize,
    pub index: usize,
    pub eps: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sec2Hamiltonian {
    /// `ω[½{a, a†} + ½ diag(−1, 1, 3)]`.
    #[default]
    Stated,
    /// `ω[½{a, a†} + ½ diag(−1, −1, 1)]`.
    Consistent,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub realization: Selector,
    pub structure: Option<StructureFunction>,
    pub dim: Option<usize>,
    pub margin: Option<usize>,
    pub c: Option<f64>,
    pub omega: Option<f64>,
    pub hamiltonian: Option<Sec2Hamiltonian>,
    pub f: Option<ModulationFunction>,
    pub h3bar: Option<ModulationFunction>,
    pub f1: Option<ModulationFunction>,
    pub f2: Option<ModulationFunction>,
    pub boundary: Option<BoundaryConvention>,
    pub w1: Option<SuperpotentialConfig>,
    pub w2: Option<SuperpotentialConfig>,
    pub h4: Option<H4Config>,
    pub grid: Option<GridConfig>,
    pub zeta: Option<[f64; 2]>,
    pub rho: Option<[f64; 2]>,
    pub lambda: Option<f64>,
    pub n_max: Option<usize>,
    pub budget: Option<f64>,
    pub spectrum: Option<SpectrumConfig>,
    pub convergence: Option<ConvergenceConfig>,
    pub corrupt: Option<CorruptConfig>,
    pub embedding_tol: Option<f64>,
    pub reduce_tol: Option<f64>,
}

impl JobConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: JobConfig = serde_json::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn present(&self) -> Vec<(&'static str, bool)> {
        vec![
            ("structure", self.structure.is_some()),
            ("dim", self.dim.is_some()),
            ("margin", self.margin.is_some()),
            ("c", self.c.is_some()),
            ("omega", self.omega.is_some()),
            ("hamiltonian", self.hamiltonian.is_some()),
            ("f", self.f.is_some()),
            ("h3bar", self.h3bar.is_some()),
            ("f1", self.f1.is_some()),
            ("f2", self.f2.is_some()),
            ("boundary", self.boundary.is_some()),
            ("w1", self.w1.is_some()),
            ("w2", self.w2.is_some()),
            ("h4", self.h4.is_some()),
            ("grid", self.grid.is_some()),
            ("zeta", self.zeta.is_some()),
            ("rho", self.rho.is_some()),
            ("lambda", self.lambda.is_some()),
            ("n_max", self.n_max.is_some()),
            ("budget", self.budget.is_some()),
            ("spectrum", self.spectrum.is_some()),
            ("convergence", self.convergence.is_some()),
            ("corrupt", self.corrupt.is_some()),
            ("embedding_tol", self.embedding_tol.is_some()),
            ("reduce_tol", self.reduce_tol.is_some()),
        ]
    }

    fn allowed(&self) -> &'static [&'static str] {
        const FOCK: [&str; 5] = ["structure", "dim", "margin", "c", "budget"];
        match self.realization {
            Selector::FixedMatrices => &["budget"],
            Selector::Sec2Charges => &[
                "structure",
                "dim",
                "margin",
                "c",
                "omega",
                "hamiltonian",
                "budget",
                "spectrum",
            ],
            Selector::Superpotential => &[
                "dim",
                "margin",
                "c",
                "w1",
                "w2",
                "h4",
                "grid",
                "budget",
                "spectrum",
                "convergence",
                "corrupt",
            ],
            Selector::GdoaA | Selector::BosonizedA(_) => &[
                FOCK[0],
                FOCK[1],
                FOCK[2],
                FOCK[3],
                FOCK[4],
                "f",
                "h3bar",
                "spectrum",
                "corrupt",
                "reduce_tol",
            ],
            Selector::GdoaB | Selector::BosonizedB(_) => &[
                FOCK[0],
                FOCK[1],
                FOCK[2],
                FOCK[3],
                FOCK[4],
                "f1",
                "f2",
                "boundary",
                "spectrum",
                "corrupt",
                "reduce_tol",
            ],
            Selector::OssqmKhare => &[
                "c",
                "w1",
                "w2",
                "grid",
                "zeta",
                "rho",
                "budget",
                "spectrum",
                "embedding_tol",
            ],
            Selector::Relativistic => &["omega", "lambda", "n_max"],
        }
    }

    /// Schema checks that need no computation.
    pub fn validate(&self) -> Result<()> {
        let allowed = self.allowed();
        for (name, set) in self.present() {
            if set && !allowed.contains(&name) {
                bail!(
                    "key {name:?} does not apply to realization {}",
                    self.realization
                );
            }
        }
        if let Some(sf) = &self.structure {
            sf.check_parameters()?;
        }
        if let Some(c) = self.c {
            if !(c > 0.0) {
                bail!("coupling constant c must be positive, got {c}");
            }
        }
        if let Some(b) = self.budget {
            if !(b > 0.0) {
                bail!("budget must be positive, got {b}");
            }
        }
        if let Some(conv) = &self.convergence {
            if self.grid.is_none() {
                bail!("convergence needs a grid");
            }
            if conv.refinements < 2 {
                bail!("convergence needs at least 2 refinements");
            }
        }
        match self.realization {
            Selector::Superpotential => {
                if self.w1.is_none() {
                    bail!("realization superpotential needs w1");
                }
            }
            Selector::OssqmKhare => {
                if self.w1.is_none() || self.grid.is_none() {
                    bail!("realization ossqm_khare needs w1 and grid");
                }
                if self.zeta.is_some() != self.rho.is_some() {
                    bail!("zeta and rho must be given together");
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn coupling(&self) -> f64 {
        self.c.unwrap_or(0.5)
    }

    pub fn structure_or_standard(&self) -> StructureFunction {
        self.structure
            .clone()
            .unwrap_or(StructureFunction::Standard)
    }
}

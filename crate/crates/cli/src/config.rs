//! Run configuration: one TOML or JSON file, every field defaulted.

use std::fs;
use std::path::{Path, PathBuf};

use qrt_core::evolve::Seed;
use qrt_core::profiles::{Condition, PhysicalParams, ProfileSpec};
use qrt_core::slabgrid::Scheme;
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub profile: ProfileSpec,
    pub params: PhysicalParams,
    pub grid: GridConfig,
    pub validate: ValidateConfig,
    pub dispersion: DispersionConfig,
    pub simulate: SimulateConfig,
    pub verify: VerifyConfig,
    pub exponents: ExponentsConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            profile: ProfileSpec::exponential(1.0, 1.0, 1.0).with_mollifier(0.2),
            params: PhysicalParams { g: 1.0, mu: 1.0, eps: 0.3 },
            grid: GridConfig::default(),
            validate: ValidateConfig::default(),
            dispersion: DispersionConfig::default(),
            simulate: SimulateConfig::default(),
            verify: VerifyConfig::default(),
            exponents: ExponentsConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub scheme: Scheme,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n: 256,
            scheme: Scheme::ChebyshevLobatto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    /// Rows of the exported profile table.
    pub samples: usize,
    /// Derivative columns `rho^(1..=k)` added to the profile table.
    pub derivatives: usize,
    /// Conditions that must hold for exit status 0.
    pub require: Vec<Condition>,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            samples: 201,
            derivatives: 2,
            require: vec![
                Condition::Positive,
                Condition::RtCondition,
                Condition::Stabilizing,
                Condition::BoundaryConditions,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DispersionConfig {
    pub kappa_min: f64,
    pub kappa_max: f64,
    /// Log-spaced points in `[kappa_min, kappa_max]`.
    pub count: usize,
    /// Eigenvalues kept per `kappa`, largest real part first.
    pub eigenvalues: usize,
}

impl Default for DispersionConfig {
    fn default() -> Self {
        DispersionConfig {
            kappa_min: 0.1,
            kappa_max: 20.0,
            count: 24,
            eigenvalues: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub kappa: f64,
    pub t_end: f64,
    /// Time step; `1e-3 h^2 / mu` when absent.
    pub dt: Option<f64>,
    pub sample_every: usize,
    pub seed: Seed,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            kappa: 1.0,
            t_end: 1.0,
            dt: None,
            sample_every: 1,
            seed: Seed::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Relative residual allowed for the `r / rho'` identity.
    pub identity_tolerance: f64,
    /// Horizontal wavenumbers at which the identity is checked.
    pub identity_kappas: Vec<f64>,
    pub decomposition_tolerance: f64,
    /// Horizontal points of the plane grid (even).
    pub decomposition_n1: usize,
    pub witness_tolerance: f64,
    pub scale_tolerance: f64,
    pub scale_factors: Vec<f64>,
    /// Relative offset around `eps_c` for the coercivity sign test.
    pub coercivity_offset: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            identity_tolerance: 1e-10,
            identity_kappas: vec![0.5, 1.0, 3.0],
            decomposition_tolerance: 1e-8,
            decomposition_n1: 32,
            witness_tolerance: 1e-6,
            scale_tolerance: 1e-10,
            scale_factors: vec![0.5, 2.0, 10.0],
            coercivity_offset: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExponentsConfig {
    pub thetas: Vec<f64>,
    /// Decide the quadratic condition exactly near its root.
    pub exact: bool,
}

impl Default for ExponentsConfig {
    fn default() -> Self {
        ExponentsConfig {
            thetas: vec![0.01, 0.03, 0.05, 0.06, 0.5],
            exact: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("qrt-out"),
        }
    }
}

impl RunConfig {
    /// Reads `.toml` or `.json`, chosen by extension.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?,
            Some("json") => serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?,
            _ => return Err(Failure::usage(format!("{}: config must end in .toml or .json", path.display()))),
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), Failure> {
        self.params.check().map_err(|e| Failure::usage(e.to_string()))?;
        let bad = |m: &str| Err(Failure::usage(m.to_string()));
        if self.grid.n < 4 {
            return bad("grid.n must be at least 4");
        }
        let d = &self.dispersion;
        if !(d.kappa_min > 0.0 && d.kappa_max > d.kappa_min) || d.count < 2 || d.eigenvalues == 0 {
            return bad("dispersion needs 0 < kappa_min < kappa_max, count >= 2, eigenvalues >= 1");
        }
        let s = &self.simulate;
        if !(s.t_end > 0.0) || s.sample_every == 0 || s.dt.is_some_and(|dt| !(dt > 0.0)) {
            return bad("simulate needs t_end > 0, dt > 0 and sample_every >= 1");
        }
        let v = &self.verify;
        if v.decomposition_n1 < 2 || v.decomposition_n1 % 2 != 0 {
            return bad("verify.decomposition_n1 must be even and at least 2");
        }
        if v.scale_factors.iter().any(|c| !(*c > 0.0)) || v.identity_kappas.iter().any(|k| !(*k >= 0.0)) {
            return bad("verify scale factors must be positive and identity kappas nonnegative");
        }
        if self.validate.samples < 2 || self.validate.derivatives > 8 {
            return bad("validate needs samples >= 2 and derivatives <= 8");
        }
        Ok(())
    }
}

/// Commented TOML listing every default.
pub fn defaults_toml() -> String {
    let body = toml::to_string(&RunConfig::default()).expect("defaults serialize");
    let notes = [
        ("[profile]", "# kind: linear {slope} | exponential {rate} | tanh_layer {jump, center, width}\n# | degenerate {amplitude, tau, center, half_width} | tabulated {x3, rho}.\n# mollifier_width is the wall strip, in (0, h/4)."),
        ("[params]", "# g > 0, mu > 0 (viscosity), eps >= 0 (quantum parameter)."),
        ("[grid]", "# scheme: chebyshev_lobatto | finite_difference4"),
        ("[validate]", "# Profile table: `samples` rows, `derivatives` extra columns. require lists\n# the conditions checked for the exit status (positive, rt_condition,\n# stabilizing, boundary_conditions)."),
        ("[dispersion]", "# Log-spaced kappa scan."),
        ("[simulate]", "# dt defaults to 1e-3 h^2 / mu. seed kind: zero | random_smooth {rng_seed}\n# | eigenmode {index} | phi_star {amplitude}."),
        ("[simulate.seed]", ""),
        ("[verify]", "# Tolerances of the verification checks."),
        ("[exponents]", "# theta list for the exponent report."),
        ("[output]", "# Overridden by --out."),
    ];
    let mut out = String::from("# qrt run configuration (TOML; JSON with the same keys also works).\n");
    for line in body.lines() {
        if let Some((_, note)) = notes.iter().find(|(h, _)| *h == line) {
            if !note.is_empty() {
                out.push_str(note);
                out.push('\n');
            }
        }
        out.push_str(line);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let text = defaults_toml();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, RunConfig::default());
        let json = serde_json::to_string(&RunConfig::default()).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&json).unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg: RunConfig = toml::from_str("[grid]\nn = 32\n").unwrap();
        assert_eq!(cfg.grid.n, 32);
        assert_eq!(cfg.dispersion, DispersionConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[grid]\nm = 32\n").is_err());
        assert!(toml::from_str::<RunConfig>("[gird]\nn = 32\n").is_err());
    }
}

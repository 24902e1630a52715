//! Scenario files (TOML) and tolerance profiles.

use serde::{Deserialize, Serialize};

use crate::dynamics::TimeSpan;
use crate::error::{Error, Result};
use crate::harness::generate::{GenKind, GenOptions};

/// Environment variable selecting the default tolerance profile.
pub const PROFILE_ENV: &str = "QMAX_TOLERANCE_PROFILE";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Theorem1,
    Theorem2,
    Maximize,
    Weakvalue,
    Scan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    Default,
    Strict,
}

impl Profile {
    pub fn from_env() -> Result<Profile> {
        match std::env::var(PROFILE_ENV) {
            Err(_) => Ok(Profile::Default),
            Ok(v) => match v.as_str() {
                "" | "default" => Ok(Profile::Default),
                "strict" => Ok(Profile::Strict),
                other => Err(Error::Config(format!("{PROFILE_ENV}={other}: expected `strict` or `default`"))),
            },
        }
    }
}

/// Named check thresholds. Amplitude-type tolerances are relative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default = "Tolerances::from_env")]
pub struct Tolerances {
    pub eig_residual: f64,
    pub cond_p_max: f64,
    pub tol_band: f64,
    pub q_orthonormality: f64,
    pub q_normality: f64,
    pub split_spectra: f64,
    pub family_conditions: f64,
    pub amplitude: f64,
    pub gradient: f64,
    pub reality: f64,
    pub tilde: f64,
    pub rat: f64,
    pub collinearity: f64,
    pub theta_invariance: f64,
    pub heisenberg: f64,
    pub slope: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eig_residual: 1e-9,
            cond_p_max: 1e8,
            tol_band: 1e-9,
            q_orthonormality: 1e-9,
            q_normality: 1e-8,
            split_spectra: 1e-8,
            family_conditions: 1e-10,
            amplitude: 1e-8,
            gradient: 1e-6,
            reality: 1e-8,
            tilde: 1e-8,
            rat: 1e-10,
            collinearity: 1e-8,
            theta_invariance: 1e-12,
            heisenberg: 1e-10,
            slope: 0.2,
        }
    }
}

impl Tolerances {
    pub fn for_profile(profile: Profile) -> Self {
        let base = Tolerances::default();
        match profile {
            Profile::Default => base,
            Profile::Strict => Tolerances {
                q_orthonormality: base.q_orthonormality / 10.0,
                q_normality: base.q_normality / 10.0,
                split_spectra: base.split_spectra / 10.0,
                amplitude: base.amplitude / 10.0,
                reality: base.reality / 10.0,
                tilde: base.tilde / 10.0,
                collinearity: base.collinearity / 10.0,
                slope: base.slope / 2.0,
                ..base
            },
        }
    }

    /// Profile named by [`PROFILE_ENV`]; unknown values fall back to the default profile.
    pub fn from_env() -> Self {
        Tolerances::for_profile(Profile::from_env().unwrap_or(Profile::Default))
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("eig_residual", self.eig_residual),
            ("cond_p_max", self.cond_p_max),
            ("tol_band", self.tol_band),
            ("q_orthonormality", self.q_orthonormality),
            ("q_normality", self.q_normality),
            ("split_spectra", self.split_spectra),
            ("family_conditions", self.family_conditions),
            ("amplitude", self.amplitude),
            ("gradient", self.gradient),
            ("reality", self.reality),
            ("tilde", self.tilde),
            ("rat", self.rat),
            ("collinearity", self.collinearity),
            ("theta_invariance", self.theta_invariance),
            ("heisenberg", self.heisenberg),
            ("slope", self.slope),
        ];
        for (name, v) in named {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("tolerance `{name}` must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// A Hamiltonian given explicitly or by generator options.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixSpec {
    /// Row-major `[re, im]` entries.
    Matrix(Vec<Vec<[f64; 2]>>),
    Generate(GenSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub kind: GenKind,
    pub n: usize,
    #[serde(flatten)]
    pub options: GenOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableSpec {
    Identity,
    /// `(M + M^{†Q})/2` for a seeded random `M`.
    RandomQHermitian,
    Matrix(Vec<Vec<[f64; 2]>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunOptions {
    pub times: usize,
    pub restarts: usize,
    pub max_iters: usize,
    /// Gradient ascent runs only up to this dimension.
    pub gradient_max_dim: usize,
    /// Dimension up to which gradient ascent must reach the oracle.
    pub gradient_reach_dim: usize,
    pub random_pairs: usize,
    pub ehrenfest_dts: Vec<f64>,
    pub theta_c: f64,
    pub theta_c_variants: Vec<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            times: 11,
            restarts: 32,
            max_iters: 10_000,
            gradient_max_dim: 8,
            gradient_reach_dim: 4,
            random_pairs: 1000,
            ehrenfest_dts: vec![1e-2, 5e-3, 2.5e-3, 1.25e-3],
            theta_c: 0.0,
            theta_c_variants: vec![0.0, 1.3, -2.1],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanParameter {
    /// Sweeps `T`, keeping `t_a` fixed.
    Duration,
    /// Sweeps the generated dimension.
    Dimension,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub parameter: ScanParameter,
    pub values: Vec<f64>,
    /// Mode run at every point.
    #[serde(default = "default_scan_mode")]
    pub mode: Mode,
}

fn default_scan_mode() -> Mode {
    Mode::Theorem1
}

fn default_hbar() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
    pub span: TimeSpan,
    pub hamiltonian: MatrixSpec,
    #[serde(default)]
    pub observables: Vec<ObservableSpec>,
    #[serde(default = "Tolerances::from_env")]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub run: RunOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSpec>,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.span.validate()?;
        if !(self.hbar > 0.0) || !self.hbar.is_finite() {
            return Err(Error::Config(format!("hbar must be positive, got {}", self.hbar)));
        }
        self.tolerances.validate()?;
        if self.run.restarts == 0 {
            return Err(Error::Config("run.restarts must be at least 1".into()));
        }
        if self.run.ehrenfest_dts.len() < 2 || self.run.ehrenfest_dts.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Config("run.ehrenfest_dts needs at least two positive steps".into()));
        }
        match (&self.mode, &self.scan) {
            (Mode::Scan, None) => return Err(Error::Config("mode `scan` requires a [scan] table".into())),
            (Mode::Scan, Some(scan)) => {
                if scan.mode == Mode::Scan {
                    return Err(Error::Config("scan.mode cannot itself be `scan`".into()));
                }
                if scan.parameter == ScanParameter::Dimension && !matches!(self.hamiltonian, MatrixSpec::Generate(_)) {
                    return Err(Error::Config("a dimension scan needs a generated hamiltonian".into()));
                }
                for v in &scan.values {
                    let ok = match scan.parameter {
                        ScanParameter::Duration => *v > 0.0 && v.is_finite(),
                        ScanParameter::Dimension => *v >= 1.0 && v.fract() == 0.0,
                    };
                    if !ok {
                        return Err(Error::Config(format!("invalid scan value {v}")));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
mode = "theorem1"
seed = 7
observables = ["identity", "random_q_hermitian", { matrix = [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-1.0, 0.0]]] }]

[span]
t_a = 0.0
t_b = 2.0

[hamiltonian]
matrix = [[[1.0, 1.0], [1.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]
"#;

    #[test]
    fn parses_sample() {
        let cfg = ScenarioConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.mode, Mode::Theorem1);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.hbar, 1.0);
        assert_eq!(cfg.observables.len(), 3);
        assert_eq!(cfg.observables[0], ObservableSpec::Identity);
        assert_eq!(cfg.run.times, 11);
        assert_eq!(cfg.tolerances.amplitude, 1e-8);
        let back = ScenarioConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn generator_spec() {
        let text = r#"
mode = "maximize"
[span]
t_a = 0.0
t_b = 1.0
[hamiltonian.generate]
kind = "nonnormal"
n = 3
imag_max = 0.5
cond_p_max = 50.0
degeneracy = 2
"#;
        let cfg = ScenarioConfig::from_toml_str(text).unwrap();
        match cfg.hamiltonian {
            MatrixSpec::Generate(g) => {
                assert_eq!(g.kind, GenKind::Nonnormal);
                assert_eq!(g.n, 3);
                assert_eq!(g.options.degeneracy, 2);
            }
            _ => panic!("expected generator"),
        }
    }

    #[test]
    fn rejects_invalid() {
        let bad_span = "mode = \"theorem1\"\n[span]\nt_a = 1.0\nt_b = 1.0\n[hamiltonian]\nmatrix = [[[1.0, 0.0]]]\n";
        assert!(ScenarioConfig::from_toml_str(bad_span).is_err());
        let bad_tol = "mode = \"theorem1\"\n[span]\nt_a = 0.0\nt_b = 1.0\n[hamiltonian]\nmatrix = [[[1.0, 0.0]]]\n[tolerances]\nreality = -1.0\n";
        assert!(ScenarioConfig::from_toml_str(bad_tol).is_err());
        let scan_missing = "mode = \"scan\"\n[span]\nt_a = 0.0\nt_b = 1.0\n[hamiltonian]\nmatrix = [[[1.0, 0.0]]]\n";
        assert!(ScenarioConfig::from_toml_str(scan_missing).is_err());
    }

    #[test]
    fn strict_profile_is_tighter() {
        let d = Tolerances::for_profile(Profile::Default);
        let s = Tolerances::for_profile(Profile::Strict);
        assert!(s.reality < d.reality && s.amplitude < d.amplitude);
        assert_eq!(s.eig_residual, d.eig_residual);
    }
}

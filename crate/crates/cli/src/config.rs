//! Experiment configuration: one flat TOML document per run.
//!
//! Parsing is strict (unknown keys are rejected with their name, syntax
//! errors carry line/column from the TOML parser) and semantic validation
//! aggregates every violation into one error list.

use serde::{Deserialize, Serialize};
use spvar_core::charge::{ChargeDensity, RhoVariant};
use spvar_core::functional::ProblemParams;
use spvar_core::grid::{make_grid, Grid};
use spvar_core::solvers::SolverConfig;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax error: {0}")]
    Syntax(String),
    #[error("invalid config:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Solve,
    SweepMu,
    SweepEps,
    Diagnose,
    Oracle,
    Sobolev,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::SweepMu => "sweep_mu",
            Mode::SweepEps => "sweep_eps",
            Mode::Diagnose => "diagnose",
            Mode::Oracle => "oracle",
            Mode::Sobolev => "sobolev",
        }
    }

    pub fn from_str(s: &str) -> Option<Mode> {
        Some(match s {
            "solve" => Mode::Solve,
            "sweep_mu" => Mode::SweepMu,
            "sweep_eps" => Mode::SweepEps,
            "diagnose" => Mode::Diagnose,
            "oracle" => Mode::Oracle,
            "sobolev" => Mode::Sobolev,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub l: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoSection {
    pub variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_inf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xb: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub k: f64,
}

fn default_mu() -> f64 {
    1.0
}
fn default_lambda() -> f64 {
    1.0
}
fn default_eps() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub p: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub absolute_value: bool,
}

fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> usize {
    10_000
}
fn default_method() -> String {
    "mountain_pass".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng_seed: Option<u64>,
}

impl Default for SeedSection {
    fn default() -> Self {
        SeedSection {
            kind: "gaussian".into(),
            amplitude: None,
            width: None,
            center: None,
            rng_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default)]
    pub seed: SeedSection,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            tol: default_tol(),
            max_iter: default_max_iter(),
            method: default_method(),
            seed: SeedSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_factor: Option<f64>,
}

fn default_formats() -> Vec<String> {
    vec!["json".into(), "csv".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub grid: GridSection,
    pub rho: RhoSection,
    pub params: ParamsSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default, skip_serializing_if = "is_default_sweep")]
    pub sweep: SweepSection,
    pub output: OutputSection,
}

fn is_default_sweep(s: &SweepSection) -> bool {
    *s == SweepSection::default()
}

/// Parse and validate a config document; unknown keys are rejected,
/// semantic violations are aggregated.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig =
        toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let mut errors = Vec::new();
    validate(&cfg, &mut errors);
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(errors))
    }
}

pub fn serialize_config(cfg: &ExperimentConfig) -> String {
    toml::to_string(cfg).expect("config serializes")
}

fn validate(cfg: &ExperimentConfig, errors: &mut Vec<String>) {
    if let Err(e) = cfg.build_grid() {
        errors.push(format!("grid: {e}"));
    }
    let cd = match cfg.build_rho() {
        Ok(cd) => Some(cd),
        Err(e) => {
            errors.push(format!("rho: {e}"));
            None
        }
    };
    let pp = match cfg.build_params() {
        Ok(pp) => Some(pp),
        Err(e) => {
            errors.push(format!("params: {e}"));
            None
        }
    };
    if let (Some(cd), Some(pp)) = (&cd, &pp) {
        if let Err(e) = cd.check_k_admissible(pp.p) {
            errors.push(format!("rho: {e}"));
        }
        let b = cd.grad_growth_rate();
        if b > 0.0 && pp.eps >= pp.lambda.sqrt() / b {
            errors.push(format!(
                "params: eps = {} must be below sqrt(lambda)/b = {} for this density",
                pp.eps,
                pp.lambda.sqrt() / b
            ));
        }
        // representability cap: coercive growth must stay in range on the box
        let l = cfg.grid.l;
        let corner = [l * 3.0f64.sqrt(), 0.0, 0.0];
        if !cd.eval(corner).is_finite() {
            errors.push("rho: density overflows at the box corner".into());
        }
    }
    if !(cfg.solver.tol > 0.0) {
        errors.push(format!("solver: tol must be positive, got {}", cfg.solver.tol));
    }
    if cfg.solver.max_iter == 0 {
        errors.push("solver: max_iter must be at least 1".into());
    }
    match cfg.solver.method.as_str() {
        "mountain_pass" | "nehari" => {}
        other => errors.push(format!(
            "solver: unknown method '{other}' (expected mountain_pass or nehari)"
        )),
    }
    match cfg.solver.seed.kind.as_str() {
        "gaussian" | "random" => {}
        other => errors.push(format!(
            "solver.seed: unknown kind '{other}' (expected gaussian or random)"
        )),
    }
    if let Some(w) = cfg.solver.seed.width {
        if !(w > 0.0) {
            errors.push(format!("solver.seed: width must be positive, got {w}"));
        }
    }
    match cfg.mode {
        Mode::SweepMu => match &cfg.sweep.mu_values {
            None => errors.push("sweep: mu_values required for sweep_mu".into()),
            Some(v) => {
                if v.is_empty() {
                    errors.push("sweep: mu_values is empty".into());
                }
                if v.windows(2).any(|w| w[1] < w[0]) {
                    errors.push("sweep: mu_values must ascend".into());
                }
                if v.iter().any(|&m| !(0.5..=1.0).contains(&m)) {
                    errors.push("sweep: mu_values must lie in [1/2, 1]".into());
                }
            }
        },
        Mode::SweepEps => {
            match &cfg.sweep.eps_values {
                None => errors.push("sweep: eps_values required for sweep_eps".into()),
                Some(v) => {
                    if v.is_empty() {
                        errors.push("sweep: eps_values is empty".into());
                    }
                    if v.windows(2).any(|w| w[1] > w[0]) {
                        errors.push("sweep: eps_values must descend".into());
                    }
                    if v.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
                        errors.push("sweep: eps_values must lie in (0, 1]".into());
                    }
                }
            }
            if let Some(bf) = cfg.sweep.box_factor {
                if !(bf > 0.0) {
                    errors.push(format!("sweep: box_factor must be positive, got {bf}"));
                }
            }
        }
        _ => {}
    }
    if cfg.output.directory.is_empty() {
        errors.push("output: directory must not be empty".into());
    }
    for f in &cfg.output.formats {
        if f != "csv" && f != "json" {
            errors.push(format!("output: unknown format '{f}' (expected csv or json)"));
        }
    }
}

impl ExperimentConfig {
    pub fn build_grid(&self) -> spvar_core::Result<Grid> {
        make_grid(
            self.grid.n,
            self.grid.l,
            self.grid.center.unwrap_or([0.0; 3]),
        )
    }

    pub fn build_rho(&self) -> Result<ChargeDensity, String> {
        let need = |opt: Option<f64>, name: &str| {
            opt.ok_or_else(|| format!("missing field '{name}' for variant '{}'", self.rho.variant))
        };
        let variant = match self.rho.variant.as_str() {
            "constant" => RhoVariant::Constant {
                rho_inf: need(self.rho.rho_inf, "rho_inf")?,
            },
            "coercive_power" => RhoVariant::CoercivePower {
                rho0: need(self.rho.rho0, "rho0")?,
                s: need(self.rho.s, "s")?,
            },
            "bumped_constant" => RhoVariant::BumpedConstant {
                rho_inf: need(self.rho.rho_inf, "rho_inf")?,
                a: need(self.rho.a, "a")?,
                sigma: need(self.rho.sigma, "sigma")?,
                xb: self.rho.xb.unwrap_or([0.0; 3]),
            },
            "exp_coercive" => RhoVariant::ExpCoercive {
                rho0: need(self.rho.rho0, "rho0")?,
                beta: need(self.rho.beta, "beta")?,
                alpha: need(self.rho.alpha, "alpha")?,
            },
            other => return Err(format!("unknown variant '{other}'")),
        };
        ChargeDensity::new(variant, self.rho.k).map_err(|e| e.to_string())
    }

    pub fn build_params(&self) -> spvar_core::Result<ProblemParams> {
        let mut pp = ProblemParams::new(
            self.params.p,
            self.params.mu,
            self.params.lambda,
            self.params.eps,
        )?;
        pp.absolute_value = self.params.absolute_value;
        Ok(pp)
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
mode = "solve"

[grid]
n = 16
l = 6.0

[rho]
variant = "constant"
rho_inf = 1.0

[params]
p = 3.5

[output]
directory = "out"
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.solver.tol, 1e-8);
        assert_eq!(cfg.solver.max_iter, 10_000);
        assert_eq!(cfg.params.mu, 1.0);
        assert_eq!(cfg.params.lambda, 1.0);
        assert_eq!(cfg.params.eps, 1.0);
        assert!(!cfg.params.absolute_value);
        assert_eq!(cfg.output.formats, vec!["json", "csv"]);
    }

    #[test]
    fn inadmissible_k_is_rejected_with_threshold() {
        let text = MINIMAL
            .replace("p = 3.5", "p = 2.5")
            .replace("rho_inf = 1.0", "rho_inf = 1.0\nk = -0.8");
        let err = parse_config(&text).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("below admissible threshold") && msg.contains("-0.666666"),
            "{msg}"
        );
    }

    #[test]
    fn unknown_key_is_rejected_by_name() {
        let text = MINIMAL.replace("rho_inf = 1.0", "rho_inf = 1.0\ncolour = \"red\"");
        let err = parse_config(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("colour"), "{msg}");
    }

    #[test]
    fn syntax_errors_carry_location() {
        let err = parse_config("mode = [unterminated").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn semantic_errors_aggregate() {
        let text = MINIMAL
            .replace("n = 16", "n = 12")
            .replace("p = 3.5", "p = 7.0")
            .replace("directory = \"out\"", "directory = \"\"");
        match parse_config(&text).unwrap_err() {
            ConfigError::Invalid(list) => {
                assert!(list.len() >= 3, "{list:?}");
            }
            other => panic!("expected aggregated list, got {other}"),
        }
    }

    #[test]
    fn eps_guard_for_exponential_density() {
        let text = r#"
mode = "solve"

[grid]
n = 16
l = 4.0

[rho]
variant = "exp_coercive"
rho0 = 1.0
beta = 4.0
alpha = 1.0

[params]
p = 3.0
eps = 0.5

[output]
directory = "out"
"#;
        let err = parse_config(text).unwrap_err();
        assert!(err.to_string().contains("sqrt(lambda)/b"), "{err}");
    }
}

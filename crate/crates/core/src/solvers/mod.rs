//! Critical-point solvers: ray-projected preconditioned descent (Nehari
//! ground states for p > 3, amplitude mountain-pass candidates for all
//! p in (2,5)), warm-started continuation in the perturbation weight, and
//! radial shooting oracles for the limit problems.

mod descent;
mod radial;

pub use descent::{mountain_pass_solve_with, DescentEngine};
pub use radial::{radial_limit_ground_state, shoot_ground_state, RadialProfile};

use crate::charge::ChargeDensity;
use crate::error::{CoreError, Result};
use crate::functional::{EnergyBreakdown, ProblemParams};
use crate::grid::ScalarField;

/// Solver knobs; the defaults are the documented ones.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// stop when ||first_variation||_2 / ||u||_2 drops below this
    pub tol: f64,
    pub max_iter: usize,
    /// Armijo constant for the backtracking line search
    pub armijo: f64,
    /// consecutive non-decreasing accepted steps before giving up
    pub max_bad_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-8,
            max_iter: 10_000,
            armijo: 1e-4,
            max_bad_steps: 50,
        }
    }
}

/// A converged (or flagged) critical point and its certificates.
#[derive(Debug, Clone)]
pub struct SolutionRecord {
    pub u: ScalarField,
    pub phi: ScalarField,
    pub params: ProblemParams,
    pub rho_tag: String,
    pub energy: EnergyBreakdown,
    /// ||first_variation||_2 / ||u||_2
    pub residual_l2: f64,
    /// I'(u)u (zero on the ray-max manifold up to root-finder tolerance)
    pub nehari_residual: f64,
    /// scaling-identity residual P(u)
    pub pohozaev_residual: f64,
    /// fraction of int u^2 on the outer shells (identity reliability gate)
    pub boundary_mass_fraction: f64,
    /// max over the scaling family t -> I(t^2 u(t x)) through the solution;
    /// an upper bound for the min-max level along this path family
    pub path_energy_max: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Sequence of (mu, c_mu) values from warm-started continuation.
#[derive(Debug, Clone)]
pub struct ContinuationResult {
    pub mu_values: Vec<f64>,
    pub c_values: Vec<f64>,
    pub monotone_ok: bool,
    pub all_converged: bool,
    pub records: Vec<SolutionRecord>,
}

/// Unique positive solution t* of
/// ||u||_{eps,lambda}^2 + t^2 D(u) = mu t^{p-1} int u_+^{p+1}
/// (the Nehari projection), well-posed for p > 3 only.
pub fn nehari_project(u: &ScalarField, cd: &ChargeDensity, pp: &ProblemParams) -> Result<f64> {
    if pp.p <= 3.0 {
        return Err(CoreError::NehariIllPosed(pp.p));
    }
    if u.positive_part().max_abs() == 0.0 {
        return Err(CoreError::TrivialSeed);
    }
    let engine = DescentEngine::new(u.grid(), cd.clone(), *pp, SolverConfig::default());
    let state = engine.measure(u);
    descent::ray_max_root(state.a2, state.d, pp.mu * state.pot, pp.p)
        .ok_or_else(|| CoreError::BadParameter("no Nehari root for this state".into()))
}

/// Projected-descent ground state on the Nehari manifold, p in (3,5).
pub fn ground_state_nehari(
    cd: &ChargeDensity,
    pp: &ProblemParams,
    seed: &ScalarField,
) -> Result<SolutionRecord> {
    ground_state_nehari_with(cd, pp, seed, SolverConfig::default())
}

pub fn ground_state_nehari_with(
    cd: &ChargeDensity,
    pp: &ProblemParams,
    seed: &ScalarField,
    cfg: SolverConfig,
) -> Result<SolutionRecord> {
    if !(pp.p > 3.0 && pp.p < 5.0) {
        return Err(CoreError::BadParameter(format!(
            "Nehari ground state needs p in (3,5), got {}",
            pp.p
        )));
    }
    let engine = DescentEngine::new(seed.grid(), cd.clone(), *pp, cfg);
    engine.solve(seed, false)
}

/// Damped preconditioned-descent mountain-pass candidate, p in (2,5); the
/// iterates ride the amplitude maximizer of t -> I(t u).
pub fn mountain_pass_solve(
    cd: &ChargeDensity,
    pp: &ProblemParams,
    seed: &ScalarField,
) -> Result<SolutionRecord> {
    mountain_pass_solve_with(cd, pp, seed, SolverConfig::default())
}

/// Warm-started continuation over an ascending mu grid in [1/2, 1].
pub fn mu_continuation(
    cd: &ChargeDensity,
    pp_base: &ProblemParams,
    mu_grid: &[f64],
    seed: &ScalarField,
    cfg: SolverConfig,
) -> Result<ContinuationResult> {
    if mu_grid.is_empty() {
        return Err(CoreError::BadParameter("mu grid is empty".into()));
    }
    for w in mu_grid.windows(2) {
        if w[1] < w[0] {
            return Err(CoreError::BadParameter("mu grid must ascend".into()));
        }
    }
    if mu_grid[0] < 0.5 || *mu_grid.last().unwrap() > 1.0 {
        return Err(CoreError::BadParameter("mu grid must lie in [1/2,1]".into()));
    }
    let mut records = Vec::new();
    let mut c_values = Vec::new();
    let mut all_converged = true;
    let mut warm = seed.clone();
    for &mu in mu_grid {
        let pp = pp_base.with_mu(mu);
        let rec = mountain_pass_solve_with(cd, &pp, &warm, cfg)?;
        all_converged &= rec.converged;
        c_values.push(rec.energy.total);
        warm = rec.u.clone();
        records.push(rec);
    }
    let scale = c_values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let monotone_ok = c_values
        .windows(2)
        .all(|w| w[1] <= w[0] + 1e-6 * scale);
    Ok(ContinuationResult {
        mu_values: mu_grid.to_vec(),
        c_values,
        monotone_ok,
        all_converged,
        records,
    })
}

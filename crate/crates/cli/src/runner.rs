//! Pipeline dispatch: build the problem from a validated config, run the
//! requested mode, write artifacts, and collect hard-invariant failures.

use crate::config::{ExperimentConfig, Mode};
use crate::report::{fmt_f64, write_csv, write_flat_json, FlatDoc};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use spvar_core::charge::{verify_k_condition, ChargeDensity};
use spvar_core::coulomb::{poisson_direct, PoissonSolver};
use spvar_core::diagnostics::{diagnostics_report, sobolev_estimate};
use spvar_core::functional::{energy, first_variation, pair_variation, ProblemParams};
use spvar_core::grid::{integrate, norm, Grid, NormKind, ScalarField};
use spvar_core::semiclassical::{
    concentration_report_with, sweep_eps, ConcentrationReport,
};
use spvar_core::solvers::{
    ground_state_nehari_with, mountain_pass_solve_with, mu_continuation, shoot_ground_state,
    SolutionRecord,
};
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub struct RunOutcome {
    /// machine-readable failures; empty means exit status 0
    pub failures: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome, String> {
    let out_dir = PathBuf::from(&cfg.output.directory);
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| format!("output directory '{}' not writable: {e}", out_dir.display()))?;
    let mut outcome = RunOutcome {
        failures: Vec::new(),
        artifacts: Vec::new(),
    };
    match cfg.mode {
        Mode::Solve => run_solve(cfg, &out_dir, &mut outcome, false)?,
        Mode::Diagnose => run_solve(cfg, &out_dir, &mut outcome, true)?,
        Mode::SweepMu => run_sweep_mu(cfg, &out_dir, &mut outcome)?,
        Mode::SweepEps => run_sweep_eps(cfg, &out_dir, &mut outcome)?,
        Mode::Oracle => run_oracle(cfg, &out_dir, &mut outcome)?,
        Mode::Sobolev => run_sobolev(cfg, &out_dir, &mut outcome)?,
    }
    Ok(outcome)
}

fn build_seed(cfg: &ExperimentConfig, grid: Grid) -> ScalarField {
    let seed = &cfg.solver.seed;
    let center = seed.center.unwrap_or(grid.center());
    match seed.kind.as_str() {
        "random" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.rng_seed.unwrap_or(0));
            let amp = seed.amplitude.unwrap_or(1.0);
            let base_w = seed.width.unwrap_or(1.0);
            let mut bumps = Vec::new();
            let span = grid.half_width() / 2.0;
            for _ in 0..5 {
                bumps.push((
                    [
                        center[0] + rng.gen_range(-span..span),
                        center[1] + rng.gen_range(-span..span),
                        center[2] + rng.gen_range(-span..span),
                    ],
                    base_w * rng.gen_range(0.8..1.6),
                    amp * rng.gen_range(0.2..1.0),
                ));
            }
            ScalarField::from_fn(grid, |x| {
                bumps
                    .iter()
                    .map(|(c, w, a)| {
                        a * (-((x[0] - c[0]).powi(2)
                            + (x[1] - c[1]).powi(2)
                            + (x[2] - c[2]).powi(2))
                            / (w * w))
                            .exp()
                    })
                    .sum()
            })
        }
        _ => {
            let amp = seed.amplitude.unwrap_or(2.0);
            let w = seed.width.unwrap_or(1.0);
            ScalarField::from_fn(grid, |x| {
                amp * (-((x[0] - center[0]).powi(2)
                    + (x[1] - center[1]).powi(2)
                    + (x[2] - center[2]).powi(2))
                    / (w * w))
                    .exp()
            })
        }
    }
}

fn record_doc(rec: &SolutionRecord, cd: &ChargeDensity) -> FlatDoc {
    let mut doc = FlatDoc::new();
    doc.s("rho", &rec.rho_tag)
        .f("p", rec.params.p)
        .f("mu", rec.params.mu)
        .f("lambda", rec.params.lambda)
        .f("eps", rec.params.eps)
        .f("k", cd.k())
        .b("converged", rec.converged)
        .f("iterations", rec.iterations as f64)
        .f("energy.total", rec.energy.total)
        .f("energy.kinetic", rec.energy.kinetic)
        .f("energy.coulomb_quarter", rec.energy.coulomb_quarter)
        .f("energy.potential", rec.energy.potential)
        .f("e_norm", rec.energy.e_norm)
        .f("residual.l2", rec.residual_l2)
        .f("residual.nehari", rec.nehari_residual)
        .f("residual.pohozaev", rec.pohozaev_residual)
        .f("boundary_mass_fraction", rec.boundary_mass_fraction)
        .f("u.max", rec.u.max_value())
        .f("u.min", rec.u.min_value());
    if let Some(pb) = rec.path_energy_max {
        doc.f("path_energy_max", pb);
    }
    doc
}

/// Hard invariants shared by every converged record.
fn check_record(rec: &SolutionRecord, cd: &ChargeDensity, failures: &mut Vec<String>) {
    if !rec.converged {
        failures.push(format!(
            "solver did not converge (residual {:.3e} after {} iterations)",
            rec.residual_l2, rec.iterations
        ));
        return;
    }
    if rec.u.min_value() < -1e-12 {
        failures.push(format!("negative values in u: min {}", rec.u.min_value()));
    }
    let h1 = norm(&rec.u, NormKind::H1).unwrap_or(0.0);
    if rec.nehari_residual.abs() >= 1e-6 * h1 * h1 {
        failures.push(format!(
            "Nehari residual {:.3e} above 1e-6 * ||u||_H1^2 = {:.3e}",
            rec.nehari_residual.abs(),
            1e-6 * h1 * h1
        ));
    }
    if rec.boundary_mass_fraction < 1e-8
        && rec.pohozaev_residual.abs() >= 1e-2 * rec.energy.kinetic.abs().max(1e-300)
    {
        failures.push(format!(
            "scaling-identity residual {:.3e} above 1e-2 * kinetic = {:.3e}",
            rec.pohozaev_residual.abs(),
            1e-2 * rec.energy.kinetic
        ));
    }
    let kcheck = verify_k_condition(cd, &rec.u.grid());
    if cd.k() != 0.0 && !kcheck.holds {
        failures.push(format!(
            "k-condition violated: worst margin {:.3e}",
            kcheck.worst_margin
        ));
    }
}

fn solve_one(cfg: &ExperimentConfig) -> Result<(SolutionRecord, ChargeDensity, ProblemParams), String> {
    let grid = cfg.build_grid().map_err(|e| e.to_string())?;
    let cd = cfg.build_rho()?;
    let pp = cfg.build_params().map_err(|e| e.to_string())?;
    let seed = build_seed(cfg, grid);
    let scfg = cfg.solver_config();
    let rec = if cfg.solver.method == "nehari" {
        ground_state_nehari_with(&cd, &pp, &seed, scfg).map_err(|e| e.to_string())?
    } else {
        mountain_pass_solve_with(&cd, &pp, &seed, scfg).map_err(|e| e.to_string())?
    };
    Ok((rec, cd, pp))
}

fn run_solve(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    outcome: &mut RunOutcome,
    with_diagnostics: bool,
) -> Result<(), String> {
    let (rec, cd, _pp) = solve_one(cfg)?;
    let doc = record_doc(&rec, &cd);
    let path = out_dir.join("solution_record.json");
    write_flat_json(&path, &doc.0).map_err(|e| e.to_string())?;
    outcome.artifacts.push(path);
    if with_diagnostics {
        let sob = sobolev_estimate(rec.u.grid(), rec.params.p).map_err(|e| e.to_string())?;
        let report = diagnostics_report(&rec, &cd, &sob);
        let path = out_dir.join("diagnostics.json");
        write_flat_json(&path, &report.flatten()).map_err(|e| e.to_string())?;
        outcome.artifacts.push(path);
    }
    check_record(&rec, &cd, &mut outcome.failures);
    Ok(())
}

fn run_sweep_mu(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    outcome: &mut RunOutcome,
) -> Result<(), String> {
    let grid = cfg.build_grid().map_err(|e| e.to_string())?;
    let cd = cfg.build_rho()?;
    let pp = cfg.build_params().map_err(|e| e.to_string())?;
    let seed = build_seed(cfg, grid);
    let mu_values = cfg.sweep.mu_values.clone().unwrap_or_default();
    let result = mu_continuation(&cd, &pp, &mu_values, &seed, cfg.solver_config())
        .map_err(|e| e.to_string())?;
    let rows: Vec<Vec<String>> = result
        .records
        .iter()
        .zip(&result.mu_values)
        .map(|(rec, &mu)| {
            vec![
                fmt_f64(mu),
                fmt_f64(rec.energy.total),
                rec.converged.to_string(),
                fmt_f64(rec.residual_l2),
            ]
        })
        .collect();
    let csv_path = out_dir.join("sweep_mu.csv");
    write_csv(&csv_path, &["mu", "c", "converged", "residual_l2"], &rows)
        .map_err(|e| e.to_string())?;
    outcome.artifacts.push(csv_path);

    let mut doc = FlatDoc::new();
    doc.b("monotone_ok", result.monotone_ok)
        .b("all_converged", result.all_converged)
        .f("rows", result.mu_values.len() as f64);
    let path = out_dir.join("continuation.json");
    write_flat_json(&path, &doc.0).map_err(|e| e.to_string())?;
    outcome.artifacts.push(path);

    if !result.monotone_ok {
        outcome
            .failures
            .push("continuation energies are not non-increasing".into());
    }
    for rec in &result.records {
        check_record(rec, &cd, &mut outcome.failures);
    }
    Ok(())
}

pub fn concentration_csv_row(rep: &ConcentrationReport, converged: bool) -> Vec<String> {
    let grad_norm = (rep.grad_rho_at_peak[0].powi(2)
        + rep.grad_rho_at_peak[1].powi(2)
        + rep.grad_rho_at_peak[2].powi(2))
    .sqrt();
    let claim_norm = (rep.coupling_integral[0].powi(2)
        + rep.coupling_integral[1].powi(2)
        + rep.coupling_integral[2].powi(2))
    .sqrt();
    vec![
        fmt_f64(rep.eps),
        fmt_f64(rep.x_peak[0]),
        fmt_f64(rep.x_peak[1]),
        fmt_f64(rep.x_peak[2]),
        fmt_f64(rep.peak_value),
        fmt_f64(grad_norm),
        fmt_f64(claim_norm),
        fmt_f64(rep.rescaled_profile_distance),
        converged.to_string(),
    ]
}

/// Frozen sweep schema.
pub const SWEEP_EPS_HEADER: [&str; 9] = [
    "eps",
    "peak_x1",
    "peak_x2",
    "peak_x3",
    "peak_value",
    "grad_rho_norm",
    "claim3_norm",
    "profile_distance",
    "converged",
];

fn run_sweep_eps(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    outcome: &mut RunOutcome,
) -> Result<(), String> {
    let cd = cfg.build_rho()?;
    let pp = cfg.build_params().map_err(|e| e.to_string())?;
    let eps_values = cfg.sweep.eps_values.clone().unwrap_or_default();
    let box_factor = cfg.sweep.box_factor.unwrap_or(14.0);
    let center = cfg
        .solver
        .seed
        .center
        .or(cfg.grid.center)
        .unwrap_or([0.0; 3]);
    let records = sweep_eps(
        &cd,
        &pp,
        &eps_values,
        cfg.grid.n,
        box_factor,
        center,
        cfg.solver_config(),
    )
    .map_err(|e| e.to_string())?;
    let oracle =
        shoot_ground_state(pp.p, pp.lambda, pp.mu).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for rec in &records {
        let rep = concentration_report_with(rec, &cd, &oracle).map_err(|e| e.to_string())?;
        if !rep.peak_bound_ok {
            outcome.failures.push(format!(
                "peak bound violated at eps = {}: peak {:.6e}",
                rep.eps, rep.peak_value
            ));
        }
        rows.push(concentration_csv_row(&rep, rec.converged));
        check_record(rec, &cd, &mut outcome.failures);
    }
    let csv_path = out_dir.join("sweep_eps.csv");
    write_csv(&csv_path, &SWEEP_EPS_HEADER, &rows).map_err(|e| e.to_string())?;
    outcome.artifacts.push(csv_path);
    Ok(())
}

/// Worker-count cap from SPVAR_THREADS (1 on absent/invalid values keeps
/// batch ordering trivially deterministic; results are index-ordered either
/// way).
pub fn worker_cap() -> usize {
    std::env::var("SPVAR_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

/// Run independent closures on up to `worker_cap()` threads, collecting
/// results in input order.
fn run_batch<T: Send>(jobs: Vec<Box<dyn FnOnce() -> T + Send>>, cap: usize) -> Vec<T> {
    if cap <= 1 || jobs.len() <= 1 {
        return jobs.into_iter().map(|j| j()).collect();
    }
    let mut slots: Vec<Option<T>> = jobs.iter().map(|_| None).collect();
    let jobs: Vec<(usize, Box<dyn FnOnce() -> T + Send>)> = jobs.into_iter().enumerate().collect();
    let queue = std::sync::Mutex::new(jobs);
    let results = std::sync::Mutex::new(Vec::<(usize, T)>::new());
    std::thread::scope(|scope| {
        for _ in 0..cap.min(slots.len()) {
            scope.spawn(|| loop {
                let job = queue.lock().unwrap().pop();
                match job {
                    Some((i, j)) => {
                        let r = j();
                        results.lock().unwrap().push((i, r));
                    }
                    None => break,
                }
            });
        }
    });
    for (i, r) in results.into_inner().unwrap() {
        slots[i] = Some(r);
    }
    slots.into_iter().map(|s| s.unwrap()).collect()
}

fn run_oracle(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    outcome: &mut RunOutcome,
) -> Result<(), String> {
    let grid = spvar_core::grid::make_grid(8, 3.0, [0.0; 3]).map_err(|e| e.to_string())?;
    let rng_seed = cfg.solver.seed.rng_seed.unwrap_or(0);

    // convolution vs direct sum on random charges
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut fields = Vec::new();
    for _ in 0..20 {
        let mut f = ScalarField::zeros(grid);
        for v in f.values_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        fields.push(f);
    }
    let solver = std::sync::Arc::new(PoissonSolver::new(grid));
    let jobs: Vec<Box<dyn FnOnce() -> f64 + Send>> = fields
        .into_iter()
        .map(|q| {
            let solver = std::sync::Arc::clone(&solver);
            let job: Box<dyn FnOnce() -> f64 + Send> = Box::new(move || {
                let a = solver.solve(&q);
                let b = poisson_direct(&q).expect("small grid");
                a.axpy(-1.0, &b).max_abs() / b.max_abs().max(1e-300)
            });
            job
        })
        .collect();
    let errors = run_batch(jobs, worker_cap());
    let worst_conv = errors.iter().copied().fold(0.0f64, f64::max);
    if worst_conv >= 1e-10 {
        outcome.failures.push(format!(
            "convolution vs direct sum relative error {worst_conv:.3e} above 1e-10"
        ));
    }

    // first-variation pairing vs finite differences of the energy
    let cd = cfg.build_rho()?;
    let pp = cfg.build_params().map_err(|e| e.to_string())?;
    let mut worst_fd = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed.wrapping_add(1));
    for _ in 0..5 {
        let mk = |rng: &mut ChaCha8Rng| {
            let mut bumps = Vec::new();
            for _ in 0..3 {
                bumps.push((
                    [
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    ],
                    rng.gen_range(0.8..1.4),
                    rng.gen_range(-1.0..1.0),
                ));
            }
            ScalarField::from_fn(grid, |x| {
                bumps
                    .iter()
                    .map(|(c, w, a): &([f64; 3], f64, f64)| {
                        a * (-((x[0] - c[0]).powi(2)
                            + (x[1] - c[1]).powi(2)
                            + (x[2] - c[2]).powi(2))
                            / w)
                            .exp()
                    })
                    .sum()
            })
        };
        let u = mk(&mut rng);
        let v = mk(&mut rng);
        let gvar = first_variation(&u, &cd, &pp);
        let paired = pair_variation(&gvar, &v);
        let t = 1e-4;
        let ep = energy(&u.axpy(t, &v), &cd, &pp).total;
        let em = energy(&u.axpy(-t, &v), &cd, &pp).total;
        let fd = (ep - em) / (2.0 * t);
        worst_fd = worst_fd.max((paired - fd).abs() / fd.abs().max(1e-300));
    }
    if worst_fd >= 1e-5 {
        outcome.failures.push(format!(
            "finite-difference gradient check relative error {worst_fd:.3e} above 1e-5"
        ));
    }

    // radial limit profile golden table
    let prof = shoot_ground_state(pp.p.clamp(2.1, 4.9), pp.lambda, pp.mu)
        .map_err(|e| e.to_string())?;
    let golden = out_dir.join("radial_profile.txt");
    prof.write_golden(&golden).map_err(|e| e.to_string())?;
    outcome.artifacts.push(golden);

    let mut doc = FlatDoc::new();
    doc.f("poisson.worst_relative_error", worst_conv)
        .b("poisson.pass", worst_conv < 1e-10)
        .f("gradient_check.worst_relative_error", worst_fd)
        .b("gradient_check.pass", worst_fd < 1e-5)
        .f("radial.u0", prof.u0)
        .f("radial.energy", prof.energy);
    let path = out_dir.join("oracle_report.json");
    write_flat_json(&path, &doc.0).map_err(|e| e.to_string())?;
    outcome.artifacts.push(path);

    // quadrature sanity: integral of a normalized bump stays put
    let bump = ScalarField::from_fn(grid, |x| {
        (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()
    });
    if !(integrate(&bump) > 0.0) {
        outcome.failures.push("quadrature sanity failed".into());
    }
    Ok(())
}

fn run_sobolev(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    outcome: &mut RunOutcome,
) -> Result<(), String> {
    let grid = cfg.build_grid().map_err(|e| e.to_string())?;
    let est = sobolev_estimate(grid, cfg.params.p).map_err(|e| e.to_string())?;
    let mut doc = FlatDoc::new();
    doc.f("p", est.p).f("s_hat", est.s_hat).s("method", &est.method);
    let path = out_dir.join("sobolev.json");
    write_flat_json(&path, &doc.0).map_err(|e| e.to_string())?;
    outcome.artifacts.push(path);
    if !(est.s_hat > 0.0) {
        outcome.failures.push("Sobolev estimate not positive".into());
    }
    Ok(())
}

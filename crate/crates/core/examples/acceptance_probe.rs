//! Dev probe for the heavy acceptance setups (parameters get frozen into
//! the acceptance suite once verified here).

use spvar_core::charge::{ChargeDensity, RhoVariant};
use spvar_core::functional::ProblemParams;
use spvar_core::grid::{make_grid, ScalarField};
use spvar_core::semiclassical::{
    concentration_report_with, decay_barrier_check, limit_equation_residual, rescaled_profile,
    sweep_eps,
};
use spvar_core::solvers::{mu_continuation, shoot_ground_state, SolverConfig};
use std::time::Instant;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_default();
    match which.as_str() {
        "mu" => probe_mu(),
        "eps" => probe_eps(),
        _ => {
            probe_mu();
            probe_eps();
        }
    }
}

fn probe_mu() {
    let t0 = Instant::now();
    let g = make_grid(48, 6.0, [0.0; 3]).unwrap();
    let cd = ChargeDensity::new(RhoVariant::CoercivePower { rho0: 1.0, s: 2.0 }, 0.0).unwrap();
    let pp = ProblemParams::standard(2.5);
    let seed = ScalarField::from_fn(g, |x| {
        2.0 * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 0.64).exp()
    });
    let mu_grid = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
    let res = mu_continuation(&cd, &pp, &mu_grid, &seed, SolverConfig::default()).unwrap();
    println!("mu continuation in {:.1}s", t0.elapsed().as_secs_f64());
    for (rec, mu) in res.records.iter().zip(&mu_grid) {
        println!(
            "mu={mu}: converged={} iters={} c={:.8e} res={:.2e} poh={:+.3e} (kin {:.3e}) bnd={:.2e} nehari={:+.2e}",
            rec.converged,
            rec.iterations,
            rec.energy.total,
            rec.residual_l2,
            rec.pohozaev_residual,
            rec.energy.kinetic,
            rec.boundary_mass_fraction,
            rec.nehari_residual,
        );
    }
    println!("monotone_ok={} all_converged={}", res.monotone_ok, res.all_converged);
}

fn probe_eps() {
    let t0 = Instant::now();
    let cd = ChargeDensity::new(
        RhoVariant::BumpedConstant {
            rho_inf: 1.0,
            a: 0.5,
            sigma: 1.2,
            xb: [1.0, 0.0, 0.0],
        },
        -0.4,
    )
    .unwrap();
    let pp = ProblemParams::standard(3.0);
    let eps_list = [0.4, 0.2, 0.1, 0.05];
    let recs = sweep_eps(
        &cd,
        &pp,
        &eps_list,
        64,
        13.0,
        [0.0; 3],
        SolverConfig::default(),
    )
    .unwrap();
    println!("eps sweep in {:.1}s", t0.elapsed().as_secs_f64());
    let oracle = shoot_ground_state(pp.p, pp.lambda, pp.mu).unwrap();
    for rec in &recs {
        let rep = concentration_report_with(rec, &cd, &oracle).unwrap();
        let gnorm = (rep.grad_rho_at_peak[0].powi(2)
            + rep.grad_rho_at_peak[1].powi(2)
            + rep.grad_rho_at_peak[2].powi(2))
        .sqrt();
        let (w, _) = rescaled_profile(rec).unwrap();
        let barrier = decay_barrier_check(&w, pp.lambda).unwrap();
        println!(
            "eps={:.2}: conv={} it={} peak=({:+.4},{:+.4},{:+.4}) val={:.4} |grad rho|={:.4e} limres={:.3e} dist={:.3e} barrier_ok={} ratio={:.3}",
            rec.params.eps,
            rec.converged,
            rec.iterations,
            rep.x_peak[0],
            rep.x_peak[1],
            rep.x_peak[2],
            rep.peak_value,
            gnorm,
            limit_equation_residual(rec),
            rep.rescaled_profile_distance,
            barrier.ok,
            barrier.worst_ratio,
        );
    }
}

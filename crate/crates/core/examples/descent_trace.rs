//! Scratch tracer for solver behaviour on small grids (dev aid).

use spvar_core::charge::{ChargeDensity, RhoVariant};
use spvar_core::functional::{first_variation, ProblemParams};
use spvar_core::grid::{make_grid, ScalarField};
use spvar_core::solvers::{mountain_pass_solve_with, SolverConfig};

fn main() {
    let g = make_grid(32, 5.0, [0.0; 3]).unwrap();
    let cd = ChargeDensity::new(RhoVariant::CoercivePower { rho0: 1.0, s: 2.0 }, 0.0).unwrap();
    let pp = ProblemParams::standard(3.5);
    let seed = ScalarField::from_fn(g, |x| {
        2.0 * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()
    });
    let cfg = SolverConfig {
        max_iter: 400,
        ..Default::default()
    };
    let rec = mountain_pass_solve_with(&cd, &pp, &seed, cfg).unwrap();
    let gv = first_variation(&rec.u, &cd, &pp);
    // radial profile of |g| and u
    let grid = rec.u.grid();
    let mut bins: Vec<(f64, f64, f64, usize)> = vec![(0.0, 0.0, 0.0, 0); 16];
    for (i, x) in grid.positions().enumerate() {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let b = ((r / 0.875) as usize).min(15);
        bins[b].0 += r;
        bins[b].1 += gv.values()[i].abs();
        bins[b].2 += rec.u.values()[i];
        bins[b].3 += 1;
    }
    println!("zeros: {}", rec.u.values().iter().filter(|&&v| v == 0.0).count());
    println!("total: {}", grid.len());
    for (rs, gs, us, n) in bins {
        if n > 0 {
            let nf = n as f64;
            println!(
                "r={:6.2}  |g|={:9.3e}  u={:9.3e}  cells={}",
                rs / nf,
                gs / nf,
                us / nf,
                n
            );
        }
    }
}

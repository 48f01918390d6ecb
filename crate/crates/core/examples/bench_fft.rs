//! Rough timings for the hot operations (dev aid).

use spvar_core::coulomb::PoissonSolver;
use spvar_core::grid::{make_grid, ScalarField};
use spvar_core::spectral::SpectralOps;
use std::time::Instant;

fn main() {
    for n in [32usize, 48, 64] {
        let g = make_grid(n, 6.0, [0.0; 3]).unwrap();
        let u = ScalarField::from_fn(g, |x| {
            (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()
        });
        let t0 = Instant::now();
        let solver = PoissonSolver::new(g);
        let t_build = t0.elapsed().as_secs_f64();
        let q = u.map(|v| v * v);
        let t0 = Instant::now();
        let mut acc = 0.0;
        for _ in 0..3 {
            let phi = solver.solve(&q);
            acc += phi.values()[0];
        }
        let t_solve = t0.elapsed().as_secs_f64() / 3.0;
        let ops = SpectralOps::new(g);
        let t0 = Instant::now();
        for _ in 0..3 {
            let l = ops.laplacian(&u);
            acc += l.values()[0];
        }
        let t_lap = t0.elapsed().as_secs_f64() / 3.0;
        println!("n={n}: kernel build {t_build:.3}s, poisson {t_solve:.3}s, laplacian {t_lap:.3}s ({acc:.1e})");
    }
}

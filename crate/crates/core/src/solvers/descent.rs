//! Ray-projected preconditioned descent.
//!
//! Iterates are kept on the manifold {t*(u) = 1} where t*(u) is the first
//! positive root of psi(t) = ||u||^2_{eps,lambda} + t^2 D(u)
//! - mu t^{p-1} int u_+^{p+1}, i.e. the maximizer of t -> I(t u) along the
//! amplitude ray. On that set preconditioned descent on I is a genuine
//! descent method (the t-variation drops out because I'(t* u) u = 0), it is
//! bounded below by the closed-form lower bounds, and its fixed points solve
//! the full Euler-Lagrange equation. For p > 3 the projection coincides with
//! the Nehari projection.

use crate::charge::ChargeDensity;
use crate::coulomb::{coulomb_energy_with, CoulombSolution, PoissonSolver};
use crate::error::{CoreError, Result};
use crate::functional::{
    energy_parts, first_variation_parts, nehari_value_parts, pohozaev_residual_parts,
    scale_path_energy, ProblemParams,
};
use crate::grid::{inner, integrate, Grid, ScalarField};
use crate::spectral::SpectralOps;
use crate::solvers::{SolutionRecord, SolverConfig};

/// Scalar invariants of a state that determine its whole amplitude ray.
#[derive(Debug, Clone, Copy)]
pub struct RayState {
    /// int (eps^2 |grad u|^2 + lambda u^2)
    pub a2: f64,
    /// D(u)
    pub d: f64,
    /// int u_+^{p+1} (without the mu factor)
    pub pot: f64,
}

/// First positive root of psi(t) = a2 + t^2 d - mu_pot t^{p-1}
/// (`mu_pot` = mu * int u_+^{p+1}); this is the maximizer of I along the
/// ray. Returns None when the ray has no interior maximum.
pub fn ray_max_root(a2: f64, d: f64, mu_pot: f64, p: f64) -> Option<f64> {
    if mu_pot <= 0.0 || a2 <= 0.0 {
        return None;
    }
    let psi = |t: f64| a2 + t * t * d - mu_pot * t.powf(p - 1.0);
    let bisect = |mut lo: f64, mut hi: f64| -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if psi(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    if d <= 0.0 || p > 3.0 {
        // single sign change: the p-term eventually wins (p > 3), or the
        // quadratic term is absent
        let mut hi = 1.0;
        let mut grow = 0;
        while psi(hi) > 0.0 {
            hi *= 2.0;
            grow += 1;
            if grow > 200 {
                return None;
            }
        }
        let mut lo = hi / 2.0;
        if hi <= 1.0 {
            lo = 0.0;
        }
        return Some(bisect(lo, hi));
    }
    if (p - 3.0).abs() < 1e-14 {
        // psi = a2 + (d - mu_pot) t^2
        if mu_pot > d {
            return Some((a2 / (mu_pot - d)).sqrt());
        }
        return None;
    }
    // p in (2,3): psi dips at t_min = (mu_pot (p-1) / (2 d))^{1/(3-p)}
    let t_min = (mu_pot * (p - 1.0) / (2.0 * d)).powf(1.0 / (3.0 - p));
    if psi(t_min) >= 0.0 {
        return None;
    }
    Some(bisect(0.0, t_min))
}

/// Shared workspace for one (grid, density, parameters) combination.
pub struct DescentEngine {
    grid: Grid,
    cd: ChargeDensity,
    pp: ProblemParams,
    cfg: SolverConfig,
    poisson: PoissonSolver,
    ops: SpectralOps,
}

#[derive(Clone)]
struct Iterate {
    u: ScalarField,
    coulomb: CoulombSolution,
    /// I(u)
    energy: f64,
}

impl DescentEngine {
    pub fn new(grid: Grid, cd: ChargeDensity, pp: ProblemParams, cfg: SolverConfig) -> Self {
        DescentEngine {
            grid,
            cd,
            pp,
            cfg,
            poisson: PoissonSolver::new(grid),
            ops: SpectralOps::new(grid),
        }
    }

    pub fn measure(&self, u: &ScalarField) -> RayState {
        let coulomb = coulomb_energy_with(&self.poisson, u, &self.cd);
        self.ray_state(u, &coulomb)
    }

    fn ray_state(&self, u: &ScalarField, coulomb: &CoulombSolution) -> RayState {
        let grad2 = self.ops.dirichlet_energy(u);
        let mass = integrate(&u.map(|v| v * v));
        let pot = integrate(&u.map(|v| v.max(0.0).powf(self.pp.p + 1.0)));
        RayState {
            a2: self.pp.eps * self.pp.eps * grad2 + self.pp.lambda * mass,
            d: coulomb.coulomb_energy,
            pot,
        }
    }

    /// I(t u) from the ray invariants.
    fn ray_energy(&self, ray: &RayState, t: f64) -> f64 {
        0.5 * t * t * ray.a2 + 0.25 * t.powi(4) * ray.d
            - self.pp.mu / (self.pp.p + 1.0) * t.powf(self.pp.p + 1.0) * ray.pot
    }

    /// Clip to the positive cone and rescale onto the ray maximizer.
    /// The Coulomb solve of the clipped field is reused exactly: phi and D
    /// scale as t^2 and t^4.
    fn project(&self, v: ScalarField) -> Option<Iterate> {
        let v = v.positive_part();
        if v.max_abs() == 0.0 {
            return None;
        }
        let coulomb = coulomb_energy_with(&self.poisson, &v, &self.cd);
        let ray = self.ray_state(&v, &coulomb);
        let t = ray_max_root(ray.a2, ray.d, self.pp.mu * ray.pot, self.pp.p)?;
        let u = v.scale(t);
        let coulomb = CoulombSolution {
            phi: coulomb.phi.scale(t * t),
            dirichlet_energy: coulomb.dirichlet_energy * t.powi(4),
            coulomb_energy: coulomb.coulomb_energy * t.powi(4),
        };
        let ray = RayState {
            a2: ray.a2 * t * t,
            d: ray.d * t.powi(4),
            pot: ray.pot * t.powf(self.pp.p + 1.0),
        };
        let energy = self.ray_energy(&ray, 1.0);
        Some(Iterate { u, coulomb, energy })
    }

    /// Condition the seed until its amplitude ray has a maximizer. Amplitude
    /// rescaling never changes root existence (psi_{cu}(t) = c^2 psi_u(ct)),
    /// so the walk concentrates the shape through the scaling family
    /// v_t(x) = t^2 v(t x), which raises the potential mass against the
    /// Coulomb mass, as far as the grid can resolve.
    fn conditioned_seed(&self, seed: &ScalarField) -> Result<Iterate> {
        if seed.positive_part().max_abs() == 0.0 {
            return Err(CoreError::TrivialSeed);
        }
        if let Some(it) = self.project(seed.positive_part()) {
            return Ok(it);
        }
        let c = self.grid.center();
        let cutoff = 1e-12 * seed.max_abs();
        let mut support = 0.0f64;
        for (i, x) in self.grid.positions().enumerate() {
            if seed.values()[i].abs() > cutoff {
                let r = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2))
                    .sqrt();
                support = support.max(r);
            }
        }
        let t_max = support / (4.0 * self.grid.spacing());
        let mut t = 1.15;
        let mut best: Option<Iterate> = None;
        let mut misses_after_best = 0usize;
        while t <= t_max {
            let w = ScalarField::from_fn(self.grid, |x| {
                let y = [
                    c[0] + t * (x[0] - c[0]),
                    c[1] + t * (x[1] - c[1]),
                    c[2] + t * (x[2] - c[2]),
                ];
                t * t * seed.sample_tricubic(y).max(0.0)
            });
            if let Some(it) = self.project(w) {
                // keep walking while the projected level improves: the first
                // root can sit far above the interesting branch
                match &best {
                    Some(b) if it.energy >= b.energy => misses_after_best += 1,
                    _ => {
                        best = Some(it);
                        misses_after_best = 0;
                    }
                }
            } else if best.is_some() {
                misses_after_best += 1;
            }
            if best.is_some() && misses_after_best >= 3 {
                break;
            }
            t *= 1.15;
        }
        best.ok_or_else(|| {
            CoreError::BadParameter(
                "could not place the seed on the amplitude maximizer (resolution-limited)".into(),
            )
        })
    }

    /// Approximate solve of (-eps^2 Lap + lambda + rho phi) d = g by
    /// preconditioned CG with the constant-coefficient inverse as
    /// preconditioner. The multiplication potential rho phi >= 0 keeps the
    /// operator SPD; a loose tolerance suffices for a descent direction.
    fn direction(&self, g: &ScalarField, phi: &ScalarField) -> ScalarField {
        let eps2 = self.pp.eps * self.pp.eps;
        let lambda = self.pp.lambda;
        let grid = self.grid;
        let mut v_pot = ScalarField::zeros(grid);
        for (i, x) in grid.positions().enumerate() {
            v_pot.values_mut()[i] = self.cd.eval(x) * phi.values()[i];
        }
        let apply = |x: &ScalarField| -> ScalarField {
            let lap = self.ops.laplacian(x);
            let mut out = ScalarField::zeros(grid);
            for i in 0..grid.len() {
                out.values_mut()[i] = -eps2 * lap.values()[i]
                    + lambda * x.values()[i]
                    + v_pot.values()[i] * x.values()[i];
            }
            out
        };
        let mut d = self.ops.inv_helmholtz(g, eps2, lambda);
        let mut r = g.axpy(-1.0, &apply(&d));
        let g_norm2 = inner(g, g).max(1e-300);
        let mut z = self.ops.inv_helmholtz(&r, eps2, lambda);
        let mut p = z.clone();
        let mut rz = inner(&r, &z);
        for _ in 0..60 {
            if inner(&r, &r) <= 1e-4 * g_norm2 {
                break;
            }
            let ap = apply(&p);
            let denom = inner(&p, &ap);
            if denom <= 0.0 {
                break;
            }
            let alpha = rz / denom;
            d = d.axpy(alpha, &p);
            r = r.axpy(-alpha, &ap);
            z = self.ops.inv_helmholtz(&r, eps2, lambda);
            let rz_new = inner(&r, &z);
            p = z.axpy(rz_new / rz, &p);
            rz = rz_new;
        }
        d
    }

    fn residual_of(&self, it: &Iterate) -> (ScalarField, f64) {
        let gvar = first_variation_parts(&it.u, &self.ops, &it.coulomb.phi, &self.cd, &self.pp);
        let unorm = integrate(&it.u.map(|v| v * v)).sqrt().max(1e-300);
        let res = integrate(&gvar.map(|v| v * v)).sqrt() / unorm;
        (gvar, res)
    }

    /// Main loop shared by the Nehari and mountain-pass entry points.
    ///
    /// Acceptance is two-phase: an Armijo test on the projected energy while
    /// decreases are resolvable in floating point, and a strict residual
    /// decrease once they are not (the energy differences near a critical
    /// point fall below roundoff long before the residual bottoms out).
    pub fn solve(&self, seed: &ScalarField, with_path_bound: bool) -> Result<SolutionRecord> {
        let mut cur = self.conditioned_seed(seed)?;
        let (mut gvar, mut residual_l2) = self.residual_of(&cur);
        let mut best: Option<(f64, Iterate)> = None;
        let mut step = 0.5f64;
        let mut bad_streak = 0usize;
        let mut stuck_streak = 0usize;
        let mut iterations = 0usize;
        let mut converged = false;

        let trace = std::env::var("SPVAR_TRACE").is_ok();
        loop {
            if trace {
                eprintln!(
                    "it {iterations:5} I={:+.10e} res={:.3e} min={:+.2e} max={:.3e} step={:.2e}",
                    cur.energy,
                    residual_l2,
                    cur.u.min_value(),
                    cur.u.max_value(),
                    step
                );
            }
            if residual_l2 < self.cfg.tol {
                converged = true;
                break;
            }
            if best.as_ref().map_or(true, |(r, _)| residual_l2 < *r) {
                best = Some((residual_l2, cur.clone()));
            }
            if iterations >= self.cfg.max_iter {
                break;
            }
            iterations += 1;

            let dir = self.direction(&gvar, &cur.coulomb.phi);
            let slope = inner(&gvar, &dir).max(0.0);
            let noise = 1e-11 * cur.energy.abs().max(1.0);

            let mut s = step;
            let mut accepted: Option<(Iterate, ScalarField, f64, f64)> = None;
            for _ in 0..40 {
                let cand = cur.u.axpy(-s, &dir);
                if let Some(next) = self.project(cand) {
                    let decrease = cur.energy - next.energy;
                    let wanted = self.cfg.armijo * s * slope;
                    if decrease >= wanted && decrease > noise {
                        // resolvable energy descent
                        let (g_next, r_next) = self.residual_of(&next);
                        accepted = Some((next, g_next, r_next, s));
                        break;
                    }
                    if decrease >= -noise {
                        // energy flat at roundoff level: demand residual progress
                        let (g_next, r_next) = self.residual_of(&next);
                        if r_next <= (1.0 - 1e-6) * residual_l2 {
                            accepted = Some((next, g_next, r_next, s));
                            break;
                        }
                    }
                }
                s *= 0.5;
                if s < 1e-14 {
                    break;
                }
            }
            match accepted {
                Some((next, g_next, r_next, s_acc)) => {
                    bad_streak = if next.energy > cur.energy + noise { bad_streak + 1 } else { 0 };
                    stuck_streak = 0;
                    cur = next;
                    gvar = g_next;
                    residual_l2 = r_next;
                    step = (s_acc * 2.0).min(1.0);
                }
                None => {
                    stuck_streak += 1;
                    step = (step * 0.25).max(1e-12);
                }
            }
            if bad_streak >= self.cfg.max_bad_steps || stuck_streak >= 10 {
                break;
            }
        }

        // fall back to the best iterate seen if the loop ended elsewhere
        if !converged {
            if let Some((r_best, it_best)) = best {
                if r_best < residual_l2 {
                    cur = it_best;
                    residual_l2 = r_best;
                }
            }
        }

        let energy = energy_parts(&cur.u, &self.ops, &cur.coulomb, &self.pp);
        let nehari = nehari_value_parts(&cur.u, &self.ops, &cur.coulomb, &self.pp);
        let poh = pohozaev_residual_parts(&cur.u, &self.ops, &cur.coulomb, &self.cd, &self.pp);
        let path_energy_max = if with_path_bound && converged {
            Some(self.path_bound(&cur.u))
        } else {
            None
        };
        Ok(SolutionRecord {
            phi: cur.coulomb.phi.clone(),
            u: cur.u,
            params: self.pp,
            rho_tag: self.cd.to_string(),
            energy,
            residual_l2,
            nehari_residual: nehari,
            pohozaev_residual: poh.residual,
            boundary_mass_fraction: poh.boundary_mass_fraction,
            path_energy_max,
            iterations,
            converged,
        })
    }

    /// Maximum of the scaling-family energy t -> I(t^2 u(t x)) on a modest
    /// logarithmic t-grid (upper bound for the min-max level).
    fn path_bound(&self, u: &ScalarField) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let mut ts: Vec<f64> = Vec::new();
        let mut t = 0.25;
        while t <= 4.0 {
            ts.push(t);
            t *= 1.15;
        }
        // t = 1 reproduces u exactly, so the family always passes through
        // the solution level
        ts.push(1.0);
        for t in ts {
            if let Ok(e) = scale_path_energy(u, &self.cd, &self.pp, t) {
                best = best.max(e);
            }
        }
        best
    }
}

/// Mountain-pass entry point, p in (2,5).
pub fn mountain_pass_solve_with(
    cd: &ChargeDensity,
    pp: &ProblemParams,
    seed: &ScalarField,
    cfg: SolverConfig,
) -> Result<SolutionRecord> {
    if !(pp.p > 2.0 && pp.p < 5.0) {
        return Err(CoreError::BadParameter(format!(
            "mountain-pass solver needs p in (2,5), got {}",
            pp.p
        )));
    }
    cd.check_k_admissible(pp.p)?;
    let engine = DescentEngine::new(seed.grid(), cd.clone(), *pp, cfg);
    engine.solve(seed, true)
}

//! Closed-form bounds and identity checks evaluated against solver output:
//! the (alpha, gamma, delta) linear system and its consequences, the
//! C(k,p)-type lower bounds with a numerically estimated Sobolev constant,
//! and far-field decay fits.

use crate::charge::ChargeDensity;
use crate::coulomb::{coulomb_energy_with, PoissonSolver};
use crate::error::{CoreError, Result};
use crate::grid::{integrate, Grid, ScalarField};
use crate::solvers::SolutionRecord;
use crate::spectral::SpectralOps;

/// Measured quadratic/quartic/potential masses of a critical point.
#[derive(Debug, Clone, Copy)]
pub struct TripleIdentity {
    /// int (eps^2 |grad u|^2 + lambda u^2)
    pub alpha: f64,
    /// D(u)
    pub gamma: f64,
    /// mu int u_+^{p+1}
    pub delta: f64,
    /// energy level of the record
    pub c: f64,
    pub k: f64,
    pub p: f64,
}

/// Bounds from the linear system at level `c`, valid for p in (2,3) under
/// the k-condition.
#[derive(Debug, Clone, Copy)]
pub struct TripleBounds {
    pub delta_max: f64,
    pub gamma_max: f64,
}

pub fn triple_bounds(c: f64, k: f64, p: f64) -> Result<TripleBounds> {
    if !(p > 2.0 && p < 3.0) {
        return Err(CoreError::BadParameter(format!(
            "triple bounds need p in (2,3), got {p}"
        )));
    }
    if c < 0.0 {
        return Err(CoreError::BadParameter(format!(
            "level must be nonnegative, got {c}"
        )));
    }
    let denom = 2.0 * (p - 2.0) + k * (p - 1.0);
    if denom <= 0.0 {
        return Err(CoreError::BadTripleDenominator(denom));
    }
    Ok(TripleBounds {
        delta_max: c * (3.0 + 2.0 * k) * (p + 1.0) / denom,
        gamma_max: -2.0 * c * (p - 5.0) / denom,
    })
}

/// Rayleigh-quotient estimate of the best constant of H^1 -> L^{p+1}.
#[derive(Debug, Clone)]
pub struct SobolevEstimate {
    pub p: f64,
    pub s_hat: f64,
    pub method: String,
}

/// Minimizes ||u||_{H1}^2 / ||u||_{L^{p+1}}^2 by stabilized inverse
/// iteration from a Gaussian. The returned quotient is an upper bound for
/// the true infimum (it is attained by a concrete trial function).
pub fn sobolev_estimate(grid: Grid, p: f64) -> Result<SobolevEstimate> {
    if !(p > 1.0 && p < 5.0) {
        return Err(CoreError::BadParameter(format!(
            "Sobolev estimate needs p in (1,5), got {p}"
        )));
    }
    let ops = SpectralOps::new(grid);
    let c = grid.center();
    let mut u = ScalarField::from_fn(grid, |x| {
        (-((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2))).exp()
    });
    let quotient = |u: &ScalarField| -> f64 {
        let h1 = ops.dirichlet_energy(u) + integrate(&u.map(|v| v * v));
        let lp = integrate(&u.map(|v| v.abs().powf(p + 1.0))).powf(2.0 / (p + 1.0));
        h1 / lp
    };
    let mut best = quotient(&u);
    let gamma = p / (p - 1.0);
    for _ in 0..400 {
        // stabilized fixed point u <- S^gamma (-Lap + 1)^{-1} u^p
        let lu = integrate(&u.map(|v| v * v)) + ops.dirichlet_energy(&u);
        let nu = integrate(&u.map(|v| v.abs().powf(p + 1.0)));
        if nu <= 0.0 {
            break;
        }
        let s = lu / nu;
        let rhs = u.map(|v| v.abs().powf(p - 1.0) * v);
        let mut next = ops.inv_helmholtz(&rhs, 1.0, 1.0);
        next = next.scale(s.powf(gamma));
        let q = quotient(&next);
        let rel = (q - best).abs() / best.abs().max(1e-300);
        if q < best {
            best = q;
        }
        u = next;
        if rel < 1e-13 {
            break;
        }
    }
    Ok(SobolevEstimate {
        p,
        s_hat: best,
        method: "stabilized inverse iteration from a Gaussian trial".into(),
    })
}

/// Lower bound for the energy of nontrivial nonnegative solutions:
/// (p-1)/(2(p+1)) S^{(p+1)/(p-1)} for p in [3,5), and the k-weighted
/// coefficient (2(p-2)+k(p-1)) / ((3+2k)(p+1)) times the same power for
/// p in (2,3).
pub fn lower_bound_c(k: f64, p: f64, s: &SobolevEstimate) -> Result<f64> {
    let power = s.s_hat.powf((p + 1.0) / (p - 1.0));
    if (3.0..5.0).contains(&p) {
        return Ok((p - 1.0) / (2.0 * (p + 1.0)) * power);
    }
    if !(p > 2.0 && p < 3.0) {
        return Err(CoreError::BadParameter(format!(
            "lower bound defined for p in (2,5), got {p}"
        )));
    }
    let denom = 2.0 * (p - 2.0) + k * (p - 1.0);
    if denom <= 0.0 {
        let threshold = -2.0 * (p - 2.0) / (p - 1.0);
        return Err(CoreError::InadmissibleK { k, p, threshold });
    }
    Ok(denom / ((3.0 + 2.0 * k) * (p + 1.0)) * power)
}

/// Least-squares decay fits over the shell r in [L/2, 0.9 L].
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    /// slope of the pure exponential model log u = c0 - gamma (1+r)
    pub gamma_fit: f64,
    /// exponent of the stretched model log u = c0 - s (1+r)^alpha
    pub alpha_fit: f64,
    /// the metadata envelope u <= C e^{-sqrt(A)(1+r)^alpha} holds on the
    /// shell (C fitted at the inner boundary), and rho u^2 stays below its
    /// (beta - 2 sqrt(A)) envelope
    pub inequality_ok: bool,
}

/// Shell profile of `f` about the grid center over radii `[r_lo, r_hi]`:
/// per bin of one grid spacing, the mean cell radius and the mean of
/// log f (geometric mean, exact for planted exponential profiles).
/// Returns None when any shell cell is nonpositive.
fn shell_log_profile(f: &ScalarField, r_lo: f64, r_hi: f64) -> Option<Vec<(f64, f64)>> {
    let g = f.grid();
    let c = g.center();
    let h = g.spacing();
    let nbins = ((r_hi - r_lo) / h).ceil() as usize;
    let mut r_sums = vec![0.0f64; nbins];
    let mut log_sums = vec![0.0f64; nbins];
    let mut counts = vec![0usize; nbins];
    for (i, x) in g.positions().enumerate() {
        let r = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2)).sqrt();
        if r < r_lo || r >= r_hi {
            continue;
        }
        let b = (((r - r_lo) / h) as usize).min(nbins - 1);
        let v = f.values()[i];
        if v <= 0.0 {
            return None;
        }
        r_sums[b] += r;
        log_sums[b] += v.ln();
        counts[b] += 1;
    }
    Some(
        (0..nbins)
            .filter(|&b| counts[b] > 0)
            .map(|b| (r_sums[b] / counts[b] as f64, log_sums[b] / counts[b] as f64))
            .collect(),
    )
}

/// Linear least squares y ~ a + b x; returns (a, b).
fn linfit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|v| v * v).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(a, b)| a * b).sum();
    let b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let a = (sy - b * sx) / n;
    (a, b)
}

pub fn decay_fit(u: &ScalarField, cd: &ChargeDensity) -> Result<DecayFit> {
    let g = u.grid();
    let l = g.half_width();
    let shell_u = shell_log_profile(u, l / 2.0, 0.9 * l).ok_or(CoreError::EmptyDecayShell)?;
    if shell_u.len() < 3 {
        return Err(CoreError::EmptyDecayShell);
    }
    let rho_field = ScalarField::from_fn(g, |x| cd.eval(x));
    let rho_u2 = shell_log_profile(
        &u.zip_map(&rho_field, |a, b| b * a * a),
        l / 2.0,
        0.9 * l,
    );

    let logs: Vec<f64> = shell_u.iter().map(|&(_, lv)| lv).collect();

    // exponential model in (1+r)
    let xs: Vec<f64> = shell_u.iter().map(|&(r, _)| 1.0 + r).collect();
    let (_, slope) = linfit(&xs, &logs);
    let gamma_fit = -slope;

    // stretched model: scan + golden-section refine on alpha
    let sse = |alpha: f64| -> f64 {
        let xa: Vec<f64> = shell_u.iter().map(|&(r, _)| (1.0 + r).powf(alpha)).collect();
        let (a, b) = linfit(&xa, &logs);
        xa.iter()
            .zip(&logs)
            .map(|(&x, &y)| (a + b * x - y).powi(2))
            .sum()
    };
    let mut best_alpha = 0.2;
    let mut best_sse = f64::INFINITY;
    let mut a = 0.2;
    while a <= 3.0 {
        let e = sse(a);
        if e < best_sse {
            best_sse = e;
            best_alpha = a;
        }
        a += 0.05;
    }
    let (mut lo, mut hi) = (best_alpha - 0.05, best_alpha + 0.05);
    for _ in 0..60 {
        let m1 = lo + 0.382 * (hi - lo);
        let m2 = lo + 0.618 * (hi - lo);
        if sse(m1) < sse(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let alpha_fit = 0.5 * (lo + hi);

    // envelope checks with the decay metadata, in log space
    let md = cd.metadata().decay;
    let sqrt_a = md.a_const.max(0.0).sqrt();
    let log_margin = 1e-6;
    let envelope_ok = {
        let (r0, lv0) = shell_u[0];
        let log_c = lv0 + sqrt_a * (1.0 + r0).powf(md.alpha);
        shell_u
            .iter()
            .all(|&(r, lv)| lv <= log_c - sqrt_a * (1.0 + r).powf(md.alpha) + log_margin)
    };
    let product_ok = match &rho_u2 {
        None => envelope_ok,
        Some(prof) => {
            let rate = md.beta - 2.0 * sqrt_a;
            let (r0, lv0) = prof[0];
            let log_c = lv0 - rate * (1.0 + r0).powf(md.alpha);
            prof.iter()
                .all(|&(r, lv)| lv <= log_c + rate * (1.0 + r).powf(md.alpha) + log_margin)
        }
    };

    Ok(DecayFit {
        gamma_fit,
        alpha_fit,
        inequality_ok: envelope_ok && product_ok,
    })
}

/// Result of measuring the triple identities on a record.
#[derive(Debug, Clone, Copy)]
pub struct TripleConsistency {
    pub triple: TripleIdentity,
    /// |alpha/2 + gamma/4 - delta/(p+1) - c|
    pub residual1: f64,
    /// |alpha + gamma - delta|
    pub residual2: f64,
    /// 3 delta/(p+1) - alpha/2 - (5+2k)/4 gamma, nonnegative under the
    /// k-condition (one-sided inequality)
    pub slack3: f64,
    /// delta <= delta_max and gamma <= gamma_max at the measured level
    /// (only defined for p in (2,3))
    pub bounds: Option<(TripleBounds, bool)>,
}

pub fn check_triple_consistency(rec: &SolutionRecord, k: f64) -> TripleConsistency {
    let g = rec.u.grid();
    let ops = SpectralOps::new(g);
    let pp = &rec.params;
    let grad2 = ops.dirichlet_energy(&rec.u);
    let mass = integrate(&rec.u.map(|v| v * v));
    let alpha = pp.eps * pp.eps * grad2 + pp.lambda * mass;
    let gamma = 4.0 * rec.energy.coulomb_quarter;
    let delta = pp.mu * integrate(&rec.u.map(|v| v.max(0.0).powf(pp.p + 1.0)));
    let c = rec.energy.total;
    let triple = TripleIdentity {
        alpha,
        gamma,
        delta,
        c,
        k,
        p: pp.p,
    };
    let residual1 = (0.5 * alpha + 0.25 * gamma - delta / (pp.p + 1.0) - c).abs();
    let residual2 = (alpha + gamma - delta).abs();
    let slack3 = 3.0 * delta / (pp.p + 1.0) - 0.5 * alpha - (5.0 + 2.0 * k) / 4.0 * gamma;
    let bounds = triple_bounds(c.max(0.0), k, pp.p)
        .ok()
        .map(|b| (b, delta <= b.delta_max * (1.0 + 1e-9) && gamma <= b.gamma_max * (1.0 + 1e-9)));
    TripleConsistency {
        triple,
        residual1,
        residual2,
        slack3,
        bounds,
    }
}

/// Full per-record diagnostics document.
#[derive(Debug, Clone)]
pub struct DiagnosticsReport {
    pub rho_tag: String,
    pub p: f64,
    pub mu: f64,
    pub lambda: f64,
    pub eps: f64,
    pub k: f64,
    pub converged: bool,
    pub energy_total: f64,
    pub energy_kinetic: f64,
    pub energy_coulomb_quarter: f64,
    pub energy_potential: f64,
    pub e_norm: f64,
    pub residual_l2: f64,
    pub nehari_residual: f64,
    pub pohozaev_residual: f64,
    pub boundary_mass_fraction: f64,
    pub path_energy_max: Option<f64>,
    pub triple: TripleConsistency,
    pub sobolev_s_hat: f64,
    pub lower_bound: Option<f64>,
    pub lower_bound_ok: Option<bool>,
    pub k_condition_holds: bool,
    pub k_condition_margin: f64,
    pub decay: Option<DecayFit>,
}

/// A flat key/value view for machine-readable emission.
#[derive(Debug, Clone, PartialEq)]
pub enum FlatValue {
    F(f64),
    B(bool),
    S(String),
}

impl DiagnosticsReport {
    pub fn flatten(&self) -> Vec<(String, FlatValue)> {
        let mut out: Vec<(String, FlatValue)> = vec![
            ("rho".into(), FlatValue::S(self.rho_tag.clone())),
            ("p".into(), FlatValue::F(self.p)),
            ("mu".into(), FlatValue::F(self.mu)),
            ("lambda".into(), FlatValue::F(self.lambda)),
            ("eps".into(), FlatValue::F(self.eps)),
            ("k".into(), FlatValue::F(self.k)),
            ("converged".into(), FlatValue::B(self.converged)),
            ("energy.total".into(), FlatValue::F(self.energy_total)),
            ("energy.kinetic".into(), FlatValue::F(self.energy_kinetic)),
            (
                "energy.coulomb_quarter".into(),
                FlatValue::F(self.energy_coulomb_quarter),
            ),
            ("energy.potential".into(), FlatValue::F(self.energy_potential)),
            ("e_norm".into(), FlatValue::F(self.e_norm)),
            ("residual.l2".into(), FlatValue::F(self.residual_l2)),
            ("residual.nehari".into(), FlatValue::F(self.nehari_residual)),
            ("residual.pohozaev".into(), FlatValue::F(self.pohozaev_residual)),
            (
                "boundary_mass_fraction".into(),
                FlatValue::F(self.boundary_mass_fraction),
            ),
            ("triple.alpha".into(), FlatValue::F(self.triple.triple.alpha)),
            ("triple.gamma".into(), FlatValue::F(self.triple.triple.gamma)),
            ("triple.delta".into(), FlatValue::F(self.triple.triple.delta)),
            ("triple.residual1".into(), FlatValue::F(self.triple.residual1)),
            ("triple.residual2".into(), FlatValue::F(self.triple.residual2)),
            ("triple.slack3".into(), FlatValue::F(self.triple.slack3)),
            ("sobolev.s_hat".into(), FlatValue::F(self.sobolev_s_hat)),
            ("k_condition.holds".into(), FlatValue::B(self.k_condition_holds)),
            (
                "k_condition.worst_margin".into(),
                FlatValue::F(self.k_condition_margin),
            ),
        ];
        if let Some(v) = self.path_energy_max {
            out.push(("path_energy_max".into(), FlatValue::F(v)));
        }
        if let Some((b, ok)) = self.triple.bounds {
            out.push(("triple.delta_max".into(), FlatValue::F(b.delta_max)));
            out.push(("triple.gamma_max".into(), FlatValue::F(b.gamma_max)));
            out.push(("triple.bounds_ok".into(), FlatValue::B(ok)));
        }
        if let Some(v) = self.lower_bound {
            out.push(("lower_bound.value".into(), FlatValue::F(v)));
        }
        if let Some(v) = self.lower_bound_ok {
            out.push(("lower_bound.ok".into(), FlatValue::B(v)));
        }
        if let Some(d) = self.decay {
            out.push(("decay.gamma_fit".into(), FlatValue::F(d.gamma_fit)));
            out.push(("decay.alpha_fit".into(), FlatValue::F(d.alpha_fit)));
            out.push(("decay.inequality_ok".into(), FlatValue::B(d.inequality_ok)));
        }
        out
    }
}

/// Assemble the full report for a record (decay fit attempted, not required).
pub fn diagnostics_report(
    rec: &SolutionRecord,
    cd: &ChargeDensity,
    sob: &SobolevEstimate,
) -> DiagnosticsReport {
    let k = cd.k();
    let triple = check_triple_consistency(rec, k);
    let lower = lower_bound_c(k, rec.params.p, sob).ok();
    let lower_ok = lower.map(|b| rec.energy.total >= b);
    let kcheck = crate::charge::verify_k_condition(cd, &rec.u.grid());
    let decay = decay_fit(&rec.u, cd).ok();
    DiagnosticsReport {
        rho_tag: rec.rho_tag.clone(),
        p: rec.params.p,
        mu: rec.params.mu,
        lambda: rec.params.lambda,
        eps: rec.params.eps,
        k,
        converged: rec.converged,
        energy_total: rec.energy.total,
        energy_kinetic: rec.energy.kinetic,
        energy_coulomb_quarter: rec.energy.coulomb_quarter,
        energy_potential: rec.energy.potential,
        e_norm: rec.energy.e_norm,
        residual_l2: rec.residual_l2,
        nehari_residual: rec.nehari_residual,
        pohozaev_residual: rec.pohozaev_residual,
        boundary_mass_fraction: rec.boundary_mass_fraction,
        path_energy_max: rec.path_energy_max,
        triple,
        sobolev_s_hat: sob.s_hat,
        lower_bound: lower,
        lower_bound_ok: lower_ok,
        k_condition_holds: kcheck.holds,
        k_condition_margin: kcheck.worst_margin,
        decay,
    }
}

/// Recompute D(u) for a record's field with a fresh solver (used by tests).
pub fn recompute_coulomb(rec: &SolutionRecord, cd: &ChargeDensity) -> f64 {
    let solver = PoissonSolver::new(rec.u.grid());
    coulomb_energy_with(&solver, &rec.u, cd).coulomb_energy
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use approx::assert_relative_eq;

    #[test]
    fn triple_bounds_paper_values() {
        let b = triple_bounds(1.0, 0.0, 2.5).unwrap();
        assert_relative_eq!(b.delta_max, 10.5, max_relative = 1e-14);
        assert_relative_eq!(b.gamma_max, 5.0, max_relative = 1e-14);
        let z = triple_bounds(0.0, -0.1, 2.5).unwrap();
        assert_eq!(z.delta_max, 0.0);
        assert_eq!(z.gamma_max, 0.0);
        assert!(matches!(
            triple_bounds(1.0, -1.0, 2.5),
            Err(CoreError::BadTripleDenominator(_))
        ));
    }

    /// Dense 3x3 linear-algebra oracle: with the inequality row active the
    /// solution of the system attains the printed bounds.
    #[test]
    fn triple_bounds_match_active_system_solve() {
        let (c, k, p) = (1.0, 0.0, 2.5);
        // rows: [1/2, 1/4, -1/(p+1)] = c ; [1, 1, -1] = 0 ;
        //       [1/2, (5+2k)/4, -3/(p+1)] = 0
        let mut m: [[f64; 4]; 3] = [
            [0.5, 0.25, -1.0 / (p + 1.0), c],
            [1.0, 1.0, -1.0, 0.0],
            [0.5, (5.0 + 2.0 * k) / 4.0, -3.0 / (p + 1.0), 0.0],
        ];
        // Gaussian elimination
        for col in 0..3 {
            let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
            m.swap(col, piv);
            for row in 0..3 {
                if row != col {
                    let f = m[row][col] / m[col][col];
                    for j in col..4 {
                        m[row][j] -= f * m[col][j];
                    }
                }
            }
        }
        let delta = m[2][3] / m[2][2];
        let gamma = m[1][3] / m[1][1];
        let b = triple_bounds(c, k, p).unwrap();
        assert_relative_eq!(delta, b.delta_max, max_relative = 1e-12);
        assert_relative_eq!(gamma, b.gamma_max, max_relative = 1e-12);
    }

    #[test]
    fn triple_bounds_homogeneous_in_c() {
        let b1 = triple_bounds(1.3, 0.2, 2.7).unwrap();
        let b2 = triple_bounds(2.6, 0.2, 2.7).unwrap();
        assert_relative_eq!(b2.delta_max, 2.0 * b1.delta_max, max_relative = 1e-15);
        assert_relative_eq!(b2.gamma_max, 2.0 * b1.gamma_max, max_relative = 1e-15);
    }

    #[test]
    fn lower_bound_coefficients() {
        let s = SobolevEstimate {
            p: 3.0,
            s_hat: 2.0,
            method: "test".into(),
        };
        // p = 3: (p-1)/(2(p+1)) = 1/4, exponent 2
        assert_relative_eq!(lower_bound_c(0.0, 3.0, &s).unwrap(), 1.0, max_relative = 1e-14);
        // p = 2.5, k = 0: 1/10.5 times S^{7/3}
        let s25 = SobolevEstimate {
            p: 2.5,
            s_hat: 2.0,
            method: "test".into(),
        };
        assert_relative_eq!(
            lower_bound_c(0.0, 2.5, &s25).unwrap(),
            2.0f64.powf(7.0 / 3.0) / 10.5,
            max_relative = 1e-14
        );
        // homogeneity: doubling S scales by 2^{(p+1)/(p-1)}
        let s2 = SobolevEstimate {
            p: 2.5,
            s_hat: 4.0,
            method: "test".into(),
        };
        assert_relative_eq!(
            lower_bound_c(0.0, 2.5, &s2).unwrap(),
            lower_bound_c(0.0, 2.5, &s25).unwrap() * 2.0f64.powf(7.0 / 3.0),
            max_relative = 1e-14
        );
        assert!(matches!(
            lower_bound_c(-1.0, 2.5, &s25),
            Err(CoreError::InadmissibleK { .. })
        ));
    }

    #[test]
    fn lower_bound_positive_on_admissible_grid() {
        let s = SobolevEstimate {
            p: 0.0,
            s_hat: 1.0,
            method: "test".into(),
        };
        let mut p = 2.05;
        while p < 2.95 {
            let threshold = -2.0 * (p - 2.0) / (p - 1.0);
            let mut k = threshold + 1e-3;
            while k < 2.0 {
                let c = lower_bound_c(k, p, &s).unwrap();
                assert!(c > 0.0, "C({k},{p}) = {c}");
                k += 0.1;
            }
            p += 0.05;
        }
    }

    #[test]
    fn sobolev_estimate_improves_gaussian_and_is_stable() {
        let g = make_grid(32, 8.0, [0.0; 3]).unwrap();
        let est = sobolev_estimate(g, 3.0).unwrap();
        // Gaussian trial value bounds the estimate from above
        let ops = SpectralOps::new(g);
        let trial = ScalarField::from_fn(g, |x| {
            (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()
        });
        let rq = (ops.dirichlet_energy(&trial) + integrate(&trial.map(|v| v * v)))
            / integrate(&trial.map(|v| v.abs().powf(4.0))).powf(0.5);
        assert!(est.s_hat <= rq);
        assert!(est.s_hat > 0.0);
    }

    #[test]
    fn decay_fit_recovers_planted_exponents() {
        let g = make_grid(32, 8.0, [0.0; 3]).unwrap();
        let cd = ChargeDensity::constant(1.0);
        let exp_field = ScalarField::from_fn(g, |x| {
            (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()).exp()
        });
        let fit = decay_fit(&exp_field, &cd).unwrap();
        assert!((fit.gamma_fit - 1.0).abs() < 1e-3, "gamma {}", fit.gamma_fit);

        let stretched = ScalarField::from_fn(g, |x| {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            (-(1.0 + r).powf(1.5)).exp()
        });
        let fit = decay_fit(&stretched, &cd).unwrap();
        assert!((fit.alpha_fit - 1.5).abs() < 0.02, "alpha {}", fit.alpha_fit);

        // vanishing shell is an error
        let z = ScalarField::zeros(g);
        assert!(matches!(decay_fit(&z, &cd), Err(CoreError::EmptyDecayShell)));
    }

    #[test]
    fn decay_fit_randomized_recovery() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let g = make_grid(32, 8.0, [0.0; 3]).unwrap();
        let cd = ChargeDensity::constant(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let planted: f64 = rng.gen_range(0.6..2.2);
            let amp: f64 = rng.gen_range(0.5..2.0);
            let f = ScalarField::from_fn(g, |x| {
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                amp * (-(1.0 + r).powf(planted)).exp()
            });
            let fit = decay_fit(&f, &cd).unwrap();
            assert!(
                (fit.alpha_fit - planted).abs() / planted < 0.01,
                "planted {planted}, fitted {}",
                fit.alpha_fit
            );
        }
    }
}

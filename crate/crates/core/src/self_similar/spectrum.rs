//! Linear perturbations `f + e^{lambda tau} u(z)`, `tau = ln|t|`, of a
//! self-similar profile. The modes solve
//!
//! ```text
//! z^2 (z^2-1) u'' + 2z (z^2 - 1 - lambda z^2) u' + (2 cos 2f + (lambda^2 - lambda) z^2) u = 0
//! ```
//!
//! with regularity at `z = 0` (`u ~ z`) and at `z = 1` (the analytic
//! Frobenius branch). Negative `lambda` grows toward the singularity; the
//! `lambda = -1` mode is the time-translation gauge mode `u = z f'`.

use crate::error::{Error, Result};
use crate::ode::{integrate, Control, OdeOptions, Trajectory};
use crate::series::{solve_order_by_order, Series};

use super::{profile_rhs, SelfSimilarProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ModeClass {
    Gauge,
    Unstable,
    Stable,
}

#[derive(Debug, Clone)]
pub struct SpectrumOptions {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub step: f64,
    /// Halvings of `step` allowed while the root count keeps changing.
    pub max_refinements: usize,
    pub gauge_tol: f64,
    pub ode_tol: f64,
    pub match_point: f64,
    /// Stop after this many eigenvalues (ascending).
    pub count_limit: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            lambda_min: -30.0,
            lambda_max: 5.0,
            step: 0.1,
            max_refinements: 6,
            gauge_tol: 1e-4,
            ode_tol: 1e-12,
            match_point: 0.5,
            count_limit: usize::MAX,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenvalueResult {
    pub lambda: f64,
    pub classification: ModeClass,
    /// Normalized Wronskian of the two shots at the matching point.
    pub match_residual: f64,
    /// Nodes `(z; f, f', u, u')` with `u'(0) = 1`.
    mode: Trajectory<4>,
}

impl EigenvalueResult {
    /// `(u(z), u'(z))` for `z` in `[0, 1)`.
    pub fn eval(&self, z: f64) -> (f64, f64) {
        let y = self.mode.eval(z);
        (y[2], y[3])
    }

    pub fn samples(&self) -> Vec<(f64, f64, f64)> {
        self.mode.nodes().map(|(z, y)| (z, y[2], y[3])).collect()
    }

    /// Residual of the mode equation at `z`, from a difference of slopes
    /// re-integrated off the nearest node.
    pub fn residual_at(&self, z: f64) -> Result<f64> {
        let h = 1e-3 * z.min(1.0 - z);
        let lambda = self.lambda;
        let eval = |x: f64| -> Result<[f64; 4]> {
            let (z0, y0) = self.mode.nearest_node(x);
            Ok(integrate(
                |zz, y: &[f64; 4]| mode_rhs(lambda, zz, y),
                z0,
                y0,
                x,
                &OdeOptions::with_tol(1e-13),
                |_, _, _| Control::Continue,
            )?
            .y)
        };
        let mut slopes = [0.0; 4];
        for (k, off) in [-2.0, -1.0, 1.0, 2.0].iter().enumerate() {
            slopes[k] = eval(z + off * h)?[3];
        }
        let d2 = (slopes[0] - 8.0 * slopes[1] + 8.0 * slopes[2] - slopes[3]) / (12.0 * h);
        let y = eval(z)?;
        let q = z * z - 1.0;
        let res = z * z * q * d2
            + 2.0 * z * (q - lambda * z * z) * y[3]
            + (2.0 * (2.0 * y[0]).cos() + (lambda * lambda - lambda) * z * z) * y[2];
        Ok(res)
    }
}

fn mode_rhs(lambda: f64, z: f64, y: &[f64; 4]) -> [f64; 4] {
    let bg = profile_rhs(z, &[y[0], y[1]]);
    let q = z * z - 1.0;
    let u2 = -(2.0 * z * (q - lambda * z * z) * y[3]
        + (2.0 * (2.0 * y[0]).cos() + (lambda * lambda - lambda) * z * z) * y[2])
        / (z * z * q);
    [bg[0], bg[1], y[3], u2]
}

fn mode_residual(bg: &Series, lambda: f64, z: &Series, u: &Series) -> Series {
    let n = u.len();
    let one = Series::constant(1.0, n);
    let z2 = z * z;
    let q = &z2 - &one;
    let d1 = u.derivative();
    let d2 = d1.derivative();
    let (_, cos2f) = bg.scale(2.0).sin_cos();
    let t1 = &(&z2 * &q) * &d2;
    let t2 = (&(z * &(&q - &z2.scale(lambda))) * &d1).scale(2.0);
    let pot = &cos2f.scale(2.0) + &z2.scale(lambda * lambda - lambda);
    &(&t1 + &t2) + &(&pot * u)
}

fn mode_origin_series(bg: &Series, lambda: f64) -> Series {
    let n = bg.len();
    let z = Series::poly(&[0.0, 1.0], n);
    let mut c = vec![0.0; n];
    c[1] = 1.0;
    solve_order_by_order(c, 2, |j| j, |u| mode_residual(bg, lambda, &z, u))
        .expect("no resonance at the origin")
}

/// `None` at the resonances `lambda = 0, 1, 2, ...`.
fn mode_light_cone_series(bg: &Series, lambda: f64) -> Option<Series> {
    let n = bg.len();
    let z = Series::poly(&[1.0, 1.0], n);
    let mut c = vec![0.0; n];
    c[0] = 1.0;
    solve_order_by_order(c, 1, |j| j - 1, |u| mode_residual(bg, lambda, &z, u))
}

const RENORM_LIMIT: f64 = 1e100;

/// Scale the mode components down when they get large; returns the factor.
fn renormalize(y: &mut [f64; 4]) -> f64 {
    let size = y[2].abs().max(y[3].abs());
    if size > RENORM_LIMIT {
        let c = 1.0 / size;
        y[2] *= c;
        y[3] *= c;
        c
    } else {
        1.0
    }
}

struct Shot {
    y: [f64; 4],
    /// `ln` of the factor divided out by renormalization.
    log_scale: f64,
}

struct Mismatch {
    /// Wronskian over the product of the shot norms at the matching point.
    normalized: f64,
    /// `ln |W|` for the shots with their series normalization.
    log_raw: f64,
}

struct Shooter<'a> {
    profile: &'a SelfSimilarProfile,
    ode_tol: f64,
    match_point: f64,
}

/// Past `|λ| ~ 1` the two independent solutions separate like
/// `((1+z)/(1-z))^λ`, so the matching point moves in to keep both shots
/// well conditioned.
const MATCH_KAPPA: f64 = 3.0;

impl Shooter<'_> {
    fn match_at(&self, lambda: f64) -> f64 {
        self.match_point.min(MATCH_KAPPA / lambda.abs().max(1e-300))
    }

    fn left(&self, lambda: f64, record: Option<&mut Trajectory<4>>) -> Result<Shot> {
        let bg = self.profile.origin_series();
        let us = mode_origin_series(bg, lambda);
        let z0 = self.profile.z_left().min(0.05 / lambda.abs().max(1e-300));
        let (f, df) = bg.eval(z0);
        let (u, du) = us.eval(z0);
        self.run(lambda, z0, [f, df, u, du], record)
    }

    fn right(&self, lambda: f64, record: Option<&mut Trajectory<4>>) -> Result<Option<Shot>> {
        let bg = self.profile.light_cone_series();
        let Some(us) = mode_light_cone_series(bg, lambda) else {
            return Ok(None);
        };
        let s = self.profile.s_right().min(0.05 / lambda.abs().max(1e-300));
        let (f, df) = bg.eval(-s);
        let (u, du) = us.eval(-s);
        if !(u.is_finite() && du.is_finite()) {
            return Ok(None);
        }
        self.run(lambda, 1.0 - s, [f, df, u, du], record).map(Some)
    }

    fn run(
        &self,
        lambda: f64,
        z0: f64,
        y0: [f64; 4],
        record: Option<&mut Trajectory<4>>,
    ) -> Result<Shot> {
        let rhs = |z: f64, y: &[f64; 4]| mode_rhs(lambda, z, y);
        let mut log_scale = 0.0;
        let ode = OdeOptions::with_tol(self.ode_tol);
        // The mode is linear: rescaling keeps strongly growing shots finite
        // without changing the Wronskian's sign.
        let end = match record {
            Some(traj) => {
                traj.push(z0, y0, rhs(z0, &y0));
                integrate(
                    rhs,
                    z0,
                    y0,
                    self.match_at(lambda),
                    &ode.h_max(2e-3),
                    |z, y, dy| {
                        let c = renormalize(y);
                        if c != 1.0 {
                            log_scale -= c.ln();
                            traj.scale_components(&[2, 3], c);
                            traj.push(z, *y, rhs(z, y));
                            Control::Modified
                        } else {
                            traj.push(z, *y, *dy);
                            Control::Continue
                        }
                    },
                )?
            }
            None => integrate(rhs, z0, y0, self.match_at(lambda), &ode, |_, y, _| {
                let c = renormalize(y);
                if c != 1.0 {
                    log_scale -= c.ln();
                    Control::Modified
                } else {
                    Control::Continue
                }
            })?,
        };
        Ok(Shot {
            y: end.y,
            log_scale,
        })
    }

    /// Wronskian of the two shots; `None` at a resonance.
    fn mismatch(&self, lambda: f64) -> Result<Option<Mismatch>> {
        let l = self.left(lambda, None)?;
        let Some(r) = self.right(lambda, None)? else {
            return Ok(None);
        };
        let (l_y, r_y) = (l.y, r.y);
        let w = l_y[2] * r_y[3] - l_y[3] * r_y[2];
        let nl = l_y[2].hypot(l_y[3]);
        let nr = r_y[2].hypot(r_y[3]);
        Ok(Some(Mismatch {
            normalized: w / (nl * nr),
            log_raw: w.abs().ln() + l.log_scale + r.log_scale,
        }))
    }
}

/// Scan abscissae: spacing `step` for |λ| ≤ 10, growing in proportion to |λ|
/// beyond that (the mismatch varies on the scale of |λ| there).
fn scan_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let mut grid = vec![lo];
    let mut x = lo;
    while x < hi {
        let h = step * (x.abs() / 10.0).max(1.0);
        let h_next = step * ((x + h).abs() / 10.0).max(1.0);
        x += h.min(h_next);
        grid.push(x.min(hi));
    }
    grid
}

fn find_roots(shooter: &Shooter, lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    let grid = scan_grid(lo, hi, step);
    let n = grid.len() - 1;
    let values: Vec<Option<Mismatch>> = grid
        .iter()
        .map(|&l| shooter.mismatch(l))
        .collect::<Result<_>>()?;
    let mut roots = Vec::new();
    for i in 0..n {
        let (Some(ma), Some(mb)) = (&values[i], &values[i + 1]) else {
            continue;
        };
        let (da, db) = (ma.normalized, mb.normalized);
        if da == 0.0 {
            roots.push(grid[i]);
            continue;
        }
        if da * db > 0.0 {
            continue;
        }
        let (mut a, mut b, mut fa) = (grid[i], grid[i + 1], da);
        let mut ok = true;
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if b - a < 1e-13 * (1.0 + m.abs()) {
                break;
            }
            let Some(fm) = shooter.mismatch(m)? else {
                ok = false;
                break;
            };
            if fm.normalized * fa > 0.0 {
                a = m;
                fa = fm.normalized;
            } else {
                b = m;
            }
        }
        let root = 0.5 * (a + b);
        // Through a pole (resonance) the unnormalized Wronskian blows up
        // instead of vanishing.
        let Some(at_root) = shooter.mismatch(root)? else {
            continue;
        };
        let dip = ma.log_raw.min(mb.log_raw) - at_root.log_raw;
        if ok && (at_root.normalized.abs() < 1e-6 || dip > 4.0 * std::f64::consts::LN_10) {
            roots.push(root);
        }
    }
    Ok(roots)
}

/// Normalized matching Wronskian at `lambda`; zero at eigenvalues, `None`
/// where the light-cone series resonates.
pub fn lambda_mismatch(
    profile: &SelfSimilarProfile,
    lambda: f64,
    opts: &SpectrumOptions,
) -> Result<Option<f64>> {
    Shooter {
        profile,
        ode_tol: opts.ode_tol,
        match_point: opts.match_point,
    }
    .mismatch(lambda)
    .map(|m| m.map(|m| m.normalized))
}

/// All real eigenvalues in `[lambda_min, lambda_max]`, ascending.
pub fn lambda_spectrum(
    profile: &SelfSimilarProfile,
    opts: &SpectrumOptions,
) -> Result<Vec<EigenvalueResult>> {
    let shooter = Shooter {
        profile,
        ode_tol: opts.ode_tol,
        match_point: opts.match_point,
    };
    let mut step = opts.step;
    let mut roots = find_roots(&shooter, opts.lambda_min, opts.lambda_max, step)?;
    let mut refinements = 0;
    loop {
        let finer = find_roots(&shooter, opts.lambda_min, opts.lambda_max, step * 0.5)?;
        if finer.len() == roots.len() {
            break;
        }
        roots = finer;
        step *= 0.5;
        refinements += 1;
        if refinements >= opts.max_refinements {
            return Err(Error::ScanUnresolved { step });
        }
    }
    for &r in &roots {
        if (r - opts.lambda_min).abs() < 1e-9 || (r - opts.lambda_max).abs() < 1e-9 {
            return Err(Error::RootAtRangeBoundary { value: r });
        }
    }

    let mut out = Vec::new();
    for lambda in roots.into_iter().take(opts.count_limit) {
        let mut left = Trajectory::new();
        let mut right = Trajectory::new();
        let l = shooter.left(lambda, Some(&mut left))?.y;
        let r = shooter
            .right(lambda, Some(&mut right))?
            .expect("root is not a resonance")
            .y;
        // Scale the light-cone shot onto the origin shot (u'(0) = 1).
        let scale = if r[2].abs() > r[3].abs() {
            l[2] / r[2]
        } else {
            l[3] / r[3]
        };
        right.scale_components(&[2, 3], scale);
        let mut mode = left;
        mode.extend(&right);
        let w = (l[2] * r[3] - l[3] * r[2]) / (l[2].hypot(l[3]) * r[2].hypot(r[3]));
        let classification = if (lambda + 1.0).abs() < opts.gauge_tol {
            ModeClass::Gauge
        } else if lambda < 0.0 {
            ModeClass::Unstable
        } else {
            ModeClass::Stable
        };
        out.push(EigenvalueResult {
            lambda,
            classification,
            match_residual: w.abs(),
            mode,
        });
    }
    Ok(out)
}

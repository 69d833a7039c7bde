//! Static solutions `(r^2 chi')' = sin 2chi` regular at the origin, and
//! their linear perturbation spectrum.
//!
//! Near the origin `chi = a r - (2a^3/15) r^3 + ...`, so the family is
//! labelled by `a = chi'(0)` and `chi_a(r) = chi_1(a r)`. For large `r` the
//! profile oscillates about `pi/2` with amplitude decaying like `r^(-1/2)`.
//!
//! Perturbations `chi_s + e^{-i w t} u(r)` satisfy
//! `u'' = 2u cos(2chi_s)/r^2 - w^2 u - 2u'/r`. The far-field potential is
//! `-2/r^2`, strong enough to bind infinitely many modes with `w^2 < 0`
//! accumulating at zero (consecutive ratios near 115). Only the ones with
//! `|w| R_ode` well above one are resolved by a finite outer radius, so each
//! root carries a flag saying whether it survives doubling `R_ode`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::{integrate, Control, OdeOptions, Trajectory};
use crate::series::{solve_order_by_order, Series};

#[derive(Debug, Clone)]
pub struct StaticOptions {
    /// Series start, in units of `1/|a|`.
    pub r_ser: f64,
    pub series_len: usize,
    pub ode_tol: f64,
}

impl Default for StaticOptions {
    fn default() -> Self {
        Self {
            r_ser: 1e-2,
            series_len: 12,
            ode_tol: 1e-12,
        }
    }
}

pub const DEFAULT_R_ODE: f64 = 1e3;

fn static_rhs(r: f64, y: &[f64; 2]) -> [f64; 2] {
    [y[1], (2.0 * y[0]).sin() / (r * r) - 2.0 * y[1] / r]
}

/// `r^2 f'' + 2 r f' - sin 2f` as a series in `r`.
fn static_residual(f: &Series) -> Series {
    let n = f.len();
    let r = Series::poly(&[0.0, 1.0], n);
    let r2 = &r * &r;
    let d1 = f.derivative();
    let d2 = d1.derivative();
    let (s, _) = f.scale(2.0).sin_cos();
    &(&(&r2 * &d2) + &(&r * &d1).scale(2.0)) - &s
}

fn static_series(a: f64, len: usize) -> Series {
    let mut c = vec![0.0; len];
    c[1] = a;
    // Even coefficients vanish; the order-j residual fixes c_j for j >= 2
    // (coefficient (j-1)(j+2) is nonzero).
    solve_order_by_order(c, 2, |j| j, static_residual).expect("static series has no resonance")
}

#[derive(Debug, Clone)]
pub struct StaticProfile {
    /// `chi'(0)`.
    pub a: f64,
    pub r_ode: f64,
    pub residual_norm: f64,
    series: Series,
    r_left: f64,
    traj: Trajectory<2>,
    ode_tol: f64,
}

impl StaticProfile {
    /// `(chi, chi')` at `r`; clamped to the last node beyond `r_ode`.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let r = r.abs();
        if r <= self.r_left || self.a == 0.0 {
            return self.series.eval(r);
        }
        let y = self.traj.eval(r);
        (y[0], y[1])
    }

    pub fn chi(&self, r: f64) -> f64 {
        self.eval(r).0
    }

    /// Re-integrate from the nearest node, independent of the interpolant.
    pub fn eval_precise(&self, r: f64) -> Result<(f64, f64)> {
        if r <= self.r_left || self.a == 0.0 {
            return Ok(self.series.eval(r));
        }
        let (r0, y0) = self.traj.nearest_node(r);
        let end = integrate(
            static_rhs,
            r0,
            y0,
            r,
            &OdeOptions::with_tol(self.ode_tol * 0.1),
            |_, _, _| Control::Continue,
        )?;
        Ok((end.y[0], end.y[1]))
    }

    /// `(r^2 chi')' - sin 2chi` at `r`, differentiating re-integrated
    /// values of `r^2 chi'` with a fourth-order stencil.
    pub fn residual_at(&self, r: f64) -> Result<f64> {
        let h = 1e-3 * r;
        let flux = |x: f64| -> Result<f64> { Ok(x * x * self.eval_precise(x)?.1) };
        let d = (flux(r - 2.0 * h)? - 8.0 * flux(r - h)? + 8.0 * flux(r + h)? - flux(r + 2.0 * h)?)
            / (12.0 * h);
        Ok(d - (2.0 * self.eval_precise(r)?.0).sin())
    }

    /// `(r, chi, chi')` at the stored integration nodes.
    pub fn samples(&self) -> Vec<(f64, f64, f64)> {
        self.traj.nodes().map(|(r, y)| (r, y[0], y[1])).collect()
    }

    /// Static energy density `(r^2/2) chi'^2 + sin^2 chi`.
    pub fn energy_density(&self, r: f64) -> f64 {
        let (f, d) = self.eval(r);
        0.5 * r * r * d * d + f.sin().powi(2)
    }
}

/// Integrate the static profile with `chi'(0) = a` out to `r_ode`.
pub fn solve_static(a: f64, r_ode: f64, opts: &StaticOptions) -> Result<StaticProfile> {
    if !(r_ode > 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "static solution needs finite a and r_ode > 0 (a = {a}, r_ode = {r_ode})"
        )));
    }
    let series = static_series(a, opts.series_len);
    let mut traj = Trajectory::new();
    if a == 0.0 {
        traj.push(0.0, [0.0, 0.0], [0.0, 0.0]);
        traj.push(r_ode, [0.0, 0.0], [0.0, 0.0]);
        return Ok(StaticProfile {
            a,
            r_ode,
            residual_norm: 0.0,
            series,
            r_left: r_ode,
            traj,
            ode_tol: opts.ode_tol,
        });
    }
    let scale = 1.0 / a.abs();
    let r_left = (opts.r_ser * scale).min(0.5 * r_ode);
    let (f0, d0) = series.eval(r_left);
    let mut y = [f0, d0];
    traj.push(r_left, y, static_rhs(r_left, &y));

    // Segments with step caps proportional to the local length scale keep
    // the Hermite interpolant uniformly accurate along the slow tail.
    let mut r = r_left;
    let mut seg_end = scale;
    while r < r_ode {
        let target = seg_end.min(r_ode);
        let hmax = 0.01 * r.max(r_left * 10.0).min(scale.max(r));
        let end = integrate(
            static_rhs,
            r,
            y,
            target,
            &OdeOptions::with_tol(opts.ode_tol).h_max(hmax),
            |rr, yy, dy| {
                traj.push(rr, *yy, *dy);
                if yy[0].abs() > 1e6 {
                    Control::Stop
                } else {
                    Control::Continue
                }
            },
        )
        .map_err(|e| match e {
            crate::ode::OdeError::NonFinite { t } => Error::StaticBlowUp { r: t },
            other => other.into(),
        })?;
        if !end.completed {
            return Err(Error::StaticBlowUp { r: end.t });
        }
        r = target;
        y = end.y;
        seg_end = (seg_end * 2.0).max(target);
    }
    traj.finish();

    let mut profile = StaticProfile {
        a,
        r_ode,
        residual_norm: f64::NAN,
        series,
        r_left,
        traj,
        ode_tol: opts.ode_tol,
    };
    profile.residual_norm = static_residual_norm(&profile)?;
    Ok(profile)
}

/// Sup of the residual at log-spaced check points inside `(r_left, r_ode)`.
fn static_residual_norm(profile: &StaticProfile) -> Result<f64> {
    let lo = (profile.r_left * 1.1).ln();
    let hi = (profile.r_ode * 0.95).ln();
    let k = 40;
    let mut worst: f64 = 0.0;
    for i in 0..=k {
        let r = (lo + (hi - lo) * i as f64 / k as f64).exp();
        worst = worst.max(profile.residual_at(r)?.abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct OmegaOptions {
    /// Search range for `w^2`; both ends must be negative or the upper end
    /// zero, which is replaced by `-abs_floor`.
    pub omega_sq_min: f64,
    pub omega_sq_max: f64,
    /// Smallest `|w^2|` scanned.
    pub abs_floor: f64,
    pub points_per_decade: usize,
    /// Matching radius in units of `1/|a|`.
    pub match_radius: f64,
    pub ode_tol: f64,
    /// Relative change allowed when `R_ode` doubles.
    pub stability_tol: f64,
}

impl Default for OmegaOptions {
    fn default() -> Self {
        Self {
            omega_sq_min: -10.0,
            omega_sq_max: 0.0,
            abs_floor: 1e-8,
            points_per_decade: 40,
            match_radius: 1.0,
            ode_tol: 1e-11,
            stability_tol: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StaticMode {
    pub omega_sq: f64,
    /// Root found again with the outer radius doubled, if any nearby.
    pub omega_sq_doubled: Option<f64>,
    /// Whether the doubled-radius root agrees within the stability tolerance.
    pub stable: bool,
    /// `(chi_s, chi_s', u, u')` with `u'(0) = 1`.
    mode: Trajectory<4>,
    series: Series,
    r_left: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StaticModeSummary {
    pub omega_sq: f64,
    pub omega_sq_doubled: Option<f64>,
    pub stable: bool,
}

impl StaticMode {
    /// `(u, u')` at `r`.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        if r <= self.r_left {
            return self.series.eval(r);
        }
        let y = self.mode.eval(r);
        (y[2], y[3])
    }

    pub fn samples(&self) -> Vec<(f64, f64, f64)> {
        self.mode.nodes().map(|(r, y)| (r, y[2], y[3])).collect()
    }

    /// Residual of the mode equation at `r` using the stored state.
    pub fn residual_at(&self, r: f64) -> f64 {
        let h = 1e-3 * r;
        let d = |x: f64| self.mode.eval(x)[3];
        let d2 = (d(r - 2.0 * h) - 8.0 * d(r - h) + 8.0 * d(r + h) - d(r + 2.0 * h)) / (12.0 * h);
        let y = self.mode.eval(r);
        d2 - (2.0 * y[2] * (2.0 * y[0]).cos() / (r * r) - self.omega_sq * y[2] - 2.0 * y[3] / r)
    }

    pub fn summary(&self) -> StaticModeSummary {
        StaticModeSummary {
            omega_sq: self.omega_sq,
            omega_sq_doubled: self.omega_sq_doubled,
            stable: self.stable,
        }
    }
}

fn omega_rhs(omega_sq: f64, r: f64, y: &[f64; 4]) -> [f64; 4] {
    let [f, df, u, du] = *y;
    [
        df,
        (2.0 * f).sin() / (r * r) - 2.0 * df / r,
        du,
        2.0 * u * (2.0 * f).cos() / (r * r) - omega_sq * u - 2.0 * du / r,
    ]
}

/// `u = r - (4a^2 + w^2) r^3 / 10 + ...`
fn omega_origin_series(a: f64, omega_sq: f64) -> Series {
    Series::poly(&[0.0, 1.0, 0.0, -(4.0 * a * a + omega_sq) / 10.0], 4)
}

const RENORM_LIMIT: f64 = 1e100;

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

struct OmegaShooter<'a> {
    profile: &'a StaticProfile,
    r_match: f64,
    r_left: f64,
    ode_tol: f64,
}

impl OmegaShooter<'_> {
    fn new<'a>(profile: &'a StaticProfile, opts: &OmegaOptions) -> OmegaShooter<'a> {
        let scale = 1.0 / profile.a.abs();
        OmegaShooter {
            profile,
            r_match: (opts.match_radius * scale).min(0.5 * profile.r_ode),
            r_left: 1e-3 * scale,
            ode_tol: opts.ode_tol,
        }
    }

    fn run(
        &self,
        omega_sq: f64,
        r0: f64,
        y0: [f64; 4],
        record: Option<&mut Trajectory<4>>,
    ) -> Result<[f64; 4]> {
        let rhs = |r: f64, y: &[f64; 4]| omega_rhs(omega_sq, r, y);
        let ode = OdeOptions::with_tol(self.ode_tol);
        let end = match record {
            Some(traj) => {
                traj.push(r0, y0, rhs(r0, &y0));
                let hmax = 0.05 * self.r_match;
                integrate(rhs, r0, y0, self.r_match, &ode.h_max(hmax), |r, y, dy| {
                    let c = renormalize(y);
                    if c != 1.0 {
                        traj.scale_components(&[2, 3], c);
                        traj.push(r, *y, rhs(r, y));
                        Control::Modified
                    } else {
                        traj.push(r, *y, *dy);
                        Control::Continue
                    }
                })?
            }
            None => integrate(rhs, r0, y0, self.r_match, &ode, |_, y, _| {
                if renormalize(y) != 1.0 {
                    Control::Modified
                } else {
                    Control::Continue
                }
            })?,
        };
        Ok(end.y)
    }

    fn left(&self, omega_sq: f64, record: Option<&mut Trajectory<4>>) -> Result<[f64; 4]> {
        let r0 = self.r_left;
        let (f, df) = self.profile.series.eval(r0);
        let (u, du) = omega_origin_series(self.profile.a, omega_sq).eval(r0);
        self.run(omega_sq, r0, [f, df, u, du], record)
    }

    /// Inward shot from `r_ode` with `u' = 0` there.
    fn right(&self, omega_sq: f64, record: Option<&mut Trajectory<4>>) -> Result<[f64; 4]> {
        let r0 = self.profile.r_ode;
        let (f, df) = self.profile.eval(r0);
        self.run(omega_sq, r0, [f, df, 1.0, 0.0], record)
    }

    fn mismatch(&self, omega_sq: f64) -> Result<f64> {
        let l = self.left(omega_sq, None)?;
        let r = self.right(omega_sq, None)?;
        Ok((l[2] * r[3] - l[3] * r[2]) / (l[2].hypot(l[3]) * r[2].hypot(r[3])))
    }

    fn roots(&self, grid: &[f64]) -> Result<Vec<f64>> {
        let values: Vec<f64> = grid
            .iter()
            .map(|&w| self.mismatch(w))
            .collect::<Result<_>>()?;
        let mut roots = Vec::new();
        for i in 0..grid.len() - 1 {
            let (mut a, mut b) = (grid[i], grid[i + 1]);
            let (mut fa, fb) = (values[i], values[i + 1]);
            if fa == 0.0 {
                roots.push(a);
                continue;
            }
            if fa * fb > 0.0 || fb == 0.0 {
                continue;
            }
            while (b - a).abs() > 1e-13 * a.abs().max(b.abs()) {
                let m = 0.5 * (a + b);
                if m == a || m == b {
                    break;
                }
                let fm = self.mismatch(m)?;
                if fm * fa > 0.0 {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
        Ok(roots)
    }

    fn mode(&self, omega_sq: f64) -> Result<StaticMode> {
        let mut left = Trajectory::new();
        let mut right = Trajectory::new();
        let l = self.left(omega_sq, Some(&mut left))?;
        let r = self.right(omega_sq, Some(&mut right))?;
        let scale = if r[2].abs() > r[3].abs() {
            l[2] / r[2]
        } else {
            l[3] / r[3]
        };
        right.scale_components(&[2, 3], scale);
        left.extend(&right);
        Ok(StaticMode {
            omega_sq,
            omega_sq_doubled: None,
            stable: false,
            mode: left,
            series: omega_origin_series(self.profile.a, omega_sq),
            r_left: self.r_left,
        })
    }
}

fn omega_grid(opts: &OmegaOptions) -> Result<Vec<f64>> {
    let lo = opts.omega_sq_min;
    let hi = if opts.omega_sq_max == 0.0 {
        -opts.abs_floor
    } else {
        opts.omega_sq_max
    };
    if !(lo < hi && hi < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "omega^2 range must lie in negative values: [{lo}, {})",
            opts.omega_sq_max
        )));
    }
    let (la, lb) = ((-lo).ln(), (-hi).ln());
    let decades = (la - lb) / std::f64::consts::LN_10;
    let n = ((decades * opts.points_per_decade as f64).ceil() as usize).max(2);
    Ok((0..=n)
        .map(|i| -(la + (lb - la) * i as f64 / n as f64).exp())
        .collect())
}

/// Roots of the static perturbation problem with `w^2` in the requested
/// range, ascending. Each is rechecked with the outer radius doubled.
pub fn omega_spectrum(profile: &StaticProfile, opts: &OmegaOptions) -> Result<Vec<StaticMode>> {
    if profile.a == 0.0 {
        return Err(Error::InvalidParameter(
            "the trivial static solution has no bound modes".into(),
        ));
    }
    let grid = omega_grid(opts)?;
    let shooter = OmegaShooter::new(profile, opts);
    let roots = shooter.roots(&grid)?;
    let (first, last) = (grid[0], grid[grid.len() - 1]);
    for &w in &roots {
        if w == first || w == last {
            return Err(Error::RootAtRangeBoundary { value: w });
        }
    }

    let doubled = solve_static(
        profile.a,
        2.0 * profile.r_ode,
        &StaticOptions {
            ode_tol: profile.ode_tol,
            ..StaticOptions::default()
        },
    )?;
    let shooter2 = OmegaShooter::new(&doubled, opts);
    let roots2 = shooter2.roots(&grid)?;

    let mut out = Vec::new();
    for w in roots {
        let mut mode = shooter.mode(w)?;
        let near = roots2
            .iter()
            .copied()
            .min_by(|x, y| (x - w).abs().total_cmp(&(y - w).abs()));
        if let Some(w2) = near {
            mode.omega_sq_doubled = Some(w2);
            mode.stable = ((w2 - w) / w).abs() < opts.stability_tol;
        }
        out.push(mode);
    }
    Ok(out)
}

/// Evolve the static solution `a` perturbed by `+pulse` and `-pulse`.
pub fn nonlinear_sign_test(
    a: f64,
    pulse: &crate::criticality::Pulse,
    settings: &crate::criticality::RunSettings,
) -> Result<crate::criticality::SignTest> {
    crate::criticality::attractor_sign_test(
        crate::criticality::SignBase::Static { a },
        pulse,
        settings,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_matches_cubic_coefficient() {
        let a = 1.7;
        let s = static_series(a, 8);
        assert!((s.coeff(1) - a).abs() < 1e-15);
        assert!((s.coeff(3) + 2.0 * a.powi(3) / 15.0).abs() < 1e-13);
        assert!(s.coeff(2).abs() < 1e-15 && s.coeff(4).abs() < 1e-15);
    }

    #[test]
    fn zero_slope_gives_trivial_solution() {
        let p = solve_static(0.0, 100.0, &StaticOptions::default()).unwrap();
        for r in [0.0, 1.0, 50.0, 100.0] {
            assert_eq!(p.chi(r), 0.0);
        }
    }

    #[test]
    fn residual_small_at_check_points() {
        let p = solve_static(1.0, DEFAULT_R_ODE, &StaticOptions::default()).unwrap();
        for r in [0.5, 5.0, 50.0] {
            let res = p.residual_at(r).unwrap();
            assert!(res.abs() < 1e-8, "r = {r}: {res:e}");
        }
        assert!(p.residual_norm < 1e-8, "{:e}", p.residual_norm);
    }

    #[test]
    fn tail_oscillates_about_half_pi() {
        let p = solve_static(1.0, DEFAULT_R_ODE, &StaticOptions::default()).unwrap();
        let dev = |r: f64| (p.chi(r) - std::f64::consts::FRAC_PI_2).abs();
        assert!(dev(900.0).max(dev(700.0)) < 0.1);
        let crossings = p
            .samples()
            .windows(2)
            .filter(|w| {
                (w[0].1 - std::f64::consts::FRAC_PI_2) * (w[1].1 - std::f64::consts::FRAC_PI_2)
                    < 0.0
            })
            .count();
        assert!(crossings >= 3, "{crossings}");
    }

    #[test]
    fn odd_in_slope() {
        let o = StaticOptions::default();
        let p = solve_static(0.7, 50.0, &o).unwrap();
        let m = solve_static(-0.7, 50.0, &o).unwrap();
        for r in [0.3, 3.0, 30.0] {
            assert!((p.chi(r) + m.chi(r)).abs() < 1e-12);
        }
    }

    #[test]
    fn slope_is_a_radial_rescaling() {
        let o = StaticOptions::default();
        let base = solve_static(1.0, DEFAULT_R_ODE, &o).unwrap();
        let small = solve_static(0.12, DEFAULT_R_ODE, &o).unwrap();
        let worst = (0..=400)
            .map(|k| 10f64.powf(-2.0 + 5.0 * k as f64 / 400.0))
            .map(|r| (small.chi(r) - base.chi(0.12 * r)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst:e}");
    }
}

//! Regular self-similar solutions `chi(r, t) = f(z)`, `z = -r/t`, of the
//! equivariant wave map equation (m = 1):
//!
//! ```text
//! z^2 (z^2 - 1) f'' + 2 z (z^2 - 1) f' + sin(2 f) = 0
//! ```
//!
//! Both `z = 0` and the past light cone `z = 1` are regular singular points.
//! Regular solutions start as `f = b z + O(z^3)` and end as
//! `f = pi/2 + c (z - 1) + O((z - 1)^2)`. A member of the countable family is
//! fixed by matching the two one-parameter shots at an interior point. The
//! branch index `n` is the number of crossings of `pi/2` on `(0, 1)`; `n = 0`
//! is the closed form `2 arctan z`.

mod spectrum;

pub use spectrum::{
    lambda_mismatch, lambda_spectrum, EigenvalueResult, ModeClass, SpectrumOptions,
};

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::ode::{integrate, Control, OdeOptions, Trajectory};
use crate::series::{solve_order_by_order, Series};

/// The `n = 0` member in closed form.
pub fn ts_closed_form(z: f64) -> f64 {
    2.0 * z.atan()
}

#[derive(Debug, Clone)]
pub struct ShootingOptions {
    /// Radius of the series starts at both singular points.
    pub z_ser: f64,
    pub match_point: f64,
    pub ode_tol: f64,
    pub res_tol: f64,
    pub series_len: usize,
    /// Outer end of the integrated extension past the light cone.
    pub z_ext: f64,
    pub b_min: f64,
    pub b_max: f64,
    /// Ratio between consecutive slopes in the bracketing scan.
    pub b_ratio: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            z_ser: 1e-3,
            match_point: 0.5,
            ode_tol: 1e-12,
            res_tol: 1e-8,
            series_len: 12,
            z_ext: 1e4,
            b_min: 0.5,
            b_max: 1e12,
            b_ratio: 1.06,
        }
    }
}

/// Right-hand side of the profile equation as a first-order system.
pub(crate) fn profile_rhs(z: f64, y: &[f64; 2]) -> [f64; 2] {
    let q = z * z - 1.0;
    [
        y[1],
        -(2.0 * z * q * y[1] + (2.0 * y[0]).sin()) / (z * z * q),
    ]
}

/// Residual of the profile equation as a power series in `z`.
fn origin_residual(f: &Series) -> Series {
    let n = f.len();
    let z = Series::poly(&[0.0, 1.0], n);
    let z2 = Series::poly(&[0.0, 0.0, 1.0], n);
    let q = Series::poly(&[-1.0, 0.0, 1.0], n);
    let d1 = f.derivative();
    let d2 = d1.derivative();
    let (s, _) = f.scale(2.0).sin_cos();
    let t1 = &(&z2 * &q) * &d2;
    let t2 = (&(&z * &q) * &d1).scale(2.0);
    &(&t1 + &t2) + &s
}

/// Residual of the profile equation as a power series in `s = z - 1`.
fn light_cone_residual(f: &Series) -> Series {
    let n = f.len();
    let z = Series::poly(&[1.0, 1.0], n);
    let z2 = Series::poly(&[1.0, 2.0, 1.0], n);
    let q = Series::poly(&[0.0, 2.0, 1.0], n);
    let d1 = f.derivative();
    let d2 = d1.derivative();
    let (s, _) = f.scale(2.0).sin_cos();
    let t1 = &(&z2 * &q) * &d2;
    let t2 = (&(&z * &q) * &d1).scale(2.0);
    &(&t1 + &t2) + &s
}

/// Regular series at `z = 0` with slope `b`.
pub(crate) fn origin_series(b: f64, len: usize) -> Series {
    let mut c = vec![0.0; len];
    c[1] = b;
    solve_order_by_order(c, 2, |j| j, origin_residual).expect("no resonance at the origin")
}

/// Regular series at `z = 1` in powers of `z - 1` with slope `c`.
pub(crate) fn light_cone_series(c: f64, len: usize) -> Series {
    let mut a = vec![0.0; len];
    a[0] = FRAC_PI_2;
    a[1] = c;
    solve_order_by_order(a, 2, |j| j - 1, light_cone_residual)
        .expect("no resonance on the light cone")
}

fn left_start(b: f64, opts: &ShootingOptions) -> f64 {
    opts.z_ser * (2.0 / b.abs().max(1e-300)).min(1.0)
}

/// A member of the self-similar family.
#[derive(Debug, Clone)]
pub struct SelfSimilarProfile {
    pub n: usize,
    /// `f'(0)`.
    pub b: f64,
    /// `f'(1)`.
    pub c: f64,
    pub residual_norm: f64,
    /// Mismatch of the two shots at the matching point.
    pub match_mismatch: f64,
    pub match_point: f64,
    origin: Series,
    light_cone: Series,
    z_left: f64,
    s_right: f64,
    /// Samples of `(f, f')` on `[z_left, 1 - s_right]`.
    interior: Trajectory<2>,
    /// Samples of `(f, f')` on `[1 + s_right, z_ext]`.
    exterior: Trajectory<2>,
    ode_tol: f64,
}

impl SelfSimilarProfile {
    /// `(f(z), f'(z))` for any `z >= 0`.
    ///
    /// Past the integrated extension the profile follows its asymptotic form
    /// `f_inf - C/z`, matched in value and slope.
    pub fn eval(&self, z: f64) -> (f64, f64) {
        let z = z.abs();
        if z <= self.z_left {
            return self.origin.eval(z);
        }
        if (z - 1.0).abs() <= self.s_right {
            return self.light_cone.eval(z - 1.0);
        }
        if z < 1.0 {
            let y = self.interior.eval(z);
            return (y[0], y[1]);
        }
        let z_end = self.exterior.t_max();
        if z <= z_end {
            let y = self.exterior.eval(z);
            return (y[0], y[1]);
        }
        let y = self.exterior.eval(z_end);
        let k = y[1] * z_end * z_end;
        (y[0] + k * (1.0 / z_end - 1.0 / z), k / (z * z))
    }

    /// Profile value only.
    pub fn chi(&self, z: f64) -> f64 {
        self.eval(z).0
    }

    /// Asymptotic value `f(z -> infinity)`.
    pub fn chi_infinity(&self) -> f64 {
        let z_end = self.exterior.t_max();
        let y = self.exterior.eval(z_end);
        y[0] + y[1] * z_end
    }

    /// Re-integrates from the nearest stored node, for derivative checks
    /// independent of the interpolant.
    pub fn eval_precise(&self, z: f64) -> Result<(f64, f64)> {
        if z <= self.z_left || (z - 1.0).abs() <= self.s_right {
            return Ok(self.eval(z));
        }
        let traj = if z < 1.0 {
            &self.interior
        } else {
            &self.exterior
        };
        let (z0, y0) = traj.nearest_node(z);
        let end = integrate(
            profile_rhs,
            z0,
            y0,
            z,
            &OdeOptions::with_tol(self.ode_tol * 0.1),
            |_, _, _| Control::Continue,
        )?;
        Ok((end.y[0], end.y[1]))
    }

    /// Residual of the profile equation at `z`, with `f''` from a
    /// fourth-order difference of re-integrated slopes.
    pub fn residual_at(&self, z: f64) -> Result<f64> {
        let scale = z.min((1.0 - z).abs()).min(1.0 / self.b.abs().max(1.0));
        let h = 1e-3 * scale;
        let mut slopes = [0.0; 4];
        for (k, off) in [-2.0, -1.0, 1.0, 2.0].iter().enumerate() {
            slopes[k] = self.eval_precise(z + off * h)?.1;
        }
        let d2 = (slopes[0] - 8.0 * slopes[1] + 8.0 * slopes[2] - slopes[3]) / (12.0 * h);
        let (f, d1) = self.eval_precise(z)?;
        let q = z * z - 1.0;
        Ok(z * z * q * d2 + 2.0 * z * q * d1 + (2.0 * f).sin())
    }

    /// Interior samples as `(z, f, f')`, ascending.
    pub fn samples(&self) -> Vec<(f64, f64, f64)> {
        self.interior
            .nodes()
            .map(|(z, y)| (z, y[0], y[1]))
            .collect()
    }

    pub fn origin_series(&self) -> &Series {
        &self.origin
    }

    pub fn light_cone_series(&self) -> &Series {
        &self.light_cone
    }

    pub(crate) fn z_left(&self) -> f64 {
        self.z_left
    }

    pub(crate) fn s_right(&self) -> f64 {
        self.s_right
    }

    /// Number of crossings of `pi/2` strictly inside `(0, 1)`.
    pub fn count_crossings(&self) -> Result<usize> {
        count_crossings(&self.samples())
    }
}

/// Count sign changes of `f - pi/2` in ascending `(z, f, f')` samples on
/// `(0, 1)`. A sign change where the slope also vanishes is a tangency and
/// is reported as ambiguous.
pub fn count_crossings(samples: &[(f64, f64, f64)]) -> Result<usize> {
    const TANGENT_TOL: f64 = 1e-8;
    let inside: Vec<_> = samples
        .iter()
        .filter(|(z, _, _)| *z > 0.0 && *z < 1.0)
        .collect();
    let mut count = 0;
    let mut prev: Option<(f64, f64, f64)> = None;
    for &&(z, f, d) in &inside {
        let g = f - FRAC_PI_2;
        if g == 0.0 {
            if d.abs() < TANGENT_TOL {
                return Err(Error::AmbiguousCrossing { z });
            }
            continue;
        }
        if let Some((_, pg, pd)) = prev {
            if pg * g < 0.0 {
                if d.abs() < TANGENT_TOL && pd.abs() < TANGENT_TOL {
                    return Err(Error::AmbiguousCrossing { z });
                }
                count += 1;
            }
        }
        prev = Some((z, g, d));
    }
    Ok(count)
}

/// Shoot from the origin with slope `b` to `z_end`; optionally record nodes.
fn shoot_left(
    b: f64,
    z_end: f64,
    opts: &ShootingOptions,
    record: Option<&mut Trajectory<2>>,
) -> Result<[f64; 2]> {
    let series = origin_series(b, opts.series_len);
    let z0 = left_start(b, opts);
    let (f0, d0) = series.eval(z0);
    let y0 = [f0, d0];
    let ode = OdeOptions::with_tol(opts.ode_tol);
    match record {
        Some(traj) => {
            traj.push(z0, y0, profile_rhs(z0, &y0));
            let end = integrate(profile_rhs, z0, y0, z_end, &ode.h_max(2e-3), |z, y, dy| {
                traj.push(z, *y, *dy);
                Control::Continue
            })?;
            Ok(end.y)
        }
        None => Ok(integrate(profile_rhs, z0, y0, z_end, &ode, |_, _, _| {
            Control::Continue
        })?
        .y),
    }
}

/// Shoot from the light cone with slope `c` back to `z_end < 1`.
fn shoot_right(
    c: f64,
    z_end: f64,
    opts: &ShootingOptions,
    record: Option<&mut Trajectory<2>>,
) -> Result<[f64; 2]> {
    let series = light_cone_series(c, opts.series_len);
    let z0 = 1.0 - opts.z_ser;
    let (f0, d0) = series.eval(-opts.z_ser);
    let y0 = [f0, d0];
    let ode = OdeOptions::with_tol(opts.ode_tol);
    match record {
        Some(traj) => {
            traj.push(z0, y0, profile_rhs(z0, &y0));
            let end = integrate(profile_rhs, z0, y0, z_end, &ode.h_max(2e-3), |z, y, dy| {
                traj.push(z, *y, *dy);
                Control::Continue
            })?;
            Ok(end.y)
        }
        None => Ok(integrate(profile_rhs, z0, y0, z_end, &ode, |_, _, _| {
            Control::Continue
        })?
        .y),
    }
}

/// One-sided shooting function: `f(1^-) - pi/2` estimated just inside the
/// light cone, where generic solutions are continuous but not smooth.
fn light_cone_miss(b: f64, opts: &ShootingOptions) -> Result<f64> {
    let y = shoot_left(b, 1.0 - 1e-7, opts, None)?;
    Ok(y[0] - FRAC_PI_2)
}

/// Construct the `n`-th member of the family by double shooting.
pub fn solve_ab(n: usize, opts: &ShootingOptions) -> Result<SelfSimilarProfile> {
    // Bracket: the n-th sign change of the one-sided miss in increasing b.
    let mut b_prev = opts.b_min;
    let mut g_prev = light_cone_miss(b_prev, opts)?;
    let mut found = 0usize;
    let mut bracket = None;
    while b_prev < opts.b_max {
        let b = b_prev * opts.b_ratio;
        let g = light_cone_miss(b, opts)?;
        if g_prev * g < 0.0 || g == 0.0 {
            if found == n {
                bracket = Some((b_prev, b, g_prev));
                break;
            }
            found += 1;
        }
        b_prev = b;
        g_prev = g;
    }
    let (mut lo, mut hi, g_lo) = bracket.ok_or(Error::BranchNotFound {
        n,
        b_max: opts.b_max,
    })?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo) <= 1e-13 * mid {
            break;
        }
        let g = light_cone_miss(mid, opts)?;
        if g * g_lo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut b = 0.5 * (lo + hi);
    let mut c = shoot_left(b, 1.0 - opts.z_ser, opts, None)?[1];

    // Newton on the matching conditions.
    let zm = opts.match_point;
    let mismatch = |b: f64, c: f64| -> Result<[f64; 2]> {
        let l = shoot_left(b, zm, opts, None)?;
        let r = shoot_right(c, zm, opts, None)?;
        Ok([l[0] - r[0], l[1] - r[1]])
    };
    let mut g = mismatch(b, c)?;
    let norm = |g: &[f64; 2]| g[0].abs().max(g[1].abs());
    for _ in 0..40 {
        if norm(&g) < 1e-13 {
            break;
        }
        let hb = 1e-7 * b.abs();
        let hc = 1e-7 * c.abs().max(1e-3);
        let gb = mismatch(b + hb, c)?;
        let gc = mismatch(b, c + hc)?;
        let j = [
            [(gb[0] - g[0]) / hb, (gc[0] - g[0]) / hc],
            [(gb[1] - g[1]) / hb, (gc[1] - g[1]) / hc],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let db = (j[1][1] * g[0] - j[0][1] * g[1]) / det;
        let dc = (j[0][0] * g[1] - j[1][0] * g[0]) / det;
        // Damped update.
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let (bn, cn) = (b - step * db, c - step * dc);
            let gn = mismatch(bn, cn)?;
            if norm(&gn) < norm(&g) {
                b = bn;
                c = cn;
                g = gn;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let mut interior = Trajectory::new();
    shoot_left(b, zm, opts, Some(&mut interior))?;
    shoot_right(c, zm, opts, Some(&mut interior))?;
    interior.finish();

    let light_cone = light_cone_series(c, opts.series_len);
    let mut exterior = Trajectory::new();
    {
        let z0 = 1.0 + opts.z_ser;
        let (f0, d0) = light_cone.eval(opts.z_ser);
        let mut y = [f0, d0];
        exterior.push(z0, y, profile_rhs(z0, &y));
        let mut z = z0;
        let mut hmax = 2e-3;
        let mut z_next: f64 = 2.0;
        while z < opts.z_ext {
            let target = z_next.min(opts.z_ext);
            let end = integrate(
                profile_rhs,
                z,
                y,
                target,
                &OdeOptions::with_tol(opts.ode_tol).h_max(hmax),
                |zz, yy, dy| {
                    exterior.push(zz, *yy, *dy);
                    Control::Continue
                },
            )?;
            z = target;
            y = end.y;
            hmax *= 10.0;
            z_next *= 10.0;
        }
        exterior.finish();
    }

    let mut profile = SelfSimilarProfile {
        n,
        b,
        c,
        residual_norm: f64::NAN,
        match_mismatch: norm(&g),
        match_point: zm,
        origin: origin_series(b, opts.series_len),
        light_cone,
        z_left: left_start(b, opts),
        s_right: opts.z_ser,
        interior,
        exterior,
        ode_tol: opts.ode_tol,
    };

    let crossings = profile.count_crossings()?;
    if crossings != n {
        return Err(Error::BranchNotFound {
            n,
            b_max: opts.b_max,
        });
    }
    profile.residual_norm = profile_residual_norm(&profile, opts.z_ser)?;
    Ok(profile)
}

/// Sup of the equation residual over check points on `[z_ser, 1 - z_ser]`.
pub fn profile_residual_norm(profile: &SelfSimilarProfile, z_ser: f64) -> Result<f64> {
    let mut points = Vec::new();
    let k = 60;
    let (la, lb) = (z_ser.ln(), 0.5f64.ln());
    for i in 0..=k {
        points.push((la + (lb - la) * i as f64 / k as f64).exp());
    }
    for i in 0..k {
        let s = (la + (lb - la) * i as f64 / k as f64).exp();
        points.push(1.0 - s);
    }
    let mut worst: f64 = 0.0;
    for z in points {
        worst = worst.max(profile.residual_at(z)?.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn closed_form_values() {
        assert_eq!(ts_closed_form(0.0), 0.0);
        assert!((ts_closed_form(1.0) - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn closed_form_satisfies_profile_equation() {
        // f = 2 atan z, f' = 2/(1+z^2), f'' = -4z/(1+z^2)^2.
        for &z in &[0.3, 0.7] {
            let w: f64 = 1.0 + z * z;
            let f = 2.0 * f64::atan(z);
            let d1 = 2.0 / w;
            let d2 = -4.0 * z / (w * w);
            let q = z * z - 1.0;
            let res = z * z * q * d2 + 2.0 * z * q * d1 + (2.0 * f).sin();
            assert!(res.abs() < 1e-15, "z={z} res={res}");
        }
    }

    #[test]
    fn series_match_closed_form_expansions() {
        let s = origin_series(2.0, 10);
        // 2 atan z = 2 (z - z^3/3 + z^5/5 - z^7/7 + z^9/9)
        let expect = [
            0.0,
            2.0,
            0.0,
            -2.0 / 3.0,
            0.0,
            2.0 / 5.0,
            0.0,
            -2.0 / 7.0,
            0.0,
            2.0 / 9.0,
        ];
        for (k, e) in expect.iter().enumerate() {
            assert!((s.0[k] - e).abs() < 1e-12, "k={k}: {} vs {e}", s.0[k]);
        }
        let l = light_cone_series(1.0, 6);
        // Derivatives of 2 atan z at z = 1: 1, -1, 1, 0, ...
        assert!((l.0[0] - FRAC_PI_2).abs() < 1e-15);
        assert!((l.0[1] - 1.0).abs() < 1e-15);
        assert!((l.0[2] + 0.5).abs() < 1e-14);
        assert!((l.0[3] - 1.0 / 6.0).abs() < 1e-14);
        assert!(l.0[4].abs() < 1e-14);
    }

    #[test]
    fn crossing_counter_edge_cases() {
        let zeros: Vec<_> = (1..100).map(|i| (i as f64 / 100.0, 0.0, 0.0)).collect();
        assert_eq!(count_crossings(&zeros).unwrap(), 0);
        let sine: Vec<_> = (1..1000)
            .map(|i| {
                let z = i as f64 / 1000.0;
                (
                    z,
                    FRAC_PI_2 + (3.0 * PI * z).sin(),
                    3.0 * PI * (3.0 * PI * z).cos(),
                )
            })
            .collect();
        assert_eq!(count_crossings(&sine).unwrap(), 2);
        let tangent = vec![(0.2, FRAC_PI_2 - 1e-3, 0.0), (0.3, FRAC_PI_2 + 1e-3, 0.0)];
        assert!(matches!(
            count_crossings(&tangent),
            Err(Error::AmbiguousCrossing { .. })
        ));
    }
}

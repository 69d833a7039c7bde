//! Finite-difference evolution of the radial equation
//!
//! ```text
//! chi_tt = (1/r^2) (r^2 chi_r)_r - m(m+1) sin(2 chi) / (2 r^2)
//! ```
//!
//! in first-order form `(chi, pi = chi_t)` with iterated Crank-Nicolson time
//! stepping. The radial operator is written in flux form on the mapped grid:
//! `G = r^2 chi_r` is formed at the faces between points and differenced
//! back to the points, both at fourth order in the grid coordinate. `G` is
//! zero at the origin and is reflected across it, so no sample at `r = 0` is
//! needed, and the operator is exact on `chi = c r + d r^3`. That keeps the
//! `1/r^2` cancellation against the potential term intact near the origin.
//!
//! At `r_max` the deviation from a far-field background obeys the outgoing
//! condition `d_t u + d_r u + u / r = 0`.

mod grid;
mod monitor;

pub use grid::{GridSpec, RadialGrid, SpacingPolicy};
pub use monitor::{
    evolve, BlowUpTrigger, DiagnosticSample, EvolutionRecord, Halt, MonitorSpec, Snapshot,
    SnapshotPolicy,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Equivariance winding number.
    pub m: u32,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { m: 1 }
    }
}

impl ModelParams {
    pub fn new(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("winding m must be >= 1".into()));
        }
        Ok(Self { m })
    }

    fn coupling(&self) -> f64 {
        let m = self.m as f64;
        m * (m + 1.0)
    }

    /// `+1` for even `m`, `-1` for odd: `chi ~ r^m` near the origin.
    fn parity(&self) -> f64 {
        if self.m.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct FieldState {
    pub t: f64,
    pub chi: Vec<f64>,
    pub pi: Vec<f64>,
}

impl FieldState {
    pub fn zeros(n: usize, t: f64) -> Self {
        Self {
            t,
            chi: vec![0.0; n],
            pi: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.chi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chi.is_empty()
    }

    /// First non-finite entry, if any.
    pub fn poisoned_index(&self) -> Option<usize> {
        self.chi
            .iter()
            .zip(&self.pi)
            .position(|(c, p)| !(c.is_finite() && p.is_finite()))
    }
}

/// Stencil used for `d_r` in the outer boundary condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterStencil {
    #[default]
    SecondOrder,
    /// Two-point stencil; only useful as a convergence negative control.
    FirstOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeOptions {
    pub cfl: f64,
    pub iter_tol: f64,
    pub max_iters: usize,
    pub outer_stencil: OuterStencil,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        Self {
            cfl: 0.5,
            iter_tol: 1e-10,
            max_iters: 50,
            outer_stencil: OuterStencil::SecondOrder,
        }
    }
}

/// Far-field background the outgoing condition is imposed relative to,
/// sampled at the last three grid points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterBackground(pub [f64; 3]);

impl OuterBackground {
    pub fn constant(value: f64) -> Self {
        Self([value; 3])
    }

    pub fn from_fn(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        let r = grid.radii();
        let n = r.len();
        Self([f(r[n - 3]), f(r[n - 2]), f(r[n - 1])])
    }
}

impl Default for OuterBackground {
    fn default() -> Self {
        Self::constant(0.0)
    }
}

/// Everything needed to advance a state: grid, model and scheme settings.
#[derive(Debug, Clone)]
pub struct Model {
    pub grid: RadialGrid,
    pub params: ModelParams,
    pub scheme: SchemeOptions,
    pub background: OuterBackground,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub iterations: usize,
    pub residual: f64,
}

impl Model {
    pub fn new(grid: RadialGrid) -> Self {
        Self {
            grid,
            params: ModelParams::default(),
            scheme: SchemeOptions::default(),
            background: OuterBackground::default(),
        }
    }

    pub fn with_background(mut self, background: OuterBackground) -> Self {
        self.background = background;
        self
    }

    pub fn with_scheme(mut self, scheme: SchemeOptions) -> Self {
        self.scheme = scheme;
        self
    }

    /// Time step from the CFL factor and the smallest spacing.
    pub fn dt(&self) -> f64 {
        self.scheme.cfl * self.grid.min_spacing()
    }

    fn check(&self, state: &FieldState) -> Result<()> {
        let n = self.grid.len();
        if state.chi.len() != n || state.pi.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: state.chi.len().min(state.pi.len()),
            });
        }
        if let Some(index) = state.poisoned_index() {
            return Err(Error::PoisonedState { t: state.t, index });
        }
        Ok(())
    }

    /// `d chi / dx` at the face between points `f` and `f + 1`: fourth order
    /// with a parity ghost at the origin, two-point near `r_max`, and a
    /// quadratic extrapolation ghost beyond the last point.
    fn face_slope(&self, chi: &[f64], f: usize) -> f64 {
        let n = chi.len();
        if f + 2 < n {
            let below = if f == 0 {
                self.params.parity() * chi[0]
            } else {
                chi[f - 1]
            };
            (below - 27.0 * chi[f] + 27.0 * chi[f + 1] - chi[f + 2]) / 24.0
        } else if f + 1 < n {
            chi[f + 1] - chi[f]
        } else {
            2.0 * chi[n - 1] - 3.0 * chi[n - 2] + chi[n - 3]
        }
    }

    /// `L chi = (r^2 chi_r)_r / r^2` at every point. The face fluxes
    /// `G = r^2 chi_r` are differenced at fourth order in `x`, dropping to
    /// second order at the last two points; `G` vanishes at the origin and
    /// mirrors across it.
    fn laplacian_into(&self, chi: &[f64], flux: &mut [f64], out: &mut [f64]) {
        let r = self.grid.radii();
        let jac = self.grid.jacobian();
        let (fr, fj) = self.grid.faces();
        let n = chi.len();
        for f in 0..n {
            flux[f] = fr[f] * fr[f] * self.face_slope(chi, f) / fj[f];
        }
        let mirrored = -self.params.parity() * flux[0];
        for i in 0..n {
            let below = if i == 0 { 0.0 } else { flux[i - 1] };
            let d = if i + 2 < n {
                let far = match i {
                    0 => mirrored,
                    1 => 0.0,
                    _ => flux[i - 2],
                };
                (far - 27.0 * below + 27.0 * flux[i] - flux[i + 1]) / 24.0
            } else {
                flux[i] - below
            };
            out[i] = d / (r[i] * r[i] * jac[i]);
        }
    }

    /// `L chi - m(m+1) sin(2 chi) / (2 r^2)` at every point.
    fn accel_into(&self, chi: &[f64], flux: &mut [f64], out: &mut [f64]) {
        self.laplacian_into(chi, flux, out);
        let r = self.grid.radii();
        let k = 0.5 * self.params.coupling();
        for i in 0..chi.len() {
            out[i] -= k * (2.0 * chi[i]).sin() / (r[i] * r[i]);
        }
    }

    /// Diagonal of `L`, probed with interleaved unit vectors; it
    /// preconditions the step iteration.
    fn laplacian_diagonal(&self) -> Vec<f64> {
        const STRIDE: usize = 8;
        let n = self.grid.len();
        let mut diag = vec![0.0; n];
        let mut probe = vec![0.0; n];
        let mut flux = vec![0.0; n];
        let mut out = vec![0.0; n];
        for c in 0..STRIDE {
            probe.iter_mut().enumerate().for_each(|(i, p)| {
                *p = if i % STRIDE == c { 1.0 } else { 0.0 };
            });
            self.laplacian_into(&probe, &mut flux, &mut out);
            for i in (c..n).step_by(STRIDE) {
                diag[i] = out[i];
            }
        }
        diag
    }

    /// Rate of the outer-boundary value from the outgoing condition.
    fn outer_rate(&self, chi: &[f64]) -> f64 {
        let n = chi.len();
        let r = self.grid.radii();
        let bg = self.background.0;
        let d = [chi[n - 3] - bg[0], chi[n - 2] - bg[1], chi[n - 1] - bg[2]];
        let h = self.grid.jacobian()[n - 1];
        let dr = match self.scheme.outer_stencil {
            OuterStencil::SecondOrder => (3.0 * d[2] - 4.0 * d[1] + d[0]) / (2.0 * h),
            OuterStencil::FirstOrder => (d[2] - d[1]) / h,
        };
        -(dr + d[2] / r[n - 1])
    }

    /// Right-hand side `(chi_t, pi_t)` from interior stencils, before the
    /// outer boundary condition is imposed.
    pub fn rhs_eval(&self, state: &FieldState) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(state)?;
        let mut accel = vec![0.0; state.len()];
        self.accel_into(&state.chi, &mut vec![0.0; state.len()], &mut accel);
        Ok((state.pi.clone(), accel))
    }

    /// Impose the outgoing condition: `pi` at `r_max` becomes the boundary
    /// rate. The origin needs nothing (see the module notes).
    pub fn apply_boundaries(&self, state: &mut FieldState) -> Result<()> {
        self.check(state)?;
        let n = state.len();
        state.pi[n - 1] = self.outer_rate(&state.chi);
        Ok(())
    }

    /// One iterated Crank-Nicolson step.
    pub fn step(&self, state: &FieldState, dt: f64) -> Result<FieldState> {
        let mut next = state.clone();
        self.step_into(state, dt, &mut next, &mut StepScratch::new(state.len()))?;
        Ok(next)
    }

    /// Solves the Crank-Nicolson relations
    /// `chi' = chi + (dt/2)(pi + pi')`, `pi' = pi + (dt/2)(a(chi) + a(chi'))`
    /// by eliminating `pi'` and iterating on `chi'` with the local diagonal
    /// treated implicitly.
    pub(crate) fn step_into(
        &self,
        state: &FieldState,
        dt: f64,
        next: &mut FieldState,
        scratch: &mut StepScratch,
    ) -> Result<StepInfo> {
        let n = state.len();
        let r = self.grid.radii();
        let k = self.params.coupling();
        let h = 0.5 * dt;
        let h2 = h * h;
        let StepScratch {
            a0,
            a1,
            rhs,
            flux,
            diag,
        } = scratch;
        if diag.len() != n {
            *diag = self.laplacian_diagonal();
        }
        self.accel_into(&state.chi, flux, a0);
        let rate0 = self.outer_rate(&state.chi);
        for i in 0..n - 1 {
            rhs[i] = state.chi[i] + dt * state.pi[i] + h2 * a0[i];
            next.chi[i] = state.chi[i] + dt * state.pi[i];
        }
        rhs[n - 1] = state.chi[n - 1] + h * rate0;
        next.chi[n - 1] = state.chi[n - 1] + dt * rate0;
        let last_diag = 1.0
            + h * (1.0 / r[n - 1]
                + match self.scheme.outer_stencil {
                    OuterStencil::SecondOrder => 1.5,
                    OuterStencil::FirstOrder => 1.0,
                } / self.grid.jacobian()[n - 1]);

        let chi = &mut next.chi;
        let mut residual = f64::INFINITY;
        let mut converged = None;
        for iter in 1..=self.scheme.max_iters {
            self.accel_into(chi, flux, a1);
            let rate1 = self.outer_rate(chi);
            residual = 0.0;
            for i in 0..n - 1 {
                let res = chi[i] - h2 * a1[i] - rhs[i];
                let d = 1.0 - h2 * (diag[i] - k * (2.0 * chi[i]).cos() / (r[i] * r[i]));
                let delta = res / d;
                chi[i] -= delta;
                residual = residual.max(delta.abs() / (1.0 + chi[i].abs()));
            }
            let delta = (chi[n - 1] - h * rate1 - rhs[n - 1]) / last_diag;
            chi[n - 1] -= delta;
            residual = residual.max(delta.abs() / (1.0 + chi[n - 1].abs()));
            if !residual.is_finite() {
                break;
            }
            if residual <= self.scheme.iter_tol {
                converged = Some(iter);
                break;
            }
        }
        next.t = state.t + dt;
        let Some(iterations) = converged else {
            return Err(Error::StepDivergence {
                t: next.t,
                residual,
                iterations: self.scheme.max_iters,
            });
        };
        for i in 0..n - 1 {
            next.pi[i] = (next.chi[i] - state.chi[i]) / h - state.pi[i];
        }
        next.pi[n - 1] = self.outer_rate(&next.chi);
        Ok(StepInfo {
            iterations,
            residual,
        })
    }

    /// Pointwise `rho = (r^2/2) [pi^2 + chi_r^2 + m(m+1) sin^2(chi) / r^2]`.
    pub fn energy_density(&self, state: &FieldState) -> Vec<f64> {
        let mut rho = vec![0.0; state.len()];
        self.energy_density_into(state, &mut rho);
        rho
    }

    /// Uses fourth-order differences for `chi_r`, with parity ghosts at the
    /// origin and one-sided stencils at the last two points.
    pub(crate) fn energy_density_into(&self, state: &FieldState, rho: &mut [f64]) {
        let r = self.grid.radii();
        let jac = self.grid.jacobian();
        let chi = &state.chi;
        let n = chi.len();
        let k = self.params.coupling();
        let parity = self.params.parity();
        let at = |i: isize| -> f64 {
            if i < 0 {
                parity * chi[(-i - 1) as usize]
            } else {
                chi[i as usize]
            }
        };
        for i in 0..n {
            let j = i as isize;
            let dx = if i + 2 < n {
                (at(j - 2) - 8.0 * at(j - 1) + 8.0 * at(j + 1) - at(j + 2)) / 12.0
            } else if i + 2 == n {
                (3.0 * chi[i + 1] + 10.0 * chi[i] - 18.0 * chi[i - 1] + 6.0 * chi[i - 2]
                    - chi[i - 3])
                    / 12.0
            } else {
                (25.0 * chi[i] - 48.0 * chi[i - 1] + 36.0 * chi[i - 2] - 16.0 * chi[i - 3]
                    + 3.0 * chi[i - 4])
                    / 12.0
            };
            let d = dx / jac[i];
            let s = chi[i].sin();
            let r2 = r[i] * r[i];
            rho[i] = 0.5 * (r2 * (state.pi[i] * state.pi[i] + d * d) + k * s * s);
        }
    }

    /// Midpoint quadrature of `rho` in the grid coordinate.
    pub fn total_energy(&self, state: &FieldState) -> f64 {
        let rho = self.energy_density(state);
        weighted_sum(&rho, self.grid.jacobian(), rho.len())
    }

    /// Unconstrained cubic extrapolation of `chi` to `r = 0` from the first
    /// four points. For odd regular data the error is fifth order in the
    /// spacing.
    pub fn origin_extrapolation(&self, state: &FieldState) -> f64 {
        let r = &self.grid.radii()[..4];
        let c = &state.chi[..4];
        let mut v = 0.0;
        for i in 0..4 {
            let mut w = 1.0;
            for j in 0..4 {
                if i != j {
                    w *= r[j] / (r[j] - r[i]);
                }
            }
            v += w * c[i];
        }
        v
    }
}

pub(crate) fn weighted_sum(values: &[f64], weights: &[f64], upto: usize) -> f64 {
    values[..upto]
        .iter()
        .zip(&weights[..upto])
        .map(|(v, w)| v * w)
        .sum()
}

pub(crate) struct StepScratch {
    a0: Vec<f64>,
    a1: Vec<f64>,
    rhs: Vec<f64>,
    flux: Vec<f64>,
    /// Filled on first use.
    diag: Vec<f64>,
}

impl StepScratch {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            a0: vec![0.0; n],
            a1: vec![0.0; n],
            rhs: vec![0.0; n],
            flux: vec![0.0; n],
            diag: Vec::new(),
        }
    }
}

/// Result of a self-convergence study.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    /// Mean spacings, coarse to fine.
    pub spacings: Vec<f64>,
    /// L2 norms of successive differences, interpolated to the coarse grid.
    pub differences: Vec<f64>,
    /// `None` when every difference is exactly zero.
    pub order: Option<f64>,
}

/// Cubic Lagrange interpolation of grid data to `x`.
pub fn interpolate(radii: &[f64], values: &[f64], x: f64) -> f64 {
    let n = radii.len();
    let j = radii.partition_point(|&r| r < x).clamp(2, n - 2) - 2;
    let (xs, ys) = (&radii[j..j + 4], &values[j..j + 4]);
    let mut v = 0.0;
    for i in 0..4 {
        let mut w = 1.0;
        for k in 0..4 {
            if i != k {
                w *= (x - xs[k]) / (xs[i] - xs[k]);
            }
        }
        v += w * ys[i];
    }
    v
}

/// Order `p` with `(h1^p - h2^p) / (h2^p - h3^p) = ratio`, by bisection.
fn richardson_order(h: [f64; 3], ratio: f64) -> Option<f64> {
    let f = |p: f64| (h[0].powf(p) - h[1].powf(p)) / (h[1].powf(p) - h[2].powf(p)) - ratio;
    let (mut lo, mut hi) = (0.05, 12.0);
    if f(lo) * f(hi) > 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Measure the self-convergence order from three runs at successively
/// refined grids (`grids` coarse to fine). `run` evolves a grid to the
/// comparison time and returns the final `chi`.
pub fn convergence_order(
    grids: &[RadialGrid],
    run: impl Fn(&RadialGrid) -> Result<Vec<f64>>,
) -> Result<ConvergenceReport> {
    if grids.len() != 3 {
        return Err(Error::OrderUndefined(format!(
            "need exactly three resolutions, got {}",
            grids.len()
        )));
    }
    let sols: Vec<Vec<f64>> = grids.iter().map(&run).collect::<Result<_>>()?;
    let coarse = grids[0].radii();
    let on_coarse = |k: usize| -> Vec<f64> {
        coarse
            .iter()
            .map(|&x| interpolate(grids[k].radii(), &sols[k], x))
            .collect()
    };
    let s1 = on_coarse(1);
    let s2 = on_coarse(2);
    let jac = grids[0].jacobian();
    let l2 = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .zip(jac)
            .map(|((x, y), w)| (x - y) * (x - y) * w)
            .sum::<f64>()
            .sqrt()
    };
    let d1 = l2(&sols[0], &s1);
    let d2 = l2(&s1, &s2);
    let spacings: Vec<f64> = grids.iter().map(|g| g.mean_spacing()).collect();
    if d1 == 0.0 && d2 == 0.0 {
        return Ok(ConvergenceReport {
            spacings,
            differences: vec![0.0, 0.0],
            order: None,
        });
    }
    if !(d2 > 0.0 && d1 > d2) {
        return Err(Error::OrderUndefined(format!(
            "differences not decreasing under refinement ({d1:e}, {d2:e})"
        )));
    }
    let h = [spacings[0], spacings[1], spacings[2]];
    let order = richardson_order(h, d1 / d2)
        .ok_or_else(|| Error::OrderUndefined(format!("no order matches the ratio {}", d1 / d2)))?;
    Ok(ConvergenceReport {
        spacings,
        differences: vec![d1, d2],
        order: Some(order),
    })
}

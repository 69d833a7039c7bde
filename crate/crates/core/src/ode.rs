//! Adaptive Dormand–Prince 5(4) integrator for small fixed-size systems.
//!
//! All the shooting problems in this crate are two- or four-dimensional, so
//! the state is a plain `[f64; N]`. Integration may run forwards or
//! backwards in the independent variable. Accepted steps are reported to an
//! observer which may rescale the state (linear problems that grow
//! exponentially) or stop the integration early.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("maximum number of steps exceeded at t = {t}")]
    MaxSteps { t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on |h|; `f64::INFINITY` for none.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-14,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol * 1e-2,
            ..Self::default()
        }
    }

    pub fn h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }
}

/// What the observer wants after an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    /// The observer modified the state in place; derivatives are recomputed.
    Modified,
    Stop,
}

/// Result of an integration: the final abscissa and state.
#[derive(Debug, Clone, Copy)]
pub struct Endpoint<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    /// `false` when the observer stopped the integration before `t1`.
    pub completed: bool,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

/// Integrate `y' = f(t, y)` from `t0` to `t1`.
///
/// The observer sees every accepted step as `(t, &mut y, &dy)`.
pub fn integrate<const N: usize, F, O>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    opts: &OdeOptions,
    mut observer: O,
) -> Result<Endpoint<N>, OdeError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    O: FnMut(f64, &mut [f64; N], &[f64; N]) -> Control,
{
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(Endpoint {
            t: t0,
            y: y0,
            completed: true,
        });
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    if y.iter().chain(k1.iter()).any(|v| !v.is_finite()) {
        return Err(OdeError::NonFinite { t });
    }

    // Initial step from the local derivative scale.
    let mut h = {
        let mut d0: f64 = 0.0;
        let mut d1: f64 = 0.0;
        for i in 0..N {
            let sc = opts.atol + opts.rtol * y[i].abs();
            d0 = d0.max((y[i] / sc).abs());
            d1 = d1.max((k1[i] / sc).abs());
        }
        let guess = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6 * span.abs()
        } else {
            0.01 * d0 / d1
        };
        guess
            .min(span.abs())
            .min(opts.h_max)
            .max(1e-14 * t.abs().max(span.abs()))
    };

    let mut steps = 0usize;
    let mut last_rejected = false;
    loop {
        if steps >= opts.max_steps {
            return Err(OdeError::MaxSteps { t });
        }
        let remaining = (t1 - t) * dir;
        if remaining <= 0.0 {
            break;
        }
        let mut final_step = false;
        if h >= remaining {
            h = remaining;
            final_step = true;
        }
        let hs = h * dir;

        let k2 = f(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]));
        let k3 = f(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(
            t + C4 * hs,
            &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = f(
            t + C5 * hs,
            &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + hs,
            &axpy(
                &y,
                hs,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y_new = axpy(
            &y,
            hs,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let t_new = if final_step { t1 } else { t + hs };
        let k7 = f(t_new, &y_new);
        steps += 1;

        let mut err: f64 = 0.0;
        let mut finite = true;
        for i in 0..N {
            let e =
                hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            let q = e / sc;
            err += q * q;
            finite &= y_new[i].is_finite() && k7[i].is_finite();
        }
        err = (err / N as f64).sqrt();
        if !finite || !err.is_finite() {
            // Treat as a rejection with a strong cut.
            h *= 0.1;
            last_rejected = true;
            if h < 1e-15 * t.abs().max(1e-300) || h < f64::MIN_POSITIVE {
                return Err(OdeError::NonFinite { t });
            }
            continue;
        }

        if err <= 1.0 {
            t = t_new;
            y = y_new;
            k1 = k7;
            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 5.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            last_rejected = false;
            h = (h * fac).min(opts.h_max);
            match observer(t, &mut y, &k1) {
                Control::Continue => {}
                Control::Modified => {
                    k1 = f(t, &y);
                }
                Control::Stop => {
                    return Ok(Endpoint {
                        t,
                        y,
                        completed: false,
                    });
                }
            }
            if final_step {
                break;
            }
        } else {
            let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            h *= fac;
            last_rejected = true;
            if h <= 1e-14 * t.abs().max(1e-30) {
                return Err(OdeError::StepSizeUnderflow { t });
            }
        }
    }
    Ok(Endpoint {
        t: t1,
        y,
        completed: true,
    })
}

/// Accepted-step samples with cubic Hermite interpolation between them.
#[derive(Debug, Clone, Default)]
pub struct Trajectory<const N: usize> {
    t: Vec<f64>,
    y: Vec<[f64; N]>,
    dy: Vec<[f64; N]>,
}

impl<const N: usize> Trajectory<N> {
    pub fn new() -> Self {
        Self {
            t: Vec::new(),
            y: Vec::new(),
            dy: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, y: [f64; N], dy: [f64; N]) {
        self.t.push(t);
        self.y.push(y);
        self.dy.push(dy);
    }

    /// Sort nodes ascending in `t` and drop duplicates.
    pub fn finish(&mut self) {
        let mut idx: Vec<usize> = (0..self.t.len()).collect();
        idx.sort_by(|&a, &b| self.t[a].total_cmp(&self.t[b]));
        let mut t = Vec::with_capacity(idx.len());
        let mut y = Vec::with_capacity(idx.len());
        let mut dy = Vec::with_capacity(idx.len());
        for i in idx {
            if t.last().is_some_and(|&last: &f64| last == self.t[i]) {
                continue;
            }
            t.push(self.t[i]);
            y.push(self.y[i]);
            dy.push(self.dy[i]);
        }
        self.t = t;
        self.y = y;
        self.dy = dy;
    }

    /// Append all nodes of another (finished) trajectory, then re-finish.
    pub fn extend(&mut self, other: &Trajectory<N>) {
        self.t.extend_from_slice(&other.t);
        self.y.extend_from_slice(&other.y);
        self.dy.extend_from_slice(&other.dy);
        self.finish();
    }

    /// Multiply the given components of every stored node by `c`.
    pub fn scale_components(&mut self, components: &[usize], c: f64) {
        for (y, dy) in self.y.iter_mut().zip(self.dy.iter_mut()) {
            for &k in components {
                y[k] *= c;
                dy[k] *= c;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, &[f64; N])> {
        self.t.iter().copied().zip(self.y.iter())
    }

    pub fn t_min(&self) -> f64 {
        self.t[0]
    }

    pub fn t_max(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    /// Cubic Hermite interpolation; clamps to the end nodes outside the range.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let n = self.t.len();
        if t <= self.t[0] {
            return self.y[0];
        }
        if t >= self.t[n - 1] {
            return self.y[n - 1];
        }
        let j = self.t.partition_point(|&x| x <= t) - 1;
        let (t0, t1) = (self.t[j], self.t[j + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let mut out = [0.0; N];
        for (i, o) in out.iter_mut().enumerate() {
            *o = h00 * self.y[j][i]
                + h * h10 * self.dy[j][i]
                + h01 * self.y[j + 1][i]
                + h * h11 * self.dy[j + 1][i];
        }
        out
    }

    /// Node whose abscissa is closest to `t`.
    pub fn nearest_node(&self, t: f64) -> (f64, [f64; N]) {
        let j = self.t.partition_point(|&x| x <= t);
        let cand = [j.saturating_sub(1), j.min(self.t.len() - 1)];
        let best = cand
            .into_iter()
            .min_by(|&a, &b| (self.t[a] - t).abs().total_cmp(&(self.t[b] - t).abs()))
            .unwrap();
        (self.t[best], self.y[best])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth_matches_closed_form() {
        let end = integrate(
            |_, y: &[f64; 1]| [y[0]],
            0.0,
            [1.0],
            2.0,
            &OdeOptions::with_tol(1e-12),
            |_, _, _| Control::Continue,
        )
        .unwrap();
        assert!((end.y[0] - 2f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn backward_harmonic_oscillator() {
        // y'' = -y from t=1 back to t=0 starting on sin.
        let end = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            1.0,
            [1f64.sin(), 1f64.cos()],
            0.0,
            &OdeOptions::with_tol(1e-12),
            |_, _, _| Control::Continue,
        )
        .unwrap();
        assert!(end.y[0].abs() < 1e-11);
        assert!((end.y[1] - 1.0).abs() < 1e-11);
    }

    #[test]
    fn observer_can_stop_and_rescale() {
        let mut count = 0;
        let end = integrate(
            |_, y: &[f64; 1]| [y[0]],
            0.0,
            [1.0],
            100.0,
            &OdeOptions::with_tol(1e-10),
            |_, y, _| {
                if y[0] > 1e10 {
                    y[0] *= 1e-10;
                    count += 1;
                    Control::Modified
                } else {
                    Control::Continue
                }
            },
        )
        .unwrap();
        assert!(end.completed);
        assert!(count >= 4);
        let log_value = end.y[0].ln() + count as f64 * 10.0 * 10f64.ln();
        assert!((log_value - 100.0).abs() < 1e-6);

        let stopped = integrate(
            |_, y: &[f64; 1]| [y[0]],
            0.0,
            [1.0],
            100.0,
            &OdeOptions::default(),
            |_, y, _| {
                if y[0] > 10.0 {
                    Control::Stop
                } else {
                    Control::Continue
                }
            },
        )
        .unwrap();
        assert!(!stopped.completed);
        assert!(stopped.t < 3.0);
    }

    #[test]
    fn hermite_dense_output_is_accurate() {
        let mut traj = Trajectory::<2>::new();
        traj.push(0.0, [0.0, 1.0], [1.0, 0.0]);
        integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [0.0, 1.0],
            3.0,
            &OdeOptions::with_tol(1e-12).h_max(0.01),
            |t, y, dy| {
                traj.push(t, *y, *dy);
                Control::Continue
            },
        )
        .unwrap();
        traj.finish();
        for k in 0..300 {
            let t = 0.01 * k as f64 + 0.0037;
            let y = traj.eval(t);
            assert!((y[0] - t.sin()).abs() < 5e-11, "t={t}");
        }
    }
}

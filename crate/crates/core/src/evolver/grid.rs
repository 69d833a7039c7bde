//! Cell-offset radial grids.
//!
//! Points sit at `r_i = r(x_i)` with `x_i = i + 1/2`, so no sample lands on
//! the origin. The map `r(x)` is odd in `x`; reflecting an index through the
//! origin therefore reflects the radius, which is what the parity ghost at
//! the inner edge relies on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpacingPolicy {
    Uniform {
        dr: f64,
    },
    /// `r(x) = h_out x + (h_in - h_out) w tanh(x / w)`: spacing `h_in` at the
    /// origin relaxing to `h_out` over roughly `w` points.
    Clustered {
        h_in: f64,
        h_out: f64,
        width: f64,
    },
}

impl SpacingPolicy {
    fn map(&self, x: f64) -> (f64, f64) {
        match *self {
            SpacingPolicy::Uniform { dr } => (dr * x, dr),
            SpacingPolicy::Clustered { h_in, h_out, width } => {
                let th = (x / width).tanh();
                (
                    h_out * x + (h_in - h_out) * width * th,
                    h_out + (h_in - h_out) * (1.0 - th * th),
                )
            }
        }
    }
}

/// Grid request as it appears in configuration: uniform when
/// `h_in == h_out`, otherwise clustered toward the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_max: f64,
    pub h_in: f64,
    pub h_out: f64,
    /// Clustering width in grid points.
    pub width: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            r_max: 20.0,
            h_in: 1e-3,
            h_out: 0.02,
            width: 40.0,
        }
    }
}

impl GridSpec {
    pub fn uniform(r_max: f64, dr: f64) -> Self {
        Self {
            r_max,
            h_in: dr,
            h_out: dr,
            width: 1.0,
        }
    }

    pub fn build(&self) -> Result<RadialGrid> {
        if self.h_in == self.h_out {
            RadialGrid::uniform(self.r_max, self.h_in)
        } else {
            RadialGrid::clustered(self.r_max, self.h_in, self.h_out, self.width)
        }
    }

    /// Every spacing divided by `factor`.
    pub fn refined(&self, factor: f64) -> Self {
        Self {
            r_max: self.r_max,
            h_in: self.h_in / factor,
            h_out: self.h_out / factor,
            width: self.width * factor,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RadialGrid {
    policy: SpacingPolicy,
    r: Vec<f64>,
    /// `dr/dx` at the points.
    jac: Vec<f64>,
    /// `r` and `dr/dx` at `x = i + 1`, between points `i` and `i + 1`.
    face_r: Vec<f64>,
    face_jac: Vec<f64>,
}

impl RadialGrid {
    /// Uniform spacing as close to `dr` as fits `r_max` exactly.
    pub fn uniform(r_max: f64, dr: f64) -> Result<Self> {
        if !(r_max > 0.0 && dr > 0.0 && dr < r_max) {
            return Err(Error::InvalidParameter(format!(
                "uniform grid needs 0 < dr < r_max (dr = {dr}, r_max = {r_max})"
            )));
        }
        let n = ((r_max / dr + 0.5).round() as usize).max(8);
        let dr = r_max / (n as f64 - 0.5);
        Ok(Self::build(SpacingPolicy::Uniform { dr }, n))
    }

    /// Clustered spacing; `h_out` is adjusted slightly so the last point is
    /// exactly `r_max`.
    pub fn clustered(r_max: f64, h_in: f64, h_out: f64, width: f64) -> Result<Self> {
        if !(h_in > 0.0 && h_out >= h_in && width > 0.0 && r_max > 4.0 * h_out) {
            return Err(Error::InvalidParameter(format!(
                "clustered grid needs 0 < h_in <= h_out, width > 0, r_max > 4 h_out \
                 (h_in = {h_in}, h_out = {h_out}, width = {width}, r_max = {r_max})"
            )));
        }
        let approx = (r_max - (h_in - h_out) * width) / h_out + 0.5;
        let n = (approx.round() as usize).max(8);
        let x = n as f64 - 0.5;
        let th = (x / width).tanh();
        let h_out = (r_max - h_in * width * th) / (x - width * th);
        if !(h_out >= h_in) {
            return Err(Error::InvalidParameter(format!(
                "clustering width {width} too large for r_max = {r_max}"
            )));
        }
        Ok(Self::build(
            SpacingPolicy::Clustered { h_in, h_out, width },
            n,
        ))
    }

    fn build(policy: SpacingPolicy, n: usize) -> Self {
        let mut r = Vec::with_capacity(n);
        let mut jac = Vec::with_capacity(n);
        let mut face_r = Vec::with_capacity(n);
        let mut face_jac = Vec::with_capacity(n);
        for i in 0..n {
            let (ri, ji) = policy.map(i as f64 + 0.5);
            let (rf, jf) = policy.map(i as f64 + 1.0);
            r.push(ri);
            jac.push(ji);
            face_r.push(rf);
            face_jac.push(jf);
        }
        Self {
            policy,
            r,
            jac,
            face_r,
            face_jac,
        }
    }

    /// Same policy with every spacing divided by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let f = factor as f64;
        match self.policy {
            SpacingPolicy::Uniform { dr } => Self::uniform(self.r_max(), dr / f),
            SpacingPolicy::Clustered { h_in, h_out, width } => {
                Self::clustered(self.r_max(), h_in / f, h_out / f, width * f)
            }
        }
    }

    pub fn policy(&self) -> SpacingPolicy {
        self.policy
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn r_max(&self) -> f64 {
        self.r[self.r.len() - 1]
    }

    pub fn jacobian(&self) -> &[f64] {
        &self.jac
    }

    pub(crate) fn faces(&self) -> (&[f64], &[f64]) {
        (&self.face_r, &self.face_jac)
    }

    /// Mean spacing `r_max / (n - 1/2)`, the resolution measure used when
    /// comparing grids.
    pub fn mean_spacing(&self) -> f64 {
        self.r_max() / (self.len() as f64 - 0.5)
    }

    /// Smallest distance between neighbouring points.
    pub fn min_spacing(&self) -> f64 {
        let first = 2.0 * self.r[0];
        self.r.windows(2).map(|w| w[1] - w[0]).fold(first, f64::min)
    }

    /// Index of the last point with `r <= radius`, if any.
    pub fn last_index_within(&self, radius: f64) -> Option<usize> {
        self.r.partition_point(|&r| r <= radius).checked_sub(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_is_cell_offset() {
        let g = RadialGrid::uniform(10.0, 0.1).unwrap();
        let dr = g.radii()[1] - g.radii()[0];
        assert!((g.radii()[0] - 0.5 * dr).abs() < 1e-15);
        assert!((g.r_max() - 10.0).abs() < 1e-12);
        assert!((g.min_spacing() - dr).abs() < 1e-12);
    }

    #[test]
    fn clustered_grid_spacing_and_end() {
        let g = RadialGrid::clustered(20.0, 1e-3, 2e-2, 40.0).unwrap();
        assert!((g.r_max() - 20.0).abs() < 1e-10);
        let r = g.radii();
        assert!((r[1] - r[0] - 1e-3).abs() < 5e-5);
        assert!(r.windows(2).all(|w| w[1] > w[0]));
        let last = r[r.len() - 1] - r[r.len() - 2];
        assert!((last - 2e-2).abs() < 1e-3);
    }

    #[test]
    fn refinement_halves_spacing() {
        let g = RadialGrid::uniform(5.0, 0.1).unwrap();
        let h = g.refined(2).unwrap();
        assert!((h.min_spacing() * 2.0 - g.min_spacing()).abs() < 1e-3);
    }
}

//! Initial-data families in `(chi, pi)` form.
//!
//! The single-formula families are plain functions of a grid. Families built
//! on a background solution go through [`Family`], which solves the
//! background once and then produces states for any amplitude.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolver::{FieldState, OuterBackground, RadialGrid};
use crate::self_similar::{solve_ab, SelfSimilarProfile, ShootingOptions};
use crate::static_solutions::{solve_static, StaticOptions, StaticProfile, DEFAULT_R_ODE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Gaussian,
    Logarithmic,
    TurokSpergel,
    Tanh,
    PerturbedStatic,
    PerturbedSelfSimilar,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 6] = [
        FamilyKind::Gaussian,
        FamilyKind::Logarithmic,
        FamilyKind::TurokSpergel,
        FamilyKind::Tanh,
        FamilyKind::PerturbedStatic,
        FamilyKind::PerturbedSelfSimilar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Gaussian => "gaussian",
            FamilyKind::Logarithmic => "logarithmic",
            FamilyKind::TurokSpergel => "turok_spergel",
            FamilyKind::Tanh => "tanh",
            FamilyKind::PerturbedStatic => "perturbed_static",
            FamilyKind::PerturbedSelfSimilar => "perturbed_self_similar",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown family kind '{s}'")))
    }
}

/// Kind-specific parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extras {
    /// Static solution slope `chi_s'(0)`.
    pub a: f64,
    /// Self-similar branch index.
    pub n: usize,
    /// Initial time for the self-similar slice, negative.
    pub t0: f64,
    /// Ramp radius for logarithmic data; `None` means ten grid spacings.
    pub r_ramp: Option<f64>,
}

impl Default for Extras {
    fn default() -> Self {
        Self {
            a: 1.0,
            n: 1,
            t0: -1.0,
            r_ramp: None,
        }
    }
}

/// One member of a family. `amplitude` is the scanned parameter: `A`, `eps`,
/// or the pulse amplitude for the perturbed families, whose `r0` and
/// `width` then describe the pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub amplitude: f64,
    pub r0: f64,
    pub width: f64,
    #[serde(default)]
    pub extras: Extras,
}

impl FamilySpec {
    pub fn new(kind: FamilyKind, amplitude: f64, r0: f64, width: f64) -> Self {
        Self {
            kind,
            amplitude,
            r0,
            width,
            extras: Extras::default(),
        }
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self {
            amplitude,
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "amplitude must be finite, got {}",
                self.amplitude
            )));
        }
        match self.kind {
            FamilyKind::TurokSpergel if !(self.r0 > 0.0) => Err(Error::InvalidParameter(format!(
                "Delta must be positive, got {}",
                self.r0
            ))),
            FamilyKind::TurokSpergel => Ok(()),
            _ if !(self.width > 0.0) => Err(Error::InvalidParameter(format!(
                "width must be positive, got {}",
                self.width
            ))),
            FamilyKind::Logarithmic if !(self.r0 > 0.0) => Err(Error::Domain(format!(
                "logarithmic data needs R0 > 0, got {}",
                self.r0
            ))),
            FamilyKind::PerturbedSelfSimilar if !(self.extras.t0 < 0.0) => Err(
                Error::InvalidParameter(format!("t0 must be negative, got {}", self.extras.t0)),
            ),
            _ => Ok(()),
        }
    }
}

/// A constructed state with the far-field background its outer boundary
/// condition refers to.
#[derive(Debug, Clone)]
pub struct InitialData {
    pub state: FieldState,
    pub background: OuterBackground,
    /// Facts about the construction worth carrying into run metadata.
    pub notes: Vec<String>,
}

fn build(grid: &RadialGrid, f: impl Fn(f64) -> (f64, f64)) -> FieldState {
    let mut s = FieldState::zeros(grid.len(), 0.0);
    for (i, &r) in grid.radii().iter().enumerate() {
        (s.chi[i], s.pi[i]) = f(r);
    }
    s
}

/// `(g, g')` for `A exp(-(r - R0)^2 / d^2)`.
fn bump(a: f64, r0: f64, d: f64, r: f64) -> (f64, f64) {
    let g = a * (-(r - r0) * (r - r0) / (d * d)).exp();
    (g, -2.0 * (r - r0) / (d * d) * g)
}

/// Ingoing Gaussian pulse, `pi = chi'`.
pub fn gaussian(a: f64, r0: f64, delta: f64, grid: &RadialGrid) -> Result<FieldState> {
    FamilySpec::new(FamilyKind::Gaussian, a, r0, delta).validate()?;
    Ok(build(grid, |r| bump(a, r0, delta, r)))
}

/// `chi = A ln(r + R0) / (r + delta)` with `pi = chi'`. When `R0 != 1`
/// the profile is multiplied by `tanh(r / r_ramp)` so that it vanishes at
/// the origin.
pub fn logarithmic(
    a: f64,
    r0: f64,
    delta: f64,
    r_ramp: Option<f64>,
    grid: &RadialGrid,
) -> Result<FieldState> {
    FamilySpec::new(FamilyKind::Logarithmic, a, r0, delta).validate()?;
    let ramp = (r0 != 1.0).then(|| r_ramp.unwrap_or(10.0 * grid.min_spacing()));
    Ok(build(grid, |r| {
        let (c, dc) = log_profile(a, r0, delta, r);
        match ramp {
            None => (c, dc),
            Some(w) => {
                let t = (r / w).tanh();
                (c * t, dc * t + c * (1.0 - t * t) / w)
            }
        }
    }))
}

fn log_profile(a: f64, r0: f64, delta: f64, r: f64) -> (f64, f64) {
    let l = (r + r0).ln();
    let q = r + delta;
    (a * l / q, a * (1.0 / ((r + r0) * q) - l / (q * q)))
}

/// `chi = 2 eps arctan(r / Delta)`, `pi = 2 eps r / (Delta^2 + r^2)`.
pub fn turok_spergel(eps: f64, delta: f64, grid: &RadialGrid) -> Result<FieldState> {
    FamilySpec::new(FamilyKind::TurokSpergel, eps, delta, 1.0).validate()?;
    Ok(build(grid, |r| {
        (
            2.0 * eps * (r / delta).atan(),
            2.0 * eps * r / (delta * delta + r * r),
        )
    }))
}

/// `chi = A [tanh((r - R0) / delta) + 1] / 2` with `pi = chi'`.
pub fn tanh_family(a: f64, r0: f64, delta: f64, grid: &RadialGrid) -> Result<FieldState> {
    FamilySpec::new(FamilyKind::Tanh, a, r0, delta).validate()?;
    Ok(build(grid, |r| {
        let t = ((r - r0) / delta).tanh();
        (0.5 * a * (t + 1.0), 0.5 * a * (1.0 - t * t) / delta)
    }))
}

/// Static solution plus a Gaussian pulse with
/// `pi = -(r - R0) / d^2 * A exp(-(r - R0)^2 / d^2)`.
pub fn perturbed_static(
    profile: &StaticProfile,
    a_p: f64,
    r0_p: f64,
    d_p: f64,
    grid: &RadialGrid,
) -> Result<FieldState> {
    let mut spec = FamilySpec::new(FamilyKind::PerturbedStatic, a_p, r0_p, d_p);
    spec.extras.a = profile.a;
    spec.validate()?;
    Ok(build(grid, |r| {
        let (g, _) = bump(a_p, r0_p, d_p, r);
        (profile.chi(r) + g, -(r - r0_p) / (d_p * d_p) * g)
    }))
}

/// Self-similar solution sampled at `t0 < 0` plus an ingoing Gaussian
/// pulse. `pi` of the background is its exact time derivative.
pub fn perturbed_self_similar(
    profile: &SelfSimilarProfile,
    t0: f64,
    a_p: f64,
    r0_p: f64,
    d_p: f64,
    grid: &RadialGrid,
) -> Result<FieldState> {
    let mut spec = FamilySpec::new(FamilyKind::PerturbedSelfSimilar, a_p, r0_p, d_p);
    spec.extras.t0 = t0;
    spec.validate()?;
    let mut s = build(grid, |r| {
        let (f, df) = profile.eval(-r / t0);
        let (g, dg) = bump(a_p, r0_p, d_p, r);
        (f + g, r / (t0 * t0) * df + dg)
    });
    s.t = t0;
    Ok(s)
}

/// Background solution a family is built on.
#[derive(Debug, Clone)]
pub enum Background {
    None,
    Static(Box<StaticProfile>),
    SelfSimilar(Box<SelfSimilarProfile>),
}

/// A family with its background solved, ready to produce states for any
/// amplitude.
#[derive(Debug, Clone)]
pub struct Family {
    pub spec: FamilySpec,
    pub background: Background,
}

impl Family {
    pub fn new(spec: FamilySpec) -> Result<Self> {
        spec.validate()?;
        let background = match spec.kind {
            FamilyKind::PerturbedStatic => Background::Static(Box::new(solve_static(
                spec.extras.a,
                DEFAULT_R_ODE,
                &StaticOptions::default(),
            )?)),
            FamilyKind::PerturbedSelfSimilar => Background::SelfSimilar(Box::new(solve_ab(
                spec.extras.n,
                &ShootingOptions::default(),
            )?)),
            _ => Background::None,
        };
        Ok(Self { spec, background })
    }

    /// State for the family member with the given amplitude.
    pub fn initial_data(&self, amplitude: f64, grid: &RadialGrid) -> Result<InitialData> {
        let s = self.spec.with_amplitude(amplitude);
        let mut notes = Vec::new();
        let (state, background) = match (&s.kind, &self.background) {
            (FamilyKind::Gaussian, _) => (
                gaussian(s.amplitude, s.r0, s.width, grid)?,
                OuterBackground::default(),
            ),
            (FamilyKind::Logarithmic, _) => {
                let st = logarithmic(s.amplitude, s.r0, s.width, s.extras.r_ramp, grid)?;
                if s.r0 != 1.0 {
                    let w = s.extras.r_ramp.unwrap_or(10.0 * grid.min_spacing());
                    notes.push(format!(
                        "logarithmic data ramped to zero at the origin over r_ramp = {w}"
                    ));
                }
                // The slowly decaying tail is held as the far field.
                let n = st.len();
                let bg = OuterBackground([st.chi[n - 3], st.chi[n - 2], st.chi[n - 1]]);
                (st, bg)
            }
            (FamilyKind::TurokSpergel, _) => (
                turok_spergel(s.amplitude, s.r0, grid)?,
                OuterBackground::constant(std::f64::consts::PI * s.amplitude),
            ),
            (FamilyKind::Tanh, _) => (
                tanh_family(s.amplitude, s.r0, s.width, grid)?,
                OuterBackground::constant(s.amplitude),
            ),
            (FamilyKind::PerturbedStatic, Background::Static(p)) => (
                perturbed_static(p, s.amplitude, s.r0, s.width, grid)?,
                OuterBackground::from_fn(grid, |r| p.chi(r)),
            ),
            (FamilyKind::PerturbedSelfSimilar, Background::SelfSimilar(p)) => (
                perturbed_self_similar(p, s.extras.t0, s.amplitude, s.r0, s.width, grid)?,
                OuterBackground::constant(p.chi_infinity()),
            ),
            (kind, _) => {
                return Err(Error::InvalidParameter(format!(
                    "family {} was built without its background solution",
                    kind.name()
                )))
            }
        };
        Ok(InitialData {
            state,
            background,
            notes,
        })
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn grid() -> RadialGrid {
        RadialGrid::uniform(20.0, 0.01).unwrap()
    }

    fn at(grid: &RadialGrid, s: &FieldState, r: f64) -> (f64, f64) {
        let i = grid
            .radii()
            .iter()
            .position(|&x| (x - r).abs() < 1e-9)
            .expect("radius on grid");
        (s.chi[i], s.pi[i])
    }

    #[test]
    fn zero_amplitude_gives_zero_state() {
        let g = grid();
        let states = [
            gaussian(0.0, 5.0, 1.0, &g).unwrap(),
            logarithmic(0.0, 2.0, 1.0, None, &g).unwrap(),
            turok_spergel(0.0, 1.0, &g).unwrap(),
            tanh_family(0.0, 5.0, 1.0, &g).unwrap(),
        ];
        for s in states {
            assert!(s.chi.iter().chain(&s.pi).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn closed_form_spot_values() {
        // A uniform grid whose points include 1, 5 and 7.5.
        let g = RadialGrid::uniform(19.95, 0.1).unwrap();
        let (c, p) = at(&g, &gaussian(0.3, 5.05, 1.0, &g).unwrap(), 5.05);
        assert!((c - 0.3).abs() < 1e-15 && p.abs() < 1e-15);
        let (c, p) = at(&g, &turok_spergel(0.5, 1.05, &g).unwrap(), 1.05);
        assert!((c - PI / 4.0).abs() < 1e-15);
        assert!((p - 0.5 / 1.05).abs() < 1e-15);
        let (c, _) = at(&g, &tanh_family(2.0, 7.55, 1.0, &g).unwrap(), 7.55);
        assert!((c - 1.0).abs() < 1e-15);
        let s = tanh_family(2.0, 7.55, 1.0, &g).unwrap();
        assert!((s.chi[s.len() - 1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn pi_follows_each_prescription() {
        let g = grid();
        let h = 1e-6;
        let fd = |f: &dyn Fn(f64) -> f64, r: f64| (f(r + h) - f(r - h)) / (2.0 * h);
        let gs = gaussian(0.2, 5.0, 1.0, &g).unwrap();
        let ls = logarithmic(0.2, 1.0, 1.0, None, &g).unwrap();
        let ts = tanh_family(0.2, 5.0, 1.5, &g).unwrap();
        for &i in &[37usize, 480, 911] {
            let r = g.radii()[i];
            let gauss = |x: f64| 0.2 * (-(x - 5.0) * (x - 5.0)).exp();
            assert!((gs.pi[i] - fd(&gauss, r)).abs() < 1e-8);
            let log = |x: f64| 0.2 * (x + 1.0).ln() / (x + 1.0);
            assert!((ls.chi[i] - log(r)).abs() < 1e-15);
            assert!((ls.pi[i] - fd(&log, r)).abs() < 1e-8);
            let th = |x: f64| 0.1 * (((x - 5.0) / 1.5).tanh() + 1.0);
            assert!((ts.pi[i] - fd(&th, r)).abs() < 1e-8);
        }
    }

    #[test]
    fn logarithmic_origin_and_tail() {
        assert!(matches!(
            logarithmic(1.0, 0.0, 1.0, None, &grid()),
            Err(Error::Domain(_))
        ));
        // Unramped R0 = 1 vanishes at the origin on its own.
        let (c0, _) = log_profile(0.7, 1.0, 1.0, 0.0);
        assert_eq!(c0, 0.0);
        let (c0, _) = log_profile(0.7, 3.0, 2.0, 0.0);
        assert!((c0 - 0.7 * 3f64.ln() / 2.0).abs() < 1e-15);
        // chi r / ln r creeps toward A.
        let lead = |r: f64| log_profile(0.7, 1.0, 1.0, r).0 * r / r.ln();
        let (a3, a4) = (lead(1e3), lead(1e4));
        assert!((a4 - 0.7).abs() < (a3 - 0.7).abs());
        assert!((a4 - 0.7).abs() < 1e-3);
        // The ramp removes the offset at the origin.
        let g = grid();
        let s = logarithmic(0.7, 3.0, 2.0, None, &g).unwrap();
        assert!(s.chi[0].abs() < 0.1 * c0);
        let r = g.radii()[1500];
        assert!((s.chi[1500] - log_profile(0.7, 3.0, 2.0, r).0).abs() < 1e-12);
    }

    #[test]
    fn turok_spergel_rejects_bad_delta() {
        assert!(turok_spergel(1.0, 0.0, &grid()).is_err());
        assert!(gaussian(1.0, 5.0, -1.0, &grid()).is_err());
    }

    #[test]
    fn family_dispatch_and_backgrounds() {
        let g = grid();
        let fam = Family::new(FamilySpec::new(FamilyKind::TurokSpergel, 0.4, 1.0, 1.0)).unwrap();
        let d = fam.initial_data(0.4, &g).unwrap();
        assert_eq!(d.background, OuterBackground::constant(0.4 * PI));
        let fam = Family::new(FamilySpec::new(FamilyKind::Logarithmic, 1.0, 2.0, 1.0)).unwrap();
        let d = fam.initial_data(1.0, &g).unwrap();
        assert_eq!(d.notes.len(), 1);
        assert!(FamilyKind::parse("gaussian").is_ok());
        assert!(FamilyKind::parse("gauss").is_err());
        for k in FamilyKind::ALL {
            assert_eq!(FamilyKind::parse(k.name()).unwrap(), k);
        }
    }

    #[test]
    fn perturbed_static_pulse_and_fixed_point() {
        let g = RadialGrid::uniform(19.95, 0.1).unwrap();
        let p = solve_static(1.0, 100.0, &StaticOptions::default()).unwrap();
        let s = perturbed_static(&p, 0.0, 5.05, 1.0, &g).unwrap();
        assert!(s.pi.iter().all(|&v| v == 0.0));
        assert!(g.radii().iter().zip(&s.chi).all(|(&r, &c)| c == p.chi(r)));
        let s = perturbed_static(&p, 0.1, 5.05, 1.0, &g).unwrap();
        assert_eq!(at(&g, &s, 5.05).1, 0.0);
        let (_, pi) = at(&g, &s, 6.05);
        assert!((pi - (-0.1 * (-1f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn turok_spergel_slice_from_profile() {
        let g = grid();
        let prof = solve_ab(0, &ShootingOptions::default()).unwrap();
        let s = perturbed_self_similar(&prof, -1.0, 0.0, 5.0, 1.0, &g).unwrap();
        let ts = turok_spergel(1.0, 1.0, &g).unwrap();
        assert_eq!(s.t, -1.0);
        for i in (0..g.len()).step_by(97) {
            assert!((s.chi[i] - ts.chi[i]).abs() < 1e-6, "r = {}", g.radii()[i]);
            assert!((s.pi[i] - ts.pi[i]).abs() < 1e-6);
        }
    }
}

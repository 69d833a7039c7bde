//! Flat `key = value` configuration with dotted namespaces.
//!
//! Every recognised key has a default; a parsed config always holds the full
//! set, so echoing it records every threshold a run used.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// `(key, default, description)`.
pub const KEYS: &[(&str, &str, &str)] = &[
    (
        "run.id",
        "",
        "prefix for output files; empty means the command name",
    ),
    ("model.m", "1", "equivariance winding number"),
    (
        "family.kind",
        "gaussian",
        "gaussian | logarithmic | turok_spergel | tanh | perturbed_static | perturbed_self_similar",
    ),
    ("family.amplitude", "0.1", "A, or epsilon for turok_spergel"),
    ("family.r0", "5", "R0, or Delta for turok_spergel"),
    ("family.width", "1", "delta"),
    ("family.a", "1", "static background slope chi'(0)"),
    ("family.n", "1", "self-similar background branch"),
    (
        "family.t0",
        "-1",
        "launch time of a self-similar background",
    ),
    (
        "family.r_ramp",
        "",
        "origin ramp radius for logarithmic data; empty means automatic",
    ),
    ("grid.r_max", "20", "outer radius"),
    ("grid.h_in", "1e-3", "spacing at the origin"),
    (
        "grid.h_out",
        "0.02",
        "spacing far out; equal to h_in gives a uniform grid",
    ),
    (
        "grid.width",
        "40",
        "index scale of the transition between the two spacings",
    ),
    ("numerics.cfl", "0.5", "time step over minimum spacing"),
    (
        "numerics.iter_tol",
        "1e-10",
        "Crank-Nicolson iteration tolerance",
    ),
    ("numerics.max_iters", "50", "Crank-Nicolson iteration cap"),
    (
        "numerics.outer_stencil",
        "second_order",
        "second_order | first_order",
    ),
    (
        "evolve.duration",
        "30",
        "evolution time from the initial slice",
    ),
    ("evolve.samples", "200", "diagnostic samples per run"),
    ("evolve.snapshots", "20", "evenly spaced snapshots per run"),
    (
        "evolve.snapshot_times",
        "",
        "explicit snapshot times (comma separated); overrides evolve.snapshots",
    ),
    (
        "evolve.probe_radii",
        "",
        "radii at which chi is recorded in the series (comma separated)",
    ),
    (
        "thresholds.theta_blow",
        "1e6",
        "blow-up: central density growth factor",
    ),
    ("thresholds.k", "10", "blow-up: consecutive rising steps"),
    (
        "thresholds.f_disp",
        "1e-3",
        "dispersal: inner energy fraction",
    ),
    (
        "thresholds.sustained",
        "0.1",
        "dispersal: trailing fraction of the run",
    ),
    (
        "thresholds.r_in",
        "",
        "inner-region radius; empty means r_max / 4",
    ),
    (
        "thresholds.promote_chi_range",
        "true",
        "count a range of chi above pi as singular",
    ),
    ("bisect.lo", "1e-3", "dispersing end of the bracket"),
    ("bisect.hi", "3", "collapsing end of the bracket"),
    ("bisect.tol", "1e-8", "relative bracket width to reach"),
    ("bisect.budget", "120", "maximum evolutions"),
    ("ab.n", "1", "self-similar branch"),
    (
        "ab.z_ser",
        "1e-3",
        "series start radius at both singular points",
    ),
    ("ab.match_point", "0.5", "shooting match point"),
    ("ab.res_tol", "1e-8", "profile residual tolerance"),
    ("lambda.min", "-30", "lower end of the eigenvalue scan"),
    ("lambda.max", "5", "upper end of the eigenvalue scan"),
    ("lambda.step", "0.1", "initial scan step"),
    (
        "lambda.count_limit",
        "0",
        "stop after this many eigenvalues; 0 means all",
    ),
    ("static.a", "1", "static slope chi'(0)"),
    (
        "static.r_ode",
        "1000",
        "outer radius of the static integration",
    ),
    ("omega.min", "-10", "lower end of the omega^2 scan"),
    ("omega.max", "0", "upper end of the omega^2 scan"),
    ("omega.points_per_decade", "40", "scan density in |omega^2|"),
    ("sign.base", "static", "static | self_similar"),
    ("sign.a", "1", "static background"),
    ("sign.n", "1", "self-similar background branch"),
    ("sign.t0", "-1", "self-similar launch time"),
    (
        "pulse.amplitude",
        "0.05",
        "pulse amplitude; both signs are run",
    ),
    ("pulse.r0", "3", "pulse centre"),
    ("pulse.width", "1", "pulse width"),
    (
        "scan.eps",
        "0.01,0.1,0.302,0.5,1",
        "epsilon values (ascending)",
    ),
    ("scan.delta", "1", "Turok-Spergel Delta for the scan"),
    ("ss.n", "1", "self-similar branch to compare with"),
    ("ss.z_lo", "0", "lower end of the comparison window in z"),
    ("ss.z_hi", "1", "upper end of the comparison window in z"),
    (
        "ss.first_gap",
        "0.04",
        "T* - t of the first frame, from the bisection's collapse estimate",
    ),
    ("ss.ratio", "1.25", "ratio of consecutive gaps"),
    ("ss.frames", "6", "number of frames"),
    (
        "ss.source",
        "bisect",
        "run id of the bisection whose subcritical end is compared",
    ),
    ("convergence.dr", "0.02", "coarsest uniform spacing"),
    (
        "convergence.levels",
        "3",
        "number of resolutions, each halving dr",
    ),
    ("convergence.t", "5", "comparison time"),
    ("figure.which", "fig1", "fig1 | fig2 | fig3 | fig4"),
    ("figure.n_max", "8", "fig1: highest branch"),
    ("figure.samples", "400", "fig1: points in z"),
    ("fig4.eps", "0.302", "fig4: epsilon"),
    (
        "fig4.delta",
        "1",
        "fig4: Delta (not fixed by any reference run)",
    ),
    (
        "fig4.t",
        "126",
        "fig4: time of the static match; empty means the detected turnaround",
    ),
    ("fig4.r_fit", "30", "fig4: radius of the static match"),
    ("fig4.a_min", "0.005", "fig4: smallest static slope tried"),
    ("fig4.a_max", "1", "fig4: largest static slope tried"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            values: KEYS
                .iter()
                .map(|&(k, v, _)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

fn known(key: &str) -> bool {
    KEYS.iter().any(|&(k, _, _)| k == key)
}

impl Config {
    /// Parse `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                message: format!("expected key = value, got `{line}`"),
            })?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !known(key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Apply a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{pair}`")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("`{key}` is not a configuration key"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|_| Error::Config(format!("cannot parse `{key}` = `{raw}`")))
    }

    /// `None` for an empty value.
    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        if self.raw(key).is_empty() {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    /// Comma-separated list; empty gives an empty list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let raw = self.raw(key);
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::Config(format!("cannot parse `{s}` in `{key}`")))
            })
            .collect()
    }

    /// Every key with its value, one per line, in key order.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

//! Driving an evolution and recording diagnostics along the way.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{weighted_sum, FieldState, Model, StepScratch};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SnapshotPolicy {
    None,
    /// Evenly spaced in time, including both ends.
    Count(usize),
    /// Explicit times; each snapshot is taken at the first step at or past it.
    Times(Vec<f64>),
}

/// Halt once the central density exceeds `theta` times its initial value
/// and has risen over the last `k` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowUpTrigger {
    pub theta: f64,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSpec {
    /// Number of diagnostic samples across the run.
    pub samples: usize,
    pub snapshots: SnapshotPolicy,
    /// Inner-region radius for central density and inner energy;
    /// `None` means a quarter of `r_max`.
    pub r_in: Option<f64>,
    pub probe_radii: Vec<f64>,
    pub blow_up: Option<BlowUpTrigger>,
    /// Per-step central density history kept at the end of the run.
    pub tail_len: usize,
}

impl Default for MonitorSpec {
    fn default() -> Self {
        Self {
            samples: 200,
            snapshots: SnapshotPolicy::Count(20),
            r_in: None,
            probe_radii: Vec::new(),
            blow_up: Some(BlowUpTrigger { theta: 1e6, k: 10 }),
            tail_len: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSample {
    pub t: f64,
    pub energy: f64,
    /// Energy inside `r_in`.
    pub inner_energy: f64,
    /// Max of `rho / r^2` inside `r_in`.
    pub central_density: f64,
    /// `max chi - min chi`, with the origin value 0 included.
    pub chi_range: f64,
    /// Mean radius inside `r_in` weighted by `rho / r^2` in `dr`. The
    /// per-volume weighting keeps slowly decaying tails from swamping it.
    pub centroid: f64,
    pub chi_probes: Vec<f64>,
    /// Most fixed-point iterations taken by any step since the last sample.
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub index: usize,
    pub t: f64,
    pub chi: Vec<f64>,
    pub pi: Vec<f64>,
    pub rho: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Halt {
    Completed,
    BlowUp { t: f64 },
    StepDivergence { t: f64, residual: f64 },
    Poisoned { t: f64, index: usize },
}

impl Halt {
    pub fn time(&self) -> Option<f64> {
        match *self {
            Halt::Completed => None,
            Halt::BlowUp { t } | Halt::StepDivergence { t, .. } | Halt::Poisoned { t, .. } => {
                Some(t)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolutionRecord {
    pub radii: Vec<f64>,
    pub dt: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub r_in: f64,
    pub probe_radii: Vec<f64>,
    pub samples: Vec<DiagnosticSample>,
    pub snapshots: Vec<Snapshot>,
    /// `(t, central density)` for the last steps of the run.
    pub tail: Vec<(f64, f64)>,
    /// First time the range of `chi` exceeded `pi`.
    pub chi_range_exceeded_at: Option<f64>,
    pub halt: Halt,
    /// State at the end of the run (last good state on a halt).
    #[serde(skip)]
    pub final_state: Option<FieldState>,
}

impl EvolutionRecord {
    pub fn initial(&self) -> &DiagnosticSample {
        &self.samples[0]
    }

    pub fn last(&self) -> &DiagnosticSample {
        &self.samples[self.samples.len() - 1]
    }

    pub fn peak_central_density(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.central_density)
            .chain(self.tail.iter().map(|&(_, d)| d))
            .fold(0.0, f64::max)
    }
}

struct Probe {
    i_in: usize,
    probes: Vec<f64>,
}

impl Probe {
    fn central_density(&self, model: &Model, state: &FieldState, rho: &mut [f64]) -> f64 {
        model.energy_density_into(state, rho);
        let r = model.grid.radii();
        (0..=self.i_in)
            .map(|i| rho[i] / (r[i] * r[i]))
            .fold(0.0, f64::max)
    }

    fn sample(
        &self,
        model: &Model,
        state: &FieldState,
        rho: &mut [f64],
        iterations: usize,
    ) -> DiagnosticSample {
        let central_density = self.central_density(model, state, rho);
        let r = model.grid.radii();
        let jac = model.grid.jacobian();
        let energy = weighted_sum(rho, jac, rho.len());
        let inner_energy = weighted_sum(rho, jac, self.i_in + 1);
        let (mass, moment) = (0..=self.i_in).fold((0.0, 0.0), |(m, mo), i| {
            let w = rho[i] * jac[i] / (r[i] * r[i]);
            (m + w, mo + r[i] * w)
        });
        let centroid = if mass > 0.0 { moment / mass } else { 0.0 };
        let (lo, hi) = state
            .chi
            .iter()
            .fold((0.0f64, 0.0f64), |(lo, hi), &c| (lo.min(c), hi.max(c)));
        let chi_probes = self
            .probes
            .iter()
            .map(|&p| super::interpolate(r, &state.chi, p))
            .collect();
        DiagnosticSample {
            t: state.t,
            energy,
            inner_energy,
            central_density,
            chi_range: hi - lo,
            centroid,
            chi_probes,
            iterations,
        }
    }
}

/// Evolve `initial` to `t_end`, sampling diagnostics and snapshots.
///
/// Step divergence, a poisoned state or the blow-up trigger end the run
/// early; the reason is stored in the record rather than returned as an
/// error so the outcome can still be classified.
pub fn evolve(
    model: &Model,
    initial: FieldState,
    t_end: f64,
    spec: &MonitorSpec,
) -> Result<EvolutionRecord> {
    model.check(&initial)?;
    let t0 = initial.t;
    if !(t_end > t0) {
        return Err(Error::InvalidParameter(format!(
            "t_end = {t_end} must exceed the initial time {t0}"
        )));
    }
    let grid = &model.grid;
    let n = grid.len();
    let r_in = spec.r_in.unwrap_or(0.25 * grid.r_max());
    let probe = Probe {
        i_in: grid.last_index_within(r_in).unwrap_or(0),
        probes: spec.probe_radii.clone(),
    };

    let n_steps = ((t_end - t0) / model.dt()).ceil().max(1.0) as usize;
    let dt = (t_end - t0) / n_steps as f64;
    let sample_every = (n_steps / spec.samples.max(1)).max(1);
    let mut snap_times: VecDeque<f64> = match &spec.snapshots {
        SnapshotPolicy::None => VecDeque::new(),
        SnapshotPolicy::Count(0) => VecDeque::new(),
        SnapshotPolicy::Count(1) => VecDeque::from([t0]),
        SnapshotPolicy::Count(c) => (0..*c)
            .map(|k| t0 + (t_end - t0) * k as f64 / (*c - 1) as f64)
            .collect(),
        SnapshotPolicy::Times(ts) => {
            let mut ts = ts.clone();
            ts.sort_by(f64::total_cmp);
            ts.into_iter().collect()
        }
    };

    let mut rho = vec![0.0; n];
    let mut scratch = StepScratch::new(n);
    let mut state = initial;
    let mut next = state.clone();
    let mut samples = vec![probe.sample(model, &state, &mut rho, 0)];
    let initial_central = samples[0].central_density;
    let mut snapshots = Vec::new();
    let mut tail: VecDeque<(f64, f64)> = VecDeque::with_capacity(spec.tail_len + 1);
    tail.push_back((t0, initial_central));
    let mut chi_range_exceeded_at = (samples[0].chi_range > std::f64::consts::PI).then_some(t0);

    let take_snapshots = |state: &FieldState,
                          rho: &mut [f64],
                          snap_times: &mut VecDeque<f64>,
                          snapshots: &mut Vec<Snapshot>,
                          force: bool| {
        while let Some(&ts) = snap_times.front() {
            if state.t + 0.5 * dt < ts && !force {
                break;
            }
            snap_times.pop_front();
            model.energy_density_into(state, rho);
            snapshots.push(Snapshot {
                index: snapshots.len(),
                t: state.t,
                chi: state.chi.clone(),
                pi: state.pi.clone(),
                rho: rho.to_vec(),
            });
            if force {
                break;
            }
        }
    };
    take_snapshots(&state, &mut rho, &mut snap_times, &mut snapshots, false);

    let mut halt = Halt::Completed;
    let mut max_iters = 0;
    for k in 1..=n_steps {
        match model.step_into(&state, dt, &mut next, &mut scratch) {
            Ok(info) => max_iters = max_iters.max(info.iterations),
            Err(Error::StepDivergence { t, residual, .. }) => {
                halt = Halt::StepDivergence { t, residual };
                break;
            }
            Err(e) => return Err(e),
        }
        // Exact end time, free of accumulated rounding.
        next.t = if k == n_steps {
            t_end
        } else {
            t0 + k as f64 * dt
        };
        if let Some(index) = next.poisoned_index() {
            halt = Halt::Poisoned { t: next.t, index };
            break;
        }
        std::mem::swap(&mut state, &mut next);

        let central = probe.central_density(model, &state, &mut rho);
        if tail.len() == spec.tail_len.max(1) {
            tail.pop_front();
        }
        tail.push_back((state.t, central));
        if chi_range_exceeded_at.is_none() {
            let (lo, hi) = state
                .chi
                .iter()
                .fold((0.0f64, 0.0f64), |(lo, hi), &c| (lo.min(c), hi.max(c)));
            if hi - lo > std::f64::consts::PI {
                chi_range_exceeded_at = Some(state.t);
            }
        }
        let triggered = spec
            .blow_up
            .is_some_and(|trig| central > trig.theta * initial_central && rising(&tail, trig.k));

        take_snapshots(&state, &mut rho, &mut snap_times, &mut snapshots, false);
        if k % sample_every == 0 || k == n_steps || triggered {
            samples.push(probe.sample(model, &state, &mut rho, max_iters));
            max_iters = 0;
        }
        if triggered {
            halt = Halt::BlowUp { t: state.t };
            break;
        }
    }
    if halt != Halt::Completed {
        if samples.last().is_some_and(|s| s.t < state.t) {
            samples.push(probe.sample(model, &state, &mut rho, max_iters));
        }
        // One snapshot of where the run stopped.
        take_snapshots(&state, &mut rho, &mut snap_times, &mut snapshots, true);
    }

    Ok(EvolutionRecord {
        radii: grid.radii().to_vec(),
        dt,
        t_start: t0,
        t_end,
        r_in,
        probe_radii: spec.probe_radii.clone(),
        samples,
        snapshots,
        tail: tail.into_iter().collect(),
        chi_range_exceeded_at,
        halt,
        final_state: Some(state),
    })
}

/// Strictly increasing over the last `k` entries.
pub(crate) fn rising(tail: &VecDeque<(f64, f64)>, k: usize) -> bool {
    if tail.len() < k + 1 {
        return false;
    }
    let start = tail.len() - k - 1;
    (start..tail.len() - 1).all(|i| tail[i + 1].1 > tail[i].1)
}

//! Outcome classification and the searches built on it: critical-amplitude
//! bisection, collapse-time fits, sign tests about background solutions,
//! the epsilon regime scan and comparison with a self-similar profile.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolver::{
    evolve, BlowUpTrigger, EvolutionRecord, GridSpec, Halt, Model, ModelParams, MonitorSpec,
    RadialGrid, SchemeOptions, Snapshot, SnapshotPolicy,
};
use crate::initial_data::{Family, FamilyKind, FamilySpec};
use crate::self_similar::SelfSimilarProfile;
use crate::static_solutions::{solve_static, StaticOptions, DEFAULT_R_ODE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Singular,
    Dispersed,
    Ambiguous,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Singular => "singular",
            Verdict::Dispersed => "dispersed",
            Verdict::Ambiguous => "ambiguous",
        }
    }
}

/// Classifier settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Central density growth factor that counts as blow-up.
    pub theta_blow: f64,
    /// Consecutive rising steps required alongside `theta_blow`.
    pub k: usize,
    /// Inner energy fraction of the initial total that counts as dispersed.
    pub f_disp: f64,
    /// Trailing fraction of the run over which dispersal must hold.
    pub sustained: f64,
    /// Inner-region radius; `None` means a quarter of `r_max`.
    pub r_in: Option<f64>,
    /// Treat a range of `chi` above `pi` as a singular verdict.
    pub promote_chi_range: bool,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            theta_blow: 1e6,
            k: 10,
            f_disp: 1e-3,
            sustained: 0.1,
            r_in: None,
            promote_chi_range: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub initial_central_density: f64,
    pub peak_central_density: f64,
    pub growth_factor: f64,
    pub chi_range_max: f64,
    /// First time the range of `chi` exceeded `pi`.
    pub chi_range_exceeded_at: Option<f64>,
    pub halt: Halt,
    pub halt_time: Option<f64>,
    /// Inner energy over the initial total at the end of the run.
    pub final_inner_fraction: f64,
    pub blow_up_trigger: bool,
    pub dispersal_trigger: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeLabel {
    pub verdict: Verdict,
    pub evidence: Evidence,
}

fn rising(tail: &[(f64, f64)], k: usize) -> bool {
    tail.len() > k
        && tail[tail.len() - k - 1..]
            .windows(2)
            .all(|w| w[1].1 > w[0].1)
}

/// Label a finished evolution.
pub fn classify_outcome(record: &EvolutionRecord, th: &Thresholds) -> OutcomeLabel {
    let first = record.initial();
    let last = record.last();
    let rho0 = first.central_density;
    let peak = record.peak_central_density();
    let growth_factor = if rho0 > 0.0 { peak / rho0 } else { 0.0 };
    let chi_range_max = record
        .samples
        .iter()
        .map(|s| s.chi_range)
        .fold(0.0, f64::max);
    let e0 = first.energy;
    let final_inner_fraction = if e0 > 0.0 {
        last.inner_energy / e0
    } else {
        0.0
    };
    let mut notes = Vec::new();

    let tail_rising = rising(
        &record.tail,
        th.k.min(record.tail.len().saturating_sub(1)).max(1),
    );
    let blow_up_trigger = match record.halt {
        Halt::BlowUp { .. } => true,
        Halt::StepDivergence { .. } => {
            notes.push("step iteration diverged".into());
            tail_rising
        }
        Halt::Poisoned { .. } => {
            notes.push("state became non-finite".into());
            tail_rising
        }
        Halt::Completed => peak > th.theta_blow * rho0 && rho0 > 0.0 && rising(&record.tail, th.k),
    };

    let span = record.t_end - record.t_start;
    let window_start = record.t_end - th.sustained * span;
    let window: Vec<_> = record
        .samples
        .iter()
        .filter(|s| s.t >= window_start - 1e-12 * span)
        .collect();
    let dispersal_trigger = record.halt == Halt::Completed
        && !window.is_empty()
        && window
            .iter()
            .all(|s| s.inner_energy <= th.f_disp * e0 && s.chi_range < PI);
    if e0 == 0.0 {
        notes.push("zero data".into());
    }

    let verdict = if blow_up_trigger {
        Verdict::Singular
    } else if th.promote_chi_range && record.chi_range_exceeded_at.is_some() {
        notes.push("range of chi exceeded pi; promoted to singular".into());
        Verdict::Singular
    } else if dispersal_trigger {
        Verdict::Dispersed
    } else {
        Verdict::Ambiguous
    };
    OutcomeLabel {
        verdict,
        evidence: Evidence {
            initial_central_density: rho0,
            peak_central_density: peak,
            growth_factor,
            chi_range_max,
            chi_range_exceeded_at: record.chi_range_exceeded_at,
            halt: record.halt.clone(),
            halt_time: record.halt.time(),
            final_inner_fraction,
            blow_up_trigger,
            dispersal_trigger,
            notes,
        },
    }
}

/// Everything needed to run one member of a family to a verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub grid: GridSpec,
    pub scheme: SchemeOptions,
    pub m: u32,
    /// Evolution time measured from the initial slice.
    pub duration: f64,
    pub samples: usize,
    pub snapshots: SnapshotPolicy,
    pub probe_radii: Vec<f64>,
    pub thresholds: Thresholds,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            scheme: SchemeOptions::default(),
            m: 1,
            duration: 30.0,
            samples: 200,
            snapshots: SnapshotPolicy::Count(20),
            probe_radii: Vec::new(),
            thresholds: Thresholds::default(),
        }
    }
}

/// One evolution with its verdict.
#[derive(Debug, Clone)]
pub struct Run {
    pub amplitude: f64,
    pub record: EvolutionRecord,
    pub label: OutcomeLabel,
    /// Notes from the initial-data construction.
    pub notes: Vec<String>,
}

impl RunSettings {
    pub fn monitor(&self) -> MonitorSpec {
        MonitorSpec {
            samples: self.samples,
            snapshots: self.snapshots.clone(),
            r_in: self.thresholds.r_in,
            probe_radii: self.probe_radii.clone(),
            blow_up: Some(BlowUpTrigger {
                theta: self.thresholds.theta_blow,
                k: self.thresholds.k,
            }),
            tail_len: 4096,
        }
    }

    pub fn model(&self, grid: RadialGrid) -> Result<Model> {
        let mut model = Model::new(grid).with_scheme(self.scheme);
        model.params = ModelParams::new(self.m)?;
        Ok(model)
    }

    pub fn run(&self, family: &Family, amplitude: f64) -> Result<Run> {
        let grid = self.grid.build()?;
        let data = family.initial_data(amplitude, &grid)?;
        let model = self.model(grid)?.with_background(data.background);
        let t0 = data.state.t;
        let record = evolve(&model, data.state, t0 + self.duration, &self.monitor())?;
        let label = classify_outcome(&record, &self.thresholds);
        Ok(Run {
            amplitude,
            record,
            label,
            notes: data.notes,
        })
    }

    /// Twice as long on a grid twice as fine: the one retry an ambiguous
    /// bisection probe gets.
    pub fn escalated(&self) -> Self {
        Self {
            grid: self.grid.refined(2.0),
            duration: 2.0 * self.duration,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub parameter: f64,
    pub verdict: Verdict,
    /// Whether this probe is the escalated retry of an ambiguous one.
    pub escalated: bool,
    pub peak_central_density: f64,
    pub halt_time: Option<f64>,
    pub collapse_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    Converged,
    BudgetExhausted,
    /// A probe stayed ambiguous after escalation.
    Ambiguous,
    /// Verdicts along a round of probes were not monotone in the parameter.
    NonMonotone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalSearchResult {
    pub family: FamilySpec,
    pub bracket: (f64, f64),
    pub p_star: f64,
    pub status: SearchStatus,
    pub history: Vec<Probe>,
    /// Collapse time of the singular run nearest the threshold.
    pub t_star: Option<f64>,
}

impl CriticalSearchResult {
    pub fn relative_width(&self) -> f64 {
        (self.bracket.1 - self.bracket.0).abs() / self.p_star.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectOptions {
    /// Target bracket width relative to its midpoint.
    pub tol: f64,
    /// Maximum number of evolutions, endpoint checks included.
    pub budget: usize,
    /// Interior points evaluated concurrently per round; 1 is plain
    /// bisection.
    pub fanout: usize,
}

impl Default for BisectOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            budget: 120,
            fanout: 1,
        }
    }
}

fn probe_of(run: &Run, escalated: bool) -> Probe {
    Probe {
        parameter: run.amplitude,
        verdict: run.label.verdict,
        escalated,
        peak_central_density: run.label.evidence.peak_central_density,
        halt_time: run.label.evidence.halt_time,
        collapse_time: (run.label.verdict == Verdict::Singular)
            .then(|| collapse_time(&run.record).ok().map(|f| f.t_star))
            .flatten(),
    }
}

/// Bisection (or multisection with `fanout > 1`) for the amplitude that
/// separates dispersal from collapse.
pub fn bisect_critical(
    family: &Family,
    settings: &RunSettings,
    p_lo: f64,
    p_hi: f64,
    opts: &BisectOptions,
) -> Result<CriticalSearchResult> {
    if !(p_lo.is_finite() && p_hi.is_finite()) || p_lo == p_hi {
        return Err(Error::InvalidBracket(format!(
            "degenerate bracket ({p_lo}, {p_hi})"
        )));
    }
    let mut history = Vec::new();
    let mut used = 0;
    // Evaluate with one escalated retry for ambiguous verdicts.
    let judge = |p: f64| -> Result<(Vec<Probe>, Verdict)> {
        let run = settings.run(family, p)?;
        let mut probes = vec![probe_of(&run, false)];
        if run.label.verdict != Verdict::Ambiguous {
            return Ok((probes, run.label.verdict));
        }
        let retry = settings.escalated().run(family, p)?;
        probes.push(probe_of(&retry, true));
        Ok((probes, retry.label.verdict))
    };

    let (lo_res, hi_res) = rayon::join(|| judge(p_lo), || judge(p_hi));
    let (lo_probes, lo_v) = lo_res?;
    let (hi_probes, hi_v) = hi_res?;
    used += lo_probes.len() + hi_probes.len();
    history.extend(lo_probes);
    history.extend(hi_probes);
    if lo_v != Verdict::Dispersed || hi_v != Verdict::Singular {
        return Err(Error::InvalidBracket(format!(
            "expected dispersal at {p_lo} and collapse at {p_hi}, got {} and {}",
            lo_v.name(),
            hi_v.name()
        )));
    }

    let (mut lo, mut hi) = (p_lo, p_hi);
    let fanout = opts.fanout.max(1);
    let width = |lo: f64, hi: f64| (hi - lo).abs() / (0.5 * (lo + hi)).abs();
    let mut status = SearchStatus::Converged;
    while width(lo, hi) > opts.tol {
        if used + fanout > opts.budget {
            status = SearchStatus::BudgetExhausted;
            break;
        }
        let points: Vec<f64> = (1..=fanout)
            .map(|j| lo + (hi - lo) * j as f64 / (fanout + 1) as f64)
            .collect();
        let results: Vec<Result<(Vec<Probe>, Verdict)>> =
            points.par_iter().map(|&p| judge(p)).collect();
        let mut verdicts = Vec::with_capacity(fanout);
        for r in results {
            let (probes, v) = r?;
            used += probes.len();
            history.extend(probes);
            verdicts.push(v);
        }
        if verdicts.contains(&Verdict::Ambiguous) {
            status = SearchStatus::Ambiguous;
            break;
        }
        // New bracket: last dispersed point below the first singular one.
        let first_singular = verdicts
            .iter()
            .position(|&v| v == Verdict::Singular)
            .unwrap_or(fanout);
        if verdicts[first_singular..].contains(&Verdict::Dispersed) {
            status = SearchStatus::NonMonotone;
        }
        if first_singular > 0 {
            lo = points[first_singular - 1];
        }
        if first_singular < fanout {
            hi = points[first_singular];
        }
        if status == SearchStatus::NonMonotone {
            break;
        }
    }

    let t_star = history
        .iter()
        .filter(|p| p.verdict == Verdict::Singular && p.collapse_time.is_some())
        .min_by(|a, b| {
            (a.parameter - hi)
                .abs()
                .total_cmp(&(b.parameter - hi).abs())
        })
        .and_then(|p| p.collapse_time);
    Ok(CriticalSearchResult {
        family: family.spec.clone(),
        bracket: (lo, hi),
        p_star: 0.5 * (lo + hi),
        status,
        history,
        t_star,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseFit {
    pub t_star: f64,
    /// RMS misfit of the linear fit relative to the fitted range.
    pub residual: f64,
    pub points: usize,
}

/// Collapse time from the blow-up of the central density. Self-similar
/// collapse gives `rho_c ~ (T - t)^-2`, so `rho_c^(-1/2)` is fitted by a
/// line in `t` over the part of the tail between 1e-4 and 1e-2 of the
/// final density (or from the start of the kept history), below where the
/// grid stops resolving the collapse.
pub fn collapse_time(record: &EvolutionRecord) -> Result<CollapseFit> {
    if !matches!(record.halt, Halt::BlowUp { .. }) {
        return Err(Error::CollapseTime(
            "run did not end in the blow-up trigger".into(),
        ));
    }
    let top = record.tail.last().map(|&(_, d)| d).unwrap_or(0.0);
    let (lo, hi) = (1e-4 * top, 1e-2 * top);
    let start = record
        .tail
        .iter()
        .rposition(|&(_, d)| d < lo)
        .map_or(0, |i| i + 1);
    let end = record
        .tail
        .iter()
        .position(|&(_, d)| d > hi)
        .unwrap_or(record.tail.len());
    let pts = &record.tail[start..end.max(start)];
    if pts.len() < 5 {
        return Err(Error::CollapseTime(format!(
            "only {} points in the fit window",
            pts.len()
        )));
    }
    if pts.windows(2).any(|w| w[1].1 <= w[0].1) {
        return Err(Error::CollapseTime(
            "central density not monotone in the fit window".into(),
        ));
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.powf(-0.5)).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::CollapseTime("fitted slope is not negative".into()));
    }
    let icept = my - slope * mx;
    let rms = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - icept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let span =
        ys.iter().cloned().fold(f64::MIN, f64::max) - ys.iter().cloned().fold(f64::MAX, f64::min);
    Ok(CollapseFit {
        t_star: -icept / slope,
        residual: rms / span,
        points: pts.len(),
    })
}

/// Background solution for a sign test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignBase {
    SelfSimilar { n: usize, t0: f64 },
    Static { a: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub amplitude: f64,
    pub r0: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignVerdict {
    /// Positive pulse collapses, negative disperses.
    SignSplit,
    NoSplit,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub base: SignBase,
    pub pulse: Pulse,
    pub plus: OutcomeLabel,
    pub minus: OutcomeLabel,
    pub verdict: SignVerdict,
}

/// Family for a base solution with the pulse shape of `pulse`.
pub fn sign_family(base: SignBase, pulse: &Pulse) -> Result<Family> {
    let (kind, extras_n, extras_t0, extras_a) = match base {
        SignBase::SelfSimilar { n, t0 } => (FamilyKind::PerturbedSelfSimilar, n, t0, 1.0),
        SignBase::Static { a } => (FamilyKind::PerturbedStatic, 1, -1.0, a),
    };
    let mut spec = FamilySpec::new(kind, pulse.amplitude, pulse.r0, pulse.width);
    spec.extras.n = extras_n;
    spec.extras.t0 = extras_t0;
    spec.extras.a = extras_a;
    Family::new(spec)
}

/// Evolve the base solution with `+pulse` and `-pulse` and compare.
pub fn attractor_sign_test(
    base: SignBase,
    pulse: &Pulse,
    settings: &RunSettings,
) -> Result<SignTest> {
    sign_test_runs(base, pulse, settings).map(|(t, _, _)| t)
}

/// [`attractor_sign_test`] keeping the two runs.
pub fn sign_test_runs(
    base: SignBase,
    pulse: &Pulse,
    settings: &RunSettings,
) -> Result<(SignTest, Run, Run)> {
    let family = sign_family(base, pulse)?;
    let a = pulse.amplitude.abs();
    let (plus, minus) = rayon::join(|| settings.run(&family, a), || settings.run(&family, -a));
    let (plus, minus) = (plus?, minus?);
    let verdict = match (plus.label.verdict, minus.label.verdict) {
        (Verdict::Ambiguous, _) | (_, Verdict::Ambiguous) => SignVerdict::Indeterminate,
        (Verdict::Singular, Verdict::Dispersed) => SignVerdict::SignSplit,
        _ => SignVerdict::NoSplit,
    };
    let test = SignTest {
        base,
        pulse: *pulse,
        plus: plus.label.clone(),
        minus: minus.label.clone(),
        verdict,
    };
    Ok((test, plus, minus))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Disperse,
    TurnaroundCollapse,
    QuickCollapse,
    /// Turned around but neither collapsed nor dispersed within the run.
    Turnaround,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeRow {
    pub epsilon: f64,
    pub verdict: Verdict,
    pub regime: Regime,
    pub turnaround_time: Option<f64>,
    pub peak_central_density: f64,
    pub collapse_time: Option<f64>,
}

/// Time at which the density centroid, having moved out by more than
/// `margin` of its starting radius, reaches its outermost point and then
/// comes back in by the same margin.
///
/// The centroid only sees `r < r_in`, so a pulse leaving that region also
/// pulls it back in; the return only counts while the inner energy stays
/// within `margin` of its value at the outermost point.
pub fn turnaround_time(record: &EvolutionRecord, margin: f64) -> Option<f64> {
    let s = &record.samples;
    let c0 = s.first()?.centroid;
    let (i_max, top) = s
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.centroid.total_cmp(&b.1.centroid))?;
    if top.centroid < c0 * (1.0 + margin) {
        return None;
    }
    s[i_max..]
        .iter()
        .any(|p| {
            p.centroid < top.centroid * (1.0 - margin)
                && p.inner_energy >= top.inner_energy * (1.0 - margin)
        })
        .then_some(top.t)
}

pub fn regime_of(
    label: &OutcomeLabel,
    record: &EvolutionRecord,
    turnaround: Option<f64>,
) -> Regime {
    let first = record.initial();
    let last = record.last();
    match (label.verdict, turnaround) {
        (Verdict::Singular, None) => Regime::QuickCollapse,
        (Verdict::Singular, Some(_)) => Regime::TurnaroundCollapse,
        (_, Some(_)) => Regime::Turnaround,
        (Verdict::Dispersed, None) => Regime::Disperse,
        // Infinite-energy data never empties the inner region; a central
        // density that has decayed well below its start, with the centroid
        // still moving out, is read as dispersal.
        (Verdict::Ambiguous, None)
            if last.central_density < 0.1 * first.central_density
                && last.centroid >= first.centroid =>
        {
            Regime::Disperse
        }
        _ => Regime::Undetermined,
    }
}

/// Run Turok-Spergel data over a grid of `eps` at fixed `delta`.
pub fn regime_scan(
    eps: &[f64],
    delta: f64,
    settings: &RunSettings,
) -> Result<Vec<(RegimeRow, Run)>> {
    if eps.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(
            "epsilon grid must be strictly ascending".into(),
        ));
    }
    let family = Family::new(FamilySpec::new(
        FamilyKind::TurokSpergel,
        eps[0],
        delta,
        1.0,
    ))?;
    eps.par_iter()
        .map(|&e| {
            let run = settings.run(&family, e)?;
            let turnaround = turnaround_time(&run.record, 0.1);
            let row = RegimeRow {
                epsilon: e,
                verdict: run.label.verdict,
                regime: regime_of(&run.label, &run.record, turnaround),
                turnaround_time: turnaround,
                peak_central_density: run.label.evidence.peak_central_density,
                collapse_time: collapse_time(&run.record).ok().map(|f| f.t_star),
            };
            Ok((row, run))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticMatch {
    pub a: f64,
    /// Sup-norm distance of the densities relative to the static peak.
    pub deviation: f64,
    pub t: f64,
}

/// Static solution whose energy density best matches `rho` on
/// `r <= r_fit`, scanning `a` logarithmically and refining by golden
/// section. Uses `chi_a(r) = chi_1(a r)`.
pub fn best_static_match(
    radii: &[f64],
    rho: &[f64],
    t: f64,
    r_fit: f64,
    a_range: (f64, f64),
) -> Result<StaticMatch> {
    let base = solve_static(1.0, DEFAULT_R_ODE, &StaticOptions::default())?;
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(rho)
        .filter(|(&r, _)| r <= r_fit)
        .map(|(&r, &v)| (r, v))
        .collect();
    if pts.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "only {} points inside r_fit = {r_fit}",
            pts.len()
        )));
    }
    let dev = |a: f64| {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for &(r, v) in &pts {
            let (c, dc) = base.eval(a * r);
            let s = c.sin();
            let rs = 0.5 * r * r * a * a * dc * dc + s * s;
            worst = worst.max((rs - v).abs());
            scale = scale.max(rs);
        }
        worst / scale.max(f64::MIN_POSITIVE)
    };
    let (lo, hi) = (a_range.0.ln(), a_range.1.ln());
    let n = 200;
    let (k_best, _) = (0..=n)
        .map(|k| (k, dev((lo + (hi - lo) * k as f64 / n as f64).exp())))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty scan");
    let step = (hi - lo) / n as f64;
    let (mut a, mut b) = (
        lo + step * (k_best as f64 - 1.0),
        lo + step * (k_best as f64 + 1.0),
    );
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let (x1, x2) = (b - g * (b - a), a + g * (b - a));
        if dev(x1.exp()) < dev(x2.exp()) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let a_best = (0.5 * (a + b)).exp();
    Ok(StaticMatch {
        a: a_best,
        deviation: dev(a_best),
        t,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDeviation {
    pub t: f64,
    /// `ln(T* - t)`.
    pub tau: f64,
    /// Sup-norm deviation over the window relative to the profile's maximum.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsComparison {
    /// Collapse time after first-frame alignment.
    pub t_star: f64,
    /// Orientation of the data relative to the profile, +1 or -1.
    pub sign: f64,
    pub z_window: (f64, f64),
    pub frames: Vec<FrameDeviation>,
}

/// Frame times equally spaced in `ln(T* - t)`, from `T* - t_first_gap`
/// inward by factors of `ratio`.
pub fn ss_frame_times(t_star: f64, first_gap: f64, ratio: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| t_star - first_gap * ratio.powi(-(k as i32)))
        .collect()
}

/// Sup-norm deviation of one snapshot from `sign * profile(r / (T* - t))` over
/// the `z` window, relative to the largest profile value there.
pub fn frame_deviation(
    radii: &[f64],
    snap: &Snapshot,
    profile: &SelfSimilarProfile,
    t_star: f64,
    window: (f64, f64),
    sign: f64,
) -> Option<f64> {
    let gap = t_star - snap.t;
    if !(gap > 0.0) {
        return None;
    }
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let mut count = 0;
    for (&r, &c) in radii.iter().zip(&snap.chi) {
        let z = r / gap;
        if z < window.0 || z > window.1 {
            continue;
        }
        let f = sign * profile.chi(z);
        worst = worst.max((c - f).abs());
        scale = scale.max(f.abs());
        count += 1;
    }
    (count >= 4 && scale > 0.0).then(|| worst / scale)
}

/// Compare snapshots with a self-similar profile in `z = r / (T* - t)`.
///
/// `T*` is shifted to minimise the deviation of the first frame only; the
/// later frames are then compared with no further freedom.
pub fn ss_compare(
    radii: &[f64],
    snapshots: &[Snapshot],
    profile: &SelfSimilarProfile,
    t_star: f64,
    window: (f64, f64),
) -> Result<SsComparison> {
    let frames: Vec<&Snapshot> = snapshots.iter().filter(|s| s.t < t_star).collect();
    if frames.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} snapshots before T* = {t_star}",
            frames.len()
        )));
    }
    let first = frames[0];
    let gap0 = t_star - first.t;
    // chi -> -chi is a symmetry; take the orientation of the first frame.
    let sign = radii
        .iter()
        .zip(&first.chi)
        .filter(|(&r, _)| r <= window.1 * gap0)
        .map(|(_, &c)| c)
        .fold(0.0f64, |acc, c| if c.abs() > acc.abs() { c } else { acc })
        .signum();
    let dev0 =
        |ts: f64| frame_deviation(radii, first, profile, ts, window, sign).unwrap_or(f64::INFINITY);
    // Scan then golden-section on log2 of the first gap, within a factor 2.
    let at = |s: f64| first.t + gap0 * s.exp2();
    let n = 100;
    let (k_best, _) = (0..=n)
        .map(|k| (k, dev0(at(-1.0 + 2.0 * k as f64 / n as f64))))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty scan");
    let step = 2.0 / n as f64;
    let (mut a, mut b) = (
        -1.0 + step * (k_best as f64 - 1.0),
        -1.0 + step * (k_best as f64 + 1.0),
    );
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let (x1, x2) = (b - g * (b - a), a + g * (b - a));
        if dev0(at(x1)) < dev0(at(x2)) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let aligned = at(0.5 * (a + b));
    let frames = frames
        .iter()
        .filter_map(|s| {
            frame_deviation(radii, s, profile, aligned, window, sign).map(|d| FrameDeviation {
                t: s.t,
                tau: (aligned - s.t).ln(),
                deviation: d,
            })
        })
        .collect::<Vec<_>>();
    if frames.len() < 2 {
        return Err(Error::InsufficientData(
            "fewer than two frames fall inside the self-similar window".into(),
        ));
    }
    Ok(SsComparison {
        t_star: aligned,
        sign,
        z_window: window,
        frames,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsOptions {
    pub z_window: (f64, f64),
    /// `T* - t` of the first frame, measured from the search's collapse
    /// estimate. That estimate comes from a supercritical run and sits
    /// slightly before the self-similar collapse time.
    pub first_gap: f64,
    /// Ratio of consecutive gaps.
    pub ratio: f64,
    pub frames: usize,
}

impl Default for SsOptions {
    fn default() -> Self {
        Self {
            z_window: (0.0, 1.0),
            first_gap: 0.04,
            ratio: 1.25,
            frames: 6,
        }
    }
}

/// Rerun the subcritical end of a converged search with snapshots placed
/// equally in log time before its collapse time, and compare them with
/// `profile`.
pub fn attractor_comparison(
    family: &Family,
    settings: &RunSettings,
    search: &CriticalSearchResult,
    profile: &SelfSimilarProfile,
    opts: &SsOptions,
) -> Result<(Run, SsComparison)> {
    let t_star = search
        .t_star
        .ok_or_else(|| Error::InsufficientData("search recorded no collapse time".into()))?;
    let run_settings = RunSettings {
        snapshots: SnapshotPolicy::Times(ss_frame_times(
            t_star,
            opts.first_gap,
            opts.ratio,
            opts.frames,
        )),
        ..settings.clone()
    };
    let run = run_settings.run(family, search.bracket.0)?;
    let cmp = ss_compare(
        &run.record.radii,
        &run.record.snapshots,
        profile,
        t_star,
        opts.z_window,
    )?;
    Ok((run, cmp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolver::DiagnosticSample;

    fn sample(t: f64, energy: f64, inner: f64, central: f64, range: f64) -> DiagnosticSample {
        DiagnosticSample {
            t,
            energy,
            inner_energy: inner,
            central_density: central,
            chi_range: range,
            centroid: 1.0,
            chi_probes: Vec::new(),
            iterations: 1,
        }
    }

    fn record(
        samples: Vec<DiagnosticSample>,
        tail: Vec<(f64, f64)>,
        halt: Halt,
    ) -> EvolutionRecord {
        EvolutionRecord {
            radii: vec![0.5, 1.5],
            dt: 0.1,
            t_start: samples[0].t,
            t_end: samples[samples.len() - 1].t,
            r_in: 1.0,
            probe_radii: Vec::new(),
            samples,
            snapshots: Vec::new(),
            tail,
            chi_range_exceeded_at: None,
            halt,
            final_state: None,
        }
    }

    #[test]
    fn zero_record_is_dispersed() {
        let s: Vec<_> = (0..11)
            .map(|k| sample(k as f64, 0.0, 0.0, 0.0, 0.0))
            .collect();
        let rec = record(s, vec![(10.0, 0.0)], Halt::Completed);
        let label = classify_outcome(&rec, &Thresholds::default());
        assert_eq!(label.verdict, Verdict::Dispersed);
        assert!(label.evidence.notes.iter().any(|n| n == "zero data"));
    }

    #[test]
    fn blow_up_halt_is_singular_and_lingering_is_ambiguous() {
        let s = vec![
            sample(0.0, 1.0, 0.5, 1.0, 0.5),
            sample(1.0, 1.0, 0.5, 2e6, 1.0),
        ];
        let rec = record(s.clone(), vec![(1.0, 2e6)], Halt::BlowUp { t: 1.0 });
        assert_eq!(
            classify_outcome(&rec, &Thresholds::default()).verdict,
            Verdict::Singular
        );
        let rec = record(s, vec![(1.0, 2e6)], Halt::Completed);
        assert_eq!(
            classify_outcome(&rec, &Thresholds::default()).verdict,
            Verdict::Ambiguous
        );
    }

    #[test]
    fn chi_range_promotion_is_switchable() {
        let s = vec![
            sample(0.0, 1.0, 0.5, 1.0, 3.5),
            sample(1.0, 1.0, 0.5, 1.0, 3.5),
        ];
        let mut rec = record(s, vec![(1.0, 1.0)], Halt::Completed);
        rec.chi_range_exceeded_at = Some(0.0);
        assert_eq!(
            classify_outcome(&rec, &Thresholds::default()).verdict,
            Verdict::Singular
        );
        let off = Thresholds {
            promote_chi_range: false,
            ..Thresholds::default()
        };
        assert_eq!(classify_outcome(&rec, &off).verdict, Verdict::Ambiguous);
    }

    #[test]
    fn poisoned_without_growth_is_ambiguous() {
        let s = vec![
            sample(0.0, 1.0, 0.5, 1.0, 0.5),
            sample(1.0, 1.0, 0.5, 0.5, 0.5),
        ];
        let tail = vec![(0.8, 1.0), (0.9, 0.7), (1.0, 0.5)];
        let rec = record(s, tail, Halt::Poisoned { t: 1.0, index: 0 });
        let label = classify_outcome(&rec, &Thresholds::default());
        assert_eq!(label.verdict, Verdict::Ambiguous);
        assert!(label
            .evidence
            .notes
            .iter()
            .any(|n| n.contains("non-finite")));
    }

    #[test]
    fn collapse_fit_recovers_known_time() {
        let t_star = 2.5;
        let tail: Vec<(f64, f64)> = (0..4000)
            .map(|k| {
                let t = 2.0 + k as f64 * 1.2e-4;
                (t, 3.0 / (t_star - t).powi(2))
            })
            .collect();
        let s = vec![
            sample(0.0, 1.0, 0.5, 1.0, 0.5),
            sample(2.48, 1.0, 0.5, 1e6, 0.5),
        ];
        let rec = record(s, tail, Halt::BlowUp { t: 2.48 });
        let fit = collapse_time(&rec).unwrap();
        assert!((fit.t_star - t_star).abs() < 1e-9, "{fit:?}");
        let s = vec![
            sample(0.0, 1.0, 0.5, 1.0, 0.5),
            sample(1.0, 1.0, 0.0, 0.0, 0.5),
        ];
        assert!(collapse_time(&record(s, vec![(1.0, 0.0)], Halt::Completed)).is_err());
    }

    #[test]
    fn frame_times_are_log_spaced() {
        let ts = ss_frame_times(1.0, 0.5, 2.0, 4);
        let taus: Vec<f64> = ts.iter().map(|t| (1.0 - t).ln()).collect();
        for w in taus.windows(2) {
            assert!((w[0] - w[1] - 2f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn turnaround_needs_out_then_in() {
        let mut s: Vec<_> = (0..20)
            .map(|k| sample(k as f64, 1.0, 0.5, 1.0, 0.5))
            .collect();
        for (k, x) in s.iter_mut().enumerate() {
            x.centroid = 1.0 + (k as f64).min(10.0) - (k as f64 - 10.0).max(0.0);
        }
        let rec = record(s.clone(), vec![(19.0, 1.0)], Halt::Completed);
        assert_eq!(turnaround_time(&rec, 0.1), Some(10.0));
        // Same centroid history, but the energy is draining out of r_in.
        let mut leaving = s.clone();
        for (k, x) in leaving.iter_mut().enumerate() {
            x.inner_energy = 0.5 * 0.8f64.powi((k as i32 - 10).max(0));
        }
        let rec = record(leaving, vec![(19.0, 1.0)], Halt::Completed);
        assert_eq!(turnaround_time(&rec, 0.1), None);
        for (k, x) in s.iter_mut().enumerate() {
            x.centroid = 1.0 + k as f64;
        }
        let rec = record(s, vec![(19.0, 1.0)], Halt::Completed);
        assert_eq!(turnaround_time(&rec, 0.1), None);
    }
}

//! Plot-ready data for the four standard figures.

use rayon::prelude::*;
use serde_json::{json, Value};

use super::{
    family_spec, pulse, run_settings, shooting, sign_base, ss_options, upstream_search, Ctx,
    ExitKind, NumTable,
};
use crate::criticality::{
    attractor_comparison, best_static_match, sign_test_runs, turnaround_time, SearchStatus,
};
use crate::error::{Error, Result};
use crate::initial_data::{Family, FamilyKind, FamilySpec};
use crate::self_similar::solve_ab;
use crate::static_solutions::{solve_static, StaticOptions, DEFAULT_R_ODE};

pub(crate) fn emit_figure_data(ctx: &mut Ctx) -> Result<(Value, ExitKind)> {
    match ctx.cfg.raw("figure.which") {
        "fig1" => fig1(ctx),
        "fig2" => fig2(ctx),
        "fig3" => fig3(ctx),
        "fig4" => fig4(ctx),
        other => Err(Error::Config(format!(
            "figure.which must be fig1, fig2, fig3 or fig4, got `{other}`"
        ))),
    }
}

/// Self-similar profiles `n = 0..=n_max` on a logarithmic grid in `z`.
fn fig1(ctx: &mut Ctx) -> Result<(Value, ExitKind)> {
    let n_max: usize = ctx.cfg.get("figure.n_max")?;
    let samples: usize = ctx.cfg.get("figure.samples")?;
    if samples < 2 {
        return Err(Error::Config("figure.samples must be at least 2".into()));
    }
    let opts = shooting(ctx.cfg)?;
    let profiles = (0..=n_max)
        .into_par_iter()
        .map(|n| solve_ab(n, &opts))
        .collect::<Result<Vec<_>>>()?;
    let mut cols = vec!["z".to_string()];
    cols.extend((0..=n_max).map(|n| format!("n{n}")));
    let mut t = NumTable::new(cols);
    for k in 0..samples {
        let z = 10f64.powf(-2.0 + 4.0 * k as f64 / (samples - 1) as f64);
        let mut row = vec![z];
        row.extend(profiles.iter().map(|p| p.chi(z)));
        t.push(row);
    }
    t.write(&ctx.path("fig1.csv"))?;
    let b: Vec<f64> = profiles.iter().map(|p| p.b).collect();
    Ok((
        json!({ "figure": "fig1", "n_max": n_max, "b": b }),
        ExitKind::Success,
    ))
}

/// Log-time frames of the marginally subcritical run against `AB_n`.
fn fig2(ctx: &mut Ctx) -> Result<(Value, ExitKind)> {
    let (search, upstream) = upstream_search(ctx.dir, ctx.cfg.raw("ss.source"))?;
    if search.status != SearchStatus::Converged {
        return Err(Error::InsufficientData(format!(
            "upstream bisection ended with status {:?}",
            search.status
        )));
    }
    let family = Family::new(search.family.clone())?;
    let profile = solve_ab(ctx.cfg.get("ss.n")?, &shooting(ctx.cfg)?)?;
    let (run, cmp) = attractor_comparison(
        &family,
        &run_settings(&upstream)?,
        &search,
        &profile,
        &ss_options(ctx.cfg)?,
    )?;
    for (k, f) in cmp.frames.iter().take(4).enumerate() {
        let snap = run
            .record
            .snapshots
            .iter()
            .find(|s| s.t == f.t)
            .expect("frame comes from a snapshot");
        let gap = cmp.t_star - snap.t;
        let mut t = NumTable::new(["ln_r", "chi", "profile"]);
        for (&r, &c) in run.record.radii.iter().zip(&snap.chi) {
            t.push(vec![r.ln(), c, cmp.sign * profile.chi(r / gap)]);
        }
        t.write(&ctx.path(&format!("fig2_frame_{k}.csv")))?;
    }
    Ok((
        json!({ "figure": "fig2", "amplitude": run.amplitude, "comparison": cmp }),
        ExitKind::Success,
    ))
}

/// Snapshots of the two perturbed static runs.
fn fig3(ctx: &mut Ctx) -> Result<(Value, ExitKind)> {
    let (test, plus, minus) = sign_test_runs(
        sign_base(ctx.cfg)?,
        &pulse(ctx.cfg)?,
        &run_settings(ctx.cfg)?,
    )?;
    ctx.record("_fig3_plus", &plus.record)?;
    ctx.record("_fig3_minus", &minus.record)?;
    Ok((json!({ "figure": "fig3", "test": test }), ExitKind::Success))
}

/// Energy density of a Turok-Spergel run near its turnaround, against the
/// best-matching static solution.
fn fig4(ctx: &mut Ctx) -> Result<(Value, ExitKind)> {
    let cfg = ctx.cfg;
    let delta: f64 = cfg.get("fig4.delta")?;
    let eps: f64 = cfg.get("fig4.eps")?;
    let family = Family::new(FamilySpec {
        kind: FamilyKind::TurokSpergel,
        amplitude: eps,
        r0: delta,
        ..family_spec(cfg)?
    })?;
    let run = run_settings(cfg)?.run(&family, eps)?;
    let t_turn = turnaround_time(&run.record, 0.1);
    let snaps = &run.record.snapshots;
    if snaps.is_empty() {
        return Err(Error::Config("fig4 needs evolve.snapshots > 0".into()));
    }
    let target = match cfg.opt::<f64>("fig4.t")? {
        Some(t) => t,
        None => t_turn.unwrap_or(run.record.t_end),
    };
    let best = snaps
        .iter()
        .min_by(|a, b| (a.t - target).abs().total_cmp(&(b.t - target).abs()))
        .expect("non-empty");
    let fit = best_static_match(
        &run.record.radii,
        &best.rho,
        best.t,
        cfg.get("fig4.r_fit")?,
        (cfg.get("fig4.a_min")?, cfg.get("fig4.a_max")?),
    )?;
    let base = solve_static(1.0, DEFAULT_R_ODE, &StaticOptions::default())?;
    for s in snaps {
        let mut t = NumTable::new(["r", "rho", "rho_static"]);
        for (&r, &rho) in run.record.radii.iter().zip(&s.rho) {
            t.push(vec![r, rho, base.energy_density(fit.a * r)]);
        }
        t.write(&ctx.path(&format!("fig4_frame_{}.csv", s.index)))?;
    }
    Ok((
        json!({
            "figure": "fig4",
            "epsilon": eps,
            "delta": delta,
            "delta_assumed": true,
            "verdict": run.label.verdict,
            "turnaround_time": t_turn,
            "match": fit,
            "frame_times": snaps.iter().map(|s| s.t).collect::<Vec<_>>(),
        }),
        ExitKind::Success,
    ))
}

//! Evolve the exact AB1 profile and watch it stay self-similar until
//! truncation error feeds its unstable mode.

use wavemap::criticality::{sign_family, ss_compare, ss_frame_times, Pulse, RunSettings, SignBase};
use wavemap::evolver::{GridSpec, SnapshotPolicy};
use wavemap::self_similar::{solve_ab, ShootingOptions};

fn main() -> wavemap::Result<()> {
    let family = sign_family(
        SignBase::SelfSimilar { n: 1, t0: -1.0 },
        &Pulse {
            amplitude: 0.0,
            r0: 0.5,
            width: 0.1,
        },
    )?;
    let mut settings = RunSettings {
        grid: GridSpec {
            h_in: 1e-4,
            ..GridSpec::default()
        },
        duration: 0.99,
        snapshots: SnapshotPolicy::Times(ss_frame_times(0.0, 0.6, 1.5, 8)),
        ..RunSettings::default()
    };
    settings.thresholds.r_in = Some(1.0);
    let run = settings.run(&family, 0.0)?;
    let profile = solve_ab(1, &ShootingOptions::default())?;
    let cmp = ss_compare(
        &run.record.radii,
        &run.record.snapshots,
        &profile,
        0.0,
        (0.0, 1.0),
    )?;
    for f in &cmp.frames {
        println!(
            "T - t = {:.4}: deviation {:.2e}",
            cmp.t_star - f.t,
            f.deviation
        );
    }
    Ok(())
}

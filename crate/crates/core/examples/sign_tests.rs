//! Perturb the self-similar solutions AB1 and AB2 with pulses of both
//! signs. Only AB1 separates collapse from dispersal by the sign.

use wavemap::criticality::{attractor_sign_test, Pulse, RunSettings, SignBase};
use wavemap::evolver::{GridSpec, SnapshotPolicy};

fn main() -> wavemap::Result<()> {
    let mut settings = RunSettings {
        grid: GridSpec {
            h_in: 2e-4,
            ..GridSpec::default()
        },
        duration: 6.0,
        snapshots: SnapshotPolicy::None,
        ..RunSettings::default()
    };
    settings.thresholds.r_in = Some(1.0);
    // Inside the past light cone of the unperturbed collapse at t = 0.
    let pulse = Pulse {
        amplitude: 0.05,
        r0: 0.5,
        width: 0.1,
    };
    for n in [1, 2] {
        let t = attractor_sign_test(SignBase::SelfSimilar { n, t0: -1.0 }, &pulse, &settings)?;
        println!(
            "AB{n}: {:?} (+ {}, - {})",
            t.verdict,
            t.plus.verdict.name(),
            t.minus.verdict.name()
        );
    }
    Ok(())
}

//! Evolve a small Gaussian pulse and print the diagnostics it leaves behind.
//!
//!     cargo run --release --example evolve_gaussian -- 0.2

use wavemap::criticality::RunSettings;
use wavemap::evolver::SnapshotPolicy;
use wavemap::initial_data::{Family, FamilyKind, FamilySpec};

fn main() -> wavemap::Result<()> {
    let amplitude: f64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0.2);
    let family = Family::new(FamilySpec::new(FamilyKind::Gaussian, amplitude, 5.0, 1.0))?;
    let settings = RunSettings {
        duration: 20.0,
        samples: 40,
        snapshots: SnapshotPolicy::None,
        ..RunSettings::default()
    };
    let run = settings.run(&family, amplitude)?;

    println!(
        "{:>8} {:>12} {:>12} {:>12}",
        "t", "energy", "inner", "rho_c"
    );
    for s in &run.record.samples {
        println!(
            "{:8.3} {:12.6e} {:12.6e} {:12.6e}",
            s.t, s.energy, s.inner_energy, s.central_density
        );
    }
    println!(
        "verdict: {} ({:?})",
        run.label.verdict.name(),
        run.record.halt
    );
    Ok(())
}

//! Turok-Spergel data across epsilon on a large domain.

use wavemap::criticality::{regime_scan, RunSettings};
use wavemap::evolver::{GridSpec, SnapshotPolicy};

fn main() -> wavemap::Result<()> {
    let settings = RunSettings {
        grid: GridSpec {
            r_max: 400.0,
            h_in: 0.01,
            h_out: 0.1,
            width: 40.0,
        },
        duration: 200.0,
        snapshots: SnapshotPolicy::None,
        ..RunSettings::default()
    };
    for (row, _) in regime_scan(&[0.01, 0.302, 0.4, 1.0], 1.0, &settings)? {
        println!(
            "eps {:5}: {:9} {:?}, turnaround {:?}",
            row.epsilon,
            row.verdict.name(),
            row.regime,
            row.turnaround_time
        );
    }
    Ok(())
}

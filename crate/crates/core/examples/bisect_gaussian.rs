//! Loose bisection for the collapse threshold of Gaussian data.
//!
//! The default grid is fine for a rough threshold; tight brackets need a
//! finer origin spacing and a higher blow-up threshold (see the README).

use wavemap::criticality::{bisect_critical, BisectOptions, RunSettings};
use wavemap::evolver::SnapshotPolicy;
use wavemap::initial_data::{Family, FamilyKind, FamilySpec};

fn main() -> wavemap::Result<()> {
    let family = Family::new(FamilySpec::new(FamilyKind::Gaussian, 1.0, 5.0, 1.0))?;
    let settings = RunSettings {
        snapshots: SnapshotPolicy::None,
        ..RunSettings::default()
    };
    let opts = BisectOptions {
        tol: 1e-3,
        fanout: rayon::current_num_threads(),
        ..BisectOptions::default()
    };
    let search = bisect_critical(&family, &settings, 1e-3, 3.0, &opts)?;
    for p in &search.history {
        println!(
            "{:.8} {:9} peak {:.3e}",
            p.parameter,
            p.verdict.name(),
            p.peak_central_density
        );
    }
    println!(
        "{:?}: p* = {:.8}, bracket {:?}, T* = {:?}",
        search.status, search.p_star, search.bracket, search.t_star
    );
    Ok(())
}

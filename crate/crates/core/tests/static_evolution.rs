//! The a = 1 static solution under the evolver.
//!
//! It is unstable, so truncation error is amplified by its fastest mode;
//! the drift must shrink with resolution and grow at the rate predicted
//! by the linear spectrum.

use wavemap::criticality::{sign_family, Pulse, RunSettings, SignBase};
use wavemap::evolver::{GridSpec, SnapshotPolicy};
use wavemap::static_solutions::{
    omega_spectrum, solve_static, OmegaOptions, StaticOptions, DEFAULT_R_ODE,
};

/// Sup drift from the static profile at t = 40 and t = 50.
fn drift(scale: f64) -> (f64, f64) {
    let family = sign_family(
        SignBase::Static { a: 1.0 },
        &Pulse {
            amplitude: 0.0,
            r0: 3.0,
            width: 1.0,
        },
    )
    .unwrap();
    let base = solve_static(1.0, DEFAULT_R_ODE, &StaticOptions::default()).unwrap();
    let settings = RunSettings {
        grid: GridSpec {
            r_max: 60.0,
            h_in: 4e-3 * scale,
            h_out: 0.1 * scale,
            width: 40.0,
        },
        duration: 50.0,
        snapshots: SnapshotPolicy::Times(vec![40.0, 50.0]),
        ..RunSettings::default()
    };
    let run = settings.run(&family, 0.0).unwrap();
    let sup = |k: usize| {
        let s = &run.record.snapshots[k];
        run.record
            .radii
            .iter()
            .zip(&s.chi)
            .map(|(&r, &c)| (c - base.chi(r)).abs())
            .fold(0.0, f64::max)
    };
    (sup(0), sup(1))
}

#[test]
fn static_drift_is_discretization_seeded_and_grows_at_the_mode_rate() {
    let (_, coarse) = drift(1.0);
    let (d40, d50) = drift(0.5);
    assert!(d50 < 1e-3, "drift {d50:e}");
    assert!(coarse / d50 > 2.0, "drift {coarse:e} -> {d50:e}");

    let base = solve_static(1.0, DEFAULT_R_ODE, &StaticOptions::default()).unwrap();
    let fastest = omega_spectrum(&base, &OmegaOptions::default())
        .unwrap()
        .iter()
        .map(|m| m.omega_sq)
        .fold(0.0, f64::min);
    let predicted = (-fastest).sqrt();
    let measured = (d50 / d40).ln() / 10.0;
    assert!(
        (measured - predicted).abs() < 0.05 * predicted,
        "growth {measured} vs {predicted}"
    );
}

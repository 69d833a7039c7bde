//! Outcome labels and collapse times on runs with known fates.

use wavemap::criticality::{classify_outcome, collapse_time, RunSettings, Thresholds, Verdict};
use wavemap::evolver::{evolve, GridSpec, Halt, Model, MonitorSpec, SnapshotPolicy};
use wavemap::initial_data::{Family, FamilyKind, FamilySpec};

fn settings(grid: GridSpec, duration: f64) -> RunSettings {
    RunSettings {
        grid,
        duration,
        snapshots: SnapshotPolicy::None,
        ..RunSettings::default()
    }
}

#[test]
fn ground_state_collapse_time_is_recovered() {
    let mut spec = FamilySpec::new(FamilyKind::PerturbedSelfSimilar, 0.0, 3.0, 1.0);
    spec.extras.n = 0;
    let family = Family::new(spec).unwrap();
    let mut last = None;
    for h_in in [1e-3, 5e-4] {
        let grid = GridSpec {
            h_in,
            ..GridSpec::default()
        };
        let run = settings(grid, 2.0).run(&family, 0.0).unwrap();
        assert_eq!(run.label.verdict, Verdict::Singular);
        let fit = collapse_time(&run.record).unwrap();
        assert!(
            fit.t_star.abs() < 2.0 * run.record.dt,
            "T* = {} dt = {}",
            fit.t_star,
            run.record.dt
        );
        if let Some(prev) = last {
            let prev: f64 = prev;
            assert!(fit.t_star.abs() <= prev.abs() + run.record.dt);
        }
        last = Some(fit.t_star);
    }
}

#[test]
fn turok_spergel_unit_collapses_and_small_gaussian_disperses() {
    let ts = Family::new(FamilySpec::new(FamilyKind::TurokSpergel, 1.0, 1.0, 1.0)).unwrap();
    let run = settings(GridSpec::default(), 5.0).run(&ts, 1.0).unwrap();
    assert_eq!(run.label.verdict, Verdict::Singular);
    assert!(matches!(run.record.halt, Halt::BlowUp { t } if (t - 1.0).abs() < 0.01));

    let g = Family::new(FamilySpec::new(FamilyKind::Gaussian, 1e-3, 5.0, 1.0)).unwrap();
    let run = settings(GridSpec::default(), 30.0).run(&g, 1e-3).unwrap();
    assert_eq!(run.label.verdict, Verdict::Dispersed);
    assert!(collapse_time(&run.record).is_err());
}

#[test]
fn verdicts_survive_refinement() {
    let ts = Family::new(FamilySpec::new(FamilyKind::TurokSpergel, 1.0, 1.0, 1.0)).unwrap();
    let g = Family::new(FamilySpec::new(FamilyKind::Gaussian, 1e-3, 5.0, 1.0)).unwrap();
    let coarse = GridSpec::uniform(20.0, 0.02);
    for grid in [coarse, coarse.refined(2.0)] {
        for cfl in [0.5, 0.25] {
            let mut s = settings(grid, 30.0);
            s.scheme.cfl = cfl;
            assert_eq!(s.run(&g, 1e-3).unwrap().label.verdict, Verdict::Dispersed);
            assert_eq!(s.run(&g, 0.0).unwrap().label.verdict, Verdict::Dispersed);
            let mut s = settings(GridSpec::default(), 5.0);
            s.grid = GridSpec {
                h_in: grid.h_in / 20.0,
                ..GridSpec::default()
            };
            s.scheme.cfl = cfl;
            assert_eq!(s.run(&ts, 1.0).unwrap().label.verdict, Verdict::Singular);
        }
    }
}

#[test]
fn zero_data_is_trivially_dispersed() {
    let grid = GridSpec::uniform(10.0, 0.1).build().unwrap();
    let model = Model::new(grid.clone());
    let state = wavemap::evolver::FieldState::zeros(grid.len(), 0.0);
    let rec = evolve(&model, state, 10.0, &MonitorSpec::default()).unwrap();
    let label = classify_outcome(&rec, &Thresholds::default());
    assert_eq!(label.verdict, Verdict::Dispersed);
    assert!(rec.samples.iter().all(|s| s.energy == 0.0));
}

//! Self-convergence of the evolver on smooth Gaussian data.

use wavemap::evolver::{convergence_order, evolve, Model, MonitorSpec, RadialGrid, SnapshotPolicy};
use wavemap::initial_data::{Family, FamilyKind, FamilySpec};

fn main() -> wavemap::Result<()> {
    let family = Family::new(FamilySpec::new(FamilyKind::Gaussian, 0.1, 5.0, 1.0))?;
    let spec = MonitorSpec {
        snapshots: SnapshotPolicy::None,
        blow_up: None,
        ..MonitorSpec::default()
    };
    let g = RadialGrid::uniform(20.0, 0.04)?;
    let grids = [g.clone(), g.refined(2)?, g.refined(4)?];
    let report = convergence_order(&grids, |grid| {
        let data = family.initial_data(0.1, grid)?;
        let model = Model::new(grid.clone()).with_background(data.background);
        let rec = evolve(&model, data.state, 8.0, &spec)?;
        Ok(rec.final_state.expect("kept").chi)
    })?;
    println!("spacings    {:?}", report.spacings);
    println!("differences {:?}", report.differences);
    println!("order       {:.3}", report.order.unwrap_or(f64::NAN));
    Ok(())
}

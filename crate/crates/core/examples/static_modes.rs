//! Static solutions: the rescaling between slopes and the unstable modes
//! of the a = 1 member.

use wavemap::static_solutions::{
    omega_spectrum, solve_static, OmegaOptions, StaticOptions, DEFAULT_R_ODE,
};

fn main() -> wavemap::Result<()> {
    let opts = StaticOptions::default();
    let one = solve_static(1.0, DEFAULT_R_ODE, &opts)?;
    let small = solve_static(0.12, DEFAULT_R_ODE, &opts)?;
    for r in [0.1, 1.0, 10.0, 100.0] {
        println!(
            "r = {r:6}: chi_0.12(r) = {:.12}, chi_1(0.12 r) = {:.12}",
            small.chi(r),
            one.chi(0.12 * r)
        );
    }

    for m in omega_spectrum(&one, &OmegaOptions::default())? {
        println!(
            "w^2 = {:.6e} (doubled R_ode: {:?}, resolved: {})",
            m.omega_sq, m.omega_sq_doubled, m.stable
        );
    }
    Ok(())
}

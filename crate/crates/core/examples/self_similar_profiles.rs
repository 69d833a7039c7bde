//! Shoot for the first few self-similar profiles and their unstable modes.

use wavemap::self_similar::{
    lambda_spectrum, solve_ab, ModeClass, ShootingOptions, SpectrumOptions,
};

fn main() -> wavemap::Result<()> {
    let opts = ShootingOptions::default();
    for n in 0..4 {
        let p = solve_ab(n, &opts)?;
        let spectrum = lambda_spectrum(&p, &SpectrumOptions::default())?;
        let unstable: Vec<String> = spectrum
            .iter()
            .filter(|e| e.classification == ModeClass::Unstable)
            .map(|e| format!("{:.4}", e.lambda))
            .collect();
        println!(
            "AB{n}: b = {:.10}, crossings = {}, chi(inf) = {:.6}, residual = {:.1e}, unstable = [{}]",
            p.b,
            p.count_crossings()?,
            p.chi_infinity(),
            p.residual_norm,
            unstable.join(", ")
        );
    }
    Ok(())
}

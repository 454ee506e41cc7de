//! Gauss–Legendre and Gauss–Hermite rules, and adaptive Gauss–Kronrod.

use riesz::numerics::{adaptive_integrate, adaptive_integrate_with_breaks, gauss_hermite, gauss_legendre};

fn main() -> riesz::Result<()> {
    let gl = gauss_legendre(5, 0.0, 1.0)?;
    println!("5-point Legendre on [0,1]");
    for (x, w) in gl.iter() {
        println!("  x = {x:.15}  w = {w:.15}");
    }
    println!("  ∫ t^9 dt = {:.16} (exact 0.1)", gl.integrate(|t| t.powi(9)));

    let gh = gauss_hermite(20)?;
    let pi_sqrt = std::f64::consts::PI.sqrt();
    println!("20-point Hermite");
    println!("  Σw = {:.16} (√π = {pi_sqrt:.16})", gh.weights().iter().sum::<f64>());
    println!("  ∫ x² e^(-x²) = {:.16} (exact √π/2)", gh.integrate(|x| x * x));

    let smooth = adaptive_integrate(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12)?;
    println!("adaptive ∫₀^π sin = {smooth:.15}");
    let kinked = adaptive_integrate_with_breaks(|x: f64| (x - 0.3).abs(), &[0.0, 0.3, 1.0], 1e-12)?;
    println!("adaptive ∫₀¹ |x - 0.3| = {kinked:.15} (exact 0.29)");
    Ok(())
}

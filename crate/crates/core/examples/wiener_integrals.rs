//! Integrals against the pinned Wiener measure: tensor quadrature, cylinder
//! probabilities and the Monte Carlo oracle side by side.

use riesz::wiener::{
    cylinder_probability, integrate_pointwise_limit, quadrature_refinement, wiener_integral_mc, CylinderSet,
    CylindricalFunctional, Interval, WienerParams, DEFAULT_CYLINDER_TOL, DEFAULT_D,
};

fn main() -> riesz::Result<()> {
    let p = WienerParams::new(0.0, 0.0, 1.0, DEFAULT_D)?;
    println!("mass φ(0, 1) = {}", p.mass());

    let sq = CylindricalFunctional::monomial(vec![0.3], 0, 2)?;
    println!("∫ γ(0.3)² dW: exact {}", p.mass() * 2.0 * p.d * 0.3 * 0.7);
    for row in quadrature_refinement(&sq, &p, &[8, 16, 32])? {
        println!("  n={:3} {} Δ={:?}", row.n_nodes, row.value, row.delta);
    }
    let mc = wiener_integral_mc(&sq, &p, 200_000, 1)?;
    println!("  MC {} ± {}", mc.estimate, mc.stderr);

    let wavy = CylindricalFunctional::new(vec![0.25, 0.5, 0.75], |g| (g[0] - g[2]).cos() * g[1].tanh().powi(2), Some(1.0))?;
    let rows = quadrature_refinement(&wavy, &p, &[8, 16, 24])?;
    let mc = wiener_integral_mc(&wavy, &p, 200_000, 2)?;
    println!("3-time functional: quadrature {} MC {} ± {}", rows[2].value, mc.estimate, mc.stderr);

    let set = CylinderSet::new(vec![0.3, 0.7], vec![Interval::new(0.0, 1.0), Interval::new(-0.5, 0.2)])?;
    let exact = cylinder_probability(&set, &p, DEFAULT_CYLINDER_TOL)?;
    let refined = cylinder_probability(&set.with_free_time(0.5)?, &p, DEFAULT_CYLINDER_TOL)?;
    let mc = wiener_integral_mc(&CylindricalFunctional::indicator(&set)?, &p, 200_000, 3)?;
    println!("cylinder: {exact}, with a free time inserted {refined}, MC {} ± {}", mc.estimate, mc.stderr);

    // Dominated convergence: min(γ², j) increases to γ², dominated by γ².
    let seq: Vec<_> = (1..=12u32)
        .map(|j| CylindricalFunctional::new(vec![0.3], move |g| (g[0] * g[0]).min(j as f64), Some(j as f64)))
        .collect::<riesz::Result<_>>()?;
    let lim = integrate_pointwise_limit(&seq, Some(&sq), &p, 48, 1e-10)?;
    println!("clipped second moments → {} (deltas {:?})", lim.value, lim.deltas);
    Ok(())
}

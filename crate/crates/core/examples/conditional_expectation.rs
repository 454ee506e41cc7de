//! Conditional expectation on a finite space as the density of the
//! restricted measure, checked against the duality identity.

use riesz::conditional::{
    cond_expectation, cond_expectation_l1, holder_bound_check, verify_duality, ConjugateExponents,
    FiniteMeasureSpace, Partition, RandomVariable,
};

fn main() -> riesz::Result<()> {
    let space = FiniteMeasureSpace::new(
        ["hh", "ht", "th", "tt", "edge"].map(String::from).to_vec(),
        vec![0.2, 0.3, 0.25, 0.25, 0.0],
    )?;
    let x = RandomVariable::new(vec![3.0, -1.0, 2.5, -4.0, 7.0])?;
    let g = Partition::parse("hh,ht|th,tt|edge", &space)?;

    let c = cond_expectation(&x, &g, &space)?;
    println!("E(X|G) = {:?}, zero-mass blocks {:?}", c.xi.values(), c.null_blocks);
    let report = verify_duality(&x, &c.xi, &g, &space, 1e-14)?;
    println!("duality residuals {:?} pass={}", report.residuals, report.pass);

    let ladder = cond_expectation_l1(&x, &g, &space, 64)?;
    println!("truncation ladder stopped at j={} converged={}", ladder.level, ladder.converged);
    for (j, (p, m)) in ladder.positive_rungs.iter().zip(&ladder.negative_rungs).enumerate() {
        println!("  j={}: ξ⁺ {:?}  ξ⁻ {:?}", j + 1, p.values(), m.values());
    }

    let coarse = Partition::trivial(space.len());
    let tower = cond_expectation(&c.xi, &coarse, &space)?.xi;
    println!("E(E(X|G)) = {} = E X = {}", tower.values()[0], space.expectation(&x));

    let h = holder_bound_check(&x, &c.xi, ConjugateExponents::new(3.0)?, &space)?;
    println!("Hölder p=3: |E(Xξ)| = {:.4} ≤ {:.4}", h.lhs, h.rhs);
    Ok(())
}

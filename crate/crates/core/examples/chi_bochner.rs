//! The random indicator χ(ω) = 1_(0,ω) with ω uniform on (0,1): its expected
//! norm is 2/3 and its Bochner mean is the function 1 − t.

use riesz::hilbert::{
    bochner_expectation, expected_norm, inner_product, project, riesz_representer, BasisKind, DiscreteHValuedLaw,
    OrthonormalBasis, DEFAULT_OMEGA_NODES,
};

fn main() -> riesz::Result<()> {
    let law = DiscreteHValuedLaw::indicator_example(DEFAULT_OMEGA_NODES)?;
    for kind in [BasisKind::ShiftedLegendre, BasisKind::FourierSine] {
        let basis = OrthonormalBasis::new(kind, 32)?;
        let mean = bochner_expectation(&law, &basis)?;
        let target = project(|t| 1.0 - t, &basis)?;
        println!("{kind:?}");
        println!("  E‖χ‖         = {:.10}", expected_norm(&law, &basis)?);
        println!("  ‖Eχ − (1−t)‖ = {:.3e}", mean.distance(&target)?);
        for t in [0.1, 0.25, 0.5, 0.75, 0.9] {
            println!("  Eχ({t:.2}) = {:.6}", mean.reconstruct(t));
        }
    }

    // The mean represents u ↦ E⟨u, χ⟩; tabulating that functional on the
    // basis and taking its representer gives the same vector.
    let basis = OrthonormalBasis::shifted_legendre(8)?;
    let mean = bochner_expectation(&law, &basis)?;
    let rep = riesz_representer(mean.coeffs(), &basis)?;
    let one = project(|_| 1.0, &basis)?;
    println!("⟨1, Eχ⟩ = {:.12} (exact 1/2)", inner_product(&one, &rep)?);
    Ok(())
}

//! Recover distribution functions from expectation functionals alone.

use riesz::stieltjes::{
    ls_integrate, CdfLike, EmpiricalOracle, LawOracle, RecoveredCdf, RecoveryConfig, ScaledOracle,
};

fn main() -> riesz::Result<()> {
    let tri = CdfLike::triangular(0.0, 0.5, 1.0)?;
    println!("E X² under triangular(0, 0.5, 1) = {:.12}", ls_integrate(|t| t * t, &tri, (0.0, 1.0), 1e-12)?);

    let grid: Vec<f64> = (0..=8).map(|k| -0.25 + 0.1875 * k as f64).collect();
    let laws = [
        ("uniform(0,1)", CdfLike::uniform(0.0, 1.0)?),
        ("triangular(0,.5,1)", tri),
        ("atoms .3@.4 .7@.6", CdfLike::discrete(&[(0.3, 0.4), (0.7, 0.6)])?),
    ];
    for (name, cdf) in laws {
        let oracle = LawOracle::new(cdf.clone());
        let rec = RecoveredCdf::new(&oracle, RecoveryConfig::default())?;
        println!("{name}: total mass {}", rec.total_mass());
        for &x in &grid {
            let e = rec.at(x)?;
            println!("  F({x:+.4}) = {:.6}  exact {:.6}  stopped at j={} m={}", e.value, cdf.normalized(x), e.j, e.m);
        }
    }

    // Sub-probability functional: half the uniform law.
    let half = ScaledOracle {
        inner: LawOracle::new(CdfLike::uniform(0.0, 1.0)?),
        factor: 0.5,
    };
    let rec = RecoveredCdf::new(&half, RecoveryConfig::default())?;
    println!("defective law: F(+∞) ≈ {}", rec.at(10.0)?.value);

    let emp = EmpiricalOracle::new(vec![0.1, 0.2, 0.2, 0.9])?;
    let rec = RecoveredCdf::new(&emp, RecoveryConfig { tol: 1e-8, ..RecoveryConfig::default() })?;
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    println!("empirical jumps: {:?}", rec.detect_jumps(&grid, 1e-4)?);
    Ok(())
}

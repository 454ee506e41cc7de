//! The heat kernel and its Chapman–Kolmogorov identity.

use riesz::wiener::{check_compatibility, heat_kernel};

fn main() -> riesz::Result<()> {
    println!("φ(0, 1, 1/4π) = {}", heat_kernel(0.0, 1.0, 1.0 / (4.0 * std::f64::consts::PI))?);
    println!("φ(1, 1, 1/2)  = {}", heat_kernel(1.0, 1.0, 0.5)?);

    println!("nodes  residual(0,0,0,.5,1,.5)  residual(1,-1,0,.3,1,.5)  residual(.4,2,0,.05,1.2,.8)");
    for n in [8, 16, 32, 64] {
        println!(
            "{n:5}  {:24.3e}  {:24.3e}  {:26.3e}",
            check_compatibility(0.0, 0.0, 0.0, 0.5, 1.0, 0.5, n)?,
            check_compatibility(1.0, -1.0, 0.0, 0.3, 1.0, 0.5, n)?,
            check_compatibility(0.4, 2.0, 0.0, 0.05, 1.2, 0.8, n)?,
        );
    }
    Ok(())
}

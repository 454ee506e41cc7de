//! Brownian-bridge paths and their marginal moments.

use riesz::wiener::{path_rng, sample_bridge, WienerParams};

fn main() -> riesz::Result<()> {
    let p = WienerParams::new(-1.0, 1.0, 2.0, 0.5)?;
    let times: Vec<f64> = (1..20).map(|k| k as f64 * 0.1).collect();
    let path = sample_bridge(&p, &times, &mut path_rng(7, 0))?;
    println!("t,position");
    println!("0,{}", p.x);
    for (t, v) in path.times.iter().zip(&path.positions) {
        println!("{t:.1},{v:.6}");
    }
    println!("{},{}", p.t, p.y);

    let n = 50_000u64;
    let s = 0.5;
    let draws: Vec<f64> = (0..n)
        .map(|i| sample_bridge(&p, &[s], &mut path_rng(11, i)).map(|b| b.positions[0]))
        .collect::<riesz::Result<_>>()?;
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    println!(
        "γ({s}): mean {mean:.4} (exact {:.4}), variance {var:.4} (exact {:.4})",
        p.x + s / p.t * (p.y - p.x),
        2.0 * p.d * s * (p.t - s) / p.t
    );
    Ok(())
}

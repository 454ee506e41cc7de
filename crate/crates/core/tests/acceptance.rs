use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use riesz::conditional::{cond_expectation, cond_expectation_l1, verify_duality, FiniteMeasureSpace, Partition, RandomVariable};
use riesz::hilbert::{self, DiscreteHValuedLaw, OrthonormalBasis};
use riesz::stieltjes::{total_mass, CdfLike, LawOracle, RecoveredCdf, RecoveryConfig};
use riesz::wiener::{
    self, check_compatibility, cylinder_probability, heat_kernel, wiener_integral_mc, wiener_integral_quadrature,
    CylinderSet, CylindricalFunctional, Interval, WienerParams,
};

type Outcome = Result<String, String>;

fn ac1() -> Outcome {
    let start = Instant::now();
    let basis = OrthonormalBasis::shifted_legendre(32).map_err(|e| e.to_string())?;
    let law = DiscreteHValuedLaw::indicator_example(hilbert::DEFAULT_OMEGA_NODES).map_err(|e| e.to_string())?;
    let v = hilbert::expected_norm(&law, &basis).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let err = (v - 2.0 / 3.0).abs();
    let msg = format!("E||chi|| = {v}, |err| = {err:.3e}, {secs:.3}s");
    if err < 1e-4 && secs < 1.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac2() -> Outcome {
    let basis = OrthonormalBasis::shifted_legendre(32).map_err(|e| e.to_string())?;
    let law = DiscreteHValuedLaw::indicator_example(hilbert::DEFAULT_OMEGA_NODES).map_err(|e| e.to_string())?;
    let mean = hilbert::bochner_expectation(&law, &basis).map_err(|e| e.to_string())?;
    let target = hilbert::project(|t| 1.0 - t, &basis).map_err(|e| e.to_string())?;
    let dist = mean.distance(&target).map_err(|e| e.to_string())?;
    // Interior of the 101-point grid on [0, 1].
    let worst = (1..100)
        .map(|k| {
            let t = k as f64 / 100.0;
            (mean.reconstruct(t) - (1.0 - t)).abs()
        })
        .fold(0.0, f64::max);
    let msg = format!("distance {dist:.3e}, pointwise sup {worst:.3e}");
    if dist < 1e-3 && worst < 5e-3 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac3() -> Outcome {
    let tri = |x: f64| {
        if x <= 0.0 {
            0.0
        } else if x <= 0.5 {
            2.0 * x * x
        } else if x < 1.0 {
            1.0 - 2.0 * (1.0 - x) * (1.0 - x)
        } else {
            1.0
        }
    };
    let laws: Vec<(&str, CdfLike, Box<dyn Fn(f64) -> f64>)> = vec![
        ("uniform", CdfLike::uniform(0.0, 1.0).unwrap(), Box::new(|x: f64| x.clamp(0.0, 1.0))),
        ("triangular", CdfLike::triangular(0.0, 0.5, 1.0).unwrap(), Box::new(tri)),
        (
            "two-atom",
            CdfLike::discrete(&[(0.3, 0.4), (0.7, 0.6)]).unwrap(),
            Box::new(|x: f64| if x < 0.3 { 0.0 } else if x < 0.7 { 0.4 } else { 1.0 }),
        ),
    ];
    let grid: Vec<f64> = (0..=100).map(|k| (k as f64 - 25.0) / 50.0).collect();
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, cdf, exact) in laws {
        let oracle = LawOracle::new(cdf);
        let mass = total_mass(&oracle, 64).map_err(|e| format!("{name}: {e}"))?;
        let config = RecoveryConfig {
            j_max: 64,
            m_max: 64,
            ..RecoveryConfig::default()
        };
        let rec = RecoveredCdf::new(&oracle, config).map_err(|e| format!("{name}: {e}"))?;
        let values = rec.eval_grid(&grid).map_err(|e| format!("{name}: {e}"))?;
        let sup = grid
            .iter()
            .zip(&values)
            .map(|(&x, &v)| (v - exact(x)).abs())
            .fold(0.0, f64::max);
        ok &= sup < 5e-3 && (mass - 1.0).abs() < 1e-6;
        parts.push(format!("{name}: sup {sup:.2e}, mass-1 {:.1e}", mass - 1.0));
    }
    let msg = parts.join("; ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn random_partition<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec<usize>> {
    let k = rng.random_range(1..=n);
    let mut blocks = vec![Vec::new(); k];
    for i in 0..n {
        // Every block gets at least one member.
        let b = if i < k { i } else { rng.random_range(0..k) };
        blocks[b].push(i);
    }
    blocks
}

fn ac4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_dual = 0.0f64;
    let mut failures = Vec::new();
    for case in 0..1000 {
        let n = rng.random_range(1..=12);
        let mut probs: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.01..1.0) })
            .collect();
        if probs.iter().all(|&p| p == 0.0) {
            probs[0] = 1.0;
        }
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        let space = match FiniteMeasureSpace::from_probs(probs) {
            Ok(s) => s,
            Err(e) => return Err(format!("case {case}: {e}")),
        };
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x + rng.random_range(0.0..2.0)).collect();
        let x = RandomVariable::new(xs).unwrap();
        let y = RandomVariable::new(ys).unwrap();
        let fine = random_partition(&mut rng, n);
        // A coarser partition: merge consecutive fine blocks.
        let mut coarse: Vec<Vec<usize>> = Vec::new();
        for block in &fine {
            if coarse.is_empty() || rng.random_bool(0.5) {
                coarse.push(block.clone());
            } else {
                coarse.last_mut().unwrap().extend(block);
            }
        }
        let g = Partition::new(fine, n).unwrap();
        let h = Partition::new(coarse, n).unwrap();

        let xi = cond_expectation(&x, &g, &space).unwrap().xi;
        let dual = verify_duality(&x, &xi, &g, &space, 1e-14).unwrap();
        worst_dual = worst_dual.max(dual.max_residual());
        if !dual.pass {
            failures.push(format!("case {case}: duality {:.2e}", dual.max_residual()));
        }
        let tol = |a: f64| 1e-12 * a.abs().max(1.0);

        let xp = x.positive_part();
        let pos = cond_expectation(&xp, &g, &space).unwrap().xi;
        if pos.values().iter().any(|&v| v < 0.0) {
            failures.push(format!("case {case}: positivity"));
        }
        let eta = cond_expectation(&y, &g, &space).unwrap().xi;
        if xi.values().iter().zip(eta.values()).any(|(a, b)| *a > b + tol(*b)) {
            failures.push(format!("case {case}: monotonicity"));
        }
        let tower = cond_expectation(&xi, &h, &space).unwrap().xi;
        let direct = cond_expectation(&x, &h, &space).unwrap().xi;
        if tower.values().iter().zip(direct.values()).any(|(a, b)| (a - b).abs() > tol(*b)) {
            failures.push(format!("case {case}: tower"));
        }
        let (ex, exi) = (space.expectation(&x), space.expectation(&xi));
        if (ex - exi).abs() > tol(ex) {
            failures.push(format!("case {case}: total expectation"));
        }
        let ladder = cond_expectation_l1(&x, &g, &space, 64).unwrap();
        let plus = cond_expectation(&xp, &g, &space).unwrap().xi;
        let minus = cond_expectation(&x.negative_part(), &g, &space).unwrap().xi;
        let split = plus.combine(1.0, &minus, -1.0).unwrap();
        if !ladder.converged || ladder.xi.values() != split.values() {
            failures.push(format!("case {case}: truncation ladder"));
        }
    }
    let msg = format!("1000 instances, worst duality residual {worst_dual:.2e}, {} failures", failures.len());
    if failures.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg}: {}", failures.iter().take(5).cloned().collect::<Vec<_>>().join(", ")))
    }
}

fn ac5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = rng.random_range(-2.0..2.0);
        let z = rng.random_range(-2.0..2.0);
        let u = rng.random_range(0.0..1.0);
        let s = u + rng.random_range(0.05..1.0);
        let t = s + rng.random_range(0.05..1.0);
        let d = rng.random_range(0.1..1.0);
        worst = worst.max(check_compatibility(x, z, u, s, t, d, 64).map_err(|e| e.to_string())?);
    }
    let ladder: Vec<f64> = [8, 16, 32, 64]
        .iter()
        .map(|&n| check_compatibility(0.0, 0.0, 0.0, 0.5, 1.0, 0.5, n).unwrap())
        .collect();
    let monotone = ladder.windows(2).all(|w| w[1] <= w[0]);
    let msg = format!("worst residual {worst:.2e}; ladder {ladder:?}");
    if worst < 1e-8 && monotone {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac6() -> Outcome {
    let p = WienerParams::new(0.4, -0.3, 1.7, 0.5).map_err(|e| e.to_string())?;
    let phi = heat_kernel(p.x - p.y, p.t, p.d).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for times in [vec![0.8], vec![0.3, 1.1], vec![0.2, 0.9, 1.5]] {
        let one = CylindricalFunctional::new(times.clone(), |_| 1.0, Some(1.0)).unwrap();
        let q = wiener_integral_quadrature(&one, &p, 16).map_err(|e| e.to_string())?.value;
        let set = CylinderSet::new(times.clone(), vec![Interval::real_line(); times.len()]).unwrap();
        let c = cylinder_probability(&set, &p, wiener::DEFAULT_CYLINDER_TOL).map_err(|e| e.to_string())?;
        worst = worst.max((q - phi).abs()).max((c - phi).abs());
    }
    let msg = format!("phi = {phi}, worst deviation {worst:.2e}");
    if worst < 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// A polynomial of total degree at most 3 in `tanh(γ(t_i))`, with its sup bound.
fn random_tanh_polynomial<R: Rng>(rng: &mut R, times: Vec<f64>) -> (CylindricalFunctional, f64) {
    let n = times.len();
    let terms: Vec<(f64, Vec<u32>)> = (0..rng.random_range(1..=4))
        .map(|_| {
            let mut powers = vec![0u32; n];
            for _ in 0..rng.random_range(0..=3) {
                powers[rng.random_range(0..n)] += 1;
            }
            (rng.random_range(-1.0..1.0), powers)
        })
        .collect();
    let bound = terms.iter().map(|(c, _)| c.abs()).sum();
    let f = CylindricalFunctional::new(
        times,
        move |p| {
            terms
                .iter()
                .map(|(c, pw)| c * p.iter().zip(pw).map(|(v, &k)| v.tanh().powi(k as i32)).product::<f64>())
                .sum()
        },
        Some(bound),
    )
    .unwrap();
    (f, bound)
}

fn random_times<R: Rng>(rng: &mut R, t: f64, max_n: usize) -> Vec<f64> {
    let n = rng.random_range(1..=max_n);
    let mut times: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.95) * t).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

fn random_params<R: Rng>(rng: &mut R) -> WienerParams {
    WienerParams::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(0.5..2.0),
        rng.random_range(0.2..1.0),
    )
    .unwrap()
}

fn ac7() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_z = 0.0f64;
    let mut misses = 0;
    for k in 0..50u64 {
        let p = random_params(&mut rng);
        let times = random_times(&mut rng, p.t, 3);
        let (f, _) = random_tanh_polynomial(&mut rng, times);
        let q = wiener_integral_quadrature(&f, &p, 32).map_err(|e| e.to_string())?.value;
        let mc = wiener_integral_mc(&f, &p, 100_000, 700 + k).map_err(|e| e.to_string())?;
        // Constant integrands have zero variance; rounding then dominates.
        let floor = 1e-14 * q.abs().max(p.mass());
        let diff = ((mc.estimate - q).abs() - floor).max(0.0);
        let z = if diff == 0.0 { 0.0 } else { diff / mc.stderr };
        worst_z = worst_z.max(z);
        if z > 3.0 {
            misses += 1;
            if std::env::var("AC_DEBUG").is_ok() {
                let q64 = wiener_integral_quadrature(&f, &p, 64).unwrap().value;
                eprintln!("case {k}: {p:?} times {:?} quad32 {q} quad64 {q64} mc {mc:?}", f.times());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("50 functionals, worst |diff|/stderr {worst_z:.2}, {misses} beyond 3 sigma, {secs:.1}s");
    if misses == 0 && secs < 120.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let p = random_params(&mut rng);
        let times = random_times(&mut rng, p.t, 3);
        let (f, bound) = random_tanh_polynomial(&mut rng, times);
        let v = wiener_integral_quadrature(&f, &p, 12).map_err(|e| e.to_string())?.value;
        worst = worst.max(v.abs() - p.mass() * bound);
    }
    let msg = format!("10000 cases, max |I| - phi*sup = {worst:.2e}");
    if worst <= 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac9() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = random_params(&mut rng);
        let times = random_times(&mut rng, p.t, 3);
        let boxes = times
            .iter()
            .map(|_| match rng.random_range(0..4) {
                0 => Interval::real_line(),
                1 => Interval::new(rng.random_range(-1.5..1.0), f64::INFINITY),
                _ => {
                    let a = rng.random_range(-1.5..1.0);
                    Interval::new(a, a + rng.random_range(0.1..1.5))
                }
            })
            .collect();
        let set = CylinderSet::new(times, boxes).unwrap();
        let extra = loop {
            let s = rng.random_range(0.01..0.99) * p.t;
            if !set.times().contains(&s) {
                break s;
            }
        };
        let refined = set.with_free_time(extra).map_err(|e| e.to_string())?;
        let a = cylinder_probability(&set, &p, wiener::DEFAULT_CYLINDER_TOL).map_err(|e| e.to_string())?;
        let b = cylinder_probability(&refined, &p, wiener::DEFAULT_CYLINDER_TOL).map_err(|e| e.to_string())?;
        worst = worst.max((a - b).abs());
    }
    let msg = format!("100 instances, worst change {worst:.2e}, {:.1}s", start.elapsed().as_secs_f64());
    if worst < 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ac10() -> Outcome {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_riesz"))
            .args(["selftest", "--seed", "2024"])
            .output()
            .map_err(|e| e.to_string())
    };
    let (a, b) = (run()?, run()?);
    let msg = format!("{} bytes, exit codes {:?}/{:?}", a.stdout.len(), a.status.code(), b.status.code());
    if a.status.success() && b.status.success() && !a.stdout.is_empty() && a.stdout == b.stdout {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("AC1 expected norm of chi", ac1),
        ("AC2 Bochner mean 1-t", ac2),
        ("AC3 CDF round trip", ac3),
        ("AC4 conditional expectation", ac4),
        ("AC5 Kolmogorov compatibility", ac5),
        ("AC6 Wiener mass", ac6),
        ("AC7 quadrature vs Monte Carlo", ac7),
        ("AC8 norm bound", ac8),
        ("AC9 refinement invariance", ac9),
        ("AC10 selftest determinism", ac10),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of 10 acceptance criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! Independent reference computations checked against the library.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use softttl::policy::make_ttl;
use softttl::solver_constrained::brute_force_oracle;
use softttl::solver_soft::{solve_single_file, solve_single_file_gamma};
use softttl::{evaluate_file, DiscretizedModel, Fairness, FileSpec, Instance, InterArrival, PolicyClass, Utility};
use statrs::function::gamma::{gamma, gamma_lr};

/// Weibull scale giving mean inter-arrival time `1 / rate`.
fn weibull_scale(shape: f64, rate: f64) -> f64 {
    1.0 / (rate * gamma(1.0 + 1.0 / shape))
}

/// `∫_0^x exp(-(t/b)^a) dt` through the regularized lower incomplete gamma.
fn weibull_survival_integral(shape: f64, scale: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    scale / shape * gamma(1.0 / shape) * gamma_lr(1.0 / shape, (x / scale).powf(shape))
}

#[test]
fn dwell_times_match_incomplete_gamma() {
    for &(shape, rate) in &[(0.1, 1.0), (0.3, 2.0), (0.7, 1.0), (1.0, 0.5), (1.5, 3.0), (2.5, 1.0)] {
        let (step, bins) = (0.05, 40);
        let model = InterArrival::weibull(shape, rate).unwrap().discretize(step, bins).unwrap();
        let scale = weibull_scale(shape, rate);
        let mean = 1.0 / rate;
        for k in 0..=bins {
            let lo = weibull_survival_integral(shape, scale, k as f64 * step);
            let expected =
                if k < bins { weibull_survival_integral(shape, scale, (k + 1) as f64 * step) - lo } else { mean - lo };
            let got = model.dwell_time()[k];
            assert!((got - expected).abs() < 1e-10 * mean, "a={shape} k={k}: {got} vs {expected}");
        }
        for k in 0..bins {
            let s = |t: f64| (-(t / scale).powf(shape)).exp();
            let expected = s(k as f64 * step) - s((k + 1) as f64 * step);
            assert!((model.arrival_mass()[k] - expected).abs() < 1e-14);
        }
    }
}

/// Bin-by-bin `w'(μ_k) = γ A_k / F_k`, each fraction capped by its
/// predecessor, for `w = √·`.
fn cascade(mass: &[f64], dwell: &[f64], gamma: f64) -> Vec<f64> {
    let mut previous = 1.0f64;
    mass.iter()
        .zip(dwell)
        .map(|(&f, &a)| {
            let free = if f <= 0.0 { 0.0 } else { (f / (2.0 * gamma * a)).powi(2).min(1.0) };
            previous = previous.min(free);
            previous
        })
        .collect()
}

/// The cascade at the price that spends `capacity` (unit rate and size).
fn cascade_at_capacity(mass: &[f64], dwell: &[f64], capacity: f64) -> Vec<f64> {
    let usage = |g: f64| cascade(mass, dwell, g).iter().zip(dwell).map(|(m, a)| m * a).sum::<f64>();
    let (mut lo, mut hi) = (1e-12, 1.0);
    while usage(hi) > capacity {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if usage(mid) > capacity {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    cascade(mass, dwell, hi)
}

fn sqrt_utility(fractions: &[f64], mass: &[f64]) -> f64 {
    fractions.iter().zip(mass).map(|(m, f)| m.sqrt() * f).sum()
}

#[test]
fn bin_by_bin_cascade_agrees_for_decreasing_hazard() {
    for &shape in &[0.2, 0.5, 0.7, 0.9, 1.0] {
        for &capacity in &[0.05, 0.3, 0.7] {
            let model = InterArrival::weibull(shape, 1.0).unwrap().discretize(0.05, 30).unwrap();
            let reference = cascade_at_capacity(model.arrival_mass(), model.dwell_time(), capacity);
            let solved = solve_single_file(&model, &Utility::sqrt(), capacity, 1.0).unwrap();
            let gap = (solved.eval.utility - sqrt_utility(&reference, model.arrival_mass())).abs();
            assert!(gap < 1e-9, "a={shape} C={capacity}: {gap}");
            for (x, y) in solved.policy.fractions().iter().zip(&reference) {
                assert!((x - y).abs() < 1e-6, "a={shape} C={capacity}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn increasing_hazard_pools_to_a_constant() {
    for &shape in &[1.5, 2.0, 3.0] {
        for &capacity in &[0.2, 0.5, 0.8] {
            let model = InterArrival::weibull(shape, 1.0).unwrap().discretize(0.15, 6).unwrap();
            let solved = solve_single_file(&model, &Utility::sqrt(), capacity, 1.0).unwrap();
            for mu in solved.policy.fractions() {
                assert!((mu - capacity).abs() < 1e-9, "a={shape} C={capacity}: {mu}");
            }
            // The optimum lies on a 1/40 grid here, so the grid search must reach it.
            let file = FileSpec::weibull(shape, 1.0, 1.0).unwrap();
            let inst = Instance::new(vec![file], capacity, Fairness::Alpha(0.0), 0.15, 6).unwrap();
            let grid = brute_force_oracle(&inst, PolicyClass::Soft, 40).unwrap();
            assert!((grid.objective - solved.eval.utility).abs() < 1e-9, "a={shape} C={capacity}");
        }
    }
}

#[test]
fn pooling_beats_cascade_on_a_hump() {
    // Ratio profile 0.5, 1.0, 0.3: rises, then falls.
    let (mass, dwell) = (vec![0.2, 0.3, 0.5], vec![0.1, 0.3, 0.15]);
    let rate = 1.0 / 0.55;
    let model = DiscretizedModel::from_parts(1.0, mass.clone(), dwell.clone(), rate).unwrap();
    for &capacity in &[0.1, 0.3, 0.6] {
        let solved = solve_single_file(&model, &Utility::sqrt(), capacity, 1.0).unwrap();
        let reference = cascade_at_capacity(&mass, &dwell, capacity / rate);
        let cascade_value = rate * sqrt_utility(&reference, &mass);
        assert!(solved.eval.utility > cascade_value + 1e-3, "C={capacity}");

        // Exhaustive search over the first two fractions; the last one
        // takes whatever capacity is left.
        let steps = 400;
        let mut best = 0.0f64;
        for i in 0..=steps {
            for j in 0..=i {
                let (m0, m1) = (i as f64 / steps as f64, j as f64 / steps as f64);
                let left = capacity / rate - m0 * dwell[0] - m1 * dwell[1];
                if left < 0.0 {
                    continue;
                }
                let m2 = (left / dwell[2]).min(m1);
                best = best.max(rate * sqrt_utility(&[m0, m1, m2], &mass));
            }
        }
        assert!(best <= solved.eval.utility + 1e-12, "C={capacity}");
        assert!(solved.eval.utility - best < 1e-4, "C={capacity}: {} vs {best}", solved.eval.utility);
    }
}

/// Frank-Wolfe on `Σ √μ_k F_k − γ Σ μ_k A_k` over the monotone chain, whose
/// vertices are the whole-file TTL policies.
fn frank_wolfe(mass: &[f64], dwell: &[f64], gamma: f64, iterations: usize) -> Vec<f64> {
    let n = mass.len();
    let value = |mu: &[f64]| (0..n).map(|k| mu[k].sqrt() * mass[k] - gamma * mu[k] * dwell[k]).sum::<f64>();
    let mut mu = vec![0.5f64; n];
    for _ in 0..iterations {
        let grad: Vec<f64> = (0..n).map(|k| mass[k] / (2.0 * mu[k].sqrt()) - gamma * dwell[k]).collect();
        // Best vertex: ones on the prefix with the largest gradient sum.
        let (mut best_len, mut best, mut run) = (0, 0.0, 0.0);
        for (k, g) in grad.iter().enumerate() {
            run += g;
            if run > best {
                best = run;
                best_len = k + 1;
            }
        }
        let vertex: Vec<f64> = (0..n).map(|k| if k < best_len { 1.0 } else { 0.0 }).collect();
        let along = |s: f64| -> Vec<f64> { (0..n).map(|k| mu[k] + s * (vertex[k] - mu[k])).collect() };
        // Golden-section line search; stopping short of the vertex keeps μ > 0.
        let (mut a, mut b) = (0.0, 0.999);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let (c, d) = (b - phi * (b - a), a + phi * (b - a));
            if value(&along(c)) < value(&along(d)) {
                a = c;
            } else {
                b = d;
            }
        }
        mu = along(0.5 * (a + b));
    }
    mu
}

#[test]
fn frank_wolfe_agrees_with_closed_form() {
    let lagrangian = |mu: &[f64], mass: &[f64], dwell: &[f64], gamma: f64| {
        mu.iter().zip(mass).zip(dwell).map(|((m, f), a)| m.sqrt() * f - gamma * m * a).sum::<f64>()
    };
    for &(shape, gamma) in &[(0.3, 2.0), (0.7, 1.0), (1.0, 3.0), (2.0, 1.5)] {
        let model = InterArrival::weibull(shape, 1.0).unwrap().discretize(0.2, 8).unwrap();
        let (mass, dwell) = (model.arrival_mass(), model.dwell_time());
        let exact = solve_single_file_gamma(&model, &Utility::sqrt(), gamma).unwrap();
        let fw = frank_wolfe(mass, dwell, gamma, 20_000);
        let (le, lf) = (lagrangian(exact.fractions(), mass, dwell, gamma), lagrangian(&fw, mass, dwell, gamma));
        assert!(le >= lf - 1e-12, "a={shape}: frank-wolfe {lf} beat closed form {le}");
        assert!(le - lf < 1e-5, "a={shape}: {le} vs {lf}");
    }
}

#[test]
fn sampler_passes_kolmogorov_smirnov() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for &(shape, rate) in &[(0.3, 1.0), (0.7, 2.0), (1.0, 1.0), (2.0, 0.5)] {
        let dist = InterArrival::weibull(shape, rate).unwrap();
        let scale = weibull_scale(shape, rate);
        let n = 20_000;
        let mut draws: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        draws.sort_by(f64::total_cmp);
        let d = draws
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let cdf = 1.0 - (-(x / scale).powf(shape)).exp();
                (cdf - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - cdf).abs())
            })
            .fold(0.0, f64::max);
        // 0.1% critical value of the one-sample statistic.
        assert!(d < 1.95 / (n as f64).sqrt(), "a={shape}: D = {d}");
    }
}

#[test]
fn memoryless_ttl_occupancy() {
    let (step, bins) = (0.1, 20);
    for &rate in &[0.5, 1.0, 3.0] {
        let model = InterArrival::exponential(rate).unwrap().discretize(step, bins).unwrap();
        for cutoff in 0..bins {
            let policy = make_ttl(Some(cutoff), bins, step).unwrap();
            let eval = evaluate_file(&policy, &model, &Utility::sqrt(), 1.0).unwrap();
            let expected = 1.0 - (-rate * (cutoff + 1) as f64 * step).exp();
            assert!((eval.occupancy - expected).abs() < 1e-10, "rate={rate} cutoff={cutoff}");
            // Every request inside the window is a hit.
            assert!((eval.utility - rate * expected).abs() < 1e-10);
        }
    }
}

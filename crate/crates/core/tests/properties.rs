use prp_core::dca::random_plan;
use prp_core::divergence::perspective_h;
use prp_core::measures::{privacy_cost, privacy_cost_perspective, prp_objective};
use prp_core::seed;
use prp_core::{DiscreteDistribution, FDivergence, LinearCost, TransportPlan};
use rand::Rng;

fn divergences() -> Vec<FDivergence> {
    ["kl", "reverse_kl", "tv", "alpha:2", "alpha:3"]
        .iter()
        .map(|n| FDivergence::from_name(n).unwrap())
        .collect()
}

fn random_prior(rng: &mut impl Rng, k: usize, d: usize) -> DiscreteDistribution {
    let atoms = (0..k)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    DiscreteDistribution::new(atoms, (0..k).map(|_| rng.gen_range(0.1..1.0)).collect()).unwrap()
}

#[test]
fn objective_is_convex_in_the_plan() {
    let mut rng = seed::rng(1);
    let divs = divergences();
    for trial in 0..500 {
        let (n, k, d) = (rng.gen_range(1..6), rng.gen_range(1..5), rng.gen_range(1..4));
        let prior = random_prior(&mut rng, k, d);
        let atoms: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let cost = LinearCost::symmetric(d);
        let div = &divs[trial % divs.len()];
        let lambda = rng.gen_range(0.0..5.0);
        let g1 = random_plan(prior.weights(), n, rng.gen());
        let g2 = random_plan(prior.weights(), n, rng.gen());
        let t: f64 = rng.gen();
        let mix = &g1 * t + &g2 * (1.0 - t);
        let value = |g| {
            prp_objective(
                &TransportPlan::new(g, atoms.clone(), prior.clone()).unwrap(),
                &cost,
                div,
                lambda,
            )
        };
        let (j1, j2, jm) = (value(g1), value(g2), value(mix));
        assert!(
            jm <= t * j1 + (1.0 - t) * j2 + 1e-9,
            "trial {trial}: {jm} > {}",
            t * j1 + (1.0 - t) * j2
        );
    }
}

#[test]
fn perspective_is_subadditive_and_homogeneous() {
    let mut rng = seed::rng(2);
    for div in divergences() {
        for _ in 0..200 {
            let k = rng.gen_range(1..6);
            let prior: Vec<f64> = {
                let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
                let s: f64 = w.iter().sum();
                w.iter().map(|v| v / s).collect()
            };
            let r: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
            let s: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
            let sum: Vec<f64> = r.iter().zip(&s).map(|(a, b)| a + b).collect();
            let t = rng.gen_range(0.0..10.0);
            let scaled: Vec<f64> = r.iter().map(|v| t * v).collect();
            for idx in 0..k {
                let h = |row: &[f64]| perspective_h(&div, row, &prior, idx);
                assert!(h(&sum) <= h(&r) + h(&s) + 1e-9, "{}: subadditivity", div.name());
                assert!(
                    (h(&scaled) - t * h(&r)).abs() <= 1e-9 * (1.0 + t * h(&r).abs()),
                    "{}: homogeneity",
                    div.name()
                );
            }
        }
    }
}

#[test]
fn privacy_cost_formulations_agree() {
    let mut rng = seed::rng(3);
    let divs = divergences();
    for trial in 0..500 {
        let (n, k) = (rng.gen_range(1..6), rng.gen_range(1..6));
        let prior = random_prior(&mut rng, k, 1);
        let mut gamma = random_plan(prior.weights(), n, rng.gen());
        if trial % 5 == 0 {
            gamma.row_mut(0).fill(0.0);
            let rest = random_plan(prior.weights(), n.max(2) - 1, rng.gen());
            if n > 1 {
                gamma.slice_mut(ndarray::s![1.., ..]).assign(&rest);
            } else {
                gamma.assign(&rest);
            }
        }
        let plan = TransportPlan::new(gamma, vec![vec![0.0]; n], prior).unwrap();
        let div = &divs[trial % divs.len()];
        let (a, b) = (privacy_cost(&plan, div), privacy_cost_perspective(&plan, div));
        assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "trial {trial}: {a} vs {b}");
    }
}

mod common;

use prp_core::dca::{build_dc, dca_solve, random_plan, DcaConfig, DcaInit};
use prp_core::measures::prp_objective;
use prp_core::seed;
use prp_core::{DiscreteDistribution, FDivergence, LinearCost, TransportPlan};
use rand::Rng;

struct Case {
    prior: DiscreteDistribution,
    cost: LinearCost,
    bounds: Vec<(f64, f64)>,
    div: FDivergence,
    lambda: f64,
}

fn case(i: u64) -> Case {
    let mut rng = seed::rng(500 + i);
    let d = 1 + (i as usize % 6);
    let k = rng.gen_range(2..5);
    let bounds: Vec<(f64, f64)> = (0..d)
        .map(|_| {
            let a = rng.gen_range(-2.0..1.0);
            (a, a + rng.gen_range(0.5..2.0))
        })
        .collect();
    let atoms = (0..k)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let weights = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
    Case {
        prior: DiscreteDistribution::new(atoms, weights).unwrap(),
        cost: LinearCost::new(bounds.clone()),
        bounds,
        div: FDivergence::from_name(if i % 2 == 0 { "kl" } else { "tv" }).unwrap(),
        lambda: 10f64.powf(rng.gen_range(-2.0..1.0)),
    }
}

#[test]
fn trace_is_nonincreasing() {
    for i in 0..50 {
        let c = case(i);
        let config = DcaConfig {
            init: if i % 3 == 0 {
                DcaInit::Revealing
            } else {
                DcaInit::Random
            },
            ..DcaConfig::default()
        };
        let r = dca_solve(&c.prior, &c.cost, &c.div, c.lambda, &config, i).unwrap();
        for w in r.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "instance {i}: {} then {}", w[0], w[1]);
        }
        let last = prp_objective(&r.plan, &c.cost, &c.div, c.lambda);
        assert!((last - r.trace.last().unwrap()).abs() < 1e-12);
    }
}

#[test]
fn recovered_actions_beat_every_vertex() {
    for i in 0..50 {
        let c = case(i);
        let dc = build_dc(&c.prior, &c.cost, &c.div, c.lambda).unwrap();
        let gamma = random_plan(c.prior.weights(), 4, i);
        let actions = dc.recover_actions(&gamma);
        for (row, x) in gamma.rows().into_iter().zip(&actions) {
            let row_cost = |v: &[f64]| -> f64 {
                row.iter()
                    .zip(c.prior.atoms())
                    .map(|(g, y)| g * v.iter().zip(y).map(|(a, b)| a * b).sum::<f64>())
                    .sum()
            };
            let own = row_cost(x);
            for v in common::vertices(&c.bounds) {
                assert!(own <= row_cost(&v) + 1e-12, "instance {i}");
            }
        }
    }
}

#[test]
fn decomposition_reproduces_the_objective() {
    for i in 0..50 {
        let c = case(i);
        let dc = build_dc(&c.prior, &c.cost, &c.div, c.lambda).unwrap();
        let constant: f64 = c
            .prior
            .atoms()
            .iter()
            .zip(c.prior.weights())
            .map(|(y, w)| w * c.bounds.iter().zip(y).map(|((a, b), v)| (a + b) / 2.0 * v).sum::<f64>())
            .sum();
        assert!((dc.constant() - constant).abs() < 1e-12);
        let gamma = random_plan(c.prior.weights(), 3, 77 + i);
        let plan = TransportPlan::new(gamma.clone(), dc.recover_actions(&gamma), c.prior.clone()).unwrap();
        let direct = prp_objective(&plan, &c.cost, &c.div, c.lambda);
        assert!((dc.dc_objective(&gamma) - direct).abs() < 1e-9, "instance {i}");
    }
}

#[test]
fn concave_part_subgradient_inequality() {
    for i in 0..50 {
        let c = case(i);
        let dc = build_dc(&c.prior, &c.cost, &c.div, c.lambda).unwrap();
        let norm = |g: &ndarray::Array2<f64>| dc.z(g).iter().map(|v| v.abs()).sum::<f64>();
        let g0 = random_plan(c.prior.weights(), 3, i);
        let s = dc.concave_part_subgradient(&g0);
        for j in 0..5 {
            let g1 = random_plan(c.prior.weights(), 3, 1000 * i + j);
            let linear: f64 = (&g1 - &g0).iter().zip(s.iter()).map(|(a, b)| a * b).sum();
            assert!(norm(&g1) >= norm(&g0) + linear - 1e-12, "instance {i}");
        }
    }
}

mod common;

use common::*;
use wecan::estimation::Objective;
use wecan::WeightFamily;

#[test]
fn gradient_matches_finite_differences() {
    for seed in 0..10 {
        let family = if seed % 2 == 0 { WeightFamily::Normal } else { WeightFamily::LogNormal };
        let worst = fd_errors(seed, family);
        for (b, w) in worst.iter().enumerate() {
            assert!(*w <= 1e-5, "seed {seed} block {} error {w:e}", BLOCKS[b]);
        }
    }
}

#[test]
fn aggregated_gradient_matches_edge_loop() {
    for seed in 100..110 {
        let family = if seed % 2 == 0 { WeightFamily::Normal } else { WeightFamily::LogNormal };
        let inst = random_instance(seed, 15, 4, 3, 60);
        let problem = problem(&inst, family);
        let state = state_for(&inst, &problem);
        let g = Objective::new(&problem, &state).gradient(&inst.params, true);
        let naive = naive_gradient(&inst, &inst.params, family, true);
        for b in 0..10 {
            for (x, y) in grad_field(&g, b).iter().zip(naive_field(&naive, b)) {
                assert!((x - y).abs() <= 1e-10, "seed {seed} block {}: {x} vs {y}", BLOCKS[b]);
            }
        }
    }
}

#[test]
fn objective_differences_match_reference() {
    for seed in 200..210 {
        let family = WeightFamily::Normal;
        let inst = random_instance(seed, 10, 3, 2, 30);
        let problem = problem(&inst, family);
        let state = state_for(&inst, &problem);
        let obj = Objective::new(&problem, &state);
        let mut other = inst.params.clone();
        for b in 0..10 {
            for x in field_mut(&mut other, b).iter_mut() {
                *x *= 0.9;
            }
        }
        let lib = obj.value(&inst.params) - obj.value(&other);
        let reference = naive_q(&inst, &inst.params, family, true) - naive_q(&inst, &other, family, true);
        assert!((lib - reference).abs() < 1e-9 * reference.abs().max(1.0), "{lib} vs {reference}");
    }
}

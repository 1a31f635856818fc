use scouple_core::ksat::{
    generate_coupled_instance, run_sp_on_instance, InstanceParams, PopulationEnsemble, PopulationParams, SpMessages,
    SpRunOptions,
};

fn uncoupled(alpha: f64, size: usize, seed: u64) -> PopulationParams {
    PopulationParams {
        k: 3,
        alpha,
        half_length: 0,
        width: 1,
        size,
        seed,
    }
}

/// Mean `φ` averaged over sweeps 500..1000.
fn density_evolution_phi(alpha: f64, seed: u64) -> f64 {
    let mut pop = PopulationEnsemble::trivial_boundaries(uncoupled(alpha, 10_000, seed), 0.9).unwrap();
    pop.run(500);
    let mut acc = 0.0;
    for _ in 0..500 {
        pop.step();
        acc += pop.bulk_mean_phi() / 500.0;
    }
    acc
}

#[test]
fn density_evolution_agrees_with_a_large_instance() {
    let de = density_evolution_phi(4.1, 1);
    let g = generate_coupled_instance(InstanceParams {
        k: 3,
        alpha: 4.1,
        half_length: 0,
        width: 1,
        n: 100_000,
        seed: 5,
    })
    .unwrap();
    let opts = SpRunOptions {
        damping: 0.0,
        tol: 1e-6,
        max_iters: 2000,
    };
    let run = run_sp_on_instance(&g, SpMessages::random(&g, 5), opts).unwrap();
    assert!(run.converged);
    let inst = run.messages.mean_phi();
    assert!((de - inst).abs() < 0.05 * inst, "density evolution {de}, instance {inst}");
}

#[test]
fn nontrivial_population_is_reproducible_across_seeds() {
    let values: Vec<f64> = (0..3).map(|s| density_evolution_phi(4.0, 10 + s)).collect();
    let mean = values.iter().sum::<f64>() / 3.0;
    assert!(mean > 0.05, "{values:?}");
    for v in &values {
        assert!((v - mean).abs() < 0.02 * mean, "{values:?}");
    }
}

#[test]
fn coupled_instance_with_zero_warnings_stays_trivial() {
    let g = generate_coupled_instance(InstanceParams {
        k: 3,
        alpha: 4.2,
        half_length: 5,
        width: 3,
        n: 200,
        seed: 2,
    })
    .unwrap();
    let run = run_sp_on_instance(&g, SpMessages::constant(&g, 0.0).unwrap(), SpRunOptions::default()).unwrap();
    assert!(run.converged);
    assert!(run.messages.eta.iter().all(|&e| e == 0.0));
}

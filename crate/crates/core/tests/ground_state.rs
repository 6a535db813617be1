use graph_nls::{solve_ground_state, Graph, GroundStateOptions, Interaction, PotentialSpec, WeightMode};

/// Deep harmonic wells spread the density over hundreds of orders of
/// magnitude; tiny perturbations of the potential used to stall the solver.
#[test]
fn deep_wells_converge() {
    for n in [20, 40] {
        let g = Graph::path_lattice(n, -5.0, 5.0, WeightMode::Continuum).unwrap();
        let xs: Vec<f64> = g.coords().unwrap().iter().map(|c| c[0]).collect();
        for (k, h) in [1.0, 0.1, 0.01, 0.003].into_iter().enumerate() {
            for strength in [1.0, 4.0] {
                for alpha in [0.0, 0.6] {
                    let v = xs
                        .iter()
                        .enumerate()
                        .map(|(j, x)| strength * x * x / 2.0 * (1.0 + 1e-15 * ((j + k) % 3) as f64))
                        .collect();
                    let spec = PotentialSpec::new(v, Interaction::Diagonal(alpha), h).unwrap();
                    let opts = GroundStateOptions {
                        max_iter: 500,
                        ..Default::default()
                    };
                    let res = solve_ground_state(&g, &spec, &opts)
                        .unwrap_or_else(|e| panic!("n={n} h={h} strength={strength} alpha={alpha}: {e}"));
                    assert!(res.kkt_residual <= 1e-10);
                    assert!((res.rho.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn perturbed_coordinates_match() {
    let g = Graph::path_lattice(20, -5.0, 5.0, WeightMode::Continuum).unwrap();
    let from_coords: Vec<f64> = g.coords().unwrap().iter().map(|c| c[0] * c[0] / 2.0).collect();
    let recomputed: Vec<f64> = (0..20)
        .map(|j| -5.0 + 10.0 * j as f64 / 19.0)
        .map(|x: f64| x * x / 2.0)
        .collect();
    let solve = |v: Vec<f64>| {
        let spec = PotentialSpec::new(v, Interaction::Zero, 0.1).unwrap();
        solve_ground_state(&g, &spec, &GroundStateOptions::default()).unwrap()
    };
    let (a, b) = (solve(from_coords), solve(recomputed));
    assert!((a.nu - b.nu).abs() < 1e-12);
    for (x, y) in a.rho.iter().zip(&b.rho) {
        assert!((x - y).abs() <= 1e-10 * x.max(1e-300) + 1e-15);
    }
}

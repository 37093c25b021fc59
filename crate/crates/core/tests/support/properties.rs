//! Property checks shared by the `properties` test target and the acceptance
//! suite. Each check drives proptest with a fixed seed.

use fol::evaluation::{interpolate_fine, rel_l2_error, FineGrid};
use fol::fem::{assemble_global, element_stiffness, reactions, recover_flux, solve, BoundaryConditions};
use fol::mesh::{build_mesh, element_operators, shape_parent_gradients, shape_values, GaussRule, Mesh};
use fol::microstructure::{
    dispersion, downsample_image, generate_samples, volume_fraction, ConductivityField, EllipseRing, PhaseImage,
    SamplerConfig,
};
use fol::neural::{
    backprop, forward, forward_batch, init_params, ActivationKind, Architecture, Checkpoint, NetworkMode, NetworkParams,
};
use fol::training::{
    adam_step, data_loss, direct_minimize_field, physics_loss, precompute_loss_operators, train, AdamConfig, AdamState,
    Dataset, TrainingConfig,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub type Check = fn() -> Result<(), String>;

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn grid_11() -> Mesh {
    Mesh::unit_square(11).unwrap()
}

fn random_field(seed: u64) -> ConductivityField {
    let config = SamplerConfig {
        seed,
        ..Default::default()
    };
    generate_samples(&grid_11(), &config, 1).unwrap().remove(0)
}

fn mesh_strategy() -> impl Strategy<Value = Mesh> {
    (2usize..8, 2usize..8, 0.2f64..3.0, 0.2f64..3.0).prop_map(|(nx, ny, lx, ly)| build_mesh(nx, ny, lx, ly).unwrap())
}

fn parent_point() -> impl Strategy<Value = [f64; 2]> {
    (-1.0f64..=1.0, -1.0f64..=1.0).prop_map(|(a, b)| [a, b])
}

pub fn mesh_partition_of_unity() -> Result<(), String> {
    run(500, parent_point(), |xi| {
        let n = shape_values(xi);
        prop_assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        prop_assert!(n.iter().all(|v| (-1e-15..=1.0 + 1e-15).contains(v)));
        Ok(())
    })
}

pub fn mesh_parent_gradients_sum_to_zero() -> Result<(), String> {
    run(300, parent_point(), |xi| {
        let g = shape_parent_gradients(xi);
        for row in g {
            prop_assert!(row.iter().sum::<f64>().abs() < 1e-15);
        }
        Ok(())
    })
}

pub fn mesh_b_matrix_nullspace() -> Result<(), String> {
    run(100, mesh_strategy(), |m| {
        let rule = GaussRule::two_by_two();
        for e in 0..m.n_elements() {
            let ops = element_operators(&m, e, &rule).unwrap();
            for b in &ops.b_matrices {
                for row in b {
                    let scale = row.iter().map(|v| v.abs()).fold(0.0, f64::max);
                    prop_assert!(row.iter().sum::<f64>().abs() <= 1e-14 * scale);
                }
            }
        }
        Ok(())
    })
}

pub fn mesh_jacobian_constant_positive() -> Result<(), String> {
    run(100, mesh_strategy(), |m| {
        let rule = GaussRule::two_by_two();
        let expect = m.hx() * m.hy() / 4.0;
        for e in 0..m.n_elements() {
            let ops = element_operators(&m, e, &rule).unwrap();
            for d in &ops.det_j {
                prop_assert!(*d > 0.0);
                prop_assert!((d - expect).abs() <= 1e-13 * expect);
            }
        }
        Ok(())
    })
}

pub fn mesh_linear_reproduction() -> Result<(), String> {
    run(
        200,
        (mesh_strategy(), -2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0),
        |(m, a, b, c)| {
            let field: Vec<f64> = m.node_coords().iter().map(|p| a + b * p[0] + c * p[1]).collect();
            let rule = GaussRule::two_by_two();
            for e in 0..m.n_elements() {
                let ops = element_operators(&m, e, &rule).unwrap();
                let te = m.gather(e, &field);
                for bm in &ops.b_matrices {
                    let gx: f64 = (0..4).map(|i| bm[0][i] * te[i]).sum();
                    let gy: f64 = (0..4).map(|i| bm[1][i] * te[i]).sum();
                    prop_assert!((gx - b).abs() < 1e-12 && (gy - c).abs() < 1e-12);
                }
            }
            Ok(())
        },
    )
}

pub fn mesh_quadrature_exact_to_cubic() -> Result<(), String> {
    let exact = |p: u32| if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
    run(64, (0u32..=3, 0u32..=3), |(p, q)| {
        let rule = GaussRule::two_by_two();
        let sum: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * x[0].powi(p as i32) * x[1].powi(q as i32))
            .sum();
        prop_assert!((sum - exact(p) * exact(q)).abs() < 1e-14);
        Ok(())
    })
}

pub fn mesh_isoparametric_location() -> Result<(), String> {
    run(300, (0.0f64..=1.0, 0.0f64..=1.0), |(x, y)| {
        let m = grid_11();
        let (e, xi) = m.locate(x, y);
        let n = shape_values(xi);
        let nodes = m.elements()[e];
        let px: f64 = (0..4).map(|i| n[i] * m.node_coords()[nodes[i]][0]).sum();
        let py: f64 = (0..4).map(|i| n[i] * m.node_coords()[nodes[i]][1]).sum();
        prop_assert!((px - x).abs() < 1e-14 && (py - y).abs() < 1e-14);
        Ok(())
    })
}

fn conductivity4() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(0.01f64..10.0)
}

fn grid_11_element_ops() -> fol::mesh::ElementOperators {
    element_operators(&grid_11(), 0, &GaussRule::two_by_two()).unwrap()
}

pub fn stiffness_nullspace() -> Result<(), String> {
    run(300, conductivity4(), |k| {
        let ke = element_stiffness(&grid_11_element_ops(), &GaussRule::two_by_two(), &k).unwrap();
        let scale = ke.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
        for row in ke {
            prop_assert!(row.iter().sum::<f64>().abs() <= 1e-14 * scale);
        }
        Ok(())
    })
}

pub fn stiffness_symmetric() -> Result<(), String> {
    run(300, conductivity4(), |k| {
        let ke = element_stiffness(&grid_11_element_ops(), &GaussRule::two_by_two(), &k).unwrap();
        for (i, row) in ke.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                prop_assert!(*v == ke[j][i]);
            }
        }
        Ok(())
    })
}

pub fn stiffness_linear_in_conductivity() -> Result<(), String> {
    run(300, (conductivity4(), conductivity4(), 0.1f64..5.0), |(k1, k2, s)| {
        let ops = grid_11_element_ops();
        let rule = GaussRule::two_by_two();
        let a = element_stiffness(&ops, &rule, &k1).unwrap();
        let b = element_stiffness(&ops, &rule, &k2).unwrap();
        let mix: [f64; 4] = std::array::from_fn(|i| s * k1[i] + k2[i]);
        let c = element_stiffness(&ops, &rule, &mix).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = s * a[i][j] + b[i][j];
                prop_assert!((c[i][j] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
            }
        }
        Ok(())
    })
}

pub fn stiffness_positive_semidefinite() -> Result<(), String> {
    run(300, (conductivity4(), prop::array::uniform4(-1.0f64..1.0)), |(k, t)| {
        let ke = element_stiffness(&grid_11_element_ops(), &GaussRule::two_by_two(), &k).unwrap();
        let quad: f64 = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .map(|(i, j)| t[i] * ke[i][j] * t[j])
            .sum();
        prop_assert!(quad >= -1e-14);
        Ok(())
    })
}

pub fn global_matrix_rows_sum_to_zero() -> Result<(), String> {
    run(30, any::<u64>(), |seed| {
        let m = grid_11();
        let k = assemble_global(&m, random_field(seed).values(), &GaussRule::two_by_two()).unwrap();
        prop_assert!(k.is_symmetric(1e-15));
        for r in 0..k.dim() {
            prop_assert!(k.row(r).map(|(_, v)| v).sum::<f64>().abs() < 1e-13);
        }
        Ok(())
    })
}

pub fn fem_maximum_principle() -> Result<(), String> {
    run(100, any::<u64>(), |seed| {
        let m = grid_11();
        let t = solve(&m, random_field(seed).values(), &BoundaryConditions::standard(&m)).unwrap();
        let (lo, hi) = t.min_max();
        prop_assert!(lo >= -1e-10 && hi <= 1.0 + 1e-10, "range [{lo}, {hi}]");
        Ok(())
    })
}

pub fn fem_energy_minimum() -> Result<(), String> {
    let m = grid_11();
    let field = random_field(5);
    let bc = BoundaryConditions::standard(&m);
    let t = solve(&m, field.values(), &bc).unwrap().values;
    let k = assemble_global(&m, field.values(), &GaussRule::two_by_two()).unwrap();
    let base = k.quadratic_form(&t);
    let fixed = bc.prescribed(m.n_nodes());
    run(
        1000,
        (prop::collection::vec(-1.0f64..1.0, 121), 1e-6f64..1.0),
        |(delta, scale)| {
            let perturbed: Vec<f64> = (0..121)
                .map(|i| {
                    if fixed[i].is_some() {
                        t[i]
                    } else {
                        t[i] + scale * delta[i]
                    }
                })
                .collect();
            prop_assert!(k.quadratic_form(&perturbed) >= base - 1e-12);
            Ok(())
        },
    )
}

pub fn fem_heat_balance() -> Result<(), String> {
    run(30, any::<u64>(), |seed| {
        let m = grid_11();
        let field = random_field(seed);
        let bc = BoundaryConditions::standard(&m);
        let t = solve(&m, field.values(), &bc).unwrap();
        let k = assemble_global(&m, field.values(), &GaussRule::two_by_two()).unwrap();
        let r = reactions(&k, &t.values, &bc);
        let left: f64 = bc
            .dirichlet
            .iter()
            .zip(&r)
            .filter(|(d, _)| d.1 == 1.0)
            .map(|(_, v)| v)
            .sum();
        let right: f64 = bc
            .dirichlet
            .iter()
            .zip(&r)
            .filter(|(d, _)| d.1 == 0.0)
            .map(|(_, v)| v)
            .sum();
        prop_assert!(left > 0.0);
        prop_assert!((left + right).abs() <= 1e-8 * left.abs());
        Ok(())
    })
}

pub fn fem_boundary_superposition() -> Result<(), String> {
    run(30, (any::<u64>(), -3.0f64..3.0, -3.0f64..3.0), |(seed, tl, tr)| {
        let m = grid_11();
        let field = random_field(seed);
        let unit = solve(&m, field.values(), &BoundaryConditions::standard(&m)).unwrap();
        let t = solve(&m, field.values(), &BoundaryConditions::left_right(&m, tl, tr)).unwrap();
        for (a, u) in t.values.iter().zip(&unit.values) {
            prop_assert!((a - (tr + (tl - tr) * u)).abs() < 1e-9);
        }
        Ok(())
    })
}

pub fn fem_mirror_symmetry() -> Result<(), String> {
    run(30, any::<u64>(), |seed| {
        let m = grid_11();
        let mirror = m.mirror_y();
        let base = random_field(seed);
        let mask: Vec<bool> = (0..121)
            .map(|i| base.phase_mask()[i] || base.phase_mask()[mirror[i]])
            .collect();
        let field = ConductivityField::from_mask(mask, 1.0, 0.01);
        let t = solve(&m, field.values(), &BoundaryConditions::standard(&m)).unwrap();
        for (i, &m) in mirror.iter().enumerate() {
            prop_assert!((t.values[i] - t.values[m]).abs() < 1e-10);
        }
        Ok(())
    })
}

pub fn flux_of_linear_field() -> Result<(), String> {
    run(100, (0.01f64..10.0, -2.0f64..2.0, -2.0f64..2.0), |(k, gx, gy)| {
        let m = grid_11();
        let t: Vec<f64> = m.node_coords().iter().map(|p| gx * p[0] + gy * p[1]).collect();
        let q = recover_flux(&m, &vec![k; 121], &t).unwrap();
        for f in &q.nodal_flux {
            prop_assert!((f[0] + k * gx).abs() < 1e-10 && (f[1] + k * gy).abs() < 1e-10);
        }
        Ok(())
    })
}

pub fn generation_deterministic() -> Result<(), String> {
    run(20, (any::<u64>(), 1usize..12), |(seed, count)| {
        let m = grid_11();
        let config = SamplerConfig {
            seed,
            ..Default::default()
        };
        let a = generate_samples(&m, &config, count).unwrap();
        let b = generate_samples(&m, &config, count).unwrap();
        prop_assert_eq!(&a, &b);
        // Prefixes agree: sample i does not depend on the count.
        let c = generate_samples(&m, &config, 1).unwrap();
        prop_assert_eq!(&a[0], &c[0]);
        Ok(())
    })
}

pub fn generation_two_phase() -> Result<(), String> {
    run(30, any::<u64>(), |seed| {
        let f = random_field(seed);
        for (v, inc) in f.values().iter().zip(f.phase_mask()) {
            prop_assert_eq!(*v, if *inc { 0.01 } else { 1.0 });
        }
        let vf = volume_fraction(&f);
        prop_assert!((vf - f.inclusion_count() as f64 / 121.0).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&vf));
        Ok(())
    })
}

pub fn dispersion_bounded_and_transpose_invariant() -> Result<(), String> {
    run(100, prop::collection::vec(any::<bool>(), 121), |mask| {
        let m = grid_11();
        let f = ConductivityField::from_mask(mask.clone(), 1.0, 0.01);
        let transposed: Vec<bool> = (0..121).map(|n| mask[(n % 11) * 11 + n / 11]).collect();
        let g = ConductivityField::from_mask(transposed, 1.0, 0.01);
        let d = dispersion(&f, &m);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!((d - dispersion(&g, &m)).abs() < 1e-12);
        Ok(())
    })
}

pub fn ellipse_half_turn_invariant() -> Result<(), String> {
    let ring = (
        (0.1f64..0.9, 0.1f64..0.9),
        0.05f64..0.5,
        0.05f64..0.5,
        0.0f64..0.9,
        0.0f64..std::f64::consts::PI,
        (0.0f64..1.0, 0.0f64..1.0),
    );
    run(500, ring, |((cx, cy), a, b, inner, rot, (px, py))| {
        let r1 = EllipseRing {
            center: [cx, cy],
            a,
            b,
            inner_scale: inner,
            rotation: rot,
        };
        let r2 = EllipseRing {
            rotation: rot + std::f64::consts::PI,
            ..r1
        };
        // Points within rounding of the boundary may flip.
        let d = |r: &EllipseRing| {
            let (dx, dy) = (px - cx, py - cy);
            let (s, c) = r.rotation.sin_cos();
            let (u, v) = (c * dx + s * dy, -s * dx + c * dy);
            (u / a).powi(2) + (v / b).powi(2)
        };
        let rho = d(&r1);
        if (rho - 1.0).abs() > 1e-9 && (rho - inner * inner).abs() > 1e-9 {
            prop_assert_eq!(r1.contains([px, py]), r2.contains([px, py]));
        }
        Ok(())
    })
}

pub fn downsample_uniform_images() -> Result<(), String> {
    run(40, (11usize..80, 11usize..80, any::<bool>()), |(w, h, inc)| {
        let m = grid_11();
        let image = PhaseImage {
            width: w,
            height: h,
            inclusion: vec![inc; w * h],
        };
        let f = downsample_image(&image, &m, 1.0, 0.01).unwrap();
        prop_assert_eq!(f.inclusion_count(), if inc { 121 } else { 0 });
        Ok(())
    })
}

fn small_arch(mode: NetworkMode, act: ActivationKind) -> Architecture {
    Architecture {
        nodes: 6,
        hidden_width: 4,
        hidden_layers: 2,
        activation: act,
        mode,
    }
}

fn arch_strategy() -> impl Strategy<Value = Architecture> {
    (any::<bool>(), 0usize..4).prop_map(|(mono, a)| {
        let mode = if mono {
            NetworkMode::Monolithic
        } else {
            NetworkMode::Separate
        };
        small_arch(mode, ActivationKind::ALL[a])
    })
}

fn unit_input(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n)
}

pub fn network_batch_matches_single() -> Result<(), String> {
    run(
        50,
        (
            arch_strategy(),
            any::<u64>(),
            prop::collection::vec(unit_input(6), 1..6),
        ),
        |(arch, seed, inputs)| {
            let p = init_params(arch, seed).unwrap();
            let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
            let batch = forward_batch(&p, &refs).unwrap();
            for (k, out) in inputs.iter().zip(&batch) {
                let single = forward(&p, k).unwrap();
                for (a, b) in single.iter().zip(out) {
                    prop_assert!((a - b).abs() < 1e-13);
                }
            }
            Ok(())
        },
    )
}

pub fn network_backprop_matches_finite_differences() -> Result<(), String> {
    run(
        40,
        (arch_strategy(), any::<u64>(), unit_input(6), unit_input(6)),
        |(arch, seed, k, up)| {
            let mut p = init_params(arch, seed).unwrap();
            // Non-zero biases so every term of the chain is exercised.
            for (i, v) in p.data.iter_mut().enumerate() {
                *v += 0.05 * ((i as f64) * 0.7).sin();
            }
            let grad = backprop(&p, &k, &up).unwrap();
            let objective =
                |q: &NetworkParams| -> f64 { forward(q, &k).unwrap().iter().zip(&up).map(|(a, b)| a * b).sum() };
            let h = 1e-6;
            for idx in (0..p.len()).step_by(p.len() / 12 + 1) {
                let mut plus = p.clone();
                plus.data[idx] += h;
                let mut minus = p.clone();
                minus.data[idx] -= h;
                let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
                let tol = 1e-5 * fd.abs().max(grad[idx].abs()).max(1e-4);
                prop_assert!(
                    (fd - grad[idx]).abs() <= tol,
                    "param {}: fd {} vs {}",
                    idx,
                    fd,
                    grad[idx]
                );
            }
            Ok(())
        },
    )
}

pub fn network_subnets_independent() -> Result<(), String> {
    run(50, (any::<u64>(), 0usize..6, unit_input(6)), |(seed, s, k)| {
        let p = init_params(small_arch(NetworkMode::Separate, ActivationKind::Tanh), seed).unwrap();
        let mut q = p.clone();
        for i in q.subnet_indices(s) {
            q.data[i] += 0.3;
        }
        let a = forward(&p, &k).unwrap();
        let b = forward(&q, &k).unwrap();
        for i in 0..6 {
            prop_assert_eq!(i == s, a[i] != b[i]);
        }
        Ok(())
    })
}

pub fn network_checkpoint_roundtrip() -> Result<(), String> {
    run(30, (arch_strategy(), any::<u64>()), |(arch, seed)| {
        let p = init_params(arch, seed).unwrap();
        let text = serde_json::to_string(&Checkpoint::from(&p)).unwrap();
        let back: Checkpoint = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(NetworkParams::try_from(&back).unwrap(), p);
        Ok(())
    })
}

pub fn network_init_glorot_bounds() -> Result<(), String> {
    run(30, (arch_strategy(), any::<u64>()), |(arch, seed)| {
        let p = init_params(arch, seed).unwrap();
        prop_assert_eq!(&p, &init_params(arch, seed).unwrap());
        let widths = arch.subnet_widths();
        for s in 0..arch.subnets() {
            for (l, (w, b)) in p.subnet_ranges(s).into_iter().enumerate() {
                let limit = (6.0 / (widths[l] + widths[l + 1]) as f64).sqrt();
                prop_assert!(p.data[w].iter().all(|v| v.abs() <= limit));
                prop_assert!(p.data[b].iter().all(|v| *v == 0.0));
            }
        }
        Ok(())
    })
}

fn loss_ops() -> fol::training::PrecomputedLossOperators {
    let m = grid_11();
    precompute_loss_operators(&m, &GaussRule::two_by_two(), &BoundaryConditions::standard(&m)).unwrap()
}

pub fn physics_loss_gradient_exact() -> Result<(), String> {
    let ops = loss_ops();
    run(
        20,
        (any::<u64>(), prop::collection::vec(-0.5f64..1.5, 121)),
        |(seed, t)| {
            let field = random_field(seed);
            let (_, g) = physics_loss(&t, field.values(), &ops, 0.0).unwrap();
            let h = 1e-2;
            for i in (0..121).step_by(7) {
                let mut a = t.clone();
                a[i] += h;
                let mut b = t.clone();
                b[i] -= h;
                let fd = (physics_loss(&a, field.values(), &ops, 0.0).unwrap().0.total
                    - physics_loss(&b, field.values(), &ops, 0.0).unwrap().0.total)
                    / (2.0 * h);
                prop_assert!((fd - g[i]).abs() <= 1e-7 * fd.abs().max(1e-6));
            }
            Ok(())
        },
    )
}

pub fn physics_energy_non_negative() -> Result<(), String> {
    let ops = loss_ops();
    run(
        100,
        (any::<u64>(), prop::collection::vec(-2.0f64..2.0, 121)),
        |(seed, t)| {
            let (terms, _) = physics_loss(&t, random_field(seed).values(), &ops, 10.0).unwrap();
            prop_assert!(terms.energy >= -1e-15 && terms.dirichlet >= 0.0);
            Ok(())
        },
    )
}

pub fn loss_minimiser_is_fem_solution() -> Result<(), String> {
    let ops = loss_ops();
    run(30, any::<u64>(), |seed| {
        let m = grid_11();
        let field = random_field(seed);
        let a = direct_minimize_field(field.values(), &ops).unwrap();
        let b = solve(&m, field.values(), &BoundaryConditions::standard(&m)).unwrap();
        let err = rel_l2_error(&a.values, &b.values).unwrap().unwrap() / 100.0;
        prop_assert!(err < 1e-8);
        Ok(())
    })
}

pub fn data_loss_gradient_formula() -> Result<(), String> {
    run(
        100,
        prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..40),
        |pairs| {
            let (p, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let (loss, g) = data_loss(&p, &y).unwrap();
            let n = p.len() as f64;
            let mse: f64 = p.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
            prop_assert!((loss - mse).abs() < 1e-14);
            for i in 0..p.len() {
                prop_assert!((g[i] - 2.0 * (p[i] - y[i]) / n).abs() < 1e-15);
            }
            Ok(())
        },
    )
}

pub fn adam_first_step_bounded() -> Result<(), String> {
    run(200, prop::collection::vec(-100.0f64..100.0, 1..20), |g| {
        let config = AdamConfig::default();
        let mut p = vec![0.0; g.len()];
        let mut state = AdamState::new(g.len());
        adam_step(&mut p, &g, &mut state, &config).unwrap();
        for (d, gi) in p.iter().zip(&g) {
            prop_assert!(d.abs() <= config.learning_rate * (1.0 + 1e-12));
            prop_assert!(*gi == 0.0 || d.signum() == -gi.signum());
        }
        Ok(())
    })
}

pub fn training_deterministic() -> Result<(), String> {
    run(5, (any::<u64>(), 1usize..4), |(seed, batch)| {
        let m = build_mesh(4, 4, 1.0, 1.0).unwrap();
        let bc = BoundaryConditions::standard(&m);
        let fields = generate_samples(
            &m,
            &SamplerConfig {
                seed,
                ..Default::default()
            },
            5,
        )
        .unwrap();
        let config = TrainingConfig {
            epochs: 4,
            batch_size: batch,
            hidden_width: 3,
            seed,
            ..Default::default()
        };
        let a = train(Dataset::unlabeled(&fields), &config, &m, &bc).unwrap();
        let b = train(Dataset::unlabeled(&fields), &config, &m, &bc).unwrap();
        prop_assert_eq!(a.params, b.params);
        prop_assert_eq!(a.history.total, b.history.total);
        Ok(())
    })
}

pub fn physics_loss_order_independent() -> Result<(), String> {
    let ops = loss_ops();
    run(10, any::<u64>(), |seed| {
        let m = grid_11();
        let fields = generate_samples(
            &m,
            &SamplerConfig {
                seed,
                ..Default::default()
            },
            8,
        )
        .unwrap();
        let params = init_params(Architecture::separate(121, ActivationKind::Tanh), seed).unwrap();
        let losses: Vec<f64> = fields
            .iter()
            .map(|f| {
                let t = forward(&params, f.values()).unwrap();
                physics_loss(&t, f.values(), &ops, 10.0).unwrap().0.total
            })
            .collect();
        let forward_mean = losses.iter().sum::<f64>() / 8.0;
        let reverse_mean = losses.iter().rev().sum::<f64>() / 8.0;
        prop_assert!((forward_mean - reverse_mean).abs() <= 1e-12 * forward_mean.abs());
        Ok(())
    })
}

pub fn fine_interpolation_affine() -> Result<(), String> {
    run(
        50,
        (prop::collection::vec(-1.0f64..1.0, 121), -3.0f64..3.0, -3.0f64..3.0),
        |(t, alpha, beta)| {
            let m = grid_11();
            let mapped: Vec<f64> = t.iter().map(|v| alpha * v + beta).collect();
            let a = interpolate_fine(&t, &m, 45).unwrap();
            let b = interpolate_fine(&mapped, &m, 45).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((alpha * x + beta - y).abs() < 1e-12);
            }
            Ok(())
        },
    )
}

pub fn fine_interpolation_bounded() -> Result<(), String> {
    run(50, prop::collection::vec(-1.0f64..1.0, 121), |t| {
        let m = grid_11();
        let grid = FineGrid::new(&m, 37).unwrap();
        let values = grid.interpolate(&m, &t).unwrap();
        for (p, v) in grid.points.iter().zip(&values) {
            let (e, _) = m.locate(p[0], p[1]);
            let corners = m.gather(e, &t);
            let lo = corners.iter().copied().fold(f64::MAX, f64::min);
            let hi = corners.iter().copied().fold(f64::MIN, f64::max);
            prop_assert!(*v >= lo - 1e-14 && *v <= hi + 1e-14);
        }
        Ok(())
    })
}

pub fn rel_l2_homogeneous() -> Result<(), String> {
    run(
        200,
        (prop::collection::vec(0.1f64..2.0, 1..50), 0.0f64..3.0),
        |(b, s)| {
            let a: Vec<f64> = b.iter().map(|v| s * v).collect();
            let e = rel_l2_error(&a, &b).unwrap().unwrap();
            prop_assert!((e - 100.0 * (s - 1.0).abs()).abs() < 1e-9);
            Ok(())
        },
    )
}

/// Every property with its name, in a fixed order.
pub const ALL: &[(&str, Check)] = &[
    ("mesh_partition_of_unity", mesh_partition_of_unity),
    ("mesh_parent_gradients_sum_to_zero", mesh_parent_gradients_sum_to_zero),
    ("mesh_b_matrix_nullspace", mesh_b_matrix_nullspace),
    ("mesh_jacobian_constant_positive", mesh_jacobian_constant_positive),
    ("mesh_linear_reproduction", mesh_linear_reproduction),
    ("mesh_quadrature_exact_to_cubic", mesh_quadrature_exact_to_cubic),
    ("mesh_isoparametric_location", mesh_isoparametric_location),
    ("stiffness_nullspace", stiffness_nullspace),
    ("stiffness_symmetric", stiffness_symmetric),
    ("stiffness_linear_in_conductivity", stiffness_linear_in_conductivity),
    ("stiffness_positive_semidefinite", stiffness_positive_semidefinite),
    ("global_matrix_rows_sum_to_zero", global_matrix_rows_sum_to_zero),
    ("fem_maximum_principle", fem_maximum_principle),
    ("fem_energy_minimum", fem_energy_minimum),
    ("fem_heat_balance", fem_heat_balance),
    ("fem_boundary_superposition", fem_boundary_superposition),
    ("fem_mirror_symmetry", fem_mirror_symmetry),
    ("flux_of_linear_field", flux_of_linear_field),
    ("generation_deterministic", generation_deterministic),
    ("generation_two_phase", generation_two_phase),
    (
        "dispersion_bounded_and_transpose_invariant",
        dispersion_bounded_and_transpose_invariant,
    ),
    ("ellipse_half_turn_invariant", ellipse_half_turn_invariant),
    ("downsample_uniform_images", downsample_uniform_images),
    ("network_batch_matches_single", network_batch_matches_single),
    (
        "network_backprop_matches_finite_differences",
        network_backprop_matches_finite_differences,
    ),
    ("network_subnets_independent", network_subnets_independent),
    ("network_checkpoint_roundtrip", network_checkpoint_roundtrip),
    ("network_init_glorot_bounds", network_init_glorot_bounds),
    ("physics_loss_gradient_exact", physics_loss_gradient_exact),
    ("physics_energy_non_negative", physics_energy_non_negative),
    ("loss_minimiser_is_fem_solution", loss_minimiser_is_fem_solution),
    ("data_loss_gradient_formula", data_loss_gradient_formula),
    ("adam_first_step_bounded", adam_first_step_bounded),
    ("training_deterministic", training_deterministic),
    ("physics_loss_order_independent", physics_loss_order_independent),
    ("fine_interpolation_affine", fine_interpolation_affine),
    ("fine_interpolation_bounded", fine_interpolation_bounded),
    ("rel_l2_homogeneous", rel_l2_homogeneous),
];

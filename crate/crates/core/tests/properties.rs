mod support;

use support::properties as p;

macro_rules! properties {
    ($($name:ident),* $(,)?) => {
        $(
            #[test]
            fn $name() {
                if let Err(e) = p::$name() {
                    panic!("{e}");
                }
            }
        )*
    };
}

properties!(
    mesh_partition_of_unity,
    mesh_parent_gradients_sum_to_zero,
    mesh_b_matrix_nullspace,
    mesh_jacobian_constant_positive,
    mesh_linear_reproduction,
    mesh_quadrature_exact_to_cubic,
    mesh_isoparametric_location,
    stiffness_nullspace,
    stiffness_symmetric,
    stiffness_linear_in_conductivity,
    stiffness_positive_semidefinite,
    global_matrix_rows_sum_to_zero,
    fem_maximum_principle,
    fem_energy_minimum,
    fem_heat_balance,
    fem_boundary_superposition,
    fem_mirror_symmetry,
    flux_of_linear_field,
    generation_deterministic,
    generation_two_phase,
    dispersion_bounded_and_transpose_invariant,
    ellipse_half_turn_invariant,
    downsample_uniform_images,
    network_batch_matches_single,
    network_backprop_matches_finite_differences,
    network_subnets_independent,
    network_checkpoint_roundtrip,
    network_init_glorot_bounds,
    physics_loss_gradient_exact,
    physics_energy_non_negative,
    loss_minimiser_is_fem_solution,
    data_loss_gradient_formula,
    adam_first_step_bounded,
    training_deterministic,
    physics_loss_order_independent,
    fine_interpolation_affine,
    fine_interpolation_bounded,
    rel_l2_homogeneous,
);

#[test]
fn suite_is_complete() {
    assert!(p::ALL.len() >= 30);
    let mut names: Vec<&str> = p::ALL.iter().map(|(n, _)| *n).collect();
    names.sort_unstable();
    names.dedup();
    assert_eq!(names.len(), p::ALL.len());
}

//! Structural invariants of the pipeline checked on randomized inputs.

use nalgebra::DMatrix;
use proptest::prelude::*;

use eigenbounds::assembly::assemble_default;
use eigenbounds::bounds::{
    beta2, guaranteed_lower_bound, optimal_beta, ritz_values, upper_bounds, BoundParameters,
};
use eigenbounds::coeff::{
    approximate, derive_constants, AbarRule, BaseConstants, CertifiedConstants, CoefficientField,
    ConstantsOptions, Provenance,
};
use eigenbounds::eigensolve::{solve_smallest, Backend, SolverOptions};
use eigenbounds::fespace::DofSpace;
use eigenbounds::mesh::{
    generate_lshape, generate_unit_cube, generate_unit_square, refine_uniform, SimplicialMesh,
};
use eigenbounds::quadrature::QuadratureRule;

fn spd(v: &[f64]) -> DMatrix<f64> {
    let l = DMatrix::from_row_slice(2, 2, &[v[0], 0.0, v[1], v[2]]);
    &l * l.transpose() + DMatrix::identity(2, 2) * 0.2
}

fn piecewise(mesh: &SimplicialMesh, seed: u64) -> CoefficientField {
    let mut s = seed
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    let mut next = || {
        s = s
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    CoefficientField::PiecewiseConstant(
        (0..mesh.cell_count())
            .map(|_| spd(&[next(), next(), next()]))
            .collect(),
    )
}

fn mesh_for(kind: u8, level: u32) -> SimplicialMesh {
    match kind {
        0 => generate_unit_square(level),
        1 => generate_lshape(level),
        _ => refine_uniform(&generate_unit_square(level.min(2))),
    }
}

fn constants(c_a: f64, c_abar: f64, c_abar_a: f64, c_inf: f64) -> CertifiedConstants {
    CertifiedConstants {
        base: BaseConstants {
            c_a,
            c_abar,
            c_abar_a,
            c_inf,
        },
        provenance: Provenance::UserSupplied,
    }
}

#[test]
fn cube_dof_counts() {
    let mesh = generate_unit_cube(1);
    let stats = mesh.stats();
    assert!(stats.xi >= 1.0);
    assert_eq!(DofSpace::p1c(&mesh).dof_count(), 1);
    assert_eq!(DofSpace::cr(&mesh).dof_count(), mesh.interior_facet_count());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mesh_statistics_and_dof_counts(kind in 0u8..3, level in 0u32..4) {
        let mesh = mesh_for(kind, level);
        let s = mesh.stats();
        prop_assert!(s.xi >= 1.0);
        prop_assert!(s.valence >= 1);
        prop_assert_eq!(s.h, s.h_per_cell.iter().copied().fold(0.0, f64::max));
        let field = CoefficientField::Identity { dim: 2 };
        let ap = approximate(&field, &mesh, AbarRule::Centroid).unwrap();
        let gcr = DofSpace::gcr(&mesh, &ap).unwrap();
        prop_assert_eq!(gcr.dof_count(), mesh.interior_facet_count() + mesh.cell_count());
        prop_assert_eq!(DofSpace::cr(&mesh).dof_count(), mesh.interior_facet_count());
        prop_assert_eq!(DofSpace::p1c(&mesh).dof_count(), mesh.interior_vertex_count());
    }

    #[test]
    fn coefficient_approximation_inverts(seed in 0u64..10_000, rule in 0u8..2) {
        let mesh = generate_lshape(1);
        let field = piecewise(&mesh, seed);
        let rule = if rule == 0 { AbarRule::Centroid } else { AbarRule::IntegralMean };
        let ap = approximate(&field, &mesh, rule).unwrap();
        for (a, b) in ap.abar.iter().zip(&ap.bbar) {
            prop_assert!((a * b - DMatrix::identity(2, 2)).amax() < 1e-12);
            prop_assert!((a - a.transpose()).amax() == 0.0);
        }
        let c = derive_constants(&field, &ap, &mesh, &ConstantsOptions::default()).unwrap();
        prop_assert_eq!(c.provenance, Provenance::Exact);
        prop_assert_eq!(c.eta1(), c.base.c_abar * c.base.c_abar_a);
        prop_assert_eq!(c.eta2(), c.base.c_inf * c.base.c_abar * c.base.c_a * c.base.c_abar_a);
        prop_assert!(c.eta2() == 0.0);
    }

    #[test]
    fn quadrature_weights_sum_to_one(dim in 1usize..4, degree in 0usize..12) {
        let rule = QuadratureRule::simplex(dim, degree);
        let s: f64 = rule.weights().iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn assembled_matrices_are_symmetric(seed in 0u64..10_000, space in 0u8..3) {
        let mesh = generate_lshape(1);
        let field = piecewise(&mesh, seed);
        let ap = approximate(&field, &mesh, AbarRule::Centroid).unwrap();
        let s = match space {
            0 => DofSpace::cr(&mesh),
            1 => DofSpace::gcr(&mesh, &ap).unwrap(),
            _ => DofSpace::p1c(&mesh),
        };
        let p = assemble_default(&s, &field).unwrap();
        let (k, m) = (p.stiffness.to_dense(), p.mass.to_dense());
        prop_assert!((&k - k.transpose()).amax() <= 1e-12 * k.amax());
        prop_assert!((&m - m.transpose()).amax() <= 1e-12 * m.amax());
        prop_assert!(k.clone().cholesky().is_some());
        prop_assert!(m.clone().cholesky().is_some());
    }

    #[test]
    fn eigenpairs_are_ordered_orthonormal_and_accurate(seed in 0u64..10_000, sparse in any::<bool>()) {
        let mesh = generate_unit_square(2);
        let field = piecewise(&mesh, seed);
        let ap = approximate(&field, &mesh, AbarRule::Centroid).unwrap();
        let space = DofSpace::gcr(&mesh, &ap).unwrap();
        let p = assemble_default(&space, &field).unwrap();
        let opts = SolverOptions { backend: if sparse { Backend::Sparse } else { Backend::Dense }, seed, ..SolverOptions::default() };
        let e = solve_smallest(&p, 6, &opts).unwrap();
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(e.residuals.iter().all(|&r| r <= opts.tol));
        for i in 0..e.len() {
            let mx = p.mass.mul_vec(&e.vectors[i]);
            for j in 0..e.len() {
                let d: f64 = e.vectors[j].iter().zip(&mx).map(|(a, b)| a * b).sum();
                let delta = if i == j { 1.0 } else { 0.0 };
                prop_assert!((d - delta).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn lower_bound_never_exceeds_discrete_eigenvalue(
        lambda in 0.1f64..1e4,
        h in 1e-3f64..2.0,
        c_a in 0.5f64..3.0,
        c_abar_a in 1.0f64..2.0,
        c_inf in 0.0f64..3.0,
        beta in 0.01f64..0.99,
    ) {
        let stats = generate_unit_square(2).stats();
        let mut params = BoundParameters::new(2, &stats, constants(c_a, c_a, c_abar_a, c_inf), beta).unwrap();
        params.h = h;
        let glb = guaranteed_lower_bound(lambda, &params).unwrap();
        prop_assert!(glb > 0.0 && glb <= lambda);
        let best = optimal_beta(lambda, &params).unwrap();
        let glb_best = guaranteed_lower_bound(lambda, &params.with_beta(best).unwrap()).unwrap();
        prop_assert!(glb_best >= glb * (1.0 - 1e-12));
        let zero_beta = BoundParameters { beta: 0.0, ..params };
        prop_assert!(zero_beta.validate().is_err());
    }

    #[test]
    fn beta2_formula(valence in 1usize..20, xi in 1.0f64..10.0, dim in 2usize..4) {
        let n = dim as f64;
        prop_assert_eq!(beta2(dim, valence, xi), (n - 1.0) * valence as f64 * xi.sqrt() / n);
    }

    #[test]
    fn ritz_values_are_ascending_and_dominate_quotients(vals in prop::collection::vec(-1.0f64..1.0, 18)) {
        let w = DMatrix::from_row_slice(6, 3, &vals[..18]);
        let g = w.transpose() * &w + DMatrix::identity(3, 3) * 1e-3;
        let s = w.transpose() * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1., 2., 3., 4., 5., 6.])) * &w;
        let r = ritz_values(&s, &g);
        prop_assert!(r.windows(2).all(|p| p[0] <= p[1]));
        let top = *r.last().unwrap();
        for k in 0..3 {
            prop_assert!(s[(k, k)] / g[(k, k)] <= top + 1e-9);
        }
    }

    #[test]
    fn projected_quotients_are_below_lambda_m(seed in 0u64..10_000, level in 2u32..4) {
        let mesh = generate_unit_square(level);
        let field = piecewise(&mesh, seed);
        let ap = approximate(&field, &mesh, AbarRule::Centroid).unwrap();
        let gcr = DofSpace::gcr(&mesh, &ap).unwrap();
        let p = assemble_default(&gcr, &field).unwrap();
        let e = solve_smallest(&p, 4, &SolverOptions::default()).unwrap();
        let p1 = DofSpace::p1c(&mesh);
        let p1p = assemble_default(&p1, &field).unwrap();
        let u = upper_bounds(&gcr, &e, &p1, &p1p).unwrap();
        prop_assert!(u.ritz.windows(2).all(|w| w[0] <= w[1]));
        if u.full_rank() {
            let lm = u.lambda_m().unwrap();
            for lc in u.lambda_c.iter().flatten() {
                prop_assert!(*lc <= lm + 1e-9);
            }
        }
    }
}

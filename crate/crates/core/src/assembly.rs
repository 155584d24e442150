//! Stiffness `(A grad u, grad v)` and mass `(u, v)` matrices on the free
//! DOFs of a [`DofSpace`].

use nalgebra::DMatrix;

use crate::coeff::CoefficientField;
use crate::fespace::{DofSpace, SpaceKind};
use crate::quadrature::QuadratureRule;
use crate::sparse::SymCsr;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SymmetricOperatorPair {
    pub stiffness: SymCsr,
    pub mass: SymCsr,
    pub kind: SpaceKind,
    pub quadrature_degree: usize,
}

impl SymmetricOperatorPair {
    pub fn dim(&self) -> usize {
        self.mass.dim()
    }
}

/// Quadrature degree that is exact for the given space and coefficient
/// (or, for analytic `A`, exact up to a degree-2 approximation of `A`).
pub fn default_degree(kind: SpaceKind, field: &CoefficientField) -> usize {
    let basis_deg = if kind == SpaceKind::Gcr { 2 } else { 1 };
    if field.is_piecewise_constant() {
        2 * basis_deg
    } else {
        2 * basis_deg + 2
    }
}

/// Element stiffness and mass matrices of cell `k`.
pub fn element_matrices(
    space: &DofSpace,
    field: &CoefficientField,
    quad: &QuadratureRule,
    k: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let mesh = space.mesh();
    let geom = mesh.cell_geometry(k);
    if !(geom.volume > 0.0) {
        return Err(Error::DegenerateCell { cell: k });
    }
    let m = space.local_count();
    let mut ke = DMatrix::zeros(m, m);
    let mut me = DMatrix::zeros(m, m);
    let constant_a = field.is_piecewise_constant().then(|| field.eval(k, &[]));
    for (p, w) in quad.iter() {
        let basis = space.eval_basis(k, &geom, p);
        let a = match &constant_a {
            Some(a) => a.clone(),
            None => field.eval(k, geom.point(p).as_slice()),
        };
        let wv = w * geom.volume;
        let ag: Vec<_> = basis.grads.iter().map(|g| &a * g).collect();
        for i in 0..m {
            for j in i..m {
                let kij = wv * ag[i].dot(&basis.grads[j]);
                let mij = wv * basis.values[i] * basis.values[j];
                ke[(i, j)] += kij;
                me[(i, j)] += mij;
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            ke[(i, j)] = ke[(j, i)];
            me[(i, j)] = me[(j, i)];
        }
    }
    Ok((ke, me))
}

/// Assembles both matrices with cells visited in ascending order, dropping
/// rows and columns of constrained DOFs.
pub fn assemble(
    space: &DofSpace,
    field: &CoefficientField,
    quad: &QuadratureRule,
) -> Result<SymmetricOperatorPair> {
    let mesh = space.mesh();
    if field.dim() != mesh.dim() {
        return Err(Error::InvalidRequest(format!(
            "coefficient dimension {} does not match mesh dimension {}",
            field.dim(),
            mesh.dim()
        )));
    }
    if let CoefficientField::PiecewiseConstant(v) = field {
        if v.len() != mesh.cell_count() {
            return Err(Error::InvalidRequest(format!(
                "coefficient has {} cells, mesh has {}",
                v.len(),
                mesh.cell_count()
            )));
        }
    }
    let m = space.local_count();
    let mut kt = Vec::with_capacity(mesh.cell_count() * m * (m + 1) / 2);
    let mut mt = Vec::with_capacity(kt.capacity());
    for k in 0..mesh.cell_count() {
        let (ke, me) = element_matrices(space, field, quad, k)?;
        let free: Vec<Option<usize>> = space
            .local_dofs(k)
            .into_iter()
            .map(|d| space.free_index(d))
            .collect();
        for i in 0..m {
            let Some(fi) = free[i] else { continue };
            for j in 0..m {
                let Some(fj) = free[j] else { continue };
                if fi <= fj {
                    kt.push((fi, fj, ke[(i, j)]));
                    mt.push((fi, fj, me[(i, j)]));
                }
            }
        }
    }
    let n = space.dof_count();
    Ok(SymmetricOperatorPair {
        stiffness: SymCsr::from_triplets(n, kt),
        mass: SymCsr::from_triplets(n, mt),
        kind: space.kind(),
        quadrature_degree: quad.degree(),
    })
}

/// [`assemble`] with [`default_degree`].
pub fn assemble_default(
    space: &DofSpace,
    field: &CoefficientField,
) -> Result<SymmetricOperatorPair> {
    let quad = QuadratureRule::simplex(space.mesh().dim(), default_degree(space.kind(), field));
    assemble(space, field, &quad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::{approximate, variable_square_field, AbarRule, ApproxCoefficient};
    use crate::mesh::{generate_lshape, generate_unit_cube, generate_unit_square, SimplicialMesh};
    use nalgebra::DVector;

    fn max_sym_defect(a: &SymCsr) -> f64 {
        let d = a.to_dense();
        (&d - d.transpose()).amax() / d.amax()
    }

    #[test]
    fn matrices_are_symmetric_and_positive() {
        let mesh = generate_lshape(1);
        let f = variable_square_field();
        let ap = approximate(&f, &mesh, AbarRule::Centroid).unwrap();
        let space = DofSpace::gcr(&mesh, &ap).unwrap();
        let pair = assemble_default(&space, &f).unwrap();
        assert!(max_sym_defect(&pair.stiffness) < 1e-12);
        assert!(nalgebra::Cholesky::new(pair.mass.to_dense()).is_some());
        assert!(nalgebra::Cholesky::new(pair.stiffness.to_dense()).is_some());
    }

    #[test]
    fn constants_are_in_the_kernel() {
        for mesh in [generate_unit_square(2), generate_unit_cube(1)] {
            let f = CoefficientField::Identity { dim: mesh.dim() };
            let ap = ApproxCoefficient::identity(&mesh);
            for space in [
                DofSpace::cr(&mesh).unconstrained(),
                DofSpace::gcr(&mesh, &ap).unwrap().unconstrained(),
                DofSpace::p1c(&mesh).unconstrained(),
            ] {
                let pair = assemble_default(&space, &f).unwrap();
                let ones: Vec<f64> = (0..space.dof_count())
                    .map(|i| {
                        if space.full_index(i) < mesh.facet_count()
                            || space.kind() == SpaceKind::P1c
                        {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let r = pair.stiffness.mul_vec(&ones);
                assert!(r.iter().all(|x| x.abs() < 1e-12), "{:?}", space.kind());
                let total: f64 = pair.mass.bilinear(&ones, &ones);
                assert!((total - mesh.total_volume()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cr_block_of_gcr() {
        let mesh = generate_unit_square(2);
        let f = variable_square_field();
        let ap = approximate(&f, &mesh, AbarRule::Centroid).unwrap();
        let gcr = assemble_default(&DofSpace::gcr(&mesh, &ap).unwrap(), &f).unwrap();
        let cr = assemble(&DofSpace::cr(&mesh), &f, &QuadratureRule::simplex(2, 6)).unwrap();
        let n = cr.dim();
        let (kg, mg) = (gcr.stiffness.to_dense(), gcr.mass.to_dense());
        let (kc, mc) = (cr.stiffness.to_dense(), cr.mass.to_dense());
        assert!((kg.view((0, 0), (n, n)) - &kc).amax() < 1e-13);
        assert!((mg.view((0, 0), (n, n)) - &mc).amax() < 1e-13);
    }

    #[test]
    fn doubling_the_coefficient() {
        let mesh = generate_unit_square(1);
        let f = variable_square_field();
        let ap = approximate(&f, &mesh, AbarRule::Centroid).unwrap();
        let space = DofSpace::gcr(&mesh, &ap).unwrap();
        let a = assemble_default(&space, &f).unwrap();
        let b = assemble_default(&space, &f.scaled(2.0)).unwrap();
        assert_eq!(b.stiffness, a.stiffness.scaled(2.0));
        assert_eq!(b.mass, a.mass);
    }

    #[test]
    fn assembly_is_reproducible() {
        let mesh = generate_lshape(2);
        let f = CoefficientField::Identity { dim: 2 };
        let space = DofSpace::gcr(&mesh, &ApproxCoefficient::identity(&mesh)).unwrap();
        let a = assemble_default(&space, &f).unwrap();
        let b = assemble_default(&space, &f).unwrap();
        assert_eq!(
            a.stiffness.to_coordinate_text(),
            b.stiffness.to_coordinate_text()
        );
    }

    /// Element matrices of the enriched CR element written from scratch:
    /// basis `1 - n theta_j` and bubble `(n+2)/2 - c |x - M|^2`.
    fn ecr_oracle(mesh: &SimplicialMesh, k: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let g = mesh.cell_geometry(k);
        let n = g.dim();
        let nf = n as f64;
        let mut h = 0.0;
        for p in 0..=n {
            for q in p + 1..=n {
                h += (&g.vertices[p] - &g.vertices[q]).norm_squared();
            }
        }
        let c = nf * (nf + 1.0).powi(2) * (nf + 2.0) / (2.0 * h);
        let basis = |x: &DVector<f64>| -> (Vec<f64>, Vec<DVector<f64>>) {
            let th = g.barycentric(x);
            let mut v: Vec<f64> = th.iter().map(|t| 1.0 - nf * t).collect();
            let mut d: Vec<DVector<f64>> = g.bary_grads.iter().map(|b| b * -nf).collect();
            let r = x - &g.centroid;
            v.push((nf + 2.0) / 2.0 - c * r.norm_squared());
            d.push(r * (-2.0 * c));
            (v, d)
        };
        // Degree-4 collapsed Gauss rule built independently of the library.
        let gl = [
            (0.5 - 0.5 * (3.0f64 / 5.0).sqrt(), 5.0 / 18.0),
            (0.5, 8.0 / 18.0),
            (0.5 + 0.5 * (3.0f64 / 5.0).sqrt(), 5.0 / 18.0),
        ];
        let mut ke = DMatrix::zeros(n + 2, n + 2);
        let mut me = DMatrix::zeros(n + 2, n + 2);
        assert_eq!(n, 2);
        for &(u, wu) in &gl {
            for &(v, wv) in &gl {
                let (a, b) = (u, v * (1.0 - u));
                let w = 2.0 * wu * wv * (1.0 - u) * g.volume;
                let x = g.point(&[1.0 - a - b, a, b]);
                let (val, grad) = basis(&x);
                for i in 0..n + 2 {
                    for j in 0..n + 2 {
                        ke[(i, j)] += w * grad[i].dot(&grad[j]);
                        me[(i, j)] += w * val[i] * val[j];
                    }
                }
            }
        }
        (ke, me)
    }

    #[test]
    fn identity_gcr_is_ecr() {
        let mesh = generate_lshape(1);
        let f = CoefficientField::Identity { dim: 2 };
        let space = DofSpace::gcr(&mesh, &ApproxCoefficient::identity(&mesh)).unwrap();
        let quad = QuadratureRule::simplex(2, 4);
        for k in 0..mesh.cell_count() {
            let (ke, me) = element_matrices(&space, &f, &quad, k).unwrap();
            let (ko, mo) = ecr_oracle(&mesh, k);
            assert!((ke - ko).amax() < 1e-12);
            assert!((me - mo).amax() < 1e-12);
        }
    }

    #[test]
    fn p1_single_interior_vertex() {
        // The centre of the level-1 square has six incident triangles of
        // area 1/8 each; hand assembly gives stiffness 4 and mass
        // 6 * (1/8) / 6 = 1/8, hence the quotient 32.
        let mesh = generate_unit_square(1);
        let pair = assemble_default(
            &DofSpace::p1c(&mesh),
            &CoefficientField::Identity { dim: 2 },
        )
        .unwrap();
        assert_eq!(pair.dim(), 1);
        let (k, m) = (pair.stiffness.get(0, 0), pair.mass.get(0, 0));
        assert!((k - 4.0).abs() < 1e-14);
        assert!((m - 0.125).abs() < 1e-15);
        assert!((k / m - 32.0).abs() < 1e-12);
    }

    #[test]
    fn p1_single_vertex_with_variable_coefficient() {
        let mesh = generate_unit_square(1);
        let f = variable_square_field();
        let pair = assemble_default(&DofSpace::p1c(&mesh), &f).unwrap();
        let q = pair.stiffness.get(0, 0) / pair.mass.get(0, 0);
        assert!((q - 39.0).abs() < 0.5, "{q}");
    }
}

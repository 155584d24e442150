//! Finite element spaces on a [`SimplicialMesh`]: Crouzeix-Raviart (CR),
//! the coefficient-adapted generalized CR space (GCR = CR plus one quadratic
//! bubble per cell) and conforming P1, together with the interpolation
//! operators between them.
//!
//! Coefficient vectors come in two flavours. *Full* vectors carry one entry
//! per global DOF, boundary ones included; *free* vectors carry only the
//! DOFs that survive the homogeneous Dirichlet condition. GCR full numbering
//! is facets first, then one bubble per cell.

use nalgebra::{DMatrix, DVector};

use crate::coeff::ApproxCoefficient;
use crate::mesh::{CellGeometry, SimplicialMesh};
use crate::quadrature::QuadratureRule;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    Cr,
    Gcr,
    P1c,
}

impl SpaceKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::Cr => "CR",
            Self::Gcr => "GCR",
            Self::P1c => "P1",
        }
    }
}

/// The quadratic cell bubble
/// `phi(x) = (n+2)/2 - c (x - M)^T Bbar (x - M)` with
/// `c = n (n+1)^2 (n+2) / (2 H)` and `H = sum_{p<q} (a_p - a_q)^T Bbar (a_p - a_q)`.
///
/// It has unit cell mean and vanishing integral over every facet, and
/// `Abar grad(phi)` has constant normal component on each facet.
#[derive(Debug, Clone)]
pub struct BubbleFunction {
    pub cell: usize,
    pub h_sum: f64,
    pub center: DVector<f64>,
    pub bbar: DMatrix<f64>,
    scale: f64,
}

impl BubbleFunction {
    pub fn new(cell: usize, geom: &CellGeometry, bbar: &DMatrix<f64>) -> Result<Self> {
        let n = geom.dim();
        let mut h_sum = 0.0;
        for p in 0..=n {
            for q in p + 1..=n {
                let d = &geom.vertices[p] - &geom.vertices[q];
                h_sum += d.dot(&(bbar * &d));
            }
        }
        if !(h_sum > 0.0) || !h_sum.is_finite() {
            return Err(Error::NonPositiveBubbleScale { cell, value: h_sum });
        }
        let nf = n as f64;
        Ok(Self {
            cell,
            h_sum,
            center: geom.centroid.clone(),
            bbar: bbar.clone(),
            scale: nf * (nf + 1.0).powi(2) * (nf + 2.0) / (2.0 * h_sum),
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// The factor `c` in front of the quadratic form.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let d = x - &self.center;
        (self.dim() as f64 + 2.0) / 2.0 - self.scale * d.dot(&(&self.bbar * &d))
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let d = x - &self.center;
        &self.bbar * d * (-2.0 * self.scale)
    }
}

/// Builds the bubble of `cell` for the given `Bbar|_K`.
pub fn build_bubble(
    mesh: &SimplicialMesh,
    cell: usize,
    bbar: &DMatrix<f64>,
) -> Result<BubbleFunction> {
    BubbleFunction::new(cell, &mesh.cell_geometry(cell), bbar)
}

/// Values and gradients of all local basis functions at one point.
#[derive(Debug, Clone)]
pub struct LocalBasis {
    pub values: Vec<f64>,
    pub grads: Vec<DVector<f64>>,
}

/// DOF numbering of one space on one mesh.
#[derive(Debug, Clone)]
pub struct DofSpace<'m> {
    mesh: &'m SimplicialMesh,
    kind: SpaceKind,
    bubbles: Vec<BubbleFunction>,
    constrained: bool,
    full_to_free: Vec<Option<usize>>,
    free_to_full: Vec<usize>,
}

impl<'m> DofSpace<'m> {
    pub fn cr(mesh: &'m SimplicialMesh) -> Self {
        Self::build(mesh, SpaceKind::Cr, Vec::new(), true)
    }

    pub fn p1c(mesh: &'m SimplicialMesh) -> Self {
        Self::build(mesh, SpaceKind::P1c, Vec::new(), true)
    }

    pub fn gcr(mesh: &'m SimplicialMesh, approx: &ApproxCoefficient) -> Result<Self> {
        if approx.bbar.len() != mesh.cell_count() {
            return Err(Error::InvalidRequest(format!(
                "coefficient has {} cells, mesh has {}",
                approx.bbar.len(),
                mesh.cell_count()
            )));
        }
        let bubbles = (0..mesh.cell_count())
            .map(|k| build_bubble(mesh, k, &approx.bbar[k]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::build(mesh, SpaceKind::Gcr, bubbles, true))
    }

    /// The same space without boundary conditions (every DOF free).
    pub fn unconstrained(self) -> Self {
        Self::build(self.mesh, self.kind, self.bubbles, false)
    }

    fn build(
        mesh: &'m SimplicialMesh,
        kind: SpaceKind,
        bubbles: Vec<BubbleFunction>,
        constrained: bool,
    ) -> Self {
        let (entity_count, is_boundary): (usize, Box<dyn Fn(usize) -> bool>) = match kind {
            SpaceKind::P1c => (
                mesh.vertex_count(),
                Box::new(|v| mesh.is_boundary_vertex(v)),
            ),
            _ => (mesh.facet_count(), Box::new(|f| mesh.is_boundary_facet(f))),
        };
        let full_count = entity_count
            + if kind == SpaceKind::Gcr {
                mesh.cell_count()
            } else {
                0
            };
        let mut full_to_free = vec![None; full_count];
        let mut free_to_full = Vec::new();
        for (i, slot) in full_to_free.iter_mut().enumerate() {
            if constrained && i < entity_count && is_boundary(i) {
                continue;
            }
            *slot = Some(free_to_full.len());
            free_to_full.push(i);
        }
        Self {
            mesh,
            kind,
            bubbles,
            constrained,
            full_to_free,
            free_to_full,
        }
    }

    pub fn mesh(&self) -> &'m SimplicialMesh {
        self.mesh
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn is_constrained(&self) -> bool {
        self.constrained
    }

    pub fn bubbles(&self) -> &[BubbleFunction] {
        &self.bubbles
    }

    /// Number of free DOFs.
    pub fn dof_count(&self) -> usize {
        self.free_to_full.len()
    }

    pub fn full_count(&self) -> usize {
        self.full_to_free.len()
    }

    pub fn free_index(&self, full: usize) -> Option<usize> {
        self.full_to_free[full]
    }

    pub fn full_index(&self, free: usize) -> usize {
        self.free_to_full[free]
    }

    /// Full DOFs removed by the boundary condition.
    pub fn constrained_dofs(&self) -> Vec<usize> {
        (0..self.full_count())
            .filter(|&i| self.full_to_free[i].is_none())
            .collect()
    }

    pub fn local_count(&self) -> usize {
        let n = self.mesh.dim();
        match self.kind {
            SpaceKind::Gcr => n + 2,
            _ => n + 1,
        }
    }

    /// Full DOF indices of cell `k`, in local basis order.
    pub fn local_dofs(&self, k: usize) -> Vec<usize> {
        match self.kind {
            SpaceKind::P1c => self.mesh.cell(k).to_vec(),
            SpaceKind::Cr => self.mesh.cell_facets(k).to_vec(),
            SpaceKind::Gcr => {
                let mut d = self.mesh.cell_facets(k).to_vec();
                d.push(self.mesh.facet_count() + k);
                d
            }
        }
    }

    /// Local basis at barycentric point `bary` of cell `k`.
    pub fn eval_basis(&self, k: usize, geom: &CellGeometry, bary: &[f64]) -> LocalBasis {
        let n = geom.dim();
        let nf = n as f64;
        let mut values = Vec::with_capacity(n + 2);
        let mut grads = Vec::with_capacity(n + 2);
        match self.kind {
            SpaceKind::P1c => {
                values.extend_from_slice(bary);
                grads.extend(geom.bary_grads.iter().cloned());
            }
            SpaceKind::Cr | SpaceKind::Gcr => {
                for (&b, g) in bary.iter().zip(&geom.bary_grads).take(n + 1) {
                    values.push(1.0 - nf * b);
                    grads.push(g * -nf);
                }
                if self.kind == SpaceKind::Gcr {
                    let x = geom.point(bary);
                    let b = &self.bubbles[k];
                    values.push(b.value(&x));
                    grads.push(b.gradient(&x));
                }
            }
        }
        LocalBasis { values, grads }
    }

    /// Value and gradient of the function with full coefficients `coeffs`.
    pub fn eval(
        &self,
        k: usize,
        geom: &CellGeometry,
        bary: &[f64],
        coeffs: &[f64],
    ) -> (f64, DVector<f64>) {
        let basis = self.eval_basis(k, geom, bary);
        let mut v = 0.0;
        let mut g = DVector::zeros(geom.dim());
        for (i, dof) in self.local_dofs(k).into_iter().enumerate() {
            v += coeffs[dof] * basis.values[i];
            g.axpy(coeffs[dof], &basis.grads[i], 1.0);
        }
        (v, g)
    }

    /// Free entries of a full vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free_to_full.iter().map(|&i| full[i]).collect()
    }

    /// Full vector with zeros at constrained DOFs.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.full_count()];
        for (&i, &x) in self.free_to_full.iter().zip(free) {
            full[i] = x;
        }
        full
    }
}

fn facet_mean(
    mesh: &SimplicialMesh,
    f: usize,
    v: &dyn Fn(&[f64]) -> f64,
    rule: &QuadratureRule,
) -> f64 {
    let verts = mesh.facet(f);
    let n = mesh.dim();
    let mut x = vec![0.0; n];
    let mut acc = 0.0;
    for (p, w) in rule.iter() {
        x.iter_mut().for_each(|c| *c = 0.0);
        for (&t, &vi) in p.iter().zip(verts) {
            for (c, y) in x.iter_mut().zip(mesh.vertex(vi)) {
                *c += t * y;
            }
        }
        acc += w * v(&x);
    }
    acc
}

fn cell_mean(geom: &CellGeometry, v: &dyn Fn(&[f64]) -> f64, rule: &QuadratureRule) -> f64 {
    rule.iter()
        .map(|(p, w)| w * v(geom.point(p).as_slice()))
        .sum()
}

/// Facet means of `v` (the CR interpolant), one per facet, computed with a
/// rule of the given degree.
pub fn interpolate_cr(mesh: &SimplicialMesh, v: &dyn Fn(&[f64]) -> f64, degree: usize) -> Vec<f64> {
    let rule = QuadratureRule::simplex(mesh.dim() - 1, degree);
    (0..mesh.facet_count())
        .map(|f| facet_mean(mesh, f, v, &rule))
        .collect()
}

/// GCR interpolant as a full vector: facet DOFs are facet means of `v`,
/// bubble DOFs restore the cell means. Boundary facet DOFs are kept as
/// computed; they vanish exactly when `v` has zero boundary means.
pub fn interpolate_gcr(space: &DofSpace, v: &dyn Fn(&[f64]) -> f64, degree: usize) -> Vec<f64> {
    assert_eq!(space.kind(), SpaceKind::Gcr);
    let mesh = space.mesh();
    let n = mesh.dim();
    let mut out = interpolate_cr(mesh, v, degree);
    let rule = QuadratureRule::simplex(n, degree);
    for k in 0..mesh.cell_count() {
        let geom = mesh.cell_geometry(k);
        let cr_mean: f64 =
            mesh.cell_facets(k).iter().map(|&f| out[f]).sum::<f64>() / (n + 1) as f64;
        out.push(cell_mean(&geom, v, &rule) - cr_mean);
    }
    out
}

/// Drops the bubble part of a full GCR vector; facet integrals are
/// unchanged because every bubble has zero facet integrals.
pub fn project_cr(mesh: &SimplicialMesh, gcr_full: &[f64]) -> Vec<f64> {
    gcr_full[..mesh.facet_count()].to_vec()
}

/// Trace at local vertex `p` of the CR function with local coefficients `c`.
pub fn cr_vertex_trace(c: &[f64], p: usize) -> f64 {
    let n = c.len() - 1;
    c.iter().sum::<f64>() - n as f64 * c[p]
}

/// Vertex averaging of a full CR vector into a full P1 vector: each
/// interior vertex receives the mean of the traces of its incident cells,
/// boundary vertices are set to zero.
pub fn project_conforming(mesh: &SimplicialMesh, cr_full: &[f64]) -> Vec<f64> {
    let mut sum = vec![0.0; mesh.vertex_count()];
    let mut count = vec![0usize; mesh.vertex_count()];
    let mut c = Vec::with_capacity(mesh.dim() + 1);
    for k in 0..mesh.cell_count() {
        c.clear();
        c.extend(mesh.cell_facets(k).iter().map(|&f| cr_full[f]));
        for (p, &v) in mesh.cell(k).iter().enumerate() {
            sum[v] += cr_vertex_trace(&c, p);
            count[v] += 1;
        }
    }
    (0..mesh.vertex_count())
        .map(|v| {
            if mesh.is_boundary_vertex(v) || count[v] == 0 {
                0.0
            } else {
                sum[v] / count[v] as f64
            }
        })
        .collect()
}

//! Conforming simplicial meshes in two and three dimensions.
//!
//! A [`SimplicialMesh`] owns its vertex coordinates and cell connectivity and
//! derives the facet topology on construction. Local facet `j` of a cell is
//! the facet opposite local vertex `j`; this convention is shared by every
//! finite element space in [`crate::fespace`].

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

const NO_CELL: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct SimplicialMesh {
    dim: usize,
    coords: Vec<f64>,
    cells: Vec<usize>,
    facets: Vec<usize>,
    facet_cells: Vec<[usize; 2]>,
    cell_facets: Vec<usize>,
    boundary_vertex: Vec<bool>,
}

/// Shape statistics entering the interpolation constants.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshStats {
    /// Maximal cell diameter.
    pub h: f64,
    pub h_per_cell: Vec<f64>,
    /// Largest ratio `|K'| / |K|` over all pairs of cells.
    pub xi: f64,
    /// Largest number of cells sharing one vertex.
    pub valence: usize,
    pub vertex_count: usize,
    pub cell_count: usize,
    pub facet_count: usize,
}

/// Affine geometry of one cell, computed on demand.
#[derive(Debug, Clone)]
pub struct CellGeometry {
    pub vertices: Vec<DVector<f64>>,
    /// Columns `a_j - a_0`, `j = 1..=n`.
    pub jacobian: DMatrix<f64>,
    pub volume: f64,
    pub centroid: DVector<f64>,
    /// Gradients of the barycentric coordinates.
    pub bary_grads: Vec<DVector<f64>>,
    pub diameter: f64,
}

impl CellGeometry {
    fn new(vertices: Vec<DVector<f64>>) -> Option<Self> {
        let n = vertices[0].len();
        let mut jacobian = DMatrix::zeros(n, n);
        for j in 0..n {
            jacobian.set_column(j, &(&vertices[j + 1] - &vertices[0]));
        }
        let det = jacobian.determinant();
        let volume = det.abs() / factorial(n) as f64;
        let scale = vertices
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
            .max(1.0);
        if volume <= 1e-14 * scale.powi(n as i32) {
            return None;
        }
        let inv = jacobian.clone().try_inverse()?;
        let mut bary_grads = Vec::with_capacity(n + 1);
        let mut g0 = DVector::zeros(n);
        for j in 0..n {
            let g = inv.row(j).transpose();
            g0 -= &g;
            bary_grads.push(g);
        }
        bary_grads.insert(0, g0);
        let mut centroid = DVector::zeros(n);
        for v in &vertices {
            centroid += v;
        }
        centroid /= (n + 1) as f64;
        let mut diameter = 0.0f64;
        for p in 0..=n {
            for q in p + 1..=n {
                diameter = diameter.max((&vertices[p] - &vertices[q]).norm());
            }
        }
        Some(Self {
            vertices,
            jacobian,
            volume,
            centroid,
            bary_grads,
            diameter,
        })
    }

    pub fn dim(&self) -> usize {
        self.jacobian.nrows()
    }

    /// Physical point for barycentric coordinates `bary` (length `n + 1`).
    pub fn point(&self, bary: &[f64]) -> DVector<f64> {
        let mut x = DVector::zeros(self.dim());
        for (v, &t) in self.vertices.iter().zip(bary) {
            x.axpy(t, v, 1.0);
        }
        x
    }

    /// Barycentric coordinates of the physical point `x`.
    pub fn barycentric(&self, x: &DVector<f64>) -> Vec<f64> {
        let d = x - &self.vertices[0];
        let mut out = vec![0.0; self.dim() + 1];
        let mut sum = 0.0;
        for (o, g) in out.iter_mut().zip(&self.bary_grads).skip(1) {
            *o = g.dot(&d);
            sum += *o;
        }
        out[0] = 1.0 - sum;
        out
    }

    /// Vertices of local facet `j` (all vertices except `j`).
    pub fn facet_vertices(&self, j: usize) -> Vec<DVector<f64>> {
        (0..self.vertices.len())
            .filter(|&p| p != j)
            .map(|p| self.vertices[p].clone())
            .collect()
    }

    /// Outward unit normal of local facet `j`.
    pub fn facet_normal(&self, j: usize) -> DVector<f64> {
        let g = &self.bary_grads[j];
        -g / g.norm()
    }

    /// Measure of local facet `j`, from `|E| = n |K| |grad theta_j|`.
    pub fn facet_measure(&self, j: usize) -> f64 {
        self.dim() as f64 * self.volume * self.bary_grads[j].norm()
    }
}

pub(crate) fn factorial(n: usize) -> usize {
    (1..=n).product::<usize>().max(1)
}

fn simplex_measure(points: &[DVector<f64>]) -> f64 {
    // Gram determinant; works for any simplex embedded in R^n.
    let k = points.len() - 1;
    if k == 0 {
        return 1.0;
    }
    let n = points[0].len();
    let mut e = DMatrix::zeros(n, k);
    for j in 0..k {
        e.set_column(j, &(&points[j + 1] - &points[0]));
    }
    let gram = e.transpose() * e;
    gram.determinant().max(0.0).sqrt() / factorial(k) as f64
}

type FacetKey = [usize; 3];

fn facet_key(verts: &[usize]) -> FacetKey {
    let mut key = [NO_CELL; 3];
    key[..verts.len()].copy_from_slice(verts);
    key[..verts.len()].sort_unstable();
    key
}

impl SimplicialMesh {
    /// Builds a mesh, orienting every cell positively and deriving facets.
    pub fn new(dim: usize, coords: Vec<f64>, mut cells: Vec<usize>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidMesh(format!("dimension {dim} not supported")));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidMesh("coordinate array length".into()));
        }
        let nv = dim + 1;
        if !cells.len().is_multiple_of(nv) {
            return Err(Error::InvalidMesh("cell array length".into()));
        }
        let vertex_count = coords.len() / dim;
        if let Some(&bad) = cells.iter().find(|&&v| v >= vertex_count) {
            return Err(Error::InvalidMesh(format!(
                "vertex index {bad} out of range"
            )));
        }
        let cell_count = cells.len() / nv;

        for k in 0..cell_count {
            let c = &mut cells[k * nv..(k + 1) * nv];
            let mut jac = DMatrix::zeros(dim, dim);
            for j in 0..dim {
                for i in 0..dim {
                    jac[(i, j)] = coords[c[j + 1] * dim + i] - coords[c[0] * dim + i];
                }
            }
            let det = jac.determinant();
            let scale = c
                .iter()
                .flat_map(|&v| coords[v * dim..(v + 1) * dim].iter())
                .fold(1.0f64, |m, x| m.max(x.abs()));
            if det.abs() <= 1e-14 * scale.powi(dim as i32) {
                return Err(Error::DegenerateCell { cell: k });
            }
            if det < 0.0 {
                c.swap(0, 1);
            }
        }

        let mut index: HashMap<FacetKey, usize> = HashMap::with_capacity(cell_count * nv);
        let mut facets = Vec::new();
        let mut facet_cells: Vec<[usize; 2]> = Vec::new();
        let mut cell_facets = vec![0; cell_count * nv];
        let mut local = Vec::with_capacity(dim);
        for k in 0..cell_count {
            let c = &cells[k * nv..(k + 1) * nv];
            for j in 0..nv {
                local.clear();
                local.extend((0..nv).filter(|&p| p != j).map(|p| c[p]));
                let key = facet_key(&local);
                let f = match index.get(&key) {
                    Some(&f) => {
                        if facet_cells[f][1] != NO_CELL {
                            return Err(Error::InvalidMesh(format!(
                                "facet {:?} shared by more than two cells",
                                &key[..dim]
                            )));
                        }
                        facet_cells[f][1] = k;
                        f
                    }
                    None => {
                        let f = facet_cells.len();
                        index.insert(key, f);
                        facets.extend_from_slice(&key[..dim]);
                        facet_cells.push([k, NO_CELL]);
                        f
                    }
                };
                cell_facets[k * nv + j] = f;
            }
        }

        let mut boundary_vertex = vec![false; vertex_count];
        for (f, fc) in facet_cells.iter().enumerate() {
            if fc[1] == NO_CELL {
                for &v in &facets[f * dim..(f + 1) * dim] {
                    boundary_vertex[v] = true;
                }
            }
        }

        Ok(Self {
            dim,
            coords,
            cells,
            facets,
            facet_cells,
            cell_facets,
            boundary_vertex,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertex_count(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn facet_count(&self) -> usize {
        self.facet_cells.len()
    }

    pub fn vertex(&self, v: usize) -> &[f64] {
        &self.coords[v * self.dim..(v + 1) * self.dim]
    }

    pub fn cell(&self, k: usize) -> &[usize] {
        let nv = self.dim + 1;
        &self.cells[k * nv..(k + 1) * nv]
    }

    /// Sorted vertex indices of facet `f`.
    pub fn facet(&self, f: usize) -> &[usize] {
        &self.facets[f * self.dim..(f + 1) * self.dim]
    }

    /// The one or two cells adjacent to facet `f`.
    pub fn facet_cells(&self, f: usize) -> (usize, Option<usize>) {
        let [a, b] = self.facet_cells[f];
        (a, (b != NO_CELL).then_some(b))
    }

    /// Global facet indices of cell `k`, local facet `j` opposite local vertex `j`.
    pub fn cell_facets(&self, k: usize) -> &[usize] {
        let nv = self.dim + 1;
        &self.cell_facets[k * nv..(k + 1) * nv]
    }

    pub fn is_boundary_facet(&self, f: usize) -> bool {
        self.facet_cells[f][1] == NO_CELL
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn boundary_facet_count(&self) -> usize {
        self.facet_cells
            .iter()
            .filter(|fc| fc[1] == NO_CELL)
            .count()
    }

    pub fn interior_facet_count(&self) -> usize {
        self.facet_count() - self.boundary_facet_count()
    }

    pub fn interior_vertex_count(&self) -> usize {
        self.boundary_vertex.iter().filter(|&&b| !b).count()
    }

    pub fn cell_geometry(&self, k: usize) -> CellGeometry {
        let verts = self
            .cell(k)
            .iter()
            .map(|&v| DVector::from_column_slice(self.vertex(v)))
            .collect();
        CellGeometry::new(verts).expect("cells are validated non-degenerate on construction")
    }

    pub fn cell_volume(&self, k: usize) -> f64 {
        self.cell_geometry(k).volume
    }

    pub fn facet_measure(&self, f: usize) -> f64 {
        let pts: Vec<_> = self
            .facet(f)
            .iter()
            .map(|&v| DVector::from_column_slice(self.vertex(v)))
            .collect();
        simplex_measure(&pts)
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.cell_count()).map(|k| self.cell_volume(k)).sum()
    }

    /// Number of cells containing each vertex.
    pub fn vertex_valence(&self) -> Vec<usize> {
        let mut count = vec![0; self.vertex_count()];
        for &v in &self.cells {
            count[v] += 1;
        }
        count
    }

    pub fn stats(&self) -> MeshStats {
        compute_stats(self)
    }

    /// Plain-text serialization: header `dim vertex_count cell_count`,
    /// then one line per vertex and one line per cell (0-based indices).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} {}",
            self.dim,
            self.vertex_count(),
            self.cell_count()
        );
        for v in 0..self.vertex_count() {
            let line: Vec<String> = self.vertex(v).iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        for k in 0..self.cell_count() {
            let line: Vec<String> = self.cell(k).iter().map(|i| i.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (line, header) = lines.next().ok_or(Error::MeshParse {
            line: 1,
            msg: "empty mesh file".into(),
        })?;
        let head: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::MeshParse {
                line,
                msg: format!("bad header: {e}"),
            })?;
        let [dim, nv, nc] = head[..] else {
            return Err(Error::MeshParse {
                line,
                msg: "header must be `dim vertex_count cell_count`".into(),
            });
        };
        let mut coords = Vec::with_capacity(nv * dim);
        for _ in 0..nv {
            let (line, l) = lines.next().ok_or(Error::MeshParse {
                line,
                msg: "missing vertex lines".into(),
            })?;
            let row: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::MeshParse {
                    line,
                    msg: format!("bad coordinate: {e}"),
                })?;
            if row.len() != dim {
                return Err(Error::MeshParse {
                    line,
                    msg: format!("expected {dim} coordinates"),
                });
            }
            coords.extend(row);
        }
        let mut cells = Vec::with_capacity(nc * (dim + 1));
        for _ in 0..nc {
            let (line, l) = lines.next().ok_or(Error::MeshParse {
                line,
                msg: "missing cell lines".into(),
            })?;
            let row: Vec<usize> = l
                .split_whitespace()
                .map(|t| t.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::MeshParse {
                    line,
                    msg: format!("bad cell index: {e}"),
                })?;
            if row.len() != dim + 1 {
                return Err(Error::MeshParse {
                    line,
                    msg: format!("expected {} indices", dim + 1),
                });
            }
            cells.extend(row);
        }
        Self::new(dim, coords, cells)
    }
}

/// Computes `h`, per-cell diameters, the volume ratio `xi` and the valence `N`.
pub fn compute_stats(mesh: &SimplicialMesh) -> MeshStats {
    let mut h_per_cell = Vec::with_capacity(mesh.cell_count());
    let mut vmin = f64::INFINITY;
    let mut vmax = 0.0f64;
    for k in 0..mesh.cell_count() {
        let g = mesh.cell_geometry(k);
        h_per_cell.push(g.diameter);
        vmin = vmin.min(g.volume);
        vmax = vmax.max(g.volume);
    }
    let h = h_per_cell.iter().cloned().fold(0.0, f64::max);
    MeshStats {
        h,
        h_per_cell,
        xi: if mesh.cell_count() > 0 {
            vmax / vmin
        } else {
            1.0
        },
        valence: mesh.vertex_valence().into_iter().max().unwrap_or(0),
        vertex_count: mesh.vertex_count(),
        cell_count: mesh.cell_count(),
        facet_count: mesh.facet_count(),
    }
}

/// `(0,1)^2` split into `2^levels x 2^levels` squares, each cut along the
/// diagonal from its lower-left to its upper-right corner.
pub fn generate_unit_square(levels: u32) -> SimplicialMesh {
    let m = 1usize << levels;
    square_grid(m, m, |_, _| true)
}

/// The L-shaped domain `(0,1)^2 \ [0.5,1]^2`, built from `3 * 4^levels`
/// squares of side `0.5 / 2^levels` with the same diagonal convention as
/// [`generate_unit_square`].
pub fn generate_lshape(levels: u32) -> SimplicialMesh {
    let m = 2usize << levels;
    let half = m / 2;
    square_grid(m, m, move |i, j| i < half || j < half)
}

fn square_grid(m: usize, _n: usize, keep: impl Fn(usize, usize) -> bool) -> SimplicialMesh {
    let step = 1.0 / m as f64;
    let mut id = vec![NO_CELL; (m + 1) * (m + 1)];
    let mut coords = Vec::new();
    let mut cells = Vec::new();
    let mut vid = |i: usize, j: usize, coords: &mut Vec<f64>| {
        let slot = &mut id[j * (m + 1) + i];
        if *slot == NO_CELL {
            *slot = coords.len() / 2;
            coords.push(i as f64 * step);
            coords.push(j as f64 * step);
        }
        *slot
    };
    for j in 0..m {
        for i in 0..m {
            if !keep(i, j) {
                continue;
            }
            let v00 = vid(i, j, &mut coords);
            let v10 = vid(i + 1, j, &mut coords);
            let v11 = vid(i + 1, j + 1, &mut coords);
            let v01 = vid(i, j + 1, &mut coords);
            cells.extend_from_slice(&[v00, v10, v11, v00, v11, v01]);
        }
    }
    SimplicialMesh::new(2, coords, cells).expect("structured grid is valid")
}

/// `(0,1)^3` split into `2^levels` cubes per direction, six tetrahedra per
/// cube along the main diagonal.
pub fn generate_unit_cube(levels: u32) -> SimplicialMesh {
    let m = 1usize << levels;
    let step = 1.0 / m as f64;
    let idx = |i: usize, j: usize, k: usize| (k * (m + 1) + j) * (m + 1) + i;
    let mut coords = Vec::with_capacity((m + 1).pow(3) * 3);
    for k in 0..=m {
        for j in 0..=m {
            for i in 0..=m {
                coords.extend_from_slice(&[i as f64 * step, j as f64 * step, k as f64 * step]);
            }
        }
    }
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut cells = Vec::with_capacity(m.pow(3) * 24);
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                for perm in PERMS {
                    let mut p = [i, j, k];
                    cells.push(idx(p[0], p[1], p[2]));
                    for &axis in &perm {
                        p[axis] += 1;
                        cells.push(idx(p[0], p[1], p[2]));
                    }
                }
            }
        }
    }
    SimplicialMesh::new(3, coords, cells).expect("structured grid is valid")
}

/// Uniform red refinement: every simplex is split into `2^n` children using
/// edge midpoints. Tetrahedra cut their inner octahedron along the diagonal
/// joining the midpoints of edges `(0,2)` and `(1,3)`.
pub fn refine_uniform(mesh: &SimplicialMesh) -> SimplicialMesh {
    let dim = mesh.dim();
    let mut coords = mesh.coords.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, coords: &mut Vec<f64>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoint.entry(key).or_insert_with(|| {
            let id = coords.len() / dim;
            for i in 0..dim {
                let x = 0.5 * (coords[a * dim + i] + coords[b * dim + i]);
                coords.push(x);
            }
            id
        })
    };
    let mut cells = Vec::with_capacity(mesh.cells.len() << dim);
    for k in 0..mesh.cell_count() {
        let c = mesh.cell(k);
        if dim == 2 {
            let (a, b, d) = (c[0], c[1], c[2]);
            let ab = mid(a, b, &mut coords);
            let bd = mid(b, d, &mut coords);
            let da = mid(d, a, &mut coords);
            cells.extend_from_slice(&[a, ab, da, ab, b, bd, da, bd, d, ab, bd, da]);
        } else {
            let x = [c[0], c[1], c[2], c[3]];
            let m01 = mid(x[0], x[1], &mut coords);
            let m02 = mid(x[0], x[2], &mut coords);
            let m03 = mid(x[0], x[3], &mut coords);
            let m12 = mid(x[1], x[2], &mut coords);
            let m13 = mid(x[1], x[3], &mut coords);
            let m23 = mid(x[2], x[3], &mut coords);
            cells.extend_from_slice(&[
                x[0], m01, m02, m03, //
                m01, x[1], m12, m13, //
                m02, m12, x[2], m23, //
                m03, m13, m23, x[3], //
                m01, m02, m03, m13, //
                m01, m02, m12, m13, //
                m02, m03, m13, m23, //
                m02, m12, m13, m23,
            ]);
        }
    }
    SimplicialMesh::new(dim, coords, cells).expect("refinement of a valid mesh is valid")
}

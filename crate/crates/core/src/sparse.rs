//! Symmetric sparse matrices and a direct solver for them.
//!
//! [`SymCsr`] stores the upper triangle in compressed rows. [`EnvelopeCholesky`]
//! factors an SPD matrix after a reverse Cuthill-McKee reordering, which
//! keeps the profile small for the mesh-derived matrices used here.

use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Symmetric matrix, upper triangle (diagonal included) in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct SymCsr {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SymCsr {
    /// Sums duplicate entries; entries below the diagonal are mirrored.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        for t in triplets.iter_mut() {
            if t.0 > t.1 {
                *t = (t.1, t.0, t.2);
            }
        }
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            assert!(j < n, "index out of range");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for i in 0..a.nrows() {
            for j in i..a.ncols() {
                if a[(i, j)] != 0.0 || i == j {
                    t.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(a.nrows(), t)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored (upper-triangle) entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of stored row `i` (columns `>= i`).
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |p| vals[p])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let xi = x[i];
            let mut acc = 0.0;
            for (&j, &a) in cols.iter().zip(vals) {
                acc += a * x[j];
                if j != i {
                    y[j] += a * xi;
                }
            }
            y[i] += acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mul_vec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        a
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Both triangles as `i j value` lines, 0-based.
    pub fn to_coordinate_text(&self) -> String {
        let mut entries = Vec::with_capacity(2 * self.nnz());
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                entries.push((i, j, v));
                if i != j {
                    entries.push((j, i, v));
                }
            }
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut s = String::new();
        for (i, j, v) in entries {
            let _ = writeln!(s, "{i} {j} {v:.17e}");
        }
        s
    }

    /// Symmetric adjacency lists of the off-diagonal pattern.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for i in 0..self.n {
            let (cols, _) = self.row(i);
            for &j in cols {
                if j != i {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        adj
    }
}

/// Reverse Cuthill-McKee ordering: `perm[new] = old`.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    while order.len() < n {
        let seed = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| degree[v])
            .unwrap();
        let start = pseudo_peripheral(adj, seed);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&u| !visited[u]).collect();
            next.sort_by_key(|&u| (degree[u], u));
            next.dedup();
            for u in next {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

/// Depth of the BFS tree from `start` and its last level.
fn bfs_last_level(adj: &[Vec<usize>], start: usize) -> (usize, Vec<usize>) {
    let mut seen = vec![false; adj.len()];
    seen[start] = true;
    let mut frontier = vec![start];
    let mut depth = 0;
    loop {
        let mut next = Vec::new();
        for &v in &frontier {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    next.push(u);
                }
            }
        }
        if next.is_empty() {
            return (depth, frontier);
        }
        depth += 1;
        frontier = next;
    }
}

fn pseudo_peripheral(adj: &[Vec<usize>], seed: usize) -> usize {
    let mut v = seed;
    let (mut depth, mut last) = bfs_last_level(adj, v);
    loop {
        let u = *last.iter().min_by_key(|&&u| (adj[u].len(), u)).unwrap();
        let (d, l) = bfs_last_level(adj, u);
        if d <= depth {
            return v;
        }
        (v, depth, last) = (u, d, l);
    }
}

/// `P A Pᵀ = L Lᵀ` with `L` stored row-wise over its envelope.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    first: Vec<usize>,
    row_start: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &SymCsr) -> Result<Self> {
        let perm = reverse_cuthill_mckee(&a.adjacency());
        Self::factor_with_ordering(a, perm)
    }

    pub fn factor_with_ordering(a: &SymCsr, perm: Vec<usize>) -> Result<Self> {
        let n = a.dim();
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        // Envelope of the permuted lower triangle.
        let mut first: Vec<usize> = (0..n).collect();
        for i in 0..n {
            let (cols, _) = a.row(i);
            for &j in cols {
                let (r, c) = (inv[i].max(inv[j]), inv[i].min(inv[j]));
                first[r] = first[r].min(c);
            }
        }
        let mut row_start = vec![0; n + 1];
        for i in 0..n {
            row_start[i + 1] = row_start[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; row_start[n]];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let (r, c) = (inv[i].max(inv[j]), inv[i].min(inv[j]));
                data[row_start[r] + c - first[r]] = v;
            }
        }
        for i in 0..n {
            let (fi, si) = (first[i], row_start[i]);
            for j in fi..=i {
                let fj = first[j];
                let sj = row_start[j];
                let k0 = fi.max(fj);
                let mut s = data[si + j - fi];
                let li = &data[si + k0 - fi..si + j - fi];
                let lj = &data[sj + k0 - fj..sj + j - fj];
                s -= li.iter().zip(lj).map(|(x, y)| x * y).sum::<f64>();
                if j < i {
                    data[si + j - fi] = s / data[sj + j - fj];
                } else {
                    if !(s > 0.0) {
                        return Err(Error::NotSpd { pivot: perm[i] });
                    }
                    data[si + i - fi] = s.sqrt();
                }
            }
        }
        Ok(Self {
            n,
            perm,
            first,
            row_start,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of the factor.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for i in 0..n {
            let (fi, si) = (self.first[i], self.row_start[i]);
            let row = &self.data[si..si + i - fi];
            let s: f64 = row.iter().zip(&y[fi..i]).map(|(l, x)| l * x).sum();
            y[i] = (y[i] - s) / self.data[si + i - fi];
        }
        for i in (0..n).rev() {
            let (fi, si) = (self.first[i], self.row_start[i]);
            y[i] /= self.data[si + i - fi];
            let yi = y[i];
            for (yk, l) in y[fi..i].iter_mut().zip(&self.data[si..si + i - fi]) {
                *yk -= l * yi;
            }
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = y[new];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn laplacian_2d(m: usize) -> SymCsr {
        let idx = |i: usize, j: usize| i * m + j;
        let mut t = Vec::new();
        for i in 0..m {
            for j in 0..m {
                t.push((idx(i, j), idx(i, j), 4.0));
                if i + 1 < m {
                    t.push((idx(i, j), idx(i + 1, j), -1.0));
                }
                if j + 1 < m {
                    t.push((idx(i, j), idx(i, j + 1), -1.0));
                }
            }
        }
        SymCsr::from_triplets(m * m, t)
    }

    #[test]
    fn triplets_are_summed_and_mirrored() {
        let a = SymCsr::from_triplets(2, vec![(0, 0, 1.0), (1, 0, 2.0), (0, 1, 0.5), (0, 0, 1.0)]);
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 0), 2.0);
        assert_eq!(a.get(1, 0), 2.5);
        assert_eq!(a.get(1, 1), 0.0);
    }

    #[test]
    fn matvec_matches_dense() {
        let a = laplacian_2d(5);
        let d = a.to_dense();
        let x: Vec<f64> = (0..25).map(|i| (i as f64 * 0.37).sin()).collect();
        let y = a.mul_vec(&x);
        let yd = &d * nalgebra::DVector::from_vec(x);
        for i in 0..25 {
            assert!((y[i] - yd[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn rcm_is_a_permutation_and_reduces_bandwidth() {
        // A path graph numbered badly.
        let n = 50;
        let order: Vec<usize> = (0..n).map(|i| (i * 17) % n).collect();
        let mut t: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 2.0)).collect();
        for w in order.windows(2) {
            t.push((w[0], w[1], -1.0));
        }
        let a = SymCsr::from_triplets(n, t);
        let perm = reverse_cuthill_mckee(&a.adjacency());
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        let chol = EnvelopeCholesky::factor(&a).unwrap();
        assert_eq!(chol.envelope_size(), 2 * n - 1);
    }

    #[test]
    fn cholesky_solves_laplacian() {
        let a = laplacian_2d(12);
        let chol = EnvelopeCholesky::factor(&a).unwrap();
        let x: Vec<f64> = (0..144).map(|i| (i as f64).cos()).collect();
        let b = a.mul_vec(&x);
        let y = chol.solve(&b);
        for i in 0..144 {
            assert!((x[i] - y[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = SymCsr::from_dense(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]));
        assert!(matches!(
            EnvelopeCholesky::factor(&a),
            Err(Error::NotSpd { .. })
        ));
    }

    #[test]
    fn coordinate_dump() {
        let a = SymCsr::from_triplets(2, vec![(0, 0, 1.0), (0, 1, -0.5)]);
        let text = a.to_coordinate_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("1 0 "));
    }

    proptest! {
        #[test]
        fn random_spd_solve(vals in prop::collection::vec(-1.0f64..1.0, 36), rhs in prop::collection::vec(-1.0f64..1.0, 6)) {
            let b = DMatrix::from_vec(6, 6, vals);
            let a = &b * b.transpose() + DMatrix::identity(6, 6);
            let sa = SymCsr::from_dense(&a);
            let x = EnvelopeCholesky::factor(&sa).unwrap().solve(&rhs);
            let r = sa.mul_vec(&x);
            for i in 0..6 {
                prop_assert!((r[i] - rhs[i]).abs() < 1e-10);
            }
        }
    }
}

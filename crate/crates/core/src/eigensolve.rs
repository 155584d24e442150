//! Smallest eigenpairs of `K x = lambda M x` with `K`, `M` symmetric
//! positive definite.
//!
//! Two backends share one contract. The dense one reduces to a standard
//! symmetric problem through the Cholesky factor of `M`. The sparse one is
//! a block shift-invert subspace expansion: the basis is grown with
//! `K^{-1} M` applied to the not yet converged Ritz vectors, kept
//! `M`-orthonormal by repeated Gram-Schmidt, and thick-restarted when it
//! gets large.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::SymmetricOperatorPair;
use crate::sparse::{EnvelopeCholesky, SymCsr};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Auto,
    Dense,
    Sparse,
}

impl Backend {
    pub fn label(self) -> &'static str {
        match self {
            Self::Auto => "auto",
            Self::Dense => "dense",
            Self::Sparse => "sparse",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Bound on `|K x - lambda M x| / |K x|` for every returned pair.
    pub tol: f64,
    pub backend: Backend,
    /// Largest dimension handled by the dense backend under `Auto`.
    pub dense_cap: usize,
    pub block_size: usize,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            backend: Backend::Auto,
            dense_cap: 3000,
            block_size: 4,
            max_iterations: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenpairSet {
    /// Ascending.
    pub values: Vec<f64>,
    /// `M`-orthonormal, one per value.
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub backend: Backend,
    pub iterations: usize,
    pub tol: f64,
}

impl EigenpairSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Relative residual `|K x - lambda M x| / |K x|`.
pub fn relative_residual(k: &SymCsr, m: &SymCsr, lambda: f64, x: &[f64]) -> f64 {
    let kx = k.mul_vec(x);
    let mx = m.mul_vec(x);
    let r: Vec<f64> = kx.iter().zip(&mx).map(|(a, b)| a - lambda * b).collect();
    norm(&r) / norm(&kx)
}

/// Flips `x` so that its largest-magnitude entry is positive.
fn fix_sign(x: &mut [f64]) {
    let p = x.iter().enumerate().fold((0, 0.0f64), |(bi, bv), (i, &v)| {
        if v.abs() > bv.abs() + 1e-14 {
            (i, v)
        } else {
            (bi, bv)
        }
    });
    if p.1 < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
}

/// The `count` smallest eigenpairs of the pencil.
pub fn solve_smallest(
    pair: &SymmetricOperatorPair,
    count: usize,
    opts: &SolverOptions,
) -> Result<EigenpairSet> {
    solve_pencil(&pair.stiffness, &pair.mass, count, opts)
}

pub fn solve_pencil(
    k: &SymCsr,
    m: &SymCsr,
    count: usize,
    opts: &SolverOptions,
) -> Result<EigenpairSet> {
    let n = k.dim();
    if count == 0 {
        return Err(Error::InvalidRequest(
            "eigenvalue count must be at least 1".into(),
        ));
    }
    if count > n {
        return Err(Error::InvalidRequest(format!(
            "requested {count} eigenvalues of a {n}-dimensional problem"
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidRequest("tolerance must be positive".into()));
    }
    let backend = match opts.backend {
        Backend::Auto if n <= opts.dense_cap => Backend::Dense,
        Backend::Auto => Backend::Sparse,
        b => b,
    };
    let mut set = match backend {
        Backend::Dense => solve_dense(k, m, count)?,
        _ => solve_sparse(k, m, count, opts)?,
    };
    set.tol = opts.tol;
    set.residuals = set
        .values
        .iter()
        .zip(&set.vectors)
        .map(|(&l, x)| relative_residual(k, m, l, x))
        .collect();
    if set.residuals.iter().any(|&r| !(r <= opts.tol)) {
        return Err(Error::NoConvergence {
            iterations: set.iterations,
            residuals: set.residuals,
        });
    }
    Ok(set)
}

fn solve_dense(k: &SymCsr, m: &SymCsr, count: usize) -> Result<EigenpairSet> {
    let chol = Cholesky::new(m.to_dense()).ok_or(Error::NotSpd { pivot: 0 })?;
    let l = chol.l();
    // C = L^{-1} K L^{-T}
    let mut c = k.to_dense();
    l.solve_lower_triangular_mut(&mut c);
    let mut c = c.transpose();
    l.solve_lower_triangular_mut(&mut c);
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut values = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count);
    let lt = l.transpose();
    for &i in idx.iter().take(count) {
        let mut y: DVector<f64> = eig.eigenvectors.column(i).into_owned();
        lt.solve_upper_triangular_mut(&mut y);
        let mut x: Vec<f64> = y.iter().copied().collect();
        fix_sign(&mut x);
        values.push(eig.eigenvalues[i]);
        vectors.push(x);
    }
    Ok(EigenpairSet {
        values,
        vectors,
        residuals: Vec::new(),
        backend: Backend::Dense,
        iterations: 1,
        tol: 0.0,
    })
}

/// `M`-orthonormal basis `V` with cached `M V` and `K V`, and `H = Vᵀ K V`.
struct Basis {
    v: Vec<Vec<f64>>,
    mv: Vec<Vec<f64>>,
    kv: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
}

impl Basis {
    fn new() -> Self {
        Self {
            v: Vec::new(),
            mv: Vec::new(),
            kv: Vec::new(),
            h: Vec::new(),
        }
    }

    fn len(&self) -> usize {
        self.v.len()
    }

    /// Orthogonalizes `w` against the basis and appends it unless it is
    /// numerically dependent. Returns whether it was added.
    fn push(&mut self, mut w: Vec<f64>, k: &SymCsr, m: &SymCsr) -> Result<bool> {
        let mut mw = m.mul_vec(&w);
        let n0 = dot(&w, &mw);
        if !(n0 > 0.0) {
            if norm(&w) == 0.0 {
                return Ok(false);
            }
            return Err(Error::NotSpd { pivot: 0 });
        }
        let n0 = n0.sqrt();
        for _ in 0..2 {
            for (vi, mvi) in self.v.iter().zip(&self.mv) {
                let c = dot(mvi, &w);
                axpy(-c, vi, &mut w);
            }
        }
        mw = m.mul_vec(&w);
        let nw = dot(&w, &mw);
        if !(nw > 0.0) || nw.sqrt() < 1e-10 * n0 {
            return Ok(false);
        }
        let s = 1.0 / nw.sqrt();
        w.iter_mut().for_each(|x| *x *= s);
        mw.iter_mut().for_each(|x| *x *= s);
        let kw = k.mul_vec(&w);
        let mut row: Vec<f64> = self.v.iter().map(|vi| dot(vi, &kw)).collect();
        row.push(dot(&w, &kw));
        for (hi, &x) in self.h.iter_mut().zip(&row) {
            hi.push(x);
        }
        self.h.push(row);
        self.v.push(w);
        self.mv.push(mw);
        self.kv.push(kw);
        Ok(true)
    }

    fn projected(&self) -> DMatrix<f64> {
        let m = self.len();
        DMatrix::from_fn(m, m, |i, j| 0.5 * (self.h[i][j] + self.h[j][i]))
    }

    fn combine(cols: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; cols[0].len()];
        for (c, &a) in cols.iter().zip(y) {
            if a != 0.0 {
                axpy(a, c, &mut out);
            }
        }
        out
    }
}

/// `K^{-1} (K x - theta M x)`, the shift-invert expansion direction
/// `x - theta K^{-1} M x` computed without cancellation.
fn correction(chol: &EnvelopeCholesky, kx: &[f64], mx: &[f64], theta: f64) -> Vec<f64> {
    let r: Vec<f64> = kx.iter().zip(mx).map(|(a, b)| a - theta * b).collect();
    let mut t = chol.solve(&r);
    let s = norm(&t);
    if s > 0.0 {
        t.iter_mut().for_each(|x| *x /= s);
    }
    t
}

struct Ritz {
    values: Vec<f64>,
    coeffs: Vec<Vec<f64>>,
}

fn rayleigh_ritz(basis: &Basis) -> Ritz {
    let eig = SymmetricEigen::new(basis.projected());
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    Ritz {
        values: idx.iter().map(|&i| eig.eigenvalues[i]).collect(),
        coeffs: idx
            .iter()
            .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
            .collect(),
    }
}

fn solve_sparse(
    k: &SymCsr,
    m: &SymCsr,
    count: usize,
    opts: &SolverOptions,
) -> Result<EigenpairSet> {
    let n = k.dim();
    let chol = EnvelopeCholesky::factor(k)?;
    let block = opts.block_size.max(1).min(n);
    let max_basis = n.min((3 * count + 2 * block).max(count + 4 * block).max(30));
    let keep = (count + block)
        .min(max_basis.saturating_sub(block))
        .max(count);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random_vec =
        |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };

    let mut basis = Basis::new();
    let mut pending: Vec<Vec<f64>> = (0..block.max(count.min(2 * block)))
        .map(|_| chol.solve(&m.mul_vec(&random_vec(&mut rng))))
        .collect();
    let mut best: Vec<f64> = vec![f64::INFINITY; count];

    for iter in 1..=opts.max_iterations {
        let mut added = 0;
        for w in pending.drain(..) {
            if basis.len() >= n {
                break;
            }
            if basis.push(w, k, m)? {
                added += 1;
            }
        }
        // Replace directions lost to deflation with fresh random ones.
        let mut tries = 0;
        while added == 0 && basis.len() < n && tries < 10 {
            if basis.push(chol.solve(&m.mul_vec(&random_vec(&mut rng))), k, m)? {
                added += 1;
            }
            tries += 1;
        }
        if basis.len() < count {
            continue;
        }

        let ritz = rayleigh_ritz(&basis);
        let mut residuals = Vec::with_capacity(count);
        let mut vectors = Vec::with_capacity(count);
        for j in 0..count {
            let y = &ritz.coeffs[j];
            let kx = Basis::combine(&basis.kv, y);
            let mx = Basis::combine(&basis.mv, y);
            let r: Vec<f64> = kx
                .iter()
                .zip(&mx)
                .map(|(a, b)| a - ritz.values[j] * b)
                .collect();
            residuals.push(norm(&r) / norm(&kx));
            vectors.push(Basis::combine(&basis.v, y));
        }
        for (b, r) in best.iter_mut().zip(&residuals) {
            *b = b.min(*r);
        }
        // Converge to a margin below the requested tolerance so that the
        // residuals recomputed from scratch stay below it.
        let target = 0.1 * opts.tol;
        if residuals.iter().all(|&r| r <= target) || basis.len() == n {
            for x in vectors.iter_mut() {
                fix_sign(x);
            }
            return Ok(EigenpairSet {
                values: ritz.values[..count].to_vec(),
                vectors,
                residuals,
                backend: Backend::Sparse,
                iterations: iter,
                tol: opts.tol,
            });
        }

        let mut targets: Vec<usize> = (0..count)
            .filter(|&j| residuals[j] > target)
            .take(block)
            .collect();
        let mut extra = count;
        while targets.len() < block && extra < ritz.values.len() {
            targets.push(extra);
            extra += 1;
        }

        if basis.len() + targets.len() > max_basis {
            let keep = keep.min(ritz.values.len());
            let mut restarted = Basis::new();
            for j in 0..keep {
                let y = &ritz.coeffs[j];
                restarted.v.push(Basis::combine(&basis.v, y));
                restarted.mv.push(Basis::combine(&basis.mv, y));
                restarted.kv.push(Basis::combine(&basis.kv, y));
            }
            restarted.h = (0..keep)
                .map(|i| {
                    (0..keep)
                        .map(|j| if i == j { ritz.values[i] } else { 0.0 })
                        .collect()
                })
                .collect();
            basis = restarted;
            targets.retain(|&j| j < keep);
            pending = targets
                .iter()
                .map(|&j| correction(&chol, &basis.kv[j], &basis.mv[j], ritz.values[j]))
                .collect();
        } else {
            pending = targets
                .iter()
                .map(|&j| {
                    let y = &ritz.coeffs[j];
                    correction(
                        &chol,
                        &Basis::combine(&basis.kv, y),
                        &Basis::combine(&basis.mv, y),
                        ritz.values[j],
                    )
                })
                .collect();
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        residuals: best,
    })
}

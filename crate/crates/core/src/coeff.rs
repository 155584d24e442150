//! Diffusion coefficients `A(x)`, their cell-wise constant approximation
//! `Abar` (with inverse `Bbar`), and the constants relating the norms
//! induced by `A`, `Abar` and the identity.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::mesh::SimplicialMesh;
use crate::quadrature::QuadratureRule;
use crate::{Error, Result};

pub type MatrixFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;
pub type ConstantsFn = dyn Fn(f64) -> BaseConstants + Send + Sync;

/// A symmetric, uniformly positive definite matrix function.
#[derive(Clone)]
pub enum CoefficientField {
    Identity {
        dim: usize,
    },
    Constant(DMatrix<f64>),
    /// One matrix per cell of the mesh the field is used with.
    PiecewiseConstant(Vec<DMatrix<f64>>),
    Analytic(AnalyticField),
}

#[derive(Clone)]
pub struct AnalyticField {
    pub name: String,
    pub dim: usize,
    pub eval: Arc<MatrixFn>,
    /// Certified constants as a function of the mesh size, when known.
    pub bounds: Option<Arc<ConstantsFn>>,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity { dim } => write!(f, "Identity({dim})"),
            Self::Constant(a) => write!(f, "Constant({:?})", a.as_slice()),
            Self::PiecewiseConstant(v) => write!(f, "PiecewiseConstant({} cells)", v.len()),
            Self::Analytic(a) => write!(f, "Analytic({})", a.name),
        }
    }
}

impl CoefficientField {
    pub fn dim(&self) -> usize {
        match self {
            Self::Identity { dim } => *dim,
            Self::Constant(a) => a.nrows(),
            Self::PiecewiseConstant(v) => v.first().map_or(0, |a| a.nrows()),
            Self::Analytic(a) => a.dim,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Self::Identity { .. })
    }

    /// Whether `A` is constant on every cell (so that `Abar = A`).
    pub fn is_piecewise_constant(&self) -> bool {
        !matches!(self, Self::Analytic(_))
    }

    /// `A` at the physical point `x` inside cell `cell`.
    pub fn eval(&self, cell: usize, x: &[f64]) -> DMatrix<f64> {
        match self {
            Self::Identity { dim } => DMatrix::identity(*dim, *dim),
            Self::Constant(a) => a.clone(),
            Self::PiecewiseConstant(v) => v[cell].clone(),
            Self::Analytic(a) => (a.eval)(x),
        }
    }

    /// Returns `s A`, keeping any declared bounds out (they no longer apply).
    pub fn scaled(&self, s: f64) -> Self {
        match self {
            Self::Identity { dim } => Self::Constant(DMatrix::identity(*dim, *dim) * s),
            Self::Constant(a) => Self::Constant(a * s),
            Self::PiecewiseConstant(v) => {
                Self::PiecewiseConstant(v.iter().map(|a| a * s).collect())
            }
            Self::Analytic(a) => {
                let f = a.eval.clone();
                Self::Analytic(AnalyticField {
                    name: format!("{}*{s}", a.name),
                    dim: a.dim,
                    eval: Arc::new(move |x| f(x) * s),
                    bounds: None,
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbarRule {
    Centroid,
    IntegralMean,
}

/// Cell-wise constant approximation `Abar` and its inverse `Bbar`.
#[derive(Debug, Clone)]
pub struct ApproxCoefficient {
    pub abar: Vec<DMatrix<f64>>,
    pub bbar: Vec<DMatrix<f64>>,
    pub rule: AbarRule,
}

impl ApproxCoefficient {
    /// `Abar = Bbar = I` on every cell.
    pub fn identity(mesh: &SimplicialMesh) -> Self {
        let n = mesh.dim();
        let eye = DMatrix::identity(n, n);
        Self {
            abar: vec![eye.clone(); mesh.cell_count()],
            bbar: vec![eye; mesh.cell_count()],
            rule: AbarRule::Centroid,
        }
    }
}

/// Builds `Abar|_K` by the chosen rule and inverts it.
pub fn approximate(
    field: &CoefficientField,
    mesh: &SimplicialMesh,
    rule: AbarRule,
) -> Result<ApproxCoefficient> {
    let quad = QuadratureRule::simplex(mesh.dim(), 6);
    let mut abar = Vec::with_capacity(mesh.cell_count());
    let mut bbar = Vec::with_capacity(mesh.cell_count());
    for k in 0..mesh.cell_count() {
        let a = if field.is_piecewise_constant() {
            field.eval(k, &[])
        } else {
            let g = mesh.cell_geometry(k);
            match rule {
                AbarRule::Centroid => field.eval(k, g.centroid.as_slice()),
                AbarRule::IntegralMean => {
                    let n = mesh.dim();
                    let mut acc = DMatrix::zeros(n, n);
                    for (p, w) in quad.iter() {
                        acc += field.eval(k, g.point(p).as_slice()) * w;
                    }
                    acc
                }
            }
        };
        let a = symmetrize(a);
        let chol = Cholesky::new(a.clone()).ok_or(Error::NotPositiveDefinite { cell: k })?;
        bbar.push(symmetrize(chol.inverse()));
        abar.push(a);
    }
    Ok(ApproxCoefficient { abar, bbar, rule })
}

fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    (&a + a.transpose()) * 0.5
}

/// The four base constants; the derived `eta1`, `eta2` are methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseConstants {
    /// `|grad v| <= c_a |grad v|_A`.
    pub c_a: f64,
    /// `|grad v| <= c_abar |grad v|_Abar`.
    pub c_abar: f64,
    /// `|grad v|_Abar <= c_abar_a |grad v|_A`.
    pub c_abar_a: f64,
    /// `|(A - Abar) grad v| <= c_inf h |grad v|`.
    pub c_inf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Exact,
    UserSupplied,
    SampledNonCertified,
}

impl Provenance {
    pub fn is_certified(self) -> bool {
        !matches!(self, Self::SampledNonCertified)
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::UserSupplied => "user-supplied",
            Self::SampledNonCertified => "sampled-noncertified",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifiedConstants {
    pub base: BaseConstants,
    pub provenance: Provenance,
}

impl CertifiedConstants {
    pub fn c_a(&self) -> f64 {
        self.base.c_a
    }

    pub fn c_abar(&self) -> f64 {
        self.base.c_abar
    }

    pub fn c_abar_a(&self) -> f64 {
        self.base.c_abar_a
    }

    pub fn c_inf(&self) -> f64 {
        self.base.c_inf
    }

    pub fn eta1(&self) -> f64 {
        self.base.c_abar * self.base.c_abar_a
    }

    pub fn eta2(&self) -> f64 {
        self.base.c_inf * self.base.c_abar * self.base.c_a * self.base.c_abar_a
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantsOptions {
    /// Allow sampling for analytic fields without declared bounds.
    pub sampling: bool,
    /// Inflation applied to sampled extrema.
    pub safety_factor: f64,
    /// Quadrature degree whose points are sampled.
    pub sample_degree: usize,
}

impl Default for ConstantsOptions {
    fn default() -> Self {
        Self {
            sampling: true,
            safety_factor: 1.05,
            sample_degree: 6,
        }
    }
}

fn min_eig(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.min()
}

fn spectral_norm_sym(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.amax()
}

/// Largest `mu` with `Abar v = mu A v`.
fn max_generalized_eig(abar: &DMatrix<f64>, a: &DMatrix<f64>) -> Option<f64> {
    let l = Cholesky::new(a.clone())?.l();
    let linv = l.try_inverse()?;
    let c = &linv * abar * linv.transpose();
    Some(SymmetricEigen::new(symmetrize(c)).eigenvalues.max())
}

struct Extrema {
    a_min: f64,
    abar_min: f64,
    mu_max: f64,
    diff_max: f64,
}

impl Extrema {
    fn new() -> Self {
        Self {
            a_min: f64::INFINITY,
            abar_min: f64::INFINITY,
            mu_max: 0.0,
            diff_max: 0.0,
        }
    }

    fn update(&mut self, cell: usize, a: &DMatrix<f64>, abar: &DMatrix<f64>) -> Result<()> {
        self.a_min = self.a_min.min(min_eig(a));
        self.mu_max = self
            .mu_max
            .max(max_generalized_eig(abar, a).ok_or(Error::NotPositiveDefinite { cell })?);
        self.diff_max = self.diff_max.max(spectral_norm_sym(&(a - abar)));
        Ok(())
    }
}

/// Constants for `field` relative to `approx` on `mesh`.
pub fn derive_constants(
    field: &CoefficientField,
    approx: &ApproxCoefficient,
    mesh: &SimplicialMesh,
    options: &ConstantsOptions,
) -> Result<CertifiedConstants> {
    let h = mesh.stats().h;
    if let CoefficientField::Analytic(af) = field {
        if let Some(bounds) = &af.bounds {
            return Ok(CertifiedConstants {
                base: bounds(h),
                provenance: Provenance::UserSupplied,
            });
        }
        if !options.sampling {
            return Err(Error::MissingConstants(af.name.clone()));
        }
    }

    let mut ext = Extrema::new();
    let quad = QuadratureRule::simplex(mesh.dim(), options.sample_degree);
    for k in 0..mesh.cell_count() {
        let abar = &approx.abar[k];
        ext.abar_min = ext.abar_min.min(min_eig(abar));
        if field.is_piecewise_constant() {
            ext.update(k, &field.eval(k, &[]), abar)?;
        } else {
            let g = mesh.cell_geometry(k);
            let mut pts: Vec<Vec<f64>> = quad.points().to_vec();
            for j in 0..=mesh.dim() {
                let mut e = vec![0.0; mesh.dim() + 1];
                e[j] = 1.0;
                pts.push(e);
            }
            for p in &pts {
                ext.update(k, &field.eval(k, g.point(p).as_slice()), abar)?;
            }
        }
    }
    if ext.a_min <= 0.0 {
        return Err(Error::NotPositiveDefinite { cell: 0 });
    }

    let base = BaseConstants {
        c_a: ext.a_min.powf(-0.5),
        c_abar: ext.abar_min.powf(-0.5),
        c_abar_a: ext.mu_max.sqrt(),
        c_inf: if ext.diff_max <= 1e-14 {
            0.0
        } else {
            ext.diff_max / h
        },
    };
    if field.is_piecewise_constant() {
        Ok(CertifiedConstants {
            base,
            provenance: Provenance::Exact,
        })
    } else {
        let sf = options.safety_factor;
        Ok(CertifiedConstants {
            base: BaseConstants {
                c_a: base.c_a * sf,
                c_abar: base.c_abar,
                c_abar_a: base.c_abar_a * sf,
                c_inf: base.c_inf * sf,
            },
            provenance: Provenance::SampledNonCertified,
        })
    }
}

/// `A(x) = I + x x^T` on the unit square, with eigenvalues `1` and
/// `1 + |x|^2`, shipped with its closed-form constants
/// `C_A = C_Abar = 1`, `C_{Abar,A} = min(sqrt(1 + 8h/3), sqrt(3))` and
/// `C_inf = min(8/3, 2/h)`.
pub fn variable_square_field() -> CoefficientField {
    let mut field = variable_square_sampled();
    if let CoefficientField::Analytic(af) = &mut field {
        af.name = "variable-square".into();
        af.bounds = Some(Arc::new(|h: f64| BaseConstants {
            c_a: 1.0,
            c_abar: 1.0,
            c_abar_a: (1.0 + 8.0 * h / 3.0).sqrt().min(3f64.sqrt()),
            c_inf: (8.0 / 3.0f64).min(2.0 / h),
        }));
    }
    field
}

/// Same matrix function as [`variable_square_field`] without declared bounds.
pub fn variable_square_sampled() -> CoefficientField {
    CoefficientField::Analytic(AnalyticField {
        name: "variable-square-sampled".into(),
        dim: 2,
        eval: Arc::new(|x: &[f64]| {
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    x[0] * x[0] + 1.0,
                    x[0] * x[1],
                    x[0] * x[1],
                    x[1] * x[1] + 1.0,
                ],
            )
        }),
        bounds: None,
    })
}

/// Analytic fields available by name in configuration files.
pub fn analytic_by_name(name: &str) -> Option<CoefficientField> {
    match name {
        "variable-square" => Some(variable_square_field()),
        "variable-square-sampled" => Some(variable_square_sampled()),
        _ => None,
    }
}

/// Parses per-cell matrices, one row of `n(n+1)/2` upper-triangle entries
/// (row-major) per cell.
pub fn parse_piecewise(text: &str, dim: usize) -> Result<CoefficientField> {
    let per_row = dim * (dim + 1) / 2;
    let mut mats = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("coefficient line {}: {e}", lineno + 1)))?;
        if vals.len() != per_row {
            return Err(Error::Config(format!(
                "coefficient line {}: expected {per_row} entries",
                lineno + 1
            )));
        }
        let mut m = DMatrix::zeros(dim, dim);
        let mut it = vals.into_iter();
        for i in 0..dim {
            for j in i..dim {
                let v = it.next().unwrap_or_default();
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        mats.push(m);
    }
    Ok(CoefficientField::PiecewiseConstant(mats))
}

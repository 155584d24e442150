//! Guaranteed eigenvalue bounds from discrete GCR eigenvalues.
//!
//! Lower bounds come from an explicit post-processing of `lambda_h`, valid
//! under a meshsize condition involving an upper bound of the exact
//! eigenvalue. Upper bounds come from a Rayleigh-Ritz step on the conforming
//! P1 functions obtained by averaging the CR part of the GCR eigenfunctions.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::assembly::SymmetricOperatorPair;
use crate::coeff::{CertifiedConstants, CoefficientField};
use crate::eigensolve::EigenpairSet;
use crate::fespace::{project_conforming, project_cr, DofSpace, SpaceKind};
use crate::mesh::MeshStats;
use crate::{Error, Result};

/// First positive root of the Bessel function `J_1`.
pub const J11: f64 = 3.8317059702;

/// Relative threshold on `sigma_min / sigma_max` of the Gram matrix.
pub const GRAM_RANK_THRESHOLD: f64 = 1e-10;

/// Relative gap below which neighbouring eigenvalues form a cluster.
pub const CLUSTER_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoincareConstant {
    Pi,
    /// Only valid in two dimensions.
    J11,
}

impl PoincareConstant {
    pub fn for_dim(dim: usize) -> Self {
        if dim == 2 {
            Self::J11
        } else {
            Self::Pi
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Self::Pi => PI,
            Self::J11 => J11,
        }
    }
}

/// `kappa^2 = 1/48 + 1/j11^2`, the squared CR interpolation constant in 2D.
pub fn kappa_squared() -> f64 {
    1.0 / 48.0 + 1.0 / (J11 * J11)
}

/// Interpolation constant of `v - Pi_CR v` for bubble-valued differences.
pub fn beta1(dim: usize) -> f64 {
    if dim == 2 {
        kappa_squared().sqrt()
    } else {
        let n = dim as f64;
        (1.0 / (PI * PI) + 1.0 / (2.0 * n * (n + 1.0) * (n + 2.0))).sqrt()
    }
}

/// Averaging constant `(n-1) N sqrt(xi) / n`.
pub fn beta2(dim: usize, valence: usize, xi: f64) -> f64 {
    let n = dim as f64;
    (n - 1.0) * valence as f64 * xi.sqrt() / n
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParameters {
    pub dim: usize,
    pub beta: f64,
    pub poincare: PoincareConstant,
    pub constants: CertifiedConstants,
    pub h: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl BoundParameters {
    /// Parameters with the default Poincare constant and interpolation
    /// constants of the mesh.
    pub fn new(
        dim: usize,
        stats: &MeshStats,
        constants: CertifiedConstants,
        beta: f64,
    ) -> Result<Self> {
        let p = Self {
            dim,
            beta,
            poincare: PoincareConstant::for_dim(dim),
            constants,
            h: stats.h,
            beta1: beta1(dim),
            beta2: beta2(dim, stats.valence, stats.xi),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidParameters(format!(
                "beta = {} is outside (0, 1]",
                self.beta
            )));
        }
        if self.beta == 1.0 && self.constants.eta2() > 0.0 {
            return Err(Error::InvalidParameters(
                "beta = 1 requires a cell-wise constant coefficient (eta2 = 0)".into(),
            ));
        }
        if self.poincare == PoincareConstant::J11 && self.dim != 2 {
            return Err(Error::InvalidParameters(
                "j11 Poincare constant is two-dimensional only".into(),
            ));
        }
        if !(self.h > 0.0) {
            return Err(Error::InvalidParameters(
                "mesh size must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        self.beta = beta;
        self.validate()?;
        Ok(self)
    }
}

/// Default `beta`: 1 when `eta2 = 0`, otherwise 1/2.
pub fn default_beta(constants: &CertifiedConstants) -> f64 {
    if constants.eta2() == 0.0 {
        1.0
    } else {
        0.5
    }
}

/// `lambda_h / (1 + lambda_h^2 C_A^4 h^4 / (4c^2 (beta c^2 + lambda_h C_A^2 h^2)) + eta2^2 h^2 / (1 - beta))`,
/// the last term dropped when `eta2 = 0`.
pub fn guaranteed_lower_bound(lambda_h: f64, params: &BoundParameters) -> Result<f64> {
    params.validate()?;
    if !(lambda_h > 0.0) {
        return Err(Error::InvalidParameters(format!(
            "lambda_h = {lambda_h} is not positive"
        )));
    }
    let c = params.poincare.value();
    let ca2 = params.constants.c_a().powi(2);
    let h2 = params.h * params.h;
    let lh = lambda_h * ca2 * h2;
    let mut denom = 1.0 + lh * lh / (4.0 * c * c * (params.beta * c * c + lh));
    let eta2 = params.constants.eta2();
    if eta2 > 0.0 {
        denom += eta2 * eta2 * h2 / (1.0 - params.beta);
    }
    Ok(lambda_h / denom)
}

/// The `beta` in `(0, 1]` maximizing [`guaranteed_lower_bound`], found by
/// golden-section search (the bound is unimodal in `beta`).
pub fn optimal_beta(lambda_h: f64, params: &BoundParameters) -> Result<f64> {
    if params.constants.eta2() == 0.0 {
        return Ok(1.0);
    }
    let f = |b: f64| guaranteed_lower_bound(lambda_h, &BoundParameters { beta: b, ..*params });
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (1e-9, 1.0 - 1e-9);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    for _ in 0..200 {
        if hi - lo < 1e-12 {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1)?;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The CR lower bound `lambda_CR / (1 + kappa^2 lambda_CR h^2)` for the 2D
/// Laplacian.
pub fn cr_lower_bound(lambda_cr: f64, h: f64, field: &CoefficientField, dim: usize) -> Result<f64> {
    if dim != 2 || !field.is_identity() {
        return Err(Error::InvalidParameters(
            "the CR lower bound applies to the two-dimensional Laplacian only".into(),
        ));
    }
    Ok(lambda_cr / (1.0 + kappa_squared() * lambda_cr * h * h))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Satisfied,
    Violated,
    /// No certified input to decide the condition.
    Unknown,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Self::Satisfied => "satisfied",
            Self::Violated => "violated",
            Self::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshsizeCheck {
    pub threshold: Option<f64>,
    pub verdict: Verdict,
}

impl MeshsizeCheck {
    fn compare(h: f64, threshold: f64, certified_input: bool) -> Self {
        let verdict = if !certified_input {
            Verdict::Unknown
        } else if h < threshold {
            Verdict::Satisfied
        } else {
            Verdict::Violated
        };
        Self {
            threshold: Some(threshold),
            verdict,
        }
    }

    pub fn unknown() -> Self {
        Self {
            threshold: None,
            verdict: Verdict::Unknown,
        }
    }
}

/// `h < c / (eta1 sqrt(lambda_upper)) =: h1`. `lambda_upper` must be a
/// guaranteed upper bound; pass `certified = false` otherwise.
pub fn check_meshsize_lower(
    h: f64,
    eta1: f64,
    lambda_upper: f64,
    poincare: PoincareConstant,
    certified: bool,
) -> MeshsizeCheck {
    MeshsizeCheck::compare(
        h,
        poincare.value() / (eta1 * lambda_upper.sqrt()),
        certified,
    )
}

/// `h < 1 / ((beta1 + beta2) C_A sqrt(lambda_gcr)) =: h2`, sufficient for
/// the projected eigenspace to keep its dimension.
pub fn check_meshsize_dimension(
    h: f64,
    beta1: f64,
    beta2: f64,
    c_a: f64,
    lambda_gcr: f64,
) -> MeshsizeCheck {
    MeshsizeCheck::compare(h, 1.0 / ((beta1 + beta2) * c_a * lambda_gcr.sqrt()), true)
}

/// `h < (sqrt(1 + 1/ell) - 1) / (kappa sqrt(lambda_upper))`, the condition
/// under which the CR lower bound is guaranteed.
pub fn check_meshsize_cr(h: f64, ell: usize, lambda_upper: f64, certified: bool) -> MeshsizeCheck {
    let t =
        ((1.0 + 1.0 / ell as f64).sqrt() - 1.0) / (kappa_squared().sqrt() * lambda_upper.sqrt());
    MeshsizeCheck::compare(h, t, certified)
}

/// Results of the averaging-based Rayleigh-Ritz step.
#[derive(Debug, Clone)]
pub struct UpperBounds {
    /// Rayleigh quotient of each projected eigenfunction (`None` if it
    /// projects to zero).
    pub lambda_c: Vec<Option<f64>>,
    /// Ascending Ritz values on the projected span; as many as its rank.
    pub ritz: Vec<f64>,
    pub gram_rank: usize,
    pub ell: usize,
}

impl UpperBounds {
    /// Largest Ritz value.
    pub fn lambda_m(&self) -> Option<f64> {
        self.ritz.last().copied()
    }

    pub fn full_rank(&self) -> bool {
        self.gram_rank == self.ell
    }

    /// Guaranteed upper bound of `lambda_k` (1-based) when the span has at
    /// least `k` dimensions.
    pub fn certified_upper(&self, k: usize) -> Option<f64> {
        (k >= 1 && k <= self.ritz.len()).then(|| self.ritz[k - 1])
    }
}

/// `Pi_c(Pi_CR v)` for a free GCR vector, as a free P1 vector.
pub fn conforming_projection(gcr: &DofSpace, p1: &DofSpace, gcr_free: &[f64]) -> Vec<f64> {
    assert_eq!(gcr.kind(), SpaceKind::Gcr);
    assert_eq!(p1.kind(), SpaceKind::P1c);
    let mesh = gcr.mesh();
    let full = gcr.expand(gcr_free);
    let cr = project_cr(mesh, &full);
    p1.restrict(&project_conforming(mesh, &cr))
}

/// Numerical rank of a symmetric positive semidefinite matrix.
pub fn gram_rank(g: &DMatrix<f64>) -> usize {
    let sv = g.clone().singular_values();
    let max = sv.max();
    if !(max > 0.0) {
        return 0;
    }
    sv.iter()
        .filter(|&&s| s / max > GRAM_RANK_THRESHOLD)
        .count()
}

/// Eigenvalues of the pencil `(S, G)` restricted to the numerical range of
/// `G`, ascending.
pub fn ritz_values(s: &DMatrix<f64>, g: &DMatrix<f64>) -> Vec<f64> {
    let eg = SymmetricEigen::new((g + g.transpose()) * 0.5);
    let max = eg.eigenvalues.amax();
    if !(max > 0.0) {
        return Vec::new();
    }
    let keep: Vec<usize> = (0..eg.eigenvalues.len())
        .filter(|&i| eg.eigenvalues[i] / max > GRAM_RANK_THRESHOLD)
        .collect();
    let r = keep.len();
    // Z = U_r Sigma_r^{-1/2}, then Zᵀ S Z.
    let mut z = DMatrix::zeros(g.nrows(), r);
    for (c, &i) in keep.iter().enumerate() {
        let scale = 1.0 / eg.eigenvalues[i].sqrt();
        z.set_column(c, &(eg.eigenvectors.column(i) * scale));
    }
    let red = z.transpose() * s * &z;
    let mut vals: Vec<f64> = SymmetricEigen::new((&red + red.transpose()) * 0.5)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Averaged upper bounds from the GCR eigenpairs `eig`.
pub fn upper_bounds(
    gcr: &DofSpace,
    eig: &EigenpairSet,
    p1: &DofSpace,
    p1_pair: &SymmetricOperatorPair,
) -> Result<UpperBounds> {
    let ell = eig.len();
    if p1.dof_count() == 0 {
        return Err(Error::InvalidRequest(
            "the conforming space has no free DOFs".into(),
        ));
    }
    let w: Vec<Vec<f64>> = eig
        .vectors
        .iter()
        .map(|u| conforming_projection(gcr, p1, u))
        .collect();
    let kw: Vec<Vec<f64>> = w.iter().map(|x| p1_pair.stiffness.mul_vec(x)).collect();
    let mw: Vec<Vec<f64>> = w.iter().map(|x| p1_pair.mass.mul_vec(x)).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let s = DMatrix::from_fn(ell, ell, |i, j| {
        0.5 * (dot(&w[i], &kw[j]) + dot(&w[j], &kw[i]))
    });
    let g = DMatrix::from_fn(ell, ell, |i, j| {
        0.5 * (dot(&w[i], &mw[j]) + dot(&w[j], &mw[i]))
    });
    let lambda_c = (0..ell)
        .map(|k| (g[(k, k)] > 0.0).then(|| s[(k, k)] / g[(k, k)]))
        .collect();
    Ok(UpperBounds {
        lambda_c,
        ritz: ritz_values(&s, &g),
        gram_rank: gram_rank(&g),
        ell,
    })
}

/// Marks values whose relative gap to a neighbour is below [`CLUSTER_GAP`].
pub fn cluster_flags(values: &[f64]) -> Vec<bool> {
    let close = |a: f64, b: f64| (b - a).abs() <= CLUSTER_GAP * a.abs().max(b.abs());
    (0..values.len())
        .map(|i| {
            (i > 0 && close(values[i - 1], values[i]))
                || (i + 1 < values.len() && close(values[i], values[i + 1]))
        })
        .collect()
}

/// Whether a bound is guaranteed, and if not, which condition failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Certification {
    Certified,
    NotCertified(Vec<String>),
}

impl Certification {
    pub fn from_failures(failures: Vec<String>) -> Self {
        if failures.is_empty() {
            Self::Certified
        } else {
            Self::NotCertified(failures)
        }
    }

    pub fn is_certified(&self) -> bool {
        matches!(self, Self::Certified)
    }
}

impl fmt::Display for Certification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Certified => write!(f, "CERTIFIED"),
            Self::NotCertified(r) => write!(f, "NOT CERTIFIED: {}", r.join("; ")),
        }
    }
}

#[cfg(test)]
// Table values such as 0.707107 are rounded data, not the constant.
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use crate::coeff::{BaseConstants, Provenance};

    fn laplace_constants() -> CertifiedConstants {
        CertifiedConstants {
            base: BaseConstants {
                c_a: 1.0,
                c_abar: 1.0,
                c_abar_a: 1.0,
                c_inf: 0.0,
            },
            provenance: Provenance::Exact,
        }
    }

    fn preset_constants(h: f64) -> CertifiedConstants {
        CertifiedConstants {
            base: BaseConstants {
                c_a: 1.0,
                c_abar: 1.0,
                c_abar_a: (1.0 + 8.0 * h / 3.0).sqrt().min(3f64.sqrt()),
                c_inf: (8.0f64 / 3.0).min(2.0 / h),
            },
            provenance: Provenance::UserSupplied,
        }
    }

    fn params(h: f64, constants: CertifiedConstants, beta: f64) -> BoundParameters {
        BoundParameters {
            dim: 2,
            beta,
            poincare: PoincareConstant::J11,
            constants,
            h,
            beta1: beta1(2),
            beta2: 3.0,
        }
    }

    #[test]
    fn laplace_lower_bound() {
        let glb =
            guaranteed_lower_bound(35.9771, &params(0.176777, laplace_constants(), 1.0)).unwrap();
        assert!((glb - 35.9282).abs() < 5e-5, "{glb}");
        // Written out with the printed constants 4 j^2 and j^2.
        let lh = 35.9771 * 0.176777f64.powi(2);
        let printed = 35.9771 / (1.0 + lh * lh / (58.7276 * (14.6819 + lh)));
        assert!((glb - printed).abs() < 1e-5);
    }

    #[test]
    fn variable_coefficient_lower_bound() {
        let h = 2f64.sqrt() / 8.0;
        let glb = guaranteed_lower_bound(26.29812, &params(h, preset_constants(h), 0.5)).unwrap();
        assert!(((glb - 15.88658) / 15.88658).abs() < 1e-4, "{glb}");
    }

    #[test]
    fn beta_one_requires_vanishing_eta2() {
        let h = 0.1;
        let e = guaranteed_lower_bound(20.0, &params(h, preset_constants(h), 1.0));
        assert!(matches!(e, Err(Error::InvalidParameters(_))));
        assert!(guaranteed_lower_bound(20.0, &params(h, laplace_constants(), 0.0)).is_err());
    }

    #[test]
    fn lower_bound_limits_and_monotonicity() {
        let c = laplace_constants();
        let tiny = guaranteed_lower_bound(40.0, &params(1e-8, c, 1.0)).unwrap();
        assert!((tiny - 40.0).abs() < 1e-9);
        let hs = [0.5, 0.25, 0.1, 0.05];
        for w in hs.windows(2) {
            let a =
                guaranteed_lower_bound(40.0, &params(w[0], preset_constants(w[0]), 0.5)).unwrap();
            let b =
                guaranteed_lower_bound(40.0, &params(w[1], preset_constants(w[1]), 0.5)).unwrap();
            assert!(a < b);
        }
        let mut prev = 0.0;
        for l in [1.0, 5.0, 20.0, 100.0, 400.0] {
            let g = guaranteed_lower_bound(l, &params(0.1, c, 1.0)).unwrap();
            assert!(g > prev && g <= l);
            prev = g;
        }
    }

    #[test]
    fn cr_bounds() {
        let id = CoefficientField::Identity { dim: 2 };
        assert!((cr_lower_bound(36.5336, 0.176777, &id, 2).unwrap() - 33.1658).abs() < 5e-4);
        assert!((cr_lower_bound(24.0, 0.707107, &id, 2).unwrap() - 11.6092).abs() < 5e-4);
        assert!((cr_lower_bound(24.0, 1e-9, &id, 2).unwrap() - 24.0).abs() < 1e-9);
        let other = CoefficientField::Constant(DMatrix::identity(2, 2) * 2.0);
        assert!(cr_lower_bound(24.0, 0.1, &other, 2).is_err());
        assert!(cr_lower_bound(24.0, 0.1, &CoefficientField::Identity { dim: 3 }, 3).is_err());
    }

    #[test]
    fn meshsize_thresholds() {
        let h = 0.0884;
        let eta1 = (1.0 + 8.0 * h / 3.0f64).sqrt();
        let c = check_meshsize_lower(h, eta1, 433.1020, PoincareConstant::J11, true);
        let expect = J11 / (eta1 * 433.1020f64.sqrt());
        assert!((c.threshold.unwrap() - expect).abs() < 1e-15);
        assert_eq!(c.verdict, Verdict::Satisfied);
        let c = check_meshsize_lower(0.0442, 1.0, 1e12, PoincareConstant::J11, true);
        assert_eq!(c.verdict, Verdict::Violated);
        let c = check_meshsize_lower(0.0442, 1.0, 100.0, PoincareConstant::J11, false);
        assert_eq!(c.verdict, Verdict::Unknown);
        let d = check_meshsize_dimension(0.0884, beta1(2), 3.0, 1.0, 362.8685);
        assert!((d.threshold.unwrap() - 0.0159).abs() < 5e-5);
        assert_eq!(d.verdict, Verdict::Violated);
    }

    #[test]
    fn interpolation_constants() {
        assert!((beta1(2) - (1.0 / (J11 * J11) + 1.0 / 48.0).sqrt()).abs() < 1e-16);
        assert!((beta1(3) - (1.0 / (PI * PI) + 1.0 / 120.0).sqrt()).abs() < 1e-16);
        assert_eq!(beta2(2, 6, 1.0), 3.0);
    }

    #[test]
    fn optimal_beta_improves_the_bound() {
        let h = 0.0884;
        let p = params(h, preset_constants(h), 0.5);
        let b = optimal_beta(362.8685, &p).unwrap();
        let best = guaranteed_lower_bound(362.8685, &p.with_beta(b).unwrap()).unwrap();
        for beta in [0.1, 0.3, 0.5, 0.7, 0.9, 0.99] {
            assert!(
                best >= guaranteed_lower_bound(362.8685, &p.with_beta(beta).unwrap()).unwrap()
                    - 1e-9
            );
        }
        assert_eq!(
            optimal_beta(20.0, &params(h, laplace_constants(), 1.0)).unwrap(),
            1.0
        );
    }

    #[test]
    fn ritz_on_rank_deficient_gram() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0]);
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(gram_rank(&g), 1);
        let r = ritz_values(&s, &g);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 2.0).abs() < 1e-12);
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let s = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 3.0]);
        let r = ritz_values(&s, &g);
        assert!((r[0] - 2.0).abs() < 1e-14 && (r[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn clusters() {
        assert_eq!(
            cluster_flags(&[1.0, 2.0, 2.0 + 1e-9, 3.0]),
            vec![false, true, true, false]
        );
    }

    #[test]
    fn certification_labels() {
        assert_eq!(
            Certification::from_failures(vec![]).to_string(),
            "CERTIFIED"
        );
        let c = Certification::from_failures(vec!["h >= h1".into()]);
        assert!(!c.is_certified());
        assert_eq!(c.to_string(), "NOT CERTIFIED: h >= h1");
    }
}

//! Quadrature on reference simplices.
//!
//! Rules are conical (collapsed-coordinate) products of Gauss-Legendre
//! rules, so every degree is available in dimensions 1 to 3 with positive
//! weights. Points are stored in barycentric coordinates and the weights
//! are normalized to sum to one; multiply by the simplex measure to
//! integrate.

use crate::mesh::factorial;

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    dim: usize,
    degree: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// A rule integrating polynomials of total degree `degree` exactly on
    /// the `dim`-simplex.
    pub fn simplex(dim: usize, degree: usize) -> Self {
        assert!(
            (1..=3).contains(&dim),
            "simplex dimension must be 1, 2 or 3"
        );
        let q = (degree + dim).div_ceil(2).max(1);
        let (x, w) = gauss_legendre_unit(q);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        match dim {
            1 => {
                for (&t, &wt) in x.iter().zip(&w) {
                    points.push(vec![1.0 - t, t]);
                    weights.push(wt);
                }
            }
            2 => {
                for (&u, &wu) in x.iter().zip(&w) {
                    for (&v, &wv) in x.iter().zip(&w) {
                        let (a, b) = (u, v * (1.0 - u));
                        points.push(vec![1.0 - a - b, a, b]);
                        weights.push(2.0 * wu * wv * (1.0 - u));
                    }
                }
            }
            _ => {
                for (&u, &wu) in x.iter().zip(&w) {
                    for (&v, &wv) in x.iter().zip(&w) {
                        for (&s, &ws) in x.iter().zip(&w) {
                            let a = u;
                            let b = v * (1.0 - u);
                            let c = s * (1.0 - u) * (1.0 - v);
                            points.push(vec![1.0 - a - b - c, a, b, c]);
                            weights.push(6.0 * wu * wv * ws * (1.0 - u).powi(2) * (1.0 - v));
                        }
                    }
                }
            }
        }
        Self {
            dim,
            degree,
            points,
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Barycentric coordinates of the points (each of length `dim + 1`).
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.points
            .iter()
            .map(Vec::as_slice)
            .zip(self.weights.iter().copied())
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]` (weights sum to one).
pub fn gauss_legendre_unit(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; q];
    let mut w = vec![0.0; q];
    for i in 0..q.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(q, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(q, z);
        dp = if d != 0.0 { d } else { dp };
        let wt = 1.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[q - 1 - i] = 0.5 * (1.0 + z);
        w[i] = wt;
        w[q - 1 - i] = wt;
    }
    (x, w)
}

/// `P_n(z)` and `P_n'(z)` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Exact mean of the barycentric monomial `prod theta_j^alpha_j` over a
/// simplex of dimension `alpha.len() - 1`: `alpha! n! / (|alpha| + n)!`.
pub fn barycentric_monomial_mean(alpha: &[usize]) -> f64 {
    let n = alpha.len() - 1;
    let total: usize = alpha.iter().sum();
    let mut num = factorial(n) as f64;
    for &a in alpha {
        num *= factorial(a) as f64;
    }
    // (|alpha| + n)! can exceed usize for high degrees; accumulate in f64.
    let den: f64 = (1..=total + n).map(|k| k as f64).product();
    num / den
}

/// Largest relative deviation from exactness over all barycentric monomials
/// up to the rule's declared degree.
pub fn monomial_exactness_residual(rule: &QuadratureRule) -> f64 {
    let n = rule.dim();
    let mut worst = 0.0f64;
    let mut alpha = vec![0usize; n + 1];
    visit_multi_indices(&mut alpha, 0, rule.degree(), &mut |a| {
        let exact = barycentric_monomial_mean(a);
        let approx: f64 = rule
            .iter()
            .map(|(p, w)| {
                w * p
                    .iter()
                    .zip(a)
                    .map(|(t, &e)| t.powi(e as i32))
                    .product::<f64>()
            })
            .sum();
        worst = worst.max((approx - exact).abs() / exact);
    });
    worst
}

fn visit_multi_indices(
    alpha: &mut Vec<usize>,
    pos: usize,
    budget: usize,
    f: &mut dyn FnMut(&[usize]),
) {
    if pos == alpha.len() {
        f(alpha);
        return;
    }
    for a in 0..=budget {
        alpha[pos] = a;
        visit_multi_indices(alpha, pos + 1, budget - a, f);
    }
    alpha[pos] = 0;
}

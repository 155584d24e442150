//! Randomized oracle checks of the element construction, the interpolation
//! operators and the quadrature rules. Every check reports its largest
//! residual against a fixed tolerance.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coeff::{approximate, variable_square_field, AbarRule};
use crate::fespace::{interpolate_gcr, BubbleFunction, DofSpace};
use crate::mesh::{generate_unit_square, CellGeometry, SimplicialMesh};
use crate::quadrature::{monomial_exactness_residual, QuadratureRule};
use crate::{Error, Result};

/// Exit code of a failed verification.
pub const EXIT_VERIFY_FAILED: i32 = 3;

pub const BUBBLE_TOL: f64 = 1e-12;
pub const FLUX_TOL: f64 = 1e-12;
pub const PROJECTION_TOL: f64 = 1e-10;
pub const CR_ORTHOGONALITY_TOL: f64 = 1e-12;
pub const PYTHAGORAS_TOL: f64 = 1e-9;
pub const QUADRATURE_TOL: f64 = 1e-13;

const SIMPLICES_PER_DIM: usize = 50;
const RANDOM_TEST_FUNCTIONS: usize = 20;
const INTERPOLATION_DEGREE: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Bubble,
    Orthogonality,
    Quadrature,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bubble" => Ok(Self::Bubble),
            "orthogonality" => Ok(Self::Orthogonality),
            "quadrature" => Ok(Self::Quadrature),
            "all" => Ok(Self::All),
            _ => Err(Error::Config(format!("unknown suite `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.max_residual <= self.tolerance
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<4} {:<28} samples {:>5}  max residual {:.3e}  tolerance {:.0e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.samples,
            self.max_residual,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            EXIT_VERIFY_FAILED
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    if matches!(suite, Suite::Bubble | Suite::All) {
        report.checks.extend(bubble_checks(seed)?);
    }
    if matches!(suite, Suite::Orthogonality | Suite::All) {
        report.checks.extend(orthogonality_checks(seed)?);
    }
    if matches!(suite, Suite::Quadrature | Suite::All) {
        report.checks.push(quadrature_check());
    }
    Ok(report)
}

/// A random simplex of bounded aspect ratio in `[-1, 1]^n`.
fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> SimplicialMesh {
    loop {
        let coords: Vec<f64> = (0..n * (n + 1)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let Ok(mesh) = SimplicialMesh::new(n, coords, (0..=n).collect()) else {
            continue;
        };
        let g = mesh.cell_geometry(0);
        if g.volume / g.diameter.powi(n as i32) > 0.02 {
            return mesh;
        }
    }
}

/// `L Lᵀ + I/10` with entries of `L` uniform in `[-1, 1]`.
fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let l = DMatrix::from_fn(n, n, |i, j| {
        if j <= i {
            rng.gen_range(-1.0..1.0)
        } else {
            0.0
        }
    });
    &l * l.transpose() + DMatrix::identity(n, n) * 0.1
}

/// Point on local facet `j` with facet-barycentric coordinates `t`.
fn facet_point(geom: &CellGeometry, j: usize, t: &[f64]) -> DVector<f64> {
    let mut x = DVector::zeros(geom.dim());
    for (s, v) in t.iter().zip(geom.facet_vertices(j)) {
        x.axpy(*s, &v, 1.0);
    }
    x
}

fn bubble_checks(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut mean_res, mut facet_res, mut flux_res) = (0.0f64, 0.0f64, 0.0f64);
    let mut count = 0;
    for n in [2, 3] {
        let cell_rule = QuadratureRule::simplex(n, 2);
        let facet_rule = QuadratureRule::simplex(n - 1, 3);
        for _ in 0..SIMPLICES_PER_DIM {
            let mesh = random_simplex(&mut rng, n);
            let geom = mesh.cell_geometry(0);
            let bbar = random_spd(&mut rng, n);
            let abar = bbar
                .clone()
                .try_inverse()
                .ok_or(Error::NotPositiveDefinite { cell: 0 })?;
            let b = BubbleFunction::new(0, &geom, &bbar)?;
            count += 1;

            let mean: f64 = cell_rule
                .iter()
                .map(|(p, w)| w * b.value(&geom.point(p)))
                .sum();
            mean_res = mean_res.max((mean - 1.0).abs());

            for j in 0..=n {
                let fm: f64 = facet_rule
                    .iter()
                    .map(|(t, w)| w * b.value(&facet_point(&geom, j, t)))
                    .sum();
                facet_res = facet_res.max(fm.abs());

                let nu = geom.facet_normal(j);
                let fluxes: Vec<f64> = (0..4)
                    .map(|_| {
                        let mut t: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
                        let s: f64 = t.iter().sum();
                        t.iter_mut().for_each(|x| *x /= s);
                        (&abar * b.gradient(&facet_point(&geom, j, &t))).dot(&nu)
                    })
                    .collect();
                let scale = fluxes.iter().fold(1.0f64, |m, f| m.max(f.abs()));
                for f in &fluxes[1..] {
                    flux_res = flux_res.max((f - fluxes[0]).abs() / scale);
                }
            }
        }
    }
    Ok(vec![
        Check {
            name: "bubble cell mean = 1",
            samples: count,
            max_residual: mean_res,
            tolerance: BUBBLE_TOL,
        },
        Check {
            name: "bubble facet means = 0",
            samples: count,
            max_residual: facet_res,
            tolerance: BUBBLE_TOL,
        },
        Check {
            name: "bubble flux constancy",
            samples: count,
            max_residual: flux_res,
            tolerance: FLUX_TOL,
        },
    ])
}

fn random_free_vector(rng: &mut ChaCha8Rng, space: &DofSpace) -> Vec<f64> {
    let free: Vec<f64> = (0..space.dof_count())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    space.expand(&free)
}

fn orthogonality_checks(seed: u64) -> Result<Vec<Check>> {
    let mesh = generate_unit_square(3);
    let field = variable_square_field();
    let approx = approximate(&field, &mesh, AbarRule::Centroid)?;
    let space = DofSpace::gcr(&mesh, &approx)?;
    let nf = mesh.facet_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rule = QuadratureRule::simplex(2, INTERPOLATION_DEGREE);

    // (Abar grad(v - Pi v), grad w) = 0 for v = sin(pi x) sin(pi y).
    use std::f64::consts::PI;
    let v = |x: &[f64]| (PI * x[0]).sin() * (PI * x[1]).sin();
    let grad_v = |x: &[f64]| {
        DVector::from_vec(vec![
            PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
            PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
        ])
    };
    let pi_v = interpolate_gcr(&space, &v, INTERPOLATION_DEGREE);
    let ws: Vec<Vec<f64>> = (0..RANDOM_TEST_FUNCTIONS)
        .map(|_| random_free_vector(&mut rng, &space))
        .collect();
    let mut inner = vec![0.0; ws.len()];
    let mut w_energy = vec![0.0; ws.len()];
    let mut v_energy = 0.0;
    for k in 0..mesh.cell_count() {
        let geom = mesh.cell_geometry(k);
        let a = &approx.abar[k];
        for (p, wq) in rule.iter() {
            let x = geom.point(p);
            let gv = grad_v(x.as_slice());
            let (_, gpi) = space.eval(k, &geom, p, &pi_v);
            let err = a * (&gv - gpi);
            let wt = wq * geom.volume;
            v_energy += wt * gv.dot(&(a * &gv));
            for (i, w) in ws.iter().enumerate() {
                let (_, gw) = space.eval(k, &geom, p, w);
                inner[i] += wt * err.dot(&gw);
                w_energy[i] += wt * gw.dot(&(a * &gw));
            }
        }
    }
    let projection_res = inner
        .iter()
        .zip(&w_energy)
        .map(|(ip, we)| ip.abs() / (v_energy * we).sqrt())
        .fold(0.0, f64::max);

    // For random GCR v: (grad(v - Pi_CR v), grad Pi_CR v) = 0 and the
    // matching Pythagoras identity, with unweighted gradients.
    let low = QuadratureRule::simplex(2, 4);
    let (mut ortho_res, mut pyth_res) = (0.0f64, 0.0f64);
    for _ in 0..RANDOM_TEST_FUNCTIONS {
        let full = random_free_vector(&mut rng, &space);
        let mut cr = full.clone();
        cr[nf..].iter_mut().for_each(|c| *c = 0.0);
        let (mut cross, mut total, mut cr_part, mut bubble_part) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..mesh.cell_count() {
            let geom = mesh.cell_geometry(k);
            for (p, wq) in low.iter() {
                let wt = wq * geom.volume;
                let (_, g) = space.eval(k, &geom, p, &full);
                let (_, gc) = space.eval(k, &geom, p, &cr);
                let gb = &g - &gc;
                cross += wt * gb.dot(&gc);
                total += wt * g.norm_squared();
                cr_part += wt * gc.norm_squared();
                bubble_part += wt * gb.norm_squared();
            }
        }
        ortho_res = ortho_res.max(cross.abs() / total);
        pyth_res = pyth_res.max((total - cr_part - bubble_part).abs() / total);
    }

    Ok(vec![
        Check {
            name: "GCR interpolation orthogonal",
            samples: RANDOM_TEST_FUNCTIONS,
            max_residual: projection_res,
            tolerance: PROJECTION_TOL,
        },
        Check {
            name: "CR projection orthogonal",
            samples: RANDOM_TEST_FUNCTIONS,
            max_residual: ortho_res,
            tolerance: CR_ORTHOGONALITY_TOL,
        },
        Check {
            name: "Pythagoras",
            samples: RANDOM_TEST_FUNCTIONS,
            max_residual: pyth_res,
            tolerance: PYTHAGORAS_TOL,
        },
    ])
}

fn quadrature_check() -> Check {
    let mut worst = 0.0f64;
    let mut samples = 0;
    for dim in 1..=3 {
        for degree in 0..=10 {
            worst = worst.max(monomial_exactness_residual(&QuadratureRule::simplex(
                dim, degree,
            )));
            samples += 1;
        }
    }
    Check {
        name: "quadrature exactness",
        samples,
        max_residual: worst,
        tolerance: QUADRATURE_TOL,
    }
}

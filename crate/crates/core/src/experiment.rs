//! Configuration-driven runs of the full pipeline, one report per mesh level.
//!
//! Configuration files are flat `key = value` text grouped in `[sections]`;
//! `#` starts a comment. See `configs/README.md` for the schema.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::assembly::{assemble_default, SymmetricOperatorPair};
use crate::bounds::{
    check_meshsize_cr, check_meshsize_dimension, check_meshsize_lower, cluster_flags,
    cr_lower_bound, default_beta, guaranteed_lower_bound, optimal_beta, upper_bounds,
    BoundParameters, Certification, MeshsizeCheck, Verdict,
};
use crate::coeff::{
    analytic_by_name, approximate, derive_constants, parse_piecewise, AbarRule, CoefficientField,
    ConstantsOptions,
};
use crate::eigensolve::{solve_smallest, Backend, EigenpairSet, SolverOptions};
use crate::fespace::{DofSpace, SpaceKind};
use crate::mesh::{
    generate_lshape, generate_unit_cube, generate_unit_square, refine_uniform, SimplicialMesh,
};
use crate::report::{render, BoundReport, OutputFormat, SpaceResult, TableLayout};
use crate::{Error, Result};

/// Exit code of a run whose bounds were computed but a requested
/// certification failed.
pub const EXIT_NOT_CERTIFIED: i32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    UnitSquare,
    LShape,
    UnitCube,
    /// A mesh file, uniformly refined `level` times.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientSpec {
    Identity,
    /// Constant matrix given by its upper triangle, row-major.
    Constant(Vec<f64>),
    /// Built-in analytic field, with or without declared bounds.
    Named(String),
    /// Per-cell matrices; applies to every level only if the mesh is fixed.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaPolicy {
    /// 1 for cell-wise constant coefficients, 1/2 otherwise.
    Default,
    Fixed(f64),
    /// Maximize each lower bound over `beta`.
    Optimize,
}

/// Certifications whose failure turns the exit code into 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Requirement {
    Glb,
    GlbCr,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub domain: Domain,
    pub levels: Vec<u32>,
    pub coefficient: CoefficientSpec,
    pub abar_rule: AbarRule,
    pub safety_factor: f64,
    pub ell: usize,
    pub spaces: Vec<SpaceKind>,
    pub beta: BetaPolicy,
    pub tol: f64,
    pub backend: Backend,
    pub dense_cap: usize,
    pub seed: u64,
    pub require: Vec<Requirement>,
    pub layout: TableLayout,
    pub format: OutputFormat,
    pub output: Option<PathBuf>,
}

const PRESETS: [(&str, &str); 4] = [
    ("table1", include_str!("../../../configs/table1.conf")),
    ("table2", include_str!("../../../configs/table2.conf")),
    ("table3", include_str!("../../../configs/table3.conf")),
    ("table4", include_str!("../../../configs/table4.conf")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

/// Source text of a shipped preset.
pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_sections(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            section = rest
                .strip_suffix(']')
                .ok_or_else(|| cfg_err(format!("line {}: unterminated section header", i + 1)))?
                .trim()
                .to_string();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| cfg_err(format!("line {}: expected `key = value`", i + 1)))?;
        let key = if section.is_empty() {
            k.trim().to_string()
        } else {
            format!("{section}.{}", k.trim())
        };
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(cfg_err(format!("line {}: duplicate key `{key}`", i + 1)));
        }
    }
    Ok(map)
}

fn parse_levels(s: &str) -> Result<Vec<u32>> {
    let bad = || cfg_err(format!("invalid levels `{s}`"));
    let levels: Vec<u32> = if let Some((a, b)) = s.split_once("..") {
        let a: u32 = a.trim().parse().map_err(|_| bad())?;
        let b: u32 = b.trim().parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if levels.is_empty() {
        return Err(cfg_err("level range is empty"));
    }
    Ok(levels)
}

fn list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty())
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl ExperimentConfig {
    /// Parses configuration text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut map = parse_sections(text)?;
        let mut take = |key: &str| map.remove(key);

        let name = take("name").unwrap_or_else(|| "experiment".into());
        let domain = match take("problem.domain").as_deref() {
            Some("unit-square") => Domain::UnitSquare,
            Some("l-shape") => Domain::LShape,
            Some("unit-cube") => Domain::UnitCube,
            Some(other) => match other.strip_prefix("file:") {
                Some(p) => Domain::File(resolve(base, p.trim())),
                None => return Err(cfg_err(format!("unknown domain `{other}`"))),
            },
            None => return Err(cfg_err("missing `problem.domain`")),
        };
        let levels = parse_levels(&take("problem.levels").unwrap_or_else(|| "0".into()))?;
        let coefficient = match take("problem.coefficient").as_deref() {
            None | Some("identity") => CoefficientSpec::Identity,
            Some(s) => {
                if let Some(p) = s.strip_prefix("file:") {
                    CoefficientSpec::File(resolve(base, p.trim()))
                } else if let Some(vals) = s.strip_prefix("constant:") {
                    CoefficientSpec::Constant(
                        list(vals)
                            .map(|t| {
                                t.parse().map_err(|_| {
                                    cfg_err(format!("invalid constant coefficient `{s}`"))
                                })
                            })
                            .collect::<Result<_>>()?,
                    )
                } else if analytic_by_name(s).is_some() {
                    CoefficientSpec::Named(s.into())
                } else {
                    return Err(cfg_err(format!("unknown coefficient `{s}`")));
                }
            }
        };
        let abar_rule = match take("problem.abar_rule").as_deref() {
            None | Some("centroid") => AbarRule::Centroid,
            Some("integral-mean") => AbarRule::IntegralMean,
            Some(o) => return Err(cfg_err(format!("unknown abar_rule `{o}`"))),
        };
        let safety_factor = match take("problem.safety_factor") {
            None => ConstantsOptions::default().safety_factor,
            Some(s) => s
                .parse()
                .map_err(|_| cfg_err(format!("invalid safety_factor `{s}`")))?,
        };

        let ell_text = take("solve.ell").unwrap_or_else(|| "1".into());
        let ell: i64 = ell_text
            .parse()
            .map_err(|_| cfg_err(format!("invalid ell `{ell_text}`")))?;
        if ell < 1 {
            return Err(cfg_err("ℓ must be ≥ 1"));
        }
        let spaces = list(&take("solve.spaces").unwrap_or_else(|| "gcr".into()))
            .map(|t| match t.to_ascii_lowercase().as_str() {
                "cr" => Ok(SpaceKind::Cr),
                "gcr" => Ok(SpaceKind::Gcr),
                "p1" | "p1c" => Ok(SpaceKind::P1c),
                _ => Err(cfg_err(format!("unknown space `{t}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if spaces.is_empty() {
            return Err(cfg_err("no spaces requested"));
        }
        let defaults = SolverOptions::default();
        let num = |v: Option<String>, key: &str, d: f64| -> Result<f64> {
            v.map_or(Ok(d), |s| {
                s.parse()
                    .map_err(|_| cfg_err(format!("invalid {key} `{s}`")))
            })
        };
        let tol = num(take("solve.tolerance"), "tolerance", defaults.tol)?;
        if !(tol > 0.0) {
            return Err(cfg_err("tolerance must be positive"));
        }
        let backend = match take("solve.backend").as_deref() {
            None | Some("auto") => Backend::Auto,
            Some("dense") => Backend::Dense,
            Some("sparse") => Backend::Sparse,
            Some(o) => return Err(cfg_err(format!("unknown backend `{o}`"))),
        };
        let dense_cap = num(
            take("solve.dense_cap"),
            "dense_cap",
            defaults.dense_cap as f64,
        )? as usize;
        let seed = num(take("solve.seed"), "seed", 0.0)? as u64;

        let beta = match take("bounds.beta").as_deref() {
            None | Some("default") => BetaPolicy::Default,
            Some("optimize") => BetaPolicy::Optimize,
            Some(s) => {
                let b: f64 = s
                    .parse()
                    .map_err(|_| cfg_err(format!("invalid beta `{s}`")))?;
                if !(b > 0.0 && b <= 1.0) {
                    return Err(cfg_err("beta must lie in (0, 1]"));
                }
                BetaPolicy::Fixed(b)
            }
        };
        let mut require = Vec::new();
        for t in list(&take("bounds.require").unwrap_or_else(|| "none".into())) {
            match t {
                "none" => {}
                "glb" => require.push(Requirement::Glb),
                "glb_cr" => require.push(Requirement::GlbCr),
                "upper" => require.push(Requirement::Upper),
                "all" => require.extend([Requirement::Glb, Requirement::GlbCr, Requirement::Upper]),
                _ => return Err(cfg_err(format!("unknown requirement `{t}`"))),
            }
        }

        let layout = match take("output.layout").as_deref() {
            None | Some("general") => TableLayout::General,
            Some("laplace") => TableLayout::Laplace,
            Some(o) => return Err(cfg_err(format!("unknown layout `{o}`"))),
        };
        let format = parse_format(take("output.format").as_deref().unwrap_or("csv"))?;
        let output = take("output.path").map(|p| resolve(base, &p));

        if let Some(k) = map.keys().next() {
            return Err(cfg_err(format!("unknown key `{k}`")));
        }
        Ok(Self {
            name,
            domain,
            levels,
            coefficient,
            abar_rule,
            safety_factor,
            ell: ell as usize,
            spaces,
            beta,
            tol,
            backend,
            dense_cap,
            seed,
            require,
            layout,
            format,
            output,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn preset(name: &str) -> Result<Self> {
        let text = preset_text(name).ok_or_else(|| cfg_err(format!("unknown preset `{name}`")))?;
        Self::parse(text, Path::new("."))
    }

    fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            backend: self.backend,
            dense_cap: self.dense_cap,
            seed: self.seed,
            ..SolverOptions::default()
        }
    }

    fn wants(&self, kind: SpaceKind) -> bool {
        self.spaces.contains(&kind)
    }
}

/// `csv`, `md` or `markdown`.
pub fn parse_format(s: &str) -> Result<OutputFormat> {
    match s {
        "csv" => Ok(OutputFormat::Csv),
        "md" | "markdown" => Ok(OutputFormat::Markdown),
        o => Err(cfg_err(format!("unknown output format `{o}`"))),
    }
}

/// Mesh of a built-in domain at `level`.
pub fn build_mesh(domain: &Domain, level: u32) -> Result<SimplicialMesh> {
    Ok(match domain {
        Domain::UnitSquare => generate_unit_square(level),
        Domain::LShape => generate_lshape(level),
        Domain::UnitCube => generate_unit_cube(level),
        Domain::File(p) => {
            let mut m = SimplicialMesh::from_text(&std::fs::read_to_string(p)?)?;
            for _ in 0..level {
                m = refine_uniform(&m);
            }
            m
        }
    })
}

fn build_field(spec: &CoefficientSpec, mesh: &SimplicialMesh) -> Result<CoefficientField> {
    let n = mesh.dim();
    let field = match spec {
        CoefficientSpec::Identity => CoefficientField::Identity { dim: n },
        CoefficientSpec::Constant(v) => {
            if v.len() != n * (n + 1) / 2 {
                return Err(cfg_err(format!(
                    "constant coefficient needs {} entries",
                    n * (n + 1) / 2
                )));
            }
            let mut a = DMatrix::zeros(n, n);
            let mut it = v.iter();
            for i in 0..n {
                for j in i..n {
                    let x = *it.next().unwrap_or(&0.0);
                    a[(i, j)] = x;
                    a[(j, i)] = x;
                }
            }
            CoefficientField::Constant(a)
        }
        CoefficientSpec::Named(s) => {
            analytic_by_name(s).ok_or_else(|| cfg_err(format!("unknown coefficient `{s}`")))?
        }
        CoefficientSpec::File(p) => {
            let f = parse_piecewise(&std::fs::read_to_string(p)?, n)?;
            if let CoefficientField::PiecewiseConstant(v) = &f {
                if v.len() != mesh.cell_count() {
                    return Err(cfg_err(format!(
                        "coefficient file has {} cells, mesh has {}",
                        v.len(),
                        mesh.cell_count()
                    )));
                }
            }
            f
        }
    };
    if field.dim() != n {
        return Err(cfg_err(format!(
            "coefficient is {}-dimensional, mesh is {n}-dimensional",
            field.dim()
        )));
    }
    Ok(field)
}

fn space_result(kind: SpaceKind, dofs: usize, eig: Option<&EigenpairSet>) -> SpaceResult {
    match eig {
        Some(e) => SpaceResult {
            kind,
            dofs,
            values: e.values.clone(),
            max_residual: e.residuals.iter().copied().fold(0.0, f64::max),
            backend: e.backend,
            iterations: e.iterations,
        },
        None => SpaceResult {
            kind,
            dofs,
            values: Vec::new(),
            max_residual: 0.0,
            backend: Backend::Auto,
            iterations: 0,
        },
    }
}

fn solve(
    pair: &SymmetricOperatorPair,
    ell: usize,
    opts: &SolverOptions,
) -> Result<Option<EigenpairSet>> {
    let count = ell.min(pair.dim());
    if count == 0 {
        return Ok(None);
    }
    solve_smallest(pair, count, opts).map(Some)
}

/// Runs every stage on one mesh.
pub fn run_level(
    cfg: &ExperimentConfig,
    mesh: &SimplicialMesh,
    level: Option<u32>,
) -> Result<BoundReport> {
    let stats = mesh.stats();
    let dim = mesh.dim();
    let field = build_field(&cfg.coefficient, mesh)?;
    let approx = approximate(&field, mesh, cfg.abar_rule)?;
    let options = ConstantsOptions {
        safety_factor: cfg.safety_factor,
        ..ConstantsOptions::default()
    };
    let constants = derive_constants(&field, &approx, mesh, &options)?;
    let opts = cfg.solver_options();
    let ell = cfg.ell;

    let cr = if cfg.wants(SpaceKind::Cr) {
        let space = DofSpace::cr(mesh);
        let pair = assemble_default(&space, &field)?;
        let eig = solve(&pair, ell, &opts)?;
        Some(space_result(SpaceKind::Cr, pair.dim(), eig.as_ref()))
    } else {
        None
    };

    let p1_space = DofSpace::p1c(mesh);
    let p1_pair = assemble_default(&p1_space, &field)?;
    let p1 = if cfg.wants(SpaceKind::P1c) {
        let eig = solve(&p1_pair, ell, &opts)?;
        Some(space_result(SpaceKind::P1c, p1_pair.dim(), eig.as_ref()))
    } else {
        None
    };

    let base_beta = match cfg.beta {
        BetaPolicy::Fixed(b) => b,
        _ => default_beta(&constants),
    };
    let params = BoundParameters::new(dim, &stats, constants, base_beta)?;
    let mut beta = base_beta;
    let (mut gcr, mut glb, mut upper, mut clusters) = (None, Vec::new(), None, Vec::new());
    if cfg.wants(SpaceKind::Gcr) {
        let space = DofSpace::gcr(mesh, &approx)?;
        let pair = assemble_default(&space, &field)?;
        let eig = solve(&pair, ell, &opts)?;
        if let Some(e) = &eig {
            for &lam in &e.values {
                let p = match cfg.beta {
                    BetaPolicy::Optimize => {
                        let b = optimal_beta(lam, &params)?;
                        beta = b;
                        params.with_beta(b)?
                    }
                    _ => params,
                };
                glb.push(guaranteed_lower_bound(lam, &p)?);
            }
            clusters = cluster_flags(&e.values);
            if p1_pair.dim() > 0 {
                upper = Some(upper_bounds(&space, e, &p1_space, &p1_pair)?);
            }
        }
        gcr = Some(space_result(SpaceKind::Gcr, pair.dim(), eig.as_ref()));
    }

    let certified_constants = constants.provenance.is_certified();
    let sampled = format!("constants {}", constants.provenance.label());
    let lambda_gcr = gcr.as_ref().and_then(|s| s.value(ell));

    let dim_check = match lambda_gcr {
        Some(l) => {
            check_meshsize_dimension(stats.h, params.beta1, params.beta2, constants.c_a(), l)
        }
        None => MeshsizeCheck::unknown(),
    };

    // Upper bound: a full-rank Gram matrix, or the dimension condition.
    let mut upper_fail = Vec::new();
    let lambda_m = upper.as_ref().and_then(|u| u.lambda_m());
    match &upper {
        None => upper_fail
            .push("no conforming upper bound (P1 space empty or GCR not solved)".to_string()),
        Some(u) => {
            if !certified_constants {
                upper_fail.push(sampled.clone());
            }
            if u.ell < ell {
                upper_fail.push(format!("only {} discrete eigenvalues available", u.ell));
            } else if !u.full_rank() && dim_check.verdict != Verdict::Satisfied {
                upper_fail.push(format!("Gram rank {} < {ell} and h >= h2", u.gram_rank));
            }
        }
    }
    let upper_status = Certification::from_failures(upper_fail);
    let upper_ok = upper_status.is_certified();

    let lower_check = match lambda_m {
        Some(lm) => check_meshsize_lower(stats.h, constants.eta1(), lm, params.poincare, upper_ok),
        None => MeshsizeCheck::unknown(),
    };
    let mut glb_fail = Vec::new();
    if glb.len() < ell {
        glb_fail.push("GCR eigenvalue not computed".to_string());
    }
    if !certified_constants {
        glb_fail.push(sampled.clone());
    }
    if ell > 1 {
        match lower_check.verdict {
            Verdict::Satisfied => {}
            Verdict::Violated => glb_fail.push("h >= h1".into()),
            Verdict::Unknown => glb_fail.push("h1 unknown: upper bound not certified".into()),
        }
    }
    let glb_status = Certification::from_failures(glb_fail);

    // CR lower bound: 2D Laplacian only.
    let (mut glb_cr, mut cr_check, mut glb_cr_status) = (Vec::new(), None, None);
    if let Some(crr) = &cr {
        if dim == 2 && field.is_identity() {
            for &lam in &crr.values {
                glb_cr.push(cr_lower_bound(lam, stats.h, &field, dim)?);
            }
            let check = match lambda_m {
                Some(lm) => check_meshsize_cr(stats.h, ell, lm, upper_ok),
                None => MeshsizeCheck::unknown(),
            };
            let mut fail = Vec::new();
            if glb_cr.len() < ell {
                fail.push("CR eigenvalue not computed".to_string());
            }
            match check.verdict {
                Verdict::Satisfied => {}
                Verdict::Violated => fail.push("h above the CR meshsize threshold".into()),
                Verdict::Unknown => {
                    fail.push("CR meshsize condition unknown: upper bound not certified".into())
                }
            }
            cr_check = Some(check);
            glb_cr_status = Some(Certification::from_failures(fail));
        }
    }

    Ok(BoundReport {
        level,
        stats,
        ell,
        constants,
        beta,
        gcr,
        cr,
        p1,
        glb,
        glb_cr,
        upper,
        lower_check,
        dim_check,
        cr_check,
        glb_status,
        glb_cr_status,
        upper_status,
        clusters,
    })
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub reports: Vec<BoundReport>,
    /// Failed requested certifications, one line per report and bound.
    pub failures: Vec<String>,
    pub exit_code: i32,
}

impl RunOutcome {
    pub fn render(&self, layout: TableLayout, format: OutputFormat) -> String {
        render(&self.reports, layout, format)
    }
}

/// Runs all levels in order. Errors correspond to exit code 1.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let mut reports = Vec::with_capacity(cfg.levels.len());
    let mut failures = Vec::new();
    for &level in &cfg.levels {
        let mesh = build_mesh(&cfg.domain, level)?;
        let r = run_level(cfg, &mesh, Some(level))?;
        for req in &cfg.require {
            let (name, status) = match req {
                Requirement::Glb => ("GLB", Some(&r.glb_status)),
                Requirement::GlbCr => ("GLB_CR", r.glb_cr_status.as_ref()),
                Requirement::Upper => ("upper bound", Some(&r.upper_status)),
            };
            match status {
                Some(Certification::Certified) => {}
                Some(c) => failures.push(format!("level {level}: {name} {c}")),
                None => failures.push(format!("level {level}: {name} not available")),
            }
        }
        reports.push(r);
    }
    let exit_code = if failures.is_empty() {
        0
    } else {
        EXIT_NOT_CERTIFIED
    };
    Ok(RunOutcome {
        reports,
        failures,
        exit_code,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(text, Path::new("."))
    }

    #[test]
    fn presets_parse() {
        for name in preset_names() {
            let cfg = ExperimentConfig::preset(name).unwrap();
            assert!(!cfg.levels.is_empty(), "{name}");
        }
        assert!(ExperimentConfig::preset("table9").is_err());
    }

    #[test]
    fn zero_ell_is_rejected() {
        let err = parse("[problem]\ndomain = l-shape\n[solve]\nell = 0\n").unwrap_err();
        assert!(err.to_string().contains("ℓ must be ≥ 1"), "{err}");
    }

    #[test]
    fn level_syntax() {
        assert_eq!(parse_levels("1..3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_levels("4, 2").unwrap(), vec![4, 2]);
        assert!(parse_levels("3..1").is_err());
        assert!(parse_levels("x").is_err());
    }

    #[test]
    fn unknown_keys_and_values_are_rejected() {
        assert!(parse("[problem]\ndomain = l-shape\ncolour = red\n").is_err());
        assert!(parse("[problem]\ndomain = torus\n").is_err());
        assert!(parse("[problem]\ndomain = l-shape\n[solve]\nspaces = q2\n").is_err());
        assert!(parse("[problem]\ndomain = l-shape\n[bounds]\nbeta = 1.5\n").is_err());
        assert!(parse("[solve]\nell = 1\n").is_err());
    }

    #[test]
    fn comments_and_defaults() {
        let cfg = parse("# demo\n[problem]\ndomain = unit-square # inline\n").unwrap();
        assert_eq!(cfg.domain, Domain::UnitSquare);
        assert_eq!(cfg.levels, vec![0]);
        assert_eq!(cfg.ell, 1);
        assert_eq!(cfg.spaces, vec![SpaceKind::Gcr]);
        assert_eq!(cfg.beta, BetaPolicy::Default);
        assert!(cfg.require.is_empty());
    }

    #[test]
    fn laplace_row_on_coarsest_lshape() {
        let cfg = ExperimentConfig::preset("table1").unwrap();
        let mesh = build_mesh(&cfg.domain, 0).unwrap();
        let r = run_level(&cfg, &mesh, Some(0)).unwrap();
        let row = crate::report::to_csv(&[r], TableLayout::Laplace);
        let line = row.lines().nth(1).unwrap();
        assert!(
            line.starts_with("0.707107,24,11.6092,21.4979,19.9542,,"),
            "{line}"
        );
    }

    #[test]
    fn required_certification_sets_exit_code() {
        let mut cfg =
            parse("[problem]\ndomain = unit-square\nlevels = 0\n[bounds]\nrequire = upper\n")
                .unwrap();
        // Level 0 has no interior vertex, so no conforming upper bound exists.
        assert_eq!(run(&cfg).unwrap().exit_code, EXIT_NOT_CERTIFIED);
        cfg.require.clear();
        assert_eq!(run(&cfg).unwrap().exit_code, 0);
    }

    #[test]
    fn sampled_constants_are_never_certified() {
        let cfg = parse("[problem]\ndomain = unit-square\nlevels = 2\ncoefficient = variable-square-sampled\n[solve]\nspaces = gcr, p1\n").unwrap();
        let out = run(&cfg).unwrap();
        let r = &out.reports[0];
        assert!(!r.glb_status.is_certified());
        assert!(!r.upper_status.is_certified());
    }
}

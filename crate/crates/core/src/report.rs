//! Per-level results and their CSV / Markdown rendering.

use std::fmt::Write as _;

use crate::bounds::{Certification, MeshsizeCheck, UpperBounds, Verdict};
use crate::coeff::CertifiedConstants;
use crate::eigensolve::Backend;
use crate::fespace::SpaceKind;
use crate::mesh::MeshStats;

/// Eigenvalues of one space on one mesh.
#[derive(Debug, Clone)]
pub struct SpaceResult {
    pub kind: SpaceKind,
    pub dofs: usize,
    /// Ascending; at most the requested count (fewer if the space is small).
    pub values: Vec<f64>,
    pub max_residual: f64,
    pub backend: Backend,
    pub iterations: usize,
}

impl SpaceResult {
    /// The `k`-th eigenvalue, 1-based.
    pub fn value(&self, k: usize) -> Option<f64> {
        self.values.get(k.wrapping_sub(1)).copied()
    }
}

/// Everything computed on one mesh.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub level: Option<u32>,
    pub stats: MeshStats,
    /// Number of eigenvalues requested; the reported index.
    pub ell: usize,
    pub constants: CertifiedConstants,
    pub beta: f64,
    pub gcr: Option<SpaceResult>,
    pub cr: Option<SpaceResult>,
    pub p1: Option<SpaceResult>,
    /// Guaranteed lower bounds from GCR, one per computed eigenvalue.
    pub glb: Vec<f64>,
    /// CR-based lower bounds (2D Laplacian only).
    pub glb_cr: Vec<f64>,
    pub upper: Option<UpperBounds>,
    /// `h < h1` for index `ell`.
    pub lower_check: MeshsizeCheck,
    /// `h < h2` for index `ell`.
    pub dim_check: MeshsizeCheck,
    pub cr_check: Option<MeshsizeCheck>,
    pub glb_status: Certification,
    pub glb_cr_status: Option<Certification>,
    pub upper_status: Certification,
    /// Cluster membership of each GCR eigenvalue.
    pub clusters: Vec<bool>,
}

impl BoundReport {
    pub fn h(&self) -> f64 {
        self.stats.h
    }

    pub fn lambda_gcr(&self) -> Option<f64> {
        self.gcr.as_ref().and_then(|s| s.value(self.ell))
    }

    pub fn lambda_cr(&self) -> Option<f64> {
        self.cr.as_ref().and_then(|s| s.value(self.ell))
    }

    pub fn lambda_p1(&self) -> Option<f64> {
        self.p1.as_ref().and_then(|s| s.value(self.ell))
    }

    pub fn glb_at(&self) -> Option<f64> {
        self.glb.get(self.ell - 1).copied()
    }

    pub fn glb_cr_at(&self) -> Option<f64> {
        self.glb_cr.get(self.ell - 1).copied()
    }

    pub fn lambda_c(&self) -> Option<f64> {
        self.upper
            .as_ref()
            .and_then(|u| u.lambda_c.get(self.ell - 1).copied().flatten())
    }

    pub fn lambda_m(&self) -> Option<f64> {
        self.upper.as_ref().and_then(UpperBounds::lambda_m)
    }

    pub fn gram_rank(&self) -> Option<usize> {
        self.upper.as_ref().map(|u| u.gram_rank)
    }

    /// Whether every certification flag of the row is set.
    pub fn certification_failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, c) in [
            ("glb", Some(&self.glb_status)),
            ("glb_cr", self.glb_cr_status.as_ref()),
            ("upper", Some(&self.upper_status)),
        ] {
            if let Some(Certification::NotCertified(r)) = c {
                out.push(format!("{name}: {}", r.join("; ")));
            }
        }
        out
    }
}

/// Column layout of the emitted table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableLayout {
    /// `h, lambda_CR, GLB_CR, lambda_GCR, GLB_GCR, lambda_P1`.
    Laplace,
    /// `h, h1, h2, lambda_GCR, GLB, lambda_P1, lambda_c, lambda_m`.
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Markdown,
}

/// `x` with six significant digits, trailing zeros removed.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let e: i32 = format!("{x:.5e}")
        .split('e')
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let decimals = (5 - e).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        s = s.trim_end_matches('0').trim_end_matches('.').to_string();
    }
    s
}

fn status(c: &Certification) -> String {
    match c {
        Certification::Certified => "CERTIFIED".into(),
        Certification::NotCertified(r) => format!("NOT CERTIFIED ({})", r.join("; ")),
    }
}

fn verdict_cell(c: &MeshsizeCheck) -> &'static str {
    match c.verdict {
        Verdict::Satisfied => "satisfied",
        Verdict::Violated => "violated",
        Verdict::Unknown => "unknown",
    }
}

fn header(layout: TableLayout) -> Vec<&'static str> {
    match layout {
        TableLayout::Laplace => vec![
            "h",
            "lambda_CR",
            "GLB_CR",
            "lambda_GCR",
            "GLB_GCR",
            "lambda_P1",
            "GLB_CR_status",
            "GLB_GCR_status",
        ],
        TableLayout::General => vec![
            "h",
            "h1",
            "h2",
            "lambda_GCR",
            "GLB",
            "lambda_P1",
            "lambda_c",
            "lambda_m",
            "gram_rank",
            "h1_verdict",
            "h2_verdict",
            "GLB_status",
            "upper_status",
        ],
    }
}

fn cells(r: &BoundReport, layout: TableLayout) -> Vec<Option<String>> {
    let num = |x: Option<f64>| x.map(sig6);
    match layout {
        TableLayout::Laplace => vec![
            Some(sig6(r.h())),
            num(r.lambda_cr()),
            num(r.glb_cr_at()),
            num(r.lambda_gcr()),
            num(r.glb_at()),
            num(r.lambda_p1()),
            r.glb_cr_status.as_ref().map(status),
            Some(status(&r.glb_status)),
        ],
        TableLayout::General => vec![
            Some(sig6(r.h())),
            num(r.lower_check.threshold),
            num(r.dim_check.threshold),
            num(r.lambda_gcr()),
            num(r.glb_at()),
            num(r.lambda_p1()),
            num(r.lambda_c()),
            num(r.lambda_m()),
            r.gram_rank().map(|g| g.to_string()),
            Some(verdict_cell(&r.lower_check).into()),
            Some(verdict_cell(&r.dim_check).into()),
            Some(status(&r.glb_status)),
            Some(status(&r.upper_status)),
        ],
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Header plus one row per report; missing values are empty fields.
pub fn to_csv(reports: &[BoundReport], layout: TableLayout) -> String {
    let mut out = header(layout).join(",");
    out.push('\n');
    for r in reports {
        let row: Vec<String> = cells(r, layout)
            .into_iter()
            .map(|c| c.map(|s| csv_escape(&s)).unwrap_or_default())
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Aligned Markdown table; missing values are shown as an em dash.
pub fn to_markdown(reports: &[BoundReport], layout: TableLayout) -> String {
    let head: Vec<String> = header(layout).into_iter().map(String::from).collect();
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            cells(r, layout)
                .into_iter()
                .map(|c| c.unwrap_or_else(|| "—".into()))
                .collect()
        })
        .collect();
    let widths: Vec<usize> = (0..head.len())
        .map(|j| {
            rows.iter()
                .map(|r| r[j].chars().count())
                .chain([head[j].len()])
                .max()
                .unwrap_or(1)
        })
        .collect();
    let line = |cols: &[String]| {
        let mut s = String::from("|");
        for (c, w) in cols.iter().zip(&widths) {
            let pad = w - c.chars().count();
            let _ = write!(s, " {c}{} |", " ".repeat(pad));
        }
        s.push('\n');
        s
    };
    let mut out = line(&head);
    out.push('|');
    for w in &widths {
        let _ = write!(out, "{}|", "-".repeat(w + 2));
    }
    out.push('\n');
    for r in &rows {
        out.push_str(&line(r));
    }
    out
}

pub fn render(reports: &[BoundReport], layout: TableLayout, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => to_csv(reports, layout),
        OutputFormat::Markdown => to_markdown(reports, layout),
    }
}

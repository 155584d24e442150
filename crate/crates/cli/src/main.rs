use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use eigenbounds::experiment::{build_mesh, parse_format, run, Domain, ExperimentConfig};
use eigenbounds::report::TableLayout;
use eigenbounds::verify::{run_suite, Suite};

/// Guaranteed eigenvalue bounds for -div(A grad u) = lambda u.
#[derive(Parser)]
#[command(name = "eigenbounds", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and print one table row per mesh level.
    Run {
        /// Configuration file.
        #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Shipped configuration: table1, table2, table3 or table4.
        #[arg(long)]
        preset: Option<String>,
        /// Output file (standard output by default).
        #[arg(long)]
        out: Option<PathBuf>,
        /// csv or md; overrides the configuration.
        #[arg(long)]
        format: Option<String>,
        /// laplace or general; overrides the configuration.
        #[arg(long)]
        layout: Option<String>,
    },
    /// Run a randomized oracle suite: bubble, orthogonality, quadrature or all.
    Verify {
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Mesh utilities.
    Mesh {
        #[command(subcommand)]
        command: MeshCommand,
    },
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Write a structured mesh of unit-square, l-shape or unit-cube.
    Gen {
        domain: String,
        #[arg(long)]
        levels: u32,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write_output(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run_command(
    config: Option<PathBuf>,
    preset: Option<String>,
    out: Option<PathBuf>,
    format: Option<String>,
    layout: Option<String>,
) -> Result<u8> {
    let cfg = match (&config, &preset) {
        (Some(p), _) => ExperimentConfig::from_file(p)
            .with_context(|| format!("cannot load {}", p.display()))?,
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => bail!("either --config or --preset is required"),
    };
    let format = match format {
        Some(f) => parse_format(&f)?,
        None => cfg.format,
    };
    let layout = match layout.as_deref() {
        None => cfg.layout,
        Some("laplace") => TableLayout::Laplace,
        Some("general") => TableLayout::General,
        Some(o) => bail!("unknown layout `{o}`"),
    };
    let outcome = run(&cfg)?;
    for r in &outcome.reports {
        let solvers: Vec<String> = [&r.cr, &r.gcr, &r.p1]
            .into_iter()
            .flatten()
            .map(|s| {
                format!(
                    "{} {} dofs {} res {:.1e}",
                    s.kind.label(),
                    s.dofs,
                    s.backend.label(),
                    s.max_residual
                )
            })
            .collect();
        eprintln!(
            "level {}: h = {:.6}, constants {}, beta = {}; {}",
            r.level.map_or("-".into(), |l| l.to_string()),
            r.h(),
            r.constants.provenance.label(),
            r.beta,
            solvers.join(", ")
        );
    }
    write_output(
        &outcome.render(layout, format),
        out.as_ref().or(cfg.output.as_ref()),
    )?;
    for f in &outcome.failures {
        eprintln!("not certified: {f}");
    }
    Ok(outcome.exit_code as u8)
}

fn verify_command(suite: &str, seed: u64) -> Result<u8> {
    let suite: Suite = suite.parse()?;
    let report = run_suite(suite, seed)?;
    print!("{report}");
    println!(
        "{}",
        if report.passed() {
            "all checks passed"
        } else {
            "verification FAILED"
        }
    );
    Ok(report.exit_code() as u8)
}

fn mesh_command(domain: &str, levels: u32, out: &PathBuf) -> Result<u8> {
    let domain = match domain {
        "unit-square" => Domain::UnitSquare,
        "l-shape" => Domain::LShape,
        "unit-cube" => Domain::UnitCube,
        o => bail!("unknown domain `{o}` (expected unit-square, l-shape or unit-cube)"),
    };
    let mesh = build_mesh(&domain, levels)?;
    write_output(&mesh.to_text(), Some(out))?;
    eprintln!(
        "wrote {} vertices, {} cells, h = {:.6}",
        mesh.vertex_count(),
        mesh.cell_count(),
        mesh.stats().h
    );
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run {
            config,
            preset,
            out,
            format,
            layout,
        } => run_command(config, preset, out, format, layout),
        Command::Verify { suite, seed } => verify_command(&suite, seed),
        Command::Mesh {
            command:
                MeshCommand::Gen {
                    domain,
                    levels,
                    out,
                },
        } => mesh_command(&domain, levels, &out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn presets_are_listed() {
        assert_eq!(eigenbounds::experiment::preset_names().count(), 4);
    }
}

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mixedrobust_cli::builtin::EXAMPLES;
use mixedrobust_cli::config::{self, Loaded};
use mixedrobust_cli::report::Report;
use mixedrobust_cli::{repro, run, svg, CliError};

#[derive(Parser)]
#[command(name = "mixedrobust", version, about = "Probability of robust stability with deterministic and random parameters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a config and write a JSON report.
    Analyze {
        config: PathBuf,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also export the stability region as CSV.
        #[arg(long)]
        region_csv: Option<PathBuf>,
        /// Also plot the stability region as SVG.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Scenario seed; overrides the config.
        #[arg(long, env = "MIXEDROBUST_SEED")]
        seed: Option<u64>,
    },
    /// Extract the stability region over the random parameters (m <= 2).
    Region {
        config: PathBuf,
        /// CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Draw the region of the nominal q as a dashed outline.
        #[arg(long)]
        nominal: bool,
        #[arg(long, env = "MIXEDROBUST_SEED")]
        seed: Option<u64>,
    },
    /// Run built-in examples against their reference values.
    Repro {
        /// Example id, e.g. 5.3.1, or its name.
        id: Option<String>,
        #[arg(long)]
        all: bool,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<Loaded, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    config::load(&text, seed)
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn title(loaded: &Loaded) -> String {
    loaded.config.name.clone().unwrap_or_else(|| "stability region".into())
}

fn analyze(
    path: &Path,
    out: Option<&Path>,
    region_csv: Option<&Path>,
    svg_path: Option<&Path>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let loaded = load(path, seed)?;
    let est = run::analyze(&loaded)?;
    if region_csv.is_some() || svg_path.is_some() {
        let r = run::region(&loaded, false)?;
        if let Some(p) = region_csv {
            let mut buf = Vec::new();
            run::write_csv(&r.region.region, &mut buf)?;
            fs::write(p, buf)?;
        }
        if let Some(p) = svg_path {
            fs::write(p, svg::render(&r.region, None, &title(&loaded)))?;
        }
    }
    let region_file = region_csv.map(|p| p.display().to_string());
    let report = Report::new(&est, &loaded, region_file);
    write_out(out, report.to_json()?.as_bytes())
}

fn region(path: &Path, out: Option<&Path>, svg_path: Option<&Path>, nominal: bool, seed: Option<u64>) -> Result<(), CliError> {
    let loaded = load(path, seed)?;
    let r = run::region(&loaded, nominal)?;
    for n in &r.notes {
        eprintln!("note: {n}");
    }
    let mut buf = Vec::new();
    run::write_csv(&r.region.region, &mut buf)?;
    write_out(out, &buf)?;
    if let Some(p) = svg_path {
        fs::write(p, svg::render(&r.region, r.nominal.as_ref(), &title(&loaded)))?;
    }
    Ok(())
}

fn repro_cmd(id: Option<&str>, all: bool) -> Result<bool, CliError> {
    let ids: Vec<&str> = match (id, all) {
        (_, true) => EXAMPLES.iter().map(|e| e.id).collect(),
        (Some(id), false) => vec![id],
        (None, false) => return Err(CliError::Config("give an example id or --all".into())),
    };
    let mut ok = true;
    for id in ids {
        let outcome = repro::run(id)?;
        ok &= outcome.pass();
        print!("{}", outcome.render());
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze {
            config,
            out,
            region_csv,
            svg,
            seed,
        } => analyze(config, out.as_deref(), region_csv.as_deref(), svg.as_deref(), *seed).map(|_| true),
        Command::Region {
            config,
            out,
            svg,
            nominal,
            seed,
        } => region(config, out.as_deref(), svg.as_deref(), *nominal, *seed).map(|_| true),
        Command::Repro { id, all } => repro_cmd(id.as_deref(), *all),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("mixedrobust: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

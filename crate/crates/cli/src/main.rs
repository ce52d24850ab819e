use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use contact_kinetics_cli::{execute, CliError, Command, RunConfig};

#[derive(Parser)]
#[command(name = "contact-kinetics", version, about = "Certified contact-loop computations on model 3-manifolds")]
struct Cli {
    /// Plain-text `key = value` config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for reports
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: available cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Reduced resolutions
    #[arg(long, global = true)]
    smoke: bool,

    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Contact, Reeb and pullback checks of a model (s1xd2, s1xs2, annulus, s3)
    Verify { model: String },
    /// Displacement, beta, delta(k) and their certificates
    Loops,
    /// Glued positive loop on a half Lutz twist (s1xs2 or s3)
    Lutz { source: String },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p, cli.smoke)?,
        None => RunConfig::from_text("", cli.smoke)?,
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let out_dir = cfg.out_dir(cli.out.as_deref());
    let (command, arg) = match &cli.command {
        Sub::Verify { model } => (Command::Verify, Some(model.as_str())),
        Sub::Loops => (Command::Loops, None),
        Sub::Lutz { source } => (Command::Lutz, Some(source.as_str())),
    };
    let out = execute(command, arg, &cfg, &out_dir)?;
    for c in &out.report.certificates {
        println!(
            "{} {:<48} {:>24.16e} {} {:e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            match c.relation {
                contact_kinetics_cli::Relation::Below => "<",
                contact_kinetics_cli::Relation::Above => ">",
            },
            c.threshold
        );
    }
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    println!(
        "{} ({:.1} s)",
        if out.report.pass { "PASS" } else { "FAIL" },
        out.report.timing.total_seconds
    );
    Ok(out.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bisource::experiment::{
    instability_witness, kernel_dump, run_experiment, write_kernel, write_outputs, write_witness, write_zeros,
    ExperimentConfig,
};
use bisource::{Error, Grid, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(name = "bisource", version, about = "Source reconstruction for the fractional bi-parabolic equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the (ε, seed) sweep and write results.csv, fields.csv, kernel.csv, data.csv and report.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the kernel profile (ν ≤ nu_max) and the zeros of H_ψ on [0, nu_max].
    Kernel {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        nu_max: f64,
        /// Defaults to output.directory from the config, else the working directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the n-th instability witness (f_n, h_n) and print its norms.
    Unstable {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        n: u64,
        /// Also write unstable.csv with columns x, f_n, h_n.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn out_dir(explicit: Option<PathBuf>, config: &ExperimentConfig) -> PathBuf {
    explicit.or_else(|| config.output.directory.clone()).unwrap_or_else(|| PathBuf::from("."))
}

fn run(config: &Path, out: &Path) -> Result<()> {
    let cfg = ExperimentConfig::from_path(config)?;
    let output = run_experiment(&cfg)?;
    write_outputs(&output, out)?;
    for row in &output.summary {
        println!(
            "eps {:.3e}  alpha {:.3e}  median E_abs {:.4e}  median E_rel {:.4}%",
            row.epsilon,
            row.alpha,
            row.median_e_abs,
            100.0 * row.median_e_rel
        );
    }
    if let Some(rate) = &output.rate {
        println!("fitted slope {:.3} over {} rows", rate.slope, rate.rows_used);
    }
    Ok(())
}

fn kernel(config: &Path, nu_max: f64, out: Option<PathBuf>) -> Result<()> {
    let cfg = ExperimentConfig::from_path(config)?;
    let dump = kernel_dump(&cfg, nu_max)?;
    let dir = out_dir(out, &cfg);
    std::fs::create_dir_all(&dir)?;
    write_kernel(&dump.profile, dump.alpha, nu_max, &dir.join("kernel.csv"))?;
    write_zeros(&dump.zeros, &dir.join("zeros.csv"))?;
    let zeros: Vec<f64> = dump.zeros.iter().map(|z| z.nu).collect();
    println!("{}", json!({ "alpha": dump.alpha, "max_abs_h": dump.profile.max_abs(), "zeros": zeros }));
    Ok(())
}

fn unstable(config: &Path, n: u64, out: Option<PathBuf>) -> Result<()> {
    let cfg = ExperimentConfig::from_path(config)?;
    let w = instability_witness(&cfg, n)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir)?;
        let grid: Grid = cfg.grid()?;
        write_witness(&grid.nodes(), &w, &dir.join("unstable.csv"))?;
    }
    let summary = json!({
        "n": w.n,
        "m": w.m,
        "support": w.support,
        "f_norm_sq": w.f_norm_sq,
        "h_norm_sq": w.h_norm_sq,
        "ratio": w.ratio,
    });
    println!("{summary}");
    Ok(())
}

fn report(err: &Error) {
    eprintln!("{}", json!({ "error": err.kind(), "message": err.to_string() }));
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => run(&config, &out),
        Command::Kernel { config, nu_max, out } => kernel(&config, nu_max, out),
        Command::Unstable { config, n, out } => unstable(&config, n, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::from(2)
        }
    }
}

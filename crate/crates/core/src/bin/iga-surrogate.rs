use clap::Parser;
use iga_surrogate::run::{parse_sweep, run_logged, sweep, write_csv, RunConfig, Solution};
use iga_surrogate::Result;
use std::path::PathBuf;
use std::process::ExitCode;

/// Standard versus surrogate IGA assembly for the Poisson problem.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// Spatial dimension (2 or 3).
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Elements per direction [default: 159 in 2D, 39 in 3D].
    #[arg(long)]
    nel: Option<usize>,
    /// Spline degree p.
    #[arg(long, default_value_t = 2)]
    degree: usize,
    /// Interpolation degree q (1 or 3).
    #[arg(long, default_value_t = 3)]
    interp_degree: usize,
    /// Sampling skip M.
    #[arg(long, default_value_t = 10)]
    skip: usize,
    /// Built-in geometry or geometry file [default: quarter_annulus_bumps in 2D, bent_box in 3D].
    #[arg(long)]
    geometry: Option<String>,
    /// Gauss points per direction [default: degree + 1].
    #[arg(long)]
    quad_points: Option<usize>,
    /// Relative residual tolerance of the CG solver.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Worker threads for assembly.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Manufactured solution: oscillatory or smooth.
    #[arg(long, default_value = "oscillatory")]
    solution: String,
    /// Directory for Matrix Market dumps of both matrices.
    #[arg(long, value_name = "DIR")]
    dump_matrices: Option<PathBuf>,
    /// Write results as CSV to this path.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Run every configuration block of this file.
    #[arg(long, value_name = "FILE")]
    sweep: Option<PathBuf>,
}

impl Cli {
    fn config(&self) -> Result<RunConfig> {
        let base = RunConfig::defaults(self.dim);
        Ok(RunConfig {
            dim: self.dim,
            nel: self.nel.unwrap_or(base.nel),
            degree: self.degree,
            interp_degree: self.interp_degree,
            skip: self.skip,
            geometry: self.geometry.clone().unwrap_or(base.geometry),
            quad_points: self.quad_points,
            tol: self.tol,
            threads: self.threads,
            solution: self.solution.parse::<Solution>()?,
            dump_matrices: self.dump_matrices.clone(),
        })
    }
}

fn execute(cli: &Cli) -> Result<()> {
    if let Some(path) = &cli.sweep {
        let configs = parse_sweep(&std::fs::read_to_string(path)?)?;
        let rows = sweep(&configs);
        for (config, outcome) in &rows {
            if let Err(e) = outcome {
                eprintln!("run failed ({} {}D, nel={}, M={}): {e}", config.geometry, config.dim, config.nel, config.skip);
            }
        }
        return match &cli.csv {
            Some(p) => write_csv(std::fs::File::create(p)?, &rows),
            None => write_csv(std::io::stdout().lock(), &rows),
        };
    }
    let config = cli.config()?;
    let report = run_logged(&config, &mut std::io::stdout().lock());
    if let Ok(r) = &report {
        println!("{r}");
    }
    let rows = [(config, report)];
    if let Some(p) = &cli.csv {
        write_csv(std::fs::File::create(p)?, &rows)?;
    }
    let [(_, outcome)] = rows;
    outcome.map(|_| ())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}

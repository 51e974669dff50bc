//! `pnewton` — run and benchmark the preconditioned Newton solvers.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pnewton_cli::config::{
    AlgoName, KernelName, Overrides, RunConfig, ScaleSpec,
};
use pnewton_cli::experiments::{
    logreg_bench, logreg_csv, matfact_bench, matfact_csv, poly1d_csv, poly1d_grid, PnSolver,
    PolyMethod,
};
use pnewton_cli::output::{exit_code, make_run_dir, outcome_name, write_run_artifacts};
use pnewton_cli::runner::execute;
use pnewton_cli::validate::{run_validation, Fault};

#[derive(Parser)]
#[command(name = "pnewton", version, about = "Nonlinearly preconditioned Newton methods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver on one problem from a TOML config; flags win over the file.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long, value_enum)]
        kernel: Option<KernelName>,
        /// Kernel scale: a number or 'auto' (initial gradient norm).
        #[arg(long)]
        scale: Option<ScaleSpec>,
        #[arg(long, value_enum)]
        algo: Option<AlgoName>,
    },
    /// Iteration grid on the polynomial family x^p/p + x²/2.
    BenchPoly1d {
        #[arg(long, value_delimiter = ',', default_values_t = vec![2usize, 4, 8, 16])]
        p: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 10.0, 100.0])]
        x0: Vec<f64>,
        #[arg(long, value_delimiter = ',', value_enum, default_values_t = vec![KernelName::Cosh])]
        kernels: Vec<KernelName>,
        /// Methods: newton, pn, globalized (kernel list applies to the latter two).
        #[arg(long, value_delimiter = ',', default_values_t = vec!["newton".to_string(), "pn".to_string()])]
        algos: Vec<String>,
        #[arg(long, default_value_t = 1e-8)]
        eps: f64,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        #[arg(long, default_value = "1")]
        scale: ScaleSpec,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Iteration comparison on logistic-regression files (zero start,
    /// success = gradient norm ≤ 1e-6 within 100 iterations).
    BenchLogreg {
        #[arg(long, required = true)]
        data: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', value_enum,
              default_values_t = vec![KernelName::Quad, KernelName::Cosh, KernelName::Expabs, KernelName::Logbar])]
        kernels: Vec<KernelName>,
        #[arg(long, default_value_t = 0.0)]
        l2: f64,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Median Hessian-product counts on synthetic matrix factorization.
    BenchMatfact {
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 1e4, 1e8])]
        cond: Vec<f64>,
        #[arg(long, default_value_t = 100.0)]
        x0_scale: f64,
        #[arg(long, default_value_t = 20)]
        repeats: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        r: usize,
        #[arg(long, value_delimiter = ',', value_enum,
              default_values_t = vec![KernelName::Cosh, KernelName::Expabs, KernelName::Logbar])]
        kernels: Vec<KernelName>,
        /// Inner solver for the preconditioned rows.
        #[arg(long, value_enum, default_value_t = PnSolver::Cg)]
        pn_solver: PnSolver,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Run the numerical validation battery; exits nonzero on any failure.
    Validate {
        /// Restrict to problem families (poly1d, quadratic, logistic, matfact).
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        problems: Option<Vec<String>>,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        /// Emit the report as JSON instead of lines.
        #[arg(long)]
        json: bool,
        /// Deliberately corrupt one analytic quantity (test mode).
        #[arg(long, value_enum)]
        inject_fault: Option<Fault>,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn write_csv(out_dir: &PathBuf, name: &str, csv: &str) -> Result<PathBuf, String> {
    std::fs::create_dir_all(out_dir).map_err(|e| format!("creating {out_dir:?}: {e}"))?;
    let path = out_dir.join(name);
    std::fs::write(&path, csv).map_err(|e| format!("writing {path:?}: {e}"))?;
    Ok(path)
}

fn run() -> Result<ExitCode, String> {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve {
            config,
            seed,
            out,
            eps,
            max_iters,
            kernel,
            scale,
            algo,
        } => {
            let mut cfg = RunConfig::load(&config).map_err(|e| e.to_string())?;
            let ov = Overrides {
                seed,
                out,
                eps,
                max_iters,
                kernel,
                scale,
                algo,
            };
            ov.apply(&mut cfg);
            cfg.validate().map_err(|e| e.to_string())?;
            let (run, trace) = execute(&cfg).map_err(|e| e.to_string())?;
            let dir = make_run_dir(&cfg).map_err(|e| e.to_string())?;
            write_run_artifacts(&dir, &cfg, run.resolved_scale, &trace)
                .map_err(|e| e.to_string())?;
            println!(
                "{}: {} iterations, outcome {}, artifacts in {}",
                cfg.algorithm.name.as_str(),
                trace.iterations(),
                outcome_name(&trace.reason),
                dir.display()
            );
            Ok(ExitCode::from(exit_code(&trace.reason) as u8))
        }
        Command::BenchPoly1d {
            p,
            x0,
            kernels,
            algos,
            eps,
            max_iters,
            scale,
            out,
        } => {
            let mut methods = Vec::new();
            for a in &algos {
                match a.as_str() {
                    "newton" => methods.push(PolyMethod::Newton),
                    "pn" => methods.extend(kernels.iter().map(|&k| PolyMethod::Pn(k))),
                    "globalized" => {
                        methods.extend(kernels.iter().map(|&k| PolyMethod::Globalized(k)))
                    }
                    other => return Err(format!("unknown poly1d method '{other}'")),
                }
            }
            let rows = poly1d_grid(&p, &x0, &methods, scale, eps, max_iters);
            let csv = poly1d_csv(&rows);
            let path = write_csv(&out, "bench-poly1d.csv", &csv)?;
            print!("{csv}");
            eprintln!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::BenchLogreg {
            data,
            kernels,
            l2,
            out,
        } => {
            let rows = logreg_bench(&data, &kernels, l2).map_err(|e| e.to_string())?;
            let csv = logreg_csv(&rows);
            let path = write_csv(&out, "bench-logreg.csv", &csv)?;
            print!("{csv}");
            eprintln!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::BenchMatfact {
            cond,
            x0_scale,
            repeats,
            seed,
            n,
            r,
            kernels,
            pn_solver,
            out,
        } => {
            let rows = matfact_bench(&cond, x0_scale, repeats, seed, n, r, &kernels, pn_solver)
                .map_err(|e| e.to_string())?;
            let csv = matfact_csv(&rows);
            let path = write_csv(&out, "bench-matfact.csv", &csv)?;
            print!("{csv}");
            eprintln!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate {
            problems,
            data_dir,
            json,
            inject_fault,
        } => {
            let problems = problems.unwrap_or_default();
            let results = run_validation(&problems, inject_fault, &data_dir)?;
            let failures = results.iter().filter(|r| !r.pass).count();
            if json {
                let arr: Vec<serde_json::Value> = results
                    .iter()
                    .map(|r| {
                        serde_json::json!({
                            "name": r.name,
                            "pass": r.pass,
                            "detail": r.detail,
                        })
                    })
                    .collect();
                println!("{}", serde_json::to_string_pretty(&arr).unwrap());
            } else {
                for r in &results {
                    println!("{} {} — {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
                }
                println!("{} checks, {} failed", results.len(), failures);
            }
            if failures == 0 {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(4))
            }
        }
    }
}

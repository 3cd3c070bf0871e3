use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};

use clap::{Parser, Subcommand};

use stochastic_sindy::harness::{
    convergence_orders, emit_csv, emit_plot_data, read_csv, reference_settings,
    run_trials_with_progress, DictSpec, ExperimentConfig,
};
use stochastic_sindy::metrics::{true_diffusion_coefficients, true_drift_coefficients};
use stochastic_sindy::sde_sim::{diffusion_pairs, model_zoo, ZooModel};
use stochastic_sindy::Error;

macro_rules! wl {
    ($out:expr, $($arg:tt)*) => {{
        let _ = writeln!($out, $($arg)*);
    }};
}

#[derive(Parser)]
#[command(
    name = "stochastic-sindy",
    version,
    about = "Sparse identification of SDE drift and diffusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep and write results.csv plus plot series.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// List built-in models and their published settings.
    Zoo,
    /// Print the true coefficients of a built-in model in a dictionary.
    Truth {
        model: String,
        /// Dictionary, e.g. `monomial:4` or `trig:4`.
        dict: String,
        /// Separate dictionary for the diffusion (defaults to `dict`).
        #[arg(long)]
        diffusion_dict: Option<String>,
    },
    /// Fit convergence orders (err_mean vs dt at the largest T) from a results CSV.
    Order { csv: PathBuf },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidArgument(_) | Error::NotRepresentable(_) => {
                Failure::Config(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let mut text = String::new();
    let result = match cli.command {
        Command::Run { config, out } => cmd_run(&config, &out),
        Command::Zoo => {
            cmd_zoo(&mut text);
            Ok(())
        }
        Command::Truth {
            model,
            dict,
            diffusion_dict,
        } => cmd_truth(&mut text, &model, &dict, diffusion_dict.as_deref()),
        Command::Order { csv } => cmd_order(&mut text, &csv),
    };
    // a closed pipe (e.g. `| head`) is not an error
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn cmd_run(config: &Path, out: &Path) -> Result<(), Failure> {
    let cfg = ExperimentConfig::load(config).map_err(|e| Failure::Config(e.to_string()))?;
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    std::fs::create_dir_all(out)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;

    eprintln!(
        "{}: {} trials, {} methods, {} cells",
        cfg.name,
        cfg.trials,
        cfg.methods.len(),
        cfg.cells().len()
    );
    let done = AtomicUsize::new(0);
    let total = cfg.trials;
    let step = (total / 20).max(1);
    let sweep = run_trials_with_progress(&cfg, &|_| {
        let n = done.fetch_add(1, Ordering::Relaxed) + 1;
        if n.is_multiple_of(step) || n == total {
            eprintln!("  {n}/{total} trials");
        }
    })?;
    let diverged = sweep.diverged_trials();
    if diverged > 0 {
        eprintln!("warning: {diverged} trial(s) diverged and were excluded");
    }
    let reports = sweep.reports();

    let csv_path = out.join("results.csv");
    emit_csv(&reports, &csv_path)?;
    eprintln!("wrote {}", csv_path.display());
    let prefix = format!("{}/", out.display());
    match emit_plot_data(&reports, &prefix, cfg.fixed_dt) {
        Ok(plots) => {
            for p in &plots.written {
                eprintln!("wrote {}", p.display());
            }
            for s in &plots.skipped {
                eprintln!("note: {s}");
            }
        }
        Err(Error::Coverage(msg)) => eprintln!("note: no plot series written: {msg}"),
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

fn cmd_zoo(out: &mut String) {
    for which in ZooModel::ALL {
        let model = model_zoo(which);
        wl!(out, "{which} (dim {})", model.labels().len());
        wl!(out, "  {}", reference_settings(which));
    }
}

fn cmd_truth(
    out: &mut String,
    model: &str,
    dict: &str,
    diffusion_dict: Option<&str>,
) -> Result<(), Failure> {
    let which: ZooModel = model.parse()?;
    let model = model_zoo(which);
    let d = model.labels().len();
    let drift_dict = dict.parse::<DictSpec>()?.build(d)?;
    let diff_dict = diffusion_dict
        .unwrap_or(dict)
        .parse::<DictSpec>()?
        .build(d)?;

    let print_column =
        |out: &mut String, m: &nalgebra::DMatrix<f64>, c: usize, labels: &[String]| {
            for (r, label) in labels.iter().enumerate() {
                let v = m[(r, c)];
                if v != 0.0 {
                    wl!(out, "  {label}: {v}");
                }
            }
        };

    let drift = true_drift_coefficients(&model, &drift_dict)?;
    for (i, name) in model.labels().iter().enumerate() {
        wl!(out, "drift {name}:");
        print_column(out, &drift, i, drift_dict.labels());
    }
    match true_diffusion_coefficients(&model, &diff_dict) {
        Ok(beta) => {
            for (c, (i, j)) in diffusion_pairs(d).into_iter().enumerate() {
                wl!(out, "diffusion ({},{}):", i + 1, j + 1);
                print_column(out, &beta, c, diff_dict.labels());
            }
        }
        Err(e @ Error::NotRepresentable(_)) => {
            eprintln!(
                "note: diffusion not representable in {}: {e}",
                diff_dict.basis()
            );
        }
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

fn cmd_order(out: &mut String, csv: &Path) -> Result<(), Failure> {
    let reports = read_csv(csv).map_err(|e| Failure::Config(format!("{}: {e}", csv.display())))?;
    wl!(out, "method\ttarget\torder");
    for (method, target, slope) in convergence_orders(&reports) {
        match slope {
            Ok(s) => wl!(out, "{method}\t{target}\t{s:.4}"),
            Err(e) => {
                wl!(out, "{method}\t{target}\tNaN");
                eprintln!("note: {method} ({target}): {e}");
            }
        }
    }
    Ok(())
}

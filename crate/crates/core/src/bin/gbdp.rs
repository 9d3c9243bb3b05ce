//! `gbdp` command-line tool.
//!
//! Exit codes: 0 success or affirmative verdict, 1 negative verdict,
//! 2 input error (unreadable file, bad shape, unsupported request).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use gbdp::commute::{commutes_direct, constraint_residuals};
use gbdp::io;
use gbdp::param::build_model;
use gbdp::spectral::{k_step_from_model, k_step_with_self, matrix_power};
use gbdp::{algebra, simulate, stochastic};
use gbdp::{default_tolerance, GbdpError, Grid, GridShape, SelfTransition};

/// Failing identities printed per direction pair before eliding the rest.
const MAX_LISTED: usize = 20;

#[derive(Parser)]
#[command(name = "gbdp", version, about = "Generalized birth-death processes on finite grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Spectral,
    Power,
}

#[derive(Subcommand)]
enum Command {
    /// Check that all directional matrices of a model commute.
    CheckCommute {
        #[arg(long)]
        model: PathBuf,
        /// Absolute tolerance (default: $GBDP_TOL or 1e-12).
        #[arg(long)]
        tol: Option<f64>,
    },
    /// k-step transition matrix as CSV.
    Kstep {
        #[arg(long, conflicts_with = "model", required_unless_present = "model")]
        params: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        k: u32,
        /// Scalar self-transition probability (parameter files only).
        #[arg(long = "self", conflicts_with = "model")]
        self_prob: Option<f64>,
        #[arg(long, value_enum, default_value = "spectral")]
        method: Method,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Orders and exact ranks of the constraint and parameter matrices.
    Ranks {
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long)]
        l: usize,
        /// Write Q and R as sparse triplets with legends into this directory.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Perron-scale a parametrization so the full matrix is stochastic.
    Normalize {
        #[arg(long)]
        params: PathBuf,
        #[arg(long = "self", default_value_t = 0.0)]
        self_prob: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo k-step endpoint frequencies as CSV.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        from: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), GbdpError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| GbdpError::Parse(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn check_commute(model: PathBuf, tol: Option<f64>) -> Result<bool, GbdpError> {
    let tol = tol.unwrap_or_else(default_tolerance);
    let m = io::load_model(&model)?;
    let structural: Vec<_> = m.validate().into_iter().filter(|v| v.is_structural()).collect();
    if let Some(v) = structural.first() {
        return Err(GbdpError::Domain(format!("invalid model: {v}")));
    }
    let q = m.shape().q();
    let mut all = true;
    for i in 0..q {
        for j in i + 1..q {
            let check = commutes_direct(&m, i, j, tol)?;
            println!(
                "directions ({},{}): max residual {:e} {}",
                i + 1,
                j + 1,
                check.residual,
                if check.commutes { "ok" } else { "FAIL" }
            );
            if check.commutes {
                continue;
            }
            all = false;
            let failing: Vec<_> = constraint_residuals(&m, i, j)?
                .into_iter()
                .filter(|(_, r)| r.abs() > tol)
                .collect();
            for (c, r) in failing.iter().take(MAX_LISTED) {
                println!("  violated: {c} (residual {r:e})");
            }
            if failing.len() > MAX_LISTED {
                println!("  ... {} more", failing.len() - MAX_LISTED);
            }
        }
    }
    if q == 1 {
        println!("single direction: nothing to check");
    }
    println!("{}", if all { "commutes" } else { "does not commute" });
    Ok(all)
}

fn kstep(
    params: Option<PathBuf>,
    model: Option<PathBuf>,
    k: u32,
    self_prob: Option<f64>,
    method: Method,
    out: Option<PathBuf>,
) -> Result<(), GbdpError> {
    let (grid, pk): (Grid, DMatrix<f64>) = match (params, model) {
        (Some(path), _) => {
            let p = io::load_params(&path)?;
            let a = self_prob.unwrap_or(0.0);
            let pk = match method {
                Method::Spectral => k_step_with_self(&p, a, k)?,
                Method::Power => {
                    let mut m = build_model(&p);
                    if a != 0.0 {
                        m.set_self(SelfTransition::Scalar(a));
                    }
                    matrix_power(&m.full_matrix(), k)
                }
            };
            (Grid::new(p.shape().clone()), pk)
        }
        (None, Some(path)) => {
            let m = io::load_model(&path)?;
            let pk = match method {
                Method::Spectral => k_step_from_model(&m, k)?,
                Method::Power => matrix_power(&m.full_matrix(), k),
            };
            (m.grid().clone(), pk)
        }
        (None, None) => unreachable!("clap requires one of --params/--model"),
    };
    emit(&io::matrix_csv(&grid, &pk)?, out.as_ref())
}

fn ranks(dims: Vec<usize>, l: usize, dump: Option<PathBuf>) -> Result<bool, GbdpError> {
    let shape = GridShape::balanced(dims, l)?;
    if let Some(dir) = &dump {
        io::dump_triplets(&algebra::build_q(&shape)?, dir, "Q")?;
        io::dump_triplets(&algebra::build_r(&shape)?, dir, "R")?;
    }
    let report = algebra::verify_orthocomplement(&shape)?;
    println!("{report}");
    Ok(report.orthogonal && report.complementary())
}

fn normalize(params: PathBuf, self_prob: f64, out: PathBuf) -> Result<(), GbdpError> {
    let p = io::load_params(&params)?;
    let n = stochastic::normalization(&p, self_prob)?;
    io::save_params(&n.params, &out)?;
    println!("rho = {:.16e}", n.rho);
    println!("gamma scale = {:.16e}", n.scale);
    Ok(())
}

fn simulate_cmd(
    model: PathBuf,
    from: String,
    k: usize,
    trials: u64,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<(), GbdpError> {
    let m = io::load_model(&model)?;
    let start = io::parse_state(&from)?;
    let counts = simulate::empirical_kstep(&m, &start, k, trials, seed)?;
    emit(&io::frequency_csv(m.grid(), &counts, m.absorbing())?, out.as_ref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let verdict = match cli.command {
        Command::CheckCommute { model, tol } => check_commute(model, tol),
        Command::Kstep {
            params,
            model,
            k,
            self_prob,
            method,
            out,
        } => kstep(params, model, k, self_prob, method, out).map(|_| true),
        Command::Ranks { dims, l, dump } => ranks(dims, l, dump),
        Command::Normalize { params, self_prob, out } => normalize(params, self_prob, out).map(|_| true),
        Command::Simulate {
            model,
            from,
            k,
            trials,
            seed,
            out,
        } => simulate_cmd(model, from, k, trials, seed, out).map(|_| true),
    };
    match verdict {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

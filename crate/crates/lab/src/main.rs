use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use kinetic_core::kernel::{kernel_bound_check, BoundSampling, CovariancePolynomial};
use kinetic_core::lorentz::{level_report, Rearrangement};
use kinetic_core::norms::{HolderSampling, NormReport, NormSettings};
use kinetic_core::taylor::{mollify_inverse_rate, mollify_rate, taylor_remainder_rate, BumpKernel, MollifyGrid, RateStudy};
use kinetic_core::{BlockStructure, FieldRef, FieldSpec, Geometry};
use kinetic_lab::experiments::{run_config, KINDS};
use kinetic_lab::report::{read_report, write_report};
use kinetic_lab::sweep::num;
use kinetic_lab::{ExperimentConfig, LabError, Result};

#[derive(Parser)]
#[command(name = "kinetic", version, about = "Function spaces for homogeneous Kolmogorov operators")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Operator structure checks.
    #[command(subcommand)]
    Structure(StructureCmd),
    /// Fundamental solution of the operator.
    #[command(subcommand)]
    Kernel(KernelCmd),
    /// Intrinsic norms of a test function.
    #[command(subcommand)]
    Norm(NormCmd),
    /// Intrinsic Taylor remainders.
    #[command(subcommand)]
    Taylor(TaylorCmd),
    /// Group-convolution mollifiers.
    #[command(subcommand)]
    Mollify(MollifyCmd),
    /// Rearrangement and Lorentz quasi-norms.
    Lorentz {
        #[command(flatten)]
        f: FieldArgs,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,2,inf")]
        q: Vec<f64>,
        #[arg(long, default_value_t = 32)]
        points: usize,
    },
    /// Tartar level sequence with gaps and truncation seminorms.
    Tartar {
        #[command(flatten)]
        f: FieldArgs,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 16)]
        points: usize,
    },
    /// Config-driven experiments.
    #[command(subcommand)]
    Lab(LabCmd),
}

#[derive(Subcommand)]
enum StructureCmd {
    /// Validate a block-structure file and print its invariants.
    Check {
        operator: PathBuf,
        /// Random samples for the quasi-triangle constant.
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum KernelCmd {
    /// Γ, ∇_d Γ and YΓ at one point `t,x_1,..`.
    Eval {
        operator: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        z: Vec<f64>,
    },
    /// Sampled suprema of ‖z‖^{𝐝−2}Γ and ‖z‖^𝐝|YΓ|.
    Bounds {
        operator: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        t_min: f64,
        #[arg(long, default_value_t = 10.0)]
        t_max: f64,
        #[arg(long, default_value_t = 4.0)]
        x_max: f64,
        #[arg(long, default_value_t = 25)]
        n_t: usize,
        #[arg(long, default_value_t = 9)]
        n_x: usize,
    },
}

#[derive(Args)]
struct FieldArgs {
    /// Block-structure TOML file.
    operator: PathBuf,
    /// Test-function TOML file.
    field: PathBuf,
}

impl FieldArgs {
    fn load(&self) -> Result<(Geometry, FieldRef)> {
        let g = Geometry::new(BlockStructure::load(&self.operator)?)?;
        let u = FieldSpec::load(&self.field)?.build(&g)?;
        Ok((g, u))
    }
}

#[derive(Subcommand)]
enum NormCmd {
    /// L^p, fractional, Sobolev and Hölder norms.
    Compute {
        #[command(flatten)]
        f: FieldArgs,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        orders: Vec<usize>,
        /// Hölder pairs `k:alpha`.
        #[arg(long, value_delimiter = ',')]
        holder: Vec<String>,
        #[arg(long, default_value_t = 16)]
        points: usize,
        #[arg(long)]
        full_line: bool,
    },
}

#[derive(Subcommand)]
enum TaylorCmd {
    /// Remainder ‖u − T_n u(ζ,·)‖ on shrinking balls and the fitted slope.
    Fit {
        #[command(flatten)]
        f: FieldArgs,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        zeta: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.075,0.1125,0.16875,0.253125")]
        sigmas: Vec<f64>,
        #[arg(long, default_value_t = 16)]
        points: usize,
    },
}

#[derive(Subcommand)]
enum MollifyCmd {
    /// ‖u − u_ε‖ rate, or with `--m` the growth of ‖u_ε‖_{W^m}.
    Rate {
        #[command(flatten)]
        f: FieldArgs,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.14,0.2,0.28,0.4")]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 6)]
        kernel_nodes: usize,
        #[arg(long, default_value_t = 16)]
        points: usize,
    },
}

#[derive(Subcommand)]
enum LabCmd {
    /// Run every experiment of a config and write CSV tables plus summary.json.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the experiment kinds.
    ListExperiments,
    /// Print the verdicts of a finished run; exit status 1 if any failed.
    Report { dir: PathBuf },
}

fn print_rows(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) {
    println!("{}", header.join(","));
    for r in rows {
        println!("{}", r.join(","));
    }
}

fn print_rate(s: &RateStudy) {
    print_rows(&["scale", "value"], s.points.iter().map(|p| vec![num(p.scale), num(p.value)]));
    println!("# slope {} r2 {}", num(s.fit.slope), num(s.fit.r_squared));
}

fn zeta_or_origin(zeta: Vec<f64>, g: &Geometry) -> Result<Vec<f64>> {
    if zeta.is_empty() {
        return Ok(vec![0.0; g.dim()]);
    }
    if zeta.len() != g.dim() {
        return Err(LabError::Config(format!("need {} coordinates, got {}", g.dim(), zeta.len())));
    }
    Ok(zeta)
}

fn report(dir: &Path) -> Result<bool> {
    let s = read_report(dir)?;
    for l in s.lines() {
        println!("{l}");
    }
    Ok(s.passed())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Structure(StructureCmd::Check { operator, samples, seed }) => {
            let bs = BlockStructure::load(&operator)?;
            let g = Geometry::new(bs)?;
            let cert = g.check_hormander(true);
            println!("dimension {}", g.dim());
            println!("homogeneous dimension {}", g.hom_dim());
            println!("layers {:?}", g.structure().layer_dims);
            println!("nilpotency degree {}", g.nilpotency_degree());
            println!("kalman rank {} of {}", cert.rank, cert.n);
            if let Some(e) = cert.min_eig_c1 {
                println!("min eigenvalue C(1) {}", num(e));
            }
            println!("quasi-triangle constant {}", num(g.estimate_quasi_triangle(samples, seed)));
            Ok(cert.holds)
        }
        Cmd::Kernel(KernelCmd::Eval { operator, z }) => {
            let g = Geometry::new(BlockStructure::load(&operator)?)?;
            let z = zeta_or_origin(z, &g)?;
            let v = CovariancePolynomial::new(&g).gamma_eval(&z)?;
            println!("gamma {}", num(v.gamma));
            let grad: Vec<String> = v.grad_d.iter().map(|&x| num(x)).collect();
            println!("grad_d {}", grad.join(","));
            println!("y_gamma {}", num(v.y_gamma));
            Ok(true)
        }
        Cmd::Kernel(KernelCmd::Bounds {
            operator,
            t_min,
            t_max,
            x_max,
            n_t,
            n_x,
        }) => {
            let g = Geometry::new(BlockStructure::load(&operator)?)?;
            let s = BoundSampling {
                t_min,
                t_max,
                x_max,
                n_t,
                n_x,
            };
            let cp = CovariancePolynomial::new(&g);
            let rows = [s.clone(), s.refined()]
                .iter()
                .map(|s| {
                    let r = kernel_bound_check(&cp, s)?;
                    Ok(vec![num(r.samples as f64), num(r.sup_gamma), num(r.sup_y_gamma)])
                })
                .collect::<Result<Vec<_>>>()?;
            print_rows(&["samples", "sup_gamma", "sup_y_gamma"], rows);
            Ok(true)
        }
        Cmd::Norm(NormCmd::Compute {
            f,
            p,
            orders,
            holder,
            points,
            full_line,
        }) => {
            let (g, u) = f.load()?;
            let holder = holder
                .iter()
                .map(|s| {
                    let (k, a) = s
                        .split_once(':')
                        .ok_or_else(|| LabError::Config(format!("holder pair {s:?} is not k:alpha")))?;
                    let k = k.parse().map_err(|_| LabError::Config(format!("bad order in {s:?}")))?;
                    let a = a.parse().map_err(|_| LabError::Config(format!("bad exponent in {s:?}")))?;
                    Ok((k, a))
                })
                .collect::<Result<Vec<(usize, f64)>>>()?;
            let mut set = NormSettings::default().with_points(points);
            if full_line {
                set = set.full_line();
            }
            let r = NormReport::compute(&u, &g, p, &orders, &holder, &set, &HolderSampling::default())?;
            print_rows(&["quantity", "order", "value"], r.rows().into_iter().map(|(q, o, v)| vec![q, o, num(v)]));
            Ok(true)
        }
        Cmd::Taylor(TaylorCmd::Fit {
            f,
            n,
            p,
            zeta,
            sigmas,
            points,
        }) => {
            let (g, u) = f.load()?;
            let zeta = zeta_or_origin(zeta, &g)?;
            let set = NormSettings::default().with_points(points);
            print_rate(&taylor_remainder_rate(&u, &g, n, p, &zeta, &sigmas, &set)?);
            Ok(true)
        }
        Cmd::Mollify(MollifyCmd::Rate {
            f,
            n,
            m,
            p,
            eps,
            kernel_nodes,
            points,
        }) => {
            let (g, u) = f.load()?;
            let set = NormSettings::default().with_points(points);
            let kernel = Arc::new(BumpKernel::new(&g, kernel_nodes)?);
            let study = match m {
                Some(m) => mollify_inverse_rate(&u, &g, n, m, p, &eps, kernel, &MollifyGrid::default(), &set)?,
                None => mollify_rate(&u, &g, n, p, &eps, kernel, &set)?,
            };
            print_rate(&study);
            Ok(true)
        }
        Cmd::Lorentz { f, p, q, points } => {
            let (_, u) = f.load()?;
            let r = Rearrangement::from_function(u.as_ref(), points)?;
            let rows = q
                .iter()
                .map(|&q| Ok(vec![num(q), num(r.lorentz_norm(p, q)?), num(r.lorentz_normalized(p, q)?)]))
                .collect::<Result<Vec<_>>>()?;
            print_rows(&["q", "norm", "normalized"], rows);
            println!("# total measure {} max {}", num(r.total_measure()), num(r.max()));
            Ok(true)
        }
        Cmd::Tartar { f, p, points } => {
            let (g, u) = f.load()?;
            let set = NormSettings::default().with_points(points);
            let (_, rep) = level_report(&u, &g, p, points, &set)?;
            print_rows(
                &["k", "a_k", "gap", "weighted_gap", "seminorm"],
                rep.rows
                    .iter()
                    .map(|r| vec![r.k.to_string(), num(r.a_k), num(r.gap), num(r.weighted_gap), num(r.seminorm)]),
            );
            println!("# p* {} c_hat {}", num(rep.p_star), num(rep.c_hat()));
            Ok(true)
        }
        Cmd::Lab(LabCmd::ListExperiments) => {
            for (k, d) in KINDS {
                println!("{k:16} {d}");
            }
            Ok(true)
        }
        Cmd::Lab(LabCmd::Run { config, out }) => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(out) = out {
                cfg = cfg.with_output(std::env::current_dir().map_err(|e| LabError::Config(e.to_string()))?.join(out));
            }
            let results = run_config(&cfg)?;
            let dir = cfg.output_dir();
            write_report(&dir, &cfg.name, &results)?;
            report(&dir)
        }
        Cmd::Lab(LabCmd::Report { dir }) => report(&dir),
    }
}

fn main() -> ExitCode {
    if let Ok(w) = std::env::var("KINETIC_WORKERS") {
        match w.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: KINETIC_WORKERS must be a positive integer, got {w:?}");
                return ExitCode::from(2);
            }
        }
    }
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

//! Command-line driver. Subcommands: inspect, sample, fk, spectrum, check,
//! validate. Exit codes: 0 success, 1 config error, 2 numerical failure,
//! 3 validation-suite failure.

use clap::{Parser, Subcommand};
use myers_core::config::{load_config_file, RunSetup};
use myers_core::criterion::check;
use myers_core::error::MyersError;
use myers_core::geometry::{curvature_pack, Point};
use myers_core::report::{csv_num, csv_row, write_atomic};
use myers_core::sde::{dump_path, sample_functionals, ObservableSpec};
use myers_core::spectral::{build_operator, top_eigenvalues_plain, witten_check};
use myers_core::validate;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "myers",
    about = "Curvature criteria on closed surfaces: Monte Carlo and spectral engines, cross-checked"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo worker threads (results are independent of this)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (overrides the config)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Reduced path counts and resolutions
    #[arg(long, global = true)]
    quick: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Curvature fields on a grid -> CSV
    Inspect,
    /// Dump sampled h-Brownian paths -> CSV
    Sample {
        /// number of paths to dump
        #[arg(long, default_value_t = 4)]
        paths: usize,
    },
    /// Feynman-Kac weight and Hessian-flow norm curves -> CSV
    Fk,
    /// Eigenvalues and the Witten conjugation check -> CSV + JSON
    Spectrum {
        /// also export the operator in Matrix Market format
        #[arg(long)]
        export_matrix: bool,
    },
    /// Full criterion report -> JSON
    Check,
    /// Run the identity/invariant suite on the built-in catalog
    Validate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // results are thread-count independent by construction; this only
        // limits parallelism
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_setup(cli: &Cli) -> Result<RunSetup, MyersError> {
    let path = cli.config.as_ref().ok_or_else(|| MyersError::Config {
        path: "--config".into(),
        message: "this subcommand needs a config file".into(),
    })?;
    let mut file = load_config_file(path)?;
    if let Some(seed) = cli.seed {
        file.sde.seed = seed;
    }
    let mut setup = file.build()?;
    if let Some(out) = &cli.out {
        setup.output_dir = out.clone();
    }
    if cli.quick {
        setup.check.sampler.n_paths = setup.check.sampler.n_paths.min(2000);
        setup.check.sampler.t_max = setup.check.sampler.t_max.min(4.0);
        setup.check.resolution = setup.check.resolution.min(32);
        setup.check.subdivision = setup.check.subdivision.min(4);
    }
    Ok(setup)
}

fn run(cli: Cli) -> Result<ExitCode, MyersError> {
    match &cli.command {
        Command::Validate => {
            let quick = cli.quick;
            let outcomes = validate::run_battery(quick);
            let mut failures = 0usize;
            for o in &outcomes {
                let status = if o.passed { "PASS" } else { "FAIL" };
                println!("{status}  {}  {} - {}", o.id, o.name, o.detail);
                if !o.passed {
                    failures += 1;
                }
            }
            println!(
                "{} of {} checks passed",
                outcomes.len() - failures,
                outcomes.len()
            );
            if failures > 0 {
                return Ok(ExitCode::from(3));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Inspect => {
            let setup = load_setup(&cli)?;
            let op = build_operator(
                &setup.model,
                &setup.h,
                setup.check.resolution,
                setup.check.subdivision,
                setup.check.rho_shift,
            )?;
            let mut out = csv_row(&[
                "chart".into(),
                "u".into(),
                "v".into(),
                "rho_h".into(),
                "ric_11".into(),
                "ric_12".into(),
                "ric_22".into(),
                "hess_h_11".into(),
                "hess_h_12".into(),
                "hess_h_22".into(),
                "h".into(),
            ]);
            for p in &op.points {
                let pack = curvature_pack(&setup.model, &setup.h, p)?;
                out.push_str(&csv_row(&[
                    p.chart.to_string(),
                    csv_num(p.coords[0]),
                    csv_num(p.coords[1]),
                    csv_num(pack.rho_h),
                    csv_num(pack.ric.m[0][0]),
                    csv_num(pack.ric.m[0][1]),
                    csv_num(pack.ric.m[1][1]),
                    csv_num(pack.hess_h.m[0][0]),
                    csv_num(pack.hess_h.m[0][1]),
                    csv_num(pack.hess_h.m[1][1]),
                    csv_num(pack.h_value),
                ]));
            }
            let path = setup.output_dir.join("inspect.csv");
            write_atomic(&path, &out)?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Sample { paths } => {
            let setup = load_setup(&cli)?;
            let x0 = default_start(&setup);
            for k in 0..*paths {
                let rows = dump_path(&setup.model, &setup.h, &x0, &setup.check.sampler, k)?;
                let mut out = csv_row(&[
                    "t".into(),
                    "chart_id".into(),
                    "u".into(),
                    "v".into(),
                    "rho_h".into(),
                    "fk_weight".into(),
                    "w_norm".into(),
                ]);
                for r in rows {
                    out.push_str(&csv_row(&[
                        csv_num(r.t),
                        r.chart.to_string(),
                        csv_num(r.u),
                        csv_num(r.v),
                        csv_num(r.rho_h),
                        csv_num(r.fk_weight),
                        csv_num(r.w_norm),
                    ]));
                }
                let path = setup.output_dir.join(format!("path_{k}.csv"));
                write_atomic(&path, &out)?;
                println!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Fk => {
            let setup = load_setup(&cli)?;
            let x0 = default_start(&setup);
            let rec = sample_functionals(
                &setup.model,
                &setup.h,
                &x0,
                ObservableSpec {
                    integrate_fk: true,
                    ..Default::default()
                },
                &setup.check.sampler,
            )?;
            let mut out = csv_row(&[
                "t".into(),
                "fk_mean".into(),
                "fk_stderr".into(),
                "w_mean".into(),
                "w_stderr".into(),
            ]);
            for i in 0..rec.times.len() {
                out.push_str(&csv_row(&[
                    csv_num(rec.times[i]),
                    csv_num(rec.fk_mean[i]),
                    csv_num(rec.fk_stderr[i]),
                    csv_num(rec.w_mean[i]),
                    csv_num(rec.w_stderr[i]),
                ]));
            }
            let path = setup.output_dir.join("fk_curves.csv");
            write_atomic(&path, &out)?;
            println!(
                "wrote {} ({} paths, {} excluded)",
                path.display(),
                rec.n_paths,
                rec.excluded
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Spectrum { export_matrix } => {
            let setup = load_setup(&cli)?;
            let op = build_operator(
                &setup.model,
                &setup.h,
                setup.check.resolution,
                setup.check.subdivision,
                setup.check.rho_shift,
            )?;
            let witten = witten_check(
                &setup.model,
                &setup.h,
                setup.check.resolution,
                setup.check.subdivision,
            )?;
            let eigs = top_eigenvalues_plain(&op, 10)?;
            let mut out = csv_row(&[
                "k".into(),
                "half_laplacian_eigenvalue".into(),
                "witten_conjugated_eigenvalue".into(),
            ]);
            for (k, (a, b)) in eigs
                .iter()
                .zip(&witten.eigs_conjugated)
                .enumerate()
            {
                out.push_str(&csv_row(&[k.to_string(), csv_num(*a), csv_num(*b)]));
            }
            let csv_path = setup.output_dir.join("spectrum.csv");
            write_atomic(&csv_path, &out)?;
            let mut j = myers_core::report::Json::obj();
            j.push(
                "eigs_weighted",
                myers_core::report::Json::num_array(&witten.eigs_weighted),
            );
            j.push(
                "eigs_conjugated",
                myers_core::report::Json::num_array(&witten.eigs_conjugated),
            );
            j.push(
                "max_eig_mismatch",
                myers_core::report::Json::Num(witten.max_eig_mismatch),
            );
            j.push(
                "pointwise_rel_residual",
                myers_core::report::Json::Num(witten.pointwise_rel_residual),
            );
            let json_path = setup.output_dir.join("witten.json");
            write_atomic(&json_path, &j.render())?;
            if op.negative_edge_weights > 0 {
                eprintln!(
                    "note: {} negative edge weights in the discretization",
                    op.negative_edge_weights
                );
            }
            if *export_matrix {
                let mut buf = Vec::new();
                op.lap_sym
                    .write_matrix_market(&mut buf)
                    .map_err(|source| MyersError::Io {
                        path: "operator.mtx".into(),
                        source,
                    })?;
                let mtx_path = setup.output_dir.join("operator.mtx");
                write_atomic(&mtx_path, &String::from_utf8_lossy(&buf))?;
                println!("wrote {}", mtx_path.display());
            }
            println!("wrote {} and {}", csv_path.display(), json_path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Check => {
            let setup = load_setup(&cli)?;
            let report = check(&setup.model, &setup.h, &setup.check)?;
            let json_path = setup.output_dir.join("check.json");
            write_atomic(&json_path, &report.to_json().render())?;
            let csv_path = setup.output_dir.join("residuals.csv");
            write_atomic(&csv_path, &report.residuals_csv())?;
            println!(
                "criterion_holds = {} (lambda0 = {:.6e}); wrote {} and {}",
                report.criterion_holds,
                report.lambda0,
                json_path.display(),
                csv_path.display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn default_start(setup: &RunSetup) -> Point {
    // first probe if given, otherwise a canonical start
    if setup.model.is_sphere() {
        setup.model.point_from_ambient([0.0, 0.0, setup.model.radius().unwrap()])
    } else {
        let probe = setup
            .check
            .probes
            .as_ref()
            .and_then(|p| p.first().copied())
            .unwrap_or([0.0, 0.0]);
        Point::new(0, probe[0], probe[1])
    }
}

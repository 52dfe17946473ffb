//! `idfd` command-line runner.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};

use idfd::augment::SampleShape;
use idfd::config::{RunConfig, KEYS};
use idfd::dataset::{gen_sphere_mixture, load_dataset, save_dataset, DataFormat, Dataset};
use idfd::error::IdfdError;
use idfd::experiment::{run_experiment, sweep, SweepParameter};
use idfd::kmeans::{kmeans, DEFAULT_RESTARTS};
use idfd::linalg::{l2_normalize_rows, Matrix};
use idfd::metrics::{feature_correlation, score, MetricsReport, Partition};
use idfd::rng::SeededRng;
use idfd::spectral::spectral_cluster;
use idfd::temperature::{concentration_profile, temperature_table, write_profiles_csv, write_table_csv};

const CONFIG_ERROR: u8 = 2;
const RUNTIME_ERROR: u8 = 3;

/// Keys handled by dedicated flags.
const SPECIAL_KEYS: &[&str] = &["seed", "out_dir"];

fn run_args(cmd: Command) -> Command {
    let mut cmd = cmd
        .arg(
            Arg::new("seed")
                .long("seed")
                .required(true)
                .value_parser(value_parser!(u64))
                .help("Seed for data generation, initialization and shuffling"),
        )
        .arg(
            Arg::new("config")
                .long("config")
                .short('c')
                .value_parser(value_parser!(PathBuf))
                .help("key = value configuration file"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .short('o')
                .value_parser(value_parser!(PathBuf))
                .help("Output directory (overrides out_dir)"),
        )
        .arg(
            Arg::new("set")
                .long("set")
                .action(ArgAction::Append)
                .value_name("KEY=VALUE")
                .help("Extra assignment, applied after the file and flags"),
        );
    for key in KEYS.iter().filter(|k| !SPECIAL_KEYS.contains(k)) {
        cmd = cmd.arg(
            Arg::new(*key)
                .long(*key)
                .value_name("VALUE")
                .allow_negative_numbers(true)
                .help_heading("Configuration keys"),
        );
    }
    cmd
}

fn cli() -> Command {
    Command::new("idfd")
        .about("Instance discrimination with feature decorrelation: experiments and analysis")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(
            Command::new("gen")
                .about("Generate a synthetic sphere-mixture dataset")
                .arg(Arg::new("out").long("out").short('o').required(true).value_parser(value_parser!(PathBuf)))
                .arg(Arg::new("k").long("k").default_value("4").value_parser(value_parser!(usize)))
                .arg(Arg::new("n").long("n").default_value("400").value_parser(value_parser!(usize)))
                .arg(Arg::new("dim").long("dim").default_value("32").value_parser(value_parser!(usize)))
                .arg(Arg::new("separation").long("separation").default_value("0").value_parser(value_parser!(f64)))
                .arg(Arg::new("noise").long("noise").default_value("0.35").value_parser(value_parser!(f64)))
                .arg(Arg::new("seed").long("seed").default_value("0").value_parser(value_parser!(u64)))
                .arg(
                    Arg::new("image")
                        .long("image")
                        .value_name("HxWxC")
                        .help("Write the image container; samples are squashed into [0, 1] and reshaped, dim = H·W·C"),
                ),
        )
        .subcommand(run_args(Command::new("train").about("Train one run and write its reports")))
        .subcommand(
            run_args(Command::new("sweep").about("One run per value of tau, tau2 or alpha"))
                .arg(Arg::new("param").long("param").required(true).value_parser(["tau", "tau2", "alpha"]))
                .arg(
                    Arg::new("values")
                        .long("values")
                        .required(true)
                        .value_delimiter(',')
                        .value_parser(value_parser!(f64)),
                ),
        )
        .subcommand(
            Command::new("analyze")
                .about("Uniform vs compact circle losses over temperatures, plus exp(cos θ/τ) profiles")
                .arg(Arg::new("n").long("n").default_value("3600").value_parser(value_parser!(usize)))
                .arg(Arg::new("k").long("k").default_value("10").value_parser(value_parser!(usize)))
                .arg(
                    Arg::new("taus")
                        .long("taus")
                        .default_value("0.07,0.2,0.5,1,2,5,10")
                        .value_delimiter(',')
                        .value_parser(value_parser!(f64)),
                )
                .arg(Arg::new("grid").long("grid").default_value("361").value_parser(value_parser!(usize)))
                .arg(Arg::new("out").long("out").short('o').value_parser(value_parser!(PathBuf))),
        )
        .subcommand(
            Command::new("eval")
                .about("Cluster saved representations and score them against labels")
                .arg(Arg::new("embeddings").required(true).value_parser(value_parser!(PathBuf)))
                .arg(Arg::new("k").long("k").value_parser(value_parser!(usize)))
                .arg(Arg::new("seed").long("seed").default_value("0").value_parser(value_parser!(u64)))
                .arg(
                    Arg::new("restarts")
                        .long("restarts")
                        .default_value(DEFAULT_RESTARTS.to_string())
                        .value_parser(value_parser!(usize)),
                )
                .arg(
                    Arg::new("spectral")
                        .long("spectral")
                        .value_name("TAU")
                        .value_parser(value_parser!(f64))
                        .help("Use spectral clustering with this temperature instead of k-means"),
                )
                .arg(Arg::new("out").long("out").short('o').value_parser(value_parser!(PathBuf))),
        )
}

fn resolve_config(m: &ArgMatches) -> Result<RunConfig, IdfdError> {
    let seed = *m.get_one::<u64>("seed").expect("required");
    let mut cfg = match m.get_one::<PathBuf>("config") {
        Some(path) => RunConfig::load(path, seed)?,
        None => RunConfig::new(seed),
    };
    for key in KEYS.iter().filter(|k| !SPECIAL_KEYS.contains(k)) {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    for assignment in m.get_many::<String>("set").into_iter().flatten() {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| IdfdError::Config(format!("--set expects KEY=VALUE, got {assignment:?}")))?;
        cfg.set(k.trim(), v)?;
    }
    cfg.train.seed = seed;
    if let Some(out) = m.get_one::<PathBuf>("out") {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_image_shape(text: &str) -> Result<SampleShape, IdfdError> {
    let dims: Vec<usize> = text
        .split('x')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| IdfdError::Config(format!("--image expects HxWxC, got {text:?}")))?;
    match dims[..] {
        [height, width, channels] if height * width * channels > 0 => Ok(SampleShape::Image {
            height,
            width,
            channels,
        }),
        _ => Err(IdfdError::Config(format!("--image expects HxWxC, got {text:?}"))),
    }
}

fn cmd_gen(m: &ArgMatches) -> Result<(), IdfdError> {
    let out = m.get_one::<PathBuf>("out").expect("required");
    let k = *m.get_one::<usize>("k").expect("default");
    let n = *m.get_one::<usize>("n").expect("default");
    let separation = *m.get_one::<f64>("separation").expect("default");
    let noise = *m.get_one::<f64>("noise").expect("default");
    let mut rng = SeededRng::new(*m.get_one::<u64>("seed").expect("default"));
    let image = m.get_one::<String>("image").map(|s| parse_image_shape(s)).transpose()?;
    let dim = match image {
        Some(shape) => shape.len(),
        None => *m.get_one::<usize>("dim").expect("default"),
    };
    let mut ds = gen_sphere_mixture(k, n, dim, separation, noise, &mut rng)
        .map_err(|e| match e {
            IdfdError::DomainError(msg) => IdfdError::Config(msg),
            other => other,
        })?;
    let format = match image {
        Some(shape) => {
            let pixels = ds.samples.as_slice().iter().map(|&v| 1.0 / (1.0 + (-2.0 * v).exp())).collect();
            ds = Dataset::new(Matrix::new(n, dim, pixels)?, shape, ds.labels.take(), ds.name.clone())?;
            DataFormat::Image
        }
        None => DataFormat::Csv,
    };
    save_dataset(&ds, out, format)?;
    println!("wrote {} samples ({} clusters, {} values each) to {}", ds.len(), k, dim, out.display());
    Ok(())
}

fn print_report_line(label: &str, r: &idfd::experiment::RunReport) {
    let acc = r.final_scores.map_or("n/a".to_string(), |s| format!("{:.4}", s.acc));
    let nmi = r.final_scores.map_or("n/a".to_string(), |s| format!("{:.4}", s.nmi));
    let ari = r.final_scores.map_or("n/a".to_string(), |s| format!("{:.4}", s.ari));
    println!(
        "{label} mode={} acc={acc} nmi={nmi} ari={ari} feature_corr={:.4} hash={}",
        r.mode,
        r.mean_abs_feature_correlation,
        &r.config_hash[..12]
    );
}

fn cmd_train(m: &ArgMatches) -> Result<(), IdfdError> {
    let cfg = resolve_config(m)?;
    let report = run_experiment(&cfg)?;
    print_report_line(&format!("run {}:", cfg.out_dir.display()), &report);
    Ok(())
}

fn cmd_sweep(m: &ArgMatches) -> Result<(), IdfdError> {
    let cfg = resolve_config(m)?;
    let param: SweepParameter = m.get_one::<String>("param").expect("required").parse()?;
    let values: Vec<f64> = m.get_many::<f64>("values").expect("required").copied().collect();
    let report = sweep(&cfg, param, &values)?;
    for row in &report.rows {
        print_report_line(&format!("{}={}:", param.key(), row.value), &row.report);
    }
    println!("wrote {}", cfg.out_dir.join("sweep.csv").display());
    Ok(())
}

fn cmd_analyze(m: &ArgMatches) -> Result<(), IdfdError> {
    let n = *m.get_one::<usize>("n").expect("default");
    let k = *m.get_one::<usize>("k").expect("default");
    let taus: Vec<f64> = m.get_many::<f64>("taus").expect("default").copied().collect();
    let grid = *m.get_one::<usize>("grid").expect("default");
    let table = temperature_table(n, k, &taus).map_err(as_config)?;
    let profiles = taus
        .iter()
        .map(|&t| concentration_profile(t, grid))
        .collect::<Result<Vec<_>, _>>()
        .map_err(as_config)?;
    println!("{:>8} {:>14} {:>14} {:>12} {:>12}", "tau", "uniform", "compact", "gap", "flatness");
    for (row, p) in table.iter().zip(&profiles) {
        println!(
            "{:>8} {:>14.8} {:>14.8} {:>12.4e} {:>12.4e}",
            row.tau, row.uniform, row.compact, row.gap, p.flatness
        );
    }
    if let Some(out) = m.get_one::<PathBuf>("out") {
        std::fs::create_dir_all(out)?;
        write_table_csv(&table, &out.join("temperature.csv"))?;
        write_profiles_csv(&profiles, &out.join("profiles.csv"))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn as_config(e: IdfdError) -> IdfdError {
    match e {
        IdfdError::DomainError(msg) => IdfdError::Config(msg),
        IdfdError::DivisibilityError { n, k } => IdfdError::Config(format!("n = {n} is not divisible by k = {k}")),
        other => other,
    }
}

fn cmd_eval(m: &ArgMatches) -> Result<(), IdfdError> {
    let path = m.get_one::<PathBuf>("embeddings").expect("required");
    let ds = load_dataset(path, DataFormat::Csv)?;
    let labels = ds
        .labels
        .as_deref()
        .ok_or_else(|| IdfdError::Config(format!("{} has no label column", path.display())))?;
    let truth = Partition::from_labels(labels)?;
    let k = m.get_one::<usize>("k").copied().or(ds.k_true()).expect("labelled");
    if k == 0 || k > ds.len() {
        return Err(IdfdError::Config(format!("cannot form {k} clusters from {} samples", ds.len())));
    }
    let seed = *m.get_one::<u64>("seed").expect("default");
    let restarts = *m.get_one::<usize>("restarts").expect("default");
    let mut rng = SeededRng::new(seed);
    let predicted = match m.get_one::<f64>("spectral") {
        Some(&tau) => spectral_cluster(&l2_normalize_rows(&ds.samples)?, tau, k, &mut rng, restarts)?,
        None => kmeans(&ds.samples, k, &mut rng, restarts)?.partition,
    };
    let report = MetricsReport::new(score(&truth, &predicted)?, k, ds.len(), seed);
    let corr = feature_correlation(&ds.samples)?.mean_abs_off_diagonal();
    let json = serde_json_report(&report, corr)?;
    println!("{json}");
    if let Some(out) = m.get_one::<PathBuf>("out") {
        write_text(out, &(json + "\n"))?;
    }
    Ok(())
}

fn serde_json_report(report: &MetricsReport, corr: f64) -> Result<String, IdfdError> {
    let mut value = serde_json::to_value(report)?;
    value["mean_abs_feature_correlation"] = corr.into();
    Ok(serde_json::to_string_pretty(&value)?)
}

fn write_text(path: &Path, text: &str) -> Result<(), IdfdError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(CONFIG_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match matches.subcommand() {
        Some(("gen", m)) => cmd_gen(m),
        Some(("train", m)) => cmd_train(m),
        Some(("sweep", m)) => cmd_sweep(m),
        Some(("analyze", m)) => cmd_analyze(m),
        Some(("eval", m)) => cmd_eval(m),
        _ => unreachable!("subcommand is required"),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ IdfdError::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(CONFIG_ERROR)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(RUNTIME_ERROR)
        }
    }
}

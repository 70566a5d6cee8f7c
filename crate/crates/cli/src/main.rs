use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;

use ldago::classifier::Classifier;
use ldago::csvio::{read_dataset, read_matrix, write_atomic, write_dataset};
use ldago::data::Standardized;
use ldago::diagnostics::diagnose;
use ldago::gradcheck::{finite_difference_gradient, relative_error};
use ldago::harness::{
    emit_reports, run_bench, summary_markdown, BenchPlan, Method, DESK_N_TEST, DESK_REPLICATES,
    FULL_N_TEST, FULL_REPLICATES,
};
use ldago::losses::{
    ce_gradient, ce_loss, nll_loss_and_gradient, oas_shrinkage, pooled_within_covariance,
    CovarianceRepr, ShrunkCovariance,
};
use ldago::model_file;
use ldago::rng::seeded;
use ldago::simgen::{sample_setting, SimulationSpec, SETTING_IDS};
use ldago::trainer::{fit, FitConfig, LossChoice};

/// Low-rank discriminant analysis with data-routed training.
#[derive(Parser, Debug)]
#[command(name = "ldago", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw train/test CSVs for one simulation setting.
    Simulate(SimulateArgs),
    /// Train a model on a labeled CSV and save it.
    Fit(FitArgs),
    /// Predict labels for a CSV with a saved model.
    Predict(PredictArgs),
    /// Run the Monte Carlo benchmark and write table2.csv, diagnostics.csv, summary.md.
    Bench(BenchArgs),
    /// Print the routing diagnostics (sparsity r, kurtosis gap) for a labeled CSV.
    Diagnose(DiagnoseArgs),
    /// Compare analytic loss gradients with central finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Setting id, A1 through E4.
    #[arg(long, value_parser = parse_setting)]
    setting: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output paths as TRAIN,TEST.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    out: Vec<PathBuf>,
    /// Override the setting's training size.
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    n_test: usize,
    /// Manifest JSON path (default: TRAIN with extension .manifest.json).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Omit the header row.
    #[arg(long)]
    no_header: bool,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Key-value file overriding training defaults (keys are FitConfig field names).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Rank of L (default min(20, p)).
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    grad_tol: Option<f64>,
    /// Force a training path instead of routing by diagnostics.
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    /// Seed for the initialization noise.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LossArg {
    Auto,
    Ce,
    Nll,
}

impl ConfigArgs {
    fn build(&self) -> Result<FitConfig> {
        let mut cfg = FitConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            cfg.apply_kv(&text, &path.display().to_string())?;
        }
        if self.d.is_some() {
            cfg.d = self.d;
        }
        if let Some(v) = self.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.grad_tol {
            cfg.grad_tol = v;
        }
        if let Some(v) = self.loss {
            cfg.loss_override = match v {
                LossArg::Auto => LossChoice::Auto,
                LossArg::Ce => LossChoice::Ce,
                LossArg::Nll => LossChoice::Nll,
            };
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Labeled training CSV (last column is the integer label).
    #[arg(long)]
    train: PathBuf,
    /// Where to write the model file.
    #[arg(long)]
    model: PathBuf,
    /// Optional JSON fit report.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    no_header: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Input CSV of features.
    #[arg(long)]
    input: PathBuf,
    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// The input's last column is a label: drop it and report the error rate.
    #[arg(long)]
    labeled: bool,
    /// Also write one discriminant score column per class.
    #[arg(long)]
    scores: bool,
    #[arg(long)]
    no_header: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Comma-separated setting ids (default: all 20).
    #[arg(long, value_delimiter = ',', value_parser = parse_setting)]
    settings: Vec<String>,
    /// Comma-separated methods: LDAGO, LDA, LW_LDA, NB (default: all).
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    methods: Vec<Method>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    /// 20 replicates and n_test = 10000 instead of the desk-scale 5 / 2000.
    #[arg(long)]
    paper_scale: bool,
    /// Base seed for all replicate streams.
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    /// Output directory.
    #[arg(long, default_value = "bench_out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    no_header: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 8)]
    p: usize,
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 40)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    /// Relative error above which the check fails.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
}

fn parse_setting(s: &str) -> std::result::Result<String, String> {
    SimulationSpec::by_id(s)
        .map(|spec| spec.id)
        .map_err(|_| format!("unknown setting {s:?}; expected one of {}", SETTING_IDS.join(",")))
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let [train_path, test_path] = args.out.as_slice() else {
        bail!("--out expects TRAIN,TEST");
    };
    let mut spec = SimulationSpec::by_id(&args.setting)?.with_n_test(args.n_test);
    if let Some(n) = args.n_train {
        spec = spec.with_n_train(n);
    }
    let sample = sample_setting(&spec, args.seed)?;
    write_dataset(train_path, &sample.train, !args.no_header)?;
    write_dataset(test_path, &sample.test, !args.no_header)?;
    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| train_path.with_extension("manifest.json"));
    let json = serde_json::to_vec_pretty(&sample.manifest())?;
    write_atomic(&manifest_path, &json)?;
    eprintln!(
        "{}: p = {}, n_train = {}, n_test = {}; wrote {}, {}, {}",
        spec.id,
        spec.p,
        spec.n_train,
        spec.n_test,
        train_path.display(),
        test_path.display(),
        manifest_path.display()
    );
    Ok(())
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let config = args.config.build()?;
    let data = read_dataset(&args.train, !args.no_header)?;
    let (model, report) = fit(&data, &config)?;
    model_file::save(&model, &args.model)?;
    if let Some(path) = &args.report {
        write_atomic(path, &serde_json::to_vec_pretty(&report)?)?;
    }
    let train_error = model.error_rate(&data)?;
    println!("loss_path {}", report.loss_path);
    println!("sparsity_r {}", report.diagnostics.sparsity);
    println!("kurtosis_gap {}", report.diagnostics.kurtosis_gap);
    println!("iterations {}", report.iterations_run);
    println!("final_loss {}", report.final_loss);
    println!("final_grad_norm {}", report.final_grad_norm);
    println!("train_error {train_error}");
    Ok(())
}

fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let model = model_file::load(&args.model)?;
    let (x, truth): (Array2<f64>, Option<Vec<i64>>) = if args.labeled {
        let data = read_dataset(&args.input, !args.no_header)?;
        (data.features().to_owned(), Some(data.raw_labels()))
    } else {
        (read_matrix(&args.input, !args.no_header)?, None)
    };
    let scores = model.scores(x.view())?;
    let labels = model.predict(x.view())?;
    let mut out = String::from("label");
    if args.scores {
        for l in model.label_table() {
            out.push_str(&format!(",score_{l}"));
        }
    }
    out.push('\n');
    for (i, l) in labels.iter().enumerate() {
        out.push_str(&l.to_string());
        if args.scores {
            for v in scores.row(i) {
                out.push_str(&format!(",{v:?}"));
            }
        }
        out.push('\n');
    }
    match &args.out {
        Some(path) => write_atomic(path, out.as_bytes())?,
        None => print!("{out}"),
    }
    if let Some(truth) = truth {
        let wrong = labels.iter().zip(&truth).filter(|(a, b)| a != b).count();
        eprintln!("error_rate {}", wrong as f64 / truth.len() as f64);
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let (default_reps, default_n_test) = if args.paper_scale {
        (FULL_REPLICATES, FULL_N_TEST)
    } else {
        (DESK_REPLICATES, DESK_N_TEST)
    };
    let settings = if args.settings.is_empty() {
        SETTING_IDS.iter().map(|s| s.to_string()).collect()
    } else {
        args.settings.clone()
    };
    let methods = if args.methods.is_empty() {
        Method::ALL.to_vec()
    } else {
        args.methods.clone()
    };
    let plan = BenchPlan {
        settings,
        replicates: args.replicates.unwrap_or(default_reps),
        n_test: args.n_test.unwrap_or(default_n_test),
        methods,
        base_seed: args.base_seed,
        fit_config: args.config.build()?,
    };
    let result = match args.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()?
            .install(|| run_bench(&plan))?,
        None => run_bench(&plan)?,
    };
    let files = emit_reports(&result, &args.out)?;
    print!("{}", summary_markdown(&result));
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_diagnose(args: &DiagnoseArgs) -> Result<()> {
    let config = args.config.build()?;
    let data = read_dataset(&args.train, !args.no_header)?;
    let std = Standardized::from_dataset(&data)?;
    let d = diagnose(&std, &config.thresholds());
    println!("n {}", data.n());
    println!("p {}", data.p());
    println!("classes {}", data.n_classes());
    println!("effective_dimension {}", d.d_eff);
    println!("sparsity_r {}", d.sparsity);
    println!("kurtosis_gap {}", d.kurtosis_gap);
    println!("selected_loss {}", d.selected_loss);
    Ok(())
}

fn cmd_gradcheck(args: &GradcheckArgs) -> Result<()> {
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    if args.d > args.p || args.k < 2 || args.n <= args.k {
        bail!("need d <= p, k >= 2 and n > k");
    }
    let mut rng = seeded(args.seed);
    let mut normal = |rows: usize, cols: usize| {
        Array2::from_shape_simple_fn((rows, cols), || rng.sample::<f64, _>(StandardNormal))
    };
    let x = normal(args.n, args.p);
    let means = normal(args.k, args.p);
    let l = normal(args.p, args.d) * 0.5;
    let labels: Vec<usize> = (0..args.n).map(|i| i % args.k).collect();
    let priors = ndarray::Array1::from_elem(args.k, 1.0 / args.k as f64);

    let (_, ws) = ce_loss(l.view(), x.view(), means.view(), priors.view(), &labels)?;
    let ce_analytic = ce_gradient(&ws, l.view(), x.view(), means.view())?;
    let ce_fd = finite_difference_gradient(
        |m| Ok(ce_loss(m, x.view(), means.view(), priors.view(), &labels)?.0),
        l.view(),
        args.step,
    )?;
    let ce_err = relative_error(ce_analytic.view(), ce_fd.view(), 1e-12);

    let cov = pooled_within_covariance(x.view(), means.view(), &labels, CovarianceRepr::Auto)?;
    let oas = oas_shrinkage(&cov, args.n);
    let shrunk = ShrunkCovariance::new(cov, &oas);
    let (_, nll_analytic) = nll_loss_and_gradient(l.view(), &shrunk, oas.sigma2)?;
    let nll_fd = finite_difference_gradient(
        |m| Ok(nll_loss_and_gradient(m, &shrunk, oas.sigma2)?.0),
        l.view(),
        args.step,
    )?;
    let nll_err = relative_error(nll_analytic.view(), nll_fd.view(), 1e-12);

    println!("ce_relative_error {ce_err:e}");
    println!("nll_relative_error {nll_err:e}");
    if ce_err > args.tol || nll_err > args.tol {
        bail!("gradient mismatch above tolerance {}", args.tol);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

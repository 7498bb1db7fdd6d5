use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use treelasso::diagnostics::{irrepresentability, support_and_signs, IrrepReport};
use treelasso::io::{
    cp_table_csv, effect_report_csv, export_dot, parse_effect_report_csv, read_data_csv, read_tree,
    standardize, tree_to_csv, tree_to_json, write_output, EffectMode, RunManifest,
};
use treelasso::selection::{
    effect_report, estimate_sigma, select_model, GridSpec, PenaltyFamily, SigmaEstimate,
    TuningResult, DEFAULT_ALPHA_GRID, DEFAULT_L1_GRID,
};
use treelasso::simulation::{generate_data, run_study, scenario, ReplicationConfig};
use treelasso::solvers::{stack_penalty, Problem, SolverSettings};
use treelasso::tree::{compositional_adjacency, make_binary_tree, Tree};
use treelasso::{Error, Result};

#[derive(Parser)]
#[command(
    name = "treelasso",
    version,
    about = "Tree-structured penalized regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a binary tree, or canonicalize an existing edge list.
    GenTree(GenTreeArgs),
    /// Tune and fit on a data set; writes effects, Cp table, fit JSON and DOT.
    Fit(FitArgs),
    /// Run a replication study from a JSON config.
    Simulate(SimulateArgs),
    /// Irrepresentability at the true (scenario) or fitted (data) support.
    Diagnose(DiagnoseArgs),
    /// Render an effect report as a Graphviz digraph.
    ExportDot(ExportDotArgs),
}

#[derive(Args)]
struct GenTreeArgs {
    #[arg(long, conflicts_with = "tree")]
    levels: Option<usize>,
    /// Existing edge list to rewrite in canonical form.
    #[arg(long)]
    tree: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    weight: f64,
    #[arg(long)]
    json: bool,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum PenaltyArg {
    R1,
    R,
    Lasso,
    En,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    tree: PathBuf,
    #[arg(long, default_value = "y")]
    response: String,
    #[arg(long, value_enum, default_value_t = PenaltyArg::R)]
    penalty: PenaltyArg,
    #[arg(long, value_delimiter = ',')]
    alpha_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    l1_grid: Option<Vec<f64>>,
    /// Known noise standard deviation; estimated when absent.
    #[arg(long)]
    sigma: Option<f64>,
    /// Replace edge weights by child-to-parent standard deviation ratios.
    #[arg(long)]
    compositional: bool,
    /// Fit on the raw scale instead of standardized predictors.
    #[arg(long)]
    raw: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    grid_points: usize,
    #[arg(long, default_value_t = 1e-4)]
    min_ratio: f64,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Use the true support of a registered scenario on generated data.
    #[arg(long, conflicts_with_all = ["data", "tree"])]
    scenario: Option<String>,
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Mixing weight of the penalty rows `[D; alpha I]` for scenario mode.
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    tree: Option<PathBuf>,
    #[arg(long, default_value = "y")]
    response: String,
    #[arg(long, value_enum, default_value_t = PenaltyArg::R)]
    penalty: PenaltyArg,
    #[arg(long, value_delimiter = ',')]
    alpha_grid: Option<Vec<f64>>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    compositional: bool,
    #[arg(long)]
    raw: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Direct,
    Total,
}

#[derive(Args)]
struct ExportDotArgs {
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    effects: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Total)]
    mode: ModeArg,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn gen_tree(args: &GenTreeArgs) -> Result<()> {
    let tree = match (&args.tree, args.levels) {
        (Some(path), _) => read_tree(path, None)?,
        (None, Some(levels)) => make_binary_tree(levels, args.weight)?,
        (None, None) => return Err(Error::InvalidConfig("give --levels or --tree".into())),
    };
    let text = if args.json {
        tree_to_json(&tree)
    } else {
        tree_to_csv(&tree)
    };
    emit(args.out.as_deref(), &text)
}

fn family(
    penalty: PenaltyArg,
    alpha_grid: Option<&[f64]>,
    l1_grid: Option<&[f64]>,
) -> PenaltyFamily {
    match penalty {
        PenaltyArg::R1 => PenaltyFamily::total_effect(),
        PenaltyArg::R => PenaltyFamily::Tree {
            alpha_grid: alpha_grid
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| DEFAULT_ALPHA_GRID.to_vec()),
        },
        PenaltyArg::Lasso => PenaltyFamily::Lasso,
        PenaltyArg::En => PenaltyFamily::ElasticNet {
            l1_grid: l1_grid
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| DEFAULT_L1_GRID.to_vec()),
        },
    }
}

struct Prepared {
    tree: Tree,
    labels: Vec<String>,
    problem: Problem,
    means: Vec<f64>,
    scales: Vec<f64>,
    y_mean: f64,
}

fn prepare(
    data: &Path,
    tree_path: &Path,
    response: &str,
    compositional: bool,
    raw: bool,
) -> Result<Prepared> {
    let table = read_data_csv(data)?;
    let labels = table.predictors(response)?;
    let mut tree = read_tree(tree_path, Some(&labels))?;
    let (x, y) = table.design(response, &tree)?;
    let (means, sds) = treelasso::selection::column_moments(&x);
    if compositional {
        tree = compositional_adjacency(&tree, &sds)?;
    }
    let y_mean = y.mean();
    let y = y.add_scalar(-y_mean);
    let (x, means, scales) = if raw {
        let centered = treelasso::linalg::center_columns(&x);
        (centered, means, vec![1.0; sds.len()])
    } else {
        standardize(&x)?
    };
    Ok(Prepared {
        labels: tree.labels().to_vec(),
        tree,
        problem: Problem::new(x, y)?,
        means,
        scales,
        y_mean,
    })
}

#[derive(Serialize)]
struct FitDocument<'a> {
    penalty: PenaltyArg,
    labels: &'a [String],
    standardized: bool,
    column_means: &'a [f64],
    column_scales: &'a [f64],
    response_mean: f64,
    sigma: &'a SigmaEstimate,
    tuning: &'a TuningResult,
    irrepresentability: Option<PlugIn>,
}

#[derive(Serialize)]
struct PlugIn {
    caveat: &'static str,
    report: IrrepReport,
}

const PLUG_IN_CAVEAT: &str =
    "plug-in: support and signs taken from the fitted model, not ground truth";

fn tune(
    prep: &Prepared,
    fam: &PenaltyFamily,
    sigma: Option<f64>,
    seed: u64,
    grid: &GridSpec,
) -> Result<(SigmaEstimate, TuningResult)> {
    let settings = SolverSettings::default();
    let d = prep.tree.influence();
    let sigma_d = matches!(fam, PenaltyFamily::Tree { .. }).then_some(&d);
    let est = estimate_sigma(
        &prep.problem,
        sigma_d,
        sigma.map(|s| s * s),
        seed,
        &settings,
    )?;
    if let Some(w) = &est.warning {
        eprintln!("warning: {w}");
    }
    let tuned = select_model(&prep.problem, Some(&d), fam, grid, est.sigma2, &settings)?;
    Ok((est, tuned))
}

fn plug_in(prep: &Prepared, tuned: &TuningResult, fam: &PenaltyFamily) -> Result<Option<PlugIn>> {
    let penalty = match fam {
        PenaltyFamily::Tree { .. } => stack_penalty(&prep.tree.influence(), tuned.best_alpha)?,
        _ => treelasso::solvers::StackedPenalty::identity(prep.problem.p()),
    };
    let (support, signs) = support_and_signs(
        penalty.matrix(),
        &tuned.fit.beta_hat,
        SolverSettings::default().active_tol,
    );
    if support.is_empty() {
        return Ok(None);
    }
    Ok(Some(PlugIn {
        caveat: PLUG_IN_CAVEAT,
        report: irrepresentability(prep.problem.x(), penalty.matrix(), &support, &signs)?,
    }))
}

fn fit(args: &FitArgs) -> Result<()> {
    let m = &args.model;
    let config = serde_json::json!({
        "penalty": m.penalty, "alpha_grid": m.alpha_grid, "l1_grid": m.l1_grid, "sigma": m.sigma,
        "compositional": m.compositional, "raw": m.raw, "grid_points": m.grid_points,
        "min_ratio": m.min_ratio, "response": m.response,
    })
    .to_string();
    let mut manifest = RunManifest::start("fit", &config, Some(m.seed));
    manifest.add_input(&m.data)?;
    manifest.add_input(&m.tree)?;
    let prep = prepare(&m.data, &m.tree, &m.response, m.compositional, m.raw)?;
    let fam = family(m.penalty, m.alpha_grid.as_deref(), m.l1_grid.as_deref());
    let grid = GridSpec {
        points: m.grid_points,
        min_ratio: m.min_ratio,
    };
    let (est, tuned) = tune(&prep, &fam, m.sigma, m.seed, &grid)?;
    let report = effect_report(
        &prep.tree,
        &prep.tree.influence(),
        &tuned.fit.beta_hat,
        SolverSettings::default().active_tol,
    )?;
    let doc = FitDocument {
        penalty: m.penalty,
        labels: &prep.labels,
        standardized: !m.raw,
        column_means: &prep.means,
        column_scales: &prep.scales,
        response_mean: prep.y_mean,
        sigma: &est,
        tuning: &tuned,
        irrepresentability: plug_in(&prep, &tuned, &fam)?,
    };
    let outputs = [
        ("effects.csv", effect_report_csv(&report)),
        ("cp_table.csv", cp_table_csv(&tuned.cp_table)),
        ("fit.json", serde_json::to_string_pretty(&doc)? + "\n"),
        (
            "effects_total.dot",
            export_dot(&prep.tree, &report, EffectMode::Total),
        ),
        (
            "effects_direct.dot",
            export_dot(&prep.tree, &report, EffectMode::Direct),
        ),
        ("tree.csv", tree_to_csv(&prep.tree)),
    ];
    for (name, text) in outputs {
        manifest.add_output(&write_output(&args.out, name, &text)?);
    }
    manifest.finish(&args.out)?;
    println!(
        "alpha={} lambda={:.6e} cp={:.6e} converged={}",
        tuned.best_alpha,
        tuned.best_lambda,
        tuned.best_cp(),
        tuned.fit.converged
    );
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)?;
    let config: ReplicationConfig =
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut manifest = RunManifest::start("simulate", &text, Some(config.seed));
    manifest.add_input(&args.config)?;
    let report = run_study(&config, &SolverSettings::default())?;
    std::fs::create_dir_all(&args.out)?;
    let path = args.out.join("report.csv");
    report.write_csv(config.n, std::fs::File::create(&path)?)?;
    manifest.add_output(&path);
    manifest.finish(&args.out)?;
    for r in &report.rows {
        if r.failures > 0 {
            eprintln!(
                "warning: {} {}: {} replications failed",
                r.scenario,
                r.method.as_str(),
                r.failures
            );
        }
    }
    println!("{}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct Diagnosis {
    source: String,
    caveat: Option<&'static str>,
    report: IrrepReport,
}

fn diagnose(args: &DiagnoseArgs) -> Result<()> {
    let diagnosis = if let Some(name) = &args.scenario {
        let sc = scenario(name)?;
        let (x, _) = generate_data(&sc.tree, &sc.beta_star, args.n, 1.0, None, args.seed)?;
        let penalty = stack_penalty(&sc.tree.influence(), args.alpha)?;
        let (support, signs) = support_and_signs(penalty.matrix(), &sc.beta_star, 0.0);
        Diagnosis {
            source: format!(
                "scenario {name}, n={}, seed={}, alpha={}",
                args.n, args.seed, args.alpha
            ),
            caveat: None,
            report: irrepresentability(&x, penalty.matrix(), &support, &signs)?,
        }
    } else {
        let (Some(data), Some(tree)) = (&args.data, &args.tree) else {
            return Err(Error::InvalidConfig(
                "give --scenario or both --data and --tree".into(),
            ));
        };
        let prep = prepare(data, tree, &args.response, args.compositional, args.raw)?;
        let fam = family(args.penalty, args.alpha_grid.as_deref(), None);
        let (_, tuned) = tune(&prep, &fam, args.sigma, args.seed, &GridSpec::default())?;
        let plug = plug_in(&prep, &tuned, &fam)?.ok_or(Error::EmptySupport)?;
        Diagnosis {
            source: format!(
                "fitted model, alpha={}, lambda={:e}",
                tuned.best_alpha, tuned.best_lambda
            ),
            caveat: Some(plug.caveat),
            report: plug.report,
        }
    };
    emit(
        args.out.as_deref(),
        &(serde_json::to_string_pretty(&diagnosis)? + "\n"),
    )
}

fn export(args: &ExportDotArgs) -> Result<()> {
    let tree = read_tree(&args.tree, None)?;
    let text = std::fs::read_to_string(&args.effects)?;
    let report = parse_effect_report_csv(&text, &args.effects, &tree, args.tol)?;
    let mode = match args.mode {
        ModeArg::Direct => EffectMode::Direct,
        ModeArg::Total => EffectMode::Total,
    };
    emit(args.out.as_deref(), &export_dot(&tree, &report, mode))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenTree(a) => gen_tree(a),
        Command::Fit(a) => fit(a),
        Command::Simulate(a) => simulate(a),
        Command::Diagnose(a) => diagnose(a),
        Command::ExportDot(a) => export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

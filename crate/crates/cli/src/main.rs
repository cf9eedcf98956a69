//! Command-line front end: reproduces the benchmark experiments and runs the
//! detectors on a single type vector.

mod config;

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use unlabeled_detect::detectors::{glrt, labeled_llr, ulr, DetectorOutput, PathSearch};
use unlabeled_detect::exponents::{self, CurveTable, DEFAULT_GRID_POINTS};
use unlabeled_detect::montecarlo::{self, DetectorKind, ExponentReport, ThresholdRule};
use unlabeled_detect::probability::{average_pmf, Hypothesis, TypeVector};
use unlabeled_detect::trellis::build_loglik;
use unlabeled_detect::{assignment::AuctionConfig, Error};

use config::{parse_usize_list, CommonArgs, ExperimentConfig};

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const ROC_REPORT_TYPE1: f64 = 0.1;

#[derive(Parser, Debug)]
#[command(name = "unlabeled-detect", version, about = "Detection with unlabeled discrete observations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo ROC curves, one CSV per detector
    Roc {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Unlabeled, labeled and averaged-iid exponent curves on an alpha grid
    ExponentCurve {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of geometric grid points between alpha*/1000 and 1.2 alpha*
        #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
        points: usize,
    },
    /// Empirical error exponents over several sample sizes
    EmpiricalExponents {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        rule: RuleArgs,
        /// Comma-separated sample sizes
        #[arg(long, default_value = "50,100,250,500")]
        n_list: String,
    },
    /// Median run time per detector, normalized to ULR
    Bench {
        #[command(flatten)]
        common: CommonArgs,
        /// Timed repetitions per hypothesis
        #[arg(long, default_value_t = 200)]
        reps: usize,
    },
    /// Run detectors on one observation block and print JSON
    Detect {
        #[command(flatten)]
        common: CommonArgs,
        /// Type vector as comma-separated counts, e.g. 2,1,2
        #[arg(long = "type", value_name = "COUNTS", conflicts_with = "symbols")]
        type_counts: Option<String>,
        /// Labeled observations as comma-separated 1-based symbols
        #[arg(long, value_name = "SYMBOLS")]
        symbols: Option<String>,
    },
}

#[derive(Args, Debug)]
#[group(multiple = false)]
struct RuleArgs {
    /// Fixed type-I error probability for the threshold
    #[arg(long)]
    type1_target: Option<f64>,
    /// Type-I exponent: the threshold aims at type-I error exp(-n * value) [default: 0.01]
    #[arg(long)]
    type1_exponent: Option<f64>,
}

impl RuleArgs {
    fn rule(&self) -> ThresholdRule {
        match (self.type1_target, self.type1_exponent) {
            (Some(p), _) => ThresholdRule::TypeOneTarget(p),
            (None, Some(a)) => ThresholdRule::TypeOneExponent(a),
            (None, None) => ThresholdRule::TypeOneExponent(0.01),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// Numeric failures of the solvers exit with 3, everything else with 2.
fn exit_code(err: &anyhow::Error) -> u8 {
    let numeric = err.chain().any(|e| e.downcast_ref::<Error>().is_some_and(Error::is_numeric));
    if numeric {
        EXIT_NUMERIC
    } else {
        EXIT_USAGE
    }
}

fn run(cli: Cli) -> Result<()> {
    let (common, default_detectors) = match &cli.command {
        Command::Roc { common } => (common, "ulr,detA,detB,auction"),
        Command::ExponentCurve { common, .. } => (common, "ulr"),
        Command::EmpiricalExponents { common, .. } => (common, "ulr,detB"),
        Command::Bench { common, .. } => (common, "ulr,detB,detA,auction"),
        Command::Detect { common, .. } => (common, "detB"),
    };
    let cfg = ExperimentConfig::resolve(common, default_detectors)?;
    let pool = {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = cfg.threads {
            builder = builder.num_threads(t);
        }
        builder.build().context("cannot start the worker pool")?
    };
    pool.install(|| match &cli.command {
        Command::Roc { .. } => run_roc(&cfg),
        Command::ExponentCurve { points, .. } => run_exponent_curve(&cfg, *points),
        Command::EmpiricalExponents { rule, n_list, .. } => {
            run_empirical_exponents(&cfg, rule.rule(), &parse_usize_list("n-list", n_list)?)
        }
        Command::Bench { reps, .. } => run_bench(&cfg, *reps),
        Command::Detect { type_counts, symbols, .. } => run_detect(&cfg, type_counts.as_deref(), symbols.as_deref()),
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn run_roc(cfg: &ExperimentConfig) -> Result<()> {
    let model = cfg.model_at(cfg.n)?;
    let curves = montecarlo::roc_all(&model, cfg.n, &cfg.detector_kinds, cfg.runs, cfg.seed)?;
    cfg.ensure_out_dir()?;
    let metadata = cfg.metadata(&[]);
    let stem = format!("roc_{}_m{}_n{}", cfg.experiment, cfg.m, cfg.n);
    let mut plot_lines = Vec::new();
    println!("{:<10} {:>10} {:>10} {:>23}", "detector", "type1", "type2", "type2 95% CI");
    for curve in &curves {
        let name = format!("{stem}_{}.csv", curve.detector);
        write(&cfg.out_file(&name), &curve.to_csv(&metadata))?;
        let p = curve.point_near(ROC_REPORT_TYPE1);
        println!(
            "{:<10} {:>10.4} {:>10.4}   [{:.4}, {:.4}]{}",
            curve.detector.id(),
            p.type1,
            p.type2,
            p.type2_ci.0,
            p.type2_ci.1,
            if curve.degenerate { "  (constant statistic)" } else { "" }
        );
        plot_lines.push(format!("'{name}' using 2:3 with steps title '{}'", curve.detector));
    }
    if cfg.gnuplot {
        let script = format!(
            "set datafile separator ','\nset key autotitle columnhead\nset logscale xy\n\
             set xlabel 'type I error'\nset ylabel 'type II error'\nplot {}\n",
            plot_lines.join(", \\\n     ")
        );
        write(&cfg.out_file(&format!("{stem}.gp")), &script)?;
    }
    Ok(())
}

fn run_exponent_curve(cfg: &ExperimentConfig, points: usize) -> Result<()> {
    if points < 2 {
        return Err(Error::Config(format!("points: at least 2 are required, got {points}")).into());
    }
    let model = cfg.model_at(cfg.n)?;
    let alpha_star = exponents::unlabeled_zero_crossing(&model)?;
    let grid = exponents::default_alpha_grid(alpha_star, points);
    let table = CurveTable::compute(&model, Some(&grid))?;
    cfg.ensure_out_dir()?;
    let metadata = cfg.metadata(&[("points", points.to_string())]);
    let mut csv: String = metadata.iter().map(|(k, v)| format!("# {k}: {v}\n")).collect();
    csv.push_str(&format!("# omega at alpha=0: {:.11e}\n# alpha star: {:.11e}\n", table.unlabeled.omega_at_zero, alpha_star));
    csv.push_str(&table.to_csv());
    let stem = format!("exponent_curve_{}_m{}", cfg.experiment, cfg.m);
    write(&cfg.out_file(&format!("{stem}.csv")), &csv)?;
    println!("omega(0) = {:.6}", table.unlabeled.omega_at_zero);
    println!("omega_lab(0) = {:.6}", table.labeled.omega_at_zero);
    println!("alpha* = {alpha_star:.6}");
    if cfg.gnuplot {
        let script = format!(
            "set datafile separator ','\nset key autotitle columnhead\n\
             set xlabel 'alpha'\nset ylabel 'exponent'\n\
             plot '{stem}.csv' using 1:2 with lines, '' using 1:3 with lines, '' using 1:4 with lines\n"
        );
        write(&cfg.out_file(&format!("{stem}.gp")), &script)?;
    }
    Ok(())
}

fn run_empirical_exponents(cfg: &ExperimentConfig, rule: ThresholdRule, n_list: &[usize]) -> Result<()> {
    cfg.ensure_out_dir()?;
    let n_text = n_list.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
    let metadata = cfg.metadata(&[("n list", n_text), ("threshold rule", rule.to_string())]);
    println!("{:<10} {:>6} {:>12} {:>12} {:>12}", "detector", "n", "alpha_hat", "omega_hat", "Omega(alpha)");
    let mut plot_lines = Vec::new();
    let stem = format!("exponents_{}_m{}", cfg.experiment, cfg.m);
    for &kind in &cfg.detector_kinds {
        let mut merged = ExponentReport {
            detector: kind,
            rule,
            runs: cfg.runs,
            seed: cfg.seed,
            estimates: Vec::new(),
            dropped: Vec::new(),
        };
        for &n in n_list {
            let model = cfg.model_at(n)?;
            let report = montecarlo::empirical_exponents(&model, &[n], kind, rule, cfg.runs, cfg.seed)?;
            for e in &report.estimates {
                let omega = exponents::omega_unlabeled(e.minus_log_p0_err_over_n, &model)?;
                println!(
                    "{:<10} {:>6} {:>12.6} {:>12.6} {:>12.6}",
                    kind.id(),
                    n,
                    e.minus_log_p0_err_over_n,
                    e.minus_log_p1_err_over_n,
                    omega
                );
            }
            for (n, why) in &report.dropped {
                eprintln!("warning: {kind} at n={n} dropped: {why}");
            }
            merged.estimates.extend(report.estimates);
            merged.dropped.extend(report.dropped);
        }
        let name = format!("{stem}_{kind}.csv");
        write(&cfg.out_file(&name), &merged.to_csv(&metadata))?;
        plot_lines.push(format!("'{name}' using 9:10 with linespoints title '{kind}'"));
    }
    if cfg.gnuplot {
        let script = format!(
            "set datafile separator ','\nset xlabel '-log P0(H1)/n'\nset ylabel '-log P1(H0)/n'\nplot {}\n",
            plot_lines.join(", \\\n     ")
        );
        write(&cfg.out_file(&format!("{stem}.gp")), &script)?;
    }
    Ok(())
}

fn run_bench(cfg: &ExperimentConfig, reps: usize) -> Result<()> {
    let model = cfg.model_at(cfg.n)?;
    let table = montecarlo::bench(&model, cfg.n, &cfg.detector_kinds, reps, cfg.seed)?;
    cfg.ensure_out_dir()?;
    let metadata = cfg.metadata(&[("reps", reps.to_string())]);
    write(&cfg.out_file(&format!("bench_{}_m{}_n{}.csv", cfg.experiment, cfg.m, cfg.n)), &table.to_csv(&metadata))?;
    println!("{:<10} {:>14} {:>14}", "detector", "H0 / ULR", "H1 / ULR");
    let mut kinds: Vec<DetectorKind> = Vec::new();
    for row in &table.rows {
        if !kinds.contains(&row.detector) {
            kinds.push(row.detector);
        }
    }
    for kind in kinds {
        let h0 = table.normalized(kind, Hypothesis::H0).unwrap_or(f64::NAN);
        let h1 = table.normalized(kind, Hypothesis::H1).unwrap_or(f64::NAN);
        println!("{:<10} {:>14.1} {:>14.1}", kind.id(), h0, h1);
    }
    Ok(())
}

fn parse_counts(text: &str, what: &str) -> Result<Vec<usize>> {
    parse_usize_list(what, text)
}

fn run_detect(cfg: &ExperimentConfig, type_counts: Option<&str>, symbols: Option<&str>) -> Result<()> {
    let m = cfg.m;
    let (t, labeled) = match (type_counts, symbols) {
        (Some(text), None) => {
            let counts = parse_counts(text, "type")?;
            if counts.len() != m {
                return Err(Error::Config(format!("type: expected {m} counts, got {}", counts.len())).into());
            }
            (TypeVector::from_counts(counts), None)
        }
        (None, Some(text)) => {
            let x = parse_counts(text, "symbols")?;
            let t = TypeVector::from_one_based(&x, m)?;
            (t, Some(x.iter().map(|s| s - 1).collect::<Vec<usize>>()))
        }
        _ => return Err(Error::Config("detect needs exactly one of --type or --symbols".into()).into()),
    };
    let n = t.n();
    if n == 0 {
        return Err(Error::Config("type: at least one observation is required".into()).into());
    }
    let model = cfg.model_at(n)?;
    let u = build_loglik(&model, Hypothesis::H1, n)?;
    let v = build_loglik(&model, Hypothesis::H0, n)?;
    let mut results = Vec::new();
    for &kind in &cfg.detector_kinds {
        let out: DetectorOutput = match kind {
            DetectorKind::Ulr => ulr(
                &t,
                &average_pmf(model.classes(Hypothesis::H1))?,
                &average_pmf(model.classes(Hypothesis::H0))?,
            )?,
            DetectorKind::Labeled => {
                let x = labeled.as_ref().ok_or_else(|| {
                    Error::Config("detectors: the labeled detector needs --symbols".into())
                })?;
                DetectorOutput { statistic: labeled_llr(x, &u, &v), path_h1: None, path_h0: None }
            }
            DetectorKind::DetectorA => glrt(&t, &u, &v, &PathSearch::DetectorA)?,
            DetectorKind::DetectorB => glrt(&t, &u, &v, &PathSearch::DetectorB)?,
            DetectorKind::Auction => glrt(&t, &u, &v, &PathSearch::Auction(AuctionConfig::for_alphabet(m)))?,
            DetectorKind::Hungarian => glrt(&t, &u, &v, &PathSearch::Hungarian)?,
        };
        let mut value: serde_json::Value = serde_json::from_str(&out.to_json())?;
        value["detector"] = json!(kind.id());
        results.push(value);
    }
    let doc = if results.len() == 1 { results.remove(0) } else { serde_json::Value::Array(results) };
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use markov_bernstein::bound_algebra::{rate_alpha, rate_alpha_inv, tail_envelope, tail_envelope_classic};
use markov_bernstein::chain_models::BirthDeathFamily;
use markov_bernstein::diffusion::{ou_lambda_quadratic, ou_sigma2};
use markov_bernstein::model_spec::{Model, ModelSpec};
use markov_bernstein::observable::ObservableSpec;
use markov_bernstein::report::{
    build_ledger, fmt_f64, ldp_report_csv, parse_inputs, tail_report_csv, tail_report_json, tail_report_rows, to_csv,
    to_table, RunManifest, TAIL_CSV_HEADER,
};
use markov_bernstein::simulation::{empirical_ldp_rate, validate_bound, IntervalMethod, McConfig};
use markov_bernstein::spectral::{
    asymptotic_variance_with, at_n_and_2n, build_generator, poisson_solve_explicit, schrodinger_top_eig,
    spectral_gap, PoissonSolver,
};
use markov_bernstein::{BernsteinParams, Error, Result};

/// Exit code when a validation run contains a failing row.
const EXIT_VALIDATION_FAILED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "mbern", version, about = "Bernstein-type concentration bounds for Markov time averages")]
struct Cli {
    /// Worker threads for Monte Carlo runs (default: MBERN_THREADS, else all cores).
    #[arg(long, global = true, env = "MBERN_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rate function, its inverse and tail envelopes over grids.
    Bound(BoundArgs),
    /// Ledger of M-constants for a model and observable.
    Constants(ConstantsArgs),
    /// Monte Carlo tail estimates against the Bernstein envelope.
    Validate(ValidateArgs),
    /// Spectral gap, Schrodinger eigenvalues, asymptotic variance, Poisson solution.
    Spectral(SpectralArgs),
    /// Empirical large-deviation rates over a time grid.
    Ldp(LdpArgs),
    /// Re-run the command recorded in a manifest.
    Rerun {
        manifest: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct Output {
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Write to this file (plus `<file>.manifest.json`) instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[arg(long)]
    sigma2: f64,
    #[arg(long)]
    m: f64,
    #[arg(long, default_value_t = 1.0)]
    prefactor: f64,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    t_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    r_grid: Vec<f64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// JSON model file.
    #[arg(long)]
    model: PathBuf,
    /// Observable: n, x, n^2, poly:c0,c1,..., table:v0,..., min:K:<inner>, or JSON.
    #[arg(long, default_value = "n")]
    observable: String,
}

#[derive(Args, Debug)]
struct ConstantsArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// key=value constants, e.g. c_ls=1 kappa_c=2.
    #[arg(long, num_args = 0.., value_delimiter = ' ')]
    inputs: Vec<String>,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Ci {
    Wilson,
    ClopperPearson,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, conflicts_with = "auto_sigma2")]
    sigma2: Option<f64>,
    /// Use the model's computed asymptotic variance.
    #[arg(long)]
    auto_sigma2: bool,
    #[arg(long, conflicts_with = "route")]
    m: Option<f64>,
    /// Take M from this ledger route (e.g. sharp, mminf_growth).
    #[arg(long)]
    route: Option<String>,
    #[arg(long, num_args = 0.., value_delimiter = ' ')]
    inputs: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    t_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    r_grid: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Ci::Wilson)]
    ci: Ci,
    /// Time mesh for diffusions.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SpectralArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Truncation override for chains.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5")]
    s_grid: Vec<f64>,
    /// Write the Poisson solution G(n) as CSV here.
    #[arg(long)]
    poisson_dump: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct LdpArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    r: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    t_grid: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_model(path: &Path) -> Result<(ModelSpec, Model, serde_json::Value)> {
    let text = std::fs::read_to_string(path)?;
    let spec = ModelSpec::from_json(&text)?;
    let model = spec.build()?;
    let value = serde_json::from_str(&text)?;
    Ok((spec, model, value))
}

/// Print or write `text`; files get a manifest alongside.
fn emit(text: &str, out: Option<&Path>, manifest: &RunManifest) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            manifest.write(&RunManifest::path_for(path))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn render(format: Format, header: &[&str], rows: &[Vec<String>], json: serde_json::Value) -> Result<String> {
    Ok(match format {
        Format::Table => to_table(header, rows),
        Format::Csv => to_csv(header, rows)?,
        Format::Json => serde_json::to_string_pretty(&json)? + "\n",
    })
}

fn cmd_bound(a: &BoundArgs, argv: &[String]) -> Result<u8> {
    let params = BernsteinParams::new(a.sigma2, a.m, a.prefactor)?;
    let header = ["t", "r", "alpha", "alpha_inv", "envelope", "envelope_classic"];
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for &t in &a.t_grid {
        for &r in &a.r_grid {
            let alpha = rate_alpha(&params, r)?;
            let inv = rate_alpha_inv(&params, r)?;
            let env = tail_envelope(&params, t, r)?;
            let classic = tail_envelope_classic(&params, t, r)?;
            rows.push(vec![fmt_f64(t), fmt_f64(r), fmt_f64(alpha), fmt_f64(inv), fmt_f64(env), fmt_f64(classic)]);
            records.push(json!({"t": t, "r": r, "alpha": alpha, "alpha_inv": inv, "envelope": env, "envelope_classic": classic}));
        }
    }
    let text = render(a.output.format, &header, &rows, json!({"params": params, "rows": records}))?;
    let manifest = RunManifest::new("bound", argv.to_vec(), None, json!({"params": params, "t_grid": a.t_grid, "r_grid": a.r_grid}), None);
    emit(&text, a.output.out.as_deref(), &manifest)?;
    Ok(0)
}

fn cmd_constants(a: &ConstantsArgs, argv: &[String]) -> Result<u8> {
    let (_, model, model_json) = load_model(&a.model.model)?;
    let g = ObservableSpec::parse(&a.model.observable)?;
    let inputs = parse_inputs(&a.inputs)?;
    let ledger = build_ledger(&model, &g, &inputs)?;
    let text = match a.output.format {
        Format::Table => ledger.to_table(),
        Format::Csv => ledger.to_csv()?,
        Format::Json => serde_json::to_string_pretty(&ledger)? + "\n",
    };
    let manifest = RunManifest::new("constants", argv.to_vec(), Some(model_json), json!({"observable": g, "inputs": inputs}), None);
    emit(&text, a.output.out.as_deref(), &manifest)?;
    Ok(0)
}

fn cmd_validate(a: &ValidateArgs, argv: &[String]) -> Result<u8> {
    let (_, model, model_json) = load_model(&a.model.model)?;
    let g_spec = ObservableSpec::parse(&a.model.observable)?;
    let g = model.center(&g_spec.build())?;
    let inputs: BTreeMap<String, f64> = parse_inputs(&a.inputs)?;
    let need_ledger = a.auto_sigma2 || a.route.is_some();
    let ledger = if need_ledger { Some(build_ledger(&model, &g_spec, &inputs)?) } else { None };

    let sigma2 = match (a.sigma2, &ledger) {
        (Some(s), _) => s,
        (None, Some(l)) if a.auto_sigma2 => l
            .sigma2
            .map(|s| s.value)
            .ok_or_else(|| Error::Capability("no computed sigma2 for this model; pass --sigma2".into()))?,
        _ => return Err(Error::Spec("give --sigma2 or --auto-sigma2".into())),
    };
    let (m, route, constant) = match (a.m, &a.route, &ledger) {
        (Some(m), _, _) => (m, "input".to_string(), None),
        (None, Some(name), Some(l)) => {
            let entry = l
                .entries
                .iter()
                .find(|e| e.route == *name)
                .ok_or_else(|| Error::Spec(format!("route '{name}' is not in the ledger for this model")))?;
            let c = entry
                .constant
                .clone()
                .ok_or_else(|| Error::RouteInapplicable(format!("{name} needs: {}", entry.needs.join(", "))))?;
            (c.value, name.clone(), Some(c))
        }
        _ => return Err(Error::Spec("give --m or --route".into())),
    };
    let params = BernsteinParams::stationary(sigma2, m)?;
    let method = match a.ci {
        Ci::Wilson => IntervalMethod::Wilson,
        Ci::ClopperPearson => IntervalMethod::ClopperPearson,
    };
    let mut mc = McConfig::new(a.paths, a.seed).with_method(method);
    if let Some(dt) = a.dt {
        mc = mc.with_dt(dt);
    }
    let process = model.process()?;
    let report = validate_bound(&process, &g, &params, &route, &a.t_grid, &a.r_grid, &mc)?;
    let text = match a.format {
        Format::Csv => tail_report_csv(&report)?,
        Format::Json => tail_report_json(&report, constant.as_ref())? + "\n",
        Format::Table => to_table(&TAIL_CSV_HEADER, &tail_report_rows(&report)),
    };
    let manifest = RunManifest::new(
        "validate",
        argv.to_vec(),
        Some(model_json),
        json!({"observable": g_spec, "sigma2": sigma2, "m": m, "route": route, "t_grid": a.t_grid,
               "r_grid": a.r_grid, "paths": a.paths, "ci": format!("{:?}", a.ci), "dt": a.dt}),
        Some(a.seed),
    );
    emit(&text, a.out.as_deref(), &manifest)?;
    Ok(if report.any_fail() { EXIT_VALIDATION_FAILED } else { 0 })
}

fn cmd_spectral(a: &SpectralArgs, argv: &[String]) -> Result<u8> {
    let (_, model, model_json) = load_model(&a.model.model)?;
    let g_spec = ObservableSpec::parse(&a.model.observable)?;
    let header = ["quantity", "value", "reference", "note"];
    let mut rows: Vec<Vec<String>> = Vec::new();
    match &model {
        Model::BirthDeath { spec, measure } => {
            let n = a.n.unwrap_or(measure.truncation);
            let mu = markov_bernstein::chain_models::invariant_measure(spec, n)?;
            let gen = build_generator(spec, n)?;
            let g = model_center_at(&mu, &g_spec);
            let gap = at_n_and_2n(n, |k| Ok(spectral_gap(&build_generator(spec, k)?)?.lambda_1))?;
            let mm_lambda = match spec.family {
                BirthDeathFamily::MmInfinity { lambda } => Some(lambda),
                _ => None,
            };
            let affine_slope = g_spec.polynomial_coeffs().filter(|c| c.len() <= 2).map(|c| c.get(1).copied().unwrap_or(0.0));
            rows.push(vec![
                "lambda_1".into(),
                fmt_f64(gap.value),
                mm_lambda.map(|_| "1".to_string()).unwrap_or_default(),
                format!("N={n}; |N vs 2N| = {:e}", gap.difference),
            ]);
            let s_exp = asymptotic_variance_with(spec, &gen, &g, PoissonSolver::Explicit)?;
            let s_spec = asymptotic_variance_with(spec, &gen, &g, PoissonSolver::Spectral)?;
            let sigma_ref = match (mm_lambda, affine_slope) {
                (Some(l), Some(s)) => fmt_f64(2.0 * l * s * s),
                _ => String::new(),
            };
            rows.push(vec!["sigma2 (explicit)".into(), fmt_f64(s_exp), sigma_ref.clone(), String::new()]);
            rows.push(vec!["sigma2 (spectral)".into(), fmt_f64(s_spec), sigma_ref, String::new()]);
            for &s in &a.s_grid {
                let lam = schrodinger_top_eig(&gen, &g, s)?;
                let reference = match (mm_lambda, affine_slope) {
                    (Some(l), Some(k)) if s * k < 1.0 => fmt_f64(l * (s * k).powi(2) / (1.0 - s * k)),
                    _ => String::new(),
                };
                rows.push(vec![format!("Lambda({s} g)"), fmt_f64(lam), reference, String::new()]);
            }
            if let Some(path) = &a.poisson_dump {
                let big_g = poisson_solve_explicit(spec, &mu, &g)?;
                let dump: Vec<Vec<String>> =
                    big_g.values(n).iter().enumerate().map(|(k, v)| vec![k.to_string(), fmt_f64(*v)]).collect();
                std::fs::write(path, to_csv(&["n", "G"], &dump)?)?;
            }
        }
        Model::Ou(ou) => {
            let theta = ou.theta;
            rows.push(vec!["lambda_1".into(), fmt_f64(1.0 / theta), String::new(), "analytic".into()]);
            let c = g_spec.polynomial_coeffs().unwrap_or(&[]);
            if c.len() == 3 && c[1] == 0.0 && c[2] > 0.0 {
                rows.push(vec!["sigma2".into(), fmt_f64(ou_sigma2(theta) * c[2] * c[2]), String::new(), "analytic".into()]);
                for &s in &a.s_grid {
                    rows.push(vec![format!("Lambda({s} g)"), fmt_f64(ou_lambda_quadratic(s * c[2], theta)), String::new(), "analytic".into()]);
                }
            }
        }
        Model::Potential(_) => {
            return Err(Error::Capability("spectral quantities are available for chains and OU".into()));
        }
    }
    let json_rows: Vec<_> = rows.iter().map(|r| json!({"quantity": r[0], "value": r[1], "reference": r[2], "note": r[3]})).collect();
    let text = render(a.output.format, &header, &rows, json!(json_rows))?;
    let manifest = RunManifest::new("spectral", argv.to_vec(), Some(model_json), json!({"observable": g_spec, "n": a.n, "s_grid": a.s_grid}), None);
    emit(&text, a.output.out.as_deref(), &manifest)?;
    Ok(0)
}

fn model_center_at(mu: &markov_bernstein::StationaryMeasure, g: &ObservableSpec) -> markov_bernstein::Observable {
    markov_bernstein::chain_models::center_observable(&g.build(), mu)
}

fn cmd_ldp(a: &LdpArgs, argv: &[String]) -> Result<u8> {
    let (_, model, model_json) = load_model(&a.model.model)?;
    let g_spec = ObservableSpec::parse(&a.model.observable)?;
    let g = model.center(&g_spec.build())?;
    let report = empirical_ldp_rate(&model.process()?, &g, a.r, &a.t_grid, &McConfig::new(a.paths, a.seed))?;
    let manifest = RunManifest::new(
        "ldp",
        argv.to_vec(),
        Some(model_json),
        json!({"observable": g_spec, "r": a.r, "t_grid": a.t_grid, "paths": a.paths}),
        Some(a.seed),
    );
    emit(&ldp_report_csv(&report)?, a.out.as_deref(), &manifest)?;
    if !report.dropped.is_empty() {
        eprintln!("no hits at t = {:?}; rows dropped", report.dropped);
    }
    Ok(0)
}

fn run(cli: Cli, argv: Vec<String>) -> Result<u8> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::Spec("--threads must be >= 1".into()));
        }
        // a second initialization (rerun) keeps the existing pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match &cli.command {
        Command::Bound(a) => cmd_bound(a, &argv),
        Command::Constants(a) => cmd_constants(a, &argv),
        Command::Validate(a) => cmd_validate(a, &argv),
        Command::Spectral(a) => cmd_spectral(a, &argv),
        Command::Ldp(a) => cmd_ldp(a, &argv),
        Command::Rerun { manifest } => {
            let m = RunManifest::read(manifest)?;
            if m.command == "rerun" {
                return Err(Error::Spec("manifest records a rerun".into()));
            }
            let replay = std::iter::once("mbern".to_string()).chain(m.args.iter().cloned());
            let cli = Cli::try_parse_from(replay).map_err(|e| Error::Spec(format!("manifest arguments: {e}")))?;
            run(cli, m.args)
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    match run(cli, argv) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

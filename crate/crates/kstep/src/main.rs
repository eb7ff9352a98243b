//! Command-line interface: simulate populations, fit the model, diagnose
//! chains, and report posterior summaries.
//!
//! Every subcommand that writes files also writes a `manifest.json` next
//! to its outputs recording input hashes, the seed, and the effective
//! configuration, so any run can be reproduced byte-identically.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kstep::analysis::{self, classify, covariate_regression, geweke_z, kde, summarize};
use kstep::data::{
    self, join_covariates, load_dataset, parse_config_file, Manifest, ResponseDataset,
};
use kstep::error::{Error, Result};
use kstep::game::play_game;
use kstep::sampler::{self, PosteriorSamples, SamplerConfig};
use kstep::simulate::{
    gen_population, gen_responses, save_truth, BeliefGen, PopulationSpec,
};
use kstep::svg;

#[derive(Parser)]
#[command(
    name = "kstep",
    version,
    about = "Simulation and Bayesian estimation of k-step thinking in p-beauty contests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with ground-truth labels.
    Simulate(SimulateArgs),
    /// Fit the hierarchical model by MCMC and write posterior samples.
    Fit(FitArgs),
    /// Convergence diagnostics: Geweke table, trace and density figures.
    Diagnose(DiagnoseArgs),
    /// Posterior summary JSON, per-player table, and figures.
    Report(ReportArgs),
    /// Per-player compatibility classification table.
    Classify(ClassifyArgs),
    /// Resolve one beauty contest.
    Play(PlayArgs),
    /// Regress per-player compliance on covariates.
    Regress(RegressArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Population spec: "default" or a key=value config file.
    #[arg(long, default_value = "default")]
    spec: String,
    /// Master seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of subjects (overrides the config file).
    #[arg(long)]
    n: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "sim_out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Long-format dataset CSV (subject_id, p, response).
    #[arg(long)]
    data: PathBuf,
    /// Optional key=value config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Retained samples per chain.
    #[arg(long)]
    samples: Option<usize>,
    /// Burn-in sweeps per chain.
    #[arg(long)]
    burnin: Option<usize>,
    /// Thinning interval.
    #[arg(long)]
    thin: Option<usize>,
    /// Number of chains.
    #[arg(long)]
    chains: Option<usize>,
    /// Random-walk step scale on the unconstrained parameters.
    #[arg(long)]
    step_scale: Option<f64>,
    /// Adapt the step scale during burn-in.
    #[arg(long)]
    adapt: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "fit_out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Posterior samples CSV from `fit`.
    #[arg(long)]
    samples: PathBuf,
    #[arg(long, default_value = "diag_out")]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    samples: PathBuf,
    /// Dataset the samples were fitted to (for data overlays).
    #[arg(long)]
    data: PathBuf,
    /// How many per-player strategy-band figures to write.
    #[arg(long, default_value_t = 6)]
    figures: usize,
    #[arg(long, default_value = "report_out")]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    samples: PathBuf,
    /// Optional output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PlayArgs {
    /// Comma-separated plays, e.g. 5,15,20,40,50.
    #[arg(long)]
    plays: String,
    /// Game parameter p.
    #[arg(long)]
    p: f64,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RegressArgs {
    /// Per-player CSV from `report` (needs a compliance column).
    #[arg(long)]
    players: PathBuf,
    /// Per-subject covariate CSV joined on subject_id.
    #[arg(long)]
    covariates: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Diagnose(args) => cmd_diagnose(args),
        Command::Report(args) => cmd_report(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Play(args) => cmd_play(args),
        Command::Regress(args) => cmd_regress(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn get<T: std::str::FromStr>(cfg: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    match cfg.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| Error::data(format!("config key {key}: cannot parse {v:?}"))),
    }
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::data(format!("cannot parse number {s:?}")))
        })
        .collect()
}

fn spec_from_config(cfg: &BTreeMap<String, String>) -> Result<PopulationSpec> {
    let mut spec = PopulationSpec::default();
    if let Some(n) = get(cfg, "n")? {
        spec.n = n;
    }
    if let Some(seed) = get(cfg, "seed")? {
        spec.seed = seed;
    }
    let mut w = spec.weights;
    if let Some(v) = get(cfg, "weight_kstep")? {
        w.kstep = v;
    }
    if let Some(v) = get(cfg, "weight_constant_increment")? {
        w.constant_increment = v;
    }
    if let Some(v) = get(cfg, "weight_uniform_random")? {
        w.uniform_random = v;
    }
    if let Some(v) = get(cfg, "weight_nonconvex_monotone")? {
        w.nonconvex_monotone = v;
    }
    spec.weights = w;
    if let Some(v) = get(cfg, "k_min")? {
        spec.k_range.0 = v;
    }
    if let Some(v) = get(cfg, "k_max")? {
        spec.k_range.1 = v;
    }
    if let Some(v) = get(cfg, "mu0_min")? {
        spec.mu0_range.0 = v;
    }
    if let Some(v) = get(cfg, "mu0_max")? {
        spec.mu0_range.1 = v;
    }
    if let Some(v) = get(cfg, "ci_base")? {
        spec.ci_base = v;
    }
    if let Some(v) = get(cfg, "ci_step")? {
        spec.ci_step = v;
    }
    if let Some(text) = cfg.get("belief_gen") {
        spec.belief_gen = match text.as_str() {
            "level_k" => BeliefGen::LevelK,
            "random_dirichlet" => BeliefGen::RandomDirichlet,
            other => {
                if let Some(tau) = other.strip_prefix("ch_poisson:") {
                    BeliefGen::ChPoisson {
                        tau: tau.parse().map_err(|_| {
                            Error::data(format!("belief_gen: bad tau in {other:?}"))
                        })?,
                    }
                } else {
                    return Err(Error::data(format!(
                        "belief_gen must be level_k, random_dirichlet or ch_poisson:<tau>, got {other:?}"
                    )));
                }
            }
        };
    }
    if let Some(text) = cfg.get("noise_weights") {
        let v = parse_list(text)?;
        if v.len() != 5 {
            return Err(Error::data("noise_weights needs exactly 5 values"));
        }
        spec.noise_weights = [v[0], v[1], v[2], v[3], v[4]];
    }
    if let Some(text) = cfg.get("p_grid") {
        spec.p_grid = parse_list(text)?;
    }
    Ok(spec)
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let cfg = if args.spec == "default" {
        BTreeMap::new()
    } else {
        parse_config_file(Path::new(&args.spec))?
    };
    let mut spec = spec_from_config(&cfg)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(n) = args.n {
        spec.n = n;
    }
    std::fs::create_dir_all(&args.out_dir)?;

    let population = gen_population(&spec)?;
    let (obs, truth) = gen_responses(&population, &spec)?;

    let data_path = args.out_dir.join("dataset.csv");
    let truth_path = args.out_dir.join("truth.csv");
    let mut dataset = String::from("subject_id,p,response\n");
    for (id, p, y) in &obs {
        dataset.push_str(&format!(
            "{id},{},{}\n",
            data::format_num(*p),
            data::format_num(*y)
        ));
    }
    std::fs::write(&data_path, dataset)?;
    save_truth(&truth, &truth_path)?;

    let mut manifest = Manifest::new("simulate", Some(spec.seed));
    manifest.set_config("spec", serde_json::to_string(&spec)?);
    manifest.add_output(&data_path);
    manifest.add_output(&truth_path);
    manifest.save(&args.out_dir.join("manifest.json"))?;

    let compliant = truth.iter().filter(|t| t.compliant).count();
    println!(
        "wrote {} observations for {} subjects ({} compliant ground truth) to {}",
        obs.len(),
        spec.n,
        compliant,
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => parse_config_file(path)?,
        None => BTreeMap::new(),
    };
    let mut config = SamplerConfig::default();
    if let Some(v) = get(&cfg, "samples")? {
        config.n_samples = v;
    }
    if let Some(v) = get(&cfg, "burnin")? {
        config.n_burnin = v;
    }
    if let Some(v) = get(&cfg, "thin")? {
        config.thin = v;
    }
    if let Some(v) = get(&cfg, "chains")? {
        config.n_chains = v;
    }
    if let Some(v) = get(&cfg, "step_scale")? {
        config.step_scale = v;
    }
    if let Some(v) = get(&cfg, "seed")? {
        config.seed = v;
    }
    if let Some(v) = get(&cfg, "adapt")? {
        config.adapt = v;
    }
    if let Some(v) = args.samples {
        config.n_samples = v;
    }
    if let Some(v) = args.burnin {
        config.n_burnin = v;
    }
    if let Some(v) = args.thin {
        config.thin = v;
    }
    if let Some(v) = args.chains {
        config.n_chains = v;
    }
    if let Some(v) = args.step_scale {
        config.step_scale = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if args.adapt {
        config.adapt = true;
    }

    let dataset = load_dataset(&args.data)?;
    if dataset.n_clamped > 0 {
        eprintln!(
            "note: {} boundary responses clamped into [0.5, 99.5]",
            dataset.n_clamped
        );
    }
    std::fs::create_dir_all(&args.out_dir)?;
    let players = dataset.player_data();
    let samples = sampler::run(&players, &config)?;

    let samples_path = args.out_dir.join("samples.csv");
    samples.save_csv(&samples_path)?;
    let ids_path = args.out_dir.join("subjects.csv");
    std::fs::write(
        &ids_path,
        format!("index,subject_id\n{}", {
            let mut s = String::new();
            for (i, id) in samples.player_ids.iter().enumerate() {
                s.push_str(&format!("{},{}\n", i + 1, id));
            }
            s
        }),
    )?;

    let mut manifest = Manifest::new("fit", Some(config.seed));
    manifest.add_input(&args.data)?;
    manifest.set_config("samples", config.n_samples);
    manifest.set_config("burnin", config.n_burnin);
    manifest.set_config("thin", config.thin);
    manifest.set_config("chains", config.n_chains);
    manifest.set_config("step_scale", config.step_scale);
    manifest.set_config("adapt", config.adapt);
    manifest.add_output(&samples_path);
    manifest.add_output(&ids_path);
    manifest.save(&args.out_dir.join("manifest.json"))?;

    println!(
        "retained {} draws across {} chains for {} subjects; acceptance rates {:?}",
        samples.draws.len(),
        config.n_chains,
        samples.n_players(),
        samples
            .accept_rates
            .iter()
            .map(|r| (r * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>()
    );
    Ok(())
}

const DIAG_PARAMS: [&str; 4] = ["rho", "q0", "q1", "rho_q0"];

fn cmd_diagnose(args: DiagnoseArgs) -> Result<()> {
    let samples = PosteriorSamples::load_csv(&args.samples)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let mut manifest = Manifest::new("diagnose", args.seed);
    manifest.add_input(&args.samples)?;

    let mut table = String::from("parameter,geweke_z\n");
    println!("parameter  geweke_z");
    for name in DIAG_PARAMS {
        let chain = samples
            .column(name)
            .ok_or_else(|| Error::data(format!("missing column {name}")))?;
        let z = match geweke_z(&chain, 0.1, 0.5) {
            Ok(z) => z,
            Err(e) => {
                eprintln!("warning: {name}: {e}");
                f64::NAN
            }
        };
        println!("{name:<9}  {z:+.3}");
        table.push_str(&format!("{name},{z}\n"));
        if z.abs() >= 3.0 {
            eprintln!("warning: |geweke z| >= 3 for {name}; inspect the trace");
        }

        let trace_path = args.out_dir.join(format!("trace_{name}.svg"));
        svg::save_svg(&svg::trace_svg(&format!("{name} trace"), &chain), &trace_path)?;
        manifest.add_output(&trace_path);

        let lo = chain.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = chain.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if lo < hi { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let grid: Vec<f64> = (0..=200)
            .map(|i| lo + (hi - lo) * i as f64 / 200.0)
            .collect();
        let dens = kde(&chain, &grid);
        let dens_path = args.out_dir.join(format!("density_{name}.svg"));
        svg::save_svg(
            &svg::density_svg(&format!("{name} density"), &grid, &dens),
            &dens_path,
        )?;
        manifest.add_output(&dens_path);
    }
    let table_path = args.out_dir.join("geweke.csv");
    std::fs::write(&table_path, table)?;
    manifest.add_output(&table_path);
    manifest.save(&args.out_dir.join("manifest.json"))?;
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let samples = PosteriorSamples::load_csv(&args.samples)?;
    let dataset = load_dataset(&args.data)?;
    if dataset.subjects.len() != samples.n_players() {
        return Err(Error::data(format!(
            "dataset has {} subjects but samples cover {} players",
            dataset.subjects.len(),
            samples.n_players()
        )));
    }
    std::fs::create_dir_all(&args.out_dir)?;
    let mut manifest = Manifest::new("report", args.seed);
    manifest.add_input(&args.samples)?;
    manifest.add_input(&args.data)?;

    let summary = summarize(&samples)?;
    let summary_path = args.out_dir.join("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")?;
    manifest.add_output(&summary_path);

    let players_path = args.out_dir.join("players.csv");
    std::fs::write(&players_path, player_table(&samples, &dataset)?)?;
    manifest.add_output(&players_path);

    let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    for i in 0..args.figures.min(samples.n_players()) {
        let report = analysis::strategy_band(&samples, i, &grid);
        let subject = &dataset.subjects[i];
        let figure = svg::band_svg(
            &format!("subject {} strategy", subject.id),
            &grid,
            &report.mean,
            &report.lower,
            &report.upper,
            &subject.unit_responses(),
        );
        let path = args.out_dir.join(format!("strategy_{}.svg", subject.id));
        svg::save_svg(&figure, &path)?;
        manifest.add_output(&path);
    }

    let n_compliant = classify(&samples).iter().filter(|(_, c)| *c).count();
    println!(
        "classified {}/{} subjects as k-step compatible; posterior mean rho*q0 = {:.3}",
        n_compliant,
        samples.n_players(),
        summary.params["rho_q0"].mean
    );
    manifest.save(&args.out_dir.join("manifest.json"))?;
    Ok(())
}

fn player_table(samples: &PosteriorSamples, dataset: &ResponseDataset) -> Result<String> {
    let mut out = String::from(
        "subject_id,compliance,classified_compliant,mean_eta,mean_phi,mean_nu,mean_mu0,mean_s\n",
    );
    let n = samples.draws.len().max(1) as f64;
    for (i, (p, flag)) in classify(samples).iter().enumerate() {
        let mean = |f: &dyn Fn(&kstep::sampler::PlayerDraw) -> f64| {
            samples.draws.iter().map(|d| f(&d.players[i])).sum::<f64>() / n
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            dataset.subjects[i].id,
            p,
            *flag as u8,
            mean(&|pd| pd.eta),
            mean(&|pd| pd.phi),
            mean(&|pd| pd.nu),
            mean(&|pd| pd.mu0),
            mean(&|pd| pd.s),
        ));
    }
    Ok(out)
}

fn cmd_classify(args: ClassifyArgs) -> Result<()> {
    let samples = PosteriorSamples::load_csv(&args.samples)?;
    let mut out = String::from("player,compliance,classified_compliant\n");
    for (i, (p, flag)) in classify(&samples).iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", samples.player_ids[i], p, *flag as u8));
    }
    match &args.out {
        Some(path) => {
            std::fs::write(path, &out)?;
            let mut manifest = Manifest::new("classify", args.seed);
            manifest.add_input(&args.samples)?;
            manifest.add_output(path);
            let manifest_path = path.with_extension("manifest.json");
            manifest.save(&manifest_path)?;
        }
        None => print!("{out}"),
    }
    Ok(())
}

fn cmd_play(args: PlayArgs) -> Result<()> {
    let plays = parse_list(&args.plays)?;
    if !(0.0..=1.0).contains(&args.p) {
        return Err(Error::domain(format!("p must lie in [0,1], got {}", args.p)));
    }
    let outcome = play_game(&plays, args.p)?;
    let winners: Vec<String> = outcome.winners.iter().map(|&i| format!("{}", plays[i])).collect();
    println!("target {}", outcome.target);
    println!("winner play {}", winners.join(", "));
    Ok(())
}

fn cmd_regress(args: RegressArgs) -> Result<()> {
    // per-player table from `report`: subject_id + compliance column
    let mut rdr = csv::Reader::from_path(&args.players)
        .map_err(|e| Error::data(format!("cannot open {}: {e}", args.players.display())))?;
    let headers = rdr.headers()?.clone();
    let cid = headers
        .iter()
        .position(|h| h == "subject_id")
        .ok_or_else(|| Error::data("players file missing subject_id column"))?;
    let ccomp = headers
        .iter()
        .position(|h| h == "compliance")
        .ok_or_else(|| Error::data("players file missing compliance column"))?;
    let mut dataset = ResponseDataset::default();
    let mut compliance = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let id = rec.get(cid).unwrap_or("").to_string();
        let c: f64 = rec
            .get(ccomp)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::data(format!("bad compliance value for {id}")))?;
        dataset.subjects.push(kstep::data::SubjectData {
            id,
            responses: vec![],
            covariates: None,
        });
        compliance.push(c);
    }
    let joined = join_covariates(&mut dataset, &args.covariates)?;
    if joined < dataset.subjects.len() {
        return Err(Error::data(format!(
            "covariates missing for {} of {} subjects",
            dataset.subjects.len() - joined,
            dataset.subjects.len()
        )));
    }

    // response on a 0-100 point scale so coefficients read as points
    let y: Vec<f64> = compliance.iter().map(|c| 100.0 * c).collect();
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    let covs: Vec<&data::Covariates> = dataset
        .subjects
        .iter()
        .map(|s| s.covariates.as_ref().unwrap())
        .collect();
    let numeric = |name: &str, f: &dyn Fn(&data::Covariates) -> Option<f64>| -> Option<(String, Vec<f64>)> {
        let vals: Option<Vec<f64>> = covs.iter().map(|c| f(c)).collect();
        vals.map(|v| (name.to_string(), v))
    };
    for (name, f) in [
        ("age", (&|c: &data::Covariates| c.age) as &dyn Fn(&data::Covariates) -> Option<f64>),
        ("crt_pass", &|c| c.crt_pass),
        ("time_games_minutes", &|c| c.time_games_minutes),
        ("time_total_minutes", &|c| c.time_total_minutes),
    ] {
        if let Some(col) = numeric(name, f) {
            columns.push(col);
        }
    }
    // categorical covariates become dummy columns against the first level
    for (name, f) in [
        ("gender", (&|c: &data::Covariates| c.gender.clone()) as &dyn Fn(&data::Covariates) -> Option<String>),
        ("education", &|c| c.education.clone()),
    ] {
        let vals: Option<Vec<String>> = covs.iter().map(|c| f(c)).collect();
        let Some(vals) = vals else { continue };
        let mut levels: Vec<String> = vals.clone();
        levels.sort();
        levels.dedup();
        for level in levels.iter().skip(1) {
            columns.push((
                format!("{name}_{level}"),
                vals.iter().map(|v| (v == level) as u8 as f64).collect(),
            ));
        }
    }
    if columns.is_empty() {
        return Err(Error::data("no usable covariate columns found"));
    }

    let table = covariate_regression(&y, &columns)?;
    println!(
        "{:<24} {:>10} {:>10} {:>8} {:>10}",
        "coefficient", "estimate", "std_error", "t", "p_value"
    );
    for c in &table.coefficients {
        println!(
            "{:<24} {:>10.4} {:>10.4} {:>8.3} {:>10.5}",
            c.name, c.estimate, c.std_error, c.t_stat, c.p_value
        );
    }
    println!("residual df {}; R^2 {:.4}", table.residual_df, table.r_squared);
    Ok(())
}

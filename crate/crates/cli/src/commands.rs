use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{ArgGroup, Args, Parser, Subcommand};
use rand::Rng;
use riffle_core::learning::{
    em_fit_params, log_likelihood, structural_em, structure_search, EmConfig, EmTrace, RankingDataset,
    StructureConfig,
};
use riffle_core::model::{first_place_distribution, pairwise_marginal};
use riffle_core::rng::{seeded, task_stream};
use riffle_core::{condition_with_evidence, partial_ranking_probability, Hierarchy, ItemSet, PartialRanking};

use crate::ballots::{header_line, parse_ballots, parse_observation, ranking_line};
use crate::error::{read_input, write_output, CliError, CliResult};
use crate::model_file::{format_model, parse_model};

#[derive(Debug, Parser)]
#[command(name = "riffle", version, about = "Riffle-independent ranking models: fit, condition, sample, query")]
pub struct Cli {
    /// Worker threads for EM and structure search (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Largest table any hierarchy node may hold.
    #[arg(long, global = true, default_value_t = riffle_core::model::DEFAULT_TABLE_CAP)]
    pub table_cap: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a ballot file by exact EM.
    Fit(FitArgs),
    /// Condition a model on one observation.
    Condition(ConditionArgs),
    /// Draw full rankings from a model.
    Sample(SampleArgs),
    /// Marginals and log-likelihoods under a model.
    Query(QueryArgs),
    /// Test log-likelihood against training-set size and composition.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EmArgs {
    /// chain, flat, learn, or file:PATH holding a bracket hierarchy such as ([a,b] [c]).
    #[arg(long, default_value = "learn")]
    pub structure: String,
    #[arg(long, default_value_t = 0.1)]
    pub smoothing: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    /// Relative log-likelihood change that ends EM.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Item sets at most this large are not split when learning structure.
    #[arg(long, default_value_t = 1)]
    pub max_leaf_size: usize,
    /// Posterior completions per record when learning structure from partial rankings.
    #[arg(long, default_value_t = 10)]
    pub structure_samples: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Trace CSV path; defaults to <out>.trace.csv.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub em: EmArgs,
}

#[derive(Debug, Args)]
pub struct ConditionArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Observation in ballot record syntax, e.g. "a,c>b".
    #[arg(long)]
    pub obs: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("query").required(true).args(["pairwise", "first_place", "loglik"])))]
pub struct QueryArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Probability that item I is ranked before item J.
    #[arg(long, num_args = 2, value_names = ["I", "J"])]
    pub pairwise: Option<Vec<String>>,
    /// Probability of each item being ranked first.
    #[arg(long)]
    pub first_place: bool,
    /// Log-probability of every record of a ballot file.
    #[arg(long, value_name = "FILE")]
    pub loglik: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Numbers of partial rankings added to the full ones, in file order.
    /// Defaults to 0 and doublings up to everything available.
    #[arg(long, value_delimiter = ',')]
    pub partial_counts: Option<Vec<usize>>,
    /// Trials per setting; trial 0 uses the data as given, later trials a bootstrap resample.
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[command(flatten)]
    pub em: EmArgs,
}

/// Runs a parsed command; returns the text for standard output.
pub fn dispatch(cli: &Cli) -> CliResult<String> {
    match &cli.command {
        Command::Fit(a) => fit(a, cli.table_cap),
        Command::Condition(a) => condition(a),
        Command::Sample(a) => sample(a),
        Command::Query(a) => query(a),
        Command::Evaluate(a) => evaluate(a, cli.table_cap),
    }
}

fn em_config(a: &EmArgs) -> CliResult<EmConfig> {
    let cfg = EmConfig {
        max_iters: a.max_iters,
        rel_tol: a.tol,
        smoothing: a.smoothing,
        structure_samples: a.structure_samples,
        seed: a.seed,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if !matches!(a.structure.as_str(), "chain" | "flat" | "learn") && !a.structure.starts_with("file:") {
        return Err(CliError::Usage(format!(
            "--structure must be chain, flat, learn or file:PATH, not '{}'",
            a.structure
        )));
    }
    if a.max_leaf_size < 1 {
        return Err(CliError::Usage("--max-leaf-size must be at least 1".into()));
    }
    Ok(cfg)
}

enum Structure {
    Fixed(Hierarchy),
    Learn,
}

fn structure(choice: &str, items: &ItemSet) -> CliResult<Structure> {
    let n = items.len();
    match choice {
        "chain" => Ok(Structure::Fixed(Hierarchy::chain_n(n)?)),
        "flat" => Ok(Structure::Fixed(Hierarchy::flat(n)?)),
        "learn" => Ok(Structure::Learn),
        other => {
            let path = other.strip_prefix("file:").unwrap_or(other);
            let h = Hierarchy::parse(read_input(Path::new(path))?.trim(), items)?;
            if !h.covers(n) {
                return Err(CliError::Data(format!("hierarchy in {path} does not cover the {n} catalog items")));
            }
            Ok(Structure::Fixed(h))
        }
    }
}

fn check_cap(h: &Hierarchy, cap: u64) -> CliResult<()> {
    h.check_capacity(cap).map_err(|e| CliError::Usage(format!("{e}; raise --table-cap or use another structure")))
}

fn fit(a: &FitArgs, cap: u64) -> CliResult<String> {
    let cfg = em_config(&a.em)?;
    let data = parse_ballots(&read_input(&a.data)?)?;
    if data.is_empty() {
        return Err(CliError::Data("ballot file has no records".into()));
    }
    let (model, trace) = match structure(&a.em.structure, data.items())? {
        Structure::Fixed(h) => {
            check_cap(&h, cap)?;
            em_fit_params(Arc::new(h), &data, &cfg)?
        }
        Structure::Learn => {
            let fit = structural_em(&data, &cfg, a.em.max_leaf_size)?;
            check_cap(&fit.hierarchy, cap)?;
            (fit.model, fit.trace)
        }
    };
    write_output(&a.out, &format_model(&model))?;
    let trace_path = a.trace.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".trace.csv");
        PathBuf::from(p)
    });
    write_output(&trace_path, &trace_csv(&trace))?;
    let mut out = String::new();
    let _ = writeln!(out, "hierarchy: {}", model.hierarchy().display(model.items()));
    let _ = writeln!(out, "iterations: {}", trace.iterations());
    let _ = writeln!(out, "loglik: {}", num(trace.final_log_likelihood().unwrap_or(f64::NAN)));
    Ok(out)
}

/// Shortest round-trip text, in exponent form outside `[1e-4, 1e15)`.
fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn trace_csv(trace: &EmTrace) -> String {
    let mut out = String::from("iteration,loglik\n");
    for e in &trace.entries {
        let _ = writeln!(out, "{},{}", e.iteration, num(e.log_likelihood));
    }
    out
}

fn condition(a: &ConditionArgs) -> CliResult<String> {
    let model = parse_model(&read_input(&a.model)?)?;
    let obs = parse_observation(&a.obs, model.items())?;
    let posterior = condition_with_evidence(&model, &obs)?;
    write_output(&a.out, &format_model(&posterior.model))?;
    Ok(format!("evidence: {}\n", num(posterior.evidence)))
}

fn sample(a: &SampleArgs) -> CliResult<String> {
    let model = parse_model(&read_input(&a.model)?)?;
    let mut rng = seeded(a.seed);
    let mut out = header_line(model.items());
    out.push('\n');
    for _ in 0..a.count {
        out.push_str(&ranking_line(&model.sample(&mut rng), model.items()));
        out.push('\n');
    }
    match &a.out {
        Some(path) => {
            write_output(path, &out)?;
            Ok(String::new())
        }
        None => Ok(out),
    }
}

fn query(a: &QueryArgs) -> CliResult<String> {
    let model = parse_model(&read_input(&a.model)?)?;
    let items = model.items();
    let mut out = String::new();
    if let Some(pair) = &a.pairwise {
        let lookup = |name: &str| {
            items.index_of(name).ok_or_else(|| CliError::Data(format!("unknown item '{name}'")))
        };
        let (i, j) = (lookup(&pair[0])?, lookup(&pair[1])?);
        let p = pairwise_marginal(&model, i, j)?;
        let _ = writeln!(out, "i,j,probability\n{},{},{}", pair[0], pair[1], num(p));
    } else if a.first_place {
        out.push_str("item,probability\n");
        for (x, p) in first_place_distribution(&model)?.iter().enumerate() {
            let _ = writeln!(out, "{},{}", items.name(x), num(*p));
        }
    } else if let Some(path) = &a.loglik {
        let data = parse_ballots(&read_input(path)?)?;
        if data.items().names() != items.names() {
            return Err(CliError::Data("ballot catalog does not match the model's items".into()));
        }
        out.push_str("record,count,log_probability,probability\n");
        let mut total = 0.0;
        for (k, r) in data.records().iter().enumerate() {
            let p = partial_ranking_probability(&model, &r.ranking)?;
            let lp = p.ln();
            total += r.count as f64 * lp;
            let _ = writeln!(out, "{},{},{},{}", k + 1, r.count, num(lp), num(p));
        }
        let _ = writeln!(out, "total,{},{},{}", data.total_count(), num(total), num(total.exp()));
    }
    Ok(out)
}

/// Collapses repeated ballots into counted records, in first-seen order.
fn tally(items: &Arc<ItemSet>, ballots: &[&PartialRanking]) -> RankingDataset {
    let mut order: Vec<&PartialRanking> = Vec::new();
    let mut counts: HashMap<&PartialRanking, u64> = HashMap::new();
    for &pr in ballots {
        let c = counts.entry(pr).or_insert(0);
        if *c == 0 {
            order.push(pr);
        }
        *c += 1;
    }
    let mut data = RankingDataset::empty(items.clone());
    for pr in order {
        data.push(pr.clone(), counts[pr]).expect("ballots come from a dataset over the same items");
    }
    data
}

fn expand(data: &RankingDataset) -> Vec<&PartialRanking> {
    data.records().iter().flat_map(|r| std::iter::repeat_n(&r.ranking, r.count as usize)).collect()
}

/// Bootstrap resample of the same size.
fn resample<'a, R: Rng>(pool: &[&'a PartialRanking], rng: &mut R) -> Vec<&'a PartialRanking> {
    (0..pool.len()).map(|_| pool[rng.random_range(0..pool.len())]).collect()
}

fn evaluate(a: &EvaluateArgs, cap: u64) -> CliResult<String> {
    let cfg = em_config(&a.em)?;
    if a.trials < 1 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let train = parse_ballots(&read_input(&a.train)?)?;
    let test = parse_ballots(&read_input(&a.test)?)?;
    if train.items().names() != test.items().names() {
        return Err(CliError::Data("training and test catalogs differ".into()));
    }
    if test.is_empty() {
        return Err(CliError::Data("test file has no records".into()));
    }
    let items = train.items().clone();
    let ballots = expand(&train);
    let (full, partial): (Vec<&PartialRanking>, Vec<&PartialRanking>) =
        ballots.into_iter().partition(|pr| pr.is_full());

    let counts = match &a.partial_counts {
        Some(c) => c.clone(),
        None => {
            let mut c = vec![0];
            let mut k = 1;
            while k < partial.len() {
                c.push(k);
                k *= 2;
            }
            if !partial.is_empty() {
                c.push(partial.len());
            }
            c
        }
    };
    if let Some(&too_many) = counts.iter().find(|&&c| c > partial.len()) {
        return Err(CliError::Usage(format!(
            "--partial-counts asks for {too_many} partial rankings but the training file has {}",
            partial.len()
        )));
    }

    // The structure is chosen once and held fixed across settings.
    let h = match structure(&a.em.structure, &items)? {
        Structure::Fixed(h) => h,
        Structure::Learn if !full.is_empty() => {
            let scfg = StructureConfig {
                max_leaf_size: a.em.max_leaf_size,
                smoothing: a.em.smoothing,
                seed: a.em.seed,
                ..StructureConfig::default()
            };
            structure_search(&tally(&items, &full), &scfg)?
        }
        Structure::Learn => {
            Arc::unwrap_or_clone(structural_em(&tally(&items, &partial), &cfg, a.em.max_leaf_size)?.hierarchy)
        }
    };
    check_cap(&h, cap)?;
    let h = Arc::new(h);

    let mut out = format!(
        "# hierarchy {}\nfull_rankings,partial_rankings,trial,iterations,train_loglik,test_loglik,test_loglik_per_ranking\n",
        h.display(&items)
    );
    for (ci, &c) in counts.iter().enumerate() {
        for trial in 0..a.trials {
            let chosen: Vec<&PartialRanking> = if trial == 0 {
                full.iter().chain(&partial[..c]).copied().collect()
            } else {
                let mut rng = task_stream(a.em.seed, (ci * a.trials + trial) as u64);
                let mut v = resample(&full, &mut rng);
                v.extend(resample(&partial[..c], &mut rng));
                v
            };
            if chosen.is_empty() {
                return Err(CliError::Data("a training setting has no rankings".into()));
            }
            let data = tally(&items, &chosen);
            let (model, trace) = em_fit_params(h.clone(), &data, &cfg)?;
            let test_ll = log_likelihood(&model, &test)?.value();
            let _ = writeln!(
                out,
                "{},{c},{trial},{},{},{},{}",
                full.len(),
                trace.iterations(),
                num(trace.final_log_likelihood().unwrap_or(f64::NAN)),
                num(test_ll),
                num(test_ll / test.total_count() as f64)
            );
        }
    }
    Ok(out)
}

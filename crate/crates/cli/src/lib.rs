//! Command-line front end: parses arguments, loads configs and corpora,
//! runs the harness and writes CSV outputs.

pub mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use rucb_core::harness::{self, csv, Environment, RunConfig, RunOptions};
use rucb_core::simenv::{generate_corpus, labeled_clusters, Corpus, STRATA};
use serde::Serialize;

use crate::config::{
    config_hash, load, relative_to, CompareFile, CorpusConfig, RunFile, SparsityFile, SweepBFile, SweepEpsFile,
};

#[derive(Debug, Parser)]
#[command(name = "rucb", version, about = "Risk-aware bandit recommendation simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus directory.
    GenCorpus {
        /// Corpus spec file; built-in defaults when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run one policy and write its CTR curve and final case base.
    Run(ConfigArgs),
    /// Compare policies over replications.
    Compare(ConfigArgs),
    /// Calibrate the similarity threshold on a labelled clustering.
    SweepB(ConfigArgs),
    /// Calibrate the exploration bounds on critical situations.
    SweepEps(ConfigArgs),
    /// Average CTR per policy and risk interval.
    RiskReport(ConfigArgs),
    /// Compare policies on sparsified case bases.
    Sparsity(ConfigArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Replaces the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Maximum parallel tasks.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenCorpus { spec, common } => gen_corpus(spec.as_deref(), &common),
        Command::Run(a) => run(&a),
        Command::Compare(a) => compare(&a, false),
        Command::RiskReport(a) => compare(&a, true),
        Command::SweepB(a) => sweep_b(&a),
        Command::SweepEps(a) => sweep_eps(&a),
        Command::Sparsity(a) => sparsity(&a),
    }
}

fn header<T: Serialize>(command: &str, cfg: &T, seed: u64) -> String {
    format!(
        "# command: {command}\n# config_sha256: {}\n# seed: {seed}\n",
        config_hash(cfg)
    )
}

fn write_output(out: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create output directory {}", out.display()))?;
    let path = out.join(name);
    std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn load_corpus(config: &Path, corpus: &Path) -> Result<Corpus> {
    let dir = relative_to(config, corpus);
    Corpus::load(&dir).with_context(|| format!("cannot load corpus {}", dir.display()))
}

fn gen_corpus(spec: Option<&Path>, common: &Common) -> Result<()> {
    let mut cfg = match spec {
        Some(p) => load::<CorpusConfig>(p)?,
        None => CorpusConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.corpus.seed = seed;
    }
    let corpus = generate_corpus(&cfg.corpus)?;
    corpus
        .save(&common.out)
        .with_context(|| format!("cannot write corpus to {}", common.out.display()))?;

    let mut counts = [0usize; STRATA];
    for (_, t) in corpus.ground_truth.iter() {
        counts[t.stratum] += 1;
    }
    let means = corpus.ground_truth.stratum_means();
    let mut text = header("gen-corpus", &cfg, cfg.corpus.seed);
    text.push_str("risk_bucket,situations,critical,mean_click_probability\n");
    for st in 0..STRATA {
        let _ = writeln!(
            text,
            "{},{},{},{}",
            harness::BUCKET_LABELS[st],
            counts[st],
            st == STRATA - 1,
            means[st].map_or(String::new(), |m| m.to_string())
        );
    }
    write_output(&common.out, "strata.csv", &text)
}

fn run(a: &ConfigArgs) -> Result<()> {
    let mut cfg: RunFile = load(&a.config)?;
    if let Some(seed) = a.common.seed {
        cfg.seed = seed;
    }
    let corpus = load_corpus(&a.config, &cfg.corpus)?;
    let tests = harness::all_situations(&corpus.case_base);
    let env = Environment::from_corpus(&corpus, &tests);
    let run_cfg = RunConfig {
        policy: cfg.policy.clone(),
        protocol: cfg.protocol,
        risk: cfg.risk,
        seed: cfg.seed,
    };
    let opts = RunOptions {
        keep_case_base: true,
        ..RunOptions::default()
    };
    let result = harness::with_jobs(a.common.jobs, || harness::run_experiment(&env, &run_cfg, opts))??;
    let mut text = header("run", &cfg, cfg.seed);
    text.push_str(&csv::curve(&result));
    write_output(&a.common.out, "curve.csv", &text)?;
    let cb = result.case_base.expect("kept on request");
    write_output(&a.common.out, "case_base.json", &cb.to_json(&corpus.ontology))
}

fn compare(a: &ConfigArgs, buckets: bool) -> Result<()> {
    let mut cfg: CompareFile = load(&a.config)?;
    if let Some(seed) = a.common.seed {
        cfg.seed = seed;
    }
    let corpus = load_corpus(&a.config, &cfg.corpus)?;
    let tests = harness::all_situations(&corpus.case_base);
    let env = Environment::from_corpus(&corpus, &tests);
    let cmp = harness::compare_policies(
        &env,
        &cfg.policies,
        cfg.protocol,
        cfg.risk,
        cfg.replications,
        cfg.seed,
        a.common.jobs,
    )?;
    if buckets {
        let mut text = header("risk-report", &cfg, cfg.seed);
        text.push_str(&csv::buckets(&harness::risk_bucket_report(&cmp)));
        return write_output(&a.common.out, "buckets.csv", &text);
    }
    let head = header("compare", &cfg, cfg.seed);
    write_output(&a.common.out, "compare.csv", &(head.clone() + &csv::comparison(&cmp)))?;
    write_output(
        &a.common.out,
        "compare_summary.csv",
        &(head + &csv::comparison_summary(&cmp)),
    )
}

fn sweep_b(a: &ConfigArgs) -> Result<()> {
    let mut cfg: SweepBFile = load(&a.config)?;
    if let Some(seed) = a.common.seed {
        cfg.clusters.seed = seed;
    }
    let sample = labeled_clusters(&cfg.clusters)?;
    let sweep = harness::sweep_b(&sample, &cfg.grid)?;
    let mut text = header("sweep-b", &cfg, cfg.clusters.seed);
    let _ = writeln!(
        text,
        "# accuracy: pairwise clustering accuracy over connected components of sim >= b"
    );
    let _ = writeln!(
        text,
        "# best_b: {} accuracy: {} constructed_threshold: {}",
        sweep.best, sweep.best_accuracy, sample.threshold
    );
    text.push_str(&csv::sweep_b(&sweep));
    write_output(&a.common.out, "sweep_b.csv", &text)
}

fn sweep_eps(a: &ConfigArgs) -> Result<()> {
    let mut cfg: SweepEpsFile = load(&a.config)?;
    if let Some(seed) = a.common.seed {
        cfg.seed = seed;
    }
    let corpus = load_corpus(&a.config, &cfg.corpus)?;
    let tests = harness::all_situations(&corpus.case_base);
    let env = Environment::from_corpus(&corpus, &tests);
    let sweep = harness::sweep_epsilon(
        &env,
        &cfg.grid,
        cfg.protocol,
        cfg.replications,
        cfg.tolerance,
        cfg.seed,
        a.common.jobs,
    )?;
    let mut text = header("sweep-eps", &cfg, cfg.seed);
    let _ = writeln!(text, "# eps_min: {} eps_max: {}", sweep.eps_min, sweep.eps_max);
    text.push_str(&csv::sweep_eps(&sweep));
    write_output(&a.common.out, "sweep_eps.csv", &text)
}

fn sparsity(a: &ConfigArgs) -> Result<()> {
    let mut cfg: SparsityFile = load(&a.config)?;
    if let Some(seed) = a.common.seed {
        cfg.seed = seed;
    }
    let corpus = load_corpus(&a.config, &cfg.corpus)?;
    let tests = harness::all_situations(&corpus.case_base);
    let env = Environment::from_corpus(&corpus, &tests);
    let rows = harness::sparsity_sweep(
        &env,
        &cfg.policies,
        &cfg.fractions,
        cfg.protocol,
        cfg.replications,
        cfg.seed,
        a.common.jobs,
    )?;
    let mut text = header("sparsity", &cfg, cfg.seed);
    text.push_str(&csv::sparsity(&rows));
    write_output(&a.common.out, "sparsity.csv", &text)
}

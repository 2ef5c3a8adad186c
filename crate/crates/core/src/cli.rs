//! The `sil` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::dil::{load_params, save_params, train, write_loss_csv, DilPolicy};
use crate::experiment::{compare, comparison_csv, evaluate, record_demonstrations, Directions};
use crate::ilp::{
    induce, semantically_equivalent, Hypothesis, IlpError, InductionReport, InductionResult,
};
use crate::ingest::{extract_pairs, load_pairs, load_tracks, write_pairs};
use crate::knowledge::{
    generate_examples, read_task_files, write_task_files, BiasSpec, ExampleSet, BIAS_FILE,
};
use crate::sim::{metrics_csv, write_trace_jsonl, EgoPolicy};

#[derive(Debug, Parser)]
#[command(
    name = "sil",
    version,
    about = "Rule induction and rule-based highway driving"
)]
pub struct Cli {
    /// JSON run configuration; built-in defaults otherwise.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Base seed for episodes, demonstrations and training.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub episodes: Option<usize>,
    #[arg(
        long,
        visible_alias = "directions",
        global = true,
        value_name = "l2r|r2l|both"
    )]
    pub direction: Option<Directions>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Restrict to one head predicate.
    #[arg(long, global = true, value_name = "NAME")]
    pub task: Option<String>,
    /// Task files directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Agent {
    Sil,
    Dil,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write bias, example and fact files for each task.
    GenExamples,
    /// Induce a rule from task files and report its coverage.
    Induce,
    /// Induce every task and check it against its labeling rule.
    VerifyRules,
    /// Run episodes and write metrics and traces.
    Simulate {
        #[arg(long, value_enum, default_value = "sil")]
        agent: Agent,
        /// Parameter file for the DIL agent.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Turn a highD tracks file into state/action pairs.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Train the behavior-cloning network on a pairs file.
    TrainDil {
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Run SIL and DIL on identical traffic.
    Compare {
        /// Use these parameters instead of training on recorded demonstrations.
        #[arg(long)]
        params: Option<PathBuf>,
    },
}

/// Parses `argv` and runs it: 0 on success, 1 on a domain error, 2 on a usage error.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = write!(stderr, "{}", e.render());
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            1
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.experiment.seed = s;
        cfg.train.seed = s;
    }
    if let Some(n) = cli.episodes {
        cfg.experiment.episodes = n;
    }
    if let Some(d) = cli.direction {
        cfg.experiment.directions = d;
    }
    if let Some(o) = &cli.out {
        cfg.paths.out_dir = o.clone();
    }
    if let Some(d) = &cli.dir {
        cfg.paths.tasks_dir = d.clone();
    }
    Ok(cfg)
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::GenExamples => gen_examples(&cfg, cli.task.as_deref(), out),
        Command::Induce => {
            let Some(task) = cli.task.as_deref() else {
                bail!("induce needs --task NAME");
            };
            induce_task(&cfg, task, out)
        }
        Command::VerifyRules => verify_rules(&cfg, cli.task.as_deref(), out),
        Command::Simulate { agent, params } => simulate(&cfg, *agent, params.as_deref(), out),
        Command::Ingest { input } => ingest(&cfg, input.as_deref(), out),
        Command::TrainDil { pairs } => train_dil(&cfg, pairs.as_deref(), out),
        Command::Compare { params } => run_compare(&cfg, params.as_deref(), out),
    }
}

fn selected<'a>(
    cfg: &'a RunConfig,
    task: Option<&str>,
) -> Result<Vec<&'a crate::knowledge::TaskDefinition>> {
    match task {
        Some(name) => Ok(vec![cfg
            .task(name)
            .with_context(|| format!("unknown task {name:?}"))?]),
        None => Ok(cfg.tasks.iter().collect()),
    }
}

fn gen_examples(cfg: &RunConfig, task: Option<&str>, out: &mut dyn Write) -> Result<()> {
    for t in selected(cfg, task)? {
        let ex = generate_examples(&t.space, &t.labeler()?);
        let dir = cfg.paths.tasks_dir.join(&t.head);
        let m = write_task_files(&t.bias()?, &ex, &dir)?;
        writeln!(
            out,
            "{}: {} positives, {} negatives -> {}",
            t.head,
            m.positives,
            m.negatives,
            dir.display()
        )?;
    }
    Ok(())
}

/// Task files live either in `<dir>/<task>/` or directly in `<dir>`.
fn task_files(dir: &Path, task: &str) -> Result<(BiasSpec, ExampleSet)> {
    let nested = dir.join(task);
    let dir = if nested.join(BIAS_FILE).exists() {
        nested
    } else {
        dir.to_path_buf()
    };
    let (bias, ex) = read_task_files(&dir)
        .with_context(|| format!("reading task files in {}", dir.display()))?;
    if bias.head().as_str() != task {
        bail!("{} holds task {}, not {task}", dir.display(), bias.head());
    }
    Ok((bias, ex))
}

fn run_induction(
    cfg: &RunConfig,
    task: &str,
    bias: &BiasSpec,
    ex: &ExampleSet,
) -> Result<InductionResult> {
    let mut search = cfg.search.clone();
    if let Some(t) = cfg.task(task) {
        search.max_literals = t.max_literals;
        search.max_clauses = t.max_clauses;
        search.allow_negation = t.allow_negation;
    }
    match induce(bias, ex, &search) {
        Ok(r) => Ok(r),
        Err(IlpError::BudgetExhausted(partial)) => {
            log::warn!("{task}: time budget exhausted, reporting the partial hypothesis");
            Ok(*partial)
        }
        Err(e) => Err(e.into()),
    }
}

fn induce_task(cfg: &RunConfig, task: &str, out: &mut dyn Write) -> Result<()> {
    let (bias, ex) = task_files(&cfg.paths.tasks_dir, task)?;
    let r = run_induction(cfg, task, &bias, &ex)?;
    let report = InductionReport::from(&r);
    writeln!(out, "{}", report.rule)?;
    writeln!(
        out,
        "accuracy {:.2} (precision {:.2}, recall {:.2}; tp {} fp {} tn {} fn {})",
        report.accuracy,
        report.precision,
        report.recall,
        report.tp,
        report.fp,
        report.tn,
        report.fn_
    )?;
    writeln!(
        out,
        "T_e {:.3} s, {} candidates tested, {} pruned{}",
        report.elapsed_s,
        report.candidates_tested,
        report.pruned,
        if report.complete { "" } else { ", incomplete" }
    )?;
    let path = cfg.paths.out_dir.join(format!("{task}.induce.json"));
    crate::fsutil::write_atomic(&path, serde_json::to_string_pretty(&report)?.as_bytes())
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn verify_rules(cfg: &RunConfig, task: Option<&str>, out: &mut dyn Write) -> Result<()> {
    let mut failed = Vec::new();
    let mut induced = String::new();
    for t in selected(cfg, task)? {
        let labeler = t.labeler_rule()?;
        let ex = generate_examples(&t.space, &crate::knowledge::Labeler::Rule(labeler.clone()));
        let r = run_induction(cfg, &t.head, &t.bias()?, &ex)?;
        let same = semantically_equivalent(&r.hypothesis, &Hypothesis::from(labeler), &t.space);
        let ok = same && r.coverage.accuracy == 1.0;
        writeln!(
            out,
            "{:<18} {}  accuracy {:.2}  T_e {:.3} s  {}",
            t.head,
            if ok { "ok  " } else { "FAIL" },
            r.coverage.accuracy,
            r.elapsed.as_secs_f64(),
            r.hypothesis.render()
        )?;
        induced.push_str(&r.hypothesis.render());
        induced.push('\n');
        if !ok {
            failed.push(t.head.clone());
        }
    }
    let path = cfg.paths.out_dir.join("induced_rules.pl");
    crate::fsutil::write_atomic(&path, induced.as_bytes())
        .with_context(|| format!("writing {}", path.display()))?;
    if !failed.is_empty() {
        bail!("rules not recovered: {}", failed.join(", "));
    }
    Ok(())
}

fn dil_agent(cfg: &RunConfig, params: Option<&Path>) -> Result<DilPolicy> {
    let path = params
        .map(Path::to_path_buf)
        .or_else(|| cfg.paths.params.clone())
        .context("the DIL agent needs --params PATH")?;
    let params = load_params(&path).with_context(|| format!("loading {}", path.display()))?;
    let mut agent = DilPolicy::new(params, cfg.policy());
    agent.v_max = cfg.extract.v_max;
    Ok(agent)
}

fn simulate(
    cfg: &RunConfig,
    agent: Agent,
    params: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    let sc = cfg.scenario();
    let dil;
    let policy: &dyn EgoPolicy = match agent {
        Agent::Sil => &sc.control,
        Agent::Dil => {
            dil = dil_agent(cfg, params)?;
            &dil
        }
    };
    let runs = evaluate(&sc, policy, &cfg.experiment)?;
    let dir = &cfg.paths.out_dir;
    let all: Vec<_> = runs
        .iter()
        .flat_map(|r| r.results.iter().cloned())
        .collect();
    crate::fsutil::write_atomic(&dir.join("metrics.csv"), metrics_csv(&all)?.as_bytes())?;
    for run in &runs {
        if let Some(first) = run.results.first() {
            write_trace_jsonl(
                &dir.join(format!("trace_{}.jsonl", run.direction)),
                &first.trace,
            )?;
        }
        let s = run.summary;
        writeln!(
            out,
            "{}: episodes {} N_LC {} N_hits {} T_avg {:.2} s D_avg {:.1} m V_avg {:.2} km/h",
            run.direction, s.episodes, s.n_lc, s.n_hits, s.t_avg, s.d_avg, s.v_avg
        )?;
    }
    writeln!(out, "metrics -> {}", dir.join("metrics.csv").display())?;
    Ok(())
}

fn ingest(cfg: &RunConfig, input: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let path = input
        .map(Path::to_path_buf)
        .or_else(|| cfg.paths.tracks.clone())
        .context("ingest needs --input PATH")?;
    let rec = load_tracks(&path).with_context(|| format!("loading {}", path.display()))?;
    let pairs = extract_pairs(&rec, &cfg.extract());
    let dest = cfg.paths.out_dir.join("pairs.csv");
    write_pairs(&dest, &pairs)?;
    writeln!(
        out,
        "{} vehicles, {} pairs -> {}",
        rec.vehicles.len(),
        pairs.len(),
        dest.display()
    )?;
    Ok(())
}

fn train_dil(cfg: &RunConfig, pairs: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let path = pairs
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.pairs_path());
    let data = load_pairs(&path).with_context(|| format!("loading {}", path.display()))?;
    let (params, report) = train(&data, &cfg.train)?;
    let dir = &cfg.paths.out_dir;
    save_params(&dir.join("params.json"), &params)?;
    write_loss_csv(&dir.join("loss.csv"), &report)?;
    writeln!(
        out,
        "{} pairs, {} epochs{}, final loss {:.6}, {:.1} s -> {}",
        data.len(),
        report.epoch_losses.len(),
        if report.stopped_early {
            " (early stop)"
        } else {
            ""
        },
        report.epoch_losses.last().copied().unwrap_or(f64::NAN),
        report.wall_time.as_secs_f64(),
        dir.join("params.json").display()
    )?;
    Ok(())
}

fn run_compare(cfg: &RunConfig, params: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let sc = cfg.scenario();
    let dir = &cfg.paths.out_dir;
    let dil = if params.is_some() || cfg.paths.params.is_some() {
        dil_agent(cfg, params)?
    } else {
        let rec = record_demonstrations(&sc, &sc.control, &cfg.experiment)?;
        let pairs = extract_pairs(&rec, &cfg.extract());
        write_pairs(&dir.join("pairs.csv"), &pairs)?;
        let (p, report) = train(&pairs, &cfg.train)?;
        save_params(&dir.join("params.json"), &p)?;
        write_loss_csv(&dir.join("loss.csv"), &report)?;
        log::info!(
            "trained on {} pairs in {:.1} s",
            pairs.len(),
            report.wall_time.as_secs_f64()
        );
        let mut agent = DilPolicy::new(p, cfg.policy());
        agent.v_max = cfg.extract.v_max;
        agent
    };
    let rows = compare(&sc, &[("SIL", &sc.control), ("DIL", &dil)], &cfg.experiment)?;
    let csv = comparison_csv(&rows);
    crate::fsutil::write_atomic(&dir.join("compare.csv"), csv.as_bytes())?;
    write!(out, "{csv}")?;
    Ok(())
}

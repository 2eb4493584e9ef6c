use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use loarm::config::{Overrides, RunConfig};
use loarm::data::{self, Dataset};
use loarm::engine::{self, compress_trace, consistency_rate_of, OrderTrace, TraceStep};
use loarm::state::{format_graph_line, DimKind, GraphRecord};
use loarm::verify;
use loarm::{DataVector, Error, Layout, LoArmModel, PolicyMode, Result, RngStream, VariationalMode};

#[derive(Parser)]
#[command(name = "loarm", version, about = "Learning-order autoregressive models: train, sample, evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct Flags {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for the model, training, sampler and evaluation streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    steps: Option<usize>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    /// uniform | biased-uniform | entropy | shared-torso
    #[arg(long, global = true)]
    policy_mode: Option<PolicyMode>,
    /// uniform | shared-torso | separate
    #[arg(long, global = true)]
    q_mode: Option<VariationalMode>,
    #[arg(long, global = true)]
    top_p: Option<f64>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Model checkpoint to load; defaults to OUT/model.json.
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train on the configured dataset; writes train_log.csv, checkpoints and model.json.
    Train,
    /// Draw samples; writes samples.txt and traces.jsonl.
    Sample,
    /// Held-out NLL bound, validity, uniqueness and consistency; writes metrics.csv.
    Evaluate,
    /// Run the built-in correctness checks; exits non-zero on any failure.
    Verify {
        /// Also run the two training-based checks (several minutes).
        #[arg(long)]
        with_training: bool,
    },
    /// Print compressed phase strings and the consistency rate; writes phases.txt.
    TraceOrders,
}

fn resolve(flags: &Flags) -> Result<RunConfig> {
    let mut cfg = match &flags.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: flags.seed,
        steps: flags.steps,
        batch_size: flags.batch_size,
        policy_mode: flags.policy_mode,
        q_mode: flags.q_mode,
        top_p: flags.top_p,
        samples: flags.samples,
    })?;
    Ok(cfg)
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn load_model(flags: &Flags) -> Result<LoArmModel> {
    let path = flags.checkpoint.clone().unwrap_or_else(|| flags.out.join("model.json"));
    LoArmModel::load(&path)
}

fn graph_nodes(layout: &Layout) -> Option<usize> {
    let n = layout.kinds().iter().filter(|&&k| k == DimKind::Node).count();
    (n > 0).then_some(n)
}

fn sample_line(layout: &Layout, x: &DataVector) -> Result<String> {
    match graph_nodes(layout) {
        Some(n) => Ok(format_graph_line(&GraphRecord::from_data(x, n)?)),
        None => Ok(x.tokens().iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ")),
    }
}

#[derive(Serialize)]
struct TraceRecord<'a> {
    sample: usize,
    phases: String,
    steps: &'a [TraceStep],
}

fn write_outputs(dir: &Path, layout: &Layout, samples: &[(DataVector, OrderTrace)], traces: bool) -> Result<()> {
    let mut text = String::new();
    for (x, _) in samples {
        text.push_str(&sample_line(layout, x)?);
        text.push('\n');
    }
    write(&dir.join("samples.txt"), &text)?;
    if traces {
        let mut lines = String::new();
        for (i, (_, t)) in samples.iter().enumerate() {
            let rec = TraceRecord { sample: i, phases: compress_trace(t), steps: &t.steps };
            lines.push_str(&serde_json::to_string(&rec).map_err(|e| Error::Serde(e.to_string()))?);
            lines.push('\n');
        }
        write(&dir.join("traces.jsonl"), &lines)?;
    }
    Ok(())
}

fn template(cfg: &RunConfig, layout: &Layout) -> Option<String> {
    cfg.eval
        .template
        .clone()
        .or_else(|| graph_nodes(layout).map(|_| "ENA".to_string()))
}

fn run(cli: Cli) -> Result<bool> {
    let flags = &cli.flags;
    match cli.command {
        Command::Train => {
            let cfg = resolve(flags)?;
            let d = Dataset::load(&cfg.data)?;
            let (train, held) = data::split(&d.records, cfg.data.holdout_fraction, cfg.data.seed)?;
            let mut model = LoArmModel::new(d.layout.clone(), cfg.model.clone())?;
            create_out(&flags.out)?;
            write(&flags.out.join("config.toml"), &cfg.to_toml()?)?;
            let reports = engine::fit(&mut model, &train, &cfg.train, Some(&flags.out))?;
            if let Some(r) = reports.last() {
                println!(
                    "trained {} steps on {} records ({} held out); last batch ELBO {:.4}",
                    r.step,
                    train.len(),
                    held.len(),
                    r.elbo
                );
            }
            println!("wrote {}", flags.out.join("model.json").display());
        }
        Command::Sample => {
            let cfg = resolve(flags)?;
            let model = load_model(flags)?;
            let samples = engine::generate_many(&model, &cfg.sampler)?;
            create_out(&flags.out)?;
            write_outputs(&flags.out, model.layout(), &samples, cfg.sampler.record_traces)?;
            println!("wrote {} samples to {}", samples.len(), flags.out.join("samples.txt").display());
        }
        Command::Evaluate => {
            let cfg = resolve(flags)?;
            let model = load_model(flags)?;
            let d = Dataset::load(&cfg.data)?;
            if d.layout != *model.layout() {
                return Err(Error::Config("checkpoint layout does not match the configured dataset".into()));
            }
            let (_, held) = data::split(&d.records, cfg.data.holdout_fraction, cfg.data.seed)?;
            let tpl = template(&cfg, &d.layout);
            let ev = data::evaluate(
                &model,
                &held,
                &d.validator,
                &cfg.sampler,
                tpl.as_deref(),
                cfg.eval.nll_repeats,
                &mut RngStream::new(cfg.eval.seed),
            )?;
            create_out(&flags.out)?;
            data::write_metrics_csv(&flags.out.join("metrics.csv"), std::slice::from_ref(&ev.report))?;
            write_outputs(&flags.out, model.layout(), &ev.samples, cfg.sampler.record_traces)?;
            println!("{}", data::MetricsReport::HEADER);
            println!("{}", ev.report.csv_row());
        }
        Command::Verify { with_training } => {
            let mut ok = true;
            let mut stdout = std::io::stdout();
            for c in verify::run_suite(with_training) {
                ok &= c.passed;
                let _ = writeln!(stdout, "{}", c.line());
            }
            println!("{}", if ok { "all checks passed" } else { "some checks FAILED" });
            return Ok(ok);
        }
        Command::TraceOrders => {
            let cfg = resolve(flags)?;
            let model = load_model(flags)?;
            let samples = engine::generate_many(&model, &cfg.sampler)?;
            let phases: Vec<String> = samples.iter().map(|s| compress_trace(&s.1)).collect();
            create_out(&flags.out)?;
            write(&flags.out.join("phases.txt"), &(phases.join("\n") + "\n"))?;
            write_outputs(&flags.out, model.layout(), &samples, true)?;
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for p in &phases {
                *counts.entry(p.as_str()).or_default() += 1;
            }
            let mut ranked: Vec<_> = counts.into_iter().collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
            for (p, c) in ranked.iter().take(10) {
                println!("{c:>8}  {p}");
            }
            match template(&cfg, model.layout()) {
                Some(t) => println!("consistency with \"{t}\": {:.4}", consistency_rate_of(&phases, &t)?),
                None => println!("no phase template configured"),
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            // configuration mistakes are usage errors, like bad flags
            if matches!(e, Error::Config(_)) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tripletformer::attention::Activation;
use tripletformer::data::{load_jsonl, save_jsonl, Sampler, SineConfig};
use tripletformer::harness::{
    benchmark_attention, evaluate, prepare, run_experiment, sample_instances, sigma_grid,
    AttentionBenchRow, BaselineKind, BaselineModel, Predictor, RunConfig, SigmaMode,
};
use tripletformer::model::{BlockKind, Tripletformer, TripletformerConfig};
use tripletformer::training::{model_gradcheck, random_search, train, SearchSpace};

#[derive(Parser)]
#[command(
    name = "tripletformer",
    version,
    about = "Probabilistic interpolation of asynchronous time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by commands that split, sample and train.
#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "random")]
    sampler: Sampler,
    #[arg(long, default_value_t = 0.5)]
    observed_frac: f64,
    /// Overrides the MSE weight of the config file.
    #[arg(long)]
    lambda: Option<f64>,
    /// JSON with optional `model` and `train` sections.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn run_config(&self) -> Result<RunConfig> {
        let mut rc = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        rc.train.seed = self.seed;
        rc.train.sampler = self.sampler;
        rc.train.observed_frac = self.observed_frac;
        if let Some(l) = self.lambda {
            rc.train.lambda = l;
        }
        Ok(rc)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic sine dataset as JSON Lines plus its manifest.
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        n_series: usize,
        #[arg(long, default_value_t = 40)]
        length: usize,
        #[arg(long, default_value_t = 2)]
        channels: usize,
        #[arg(long, default_value_t = 0.1)]
        noise_sd: f64,
        /// Dataset path; the manifest goes next to it as `<stem>.manifest.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on the training split of a dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        max_epochs: Option<usize>,
        /// Output directory for `checkpoint.json` and `history.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint or a baseline on the test split of a dataset.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        /// Required unless `--baseline` is given.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        baseline: Option<BaselineKind>,
        /// One σ for all channels instead of one per channel.
        #[arg(long)]
        global_sigma: bool,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep set size and induced points; CSV of multiply-add counts and wall times.
    BenchmarkAttention {
        #[arg(long, value_delimiter = ',', default_value = "64,128,256,512")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "16")]
        induced: Vec<usize>,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        heads: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of the training-loss gradient for every model variant.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Random hyperparameter search; keeps the least validation NLL.
    Search {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[command(flatten)]
        common: Common,
        /// JSON search grids; the full grids when absent.
        #[arg(long)]
        space: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every cell of an experiment manifest.
    Experiment {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate {
            seed,
            n_series,
            length,
            channels,
            noise_sd,
            out,
        } => {
            let cfg = SineConfig {
                n_series,
                length,
                channels,
                noise_sd,
                seed,
            };
            let ds = cfg.build_asts()?;
            save_jsonl(&out, &ds.records)?;
            let manifest =
                serde_json::json!({ "generator": "sine", "parameters": cfg, "seed": seed });
            let stem = out
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("dataset");
            let mpath = out.with_file_name(format!("{stem}.manifest.json"));
            fs::write(&mpath, serde_json::to_string_pretty(&manifest)?)?;
            eprintln!("wrote {} records to {}", ds.len(), out.display());
        }
        Command::Train {
            data,
            common,
            max_epochs,
            out,
        } => {
            let rc = common.run_config()?;
            let ds = load_jsonl(&data)?;
            let prepared = prepare(&ds, common.seed)?;
            let mut tc = rc.train.clone();
            if let Some(e) = max_epochs {
                tc.max_epochs = e;
            }
            let (model, history) = train(
                &rc.model_config(ds.num_channels),
                &tc,
                &prepared.train,
                &prepared.val,
            )?;
            fs::create_dir_all(&out)?;
            model.save(out.join("checkpoint.json"))?;
            fs::write(
                out.join("history.json"),
                serde_json::to_string_pretty(&history.epochs)?,
            )?;
            eprintln!(
                "best epoch {} of {}, validation NLL {:.4}",
                history.best_epoch,
                history.epochs.len(),
                history.best_val_nll()
            );
        }
        Command::Evaluate {
            data,
            checkpoint,
            baseline,
            global_sigma,
            common,
            out,
        } => {
            let ds = load_jsonl(&data)?;
            let prepared = prepare(&ds, common.seed)?;
            let name = data
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("dataset")
                .to_string();
            let predictor: Box<dyn Predictor> = match (baseline, checkpoint) {
                (Some(kind), _) => {
                    let val = sample_instances(
                        &prepared.val,
                        common.sampler,
                        common.observed_frac,
                        common.seed,
                    )?;
                    let mode = if global_sigma {
                        SigmaMode::Global
                    } else {
                        SigmaMode::PerChannel
                    };
                    Box::new(BaselineModel::fit(
                        kind,
                        &prepared.train,
                        &val,
                        ds.num_channels,
                        &sigma_grid(),
                        mode,
                    )?)
                }
                (None, Some(ck)) => Box::new(Tripletformer::load(ck)?),
                (None, None) => bail!("evaluate needs --checkpoint or --baseline"),
            };
            let report = evaluate(
                predictor.as_ref(),
                &name,
                &prepared.test,
                common.sampler,
                common.observed_frac,
                common.seed,
            )?;
            write_or_print(out.as_deref(), &serde_json::to_string_pretty(&report)?)?;
        }
        Command::BenchmarkAttention {
            sizes,
            induced,
            dim,
            heads,
            seed,
            out,
        } => {
            let rows = benchmark_attention(&sizes, &induced, dim, heads, seed)?;
            let mut csv = String::from(AttentionBenchRow::CSV_HEADER);
            for r in &rows {
                csv.push('\n');
                csv.push_str(&r.to_csv());
            }
            write_or_print(out.as_deref(), &csv)?;
        }
        Command::Gradcheck { seed, tolerance } => {
            let mut ok = true;
            for enc in [BlockKind::Imab, BlockKind::Mab] {
                for dec in [BlockKind::Mab, BlockKind::Imab] {
                    for act in [Activation::Relu, Activation::Gelu] {
                        let mut cfg = TripletformerConfig::tiny(2, 8, 2);
                        cfg.encoder_block = enc;
                        cfg.decoder_block = dec;
                        cfg.activation = act;
                        let r = model_gradcheck(&cfg, seed, 1.0, 1e-4)?;
                        let pass = r.max_rel_error < tolerance;
                        ok &= pass;
                        println!(
                            "{} encoder={enc:?} decoder={dec:?} activation={act:?} max_rel_err={:.3e} \
                             checked={} kinks_skipped={}",
                            if pass { "PASS" } else { "FAIL" },
                            r.max_rel_error,
                            r.checked,
                            r.kinks
                        );
                    }
                }
            }
            return Ok(ok);
        }
        Command::Search {
            data,
            trials,
            common,
            space,
            out,
        } => {
            let rc = common.run_config()?;
            let space: SearchSpace = match space {
                Some(p) => serde_json::from_str(&fs::read_to_string(&p)?)?,
                None => SearchSpace::default(),
            };
            let ds = load_jsonl(&data)?;
            let prepared = prepare(&ds, common.seed)?;
            let res = random_search(
                &space,
                &rc.model_config(ds.num_channels),
                &rc.train,
                trials,
                common.seed,
                &prepared.train,
                &prepared.val,
            )?;
            write_or_print(out.as_deref(), &serde_json::to_string_pretty(&res)?)?;
        }
        Command::Experiment { manifest, out } => {
            let res = run_experiment(&manifest)?;
            write_or_print(out.as_deref(), &serde_json::to_string_pretty(&res)?)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use umap_core::dataio::{embedding_csv, emit_scatter_svg, load_csv, load_labels, write_embedding};
use umap_core::metrics::{knn_preservation, label_agreement};
use umap_core::parametric::EncoderNet;
use umap_core::{run_with, DataMatrix, Event, Mode, RunConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Batch,
    Progressive,
    Parametric,
}

/// Embed a CSV dataset (one point per row) into a low-dimensional space.
#[derive(Debug, Parser)]
#[command(name = "umap", version)]
struct Args {
    /// Input CSV, one point per row.
    #[arg(long)]
    input: PathBuf,
    /// Treat the first input row as a header.
    #[arg(long)]
    header: bool,
    /// Where to write the embedding CSV.
    #[arg(long)]
    output: PathBuf,
    /// Write a 2-D scatter plot as SVG.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Integer labels, one per line, for plot colors and the summary.
    #[arg(long)]
    labels: Option<PathBuf>,

    #[arg(long, default_value_t = 15)]
    k: usize,
    #[arg(long, default_value_t = 1.929)]
    a: f64,
    #[arg(long, default_value_t = 0.7915)]
    b: f64,
    /// Negative samples per positive pair.
    #[arg(long, default_value_t = 5)]
    neg: usize,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    eps: f64,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Enable the density regularizer, optionally with its weight.
    #[arg(long, num_args = 0..=1, default_missing_value = "2.0")]
    densmap_lambda: Option<f64>,
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    update_negatives: bool,
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    effective_weights: bool,
    /// Disable the per-update gradient clip.
    #[arg(long)]
    no_clip: bool,

    #[arg(long, value_enum, default_value_t = ModeArg::Batch)]
    mode: ModeArg,
    /// Points per streamed batch (progressive mode).
    #[arg(long, default_value_t = 100)]
    batch_size: usize,
    /// Also move positive partners while streaming.
    #[arg(long)]
    stream_update_positives: bool,
    /// Hidden width of the encoder (parametric mode).
    #[arg(long, default_value_t = 100)]
    hidden: usize,
    /// Mini-batch size (parametric mode).
    #[arg(long, default_value_t = 256)]
    batch: usize,
    /// Encoder step size (parametric mode).
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Save the trained encoder (parametric mode).
    #[arg(long)]
    save_model: Option<PathBuf>,
    /// Embed the input with a saved encoder instead of training.
    #[arg(long, conflicts_with = "save_model")]
    load_model: Option<PathBuf>,

    /// Print per-epoch statistics (and streamed batches) to stdout.
    #[arg(long)]
    verbose: bool,
}

impl Args {
    fn config(&self) -> RunConfig {
        let mut c = RunConfig {
            k: self.k,
            a: self.a,
            b: self.b,
            negative_samples: self.neg,
            eps: self.eps,
            epochs: self.epochs,
            densmap_lambda: self.densmap_lambda,
            seed: self.seed,
            update_negatives: self.update_negatives,
            effective_weights: self.effective_weights,
            dim: self.dim,
            mode: match self.mode {
                ModeArg::Batch => Mode::Batch,
                ModeArg::Progressive => Mode::Progressive,
                ModeArg::Parametric => Mode::Parametric,
            },
            ..RunConfig::default()
        };
        if self.no_clip {
            c.grad_clip = None;
        }
        c.stream.batch_size = self.batch_size;
        c.stream.update_positives = self.stream_update_positives;
        c.parametric.hidden = self.hidden;
        c.parametric.batch_size = self.batch;
        c.parametric.learning_rate = self.lr;
        c
    }
}

/// Error already tagged with the step that failed.
struct Failure {
    stage: String,
    message: String,
}

fn at<T, E: std::fmt::Display>(stage: &str, r: Result<T, E>) -> Result<T, Failure> {
    r.map_err(|e| Failure {
        stage: stage.to_string(),
        message: e.to_string(),
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error [{}]: {}", f.stage, f.message);
            ExitCode::FAILURE
        }
    }
}

fn execute(args: &Args) -> Result<(), Failure> {
    let config = args.config();
    let data = at("input", load_csv(&args.input, args.header))?;
    let labels = match &args.labels {
        Some(p) => Some(at("input", load_labels(p))?),
        None => None,
    };
    if let Some(path) = &args.load_model {
        return infer(args, &config, &data, labels.as_deref(), path);
    }
    if args.save_model.is_some() && config.mode != Mode::Parametric {
        return Err(Failure {
            stage: "config".into(),
            message: "--save-model requires --mode parametric".into(),
        });
    }

    let verbose = args.verbose;
    if verbose {
        println!("{}", umap_core::EpochReport::CSV_HEADER);
    }
    let result = run_with(&config, &data, labels.as_deref(), |event| {
        if !verbose {
            return;
        }
        match event {
            Event::Epoch(r) => println!("{}", r.csv_line()),
            Event::Batch { index, embedding } => {
                println!("# batch {index}: {} points", embedding.n());
                print!("{}", embedding_csv(embedding));
            }
        }
    })
    .map_err(|e| Failure {
        stage: e.stage.to_string(),
        message: e.source.to_string(),
    })?;

    write_outputs(args, &result.embedding, labels.as_deref())?;
    if let (Some(path), Some(net)) = (&args.save_model, &result.encoder) {
        at("output", net.save(path))?;
    }

    let q = &result.quality;
    println!("# points: {}", result.embedding.n());
    println!("# epochs: {}", result.reports.len());
    println!("# knn_preservation: {}", q.knn_preservation);
    if let Some(v) = q.label_agreement {
        println!("# label_agreement: {v}");
    }
    if let Some(v) = q.loss_initial {
        println!("# loss_initial: {v}");
    }
    if let Some(v) = q.loss_final {
        println!("# loss_final: {v}");
    }
    Ok(())
}

fn infer(
    args: &Args,
    config: &RunConfig,
    data: &DataMatrix,
    labels: Option<&[i64]>,
    path: &Path,
) -> Result<(), Failure> {
    let net = at("parametric", EncoderNet::load(path))?;
    let emb = at("parametric", net.embed(data))?;
    write_outputs(args, &emb, labels)?;
    let k = config.k.min(data.n().saturating_sub(1)).max(1);
    println!("# points: {}", emb.n());
    if data.n() > 1 {
        println!(
            "# knn_preservation: {}",
            at("metrics", knn_preservation(data, &emb, k))?
        );
        if let Some(l) = labels {
            println!(
                "# label_agreement: {}",
                at("metrics", label_agreement(&emb, l, k))?
            );
        }
    }
    Ok(())
}

fn write_outputs(
    args: &Args,
    emb: &umap_core::Embedding,
    labels: Option<&[i64]>,
) -> Result<(), Failure> {
    at("output", write_embedding(emb, &args.output))?;
    if let Some(path) = &args.plot {
        at("output", emit_scatter_svg(emb, labels, path))?;
    }
    Ok(())
}

use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use lbla_harness::{
    emit_csv, fit_slope, run_ablation, run_bench, write_records, AblationConfig, BenchSpec,
    Precision, DEFAULT_LENGTHS,
};
use clap::Parser;
use lbla_core::AttnKind;

/// Times softmax and locality-biased linear attention across sequence
/// lengths, or runs the ablation property checks.
#[derive(Parser, Debug)]
#[command(name = "bench-cli", version)]
struct Args {
    /// Comma-separated, strictly increasing sequence lengths.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LENGTHS)]
    lengths: Vec<usize>,

    #[arg(long, default_value_t = 256)]
    d_model: usize,

    #[arg(long, default_value_t = 4)]
    heads: usize,

    /// Comma-separated: softmax, lbla-relu, lbla-exp, lbla-sigmoid, lbla-identity.
    #[arg(long, value_delimiter = ',', default_value = "softmax,lbla-sigmoid")]
    kinds: Vec<String>,

    /// Disable the cosine re-weighting for every LBLA kind.
    #[arg(long)]
    no_reweight: bool,

    #[arg(long, default_value_t = 5)]
    repeats: usize,

    #[arg(long, default_value_t = 1)]
    warmup: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// f64 or f32.
    #[arg(long, default_value = "f64")]
    precision: String,

    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Skip quadratic cells whose score matrix would exceed this many entries.
    #[arg(long, default_value_t = 1 << 28)]
    max_score_cells: usize,

    /// Run the ablation property checks instead of timing.
    #[arg(long)]
    ablation: bool,

    /// With --ablation, exit 1 unless every arm behaves as expected.
    #[arg(long, requires = "ablation")]
    strict: bool,

    #[arg(long, default_value_t = 64)]
    ablation_len: usize,

    #[arg(long, default_value_t = 16)]
    ablation_dim: usize,

    #[arg(long, default_value_t = 16)]
    ablation_instances: usize,
}

fn ablation(args: &Args) -> Result<ExitCode> {
    let report = run_ablation(&AblationConfig {
        seq_len: args.ablation_len,
        d_k: args.ablation_dim,
        instances: args.ablation_instances,
        seed: args.seed,
    })?;
    print!("{report}");
    if args.strict && !report.all_as_expected() {
        eprintln!("ablation: property check failed");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn bench(args: &Args) -> Result<ExitCode> {
    let attn_kinds = args
        .kinds
        .iter()
        .map(|k| {
            k.parse::<AttnKind>()
                .map(|kind| kind.with_reweight(!args.no_reweight))
                .with_context(|| format!("--kinds entry `{k}`"))
        })
        .collect::<Result<Vec<_>>>()?;
    let spec = BenchSpec {
        lengths: args.lengths.clone(),
        d_model: args.d_model,
        heads: args.heads,
        attn_kinds,
        repeats: args.repeats,
        warmup: args.warmup,
        precision: args.precision.parse::<Precision>()?,
        seed: args.seed,
        max_score_cells: args.max_score_cells,
    };
    let outcome = run_bench(&spec)?;
    match &args.out {
        Some(path) => emit_csv(&outcome.records, path)
            .with_context(|| format!("writing {}", path.display()))?,
        None => write_records(&outcome.records, io::stdout().lock())?,
    }
    for cell in &outcome.skipped {
        eprintln!("skipped {} T={}: {}", cell.attn_kind, cell.t, cell.reason);
    }
    for &kind in &spec.attn_kinds {
        if let Ok(slope) = fit_slope(&outcome.of_kind(kind)) {
            eprintln!("slope {kind}: {slope:.3}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> Result<ExitCode> {
    let args = Args::parse();
    if args.ablation {
        ablation(&args)
    } else {
        bench(&args)
    }
}

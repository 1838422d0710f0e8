use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use lbla_core::lbla::{Horizon, KernelKind, LblaCore};
use lbla_core::{
    AttentionParams, AttnKind, HeadAttention, ProjectedTriple, RngState, Scalar, SoftmaxCore,
};

use crate::error::{BenchError, Result};

pub const DEFAULT_LENGTHS: [usize; 5] = [512, 1024, 2048, 4096, 8192];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Precision {
    #[default]
    F64,
    F32,
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::F64 => "f64",
            Precision::F32 => "f32",
        })
    }
}

impl FromStr for Precision {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f64" => Ok(Precision::F64),
            "f32" => Ok(Precision::F32),
            other => Err(BenchError::Spec(format!("unknown precision `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchSpec {
    pub lengths: Vec<usize>,
    pub d_model: usize,
    pub heads: usize,
    pub attn_kinds: Vec<AttnKind>,
    pub repeats: usize,
    pub warmup: usize,
    pub precision: Precision,
    pub seed: u64,
    /// Cells of a quadratic kind with `T² > max_score_cells` are skipped
    /// instead of run.
    pub max_score_cells: usize,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            lengths: DEFAULT_LENGTHS.to_vec(),
            d_model: 256,
            heads: 4,
            attn_kinds: vec![
                AttnKind::Softmax,
                AttnKind::Lbla {
                    kernel: KernelKind::Sigmoid,
                    use_reweight: true,
                },
            ],
            repeats: 5,
            warmup: 1,
            precision: Precision::F64,
            seed: 0,
            max_score_cells: 1 << 28,
        }
    }
}

impl BenchSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(BenchError::Spec(msg));
        if self.lengths.is_empty() {
            return bad("no sequence lengths".into());
        }
        if self.lengths[0] == 0 {
            return bad("sequence lengths must be at least 1".into());
        }
        if let Some(w) = self.lengths.windows(2).find(|w| w[0] >= w[1]) {
            return bad(format!("lengths must be strictly increasing ({} then {})", w[0], w[1]));
        }
        if self.repeats < 3 {
            return bad(format!("repeats must be at least 3, got {}", self.repeats));
        }
        if self.heads == 0 || self.d_model == 0 || !self.d_model.is_multiple_of(self.heads) {
            return bad(format!(
                "d_model {} must be a positive multiple of heads {}",
                self.d_model, self.heads
            ));
        }
        if self.attn_kinds.is_empty() {
            return bad("no attention kinds".into());
        }
        Ok(())
    }
}

/// Timing summary for one `(kind, T)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub attn_kind: AttnKind,
    pub t: usize,
    pub d: usize,
    pub h: usize,
    pub median_ns: u64,
    pub p10_ns: u64,
    pub p90_ns: u64,
    /// Sum of every output entry of the last timed run.
    pub checksum: f64,
}

/// A cell that was not run, with the reason.
#[derive(Clone, Debug, PartialEq)]
pub struct SkippedCell {
    pub attn_kind: AttnKind,
    pub t: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchOutcome {
    pub records: Vec<BenchRecord>,
    pub skipped: Vec<SkippedCell>,
}

impl BenchOutcome {
    /// Records of one kind, in increasing `T`.
    pub fn of_kind(&self, kind: AttnKind) -> Vec<BenchRecord> {
        self.records.iter().filter(|r| r.attn_kind == kind).cloned().collect()
    }
}

fn core_for<T: Scalar>(kind: AttnKind) -> Box<dyn HeadAttention<T>> {
    match kind {
        AttnKind::Softmax => Box::new(SoftmaxCore),
        AttnKind::Lbla {
            kernel,
            use_reweight,
        } => Box::new(LblaCore::new(kernel, use_reweight.then_some(Horizon::SeqLen))),
    }
}

fn is_quadratic(kind: AttnKind) -> bool {
    matches!(kind, AttnKind::Softmax)
}

/// Nearest-rank percentile of sorted samples.
fn percentile(sorted: &[u64], p: f64) -> u64 {
    let idx = ((sorted.len() - 1) as f64 * p).round() as usize;
    sorted[idx]
}

fn median(sorted: &[u64]) -> u64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        let (a, b) = (sorted[n / 2 - 1], sorted[n / 2]);
        a + (b - a) / 2
    }
}

fn time_cell<T: Scalar>(
    heads: &[ProjectedTriple<T>],
    core: &dyn HeadAttention<T>,
    repeats: usize,
    warmup: usize,
) -> Result<(Vec<u64>, f64)> {
    let run = || -> Result<f64> {
        let mut sum = 0.0;
        for head in heads {
            let out = core.attend(&head.q, &head.k, &head.v)?;
            sum += out.as_slice().iter().map(|v| v.as_f64()).sum::<f64>();
        }
        Ok(sum)
    };
    for _ in 0..warmup {
        std::hint::black_box(run()?);
    }
    let mut samples = Vec::with_capacity(repeats);
    let mut checksum = 0.0;
    for _ in 0..repeats {
        let start = Instant::now();
        checksum = std::hint::black_box(run()?);
        samples.push(start.elapsed().as_nanos() as u64);
    }
    Ok((samples, checksum))
}

fn heads_for<T: Scalar>(spec: &BenchSpec, t: usize) -> Result<Vec<ProjectedTriple<T>>> {
    let d = spec.d_model;
    let rng = RngState::new(spec.seed);
    let params = AttentionParams::new(
        rng.fork(1).uniform_tensor(d, d, 1.0 / (d as f64).sqrt()),
        rng.fork(2).uniform_tensor(d, d, 1.0 / (d as f64).sqrt()),
        rng.fork(3).uniform_tensor(d, d, 1.0 / (d as f64).sqrt()),
        rng.fork(4).uniform_tensor(d, d, 1.0 / (d as f64).sqrt()),
        spec.heads,
    )?
    .cast::<T>();
    let x = rng.fork(1000 + t as u64).uniform_tensor(t, d, 1.0).cast::<T>();
    Ok(ProjectedTriple::project(&x, &params)?.split_heads(spec.heads)?)
}

fn run_typed<T: Scalar>(spec: &BenchSpec) -> Result<BenchOutcome> {
    let mut outcome = BenchOutcome::default();
    for &kind in &spec.attn_kinds {
        for &t in &spec.lengths {
            if is_quadratic(kind) && t.saturating_mul(t) > spec.max_score_cells {
                outcome.skipped.push(SkippedCell {
                    attn_kind: kind,
                    t,
                    reason: format!(
                        "{t}x{t} scores exceed the budget of {} cells",
                        spec.max_score_cells
                    ),
                });
                continue;
            }
            // Projections are shared by every kind and are not part of the
            // timed region.
            let heads = heads_for::<T>(spec, t)?;
            let core = core_for::<T>(kind);
            let (mut samples, checksum) = time_cell(&heads, core.as_ref(), spec.repeats, spec.warmup)?;
            samples.sort_unstable();
            outcome.records.push(BenchRecord {
                attn_kind: kind,
                t,
                d: spec.d_model,
                h: spec.heads,
                median_ns: median(&samples),
                p10_ns: percentile(&samples, 0.1),
                p90_ns: percentile(&samples, 0.9),
                checksum,
            });
        }
    }
    Ok(outcome)
}

/// Times every `(kind, T)` cell of `spec` on the current thread.
///
/// Inputs depend only on the seed and `T`, so all kinds see the same
/// projected heads at a given length.
pub fn run_bench(spec: &BenchSpec) -> Result<BenchOutcome> {
    spec.validate()?;
    match spec.precision {
        Precision::F64 => run_typed::<f64>(spec),
        Precision::F32 => run_typed::<f32>(spec),
    }
}

//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use lbla_harness::{fit_slope, run_bench, AblationArm, BenchSpec, Property};
use lbla_core::lbla::{Horizon, KernelKind, LblaCore, LblaOracleCore};
use lbla_core::{
    block_forward, block_forward_with_core, build_reweight, cosine_weight, lbla_attention_weights,
    lbla_backward, lbla_forward, lbla_oracle, load_weights, relative_error, save_weights, AttnKind,
    ConformerBlockParams, HeadAttention, ModelConfig, RngState, SoftmaxCore, Tensor,
};

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed < limit
}

fn oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let mut rng = RngState::new(1);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for _round in 0..9 {
        for t in [1, 2, 3, 17, 64] {
            for d_k in [1, 4, 16] {
                for kernel in KernelKind::ALL {
                    for reweight in [true, false] {
                        let q = rng.uniform_tensor(t, d_k, 2.0);
                        let k = rng.uniform_tensor(t, d_k, 2.0);
                        let v = rng.uniform_tensor(t, d_k, 2.0);
                        let rw = build_reweight(t, t).unwrap();
                        let rw = reweight.then_some(&rw);
                        let fast = lbla_forward(&q, &k, &v, kernel, rw).unwrap();
                        let slow = lbla_oracle(&q, &k, &v, kernel, rw).unwrap();
                        worst = worst.max(relative_error(&fast, &slow).unwrap());
                        count += 1;
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    Verdict::new(
        count >= 1000 && worst < 1e-10 && within(elapsed, Duration::from_secs(60)),
        format!("{count} instances, max relative error {worst:.3e}, {elapsed:.2?}"),
    )
}

fn ptolemy_identity() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for t in [1, 2, 7, 16, 64, 256] {
        let rw = build_reweight(t, t).unwrap();
        let (cos, sin) = (rw.cos_factors(), rw.sin_factors());
        for i in 0..t {
            for j in 0..t {
                let rebuilt = cos[i] * cos[j] + sin[i] * sin[j];
                worst = worst.max((rebuilt - cosine_weight(i, j, t)).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    Verdict::new(
        worst < 1e-12 && within(elapsed, Duration::from_secs(1)),
        format!("max reconstruction error {worst:.3e}, {elapsed:.2?}"),
    )
}

fn weighted_loss(q: &Tensor, k: &Tensor, v: &Tensor, kernel: KernelKind, g: &Tensor) -> f64 {
    let rw = build_reweight(q.rows(), q.rows()).unwrap();
    let out = lbla_forward(q, k, v, kernel, Some(&rw)).unwrap();
    out.as_slice().iter().zip(g.as_slice()).map(|(a, b)| a * b).sum()
}

fn gradient_check() -> Verdict {
    let start = Instant::now();
    let mut rng = RngState::new(3);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for n in 0..100 {
        let kernel = if n % 2 == 0 { KernelKind::Sigmoid } else { KernelKind::Exponential };
        let t = 1 + rng.below(8);
        let d_k = 1 + rng.below(4);
        let inputs = [
            rng.uniform_tensor(t, d_k, 1.0),
            rng.uniform_tensor(t, d_k, 1.0),
            rng.uniform_tensor(t, d_k, 1.0),
        ];
        let g = rng.uniform_tensor(t, d_k, 1.0);
        let rw = build_reweight(t, t).unwrap();
        let grads = lbla_backward(&inputs[0], &inputs[1], &inputs[2], kernel, Some(&rw), &g).unwrap();
        for (which, analytic) in [&grads.q, &grads.k, &grads.v].into_iter().enumerate() {
            for idx in 0..t * d_k {
                let mut x = inputs.clone();
                x[which].as_mut_slice()[idx] += h;
                let plus = weighted_loss(&x[0], &x[1], &x[2], kernel, &g);
                x[which].as_mut_slice()[idx] -= 2.0 * h;
                let minus = weighted_loss(&x[0], &x[1], &x[2], kernel, &g);
                let numeric = (plus - minus) / (2.0 * h);
                let a = analytic.as_slice()[idx];
                worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-4));
            }
        }
    }
    let elapsed = start.elapsed();
    Verdict::new(
        worst < 1e-4 && within(elapsed, Duration::from_secs(60)),
        format!("100 instances, max relative error {worst:.3e}, {elapsed:.2?}"),
    )
}

fn complexity_separation() -> Verdict {
    let start = Instant::now();
    let lbla = AttnKind::Lbla {
        kernel: KernelKind::Sigmoid,
        use_reweight: true,
    };
    let spec = BenchSpec {
        attn_kinds: vec![AttnKind::Softmax, lbla],
        ..BenchSpec::default()
    };
    let outcome = match run_bench(&spec) {
        Ok(o) => o,
        Err(e) => return Verdict::new(false, format!("benchmark failed: {e}")),
    };
    let soft = outcome.of_kind(AttnKind::Softmax);
    let lin = outcome.of_kind(lbla);
    let (Ok(s_soft), Ok(s_lin)) = (fit_slope(&soft), fit_slope(&lin)) else {
        return Verdict::new(false, format!("too few points, skipped: {:?}", outcome.skipped));
    };
    let last = |rs: &[lbla_harness::BenchRecord]| rs.iter().find(|r| r.t == 8192).map(|r| r.median_ns);
    let (Some(soft_8k), Some(lin_8k)) = (last(&soft), last(&lin)) else {
        return Verdict::new(false, "no T=8192 measurement");
    };
    Verdict::new(
        s_lin <= 1.25 && s_soft >= 1.75 && s_soft - s_lin >= 0.5 && lin_8k < soft_8k,
        format!(
            "slope lbla {s_lin:.3}, softmax {s_soft:.3}, gap {:.3}; T=8192 median lbla {:.1} ms vs softmax {:.1} ms; {:.1?}",
            s_soft - s_lin,
            lin_8k as f64 / 1e6,
            soft_8k as f64 / 1e6,
            start.elapsed()
        ),
    )
}

fn convexity() -> Verdict {
    let mut rng = RngState::new(5);
    let kernels = [KernelKind::Relu, KernelKind::Exponential, KernelKind::Sigmoid];
    let mut min_entry = f64::INFINITY;
    let mut worst_sum: f64 = 0.0;
    let mut degenerate_rows = 0;
    for n in 0..200 {
        let kernel = kernels[n % 3];
        let t = 1 + rng.below(64);
        let d_k = 1 + rng.below(16);
        let m = t + rng.below(t + 1);
        let q = rng.uniform_tensor(t, d_k, 2.0);
        let k = rng.uniform_tensor(t, d_k, 2.0);
        let rw = build_reweight(t, m).unwrap();
        let w = lbla_attention_weights(&q, &k, kernel, Some(&rw)).unwrap();
        for i in 0..t {
            let row = w.row(i);
            // A ReLU query with no positive coordinate scores zero against
            // every key; such a row has no weights to normalize.
            if row.iter().any(|x| x.is_nan()) {
                degenerate_rows += 1;
                continue;
            }
            min_entry = row.iter().copied().fold(min_entry, f64::min);
            worst_sum = worst_sum.max((row.iter().sum::<f64>() - 1.0).abs());
        }
    }
    Verdict::new(
        min_entry >= 0.0 && worst_sum < 1e-12,
        format!(
            "200 instances, min weight {min_entry:.3e}, max |row sum - 1| {worst_sum:.3e}, {degenerate_rows} all-zero ReLU rows skipped"
        ),
    )
}

fn locality_bias() -> (Verdict, String) {
    let mut weights_ok = true;
    for m in [1, 2, 7, 16, 64, 256] {
        weights_ok &= (cosine_weight(0, 0, m) - 1.0).abs() < 1e-12;
        weights_ok &= cosine_weight(m, 0, m).abs() < 1e-12 && cosine_weight(0, m, m).abs() < 1e-12;
        for dist in 1..=m {
            weights_ok &= cosine_weight(dist, 0, m) < cosine_weight(dist - 1, 0, m);
        }
    }

    let t = 32;
    let d = 8;
    let mut rng = RngState::new(6);
    let (q, k, v) = (
        rng.uniform_tensor(t, d, 1.0),
        rng.uniform_tensor(t, d, 1.0),
        rng.uniform_tensor(t, d, 1.0),
    );
    let lbla = LblaCore::new(KernelKind::Sigmoid, Some(Horizon::SeqLen));
    let gap = |order: &[usize], core: &dyn HeadAttention<f64>| -> f64 {
        let out = core.attend(&q, &k, &v).unwrap();
        let moved = core
            .attend(
                &q.permute_rows(order).unwrap(),
                &k.permute_rows(order).unwrap(),
                &v.permute_rows(order).unwrap(),
            )
            .unwrap();
        moved.max_abs_diff(&out.permute_rows(order).unwrap()).unwrap()
    };
    let reversed: Vec<usize> = (0..t).rev().collect();
    let shuffled = rng.permutation(t);
    let lbla_reversal = gap(&reversed, &lbla);
    let softmax_reversal = gap(&reversed, &SoftmaxCore);
    let softmax_shuffle = gap(&shuffled, &SoftmaxCore);
    let lbla_shuffle = gap(&shuffled, &lbla);

    let verdict = Verdict::new(
        weights_ok && lbla_reversal > 1e-6 && softmax_reversal <= 1e-12 && softmax_shuffle <= 1e-12,
        format!(
            "weights monotone {weights_ok}; reversal gap lbla {lbla_reversal:.3e} (needs > 1e-6), softmax {softmax_reversal:.3e}; softmax shuffle gap {softmax_shuffle:.3e}"
        ),
    );
    let info = format!(
        "cosine re-weighting depends only on |i - j|, so reversal commutes with it; a random shuffle moves lbla by {lbla_shuffle:.3e}"
    );
    (verdict, info)
}

fn ablation_cli() -> Verdict {
    let out = match Command::new(env!("CARGO_BIN_EXE_bench-cli"))
        .args(["--ablation", "--strict"])
        .output()
    {
        Ok(o) => o,
        Err(e) => return Verdict::new(false, format!("could not run bench-cli: {e}")),
    };
    let stdout = String::from_utf8_lossy(&out.stdout);
    let flagged = |arm: AblationArm, property: Property| {
        stdout.lines().any(|l| {
            let cols: Vec<&str> = l.split_whitespace().collect();
            cols.len() >= 4
                && cols[0] == arm.name()
                && cols[1] == property.name()
                && cols[2] == "FAIL"
                && cols[3] == "expected"
        })
    };
    let full_ok = Property::ALL.into_iter().all(|p| {
        stdout.lines().any(|l| {
            let cols: Vec<&str> = l.split_whitespace().collect();
            cols.len() >= 3 && cols[0] == "full" && cols[1] == p.name() && cols[2] == "PASS"
        })
    });
    let each_flagged = AblationArm::ALL
        .into_iter()
        .filter_map(|arm| arm.broken_property().map(|p| (arm, p)))
        .all(|(arm, p)| flagged(arm, p));
    Verdict::new(
        out.status.success() && full_ok && each_flagged,
        format!(
            "exit {:?}, full arm all PASS {full_ok}, every ablation flags its property {each_flagged}",
            out.status.code()
        ),
    )
}

fn config(d_model: usize, heads: usize, attn_kind: AttnKind) -> ModelConfig {
    ModelConfig {
        num_layers: 2,
        d_model,
        d_ff: 2 * d_model,
        heads,
        conv_kernel: 5,
        attn_kind,
        reweight_horizon: Horizon::SeqLen,
    }
}

fn all_attn_kinds() -> Vec<AttnKind> {
    let mut kinds = vec![AttnKind::Softmax];
    for kernel in KernelKind::ALL {
        kinds.push(AttnKind::Lbla { kernel, use_reweight: true });
        kinds.push(AttnKind::Lbla { kernel, use_reweight: false });
    }
    kinds
}

fn conformer_block() -> Verdict {
    let mut rng = RngState::new(8);
    let sigmoid = AttnKind::Lbla {
        kernel: KernelKind::Sigmoid,
        use_reweight: true,
    };

    let cfg = config(16, 4, sigmoid);
    let params = ConformerBlockParams::init(&cfg, &mut rng.fork(1)).unwrap();
    let x = rng.uniform_tensor(13, 16, 1.0);
    let shape_ok = block_forward(&x, &params, &cfg).unwrap().shape() == (13, 16);

    let single_ok = all_attn_kinds().into_iter().all(|kind| {
        let cfg = config(16, 4, kind);
        let p = ConformerBlockParams::init(&cfg, &mut rng.fork(2)).unwrap();
        let y = block_forward(&rng.fork(3).uniform_tensor(1, 16, 5.0), &p, &cfg);
        matches!(y, Ok(y) if y.shape() == (1, 16) && y.is_finite())
    });

    let kinds = all_attn_kinds();
    let mut finite = 0;
    for n in 0..200 {
        let d = [8, 16, 32][rng.below(3)];
        let h = [1, 2, 4][rng.below(3)];
        let t = [1, 2, 17, 64][rng.below(4)];
        let cfg = config(d, h, kinds[n % kinds.len()]);
        let p = ConformerBlockParams::init(&cfg, &mut rng.fork(100 + n as u64)).unwrap();
        let x = rng.uniform_tensor(t, d, 5.0);
        if matches!(block_forward(&x, &p, &cfg), Ok(y) if y.is_finite()) {
            finite += 1;
        }
    }

    let x = rng.uniform_tensor(24, 16, 1.0);
    let linear = block_forward(&x, &params, &cfg).unwrap();
    let oracle_core = LblaOracleCore(LblaCore::new(KernelKind::Sigmoid, Some(Horizon::SeqLen)));
    let via_oracle = block_forward_with_core(&x, &params, &cfg, &oracle_core).unwrap();
    let oracle_gap = linear.max_abs_diff(&via_oracle).unwrap();

    let blocks = ConformerBlockParams::init_stack(&cfg, cfg.num_layers, 21).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    save_weights(&path, &blocks, &cfg).unwrap();
    let bits = |bs: &[ConformerBlockParams]| -> Vec<(String, Vec<u64>)> {
        bs.iter()
            .flat_map(|b| {
                b.tensors()
                    .into_iter()
                    .map(|(name, _, data)| (name, data.iter().map(|v| v.to_bits()).collect()))
                    .collect::<Vec<_>>()
            })
            .collect()
    };
    let round_trip_ok = match load_weights(&path) {
        Ok((loaded_cfg, loaded)) => loaded_cfg == cfg && bits(&loaded) == bits(&blocks),
        Err(_) => false,
    };

    Verdict::new(
        shape_ok && single_ok && finite == 200 && oracle_gap < 1e-9 && round_trip_ok,
        format!(
            "shape {shape_ok}, T=1 all kinds {single_ok}, finite {finite}/200, oracle-in-block gap {oracle_gap:.3e}, round trip {round_trip_ok}"
        ),
    )
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |n: usize, name: &str, v: Verdict| {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {n} {tag} {name}: {}", v.detail);
        if !v.pass {
            failures += 1;
        }
    };
    report(1, "oracle equivalence", oracle_equivalence());
    report(2, "ptolemy identity", ptolemy_identity());
    report(3, "gradient correctness", gradient_check());
    report(4, "complexity separation", complexity_separation());
    report(5, "convexity", convexity());
    let (locality, info) = locality_bias();
    report(6, "locality bias", locality);
    println!("  note: {info}");
    report(7, "ablation structure", ablation_cli());
    report(8, "conformer block", conformer_block());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criterion check(s) failed");
        ExitCode::FAILURE
    }
}

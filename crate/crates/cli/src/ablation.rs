use std::fmt;

use lbla_core::lbla::KernelKind;
use lbla_core::{build_reweight, matmul, normalize_rows, proximity_matrix, RngState, Tensor};

use crate::error::{BenchError, Result};

/// Permuted output must differ from the permuted original by more than this
/// for attention to count as position sensitive.
const POSITION_GAP: f64 = 1e-6;
const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AblationConfig {
    pub seq_len: usize,
    pub d_k: usize,
    pub instances: usize,
    pub seed: u64,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            seq_len: 64,
            d_k: 16,
            instances: 16,
            seed: 0,
        }
    }
}

impl AblationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=256).contains(&self.seq_len) {
            return Err(BenchError::Spec(format!(
                "ablation length must be in 2..=256, got {}",
                self.seq_len
            )));
        }
        if !(1..=64).contains(&self.d_k) {
            return Err(BenchError::Spec(format!(
                "ablation width must be in 1..=64, got {}",
                self.d_k
            )));
        }
        if self.instances == 0 {
            return Err(BenchError::Spec("ablation needs at least one instance".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Property {
    /// Every proximity score is `≥ 0`.
    NonNegativity,
    /// Every attention row sums to 1.
    RowSum,
    /// Permuting the sequence does not simply permute the output.
    PositionSensitivity,
}

impl Property {
    pub const ALL: [Property; 3] = [
        Property::NonNegativity,
        Property::RowSum,
        Property::PositionSensitivity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::NonNegativity => "non-negativity",
            Property::RowSum => "row-sum",
            Property::PositionSensitivity => "position-sensitivity",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AblationArm {
    Full,
    NoReweight,
    NoKernel,
    NoNormalization,
}

impl AblationArm {
    pub const ALL: [AblationArm; 4] = [
        AblationArm::Full,
        AblationArm::NoReweight,
        AblationArm::NoKernel,
        AblationArm::NoNormalization,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationArm::Full => "full",
            AblationArm::NoReweight => "no-reweight",
            AblationArm::NoKernel => "no-kernel",
            AblationArm::NoNormalization => "no-normalization",
        }
    }

    fn kernel(self) -> KernelKind {
        match self {
            AblationArm::NoKernel => KernelKind::Identity,
            _ => KernelKind::Sigmoid,
        }
    }

    fn reweight(self) -> bool {
        self != AblationArm::NoReweight
    }

    fn normalize(self) -> bool {
        self != AblationArm::NoNormalization
    }

    /// The property this arm is expected to lose, if any.
    pub fn broken_property(self) -> Option<Property> {
        match self {
            AblationArm::Full => None,
            AblationArm::NoReweight => Some(Property::PositionSensitivity),
            AblationArm::NoKernel => Some(Property::NonNegativity),
            AblationArm::NoNormalization => Some(Property::RowSum),
        }
    }

    /// `Some(true)` if the property must hold, `Some(false)` if it must
    /// break, `None` if this arm makes no claim about it.
    fn expectation(self, property: Property) -> Option<bool> {
        match self.broken_property() {
            None => Some(true),
            Some(p) if p == property => Some(false),
            Some(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropertyCheck {
    pub property: Property,
    pub holds: bool,
    pub expected: Option<bool>,
    /// Worst value seen across instances, in the property's own units.
    pub worst: f64,
}

impl PropertyCheck {
    pub fn as_expected(&self) -> bool {
        self.expected.is_none_or(|e| e == self.holds)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArmReport {
    pub arm: AblationArm,
    pub checks: Vec<PropertyCheck>,
}

impl ArmReport {
    pub fn check(&self, property: Property) -> &PropertyCheck {
        self.checks
            .iter()
            .find(|c| c.property == property)
            .expect("every property is checked")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationReport {
    pub config: AblationConfig,
    pub arms: Vec<ArmReport>,
}

impl AblationReport {
    pub fn arm(&self, arm: AblationArm) -> &ArmReport {
        self.arms.iter().find(|a| a.arm == arm).expect("every arm is run")
    }

    /// True when the full arm keeps every property and each ablation loses
    /// the one it targets.
    pub fn all_as_expected(&self) -> bool {
        self.arms.iter().all(|a| a.checks.iter().all(PropertyCheck::as_expected))
    }
}

impl fmt::Display for AblationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.config;
        writeln!(
            f,
            "ablation: T={} d_k={} instances={} seed={}",
            c.seq_len, c.d_k, c.instances, c.seed
        )?;
        for arm in &self.arms {
            for check in &arm.checks {
                let verdict = if check.holds { "PASS" } else { "FAIL" };
                let note = match check.expected {
                    Some(e) if e == check.holds => "expected",
                    Some(_) => "UNEXPECTED",
                    None => "-",
                };
                writeln!(
                    f,
                    "{:<17} {:<21} {verdict}  {note:<10}  worst={:e}",
                    arm.arm.name(),
                    check.property.name(),
                    check.worst
                )?;
            }
        }
        Ok(())
    }
}

struct Instance {
    q: Tensor,
    k: Tensor,
    v: Tensor,
    order: Vec<usize>,
}

fn draw(rng: &mut RngState, cfg: &AblationConfig) -> Instance {
    let t = cfg.seq_len;
    let reversed: Vec<usize> = (0..t).rev().collect();
    // Reversal commutes with any distance-only re-weighting, so it would not
    // reveal position sensitivity.
    let order = loop {
        let p = rng.permutation(t);
        if p != reversed && p.iter().enumerate().any(|(i, &j)| i != j) {
            break p;
        }
    };
    Instance {
        q: rng.uniform_tensor(t, cfg.d_k, 1.0),
        k: rng.uniform_tensor(t, cfg.d_k, 1.0),
        v: rng.uniform_tensor(t, cfg.d_k, 1.0),
        order,
    }
}

fn weights(arm: AblationArm, q: &Tensor, k: &Tensor) -> Result<(Tensor, Tensor)> {
    let rw = if arm.reweight() {
        Some(build_reweight(q.rows(), q.rows())?)
    } else {
        None
    };
    let p = proximity_matrix(q, k, arm.kernel(), rw.as_ref())?;
    let w = if arm.normalize() {
        normalize_rows(&p, 0.0)
    } else {
        p.clone()
    };
    Ok((p, w))
}

/// Largest deviation of a row sum from 1, relative to the row's mass.
fn row_sum_deviation(w: &Tensor) -> f64 {
    (0..w.rows())
        .map(|i| {
            let row = w.row(i);
            let sum: f64 = row.iter().sum();
            let mass: f64 = row.iter().map(|x| x.abs()).sum();
            let dev = (sum - 1.0).abs() / mass.max(1.0);
            if dev.is_finite() {
                dev
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

fn run_arm(arm: AblationArm, instances: &[Instance]) -> Result<ArmReport> {
    let mut min_score = f64::INFINITY;
    let mut max_row_dev: f64 = 0.0;
    let mut min_gap = f64::INFINITY;
    for inst in instances {
        let (p, w) = weights(arm, &inst.q, &inst.k)?;
        min_score = p.as_slice().iter().copied().fold(min_score, f64::min);
        max_row_dev = max_row_dev.max(row_sum_deviation(&w));

        let out = matmul(&w, &inst.v)?;
        let (_, w_perm) = weights(
            arm,
            &inst.q.permute_rows(&inst.order)?,
            &inst.k.permute_rows(&inst.order)?,
        )?;
        let out_perm = matmul(&w_perm, &inst.v.permute_rows(&inst.order)?)?;
        min_gap = min_gap.min(out_perm.max_abs_diff(&out.permute_rows(&inst.order)?)?);
    }
    let checks = Property::ALL
        .into_iter()
        .map(|property| {
            let (holds, worst) = match property {
                Property::NonNegativity => (min_score >= 0.0, min_score),
                Property::RowSum => (max_row_dev <= ROW_SUM_TOL, max_row_dev),
                Property::PositionSensitivity => (min_gap > POSITION_GAP, min_gap),
            };
            PropertyCheck {
                property,
                holds,
                expected: arm.expectation(property),
                worst,
            }
        })
        .collect();
    Ok(ArmReport { arm, checks })
}

/// Runs the property suite on the full mechanism and on each ablated arm,
/// all over the same seeded instances.
pub fn run_ablation(cfg: &AblationConfig) -> Result<AblationReport> {
    cfg.validate()?;
    let mut rng = RngState::new(cfg.seed);
    let instances: Vec<Instance> = (0..cfg.instances).map(|_| draw(&mut rng, cfg)).collect();
    let arms = AblationArm::ALL
        .into_iter()
        .map(|arm| run_arm(arm, &instances))
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationReport { config: *cfg, arms })
}

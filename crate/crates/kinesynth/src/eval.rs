//! The augmentation experiment: five-fold cross-validation under real-only
//! and augmented training, classification metrics, and paired t-tests.
//!
//! To avoid leakage, the augmented condition retrains the GAN per fold on
//! that fold's training data only; synthetic samples never enter a test set
//! (enforced on the trials' provenance tags).

use crate::cgan::{self, GanConfig};
use crate::classifier::{predict, train_classifier, FcnConfig};
use crate::data::{Dataset, LabelMode, Provenance, SplitPlan, SplitStrategy};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Square count matrix; rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        Self { n: n_classes, counts: vec![0; n_classes * n_classes] }
    }

    pub fn from_predictions(truth: &[usize], predicted: &[usize], n_classes: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::dim("confusion", format!("{} truths vs {} predictions", truth.len(), predicted.len())));
        }
        let mut cm = Self::new(n_classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            cm.add(t, p)?;
        }
        Ok(cm)
    }

    pub fn add(&mut self, truth: usize, predicted: usize) -> Result<()> {
        if truth >= self.n || predicted >= self.n {
            return Err(Error::Index(format!("({truth}, {predicted}) outside {0}x{0} matrix", self.n)));
        }
        self.counts[truth * self.n + predicted] += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.n != other.n {
            return Err(Error::dim("confusion", format!("{} vs {} classes", self.n, other.n)));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.n
    }

    pub fn count(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.n + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.n).map(|i| self.counts[i * self.n..(i + 1) * self.n].iter().sum()).collect()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.n).map(|r| r.to_vec()).collect()
    }
}

/// The four Table-style metrics, support-weighted over classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

/// Per-class precision/recall/F1 aggregated by support-weighted averaging;
/// zero-denominator classes contribute zero. Weighted recall equals
/// accuracy exactly by construction.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricSet> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Degenerate("empty confusion matrix".to_string()));
    }
    let n = cm.n_classes();
    let row_sums = cm.row_sums();
    let col_sums: Vec<u64> = (0..n).map(|j| (0..n).map(|i| cm.count(i, j)).sum()).collect();
    let (mut precision, mut f1) = (0.0, 0.0);
    let mut trace = 0u64;
    for c in 0..n {
        let tp = cm.count(c, c) as f64;
        trace += cm.count(c, c);
        let p = if col_sums[c] == 0 { 0.0 } else { tp / col_sums[c] as f64 };
        let r = if row_sums[c] == 0 { 0.0 } else { tp / row_sums[c] as f64 };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        let weight = row_sums[c] as f64 / total as f64;
        precision += weight * p;
        f1 += weight * f;
    }
    let accuracy = trace as f64 / total as f64;
    // Support-weighted recall telescopes to trace/total; computing it that
    // way keeps the recall == accuracy identity bit-exact.
    Ok(MetricSet { precision, recall: accuracy, f1, accuracy })
}

// --- Student-t machinery for the paired test ---------------------------------

/// Lanczos approximation of ln Gamma (g = 7, 9 coefficients), valid for
/// x > 0 at double precision.
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        return std::f64::consts::PI.ln() - (std::f64::consts::PI * x).sin().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const FPMIN: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=300 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 3e-16 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let bt = (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        bt * beta_cf(a, b, x) / a
    } else {
        1.0 - bt * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-tailed p-value for Student's t with `dof` degrees of freedom:
/// `P(|T| >= |t|) = I_{v/(v+t^2)}(v/2, 1/2)`.
pub fn student_t_two_tailed_p(t: f64, dof: usize) -> f64 {
    let v = dof as f64;
    reg_inc_beta(v / 2.0, 0.5, v / (v + t * t))
}

/// Result of a paired t-test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub dof: usize,
}

/// Paired t-test on per-fold values: `t = mean(d) / (sd(d) / sqrt(n))` with
/// sample standard deviation (n - 1 denominator), `d = a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::dim("paired_t_test", format!("{} vs {} values", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::param("n", format!("need at least 2 pairs, got {n}")));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Err(Error::Degenerate("zero-variance differences; t statistic undefined".to_string()));
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    Ok(TTest { t, p: student_t_two_tailed_p(t, n - 1), dof: n - 1 })
}

// --- The experiment harness ---------------------------------------------------

/// Training composition for one cross-validation sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    RealOnly,
    Augmented,
}

/// Configuration shared by both conditions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub label_mode: LabelMode,
    pub gan: GanConfig,
    pub fcn: FcnConfig,
}

/// Metrics for one condition across all folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub per_fold: Vec<MetricSet>,
    pub mean: MetricSet,
    pub std: MetricSet,
    /// Pooled confusion counts over all test folds.
    pub confusion: Vec<Vec<u64>>,
    pub train_sizes: Vec<usize>,
    pub test_sizes: Vec<usize>,
}

/// Outcome of one paired comparison; `test` is absent when the differences
/// were degenerate (e.g. identical metrics in every fold).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedOutcome {
    pub metric: String,
    pub test: Option<TTest>,
    pub note: Option<String>,
}

/// Full report of the two-condition experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub schema_version: u32,
    pub label_mode: LabelMode,
    pub n_classes: usize,
    pub n_folds: usize,
    pub strategy: SplitStrategy,
    pub split_seed: u64,
    pub real_only: ConditionReport,
    pub augmented: ConditionReport,
    /// Paired t-tests on per-fold values, differences taken as
    /// (augmented - real_only).
    pub paired_tests: Vec<PairedOutcome>,
    pub gan_config: GanConfig,
    pub fcn_config: FcnConfig,
}

fn mean_std(values: &[MetricSet]) -> (MetricSet, MetricSet) {
    let n = values.len() as f64;
    let pick = |f: fn(&MetricSet) -> f64| -> (f64, f64) {
        let mean = values.iter().map(&f).sum::<f64>() / n;
        let var = values.iter().map(|m| (f(m) - mean) * (f(m) - mean)).sum::<f64>() / (n - 1.0).max(1.0);
        (mean, var.sqrt())
    };
    let (pm, ps) = pick(|m| m.precision);
    let (rm, rs) = pick(|m| m.recall);
    let (fm, fs) = pick(|m| m.f1);
    let (am, as_) = pick(|m| m.accuracy);
    (
        MetricSet { precision: pm, recall: rm, f1: fm, accuracy: am },
        MetricSet { precision: ps, recall: rs, f1: fs, accuracy: as_ },
    )
}

fn fold_context<T>(fold: usize, step: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::NonFiniteLoss { context, detail } => {
            Error::NonFiniteLoss { context: format!("fold {fold}, {step}: {context}"), detail }
        }
        other => Error::Parameter {
            name: "fold",
            detail: format!("fold {fold}, {step}: {other}"),
        },
    })
}

/// Run five-fold cross-validation under one training composition.
///
/// In the augmented condition a GAN is trained per fold on that fold's
/// training data only, and contributes synthetic trials numbering the full
/// real dataset, distributed per class like the real data. The training set
/// therefore grows from 4/5 N to 4/5 N + N, a 125% increase.
pub fn run_experiment(
    dataset: &Dataset,
    plan: &SplitPlan,
    cfg: &ExperimentConfig,
    condition: Condition,
) -> Result<ConditionReport> {
    if plan.assignments.len() != dataset.len() {
        return Err(Error::dim(
            "run_experiment",
            format!("plan covers {} trials, dataset has {}", plan.assignments.len(), dataset.len()),
        ));
    }
    let mode = cfg.label_mode;
    let n_classes = cfg.fcn.n_classes;
    let full_counts = dataset.condition_counts();
    let full_size = dataset.len();

    let mut per_fold = Vec::with_capacity(plan.n_folds);
    let mut pooled = ConfusionMatrix::new(n_classes);
    let mut train_sizes = Vec::new();
    let mut test_sizes = Vec::new();

    for fold in 0..plan.n_folds {
        let train_idx = plan.train_indices(fold);
        let test_idx = plan.test_indices(fold);
        let train_real = dataset.subset(&train_idx);
        let test_set = dataset.subset(&test_idx);
        // Synthetic data must never reach a test set.
        assert!(
            test_set.trials().iter().all(|t| matches!(t.provenance, Provenance::Real)),
            "synthetic trial leaked into test fold {fold}"
        );

        let train_set = match condition {
            Condition::RealOnly => train_real,
            Condition::Augmented => {
                let gan_cfg = GanConfig { seed: cfg.gan.seed.wrapping_add(fold as u64), ..cfg.gan.clone() };
                let (model, _) = fold_context(fold, "gan training", cgan::train(&train_real, &gan_cfg))?;
                let mut synthetic = Vec::with_capacity(full_size);
                for (class, &count) in full_counts.iter().enumerate() {
                    let gen_seed = gan_cfg.seed.wrapping_add(0x5eed).wrapping_add(class as u64);
                    synthetic.extend(fold_context(
                        fold,
                        "generation",
                        cgan::generate(&model, class, count, gen_seed, true),
                    )?);
                }
                let augmented = train_real.extended(synthetic);
                // "Equal in size to the real dataset": 4/5 N real + N synthetic.
                assert_eq!(
                    augmented.len(),
                    train_idx.len() + full_size,
                    "augmented training size must equal real train + full dataset"
                );
                augmented
            }
        };
        train_sizes.push(train_set.len());
        test_sizes.push(test_idx.len());

        let fcn_cfg = FcnConfig { seed: cfg.fcn.seed.wrapping_add(fold as u64), ..cfg.fcn.clone() };
        let (fcn, _log) = fold_context(fold, "classifier training", train_classifier(&train_set, mode, &fcn_cfg))?;
        let (preds, _probs) = fold_context(fold, "prediction", predict(&fcn, test_set.trials()))?;
        let truth = test_set.labels(mode);
        let cm = ConfusionMatrix::from_predictions(&truth, &preds, n_classes)?;
        per_fold.push(metrics(&cm)?);
        pooled.merge(&cm)?;
    }
    let (mean, std) = mean_std(&per_fold);
    Ok(ConditionReport {
        condition,
        per_fold,
        mean,
        std,
        confusion: pooled.rows(),
        train_sizes,
        test_sizes,
    })
}

/// Run both conditions on shared folds and classifier seeds, and compare
/// them with paired t-tests.
pub fn compare_conditions(dataset: &Dataset, plan: &SplitPlan, cfg: &ExperimentConfig) -> Result<CvReport> {
    let real_only = run_experiment(dataset, plan, cfg, Condition::RealOnly)?;
    let augmented = run_experiment(dataset, plan, cfg, Condition::Augmented)?;
    let mut paired_tests = Vec::new();
    for (name, f) in [
        ("precision", (|m: &MetricSet| m.precision) as fn(&MetricSet) -> f64),
        ("recall", |m| m.recall),
        ("f1", |m| m.f1),
        ("accuracy", |m| m.accuracy),
    ] {
        let a: Vec<f64> = augmented.per_fold.iter().map(&f).collect();
        let b: Vec<f64> = real_only.per_fold.iter().map(&f).collect();
        let outcome = match paired_t_test(&a, &b) {
            Ok(test) => PairedOutcome { metric: name.to_string(), test: Some(test), note: None },
            Err(Error::Degenerate(msg)) => {
                PairedOutcome { metric: name.to_string(), test: None, note: Some(msg) }
            }
            Err(other) => return Err(other),
        };
        paired_tests.push(outcome);
    }
    Ok(CvReport {
        schema_version: 1,
        label_mode: cfg.label_mode,
        n_classes: cfg.fcn.n_classes,
        n_folds: plan.n_folds,
        strategy: plan.strategy,
        split_seed: plan.seed,
        real_only,
        augmented,
        paired_tests,
        gan_config: cfg.gan.clone(),
        fcn_config: cfg.fcn.clone(),
    })
}

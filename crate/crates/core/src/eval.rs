//! Metrics, confusion matrices, test-time augmentation and the
//! experiment harnesses built on top of the learner.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::{self, derive_seed, ClassSampling, GenConfig, LabeledSample};
use crate::grid::GridDiagram;
use crate::knot_table::{ClassLabel, ClassRegistry};
use crate::learner::{self, argmax, Classifier, EpochRecord, NetworkError, TrainConfig, TrainData, TrainError};
use crate::moves::{self, MoveSet};
use crate::scalar::Scalar;

/// Cells strictly above this count are drawn as set when binarizing.
pub const DEFAULT_BINARIZE_THRESHOLD: u64 = 40;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no samples to evaluate")]
    EmptyInput,
    #[error("{predictions} predictions but {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("class index {index} out of range for {classes} classes")]
    OutOfRange { index: usize, classes: usize },
    #[error("invalid evaluation parameters: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Generator(#[from] generator::GenError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    size: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(size: usize) -> Self {
        ConfusionMatrix {
            size,
            counts: vec![0; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Samples of true class `truth` predicted as `predicted`.
    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.size + predicted]
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i * self.size..(i + 1) * self.size].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        (0..self.size).map(|i| self.get(i, j)).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.size).map(|i| self.get(i, i)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn binarize(&self, threshold: u64) -> Vec<Vec<bool>> {
        (0..self.size)
            .map(|i| (0..self.size).map(|j| self.get(i, j) > threshold).collect())
            .collect()
    }

    pub fn to_csv(&self, classes: &[ClassLabel]) -> String {
        let mut s = String::from("true\\pred");
        for c in classes {
            write!(s, ",{c}").unwrap();
        }
        s.push('\n');
        for (i, c) in classes.iter().enumerate() {
            write!(s, "{c}").unwrap();
            for j in 0..self.size {
                write!(s, ",{}", self.get(i, j)).unwrap();
            }
            s.push('\n');
        }
        s
    }

    /// Black/white picture of the binarized matrix, one square per cell.
    pub fn to_svg(&self, threshold: u64) -> String {
        let cell = 12;
        let side = cell * self.size;
        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{side}\" height=\"{side}\">\n\
             <rect width=\"{side}\" height=\"{side}\" fill=\"black\"/>\n"
        );
        for (i, row) in self.binarize(threshold).iter().enumerate() {
            for (j, &on) in row.iter().enumerate() {
                if on {
                    writeln!(
                        s,
                        "<rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" fill=\"white\"/>",
                        j * cell,
                        i * cell
                    )
                    .unwrap();
                }
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

fn check_inputs(predictions: &[usize], labels: &[usize], classes: usize) -> Result<(), EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if let Some(&index) = predictions.iter().chain(labels).find(|&&v| v >= classes) {
        return Err(EvalError::OutOfRange { index, classes });
    }
    Ok(())
}

pub fn confusion(predictions: &[usize], labels: &[usize], classes: usize) -> Result<ConfusionMatrix, EvalError> {
    check_inputs(predictions, labels, classes)?;
    let mut cm = ConfusionMatrix::new(classes);
    for (&p, &t) in predictions.iter().zip(labels) {
        cm.counts[t * classes + p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub total: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

impl ClassificationReport {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Result<Self, EvalError> {
        let total = cm.total();
        if total == 0 {
            return Err(EvalError::EmptyInput);
        }
        let per_class = (0..cm.size())
            .map(|i| {
                let tp = cm.get(i, i);
                let precision = ratio(tp, cm.col_sum(i));
                let recall = ratio(tp, cm.row_sum(i));
                ClassMetrics {
                    precision,
                    recall,
                    f1: f1_score(precision, recall),
                    support: cm.row_sum(i),
                }
            })
            .collect();
        Ok(ClassificationReport {
            per_class,
            accuracy: ratio(cm.trace(), total),
            total,
        })
    }

    pub fn to_csv(&self, classes: &[ClassLabel]) -> String {
        let mut s = String::from("class,precision,recall,f1,support\n");
        for (c, m) in classes.iter().zip(&self.per_class) {
            writeln!(s, "{c},{},{},{},{}", m.precision, m.recall, m.f1, m.support).unwrap();
        }
        writeln!(s, "accuracy,,,{},{}", self.accuracy, self.total).unwrap();
        s
    }
}

pub fn report(predictions: &[usize], labels: &[usize], classes: usize) -> Result<ClassificationReport, EvalError> {
    if predictions.is_empty() && labels.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    ClassificationReport::from_confusion(&confusion(predictions, labels, classes)?)
}

/// Running means of predictions along one switch-move walk: entry `k-1` is
/// the average of the predictions after moves `1..=k`.
pub fn tta_trajectory<F: Scalar, R: rand::Rng + ?Sized>(
    model: &Classifier<F>,
    d: &GridDiagram,
    steps: usize,
    rng: &mut R,
    move_set: MoveSet,
) -> Result<Vec<Vec<F>>, EvalError> {
    let mut current = d.clone();
    let mut sum = vec![F::zero(); model.num_classes()];
    let mut out = Vec::with_capacity(steps);
    for k in 1..=steps {
        current = moves::scramble(&current, rng, 1, move_set);
        for (s, p) in sum.iter_mut().zip(model.predict(&current)?) {
            *s += p;
        }
        let inv = F::one() / F::from_usize(k).unwrap();
        out.push(sum.iter().map(|&s| s * inv).collect());
    }
    Ok(out)
}

/// Mean prediction over `steps` successive single-switch perturbations.
pub fn tta_predict<F: Scalar, R: rand::Rng + ?Sized>(
    model: &Classifier<F>,
    d: &GridDiagram,
    steps: usize,
    rng: &mut R,
    move_set: MoveSet,
) -> Result<Vec<F>, EvalError> {
    if steps == 0 {
        return Err(EvalError::InvalidConfig("TTA needs at least one step".into()));
    }
    Ok(tta_trajectory(model, d, steps, rng, move_set)?.pop().unwrap())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtaCurve {
    /// Accuracy of the plain prediction on the unperturbed diagrams.
    pub single_accuracy: f64,
    /// `(j, accuracy of argmax of the j-step mean)` for `j = 1..=max_steps`.
    pub points: Vec<(usize, f64)>,
}

const TAG_TTA: u64 = 0x77a;

/// TTA accuracy as a function of `j`, each sample walking its own
/// counter-seeded random stream.
pub fn tta_curve<F: Scalar>(
    model: &Classifier<F>,
    samples: &[LabeledSample],
    max_steps: usize,
    seed: u64,
    move_set: MoveSet,
) -> Result<TtaCurve, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let per_sample: Vec<(bool, Vec<bool>)> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let truth = model
                .coordinate(s.label)
                .ok_or(TrainError::LabelNotInModel(s.label))?;
            let single = argmax(&model.predict(&s.diagram)?) == truth;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_TTA, i as u64));
            let traj = tta_trajectory(model, &s.diagram, max_steps, &mut rng, move_set)?;
            Ok((single, traj.iter().map(|p| argmax(p) == truth).collect()))
        })
        .collect::<Result<_, EvalError>>()?;
    let total = samples.len() as f64;
    let single = per_sample.iter().filter(|(s, _)| *s).count() as f64 / total;
    let points = (0..max_steps)
        .map(|k| {
            let hits = per_sample.iter().filter(|(_, t)| t[k]).count();
            (k + 1, hits as f64 / total)
        })
        .collect();
    Ok(TtaCurve {
        single_accuracy: single,
        points,
    })
}

impl TtaCurve {
    pub fn to_csv(&self) -> String {
        let mut s = format!("j,accuracy\n0,{}\n", self.single_accuracy);
        for (j, a) in &self.points {
            writeln!(s, "{j},{a}").unwrap();
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub complexities: Vec<usize>,
    pub samples_per_complexity: usize,
    /// Switch moves applied before the first probe.
    pub warmup: usize,
    /// Switch moves between probes.
    pub step: usize,
    pub probes: usize,
    pub move_set: MoveSet,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            complexities: vec![10, 12, 15, 20],
            samples_per_complexity: 200,
            warmup: 500,
            step: 100,
            probes: 5,
            move_set: MoveSet::InternalOnly,
            seed: 0,
        }
    }
}

/// Accuracy grid: `accuracy[c][p]` is the accuracy at `complexities[c]`
/// after `moves[p]` switch moves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub complexities: Vec<usize>,
    pub moves: Vec<usize>,
    pub accuracy: Vec<Vec<f64>>,
}

const TAG_SWEEP_SET: u64 = 0x5e7;
const TAG_SWEEP_WALK: u64 = 0x5e8;

pub fn sweep_accuracy_vs_moves<F: Scalar>(
    model: &Classifier<F>,
    registry: &ClassRegistry,
    cfg: &SweepConfig,
) -> Result<SweepTable, EvalError> {
    let moves: Vec<usize> = (0..cfg.probes).map(|p| cfg.warmup + p * cfg.step).collect();
    let mut accuracy = Vec::with_capacity(cfg.complexities.len());
    if cfg.probes == 0 {
        return Ok(SweepTable {
            complexities: cfg.complexities.clone(),
            moves,
            accuracy: vec![Vec::new(); cfg.complexities.len()],
        });
    }
    let gen = GenConfig {
        classes: model.classes.clone(),
        switch_moves: 0,
        move_set: cfg.move_set,
        seed: cfg.seed,
        ..GenConfig::default()
    };
    for (ci, &complexity) in cfg.complexities.iter().enumerate() {
        let set = generator::make_fixed_set(
            &gen,
            registry,
            derive_seed(cfg.seed, TAG_SWEEP_SET, ci as u64),
            complexity,
            cfg.samples_per_complexity,
            ClassSampling::RoundRobin,
        )?;
        let hits: Vec<Vec<bool>> = set
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(cfg.seed, TAG_SWEEP_WALK, ci as u64), 0, i as u64));
                let mut d = moves::scramble(&s.diagram, &mut rng, cfg.warmup, cfg.move_set);
                let mut row = Vec::with_capacity(cfg.probes);
                for p in 0..cfg.probes {
                    if p > 0 {
                        d = moves::scramble(&d, &mut rng, cfg.step, cfg.move_set);
                    }
                    row.push(model.predict_class(&d)? == s.label);
                }
                Ok(row)
            })
            .collect::<Result<_, EvalError>>()?;
        let total = set.len().max(1) as f64;
        accuracy.push(
            (0..cfg.probes)
                .map(|p| hits.iter().filter(|h| h[p]).count() as f64 / total)
                .collect(),
        );
    }
    Ok(SweepTable {
        complexities: cfg.complexities.clone(),
        moves,
        accuracy,
    })
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("complexity");
        for m in &self.moves {
            write!(s, ",{m}").unwrap();
        }
        s.push('\n');
        for (c, row) in self.complexities.iter().zip(&self.accuracy) {
            write!(s, "{c}").unwrap();
            for a in row {
                write!(s, ",{a}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    /// Grey-level heatmap, brighter is more accurate.
    pub fn to_svg(&self) -> String {
        let cell = 24;
        let (w, h) = (cell * self.moves.len(), cell * self.complexities.len());
        let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n");
        for (i, row) in self.accuracy.iter().enumerate() {
            for (j, a) in row.iter().enumerate() {
                let g = (a.clamp(0.0, 1.0) * 255.0).round() as u8;
                writeln!(
                    s,
                    "<rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({g},{g},{g})\"/>",
                    j * cell,
                    i * cell
                )
                .unwrap();
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Learning curves of two otherwise identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedCurves {
    pub internal: Vec<EpochRecord>,
    pub external: Vec<EpochRecord>,
}

impl PairedCurves {
    pub fn final_val_accuracy(&self) -> (Option<f64>, Option<f64>) {
        let last = |h: &[EpochRecord]| h.last().and_then(|r| r.val_accuracy);
        (last(&self.internal), last(&self.external))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("move_set,epoch,step,train_loss,train_accuracy,val_loss,val_accuracy\n");
        for (name, h) in [("internal", &self.internal), ("external", &self.external)] {
            for r in h {
                writeln!(
                    s,
                    "{name},{},{},{},{},{},{}",
                    r.epoch,
                    r.step,
                    r.train_loss,
                    r.train_accuracy,
                    r.val_loss.map(|v| v.to_string()).unwrap_or_default(),
                    r.val_accuracy.map(|v| v.to_string()).unwrap_or_default()
                )
                .unwrap();
            }
        }
        s
    }

    /// Validation accuracy against epoch for both runs.
    pub fn to_svg(&self) -> String {
        let (w, h, pad) = (480.0, 320.0, 30.0);
        let epochs = self.internal.len().max(self.external.len()).max(2) as f64;
        let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n");
        writeln!(
            s,
            "<rect x=\"{pad}\" y=\"{pad}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
            w - 2.0 * pad,
            h - 2.0 * pad
        )
        .unwrap();
        for (h_rec, colour) in [(&self.internal, "blue"), (&self.external, "red")] {
            let pts: Vec<String> = h_rec
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let a = r.val_accuracy.unwrap_or(r.train_accuracy);
                    let x = pad + (w - 2.0 * pad) * i as f64 / (epochs - 1.0);
                    let y = h - pad - (h - 2.0 * pad) * a;
                    format!("{x:.1},{y:.1}")
                })
                .collect();
            writeln!(
                s,
                "<polyline fill=\"none\" stroke=\"{colour}\" points=\"{}\"/>",
                pts.join(" ")
            )
            .unwrap();
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Trains the same configuration once with internal switches only and once
/// with external switches added. Each run is validated on a set generated
/// with its own move set.
pub fn internal_vs_external<F: Scalar>(
    train_cfg: &TrainConfig,
    gen_cfg: &GenConfig,
    registry: &ClassRegistry,
) -> Result<PairedCurves, EvalError> {
    let run = |move_set: MoveSet| -> Result<Vec<EpochRecord>, EvalError> {
        let gen = GenConfig {
            move_set,
            ..gen_cfg.clone()
        };
        let val = generator::make_validation_set(&gen, registry)?;
        let out = learner::train::<F>(train_cfg, TrainData::Generated(&gen), registry, Some(&val), |_| {})?;
        Ok(out.history)
    };
    Ok(PairedCurves {
        internal: run(MoveSet::InternalOnly)?,
        external: run(MoveSet::WithExternal)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let labels = [0, 1, 2, 2, 1];
        let r = report(&labels, &labels, 4).unwrap();
        assert_eq!(r.accuracy, 1.0);
        for m in &r.per_class[..3] {
            assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        }
        assert_eq!(r.per_class[3], ClassMetrics { precision: 0.0, recall: 0.0, f1: 0.0, support: 0 });
        let cm = confusion(&labels, &labels, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!(i == j || cm.get(i, j) == 0);
            }
        }
    }

    #[test]
    fn unknot_precision_and_recall() {
        // 95 of 100 unknots found, 18 knots mistaken for unknots:
        // precision 95/113 ~ 0.84, recall 0.95
        let mut pred = vec![0; 95];
        pred.extend([1; 5]);
        pred.extend([0; 18]);
        pred.extend([1; 82]);
        let mut labels = vec![0; 100];
        labels.extend([1; 100]);
        let r = report(&pred, &labels, 2).unwrap();
        assert_eq!(r.per_class[0].recall, 0.95);
        assert!((r.per_class[0].precision - 95.0 / 113.0).abs() < 1e-15);
        assert_eq!((r.per_class[0].precision * 100.0).round(), 84.0);
        assert_eq!(r.per_class[0].support, 100);
    }

    #[test]
    fn empty_and_mismatched() {
        assert!(matches!(report(&[], &[], 3), Err(EvalError::EmptyInput)));
        assert!(matches!(report(&[0], &[0, 1], 3), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(report(&[3], &[0], 3), Err(EvalError::OutOfRange { index: 3, .. })));
    }

    #[test]
    fn binarize_threshold_is_strict() {
        let mut cm = ConfusionMatrix::new(2);
        cm.counts = vec![41, 40, 0, 100];
        assert_eq!(cm.binarize(DEFAULT_BINARIZE_THRESHOLD), vec![vec![true, false], vec![false, true]]);
        assert!(ConfusionMatrix::new(3).binarize(40).iter().flatten().all(|&b| !b));
    }

    #[test]
    fn sweep_with_no_probes_is_empty() {
        let cfg = TrainConfig {
            hidden_dim: 2,
            ..TrainConfig::default()
        };
        let model = Classifier::<f64>::init(&cfg, ClassLabel::all().take(2).collect());
        let t = sweep_accuracy_vs_moves(
            &model,
            ClassRegistry::builtin(),
            &SweepConfig {
                probes: 0,
                ..SweepConfig::default()
            },
        )
        .unwrap();
        assert!(t.moves.is_empty());
        assert!(t.accuracy.iter().all(|r| r.is_empty()));
    }
}

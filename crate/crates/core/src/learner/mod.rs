//! From-scratch bidirectional LSTM classifier over grid diagrams.

mod checkpoint;
mod network;
mod optim;
mod params;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{checkpoint_dtype, load_checkpoint, save_checkpoint, CheckpointError, CHECKPOINT_VERSION};
pub use network::{
    backward, encode_input, forward, loss, softmax, DirectionCache, ForwardCache, InputEncoding, NetworkError,
    Normalization, StepView, LOG_FLOOR,
};
pub use optim::{Optimizer, OptimizerKind};
pub use params::{LearnerParams, ParamGroup, ParamLayout, DIRECTIONS, GATES};

use crate::generator::{self, derive_seed, GenConfig, GenError, LabeledSample};
use crate::grid::GridDiagram;
use crate::knot_table::{ClassLabel, ClassRegistry};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("sample label {0} is not one of the model's classes")]
    LabelNotInModel(ClassLabel),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Generator(#[from] GenError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub steps: usize,
    /// Gradient steps per epoch.
    pub epoch_size: usize,
    pub seed: u64,
    pub encoding: InputEncoding,
    pub normalization: Normalization,
    /// Half-width of the uniform weight initialisation; `None` uses `1/sqrt(d)`.
    pub init_scale: Option<f64>,
}

impl TrainConfig {
    /// Full-scale settings: d = 1024, batches of 2048, Adam at 1e-4 for
    /// 300000 steps, 100 steps per epoch.
    pub fn full_scale() -> Self {
        TrainConfig {
            hidden_dim: 1024,
            batch_size: 2048,
            learning_rate: 1e-4,
            optimizer: OptimizerKind::adam(),
            steps: 300_000,
            epoch_size: 100,
            seed: 0,
            encoding: InputEncoding::RowPairs,
            normalization: Normalization::DivideByN,
            init_scale: None,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.epoch_size == 0 {
            return bad("epoch_size must be at least 1");
        }
        Ok(())
    }

    pub fn init_scale(&self) -> f64 {
        self.init_scale
            .unwrap_or_else(|| 1.0 / (self.hidden_dim as f64).sqrt())
    }
}

impl Default for TrainConfig {
    /// Desk-scale settings.
    fn default() -> Self {
        TrainConfig {
            hidden_dim: 64,
            batch_size: 128,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::adam(),
            steps: 2000,
            epoch_size: 100,
            seed: 0,
            encoding: InputEncoding::RowPairs,
            normalization: Normalization::DivideByN,
            init_scale: None,
        }
    }
}

/// A trained (or freshly initialised) network together with the meaning
/// of its output coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier<F> {
    pub params: LearnerParams<F>,
    /// Output coordinate `k` scores `classes[k]`.
    pub classes: Vec<ClassLabel>,
    pub encoding: InputEncoding,
    pub normalization: Normalization,
}

impl<F: Scalar> Classifier<F> {
    pub fn init(cfg: &TrainConfig, classes: Vec<ClassLabel>) -> Self {
        let layout = ParamLayout::new(cfg.hidden_dim, 2, classes.len());
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x1417, 0));
        Classifier {
            params: LearnerParams::uniform(layout, cfg.init_scale(), &mut rng),
            classes,
            encoding: cfg.encoding,
            normalization: cfg.normalization,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn encode(&self, d: &GridDiagram) -> Vec<[F; 2]> {
        encode_input(d, self.encoding, self.normalization)
    }

    /// Output coordinate of `label`, if the model knows the class.
    pub fn coordinate(&self, label: ClassLabel) -> Option<usize> {
        self.classes.iter().position(|&c| c == label)
    }

    /// Class probabilities for one diagram.
    pub fn predict(&self, d: &GridDiagram) -> Result<Vec<F>, NetworkError> {
        Ok(forward(&self.params, &self.encode(d))?.probs)
    }

    pub fn predict_class(&self, d: &GridDiagram) -> Result<ClassLabel, NetworkError> {
        Ok(self.classes[argmax(&self.predict(d)?)])
    }
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax<F: Scalar>(v: &[F]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Samples per parallel work unit. Fixed so that the floating-point
/// reduction order, and hence the result, does not depend on thread count.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone)]
pub struct BatchGradient<F> {
    /// Summed loss over the batch.
    pub loss: F,
    pub correct: usize,
    pub count: usize,
    pub grad: Vec<F>,
}

/// Loss and gradient summed over `(sequence, coordinate)` pairs.
pub fn batch_gradient<F: Scalar>(
    params: &LearnerParams<F>,
    batch: &[(Vec<[F; 2]>, usize)],
) -> Result<BatchGradient<F>, NetworkError> {
    let n = params.layout.len();
    let partials: Vec<Result<BatchGradient<F>, NetworkError>> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut acc = BatchGradient {
                loss: F::zero(),
                correct: 0,
                count: 0,
                grad: vec![F::zero(); n],
            };
            for (seq, label) in chunk {
                let cache = forward(params, seq)?;
                acc.loss += loss(std::slice::from_ref(&cache.probs), &[*label]);
                if argmax(&cache.probs) == *label {
                    acc.correct += 1;
                }
                acc.count += 1;
                backward(params, &cache, *label, &mut acc.grad)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = BatchGradient {
        loss: F::zero(),
        correct: 0,
        count: 0,
        grad: vec![F::zero(); n],
    };
    for p in partials {
        let p = p?;
        total.loss += p.loss;
        total.correct += p.correct;
        total.count += p.count;
        for (t, g) in total.grad.iter_mut().zip(&p.grad) {
            *t += *g;
        }
    }
    Ok(total)
}

/// Aggregate metrics of a model on a labeled set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetEvaluation {
    pub mean_loss: f64,
    pub accuracy: f64,
    /// Predicted and true output coordinates, in sample order.
    pub predictions: Vec<usize>,
    pub labels: Vec<usize>,
}

pub fn evaluate_set<F: Scalar>(model: &Classifier<F>, samples: &[LabeledSample]) -> Result<SetEvaluation, TrainError> {
    let labels = samples
        .iter()
        .map(|s| model.coordinate(s.label).ok_or(TrainError::LabelNotInModel(s.label)))
        .collect::<Result<Vec<_>, _>>()?;
    let probs: Vec<Vec<F>> = samples
        .par_iter()
        .map(|s| model.predict(&s.diagram))
        .collect::<Result<_, _>>()?;
    let predictions: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
    let correct = predictions.iter().zip(&labels).filter(|(p, l)| p == l).count();
    let total = samples.len().max(1) as f64;
    Ok(SetEvaluation {
        mean_loss: loss(&probs, &labels).to_f64_lossless() / total,
        accuracy: correct as f64 / total,
        predictions,
        labels,
    })
}

/// Where training batches come from.
#[derive(Debug, Clone, Copy)]
pub enum TrainData<'a> {
    /// Fresh batches from the generator at every step.
    Generated(&'a GenConfig),
    /// Batches drawn with replacement from a fixed set.
    Fixed {
        samples: &'a [LabeledSample],
        classes: &'a [ClassLabel],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub step: usize,
    /// Mean per-sample loss over the epoch's batches.
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<F> {
    pub model: Classifier<F>,
    pub history: Vec<EpochRecord>,
}

const TAG_FIXED_BATCH: u64 = 7;

type EncodedSample<F> = (Vec<[F; 2]>, usize);

fn encode_batch<F: Scalar>(
    model: &Classifier<F>,
    samples: &[LabeledSample],
) -> Result<Vec<EncodedSample<F>>, TrainError> {
    samples
        .iter()
        .map(|s| {
            let coord = model.coordinate(s.label).ok_or(TrainError::LabelNotInModel(s.label))?;
            Ok((model.encode(&s.diagram), coord))
        })
        .collect()
}

/// Runs the training loop: draw batch, forward, loss, backward, step.
/// `on_epoch` sees each epoch record as it is produced.
pub fn train<F: Scalar>(
    cfg: &TrainConfig,
    data: TrainData<'_>,
    registry: &ClassRegistry,
    validation: Option<&[LabeledSample]>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome<F>, TrainError> {
    cfg.validate()?;
    let (classes, gen_cfg) = match data {
        TrainData::Generated(g) => {
            let mut g = g.clone();
            g.batch_size = cfg.batch_size;
            g.validate(registry)?;
            (g.classes.clone(), Some(g))
        }
        TrainData::Fixed { samples, classes } => {
            if samples.is_empty() {
                return Err(TrainError::InvalidConfig("fixed training set is empty".into()));
            }
            (classes.to_vec(), None)
        }
    };
    let mut model = Classifier::<F>::init(cfg, classes);
    let mut opt = Optimizer::<F>::new(cfg.optimizer, cfg.learning_rate, model.params.layout.len());
    let mut history = Vec::new();
    let (mut epoch_loss, mut epoch_correct, mut epoch_count) = (0.0, 0usize, 0usize);

    for step in 0..cfg.steps {
        let samples = match (&gen_cfg, data) {
            (Some(g), _) => generator::make_batch(g, registry, step as u64)?,
            (None, TrainData::Fixed { samples, .. }) => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, TAG_FIXED_BATCH, step as u64));
                (0..cfg.batch_size)
                    .map(|_| samples[rng.gen_range(0..samples.len())].clone())
                    .collect()
            }
            (None, TrainData::Generated(_)) => unreachable!(),
        };
        let batch = encode_batch(&model, &samples)?;
        let g = batch_gradient(&model.params, &batch)?;
        opt.step(&mut model.params.data, &g.grad);
        if !model.params.is_finite() {
            return Err(NetworkError::NonFiniteActivation.into());
        }
        epoch_loss += g.loss.to_f64_lossless();
        epoch_correct += g.correct;
        epoch_count += g.count;

        let done = step + 1;
        if done % cfg.epoch_size == 0 || done == cfg.steps {
            let (val_loss, val_accuracy) = match validation {
                Some(v) => {
                    let e = evaluate_set(&model, v)?;
                    (Some(e.mean_loss), Some(e.accuracy))
                }
                None => (None, None),
            };
            let record = EpochRecord {
                epoch: history.len() + 1,
                step: done,
                train_loss: epoch_loss / epoch_count as f64,
                train_accuracy: epoch_correct as f64 / epoch_count as f64,
                val_loss,
                val_accuracy,
            };
            on_epoch(&record);
            history.push(record);
            (epoch_loss, epoch_correct, epoch_count) = (0.0, 0, 0);
        }
    }
    Ok(TrainOutcome { model, history })
}

//! Labeled dataset generation by class-preserving perturbation.
//!
//! A sample starts from the seed diagram of a uniformly drawn class, is
//! stabilized at random until it reaches the target complexity, then
//! scrambled with switch moves. The label is the seed's class; no knot
//! invariant is ever computed.
//!
//! Randomness is counter based: batch `b` of a run with seed `s` owns the
//! ChaCha stream family derived from `(s, b)`, and sample `i` of that batch
//! uses stream `i + 1`. Output does not depend on the thread count.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridDiagram, GridError, Marker};
use crate::knot_table::{ClassLabel, ClassRegistry, TableError};
use crate::moves::{self, Corner, MoveSet, ScrambleStats};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("dataset line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Table(#[from] TableError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassSampling {
    /// Uniform with repetition.
    Uniform,
    /// Sample `i` takes class `i mod C`, giving balanced sets.
    RoundRobin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub classes: Vec<ClassLabel>,
    pub batch_size: usize,
    pub complexity_min: usize,
    pub complexity_max: usize,
    pub switch_moves: usize,
    pub move_set: MoveSet,
    pub seed: u64,
    pub validation_complexity: usize,
    pub validation_count: usize,
    pub validation_sampling: ClassSampling,
}

impl GenConfig {
    /// Full-scale protocol: 36 classes, batches of 2048 at complexity 25..=30,
    /// 1000 switches with external moves, 10000 validation diagrams at 35.
    pub fn full_scale() -> Self {
        GenConfig {
            classes: ClassLabel::all().collect(),
            batch_size: 2048,
            complexity_min: 25,
            complexity_max: 30,
            switch_moves: 1000,
            move_set: MoveSet::WithExternal,
            seed: 0,
            validation_complexity: 35,
            validation_count: 10_000,
            validation_sampling: ClassSampling::Uniform,
        }
    }

    pub fn validate(&self, registry: &ClassRegistry) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::InvalidConfig(m));
        if self.classes.is_empty() {
            return bad("class list is empty".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.complexity_min < 2 || self.complexity_min > self.complexity_max {
            return bad(format!(
                "need 2 <= complexity_min <= complexity_max, got {}..={}",
                self.complexity_min, self.complexity_max
            ));
        }
        let largest = registry.max_seed_size(&self.classes);
        if self.complexity_min < largest {
            return bad(format!(
                "complexity_min {} is below the largest seed size {largest}",
                self.complexity_min
            ));
        }
        if self.validation_complexity < largest {
            return bad(format!(
                "validation_complexity {} is below the largest seed size {largest}",
                self.validation_complexity
            ));
        }
        Ok(())
    }
}

impl Default for GenConfig {
    /// Desk-scale settings used by the CLI when nothing is specified.
    fn default() -> Self {
        GenConfig {
            classes: ClassLabel::all().take(5).collect(),
            batch_size: 128,
            complexity_min: 10,
            complexity_max: 12,
            switch_moves: 200,
            move_set: MoveSet::InternalOnly,
            seed: 0,
            validation_complexity: 12,
            validation_count: 1000,
            validation_sampling: ClassSampling::Uniform,
        }
    }
}

/// Everything needed to regenerate a sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub seed_class: String,
    pub stream_seed: u64,
    pub stream: u64,
    pub target_complexity: usize,
    pub stabilizations: usize,
    pub switch_moves: usize,
    pub switches_applied: usize,
    pub switches_skipped: usize,
    pub move_set: MoveSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SampleRecord", into = "SampleRecord")]
pub struct LabeledSample {
    pub diagram: GridDiagram,
    pub label: ClassLabel,
    pub meta: SampleMeta,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SampleRecord {
    label: usize,
    name: String,
    x: Vec<usize>,
    o: Vec<usize>,
    meta: SampleMeta,
}

impl TryFrom<SampleRecord> for LabeledSample {
    type Error = String;

    fn try_from(r: SampleRecord) -> Result<Self, String> {
        let label = ClassLabel::from_index(r.label).map_err(|e| e.to_string())?;
        if label.name() != r.name {
            return Err(format!("label {} does not match name {}", r.label, r.name));
        }
        let diagram = GridDiagram::new(r.x, r.o).map_err(|e| e.to_string())?;
        Ok(LabeledSample {
            diagram,
            label,
            meta: r.meta,
        })
    }
}

impl From<LabeledSample> for SampleRecord {
    fn from(s: LabeledSample) -> Self {
        let (x, o) = s.diagram.into_parts();
        SampleRecord {
            label: s.label.index(),
            name: s.label.name().to_string(),
            x,
            o,
            meta: s.meta,
        }
    }
}

/// SplitMix64 finalizer, used to derive independent seeds from counters.
pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED69));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const TAG_TRAIN: u64 = 1;
const TAG_VALIDATION: u64 = 2;

fn stream_rng(stream_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
    rng.set_stream(stream);
    rng
}

/// Stabilizes `d` with uniformly drawn (row, marker, corner) variants until
/// it reaches `target` complexity.
pub fn stabilize_to<R: Rng + ?Sized>(d: &GridDiagram, target: usize, rng: &mut R) -> GridDiagram {
    let mut cur = d.clone();
    while cur.n() < target {
        let row = rng.gen_range(1..=cur.n());
        let marker = if rng.gen::<bool>() { Marker::X } else { Marker::O };
        let corner = Corner::ALL[rng.gen_range(0..4)];
        cur = moves::stabilize(&cur, row, marker, corner).expect("stabilization is always legal");
    }
    cur
}

struct Grown {
    diagram: GridDiagram,
    stabilizations: usize,
    stats: ScrambleStats,
}

fn grow<R: Rng + ?Sized>(
    seed: &GridDiagram,
    target: usize,
    k: usize,
    move_set: MoveSet,
    rng: &mut R,
) -> Grown {
    let stabilized = stabilize_to(seed, target, rng);
    let (diagram, stats) = moves::scramble_with_stats(&stabilized, rng, k, move_set);
    debug_assert_eq!(diagram.n(), target);
    Grown {
        diagram,
        stabilizations: target - seed.n(),
        stats,
    }
}

fn pick_class(classes: &[ClassLabel], draw: u64, index: usize, sampling: ClassSampling) -> ClassLabel {
    match sampling {
        ClassSampling::Uniform => classes[((draw as u128 * classes.len() as u128) >> 64) as usize],
        ClassSampling::RoundRobin => classes[index % classes.len()],
    }
}

#[allow(clippy::too_many_arguments)]
fn make_sample(
    registry: &ClassRegistry,
    classes: &[ClassLabel],
    sampling: ClassSampling,
    stream_seed: u64,
    index: usize,
    target: usize,
    k: usize,
    move_set: MoveSet,
) -> LabeledSample {
    let stream = index as u64 + 1;
    let mut rng = stream_rng(stream_seed, stream);
    let label = pick_class(classes, rng.next_u64(), index, sampling);
    let g = grow(registry.seed(label), target, k, move_set, &mut rng);
    LabeledSample {
        diagram: g.diagram,
        label,
        meta: SampleMeta {
            seed_class: label.name().to_string(),
            stream_seed,
            stream,
            target_complexity: target,
            stabilizations: g.stabilizations,
            switch_moves: k,
            switches_applied: g.stats.applied,
            switches_skipped: g.stats.skipped,
            move_set,
        },
    }
}

/// Seed of the stream family used for training batch `batch_index`.
pub fn batch_stream_seed(cfg: &GenConfig, batch_index: u64) -> u64 {
    derive_seed(cfg.seed, TAG_TRAIN, batch_index)
}

/// Training batch number `batch_index`: one complexity target per batch,
/// drawn uniformly from `complexity_min..=complexity_max`.
pub fn make_batch(
    cfg: &GenConfig,
    registry: &ClassRegistry,
    batch_index: u64,
) -> Result<Vec<LabeledSample>, GenError> {
    cfg.validate(registry)?;
    let stream_seed = batch_stream_seed(cfg, batch_index);
    let target = stream_rng(stream_seed, 0).gen_range(cfg.complexity_min..=cfg.complexity_max);
    Ok((0..cfg.batch_size)
        .into_par_iter()
        .map(|i| {
            make_sample(
                registry,
                &cfg.classes,
                ClassSampling::Uniform,
                stream_seed,
                i,
                target,
                cfg.switch_moves,
                cfg.move_set,
            )
        })
        .collect())
}

/// `count` samples at a fixed `complexity` from the stream family
/// `stream_seed`. Only the class list, move count and move set of `cfg`
/// are used.
pub fn make_fixed_set(
    cfg: &GenConfig,
    registry: &ClassRegistry,
    stream_seed: u64,
    complexity: usize,
    count: usize,
    sampling: ClassSampling,
) -> Result<Vec<LabeledSample>, GenError> {
    if cfg.classes.is_empty() {
        return Err(GenError::InvalidConfig("class list is empty".into()));
    }
    if complexity < registry.max_seed_size(&cfg.classes) {
        return Err(GenError::InvalidConfig(format!(
            "complexity {complexity} is below the largest seed size"
        )));
    }
    Ok((0..count)
        .into_par_iter()
        .map(|i| {
            make_sample(
                registry,
                &cfg.classes,
                sampling,
                stream_seed,
                i,
                complexity,
                cfg.switch_moves,
                cfg.move_set,
            )
        })
        .collect())
}

/// The fixed validation set: `validation_count` diagrams at
/// `validation_complexity`.
pub fn make_validation_set(cfg: &GenConfig, registry: &ClassRegistry) -> Result<Vec<LabeledSample>, GenError> {
    make_fixed_set(
        cfg,
        registry,
        derive_seed(cfg.seed, TAG_VALIDATION, 0),
        cfg.validation_complexity,
        cfg.validation_count,
        cfg.validation_sampling,
    )
}

impl LabeledSample {
    /// Regenerates the diagram from its metadata.
    pub fn replay(&self, registry: &ClassRegistry) -> Result<GridDiagram, GenError> {
        let m = &self.meta;
        let label: ClassLabel = m.seed_class.parse()?;
        let mut rng = stream_rng(m.stream_seed, m.stream);
        rng.next_u64();
        Ok(grow(registry.seed(label), m.target_complexity, m.switch_moves, m.move_set, &mut rng).diagram)
    }
}

pub fn write_jsonl<W: Write>(mut w: W, samples: &[LabeledSample]) -> Result<(), GenError> {
    for s in samples {
        serde_json::to_writer(&mut w, s).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<LabeledSample>, GenError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s = serde_json::from_str(&line).map_err(|e| GenError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(s);
    }
    Ok(out)
}

pub fn save_dataset(path: &Path, samples: &[LabeledSample]) -> Result<(), GenError> {
    write_jsonl(BufWriter::new(File::create(path)?), samples)
}

pub fn load_dataset(path: &Path) -> Result<Vec<LabeledSample>, GenError> {
    read_jsonl(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> GenConfig {
        GenConfig {
            classes: vec![ClassLabel::UNKNOT],
            batch_size: 8,
            complexity_min: 2,
            complexity_max: 2,
            switch_moves: 0,
            move_set: MoveSet::InternalOnly,
            seed: 1,
            validation_complexity: 2,
            validation_count: 4,
            validation_sampling: ClassSampling::Uniform,
        }
    }

    #[test]
    fn trivial_batch() {
        let reg = ClassRegistry::builtin();
        let batch = make_batch(&tiny(), reg, 0).unwrap();
        assert_eq!(batch.len(), 8);
        for s in &batch {
            assert_eq!(s.diagram, GridDiagram::trivial());
            assert_eq!(s.label, ClassLabel::UNKNOT);
        }
    }

    #[test]
    fn config_validation() {
        let reg = ClassRegistry::builtin();
        let mut cfg = tiny();
        cfg.classes = vec!["3_1".parse().unwrap()];
        assert!(matches!(cfg.validate(reg), Err(GenError::InvalidConfig(_))));
        cfg.complexity_min = 6;
        cfg.complexity_max = 5;
        assert!(cfg.validate(reg).is_err());
        cfg.complexity_max = 8;
        cfg.validation_complexity = 5;
        assert!(cfg.validate(reg).is_ok());
        cfg.batch_size = 0;
        assert!(cfg.validate(reg).is_err());
    }

    #[test]
    fn meta_replays_sample() {
        let reg = ClassRegistry::builtin();
        let cfg = GenConfig {
            classes: ClassLabel::all().take(4).collect(),
            batch_size: 6,
            complexity_min: 9,
            complexity_max: 11,
            switch_moves: 50,
            move_set: MoveSet::WithExternal,
            seed: 5,
            ..GenConfig::default()
        };
        for s in make_batch(&cfg, reg, 3).unwrap() {
            assert_eq!(s.replay(reg).unwrap(), s.diagram);
            assert_eq!(s.meta.switches_applied + s.meta.switches_skipped, 50);
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let reg = ClassRegistry::builtin();
        let cfg = GenConfig {
            classes: ClassLabel::all().collect(),
            validation_complexity: 12,
            validation_count: 36,
            validation_sampling: ClassSampling::RoundRobin,
            complexity_min: 11,
            complexity_max: 11,
            ..GenConfig::default()
        };
        let set = make_validation_set(&cfg, reg).unwrap();
        let labels: Vec<usize> = set.iter().map(|s| s.label.index()).collect();
        assert_eq!(labels, (0..36).collect::<Vec<_>>());
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &set).unwrap();
        assert_eq!(read_jsonl(&buf[..]).unwrap(), set);
        assert!(set.iter().all(|s| s.diagram.n() == 12));
    }

    #[test]
    fn bad_dataset_line() {
        let text = "{\"label\":0,\"name\":\"3_1\",\"x\":[1,2],\"o\":[2,1],\"meta\":{}}\n";
        assert!(matches!(read_jsonl(text.as_bytes()), Err(GenError::Parse { line: 1, .. })));
    }
}

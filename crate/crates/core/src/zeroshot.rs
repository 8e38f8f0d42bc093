//! Zero-shot phase recognition from text prompts.
//!
//! Class prompts are embedded with the text encoder; each held-out clip is
//! embedded with the visual encoder and assigned the class whose prompt
//! embedding has the highest cosine similarity. F1 is macro-averaged.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::encoders::{embed_segments, embed_texts, sample_frames, ModelParams, TextTokens};
use crate::error::{HecvlError, Result};
use crate::numerics::{l2_normalize_rows, Matrix};
use crate::trainer::Checkpoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassPrompts {
    pub label: usize,
    pub prompts: Vec<TextTokens>,
}

/// Ordered class prompts, possibly several per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PromptSetRepr", into = "PromptSetRepr")]
pub struct PromptSet {
    classes: Vec<ClassPrompts>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PromptSetRepr {
    classes: Vec<ClassPrompts>,
}

impl TryFrom<PromptSetRepr> for PromptSet {
    type Error = HecvlError;

    fn try_from(r: PromptSetRepr) -> Result<Self> {
        Self::new(r.classes)
    }
}

impl From<PromptSet> for PromptSetRepr {
    fn from(p: PromptSet) -> Self {
        Self { classes: p.classes }
    }
}

impl PromptSet {
    pub fn new(classes: Vec<ClassPrompts>) -> Result<Self> {
        if classes.len() < 2 {
            return Err(HecvlError::Config(format!(
                "prompt set needs at least 2 classes, got {}",
                classes.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for c in &classes {
            if !seen.insert(c.label) {
                return Err(HecvlError::Config(format!("duplicate prompt class {}", c.label)));
            }
            if c.prompts.is_empty() {
                return Err(HecvlError::Config(format!("class {} has no prompts", c.label)));
            }
        }
        Ok(Self { classes })
    }

    pub fn from_pairs(pairs: Vec<(usize, Vec<TextTokens>)>) -> Result<Self> {
        Self::new(
            pairs
                .into_iter()
                .map(|(label, prompts)| ClassPrompts { label, prompts })
                .collect(),
        )
    }

    pub fn classes(&self) -> &[ClassPrompts] {
        &self.classes
    }

    pub fn labels(&self) -> Vec<usize> {
        self.classes.iter().map(|c| c.label).collect()
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let r = BufReader::new(File::open(path)?);
        serde_json::from_reader(r).map_err(|e| HecvlError::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// One unit-norm row per class, in prompt-set order.
pub fn embed_prompts(prompts: &PromptSet, params: &ModelParams) -> Result<Matrix> {
    let vocab = params.config().vocab;
    let d = params.config().d_emb;
    let mut out = Matrix::zeros(prompts.len(), d);
    for (i, class) in prompts.classes().iter().enumerate() {
        for p in &class.prompts {
            p.check_vocab(vocab)?;
        }
        let refs: Vec<&TextTokens> = class.prompts.iter().collect();
        let e = embed_texts(&refs, params)?;
        let row = out.row_mut(i);
        for r in 0..e.rows() {
            for (acc, v) in row.iter_mut().zip(e.row(r)) {
                *acc += v / e.rows() as f64;
            }
        }
    }
    l2_normalize_rows(&out)
}

/// Cosine argmax per row; ties go to the lowest class index.
pub fn classify(visual: &Matrix, classes: &Matrix) -> Result<Vec<usize>> {
    if visual.cols() != classes.cols() || classes.rows() == 0 {
        return Err(HecvlError::Shape {
            op: "classify",
            left_rows: visual.rows(),
            left_cols: visual.cols(),
            right_rows: classes.rows(),
            right_cols: classes.cols(),
        });
    }
    let v = l2_normalize_rows(visual)?;
    let c = l2_normalize_rows(classes)?;
    Ok((0..v.rows())
        .map(|i| {
            let mut best = 0;
            let mut best_sim = f64::NEG_INFINITY;
            for j in 0..c.rows() {
                let s: f64 = v.row(i).iter().zip(c.row(j)).map(|(a, b)| a * b).sum();
                if s > best_sim {
                    best = j;
                    best_sim = s;
                }
            }
            best
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: usize,
    pub support: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub f1_average: String,
    pub samples: u64,
    pub per_class: Vec<ClassMetrics>,
    /// `confusion[truth][predicted]`, indexed by position in `per_class`.
    pub confusion: Vec<Vec<u64>>,
    pub config_digest: Option<String>,
    pub checkpoint_id: Option<String>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Accuracy, macro F1 and per-class scores for labels drawn from `classes`.
pub fn compute_metrics(
    predictions: &[usize],
    ground_truth: &[usize],
    classes: &[usize],
) -> Result<MetricsReport> {
    if predictions.len() != ground_truth.len() || predictions.is_empty() {
        return Err(HecvlError::Contract(format!(
            "metrics need equal non-empty lengths, got {} predictions and {} labels",
            predictions.len(),
            ground_truth.len()
        )));
    }
    let pos = |label: usize| {
        classes.iter().position(|&c| c == label).ok_or_else(|| {
            HecvlError::Contract(format!("label {label} is not in the class set"))
        })
    };
    let k = classes.len();
    let mut confusion = vec![vec![0u64; k]; k];
    for (&p, &t) in predictions.iter().zip(ground_truth) {
        confusion[pos(t)?][pos(p)?] += 1;
    }
    let total = predictions.len() as u64;
    let correct: u64 = (0..k).map(|i| confusion[i][i]).sum();
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|i| {
            let tp = confusion[i][i];
            let support: u64 = confusion[i].iter().sum();
            let predicted: u64 = confusion.iter().map(|row| row[i]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                label: classes[i],
                support,
                precision,
                recall,
                f1,
            }
        })
        .collect();
    let macro_f1 = per_class.iter().map(|c| c.f1).sum::<f64>() / k as f64;
    Ok(MetricsReport {
        accuracy: ratio(correct, total),
        macro_f1,
        f1_average: "macro".into(),
        samples: total,
        per_class,
        confusion,
        config_digest: None,
        checkpoint_id: None,
    })
}

/// Classifies every clip of `split` against `prompts` using `k_clip` frames.
pub fn evaluate(
    params: &ModelParams,
    split: &Corpus,
    prompts: &PromptSet,
    k_clip: usize,
) -> Result<MetricsReport> {
    let labels = prompts.labels();
    for class in split.classes() {
        if !labels.contains(&class) {
            return Err(HecvlError::Coverage { class });
        }
    }
    let mut groups = Vec::new();
    let mut truth = Vec::new();
    for video in &split.videos {
        for (c, clip) in video.clips.iter().enumerate() {
            if let Some(class) = video.class_of_clip(c) {
                groups.push(sample_frames(&clip.frames, k_clip)?);
                truth.push(class);
            }
        }
    }
    if groups.is_empty() {
        return Err(HecvlError::EmptySegment);
    }
    let class_emb = embed_prompts(prompts, params)?;
    let visual = embed_segments(&groups, params)?;
    let predicted: Vec<usize> = classify(&visual, &class_emb)?
        .into_iter()
        .map(|i| labels[i])
        .collect();
    let mut sorted = labels;
    sorted.sort_unstable();
    compute_metrics(&predicted, &truth, &sorted)
}

/// [`evaluate`] with the checkpoint's frame count and provenance filled in.
pub fn evaluate_checkpoint(
    ckpt: &Checkpoint,
    split: &Corpus,
    prompts: &PromptSet,
) -> Result<MetricsReport> {
    let mut report = evaluate(&ckpt.params, split, prompts, ckpt.config.k_clip)?;
    report.config_digest = Some(ckpt.config.digest());
    report.checkpoint_id = Some(ckpt.id()?);
    Ok(report)
}

/// One row of a results table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub model: String,
    pub dataset: String,
    pub accuracy: f64,
    pub f1: f64,
}

/// Aligned plain-text table; scores are shown as percentages.
pub fn render_table(rows: &[TableRow]) -> String {
    let header = ["Model", "Pretraining dataset", "Top-1 Acc.", "F1 Score"];
    let cells: Vec<[String; 4]> = rows
        .iter()
        .map(|r| {
            [
                r.model.clone(),
                r.dataset.clone(),
                format!("{:.1}", 100.0 * r.accuracy),
                format!("{:.1}", 100.0 * r.f1),
            ]
        })
        .collect();
    let mut width = header.map(str::len);
    for row in &cells {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cols: [&str; 4]| {
        format!(
            "{:<w0$}  {:<w1$}  {:>w2$}  {:>w3$}\n",
            cols[0],
            cols[1],
            cols[2],
            cols[3],
            w0 = width[0],
            w1 = width[1],
            w2 = width[2],
            w3 = width[3]
        )
    };
    let mut out = line(header);
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 6));
    out.push('\n');
    for row in &cells {
        out.push_str(&line([&row[0], &row[1], &row[2], &row[3]]));
    }
    out
}

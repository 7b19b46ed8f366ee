//! Ground-truth evaluation: hold out existing doc comments, regenerate them,
//! and score per package.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::engine::{Engine, GeneratedComment};
use crate::graph::ProjectIndex;
use crate::java::MethodId;
use crate::metrics::{bertscore, bleu, normalize, rouge1, Embedder, ScoreTriple};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no package has at least {min_methods} methods with a reference of {min_ref_tokens}+ tokens")]
    NoQualifyingPackages { min_methods: usize, min_ref_tokens: usize },
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv error on {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusOptions {
    pub min_methods: usize,
    pub min_ref_tokens: usize,
    /// Drop `@tag` names before scoring and filtering.
    pub strip_tags: bool,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        Self { min_methods: 10, min_ref_tokens: 5, strip_tags: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusItem {
    pub method: MethodId,
    pub package: String,
    pub file: String,
    pub reference: String,
}

/// Documented methods grouped by package; packages with too few qualifying
/// methods are dropped. Ordered by package, then method id.
pub fn select_corpus(index: &ProjectIndex, options: &CorpusOptions) -> Result<Vec<CorpusItem>, EvalError> {
    let mut by_package: BTreeMap<&str, Vec<CorpusItem>> = BTreeMap::new();
    for m in index.methods.values() {
        let Some(doc) = &m.doc_comment else { continue };
        if normalize(doc, options.strip_tags).len() < options.min_ref_tokens {
            continue;
        }
        by_package.entry(&m.package).or_default().push(CorpusItem {
            method: m.id.clone(),
            package: m.package.clone(),
            file: m.file.clone(),
            reference: doc.clone(),
        });
    }
    let corpus: Vec<CorpusItem> = by_package
        .into_values()
        .filter(|items| items.len() >= options.min_methods)
        .flatten()
        .collect();
    if corpus.is_empty() {
        return Err(EvalError::NoQualifyingPackages {
            min_methods: options.min_methods,
            min_ref_tokens: options.min_ref_tokens,
        });
    }
    Ok(corpus)
}

/// Copy of `index` with the held-out references removed, for the engine
/// that generates evaluation comments.
pub fn generation_index(index: &ProjectIndex, corpus: &[CorpusItem]) -> ProjectIndex {
    let mut view = index.clone();
    for item in corpus {
        if let Some(m) = view.methods.get_mut(&item.method) {
            m.doc_comment = None;
            m.doc_span = None;
        }
    }
    view
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemScores {
    pub bleu: f64,
    pub rouge1: ScoreTriple,
    pub bertscore: ScoreTriple,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemResult {
    pub item: CorpusItem,
    pub generated: Option<GeneratedComment>,
    pub scores: Option<ItemScores>,
    /// Failure reason, if generation or scoring failed.
    pub error: Option<String>,
}

impl ItemResult {
    pub fn is_ok(&self) -> bool {
        self.scores.is_some()
    }
}

pub async fn score_pair(
    generated: &str,
    reference: &str,
    embedder: &dyn Embedder,
    strip_tags: bool,
) -> Result<ItemScores, crate::metrics::EmbedError> {
    let hyp = normalize(generated, strip_tags);
    let reference = normalize(reference, strip_tags);
    Ok(ItemScores {
        bleu: bleu(&hyp, std::slice::from_ref(&reference)),
        rouge1: rouge1(&hyp, &reference),
        bertscore: bertscore(&hyp, &reference, embedder).await?,
    })
}

/// Generates a comment for every item and scores it against the held-out
/// reference. `engine` must be built over [`generation_index`].
pub async fn run_eval(
    corpus: &[CorpusItem],
    engine: &Engine,
    embedder: &dyn Embedder,
    strip_tags: bool,
) -> Vec<ItemResult> {
    let targets: Vec<MethodId> = corpus.iter().map(|c| c.method.clone()).collect();
    let runs = engine.comment_many(&targets).await;
    let mut results = Vec::with_capacity(corpus.len());
    for (item, run) in corpus.iter().zip(runs) {
        let generated = match run.and_then(|r| r.result) {
            Ok(g) => g,
            Err(err) => {
                log::warn!("generation failed for {}: {err}", item.method);
                results.push(ItemResult { item: item.clone(), generated: None, scores: None, error: Some(err.to_string()) });
                continue;
            }
        };
        match score_pair(&generated.javadoc, &item.reference, embedder, strip_tags).await {
            Ok(scores) => results.push(ItemResult {
                item: item.clone(),
                generated: Some(generated),
                scores: Some(scores),
                error: None,
            }),
            Err(err) => results.push(ItemResult {
                item: item.clone(),
                generated: Some(generated),
                scores: None,
                error: Some(err.to_string()),
            }),
        }
    }
    results
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackageReport {
    pub package: String,
    pub n: usize,
    pub failed: usize,
    pub bleu_mean: f64,
    pub rouge1: ScoreTriple,
    pub bertscore: ScoreTriple,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn mean_triple<'a>(triples: impl Iterator<Item = &'a ScoreTriple> + Clone) -> ScoreTriple {
    ScoreTriple {
        precision: mean(triples.clone().map(|t| t.precision)),
        recall: mean(triples.clone().map(|t| t.recall)),
        f1: mean(triples.map(|t| t.f1)),
    }
}

/// Arithmetic means per package over successful items. Each component of a
/// triple is averaged on its own.
pub fn aggregate(results: &[ItemResult]) -> Vec<PackageReport> {
    let mut groups: BTreeMap<&str, Vec<&ItemResult>> = BTreeMap::new();
    for r in results {
        groups.entry(&r.item.package).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(package, items)| {
            let ok: Vec<&ItemScores> = items.iter().filter_map(|r| r.scores.as_ref()).collect();
            PackageReport {
                package: package.to_string(),
                n: ok.len(),
                failed: items.len() - ok.len(),
                bleu_mean: mean(ok.iter().map(|s| s.bleu)),
                rouge1: mean_triple(ok.iter().map(|s| &s.rouge1)),
                bertscore: mean_triple(ok.iter().map(|s| &s.bertscore)),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub model: String,
    pub prompt_template_version: String,
    pub prompt_template_hash: String,
    pub config: serde_json::Value,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub items: usize,
    pub failures: usize,
    pub packages: usize,
}

pub const ITEMS_CSV: &str = "eval_items.csv";
pub const PACKAGES_CSV: &str = "eval_packages.csv";
pub const MANIFEST_JSON: &str = "manifest.json";
pub const PLOT_JSON: &str = "plot_data.json";

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ItemRow {
    pub method_id: String,
    pub package: String,
    pub bleu: Option<f64>,
    pub rouge_p: Option<f64>,
    pub rouge_r: Option<f64>,
    pub rouge_f1: Option<f64>,
    pub bert_p: Option<f64>,
    pub bert_r: Option<f64>,
    pub bert_f1: Option<f64>,
    pub retries: Option<usize>,
    pub status: String,
}

impl From<&ItemResult> for ItemRow {
    fn from(r: &ItemResult) -> Self {
        let s = r.scores.as_ref();
        ItemRow {
            method_id: r.item.method.to_string(),
            package: r.item.package.clone(),
            bleu: s.map(|s| s.bleu),
            rouge_p: s.map(|s| s.rouge1.precision),
            rouge_r: s.map(|s| s.rouge1.recall),
            rouge_f1: s.map(|s| s.rouge1.f1),
            bert_p: s.map(|s| s.bertscore.precision),
            bert_r: s.map(|s| s.bertscore.recall),
            bert_f1: s.map(|s| s.bertscore.f1),
            retries: r.generated.as_ref().map(|g| g.retries),
            status: if r.is_ok() { "ok".to_string() } else { "failed".to_string() },
        }
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct PackageRow {
    pub package: String,
    pub n: usize,
    pub failed: usize,
    pub bleu: f64,
    pub rouge_p: f64,
    pub rouge_r: f64,
    pub rouge_f1: f64,
    pub bert_p: f64,
    pub bert_r: f64,
    pub bert_f1: f64,
}

impl From<&PackageReport> for PackageRow {
    fn from(p: &PackageReport) -> Self {
        PackageRow {
            package: p.package.clone(),
            n: p.n,
            failed: p.failed,
            bleu: p.bleu_mean,
            rouge_p: p.rouge1.precision,
            rouge_r: p.rouge1.recall,
            rouge_f1: p.rouge1.f1,
            bert_p: p.bertscore.precision,
            bert_r: p.bertscore.recall,
            bert_f1: p.bertscore.f1,
        }
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct TripleSeries {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
}

/// Per-package series for external plotting.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct PlotData {
    pub packages: Vec<String>,
    pub n: Vec<usize>,
    pub bleu: Vec<f64>,
    pub rouge1: TripleSeries,
    pub bertscore: TripleSeries,
}

impl PlotData {
    pub fn from_reports(reports: &[PackageReport]) -> Self {
        let series = |f: fn(&PackageReport) -> &ScoreTriple| TripleSeries {
            precision: reports.iter().map(|r| f(r).precision).collect(),
            recall: reports.iter().map(|r| f(r).recall).collect(),
            f1: reports.iter().map(|r| f(r).f1).collect(),
        };
        PlotData {
            packages: reports.iter().map(|r| r.package.clone()).collect(),
            n: reports.iter().map(|r| r.n).collect(),
            bleu: reports.iter().map(|r| r.bleu_mean).collect(),
            rouge1: series(|r| &r.rouge1),
            bertscore: series(|r| &r.bertscore),
        }
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), EvalError> {
    let csv_err = |source| EvalError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| EvalError::Io { path: path.to_path_buf(), source })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), EvalError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    std::fs::write(path, text + "\n").map_err(|source| EvalError::Io { path: path.to_path_buf(), source })
}

/// Writes the item CSV, package CSV and manifest (plus plot data when asked)
/// and returns the written paths.
pub fn write_reports(
    out_dir: &Path,
    results: &[ItemResult],
    reports: &[PackageReport],
    manifest: &RunManifest,
    emit_plot_data: bool,
) -> Result<Vec<PathBuf>, EvalError> {
    std::fs::create_dir_all(out_dir).map_err(|source| EvalError::Io { path: out_dir.to_path_buf(), source })?;
    let items = out_dir.join(ITEMS_CSV);
    write_csv(&items, results.iter().map(ItemRow::from))?;
    let packages = out_dir.join(PACKAGES_CSV);
    write_csv(&packages, reports.iter().map(PackageRow::from))?;
    let manifest_path = out_dir.join(MANIFEST_JSON);
    write_json(&manifest_path, manifest)?;
    let mut written = vec![items, packages, manifest_path];
    if emit_plot_data {
        let plot = out_dir.join(PLOT_JSON);
        write_json(&plot, &PlotData::from_reports(reports))?;
        written.push(plot);
    }
    Ok(written)
}

/// Reads an item CSV back, for checks against the in-memory results.
pub fn read_item_rows(path: &Path) -> Result<Vec<ItemRow>, EvalError> {
    let csv_err = |source| EvalError::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<Result<Vec<ItemRow>, _>>().map_err(csv_err)
}

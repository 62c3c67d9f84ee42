//! One function per subcommand. Each reads its inputs, writes artifacts into the output
//! directory and finishes with `manifest.<command>.json`.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sicf_core::corpus::{load_candidates, load_corpus, SplitKind};
use sicf_core::eval::{ElimReport, EvalSample, MetricScorer, SampleScores};
use sicf_core::export::ProviderExport;
use sicf_core::fusion::{fuse_sicf, selection_records, RankRow, RankTable, ScoreBundle};
use sicf_core::grid::grid_search as search_grid;
use sicf_core::jsonl;
use sicf_core::pipeline::score_corpus;
use sicf_core::schema::{validate_file, FileKind};

use crate::config::{ProviderMode, RunConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::{sha256_hex, ArtifactWriter, Manifest};
use crate::report::{elim_csv, run_rows, ssds_csv, SsdsInput, SsdsRow};

pub const SCORES: &str = "scores.jsonl";
pub const MATRICES: &str = "matrices.jsonl";
pub const RANKS: &str = "ranks.jsonl";
pub const SELECTION: &str = "selection.jsonl";
pub const ELIM_REPORT: &str = "elim_report.json";
pub const ELIM_CSV: &str = "elim_report.csv";
pub const SSDS_REPORT: &str = "ssds_report.jsonl";
pub const SSDS_CSV: &str = "ssds_report.csv";
pub const GRID: &str = "grid.jsonl";
pub const EMBEDDINGS: &str = "embeddings.jsonl";
pub const TAGS: &str = "tags.jsonl";
pub const NLI: &str = "nli.jsonl";

fn artifact(config: &RunConfig, file: &str) -> PathBuf {
    config.out_dir.join(file)
}

fn read_bundles(path: &Path) -> CliResult<Vec<ScoreBundle>> {
    let bundles: Vec<ScoreBundle> = jsonl::read(path)?.into_iter().map(|(_, b)| b).collect();
    for b in &bundles {
        b.validate()?;
    }
    if bundles.is_empty() {
        return Err(CliError::Failed(format!(
            "{} holds no scores",
            path.display()
        )));
    }
    Ok(bundles)
}

/// Pairs every scored dialogue's representative candidate with its reference summary.
fn eval_samples(
    config: &RunConfig,
    bundles: &[ScoreBundle],
    manifest: &mut Manifest,
) -> CliResult<Vec<EvalSample>> {
    let corpus_path = config.require("corpus", &config.corpus)?;
    let candidates_path = config.require("candidates", &config.candidates)?;
    let corpus = load_corpus(corpus_path, SplitKind::Mixed)?;
    let sets = load_candidates(candidates_path)?;
    manifest.input("corpus", corpus_path)?;
    manifest.input("candidates", candidates_path)?;
    let by_id: HashMap<&str, &[String]> = sets
        .iter()
        .map(|s| (s.dialogue_id.as_str(), s.candidates.as_slice()))
        .collect();
    bundles
        .iter()
        .map(|b| {
            let id = b.dialogue_id.as_str();
            let reference = corpus.reference(id).ok_or_else(|| {
                CliError::Failed(format!("dialogue {id:?} has no reference summary"))
            })?;
            let prediction = by_id
                .get(id)
                .and_then(|c| c.get(b.representative_candidate_idx))
                .ok_or_else(|| {
                    CliError::Failed(format!(
                        "no candidate {} for dialogue {id:?}",
                        b.representative_candidate_idx
                    ))
                })?;
            Ok(EvalSample {
                id: id.to_string(),
                prediction: prediction.clone(),
                reference: reference.to_string(),
            })
        })
        .collect()
}

pub fn score(config: &RunConfig) -> CliResult<String> {
    let corpus_path = config.require("corpus", &config.corpus)?;
    let candidates_path = config.require("candidates", &config.candidates)?;
    let corpus = load_corpus(corpus_path, SplitKind::Mixed)?;
    let sets = load_candidates(candidates_path)?;
    let providers = config.providers()?;

    let mut manifest = Manifest::new("score", config.hash());
    manifest.input("corpus", corpus_path)?;
    manifest.input("candidates", candidates_path)?;
    if config.provider == ProviderMode::File {
        for (role, path) in [
            ("embeddings", &config.embeddings),
            ("tags", &config.tags),
            ("nli", &config.nli),
        ] {
            manifest.input(role, config.require(role, path)?)?;
        }
    }
    manifest.providers = Some(providers.info());
    manifest.phi = Some(config.phi_config());

    let scores = score_corpus(
        corpus.dialogues(),
        &sets,
        &providers,
        &config.scoring(),
        config.threads,
    )?;
    let bundles: Vec<_> = scores.iter().map(|s| s.bundle.clone()).collect();
    let mut out = ArtifactWriter::new(&config.out_dir, &mut manifest)?;
    out.jsonl(SCORES, &bundles)?;
    if config.debug_matrices {
        let dumps: Vec<_> = scores.iter().flat_map(|s| s.dumps()).collect();
        out.jsonl(MATRICES, &dumps)?;
    }
    manifest.write(&config.out_dir)?;
    let degenerate = bundles
        .iter()
        .filter(|b| b.is_coverage_degenerate())
        .count();
    Ok(format!(
        "scored {} dialogues ({degenerate} without dialogue nouns) -> {}",
        bundles.len(),
        artifact(config, SCORES).display()
    ))
}

pub fn fuse(config: &RunConfig) -> CliResult<String> {
    let scores_path = artifact(config, SCORES);
    let bundles = read_bundles(&scores_path)?;
    let coefficients = config.coefficients()?;
    let table = fuse_sicf(&bundles, coefficients)?;
    table
        .validate()
        .map_err(|e| CliError::Invariant(e.to_string()))?;

    let mut manifest = Manifest::new("fuse", config.hash());
    manifest.input("scores", &scores_path)?;
    manifest.coefficients = Some(coefficients);
    ArtifactWriter::new(&config.out_dir, &mut manifest)?.jsonl(RANKS, &table.rows)?;
    manifest.write(&config.out_dir)?;
    Ok(format!(
        "ranked {} dialogues -> {}",
        table.n(),
        artifact(config, RANKS).display()
    ))
}

pub fn select(config: &RunConfig) -> CliResult<String> {
    let ranks_path = artifact(config, RANKS);
    let scores_path = artifact(config, SCORES);
    let rows: Vec<RankRow> = jsonl::read(&ranks_path)?
        .into_iter()
        .map(|(_, r)| r)
        .collect();
    let table = RankTable::from_rows(rows, config.coefficients()?)?;
    let bundles = read_bundles(&scores_path)?;
    let selected = selection_records(&table, &bundles, config.ratio)?;

    let mut manifest = Manifest::new("select", config.hash());
    manifest.input("ranks", &ranks_path)?;
    manifest.input("scores", &scores_path)?;
    manifest.ratio = Some(config.ratio);
    ArtifactWriter::new(&config.out_dir, &mut manifest)?.jsonl(SELECTION, &selected)?;
    manifest.write(&config.out_dir)?;
    Ok(format!(
        "selected {} of {} dialogues -> {}",
        selected.len(),
        table.n(),
        artifact(config, SELECTION).display()
    ))
}

pub fn eval_elim(config: &RunConfig) -> CliResult<String> {
    let scores_path = artifact(config, SCORES);
    let bundles = read_bundles(&scores_path)?;
    let coefficients = config.coefficients()?;
    let mut manifest = Manifest::new("eval-elim", config.hash());
    manifest.input("scores", &scores_path)?;
    manifest.coefficients = Some(coefficients);
    let samples = eval_samples(config, &bundles, &mut manifest)?;

    let table = fuse_sicf(&bundles, coefficients)?;
    let report = ElimReport::build(
        &samples,
        &table.worst_first_ids(),
        &config.metrics,
        &MetricScorer::default(),
    )?;
    report
        .validate()
        .map_err(|e| CliError::Invariant(e.to_string()))?;

    let mut out = ArtifactWriter::new(&config.out_dir, &mut manifest)?;
    out.json(ELIM_REPORT, &report, report.curve.len())?;
    out.write(ELIM_CSV, &elim_csv(&report)?, 2 * report.curve.len())?;
    manifest.write(&config.out_dir)?;
    Ok(format!(
        "evaluated {} samples on {} metrics -> {}",
        samples.len(),
        report.curve.len(),
        artifact(config, ELIM_REPORT).display()
    ))
}

pub fn report(config: &RunConfig) -> CliResult<String> {
    let report_path = artifact(config, ELIM_REPORT);
    let text = std::fs::read_to_string(&report_path).map_err(|e| CliError::io(&report_path, e))?;
    let report: ElimReport = serde_json::from_str(&text)
        .map_err(|e| CliError::Failed(format!("{}: {e}", report_path.display())))?;
    report.validate()?;

    let mut manifest = Manifest::new("report", config.hash());
    manifest.input("elim_report", &report_path)?;
    let mut rows = run_rows(&report);
    if let Some(path) = &config.ssds_table {
        let external: Vec<SsdsInput> = jsonl::read(path)?.into_iter().map(|(_, r)| r).collect();
        manifest.input("ssds_table", path)?;
        rows.extend(external.into_iter().map(SsdsRow::from_input));
    }
    let mut out = ArtifactWriter::new(&config.out_dir, &mut manifest)?;
    out.jsonl(SSDS_REPORT, &rows)?;
    out.write(SSDS_CSV, &ssds_csv(&rows)?, rows.len())?;
    manifest.write(&config.out_dir)?;
    Ok(format!(
        "{} report rows -> {}",
        rows.len(),
        artifact(config, SSDS_CSV).display()
    ))
}

pub fn grid_search(config: &RunConfig) -> CliResult<String> {
    let scores_path = artifact(config, SCORES);
    let bundles = read_bundles(&scores_path)?;
    let mut manifest = Manifest::new("grid-search", config.hash());
    manifest.input("scores", &scores_path)?;
    let samples = eval_samples(config, &bundles, &mut manifest)?;
    let scores = SampleScores::compute(&samples, config.grid_metric, &MetricScorer::default())?;
    let entries = search_grid(&bundles, &scores)?;

    ArtifactWriter::new(&config.out_dir, &mut manifest)?.jsonl(GRID, &entries)?;
    manifest.write(&config.out_dir)?;
    let best = &entries[0];
    Ok(format!(
        "searched {} coefficient triples; best ({}, {}, {}) -> {}",
        entries.len(),
        best.alpha,
        best.beta,
        best.gamma,
        artifact(config, GRID).display()
    ))
}

pub fn export_providers(config: &RunConfig) -> CliResult<String> {
    let corpus_path = config.require("corpus", &config.corpus)?;
    let candidates_path = config.require("candidates", &config.candidates)?;
    let corpus = load_corpus(corpus_path, SplitKind::Mixed)?;
    let sets = load_candidates(candidates_path)?;
    let providers = config.providers()?;

    let mut manifest = Manifest::new("export-providers", config.hash());
    manifest.input("corpus", corpus_path)?;
    manifest.input("candidates", candidates_path)?;
    manifest.providers = Some(providers.info());
    let export = ProviderExport::record(corpus.dialogues(), &sets, providers, &config.scoring())?;
    let mut out = ArtifactWriter::new(&config.out_dir, &mut manifest)?;
    out.jsonl(EMBEDDINGS, &export.embeddings)?;
    out.jsonl(TAGS, &export.tags)?;
    out.jsonl(NLI, &export.nli)?;
    manifest.write(&config.out_dir)?;
    Ok(format!(
        "exported {} embeddings, {} tag sequences, {} judgments -> {}",
        export.embeddings.len(),
        export.tags.len(),
        export.nli.len(),
        config.out_dir.display()
    ))
}

/// A file kind accepted by `sicf validate`: an engine file or one of the CLI's own
/// report and manifest files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidateKind {
    Engine(FileKind),
    SsdsReport,
    Manifest,
}

impl FromStr for ValidateKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "ssds-report" => Ok(ValidateKind::SsdsReport),
            "manifest" => Ok(ValidateKind::Manifest),
            _ => s
                .parse()
                .map(ValidateKind::Engine)
                .map_err(|e| CliError::config("kind", e)),
        }
    }
}

impl fmt::Display for ValidateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidateKind::Engine(k) => k.fmt(f),
            ValidateKind::SsdsReport => f.write_str("ssds-report"),
            ValidateKind::Manifest => f.write_str("manifest"),
        }
    }
}

fn validate_manifest(path: &Path) -> CliResult<usize> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
    let dir = path.parent().unwrap_or(Path::new(""));
    for out in &manifest.outputs {
        let file = dir.join(&out.file);
        let bytes = std::fs::read(&file).map_err(|e| CliError::io(&file, e))?;
        if sha256_hex(&bytes) != out.sha256 {
            return Err(CliError::Failed(format!(
                "{}: digest does not match manifest",
                file.display()
            )));
        }
    }
    Ok(manifest.outputs.len())
}

pub fn validate(kind: ValidateKind, path: &Path) -> CliResult<String> {
    let records = match kind {
        ValidateKind::Engine(k) => validate_file(k, path)?,
        ValidateKind::SsdsReport => jsonl::read::<SsdsRow>(path)?.len(),
        ValidateKind::Manifest => validate_manifest(path)?,
    };
    Ok(format!(
        "{}: valid {kind} file, {records} records",
        path.display()
    ))
}

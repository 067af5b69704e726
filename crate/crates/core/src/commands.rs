//! The operations behind the `doclayout` binary, callable as a library.
//!
//! Every command writes into an output directory with fixed file names and
//! records its seed.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use crate::diffusion::{train_with, write_loss_log, LayoutModel, LossRow, SampleOptions, SampleOutput, TrainConfig};
use crate::error::{Error, Result};
use crate::jsonl::{read_jsonl_file, write_jsonl_file};
use crate::layout::{check_shared_schema, ClassSchema, Layout};
use crate::matching::{hungarian, set_score_docsim};
use crate::metrics::{
    corpus_summary, doc_emd_reports, wasserstein_seq_with, CorpusSummary, DocEmdConfig, MetricReport, OverlapMode,
    DEFAULT_SUBSAMPLE_SEED, EXACT_POOL_LIMIT,
};
use crate::mosaic::{mosaic_plan, MosaicPlan, MosaicWeights};
use crate::ot::{emd_lp_oracle, rasterize};
use crate::render::render_corpus;
use crate::tokens::{quantize, Vocabulary, DEFAULT_GRID};

/// Fails unless `path` exists as a file.
pub fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(Error::Validation(format!("input file {} does not exist", path.display())));
    }
    Ok(())
}

/// Creates `dir` if needed; fails if it exists as a file.
pub fn prepare_out_dir(dir: &Path) -> Result<()> {
    if dir.is_file() {
        return Err(Error::Validation(format!("output path {} is a file", dir.display())));
    }
    fs::create_dir_all(dir).map_err(|e| Error::Validation(format!("cannot create {}: {e}", dir.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}

/// Reads a JSONL corpus, remapping onto `schema` when given.
pub fn load_corpus(path: &Path, schema: Option<&Arc<ClassSchema>>) -> Result<Vec<Layout>> {
    require_file(path)?;
    read_jsonl_file(path, schema)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalOptions {
    pub grid: usize,
    pub lambda: f64,
    #[serde(serialize_with = "ser_mode")]
    pub overlap_mode: OverlapMode,
    /// Seed of the box subsample used by the sequence Wasserstein distance.
    pub seed: u64,
    /// Cross-check per-class EMDs of matched pairs against the LP oracle
    /// where the problem is small enough.
    pub exact_check: bool,
}

fn ser_mode<S: serde::Serializer>(m: &OverlapMode, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(match m {
        OverlapMode::Union => "union",
        OverlapMode::PairwiseSum => "pairwise-sum",
    })
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            grid: crate::metrics::DEFAULT_RASTER_GRID,
            lambda: 1.0,
            overlap_mode: OverlapMode::Union,
            seed: DEFAULT_SUBSAMPLE_SEED,
            exact_check: false,
        }
    }
}

pub const EVAL_CSV_HEADER: &str = "docsim,doc_emd,overlap,coverage,class_w,bbox_w,n_generated,n_reference,grid,lambda,seed";

/// One table row: DocSim and Doc-EMD set scores plus the generated corpus'
/// mean overlap and coverage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub docsim: f64,
    pub doc_emd: f64,
    pub overlap: f64,
    pub coverage: f64,
    pub class_w: f64,
    pub bbox_w: Option<f64>,
    pub n_generated: usize,
    pub n_reference: usize,
    pub grid: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl EvalRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.docsim,
            self.doc_emd,
            self.overlap,
            self.coverage,
            self.class_w,
            self.bbox_w.map(|v| v.to_string()).unwrap_or_default(),
            self.n_generated,
            self.n_reference,
            self.grid,
            self.lambda,
            self.seed
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MatchedPair {
    pub generated: String,
    pub reference: String,
    pub report: MetricReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactCheck {
    pub compared: usize,
    pub skipped: usize,
    pub max_abs_diff: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub options: EvalOptions,
    pub row: EvalRow,
    pub generated: CorpusSummary,
    pub reference: CorpusSummary,
    pub pairs: Vec<MatchedPair>,
    pub exact_check: Option<ExactCheck>,
}

fn layout_name(l: &Layout, i: usize, prefix: &str) -> String {
    l.id().map_or_else(|| format!("{prefix}-{i}"), str::to_owned)
}

/// Compares a generated corpus against a reference corpus.
pub fn evaluate(generated: &[Layout], reference: &[Layout], opts: &EvalOptions) -> Result<EvalReport> {
    if generated.is_empty() || reference.is_empty() {
        return Err(Error::Validation("evaluation needs two nonempty corpora".into()));
    }
    check_shared_schema(generated.iter().chain(reference))?;
    let cfg = DocEmdConfig::default().with_grid(opts.grid).with_lambda(opts.lambda);
    let reports = doc_emd_reports(generated, reference, &cfg)?;
    let totals: Vec<Vec<f64>> = reports.iter().map(|r| r.iter().map(|m| m.total).collect()).collect();
    let asg = hungarian(&totals)?;
    let doc_emd = asg.total_cost / asg.pairs.len() as f64;
    let docsim = set_score_docsim(generated, reference)?;
    let sw = wasserstein_seq_with(generated, reference, EXACT_POOL_LIMIT, opts.seed)?;
    let gen_summary = corpus_summary(generated, opts.overlap_mode);
    let ref_summary = corpus_summary(reference, opts.overlap_mode);
    let pairs: Vec<MatchedPair> = asg
        .pairs
        .iter()
        .map(|&(i, j)| MatchedPair {
            generated: layout_name(&generated[i], i, "generated"),
            reference: layout_name(&reference[j], j, "reference"),
            report: reports[i][j].clone(),
        })
        .collect();
    let exact_check = if opts.exact_check {
        Some(exact_check(generated, reference, &asg.pairs, &reports, opts.grid)?)
    } else {
        None
    };
    Ok(EvalReport {
        options: opts.clone(),
        row: EvalRow {
            docsim,
            doc_emd,
            overlap: gen_summary.mean_overlap,
            coverage: gen_summary.mean_coverage,
            class_w: sw.class_w,
            bbox_w: sw.bbox_w,
            n_generated: generated.len(),
            n_reference: reference.len(),
            grid: opts.grid,
            lambda: opts.lambda,
            seed: opts.seed,
        },
        generated: gen_summary,
        reference: ref_summary,
        pairs,
        exact_check,
    })
}

fn exact_check(
    a: &[Layout],
    b: &[Layout],
    pairs: &[(usize, usize)],
    reports: &[Vec<MetricReport>],
    grid: usize,
) -> Result<ExactCheck> {
    let mut out = ExactCheck { compared: 0, skipped: 0, max_abs_diff: 0.0 };
    for &(i, j) in pairs {
        for &(c, value) in &reports[i][j].per_class {
            let boxes = |l: &Layout| l.of_class(c).copied().collect::<Vec<_>>();
            let pa = rasterize(&boxes(&a[i]), a[i].page(), grid)?;
            let pb = rasterize(&boxes(&b[j]), b[j].page(), grid)?;
            match emd_lp_oracle(&pa, &pb) {
                Ok(v) => {
                    out.compared += 1;
                    out.max_abs_diff = out.max_abs_diff.max((v - value).abs());
                }
                Err(Error::SizeGuard { .. }) => out.skipped += 1,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// Loads both corpora, evaluates, and writes `eval.csv`, `eval.json` and
/// `pairs.csv` into `out`.
pub fn cmd_eval(
    generated: &Path,
    reference: &Path,
    schema: Option<&Arc<ClassSchema>>,
    opts: &EvalOptions,
    out: &Path,
) -> Result<EvalReport> {
    require_file(generated)?;
    require_file(reference)?;
    prepare_out_dir(out)?;
    let a = load_corpus(generated, schema)?;
    let b = load_corpus(reference, schema)?;
    let report = evaluate(&a, &b, opts)?;
    fs::write(out.join("eval.csv"), format!("{EVAL_CSV_HEADER}\n{}\n", report.row.csv_row()))?;
    write_json(&out.join("eval.json"), &report)?;
    let names = a[0].schema().names().to_vec();
    let mut csv = MetricReport::csv_header(&names) + "\n";
    for p in &report.pairs {
        csv += &p.report.csv_row(&p.generated, &p.reference, &names);
        csv.push('\n');
    }
    fs::write(out.join("pairs.csv"), csv)?;
    Ok(report)
}

/// Token vocabulary, padded length and padded token rows of a corpus.
pub fn tokenize_corpus(
    corpus: &[Layout],
    grid: usize,
    max_len: Option<usize>,
) -> Result<(Vocabulary, usize, Vec<Vec<u32>>)> {
    let first = corpus.first().ok_or_else(|| Error::Validation("training corpus is empty".into()))?;
    check_shared_schema(corpus)?;
    let vocab = Vocabulary::for_schema(grid, first.schema())?;
    let longest = corpus.iter().map(Layout::len).max().unwrap_or(0);
    let len = max_len.unwrap_or(5 * longest + 2);
    let mut rows = Vec::with_capacity(corpus.len());
    for (i, l) in corpus.iter().enumerate() {
        let seq = quantize(l, &vocab)?;
        if seq.len() > len {
            return Err(Error::Validation(format!(
                "layout {i} needs {} tokens but the sequence length is {len}",
                seq.len()
            )));
        }
        rows.push(seq.padded(len, &vocab)?.tokens);
    }
    Ok((vocab, len, rows))
}

/// Trains on a corpus. `cfg.max_len` is replaced by the corpus' longest
/// sequence unless `fixed_len` is set. Decoded samples use the first
/// layout's page size.
pub fn train_model(
    corpus: &[Layout],
    grid: usize,
    fixed_len: Option<usize>,
    cfg: &TrainConfig,
    on_step: impl FnMut(&LossRow),
) -> Result<(LayoutModel, Vec<LossRow>)> {
    let (vocab, len, rows) = tokenize_corpus(corpus, grid, fixed_len)?;
    let cfg = TrainConfig { max_len: len, ..cfg.clone() };
    let out = train_with(&rows, vocab.size(), &cfg, on_step)?;
    let model = LayoutModel {
        params: out.params,
        schedule: out.schedule,
        vocab,
        schema: corpus[0].schema().clone(),
        page: corpus[0].page(),
        train: cfg,
    };
    Ok((model, out.log))
}

/// Trains and writes `model.json` and `loss.csv` into `out`.
pub fn cmd_train(
    corpus: &Path,
    schema: Option<&Arc<ClassSchema>>,
    grid: usize,
    cfg: &TrainConfig,
    out: &Path,
    on_step: impl FnMut(&LossRow),
) -> Result<(LayoutModel, Vec<LossRow>)> {
    require_file(corpus)?;
    prepare_out_dir(out)?;
    let layouts = load_corpus(corpus, schema)?;
    let (model, log) = train_model(&layouts, grid, None, cfg, on_step)?;
    model.save(&out.join("model.json"))?;
    write_loss_log(&log, fs::File::create(out.join("loss.csv"))?)?;
    Ok((model, log))
}

#[derive(Debug, Clone, Serialize)]
pub struct GenerateStats {
    pub seed: u64,
    pub count: usize,
    pub clamp: bool,
    pub valid: usize,
    pub validity_rate: f64,
    pub dropped_groups: usize,
}

/// Samples `count` layouts and writes `samples.jsonl` and `generate.json`.
pub fn cmd_generate(
    checkpoint: &Path,
    count: usize,
    seed: u64,
    opts: SampleOptions,
    out: &Path,
) -> Result<(SampleOutput, GenerateStats)> {
    require_file(checkpoint)?;
    prepare_out_dir(out)?;
    let model = LayoutModel::load(checkpoint)?;
    let samples = model.sample(count, seed, opts)?;
    write_jsonl_file(&out.join("samples.jsonl"), &samples.layouts)?;
    let stats = GenerateStats {
        seed,
        count,
        clamp: opts.clamp,
        valid: samples.valid,
        validity_rate: samples.validity_rate(),
        dropped_groups: samples.dropped_groups,
    };
    write_json(&out.join("generate.json"), &stats)?;
    Ok((samples, stats))
}

pub fn cmd_render(corpus: &Path, schema: Option<&Arc<ClassSchema>>, out: &Path) -> Result<Vec<PathBuf>> {
    require_file(corpus)?;
    prepare_out_dir(out)?;
    render_corpus(&load_corpus(corpus, schema)?, out)
}

/// Writes `plan.json` into `out`.
pub fn cmd_mosaic_plan(
    generated: &Path,
    real: &Path,
    schema: Option<&Arc<ClassSchema>>,
    weights: MosaicWeights,
    out: &Path,
) -> Result<MosaicPlan> {
    require_file(generated)?;
    require_file(real)?;
    prepare_out_dir(out)?;
    let plan = mosaic_plan(&load_corpus(generated, schema)?, &load_corpus(real, schema)?, weights)?;
    write_json(&out.join("plan.json"), &plan)?;
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationGrid {
    pub lrs: Vec<f64>,
    pub diffusion_steps: Vec<usize>,
    /// Shared training settings; `lr` and `diffusion_steps` are overridden
    /// per cell.
    pub base: TrainConfig,
    pub samples: usize,
    pub token_grid: usize,
    pub eval: EvalOptions,
    pub sample: SampleOptions,
}

pub const ABLATION_CSV_HEADER: &str =
    "lr,T,train_steps,doc_emd,docsim,overlap,coverage,validity_rate,final_loss,seed";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub lr: f64,
    #[serde(rename = "T")]
    pub diffusion_steps: usize,
    pub train_steps: usize,
    pub doc_emd: f64,
    pub docsim: f64,
    pub overlap: f64,
    pub coverage: f64,
    pub validity_rate: f64,
    pub final_loss: f64,
    pub seed: u64,
}

impl AblationRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.lr,
            self.diffusion_steps,
            self.train_steps,
            self.doc_emd,
            self.docsim,
            self.overlap,
            self.coverage,
            self.validity_rate,
            self.final_loss,
            self.seed
        )
    }
}

/// Trains, samples and evaluates one model per `(lr, T)` cell. Rows come
/// back sorted by `(lr, T)`.
pub fn ablate(
    corpus: &[Layout],
    heldout: &[Layout],
    grid: &AblationGrid,
    mut on_cell: impl FnMut(&AblationRow),
) -> Result<Vec<AblationRow>> {
    if grid.lrs.is_empty() || grid.diffusion_steps.is_empty() {
        return Err(Error::Validation("ablation grid needs at least one lr and one T".into()));
    }
    let mut lrs = grid.lrs.clone();
    lrs.sort_by(f64::total_cmp);
    lrs.dedup();
    let mut ts = grid.diffusion_steps.clone();
    ts.sort_unstable();
    ts.dedup();
    let mut rows = Vec::new();
    for &lr in &lrs {
        for &t in &ts {
            let cfg = TrainConfig { lr, diffusion_steps: t, ..grid.base.clone() };
            let (model, log) = train_model(corpus, grid.token_grid, None, &cfg, |_| {})?;
            let samples = model.sample(grid.samples, grid.base.seed, grid.sample)?;
            let report = evaluate(&samples.layouts, heldout, &grid.eval)?;
            let row = AblationRow {
                lr,
                diffusion_steps: t,
                train_steps: cfg.max_steps,
                doc_emd: report.row.doc_emd,
                docsim: report.row.docsim,
                overlap: report.row.overlap,
                coverage: report.row.coverage,
                validity_rate: samples.validity_rate(),
                final_loss: log.last().map_or(f64::NAN, |r| r.loss),
                seed: grid.base.seed,
            };
            on_cell(&row);
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Runs [`ablate`] and writes `ablation.csv`. Without a held-out corpus the
/// last fifth of `corpus` is held out.
pub fn cmd_ablate(
    corpus: &Path,
    heldout: Option<&Path>,
    schema: Option<&Arc<ClassSchema>>,
    grid: &AblationGrid,
    out: &Path,
    on_cell: impl FnMut(&AblationRow),
) -> Result<Vec<AblationRow>> {
    require_file(corpus)?;
    if let Some(h) = heldout {
        require_file(h)?;
    }
    prepare_out_dir(out)?;
    let mut train = load_corpus(corpus, schema)?;
    let held = match heldout {
        Some(h) => load_corpus(h, schema)?,
        None => {
            if train.len() < 2 {
                return Err(Error::Validation("corpus too small to split off a held-out set".into()));
            }
            let cut = train.len() - (train.len() / 5).max(1);
            train.split_off(cut)
        }
    };
    let rows = ablate(&train, &held, grid, on_cell)?;
    let mut csv = format!("{ABLATION_CSV_HEADER}\n");
    for r in &rows {
        csv += &r.csv_row();
        csv.push('\n');
    }
    fs::write(out.join("ablation.csv"), csv)?;
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Coco,
    Jsonl,
}

impl std::str::FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coco" => Ok(Self::Coco),
            "jsonl" => Ok(Self::Jsonl),
            _ => Err(Error::Validation(format!("unknown input format '{s}' (expected coco or jsonl)"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IngestStats {
    pub layouts: usize,
    pub boxes: usize,
    pub schema: Vec<String>,
    pub dropped: usize,
    pub clipped: usize,
    pub orphaned: usize,
}

/// Converts a COCO document (or re-validates a JSONL file) into
/// `layouts.jsonl` plus `ingest.json`.
pub fn cmd_ingest(
    input: &Path,
    format: InputFormat,
    schema: Option<&Arc<ClassSchema>>,
    out: &Path,
) -> Result<IngestStats> {
    require_file(input)?;
    prepare_out_dir(out)?;
    let (layouts, dropped, clipped, orphaned) = match format {
        InputFormat::Coco => {
            let r = crate::coco::ingest_coco(&fs::read_to_string(input)?, schema.cloned())?;
            (r.layouts, r.dropped, r.clipped, r.orphaned)
        }
        InputFormat::Jsonl => (load_corpus(input, schema)?, 0, 0, 0),
    };
    write_jsonl_file(&out.join("layouts.jsonl"), &layouts)?;
    let stats = IngestStats {
        layouts: layouts.len(),
        boxes: layouts.iter().map(Layout::len).sum(),
        schema: layouts.first().map(|l| l.schema().names().to_vec()).unwrap_or_default(),
        dropped,
        clipped,
        orphaned,
    };
    write_json(&out.join("ingest.json"), &stats)?;
    Ok(stats)
}

/// Default token grid for training.
pub const DEFAULT_TOKEN_GRID: usize = DEFAULT_GRID;

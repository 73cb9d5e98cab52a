//! Experiment stages.
//!
//! Every stage reads its inputs from the output directory and writes its
//! results back there, so stages can be run one at a time or chained by
//! [`report`]. Layout:
//!
//! ```text
//! <out>/<setting>/model/              checkpoint
//! <out>/<setting>/train_log.csv       epoch,loss,test_accuracy
//! <out>/<setting>/eval_subset.csv     image_id,path,label
//! <out>/<setting>/maps.csv            image_id,method,row,col,value
//! <out>/<setting>/scores/<METRIC>.csv image_id,method,metric,score
//! <out>/<setting>/degenerate.csv      metric,method,count
//! <out>/<setting>/ranks/<METRIC>.csv  image_id,<method>...
//! <out>/<setting>/alpha/<METRIC>.json alpha report with bootstrap values
//! <out>/<setting>/alpha.csv           per-metric summary (x100)
//! <out>/<setting>/rank_hist.csv       metric,method,position,count
//! <out>/<setting>/benchsize/<METRIC>.json and .csv
//! <out>/<setting>/benchsize.csv       per-metric summary
//! <out>/<setting>/calib.csv           AdaECE and accuracy (x100)
//! <out>/compare.csv, heatmap.csv, calib.csv, benchsize.csv
//! <out>/interp.csv, <out>/interp/beta-<b>/...
//! ```
//!
//! `<setting>` is the lower-cased setting name (`baseline`, `fl+fp`, ...).
//! The explained class of every image is its ground-truth label.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use relbench_core::benchsize::{min_benchmark_size, WinCounts};
use relbench_core::calib::{accuracy, eval_regular_vs_fp, CalibReport, DEFAULT_BINS};
use relbench_core::dataset::select_eval_subset;
use relbench_core::metrics::{
    assemble_matrices, evaluate_row, EvalItem, MetricConfig, MetricKind, MetricValues, ScoreMatrix,
};
use relbench_core::nn::ToyNet;
use relbench_core::oracle::ScoringOracle;
use relbench_core::perturb::{BlurParams, FpConfig, PatchGrid, Upsample};
use relbench_core::saliency::{explain as explain_map, saliency_proxy, ExplainConfig, MethodKind, RiseParams};
use relbench_core::stats::{
    bootstrap_iteration, collect_bootstrap, krippendorff_alpha_ordinal, rank_rows, AlphaReport, RankMatrix,
};
use relbench_core::train::{train_epoch, Objective, Sgd, TrainConfig, TrainingSetting};
use relbench_core::{Image, Rng, SaliencyMap};

use crate::bridge::BridgeOracle;
use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::{ExperimentConfig, OracleSpec};
use crate::manifest::load_split;
use crate::significance::{compare_settings, Comparison};
use crate::{Error, Result, StageExt};

const SEED_INIT: u64 = 1;
const SEED_ORDER: u64 = 2;
const SEED_SUBSET: u64 = 3;
const SEED_EXPLAIN: u64 = 4;
const SEED_BOOTSTRAP: u64 = 5;
const SEED_CALIB: u64 = 6;

fn stage_seed(seed: u64, stage: u64) -> u64 {
    Rng::derive(seed, stage).next_u64()
}

pub fn setting_dir(out: &Path, setting: &TrainingSetting) -> PathBuf {
    out.join(setting.name().to_ascii_lowercase())
}

pub fn model_dir(dir: &Path) -> PathBuf {
    dir.join("model")
}

fn metric_index(kind: MetricKind) -> u64 {
    MetricKind::ALL.iter().position(|&k| k == kind).unwrap_or(0) as u64
}

fn method_index(kind: MethodKind) -> u64 {
    MethodKind::ALL.iter().position(|&k| k == kind).unwrap_or(0) as u64
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let csv_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    if let Some(p) = path.parent() {
        create_dir(p)?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let bad = |msg: String| Error::Manifest {
        path: path.to_path_buf(),
        msg,
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = r
        .records()
        .map(|rec| {
            rec.map(|rec| rec.iter().map(str::to_string).collect())
                .map_err(|e| bad(e.to_string()))
        })
        .collect::<Result<_>>()?;
    Ok((header, rows))
}

fn parse_num<T: std::str::FromStr>(path: &Path, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Manifest {
        path: path.to_path_buf(),
        msg: format!("bad number `{v}`"),
    })
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    if let Some(p) = path.parent() {
        create_dir(p)?;
    }
    let mut text = serde_json::to_string_pretty(v).map_err(|e| Error::Numeric(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Manifest {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

fn pct(v: f64) -> String {
    format!("{:.4}", 100.0 * v)
}

/// The scorer used by a stage: a trained toy network or a bridge process.
#[derive(Debug)]
pub enum Oracle {
    Toy(ToyNet<f32>),
    Bridge(BridgeOracle),
}

impl Oracle {
    pub fn scorer(&self) -> &(dyn ScoringOracle + Sync) {
        match self {
            Oracle::Toy(n) => n,
            Oracle::Bridge(b) => b,
        }
    }

    pub fn net(&self) -> Option<&ToyNet<f32>> {
        match self {
            Oracle::Toy(n) => Some(n),
            Oracle::Bridge(_) => None,
        }
    }

    fn require_net(&self, what: &str) -> Result<&ToyNet<f32>> {
        self.net()
            .ok_or_else(|| Error::Config(format!("{what} needs the toy oracle")))
    }
}

/// Opens the configured oracle; the toy oracle loads the checkpoint in
/// `dir/model`.
pub fn open_oracle(cfg: &ExperimentConfig, dir: &Path) -> Result<Oracle> {
    match &cfg.oracle {
        OracleSpec::Toy => Ok(Oracle::Toy(load_checkpoint(&model_dir(dir))?)),
        OracleSpec::Bridge(cmd) => {
            let timeout = std::time::Duration::from_secs_f64(cfg.bridge_timeout);
            Ok(Oracle::Bridge(BridgeOracle::spawn(cmd, timeout)?))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub test_accuracy: f64,
}

pub fn test_accuracy(net: &ToyNet<f32>, data: &[(Image, usize)]) -> Result<f64> {
    let ok = data
        .par_iter()
        .map(|(img, label)| {
            let fwd = net.forward(img)?;
            let logits = fwd.logits();
            let arg = (0..logits.len()).fold(0, |b, i| if logits[i] > logits[b] { i } else { b });
            Ok(arg == *label)
        })
        .collect::<relbench_core::Result<Vec<bool>>>()?;
    Ok(accuracy(&ok))
}

/// Trains the toy net on the train split and writes the checkpoint and
/// log to `dir`.
pub fn train(cfg: &ExperimentConfig, objective: Objective, dir: &Path) -> Result<Vec<EpochLog>> {
    if cfg.oracle != OracleSpec::Toy {
        return Err(Error::Config("training needs the toy oracle".into()));
    }
    let seed = cfg.seed()?;
    let data = cfg.data()?;
    let (train_m, train_set) = load_split(data, "train")?;
    let (test_m, test_set) = load_split(data, "test")?;
    let first = &train_set
        .first()
        .ok_or_else(|| Error::Config(format!("{} has no training images", data.display())))?
        .0;
    let classes = train_m.class_count().max(test_m.class_count());
    let mut net = ToyNet::init(first.channels(), classes, &mut Rng::derive(seed, SEED_INIT));
    let mut opt = Sgd::new(&net);
    let tc = TrainConfig {
        lr: cfg.lr,
        ..TrainConfig::default()
    };
    let mut rng = Rng::derive(seed, SEED_ORDER);
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let loss = train_epoch(&mut net, &mut opt, &tc, &train_set, cfg.batch_size, objective, &mut rng)?;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("training loss diverged in epoch {epoch}")));
        }
        log.push(EpochLog {
            epoch,
            loss,
            test_accuracy: test_accuracy(&net, &test_set)?,
        });
    }
    save_checkpoint(&net, &model_dir(dir))?;
    write_csv(
        &dir.join("train_log.csv"),
        &["epoch", "loss", "test_accuracy"],
        log.iter()
            .map(|l| vec![l.epoch.to_string(), l.loss.to_string(), l.test_accuracy.to_string()]),
    )?;
    Ok(log)
}

/// The class-balanced evaluation subset of the test split.
#[derive(Debug, Clone)]
pub struct EvalSet {
    pub ids: Vec<String>,
    pub paths: Vec<PathBuf>,
    pub images: Vec<Image>,
    pub labels: Vec<usize>,
}

pub fn eval_set(cfg: &ExperimentConfig) -> Result<EvalSet> {
    let (m, images) = load_split(cfg.data()?, "test")?;
    let idx = select_eval_subset(
        &m.labels(),
        m.class_count(),
        cfg.eval_images,
        &mut Rng::derive(cfg.seed()?, SEED_SUBSET),
    )?;
    let mut set = EvalSet {
        ids: Vec::with_capacity(idx.len()),
        paths: Vec::with_capacity(idx.len()),
        images: Vec::with_capacity(idx.len()),
        labels: Vec::with_capacity(idx.len()),
    };
    for i in idx {
        let e = &m.entries[i];
        let id = e
            .path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| i.to_string());
        set.ids.push(id);
        set.paths.push(e.path.clone());
        set.images.push(images[i].0.clone());
        set.labels.push(images[i].1);
    }
    Ok(set)
}

fn explain_config(cfg: &ExperimentConfig, img: &Image) -> ExplainConfig {
    ExplainConfig {
        ig_steps: cfg.ig_steps,
        smooth_samples: cfg.smooth_samples,
        rise: RiseParams {
            masks: cfg.rise_masks,
            ..RiseParams::default()
        },
        ..ExplainConfig::for_image(img.height(), img.width())
    }
}

fn cell_error(image: &str, method: &str, e: relbench_core::Error) -> Error {
    relbench_core::Error::Cell {
        image: image.into(),
        method: method.into(),
        source: Box::new(e),
    }
    .into()
}

/// Saliency maps for every (image, method) pair, indexed `[image][method]`.
pub fn compute_maps(cfg: &ExperimentConfig, oracle: &Oracle, set: &EvalSet) -> Result<Vec<Vec<SaliencyMap>>> {
    for &m in &cfg.methods {
        if oracle.net().is_none() && (m.needs_features() || m.needs_gradients()) {
            return Err(Error::Config(format!(
                "method {m} needs network internals, which a bridge oracle does not expose"
            )));
        }
    }
    let Some(first) = set.images.first() else {
        return Ok(Vec::new());
    };
    let ecfg = explain_config(cfg, first);
    let seed = stage_seed(cfg.seed()?, SEED_EXPLAIN);
    (0..set.images.len())
        .into_par_iter()
        .map(|i| {
            let image_seed = Rng::derive(seed, i as u64).next_u64();
            cfg.methods
                .iter()
                .map(|&m| {
                    let mut rng = Rng::derive(image_seed, method_index(m));
                    explain_map(
                        m,
                        oracle.net(),
                        oracle.scorer(),
                        &set.images[i],
                        set.labels[i],
                        &ecfg,
                        &mut rng,
                    )
                    .map_err(|e| cell_error(&set.ids[i], m.name(), e))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Computes saliency maps for the evaluation subset and writes
/// `eval_subset.csv` and `maps.csv`.
pub fn explain(cfg: &ExperimentConfig, oracle: &Oracle, dir: &Path) -> Result<()> {
    let set = eval_set(cfg)?;
    let maps = compute_maps(cfg, oracle, &set)?;
    write_csv(
        &dir.join("eval_subset.csv"),
        &["image_id", "path", "label"],
        (0..set.ids.len()).map(|i| {
            vec![
                set.ids[i].clone(),
                set.paths[i].to_string_lossy().into_owned(),
                set.labels[i].to_string(),
            ]
        }),
    )?;
    let mut rows = Vec::new();
    for (id, per_image) in set.ids.iter().zip(&maps) {
        for (m, s) in cfg.methods.iter().zip(per_image) {
            for r in 0..s.rows() {
                for c in 0..s.cols() {
                    rows.push(vec![
                        id.clone(),
                        m.name().to_string(),
                        r.to_string(),
                        c.to_string(),
                        s.at(r, c).to_string(),
                    ]);
                }
            }
        }
    }
    write_csv(&dir.join("maps.csv"), &["image_id", "method", "row", "col", "value"], rows)
}

/// Reads `maps.csv`; returns the method names in column order and the
/// maps indexed `[image][method]` following `ids`.
/// `(row, col, value)` entries of one map.
type MapCells = Vec<(usize, usize, f64)>;

pub fn read_maps(path: &Path, ids: &[String]) -> Result<(Vec<String>, Vec<Vec<SaliencyMap>>)> {
    let bad = |msg: String| Error::Manifest {
        path: path.to_path_buf(),
        msg,
    };
    let (_, rows) = read_csv(path)?;
    let mut methods: Vec<String> = Vec::new();
    let mut cells: HashMap<(String, String), MapCells> = HashMap::new();
    for r in &rows {
        if r.len() != 5 {
            return Err(bad("expected image_id,method,row,col,value".into()));
        }
        if !methods.contains(&r[1]) {
            methods.push(r[1].clone());
        }
        cells.entry((r[0].clone(), r[1].clone())).or_default().push((
            parse_num(path, &r[2])?,
            parse_num(path, &r[3])?,
            parse_num(path, &r[4])?,
        ));
    }
    let mut maps = Vec::with_capacity(ids.len());
    for id in ids {
        let mut per_image = Vec::with_capacity(methods.len());
        for m in &methods {
            let v = cells
                .get(&(id.clone(), m.clone()))
                .ok_or_else(|| bad(format!("no {m} map for image {id}; rerun explain")))?;
            let rows = v.iter().map(|c| c.0 + 1).max().unwrap_or(0);
            let cols = v.iter().map(|c| c.1 + 1).max().unwrap_or(0);
            let mut data = vec![f64::NAN; rows * cols];
            for &(r, c, x) in v {
                data[r * cols + c] = x;
            }
            if v.len() != rows * cols || data.iter().any(|x| x.is_nan()) {
                return Err(bad(format!("incomplete {m} map for image {id}")));
            }
            per_image.push(SaliencyMap::new(rows, cols, data)?);
        }
        maps.push(per_image);
    }
    Ok((methods, maps))
}

pub fn metric_config(cfg: &ExperimentConfig, img: &Image) -> MetricConfig {
    MetricConfig {
        deletion_order: cfg.deletion_order,
        ..MetricConfig::for_image(img.height(), img.width())
    }
}

/// All eight score matrices for the given maps, rows computed in parallel.
pub fn score_matrices(
    cfg: &ExperimentConfig,
    oracle: &(dyn ScoringOracle + Sync),
    set: &EvalSet,
    methods: &[String],
    maps: Vec<Vec<SaliencyMap>>,
) -> Result<(Vec<ScoreMatrix>, Vec<Vec<MetricValues>>)> {
    let Some(first) = set.images.first() else {
        return Err(Error::Config("the evaluation subset is empty".into()));
    };
    let mcfg = metric_config(cfg, first);
    let items: Vec<EvalItem<'_>> = maps
        .into_iter()
        .enumerate()
        .map(|(i, maps)| EvalItem {
            id: set.ids[i].clone(),
            image: &set.images[i],
            class: set.labels[i],
            maps,
        })
        .collect();
    let rows = items
        .par_iter()
        .map(|it| evaluate_row(oracle, it, methods, &mcfg))
        .collect::<relbench_core::Result<Vec<_>>>()?;
    Ok((assemble_matrices(&rows, methods, &set.ids)?, rows))
}

pub fn write_scores(path: &Path, m: &ScoreMatrix) -> Result<()> {
    let name = m.kind().name();
    let mut rows = Vec::with_capacity(m.data().len());
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            rows.push(vec![
                m.image_ids()[i].clone(),
                m.methods()[j].clone(),
                name.to_string(),
                m.get(i, j).to_string(),
            ]);
        }
    }
    write_csv(path, &["image_id", "method", "metric", "score"], rows)
}

pub fn read_scores(path: &Path, kind: MetricKind) -> Result<ScoreMatrix> {
    let bad = |msg: String| Error::Manifest {
        path: path.to_path_buf(),
        msg,
    };
    let (header, rows) = read_csv(path)?;
    if header != ["image_id", "method", "metric", "score"] {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut ids: Vec<String> = Vec::new();
    let mut methods: Vec<String> = Vec::new();
    let mut cells = HashMap::new();
    for r in &rows {
        if r[2] != kind.name() {
            return Err(bad(format!("row for metric {} in the {} file", r[2], kind.name())));
        }
        if !ids.contains(&r[0]) {
            ids.push(r[0].clone());
        }
        if !methods.contains(&r[1]) {
            methods.push(r[1].clone());
        }
        cells.insert((r[0].clone(), r[1].clone()), parse_num::<f64>(path, &r[3])?);
    }
    let mut data = Vec::with_capacity(ids.len() * methods.len());
    for id in &ids {
        for m in &methods {
            data.push(
                *cells
                    .get(&(id.clone(), m.clone()))
                    .ok_or_else(|| bad(format!("missing score for image {id}, method {m}")))?,
            );
        }
    }
    Ok(ScoreMatrix::new(kind, methods, ids, data)?)
}

/// Evaluates the configured metrics on the maps of `dir` and writes one
/// score CSV per metric.
pub fn faithfulness(cfg: &ExperimentConfig, oracle: &Oracle, dir: &Path) -> Result<()> {
    let set = eval_set(cfg)?;
    let (methods, maps) = read_maps(&dir.join("maps.csv"), &set.ids)?;
    let (mats, rows) = score_matrices(cfg, oracle.scorer(), &set, &methods, maps)?;
    for m in mats.iter().filter(|m| cfg.metrics.contains(&m.kind())) {
        write_scores(&dir.join("scores").join(format!("{}.csv", m.kind().name())), m)?;
    }
    let mut deg = Vec::new();
    for &kind in &cfg.metrics {
        for (j, name) in methods.iter().enumerate() {
            let n = rows.iter().filter(|r| r[j].is_degenerate(kind)).count();
            deg.push(vec![kind.name().to_string(), name.clone(), n.to_string()]);
        }
    }
    write_csv(&dir.join("degenerate.csv"), &["metric", "method", "count"], deg)
}

/// Alpha with a bootstrap whose iterations run in parallel; the result
/// does not depend on the thread count.
pub fn alpha_report_parallel(ranks: &RankMatrix, iterations: usize, seed: u64) -> Result<AlphaReport> {
    let alpha = krippendorff_alpha_ordinal(ranks)?;
    let results: Vec<Option<f64>> = (0..iterations as u64)
        .into_par_iter()
        .map(|b| bootstrap_iteration(ranks, seed, b))
        .collect();
    Ok(AlphaReport::from_parts(alpha, collect_bootstrap(results))?)
}

pub fn alpha_json(kind: MetricKind, r: &AlphaReport) -> Value {
    json!({
        "metric": kind.name(),
        "alpha": r.alpha,
        "mean": r.mean,
        "ci_low": r.ci_low,
        "ci_high": r.ci_high,
        "degenerate": r.degenerate,
        "iterations": r.bootstrap.len() + r.degenerate,
        "bootstrap": r.bootstrap,
    })
}

pub fn read_alpha(path: &Path) -> Result<AlphaReport> {
    let v = read_json(path)?;
    let bad = || Error::Manifest {
        path: path.to_path_buf(),
        msg: "not an alpha report".into(),
    };
    let num = |k: &str| v[k].as_f64().ok_or_else(bad);
    Ok(AlphaReport {
        alpha: num("alpha")?,
        mean: num("mean")?,
        ci_low: num("ci_low")?,
        ci_high: num("ci_high")?,
        degenerate: v["degenerate"].as_u64().ok_or_else(bad)? as usize,
        bootstrap: v["bootstrap"]
            .as_array()
            .and_then(|a| a.iter().map(Value::as_f64).collect())
            .ok_or_else(bad)?,
    })
}

fn write_ranks(path: &Path, scores: &ScoreMatrix, ranks: &RankMatrix) -> Result<()> {
    let mut header = vec!["image_id"];
    header.extend(scores.methods().iter().map(String::as_str));
    write_csv(
        path,
        &header,
        (0..ranks.rows()).map(|i| {
            std::iter::once(scores.image_ids()[i].clone())
                .chain(ranks.row(i).iter().map(|r| r.to_string()))
                .collect::<Vec<_>>()
        }),
    )
}

pub fn read_ranks(path: &Path) -> Result<(Vec<String>, RankMatrix)> {
    let (header, rows) = read_csv(path)?;
    let methods: Vec<String> = header.into_iter().skip(1).collect();
    let mut data = Vec::with_capacity(rows.len() * methods.len());
    for r in &rows {
        for v in r.iter().skip(1) {
            data.push(parse_num(path, v)?);
        }
    }
    Ok((methods.clone(), RankMatrix::new(rows.len(), methods.len(), data)?))
}

/// Share of images placing each method at each rank position. A tie
/// group spanning positions `a..=b` gives each member `1/(b-a+1)` of a
/// count at every position in the span.
pub fn rank_histogram(ranks: &RankMatrix) -> Vec<Vec<f64>> {
    let m = ranks.cols();
    let mut hist = vec![vec![0.0; m]; m];
    for i in 0..ranks.rows() {
        let row = ranks.row(i);
        for (j, &r) in row.iter().enumerate() {
            let g = row.iter().filter(|&&x| x == r).count();
            let lo = r - (g as f64 - 1.0) / 2.0;
            for k in 0..g {
                let pos = (lo + k as f64).round() as usize;
                hist[j][pos - 1] += 1.0 / g as f64;
            }
        }
    }
    hist
}

/// Ranks, alpha reports and rank histograms for the configured metrics.
pub fn alpha(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<(MetricKind, AlphaReport)>> {
    let seed = stage_seed(cfg.seed()?, SEED_BOOTSTRAP);
    let mut reports = Vec::new();
    let mut summary = Vec::new();
    let mut hist_rows = Vec::new();
    for &kind in &cfg.metrics {
        let scores = read_scores(&dir.join("scores").join(format!("{}.csv", kind.name())), kind)?;
        let ranks = rank_rows(&scores);
        write_ranks(&dir.join("ranks").join(format!("{}.csv", kind.name())), &scores, &ranks)?;
        let report = alpha_report_parallel(&ranks, cfg.bootstrap, Rng::derive(seed, metric_index(kind)).next_u64())
            .map_err(|e| Error::Numeric(format!("alpha for {}: {e}", kind.name())))?;
        write_json(
            &dir.join("alpha").join(format!("{}.json", kind.name())),
            &alpha_json(kind, &report),
        )?;
        summary.push(vec![
            kind.name().to_string(),
            pct(report.alpha),
            pct(report.mean),
            pct(report.ci_low),
            pct(report.ci_high),
            report.degenerate.to_string(),
        ]);
        for (j, counts) in rank_histogram(&ranks).iter().enumerate() {
            for (p, c) in counts.iter().enumerate() {
                hist_rows.push(vec![
                    kind.name().to_string(),
                    scores.methods()[j].clone(),
                    (p + 1).to_string(),
                    format!("{c:.4}"),
                ]);
            }
        }
        reports.push((kind, report));
    }
    write_csv(
        &dir.join("alpha.csv"),
        &["metric", "alpha", "mean", "ci_low", "ci_high", "degenerate"],
        summary,
    )?;
    write_csv(&dir.join("rank_hist.csv"), &["metric", "method", "position", "count"], hist_rows)?;
    Ok(reports)
}

/// Minimum benchmark size per metric. Metrics whose best method is tied,
/// or whose full-size success probability stays below target, are
/// reported with a status instead of a size (`p_full` holds P at the
/// full size for `no_solution`).
pub fn benchsize(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let mut summary = Vec::new();
    for &kind in &cfg.metrics {
        let (methods, ranks) = read_ranks(&dir.join("ranks").join(format!("{}.csv", kind.name())))?;
        let counts = WinCounts::from_ranks(&ranks)?;
        let base = dir.join("benchsize").join(kind.name());
        match min_benchmark_size(&counts, cfg.risk, cfg.p_samp, cfg.search) {
            Ok(r) => {
                let best = &methods[relbench_core::benchsize::identify_best(&counts)?];
                write_json(
                    &base.with_extension("json"),
                    &json!({
                        "metric": kind.name(),
                        "best_method": best,
                        "win_counts": counts.counts(),
                        "n_star": r.n_star,
                        "n": r.n,
                        "r": r.r,
                        "risk": r.risk,
                        "p_samp": r.p_samp,
                        "requested_mode": format!("{:?}", r.requested).to_lowercase(),
                        "mode_used": format!("{:?}", r.mode_used).to_lowercase(),
                        "evaluated": r.evaluated.iter().map(|&(n, p)| json!([n, p])).collect::<Vec<_>>(),
                    }),
                )?;
                let mut pairs = r.evaluated.clone();
                pairs.sort_by_key(|p| p.0);
                write_csv(
                    &base.with_extension("csv"),
                    &["n_prime", "p"],
                    pairs.iter().map(|&(n, p)| vec![n.to_string(), p.to_string()]),
                )?;
                summary.push(vec![
                    kind.name().to_string(),
                    "ok".into(),
                    best.clone(),
                    r.n_star.to_string(),
                    r.n.to_string(),
                    pct(r.r),
                    format!("{:?}", r.mode_used).to_lowercase(),
                    String::new(),
                ]);
            }
            Err(relbench_core::Error::TiedBest) => {
                summary.push(no_size(kind, "tied_best", counts.total(), String::new()));
            }
            Err(relbench_core::Error::NoSolution { p_full }) => {
                summary.push(no_size(kind, "no_solution", counts.total(), p_full.to_string()));
            }
            Err(e) => return Err(e.into()),
        }
    }
    write_csv(
        &dir.join("benchsize.csv"),
        &["metric", "status", "best_method", "n_star", "n", "r", "mode_used", "p_full"],
        summary,
    )
}

fn no_size(kind: MetricKind, status: &str, n: usize, p_full: String) -> Vec<String> {
    let mut row = vec![kind.name().to_string(), status.to_string()];
    row.extend([String::new(), String::new(), n.to_string(), String::new(), String::new(), p_full]);
    row
}

/// AdaECE and accuracy on the whole test split, regular and FP-perturbed.
/// FP masks come from the network's own feature-map saliency.
pub fn calib(cfg: &ExperimentConfig, oracle: &Oracle, dir: &Path) -> Result<CalibReport> {
    let net = oracle.require_net("calibration")?;
    let (_, data) = load_split(cfg.data()?, "test")?;
    let (images, labels): (Vec<Image>, Vec<usize>) = data.into_iter().unzip();
    let Some(first) = images.first() else {
        return Err(Error::Config("the test split is empty".into()));
    };
    let maps = images
        .par_iter()
        .map(|img| net.forward(img).map(|f| saliency_proxy(&f)))
        .collect::<relbench_core::Result<Vec<_>>>()?;
    let fp = FpConfig {
        grid: PatchGrid::new(first.height() / 4, first.width() / 4),
        blur: BlurParams::for_height(first.height()),
        upsample: Upsample::Bilinear,
    };
    let mut rng = Rng::derive(cfg.seed()?, SEED_CALIB);
    let report = eval_regular_vs_fp(net, &images, &labels, &maps, &fp, DEFAULT_BINS, &mut rng)?;
    write_csv(
        &dir.join("calib.csv"),
        &["bins", "ada_ece_regular", "ada_ece_fp", "accuracy_regular", "accuracy_fp"],
        [calib_row(&report)],
    )?;
    Ok(report)
}

fn calib_row(r: &CalibReport) -> Vec<String> {
    vec![
        r.bins.to_string(),
        pct(r.ece_regular),
        pct(r.ece_fp),
        pct(r.acc_regular),
        pct(r.acc_fp),
    ]
}

/// Heatmap annotation: `Δ / baseline → candidate`, x100.
pub fn heatmap_label(c: &Comparison) -> String {
    format!(
        "{:.1} / {:.1} → {:.1}",
        100.0 * c.delta,
        100.0 * c.baseline_mean,
        100.0 * c.candidate_mean
    )
}

/// Compares every setting after the first against the first, metric by
/// metric, and gathers the per-setting calibration and benchmark-size
/// tables into `out`.
pub fn compare(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<(MetricKind, TrainingSetting, Comparison)>> {
    let (baseline, candidates) = cfg
        .settings
        .split_first()
        .ok_or_else(|| Error::Config("`settings` is empty".into()))?;
    if candidates.is_empty() {
        return Err(Error::Config("`settings` needs a baseline and at least one candidate".into()));
    }
    let base_dir = setting_dir(out, baseline);
    let mut results = Vec::new();
    let mut rows = Vec::new();
    let mut heat = Vec::new();
    for &kind in &cfg.metrics {
        let file = format!("{}.json", kind.name());
        let base = read_alpha(&base_dir.join("alpha").join(&file))?;
        for cand in candidates {
            let other = read_alpha(&setting_dir(out, cand).join("alpha").join(&file))?;
            let c = compare_settings(&base, &other)?;
            rows.push(vec![
                kind.name().to_string(),
                baseline.name(),
                cand.name(),
                c.test.name().to_string(),
                c.statistic.to_string(),
                format!("{:e}", c.p_value),
                c.significant.to_string(),
                pct(c.baseline_mean),
                pct(c.candidate_mean),
                pct(c.delta),
                c.render(),
            ]);
            heat.push(vec![
                kind.name().to_string(),
                cand.name(),
                pct(c.delta),
                pct(c.baseline_mean),
                pct(c.candidate_mean),
                c.significant.to_string(),
                heatmap_label(&c),
            ]);
            results.push((kind, *cand, c));
        }
    }
    write_csv(
        &out.join("compare.csv"),
        &[
            "metric",
            "baseline",
            "candidate",
            "test",
            "statistic",
            "p_value",
            "significant",
            "baseline_mean",
            "candidate_mean",
            "delta",
            "cell",
        ],
        rows,
    )?;
    write_csv(
        &out.join("heatmap.csv"),
        &["metric", "setting", "delta", "baseline", "candidate", "significant", "label"],
        heat,
    )?;
    gather_tables(cfg, out)?;
    Ok(results)
}

fn gather_tables(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let mut calib_rows = Vec::new();
    let mut bench_rows = Vec::new();
    for s in &cfg.settings {
        let dir = setting_dir(out, s);
        let calib = dir.join("calib.csv");
        if calib.exists() {
            for r in read_csv(&calib)?.1 {
                calib_rows.push(std::iter::once(s.name()).chain(r).collect::<Vec<_>>());
            }
        }
        let bench = dir.join("benchsize.csv");
        if bench.exists() {
            for r in read_csv(&bench)?.1 {
                bench_rows.push(std::iter::once(s.name()).chain(r).collect::<Vec<_>>());
            }
        }
    }
    if !calib_rows.is_empty() {
        write_csv(
            &out.join("calib.csv"),
            &["setting", "bins", "ada_ece_regular", "ada_ece_fp", "accuracy_regular", "accuracy_fp"],
            calib_rows,
        )?;
    }
    if !bench_rows.is_empty() {
        write_csv(
            &out.join("benchsize.csv"),
            &["setting", "metric", "status", "best_method", "n_star", "n", "r", "mode_used", "p_full"],
            bench_rows,
        )?;
    }
    Ok(())
}

/// Explain, faithfulness, alpha, benchsize and (with the toy oracle)
/// calibration for one trained model in `dir`.
pub fn evaluate_model(cfg: &ExperimentConfig, dir: &Path, with_calib: bool) -> Result<()> {
    let oracle = open_oracle(cfg, dir).stage("load")?;
    explain(cfg, &oracle, dir).stage("explain")?;
    faithfulness(cfg, &oracle, dir).stage("faithfulness")?;
    alpha(cfg, dir).stage("alpha")?;
    benchsize(cfg, dir).stage("benchsize")?;
    if with_calib {
        calib(cfg, &oracle, dir).stage("calib")?;
    }
    Ok(())
}

/// The whole experiment: every configured setting is trained (unless its
/// checkpoint exists), explained, evaluated and summarized, then the
/// settings are compared.
pub fn report(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.oracle != OracleSpec::Toy {
        return Err(Error::Config("report trains and compares settings and needs the toy oracle".into()));
    }
    cfg.validate()?;
    let out = cfg.out()?;
    for s in &cfg.settings {
        let dir = setting_dir(out, s);
        if !model_dir(&dir).is_dir() {
            train(cfg, Objective::Setting(*s), &dir).stage("train")?;
        }
        evaluate_model(cfg, &dir, true)?;
    }
    compare(cfg, out).stage("compare")?;
    Ok(())
}

/// Alpha as a function of the interpolation weight: one model per beta.
pub fn interp(cfg: &ExperimentConfig) -> Result<Vec<(f64, MetricKind, AlphaReport)>> {
    if cfg.oracle != OracleSpec::Toy {
        return Err(Error::Config("interp trains models and needs the toy oracle".into()));
    }
    cfg.validate()?;
    let out = cfg.out()?;
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for &beta in &cfg.betas {
        let dir = out.join("interp").join(format!("beta-{beta:.2}"));
        if !model_dir(&dir).is_dir() {
            train(cfg, Objective::Interp(beta), &dir).stage("train")?;
        }
        let oracle = open_oracle(cfg, &dir).stage("load")?;
        explain(cfg, &oracle, &dir).stage("explain")?;
        faithfulness(cfg, &oracle, &dir).stage("faithfulness")?;
        for (kind, r) in alpha(cfg, &dir).stage("alpha")? {
            rows.push(vec![
                format!("{beta:.2}"),
                kind.name().to_string(),
                pct(r.mean),
                pct(r.ci_low),
                pct(r.ci_high),
            ]);
            results.push((beta, kind, r));
        }
    }
    write_csv(&out.join("interp.csv"), &["beta", "metric", "mean", "ci_low", "ci_high"], rows)?;
    Ok(results)
}

//! Faithfulness metrics and score matrices.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::oracle::ScoringOracle;
use crate::perturb::{
    apply_saliency_mask, blur, replace_patches, saliency_order, BlurParams, PatchGrid,
    SaliencyMaskKind, Upsample,
};
use crate::{Error, Image, Result, SaliencyMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricKind {
    Ad,
    Add,
    Dauc,
    Iauc,
    Dc,
    Ic,
    Dcnc,
    Icnc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

impl MetricKind {
    pub const ALL: [MetricKind; 8] = [
        MetricKind::Dauc,
        MetricKind::Dc,
        MetricKind::Dcnc,
        MetricKind::Iauc,
        MetricKind::Ic,
        MetricKind::Icnc,
        MetricKind::Ad,
        MetricKind::Add,
    ];

    pub fn direction(self) -> Direction {
        match self {
            MetricKind::Ad | MetricKind::Dauc => Direction::LowerBetter,
            _ => Direction::HigherBetter,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Ad => "AD",
            MetricKind::Add => "ADD",
            MetricKind::Dauc => "DAUC",
            MetricKind::Iauc => "IAUC",
            MetricKind::Dc => "DC",
            MetricKind::Ic => "IC",
            MetricKind::Dcnc => "DCNC",
            MetricKind::Icnc => "ICNC",
        }
    }

    fn index(self) -> usize {
        MetricKind::ALL.iter().position(|&m| m == self).unwrap()
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Invalid(format!("unknown metric `{s}`")))
    }
}

/// Confidence against the masked (or revealed) fraction of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    axis: Vec<f64>,
    conf: Vec<f64>,
}

impl Curve {
    pub fn new(axis: Vec<f64>, conf: Vec<f64>) -> Result<Self> {
        if axis.len() != conf.len() {
            return Err(Error::DimMismatch(format!(
                "curve with {} positions and {} confidences",
                axis.len(),
                conf.len()
            )));
        }
        if axis.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Invalid("curve axis must be strictly increasing".into()));
        }
        if axis.iter().chain(&conf).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteData);
        }
        Ok(Self { axis, conf })
    }

    /// Evenly spaced axis `t / (len - 1)`.
    pub fn uniform(conf: Vec<f64>) -> Result<Self> {
        let n = conf.len().saturating_sub(1).max(1) as f64;
        let axis = (0..conf.len()).map(|t| t as f64 / n).collect();
        Self::new(axis, conf)
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn confidences(&self) -> &[f64] {
        &self.conf
    }
}

/// Trapezoid rule. Curves with fewer than two points have zero area.
pub fn auc(curve: &Curve) -> f64 {
    curve
        .axis
        .windows(2)
        .zip(curve.conf.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
        .sum()
}

/// Order in which deletion removes patches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeletionOrder {
    #[default]
    MostSalientFirst,
    LeastSalientFirst,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricConfig {
    pub grid: PatchGrid,
    pub blur: BlurParams,
    pub upsample: Upsample,
    pub deletion_order: DeletionOrder,
}

impl MetricConfig {
    pub fn for_image(height: usize, width: usize) -> Self {
        Self {
            grid: PatchGrid::new(height / 4, width / 4),
            blur: BlurParams::for_height(height),
            upsample: Upsample::Bilinear,
            deletion_order: DeletionOrder::MostSalientFirst,
        }
    }
}

fn class_scores(oracle: &dyn ScoringOracle, batch: &[Image], class: usize) -> Result<Vec<f64>> {
    let rows = oracle.score_batch(batch)?;
    if rows.len() != batch.len() {
        return Err(Error::Oracle(format!(
            "{} rows for {} images",
            rows.len(),
            batch.len()
        )));
    }
    rows.iter()
        .map(|p| {
            p.get(class)
                .copied()
                .ok_or_else(|| Error::Oracle(format!("class {class} missing from response")))
        })
        .collect()
}

fn drop_score(y: f64, y_masked: f64, kind: SaliencyMaskKind) -> Result<f64> {
    if y == 0.0 {
        return Err(Error::ZeroConfidence);
    }
    Ok(match kind {
        SaliencyMaskKind::AdInspired => (y - y_masked).max(0.0) / y,
        SaliencyMaskKind::AddInspired => (y - y_masked) / y,
    })
}

/// AD with `AdInspired`, ADD with `AddInspired`.
pub fn average_drop(
    oracle: &dyn ScoringOracle,
    img: &Image,
    s: &SaliencyMap,
    class: usize,
    kind: SaliencyMaskKind,
    upsample: Upsample,
) -> Result<f64> {
    let masked = apply_saliency_mask(img, s, kind, upsample)?;
    let y = class_scores(oracle, &[img.clone(), masked], class)?;
    drop_score(y[0], y[1], kind)
}

/// The patch visited at each step.
pub fn step_order(s: &SaliencyMap, order: DeletionOrder) -> Vec<usize> {
    let mut o = saliency_order(s);
    if order == DeletionOrder::LeastSalientFirst {
        o.reverse();
    }
    o
}

/// Images of a deletion (`base = None`, patches zeroed) or insertion
/// (`base = Some(blurred)`, patches restored from `img`) curve, steps
/// `1..=T`.
fn curve_images(
    img: &Image,
    base: Option<&Image>,
    grid: PatchGrid,
    order: &[usize],
    cumulative: bool,
) -> Result<Vec<Image>> {
    (1..=order.len())
        .map(|t| {
            let cells = if cumulative { &order[..t] } else { &order[t - 1..t] };
            match base {
                None => replace_patches(img, None, grid, cells),
                Some(b) => replace_patches(b, Some(img), grid, cells),
            }
        })
        .collect()
}

/// Step 0 is the unmodified image; cumulative step `t` blacks out the first
/// `t` patches of the order, non-cumulative step `t` only patch `t`.
pub fn deletion_curve(
    oracle: &dyn ScoringOracle,
    img: &Image,
    s: &SaliencyMap,
    class: usize,
    grid: PatchGrid,
    cumulative: bool,
    order: DeletionOrder,
) -> Result<Curve> {
    grid.check_map(s)?;
    let order = step_order(s, order);
    let mut batch = vec![img.clone()];
    batch.extend(curve_images(img, None, grid, &order, cumulative)?);
    Curve::uniform(class_scores(oracle, &batch, class)?)
}

/// Step 0 is the fully blurred image; cumulative step `t` reveals the `t`
/// most salient patches, non-cumulative step `t` only patch `t`.
pub fn insertion_curve(
    oracle: &dyn ScoringOracle,
    img: &Image,
    s: &SaliencyMap,
    class: usize,
    grid: PatchGrid,
    cumulative: bool,
    blur_params: BlurParams,
) -> Result<Curve> {
    grid.check_map(s)?;
    let order = saliency_order(s);
    let base = blur(img, blur_params)?;
    let mut batch = curve_images(img, Some(&base), grid, &order, cumulative)?;
    batch.insert(0, base);
    Curve::uniform(class_scores(oracle, &batch, class)?)
}

/// Pearson correlation; `degenerate` marks a constant input, for which `r`
/// is reported as 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub r: f64,
    pub degenerate: bool,
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<Correlation> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch(format!("{} vs {} values", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::TooFewSteps(a.len()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(Correlation {
            r: 0.0,
            degenerate: true,
        });
    }
    let r = (sab / (libm::sqrt(saa * sbb))).clamp(-1.0, 1.0);
    Ok(Correlation {
        r,
        degenerate: false,
    })
}

/// Correlation between per-step confidence changes and the saliency of the
/// patch changed at each step. `conf` holds steps `0..=T`, `saliency` the
/// `T` visited patch values. Deletion uses drops, insertion gains;
/// cumulative curves use successive differences, non-cumulative ones
/// differences to step 0.
pub fn correlation_score(
    conf: &[f64],
    saliency: &[f64],
    kind: MetricKind,
) -> Result<Correlation> {
    let steps = conf.len().saturating_sub(1);
    if steps < 2 {
        return Err(Error::TooFewSteps(steps));
    }
    if saliency.len() != steps {
        return Err(Error::DimMismatch(format!(
            "{steps} steps but {} saliency values",
            saliency.len()
        )));
    }
    let delta: Vec<f64> = (1..=steps)
        .map(|t| match kind {
            MetricKind::Dc => Ok(conf[t - 1] - conf[t]),
            MetricKind::Dcnc => Ok(conf[0] - conf[t]),
            MetricKind::Ic => Ok(conf[t] - conf[t - 1]),
            MetricKind::Icnc => Ok(conf[t] - conf[0]),
            other => Err(Error::Invalid(format!("{other} is not a correlation metric"))),
        })
        .collect::<Result<_>>()?;
    pearson(&delta, saliency)
}

/// All eight metrics of one map, indexed as [`MetricKind::ALL`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValues {
    pub scores: [f64; 8],
    /// correlation metrics that hit a constant vector
    pub degenerate: [bool; 8],
}

impl MetricValues {
    pub fn get(&self, kind: MetricKind) -> f64 {
        self.scores[kind.index()]
    }

    pub fn is_degenerate(&self, kind: MetricKind) -> bool {
        self.degenerate[kind.index()]
    }
}

/// Computes every metric, scoring all perturbed images of the map in a
/// single oracle batch.
pub fn all_metrics(
    oracle: &dyn ScoringOracle,
    img: &Image,
    s: &SaliencyMap,
    class: usize,
    cfg: &MetricConfig,
) -> Result<MetricValues> {
    let grid = cfg.grid;
    grid.check_map(s)?;
    let t = grid.cells();
    let del_order = step_order(s, cfg.deletion_order);
    let ins_order = saliency_order(s);
    let base = blur(img, cfg.blur)?;

    let mut batch = Vec::with_capacity(4 * t + 4);
    batch.push(img.clone());
    batch.push(apply_saliency_mask(img, s, SaliencyMaskKind::AdInspired, cfg.upsample)?);
    batch.push(apply_saliency_mask(img, s, SaliencyMaskKind::AddInspired, cfg.upsample)?);
    batch.push(base.clone());
    batch.extend(curve_images(img, None, grid, &del_order, true)?);
    batch.extend(curve_images(img, None, grid, &del_order, false)?);
    batch.extend(curve_images(img, Some(&base), grid, &ins_order, true)?);
    batch.extend(curve_images(img, Some(&base), grid, &ins_order, false)?);
    let y = class_scores(oracle, &batch, class)?;

    let section = |k: usize, start: f64| {
        let mut v = Vec::with_capacity(t + 1);
        v.push(start);
        v.extend_from_slice(&y[4 + k * t..4 + (k + 1) * t]);
        v
    };
    let del_c = section(0, y[0]);
    let del_nc = section(1, y[0]);
    let ins_c = section(2, y[3]);
    let ins_nc = section(3, y[3]);
    let del_sal: Vec<f64> = del_order.iter().map(|&u| s.data()[u]).collect();
    let ins_sal: Vec<f64> = ins_order.iter().map(|&u| s.data()[u]).collect();

    let mut out = MetricValues {
        scores: [0.0; 8],
        degenerate: [false; 8],
    };
    let mut put = |kind: MetricKind, v: f64, flag: bool| {
        out.scores[kind.index()] = v;
        out.degenerate[kind.index()] = flag;
    };
    put(MetricKind::Ad, drop_score(y[0], y[1], SaliencyMaskKind::AdInspired)?, false);
    put(MetricKind::Add, drop_score(y[0], y[2], SaliencyMaskKind::AddInspired)?, false);
    put(MetricKind::Dauc, auc(&Curve::uniform(del_c.clone())?), false);
    put(MetricKind::Iauc, auc(&Curve::uniform(ins_c.clone())?), false);
    for (kind, conf, sal) in [
        (MetricKind::Dc, &del_c, &del_sal),
        (MetricKind::Dcnc, &del_nc, &del_sal),
        (MetricKind::Ic, &ins_c, &ins_sal),
        (MetricKind::Icnc, &ins_nc, &ins_sal),
    ] {
        let c = correlation_score(conf, sal, kind)?;
        put(kind, c.r, c.degenerate);
    }
    Ok(out)
}

/// One metric of one map.
pub fn metric_score(
    kind: MetricKind,
    oracle: &dyn ScoringOracle,
    img: &Image,
    s: &SaliencyMap,
    class: usize,
    cfg: &MetricConfig,
) -> Result<f64> {
    let grid = cfg.grid;
    match kind {
        MetricKind::Ad => average_drop(oracle, img, s, class, SaliencyMaskKind::AdInspired, cfg.upsample),
        MetricKind::Add => average_drop(oracle, img, s, class, SaliencyMaskKind::AddInspired, cfg.upsample),
        MetricKind::Dauc => Ok(auc(&deletion_curve(
            oracle, img, s, class, grid, true, cfg.deletion_order,
        )?)),
        MetricKind::Iauc => Ok(auc(&insertion_curve(oracle, img, s, class, grid, true, cfg.blur)?)),
        MetricKind::Dc | MetricKind::Dcnc => {
            let curve = deletion_curve(
                oracle,
                img,
                s,
                class,
                grid,
                kind == MetricKind::Dc,
                cfg.deletion_order,
            )?;
            let sal: Vec<f64> = step_order(s, cfg.deletion_order)
                .iter()
                .map(|&u| s.data()[u])
                .collect();
            Ok(correlation_score(curve.confidences(), &sal, kind)?.r)
        }
        MetricKind::Ic | MetricKind::Icnc => {
            let curve = insertion_curve(oracle, img, s, class, grid, kind == MetricKind::Ic, cfg.blur)?;
            let sal: Vec<f64> = saliency_order(s).iter().map(|&u| s.data()[u]).collect();
            Ok(correlation_score(curve.confidences(), &sal, kind)?.r)
        }
    }
}

/// `N x M` scores of one metric: rows are images, columns methods.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    kind: MetricKind,
    methods: Vec<String>,
    image_ids: Vec<String>,
    data: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(
        kind: MetricKind,
        methods: Vec<String>,
        image_ids: Vec<String>,
        data: Vec<f64>,
    ) -> Result<Self> {
        if methods.is_empty() || image_ids.is_empty() {
            return Err(Error::BadDims(format!(
                "score matrix {}x{}",
                image_ids.len(),
                methods.len()
            )));
        }
        if data.len() != methods.len() * image_ids.len() {
            return Err(Error::DimMismatch(format!(
                "{}x{} matrix with {} values",
                image_ids.len(),
                methods.len(),
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteData);
        }
        Ok(Self {
            kind,
            methods,
            image_ids,
            data,
        })
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn methods(&self) -> &[String] {
        &self.methods
    }

    pub fn image_ids(&self) -> &[String] {
        &self.image_ids
    }

    pub fn rows(&self) -> usize {
        self.image_ids.len()
    }

    pub fn cols(&self) -> usize {
        self.methods.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, image: usize, method: usize) -> f64 {
        self.data[image * self.cols() + method]
    }

    pub fn row(&self, image: usize) -> &[f64] {
        &self.data[image * self.cols()..(image + 1) * self.cols()]
    }
}

/// One image to evaluate: identifier, pixels, explained class and the
/// method maps in column order.
#[derive(Debug, Clone)]
pub struct EvalItem<'a> {
    pub id: String,
    pub image: &'a Image,
    pub class: usize,
    pub maps: Vec<SaliencyMap>,
}

fn cell_error(image: &str, method: &str, e: Error) -> Error {
    Error::Cell {
        image: image.into(),
        method: method.into(),
        source: alloc::boxed::Box::new(e),
    }
}

/// One metric over all images and methods.
pub fn evaluate_matrix(
    oracle: &dyn ScoringOracle,
    items: &[EvalItem<'_>],
    methods: &[String],
    kind: MetricKind,
    cfg: &MetricConfig,
) -> Result<ScoreMatrix> {
    let mut data = Vec::with_capacity(items.len() * methods.len());
    for item in items {
        check_width(item, methods.len())?;
        for (s, name) in item.maps.iter().zip(methods) {
            let v = metric_score(kind, oracle, item.image, s, item.class, cfg)
                .map_err(|e| cell_error(&item.id, name, e))?;
            data.push(v);
        }
    }
    ScoreMatrix::new(
        kind,
        methods.to_vec(),
        items.iter().map(|it| it.id.clone()).collect(),
        data,
    )
}

fn check_width(item: &EvalItem<'_>, m: usize) -> Result<()> {
    if item.maps.len() != m {
        return Err(Error::DimMismatch(format!(
            "image {} has {} maps for {m} methods",
            item.id,
            item.maps.len()
        )));
    }
    Ok(())
}

/// Per-cell metric values for one image row; used to assemble matrices
/// when rows are computed independently.
pub fn evaluate_row(
    oracle: &dyn ScoringOracle,
    item: &EvalItem<'_>,
    methods: &[String],
    cfg: &MetricConfig,
) -> Result<Vec<MetricValues>> {
    check_width(item, methods.len())?;
    item.maps
        .iter()
        .zip(methods)
        .map(|(s, name)| {
            all_metrics(oracle, item.image, s, item.class, cfg).map_err(|e| cell_error(&item.id, name, e))
        })
        .collect()
}

/// Builds the eight matrices, in [`MetricKind::ALL`] order, from per-row
/// values.
pub fn assemble_matrices(
    rows: &[Vec<MetricValues>],
    methods: &[String],
    image_ids: &[String],
) -> Result<Vec<ScoreMatrix>> {
    if rows.len() != image_ids.len() || rows.iter().any(|r| r.len() != methods.len()) {
        return Err(Error::DimMismatch("row values do not match the matrix shape".into()));
    }
    MetricKind::ALL
        .iter()
        .map(|&kind| {
            let data = rows.iter().flatten().map(|v| v.get(kind)).collect();
            ScoreMatrix::new(kind, methods.to_vec(), image_ids.to_vec(), data)
        })
        .collect()
}

/// All eight matrices, sharing the curves of each cell.
pub fn evaluate_all(
    oracle: &dyn ScoringOracle,
    items: &[EvalItem<'_>],
    methods: &[String],
    cfg: &MetricConfig,
) -> Result<Vec<ScoreMatrix>> {
    let rows = items
        .iter()
        .map(|item| evaluate_row(oracle, item, methods, cfg))
        .collect::<Result<Vec<_>>>()?;
    let ids: Vec<String> = items.iter().map(|it| it.id.clone()).collect();
    assemble_matrices(&rows, methods, &ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::FnOracle;
    use alloc::string::ToString;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn directions() {
        use Direction::*;
        let want = [
            (MetricKind::Ad, LowerBetter),
            (MetricKind::Add, HigherBetter),
            (MetricKind::Dauc, LowerBetter),
            (MetricKind::Iauc, HigherBetter),
            (MetricKind::Dc, HigherBetter),
            (MetricKind::Ic, HigherBetter),
            (MetricKind::Dcnc, HigherBetter),
            (MetricKind::Icnc, HigherBetter),
        ];
        for (k, d) in want {
            assert_eq!(k.direction(), d);
            assert_eq!(k.name().parse::<MetricKind>().unwrap(), k);
        }
    }

    #[test]
    fn auc_examples() {
        assert!(close(auc(&Curve::uniform(vec![1.0; 5]).unwrap()), 1.0));
        assert!(close(auc(&Curve::uniform(vec![1.0, 0.75, 0.5, 0.25, 0.0]).unwrap()), 0.5));
        let c = Curve::new(vec![0.0, 0.5, 1.0], vec![1.0, 0.6, 0.2]).unwrap();
        assert!(close(auc(&c), 0.6));
        let two = Curve::new(vec![0.0, 1.0], vec![0.3, 0.9]).unwrap();
        assert!(close(auc(&two), 0.6));
        assert!(Curve::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn drop_examples() {
        assert!(close(drop_score(0.8, 0.9, SaliencyMaskKind::AdInspired).unwrap(), 0.0));
        assert!(close(drop_score(0.8, 0.2, SaliencyMaskKind::AddInspired).unwrap(), 0.75));
        assert_eq!(drop_score(0.0, 0.1, SaliencyMaskKind::AdInspired), Err(Error::ZeroConfidence));
    }

    #[test]
    fn pearson_examples() {
        let s = [0.4, 0.1, 0.3, 0.2];
        let prop: Vec<f64> = s.iter().map(|v| 2.5 * v).collect();
        assert!(close(pearson(&prop, &s).unwrap().r, 1.0));
        let anti: Vec<f64> = s.iter().map(|v| -0.5 * v).collect();
        assert!(close(pearson(&anti, &s).unwrap().r, -1.0));
        // hand covariance: a = [1,2,3,5], b = [2,1,4,3]
        // means 2.75, 2.5; cov sum = 3.5; ssa = 8.75; ssb = 5
        let r = pearson(&[1.0, 2.0, 3.0, 5.0], &[2.0, 1.0, 4.0, 3.0]).unwrap();
        assert!((r.r - 3.5 / libm::sqrt(8.75 * 5.0)).abs() < 1e-14);
        let flat = pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(flat, Correlation { r: 0.0, degenerate: true });
    }

    #[test]
    fn one_step_grid_is_too_few() {
        assert_eq!(
            correlation_score(&[0.9, 0.1], &[1.0], MetricKind::Dc),
            Err(Error::TooFewSteps(1))
        );
        let img = Image::filled(4, 4, 3, 0.5).unwrap();
        let s = SaliencyMap::new(1, 1, vec![1.0]).unwrap();
        let o = FnOracle::new(2, |_: &Image| vec![0.5, 0.5]);
        let cfg = MetricConfig {
            grid: PatchGrid::new(1, 1),
            ..MetricConfig::for_image(4, 4)
        };
        for k in [MetricKind::Dc, MetricKind::Dcnc, MetricKind::Ic, MetricKind::Icnc] {
            assert_eq!(metric_score(k, &o, &img, &s, 0, &cfg), Err(Error::TooFewSteps(1)));
        }
    }

    /// Class-0 score is the mean of pixel values weighted per 2x2 patch.
    fn patch_oracle() -> impl ScoringOracle {
        FnOracle::new(2, |x: &Image| {
            let w = [0.4, 0.3, 0.2, 0.1];
            let mut s = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    s += w[(i / 2) * 2 + j / 2] * f64::from(x.at(i, j, 0)) / 4.0;
                }
            }
            vec![s, 1.0 - s]
        })
    }

    #[test]
    fn deletion_on_two_by_two_grid() {
        let img = Image::filled(4, 4, 1, 1.0).unwrap();
        let s = SaliencyMap::new(2, 2, vec![0.1, 0.9, 0.5, 0.3]).unwrap();
        let o = patch_oracle();
        let g = PatchGrid::new(2, 2);
        // visiting cells 1, 2, 3, 0 removes weights 0.3, 0.2, 0.1, 0.4
        let c = deletion_curve(&o, &img, &s, 0, g, true, DeletionOrder::MostSalientFirst).unwrap();
        let want = [1.0, 0.7, 0.5, 0.4, 0.0];
        for (a, b) in c.confidences().iter().zip(want) {
            assert!((a - b).abs() < 1e-6);
        }
        let nc = deletion_curve(&o, &img, &s, 0, g, false, DeletionOrder::MostSalientFirst).unwrap();
        for (a, b) in nc.confidences().iter().zip([1.0, 0.7, 0.8, 0.9, 0.6]) {
            assert!((a - b).abs() < 1e-6);
        }
        let rev = deletion_curve(&o, &img, &s, 0, g, true, DeletionOrder::LeastSalientFirst).unwrap();
        for (a, b) in rev.confidences().iter().zip([1.0, 0.6, 0.5, 0.3, 0.0]) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn insertion_endpoints() {
        let mut r = crate::Rng::new(3);
        let img = Image::new(8, 8, 1, (0..64).map(|_| r.next_f64() as f32).collect()).unwrap();
        let s = SaliencyMap::new(2, 2, vec![0.2, 0.1, 0.4, 0.3]).unwrap();
        let o = FnOracle::new(2, |x: &Image| {
            let m = x.data().iter().map(|&v| f64::from(v)).sum::<f64>() / 64.0;
            vec![m, 1.0 - m]
        });
        let c = insertion_curve(&o, &img, &s, 0, PatchGrid::new(2, 2), true, BlurParams { sigma: 1.0, kernel: 3 }).unwrap();
        let full = o.class_score(&img, 0).unwrap();
        assert!((c.confidences()[4] - full).abs() < 1e-12);
        let blurred = blur(&img, BlurParams { sigma: 1.0, kernel: 3 }).unwrap();
        assert!((c.confidences()[0] - o.class_score(&blurred, 0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn shared_batch_matches_single_metrics() {
        let mut r = crate::Rng::new(9);
        let img = Image::new(8, 8, 3, (0..192).map(|_| r.next_f64() as f32).collect()).unwrap();
        let s = SaliencyMap::new(2, 2, vec![0.5, 0.1, 0.8, 0.3]).unwrap();
        let o = FnOracle::new(2, |x: &Image| {
            let v = f64::from(x.at(1, 1, 0)) * 0.5 + f64::from(x.at(6, 2, 1)) * 0.3 + 0.1;
            vec![v, 1.0 - v]
        });
        let cfg = MetricConfig {
            grid: PatchGrid::new(2, 2),
            ..MetricConfig::for_image(8, 8)
        };
        let all = all_metrics(&o, &img, &s, 0, &cfg).unwrap();
        for k in MetricKind::ALL {
            let single = metric_score(k, &o, &img, &s, 0, &cfg).unwrap();
            assert_eq!(single, all.get(k), "{k}");
        }
    }

    #[test]
    fn matrix_with_one_method_and_identical_columns() {
        let img = Image::filled(8, 8, 1, 0.5).unwrap();
        let s = SaliencyMap::new(2, 2, vec![0.5, 0.1, 0.8, 0.3]).unwrap();
        let o = FnOracle::new(2, |x: &Image| {
            let v = f64::from(x.at(0, 0, 0)) * 0.8 + 0.1;
            vec![v, 1.0 - v]
        });
        let cfg = MetricConfig {
            grid: PatchGrid::new(2, 2),
            ..MetricConfig::for_image(8, 8)
        };
        let items = [EvalItem { id: "a".into(), image: &img, class: 0, maps: vec![s.clone()] }];
        let m = evaluate_matrix(&o, &items, &["x".to_string()], MetricKind::Add, &cfg).unwrap();
        assert_eq!((m.rows(), m.cols()), (1, 1));
        let items = [EvalItem { id: "a".into(), image: &img, class: 0, maps: vec![s.clone(), s] }];
        let all = evaluate_all(&o, &items, &["x".to_string(), "y".to_string()], &cfg).unwrap();
        for m in &all {
            assert_eq!(m.get(0, 0), m.get(0, 1));
        }
    }

    #[test]
    fn cell_errors_carry_position() {
        let img = Image::filled(8, 8, 1, 0.5).unwrap();
        let s = SaliencyMap::new(2, 2, vec![0.5, 0.1, 0.8, 0.3]).unwrap();
        let o = FnOracle::new(2, |_: &Image| vec![0.0, 1.0]);
        let cfg = MetricConfig {
            grid: PatchGrid::new(2, 2),
            ..MetricConfig::for_image(8, 8)
        };
        let items = [EvalItem { id: "a".into(), image: &img, class: 0, maps: vec![s] }];
        let err = evaluate_matrix(&o, &items, &["x".to_string()], MetricKind::Ad, &cfg).unwrap_err();
        assert!(matches!(err, Error::Cell { ref image, ref method, .. } if image == "a" && method == "x"));
    }
}

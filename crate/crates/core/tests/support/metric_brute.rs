const SIZE: usize = 8;
const C: usize = 3;

fn analytic_oracle() -> FnOracle<impl Fn(&Image) -> Vec<f64>> {
    FnOracle::new(2, |img: &Image| {
        let (mut num, mut den) = (0.0, 0.0);
        for (i, &x) in img.data().iter().enumerate() {
            let w = 1.0 + (i % 7) as f64;
            num += w * f64::from(x);
            den += w;
        }
        let p = 0.1 + 0.8 * num / den;
        vec![p, 1.0 - p]
    })
}

fn image(seed: u64) -> Image {
    let mut r = Rng::new(seed);
    let data = (0..SIZE * SIZE * C).map(|_| r.below(257) as f32 / 256.0).collect();
    Image::new(SIZE, SIZE, C, data).unwrap()
}

fn cfg(order: DeletionOrder) -> MetricConfig {
    MetricConfig {
        grid: PatchGrid::new(2, 2),
        blur: BlurParams::for_height(SIZE),
        upsample: Upsample::Nearest,
        deletion_order: order,
    }
}

fn cell_of(i: usize, j: usize) -> usize {
    (i / (SIZE / 2)) * 2 + j / (SIZE / 2)
}

/// Copies pixels of the listed cells from `src` into `dst` (or zeroes them).
fn paste(dst: &Image, src: Option<&Image>, cells: &[usize]) -> Image {
    let mut d = dst.data().to_vec();
    for i in 0..SIZE {
        for j in 0..SIZE {
            if cells.contains(&cell_of(i, j)) {
                for c in 0..C {
                    let k = (i * SIZE + j) * C + c;
                    d[k] = src.map_or(0.0, |s| s.data()[k]);
                }
            }
        }
    }
    Image::new(SIZE, SIZE, C, d).unwrap()
}

fn trapezoid(y: &[f64]) -> f64 {
    let h = 1.0 / (y.len() - 1) as f64;
    y.windows(2).map(|w| h * (w[0] + w[1]) / 2.0).sum()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// Scores in `MetricKind::ALL` order.
fn brute_force(
    o: &dyn ScoringOracle,
    img: &Image,
    s: &[f64; 4],
    class: usize,
    order: DeletionOrder,
) -> [f64; 8] {
    let y = |im: &Image| o.score(im).unwrap()[class];
    let mut ins: Vec<usize> = (0..4).collect();
    ins.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap());
    let mut del = ins.clone();
    if order == DeletionOrder::LeastSalientFirst {
        del.reverse();
    }
    let base = blur(img, BlurParams::for_height(SIZE)).unwrap();
    let y0 = y(img);
    let yb = y(&base);
    let del_c: Vec<f64> = (0..=4).map(|t| y(&paste(img, None, &del[..t]))).collect();
    let del_nc: Vec<f64> = std::iter::once(y0)
        .chain((1..=4).map(|t| y(&paste(img, None, &del[t - 1..t]))))
        .collect();
    let ins_c: Vec<f64> = (0..=4).map(|t| y(&paste(&base, Some(img), &ins[..t]))).collect();
    let ins_nc: Vec<f64> = std::iter::once(yb)
        .chain((1..=4).map(|t| y(&paste(&base, Some(img), &ins[t - 1..t]))))
        .collect();
    let sal_del: Vec<f64> = del.iter().map(|&u| s[u]).collect();
    let sal_ins: Vec<f64> = ins.iter().map(|&u| s[u]).collect();
    let steps = |f: &dyn Fn(usize) -> f64| (1..=4).map(f).collect::<Vec<f64>>();

    let (lo, hi) = s.iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    let norm = |u: usize| if hi == lo { 1.0 } else { (s[u] - lo) / (hi - lo) };
    let masked = |reverse: bool| {
        let mut d = img.data().to_vec();
        for i in 0..SIZE {
            for j in 0..SIZE {
                let m = norm(cell_of(i, j));
                let m = if reverse { 1.0 - m } else { m };
                for c in 0..C {
                    let k = (i * SIZE + j) * C + c;
                    d[k] = (m * f64::from(d[k])) as f32;
                }
            }
        }
        Image::new(SIZE, SIZE, C, d).unwrap()
    };
    let ad = (y0 - y(&masked(false))).max(0.0) / y0;
    let add = (y0 - y(&masked(true))) / y0;

    [
        trapezoid(&del_c),
        pearson(&steps(&|t| del_c[t - 1] - del_c[t]), &sal_del),
        pearson(&steps(&|t| del_nc[0] - del_nc[t]), &sal_del),
        trapezoid(&ins_c),
        pearson(&steps(&|t| ins_c[t] - ins_c[t - 1]), &sal_ins),
        pearson(&steps(&|t| ins_nc[t] - ins_nc[0]), &sal_ins),
        ad,
        add,
    ]
}

const MAPS: [[f64; 4]; 4] = [
    [4.0, 0.0, 1.0, 3.0],
    [0.5, 2.0, 2.0, -1.0],
    [1.0, 1.0, 1.0, 1.0],
    [-3.0, 7.0, 0.25, 6.0],
];

pub fn max_metric_discrepancy() -> f64 {
    let o = analytic_oracle();
    let mut worst: f64 = 0.0;
    for order in [DeletionOrder::MostSalientFirst, DeletionOrder::LeastSalientFirst] {
        for (k, s) in MAPS.iter().enumerate() {
            for class in 0..2 {
                let img = image(k as u64);
                let map = SaliencyMap::new(2, 2, s.to_vec()).unwrap();
                let got = all_metrics(&o, &img, &map, class, &cfg(order)).unwrap();
                let want = brute_force(&o, &img, s, class, order);
                for (i, kind) in MetricKind::ALL.iter().enumerate() {
                    worst = worst.max((got.get(*kind) - want[i]).abs());
                }
            }
        }
    }
    worst
}

const H: f64 = 1e-5;

fn image(rng: &mut Rng, size: usize) -> Image {
    let data = (0..size * size * 3).map(|_| rng.next_f64() as f32).collect();
    Image::new(size, size, 3, data).unwrap()
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-7)
}

/// Largest relative error over `coords` random parameter coordinates,
/// spread over a few images.
pub fn max_param_error(kind: LossKind, coords: usize, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let net: ToyNet<f64> = ToyNet::<f32>::init(3, 4, &mut rng).cast();
    let per_image = coords / 4;
    let mut worst: f64 = 0.0;
    for _ in 0..4 {
        let img = image(&mut rng, 16);
        let label = rng.below_usize(4);
        let (_, g) = net.loss_grad(&img, label, kind).unwrap();
        let analytic = g.params.params().map(|p| p.to_vec());
        for _ in 0..per_image {
            let t = rng.below_usize(6);
            let i = rng.below_usize(analytic[t].len());
            let mut plus = net.clone();
            plus.params_mut()[t][i] += H;
            let mut minus = net.clone();
            minus.params_mut()[t][i] -= H;
            let numeric =
                (plus.loss(&img, label, kind).unwrap() - minus.loss(&img, label, kind).unwrap()) / (2.0 * H);
            worst = worst.max(rel_err(analytic[t][i], numeric));
        }
    }
    worst
}

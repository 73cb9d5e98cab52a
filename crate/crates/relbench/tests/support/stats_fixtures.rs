// Samples drawn with numpy; reference values below come from scipy.

pub const SW10: [f64; 10] = [2.1, 3.4, 1.9, 5.6, 4.2, 3.3, 2.8, 6.1, 3.9, 4.4];
pub const SW25: [f64; 25] = [
    -1.485371, 0.161838, -0.773996, 0.732992, -1.093631, -1.160433, 0.002692, 0.587597,
    -0.544956, 1.909759, 1.59729, 0.179756, -0.463695, 0.721762, 1.764095, 0.884393, -0.681899,
    1.394333, 0.849835, -0.016248, -0.988941, -0.647578, -0.554316, 2.003863, -2.328956,
];
pub const SW60: [f64; 60] = [
    1.081105, 2.215267, 0.639298, 1.135714, 2.37823, 0.587111, 0.202223, 0.855271, 0.063787,
    0.563105, 1.272873, 1.064601, 0.323588, 1.040714, 2.614365, 2.450071, 0.468323, 1.349158,
    2.508419, 1.656771, 2.635406, 0.352948, 1.32657, 0.430334, 0.774922, 0.493186, 1.156702,
    2.092324, 0.478565, 0.319474, 1.059582, 0.839049, 0.764137, 0.29414, 0.227868, 0.412138,
    0.022816, 1.089312, 0.249825, 1.284623, 0.459539, 0.10426, 0.095013, 0.107818, 0.11886,
    0.04514, 1.852171, 0.125842, 0.437259, 0.293626, 0.938792, 0.081019, 0.250829, 0.683764,
    1.936745, 1.202349, 2.122605, 0.188017, 0.208024, 0.01965,
];
pub const LEV_A: [f64; 12] = [
    -0.587313, 1.710245, -1.147532, 0.400094, -1.764207, 0.555981, 0.228338, 1.531639, -2.352728,
    2.87987, 0.933114, -0.723857,
];
pub const LEV_B: [f64; 15] = [
    0.489711, 2.703871, 1.770994, -1.66615, -0.632175, 0.969465, 0.46782, 1.160134, -2.306076,
    -2.43717, -0.331884, 4.029377, -0.991669, -2.34725, -2.657561,
];
/// U by pair counting and the two-sided p by relabelling every split.
pub fn enumerate_u(a: &[f64], b: &[f64]) -> (f64, f64) {
    let u = |x: &[f64], y: &[f64]| -> f64 {
        x.iter()
            .flat_map(|&p| y.iter().map(move |&q| if p > q { 1.0 } else if p == q { 0.5 } else { 0.0 }))
            .sum()
    };
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (n, na) = (pooled.len(), a.len());
    let mu = (a.len() * b.len()) as f64 / 2.0;
    let obs = (u(a, b) - mu).abs();
    let (mut hit, mut total) = (0, 0);
    for mask in 0u32..1 << n {
        if mask.count_ones() as usize != na {
            continue;
        }
        let x: Vec<f64> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| pooled[i]).collect();
        let y: Vec<f64> = (0..n).filter(|i| mask >> i & 1 == 0).map(|i| pooled[i]).collect();
        total += 1;
        if (u(&x, &y) - mu).abs() >= obs - 1e-9 {
            hit += 1;
        }
    }
    (u(a, b), f64::from(hit) / f64::from(total))
}

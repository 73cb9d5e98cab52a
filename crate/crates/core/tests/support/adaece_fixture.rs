/// 30 samples and their AdaECE for several bin counts, binned by hand with
/// exact fractions. Ties in confidence put incorrect samples first.
pub const ECE_CONF: [f64; 30] = [
    0.421875, 0.09375, 0.984375, 0.3125, 0.765625, 0.578125, 0.875, 0.609375, 0.453125, 0.9375,
    0.828125, 0.21875, 0.171875, 0.453125, 0.1875, 0.515625, 0.46875, 0.484375, 0.328125,
    0.359375, 0.109375, 0.421875, 0.25, 0.71875, 0.90625, 0.34375, 0.46875, 0.078125, 0.375,
    0.953125,
];
pub const ECE_CORRECT: [bool; 30] = [
    false, false, true, false, true, false, true, true, true, true, true, false, true, false,
    false, false, true, true, false, false, true, false, true, true, true, true, false, true,
    true, true,
];
/// `(bins, AdaECE)`
pub const ECE_EXPECTED: [(usize, f64); 3] = [
    (15, 0.20677083333333332),
    (4, 0.12135416666666667),
    (7, 0.16197916666666667),
];

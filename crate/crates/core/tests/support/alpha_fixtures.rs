/// `(rows, cols, ranks, alpha)` computed with exact rational arithmetic.
#[rustfmt::skip]
pub const ALPHA_FIXTURES: &[(usize, usize, &[f64], f64)] = &[
    (4, 3, &[1.0, 2.0, 3.0, 1.0, 3.0, 2.0, 2.0, 1.0, 3.0, 1.0, 2.0, 3.0], 0.4652777777777778),
    (2, 2, &[2.0, 1.0, 2.0, 1.0], 1.0),
    (3, 4, &[3.0, 3.0, 3.0, 1.0, 2.0, 4.0, 3.0, 1.0, 1.0, 2.0, 3.0, 4.0], -0.0876602564102564),
    (5, 3, &[1.0, 2.5, 2.5, 1.5, 3.0, 1.5, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0, 3.0, 2.0, 1.0], 0.3921972534332085),
    (6, 4, &[3.0, 2.0, 1.0, 4.0, 3.0, 1.0, 2.0, 4.0, 3.5, 1.0, 2.0, 3.5, 3.0, 1.0, 2.0, 4.0, 3.5, 1.0, 2.0, 3.5, 2.0, 1.0, 3.0, 4.0], 0.8247121212121212),
    (8, 5, &[1.0, 3.0, 5.0, 2.0, 4.0, 2.0, 4.0, 4.0, 4.0, 1.0, 2.0, 4.5, 3.0, 4.5, 1.0, 4.0, 3.0, 2.0, 5.0, 1.0, 3.0, 2.0, 4.0, 5.0, 1.0, 2.0, 3.5, 5.0, 3.5, 1.0, 3.5, 3.5, 5.0, 1.0, 2.0, 4.0, 3.0, 5.0, 1.0, 2.0], 0.27216834274693485),
    (10, 4, &[2.5, 4.0, 1.0, 2.5, 4.0, 2.0, 3.0, 1.0, 4.0, 2.0, 3.0, 1.0, 2.0, 4.0, 3.0, 1.0, 3.5, 2.0, 3.5, 1.0, 4.0, 3.0, 2.0, 1.0, 3.0, 2.0, 4.0, 1.0, 3.0, 2.0, 4.0, 1.0, 2.5, 4.0, 2.5, 1.0, 3.0, 4.0, 1.0, 2.0], 0.38783825639019304),
    (12, 6, &[5.0, 6.0, 2.0, 4.0, 1.0, 3.0, 3.0, 6.0, 5.0, 2.0, 1.0, 4.0, 5.5, 2.0, 3.5, 5.5, 1.0, 3.5, 5.5, 4.0, 3.0, 2.0, 1.0, 5.5, 6.0, 3.0, 1.0, 5.0, 2.0, 4.0, 6.0, 4.5, 4.5, 3.0, 2.0, 1.0, 6.0, 3.5, 5.0, 2.0, 1.0, 3.5, 4.5, 6.0, 2.0, 3.0, 1.0, 4.5, 6.0, 5.0, 2.0, 4.0, 1.0, 3.0, 5.5, 5.5, 2.0, 3.0, 1.0, 4.0, 4.0, 5.0, 3.0, 2.0, 1.0, 6.0, 6.0, 5.0, 2.0, 4.0, 1.0, 3.0], 0.558316982628853),
    (20, 3, &[2.0, 3.0, 1.0, 1.0, 3.0, 2.0, 3.0, 2.0, 1.0, 3.0, 2.0, 1.0, 3.0, 2.0, 1.0, 3.0, 2.0, 1.0, 1.5, 3.0, 1.5, 2.0, 3.0, 1.0, 3.0, 2.0, 1.0, 3.0, 2.0, 1.0, 1.0, 3.0, 2.0, 3.0, 2.0, 1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0, 3.0, 2.0, 1.0, 2.0, 3.0, 1.0, 1.5, 3.0, 1.5, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0], 0.591609924787513),
    (15, 8, &[8.0, 2.0, 3.5, 7.0, 3.5, 1.0, 6.0, 5.0, 2.0, 5.5, 3.5, 8.0, 3.5, 1.0, 5.5, 7.0, 1.0, 6.0, 8.0, 7.0, 2.0, 3.0, 4.0, 5.0, 2.0, 3.0, 7.0, 8.0, 1.0, 5.0, 5.0, 5.0, 1.0, 6.0, 7.5, 7.5, 2.0, 4.0, 4.0, 4.0, 1.0, 3.0, 8.0, 7.0, 6.0, 2.0, 4.5, 4.5, 1.0, 5.0, 4.0, 6.0, 7.0, 3.0, 2.0, 8.0, 2.0, 3.5, 7.0, 5.5, 1.0, 5.5, 3.5, 8.0, 5.0, 2.5, 7.0, 6.0, 1.0, 4.0, 2.5, 8.0, 2.5, 1.0, 8.0, 5.0, 6.0, 2.5, 4.0, 7.0, 4.5, 1.0, 7.0, 8.0, 2.0, 3.0, 4.5, 6.0, 1.0, 2.0, 6.5, 5.0, 4.0, 3.0, 6.5, 8.0, 1.0, 7.0, 8.0, 6.0, 2.0, 4.0, 3.0, 5.0, 1.0, 5.0, 7.0, 6.0, 2.0, 4.0, 3.0, 8.0, 4.0, 1.0, 7.0, 8.0, 2.5, 2.5, 5.5, 5.5], 0.48212616181393),
];

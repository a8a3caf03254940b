//! Brute-force reference implementations used only by tests. They share no
//! code with the library.

#![allow(dead_code)]

/// Rank by counting: 1 + #smaller + (#equal − 1)/2.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let smaller = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            1.0 + smaller + (equal - 1.0) / 2.0
        })
        .collect()
}

/// Raw-moment formula for the sample correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let syy: f64 = y.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

/// Sum of ranks of the positive non-zero differences.
pub fn wilcoxon_w(d: &[f64]) -> f64 {
    let nz: Vec<f64> = d.iter().copied().filter(|&v| v != 0.0).collect();
    let abs: Vec<f64> = nz.iter().map(|v| v.abs()).collect();
    ranks(&abs)
        .iter()
        .zip(&nz)
        .filter(|(_, &v)| v > 0.0)
        .map(|(r, _)| r)
        .sum()
}

/// `t = mean / (sd / √n)` with the raw-moment variance.
pub fn paired_t(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = (d.iter().map(|v| v * v).sum::<f64>() - n * mean * mean) / (n - 1.0);
    mean / (var / n).sqrt()
}

/// Column-wise R² from rows of `(target, prediction)` pairs.
pub fn r2_columns(targets: &[Vec<f64>], preds: &[Vec<f64>]) -> Vec<f64> {
    (0..targets[0].len())
        .map(|c| {
            let y: Vec<f64> = targets.iter().map(|r| r[c]).collect();
            let p: Vec<f64> = preds.iter().map(|r| r[c]).collect();
            r2_flat(&y, &p)
        })
        .collect()
}

pub fn r2_flat(y: &[f64], p: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let res: f64 = y.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum();
    let tot: f64 = y.iter().map(|a| (a - mean) * (a - mean)).sum();
    1.0 - res / tot
}

/// Fixed vectors with reference values computed independently in
/// double precision by a reference statistics package.
pub mod fixtures {
    pub const WILCOXON_D: [f64; 13] = [0.5, -1.2, 2.3, 0.5, 3.1, -0.7, 1.9, 2.3, -0.4, 1.1, 0.0, 2.8, -1.2];
    pub const WILCOXON_W: f64 = 60.0;
    pub const WILCOXON_P: f64 = 0.1073954360894754;

    pub const T_A: [f64; 10] = [0.12, 0.30, 0.25, 0.41, 0.08, 0.19, 0.33, 0.27, 0.22, 0.15];
    pub const T_B: [f64; 10] = [0.10, 0.21, 0.27, 0.30, 0.09, 0.12, 0.30, 0.20, 0.25, 0.11];
    pub const T_STAT: f64 = 2.445028821683832;
    pub const T_P: f64 = 0.037057684723010714;

    pub const SPEARMAN_X: [f64; 10] = [1.0, 2.0, 2.0, 3.0, 5.0, 5.0, 5.0, 8.0, 9.0, 10.0];
    pub const SPEARMAN_Y: [f64; 10] = [2.0, 1.0, 4.0, 4.0, 3.0, 7.0, 6.0, 6.0, 10.0, 8.0];
    pub const SPEARMAN_RHO: f64 = 0.8452376966295818;
    pub const SPEARMAN_P: f64 = 0.002073083622815802;

    pub const PEARSON_X: [f64; 5] = [1.0, 2.0, 4.0, 7.0, 11.0];
    pub const PEARSON_Y: [f64; 5] = [2.0, 3.5, 3.0, 9.0, 10.5];
    pub const PEARSON_R: f64 = 0.9478897616568047;

    pub const R2_TARGETS: [[f64; 3]; 6] = [
        [0.637, 0.27, 0.041],
        [0.017, 0.813, 0.913],
        [0.607, 0.729, 0.544],
        [0.935, 0.816, 0.003],
        [0.857, 0.034, 0.73],
        [0.176, 0.863, 0.541],
    ];
    pub const R2_PREDS: [[f64; 3]; 6] = [
        [0.678, 0.374, 0.028],
        [0.154, 0.746, 0.948],
        [0.697, 0.738, 0.47],
        [0.843, 0.77, 0.025],
        [0.756, 0.013, 0.714],
        [0.23, 0.884, 0.577],
    ];
    pub const R2_PER_DIM: [f64; 3] = [0.9258874150825638, 0.9696710486700151, 0.9868276261921102];
    pub const R2_MEAN: f64 = 0.9607953633148963;
    pub const R2_POOLED: f64 = 0.9614178456797992;
}

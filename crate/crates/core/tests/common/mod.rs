#![allow(dead_code)]

use crrr::rng;
use crrr::Dataset;
use rand_chacha::ChaCha8Rng;

/// One printed row of the two-group example: covariate, both outcomes, and
/// the printed conditional (within-group) and marginal ranks in percent.
#[derive(Debug, Clone)]
pub struct TwoGroupRow {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub u_pct: f64,
    pub u_marg_pct: f64,
    pub v_pct: f64,
    pub v_marg_pct: f64,
}

pub fn two_group() -> Vec<TwoGroupRow> {
    let text = include_str!("../data/two_group.csv");
    text.lines()
        .skip(1)
        .map(|line| {
            let f: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            TwoGroupRow {
                x: f[0],
                y: f[1],
                u_pct: f[2],
                u_marg_pct: f[3],
                w: f[4],
                v_pct: f[5],
                v_marg_pct: f[6],
            }
        })
        .collect()
}

/// The printed values as recorded (with ties).
pub fn two_group_raw() -> Dataset {
    let rows = two_group();
    Dataset::new(
        rows.iter().map(|r| r.y).collect(),
        rows.iter().map(|r| r.w).collect(),
        vec![("x".into(), rows.iter().map(|r| r.x).collect())],
        None,
    )
    .unwrap()
}

/// Ties broken in the order of the printed marginal ranks, which is also the
/// order of the printed within-group ranks.
pub fn two_group_untied() -> Dataset {
    let rows = two_group();
    Dataset::new(
        rows.iter().map(|r| r.y + r.u_marg_pct * 1e-4).collect(),
        rows.iter().map(|r| r.w + r.v_marg_pct * 1e-4).collect(),
        vec![("x".into(), rows.iter().map(|r| r.x).collect())],
        None,
    )
    .unwrap()
}

/// `#{j in the same group as i : values[j] ≤ values[i]} / group size`.
pub fn counting_ranks(values: &[f64], groups: &[f64]) -> Vec<f64> {
    (0..values.len())
        .map(|i| {
            let mut size = 0usize;
            let mut below = 0usize;
            for j in 0..values.len() {
                if groups[j] == groups[i] {
                    size += 1;
                    if values[j] <= values[i] {
                        below += 1;
                    }
                }
            }
            below as f64 / size as f64
        })
        .collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Position of each value in sorted order, starting at 1 (no ties assumed).
pub fn sort_positions(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut pos = vec![0.0; values.len()];
    for (p, &i) in idx.iter().enumerate() {
        pos[i] = (p + 1) as f64;
    }
    pos
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&sort_positions(a), &sort_positions(b))
}

pub fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng::standard_normal(rng)).collect()
}

/// Kolmogorov–Smirnov distance between a sample and U(0, 1).
pub fn ks_uniform(sample: &[f64]) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Small tie-free data set with a binary group of at least three rows each.
pub fn small_grouped(seed: u64, n: usize) -> Dataset {
    let mut rng = rng::stream(seed, &[]);
    let mut x: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    // shuffle group labels
    for i in (1..n).rev() {
        let j = rng::index(&mut rng, i + 1);
        x.swap(i, j);
    }
    let z = normals(&mut rng, n);
    let e = normals(&mut rng, n);
    let y: Vec<f64> = (0..n).map(|i| x[i] + z[i]).collect();
    let w: Vec<f64> = (0..n).map(|i| -0.5 * x[i] + 0.6 * z[i] + 0.8 * e[i]).collect();
    Dataset::new(y, w, vec![("x".into(), x)], None).unwrap()
}

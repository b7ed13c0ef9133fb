#![allow(dead_code)]

use pvdtw::{Fleet, PanelSeries};
use rand::Rng;

/// Every warping path from `(0, 0)` to `(n - 1, m - 1)` within the band, by depth-first search.
pub fn warping_paths(n: usize, m: usize, radius: Option<usize>) -> Vec<Vec<(usize, usize)>> {
    fn walk(
        i: usize,
        j: usize,
        n: usize,
        m: usize,
        radius: Option<usize>,
        current: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if i >= n || j >= m || radius.is_some_and(|r| i.abs_diff(j) > r) {
            return;
        }
        current.push((i, j));
        if (i, j) == (n - 1, m - 1) {
            out.push(current.clone());
        } else {
            walk(i + 1, j + 1, n, m, radius, current, out);
            walk(i + 1, j, n, m, radius, current, out);
            walk(i, j + 1, n, m, radius, current, out);
        }
        current.pop();
    }
    let mut out = Vec::new();
    walk(0, 0, n, m, radius, &mut Vec::new(), &mut out);
    out
}

/// Brute-force DTW: square root of the cheapest path's summed squared differences.
pub fn brute_force_dtw(x: &[f64], y: &[f64], radius: Option<usize>) -> Option<f64> {
    warping_paths(x.len(), y.len(), radius)
        .iter()
        .map(|p| p.iter().map(|&(i, j)| (x[i] - y[j]).powi(2)).sum::<f64>())
        .min_by(f64::total_cmp)
        .map(f64::sqrt)
}

pub fn random_series(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-3.0..3.0)).collect()
}

pub fn fleet_of(rows: &[Vec<f64>]) -> Fleet {
    Fleet::new(
        rows.iter()
            .enumerate()
            .map(|(i, v)| PanelSeries::new(format!("p{i:02}"), 0, 60, v.clone()).unwrap())
            .collect(),
    )
    .unwrap()
}

/// Adjusted Rand index of two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let pairs = |n: u64| (n * n.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().flatten().map(|&n| pairs(n)).sum();
    let rows: f64 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| pairs(table.iter().map(|r| r[j]).sum())).sum();
    let total = pairs(a.len() as u64);
    let expected = rows * cols / total;
    let max = (rows + cols) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

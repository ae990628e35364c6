//! Separable spatial filters shared by the denoisers and the scene generator.

use ndarray::{Array2, Axis};

/// Mirror index into `0..n` without repeating the edge sample (…2 1 | 0 1 2 … n-1 | n-2 …).
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut j = i.rem_euclid(period);
    if j >= n as isize {
        j = period - j;
    }
    j as usize
}

/// Normalized 1-D Gaussian kernel with radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

fn convolve_axis(input: &Array2<f64>, kernel: &[f64], axis: Axis) -> Array2<f64> {
    let radius = (kernel.len() / 2) as isize;
    let mut out = Array2::zeros(input.dim());
    for (src, mut dst) in input.lanes(axis).into_iter().zip(out.lanes_mut(axis).into_iter()) {
        let n = src.len();
        for i in 0..n {
            let mut acc = 0.0;
            for (t, w) in kernel.iter().enumerate() {
                acc += w * src[reflect(i as isize + t as isize - radius, n)];
            }
            dst[i] = acc;
        }
    }
    out
}

/// Gaussian blur with reflect-padded borders.
pub fn gaussian_blur(input: &Array2<f64>, sigma: f64) -> Array2<f64> {
    let k = gaussian_kernel(sigma);
    let rows = convolve_axis(input, &k, Axis(1));
    convolve_axis(&rows, &k, Axis(0))
}

fn window_sum_axis(input: &Array2<f64>, radius: usize, axis: Axis) -> Array2<f64> {
    let mut out = Array2::zeros(input.dim());
    let mut prefix = Vec::new();
    for (src, mut dst) in input.lanes(axis).into_iter().zip(out.lanes_mut(axis).into_iter()) {
        let n = src.len();
        prefix.clear();
        prefix.push(0.0);
        let mut acc = 0.0;
        for v in src.iter() {
            acc += v;
            prefix.push(acc);
        }
        for i in 0..n {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius + 1).min(n);
            dst[i] = prefix[hi] - prefix[lo];
        }
    }
    out
}

/// Mean over a `(2r+1) x (2r+1)` window truncated at the borders.
pub fn box_mean(input: &Array2<f64>, radius: usize) -> Array2<f64> {
    let (rows, cols) = input.dim();
    let sums = window_sum_axis(&window_sum_axis(input, radius, Axis(1)), radius, Axis(0));
    let span = |i: usize, n: usize| ((i + radius + 1).min(n) - i.saturating_sub(radius)) as f64;
    let mut out = sums;
    for ((r, c), v) in out.indexed_iter_mut() {
        *v /= span(r, rows) * span(c, cols);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_mirrors_without_edge_repeat() {
        let idx: Vec<usize> = (-3..8).map(|i| reflect(i, 5)).collect();
        assert_eq!(idx, vec![3, 2, 1, 0, 1, 2, 3, 4, 3, 2, 1]);
        assert_eq!(reflect(-4, 1), 0);
    }

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel(1.3);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..k.len() / 2 {
            assert_eq!(k[i], k[k.len() - 1 - i]);
        }
    }

    #[test]
    fn box_mean_brute_force() {
        let m = Array2::from_shape_fn((5, 7), |(r, c)| (r * 7 + c) as f64 * 0.37 - 3.0);
        let bm = box_mean(&m, 2);
        for r in 0..5usize {
            for c in 0..7usize {
                let mut s = 0.0;
                let mut n = 0.0;
                for rr in r.saturating_sub(2)..(r + 3).min(5) {
                    for cc in c.saturating_sub(2)..(c + 3).min(7) {
                        s += m[[rr, cc]];
                        n += 1.0;
                    }
                }
                assert!((bm[[r, c]] - s / n).abs() < 1e-12);
            }
        }
    }
}

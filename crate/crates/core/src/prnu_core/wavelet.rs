//! Periodized orthonormal 2-D discrete wavelet transform (Mallat layout).

use ndarray::{Array2, ArrayViewMut1, Axis};

/// Daubechies 8-tap (4 vanishing moments) decomposition low-pass filter.
pub const DB4_LOWPASS: [f64; 8] = [
    -0.010_597_401_785_069_032,
    0.032_883_011_666_885_2,
    0.030_841_381_835_560_764,
    -0.187_034_811_719_093_09,
    -0.027_983_769_416_859_854,
    0.630_880_767_929_858_9,
    0.714_846_570_552_915_7,
    0.230_377_813_308_896_5,
];

#[derive(Clone, Debug)]
pub struct FilterBank {
    low: Vec<f64>,
    high: Vec<f64>,
}

impl FilterBank {
    pub fn from_lowpass(low: &[f64]) -> Self {
        let n = low.len();
        let high = (0..n)
            .map(|m| if m % 2 == 0 { low[n - 1 - m] } else { -low[n - 1 - m] })
            .collect();
        FilterBank {
            low: low.to_vec(),
            high,
        }
    }

    pub fn db4() -> Self {
        Self::from_lowpass(&DB4_LOWPASS)
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.low
    }

    pub fn highpass(&self) -> &[f64] {
        &self.high
    }

    /// One analysis step on an even-length lane: approximation into the first half,
    /// detail into the second.
    fn analyze(&self, mut lane: ArrayViewMut1<f64>, scratch: &mut Vec<f64>) {
        let n = lane.len();
        let half = n / 2;
        scratch.clear();
        scratch.resize(n, 0.0);
        for k in 0..half {
            let (mut a, mut d) = (0.0, 0.0);
            for (m, (hl, hh)) in self.low.iter().zip(&self.high).enumerate() {
                let x = lane[(2 * k + m) % n];
                a += hl * x;
                d += hh * x;
            }
            scratch[k] = a;
            scratch[half + k] = d;
        }
        for (dst, src) in lane.iter_mut().zip(scratch.iter()) {
            *dst = *src;
        }
    }

    fn synthesize(&self, mut lane: ArrayViewMut1<f64>, scratch: &mut Vec<f64>) {
        let n = lane.len();
        let half = n / 2;
        scratch.clear();
        scratch.resize(n, 0.0);
        for k in 0..half {
            let (a, d) = (lane[k], lane[half + k]);
            for (m, (hl, hh)) in self.low.iter().zip(&self.high).enumerate() {
                scratch[(2 * k + m) % n] += hl * a + hh * d;
            }
        }
        for (dst, src) in lane.iter_mut().zip(scratch.iter()) {
            *dst = *src;
        }
    }
}

/// Size of the approximation band at `level` (0 = full image).
pub fn band_dims(dims: (usize, usize), level: usize) -> (usize, usize) {
    (dims.0 >> level, dims.1 >> level)
}

/// Forward transform in place. Both sides must be divisible by `2^levels`.
pub fn forward(data: &mut Array2<f64>, bank: &FilterBank, levels: usize) {
    let mut scratch = Vec::new();
    for level in 0..levels {
        let (r, c) = band_dims(data.dim(), level);
        let mut band = data.slice_mut(ndarray::s![..r, ..c]);
        for lane in band.lanes_mut(Axis(1)) {
            bank.analyze(lane, &mut scratch);
        }
        for lane in band.lanes_mut(Axis(0)) {
            bank.analyze(lane, &mut scratch);
        }
    }
}

pub fn inverse(data: &mut Array2<f64>, bank: &FilterBank, levels: usize) {
    let mut scratch = Vec::new();
    for level in (0..levels).rev() {
        let (r, c) = band_dims(data.dim(), level);
        let mut band = data.slice_mut(ndarray::s![..r, ..c]);
        for lane in band.lanes_mut(Axis(0)) {
            bank.synthesize(lane, &mut scratch);
        }
        for lane in band.lanes_mut(Axis(1)) {
            bank.synthesize(lane, &mut scratch);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn db4_is_orthonormal() {
        let h = &DB4_LOWPASS;
        assert!((h.iter().sum::<f64>() - std::f64::consts::SQRT_2).abs() < 1e-12);
        for shift in 0..4 {
            let s: f64 = (0..8 - 2 * shift).map(|m| h[m] * h[m + 2 * shift]).sum();
            let want = if shift == 0 { 1.0 } else { 0.0 };
            assert!((s - want).abs() < 1e-12, "shift {shift}: {s}");
        }
        let bank = FilterBank::db4();
        let hp: f64 = bank.highpass().iter().sum();
        assert!(hp.abs() < 1e-12);
    }

    #[test]
    fn constant_has_no_detail() {
        let mut m = Array2::from_elem((32, 16), 7.5);
        forward(&mut m, &FilterBank::db4(), 3);
        let (r, c) = band_dims((32, 16), 3);
        for ((i, j), v) in m.indexed_iter() {
            if i >= r || j >= c {
                assert!(v.abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn perfect_reconstruction_and_energy(
            seed in any::<u64>(),
            lr in 1usize..4,
            lc in 1usize..4,
            levels in 1usize..4,
        ) {
            let rows = (lr * 2) << levels;
            let cols = (lc * 2) << levels;
            let mut rng = crate::seeding::rng_from(seed);
            use rand::Rng;
            let orig = Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-100.0..100.0));
            let mut m = orig.clone();
            let bank = FilterBank::db4();
            forward(&mut m, &bank, levels);
            let e0: f64 = orig.iter().map(|v| v * v).sum();
            let e1: f64 = m.iter().map(|v| v * v).sum();
            prop_assert!((e0 - e1).abs() <= 1e-9 * e0);
            inverse(&mut m, &bank, levels);
            for (a, b) in orig.iter().zip(m.iter()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}

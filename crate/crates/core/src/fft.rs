//! Thin 2-D FFT layer over `rustfft` with plan caching.
//!
//! Grids are square, row-major `Complex64` buffers. The forward transform is
//! unnormalized; the inverse divides by the pixel count, so
//! `ifft2(fft2(x)) == x` up to rounding.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

/// Frequency of FFT bin `k` on an `n`-point grid, in cycles per sample.
///
/// Follows the usual fftfreq convention: bins past `n/2` wrap to negative
/// frequencies.
pub fn bin_freq(k: usize, n: usize) -> f64 {
    if k <= (n - 1) / 2 {
        k as f64 / n as f64
    } else {
        k as f64 / n as f64 - 1.0
    }
}

/// Signed integer frequency index of bin `k` (cycles per image).
pub fn bin_index(k: usize, n: usize) -> i64 {
    if k <= (n - 1) / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

struct Plans {
    forward: HashMap<usize, Arc<dyn Fft<f64>>>,
    inverse: HashMap<usize, Arc<dyn Fft<f64>>>,
}

static PLANS: Mutex<Option<Plans>> = Mutex::new(None);

fn plan(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    let mut guard = PLANS.lock().unwrap();
    let plans = guard.get_or_insert_with(|| Plans {
        forward: HashMap::new(),
        inverse: HashMap::new(),
    });
    let map = match direction {
        FftDirection::Forward => &mut plans.forward,
        FftDirection::Inverse => &mut plans.inverse,
    };
    map.entry(n)
        .or_insert_with(|| FftPlanner::new().plan_fft(n, direction))
        .clone()
}

/// Cached inverse plan for the pursuit hot path.
pub(crate) fn inverse_plan(n: usize) -> Arc<dyn Fft<f64>> {
    plan(n, FftDirection::Inverse)
}

fn transform_2d(n: usize, buf: &mut [Complex64], direction: FftDirection) {
    assert_eq!(buf.len(), n * n, "buffer does not match grid size");
    let fft = plan(n, direction);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    for row in buf.chunks_exact_mut(n) {
        fft.process_with_scratch(row, &mut scratch);
    }
    transpose_in_place(n, buf);
    for row in buf.chunks_exact_mut(n) {
        fft.process_with_scratch(row, &mut scratch);
    }
    transpose_in_place(n, buf);
}

/// Cache-blocked in-place transpose of an `n`×`n` grid.
pub(crate) fn transpose_in_place(n: usize, buf: &mut [Complex64]) {
    const TILE: usize = 8;
    let mut by = 0;
    while by < n {
        let by_end = (by + TILE).min(n);
        // diagonal tile
        for y in by..by_end {
            for x in (y + 1)..by_end {
                buf.swap(y * n + x, x * n + y);
            }
        }
        let mut bx = by + TILE;
        while bx < n {
            let bx_end = (bx + TILE).min(n);
            for y in by..by_end {
                for x in bx..bx_end {
                    buf.swap(y * n + x, x * n + y);
                }
            }
            bx += TILE;
        }
        by += TILE;
    }
}

/// In-place forward 2-D FFT of an `n`×`n` grid.
pub fn fft2(n: usize, buf: &mut [Complex64]) {
    transform_2d(n, buf, FftDirection::Forward);
}

/// In-place inverse 2-D FFT of an `n`×`n` grid, normalized by `1/n²`.
pub fn ifft2(n: usize, buf: &mut [Complex64]) {
    transform_2d(n, buf, FftDirection::Inverse);
    let scale = 1.0 / (n * n) as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Inverse 2-D FFT without the `1/n²` normalization.
pub fn ifft2_unscaled(n: usize, buf: &mut [Complex64]) {
    transform_2d(n, buf, FftDirection::Inverse);
}

/// Forward FFT of a real image into a freshly allocated complex grid.
pub fn fft2_real(n: usize, data: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(n, &mut buf);
    buf
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_recovers_input() {
        let n = 32;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let orig: Vec<Complex64> = (0..n * n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let mut buf = orig.clone();
        fft2(n, &mut buf);
        ifft2(n, &mut buf);
        let max_err = buf
            .iter()
            .zip(&orig)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(max_err < 1e-12, "roundtrip error {max_err}");
    }

    #[test]
    fn parseval_holds() {
        let n = 16;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>() - 0.5).collect();
        let spatial: f64 = data.iter().map(|v| v * v).sum();
        let spec = fft2_real(n, &data);
        let freq: f64 = spec.iter().map(|v| v.norm_sqr()).sum::<f64>() / (n * n) as f64;
        assert!((spatial - freq).abs() < 1e-10 * spatial);
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let n = 8;
        let mut data = vec![0.0; n * n];
        data[0] = 1.0;
        let spec = fft2_real(n, &data);
        for v in &spec {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    // Not a benchmark harness, just a quick sanity budget printed with
    // `cargo test -- --nocapture fft_speed`.
    #[test]
    fn fft_speed() {
        for &n in &[128usize, 256] {
            let mut buf: Vec<Complex64> = (0..n * n)
                .map(|i| Complex64::new((i % 17) as f64, (i % 5) as f64))
                .collect();
            // warm the plan cache
            fft2(n, &mut buf);
            let t = std::time::Instant::now();
            let reps = 20;
            for _ in 0..reps {
                ifft2_unscaled(n, &mut buf);
            }
            let per = t.elapsed().as_secs_f64() / reps as f64;
            println!("2-D FFT {n}x{n}: {:.3} ms", per * 1e3);
        }
    }
}

//! n-dimensional complex FFT built from rustfft 1-D plans.
//!
//! Each axis is brought to the contiguous position by a cyclic axis
//! rotation (a transpose of an `R x N` matrix), so every pass is a batch of
//! contiguous 1-D transforms.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

pub struct FftNd {
    dim: usize,
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

thread_local! {
    static BUFFERS: RefCell<(Vec<Complex64>, Vec<Complex64>)> = const { RefCell::new((Vec::new(), Vec::new())) };
}

static PLANS: OnceLock<Mutex<HashMap<(usize, usize), Arc<FftNd>>>> = OnceLock::new();

/// Shared plan for `dim` axes of `size` points each.
pub fn plan(dim: usize, size: usize) -> Arc<FftNd> {
    let map = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().expect("fft plan cache poisoned");
    guard
        .entry((dim, size))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(FftNd {
                dim,
                size,
                forward: planner.plan_fft_forward(size),
                inverse: planner.plan_fft_inverse(size),
            })
        })
        .clone()
}

impl FftNd {
    pub fn len(&self) -> usize {
        self.size.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unnormalized forward transform, sign `e^{-2 pi i jk/N}` on every axis.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, true);
    }

    /// Unnormalized inverse transform, sign `e^{+2 pi i jk/N}` on every axis.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, false);
    }

    fn run(&self, data: &mut [Complex64], forward: bool) {
        assert_eq!(data.len(), self.len(), "fft buffer length mismatch");
        let plan = if forward {
            &self.forward
        } else {
            &self.inverse
        };
        let rows = self.len() / self.size;
        BUFFERS.with(|cell| {
            let mut bufs = cell.borrow_mut();
            let (scratch, tmp) = &mut *bufs;
            let need = plan.get_inplace_scratch_len();
            if scratch.len() < need {
                scratch.resize(need, Complex64::new(0.0, 0.0));
            }
            if tmp.len() < data.len() {
                tmp.resize(data.len(), Complex64::new(0.0, 0.0));
            }
            for _ in 0..self.dim {
                plan.process_with_scratch(data, &mut scratch[..need]);
                if self.dim > 1 {
                    transpose(data, &mut tmp[..data.len()], rows, self.size);
                    data.copy_from_slice(&tmp[..data.len()]);
                }
            }
        });
    }
}

/// `dst[c * rows + r] = src[r * cols + c]`, blocked for cache reuse.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const B: usize = 32;
    for r0 in (0..rows).step_by(B) {
        let r1 = (r0 + B).min(rows);
        for c0 in (0..cols).step_by(B) {
            let c1 = (c0 + B).min(cols);
            for r in r0..r1 {
                let row = &src[r * cols..(r + 1) * cols];
                for c in c0..c1 {
                    dst[c * rows + r] = row[c];
                }
            }
        }
    }
}

//! Fixed-size two-dimensional complex FFTs, planned once per grid.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub(crate) struct Fft2 {
    m1: usize,
    m2: usize,
    fwd1: Arc<dyn Fft<f64>>,
    inv1: Arc<dyn Fft<f64>>,
    fwd2: Arc<dyn Fft<f64>>,
    inv2: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("m1", &self.m1).field("m2", &self.m2).finish()
    }
}

impl Fft2 {
    pub(crate) fn new(m1: usize, m2: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            m1,
            m2,
            fwd1: planner.plan_fft_forward(m1),
            inv1: planner.plan_fft_inverse(m1),
            fwd2: planner.plan_fft_forward(m2),
            inv2: planner.plan_fft_inverse(m2),
        }
    }

    /// Unnormalized inverse transform of a row-major `m1 x m2` buffer.
    /// Only the axis-2 rows listed in `rows` may hold nonzero data.
    pub(crate) fn inverse(&self, buf: &mut [Complex64], rows: &[usize], scratch: &mut Vec<Complex64>) {
        let (m1, m2) = (self.m1, self.m2);
        debug_assert_eq!(buf.len(), m1 * m2);
        let mut fft_scratch = vec![Complex64::default(); self.inv2.get_inplace_scratch_len().max(self.inv1.get_inplace_scratch_len())];
        for &r in rows {
            self.inv2.process_with_scratch(&mut buf[r * m2..(r + 1) * m2], &mut fft_scratch);
        }
        scratch.resize(m1 * m2, Complex64::default());
        transpose(buf, scratch, m1, m2);
        self.inv1.process_with_scratch(scratch, &mut fft_scratch);
        transpose(scratch, buf, m2, m1);
    }

    /// Unnormalized forward transform. Only the axis-2 rows listed in `rows`
    /// are completed; the remaining rows hold partial (axis-1 only) data.
    pub(crate) fn forward(&self, buf: &mut [Complex64], rows: &[usize], scratch: &mut Vec<Complex64>) {
        let (m1, m2) = (self.m1, self.m2);
        debug_assert_eq!(buf.len(), m1 * m2);
        let mut fft_scratch = vec![Complex64::default(); self.fwd2.get_inplace_scratch_len().max(self.fwd1.get_inplace_scratch_len())];
        scratch.resize(m1 * m2, Complex64::default());
        transpose(buf, scratch, m1, m2);
        self.fwd1.process_with_scratch(scratch, &mut fft_scratch);
        transpose(scratch, buf, m2, m1);
        for &r in rows {
            self.fwd2.process_with_scratch(&mut buf[r * m2..(r + 1) * m2], &mut fft_scratch);
        }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const BLOCK: usize = 16;
    for rb in (0..rows).step_by(BLOCK) {
        for cb in (0..cols).step_by(BLOCK) {
            for r in rb..(rb + BLOCK).min(rows) {
                for c in cb..(cb + BLOCK).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

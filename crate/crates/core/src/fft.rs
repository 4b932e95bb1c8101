//! Square 2D complex FFTs with a per-thread plan cache.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Fft2 {
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, Rc<Fft2>>> = RefCell::new(HashMap::new());
}

impl Fft2 {
    /// Cached plan for an `m x m` grid on the calling thread.
    pub(crate) fn get(m: usize) -> Rc<Fft2> {
        PLANS.with(|plans| {
            plans
                .borrow_mut()
                .entry(m)
                .or_insert_with(|| {
                    let mut planner = FftPlanner::new();
                    Rc::new(Fft2 {
                        m,
                        forward: planner.plan_fft_forward(m),
                        inverse: planner.plan_fft_inverse(m),
                    })
                })
                .clone()
        })
    }

    /// Unnormalized `exp(-i k x)` transform, row-major `m x m` buffer.
    pub(crate) fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, false);
    }

    /// Unnormalized `exp(+i k x)` transform, row-major `m x m` buffer.
    pub(crate) fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, true);
    }

    fn run(&self, buf: &mut [Complex64], inverse: bool) {
        let m = self.m;
        debug_assert_eq!(buf.len(), m * m);
        let fft = if inverse { &self.inverse } else { &self.forward };
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(buf, &mut scratch);
        let mut tmp = vec![Complex64::default(); m * m];
        transpose(buf, &mut tmp, m);
        fft.process_with_scratch(&mut tmp, &mut scratch);
        transpose(&tmp, buf, m);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], m: usize) {
    const BLOCK: usize = 16;
    for i0 in (0..m).step_by(BLOCK) {
        for j0 in (0..m).step_by(BLOCK) {
            for i in i0..(i0 + BLOCK).min(m) {
                for j in j0..(j0 + BLOCK).min(m) {
                    dst[j * m + i] = src[i * m + j];
                }
            }
        }
    }
}

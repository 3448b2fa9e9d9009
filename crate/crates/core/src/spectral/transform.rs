use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct FftPlans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftPlans {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Unnormalized forward transform, Σ_j f_j e^{-i k x_j}, along every axis.
    pub(crate) fn forward(&self, data: &mut [Complex64], d: usize) {
        transform_nd(data, d, &self.forward);
    }

    /// Unnormalized inverse transform, Σ_k c_k e^{+i k x_j}, along every axis.
    pub(crate) fn inverse(&self, data: &mut [Complex64], d: usize) {
        transform_nd(data, d, &self.inverse);
    }
}

fn transform_nd(data: &mut [Complex64], d: usize, plan: &Arc<dyn Fft<f64>>) {
    let n = plan.len();
    debug_assert_eq!(data.len(), n.pow(d as u32));
    // last axis is contiguous
    plan.process(data);
    if d == 1 {
        return;
    }
    let mut block: Vec<Complex64> = Vec::new();
    for axis in 0..d - 1 {
        let stride = n.pow((d - 1 - axis) as u32);
        let outer = data.len() / (n * stride);
        block.resize(n * stride, Complex64::new(0.0, 0.0));
        for o in 0..outer {
            let base = o * n * stride;
            // transpose the (n × stride) slab so each line is contiguous
            for j in 0..n {
                for s in 0..stride {
                    block[s * n + j] = data[base + j * stride + s];
                }
            }
            plan.process(&mut block);
            for j in 0..n {
                for s in 0..stride {
                    data[base + j * stride + s] = block[s * n + j];
                }
            }
        }
    }
}

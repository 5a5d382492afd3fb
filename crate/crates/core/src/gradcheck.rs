//! Central finite-difference check of the full network gradient.
//!
//! Only forward passes and the rate objective are used here, so the check is
//! independent of the backward pass it validates.

use ndarray::Array2;
use serde::Serialize;

use crate::error::Result;
use crate::graph::FeatureGraph;
use crate::pcgnn::{pcgnn_loss, PcgnnModel};

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub checked: usize,
    /// Parameters whose `+-step` probes crossed a ReLU kink.
    pub skipped_kinks: usize,
    pub max_rel_err: f64,
    pub worst_param: usize,
    /// Denominator floor used for the relative error.
    pub floor: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol && self.skipped_kinks * 100 <= self.checked + self.skipped_kinks
    }
}

/// Compare analytic gradients with central differences of step `step`.
///
/// The relative error of entry `i` is `|g_i - fd_i| / max(|g_i|, |fd_i|, floor)`
/// where `floor = floor_ratio * max_j |g_j|`, so entries far below the
/// gradient's scale are judged against it rather than against themselves.
pub fn check_model_gradients(
    model: &PcgnnModel<f64>,
    graph: &FeatureGraph,
    channel: &Array2<f64>,
    noise: f64,
    step: f64,
    floor_ratio: f64,
) -> Result<GradCheckReport> {
    let (alloc, trace) = model.forward(graph)?;
    let _ = alloc;
    let (grads, _) = model.backward(&trace, &[graph], &[channel], noise)?;
    let analytic = grads.flatten();
    let base_sig = trace.activation_signature();
    let floor = floor_ratio * analytic.iter().fold(0.0f64, |a, g| a.max(g.abs()));

    let params = model.params();
    let mut probe = model.clone();
    let mut eval = |p: &[f64]| -> Result<(f64, u64)> {
        probe.set_params(p)?;
        let (alloc, t) = probe.forward(graph)?;
        Ok((pcgnn_loss(alloc.powers(), channel, noise), t.activation_signature()))
    };

    let mut report = GradCheckReport {
        checked: 0,
        skipped_kinks: 0,
        max_rel_err: 0.0,
        worst_param: 0,
        floor,
    };
    let mut p = params.clone();
    for i in 0..params.len() {
        p[i] = params[i] + step;
        let (up, sig_up) = eval(&p)?;
        p[i] = params[i] - step;
        let (dn, sig_dn) = eval(&p)?;
        p[i] = params[i];
        if sig_up != base_sig || sig_dn != base_sig {
            report.skipped_kinks += 1;
            continue;
        }
        let fd = (up - dn) / (2.0 * step);
        let g = analytic[i];
        let err = (g - fd).abs() / g.abs().max(fd.abs()).max(floor);
        report.checked += 1;
        if err > report.max_rel_err {
            report.max_rel_err = err;
            report.worst_param = i;
        }
    }
    Ok(report)
}

use serde::{Deserialize, Serialize};

use crate::error::{HaloError, Result};

/// Floor on the accumulated weight when normalizing the expected depth.
pub const DEPTH_EPS: f64 = 1e-10;

/// Output of alpha compositing along one ray.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderResult {
    pub rgb: [f64; 3],
    /// Accumulated occupancy, the sum of `weights`.
    pub acc: f64,
    /// Expected sample position normalized by `acc`.
    pub depth: f64,
    pub weights: Vec<f64>,
    /// Transmittance past the last sample.
    pub transmittance: f64,
}

/// Upstream gradient with respect to a [`RenderResult`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RenderGradOut {
    pub rgb: [f64; 3],
    pub acc: f64,
    pub depth: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompositeGrad {
    pub sigma: Vec<f64>,
    pub color: Vec<[f64; 3]>,
}

fn validate(sigmas: &[f64], colors: &[[f64; 3]], ts: &[f64], t_far: f64) -> Result<()> {
    let k = sigmas.len();
    if k == 0 {
        return Err(HaloError::InvalidInput("composite needs at least one sample".into()));
    }
    if colors.len() != k || ts.len() != k {
        return Err(HaloError::shape(
            format!("{k} colors and ts"),
            format!("{} colors, {} ts", colors.len(), ts.len()),
        ));
    }
    if let Some(i) = sigmas.iter().position(|s| !(*s >= 0.0 && s.is_finite())) {
        return Err(HaloError::InvalidInput(format!("sigma[{i}] = {} is negative or non-finite", sigmas[i])));
    }
    if let Some(i) = ts.windows(2).position(|w| !(w[1] >= w[0])) {
        return Err(HaloError::InvalidInput(format!("sample positions decrease at index {}", i + 1)));
    }
    if !(t_far >= ts[k - 1]) {
        return Err(HaloError::InvalidInput(format!("t_far {t_far} precedes last sample {}", ts[k - 1])));
    }
    Ok(())
}

#[inline]
fn deltas(ts: &[f64], t_far: f64) -> impl Iterator<Item = f64> + '_ {
    let k = ts.len();
    (0..k).map(move |i| if i + 1 < k { ts[i + 1] - ts[i] } else { t_far - ts[i] })
}

/// Alpha compositing with `delta_k = t_{k+1} - t_k` and `delta_K = t_far - t_K`.
///
/// `background`, when given, fills the unoccupied fraction `1 - acc`.
pub fn composite(sigmas: &[f64], colors: &[[f64; 3]], ts: &[f64], t_far: f64, background: Option<[f64; 3]>) -> Result<RenderResult> {
    validate(sigmas, colors, ts, t_far)?;
    Ok(composite_unchecked(sigmas, colors, ts, t_far, background))
}

pub(crate) fn composite_unchecked(
    sigmas: &[f64],
    colors: &[[f64; 3]],
    ts: &[f64],
    t_far: f64,
    background: Option<[f64; 3]>,
) -> RenderResult {
    let mut weights = Vec::with_capacity(sigmas.len());
    let mut optical = 0.0f64;
    let mut rgb = [0.0; 3];
    let mut acc = 0.0;
    let mut depth_sum = 0.0;
    for (((&sigma, c), &t), delta) in sigmas.iter().zip(colors).zip(ts).zip(deltas(ts, t_far)) {
        let tau = sigma * delta;
        let w = (-optical).exp() * -(-tau).exp_m1();
        optical += tau;
        weights.push(w);
        acc += w;
        depth_sum += w * t;
        for ch in 0..3 {
            rgb[ch] += w * c[ch];
        }
    }
    if let Some(bg) = background {
        for ch in 0..3 {
            rgb[ch] += (1.0 - acc) * bg[ch];
        }
    }
    RenderResult {
        rgb,
        acc,
        depth: depth_sum / acc.max(DEPTH_EPS),
        weights,
        transmittance: (-optical).exp(),
    }
}

/// Gradient of a scalar loss with respect to densities and colors.
pub fn composite_backward(
    sigmas: &[f64],
    colors: &[[f64; 3]],
    ts: &[f64],
    t_far: f64,
    background: Option<[f64; 3]>,
    result: &RenderResult,
    grad: &RenderGradOut,
) -> CompositeGrad {
    let k = sigmas.len();
    let bg = background.unwrap_or([0.0; 3]);
    let denom = result.acc.max(DEPTH_EPS);
    let normalized = result.acc > DEPTH_EPS;
    // dL/dw_k
    let gw: Vec<f64> = (0..k)
        .map(|i| {
            let c = &colors[i];
            let mut g = grad.acc;
            for ch in 0..3 {
                g += grad.rgb[ch] * (c[ch] - bg[ch]);
            }
            let centered = if normalized { ts[i] - result.depth } else { ts[i] };
            g + grad.depth * centered / denom
        })
        .collect();

    let mut sigma_grad = vec![0.0; k];
    let mut tail = 0.0; // sum_{j > i} w_j gw_j
    let mut optical_after: Vec<f64> = Vec::with_capacity(k);
    let mut optical = 0.0;
    for (&s, d) in sigmas.iter().zip(deltas(ts, t_far)) {
        optical += s * d;
        optical_after.push(optical);
    }
    for (i, d) in deltas(ts, t_far).collect::<Vec<_>>().into_iter().enumerate().rev() {
        let t_next = (-optical_after[i]).exp();
        sigma_grad[i] = d * (t_next * gw[i] - tail);
        tail += result.weights[i] * gw[i];
    }
    let color = result
        .weights
        .iter()
        .map(|&w| [w * grad.rgb[0], w * grad.rgb[1], w * grad.rgb[2]])
        .collect();
    CompositeGrad { sigma: sigma_grad, color }
}

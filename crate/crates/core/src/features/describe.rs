use super::{Descriptor, Image, Keypoint};

pub const DESCRIPTOR_LEN: usize = 64;
const GRID: i64 = 4;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DescribeOutput {
    /// One per kept keypoint, in the order of `kept`.
    pub descriptors: Vec<Descriptor>,
    /// Indices (into the input keypoints) that received a descriptor.
    pub kept: Vec<usize>,
    /// Indices dropped because the patch left the image.
    pub dropped: Vec<usize>,
}

/// 4×4 grid of (Σdx, Σdy, Σ|dx|, Σ|dy|) over a square patch of radius
/// `keypoint.scale` centred on the rounded keypoint, Gaussian-weighted and
/// L2-normalized. Not rotation invariant.
pub fn describe(image: &Image, keypoints: &[Keypoint]) -> DescribeOutput {
    let mut out = DescribeOutput::default();
    for (i, kp) in keypoints.iter().enumerate() {
        match describe_with(image, kp) {
            Some(d) => {
                out.descriptors.push(d);
                out.kept.push(i);
            }
            None => out.dropped.push(i),
        }
    }
    out
}

/// Descriptor of a single keypoint, `None` when the patch (plus the one-pixel
/// gradient stencil) does not fit inside the image.
pub fn describe_with(image: &Image, kp: &Keypoint) -> Option<Descriptor> {
    let s = (kp.scale.round() as i64).max(2);
    let (cx, cy) = (kp.x.round() as i64, kp.y.round() as i64);
    let (w, h) = (image.width() as i64, image.height() as i64);
    if !kp.x.is_finite() || !kp.y.is_finite() {
        return None;
    }
    if cx - s - 1 < 0 || cy - s - 1 < 0 || cx + s >= w || cy + s >= h {
        return None;
    }
    let px = |x: i64, y: i64| image.get(x as u32, y as u32) as f64;
    let sigma = s as f64;
    let mut acc = vec![0.0; DESCRIPTOR_LEN];
    for y in cy - s..cy + s {
        for x in cx - s..cx + s {
            let (u, v) = (x - (cx - s), y - (cy - s));
            let cell = ((v * GRID) / (2 * s)) * GRID + (u * GRID) / (2 * s);
            let (rx, ry) = (x as f64 + 0.5 - cx as f64, y as f64 + 0.5 - cy as f64);
            let wgt = (-(rx * rx + ry * ry) / (2.0 * sigma * sigma)).exp();
            let dx = (px(x + 1, y) - px(x - 1, y)) * wgt;
            let dy = (px(x, y + 1) - px(x, y - 1)) * wgt;
            let b = cell as usize * 4;
            acc[b] += dx;
            acc[b + 1] += dy;
            acc[b + 2] += dx.abs();
            acc[b + 3] += dy.abs();
        }
    }
    Some(Descriptor::from_raw(acc))
}

use std::cmp::Ordering;

use super::{Image, Keypoint, Mask};

/// Source of candidate keypoints; thresholding and the adaptive search are
/// layered on top so any detector gets both for free.
pub trait KeypointDetector {
    /// Every local response maximum above the detector's floor, restricted to
    /// mask-true pixels, sorted by descending response.
    fn candidates(&self, image: &Image, mask: Option<&Mask>) -> Vec<Keypoint>;

    /// Lowest threshold the adaptive search will try.
    fn floor(&self) -> f64;
}

/// Determinant-of-Hessian blob detector at a single Gaussian scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianDetector {
    pub sigma: f64,
    /// Stored on each keypoint as its `scale`.
    pub patch_radius: f64,
    pub floor: f64,
}

impl Default for HessianDetector {
    fn default() -> Self {
        Self {
            sigma: 1.6,
            patch_radius: 8.0,
            floor: 1e-4,
        }
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

fn blur(image: &Image, sigma: f64) -> Vec<f64> {
    let (w, h) = (image.width() as i64, image.height() as i64);
    let src: Vec<f64> = image.data().iter().map(|&v| v as f64 / 255.0).collect();
    if sigma <= 0.0 {
        return src;
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let at = |x: i64, lim: i64| x.clamp(0, lim - 1);
    let mut tmp = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            tmp[(y * w + x) as usize] = k
                .iter()
                .enumerate()
                .map(|(i, kv)| kv * src[(y * w + at(x + i as i64 - r, w)) as usize])
                .sum();
        }
    }
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            out[(y * w + x) as usize] = k
                .iter()
                .enumerate()
                .map(|(i, kv)| kv * tmp[(at(y + i as i64 - r, h) * w + x) as usize])
                .sum();
        }
    }
    out
}

impl HessianDetector {
    /// Scale-normalized det(H) of the smoothed image; zero on the one-pixel
    /// border where second differences are undefined.
    pub fn response_map(&self, image: &Image) -> Vec<f64> {
        let (w, h) = (image.width() as usize, image.height() as usize);
        let l = blur(image, self.sigma);
        let mut resp = vec![0.0; w * h];
        if w < 3 || h < 3 {
            return resp;
        }
        let norm = self.sigma.max(1.0).powi(4);
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let i = y * w + x;
                let dxx = l[i + 1] - 2.0 * l[i] + l[i - 1];
                let dyy = l[i + w] - 2.0 * l[i] + l[i - w];
                let dxy = (l[i + w + 1] - l[i + w - 1] - l[i - w + 1] + l[i - w - 1]) / 4.0;
                resp[i] = (dxx * dyy - dxy * dxy) * norm;
            }
        }
        resp
    }
}

// Quadratic peak offset, kept strictly inside the pixel so rounding returns
// the detecting pixel.
fn peak_offset(m: f64, c: f64, p: f64) -> f64 {
    let denom = m - 2.0 * c + p;
    if denom >= 0.0 {
        return 0.0;
    }
    (0.5 * (m - p) / denom).clamp(-0.499, 0.499)
}

pub(crate) fn by_response(a: &Keypoint, b: &Keypoint) -> Ordering {
    b.response
        .total_cmp(&a.response)
        .then(a.y.total_cmp(&b.y))
        .then(a.x.total_cmp(&b.x))
}

impl KeypointDetector for HessianDetector {
    fn candidates(&self, image: &Image, mask: Option<&Mask>) -> Vec<Keypoint> {
        let (w, h) = (image.width() as usize, image.height() as usize);
        if w < 5 || h < 5 {
            return Vec::new();
        }
        let resp = self.response_map(image);
        let mut out = Vec::new();
        for y in 2..h - 2 {
            for x in 2..w - 2 {
                let i = y * w + x;
                let c = resp[i];
                if !(c > self.floor) {
                    continue;
                }
                if let Some(m) = mask {
                    if !m.get(x as i64, y as i64) {
                        continue;
                    }
                }
                // strict maximum; plateaus resolved in favour of the first
                // pixel in raster order
                let mut is_max = true;
                'nb: for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let j = (i as i64 + dy * w as i64 + dx) as usize;
                        let earlier = dy < 0 || (dy == 0 && dx < 0);
                        if resp[j] > c || (earlier && resp[j] == c) {
                            is_max = false;
                            break 'nb;
                        }
                    }
                }
                if !is_max {
                    continue;
                }
                let ox = peak_offset(resp[i - 1], c, resp[i + 1]);
                let oy = peak_offset(resp[i - w], c, resp[i + w]);
                out.push(Keypoint {
                    x: x as f64 + ox,
                    y: y as f64 + oy,
                    response: c,
                    scale: self.patch_radius,
                });
            }
        }
        out.sort_by(by_response);
        out
    }

    fn floor(&self) -> f64 {
        self.floor
    }
}

/// Keypoints with response ≥ `threshold` from the default detector.
pub fn detect(image: &Image, threshold: f64, mask: Option<&Mask>) -> Vec<Keypoint> {
    detect_with(&HessianDetector::default(), image, threshold, mask)
}

pub fn detect_with<D: KeypointDetector + ?Sized>(
    detector: &D,
    image: &Image,
    threshold: f64,
    mask: Option<&Mask>,
) -> Vec<Keypoint> {
    let mut c = detector.candidates(image, mask);
    c.retain(|k| k.response >= threshold);
    c
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveDetection {
    pub keypoints: Vec<Keypoint>,
    pub threshold: f64,
    /// No threshold in the search range produced a count inside the
    /// requested interval; `keypoints` is the closest count found.
    pub range_unmet: bool,
    pub iterations: usize,
}

const MAX_BISECTIONS: usize = 20;

pub fn detect_adaptive(
    image: &Image,
    min_count: usize,
    max_count: usize,
    mask: Option<&Mask>,
) -> AdaptiveDetection {
    detect_adaptive_with(&HessianDetector::default(), image, min_count, max_count, mask)
}

/// Bisects the response threshold (geometrically, between the detector floor
/// and the strongest response) until the keypoint count lands in
/// `[min_count, max_count]`. The response map is computed once.
pub fn detect_adaptive_with<D: KeypointDetector + ?Sized>(
    detector: &D,
    image: &Image,
    min_count: usize,
    max_count: usize,
    mask: Option<&Mask>,
) -> AdaptiveDetection {
    assert!(min_count < max_count, "min_count must be below max_count");
    let cands = detector.candidates(image, mask);
    let count = |t: f64| cands.partition_point(|k| k.response >= t);
    let in_range = |n: usize| (min_count..=max_count).contains(&n);
    let finish = |t: f64, unmet: bool, iterations: usize| AdaptiveDetection {
        keypoints: cands[..count(t)].to_vec(),
        threshold: t,
        range_unmet: unmet,
        iterations,
    };

    let mut lo = detector.floor().max(f64::MIN_POSITIVE);
    if cands.len() <= max_count {
        return finish(lo, !in_range(cands.len()), 0);
    }
    let mut hi = cands[0].response;
    if in_range(count(hi)) {
        return finish(hi, false, 0);
    }
    // invariant: count(lo) > max_count, count(hi) < min_count
    for it in 1..=MAX_BISECTIONS {
        let mid = (lo * hi).sqrt();
        let n = count(mid);
        if in_range(n) {
            return finish(mid, false, it);
        }
        if n > max_count {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gap = |n: usize| if n > max_count { n - max_count } else { min_count - n };
    let t = if gap(count(lo)) <= gap(count(hi)) { lo } else { hi };
    finish(t, true, MAX_BISECTIONS)
}

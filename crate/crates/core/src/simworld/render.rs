use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::synth::footprint_boxes;
use super::{derive_seed, Wall, World};
use crate::features::Image;
use crate::frame::{Frame, FrameSource};
use crate::geometry::{CameraIntrinsics, Pose, Vec3};
use crate::semantics::DetectionSet;

/// Appearance of rendered frames. Every landmark is drawn as a small
/// cluster of Gaussian spots lying in its wall plane, so its image patch is
/// distinctive and deforms correctly with viewpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    pub background: f64,
    /// Std-dev of the central spot, meters on the wall.
    pub spot_sigma: f64,
    /// Satellite spots per landmark.
    pub satellites: usize,
    /// Satellites sit within this radius (meters).
    pub pattern_radius: f64,
    /// Per-pixel Gaussian sensor noise, grey levels.
    pub sensor_sigma: f64,
    pub box_margin: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            background: 110.0,
            spot_sigma: 0.007,
            satellites: 4,
            pattern_radius: 0.03,
            sensor_sigma: 2.0,
            box_margin: 2.0,
        }
    }
}

struct Spot {
    s: f64,
    t: f64,
    sigma: f64,
    amp: f64,
}

fn pattern(world: &World, id: u64, cfg: &RenderConfig) -> Vec<Spot> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(world.seed, id ^ 0x5350_4F54));
    let sign = |rng: &mut ChaCha8Rng| if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let mut spots = vec![Spot {
        s: 0.0,
        t: 0.0,
        sigma: cfg.spot_sigma,
        amp: sign(&mut rng) * rng.random_range(80.0..120.0),
    }];
    for _ in 0..cfg.satellites {
        let (r, a) = (rng.random_range(0.4..1.0) * cfg.pattern_radius, rng.random_range(0.0..std::f64::consts::TAU));
        spots.push(Spot {
            s: r * a.cos(),
            t: r * a.sin(),
            sigma: cfg.spot_sigma * rng.random_range(0.5..0.9),
            amp: sign(&mut rng) * rng.random_range(40.0..90.0),
        });
    }
    spots
}

/// In-plane axes of the wall a point lies on (nearest face).
fn plane_axes(world: &World, p: &Vec3) -> (Vec3, Vec3, Vec3) {
    let wall = Wall::ALL
        .into_iter()
        .min_by(|a, b| {
            let d = |w: &Wall| {
                let (c, _, _, n, _) = w.frame(world.dims);
                (p - c).dot(&n).abs()
            };
            d(a).total_cmp(&d(b))
        })
        .expect("six walls");
    let (_, u, v, n, _) = wall.frame(world.dims);
    (u, v, n)
}

/// Renders a grey-level image of the world from `pose` plus the
/// ground-truth boxes (as [`super::synthesize_frame`] computes them).
pub fn render_image<R: Rng + ?Sized>(
    world: &World,
    pose: &Pose,
    k: &CameraIntrinsics,
    cfg: &RenderConfig,
    rng: &mut R,
) -> (Image, DetectionSet) {
    let (w, h) = (k.width as usize, k.height as usize);
    let mut acc = vec![cfg.background; w * h];
    let center = pose.center();
    let r_c2w = pose.rotation_matrix().transpose();
    let support = cfg.pattern_radius + 3.0 * cfg.spot_sigma;
    for l in &world.landmarks {
        let pc = pose.transform(&l.position);
        if pc.z < 0.05 {
            continue;
        }
        let (u, v, n) = plane_axes(world, &l.position);
        // pixel window from the projected support square
        let corners = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
            .map(|(a, b)| pose.transform(&(l.position + u * (a * support) + v * (b * support))));
        if corners.iter().any(|c| c.z < 0.05) {
            continue;
        }
        let xs = corners.map(|c| k.fx * c.x / c.z + k.cx);
        let ys = corners.map(|c| k.fy * c.y / c.z + k.cy);
        let fmin = |a: [f64; 4]| a.iter().copied().fold(f64::INFINITY, f64::min);
        let fmax = |a: [f64; 4]| a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let x0 = fmin(xs).floor().max(0.0) as usize;
        let y0 = fmin(ys).floor().max(0.0) as usize;
        let x1 = fmax(xs).ceil().min(w as f64 - 1.0);
        let y1 = fmax(ys).ceil().min(h as f64 - 1.0);
        if x1 < 0.0 || y1 < 0.0 || (x0 as f64) > x1 || (y0 as f64) > y1 {
            continue;
        }
        let spots = pattern(world, l.id, cfg);
        let denom_n = n.dot(&(l.position - center));
        for y in y0..=y1 as usize {
            for x in x0..=x1 as usize {
                // ray through the pixel centre, intersected with the plane
                let d_cam = Vec3::new((x as f64 - k.cx) / k.fx, (y as f64 - k.cy) / k.fy, 1.0);
                let d = r_c2w * d_cam;
                let dn = n.dot(&d);
                if dn.abs() < 1e-12 {
                    continue;
                }
                let s = denom_n / dn;
                if s <= 0.0 {
                    continue;
                }
                let q = center + d * s - l.position;
                let (qs, qt) = (q.dot(&u), q.dot(&v));
                let val: f64 = spots
                    .iter()
                    .map(|p| {
                        let r2 = (qs - p.s).powi(2) + (qt - p.t).powi(2);
                        p.amp * (-r2 / (2.0 * p.sigma * p.sigma)).exp()
                    })
                    .sum();
                acc[y * w + x] += val;
            }
        }
    }
    let noise = (cfg.sensor_sigma > 0.0).then(|| Normal::new(0.0, cfg.sensor_sigma).unwrap());
    let data: Vec<u8> = acc
        .into_iter()
        .map(|v| {
            let v = v + noise.as_ref().map_or(0.0, |n| n.sample(rng));
            v.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    let image = Image::new(k.width, k.height, data).expect("buffer matches dimensions");
    let boxes = footprint_boxes(world, pose, k, cfg.box_margin);
    (image, DetectionSet { frame: 0, boxes, ..Default::default() })
}

/// Rendered [`Frame`] with ground-truth pose and boxes.
pub fn render_frame<R: Rng + ?Sized>(
    world: &World,
    pose: &Pose,
    k: &CameraIntrinsics,
    cfg: &RenderConfig,
    id: u64,
    rng: &mut R,
) -> Frame {
    let (image, mut detections) = render_image(world, pose, k, cfg, rng);
    detections.frame = id;
    Frame {
        id,
        timestamp: id as f64,
        source: FrameSource::Image(image),
        detections,
        gt_pose: Some(*pose),
    }
}

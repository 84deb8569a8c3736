use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SceneConfig, SimError};
use crate::features::Descriptor;
use crate::geometry::{Mat3, Vec3};
use crate::semantics::{ClassId, NUM_CLASSES};

const PLACEMENT_TRIES: usize = 2000;
const DESCRIPTOR_TRIES: usize = 1000;
/// Objects stand this far off their wall.
const OBJECT_OFFSET: f64 = 0.02;
const WALL_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wall {
    /// z = −h/2
    Floor,
    /// z = +h/2
    Ceiling,
    /// y = +w/2
    Left,
    /// y = −w/2
    Right,
    /// x = length
    Front,
    /// x = 0
    Back,
}

impl Wall {
    pub const ALL: [Wall; 6] = [
        Wall::Floor,
        Wall::Ceiling,
        Wall::Left,
        Wall::Right,
        Wall::Front,
        Wall::Back,
    ];
    pub const VERTICAL: [Wall; 4] = [Wall::Left, Wall::Right, Wall::Front, Wall::Back];

    /// (centre, u, v, inward normal, half extents along u and v).
    pub fn frame(&self, dims: [f64; 3]) -> (Vec3, Vec3, Vec3, Vec3, [f64; 2]) {
        let [l, w, h] = dims;
        let (x, y, z) = (Vec3::x(), Vec3::y(), Vec3::z());
        match self {
            Wall::Floor => (Vec3::new(l / 2.0, 0.0, -h / 2.0), x, y, z, [l / 2.0, w / 2.0]),
            Wall::Ceiling => (Vec3::new(l / 2.0, 0.0, h / 2.0), x, y, -z, [l / 2.0, w / 2.0]),
            Wall::Left => (Vec3::new(l / 2.0, w / 2.0, 0.0), x, z, -y, [l / 2.0, h / 2.0]),
            Wall::Right => (Vec3::new(l / 2.0, -w / 2.0, 0.0), x, z, y, [l / 2.0, h / 2.0]),
            Wall::Front => (Vec3::new(l, 0.0, 0.0), y, z, -x, [w / 2.0, h / 2.0]),
            Wall::Back => (Vec3::new(0.0, 0.0, 0.0), y, z, x, [w / 2.0, h / 2.0]),
        }
    }

    fn area(&self, dims: [f64; 3]) -> f64 {
        let [a, b] = self.frame(dims).4;
        4.0 * a * b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldObject {
    pub id: u64,
    /// `None` for clutter the detector does not know about.
    pub class: Option<ClassId>,
    pub wall: Wall,
    /// Footprint centre (on the object plane, world frame).
    pub center: Vec3,
    /// In-plane rotation of the footprint, radians.
    pub angle: f64,
    /// Footprint size along the (rotated) wall axes, meters.
    pub extent: [f64; 2],
    pub landmarks: Vec<u64>,
    pub movable: bool,
}

impl WorldObject {
    /// In-plane axes after rotation, plus the wall normal.
    pub fn axes(&self, dims: [f64; 3]) -> (Vec3, Vec3, Vec3) {
        let (_, u, v, n, _) = self.wall.frame(dims);
        let (s, c) = self.angle.sin_cos();
        (u * c + v * s, v * c - u * s, n)
    }

    pub fn corners(&self, dims: [f64; 3]) -> [Vec3; 4] {
        let (u, v, _) = self.axes(dims);
        let (a, b) = (self.extent[0] / 2.0, self.extent[1] / 2.0);
        [
            self.center - u * a - v * b,
            self.center + u * a - v * b,
            self.center + u * a + v * b,
            self.center - u * a + v * b,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldLandmark {
    pub id: u64,
    pub position: Vec3,
    pub descriptor: Descriptor,
    pub class: Option<ClassId>,
    pub object: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub dims: [f64; 3],
    pub objects: Vec<WorldObject>,
    pub landmarks: Vec<WorldLandmark>,
    pub seed: u64,
}

impl World {
    pub fn object(&self, id: u64) -> Option<&WorldObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn labeled_landmark_count(&self) -> usize {
        self.landmarks.iter().filter(|l| l.class.is_some()).count()
    }

    /// The movable object carrying the most landmarks (lowest id on ties).
    pub fn densest_movable_object(&self) -> Option<&WorldObject> {
        self.objects
            .iter()
            .filter(|o| o.movable)
            .max_by(|a, b| a.landmarks.len().cmp(&b.landmarks.len()).then(b.id.cmp(&a.id)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("world serialization")
    }
}

struct Placed {
    wall: Wall,
    // in-wall centre and half extents (axis-aligned at placement)
    c: [f64; 2],
    half: [f64; 2],
}

fn place(
    rng: &mut ChaCha8Rng,
    dims: [f64; 3],
    walls: &[Wall],
    extent: [f64; 2],
    placed: &[Placed],
    what: &str,
) -> Result<Placed, SimError> {
    let weights = WeightedIndex::new(walls.iter().map(|w| w.area(dims)))
        .map_err(|_| SimError::Config("degenerate prism".into()))?;
    let half = [extent[0] / 2.0, extent[1] / 2.0];
    for _ in 0..PLACEMENT_TRIES {
        let wall = walls[weights.sample(rng)];
        let lim = wall.frame(dims).4;
        let room = [lim[0] - half[0] - WALL_MARGIN, lim[1] - half[1] - WALL_MARGIN];
        if room[0] <= 0.0 || room[1] <= 0.0 {
            continue;
        }
        let c = [rng.random_range(-room[0]..room[0]), rng.random_range(-room[1]..room[1])];
        let clear = placed.iter().filter(|p| p.wall == wall).all(|p| {
            (p.c[0] - c[0]).abs() > p.half[0] + half[0] + WALL_MARGIN
                || (p.c[1] - c[1]).abs() > p.half[1] + half[1] + WALL_MARGIN
        });
        if clear {
            return Ok(Placed { wall, c, half });
        }
    }
    Err(SimError::Infeasible {
        what: what.to_string(),
        tries: PLACEMENT_TRIES,
    })
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let normal = rand_distr::StandardNormal;
    let v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Generates the scene for `seed` (the config's own seed is ignored here so
/// a single config can be swept over seeds).
pub fn generate_world(config: &SceneConfig, seed: u64) -> Result<World, SimError> {
    config.validate()?;
    let dims = config.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut placed: Vec<Placed> = Vec::new();
    let mut objects: Vec<WorldObject> = Vec::new();
    // (class, extent, landmark count, movable)
    let mut specs: Vec<(Option<ClassId>, [f64; 2], usize, bool)> = Vec::new();
    for class in 0..NUM_CLASSES as ClassId {
        for _ in 0..config.objects_per_class {
            let extent = [
                rng.random_range(config.object_size_min[0]..=config.object_size_max[0]),
                rng.random_range(config.object_size_min[1]..=config.object_size_max[1]),
            ];
            let movable = config.movable_classes.contains(&class);
            specs.push((Some(class), extent, config.landmarks_per_object, movable));
        }
    }
    for _ in 0..config.clutter_objects {
        specs.push((None, config.clutter_size, config.clutter_landmarks, true));
    }

    for (class, extent, _, movable) in &specs {
        let what = match class {
            Some(c) => format!("object of class {c}"),
            None => "clutter object".to_string(),
        };
        let p = place(&mut rng, dims, &Wall::VERTICAL, *extent, &placed, &what)?;
        let (o, u, v, n, _) = p.wall.frame(dims);
        objects.push(WorldObject {
            id: objects.len() as u64,
            class: *class,
            wall: p.wall,
            center: o + u * p.c[0] + v * p.c[1] + n * OBJECT_OFFSET,
            angle: 0.0,
            extent: *extent,
            landmarks: Vec::new(),
            movable: *movable,
        });
        placed.push(p);
    }

    let mut positions: Vec<(Vec3, Option<ClassId>, Option<u64>)> = Vec::new();
    for (obj, (_, _, count, _)) in objects.iter_mut().zip(&specs) {
        let (u, v, _) = obj.axes(dims);
        for _ in 0..*count {
            let a = rng.random_range(-0.5..0.5) * obj.extent[0];
            let b = rng.random_range(-0.5..0.5) * obj.extent[1];
            obj.landmarks.push(positions.len() as u64);
            positions.push((obj.center + u * a + v * b, obj.class, Some(obj.id)));
        }
    }
    let weights = WeightedIndex::new(Wall::ALL.iter().map(|w| w.area(dims)))
        .map_err(|_| SimError::Config("degenerate prism".into()))?;
    let mut background = 0;
    let mut tries = 0;
    while background < config.background_landmarks {
        tries += 1;
        if tries > PLACEMENT_TRIES * config.background_landmarks.max(1) {
            return Err(SimError::Infeasible {
                what: "background landmarks".into(),
                tries,
            });
        }
        let wall = Wall::ALL[weights.sample(&mut rng)];
        let (o, u, v, _, lim) = wall.frame(dims);
        let c = [rng.random_range(-lim[0]..lim[0]), rng.random_range(-lim[1]..lim[1])];
        let occluded = placed.iter().filter(|p| p.wall == wall).any(|p| {
            (p.c[0] - c[0]).abs() <= p.half[0] + 0.02 && (p.c[1] - c[1]).abs() <= p.half[1] + 0.02
        });
        if occluded {
            continue;
        }
        positions.push((o + u * c[0] + v * c[1], None, None));
        background += 1;
    }

    // descriptors with a minimum pairwise distance
    let mut landmarks: Vec<WorldLandmark> = Vec::with_capacity(positions.len());
    let min_d2 = config.descriptor_min_distance.powi(2);
    for (id, (position, class, object)) in positions.into_iter().enumerate() {
        let mut accepted = None;
        for _ in 0..DESCRIPTOR_TRIES {
            let cand = Descriptor(random_unit(&mut rng, config.descriptor_dim));
            if landmarks.iter().all(|l| l.descriptor.distance_squared(&cand) >= min_d2) {
                accepted = Some(cand);
                break;
            }
        }
        let descriptor = accepted.ok_or_else(|| SimError::Infeasible {
            what: format!("descriptor for landmark {id} at distance ≥ {}", config.descriptor_min_distance),
            tries: DESCRIPTOR_TRIES,
        })?;
        landmarks.push(WorldLandmark {
            id: id as u64,
            position,
            descriptor,
            class,
            object,
        });
    }
    Ok(World {
        dims,
        objects,
        landmarks,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    RotateObject,
    TranslateObject,
    RemoveObject,
    SwapObjects,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub kind: PerturbationKind,
    pub targets: Vec<u64>,
    /// Degrees for rotations, meters for translations; unused otherwise.
    pub magnitude: f64,
}

impl Perturbation {
    pub fn rotate(object: u64, degrees: f64) -> Self {
        Self { kind: PerturbationKind::RotateObject, targets: vec![object], magnitude: degrees }
    }

    pub fn translate(object: u64, meters: f64) -> Self {
        Self { kind: PerturbationKind::TranslateObject, targets: vec![object], magnitude: meters }
    }

    pub fn remove(object: u64) -> Self {
        Self { kind: PerturbationKind::RemoveObject, targets: vec![object], magnitude: 0.0 }
    }

    pub fn swap(a: u64, b: u64) -> Self {
        Self { kind: PerturbationKind::SwapObjects, targets: vec![a, b], magnitude: 0.0 }
    }
}

fn rigid_apply(world: &mut World, obj_idx: usize, r: &Mat3, pivot: &Vec3, shift: &Vec3) {
    let ids = world.objects[obj_idx].landmarks.clone();
    for id in ids {
        let l = &mut world.landmarks[id as usize];
        l.position = pivot + r * (l.position - pivot) + shift;
    }
    let o = &mut world.objects[obj_idx];
    o.center = pivot + r * (o.center - pivot) + shift;
}

/// Rigidly moves (or removes) movable objects together with their
/// landmarks; descriptors and every other landmark are left untouched.
pub fn perturb_world(world: &World, p: &Perturbation) -> Result<World, SimError> {
    let want = if p.kind == PerturbationKind::SwapObjects { 2 } else { 1 };
    if p.targets.len() != want {
        return Err(SimError::Config(format!(
            "{:?} needs {want} target(s), got {}",
            p.kind,
            p.targets.len()
        )));
    }
    let mut idx = Vec::new();
    for &t in &p.targets {
        let i = world
            .objects
            .iter()
            .position(|o| o.id == t)
            .ok_or(SimError::UnknownObject(t))?;
        if !world.objects[i].movable {
            return Err(SimError::Immovable(t));
        }
        idx.push(i);
    }
    let mut out = world.clone();
    let dims = world.dims;
    match p.kind {
        PerturbationKind::RotateObject => {
            let o = &world.objects[idx[0]];
            let (_, _, n) = o.axes(dims);
            let pivot = o.landmarks.iter().map(|&l| world.landmarks[l as usize].position).sum::<Vec3>()
                / o.landmarks.len().max(1) as f64;
            let pivot = if o.landmarks.is_empty() { o.center } else { pivot };
            let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(n), p.magnitude.to_radians());
            rigid_apply(&mut out, idx[0], r.matrix(), &pivot, &Vec3::zeros());
            out.objects[idx[0]].angle += p.magnitude.to_radians();
        }
        PerturbationKind::TranslateObject => {
            let (_, u, _, _, _) = world.objects[idx[0]].wall.frame(dims);
            rigid_apply(&mut out, idx[0], &Mat3::identity(), &Vec3::zeros(), &(u * p.magnitude));
        }
        PerturbationKind::RemoveObject => {
            let gone = out.objects.remove(idx[0]);
            out.landmarks.retain(|l| l.object != Some(gone.id));
        }
        PerturbationKind::SwapObjects => {
            let (a, b) = (&world.objects[idx[0]], &world.objects[idx[1]]);
            let basis = |o: &WorldObject| {
                let (_, u, v, n, _) = o.wall.frame(dims);
                Mat3::from_columns(&[u, v, n])
            };
            let (ba, bb) = (basis(a), basis(b));
            let (ca, cb) = (a.center, b.center);
            let (wa, wb) = (a.wall, b.wall);
            // a → b's frame, b → a's frame
            rigid_apply(&mut out, idx[0], &(bb * ba.transpose()), &ca, &(cb - ca));
            rigid_apply(&mut out, idx[1], &(ba * bb.transpose()), &cb, &(ca - cb));
            out.objects[idx[0]].wall = wb;
            out.objects[idx[1]].wall = wa;
        }
    }
    Ok(out)
}

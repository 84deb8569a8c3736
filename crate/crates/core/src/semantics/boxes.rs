use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassId, ClassRegistry, SemanticsError};
use crate::features::{Keypoint, Mask};

pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub class: ClassId,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub confidence: f64,
}

impl BoundingBox {
    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    /// Inclusive of edges.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    /// Clamps to the pixel grid `[0, w-1] × [0, h-1]`; `None` if nothing of
    /// positive area remains.
    pub fn clamped(&self, width: u32, height: u32) -> Option<Self> {
        let (wm, hm) = ((width.max(1) - 1) as f64, (height.max(1) - 1) as f64);
        let b = Self {
            x_min: self.x_min.clamp(0.0, wm),
            y_min: self.y_min.clamp(0.0, hm),
            x_max: self.x_max.clamp(0.0, wm),
            y_max: self.y_max.clamp(0.0, hm),
            ..*self
        };
        (b.x_max > b.x_min && b.y_max > b.y_min).then_some(b)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionSet {
    pub frame: u64,
    pub boxes: Vec<BoundingBox>,
    /// Boxes discarded because nothing was left after clamping.
    #[serde(default)]
    pub dropped_zero_area: usize,
    #[serde(default)]
    pub dropped_low_confidence: usize,
}

#[derive(Serialize, Deserialize)]
struct RawBox {
    class: String,
    #[serde(rename = "box")]
    bbox: [f64; 4],
    confidence: f64,
}

#[derive(Serialize, Deserialize)]
struct RawSet {
    frame: u64,
    boxes: Vec<RawBox>,
}

impl DetectionSet {
    /// Annotation-file form (class names instead of ids).
    pub fn to_annotation_json(&self, registry: &ClassRegistry) -> String {
        let raw = RawSet {
            frame: self.frame,
            boxes: self
                .boxes
                .iter()
                .map(|b| RawBox {
                    class: registry.name(b.class).unwrap_or("unknown").to_string(),
                    bbox: [b.x_min, b.y_min, b.x_max, b.y_max],
                    confidence: b.confidence,
                })
                .collect(),
        };
        serde_json::to_string(&raw).expect("annotation serialization")
    }
}

/// Parses one annotation document, clamps boxes to the image and drops
/// boxes below `min_confidence` or without area after clamping.
pub fn parse_detections(
    text: &str,
    registry: &ClassRegistry,
    width: u32,
    height: u32,
    min_confidence: f64,
) -> Result<DetectionSet, SemanticsError> {
    let raw: RawSet = serde_json::from_str(text)?;
    let mut out = DetectionSet {
        frame: raw.frame,
        ..Default::default()
    };
    for (index, rb) in raw.boxes.into_iter().enumerate() {
        let class = registry
            .by_name(&rb.class)
            .ok_or_else(|| SemanticsError::UnknownClass(rb.class.clone()))?;
        let [x_min, y_min, x_max, y_max] = rb.bbox;
        let invalid = |reason: &str| SemanticsError::InvalidBox {
            index,
            reason: reason.to_string(),
        };
        if rb.bbox.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite coordinate"));
        }
        if x_min > x_max {
            return Err(invalid("x_min > x_max"));
        }
        if y_min > y_max {
            return Err(invalid("y_min > y_max"));
        }
        if !(0.0..=1.0).contains(&rb.confidence) {
            return Err(invalid("confidence outside [0, 1]"));
        }
        if rb.confidence < min_confidence {
            out.dropped_low_confidence += 1;
            continue;
        }
        let b = BoundingBox {
            class,
            x_min,
            y_min,
            x_max,
            y_max,
            confidence: rb.confidence,
        };
        match b.clamped(width, height) {
            Some(b) => out.boxes.push(b),
            None => out.dropped_zero_area += 1,
        }
    }
    if out.dropped_zero_area > 0 {
        log::warn!(
            "frame {}: dropped {} zero-area boxes after clamping",
            out.frame,
            out.dropped_zero_area
        );
    }
    Ok(out)
}

pub fn load_detections(
    path: impl AsRef<Path>,
    registry: &ClassRegistry,
    width: u32,
    height: u32,
    min_confidence: f64,
) -> Result<DetectionSet, SemanticsError> {
    parse_detections(
        &std::fs::read_to_string(path)?,
        registry,
        width,
        height,
        min_confidence,
    )
}

/// True on every pixel whose centre lies in (or on the edge of) a box,
/// optionally restricted to one class.
pub fn build_mask(width: u32, height: u32, boxes: &[BoundingBox], class: Option<ClassId>) -> Mask {
    let mut mask = Mask::new(width, height, false);
    for b in boxes.iter().filter(|b| class.is_none_or(|c| b.class == c)) {
        let x0 = b.x_min.ceil().max(0.0) as u32;
        let y0 = b.y_min.ceil().max(0.0) as u32;
        let x1 = b.x_max.floor().min(width as f64 - 1.0);
        let y1 = b.y_max.floor().min(height as f64 - 1.0);
        if x1 < 0.0 || y1 < 0.0 {
            continue;
        }
        for y in y0..=y1 as u32 {
            for x in x0..=x1 as u32 {
                mask.set(x, y, true);
            }
        }
    }
    mask
}

/// Class of each point: the containing box with the smallest area wins,
/// then the highest confidence, then the lowest class id. Points are
/// snapped to their pixel so labels agree with [`build_mask`].
pub fn label_points<I>(points: I, boxes: &[BoundingBox]) -> Vec<Option<ClassId>>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    points
        .into_iter()
        .map(|(x, y)| {
            let (px, py) = (x.round(), y.round());
            boxes
                .iter()
                .filter(|b| b.contains(px, py))
                .min_by(|a, b| {
                    a.area()
                        .total_cmp(&b.area())
                        .then(b.confidence.total_cmp(&a.confidence))
                        .then(a.class.cmp(&b.class))
                })
                .map(|b| b.class)
        })
        .collect()
}

pub fn label_keypoints(keypoints: &[Keypoint], boxes: &[BoundingBox]) -> Vec<Option<ClassId>> {
    label_points(keypoints.iter().map(|k| (k.x, k.y)), boxes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg() -> ClassRegistry {
        ClassRegistry::station()
    }

    fn bx(class: ClassId, r: [f64; 4], confidence: f64) -> BoundingBox {
        BoundingBox {
            class,
            x_min: r[0],
            y_min: r[1],
            x_max: r[2],
            y_max: r[3],
            confidence,
        }
    }

    #[test]
    fn loads_one_vent() {
        let s = r#"{"frame": 3, "boxes": [{"class": "vent", "box": [10, 10, 50, 40], "confidence": 0.9}]}"#;
        let d = parse_detections(s, &reg(), 640, 480, 0.5).unwrap();
        assert_eq!(d.frame, 3);
        assert_eq!(d.boxes, vec![bx(0, [10.0, 10.0, 50.0, 40.0], 0.9)]);
    }

    #[test]
    fn empty_list_is_valid() {
        let d = parse_detections(r#"{"frame": 0, "boxes": []}"#, &reg(), 64, 64, 0.5).unwrap();
        assert!(d.boxes.is_empty());
    }

    #[test]
    fn inverted_box_is_an_error() {
        let s = r#"{"frame": 0, "boxes": [{"class": "vent", "box": [50, 10, 10, 40], "confidence": 0.9}]}"#;
        let e = parse_detections(s, &reg(), 64, 64, 0.5).unwrap_err();
        assert!(matches!(e, SemanticsError::InvalidBox { index: 0, .. }), "{e}");
    }

    #[test]
    fn unknown_class_and_malformed_input() {
        let s = r#"{"frame": 0, "boxes": [{"class": "flag", "box": [1, 1, 5, 5], "confidence": 0.9}]}"#;
        assert!(matches!(
            parse_detections(s, &reg(), 64, 64, 0.5),
            Err(SemanticsError::UnknownClass(_))
        ));
        let e = parse_detections("{\"frame\": 0,\n \"boxes\": [{\"class\": 3}]}", &reg(), 64, 64, 0.5)
            .unwrap_err();
        assert!(matches!(e, SemanticsError::Parse { line: 2, .. }), "{e}");
    }

    #[test]
    fn clamping_and_confidence_filter() {
        let s = r#"{"frame": 1, "boxes": [
            {"class": "light", "box": [-20, -5, 30, 700], "confidence": 0.8},
            {"class": "light", "box": [700, 10, 900, 20], "confidence": 0.8},
            {"class": "rack", "box": [1, 1, 5, 5], "confidence": 0.3}]}"#;
        let d = parse_detections(s, &reg(), 640, 480, 0.5).unwrap();
        assert_eq!(d.boxes, vec![bx(1, [0.0, 0.0, 30.0, 479.0], 0.8)]);
        assert_eq!(d.dropped_zero_area, 1);
        assert_eq!(d.dropped_low_confidence, 1);
    }

    #[test]
    fn annotation_json_round_trip() {
        let d = DetectionSet {
            frame: 9,
            boxes: vec![bx(2, [1.0, 2.0, 30.5, 40.0], 1.0)],
            ..Default::default()
        };
        let back = parse_detections(&d.to_annotation_json(&reg()), &reg(), 640, 480, 0.5).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn masks_for_trivial_cases() {
        assert!(!build_mask(20, 10, &[], None).any());
        let full = build_mask(20, 10, &[bx(0, [0.0, 0.0, 19.0, 9.0], 1.0)], None);
        assert_eq!(full.count(), 200);
        let only_light = build_mask(20, 10, &[bx(0, [0.0, 0.0, 19.0, 9.0], 1.0)], Some(1));
        assert!(!only_light.any());
    }

    #[test]
    fn labels_follow_smallest_area() {
        let rack = bx(3, [0.0, 0.0, 100.0, 100.0], 0.9);
        let handrail = bx(2, [40.0, 40.0, 60.0, 50.0], 0.6);
        let kp = |x, y| Keypoint { x, y, response: 1.0, scale: 8.0 };
        let labels = label_keypoints(&[kp(50.0, 45.0), kp(10.0, 10.0), kp(150.0, 10.0)], &[rack, handrail]);
        assert_eq!(labels, vec![Some(2), Some(3), None]);
    }

    #[test]
    fn label_ties_break_on_confidence_then_id() {
        let a = bx(5, [0.0, 0.0, 10.0, 10.0], 0.7);
        let b = bx(4, [0.0, 0.0, 10.0, 10.0], 0.9);
        assert_eq!(label_points([(5.0, 5.0)], &[a, b]), vec![Some(4)]);
        let c = bx(6, [0.0, 0.0, 10.0, 10.0], 0.9);
        assert_eq!(label_points([(5.0, 5.0)], &[c, b]), vec![Some(4)]);
    }
}

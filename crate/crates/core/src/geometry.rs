//! Axis-aligned boxes in normalised image coordinates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoxError {
    #[error("box has non-positive extent (w = {w}, h = {h})")]
    Degenerate { w: f64, h: f64 },
    #[error("box has non-finite coordinates")]
    NonFinite,
    #[error("image dimensions must be positive, got {w}x{h}")]
    BadImage { w: f64, h: f64 },
}

/// Center-size box `(cx, cy, w, h)` in normalised image coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, BoxError> {
        if ![cx, cy, w, h].iter().all(|v| v.is_finite()) {
            return Err(BoxError::NonFinite);
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(BoxError::Degenerate { w, h });
        }
        Ok(Self { cx, cy, w, h })
    }

    /// From corner form `(x1, y1, x2, y2)`.
    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, BoxError> {
        Self::new((x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1)
    }

    /// From pixel corners, normalised by the image size.
    pub fn from_pixel_corners(corners: [f64; 4], image_w: f64, image_h: f64) -> Result<Self, BoxError> {
        if !(image_w > 0.0 && image_h > 0.0) {
            return Err(BoxError::BadImage { w: image_w, h: image_h });
        }
        let [x1, y1, x2, y2] = corners;
        Self::from_corners(x1 / image_w, y1 / image_h, x2 / image_w, y2 / image_h)
    }

    /// `(x1, y1, x2, y2)`.
    pub fn corners(&self) -> [f64; 4] {
        let (hw, hh) = (self.w / 2.0, self.h / 2.0);
        [self.cx - hw, self.cy - hh, self.cx + hw, self.cy + hh]
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.cx, self.cy, self.w, self.h]
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self { cx: self.cx + dx, cy: self.cy + dy, ..*self }
    }

    /// L1 distance between the center-size parameter vectors.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.to_array().iter().zip(other.to_array()).map(|(a, b)| (a - b).abs()).sum()
    }
}

fn intersection_and_hull(a: &BBox, b: &BBox) -> (f64, f64) {
    let [ax1, ay1, ax2, ay2] = a.corners();
    let [bx1, by1, bx2, by2] = b.corners();
    let iw = (ax2.min(bx2) - ax1.max(bx1)).max(0.0);
    let ih = (ay2.min(by2) - ay1.max(by1)).max(0.0);
    let hw = ax2.max(bx2) - ax1.min(bx1);
    let hh = ay2.max(by2) - ay1.min(by1);
    (iw * ih, hw * hh)
}

/// Intersection over union, in `[0, 1]`.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let (inter, _) = intersection_and_hull(a, b);
    let union = a.area() + b.area() - inter;
    inter / union
}

/// Generalised IoU: `IoU - (hull - union) / hull`, in `(-1, 1]`.
pub fn giou(a: &BBox, b: &BBox) -> f64 {
    let (inter, hull) = intersection_and_hull(a, b);
    let union = a.area() + b.area() - inter;
    inter / union - (hull - union) / hull
}

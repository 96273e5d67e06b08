//! Center-anchored 2D affine maps.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Rotation, anisotropic scale and translation about the image center:
/// `p' = R(θ)·diag(sx, sy)·(p − c) + c + t`.
///
/// Translations are in pixels of the image the transform is applied to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform2D {
    pub theta_deg: f64,
    pub sx: f64,
    pub sy: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Default for AffineTransform2D {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl AffineTransform2D {
    pub const IDENTITY: Self = Self {
        theta_deg: 0.0,
        sx: 1.0,
        sy: 1.0,
        tx: 0.0,
        ty: 0.0,
    };

    pub fn new(theta_deg: f64, sx: f64, sy: f64, tx: f64, ty: f64) -> Self {
        Self {
            theta_deg,
            sx,
            sy,
            tx,
            ty,
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self {
            tx,
            ty,
            ..Self::IDENTITY
        }
    }

    pub fn is_valid(&self) -> bool {
        self.sx > 0.0
            && self.sy > 0.0
            && [self.theta_deg, self.sx, self.sy, self.tx, self.ty]
                .iter()
                .all(|v| v.is_finite())
    }

    pub fn to_affine(&self) -> CenteredAffine {
        let (s, c) = self.theta_deg.to_radians().sin_cos();
        CenteredAffine {
            m: [[c * self.sx, -s * self.sy], [s * self.sx, c * self.sy]],
            t: [self.tx, self.ty],
        }
    }

    /// Inverse as a general affine map (it carries shear when `sx ≠ sy`).
    pub fn inverse(&self) -> Result<CenteredAffine> {
        self.to_affine().inverse()
    }
}

/// General affine map about the image center: `p' = M·(p − c) + c + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenteredAffine {
    pub m: [[f64; 2]; 2],
    pub t: [f64; 2],
}

impl From<AffineTransform2D> for CenteredAffine {
    fn from(t: AffineTransform2D) -> Self {
        t.to_affine()
    }
}

impl From<&AffineTransform2D> for CenteredAffine {
    fn from(t: &AffineTransform2D) -> Self {
        t.to_affine()
    }
}

impl CenteredAffine {
    pub const IDENTITY: Self = Self {
        m: [[1.0, 0.0], [0.0, 1.0]],
        t: [0.0, 0.0],
    };

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        if !det.is_finite() || det.abs() < 1e-12 {
            return Err(Error::NonInvertible);
        }
        let [[a, b], [c, d]] = self.m;
        let mi = [[d / det, -b / det], [-c / det, a / det]];
        let t = [
            -(mi[0][0] * self.t[0] + mi[0][1] * self.t[1]),
            -(mi[1][0] * self.t[0] + mi[1][1] * self.t[1]),
        ];
        Ok(Self { m: mi, t })
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &CenteredAffine) -> Self {
        let a = self.m;
        let b = other.m;
        let m = [
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ];
        let t = [
            a[0][0] * other.t[0] + a[0][1] * other.t[1] + self.t[0],
            a[1][0] * other.t[0] + a[1][1] * other.t[1] + self.t[1],
        ];
        Self { m, t }
    }

    /// Maps a point given the center `c`.
    #[inline]
    pub fn apply(&self, c: (f64, f64), p: (f64, f64)) -> (f64, f64) {
        let dx = p.0 - c.0;
        let dy = p.1 - c.1;
        (
            self.m[0][0] * dx + self.m[0][1] * dy + c.0 + self.t[0],
            self.m[1][0] * dx + self.m[1][1] * dy + c.1 + self.t[1],
        )
    }

    /// Same map expressed on an image resampled by `factor`.
    pub fn rescaled(&self, factor: f64) -> Self {
        Self {
            m: self.m,
            t: [self.t[0] * factor, self.t[1] * factor],
        }
    }

    /// Rotation/scale/translation parameters, when the linear part has no
    /// shear (orthogonal columns) and positive determinant.
    pub fn decompose(&self) -> Option<AffineTransform2D> {
        let [[a, b], [c, d]] = self.m;
        let sx = (a * a + c * c).sqrt();
        let sy = (b * b + d * d).sqrt();
        if sx == 0.0 || sy == 0.0 || self.det() <= 0.0 {
            return None;
        }
        let cos_between = (a * b + c * d) / (sx * sy);
        if cos_between.abs() > 1e-6 {
            return None;
        }
        Some(AffineTransform2D {
            theta_deg: c.atan2(a).to_degrees(),
            sx,
            sy,
            tx: self.t[0],
            ty: self.t[1],
        })
    }
}

/// Center of a `w × h` image in pixel coordinates.
#[inline]
pub fn image_center(w: usize, h: usize) -> (f64, f64) {
    ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: (f64, f64), b: (f64, f64)) -> bool {
        (a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9
    }

    #[test]
    fn inverse_round_trips_points() {
        let t = AffineTransform2D::new(12.0, 1.1, 0.9, 14.0, -7.0).to_affine();
        let inv = t.inverse().unwrap();
        let c = (50.0, 40.0);
        for p in [(0.0, 0.0), (10.0, 90.0), (77.0, 3.5)] {
            assert!(close(inv.apply(c, t.apply(c, p)), p));
        }
        let id = t.compose(&inv);
        assert!(close(id.apply(c, (5.0, 6.0)), (5.0, 6.0)));
    }

    #[test]
    fn center_is_fixed_without_translation() {
        let t = AffineTransform2D::new(33.0, 1.3, 0.7, 0.0, 0.0).to_affine();
        let c = image_center(101, 61);
        assert!(close(t.apply(c, c), c));
    }

    #[test]
    fn decompose_recovers_parameters() {
        let t = AffineTransform2D::new(-8.0, 1.05, 0.95, 3.0, 4.0);
        let d = t.to_affine().decompose().unwrap();
        assert!((d.theta_deg + 8.0).abs() < 1e-9);
        assert!((d.sx - 1.05).abs() < 1e-12 && (d.sy - 0.95).abs() < 1e-12);
        let iso = AffineTransform2D::new(5.0, 1.05, 1.05, 20.0, -10.0);
        let inv = iso.inverse().unwrap().decompose().unwrap();
        assert!((inv.theta_deg + 5.0).abs() < 1e-9);
        assert!((inv.sx - 1.0 / 1.05).abs() < 1e-12);
    }

    #[test]
    fn singular_is_not_invertible() {
        let m = CenteredAffine {
            m: [[1.0, 2.0], [2.0, 4.0]],
            t: [0.0, 0.0],
        };
        assert!(matches!(m.inverse(), Err(Error::NonInvertible)));
    }
}

use super::{GeometryError, Point, UnitVec2, Vec2};

/// Eigenvalue ratio below which a point cloud is reported as isotropic.
pub const ISOTROPY_RATIO: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalAxis {
    /// Unit eigenvector of the larger covariance eigenvalue, signed so that
    /// `x >= 0` (and `y >= 0` when `x == 0`).
    pub direction: UnitVec2,
    /// Covariance eigenvalues, larger first.
    pub eigenvalues: [f64; 2],
    pub centroid: Point,
}

impl PrincipalAxis {
    /// True when the two eigenvalues are within [`ISOTROPY_RATIO`] of each
    /// other; the direction is then poorly determined.
    pub fn is_isotropic(&self) -> bool {
        let [major, minor] = self.eigenvalues;
        minor > 0.0 && major / minor < ISOTROPY_RATIO
    }
}

/// First principal component of a 2D point set.
pub fn principal_direction(points: &[Point]) -> Result<PrincipalAxis, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::Empty);
    }
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vec2::ZERO, |acc, &p| acc + p) * (1.0 / n);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &p in points {
        let d = p - centroid;
        sxx += d.x * d.x;
        syy += d.y * d.y;
        sxy += d.x * d.y;
    }
    sxx /= n;
    syy /= n;
    sxy /= n;

    let mean = (sxx + syy) / 2.0;
    let radius = ((sxx - syy) / 2.0).hypot(sxy);
    let (major, minor) = (mean + radius, (mean - radius).max(0.0));
    if major.is_nan() || major <= 0.0 {
        return Err(GeometryError::Degenerate);
    }

    // Two algebraically equivalent eigenvector forms; take the better
    // conditioned one.
    let a = Vec2::new(major - syy, sxy);
    let b = Vec2::new(sxy, major - sxx);
    let raw = if a.norm_squared() >= b.norm_squared() {
        a
    } else {
        b
    };
    let raw = if raw.norm_squared() == 0.0 {
        if sxx >= syy {
            Vec2::new(1.0, 0.0)
        } else {
            Vec2::new(0.0, 1.0)
        }
    } else {
        raw
    };

    let mut direction = UnitVec2::new(raw)?;
    if direction.x() < 0.0 || (direction.x() == 0.0 && direction.y() < 0.0) {
        direction = direction.flipped();
    }
    Ok(PrincipalAxis {
        direction,
        eigenvalues: [major, minor],
        centroid,
    })
}

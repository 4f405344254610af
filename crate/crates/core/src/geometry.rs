//! Radio placement and the guide-separation geometry.
//!
//! Coordinates are meters relative to the guide (radio 0) at the origin. The
//! beam points along +x and followers occupy the half-plane x < 0. All
//! placements produced here lie in the z = 0 plane; the third coordinate is
//! kept so channel code does not need to special-case 2D.

use std::ops::{Add, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("mismatch tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("deployment dimension `{name}` must be finite and non-negative, got {value}")]
    InvalidDimension { name: &'static str, value: f64 },
    #[error("deployment needs at least one follower")]
    NoFollowers,
    #[error("localization error range must be finite and non-negative, got {0}")]
    InvalidErrorRange(f64),
}

/// A point in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3 {
    pub const ORIGIN: Position3 = Position3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn planar(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance(&self, other: &Position3) -> f64 {
        (*self - *other).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Point at `radius` meters from the origin along azimuth `angle` (rad) in the z = 0 plane.
    pub fn on_circle(radius: f64, angle: f64) -> Self {
        Self::planar(radius * angle.cos(), radius * angle.sin())
    }
}

impl Sub for Position3 {
    type Output = Position3;
    fn sub(self, rhs: Position3) -> Position3 {
        Position3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Add for Position3 {
    type Output = Position3;
    fn add(self, rhs: Position3) -> Position3 {
        Position3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

/// Follower deployment rectangle `[-dx - lx, -dx] x [-ly/2, ly/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeploymentSpec {
    pub lx: f64,
    pub ly: f64,
    pub dx: f64,
    pub n_followers: usize,
}

impl DeploymentSpec {
    pub fn new(lx: f64, ly: f64, dx: f64, n_followers: usize) -> Result<Self, GeometryError> {
        for (name, value) in [("lx", lx), ("ly", ly), ("dx", dx)] {
            if !value.is_finite() || value < 0.0 {
                return Err(GeometryError::InvalidDimension { name, value });
            }
        }
        if n_followers == 0 {
            return Err(GeometryError::NoFollowers);
        }
        Ok(Self {
            lx,
            ly,
            dx,
            n_followers,
        })
    }

    /// Whether `p` lies inside the deployment rectangle (closed, z ignored).
    pub fn contains(&self, p: &Position3) -> bool {
        p.x <= -self.dx && p.x >= -self.dx - self.lx && p.y.abs() <= self.ly / 2.0
    }
}

/// Positions of one guided deployment: the guide, its followers and the destination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub guide: Position3,
    pub followers: Vec<Position3>,
    pub destination: Position3,
}

impl Placement {
    pub fn n_radios(&self) -> usize {
        self.followers.len() + 1
    }

    /// All beamforming radios, guide first.
    pub fn radios(&self) -> impl Iterator<Item = &Position3> + '_ {
        std::iter::once(&self.guide).chain(self.followers.iter())
    }

    pub fn with_destination(mut self, destination: Position3) -> Self {
        self.destination = destination;
        self
    }

    /// Largest distance between any two beamforming radios.
    pub fn extent(&self) -> f64 {
        let radios: Vec<&Position3> = self.radios().collect();
        let mut best = 0.0_f64;
        for (i, a) in radios.iter().enumerate() {
            for b in &radios[i + 1..] {
                best = best.max(a.distance(b));
            }
        }
        best
    }

    /// Mean distance from the radios to the destination.
    pub fn mean_destination_distance(&self) -> f64 {
        let n = self.n_radios() as f64;
        self.radios().map(|p| p.distance(&self.destination)).sum::<f64>() / n
    }
}

/// Worst-case path mismatch of a deployment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MismatchBound {
    /// Upper bound on the path mismatch, meters.
    pub e_max: f64,
    /// Matching phase bound `2π e_max / λ`, radians.
    pub phi_max: f64,
}

impl MismatchBound {
    pub fn within(&self, delta: f64) -> bool {
        self.e_max <= delta
    }
}

/// Minimum guide separation keeping every follower's path mismatch below `delta`.
///
/// Evaluates `((ly/2)^2 - delta^2) / (2 delta)` and clamps negative values to
/// zero: when `ly/2 < delta` any separation already meets the tolerance.
pub fn separation_bound(ly: f64, delta: f64) -> Result<f64, GeometryError> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(GeometryError::InvalidTolerance(delta));
    }
    if !ly.is_finite() || ly < 0.0 {
        return Err(GeometryError::InvalidDimension {
            name: "ly",
            value: ly,
        });
    }
    let half = ly / 2.0;
    Ok(((half * half - delta * delta) / (2.0 * delta)).max(0.0))
}

/// Far-field path mismatch between follower `p` and the guide at the origin.
///
/// This is the guide distance minus the follower's lag behind the guide along
/// the beam axis, `|p| + p.x`. A follower exactly on the negative x-axis has
/// zero mismatch.
pub fn path_mismatch(p: &Position3) -> f64 {
    let d = p.norm();
    // |p| + p.x loses precision when p sits on the axis; rewrite as y^2+z^2 over |p| - p.x.
    let transverse = p.y * p.y + p.z * p.z;
    if p.x < 0.0 {
        if transverse == 0.0 {
            0.0
        } else {
            transverse / (d - p.x)
        }
    } else {
        d + p.x
    }
}

/// Worst-case mismatch `sqrt(dx^2 + (ly/2)^2) - dx` at the rectangle's near corner.
pub fn worst_case_mismatch(spec: &DeploymentSpec, wavelength: f64) -> MismatchBound {
    let half = spec.ly / 2.0;
    let e_max = if half == 0.0 {
        0.0
    } else {
        half * half / ((spec.dx * spec.dx + half * half).sqrt() + spec.dx)
    };
    MismatchBound {
        e_max,
        phi_max: 2.0 * std::f64::consts::PI * e_max / wavelength,
    }
}

/// Draws followers i.i.d. uniform over the deployment rectangle.
pub fn sample_placement<R: Rng + ?Sized>(
    spec: &DeploymentSpec,
    destination: Position3,
    rng: &mut R,
) -> Placement {
    let followers = (0..spec.n_followers)
        .map(|_| {
            let ux: f64 = rng.random();
            let uy: f64 = rng.random();
            let x = -spec.dx - spec.lx * ux;
            let y = if spec.ly == 0.0 {
                0.0
            } else {
                spec.ly * (uy - 0.5)
            };
            Position3::planar(x, y)
        })
        .collect();
    Placement {
        guide: Position3::ORIGIN,
        followers,
        destination,
    }
}

/// Uniform per-axis localization error of width `range` meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationError {
    pub range: f64,
}

impl LocalizationError {
    pub fn new(range: f64) -> Result<Self, GeometryError> {
        if !range.is_finite() || range < 0.0 {
            return Err(GeometryError::InvalidErrorRange(range));
        }
        Ok(Self { range })
    }

    /// One planar offset with each axis uniform on `[-range/2, range/2]`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Position3 {
        let ux: f64 = rng.random();
        let uy: f64 = rng.random();
        if self.range == 0.0 {
            return Position3::ORIGIN;
        }
        Position3::planar(self.range * (ux - 0.5), self.range * (uy - 0.5))
    }
}

/// Offsets every radio by an independent localization error.
///
/// The input is where the radios believe they are; the output is where they
/// physically end up. With `perfect_guide` the guide keeps its position. The
/// guide's offset is drawn either way so both modes see identical follower
/// offsets from the same RNG state.
pub fn apply_localization_error<R: Rng + ?Sized>(
    placement: &Placement,
    err: &LocalizationError,
    perfect_guide: bool,
    rng: &mut R,
) -> Placement {
    let guide_offset = err.draw(rng);
    let guide = if perfect_guide {
        placement.guide
    } else {
        placement.guide + guide_offset
    };
    let followers = placement
        .followers
        .iter()
        .map(|p| *p + err.draw(rng))
        .collect();
    Placement {
        guide,
        followers,
        destination: placement.destination,
    }
}

//! Deterministic geometry of the UAV-mounted RIS scenario.
//!
//! Conventions:
//! - All nodes except the UAV sit on the ground plane; the UAV hovers at a
//!   fixed altitude `H` above its horizontal position.
//! - The RIS is a uniform linear array along the x axis with half-wavelength
//!   spacing, so element `m` of the steering vector toward azimuth `phi` is
//!   `exp(-j * pi * m * sin(phi))`.
//! - Azimuths are four-quadrant angles in `(-pi, pi]`.

use std::f64::consts::{PI, TAU};

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Horizontal coordinates in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position2D {
    pub x: f64,
    pub y: f64,
}

impl Position2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Position2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn dist_sq(&self, other: &Position2D) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Axis-aligned rectangle the UAV must hover in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavRegion {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl UavRegion {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let r = Self {
            x_min,
            x_max,
            y_min,
            y_max,
        };
        r.validate()?;
        Ok(r)
    }

    /// Square of side `side` centered on `center`.
    pub fn centered(center: Position2D, side: f64) -> Result<Self> {
        let h = 0.5 * side;
        Self::new(center.x - h, center.x + h, center.y - h, center.y + h)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_min > self.x_max || self.y_min > self.y_max {
            return Err(Error::Config(format!("invalid UAV region {self:?}")));
        }
        Ok(())
    }

    pub fn contains(&self, q: &Position2D) -> bool {
        (self.x_min..=self.x_max).contains(&q.x) && (self.y_min..=self.y_max).contains(&q.y)
    }

    pub fn center(&self) -> Position2D {
        Position2D::new(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }
}

/// Uniform `L`-bit phase codebook `{2*pi*i / 2^L}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseCodebook {
    bits: u32,
}

impl PhaseCodebook {
    pub fn new(bits: u32) -> Result<Self> {
        if bits == 0 || bits > 24 {
            return Err(Error::Config(format!(
                "phase resolution must be in 1..=24 bits, got {bits}"
            )));
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn levels(&self) -> usize {
        1usize << self.bits
    }

    pub fn step(&self) -> f64 {
        TAU / self.levels() as f64
    }

    pub fn phase(&self, index: usize) -> f64 {
        self.step() * (index % self.levels()) as f64
    }

    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.levels()).map(|i| self.phase(i))
    }
}

/// 3-D distance between a hovering UAV at `q` (altitude `h`) and a ground node at `w`.
pub fn distance3d(q: Position2D, w: Position2D, h: f64) -> f64 {
    (q.dist_sq(&w) + h * h).sqrt()
}

/// RIS steering vector toward azimuth `phi` for `m` elements.
pub fn steering_vector(m: usize, phi: f64) -> DVector<Complex64> {
    let step = -PI * phi.sin();
    DVector::from_iterator(
        m,
        (0..m).map(|i| {
            if i == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, step * i as f64)
            }
        }),
    )
}

/// Four-quadrant azimuth of `to - from`, in `(-pi, pi]`.
pub fn azimuth(from: Position2D, to: Position2D) -> Result<f64> {
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::DegenerateGeometry(format!(
            "azimuth undefined between coincident points {from:?}"
        )));
    }
    Ok(dy.atan2(dx))
}

/// Reduce an angle to `[0, 2*pi)`.
pub fn wrap_phase(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Circular distance between two angles, in `[0, pi]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = wrap_phase(a - b);
    d.min(TAU - d)
}

/// Nearest codebook phase under the circular metric.
///
/// Ties go to the lower index; the wraparound tie between the last entry and
/// entry 0 resolves to 0.
pub fn quantize_phase(theta: f64, codebook: &PhaseCodebook) -> f64 {
    let levels = codebook.levels();
    let pos = wrap_phase(theta) / codebook.step();
    let lower = (pos.floor() as usize).min(levels - 1);
    let frac = pos - lower as f64;
    let idx = if frac <= 0.5 { lower } else { (lower + 1) % levels };
    codebook.phase(idx)
}

/// Component-wise clamp into the region.
pub fn project_uav(q: Position2D, region: &UavRegion) -> Position2D {
    Position2D::new(
        q.x.clamp(region.x_min, region.x_max),
        q.y.clamp(region.y_min, region.y_max),
    )
}

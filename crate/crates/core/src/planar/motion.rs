use std::fmt;
use std::io::{self, Write};

use serde::Serialize;

use crate::rates::RateFunction;
use crate::{Error, Result};

/// Switching rule applied at each Poisson event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Variant {
    /// Turn to one of the two orthogonal directions.
    Standard,
    QStandard(f64),
    /// Take any of the other three directions.
    Reflecting,
    QReflecting(f64),
    /// Draw the new direction from all four. Normalized to
    /// `QReflecting(0.75)` by `MotionSpec::new`.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Standard,
    Reflecting,
}

impl Variant {
    /// `name` is one of standard, qstandard, reflecting, qreflecting,
    /// uniform; q-variants take `q`.
    pub fn parse(name: &str, q: Option<f64>) -> Result<Self> {
        let need_q = || q.ok_or_else(|| Error::Config(format!("variant `{name}` needs --q")));
        match name.to_ascii_lowercase().as_str() {
            "standard" => Ok(Variant::Standard),
            "reflecting" => Ok(Variant::Reflecting),
            "uniform" => Ok(Variant::Uniform),
            "qstandard" | "q-standard" => Ok(Variant::QStandard(need_q()?)),
            "qreflecting" | "q-reflecting" => Ok(Variant::QReflecting(need_q()?)),
            _ => Err(Error::Config(format!(
                "unknown variant `{name}` (standard, qstandard, reflecting, qreflecting, uniform)"
            ))),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Variant::Standard | Variant::QStandard(_) => Family::Standard,
            _ => Family::Reflecting,
        }
    }

    /// Probability that a Poisson event applies the switching rule.
    pub fn q(&self) -> f64 {
        match *self {
            Variant::Standard | Variant::Reflecting => 1.0,
            Variant::QStandard(q) | Variant::QReflecting(q) => q,
            Variant::Uniform => 0.75,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Standard => write!(f, "standard"),
            Variant::QStandard(q) => write!(f, "qstandard({q})"),
            Variant::Reflecting => write!(f, "reflecting"),
            Variant::QReflecting(q) => write!(f, "qreflecting({q})"),
            Variant::Uniform => write!(f, "uniform"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MotionSpec {
    pub variant: Variant,
    pub c_x: f64,
    pub c_y: f64,
    pub rate: RateFunction,
}

impl MotionSpec {
    pub fn new(variant: Variant, c_x: f64, c_y: f64, rate: RateFunction) -> Result<Self> {
        let variant = match variant {
            Variant::Uniform => Variant::QReflecting(0.75),
            v => v,
        };
        if let Variant::QStandard(q) | Variant::QReflecting(q) = variant {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::Config(format!("q must lie in (0, 1], got {q}")));
            }
        }
        for (name, c) in [("c_x", c_x), ("c_y", c_y)] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {c}")));
            }
        }
        Ok(Self {
            variant,
            c_x,
            c_y,
            rate,
        })
    }

    pub fn symmetric(variant: Variant, c: f64, rate: RateFunction) -> Result<Self> {
        Self::new(variant, c, c, rate)
    }

    pub fn family(&self) -> Family {
        self.variant.family()
    }

    /// Rate of the equivalent base motion: a q-variant with rate λ has the
    /// law of its base variant with rate qλ.
    pub fn effective_rate(&self) -> RateFunction {
        let q = self.variant.q();
        if q == 1.0 {
            self.rate.clone()
        } else {
            self.rate.scaled(q)
        }
    }

    /// Common speed when c_x = c_y.
    pub fn speed(&self) -> Result<f64> {
        if self.c_x == self.c_y {
            Ok(self.c_x)
        } else {
            Err(Error::Config(format!(
                "this law needs equal speeds, got c_x = {}, c_y = {}",
                self.c_x, self.c_y
            )))
        }
    }

    /// Same motion with unit speeds.
    pub fn unit_speed(&self) -> Self {
        Self {
            c_x: 1.0,
            c_y: 1.0,
            ..self.clone()
        }
    }
}

/// Position and current direction. Direction k points along
/// (cos kπ/2, sin kπ/2), scaled by (c_x, c_y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanarState {
    pub x: f64,
    pub y: f64,
    pub direction: u8,
}

/// Part of the closed support a point belongs to.
///
/// Vertex k is t·d_k. Side k joins vertex k and vertex k+1, i.e. it is the
/// edge in quadrant k (counted counter-clockwise from x, y > 0). The
/// horizontal diagonal is {y = 0}, the vertical one {x = 0}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Region {
    Interior,
    Side(u8),
    Vertex(u8),
    HorizontalDiagonal,
    VerticalDiagonal,
}

impl Region {
    pub fn is_diagonal(&self) -> bool {
        matches!(self, Region::HorizontalDiagonal | Region::VerticalDiagonal)
    }

    pub fn label(&self) -> String {
        match self {
            Region::Interior => "interior".into(),
            Region::Side(k) => format!("side{k}"),
            Region::Vertex(k) => format!("vertex{k}"),
            Region::HorizontalDiagonal => "hdiag".into(),
            Region::VerticalDiagonal => "vdiag".into(),
        }
    }

    /// Class from the set of directions a path has used (bit k set when
    /// direction k was taken for a positive time).
    pub fn from_directions(used: u8) -> Self {
        match used {
            0b0001 => Region::Vertex(0),
            0b0010 => Region::Vertex(1),
            0b0100 => Region::Vertex(2),
            0b1000 => Region::Vertex(3),
            0b0011 => Region::Side(0),
            0b0110 => Region::Side(1),
            0b1100 => Region::Side(2),
            0b1001 => Region::Side(3),
            0b0101 => Region::HorizontalDiagonal,
            0b1010 => Region::VerticalDiagonal,
            _ => Region::Interior,
        }
    }
}

/// The rhombus |x|/c_x + |y|/c_y ≤ t with its singular subsets.
#[derive(Debug, Clone)]
pub struct SupportRegion {
    pub t: f64,
    pub c_x: f64,
    pub c_y: f64,
}

impl SupportRegion {
    pub fn new(spec: &MotionSpec, t: f64) -> Self {
        Self {
            t,
            c_x: spec.c_x,
            c_y: spec.c_y,
        }
    }

    /// |x|/c_x + |y|/c_y
    pub fn l1_time(&self, x: f64, y: f64) -> f64 {
        x.abs() / self.c_x + y.abs() / self.c_y
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.l1_time(x, y) <= self.t * (1.0 + 1e-12)
    }

    /// Geometric classification with tolerance 1e-12·t on the border.
    /// Points outside the support are reported as `None`.
    pub fn classify(&self, x: f64, y: f64) -> Option<Region> {
        let tol = 1e-12 * self.t;
        let s = self.l1_time(x, y);
        if s > self.t + tol {
            return None;
        }
        let (ax, ay) = (x / self.c_x, y / self.c_y);
        if (s - self.t).abs() <= tol {
            if ay.abs() <= tol {
                return Some(Region::Vertex(if x > 0.0 { 0 } else { 2 }));
            }
            if ax.abs() <= tol {
                return Some(Region::Vertex(if y > 0.0 { 1 } else { 3 }));
            }
            let k = match (x > 0.0, y > 0.0) {
                (true, true) => 0,
                (false, true) => 1,
                (false, false) => 2,
                (true, false) => 3,
            };
            return Some(Region::Side(k));
        }
        if y == 0.0 {
            return Some(Region::HorizontalDiagonal);
        }
        if x == 0.0 {
            return Some(Region::VerticalDiagonal);
        }
        Some(Region::Interior)
    }
}

/// Rotated coordinates: x = c_x(u + v), y = c_y(u − v).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UVPair {
    pub u: f64,
    pub v: f64,
}

impl UVPair {
    pub fn from_xy(x: f64, y: f64, c_x: f64, c_y: f64) -> Self {
        let (a, b) = (x / c_x, y / c_y);
        Self {
            u: 0.5 * (a + b),
            v: 0.5 * (a - b),
        }
    }

    pub fn to_xy(&self, c_x: f64, c_y: f64) -> (f64, f64) {
        (c_x * (self.u + self.v), c_y * (self.u - self.v))
    }
}

/// Final state of one sampled path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Endpoint {
    pub state: PlanarState,
    pub region: Region,
    /// Poisson events on (0, t], including those that kept the direction.
    pub events: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathEvent {
    pub t: f64,
    /// Direction taken from this event on.
    pub direction: u8,
    pub x: f64,
    pub y: f64,
}

/// A full trajectory: the start at the origin, one entry per Poisson event
/// and the endpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord {
    pub horizon: f64,
    pub initial_direction: u8,
    pub events: Vec<PathEvent>,
    pub endpoint: Endpoint,
}

impl PathRecord {
    /// Rows `path_id,t_event,direction,x,y`: the start, every event and the
    /// endpoint at t.
    pub fn write_csv<W: Write>(paths: &[PathRecord], mut w: W) -> io::Result<()> {
        writeln!(w, "path_id,t_event,direction,x,y")?;
        for (id, p) in paths.iter().enumerate() {
            writeln!(w, "{id},0,{},0,0", p.initial_direction)?;
            for e in &p.events {
                writeln!(w, "{id},{},{},{},{}", e.t, e.direction, e.x, e.y)?;
            }
            let s = p.endpoint.state;
            writeln!(w, "{id},{},{},{},{}", p.horizon, s.direction, s.x, s.y)?;
        }
        Ok(())
    }
}

/// Rows `path_id,x,y,class`.
pub fn write_endpoints_csv<W: Write>(endpoints: &[Endpoint], mut w: W) -> io::Result<()> {
    writeln!(w, "path_id,x,y,class")?;
    for (id, e) in endpoints.iter().enumerate() {
        writeln!(w, "{id},{},{},{}", e.state.x, e.state.y, e.region.label())?;
    }
    Ok(())
}

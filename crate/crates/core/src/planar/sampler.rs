use rand::Rng;
use serde::Serialize;

use super::motion::{Endpoint, Family, MotionSpec, PathEvent, PathRecord, PlanarState, Region};
use crate::rates::PoissonSampler;
use crate::Result;

#[inline]
fn next_direction<R: Rng + ?Sized>(family: Family, q: f64, dir: u8, rng: &mut R) -> u8 {
    if q < 1.0 && rng.random::<f64>() >= q {
        return dir;
    }
    match family {
        Family::Standard => {
            if rng.random::<bool>() {
                (dir + 1) % 4
            } else {
                (dir + 3) % 4
            }
        }
        Family::Reflecting => (dir + 1 + rng.random_range(0..3u8)) % 4,
    }
}

/// Direct simulation of the direction process.
#[derive(Debug, Clone)]
pub struct PlanarSampler {
    spec: MotionSpec,
    t: f64,
    events: PoissonSampler,
}

impl PlanarSampler {
    pub fn new(spec: &MotionSpec, t: f64) -> Result<Self> {
        Ok(Self {
            spec: spec.clone(),
            t,
            events: PoissonSampler::new(&spec.rate, t)?,
        })
    }

    pub fn spec(&self) -> &MotionSpec {
        &self.spec
    }

    fn run<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        mut trace: Option<&mut Vec<PathEvent>>,
    ) -> Result<(u8, Endpoint)> {
        let family = self.spec.family();
        let q = self.spec.variant.q();
        let (cx, cy) = (self.spec.c_x, self.spec.c_y);
        let start: u8 = rng.random_range(0..4);
        let mut dir = start;
        // time spent in each direction; positions are exact differences of these
        let mut occ = [0.0f64; 4];
        let mut last = 0.0;
        let mut count = 0usize;
        let mut draws = Vec::new();
        // event times first so that direction draws follow in a fixed order
        self.events.for_each_event(rng, |s| draws.push(s))?;
        for &s in &draws {
            occ[dir as usize] += s - last;
            last = s;
            dir = next_direction(family, q, dir, rng);
            count += 1;
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(PathEvent {
                    t: s,
                    direction: dir,
                    x: cx * (occ[0] - occ[2]),
                    y: cy * (occ[1] - occ[3]),
                });
            }
        }
        occ[dir as usize] += self.t - last;
        let used = occ.iter().enumerate().fold(
            1u8 << dir,
            |m, (k, &o)| if o > 0.0 { m | (1 << k) } else { m },
        );
        let state = PlanarState {
            x: cx * (occ[0] - occ[2]),
            y: cy * (occ[1] - occ[3]),
            direction: dir,
        };
        Ok((
            start,
            Endpoint {
                state,
                region: Region::from_directions(used),
                events: count,
            },
        ))
    }

    pub fn endpoint<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Endpoint> {
        Ok(self.run(rng, None)?.1)
    }

    pub fn path<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PathRecord> {
        let mut events = Vec::new();
        let (start, endpoint) = self.run(rng, Some(&mut events))?;
        Ok(PathRecord {
            horizon: self.t,
            initial_direction: start,
            events,
            endpoint,
        })
    }
}

pub fn sample_planar<R: Rng + ?Sized>(
    spec: &MotionSpec,
    t: f64,
    rng: &mut R,
) -> Result<PathRecord> {
    PlanarSampler::new(spec, t)?.path(rng)
}

/// Builds the motion from one-dimensional telegraph processes in the rotated
/// coordinates u = (x/c_x + y/c_y)/2, v = (x/c_x − y/c_y)/2, each with speed ½
/// in units of the axis speeds.
///
/// Standard family: U and V are independent and reverse at independent
/// Poisson events of rate λ/2. Reflecting family: three independent streams
/// N_U, N_V, Ñ of rate λ/3; U reverses at N_U ∪ Ñ, V at N_V ∪ Ñ. q-variants
/// use the base construction with rate qλ.
#[derive(Debug, Clone)]
pub struct DecompositionSampler {
    family: Family,
    c_x: f64,
    c_y: f64,
    t: f64,
    own: PoissonSampler,
    common: Option<PoissonSampler>,
}

/// Displacement and final sign of a unit-speed ±1 process that starts with
/// `sign` and reverses at the merged, increasing event lists `a` and `b`.
fn displacement(sign: f64, a: &[f64], b: &[f64], horizon: f64) -> (f64, f64) {
    let (mut i, mut j) = (0, 0);
    let mut s = sign;
    let mut last = 0.0;
    let mut acc = 0.0;
    while i < a.len() || j < b.len() {
        let next = if j >= b.len() || (i < a.len() && a[i] < b[j]) {
            i += 1;
            a[i - 1]
        } else {
            j += 1;
            b[j - 1]
        };
        acc += s * (next - last);
        s = -s;
        last = next;
    }
    (acc + s * (horizon - last), s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UVSample {
    pub u: f64,
    pub v: f64,
    /// Signs of dU/dt and dV/dt at the end.
    pub u_sign: f64,
    pub v_sign: f64,
    pub u_switches: usize,
    pub v_switches: usize,
    pub common_switches: usize,
}

impl DecompositionSampler {
    pub fn new(spec: &MotionSpec, t: f64) -> Result<Self> {
        let rate = spec.effective_rate();
        let family = spec.family();
        let (own, common) = match family {
            Family::Standard => (PoissonSampler::new(&rate.scaled(0.5), t)?, None),
            Family::Reflecting => {
                let third = rate.scaled(1.0 / 3.0);
                (
                    PoissonSampler::new(&third, t)?,
                    Some(PoissonSampler::new(&third, t)?),
                )
            }
        };
        Ok(Self {
            family,
            c_x: spec.c_x,
            c_y: spec.c_y,
            t,
            own,
            common,
        })
    }

    pub fn uv<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<UVSample> {
        let su = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let sv = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let nu = self.own.sample(rng)?.times;
        let nv = self.own.sample(rng)?.times;
        let shared = match &self.common {
            Some(c) => c.sample(rng)?.times,
            None => Vec::new(),
        };
        let (du, u_sign) = displacement(su, &nu, &shared, self.t);
        let (dv, v_sign) = displacement(sv, &nv, &shared, self.t);
        Ok(UVSample {
            u: 0.5 * du,
            v: 0.5 * dv,
            u_sign,
            v_sign,
            u_switches: nu.len(),
            v_switches: nv.len(),
            common_switches: shared.len(),
        })
    }

    pub fn endpoint<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Endpoint> {
        let s = self.uv(rng)?;
        let u_atom = s.u_switches + s.common_switches == 0;
        let v_atom = s.v_switches + s.common_switches == 0;
        let region = if u_atom && v_atom {
            match (s.u > 0.0, s.v > 0.0) {
                (true, true) => Region::Vertex(0),
                (true, false) => Region::Vertex(1),
                (false, false) => Region::Vertex(2),
                (false, true) => Region::Vertex(3),
            }
        } else if u_atom {
            Region::Side(if s.u > 0.0 { 0 } else { 2 })
        } else if v_atom {
            Region::Side(if s.v > 0.0 { 3 } else { 1 })
        } else if self.family == Family::Reflecting && s.u_switches == 0 && s.v_switches == 0 {
            // U and V reverse together, so they coincide or are opposite
            if s.u_sign == s.v_sign {
                Region::HorizontalDiagonal
            } else {
                Region::VerticalDiagonal
            }
        } else {
            Region::Interior
        };
        let x = self.c_x * (s.u + s.v);
        let y = self.c_y * (s.u - s.v);
        let direction = match (s.u_sign > 0.0, s.v_sign > 0.0) {
            (true, true) => 0,
            (true, false) => 1,
            (false, false) => 2,
            (false, true) => 3,
        };
        Ok(Endpoint {
            state: PlanarState { x, y, direction },
            region,
            events: s.u_switches + s.v_switches + s.common_switches,
        })
    }
}

pub fn sample_planar_via_decomposition<R: Rng + ?Sized>(
    spec: &MotionSpec,
    t: f64,
    rng: &mut R,
) -> Result<PlanarState> {
    Ok(DecompositionSampler::new(spec, t)?.endpoint(rng)?.state)
}

/// Three-velocity process {−c, 0, +c} for one coordinate: its velocity is
/// ±c while the planar motion moves horizontally and 0 otherwise.
#[derive(Debug, Clone)]
pub struct MarginalSampler {
    family: Family,
    q: f64,
    c: f64,
    t: f64,
    events: PoissonSampler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginalSample {
    pub position: f64,
    pub velocity: f64,
    pub events: usize,
}

impl MarginalSampler {
    pub fn new(spec: &MotionSpec, t: f64) -> Result<Self> {
        Ok(Self {
            family: spec.family(),
            q: spec.variant.q(),
            c: spec.c_x,
            t,
            events: PoissonSampler::new(&spec.rate, t)?,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MarginalSample> {
        // state: 0 → +c, 1 → 0, 2 → −c; initial law (¼, ½, ¼)
        let mut state: u8 = match rng.random_range(0..4u8) {
            0 => 0,
            2 => 2,
            _ => 1,
        };
        let mut occ = [0.0f64; 3];
        let mut last = 0.0;
        let mut times = Vec::new();
        self.events.for_each_event(rng, |s| times.push(s))?;
        for &s in &times {
            occ[state as usize] += s - last;
            last = s;
            if self.q < 1.0 && rng.random::<f64>() >= self.q {
                continue;
            }
            state = match (self.family, state) {
                (Family::Standard, 1) => {
                    if rng.random::<bool>() {
                        0
                    } else {
                        2
                    }
                }
                (Family::Standard, _) => 1,
                // from 0 each of 0, +c, −c w.p. ⅓; from ±c to 0 w.p. ⅔, to ∓c w.p. ⅓
                (Family::Reflecting, 1) => rng.random_range(0..3u8),
                (Family::Reflecting, s) => {
                    if rng.random_range(0..3u8) == 0 {
                        2 - s
                    } else {
                        1
                    }
                }
            };
        }
        occ[state as usize] += self.t - last;
        let velocity = match state {
            0 => self.c,
            1 => 0.0,
            _ => -self.c,
        };
        Ok(MarginalSample {
            position: self.c * (occ[0] - occ[2]),
            velocity,
            events: times.len(),
        })
    }
}

pub fn marginal_sampler<R: Rng + ?Sized>(spec: &MotionSpec, t: f64, rng: &mut R) -> Result<f64> {
    Ok(MarginalSampler::new(spec, t)?.sample(rng)?.position)
}

//! Time-variant path geometry.
//!
//! Places antennas and scatterers in a global frame (origin at the MT cylinder
//! center, x axis toward the MR, z up) and computes per-ray travel distances
//! in three modes:
//!
//! * [`PathModel::Exact`] - plain Euclidean segment sums over the realized
//!   3D positions. This is the reference oracle and the default engine for
//!   realizations and statistics.
//! * [`PathModel::Corrected`] - the published closed-form structure
//!   (law-of-cosines time updates plus first-order antenna-offset
//!   projections) evaluated on geometrically exact base distances and angles,
//!   with the square roots the printed brackets drop restored.
//! * [`PathModel::AsPrinted`] - the closed forms exactly as published
//!   (far-field base distances, no elevation factor in the motion cross
//!   terms), for reproduction studies. Expect O(R/D) errors and occasional
//!   negative radicands outside the small-geometry regime.
//!
//! Scatterer populations: the transmit cylinder and the ellipsoids are fixed
//! in the MT frame; receive-cylinder scatterers ride with the MR, so their
//! arrival angles are time-invariant while their departure geometry is not.

use std::ops::{Add, Mul, Sub};
use thiserror::Error;

use crate::scenario::ValidatedScenario;
use crate::SPEED_OF_LIGHT;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("tap index {l} out of range 1..={taps}")]
    TapOutOfRange { l: usize, taps: usize },
    #[error("scenario has no ground configuration")]
    MissingGround,
    #[error("ray from the focus misses the ellipsoid surface (alpha={alpha}, beta={beta})")]
    NoIntersection { alpha: f64, beta: f64 },
    #[error("degenerate zero-range direction to ({x}, {y}, {z})")]
    ZeroRange { x: f64, y: f64, z: f64 },
    #[error(
        "negative radicand {radicand:.6e} in the printed {class:?} bracket (approximation breakdown at alpha={alpha}, beta={beta}, t={t})"
    )]
    NegativeRadicand {
        class: RayClass,
        radicand: f64,
        alpha: f64,
        beta: f64,
        t: f64,
    },
    #[error("{class:?} expects {expected} angle pair(s), got {got}")]
    AngleArity {
        class: RayClass,
        expected: usize,
        got: usize,
    },
}

/// A point or vector in the global frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn unit(self) -> Self {
        let n = self.norm();
        Self::new(self.x / n, self.y / n, self.z / n)
    }

    /// Azimuth/elevation of this direction vector.
    pub fn to_angles(self) -> (f64, f64) {
        let horiz = (self.x * self.x + self.y * self.y).sqrt();
        (self.y.atan2(self.x), self.z.atan2(horiz))
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Link end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Transmit,
    Receive,
}

/// Scatterer population.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Population {
    TransmitCylinder,
    ReceiveCylinder,
    /// 1-based tap index.
    Ellipsoid(usize),
    Ground,
}

/// Ray class of one propagation path. Ellipsoid classes carry the 1-based tap
/// index of the bounce surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RayClass {
    LoS,
    SbTransmitCylinder,
    SbReceiveCylinder,
    SbEllipsoid(usize),
    DbCylinderCylinder,
    DbTransmitCylinderEllipsoid(usize),
    DbEllipsoidReceiveCylinder(usize),
    SbGround,
}

impl RayClass {
    /// Number of (alpha, beta) pairs the class consumes.
    pub fn angle_arity(&self) -> usize {
        match self {
            RayClass::LoS => 0,
            RayClass::SbTransmitCylinder
            | RayClass::SbReceiveCylinder
            | RayClass::SbEllipsoid(_)
            | RayClass::SbGround => 1,
            RayClass::DbCylinderCylinder
            | RayClass::DbTransmitCylinderEllipsoid(_)
            | RayClass::DbEllipsoidReceiveCylinder(_) => 2,
        }
    }

    /// Populations feeding this class, in path order.
    pub fn populations(&self) -> Vec<Population> {
        match self {
            RayClass::LoS => vec![],
            RayClass::SbTransmitCylinder => vec![Population::TransmitCylinder],
            RayClass::SbReceiveCylinder => vec![Population::ReceiveCylinder],
            RayClass::SbEllipsoid(l) => vec![Population::Ellipsoid(*l)],
            RayClass::SbGround => vec![Population::Ground],
            RayClass::DbCylinderCylinder => {
                vec![Population::TransmitCylinder, Population::ReceiveCylinder]
            }
            RayClass::DbTransmitCylinderEllipsoid(l) => {
                vec![Population::TransmitCylinder, Population::Ellipsoid(*l)]
            }
            RayClass::DbEllipsoidReceiveCylinder(l) => {
                vec![Population::Ellipsoid(*l), Population::ReceiveCylinder]
            }
        }
    }
}

/// Closed-form evaluation mode, see the module docs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PathModel {
    #[default]
    Exact,
    Corrected,
    AsPrinted,
}

/// Travel distances of one ray at time `t`: the per-segment components in
/// path order and their total.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLengthSet {
    pub class: RayClass,
    pub components: Vec<f64>,
    pub total: f64,
    pub t: f64,
}

/// Signed element index relative to the array center for a 1-based element
/// number `p` in an `m`-element array: `(m - 2p + 1) / 2`.
pub fn signed_index(m: usize, p: usize) -> f64 {
    (m as f64 - 2.0 * p as f64 + 1.0) / 2.0
}

/// Unit vector along an array axis oriented by azimuth `psi`, elevation `theta`.
pub fn array_axis(psi: f64, theta: f64) -> Point3 {
    Point3::new(
        theta.cos() * psi.cos(),
        theta.cos() * psi.sin(),
        theta.sin(),
    )
}

/// MR cylinder center at time `t`.
pub fn mr_center(scenario: &ValidatedScenario, t: f64) -> Point3 {
    let c = scenario.config();
    Point3::new(
        c.d + c.v_r * t * c.gamma_r.cos(),
        c.v_r * t * c.gamma_r.sin(),
        0.0,
    )
}

/// Position of antenna element `p`/`q` (1-based) at time `t`. The MT array is
/// centered at the origin; the MR array center translates with the MR.
pub fn antenna_position(side: Side, element: usize, scenario: &ValidatedScenario, t: f64) -> Point3 {
    let c = scenario.config();
    match side {
        Side::Transmit => {
            array_axis(c.psi_t, c.theta_t) * (signed_index(c.m_t, element) * c.delta_t)
        }
        Side::Receive => {
            mr_center(scenario, t)
                + array_axis(c.psi_r, c.theta_r) * (signed_index(c.m_r, element) * c.delta_r)
        }
    }
}

/// Elevation clamp for the cylinder height parameterization `z = R tan(beta)`.
const BETA_CLAMP: f64 = 0.99 * std::f64::consts::FRAC_PI_2;

/// Realize a scatterer position from its population angles at time `t`.
///
/// Cylinder angles are (azimuth, elevation) seen from the cylinder center;
/// ellipsoid angles are the departure direction from the MT focus; ground
/// scatterers sit on the specular-range circle around the MR ground point at
/// the sampled azimuth (elevation is implied by the geometry and ignored).
pub fn scatterer_position(
    population: Population,
    alpha: f64,
    beta: f64,
    scenario: &ValidatedScenario,
    t: f64,
) -> Result<Point3, GeometryError> {
    let c = scenario.config();
    match population {
        Population::TransmitCylinder => {
            let b = beta.clamp(-BETA_CLAMP, BETA_CLAMP);
            Ok(Point3::new(
                c.r_t * alpha.cos(),
                c.r_t * alpha.sin(),
                c.r_t * b.tan(),
            ))
        }
        Population::ReceiveCylinder => {
            let b = beta.clamp(-BETA_CLAMP, BETA_CLAMP);
            Ok(mr_center(scenario, t)
                + Point3::new(c.r_r * alpha.cos(), c.r_r * alpha.sin(), c.r_r * b.tan()))
        }
        Population::Ellipsoid(l) => {
            let dir = Point3::new(
                beta.cos() * alpha.cos(),
                beta.cos() * alpha.sin(),
                beta.sin(),
            );
            ray_ellipsoid_intersection(Point3::default(), dir, scenario, l)
        }
        Population::Ground => {
            let g = c.ground.ok_or(GeometryError::MissingGround)?;
            let mr = mr_center(scenario, t);
            let mr_ground = Point3::new(mr.x, mr.y, 0.0);
            let d_t = mr_ground.norm();
            let heights = g.h_t + g.h_r;
            let range = if heights > 0.0 {
                d_t * g.h_r / heights
            } else {
                // Degenerate flat case: keep the midpoint circle.
                d_t * 0.5
            };
            Ok(mr_ground + Point3::new(range * alpha.cos(), range * alpha.sin(), 0.0))
        }
    }
}

/// Outward intersection of the ray `origin + r * dir` with the tap-`l`
/// ellipsoid surface. Requires an interior origin (either focus qualifies).
pub fn ray_ellipsoid_intersection(
    origin: Point3,
    dir: Point3,
    scenario: &ValidatedScenario,
    l: usize,
) -> Result<Point3, GeometryError> {
    let c = scenario.config();
    let g = scenario
        .tap_geometry(l)
        .map_err(|_| GeometryError::TapOutOfRange {
            l,
            taps: scenario.taps(),
        })?;
    let inv = Point3::new(
        1.0 / (g.a_l * g.a_l),
        1.0 / (g.b_l * g.b_l),
        1.0 / (g.u_l * g.u_l),
    );
    let w = origin - Point3::new(c.f0, 0.0, 0.0);
    let qa = dir.x * dir.x * inv.x + dir.y * dir.y * inv.y + dir.z * dir.z * inv.z;
    let qb = 2.0 * (w.x * dir.x * inv.x + w.y * dir.y * inv.y + w.z * dir.z * inv.z);
    let qc = w.x * w.x * inv.x + w.y * w.y * inv.y + w.z * w.z * inv.z - 1.0;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        let (alpha, beta) = dir.to_angles();
        return Err(GeometryError::NoIntersection { alpha, beta });
    }
    let r = (-qb + disc.sqrt()) / (2.0 * qa);
    if r <= 0.0 {
        let (alpha, beta) = dir.to_angles();
        return Err(GeometryError::NoIntersection { alpha, beta });
    }
    Ok(origin + dir * r)
}

/// Sum of Euclidean segment lengths along an ordered polyline.
pub fn exact_path_length(points: &[Point3]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Azimuth/elevation of `scatterer` as seen from the MR center at time `t`.
pub fn arrival_angles(
    scatterer: Point3,
    scenario: &ValidatedScenario,
    t: f64,
) -> Result<(f64, f64), GeometryError> {
    let v = scatterer - mr_center(scenario, t);
    if v.norm() == 0.0 {
        return Err(GeometryError::ZeroRange {
            x: scatterer.x,
            y: scatterer.y,
            z: scatterer.z,
        });
    }
    Ok(v.to_angles())
}

/// Azimuth/elevation of `scatterer` as seen from the MT center.
pub fn departure_angles(scatterer: Point3) -> Result<(f64, f64), GeometryError> {
    if scatterer.norm() == 0.0 {
        return Err(GeometryError::ZeroRange {
            x: scatterer.x,
            y: scatterer.y,
            z: scatterer.z,
        });
    }
    Ok(scatterer.to_angles())
}

/// Geometric LoS arrival azimuth at the MR at time `t` (the direction of the
/// MT seen from the MR center).
pub fn los_arrival_azimuth(scenario: &ValidatedScenario, t: f64) -> f64 {
    let mr = mr_center(scenario, t);
    (-mr.y).atan2(-mr.x)
}

/// Antenna-pair selector for path evaluation: signed element indices relative
/// to the array centers, scaled by the configured spacings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementPair {
    pub kp: f64,
    pub kq: f64,
}

impl ElementPair {
    pub fn from_elements(scenario: &ValidatedScenario, p: usize, q: usize) -> Self {
        let c = scenario.config();
        Self {
            kp: signed_index(c.m_t, p),
            kq: signed_index(c.m_r, q),
        }
    }

    pub const CENTER: ElementPair = ElementPair { kp: 0.0, kq: 0.0 };
}

struct Frame<'a> {
    scenario: &'a ValidatedScenario,
    t: f64,
    axis_t: Point3,
    axis_r: Point3,
    mt: Point3,
    mr0: Point3,
    mr_t: Point3,
    vt: f64,
}

impl<'a> Frame<'a> {
    fn new(scenario: &'a ValidatedScenario, t: f64) -> Self {
        let c = scenario.config();
        Self {
            scenario,
            t,
            axis_t: array_axis(c.psi_t, c.theta_t),
            axis_r: array_axis(c.psi_r, c.theta_r),
            mt: Point3::default(),
            mr0: Point3::new(c.d, 0.0, 0.0),
            mr_t: mr_center(scenario, t),
            vt: c.v_r * t,
        }
    }

    fn ant_t(&self, kp: f64) -> Point3 {
        self.mt + self.axis_t * (kp * self.scenario.config().delta_t)
    }

    fn ant_r(&self, kq: f64) -> Point3 {
        self.mr_t + self.axis_r * (kq * self.scenario.config().delta_r)
    }
}

/// Evaluate the travel distances of one ray.
///
/// `angles` holds one (alpha, beta) pair per bounce in the population frame
/// used by [`scatterer_position`]; see [`RayClass::angle_arity`].
pub fn path_length(
    model: PathModel,
    class: RayClass,
    pair: ElementPair,
    angles: &[(f64, f64)],
    scenario: &ValidatedScenario,
    t: f64,
) -> Result<PathLengthSet, GeometryError> {
    if angles.len() != class.angle_arity() {
        return Err(GeometryError::AngleArity {
            class,
            expected: class.angle_arity(),
            got: angles.len(),
        });
    }
    let f = Frame::new(scenario, t);
    let components = match model {
        PathModel::Exact => exact_components(class, pair, angles, &f)?,
        PathModel::Corrected => closed_components(class, pair, angles, &f, false)?,
        PathModel::AsPrinted => closed_components(class, pair, angles, &f, true)?,
    };
    let total = components.iter().sum();
    Ok(PathLengthSet {
        class,
        components,
        total,
        t,
    })
}

fn exact_components(
    class: RayClass,
    pair: ElementPair,
    angles: &[(f64, f64)],
    f: &Frame,
) -> Result<Vec<f64>, GeometryError> {
    let sc = f.scenario;
    let at = f.ant_t(pair.kp);
    let ar = f.ant_r(pair.kq);
    Ok(match class {
        RayClass::LoS => vec![(ar - at).norm()],
        RayClass::SbTransmitCylinder
        | RayClass::SbReceiveCylinder
        | RayClass::SbEllipsoid(_) => {
            let pop = class.populations()[0];
            let s = scatterer_position(pop, angles[0].0, angles[0].1, sc, f.t)?;
            vec![(s - at).norm(), (ar - s).norm()]
        }
        RayClass::SbGround => {
            let g = sc.config().ground.ok_or(GeometryError::MissingGround)?;
            let s = scatterer_position(Population::Ground, angles[0].0, angles[0].1, sc, f.t)?;
            let et = at + Point3::new(0.0, 0.0, g.h_t);
            let er = ar + Point3::new(0.0, 0.0, g.h_r);
            vec![(s - et).norm(), (er - s).norm()]
        }
        RayClass::DbCylinderCylinder
        | RayClass::DbTransmitCylinderEllipsoid(_)
        | RayClass::DbEllipsoidReceiveCylinder(_) => {
            let pops = class.populations();
            let s1 = scatterer_position(pops[0], angles[0].0, angles[0].1, sc, f.t)?;
            let s2 = scatterer_position(pops[1], angles[1].0, angles[1].1, sc, f.t)?;
            vec![(s1 - at).norm(), (s2 - s1).norm(), (ar - s2).norm()]
        }
    })
}

/// Law-of-cosines update of a segment whose far end moves by `vt` along
/// azimuth `gamma`, given the base length `xi0` and the direction
/// (azimuth `alpha`, elevation `beta`) of the motion-relative geometry.
/// `sign` is +1 when the far end recedes along its own direction and -1 when
/// the segment is measured toward the moving end.
fn motion_update(xi0: f64, vt: f64, cos_elev: f64, cos_azim: f64, sign: f64) -> f64 {
    (xi0 * xi0 + vt * vt + sign * 2.0 * xi0 * vt * cos_elev * cos_azim).sqrt()
}

fn closed_components(
    class: RayClass,
    pair: ElementPair,
    angles: &[(f64, f64)],
    f: &Frame,
    printed: bool,
) -> Result<Vec<f64>, GeometryError> {
    let sc = f.scenario;
    let c = sc.config();
    let gamma = c.gamma_r;
    let vt = f.vt;

    // Paper offset projections, scaled by the signed element indices.
    let q_p = |alpha_r12: f64| {
        pair.kp
            * c.delta_t
            * c.theta_t.cos()
            * (c.r_r / c.d * c.psi_t.sin() * alpha_r12.sin() + c.psi_t.cos())
    };
    let q_q = |alpha_t11: f64| {
        pair.kq
            * c.delta_r
            * c.theta_r.cos()
            * (c.r_t / c.d * c.psi_r.sin() * alpha_t11.sin() - c.psi_r.cos())
    };
    let proj_t = |alpha: f64, beta: f64| {
        pair.kp * c.delta_t * f.axis_t.dot(Point3::new(
            beta.cos() * alpha.cos(),
            beta.cos() * alpha.sin(),
            beta.sin(),
        ))
    };
    let proj_r = |alpha: f64, beta: f64| {
        pair.kq * c.delta_r * f.axis_r.dot(Point3::new(
            beta.cos() * alpha.cos(),
            beta.cos() * alpha.sin(),
            beta.sin(),
        ))
    };
    // Ellipsoid transmit-side offset as printed below the ellipsoid bracket.
    let proj_ell = |alpha_t: f64| {
        pair.kp
            * c.delta_t
            * c.theta_t.cos()
            * (c.r_r / c.d * c.psi_t.sin() * alpha_t.sin() + c.psi_t.cos())
    };

    // Transmit-cylinder leg from antenna p: base radial distance minus the
    // offset projection. The printed base is R_t; the corrected base is the
    // exact center distance R_t / cos(beta).
    let t_cyl_p = |alpha: f64, beta: f64| {
        let base = if printed {
            c.r_t
        } else {
            let b = beta.clamp(-BETA_CLAMP, BETA_CLAMP);
            c.r_t / b.cos()
        };
        base - proj_t(alpha, beta)
    };
    // Receive-cylinder leg to antenna q (population rides with the MR).
    let r_cyl_q = |alpha: f64, beta: f64| {
        let base = if printed {
            c.r_r
        } else {
            let b = beta.clamp(-BETA_CLAMP, BETA_CLAMP);
            c.r_r / b.cos()
        };
        base - proj_r(alpha, beta)
    };

    Ok(match class {
        RayClass::LoS => {
            // Eq.-(9) structure: receive-side offsets do not appear.
            let d_eff = c.d - pair.kp * c.delta_t * f.axis_t.x;
            vec![motion_update(
                d_eff,
                vt,
                if printed { 1.0 } else { c.beta_r_los.cos() },
                (c.alpha_r_los - gamma).cos(),
                -1.0,
            )]
        }
        RayClass::SbTransmitCylinder => {
            let (alpha_t, beta_t) = angles[0];
            let s = scatterer_position(Population::TransmitCylinder, alpha_t, beta_t, sc, 0.0)?;
            let (alpha_r, beta_r) = (s - f.mr0).to_angles();
            let base = if printed { c.d } else { (s - f.mr0).norm() };
            let eff = base - q_q(alpha_t) * c.theta_r.cos();
            vec![
                t_cyl_p(alpha_t, beta_t),
                motion_update(
                    eff,
                    vt,
                    if printed { 1.0 } else { beta_r.cos() },
                    (alpha_r - gamma).cos(),
                    -1.0,
                ),
            ]
        }
        RayClass::SbReceiveCylinder => {
            let (alpha_r, beta_r) = angles[0];
            // Transmit-side leg to the moving scatterer.
            let p_leg = if printed {
                let eff = c.d - q_p(alpha_r) * c.theta_t.cos();
                motion_update(eff, vt, 1.0, (alpha_r - gamma).cos(), -1.0)
            } else {
                let s0 = scatterer_position(Population::ReceiveCylinder, alpha_r, beta_r, sc, 0.0)?;
                let (alpha_d, beta_d) = s0.to_angles();
                let eff = s0.norm() - q_p(alpha_r) * c.theta_t.cos();
                motion_update(eff, vt, beta_d.cos(), (alpha_d - gamma).cos(), 1.0)
            };
            vec![p_leg, r_cyl_q(alpha_r, beta_r)]
        }
        RayClass::SbEllipsoid(l) => {
            let (alpha_t, beta_t) = angles[0];
            let s = scatterer_position(Population::Ellipsoid(l), alpha_t, beta_t, sc, f.t)?;
            let p_leg = if printed {
                let g = sc.tap_geometry(l).map_err(|_| GeometryError::TapOutOfRange {
                    l,
                    taps: sc.taps(),
                })?;
                let (a2, b2, u2) = (g.a_l * g.a_l, g.b_l * g.b_l, g.u_l * g.u_l);
                let cb2 = beta_t.cos().powi(2);
                let xi_l3 = b2 * u2 * cb2 * alpha_t.cos().powi(2)
                    + a2 * u2 * cb2 * alpha_t.sin().powi(2)
                    + a2 * b2 * beta_t.sin().powi(2);
                2.0 * a2 * b2 * u2 / xi_l3 - proj_ell(alpha_t)
            } else {
                s.norm() - proj_ell(alpha_t)
            };
            let q_leg = if printed {
                let xi_p = p_leg;
                let xi_r2 = c.d * c.d + xi_p * xi_p * alpha_t.cos().powi(2)
                    - 2.0 * c.d * xi_p * beta_t.cos() * alpha_t.cos();
                if xi_r2 < 0.0 {
                    return Err(GeometryError::NegativeRadicand {
                        class,
                        radicand: xi_r2,
                        alpha: alpha_t,
                        beta: beta_t,
                        t: f.t,
                    });
                }
                let xi_r = xi_r2.sqrt();
                let (alpha_r, _) = (s - f.mr0).to_angles();
                let radicand = xi_p * xi_p * beta_t.sin().powi(2)
                    + xi_r2
                    + vt * vt
                    + 2.0 * c.d * xi_r * (gamma + alpha_r).cos();
                if radicand < 0.0 {
                    return Err(GeometryError::NegativeRadicand {
                        class,
                        radicand,
                        alpha: alpha_t,
                        beta: beta_t,
                        t: f.t,
                    });
                }
                radicand.sqrt()
            } else {
                let (alpha_r, beta_r) = (s - f.mr0).to_angles();
                motion_update(
                    (s - f.mr0).norm(),
                    vt,
                    beta_r.cos(),
                    (alpha_r - gamma).cos(),
                    -1.0,
                )
            };
            vec![p_leg, q_leg]
        }
        RayClass::SbGround => {
            // The published text gives no closed form; the specular
            // construction below is exact and shared by all modes.
            let g = c.ground.ok_or(GeometryError::MissingGround)?;
            let s = scatterer_position(Population::Ground, angles[0].0, angles[0].1, sc, f.t)?;
            let et = f.ant_t(pair.kp) + Point3::new(0.0, 0.0, g.h_t);
            let er = f.ant_r(pair.kq) + Point3::new(0.0, 0.0, g.h_r);
            vec![(s - et).norm(), (er - s).norm()]
        }
        RayClass::DbCylinderCylinder => {
            let (alpha_t, beta_t) = angles[0];
            let (alpha_r, beta_r) = angles[1];
            let mid = if printed {
                motion_update(c.d, vt, 1.0, (c.alpha_r_los - gamma).cos(), -1.0)
            } else {
                let s1 = scatterer_position(Population::TransmitCylinder, alpha_t, beta_t, sc, 0.0)?;
                let s2_0 =
                    scatterer_position(Population::ReceiveCylinder, alpha_r, beta_r, sc, 0.0)?;
                let (am, bm) = (s2_0 - s1).to_angles();
                motion_update((s2_0 - s1).norm(), vt, bm.cos(), (am - gamma).cos(), 1.0)
            };
            vec![
                t_cyl_p(alpha_t, beta_t),
                mid,
                r_cyl_q(alpha_r, beta_r),
            ]
        }
        RayClass::DbTransmitCylinderEllipsoid(l) => {
            let (alpha_t, beta_t) = angles[0];
            let (alpha_e, beta_e) = angles[1];
            let s1 = scatterer_position(Population::TransmitCylinder, alpha_t, beta_t, sc, 0.0)?;
            let s2 = scatterer_position(Population::Ellipsoid(l), alpha_e, beta_e, sc, f.t)?;
            // No printed form for the cylinder-to-ellipsoid hop; both closed
            // modes use the exact static distance.
            let mid = (s2 - s1).norm();
            let q_leg = if printed {
                let ell = closed_components(RayClass::SbEllipsoid(l), pair, &[angles[1]], f, true)?;
                ell[1]
            } else {
                let (alpha_r, beta_r) = (s2 - f.mr0).to_angles();
                motion_update(
                    (s2 - f.mr0).norm(),
                    vt,
                    beta_r.cos(),
                    (alpha_r - gamma).cos(),
                    -1.0,
                )
            };
            vec![t_cyl_p(alpha_t, beta_t), mid, q_leg]
        }
        RayClass::DbEllipsoidReceiveCylinder(l) => {
            let (alpha_e, beta_e) = angles[0];
            let (alpha_r, beta_r) = angles[1];
            let s1 = scatterer_position(Population::Ellipsoid(l), alpha_e, beta_e, sc, f.t)?;
            let p_leg = if printed {
                let ell = closed_components(RayClass::SbEllipsoid(l), pair, &[angles[0]], f, true)?;
                ell[0]
            } else {
                s1.norm() - proj_ell(alpha_e)
            };
            let mid = if printed {
                motion_update(c.d, vt, 1.0, (c.alpha_r_los - gamma).cos(), -1.0)
            } else {
                let s2_0 =
                    scatterer_position(Population::ReceiveCylinder, alpha_r, beta_r, sc, 0.0)?;
                let (am, bm) = (s2_0 - s1).to_angles();
                motion_update((s2_0 - s1).norm(), vt, bm.cos(), (am - gamma).cos(), 1.0)
            };
            vec![p_leg, mid, r_cyl_q(alpha_r, beta_r)]
        }
    })
}

/// Delay of a path total, seconds.
pub fn delay_of(total_length: f64) -> f64 {
    total_length / SPEED_OF_LIGHT
}

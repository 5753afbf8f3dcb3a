//! Planar link geometry and the Fresnel-zone forward model.
//!
//! A link is a transmitter/receiver pair. A person at `l_h` moving with
//! velocity `v` changes the reflected path length `|l_h - l_t| + |l_h - l_r|`
//! at the rate `r = a · v`, where `a` is the sum of the two unit vectors
//! pointing from the transceivers to the person. `a` is the gradient of the
//! path length, i.e. the normal of the local Fresnel ellipse.

use core::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
// Float math for no_std builds; inherent methods take over when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Speed cap for human walking, m/s.
pub const DEFAULT_V_MAX: f64 = 2.0;

/// Exclusion radius around link endpoints, meters.
pub const ENDPOINT_EPS: f64 = 1e-6;

/// 2-D vector in meters (positions) or m/s (velocities).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

/// Positions share the vector type.
pub type Point2 = Vec2;

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Unit vector at angle `theta` (radians) from +x.
    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    /// Scales the vector down so its norm does not exceed `max`.
    pub fn clamp_norm(self, max: f64) -> Self {
        let n = self.norm();
        if n > max && n > 0.0 {
            self * (max / n)
        } else {
            self
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, k: f64) -> Vec2 {
        Vec2::new(self.x / k, self.y / k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Symmetric 2x2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub fn apply(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.xx * v.x + self.xy * v.y, self.xy * v.x + self.yy * v.y)
    }
}

/// Person position and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KinematicState {
    pub position: Point2,
    pub velocity: Vec2,
}

impl KinematicState {
    pub const fn new(position: Point2, velocity: Vec2) -> Self {
        Self { position, velocity }
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }
}

/// One transmitter/receiver pair.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinkGeometry {
    pub id: usize,
    pub tx: Point2,
    pub rx: Point2,
}

/// Normal-velocity view of a PLCR value: `r = |v_n| (cos α + cos β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalDecomposition {
    /// `|v_n|`, m/s.
    pub normal_speed: f64,
    /// Unit direction of `v_n` (the ellipse normal, signed by the motion).
    pub normal: Vec2,
    /// Angle between `v_n` and the ray from the transmitter to the person.
    pub alpha: f64,
    /// Angle between `v_n` and the ray from the receiver to the person.
    pub beta: f64,
}

impl NormalDecomposition {
    /// Rebuilds the PLCR from the decomposition.
    pub fn plcr(&self) -> f64 {
        self.normal_speed * (self.alpha.cos() + self.beta.cos())
    }
}

impl LinkGeometry {
    pub fn new(id: usize, tx: Point2, rx: Point2) -> Result<Self> {
        if !(tx.is_finite() && rx.is_finite()) {
            return Err(Error::InvalidLink(alloc::format!("link {id} has non-finite endpoints")));
        }
        if tx.distance(rx) <= ENDPOINT_EPS {
            return Err(Error::InvalidLink(alloc::format!(
                "link {id} has a zero-length baseline"
            )));
        }
        Ok(Self { id, tx, rx })
    }

    /// Total reflected path length transmitter → person → receiver.
    pub fn path_length(&self, position: Point2) -> f64 {
        position.distance(self.tx) + position.distance(self.rx)
    }

    fn unit_rays(&self, position: Point2) -> Result<(Vec2, f64, Vec2, f64)> {
        let dt = position - self.tx;
        let dr = position - self.rx;
        let nt = dt.norm();
        let nr = dr.norm();
        if nt <= ENDPOINT_EPS || nr <= ENDPOINT_EPS {
            return Err(Error::DegenerateGeometry);
        }
        Ok((dt / nt, nt, dr / nr, nr))
    }

    /// Fresnel coefficients `(a_x, a_y)`, the gradient of the path length.
    pub fn fresnel_coefficients(&self, position: Point2) -> Result<Vec2> {
        let (ut, _, ur, _) = self.unit_rays(position)?;
        Ok(ut + ur)
    }

    /// Jacobian of the Fresnel coefficients with respect to position, 1/m.
    ///
    /// This is the Hessian of the path length: `Σ (I - u uᵀ) / d` over both
    /// endpoints.
    pub fn coefficient_jacobian(&self, position: Point2) -> Result<Sym2> {
        let (ut, nt, ur, nr) = self.unit_rays(position)?;
        let term = |u: Vec2, d: f64| Sym2 {
            xx: (1.0 - u.x * u.x) / d,
            xy: -u.x * u.y / d,
            yy: (1.0 - u.y * u.y) / d,
        };
        let a = term(ut, nt);
        let b = term(ur, nr);
        Ok(Sym2 {
            xx: a.xx + b.xx,
            xy: a.xy + b.xy,
            yy: a.yy + b.yy,
        })
    }

    /// Path length change rate for a moving person, m/s.
    pub fn forward_plcr(&self, state: &KinematicState) -> Result<f64> {
        let a = self.fresnel_coefficients(state.position)?;
        Ok(a.dot(state.velocity))
    }

    /// Splits the velocity into its component normal to the local Fresnel
    /// ellipse and the angles that component makes with both rays.
    pub fn decompose_normal_velocity(&self, state: &KinematicState) -> Result<NormalDecomposition> {
        let (ut, _, ur, _) = self.unit_rays(state.position)?;
        let a = ut + ur;
        let an = a.norm();
        if an <= f64::EPSILON {
            // On the line-of-sight segment every motion is tangential.
            let half_pi = core::f64::consts::FRAC_PI_2;
            return Ok(NormalDecomposition {
                normal_speed: 0.0,
                normal: Vec2::ZERO,
                alpha: half_pi,
                beta: half_pi,
            });
        }
        let n_hat = a / an;
        let s = state.velocity.dot(n_hat);
        let normal = if s < 0.0 { -n_hat } else { n_hat };
        let angle = |u: Vec2| u.dot(normal).clamp(-1.0, 1.0).acos();
        Ok(NormalDecomposition {
            normal_speed: s.abs(),
            normal,
            alpha: angle(ut),
            beta: angle(ur),
        })
    }
}

pub fn fresnel_coefficients(link: &LinkGeometry, position: Point2) -> Result<Vec2> {
    link.fresnel_coefficients(position)
}

pub fn forward_plcr(link: &LinkGeometry, state: &KinematicState) -> Result<f64> {
    link.forward_plcr(state)
}

pub fn decompose_normal_velocity(link: &LinkGeometry, state: &KinematicState) -> Result<NormalDecomposition> {
    link.decompose_normal_velocity(state)
}

/// Checks that link ids are unique.
pub fn validate_links(links: &[LinkGeometry]) -> Result<()> {
    for (i, a) in links.iter().enumerate() {
        if links[..i].iter().any(|b| b.id == a.id) {
            return Err(Error::InvalidLink(alloc::format!("duplicate link id {}", a.id)));
        }
    }
    Ok(())
}

/// Shared transmitter of the default deployment.
pub const DEFAULT_TX: Point2 = Point2::new(2.4, -2.4);

/// Receivers RX1..RX4 of the default deployment.
pub const DEFAULT_RECEIVERS: [Point2; 4] = [
    Point2::new(2.4, 2.4),
    Point2::new(0.0, -2.4),
    Point2::new(-2.4, 2.4),
    Point2::new(-2.4, -2.4),
];

/// Default layout with the first `count` receivers (1..=4).
pub fn default_layout(count: usize) -> Result<Vec<LinkGeometry>> {
    if count == 0 || count > DEFAULT_RECEIVERS.len() {
        return Err(Error::InvalidConfig(alloc::format!(
            "default layout has 1..=4 receivers, asked for {count}"
        )));
    }
    DEFAULT_RECEIVERS[..count]
        .iter()
        .enumerate()
        .map(|(id, &rx)| LinkGeometry::new(id, DEFAULT_TX, rx))
        .collect()
}

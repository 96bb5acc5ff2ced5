//! Six-dimensional motion/force vectors and rigid-body inertias, all expressed
//! in world coordinates about the world origin.

use std::ops::{Add, AddAssign, Mul, Sub};

use nalgebra::{Matrix3, Vector3};

/// Spatial velocity or acceleration: angular part and the linear velocity of
/// the body point currently at the world origin.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Motion {
    pub ang: Vector3<f64>,
    pub lin: Vector3<f64>,
}

/// Spatial force: moment about the world origin and the resultant force.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Force {
    pub ang: Vector3<f64>,
    pub lin: Vector3<f64>,
}

impl Motion {
    pub const fn new(ang: Vector3<f64>, lin: Vector3<f64>) -> Self {
        Self { ang, lin }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Rotation about the unit `axis` through `point`.
    pub fn revolute(axis: Vector3<f64>, point: Vector3<f64>) -> Self {
        Self {
            ang: axis,
            lin: point.cross(&axis),
        }
    }

    /// Motion cross product `self × m`.
    pub fn cross(&self, m: &Motion) -> Motion {
        Motion {
            ang: self.ang.cross(&m.ang),
            lin: self.ang.cross(&m.lin) + self.lin.cross(&m.ang),
        }
    }

    /// Force cross product `self ×* f`.
    pub fn cross_force(&self, f: &Force) -> Force {
        Force {
            ang: self.ang.cross(&f.ang) + self.lin.cross(&f.lin),
            lin: self.ang.cross(&f.lin),
        }
    }

    /// Power pairing with a force.
    pub fn dot(&self, f: &Force) -> f64 {
        self.ang.dot(&f.ang) + self.lin.dot(&f.lin)
    }

    /// Velocity of the world point `p` under this motion.
    pub fn point_velocity(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.lin + self.ang.cross(p)
    }
}

impl Force {
    pub fn zero() -> Self {
        Self::default()
    }

    /// A pure force `f` acting at the world point `p`.
    pub fn at_point(f: Vector3<f64>, p: &Vector3<f64>) -> Self {
        Self {
            ang: p.cross(&f),
            lin: f,
        }
    }
}

macro_rules! vector_ops {
    ($t:ty) => {
        impl Add for $t {
            type Output = $t;
            fn add(self, o: $t) -> $t {
                Self {
                    ang: self.ang + o.ang,
                    lin: self.lin + o.lin,
                }
            }
        }
        impl Sub for $t {
            type Output = $t;
            fn sub(self, o: $t) -> $t {
                Self {
                    ang: self.ang - o.ang,
                    lin: self.lin - o.lin,
                }
            }
        }
        impl AddAssign for $t {
            fn add_assign(&mut self, o: $t) {
                self.ang += o.ang;
                self.lin += o.lin;
            }
        }
        impl Mul<f64> for $t {
            type Output = $t;
            fn mul(self, s: f64) -> $t {
                Self {
                    ang: self.ang * s,
                    lin: self.lin * s,
                }
            }
        }
    };
}

vector_ops!(Motion);
vector_ops!(Force);

/// Rigid-body inertia about the world origin, stored as mass, first moment
/// `h = m·c` and rotational inertia about the origin. Sums of these are the
/// composite inertias of subtrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidInertia {
    pub mass: f64,
    pub h: Vector3<f64>,
    pub rot: Matrix3<f64>,
}

impl Default for RigidInertia {
    fn default() -> Self {
        Self {
            mass: 0.0,
            h: Vector3::zeros(),
            rot: Matrix3::zeros(),
        }
    }
}

impl RigidInertia {
    /// From mass, world center of mass and world inertia about the center.
    pub fn from_body(mass: f64, com: &Vector3<f64>, inertia_com: &Matrix3<f64>) -> Self {
        let parallel = Matrix3::identity() * com.norm_squared() - com * com.transpose();
        Self {
            mass,
            h: com * mass,
            rot: inertia_com + parallel * mass,
        }
    }

    /// Momentum of a body moving with `v`.
    pub fn apply(&self, v: &Motion) -> Force {
        Force {
            ang: self.rot * v.ang + self.h.cross(&v.lin),
            lin: v.lin * self.mass - self.h.cross(&v.ang),
        }
    }
}

impl Add for RigidInertia {
    type Output = RigidInertia;
    fn add(self, o: RigidInertia) -> RigidInertia {
        RigidInertia {
            mass: self.mass + o.mass,
            h: self.h + o.h,
            rot: self.rot + o.rot,
        }
    }
}

impl AddAssign for RigidInertia {
    fn add_assign(&mut self, o: RigidInertia) {
        self.mass += o.mass;
        self.h += o.h;
        self.rot += o.rot;
    }
}

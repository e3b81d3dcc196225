//! Pinhole camera with a single radial distortion coefficient.
//!
//! World points project as `x = K·distort(R·X + t)`; cameras look along `+z`,
//! image `y` points down and the first pixel center sits at `(0.5, 0.5)`.
//!
//! Text format: 22 whitespace-separated numbers (K row-major, R row-major,
//! t, k1); lines starting with `#` are comments.

use crate::error::{Error, Result};
use crate::math::{Mat3, Ray, Vec3};
use crate::scalar::Real;

const UNDISTORT_ITERATIONS: usize = 50;
const ROTATION_TOLERANCE: f64 = 1e-9;
const REORTHONORMALIZE_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    /// World-to-camera rotation.
    pub rotation: Mat3<T>,
    /// World-to-camera translation.
    pub translation: Vec3<T>,
    pub k1: T,
}

impl<T: Real> Camera<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T, rotation: Mat3<T>, translation: Vec3<T>, k1: T) -> Result<Self> {
        if !(fx > T::zero() && fy > T::zero()) {
            return Err(Error::invalid(format!("focal lengths must be positive, got {fx}, {fy}")));
        }
        if ![cx, cy, k1].iter().all(|v| v.is_finite()) || !translation.is_finite() || !rotation.is_finite() {
            return Err(Error::invalid("camera parameters must be finite"));
        }
        let tol = T::lit(ROTATION_TOLERANCE);
        let rotation = if rotation.orthonormality_error() > tol || (rotation.det() - T::one()).abs() > tol {
            if rotation.orthonormality_error() > T::lit(REORTHONORMALIZE_LIMIT) || rotation.det() <= T::zero() {
                return Err(Error::invalid(format!(
                    "rotation is not orthonormal (error {})",
                    rotation.orthonormality_error()
                )));
            }
            rotation
                .nearest_rotation()
                .ok_or_else(|| Error::invalid("rotation could not be re-orthonormalized"))?
        } else {
            rotation
        };
        Ok(Self { fx, fy, cx, cy, rotation, translation, k1 })
    }

    /// Camera at `eye` looking at `target`, image `y` aligned against `up`.
    pub fn look_at(eye: Vec3<T>, target: Vec3<T>, up: Vec3<T>, fx: T, fy: T, cx: T, cy: T) -> Result<Self> {
        let fwd = (target - eye).normalized();
        let right = fwd.cross(up).normalized();
        let down = fwd.cross(right);
        let rotation = Mat3::from_rows([right.to_array(), down.to_array(), fwd.to_array()]);
        let translation = -rotation.mul_vec(eye);
        Self::new(fx, fy, cx, cy, rotation, translation, T::zero())
    }

    pub fn intrinsics(&self) -> Mat3<T> {
        let (z, o) = (T::zero(), T::one());
        Mat3::from_rows([[self.fx, z, self.cx], [z, self.fy, self.cy], [z, z, o]])
    }

    /// Camera center in world coordinates, `-Rᵀt`.
    pub fn center(&self) -> Vec3<T> {
        -self.rotation.transpose().mul_vec(self.translation)
    }

    /// Projects a world point to pixel coordinates; `None` when it lies at or
    /// behind the camera plane.
    pub fn project(&self, x: Vec3<T>) -> Result<Option<[T; 2]>> {
        if !x.is_finite() {
            return Err(Error::invalid(format!("non-finite point {x:?}")));
        }
        let pc = self.rotation.mul_vec(x) + self.translation;
        if pc.z <= T::zero() {
            return Ok(None);
        }
        let (nx, ny) = (pc.x / pc.z, pc.y / pc.z);
        let s = T::one() + self.k1 * (nx * nx + ny * ny);
        Ok(Some([self.fx * nx * s + self.cx, self.fy * ny * s + self.cy]))
    }

    /// World-space ray through pixel position `(px, py)`.
    pub fn pixel_ray(&self, px: T, py: T) -> Result<Ray<T>> {
        let dx = (px - self.cx) / self.fx;
        let dy = (py - self.cy) / self.fy;
        // Newton's method on the radial map r·(1 + k1·r²) = r_d
        let rd = (dx * dx + dy * dy).sqrt();
        let three = T::lit(3.0);
        let mut r = rd;
        let mut converged = self.k1 == T::zero() || rd == T::zero();
        for _ in 0..UNDISTORT_ITERATIONS {
            if converged {
                break;
            }
            let slope = T::one() + three * self.k1 * r * r;
            if !(slope > T::zero()) {
                break;
            }
            let step = (r * (T::one() + self.k1 * r * r) - rd) / slope;
            r = r - step;
            converged = step.abs() <= T::lit(16.0) * T::epsilon() * (T::one() + r);
        }
        let r2 = r * r;
        let slope = T::one() + three * self.k1 * r2;
        if !converged || !(slope > T::zero()) || !(self.k1.abs() * r2 < T::one()) || !r.is_finite() {
            return Err(Error::invalid(format!(
                "undistortion diverged at pixel ({px}, {py}): |k1|·r² = {}",
                self.k1.abs() * r2
            )));
        }
        let s = if rd > T::zero() { r / rd } else { T::one() };
        let (nx, ny) = (dx * s, dy * s);
        let rt = self.rotation.transpose();
        let dir = rt.mul_vec(Vec3::new(nx, ny, T::one())).normalized();
        Ok(Ray::new(self.center(), dir))
    }

    pub fn to_text(&self) -> String {
        let f = |v: T| format!("{:.16e}", v.to_f64_lossy());
        let row = |vals: &[T]| vals.iter().map(|v| f(*v)).collect::<Vec<_>>().join(" ");
        let k = self.intrinsics();
        let r = &self.rotation;
        format!(
            "# K (row-major)\n{}\n{}\n{}\n# R (row-major)\n{}\n{}\n{}\n# t\n{}\n# k1\n{}\n",
            row(&k.m[0]),
            row(&k.m[1]),
            row(&k.m[2]),
            row(&r.m[0]),
            row(&r.m[1]),
            row(&r.m[2]),
            row(&self.translation.to_array()),
            f(self.k1)
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let vals = crate::io::parse_floats(text).map_err(Error::invalid)?;
        if vals.len() != 22 {
            return Err(Error::CameraTokenCount(vals.len()));
        }
        let v: Vec<T> = vals.iter().map(|x| T::lit(*x)).collect();
        let k = Mat3::from_slice(&v[0..9]);
        let z = T::zero();
        if k.m[0][1] != z || k.m[1][0] != z || k.m[2][0] != z || k.m[2][1] != z || k.m[2][2] != T::one() {
            return Err(Error::invalid("intrinsics must be upper triangular with zero skew and K[2][2] = 1"));
        }
        Self::new(
            k.m[0][0],
            k.m[1][1],
            k.m[0][2],
            k.m[1][2],
            Mat3::from_slice(&v[9..18]),
            Vec3::new(v[18], v[19], v[20]),
            v[21],
        )
    }
}

pub fn parse_camera<T: Real>(text: &str) -> Result<Camera<T>> {
    Camera::from_text(text)
}

pub fn serialize_camera<T: Real>(cam: &Camera<T>) -> String {
    cam.to_text()
}

pub fn read_camera<T: Real>(path: &std::path::Path) -> Result<Camera<T>> {
    let text = crate::io::read_text(path)?;
    Camera::from_text(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_camera<T: Real>(cam: &Camera<T>, path: &std::path::Path) -> Result<()> {
    crate::io::write_file(path, cam.to_text().as_bytes())
}

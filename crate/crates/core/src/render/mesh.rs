use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::scalar::Real;

/// Indexed triangle mesh with per-vertex shading normals and texture coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<T> {
    vertices: Vec<Vec3<T>>,
    normals: Vec<Vec3<T>>,
    uvs: Vec<[T; 2]>,
    triangles: Vec<[u32; 3]>,
}

impl<T: Real> Mesh<T> {
    pub fn new(
        vertices: Vec<Vec3<T>>,
        normals: Vec<Vec3<T>>,
        uvs: Vec<[T; 2]>,
        triangles: Vec<[u32; 3]>,
    ) -> Result<Self> {
        let n = vertices.len();
        if normals.len() != n || uvs.len() != n {
            return Err(Error::invalid(format!(
                "{n} vertices but {} normals and {} uvs",
                normals.len(),
                uvs.len()
            )));
        }
        if triangles.is_empty() {
            return Err(Error::invalid("mesh has no triangles"));
        }
        if let Some(v) = vertices.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite vertex {v:?}")));
        }
        let tol = T::lit(1e-6);
        if let Some((i, nrm)) = normals.iter().enumerate().find(|(_, v)| (v.length() - T::one()).abs() > tol) {
            return Err(Error::invalid(format!("normal {i} has length {}", nrm.length())));
        }
        for (i, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&k| k as usize >= n) {
                return Err(Error::invalid(format!("triangle {i} indexes past {n} vertices")));
            }
            let [a, b, c] = tri.map(|k| vertices[k as usize]);
            let area = (b - a).cross(c - a).length() * T::lit(0.5);
            if !(area > T::lit(1e-12)) {
                return Err(Error::invalid(format!("triangle {i} is degenerate (area {area})")));
            }
        }
        Ok(Self { vertices, normals, uvs, triangles })
    }

    /// Area-weighted vertex normals from face geometry.
    pub fn compute_vertex_normals(vertices: &[Vec3<T>], triangles: &[[u32; 3]]) -> Vec<Vec3<T>> {
        let mut acc = vec![Vec3::zero(); vertices.len()];
        for tri in triangles {
            let [a, b, c] = tri.map(|k| vertices[k as usize]);
            let n = (b - a).cross(c - a);
            for k in tri {
                acc[*k as usize] += n;
            }
        }
        acc.into_iter()
            .map(|n| if n.length() > T::zero() { n.normalized() } else { Vec3::new(T::zero(), T::zero(), T::one()) })
            .collect()
    }

    #[inline]
    pub fn vertices(&self) -> &[Vec3<T>] {
        &self.vertices
    }

    #[inline]
    pub fn normals(&self) -> &[Vec3<T>] {
        &self.normals
    }

    #[inline]
    pub fn uvs(&self) -> &[[T; 2]] {
        &self.uvs
    }

    #[inline]
    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    #[inline]
    pub fn triangle_vertices(&self, i: usize) -> [Vec3<T>; 3] {
        self.triangles[i].map(|k| self.vertices[k as usize])
    }

    pub fn bounds(&self) -> (Vec3<T>, Vec3<T>) {
        let init = (Vec3::splat(T::infinity()), Vec3::splat(T::neg_infinity()));
        self.vertices.iter().fold(init, |(lo, hi), v| (lo.min_elem(*v), hi.max_elem(*v)))
    }

    pub fn diagonal(&self) -> T {
        let (lo, hi) = self.bounds();
        (hi - lo).length()
    }

    /// Concatenates meshes, offsetting indices.
    pub fn merge(parts: &[Mesh<T>]) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut normals = Vec::new();
        let mut uvs = Vec::new();
        let mut triangles = Vec::new();
        for m in parts {
            let off = vertices.len() as u32;
            vertices.extend_from_slice(&m.vertices);
            normals.extend_from_slice(&m.normals);
            uvs.extend_from_slice(&m.uvs);
            triangles.extend(m.triangles.iter().map(|t| t.map(|k| k + off)));
        }
        Self::new(vertices, normals, uvs, triangles)
    }

    /// Applies `uv ↦ offset + scale·uv` to every texture coordinate.
    pub fn remap_uvs(mut self, offset: [T; 2], scale: [T; 2]) -> Self {
        for uv in &mut self.uvs {
            *uv = [offset[0] + scale[0] * uv[0], offset[1] + scale[1] * uv[1]];
        }
        self
    }
}

use crate::math::{Ray, Vec3};
use crate::render::mesh::Mesh;
use crate::scalar::Real;

const LEAF_SIZE: usize = 4;
const SAH_BINS: usize = 12;

/// Closest ray-surface intersection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit<T> {
    pub t: T,
    pub triangle: usize,
    /// Barycentric weights of the triangle's three vertices.
    pub bary: [T; 3],
    pub point: Vec3<T>,
    /// Interpolated, normalized shading normal.
    pub normal: Vec3<T>,
    /// Unit face normal following the triangle's winding.
    pub geometric_normal: Vec3<T>,
    pub uv: [T; 2],
}

#[derive(Debug, Clone, Copy)]
struct Aabb<T> {
    lo: Vec3<T>,
    hi: Vec3<T>,
}

impl<T: Real> Aabb<T> {
    fn empty() -> Self {
        Self { lo: Vec3::splat(T::infinity()), hi: Vec3::splat(T::neg_infinity()) }
    }

    fn grow(&mut self, p: Vec3<T>) {
        self.lo = self.lo.min_elem(p);
        self.hi = self.hi.max_elem(p);
    }

    fn merge(&mut self, o: &Self) {
        self.lo = self.lo.min_elem(o.lo);
        self.hi = self.hi.max_elem(o.hi);
    }

    fn area(&self) -> T {
        let d = self.hi - self.lo;
        if d.x < T::zero() {
            return T::zero();
        }
        T::lit(2.0) * (d.x * d.y + d.y * d.z + d.z * d.x)
    }

    /// Slab test; returns the entry distance when the box overlaps `[t_min, t_max]`.
    #[inline]
    fn hit(&self, o: Vec3<T>, inv: Vec3<T>, t_min: T, t_max: T) -> Option<T> {
        let mut t0 = t_min;
        let mut t1 = t_max;
        for a in 0..3 {
            let mut ta = (self.lo[a] - o[a]) * inv[a];
            let mut tb = (self.hi[a] - o[a]) * inv[a];
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            // NaN from 0·∞ leaves the bound untouched
            if ta > t0 {
                t0 = ta;
            }
            if tb < t1 {
                t1 = tb;
            }
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Debug, Clone, Copy)]
struct Node<T> {
    bounds: Aabb<T>,
    /// First primitive for leaves, right child for interior nodes.
    start: u32,
    /// Primitive count; zero marks an interior node whose left child is `self + 1`.
    count: u32,
}

/// Bounding volume hierarchy over a triangle mesh, built with binned SAH.
#[derive(Debug, Clone)]
pub struct Bvh<T> {
    mesh: Mesh<T>,
    nodes: Vec<Node<T>>,
    order: Vec<u32>,
    epsilon: T,
}

/// Möller–Trumbore test without back-face culling; returns `(t, b1, b2)`.
#[inline]
pub fn intersect_triangle<T: Real>(ray: &Ray<T>, tri: &[Vec3<T>; 3], t_min: T, t_max: T) -> Option<(T, T, T)> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = ray.dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < T::min_positive_value() {
        return None;
    }
    let inv = T::one() / det;
    let s = ray.origin - tri[0];
    let b1 = s.dot(p) * inv;
    if b1 < T::zero() || b1 > T::one() {
        return None;
    }
    let q = s.cross(e1);
    let b2 = ray.dir.dot(q) * inv;
    if b2 < T::zero() || b1 + b2 > T::one() {
        return None;
    }
    let t = e2.dot(q) * inv;
    (t > t_min && t < t_max).then_some((t, b1, b2))
}

impl<T: Real> Bvh<T> {
    pub fn build(mesh: Mesh<T>) -> Self {
        let n = mesh.triangles().len();
        let mut boxes = Vec::with_capacity(n);
        let mut centroids = Vec::with_capacity(n);
        for i in 0..n {
            let mut b = Aabb::empty();
            let v = mesh.triangle_vertices(i);
            v.iter().for_each(|p| b.grow(*p));
            boxes.push(b);
            centroids.push((v[0] + v[1] + v[2]) / T::lit(3.0));
        }
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_SIZE + 1);
        build_node(&mut nodes, &mut order, 0, n, &boxes, &centroids);
        let epsilon = T::lit(1e-4) * mesh.diagonal();
        Self { mesh, nodes, order, epsilon }
    }

    #[inline]
    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    /// Shadow-ray offset: `1e-4` times the scene diagonal.
    #[inline]
    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn traverse(&self, ray: &Ray<T>, t_min: T, mut t_max: T, any: bool) -> Option<(T, usize, T, T)> {
        let inv = Vec3::new(T::one() / ray.dir.x, T::one() / ray.dir.y, T::one() / ray.dir.z);
        let mut best = None;
        let mut stack = [0u32; 64];
        let mut sp = 0usize;
        let mut idx = 0usize;
        loop {
            let node = &self.nodes[idx];
            if node.bounds.hit(ray.origin, inv, t_min, t_max).is_some() {
                if node.count > 0 {
                    let s = node.start as usize;
                    for &tri in &self.order[s..s + node.count as usize] {
                        let v = self.mesh.triangle_vertices(tri as usize);
                        if let Some((t, b1, b2)) = intersect_triangle(ray, &v, t_min, t_max) {
                            t_max = t;
                            best = Some((t, tri as usize, b1, b2));
                            if any {
                                return best;
                            }
                        }
                    }
                } else {
                    let (l, r) = (idx + 1, node.start as usize);
                    // visit the nearer child first
                    let dl = self.nodes[l].bounds.hit(ray.origin, inv, t_min, t_max);
                    let dr = self.nodes[r].bounds.hit(ray.origin, inv, t_min, t_max);
                    match (dl, dr) {
                        (Some(a), Some(b)) => {
                            let (near, far) = if a <= b { (l, r) } else { (r, l) };
                            stack[sp] = far as u32;
                            sp += 1;
                            idx = near;
                            continue;
                        }
                        (Some(_), None) => {
                            idx = l;
                            continue;
                        }
                        (None, Some(_)) => {
                            idx = r;
                            continue;
                        }
                        (None, None) => {}
                    }
                }
            }
            if sp == 0 {
                return best;
            }
            sp -= 1;
            idx = stack[sp] as usize;
        }
    }

    /// Closest hit with `t` in `(t_min, ∞)`.
    pub fn intersect_from(&self, ray: &Ray<T>, t_min: T) -> Option<Hit<T>> {
        let (t, tri, b1, b2) = self.traverse(ray, t_min, T::infinity(), false)?;
        Some(self.make_hit(ray, t, tri, b1, b2))
    }

    pub fn intersect(&self, ray: &Ray<T>) -> Option<Hit<T>> {
        self.intersect_from(ray, T::zero())
    }

    /// Whether anything blocks `origin + t·dir` for `t` in `(ε, t_max)`.
    pub fn occluded(&self, origin: Vec3<T>, dir: Vec3<T>, t_max: T) -> bool {
        self.traverse(&Ray::new(origin, dir), self.epsilon, t_max, true).is_some()
    }

    /// Reference closest hit by testing every triangle.
    pub fn intersect_brute_force(&self, ray: &Ray<T>) -> Option<Hit<T>> {
        let mut best: Option<(T, usize, T, T)> = None;
        for i in 0..self.mesh.triangles().len() {
            let t_max = best.map_or(T::infinity(), |b| b.0);
            if let Some((t, b1, b2)) = intersect_triangle(ray, &self.mesh.triangle_vertices(i), T::zero(), t_max) {
                best = Some((t, i, b1, b2));
            }
        }
        best.map(|(t, tri, b1, b2)| self.make_hit(ray, t, tri, b1, b2))
    }

    fn make_hit(&self, ray: &Ray<T>, t: T, tri: usize, b1: T, b2: T) -> Hit<T> {
        let idx = self.mesh.triangles()[tri].map(|k| k as usize);
        let b0 = T::one() - b1 - b2;
        let bary = [b0, b1, b2];
        let v = idx.map(|k| self.mesh.vertices()[k]);
        let geometric_normal = (v[1] - v[0]).cross(v[2] - v[0]).normalized();
        let ns = self.mesh.normals();
        let mut normal = ns[idx[0]] * b0 + ns[idx[1]] * b1 + ns[idx[2]] * b2;
        normal = if normal.length_squared() > T::lit(1e-20) { normal.normalized() } else { geometric_normal };
        let uvs = self.mesh.uvs();
        let uv = [0, 1].map(|c| uvs[idx[0]][c] * b0 + uvs[idx[1]][c] * b1 + uvs[idx[2]][c] * b2);
        Hit { t, triangle: tri, bary, point: ray.at(t), normal, geometric_normal, uv }
    }
}

fn build_node<T: Real>(
    nodes: &mut Vec<Node<T>>,
    order: &mut [u32],
    start: usize,
    end: usize,
    boxes: &[Aabb<T>],
    centroids: &[Vec3<T>],
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &i in &order[start..end] {
        bounds.merge(&boxes[i as usize]);
        cbounds.grow(centroids[i as usize]);
    }
    let me = nodes.len();
    nodes.push(Node { bounds, start: start as u32, count: (end - start) as u32 });
    let n = end - start;
    if n <= LEAF_SIZE {
        return me;
    }
    let extent = cbounds.hi - cbounds.lo;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    if !(extent[axis] > T::zero()) {
        return me;
    }

    // binned SAH along the widest centroid axis
    let lo = cbounds.lo[axis];
    let scale = T::from_usize_lossy(SAH_BINS) / extent[axis];
    let bin_of = |i: u32| -> usize {
        ((centroids[i as usize][axis] - lo) * scale).to_usize().unwrap_or(0).min(SAH_BINS - 1)
    };
    let mut bin_box = [Aabb::empty(); SAH_BINS];
    let mut bin_n = [0usize; SAH_BINS];
    for &i in &order[start..end] {
        let b = bin_of(i);
        bin_box[b].merge(&boxes[i as usize]);
        bin_n[b] += 1;
    }
    let mut best = (T::infinity(), 0usize);
    for split in 1..SAH_BINS {
        let (mut lb, mut rb) = (Aabb::empty(), Aabb::empty());
        let (mut ln, mut rn) = (0, 0);
        for b in 0..split {
            lb.merge(&bin_box[b]);
            ln += bin_n[b];
        }
        for b in split..SAH_BINS {
            rb.merge(&bin_box[b]);
            rn += bin_n[b];
        }
        if ln == 0 || rn == 0 {
            continue;
        }
        let cost = lb.area() * T::from_usize_lossy(ln) + rb.area() * T::from_usize_lossy(rn);
        if cost < best.0 {
            best = (cost, split);
        }
    }
    let mid = if best.0.is_finite() {
        let split = best.1;
        let slice = &mut order[start..end];
        let mut m = 0;
        for k in 0..slice.len() {
            if bin_of(slice[k]) < split {
                slice.swap(k, m);
                m += 1;
            }
        }
        start + m
    } else {
        let slice = &mut order[start..end];
        slice.sort_by(|a, b| {
            centroids[*a as usize][axis].partial_cmp(&centroids[*b as usize][axis]).unwrap_or(std::cmp::Ordering::Equal)
        });
        start + n / 2
    };
    if mid == start || mid == end {
        return me;
    }
    nodes[me].count = 0;
    build_node(nodes, order, start, mid, boxes, centroids);
    let right = build_node(nodes, order, mid, end, boxes, centroids);
    nodes[me].start = right as u32;
    me
}

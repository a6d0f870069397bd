//! Triangle surfaces and geodesic distances along mesh edges.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TriSurface {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
    pub crs: String,
    /// Optional parcel label per vertex.
    pub parcels: Option<Vec<String>>,
}

/// Edge list per vertex with Euclidean lengths.
pub type Adjacency = Vec<Vec<(usize, f64)>>;

impl TriSurface {
    /// Vertices are in mm.
    pub fn new(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>, crs: &str) -> Result<Self> {
        let n = vertices.len();
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= n)) {
            return Err(Error::BadParam(alloc::format!("face {f:?} references a vertex >= {n}")));
        }
        Ok(TriSurface { vertices, faces, crs: crs.into(), parcels: None })
    }

    pub fn with_parcels(mut self, parcels: Vec<String>) -> Result<Self> {
        if parcels.len() != self.vertices.len() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "{} parcel labels for {} vertices",
                parcels.len(),
                self.vertices.len()
            )));
        }
        self.parcels = Some(parcels);
        Ok(self)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Edge graph; zero-area faces contribute no edges.
    pub fn adjacency(&self) -> Adjacency {
        let mut adj: Adjacency = vec![Vec::new(); self.vertices.len()];
        let mut seen = BTreeMap::new();
        for f in &self.faces {
            if triangle_area(&self.vertices[f[0]], &self.vertices[f[1]], &self.vertices[f[2]]) <= 0.0 {
                continue;
            }
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                let key = (a.min(b), a.max(b));
                if seen.insert(key, ()).is_none() {
                    let d = dist(&self.vertices[a], &self.vertices[b]);
                    adj[a].push((b, d));
                    adj[b].push((a, d));
                }
            }
        }
        adj
    }

    /// Planar `nx × ny` grid in the z = 0 plane with alternating cell diagonals.
    pub fn grid(nx: usize, ny: usize, spacing: f64) -> Self {
        let mut vertices = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                vertices.push([i as f64 * spacing, j as f64 * spacing, 0.0]);
            }
        }
        let id = |i: usize, j: usize| j * nx + i;
        let mut faces = Vec::new();
        for j in 0..ny.saturating_sub(1) {
            for i in 0..nx.saturating_sub(1) {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                if (i + j) % 2 == 0 {
                    faces.push([a, b, c]);
                    faces.push([a, c, d]);
                } else {
                    faces.push([a, b, d]);
                    faces.push([b, c, d]);
                }
            }
        }
        TriSurface { vertices, faces, crs: "grid".into(), parcels: None }
    }

    /// Subdivided icosahedron projected onto a sphere of `radius` mm.
    ///
    /// `10·4^k + 2` vertices after `k` subdivisions.
    pub fn icosphere(radius: f64, subdivisions: usize) -> Self {
        let t = 0.5 * (1.0 + libm::sqrt(5.0));
        let mut vertices: Vec<[f64; 3]> = [
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ]
        .iter()
        .map(|p| unit(p))
        .collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut cache: BTreeMap<(usize, usize), usize> = BTreeMap::new();
            let mut mid = |a: usize, b: usize, vs: &mut Vec<[f64; 3]>| -> usize {
                let key = (a.min(b), a.max(b));
                *cache.entry(key).or_insert_with(|| {
                    let (p, q) = (vs[a], vs[b]);
                    vs.push(unit(&[p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                    vs.len() - 1
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for [a, b, c] in faces {
                let ab = mid(a, b, &mut vertices);
                let bc = mid(b, c, &mut vertices);
                let ca = mid(c, a, &mut vertices);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        for v in &mut vertices {
            for x in v.iter_mut() {
                *x *= radius;
            }
        }
        TriSurface { vertices, faces, crs: "sphere".into(), parcels: None }
    }
}

fn unit(p: &[f64; 3]) -> [f64; 3] {
    let n = libm::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    [p[0] / n, p[1] / n, p[2] / n]
}

pub(crate) fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let (x, y, z) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    libm::sqrt(x * x + y * y + z * z)
}

fn triangle_area(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let x = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    0.5 * libm::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Reversed for a min-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Dijkstra distances from `seed`; unreachable vertices are `+inf`.
pub fn geodesic_distance(surface: &TriSurface, seed: usize) -> Result<Vec<f64>> {
    geodesic_on(&surface.adjacency(), seed, f64::INFINITY)
}

/// Dijkstra over a prebuilt graph, stopping beyond `cutoff` (those stay `+inf`).
pub fn geodesic_on(adj: &Adjacency, seed: usize, cutoff: f64) -> Result<Vec<f64>> {
    if seed >= adj.len() {
        return Err(Error::BadSeed(seed));
    }
    let mut d = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    d[seed] = 0.0;
    heap.push(Entry(0.0, seed));
    while let Some(Entry(du, u)) = heap.pop() {
        if du > d[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = du + w;
            if nd < d[v] && nd <= cutoff {
                d[v] = nd;
                heap.push(Entry(nd, v));
            }
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_is_zero_and_chain() {
        let s = TriSurface::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [3.0, 0.0, 0.0], [1.0, 5.0, 0.0]],
            vec![[0, 1, 3], [1, 2, 3]],
            "x",
        )
        .unwrap();
        let d = geodesic_distance(&s, 0).unwrap();
        assert_eq!(&d[..3], &[0.0, 1.0, 3.0]);
        assert!(matches!(geodesic_distance(&s, 9), Err(Error::BadSeed(9))));
    }

    #[test]
    fn unreachable_and_degenerate() {
        let s = TriSurface::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [5.0, 0.0, 0.0], [6.0, 0.0, 0.0], [7.0, 0.0, 0.0]],
            vec![[0, 1, 2], [3, 4, 5]],
            "x",
        )
        .unwrap();
        let d = geodesic_distance(&s, 0).unwrap();
        assert!(d[3..].iter().all(|x| x.is_infinite()));
        assert!(TriSurface::new(vec![[0.0; 3]], vec![[0, 0, 1]], "x").is_err());
    }

    #[test]
    fn grid_geodesic_close_to_euclidean() {
        let s = TriSurface::grid(61, 61, 1.0);
        let seed = 30 * 61 + 30;
        let d = geodesic_distance(&s, seed).unwrap();
        for (v, p) in s.vertices.iter().enumerate() {
            let e = dist(p, &s.vertices[seed]);
            if e >= 5.0 {
                let r = d[v] / e;
                assert!((1.0 - 1e-12..1.1).contains(&r), "{v} {r}");
            }
        }
    }

    #[test]
    fn icosphere_counts() {
        for k in 0..4 {
            let s = TriSurface::icosphere(80.0, k);
            assert_eq!(s.n_vertices(), 10 * 4usize.pow(k as u32) + 2);
            assert_eq!(s.faces.len(), 20 * 4usize.pow(k as u32));
            assert!(s.vertices.iter().all(|p| (dist(p, &[0.0; 3]) - 80.0).abs() < 1e-9));
        }
    }

    #[test]
    fn sphere_geodesic_near_great_circle() {
        let s = TriSurface::icosphere(80.0, 4);
        let d = geodesic_distance(&s, 0).unwrap();
        let p0 = s.vertices[0];
        for (v, p) in s.vertices.iter().enumerate() {
            let c = ((p[0] * p0[0] + p[1] * p0[1] + p[2] * p0[2]) / 6400.0).clamp(-1.0, 1.0);
            let g = 80.0 * libm::acos(c);
            if g > 20.0 {
                assert!(d[v] >= 0.99 * g && d[v] < 1.25 * g, "{v} {} {g}", d[v]);
            }
        }
    }
}

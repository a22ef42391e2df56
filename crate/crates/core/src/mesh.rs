//! Rectangular partitions refined by quadrisection.
//!
//! Geometry lives on an integer lattice (`origin + i * unit` per axis) so
//! that vertex identity and incidence tests are exact. Element ids are the
//! ids of the cells of the refinement forest; they never change once
//! assigned, and the active elements are the leaves.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::element::Rect;
use crate::error::{Error, Result};

/// Lattice units per side of an initial cell of a tensor mesh.
const ROOT_UNITS: i64 = 1 << 40;
/// Lattice resolution of meshes built from explicit rectangles.
const EXPLICIT_SCALE: f64 = (1u64 << 40) as f64;

pub const SIDE_BOTTOM: usize = 0;
pub const SIDE_RIGHT: usize = 1;
pub const SIDE_TOP: usize = 2;
pub const SIDE_LEFT: usize = 3;

/// Corners `(start, end)` of each side, ordered by increasing coordinate.
pub const SIDE_CORNERS: [[usize; 2]; 4] = [[0, 1], [1, 2], [3, 2], [0, 3]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryTag {
    Clamped,
    SimplySupported,
}

/// Union of axis-aligned rectangles `[x0, x1, y0, y1]` with the closed
/// segments of the simply supported boundary part. Every other boundary
/// segment is clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub rects: Vec<[f64; 4]>,
    #[serde(default)]
    pub simply_supported: Vec<[[f64; 2]; 2]>,
}

impl Domain {
    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Domain { rects: vec![[x0, x1, y0, y1]], simply_supported: vec![] }
    }

    pub fn bbox(&self) -> [f64; 4] {
        let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        for r in &self.rects {
            b[0] = b[0].min(r[0]);
            b[1] = b[1].max(r[1]);
            b[2] = b[2].min(r[2]);
            b[3] = b[3].max(r[3]);
        }
        b
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.rects.iter().any(|r| p[0] >= r[0] && p[0] <= r[1] && p[1] >= r[2] && p[1] <= r[3])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub origin: [f64; 2],
    pub unit: [f64; 2],
}

impl Lattice {
    #[inline]
    pub fn x(&self, i: i64) -> f64 {
        self.origin[0] + i as f64 * self.unit[0]
    }

    #[inline]
    pub fn y(&self, j: i64) -> f64 {
        self.origin[1] + j as f64 * self.unit[1]
    }

    fn index(&self, v: f64, axis: usize) -> Option<i64> {
        let t = (v - self.origin[axis]) / self.unit[axis];
        let r = t.round();
        if (t - r).abs() <= 1e-6 && r.abs() < 9.0e15 {
            Some(r as i64)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: usize,
    /// `[x0, x1, y0, y1]` in lattice units.
    pub bounds: [i64; 4],
    pub level: u32,
    pub parent: Option<usize>,
    /// Children ordered lower-left, lower-right, upper-right, upper-left.
    pub children: Option<[usize; 4]>,
}

impl Cell {
    pub fn is_active(&self) -> bool {
        self.children.is_none()
    }

    fn corners(&self) -> [[i64; 2]; 4] {
        let [x0, x1, y0, y1] = self.bounds;
        [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hanging {
    /// Element position whose side contains the vertex in its interior.
    pub host: usize,
    pub side: usize,
    /// Endpoints of the host side, ordered by increasing coordinate.
    pub ends: [usize; 2],
    /// Distances from the vertex to `ends[0]` and `ends[1]`.
    pub lambda: [f64; 2],
}

impl Hanging {
    /// Axis of the host side's normal: 0 for vertical sides, 1 for horizontal.
    pub fn normal_axis(&self) -> usize {
        if self.side == SIDE_LEFT || self.side == SIDE_RIGHT {
            0
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryVertex {
    pub tag: BoundaryTag,
    /// Normal axis of a simply supported vertex on a straight boundary
    /// piece; `None` at corners of the boundary.
    pub normal_axis: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub lattice: [i64; 2],
    pub x: [f64; 2],
    pub boundary: Option<BoundaryVertex>,
    pub hanging: Option<Hanging>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexClass {
    Regular,
    Irregular,
    Boundary,
}

impl Vertex {
    pub fn class(&self) -> VertexClass {
        if self.hanging.is_some() {
            VertexClass::Irregular
        } else if self.boundary.is_some() {
            VertexClass::Boundary
        } else {
            VertexClass::Regular
        }
    }

    pub fn is_irregular(&self) -> bool {
        self.hanging.is_some()
    }
}

/// A maximal straight piece of the skeleton between consecutive vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub ends: [usize; 2],
    /// 0: vertical edge with normal `e_x`; 1: horizontal edge with normal `e_y`.
    pub normal_axis: usize,
    /// Element positions on the negative and positive normal side.
    pub elems: [Option<usize>; 2],
    pub tag: Option<BoundaryTag>,
    pub length: f64,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.tag.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// A side of an element contains more than one vertex in its interior.
    MultipleHanging { element: usize, side: usize, count: usize },
    /// A hanging vertex whose host side has an irregular endpoint.
    IrregularNeighbour { vertex: [f64; 2], neighbour: [f64; 2] },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::MultipleHanging { element, side, count } => {
                write!(f, "side {side} of element {element} carries {count} irregular vertices")
            }
            Violation::IrregularNeighbour { vertex, neighbour } => write!(
                f,
                "irregular vertex ({}, {}) has irregular neighbour ({}, {})",
                vertex[0], vertex[1], neighbour[0], neighbour[1]
            ),
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Topology {
    leaves: Vec<usize>,
    leaf_pos: Vec<u32>,
    vertices: Vec<Vertex>,
    vertex_index: HashMap<[i64; 2], usize>,
    elem_vertices: Vec<[usize; 4]>,
    side_inner: Vec<[Vec<usize>; 4]>,
    side_edges: Vec<[Vec<usize>; 4]>,
    edges: Vec<Edge>,
    vertex_elems: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    lattice: Lattice,
    domain: Domain,
    cells: Vec<Cell>,
    ss_lattice: Vec<[[i64; 2]; 2]>,
    initial_area: f64,
    topo: Topology,
}

impl Mesh {
    /// Tensor mesh of `nx * ny` congruent cells over the bounding box of
    /// `domain`, keeping the cells inside the domain.
    pub fn tensor(domain: Domain, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || domain.rects.is_empty() {
            return Err(Error::InvalidDomain("empty grid".into()));
        }
        let bb = domain.bbox();
        let w = [(bb[1] - bb[0]) / nx as f64, (bb[3] - bb[2]) / ny as f64];
        if !(w[0] > 0.0 && w[1] > 0.0) {
            return Err(Error::InvalidDomain("degenerate bounding box".into()));
        }
        for r in &domain.rects {
            for (k, v) in r.iter().enumerate() {
                let axis = k / 2;
                let t = (v - bb[2 * axis]) / w[axis];
                if (t - t.round()).abs() > 1e-9 {
                    return Err(Error::InvalidDomain(format!(
                        "rectangle edge {v} is not on a grid line"
                    )));
                }
            }
        }
        let lattice = Lattice {
            origin: [bb[0], bb[2]],
            unit: [w[0] / ROOT_UNITS as f64, w[1] / ROOT_UNITS as f64],
        };
        let mut cells = Vec::new();
        for j in 0..ny as i64 {
            for i in 0..nx as i64 {
                let c = [bb[0] + (i as f64 + 0.5) * w[0], bb[2] + (j as f64 + 0.5) * w[1]];
                if domain.contains(c) {
                    let id = cells.len();
                    cells.push(Cell {
                        id,
                        bounds: [i * ROOT_UNITS, (i + 1) * ROOT_UNITS, j * ROOT_UNITS, (j + 1) * ROOT_UNITS],
                        level: 0,
                        parent: None,
                        children: None,
                    });
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::InvalidDomain("no grid cell inside the domain".into()));
        }
        Self::from_cells(lattice, domain, cells)
    }

    /// Mesh whose initial elements are the given rectangles `[x0, x1, y0, y1]`.
    /// Coordinates must be multiples of 2^-40.
    pub fn from_rects(rects: &[[f64; 4]], simply_supported: Vec<[[f64; 2]; 2]>) -> Result<Self> {
        let lattice = Lattice { origin: [0.0, 0.0], unit: [1.0 / EXPLICIT_SCALE; 2] };
        let mut cells = Vec::new();
        for (id, r) in rects.iter().enumerate() {
            let mut b = [0i64; 4];
            for k in 0..4 {
                let t = r[k] * EXPLICIT_SCALE;
                if t.fract() != 0.0 || t.abs() > 2f64.powi(50) {
                    return Err(Error::InvalidDomain(format!("coordinate {} is not dyadic", r[k])));
                }
                b[k] = t as i64;
            }
            if b[1] <= b[0] || b[3] <= b[2] {
                return Err(Error::InvalidDomain("rectangle with non-positive extent".into()));
            }
            cells.push(Cell { id, bounds: b, level: 0, parent: None, children: None });
        }
        let domain = Domain { rects: rects.to_vec(), simply_supported };
        Self::from_cells(lattice, domain, cells)
    }

    fn from_cells(lattice: Lattice, domain: Domain, cells: Vec<Cell>) -> Result<Self> {
        let mut ss_lattice = Vec::new();
        for s in &domain.simply_supported {
            let conv = |p: [f64; 2]| -> Result<[i64; 2]> {
                match (lattice.index(p[0], 0), lattice.index(p[1], 1)) {
                    (Some(i), Some(j)) => Ok([i, j]),
                    _ => Err(Error::InvalidBoundary(format!("point ({}, {}) off lattice", p[0], p[1]))),
                }
            };
            let a = conv(s[0])?;
            let b = conv(s[1])?;
            if a[0] != b[0] && a[1] != b[1] {
                return Err(Error::InvalidBoundary("simply supported segment not axis aligned".into()));
            }
            let lo = [a[0].min(b[0]), a[1].min(b[1])];
            let hi = [a[0].max(b[0]), a[1].max(b[1])];
            ss_lattice.push([lo, hi]);
        }
        let mut mesh = Mesh { lattice, domain, cells, ss_lattice, initial_area: 0.0, topo: Topology::default() };
        mesh.rebuild();
        mesh.initial_area = mesh.area();
        mesh.validate_boundary_tags()?;
        Ok(mesh)
    }

    fn validate_boundary_tags(&self) -> Result<()> {
        // every simply supported segment must be covered by boundary edges
        for s in &self.ss_lattice {
            let axis = if s[0][0] == s[1][0] { 0 } else { 1 };
            let len = (s[1][1 - axis] - s[0][1 - axis]) as f64;
            if len <= 0.0 {
                return Err(Error::InvalidBoundary("degenerate simply supported segment".into()));
            }
            let covered: f64 = self
                .topo
                .edges
                .iter()
                .filter(|e| e.tag == Some(BoundaryTag::SimplySupported) && e.normal_axis == axis)
                .filter(|e| {
                    let a = self.topo.vertices[e.ends[0]].lattice;
                    let b = self.topo.vertices[e.ends[1]].lattice;
                    segment_inside(a, b, s)
                })
                .map(|e| {
                    let a = self.topo.vertices[e.ends[0]].lattice;
                    let b = self.topo.vertices[e.ends[1]].lattice;
                    (b[1 - axis] - a[1 - axis]) as f64
                })
                .sum();
            if covered != len {
                return Err(Error::InvalidBoundary(
                    "simply supported segment does not lie on the boundary".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn n_elements(&self) -> usize {
        self.topo.leaves.len()
    }

    /// Cell id of the element at position `e`.
    pub fn elem_id(&self, e: usize) -> usize {
        self.topo.leaves[e]
    }

    /// Position of the active cell `id`, if active.
    pub fn elem_pos(&self, id: usize) -> Option<usize> {
        match self.topo.leaf_pos.get(id) {
            Some(&p) if p != u32::MAX => Some(p as usize),
            _ => None,
        }
    }

    pub fn elem_level(&self, e: usize) -> u32 {
        self.cells[self.topo.leaves[e]].level
    }

    pub fn elem_rect(&self, e: usize) -> Rect {
        let [x0, x1, y0, y1] = self.cells[self.topo.leaves[e]].bounds;
        Rect::from_bounds(self.lattice.x(x0), self.lattice.x(x1), self.lattice.y(y0), self.lattice.y(y1))
    }

    pub fn elem_vertices(&self, e: usize) -> [usize; 4] {
        self.topo.elem_vertices[e]
    }

    /// Vertices strictly inside side `s` of element `e`.
    pub fn side_inner(&self, e: usize, s: usize) -> &[usize] {
        &self.topo.side_inner[e][s]
    }

    /// Edges making up side `s` of element `e`, in increasing coordinate.
    pub fn side_edges(&self, e: usize, s: usize) -> &[usize] {
        &self.topo.side_edges[e][s]
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.topo.vertices
    }

    pub fn vertex(&self, v: usize) -> &Vertex {
        &self.topo.vertices[v]
    }

    pub fn vertex_at(&self, lattice: [i64; 2]) -> Option<usize> {
        self.topo.vertex_index.get(&lattice).copied()
    }

    /// Element positions whose closure contains vertex `v`.
    pub fn vertex_elems(&self, v: usize) -> &[usize] {
        &self.topo.vertex_elems[v]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.topo.edges
    }

    /// True when some vertex of element `e` is irregular.
    pub fn is_irregular_elem(&self, e: usize) -> bool {
        self.topo.elem_vertices[e].iter().any(|&v| self.topo.vertices[v].is_irregular())
    }

    pub fn area(&self) -> f64 {
        (0..self.n_elements()).map(|e| self.elem_rect(e).area()).sum()
    }

    pub fn initial_area(&self) -> f64 {
        self.initial_area
    }

    pub fn h_max(&self) -> f64 {
        (0..self.n_elements()).map(|e| self.elem_rect(e).diameter()).fold(0.0, f64::max)
    }

    /// Active element of smallest id whose closure contains `p`.
    pub fn locate(&self, p: [f64; 2]) -> Option<usize> {
        (0..self.n_elements()).find(|&e| self.elem_rect(e).contains(p))
    }

    pub fn check_mesh_condition(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for e in 0..self.n_elements() {
            for s in 0..4 {
                let n = self.topo.side_inner[e][s].len();
                if n > 1 {
                    out.push(Violation::MultipleHanging { element: self.elem_id(e), side: s, count: n });
                }
            }
        }
        for v in &self.topo.vertices {
            if let Some(h) = v.hanging {
                for &z in &h.ends {
                    if self.topo.vertices[z].is_irregular() {
                        out.push(Violation::IrregularNeighbour {
                            vertex: v.x,
                            neighbour: self.topo.vertices[z].x,
                        });
                    }
                }
            }
        }
        out
    }

    fn split(&mut self, id: usize) -> Result<()> {
        let cell = &self.cells[id];
        if !cell.is_active() {
            return Err(Error::InactiveElement(id));
        }
        let [x0, x1, y0, y1] = cell.bounds;
        if (x1 - x0) % 2 != 0 || (y1 - y0) % 2 != 0 || x1 - x0 < 2 || y1 - y0 < 2 {
            return Err(Error::LatticeExhausted(id));
        }
        let (xm, ym) = ((x0 + x1) / 2, (y0 + y1) / 2);
        let level = cell.level + 1;
        let base = self.cells.len();
        let kids = [[x0, xm, y0, ym], [xm, x1, y0, ym], [xm, x1, ym, y1], [x0, xm, ym, y1]];
        for (k, b) in kids.iter().enumerate() {
            self.cells.push(Cell { id: base + k, bounds: *b, level, parent: Some(id), children: None });
        }
        self.cells[id].children = Some([base, base + 1, base + 2, base + 3]);
        Ok(())
    }

    pub fn uniform_refine(&mut self) -> Result<()> {
        let leaves = self.topo.leaves.clone();
        for id in leaves {
            self.split(id)?;
        }
        self.rebuild();
        Ok(())
    }

    /// Splits the marked active elements (cell ids) and then closes the
    /// partition under the mesh condition.
    pub fn refine_marked(&mut self, marked: &[usize]) -> Result<()> {
        let mut ids: Vec<usize> = marked.to_vec();
        ids.sort_unstable();
        ids.dedup();
        for &id in &ids {
            if self.elem_pos(id).is_none() {
                return Err(Error::InactiveElement(id));
            }
        }
        for id in ids {
            self.split(id)?;
        }
        self.rebuild();
        self.close()
    }

    /// Splits the element of smallest id containing `p`, then closes.
    pub fn refine_at(&mut self, p: [f64; 2]) -> Result<()> {
        let e = self
            .locate(p)
            .ok_or_else(|| Error::InvalidDomain(format!("point ({}, {}) not in mesh", p[0], p[1])))?;
        let id = self.elem_id(e);
        self.refine_marked(&[id])
    }

    fn close(&mut self) -> Result<()> {
        loop {
            let mut offenders = Vec::new();
            for e in 0..self.n_elements() {
                if self.topo.side_inner[e].iter().any(|s| s.len() > 1) {
                    offenders.push(self.elem_id(e));
                }
            }
            for v in &self.topo.vertices {
                if let Some(h) = v.hanging {
                    for &z in &h.ends {
                        if let Some(hz) = self.topo.vertices[z].hanging {
                            offenders.push(self.elem_id(hz.host));
                        }
                    }
                }
            }
            if offenders.is_empty() {
                return Ok(());
            }
            offenders.sort_unstable();
            offenders.dedup();
            for id in offenders {
                self.split(id)?;
            }
            self.rebuild();
        }
    }

    fn rebuild(&mut self) {
        let lat = self.lattice;
        let leaves: Vec<usize> = self.cells.iter().filter(|c| c.is_active()).map(|c| c.id).collect();
        let mut leaf_pos = vec![u32::MAX; self.cells.len()];
        for (p, &id) in leaves.iter().enumerate() {
            leaf_pos[id] = p as u32;
        }
        let mut vertex_index: HashMap<[i64; 2], usize> = HashMap::with_capacity(leaves.len() + 16);
        let mut vertices = Vec::new();
        let mut elem_vertices = Vec::with_capacity(leaves.len());
        for &id in &leaves {
            let mut ev = [0usize; 4];
            for (k, c) in self.cells[id].corners().iter().enumerate() {
                ev[k] = *vertex_index.entry(*c).or_insert_with(|| {
                    vertices.push(Vertex {
                        lattice: *c,
                        x: [lat.x(c[0]), lat.y(c[1])],
                        boundary: None,
                        hanging: None,
                    });
                    vertices.len() - 1
                });
            }
            elem_vertices.push(ev);
        }
        // vertices on each horizontal (key y) and vertical (key x) line
        let mut lines: [HashMap<i64, Vec<i64>>; 2] = [HashMap::new(), HashMap::new()];
        for v in &vertices {
            lines[0].entry(v.lattice[1]).or_default().push(v.lattice[0]);
            lines[1].entry(v.lattice[0]).or_default().push(v.lattice[1]);
        }
        for m in lines.iter_mut() {
            for l in m.values_mut() {
                l.sort_unstable();
            }
        }
        let mut side_inner: Vec<[Vec<usize>; 4]> = Vec::with_capacity(leaves.len());
        for (p, &id) in leaves.iter().enumerate() {
            let [x0, x1, y0, y1] = self.cells[id].bounds;
            let mut sides: [Vec<usize>; 4] = Default::default();
            // (line map, fixed coordinate, range) per side
            let specs = [(0usize, y0, x0, x1), (1, x1, y0, y1), (0, y1, x0, x1), (1, x0, y0, y1)];
            for (s, &(m, fixed, a, b)) in specs.iter().enumerate() {
                let line = &lines[m][&fixed];
                let lo = line.partition_point(|&t| t <= a);
                let hi = line.partition_point(|&t| t < b);
                for &t in &line[lo..hi] {
                    let key = if m == 0 { [t, fixed] } else { [fixed, t] };
                    sides[s].push(vertex_index[&key]);
                }
            }
            for (s, inner) in sides.iter().enumerate() {
                let ev = elem_vertices[p];
                let ends = [ev[SIDE_CORNERS[s][0]], ev[SIDE_CORNERS[s][1]]];
                for &v in inner {
                    let x = vertices[v].x;
                    let d0 = dist(x, vertices[ends[0]].x);
                    let d1 = dist(x, vertices[ends[1]].x);
                    vertices[v].hanging = Some(Hanging { host: p, side: s, ends, lambda: [d0, d1] });
                }
            }
            side_inner.push(sides);
        }
        // edges
        let mut edge_index: HashMap<(usize, i64, i64, i64), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut side_edges: Vec<[Vec<usize>; 4]> = Vec::with_capacity(leaves.len());
        for p in 0..leaves.len() {
            let ev = elem_vertices[p];
            let mut se: [Vec<usize>; 4] = Default::default();
            for s in 0..4 {
                let mut pts = vec![ev[SIDE_CORNERS[s][0]]];
                pts.extend_from_slice(&side_inner[p][s]);
                pts.push(ev[SIDE_CORNERS[s][1]]);
                let normal_axis = if s == SIDE_LEFT || s == SIDE_RIGHT { 0 } else { 1 };
                // the element lies on the positive side of its bottom and left sides
                let slot = if s == SIDE_BOTTOM || s == SIDE_LEFT { 1 } else { 0 };
                for w in pts.windows(2) {
                    let (a, b) = (vertices[w[0]].lattice, vertices[w[1]].lattice);
                    let key = if normal_axis == 0 { (0, a[0], a[1], b[1]) } else { (1, a[1], a[0], b[0]) };
                    let k = *edge_index.entry(key).or_insert_with(|| {
                        edges.push(Edge {
                            ends: [w[0], w[1]],
                            normal_axis,
                            elems: [None, None],
                            tag: None,
                            length: dist(vertices[w[0]].x, vertices[w[1]].x),
                        });
                        edges.len() - 1
                    });
                    edges[k].elems[slot] = Some(p);
                    se[s].push(k);
                }
            }
            side_edges.push(se);
        }
        // boundary tags
        for e in edges.iter_mut() {
            if e.elems[0].is_some() && e.elems[1].is_some() {
                continue;
            }
            let (a, b) = (vertices[e.ends[0]].lattice, vertices[e.ends[1]].lattice);
            let ss = self.ss_lattice.iter().any(|s| segment_inside(a, b, s));
            e.tag = Some(if ss { BoundaryTag::SimplySupported } else { BoundaryTag::Clamped });
        }
        let mut incident: Vec<Vec<(BoundaryTag, usize)>> = vec![Vec::new(); vertices.len()];
        for e in &edges {
            if let Some(t) = e.tag {
                for &v in &e.ends {
                    incident[v].push((t, e.normal_axis));
                }
            }
        }
        for (v, inc) in incident.iter().enumerate() {
            if inc.is_empty() {
                continue;
            }
            let clamped = inc.iter().any(|&(t, _)| t == BoundaryTag::Clamped);
            let bv = if clamped {
                BoundaryVertex { tag: BoundaryTag::Clamped, normal_axis: None }
            } else {
                let ax = inc[0].1;
                let straight = inc.iter().all(|&(_, a)| a == ax);
                BoundaryVertex { tag: BoundaryTag::SimplySupported, normal_axis: straight.then_some(ax) }
            };
            vertices[v].boundary = Some(bv);
        }
        let mut vertex_elems: Vec<Vec<usize>> = vec![Vec::new(); vertices.len()];
        for (p, ev) in elem_vertices.iter().enumerate() {
            for &v in ev {
                vertex_elems[v].push(p);
            }
        }
        for (v, vx) in vertices.iter().enumerate() {
            if let Some(h) = vx.hanging {
                vertex_elems[v].push(h.host);
                vertex_elems[v].sort_unstable();
            }
        }
        self.topo = Topology {
            leaves,
            leaf_pos,
            vertices,
            vertex_index,
            elem_vertices,
            side_inner,
            side_edges,
            edges,
            vertex_elems,
        };
    }

    /// SHA-256 over the active element bounds, in id order.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for &id in &self.topo.leaves {
            h.update((id as u64).to_le_bytes());
            for b in self.cells[id].bounds {
                h.update(b.to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> MeshJson {
        MeshJson {
            lattice: self.lattice,
            domain: self.domain.clone(),
            initial_area: self.initial_area,
            cells: self.cells.clone(),
            vertices: self
                .topo
                .vertices
                .iter()
                .map(|v| VertexJson { x: v.x, class: v.class() })
                .collect(),
        }
    }

    pub fn from_json(m: MeshJson) -> Result<Self> {
        for (k, c) in m.cells.iter().enumerate() {
            if c.id != k {
                return Err(Error::InvalidDomain(format!("cell {k} has id {}", c.id)));
            }
            if let Some(ch) = c.children {
                if ch.iter().any(|&x| x >= m.cells.len()) {
                    return Err(Error::InvalidDomain(format!("cell {k} has dangling children")));
                }
            }
        }
        let mut mesh = Mesh::from_cells(m.lattice, m.domain, m.cells)?;
        mesh.initial_area = m.initial_area;
        Ok(mesh)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_json())?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let m: MeshJson = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Mesh::from_json(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexJson {
    pub x: [f64; 2],
    pub class: VertexClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshJson {
    pub lattice: Lattice,
    pub domain: Domain,
    pub initial_area: f64,
    pub cells: Vec<Cell>,
    /// Informational; recomputed on load.
    #[serde(default)]
    pub vertices: Vec<VertexJson>,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Is the axis-aligned segment `[a, b]` inside the closed segment `s`?
fn segment_inside(a: [i64; 2], b: [i64; 2], s: &[[i64; 2]; 2]) -> bool {
    let within = |p: [i64; 2]| p[0] >= s[0][0] && p[0] <= s[1][0] && p[1] >= s[0][1] && p[1] <= s[1][1];
    within(a) && within(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lshape() -> Domain {
        Domain { rects: vec![[-1.0, 1.0, 0.0, 1.0], [-1.0, 0.0, -1.0, 0.0]], simply_supported: vec![] }
    }

    #[test]
    fn lshape_unit_cells() {
        let m = Mesh::tensor(lshape(), 2, 2).unwrap();
        assert_eq!(m.n_elements(), 3);
        assert_eq!(m.vertices().len(), 8);
        assert!(m.vertices().iter().all(|v| v.class() == VertexClass::Boundary));
        assert_eq!(m.area(), 3.0);
    }

    #[test]
    fn single_split_creates_four_hanging_nodes() {
        let mut m = Mesh::tensor(Domain::rectangle(-1.0, 1.0, -1.0, 1.0), 4, 4).unwrap();
        m.refine_at([0.0, 0.0]).unwrap();
        assert_eq!(m.n_elements(), 19);
        let hanging = m.vertices().iter().filter(|v| v.is_irregular()).count();
        assert_eq!(hanging, 4);
        assert!(m.check_mesh_condition().is_empty());
        for v in m.vertices().iter().filter(|v| v.is_irregular()) {
            let h = v.hanging.unwrap();
            assert_eq!(h.lambda[0], h.lambda[1]);
        }
    }

    #[test]
    fn repeated_corner_refinement_is_closed() {
        let mut m = Mesh::tensor(Domain::rectangle(0.0, 1.0, 0.0, 1.0), 1, 1).unwrap();
        for _ in 0..8 {
            m.refine_at([0.0, 0.0]).unwrap();
            assert!(m.check_mesh_condition().is_empty());
        }
        assert_eq!(m.area(), 1.0);
        // level gap across any edge is at most one
        for e in m.edges() {
            if let [Some(a), Some(b)] = e.elems {
                assert!((m.elem_level(a) as i64 - m.elem_level(b) as i64).abs() <= 1);
            }
        }
    }

    #[test]
    fn detects_multiple_hanging_nodes() {
        // a coarse square next to four small squares stacked along its side
        let rects = [
            [0.0, 1.0, 0.0, 1.0],
            [1.0, 1.25, 0.0, 0.25],
            [1.0, 1.25, 0.25, 0.5],
            [1.0, 1.25, 0.5, 0.75],
            [1.0, 1.25, 0.75, 1.0],
        ];
        let m = Mesh::from_rects(&rects, vec![]).unwrap();
        let v = m.check_mesh_condition();
        assert!(v.iter().any(|x| matches!(x, Violation::MultipleHanging { count: 3, .. })));
    }

    #[test]
    fn detects_irregular_neighbour() {
        let rects = [
            [0.0, 1.0, 0.0, 1.0],
            [0.0, 2.0, 1.0, 1.5],
            [1.0, 2.0, 0.0, 0.5],
            [1.0, 2.0, 0.5, 1.0],
            [2.0, 3.0, 0.0, 0.5],
            [2.0, 3.0, 0.5, 1.5],
        ];
        let m = Mesh::from_rects(&rects, vec![]).unwrap();
        let v = m.check_mesh_condition();
        assert!(v.iter().any(|x| matches!(x, Violation::IrregularNeighbour { .. })), "{v:?}");
    }

    #[test]
    fn mixed_boundary_tags() {
        let mut d = lshape();
        d.simply_supported = vec![[[0.0, -1.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]];
        let m = Mesh::tensor(d, 4, 4).unwrap();
        let at = |x: f64, y: f64| m.vertices().iter().find(|v| v.x == [x, y]).unwrap().boundary.unwrap();
        assert_eq!(at(0.0, 0.0).tag, BoundaryTag::SimplySupported);
        assert_eq!(at(0.0, 0.0).normal_axis, None);
        assert_eq!(at(0.0, -0.5).normal_axis, Some(0));
        assert_eq!(at(0.5, 0.0).normal_axis, Some(1));
        assert_eq!(at(0.0, -1.0).tag, BoundaryTag::Clamped);
        assert_eq!(at(1.0, 0.0).tag, BoundaryTag::Clamped);
    }

    #[test]
    fn rejects_misplaced_boundary_tag() {
        let mut d = Domain::rectangle(0.0, 1.0, 0.0, 1.0);
        d.simply_supported = vec![[[0.5, 0.0], [0.5, 1.0]]];
        assert!(matches!(Mesh::tensor(d, 2, 2), Err(Error::InvalidBoundary(_))));
    }

    #[test]
    fn rejects_off_grid_domain() {
        let d = Domain { rects: vec![[0.0, 1.0, 0.0, 1.0], [1.0, 1.3, 0.0, 1.0]], simply_supported: vec![] };
        assert!(matches!(Mesh::tensor(d, 2, 2), Err(Error::InvalidDomain(_))));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut m = Mesh::tensor(lshape(), 4, 4).unwrap();
        m.refine_at([0.0, 0.0]).unwrap();
        m.refine_at([-0.1, 0.1]).unwrap();
        let s = serde_json::to_string(&m.to_json()).unwrap();
        let back = Mesh::from_json(serde_json::from_str(&s).unwrap()).unwrap();
        assert_eq!(back.to_json(), m.to_json());
        assert_eq!(back.content_hash(), m.content_hash());
    }
}

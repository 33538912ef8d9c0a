//! Macro triangulations, red refinement and facet topology.
//!
//! A [`FineMesh`] is always the red refinement of a [`MacroMesh`]: every
//! macro triangle is split into four children through its edge midpoints.
//! Children of macro element `M` are stored contiguously as elements
//! `4M..4M+4`, the last one being the interior (middle) child.
//!
//! Facet normals follow one convention throughout the crate. For an interior
//! facet with nodes `a < b` the normal is the clockwise rotation of `x_b - x_a`;
//! boundary normals point out of the domain. The element the normal points
//! *out of* is called `plus`, the other one `minus`, and the jump of a
//! piecewise constant is `[[q]] = q(plus) - q(minus)`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{FemError, Result};
use crate::Point;

/// Spatial dimension of every mesh in this crate.
pub const DIM: usize = 2;

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn triangle_diameter(nodes: &[Point], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = tri.map(|i| nodes[i]);
    norm(sub(a, b)).max(norm(sub(b, c))).max(norm(sub(c, a)))
}

/// A sorted node pair and the elements sharing it.
type EdgeUse = ((usize, usize), Vec<usize>);

/// Edges of a triangulation keyed by sorted node pairs, in order of first
/// appearance, each with its adjacent elements.
fn collect_edges(elements: &[[usize; 3]]) -> Result<Vec<EdgeUse>> {
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edges: Vec<((usize, usize), Vec<usize>)> = Vec::new();
    for (k, tri) in elements.iter().enumerate() {
        for i in 0..3 {
            let key = edge_key(tri[(i + 1) % 3], tri[(i + 2) % 3]);
            let slot = *index.entry(key).or_insert_with(|| {
                edges.push((key, Vec::new()));
                edges.len() - 1
            });
            edges[slot].1.push(k);
            if edges[slot].1.len() > 2 {
                return Err(FemError::NonConforming(format!(
                    "edge ({}, {}) is shared by more than two elements",
                    key.0, key.1
                )));
            }
        }
    }
    Ok(edges)
}

/// Rejects hanging nodes: no node may sit inside a topological boundary edge.
fn check_no_hanging_nodes(nodes: &[Point], edges: &[((usize, usize), Vec<usize>)]) -> Result<()> {
    for ((a, b), adj) in edges {
        if adj.len() != 1 {
            continue;
        }
        let (pa, pb) = (nodes[*a], nodes[*b]);
        let t = sub(pb, pa);
        let len2 = dot(t, t);
        for (i, &p) in nodes.iter().enumerate() {
            if i == *a || i == *b {
                continue;
            }
            let w = sub(p, pa);
            let s = dot(w, t) / len2;
            let cross = (w[0] * t[1] - w[1] * t[0]).abs();
            if s > 1e-12 && s < 1.0 - 1e-12 && cross <= 1e-12 * len2 {
                return Err(FemError::NonConforming(format!(
                    "node {i} lies inside edge ({a}, {b})"
                )));
            }
        }
    }
    Ok(())
}

fn validate_triangulation(nodes: &[Point], elements: &[[usize; 3]]) -> Result<()> {
    if elements.is_empty() {
        return Err(FemError::InvalidMesh("no elements".into()));
    }
    for (k, tri) in elements.iter().enumerate() {
        if tri.iter().any(|&i| i >= nodes.len()) {
            return Err(FemError::InvalidMesh(format!(
                "element {k} references a node out of range"
            )));
        }
        let area = signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
        if !(area > 0.0) {
            return Err(FemError::InvalidMesh(format!(
                "element {k} has non-positive signed area {area}"
            )));
        }
    }
    Ok(())
}

/// Coarse triangulation `T_H`.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroMesh {
    pub nodes: Vec<Point>,
    /// Counter-clockwise node triples.
    pub elements: Vec<[usize; 3]>,
    pub boundary: Vec<bool>,
}

impl MacroMesh {
    /// Validates orientation and conformity and derives boundary flags.
    pub fn new(nodes: Vec<Point>, elements: Vec<[usize; 3]>) -> Result<Self> {
        validate_triangulation(&nodes, &elements)?;
        let edges = collect_edges(&elements)?;
        check_no_hanging_nodes(&nodes, &edges)?;
        let mut boundary = vec![false; nodes.len()];
        for ((a, b), adj) in &edges {
            if adj.len() == 1 {
                boundary[*a] = true;
                boundary[*b] = true;
            }
        }
        Ok(MacroMesh {
            nodes,
            elements,
            boundary,
        })
    }

    /// `2n²` right triangles on the unit square, nodes numbered row by row.
    pub fn unit_square(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(FemError::InvalidMesh(
                "unit square needs at least one cell per side".into(),
            ));
        }
        let step = 1.0 / n as f64;
        let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                nodes.push([i as f64 * step, j as f64 * step]);
            }
        }
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut elements = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                elements.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                elements.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        Self::new(nodes, elements)
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn area(&self, m: usize) -> f64 {
        let [a, b, c] = self.elements[m].map(|i| self.nodes[i]);
        signed_area(a, b, c)
    }

    /// Largest macro diameter `H`.
    pub fn diameter(&self) -> f64 {
        self.elements
            .iter()
            .map(|t| triangle_diameter(&self.nodes, t))
            .fold(0.0, f64::max)
    }

    /// ASCII mesh file: `nodes <count>`, `x y` lines, `elements <count>`,
    /// `i j k` lines (0-based).
    pub fn to_mesh_string(&self) -> String {
        write_mesh_string(&self.nodes, &self.elements)
    }

    pub fn from_mesh_str(text: &str) -> Result<Self> {
        let (nodes, elements) = parse_mesh_str(text)?;
        Self::new(nodes, elements)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_mesh_string()).map_err(|e| FemError::io(path, e))
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| FemError::io(path, e))?;
        Self::from_mesh_str(&text)
    }
}

/// Structured macro mesh of the unit square with `n` cells per side.
pub fn build_unit_square_macro(n: usize) -> Result<MacroMesh> {
    MacroMesh::unit_square(n)
}

pub fn write_mesh_string(nodes: &[Point], elements: &[[usize; 3]]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "nodes {}", nodes.len());
    for p in nodes {
        let _ = writeln!(out, "{:.16e} {:.16e}", p[0], p[1]);
    }
    let _ = writeln!(out, "elements {}", elements.len());
    for t in elements {
        let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
    }
    out
}

pub fn parse_mesh_str(text: &str) -> Result<(Vec<Point>, Vec<[usize; 3]>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    fn header(line: Option<(usize, &str)>, keyword: &str) -> Result<usize> {
        let (no, l) = line.ok_or_else(|| FemError::Parse {
            line: 0,
            message: format!("missing `{keyword}` section"),
        })?;
        let mut parts = l.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(k), Some(n), None) if k == keyword => n.parse().map_err(|_| FemError::Parse {
                line: no,
                message: format!("bad count `{n}`"),
            }),
            _ => Err(FemError::Parse {
                line: no,
                message: format!("expected `{keyword} <count>`"),
            }),
        }
    }

    fn fields<T: std::str::FromStr, const N: usize>(line: Option<(usize, &str)>) -> Result<[T; N]> {
        let (no, l) = line.ok_or_else(|| FemError::Parse {
            line: 0,
            message: "unexpected end of file".into(),
        })?;
        let parsed: Vec<T> = l
            .split_whitespace()
            .map(|s| s.parse::<T>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| FemError::Parse {
                line: no,
                message: format!("cannot parse `{l}`"),
            })?;
        parsed.try_into().map_err(|_| FemError::Parse {
            line: no,
            message: format!("expected {N} fields"),
        })
    }

    let n_nodes = header(lines.next(), "nodes")?;
    let nodes = (0..n_nodes)
        .map(|_| fields::<f64, 2>(lines.next()))
        .collect::<Result<Vec<_>>>()?;
    let n_elements = header(lines.next(), "elements")?;
    let elements = (0..n_elements)
        .map(|_| fields::<usize, 3>(lines.next()))
        .collect::<Result<Vec<_>>>()?;
    if let Some((no, _)) = lines.next() {
        return Err(FemError::Parse {
            line: no,
            message: "trailing content after elements".into(),
        });
    }
    Ok((nodes, elements))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FacetKind {
    /// On `∂Ω`.
    Boundary,
    /// Member of `F_I(M)` for the contained macro element.
    MacroInterior(usize),
    /// Interior to `Ω` but lying on the interface between two macro elements.
    MacroInterface,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub nodes: [usize; 2],
    pub normal: Point,
    pub length: f64,
    /// Element the normal points out of.
    pub plus: usize,
    /// Element the normal points into; `None` on the boundary.
    pub minus: Option<usize>,
    pub kind: FacetKind,
}

impl Facet {
    pub fn is_boundary(&self) -> bool {
        self.minus.is_none()
    }

    pub fn midpoint(&self, nodes: &[Point]) -> Point {
        let (a, b) = (nodes[self.nodes[0]], nodes[self.nodes[1]]);
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    /// `q(plus) - q(minus)`; zero on boundary facets.
    pub fn jump(&self, q: &[f64]) -> f64 {
        match self.minus {
            Some(m) => q[self.plus] - q[m],
            None => 0.0,
        }
    }

    /// `+1` if `element` is `plus`, `-1` if it is `minus`.
    pub fn orientation(&self, element: usize) -> f64 {
        if element == self.plus {
            1.0
        } else {
            debug_assert_eq!(self.minus, Some(element));
            -1.0
        }
    }
}

/// Labelled facets of a fine mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct FacetSet {
    pub facets: Vec<Facet>,
    /// `element_facets[k][i]` is the facet of element `k` opposite local vertex `i`.
    pub element_facets: Vec<[usize; 3]>,
    /// `F_I(M)` for every macro element.
    pub macro_interior: Vec<Vec<usize>>,
}

/// Labels every facet of `fine` from its elements and parent map.
pub fn classify_facets(fine: &FineMesh) -> Result<FacetSet> {
    build_facets(
        &fine.nodes,
        &fine.elements,
        &fine.parent_macro,
        fine.macro_mesh.n_elements(),
    )
}

fn build_facets(
    nodes: &[Point],
    elements: &[[usize; 3]],
    parent: &[usize],
    n_macro: usize,
) -> Result<FacetSet> {
    let edges = collect_edges(elements)?;
    check_no_hanging_nodes(nodes, &edges)?;
    let index: HashMap<(usize, usize), usize> = edges
        .iter()
        .enumerate()
        .map(|(i, (key, _))| (*key, i))
        .collect();

    let mut facets = Vec::with_capacity(edges.len());
    let mut macro_interior = vec![Vec::new(); n_macro];
    for (f, ((a, b), adj)) in edges.iter().enumerate() {
        let (pa, pb) = (nodes[*a], nodes[*b]);
        let t = sub(pb, pa);
        let length = norm(t);
        let mut normal = [t[1] / length, -t[0] / length];
        let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
        let points_out_of = |k: usize, n: Point| {
            let tri = elements[k];
            let c = [
                (nodes[tri[0]][0] + nodes[tri[1]][0] + nodes[tri[2]][0]) / 3.0,
                (nodes[tri[0]][1] + nodes[tri[1]][1] + nodes[tri[2]][1]) / 3.0,
            ];
            dot(sub(mid, c), n) > 0.0
        };
        let (plus, minus, kind) = match adj.as_slice() {
            [k] => {
                if !points_out_of(*k, normal) {
                    normal = [-normal[0], -normal[1]];
                }
                (*k, None, FacetKind::Boundary)
            }
            [k0, k1] => {
                let (plus, minus) = if points_out_of(*k0, normal) {
                    (*k0, *k1)
                } else {
                    (*k1, *k0)
                };
                let kind = if parent[*k0] == parent[*k1] {
                    macro_interior[parent[*k0]].push(f);
                    FacetKind::MacroInterior(parent[*k0])
                } else {
                    FacetKind::MacroInterface
                };
                (plus, Some(minus), kind)
            }
            _ => unreachable!("collect_edges bounds adjacency"),
        };
        facets.push(Facet {
            nodes: [*a, *b],
            normal,
            length,
            plus,
            minus,
            kind,
        });
    }

    let element_facets = elements
        .iter()
        .map(|tri| [0, 1, 2].map(|i| index[&edge_key(tri[(i + 1) % 3], tri[(i + 2) % 3])]))
        .collect();

    Ok(FacetSet {
        facets,
        element_facets,
        macro_interior,
    })
}

/// An edge of the macro mesh, seen from the fine mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroFacet {
    /// Macro node pair, sorted.
    pub nodes: [usize; 2],
    /// Fine node at the edge midpoint (a fine-mesh index).
    pub midpoint: usize,
    /// Unit normal, outward on `∂Ω`.
    pub normal: Point,
    pub length: f64,
    /// Adjacent macro elements (one on the boundary).
    pub macros: Vec<usize>,
    /// The two fine facets composing this edge.
    pub fine_facets: [usize; 2],
}

impl MacroFacet {
    pub fn is_boundary(&self) -> bool {
        self.macros.len() == 1
    }
}

/// Red refinement of a macro mesh with full facet topology.
#[derive(Debug, Clone)]
pub struct FineMesh {
    pub macro_mesh: MacroMesh,
    pub nodes: Vec<Point>,
    pub elements: Vec<[usize; 3]>,
    pub parent_macro: Vec<usize>,
    pub boundary_node: Vec<bool>,
    pub facet_set: FacetSet,
    pub macro_facets: Vec<MacroFacet>,
    /// Largest element diameter.
    pub h: f64,
    areas: Vec<f64>,
    /// Gradients of the barycentric coordinates, per element.
    grads: Vec<[Point; 3]>,
}

impl FineMesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facet_set.facets
    }

    pub fn element_facets(&self, k: usize) -> [usize; 3] {
        self.facet_set.element_facets[k]
    }

    /// `F_I(M)`.
    pub fn macro_interior_facets(&self, m: usize) -> &[usize] {
        &self.facet_set.macro_interior[m]
    }

    pub fn area(&self, k: usize) -> f64 {
        self.areas[k]
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn barycentric_gradients(&self, k: usize) -> [Point; 3] {
        self.grads[k]
    }

    pub fn vertices(&self, k: usize) -> [Point; 3] {
        self.elements[k].map(|i| self.nodes[i])
    }

    pub fn children(&self, m: usize) -> std::ops::Range<usize> {
        4 * m..4 * m + 4
    }

    /// Maps barycentric coordinates on element `k` to a physical point.
    pub fn map_point(&self, k: usize, bary: [f64; 3]) -> Point {
        let v = self.vertices(k);
        [
            bary[0] * v[0][0] + bary[1] * v[1][0] + bary[2] * v[2][0],
            bary[0] * v[0][1] + bary[1] * v[1][1] + bary[2] * v[2][1],
        ]
    }

    /// Barycentric coordinates of `p` with respect to element `k`.
    pub fn barycentric(&self, k: usize, p: Point) -> [f64; 3] {
        let v = self.vertices(k);
        let g = self.grads[k];
        let l1 = dot(g[1], sub(p, v[0]));
        let l2 = dot(g[2], sub(p, v[0]));
        [1.0 - l1 - l2, l1, l2]
    }

    pub fn centroid(&self, k: usize) -> Point {
        self.map_point(k, [1.0 / 3.0; 3])
    }

    /// Element containing `p` (first match), by a linear scan.
    pub fn locate(&self, p: Point) -> Option<usize> {
        (0..self.n_elements()).find(|&k| self.barycentric(k, p).iter().all(|&l| l >= -1e-12))
    }

    /// Reverses the stored normal of facet `f`, swapping `plus` and `minus`.
    /// Only interior facets can be flipped; boundary normals stay outward.
    pub fn flip_normal(&mut self, f: usize) -> Result<()> {
        let facet = &mut self.facet_set.facets[f];
        let Some(minus) = facet.minus else {
            return Err(FemError::InvalidMesh(format!(
                "facet {f} is on the boundary; its normal must point outwards"
            )));
        };
        facet.normal = [-facet.normal[0], -facet.normal[1]];
        facet.minus = Some(facet.plus);
        facet.plus = minus;
        Ok(())
    }
}

/// Splits every macro triangle into four through its edge midpoints.
pub fn red_refine(macro_mesh: &MacroMesh) -> Result<FineMesh> {
    validate_triangulation(&macro_mesh.nodes, &macro_mesh.elements)?;
    let macro_edges = collect_edges(&macro_mesh.elements)?;

    let mut nodes = macro_mesh.nodes.clone();
    let mut midpoint_of: HashMap<(usize, usize), usize> = HashMap::new();
    for ((a, b), _) in &macro_edges {
        let (pa, pb) = (nodes[*a], nodes[*b]);
        midpoint_of.insert((*a, *b), nodes.len());
        nodes.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
    }

    let mut elements = Vec::with_capacity(4 * macro_mesh.n_elements());
    let mut parent_macro = Vec::with_capacity(4 * macro_mesh.n_elements());
    for (m, &[a, b, c]) in macro_mesh.elements.iter().enumerate() {
        let ab = midpoint_of[&edge_key(a, b)];
        let bc = midpoint_of[&edge_key(b, c)];
        let ca = midpoint_of[&edge_key(c, a)];
        elements.extend_from_slice(&[[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        parent_macro.extend_from_slice(&[m; 4]);
    }

    let facet_set = build_facets(&nodes, &elements, &parent_macro, macro_mesh.n_elements())?;

    let mut boundary_node = vec![false; nodes.len()];
    for f in &facet_set.facets {
        if f.is_boundary() {
            boundary_node[f.nodes[0]] = true;
            boundary_node[f.nodes[1]] = true;
        }
    }

    let fine_index: HashMap<(usize, usize), usize> = facet_set
        .facets
        .iter()
        .enumerate()
        .map(|(i, f)| (edge_key(f.nodes[0], f.nodes[1]), i))
        .collect();
    let macro_facets = macro_edges
        .iter()
        .map(|((a, b), adj)| {
            let mid = midpoint_of[&(*a, *b)];
            let fine_facets = [
                fine_index[&edge_key(*a, mid)],
                fine_index[&edge_key(mid, *b)],
            ];
            let (pa, pb) = (nodes[*a], nodes[*b]);
            let t = sub(pb, pa);
            let length = norm(t);
            let mut normal = [t[1] / length, -t[0] / length];
            if adj.len() == 1 {
                // outward: same direction as the fine boundary facet normal
                let fine_normal = facet_set.facets[fine_facets[0]].normal;
                if dot(normal, fine_normal) < 0.0 {
                    normal = [-normal[0], -normal[1]];
                }
            }
            MacroFacet {
                nodes: [*a, *b],
                midpoint: mid,
                normal,
                length,
                macros: adj.clone(),
                fine_facets,
            }
        })
        .collect();

    let mut areas = Vec::with_capacity(elements.len());
    let mut grads = Vec::with_capacity(elements.len());
    let mut h: f64 = 0.0;
    for tri in &elements {
        let [a, b, c] = tri.map(|i| nodes[i]);
        let area = signed_area(a, b, c);
        if !(area > 0.0) {
            return Err(FemError::InvalidMesh("degenerate child element".into()));
        }
        // ∇λ_i is the inward (left) normal of the opposite edge, scaled by |e|/(2|K|)
        let v = [a, b, c];
        let g = [0, 1, 2].map(|i| {
            let e = sub(v[(i + 2) % 3], v[(i + 1) % 3]);
            [-e[1] / (2.0 * area), e[0] / (2.0 * area)]
        });
        areas.push(area);
        grads.push(g);
        h = h.max(triangle_diameter(&nodes, tri));
    }

    Ok(FineMesh {
        macro_mesh: macro_mesh.clone(),
        nodes,
        elements,
        parent_macro,
        boundary_node,
        facet_set,
        macro_facets,
        h,
        areas,
        grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_counts() {
        for (n, nodes, tris) in [(1, 4, 2), (2, 9, 8), (4, 25, 32)] {
            let m = MacroMesh::unit_square(n).unwrap();
            assert_eq!(m.nodes.len(), nodes);
            assert_eq!(m.elements.len(), tris);
        }
        assert!(MacroMesh::unit_square(0).is_err());
    }

    #[test]
    fn refine_two_triangle_square() {
        let fine = red_refine(&MacroMesh::unit_square(1).unwrap()).unwrap();
        assert_eq!(fine.n_elements(), 8);
        assert_eq!(fine.n_nodes(), 9);
        assert_eq!(fine.facets().len(), 16);
        assert_eq!(fine.facets().iter().filter(|f| f.is_boundary()).count(), 8);
        assert!((fine.h - 0.5 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn children_tile_parent() {
        let macro_mesh = MacroMesh::unit_square(2).unwrap();
        let fine = red_refine(&macro_mesh).unwrap();
        for m in 0..macro_mesh.n_elements() {
            let sum: f64 = fine.children(m).map(|k| fine.area(k)).sum();
            assert!((sum - macro_mesh.area(m)).abs() < 1e-14);
            assert!(fine.children(m).all(|k| fine.parent_macro[k] == m));
        }
        let total: f64 = fine.areas().iter().sum();
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn single_triangle_facet_classes() {
        let macro_mesh =
            MacroMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        let fine = red_refine(&macro_mesh).unwrap();
        let interior = fine
            .facets()
            .iter()
            .filter(|f| matches!(f.kind, FacetKind::MacroInterior(0)))
            .count();
        let boundary = fine.facets().iter().filter(|f| f.is_boundary()).count();
        assert_eq!((interior, boundary), (3, 6));
    }

    #[test]
    fn macro_interior_sets_have_three_facets() {
        let fine = red_refine(&MacroMesh::unit_square(2).unwrap()).unwrap();
        for m in 0..8 {
            let fi = fine.macro_interior_facets(m);
            assert_eq!(fi.len(), 3);
            for &f in fi {
                let facet = &fine.facets()[f];
                assert_eq!(fine.parent_macro[facet.plus], m);
                assert_eq!(fine.parent_macro[facet.minus.unwrap()], m);
            }
        }
    }

    #[test]
    fn normals_are_unit_and_outward_on_boundary() {
        let fine = red_refine(&MacroMesh::unit_square(3).unwrap()).unwrap();
        for f in fine.facets() {
            assert!((norm(f.normal) - 1.0).abs() < 1e-14);
            let c = fine.centroid(f.plus);
            assert!(dot(sub(f.midpoint(&fine.nodes), c), f.normal) > 0.0);
            if f.is_boundary() {
                let mid = f.midpoint(&fine.nodes);
                let outward = if mid[0] == 0.0 {
                    [-1.0, 0.0]
                } else if mid[0] == 1.0 {
                    [1.0, 0.0]
                } else if mid[1] == 0.0 {
                    [0.0, -1.0]
                } else {
                    [0.0, 1.0]
                };
                assert!((dot(f.normal, outward) - 1.0).abs() < 1e-14);
            } else {
                let (a, b) = (fine.nodes[f.nodes[0]], fine.nodes[f.nodes[1]]);
                let t = sub(b, a);
                assert!(f.nodes[0] < f.nodes[1]);
                assert!((f.normal[0] * f.length - t[1]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn interior_facets_have_two_neighbours() {
        let fine = red_refine(&MacroMesh::unit_square(3).unwrap()).unwrap();
        for f in fine.facets() {
            let both_boundary = fine.boundary_node[f.nodes[0]] && fine.boundary_node[f.nodes[1]];
            if !f.is_boundary() {
                assert_ne!(Some(f.plus), f.minus);
            } else {
                assert!(both_boundary);
            }
        }
    }

    #[test]
    fn macro_facets_contain_their_midpoint() {
        let fine = red_refine(&MacroMesh::unit_square(2).unwrap()).unwrap();
        for mf in &fine.macro_facets {
            let [a, b] = mf.nodes.map(|i| fine.nodes[i]);
            let m = fine.nodes[mf.midpoint];
            assert_eq!(m, [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
            assert_eq!(mf.is_boundary(), fine.boundary_node[mf.midpoint]);
        }
    }

    #[test]
    fn uniform_refinement_halves_h() {
        let h1 = red_refine(&MacroMesh::unit_square(2).unwrap()).unwrap().h;
        let h2 = red_refine(&MacroMesh::unit_square(4).unwrap()).unwrap().h;
        let big_h = MacroMesh::unit_square(2).unwrap().diameter();
        assert_eq!(h1, 0.5 * big_h);
        assert_eq!(h2, 0.5 * h1);
    }

    #[test]
    fn rejects_hanging_node() {
        // square split into a triangle on the left and two on the right
        // with a node in the middle of the shared vertical edge
        let nodes = vec![
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
            [0.5, 0.5],
            [1.0, 0.5],
        ];
        let elements = vec![[0, 1, 4], [1, 5, 4], [5, 2, 4], [0, 4, 3], [4, 2, 3]];
        assert!(MacroMesh::new(nodes.clone(), elements).is_ok());
        let bad = vec![[0, 1, 2], [0, 2, 3], [1, 5, 4]];
        assert!(MacroMesh::new(nodes, bad).is_err());
    }

    #[test]
    fn rejects_clockwise_element() {
        let err = MacroMesh::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]], vec![[0, 1, 2]]);
        assert!(matches!(err, Err(FemError::InvalidMesh(_))));
    }

    #[test]
    fn mesh_file_round_trip_is_exact() {
        let m = MacroMesh::unit_square(3).unwrap();
        let text = m.to_mesh_string();
        let back = MacroMesh::from_mesh_str(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_mesh_string(), text);
    }

    #[test]
    fn mesh_parse_errors_carry_line_numbers() {
        let err = MacroMesh::from_mesh_str("nodes 1\n0 0\nelements x\n").unwrap_err();
        assert!(matches!(err, FemError::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn flipping_normal_swaps_sides() {
        let mut fine = red_refine(&MacroMesh::unit_square(1).unwrap()).unwrap();
        let f = fine.macro_interior_facets(0)[0];
        let before = fine.facets()[f].clone();
        fine.flip_normal(f).unwrap();
        let after = &fine.facets()[f];
        assert_eq!(after.plus, before.minus.unwrap());
        assert_eq!(after.normal, [-before.normal[0], -before.normal[1]]);
        let q: Vec<f64> = (0..fine.n_elements()).map(|k| k as f64).collect();
        assert_eq!(after.jump(&q), -before.jump(&q));
        let b = fine.facets().iter().position(|f| f.is_boundary()).unwrap();
        assert!(fine.flip_normal(b).is_err());
    }
}

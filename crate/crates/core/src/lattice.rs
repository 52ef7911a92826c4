//! Heavy-hexagonal lattice topology.
//!
//! The heavy-hex lattice is a hexagonal lattice with an extra site decorating
//! every edge. It is bipartite: decoration sites (sublattice A) have degree 2,
//! hexagon vertices (sublattice B) have degree 3, and n_A/n_B = 3/2. Three
//! views of the lattice live here: the 5-site periodic unit cell driving the
//! infinite-state method, finite periodic clusters for the exact oracle, and
//! geodesic paths used by two-point correlators.

use std::fmt::Write as _;

use thiserror::Error;

/// Default cap on exact-oracle cluster sizes (number of spins).
pub const DEFAULT_SITE_CAP: usize = 20;

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("cluster of {sites} sites exceeds the size cap of {cap}")]
    SizeCapExceeded { sites: usize, cap: usize },
    #[error("cells_x and cells_y must both be at least 1")]
    EmptyCluster,
}

/// Which of the two sublattices a site belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sublattice {
    /// Decoration sites, coordination number 2.
    A,
    /// Hexagon vertices, coordination number 3.
    B,
}

impl std::fmt::Display for Sublattice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sublattice::A => write!(f, "A"),
            Sublattice::B => write!(f, "B"),
        }
    }
}

/// Undirected edge of the cell graph; always joins an A site to a B site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub a_site: usize,
    pub b_site: usize,
}

impl Edge {
    /// The endpoint that is not `site`.
    pub fn other(&self, site: usize) -> usize {
        if site == self.a_site {
            self.b_site
        } else {
            self.a_site
        }
    }

    pub fn touches(&self, site: usize) -> bool {
        site == self.a_site || site == self.b_site
    }
}

/// The 5-site periodic unit cell of the infinite heavy-hex lattice.
///
/// Sites 0..3 are the A sites (A1, A2, A3), sites 3 and 4 the B sites
/// (B1, B2). Each B site connects to all three A sites, giving the six
/// canonical edges
/// `{B1-A1, B1-A2, B1-A3, B2-A1, B2-A2, B2-A3}` in that order. This is the
/// minimal periodic cell whose message-passing equations coincide with those
/// of the infinite lattice: the fixed point sees only local degrees and edge
/// types.
#[derive(Debug, Clone)]
pub struct HeavyHexUnitCell {
    sublattice: [Sublattice; 5],
    edges: [Edge; 6],
    incident: [Vec<usize>; 5],
}

/// Number of sites in the unit cell.
pub const CELL_SITES: usize = 5;
/// Number of undirected edges in the unit cell.
pub const CELL_EDGES: usize = 6;

/// Builds the canonical 5-site, 6-edge periodic unit cell.
pub fn build_unit_cell() -> HeavyHexUnitCell {
    HeavyHexUnitCell::new()
}

impl HeavyHexUnitCell {
    pub fn new() -> Self {
        use Sublattice::{A, B};
        let sublattice = [A, A, A, B, B];
        let edges = [
            Edge { b_site: 3, a_site: 0 },
            Edge { b_site: 3, a_site: 1 },
            Edge { b_site: 3, a_site: 2 },
            Edge { b_site: 4, a_site: 0 },
            Edge { b_site: 4, a_site: 1 },
            Edge { b_site: 4, a_site: 2 },
        ];
        let mut incident: [Vec<usize>; 5] = Default::default();
        for (e, edge) in edges.iter().enumerate() {
            incident[edge.a_site].push(e);
            incident[edge.b_site].push(e);
        }
        Self { sublattice, edges, incident }
    }

    pub fn n_sites(&self) -> usize {
        CELL_SITES
    }

    pub fn n_edges(&self) -> usize {
        CELL_EDGES
    }

    pub fn sublattice(&self, site: usize) -> Sublattice {
        self.sublattice[site]
    }

    pub fn degree(&self, site: usize) -> usize {
        self.incident[site].len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, edge: usize) -> Edge {
        self.edges[edge]
    }

    /// Edge ids incident to `site`, in ascending order.
    pub fn incident_edges(&self, site: usize) -> &[usize] {
        &self.incident[site]
    }

    /// Sites of the given sublattice, in ascending order.
    pub fn sites_of(&self, which: Sublattice) -> Vec<usize> {
        (0..CELL_SITES).filter(|&s| self.sublattice[s] == which).collect()
    }

    /// The 12 directed edges as (edge id, destination site) pairs, ordered
    /// edge-major with the A-endpoint destination first.
    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(2 * CELL_EDGES);
        for (e, edge) in self.edges.iter().enumerate() {
            out.push((e, edge.a_site));
            out.push((e, edge.b_site));
        }
        out
    }

    /// Diagnostic graph dump: one `site_id,sublattice,degree` line per site
    /// followed by one `edge_id,site_a,site_b` line per edge.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for site in 0..CELL_SITES {
            let _ = writeln!(s, "{},{},{}", site, self.sublattice[site], self.degree(site));
        }
        for (e, edge) in self.edges.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", e, edge.a_site, edge.b_site);
        }
        s
    }
}

impl Default for HeavyHexUnitCell {
    fn default() -> Self {
        Self::new()
    }
}

/// A finite periodic tiling of the unit cell, used by the exact oracle.
#[derive(Debug, Clone)]
pub struct FiniteCluster {
    pub n_sites: usize,
    pub cells_x: usize,
    pub cells_y: usize,
    pub periodic: bool,
    sublattice: Vec<Sublattice>,
    edges: Vec<(usize, usize)>,
    incident: Vec<Vec<usize>>,
}

/// Builds a periodic cluster of `cells_x` x `cells_y` unit cells under the
/// default size cap.
pub fn build_finite_cluster(cells_x: usize, cells_y: usize) -> Result<FiniteCluster, LatticeError> {
    build_finite_cluster_capped(cells_x, cells_y, DEFAULT_SITE_CAP)
}

/// As [`build_finite_cluster`] with an explicit site cap.
pub fn build_finite_cluster_capped(
    cells_x: usize,
    cells_y: usize,
    cap: usize,
) -> Result<FiniteCluster, LatticeError> {
    if cells_x == 0 || cells_y == 0 {
        return Err(LatticeError::EmptyCluster);
    }
    let n_sites = 5 * cells_x * cells_y;
    if n_sites > cap {
        return Err(LatticeError::SizeCapExceeded { sites: n_sites, cap });
    }

    // Site layout mirrors the unit cell: within cell c the sites are
    // [A1, A2, A3, B1, B2] at indices 5c..5c+5. A1 decorates the in-cell
    // B1-B2 bond, A2 the bond to the left neighbour's B2 and A3 the bond to
    // the lower neighbour's B2 (periodic wrap on both axes).
    let cell = |x: usize, y: usize| -> usize { (y % cells_y) * cells_x + (x % cells_x) };
    let mut sublattice = vec![Sublattice::A; n_sites];
    let mut edges = Vec::with_capacity(6 * cells_x * cells_y);
    for y in 0..cells_y {
        for x in 0..cells_x {
            let c = cell(x, y);
            let base = 5 * c;
            sublattice[base + 3] = Sublattice::B;
            sublattice[base + 4] = Sublattice::B;
            let b1 = base + 3;
            let b2_here = base + 4;
            let b2_left = 5 * cell(x + cells_x - 1, y) + 4;
            let b2_down = 5 * cell(x, y + cells_y - 1) + 4;
            for (a_off, b_far) in [(0, b2_here), (1, b2_left), (2, b2_down)] {
                let a = base + a_off;
                edges.push((b1, a));
                edges.push((b_far, a));
            }
        }
    }

    let mut incident = vec![Vec::new(); n_sites];
    for (e, &(u, v)) in edges.iter().enumerate() {
        incident[u].push(e);
        incident[v].push(e);
    }

    Ok(FiniteCluster {
        n_sites,
        cells_x,
        cells_y,
        periodic: true,
        sublattice,
        edges,
        incident,
    })
}

impl FiniteCluster {
    pub fn sublattice(&self, site: usize) -> Sublattice {
        self.sublattice[site]
    }

    pub fn degree(&self, site: usize) -> usize {
        self.incident[site].len()
    }

    /// Undirected edges as site pairs (construction order).
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn sites_of(&self, which: Sublattice) -> Vec<usize> {
        (0..self.n_sites).filter(|&s| self.sublattice[s] == which).collect()
    }

    /// Neighbouring sites of `site` (with multiplicity, ascending).
    pub fn neighbors(&self, site: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.incident[site]
            .iter()
            .map(|&e| {
                let (u, v) = self.edges[e];
                if u == site {
                    v
                } else {
                    u
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Verifies bipartiteness and the degree pattern by full scan.
    pub fn check_invariants(&self) -> bool {
        self.edges.iter().all(|&(u, v)| self.sublattice[u] != self.sublattice[v])
            && (0..self.n_sites).all(|s| {
                self.degree(s)
                    == match self.sublattice[s] {
                        Sublattice::A => 2,
                        Sublattice::B => 3,
                    }
            })
    }

    pub fn dump(&self) -> String {
        let mut s = String::new();
        for site in 0..self.n_sites {
            let _ = writeln!(s, "{},{},{}", site, self.sublattice[site], self.degree(site));
        }
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", e, u, v);
        }
        s
    }
}

/// One node of a geodesic path: its concrete unit-cell site plus which of its
/// incident cell edges lie on the path.
#[derive(Debug, Clone)]
pub struct PathNode {
    pub site: usize,
    pub sublattice: Sublattice,
    /// Cell edge arriving from the previous node (None at the start).
    pub in_edge: Option<usize>,
    /// Cell edge leaving towards the next node (None at the end).
    pub out_edge: Option<usize>,
    /// Incident cell edges not on the path, ascending.
    pub off_path_edges: Vec<usize>,
}

/// A canonical shortest path of `d` edges on the infinite lattice, expressed
/// as a walk over the unit cell (the infinite lattice is a cover of the cell,
/// so a non-backtracking cell walk lifts to a lattice geodesic).
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    pub start: Sublattice,
    pub d: usize,
    pub nodes: Vec<PathNode>,
}

/// Canonical geodesic of length `d` starting on the given sublattice.
///
/// Among equal-length paths this picks the lexicographically smallest edge
/// sequence: at every step the smallest-id incident edge that does not
/// backtrack.
pub fn geodesic(start: Sublattice, d: usize) -> GeodesicPath {
    let cell = HeavyHexUnitCell::new();
    let start_site = match start {
        Sublattice::A => 0,
        Sublattice::B => 3,
    };
    geodesic_from(&cell, start_site, d)
}

/// Geodesic of length `d` starting from an explicit cell site; used to check
/// that correlators depend only on path roles, not the concrete walk.
pub fn geodesic_from(cell: &HeavyHexUnitCell, start_site: usize, d: usize) -> GeodesicPath {
    let mut nodes = Vec::with_capacity(d + 1);
    let mut site = start_site;
    let mut in_edge: Option<usize> = None;
    for step in 0..=d {
        let out_edge = if step == d {
            None
        } else {
            cell.incident_edges(site)
                .iter()
                .copied()
                .find(|&e| Some(e) != in_edge)
        };
        let off_path_edges: Vec<usize> = cell
            .incident_edges(site)
            .iter()
            .copied()
            .filter(|&e| Some(e) != in_edge && Some(e) != out_edge)
            .collect();
        nodes.push(PathNode {
            site,
            sublattice: cell.sublattice(site),
            in_edge,
            out_edge,
            off_path_edges,
        });
        if let Some(e) = out_edge {
            site = cell.edge(e).other(site);
            in_edge = Some(e);
        }
    }
    GeodesicPath { start: cell.sublattice(start_site), d, nodes }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_cell_degrees_and_ratio() {
        let cell = build_unit_cell();
        assert_eq!(cell.n_sites(), 5);
        assert_eq!(cell.n_edges(), 6);
        let a_sites = cell.sites_of(Sublattice::A);
        let b_sites = cell.sites_of(Sublattice::B);
        assert_eq!(a_sites.len(), 3);
        assert_eq!(b_sites.len(), 2);
        // n_A / n_B = 3/2 exactly
        assert_eq!(a_sites.len() * 2, b_sites.len() * 3);
        for &s in &a_sites {
            assert_eq!(cell.degree(s), 2);
        }
        for &s in &b_sites {
            assert_eq!(cell.degree(s), 3);
        }
        // bipartite, and each B sees all three A sites
        for e in cell.edges() {
            assert_eq!(cell.sublattice(e.a_site), Sublattice::A);
            assert_eq!(cell.sublattice(e.b_site), Sublattice::B);
        }
        for &b in &b_sites {
            let mut nbrs: Vec<usize> = cell
                .incident_edges(b)
                .iter()
                .map(|&e| cell.edge(e).other(b))
                .collect();
            nbrs.sort_unstable();
            assert_eq!(nbrs, a_sites);
        }
        assert_eq!(cell.directed_edges().len(), 12);
    }

    #[test]
    fn unit_cell_dump_format() {
        let cell = build_unit_cell();
        let dump = cell.dump();
        let lines: Vec<&str> = dump.lines().collect();
        assert_eq!(lines.len(), 11);
        assert_eq!(lines[0], "0,A,2");
        assert_eq!(lines[3], "3,B,3");
        assert_eq!(lines[5], "0,0,3");
    }

    #[test]
    fn finite_cluster_single_cell() {
        let c = build_finite_cluster(1, 1).unwrap();
        assert_eq!(c.n_sites, 5);
        assert_eq!(c.n_edges(), 6);
        assert!(c.check_invariants());
        for &b in &c.sites_of(Sublattice::B) {
            assert_eq!(c.degree(b), 3);
        }
    }

    #[test]
    fn finite_cluster_two_cells() {
        let c = build_finite_cluster(2, 1).unwrap();
        assert_eq!(c.n_sites, 10);
        assert_eq!(c.n_edges(), 12);
        assert_eq!(c.sites_of(Sublattice::A).len(), 6);
        assert_eq!(c.sites_of(Sublattice::B).len(), 4);
        assert!(c.check_invariants());
    }

    #[test]
    fn finite_cluster_ratio_holds_for_all_sizes() {
        for (cx, cy) in [(1, 1), (2, 1), (1, 2), (3, 1), (2, 2), (4, 1)] {
            let c = build_finite_cluster_capped(cx, cy, 100).unwrap();
            let na = c.sites_of(Sublattice::A).len();
            let nb = c.sites_of(Sublattice::B).len();
            assert_eq!(na * 2, nb * 3, "n_A/n_B must be 3/2 for {}x{}", cx, cy);
            assert!(c.check_invariants(), "invariants for {}x{}", cx, cy);
        }
    }

    #[test]
    fn finite_cluster_size_cap() {
        match build_finite_cluster(3, 3) {
            Err(LatticeError::SizeCapExceeded { sites: 45, cap: 20 }) => {}
            other => panic!("expected SizeCapExceeded, got {:?}", other),
        }
    }

    #[test]
    fn geodesic_zero_length() {
        let p = geodesic(Sublattice::A, 0);
        assert_eq!(p.nodes.len(), 1);
        assert_eq!(p.nodes[0].off_path_edges.len(), 2);
        let p = geodesic(Sublattice::B, 0);
        assert_eq!(p.nodes[0].off_path_edges.len(), 3);
    }

    #[test]
    fn geodesic_roles_alternate_and_offpath_counts() {
        let p = geodesic(Sublattice::A, 2);
        let roles: Vec<Sublattice> = p.nodes.iter().map(|n| n.sublattice).collect();
        assert_eq!(roles, vec![Sublattice::A, Sublattice::B, Sublattice::A]);
        assert_eq!(p.nodes[1].off_path_edges.len(), 1);

        let p = geodesic(Sublattice::B, 3);
        let roles: Vec<Sublattice> = p.nodes.iter().map(|n| n.sublattice).collect();
        assert_eq!(roles, vec![Sublattice::B, Sublattice::A, Sublattice::B, Sublattice::A]);
        assert_eq!(p.nodes[0].off_path_edges.len(), 2);
        assert_eq!(p.nodes[2].off_path_edges.len(), 1);

        for d in 0..=64 {
            for start in [Sublattice::A, Sublattice::B] {
                let p = geodesic(start, d);
                assert_eq!(p.nodes.len(), d + 1);
                for (k, node) in p.nodes.iter().enumerate() {
                    let expect = if (k % 2 == 0) == (start == Sublattice::A) {
                        Sublattice::A
                    } else {
                        Sublattice::B
                    };
                    assert_eq!(node.sublattice, expect);
                    let on_path = node.in_edge.iter().count() + node.out_edge.iter().count();
                    let degree = match node.sublattice {
                        Sublattice::A => 2,
                        Sublattice::B => 3,
                    };
                    assert_eq!(node.off_path_edges.len(), degree - on_path);
                    // interior A: no off-path bonds; interior B: exactly one
                    if k > 0 && k < d {
                        match node.sublattice {
                            Sublattice::A => assert!(node.off_path_edges.is_empty()),
                            Sublattice::B => assert_eq!(node.off_path_edges.len(), 1),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn geodesic_walk_never_backtracks() {
        for d in 1..=32 {
            let p = geodesic(Sublattice::A, d);
            for w in p.nodes.windows(2) {
                assert_eq!(w[0].out_edge, w[1].in_edge);
                if let (Some(i), Some(o)) = (w[1].in_edge, w[1].out_edge) {
                    assert_ne!(i, o, "backtracking at d={}", d);
                }
            }
        }
    }
}

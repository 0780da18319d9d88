//! R-tree over beams keyed by the spherical coordinates of their endpoints.
//!
//! All beams of a frame share one origin, so a beam is fully described by
//! `(r, phi, theta)` of its hit. A query point `p` that lies within `l` of a
//! beam then maps to an axis-aligned box in `(r, phi, theta)` space: the
//! beam must be at least `r_p - l` long and point within a small angular
//! cone around `p`. Boxes that cross the azimuth seam are split in two.
//!
//! The tree is bulk loaded once per frame with sort-tile-recursive packing
//! and never modified afterwards.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::MapError;
use crate::geometry::{to_spherical, Beam, Point3, SegmentDistance, SphericalCoord, Vector3};

/// Default multiplier on the query radius for the angular bounds.
pub const DEFAULT_INFLATION: f64 = 1.1;

const NODE_CAPACITY: usize = 16;
/// Traversal stack bound: enough for trees of 16^12 entries.
const STACK_LEN: usize = NODE_CAPACITY * 12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QueryBox {
    pub r_lo: f64,
    phi: [(f64, f64); 2],
    phi_len: usize,
    pub theta: (f64, f64),
}

impl QueryBox {
    fn full(r_lo: f64) -> Self {
        Self {
            r_lo,
            phi: [(-PI, PI), (0.0, 0.0)],
            phi_len: 1,
            theta: (-FRAC_PI_2, FRAC_PI_2),
        }
    }

    /// Azimuth intervals, closed on both ends. At most two.
    pub fn phi_intervals(&self) -> &[(f64, f64)] {
        &self.phi[..self.phi_len]
    }

    fn set_phi(&mut self, center: f64, half_width: f64) {
        if half_width >= PI {
            self.phi = [(-PI, PI), (0.0, 0.0)];
            self.phi_len = 1;
            return;
        }
        let lo = center - half_width;
        let hi = center + half_width;
        if lo < -PI {
            self.phi = [(lo + 2.0 * PI, PI), (-PI, hi)];
            self.phi_len = 2;
        } else if hi >= PI {
            self.phi = [(lo, PI), (-PI, hi - 2.0 * PI)];
            self.phi_len = 2;
        } else {
            self.phi = [(lo, hi), (0.0, 0.0)];
            self.phi_len = 1;
        }
    }

    pub fn is_full_sphere(&self) -> bool {
        self.phi_len == 1 && self.phi[0] == (-PI, PI) && self.theta == (-FRAC_PI_2, FRAC_PI_2)
    }

    #[inline]
    pub fn contains(&self, k: &SphericalCoord) -> bool {
        k.r >= self.r_lo
            && k.theta >= self.theta.0
            && k.theta <= self.theta.1
            && self
                .phi_intervals()
                .iter()
                .any(|&(lo, hi)| k.phi >= lo && k.phi <= hi)
    }
}

/// Box around query point `q` for radius `l`, with the angular extent
/// computed from `inflation * l`.
pub fn make_query_box(q: &SphericalCoord, l: f64, inflation: f64) -> QueryBox {
    let l_inf = inflation * l;
    let r_lo = (q.r - l_inf).max(0.0);
    if q.r < l_inf {
        return QueryBox::full(r_lo);
    }
    let theta_hw = (l_inf / q.r).min(FRAC_PI_2);
    let phi_hw = (l_inf / (q.r * q.theta.cos())).min(PI);
    let mut b = QueryBox::full(r_lo);
    b.theta = (
        (q.theta - theta_hw).max(-FRAC_PI_2),
        (q.theta + theta_hw).min(FRAC_PI_2),
    );
    b.set_phi(q.phi, if phi_hw.is_finite() { phi_hw } else { PI });
    b
}

/// Like [`make_query_box`], but widens any angular bound that the linear
/// small-angle estimate would not fully cover. A beam within `l` of `q`
/// deviates from `q`'s direction by at most `asin(l / r_q)`; the box keeps
/// its narrow form whenever that is inside `inflation * l / r_q`.
pub fn covering_query_box(q: &SphericalCoord, l: f64, inflation: f64) -> QueryBox {
    let mut b = make_query_box(q, l, inflation);
    if q.r < inflation * l {
        return b;
    }
    let a = l / q.r;
    if a >= 1.0 {
        return QueryBox::full(b.r_lo);
    }
    let cone = a.asin();
    let l_inf = inflation * l;
    if cone > l_inf / q.r {
        b.theta = (-FRAC_PI_2, FRAC_PI_2);
    }
    let cos_t = q.theta.cos();
    let phi_full = b.phi_len == 1 && b.phi[0] == (-PI, PI);
    if !phi_full {
        let reaches_pole = q.theta.abs() + cone >= FRAC_PI_2;
        if reaches_pole || (a / cos_t).min(1.0).asin() > l_inf / (q.r * cos_t) {
            b.set_phi(q.phi, PI);
        }
    }
    b
}

/// Query box with a single azimuth interval, bounds as `(r, phi, theta)`.
struct FlatBox {
    lo: [f64; 3],
    hi: [f64; 3],
}

impl FlatBox {
    #[inline]
    fn contains(&self, k: &[f64; 3]) -> bool {
        (k[0] >= self.lo[0])
            & (k[1] >= self.lo[1])
            & (k[1] <= self.hi[1])
            & (k[2] >= self.lo[2])
            & (k[2] <= self.hi[2])
    }

    #[inline]
    fn overlaps(&self, n: &Node) -> bool {
        (n.max[0] >= self.lo[0])
            & (n.min[1] <= self.hi[1])
            & (n.max[1] >= self.lo[1])
            & (n.min[2] <= self.hi[2])
            & (n.max[2] >= self.lo[2])
    }
}

#[derive(Clone, Copy, Debug)]
struct Node {
    /// `(r, phi, theta)` bounds.
    min: [f64; 3],
    max: [f64; 3],
    start: u32,
    end: u32,
}

impl Node {
    fn empty() -> Self {
        Self {
            min: [f64::INFINITY; 3],
            max: [f64::NEG_INFINITY; 3],
            start: 0,
            end: 0,
        }
    }

    fn expand(&mut self, p: &[f64; 3]) {
        self.expand_node(&Node {
            min: *p,
            max: *p,
            ..Node::empty()
        });
    }

    fn expand_node(&mut self, o: &Node) {
        for i in 0..3 {
            self.min[i] = self.min[i].min(o.min[i]);
            self.max[i] = self.max[i].max(o.max[i]);
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    key: [f64; 3],
    /// Endpoint minus origin, kept next to the key for exact filtering.
    delta: [f64; 3],
    len2: f64,
    beam: u32,
}

#[derive(Debug)]
pub struct SphericalRTree {
    origin: Point3,
    beams: Vec<Beam>,
    entries: Vec<Entry>,
    nodes: Vec<Node>,
    /// Ranges of `nodes` per level, leaves first.
    levels: Vec<(usize, usize)>,
    inflation: f64,
}

impl SphericalRTree {
    pub fn build(beams: Vec<Beam>, origin: Point3) -> Result<Self, MapError> {
        if let Some(b) = beams.iter().find(|b| *b.origin() != origin) {
            return Err(MapError::OriginMismatch {
                expected: origin.coords.into(),
                found: b.origin().coords.into(),
            });
        }
        let mut entries: Vec<Entry> = beams
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let s = b.spherical();
                let d = b.endpoint() - origin;
                Entry {
                    key: [s.r, s.phi, s.theta],
                    delta: [d.x, d.y, d.z],
                    len2: d.norm_squared(),
                    beam: i as u32,
                }
            })
            .collect();
        let (nodes, levels) = pack(&mut entries);
        Ok(Self {
            origin,
            beams,
            entries,
            nodes,
            levels,
            inflation: DEFAULT_INFLATION,
        })
    }

    pub fn with_inflation(mut self, inflation: f64) -> Self {
        assert!(inflation >= 1.0, "inflation must be >= 1");
        self.inflation = inflation;
        self
    }

    pub fn inflation(&self) -> f64 {
        self.inflation
    }

    pub fn origin(&self) -> &Point3 {
        &self.origin
    }

    pub fn beams(&self) -> &[Beam] {
        &self.beams
    }

    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    pub fn height(&self) -> usize {
        self.levels.len()
    }

    /// Calls `f` with the index of every beam whose key lies in `qb`.
    pub fn for_each_in_box<F: FnMut(usize)>(&self, qb: &QueryBox, mut f: F) {
        self.visit_box(qb, |e| f(e.beam as usize));
    }

    fn visit_box<F: FnMut(&Entry)>(&self, qb: &QueryBox, mut f: F) {
        // the azimuth intervals are disjoint, so each is walked on its own
        // with branch-free bounds tests
        for &(phi_lo, phi_hi) in qb.phi_intervals() {
            let b = FlatBox {
                lo: [qb.r_lo, phi_lo, qb.theta.0],
                hi: [f64::INFINITY, phi_hi, qb.theta.1],
            };
            self.visit_flat(&b, &mut f);
        }
    }

    fn visit_flat<F: FnMut(&Entry)>(&self, b: &FlatBox, f: &mut F) {
        let Some(&(root_lo, root_hi)) = self.levels.last() else {
            return;
        };
        // depth-first; each level adds at most NODE_CAPACITY pending nodes
        let mut stack = [(0u32, 0u32); STACK_LEN];
        let mut len = 0;
        let top = self.levels.len() - 1;
        for n in root_lo..root_hi {
            stack[len] = (n as u32, top as u32);
            len += 1;
        }
        while len > 0 {
            len -= 1;
            let (ni, level) = stack[len];
            let node = &self.nodes[ni as usize];
            if !b.overlaps(node) {
                continue;
            }
            let (s, e) = (node.start as usize, node.end as usize);
            if level == 0 {
                for entry in &self.entries[s..e] {
                    if b.contains(&entry.key) {
                        f(entry);
                    }
                }
            } else {
                for c in s..e {
                    stack[len] = (c as u32, level - 1);
                    len += 1;
                }
            }
        }
    }

    /// Calls `f(beam, distance)` for every beam whose segment passes strictly
    /// within `l` of `p`, in index traversal order.
    pub fn for_each_near<F: FnMut(usize, SegmentDistance)>(&self, p: &Point3, l: f64, mut f: F) {
        let ap = p - self.origin;
        let exact = |e: &Entry, f: &mut F| {
            let d = Vector3::new(e.delta[0], e.delta[1], e.delta[2]);
            let s = (ap.dot(&d) / e.len2).clamp(0.0, 1.0);
            let distance = (ap - d * s).norm();
            if distance < l {
                f(e.beam as usize, SegmentDistance { distance, s });
            }
        };
        match to_spherical(&self.origin, p) {
            Ok(q) => {
                let qb = covering_query_box(&q, l, self.inflation);
                self.visit_box(&qb, |e| exact(e, &mut f));
            }
            Err(_) => self.entries.iter().for_each(|e| exact(e, &mut f)),
        }
    }

    /// Calls `f` with every candidate beam that may lie within `l` of `p`.
    /// Candidates are a superset of the exact set and need exact filtering.
    pub fn for_each_candidate<F: FnMut(usize)>(&self, p: &Point3, l: f64, mut f: F) {
        match to_spherical(&self.origin, p) {
            Ok(q) => {
                let qb = covering_query_box(&q, l, self.inflation);
                self.for_each_in_box(&qb, f);
            }
            Err(_) => (0..self.beams.len()).for_each(&mut f),
        }
    }

    pub fn query_near(&self, p: &Point3, l: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_candidate(p, l, |i| out.push(i));
        out
    }
}

/// Reorders `items` so that consecutive runs of `m` form compact angular
/// tiles: slabs along phi, then runs along theta inside each slab. The slab
/// count is chosen so tiles have similar extents in both angles, measured as
/// arc length on the unit sphere. `key` returns `(phi, theta, tie_break)`.
fn str_order<T>(items: &mut [T], m: usize, key: impl Fn(&T) -> (f64, f64, u32) + Copy) {
    let n = items.len();
    let groups = n.div_ceil(m);
    if groups <= 1 {
        return;
    }
    let (mut phi_lo, mut phi_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut th_lo, mut th_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut cos_sum = 0.0;
    for it in items.iter() {
        let (p, t, _) = key(it);
        phi_lo = phi_lo.min(p);
        phi_hi = phi_hi.max(p);
        th_lo = th_lo.min(t);
        th_hi = th_hi.max(t);
        cos_sum += t.cos();
    }
    let span_phi = (phi_hi - phi_lo) * cos_sum / n as f64;
    let span_theta = th_hi - th_lo;
    let ratio = if span_phi > 0.0 {
        span_theta / span_phi
    } else {
        f64::INFINITY
    };
    let strips = ((groups as f64 * ratio).sqrt().round() as usize).clamp(1, groups);
    let slabs = groups.div_ceil(strips);
    let slab_len = m * groups.div_ceil(slabs);

    let by = |axis: usize| {
        move |x: &T, y: &T| {
            let (a, b) = (key(x), key(y));
            let (ka, kb) = if axis == 0 { (a.0, b.0) } else { (a.1, b.1) };
            ka.total_cmp(&kb).then(a.2.cmp(&b.2))
        }
    };
    items.sort_unstable_by(by(0));
    for slab in items.chunks_mut(slab_len) {
        slab.sort_unstable_by(by(1));
    }
}

fn node_key(n: &Node) -> (f64, f64, u32) {
    (
        0.5 * (n.min[1] + n.max[1]),
        0.5 * (n.min[2] + n.max[2]),
        n.start,
    )
}

/// Sort-tile-recursive packing over the angular coordinates, applied level
/// by level; `r` is only carried in the bounds. Returns nodes and per-level
/// ranges. Entries are reordered in place.
fn pack(entries: &mut [Entry]) -> (Vec<Node>, Vec<(usize, usize)>) {
    if entries.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let m = NODE_CAPACITY;
    str_order(entries, m, |e| (e.key[1], e.key[2], e.beam));

    let mut level: Vec<Node> = entries
        .chunks(m)
        .enumerate()
        .map(|(ci, chunk)| {
            let mut node = Node::empty();
            for e in chunk {
                node.expand(&e.key);
            }
            node.start = (ci * m) as u32;
            node.end = (ci * m + chunk.len()) as u32;
            node
        })
        .collect();
    let mut nodes = Vec::with_capacity(level.len() * 2);
    let mut levels = Vec::new();
    loop {
        str_order(&mut level, m, node_key);
        let lo = nodes.len();
        nodes.append(&mut level);
        let hi = nodes.len();
        levels.push((lo, hi));
        if hi - lo == 1 {
            break;
        }
        let mut c = lo;
        while c < hi {
            let end = (c + m).min(hi);
            let mut node = Node::empty();
            for child in &nodes[c..end] {
                node.expand_node(child);
            }
            node.start = c as u32;
            node.end = end as u32;
            level.push(node);
            c = end;
        }
    }
    (nodes, levels)
}

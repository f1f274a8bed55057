//! Planar permuted graphs, tube frames, substitution and composed orders.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::chains::Chain1D;
use crate::geometry::{segments_intersect, Point, Rect};
use crate::permute::{first_violation, Mode, Permutation, PermuteError};
use crate::plmap::{Direction, PLMap};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComposeError {
    #[error("connector {junction} meets branch {branch}: permutation is not admissible")]
    NotAdmissible { junction: usize, branch: usize },
    #[error("layout failed the intersection audit")]
    LayoutFailed,
    #[error("value {0} is not covered by the chain")]
    Uncovered(Rational),
    #[error("inner graph does not fit the tube: {0}")]
    DoesNotFit(String),
    #[error("inner connector sits on a nerve corner at parameter {0}")]
    CornerJunction(Rational),
    #[error("branch pair ({g_branch}, {f_branch}) of the composition is empty")]
    EmptyTopBranch { g_branch: usize, f_branch: usize },
    #[error(transparent)]
    Permute(#[from] PermuteError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Horizontal {
    pub branch: usize,
    pub height: usize,
    pub from: Rational,
    pub to: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertical {
    pub junction: usize,
    pub x: Rational,
    pub from_height: usize,
    pub to_height: usize,
}

/// A drawing of the flattened graph with branch `j` at height `p(j)` and
/// connector `j` moved to `offsets[j]`; entries `0` and `m+1` are the free ends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutedGraph {
    map: PLMap,
    perm: Permutation,
    chain: Chain1D,
    xs: Vec<Rational>,
}

impl PermutedGraph {
    pub fn map(&self) -> &PLMap {
        &self.map
    }

    pub fn permutation(&self) -> &Permutation {
        &self.perm
    }

    pub fn chain(&self) -> &Chain1D {
        &self.chain
    }

    /// Adjusted connector positions, free ends included.
    pub fn offsets(&self) -> &[Rational] {
        &self.xs
    }

    pub fn horizontals(&self) -> Vec<Horizontal> {
        (0..self.map.branch_count())
            .map(|j| Horizontal {
                branch: j,
                height: self.perm.height(j),
                from: self.xs[j].clone(),
                to: self.xs[j + 1].clone(),
            })
            .collect()
    }

    pub fn verticals(&self) -> Vec<Vertical> {
        (1..=self.map.top_index())
            .map(|j| Vertical {
                junction: j,
                x: self.xs[j].clone(),
                from_height: self.perm.height(j - 1),
                to_height: self.perm.height(j),
            })
            .collect()
    }

    /// Free end of the first horizontal.
    pub fn endpoint(&self) -> Point {
        Point::new(self.xs[0].clone(), height(self.perm.height(0)))
    }

    /// Vertices in traversal order: `E`, then alternately along horizontals
    /// and connectors.
    pub fn polyline(&self) -> Vec<Point> {
        let mut pts = vec![self.endpoint()];
        for j in 0..self.map.branch_count() {
            let h = height(self.perm.height(j));
            if j > 0 {
                pts.push(Point::new(self.xs[j].clone(), h.clone()));
            }
            pts.push(Point::new(self.xs[j + 1].clone(), h));
        }
        pts
    }

    /// Exact check that the drawing has no self-intersections.
    pub fn audit(&self) -> bool {
        polyline_is_simple(&self.polyline())
    }

    /// Every adjusted position shares a chain link with its original value.
    pub fn offsets_in_links(&self) -> bool {
        self.xs
            .iter()
            .zip(self.map.values())
            .all(|(x, v)| self.chain.share_link(x, v))
    }

    /// The drawing as a curve parametrized by the domain of the map.
    ///
    /// On `[0,1]` away from critical points the horizontal coordinate is
    /// `f(s)`; within `window` of a critical point the curve runs to the
    /// connector, climbs it and runs back. The ends run from the free ends
    /// of the drawing, and the stretches `[lo, 0]` and `[1, hi]` continue
    /// them outward by `reach`.
    #[allow(clippy::needless_range_loop)]
    pub fn parametrized(
        &self,
        lo: &Rational,
        hi: &Rational,
        window: &Rational,
        reach: &Rational,
    ) -> Result<Nerve, ComposeError> {
        let f = &self.map;
        let t = f.breakpoints();
        let m = f.top_index();
        let w = window;
        let third = w * Rational::new(1, 3);
        let (zero, one) = (Rational::zero(), Rational::one());
        if !(lo < &zero && hi > &one && w.is_positive()) {
            return Err(ComposeError::DoesNotFit(
                "parameter range must extend past [0,1]".into(),
            ));
        }
        let h = |j: usize| height(self.perm.height(j));
        let outward = |k: usize, forward: bool| -> Rational {
            let up = f.branch(k).direction() == Direction::Up;
            if up == forward {
                reach.clone()
            } else {
                -reach.clone()
            }
        };
        let at = |x: &Rational, y: Rational| Point::new(f.eval_unchecked(x), y);
        // vertices of f strictly between two window ends
        let bends =
            |from: &Rational, to: &Rational, y: Rational, params: &mut Vec<Rational>, points: &mut Vec<Point>| {
                for (x, v) in f.points().filter(|(x, _)| from < *x && *x < to) {
                    params.push(x.clone());
                    points.push(Point::new(v.clone(), y.clone()));
                }
            };
        let mut params = vec![lo.clone(), zero.clone(), w.clone()];
        let mut points = vec![
            Point::new(&self.xs[0] + outward(0, false), h(0)),
            Point::new(self.xs[0].clone(), h(0)),
            at(w, h(0)),
        ];
        let mut from = w.clone();
        for j in 1..=m {
            let a = &t[j] - w;
            let b = &t[j] + w;
            bends(&from, &a, h(j - 1), &mut params, &mut points);
            from = b.clone();
            params.extend([a.clone(), &t[j] - &third, &t[j] + &third, b.clone()]);
            points.extend([
                at(&a, h(j - 1)),
                Point::new(self.xs[j].clone(), h(j - 1)),
                Point::new(self.xs[j].clone(), h(j)),
                at(&b, h(j)),
            ]);
        }
        let last = &one - w;
        bends(&from, &last, h(m), &mut params, &mut points);
        params.extend([last.clone(), one.clone(), hi.clone()]);
        points.extend([
            at(&last, h(m)),
            Point::new(self.xs[m + 1].clone(), h(m)),
            Point::new(&self.xs[m + 1] + outward(m, true), h(m)),
        ]);

        if params.windows(2).any(|p| p[0] >= p[1]) {
            return Err(ComposeError::DoesNotFit("window overlaps a branch".into()));
        }
        // each horizontal run must move monotonically along its branch
        let mut k = 0;
        let mut run = vec![&points[0].x];
        for pair in points.windows(2) {
            if pair[0].y != pair[1].y {
                check_run(f, k, &run, w)?;
                k += 1;
                run.clear();
            }
            run.push(&pair[1].x);
        }
        check_run(f, k, &run, w)?;
        Ok(Nerve::new(params, points))
    }

    /// A quarter of the link slack at the free ends.
    pub fn end_reach(&self) -> Rational {
        let v = self.map.values();
        let slack = |x: &Rational| link_slack(&self.chain, x).expect("covered by the chain");
        slack(&v[0]).min(slack(&v[v.len() - 1])) * Rational::new(1, 4)
    }

    /// JSON fragment with exact coordinates.
    pub fn to_json(&self) -> Value {
        let seg = |a: &Point, b: &Point| json!([[a.x, a.y], [b.x, b.y]]);
        let pts = self.polyline();
        json!({
            "map": self.map.to_string(),
            "permutation": self.perm.images(),
            "endpoint": [self.endpoint().x, self.endpoint().y],
            "segments": pts.windows(2).map(|w| seg(&w[0], &w[1])).collect::<Vec<_>>(),
            "offsets": self.xs,
        })
    }
}

fn check_run(f: &PLMap, k: usize, run: &[&Rational], window: &Rational) -> Result<(), ComposeError> {
    let up = f.branch(k).direction() == Direction::Up;
    if run.windows(2).all(|w| if up { w[0] < w[1] } else { w[0] > w[1] }) {
        Ok(())
    } else {
        Err(ComposeError::DoesNotFit(format!(
            "connector offsets too large for window {window} on branch {k}"
        )))
    }
}

fn height(h: usize) -> Rational {
    Rational::from_int(h as i64)
}

/// Distance from `v` to the boundary of the union of links containing it.
pub fn link_slack(c: &Chain1D, v: &Rational) -> Option<Rational> {
    let idx = c.links_containing(v);
    let lo = &c.link(*idx.first()?).lo;
    let hi = &c.link(*idx.last()?).hi;
    Some((v - lo).min(hi - v))
}

/// Layout with offsets bounded by half the smallest link slack.
pub fn layout(f: &PLMap, p: &Permutation, c: &Chain1D) -> Result<PermutedGraph, ComposeError> {
    let mut delta: Option<Rational> = None;
    for v in f.values() {
        let s = link_slack(c, v).ok_or_else(|| ComposeError::Uncovered(v.clone()))?;
        delta = Some(match delta {
            Some(d) => d.min(s),
            None => s,
        });
    }
    layout_within(f, p, c, &(delta.expect("values") * Rational::half()))
}

/// Layout with every offset at most `max_offset`.
pub fn layout_within(
    f: &PLMap,
    p: &Permutation,
    c: &Chain1D,
    max_offset: &Rational,
) -> Result<PermutedGraph, ComposeError> {
    if p.len() != f.branch_count() {
        return Err(PermuteError::SizeMismatch {
            expected: f.branch_count(),
            got: p.len(),
        }
        .into());
    }
    if let Some((junction, branch)) = first_violation(f, p, Mode::Chain(c)) {
        return Err(ComposeError::NotAdmissible { junction, branch });
    }
    let mut slack = Vec::new();
    for v in f.values() {
        slack.push(link_slack(c, v).ok_or_else(|| ComposeError::Uncovered(v.clone()))?);
    }
    let graph = |xs: Vec<Rational>| PermutedGraph {
        map: f.clone(),
        perm: p.clone(),
        chain: c.clone(),
        xs,
    };
    let zero = graph(f.values().to_vec());
    if zero.audit() {
        return Ok(zero);
    }
    let half = Rational::half();
    let tight: Vec<Rational> = slack.iter().map(|s| (s * &half).min(max_offset.clone())).collect();
    let loose: Vec<Rational> = slack.iter().map(|s| s * &half).collect();
    for windows in [tight, loose] {
        if let Some(xs) = solve_offsets(f, p, &windows) {
            let g = graph(xs);
            if g.audit() {
                return Ok(g);
            }
        }
    }
    Err(ComposeError::LayoutFailed)
}

/// Order constraints between connectors and the horizontals they pass,
/// solved as a system of difference constraints.
fn solve_offsets(f: &PLMap, p: &Permutation, windows: &[Rational]) -> Option<Vec<Rational>> {
    let v = f.values();
    let n = v.len();
    let m = f.top_index();
    let gap = windows.iter().min()? / Rational::from_int(4 * n as i64);
    // edge (a, b, c): x_b <= x_a + c; node n is the origin
    let mut edges: Vec<(usize, usize, Rational)> = Vec::new();
    let below = |a: usize, b: usize, edges: &mut Vec<(usize, usize, Rational)>| {
        // x_a + gap <= x_b
        edges.push((b, a, -gap.clone()));
    };
    for k in 0..=m {
        if v[k] < v[k + 1] {
            below(k, k + 1, &mut edges);
        } else {
            below(k + 1, k, &mut edges);
        }
    }
    let inv = p.inverse();
    for j in 1..=m {
        let (a, b) = (p.height(j - 1), p.height(j));
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        for &k in &inv[lo + 1..hi] {
            let (min_end, max_end) = if v[k] < v[k + 1] { (k, k + 1) } else { (k + 1, k) };
            if &v[j] - &v[min_end] <= &v[max_end] - &v[j] {
                below(j, min_end, &mut edges);
            } else {
                below(max_end, j, &mut edges);
            }
        }
    }
    for i in 0..n {
        edges.push((n, i, &v[i] + &windows[i]));
        edges.push((i, n, -(&v[i] - &windows[i])));
    }
    let upper = shortest_from(n + 1, n, &edges)?;
    let reversed: Vec<_> = edges.iter().map(|(a, b, c)| (*b, *a, c.clone())).collect();
    let lower = shortest_from(n + 1, n, &reversed)?;
    Some((0..n).map(|i| (&upper[i] - &lower[i]) * Rational::half()).collect())
}

/// Bellman-Ford distances; `None` on a negative cycle.
fn shortest_from(nodes: usize, src: usize, edges: &[(usize, usize, Rational)]) -> Option<Vec<Rational>> {
    let mut dist: Vec<Option<Rational>> = vec![None; nodes];
    dist[src] = Some(Rational::zero());
    for round in 0..=nodes {
        let mut changed = false;
        for (a, b, c) in edges {
            if let Some(da) = &dist[*a] {
                let cand = da + c;
                if dist[*b].as_ref().is_none_or(|db| &cand < db) {
                    dist[*b] = Some(cand);
                    changed = true;
                }
            }
        }
        if !changed {
            return dist.into_iter().collect();
        }
        if round == nodes {
            return None;
        }
    }
    None
}

/// Closed polyline segments meet only where consecutive segments share a
/// vertex, and no segment folds back onto its predecessor.
pub fn polyline_is_simple(pts: &[Point]) -> bool {
    let n = pts.len();
    if n < 2 {
        return true;
    }
    for i in 0..n - 1 {
        if pts[i] == pts[i + 1] {
            return false;
        }
    }
    for i in 0..n.saturating_sub(2) {
        let (a, b, c) = (&pts[i], &pts[i + 1], &pts[i + 2]);
        let cross = (&b.x - &a.x) * (&c.y - &b.y) - (&b.y - &a.y) * (&c.x - &b.x);
        let dot = (&b.x - &a.x) * (&c.x - &b.x) + (&b.y - &a.y) * (&c.y - &b.y);
        if cross.is_zero() && dot.is_negative() {
            return false;
        }
    }
    let mut boxes: Vec<(Rect, usize)> = (0..n - 1).map(|i| (Rect::spanning(&pts[i], &pts[i + 1]), i)).collect();
    boxes.sort_by(|a, b| a.0.x0.cmp(&b.0.x0));
    for (bi, (r, i)) in boxes.iter().enumerate() {
        for (s, j) in &boxes[bi + 1..] {
            if s.x0 > r.x1 {
                break;
            }
            if i.abs_diff(*j) < 2 || !r.meets(s) {
                continue;
            }
            if segments_intersect(&pts[*i], &pts[i + 1], &pts[*j], &pts[j + 1]) {
                return false;
            }
        }
    }
    true
}

/// Where a parameter falls on a nerve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Segment(usize),
    Vertex(usize),
}

/// A planar polyline with strictly increasing vertex parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Nerve {
    params: Vec<Rational>,
    points: Vec<Point>,
}

impl Nerve {
    pub fn new(params: Vec<Rational>, points: Vec<Point>) -> Nerve {
        assert_eq!(params.len(), points.len());
        assert!(params.len() >= 2);
        assert!(params.windows(2).all(|w| w[0] < w[1]), "parameters must increase");
        Nerve { params, points }
    }

    pub fn params(&self) -> &[Rational] {
        &self.params
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn domain(&self) -> (&Rational, &Rational) {
        (&self.params[0], self.params.last().unwrap())
    }

    pub fn segment_count(&self) -> usize {
        self.points.len() - 1
    }

    pub fn locate(&self, s: &Rational) -> Option<Location> {
        let (lo, hi) = self.domain();
        if s < lo || s > hi {
            return None;
        }
        let i = self.params.partition_point(|p| p < s);
        if i < self.params.len() && &self.params[i] == s {
            Some(Location::Vertex(i))
        } else {
            Some(Location::Segment(i - 1))
        }
    }

    pub fn at(&self, s: &Rational) -> Point {
        match self.locate(s).expect("parameter inside the domain") {
            Location::Vertex(i) => self.points[i].clone(),
            Location::Segment(i) => {
                let t = (s - &self.params[i]) / (&self.params[i + 1] - &self.params[i]);
                self.points[i].lerp(&self.points[i + 1], &t)
            }
        }
    }

    /// The part of the nerve with parameters in `[a, b]`.
    pub fn restrict(&self, a: &Rational, b: &Rational) -> (Vec<Rational>, Vec<Point>) {
        let (lo, hi) = self.domain();
        let a = a.clone().max(lo.clone());
        let b = b.clone().min(hi.clone());
        let mut params = vec![a.clone()];
        let mut points = vec![self.at(&a)];
        let first = self.params.partition_point(|p| p <= &a);
        let last = self.params.partition_point(|p| p < &b).max(first);
        params.extend_from_slice(&self.params[first..last]);
        points.extend_from_slice(&self.points[first..last]);
        if b > a {
            params.push(b.clone());
            points.push(self.at(&b));
        }
        (params, points)
    }

    pub fn is_simple(&self) -> bool {
        polyline_is_simple(&self.points)
    }

    /// Unit direction of an axis-parallel segment.
    pub fn direction(&self, seg: usize) -> (i32, i32) {
        let a = &self.points[seg];
        let b = &self.points[seg + 1];
        match (a.x == b.x, a.y == b.y) {
            (false, true) => ((&b.x - &a.x).signum(), 0),
            (true, false) => (0, (&b.y - &a.y).signum()),
            _ => panic!("nerve segment {seg} is not axis-parallel"),
        }
    }

    /// Indices of interior vertices where the direction changes.
    pub fn turns(&self) -> Vec<usize> {
        (1..self.points.len() - 1)
            .filter(|&i| self.direction(i - 1) != self.direction(i))
            .collect()
    }

    /// Turning vertices plus both ends.
    pub fn corners(&self) -> Vec<Point> {
        let mut out = vec![self.points[0].clone()];
        out.extend(self.turns().into_iter().map(|i| self.points[i].clone()));
        out.push(self.points.last().unwrap().clone());
        out
    }

    /// Smallest Chebyshev distance between non-consecutive straight runs.
    pub fn separation(&self) -> Option<Rational> {
        let c = self.corners();
        let runs: Vec<Rect> = c.windows(2).map(|w| Rect::spanning(&w[0], &w[1])).collect();
        let mut best: Option<Rational> = None;
        for i in 0..runs.len() {
            for j in i + 2..runs.len() {
                let d = runs[i].distance(&runs[j]);
                if best.as_ref().is_none_or(|b| &d < b) {
                    best = Some(d);
                }
            }
        }
        best
    }
}

/// A nerve with a cross-section half-width; `sign` flips which side of the
/// traversal receives the upper part of an inner graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TubeFrame {
    pub nerve: Nerve,
    pub half_width: Rational,
    pub sign: i32,
}

impl TubeFrame {
    pub fn straight(lo: Rational, hi: Rational, half_width: Rational) -> TubeFrame {
        let points = vec![
            Point::new(lo.clone(), Rational::zero()),
            Point::new(hi.clone(), Rational::zero()),
        ];
        TubeFrame {
            nerve: Nerve::new(vec![lo, hi], points),
            half_width,
            sign: 1,
        }
    }

    fn normal(&self, seg: usize) -> (i32, i32) {
        let (dx, dy) = self.nerve.direction(seg);
        (-dy * self.sign, dx * self.sign)
    }

    /// The point at parameter `x` pushed `d` along the oriented normal;
    /// at a corner the push follows the miter.
    pub fn place(&self, x: &Rational, d: &Rational) -> Result<Point, ComposeError> {
        let loc = self
            .nerve
            .locate(x)
            .ok_or_else(|| ComposeError::DoesNotFit(format!("parameter {x} outside the tube")))?;
        let (nx, ny, base) = match loc {
            Location::Segment(i) => {
                let (nx, ny) = self.normal(i);
                (
                    Rational::from_int(nx as i64),
                    Rational::from_int(ny as i64),
                    self.nerve.at(x),
                )
            }
            Location::Vertex(i) => {
                let last = self.nerve.segment_count() - 1;
                let n1 = self.normal(i.saturating_sub(1).min(last));
                let n2 = self.normal(i.min(last));
                let scale = Rational::from_int(1 + (n1.0 * n2.0 + n1.1 * n2.1) as i64);
                (
                    Rational::from_int((n1.0 + n2.0) as i64) / &scale,
                    Rational::from_int((n1.1 + n2.1) as i64) / &scale,
                    self.nerve.points[i].clone(),
                )
            }
        };
        Ok(base.add(&(d * nx), &(d * ny)))
    }

    /// Parameters of turning vertices.
    pub fn corner_params(&self) -> Vec<Rational> {
        self.nerve
            .turns()
            .into_iter()
            .map(|i| self.nerve.params[i].clone())
            .collect()
    }

    /// Rectangles covering the tube over parameters `[a, b]`: each segment
    /// piece thickened across, plus the outer quadrant at every turn strictly
    /// inside. The ends are cut square.
    pub fn region(&self, a: &Rational, b: &Rational) -> Vec<Rect> {
        let eps = &self.half_width;
        let zero = Rational::zero();
        let (_, points) = self.nerve.restrict(a, b);
        let mut rects = Vec::new();
        for w in points.windows(2) {
            let r = Rect::spanning(&w[0], &w[1]);
            if w[0].y == w[1].y {
                rects.push(r.grow(&zero, eps));
            } else {
                rects.push(r.grow(eps, &zero));
            }
        }
        let unit = |p: &Point, q: &Point| ((&q.x - &p.x).signum(), (&q.y - &p.y).signum());
        for w in points.windows(3) {
            let d1 = unit(&w[0], &w[1]);
            let d2 = unit(&w[1], &w[2]);
            if d1 != d2 {
                let dx = Rational::from_int((d1.0 - d2.0) as i64) * eps;
                let dy = Rational::from_int((d1.1 - d2.1) as i64) * eps;
                rects.push(Rect::spanning(&w[1], &w[1].add(&dx, &dy)));
            }
        }
        rects
    }
}

/// Map an inner curve with coordinates `(x, height)` into the tube:
/// `x` becomes the nerve parameter and heights `0..=top` spread across the
/// middle half of the cross-section. Every outer vertex crossed by an inner
/// horizontal becomes a vertex, so the result stays parametrized by the
/// inner coordinate through the outer one.
pub fn substitute(outer: &TubeFrame, inner: &Nerve, top: usize) -> Result<Nerve, ComposeError> {
    let depth = |y: &Rational| -> Rational {
        if top == 0 {
            Rational::zero()
        } else {
            &outer.half_width * (y / Rational::from_int(top as i64) - Rational::half())
        }
    };
    let corners = outer.corner_params();
    let (olo, ohi) = outer.nerve.domain();
    let breaks: Vec<&Rational> = outer.nerve.params.iter().filter(|p| olo < *p && *p < ohi).collect();
    let mut params = vec![inner.params[0].clone()];
    let first = &inner.points[0];
    let mut points = vec![outer.place(&first.x, &depth(&first.y))?];
    for i in 0..inner.segment_count() {
        let (a, b) = (&inner.points[i], &inner.points[i + 1]);
        let (sa, sb) = (&inner.params[i], &inner.params[i + 1]);
        if a.y == b.y {
            let d = depth(&a.y);
            let ascending = a.x < b.x;
            let mut between: Vec<&Rational> = breaks
                .iter()
                .copied()
                .filter(|c| {
                    if ascending {
                        &a.x < *c && *c < &b.x
                    } else {
                        &b.x < *c && *c < &a.x
                    }
                })
                .collect();
            if !ascending {
                between.reverse();
            }
            for c in between {
                let s = sa + (c - &a.x) / (&b.x - &a.x) * (sb - sa);
                params.push(s);
                points.push(outer.place(c, &d)?);
            }
            params.push(sb.clone());
            points.push(outer.place(&b.x, &d)?);
        } else if a.x == b.x {
            if corners.contains(&a.x) {
                return Err(ComposeError::CornerJunction(a.x.clone()));
            }
            params.push(sb.clone());
            points.push(outer.place(&b.x, &depth(&b.y))?);
        } else {
            return Err(ComposeError::DoesNotFit("inner segment is not axis-parallel".into()));
        }
    }
    let nerve = Nerve::new(params, points);
    if !nerve.is_simple() {
        return Err(ComposeError::DoesNotFit("substituted curve crosses itself".into()));
    }
    Ok(nerve)
}

/// Smallest positive Chebyshev distance from a turning vertex of `nerve`
/// to another vertex of it or to the nerve point at one of `xs`.
pub fn corner_clearance(nerve: &Nerve, xs: &[Rational]) -> Option<Rational> {
    let turns: Vec<&Point> = nerve.turns().into_iter().map(|i| &nerve.points[i]).collect();
    let extra: Vec<Point> = xs
        .iter()
        .filter(|x| nerve.locate(x).is_some())
        .map(|x| nerve.at(x))
        .collect();
    nerve
        .points
        .iter()
        .chain(&extra)
        .flat_map(|p| turns.iter().map(move |c| (&p.x - &c.x).abs().max((&p.y - &c.y).abs())))
        .filter(|d| d.is_positive())
        .min()
}

/// A monotone piece of `f∘g`: the part of branch `g_branch` of `g` mapped
/// into branch `f_branch` of `f`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Piece {
    pub g_branch: usize,
    pub f_branch: usize,
    pub lo: Rational,
    pub hi: Rational,
}

pub fn composite_pieces(f: &PLMap, g: &PLMap) -> Vec<Piece> {
    let inner_crit = &f.breakpoints()[1..f.breakpoints().len() - 1];
    let mut out = Vec::new();
    for b in g.branches() {
        let mut cuts = vec![b.lo.clone(), b.hi.clone()];
        for t in inner_crit {
            if let Some(x) = b.solve(t) {
                if b.lo < x && x < b.hi {
                    cuts.push(x);
                }
            }
        }
        cuts.sort();
        cuts.dedup();
        for w in cuts.windows(2) {
            let mid = g.eval_unchecked(&w[0].mid(&w[1]));
            out.push(Piece {
                g_branch: b.index,
                f_branch: f.branch_of(&mid),
                lo: w[0].clone(),
                hi: w[1].clone(),
            });
        }
    }
    out
}

/// The composed order on the pieces of `f∘g`, with the geometry it came from.
#[derive(Debug, Clone)]
pub struct Star {
    pub pieces: Vec<Piece>,
    pub permutation: Permutation,
    pub outer: PermutedGraph,
    pub inner: PermutedGraph,
    pub nerve: Nerve,
}

impl Star {
    /// `(g_branch, f_branch)` of the highest piece.
    pub fn top(&self) -> (usize, usize) {
        let p = &self.pieces[self.permutation.top()];
        (p.g_branch, p.f_branch)
    }
}

pub(crate) fn min_slope(f: &PLMap) -> Rational {
    f.branches().map(|b| b.min_slope()).min().expect("branches")
}

pub(crate) fn min_branch_length(f: &PLMap) -> Rational {
    f.branches().map(|b| &b.hi - &b.lo).min().expect("branches")
}

pub(crate) fn chain_span(c: &Chain1D) -> (Rational, Rational) {
    (c.links()[0].lo.clone(), c.links()[c.len() - 1].hi.clone())
}

/// Largest window `w ≤ bound` whose nerve vertices avoid `avoid`.
pub fn window_avoiding(f: &PLMap, bound: &Rational, avoid: &[Rational]) -> Rational {
    let mut w = bound.clone();
    let t = f.breakpoints();
    let third = Rational::new(1, 3);
    loop {
        let clash = t[1..t.len() - 1].iter().any(|tj| {
            [&w, &(&w * &third)].iter().any(|r| {
                let a = tj - *r;
                let b = tj + *r;
                avoid.contains(&a) || avoid.contains(&b)
            })
        });
        if !clash {
            return w;
        }
        w = w * Rational::new(7, 8);
    }
}

/// Build the layout of `f` under `p1`, thicken it, substitute the layout of
/// `g` under `p2`, and rank the pieces of `f∘g` by planar height.
pub fn star(
    p1: &Permutation,
    p2: &Permutation,
    f: &PLMap,
    g: &PLMap,
    c1: &Chain1D,
    c2: &Chain1D,
) -> Result<Star, ComposeError> {
    let pieces = composite_pieces(f, g);
    let quarter = Rational::new(1, 4);

    let piece_len = pieces.iter().map(|p| &p.hi - &p.lo).min().expect("pieces");
    let piece_img = pieces
        .iter()
        .map(|p| (g.eval_unchecked(&p.hi) - g.eval_unchecked(&p.lo)).abs())
        .min()
        .expect("pieces");

    let wg = piece_len.min(min_branch_length(g)) * &quarter;
    let dg = min_slope(g) * &wg * &quarter;
    let inner = layout_within(g, p2, c2, &dg)?;
    let g_curve = inner.parametrized(&-&wg, &(Rational::one() + &wg), &wg, &dg.min(inner.end_reach()))?;
    let g_xs: Vec<Rational> = g_curve.points().iter().map(|p| p.x.clone()).collect();

    let bound = piece_img.min(min_branch_length(f)) * &quarter;
    let wf = window_avoiding(f, &bound, &g_xs);
    let df = min_slope(f) * &wf * &quarter;
    let outer = layout_within(f, p1, c1, &df)?;

    let (lo1, hi1) = chain_span(c1);
    let (lo2, hi2) = chain_span(c2);
    let base = TubeFrame::straight(lo1, hi1, Rational::new(1, 8));
    let f_curve = outer.parametrized(&lo2, &hi2, &wf, &df.min(outer.end_reach()))?;
    let nerve1 = substitute(&base, &f_curve, f.top_index())?;

    let sign = match f.branch(p1.top()).direction() {
        Direction::Up => 1,
        Direction::Down => -1,
    };
    // inner vertices must stay clear of the corners they pass near
    let corner_gap = corner_clearance(&nerve1, &g_xs);
    let mut eps = &base.half_width * &quarter;
    for bound in [nerve1.separation(), corner_gap].into_iter().flatten() {
        eps = eps.min(bound * &quarter);
    }
    let frame = TubeFrame {
        nerve: nerve1,
        half_width: eps,
        sign,
    };
    let nerve = substitute(&frame, &g_curve, g.top_index())?;

    let ys: Vec<Rational> = pieces.iter().map(|p| nerve.at(&p.lo.mid(&p.hi)).y).collect();
    let mut order: Vec<usize> = (0..pieces.len()).collect();
    order.sort_by(|a, b| ys[*a].cmp(&ys[*b]));
    let mut heights = vec![0; pieces.len()];
    for (h, &i) in order.iter().enumerate() {
        heights[i] = h;
    }
    Ok(Star {
        pieces,
        permutation: Permutation::new(heights)?,
        outer,
        inner,
        nerve,
    })
}

/// `(T2, T1)` with `p2(T2)` and `p1(T1)` maximal.
pub fn top_branch(f: &PLMap, g: &PLMap, p1: &Permutation, p2: &Permutation) -> Result<(usize, usize), ComposeError> {
    let (t2, t1) = (p2.top(), p1.top());
    if composite_pieces(f, g)
        .iter()
        .any(|p| p.g_branch == t2 && p.f_branch == t1)
    {
        Ok((t2, t1))
    } else {
        Err(ComposeError::EmptyTopBranch {
            g_branch: t2,
            f_branch: t1,
        })
    }
}

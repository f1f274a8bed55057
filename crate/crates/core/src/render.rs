//! Nested tube scenes for embedding plans: construction, nesting audit,
//! ray probes and SVG output.

use std::fmt::Write as _;

use serde_json::{json, Value};
use thiserror::Error;

use crate::access::EmbeddingPlan;
use crate::chains::{natural_refinement, uniform_chain, Chain1D, ChainError, Pattern};
use crate::compose::{
    chain_span, corner_clearance, layout_within, min_branch_length, min_slope, substitute, ComposeError, Location,
    Nerve, TubeFrame,
};
use crate::geometry::{bounding_box, segments_intersect, union_inside_interior, upward_ray_clear, Point, Rect};
use crate::plmap::PLMap;
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("scene does not fit: {0}")]
    DoesNotFit(String),
    #[error("mark {0:?} is not on the deepest nerve")]
    MarkNotOnNerve(Point),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
}

/// One level of a scene: a chain on the level's coordinate and the tube
/// whose links are the thickened nerve over each chain link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneLevel {
    pub chain: Chain1D,
    /// Nerve, half-width, and the orientation used for the next level.
    pub frame: TubeFrame,
    /// Half-width asked for by the plan before clamping.
    pub requested_half_width: Rational,
    /// Interval pattern of this level's chain in the previous one.
    pub pattern: Option<Pattern>,
}

impl SceneLevel {
    pub fn nerve(&self) -> &Nerve {
        &self.frame.nerve
    }

    pub fn half_width(&self) -> &Rational {
        &self.frame.half_width
    }

    pub fn was_clamped(&self) -> bool {
        self.frame.half_width < self.requested_half_width
    }

    /// Planar tube links, each a union of closed rectangles.
    pub fn links(&self) -> Vec<Vec<Rect>> {
        self.chain
            .links()
            .iter()
            .map(|l| self.frame.region(&l.lo, &l.hi))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mark {
    pub label: String,
    /// Coordinate on the deepest level.
    pub param: Rational,
    pub point: Point,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneGraph {
    pub levels: Vec<SceneLevel>,
    pub marks: Vec<Mark>,
    pub plan: EmbeddingPlan,
}

impl SceneGraph {
    pub fn deepest(&self) -> Option<&SceneLevel> {
        self.levels.last()
    }

    pub fn to_json(&self) -> Value {
        let pt = |p: &Point| json!([p.x, p.y]);
        json!({
            "levels": self.levels.iter().map(|l| json!({
                "chain": l.chain.links().iter().map(|k| json!([k.lo, k.hi])).collect::<Vec<_>>(),
                "half_width": l.frame.half_width,
                "requested_half_width": l.requested_half_width,
                "sign": l.frame.sign,
                "nerve": {
                    "params": l.nerve().params(),
                    "points": l.nerve().points().iter().map(pt).collect::<Vec<_>>(),
                },
                "pattern": l.pattern.as_ref().map(|p| p.entries().to_vec()),
            })).collect::<Vec<_>>(),
            "marks": self.marks.iter().map(|m| json!({
                "label": m.label,
                "param": m.param,
                "point": pt(&m.point),
            })).collect::<Vec<_>>(),
            "plan": self.plan.to_json(),
        })
    }
}

/// Mesh bound that keeps every branch image of `f` out of a single link.
fn image_bound(f: &PLMap) -> Rational {
    f.min_branch_diameter() * Rational::half()
}

fn base_chain(first: Option<&PLMap>, size: Option<usize>) -> Chain1D {
    let mut n = size.unwrap_or(4).max(1);
    if let Some(f) = first {
        let bound = image_bound(f);
        while Rational::new(3, 2 * n as i64) > bound {
            n *= 2;
        }
    }
    uniform_chain(n)
}

/// Smallest positive distance from `v` to any of `ends`.
fn gap_to(v: &Rational, ends: &[Rational]) -> Option<Rational> {
    ends.iter().map(|e| (v - e).abs()).filter(|d| d.is_positive()).min()
}

/// No end separates `a` from the reference value `v` or sits on `a` alone.
fn same_side(a: &Rational, v: &Rational, ends: &[Rational]) -> bool {
    ends.iter().all(|e| v == e || (a - e).signum() == (v - e).signum())
}

fn link_ends(c: &Chain1D) -> Vec<Rational> {
    c.links().iter().flat_map(|l| [l.lo.clone(), l.hi.clone()]).collect()
}

/// Parameters of the nerve's turning vertices.
fn turn_params(n: &Nerve) -> Vec<Rational> {
    n.turns().into_iter().map(|i| n.params()[i].clone()).collect()
}

/// Horizontal direction of travel at parameter `s`, or `1` on a vertical.
fn travel_sign(n: &Nerve, s: &Rational) -> i32 {
    let seg = match n.locate(s) {
        Some(Location::Segment(i)) => i,
        Some(Location::Vertex(i)) => i.min(n.segment_count() - 1),
        None => return 1,
    };
    match n.direction(seg) {
        (0, _) => 1,
        (dx, _) => dx,
    }
}

/// The drawing of stage `f` under `p` as a curve in the coordinate of the
/// fine chain, with its horizontal coordinate in the coarse chain.
fn stage_curve(
    f: &PLMap,
    p: &crate::permute::Permutation,
    coarse: &Chain1D,
    fine: &Chain1D,
    avoid: &[Rational],
    marks: &[Rational],
) -> Result<Nerve, RenderError> {
    let t = f.breakpoints();
    let m = f.top_index();
    let inner = &t[1..=m];
    let quarter = Rational::new(1, 4);
    let half = Rational::half();

    // windows stay inside the fine links around each breakpoint
    let mut w = min_branch_length(f) * &quarter;
    let fine_ends = link_ends(fine);
    for tj in t {
        if let Some(d) = gap_to(tj, &fine_ends) {
            w = w.min(d * &half);
        }
        for x in marks {
            if let Some(d) = gap_to(x, std::slice::from_ref(tj)) {
                w = w.min(d * &half);
            }
        }
    }
    let hits = |x: &Rational| avoid.contains(&f.eval_unchecked(x));
    let seven_eighths = Rational::new(7, 8);
    while inner.iter().any(|tj| hits(&(tj - &w)) || hits(&(tj + &w))) || hits(&w) || hits(&(Rational::one() - &w)) {
        w = w * &seven_eighths;
    }

    // connector and end displacements keep every coarse link verdict
    let ends = link_ends(coarse);
    let v = f.values();
    let one = Rational::one();
    let lambda = inner_values(v)
        .filter_map(|x| gap_to(x, &ends))
        .min()
        .unwrap_or(one.clone());
    let mu = [&v[0], &v[m + 1]]
        .into_iter()
        .filter_map(|x| gap_to(x, &ends))
        .min()
        .unwrap_or(one);
    let delta = (min_slope(f) * &w * &quarter).min(&lambda * &half).min(&mu * &quarter);
    let graph = layout_within(f, p, coarse, &delta)?;
    let xs = graph.offsets();
    if let Some(j) = (0..=m + 1).find(|&j| !same_side(&xs[j], &v[j], &ends)) {
        return Err(RenderError::DoesNotFit(format!(
            "connector {j} moved across a link boundary"
        )));
    }

    let fits = |rho: &Rational| {
        let tips = [(&xs[0], &v[0]), (&xs[m + 1], &v[m + 1])];
        tips.iter().all(|(x, v)| {
            [*x - rho, *x + rho]
                .iter()
                .all(|t| !avoid.contains(t) && same_side(t, v, &ends))
        })
    };
    let mut rho = std::iter::successors(Some((&mu * &quarter).min(graph.end_reach())), |r| Some(r * &half))
        .take(HALVINGS)
        .find(|r| fits(r))
        .ok_or_else(|| RenderError::DoesNotFit("no room to extend the free ends".into()))?;

    // the free ends may not run into a nearby connector
    let (lo, hi) = chain_span(fine);
    for _ in 0..HALVINGS {
        let curve = graph.parametrized(&lo, &hi, &w, &rho)?;
        if curve.is_simple() {
            return Ok(curve);
        }
        rho = rho * &half;
    }
    Err(RenderError::DoesNotFit(
        "free ends cannot extend past the drawing".into(),
    ))
}

fn inner_values(v: &[Rational]) -> impl Iterator<Item = &Rational> {
    v[1..v.len() - 1].iter()
}

const HALVINGS: usize = 40;

/// Choose the level's half-width: the plan's value clamped by the previous
/// level, the nerve's self-separation and the next curve's corner gap, then
/// halved until the tube nests in the previous one and is embedded.
fn settle(
    requested: &Rational,
    nerve: &Nerve,
    sign: i32,
    chain: &Chain1D,
    pattern: Option<&Pattern>,
    previous: Option<(&SceneLevel, &[Vec<Rect>])>,
    next_xs: Option<&[Rational]>,
) -> Result<SceneLevel, RenderError> {
    let quarter = Rational::new(1, 4);
    let mut e = requested.clone();
    if let Some((prev, _)) = previous {
        e = e.min(prev.half_width() * &quarter);
    }
    if let Some(sep) = nerve.separation() {
        e = e.min(sep * &quarter);
    }
    if let Some(gap) = corner_clearance(nerve, next_xs.unwrap_or(&[])) {
        e = e.min(gap * &quarter);
    }
    for _ in 0..HALVINGS {
        let level = SceneLevel {
            chain: chain.clone(),
            frame: TubeFrame {
                nerve: nerve.clone(),
                half_width: e.clone(),
                sign,
            },
            requested_half_width: requested.clone(),
            pattern: pattern.cloned(),
        };
        let links = level.links();
        let nests = match previous {
            None => true,
            Some((_, coarse)) => pattern.is_some_and(|p| pattern_matches(coarse, &links, p)),
        };
        if nests && embedded(&links) {
            return Ok(level);
        }
        e = e * Rational::half();
    }
    Err(RenderError::DoesNotFit(format!(
        "no half-width below {requested} nests the tube"
    )))
}

/// Build the nested tubes of a plan. `chain_sizes[0]` is the size of the
/// base uniform chain; `chain_sizes[i]` caps the mesh of level `i` at
/// `1/chain_sizes[i]`. Missing entries leave the automatic choice.
pub fn plan_scene(plan: &EmbeddingPlan, chain_sizes: &[usize]) -> Result<SceneGraph, RenderError> {
    let depth = plan.depth();
    let maps: Vec<&PLMap> = plan.stages.iter().map(|s| &s.map).collect();
    let eps = &plan.epsilons;
    let half = Rational::half();

    // itineraries: marks[l] holds the mark coordinates on level l
    let mut itineraries = vec![Vec::new(); depth + 1];
    itineraries[depth] = plan.marks.clone();
    for l in (0..depth).rev() {
        itineraries[l] = itineraries[l + 1].iter().map(|x| maps[l].eval_unchecked(x)).collect();
    }

    let c0 = base_chain(maps.first().copied(), chain_sizes.first().copied());
    let (lo0, hi0) = chain_span(&c0);
    let mut chain = c0;
    let mut nerve = TubeFrame::straight(lo0, hi0, eps[0].clone()).nerve;
    let mut pattern: Option<Pattern> = None;
    let mut levels: Vec<SceneLevel> = Vec::new();
    let mut coarse_links: Vec<Vec<Rect>> = Vec::new();

    for i in 1..=depth {
        let f = maps[i - 1];
        let p = &plan.stages[i - 1].permutation;
        let mut bound = chain.mesh() * &half;
        if let Some(next) = maps.get(i) {
            bound = bound.min(image_bound(next));
        }
        if let Some(&n) = chain_sizes.get(i) {
            bound = bound.min(Rational::new(1, n.max(1) as i64));
        }
        let refined = natural_refinement(f, &chain, &bound)?;
        let curve = stage_curve(f, p, &chain, &refined.chain, &turn_params(&nerve), &itineraries[i])?;

        let reference = match itineraries[i - 1].first() {
            Some(x) => x.clone(),
            None if i > 1 => {
                let b = maps[i - 2].branch(plan.stages[i - 2].permutation.top());
                b.lo.mid(&b.hi)
            }
            None => Rational::half(),
        };
        let sign = travel_sign(&nerve, &reference);
        let xs: Vec<Rational> = curve.points().iter().map(|q| q.x.clone()).collect();
        let previous = levels.last().map(|l| (l, coarse_links.as_slice()));
        let level = settle(&eps[i - 1], &nerve, sign, &chain, pattern.as_ref(), previous, Some(&xs))?;
        coarse_links = level.links();

        let next = substitute(&level.frame, &curve, f.top_index())?;
        levels.push(level);
        chain = refined.chain;
        pattern = Some(refined.pattern);
        nerve = next;
    }
    let previous = levels.last().map(|l| (l, coarse_links.as_slice()));
    let last = settle(&eps[depth], &nerve, 1, &chain, pattern.as_ref(), previous, None)?;
    levels.push(last);

    let deepest = levels.last().expect("base level").nerve();
    let marks = plan
        .marks
        .iter()
        .enumerate()
        .map(|(n, x)| Mark {
            label: format!("m{}", n + 1),
            param: x.clone(),
            point: deepest.at(x),
        })
        .collect();
    Ok(SceneGraph {
        levels,
        marks,
        plan: plan.clone(),
    })
}

fn contains_box(outer: &Rect, inner: &Rect) -> bool {
    outer.x0 < inner.x0 && inner.x1 < outer.x1 && outer.y0 < inner.y0 && inner.y1 < outer.y1
}

/// Whether the least coarse link (1-based) whose interior holds each fine
/// link is the one `expected` names. Coarse links that are not neighbours
/// are disjoint, so only the named link and its predecessor can hold it.
fn pattern_matches(coarse: &[Vec<Rect>], fine: &[Vec<Rect>], expected: &Pattern) -> bool {
    let e = expected.entries();
    if e.len() != fine.len() || e.iter().any(|&c| c == 0 || c > coarse.len()) {
        return false;
    }
    let holds = |c: usize, l: &[Rect]| {
        let (Some(outer), Some(inner)) = (bounding_box(&coarse[c - 1]), bounding_box(l)) else {
            return false;
        };
        contains_box(&outer, &inner) && union_inside_interior(l, &coarse[c - 1])
    };
    fine.iter()
        .zip(e)
        .all(|(l, &c)| holds(c, l) && (c == 1 || !holds(c - 1, l)))
}

/// Links that are not neighbours in the chain do not meet.
fn embedded(links: &[Vec<Rect>]) -> bool {
    let boxes: Vec<Rect> = links.iter().map(|l| bounding_box(l).expect("rects")).collect();
    let mut order: Vec<usize> = (0..links.len()).collect();
    order.sort_by(|a, b| boxes[*a].x0.cmp(&boxes[*b].x0));
    for (n, &a) in order.iter().enumerate() {
        for &b in &order[n + 1..] {
            if boxes[b].x0 > boxes[a].x1 {
                break;
            }
            if a.abs_diff(b) >= 2
                && boxes[a].meets(&boxes[b])
                && links[a].iter().any(|r| links[b].iter().any(|s| r.meets(s)))
            {
                return false;
            }
        }
    }
    true
}

fn planar_mesh(links: &[Vec<Rect>]) -> Rational {
    links
        .iter()
        .map(|l| {
            let b = bounding_box(l).expect("rects");
            (&b.x1 - &b.x0).max(&b.y1 - &b.y0)
        })
        .max()
        .unwrap_or_else(Rational::zero)
}

/// Least coarse link (1-based) of level `level - 1` whose planar region
/// holds each link of `level`, read off the drawn regions. `None` when a
/// link has no holder or `level` is 0 or out of range.
pub fn planar_pattern(scene: &SceneGraph, level: usize) -> Option<Pattern> {
    if level == 0 || level >= scene.levels.len() {
        return None;
    }
    let coarse = scene.levels[level - 1].links();
    let fine = scene.levels[level].links();
    let boxes: Vec<Rect> = coarse.iter().map(|l| bounding_box(l).expect("rects")).collect();
    let holds =
        |c: usize, l: &[Rect], b: &Rect| contains_box(&boxes[c - 1], b) && union_inside_interior(l, &coarse[c - 1]);
    let hints = scene.levels[level].pattern.as_ref().map(|p| p.entries().to_vec());
    let n = coarse.len();
    fine.iter()
        .enumerate()
        .map(|(j, l)| {
            let b = bounding_box(l)?;
            let near = hints
                .as_ref()
                .map_or(Vec::new(), |h| vec![h[j], h[j] + 1, h[j].saturating_sub(1)]);
            let mut c = near
                .into_iter()
                .filter(|&c| (1..=n).contains(&c))
                .find(|&c| holds(c, l, &b))
                .or_else(|| (1..=n).find(|&c| holds(c, l, &b)))?;
            while c > 1 && holds(c - 1, l, &b) {
                c -= 1;
            }
            Some(c)
        })
        .collect::<Option<Vec<_>>>()
        .map(Pattern)
}

/// Whether each level is an embedded tube that properly refines the one
/// before it with the interval pattern, with shrinking half-widths and
/// link diameters.
pub fn verify_nesting(scene: &SceneGraph) -> bool {
    let links: Vec<Vec<Vec<Rect>>> = scene.levels.iter().map(SceneLevel::links).collect();
    if !links.iter().all(|l| embedded(l)) {
        return false;
    }
    scene.levels.windows(2).zip(links.windows(2)).all(|(lv, ls)| {
        lv[1].half_width() < lv[0].half_width()
            && lv[1]
                .pattern
                .as_ref()
                .is_some_and(|p| pattern_matches(&ls[0], &ls[1], p))
            && planar_mesh(&ls[1]) < planar_mesh(&ls[0])
    })
}

/// Whether the vertical ray up from `mark` leaves the deepest nerve at once
/// and leaves every tube through one upper boundary crossing.
pub fn accessibility_probe(scene: &SceneGraph, mark: &Point) -> Result<bool, RenderError> {
    let deepest = scene
        .deepest()
        .ok_or_else(|| RenderError::MarkNotOnNerve(mark.clone()))?;
    let on_nerve = deepest
        .nerve()
        .points()
        .windows(2)
        .any(|w| segments_intersect(&w[0], &w[1], mark, mark));
    if !on_nerve {
        return Err(RenderError::MarkNotOnNerve(mark.clone()));
    }
    if !upward_ray_clear(deepest.nerve().points(), mark) {
        return Ok(false);
    }
    Ok(scene.levels.iter().all(|level| {
        let rects: Vec<Rect> = level.links().into_iter().flatten().collect();
        ray_leaves_once(&rects, mark)
    }))
}

/// The part of the upward ray from `p` inside the union of `rects` is one
/// segment starting at `p`.
fn ray_leaves_once(rects: &[Rect], p: &Point) -> bool {
    let mut spans: Vec<(Rational, Rational)> = rects
        .iter()
        .filter(|r| r.x0 <= p.x && p.x <= r.x1 && r.y1 >= p.y)
        .map(|r| (r.y0.clone().max(p.y.clone()), r.y1.clone()))
        .collect();
    spans.sort();
    let mut reach = p.y.clone();
    for (lo, hi) in spans {
        if lo > reach {
            return false;
        }
        reach = reach.max(hi);
    }
    true
}

/// Output settings for [`render_svg`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SvgOptions {
    /// Canvas width in user units.
    pub width: u32,
    /// Decimal digits kept when printing coordinates.
    pub digits: usize,
}

impl Default for SvgOptions {
    fn default() -> SvgOptions {
        SvgOptions { width: 800, digits: 12 }
    }
}

const PALETTE: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];

/// Deterministic SVG: one translucent band per level, every nerve as a
/// polyline, and marks as labelled dots.
pub fn render_svg(scene: &SceneGraph, options: &SvgOptions) -> String {
    let all: Vec<Vec<Vec<Rect>>> = scene.levels.iter().map(SceneLevel::links).collect();
    let outer: Vec<Rect> = all.first().map(|l| l.concat()).unwrap_or_default();
    let width = Rational::from_int(options.width as i64);
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let Some(bbox) = bounding_box(&outer) else {
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" height=\"{0}\" viewBox=\"0 0 {0} {0}\"/>",
            options.width
        );
        return out;
    };
    let pad = (&bbox.x1 - &bbox.x0) * Rational::new(1, 20);
    let bbox = bbox.grow(&pad, &pad);
    let scale = &width / (&bbox.x1 - &bbox.x0);
    let height = (&bbox.y1 - &bbox.y0) * &scale;
    let d = options.digits;
    let sx = |x: &Rational| ((x - &bbox.x0) * &scale).to_decimal(d);
    let sy = |y: &Rational| ((&bbox.y1 - y) * &scale).to_decimal(d);

    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">",
        w = options.width,
        h = height.to_decimal(d)
    );
    for (i, links) in all.iter().enumerate() {
        let mut path = String::new();
        for r in links.iter().flatten() {
            let _ = write!(
                path,
                "M{} {}H{}V{}H{}Z",
                sx(&r.x0),
                sy(&r.y0),
                sx(&r.x1),
                sy(&r.y1),
                sx(&r.x0)
            );
        }
        let _ = writeln!(
            out,
            "<g class=\"band\" data-level=\"{i}\"><path fill=\"{}\" fill-opacity=\"0.3\" fill-rule=\"nonzero\" d=\"{path}\"/></g>",
            PALETTE[i % PALETTE.len()]
        );
    }
    for (i, level) in scene.levels.iter().enumerate() {
        let pts: Vec<String> = level
            .nerve()
            .points()
            .iter()
            .map(|p| format!("{},{}", sx(&p.x), sy(&p.y)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline class=\"nerve\" data-level=\"{i}\" fill=\"none\" stroke=\"#222\" stroke-width=\"0.5\" points=\"{}\"/>",
            pts.join(" ")
        );
    }
    for m in &scene.marks {
        let _ = writeln!(
            out,
            "<g class=\"mark\"><circle cx=\"{x}\" cy=\"{y}\" r=\"3\" fill=\"#d62728\"/><text x=\"{x}\" y=\"{y}\" dx=\"4\" dy=\"-4\" font-size=\"12\">{}</text></g>",
            m.label,
            x = sx(&m.point.x),
            y = sy(&m.point.y)
        );
    }
    out.push_str("</svg>\n");
    out
}

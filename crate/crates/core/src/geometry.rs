//! Exact planar primitives: points, segments, rectangles and rectangle unions.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rational::Rational;

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Point {
    pub x: Rational,
    pub y: Rational,
}

impl Point {
    pub fn new(x: Rational, y: Rational) -> Point {
        Point { x, y }
    }

    pub fn add(&self, dx: &Rational, dy: &Rational) -> Point {
        Point::new(&self.x + dx, &self.y + dy)
    }

    /// Point at fraction `t` of the way from `self` to `other`.
    pub fn lerp(&self, other: &Point, t: &Rational) -> Point {
        Point::new(&self.x + (&other.x - &self.x) * t, &self.y + (&other.y - &self.y) * t)
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

fn orient(a: &Point, b: &Point, c: &Point) -> Ordering {
    let v = (&b.x - &a.x) * (&c.y - &a.y) - (&b.y - &a.y) * (&c.x - &a.x);
    v.cmp(&Rational::zero())
}

fn on_segment(a: &Point, b: &Point, p: &Point) -> bool {
    a.x.clone().min(b.x.clone()) <= p.x
        && p.x <= a.x.clone().max(b.x.clone())
        && a.y.clone().min(b.y.clone()) <= p.y
        && p.y <= a.y.clone().max(b.y.clone())
}

/// Closed segments `ab` and `cd` share a point.
pub fn segments_intersect(a: &Point, b: &Point, c: &Point, d: &Point) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if o1 != o2 && o3 != o4 {
        return true;
    }
    (o1 == Ordering::Equal && on_segment(a, b, c))
        || (o2 == Ordering::Equal && on_segment(a, b, d))
        || (o3 == Ordering::Equal && on_segment(c, d, a))
        || (o4 == Ordering::Equal && on_segment(c, d, b))
}

/// Closed axis-parallel rectangle.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: Rational,
    pub y0: Rational,
    pub x1: Rational,
    pub y1: Rational,
}

impl Rect {
    /// Rectangle spanned by two corners in any order.
    pub fn spanning(a: &Point, b: &Point) -> Rect {
        Rect {
            x0: a.x.clone().min(b.x.clone()),
            y0: a.y.clone().min(b.y.clone()),
            x1: a.x.clone().max(b.x.clone()),
            y1: a.y.clone().max(b.y.clone()),
        }
    }

    pub fn around(p: &Point, r: &Rational) -> Rect {
        Rect {
            x0: &p.x - r,
            y0: &p.y - r,
            x1: &p.x + r,
            y1: &p.y + r,
        }
    }

    pub fn grow(&self, rx: &Rational, ry: &Rational) -> Rect {
        Rect {
            x0: &self.x0 - rx,
            y0: &self.y0 - ry,
            x1: &self.x1 + rx,
            y1: &self.y1 + ry,
        }
    }

    /// Closed rectangles meet.
    pub fn meets(&self, o: &Rect) -> bool {
        self.x0 <= o.x1 && o.x0 <= self.x1 && self.y0 <= o.y1 && o.y0 <= self.y1
    }

    /// Interiors meet.
    pub fn overlaps(&self, o: &Rect) -> bool {
        self.x0 < o.x1 && o.x0 < self.x1 && self.y0 < o.y1 && o.y0 < self.y1
    }

    /// Chebyshev distance between the two closed rectangles.
    pub fn distance(&self, o: &Rect) -> Rational {
        let gap = |a0: &Rational, a1: &Rational, b0: &Rational, b1: &Rational| {
            if a1 < b0 {
                b0 - a1
            } else if b1 < a0 {
                a0 - b1
            } else {
                Rational::zero()
            }
        };
        gap(&self.x0, &self.x1, &o.x0, &o.x1).max(gap(&self.y0, &self.y1, &o.y0, &o.y1))
    }
}

impl fmt::Debug for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]x[{},{}]", self.x0, self.x1, self.y0, self.y1)
    }
}

pub fn bounding_box(rects: &[Rect]) -> Option<Rect> {
    let mut it = rects.iter();
    let first = it.next()?.clone();
    Some(it.fold(first, |acc, r| Rect {
        x0: acc.x0.min(r.x0.clone()),
        y0: acc.y0.min(r.y0.clone()),
        x1: acc.x1.max(r.x1.clone()),
        y1: acc.y1.max(r.y1.clone()),
    }))
}

/// Whether the union of closed rectangles `inner` lies in the interior of
/// the union of closed rectangles `outer`.
///
/// Coordinates are compressed to a grid; a closed rectangle is interior iff
/// every grid cell touching it, including the ring of cells around it, is
/// covered by some outer rectangle.
pub fn union_inside_interior(inner: &[Rect], outer: &[Rect]) -> bool {
    let mut xs: Vec<&Rational> = Vec::new();
    let mut ys: Vec<&Rational> = Vec::new();
    for r in inner.iter().chain(outer) {
        xs.extend([&r.x0, &r.x1]);
        ys.extend([&r.y0, &r.y1]);
    }
    xs.sort();
    xs.dedup();
    ys.sort();
    ys.dedup();
    let nx = xs.len() - 1;
    let ny = ys.len() - 1;
    let ix = |v: &Rational| xs.binary_search(&v).unwrap();
    let iy = |v: &Rational| ys.binary_search(&v).unwrap();
    let mut covered = vec![false; nx * ny];
    for r in outer {
        for i in ix(&r.x0)..ix(&r.x1) {
            for j in iy(&r.y0)..iy(&r.y1) {
                covered[i * ny + j] = true;
            }
        }
    }
    inner.iter().all(|r| {
        let (i0, i1) = (ix(&r.x0), ix(&r.x1));
        let (j0, j1) = (iy(&r.y0), iy(&r.y1));
        if i0 == 0 || j0 == 0 || i1 >= nx || j1 >= ny {
            return false;
        }
        (i0 - 1..=i1).all(|i| (j0 - 1..=j1).all(|j| covered[i * ny + j]))
    })
}

/// Whether the interiors of two rectangle unions meet.
pub fn unions_overlap(a: &[Rect], b: &[Rect]) -> bool {
    a.iter().any(|r| b.iter().any(|s| r.overlaps(s)))
}

/// Whether the open vertical ray upward from `p` misses every segment of
/// the polyline.
pub fn upward_ray_clear(polyline: &[Point], p: &Point) -> bool {
    polyline.windows(2).all(|w| {
        let (a, b) = (&w[0], &w[1]);
        let (x0, x1) = if a.x <= b.x { (a, b) } else { (b, a) };
        if p.x < x0.x || p.x > x1.x {
            return true;
        }
        if x0.x == x1.x {
            return a.y.clone().max(b.y.clone()) <= p.y;
        }
        let t = (&p.x - &x0.x) / (&x1.x - &x0.x);
        x0.lerp(x1, &t).y <= p.y
    })
}

//! Piecewise-linear surjections of the unit interval.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("syntax error near {0:?}")]
    Syntax(String),
    #[error("map is not onto [0,1] (min {min}, max {max})")]
    NotSurjective { min: Rational, max: Rational },
    #[error("breakpoints must strictly increase (problem at {0})")]
    NotAFunction(Rational),
    #[error("breakpoints must start at 0 and end at 1")]
    BadEndpoints,
    #[error("constant piece starting at {0}")]
    Plateau(Rational),
    #[error("{0} lies outside the domain [0,1]")]
    OutOfDomain(Rational),
    #[error("{0} lies outside the range [0,1]")]
    OutOfRange(Rational),
    #[error("iteration count must be positive")]
    ZeroIterate,
}

/// Monotone direction of a branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

/// A maximal monotone piece `[lo, hi]` of a map together with its end values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch {
    pub index: usize,
    pub lo: Rational,
    pub hi: Rational,
    pub value_lo: Rational,
    pub value_hi: Rational,
    /// Vertices of the branch from `lo` to `hi`, ends included.
    pub knots: Vec<(Rational, Rational)>,
}

impl Branch {
    pub fn direction(&self) -> Direction {
        if self.value_hi > self.value_lo {
            Direction::Up
        } else {
            Direction::Down
        }
    }

    /// Image interval `(min, max)`.
    pub fn image(&self) -> (Rational, Rational) {
        if self.value_lo < self.value_hi {
            (self.value_lo.clone(), self.value_hi.clone())
        } else {
            (self.value_hi.clone(), self.value_lo.clone())
        }
    }

    pub fn image_contains(&self, y: &Rational) -> bool {
        let (a, b) = self.image();
        &a <= y && y <= &b
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    fn slopes(&self) -> impl Iterator<Item = Rational> + '_ {
        self.knots
            .windows(2)
            .map(|w| ((&w[1].1 - &w[0].1) / (&w[1].0 - &w[0].0)).abs())
    }

    /// Smallest absolute slope of the linear pieces.
    pub fn min_slope(&self) -> Rational {
        self.slopes().min().expect("two knots")
    }

    pub fn max_slope(&self) -> Rational {
        self.slopes().max().expect("two knots")
    }

    /// The unique point of the branch with value `y`, if any.
    pub fn solve(&self, y: &Rational) -> Option<Rational> {
        if !self.image_contains(y) {
            return None;
        }
        let rising = self.direction() == Direction::Up;
        let i = self.knots.partition_point(|(_, v)| if rising { v < y } else { v > y });
        if i == 0 {
            return Some(self.lo.clone());
        }
        let ((x0, y0), (x1, y1)) = (&self.knots[i - 1], &self.knots[i]);
        Some(x0 + (y - y0) * (x1 - x0) / (y1 - y0))
    }
}

/// An exact piecewise-linear surjection of [0,1]. The vertex list keeps
/// every slope change; the breakpoints are the strict local extrema and
/// the two ends.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PLMap {
    knots: Vec<Rational>,
    knot_values: Vec<Rational>,
    breakpoints: Vec<Rational>,
    values: Vec<Rational>,
    /// Position of each breakpoint in `knots`.
    turn_at: Vec<usize>,
}

impl PLMap {
    /// Build a map from `(x, f(x))` vertices, validating and normalizing.
    pub fn from_points(points: Vec<(Rational, Rational)>) -> Result<PLMap, MapError> {
        let raw = Self::raw(points)?;
        let min = raw.values.iter().min().cloned().unwrap_or_default();
        let max = raw.values.iter().max().cloned().unwrap_or_default();
        if !min.is_zero() || max != Rational::one() {
            return Err(MapError::NotSurjective { min, max });
        }
        Ok(raw)
    }

    /// Validated and normalized vertex list without the surjectivity check.
    fn raw(points: Vec<(Rational, Rational)>) -> Result<PLMap, MapError> {
        if points.len() < 2 {
            return Err(MapError::BadEndpoints);
        }
        if !points[0].0.is_zero() || points[points.len() - 1].0 != Rational::one() {
            return Err(MapError::BadEndpoints);
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(MapError::NotAFunction(w[1].0.clone()));
            }
            if w[1].1 == w[0].1 {
                return Err(MapError::Plateau(w[0].0.clone()));
            }
        }
        for (_, y) in &points {
            if y.is_negative() || y > &Rational::one() {
                return Err(MapError::OutOfRange(y.clone()));
            }
        }
        Ok(Self::normalized(points))
    }

    /// Drop collinear vertices, then mark the direction changes.
    fn normalized(points: Vec<(Rational, Rational)>) -> PLMap {
        let slope = |a: &(Rational, Rational), b: &(Rational, Rational)| (&b.1 - &a.1) / (&b.0 - &a.0);
        let mut kept: Vec<(Rational, Rational)> = Vec::with_capacity(points.len());
        for pt in points {
            if kept.len() >= 2
                && slope(&kept[kept.len() - 2], &kept[kept.len() - 1]) == slope(&kept[kept.len() - 1], &pt)
            {
                kept.pop();
            }
            kept.push(pt);
        }
        let n = kept.len();
        let mut turn_at = vec![0];
        for i in 1..n - 1 {
            let left = (&kept[i].1 - &kept[i - 1].1).signum();
            let right = (&kept[i + 1].1 - &kept[i].1).signum();
            if left != right {
                turn_at.push(i);
            }
        }
        turn_at.push(n - 1);
        let breakpoints = turn_at.iter().map(|&i| kept[i].0.clone()).collect();
        let values = turn_at.iter().map(|&i| kept[i].1.clone()).collect();
        let (knots, knot_values) = kept.into_iter().unzip();
        PLMap {
            knots,
            knot_values,
            breakpoints,
            values,
            turn_at,
        }
    }

    pub fn identity() -> PLMap {
        Self::normalized(vec![
            (Rational::zero(), Rational::zero()),
            (Rational::one(), Rational::one()),
        ])
    }

    /// Critical points `t_0 = 0 < t_1 < ... < t_{m+1} = 1`.
    pub fn breakpoints(&self) -> &[Rational] {
        &self.breakpoints
    }

    /// Values at the critical points.
    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn branch_count(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// Index of the last branch (`m`).
    pub fn top_index(&self) -> usize {
        self.branch_count() - 1
    }

    pub fn branch(&self, k: usize) -> Branch {
        let span = self.turn_at[k]..=self.turn_at[k + 1];
        Branch {
            index: k,
            lo: self.breakpoints[k].clone(),
            hi: self.breakpoints[k + 1].clone(),
            value_lo: self.values[k].clone(),
            value_hi: self.values[k + 1].clone(),
            knots: self.knots[span.clone()]
                .iter()
                .cloned()
                .zip(self.knot_values[span].iter().cloned())
                .collect(),
        }
    }

    pub fn branches(&self) -> impl Iterator<Item = Branch> + '_ {
        (0..self.branch_count()).map(|k| self.branch(k))
    }

    /// Branch whose interior contains `x`, or the branch starting at `x`
    /// when `x` is a critical point (last branch for `x = 1`).
    pub fn branch_of(&self, x: &Rational) -> usize {
        let idx = self.breakpoints.partition_point(|b| b <= x);
        idx.saturating_sub(1).min(self.branch_count() - 1)
    }

    /// Branch whose open interior contains `x`.
    pub fn branch_containing(&self, x: &Rational) -> Option<usize> {
        let k = self.branch_of(x);
        let b = self.branch(k);
        (&b.lo < x && x < &b.hi).then_some(k)
    }

    pub fn eval(&self, x: &Rational) -> Result<Rational, MapError> {
        if x.is_negative() || x > &Rational::one() {
            return Err(MapError::OutOfDomain(x.clone()));
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &Rational) -> Rational {
        let k = self
            .knots
            .partition_point(|b| b <= x)
            .saturating_sub(1)
            .min(self.knots.len() - 2);
        let x0 = &self.knots[k];
        let x1 = &self.knots[k + 1];
        let y0 = &self.knot_values[k];
        let y1 = &self.knot_values[k + 1];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// All solutions of `f(x) = y`, sorted.
    pub fn preimages(&self, y: &Rational) -> Result<Vec<Rational>, MapError> {
        if y.is_negative() || y > &Rational::one() {
            return Err(MapError::OutOfRange(y.clone()));
        }
        Ok(self.preimages_unchecked(y))
    }

    pub(crate) fn preimages_unchecked(&self, y: &Rational) -> Vec<Rational> {
        let mut out: Vec<Rational> = Vec::new();
        for i in 0..self.knots.len() - 1 {
            let (y0, y1) = (&self.knot_values[i], &self.knot_values[i + 1]);
            if (y0 <= y && y <= y1) || (y1 <= y && y <= y0) {
                let (x0, x1) = (&self.knots[i], &self.knots[i + 1]);
                let x = x0 + (y - y0) * (x1 - x0) / (y1 - y0);
                if out.last() != Some(&x) {
                    out.push(x);
                }
            }
        }
        out
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &PLMap) -> PLMap {
        let mut xs: Vec<Rational> = inner.knots.clone();
        for t in &self.knots[1..self.knots.len() - 1] {
            xs.extend(inner.preimages_unchecked(t));
        }
        xs.sort();
        xs.dedup();
        let points = xs
            .into_iter()
            .map(|x| {
                let y = self.eval_unchecked(&inner.eval_unchecked(&x));
                (x, y)
            })
            .collect();
        PLMap::raw(points).expect("composition of valid maps is valid")
    }

    pub fn iterate(&self, k: usize) -> Result<PLMap, MapError> {
        if k == 0 {
            return Err(MapError::ZeroIterate);
        }
        let mut acc = self.clone();
        for _ in 1..k {
            acc = self.compose(&acc);
        }
        Ok(acc)
    }

    /// Equality as functions on [0,1].
    pub fn equals(&self, other: &PLMap) -> bool {
        let mut xs: Vec<&Rational> = self.knots.iter().chain(&other.knots).collect();
        xs.sort();
        xs.dedup();
        xs.into_iter()
            .all(|x| self.eval_unchecked(x) == other.eval_unchecked(x))
    }

    /// Minimum and maximum of the map on `[a, b]`.
    pub fn range_on(&self, a: &Rational, b: &Rational) -> (Rational, Rational) {
        let mut lo = self.eval_unchecked(a);
        let mut hi = lo.clone();
        let fb = self.eval_unchecked(b);
        let mut consider = |v: Rational| {
            if v < lo {
                lo = v.clone();
            }
            if v > hi {
                hi = v;
            }
        };
        consider(fb);
        for (t, v) in self.breakpoints.iter().zip(&self.values) {
            if a < t && t < b {
                consider(v.clone());
            }
        }
        (lo, hi)
    }

    /// Whether critical point `j` is an interior local maximum.
    pub fn is_local_max(&self, j: usize) -> bool {
        j > 0 && j < self.breakpoints.len() - 1 && self.values[j] > self.values[j - 1]
    }

    /// Smallest difference between distinct critical values.
    pub fn min_value_gap(&self) -> Option<Rational> {
        let mut vs = self.values.clone();
        vs.sort();
        vs.dedup();
        vs.windows(2).map(|w| &w[1] - &w[0]).min()
    }

    /// Smallest branch image diameter.
    pub fn min_branch_diameter(&self) -> Rational {
        self.branches()
            .map(|b| (&b.value_hi - &b.value_lo).abs())
            .min()
            .expect("at least one branch")
    }

    /// Largest absolute slope.
    pub fn lipschitz(&self) -> Rational {
        self.branches()
            .map(|b| b.max_slope())
            .max()
            .expect("at least one branch")
    }

    /// Vertex list `(x, f(x))`, every slope change included.
    pub fn points(&self) -> impl Iterator<Item = (&Rational, &Rational)> {
        self.knots.iter().zip(&self.knot_values)
    }
}

impl fmt::Display for PLMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pl")?;
        for (x, y) in self.points() {
            write!(f, " {x}:{y}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for PLMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for PLMap {
    type Err = MapError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_plmap(s)
    }
}

impl serde::Serialize for PLMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for PLMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_plmap(&s).map_err(serde::de::Error::custom)
    }
}

/// Parse the `pl x:y x:y ...` grammar; `#` starts a comment.
pub fn parse_plmap(text: &str) -> Result<PLMap, MapError> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    match tokens.next() {
        Some("pl") => {}
        Some(t) => return Err(MapError::Syntax(t.to_string())),
        None => return Err(MapError::Syntax(String::new())),
    }
    let mut points = Vec::new();
    for tok in tokens {
        let (x, y) = tok.split_once(':').ok_or_else(|| MapError::Syntax(tok.to_string()))?;
        let x: Rational = x.parse().map_err(|_| MapError::Syntax(tok.to_string()))?;
        let y: Rational = y.parse().map_err(|_| MapError::Syntax(tok.to_string()))?;
        points.push((x, y));
    }
    if let Some(w) = points.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(MapError::NotAFunction(w[0].0.clone()));
    }
    PLMap::from_points(points)
}

/// Built-in maps addressable by name.
pub const REGISTRY: &[(&str, &str)] = &[
    ("tent", "pl 0:0 1/2:1 1:0"),
    ("ex67", "pl 0:0 1/4:3/4 3/4:1/4 1:1"),
    ("ex68", "pl 0:0 3/8:3/4 5/8:1/4 1:1"),
    ("nadler", "pl 0:0 1/5:1/5 2/5:4/5 3/5:1/5 4/5:4/5 1:1"),
    ("minc", "pl 0:0 1/3:1 5/12:1/3 7/12:2/3 2/3:0 1:1"),
    ("fig1", "pl 0:0 1/4:1 1/2:3/10 3/4:1 1:3/10"),
    ("fig5f", "pl 0:0 1/5:1 2/5:1/4 3/5:3/4 4/5:1/2 1:1"),
    ("fig3f", "pl 0:0 1/4:5/12 1/2:0 3/4:1 1:0"),
    ("fig3g", "pl 0:1/3 1/2:1 1:0"),
    ("id", "pl 0:0 1:1"),
];

pub fn builtin(name: &str) -> Option<PLMap> {
    REGISTRY
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| parse_plmap(t).expect("registry entries parse"))
}

/// Resolve a registry name, an iterate shorthand `name^k`, or map text.
pub fn resolve_map(spec: &str) -> Result<PLMap, MapError> {
    let s = spec.trim();
    if s.starts_with("pl") {
        return parse_plmap(s);
    }
    if let Some((name, k)) = s.split_once('^') {
        let k: usize = k.parse().map_err(|_| MapError::Syntax(s.to_string()))?;
        let base = builtin(name).ok_or_else(|| MapError::Syntax(name.to_string()))?;
        return base.iterate(k);
    }
    builtin(s).ok_or_else(|| MapError::Syntax(s.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn tent_parses() {
        let t = parse_plmap("pl 0:0 1/2:1 1:0").unwrap();
        assert_eq!(t.breakpoints(), &[q(0, 1), q(1, 2), q(1, 1)]);
        assert_eq!(t.values(), &[q(0, 1), q(1, 1), q(0, 1)]);
    }

    #[test]
    fn monotone_through_points_are_not_breakpoints() {
        let n = builtin("nadler").unwrap();
        assert_eq!(n.to_string(), "pl 0:0 1/5:1/5 2/5:4/5 3/5:1/5 4/5:4/5 1:1");
        assert_eq!(n.breakpoints(), &[q(0, 1), q(2, 5), q(3, 5), q(1, 1)]);
        assert_eq!(n.eval(&q(1, 5)).unwrap(), q(1, 5));
        assert_eq!(n.branch(0).solve(&q(1, 2)).unwrap(), q(3, 10));
    }

    #[test]
    fn collinear_points_are_dropped() {
        let f = parse_plmap("pl 0:0 1/4:1/4 1/2:1/2 3/4:1/4 1:1").unwrap();
        assert_eq!(f.to_string(), "pl 0:0 1/2:1/2 3/4:1/4 1:1");
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_plmap("pl 0:0 1/2:1/2 1:1/4"),
            Err(MapError::NotSurjective { .. })
        ));
        assert!(matches!(
            parse_plmap("pl 0:0 1/2:1 1/2:0 1:1"),
            Err(MapError::NotAFunction(_))
        ));
        assert!(matches!(parse_plmap("pl 0:0 1/2:x 1:1"), Err(MapError::Syntax(_))));
        assert!(matches!(parse_plmap("map 0:0 1:1"), Err(MapError::Syntax(_))));
        assert!(matches!(
            parse_plmap("pl 0:0 1/2:1 3/4:1 1:0"),
            Err(MapError::Plateau(_))
        ));
    }

    #[test]
    fn comments_are_ignored() {
        let f = parse_plmap("pl 0:0 # start\n 1/2:1 1:0 # end").unwrap();
        assert!(f.equals(&builtin("tent").unwrap()));
    }

    #[test]
    fn eval_examples() {
        let ex67 = builtin("ex67").unwrap();
        assert_eq!(ex67.eval(&q(1, 12)).unwrap(), q(1, 4));
        let minc = builtin("minc").unwrap();
        assert_eq!(minc.eval(&q(1, 2)).unwrap(), q(1, 2));
        assert!(ex67.eval(&q(3, 2)).is_err());
    }

    #[test]
    fn preimage_examples() {
        let ex67 = builtin("ex67").unwrap();
        assert_eq!(ex67.preimages(&q(1, 4)).unwrap(), vec![q(1, 12), q(3, 4)]);
        let minc = builtin("minc").unwrap();
        assert_eq!(minc.preimages(&q(0, 1)).unwrap(), vec![q(0, 1), q(2, 3)]);
        assert!(minc.preimages(&q(2, 1)).is_err());
    }

    #[test]
    fn ex67_square() {
        let f = builtin("ex67").unwrap();
        let f2 = f.compose(&f);
        assert_eq!(
            f2.breakpoints(),
            &[q(0, 1), q(1, 12), q(1, 4), q(3, 4), q(11, 12), q(1, 1)]
        );
        assert_eq!(f2.values(), &[q(0, 1), q(3, 4), q(1, 4), q(3, 4), q(1, 4), q(1, 1)]);
    }

    #[test]
    fn identity_is_neutral() {
        let f = builtin("minc").unwrap();
        assert!(PLMap::identity().compose(&f).equals(&f));
        assert!(f.compose(&PLMap::identity()).equals(&f));
    }

    #[test]
    fn resolve_shorthand() {
        let a = resolve_map("ex67^2").unwrap();
        let f = builtin("ex67").unwrap();
        assert!(a.equals(&f.compose(&f)));
        assert!(resolve_map("nosuch").is_err());
    }
}

//! Chain covers of the interval by open links, refinement and patterns.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plmap::PLMap;
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("fine link {0} lies in no coarse link")]
    NotARefinement(usize),
    #[error("branch {branch} has its image inside link {link}; use a chain of mesh below {bound}")]
    MeshTooCoarse {
        branch: usize,
        link: usize,
        bound: Rational,
    },
    #[error("links {0} and {1} violate the chain intersection rule")]
    NotAChain(usize, usize),
    #[error("empty link {0}")]
    EmptyLink(usize),
    #[error("mesh bound must be positive")]
    BadMeshBound,
    #[error("chain syntax error near {0:?}")]
    Syntax(String),
}

/// An open interval `(lo, hi)`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Link {
    pub lo: Rational,
    pub hi: Rational,
}

impl Link {
    pub fn new(lo: Rational, hi: Rational) -> Link {
        Link { lo, hi }
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo < x && x < &self.hi
    }

    /// Whether the closed interval `[a, b]` lies inside this open link.
    pub fn contains_closed(&self, a: &Rational, b: &Rational) -> bool {
        &self.lo < a && b < &self.hi
    }

    /// Whether the open interval `(a, b)` lies inside this open link.
    pub fn contains_open(&self, a: &Rational, b: &Rational) -> bool {
        &self.lo <= a && b <= &self.hi
    }

    pub fn meets(&self, other: &Link) -> bool {
        self.lo.clone().max(other.lo.clone()) < self.hi.clone().min(other.hi.clone())
    }

    pub fn diameter(&self) -> Rational {
        &self.hi - &self.lo
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.lo, self.hi)
    }
}

impl fmt::Debug for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Ordered open cover in which only consecutive links meet.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chain1D {
    links: Vec<Link>,
}

impl Chain1D {
    pub fn new(links: Vec<Link>) -> Result<Chain1D, ChainError> {
        for (i, l) in links.iter().enumerate() {
            if l.lo >= l.hi {
                return Err(ChainError::EmptyLink(i + 1));
            }
        }
        for (i, w) in links.windows(2).enumerate() {
            if !w[0].meets(&w[1]) {
                return Err(ChainError::NotAChain(i + 1, i + 2));
            }
        }
        // sweep in order of left ends: every overlapping pair must be consecutive
        let mut order: Vec<usize> = (0..links.len()).collect();
        order.sort_by(|a, b| links[*a].lo.cmp(&links[*b].lo));
        for (n, &i) in order.iter().enumerate() {
            for &j in &order[n + 1..] {
                if links[j].lo >= links[i].hi {
                    break;
                }
                if i.abs_diff(j) > 1 {
                    return Err(ChainError::NotAChain(i.min(j) + 1, i.max(j) + 1));
                }
            }
        }
        Ok(Chain1D { links })
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// 1-based link access.
    pub fn link(&self, i: usize) -> &Link {
        &self.links[i - 1]
    }

    /// Whether the union of the links contains `[0, 1]`.
    pub fn covers_unit(&self) -> bool {
        let mut reach = match self.links.first() {
            Some(l) if l.lo < Rational::zero() => l.hi.clone(),
            _ => return false,
        };
        for l in &self.links[1..] {
            if l.lo >= reach {
                return reach > Rational::one();
            }
            reach = reach.max(l.hi.clone());
        }
        reach > Rational::one()
    }

    pub fn mesh(&self) -> Rational {
        self.links
            .iter()
            .map(Link::diameter)
            .max()
            .unwrap_or_else(Rational::zero)
    }

    fn increasing(&self) -> bool {
        self.links.windows(2).all(|w| w[0].lo < w[1].lo && w[0].hi < w[1].hi)
    }

    /// Least 0-based index of a link holding `[a, b]`, closed or open.
    fn least_holding(&self, a: &Rational, b: &Rational, closed: bool, increasing: bool) -> Option<usize> {
        let holds = |l: &Link| {
            if closed {
                l.contains_closed(a, b)
            } else {
                l.contains_open(a, b)
            }
        };
        if increasing {
            // right ends increase, so the first link reaching past `b` decides
            let i = self
                .links
                .partition_point(|l| if closed { &l.hi <= b } else { &l.hi < b });
            return self.links.get(i).filter(|l| holds(l)).map(|_| i);
        }
        self.links.iter().position(holds)
    }

    /// 1-based indices of the links containing `x`.
    pub fn links_containing(&self, x: &Rational) -> Vec<usize> {
        // only consecutive links meet, so at most two candidates
        let first = self.links.partition_point(|l| &l.hi <= x);
        (first..self.len().min(first + 2))
            .filter(|&i| self.links[i].contains(x))
            .map(|i| i + 1)
            .collect()
    }

    /// Whether `x` and `y` lie in a common link.
    pub fn share_link(&self, x: &Rational, y: &Rational) -> bool {
        self.links_containing(x).into_iter().any(|i| self.link(i).contains(y))
    }

    /// Smallest width among consecutive overlaps.
    pub fn min_overlap(&self) -> Option<Rational> {
        self.links.windows(2).map(|w| &w[0].hi - &w[1].lo).min()
    }

    /// Link boundary points in increasing order.
    pub fn boundaries(&self) -> Vec<Rational> {
        let mut out: Vec<Rational> = self.links.iter().flat_map(|l| [l.lo.clone(), l.hi.clone()]).collect();
        out.sort();
        out.dedup();
        out
    }
}

impl fmt::Display for Chain1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "chain")?;
        for l in &self.links {
            write!(f, " {l}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Chain1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Chain1D {
    type Err = ChainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s
            .trim()
            .strip_prefix("chain")
            .ok_or_else(|| ChainError::Syntax(s.to_string()))?;
        let mut links = Vec::new();
        let mut rest = body.trim();
        while !rest.is_empty() {
            let open = rest
                .strip_prefix('(')
                .ok_or_else(|| ChainError::Syntax(rest.to_string()))?;
            let close = open.find(')').ok_or_else(|| ChainError::Syntax(rest.to_string()))?;
            let inner = &open[..close];
            let (a, b) = inner
                .split_once(',')
                .ok_or_else(|| ChainError::Syntax(inner.to_string()))?;
            let lo = a.parse().map_err(|_| ChainError::Syntax(inner.to_string()))?;
            let hi = b.parse().map_err(|_| ChainError::Syntax(inner.to_string()))?;
            links.push(Link::new(lo, hi));
            rest = open[close + 1..].trim_start();
        }
        Chain1D::new(links)
    }
}

/// Link indices `a_1 ... a_m` (1-based) of a refinement pattern.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pattern(pub Vec<usize>);

impl Pattern {
    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    /// Consecutive entries differ by at most one.
    pub fn is_valid(&self) -> bool {
        self.0.windows(2).all(|w| w[0].abs_diff(w[1]) <= 1)
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Links `((i-1)/n - 1/(4n), i/n + 1/(4n))` for `i = 1..n`.
pub fn uniform_chain(n: usize) -> Chain1D {
    assert!(n >= 1, "uniform chain needs at least one link");
    let n = n as i64;
    let links = (1..=n)
        .map(|i| Link::new(Rational::new(4 * (i - 1) - 1, 4 * n), Rational::new(4 * i + 1, 4 * n)))
        .collect();
    Chain1D { links }
}

/// Uniform chain whose mesh is below the smallest gap between distinct
/// critical values of `f`, so no link holds two of them.
pub fn separating_chain(f: &PLMap) -> Chain1D {
    let n = match f.min_value_gap() {
        Some(gap) => (Rational::new(3, 2) / gap).floor() + Rational::one(),
        None => Rational::from_int(2),
    };
    uniform_chain(n.to_string().parse::<usize>().expect("small count").max(2))
}

pub fn mesh(c: &Chain1D) -> Rational {
    c.mesh()
}

/// Every fine link lies in some coarse link; with `proper`, its closure does.
pub fn refines(fine: &Chain1D, coarse: &Chain1D, proper: bool) -> bool {
    fine.links.iter().all(|l| {
        coarse.links.iter().any(|c| {
            if proper {
                c.contains_closed(&l.lo, &l.hi)
            } else {
                c.contains_open(&l.lo, &l.hi)
            }
        })
    })
}

/// Least coarse index containing each fine link.
pub fn pattern(fine: &Chain1D, coarse: &Chain1D) -> Result<Pattern, ChainError> {
    let increasing = coarse.increasing();
    fine.links
        .iter()
        .enumerate()
        .map(|(j, l)| {
            coarse
                .least_holding(&l.lo, &l.hi, false, increasing)
                .map(|i| i + 1)
                .ok_or(ChainError::NotARefinement(j + 1))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Pattern)
}

/// Image of the closure of a link under `f`, with the link clipped to [0,1].
pub fn link_image(f: &PLMap, link: &Link) -> (Rational, Rational) {
    let a = link.lo.clone().max(Rational::zero());
    let b = link.hi.clone().min(Rational::one());
    f.range_on(&a, &b)
}

/// Pattern read along the graph: least coarse link containing `f` of each
/// fine link closure.
pub fn graph_pattern(f: &PLMap, fine: &Chain1D, coarse: &Chain1D) -> Result<Pattern, ChainError> {
    let increasing = coarse.increasing();
    fine.links
        .iter()
        .enumerate()
        .map(|(j, l)| {
            let (lo, hi) = link_image(f, l);
            coarse
                .least_holding(&lo, &hi, true, increasing)
                .map(|i| i + 1)
                .ok_or(ChainError::NotARefinement(j + 1))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Pattern)
}

/// Whether the `f`-images of fine link closures refine the coarse chain.
pub fn pushforward_refines(f: &PLMap, fine: &Chain1D, coarse: &Chain1D) -> bool {
    graph_pattern(f, fine, coarse).is_ok()
}

/// Smallest positive gap between distinct critical values (the mesh bound
/// below which chain-relative admissibility only sees equal values).
pub fn critical_value_bound(f: &PLMap) -> Option<Rational> {
    f.min_value_gap()
}

/// Check that no branch image lies inside a single link.
pub fn check_branch_images(f: &PLMap, coarse: &Chain1D) -> Result<(), ChainError> {
    for b in f.branches() {
        let (lo, hi) = b.image();
        if let Some(i) = coarse.links.iter().position(|c| c.contains_open(&lo, &hi)) {
            let bound = critical_value_bound(f)
                .unwrap_or_else(Rational::one)
                .min(f.min_branch_diameter());
            return Err(ChainError::MeshTooCoarse {
                branch: b.index,
                link: i + 1,
                bound,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NaturalRefinement {
    pub chain: Chain1D,
    pub pattern: Pattern,
}

/// Default properness padding, as a fraction of the smallest coarse overlap.
pub fn default_padding() -> Rational {
    Rational::new(1, 8)
}

pub fn natural_refinement(f: &PLMap, coarse: &Chain1D, mesh_bound: &Rational) -> Result<NaturalRefinement, ChainError> {
    natural_refinement_with(f, coarse, mesh_bound, &default_padding())
}

/// Cut `[0,1]` at the preimages of the coarse overlap midlines, split pieces
/// to respect the mesh bound, then pad each piece into an open link.
pub fn natural_refinement_with(
    f: &PLMap,
    coarse: &Chain1D,
    mesh_bound: &Rational,
    padding: &Rational,
) -> Result<NaturalRefinement, ChainError> {
    if !mesh_bound.is_positive() {
        return Err(ChainError::BadMeshBound);
    }
    check_branch_images(f, coarse)?;

    let mut cuts = vec![Rational::zero(), Rational::one()];
    for w in coarse.links.windows(2) {
        let mid = w[0].hi.mid(&w[1].lo);
        if !mid.is_negative() && mid <= Rational::one() {
            cuts.extend(f.preimages_unchecked(&mid));
        }
    }
    cuts.sort();
    cuts.dedup();

    let half = mesh_bound * Rational::half();
    let mut points = vec![cuts[0].clone()];
    for w in cuts.windows(2) {
        let len = &w[1] - &w[0];
        let pieces = (&len / &half).ceil();
        let k: usize = pieces.to_string().parse().unwrap_or(1).max(1);
        let step = &len / Rational::from_int(k as i64);
        for i in 1..=k {
            points.push(&w[0] + &step * Rational::from_int(i as i64));
        }
    }

    let min_piece = points
        .windows(2)
        .map(|w| &w[1] - &w[0])
        .min()
        .expect("at least one piece");
    let overlap = coarse.min_overlap().unwrap_or_else(|| mesh_bound.clone());
    let mut pad = (padding * overlap / f.lipschitz())
        .min(&min_piece * Rational::new(1, 4))
        .min(mesh_bound * Rational::new(1, 4));
    // keep critical points off link boundaries
    while points.iter().any(|p| {
        let a = p - &pad;
        let b = p + &pad;
        f.breakpoints().iter().any(|t| t == &a || t == &b)
    }) {
        pad = pad * Rational::half();
    }

    let links: Vec<Link> = points
        .windows(2)
        .map(|w| Link::new(&w[0] - &pad, &w[1] + &pad))
        .collect();
    let chain = Chain1D::new(links).expect("padded pieces form a chain");
    let pattern = graph_pattern(f, &chain, coarse)?;
    Ok(NaturalRefinement { chain, pattern })
}

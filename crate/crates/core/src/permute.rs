//! Flattened graphs, admissible permutations, zigzags and topmost orders.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chains::Chain1D;
use crate::plmap::{Direction, PLMap};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PermuteError {
    #[error("permutation has {got} entries, map has {expected} branches")]
    SizeMismatch { expected: usize, got: usize },
    #[error("branch index {index} out of range 0..={max}")]
    BadIndex { index: usize, max: usize },
    #[error("not a bijection on 0..={0}")]
    NotABijection(usize),
    #[error("{0} branches is too many to enumerate without a limit")]
    TooManyBranches(usize),
    #[error("no topmost order found for branch {0} although it is not inside a zigzag")]
    NoTopmostFound(usize),
    #[error("permutation syntax error near {0:?}")]
    Syntax(String),
}

/// Which end of the two horizontals a connector joins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatBranch {
    pub index: usize,
    pub image: (Rational, Rational),
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connector {
    pub junction: usize,
    pub value: Rational,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatGraph {
    pub branches: Vec<FlatBranch>,
    pub connectors: Vec<Connector>,
}

pub fn flatten(f: &PLMap) -> FlatGraph {
    let branches = f
        .branches()
        .map(|b| FlatBranch {
            index: b.index,
            image: b.image(),
            direction: b.direction(),
        })
        .collect();
    let connectors = (1..=f.top_index())
        .map(|j| Connector {
            junction: j,
            value: f.values()[j].clone(),
            side: if f.is_local_max(j) { Side::Right } else { Side::Left },
        })
        .collect();
    FlatGraph { branches, connectors }
}

/// Heights `p(0), ..., p(m)` of the branches.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Permutation, PermuteError> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || seen[i] {
                return Err(PermuteError::NotABijection(n.saturating_sub(1)));
            }
            seen[i] = true;
        }
        Ok(Permutation(images))
    }

    pub fn identity(n: usize) -> Permutation {
        Permutation((0..n).collect())
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn height(&self, j: usize) -> usize {
        self.0[j]
    }

    /// `inverse()[h]` is the branch at height `h`.
    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.0.len()];
        for (j, &h) in self.0.iter().enumerate() {
            inv[h] = j;
        }
        inv
    }

    /// Branch at the top height.
    pub fn top(&self) -> usize {
        self.inverse()[self.0.len() - 1]
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = PermuteError;
    fn try_from(v: Vec<usize>) -> Result<Self, Self::Error> {
        Permutation::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.0
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "perm")?;
        for h in &self.0 {
            write!(f, " {h}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Permutation {
    type Err = PermuteError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s.trim();
        let body = body.strip_prefix("perm").unwrap_or(body);
        let images = body
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse().map_err(|_| PermuteError::Syntax(t.to_string())))
            .collect::<Result<Vec<usize>, _>>()?;
        Permutation::new(images)
    }
}

/// How close a connector value may come to a horizontal it passes.
#[derive(Debug, Clone, Copy)]
pub enum Mode<'a> {
    /// The value must avoid the image of every branch in between.
    Strict,
    /// An endpoint value of the branch in between may share a link with it.
    Chain(&'a Chain1D),
    /// An endpoint value of the branch in between may equal it; this is the
    /// chain condition for every sufficiently fine chain.
    Ties,
}

fn check_len(f: &PLMap, p: &Permutation) -> Result<(), PermuteError> {
    if p.len() != f.branch_count() {
        return Err(PermuteError::SizeMismatch {
            expected: f.branch_count(),
            got: p.len(),
        });
    }
    Ok(())
}

fn check_index(f: &PLMap, k: usize) -> Result<(), PermuteError> {
    if k > f.top_index() {
        return Err(PermuteError::BadIndex {
            index: k,
            max: f.top_index(),
        });
    }
    Ok(())
}

/// Whether connector value `v` may pass branch `k`.
fn passes(f: &PLMap, k: usize, v: &Rational, mode: Mode<'_>) -> bool {
    let b = f.branch(k);
    if !b.image_contains(v) {
        return true;
    }
    match mode {
        Mode::Strict => false,
        Mode::Ties => &b.value_lo == v || &b.value_hi == v,
        Mode::Chain(c) => c.share_link(&b.value_lo, v) || c.share_link(&b.value_hi, v),
    }
}

pub fn is_admissible(f: &PLMap, p: &Permutation, mode: Mode<'_>) -> Result<bool, PermuteError> {
    check_len(f, p)?;
    Ok(first_violation(f, p, mode).is_none())
}

/// First `(junction, branch)` pair where a connector meets a horizontal
/// between its ends.
pub fn first_violation(f: &PLMap, p: &Permutation, mode: Mode<'_>) -> Option<(usize, usize)> {
    let inv = p.inverse();
    for j in 1..=f.top_index() {
        let v = &f.values()[j];
        let (a, b) = (p.height(j - 1), p.height(j));
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        for &k in &inv[lo + 1..hi] {
            if !passes(f, k, v, mode) {
                return Some((j, k));
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZigzagWitness {
    pub a: Rational,
    pub e: Rational,
    pub orientation: Direction,
}

/// A decreasing branch is trapped when some critical point on its left dips
/// below its lower end and some critical point on its right rises above its
/// upper end, these being the extremes of `f` between them. Increasing
/// branches use the mirror condition.
pub fn is_inside_zigzag(f: &PLMap, k: usize) -> Result<Option<ZigzagWitness>, PermuteError> {
    check_index(f, k)?;
    let t = f.breakpoints();
    let v = f.values();
    let n = t.len();
    let down = v[k] > v[k + 1];
    for ai in 0..k {
        let left_ok = if down { v[ai] < v[k + 1] } else { v[ai] > v[k + 1] };
        if !left_ok {
            continue;
        }
        for ei in k + 2..n {
            let right_ok = if down { v[ei] > v[k] } else { v[ei] < v[k] };
            if !right_ok {
                continue;
            }
            let (lo, hi) = f.range_on(&t[ai], &t[ei]);
            let extremes = if down {
                v[ai] == lo && v[ei] == hi
            } else {
                v[ai] == hi && v[ei] == lo
            };
            if extremes {
                return Ok(Some(ZigzagWitness {
                    a: t[ai].clone(),
                    e: t[ei].clone(),
                    orientation: if down { Direction::Down } else { Direction::Up },
                }));
            }
        }
    }
    Ok(None)
}

/// A permutation with `p(k) = m`, or `None` when branch `k` is inside a zigzag.
///
/// The returned order satisfies the strict condition whenever no two
/// critical values coincide; with coincident values it satisfies the tie
/// condition with nested connectors, which a planar layout can realize.
pub fn topmost_permutation(f: &PLMap, k: usize) -> Result<Option<Permutation>, PermuteError> {
    if is_inside_zigzag(f, k)?.is_some() {
        return Ok(None);
    }
    search_topmost(f, k, false)
        .or_else(|| search_topmost(f, k, true))
        .map(Some)
        .ok_or(PermuteError::NoTopmostFound(k))
}

/// Search for a top-down placement of the branches with `k` first.
///
/// Branches are placed one height at a time. A connector with one end
/// placed is open and every branch placed meanwhile must let it pass.
/// Connectors with equal values and the same side must close in reverse
/// order of opening. With `strict_only` ties are never allowed.
pub fn find_topmost(f: &PLMap, k: usize, strict_only: bool) -> Result<Option<Permutation>, PermuteError> {
    check_index(f, k)?;
    let s = Search::new(f, strict_only);
    Ok(s.run(k, true).or_else(|| s.run(k, false)))
}

fn search_topmost(f: &PLMap, k: usize, strict_only: bool) -> Option<Permutation> {
    let s = Search::new(f, strict_only);
    s.run(k, true).or_else(|| s.run(k, false))
}

const NODE_BUDGET: usize = 400_000;

struct Search<'a> {
    f: &'a PLMap,
    strict_only: bool,
    maxima: Vec<bool>,
}

#[derive(Clone)]
struct State {
    placed: Vec<bool>,
    order: Vec<usize>,
    open: Vec<usize>,
}

impl<'a> Search<'a> {
    fn new(f: &'a PLMap, strict_only: bool) -> Search<'a> {
        let maxima = (0..f.breakpoints().len()).map(|j| f.is_local_max(j)).collect();
        Search { f, strict_only, maxima }
    }

    fn m(&self) -> usize {
        self.f.top_index()
    }

    fn run(&self, k: usize, contiguous: bool) -> Option<Permutation> {
        let n = self.f.branch_count();
        let mut st = State {
            placed: vec![false; n],
            order: Vec::with_capacity(n),
            open: Vec::new(),
        };
        self.place(&mut st, k);
        let mut failed = HashSet::new();
        let mut budget = NODE_BUDGET;
        if self.dfs(&mut st, contiguous, &mut failed, &mut budget) {
            let mut p = vec![0; n];
            for (i, &b) in st.order.iter().enumerate() {
                p[b] = n - 1 - i;
            }
            Some(Permutation(p))
        } else {
            None
        }
    }

    fn dfs(
        &self,
        st: &mut State,
        contiguous: bool,
        failed: &mut HashSet<(Vec<bool>, Vec<usize>)>,
        budget: &mut usize,
    ) -> bool {
        if st.order.len() == st.placed.len() {
            return true;
        }
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        let key = (st.placed.clone(), st.open.clone());
        if failed.contains(&key) {
            return false;
        }
        for b in self.candidates(st, contiguous) {
            if self.can_place(st, b) {
                let saved = st.clone();
                self.place(st, b);
                if self.dfs(st, contiguous, failed, budget) {
                    return true;
                }
                *st = saved;
            }
        }
        failed.insert(key);
        false
    }

    fn candidates(&self, st: &State, contiguous: bool) -> Vec<usize> {
        if contiguous {
            let lo = st.placed.iter().position(|&x| x).unwrap();
            let hi = st.placed.iter().rposition(|&x| x).unwrap();
            let mut c = Vec::new();
            if lo > 0 {
                c.push(lo - 1);
            }
            if hi < self.m() {
                c.push(hi + 1);
            }
            c
        } else {
            (0..st.placed.len()).filter(|&b| !st.placed[b]).collect()
        }
    }

    fn can_place(&self, st: &State, b: usize) -> bool {
        st.open.iter().all(|&j| self.compatible(st, j, b))
    }

    /// Whether branch `b` may be placed while connector `j` is open.
    fn compatible(&self, st: &State, j: usize, b: usize) -> bool {
        if b + 1 == j || b == j {
            return true;
        }
        let vals = self.f.values();
        let v = &vals[j];
        let br = self.f.branch(b);
        if !br.image_contains(v) {
            return true;
        }
        if self.strict_only {
            return false;
        }
        let end = if &vals[b] == v {
            b
        } else if &vals[b + 1] == v {
            b + 1
        } else {
            return false;
        };
        if end == 0 || end == self.m() + 1 {
            return true;
        }
        if self.maxima[end] != self.maxima[j] {
            return true;
        }
        // placing b closes connector `end` when it is open; it must be the younger
        match (
            st.open.iter().position(|&x| x == end),
            st.open.iter().position(|&x| x == j),
        ) {
            (Some(pe), Some(pj)) => pe > pj,
            _ => true,
        }
    }

    fn place(&self, st: &mut State, b: usize) {
        st.placed[b] = true;
        st.order.push(b);
        for c in [b, b + 1] {
            if c == 0 || c > self.m() {
                continue;
            }
            let other = if c == b { b - 1 } else { b + 1 };
            if st.placed[other] {
                st.open.retain(|&x| x != c);
            } else {
                st.open.push(c);
            }
        }
    }
}

/// Admissible permutations in lexicographic order of their image lists.
pub fn enumerate_admissible<'a>(
    f: &'a PLMap,
    mode: Mode<'a>,
    limit: Option<usize>,
) -> Result<impl Iterator<Item = Permutation> + 'a, PermuteError> {
    let n = f.branch_count();
    if n > 9 && limit.is_none() {
        return Err(PermuteError::TooManyBranches(n));
    }
    let iter = Lexicographic::new(n)
        .map(Permutation)
        .filter(move |p| first_violation(f, p, mode).is_none());
    Ok(iter.take(limit.unwrap_or(usize::MAX)))
}

struct Lexicographic {
    next: Option<Vec<usize>>,
}

impl Lexicographic {
    fn new(n: usize) -> Lexicographic {
        Lexicographic {
            next: Some((0..n).collect()),
        }
    }
}

impl Iterator for Lexicographic {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.next.take()?;
        let mut nxt = cur.clone();
        if let Some(i) = (1..nxt.len()).rev().find(|&i| nxt[i - 1] < nxt[i]) {
            let j = (i..nxt.len()).rev().find(|&j| nxt[j] > nxt[i - 1]).unwrap();
            nxt.swap(i - 1, j);
            nxt[i..].reverse();
            self.next = Some(nxt);
        }
        Some(cur)
    }
}

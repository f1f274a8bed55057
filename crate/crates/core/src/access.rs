//! Surjective intervals, right accessible sets, pullbacks, topmost
//! endpoints and stage certificates.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::chains::separating_chain;
use crate::compose::{layout_within, PermutedGraph};
use crate::geometry::{upward_ray_clear, Point};
use crate::intervals::{Interval, IntervalSet};
use crate::permute::{
    enumerate_admissible, is_inside_zigzag, topmost_permutation, Mode, Permutation, PermuteError, ZigzagWitness,
};
use crate::plmap::{builtin, Direction, MapError, PLMap};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AccessError {
    #[error("no subinterval maps onto {0}")]
    NoSurjectiveInterval(Interval),
    #[error("bad interval: {0}")]
    BadInterval(String),
    #[error("no permutation makes both ends of {0} topmost")]
    NotConstructible(Interval),
    #[error(
        "{found} surjective intervals{}, need {needed}",
        .stage.map(|s| format!(" at stage {s}")).unwrap_or_default()
    )]
    TooFewSurjectiveIntervals {
        stage: Option<usize>,
        found: usize,
        needed: usize,
    },
    #[error("stage {stage}: branch {branch} is inside a zigzag (a={}, e={})", .witness.a, .witness.e)]
    ZigzagObstruction {
        stage: usize,
        branch: usize,
        witness: ZigzagWitness,
    },
    #[error("bad blocks: {0}")]
    BadBlocks(String),
    #[error("{0} stages but {1} entries")]
    LengthMismatch(usize, usize),
    #[error("epsilon schedule must be positive, strictly decreasing and cover every stage")]
    BadSchedule,
    #[error("bad plan: {0}")]
    BadPlan(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Permute(#[from] PermuteError),
}

fn closed(lo: Rational, hi: Rational) -> Interval {
    Interval::closed(lo, hi)
}

/// A minimal interval mapped onto the target, with its right accessible set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurjectiveInterval {
    pub interval: Interval,
    pub direction: Direction,
    pub right_accessible: IntervalSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurjectiveDecomposition {
    pub target: Interval,
    pub intervals: Vec<SurjectiveInterval>,
}

impl SurjectiveDecomposition {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// 1-based.
    pub fn get(&self, i: usize) -> &SurjectiveInterval {
        &self.intervals[i - 1]
    }
}

pub fn surjective_intervals(f: &PLMap, target: &Interval) -> Result<SurjectiveDecomposition, AccessError> {
    surjective_intervals_within(f, &closed(Rational::zero(), Rational::one()), target)
}

/// Minimal closed subintervals of `domain` mapped exactly onto `target`,
/// left to right.
pub fn surjective_intervals_within(
    f: &PLMap,
    domain: &Interval,
    target: &Interval,
) -> Result<SurjectiveDecomposition, AccessError> {
    let (lo, hi) = (&target.lo, &target.hi);
    if lo >= hi {
        return Err(AccessError::BadInterval(format!("target {target} is degenerate")));
    }
    let inside = |x: &Rational| &domain.lo <= x && x <= &domain.hi;
    // (position, hits the top of the target)
    let mut events: Vec<(Rational, bool)> = Vec::new();
    for (y, top) in [(lo, false), (hi, true)] {
        events.extend(
            f.preimages_unchecked(y)
                .into_iter()
                .filter(|x| inside(x))
                .map(|x| (x, top)),
        );
    }
    events.sort();
    let mut intervals = Vec::new();
    for w in events.windows(2) {
        let ((a, ta), (b, tb)) = (&w[0], &w[1]);
        if ta == tb || f.range_on(a, b) != (lo.clone(), hi.clone()) {
            continue;
        }
        let interval = closed(a.clone(), b.clone());
        intervals.push(SurjectiveInterval {
            right_accessible: right_accessible(f, &interval),
            direction: if *ta { Direction::Down } else { Direction::Up },
            interval,
        });
    }
    if intervals.is_empty() {
        return Err(AccessError::NoSurjectiveInterval(target.clone()));
    }
    Ok(SurjectiveDecomposition {
        target: target.clone(),
        intervals,
    })
}

/// Points of `a` whose value is never taken again further right in `a`.
pub fn right_accessible(f: &PLMap, a: &Interval) -> IntervalSet {
    let mut cuts = vec![a.lo.clone()];
    cuts.extend(f.points().map(|(t, _)| t).filter(|t| &a.lo < *t && *t < &a.hi).cloned());
    cuts.push(a.hi.clone());

    let mut out = IntervalSet::new();
    out.insert(closed(a.hi.clone(), a.hi.clone()));
    let end = f.eval_unchecked(&a.hi);
    let (mut low, mut high) = (end.clone(), end);
    for w in cuts.windows(2).rev() {
        let (u, v) = (&w[0], &w[1]);
        let (fu, fv) = (f.eval_unchecked(u), f.eval_unchecked(v));
        let bound = if fu < fv {
            (fu < low).then(|| low.clone())
        } else {
            (fu > high).then(|| high.clone())
        };
        if let Some(y) = bound {
            let x = u + (&y - &fu) / (&fv - &fu) * (v - u);
            out.insert(Interval {
                lo: u.clone(),
                hi: x,
                lo_closed: true,
                hi_closed: false,
            });
        }
        low = low.min(fu.clone());
        high = high.max(fu);
    }
    out
}

/// `J^i ⊂ A` with `f(J^i) = J`, ends to ends, starting from the rightmost
/// preimages of the ends of `J`.
pub fn pullback_interval(f: &PLMap, a: &Interval, j: &Interval) -> Result<Interval, AccessError> {
    let (tlo, thi) = f.range_on(&a.lo, &a.hi);
    if j.lo > j.hi || j.lo < tlo || j.hi > thi {
        return Err(AccessError::BadInterval(format!(
            "{j} is not inside the image [{tlo},{thi}] of {a}"
        )));
    }
    let within = |y: &Rational| -> Vec<Rational> {
        f.preimages_unchecked(y)
            .into_iter()
            .filter(|x| &a.lo <= x && x <= &a.hi)
            .collect()
    };
    let (pre_lo, pre_hi) = (within(&j.lo), within(&j.hi));
    let last_lo = pre_lo.last().expect("value in image").clone();
    let last_hi = pre_hi.last().expect("value in image").clone();
    let first_after = |pre: &[Rational], x: &Rational| pre.iter().find(|p| *p > x).cloned();
    let out = if last_lo < last_hi {
        let end = first_after(&pre_hi, &last_lo).expect("later preimage exists");
        closed(last_lo, end)
    } else if last_hi < last_lo {
        let end = first_after(&pre_lo, &last_hi).expect("later preimage exists");
        closed(last_hi, end)
    } else {
        closed(last_lo.clone(), last_lo)
    };
    debug_assert_eq!(f.range_on(&out.lo, &out.hi), (j.lo.clone(), j.hi.clone()));
    Ok(out)
}

fn height(p: &Permutation, j: usize) -> Rational {
    Rational::from_int(p.height(j) as i64)
}

/// Highest planar point of the drawing that represents `x`.
pub fn image_point(g: &PermutedGraph, x: &Rational) -> Point {
    let f = g.map();
    let p = g.permutation();
    let t = f.breakpoints();
    let xs = g.offsets();
    let m = f.top_index();
    if let Ok(j) = t.binary_search(x) {
        return match j {
            0 => Point::new(xs[0].clone(), height(p, 0)),
            j if j == m + 1 => Point::new(xs[m + 1].clone(), height(p, m)),
            j => Point::new(xs[j].clone(), height(p, j - 1).max(height(p, j))),
        };
    }
    Point::new(f.eval_unchecked(x), height(p, f.branch_of(x)))
}

/// Whether nothing of the drawing lies straight above the image of `x`.
pub fn is_topmost(g: &PermutedGraph, x: &Rational) -> bool {
    upward_ray_clear(&g.polyline(), &image_point(g, x))
}

fn offset_bound(f: &PLMap, xs: &[&Rational]) -> Rational {
    let quarter = Rational::new(1, 4);
    xs.iter()
        .flat_map(|x| {
            let y = f.eval_unchecked(x);
            f.values()
                .iter()
                .filter(|v| **v != y)
                .map(|v| (v - &y).abs())
                .collect::<Vec<_>>()
        })
        .min()
        .map_or_else(|| quarter.clone(), |d| d * &quarter)
}

fn both_topmost(f: &PLMap, p: &Permutation, ends: [&Rational; 2]) -> bool {
    let chain = separating_chain(f);
    let delta = offset_bound(f, &ends);
    match layout_within(f, p, &chain, &delta) {
        Ok(g) => ends.iter().all(|x| is_topmost(&g, x)),
        Err(_) => false,
    }
}

/// Largest branch count searched exhaustively.
pub const BRUTE_FORCE_BRANCHES: usize = 8;

/// A permutation of the graph of `f` under which both ends of `j` are
/// topmost, checked by casting rays on an actual layout.
pub fn two_point_topmost(f: &PLMap, a: &Interval, j: &Interval) -> Result<Permutation, AccessError> {
    if j.lo < a.lo || j.hi > a.hi {
        return Err(AccessError::BadInterval(format!("{j} is not inside {a}")));
    }
    let ends = [&j.lo, &j.hi];
    if f.branch_count() <= BRUTE_FORCE_BRANCHES {
        for mode in [Mode::Strict, Mode::Ties] {
            for p in enumerate_admissible(f, mode, None)? {
                if both_topmost(f, &p, ends) {
                    return Ok(p);
                }
            }
        }
    } else {
        for x in ends {
            if let Some(p) = topmost_permutation(f, f.branch_of(x))? {
                if both_topmost(f, &p, ends) {
                    return Ok(p);
                }
            }
        }
    }
    Err(AccessError::NotConstructible(j.clone()))
}

/// Two surjective intervals of `f` on `k`, at least two apart, whose
/// pullbacks of `j` can each be made topmost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RestrictedPair {
    /// 1-based positions among the surjective intervals on `k`.
    pub alpha: usize,
    pub beta: usize,
    pub pullbacks: (Interval, Interval),
    pub permutations: (Permutation, Permutation),
}

pub fn two_point_topmost_restricted(f: &PLMap, k: &Interval, j: &Interval) -> Result<RestrictedPair, AccessError> {
    let (lo, hi) = f.range_on(&k.lo, &k.hi);
    let too_few = |found| AccessError::TooFewSurjectiveIntervals {
        stage: None,
        found,
        needed: 4,
    };
    let dec = if lo < hi {
        surjective_intervals_within(f, k, &closed(lo, hi)).map_err(|_| too_few(0))?
    } else {
        return Err(too_few(0));
    };
    let n = dec.len();
    if n < 4 {
        return Err(too_few(n));
    }
    let mut solved: Vec<Option<Option<(Interval, Permutation)>>> = vec![None; n + 1];
    let mut solve = |i: usize| -> Option<(Interval, Permutation)> {
        solved[i]
            .get_or_insert_with(|| {
                let a = &dec.get(i).interval;
                let pb = pullback_interval(f, a, j).ok()?;
                let p = two_point_topmost(f, a, &pb).ok()?;
                Some((pb, p))
            })
            .clone()
    };
    for alpha in 1..=n {
        for beta in alpha + 2..=n {
            if let (Some((ja, pa)), Some((jb, pb))) = (solve(alpha), solve(beta)) {
                return Ok(RestrictedPair {
                    alpha,
                    beta,
                    pullbacks: (ja, jb),
                    permutations: (pa, pb),
                });
            }
        }
    }
    Err(AccessError::NotConstructible(j.clone()))
}

/// Some `x1 < x2 < x3` with values within `eps` of `(0, 1, 0)` or `(1, 0, 1)`.
pub fn is_p_eps(f: &PLMap, eps: &Rational) -> bool {
    let low = |v: &Rational| v < eps;
    let high = |v: &Rational| &(Rational::one() - v) < eps;
    let scan = |tests: [&dyn Fn(&Rational) -> bool; 3]| {
        let mut stage = 0;
        for v in f.values() {
            if stage < 3 && tests[stage](v) {
                stage += 1;
            }
        }
        stage == 3
    };
    scan([&low, &high, &low]) || scan([&high, &low, &high])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertifiedStage {
    pub map: PLMap,
    pub branch: usize,
    pub permutation: Permutation,
}

/// Per-stage topmost permutations for a designated branch itinerary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessCertificate {
    pub stages: Vec<CertifiedStage>,
    /// Coordinates `x_i` consistent with the itinerary; `None` once empty.
    pub windows: Vec<Option<Interval>>,
}

impl AccessCertificate {
    pub fn plan(&self) -> EmbeddingPlan {
        let marks = match self.windows.last() {
            Some(Some(w)) => vec![w.lo.mid(&w.hi)],
            _ => Vec::new(),
        };
        EmbeddingPlan::new(
            self.stages
                .iter()
                .map(|s| PlanStage {
                    map: s.map.clone(),
                    permutation: s.permutation.clone(),
                })
                .collect(),
            marks,
        )
    }

    pub fn to_json(&self) -> Value {
        json!({
            "stages": self.stages.iter().map(|s| json!({
                "map": s.map.to_string(),
                "branch": s.branch,
                "permutation": s.permutation.images(),
            })).collect::<Vec<_>>(),
            "windows": self.windows.iter().map(|w| w.as_ref().map(|w| json!([w.lo, w.hi]))).collect::<Vec<_>>(),
        })
    }
}

pub fn certificate(stages: &[PLMap], branches: &[usize]) -> Result<AccessCertificate, AccessError> {
    if stages.len() != branches.len() {
        return Err(AccessError::LengthMismatch(stages.len(), branches.len()));
    }
    let mut out = Vec::new();
    for (i, (f, &k)) in stages.iter().zip(branches).enumerate() {
        if let Some(witness) = is_inside_zigzag(f, k)? {
            return Err(AccessError::ZigzagObstruction {
                stage: i + 1,
                branch: k,
                witness,
            });
        }
        let p = topmost_permutation(f, k)?.expect("no zigzag witness");
        out.push(CertifiedStage {
            map: f.clone(),
            branch: k,
            permutation: p,
        });
    }
    let windows = itinerary_windows(&out);
    Ok(AccessCertificate { stages: out, windows })
}

fn itinerary_windows(stages: &[CertifiedStage]) -> Vec<Option<Interval>> {
    let mut out: Vec<Option<Interval>> = Vec::new();
    for s in stages {
        let b = s.map.branch(s.branch);
        let next = match out.last() {
            None => Some(closed(b.lo.clone(), b.hi.clone())),
            Some(None) => None,
            Some(Some(prev)) => {
                let (ilo, ihi) = b.image();
                let lo = ilo.max(prev.lo.clone());
                let hi = ihi.min(prev.hi.clone());
                (lo <= hi).then(|| {
                    let x = b.solve(&lo).expect("inside image");
                    let y = b.solve(&hi).expect("inside image");
                    closed(x.clone().min(y.clone()), x.max(y))
                })
            }
        };
        out.push(next);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanStage {
    pub map: PLMap,
    pub permutation: Permutation,
}

/// Stages to render, a decreasing half-width schedule (entry `i` for level
/// `i`, level 0 being the base chain), and marked points in the coordinate
/// of the deepest stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingPlan {
    pub stages: Vec<PlanStage>,
    pub epsilons: Vec<Rational>,
    pub marks: Vec<Rational>,
}

/// `(1/8) * 4^-i` for `i = 0..=depth`.
pub fn default_schedule(depth: usize) -> Vec<Rational> {
    let mut e = Rational::new(1, 8);
    let mut out = Vec::with_capacity(depth + 1);
    for _ in 0..=depth {
        out.push(e.clone());
        e = e * Rational::new(1, 4);
    }
    out
}

impl EmbeddingPlan {
    pub fn new(stages: Vec<PlanStage>, marks: Vec<Rational>) -> EmbeddingPlan {
        let epsilons = default_schedule(stages.len());
        EmbeddingPlan {
            stages,
            epsilons,
            marks,
        }
    }

    pub fn with_epsilons(mut self, epsilons: Vec<Rational>) -> Result<EmbeddingPlan, AccessError> {
        let decreasing = epsilons.windows(2).all(|w| w[1] < w[0]);
        if epsilons.len() <= self.stages.len() || !decreasing || !epsilons.iter().all(|e| e.is_positive()) {
            return Err(AccessError::BadSchedule);
        }
        self.epsilons = epsilons;
        Ok(self)
    }

    pub fn depth(&self) -> usize {
        self.stages.len()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "depth": self.depth(),
            "stages": self.stages.iter().map(|s| json!({
                "map": s.map.to_string(),
                "permutation": s.permutation.images(),
            })).collect::<Vec<_>>(),
            "epsilons": self.epsilons,
            "marks": self.marks,
        })
    }

    pub fn from_json(v: &Value) -> Result<EmbeddingPlan, AccessError> {
        let bad = |what: &str| AccessError::BadPlan(what.to_string());
        let stages = v["stages"]
            .as_array()
            .ok_or_else(|| bad("missing stages"))?
            .iter()
            .map(|s| {
                let map: PLMap = s["map"].as_str().ok_or_else(|| bad("stage map"))?.parse()?;
                let permutation: Permutation =
                    serde_json::from_value(s["permutation"].clone()).map_err(|e| bad(&e.to_string()))?;
                Ok(PlanStage { map, permutation })
            })
            .collect::<Result<Vec<_>, AccessError>>()?;
        let marks: Vec<Rational> = match v.get("marks") {
            Some(m) => serde_json::from_value(m.clone()).map_err(|e| bad(&e.to_string()))?,
            None => Vec::new(),
        };
        let plan = EmbeddingPlan::new(stages, marks);
        match v.get("epsilons") {
            Some(e) => {
                let eps: Vec<Rational> = serde_json::from_value(e.clone()).map_err(|e| bad(&e.to_string()))?;
                plan.with_epsilons(eps)
            }
            None => Ok(plan),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Choice {
    Left,
    Right,
}

impl std::str::FromStr for Choice {
    type Err = AccessError;

    fn from_str(s: &str) -> Result<Choice, AccessError> {
        match s.to_ascii_uppercase().as_str() {
            "LEFT" | "L" => Ok(Choice::Left),
            "RIGHT" | "R" => Ok(Choice::Right),
            _ => Err(AccessError::BadPlan(format!("unknown choice {s}"))),
        }
    }
}

/// One member of the family: the plan plus the nested pullbacks of `J`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyWitness {
    pub plan: EmbeddingPlan,
    /// `J`, then its successive pullbacks.
    pub intervals: Vec<Interval>,
    /// 1-based surjective interval picked at each stage.
    pub picks: Vec<usize>,
}

impl FamilyWitness {
    /// Both ends of the deepest pullback.
    pub fn marks(&self) -> (&Rational, &Rational) {
        let j = self.intervals.last().expect("J itself");
        (&j.lo, &j.hi)
    }
}

/// Left pick is the first surjective interval, right pick the smallest
/// index at least two past it.
pub fn family_witness(stages: &[PLMap], choices: &[Choice], j: &Interval) -> Result<FamilyWitness, AccessError> {
    if choices.len() > stages.len() {
        return Err(AccessError::LengthMismatch(stages.len(), choices.len()));
    }
    let mut decs = Vec::new();
    for (i, f) in stages.iter().enumerate() {
        let (lo, hi) = f.range_on(&Rational::zero(), &Rational::one());
        let dec = surjective_intervals(f, &closed(lo, hi))?;
        if dec.len() < 3 {
            return Err(AccessError::TooFewSurjectiveIntervals {
                stage: Some(i + 1),
                found: dec.len(),
                needed: 3,
            });
        }
        decs.push(dec);
    }
    let mut intervals = vec![j.clone()];
    let mut picks = Vec::new();
    let mut plan_stages = Vec::new();
    for (i, c) in choices.iter().enumerate() {
        let pick = match c {
            Choice::Left => 1,
            Choice::Right => 3,
        };
        let a = &decs[i].get(pick).interval;
        let next = pullback_interval(&stages[i], a, intervals.last().unwrap())?;
        let p = two_point_topmost(&stages[i], a, &next)?;
        plan_stages.push(PlanStage {
            map: stages[i].clone(),
            permutation: p,
        });
        picks.push(pick);
        intervals.push(next);
    }
    let last = intervals.last().unwrap();
    let marks = vec![last.lo.clone(), last.hi.clone()];
    Ok(FamilyWitness {
        plan: EmbeddingPlan::new(plan_stages, marks),
        intervals,
        picks,
    })
}

/// Iterate exponents for the itinerary blocks `n_1, n_2, …` (with `n_1 > 0`):
/// `n_1 - 1`, then `n_i + 2` at even positions and `n_i` at odd ones, zeros
/// dropped.
pub fn nadler_stages(blocks: &[u64]) -> Result<Vec<u64>, AccessError> {
    match blocks.first() {
        None => return Err(AccessError::BadBlocks("no blocks".into())),
        Some(0) => return Err(AccessError::BadBlocks("the first block must be positive".into())),
        _ => {}
    }
    let exps = blocks.iter().enumerate().map(|(i, &n)| match i {
        0 => n - 1,
        i if i % 2 == 1 => n + 2,
        _ => n,
    });
    Ok(exps.filter(|&e| e > 0).collect())
}

/// Stages `nadler^e` for each exponent, each with its first increasing
/// branch meeting the invariant middle interval.
pub fn nadler_certificate(blocks: &[u64]) -> Result<AccessCertificate, AccessError> {
    let base = builtin("nadler").expect("registry map");
    let (lo, hi) = (Rational::new(1, 5), Rational::new(4, 5));
    let mut maps = Vec::new();
    let mut branches = Vec::new();
    for e in nadler_stages(blocks)? {
        let f = base.iterate(e as usize)?;
        let k = f
            .branches()
            .find(|b| b.direction() == Direction::Up && b.lo < hi && b.hi > lo)
            .expect("increasing branch through the middle")
            .index;
        maps.push(f);
        branches.push(k);
    }
    certificate(&maps, &branches)
}

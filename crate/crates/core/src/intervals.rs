//! Finite unions of rational intervals with open or closed ends.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rational::Rational;

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: Rational,
    pub hi: Rational,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn closed(lo: Rational, hi: Rational) -> Interval {
        Interval {
            lo,
            hi,
            lo_closed: true,
            hi_closed: true,
        }
    }

    pub fn open(lo: Rational, hi: Rational) -> Interval {
        Interval {
            lo,
            hi,
            lo_closed: false,
            hi_closed: false,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    pub fn contains(&self, x: &Rational) -> bool {
        let above = if self.lo_closed { &self.lo <= x } else { &self.lo < x };
        let below = if self.hi_closed { x <= &self.hi } else { x < &self.hi };
        above && below
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = if self.lo_closed { '[' } else { '(' };
        let r = if self.hi_closed { ']' } else { ')' };
        write!(f, "{l}{},{}{r}", self.lo, self.hi)
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Sorted, pairwise disjoint components; touching components are merged.
#[derive(Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalSet {
    components: Vec<Interval>,
}

impl IntervalSet {
    pub fn new() -> IntervalSet {
        IntervalSet::default()
    }

    pub fn from_intervals(items: impl IntoIterator<Item = Interval>) -> IntervalSet {
        let mut set = IntervalSet::new();
        for i in items {
            set.insert(i);
        }
        set
    }

    pub fn components(&self) -> &[Interval] {
        &self.components
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn contains(&self, x: &Rational) -> bool {
        self.components.iter().any(|c| c.contains(x))
    }

    /// Add an interval, merging with overlapping or touching components.
    pub fn insert(&mut self, item: Interval) {
        if item.is_empty() {
            return;
        }
        let mut merged = item;
        let mut rest = Vec::with_capacity(self.components.len() + 1);
        for c in self.components.drain(..) {
            if joins(&c, &merged) {
                merged = union(&c, &merged);
            } else {
                rest.push(c);
            }
        }
        rest.push(merged);
        rest.sort_by(|a, b| a.lo.cmp(&b.lo).then(b.lo_closed.cmp(&a.lo_closed)));
        // a merge may make earlier disjoint components touch
        let mut out: Vec<Interval> = Vec::with_capacity(rest.len());
        for c in rest {
            match out.last_mut() {
                Some(last) if joins(last, &c) => *last = union(last, &c),
                _ => out.push(c),
            }
        }
        self.components = out;
    }
}

fn joins(a: &Interval, b: &Interval) -> bool {
    let (first, second) = if (&a.lo, !a.lo_closed) <= (&b.lo, !b.lo_closed) {
        (a, b)
    } else {
        (b, a)
    };
    match first.hi.cmp(&second.lo) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => first.hi_closed || second.lo_closed,
    }
}

fn union(a: &Interval, b: &Interval) -> Interval {
    let (lo, lo_closed) = match a.lo.cmp(&b.lo) {
        std::cmp::Ordering::Less => (a.lo.clone(), a.lo_closed),
        std::cmp::Ordering::Greater => (b.lo.clone(), b.lo_closed),
        std::cmp::Ordering::Equal => (a.lo.clone(), a.lo_closed || b.lo_closed),
    };
    let (hi, hi_closed) = match a.hi.cmp(&b.hi) {
        std::cmp::Ordering::Greater => (a.hi.clone(), a.hi_closed),
        std::cmp::Ordering::Less => (b.hi.clone(), b.hi_closed),
        std::cmp::Ordering::Equal => (a.hi.clone(), a.hi_closed || b.hi_closed),
    };
    Interval {
        lo,
        hi,
        lo_closed,
        hi_closed,
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return write!(f, "{{}}");
        }
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, " U ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

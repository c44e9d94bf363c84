//! Finite unions of intervals on the real line and quadratic inequality sets.

use std::cmp::Ordering;
use std::fmt;

use serde::de::{self, Deserializer};
use serde::ser::{SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};

/// A nonempty interval with explicit endpoint closedness. Infinite ends are open.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> Self {
        // adding 0.0 folds -0.0 into +0.0 so sorting by total order is safe
        Self {
            lo: lo + 0.0,
            hi: hi + 0.0,
            lo_closed: lo_closed && lo.is_finite(),
            hi_closed: hi_closed && hi.is_finite(),
        }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, true, true)
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, false, false)
    }

    pub fn point(x: f64) -> Self {
        Self::closed(x, x)
    }

    pub fn real_line() -> Self {
        Self::open(f64::NEG_INFINITY, f64::INFINITY)
    }

    /// `(-inf, hi]` or `(-inf, hi)`.
    pub fn below(hi: f64, closed: bool) -> Self {
        Self::new(f64::NEG_INFINITY, hi, false, closed)
    }

    /// `[lo, inf)` or `(lo, inf)`.
    pub fn above(lo: f64, closed: bool) -> Self {
        Self::new(lo, f64::INFINITY, closed, false)
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_nan()
            || self.hi.is_nan()
            || self.lo > self.hi
            || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    pub fn contains(&self, x: f64) -> bool {
        let above_lo = x > self.lo || (x == self.lo && self.lo_closed);
        let below_hi = x < self.hi || (x == self.hi && self.hi_closed);
        above_lo && below_hi
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    fn intersect(&self, other: &Interval) -> Option<Interval> {
        let (lo, lo_closed) = match self.lo.total_cmp(&other.lo) {
            Ordering::Greater => (self.lo, self.lo_closed),
            Ordering::Less => (other.lo, other.lo_closed),
            Ordering::Equal => (self.lo, self.lo_closed && other.lo_closed),
        };
        let (hi, hi_closed) = match self.hi.total_cmp(&other.hi) {
            Ordering::Less => (self.hi, self.hi_closed),
            Ordering::Greater => (other.hi, other.hi_closed),
            Ordering::Equal => (self.hi, self.hi_closed && other.hi_closed),
        };
        let out = Interval::new(lo, hi, lo_closed, hi_closed);
        (!out.is_empty()).then_some(out)
    }

    /// Orders right endpoints, an open end sorting before a closed one at the same value.
    fn cmp_hi(&self, other: &Interval) -> Ordering {
        self.hi
            .total_cmp(&other.hi)
            .then(self.hi_closed.cmp(&other.hi_closed))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

/// A finite union of disjoint intervals kept in sorted, merged form.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct IntervalSet {
    pieces: Vec<Interval>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self { pieces: Vec::new() }
    }

    pub fn real_line() -> Self {
        Self {
            pieces: vec![Interval::real_line()],
        }
    }

    pub fn from_interval(iv: Interval) -> Self {
        Self::from_intervals(vec![iv])
    }

    /// Canonicalizes an arbitrary list: drops empty pieces, sorts, and merges
    /// overlapping or touching pieces.
    pub fn from_intervals(ivs: Vec<Interval>) -> Self {
        let mut ivs: Vec<Interval> = ivs
            .into_iter()
            .map(|iv| Interval::new(iv.lo, iv.hi, iv.lo_closed, iv.hi_closed))
            .filter(|iv| !iv.is_empty())
            .collect();
        ivs.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(b.lo_closed.cmp(&a.lo_closed)));
        let mut pieces: Vec<Interval> = Vec::with_capacity(ivs.len());
        for iv in ivs {
            if let Some(last) = pieces.last_mut() {
                let touches =
                    iv.lo < last.hi || (iv.lo == last.hi && (iv.lo_closed || last.hi_closed));
                if touches {
                    match iv.hi.total_cmp(&last.hi) {
                        Ordering::Greater => {
                            last.hi = iv.hi;
                            last.hi_closed = iv.hi_closed;
                        }
                        Ordering::Equal => last.hi_closed |= iv.hi_closed,
                        Ordering::Less => {}
                    }
                    continue;
                }
            }
            pieces.push(iv);
        }
        Self { pieces }
    }

    pub fn pieces(&self) -> &[Interval] {
        &self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn is_real_line(&self) -> bool {
        self.pieces.len() == 1
            && self.pieces[0].lo == f64::NEG_INFINITY
            && self.pieces[0].hi == f64::INFINITY
    }

    pub fn contains(&self, x: f64) -> bool {
        let idx = self.pieces.partition_point(|iv| iv.hi < x);
        self.pieces[idx..].iter().take(2).any(|iv| iv.contains(x))
    }

    /// Total Lebesgue measure.
    pub fn measure(&self) -> f64 {
        self.pieces.iter().map(Interval::length).sum()
    }

    /// Finite endpoints in ascending order.
    pub fn endpoints(&self) -> Vec<f64> {
        self.pieces
            .iter()
            .flat_map(|iv| [iv.lo, iv.hi])
            .filter(|v| v.is_finite())
            .collect()
    }

    /// Distance from `x` to the nearest finite endpoint, infinite if there is none.
    pub fn distance_to_boundary(&self, x: f64) -> f64 {
        self.endpoints()
            .into_iter()
            .map(|e| (e - x).abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn complement(&self) -> Self {
        let mut out = Vec::with_capacity(self.pieces.len() + 1);
        let mut lo = f64::NEG_INFINITY;
        let mut lo_closed = false;
        for iv in &self.pieces {
            out.push(Interval::new(lo, iv.lo, lo_closed, !iv.lo_closed));
            lo = iv.hi;
            lo_closed = !iv.hi_closed;
        }
        out.push(Interval::new(lo, f64::INFINITY, lo_closed, false));
        Self::from_intervals(out)
    }

    /// Two-pointer intersection of two canonical sets.
    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let (a, b) = (&self.pieces, &other.pieces);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            if let Some(iv) = a[i].intersect(&b[j]) {
                out.push(iv);
            }
            match a[i].cmp_hi(&b[j]) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
            }
        }
        Self::from_intervals(out)
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        let mut all = self.pieces.clone();
        all.extend_from_slice(&other.pieces);
        Self::from_intervals(all)
    }

    /// Multiplies every endpoint by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> IntervalSet {
        Self::from_intervals(
            self.pieces
                .iter()
                .map(|iv| Interval::new(iv.lo * factor, iv.hi * factor, iv.lo_closed, iv.hi_closed))
                .collect(),
        )
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pieces.is_empty() {
            return write!(f, "{{}}");
        }
        for (k, iv) in self.pieces.iter().enumerate() {
            if k > 0 {
                write!(f, " U ")?;
            }
            write!(f, "{iv}")?;
        }
        Ok(())
    }
}

/// Boundary position used by the sweep: `(x, false)` sits just before `x`,
/// `(x, true)` just after it.
type SweepKey = (f64, bool);

fn sweep(sets: &[IntervalSet], keep: impl Fn(usize) -> bool) -> IntervalSet {
    let mut events: Vec<(SweepKey, i64)> = Vec::new();
    for set in sets {
        for iv in &set.pieces {
            events.push(((iv.lo, !iv.lo_closed), 1));
            events.push(((iv.hi, iv.hi_closed), -1));
        }
    }
    events.sort_by(|(ka, _), (kb, _)| ka.0.total_cmp(&kb.0).then(ka.1.cmp(&kb.1)));

    let mut out = Vec::new();
    let mut depth: i64 = 0;
    let mut start: Option<SweepKey> = None;
    let mut k = 0;
    while k < events.len() {
        let key = events[k].0;
        while k < events.len() && events[k].0 == key {
            depth += events[k].1;
            k += 1;
        }
        let inside = depth > 0 && keep(depth as usize);
        match (inside, start) {
            (true, None) => start = Some(key),
            (false, Some(s)) => {
                out.push(Interval::new(s.0, key.0, !s.1, key.1));
                start = None;
            }
            _ => {}
        }
    }
    IntervalSet::from_intervals(out)
}

/// Intersection of all sets by a single sort-and-sweep. The empty family gives the real line.
pub fn intersect_all(sets: &[IntervalSet]) -> IntervalSet {
    if sets.is_empty() {
        return IntervalSet::real_line();
    }
    if sets.iter().any(IntervalSet::is_empty) {
        return IntervalSet::empty();
    }
    let k = sets.len();
    sweep(sets, |depth| depth == k)
}

/// Union of all sets. The empty family gives the empty set.
pub fn union_all(sets: &[IntervalSet]) -> IntervalSet {
    sweep(sets, |depth| depth >= 1)
}

/// Direction of a quadratic inequality against zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    LessEq,
    GreaterEq,
}

/// The set `{phi : a phi^2 + b phi + c (<= | >=) 0}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticConstraint {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub sense: Sense,
}

impl QuadraticConstraint {
    pub fn le(a: f64, b: f64, c: f64) -> Self {
        Self {
            a,
            b,
            c,
            sense: Sense::LessEq,
        }
    }

    pub fn ge(a: f64, b: f64, c: f64) -> Self {
        Self {
            a,
            b,
            c,
            sense: Sense::GreaterEq,
        }
    }

    pub fn eval(&self, phi: f64) -> f64 {
        (self.a * phi + self.b) * phi + self.c
    }
}

pub const DEFAULT_QUADRATIC_TOL: f64 = 1e-9;

/// Solves a quadratic inequality. Coefficients within `tol` of the largest in
/// magnitude are treated as zero.
pub fn solve_quadratic(q: &QuadraticConstraint, tol: f64) -> IntervalSet {
    solve_quadratic_scaled(q, tol, 1.0)
}

/// As [`solve_quadratic`], with degeneracy judged on `phi = phi_scale * t` so the
/// three coefficients are compared in the same units.
pub fn solve_quadratic_scaled(q: &QuadraticConstraint, tol: f64, phi_scale: f64) -> IntervalSet {
    let (a, b, c) = match q.sense {
        Sense::LessEq => (q.a, q.b, q.c),
        Sense::GreaterEq => (-q.a, -q.b, -q.c),
    };
    let s = if phi_scale.is_finite() && phi_scale > 0.0 {
        phi_scale
    } else {
        1.0
    };
    let (sa, sb, sc) = ((a * s * s).abs(), (b * s).abs(), c.abs());
    let scale = sa.max(sb).max(sc);
    if scale == 0.0 {
        return IntervalSet::real_line();
    }
    let quad = sa > tol * scale;
    let lin = sb > tol * scale;

    if !quad {
        if !lin {
            return if c <= 0.0 {
                IntervalSet::real_line()
            } else {
                IntervalSet::empty()
            };
        }
        let root = -c / b;
        let iv = if b > 0.0 {
            Interval::below(root, true)
        } else {
            Interval::above(root, true)
        };
        return IntervalSet::from_interval(iv);
    }

    let mut disc = b * b - 4.0 * a * c;
    let disc_tol = tol * (b * b + 4.0 * (a * c).abs());
    if disc < 0.0 && -disc <= disc_tol {
        disc = 0.0;
    }
    if disc < 0.0 {
        return if a > 0.0 {
            IntervalSet::empty()
        } else {
            IntervalSet::real_line()
        };
    }
    if disc == 0.0 {
        return if a > 0.0 {
            IntervalSet::from_interval(Interval::point(-b / (2.0 * a)))
        } else {
            IntervalSet::real_line()
        };
    }
    let sq = disc.sqrt();
    let qv = -0.5 * (b + b.signum() * sq);
    let (mut r1, mut r2) = if b == 0.0 {
        let r = sq / (2.0 * a.abs());
        (-r, r)
    } else {
        (qv / a, c / qv)
    };
    if r1 > r2 {
        std::mem::swap(&mut r1, &mut r2);
    }
    if a > 0.0 {
        IntervalSet::from_interval(Interval::closed(r1, r2))
    } else {
        IntervalSet::from_intervals(vec![Interval::below(r1, true), Interval::above(r2, true)])
    }
}

fn bound_to_json(v: f64) -> Bound {
    if v == f64::INFINITY {
        Bound::Text("inf".into())
    } else if v == f64::NEG_INFINITY {
        Bound::Text("-inf".into())
    } else {
        Bound::Num(v)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Bound {
    Num(f64),
    Text(String),
}

impl Bound {
    fn value<E: de::Error>(self) -> Result<f64, E> {
        match self {
            Bound::Num(v) => Ok(v),
            Bound::Text(t) => match t.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(E::custom(format!("bad interval bound '{other}'"))),
            },
        }
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut t = serializer.serialize_tuple(4)?;
        t.serialize_element(&bound_to_json(self.lo))?;
        t.serialize_element(&bound_to_json(self.hi))?;
        t.serialize_element(&self.lo_closed)?;
        t.serialize_element(&self.hi_closed)?;
        t.end()
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let (lo, hi, lc, hc) = <(Bound, Bound, bool, bool)>::deserialize(deserializer)?;
        Ok(Interval::new(lo.value()?, hi.value()?, lc, hc))
    }
}

impl Serialize for IntervalSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.pieces.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for IntervalSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(Self::from_intervals(Vec::<Interval>::deserialize(
            deserializer,
        )?))
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Exact solution path of the FLSA in `λ`.
//!
//! As `λ` grows, adjacent segments only ever fuse; change points never move
//! and never flip sign. With the change points fixed, each level is affine in
//! `λ`:
//!
//! ```text
//! m_k(λ) = (S_k + λ c_k) / n_k,    c_k = s_right − s_left ∈ {−2, …, 2},
//! ```
//!
//! so the fusion value of two neighbours follows from their segment sums,
//! lengths and boundary signs alone. The path is traced by processing those
//! fusion values in increasing order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{FlsaError, Result};
use crate::signal::{Segmentation, Sign, SignChange, Signal};
use crate::solver::segment_means;
use crate::sum;

/// Relative tolerance under which two fusion values count as simultaneous.
const TIE_RELATIVE: f64 = 1e-12;

/// One breakpoint of the path: `segmentation` is the solution structure on
/// `[lambda, next breakpoint)`, with levels evaluated at `lambda`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathEvent {
    pub lambda: f64,
    pub segmentation: Segmentation,
    /// Change points that disappeared at this breakpoint.
    pub fused: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaPath {
    n: usize,
    events: Vec<PathEvent>,
}

impl LambdaPath {
    /// Builds a path from explicit events, e.g. for validation.
    pub fn from_events(events: Vec<PathEvent>) -> Result<Self> {
        let first = events
            .first()
            .ok_or_else(|| FlsaError::Input("a path needs at least one event".into()))?;
        let n = first.segmentation.n();
        for w in events.windows(2) {
            if !(w[1].lambda > w[0].lambda) {
                return Err(FlsaError::Input(format!(
                    "breakpoints must increase strictly, found {} after {}",
                    w[1].lambda, w[0].lambda
                )));
            }
        }
        if let Some(e) = events.iter().find(|e| e.segmentation.n() != n) {
            return Err(FlsaError::Input(format!(
                "event at lambda {} has length {}, expected {n}",
                e.lambda,
                e.segmentation.n()
            )));
        }
        Ok(Self { n, events })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn events(&self) -> &[PathEvent] {
        &self.events
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.lambda).collect()
    }

    /// Index of the event whose interval contains `lambda`.
    pub fn event_index(&self, lambda: f64) -> usize {
        self.events
            .partition_point(|e| e.lambda <= lambda)
            .saturating_sub(1)
    }

    /// The exact solution at `lambda`, read off the path: the change points
    /// of the covering event with levels from the closed form.
    pub fn solution_at(&self, y: &Signal, lambda: f64) -> Result<Segmentation> {
        if y.len() != self.n {
            return Err(FlsaError::Input(format!(
                "signal length {} does not match path length {}",
                y.len(),
                self.n
            )));
        }
        let seg = &self.events[self.event_index(lambda)].segmentation;
        let changes = seg.sign_changes();
        let signs: Vec<Sign> = changes.iter().map(|c| c.sign).collect();
        let levels = segment_means(y, seg.change_points(), &signs, lambda)?;
        Segmentation::new(self.n, seg.change_points().to_vec(), levels, lambda)
    }
}

#[derive(Clone, Copy, Debug)]
struct Block {
    start: usize,
    len: usize,
    sum: f64,
    coef: i32,
    /// Sign of the jump into the next block.
    right_sign: i32,
    prev: Option<usize>,
    next: Option<usize>,
    alive: bool,
    version: u32,
}

impl Block {
    fn level(&self, lambda: f64) -> f64 {
        (self.sum + lambda * self.coef as f64) / self.len as f64
    }
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    lambda: f64,
    start: usize,
    left: usize,
    left_version: u32,
    right: usize,
    right_version: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so that BinaryHeap pops the smallest (lambda, position) first.
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .lambda
            .total_cmp(&self.lambda)
            .then_with(|| other.start.cmp(&self.start))
    }
}

struct Tracer {
    blocks: Vec<Block>,
    heap: BinaryHeap<Candidate>,
}

impl Tracer {
    fn new(y: &[f64]) -> Self {
        let prefix = sum::prefix_sums(y);
        let mut blocks: Vec<Block> = Vec::new();
        let mut start = 0;
        for t in 1..=y.len() {
            if t < y.len() && y[t] == y[t - 1] {
                continue;
            }
            let id = blocks.len();
            blocks.push(Block {
                start,
                len: t - start,
                sum: prefix[t] - prefix[start],
                coef: 0,
                right_sign: 0,
                prev: id.checked_sub(1),
                next: None,
                alive: true,
                version: 0,
            });
            if let Some(p) = id.checked_sub(1) {
                blocks[p].next = Some(id);
            }
            start = t;
        }
        // boundary signs at λ = 0 come straight from the data
        for id in 0..blocks.len().saturating_sub(1) {
            let s = jump_sign(y[blocks[id + 1].start] - y[blocks[id].start]);
            blocks[id].coef += s;
            blocks[id].right_sign = s;
            blocks[id + 1].coef -= s;
        }
        let mut tracer = Self {
            blocks,
            heap: BinaryHeap::new(),
        };
        for id in 0..tracer.blocks.len().saturating_sub(1) {
            tracer.push_pair(id, 0.0);
        }
        tracer
    }

    fn push_pair(&mut self, left: usize, floor: f64) {
        let Some(right) = self.blocks[left].next else {
            return;
        };
        let (a, b) = (&self.blocks[left], &self.blocks[right]);
        let (na, nb) = (a.len as f64, b.len as f64);
        let num = a.sum * nb - b.sum * na;
        let den = b.coef as f64 * na - a.coef as f64 * nb;
        // the gap only closes if the levels move towards each other
        if den * a.right_sign as f64 >= 0.0 {
            return;
        }
        let lambda = (num / den).max(floor);
        self.heap.push(Candidate {
            lambda,
            start: b.start,
            left,
            left_version: a.version,
            right,
            right_version: b.version,
        });
    }

    fn is_current(&self, c: &Candidate) -> bool {
        let (a, b) = (&self.blocks[c.left], &self.blocks[c.right]);
        a.alive && b.alive && a.version == c.left_version && b.version == c.right_version
    }

    fn pop_current(&mut self) -> Option<Candidate> {
        while let Some(c) = self.heap.pop() {
            if self.is_current(&c) {
                return Some(c);
            }
        }
        None
    }

    fn peek_current(&mut self) -> Option<Candidate> {
        while let Some(c) = self.heap.peek().copied() {
            if self.is_current(&c) {
                return Some(c);
            }
            self.heap.pop();
        }
        None
    }

    /// Fuses `right` into `left`; returns the removed change point.
    fn merge(&mut self, left: usize, right: usize, lambda: f64) -> usize {
        let removed = self.blocks[right].start;
        let absorbed = self.blocks[right];
        let a = &mut self.blocks[left];
        a.len += absorbed.len;
        a.sum += absorbed.sum;
        // the shared boundary sign cancels, the outer ones survive
        a.coef += absorbed.coef;
        a.right_sign = absorbed.right_sign;
        a.next = absorbed.next;
        a.version += 1;
        self.blocks[right].alive = false;
        if let Some(nx) = absorbed.next {
            self.blocks[nx].prev = Some(left);
        }
        if let Some(p) = self.blocks[left].prev {
            self.push_pair(p, lambda);
        }
        self.push_pair(left, lambda);
        removed
    }

    fn snapshot(&self, n: usize, lambda: f64) -> Result<Segmentation> {
        let mut change_points = Vec::new();
        let mut levels: Vec<f64> = Vec::new();
        let mut id = Some(0);
        while let Some(i) = id {
            let b = &self.blocks[i];
            let level = b.level(lambda);
            if levels.last() != Some(&level) {
                if !levels.is_empty() {
                    change_points.push(b.start);
                }
                levels.push(level);
            }
            id = b.next;
        }
        Segmentation::new(n, change_points, levels, lambda)
    }
}

fn jump_sign(delta: f64) -> i32 {
    if delta > 0.0 {
        1
    } else if delta < 0.0 {
        -1
    } else {
        0
    }
}

/// Traces every breakpoint of the solution path, from `λ = 0` (the data
/// itself) up to `λ_max` (a single segment).
pub fn trace_path(y: &Signal) -> LambdaPath {
    let n = y.len();
    let mut tracer = Tracer::new(y.values());
    let mut events = vec![PathEvent {
        lambda: 0.0,
        segmentation: tracer.snapshot(n, 0.0).expect("λ = 0 snapshot is the data"),
        fused: Vec::new(),
    }];
    while let Some(first) = tracer.pop_current() {
        let lambda = first.lambda.max(events.last().map_or(0.0, |e| e.lambda));
        let limit = lambda + TIE_RELATIVE * lambda.max(1.0);
        let mut fused = vec![tracer.merge(first.left, first.right, lambda)];
        while let Some(c) = tracer.peek_current() {
            if c.lambda > limit {
                break;
            }
            tracer.heap.pop();
            fused.push(tracer.merge(c.left, c.right, lambda));
        }
        fused.sort_unstable();
        let segmentation = tracer
            .snapshot(n, lambda)
            .expect("fused levels stay finite and distinct");
        events.push(PathEvent {
            lambda,
            segmentation,
            fused,
        });
    }
    LambdaPath { n, events }
}

/// Where [`validate_nesting`] found the first problem.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NestingViolation {
    /// Index of the lower-`λ` event.
    pub lower_event: usize,
    /// Index of the higher-`λ` event.
    pub upper_event: usize,
    /// Change point that is new at the higher `λ` or changed sign.
    pub change: SignChange,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NestingReport {
    pub holds: bool,
    pub first_violation: Option<NestingViolation>,
}

/// Checks that change-point sets shrink along the path and that surviving
/// change points keep their signs.
pub fn validate_nesting(path: &LambdaPath) -> NestingReport {
    for (i, w) in path.events.windows(2).enumerate() {
        let lower = w[0].segmentation.sign_changes();
        for change in w[1].segmentation.sign_changes() {
            let survives = lower
                .binary_search_by_key(&change.position, |c| c.position)
                .map(|k| lower[k].sign == change.sign)
                .unwrap_or(false);
            if !survives {
                return NestingReport {
                    holds: false,
                    first_violation: Some(NestingViolation {
                        lower_event: i,
                        upper_event: i + 1,
                        change,
                    }),
                };
            }
        }
    }
    NestingReport {
        holds: true,
        first_violation: None,
    }
}

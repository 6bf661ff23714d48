//! The split-and-bound search.
//!
//! Each iteration takes the box with the highest rank and does one of three
//! things: splits a marked box to tighten its probability bound, computes
//! behavior bounds for an unsure box seen for the first time, or splits an
//! unsure box that already has behavior bounds and classifies the halves.
//! The certified results are the sums of probability bounds over boxes
//! marked pass and over boxes marked fail.
//!
//! # Accounting
//!
//! Certificates live in a mark tree. Marking a box creates a root holding
//! its probability bound; splitting a marked box gives its node two
//! children. A node's effective bound is `max(own, child_a + child_b)`,
//! which stays valid because the children partition the parent, and which
//! never decreases. The totals are sums of effective bounds over roots, all
//! accumulated with downward rounding.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{Density, DensityBound, DensityError, MassFraction};
use crate::expr::{Criterion, Model, ParseError};
use crate::interval::round::{add_dn, sub_dn, sub_up};
use crate::interval::{Interval, PropagationSettings};
use crate::probbound::{marked_estimate, prob_lower_best, rank, rank_estimate};
use crate::region::{bisect, choose_split_variable, classify, Region, SplitRule, Status};

pub const STATE_FORMAT: &str = "splitbound.state/1";
pub const REPORT_FORMAT: &str = "splitbound.report/1";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("the density has {found} variables but the model has {expected} inputs")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no initial regions")]
    NoRegions,
    #[error("initial region {index}: {msg}")]
    BadRegion { index: usize, msg: String },
    #[error("initial regions {a} and {b} overlap")]
    Overlap { a: usize, b: usize },
    #[error("criterion: {0}")]
    Criterion(#[from] ParseError),
    #[error("the model has no criterion and none was given")]
    NoCriterion,
    #[error("density: {0}")]
    Density(#[from] DensityError),
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error("thread pool: {0}")]
    Threads(String),
}

/// What the search is asked to bound.
#[derive(Clone, Debug)]
pub struct Problem {
    model: Model,
    criterion: Criterion,
    criterion_text: String,
    density: Density,
    initial_regions: Vec<Vec<Interval>>,
}

impl Problem {
    /// `criterion` overrides the model's criterion line. `regions` default
    /// to the single box of declared input ranges.
    pub fn new(
        model: Model,
        criterion: Option<&str>,
        density: Density,
        regions: Option<Vec<Vec<Interval>>>,
    ) -> Result<Problem, EngineError> {
        let n = model.n_inputs();
        if density.dim() != n {
            return Err(EngineError::DimensionMismatch {
                expected: n,
                found: density.dim(),
            });
        }
        let (criterion, criterion_text) = match criterion {
            Some(text) => (model.parse_criterion(text)?, text.trim().to_string()),
            None => match (model.criterion(), model.criterion_text()) {
                (Some(c), Some(t)) => (c.clone(), t.to_string()),
                _ => return Err(EngineError::NoCriterion),
            },
        };
        let initial_regions = regions.unwrap_or_else(|| vec![model.input_ranges().to_vec()]);
        validate_regions(&model, &initial_regions)?;
        Ok(Problem {
            model,
            criterion,
            criterion_text,
            density,
            initial_regions,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn criterion(&self) -> &Criterion {
        &self.criterion
    }

    pub fn criterion_text(&self) -> &str {
        &self.criterion_text
    }

    pub fn density(&self) -> &Density {
        &self.density
    }

    pub fn initial_regions(&self) -> &[Vec<Interval>] {
        &self.initial_regions
    }

    /// The same problem with a different criterion.
    pub fn with_criterion(&self, text: &str) -> Result<Problem, EngineError> {
        let mut p = self.clone();
        p.criterion = self.model.parse_criterion(text)?;
        p.criterion_text = text.trim().to_string();
        Ok(p)
    }
}

fn check_box(model: &Model, b: &[Interval]) -> Result<(), String> {
    if b.len() != model.n_inputs() {
        return Err(format!("has {} intervals, expected {}", b.len(), model.n_inputs()));
    }
    for ((iv, decl), name) in b.iter().zip(model.input_ranges()).zip(model.input_names()) {
        if !iv.is_subset_of(*decl) {
            return Err(format!("{name} = {iv} is outside the declared range {decl}"));
        }
    }
    Ok(())
}

fn validate_regions(model: &Model, regions: &[Vec<Interval>]) -> Result<(), EngineError> {
    if regions.is_empty() {
        return Err(EngineError::NoRegions);
    }
    for (index, b) in regions.iter().enumerate() {
        check_box(model, b).map_err(|msg| EngineError::BadRegion { index, msg })?;
        if let Some((iv, name)) = b.iter().zip(model.input_names()).find(|(iv, _)| iv.width() <= 0.0) {
            return Err(EngineError::BadRegion {
                index,
                msg: format!("{name} = {iv} has zero width"),
            });
        }
    }
    for a in 0..regions.len() {
        for b in a + 1..regions.len() {
            let overlap = regions[a]
                .iter()
                .zip(&regions[b])
                .all(|(x, y)| x.lo().max(y.lo()) < x.hi().min(y.hi()));
            if overlap {
                return Err(EngineError::Overlap { a, b });
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSettings {
    pub seed: u64,
    /// Size of the proposal sample used for rank estimates.
    pub samples: usize,
    /// Boxes processed per step. Results depend on this value but are
    /// deterministic for a fixed value.
    pub threads: usize,
    pub propagation: PropagationSettings,
}

impl Default for EngineSettings {
    fn default() -> Self {
        EngineSettings {
            seed: 0,
            samples: 1000,
            threads: 1,
            propagation: PropagationSettings::default(),
        }
    }
}

/// When to stop. Conditions combine with "or"; an empty spec runs until no
/// box can be processed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StopSpec {
    /// Iterations for this call, not counting earlier ones.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_gap: Option<f64>,
}

impl StopSpec {
    pub fn iterations(n: u64) -> StopSpec {
        StopSpec {
            max_iterations: Some(n),
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxIterations,
    MaxSeconds,
    TargetGap,
    /// Every remaining box is too small to split.
    Exhausted,
}

/// A certificate in the mark tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkNode {
    pub parent: Option<usize>,
    pub pass: bool,
    /// Probability bound computed for this node's box.
    pub own: f64,
    pub children: Option<[usize; 2]>,
    /// `max(own, sum of children's effective bounds)`.
    pub effective: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    pub iteration: u64,
    pub lb_pass: f64,
    pub lb_fail: f64,
}

/// Everything needed to continue a search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    pub format: String,
    pub criterion: String,
    pub seed: u64,
    pub samples: usize,
    pub iterations: u64,
    pub next_seq: u64,
    /// Boxes still in the queue, by creation order.
    pub regions: Vec<Region>,
    /// Boxes that can no longer be split.
    pub frozen: Vec<Region>,
    /// Boxes dropped because no point in them satisfies the model.
    pub infeasible: u64,
    pub nodes: Vec<MarkNode>,
    pub lb_pass: f64,
    pub lb_fail: f64,
    pub history: Vec<HistoryPoint>,
    pub elapsed_seconds: f64,
    pub stop_reason: Option<StopReason>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionCounts {
    pub queued: usize,
    pub unsure: usize,
    pub marked_pass: usize,
    pub marked_fail: usize,
    pub frozen: usize,
    pub infeasible: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub format: String,
    pub criterion: String,
    /// Bounds on the probability that the criterion holds.
    pub pass: [f64; 2],
    /// Bounds on the probability that it fails.
    pub fail: [f64; 2],
    pub gap: f64,
    pub mass_fraction: f64,
    pub mass_estimated: bool,
    /// Smallest gap this density bound allows: `1 - mass_fraction`.
    pub gap_floor: f64,
    pub iterations: u64,
    pub wall_seconds: f64,
    pub stop_reason: Option<StopReason>,
    pub regions: RegionCounts,
    /// `(iteration, lb_pass, lb_fail)` after every step that changed a bound.
    pub history: Vec<HistoryPoint>,
}

impl BoundsReport {
    /// The report with timing zeroed, for comparing runs.
    pub fn without_timing(&self) -> BoundsReport {
        BoundsReport {
            wall_seconds: 0.0,
            ..self.clone()
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn make_report(
    criterion: &str,
    lb_pass: f64,
    lb_fail: f64,
    mass: MassFraction,
    iterations: u64,
    wall_seconds: f64,
    stop_reason: Option<StopReason>,
    regions: RegionCounts,
    history: &[HistoryPoint],
) -> BoundsReport {
    let ub_pass = sub_up(1.0, lb_fail).max(lb_pass);
    let ub_fail = sub_up(1.0, lb_pass).max(lb_fail);
    BoundsReport {
        format: REPORT_FORMAT.into(),
        criterion: criterion.into(),
        pass: [lb_pass, ub_pass],
        fail: [lb_fail, ub_fail],
        gap: sub_up(ub_pass, lb_pass),
        mass_fraction: mass.value,
        mass_estimated: mass.estimated,
        gap_floor: (1.0 - mass.value).max(0.0),
        iterations,
        wall_seconds,
        stop_reason,
        regions,
        history: history.to_vec(),
    }
}

fn count<'a>(queued: impl Iterator<Item = &'a Region>, frozen: &[Region], infeasible: u64) -> RegionCounts {
    let mut c = RegionCounts {
        frozen: frozen.len(),
        infeasible,
        ..Default::default()
    };
    let mut tally = |r: &Region| match r.status {
        Status::Unsure => c.unsure += 1,
        Status::MarkedPass => c.marked_pass += 1,
        Status::MarkedFail => c.marked_fail += 1,
    };
    let mut queued_count = 0;
    for r in queued {
        queued_count += 1;
        tally(r);
    }
    frozen.iter().for_each(&mut tally);
    c.queued = queued_count;
    c
}

/// Report for a saved state without rebuilding the engine.
pub fn current_bounds(state: &EngineState, mass: MassFraction) -> BoundsReport {
    make_report(
        &state.criterion,
        state.lb_pass,
        state.lb_fail,
        mass,
        state.iterations,
        state.elapsed_seconds,
        state.stop_reason,
        count(state.regions.iter(), &state.frozen, state.infeasible),
        &state.history,
    )
}

#[derive(Clone, Copy, Debug)]
struct Key {
    rank: f64,
    seq: u64,
}

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    /// Higher rank first, then older boxes first.
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank.total_cmp(&other.rank).then(other.seq.cmp(&self.seq))
    }
}

enum Outcome {
    /// Behavior bounds computed for the first time.
    Classified(Region),
    Infeasible,
    /// `parent_node` is set when a marked box was split.
    Split {
        parent_node: Option<usize>,
        children: Vec<Region>,
        dropped: u64,
    },
    Frozen(Region),
}

pub struct Engine {
    problem: Problem,
    settings: EngineSettings,
    samples: Vec<Vec<f64>>,
    regions: BTreeMap<u64, Region>,
    heap: BinaryHeap<Key>,
    frozen: Vec<Region>,
    infeasible: u64,
    nodes: Vec<MarkNode>,
    lb_pass: f64,
    lb_fail: f64,
    iterations: u64,
    next_seq: u64,
    history: Vec<HistoryPoint>,
    elapsed_seconds: f64,
    stop_reason: Option<StopReason>,
}

impl Engine {
    pub fn new(problem: Problem, settings: EngineSettings) -> Result<Engine, EngineError> {
        let samples = problem.density.sample_resembling(settings.samples, settings.seed)?;
        let mut e = Engine {
            problem,
            settings,
            samples,
            regions: BTreeMap::new(),
            heap: BinaryHeap::new(),
            frozen: Vec::new(),
            infeasible: 0,
            nodes: Vec::new(),
            lb_pass: 0.0,
            lb_fail: 0.0,
            iterations: 0,
            next_seq: 0,
            history: vec![HistoryPoint {
                iteration: 0,
                lb_pass: 0.0,
                lb_fail: 0.0,
            }],
            elapsed_seconds: 0.0,
            stop_reason: None,
        };
        for b in e.problem.initial_regions.clone() {
            let mut r = Region::new(e.next_seq, b);
            e.next_seq += 1;
            r.prob_estimate = rank_estimate(&e.problem.density, &r.bounds, &e.samples).value;
            r.rank = r.prob_estimate;
            e.push(r);
        }
        Ok(e)
    }

    /// Rebuilds an engine from a checkpoint after checking its invariants.
    /// `settings.seed` and `settings.samples` are taken from the state.
    pub fn from_state(problem: Problem, mut settings: EngineSettings, state: EngineState) -> Result<Engine, EngineError> {
        let bad = |m: String| Err(EngineError::Checkpoint(m));
        if state.format != STATE_FORMAT {
            return bad(format!("unsupported format `{}`, expected `{STATE_FORMAT}`", state.format));
        }
        if state.criterion != problem.criterion_text {
            return bad(format!(
                "state is for criterion `{}`, not `{}`",
                state.criterion, problem.criterion_text
            ));
        }
        settings.seed = state.seed;
        settings.samples = state.samples;
        let samples = problem.density.sample_resembling(settings.samples, settings.seed)?;
        validate_state(&problem, &state)?;
        let mut e = Engine {
            problem,
            settings,
            samples,
            regions: BTreeMap::new(),
            heap: BinaryHeap::new(),
            frozen: state.frozen,
            infeasible: state.infeasible,
            nodes: state.nodes,
            lb_pass: state.lb_pass,
            lb_fail: state.lb_fail,
            iterations: state.iterations,
            next_seq: state.next_seq,
            history: state.history,
            elapsed_seconds: state.elapsed_seconds,
            stop_reason: state.stop_reason,
        };
        for r in state.regions {
            e.push(r);
        }
        Ok(e)
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn settings(&self) -> &EngineSettings {
        &self.settings
    }

    pub fn lb_pass(&self) -> f64 {
        self.lb_pass
    }

    pub fn lb_fail(&self) -> f64 {
        self.lb_fail
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn gap(&self) -> f64 {
        sub_up(sub_up(1.0, self.lb_fail), self.lb_pass).max(0.0)
    }

    pub fn state(&self) -> EngineState {
        EngineState {
            format: STATE_FORMAT.into(),
            criterion: self.problem.criterion_text.clone(),
            seed: self.settings.seed,
            samples: self.settings.samples,
            iterations: self.iterations,
            next_seq: self.next_seq,
            regions: self.regions.values().cloned().collect(),
            frozen: self.frozen.clone(),
            infeasible: self.infeasible,
            nodes: self.nodes.clone(),
            lb_pass: self.lb_pass,
            lb_fail: self.lb_fail,
            history: self.history.clone(),
            elapsed_seconds: self.elapsed_seconds,
            stop_reason: self.stop_reason,
        }
    }

    pub fn current_bounds(&self) -> BoundsReport {
        make_report(
            &self.problem.criterion_text,
            self.lb_pass,
            self.lb_fail,
            self.problem.density.mass_fraction(),
            self.iterations,
            self.elapsed_seconds,
            self.stop_reason,
            count(self.regions.values(), &self.frozen, self.infeasible),
            &self.history,
        )
    }

    /// Switches to another criterion, keeping the current boxes.
    ///
    /// Every box is classified afresh (marked boxes too, since their
    /// marking referred to the old criterion). Certificates, history and the
    /// iteration count start over.
    pub fn set_criterion(&mut self, text: &str) -> Result<(), EngineError> {
        self.problem = self.problem.with_criterion(text)?;
        let mut boxes: Vec<Region> = std::mem::take(&mut self.regions).into_values().collect();
        boxes.append(&mut self.frozen);
        boxes.sort_by_key(|r| r.seq);
        self.heap.clear();
        self.nodes.clear();
        self.lb_pass = 0.0;
        self.lb_fail = 0.0;
        self.iterations = 0;
        self.elapsed_seconds = 0.0;
        self.stop_reason = None;
        self.history = vec![HistoryPoint {
            iteration: 0,
            lb_pass: 0.0,
            lb_fail: 0.0,
        }];
        let results: Vec<Option<Region>> = self.map_parallel(boxes, |e, mut r| {
            r.mark_node = None;
            r.prob_lb = 0.0;
            r.prob_method = None;
            e.classify_into(&mut r).then_some(r)
        })?;
        for r in results {
            match r {
                Some(r) => self.install_new(r),
                None => self.infeasible += 1,
            }
        }
        self.record();
        Ok(())
    }

    /// Runs until a stop condition holds.
    pub fn run(&mut self, stop: &StopSpec) -> Result<BoundsReport, EngineError> {
        let start = Instant::now();
        let base_elapsed = self.elapsed_seconds;
        let threads = self.settings.threads.max(1);
        let pool = if threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .map_err(|e| EngineError::Threads(e.to_string()))?,
            )
        } else {
            None
        };
        let mut done: u64 = 0;
        let reason = loop {
            if stop.max_iterations.is_some_and(|m| done >= m) {
                break StopReason::MaxIterations;
            }
            if stop.target_gap.is_some_and(|g| self.gap() <= g) {
                break StopReason::TargetGap;
            }
            if stop.max_seconds.is_some_and(|s| start.elapsed().as_secs_f64() >= s) {
                break StopReason::MaxSeconds;
            }
            if self.heap.is_empty() {
                break StopReason::Exhausted;
            }
            let mut size = threads.min(self.heap.len());
            if let Some(m) = stop.max_iterations {
                size = size.min((m - done) as usize);
            }
            let batch: Vec<Region> = (0..size)
                .map(|_| {
                    let key = self.heap.pop().expect("heap is nonempty");
                    self.regions.remove(&key.seq).expect("queued box is stored")
                })
                .collect();
            let outcomes: Vec<Outcome> = match &pool {
                Some(p) => p.install(|| batch.into_par_iter().map(|r| self.process(r)).collect()),
                None => batch.into_iter().map(|r| self.process(r)).collect(),
            };
            let before = (self.lb_pass, self.lb_fail);
            for o in outcomes {
                self.install(o);
            }
            self.iterations += size as u64;
            done += size as u64;
            if (self.lb_pass, self.lb_fail) != before {
                self.record();
            }
        };
        self.stop_reason = Some(reason);
        self.elapsed_seconds = base_elapsed + start.elapsed().as_secs_f64();
        Ok(self.current_bounds())
    }

    fn map_parallel<T: Send, U: Send>(
        &self,
        items: Vec<T>,
        f: impl Fn(&Engine, T) -> U + Sync,
    ) -> Result<Vec<U>, EngineError> {
        let threads = self.settings.threads.max(1);
        if threads == 1 {
            return Ok(items.into_iter().map(|x| f(self, x)).collect());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| EngineError::Threads(e.to_string()))?;
        Ok(pool.install(|| items.into_par_iter().map(|x| f(self, x)).collect()))
    }

    fn record(&mut self) {
        self.history.push(HistoryPoint {
            iteration: self.iterations,
            lb_pass: self.lb_pass,
            lb_fail: self.lb_fail,
        });
    }

    fn push(&mut self, r: Region) {
        self.heap.push(Key { rank: r.rank, seq: r.seq });
        self.regions.insert(r.seq, r);
    }

    /// Classifies a box in place and bounds its probability if it becomes
    /// marked. Returns false if the box is infeasible.
    fn classify_into(&self, r: &mut Region) -> bool {
        let p = &self.problem;
        match classify(&r.bounds, &p.model, &p.criterion, &self.settings.propagation) {
            Err(_) => false,
            Ok((status, _)) => {
                r.status = status;
                r.bounded = true;
                self.finish_box(r);
                true
            }
        }
    }

    /// Fills the probability bound (for marked boxes) and the rank.
    fn finish_box(&self, r: &mut Region) {
        if r.status.is_marked() {
            let b = prob_lower_best(&self.problem.density, &r.bounds);
            r.prob_lb = b.lower;
            r.prob_method = Some(b.method);
            r.prob_estimate = marked_estimate(&self.problem.density, &r.bounds);
        }
        r.rank = rank(r.status.is_marked(), r.prob_estimate, r.prob_lb);
    }

    fn estimate(&self, r: &mut Region) {
        r.prob_estimate = rank_estimate(&self.problem.density, &r.bounds, &self.samples).value;
    }

    fn process(&self, mut r: Region) -> Outcome {
        let d = &self.problem.density;
        if r.status.is_marked() {
            let Some(k) = choose_split_variable(&r, d, SplitRule::Slope) else {
                return Outcome::Frozen(r);
            };
            let (mut a, mut b) = bisect(&r, k).expect("chosen variable is splittable");
            for c in [&mut a, &mut b] {
                self.estimate(c);
                self.finish_box(c);
            }
            return Outcome::Split {
                parent_node: r.mark_node,
                children: vec![a, b],
                dropped: 0,
            };
        }
        if !r.bounded {
            return if self.classify_into(&mut r) {
                Outcome::Classified(r)
            } else {
                Outcome::Infeasible
            };
        }
        let Some(k) = choose_split_variable(&r, d, SplitRule::Width) else {
            return Outcome::Frozen(r);
        };
        let (a, b) = bisect(&r, k).expect("chosen variable is splittable");
        let mut children = Vec::with_capacity(2);
        let mut dropped = 0;
        for mut c in [a, b] {
            self.estimate(&mut c);
            if self.classify_into(&mut c) {
                children.push(c);
            } else {
                dropped += 1;
            }
        }
        Outcome::Split {
            parent_node: None,
            children,
            dropped,
        }
    }

    fn install(&mut self, o: Outcome) {
        match o {
            Outcome::Classified(r) => self.install_new(r),
            Outcome::Infeasible => self.infeasible += 1,
            Outcome::Frozen(r) => self.frozen.push(r),
            Outcome::Split {
                parent_node: Some(p),
                children,
                ..
            } => {
                let pass = self.nodes[p].pass;
                let mut ids = [0; 2];
                for (i, mut c) in children.into_iter().enumerate() {
                    let id = self.nodes.len();
                    self.nodes.push(MarkNode {
                        parent: Some(p),
                        pass,
                        own: c.prob_lb,
                        children: None,
                        effective: c.prob_lb,
                    });
                    ids[i] = id;
                    c.mark_node = Some(id);
                    c.seq = self.next_seq;
                    self.next_seq += 1;
                    self.push(c);
                }
                self.nodes[p].children = Some(ids);
                self.refresh(p);
            }
            Outcome::Split {
                parent_node: None,
                children,
                dropped,
            } => {
                self.infeasible += dropped;
                for mut c in children {
                    c.seq = self.next_seq;
                    self.next_seq += 1;
                    self.install_new(c);
                }
            }
        }
    }

    /// Queues a box, creating a root certificate if it is marked.
    fn install_new(&mut self, mut r: Region) {
        if r.status.is_marked() {
            let pass = r.status == Status::MarkedPass;
            let id = self.nodes.len();
            self.nodes.push(MarkNode {
                parent: None,
                pass,
                own: r.prob_lb,
                children: None,
                effective: r.prob_lb,
            });
            r.mark_node = Some(id);
            self.add_to_total(pass, r.prob_lb);
        }
        self.push(r);
    }

    fn add_to_total(&mut self, pass: bool, delta: f64) {
        let t = if pass { &mut self.lb_pass } else { &mut self.lb_fail };
        *t = add_dn(*t, delta);
    }

    /// Recomputes effective bounds from `id` up to its root.
    fn refresh(&mut self, mut id: usize) {
        loop {
            let node = &self.nodes[id];
            let Some([a, b]) = node.children else { return };
            let sum = add_dn(self.nodes[a].effective, self.nodes[b].effective);
            let new = node.own.max(sum);
            let old = node.effective;
            if new <= old {
                return;
            }
            self.nodes[id].effective = new;
            match self.nodes[id].parent {
                Some(p) => id = p,
                None => {
                    let pass = self.nodes[id].pass;
                    self.add_to_total(pass, sub_dn(new, old));
                    return;
                }
            }
        }
    }
}

fn validate_state(problem: &Problem, s: &EngineState) -> Result<(), EngineError> {
    let bad = |m: String| Err(EngineError::Checkpoint(m));
    let mut seqs = std::collections::HashSet::new();
    for r in s.regions.iter().chain(&s.frozen) {
        if let Err(m) = check_box(&problem.model, &r.bounds) {
            return bad(format!("box {}: {m}", r.seq));
        }
        if r.seq >= s.next_seq || !seqs.insert(r.seq) {
            return bad(format!("box sequence number {} is repeated or out of range", r.seq));
        }
        if !(r.rank >= 0.0 && r.prob_lb >= 0.0 && r.prob_lb <= 1.0) {
            return bad(format!("box {} has an invalid rank or bound", r.seq));
        }
        match (r.status.is_marked(), r.mark_node) {
            (false, None) => {}
            (true, Some(id)) => {
                let Some(n) = s.nodes.get(id) else {
                    return bad(format!("box {} refers to missing certificate {id}", r.seq));
                };
                if n.children.is_some() || n.own != r.prob_lb || n.pass != (r.status == Status::MarkedPass) {
                    return bad(format!("box {} disagrees with certificate {id}", r.seq));
                }
            }
            _ => return bad(format!("box {} has inconsistent marking", r.seq)),
        }
    }
    let (mut pass, mut fail) = (0.0, 0.0);
    for (id, n) in s.nodes.iter().enumerate() {
        if !(n.own >= 0.0 && n.effective <= 1.0 + 1e-9) {
            return bad(format!("certificate {id} is out of range"));
        }
        let expect = match n.children {
            None => n.own,
            Some([a, b]) => {
                let (Some(na), Some(nb)) = (s.nodes.get(a), s.nodes.get(b)) else {
                    return bad(format!("certificate {id} has missing children"));
                };
                if na.parent != Some(id) || nb.parent != Some(id) || na.pass != n.pass || nb.pass != n.pass {
                    return bad(format!("certificate {id} has inconsistent children"));
                }
                n.own.max(add_dn(na.effective, nb.effective))
            }
        };
        if (n.effective - expect).abs() > 1e-12 {
            return bad(format!("certificate {id} has effective bound {} but recomputes to {expect}", n.effective));
        }
        if n.parent.is_none() {
            if n.pass {
                pass += n.effective;
            } else {
                fail += n.effective;
            }
        }
    }
    if (pass - s.lb_pass).abs() > 1e-9 || (fail - s.lb_fail).abs() > 1e-9 {
        return bad(format!(
            "stored totals ({}, {}) disagree with recomputed ({pass}, {fail})",
            s.lb_pass, s.lb_fail
        ));
    }
    if s.lb_pass + s.lb_fail > 1.0 + 1e-9 {
        return bad("bounds sum to more than 1".into());
    }
    let monotone = s
        .history
        .windows(2)
        .all(|w| w[1].iteration >= w[0].iteration && w[1].lb_pass >= w[0].lb_pass && w[1].lb_fail >= w[0].lb_fail);
    if !monotone {
        return bad("history is not monotone".into());
    }
    Ok(())
}

/// Runs a fresh search.
pub fn run(problem: Problem, settings: EngineSettings, stop: &StopSpec) -> Result<(EngineState, BoundsReport), EngineError> {
    let mut e = Engine::new(problem, settings)?;
    let report = e.run(stop)?;
    Ok((e.state(), report))
}

/// Continues a saved search.
pub fn resume(
    problem: Problem,
    settings: EngineSettings,
    state: EngineState,
    stop: &StopSpec,
) -> Result<(EngineState, BoundsReport), EngineError> {
    let mut e = Engine::from_state(problem, settings, state)?;
    let report = e.run(stop)?;
    Ok((e.state(), report))
}

//! MAC backtracking search with d-way branching.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::compression::{compress_instance, CompressedTable, CompressionConfig, CompressionError};
use crate::model::{is_solution, Assignment, Instance, VarId};
use crate::propagation::{DomainState, PropagationStatus, Propagator, Str2Propagator, StrMficPropagator};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("expected {expected} compressed tables, got {got}")]
    TableCount { expected: usize, got: usize },
    #[error("compressed table {0} does not match the scope of its constraint")]
    ScopeMismatch(usize),
    #[error("search space of {0} assignments is too large to enumerate")]
    TooLarge(u64),
    #[error(transparent)]
    Compression(#[from] CompressionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PropagatorKind {
    #[default]
    Str2,
    StrMfic,
}

impl PropagatorKind {
    pub const ALL: [PropagatorKind; 2] = [PropagatorKind::Str2, PropagatorKind::StrMfic];

    pub fn name(self) -> &'static str {
        match self {
            PropagatorKind::Str2 => "str2",
            PropagatorKind::StrMfic => "str-mfic",
        }
    }
}

impl fmt::Display for PropagatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PropagatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "str2" => Ok(PropagatorKind::Str2),
            "str-mfic" => Ok(PropagatorKind::StrMfic),
            _ => Err(format!("unknown propagator `{s}` (expected str2 or str-mfic)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarHeuristic {
    #[default]
    MinDom,
    Lex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValueOrder {
    /// Increasing value.
    #[default]
    Lex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchMode {
    #[default]
    First,
    CountAll,
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub propagator: PropagatorKind,
    pub var_heuristic: VarHeuristic,
    pub value_order: ValueOrder,
    pub mode: SearchMode,
    pub node_limit: Option<u64>,
    pub time_limit: Option<Duration>,
    /// Solutions kept in the result; counting goes on past this.
    pub max_stored: usize,
    /// Used when `propagator` is `StrMfic` and tables are compressed on the fly.
    pub compression: CompressionConfig,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            propagator: PropagatorKind::Str2,
            var_heuristic: VarHeuristic::MinDom,
            value_order: ValueOrder::Lex,
            mode: SearchMode::First,
            node_limit: None,
            time_limit: None,
            max_stored: 1000,
            compression: CompressionConfig::default(),
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.node_limit == Some(0) {
            return Err(SearchError::InvalidConfig("node limit must be positive".into()));
        }
        if self.time_limit.is_some_and(|t| t.is_zero()) {
            return Err(SearchError::InvalidConfig("time limit must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Sat,
    Unsat,
    LimitReached,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Sat => "sat",
            SolveStatus::Unsat => "unsat",
            SolveStatus::LimitReached => "limit-reached",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolveStats {
    /// Branching decisions (one per tried assignment).
    pub nodes: u64,
    /// Decisions whose propagation ended in a wipeout.
    pub backtracks: u64,
    pub filter_calls: u64,
    pub removals: u64,
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub solutions: Vec<Assignment>,
    pub solution_count: u64,
    pub stats: SolveStats,
}

/// Unfixed variable to branch on, `None` when every variable is fixed.
pub fn next_branch_var(doms: &DomainState, heuristic: VarHeuristic) -> Option<VarId> {
    let unfixed = (0..doms.n_vars()).map(VarId::from).filter(|&v| doms.size(v) > 1);
    match heuristic {
        VarHeuristic::Lex => unfixed.into_iter().next(),
        VarHeuristic::MinDom => unfixed.min_by_key(|&v| (doms.size(v), v.0)),
    }
}

/// Solves `inst`, compressing its tables first when the configuration asks
/// for STR-MFIC.
pub fn solve(inst: &Instance, cfg: &SolveConfig) -> Result<SolveResult, SearchError> {
    cfg.validate()?;
    match cfg.propagator {
        PropagatorKind::Str2 => {
            let doms = DomainState::from_instance(inst);
            let props = inst
                .constraints()
                .iter()
                .map(|c| Box::new(Str2Propagator::new(c, &doms)) as Box<dyn Propagator>)
                .collect();
            Ok(Solver::new(inst, doms, props, cfg).run())
        }
        PropagatorKind::StrMfic => {
            let tables = compress_instance(inst, &cfg.compression)?;
            solve_compressed(inst, &tables, cfg)
        }
    }
}

/// Solves `inst` with STR-MFIC over already compressed tables, one per
/// constraint and in the same order.
pub fn solve_compressed(
    inst: &Instance,
    tables: &[CompressedTable],
    cfg: &SolveConfig,
) -> Result<SolveResult, SearchError> {
    cfg.validate()?;
    if tables.len() != inst.constraints().len() {
        return Err(SearchError::TableCount { expected: inst.constraints().len(), got: tables.len() });
    }
    if let Some(i) = tables.iter().zip(inst.constraints()).position(|(t, c)| t.scope() != c.scope()) {
        return Err(SearchError::ScopeMismatch(i));
    }
    let doms = DomainState::from_instance(inst);
    let props = tables
        .iter()
        .map(|t| Box::new(StrMficPropagator::new(t, &doms)) as Box<dyn Propagator>)
        .collect();
    Ok(Solver::new(inst, doms, props, cfg).run())
}

/// Every solution of `inst` by enumerating the full Cartesian product.
pub fn brute_force_solutions(inst: &Instance, max_space: u64) -> Result<Vec<Assignment>, SearchError> {
    let space = inst.search_space();
    if space > max_space {
        return Err(SearchError::TooLarge(space));
    }
    let n = inst.n_vars();
    let mut idx = vec![0usize; n];
    let mut out = Vec::new();
    loop {
        let a = Assignment(idx.iter().zip(inst.domains()).map(|(&i, d)| d[i]).collect());
        if is_solution(&a, inst) {
            out.push(a);
        }
        // odometer increment, last variable fastest
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < inst.domains()[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

const TIME_CHECK_PERIOD: u64 = 1024;

enum Flow {
    Continue,
    Stop,
}

struct Solver<'a> {
    inst: &'a Instance,
    cfg: &'a SolveConfig,
    doms: DomainState,
    props: Vec<Box<dyn Propagator>>,
    constraints_of: Vec<Vec<usize>>,
    queue: VecDeque<usize>,
    queued: Vec<bool>,
    stats: SolveStats,
    solutions: Vec<Assignment>,
    solution_count: u64,
    limit_hit: bool,
    start: Instant,
}

impl<'a> Solver<'a> {
    fn new(inst: &'a Instance, doms: DomainState, props: Vec<Box<dyn Propagator>>, cfg: &'a SolveConfig) -> Self {
        let mut constraints_of = vec![Vec::new(); inst.n_vars()];
        for (c, p) in props.iter().enumerate() {
            for v in p.scope() {
                constraints_of[v.index()].push(c);
            }
        }
        let n = props.len();
        Solver {
            inst,
            cfg,
            doms,
            props,
            constraints_of,
            queue: VecDeque::with_capacity(n),
            queued: vec![false; n],
            stats: SolveStats::default(),
            solutions: Vec::new(),
            solution_count: 0,
            limit_hit: false,
            start: Instant::now(),
        }
    }

    fn run(mut self) -> SolveResult {
        let all: Vec<usize> = (0..self.props.len()).collect();
        if self.propagate(&all) {
            self.search();
        }
        self.stats.wall_time = self.start.elapsed();
        let status = if self.limit_hit {
            SolveStatus::LimitReached
        } else if self.solution_count > 0 {
            SolveStatus::Sat
        } else {
            SolveStatus::Unsat
        };
        SolveResult {
            status,
            solutions: self.solutions,
            solution_count: self.solution_count,
            stats: self.stats,
        }
    }

    fn enqueue(&mut self, c: usize) {
        if !self.queued[c] {
            self.queued[c] = true;
            self.queue.push_back(c);
        }
    }

    /// Runs the queue to a fixpoint; false on wipeout.
    fn propagate(&mut self, seeds: &[usize]) -> bool {
        for &c in seeds {
            self.enqueue(c);
        }
        while let Some(c) = self.queue.pop_front() {
            self.queued[c] = false;
            let out = self.props[c].filter(&mut self.doms);
            self.stats.filter_calls += 1;
            self.stats.removals += out.removed.len() as u64;
            if let PropagationStatus::Wipeout(_) = out.status {
                for c in self.queue.drain(..) {
                    self.queued[c] = false;
                }
                return false;
            }
            for (var, _) in &out.removed {
                for k in 0..self.constraints_of[var.index()].len() {
                    let other = self.constraints_of[var.index()][k];
                    if other != c {
                        self.enqueue(other);
                    }
                }
            }
        }
        true
    }

    fn out_of_budget(&mut self) -> bool {
        if self.cfg.node_limit.is_some_and(|n| self.stats.nodes >= n) {
            self.limit_hit = true;
        } else if let Some(t) = self.cfg.time_limit {
            if self.stats.nodes.is_multiple_of(TIME_CHECK_PERIOD) && self.start.elapsed() >= t {
                self.limit_hit = true;
            }
        }
        self.limit_hit
    }

    fn save(&mut self) {
        self.doms.save_level();
        for p in &mut self.props {
            p.save_level();
        }
    }

    fn restore(&mut self) {
        self.doms.restore_level().expect("restore matches a save");
        for p in &mut self.props {
            p.restore_level().expect("restore matches a save");
        }
    }

    fn record_solution(&mut self) {
        let a = Assignment(
            (0..self.inst.n_vars()).map(|i| self.doms.values(VarId::from(i))[0]).collect(),
        );
        debug_assert!(is_solution(&a, self.inst));
        self.solution_count += 1;
        if self.solutions.len() < self.cfg.max_stored {
            self.solutions.push(a);
        }
    }

    fn search(&mut self) -> Flow {
        let Some(var) = next_branch_var(&self.doms, self.cfg.var_heuristic) else {
            self.record_solution();
            return match self.cfg.mode {
                SearchMode::First => Flow::Stop,
                SearchMode::CountAll => Flow::Continue,
            };
        };
        let values = match self.cfg.value_order {
            ValueOrder::Lex => self.doms.sorted_values(var),
        };
        for v in values {
            if self.out_of_budget() {
                return Flow::Stop;
            }
            self.stats.nodes += 1;
            self.save();
            self.doms.assign(var, v);
            let seeds = self.constraints_of[var.index()].clone();
            let flow = if self.propagate(&seeds) {
                self.search()
            } else {
                self.stats.backtracks += 1;
                Flow::Continue
            };
            self.restore();
            if let Flow::Stop = flow {
                return Flow::Stop;
            }
        }
        Flow::Continue
    }
}

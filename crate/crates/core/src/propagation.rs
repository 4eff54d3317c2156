//! Restorable domains and GAC propagators for positive tables.
//!
//! [`Str2Propagator`] runs simple tabular reduction on a plain table: valid
//! tuples live in `position[..limit]`, invalid ones are swapped past the
//! limit, and backtracking only resets the limit. [`StrMficPropagator`] runs
//! the same scheme one level up on a [`CompressedTable`]: entries are
//! partitioned by an entry limit, and each entry's sub-tuples by their own
//! sub-limit. An entry whose itemset holds a removed value is dropped
//! without looking at its sub-table. The default table is the last entry,
//! with an empty itemset.
//!
//! Both propagators keep the size of every scope domain as seen at the end
//! of their last call. Only variables whose size changed since then are
//! checked for validity, and a variable stops collecting supports once all
//! of its values are supported.
//!
//! Limits are stored as counts of valid elements; the "index of the last
//! valid element" is `count - 1`.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::compression::CompressedTable;
use crate::model::{Instance, TableConstraint, Value, VarId};
use crate::reversible::RevArray;
pub use crate::reversible::UnderflowError;

const ABSENT: u32 = u32::MAX;

/// Sparse-set domains for every variable, restorable by level.
#[derive(Debug, Clone)]
pub struct DomainState {
    dense: Vec<Vec<Value>>,
    /// value -> index in `dense`, `ABSENT` when not in the original domain
    index: Vec<Vec<u32>>,
    sizes: RevArray,
}

impl DomainState {
    pub fn new(domains: &[Vec<Value>]) -> Self {
        let mut dense = Vec::with_capacity(domains.len());
        let mut index = Vec::with_capacity(domains.len());
        for d in domains {
            let mut d = d.clone();
            d.sort_unstable();
            d.dedup();
            let max = d.last().map_or(0, |&m| m as usize + 1);
            let mut idx = vec![ABSENT; max];
            for (i, &v) in d.iter().enumerate() {
                idx[v as usize] = i as u32;
            }
            dense.push(d);
            index.push(idx);
        }
        let sizes = RevArray::new(dense.iter().map(|d| d.len() as u32).collect());
        DomainState { dense, index, sizes }
    }

    pub fn from_instance(inst: &Instance) -> Self {
        Self::new(inst.domains())
    }

    pub fn n_vars(&self) -> usize {
        self.dense.len()
    }

    #[inline]
    pub fn size(&self, var: VarId) -> usize {
        self.sizes.get(var.index()) as usize
    }

    #[inline]
    pub fn contains(&self, var: VarId, val: Value) -> bool {
        let x = var.index();
        match self.index[x].get(val as usize) {
            Some(&i) if i != ABSENT => i < self.sizes.get(x),
            _ => false,
        }
    }

    /// Current values, in no particular order.
    pub fn values(&self, var: VarId) -> &[Value] {
        &self.dense[var.index()][..self.size(var)]
    }

    pub fn sorted_values(&self, var: VarId) -> Vec<Value> {
        let mut v = self.values(var).to_vec();
        v.sort_unstable();
        v
    }

    /// One past the largest value of the original domain.
    pub fn value_bound(&self, var: VarId) -> usize {
        self.index[var.index()].len()
    }

    pub fn is_fixed(&self, var: VarId) -> bool {
        self.size(var) == 1
    }

    /// Removes `val`; returns whether it was present.
    pub fn remove(&mut self, var: VarId, val: Value) -> bool {
        if !self.contains(var, val) {
            return false;
        }
        let x = var.index();
        let i = self.index[x][val as usize] as usize;
        let last = self.sizes.get(x) as usize - 1;
        let other = self.dense[x][last];
        self.dense[x].swap(i, last);
        self.index[x][other as usize] = i as u32;
        self.index[x][val as usize] = last as u32;
        self.sizes.set(x, last as u32);
        true
    }

    /// Reduces the domain of `var` to `{val}`; returns the removed values.
    pub fn assign(&mut self, var: VarId, val: Value) -> Vec<Value> {
        let others: Vec<Value> = self.values(var).iter().copied().filter(|&v| v != val).collect();
        for &v in &others {
            self.remove(var, v);
        }
        others
    }

    pub fn save_level(&mut self) {
        self.sizes.save();
    }

    pub fn restore_level(&mut self) -> Result<(), UnderflowError> {
        self.sizes.restore()
    }

    pub fn depth(&self) -> usize {
        self.sizes.depth()
    }

    /// Sorted current values of every variable.
    pub fn snapshot(&self) -> Vec<Vec<Value>> {
        (0..self.n_vars()).map(|i| self.sorted_values(VarId::from(i))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropagationStatus {
    Fixpoint,
    Wipeout(VarId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropagationOutcome {
    pub status: PropagationStatus,
    pub removed: Vec<(VarId, Value)>,
}

impl PropagationOutcome {
    fn fixpoint() -> Self {
        PropagationOutcome { status: PropagationStatus::Fixpoint, removed: Vec::new() }
    }

    pub fn is_wipeout(&self) -> bool {
        matches!(self.status, PropagationStatus::Wipeout(_))
    }
}

/// A restorable GAC filter over one constraint.
pub trait Propagator {
    fn scope(&self) -> &[VarId];

    /// Filters `doms` until this constraint is GAC, or reports a wipeout.
    fn filter(&mut self, doms: &mut DomainState) -> PropagationOutcome;

    fn save_level(&mut self);

    fn restore_level(&mut self) -> Result<(), UnderflowError>;
}

/// Per-call support bookkeeping shared by both propagators.
#[derive(Debug, Clone)]
struct Supports {
    /// per scope position, indexed by value: call stamp of the last support
    stamps: Vec<Vec<u64>>,
    counts: Vec<usize>,
    /// scope positions still missing supports
    open: Vec<usize>,
    open_mask: Vec<bool>,
    now: u64,
}

impl Supports {
    fn new(scope: &[VarId], doms: &DomainState) -> Self {
        Supports {
            stamps: scope.iter().map(|&v| vec![0; doms.value_bound(v)]).collect(),
            counts: vec![0; scope.len()],
            open: Vec::with_capacity(scope.len()),
            open_mask: vec![false; scope.len()],
            now: 0,
        }
    }

    fn begin(&mut self) {
        self.now += 1;
        self.open.clear();
        self.open.extend(0..self.counts.len());
        self.open_mask.fill(true);
        self.counts.fill(0);
    }

    /// Marks `(p, val)` as supported; closes `p` once every value is.
    #[inline]
    fn mark(&mut self, p: usize, val: Value, dom_size: usize) -> bool {
        let s = &mut self.stamps[p][val as usize];
        if *s != self.now {
            *s = self.now;
            self.counts[p] += 1;
            if self.counts[p] == dom_size {
                self.open_mask[p] = false;
                return true;
            }
        }
        false
    }

    /// Marks supports for every open position whose value `value_at` gives.
    #[inline]
    fn collect(&mut self, scope: &[VarId], doms: &DomainState, value_at: impl Fn(usize) -> Option<Value>) {
        let mut k = 0;
        while k < self.open.len() {
            let p = self.open[k];
            if let Some(v) = value_at(p) {
                if self.mark(p, v, doms.size(scope[p])) {
                    self.open.swap_remove(k);
                    continue;
                }
            }
            k += 1;
        }
    }

    /// Removes every value of an open position that received no support.
    fn prune(&mut self, scope: &[VarId], doms: &mut DomainState) -> PropagationOutcome {
        let mut removed = Vec::new();
        let mut open = std::mem::take(&mut self.open);
        open.sort_unstable();
        let mut status = PropagationStatus::Fixpoint;
        for &p in &open {
            let var = scope[p];
            let lost: Vec<Value> = doms
                .values(var)
                .iter()
                .copied()
                .filter(|&v| self.stamps[p][v as usize] != self.now)
                .collect();
            for v in lost {
                doms.remove(var, v);
                removed.push((var, v));
            }
            if doms.size(var) == 0 {
                status = PropagationStatus::Wipeout(var);
                break;
            }
        }
        self.open = open;
        PropagationOutcome { status, removed }
    }
}

/// Positions of `scope` whose domain size differs from the recorded one.
fn changed_positions(scope: &[VarId], doms: &DomainState, rev: &RevArray, offset: usize, out: &mut Vec<usize>) {
    out.clear();
    for (p, &v) in scope.iter().enumerate() {
        if doms.size(v) as u32 != rev.get(offset + p) {
            out.push(p);
        }
    }
}

fn record_sizes(scope: &[VarId], doms: &DomainState, rev: &mut RevArray, offset: usize) {
    for (p, &v) in scope.iter().enumerate() {
        rev.set(offset + p, doms.size(v) as u32);
    }
}

/// STR2 over a plain table.
#[derive(Debug, Clone)]
pub struct Str2Propagator {
    scope: Vec<VarId>,
    cells: Vec<Value>,
    position: Vec<u32>,
    /// slot 0: number of valid tuples; slots 1..: last seen domain sizes
    rev: RevArray,
    supports: Supports,
    changed: Vec<usize>,
}

impl Str2Propagator {
    pub fn new(table: &TableConstraint, doms: &DomainState) -> Self {
        let n = table.len();
        let mut init = vec![n as u32];
        init.extend(std::iter::repeat_n(u32::MAX, table.arity()));
        Str2Propagator {
            scope: table.scope().to_vec(),
            cells: table.cells().to_vec(),
            position: (0..n as u32).collect(),
            rev: RevArray::new(init),
            supports: Supports::new(table.scope(), doms),
            changed: Vec::new(),
        }
    }

    pub fn valid_count(&self) -> usize {
        self.rev.get(0) as usize
    }

    /// Index of the last valid tuple, `-1` when none.
    pub fn limit(&self) -> isize {
        self.valid_count() as isize - 1
    }

    /// Sorted indices of the currently valid tuples.
    pub fn valid_tuples(&self) -> Vec<usize> {
        let mut v: Vec<usize> =
            self.position[..self.valid_count()].iter().map(|&t| t as usize).collect();
        v.sort_unstable();
        v
    }
}

impl Propagator for Str2Propagator {
    fn scope(&self) -> &[VarId] {
        &self.scope
    }

    fn filter(&mut self, doms: &mut DomainState) -> PropagationOutcome {
        let arity = self.scope.len();
        changed_positions(&self.scope, doms, &self.rev, 1, &mut self.changed);
        if self.changed.is_empty() {
            return PropagationOutcome::fixpoint();
        }
        self.supports.begin();
        let mut count = self.valid_count();
        let mut i = 0;
        while i < count {
            let t = self.position[i] as usize;
            let row = &self.cells[t * arity..(t + 1) * arity];
            if self.changed.iter().all(|&p| doms.contains(self.scope[p], row[p])) {
                if !self.supports.open.is_empty() {
                    self.supports.collect(&self.scope, doms, |p| Some(row[p]));
                }
                i += 1;
            } else {
                count -= 1;
                self.position.swap(i, count);
            }
        }
        self.rev.set(0, count as u32);
        let out = self.supports.prune(&self.scope, doms);
        record_sizes(&self.scope, doms, &mut self.rev, 1);
        out
    }

    fn save_level(&mut self) {
        self.rev.save();
    }

    fn restore_level(&mut self) -> Result<(), UnderflowError> {
        self.rev.restore()
    }
}

#[derive(Debug, Clone)]
struct FlatEntry {
    /// (scope position, value) of each itemset literal
    literals: Vec<(usize, Value)>,
    /// scope positions of the sub-table columns
    sub_positions: Vec<usize>,
    /// scope position -> sub-table column, `ABSENT` for itemset positions
    column_of: Vec<u32>,
    cells: Vec<Value>,
    position: Vec<u32>,
}

/// STR-style filtering over a compressed table.
#[derive(Debug, Clone)]
pub struct StrMficPropagator {
    scope: Vec<VarId>,
    entries: Vec<FlatEntry>,
    /// whether the last entry holds the default table
    has_default: bool,
    entry_position: Vec<u32>,
    /// slot 0: valid entries; 1..=E: valid sub-tuples per entry; then last
    /// seen domain sizes
    rev: RevArray,
    supports: Supports,
    changed: Vec<usize>,
    changed_mask: Vec<bool>,
}

impl StrMficPropagator {
    pub fn new(ct: &CompressedTable, doms: &DomainState) -> Self {
        let scope = ct.scope().to_vec();
        let arity = scope.len();
        let pos_of = |v: VarId| scope.iter().position(|&s| s == v).expect("entry var in scope");
        let mut entries: Vec<FlatEntry> = ct
            .entries()
            .iter()
            .map(|e| {
                let literals = e.itemset().literals().iter().map(|l| (pos_of(l.var), l.val)).collect();
                let sub_positions: Vec<usize> = e.sub_scope().iter().map(|&v| pos_of(v)).collect();
                let mut column_of = vec![ABSENT; arity];
                for (k, &p) in sub_positions.iter().enumerate() {
                    column_of[p] = k as u32;
                }
                FlatEntry {
                    literals,
                    sub_positions,
                    column_of,
                    cells: e.sub_tuples().concat(),
                    position: (0..e.freq() as u32).collect(),
                }
            })
            .collect();
        let has_default = !ct.default_tuples().is_empty();
        if has_default {
            entries.push(FlatEntry {
                literals: Vec::new(),
                sub_positions: (0..arity).collect(),
                column_of: (0..arity as u32).collect(),
                cells: ct.default_tuples().concat(),
                position: (0..ct.default_tuples().len() as u32).collect(),
            });
        }
        let mut init = vec![entries.len() as u32];
        init.extend(entries.iter().map(|e| e.position.len() as u32));
        init.extend(std::iter::repeat_n(u32::MAX, arity));
        StrMficPropagator {
            supports: Supports::new(&scope, doms),
            entry_position: (0..entries.len() as u32).collect(),
            changed_mask: vec![false; arity],
            scope,
            entries,
            has_default,
            rev: RevArray::new(init),
            changed: Vec::new(),
        }
    }

    fn sizes_offset(&self) -> usize {
        1 + self.entries.len()
    }

    /// Number of valid entries, the default table included when valid.
    pub fn valid_entry_count(&self) -> usize {
        self.rev.get(0) as usize
    }

    /// Index of the last valid entry, `-1` when none.
    pub fn entries_limit(&self) -> isize {
        self.valid_entry_count() as isize - 1
    }

    /// Sorted indices of the valid entries; the default table, when
    /// present, has index `ct.entries().len()`.
    pub fn valid_entries(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.entry_position[..self.valid_entry_count()]
            .iter()
            .map(|&e| e as usize)
            .collect();
        v.sort_unstable();
        v
    }

    pub fn default_entry(&self) -> Option<usize> {
        self.has_default.then(|| self.entries.len() - 1)
    }

    /// Number of valid sub-tuples of entry `e`. Only meaningful while the
    /// entry itself is valid.
    pub fn valid_sub_count(&self, e: usize) -> usize {
        self.rev.get(1 + e) as usize
    }

    /// Sorted valid sub-tuple indices of entry `e`.
    pub fn valid_sub_tuples(&self, e: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.entries[e].position[..self.valid_sub_count(e)]
            .iter()
            .map(|&t| t as usize)
            .collect();
        v.sort_unstable();
        v
    }
}

impl Propagator for StrMficPropagator {
    fn scope(&self) -> &[VarId] {
        &self.scope
    }

    fn filter(&mut self, doms: &mut DomainState) -> PropagationOutcome {
        let off = self.sizes_offset();
        changed_positions(&self.scope, doms, &self.rev, off, &mut self.changed);
        if self.changed.is_empty() {
            return PropagationOutcome::fixpoint();
        }
        self.changed_mask.fill(false);
        for &p in &self.changed {
            self.changed_mask[p] = true;
        }
        self.supports.begin();

        let scope = &self.scope;
        let mut n_entries = self.valid_entry_count();
        let mut ei = 0;
        while ei < n_entries {
            let e = self.entry_position[ei] as usize;
            let entry = &mut self.entries[e];
            let itemset_ok = entry
                .literals
                .iter()
                .all(|&(p, v)| !self.changed_mask[p] || doms.contains(scope[p], v));
            if !itemset_ok {
                n_entries -= 1;
                self.entry_position.swap(ei, n_entries);
                continue;
            }
            let width = entry.sub_positions.len();
            let checks: Vec<usize> = (0..width)
                .filter(|&k| self.changed_mask[entry.sub_positions[k]])
                .collect();
            let mut count = self.rev.get(1 + e) as usize;
            let mut i = 0;
            while i < count {
                let t = entry.position[i] as usize;
                let row = &entry.cells[t * width..(t + 1) * width];
                if checks.iter().all(|&k| doms.contains(scope[entry.sub_positions[k]], row[k])) {
                    if !self.supports.open.is_empty() {
                        let column_of = &entry.column_of;
                        self.supports.collect(scope, doms, |p| match column_of[p] {
                            ABSENT => None,
                            k => Some(row[k as usize]),
                        });
                    }
                    i += 1;
                } else {
                    count -= 1;
                    entry.position.swap(i, count);
                }
            }
            self.rev.set(1 + e, count as u32);
            if count == 0 {
                n_entries -= 1;
                self.entry_position.swap(ei, n_entries);
                continue;
            }
            for &(p, v) in &entry.literals {
                if self.supports.open_mask[p] && self.supports.mark(p, v, doms.size(scope[p])) {
                    self.supports.open.retain(|&q| q != p);
                }
            }
            ei += 1;
        }
        self.rev.set(0, n_entries as u32);
        let out = self.supports.prune(&self.scope, doms);
        record_sizes(&self.scope, doms, &mut self.rev, off);
        out
    }

    fn save_level(&mut self) {
        self.rev.save();
    }

    fn restore_level(&mut self) -> Result<(), UnderflowError> {
        self.rev.restore()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("GAC oracle budget of {0} tuple checks exceeded")]
    TooLarge(u64),
}

pub const ORACLE_BUDGET: u64 = 1_000_000;

/// Greatest fixpoint of support filtering over all constraints, by plain
/// table scans. Returns the supported (sorted) values of every variable;
/// a wiped-out instance yields some empty set.
pub fn gac_oracle(inst: &Instance, doms: &DomainState) -> Result<Vec<Vec<Value>>, OracleError> {
    let mut current: Vec<BTreeSet<Value>> = doms.snapshot().into_iter().map(|v| v.into_iter().collect()).collect();
    let mut checks = 0u64;
    loop {
        let mut changed = false;
        for c in inst.constraints() {
            let mut supported: Vec<BTreeSet<Value>> = vec![BTreeSet::new(); c.arity()];
            for t in c.tuples() {
                checks += 1;
                if checks > ORACLE_BUDGET {
                    return Err(OracleError::TooLarge(ORACLE_BUDGET));
                }
                if c.scope().iter().zip(t).all(|(v, x)| current[v.index()].contains(x)) {
                    for (p, x) in t.iter().enumerate() {
                        supported[p].insert(*x);
                    }
                }
            }
            for (p, v) in c.scope().iter().enumerate() {
                let before = current[v.index()].len();
                current[v.index()].retain(|x| supported[p].contains(x));
                changed |= current[v.index()].len() != before;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(current.into_iter().map(|s| s.into_iter().collect()).collect())
}

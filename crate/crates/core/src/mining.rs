//! Itemset mining over the transaction view of a table.
//!
//! Every tuple of a table becomes a transaction whose items are the
//! `(variable, value)` literals it assigns. The database keeps a vertical
//! layout (one sorted tid-list per item) and a horizontal one (item indices
//! per transaction).
//!
//! Closed itemsets are enumerated depth-first with prefix-preserving closure
//! extension: from a closed set `P` with core item `c`, every item `i > c`
//! not in `P` is tried, the closure of `P + i` is computed on the reduced
//! tid-list, and the branch is kept only when the closure adds no item
//! smaller than `i`. Each closed itemset is reached exactly once. Maximal
//! frequent itemsets are the closed ones with no frequent single-item
//! extension; TopK raises its support threshold as the result heap fills.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use thiserror::Error;

use crate::model::{TableConstraint, Value, VarId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MiningError {
    #[error("minimum support must be at least 1")]
    InvalidThreshold,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("{0} items is too many for exhaustive enumeration (max {BRUTE_FORCE_MAX_ITEMS})")]
    TooLarge(usize),
    #[error("transaction {0} contains two literals on the same variable")]
    ConflictingLiterals(usize),
    #[error("itemset is empty")]
    EmptyItemset,
}

/// A `var = val` item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub var: VarId,
    pub val: Value,
}

impl Literal {
    pub fn new(var: impl Into<VarId>, val: Value) -> Self {
        Literal { var: var.into(), val }
    }
}

impl From<(u32, Value)> for Literal {
    fn from((var, val): (u32, Value)) -> Self {
        Literal { var: VarId(var), val }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.var, self.val)
    }
}

/// A non-empty set of literals over distinct variables, sorted by
/// `(var, val)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Itemset(Vec<Literal>);

impl Itemset {
    pub fn new(mut literals: Vec<Literal>) -> Result<Self, MiningError> {
        if literals.is_empty() {
            return Err(MiningError::EmptyItemset);
        }
        literals.sort_unstable();
        literals.dedup();
        if literals.windows(2).any(|w| w[0].var == w[1].var) {
            return Err(MiningError::ConflictingLiterals(0));
        }
        Ok(Itemset(literals))
    }

    /// Shorthand for tests and fixtures: `Itemset::of(&[(0, 1), (2, 2)])`.
    pub fn of(pairs: &[(u32, Value)]) -> Self {
        Self::new(pairs.iter().map(|&p| Literal::from(p)).collect()).expect("valid itemset")
    }

    pub fn literals(&self) -> &[Literal] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains_var(&self, var: VarId) -> bool {
        self.0.iter().any(|l| l.var == var)
    }

    pub fn is_subset_of(&self, other: &Itemset) -> bool {
        self.0.iter().all(|l| other.0.binary_search(l).is_ok())
    }
}

impl fmt::Display for Itemset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<")?;
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{l}")?;
        }
        f.write_str(">")
    }
}

/// Strictly increasing tuple indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TidSet(Vec<u32>);

impl TidSet {
    pub fn new(mut tids: Vec<u32>) -> Self {
        tids.sort_unstable();
        tids.dedup();
        TidSet(tids)
    }

    pub fn full(n: usize) -> Self {
        TidSet((0..n as u32).collect())
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|&t| t as usize)
    }

    pub fn intersect(&self, other: &TidSet) -> TidSet {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len().min(b.len()));
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        TidSet(out)
    }

    pub fn is_disjoint(&self, other: &TidSet) -> bool {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => return false,
            }
        }
        true
    }
}

/// Transaction database with vertical and horizontal layouts.
#[derive(Debug, Clone)]
pub struct TransactionDB {
    items: Vec<Literal>,
    tidlists: Vec<TidSet>,
    transactions: Vec<Vec<u32>>,
}

impl TransactionDB {
    /// Transaction view of a (canonical) table: one item per
    /// `(scope variable, value)` pair occurring in it.
    pub fn from_table(table: &TableConstraint) -> Self {
        let rows = table
            .tuples()
            .map(|t| {
                table.scope().iter().zip(t).map(|(&var, &val)| Literal { var, val }).collect()
            })
            .collect();
        Self::build(rows)
    }

    /// Generic database over arbitrary literal transactions.
    pub fn from_transactions(rows: Vec<Vec<Literal>>) -> Result<Self, MiningError> {
        for (i, row) in rows.iter().enumerate() {
            let mut r = row.clone();
            r.sort_unstable();
            r.dedup();
            if r.windows(2).any(|w| w[0].var == w[1].var) {
                return Err(MiningError::ConflictingLiterals(i));
            }
        }
        Ok(Self::build(rows))
    }

    fn build(rows: Vec<Vec<Literal>>) -> Self {
        let mut items: Vec<Literal> = rows.iter().flatten().copied().collect();
        items.sort_unstable();
        items.dedup();
        let mut tidlists = vec![Vec::new(); items.len()];
        let transactions = rows
            .iter()
            .enumerate()
            .map(|(tid, row)| {
                let mut idx: Vec<u32> = row
                    .iter()
                    .map(|l| items.binary_search(l).expect("item collected above") as u32)
                    .collect();
                idx.sort_unstable();
                idx.dedup();
                for &i in &idx {
                    tidlists[i as usize].push(tid as u32);
                }
                idx
            })
            .collect();
        TransactionDB { items, tidlists: tidlists.into_iter().map(TidSet).collect(), transactions }
    }

    pub fn n_transactions(&self) -> usize {
        self.transactions.len()
    }

    pub fn items(&self) -> &[Literal] {
        &self.items
    }

    pub fn item_index(&self, lit: &Literal) -> Option<usize> {
        self.items.binary_search(lit).ok()
    }

    /// Tid-list of a single literal (empty for unknown literals).
    pub fn tidlist(&self, lit: &Literal) -> TidSet {
        self.item_index(lit).map(|i| self.tidlists[i].clone()).unwrap_or_default()
    }

    pub fn transaction(&self, tid: usize) -> Vec<Literal> {
        self.transactions[tid].iter().map(|&i| self.items[i as usize]).collect()
    }

    fn itemset_of(&self, idx: &[u32]) -> Itemset {
        Itemset(idx.iter().map(|&i| self.items[i as usize]).collect())
    }
}

/// Tuples covered by `u`: the intersection of its literals' tid-lists.
pub fn coverage(db: &TransactionDB, u: &Itemset) -> TidSet {
    let mut lits = u.literals().iter();
    let Some(first) = lits.next() else {
        return TidSet::full(db.n_transactions());
    };
    let mut acc = db.tidlist(first);
    for l in lits {
        if acc.is_empty() {
            break;
        }
        acc = acc.intersect(&db.tidlist(l));
    }
    acc
}

/// An itemset together with its coverage.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MinedPattern {
    pub itemset: Itemset,
    pub cover: TidSet,
}

impl MinedPattern {
    pub fn new(itemset: Itemset, cover: TidSet) -> Self {
        MinedPattern { itemset, cover }
    }

    pub fn freq(&self) -> usize {
        self.cover.len()
    }

    pub fn len(&self) -> usize {
        self.itemset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.itemset.is_empty()
    }
}

impl fmt::Display for MinedPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}<{}>", self.itemset, self.freq())
    }
}

/// Ranking used by TopK: higher frequency first, then shorter itemset, then
/// lexicographically smaller itemset. `Less` means "ranks better".
pub fn rank_order(a: &MinedPattern, b: &MinedPattern) -> Ordering {
    b.freq()
        .cmp(&a.freq())
        .then_with(|| a.len().cmp(&b.len()))
        .then_with(|| a.itemset.cmp(&b.itemset))
}

struct ClosedVisit<'a> {
    items: &'a [u32],
    tids: &'a [u32],
    /// Largest support among single-item extensions not in the closure.
    max_extension: usize,
}

/// Depth-first prefix-preserving closure enumeration. `visit` returns the
/// support threshold to use from then on, which may only grow.
fn enumerate_closed(db: &TransactionDB, min_support: usize, visit: &mut dyn FnMut(ClosedVisit<'_>) -> usize) {
    let n = db.n_transactions();
    if n == 0 || n < min_support {
        return;
    }
    let m = db.items.len();
    let mut counts = vec![0usize; m];
    let all: Vec<u32> = (0..n as u32).collect();
    for (i, c) in counts.iter_mut().enumerate() {
        *c = db.tidlists[i].len();
    }
    let root: Vec<u32> = (0..m as u32).filter(|&i| counts[i as usize] == n).collect();
    let mut threshold = min_support;
    if !root.is_empty() {
        let max_extension = (0..m).filter(|&i| counts[i] < n).map(|i| counts[i]).max().unwrap_or(0);
        threshold = threshold.max(visit(ClosedVisit { items: &root, tids: &all, max_extension }));
    }
    counts.fill(0);
    let mut stack = Enumerator { db, counts, threshold, in_set: vec![false; m] };
    stack.expand(&root, &all, None, visit);
}

struct Enumerator<'a> {
    db: &'a TransactionDB,
    counts: Vec<usize>,
    threshold: usize,
    in_set: Vec<bool>,
}

impl Enumerator<'_> {
    fn expand(
        &mut self,
        closed: &[u32],
        tids: &[u32],
        core: Option<u32>,
        visit: &mut dyn FnMut(ClosedVisit<'_>) -> usize,
    ) {
        let m = self.db.items.len() as u32;
        let start = core.map_or(0, |c| c + 1);
        for &i in closed {
            self.in_set[i as usize] = true;
        }
        let mut candidates = Vec::new();
        for i in start..m {
            if self.in_set[i as usize] {
                continue;
            }
            let sub = intersect_slices(tids, self.db.tidlists[i as usize].as_slice());
            if sub.len() >= self.threshold && !sub.is_empty() {
                candidates.push((i, sub));
            }
        }
        for &i in closed {
            self.in_set[i as usize] = false;
        }

        for (i, sub) in candidates {
            if sub.len() < self.threshold {
                continue;
            }
            // occurrence counts of every item over the reduced tid-list
            let touched = self.count_occurrences(&sub);
            let f = sub.len();
            let prefix_ok = touched
                .iter()
                .all(|&j| !(j < i && self.counts[j as usize] == f && !closed.contains(&j)));
            if !prefix_ok {
                self.clear_counts(&touched);
                continue;
            }
            let mut next: Vec<u32> = touched.iter().copied().filter(|&j| self.counts[j as usize] == f).collect();
            next.sort_unstable();
            let max_extension = touched
                .iter()
                .map(|&j| self.counts[j as usize])
                .filter(|&c| c < f)
                .max()
                .unwrap_or(0);
            self.clear_counts(&touched);
            let t = visit(ClosedVisit { items: &next, tids: &sub, max_extension });
            self.threshold = self.threshold.max(t);
            self.expand(&next, &sub, Some(i), visit);
        }
    }

    fn count_occurrences(&mut self, tids: &[u32]) -> Vec<u32> {
        let mut touched = Vec::new();
        for &t in tids {
            for &j in &self.db.transactions[t as usize] {
                let c = &mut self.counts[j as usize];
                if *c == 0 {
                    touched.push(j);
                }
                *c += 1;
            }
        }
        touched
    }

    fn clear_counts(&mut self, touched: &[u32]) {
        for &j in touched {
            self.counts[j as usize] = 0;
        }
    }
}

fn intersect_slices(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// All closed itemsets with frequency `>= s_min`, sorted by itemset.
pub fn mine_closed(db: &TransactionDB, s_min: usize) -> Result<Vec<MinedPattern>, MiningError> {
    if s_min < 1 {
        return Err(MiningError::InvalidThreshold);
    }
    let mut out = Vec::new();
    enumerate_closed(db, s_min, &mut |v| {
        out.push(MinedPattern::new(db.itemset_of(v.items), TidSet(v.tids.to_vec())));
        s_min
    });
    out.sort_by(|a, b| a.itemset.cmp(&b.itemset));
    Ok(out)
}

/// All maximal frequent itemsets w.r.t. `s_min`, sorted by itemset.
pub fn mine_maximal(db: &TransactionDB, s_min: usize) -> Result<Vec<MinedPattern>, MiningError> {
    if s_min < 1 {
        return Err(MiningError::InvalidThreshold);
    }
    let mut out = Vec::new();
    enumerate_closed(db, s_min, &mut |v| {
        if v.max_extension < s_min {
            out.push(MinedPattern::new(db.itemset_of(v.items), TidSet(v.tids.to_vec())));
        }
        s_min
    });
    out.sort_by(|a, b| a.itemset.cmp(&b.itemset));
    Ok(out)
}

struct Ranked(MinedPattern);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        rank_order(&self.0, &other.0) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    // worst-ranked pattern sits on top of the max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        rank_order(&self.0, &other.0)
    }
}

/// The `k` best closed itemsets by [`rank_order`], best first.
///
/// The support threshold starts at 1 and rises to the frequency of the
/// worst retained pattern once `k` patterns are held.
pub fn topk_closed(db: &TransactionDB, k: usize) -> Result<Vec<MinedPattern>, MiningError> {
    if k < 1 {
        return Err(MiningError::InvalidK);
    }
    let mut heap: BinaryHeap<Ranked> = BinaryHeap::with_capacity(k + 1);
    enumerate_closed(db, 1, &mut |v| {
        let p = MinedPattern::new(db.itemset_of(v.items), TidSet(v.tids.to_vec()));
        if heap.len() < k {
            heap.push(Ranked(p));
        } else if rank_order(&p, &heap.peek().expect("heap is full").0) == Ordering::Less {
            heap.pop();
            heap.push(Ranked(p));
        }
        if heap.len() == k {
            heap.peek().map_or(1, |w| w.0.freq())
        } else {
            1
        }
    });
    let mut out: Vec<MinedPattern> = heap.into_iter().map(|r| r.0).collect();
    out.sort_by(rank_order);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternKind {
    Frequent,
    Closed,
    Maximal,
}

pub const BRUTE_FORCE_MAX_ITEMS: usize = 24;

/// Exhaustive reference miner. Enumerates every subset of items over
/// distinct variables, computes covers by scanning transactions, and filters
/// by kind. Output sorted by itemset.
pub fn brute_force_patterns(
    db: &TransactionDB,
    s_min: usize,
    kind: PatternKind,
) -> Result<Vec<MinedPattern>, MiningError> {
    if s_min < 1 {
        return Err(MiningError::InvalidThreshold);
    }
    let m = db.items.len();
    if m > BRUTE_FORCE_MAX_ITEMS {
        return Err(MiningError::TooLarge(m));
    }
    let rows: Vec<Vec<Literal>> = (0..db.n_transactions()).map(|t| db.transaction(t)).collect();
    let mut frequent = Vec::new();
    for mask in 1u32..(1u32 << m) {
        let lits: Vec<Literal> =
            (0..m).filter(|&i| mask & (1 << i) != 0).map(|i| db.items[i]).collect();
        if lits.windows(2).any(|w| w[0].var == w[1].var) {
            continue;
        }
        let cover: Vec<u32> = rows
            .iter()
            .enumerate()
            .filter(|(_, row)| lits.iter().all(|l| row.contains(l)))
            .map(|(t, _)| t as u32)
            .collect();
        if cover.len() >= s_min {
            frequent.push(MinedPattern::new(Itemset(lits), TidSet(cover)));
        }
    }
    let keep = |p: &MinedPattern| match kind {
        PatternKind::Frequent => true,
        PatternKind::Closed => !frequent.iter().any(|q| {
            q.len() > p.len() && q.freq() == p.freq() && p.itemset.is_subset_of(&q.itemset)
        }),
        PatternKind::Maximal => {
            !frequent.iter().any(|q| q.len() > p.len() && p.itemset.is_subset_of(&q.itemset))
        }
    };
    let mut out: Vec<MinedPattern> = frequent.iter().filter(|p| keep(p)).cloned().collect();
    out.sort_by(|a, b| a.itemset.cmp(&b.itemset));
    Ok(out)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub const A: u32 = 0;
    pub const B: u32 = 1;
    pub const C: u32 = 2;
    pub const D: u32 = 3;
    pub const E: u32 = 4;

    /// The five-transaction A..E dataset; item X is encoded as `X=1`.
    pub fn letters_db() -> TransactionDB {
        let rows: [&[u32]; 5] = [&[C, D, E, A, B], &[E, B, C, D], &[E, C, D], &[D, A, C, E], &[E, C, A, B]];
        TransactionDB::from_transactions(
            rows.iter().map(|r| r.iter().map(|&v| Literal::new(VarId(v), 1)).collect()).collect(),
        )
        .unwrap()
    }

    pub fn letters(s: &str) -> Itemset {
        Itemset::new(s.bytes().map(|b| Literal::new(VarId((b - b'A') as u32), 1)).collect()).unwrap()
    }
}

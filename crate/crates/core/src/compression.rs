//! Table compression with maximal frequent itemsets.
//!
//! The pipeline per table is: pick a support threshold from the TopK closed
//! itemsets, mine the maximal frequent itemsets at that threshold, greedily
//! select non-overlapping ones by score, and emit one [`Entry`] per selected
//! itemset. Tuples no selected itemset covers go to the default table.
//!
//! Selection sorts the candidates once and takes each in turn if its cover
//! avoids every tuple already claimed. This is the same result as the
//! repeated "take best, drop overlapping" loop, in time linear in the total
//! cover size after the sort (the loop itself is quadratic in the number of
//! candidates).

use std::cmp::Ordering;

use rayon::prelude::*;
use thiserror::Error;

use crate::mining::{
    mine_maximal, topk_closed, Itemset, MinedPattern, MiningError, TransactionDB,
};
use crate::model::{Instance, ModelError, TableConstraint, Value, VarId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompressionError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("transaction database is empty")]
    EmptyDb,
    #[error("entry does not match the table scope: {0}")]
    ScopeMismatch(String),
    #[error(transparent)]
    Mining(#[from] MiningError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SminStrategy {
    /// Lowest frequency among the TopK patterns.
    Min,
    /// Floor of the mean TopK frequency.
    #[default]
    Avg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    /// `|u| * freq(u)`
    #[default]
    Area,
    /// `|u| * (freq(u) - 1)`, the cells saved by factoring `u` out.
    Savings,
}

impl Metric {
    pub fn score(self, len: usize, freq: usize) -> usize {
        match self {
            Metric::Area => len * freq,
            Metric::Savings => len * freq.saturating_sub(1),
        }
    }
}

pub fn area(u: &Itemset, freq: usize) -> usize {
    Metric::Area.score(u.len(), freq)
}

pub fn savings(u: &Itemset, freq: usize) -> usize {
    Metric::Savings.score(u.len(), freq)
}

/// Compression rate of a single entry relative to the tuples it covers:
/// `1 - (|u| + (arity - |u|) * f) / (arity * f)`.
pub fn local_rate(u_len: usize, freq: usize, arity: usize) -> f64 {
    let before = (arity * freq) as f64;
    let after = (u_len + (arity - u_len) * freq) as f64;
    1.0 - after / before
}

/// Cells saved by the selected `(|u|, f)` entries, as a fraction of the
/// whole table's cell count.
pub fn global_rate(selected: &[(usize, usize)], arity: usize, n_tuples: usize) -> f64 {
    let saved: usize = selected
        .iter()
        .map(|&(len, f)| arity * f - (len + (arity - len) * f))
        .sum();
    saved as f64 / (arity * n_tuples) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressionConfig {
    /// Fraction of the table's tuple count used as TopK's `k`.
    pub k_ratio: f64,
    pub smin_strategy: SminStrategy,
    pub metric: Metric,
    /// Lower bound on the chosen threshold.
    pub min_freq_floor: usize,
}

impl Default for CompressionConfig {
    fn default() -> Self {
        CompressionConfig {
            k_ratio: 0.4,
            smin_strategy: SminStrategy::Avg,
            metric: Metric::Area,
            min_freq_floor: 2,
        }
    }
}

impl CompressionConfig {
    pub fn validate(&self) -> Result<(), CompressionError> {
        if !(self.k_ratio > 0.0 && self.k_ratio <= 1.0) {
            return Err(CompressionError::InvalidConfig(format!(
                "k_ratio must be in (0, 1], got {}",
                self.k_ratio
            )));
        }
        if self.min_freq_floor < 2 {
            return Err(CompressionError::InvalidConfig(format!(
                "min_freq_floor must be at least 2, got {}",
                self.min_freq_floor
            )));
        }
        Ok(())
    }

    pub fn k_for(&self, n_tuples: usize) -> usize {
        ((self.k_ratio * n_tuples as f64).ceil() as usize).max(1)
    }
}

/// Minimum support derived from the TopK closed itemsets of `db`.
pub fn choose_smin(db: &TransactionDB, cfg: &CompressionConfig) -> Result<usize, CompressionError> {
    cfg.validate()?;
    if db.n_transactions() == 0 {
        return Err(CompressionError::EmptyDb);
    }
    let top = topk_closed(db, cfg.k_for(db.n_transactions()))?;
    let s = match cfg.smin_strategy {
        SminStrategy::Min => top.iter().map(MinedPattern::freq).min().unwrap_or(1),
        SminStrategy::Avg => {
            let total: usize = top.iter().map(MinedPattern::freq).sum();
            total / top.len().max(1)
        }
    };
    Ok(s.max(cfg.min_freq_floor))
}

/// Outcome of the greedy selection with the removal log.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Selection {
    /// Indices into the input, in selection order.
    pub selected: Vec<usize>,
    /// `(rejected, selector)` pairs: `rejected` was dropped because its cover
    /// meets that of the earlier-selected `selector`.
    pub removed: Vec<(usize, usize)>,
}

fn score_order(metric: Metric, a: &MinedPattern, b: &MinedPattern) -> Ordering {
    metric
        .score(b.len(), b.freq())
        .cmp(&metric.score(a.len(), a.freq()))
        .then_with(|| b.freq().cmp(&a.freq()))
        .then_with(|| a.itemset.cmp(&b.itemset))
}

/// Greedy non-overlapping selection, reporting which pattern knocked out
/// each rejected one.
pub fn select_patterns_traced(mfis: &[MinedPattern], metric: Metric) -> Selection {
    let mut order: Vec<usize> = (0..mfis.len()).collect();
    order.sort_by(|&a, &b| score_order(metric, &mfis[a], &mfis[b]));
    let n_tids = mfis
        .iter()
        .filter_map(|p| p.cover.as_slice().last())
        .max()
        .map_or(0, |&t| t as usize + 1);
    // rank (in selection order) of the pattern owning each tuple
    let mut owner = vec![usize::MAX; n_tids];
    let mut sel = Selection::default();
    for idx in order {
        let blocker = mfis[idx].cover.iter().map(|t| owner[t]).min().unwrap_or(usize::MAX);
        if blocker == usize::MAX {
            let rank = sel.selected.len();
            for t in mfis[idx].cover.iter() {
                owner[t] = rank;
            }
            sel.selected.push(idx);
        } else {
            sel.removed.push((idx, sel.selected[blocker]));
        }
    }
    sel
}

/// Selected patterns in selection order.
pub fn select_patterns(mfis: &[MinedPattern], metric: Metric) -> Vec<MinedPattern> {
    select_patterns_traced(mfis, metric)
        .selected
        .into_iter()
        .map(|i| mfis[i].clone())
        .collect()
}

/// An itemset with the sub-table of the tuples it covers, projected on the
/// remaining scope variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    itemset: Itemset,
    item_vars: Vec<VarId>,
    sub_scope: Vec<VarId>,
    sub_tuples: Vec<Vec<Value>>,
}

impl Entry {
    pub fn new(
        scope: &[VarId],
        itemset: Itemset,
        sub_tuples: Vec<Vec<Value>>,
    ) -> Result<Self, CompressionError> {
        let item_vars: Vec<VarId> = itemset.literals().iter().map(|l| l.var).collect();
        if let Some(v) = item_vars.iter().find(|v| !scope.contains(v)) {
            return Err(CompressionError::ScopeMismatch(format!("itemset variable {v} is not in the scope")));
        }
        if itemset.len() >= scope.len() {
            return Err(CompressionError::ScopeMismatch(format!(
                "itemset of length {} leaves no sub-scope in arity {}",
                itemset.len(),
                scope.len()
            )));
        }
        if sub_tuples.len() < 2 {
            return Err(CompressionError::ScopeMismatch(format!(
                "entry {itemset} has {} sub-tuples, at least 2 required",
                sub_tuples.len()
            )));
        }
        let sub_scope: Vec<VarId> =
            scope.iter().copied().filter(|v| !item_vars.contains(v)).collect();
        if let Some(t) = sub_tuples.iter().find(|t| t.len() != sub_scope.len()) {
            return Err(CompressionError::ScopeMismatch(format!(
                "sub-tuple of length {} under sub-scope of length {}",
                t.len(),
                sub_scope.len()
            )));
        }
        Ok(Entry { itemset, item_vars, sub_scope, sub_tuples })
    }

    pub fn itemset(&self) -> &Itemset {
        &self.itemset
    }

    pub fn item_vars(&self) -> &[VarId] {
        &self.item_vars
    }

    pub fn sub_scope(&self) -> &[VarId] {
        &self.sub_scope
    }

    pub fn sub_tuples(&self) -> &[Vec<Value>] {
        &self.sub_tuples
    }

    pub fn freq(&self) -> usize {
        self.sub_tuples.len()
    }

    /// Cells needed to store this entry.
    pub fn cells(&self) -> usize {
        self.itemset.len() + self.sub_scope.len() * self.sub_tuples.len()
    }

    /// Rebuilds the full tuples this entry stands for, in scope order.
    pub fn expand(&self, scope: &[VarId]) -> Vec<Vec<Value>> {
        self.sub_tuples
            .iter()
            .map(|sub| {
                let mut subs = self.sub_scope.iter().zip(sub);
                scope
                    .iter()
                    .map(|&v| match self.itemset.literals().iter().find(|l| l.var == v) {
                        Some(l) => l.val,
                        None => *subs.next().expect("sub-scope covers the rest").1,
                    })
                    .collect()
            })
            .collect()
    }
}

/// Compressed form of one table: entries plus an uncompressed default
/// table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedTable {
    scope: Vec<VarId>,
    entries: Vec<Entry>,
    default_tuples: Vec<Vec<Value>>,
}

impl CompressedTable {
    pub fn new(
        scope: Vec<VarId>,
        entries: Vec<Entry>,
        default_tuples: Vec<Vec<Value>>,
    ) -> Result<Self, CompressionError> {
        for e in &entries {
            let mut all: Vec<VarId> = e.item_vars.iter().chain(&e.sub_scope).copied().collect();
            all.sort_unstable();
            let mut s = scope.clone();
            s.sort_unstable();
            if all != s {
                return Err(CompressionError::ScopeMismatch(format!(
                    "entry {} does not partition the scope",
                    e.itemset
                )));
            }
        }
        if let Some(t) = default_tuples.iter().find(|t| t.len() != scope.len()) {
            return Err(CompressionError::ScopeMismatch(format!(
                "default tuple of length {} under arity {}",
                t.len(),
                scope.len()
            )));
        }
        Ok(CompressedTable { scope, entries, default_tuples })
    }

    /// The table stored as a default table only.
    pub fn uncompressed(table: &TableConstraint) -> Self {
        CompressedTable {
            scope: table.scope().to_vec(),
            entries: Vec::new(),
            default_tuples: table.rows(),
        }
    }

    pub fn scope(&self) -> &[VarId] {
        &self.scope
    }

    pub fn arity(&self) -> usize {
        self.scope.len()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn default_tuples(&self) -> &[Vec<Value>] {
        &self.default_tuples
    }

    /// Number of source tuples represented.
    pub fn n_tuples(&self) -> usize {
        self.entries.iter().map(Entry::freq).sum::<usize>() + self.default_tuples.len()
    }

    pub fn cells(&self) -> usize {
        self.entries.iter().map(Entry::cells).sum::<usize>()
            + self.arity() * self.default_tuples.len()
    }
}

/// Builds the compressed table for an explicit selection. Covers index the
/// tuples of `table`; sub-tuples keep source order.
pub fn build_compressed(
    table: &TableConstraint,
    selected: &[MinedPattern],
) -> Result<CompressedTable, CompressionError> {
    let scope = table.scope();
    let mut covered = vec![false; table.len()];
    let mut entries = Vec::with_capacity(selected.len());
    for p in selected {
        let positions: Vec<usize> = scope
            .iter()
            .enumerate()
            .filter(|(_, v)| !p.itemset.contains_var(**v))
            .map(|(i, _)| i)
            .collect();
        let mut subs = Vec::with_capacity(p.freq());
        for t in p.cover.iter() {
            if std::mem::replace(&mut covered[t], true) {
                return Err(CompressionError::ScopeMismatch(format!(
                    "tuple {t} is covered by more than one selected itemset"
                )));
            }
            let row = table.tuple(t);
            subs.push(positions.iter().map(|&i| row[i]).collect());
        }
        entries.push(Entry::new(scope, p.itemset.clone(), subs)?);
    }
    let default_tuples = table
        .tuples()
        .zip(&covered)
        .filter(|(_, c)| !**c)
        .map(|(t, _)| t.to_vec())
        .collect();
    CompressedTable::new(scope.to_vec(), entries, default_tuples)
}

/// Compresses with a fixed support threshold.
pub fn compress_with_smin(
    table: &TableConstraint,
    s_min: usize,
    metric: Metric,
) -> Result<CompressedTable, CompressionError> {
    let table = canonical(table);
    if is_degenerate(&table) {
        return Ok(CompressedTable::uncompressed(&table));
    }
    let db = TransactionDB::from_table(&table);
    let mfis: Vec<MinedPattern> = mine_maximal(&db, s_min.max(2))?
        .into_iter()
        .filter(|p| p.len() < table.arity())
        .collect();
    build_compressed(&table, &select_patterns(&mfis, metric))
}

/// Full pipeline: TopK threshold, maximal itemsets, greedy selection,
/// entry construction. Tables of arity < 2 or with fewer than 2 tuples are
/// returned uncompressed.
pub fn compress_table(
    table: &TableConstraint,
    cfg: &CompressionConfig,
) -> Result<CompressedTable, CompressionError> {
    cfg.validate()?;
    let table = canonical(table);
    if is_degenerate(&table) {
        return Ok(CompressedTable::uncompressed(&table));
    }
    let s_min = choose_smin(&TransactionDB::from_table(&table), cfg)?;
    compress_with_smin(&table, s_min, cfg.metric)
}

/// Compresses every constraint of `inst`, in parallel on the current rayon
/// pool.
pub fn compress_instance(
    inst: &Instance,
    cfg: &CompressionConfig,
) -> Result<Vec<CompressedTable>, CompressionError> {
    inst.constraints().par_iter().map(|c| compress_table(c, cfg)).collect()
}

fn canonical(table: &TableConstraint) -> std::borrow::Cow<'_, TableConstraint> {
    if table.is_canonical() {
        std::borrow::Cow::Borrowed(table)
    } else {
        std::borrow::Cow::Owned(table.canonicalize())
    }
}

fn is_degenerate(table: &TableConstraint) -> bool {
    table.arity() < 2 || table.len() < 2
}

/// Rebuilds the canonical table from its compressed form.
pub fn decompress(ct: &CompressedTable) -> Result<TableConstraint, CompressionError> {
    let mut rows = Vec::with_capacity(ct.n_tuples());
    for e in &ct.entries {
        let mut all: Vec<VarId> = e.item_vars.iter().chain(&e.sub_scope).copied().collect();
        all.sort_unstable();
        let mut s = ct.scope.clone();
        s.sort_unstable();
        if all != s {
            return Err(CompressionError::ScopeMismatch(format!(
                "entry {} does not partition the scope",
                e.itemset
            )));
        }
        rows.extend(e.expand(&ct.scope));
    }
    rows.extend(ct.default_tuples.iter().cloned());
    Ok(TableConstraint::new(ct.scope.clone(), rows)?.canonicalize())
}

/// Compression counters for one table, or summed over several.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CompressionStats {
    pub n_tuples: usize,
    pub compressed_tuples: usize,
    pub cells_before: usize,
    pub cells_after: usize,
    pub n_itemsets: usize,
    pub sum_len: usize,
    pub sum_freq: usize,
}

impl CompressionStats {
    /// Percentage of tuples stored inside entries.
    pub fn c_tup_pct(&self) -> f64 {
        pct(self.compressed_tuples, self.n_tuples)
    }

    /// Percentage of cells saved.
    pub fn c_rate_pct(&self) -> f64 {
        if self.cells_before == 0 {
            return 0.0;
        }
        100.0 * (1.0 - self.cells_after as f64 / self.cells_before as f64)
    }

    pub fn avg_len(&self) -> f64 {
        ratio(self.sum_len, self.n_itemsets)
    }

    pub fn avg_freq(&self) -> f64 {
        ratio(self.sum_freq, self.n_itemsets)
    }

    pub fn merge(&mut self, other: &CompressionStats) {
        self.n_tuples += other.n_tuples;
        self.compressed_tuples += other.compressed_tuples;
        self.cells_before += other.cells_before;
        self.cells_after += other.cells_after;
        self.n_itemsets += other.n_itemsets;
        self.sum_len += other.sum_len;
        self.sum_freq += other.sum_freq;
    }
}

fn pct(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        100.0 * a as f64 / b as f64
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn compression_stats(table: &TableConstraint, ct: &CompressedTable) -> CompressionStats {
    let compressed_tuples = ct.entries.iter().map(Entry::freq).sum();
    CompressionStats {
        n_tuples: table.len(),
        compressed_tuples,
        cells_before: table.arity() * table.len(),
        cells_after: ct.cells(),
        n_itemsets: ct.entries.len(),
        sum_len: ct.entries.iter().map(|e| e.itemset.len()).sum(),
        sum_freq: compressed_tuples,
    }
}

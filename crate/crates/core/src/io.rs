//! Text formats for instances and compressed tables, random instance
//! generation, and the stats CSV.
//!
//! Instance document (UTF-8, LF, tokens separated by spaces or tabs, `#`
//! starts a comment line):
//!
//! ```text
//! var x0 0 1
//! var x1 0 1 2
//! table c0 x0 x1
//! 0 2
//! 1 0
//! end
//! ```
//!
//! Compressed document: the same `var` lines, then one block per table:
//!
//! ```text
//! ctable c0 x0 x1 x2
//! entry x0=1 | x1 x2
//! 0 2
//! 1 2
//! default
//! 0 0 1
//! end
//! ```
//!
//! An `entry` line lists the itemset literals, a `|`, then the sub-scope
//! (the remaining scope variables in scope order); sub-tuples follow. Rows
//! after `default` are default tuples. Plain `table` blocks are accepted
//! in compressed documents (as tables with no entries) and `ctable` blocks
//! in instance documents (decompressed on load).

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

use crate::compression::{decompress, CompressedTable, CompressionStats, Entry};
use crate::mining::{Itemset, Literal};
use crate::model::{Instance, TableConstraint, Value, VarId};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },
    #[error("line {line}: unknown variable `{name}`")]
    Scope { line: usize, name: String },
    #[error("line {line}: tuple has {got} values, expected {expected}")]
    RaggedTuple { line: usize, expected: usize, got: usize },
    #[error("line {line}: duplicate name `{name}`")]
    Duplicate { line: usize, name: String },
    #[error("line {line}: {msg}")]
    Invalid { line: usize, msg: String },
    #[error("infeasible generator parameters: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Compressed tables of an instance, with the variable declarations they
/// refer to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedModel {
    pub var_names: Vec<String>,
    pub domains: Vec<Vec<Value>>,
    pub table_names: Vec<String>,
    pub tables: Vec<CompressedTable>,
}

impl CompressedModel {
    pub fn new(inst: &Instance, tables: Vec<CompressedTable>) -> Self {
        assert_eq!(tables.len(), inst.constraints().len());
        CompressedModel {
            var_names: inst.var_names().to_vec(),
            domains: inst.domains().to_vec(),
            table_names: inst.constraint_names().to_vec(),
            tables,
        }
    }

    /// The instance obtained by decompressing every table.
    pub fn to_instance(&self) -> Result<Instance, IoError> {
        let invalid = |msg: String| IoError::Invalid { line: 0, msg };
        let constraints = self
            .tables
            .iter()
            .map(decompress)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| invalid(e.to_string()))?;
        Instance::with_names(
            self.var_names.clone(),
            self.domains.clone(),
            self.table_names.clone(),
            constraints,
        )
        .map_err(|e| invalid(e.to_string()))
    }
}

pub fn write_instance(inst: &Instance) -> String {
    let mut out = String::new();
    write_vars(&mut out, inst.var_names(), inst.domains());
    for (name, c) in inst.constraint_names().iter().zip(inst.constraints()) {
        write_header(&mut out, "table", name, c.scope(), inst.var_names());
        for t in c.tuples() {
            write_row(&mut out, t);
        }
        out.push_str("end\n");
    }
    out
}

pub fn write_compressed(model: &CompressedModel) -> String {
    let names = &model.var_names;
    let mut out = String::new();
    write_vars(&mut out, names, &model.domains);
    for (name, ct) in model.table_names.iter().zip(&model.tables) {
        write_header(&mut out, "ctable", name, ct.scope(), names);
        for e in ct.entries() {
            out.push_str("entry");
            for l in e.itemset().literals() {
                let _ = write!(out, " {}={}", names[l.var.index()], l.val);
            }
            out.push_str(" |");
            for v in e.sub_scope() {
                let _ = write!(out, " {}", names[v.index()]);
            }
            out.push('\n');
            for t in e.sub_tuples() {
                write_row(&mut out, t);
            }
        }
        if !ct.default_tuples().is_empty() {
            out.push_str("default\n");
            for t in ct.default_tuples() {
                write_row(&mut out, t);
            }
        }
        out.push_str("end\n");
    }
    out
}

fn write_vars(out: &mut String, names: &[String], domains: &[Vec<Value>]) {
    for (name, d) in names.iter().zip(domains) {
        out.push_str("var ");
        out.push_str(name);
        for v in d {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
}

fn write_header(out: &mut String, kw: &str, name: &str, scope: &[VarId], names: &[String]) {
    let _ = write!(out, "{kw} {name}");
    for v in scope {
        let _ = write!(out, " {}", names[v.index()]);
    }
    out.push('\n');
}

fn write_row(out: &mut String, t: &[Value]) {
    for (i, v) in t.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
}

/// Parses an instance document; tables are canonicalized.
pub fn parse_instance(doc: &str) -> Result<Instance, IoError> {
    let parsed = parse_document(doc)?;
    let mut constraints = Vec::with_capacity(parsed.tables.len());
    for (line, t) in parsed.tables {
        constraints.push(match t {
            Parsed::Plain(t) => t,
            Parsed::Compressed(ct) => {
                decompress(&ct).map_err(|e| IoError::Invalid { line, msg: e.to_string() })?
            }
        });
    }
    Instance::with_names(parsed.var_names, parsed.domains, parsed.table_names, constraints)
        .map_err(|e| IoError::Invalid { line: 0, msg: e.to_string() })
}

/// Parses a compressed document.
pub fn parse_compressed(doc: &str) -> Result<CompressedModel, IoError> {
    let parsed = parse_document(doc)?;
    let tables = parsed
        .tables
        .into_iter()
        .map(|(_, t)| match t {
            Parsed::Plain(t) => CompressedTable::uncompressed(&t.canonicalize()),
            Parsed::Compressed(ct) => ct,
        })
        .collect();
    Ok(CompressedModel {
        var_names: parsed.var_names,
        domains: parsed.domains,
        table_names: parsed.table_names,
        tables,
    })
}

enum Parsed {
    Plain(TableConstraint),
    Compressed(CompressedTable),
}

struct Document {
    var_names: Vec<String>,
    domains: Vec<Vec<Value>>,
    table_names: Vec<String>,
    /// (line of the header, table)
    tables: Vec<(usize, Parsed)>,
}

/// Whitespace-separated tokens with their 1-based byte columns.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        match (c == ' ' || c == '\t', start) {
            (true, Some(s)) => {
                out.push((s + 1, &line[s..i]));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

fn parse_value(line: usize, (column, tok): (usize, &str)) -> Result<Value, IoError> {
    tok.parse().map_err(|_| IoError::Parse { line, column, msg: format!("expected a value, found `{tok}`") })
}

fn check_name(line: usize, (column, tok): (usize, &str)) -> Result<String, IoError> {
    if tok.contains(['=', '|', '#']) {
        return Err(IoError::Parse { line, column, msg: format!("invalid name `{tok}`") });
    }
    Ok(tok.to_string())
}

struct Block {
    line: usize,
    name: String,
    scope: Vec<VarId>,
    compressed: bool,
    rows: Vec<Vec<Value>>,
    entries: Vec<Entry>,
    /// pending entry: (line, itemset, sub-scope width, sub-tuples)
    entry: Option<(usize, Itemset, usize, Vec<Vec<Value>>)>,
    in_default: bool,
}

impl Block {
    fn close_entry(&mut self) -> Result<(), IoError> {
        if let Some((line, itemset, _, sub)) = self.entry.take() {
            let e = Entry::new(&self.scope, itemset, sub).map_err(|e| IoError::Invalid { line, msg: e.to_string() })?;
            self.entries.push(e);
        }
        Ok(())
    }

    fn finish(mut self) -> Result<(usize, Parsed), IoError> {
        self.close_entry()?;
        let line = self.line;
        let invalid = |msg: String| IoError::Invalid { line, msg };
        let t = if self.compressed {
            let ct = CompressedTable::new(self.scope, self.entries, self.rows).map_err(|e| invalid(e.to_string()))?;
            Parsed::Compressed(ct)
        } else {
            Parsed::Plain(TableConstraint::new(self.scope, self.rows).map_err(|e| invalid(e.to_string()))?)
        };
        Ok((line, t))
    }
}

fn parse_document(doc: &str) -> Result<Document, IoError> {
    let mut var_names: Vec<String> = Vec::new();
    let mut domains = Vec::new();
    let mut var_index: HashMap<String, VarId> = HashMap::new();
    let mut table_names: Vec<String> = Vec::new();
    let mut seen_tables: HashSet<String> = HashSet::new();
    let mut tables = Vec::new();
    let mut block: Option<Block> = None;

    for (i, raw) in doc.lines().enumerate() {
        let line = i + 1;
        let toks = tokens(raw);
        let Some(&(column, head)) = toks.first() else { continue };
        if head.starts_with('#') {
            continue;
        }
        let lookup = |(_, tok): (usize, &str)| {
            var_index.get(tok).copied().ok_or_else(|| IoError::Scope { line, name: tok.to_string() })
        };

        if let Some(b) = block.as_mut() {
            match head {
                "end" => {
                    let (l, t) = block.take().unwrap().finish()?;
                    tables.push((l, t));
                }
                "entry" if b.compressed => {
                    b.close_entry()?;
                    if b.in_default {
                        return Err(IoError::Parse { line, column, msg: "entry after default".into() });
                    }
                    let bar = toks.iter().position(|&(_, t)| t == "|").ok_or(IoError::Parse {
                        line,
                        column,
                        msg: "entry line without `|`".into(),
                    })?;
                    let mut lits = Vec::with_capacity(bar - 1);
                    for &(col, tok) in &toks[1..bar] {
                        let (name, val) = tok.rsplit_once('=').ok_or(IoError::Parse {
                            line,
                            column: col,
                            msg: format!("expected `var=value`, found `{tok}`"),
                        })?;
                        let var = lookup((col, name))?;
                        if !b.scope.contains(&var) {
                            return Err(IoError::Invalid { line, msg: format!("`{name}` is not in the scope") });
                        }
                        lits.push(Literal::new(var, parse_value(line, (col + name.len() + 1, val))?));
                    }
                    let itemset =
                        Itemset::new(lits).map_err(|e| IoError::Invalid { line, msg: e.to_string() })?;
                    let sub: Vec<VarId> = toks[bar + 1..].iter().map(|&t| lookup(t)).collect::<Result<_, _>>()?;
                    let expected: Vec<VarId> =
                        b.scope.iter().copied().filter(|v| !itemset.contains_var(*v)).collect();
                    if sub != expected {
                        return Err(IoError::Invalid {
                            line,
                            msg: "sub-scope must list the non-itemset scope variables in scope order".into(),
                        });
                    }
                    b.entry = Some((line, itemset, sub.len(), Vec::new()));
                }
                "default" if b.compressed => {
                    b.close_entry()?;
                    if b.in_default {
                        return Err(IoError::Parse { line, column, msg: "repeated default".into() });
                    }
                    b.in_default = true;
                }
                _ => {
                    let row: Vec<Value> = toks.iter().map(|&t| parse_value(line, t)).collect::<Result<_, _>>()?;
                    let (expected, dest) = match &mut b.entry {
                        Some((_, _, width, sub)) => (*width, sub),
                        None if !b.compressed || b.in_default => (b.scope.len(), &mut b.rows),
                        None => {
                            return Err(IoError::Parse {
                                line,
                                column,
                                msg: "tuple before any entry or default line".into(),
                            })
                        }
                    };
                    if row.len() != expected {
                        return Err(IoError::RaggedTuple { line, expected, got: row.len() });
                    }
                    dest.push(row);
                }
            }
            continue;
        }

        match head {
            "var" => {
                let &name_tok = toks.get(1).ok_or(IoError::Parse { line, column, msg: "missing variable name".into() })?;
                let name = check_name(line, name_tok)?;
                if var_index.contains_key(&name) {
                    return Err(IoError::Duplicate { line, name });
                }
                let vals: Vec<Value> = toks[2..].iter().map(|&t| parse_value(line, t)).collect::<Result<_, _>>()?;
                if vals.is_empty() {
                    return Err(IoError::Invalid { line, msg: format!("variable `{name}` has an empty domain") });
                }
                var_index.insert(name.clone(), VarId::from(var_names.len()));
                var_names.push(name);
                domains.push(vals);
            }
            "table" | "ctable" => {
                let &name_tok = toks.get(1).ok_or(IoError::Parse { line, column, msg: "missing table name".into() })?;
                let name = check_name(line, name_tok)?;
                if !seen_tables.insert(name.clone()) {
                    return Err(IoError::Duplicate { line, name });
                }
                let scope: Vec<VarId> = toks[2..].iter().map(|&t| lookup(t)).collect::<Result<_, _>>()?;
                if scope.is_empty() {
                    return Err(IoError::Invalid { line, msg: format!("table `{name}` has an empty scope") });
                }
                table_names.push(name.clone());
                block = Some(Block {
                    line,
                    name,
                    scope,
                    compressed: head == "ctable",
                    rows: Vec::new(),
                    entries: Vec::new(),
                    entry: None,
                    in_default: false,
                });
            }
            _ => {
                return Err(IoError::Parse {
                    line,
                    column,
                    msg: format!("expected `var`, `table` or `ctable`, found `{head}`"),
                })
            }
        }
    }
    if let Some(b) = block {
        return Err(IoError::Parse { line: b.line, column: 1, msg: format!("table `{}` has no `end`", b.name) });
    }
    Ok(Document { var_names, domains, table_names, tables })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenParams {
    pub n_vars: usize,
    pub dom_size: u32,
    pub arity: usize,
    pub n_constraints: usize,
    pub tuples_per_constraint: usize,
    pub seed: u64,
}

impl GenParams {
    /// The profile of the randsJC2500 family: 40 variables, domains of 8,
    /// 40 tables of arity 7 with 2500 tuples each.
    pub fn rands_jc(seed: u64) -> Self {
        GenParams { n_vars: 40, dom_size: 8, arity: 7, n_constraints: 40, tuples_per_constraint: 2500, seed }
    }
}

/// Seeded xoshiro256++ (SplitMix64 seeding) with unbiased bounded
/// sampling; the same seed gives the same stream on every platform.
#[derive(Debug, Clone)]
pub struct SeededRng(Xoshiro256PlusPlus);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform integer in `0..n` (Lemire's multiply-shift with rejection).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = self.0.next_u64() as u128 * n as u128;
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// Uniform integer in `lo..=hi`.
    pub fn range(&mut self, lo: u64, hi: u64) -> u64 {
        lo + self.below(hi - lo + 1)
    }

    pub fn chance(&mut self, num: u64, den: u64) -> bool {
        self.below(den) < num
    }
}

/// Random instance: each table's scope is a uniform sample of distinct
/// variables (written in increasing order), and its tuples a uniform
/// sample without replacement of the scope's Cartesian product.
///
/// Uses xoshiro256++ seeded through SplitMix64, so a seed gives the same
/// instance on every platform.
pub fn gen_random(p: &GenParams) -> Result<Instance, IoError> {
    let bad = |msg: String| Err(IoError::Infeasible(msg));
    if p.n_vars == 0 || p.dom_size == 0 {
        return bad("need at least one variable and one value".into());
    }
    if p.arity == 0 || p.arity > p.n_vars {
        return bad(format!("arity {} not in 1..={}", p.arity, p.n_vars));
    }
    let product = (p.dom_size as u64).checked_pow(p.arity as u32);
    if product.is_some_and(|n| (p.tuples_per_constraint as u64) > n) {
        return bad(format!(
            "{} tuples requested from a product of {}",
            p.tuples_per_constraint,
            product.unwrap()
        ));
    }
    let mut rng = SeededRng::new(p.seed);
    let mut constraints = Vec::with_capacity(p.n_constraints);
    for _ in 0..p.n_constraints {
        let mut vars: Vec<u32> = (0..p.n_vars as u32).collect();
        for i in 0..p.arity {
            let j = i + rng.below((p.n_vars - i) as u64) as usize;
            vars.swap(i, j);
        }
        vars.truncate(p.arity);
        vars.sort_unstable();
        let rows = match product {
            Some(n) => floyd_sample(&mut rng, n, p.tuples_per_constraint)
                .into_iter()
                .map(|idx| decode(idx, p.dom_size, p.arity))
                .collect(),
            None => rejection_sample(&mut rng, p.dom_size, p.arity, p.tuples_per_constraint),
        };
        let t = TableConstraint::new(vars.into_iter().map(VarId).collect(), rows)
            .map_err(|e| IoError::Infeasible(e.to_string()))?;
        constraints.push(t);
    }
    Instance::new(vec![(0..p.dom_size).collect(); p.n_vars], constraints)
        .map_err(|e| IoError::Infeasible(e.to_string()))
}

/// `k` distinct integers of `0..n`, sorted.
fn floyd_sample(rng: &mut SeededRng, n: u64, k: usize) -> Vec<u64> {
    let mut chosen = HashSet::with_capacity(k);
    for j in n - k as u64..n {
        let r = rng.below(j + 1);
        if !chosen.insert(r) {
            chosen.insert(j);
        }
    }
    let mut out: Vec<u64> = chosen.into_iter().collect();
    out.sort_unstable();
    out
}

/// Mixed-radix digits of `idx`, most significant first.
fn decode(mut idx: u64, dom: u32, arity: usize) -> Vec<Value> {
    let mut t = vec![0; arity];
    for slot in t.iter_mut().rev() {
        *slot = (idx % dom as u64) as Value;
        idx /= dom as u64;
    }
    t
}

fn rejection_sample(rng: &mut SeededRng, dom: u32, arity: usize, k: usize) -> Vec<Vec<Value>> {
    let mut seen = HashSet::with_capacity(k);
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let t: Vec<Value> = (0..arity).map(|_| rng.below(dom as u64) as Value).collect();
        if seen.insert(t.clone()) {
            out.push(t);
        }
    }
    out.sort_unstable();
    out
}

/// One row of the stats CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsRow {
    pub instance: String,
    pub method: String,
    pub compression: CompressionStats,
    pub solved: bool,
    pub nodes: u64,
    pub time_s: f64,
}

pub const STATS_HEADER: &str =
    "instance,method,c_tup_pct,c_rate_pct,n_itemsets,avg_len,avg_freq,solved,nodes,time_s";

pub fn write_stats_csv(rows: &[StatsRow]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let header: Vec<&str> = STATS_HEADER.split(',').collect();
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        let c = &r.compression;
        w.write_record([
            r.instance.clone(),
            r.method.clone(),
            format!("{:.2}", c.c_tup_pct()),
            format!("{:.2}", c.c_rate_pct()),
            c.n_itemsets.to_string(),
            format!("{:.2}", c.avg_len()),
            format!("{:.2}", c.avg_freq()),
            u8::from(r.solved).to_string(),
            r.nodes.to_string(),
            format!("{:.2}", r.time_s),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 fields")
}

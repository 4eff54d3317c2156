//! CSP data model: variables with finite integer domains and positive table
//! constraints.
//!
//! Tables are stored row-major in a single flat buffer. A table is
//! *canonical* when its tuples are pairwise distinct and sorted
//! lexicographically; everything downstream (mining, compression,
//! propagation) assumes canonical tables.

use std::fmt;

use thiserror::Error;

/// A domain element.
pub type Value = u32;

/// 0-based index of a variable inside an [`Instance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u32);

impl VarId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for VarId {
    fn from(i: usize) -> Self {
        VarId(i as u32)
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("constraint scope is empty")]
    EmptyScope,
    #[error("variable {0} appears twice in a scope")]
    DuplicateScopeVar(VarId),
    #[error("tuple {index} has length {len}, expected arity {arity}")]
    MalformedTuple { index: usize, len: usize, arity: usize },
    #[error("constraint {constraint} references unknown variable {var}")]
    UnknownVariable { constraint: usize, var: VarId },
    #[error("domain of variable {0} is empty")]
    EmptyDomain(VarId),
    #[error("expected {expected} names, got {got}")]
    NameCount { expected: usize, got: usize },
}

/// A positive (allowed-tuples) table constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableConstraint {
    scope: Vec<VarId>,
    cells: Vec<Value>,
}

impl TableConstraint {
    /// Builds a table from rows. Rows are kept as given; call
    /// [`canonicalize`](Self::canonicalize) to dedup and sort.
    pub fn new(scope: Vec<VarId>, rows: Vec<Vec<Value>>) -> Result<Self, ModelError> {
        check_scope(&scope)?;
        let arity = scope.len();
        let mut cells = Vec::with_capacity(arity * rows.len());
        for (index, row) in rows.into_iter().enumerate() {
            if row.len() != arity {
                return Err(ModelError::MalformedTuple { index, len: row.len(), arity });
            }
            cells.extend(row);
        }
        Ok(TableConstraint { scope, cells })
    }

    /// Builds a table from a flat row-major buffer.
    pub fn from_cells(scope: Vec<VarId>, cells: Vec<Value>) -> Result<Self, ModelError> {
        check_scope(&scope)?;
        let arity = scope.len();
        if !cells.len().is_multiple_of(arity) {
            let index = cells.len() / arity;
            return Err(ModelError::MalformedTuple { index, len: cells.len() % arity, arity });
        }
        Ok(TableConstraint { scope, cells })
    }

    pub fn scope(&self) -> &[VarId] {
        &self.scope
    }

    pub fn arity(&self) -> usize {
        self.scope.len()
    }

    pub fn len(&self) -> usize {
        self.cells.len() / self.arity()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn tuple(&self, i: usize) -> &[Value] {
        let a = self.arity();
        &self.cells[i * a..(i + 1) * a]
    }

    pub fn tuples(&self) -> std::slice::ChunksExact<'_, Value> {
        self.cells.chunks_exact(self.arity())
    }

    pub fn cells(&self) -> &[Value] {
        &self.cells
    }

    pub fn rows(&self) -> Vec<Vec<Value>> {
        self.tuples().map(<[Value]>::to_vec).collect()
    }

    /// Removes duplicate tuples and sorts the rest lexicographically.
    pub fn canonicalize(&self) -> TableConstraint {
        let mut rows: Vec<&[Value]> = self.tuples().collect();
        rows.sort_unstable();
        rows.dedup();
        let cells = rows.concat();
        TableConstraint { scope: self.scope.clone(), cells }
    }

    pub fn is_canonical(&self) -> bool {
        self.tuples().zip(self.tuples().skip(1)).all(|(a, b)| a < b)
    }

    /// Position of `var` inside the scope.
    pub fn position(&self, var: VarId) -> Option<usize> {
        self.scope.iter().position(|&v| v == var)
    }
}

fn check_scope(scope: &[VarId]) -> Result<(), ModelError> {
    if scope.is_empty() {
        return Err(ModelError::EmptyScope);
    }
    for (i, v) in scope.iter().enumerate() {
        if scope[..i].contains(v) {
            return Err(ModelError::DuplicateScopeVar(*v));
        }
    }
    Ok(())
}

/// A complete assignment, indexed by [`VarId`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment(pub Vec<Value>);

impl Assignment {
    pub fn value(&self, var: VarId) -> Value {
        self.0[var.index()]
    }

    pub fn project(&self, scope: &[VarId]) -> Vec<Value> {
        scope.iter().map(|&v| self.value(v)).collect()
    }
}

/// A CSP instance. Tables are canonicalized and domains sorted on
/// construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    var_names: Vec<String>,
    domains: Vec<Vec<Value>>,
    constraint_names: Vec<String>,
    constraints: Vec<TableConstraint>,
}

impl Instance {
    pub fn new(
        domains: Vec<Vec<Value>>,
        constraints: Vec<TableConstraint>,
    ) -> Result<Self, ModelError> {
        let var_names = (0..domains.len()).map(|i| format!("x{i}")).collect();
        let constraint_names = (0..constraints.len()).map(|i| format!("c{i}")).collect();
        Self::with_names(var_names, domains, constraint_names, constraints)
    }

    pub fn with_names(
        var_names: Vec<String>,
        mut domains: Vec<Vec<Value>>,
        constraint_names: Vec<String>,
        constraints: Vec<TableConstraint>,
    ) -> Result<Self, ModelError> {
        if var_names.len() != domains.len() {
            return Err(ModelError::NameCount { expected: domains.len(), got: var_names.len() });
        }
        if constraint_names.len() != constraints.len() {
            return Err(ModelError::NameCount {
                expected: constraints.len(),
                got: constraint_names.len(),
            });
        }
        for (i, d) in domains.iter_mut().enumerate() {
            d.sort_unstable();
            d.dedup();
            if d.is_empty() {
                return Err(ModelError::EmptyDomain(VarId::from(i)));
            }
        }
        let n = domains.len();
        let mut canonical = Vec::with_capacity(constraints.len());
        for (ci, c) in constraints.into_iter().enumerate() {
            if let Some(&var) = c.scope().iter().find(|v| v.index() >= n) {
                return Err(ModelError::UnknownVariable { constraint: ci, var });
            }
            canonical.push(if c.is_canonical() { c } else { c.canonicalize() });
        }
        Ok(Instance { var_names, domains, constraint_names, constraints: canonical })
    }

    pub fn n_vars(&self) -> usize {
        self.domains.len()
    }

    pub fn domain(&self, var: VarId) -> &[Value] {
        &self.domains[var.index()]
    }

    pub fn domains(&self) -> &[Vec<Value>] {
        &self.domains
    }

    pub fn constraints(&self) -> &[TableConstraint] {
        &self.constraints
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn constraint_names(&self) -> &[String] {
        &self.constraint_names
    }

    /// Number of complete assignments (saturating).
    pub fn search_space(&self) -> u64 {
        self.domains.iter().fold(1u64, |acc, d| acc.saturating_mul(d.len() as u64))
    }
}

/// True iff the projection of `assignment` onto the scope of `c` is one of
/// its tuples.
pub fn satisfies(assignment: &Assignment, c: &TableConstraint) -> bool {
    let proj = assignment.project(c.scope());
    c.tuples().any(|t| t == proj.as_slice())
}

/// True iff every value lies in its original domain and every constraint is
/// satisfied.
pub fn is_solution(assignment: &Assignment, inst: &Instance) -> bool {
    assignment.0.len() == inst.n_vars()
        && assignment
            .0
            .iter()
            .zip(inst.domains())
            .all(|(v, d)| d.binary_search(v).is_ok())
        && inst.constraints().iter().all(|c| satisfies(assignment, c))
}

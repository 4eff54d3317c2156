//! Seeded workloads shared by the benchmarks.

use mfic::io::gen_random;
use mfic::{GenParams, Instance, SeededRng, TableConstraint, Value, VarId};

/// A canonical random table over variables `0..arity`.
pub fn random_table(seed: u64, arity: usize, dom: u32, n: usize) -> TableConstraint {
    let mut rng = SeededRng::new(seed);
    let rows = (0..n).map(|_| (0..arity).map(|_| rng.below(dom as u64) as Value).collect()).collect();
    TableConstraint::new((0..arity).map(VarId::from).collect(), rows).unwrap().canonicalize()
}

/// A scaled-down randsJC profile: `n_cons` tables of arity 7 over 40
/// variables with domains of 8.
pub fn rands_jc(seed: u64, n_cons: usize, tuples: usize) -> Instance {
    gen_random(&GenParams { n_constraints: n_cons, tuples_per_constraint: tuples, ..GenParams::rands_jc(seed) })
        .unwrap()
}

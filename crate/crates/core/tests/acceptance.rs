//! Acceptance suite. Prints one line per criterion and exits non-zero when
//! a gated criterion fails. Criterion 10 is a soft trend check: it is
//! reported, never gated.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mfic::compression::{
    compress_with_smin, compression_stats, global_rate, local_rate, select_patterns_traced, build_compressed,
};
use mfic::harness::{compress_all, instance_stats};
use mfic::io::gen_random;
use mfic::mining::{
    brute_force_patterns, coverage, mine_closed, mine_maximal, rank_order, topk_closed, PatternKind,
};
use mfic::propagation::{gac_oracle, Str2Propagator, StrMficPropagator};
use mfic::search::{brute_force_solutions, solve_compressed};
use mfic::{
    compress_table, decompress, solve, CompressedTable, CompressionConfig, DomainState, GenParams, Instance,
    Itemset, Literal, Metric, MinedPattern, PropagatorKind, Propagator, SearchMode, SeededRng, SminStrategy,
    SolveConfig, TableConstraint, TidSet, TransactionDB, Value, VarId,
};

type Check = Result<String, String>;

/// Itemset literals `(var, value)` with a list of tuple indices.
type ListedRow<'a> = (&'a [(u32, Value)], &'a [u32]);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

/// The running table in its original listing order (tuples t0..t10).
const LISTED_ROWS: [[Value; 5]; 11] = [
    [0, 0, 0, 0, 2],
    [0, 0, 0, 1, 2],
    [0, 2, 0, 2, 0],
    [0, 0, 1, 1, 2],
    [0, 0, 1, 2, 0],
    [0, 0, 1, 3, 2],
    [1, 0, 2, 1, 1],
    [1, 0, 2, 3, 0],
    [1, 1, 2, 0, 1],
    [1, 1, 2, 2, 2],
    [1, 1, 2, 3, 0],
];

fn scope(n: usize) -> Vec<VarId> {
    (0..n).map(VarId::from).collect()
}

fn running_table() -> TableConstraint {
    TableConstraint::new(scope(5), LISTED_ROWS.iter().map(|r| r.to_vec()).collect()).unwrap().canonicalize()
}

fn running_instance() -> Instance {
    Instance::new(
        vec![vec![0, 1], vec![0, 1, 2], vec![0, 1, 2], vec![0, 1, 2, 3], vec![0, 1, 2]],
        vec![running_table()],
    )
    .unwrap()
}

/// Canonical index of listed tuple `t`.
fn canonical_tid(table: &TableConstraint, t: usize) -> u32 {
    table.tuples().position(|r| r == LISTED_ROWS[t]).unwrap() as u32
}

fn covers_of_listed(table: &TableConstraint, listed: &[u32]) -> TidSet {
    TidSet::new(listed.iter().map(|&t| canonical_tid(table, t as usize)).collect())
}

fn pattern_set(ps: &[MinedPattern]) -> BTreeSet<(Itemset, Vec<u32>)> {
    ps.iter().map(|p| (p.itemset.clone(), p.cover.as_slice().to_vec())).collect()
}

fn criterion_1() -> Check {
    let table = running_table();
    let db = TransactionDB::from_table(&table);
    let mined = mine_maximal(&db, 2).map_err(|e| e.to_string())?;
    let listed_rows: [(ListedRow, usize); 4] = [
        ((&[(0, 1), (1, 1), (2, 2)], &[8, 9, 10]), 9),
        ((&[(0, 0), (1, 0), (2, 0), (4, 2)], &[0, 1]), 8),
        ((&[(0, 0), (1, 0), (2, 1), (4, 2)], &[3, 5]), 8),
        ((&[(0, 0), (3, 2), (4, 0)], &[2, 4]), 6),
    ];
    for ((u, listed), area) in listed_rows {
        let u = Itemset::of(u);
        let cover = covers_of_listed(&table, listed);
        let p = mined.iter().find(|p| p.itemset == u).ok_or(format!("{u} not mined"))?;
        ensure!(p.cover == cover, "{u}: cover {:?}, expected {:?}", p.cover, cover);
        ensure!(p.len() * p.freq() == area, "{u}: area {} != {area}", p.len() * p.freq());
    }
    let brute = brute_force_patterns(&db, 2, PatternKind::Maximal).map_err(|e| e.to_string())?;
    ensure!(pattern_set(&mined) == pattern_set(&brute), "mined set differs from brute force");
    ensure!(mined.len() == 11, "{} maximal patterns, expected 11", mined.len());
    Ok("4 listed rows with areas 9/8/8/6 present; 11 patterns = brute force".into())
}

fn letters_db() -> TransactionDB {
    let rows = ["CDEAB", "EBCD", "ECD", "DACE", "ECAB"];
    TransactionDB::from_transactions(rows.iter().map(|r| letters(r).literals().to_vec()).collect()).unwrap()
}

fn letters(s: &str) -> Itemset {
    Itemset::new(s.bytes().map(|b| Literal::new(VarId((b - b'A') as u32), 1)).collect()).unwrap()
}

fn criterion_2() -> Check {
    let db = letters_db();
    let maximal: BTreeSet<(Itemset, usize)> =
        mine_maximal(&db, 2).map_err(|e| e.to_string())?.into_iter().map(|p| (p.itemset.clone(), p.freq())).collect();
    let expected: BTreeSet<(Itemset, usize)> =
        [("ACDE", 2), ("ABCE", 2), ("BCDE", 2)].iter().map(|&(s, f)| (letters(s), f)).collect();
    ensure!(maximal == expected, "maximal = {maximal:?}");
    let closed = mine_closed(&db, 2).map_err(|e| e.to_string())?;
    ensure!(closed.len() == 7, "{} closed patterns", closed.len());
    let ec = coverage(&db, &letters("EC")).len();
    ensure!(ec == 5, "freq(EC) = {ec}");
    Ok("maximal {ACDE,ABCE,BCDE}<2>; 7 closed; freq(EC) = 5".into())
}

fn criterion_3() -> Check {
    let rows: [ListedRow; 6] = [
        (&[(0, 1), (1, 1), (2, 2)], &[8, 9, 10]),
        (&[(0, 0), (1, 0), (2, 0), (4, 2)], &[0, 1]),
        (&[(0, 0), (1, 0), (2, 1), (4, 2)], &[3, 5]),
        (&[(0, 0), (3, 2), (4, 0)], &[2, 4]),
        (&[(0, 1), (1, 0), (3, 1), (4, 2)], &[1, 3]),
        (&[(0, 0), (2, 1), (3, 3), (4, 0)], &[7, 10]),
    ];
    let mfis: Vec<MinedPattern> =
        rows.iter().map(|(u, c)| MinedPattern::new(Itemset::of(u), TidSet::new(c.to_vec()))).collect();
    let sel = select_patterns_traced(&mfis, Metric::Area);
    ensure!(sel.selected == [0, 1, 2, 3], "selected {:?}", sel.selected);
    ensure!(sel.removed == [(5, 0), (4, 1)], "removed {:?}", sel.removed);
    let scores: Vec<usize> = sel.selected.iter().map(|&i| mfis[i].len() * mfis[i].freq()).collect();
    ensure!(scores.windows(2).all(|w| w[0] >= w[1]), "scores {scores:?}");
    Ok(format!("S = idx1..idx4, idx6 removed by idx1, idx5 by idx2, scores {scores:?}"))
}

fn criterion_4() -> Check {
    let g = global_rate(&[(3, 3)], 5, 11);
    ensure!((g - 0.109).abs() <= 0.001, "global_rate = {g}");
    let l = local_rate(3, 3, 5);
    ensure!(l == 0.4, "local_rate = {l}");
    Ok(format!("global_rate = {g:.4}, local_rate = {l}"))
}

fn criterion_5() -> Check {
    let table = running_table();
    let db = TransactionDB::from_table(&table);
    let sel: Vec<MinedPattern> = [
        Itemset::of(&[(0, 0), (1, 0), (2, 1), (4, 2)]),
        Itemset::of(&[(0, 1), (1, 1), (2, 2)]),
        Itemset::of(&[(0, 0), (1, 0), (2, 0), (4, 2)]),
        Itemset::of(&[(0, 0), (3, 2), (4, 0)]),
    ]
    .into_iter()
    .map(|u| {
        let c = coverage(&db, &u);
        MinedPattern::new(u, c)
    })
    .collect();
    let ct = build_compressed(&table, &sel).map_err(|e| e.to_string())?;
    ensure!(ct.default_tuples().len() == 2, "default has {} tuples", ct.default_tuples().len());
    let inst = running_instance();
    let mut doms = DomainState::from_instance(&inst);
    let mut p = StrMficPropagator::new(&ct, &doms);
    p.filter(&mut doms);
    doms.remove(VarId(1), 0);
    let oracle = gac_oracle(&inst, &doms).map_err(|e| e.to_string())?;
    let out = p.filter(&mut doms);
    ensure!(p.valid_entry_count() == 2, "{} valid entries", p.valid_entry_count());
    ensure!(p.valid_entries() == [1, 3], "valid entries {:?}", p.valid_entries());
    ensure!(p.valid_sub_count(3) == 1, "e4 keeps {} sub-tuples", p.valid_sub_count(3));
    ensure!(p.valid_sub_count(1) == 3, "e2 keeps {} sub-tuples", p.valid_sub_count(1));
    let removed: BTreeSet<(u32, Value)> = out.removed.iter().map(|(v, x)| (v.0, *x)).collect();
    ensure!(removed == BTreeSet::from([(2, 1), (3, 1)]), "removed {removed:?}");
    ensure!(doms.snapshot() == oracle, "domains differ from the GAC oracle");
    Ok("2 valid entries (e2, e4), e4 keeps 1 sub-tuple, default invalid; removed {x2=1, x3=1}".into())
}

fn random_table(rng: &mut SeededRng, arity: usize, dom: u64, n: usize) -> TableConstraint {
    let rows = (0..n).map(|_| (0..arity).map(|_| rng.below(dom) as Value).collect()).collect();
    TableConstraint::new(scope(arity), rows).unwrap().canonicalize()
}

fn criterion_6() -> Check {
    let mut rng = SeededRng::new(6);
    let configs: Vec<CompressionConfig> = [SminStrategy::Min, SminStrategy::Avg]
        .into_iter()
        .flat_map(|s| {
            [Metric::Area, Metric::Savings].into_iter().map(move |m| CompressionConfig {
                smin_strategy: s,
                metric: m,
                ..CompressionConfig::default()
            })
        })
        .collect();
    let mut compressed = 0usize;
    for i in 0..1000 {
        let arity = rng.range(3, 8) as usize;
        let dom = rng.range(2, 10);
        let n = rng.range(10, 200) as usize;
        let t = random_table(&mut rng, arity, dom, n);
        for cfg in &configs {
            let ct = compress_table(&t, cfg).map_err(|e| format!("table {i}: {e}"))?;
            compressed += ct.entries().len();
            let back = decompress(&ct).map_err(|e| format!("table {i}: {e}"))?;
            ensure!(back == t, "table {i} ({cfg:?}) does not round-trip");
        }
    }
    Ok(format!("1000 tables x 4 configs round-trip ({compressed} entries built)"))
}

/// Random instance over `n` variables of domain `0..dom`.
fn random_instance(rng: &mut SeededRng, n: usize, dom: u64, n_cons: usize, max_tuples: u64) -> Instance {
    let cons = (0..n_cons)
        .map(|_| {
            let arity = rng.range(2, n.min(4) as u64) as usize;
            let mut vars: Vec<u32> = (0..n as u32).collect();
            for i in 0..arity {
                let j = i + rng.below((n - i) as u64) as usize;
                vars.swap(i, j);
            }
            vars.truncate(arity);
            let k = rng.range(1, max_tuples) as usize;
            let rows = (0..k).map(|_| (0..arity).map(|_| rng.below(dom) as Value).collect()).collect();
            TableConstraint::new(vars.into_iter().map(VarId).collect(), rows).unwrap()
        })
        .collect();
    Instance::new(vec![(0..dom as Value).collect(); n], cons).unwrap()
}

/// Filters every propagator until none removes a value; false on wipeout.
fn fixpoint<P: Propagator>(props: &mut [P], doms: &mut DomainState) -> bool {
    loop {
        let mut changed = false;
        for p in props.iter_mut() {
            let out = p.filter(doms);
            if out.is_wipeout() {
                return false;
            }
            changed |= !out.removed.is_empty();
        }
        if !changed {
            return true;
        }
    }
}

fn criterion_7() -> Check {
    let mut rng = SeededRng::new(7);
    let mut events_run = 0;
    let mut wipeouts = 0;
    for i in 0..500 {
        let n = rng.range(2, 6) as usize;
        let dom = rng.range(2, 5);
        let n_cons = rng.range(1, 3) as usize;
        let inst = random_instance(&mut rng, n, dom, n_cons, 60);
        let cfg = CompressionConfig {
            smin_strategy: if rng.chance(1, 2) { SminStrategy::Min } else { SminStrategy::Avg },
            ..CompressionConfig::default()
        };
        let tables: Vec<CompressedTable> = if rng.chance(1, 2) {
            inst.constraints().iter().map(|c| compress_table(c, &cfg).unwrap()).collect()
        } else {
            inst.constraints().iter().map(|c| compress_with_smin(c, 2, cfg.metric).unwrap()).collect()
        };
        let mut d1 = DomainState::from_instance(&inst);
        let mut d2 = d1.clone();
        let mut s: Vec<Str2Propagator> = inst.constraints().iter().map(|c| Str2Propagator::new(c, &d1)).collect();
        let mut m: Vec<StrMficPropagator> = tables.iter().map(|t| StrMficPropagator::new(t, &d2)).collect();
        let n_events = rng.range(0, 10);
        for step in 0..=n_events {
            if step > 0 {
                let x = VarId(rng.below(n as u64) as u32);
                let v = rng.below(dom) as Value;
                // events refute values, never empty a domain outright
                if d1.size(x) == 1 {
                    continue;
                }
                d1.remove(x, v);
                d2.remove(x, v);
                events_run += 1;
            }
            let oracle = gac_oracle(&inst, &d1).map_err(|e| e.to_string())?;
            let ok1 = fixpoint(&mut s, &mut d1);
            let ok2 = fixpoint(&mut m, &mut d2);
            let oracle_ok = oracle.iter().all(|d| !d.is_empty());
            ensure!(ok1 == oracle_ok && ok2 == oracle_ok, "instance {i} step {step}: wipeout disagreement");
            if !ok1 {
                wipeouts += 1;
                break;
            }
            ensure!(d1.snapshot() == oracle, "instance {i} step {step}: str2 differs from oracle");
            ensure!(d2.snapshot() == oracle, "instance {i} step {step}: str-mfic differs from oracle");
        }
    }
    Ok(format!("500 instances, {events_run} events, {wipeouts} wipeouts, all fixpoints equal"))
}

fn criterion_8() -> Check {
    let mut rng = SeededRng::new(8);
    let mut total = 0;
    for i in 0..200 {
        let n = rng.range(2, 7) as usize;
        let dom = rng.range(2, 5);
        let n_cons = rng.range(1, 4) as usize;
        let inst = random_instance(&mut rng, n, dom, n_cons, 40);
        ensure!(inst.search_space() <= 100_000, "instance {i} too large");
        let expected: BTreeSet<Vec<Value>> =
            brute_force_solutions(&inst, 100_000).map_err(|e| e.to_string())?.into_iter().map(|a| a.0).collect();
        for kind in PropagatorKind::ALL {
            let cfg = SolveConfig {
                propagator: kind,
                mode: SearchMode::CountAll,
                max_stored: usize::MAX,
                ..SolveConfig::default()
            };
            let r = solve(&inst, &cfg).map_err(|e| e.to_string())?;
            let got: BTreeSet<Vec<Value>> = r.solutions.into_iter().map(|a| a.0).collect();
            ensure!(r.solution_count as usize == expected.len(), "instance {i} {kind}: count {}", r.solution_count);
            ensure!(got == expected, "instance {i} {kind}: solution sets differ");
        }
        total += expected.len();
    }
    Ok(format!("200 instances, {total} solutions, counts equal brute force under both propagators"))
}

fn criterion_9() -> Check {
    let mut rng = SeededRng::new(9);
    for i in 0..300 {
        // items: up to 4 variables with up to 3 values each
        let vars = rng.range(1, 4);
        let vals = rng.range(1, 3);
        let n = rng.range(1, 30) as usize;
        let rows: Vec<Vec<Literal>> = (0..n)
            .map(|_| {
                let mut row = Vec::new();
                for v in 0..vars {
                    if rng.chance(3, 4) {
                        row.push(Literal::new(VarId(v as u32), rng.below(vals) as Value));
                    }
                }
                row
            })
            .collect();
        let db = TransactionDB::from_transactions(rows).map_err(|e| e.to_string())?;
        ensure!(db.items().len() <= 12, "db {i} has {} items", db.items().len());
        for s in [2, 3, 4] {
            let bm = brute_force_patterns(&db, s, PatternKind::Maximal).unwrap();
            let bc = brute_force_patterns(&db, s, PatternKind::Closed).unwrap();
            ensure!(pattern_set(&mine_maximal(&db, s).unwrap()) == pattern_set(&bm), "db {i} s={s}: maximal differs");
            ensure!(pattern_set(&mine_closed(&db, s).unwrap()) == pattern_set(&bc), "db {i} s={s}: closed differs");
        }
        let mut all_closed = brute_force_patterns(&db, 1, PatternKind::Closed).unwrap();
        all_closed.sort_by(rank_order);
        for k in [1, 3, n] {
            let top = topk_closed(&db, k).unwrap();
            let expected = &all_closed[..k.min(all_closed.len())];
            ensure!(pattern_set(&top) == pattern_set(expected), "db {i} k={k}: topk differs");
            ensure!(top.iter().zip(expected).all(|(a, b)| a.freq() == b.freq()), "db {i} k={k}: topk order");
        }
    }
    Ok("300 databases: maximal/closed at s in {2,3,4} and topk at k in {1,3,n} match brute force".into())
}

fn criterion_10() -> Check {
    let inst = gen_random(&GenParams::rands_jc(1)).map_err(|e| e.to_string())?;
    let defaults = compress_all(&inst, &CompressionConfig::default(), None).map_err(|e| e.to_string())?;
    let exhaustive = compress_all(&inst, &CompressionConfig::default(), Some(2)).map_err(|e| e.to_string())?;
    let sd = instance_stats(&inst, &defaults);
    let s2 = instance_stats(&inst, &exhaustive);
    let per_table_ok = inst.constraints().iter().zip(&defaults).all(|(c, ct)| compression_stats(c, ct).n_tuples == 2500);
    let cfg = SolveConfig { node_limit: Some(5000), ..SolveConfig::default() };
    let plain = solve(&inst, &SolveConfig { propagator: PropagatorKind::Str2, ..cfg.clone() }).map_err(|e| e.to_string())?;
    let mfic = solve_compressed(&inst, &defaults, &SolveConfig { propagator: PropagatorKind::StrMfic, ..cfg })
        .map_err(|e| e.to_string())?;
    let trend = sd.c_tup_pct() >= 20.0 && sd.avg_freq() > s2.avg_freq() && per_table_ok;
    let detail = format!(
        "c_tup {:.2}% c_rate {:.2}% |M| {} avg|u| {:.2} avg freq {:.2} (S_min=2: avg freq {:.2}, c_tup {:.2}%); \
         5000 nodes: str2 {:.2}s, str-mfic {:.2}s, equal trees {}",
        sd.c_tup_pct(),
        sd.c_rate_pct(),
        sd.n_itemsets,
        sd.avg_len(),
        sd.avg_freq(),
        s2.avg_freq(),
        s2.c_tup_pct(),
        plain.stats.wall_time.as_secs_f64(),
        mfic.stats.wall_time.as_secs_f64(),
        plain.stats.nodes == mfic.stats.nodes && plain.stats.backtracks == mfic.stats.backtracks,
    );
    if trend {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Criterion {
    id: u32,
    name: &'static str,
    run: fn() -> Check,
    budget: Duration,
    gated: bool,
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let criteria = [
        Criterion { id: 1, name: "running-example maximal patterns", run: criterion_1, budget: secs(1), gated: true },
        Criterion { id: 2, name: "letter-dataset mining fixtures", run: criterion_2, budget: secs(1), gated: true },
        Criterion { id: 3, name: "greedy selection fixture", run: criterion_3, budget: secs(1), gated: true },
        Criterion { id: 4, name: "compression rate fixture", run: criterion_4, budget: secs(1), gated: true },
        Criterion { id: 5, name: "STR-MFIC propagation fixture", run: criterion_5, budget: secs(1), gated: true },
        Criterion { id: 6, name: "compress/decompress round trip", run: criterion_6, budget: secs(60), gated: true },
        Criterion { id: 7, name: "GAC equivalence", run: criterion_7, budget: secs(120), gated: true },
        Criterion { id: 8, name: "solver equivalence", run: criterion_8, budget: secs(120), gated: true },
        Criterion { id: 9, name: "mining oracle", run: criterion_9, budget: secs(60), gated: true },
        Criterion { id: 10, name: "randsJC desk-scale trend (soft)", run: criterion_10, budget: secs(600), gated: false },
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for c in criteria.iter().filter(|c| only.is_none_or(|id| id == c.id)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(d) if elapsed <= c.budget => (true, d),
            Ok(d) => (false, format!("{d}; took {elapsed:.2?}, budget {:?}", c.budget)),
            Err(d) => (false, d),
        };
        let tag = match (pass, c.gated) {
            (true, true) => "PASS",
            (false, true) => "FAIL",
            (true, false) => "REPORT (trend holds)",
            (false, false) => "REPORT (trend not observed)",
        };
        println!("[{tag}] criterion {:>2} {} ({:.2?}): {detail}", c.id, c.name, elapsed);
        if c.gated && !pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} gated criteria failed");
        ExitCode::FAILURE
    } else {
        println!("all gated criteria passed");
        ExitCode::SUCCESS
    }
}

//! Runs instances under each propagator and collects stats rows.

use rayon::prelude::*;

use crate::compression::{
    compress_instance, compress_with_smin, compression_stats, CompressedTable, CompressionConfig, CompressionStats,
};
use crate::io::StatsRow;
use crate::model::Instance;
use crate::search::{solve, solve_compressed, PropagatorKind, SearchError, SolveConfig, SolveStatus};

/// Compresses every table, either through the TopK threshold of `cfg` or
/// at the fixed support `smin`.
pub fn compress_all(
    inst: &Instance,
    cfg: &CompressionConfig,
    smin: Option<usize>,
) -> Result<Vec<CompressedTable>, SearchError> {
    Ok(match smin {
        None => compress_instance(inst, cfg)?,
        Some(s) => inst
            .constraints()
            .par_iter()
            .map(|c| compress_with_smin(c, s, cfg.metric))
            .collect::<Result<_, _>>()?,
    })
}

/// Compression counters summed over all tables.
pub fn instance_stats(inst: &Instance, tables: &[CompressedTable]) -> CompressionStats {
    let mut total = CompressionStats::default();
    for (c, ct) in inst.constraints().iter().zip(tables) {
        total.merge(&compression_stats(c, ct));
    }
    total
}

/// One row per propagator. Compression counters are zero for STR2; `time_s`
/// is search time only, compression excluded.
pub fn run_instance(
    name: &str,
    inst: &Instance,
    kinds: &[PropagatorKind],
    cfg: &SolveConfig,
    smin: Option<usize>,
) -> Result<Vec<StatsRow>, SearchError> {
    let mut rows = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let cfg = SolveConfig { propagator: kind, ..cfg.clone() };
        let (result, compression) = match kind {
            PropagatorKind::Str2 => (solve(inst, &cfg)?, CompressionStats::default()),
            PropagatorKind::StrMfic => {
                let tables = compress_all(inst, &cfg.compression, smin)?;
                (solve_compressed(inst, &tables, &cfg)?, instance_stats(inst, &tables))
            }
        };
        rows.push(StatsRow {
            instance: name.to_string(),
            method: kind.name().to_string(),
            compression,
            solved: result.status != SolveStatus::LimitReached,
            nodes: result.stats.nodes,
            time_s: result.stats.wall_time.as_secs_f64(),
        });
    }
    Ok(rows)
}

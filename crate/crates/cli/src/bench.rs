//! Size sweeps reporting AND gates, bytes and wall time per configuration.

use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use scanpath_gc::payload::{self, AlgorithmParams};
use scanpath_gc::scanpath::{self, Fixation, Scanpath, SymbolSequence};
use scanpath_gc::session::compare_in_process;
use scanpath_gc::{Error, Result};

use crate::output::{write_csv, Format};
use crate::{AlgoArgs, NetArgs};

#[derive(Args)]
pub struct BenchArgs {
    #[command(flatten)]
    algo: AlgoArgs,
    /// Sequence lengths m = n for ScanMatch and MultiMatch.
    #[arg(long, value_delimiter = ',', default_value = "10,20,40")]
    sizes: Vec<usize>,
    /// SubsMatch `A:n` pairs; defaults to the single `--alphabet:--ngram`.
    #[arg(long, value_delimiter = ',')]
    configs: Vec<String>,
    #[command(flatten)]
    net: NetArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

fn random_scanpath(rng: &mut ChaCha20Rng, n: usize) -> Scanpath {
    let f = (0..n)
        .map(|_| Fixation { x: rng.gen(), y: rng.gen(), duration_ms: rng.gen_range(80.0..600.0) })
        .collect();
    Scanpath::new(f).expect("points lie in the unit square")
}

/// Random payloads of `m` and `n` elements.
fn payloads(params: &AlgorithmParams, m: usize, n: usize, rng: &mut ChaCha20Rng) -> Result<(Vec<u8>, Vec<u8>)> {
    let mut one = |len: usize| -> Result<Vec<u8>> {
        match params {
            AlgorithmParams::ScanMatch { grid, bins, .. } => {
                let seq = scanpath::symbolize(&random_scanpath(rng, len), *grid, *bins)?;
                payload::encode_scanmatch(&seq)
            }
            AlgorithmParams::MultiMatch => {
                Ok(payload::encode_multimatch(&scanpath::extract_saccades(&random_scanpath(rng, len + 1))?))
            }
            AlgorithmParams::SubsMatch { alphabet, ngram } => {
                let syms = (0..60).map(|_| rng.gen_range(0..*alphabet)).collect();
                let seq = SymbolSequence::new(syms, *alphabet, 1)?;
                Ok(payload::encode_subsmatch(&scanpath::ngram_frequencies(&seq, *alphabet, *ngram)?))
            }
        }
    };
    Ok((one(m)?, one(n)?))
}

pub fn run(a: BenchArgs) -> Result<()> {
    let profile = a.net.profile()?;
    let seed = a.seed.unwrap_or_else(rand::random);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let base = a.algo.params()?;
    let mut configs: Vec<(AlgorithmParams, usize, usize)> = Vec::new();
    match base {
        AlgorithmParams::SubsMatch { .. } => {
            let specs = if a.configs.is_empty() { vec![format!("{}:{}", a.algo.alphabet, a.algo.ngram)] } else { a.configs.clone() };
            for s in specs {
                let (x, n) = s
                    .split_once(':')
                    .and_then(|(x, n)| Some((x.trim().parse().ok()?, n.trim().parse().ok()?)))
                    .ok_or_else(|| Error::invalid(format!("--configs entry {s:?} is not A:n")))?;
                let p = AlgorithmParams::subsmatch(x, n);
                p.validate()?;
                let d = scanpath::ngram_dim(x, n)?;
                configs.push((p, d, d));
            }
        }
        _ => configs.extend(a.sizes.iter().map(|&m| (base.clone(), m, m))),
    }

    let header = ["algorithm", "params", "m", "n", "and_gates", "table_bytes", "total_bytes", "wall_ms", "seed"];
    let mut rows = Vec::new();
    for (i, (params, m, n)) in configs.iter().enumerate() {
        let (pa, pb) = payloads(params, *m, *n, &mut rng)?;
        let session_seed = seed.wrapping_add(i as u64);
        let (g, _) = compare_in_process(params, &pa, &pb, session_seed, &profile)?;
        let total = g.metrics.bytes_sent + g.metrics.bytes_received;
        rows.push(vec![
            params.algorithm().name().to_string(),
            params.canonical(),
            m.to_string(),
            n.to_string(),
            g.and_gates.to_string(),
            g.table_bytes.to_string(),
            total.to_string(),
            g.metrics.wall_time_ms.to_string(),
            session_seed.to_string(),
        ]);
    }
    match a.format {
        Format::Csv => write_csv(&[header.iter().map(|s| s.to_string()).collect()], &rows),
        Format::Text => {
            for r in rows {
                let line: Vec<String> = header.iter().zip(&r).map(|(h, v)| format!("{h}={v}")).collect();
                println!("{}", line.join(" "));
            }
        }
    }
    Ok(())
}

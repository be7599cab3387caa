use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{model_c11_constant_bound, model_c11_from_gap, naim1d_rho};
use crate::error::{input, Result};

const CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TripleScan {
    pub triples: usize,
    /// Largest `d(x, y) / (d(x, z) + d(z, y))` seen.
    pub worst: f64,
    pub witness: [Vec<f64>; 3],
    /// The constant being checked.
    pub bound: f64,
    /// Triples with ratio above `bound (1 + 1e-12)`.
    pub violations: usize,
}

impl TripleScan {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn run<F>(triples: usize, seed: u64, bound: f64, sample: F) -> Result<TripleScan>
where
    F: Fn(&mut ChaCha8Rng) -> Result<(f64, [Vec<f64>; 3])> + Sync,
{
    if triples == 0 {
        return input("at least one triple is needed");
    }
    let chunks = triples.div_ceil(CHUNK);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<(f64, [Vec<f64>; 3], usize)> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(triples - c * CHUNK);
            let mut best = (f64::NEG_INFINITY, [vec![], vec![], vec![]]);
            let mut bad = 0;
            for _ in 0..count {
                let (r, w) = sample(&mut rng)?;
                if r > bound * (1.0 + 1e-12) {
                    bad += 1;
                }
                if r > best.0 {
                    best = (r, w);
                }
            }
            Ok((best.0, best.1, bad))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = TripleScan {
        triples,
        worst: f64::NEG_INFINITY,
        witness: [vec![], vec![], vec![]],
        bound,
        violations: 0,
    };
    for (r, w, bad) in parts {
        out.violations += bad;
        if r > out.worst {
            out.worst = r;
            out.witness = w;
        }
    }
    Ok(out)
}

/// Random triples from the midpoint grid with `cells` cells, checked
/// against the triangle inequality.
pub fn naim1d_triple_scan(cells: usize, triples: usize, seed: u64) -> Result<TripleScan> {
    if cells == 0 {
        return input("the grid needs at least one cell");
    }
    let pick = |rng: &mut ChaCha8Rng| (rng.random_range(0..cells) as f64 + 0.5) / cells as f64;
    run(triples, seed, 1.0, |rng| {
        let (x, y, z) = (pick(rng), pick(rng), pick(rng));
        let r = naim1d_rho(x, y)? / (naim1d_rho(x, z)? + naim1d_rho(z, y)?);
        Ok((r, [vec![x], vec![y], vec![z]]))
    })
}

fn in_unit_ball(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        if v.iter().map(|c| c * c).sum::<f64>() < 1.0 {
            return v;
        }
    }
}

/// Random triples in the unit ball of `R^n` with boundary distance
/// `1 - |x|`, checked against `model_c11_constant_bound(n)`.
pub fn model_c11_triple_scan(n: usize, triples: usize, seed: u64) -> Result<TripleScan> {
    model_c11_from_gap(0.0, 0.0, 0.0, n)?;
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let delta = |a: &[f64]| 1.0 - a.iter().map(|c| c * c).sum::<f64>().sqrt();
    run(triples, seed, model_c11_constant_bound(n), |rng| {
        let (x, y, z) = (in_unit_ball(rng, n), in_unit_ball(rng, n), in_unit_ball(rng, n));
        let (dx, dy, dz) = (delta(&x), delta(&y), delta(&z));
        let d = |a: &[f64], b: &[f64], da: f64, db: f64| model_c11_from_gap(dist(a, b), da, db, n);
        let r = d(&x, &y, dx, dy)? / (d(&x, &z, dx, dz)? + d(&z, &y, dz, dy)?);
        Ok((r, [x, y, z]))
    })
}

//! Reproducible random streams. Path i of a run draws from ChaCha8 seeded
//! with the run seed on stream i, so results do not depend on how paths are
//! spread over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::Result;

/// Paths folded per work item; fixed so that merge order is fixed.
pub const CHUNK: u64 = 8192;

pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a named test under a master seed (FNV-1a of the name, mixed).
pub fn derive_seed(master: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(h ^ splitmix64(master))
}

/// Folds `n` paths into an accumulator. Each chunk starts from `init()`,
/// paths are folded with `step`, and chunk results are merged in order.
pub fn fold_paths<A, I, S, M>(n: u64, seed: u64, init: I, step: S, merge: M) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, &mut ChaCha8Rng) -> Result<()> + Sync,
    M: Fn(&mut A, A),
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut acc = init();
            for i in k * CHUNK..((k + 1) * CHUNK).min(n) {
                let mut rng = path_rng(seed, i);
                step(&mut acc, &mut rng)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut out = init();
    for p in parts {
        merge(&mut out, p);
    }
    Ok(out)
}

/// Histogram of `n` paths: `class` maps one path to a bin index, or `None`
/// to drop it.
pub fn histogram<C>(n: u64, seed: u64, bins: usize, class: C) -> Result<Vec<u64>>
where
    C: Fn(&mut ChaCha8Rng) -> Result<Option<usize>> + Sync,
{
    fold_paths(
        n,
        seed,
        || vec![0u64; bins],
        |h, rng| {
            if let Some(b) = class(rng)? {
                h[b] += 1;
            }
            Ok(())
        },
        |a, b| a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
    )
}

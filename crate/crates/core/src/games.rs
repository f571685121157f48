//! Worked games: CHSH and its output-flipped twin, Mermin's tripartite game
//! and the CGLMP family.

use crate::error::{domain, Result};
use crate::game::{Dims, GameSpec, Tag};

/// CHSH as a win/lose game: win iff `a XOR b = x AND y`, uniform inputs.
pub fn chsh() -> GameSpec {
    GameSpec::from_fn(Dims::uniform(2, 2, 2).expect("static dims"), vec![0.25; 4], |x, a| {
        f64::from((a[0] ^ a[1]) == (x[0] & x[1]))
    })
    .expect("CHSH is a valid game")
}

/// CHSH with the winning condition `a XOR b XOR 1 = x AND y`.
pub fn chsh_flipped() -> GameSpec {
    GameSpec::from_fn(Dims::uniform(2, 2, 2).expect("static dims"), vec![0.25; 4], |x, a| {
        f64::from((a[0] ^ a[1] ^ 1) == (x[0] & x[1]))
    })
    .expect("flipped CHSH is a valid game")
}

/// Two tags on one set of dimensions: tag 1 plays CHSH, tag 2 the flipped
/// variant.
pub fn chsh_two_states() -> GameSpec {
    let a = chsh();
    let b = chsh_flipped();
    let tables = vec![
        a.score_table(1).expect("tag 1").to_vec(),
        b.score_table(1).expect("tag 1").to_vec(),
    ];
    let tags: Vec<Tag> = vec![1, 2];
    GameSpec::new(a.dims().clone(), tags, tables, a.input_distribution().to_vec())
        .expect("two-state CHSH is a valid game")
}

/// Mermin's game: three parties, even-parity input promise, win iff
/// `a XOR b XOR c = x OR y OR z`.
pub fn mermin() -> GameSpec {
    let dims = Dims::uniform(3, 2, 2).expect("static dims");
    let dist = (0..8)
        .map(|i| {
            let x = dims.input_tuple(i);
            if (x[0] ^ x[1] ^ x[2]) == 0 {
                0.25
            } else {
                0.0
            }
        })
        .collect();
    GameSpec::from_fn(dims, dist, |x, a| {
        if (x[0] ^ x[1] ^ x[2]) != 0 {
            return 0.0;
        }
        f64::from((a[0] ^ a[1] ^ a[2]) == (x[0] | x[1] | x[2]))
    })
    .expect("Mermin is a valid game")
}

/// The CGLMP game for `d` outputs with uniform inputs, scored so that the
/// expected score is the CGLMP expression (local bound 2). For `d = 2` this
/// is CHSH with scores `{-4, 4}`.
pub fn cglmp(d: usize) -> Result<GameSpec> {
    if d < 2 {
        return Err(domain("CGLMP needs d >= 2"));
    }
    let dims = Dims::new(vec![2, 2], vec![d, d])?;
    let di = d as i64;
    GameSpec::from_fn(dims, vec![0.25; 4], move |x, out| {
        let (a, b) = (out[0] as i64, out[1] as i64);
        let mut s = 0.0;
        for k in 0..(d / 2) as i64 {
            let w = 4.0 * (1.0 - 2.0 * k as f64 / (di - 1) as f64);
            // b - a (mod d) that scores +w and -w for this setting.
            let (plus, minus) = match (x[0], x[1]) {
                (0, 0) | (1, 1) => (-k, k + 1),
                (1, 0) => (k + 1, -k),
                _ => (k, -k - 1),
            };
            let diff = (b - a).rem_euclid(di);
            if diff == plus.rem_euclid(di) {
                s += w;
            }
            if diff == minus.rem_euclid(di) {
                s -= w;
            }
        }
        s
    })
}

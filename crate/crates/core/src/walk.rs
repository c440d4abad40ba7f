//! Bi-infinite random words over the support of a finite measure, the shift,
//! compositions along a word and the skew product.

use crate::error::{Error, Result};
use crate::model::{AutoId, SurfaceModel};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Default truncation for the word metric.
pub const DEFAULT_TRUNCATION: usize = 64;

const DEFAULT_CACHE_RADIUS: usize = 1024;

/// Finitely supported probability measure on automorphism ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMeasure {
    atoms: Vec<AutoId>,
    weights: Vec<f64>,
}

impl FiniteMeasure {
    pub fn new(atoms: Vec<AutoId>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidMeasure(format!("weight {w} is not positive")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }
        Ok(FiniteMeasure { atoms, weights })
    }

    pub fn uniform(atoms: Vec<AutoId>) -> Result<Self> {
        let n = atoms.len().max(1);
        Self::new(atoms, vec![1.0 / n as f64; n])
    }

    pub fn dirac(atom: AutoId) -> Self {
        FiniteMeasure { atoms: vec![atom], weights: vec![1.0] }
    }

    pub fn atoms(&self) -> &[AutoId] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn support_size(&self) -> usize {
        self.atoms.len()
    }

    /// The pushforward of the measure under `f -> f^-1`.
    pub fn inverse<M: SurfaceModel>(&self, model: &M) -> Result<Self> {
        let atoms = self.atoms.iter().map(|&a| model.inverse_id(a)).collect::<Result<Vec<_>>>()?;
        Ok(FiniteMeasure { atoms, weights: self.weights.clone() })
    }

    fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect()
    }
}

#[derive(Debug)]
enum Source {
    Random { key: [u8; 32], cumulative: Vec<f64>, cache: Vec<u32>, radius: i64 },
    Periodic(Vec<usize>),
}

fn zigzag(n: i64) -> u64 {
    ((n << 1) ^ (n >> 63)) as u64
}

impl Source {
    fn draw(key: &[u8; 32], cumulative: &[f64], n: i64) -> u32 {
        let mut rng = ChaCha8Rng::from_seed(*key);
        rng.set_word_pos(2 * zigzag(n) as u128);
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1) as u32
    }

    fn symbol(&self, n: i64) -> usize {
        match self {
            Source::Random { key, cumulative, cache, radius } => {
                if n.abs() <= *radius {
                    cache[(n + radius) as usize] as usize
                } else {
                    Self::draw(key, cumulative, n) as usize
                }
            }
            Source::Periodic(seq) => seq[n.rem_euclid(seq.len() as i64) as usize],
        }
    }
}

/// An element of `supp(mu)^Z`, realized lazily. Symbols are indices into
/// the measure's support.
#[derive(Debug, Clone)]
pub struct WalkWord {
    measure: Arc<FiniteMeasure>,
    source: Arc<Source>,
    seed: u64,
    offset: i64,
}

impl WalkWord {
    /// Random word with i.i.d. symbols of law `measure`, determined by `seed`.
    pub fn new(seed: u64, measure: &FiniteMeasure) -> Self {
        Self::with_cache(seed, measure, DEFAULT_CACHE_RADIUS)
    }

    pub fn with_cache(seed: u64, measure: &FiniteMeasure, radius: usize) -> Self {
        let mut key = [0u8; 32];
        ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut key);
        let cumulative = measure.cumulative();
        let radius = radius as i64;
        let cache = (-radius..=radius).map(|n| Source::draw(&key, &cumulative, n)).collect();
        WalkWord {
            measure: Arc::new(measure.clone()),
            source: Arc::new(Source::Random { key, cumulative, cache, radius }),
            seed,
            offset: 0,
        }
    }

    /// Periodic word repeating `symbols` (indices into the support), with
    /// `symbols[0]` at index 0.
    pub fn periodic(measure: &FiniteMeasure, symbols: Vec<usize>) -> Result<Self> {
        if symbols.is_empty() || symbols.iter().any(|&s| s >= measure.support_size()) {
            return Err(Error::InvalidArgument("periodic word symbols out of range".into()));
        }
        Ok(WalkWord {
            measure: Arc::new(measure.clone()),
            source: Arc::new(Source::Periodic(symbols)),
            seed: 0,
            offset: 0,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn measure(&self) -> &FiniteMeasure {
        &self.measure
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    /// Support index at position `n`.
    pub fn symbol(&self, n: i64) -> usize {
        self.source.symbol(self.offset + n)
    }

    /// Automorphism id `f_n` at position `n`.
    pub fn auto(&self, n: i64) -> AutoId {
        self.measure.atoms[self.symbol(n)]
    }

    /// `sigma^m(self)`: the word whose entry `n` is entry `n + m` of `self`.
    pub fn shift(&self, m: i64) -> WalkWord {
        WalkWord { offset: self.offset + m, ..self.clone() }
    }

    pub fn window(&self, lo: i64, hi: i64) -> Vec<usize> {
        (lo..=hi).map(|n| self.symbol(n)).collect()
    }

    /// Whether two words are the same shift of the same underlying source.
    pub fn same_as(&self, other: &WalkWord) -> bool {
        Arc::ptr_eq(&self.source, &other.source) && self.offset == other.offset
    }
}

/// Seed for worker `worker` derived from a master seed.
pub fn derive_seed(seed: u64, worker: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(worker.wrapping_add(1));
    rng.gen()
}

/// `f_w^n(x)`: forward composition for `n >= 0`, inverses of `f_{-1}, ..., f_n` for `n < 0`.
pub fn compose<M: SurfaceModel>(model: &M, w: &WalkWord, n: i64, x: &M::Point) -> Result<M::Point> {
    let mut p = x.clone();
    if n >= 0 {
        for i in 0..n {
            p = model.apply(w.auto(i), &p)?;
        }
    } else {
        for i in 1..=(-n) {
            p = model.apply_inverse(w.auto(-i), &p)?;
        }
    }
    Ok(p)
}

/// `F^n(x, w) = (f_w^n x, sigma^n w)`.
pub fn skew_step<M: SurfaceModel>(
    model: &M,
    x: &M::Point,
    w: &WalkWord,
    n: i64,
) -> Result<(M::Point, WalkWord)> {
    Ok((compose(model, w, n, x)?, w.shift(n)))
}

/// `sum_{|n| <= N} 2^-|n| [w_n != w'_n]`, comparing automorphism ids.
pub fn omega_distance(a: &WalkWord, b: &WalkWord, truncation: usize) -> f64 {
    let t = truncation as i64;
    (-t..=t)
        .filter(|&n| a.auto(n) != b.auto(n))
        .map(|n| 0.5f64.powi(n.unsigned_abs() as i32))
        .sum()
}

use crate::rng::derive_seed;

/// Maps a phrase to a fixed-length vector.
pub trait TextEncoder: Send + Sync {
    fn dim(&self) -> usize;
    fn encode(&self, text: &str) -> Result<Vec<f64>, String>;
}

/// Seeded hashed character n-grams (n in 3..=4, word-boundary padded), signed
/// bucket counts, L2-normalized.
#[derive(Debug, Clone)]
pub struct HashedNgramEncoder {
    dim: usize,
    seed: u64,
}

impl HashedNgramEncoder {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self { dim: dim.max(1), seed }
    }
}

impl Default for HashedNgramEncoder {
    fn default() -> Self {
        Self::new(256, 0)
    }
}

impl TextEncoder for HashedNgramEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>, String> {
        let mut v = vec![0.0; self.dim];
        let padded: Vec<char> = format!(" {} ", text.trim()).chars().collect();
        for n in 3..=4 {
            for gram in padded.windows(n) {
                let g: String = gram.iter().collect();
                let h = derive_seed(self.seed, &[b"ngram", g.as_bytes()]);
                let bucket = (h % self.dim as u64) as usize;
                let sign = if (h >> 63) & 1 == 0 { 1.0 } else { -1.0 };
                v[bucket] += sign;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

/// Same vector for every phrase, so only structure distinguishes nodes.
#[derive(Debug, Clone)]
pub struct ConstantEncoder {
    dim: usize,
}

impl ConstantEncoder {
    pub fn new(dim: usize) -> Self {
        Self { dim: dim.max(1) }
    }
}

impl TextEncoder for ConstantEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, _text: &str) -> Result<Vec<f64>, String> {
        Ok(vec![1.0 / (self.dim as f64).sqrt(); self.dim])
    }
}

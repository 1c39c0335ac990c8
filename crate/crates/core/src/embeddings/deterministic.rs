use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{EmbedError, EmbeddingMatrix, EmbeddingProvider, ProviderDescriptor, ProviderKind};

/// Hashes each whitespace token to a fixed unit-norm vector. Output depends
/// only on `(seed, token)`, so it is identical across processes and runs.
#[derive(Debug, Clone)]
pub struct DeterministicProvider {
    descriptor: ProviderDescriptor,
    seed: u64,
}

impl DeterministicProvider {
    pub fn new(dim: usize, seed: u64) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::Malformed("dim must be positive".into()));
        }
        Ok(DeterministicProvider {
            descriptor: ProviderDescriptor {
                kind: ProviderKind::DeterministicTest,
                dim,
                identity: format!("deterministic-test/seed={seed}/dim={dim}"),
            },
            seed,
        })
    }

    fn token_vector(&self, token: &str, out: &mut Vec<f64>) {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(token.as_bytes());
        let digest: [u8; 32] = hasher.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(digest);
        let start = out.len();
        loop {
            out.truncate(start);
            out.extend((0..self.descriptor.dim).map(|_| rng.gen_range(-1.0..1.0)));
            let norm = out[start..].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-6 {
                out[start..].iter_mut().for_each(|v| *v /= norm);
                return;
            }
        }
    }
}

impl EmbeddingProvider for DeterministicProvider {
    fn descriptor(&self) -> &ProviderDescriptor {
        &self.descriptor
    }

    fn embed(&self, text: &str) -> Result<EmbeddingMatrix, EmbedError> {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut values = Vec::with_capacity(tokens.len() * self.descriptor.dim);
        for token in &tokens {
            self.token_vector(token, &mut values);
        }
        EmbeddingMatrix::new(tokens.len(), self.descriptor.dim, values)
    }
}

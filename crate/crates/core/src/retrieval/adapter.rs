use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RetrievalError;

/// The trainable retriever: a d×d matrix over frozen base embeddings,
/// initialized to the identity, plus Adam moments. Query and mode sides
/// share the same matrix, and no length normalization is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterParameters {
    pub dim: usize,
    /// Row-major d×d.
    pub matrix: Vec<f64>,
    pub moment1: Vec<f64>,
    pub moment2: Vec<f64>,
    pub step: u64,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    dim: usize,
    step: u64,
    matrix: Vec<f64>,
}

impl AdapterParameters {
    pub fn identity(dim: usize) -> Self {
        let mut matrix = vec![0.0; dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = 1.0;
        }
        AdapterParameters {
            dim,
            matrix,
            moment1: vec![0.0; dim * dim],
            moment2: vec![0.0; dim * dim],
            step: 0,
        }
    }

    /// Encode a base embedding: matrix × base.
    pub fn apply(&self, base: &[f64]) -> Vec<f64> {
        debug_assert_eq!(base.len(), self.dim);
        let d = self.dim;
        (0..d)
            .map(|r| {
                let row = &self.matrix[r * d..(r + 1) * d];
                row.iter().zip(base).map(|(w, x)| w * x).sum()
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.matrix.iter().all(|x| x.is_finite())
    }

    /// Write the checkpoint: dimension header, row-major matrix, step.
    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        let file = CheckpointFile {
            dim: self.dim,
            step: self.step,
            matrix: self.matrix.clone(),
        };
        let body = serde_json::to_string(&file).map_err(|e| RetrievalError::Checkpoint {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| RetrievalError::Checkpoint {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        }
        std::fs::write(path, body).map_err(|e| RetrievalError::Checkpoint {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let text = std::fs::read_to_string(path).map_err(|e| RetrievalError::Checkpoint {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let file: CheckpointFile =
            serde_json::from_str(&text).map_err(|e| RetrievalError::Checkpoint {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        if file.matrix.len() != file.dim * file.dim {
            return Err(RetrievalError::Checkpoint {
                path: path.display().to_string(),
                message: format!(
                    "matrix has {} entries for dim {}",
                    file.matrix.len(),
                    file.dim
                ),
            });
        }
        Ok(AdapterParameters {
            dim: file.dim,
            matrix: file.matrix,
            moment1: vec![0.0; file.dim * file.dim],
            moment2: vec![0.0; file.dim * file.dim],
            step: file.step,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_adapter_is_a_no_op() {
        let params = AdapterParameters::identity(3);
        let base = vec![0.5, -1.0, 2.0];
        assert_eq!(params.apply(&base), base);
    }

    #[test]
    fn zero_matrix_maps_everything_to_zero() {
        let mut params = AdapterParameters::identity(3);
        params.matrix.iter_mut().for_each(|x| *x = 0.0);
        assert_eq!(params.apply(&[1.0, 2.0, 3.0]), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn identity_similarity_equals_raw_inner_product() {
        let params = AdapterParameters::identity(6);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sim = dot(&params.apply(&a), &params.apply(&b));
            assert!((sim - dot(&a, &b)).abs() < 1e-12);
        }
    }

    #[test]
    fn checkpoint_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("adapter.json");
        let mut params = AdapterParameters::identity(4);
        params.matrix[5] = 0.25;
        params.step = 20;
        params.save(&path).unwrap();
        let back = AdapterParameters::load(&path).unwrap();
        assert_eq!(back.matrix, params.matrix);
        assert_eq!(back.step, 20);
        assert_eq!(back.dim, 4);
    }

    #[test]
    fn corrupt_checkpoint_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("adapter.json");
        std::fs::write(&path, r#"{"dim":3,"step":0,"matrix":[1.0]}"#).unwrap();
        assert!(matches!(
            AdapterParameters::load(&path),
            Err(RetrievalError::Checkpoint { .. })
        ));
    }
}

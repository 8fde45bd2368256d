use super::{dot, RetrievalError};

#[derive(Debug, Clone)]
pub struct IndexEntry {
    pub mode_id: String,
    pub vector: Vec<f64>,
}

/// Exact inner-product index over thought-mode vectors. Bank sizes here
/// are small enough that brute force is both exact and fast.
#[derive(Debug, Clone, Default)]
pub struct VectorIndex {
    pub entries: Vec<IndexEntry>,
}

impl VectorIndex {
    pub fn new(entries: Vec<IndexEntry>) -> Self {
        VectorIndex { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Top-`m` entries by inner product, descending, ties broken by
    /// ascending mode id. `exclude` drops one id before ranking; the
    /// result is clamped to however many entries remain.
    pub fn search_top_m(
        &self,
        query: &[f64],
        m: usize,
        exclude: Option<&str>,
    ) -> Result<Vec<(String, f64)>, RetrievalError> {
        if self.entries.is_empty() {
            return Err(RetrievalError::EmptyIndex);
        }
        let mut scored: Vec<(&str, f64)> = self
            .entries
            .iter()
            .filter(|e| exclude != Some(e.mode_id.as_str()))
            .map(|e| (e.mode_id.as_str(), dot(query, &e.vector)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        scored.truncate(m);
        Ok(scored
            .into_iter()
            .map(|(id, sim)| (id.to_string(), sim))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn index(entries: &[(&str, Vec<f64>)]) -> VectorIndex {
        VectorIndex::new(
            entries
                .iter()
                .map(|(id, v)| IndexEntry {
                    mode_id: id.to_string(),
                    vector: v.clone(),
                })
                .collect(),
        )
    }

    #[test]
    fn orthogonal_basis_ranks_by_alignment() {
        let idx = index(&[("A", vec![1.0, 0.0]), ("B", vec![0.0, 1.0])]);
        let top = idx.search_top_m(&[1.0, 0.0], 1, None).unwrap();
        assert_eq!(top, vec![("A".to_string(), 1.0)]);
    }

    #[test]
    fn clamps_to_available_entries() {
        let idx = index(&[("A", vec![1.0, 0.0]), ("B", vec![0.0, 1.0])]);
        let top = idx.search_top_m(&[1.0, 0.0], 5, None).unwrap();
        assert_eq!(top.len(), 2);
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let idx = index(&[("b", vec![1.0]), ("a", vec![1.0])]);
        let top = idx.search_top_m(&[1.0], 2, None).unwrap();
        assert_eq!(top[0].0, "a");
        assert_eq!(top[1].0, "b");
    }

    #[test]
    fn exclusion_removes_exactly_one_id() {
        let idx = index(&[("A", vec![1.0, 0.0]), ("B", vec![0.0, 1.0])]);
        let top = idx.search_top_m(&[1.0, 0.0], 5, Some("A")).unwrap();
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].0, "B");
    }

    #[test]
    fn empty_index_errors() {
        let idx = VectorIndex::default();
        assert!(matches!(
            idx.search_top_m(&[1.0], 1, None),
            Err(RetrievalError::EmptyIndex)
        ));
    }

    proptest! {
        // Brute-force full-sort oracle over random indexes.
        #[test]
        fn agrees_with_full_sort_oracle(
            vectors in prop::collection::vec(
                prop::collection::vec(-1.0f64..1.0, 3), 1..12),
            query in prop::collection::vec(-1.0f64..1.0, 3),
            m in 1usize..14,
        ) {
            let entries: Vec<(String, Vec<f64>)> = vectors
                .into_iter()
                .enumerate()
                .map(|(i, v)| (format!("m{i:02}"), v))
                .collect();
            let idx = VectorIndex::new(
                entries
                    .iter()
                    .map(|(id, v)| IndexEntry { mode_id: id.clone(), vector: v.clone() })
                    .collect(),
            );

            let mut oracle: Vec<(String, f64)> = entries
                .iter()
                .map(|(id, v)| {
                    (id.clone(), v.iter().zip(&query).map(|(a, b)| a * b).sum())
                })
                .collect();
            oracle.sort_by(|a: &(String, f64), b| {
                b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
            });
            oracle.truncate(m);

            let got = idx.search_top_m(&query, m, None).unwrap();
            prop_assert_eq!(got, oracle);
        }
    }
}

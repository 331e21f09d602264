use std::fs;
use std::path::Path;

use crate::corpus::vocab::{Vocab, PAD_ID, UNK_ID};
use crate::error::{RelexError, Result};

/// Plain word-vector table paired with its vocabulary. Row layout matches
/// vocab ids: PAD (zeros), UNK (mean of loaded rows), then loaded words.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub vocab: Vocab,
    pub dim: usize,
    /// Row-major `vocab.len() x dim`.
    pub data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn row(&self, id: usize) -> &[f64] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    /// Vector of a known word; specials and absent words return None.
    pub fn known_vector(&self, word: &str) -> Option<&[f64]> {
        self.vocab.known_id(word).map(|id| self.row(id))
    }
}

/// Loads a text embedding file: `word v1 v2 ... vdim` per line,
/// whitespace-separated.
pub fn load_embeddings(path: impl AsRef<Path>, dim: usize) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let text =
        fs::read_to_string(path).map_err(|e| RelexError::io(path.display().to_string(), e))?;
    load_embeddings_str(&text, dim)
}

pub fn load_embeddings_str(text: &str, dim: usize) -> Result<EmbeddingTable> {
    if dim == 0 {
        return Err(RelexError::Config("embedding dim must be positive".into()));
    }
    let mut words = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let word = it
            .next()
            .ok_or_else(|| RelexError::Parse {
                line: lineno,
                msg: "missing word".into(),
            })?
            .to_string();
        let vals: Vec<f64> = it
            .map(|t| {
                t.parse::<f64>().map_err(|e| RelexError::Parse {
                    line: lineno,
                    msg: format!("bad float {t:?}: {e}"),
                })
            })
            .collect::<Result<_>>()?;
        if vals.len() != dim {
            return Err(RelexError::Parse {
                line: lineno,
                msg: format!("expected {dim} floats, found {}", vals.len()),
            });
        }
        words.push(word);
        rows.push(vals);
    }

    let vocab = Vocab::from_words(words);
    let v = vocab.len();
    let mut data = vec![0.0; v * dim];
    // UNK row: arithmetic mean of all loaded rows.
    if !rows.is_empty() {
        for row in &rows {
            for (j, x) in row.iter().enumerate() {
                data[UNK_ID * dim + j] += x;
            }
        }
        let n = rows.len() as f64;
        for j in 0..dim {
            data[UNK_ID * dim + j] /= n;
        }
    }
    debug_assert!(data[PAD_ID * dim..(PAD_ID + 1) * dim].iter().all(|&x| x == 0.0));
    for (k, row) in rows.iter().enumerate() {
        let id = k + 2;
        data[id * dim..(id + 1) * dim].copy_from_slice(row);
    }
    Ok(EmbeddingTable { vocab, dim, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "cat 1.0 2.0 3.0\ndog 3.0 2.0 1.0\n";

    #[test]
    fn two_words_dim_three_gives_four_rows_with_zero_pad() {
        let table = load_embeddings_str(SAMPLE, 3).unwrap();
        assert_eq!(table.vocab.len(), 4);
        assert_eq!(table.data.len(), 12);
        assert!(table.row(PAD_ID).iter().all(|&x| x == 0.0));
        assert_eq!(table.row(table.vocab.id("cat")), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn unk_row_is_mean_of_loaded_rows() {
        let table = load_embeddings_str(SAMPLE, 3).unwrap();
        // Oracle: direct arithmetic mean.
        let expect = [(1.0 + 3.0) / 2.0, (2.0 + 2.0) / 2.0, (3.0 + 1.0) / 2.0];
        for (a, b) in table.row(UNK_ID).iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn unseen_word_maps_to_unk() {
        let table = load_embeddings_str(SAMPLE, 3).unwrap();
        assert_eq!(table.vocab.id("platypus"), UNK_ID);
        assert!(table.known_vector("platypus").is_none());
    }

    #[test]
    fn wrong_float_count_names_the_line() {
        let text = "cat 1.0 2.0 3.0\ndog 3.0 2.0\n";
        match load_embeddings_str(text, 3).unwrap_err() {
            RelexError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other}"),
        }
    }
}

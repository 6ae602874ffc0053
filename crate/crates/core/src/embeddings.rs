//! Pretrained word vectors in GloVe text format.

use std::borrow::Cow;
use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DEFAULT_DIM: usize = 300;
pub const DEFAULT_OOV_SEED: u64 = 42;

#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    dim: usize,
    vocab: HashMap<String, Vec<f64>>,
    oov_seed: u64,
    skipped_lines: usize,
}

impl EmbeddingStore {
    pub fn from_vectors(
        dim: usize,
        vectors: impl IntoIterator<Item = (String, Vec<f64>)>,
        oov_seed: u64,
    ) -> Result<Self> {
        let mut vocab = HashMap::new();
        for (term, v) in vectors {
            if v.len() != dim {
                return Err(Error::Shape(format!(
                    "vector for `{term}` has {} values, expected {dim}",
                    v.len()
                )));
            }
            vocab.entry(term.to_lowercase()).or_insert(v);
        }
        Ok(Self {
            dim,
            vocab,
            oov_seed,
            skipped_lines: 0,
        })
    }

    /// Load every well-formed line of a GloVe-style file.
    pub fn load(path: &Path, dim: usize, oov_seed: u64) -> Result<Self> {
        Self::load_filtered(path, dim, oov_seed, None)
    }

    /// Like [`EmbeddingStore::load`] but keeps only terms in `keep` (compared
    /// after lowercasing). Terms outside `keep` still count as usable lines.
    pub fn load_filtered(
        path: &Path,
        dim: usize,
        oov_seed: u64,
        keep: Option<&HashSet<String>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut vocab = HashMap::new();
        let mut usable = 0usize;
        let mut skipped = 0usize;
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            match parse_line(&line, dim) {
                Some((term, values)) => {
                    usable += 1;
                    let term = term.to_lowercase();
                    if keep.is_some_and(|k| !k.contains(&term)) {
                        continue;
                    }
                    vocab.entry(term).or_insert(values);
                }
                None => {
                    if line.trim().is_empty() {
                        continue;
                    }
                    warn!("{}:{}: skipping malformed embedding line", path.display(), n + 1);
                    skipped += 1;
                }
            }
        }
        if usable == 0 {
            return Err(Error::NoEmbeddings(path.to_path_buf()));
        }
        Ok(Self {
            dim,
            vocab,
            oov_seed,
            skipped_lines: skipped,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn oov_seed(&self) -> u64 {
        self.oov_seed
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Number of malformed lines skipped while loading.
    pub fn skipped_lines(&self) -> usize {
        self.skipped_lines
    }

    pub fn contains(&self, term: &str) -> bool {
        self.vocab.contains_key(lowercase(term).as_ref())
    }

    /// Vector for `term`. Unknown terms get a deterministic pseudo-random unit
    /// vector derived from the term and the OOV seed.
    pub fn vector(&self, term: &str) -> Cow<'_, [f64]> {
        let key = lowercase(term);
        match self.vocab.get(key.as_ref()) {
            Some(v) => Cow::Borrowed(v),
            None => Cow::Owned(oov_vector(&key, self.oov_seed, self.dim)),
        }
    }

    /// Write the in-memory vocabulary as a GloVe text file, terms sorted.
    pub fn save_glove(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut terms: Vec<_> = self.vocab.keys().collect();
        terms.sort();
        let io = |e| Error::io(path, e);
        for term in terms {
            write!(w, "{term}").map_err(io)?;
            for x in &self.vocab[term] {
                write!(w, " {x}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

fn lowercase(term: &str) -> Cow<'_, str> {
    if term.chars().any(char::is_uppercase) {
        Cow::Owned(term.to_lowercase())
    } else {
        Cow::Borrowed(term)
    }
}

fn parse_line(line: &str, dim: usize) -> Option<(&str, Vec<f64>)> {
    let mut fields = line.split_whitespace();
    let term = fields.next()?;
    let mut values = Vec::with_capacity(dim);
    for f in fields {
        values.push(f.parse::<f64>().ok().filter(|x| x.is_finite())?);
    }
    (values.len() == dim).then_some((term, values))
}

/// Unit-norm Gaussian direction seeded by SHA-256 of `(seed, term)`.
pub fn oov_vector(term: &str, seed: u64, dim: usize) -> Vec<f64> {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(term.as_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(digest);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity clamped to `[-1, 1]`; 0 when either vector is all zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    cosine_with_norms(a, norm(a), b, norm(b))
}

pub(crate) fn cosine_with_norms(a: &[f64], na: f64, b: &[f64], nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_single_300d_line() {
        let values: Vec<String> = (0..300).map(|i| format!("{}", i as f64 / 1000.0)).collect();
        let f = write_file(&format!("king {}\n", values.join(" ")));
        let store = EmbeddingStore::load(f.path(), 300, 42).unwrap();
        assert_eq!(store.vocab_size(), 1);
        assert_eq!(store.vector("king")[299], 0.299);
    }

    #[test]
    fn malformed_line_is_skipped() {
        let mut text = String::new();
        for i in 0..10 {
            text.push_str(&format!("w{i} 0.{i} -1.5 2e-3\n"));
            if i == 4 {
                text.push_str("broken 1.0 2.0\n");
            }
        }
        let f = write_file(&text);
        let store = EmbeddingStore::load(f.path(), 3, 42).unwrap();
        assert_eq!(store.vocab_size(), 10);
        assert_eq!(store.skipped_lines(), 1);
    }

    #[test]
    fn stored_values_round_trip_exactly() {
        let f = write_file("Apple 0.123456789 -9.87654321e-5 3\n");
        let store = EmbeddingStore::load(f.path(), 3, 42).unwrap();
        let v = store.vector("apple");
        assert_eq!(v.as_ref(), [0.123456789, -9.87654321e-5, 3.0]);
        assert!(matches!(v, Cow::Borrowed(_)));
        assert_eq!(store.vector("APPLE").as_ref(), v.as_ref());
    }

    #[test]
    fn no_usable_lines_is_fatal() {
        let f = write_file("only two\n");
        assert!(matches!(
            EmbeddingStore::load(f.path(), 3, 42),
            Err(Error::NoEmbeddings(_))
        ));
    }

    #[test]
    fn filtered_load_keeps_requested_terms() {
        let f = write_file("a 1 0\nb 0 1\nc 1 1\n");
        let keep: HashSet<String> = ["a".to_string(), "c".to_string()].into();
        let store = EmbeddingStore::load_filtered(f.path(), 2, 42, Some(&keep)).unwrap();
        assert_eq!(store.vocab_size(), 2);
        assert!(!store.contains("b"));
    }

    #[test]
    fn oov_vectors_are_deterministic_unit_and_distinct() {
        let store = EmbeddingStore::from_vectors(50, Vec::new(), 42).unwrap();
        let a1 = store.vector("zyzzyva");
        let a2 = store.vector("zyzzyva");
        let b = store.vector("qwerty");
        assert_eq!(a1, a2);
        assert!((norm(&a1) - 1.0).abs() < 1e-9);
        assert!((norm(&b) - 1.0).abs() < 1e-9);
        assert!(cosine(&a1, &b) < 1.0 - 1e-6);
        let other_seed = EmbeddingStore::from_vectors(50, Vec::new(), 7).unwrap();
        assert_ne!(other_seed.vector("zyzzyva"), a1);
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        let expected = 32.0 / (14f64.sqrt() * 77f64.sqrt());
        let c = cosine(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]);
        assert!((c - expected).abs() < 1e-15);
        assert!((c - 0.97463).abs() < 1e-5);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 2.0]), 0.0);
    }

    fn vec3() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 3)
            .prop_filter("nonzero", |v| norm(v) > 1e-6)
    }

    proptest! {
        #[test]
        fn cosine_symmetric_scale_invariant_bounded(a in vec3(), b in vec3(), s in 0.01f64..100.0) {
            let c = cosine(&a, &b);
            prop_assert!((-1.0..=1.0).contains(&c));
            prop_assert_eq!(c, cosine(&b, &a));
            let scaled: Vec<f64> = a.iter().map(|x| x * s).collect();
            prop_assert!((cosine(&scaled, &b) - c).abs() < 1e-12);
            prop_assert!((cosine(&a, &a) - 1.0).abs() < 1e-12);
        }
    }
}

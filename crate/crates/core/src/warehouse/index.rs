use std::collections::{BTreeMap, HashMap};

use super::document::Document;

/// Fixed-universe bitset over document positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocSet {
    words: Vec<u64>,
    len: usize,
}

impl DocSet {
    pub fn empty(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn full(len: usize) -> Self {
        let mut set = Self {
            words: vec![u64::MAX; len.div_ceil(64)],
            len,
        };
        set.clear_tail();
        set
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn universe(&self) -> usize {
        self.len
    }

    pub fn insert(&mut self, pos: usize) {
        debug_assert!(pos < self.len);
        self.words[pos / 64] |= 1 << (pos % 64);
    }

    pub fn contains(&self, pos: usize) -> bool {
        pos < self.len && self.words[pos / 64] & (1 << (pos % 64)) != 0
    }

    pub fn union_with(&mut self, other: &DocSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn intersect_with(&mut self, other: &DocSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn complement(&mut self) {
        for w in &mut self.words {
            *w = !*w;
        }
        self.clear_tail();
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(i * 64 + tz)
            })
        })
    }
}

/// Inverted index: attribute → lowercased value → documents carrying it.
#[derive(Debug, Clone, Default)]
pub struct ValueIndex {
    postings: HashMap<String, BTreeMap<String, DocSet>>,
    len: usize,
}

impl ValueIndex {
    pub fn build(docs: &[Document]) -> Self {
        let len = docs.len();
        let mut postings: HashMap<String, BTreeMap<String, DocSet>> = HashMap::new();
        for (pos, doc) in docs.iter().enumerate() {
            for attr in doc.attribute_names() {
                let values = postings.entry(attr.to_string()).or_default();
                for value in doc.values(attr) {
                    values
                        .entry(value.to_lowercase())
                        .or_insert_with(|| DocSet::empty(len))
                        .insert(pos);
                }
            }
        }
        Self { postings, len }
    }

    pub fn universe(&self) -> usize {
        self.len
    }

    /// Documents with a value of `attr` equal to `value` (case-insensitive).
    pub fn exact(&self, attr: &str, value: &str) -> DocSet {
        self.postings
            .get(attr)
            .and_then(|values| values.get(&value.to_lowercase()))
            .cloned()
            .unwrap_or_else(|| DocSet::empty(self.len))
    }

    /// Documents with a value of `attr` containing `needle` (case-insensitive).
    pub fn containing(&self, attr: &str, needle: &str) -> DocSet {
        let needle = needle.to_lowercase();
        let mut out = DocSet::empty(self.len);
        if let Some(values) = self.postings.get(attr) {
            for (value, docs) in values {
                if value.contains(&needle) {
                    out.union_with(docs);
                }
            }
        }
        out
    }
}

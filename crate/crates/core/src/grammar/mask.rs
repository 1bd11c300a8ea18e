use std::collections::HashMap;

use super::vocab::Vocabulary;
use super::GrammarState;

/// Allowed-token bitset for one state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    bits: Vec<u64>,
    len: usize,
    accepting: bool,
}

impl Mask {
    fn empty(len: usize, accepting: bool) -> Mask {
        Mask {
            bits: vec![0; len.div_ceil(64)],
            len,
            accepting,
        }
    }

    fn set(&mut self, id: u32) {
        self.bits[id as usize / 64] |= 1 << (id % 64);
    }

    pub fn allows(&self, id: u32) -> bool {
        (id as usize) < self.len && self.bits[id as usize / 64] & (1 << (id % 64)) != 0
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Allowed ids in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.len as u32).filter(|&id| self.allows(id))
    }

    /// Whether the state the mask was built from ends a document, which makes
    /// end-of-sequence a legal choice.
    pub fn is_accepting(&self) -> bool {
        self.accepting
    }

    /// Neither a token nor end-of-sequence is allowed.
    pub fn is_dead_end(&self) -> bool {
        !self.accepting && self.count() == 0
    }
}

/// Exact mask: token `t` is allowed iff the state accepts all bytes of `t`.
/// Tokens sharing a prefix share the work of stepping through it.
pub fn allowed_mask(state: &GrammarState, vocab: &Vocabulary) -> Mask {
    let mut mask = Mask::empty(vocab.len(), state.is_accepting());
    walk(state, vocab, 0, &mut mask);
    mask
}

fn walk(state: &GrammarState, vocab: &Vocabulary, node: u32, mask: &mut Mask) {
    for &(b, child) in &vocab.node(node).children {
        let mut next = state.clone();
        if next.step(b).is_err() {
            continue;
        }
        if let Some(id) = vocab.node(child).token {
            mask.set(id);
        }
        walk(&next, vocab, child, mask);
    }
}

/// Memoizes masks per state. Intended for one vocabulary and one thread.
#[derive(Debug)]
pub struct MaskCache {
    masks: HashMap<GrammarState, Mask>,
    capacity: usize,
    hits: u64,
    misses: u64,
}

impl MaskCache {
    /// Once `capacity` masks are stored the cache is cleared.
    pub fn new(capacity: usize) -> MaskCache {
        MaskCache {
            masks: HashMap::new(),
            capacity: capacity.max(1),
            hits: 0,
            misses: 0,
        }
    }

    pub fn get(&mut self, state: &GrammarState, vocab: &Vocabulary) -> &Mask {
        if self.masks.contains_key(state) {
            self.hits += 1;
        } else {
            self.misses += 1;
            if self.masks.len() >= self.capacity {
                self.masks.clear();
            }
            self.masks.insert(state.clone(), allowed_mask(state, vocab));
        }
        &self.masks[state]
    }

    /// (hits, misses)
    pub fn stats(&self) -> (u64, u64) {
        (self.hits, self.misses)
    }
}

impl Default for MaskCache {
    fn default() -> Self {
        MaskCache::new(1 << 16)
    }
}

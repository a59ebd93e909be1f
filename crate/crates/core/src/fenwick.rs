//! Cumulative weights with logarithmic update and inverse-CDF lookup.

use alloc::vec;
use alloc::vec::Vec;

/// Binary indexed tree over non-negative integer weights.
#[derive(Clone, Debug)]
pub struct Fenwick {
    tree: Vec<u64>,
    weights: Vec<u64>,
    top: usize,
}

impl Fenwick {
    pub fn new(weights: &[u64]) -> Self {
        let len = weights.len();
        let mut tree = vec![0u64; len + 1];
        for (i, &w) in weights.iter().enumerate() {
            tree[i + 1] += w;
            let parent = (i + 1) + ((i + 1) & (i + 1).wrapping_neg());
            if parent <= len {
                tree[parent] += tree[i + 1];
            }
        }
        let top = if len == 0 {
            0
        } else {
            1 << (usize::BITS - 1 - len.leading_zeros())
        };
        Fenwick {
            tree,
            weights: weights.to_vec(),
            top,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, i: usize) -> u64 {
        self.weights[i]
    }

    pub fn total(&self) -> u64 {
        self.prefix(self.len())
    }

    /// Sum of the first `end` weights.
    pub fn prefix(&self, end: usize) -> u64 {
        let mut i = end;
        let mut sum = 0;
        while i > 0 {
            sum += self.tree[i];
            i &= i - 1;
        }
        sum
    }

    pub fn set(&mut self, i: usize, w: u64) {
        let old = self.weights[i];
        if w == old {
            return;
        }
        self.weights[i] = w;
        let mut j = i + 1;
        if w > old {
            let d = w - old;
            while j < self.tree.len() {
                self.tree[j] += d;
                j += j & j.wrapping_neg();
            }
        } else {
            let d = old - w;
            while j < self.tree.len() {
                self.tree[j] -= d;
                j += j & j.wrapping_neg();
            }
        }
    }

    /// Index `i` with `prefix(i) ≤ target < prefix(i + 1)`.
    ///
    /// Panics unless `target < total()`.
    pub fn find(&self, target: u64) -> usize {
        assert!(target < self.total(), "target outside the weight range");
        let mut pos = 0;
        let mut rem = target;
        let mut step = self.top;
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= rem {
                pos = next;
                rem -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

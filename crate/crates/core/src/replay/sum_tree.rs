/// Binary prefix-sum tree over non-negative leaf masses.
///
/// Internal nodes are recomputed from their children on every write, so the
/// root always equals the (floating-point) sum of the leaves without drift.
#[derive(Clone, Debug)]
pub struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn with_capacity(capacity: usize) -> Self {
        let leaves = capacity.max(1).next_power_of_two();
        SumTree {
            leaves,
            nodes: vec![0.0; 2 * leaves],
        }
    }

    pub fn capacity(&self) -> usize {
        self.leaves
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, index: usize) -> f64 {
        self.nodes[self.leaves + index]
    }

    pub fn set(&mut self, index: usize, mass: f64) {
        debug_assert!(mass >= 0.0 && mass.is_finite());
        if index >= self.leaves {
            self.grow(index + 1);
        }
        let mut node = self.leaves + index;
        self.nodes[node] = mass;
        while node > 1 {
            node /= 2;
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    fn grow(&mut self, min_leaves: usize) {
        let old: Vec<f64> = self.nodes[self.leaves..].to_vec();
        *self = SumTree::with_capacity(min_leaves.max(2 * self.leaves));
        self.nodes[self.leaves..self.leaves + old.len()].copy_from_slice(&old);
        for node in (1..self.leaves).rev() {
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    /// Leaf whose cumulative range `[prefix_before, prefix_before + mass)`
    /// contains `query`. Never returns a zero-mass leaf while the total is
    /// positive.
    pub fn find(&self, query: f64) -> usize {
        let mut q = query.max(0.0);
        let mut node = 1;
        while node < self.leaves {
            let left = 2 * node;
            if q < self.nodes[left] || self.nodes[left + 1] <= 0.0 {
                node = left;
            } else {
                q -= self.nodes[left];
                node = left + 1;
            }
        }
        node - self.leaves
    }
}

/// Disjoint-set forest with path halving and union by size.
pub(crate) struct DisjointSet {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut u: usize) -> usize {
        while self.parent[u] as usize != u {
            let grand = self.parent[self.parent[u] as usize];
            self.parent[u] = grand;
            u = grand as usize;
        }
        u
    }

    pub fn union(&mut self, u: usize, v: usize) -> bool {
        let (mut a, mut b) = (self.find(u), self.find(v));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a as u32;
        self.size[a] += self.size[b];
        true
    }

    /// Number of distinct sets.
    pub fn count(&mut self) -> usize {
        (0..self.parent.len()).filter(|&u| self.find(u) == u).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_and_counts() {
        let mut d = DisjointSet::new(5);
        assert_eq!(d.count(), 5);
        assert!(d.union(0, 1));
        assert!(d.union(3, 4));
        assert!(!d.union(1, 0));
        assert_eq!(d.count(), 3);
        assert_eq!(d.find(0), d.find(1));
        assert_ne!(d.find(0), d.find(3));
    }
}

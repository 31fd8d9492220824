/// A square boolean matrix packed into words, used for relations on items.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) struct BitMatrix {
    n: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    pub fn new(n: usize) -> Self {
        BitMatrix {
            n,
            words: vec![0; (n * n).div_ceil(64)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        let b = i * self.n + j;
        self.words[b / 64] >> (b % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, on: bool) {
        let b = i * self.n + j;
        if on {
            self.words[b / 64] |= 1 << (b % 64);
        } else {
            self.words[b / 64] &= !(1 << (b % 64));
        }
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn and_count(&self, other: &BitMatrix) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn is_subset(&self, other: &BitMatrix) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn union_with(&mut self, other: &BitMatrix) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| (0..self.n).filter(move |&j| self.get(i, j)).map(move |j| (i, j)))
    }

    pub fn is_transitive(&self) -> bool {
        for i in 0..self.n {
            for j in 0..self.n {
                if !self.get(i, j) {
                    continue;
                }
                for k in 0..self.n {
                    if self.get(j, k) && !self.get(i, k) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Warshall closure in place.
    pub fn close_transitively(&mut self) {
        for k in 0..self.n {
            for i in 0..self.n {
                if !self.get(i, k) {
                    continue;
                }
                for j in 0..self.n {
                    if self.get(k, j) {
                        self.set(i, j, true);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::BitMatrix;

    #[test]
    fn set_get_count() {
        let mut m = BitMatrix::new(9);
        m.set(8, 8, true);
        m.set(0, 3, true);
        assert!(m.get(8, 8) && m.get(0, 3) && !m.get(3, 0));
        assert_eq!(m.count(), 2);
        m.set(8, 8, false);
        assert_eq!(m.ones().collect::<Vec<_>>(), vec![(0, 3)]);
    }

    #[test]
    fn closure_of_a_chain() {
        let mut m = BitMatrix::new(3);
        m.set(0, 1, true);
        m.set(1, 2, true);
        assert!(!m.is_transitive());
        m.close_transitively();
        assert!(m.get(0, 2) && m.is_transitive());
    }
}

/// Tuples `μ = (μ₁,…,μ_k)` with `1 ≤ μᵣ ≤ m + 2(r − 1)`, indexing the terms
/// of `𝔠ᵏ[F]⁽ᵐ⁾`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TupleSet {
    pub m: usize,
    pub k: usize,
}

impl TupleSet {
    /// `∏_{r=1}^k (m + 2r − 2)`.
    pub fn count(&self) -> u128 {
        (1..=self.k).map(|r| (self.m + 2 * r - 2) as u128).product()
    }

    /// Lexicographic iterator.
    pub fn iter(&self) -> TupleIter {
        TupleIter { m: self.m, current: Some(vec![1; self.k]) }
    }
}

impl IntoIterator for TupleSet {
    type Item = Vec<usize>;
    type IntoIter = TupleIter;

    fn into_iter(self) -> TupleIter {
        self.iter()
    }
}

pub struct TupleIter {
    m: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for TupleIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.take()?;
        if self.m == 0 && !out.is_empty() {
            return None;
        }
        let mut next = out.clone();
        let mut r = next.len();
        while r > 0 {
            r -= 1;
            let cap = self.m + 2 * r;
            if next[r] < cap {
                next[r] += 1;
                self.current = Some(next);
                return Some(out);
            }
            next[r] = 1;
        }
        Some(out)
    }
}

pub fn enumerate_tuples(m: usize, k: usize) -> TupleSet {
    TupleSet { m, k }
}

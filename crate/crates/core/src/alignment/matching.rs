use std::cmp::Ordering;

use crate::scalar::Scalar;

/// Dense similarity scores between a set of source rows and a set of target
/// rows, addressed by their original row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<T> {
    src: Vec<usize>,
    tgt: Vec<usize>,
    scores: Vec<T>,
}

impl<T: Scalar> SimilarityMatrix<T> {
    /// `src`/`tgt` are row indices in ascending order.
    pub fn from_fn<E>(src: Vec<usize>, tgt: Vec<usize>, mut f: impl FnMut(usize, usize) -> Result<T, E>) -> Result<Self, E> {
        let mut scores = Vec::with_capacity(src.len() * tgt.len());
        for &s in &src {
            for &t in &tgt {
                scores.push(f(s, t)?);
            }
        }
        Ok(SimilarityMatrix { src, tgt, scores })
    }

    /// Builds a matrix over rows `0..n` and `0..m` from nested vectors.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let m = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == m), "ragged similarity matrix");
        SimilarityMatrix { src: (0..rows.len()).collect(), tgt: (0..m).collect(), scores: rows.into_iter().flatten().collect() }
    }

    pub fn src_rows(&self) -> &[usize] {
        &self.src
    }

    pub fn tgt_rows(&self) -> &[usize] {
        &self.tgt
    }

    /// Score at matrix position (`i`, `j`), not row index.
    pub fn at(&self, i: usize, j: usize) -> T {
        self.scores[i * self.tgt.len() + j]
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    fn entries(&self) -> impl Iterator<Item = Match<T>> + '_ {
        self.src.iter().enumerate().flat_map(move |(i, &s)| {
            self.tgt.iter().enumerate().map(move |(j, &t)| Match { src: s, tgt: t, score: self.at(i, j) })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match<T> {
    pub src: usize,
    pub tgt: usize,
    pub score: T,
}

/// Highest score first; ties by lower source index, then lower target index.
fn by_priority<T: Scalar>(a: &Match<T>, b: &Match<T>) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then(a.src.cmp(&b.src))
        .then(a.tgt.cmp(&b.tgt))
}

fn accept_in_order<T: Scalar>(mut candidates: Vec<Match<T>>, src_rows: &[usize], tgt_rows: &[usize]) -> Vec<Match<T>> {
    candidates.sort_by(by_priority);
    let src_max = src_rows.iter().max().map_or(0, |m| m + 1);
    let tgt_max = tgt_rows.iter().max().map_or(0, |m| m + 1);
    let mut src_used = vec![false; src_max];
    let mut tgt_used = vec![false; tgt_max];
    let mut out = Vec::new();
    for c in candidates {
        if !src_used[c.src] && !tgt_used[c.tgt] {
            src_used[c.src] = true;
            tgt_used[c.tgt] = true;
            out.push(c);
        }
    }
    out
}

/// Repeatedly takes the highest-scoring pair above `theta` among rows not yet
/// matched. Non-finite scores never match.
pub fn greedy_mutual_match<T: Scalar>(sim: &SimilarityMatrix<T>, theta: T) -> Vec<Match<T>> {
    let candidates = sim.entries().filter(|m| m.score.is_finite() && m.score > theta).collect();
    accept_in_order(candidates, &sim.src, &sim.tgt)
}

/// Each source row proposes its best target and each target its best source
/// (ties to the lower index); proposals above `theta` are accepted best-first
/// while both rows are free.
pub fn one_way_best_match<T: Scalar>(sim: &SimilarityMatrix<T>, theta: T) -> Vec<Match<T>> {
    let (n, m) = (sim.src.len(), sim.tgt.len());
    let mut candidates: Vec<Match<T>> = Vec::new();
    let better = |cand: T, best: Option<T>| cand.is_finite() && best.is_none_or(|b| cand > b);
    for i in 0..n {
        let mut best: Option<(usize, T)> = None;
        for j in 0..m {
            if better(sim.at(i, j), best.map(|b| b.1)) {
                best = Some((j, sim.at(i, j)));
            }
        }
        if let Some((j, s)) = best {
            candidates.push(Match { src: sim.src[i], tgt: sim.tgt[j], score: s });
        }
    }
    for j in 0..m {
        let mut best: Option<(usize, T)> = None;
        for i in 0..n {
            if better(sim.at(i, j), best.map(|b| b.1)) {
                best = Some((i, sim.at(i, j)));
            }
        }
        if let Some((i, s)) = best {
            let c = Match { src: sim.src[i], tgt: sim.tgt[j], score: s };
            if !candidates.iter().any(|x| x.src == c.src && x.tgt == c.tgt) {
                candidates.push(c);
            }
        }
    }
    candidates.retain(|c| c.score > theta);
    accept_in_order(candidates, &sim.src, &sim.tgt)
}

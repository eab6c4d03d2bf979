//! Seeded synthetic data for tests, benchmarks and smoke runs.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::io::{assemble_y, FeatureMatrix, LabelEmbeddingTable, LabelList, SplitSpec};

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_iterator(rows, cols, (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// A labelled instance with its embedding table.
#[derive(Debug, Clone)]
pub struct LabelledInstance {
    pub features: FeatureMatrix,
    pub labels: LabelList,
    pub table: LabelEmbeddingTable,
}

impl LabelledInstance {
    /// The e×n label embedding matrix.
    pub fn y(&self) -> Result<DMatrix<f64>> {
        assemble_y(&self.labels, &self.table)
    }
}

/// Gaussian class clusters in `d` dimensions with random unit class embeddings in `e` dimensions.
/// Item `j` belongs to class `j % classes`.
pub fn clustered_instance(n: usize, d: usize, e: usize, classes: usize, seed: u64) -> Result<LabelledInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = gaussian(&mut rng, d, classes) * 2.0;
    let embeddings = gaussian(&mut rng, e, classes);
    let noise = gaussian(&mut rng, d, n) * 0.5;
    let mut x = noise;
    for j in 0..n {
        let mut col = x.column_mut(j);
        col += centers.column(j % classes);
    }
    let names: Vec<String> = (0..classes).map(|c| format!("c{c}")).collect();
    let table = LabelEmbeddingTable::new(
        names
            .iter()
            .enumerate()
            .map(|(c, name)| (name.clone(), embeddings.column(c).iter().copied().collect())),
    )?;
    Ok(LabelledInstance {
        features: FeatureMatrix::with_index_ids(x)?,
        labels: LabelList::Single((0..n).map(|j| names[j % classes].clone()).collect()),
        table,
    })
}

/// Where the unseen class sits relative to the seen ones in embedding space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnseenPlacement {
    /// Midway between two seen classes.
    Related,
    /// Orthogonal to every seen class.
    Orthogonal,
}

/// Five seen classes and one unseen class `u`.
#[derive(Debug, Clone)]
pub struct ZeroShotFixture {
    pub data: LabelledInstance,
    pub split: SplitSpec,
}

/// Class embeddings in six dimensions, seen classes first.
pub fn fixture_embeddings(placement: UnseenPlacement) -> Vec<(String, DVector<f64>)> {
    let unit = |k: usize| DVector::from_fn(6, |i, _| if i == k { 1.0 } else { 0.0 });
    let c1 = unit(0) * 0.3 + unit(1) * 0.91f64.sqrt();
    let seen = [unit(0), c1, unit(2), unit(3), unit(4)];
    let unseen = match placement {
        UnseenPlacement::Related => (&seen[0] + &seen[1]).normalize(),
        UnseenPlacement::Orthogonal => unit(5),
    };
    seen.into_iter()
        .enumerate()
        .map(|(c, v)| (format!("c{c}"), v))
        .chain(std::iter::once(("u".to_string(), unseen)))
        .collect()
}

/// Features follow the class embedding through a random isometry into `d ≥ 6`
/// dimensions, scaled by `scale`, plus isotropic noise of width `noise`.
pub fn zeroshot_fixture(
    placement: UnseenPlacement,
    per_class: usize,
    d: usize,
    scale: f64,
    noise: f64,
    seed: u64,
) -> Result<ZeroShotFixture> {
    assert!(d >= 6, "fixture needs d >= 6");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let isometry = gaussian(&mut rng, d, 6).qr().q();
    let classes = fixture_embeddings(placement);
    let n = per_class * classes.len();
    let mut x = gaussian(&mut rng, d, n) * noise;
    let mut labels = Vec::with_capacity(n);
    for j in 0..n {
        let (name, emb) = &classes[j % classes.len()];
        let mut col = x.column_mut(j);
        col += &isometry * emb * scale;
        labels.push(name.clone());
    }
    let table = LabelEmbeddingTable::new(classes.iter().map(|(k, v)| (k.clone(), v.as_slice().to_vec())))?;
    let split = SplitSpec::new((0..5).map(|c| format!("c{c}")), ["u".to_string()])?;
    Ok(ZeroShotFixture {
        data: LabelledInstance {
            features: FeatureMatrix::with_index_ids(x)?,
            labels: LabelList::Single(labels),
            table,
        },
        split,
    })
}

/// Expected AP@K of a uniformly random ranking of `n` items, `relevant` of them relevant,
/// normalized by `min(relevant, K)`.
pub fn random_ranking_ap(n: usize, relevant: usize, k: usize) -> f64 {
    if relevant == 0 || n == 0 {
        return 0.0;
    }
    let (nf, rf) = (n as f64, relevant as f64);
    let pair = if n > 1 { rf * (rf - 1.0) / (nf * (nf - 1.0)) } else { 0.0 };
    let sum: f64 = (1..=k.min(n))
        .map(|i| (rf / nf + (i as f64 - 1.0) * pair) / i as f64)
        .sum();
    sum / relevant.min(k) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn related_unseen_is_close_to_two_seen() {
        let e = fixture_embeddings(UnseenPlacement::Related);
        let u = &e[5].1;
        assert!(u.dot(&e[0].1) >= 0.8);
        assert!(u.dot(&e[1].1) >= 0.8);
        let o = fixture_embeddings(UnseenPlacement::Orthogonal);
        assert!(o[..5].iter().all(|(_, v)| v.dot(&o[5].1).abs() < 1e-15));
    }

    #[test]
    fn random_ap_single_relevant() {
        // one relevant item among n: E[AP@n] = H_n / n
        let n = 7;
        let h: f64 = (1..=n).map(|i| 1.0 / i as f64).sum();
        assert!((random_ranking_ap(n, 1, n) - h / n as f64).abs() < 1e-15);
        assert_eq!(random_ranking_ap(5, 5, 5), 1.0);
    }
}

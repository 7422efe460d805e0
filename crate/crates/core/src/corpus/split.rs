use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{derive_seed, seeds};

/// Stratified split recipe: seeded, with train/validation/test fractions
/// that must sum to 1.
#[derive(Debug, Clone)]
pub struct SplitPlan {
    pub seed: u64,
    pub fractions: [f64; 3],
    /// Stratify on (label, domain) when true, on label alone otherwise.
    pub stratify_by_domain: bool,
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan {
            seed: 0,
            fractions: [0.7, 0.1, 0.2],
            stratify_by_domain: true,
        }
    }
}

impl SplitPlan {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.fractions.iter().any(|&f| f <= 0.0) {
            return Err(Error::Config("split fractions must be positive".into()));
        }
        if (self.fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must sum to 1, got {:?}",
                self.fractions
            )));
        }
        Ok(())
    }
}

/// Example indices of each split; pairwise disjoint and covering the input.
#[derive(Debug, Clone, Default)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    pub fn total(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }
}

/// Apportions `n` into three counts proportional to `fractions`, each within
/// one of its exact share (largest-remainder rounding).
fn apportion(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let raw: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut remainder = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = raw[a] - raw[a].floor();
        let rb = raw[b] - raw[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in &order {
        if remainder == 0 {
            break;
        }
        counts[i] += 1;
        remainder -= 1;
    }
    [counts[0], counts[1], counts[2]]
}

/// Seeded stratified split. Within every stratum the proportions match the
/// plan within ±1 example. Strata with fewer than 3 examples are rejected.
pub fn stratified_split(dataset: &Dataset, plan: &SplitPlan) -> Result<SplitIndices> {
    plan.validate()?;
    if dataset.is_empty() {
        return Err(Error::Config("cannot split an empty dataset".into()));
    }
    let mut strata: std::collections::BTreeMap<String, Vec<usize>> = Default::default();
    for (i, e) in dataset.examples.iter().enumerate() {
        let key = if plan.stratify_by_domain {
            format!("{}|{}", e.label.as_str(), e.domain.as_str())
        } else {
            e.label.as_str().to_string()
        };
        strata.entry(key).or_default().push(i);
    }
    let mut out = SplitIndices::default();
    for (key, mut members) in strata {
        if members.len() < 3 {
            return Err(Error::Config(format!(
                "stratum {key:?} has only {} examples, need at least 3",
                members.len()
            )));
        }
        let stratum_tag = fnv_tag(&key);
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(plan.seed, &[seeds::SPLIT, stratum_tag]));
        members.shuffle(&mut rng);
        let [n_train, n_val, _] = apportion(members.len(), &plan.fractions);
        out.train.extend(&members[..n_train]);
        out.validation.extend(&members[n_train..n_train + n_val]);
        out.test.extend(&members[n_train + n_val..]);
    }
    out.train.sort_unstable();
    out.validation.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

fn fnv_tag(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Stratified k-fold partition: each fold is (train indices, test indices),
/// test sets disjoint and covering the dataset. Exposed so protocols that
/// read "test on the respective test set" as cross-validation can be run.
pub fn stratified_kfold(dataset: &Dataset, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 {
        return Err(Error::Config("k-fold needs k >= 2".into()));
    }
    let mut strata: std::collections::BTreeMap<String, Vec<usize>> = Default::default();
    for (i, e) in dataset.examples.iter().enumerate() {
        let key = format!("{}|{}", e.label.as_str(), e.domain.as_str());
        strata.entry(key).or_default().push(i);
    }
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (key, mut members) in strata {
        if members.len() < k {
            return Err(Error::Config(format!(
                "stratum {key:?} has {} examples, need at least {k}",
                members.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[seeds::SPLIT, fnv_tag(&key)]));
        members.shuffle(&mut rng);
        for (pos, idx) in members.into_iter().enumerate() {
            folds[pos % k].push(idx);
        }
    }
    Ok((0..k)
        .map(|f| {
            let test: Vec<usize> = {
                let mut t = folds[f].clone();
                t.sort_unstable();
                t
            };
            let mut train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != f)
                .flat_map(|(_, v)| v.iter().copied())
                .collect();
            train.sort_unstable();
            (train, test)
        })
        .collect())
}

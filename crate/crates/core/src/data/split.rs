//! Per-person train/test partition.
//!
//! Train takes 25 random genuine and 25 random simple forgeries of every
//! person. Test takes everything else: the remaining genuine and simple
//! samples plus all skilled and opposite-hand forgeries.

use sha2::{Digest, Sha256};

use crate::data::catalog::{DatasetCatalog, SampleRef};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const TRAIN_GENUINE: usize = 25;
pub const TRAIN_SIMPLE: usize = 25;
/// Genuine samples per person a full corpus leaves for testing.
const EXPECTED_TEST_GENUINE: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<SampleRef>,
    pub test: Vec<SampleRef>,
    pub seed: u64,
}

impl DatasetSplit {
    /// Fingerprint of the (train, test) pair.
    pub fn fingerprint(&self) -> String {
        split_fingerprint(&self.train, &self.test)
    }
}

pub fn split_fingerprint(train: &[SampleRef], test: &[SampleRef]) -> String {
    let joined = format!("{}/{}", DatasetCatalog::fingerprint(train), DatasetCatalog::fingerprint(test));
    hex::encode(&Sha256::digest(joined.as_bytes())[..8])
}

/// Persons are visited in id order and each draws from its own stream of
/// `rng`, so the split depends only on the catalog contents and the seed.
pub fn split_dataset(catalog: &DatasetCatalog, rng: &Rng) -> Result<DatasetSplit> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (index, (person, samples)) in catalog.by_person().into_iter().enumerate() {
        if samples.genuine.len() <= TRAIN_GENUINE {
            return Err(Error::Shortfall {
                person,
                kind: "genuine",
                needed: TRAIN_GENUINE + 1,
                found: samples.genuine.len(),
            });
        }
        if samples.simple.len() < TRAIN_SIMPLE {
            return Err(Error::Shortfall {
                person,
                kind: "simple",
                needed: TRAIN_SIMPLE,
                found: samples.simple.len(),
            });
        }
        let mut stream = rng.fork(index as u64);
        let mut take = |mut pool: Vec<SampleRef>, n: usize| {
            stream.shuffle(&mut pool);
            let mut rest = pool.split_off(n);
            pool.sort();
            rest.sort();
            (pool, rest)
        };
        let (g_train, g_test) = take(samples.genuine, TRAIN_GENUINE);
        let (s_train, s_test) = take(samples.simple, TRAIN_SIMPLE);
        if g_test.len() != EXPECTED_TEST_GENUINE {
            log::warn!(
                "person {person}: {} genuine samples left for testing (a full corpus leaves {EXPECTED_TEST_GENUINE})",
                g_test.len()
            );
        }
        train.extend(g_train);
        train.extend(s_train);
        test.extend(g_test);
        test.extend(s_test);
        test.extend(samples.skilled);
        test.extend(samples.opposite);
    }
    Ok(DatasetSplit {
        train,
        test,
        seed: rng.seed(),
    })
}

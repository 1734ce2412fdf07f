use crate::error::{Error, Result};

/// Decision tallies. "Accepted" means classified genuine.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub genuine_accepted: u64,
    pub genuine_rejected: u64,
    pub forged_accepted: u64,
    pub forged_rejected: u64,
}

impl ConfusionCounts {
    pub fn new(genuine_accepted: u64, genuine_rejected: u64, forged_accepted: u64, forged_rejected: u64) -> Self {
        Self {
            genuine_accepted,
            genuine_rejected,
            forged_accepted,
            forged_rejected,
        }
    }

    pub fn record(&mut self, genuine: bool, accepted: bool) {
        match (genuine, accepted) {
            (true, true) => self.genuine_accepted += 1,
            (true, false) => self.genuine_rejected += 1,
            (false, true) => self.forged_accepted += 1,
            (false, false) => self.forged_rejected += 1,
        }
    }

    pub fn genuine(&self) -> u64 {
        self.genuine_accepted + self.genuine_rejected
    }

    pub fn forged(&self) -> u64 {
        self.forged_accepted + self.forged_rejected
    }

    pub fn total(&self) -> u64 {
        self.genuine() + self.forged()
    }

    pub fn merge(&mut self, other: &Self) {
        self.genuine_accepted += other.genuine_accepted;
        self.genuine_rejected += other.genuine_rejected;
        self.forged_accepted += other.forged_accepted;
        self.forged_rejected += other.forged_rejected;
    }
}

fn percent(num: u64, den: u64) -> f64 {
    100.0 * num as f64 / den as f64
}

/// Percent of forged samples accepted.
pub fn far(c: &ConfusionCounts) -> Result<f64> {
    match c.forged() {
        0 => Err(Error::UndefinedMetric("FAR needs at least one forged sample")),
        n => Ok(percent(c.forged_accepted, n)),
    }
}

/// Percent of genuine samples rejected.
pub fn frr(c: &ConfusionCounts) -> Result<f64> {
    match c.genuine() {
        0 => Err(Error::UndefinedMetric("FRR needs at least one genuine sample")),
        n => Ok(percent(c.genuine_rejected, n)),
    }
}

/// Percent of all samples labelled correctly.
pub fn accuracy(c: &ConfusionCounts) -> Result<f64> {
    match c.total() {
        0 => Err(Error::UndefinedMetric("accuracy needs at least one sample")),
        n => Ok(percent(c.genuine_accepted + c.forged_rejected, n)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn far_examples() {
        assert_eq!(far(&ConfusionCounts::new(0, 0, 3, 7)).unwrap(), 30.0);
        assert_eq!(far(&ConfusionCounts::new(4, 1, 0, 9)).unwrap(), 0.0);
        assert!((far(&ConfusionCounts::new(0, 0, 2747, 7253)).unwrap() - 27.47).abs() < 1e-9);
        assert!(matches!(far(&ConfusionCounts::new(1, 1, 0, 0)), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn frr_examples() {
        assert_eq!(frr(&ConfusionCounts::new(3, 1, 0, 0)).unwrap(), 25.0);
        assert_eq!(frr(&ConfusionCounts::new(3, 0, 5, 5)).unwrap(), 0.0);
        assert!((frr(&ConfusionCounts::new(8428, 1572, 0, 0)).unwrap() - 15.72).abs() < 1e-9);
        assert!(matches!(frr(&ConfusionCounts::new(0, 0, 1, 1)), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&ConfusionCounts::new(4, 0, 0, 6)).unwrap(), 100.0);
        assert_eq!(accuracy(&ConfusionCounts::new(1, 1, 1, 1)).unwrap(), 50.0);
        assert!(accuracy(&ConfusionCounts::default()).is_err());
    }

    #[test]
    fn accuracy_is_class_weighted_far_frr() {
        let mut rng = Rng::new(5);
        for _ in 0..100 {
            let mut draw = || rng.below(500) as u64;
            let c = ConfusionCounts::new(1 + draw(), draw(), draw(), 1 + draw());
            let (g, f) = (c.genuine() as f64, c.forged() as f64);
            let (acc, far, frr) = (accuracy(&c).unwrap(), far(&c).unwrap(), frr(&c).unwrap());
            let combined = (g * (100.0 - frr) + f * (100.0 - far)) / (g + f);
            assert!((acc - combined).abs() <= 1e-9, "{c:?}");
            for v in [acc, far, frr] {
                assert!((0.0..=100.0).contains(&v));
            }
        }
    }
}

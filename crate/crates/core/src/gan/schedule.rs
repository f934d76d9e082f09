use crate::error::{Error, Result};

/// Adversarial loss form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GanMode {
    /// Sigmoid cross-entropy on logits.
    #[default]
    Vanilla,
    /// Least-squares loss on raw outputs.
    Lsgan,
}

impl std::str::FromStr for GanMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(GanMode::Vanilla),
            "lsgan" => Ok(GanMode::Lsgan),
            _ => Err(Error::Config(format!("unknown gan mode '{s}' (vanilla|lsgan)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lambda_l1: f64,
    pub lr0: f64,
    pub niter: usize,
    pub niter_decay: usize,
    pub pool_size: usize,
    pub load_size: usize,
    pub fine_size: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub gan_mode: GanMode,
    /// Write a checkpoint every this many epochs (0: only at the end).
    pub save_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda_l1: 70.0,
            lr0: 0.0002,
            niter: 200,
            niter_decay: 200,
            pool_size: 64,
            load_size: 256,
            fine_size: 256,
            batch_size: 1,
            seed: 0,
            gan_mode: GanMode::Vanilla,
            save_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn epochs(&self) -> usize {
        self.niter + self.niter_decay
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_l1 > 0.0) {
            return Err(Error::Config(format!("lambda_l1 {} must be positive", self.lambda_l1)));
        }
        if !(self.lr0 >= 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be finite and non-negative", self.lr0)));
        }
        if self.fine_size == 0 || self.fine_size > self.load_size {
            return Err(Error::Config(format!("fine_size {} must be in 1..=load_size ({})", self.fine_size, self.load_size)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Learning rate for a 1-based epoch: constant for `niter` epochs, then linear decay to zero.
pub fn lr_at_epoch(epoch: usize, cfg: &TrainConfig) -> Result<f64> {
    if epoch == 0 || epoch > cfg.epochs() {
        return Err(Error::Config(format!("epoch {epoch} outside 1..={}", cfg.epochs())));
    }
    if epoch <= cfg.niter {
        return Ok(cfg.lr0);
    }
    Ok(cfg.lr0 * (1.0 - (epoch - cfg.niter) as f64 / cfg.niter_decay as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_values() {
        let cfg = TrainConfig::default();
        for e in 1..=200 {
            assert_eq!(lr_at_epoch(e, &cfg).unwrap(), 0.0002);
        }
        assert_eq!(lr_at_epoch(300, &cfg).unwrap(), 0.0001);
        assert_eq!(lr_at_epoch(400, &cfg).unwrap(), 0.0);
        assert!(lr_at_epoch(0, &cfg).is_err() && lr_at_epoch(401, &cfg).is_err());
        let lrs: Vec<f64> = (1..=400).map(|e| lr_at_epoch(e, &cfg).unwrap()).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
        assert!((lrs[200] - lrs[199]).abs() <= cfg.lr0 / 200.0 + 1e-18);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { lambda_l1: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { fine_size: 300, ..Default::default() }.validate().is_err());
        assert_eq!("lsgan".parse::<GanMode>().unwrap(), GanMode::Lsgan);
    }
}

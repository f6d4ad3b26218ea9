//! JSON checkpoint container.
//!
//! Floats are written with shortest round-trip formatting so a reload is
//! bit-exact at either precision.

use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::agent::{init_params, AgentParams, NetworkSpec};
use super::{Scalar, Tensor};
use crate::error::{usage_err, Result};

pub const CHECKPOINT_FORMAT: &str = "timing-lab-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct NamedTensor<F> {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<F>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Checkpoint<F> {
    pub format: String,
    pub version: u32,
    /// `f32` or `f64`.
    pub precision: String,
    pub spec: NetworkSpec,
    pub param_version: u64,
    pub tensors: Vec<NamedTensor<F>>,
    pub adam: AdamState<F>,
    pub rng: Option<ChaCha8Rng>,
    /// Frames consumed when the checkpoint was taken.
    pub frames: u64,
}

impl<F: Scalar> Checkpoint<F> {
    pub fn capture(params: &AgentParams<F>, adam: &AdamState<F>, rng: Option<&ChaCha8Rng>, frames: u64) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            precision: F::PRECISION.into(),
            spec: params.spec.clone(),
            param_version: params.version,
            tensors: params
                .named_tensors()
                .into_iter()
                .map(|(name, _, t)| NamedTensor {
                    name,
                    shape: t.shape().to_vec(),
                    values: t.data().to_vec(),
                })
                .collect(),
            adam: adam.clone(),
            rng: rng.cloned(),
            frames,
        }
    }

    /// Rebuilds parameters, checking names and shapes against the spec.
    pub fn params(&self) -> Result<AgentParams<F>> {
        self.spec.validate()?;
        let mut params: AgentParams<F> = init_params(&self.spec, 0);
        let expected: Vec<(String, Vec<usize>)> = params
            .named_tensors()
            .into_iter()
            .map(|(n, _, t)| (n, t.shape().to_vec()))
            .collect();
        if expected.len() != self.tensors.len() {
            return Err(usage_err(format!(
                "checkpoint has {} tensors, architecture needs {}",
                self.tensors.len(),
                expected.len()
            )));
        }
        for ((dst, (name, shape)), src) in params.tensors_mut().into_iter().zip(&expected).zip(&self.tensors) {
            if &src.name != name || &src.shape != shape {
                return Err(usage_err(format!(
                    "checkpoint tensor {} {:?} does not match {name} {shape:?}",
                    src.name, src.shape
                )));
            }
            *dst = Tensor::from_vec(&src.shape, src.values.clone())?;
        }
        params.version = self.param_version;
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let head: serde_json::Value = serde_json::from_slice(&bytes)?;
        if head.get("format").and_then(|v| v.as_str()) != Some(CHECKPOINT_FORMAT) {
            return Err(usage_err(format!("{} is not a checkpoint", path.display())));
        }
        match head.get("precision").and_then(|v| v.as_str()) {
            Some(p) if p == F::PRECISION => {}
            other => {
                return Err(usage_err(format!(
                    "checkpoint precision {other:?} differs from requested {}",
                    F::PRECISION
                )))
            }
        }
        let ck: Self = serde_json::from_value(head)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(usage_err(format!("unsupported checkpoint version {}", ck.version)));
        }
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ObsMode;
    use crate::nn::{AdamConfig, ControllerKind, ControllerSpec};
    use rand::{RngCore, SeedableRng};

    fn roundtrip<F: Scalar>(kind: ControllerKind) {
        let spec = NetworkSpec::new(ControllerSpec::new(kind, 6), ObsMode::Symbolic);
        let mut params: AgentParams<F> = init_params(&spec, 11);
        let mut adam = AdamState::new(&params);
        let mut g = params.zeros_like();
        g.for_each_tensor_mut(|_, t| t.data_mut().iter_mut().enumerate().for_each(|(i, v)| *v = F::of((i as f64 * 0.37).sin())));
        adam.update(&mut params, &g, &AdamConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        rng.next_u64();
        let ck = Checkpoint::capture(&params, &adam, Some(&rng), 1234);
        let dir = std::env::temp_dir().join(format!("ck-{}-{kind:?}-{}", std::process::id(), F::PRECISION));
        let path = dir.join("agent.json");
        ck.save(&path).unwrap();
        let back: Checkpoint<F> = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        let p2 = back.params().unwrap();
        assert_eq!(p2, params);
        let mut r2 = back.rng.unwrap();
        assert_eq!(r2.next_u64(), rng.next_u64());
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn exact_roundtrip_all_kinds_both_precisions() {
        for kind in ControllerKind::ALL {
            roundtrip::<f64>(kind);
            roundtrip::<f32>(kind);
        }
    }

    #[test]
    fn precision_mismatch_is_rejected() {
        let spec = NetworkSpec::default();
        let params: AgentParams<f32> = init_params(&spec, 0);
        let ck = Checkpoint::capture(&params, &AdamState::new(&params), None, 0);
        let path = std::env::temp_dir().join(format!("ck-prec-{}.json", std::process::id()));
        ck.save(&path).unwrap();
        assert!(Checkpoint::<f64>::load(&path).is_err());
        fs::remove_file(path).ok();
    }
}

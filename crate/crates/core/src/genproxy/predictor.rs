use std::collections::BTreeMap;

use rand::Rng;

use super::ProxyError;
use crate::rng;

/// Attribute predictor with a symmetric per-attribute flip probability.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictorStub {
    /// Per-attribute epsilon; attributes not listed use `default_epsilon`.
    pub epsilon: BTreeMap<String, f64>,
    pub default_epsilon: f64,
}

impl PredictorStub {
    pub fn perfect() -> Self {
        PredictorStub::default()
    }

    pub fn uniform(epsilon: f64) -> Result<Self, ProxyError> {
        let stub = PredictorStub {
            epsilon: BTreeMap::new(),
            default_epsilon: epsilon,
        };
        stub.validate()?;
        Ok(stub)
    }

    pub fn epsilon_for(&self, attribute: &str) -> f64 {
        self.epsilon.get(attribute).copied().unwrap_or(self.default_epsilon)
    }

    pub fn validate(&self) -> Result<(), ProxyError> {
        let check = |name: &str, e: f64| {
            if (0.0..0.5).contains(&e) {
                Ok(())
            } else {
                Err(ProxyError::Config(format!("predictor epsilon for `{name}` must lie in [0, 0.5), got {e}")))
            }
        };
        check("*", self.default_epsilon)?;
        self.epsilon.iter().try_for_each(|(n, &e)| check(n, e))
    }

    /// `*:default,name:eps,...`, the same layout the proxy file uses.
    pub fn to_pairs(&self) -> String {
        std::iter::once(format!("*:{}", self.default_epsilon))
            .chain(self.epsilon.iter().map(|(n, e)| format!("{n}:{e}")))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Predicted attribute set for one sample.
///
/// Each attribute of `universe` keeps its true membership except with
/// probability epsilon, when it is flipped. Output order follows `universe`.
pub fn predict_attributes(truth: &[String], universe: &[String], stub: &PredictorStub, seed: u64) -> Vec<String> {
    let mut rng = rng::stream(seed, rng::domain::PREDICT, 0);
    predict_with(truth, universe, stub, &mut rng)
}

pub(crate) fn predict_with<R: Rng>(truth: &[String], universe: &[String], stub: &PredictorStub, rng: &mut R) -> Vec<String> {
    universe
        .iter()
        .filter(|a| {
            let present = truth.contains(a);
            let eps = stub.epsilon_for(a);
            // always consume one draw so streams stay aligned across epsilons
            let flip = rng.random::<f64>() < eps;
            present != flip
        })
        .cloned()
        .collect()
}

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{combine, combine_reference_pair, pool, FeatureLayout, SentenceEmbedding, LAYOUT_VERSION};
use super::network::Regressor;
use super::train::TrainConfig;
use super::EstimatorError;
use crate::embeddings::{EmbeddingProvider, ProviderDescriptor};
use crate::qa::MinMax;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    /// Single task over `<src, mt, ref>`.
    StlRef,
    /// Single task over `<src, mt>`.
    StlQe,
    /// Joint `<src, mt>`, `<mt, ref>` and `<src, mt, ref>` heads.
    Mtl,
}

impl EstimatorMode {
    pub fn layouts(self) -> &'static [FeatureLayout] {
        match self {
            EstimatorMode::StlRef => &[FeatureLayout::Full],
            EstimatorMode::StlQe => &[FeatureLayout::SourcePair],
            EstimatorMode::Mtl => &[
                FeatureLayout::SourcePair,
                FeatureLayout::ReferencePair,
                FeatureLayout::Full,
            ],
        }
    }

    pub fn needs_reference(self) -> bool {
        !matches!(self, EstimatorMode::StlQe)
    }

    pub fn code(self) -> u8 {
        match self {
            EstimatorMode::StlRef => 0,
            EstimatorMode::StlQe => 1,
            EstimatorMode::Mtl => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(EstimatorMode::StlRef),
            1 => Some(EstimatorMode::StlQe),
            2 => Some(EstimatorMode::Mtl),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorMode::StlRef => "stl_ref",
            EstimatorMode::StlQe => "stl_qe",
            EstimatorMode::Mtl => "mtl",
        }
    }
}

impl fmt::Display for EstimatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorMode {
    type Err = EstimatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stl_ref" | "stl-ref" => Ok(EstimatorMode::StlRef),
            "stl_qe" | "stl-qe" => Ok(EstimatorMode::StlQe),
            "mtl" => Ok(EstimatorMode::Mtl),
            other => Err(EstimatorError::InvalidArgument(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Model output on the scaled [0, 1] target scale.
    pub score: f64,
    /// `score` mapped back through the training (min, max) pair.
    pub descaled: f64,
    /// `<src,mt>`, `<mt,ref>`, `<src,mt,ref>` head outputs of a multi-task
    /// model scored with a reference.
    pub heads: Option<[f64; 3]>,
}

/// One training or validation item on frozen sentence embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub src: SentenceEmbedding,
    pub mt: SentenceEmbedding,
    pub reference: Option<SentenceEmbedding>,
    pub target: f64,
}

/// An example with its regressor inputs precomputed: `(path, features)`.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    pub inputs: Vec<(usize, Vec<f64>)>,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorModel {
    pub(crate) mode: EstimatorMode,
    pub(crate) descriptor: ProviderDescriptor,
    pub(crate) hidden: Vec<usize>,
    pub(crate) bounds: MinMax,
    pub(crate) train_config: TrainConfig,
    pub(crate) regressor: Regressor,
}

impl EstimatorModel {
    /// Freshly initialised model; parameters are drawn from `seed` and
    /// rounded to f32 so that checkpoints reproduce them exactly.
    pub fn new(
        mode: EstimatorMode,
        descriptor: ProviderDescriptor,
        hidden: &[usize],
        seed: u64,
    ) -> Result<Self, EstimatorError> {
        let mut model = Self::zeros(mode, descriptor, hidden)?;
        model
            .regressor
            .init_uniform(&mut ChaCha8Rng::seed_from_u64(seed));
        model.quantize();
        Ok(model)
    }

    /// All-zero parameters.
    pub fn zeros(mode: EstimatorMode, descriptor: ProviderDescriptor, hidden: &[usize]) -> Result<Self, EstimatorError> {
        if descriptor.dim == 0 {
            return Err(EstimatorError::InvalidArgument("embedding dim must be positive".into()));
        }
        if hidden.contains(&0) {
            return Err(EstimatorError::InvalidArgument("hidden widths must be positive".into()));
        }
        let widths: Vec<usize> = mode.layouts().iter().map(|l| l.width(descriptor.dim)).collect();
        Ok(EstimatorModel {
            mode,
            regressor: Regressor::zeros(&widths, hidden),
            descriptor,
            hidden: hidden.to_vec(),
            bounds: MinMax { min: 0.0, max: 1.0 },
            train_config: TrainConfig::default(),
        })
    }

    pub fn mode(&self) -> EstimatorMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.descriptor.dim
    }

    pub fn descriptor(&self) -> &ProviderDescriptor {
        &self.descriptor
    }

    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    pub fn bounds(&self) -> MinMax {
        self.bounds
    }

    pub fn set_bounds(&mut self, bounds: MinMax) {
        self.bounds = bounds;
    }

    pub fn train_config(&self) -> &TrainConfig {
        &self.train_config
    }

    pub fn layout_version(&self) -> u8 {
        LAYOUT_VERSION
    }

    pub fn params(&self) -> &[f64] {
        self.regressor.params()
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        self.regressor.params_mut()
    }

    pub fn output_bias_index(&self) -> usize {
        self.regressor.output_bias_index()
    }

    /// Rounds every parameter to the nearest f32.
    pub fn quantize(&mut self) {
        for p in self.regressor.params_mut() {
            *p = *p as f32 as f64;
        }
    }

    /// `params -= lr * gradient`, in full precision.
    pub fn apply_gradient(&mut self, gradient: &[f64], learning_rate: f64) {
        for (p, g) in self.regressor.params_mut().iter_mut().zip(gradient) {
            *p -= learning_rate * g;
        }
    }

    fn check_dim(&self, e: &SentenceEmbedding) -> Result<(), EstimatorError> {
        if e.dim() != self.dim() {
            return Err(EstimatorError::DimensionMismatch {
                expected: self.dim(),
                found: e.dim(),
            });
        }
        Ok(())
    }

    /// Regressor inputs for every head used in training.
    pub(crate) fn prepare(&self, example: &TrainExample) -> Result<Prepared, EstimatorError> {
        self.check_dim(&example.src)?;
        self.check_dim(&example.mt)?;
        if let Some(r) = &example.reference {
            self.check_dim(r)?;
        }
        let reference = if self.mode.needs_reference() {
            Some(example.reference.as_ref().ok_or(EstimatorError::MissingReference)?)
        } else {
            None
        };
        let inputs = self
            .mode
            .layouts()
            .iter()
            .enumerate()
            .map(|(path, layout)| {
                let f = match layout {
                    FeatureLayout::SourcePair => combine(&example.src, &example.mt, None)?,
                    FeatureLayout::ReferencePair => {
                        combine_reference_pair(&example.mt, reference.expect("checked above"))?
                    }
                    FeatureLayout::Full => combine(&example.src, &example.mt, reference)?,
                };
                Ok((path, f.values))
            })
            .collect::<Result<Vec<_>, EstimatorError>>()?;
        Ok(Prepared {
            inputs,
            target: example.target,
        })
    }

    /// Scores pooled embeddings. `force_qe` takes the reference-free route
    /// (only valid for `stl_qe` and `mtl`); `stl_qe` never reads `reference`.
    pub fn score_embeddings(
        &self,
        src: &SentenceEmbedding,
        mt: &SentenceEmbedding,
        reference: Option<&SentenceEmbedding>,
        force_qe: bool,
    ) -> Result<Prediction, EstimatorError> {
        self.check_dim(src)?;
        self.check_dim(mt)?;
        let finish = |score: f64, heads| Prediction {
            score,
            descaled: self.bounds.unscale(score),
            heads,
        };
        match self.mode {
            EstimatorMode::StlQe => {
                let f = combine(src, mt, None)?;
                Ok(finish(self.regressor.forward(0, &f.values), None))
            }
            EstimatorMode::StlRef => {
                if force_qe {
                    return Err(EstimatorError::QeUnsupported);
                }
                let r = reference.ok_or(EstimatorError::MissingReference)?;
                self.check_dim(r)?;
                let f = combine(src, mt, Some(r))?;
                Ok(finish(self.regressor.forward(0, &f.values), None))
            }
            EstimatorMode::Mtl => {
                let qe = combine(src, mt, None)?;
                let s_src_mt = self.regressor.forward(0, &qe.values);
                if force_qe {
                    return Ok(finish(s_src_mt, None));
                }
                let r = reference.ok_or(EstimatorError::MissingReference)?;
                self.check_dim(r)?;
                let s_mt_ref = self.regressor.forward(1, &combine_reference_pair(mt, r)?.values);
                let s_full = self.regressor.forward(2, &combine(src, mt, Some(r))?.values);
                let heads = [s_src_mt, s_mt_ref, s_full];
                Ok(finish((heads[0] + heads[1] + heads[2]) / 3.0, Some(heads)))
            }
        }
    }

    /// Embeds, pools and scores raw texts.
    pub fn score_texts(
        &self,
        provider: &dyn EmbeddingProvider,
        src: &str,
        mt: &str,
        reference: Option<&str>,
        force_qe: bool,
    ) -> Result<Prediction, EstimatorError> {
        self.check_provider(provider)?;
        let uses_reference = self.mode != EstimatorMode::StlQe && !force_qe;
        let h_src = pool(&provider.embed(src)?);
        let h_mt = pool(&provider.embed(mt)?);
        let h_ref = match (uses_reference, reference) {
            (true, Some(r)) => Some(pool(&provider.embed(r)?)),
            _ => None,
        };
        self.score_embeddings(&h_src, &h_mt, h_ref.as_ref(), force_qe)
    }

    pub fn check_provider(&self, provider: &dyn EmbeddingProvider) -> Result<(), EstimatorError> {
        let d = provider.descriptor();
        if d.dim != self.dim() {
            return Err(EstimatorError::DescriptorMismatch {
                model_dim: self.dim(),
                provider_dim: d.dim,
            });
        }
        if d.identity != self.descriptor.identity {
            log::warn!(
                "provider identity {:?} differs from the identity the model was trained with ({:?})",
                d.identity,
                self.descriptor.identity
            );
        }
        Ok(())
    }

    pub(crate) fn prepared_loss_and_gradient(&self, batch: &[&Prepared], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut cache = Vec::new();
        let mut loss = 0.0;
        let heads = self.mode.layouts().len() as f64;
        let scale = 1.0 / (batch.len() as f64 * heads);
        for ex in batch {
            for (path, x) in &ex.inputs {
                let y = self.regressor.forward_cached(*path, x, &mut cache);
                let err = y - ex.target;
                loss += err * err;
                self.regressor.backward(*path, x, &cache, 2.0 * err * scale, grad);
            }
        }
        loss * scale
    }

    pub(crate) fn prepared_loss(&self, batch: &[&Prepared]) -> f64 {
        let mut loss = 0.0;
        let heads = self.mode.layouts().len() as f64;
        for ex in batch {
            for (path, x) in &ex.inputs {
                let err = self.regressor.forward(*path, x) - ex.target;
                loss += err * err;
            }
        }
        loss / (batch.len() as f64 * heads)
    }

    /// Mean squared error over the batch (averaged over heads for the
    /// multi-task model) and its gradient with respect to every parameter.
    pub fn loss_and_gradient(&self, batch: &[TrainExample]) -> Result<(f64, Vec<f64>), EstimatorError> {
        if batch.is_empty() {
            return Err(EstimatorError::EmptyTrainingSet);
        }
        let prepared = batch.iter().map(|e| self.prepare(e)).collect::<Result<Vec<_>, _>>()?;
        let refs: Vec<&Prepared> = prepared.iter().collect();
        let mut grad = vec![0.0; self.regressor.num_params()];
        let loss = self.prepared_loss_and_gradient(&refs, &mut grad);
        Ok((loss, grad))
    }

    pub fn loss(&self, batch: &[TrainExample]) -> Result<f64, EstimatorError> {
        if batch.is_empty() {
            return Err(EstimatorError::EmptyTrainingSet);
        }
        let prepared = batch.iter().map(|e| self.prepare(e)).collect::<Result<Vec<_>, _>>()?;
        let refs: Vec<&Prepared> = prepared.iter().collect();
        Ok(self.prepared_loss(&refs))
    }
}

/// Relative error `|a - n| / max(|a|, |n|, floor)` between analytic and
/// central-difference gradients, maximised over parameters.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

pub fn grad_check(model: &EstimatorModel, batch: &[TrainExample], epsilon: f64) -> Result<f64, EstimatorError> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(EstimatorError::InvalidArgument(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    let (_, analytic) = model.loss_and_gradient(batch)?;
    let prepared = batch.iter().map(|e| model.prepare(e)).collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&Prepared> = prepared.iter().collect();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let original = probe.regressor.params()[i];
        probe.regressor.params_mut()[i] = original + epsilon;
        let plus = probe.prepared_loss(&refs);
        probe.regressor.params_mut()[i] = original - epsilon;
        let minus = probe.prepared_loss(&refs);
        probe.regressor.params_mut()[i] = original;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let denom = a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}

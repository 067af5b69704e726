use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::model::{DenoiserConfig, DenoiserParams};
use super::sample::LayoutModel;
use super::schedule::NoiseSchedule;
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::layout::{ClassSchema, PageSize};
use crate::tokens::Vocabulary;

pub const CHECKPOINT_FORMAT: &str = "doclayout-denoiser";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Tensor {
    name: String,
    shape: [usize; 2],
    data: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    train: TrainConfig,
    model: DenoiserConfig,
    grid: usize,
    schema: Vec<String>,
    page: [u32; 2],
    tensors: Vec<Tensor>,
}

impl LayoutModel {
    pub fn to_json(&self) -> Result<String> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            train: self.train.clone(),
            model: self.params.cfg,
            grid: self.vocab.grid(),
            schema: self.schema.names().to_vec(),
            page: [self.page.width, self.page.height],
            tensors: self
                .params
                .tensors()
                .into_iter()
                .map(|(name, t)| Tensor { name, shape: [t.nrows(), t.ncols()], data: t.iter().copied().collect() })
                .collect(),
        };
        Ok(serde_json::to_string(&ck)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint {} v{}", ck.format, ck.version)));
        }
        let schema = Arc::new(ClassSchema::new(ck.schema).map_err(|e| Error::Format(e.to_string()))?);
        let vocab = Vocabulary::for_schema(ck.grid, &schema).map_err(|e| Error::Format(e.to_string()))?;
        if vocab.size() != ck.model.vocab {
            return Err(Error::Format("checkpoint vocabulary does not match its schema and grid".into()));
        }
        let schedule = NoiseSchedule::new(ck.train.schedule, ck.train.diffusion_steps)?;
        // Shapes come from a throwaway model of the same config.
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut params = DenoiserParams::<f32>::init(ck.model, &mut rng).map_err(|e| Error::Format(e.to_string()))?;
        let names: Vec<(String, [usize; 2])> =
            params.tensors().iter().map(|(n, t)| (n.clone(), [t.nrows(), t.ncols()])).collect();
        if names.len() != ck.tensors.len() {
            return Err(Error::Format(format!(
                "checkpoint has {} tensors, model expects {}",
                ck.tensors.len(),
                names.len()
            )));
        }
        for ((slot, (name, shape)), t) in params.tensors_mut().into_iter().zip(&names).zip(ck.tensors) {
            if &t.name != name || &t.shape != shape {
                return Err(Error::Format(format!("tensor {} {:?} where {name} {:?} was expected", t.name, t.shape, shape)));
            }
            *slot = Array2::from_shape_vec((shape[0], shape[1]), t.data)
                .map_err(|_| Error::Format(format!("tensor {name} has the wrong element count")))?;
        }
        Ok(Self {
            params,
            schedule,
            vocab,
            schema,
            page: PageSize::new(ck.page[0], ck.page[1]),
            train: ck.train,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_json()?)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

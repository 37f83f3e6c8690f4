use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{QuerySample, SLOTS};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, NextPlaceModel};
use crate::numeric::{Bindings, LstmCellParams, LstmVars, ParameterStore, Tape, Tensor, Var};
use crate::priors::PriorSet;

pub const BASE_LOC: &str = "base.loc_emb";
pub const BASE_TIME: &str = "base.time_emb";
pub const BASE_CELL: &str = "base.cell";
pub const BASE_OUT: &str = "base.w_out";

/// Plain recurrent baseline: an LSTM over the recent prefix only, with
/// trainable location and slot embeddings and a linear softmax head.
///
/// The head starts at zero, so an untrained model scores every location
/// equally.
#[derive(Clone, Debug)]
pub struct LstmBaseline {
    pub location_dim: usize,
    pub time_dim: usize,
    pub hidden: usize,
    pub num_locations: usize,
    pub params: ParameterStore,
}

impl LstmBaseline {
    pub fn new(config: &ModelConfig, num_locations: usize, seed: u64) -> Result<Self> {
        let errs = config.validate();
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = config.hidden;
        let bound = 1.0 / (h as f64).sqrt();
        let mut params = ParameterStore::new();
        params.insert(BASE_LOC, Tensor::uniform(&[num_locations + 1, config.location_dim], bound, &mut rng), true);
        params.insert(BASE_TIME, Tensor::uniform(&[SLOTS, config.time_dim], bound, &mut rng), true);
        LstmCellParams::init(config.location_dim + config.time_dim, h, &mut rng).register(&mut params, BASE_CELL);
        params.insert(BASE_OUT, Tensor::zeros(&[num_locations, h]), true);
        Ok(Self {
            location_dim: config.location_dim,
            time_dim: config.time_dim,
            hidden: h,
            num_locations,
            params,
        })
    }

    fn scores(&self, tape: &mut Tape, b: &Bindings, q: &QuerySample) -> Result<Var> {
        if q.recent.is_empty() {
            return Err(Error::Shape(format!("query {} has no recent visits", q.id)));
        }
        let mut xs = Vec::with_capacity(q.recent.len());
        for p in &q.recent {
            let loc = tape.gather_row(b.var(BASE_LOC)?, p.location.min(self.num_locations))?;
            let time = tape.gather_row(b.var(BASE_TIME)?, p.slot as usize)?;
            xs.push(tape.concat(&[loc, time], 0)?);
        }
        let cell = LstmVars {
            w_input: b.var(&format!("{BASE_CELL}.w_input"))?,
            w_hidden: b.var(&format!("{BASE_CELL}.w_hidden"))?,
            bias: b.var(&format!("{BASE_CELL}.bias"))?,
            hidden_size: self.hidden,
        };
        let hs = cell.run(tape, &xs, false)?;
        let last = *hs.last().expect("non-empty");
        let z = tape.matmul(b.var(BASE_OUT)?, last)?;
        tape.log_softmax(z)
    }
}

impl NextPlaceModel for LstmBaseline {
    fn label(&self) -> String {
        "lstm".into()
    }

    fn params(&self) -> &ParameterStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParameterStore {
        &mut self.params
    }

    fn num_locations(&self) -> usize {
        self.num_locations
    }

    fn sample_loss(&self, tape: &mut Tape, b: &Bindings, q: &QuerySample, _priors: &PriorSet) -> Result<Var> {
        let target = q.target.location;
        if target >= self.num_locations {
            return Err(Error::Index {
                what: "locations (UNKNOWN target)",
                index: target,
                len: self.num_locations,
            });
        }
        let lp = self.scores(tape, b, q)?;
        let picked = tape.pick(lp, target)?;
        Ok(tape.scale(picked, -1.0))
    }

    fn log_probs(&self, q: &QuerySample, _priors: &PriorSet) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let b = self.params.bind_trainable(&mut tape);
        let lp = self.scores(&mut tape, &b, q)?;
        Ok(tape.value(lp).to_vec())
    }
}

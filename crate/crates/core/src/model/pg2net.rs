use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, Variant, VocabSizes};
use super::NextPlaceModel;
use crate::data::{Level, Poi, QuerySample, SLOTS};
use crate::error::{Error, Result};
use crate::graph::EmbeddingTable;
use crate::numeric::{Bindings, LstmCellParams, LstmVars, ParameterStore, Tape, Tensor, Var};
use crate::priors::{PriorSet, SequenceWeights};

pub const USER_EMB: &str = "user_emb";
pub const TIME_EMB: &str = "time_emb";
pub const LOC_EMB: &str = "loc_emb";
pub const CAT_EMB: &str = "cat_emb";
pub const HIST_FWD: &str = "hist_fwd";
pub const HIST_BWD: &str = "hist_bwd";
pub const RECENT: &str = "recent";
pub const W_ATT: &str = "w_att";
pub const W_P: &str = "w_p";
pub const W_AUX: &str = "w_aux";

/// Blocks of the concatenated preference vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Part {
    Personal,
    LongGroup,
    ShortGroup,
    User,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartSpan {
    pub part: Part,
    pub start: usize,
    pub len: usize,
}

/// Per-prior group vectors, in the order distance, time, activity.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroupVectors {
    pub long: Vec<Vec<f64>>,
    pub short: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput {
    pub log_probs: Vec<f64>,
    pub p_u: Option<Vec<f64>>,
    pub p_l: Option<Vec<f64>>,
    pub p_s: Option<Vec<f64>>,
    pub attention: Option<Vec<f64>>,
    pub group: GroupVectors,
    pub h_aux: Vec<f64>,
    pub concat: Vec<f64>,
    pub layout: Vec<PartSpan>,
}

struct ForwardVars {
    log_probs: Var,
    h_aux: Var,
    concat: Var,
    p_u: Option<Var>,
    p_l: Option<Var>,
    p_s: Option<Var>,
    attention: Option<Var>,
    long: Vec<Var>,
    short: Vec<Var>,
}

/// The full network: parameters plus the structural choices of a variant.
#[derive(Clone, Debug)]
pub struct Pg2Net {
    pub config: ModelConfig,
    pub sizes: VocabSizes,
    pub variant: Variant,
    pub params: ParameterStore,
}

impl Pg2Net {
    /// Initializes a model. Frozen tables come from node2vec files unless the
    /// variant asks for random ones; the extra UNKNOWN row is all zeros.
    pub fn new(
        config: ModelConfig,
        sizes: VocabSizes,
        variant: Variant,
        location_table: Option<&EmbeddingTable>,
        category_table: Option<&EmbeddingTable>,
        seed: u64,
    ) -> Result<Self> {
        Self::build(config, sizes, variant, location_table, category_table, seed, !variant.uses_node2vec())
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        config: ModelConfig,
        sizes: VocabSizes,
        variant: Variant,
        location_table: Option<&EmbeddingTable>,
        category_table: Option<&EmbeddingTable>,
        seed: u64,
        random_tables: bool,
    ) -> Result<Self> {
        let errs = config.validate();
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (config.hidden as f64).sqrt();
        let mut params = ParameterStore::new();
        params.insert(USER_EMB, Tensor::uniform(&[sizes.users, config.user_dim], bound, &mut rng), true);
        params.insert(TIME_EMB, Tensor::uniform(&[SLOTS, config.time_dim], bound, &mut rng), true);

        let loc = frozen_table(location_table, Level::Location, sizes.locations, config.location_dim, random_tables, &mut rng)?;
        params.insert(LOC_EMB, loc, false);
        if let Some(c) = sizes.categories {
            let cat = frozen_table(category_table, Level::Category, c, config.category_dim, random_tables, &mut rng)?;
            params.insert(CAT_EMB, cat, false);
        }

        let d_in = config.input_dim(sizes.has_categories());
        let h = config.hidden;
        LstmCellParams::init(d_in, h, &mut rng).register(&mut params, HIST_FWD);
        LstmCellParams::init(d_in, h, &mut rng).register(&mut params, HIST_BWD);
        if variant.uses_short() {
            LstmCellParams::init(d_in, h, &mut rng).register(&mut params, RECENT);
        }
        if variant.uses_personal() {
            params.insert(W_ATT, Tensor::uniform(&[config.user_dim, 2 * h], bound, &mut rng), true);
        }
        let model = Self {
            config,
            sizes,
            variant,
            params,
        };
        let dc = model.concat_dim();
        let mut params = model.params;
        params.insert(W_P, Tensor::uniform(&[sizes.locations, dc], bound, &mut rng), true);
        params.insert(W_AUX, Tensor::uniform(&[model.config.location_dim, dc], bound, &mut rng), true);
        Ok(Self { params, ..model })
    }

    /// A model with the right parameter names and shapes, ready to receive
    /// checkpoint values.
    pub fn skeleton(config: ModelConfig, sizes: VocabSizes, variant: Variant) -> Result<Self> {
        Self::build(config, sizes, variant, None, None, 0, true)
    }

    pub fn layout(&self) -> Vec<PartSpan> {
        let h = self.config.hidden;
        let mut parts = Vec::new();
        if self.variant.uses_personal() {
            parts.push((Part::Personal, 2 * h));
        }
        if self.variant.uses_long() {
            parts.push((Part::LongGroup, 2 * h));
        }
        if self.variant.uses_short() {
            parts.push((Part::ShortGroup, h));
        }
        parts.push((Part::User, self.config.user_dim));
        let mut start = 0;
        parts
            .into_iter()
            .map(|(part, len)| {
                let span = PartSpan { part, start, len };
                start += len;
                span
            })
            .collect()
    }

    pub fn concat_dim(&self) -> usize {
        self.layout().iter().map(|p| p.len).sum()
    }

    pub fn aux_weight(&self) -> f64 {
        self.variant.aux_weight(self.config.aux_weight)
    }

    /// Frozen location vector; the UNKNOWN index gives the zero row.
    pub fn location_row(&self, location: usize) -> Result<&[f64]> {
        self.params.tensor(LOC_EMB)?.row(location)
    }

    /// Multi-modal POI embedding `V^l ⊕ V^t (⊕ V^c)`.
    pub fn embed_poi(&self, tape: &mut Tape, b: &Bindings, poi: &Poi) -> Result<Var> {
        let loc = tape.constant_vector(self.location_row(poi.location)?.to_vec());
        let time = tape.gather_row(b.var(TIME_EMB)?, poi.slot as usize)?;
        let mut parts = vec![loc, time];
        if let Some(c) = self.sizes.categories {
            let row = self.params.tensor(CAT_EMB)?.row(poi.category.unwrap_or(c))?;
            parts.push(tape.constant_vector(row.to_vec()));
        }
        tape.concat(&parts, 0)
    }

    fn lstm(&self, b: &Bindings, prefix: &str) -> Result<LstmVars> {
        Ok(LstmVars {
            w_input: b.var(&format!("{prefix}.w_input"))?,
            w_hidden: b.var(&format!("{prefix}.w_hidden"))?,
            bias: b.var(&format!("{prefix}.bias"))?,
            hidden_size: self.config.hidden,
        })
    }

    /// Bi-LSTM over the history: rows `h_i = fwd_i ⊕ bwd_i`, shape `[n × 2H]`.
    pub fn encode_history(&self, tape: &mut Tape, b: &Bindings, history: &[Poi]) -> Result<Var> {
        let xs = history
            .iter()
            .map(|p| self.embed_poi(tape, b, p))
            .collect::<Result<Vec<_>>>()?;
        let fwd = self.lstm(b, HIST_FWD)?.run(tape, &xs, false)?;
        let bwd = self.lstm(b, HIST_BWD)?.run(tape, &xs, true)?;
        let rows = fwd
            .into_iter()
            .zip(bwd)
            .map(|(f, r)| tape.concat(&[f, r], 0))
            .collect::<Result<Vec<_>>>()?;
        stack(tape, &rows, 2 * self.config.hidden)
    }

    /// Unidirectional LSTM over the recent prefix, shape `[m × H]`.
    pub fn encode_recent(&self, tape: &mut Tape, b: &Bindings, recent: &[Poi]) -> Result<Var> {
        let xs = recent
            .iter()
            .map(|p| self.embed_poi(tape, b, p))
            .collect::<Result<Vec<_>>>()?;
        let rows = self.lstm(b, RECENT)?.run(tape, &xs, false)?;
        stack(tape, &rows, self.config.hidden)
    }

    fn record(&self, tape: &mut Tape, b: &Bindings, q: &QuerySample, priors: &PriorSet) -> Result<ForwardVars> {
        let cap = self.config.history_cap;
        let history = &q.history[q.history.len().saturating_sub(cap)..];
        if history.is_empty() || q.recent.is_empty() {
            return Err(Error::Shape(format!("query {} has an empty history or recent part", q.id)));
        }
        if q.user >= self.sizes.users {
            return Err(Error::Index {
                what: "users",
                index: q.user,
                len: self.sizes.users,
            });
        }
        let current = q.current();
        let hh = self.encode_history(tape, b, history)?;
        let user = tape.gather_row(b.var(USER_EMB)?, q.user)?;

        let (mut p_u, mut attention) = (None, None);
        if self.variant.uses_personal() {
            let query = tape.matmul(user, b.var(W_ATT)?)?;
            let scores = tape.matmul(hh, query)?;
            let a = tape.softmax(scores)?;
            p_u = Some(tape.matmul(a, hh)?);
            attention = Some(a);
        }

        let (mut p_l, mut long) = (None, Vec::new());
        if self.variant.uses_long() {
            let w = priors.sequence_weights(current, history)?;
            long = weighted_rows(tape, &w, hh)?;
            p_l = Some(tape.add_all(&long)?);
        }

        let (mut p_s, mut short) = (None, Vec::new());
        if self.variant.uses_short() {
            let hc = self.encode_recent(tape, b, &q.recent)?;
            let w = priors.sequence_weights(current, &q.recent)?;
            short = weighted_rows(tape, &w, hc)?;
            p_s = Some(tape.add_all(&short)?);
        }

        let parts: Vec<Var> = [p_u, p_l, p_s, Some(user)].into_iter().flatten().collect();
        let concat = tape.concat(&parts, 0)?;
        let z = tape.matmul(b.var(W_P)?, concat)?;
        let log_probs = tape.log_softmax(z)?;
        let h_aux = tape.matmul(b.var(W_AUX)?, concat)?;
        Ok(ForwardVars {
            log_probs,
            h_aux,
            concat,
            p_u,
            p_l,
            p_s,
            attention,
            long,
            short,
        })
    }

    pub fn forward(&self, q: &QuerySample, priors: &PriorSet) -> Result<ForwardOutput> {
        let mut tape = Tape::new();
        let b = self.params.bind_trainable(&mut tape);
        let f = self.record(&mut tape, &b, q, priors)?;
        let val = |v: Var| tape.value(v).to_vec();
        Ok(ForwardOutput {
            log_probs: val(f.log_probs),
            p_u: f.p_u.map(val),
            p_l: f.p_l.map(val),
            p_s: f.p_s.map(val),
            attention: f.attention.map(val),
            group: GroupVectors {
                long: f.long.iter().map(|&v| val(v)).collect(),
                short: f.short.iter().map(|&v| val(v)).collect(),
            },
            h_aux: val(f.h_aux),
            concat: val(f.concat),
            layout: self.layout(),
        })
    }

    /// `‖v^l_target − ĥ‖²` for a query with a known target.
    pub fn aux_distance(&self, q: &QuerySample, priors: &PriorSet) -> Result<f64> {
        let out = self.forward(q, priors)?;
        let v = self.location_row(q.target.location)?;
        Ok(v.iter().zip(&out.h_aux).map(|(a, b)| (a - b).powi(2)).sum())
    }
}

impl NextPlaceModel for Pg2Net {
    fn label(&self) -> String {
        self.variant.to_string()
    }

    fn params(&self) -> &ParameterStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParameterStore {
        &mut self.params
    }

    fn num_locations(&self) -> usize {
        self.sizes.locations
    }

    /// `−log p_target + ε‖v^l_target − ĥ‖²`.
    fn sample_loss(&self, tape: &mut Tape, b: &Bindings, q: &QuerySample, priors: &PriorSet) -> Result<Var> {
        let target = q.target.location;
        if target >= self.sizes.locations {
            return Err(Error::Index {
                what: "locations (UNKNOWN target)",
                index: target,
                len: self.sizes.locations,
            });
        }
        let f = self.record(tape, b, q, priors)?;
        let lp = tape.pick(f.log_probs, target)?;
        let nll = tape.scale(lp, -1.0);
        let eps = self.aux_weight();
        if eps == 0.0 {
            return Ok(nll);
        }
        let v = tape.constant_vector(self.location_row(target)?.to_vec());
        let diff = tape.sub(v, f.h_aux)?;
        let sq = tape.sum_squares(diff)?;
        let aux = tape.scale(sq, eps);
        tape.add(nll, aux)
    }

    fn log_probs(&self, q: &QuerySample, priors: &PriorSet) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let b = self.params.bind_trainable(&mut tape);
        let f = self.record(&mut tape, &b, q, priors)?;
        Ok(tape.value(f.log_probs).to_vec())
    }
}

fn frozen_table(
    table: Option<&EmbeddingTable>,
    level: Level,
    rows: usize,
    dim: usize,
    random: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Tensor> {
    let mut data = if !random {
        let t = table.ok_or_else(|| {
            Error::Config(vec![format!("{} node2vec embedding table required", level.as_str())])
        })?;
        if t.level != level || t.rows != rows || t.dim != dim {
            return Err(Error::Checkpoint(format!(
                "{} table is {}×{} ({}), model expects {rows}×{dim}",
                level.as_str(),
                t.rows,
                t.dim,
                t.level.as_str()
            )));
        }
        t.data.clone()
    } else {
        Tensor::uniform(&[rows.max(1), dim], 1.0 / (dim as f64).sqrt(), rng).data[..rows * dim].to_vec()
    };
    data.extend(std::iter::repeat_n(0.0, dim));
    Tensor::matrix(rows + 1, dim, data)
}

/// Stacks rank-1 rows of width `w` into an `[n × w]` matrix.
fn stack(tape: &mut Tape, rows: &[Var], w: usize) -> Result<Var> {
    let rows = rows
        .iter()
        .map(|&r| tape.reshape(r, vec![1, w]))
        .collect::<Result<Vec<_>>>()?;
    tape.concat(&rows, 0)
}

/// `α_x · M` for each available prior weight vector.
fn weighted_rows(tape: &mut Tape, w: &SequenceWeights, m: Var) -> Result<Vec<Var>> {
    let mut out = Vec::with_capacity(3);
    for alpha in [Some(&w.distance), Some(&w.time), w.activity.as_ref()].into_iter().flatten() {
        let a = tape.constant_vector(alpha.clone());
        out.push(tape.matmul(a, m)?);
    }
    Ok(out)
}

use rand::Rng;

use super::params::ParameterStore;
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::Result;

/// Weights of one LSTM cell.
///
/// Rows of `w_input`, `w_hidden` and `bias` are split into four contiguous
/// `hidden_size` blocks: input gate, forget gate, cell candidate, output gate.
#[derive(Clone, Debug)]
pub struct LstmCellParams {
    pub w_input: Tensor,
    pub w_hidden: Tensor,
    pub bias: Tensor,
    pub hidden_size: usize,
}

impl LstmCellParams {
    /// Uniform init in `[-1/sqrt(H), 1/sqrt(H)]`, forget-gate bias set to 1.
    pub fn init<R: Rng + ?Sized>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden_size as f64).sqrt();
        let w_input = Tensor::uniform(&[4 * hidden_size, input_size], bound, rng);
        let w_hidden = Tensor::uniform(&[4 * hidden_size, hidden_size], bound, rng);
        let mut bias = Tensor::uniform(&[4 * hidden_size], bound, rng);
        bias.data[hidden_size..2 * hidden_size].fill(1.0);
        Self {
            w_input,
            w_hidden,
            bias,
            hidden_size,
        }
    }

    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        Self {
            w_input: Tensor::zeros(&[4 * hidden_size, input_size]),
            w_hidden: Tensor::zeros(&[4 * hidden_size, hidden_size]),
            bias: Tensor::zeros(&[4 * hidden_size]),
            hidden_size,
        }
    }

    pub fn input_size(&self) -> usize {
        self.w_input.shape[1]
    }

    /// Registers the three tensors under `prefix.{w_input,w_hidden,bias}`.
    pub fn register(self, store: &mut ParameterStore, prefix: &str) {
        store.insert(&format!("{prefix}.w_input"), self.w_input, true);
        store.insert(&format!("{prefix}.w_hidden"), self.w_hidden, true);
        store.insert(&format!("{prefix}.bias"), self.bias, true);
    }
}

/// An LSTM cell whose weights are recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub struct LstmVars {
    pub w_input: Var,
    pub w_hidden: Var,
    pub bias: Var,
    pub hidden_size: usize,
}

impl LstmVars {
    pub fn from_params(tape: &mut Tape, p: &LstmCellParams) -> Self {
        Self {
            w_input: tape.input(&p.w_input),
            w_hidden: tape.input(&p.w_hidden),
            bias: tape.input(&p.bias),
            hidden_size: p.hidden_size,
        }
    }

    /// One recurrence step: returns `(h, c)`.
    pub fn step(&self, tape: &mut Tape, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        let hc = tape.lstm_cell(x, h, c, self.w_input, self.w_hidden, self.bias)?;
        let h = tape.slice(hc, 0, self.hidden_size)?;
        let c = tape.slice(hc, self.hidden_size, self.hidden_size)?;
        Ok((h, c))
    }

    /// Runs the cell over `inputs` from a zero state and returns the hidden
    /// state at each position, aligned with `inputs`. With `reverse` the
    /// sequence is consumed right to left.
    pub fn run(&self, tape: &mut Tape, inputs: &[Var], reverse: bool) -> Result<Vec<Var>> {
        let mut h = tape.constant_vector(vec![0.0; self.hidden_size]);
        let mut c = tape.constant_vector(vec![0.0; self.hidden_size]);
        let mut out = vec![h; inputs.len()];
        let order: Box<dyn Iterator<Item = usize>> = if reverse {
            Box::new((0..inputs.len()).rev())
        } else {
            Box::new(0..inputs.len())
        };
        for i in order {
            let (h2, c2) = self.step(tape, inputs[i], h, c)?;
            h = h2;
            c = c2;
            out[i] = h;
        }
        Ok(out)
    }
}

/// Single LSTM step on a tape.
pub fn lstm_cell(
    tape: &mut Tape,
    x: Var,
    h_prev: Var,
    c_prev: Var,
    params: &LstmVars,
) -> Result<(Var, Var)> {
    params.step(tape, x, h_prev, c_prev)
}

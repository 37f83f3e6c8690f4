//! Records a small computation on the tape, runs it backward, and checks a
//! miniature next-place model's gradients against central differences.

use pg2net::data::{build_queries, Level, QueryConfig, Split};
use pg2net::model::{accumulate_sample, sample_loss_value, ModelConfig, Pg2Net, Variant, VocabSizes};
use pg2net::numeric::gradcheck::check_gradients;
use pg2net::numeric::{Tape, Tensor};
use pg2net::priors::{PriorConfig, PriorSet};
use pg2net::synth::{miniature_dataset, random_embedding};

fn main() -> pg2net::Result<()> {
    // y = sum(softmax(W x) * c)
    let mut tape = Tape::new();
    let w = tape.input(&Tensor::matrix(2, 3, vec![0.1, -0.2, 0.3, 0.5, 0.0, -0.4])?.with_grad());
    let x = tape.constant_vector(vec![1.0, 2.0, -1.0]);
    let c = tape.constant_vector(vec![2.0, -1.0]);
    let z = tape.matmul(w, x)?;
    let p = tape.softmax(z)?;
    let pc = tape.mul(p, c)?;
    let y = tape.sum(pc);
    let grads = tape.backward(y)?;
    println!("y = {:.6}", tape.scalar(y));
    println!("dy/dW = {:?}", grads.wrt(w));
    println!("ops: {:?}", tape.op_ids());

    let ds = miniature_dataset();
    let config = ModelConfig {
        user_dim: 2,
        location_dim: 8,
        category_dim: 4,
        time_dim: 4,
        hidden: 4,
        ..Default::default()
    };
    let loc = random_embedding(&ds, Level::Location, 8, 1);
    let cat = random_embedding(&ds, Level::Category, 4, 2);
    let priors = PriorSet::build(&ds, &PriorConfig::default())?;
    let q = build_queries(&ds, Split::Train, &QueryConfig::default()).remove(3);
    let mut model = Pg2Net::new(config, VocabSizes::of(&ds), Variant::Full, Some(&loc), Some(&cat), 3)?;

    model.params.zero_grads();
    let loss = accumulate_sample(&mut model, &q, &priors)?;
    println!("sample loss {loss:.6}");
    let snapshot = model.clone();
    let report = check_gradients(&mut model.params, 1e-5, 1, |store| {
        let mut m = snapshot.clone();
        m.params = store.clone();
        sample_loss_value(&m, &q, &priors)
    })?;
    println!(
        "checked {} entries, max relative error {:.2e} ({}[{}])",
        report.checked, report.max_rel_error, report.worst_param, report.worst_index
    );
    Ok(())
}

mod common;

use approx::assert_abs_diff_eq;
use common::{mini, mini_config, mini_model};
use pg2net::data::{Poi, QuerySample};
use pg2net::model::pg2net::{CAT_EMB, HIST_BWD, HIST_FWD, LOC_EMB, W_AUX, W_P};
use pg2net::model::{
    accumulate_sample, sample_loss_value, ModelConfig, NextPlaceModel, Part, Pg2Net, Variant, VocabSizes,
};
use pg2net::numeric::gradcheck::check_gradients;
use pg2net::numeric::{Tape, Tensor};

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scalar (H = 1) LSTM over a sequence of input vectors.
fn scalar_lstm(xs: &[Vec<f64>], wi: &[f64], wh: &[f64], b: &[f64]) -> Vec<f64> {
    let d = xs[0].len();
    let (mut h, mut c) = (0.0, 0.0);
    let mut out = Vec::new();
    for x in xs {
        let z: Vec<f64> = (0..4)
            .map(|g| b[g] + wh[g] * h + (0..d).map(|j| wi[g * d + j] * x[j]).sum::<f64>())
            .collect();
        c = sig(z[1]) * c + sig(z[0]) * z[2].tanh();
        h = sig(z[3]) * c.tanh();
        out.push(h);
    }
    out
}

#[test]
fn concat_widths_at_default_dims() {
    let sizes = VocabSizes {
        users: 2,
        locations: 3,
        categories: Some(2),
    };
    let dim = |v| Pg2Net::skeleton(ModelConfig::default(), sizes, v).unwrap().concat_dim();
    assert_eq!(dim(Variant::Full), 2540);
    assert_eq!(dim(Variant::GNet), 1540);
    assert_eq!(dim(Variant::PNet), 1040);
    assert_eq!(dim(Variant::Long), 2040);
    assert_eq!(dim(Variant::Short), 1540);
    assert_eq!(ModelConfig::default().input_dim(true), 560);
    assert_eq!(ModelConfig::default().input_dim(false), 510);
}

#[test]
fn skeleton_matches_initialized_layout() {
    let m = mini();
    for variant in Variant::ALL {
        let model = mini_model(&m, variant, 1);
        let sk = Pg2Net::skeleton(mini_config(), VocabSizes::of(&m.ds), variant).unwrap();
        let shapes = |p: &Pg2Net| p.params.iter().map(|x| (x.name.clone(), x.tensor.shape.clone())).collect::<Vec<_>>();
        assert_eq!(shapes(&sk), shapes(&model), "{variant}");
    }
}

#[test]
fn poi_embedding_uses_frozen_rows() {
    let m = mini();
    let model = mini_model(&m, Variant::Full, 1);
    let poi = m.queries[0].target;
    let mut tape = Tape::new();
    let b = model.params.bind_trainable(&mut tape);
    let e = model.embed_poi(&mut tape, &b, &poi).unwrap();
    let v = tape.value(e);
    assert_eq!(v.len(), 8 + 4 + 4);
    assert_eq!(&v[..8], model.params.tensor(LOC_EMB).unwrap().row(poi.location).unwrap());
    let slot_row = model.params.tensor("time_emb").unwrap().row(poi.slot as usize).unwrap();
    assert_eq!(&v[8..12], slot_row);
    let cat = poi.category.unwrap();
    assert_eq!(&v[12..], model.params.tensor(CAT_EMB).unwrap().row(cat).unwrap());

    // UNKNOWN location maps to the zero row.
    let unknown = Poi {
        location: m.ds.num_locations(),
        ..poi
    };
    let e = model.embed_poi(&mut tape, &b, &unknown).unwrap();
    assert!(tape.value(e)[..8].iter().all(|&x| x == 0.0));
}

fn set_all(model: &mut Pg2Net, prefix: &str, wi: &[f64], wh: &[f64], b: &[f64]) {
    model.params.get_mut(&format!("{prefix}.w_input")).unwrap().data = wi.to_vec();
    model.params.get_mut(&format!("{prefix}.w_hidden")).unwrap().data = wh.to_vec();
    model.params.get_mut(&format!("{prefix}.bias")).unwrap().data = b.to_vec();
}

#[test]
fn bidirectional_history_matches_scalar_oracle() {
    let m = mini();
    let cfg = ModelConfig {
        user_dim: 1,
        location_dim: 1,
        category_dim: 1,
        time_dim: 1,
        hidden: 1,
        ..ModelConfig::default()
    };
    let loc = pg2net::synth::random_embedding(&m.ds, pg2net::data::Level::Location, 1, 4);
    let cat = pg2net::synth::random_embedding(&m.ds, pg2net::data::Level::Category, 1, 5);
    let mut model = Pg2Net::new(cfg, VocabSizes::of(&m.ds), Variant::Full, Some(&loc), Some(&cat), 2).unwrap();
    let (wi_f, wh_f, b_f) = (
        [0.3, -0.2, 0.5, 0.1, -0.4, 0.2, 0.7, 0.05, -0.3, 0.6, 0.2, -0.1],
        [0.2, -0.5, 0.4, 0.3],
        [0.1, 0.2, -0.1, 0.05],
    );
    let (wi_b, wh_b, b_b) = (
        [-0.1, 0.4, 0.2, 0.3, 0.1, -0.6, 0.2, 0.2, 0.5, -0.2, 0.3, 0.4],
        [0.1, 0.3, -0.2, 0.6],
        [0.0, -0.3, 0.2, 0.1],
    );
    set_all(&mut model, HIST_FWD, &wi_f, &wh_f, &b_f);
    set_all(&mut model, HIST_BWD, &wi_b, &wh_b, &b_b);

    let history = &m.queries[5].history[..4];
    let xs: Vec<Vec<f64>> = history
        .iter()
        .map(|p| {
            vec![
                loc.row(p.location)[0],
                model.params.tensor("time_emb").unwrap().data[p.slot as usize],
                cat.row(p.category.unwrap())[0],
            ]
        })
        .collect();
    let fwd = scalar_lstm(&xs, &wi_f, &wh_f, &b_f);
    let rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
    let mut bwd = scalar_lstm(&rev, &wi_b, &wh_b, &b_b);
    bwd.reverse();

    let mut tape = Tape::new();
    let b = model.params.bind_trainable(&mut tape);
    let hh = model.encode_history(&mut tape, &b, history).unwrap();
    assert_eq!(tape.shape(hh), &[4, 2]);
    let v = tape.value(hh);
    for i in 0..4 {
        assert_abs_diff_eq!(v[2 * i], fwd[i], epsilon = 1e-14);
        assert_abs_diff_eq!(v[2 * i + 1], bwd[i], epsilon = 1e-14);
    }
}

#[test]
fn zero_lstm_params_give_zero_encodings() {
    let m = mini();
    let mut model = mini_model(&m, Variant::Full, 1);
    for p in model.params.iter_mut() {
        if p.name.starts_with(HIST_FWD) || p.name.starts_with(HIST_BWD) || p.name.starts_with("recent") {
            p.tensor.data.fill(0.0);
        }
    }
    let q = &m.queries[3];
    let mut tape = Tape::new();
    let b = model.params.bind_trainable(&mut tape);
    let hh = model.encode_history(&mut tape, &b, &q.history).unwrap();
    assert!(tape.value(hh).iter().all(|&x| x == 0.0));
    let hc = model.encode_recent(&mut tape, &b, &q.recent).unwrap();
    assert_eq!(tape.shape(hc), &[q.recent.len(), 4]);
    assert!(tape.value(hc).iter().all(|&x| x == 0.0));
}

fn with_history(q: &QuerySample, history: Vec<Poi>) -> QuerySample {
    QuerySample { history, ..q.clone() }
}

#[test]
fn attention_on_single_and_identical_history() {
    let m = mini();
    let model = mini_model(&m, Variant::Full, 1);
    let q = &m.queries[2];

    let single = with_history(q, vec![q.history[0]]);
    let out = model.forward(&single, &m.priors).unwrap();
    assert_eq!(out.attention.as_deref(), Some(&[1.0][..]));
    let mut tape = Tape::new();
    let b = model.params.bind_trainable(&mut tape);
    let hh = model.encode_history(&mut tape, &b, &single.history).unwrap();
    assert_eq!(out.p_u.as_deref().unwrap(), tape.value(hh));

    // Attention over hand-computed scores.
    let out = model.forward(q, &m.priors).unwrap();
    let mut tape = Tape::new();
    let b = model.params.bind_trainable(&mut tape);
    let hh = model.encode_history(&mut tape, &b, &q.history).unwrap();
    let rows: Vec<&[f64]> = tape.value(hh).chunks(8).collect();
    let user = model.params.tensor("user_emb").unwrap().row(q.user).unwrap();
    let w = model.params.tensor("w_att").unwrap();
    let query: Vec<f64> = (0..8).map(|j| (0..2).map(|i| user[i] * w.data[i * 8 + j]).sum()).collect();
    let scores: Vec<f64> = rows.iter().map(|r| r.iter().zip(&query).map(|(a, b)| a * b).sum()).collect();
    let mx = scores.iter().cloned().fold(f64::MIN, f64::max);
    let z: f64 = scores.iter().map(|s| (s - mx).exp()).sum();
    let a: Vec<f64> = scores.iter().map(|s| (s - mx).exp() / z).collect();
    let att = out.attention.unwrap();
    for (x, y) in att.iter().zip(&a) {
        assert_abs_diff_eq!(x, y, epsilon = 1e-12);
    }
    let p_u = out.p_u.unwrap();
    for j in 0..8 {
        let expect: f64 = rows.iter().zip(&a).map(|(r, ai)| ai * r[j]).sum();
        assert_abs_diff_eq!(p_u[j], expect, epsilon = 1e-12);
    }
}

#[test]
fn group_vectors_are_prior_weighted_sums() {
    let m = mini();
    let model = mini_model(&m, Variant::Full, 1);
    let q = &m.queries[7];
    let out = model.forward(q, &m.priors).unwrap();
    let mut tape = Tape::new();
    let b = model.params.bind_trainable(&mut tape);
    let hh = model.encode_history(&mut tape, &b, &q.history).unwrap();
    let hc = model.encode_recent(&mut tape, &b, &q.recent).unwrap();
    let (hh, hc) = (tape.value(hh).to_vec(), tape.value(hc).to_vec());

    let check = |seq: &[Poi], m_rows: &[f64], width: usize, got: &[Vec<f64>], total: &[f64]| {
        let w = m.priors.sequence_weights(q.current(), seq).unwrap();
        let alphas = [Some(w.distance), Some(w.time), w.activity];
        let alphas: Vec<Vec<f64>> = alphas.into_iter().flatten().collect();
        assert_eq!(got.len(), alphas.len());
        let mut sum = vec![0.0; width];
        for (alpha, g) in alphas.iter().zip(got) {
            for j in 0..width {
                let e: f64 = alpha.iter().enumerate().map(|(i, a)| a * m_rows[i * width + j]).sum();
                assert_abs_diff_eq!(g[j], e, epsilon = 1e-12);
                sum[j] += e;
            }
        }
        for j in 0..width {
            assert_abs_diff_eq!(total[j], sum[j], epsilon = 1e-12);
        }
    };
    check(&q.history, &hh, 8, &out.group.long, out.p_l.as_deref().unwrap());
    check(&q.recent, &hc, 4, &out.group.short, out.p_s.as_deref().unwrap());
}

#[test]
fn cdr_long_group_has_two_priors() {
    use pg2net::data::{build_queries, Dataset, DatasetMode, QueryConfig, SessionConfig, Split};
    use pg2net::priors::{PriorConfig, PriorSet};
    let records = pg2net::synth::periodic_corpus(&pg2net::synth::PeriodicConfig {
        users: 3,
        locations: 6,
        windows: 6,
        routine_len: 5,
        ..Default::default()
    });
    let (ds, _) = Dataset::preprocess(records, DatasetMode::Cdr, &SessionConfig::default());
    let priors = PriorSet::build(&ds, &PriorConfig::default()).unwrap();
    let cfg = mini_config();
    let loc = pg2net::synth::random_embedding(&ds, pg2net::data::Level::Location, cfg.location_dim, 1);
    let model = Pg2Net::new(cfg, VocabSizes::of(&ds), Variant::Full, Some(&loc), None, 1).unwrap();
    assert!(!model.params.contains(CAT_EMB));
    let q = &build_queries(&ds, Split::Train, &QueryConfig::default())[0];
    let out = model.forward(q, &priors).unwrap();
    assert_eq!(out.group.long.len(), 2);
    assert_eq!(out.group.short.len(), 2);
}

#[test]
fn zero_output_layer_is_uniform() {
    let m = mini();
    let mut model = mini_model(&m, Variant::Full, 3);
    let out = model.forward(&m.queries[0], &m.priors).unwrap();
    let total: f64 = out.log_probs.iter().map(|l| l.exp()).sum();
    assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);

    model.params.get_mut(W_P).unwrap().data.fill(0.0);
    let out = model.forward(&m.queries[0], &m.priors).unwrap();
    for lp in out.log_probs {
        assert_abs_diff_eq!(lp.exp(), 1.0 / 6.0, epsilon = 1e-15);
    }
}

#[test]
fn loss_composition() {
    let m = mini();
    let model = mini_model(&m, Variant::Full, 3);
    let q = &m.queries[4];
    let out = model.forward(q, &m.priors).unwrap();
    let v = model.location_row(q.target.location).unwrap();
    let aux: f64 = v.iter().zip(&out.h_aux).map(|(a, b)| (a - b).powi(2)).sum();
    let expect = -out.log_probs[q.target.location] + 0.1 * aux;
    assert_abs_diff_eq!(sample_loss_value(&model, q, &m.priors).unwrap(), expect, epsilon = 1e-12);

    // ε = 0: plain negative log-likelihood, and the forward pass is unchanged.
    let no_aux = mini_model(&m, Variant::NoAux, 3);
    assert!(no_aux.params.same_values(&model.params));
    let nll = sample_loss_value(&no_aux, q, &m.priors).unwrap();
    assert_eq!(nll, -out.log_probs[q.target.location]);
    assert_eq!(no_aux.forward(q, &m.priors).unwrap().log_probs, out.log_probs);

    // Hand-set head: p_target = 0.25 over 6 classes, ĥ at distance² 4.
    let concat_len = model.concat_dim();
    let lift = (5.0f64 / 3.0).ln();
    let mut w = vec![0.0; 6 * concat_len];
    let user_span = model.layout().into_iter().find(|p| p.part == Part::User).unwrap();
    let u0 = out.concat[user_span.start];
    w[q.target.location * concat_len + user_span.start] = lift / u0;
    let mut waux = vec![0.0; 8 * concat_len];
    for j in 0..8 {
        let shift = if j == 0 { 2.0 } else { 0.0 };
        waux[j * concat_len + user_span.start] = (v[j] + shift) / u0;
    }
    let mut full = model.clone();
    full.params.get_mut(W_P).unwrap().data = w;
    full.params.get_mut(W_AUX).unwrap().data = waux;
    let loss = sample_loss_value(&full, q, &m.priors).unwrap();
    assert_abs_diff_eq!(loss, 4f64.ln() + 0.4, epsilon = 1e-9);
}

#[test]
fn gradients_match_finite_differences() {
    let m = mini();
    for variant in Variant::ALL {
        let mut model = mini_model(&m, variant, 11);
        let q = m.queries[6].clone();
        model.params.zero_grads();
        accumulate_sample(&mut model, &q, &m.priors).unwrap();
        for name in [LOC_EMB, CAT_EMB] {
            assert!(model.params.get(name).unwrap().grad.is_none(), "{name} got a gradient");
        }
        let snapshot = model.clone();
        let report = check_gradients(&mut model.params, 1e-5, 1, |store| {
            let mut mm = snapshot.clone();
            mm.params = store.clone();
            sample_loss_value(&mm, &q, &m.priors)
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{variant}: {report:?}");
    }
}

#[test]
fn frozen_tables_unchanged_by_training() {
    let m = mini();
    let mut model = mini_model(&m, Variant::Full, 1);
    let before = model.params.tensor(LOC_EMB).unwrap().clone();
    let cfg = pg2net::train::TrainConfig {
        epochs: 2,
        learning_rate: 0.05,
        accumulation: 4,
        ..Default::default()
    };
    pg2net::train::fit(&mut model, &m.queries, &[], &m.priors, &cfg).unwrap();
    let after: &Tensor = model.params.tensor(LOC_EMB).unwrap();
    assert_eq!(before.data, after.data);
    assert!(model.params.get(W_P).unwrap().data != mini_model(&m, Variant::Full, 1).params.get(W_P).unwrap().data);
}

#[test]
fn unknown_target_is_rejected_by_loss() {
    let m = mini();
    let model = mini_model(&m, Variant::Full, 1);
    let mut q = m.queries[0].clone();
    q.target.location = m.ds.num_locations();
    assert!(sample_loss_value(&model, &q, &m.priors).is_err());
    assert_eq!(model.log_probs(&q, &m.priors).unwrap().len(), 6);
}

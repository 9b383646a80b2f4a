//! Finite-difference checks for every primitive and model, as named
//! maximum relative errors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scriptenc::classifier::{reweighted_loss, ClassifierHead, LossForm};
use scriptenc::descriptor::{DescriptorConfig, DescriptorData, DescriptorModel};
use scriptenc::encoders::{
    attend, AttentionMode, Channel, EmbeddingTable, EncoderKind, HierarchicalModel, ModelConfig, SceneInput,
    ScriptInput, StatementInput, Variant,
};
use scriptenc::tensor::{BiGru, Graph, ParamStore, Tensor, Var};
use scriptenc::Result;

use super::{check_inputs, check_params, project, values};

pub type Errors = Vec<(String, f64)>;

fn mat(r: usize, c: usize, seed: u64) -> Tensor {
    Tensor::matrix(r, c, values(seed, r * c)).unwrap()
}

fn vec_(n: usize, seed: u64) -> Tensor {
    Tensor::vector(values(seed, n))
}

/// Values bounded away from zero, for relu kinks and sqrt.
fn away_from_zero(n: usize, seed: u64) -> Tensor {
    Tensor::vector(values(seed, n).into_iter().map(|x| x.signum() * (0.2 + x.abs())).collect())
}

fn push(out: &mut Errors, name: &str, err: f64) {
    out.push((name.to_string(), err));
}

pub fn matmul_forms() -> Errors {
    let mut out = Errors::new();
    push(&mut out, "mm", check_inputs(&[mat(3, 4, 1), mat(4, 2, 2)], |g, v| {
        let y = g.matmul(v[0], v[1])?;
        project(g, y, 9)
    }));
    push(&mut out, "mv", check_inputs(&[mat(3, 4, 3), vec_(4, 4)], |g, v| {
        let y = g.matmul(v[0], v[1])?;
        project(g, y, 9)
    }));
    push(&mut out, "vm", check_inputs(&[vec_(3, 5), mat(3, 4, 6)], |g, v| {
        let y = g.matmul(v[0], v[1])?;
        project(g, y, 9)
    }));
    out
}

pub fn elementwise_binary() -> Errors {
    let mut out = Errors::new();
    let ins = [mat(2, 3, 10), mat(2, 3, 11)];
    push(&mut out, "add", check_inputs(&ins, |g, v| {
        let y = g.add(v[0], v[1])?;
        project(g, y, 1)
    }));
    push(&mut out, "sub", check_inputs(&ins, |g, v| {
        let y = g.sub(v[0], v[1])?;
        project(g, y, 2)
    }));
    push(&mut out, "mul", check_inputs(&ins, |g, v| {
        let y = g.mul(v[0], v[1])?;
        project(g, y, 3)
    }));
    push(&mut out, "dot", check_inputs(&[vec_(5, 12), vec_(5, 13)], |g, v| g.dot(v[0], v[1])));
    // the same input on both sides accumulates
    push(&mut out, "mul self", check_inputs(&[vec_(4, 14)], |g, v| {
        let y = g.mul(v[0], v[0])?;
        project(g, y, 4)
    }));
    out
}

pub fn elementwise_unary() -> Errors {
    type Op = fn(&mut Graph, Var) -> Var;
    let ops: [(&str, Op); 6] = [
        ("scale", |g, a| g.scale(a, -1.7)),
        ("sigmoid", |g, a| g.sigmoid(a)),
        ("tanh", |g, a| g.tanh(a)),
        ("relu", |g, a| g.relu(a)),
        ("log_sigmoid", |g, a| g.log_sigmoid(a)),
        ("sqrt", |g, a| g.sqrt(a)),
    ];
    let mut out = Errors::new();
    for (name, op) in ops {
        let input = if name == "sqrt" {
            Tensor::vector(values(20, 6).into_iter().map(|x| x.abs() + 0.3).collect())
        } else {
            away_from_zero(6, 21)
        };
        push(&mut out, name, check_inputs(&[input], |g, v| {
            let y = op(g, v[0]);
            project(g, y, 5)
        }));
    }
    // large magnitudes stay finite and exact
    let big = Tensor::vector(vec![-40.0, -8.0, 8.0, 40.0]);
    push(&mut out, "log_sigmoid tails", check_inputs(&[big], |g, v| {
        let y = g.log_sigmoid(v[0]);
        project(g, y, 6)
    }));
    out
}

pub fn structural() -> Errors {
    let mut out = Errors::new();
    let ins = [vec_(3, 30), vec_(2, 31), vec_(3, 32)];
    push(&mut out, "concat", check_inputs(&ins, |g, v| {
        let y = g.concat(v)?;
        project(g, y, 7)
    }));
    push(&mut out, "stack", check_inputs(&[vec_(3, 33), vec_(3, 34)], |g, v| {
        let y = g.stack(v)?;
        project(g, y, 8)
    }));
    push(&mut out, "slice", check_inputs(&[vec_(6, 35)], |g, v| {
        let y = g.slice(v[0], 2, 3)?;
        project(g, y, 9)
    }));
    push(&mut out, "row", check_inputs(&[mat(3, 4, 36)], |g, v| {
        let y = g.row(v[0], 1)?;
        project(g, y, 10)
    }));
    push(&mut out, "transpose", check_inputs(&[mat(2, 3, 37)], |g, v| {
        let y = g.transpose(v[0])?;
        project(g, y, 11)
    }));
    out
}

pub fn reductions_and_normalizers() -> Errors {
    let mut out = Errors::new();
    push(&mut out, "sum", check_inputs(&[mat(2, 3, 40)], |g, v| {
        let s = g.sum(v[0]);
        g.mul(s, s)
    }));
    push(&mut out, "mean", check_inputs(&[mat(2, 3, 41)], |g, v| {
        let s = g.mean(v[0]);
        g.mul(s, s)
    }));
    push(&mut out, "mean_rows", check_inputs(&[mat(4, 3, 42)], |g, v| {
        let y = g.mean_rows(v[0])?;
        project(g, y, 12)
    }));
    push(&mut out, "softmax", check_inputs(&[vec_(5, 43)], |g, v| {
        let y = g.softmax(v[0])?;
        project(g, y, 13)
    }));
    let positive = Tensor::vector(values(44, 5).into_iter().map(|x| x.abs() + 0.5).collect());
    push(&mut out, "normalize_sum", check_inputs(&[positive], |g, v| {
        let y = g.normalize_sum(v[0])?;
        project(g, y, 14)
    }));
    out
}

pub fn attention_both_modes() -> Errors {
    let mut out = Errors::new();
    push(&mut out, "softmax attention", check_inputs(&[mat(4, 3, 50), vec_(3, 51)], |g, v| {
        let (y, _) = attend(g, v[0], v[1], AttentionMode::Softmax)?;
        project(g, y, 15)
    }));
    // keep the linear normalizer well away from zero
    let cs = Tensor::matrix(3, 2, vec![1.0, 0.4, 0.8, 0.9, 1.2, 0.3]).unwrap();
    push(&mut out, "linear attention", check_inputs(&[cs, Tensor::vector(vec![0.7, 0.5])], |g, v| {
        let (y, _) = attend(g, v[0], v[1], AttentionMode::PaperLinear)?;
        project(g, y, 16)
    }));
    out
}

fn jitter(store: &mut ParamStore, seed: u64) {
    let ids: Vec<_> = store.ids().collect();
    for (k, id) in ids.into_iter().enumerate() {
        let n = store.value(id).len();
        let noise = values(seed + k as u64, n);
        for (x, e) in store.value_mut(id).data_mut().iter_mut().zip(noise) {
            *x += 0.3 * e;
        }
    }
}

pub fn bigru() -> Errors {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = ParamStore::new();
    let gru = BiGru::new(&mut store, "gru", 3, 2, &mut rng);
    jitter(&mut store, 60);
    let xs = mat(4, 3, 61);
    let mut out = Errors::new();
    let err = check_params(&mut store, |g, s| {
        let x = g.constant(xs.clone());
        let out = gru.run(g, s, x)?;
        let all = g.stack(&out.outputs)?;
        let a = project(g, all, 17)?;
        let b = project(g, out.final_state, 18)?;
        g.add(a, b)
    });
    push(&mut out, "bigru params", err);
    let err = check_inputs(&[xs.clone()], |g, v| {
        let out = gru.run(g, &store, v[0])?;
        project(g, out.final_state, 19)
    });
    push(&mut out, "bigru inputs", err);
    out
}

/// Two scenes, mixed action and dialogue, three characters.
pub fn toy_script() -> (ScriptInput, EmbeddingTable) {
    let emb = EmbeddingTable::from_rows(&(0..8).map(|i| if i == 0 { vec![0.0; 4] } else { values(70 + i, 4) }).collect::<Vec<_>>()).unwrap();
    let st = |channel, tokens: &[u32], character| StatementInput {
        channel,
        tokens: tokens.to_vec(),
        character,
    };
    let script = ScriptInput {
        title: "toy".into(),
        scenes: vec![
            SceneInput {
                statements: vec![
                    st(Channel::Action, &[1, 2, 3], None),
                    st(Channel::Dialogue, &[4, 5], Some(1)),
                    st(Channel::Action, &[6, 0, 7], None),
                    st(Channel::Dialogue, &[2, 7, 1], Some(2)),
                ],
                characters: vec![1, 2],
            },
            SceneInput {
                statements: vec![st(Channel::Dialogue, &[3, 3, 5], Some(1)), st(Channel::Action, &[7, 6], None)],
                characters: vec![1],
            },
        ],
    };
    (script, emb)
}

fn model_check(kind: EncoderKind, variant: Variant, characters: bool, attention: AttentionMode) -> f64 {
    let (script, emb) = toy_script();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut store = ParamStore::new();
    let cfg = ModelConfig {
        kind,
        variant,
        characters,
        word_dim: 4,
        hidden_per_direction: 2,
        char_dim: 2,
        attention,
    };
    let model = HierarchicalModel::build(cfg, 3, &mut store, &mut rng).unwrap();
    let head = ClassifierHead::new(&mut store, model.output_dim(), 3, &mut rng);
    jitter(&mut store, 80);
    let y = [1u8, 0, 1];
    let lambda = [0.5, 2.0, 1.0];
    let active = [true; 3];
    check_params(&mut store, |g, s| -> Result<Var> {
        let e = model.encode_script(g, s, &emb, &script)?.embedding;
        let z = head.logits(g, s, e)?;
        reweighted_loss(g, z, &y, &lambda, &active, LossForm::Weighted)
    })
}

pub fn gru_attn_model() -> Errors {
    vec![(
        "gru_attn full + chars".into(),
        model_check(EncoderKind::GruAttn, Variant::Full, true, AttentionMode::Softmax),
    )]
}

pub fn other_models() -> Errors {
    [
        (EncoderKind::Boe, Variant::Full),
        (EncoderKind::BoeAttn, Variant::Han),
        (EncoderKind::Gru, Variant::TwoTier),
        (EncoderKind::GruAttn, Variant::MinusAction),
        (EncoderKind::GruAttn, Variant::MinusDialogue),
    ]
    .into_iter()
    .map(|(kind, variant)| (format!("{kind:?}/{variant:?}"), model_check(kind, variant, false, AttentionMode::Softmax)))
    .collect()
}

pub fn reweighted_loss_forms() -> Errors {
    let y = [1u8, 0, 0, 1, 0, 1];
    let lambda = [0.25, 3.0, 1.0];
    let mut out = Errors::new();
    for form in [LossForm::Weighted, LossForm::Printed] {
        for active in [[true, true, true], [true, false, true]] {
            let err = check_inputs(&[mat(2, 3, 90)], |g, v| reweighted_loss(g, v[0], &y, &lambda, &active, form));
            push(&mut out, &format!("{form:?} {active:?}"), err);
        }
    }
    out
}

pub fn descriptor_loss() -> Errors {
    let d = 4;
    let k = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let r0: Vec<Vec<f64>> = (0..k).map(|i| values(100 + i as u64, d)).collect();
    let mut out = Errors::new();
    for recurrent in [true, false] {
        let cfg = DescriptorConfig {
            k,
            hidden: 5,
            lambda: 0.7,
            negatives: 2,
            recurrent,
            ..DescriptorConfig::default()
        };
        let mut store = ParamStore::new();
        let model = DescriptorModel::new(cfg, d, &r0, &mut store, &mut rng).unwrap();
        jitter(&mut store, 110);
        let scenes: Vec<Vec<f64>> = (0..4).map(|i| values(120 + i, d)).collect();
        let data = DescriptorData {
            title: "toy".into(),
            v: scenes.clone(),
            u: scenes,
        };
        let negatives = vec![vec![1, 2], vec![0, 3], vec![3, 1], vec![0, 2]];
        let err = check_params(&mut store, |g, s| Ok(model.script_loss(g, s, &data, &negatives)?.0));
        push(&mut out, &format!("descriptor recurrent={recurrent}"), err);
    }
    out
}

/// Every check above.
pub fn all() -> Errors {
    [
        matmul_forms(),
        elementwise_binary(),
        elementwise_unary(),
        structural(),
        reductions_and_normalizers(),
        attention_both_modes(),
        bigru(),
        gru_attn_model(),
        other_models(),
        reweighted_loss_forms(),
        descriptor_loss(),
    ]
    .concat()
}

#![allow(dead_code)]

pub mod golden;
pub mod grad;
pub mod oracle;

use scriptenc::tensor::{Graph, ParamStore, Tensor, Var};
use scriptenc::Result;

pub const H: f64 = 1e-5;
pub const TOL: f64 = 1e-4;

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Max relative error between tape gradients and central differences
/// with respect to free inputs. `f` must return a one-element root.
pub fn check_inputs(inputs: &[Tensor], f: impl Fn(&mut Graph, &[Var]) -> Result<Var>) -> f64 {
    let eval = |ts: &[Tensor]| {
        let mut g = Graph::new();
        let vs: Vec<Var> = ts.iter().map(|t| g.input(t.clone())).collect();
        let root = f(&mut g, &vs).expect("forward");
        g.value(root).item()
    };
    let mut g = Graph::new();
    let vs: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
    let root = f(&mut g, &vs).expect("forward");
    g.backward(root).expect("backward");
    let mut worst: f64 = 0.0;
    for (k, t) in inputs.iter().enumerate() {
        let analytic = g.grad(vs[k]).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.len()]);
        for i in 0..t.len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += H;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= H;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * H);
            worst = worst.max(rel_err(analytic[i], numeric));
        }
    }
    worst
}

/// Same check with respect to every parameter in `store`.
pub fn check_params(store: &mut ParamStore, f: impl Fn(&mut Graph, &ParamStore) -> Result<Var>) -> f64 {
    let eval = |s: &ParamStore| {
        let mut g = Graph::new();
        let root = f(&mut g, s).expect("forward");
        g.value(root).item()
    };
    store.zero_grads();
    let mut g = Graph::new();
    let root = f(&mut g, store).expect("forward");
    g.backward(root).expect("backward");
    g.accumulate_param_grads(store);
    let ids: Vec<_> = store.ids().collect();
    let mut worst: f64 = 0.0;
    for id in ids {
        let analytic = store.grad(id).to_vec();
        for (i, &a) in analytic.iter().enumerate() {
            let orig = store.value(id).data()[i];
            store.value_mut(id).data_mut()[i] = orig + H;
            let up = eval(store);
            store.value_mut(id).data_mut()[i] = orig - H;
            let down = eval(store);
            store.value_mut(id).data_mut()[i] = orig;
            worst = worst.max(rel_err(a, (up - down) / (2.0 * H)));
        }
    }
    worst
}

/// Deterministic values in `[-1, 1)` from a simple LCG, for fixtures.
pub fn values(seed: u64, n: usize) -> Vec<f64> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect()
}

/// Project a tensor onto a one-element root with fixed weights, so
/// vector outputs can be checked.
pub fn project(g: &mut Graph, v: Var, seed: u64) -> Result<Var> {
    let shape = g.value(v).shape().to_vec();
    let n = g.value(v).len();
    let c = g.constant(Tensor::new(shape, values(seed, n))?);
    let p = g.mul(v, c)?;
    Ok(g.sum(p))
}

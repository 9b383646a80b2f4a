//! Gated recurrent unit, unidirectional and bidirectional.
//!
//! Gate equations (gate rows stacked as update `z`, reset `r`, candidate):
//!
//! ```text
//! z  = σ(W_z x + U_z h + b_z)
//! r  = σ(W_r x + U_r h + b_r)
//! h~ = tanh(W_h x + U_h (r ∘ h) + b_h)
//! h' = (1 − z) ∘ h + z ∘ h~
//! ```
//!
//! `W` is stored as one `[3H, in]` matrix, `U_z`/`U_r` as one `[2H, H]`
//! matrix, `U_h` as `[H, H]` and the biases as one `[3H]` vector.

use rand::Rng;

use super::{Graph, ParamId, ParamStore, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w: ParamId,
    pub u_zr: ParamId,
    pub u_h: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl GruParams {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            w: store.add_glorot(
                format!("{prefix}.w"),
                &[3 * hidden, input],
                Some((input, hidden)),
                rng,
            ),
            u_zr: store.add_glorot(
                format!("{prefix}.u_zr"),
                &[2 * hidden, hidden],
                Some((hidden, hidden)),
                rng,
            ),
            u_h: store.add_glorot(format!("{prefix}.u_h"), &[hidden, hidden], None, rng),
            b: store.add_zeros(format!("{prefix}.b"), &[3 * hidden]),
            input,
            hidden,
        }
    }

    /// One step from a pre-projected input `W x` (length `3H`).
    fn step(&self, g: &mut Graph, store: &ParamStore, wx: Var, h: Var) -> Result<Var> {
        let hsz = self.hidden;
        let (u_zr, u_h, b) = (
            g.param(store, self.u_zr),
            g.param(store, self.u_h),
            g.param(store, self.b),
        );
        let a = g.add(wx, b)?;
        let a_zr = g.slice(a, 0, 2 * hsz)?;
        let a_h = g.slice(a, 2 * hsz, hsz)?;
        let uh = g.matmul(u_zr, h)?;
        let pre_zr = g.add(a_zr, uh)?;
        let zr = g.sigmoid(pre_zr);
        let z = g.slice(zr, 0, hsz)?;
        let r = g.slice(zr, hsz, hsz)?;
        let rh = g.mul(r, h)?;
        let urh = g.matmul(u_h, rh)?;
        let pre_c = g.add(a_h, urh)?;
        let cand = g.tanh(pre_c);
        let delta = g.sub(cand, h)?;
        let zd = g.mul(z, delta)?;
        g.add(h, zd)
    }

    /// A single GRU cell update.
    pub fn cell(&self, g: &mut Graph, store: &ParamStore, x: Var, h_prev: Var) -> Result<Var> {
        let xs = g.value(x).shape().to_vec();
        if xs != [self.input] {
            return Err(Error::ShapeMismatch {
                op: "gru_cell",
                left: xs,
                right: vec![self.input],
            });
        }
        let w = g.param(store, self.w);
        let wx = g.matmul(w, x)?;
        self.step(g, store, wx, h_prev)
    }

    /// Run over the rows of `xs` (`[T, in]`) from a zero state. Hidden
    /// states are returned in input order; with `reverse` the recurrence
    /// runs from the last row to the first.
    pub fn run(&self, g: &mut Graph, store: &ParamStore, xs: Var, reverse: bool) -> Result<Vec<Var>> {
        let shape = g.value(xs).shape().to_vec();
        if shape.len() != 2 || shape[1] != self.input {
            return Err(Error::ShapeMismatch {
                op: "gru",
                left: shape,
                right: vec![0, self.input],
            });
        }
        let t_len = shape[0];
        if t_len == 0 {
            return Err(Error::EmptySequence("gru"));
        }
        let w = g.param(store, self.w);
        let wt = g.transpose(w)?;
        let proj = g.matmul(xs, wt)?;
        let mut h = g.constant(Tensor::zeros(&[self.hidden]));
        let mut states = vec![h; t_len];
        let order: Box<dyn Iterator<Item = usize>> = if reverse {
            Box::new((0..t_len).rev())
        } else {
            Box::new(0..t_len)
        };
        for t in order {
            let wx = g.row(proj, t)?;
            h = self.step(g, store, wx, h)?;
            states[t] = h;
        }
        Ok(states)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiGru {
    pub forward: GruParams,
    pub backward: GruParams,
}

#[derive(Debug, Clone)]
pub struct BiGruOutput {
    /// `c_t = [forward h_t ; backward h_t]` for every position.
    pub outputs: Vec<Var>,
    /// Final state of each direction: `[forward h_T ; backward h_1]`.
    pub final_state: Var,
}

impl BiGru {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            forward: GruParams::new(store, &format!("{prefix}.fwd"), input, hidden, rng),
            backward: GruParams::new(store, &format!("{prefix}.bwd"), input, hidden, rng),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.forward.hidden + self.backward.hidden
    }

    pub fn run(&self, g: &mut Graph, store: &ParamStore, xs: Var) -> Result<BiGruOutput> {
        let fwd = self.forward.run(g, store, xs, false)?;
        let bwd = self.backward.run(g, store, xs, true)?;
        let outputs = fwd
            .iter()
            .zip(&bwd)
            .map(|(&f, &b)| g.concat(&[f, b]))
            .collect::<Result<Vec<_>>>()?;
        let final_state = g.concat(&[*fwd.last().expect("non-empty"), bwd[0]])?;
        Ok(BiGruOutput {
            outputs,
            final_state,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_parameters_keep_zero_state() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = GruParams::new(&mut store, "g", 4, 3, &mut rng);
        for id in [p.w, p.u_zr, p.u_h, p.b] {
            store.value_mut(id).data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let mut g = Graph::new();
        let x = g.constant(Tensor::vector(vec![0.7, -1.2, 3.0, 0.1]));
        let h0 = g.constant(Tensor::zeros(&[3]));
        let h1 = p.cell(&mut g, &store, x, h0).unwrap();
        assert_eq!(g.value(h1).data(), &[0.0; 3]);

        // z = 0.5 and h~ = 0, so a nonzero state halves.
        let hp = g.constant(Tensor::vector(vec![1.0, -2.0, 4.0]));
        let h2 = p.cell(&mut g, &store, x, hp).unwrap();
        assert_eq!(g.value(h2).data(), &[0.5, -1.0, 2.0]);
    }

    #[test]
    fn bidirectional_output_is_100_wide() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bi = BiGru::new(&mut store, "bi", 100, 50, &mut rng);
        let mut g = Graph::new();
        let xs = g.constant(Tensor::matrix(1, 100, vec![0.1; 100]).unwrap());
        let out = bi.run(&mut g, &store, xs).unwrap();
        assert_eq!(out.outputs.len(), 1);
        assert_eq!(g.value(out.outputs[0]).len(), 100);
        assert_eq!(g.value(out.final_state).len(), 100);
        // T = 1: the final state is the only output
        assert_eq!(g.value(out.final_state), g.value(out.outputs[0]));
    }

    #[test]
    fn empty_sequence_is_an_error() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = GruParams::new(&mut store, "g", 2, 2, &mut rng);
        let mut g = Graph::new();
        let xs = g.constant(Tensor::new(vec![0, 2], vec![]).unwrap());
        assert!(matches!(
            p.run(&mut g, &store, xs, false),
            Err(Error::EmptySequence(_))
        ));
    }
}

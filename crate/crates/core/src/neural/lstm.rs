//! LSTM layer: parameter registration and the tape-level recurrence.

use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Init, ParamId, ParamStore, Tape, Tensor, Var};
use crate::scalar::Scalar;

pub const LSTM_HIDDEN: usize = 128;

/// Handles for one LSTM layer's parameters: per gate (input i, forget f,
/// output o, candidate c) an input matrix `W [H, d]`, a recurrent matrix
/// `U [H, H]`, and a bias `b [H]`.
#[derive(Debug, Clone, Copy)]
pub struct LstmLayer {
    pub input_dim: usize,
    pub hidden: usize,
    wi: ParamId,
    ui: ParamId,
    bi: ParamId,
    wf: ParamId,
    uf: ParamId,
    bf: ParamId,
    wo: ParamId,
    uo: ParamId,
    bo: ParamId,
    wc: ParamId,
    uc: ParamId,
    bc: ParamId,
}

impl LstmLayer {
    /// Register all twelve tensors under `<prefix>_<gate><kind>` names.
    /// Weights are Glorot-initialized; biases start at zero except the forget
    /// bias, which starts at +1 so early training does not erase state.
    pub fn register<S: Scalar>(
        store: &mut ParamStore<S>,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        rng: &mut ChaCha8Rng,
    ) -> LstmLayer {
        let w_init = Init::GlorotUniform { fan_in: input_dim, fan_out: hidden };
        let u_init = Init::GlorotUniform { fan_in: hidden, fan_out: hidden };
        let mut gate = |g: char, bias: Init| {
            let w = store.register(&format!("{prefix}_w{g}"), &[hidden, input_dim], w_init, rng);
            let u = store.register(&format!("{prefix}_u{g}"), &[hidden, hidden], u_init, rng);
            let b = store.register(&format!("{prefix}_b{g}"), &[hidden], bias, rng);
            (w, u, b)
        };
        let (wi, ui, bi) = gate('i', Init::Zeros);
        let (wf, uf, bf) = gate('f', Init::Constant(1.0));
        let (wo, uo, bo) = gate('o', Init::Zeros);
        let (wc, uc, bc) = gate('c', Init::Zeros);
        LstmLayer { input_dim, hidden, wi, ui, bi, wf, uf, bf, wo, uo, bo, wc, uc, bc }
    }

    /// Copy the layer's parameters onto `tape` for one forward pass.
    pub fn place<S: Scalar>(&self, tape: &mut Tape<S>, store: &ParamStore<S>) -> PlacedLstm {
        let mut v = |id: ParamId| store.var(tape, id);
        PlacedLstm {
            hidden: self.hidden,
            wi: v(self.wi),
            ui: v(self.ui),
            bi: v(self.bi),
            wf: v(self.wf),
            uf: v(self.uf),
            bf: v(self.bf),
            wo: v(self.wo),
            uo: v(self.uo),
            bo: v(self.bo),
            wc: v(self.wc),
            uc: v(self.uc),
            bc: v(self.bc),
        }
    }
}

/// One layer's parameters as tape leaves, ready to run the recurrence.
#[derive(Debug, Clone, Copy)]
pub struct PlacedLstm {
    hidden: usize,
    wi: Var,
    ui: Var,
    bi: Var,
    wf: Var,
    uf: Var,
    bf: Var,
    wo: Var,
    uo: Var,
    bo: Var,
    wc: Var,
    uc: Var,
    bc: Var,
}

impl PlacedLstm {
    fn gate<S: Scalar>(
        &self,
        tape: &mut Tape<S>,
        w: Var,
        u: Var,
        b: Var,
        x: Var,
        h: Var,
    ) -> Var {
        let wx = tape.matmul(w, x);
        let uh = tape.matmul(u, h);
        let s = tape.add(wx, uh);
        tape.add(s, b)
    }

    /// One step of the standard recurrence; `x` is `[input_dim]`, `h`/`c` are
    /// `[hidden]`. Returns the new `(h, c)`.
    pub fn step<S: Scalar>(&self, tape: &mut Tape<S>, x: Var, h: Var, c: Var) -> (Var, Var) {
        let zi = self.gate(tape, self.wi, self.ui, self.bi, x, h);
        let i = tape.sigmoid(zi);
        let zf = self.gate(tape, self.wf, self.uf, self.bf, x, h);
        let f = tape.sigmoid(zf);
        let zo = self.gate(tape, self.wo, self.uo, self.bo, x, h);
        let o = tape.sigmoid(zo);
        let zc = self.gate(tape, self.wc, self.uc, self.bc, x, h);
        let g = tape.tanh(zc);

        let keep = tape.mul(f, c);
        let write = tape.mul(i, g);
        let c_new = tape.add(keep, write);
        let ct = tape.tanh(c_new);
        let h_new = tape.mul(o, ct);
        (h_new, c_new)
    }

    /// Run over `columns[0..n_real]` from zero initial state and return the
    /// hidden state after every real step. Columns beyond `n_real` are
    /// padding: they are never touched, so the recurrence is exactly as if
    /// they were absent.
    pub fn run<S: Scalar>(
        &self,
        tape: &mut Tape<S>,
        columns: &[Var],
        n_real: usize,
    ) -> Vec<Var> {
        assert!(n_real >= 1, "lstm needs at least one real step");
        assert!(
            n_real <= columns.len(),
            "n_real {} exceeds {} provided columns",
            n_real,
            columns.len()
        );
        let mut h = tape.constant(Tensor::zeros(&[self.hidden]));
        let mut c = tape.constant(Tensor::zeros(&[self.hidden]));
        let mut hs = Vec::with_capacity(n_real);
        for &x in &columns[..n_real] {
            let (h2, c2) = self.step(tape, x, h, c);
            h = h2;
            c = c2;
            hs.push(h);
        }
        hs
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};

    use crate::autodiff::gradcheck::{check, GradCheck};

    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn zero_parameters_keep_hidden_state_at_zero() {
        let mut store: ParamStore<f64> = ParamStore::new();
        let layer = LstmLayer::register(&mut store, "l", 3, 4, &mut rng(0));
        // Overwrite every tensor (including the +1 forget bias) with zeros.
        let ids: Vec<_> = store.iter().map(|(id, _, _)| id).collect();
        for id in ids {
            for v in store.value_mut(id).data_mut() {
                *v = 0.0;
            }
        }
        let mut tape: Tape<f64> = Tape::new();
        let placed = layer.place(&mut tape, &store);
        let cols: Vec<Var> = (0..5)
            .map(|i| tape.constant(Tensor::vector(vec![i as f64, -1.0, 2.5])))
            .collect();
        let hs = placed.run(&mut tape, &cols, 5);
        for h in hs {
            assert_eq!(tape.value(h).data(), &[0.0; 4]);
        }
    }

    /// Single step against the gate equations evaluated with plain arithmetic.
    #[test]
    fn one_step_matches_hand_evaluation() {
        let (d, hd) = (2, 2);
        let mut store: ParamStore<f64> = ParamStore::new();
        let layer = LstmLayer::register(&mut store, "l", d, hd, &mut rng(3));
        // Deterministic non-trivial values for every tensor.
        let ids: Vec<_> = store.iter().map(|(id, _, _)| id).collect();
        let mut counter = 0.0;
        for id in &ids {
            for v in store.value_mut(*id).data_mut() {
                counter += 0.1;
                *v = (counter % 1.7) - 0.8;
            }
        }
        let x = [0.3, -0.6];

        let sigma = |z: f64| 1.0 / (1.0 + (-z).exp());
        let dense = |w: &[f64], b: &[f64]| {
            // h0 = 0, so only W x + b contributes.
            let mut out = [0.0; 2];
            for i in 0..hd {
                out[i] = b[i] + w[i * d] * x[0] + w[i * d + 1] * x[1];
            }
            out
        };
        let grab = |name: &str| store.value(store.id(name).unwrap()).data().to_vec();
        let zi = dense(&grab("l_wi"), &grab("l_bi"));
        let zf = dense(&grab("l_wf"), &grab("l_bf"));
        let zo = dense(&grab("l_wo"), &grab("l_bo"));
        let zc = dense(&grab("l_wc"), &grab("l_bc"));
        let mut expect_h = [0.0; 2];
        for j in 0..hd {
            // c0 = 0: c = i * g, h = o * tanh(c).
            let c = sigma(zi[j]) * zc[j].tanh();
            expect_h[j] = sigma(zo[j]) * c.tanh();
        }

        let mut tape: Tape<f64> = Tape::new();
        let placed = layer.place(&mut tape, &store);
        let col = tape.constant(Tensor::vector(x.to_vec()));
        let hs = placed.run(&mut tape, &[col], 1);
        let got = tape.value(hs[0]).data();
        for (g, e) in got.iter().zip(expect_h.iter()) {
            assert!((g - e).abs() < 1e-12, "got {got:?}, expected {expect_h:?}");
        }
    }

    #[test]
    fn forget_bias_defaults_to_one() {
        let mut store: ParamStore<f64> = ParamStore::new();
        LstmLayer::register(&mut store, "l", 3, 4, &mut rng(0));
        assert_eq!(store.value(store.id("l_bf").unwrap()).data(), &[1.0; 4]);
        assert_eq!(store.value(store.id("l_bi").unwrap()).data(), &[0.0; 4]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut store: ParamStore<f64> = ParamStore::new();
        let layer = LstmLayer::register(&mut store, "l", 3, 4, &mut rng(9));
        let mut data_rng = rng(10);
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..3).map(|_| data_rng.random_range(-1.0..1.0)).collect())
            .collect();

        let report = check(&GradCheck::default(), &mut store, |store, tape| {
            let placed = layer.place(tape, store);
            let vars: Vec<Var> = cols
                .iter()
                .map(|c| tape.constant(Tensor::vector(c.clone())))
                .collect();
            let hs = placed.run(tape, &vars, 3);
            tape.sum(*hs.last().unwrap())
        });
        assert!(report.passed(), "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn padding_columns_are_ignored() {
        let mut store: ParamStore<f64> = ParamStore::new();
        let layer = LstmLayer::register(&mut store, "l", 2, 3, &mut rng(4));

        let run = |pad: usize| {
            let mut tape: Tape<f64> = Tape::new();
            let placed = layer.place(&mut tape, &store);
            let mut cols = vec![
                tape.constant(Tensor::vector(vec![0.5, -1.0])),
                tape.constant(Tensor::vector(vec![2.0, 0.25])),
            ];
            for _ in 0..pad {
                cols.push(tape.constant(Tensor::vector(vec![777.0, -777.0])));
            }
            let hs = placed.run(&mut tape, &cols, 2);
            tape.value(*hs.last().unwrap()).data().to_vec()
        };
        assert_eq!(run(0), run(3));
    }
}

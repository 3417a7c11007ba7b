//! Hierarchical document encoder: a word-level bi-directional GRU per
//! paragraph and a paragraph-level bi-directional GRU over the paragraph
//! embeddings. Paragraph states are the concatenated forward/backward
//! hidden states, so they carry 2H dimensions for hidden size H.

use crate::params::{Graph, ParamId, ParamStore};
use crate::tensor::{Rng, TensorId};

/// One GRU direction: update gate z, reset gate r, candidate state.
///
/// h' = (1-z) . h + z . tanh(Wh x + Uh (r . h) + bh)
#[derive(Debug, Clone)]
pub struct GruCell {
    pub input_size: usize,
    pub hidden_size: usize,
    wz: ParamId,
    uz: ParamId,
    bz: ParamId,
    wr: ParamId,
    ur: ParamId,
    br: ParamId,
    wh: ParamId,
    uh: ParamId,
    bh: ParamId,
}

impl GruCell {
    pub fn init(
        store: &mut ParamStore,
        prefix: &str,
        input_size: usize,
        hidden_size: usize,
        rng: &mut Rng,
    ) -> Self {
        let mat = |store: &mut ParamStore, rng: &mut Rng, name: &str| {
            store.init_uniform(&format!("{prefix}.{name}"), &[hidden_size, input_size], rng)
        };
        let rec = |store: &mut ParamStore, rng: &mut Rng, name: &str| {
            store.init_uniform(&format!("{prefix}.{name}"), &[hidden_size, hidden_size], rng)
        };
        let bias = |store: &mut ParamStore, rng: &mut Rng, name: &str| {
            store.init_uniform(&format!("{prefix}.{name}"), &[hidden_size], rng)
        };
        GruCell {
            input_size,
            hidden_size,
            wz: mat(store, rng, "wz"),
            uz: rec(store, rng, "uz"),
            bz: bias(store, rng, "bz"),
            wr: mat(store, rng, "wr"),
            ur: rec(store, rng, "ur"),
            br: bias(store, rng, "br"),
            wh: mat(store, rng, "wh"),
            uh: rec(store, rng, "uh"),
            bh: bias(store, rng, "bh"),
        }
    }

    fn gate(
        &self,
        g: &mut Graph,
        w: ParamId,
        u: ParamId,
        b: ParamId,
        x: TensorId,
        h: TensorId,
    ) -> TensorId {
        let (w, u, b) = (g.param(w), g.param(u), g.param(b));
        let wx = g.tape.matvec(w, x);
        let uh = g.tape.matvec(u, h);
        let s = g.tape.add(wx, uh);
        g.tape.add(s, b)
    }

    /// One recurrence step.
    pub fn step(&self, g: &mut Graph, x: TensorId, h_prev: TensorId) -> TensorId {
        let z_pre = self.gate(g, self.wz, self.uz, self.bz, x, h_prev);
        let z = g.tape.sigmoid(z_pre);
        let r_pre = self.gate(g, self.wr, self.ur, self.br, x, h_prev);
        let r = g.tape.sigmoid(r_pre);

        let rh = g.tape.mul(r, h_prev);
        let wh = g.param(self.wh);
        let uh = g.param(self.uh);
        let bh = g.param(self.bh);
        let wx = g.tape.matvec(wh, x);
        let urh = g.tape.matvec(uh, rh);
        let pre = g.tape.add(wx, urh);
        let pre = g.tape.add(pre, bh);
        let cand = g.tape.tanh(pre);

        let keep = g.tape.affine(z, -1.0, 1.0); // 1 - z
        let a = g.tape.mul(keep, h_prev);
        let b = g.tape.mul(z, cand);
        g.tape.add(a, b)
    }

    /// Run over a sequence from a zero initial state, returning all states.
    pub fn run(&self, g: &mut Graph, inputs: &[TensorId]) -> Vec<TensorId> {
        let mut h = g.tape.zeros(vec![self.hidden_size]);
        let mut states = Vec::with_capacity(inputs.len());
        for &x in inputs {
            h = self.step(g, x, h);
            states.push(h);
        }
        states
    }
}

/// Forward/backward states of one bi-directional pass, plus their
/// concatenations (indexed by sequence position).
pub struct BiStates {
    pub fwd: Vec<TensorId>,
    pub bwd: Vec<TensorId>,
    pub states: Vec<TensorId>,
}

pub fn bi_gru(g: &mut Graph, fwd_cell: &GruCell, bwd_cell: &GruCell, inputs: &[TensorId]) -> BiStates {
    assert!(!inputs.is_empty(), "bi_gru requires a non-empty sequence");
    let fwd = fwd_cell.run(g, inputs);
    let reversed: Vec<TensorId> = inputs.iter().rev().copied().collect();
    let mut bwd = bwd_cell.run(g, &reversed);
    bwd.reverse(); // index by original position
    let states = fwd
        .iter()
        .zip(&bwd)
        .map(|(&f, &b)| g.tape.concat(&[f, b]))
        .collect();
    BiStates { fwd, bwd, states }
}

/// Word-level encoding of one paragraph: per-word states plus the paragraph
/// embedding [fwd last || bwd first].
pub fn encode_paragraph(
    g: &mut Graph,
    fwd_cell: &GruCell,
    bwd_cell: &GruCell,
    word_embeddings: &[TensorId],
) -> (Vec<TensorId>, TensorId) {
    assert!(!word_embeddings.is_empty(), "empty paragraph");
    let bi = bi_gru(g, fwd_cell, bwd_cell, word_embeddings);
    let r = g.tape.concat(&[*bi.fwd.last().unwrap(), bi.bwd[0]]);
    (bi.states, r)
}

/// Paragraph-level encoding over the paragraph embeddings.
pub fn encode_document(
    g: &mut Graph,
    fwd_cell: &GruCell,
    bwd_cell: &GruCell,
    paragraph_embeddings: &[TensorId],
) -> Vec<TensorId> {
    bi_gru(g, fwd_cell, bwd_cell, paragraph_embeddings).states
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Real, Tape};

    fn store_with_cell(
        input: usize,
        hidden: usize,
        fill: impl Fn(&str, usize) -> Real,
    ) -> (ParamStore, GruCell) {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(0);
        let cell = GruCell::init(&mut store, "c", input, hidden, &mut rng);
        let names: Vec<String> = store.iter().map(|(_, p)| p.name.clone()).collect();
        for name in names {
            let id = store.id_of(&name).unwrap();
            let n = store.get(id).data.len();
            let data: Vec<Real> = (0..n).map(|i| fill(&name, i)).collect();
            *store.data_mut(id) = data;
        }
        (store, cell)
    }

    #[test]
    fn zero_weights_halve_previous_state() {
        let (store, cell) = store_with_cell(2, 3, |_, _| 0.0);
        let mut tape = Tape::new();
        let mut g = Graph::new(&mut tape, &store);
        let x = g.tape.leaf(vec![1.0, -2.0], vec![2]);
        let h = g.tape.leaf(vec![0.4, -0.6, 1.0], vec![3]);
        let out = cell.step(&mut g, x, h);
        // z = r = 0.5, candidate = 0 -> h' = 0.5 h
        for (o, e) in tape.value(out).iter().zip(&[0.2, -0.3, 0.5]) {
            assert!((o - e).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_state_and_weights_stay_zero() {
        let (store, cell) = store_with_cell(2, 3, |_, _| 0.0);
        let mut tape = Tape::new();
        let mut g = Graph::new(&mut tape, &store);
        let x = g.tape.leaf(vec![5.0, 7.0], vec![2]);
        let h = g.tape.zeros(vec![3]);
        let out = cell.step(&mut g, x, h);
        assert_eq!(tape.value(out), &[0.0, 0.0, 0.0]);
    }

    fn sigmoid(x: Real) -> Real {
        1.0 / (1.0 + (-x).exp())
    }

    /// Independent scalar trace of the gate formulas.
    fn scalar_gru(w: &[Real; 9], x: Real, h: Real) -> Real {
        let [wz, uz, bz, wr, ur, br, wh, uh, bh] = *w;
        let z = sigmoid(wz * x + uz * h + bz);
        let r = sigmoid(wr * x + ur * h + br);
        let cand = (wh * x + uh * (r * h) + bh).tanh();
        (1.0 - z) * h + z * cand
    }

    #[test]
    fn diagonal_weights_match_scalar_trace() {
        // 2-dim cell with diagonal weights decouples into two scalar GRUs.
        let w0: [Real; 9] = [0.3, -0.2, 0.1, 0.5, 0.4, -0.3, -0.6, 0.2, 0.05];
        let w1: [Real; 9] = [-0.4, 0.6, -0.1, 0.2, -0.5, 0.3, 0.7, -0.2, -0.05];
        let (store, cell) = store_with_cell(2, 2, move |name, i| {
            let pick = |k: usize| if i == 0 { w0[k] } else { w1[k] };
            let diag = |k: usize| match i {
                0 => w0[k],
                3 => w1[k],
                _ => 0.0,
            };
            match name {
                "c.wz" => diag(0),
                "c.uz" => diag(1),
                "c.bz" => pick(2),
                "c.wr" => diag(3),
                "c.ur" => diag(4),
                "c.br" => pick(5),
                "c.wh" => diag(6),
                "c.uh" => diag(7),
                "c.bh" => pick(8),
                _ => unreachable!(),
            }
        });
        let mut tape = Tape::new();
        let mut g = Graph::new(&mut tape, &store);
        let x = g.tape.leaf(vec![0.9, -0.3], vec![2]);
        let h = g.tape.leaf(vec![0.2, 0.6], vec![2]);
        let out = cell.step(&mut g, x, h);
        let expect = [scalar_gru(&w0, 0.9, 0.2), scalar_gru(&w1, -0.3, 0.6)];
        for (o, e) in tape.value(out).iter().zip(&expect) {
            assert!((o - e).abs() < 1e-12, "{o} vs {e}");
        }
    }

    fn two_random_cells(input: usize, hidden: usize, seed: u64) -> (ParamStore, GruCell, GruCell) {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(seed);
        let f = GruCell::init(&mut store, "f", input, hidden, &mut rng);
        let b = GruCell::init(&mut store, "b", input, hidden, &mut rng);
        (store, f, b)
    }

    #[test]
    fn single_token_paragraph_embedding_equals_word_state() {
        let (store, f, b) = two_random_cells(2, 3, 42);
        let mut tape = Tape::new();
        let mut g = Graph::new(&mut tape, &store);
        let w = g.tape.leaf(vec![0.3, -0.5], vec![2]);
        let (states, r) = encode_paragraph(&mut g, &f, &b, &[w]);
        assert_eq!(tape.value(states[0]), tape.value(r));
    }

    #[test]
    fn reversing_tokens_swaps_directional_roles() {
        let (store, f, b) = two_random_cells(1, 2, 7);
        let mut tape = Tape::new();
        let mut g = Graph::new(&mut tape, &store);
        let toks: Vec<TensorId> = [0.1, -0.7, 0.4]
            .iter()
            .map(|&v| g.tape.leaf(vec![v], vec![1]))
            .collect();
        let (_, r_ab) = encode_paragraph(&mut g, &f, &b, &toks);
        let rev: Vec<TensorId> = toks.iter().rev().copied().collect();
        let (_, r_ba) = encode_paragraph(&mut g, &b, &f, &rev);
        let fwd_half = &tape.value(r_ab)[..2];
        let bwd_half = &tape.value(r_ab)[2..];
        assert_eq!(&tape.value(r_ba)[..2], bwd_half);
        assert_eq!(&tape.value(r_ba)[2..], fwd_half);
    }

    #[test]
    fn three_token_paragraph_matches_scalar_trace() {
        let wf: [Real; 9] = [0.2, -0.1, 0.05, 0.4, 0.3, -0.2, -0.5, 0.1, 0.0];
        let wb: [Real; 9] = [-0.3, 0.5, -0.05, 0.1, -0.4, 0.25, 0.6, -0.15, 0.1];
        let mut store = ParamStore::new();
        let mut rng = Rng::new(0);
        let f = GruCell::init(&mut store, "f", 1, 1, &mut rng);
        let b = GruCell::init(&mut store, "b", 1, 1, &mut rng);
        let fields = ["wz", "uz", "bz", "wr", "ur", "br", "wh", "uh", "bh"];
        for (i, field) in fields.iter().enumerate() {
            *store.data_mut(store.id_of(&format!("f.{field}")).unwrap()) = vec![wf[i]];
            *store.data_mut(store.id_of(&format!("b.{field}")).unwrap()) = vec![wb[i]];
        }
        let xs = [0.7, -0.2, 0.9];
        let mut tape = Tape::new();
        let mut g = Graph::new(&mut tape, &store);
        let toks: Vec<TensorId> = xs.iter().map(|&v| g.tape.leaf(vec![v], vec![1])).collect();
        let (_, r) = encode_paragraph(&mut g, &f, &b, &toks);

        let mut hf = 0.0;
        for &x in &xs {
            hf = scalar_gru(&wf, x, hf);
        }
        let mut hb = 0.0;
        for &x in xs.iter().rev() {
            hb = scalar_gru(&wb, x, hb);
        }
        let got = tape.value(r);
        assert!((got[0] - hf).abs() < 1e-12);
        assert!((got[1] - hb).abs() < 1e-12);
    }

    #[test]
    fn document_encoding_is_order_sensitive() {
        let (store, f, b) = two_random_cells(2, 2, 13);
        let mut tape = Tape::new();
        let mut g = Graph::new(&mut tape, &store);
        let r1 = g.tape.leaf(vec![0.9, -0.1], vec![2]);
        let r2 = g.tape.leaf(vec![-0.4, 0.8], vec![2]);
        let ord = encode_document(&mut g, &f, &b, &[r1, r2]);
        let rev = encode_document(&mut g, &f, &b, &[r2, r1]);
        assert_ne!(tape.value(ord[0]), tape.value(rev[0]));
    }

    #[test]
    fn single_paragraph_document() {
        let (store, f, b) = two_random_cells(2, 2, 99);
        let mut tape = Tape::new();
        let mut g = Graph::new(&mut tape, &store);
        let r1 = g.tape.leaf(vec![0.5, 0.5], vec![2]);
        let hs = encode_document(&mut g, &f, &b, &[r1]);
        assert_eq!(hs.len(), 1);
        assert_eq!(tape.shape(hs[0]), &[4]);
        assert!(tape.value(hs[0]).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn two_paragraph_document_matches_scalar_trace() {
        let wf: [Real; 9] = [0.15, -0.2, 0.1, 0.3, 0.2, -0.1, -0.4, 0.05, 0.02];
        let wb: [Real; 9] = [-0.25, 0.4, -0.02, 0.2, -0.3, 0.15, 0.5, -0.1, 0.07];
        let mut store = ParamStore::new();
        let mut rng = Rng::new(0);
        let f = GruCell::init(&mut store, "f", 1, 1, &mut rng);
        let b = GruCell::init(&mut store, "b", 1, 1, &mut rng);
        let fields = ["wz", "uz", "bz", "wr", "ur", "br", "wh", "uh", "bh"];
        for (i, field) in fields.iter().enumerate() {
            *store.data_mut(store.id_of(&format!("f.{field}")).unwrap()) = vec![wf[i]];
            *store.data_mut(store.id_of(&format!("b.{field}")).unwrap()) = vec![wb[i]];
        }
        let rs = [0.6, -0.8];
        let mut tape = Tape::new();
        let mut g = Graph::new(&mut tape, &store);
        let inputs: Vec<TensorId> = rs.iter().map(|&v| g.tape.leaf(vec![v], vec![1])).collect();
        let hs = encode_document(&mut g, &f, &b, &inputs);

        let f1 = scalar_gru(&wf, rs[0], 0.0);
        let f2 = scalar_gru(&wf, rs[1], f1);
        let b2 = scalar_gru(&wb, rs[1], 0.0);
        let b1 = scalar_gru(&wb, rs[0], b2);
        let h1 = tape.value(hs[0]);
        let h2 = tape.value(hs[1]);
        assert!((h1[0] - f1).abs() < 1e-12 && (h1[1] - b1).abs() < 1e-12);
        assert!((h2[0] - f2).abs() < 1e-12 && (h2[1] - b2).abs() < 1e-12);
    }

    #[cfg(not(feature = "f32"))]
    #[test]
    fn encoder_gradients_match_central_differences() {
        let (store, f, b) = two_random_cells(2, 2, 5);
        let flat = store.flat();
        let report = crate::tensor::grad_check(&flat, 1e-5, 1e-4, |tape, leaves| {
            let mut g = Graph::with_leaves(tape, &store, leaves);
            let p1 = g.tape.leaf(vec![0.2, -0.4], vec![2]);
            let p2 = g.tape.leaf(vec![0.7, 0.1], vec![2]);
            let hs = encode_document(&mut g, &f, &b, &[p1, p2]);
            let cat = g.tape.concat(&hs);
            let sm = g.tape.softmax(cat);
            let picked = g.tape.index(sm, 1);
            g.tape.log(picked)
        })
        .unwrap();
        assert!(report.passed(), "{report}");
    }
}

//! Section boundary prediction over paragraph states.
//!
//! The main route is the Markov paragraph dependency (MPD): the probability
//! that paragraph m closes a section depends only on its own state and its
//! immediate neighbours, sigma(h_{m-1} W1 h_m + h_m W2 h_{m+1}). Missing
//! neighbours at the sequence edges enter as zero vectors and the equation
//! carries no bias term. Comparison variants: current-paragraph-only
//! (`mpd_minus_p`), global attention over all paragraphs (`gpd`), and a
//! linear-chain CRF decoded with Viterbi.

use serde::{Deserialize, Serialize};

use crate::params::{Graph, ParamId, ParamStore};
use crate::tensor::{Real, Rng, TensorId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryVariant {
    #[default]
    Mpd,
    /// The label is decided by the current paragraph alone.
    #[serde(rename = "mpd_minus_p")]
    CurrentOnly,
    Gpd,
    Crf,
}

#[derive(Debug, Clone)]
pub struct MpdParams {
    pub w1: ParamId,
    pub w2: ParamId,
}

#[derive(Debug, Clone)]
pub struct CurrentOnlyParams {
    pub w: ParamId,
    pub b: ParamId,
}

/// Additive attention over all other paragraphs plus a bilinear output.
/// The exact parameterization is this crate's choice.
#[derive(Debug, Clone)]
pub struct GpdParams {
    pub w_query: ParamId,
    pub w_key: ParamId,
    pub b_att: ParamId,
    pub v_att: ParamId,
    pub w_bilinear: ParamId,
}

#[derive(Debug, Clone)]
pub struct CrfParams {
    /// Emission projection [2 x D] and bias [2].
    pub w_emit: ParamId,
    pub b_emit: ParamId,
    /// Transition scores [2 x 2], indexed [from][to].
    pub trans: ParamId,
}

#[derive(Debug, Clone)]
pub enum BoundaryParams {
    Mpd(MpdParams),
    CurrentOnly(CurrentOnlyParams),
    Gpd(GpdParams),
    Crf(CrfParams),
}

impl BoundaryParams {
    /// `dim` is the paragraph-state width (2H).
    pub fn init(store: &mut ParamStore, variant: BoundaryVariant, dim: usize, rng: &mut Rng) -> Self {
        match variant {
            BoundaryVariant::Mpd => BoundaryParams::Mpd(MpdParams {
                w1: store.init_uniform("boundary.w1", &[dim, dim], rng),
                w2: store.init_uniform("boundary.w2", &[dim, dim], rng),
            }),
            BoundaryVariant::CurrentOnly => BoundaryParams::CurrentOnly(CurrentOnlyParams {
                w: store.init_uniform("boundary.w", &[dim], rng),
                b: store.init_uniform("boundary.b", &[1], rng),
            }),
            BoundaryVariant::Gpd => BoundaryParams::Gpd(GpdParams {
                w_query: store.init_uniform("boundary.gpd.w_query", &[dim, dim], rng),
                w_key: store.init_uniform("boundary.gpd.w_key", &[dim, dim], rng),
                b_att: store.init_uniform("boundary.gpd.b_att", &[dim], rng),
                v_att: store.init_uniform("boundary.gpd.v_att", &[dim], rng),
                w_bilinear: store.init_uniform("boundary.gpd.w_bilinear", &[dim, dim], rng),
            }),
            BoundaryVariant::Crf => BoundaryParams::Crf(CrfParams {
                w_emit: store.init_uniform("boundary.crf.w_emit", &[2, dim], rng),
                b_emit: store.init_uniform("boundary.crf.b_emit", &[2], rng),
                trans: store.init_uniform("boundary.crf.trans", &[2, 2], rng),
            }),
        }
    }

    pub fn variant(&self) -> BoundaryVariant {
        match self {
            BoundaryParams::Mpd(_) => BoundaryVariant::Mpd,
            BoundaryParams::CurrentOnly(_) => BoundaryVariant::CurrentOnly,
            BoundaryParams::Gpd(_) => BoundaryVariant::Gpd,
            BoundaryParams::Crf(_) => BoundaryVariant::Crf,
        }
    }
}

/// Predicted labels with per-paragraph probabilities of label 1.
#[derive(Debug, Clone)]
pub struct BoundarySequence {
    pub labels: Vec<u8>,
    pub probs: Vec<Real>,
}

// ── Markov paragraph dependency ─────────────────────────────────────

/// Pre-sigmoid score h_prev.W1.h_cur + h_cur.W2.h_next. Neighbours outside
/// the sequence are zero vectors.
pub fn mpd_logit(
    g: &mut Graph,
    params: &MpdParams,
    h_prev: Option<TensorId>,
    h_cur: TensorId,
    h_next: Option<TensorId>,
) -> TensorId {
    let dim = g.tape.shape(h_cur)[0];
    let h_prev = h_prev.unwrap_or_else(|| g.tape.zeros(vec![dim]));
    let h_next = h_next.unwrap_or_else(|| g.tape.zeros(vec![dim]));
    let w1 = g.param(params.w1);
    let w2 = g.param(params.w2);
    let w1h = g.tape.matvec(w1, h_cur);
    let left = g.tape.dot(h_prev, w1h);
    let w2h = g.tape.matvec(w2, h_next);
    let right = g.tape.dot(h_cur, w2h);
    g.tape.add(left, right)
}

/// Probability that the current paragraph closes a section. The probability
/// of label 0 is its exact complement.
pub fn mpd_prob(
    g: &mut Graph,
    params: &MpdParams,
    h_prev: Option<TensorId>,
    h_cur: TensorId,
    h_next: Option<TensorId>,
) -> TensorId {
    let logit = mpd_logit(g, params, h_prev, h_cur, h_next);
    g.tape.sigmoid(logit)
}

pub fn current_only_logit(g: &mut Graph, params: &CurrentOnlyParams, h_cur: TensorId) -> TensorId {
    let w = g.param(params.w);
    let b = g.param(params.b);
    let s = g.tape.dot(w, h_cur);
    g.tape.add(s, b)
}

/// Global paragraph dependency score for position m: additive attention over
/// all other paragraphs produces a context vector, scored bilinearly against
/// the current state. A single-paragraph document scores against itself.
pub fn gpd_logit(g: &mut Graph, params: &GpdParams, states: &[TensorId], m: usize) -> TensorId {
    let context = if states.len() == 1 {
        states[0]
    } else {
        let others: Vec<TensorId> = states
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != m)
            .map(|(_, &h)| h)
            .collect();
        let keys = g.tape.stack_rows(&others);
        let wk = g.param(params.w_key);
        let wq = g.param(params.w_query);
        let b = g.param(params.b_att);
        let v = g.param(params.v_att);
        // scores_j = v . tanh(Wk h_j + Wq h_m + b), batched over rows of `keys`
        let projected = g.tape.matmul(keys, wk);
        let q = g.tape.matvec(wq, states[m]);
        let qb = g.tape.add(q, b);
        let shifted = g.tape.add_row_broadcast(projected, qb);
        let act = g.tape.tanh(shifted);
        let scores = g.tape.matvec(act, v);
        let alpha = g.tape.softmax(scores);
        g.tape.matvec_t(keys, alpha)
    };
    let wb = g.param(params.w_bilinear);
    let wbc = g.tape.matvec(wb, context);
    g.tape.dot(states[m], wbc)
}

// ── Linear-chain CRF ────────────────────────────────────────────────

/// Per-position label scores [2] from the paragraph state.
pub fn crf_emissions(g: &mut Graph, params: &CrfParams, states: &[TensorId]) -> Vec<TensorId> {
    states
        .iter()
        .map(|&h| {
            let w = g.param(params.w_emit);
            let b = g.param(params.b_emit);
            let e = g.tape.matvec(w, h);
            g.tape.add(e, b)
        })
        .collect()
}

/// log p(gold labels) = score(gold) - logZ, with logZ from the forward
/// algorithm in log space. Differentiable through emissions and transitions.
pub fn crf_loglik_from_emissions(
    g: &mut Graph,
    emissions: &[TensorId],
    trans: TensorId,
    gold: &[u8],
) -> TensorId {
    assert_eq!(emissions.len(), gold.len());
    assert!(!emissions.is_empty());
    let m = emissions.len();

    // Gold-path score.
    let mut score = g.tape.index(emissions[0], gold[0] as usize);
    for i in 1..m {
        let e = g.tape.index(emissions[i], gold[i] as usize);
        let t = g.tape.index(trans, gold[i - 1] as usize * 2 + gold[i] as usize);
        let s = g.tape.add(score, e);
        score = g.tape.add(s, t);
    }

    // Forward recursion: alpha[j] = e_i[j] + lse_k(alpha[k] + T[k][j]).
    let mut alpha = emissions[0];
    for &e_i in &emissions[1..] {
        let mut next = Vec::with_capacity(2);
        for j in 0..2 {
            let mut terms = Vec::with_capacity(2);
            for k in 0..2 {
                let a_k = g.tape.index(alpha, k);
                let t_kj = g.tape.index(trans, k * 2 + j);
                terms.push(g.tape.add(a_k, t_kj));
            }
            let cat = g.tape.concat(&terms);
            let lse = g.tape.logsumexp(cat);
            let e_j = g.tape.index(e_i, j);
            next.push(g.tape.add(lse, e_j));
        }
        alpha = g.tape.concat(&next);
    }
    let log_z = g.tape.logsumexp(alpha);
    g.tape.sub(score, log_z)
}

pub fn crf_loglik(
    g: &mut Graph,
    params: &CrfParams,
    states: &[TensorId],
    gold: &[u8],
) -> TensorId {
    let emissions = crf_emissions(g, params, states);
    let trans = g.param(params.trans);
    crf_loglik_from_emissions(g, &emissions, trans, gold)
}

/// Max-score label sequence; ties break toward label 0.
pub fn crf_viterbi(emissions: &[[Real; 2]], trans: &[[Real; 2]; 2]) -> Vec<u8> {
    assert!(!emissions.is_empty());
    let m = emissions.len();
    let mut delta = [emissions[0][0], emissions[0][1]];
    let mut back: Vec<[usize; 2]> = Vec::with_capacity(m);
    for e in &emissions[1..] {
        let mut next = [0.0; 2];
        let mut arg = [0usize; 2];
        for (j, n) in next.iter_mut().enumerate() {
            let from0 = delta[0] + trans[0][j];
            let from1 = delta[1] + trans[1][j];
            // strict > keeps ties on label 0
            let (best, k) = if from1 > from0 { (from1, 1) } else { (from0, 0) };
            *n = best + e[j];
            arg[j] = k;
        }
        back.push(arg);
        delta = next;
    }
    let mut label = if delta[1] > delta[0] { 1usize } else { 0 };
    let mut labels = vec![label as u8; m];
    for (i, arg) in back.iter().enumerate().rev() {
        label = arg[label];
        labels[i] = label as u8;
    }
    labels
}

/// Per-position marginals p(l_i = 1) via forward-backward in log space.
pub fn crf_marginals(emissions: &[[Real; 2]], trans: &[[Real; 2]; 2]) -> Vec<Real> {
    let m = emissions.len();
    let lse2 = |a: Real, b: Real| {
        let mx = a.max(b);
        mx + ((a - mx).exp() + (b - mx).exp()).ln()
    };
    let mut alpha = vec![[0.0 as Real; 2]; m];
    alpha[0] = emissions[0];
    for i in 1..m {
        for j in 0..2 {
            alpha[i][j] = lse2(
                alpha[i - 1][0] + trans[0][j],
                alpha[i - 1][1] + trans[1][j],
            ) + emissions[i][j];
        }
    }
    let mut beta = vec![[0.0 as Real; 2]; m];
    for i in (0..m.saturating_sub(1)).rev() {
        for j in 0..2 {
            beta[i][j] = lse2(
                trans[j][0] + emissions[i + 1][0] + beta[i + 1][0],
                trans[j][1] + emissions[i + 1][1] + beta[i + 1][1],
            );
        }
    }
    let log_z = lse2(alpha[m - 1][0], alpha[m - 1][1]);
    (0..m)
        .map(|i| (alpha[i][1] + beta[i][1] - log_z).exp())
        .collect()
}

// ── Prediction ──────────────────────────────────────────────────────

/// Threshold probabilities into labels and force the final paragraph to
/// close a section, so every document decomposes into complete sections.
pub fn threshold_labels(probs: &[Real], threshold: Real) -> Vec<u8> {
    let mut labels: Vec<u8> = probs.iter().map(|&p| u8::from(p > threshold)).collect();
    if let Some(last) = labels.last_mut() {
        *last = 1;
    }
    labels
}

/// Run the configured variant over encoded paragraph states.
pub fn predict_boundaries(
    g: &mut Graph,
    params: &BoundaryParams,
    states: &[TensorId],
    threshold: Real,
) -> BoundarySequence {
    match params {
        BoundaryParams::Crf(crf) => {
            let emissions = crf_emissions(g, crf, states);
            let evals: Vec<[Real; 2]> = emissions
                .iter()
                .map(|&e| {
                    let v = g.tape.value(e);
                    [v[0], v[1]]
                })
                .collect();
            let t = g.param(crf.trans);
            let tv = g.tape.value(t);
            let trans = [[tv[0], tv[1]], [tv[2], tv[3]]];
            let mut labels = crf_viterbi(&evals, &trans);
            if let Some(last) = labels.last_mut() {
                *last = 1;
            }
            let probs = crf_marginals(&evals, &trans);
            BoundarySequence { labels, probs }
        }
        _ => {
            let probs: Vec<Real> = (0..states.len())
                .map(|m| {
                    let logit = match params {
                        BoundaryParams::Mpd(p) => mpd_logit(
                            g,
                            p,
                            (m > 0).then(|| states[m - 1]),
                            states[m],
                            (m + 1 < states.len()).then(|| states[m + 1]),
                        ),
                        BoundaryParams::CurrentOnly(p) => current_only_logit(g, p, states[m]),
                        BoundaryParams::Gpd(p) => gpd_logit(g, p, states, m),
                        BoundaryParams::Crf(_) => unreachable!(),
                    };
                    let p = g.tape.sigmoid(logit);
                    g.tape.scalar_value(p)
                })
                .collect();
            BoundarySequence {
                labels: threshold_labels(&probs, threshold),
                probs,
            }
        }
    }
}

//! Named parameter storage shared by the model, optimizer and checkpointer.
//!
//! Parameters persist across examples; each example binds the ones it uses
//! into a fresh tape as leaves and harvests their gradients after backward.

use std::collections::HashMap;

use crate::tensor::{Real, Rng, Tape, TensorId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<Real>,
}

#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: Vec<Param>,
    by_name: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a parameter initialized uniformly in [-0.08, 0.08].
    pub fn init_uniform(&mut self, name: &str, shape: &[usize], rng: &mut Rng) -> ParamId {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.uniform(-0.08, 0.08)).collect();
        self.insert(name, shape.to_vec(), data)
    }

    pub fn insert(&mut self, name: &str, shape: Vec<usize>, data: Vec<Real>) -> ParamId {
        assert_eq!(data.len(), shape.iter().product::<usize>());
        assert!(
            !self.by_name.contains_key(name),
            "duplicate parameter name {name}"
        );
        let id = ParamId(self.entries.len());
        self.by_name.insert(name.to_string(), id.0);
        self.entries.push(Param {
            name: name.to_string(),
            shape,
            data,
        });
        id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_values(&self) -> usize {
        self.entries.iter().map(|p| p.data.len()).sum()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.entries[id.0]
    }

    pub fn data_mut(&mut self, id: ParamId) -> &mut Vec<Real> {
        &mut self.entries[id.0].data
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.entries.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Flat (name, shape, values) view in registration order, as consumed by
    /// grad_check.
    pub fn flat(&self) -> Vec<(String, Vec<usize>, Vec<Real>)> {
        self.entries
            .iter()
            .map(|p| (p.name.clone(), p.shape.clone(), p.data.clone()))
            .collect()
    }
}

/// Per-parameter gradient accumulator, parallel to a store.
#[derive(Debug, Clone)]
pub struct GradBuffer {
    grads: Vec<Vec<Real>>,
}

impl GradBuffer {
    pub fn zeros_like(store: &ParamStore) -> Self {
        GradBuffer {
            grads: store.entries.iter().map(|p| vec![0.0; p.data.len()]).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &[Real] {
        &self.grads[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [Real] {
        &mut self.grads[id.0]
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Vec<Real>> {
        self.grads.iter_mut()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<Real>> {
        self.grads.iter()
    }

    pub fn scale(&mut self, c: Real) {
        for g in &mut self.grads {
            for v in g.iter_mut() {
                *v *= c;
            }
        }
    }

    /// Global L2 norm over all gradients.
    pub fn global_norm(&self) -> Real {
        self.grads
            .iter()
            .flat_map(|g| g.iter())
            .map(|&v| v * v)
            .sum::<Real>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.grads.iter().all(|g| g.iter().all(|v| v.is_finite()))
    }
}

/// Binds store parameters into a tape, memoized so each parameter enters the
/// graph as a single leaf. In override mode (gradient checking) parameters
/// resolve to externally supplied leaves instead of fresh copies.
pub struct Graph<'a> {
    pub tape: &'a mut Tape,
    store: &'a ParamStore,
    bound: Vec<Option<TensorId>>,
    overrides: Option<&'a [TensorId]>,
}

impl<'a> Graph<'a> {
    pub fn new(tape: &'a mut Tape, store: &'a ParamStore) -> Self {
        Graph {
            bound: vec![None; store.len()],
            tape,
            store,
            overrides: None,
        }
    }

    /// Bind parameters to pre-created leaves (one per store entry, in store
    /// order) rather than copying values in.
    pub fn with_leaves(tape: &'a mut Tape, store: &'a ParamStore, leaves: &'a [TensorId]) -> Self {
        assert_eq!(leaves.len(), store.len());
        Graph {
            bound: vec![None; store.len()],
            tape,
            store,
            overrides: Some(leaves),
        }
    }

    pub fn param(&mut self, id: ParamId) -> TensorId {
        if let Some(leaves) = self.overrides {
            return leaves[id.0];
        }
        if let Some(t) = self.bound[id.0] {
            return t;
        }
        let p = self.store.get(id);
        let t = self.tape.leaf(p.data.clone(), p.shape.clone());
        self.bound[id.0] = Some(t);
        t
    }

    /// Accumulate tape gradients of bound parameters into `out`.
    pub fn harvest(&self, out: &mut GradBuffer) {
        for (i, bound) in self.bound.iter().enumerate() {
            if let Some(t) = bound {
                let g = self.tape.grad(*t);
                if g.is_empty() {
                    continue;
                }
                for (o, &v) in out.grads[i].iter_mut().zip(g) {
                    *o += v;
                }
            }
        }
        if let Some(leaves) = self.overrides {
            for (i, t) in leaves.iter().enumerate() {
                let g = self.tape.grad(*t);
                if g.is_empty() {
                    continue;
                }
                for (o, &v) in out.grads[i].iter_mut().zip(g) {
                    *o += v;
                }
            }
        }
    }
}

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{seeded_rng, SimError};
use crate::adjacency::{AdjacencyMatrix, EdgeProbability};

pub type ObjectId = usize;

/// Largest number of objects a single object may rest on.
pub const MAX_SUPPORTS: usize = 2;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: ObjectId,
    pub class: usize,
    pub fragile: bool,
}

/// Ground-truth bin contents: objects and the direct-support DAG between the
/// ones still present.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneGraph {
    objects: Vec<SceneObject>,
    /// `rests_on[i]` lists the objects `i` rests directly on, ascending.
    rests_on: Vec<Vec<ObjectId>>,
    removed: Vec<bool>,
}

impl SceneGraph {
    /// Builds a scene from `(top, bottom)` support pairs.
    pub fn from_edges(n: usize, edges: &[(ObjectId, ObjectId)]) -> Result<Self, SimError> {
        let mut rests_on = vec![Vec::new(); n];
        for &(top, bottom) in edges {
            if top >= n || bottom >= n || top == bottom {
                return Err(SimError::InvalidScene(format!("bad support edge ({top}, {bottom})")));
            }
            if !rests_on[top].contains(&bottom) {
                rests_on[top].push(bottom);
            }
        }
        for r in &mut rests_on {
            r.sort_unstable();
        }
        let objects = (0..n).map(|id| SceneObject { id, class: 0, fragile: false }).collect();
        let scene = Self { objects, rests_on, removed: vec![false; n] };
        if n > 0 {
            scene.true_adjacency().extract_order(0.5).map_err(|e| SimError::InvalidScene(e.to_string()))?;
        }
        Ok(scene)
    }

    /// `0` on `1` on `2` ... on `n - 1`.
    pub fn chain(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|k| (k - 1, k)).collect();
        Self::from_edges(n, &edges).expect("chain is acyclic")
    }

    /// Random stack from a seed. See [`SceneGraph::generate_with`].
    pub fn generate(seed: u64, n_objects: usize, density: f64) -> Self {
        Self::generate_with(&mut seeded_rng(seed, 0), n_objects, density)
    }

    /// Objects are placed one at a time in a random order; each placed object
    /// lands on earlier objects with probability `density`, resting on one or
    /// (less often) two of them. Placement order guarantees acyclicity.
    pub fn generate_with<R: Rng>(rng: &mut R, n_objects: usize, density: f64) -> Self {
        let density = density.clamp(0.0, 1.0);
        let mut order: Vec<ObjectId> = (0..n_objects).collect();
        order.shuffle(rng);
        let mut rests_on = vec![Vec::new(); n_objects];
        for k in 1..n_objects {
            if !rng.random_bool(density) {
                continue;
            }
            let supports = if k >= 2 && rng.random_bool(0.3) { MAX_SUPPORTS } else { 1 };
            let mut picked: Vec<ObjectId> = index::sample(rng, k, supports).into_iter().map(|p| order[p]).collect();
            picked.sort_unstable();
            rests_on[order[k]] = picked;
        }
        let objects = (0..n_objects)
            .map(|id| SceneObject { id, class: rng.random_range(0..4), fragile: rng.random_bool(0.3) })
            .collect();
        Self { objects, rests_on, removed: vec![false; n_objects] }
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    /// Objects ever placed, including removed ones.
    pub fn total_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn is_present(&self, id: ObjectId) -> bool {
        id < self.removed.len() && !self.removed[id]
    }

    pub fn present(&self) -> Vec<ObjectId> {
        (0..self.objects.len()).filter(|&i| !self.removed[i]).collect()
    }

    pub fn present_count(&self) -> usize {
        self.removed.iter().filter(|r| !**r).count()
    }

    pub fn is_empty(&self) -> bool {
        self.present_count() == 0
    }

    /// `true` if present object `top` rests directly on present object `bottom`.
    pub fn rests_on(&self, top: ObjectId, bottom: ObjectId) -> bool {
        self.is_present(top) && self.is_present(bottom) && self.rests_on[top].contains(&bottom)
    }

    /// Present objects resting directly on `id`.
    pub fn supported_by(&self, id: ObjectId) -> Vec<ObjectId> {
        (0..self.objects.len()).filter(|&t| self.rests_on(t, id)).collect()
    }

    /// Support edges among present objects, as `(top, bottom)`.
    pub fn edges(&self) -> Vec<(ObjectId, ObjectId)> {
        let mut out = Vec::new();
        for top in 0..self.objects.len() {
            for &bottom in &self.rests_on[top] {
                if self.rests_on(top, bottom) {
                    out.push((top, bottom));
                }
            }
        }
        out
    }

    /// 0/1 adjacency over the given objects, in the given order.
    pub fn adjacency_over(&self, ids: &[ObjectId]) -> AdjacencyMatrix {
        let mut edges = Vec::new();
        for (a, &i) in ids.iter().enumerate() {
            for (b, &j) in ids.iter().enumerate() {
                if self.rests_on(i, j) {
                    edges.push(EdgeProbability::new(a, b, 1.0));
                }
            }
        }
        if ids.is_empty() {
            return AdjacencyMatrix::zeros(0);
        }
        AdjacencyMatrix::from_edges(ids.len(), &edges).expect("scene edges are valid")
    }

    /// 0/1 adjacency over every object ever placed (removed ones are isolated).
    pub fn true_adjacency(&self) -> AdjacencyMatrix {
        let all: Vec<ObjectId> = (0..self.objects.len()).collect();
        self.adjacency_over(&all)
    }

    pub(crate) fn remove(&mut self, id: ObjectId) {
        self.removed[id] = true;
    }

    /// The object slides off whatever it rested on and becomes free-standing.
    pub(crate) fn drop_supports(&mut self, id: ObjectId) {
        self.rests_on[id].clear();
    }
}

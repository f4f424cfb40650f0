use std::hash::{Hash, Hasher};

use fixedbitset::FixedBitSet;

pub type AtomId = usize;
pub type FluentId = usize;

/// A world state: truth values over the problem's ground-atom vocabulary and
/// integer values over its ground fluents.
///
/// Both halves are laid out by the owning [`ProblemDef`](super::ProblemDef),
/// so equality and hashing are canonical and independent of insertion order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct State {
    pub(crate) facts: FixedBitSet,
    pub(crate) fluents: Box<[i64]>,
}

impl Hash for State {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.facts.as_slice().hash(state);
        self.fluents.hash(state);
    }
}

impl State {
    pub(crate) fn new(num_atoms: usize, num_fluents: usize) -> Self {
        State { facts: FixedBitSet::with_capacity(num_atoms), fluents: vec![0; num_fluents].into_boxed_slice() }
    }

    #[inline]
    pub fn holds(&self, atom: AtomId) -> bool {
        self.facts.contains(atom)
    }

    #[inline]
    pub fn fluent(&self, id: FluentId) -> i64 {
        self.fluents[id]
    }

    pub fn set_atom(&mut self, atom: AtomId, value: bool) {
        self.facts.set(atom, value);
    }

    pub fn set_fluent(&mut self, id: FluentId, value: i64) {
        self.fluents[id] = value;
    }

    /// Ids of the atoms that are true, ascending.
    pub fn true_atoms(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.facts.ones()
    }

    pub fn num_atoms(&self) -> usize {
        self.facts.len()
    }

    pub fn fluents(&self) -> &[i64] {
        &self.fluents
    }

    pub fn facts(&self) -> &FixedBitSet {
        &self.facts
    }
}

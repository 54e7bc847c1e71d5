//! Finite lattices of cells organized in generations.
//!
//! A lattice is stored twice: as [`LatticeParts`], the labelled raw form read
//! from documents (which may be inconsistent and is what [`validate`] inspects),
//! and as [`Lattice`], a validated dense form used by every computation.
//!
//! In the dense form cells are numbered generation by generation, so a parent
//! always has a smaller index than its children. Leaves (cells of the final
//! generation) are laid out in depth-first order, which makes the leaves under
//! any cell a contiguous range of leaf positions.

mod document;
mod instance;
mod random;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};

pub use document::{FunctionDocument, InstanceDocument};
pub use instance::{ExponentPair, Instance, Measure, SimpleFunction, Weight};
pub(crate) use instance::{conjugate, subtree_sums};
pub use random::{random_instance, RandomParams};

/// Dense handle of a cell inside one [`Lattice`].
///
/// The externally visible identifier is the cell's label
/// ([`Lattice::label`]), which is what documents store and what survives a
/// serialization round trip.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId(u32);

impl CellId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    fn new(index: usize) -> Self {
        CellId(u32::try_from(index).expect("lattice too large"))
    }
}

/// Labelled, unvalidated lattice description.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LatticeParts {
    pub generations: Vec<Vec<u64>>,
    pub parent: BTreeMap<u64, u64>,
    pub children: BTreeMap<u64, Vec<u64>>,
}

impl LatticeParts {
    /// Builds the parts with the children lists derived from `parent`.
    pub fn from_parent(generations: Vec<Vec<u64>>, parent: BTreeMap<u64, u64>) -> Self {
        let mut children: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for cell in generations.iter().flatten() {
            if let Some(&p) = parent.get(cell) {
                children.entry(p).or_default().push(*cell);
            }
        }
        LatticeParts {
            generations,
            parent,
            children,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    /// A generation fails to cover the space exactly once.
    Partition,
    /// A cell is not exactly partitioned by its children.
    Refinement,
    /// A parent link skips or reverses generations.
    Generation,
    Duplicate,
    UnknownCell,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::Partition => "partition",
            ViolationKind::Refinement => "refinement",
            ViolationKind::Generation => "generation",
            ViolationKind::Duplicate => "duplicate",
            ViolationKind::UnknownCell => "unknown-cell",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub cell: Option<u64>,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, cell: Option<u64>, detail: String) {
        self.violations.push(Violation { kind, cell, detail });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", v.kind, v.detail)?;
        }
        Ok(())
    }
}

/// Checks the partition and refinement structure of a lattice description.
pub fn validate(parts: &LatticeParts) -> ValidationReport {
    let mut report = ValidationReport::default();
    if parts.generations.is_empty() {
        report.push(ViolationKind::Partition, None, "lattice has no generations".into());
        return report;
    }

    let mut generation_of: HashMap<u64, usize> = HashMap::new();
    for (n, generation) in parts.generations.iter().enumerate() {
        if generation.is_empty() {
            report.push(ViolationKind::Partition, None, format!("generation {n} is empty"));
        }
        for &cell in generation {
            if generation_of.insert(cell, n).is_some() {
                report.push(
                    ViolationKind::Duplicate,
                    Some(cell),
                    format!("cell {cell} listed more than once"),
                );
            }
        }
    }

    for (&child, &parent) in &parts.parent {
        if !generation_of.contains_key(&child) {
            report.push(
                ViolationKind::UnknownCell,
                Some(child),
                format!("parent entry for unknown cell {child}"),
            );
        }
        if !generation_of.contains_key(&parent) {
            report.push(
                ViolationKind::UnknownCell,
                Some(parent),
                format!("cell {child} has unknown parent {parent}"),
            );
        }
    }
    for (&cell, kids) in &parts.children {
        if !generation_of.contains_key(&cell) {
            report.push(
                ViolationKind::UnknownCell,
                Some(cell),
                format!("children entry for unknown cell {cell}"),
            );
        }
        for kid in kids {
            if !generation_of.contains_key(kid) {
                report.push(
                    ViolationKind::UnknownCell,
                    Some(*kid),
                    format!("cell {cell} lists unknown child {kid}"),
                );
            }
        }
    }

    let last = parts.generations.len() - 1;
    let mut derived: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
    for (n, generation) in parts.generations.iter().enumerate() {
        for &cell in generation {
            match parts.parent.get(&cell) {
                None if n > 0 => report.push(
                    ViolationKind::Partition,
                    Some(cell),
                    format!("cell {cell} of generation {n} lies outside every generation-{} cell", n - 1),
                ),
                Some(&p) if n == 0 => report.push(
                    ViolationKind::Generation,
                    Some(cell),
                    format!("root-generation cell {cell} has parent {p}"),
                ),
                Some(&p) => {
                    if let Some(&pg) = generation_of.get(&p) {
                        if pg + 1 != n {
                            report.push(
                                ViolationKind::Generation,
                                Some(cell),
                                format!("cell {cell} of generation {n} has parent {p} of generation {pg}"),
                            );
                        }
                    }
                    derived.entry(p).or_default().insert(cell);
                }
                None => {}
            }
        }
    }

    for (n, generation) in parts.generations.iter().enumerate() {
        for &cell in generation {
            let from_parent = derived.get(&cell).cloned().unwrap_or_default();
            let listed: BTreeSet<u64> = parts
                .children
                .get(&cell)
                .map(|k| k.iter().copied().collect())
                .unwrap_or_default();
            if n < last && from_parent.is_empty() {
                report.push(
                    ViolationKind::Refinement,
                    Some(cell),
                    format!("cell {cell} of generation {n} is not refined in generation {}", n + 1),
                );
            } else if listed != from_parent {
                report.push(
                    ViolationKind::Refinement,
                    Some(cell),
                    format!(
                        "children of cell {cell} {:?} do not partition it (cells refining it: {:?})",
                        listed, from_parent
                    ),
                );
            }
        }
    }
    report
}

/// Validated finite lattice.
#[derive(Clone, Debug)]
pub struct Lattice {
    labels: Vec<u64>,
    /// `None` when labels are exactly `0..len` in dense order.
    lookup: Option<HashMap<u64, CellId>>,
    generation_ranges: Vec<Range<usize>>,
    generation: Vec<u32>,
    parent: Vec<Option<CellId>>,
    child_offsets: Vec<usize>,
    child_list: Vec<CellId>,
    /// Leaves in depth-first order.
    leaves: Vec<CellId>,
    /// Leaf positions covered by each cell.
    spans: Vec<Range<usize>>,
}

impl Lattice {
    pub fn from_parts(parts: &LatticeParts) -> Result<Self> {
        let report = validate(parts);
        if !report.is_valid() {
            return Err(Error::InvalidLattice(report));
        }
        let labels: Vec<u64> = parts.generations.iter().flatten().copied().collect();
        let index: HashMap<u64, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let parent = labels
            .iter()
            .map(|l| parts.parent.get(l).map(|p| CellId::new(index[p])))
            .collect();
        Ok(Self::assemble(labels, parts.generations.iter().map(Vec::len).collect(), parent))
    }

    /// Complete `branching`-ary tree with `depth + 1` generations, labelled
    /// `0..` generation by generation.
    pub fn regular(branching: usize, depth: usize) -> Result<Self> {
        if branching < 1 {
            return Err(Error::InvalidParameter("branching must be ≥ 1".into()));
        }
        let mut sizes = Vec::with_capacity(depth + 1);
        let mut size = 1usize;
        for _ in 0..=depth {
            sizes.push(size);
            size = size
                .checked_mul(branching)
                .ok_or_else(|| Error::InvalidParameter("lattice too large".into()))?;
        }
        let total: usize = sizes.iter().sum();
        if total > u32::MAX as usize {
            return Err(Error::InvalidParameter("lattice too large".into()));
        }
        let mut parent = Vec::with_capacity(total);
        let mut start = 0;
        let mut prev_start = 0;
        for (n, &s) in sizes.iter().enumerate() {
            for i in 0..s {
                parent.push((n > 0).then(|| CellId::new(prev_start + i / branching)));
            }
            prev_start = start;
            start += s;
        }
        Ok(Self::assemble((0..total as u64).collect(), sizes, parent))
    }

    fn assemble(labels: Vec<u64>, sizes: Vec<usize>, parent: Vec<Option<CellId>>) -> Self {
        let n = labels.len();
        let mut generation_ranges = Vec::with_capacity(sizes.len());
        let mut generation = vec![0u32; n];
        let mut start = 0;
        for (g, &s) in sizes.iter().enumerate() {
            generation[start..start + s].fill(g as u32);
            generation_ranges.push(start..start + s);
            start += s;
        }

        let mut counts = vec![0usize; n + 1];
        for p in parent.iter().flatten() {
            counts[p.index() + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let child_offsets = counts.clone();
        let mut fill = counts;
        let mut child_list = vec![CellId(0); child_offsets[n]];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                child_list[fill[p.index()]] = CellId::new(i);
                fill[p.index()] += 1;
            }
        }

        let lookup = if labels.iter().enumerate().all(|(i, &l)| l == i as u64) {
            None
        } else {
            Some(labels.iter().enumerate().map(|(i, &l)| (l, CellId::new(i))).collect())
        };

        let mut lattice = Lattice {
            labels,
            lookup,
            generation_ranges,
            generation,
            parent,
            child_offsets,
            child_list,
            leaves: Vec::new(),
            spans: vec![0..0; n],
        };
        lattice.layout_leaves();
        lattice
    }

    fn layout_leaves(&mut self) {
        let roots: Vec<CellId> = self.generation_ranges[0].clone().map(CellId::new).collect();
        let mut leaves = Vec::new();
        let mut start = vec![0usize; self.labels.len()];
        // (cell, exiting)
        let mut stack: Vec<(CellId, bool)> = roots.into_iter().rev().map(|r| (r, false)).collect();
        while let Some((cell, exiting)) = stack.pop() {
            if exiting {
                self.spans[cell.index()] = start[cell.index()]..leaves.len();
                continue;
            }
            start[cell.index()] = leaves.len();
            stack.push((cell, true));
            let kids = self.children(cell);
            if kids.is_empty() {
                leaves.push(cell);
            } else {
                stack.extend(kids.iter().rev().map(|&k| (k, false)));
            }
        }
        self.leaves = leaves;
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn cells(&self) -> impl DoubleEndedIterator<Item = CellId> + ExactSizeIterator {
        (0..self.labels.len()).map(CellId::new)
    }

    pub fn label(&self, cell: CellId) -> u64 {
        self.labels[cell.index()]
    }

    pub fn cell(&self, label: u64) -> Result<CellId> {
        let found = match &self.lookup {
            None => (label < self.labels.len() as u64).then(|| CellId::new(label as usize)),
            Some(map) => map.get(&label).copied(),
        };
        found.ok_or(Error::NoSuchCell(label))
    }

    /// Errors unless `cell` belongs to this lattice.
    pub fn check(&self, cell: CellId) -> Result<()> {
        if cell.index() < self.labels.len() {
            Ok(())
        } else {
            Err(Error::NoSuchCell(cell.0 as u64))
        }
    }

    pub fn num_generations(&self) -> usize {
        self.generation_ranges.len()
    }

    pub fn generation(&self, n: usize) -> impl ExactSizeIterator<Item = CellId> {
        self.generation_ranges[n].clone().map(CellId::new)
    }

    pub fn generation_of(&self, cell: CellId) -> usize {
        self.generation[cell.index()] as usize
    }

    pub fn parent(&self, cell: CellId) -> Option<CellId> {
        self.parent[cell.index()]
    }

    pub fn children(&self, cell: CellId) -> &[CellId] {
        let i = cell.index();
        &self.child_list[self.child_offsets[i]..self.child_offsets[i + 1]]
    }

    pub fn is_leaf(&self, cell: CellId) -> bool {
        self.children(cell).is_empty()
    }

    pub fn leaves(&self) -> &[CellId] {
        &self.leaves
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    /// Positions (into [`Lattice::leaves`]) of the leaves under `cell`.
    pub fn span(&self, cell: CellId) -> Range<usize> {
        self.spans[cell.index()].clone()
    }

    /// Position of a leaf cell in [`Lattice::leaves`].
    pub fn leaf_position(&self, cell: CellId) -> Option<usize> {
        self.is_leaf(cell).then(|| self.spans[cell.index()].start)
    }

    /// Ancestor-or-self chain of `cell`, root first.
    pub fn chain(&self, cell: CellId) -> Vec<CellId> {
        let mut chain = vec![cell];
        let mut cur = cell;
        while let Some(p) = self.parent(cur) {
            chain.push(p);
            cur = p;
        }
        chain.reverse();
        chain
    }

    /// Topmost ancestor-or-self of `cell` covering exactly the same leaves.
    pub fn chain_top(&self, cell: CellId) -> CellId {
        let mut cur = cell;
        while let Some(p) = self.parent(cur) {
            if self.spans[p.index()] != self.spans[cell.index()] {
                break;
            }
            cur = p;
        }
        cur
    }

    /// Whether the leaves of `inner` are among the leaves of `outer`.
    pub fn is_within(&self, inner: CellId, outer: CellId) -> bool {
        let (a, b) = (&self.spans[inner.index()], &self.spans[outer.index()]);
        b.start <= a.start && a.end <= b.end
    }

    /// Every cell `I ⊆ J`, including `J`, with each generation-copy of a
    /// repeated cell listed separately. Sorted by dense index.
    pub fn cells_within(&self, j: CellId) -> Result<Vec<CellId>> {
        self.check(j)?;
        let mut out = Vec::new();
        let mut cur = j;
        while let Some(p) = self.parent(cur) {
            if self.spans[p.index()] != self.spans[j.index()] {
                break;
            }
            out.push(p);
            cur = p;
        }
        let mut stack = vec![j];
        while let Some(c) = stack.pop() {
            out.push(c);
            stack.extend_from_slice(self.children(c));
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Labelled form of this lattice.
    pub fn to_parts(&self) -> LatticeParts {
        let generations = self
            .generation_ranges
            .iter()
            .map(|r| r.clone().map(|i| self.labels[i]).collect())
            .collect();
        let parent = self
            .cells()
            .filter_map(|c| self.parent(c).map(|p| (self.label(c), self.label(p))))
            .collect();
        LatticeParts::from_parent(generations, parent)
    }

    pub fn validate(&self) -> ValidationReport {
        validate(&self.to_parts())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary(depth: usize) -> Lattice {
        Lattice::regular(2, depth).unwrap()
    }

    #[test]
    fn binary_two_generations_is_valid() {
        let parts = LatticeParts::from_parent(vec![vec![0], vec![1, 2]], [(1, 0), (2, 0)].into());
        assert!(validate(&parts).is_valid());
        let lattice = Lattice::from_parts(&parts).unwrap();
        assert_eq!(lattice.num_leaves(), 2);
        assert!(lattice.validate().is_valid());
    }

    #[test]
    fn half_covered_cell_is_a_refinement_violation() {
        // gens: {0}, {1,2}, {3,4,5,6}; cell 1 lists only child 3 although 4 refines it too
        let mut parts = binary(2).to_parts();
        parts.children.insert(1, vec![3]);
        let report = validate(&parts);
        assert!(report.has(ViolationKind::Refinement), "{report}");
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].cell, Some(1));
        assert!(Lattice::from_parts(&parts).is_err());
    }

    #[test]
    fn unrefined_cell_and_orphan_are_reported() {
        let parts = LatticeParts::from_parent(
            vec![vec![0], vec![1, 2], vec![3, 4]],
            [(1, 0), (2, 0), (3, 1)].into(),
        );
        let report = validate(&parts);
        assert!(report.has(ViolationKind::Refinement));
        assert!(report.has(ViolationKind::Partition));
    }

    #[test]
    fn skipped_generation_and_unknown_parent() {
        let parts = LatticeParts::from_parent(
            vec![vec![0], vec![1], vec![2]],
            [(1, 0), (2, 0)].into(),
        );
        assert!(validate(&parts).has(ViolationKind::Generation));

        let mut parts = binary(1).to_parts();
        parts.parent.insert(2, 99);
        assert!(validate(&parts).has(ViolationKind::UnknownCell));

        let parts = LatticeParts::from_parent(vec![vec![0], vec![0]], BTreeMap::new());
        assert!(validate(&parts).has(ViolationKind::Duplicate));
        assert!(validate(&LatticeParts::default()).has(ViolationKind::Partition));
    }

    #[test]
    fn cells_within_examples() {
        let l = binary(1);
        let root = l.cell(0).unwrap();
        let labels = |v: Vec<CellId>| v.into_iter().map(|c| l.label(c)).collect::<Vec<_>>();
        assert_eq!(labels(l.cells_within(root).unwrap()), vec![0, 1, 2]);
        assert_eq!(labels(l.cells_within(l.cell(2).unwrap()).unwrap()), vec![2]);

        let l2 = binary(2);
        let within: Vec<u64> = l2
            .cells_within(l2.cell(1).unwrap())
            .unwrap()
            .into_iter()
            .map(|c| l2.label(c))
            .collect();
        assert_eq!(within, vec![1, 3, 4]);
        assert!(matches!(l2.cell(42), Err(Error::NoSuchCell(42))));
    }

    #[test]
    fn cells_within_counts_single_child_copies() {
        // 0 -> 1 -> {2, 3}: cell 1 repeats cell 0 in generation 1
        let parts = LatticeParts::from_parent(
            vec![vec![0], vec![1], vec![2, 3]],
            [(1, 0), (2, 1), (3, 1)].into(),
        );
        let l = Lattice::from_parts(&parts).unwrap();
        let within: Vec<u64> = l
            .cells_within(l.cell(1).unwrap())
            .unwrap()
            .into_iter()
            .map(|c| l.label(c))
            .collect();
        assert_eq!(within, vec![0, 1, 2, 3]);
        assert_eq!(l.chain_top(l.cell(1).unwrap()), l.cell(0).unwrap());
    }

    #[test]
    fn every_leaf_has_one_cell_per_generation() {
        let l = Lattice::regular(3, 3).unwrap();
        for (pos, &leaf) in l.leaves().iter().enumerate() {
            for n in 0..l.num_generations() {
                let containing = l.generation(n).filter(|&c| l.span(c).contains(&pos)).count();
                assert_eq!(containing, 1);
            }
            assert_eq!(l.chain(leaf).len(), l.num_generations());
        }
        assert_eq!(l.cells_within(l.cell(0).unwrap()).unwrap().len(), l.len());
    }

    #[test]
    fn nonconsecutive_labels_and_interleaved_children() {
        // generation 1 lists children of different parents interleaved
        let parts = LatticeParts::from_parent(
            vec![vec![10, 20], vec![11, 21, 12, 22]],
            [(11, 10), (12, 10), (21, 20), (22, 20)].into(),
        );
        let l = Lattice::from_parts(&parts).unwrap();
        let ten = l.cell(10).unwrap();
        let leaves: Vec<u64> = l.span(ten).map(|i| l.label(l.leaves()[i])).collect();
        assert_eq!(leaves, vec![11, 12]);
        assert_eq!(l.to_parts(), parts);
    }
}

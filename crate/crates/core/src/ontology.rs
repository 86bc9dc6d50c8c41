//! Concept taxonomies for the three context dimensions.
//!
//! Each dimension (location, time, social) has its own rooted tree of
//! concepts. Depth counts the nodes on the path to the root, both ends
//! included, so the root sits at depth 1. Concept similarity is the
//! Wu-Palmer ratio `2 * depth(lcs) / (depth(a) + depth(b))`.
//!
//! Taxonomies are immutable once built.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A context dimension. Situations carry exactly one concept per dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dimension {
    #[serde(alias = "location")]
    Location,
    #[serde(alias = "time")]
    Time,
    #[serde(alias = "social")]
    Social,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Location, Dimension::Time, Dimension::Social];

    pub fn index(self) -> usize {
        match self {
            Dimension::Location => 0,
            Dimension::Time => 1,
            Dimension::Social => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Location => "Location",
            Dimension::Time => "Time",
            Dimension::Social => "Social",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Index of a node inside one taxonomy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A concept qualified by the dimension whose taxonomy it lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConceptId {
    pub dimension: Dimension,
    pub node: NodeId,
}

/// On-disk form of a taxonomy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxonomyFile {
    pub dimension: Dimension,
    pub root: String,
    pub nodes: Vec<NodeRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: String,
    pub parent: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Taxonomy {
    dimension: Dimension,
    names: Vec<String>,
    parents: Vec<Option<NodeId>>,
    depths: Vec<u32>,
    lookup: HashMap<String, NodeId>,
    root: NodeId,
}

impl PartialEq for Taxonomy {
    fn eq(&self, other: &Self) -> bool {
        self.dimension == other.dimension
            && self.names == other.names
            && self.parents == other.parents
            && self.root == other.root
    }
}

impl Taxonomy {
    /// Builds a taxonomy from `(id, parent)` pairs.
    ///
    /// The root may be listed with no parent or omitted. Every other node
    /// needs exactly one parent. Duplicate ids, unknown parents, cycles and
    /// nodes that cannot reach the root are rejected, naming the first
    /// offending node in input order.
    pub fn from_edges<S: AsRef<str>>(dimension: Dimension, root: &str, nodes: &[(S, Option<S>)]) -> Result<Self> {
        let invalid = |node: &str, reason: &str| Error::InvalidTaxonomy {
            dimension,
            node: node.to_string(),
            reason: reason.to_string(),
        };

        let mut names = vec![root.to_string()];
        let mut lookup = HashMap::new();
        lookup.insert(root.to_string(), NodeId(0));
        let mut raw_parents: Vec<Option<&str>> = vec![None];

        for (id, parent) in nodes {
            let id = id.as_ref();
            let parent = parent.as_ref().map(|p| p.as_ref());
            if id == root {
                if parent.is_some() {
                    return Err(invalid(id, "the root must not have a parent"));
                }
                continue;
            }
            if lookup.contains_key(id) {
                return Err(invalid(
                    id,
                    "listed more than once (taxonomies are trees; multiple parents are not supported)",
                ));
            }
            let Some(parent) = parent else {
                return Err(invalid(id, "has no parent but is not the declared root"));
            };
            lookup.insert(id.to_string(), NodeId(names.len() as u32));
            names.push(id.to_string());
            raw_parents.push(Some(parent));
        }

        let mut parents = Vec::with_capacity(names.len());
        for (name, parent) in names.iter().zip(&raw_parents) {
            match parent {
                None => parents.push(None),
                Some(p) => match lookup.get(*p) {
                    Some(&pid) => parents.push(Some(pid)),
                    None => {
                        return Err(invalid(name, &format!("parent `{p}` is not defined")));
                    }
                },
            }
        }

        // Depth by walking parent chains; a chain longer than the node count
        // can only be a cycle.
        let n = names.len();
        let mut depths = vec![0u32; n];
        depths[0] = 1;
        let mut chain = Vec::new();
        for start in 0..n {
            if depths[start] != 0 {
                continue;
            }
            chain.clear();
            let mut cur = start;
            while depths[cur] == 0 {
                chain.push(cur);
                if chain.len() > n {
                    return Err(invalid(
                        &names[start],
                        "is not reachable from the root (its parent chain forms a cycle)",
                    ));
                }
                cur = parents[cur].expect("only the root lacks a parent").index();
            }
            let mut depth = depths[cur];
            for &node in chain.iter().rev() {
                depth += 1;
                depths[node] = depth;
            }
        }

        Ok(Taxonomy {
            dimension,
            names,
            parents,
            depths,
            lookup,
            root: NodeId(0),
        })
    }

    pub fn from_file(file: &TaxonomyFile) -> Result<Self> {
        let edges: Vec<(&str, Option<&str>)> = file
            .nodes
            .iter()
            .map(|n| (n.id.as_str(), n.parent.as_deref()))
            .collect();
        Self::from_edges(file.dimension, &file.root, &edges)
    }

    pub fn to_file(&self) -> TaxonomyFile {
        TaxonomyFile {
            dimension: self.dimension,
            root: self.names[self.root.index()].clone(),
            nodes: self
                .names
                .iter()
                .zip(&self.parents)
                .map(|(id, parent)| NodeRecord {
                    id: id.clone(),
                    parent: parent.map(|p| self.names[p.index()].clone()),
                })
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TaxonomyFile = serde_json::from_str(text).map_err(|e| Error::json("taxonomy", e))?;
        Self::from_file(&file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("taxonomy serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: TaxonomyFile = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        Self::from_file(&file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    pub fn root(&self) -> ConceptId {
        self.id(self.root)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// All concepts in insertion order (root first).
    pub fn concepts(&self) -> impl Iterator<Item = ConceptId> + '_ {
        (0..self.names.len() as u32).map(|i| self.id(NodeId(i)))
    }

    /// Concepts with no children.
    pub fn leaves(&self) -> Vec<ConceptId> {
        let mut has_child = vec![false; self.names.len()];
        for p in self.parents.iter().flatten() {
            has_child[p.index()] = true;
        }
        self.concepts().filter(|c| !has_child[c.node.index()]).collect()
    }

    pub fn concept(&self, name: &str) -> Result<ConceptId> {
        self.lookup
            .get(name)
            .map(|&n| self.id(n))
            .ok_or_else(|| Error::UnknownConcept {
                dimension: self.dimension,
                concept: name.to_string(),
            })
    }

    pub fn name(&self, c: ConceptId) -> Result<&str> {
        let node = self.check(c)?;
        Ok(&self.names[node.index()])
    }

    pub fn parent(&self, c: ConceptId) -> Result<Option<ConceptId>> {
        let node = self.check(c)?;
        Ok(self.parents[node.index()].map(|p| self.id(p)))
    }

    /// `c` followed by each of its ancestors up to the root.
    pub fn ancestors(&self, c: ConceptId) -> Result<impl Iterator<Item = ConceptId> + '_> {
        let node = self.check(c)?;
        Ok(std::iter::successors(Some(node), |n| self.parents[n.index()]).map(|n| self.id(n)))
    }

    /// Number of nodes on the path from `c` to the root, inclusive.
    pub fn depth(&self, c: ConceptId) -> Result<u32> {
        let node = self.check(c)?;
        Ok(self.depths[node.index()])
    }

    /// Deepest common ancestor-or-self of `a` and `b`.
    pub fn lcs(&self, a: ConceptId, b: ConceptId) -> Result<ConceptId> {
        let a = self.check(a)?;
        let b = self.check(b)?;
        Ok(self.id(self.lcs_node(a, b)))
    }

    /// Wu-Palmer similarity in `(0, 1]`.
    pub fn similarity(&self, a: ConceptId, b: ConceptId) -> Result<f64> {
        let a = self.check(a)?;
        let b = self.check(b)?;
        Ok(self.node_similarity(a, b))
    }

    pub(crate) fn node_similarity(&self, a: NodeId, b: NodeId) -> f64 {
        if a == b {
            return 1.0;
        }
        let lcs = self.lcs_node(a, b);
        let num = 2.0 * f64::from(self.depths[lcs.index()]);
        num / f64::from(self.depths[a.index()] + self.depths[b.index()])
    }

    fn lcs_node(&self, mut a: NodeId, mut b: NodeId) -> NodeId {
        let depth = |n: NodeId| self.depths[n.index()];
        let up = |n: NodeId| self.parents[n.index()].expect("non-root has a parent");
        while depth(a) > depth(b) {
            a = up(a);
        }
        while depth(b) > depth(a) {
            b = up(b);
        }
        while a != b {
            a = up(a);
            b = up(b);
        }
        a
    }

    pub(crate) fn contains(&self, node: NodeId) -> bool {
        node.index() < self.names.len()
    }

    pub(crate) fn node_name(&self, node: NodeId) -> &str {
        &self.names[node.index()]
    }

    fn id(&self, node: NodeId) -> ConceptId {
        ConceptId {
            dimension: self.dimension,
            node,
        }
    }

    fn check(&self, c: ConceptId) -> Result<NodeId> {
        if c.dimension != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: c.dimension,
            });
        }
        if !self.contains(c.node) {
            return Err(Error::UnknownConcept {
                dimension: self.dimension,
                concept: format!("#{}", c.node.0),
            });
        }
        Ok(c.node)
    }
}

/// The three taxonomies, one per dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Ontology {
    taxonomies: [Taxonomy; 3],
}

impl Ontology {
    pub fn new(location: Taxonomy, time: Taxonomy, social: Taxonomy) -> Result<Self> {
        for (tax, expected) in [&location, &time, &social].into_iter().zip(Dimension::ALL) {
            if tax.dimension() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    found: tax.dimension(),
                });
            }
        }
        Ok(Ontology {
            taxonomies: [location, time, social],
        })
    }

    pub fn taxonomy(&self, dimension: Dimension) -> &Taxonomy {
        &self.taxonomies[dimension.index()]
    }

    pub fn taxonomies(&self) -> &[Taxonomy; 3] {
        &self.taxonomies
    }

    /// Resolves a concept name in the given dimension.
    pub fn concept(&self, dimension: Dimension, name: &str) -> Result<ConceptId> {
        self.taxonomy(dimension).concept(name)
    }

    pub fn concept_sim(&self, a: ConceptId, b: ConceptId) -> Result<f64> {
        if a.dimension != b.dimension {
            return Err(Error::DimensionMismatch {
                expected: a.dimension,
                found: b.dimension,
            });
        }
        self.taxonomy(a.dimension).similarity(a, b)
    }

    /// Loads `taxonomy_location.json`, `taxonomy_time.json` and
    /// `taxonomy_social.json` from a directory.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let [l, t, s] = Dimension::ALL.map(|d| dir.join(taxonomy_file_name(d)));
        Ontology::new(Taxonomy::load(l)?, Taxonomy::load(t)?, Taxonomy::load(s)?)
    }

    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        for tax in &self.taxonomies {
            tax.save(dir.join(taxonomy_file_name(tax.dimension())))?;
        }
        Ok(())
    }
}

pub fn taxonomy_file_name(dimension: Dimension) -> String {
    format!("taxonomy_{}.json", dimension.as_str().to_lowercase())
}

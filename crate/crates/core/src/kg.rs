//! Knowledge-graph data model: TSV ingestion, inverse/self-loop augmentation,
//! filter indices and relation categories.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{KgeError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: usize,
    pub rel: usize,
    pub tail: usize,
}

impl Triple {
    pub fn new(head: usize, rel: usize, tail: usize) -> Self {
        Triple { head, rel, tail }
    }
}

/// Bijective string ↔ dense id mapping, ids assigned in first-appearance order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocab {
    names: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Vocabulary of `n` synthetic names `prefix0 .. prefix{n-1}`.
    pub fn numbered(prefix: &str, n: usize) -> Self {
        let mut v = Vocab::new();
        for i in 0..n {
            v.intern(&format!("{prefix}{i}"));
        }
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

#[derive(Clone, Debug, Default)]
pub struct KnowledgeGraph {
    pub entities: Vocab,
    pub relations: Vocab,
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
}

impl KnowledgeGraph {
    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn all_triples(&self) -> impl Iterator<Item = &Triple> {
        self.train.iter().chain(&self.valid).chain(&self.test)
    }

    /// Builds a graph from already-indexed triples with synthetic names.
    /// Duplicates within a split are dropped.
    pub fn from_indexed(
        num_entities: usize,
        num_relations: usize,
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
    ) -> Result<Self> {
        let kg = KnowledgeGraph {
            entities: Vocab::numbered("e", num_entities),
            relations: Vocab::numbered("r", num_relations),
            train: dedup(train),
            valid: dedup(valid),
            test: dedup(test),
        };
        kg.validate()?;
        Ok(kg)
    }

    /// Checks that every triple refers to known ids.
    pub fn validate(&self) -> Result<()> {
        let (nv, nr) = (self.num_entities(), self.num_relations());
        for t in self.all_triples() {
            if t.head >= nv || t.tail >= nv || t.rel >= nr {
                return Err(KgeError::InvalidArgument(format!(
                    "triple {t:?} out of range for |V|={nv}, |R|={nr}"
                )));
            }
        }
        Ok(())
    }

    /// Parses TAB-separated `head relation tail` lines into `split`,
    /// extending the vocabularies as needed.
    pub fn read_split(&mut self, text: &str, split: Split, origin: &Path) -> Result<()> {
        let mut seen: HashSet<Triple> = self.split(split).iter().copied().collect();
        let mut parsed = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(KgeError::Parse {
                    path: origin.to_path_buf(),
                    line: lineno + 1,
                    message: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            let head = self.entities.intern(fields[0]);
            let rel = self.relations.intern(fields[1]);
            let tail = self.entities.intern(fields[2]);
            let t = Triple { head, rel, tail };
            if seen.insert(t) {
                parsed.push(t);
            }
        }
        match split {
            Split::Train => self.train.extend(parsed),
            Split::Valid => self.valid.extend(parsed),
            Split::Test => self.test.extend(parsed),
        }
        Ok(())
    }

    /// Loads `train`, `valid` and `test` files, in that order, into one graph.
    pub fn load_splits(train: &Path, valid: &Path, test: &Path) -> Result<Self> {
        let mut kg = KnowledgeGraph::default();
        for (path, split) in [
            (train, Split::Train),
            (valid, Split::Valid),
            (test, Split::Test),
        ] {
            let text = fs::read_to_string(path).map_err(|e| KgeError::io(path, e))?;
            kg.read_split(&text, split, path)?;
        }
        Ok(kg)
    }

    /// Loads a dataset directory holding `train.txt`, `valid.txt`, `test.txt`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        Self::load_splits(
            &dir.join("train.txt"),
            &dir.join("valid.txt"),
            &dir.join("test.txt"),
        )
    }
}

/// Loads a single triple file as the training split.
pub fn load_triples(path: &Path) -> Result<KnowledgeGraph> {
    let text = fs::read_to_string(path).map_err(|e| KgeError::io(path, e))?;
    let mut kg = KnowledgeGraph::default();
    kg.read_split(&text, Split::Train, path)?;
    Ok(kg)
}

fn dedup(triples: Vec<Triple>) -> Vec<Triple> {
    let mut seen = HashSet::with_capacity(triples.len());
    triples.into_iter().filter(|t| seen.insert(*t)).collect()
}

/// Which weight family an augmented edge uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Original,
    Inverse,
    SelfLoop,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Original, Direction::Inverse, Direction::SelfLoop];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Directed edge `src → dst` labelled with an extended relation id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub rel: usize,
    pub dir: Direction,
}

/// Training graph extended with inverse edges and one self-loop per node.
///
/// Extended relation ids: `r` for originals, `r + |R|` for inverses and
/// `2|R|` for the self-loop relation.
#[derive(Clone, Debug)]
pub struct AugmentedGraph {
    num_nodes: usize,
    num_base_relations: usize,
    edges: Vec<Edge>,
    incoming: Vec<Vec<usize>>,
}

impl AugmentedGraph {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_base_relations(&self) -> usize {
        self.num_base_relations
    }

    /// `|R'| = 2|R| + 1`.
    pub fn num_relations(&self) -> usize {
        2 * self.num_base_relations + 1
    }

    pub fn inverse_of(&self, rel: usize) -> usize {
        inverse_relation(rel, self.num_base_relations)
    }

    pub fn self_loop_relation(&self) -> usize {
        2 * self.num_base_relations
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Indices into [`edges`](Self::edges) of the edges ending at `v`.
    pub fn incoming(&self, v: usize) -> &[usize] {
        &self.incoming[v]
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.incoming[v].len()
    }

    /// Builds the graph directly from an edge list over `num_nodes` nodes.
    /// Used for toy graphs and for tests that relabel nodes.
    pub fn from_edges(
        num_nodes: usize,
        num_base_relations: usize,
        edges: Vec<Edge>,
    ) -> Result<Self> {
        let nr = 2 * num_base_relations + 1;
        let mut incoming = vec![Vec::new(); num_nodes];
        for (i, e) in edges.iter().enumerate() {
            if e.src >= num_nodes || e.dst >= num_nodes || e.rel >= nr {
                return Err(KgeError::InvalidArgument(format!(
                    "edge {e:?} out of range"
                )));
            }
            incoming[e.dst].push(i);
        }
        Ok(AugmentedGraph {
            num_nodes,
            num_base_relations,
            edges,
            incoming,
        })
    }
}

/// Id of the inverse of base relation `rel`.
pub fn inverse_relation(rel: usize, num_base_relations: usize) -> usize {
    rel + num_base_relations
}

/// Adds `(v, u, r⁻¹)` for every training triple `(u, r, v)` and `(u, u, ⊤)`
/// for every entity. Entities with no training triple get only the self-loop.
pub fn augment(kg: &KnowledgeGraph) -> AugmentedGraph {
    let nr = kg.num_relations();
    let nv = kg.num_entities();
    let mut edges = Vec::with_capacity(2 * kg.train.len() + nv);
    for t in &kg.train {
        edges.push(Edge {
            src: t.head,
            dst: t.tail,
            rel: t.rel,
            dir: Direction::Original,
        });
        edges.push(Edge {
            src: t.tail,
            dst: t.head,
            rel: inverse_relation(t.rel, nr),
            dir: Direction::Inverse,
        });
    }
    for u in 0..nv {
        edges.push(Edge {
            src: u,
            dst: u,
            rel: 2 * nr,
            dir: Direction::SelfLoop,
        });
    }
    AugmentedGraph::from_edges(nv, nr, edges).expect("ids validated by construction")
}

/// Known-true completions over train ∪ valid ∪ test.
#[derive(Clone, Debug, Default)]
pub struct FilterIndex {
    tails: BTreeMap<(usize, usize), BTreeSet<usize>>,
    heads: BTreeMap<(usize, usize), BTreeSet<usize>>,
}

static EMPTY: BTreeSet<usize> = BTreeSet::new();

impl FilterIndex {
    pub fn from_triples<'a>(triples: impl IntoIterator<Item = &'a Triple>) -> Self {
        let mut idx = FilterIndex::default();
        for t in triples {
            idx.insert(t);
        }
        idx
    }

    pub fn insert(&mut self, t: &Triple) {
        self.tails
            .entry((t.head, t.rel))
            .or_default()
            .insert(t.tail);
        self.heads
            .entry((t.tail, t.rel))
            .or_default()
            .insert(t.head);
    }

    /// Valid tails of `(head, rel)`.
    pub fn tails(&self, head: usize, rel: usize) -> &BTreeSet<usize> {
        self.tails.get(&(head, rel)).unwrap_or(&EMPTY)
    }

    /// Valid heads of `(tail, rel)`.
    pub fn heads(&self, tail: usize, rel: usize) -> &BTreeSet<usize> {
        self.heads.get(&(tail, rel)).unwrap_or(&EMPTY)
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.tails(t.head, t.rel).contains(&t.tail)
    }
}

pub fn build_filter_index(kg: &KnowledgeGraph) -> FilterIndex {
    FilterIndex::from_triples(kg.all_triples())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CategoryLabel {
    OneToOne,
    OneToMany,
    ManyToOne,
    ManyToMany,
}

impl CategoryLabel {
    pub const ALL: [CategoryLabel; 4] = [
        CategoryLabel::OneToOne,
        CategoryLabel::OneToMany,
        CategoryLabel::ManyToOne,
        CategoryLabel::ManyToMany,
    ];

    pub fn classify(tails_per_head: f64, heads_per_tail: f64, threshold: f64) -> Self {
        match (tails_per_head > threshold, heads_per_tail > threshold) {
            (false, false) => CategoryLabel::OneToOne,
            (true, false) => CategoryLabel::OneToMany,
            (false, true) => CategoryLabel::ManyToOne,
            (true, true) => CategoryLabel::ManyToMany,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CategoryLabel::OneToOne => "1-1",
            CategoryLabel::OneToMany => "1-N",
            CategoryLabel::ManyToOne => "N-1",
            CategoryLabel::ManyToMany => "N-N",
        }
    }
}

impl fmt::Display for CategoryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelationCategory {
    pub relation: usize,
    /// `None` when the relation has no training triple.
    pub label: Option<CategoryLabel>,
    pub tails_per_head: Option<f64>,
    pub heads_per_tail: Option<f64>,
}

pub const DEFAULT_CATEGORY_THRESHOLD: f64 = 1.5;

/// Labels every relation from training-split statistics.
pub fn relation_categories(kg: &KnowledgeGraph, threshold: f64) -> Vec<RelationCategory> {
    let nr = kg.num_relations();
    let mut count = vec![0usize; nr];
    let mut heads: Vec<HashSet<usize>> = vec![HashSet::new(); nr];
    let mut tails: Vec<HashSet<usize>> = vec![HashSet::new(); nr];
    for t in &kg.train {
        count[t.rel] += 1;
        heads[t.rel].insert(t.head);
        tails[t.rel].insert(t.tail);
    }
    (0..nr)
        .map(|r| {
            if count[r] == 0 {
                return RelationCategory {
                    relation: r,
                    label: None,
                    tails_per_head: None,
                    heads_per_tail: None,
                };
            }
            let tph = count[r] as f64 / heads[r].len() as f64;
            let hpt = count[r] as f64 / tails[r].len() as f64;
            RelationCategory {
                relation: r,
                label: Some(CategoryLabel::classify(tph, hpt, threshold)),
                tails_per_head: Some(tph),
                heads_per_tail: Some(hpt),
            }
        })
        .collect()
}

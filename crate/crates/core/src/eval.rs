//! Filtered link-prediction ranking.
//!
//! Tail queries `(h, r, ?)` score every entity as the object. Head queries are
//! answered as tail queries on the inverse relation, `(t, r⁻¹, ?)`. All other
//! known-true answers are removed before ranking, and ties are resolved by
//! the mean rank among the tied candidates.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{KgeError, Result};
use crate::kg::{
    inverse_relation, relation_categories, CategoryLabel, FilterIndex, KnowledgeGraph, Split,
    Triple,
};
use crate::model::FrozenModel;

/// Anything that can score all candidate objects of a query.
pub trait LinkScorer: Sync {
    fn score_objects(&self, subject: usize, relation: usize) -> Result<Vec<f64>>;
}

impl LinkScorer for FrozenModel<'_> {
    fn score_objects(&self, subject: usize, relation: usize) -> Result<Vec<f64>> {
        FrozenModel::score_objects(self, subject, relation)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Head,
    Tail,
    Both,
}

impl Side {
    fn heads(self) -> bool {
        matches!(self, Side::Head | Side::Both)
    }

    fn tails(self) -> bool {
        matches!(self, Side::Tail | Side::Both)
    }
}

impl FromStr for Side {
    type Err = KgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "head" => Ok(Side::Head),
            "tail" => Ok(Side::Tail),
            "both" => Ok(Side::Both),
            other => Err(KgeError::InvalidArgument(format!("unknown side '{other}'"))),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Head => "head",
            Side::Tail => "tail",
            Side::Both => "both",
        })
    }
}

/// Rank of `target` among the candidates not in `filtered` (the target
/// itself is always kept). Ties count half.
pub fn filtered_rank(scores: &[f64], target: usize, filtered: &BTreeSet<usize>) -> Result<f64> {
    let Some(&t) = scores.get(target) else {
        return Err(KgeError::Internal(format!(
            "target {target} outside {} candidates",
            scores.len()
        )));
    };
    if scores.iter().any(|s| s.is_nan()) {
        return Err(KgeError::NonFinite("candidate score".into()));
    }
    let (mut greater, mut ties) = (0usize, 0usize);
    for (o, &s) in scores.iter().enumerate() {
        if o == target || filtered.contains(&o) {
            continue;
        }
        if s > t {
            greater += 1;
        } else if s == t {
            ties += 1;
        }
    }
    Ok(1.0 + greater as f64 + ties as f64 / 2.0)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub count: usize,
    pub mrr: f64,
    pub mr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
}

impl Metrics {
    pub fn from_ranks(ranks: &[f64]) -> Self {
        if ranks.is_empty() {
            return Metrics::default();
        }
        let n = ranks.len() as f64;
        let hits = |k: f64| ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
        Metrics {
            count: ranks.len(),
            mrr: ranks.iter().map(|r| 1.0 / r).sum::<f64>() / n,
            mr: ranks.iter().sum::<f64>() / n,
            hits1: hits(1.0),
            hits3: hits(3.0),
            hits10: hits(10.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CategoryReport {
    pub category: String,
    pub relations: usize,
    pub head: Option<Metrics>,
    pub tail: Option<Metrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankingReport {
    pub side: Side,
    pub overall: Metrics,
    pub head: Option<Metrics>,
    pub tail: Option<Metrics>,
    pub per_category: Vec<CategoryReport>,
}

/// Per-triple head and tail ranks.
pub fn rank_triples(
    scorer: &dyn LinkScorer,
    triples: &[Triple],
    num_base_relations: usize,
    filter: &FilterIndex,
    side: Side,
) -> Result<Vec<(Option<f64>, Option<f64>)>> {
    triples
        .par_iter()
        .map(|t| {
            let tail = if side.tails() {
                let scores = scorer.score_objects(t.head, t.rel)?;
                Some(filtered_rank(&scores, t.tail, filter.tails(t.head, t.rel))?)
            } else {
                None
            };
            let head = if side.heads() {
                let scores =
                    scorer.score_objects(t.tail, inverse_relation(t.rel, num_base_relations))?;
                Some(filtered_rank(&scores, t.head, filter.heads(t.tail, t.rel))?)
            } else {
                None
            };
            Ok((head, tail))
        })
        .collect()
}

/// Ranks every triple of `split` and aggregates overall, per-side and
/// per-relation-category metrics. Categories come from the training split.
pub fn evaluate_filtered(
    scorer: &dyn LinkScorer,
    kg: &KnowledgeGraph,
    split: Split,
    filter: &FilterIndex,
    side: Side,
    category_threshold: f64,
) -> Result<RankingReport> {
    let triples = kg.split(split);
    let ranks = rank_triples(scorer, triples, kg.num_relations(), filter, side)?;
    let heads: Vec<f64> = ranks.iter().filter_map(|r| r.0).collect();
    let tails: Vec<f64> = ranks.iter().filter_map(|r| r.1).collect();
    let all: Vec<f64> = heads.iter().chain(&tails).copied().collect();

    let categories = relation_categories(kg, category_threshold);
    let mut per_category = Vec::new();
    let distinct: BTreeSet<CategoryLabel> = categories.iter().filter_map(|c| c.label).collect();
    for label in distinct {
        let in_cat = |rel: usize| categories[rel].label == Some(label);
        let (mut h, mut t) = (Vec::new(), Vec::new());
        for (triple, (hr, tr)) in triples.iter().zip(&ranks) {
            if in_cat(triple.rel) {
                h.extend(hr);
                t.extend(tr);
            }
        }
        per_category.push(CategoryReport {
            relations: categories.iter().filter(|c| in_cat(c.relation)).count(),
            category: label.to_string(),
            head: side.heads().then(|| Metrics::from_ranks(&h)),
            tail: side.tails().then(|| Metrics::from_ranks(&t)),
        });
    }

    Ok(RankingReport {
        side,
        overall: Metrics::from_ranks(&all),
        head: side.heads().then(|| Metrics::from_ranks(&heads)),
        tail: side.tails().then(|| Metrics::from_ranks(&tails)),
        per_category,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Table(Vec<Vec<f64>>, usize);

    impl LinkScorer for Table {
        fn score_objects(&self, subject: usize, relation: usize) -> Result<Vec<f64>> {
            Ok(self.0[subject * self.1 + relation].clone())
        }
    }

    #[test]
    fn strictly_best_target_ranks_first() {
        let r = filtered_rank(&[0.1, 0.9, 0.3], 1, &BTreeSet::new()).unwrap();
        assert_eq!(r, 1.0);
        assert_eq!(Metrics::from_ranks(&[r]).mrr, 1.0);
    }

    #[test]
    fn all_tied_gives_mean_rank() {
        let r = filtered_rank(&[0.5; 5], 2, &BTreeSet::new()).unwrap();
        assert_eq!(r, 3.0);
    }

    #[test]
    fn filtering_removes_competitors_but_not_target() {
        let scores = [0.9, 0.8, 0.1, 0.7];
        let filtered: BTreeSet<usize> = [0, 2].into_iter().collect();
        assert_eq!(filtered_rank(&scores, 3, &BTreeSet::new()).unwrap(), 3.0);
        assert_eq!(filtered_rank(&scores, 3, &filtered).unwrap(), 2.0);
        let with_target: BTreeSet<usize> = [3].into_iter().collect();
        assert_eq!(filtered_rank(&scores, 3, &with_target).unwrap(), 3.0);
        assert!(filtered_rank(&scores, 7, &filtered).is_err());
        assert!(filtered_rank(&[f64::NAN, 1.0], 1, &filtered).is_err());
    }

    #[test]
    fn metrics_are_ordered() {
        let m = Metrics::from_ranks(&[1.0, 2.5, 4.0, 12.0]);
        assert!(m.hits1 <= m.hits3 && m.hits3 <= m.hits10 && m.hits10 <= 1.0);
        assert!(m.mrr >= m.hits1);
        assert!(m.mr >= 1.0);
        assert_eq!(m.hits1, 0.25);
        assert_eq!(m.hits3, 0.5);
    }

    #[test]
    fn side_selection_and_categories() {
        let kg = KnowledgeGraph::from_indexed(
            3,
            1,
            vec![Triple::new(0, 0, 1)],
            vec![],
            vec![Triple::new(0, 0, 1)],
        )
        .unwrap();
        // Relations: 0, inverse 1, self loop 2. Tail query (0, 0) and head
        // query (1, 1).
        let mut table = vec![vec![0.0; 3]; 9];
        table[0] = vec![0.0, 1.0, 0.5];
        table[3 + 1] = vec![0.2, 0.1, 0.3];
        let scorer = Table(table, 3);
        let filter = FilterIndex::from_triples(kg.all_triples());
        let report =
            evaluate_filtered(&scorer, &kg, Split::Test, &filter, Side::Both, 1.5).unwrap();
        assert_eq!(report.tail.unwrap().mr, 1.0);
        assert_eq!(report.head.unwrap().mr, 2.0);
        assert_eq!(report.overall.count, 2);
        assert_eq!(report.per_category.len(), 1);
        assert_eq!(report.per_category[0].category, "1-1");
        let tail_only =
            evaluate_filtered(&scorer, &kg, Split::Test, &filter, Side::Tail, 1.5).unwrap();
        assert!(tail_only.head.is_none());
        assert_eq!(tail_only.overall.count, 1);
    }
}

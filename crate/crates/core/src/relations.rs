//! Co-occurrence relations between PICO-typed concepts and their Sankey
//! layout.
//!
//! Two typed concepts are related when they occur in the same abstract.
//! Only Population-Intervention and Intervention-Outcome pairs are formed;
//! a pair's strength is the number of abstracts attesting it.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::pico::{PicoCategory, TypedConcept};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypedConceptPair {
    pub left: TypedConcept,
    pub right: TypedConcept,
    pub supporting_docs: BTreeSet<String>,
    pub strength: usize,
}

fn pairs_with(left: PicoCategory) -> Option<PicoCategory> {
    match left {
        PicoCategory::Population => Some(PicoCategory::Intervention),
        PicoCategory::Intervention => Some(PicoCategory::Outcome),
        PicoCategory::Outcome => None,
    }
}

/// Merges per-document P×I and I×O combinations. Output is sorted by
/// (left, right) concept ids and categories, independent of input order.
pub fn build_relations<'a, I, S>(docs: I) -> Vec<TypedConceptPair>
where
    I: IntoIterator<Item = (S, &'a [TypedConcept])>,
    S: AsRef<str>,
{
    type Key = ((String, PicoCategory), (String, PicoCategory));
    let mut merged: BTreeMap<Key, BTreeSet<String>> = BTreeMap::new();
    for (doc_id, concepts) in docs {
        let unique: BTreeSet<(PicoCategory, &str)> =
            concepts.iter().map(|c| (c.category, c.concept_id.as_str())).collect();
        for &(lc, lid) in &unique {
            let Some(rc) = pairs_with(lc) else { continue };
            for &(_, rid) in unique.range((rc, "")..).take_while(|(c, _)| *c == rc) {
                merged
                    .entry(((lid.to_string(), lc), (rid.to_string(), rc)))
                    .or_default()
                    .insert(doc_id.as_ref().to_string());
            }
        }
    }
    merged
        .into_iter()
        .map(|(((lid, lc), (rid, rc)), docs)| TypedConceptPair {
            left: TypedConcept {
                concept_id: lid,
                category: lc,
            },
            right: TypedConcept {
                concept_id: rid,
                category: rc,
            },
            strength: docs.len(),
            supporting_docs: docs,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SankeyOptions {
    pub min_strength: usize,
    pub max_nodes_per_column: usize,
}

impl Default for SankeyOptions {
    fn default() -> Self {
        SankeyOptions {
            min_strength: 1,
            max_nodes_per_column: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SankeyNode {
    pub id: String,
    pub label: String,
    pub category: PicoCategory,
    pub column: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SankeyLink {
    pub source: String,
    pub target: String,
    pub value: usize,
    pub docs: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SankeyGraph {
    pub nodes: Vec<SankeyNode>,
    pub links: Vec<SankeyLink>,
}

impl SankeyGraph {
    /// Supporting documents of the link between two node ids.
    pub fn link_docs(&self, source: &str, target: &str) -> Option<&[String]> {
        self.links
            .iter()
            .find(|l| l.source == source && l.target == target)
            .map(|l| l.docs.as_slice())
    }
}

pub fn column(category: PicoCategory) -> u8 {
    match category {
        PicoCategory::Population => 0,
        PicoCategory::Intervention => 1,
        PicoCategory::Outcome => 2,
    }
}

/// Node id of a typed concept, e.g. `P:C0030705`.
pub fn node_id(concept: &TypedConcept) -> String {
    format!("{}:{}", concept.category.letter(), concept.concept_id)
}

/// Lays relations out in three columns (P, I, O).
///
/// Links weaker than `min_strength` are dropped first. A column with more than
/// `max_nodes_per_column` nodes keeps those with the largest total incident
/// strength (ties by label, then id); links touching a dropped node go too, as
/// do nodes left without links. Nodes are listed by column, then descending
/// strength; links by source then target node order.
pub fn to_sankey<F>(relations: &[TypedConceptPair], options: &SankeyOptions, label: F) -> SankeyGraph
where
    F: Fn(&str) -> String,
{
    let links: Vec<&TypedConceptPair> = relations
        .iter()
        .filter(|r| r.strength >= options.min_strength.max(1))
        .collect();

    let mut weight: HashMap<String, (usize, &TypedConcept)> = HashMap::new();
    for r in &links {
        for c in [&r.left, &r.right] {
            weight.entry(node_id(c)).or_insert((0, c)).0 += r.strength;
        }
    }

    let mut columns: [Vec<(String, usize, String, &TypedConcept)>; 3] = Default::default();
    for (id, (w, concept)) in weight {
        let l = label(&concept.concept_id);
        columns[column(concept.category) as usize].push((id, w, l, concept));
    }
    let mut kept: HashSet<String> = HashSet::new();
    for col in columns.iter_mut() {
        col.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.2.cmp(&b.2)).then_with(|| a.0.cmp(&b.0)));
        col.truncate(options.max_nodes_per_column);
        kept.extend(col.iter().map(|n| n.0.clone()));
    }

    let mut out_links: Vec<(usize, usize, SankeyLink)> = Vec::new();
    let mut linked: HashSet<String> = HashSet::new();
    let order: HashMap<&str, usize> = columns
        .iter()
        .flatten()
        .enumerate()
        .map(|(i, n)| (n.0.as_str(), i))
        .collect();
    for r in links {
        let (s, t) = (node_id(&r.left), node_id(&r.right));
        if !kept.contains(&s) || !kept.contains(&t) {
            continue;
        }
        linked.insert(s.clone());
        linked.insert(t.clone());
        out_links.push((
            order[s.as_str()],
            order[t.as_str()],
            SankeyLink {
                source: s,
                target: t,
                value: r.strength,
                docs: r.supporting_docs.iter().cloned().collect(),
            },
        ));
    }
    out_links.sort_by_key(|(s, t, _)| (*s, *t));

    let nodes = columns
        .into_iter()
        .flatten()
        .filter(|n| linked.contains(&n.0))
        .map(|(id, _, label, concept)| SankeyNode {
            id,
            label,
            category: concept.category,
            column: column(concept.category),
        })
        .collect();
    SankeyGraph {
        nodes,
        links: out_links.into_iter().map(|(_, _, l)| l).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use PicoCategory::*;

    fn tc(id: &str, category: PicoCategory) -> TypedConcept {
        TypedConcept {
            concept_id: id.to_string(),
            category,
        }
    }

    fn strengths(rel: &[TypedConceptPair]) -> Vec<(&str, &str, usize)> {
        rel.iter()
            .map(|r| (r.left.concept_id.as_str(), r.right.concept_id.as_str(), r.strength))
            .collect()
    }

    #[test]
    fn single_document_chain() {
        let doc = [tc("A", Population), tc("B", Intervention), tc("C", Outcome)];
        let rel = build_relations([("d1", &doc[..])]);
        assert_eq!(strengths(&rel), [("A", "B", 1), ("B", "C", 1)]);
    }

    #[test]
    fn shared_pair_counts_documents() {
        let doc = [tc("Patients", Population), tc("Vaccines", Intervention)];
        let rel = build_relations([("d1", &doc[..]), ("d2", &doc[..])]);
        assert_eq!(strengths(&rel), [("Patients", "Vaccines", 2)]);
        assert_eq!(rel[0].supporting_docs, BTreeSet::from(["d1".to_string(), "d2".to_string()]));
    }

    #[test]
    fn no_population_outcome_edges() {
        let doc = [tc("A", Population), tc("C", Outcome)];
        assert!(build_relations([("d1", &doc[..])]).is_empty());
        assert!(build_relations(std::iter::empty::<(&str, &[TypedConcept])>()).is_empty());
    }

    #[test]
    fn same_concept_in_two_roles_is_two_nodes() {
        let doc = [tc("X", Intervention), tc("X", Outcome), tc("P", Population)];
        let rel = build_relations([("d", &doc[..])]);
        assert_eq!(strengths(&rel), [("P", "X", 1), ("X", "X", 1)]);
        let g = to_sankey(&rel, &SankeyOptions::default(), str::to_string);
        let ids: Vec<&str> = g.nodes.iter().map(|n| n.id.as_str()).collect();
        assert_eq!(ids, ["P:P", "I:X", "O:X"]);
    }

    fn strength_112() -> Vec<TypedConceptPair> {
        let d1 = [tc("p1", Population), tc("i1", Intervention)];
        let d2 = [tc("i1", Intervention), tc("o1", Outcome)];
        let d3 = [tc("p2", Population), tc("i2", Intervention)];
        build_relations([("d1", &d1[..]), ("d2", &d2[..]), ("d3", &d3[..]), ("d4", &d2[..])])
    }

    #[test]
    fn min_strength_filters_links_and_orphans() {
        let rel = strength_112();
        assert_eq!(strengths(&rel), [("i1", "o1", 2), ("p1", "i1", 1), ("p2", "i2", 1)]);
        let all = to_sankey(&rel, &SankeyOptions::default(), str::to_uppercase);
        assert_eq!(all.links.len(), 3);
        assert_eq!(all.nodes.len(), 5);
        assert_eq!(all.nodes[0].label, "P1");
        let strong = to_sankey(
            &rel,
            &SankeyOptions {
                min_strength: 2,
                ..SankeyOptions::default()
            },
            str::to_string,
        );
        assert_eq!(strong.links.len(), 1);
        assert_eq!(strong.links[0].value, 2);
        assert_eq!(strong.links[0].docs, ["d2", "d4"]);
        assert_eq!(strong.nodes.len(), 2);
        assert_eq!(strong.link_docs("I:i1", "O:o1"), Some(&["d2".to_string(), "d4".to_string()][..]));
    }

    #[test]
    fn column_cap_keeps_strongest() {
        let rel = strength_112();
        let g = to_sankey(
            &rel,
            &SankeyOptions {
                min_strength: 1,
                max_nodes_per_column: 1,
            },
            str::to_string,
        );
        // Intervention column keeps i1 (strength 3); p1 beats p2 on label.
        let ids: Vec<&str> = g.nodes.iter().map(|n| n.id.as_str()).collect();
        assert_eq!(ids, ["P:p1", "I:i1", "O:o1"]);
        assert_eq!(g.links.len(), 2);
        for n in &g.nodes {
            assert!(g.links.iter().any(|l| l.source == n.id || l.target == n.id));
        }
    }
}

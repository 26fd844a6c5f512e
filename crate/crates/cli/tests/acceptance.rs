//! Acceptance suite: one line per criterion, non-zero exit when any fails.
//!
//! Every check compares library output against an oracle written here from
//! the definitions, not against the library's own helpers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use litscope::corpus::{CorpusFormat, CorpusStore, DocFilter};
use litscope::fixtures;
use litscope::keyness::g2;
use litscope::pico::{self, evaluate, viterbi, BioLabel, LabeledSequence, PicoCategory, TrainConfig, TypedConcept};
use litscope::relations::build_relations;
use litscope::search::InvertedIndex;
use litscope::topics::{coherence_cv, select_k, topics_for_rows, train_lda, ConceptBag, LdaConfig, TopicModel};
use litscope::vocab::{build_profiles, final_terms, top_frequent, StopList, Tagger, TermFilter, Vocabulary};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn main() {
    let criteria: &[Criterion] = &[
        ("g2-oracle", Duration::from_secs(1), g2_oracle),
        ("viterbi-exactness", Duration::from_secs(5), viterbi_exactness),
        ("pico-eval-harness", Duration::from_secs(1), pico_eval_harness),
        ("synthetic-pico-learning", Duration::from_secs(10), synthetic_pico_learning),
        ("lda-model", Duration::from_secs(60), lda_model),
        ("cv-coherence-oracle", Duration::from_secs(1), cv_oracle),
        ("topic-filter", Duration::from_secs(5), topic_filter),
        ("relation-strength", Duration::from_secs(1), relation_strength),
        ("bm25-oracle", Duration::from_secs(1), bm25_oracle),
        ("tagger", Duration::from_secs(1), tagger),
        ("end-to-end", Duration::from_secs(120), end_to_end),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    let mut out = std::io::stdout();
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let result = match panic::catch_unwind(AssertUnwindSafe(check)) {
            Ok(r) => r,
            Err(payload) => Err(payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .map_or_else(|| "panicked".to_string(), |m| format!("panicked: {m}"))),
        };
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > *budget => Err(format!("{detail}; took {elapsed:.2?}, budget {budget:?}")),
            other => other,
        };
        match result {
            Ok(detail) => writeln!(out, "PASS {name}: {detail} ({elapsed:.2?})").unwrap(),
            Err(detail) => {
                failed += 1;
                writeln!(out, "FAIL {name}: {detail} ({elapsed:.2?})").unwrap();
            }
        }
    }
    writeln!(out, "acceptance: {} passed, {failed} failed", criteria.len() - failed).unwrap();
    if failed > 0 {
        std::process::exit(1);
    }
}

// --- keyness ---------------------------------------------------------------

fn g2_direct(o1: f64, n1: f64, o2: f64, n2: f64) -> f64 {
    let e1 = n1 * (o1 + o2) / (n1 + n2);
    let e2 = n2 * (o1 + o2) / (n1 + n2);
    let mut sum = 0.0;
    if o1 > 0.0 {
        sum += o1 * (o1 / e1).ln();
    }
    if o2 > 0.0 {
        sum += o2 * (o2 / e2).ln();
    }
    2.0 * sum
}

fn g2_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2020);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n1 = rng.random_range(1..5000u64);
        let n2 = rng.random_range(1..5000u64);
        let o1 = rng.random_range(0..=n1);
        let o2 = rng.random_range(0..=n2);
        if o1 + o2 == 0 {
            ensure!(g2(o1, n1, o2, n2) == 0.0, "zero counts");
            continue;
        }
        let got = g2(o1, n1, o2, n2);
        let want = g2_direct(o1 as f64, n1 as f64, o2 as f64, n2 as f64).max(0.0);
        worst = worst.max((got - want).abs());
        ensure!(close(got, want, 1e-9), "({o1},{n1},{o2},{n2}): {got} vs {want}");
    }
    ensure!(g2(5, 100, 10, 200) == 0.0, "(5,100,10,200) = {}", g2(5, 100, 10, 200));
    Ok(format!("200 tuples, max |delta| {worst:.1e}; (5,100,10,200) = 0"))
}

// --- PICO ------------------------------------------------------------------

fn bio_valid(seq: &[usize]) -> bool {
    // Index order: O, B-P, I-P, B-I, I-I, B-O, I-O.
    seq.iter().enumerate().all(|(i, &l)| {
        let inside = l == 2 || l == 4 || l == 6;
        !inside || (i > 0 && (seq[i - 1] == l || seq[i - 1] == l - 1))
    })
}

fn viterbi_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    for trial in 0..100 {
        let len = 1 + trial % 4;
        let emissions: Vec<[f64; 7]> = (0..len)
            .map(|_| std::array::from_fn(|_| rng.random_range(-3.0..3.0)))
            .collect();
        let transitions: [[f64; 7]; 8] = std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-3.0..3.0)));
        let score = |seq: &[usize]| {
            let mut prev = 7;
            let mut s = 0.0;
            for (i, &l) in seq.iter().enumerate() {
                s += emissions[i][l] + transitions[prev][l];
                prev = l;
            }
            s
        };
        let mut best: Option<(f64, Vec<usize>)> = None;
        for code in 0..7usize.pow(len as u32) {
            let seq: Vec<usize> = (0..len).map(|i| code / 7usize.pow(i as u32) % 7).collect();
            if !bio_valid(&seq) {
                continue;
            }
            let s = score(&seq);
            if best.as_ref().is_none_or(|(b, _)| s > *b) {
                best = Some((s, seq));
            }
        }
        let (best_score, best_seq) = best.unwrap();
        let decoded: Vec<usize> = viterbi(&emissions, &transitions).iter().map(|l| l.index()).collect();
        ensure!(bio_valid(&decoded), "trial {trial}: invalid decode {decoded:?}");
        ensure!(
            close(score(&decoded), best_score, 1e-12) && decoded == best_seq,
            "trial {trial}: decoded {decoded:?} ({}) vs brute force {best_seq:?} ({best_score})",
            score(&decoded)
        );
        checked += 1;
    }
    Ok(format!("{checked} random settings, lengths 1-4"))
}

fn labels(s: &str) -> Vec<BioLabel> {
    s.split_whitespace().map(|l| l.parse().unwrap()).collect()
}

fn pico_eval_harness() -> Outcome {
    let gold = [
        "B-P I-P I-P O O",
        "O B-P I-P O",
        "B-P I-P O B-I I-I",
        "B-P I-P O B-O",
        "B-P B-I O B-O I-O",
    ];
    let pred = [
        "B-P I-P I-P O O",
        "O B-P I-P I-P",
        "B-P O O B-I I-I",
        "B-P I-P B-P B-O",
        "O B-I O B-O O",
    ];
    let gold: Vec<_> = gold.iter().map(|s| labels(s)).collect();
    let pred: Vec<_> = pred.iter().map(|s| labels(s)).collect();
    let eval = evaluate(&gold, &pred).map_err(|e| e.to_string())?;

    // Population: tp 3+2+1+2+0 = 8, fp 1+1 = 2, fn 1+1 = 2.
    // Intervention: tp 3 of 3. Outcome: tp 2, fn 1.
    // Micro: tp 13, fp 2, fn 3.
    let expect = [
        (PicoCategory::Population, 0.8, 0.8, 0.8),
        (PicoCategory::Intervention, 1.0, 1.0, 1.0),
        (PicoCategory::Outcome, 1.0, 2.0 / 3.0, 0.8),
    ];
    for (cat, p, r, f) in expect {
        let s = eval.per_category[&cat];
        ensure!(
            close(s.precision, p, 1e-12) && close(s.recall, r, 1e-12) && close(s.f1, f, 1e-12),
            "{cat:?}: {s:?}, expected P {p} R {r} F1 {f}"
        );
    }
    let m = eval.micro;
    ensure!(
        close(m.precision, 13.0 / 15.0, 1e-12) && close(m.recall, 13.0 / 16.0, 1e-12) && close(m.f1, 26.0 / 31.0, 1e-12),
        "micro {m:?}"
    );
    Ok("population 0.8/0.8/0.8, micro 13/15, 13/16, 26/31".into())
}

const POPULATION: &[&str] = &["patients", "adults", "children", "infants", "women", "elderly", "smokers", "nurses"];
const INTERVENTION: &[&str] = &["aspirin", "placebo", "vaccine", "masks", "remdesivir", "ventilation", "zinc"];
const OUTCOME: &[&str] = &["mortality", "fever", "pain", "recovery", "hospitalization", "cough", "relapse"];
const FILLER: &[&str] = &["the", "of", "in", "with", "was", "and", "reduced", "among", "after", "we", "for", "trial"];

fn synthetic_sequence(rng: &mut ChaCha8Rng, id: usize) -> LabeledSequence {
    let mut words = Vec::new();
    let mut tags = Vec::new();
    let segments = rng.random_range(3..8);
    for _ in 0..segments {
        for _ in 0..rng.random_range(1..3) {
            words.push(FILLER[rng.random_range(0..FILLER.len())]);
            tags.push(BioLabel::O);
        }
        let (lexicon, cat) = match rng.random_range(0..3) {
            0 => (POPULATION, PicoCategory::Population),
            1 => (INTERVENTION, PicoCategory::Intervention),
            _ => (OUTCOME, PicoCategory::Outcome),
        };
        for k in 0..rng.random_range(1..4) {
            words.push(lexicon[rng.random_range(0..lexicon.len())]);
            tags.push(if k == 0 { BioLabel::B(cat) } else { BioLabel::I(cat) });
        }
    }
    LabeledSequence::from_words(format!("syn{id}"), &words, tags)
}

fn synthetic_pico_learning() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let train: Vec<_> = (0..200).map(|i| synthetic_sequence(&mut rng, i)).collect();
    let held_out: Vec<_> = (0..200).map(|i| synthetic_sequence(&mut rng, 200 + i)).collect();
    let config = TrainConfig {
        epochs: 5,
        seed: 3,
        ..TrainConfig::default()
    };
    let model = pico::train(&train, &config).map_err(|e| e.to_string())?;
    let score = |data: &[LabeledSequence]| -> Result<f64, String> {
        let gold: Vec<_> = data.iter().map(|s| s.labels.clone()).collect();
        let pred: Vec<_> = data.iter().map(|s| model.decode(&s.tokens)).collect();
        Ok(evaluate(&gold, &pred).map_err(|e| e.to_string())?.micro.f1)
    };
    let (train_f1, test_f1) = (score(&train)?, score(&held_out)?);
    ensure!(train_f1 >= 0.9, "training micro-F1 {train_f1:.4}");
    ensure!(test_f1 >= 0.9, "held-out micro-F1 {test_f1:.4}");
    Ok(format!("micro-F1 {train_f1:.4} on the 200 training sequences, {test_f1:.4} on 200 fresh ones"))
}

// --- topics ----------------------------------------------------------------

fn rows_normalized(m: &TopicModel) -> bool {
    m.doc_topic
        .iter()
        .chain(&m.topic_term)
        .all(|row| close(row.iter().sum::<f64>(), 1.0, 1e-9) && row.iter().all(|&p| p >= 0.0))
}

fn cluster_corpus(rng: &mut ChaCha8Rng, clusters: usize, words: usize, docs_per: usize, len: usize) -> Vec<ConceptBag> {
    let mut bags = Vec::new();
    for c in 0..clusters {
        for d in 0..docs_per {
            let tokens: Vec<String> = (0..len)
                .map(|_| format!("c{c}w{}", rng.random_range(0..words)))
                .collect();
            bags.push(ConceptBag::new(format!("c{c}d{d:02}"), tokens));
        }
    }
    bags
}

fn dominant(row: &[f64]) -> usize {
    (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a))).unwrap()
}

fn lda_model() -> Outcome {
    let mut models = Vec::new();

    // Disjoint vocabularies: every document of one half shares a dominant
    // topic that no document of the other half has.
    let mut separated = 0;
    for seed in 1..=5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let bags = cluster_corpus(&mut rng, 2, 6, 10, 15);
        let m = train_lda(&bags, &LdaConfig::new(2, seed)).map_err(|e| e.to_string())?;
        let topic_of: Vec<usize> = bags
            .iter()
            .map(|b| dominant(m.doc_row(&b.doc_id).unwrap()))
            .collect();
        let (a, b) = topic_of.split_at(10);
        if a.iter().all(|&t| t == a[0]) && b.iter().all(|&t| t == b[0]) && a[0] != b[0] {
            separated += 1;
        }
        models.push(m);
    }
    ensure!(separated >= 4, "separation on {separated}/5 seeds");

    let mut recovered = Vec::new();
    for seed in 1..=5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let bags = cluster_corpus(&mut rng, 3, 10, 15, 30);
        let (selection, model) = select_k(&bags, &[2, 3, 6], &LdaConfig::new(2, seed), 10, 110).map_err(|e| e.to_string())?;
        recovered.push(selection.best_k);
        models.push(model);
    }
    let hits = recovered.iter().filter(|&&k| k == 3).count();
    ensure!(hits >= 4, "select_k chose {recovered:?}");

    let bags = cluster_corpus(&mut ChaCha8Rng::seed_from_u64(9), 3, 10, 15, 30);
    let config = LdaConfig::new(3, 42);
    let a = train_lda(&bags, &config).map_err(|e| e.to_string())?;
    let b = train_lda(&bags, &config).map_err(|e| e.to_string())?;
    let bits = |m: &TopicModel| -> Vec<u64> { m.doc_topic.iter().chain(&m.topic_term).flatten().map(|p| p.to_bits()).collect() };
    ensure!(a.assignments() == b.assignments() && bits(&a) == bits(&b), "same seed, different state");
    ensure!(
        serde_json::to_vec(&a).unwrap() == serde_json::to_vec(&b).unwrap(),
        "same seed, different serialization"
    );
    models.push(a);

    ensure!(models.iter().all(rows_normalized), "a model has rows not summing to 1");
    Ok(format!(
        "{} models normalized; separation {separated}/5 seeds; select_k {recovered:?}; seed 42 bitwise identical",
        models.len()
    ))
}

fn strings(words: &[&str]) -> Vec<String> {
    words.iter().map(|w| w.to_string()).collect()
}

fn cv_oracle() -> Outcome {
    // Three one-window texts: p(a) = p(b) = 2/3, p(a,b) = 1/3.
    let x = (0.75f64).ln() / 3f64.ln();
    let texts = [strings(&["a", "b"]), strings(&["a", "c"]), strings(&["b", "c"])];
    let got = coherence_cv(&[vec!["a", "b"]], &texts, 110).map_err(|e| e.to_string())?;
    // v_a = (1, x), v_b = (x, 1), sum = (1+x, 1+x).
    let want = (1.0 + x) / (2f64.sqrt() * (1.0 + x * x).sqrt());
    ensure!(close(got.per_topic[0], want, 1e-9), "two-term topic {} vs {want}", got.per_topic[0]);

    // Sliding windows of 2 over a b c a: {a,b} {b,c} {c,a}; every pair once.
    let slid = coherence_cv(&[vec!["a", "b", "c"]], &[strings(&["a", "b", "c", "a"])], 2).map_err(|e| e.to_string())?;
    let want3 = (1.0 + 2.0 * x) / (3f64.sqrt() * (1.0 + 2.0 * x * x).sqrt());
    ensure!(close(slid.per_topic[0], want3, 1e-9), "sliding {} vs {want3}", slid.per_topic[0]);

    let perfect = coherence_cv(&[vec!["a", "b"]], &[strings(&["a", "b"]), strings(&["b", "c", "a"])], 110)
        .map_err(|e| e.to_string())?;
    ensure!(close(perfect.mean, 1.0, 1e-9), "perfect co-occurrence {}", perfect.mean);
    Ok(format!("hand values {want:.6} and {want3:.6} matched; perfect topic 1.0"))
}

fn topic_filter() -> Outcome {
    let rows = [vec![0.9, 0.1, 0.0], vec![0.9, 0.05, 0.05]];
    let picked: Vec<usize> = topics_for_rows(&rows, 0.05)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|(k, _)| k)
        .collect();
    ensure!(picked == [0, 1], "fixture selected {picked:?}");

    let mut runner = TestRunner::new(PropConfig {
        cases: 256,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let matrices = (1usize..6, 1usize..8).prop_flat_map(|(k, n)| {
        (
            prop::collection::vec(prop::collection::vec(0.0f64..1.0, k), n),
            0.0f64..0.6,
            0.0f64..0.6,
        )
    });
    runner
        .run(&matrices, |(raw, t1, t2)| {
            let rows: Vec<Vec<f64>> = raw
                .iter()
                .map(|r| {
                    let s: f64 = r.iter().sum::<f64>() + 1e-9;
                    r.iter().map(|v| (v + 1e-9 / r.len() as f64) / s).collect()
                })
                .collect();
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let set = |t| -> BTreeSet<usize> { topics_for_rows(&rows, t).unwrap().into_iter().map(|(k, _)| k).collect() };
            prop_assert!(set(hi).is_subset(&set(lo)));
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("fixture -> {0,1}; monotone in t over 256 random matrices".into())
}

// --- relations -------------------------------------------------------------

fn relation_strength() -> Outcome {
    let cats = [PicoCategory::Population, PicoCategory::Intervention, PicoCategory::Outcome];
    let mut pairs_checked = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let docs: Vec<(String, Vec<TypedConcept>)> = (0..10)
            .map(|d| {
                let concepts = (0..rng.random_range(0..8))
                    .map(|_| TypedConcept {
                        concept_id: format!("C{:02}", rng.random_range(0..6)),
                        category: cats[rng.random_range(0..3)],
                    })
                    .collect();
                (format!("doc{d}"), concepts)
            })
            .collect();

        let mut brute: BTreeMap<(String, String, String, String), BTreeSet<String>> = BTreeMap::new();
        for (doc, concepts) in &docs {
            for l in concepts {
                for r in concepts {
                    let allowed = matches!(
                        (l.category, r.category),
                        (PicoCategory::Population, PicoCategory::Intervention)
                            | (PicoCategory::Intervention, PicoCategory::Outcome)
                    );
                    if allowed {
                        let key = (
                            l.concept_id.clone(),
                            format!("{:?}", l.category),
                            r.concept_id.clone(),
                            format!("{:?}", r.category),
                        );
                        brute.entry(key).or_default().insert(doc.clone());
                    }
                }
            }
        }

        let built = build_relations(docs.iter().map(|(d, c)| (d.as_str(), c.as_slice())));
        let mut got = BTreeMap::new();
        for p in &built {
            ensure!(
                !(p.left.category == PicoCategory::Population && p.right.category == PicoCategory::Outcome),
                "P-O pair {p:?}"
            );
            ensure!(p.strength == p.supporting_docs.len(), "strength {} vs docs {:?}", p.strength, p.supporting_docs);
            let key = (
                p.left.concept_id.clone(),
                format!("{:?}", p.left.category),
                p.right.concept_id.clone(),
                format!("{:?}", p.right.category),
            );
            got.insert(key, p.supporting_docs.clone());
        }
        ensure!(got == brute, "seed {seed}: merged pairs differ from enumeration");
        pairs_checked += brute.len();
    }
    Ok(format!("20 random 10-document fixtures, {pairs_checked} pairs matched; no P-O pairs"))
}

// --- search ----------------------------------------------------------------

fn bm25_oracle() -> Outcome {
    let docs = [
        ("d1", "incubation period of the novel coronavirus incubation"),
        ("d2", "serial interval and incubation period estimates"),
        ("d3", "vaccine efficacy in older adults"),
    ];
    let index = InvertedIndex::from_texts(docs);
    let stop = StopList::from_text("of\nthe\nand\nin\n");
    let hits = index.search("incubation period vaccine", &stop, 10, None).map_err(|e| e.to_string())?;

    let tokenized: Vec<Vec<&str>> = docs.iter().map(|(_, t)| t.split(' ').collect()).collect();
    let n = 3.0;
    let avgdl = tokenized.iter().map(|d| d.len() as f64).sum::<f64>() / n;
    let mut expected: Vec<(&str, f64)> = docs
        .iter()
        .zip(&tokenized)
        .map(|((id, _), words)| {
            let score: f64 = ["incubation", "period", "vaccine"]
                .iter()
                .map(|q| {
                    let df = tokenized.iter().filter(|d| d.contains(q)).count() as f64;
                    let tf = words.iter().filter(|w| *w == q).count() as f64;
                    let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                    idf * tf * 2.2 / (tf + 1.2 * (1.0 - 0.75 + 0.75 * words.len() as f64 / avgdl))
                })
                .sum();
            (*id, score)
        })
        .filter(|(_, s)| *s > 0.0)
        .collect();
    expected.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
    ensure!(hits.len() == expected.len(), "{} hits vs {}", hits.len(), expected.len());
    for (h, (id, s)) in hits.iter().zip(&expected) {
        ensure!(h.doc_id == *id && close(h.score, *s, 1e-9), "{} {} vs {id} {s}", h.doc_id, h.score);
    }

    let allowed: BTreeSet<String> = ["d2".to_string(), "d3".to_string()].into();
    let filtered = index.search("incubation period vaccine", &stop, 10, Some(&allowed)).map_err(|e| e.to_string())?;
    ensure!(filtered.iter().all(|h| allowed.contains(&h.doc_id)), "filtered hit outside the allowed set");

    let mut corpus = CorpusStore::in_memory();
    corpus
        .ingest_reader(fixtures::CORPUS_JSONL.as_bytes(), CorpusFormat::Jsonl)
        .map_err(|e| e.to_string())?;
    let big = InvertedIndex::build(&corpus);
    let filter = DocFilter::default().years(2020, 2020).sources(["PMC", "WHO"]);
    let allowed: BTreeSet<String> = corpus.filter(&corpus.ids(), &filter).into_iter().collect();
    let hits = big.search("coronavirus incubation", &fixtures::stoplist(), 50, Some(&allowed)).map_err(|e| e.to_string())?;
    for h in &hits {
        let doc = corpus.get(&h.doc_id).unwrap();
        ensure!(
            doc.year == Some(2020) && ["PMC", "WHO"].contains(&doc.source.as_str()),
            "{} escapes the year/source filter",
            h.doc_id
        );
    }
    Ok(format!(
        "ranking {:?} matched to 1e-9; {} filtered corpus hits all inside year and source",
        expected.iter().map(|e| e.0).collect::<Vec<_>>(),
        hits.len()
    ))
}

// --- tagger ----------------------------------------------------------------

fn tagger() -> Outcome {
    let vocab = fixtures::vocabulary();
    let tagger = Tagger::new(&vocab);
    let text = "Severe diarrhea was more common than diarrhea alone.";
    let occ = tagger.tag(text);
    let found: Vec<(&str, &str)> = occ.iter().map(|o| (o.concept_id.as_str(), &text[o.span.0..o.span.1])).collect();
    ensure!(
        found.contains(&("C1443924", "Severe diarrhea"))
            && found.contains(&("C0011991", "diarrhea"))
            && !occ.iter().any(|o| o.concept_id == "C0011991" && o.span.0 < 15),
        "leftmost-longest violated: {found:?}"
    );

    let bloating: Vec<_> = tagger.tag("Bloating was reported.").into_iter().map(|o| o.concept_id).collect();
    let swelling: Vec<_> = tagger.tag("Swelling of abdomen was reported.").into_iter().map(|o| o.concept_id).collect();
    ensure!(
        bloating == ["C0000731"] && swelling == ["C0000731"],
        "variants map to {bloating:?} and {swelling:?}"
    );

    // 106 concepts with document frequency 110 - i, plus one stopword-labelled
    // concept of frequency 3.
    let mut v = Vocabulary::new();
    for i in 0..106 {
        v.add_variant(&format!("T{i:03}"), true, &format!("term{i:03}"), &format!("term{i:03}")).unwrap();
    }
    v.add_variant("S000", true, "trial", "trial").unwrap();
    let tagger = Tagger::new(&v);
    let texts: Vec<String> = (0..110)
        .map(|d| {
            let mut words: Vec<String> = (0..106).filter(|i| d < 110 - i).map(|i| format!("term{i:03}")).collect();
            if d < 3 {
                words.push("trial".into());
            }
            words.join(" ")
        })
        .collect();
    let occurrences: Vec<_> = texts.iter().map(|t| tagger.tag(t)).collect();
    let profiles = build_profiles(occurrences.iter().map(Vec::as_slice));
    let top = top_frequent(&profiles, 100);
    let stop = StopList::from_text("trial\n");
    let filter = TermFilter {
        profiles: &profiles,
        stoplist: &stop,
        top_frequent: &top,
    };
    let expected_top: BTreeSet<String> = (0..100).map(|i| format!("T{i:03}")).collect();
    ensure!(top == expected_top, "top-100 set differs");
    let terms = final_terms(&occurrences[0], &filter);
    let want: Vec<String> = (100..106).map(|i| format!("T{i:03}")).collect();
    ensure!(terms == want, "final terms {terms:?}");
    Ok("severe diarrhea/diarrhea, C0000731 variants, top-100 + stoplist exclusion".into())
}

// --- end to end ------------------------------------------------------------

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn litscope(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_litscope"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("litscope {args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn corpus_file() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/corpus.jsonl")
}

/// Runs the whole pipeline in a fresh directory and returns the payloads.
fn pipeline_run() -> Result<Vec<(String, String)>, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = dir.path().join("corpus");
    let models = dir.path().join("models");
    let (corpus, models) = (corpus.to_str().unwrap(), models.to_str().unwrap());
    litscope(&["ingest", corpus_file().to_str().unwrap(), "--corpus-dir", corpus])?;
    litscope(&[
        "train-lda", "--corpus-dir", corpus, "--model-dir", models, "--k-grid", "3,5,8", "--seed", "42", "--top-frequent", "10",
    ])?;

    let mut child = Command::new(env!("CARGO_BIN_EXE_litscope"))
        .args(["serve", "--port", "0", "--corpus-dir", corpus, "--model-dir", models])
        .env("RUST_LOG", "warn")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let stdout = child.stdout.take().unwrap();
    let server = Server(child);
    let mut line = String::new();
    BufReader::new(stdout).read_line(&mut line).map_err(|e| e.to_string())?;
    let base = line
        .trim()
        .strip_prefix("listening on ")
        .ok_or_else(|| format!("unexpected server banner {line:?}"))?
        .to_string();

    let get = |path: &str| -> Result<String, String> {
        ureq::get(&format!("{base}{path}"))
            .header("X-Client-Token", "e2e")
            .call()
            .map_err(|e| format!("GET {path}: {e}"))?
            .body_mut()
            .read_to_string()
            .map_err(|e| e.to_string())
    };
    let post = |path: &str, body: serde_json::Value| -> Result<serde_json::Value, String> {
        ureq::post(&format!("{base}{path}"))
            .header("X-Client-Token", "e2e")
            .send_json(body)
            .map_err(|e| format!("POST {path}: {e}"))?
            .body_mut()
            .read_json()
            .map_err(|e| e.to_string())
    };

    let mut payloads = Vec::new();
    let search = get("/api/search?q=incubation%20period&top_k=10")?;
    let hits: serde_json::Value = serde_json::from_str(&search).map_err(|e| e.to_string())?;
    let hit_ids: Vec<&str> = hits["hits"].as_array().unwrap().iter().map(|h| h["doc_id"].as_str().unwrap()).collect();
    if !fixtures::INCUBATION_RELEVANT[..5].iter().all(|d| hit_ids.contains(d)) {
        return Err(format!("query misses relevant fixtures: {hit_ids:?}"));
    }
    payloads.push(("search".to_string(), search));

    let created = post("/api/briefcases", serde_json::json!({"name": "incubation"}))?;
    let id = created["briefcase_id"].as_str().unwrap().to_string();
    let five: Vec<&str> = fixtures::INCUBATION_RELEVANT[..5].to_vec();
    let updated = post(&format!("/api/briefcases/{id}/docs"), serde_json::json!({ "doc_ids": five }))?;
    if updated["doc_ids"].as_array().map(Vec::len) != Some(5) || updated["version"] != 2 {
        return Err(format!("briefcase after add: {updated}"));
    }

    let sankey = get(&format!("/api/viz/sankey?briefcase={id}"))?;
    let topics = get(&format!("/api/viz/topics?briefcase={id}"))?;
    let cloud = get(&format!("/api/viz/cloud/{}?briefcase={id}", five[0]))?;
    let dashboard = get(&format!("/api/dashboard?briefcase={id}"))?;
    let s: serde_json::Value = serde_json::from_str(&sankey).unwrap();
    let t: serde_json::Value = serde_json::from_str(&topics).unwrap();
    let c: serde_json::Value = serde_json::from_str(&cloud).unwrap();
    if s["links"].as_array().is_none_or(Vec::is_empty) {
        return Err("empty sankey".into());
    }
    if t["topics"].as_array().is_none_or(Vec::is_empty) {
        return Err("no topics selected".into());
    }
    if c["terms"].as_array().is_none_or(|v| v.is_empty() || v.len() > 20) {
        return Err(format!("cloud terms {}", c["terms"]));
    }
    payloads.extend([
        ("sankey".to_string(), sankey),
        ("topics".to_string(), topics),
        ("cloud".to_string(), cloud),
        ("dashboard".to_string(), dashboard),
    ]);
    drop(server);
    Ok(payloads)
}

fn end_to_end() -> Outcome {
    let first = pipeline_run()?;
    let second = pipeline_run()?;
    for ((name, a), (_, b)) in first.iter().zip(&second) {
        ensure!(a == b, "{name} payload differs between runs");
    }
    let sizes: HashMap<&str, usize> = first.iter().map(|(n, p)| (n.as_str(), p.len())).collect();
    Ok(format!(
        "ingest -> train-lda -> serve twice; search/sankey/topics/cloud/dashboard byte-identical ({} bytes of sankey)",
        sizes["sankey"]
    ))
}

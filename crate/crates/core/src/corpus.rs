//! Documents, topics, facets, relevance judgments, and synthetic corpora.
//!
//! File formats:
//! - documents: one JSON object per line, `{"doc_id": str, "text": str}`
//! - topics: a JSON array of `{"topic_id", "title", "facets": [{"facet_id", "description"}]}`
//! - qrels: whitespace-separated lines `topic_id facet_id doc_id grade`

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::Preprocessor;

/// Relevance grades at or above this value count as relevant.
const RELEVANT_GRADE: i64 = 1;

/// A retrievable unit: an id plus its pre-processed token multiset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub terms: Vec<String>,
}

/// One sub-need of a topic with its own relevant documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Facet {
    pub facet_id: String,
    pub description: String,
    pub relevant_docs: BTreeSet<String>,
}

/// An information need: a title, ordered facets, and the union of their
/// relevant documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topic {
    pub topic_id: String,
    pub title: String,
    pub facets: Vec<Facet>,
    pub relevant_docs: BTreeSet<String>,
}

impl Topic {
    /// True when `doc_id` is relevant to any facet of this topic.
    pub fn is_relevant(&self, doc_id: &str) -> bool {
        self.relevant_docs.contains(doc_id)
    }

    /// Rebuild the topic-level relevant set as the union over facets.
    pub fn recompute_relevant_union(&mut self) {
        self.relevant_docs = self
            .facets
            .iter()
            .flat_map(|f| f.relevant_docs.iter().cloned())
            .collect();
    }
}

/// An immutable document collection plus its judged topics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub documents: BTreeMap<String, Document>,
    pub topics: Vec<Topic>,
}

impl Corpus {
    /// Look a topic up by id.
    pub fn topic(&self, topic_id: &str) -> Option<&Topic> {
        self.topics.iter().find(|t| t.topic_id == topic_id)
    }

    /// The documents relevant to `topic`, in doc-id order.
    pub fn relevant_documents(&self, topic: &Topic) -> Vec<&Document> {
        topic
            .relevant_docs
            .iter()
            .filter_map(|id| self.documents.get(id))
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct DocRecord {
    doc_id: String,
    text: String,
}

#[derive(Serialize, Deserialize)]
struct FacetRecord {
    facet_id: String,
    description: String,
}

#[derive(Serialize, Deserialize)]
struct TopicRecord {
    topic_id: String,
    title: String,
    facets: Vec<FacetRecord>,
}

/// A loaded corpus plus any non-fatal problems found in the inputs.
#[derive(Debug)]
pub struct CorpusLoad {
    pub corpus: Corpus,
    pub warnings: Vec<String>,
}

/// Read a JSON-lines document file, pre-processing each `text`.
pub fn load_documents(path: &Path, pre: &Preprocessor) -> Result<BTreeMap<String, Document>> {
    let file_name = path.display().to_string();
    let reader = BufReader::new(File::open(path)?);
    let mut documents = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DocRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(&file_name, line_no, format!("bad document record: {e}")))?;
        if documents.contains_key(&record.doc_id) {
            return Err(Error::parse(
                &file_name,
                line_no,
                format!("duplicate doc_id {:?}", record.doc_id),
            ));
        }
        let terms = pre.process(&record.text);
        documents.insert(
            record.doc_id.clone(),
            Document {
                doc_id: record.doc_id,
                terms,
            },
        );
    }
    Ok(documents)
}

/// Read a topic file. Facet relevant sets start empty; see [`apply_qrels`].
pub fn load_topics(path: &Path) -> Result<Vec<Topic>> {
    let file_name = path.display().to_string();
    let reader = BufReader::new(File::open(path)?);
    let records: Vec<TopicRecord> =
        serde_json::from_reader(reader).map_err(|e| Error::json(&file_name, e))?;
    if records.is_empty() {
        return Err(Error::Config(format!("{file_name}: empty topic list")));
    }
    Ok(records
        .into_iter()
        .map(|r| Topic {
            topic_id: r.topic_id,
            title: r.title,
            facets: r
                .facets
                .into_iter()
                .map(|f| Facet {
                    facet_id: f.facet_id,
                    description: f.description,
                    relevant_docs: BTreeSet::new(),
                })
                .collect(),
            relevant_docs: BTreeSet::new(),
        })
        .collect())
}

/// Fold qrels lines into the topics' facet and topic relevant sets.
///
/// Judgments naming unknown topics or facets are dropped with a warning.
/// When `known_docs` is given, judgments for unknown documents are dropped
/// with a warning as well; pass `None` for judgment-only analyses where no
/// document collection is available.
pub fn apply_qrels(
    topics: &mut [Topic],
    path: &Path,
    known_docs: Option<&BTreeMap<String, Document>>,
) -> Result<Vec<String>> {
    let file_name = path.display().to_string();
    let reader = BufReader::new(File::open(path)?);
    let index: BTreeMap<String, usize> = topics
        .iter()
        .enumerate()
        .map(|(i, t)| (t.topic_id.clone(), i))
        .collect();
    let mut warnings = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                &file_name,
                line_no,
                format!(
                    "expected 4 fields `topic facet doc grade`, got {}",
                    fields.len()
                ),
            ));
        }
        let grade: i64 = fields[3].parse().map_err(|_| {
            Error::parse(
                &file_name,
                line_no,
                format!("relevance grade must be an integer, got {:?}", fields[3]),
            )
        })?;
        if grade < RELEVANT_GRADE {
            continue;
        }
        let Some(&topic_idx) = index.get(fields[0]) else {
            warnings.push(format!(
                "{file_name}:{line_no}: unknown topic {:?}; judgment dropped",
                fields[0]
            ));
            continue;
        };
        if let Some(docs) = known_docs {
            if !docs.contains_key(fields[2]) {
                warnings.push(format!(
                    "{file_name}:{line_no}: unknown document {:?}; judgment dropped",
                    fields[2]
                ));
                continue;
            }
        }
        let topic = &mut topics[topic_idx];
        let Some(facet) = topic.facets.iter_mut().find(|f| f.facet_id == fields[1]) else {
            warnings.push(format!(
                "{file_name}:{line_no}: unknown facet {:?} for topic {:?}; judgment dropped",
                fields[1], fields[0]
            ));
            continue;
        };
        facet.relevant_docs.insert(fields[2].to_string());
        topic.relevant_docs.insert(fields[2].to_string());
    }
    Ok(warnings)
}

/// Load documents, topics, and qrels into one resolved corpus.
pub fn load_corpus(
    doc_path: &Path,
    topic_path: &Path,
    qrels_path: &Path,
    pre: &Preprocessor,
) -> Result<CorpusLoad> {
    let documents = load_documents(doc_path, pre)?;
    let mut topics = load_topics(topic_path)?;
    let warnings = apply_qrels(&mut topics, qrels_path, Some(&documents))?;
    Ok(CorpusLoad {
        corpus: Corpus { documents, topics },
        warnings,
    })
}

/// Write a corpus back to the native formats.
///
/// Loading the written files with [`Preprocessor::identity`] reproduces the
/// corpus exactly, and saving again is byte-identical.
pub fn save_corpus(
    corpus: &Corpus,
    doc_path: &Path,
    topic_path: &Path,
    qrels_path: &Path,
) -> Result<()> {
    let mut doc_out = BufWriter::new(File::create(doc_path)?);
    for doc in corpus.documents.values() {
        let record = DocRecord {
            doc_id: doc.doc_id.clone(),
            text: doc.terms.join(" "),
        };
        let json = serde_json::to_string(&record)
            .map_err(|e| Error::json(doc_path.display().to_string(), e))?;
        writeln!(doc_out, "{json}")?;
    }
    doc_out.flush()?;

    let records: Vec<TopicRecord> = corpus
        .topics
        .iter()
        .map(|t| TopicRecord {
            topic_id: t.topic_id.clone(),
            title: t.title.clone(),
            facets: t
                .facets
                .iter()
                .map(|f| FacetRecord {
                    facet_id: f.facet_id.clone(),
                    description: f.description.clone(),
                })
                .collect(),
        })
        .collect();
    let json = serde_json::to_string_pretty(&records)
        .map_err(|e| Error::json(topic_path.display().to_string(), e))?;
    std::fs::write(topic_path, json + "\n")?;

    let mut qrels_out = BufWriter::new(File::create(qrels_path)?);
    for topic in &corpus.topics {
        for facet in &topic.facets {
            for doc_id in &facet.relevant_docs {
                writeln!(
                    qrels_out,
                    "{} {} {} 1",
                    topic.topic_id, facet.facet_id, doc_id
                )?;
            }
        }
    }
    qrels_out.flush()?;
    Ok(())
}

/// Keep only topics with at least `min_facets` facets and `min_rel`
/// relevant documents. Documents are untouched; idempotent.
pub fn filter_topics(corpus: Corpus, min_facets: usize, min_rel: usize) -> Corpus {
    let Corpus { documents, topics } = corpus;
    let topics = topics
        .into_iter()
        .filter(|t| t.facets.len() >= min_facets && t.relevant_docs.len() >= min_rel)
        .collect();
    Corpus { documents, topics }
}

// ---------------------------------------------------------------------------
// Synthetic corpora
// ---------------------------------------------------------------------------

/// Shape of a generated corpus.
///
/// Each topic gets `docs_per_topic` documents; the first
/// `facets_per_topic * relevant_per_facet` of them are relevant, one block
/// per facet. Relevant documents mix tokens from a facet-specific term pool
/// (probability `concentration`) with background vocabulary, so facet terms
/// are discriminative for retrieval and feedback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub topics: usize,
    pub vocab_size: usize,
    pub docs_per_topic: usize,
    pub facets_per_topic: usize,
    pub relevant_per_facet: usize,
    #[serde(default = "default_doc_len")]
    pub doc_len: usize,
    #[serde(default = "default_facet_terms")]
    pub facet_terms: usize,
    #[serde(default = "default_concentration")]
    pub concentration: f64,
}

fn default_doc_len() -> usize {
    30
}

fn default_facet_terms() -> usize {
    8
}

fn default_concentration() -> f64 {
    0.6
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("topics", self.topics),
            ("vocab_size", self.vocab_size),
            ("docs_per_topic", self.docs_per_topic),
            ("facets_per_topic", self.facets_per_topic),
            ("relevant_per_facet", self.relevant_per_facet),
            ("doc_len", self.doc_len),
            ("facet_terms", self.facet_terms),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(Error::Config(format!(
                    "synthetic spec: {name} must be >= 1"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.concentration) {
            return Err(Error::Config(
                "synthetic spec: concentration must lie in [0, 1]".into(),
            ));
        }
        let demanded = self.facets_per_topic * self.relevant_per_facet;
        if demanded > self.docs_per_topic {
            return Err(Error::Config(format!(
                "synthetic spec demands {demanded} relevant documents per topic \
                 but only generates {}",
                self.docs_per_topic
            )));
        }
        Ok(())
    }
}

/// Deterministically generate a corpus from `spec` and `seed`.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec, seed: u64) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Background vocabulary with harmonic weights; cumulative sums for
    // inverse-transform sampling.
    let background: Vec<String> = (0..spec.vocab_size).map(|i| format!("w{i:04}")).collect();
    let mut cumulative = Vec::with_capacity(spec.vocab_size);
    let mut acc = 0.0;
    for i in 0..spec.vocab_size {
        acc += 1.0 / (i as f64 + 1.0);
        cumulative.push(acc);
    }
    let total_weight = acc;
    let draw_background = |rng: &mut ChaCha8Rng| -> &str {
        let u = rng.random::<f64>() * total_weight;
        let idx = cumulative
            .partition_point(|&c| c <= u)
            .min(spec.vocab_size - 1);
        &background[idx]
    };

    let mut documents = BTreeMap::new();
    let mut topics = Vec::with_capacity(spec.topics);
    for t in 0..spec.topics {
        let topic_id = format!("topic{t:03}");
        let facet_pools: Vec<Vec<String>> = (0..spec.facets_per_topic)
            .map(|f| {
                (0..spec.facet_terms)
                    .map(|j| format!("t{t:02}f{f}x{j}"))
                    .collect()
            })
            .collect();

        let mut facets: Vec<Facet> = (0..spec.facets_per_topic)
            .map(|f| Facet {
                facet_id: format!("f{f}"),
                description: format!("aspect {f} of topic {t}"),
                relevant_docs: BTreeSet::new(),
            })
            .collect();

        for d in 0..spec.docs_per_topic {
            let doc_id = format!("t{t:02}d{d:03}");
            let relevant_facet = if d < spec.facets_per_topic * spec.relevant_per_facet {
                Some(d / spec.relevant_per_facet)
            } else {
                None
            };
            let mut terms = Vec::with_capacity(spec.doc_len);
            for _ in 0..spec.doc_len {
                match relevant_facet {
                    Some(f) if rng.random::<f64>() < spec.concentration => {
                        let pool = &facet_pools[f];
                        terms.push(pool[rng.random_range(0..pool.len())].clone());
                    }
                    _ => terms.push(draw_background(&mut rng).to_string()),
                }
            }
            if let Some(f) = relevant_facet {
                facets[f].relevant_docs.insert(doc_id.clone());
            }
            documents.insert(doc_id.clone(), Document { doc_id, terms });
        }

        let mut topic = Topic {
            topic_id,
            title: format!("synthetic topic {t}"),
            facets,
            relevant_docs: BTreeSet::new(),
        };
        topic.recompute_relevant_union();
        topics.push(topic);
    }

    Ok(Corpus { documents, topics })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_file(dir: &Path, name: &str, contents: &str) -> std::path::PathBuf {
        let path = dir.join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    fn sample_files(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf, std::path::PathBuf) {
        let docs = write_file(
            dir,
            "docs.jsonl",
            r#"{"doc_id": "d1", "text": "solar panels energy"}
{"doc_id": "d2", "text": "wind turbines energy"}
{"doc_id": "d3", "text": "geothermal heat energy"}
"#,
        );
        let topics = write_file(
            dir,
            "topics.json",
            r#"[{"topic_id": "t1", "title": "renewable energy",
                 "facets": [{"facet_id": "f1", "description": "solar"},
                            {"facet_id": "f2", "description": "wind"}]}]"#,
        );
        let qrels = write_file(dir, "qrels.txt", "t1 f1 d1 1\nt1 f2 d2 2\nt1 f1 d3 0\n");
        (docs, topics, qrels)
    }

    #[test]
    fn loads_a_small_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let (docs, topics, qrels) = sample_files(dir.path());
        let loaded = load_corpus(&docs, &topics, &qrels, &Preprocessor::identity()).unwrap();
        assert!(loaded.warnings.is_empty());
        let corpus = loaded.corpus;
        assert_eq!(corpus.documents.len(), 3);
        assert_eq!(corpus.topics.len(), 1);
        let topic = &corpus.topics[0];
        assert_eq!(topic.facets.len(), 2);
        // d3 judged grade 0: not relevant anywhere.
        assert_eq!(
            topic.relevant_docs.iter().collect::<Vec<_>>(),
            vec!["d1", "d2"]
        );
        // Topic-level set is the facet union.
        let union: BTreeSet<String> = topic
            .facets
            .iter()
            .flat_map(|f| f.relevant_docs.iter().cloned())
            .collect();
        assert_eq!(topic.relevant_docs, union);
    }

    #[test]
    fn unknown_document_judgment_is_dropped_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        let (docs, topics, _) = sample_files(dir.path());
        let qrels = write_file(dir.path(), "qrels_bad.txt", "t1 f1 d1 1\nt1 f1 dX 1\n");
        let loaded = load_corpus(&docs, &topics, &qrels, &Preprocessor::identity()).unwrap();
        assert_eq!(loaded.warnings.len(), 1);
        assert!(loaded.warnings[0].contains("dX"));
        assert!(!loaded.corpus.topics[0].relevant_docs.contains("dX"));
    }

    #[test]
    fn non_integer_grade_is_a_parse_error_with_location() {
        let dir = tempfile::tempdir().unwrap();
        let (docs, topics, _) = sample_files(dir.path());
        let qrels = write_file(dir.path(), "qrels_bad.txt", "t1 f1 d1 1\nt1 f1 d2 high\n");
        let err = load_corpus(&docs, &topics, &qrels, &Preprocessor::identity()).unwrap_err();
        match err {
            Error::Parse { line, file, .. } => {
                assert_eq!(line, 2);
                assert!(file.contains("qrels_bad.txt"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_topic_list_is_a_configuration_error() {
        let dir = tempfile::tempdir().unwrap();
        let (docs, _, qrels) = sample_files(dir.path());
        let topics = write_file(dir.path(), "empty.json", "[]");
        let err = load_corpus(&docs, &topics, &qrels, &Preprocessor::identity()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    fn topic_with(facets: usize, rel_per_facet: usize) -> Topic {
        let mut topic = Topic {
            topic_id: "t".into(),
            title: String::new(),
            facets: (0..facets)
                .map(|f| Facet {
                    facet_id: format!("f{f}"),
                    description: String::new(),
                    relevant_docs: (0..rel_per_facet).map(|d| format!("f{f}d{d}")).collect(),
                })
                .collect(),
            relevant_docs: BTreeSet::new(),
        };
        topic.recompute_relevant_union();
        topic
    }

    #[test]
    fn filter_keeps_boundary_topics_and_drops_conjunctive_failures() {
        // Exactly at the (4, 10) boundary: 4 facets, 10 relevant in total.
        let mut boundary = topic_with(4, 3);
        boundary.topic_id = "boundary".into();
        boundary.facets[3].relevant_docs = std::iter::once("f3d0".to_string()).collect();
        boundary.recompute_relevant_union();
        assert_eq!(boundary.relevant_docs.len(), 10);

        let corpus = Corpus {
            documents: BTreeMap::new(),
            topics: vec![
                boundary,          // 4 facets, 10 relevant: kept (inclusive)
                topic_with(3, 20), // 3 facets, 60 relevant: dropped (facets)
                topic_with(5, 1),  // 5 facets, 5 relevant: dropped (relevant)
            ],
        };
        let filtered = filter_topics(corpus, 4, 10);
        assert_eq!(filtered.topics.len(), 1);
        assert_eq!(filtered.topics[0].topic_id, "boundary");

        let again = filter_topics(filtered.clone(), 4, 10);
        assert_eq!(again, filtered);
    }

    #[test]
    fn synthetic_corpus_is_deterministic() {
        let spec = SyntheticSpec {
            topics: 2,
            vocab_size: 50,
            docs_per_topic: 12,
            facets_per_topic: 3,
            relevant_per_facet: 2,
            doc_len: 10,
            facet_terms: 4,
            concentration: 0.5,
        };
        let a = generate_synthetic_corpus(&spec, 1).unwrap();
        let b = generate_synthetic_corpus(&spec, 1).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_corpus(&spec, 2).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synthetic_topics_pass_the_configured_filter() {
        let spec = SyntheticSpec {
            topics: 1,
            vocab_size: 100,
            docs_per_topic: 40,
            facets_per_topic: 4,
            relevant_per_facet: 5,
            doc_len: 20,
            facet_terms: 6,
            concentration: 0.6,
        };
        let corpus = generate_synthetic_corpus(&spec, 3).unwrap();
        assert_eq!(corpus.documents.len(), 40);
        let filtered = filter_topics(corpus, 4, 10);
        assert_eq!(filtered.topics.len(), 1);
        assert_eq!(filtered.topics[0].relevant_docs.len(), 20);
    }

    #[test]
    fn overdemanding_spec_is_rejected() {
        let spec = SyntheticSpec {
            topics: 1,
            vocab_size: 100,
            docs_per_topic: 10,
            facets_per_topic: 4,
            relevant_per_facet: 5,
            doc_len: 20,
            facet_terms: 6,
            concentration: 0.6,
        };
        assert!(matches!(
            generate_synthetic_corpus(&spec, 3),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn save_and_reload_round_trips() {
        let spec = SyntheticSpec {
            topics: 2,
            vocab_size: 30,
            docs_per_topic: 8,
            facets_per_topic: 2,
            relevant_per_facet: 2,
            doc_len: 6,
            facet_terms: 3,
            concentration: 0.5,
        };
        let corpus = generate_synthetic_corpus(&spec, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let docs = dir.path().join("docs.jsonl");
        let topics = dir.path().join("topics.json");
        let qrels = dir.path().join("qrels.txt");
        save_corpus(&corpus, &docs, &topics, &qrels).unwrap();

        let reloaded = load_corpus(&docs, &topics, &qrels, &Preprocessor::identity()).unwrap();
        assert!(reloaded.warnings.is_empty());
        assert_eq!(reloaded.corpus, corpus);

        // Saving the reloaded corpus is byte-identical.
        let docs2 = dir.path().join("docs2.jsonl");
        let topics2 = dir.path().join("topics2.json");
        let qrels2 = dir.path().join("qrels2.txt");
        save_corpus(&reloaded.corpus, &docs2, &topics2, &qrels2).unwrap();
        assert_eq!(
            std::fs::read(&docs).unwrap(),
            std::fs::read(&docs2).unwrap()
        );
        assert_eq!(
            std::fs::read(&topics).unwrap(),
            std::fs::read(&topics2).unwrap()
        );
        assert_eq!(
            std::fs::read(&qrels).unwrap(),
            std::fs::read(&qrels2).unwrap()
        );
    }
}

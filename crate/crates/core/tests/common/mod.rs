//! Shared fixtures: deterministic synthetic ecosystems and scripted gateways.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use ideation_core::corpus::{
    compute_stats, split_by_year, BaselineSample, Corpus, CorpusSplit, CorpusStats, Publication,
    Researcher,
};
use ideation_core::embed::EmbeddingIndex;
use ideation_core::gateway::{Gateway, Script, ScriptedBackend};

pub const DIM: usize = 16;

const TOPIC_POOL: [&str; 4] = ["graph learning", "systems biology", "optimization", "nlp"];

/// Deterministic synthetic records: publications alternate historical and
/// contemporary years, every researcher authors several publications, and
/// co-authorship pairs make the collaboration matrix non-trivial.
pub fn synth_records(
    researchers: usize,
    publications: usize,
) -> (Vec<Publication>, Vec<Researcher>) {
    assert!(researchers >= 3);
    assert!(publications >= 4);
    let researcher_ids: Vec<String> = (0..researchers).map(|r| format!("r{r:03}")).collect();
    let mut authored: BTreeMap<String, Vec<String>> = researcher_ids
        .iter()
        .map(|id| (id.clone(), Vec::new()))
        .collect();
    let mut records = Vec::with_capacity(publications);
    for p in 0..publications {
        let id = format!("p{p:04}");
        let first = p % researchers;
        let second = (p + 1 + p / researchers) % researchers;
        let mut authors = vec![researcher_ids[first].clone()];
        if second != first {
            authors.push(researcher_ids[second].clone());
        }
        for author in &authors {
            authored.get_mut(author).expect("author exists").push(id.clone());
        }
        let year = if p % 2 == 0 {
            2000 + (p % 10) as i32
        } else {
            2012 + (p % 8) as i32
        };
        records.push(Publication {
            id,
            title: format!("Study {p} on {}", TOPIC_POOL[p % TOPIC_POOL.len()]),
            abstract_text: format!(
                "Abstract {p}: a synthetic study of {} with protocol variant {}.",
                TOPIC_POOL[p % TOPIC_POOL.len()],
                p % 7
            ),
            year,
            venue: "Synthetic Venue".into(),
            citations: ((p * 7) % 50) as u64,
            author_ids: authors,
            external_id: None,
        });
    }
    let researchers: Vec<Researcher> = researcher_ids
        .iter()
        .enumerate()
        .map(|(r, id)| Researcher {
            id: id.clone(),
            name: format!("Researcher {r}"),
            affiliations: vec![format!("Lab {}", r % 3)],
            topics: vec![
                TOPIC_POOL[r % TOPIC_POOL.len()].to_string(),
                format!("method-{}", r % 2),
            ],
            publication_ids: authored[id].clone(),
            collaborator_counts: BTreeMap::new(),
        })
        .collect();
    (records, researchers)
}

#[allow(dead_code)]
pub struct Ecosystem {
    pub corpus: Corpus,
    pub split: CorpusSplit,
    pub index: EmbeddingIndex,
    pub stats: CorpusStats,
}

/// Builds a validated corpus with scripted-embedding sidecar index and
/// baseline stats over the full corpus.
pub fn ecosystem(researchers: usize, publications: usize) -> Ecosystem {
    let (pubs, res) = synth_records(researchers, publications);
    let corpus = Corpus::from_records(pubs, res).expect("synthetic corpus is valid");
    let gateway = scripted_gateway(Script::new(), 0);
    let mut index = EmbeddingIndex::new(DIM);
    for (id, publication) in corpus.publications() {
        index
            .insert(id.clone(), gateway.embed(&publication.abstract_text).unwrap())
            .unwrap();
    }
    let split = split_by_year(&corpus, 2011).unwrap();
    let stats = compute_stats(&corpus, &split, &index, BaselineSample::All, 0).unwrap();
    Ecosystem {
        corpus,
        split,
        index,
        stats,
    }
}

/// Gateway over an in-memory scripted backend (no retries, no backoff).
pub fn scripted_gateway(script: Script, seed: u64) -> Gateway {
    Gateway::from_backend(
        Box::new(ScriptedBackend::new(script, seed, DIM)),
        0,
        Duration::ZERO,
    )
}

/// Writes the ecosystem's corpus and embedding sidecar under `dir`, returning
/// (publications, researchers, embeddings) paths.
#[allow(dead_code)]
pub fn write_ecosystem_files(
    eco: &Ecosystem,
    dir: &Path,
) -> (std::path::PathBuf, std::path::PathBuf, std::path::PathBuf) {
    let publications = dir.join("publications.ldjson");
    let researchers = dir.join("researchers.ldjson");
    let embeddings = dir.join("embeddings.ldjson");
    eco.corpus.save(&publications, &researchers).unwrap();
    eco.index.save(&embeddings).unwrap();
    (publications, researchers, embeddings)
}

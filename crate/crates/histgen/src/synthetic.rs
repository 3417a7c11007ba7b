//! Synthetic fixtures: templated outline documents with topic-distinct token
//! distributions (used by the overfit and ablation suites and the gradient
//! check), and a heading-annotated plain-text article tree for exercising
//! the corpus builder end to end.

use std::fs;
use std::io;
use std::path::Path;

use crate::corpus::OutlineExample;
use crate::tensor::Rng;

const TOPICS: [&str; 6] = ["harbor", "glacier", "meadow", "canyon", "orchard", "lagoon"];

/// Tokens of one topic's body distribution, disjoint across topics.
fn topic_pool(topic: usize) -> Vec<String> {
    (0..8).map(|k| format!("{}-{k}", TOPICS[topic])).collect()
}

/// Deterministic heading per topic: the topic name, plus a shared qualifier
/// for odd topics so headings vary in length.
fn topic_heading(topic: usize) -> Vec<String> {
    if topic % 2 == 0 {
        vec![TOPICS[topic].to_string()]
    } else {
        vec![TOPICS[topic].to_string(), "survey".to_string()]
    }
}

fn sample_paragraph(rng: &mut Rng, pool: &[String], len_range: (usize, usize)) -> Vec<String> {
    let len = rng.range(len_range.0, len_range.1);
    (0..len).map(|_| pool[rng.below(pool.len())].clone()).collect()
}

/// Documents of 3-6 sections, each section a run of 2-3 paragraphs drawn
/// from one topic's token pool, with distinct topics per document. The
/// section boundary is detectable only from the topic change between
/// adjacent paragraphs; headings are a fixed function of the topic.
pub fn template_documents(count: usize, seed: u64) -> Vec<OutlineExample> {
    let mut rng = Rng::new(seed);
    let pools: Vec<Vec<String>> = (0..TOPICS.len()).map(topic_pool).collect();
    (0..count)
        .map(|i| {
            let sections = rng.range(3, 6);
            let mut topics: Vec<usize> = (0..TOPICS.len()).collect();
            rng.shuffle(&mut topics);
            topics.truncate(sections);

            let mut paragraphs = Vec::new();
            let mut labels = Vec::new();
            let mut headings = Vec::new();
            for &t in &topics {
                let k = rng.range(2, 3);
                for _ in 0..k - 1 {
                    paragraphs.push(sample_paragraph(&mut rng, &pools[t], (5, 9)));
                    labels.push(0);
                }
                paragraphs.push(sample_paragraph(&mut rng, &pools[t], (5, 9)));
                labels.push(1);
                headings.push(topic_heading(t));
            }
            OutlineExample {
                id: format!("synth-{i:04}"),
                category: "mixture".into(),
                paragraphs,
                labels,
                headings,
            }
        })
        .collect()
}

/// The gradient-check fixture: one 4-paragraph document with two 2-paragraph
/// sections on distinct topics.
pub fn grad_check_document(seed: u64) -> OutlineExample {
    let mut rng = Rng::new(seed);
    let (t1, t2) = (0, 3);
    let (p1, p2) = (topic_pool(t1), topic_pool(t2));
    OutlineExample {
        id: "gradcheck".into(),
        category: "mixture".into(),
        paragraphs: vec![
            sample_paragraph(&mut rng, &p1, (4, 6)),
            sample_paragraph(&mut rng, &p1, (4, 6)),
            sample_paragraph(&mut rng, &p2, (4, 6)),
            sample_paragraph(&mut rng, &p2, (4, 6)),
        ],
        labels: vec![0, 1, 0, 1],
        headings: vec![topic_heading(t1), topic_heading(t2)],
    }
}

/// Statistics of a generated article tree.
#[derive(Debug, Clone, Copy)]
pub struct FixtureStats {
    pub articles: usize,
    /// Exact mean of the generated per-article section counts.
    pub mean_sections: f64,
}

/// Write `count` heading-annotated plain-text articles under `dir`. Articles
/// carry 1-8 first-level sections (tracked exactly in the returned stats),
/// plus occasional lead paragraphs and second-level headings that the parser
/// must fold away without changing the section count.
pub fn write_wikitext_fixture(dir: &Path, count: usize, seed: u64) -> io::Result<FixtureStats> {
    fs::create_dir_all(dir)?;
    let mut rng = Rng::new(seed);
    let pools: Vec<Vec<String>> = (0..TOPICS.len()).map(topic_pool).collect();
    let mut total_sections = 0usize;
    for i in 0..count {
        let sections = rng.range(1, 8);
        total_sections += sections;
        let mut text = String::new();
        if rng.below(4) == 0 {
            let lead_topic = rng.below(TOPICS.len());
            text.push_str(&sample_paragraph(&mut rng, &pools[lead_topic], (5, 9)).join(" "));
            text.push_str("\n\n");
        }
        for s in 0..sections {
            let topic = (s + i) % TOPICS.len();
            text.push_str(&format!("== {} section ==\n", TOPICS[topic]));
            let paras = rng.range(1, 3);
            for _ in 0..paras {
                text.push_str(&sample_paragraph(&mut rng, &pools[topic], (5, 9)).join(" "));
                text.push_str("\n\n");
            }
            if rng.below(5) == 0 {
                text.push_str(&format!("=== {} detail ===\n", TOPICS[topic]));
                text.push_str(&sample_paragraph(&mut rng, &pools[topic], (5, 9)).join(" "));
                text.push_str("\n\n");
            }
        }
        fs::write(dir.join(format!("a{i:04}.txt")), text)?;
    }
    Ok(FixtureStats {
        articles: count,
        mean_sections: total_sections as f64 / count as f64,
    })
}

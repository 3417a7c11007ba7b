//! Reading heading-annotated plain-text articles.
//!
//! Headings follow the wikitext convention: `== text ==` is a first-level
//! section heading, `=== text ===` second-level, and so on. Paragraphs are
//! runs of non-blank lines. Input is either one article per file or a
//! concatenated dump where a line `#ARTICLE <id>` starts a new article.

use std::fs;
use std::path::Path;

use super::{Block, CorpusError, RawArticle};

/// Heading-line convention. `marker_char` repeated at least `min_repeat`
/// times on both ends of a line marks a heading; extra repeats deepen the
/// level (`==` is level 1, `===` level 2).
#[derive(Debug, Clone)]
pub struct WikitextFormat {
    pub marker_char: char,
    pub min_repeat: usize,
}

impl Default for WikitextFormat {
    fn default() -> Self {
        WikitextFormat {
            marker_char: '=',
            min_repeat: 2,
        }
    }
}

impl WikitextFormat {
    /// If the line is a heading, return (level, text).
    fn parse_heading(&self, line: &str) -> Option<(usize, String)> {
        let line = line.trim();
        let lead = line.chars().take_while(|&c| c == self.marker_char).count();
        let trail = line
            .chars()
            .rev()
            .take_while(|&c| c == self.marker_char)
            .count();
        if lead < self.min_repeat || trail < self.min_repeat || lead + trail >= line.chars().count()
        {
            return None;
        }
        let level = lead.min(trail) - self.min_repeat + 1;
        let chars: Vec<char> = line.chars().collect();
        let text: String = chars[lead..chars.len() - trail].iter().collect();
        Some((level, text.trim().to_string()))
    }

    /// Split article text into heading and paragraph blocks.
    pub fn parse_blocks(&self, text: &str) -> Vec<Block> {
        let mut blocks = Vec::new();
        let mut para_lines: Vec<&str> = Vec::new();
        let flush = |para_lines: &mut Vec<&str>, blocks: &mut Vec<Block>| {
            if !para_lines.is_empty() {
                blocks.push(Block::Paragraph(para_lines.join(" ")));
                para_lines.clear();
            }
        };
        for line in text.lines() {
            if line.trim().is_empty() {
                flush(&mut para_lines, &mut blocks);
            } else if let Some((level, heading)) = self.parse_heading(line) {
                flush(&mut para_lines, &mut blocks);
                blocks.push(Block::Heading {
                    level,
                    text: heading,
                });
            } else {
                para_lines.push(line.trim());
            }
        }
        flush(&mut para_lines, &mut blocks);
        blocks
    }
}

const DUMP_DELIMITER: &str = "#ARTICLE";

/// Read a single-article file. The id is the file stem; the category is the
/// parent directory name when the file sits in a subdirectory of `root`,
/// otherwise "mixture".
pub fn read_article_file(
    path: &Path,
    root: &Path,
    format: &WikitextFormat,
) -> Result<RawArticle, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let category = path
        .parent()
        .filter(|p| *p != root)
        .and_then(|p| p.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "mixture".to_string());
    Ok(RawArticle {
        id,
        category,
        blocks: format.parse_blocks(&text),
    })
}

/// Read a concatenated dump: `#ARTICLE <id>` lines delimit articles.
pub fn read_dump(
    path: &Path,
    category: &str,
    format: &WikitextFormat,
) -> Result<Vec<RawArticle>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut articles = Vec::new();
    let mut current: Option<(String, Vec<String>)> = None;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix(DUMP_DELIMITER) {
            if let Some((id, lines)) = current.take() {
                articles.push((id, lines));
            }
            current = Some((rest.trim().to_string(), Vec::new()));
        } else if let Some((_, lines)) = current.as_mut() {
            lines.push(line.to_string());
        }
    }
    if let Some((id, lines)) = current.take() {
        articles.push((id, lines));
    }
    Ok(articles
        .into_iter()
        .map(|(id, lines)| RawArticle {
            id,
            category: category.to_string(),
            blocks: format.parse_blocks(&lines.join("\n")),
        })
        .collect())
}

/// Read every regular file under `dir` (one article per file, category
/// subdirectories allowed), in stable lexicographic path order.
pub fn read_input_dir(dir: &Path, format: &WikitextFormat) -> Result<Vec<RawArticle>, CorpusError> {
    let mut paths = Vec::new();
    collect_files(dir, &mut paths)?;
    paths.sort();
    paths
        .iter()
        .map(|p| read_article_file(p, dir, format))
        .collect()
}

fn collect_files(dir: &Path, out: &mut Vec<std::path::PathBuf>) -> Result<(), CorpusError> {
    let entries = fs::read_dir(dir).map_err(|source| CorpusError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    for entry in entries {
        let entry = entry.map_err(|source| CorpusError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heading_levels() {
        let f = WikitextFormat::default();
        assert_eq!(f.parse_heading("== History =="), Some((1, "History".into())));
        assert_eq!(f.parse_heading("=== Early ==="), Some((2, "Early".into())));
        assert_eq!(f.parse_heading("plain text"), None);
        assert_eq!(f.parse_heading("= not a heading ="), None);
        assert_eq!(f.parse_heading("===="), None);
    }

    #[test]
    fn blocks_split_on_blank_lines_and_headings() {
        let f = WikitextFormat::default();
        let text = "lead line one\nlead line two\n\n== First ==\nbody a\n\nbody b\n=== Sub ===\nbody c\n";
        let blocks = f.parse_blocks(text);
        assert_eq!(
            blocks,
            vec![
                Block::Paragraph("lead line one lead line two".into()),
                Block::Heading {
                    level: 1,
                    text: "First".into()
                },
                Block::Paragraph("body a".into()),
                Block::Paragraph("body b".into()),
                Block::Heading {
                    level: 2,
                    text: "Sub".into()
                },
                Block::Paragraph("body c".into()),
            ]
        );
    }

    #[test]
    fn dump_delimiters() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dump.txt");
        std::fs::write(
            &path,
            "#ARTICLE one\n== A ==\ntext here\n#ARTICLE two\n== B ==\nmore text\n",
        )
        .unwrap();
        let articles = read_dump(&path, "music", &WikitextFormat::default()).unwrap();
        assert_eq!(articles.len(), 2);
        assert_eq!(articles[0].id, "one");
        assert_eq!(articles[1].id, "two");
        assert_eq!(articles[1].category, "music");
    }

    #[test]
    fn input_dir_categories_from_subdirs() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("music")).unwrap();
        std::fs::write(
            dir.path().join("music/song.txt"),
            "== Intro ==\nwords words\n",
        )
        .unwrap();
        std::fs::write(dir.path().join("flat.txt"), "== Top ==\nother words\n").unwrap();
        let articles = read_input_dir(dir.path(), &WikitextFormat::default()).unwrap();
        assert_eq!(articles.len(), 2);
        let by_id: std::collections::HashMap<_, _> = articles
            .iter()
            .map(|a| (a.id.as_str(), a.category.as_str()))
            .collect();
        assert_eq!(by_id["song"], "music");
        assert_eq!(by_id["flat"], "mixture");
    }
}

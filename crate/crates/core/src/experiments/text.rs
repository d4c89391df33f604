use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Arc;

use super::{Config, ExperimentRecord, Metric, RunOutput, SampleSize};
use crate::algos::{kspca_deflate, top_indices_desc, Mode, Restarts, RtpmConfig, RtpmOracle};
use crate::error::{Result, SpcaError};
use crate::linalg::dot;
use crate::models::{CenteredSparseData, CovOperator};

/// How the retained vocabulary is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VocabRank {
    /// Total count over the retained documents.
    TotalCount,
    /// Number of retained documents containing the word.
    DocFrequency,
}

impl VocabRank {
    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "count" => Ok(VocabRank::TotalCount),
            "docfreq" => Ok(VocabRank::DocFrequency),
            other => Err(SpcaError::param(format!("vocab_rank must be count or docfreq, got `{other}`"))),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            VocabRank::TotalCount => "count",
            VocabRank::DocFrequency => "docfreq",
        }
    }
}

/// A document-term count matrix over a reindexed vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct TextCorpus {
    pub n_docs: usize,
    pub vocab_size: usize,
    /// Per document, `(column, count)` sorted by column.
    pub counts: Vec<Vec<(usize, u32)>>,
    /// Column `j` is the `j`-th ranked word.
    pub vocabulary: Vec<String>,
    /// Original 1-based word ids, by column.
    pub word_ids: Vec<usize>,
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> SpcaError {
    SpcaError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads a UCI bag-of-words pair: a docword file (`D`, `W`, `NNZ` header
/// lines, then `docID wordID count` triples, 1-based) and a vocabulary file
/// with one word per line.
///
/// Keeps the first `n_docs` documents and the `vocab_size` best-ranked
/// words among them (ties to the smaller word id); columns follow the ranking.
pub fn load_bagofwords(
    docword: &Path,
    vocab: &Path,
    n_docs: usize,
    vocab_size: usize,
    rank: VocabRank,
) -> Result<TextCorpus> {
    if n_docs == 0 || vocab_size == 0 {
        return Err(SpcaError::param("n_docs and vocab_size must be positive"));
    }
    let file = File::open(docword).map_err(|e| SpcaError::io(docword, e))?;
    let mut header = [0usize; 3];
    let mut per_doc: Vec<Vec<(usize, u32)>> = Vec::new();
    let mut body = 0usize;
    let mut last_line = 0;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        last_line = lineno;
        let line = line.map_err(|e| SpcaError::io(docword, e))?;
        let text = line.trim();
        if lineno <= 3 {
            header[i] = text
                .parse()
                .map_err(|_| parse_err(docword, lineno, format!("header expects an integer, found `{text}`")))?;
            if lineno == 3 {
                let (d, w) = (header[0], header[1]);
                if n_docs > d {
                    return Err(SpcaError::param(format!("n_docs = {n_docs} exceeds the {d} documents in the file")));
                }
                if vocab_size > w {
                    return Err(SpcaError::param(format!("vocab_size = {vocab_size} exceeds the {w} words in the file")));
                }
                per_doc = vec![Vec::new(); n_docs];
            }
            continue;
        }
        if text.is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        let nums: Vec<u64> = fields.iter().filter_map(|f| f.parse().ok()).collect();
        if fields.len() != 3 || nums.len() != 3 {
            return Err(parse_err(docword, lineno, format!("expected `docID wordID count`, found `{text}`")));
        }
        let (doc, word, count) = (nums[0] as usize, nums[1] as usize, nums[2]);
        if doc == 0 || doc > header[0] || word == 0 || word > header[1] {
            return Err(parse_err(docword, lineno, format!("index out of range in `{text}`")));
        }
        if count == 0 || count > u32::MAX as u64 {
            return Err(parse_err(docword, lineno, format!("count must lie in [1, 2^32), found {count}")));
        }
        body += 1;
        if doc <= n_docs {
            per_doc[doc - 1].push((word, count as u32));
        }
    }
    if last_line < 3 {
        return Err(parse_err(docword, last_line + 1, "missing D, W, NNZ header lines"));
    }
    if body != header[2] {
        return Err(parse_err(docword, 3, format!("header declares NNZ = {}, body has {body} entries", header[2])));
    }
    let w = header[1];
    let words = read_vocabulary(vocab, w)?;

    let mut score = vec![0u64; w + 1];
    for doc in &mut per_doc {
        // merge repeated (doc, word) lines
        doc.sort_unstable_by_key(|e| e.0);
        doc.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 = a.1.saturating_add(b.1);
                true
            } else {
                false
            }
        });
        for &(word, c) in doc.iter() {
            score[word] += match rank {
                VocabRank::TotalCount => c as u64,
                VocabRank::DocFrequency => 1,
            };
        }
    }
    let mut order: Vec<usize> = (1..=w).collect();
    order.sort_by(|&a, &b| score[b].cmp(&score[a]).then(a.cmp(&b)));
    order.truncate(vocab_size);
    let column: HashMap<usize, usize> = order.iter().enumerate().map(|(j, &word)| (word, j)).collect();
    let counts = per_doc
        .into_iter()
        .map(|doc| {
            let mut row: Vec<(usize, u32)> =
                doc.into_iter().filter_map(|(word, c)| column.get(&word).map(|&j| (j, c))).collect();
            row.sort_unstable_by_key(|e| e.0);
            row
        })
        .collect();
    Ok(TextCorpus {
        n_docs,
        vocab_size,
        counts,
        vocabulary: order.iter().map(|&word| words[word - 1].clone()).collect(),
        word_ids: order,
    })
}

fn read_vocabulary(path: &Path, w: usize) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| SpcaError::io(path, e))?;
    let words: Vec<String> = text.lines().map(|l| l.trim().to_string()).collect();
    let trimmed = words.iter().rposition(|x| !x.is_empty()).map_or(0, |p| p + 1);
    if trimmed != w {
        return Err(parse_err(path, trimmed.min(w) + 1, format!("vocabulary has {trimmed} words, docword header says {w}")));
    }
    if let Some(p) = words[..w].iter().position(String::is_empty) {
        return Err(parse_err(path, p + 1, "empty vocabulary entry"));
    }
    Ok(words[..w].to_vec())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextOptions {
    pub k: usize,
    pub r: usize,
    pub t: usize,
    pub restart_budget: usize,
    pub top_words: usize,
}

impl Default for TextOptions {
    fn default() -> Self {
        Self {
            k: 4,
            r: 50,
            t: 50,
            restart_budget: 200,
            top_words: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TextResult {
    /// Orthonormal components, in extraction order.
    pub components: Vec<Vec<f64>>,
    /// Per component, `(word, loading)` by decreasing `|loading|`.
    pub top_words: Vec<Vec<(String, f64)>>,
    /// Restart coordinates (largest feature variance first by index order).
    pub restarts: Vec<usize>,
    /// `u^T Σ u / tr Σ` on the undeflated centered covariance.
    pub variance_fraction: Vec<f64>,
}

/// `log(1 + count)` features, implicit centering, and `k` rounds of
/// deflation with full-sample RTPM seeded on the highest-variance words.
pub fn text_pipeline(corpus: &TextCorpus, opts: &TextOptions) -> Result<TextResult> {
    if opts.k == 0 || opts.r == 0 || opts.t == 0 || opts.restart_budget == 0 {
        return Err(SpcaError::param("k, r, T and restart_budget must be positive"));
    }
    let d = corpus.vocab_size;
    let rows: Vec<Vec<(usize, f64)>> = corpus
        .counts
        .iter()
        .map(|doc| doc.iter().map(|&(j, c)| (j, (c as f64).ln_1p())).collect())
        .collect();
    let data = Arc::new(CenteredSparseData::from_rows(d, &rows)?);
    let variances = data.variances();
    let restarts = top_indices_desc(&variances, opts.restart_budget.min(d))?;
    let op = CovOperator::SparseCentered(Arc::clone(&data));
    let mut cfg = RtpmConfig::new(opts.r, opts.t, Mode::Full);
    cfg.restarts = Restarts::Indices(restarts.clone());
    let mut oracle = RtpmOracle { cfg };
    let components = kspca_deflate(&op, opts.k, &mut oracle)?;

    let trace: f64 = variances.iter().sum();
    let variance_fraction = components
        .iter()
        .map(|u| if trace > 0.0 { (dot(u, &op.apply(u)) / trace).clamp(0.0, 1.0) } else { 0.0 })
        .collect();
    let top_words = components
        .iter()
        .map(|u| {
            let mut idx: Vec<usize> = (0..d).filter(|&j| u[j] != 0.0).collect();
            idx.sort_by(|&a, &b| u[b].abs().total_cmp(&u[a].abs()).then(a.cmp(&b)));
            idx.truncate(opts.top_words);
            idx.into_iter().map(|j| (corpus.vocabulary[j].clone(), u[j])).collect()
        })
        .collect();
    Ok(TextResult {
        components,
        top_words,
        restarts,
        variance_fraction,
    })
}

/// Loads the corpus named by `docword` and `vocab` and runs the pipeline.
///
/// Keys: `docword`, `vocab`, `n_docs` (default 10000), `vocab_size`
/// (default 20000), `vocab_rank`, `k`, `r`, `T`, `restart_budget`, `top_words`.
pub fn run_text(cfg: &Config) -> Result<(RunOutput, TextResult)> {
    let defaults = TextOptions::default();
    let opts = TextOptions {
        k: cfg.usize_or("k", defaults.k)?,
        r: cfg.usize_or("r", defaults.r)?,
        t: cfg.usize_or("T", defaults.t)?,
        restart_budget: cfg.usize_or("restart_budget", defaults.restart_budget)?,
        top_words: cfg.usize_or("top_words", defaults.top_words)?,
    };
    let rank = VocabRank::from_tag(&cfg.string_or("vocab_rank", "count"))?;
    let corpus = load_bagofwords(
        Path::new(&cfg.string("docword")?),
        Path::new(&cfg.string("vocab")?),
        cfg.usize_or("n_docs", 10_000)?,
        cfg.usize_or("vocab_size", 20_000)?,
        rank,
    )?;
    let res = text_pipeline(&corpus, &opts)?;
    let records = res
        .variance_fraction
        .iter()
        .enumerate()
        .map(|(i, &vf)| {
            let nnz = res.components[i].iter().filter(|x| **x != 0.0).count();
            let rec = ExperimentRecord {
                algorithm: "rtpm".into(),
                family: "text".into(),
                d: corpus.vocab_size,
                s: nnz,
                k: opts.k,
                gamma: None,
                delta: None,
                n: SampleSize::Finite(corpus.n_docs),
                seed: 0,
                mode: Some("full".into()),
                r: Some(opts.r),
                t: Some(opts.t),
                metric: Metric::VarianceFraction,
                value: vf,
                wall_ms: 0.0,
                iterations_used: opts.t,
                flags: vec![
                    format!("component={}", i + 1),
                    format!("restart_budget={}", res.restarts.len()),
                    format!("vocab_rank={}", rank.tag()),
                    "centered".into(),
                ],
            };
            rec.check()?;
            Ok(rec)
        })
        .collect::<Result<_>>()?;
    let notes = vec![format!(
        "restarts limited to the {} highest-variance words",
        res.restarts.len()
    )];
    Ok((RunOutput { records, notes }, res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn write_corpus(dir: &Path, docs: &[Vec<(usize, u32)>], w: usize) -> (std::path::PathBuf, std::path::PathBuf) {
        let nnz: usize = docs.iter().map(Vec::len).sum();
        let mut text = format!("{}\n{w}\n{nnz}\n", docs.len());
        for (i, doc) in docs.iter().enumerate() {
            for &(word, c) in doc {
                text.push_str(&format!("{} {} {c}\n", i + 1, word));
            }
        }
        let dw = dir.join("docword.txt");
        let vb = dir.join("vocab.txt");
        std::fs::write(&dw, text).unwrap();
        let vocab: String = (1..=w).map(|j| format!("w{j}\n")).collect();
        std::fs::write(&vb, vocab).unwrap();
        (dw, vb)
    }

    #[test]
    fn tiny_fixture_counts() {
        let dir = tempfile::tempdir().unwrap();
        // word totals over docs 1-2: w1 = 3, w2 = 5, w3 = 0, w4 = 3, w5 = 1
        let docs = vec![vec![(1, 1), (2, 5)], vec![(1, 2), (4, 3), (5, 1)], vec![(3, 9)]];
        let (dw, vb) = write_corpus(dir.path(), &docs, 5);
        let c = load_bagofwords(&dw, &vb, 2, 3, VocabRank::TotalCount).unwrap();
        assert_eq!(c.word_ids, vec![2, 1, 4]);
        assert_eq!(c.vocabulary, vec!["w2", "w1", "w4"]);
        assert_eq!(c.counts, vec![vec![(0, 5), (1, 1)], vec![(1, 2), (2, 3)]]);

        let all = load_bagofwords(&dw, &vb, 3, 5, VocabRank::TotalCount).unwrap();
        assert_eq!(all.word_ids, vec![3, 2, 1, 4, 5]);
        let df = load_bagofwords(&dw, &vb, 3, 2, VocabRank::DocFrequency).unwrap();
        assert_eq!(df.word_ids, vec![1, 2]);
    }

    #[test]
    fn format_errors() {
        let dir = tempfile::tempdir().unwrap();
        let (dw, vb) = write_corpus(dir.path(), &[vec![(1, 1)], vec![(2, 2)]], 2);
        assert!(matches!(load_bagofwords(&dw, &vb, 3, 2, VocabRank::TotalCount), Err(SpcaError::Parameter(_))));
        assert!(matches!(load_bagofwords(&dw, &vb, 2, 3, VocabRank::TotalCount), Err(SpcaError::Parameter(_))));

        std::fs::write(&dw, "2\n2\n3\n1 1 1\n2 2 2\n").unwrap();
        let err = load_bagofwords(&dw, &vb, 2, 2, VocabRank::TotalCount).unwrap_err();
        assert!(matches!(err, SpcaError::Parse { line: 3, .. }), "{err}");

        std::fs::write(&dw, "2\n2\n2\n1 1 1\n2 x 2\n").unwrap();
        let err = load_bagofwords(&dw, &vb, 2, 2, VocabRank::TotalCount).unwrap_err();
        assert!(matches!(err, SpcaError::Parse { line: 5, .. }), "{err}");

        std::fs::write(&dw, "2\n2\n1\n1 3 1\n").unwrap();
        assert!(matches!(load_bagofwords(&dw, &vb, 2, 2, VocabRank::TotalCount), Err(SpcaError::Parse { line: 4, .. })));
        let missing = dir.path().join("nope");
        assert!(matches!(load_bagofwords(&missing, &vb, 1, 1, VocabRank::TotalCount), Err(SpcaError::Io { .. })));
    }

    fn planted_topics(n: usize, seed: u64) -> Vec<Vec<(usize, u32)>> {
        // topic A = words 1..=5, topic B = words 6..=10, present independently;
        // words 11..=40 are background noise
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut doc = Vec::new();
                let a = rng.random::<f64>() < 0.5;
                let b = rng.random::<f64>() < 0.3;
                for w in 1..=40usize {
                    let c: u32 = if w <= 5 && a {
                        rng.random_range(4..9)
                    } else if (6..=10).contains(&w) && b {
                        rng.random_range(2..5)
                    } else if w > 10 && rng.random::<f64>() < 0.2 {
                        1
                    } else {
                        0
                    };
                    if c > 0 {
                        doc.push((w, c));
                    }
                }
                doc
            })
            .collect()
    }

    #[test]
    fn planted_topics_are_recovered() {
        let dir = tempfile::tempdir().unwrap();
        let docs = planted_topics(600, 4);
        let (dw, vb) = write_corpus(dir.path(), &docs, 40);
        let corpus = load_bagofwords(&dw, &vb, 600, 40, VocabRank::TotalCount).unwrap();
        let opts = TextOptions {
            k: 2,
            r: 5,
            t: 30,
            restart_budget: 20,
            top_words: 5,
        };
        let res = text_pipeline(&corpus, &opts).unwrap();
        let set = |i: usize| {
            let mut w: Vec<String> = res.top_words[i].iter().map(|(w, _)| w.clone()).collect();
            w.sort();
            w
        };
        let a: Vec<String> = (1..=5).map(|j| format!("w{j}")).collect();
        let mut b: Vec<String> = (6..=10).map(|j| format!("w{j}")).collect();
        b.sort();
        assert_eq!(set(0), a);
        assert_eq!(set(1), b);
        assert!(crate::algos::orthonormality_error(&res.components) < 1e-8);
        let union = (0..40).filter(|&j| res.components.iter().any(|c| c[j] != 0.0)).count();
        assert!(union <= opts.k * opts.r);
        assert!(res.components[0].iter().filter(|x| **x != 0.0).count() <= opts.r);
    }

    #[test]
    fn untruncated_single_component_is_the_top_eigenvector() {
        let dir = tempfile::tempdir().unwrap();
        let docs = planted_topics(200, 9);
        let (dw, vb) = write_corpus(dir.path(), &docs, 40);
        let corpus = load_bagofwords(&dw, &vb, 200, 40, VocabRank::TotalCount).unwrap();
        let opts = TextOptions {
            k: 1,
            r: 40,
            t: 300,
            restart_budget: 40,
            top_words: 3,
        };
        let res = text_pipeline(&corpus, &opts).unwrap();
        let rows: Vec<Vec<(usize, f64)>> = corpus
            .counts
            .iter()
            .map(|d| d.iter().map(|&(j, c)| (j, (c as f64).ln_1p())).collect())
            .collect();
        let dense = CovOperator::SparseCentered(Arc::new(CenteredSparseData::from_rows(40, &rows).unwrap()))
            .to_dense()
            .unwrap();
        let top = crate::linalg::top_eig(&dense).unwrap().pair.vector;
        let s2 = crate::linalg::sin2_angle(&res.components[0], &top).unwrap();
        assert!(s2 < 1e-8, "{s2}");
    }

    #[test]
    fn centered_operator_matches_dense_centering() {
        let docs = planted_topics(80, 2);
        let rows: Vec<Vec<(usize, f64)>> = docs
            .iter()
            .map(|d| d.iter().map(|&(j, c)| (j - 1, (c as f64).ln_1p())).collect())
            .collect();
        let data = CenteredSparseData::from_rows(40, &rows).unwrap();
        let mut x = vec![vec![0.0; 40]; rows.len()];
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                x[i][j] = v;
            }
        }
        let mu: Vec<f64> = (0..40).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / 80.0).collect();
        let op = CovOperator::SparseCentered(Arc::new(data));
        let u: Vec<f64> = (0..40).map(|j| ((j * 13 % 7) as f64 - 3.0) / 5.0).collect();
        let got = op.apply(&u);
        for a in 0..40 {
            let want: f64 = x
                .iter()
                .map(|r| (r[a] - mu[a]) * (0..40).map(|b| (r[b] - mu[b]) * u[b]).sum::<f64>())
                .sum::<f64>()
                / 80.0;
            assert!((got[a] - want).abs() < 1e-8);
        }
    }
}

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use log::warn;

use super::Hypergraph;
use crate::error::{Error, Result};
use crate::nnkit::Dense;

/// What the loader did to the input besides parsing it.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadReport {
    pub node_count: usize,
    pub hyperedge_count: usize,
    pub mean_hyperedge_size: f64,
    /// Lines that repeated a node ID (1-based line numbers).
    pub deduplicated_lines: Vec<usize>,
    /// Lines dropped because fewer than two distinct nodes remained.
    pub rejected_small: usize,
    /// `(original, compacted)` pairs when node IDs had gaps.
    pub remap: Option<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedHyperedges {
    pub hyperedges: Vec<Vec<usize>>,
    pub deduplicated_lines: Vec<usize>,
    pub rejected_small: usize,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parse the hyperedge text format: one hyperedge per line, whitespace-separated
/// node IDs, `#` comment lines and blank lines ignored.
pub fn parse_hyperedge_text(text: &str, file: &str) -> Result<ParsedHyperedges> {
    let mut out = ParsedHyperedges { hyperedges: Vec::new(), deduplicated_lines: Vec::new(), rejected_small: 0 };
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut ids = line
            .split_ascii_whitespace()
            .map(|t| {
                t.parse::<usize>().map_err(|_| Error::Parse {
                    file: file.to_string(),
                    line: ln + 1,
                    msg: format!("expected a non-negative integer node ID, found {t:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let raw = ids.len();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != raw {
            warn!("{file}:{}: duplicate node IDs removed", ln + 1);
            out.deduplicated_lines.push(ln + 1);
        }
        if ids.len() < 2 {
            out.rejected_small += 1;
            continue;
        }
        out.hyperedges.push(ids);
    }
    Ok(out)
}

/// Parse a feature file: header `n d`, then `n` rows of `d` reals.
pub fn parse_feature_text(text: &str, file: &str) -> Result<Dense> {
    let perr = |line: usize, msg: String| Error::Parse { file: file.to_string(), line, msg };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hl, header) = lines.next().ok_or_else(|| perr(1, "missing `n d` header".into()))?;
    let dims: Vec<usize> = header
        .split_ascii_whitespace()
        .map(|t| t.parse().map_err(|_| perr(hl + 1, format!("bad header token {t:?}"))))
        .collect::<Result<_>>()?;
    let [n, d] = dims[..] else {
        return Err(perr(hl + 1, "header must be `n d`".into()));
    };
    let mut data = Vec::with_capacity(n * d);
    let mut rows = 0;
    for (ln, line) in lines {
        let before = data.len();
        for t in line.split_ascii_whitespace() {
            let v: f64 = t.parse().map_err(|_| perr(ln + 1, format!("bad real {t:?}")))?;
            if !v.is_finite() {
                return Err(perr(ln + 1, "non-finite feature".into()));
            }
            data.push(v);
        }
        if data.len() - before != d {
            return Err(perr(ln + 1, format!("expected {d} values, got {}", data.len() - before)));
        }
        rows += 1;
    }
    if rows != n {
        return Err(perr(0, format!("header says {n} rows, found {rows}")));
    }
    Dense::from_vec(n, d, data)
}

pub fn load_features(path: &Path) -> Result<Dense> {
    parse_feature_text(&read(path)?, &path.display().to_string())
}

/// Turn parsed hyperedges into a validated hypergraph.
///
/// With `features`, node IDs index feature rows directly and nodes that appear in
/// no hyperedge are kept. Without, the node set is the set of IDs that appear;
/// gaps are compacted (order-preserving) and reported.
pub fn build_hypergraph(parsed: ParsedHyperedges, features: Option<Dense>) -> Result<(Hypergraph, LoadReport)> {
    let ParsedHyperedges { mut hyperedges, deduplicated_lines, rejected_small } = parsed;
    if rejected_small > 0 {
        warn!("{rejected_small} hyperedges with fewer than two distinct nodes rejected");
    }
    let (g, remap) = match features {
        Some(f) => (Hypergraph::new(f.rows(), hyperedges, f)?, None),
        None => {
            let ids: BTreeSet<usize> = hyperedges.iter().flatten().copied().collect();
            let n = ids.len();
            let contiguous = ids.iter().enumerate().all(|(k, &v)| k == v);
            let remap = if contiguous {
                None
            } else {
                let pairs: Vec<(usize, usize)> = ids.iter().enumerate().map(|(k, &v)| (v, k)).collect();
                let lookup: std::collections::HashMap<usize, usize> = pairs.iter().copied().collect();
                for e in &mut hyperedges {
                    for v in e.iter_mut() {
                        *v = lookup[v];
                    }
                }
                warn!("node IDs had gaps; compacted {n} IDs");
                Some(pairs)
            };
            (Hypergraph::with_degree_features(n, hyperedges)?, remap)
        }
    };
    let report = LoadReport {
        node_count: g.node_count(),
        hyperedge_count: g.hyperedge_count(),
        mean_hyperedge_size: g.mean_hyperedge_size(),
        deduplicated_lines,
        rejected_small,
        remap,
    };
    Ok((g, report))
}

pub fn load_hypergraph(edge_file: &Path, feature_file: Option<&Path>) -> Result<(Hypergraph, LoadReport)> {
    let parsed = parse_hyperedge_text(&read(edge_file)?, &edge_file.display().to_string())?;
    let features = feature_file.map(load_features).transpose()?;
    build_hypergraph(parsed, features)
}

pub fn hyperedges_to_text<'a>(edges: impl IntoIterator<Item = &'a [usize]>) -> String {
    let mut s = String::new();
    for e in edges {
        let mut first = true;
        for v in e {
            if !first {
                s.push(' ');
            }
            first = false;
            let _ = write!(s, "{v}");
        }
        s.push('\n');
    }
    s
}

pub fn save_hyperedges<'a>(path: &Path, edges: impl IntoIterator<Item = &'a [usize]>) -> Result<()> {
    std::fs::write(path, hyperedges_to_text(edges)).map_err(|e| Error::io(path, e))
}

pub fn save_features(path: &Path, features: &Dense) -> Result<()> {
    let mut s = format!("{} {}\n", features.rows(), features.cols());
    for i in 0..features.rows() {
        let mut first = true;
        for v in features.row(i) {
            if !first {
                s.push(' ');
            }
            first = false;
            let _ = write!(s, "{v:e}");
        }
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn save_hypergraph(g: &Hypergraph, edge_file: &Path, feature_file: &Path) -> Result<()> {
    save_hyperedges(edge_file, g.hyperedges().iter().map(Vec::as_slice))?;
    save_features(feature_file, g.features())
}

pub fn write_remap(path: &Path, pairs: &[(usize, usize)]) -> Result<()> {
    let mut s = String::new();
    for (a, b) in pairs {
        let _ = writeln!(s, "{a} {b}");
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn load_str(text: &str) -> Result<(Hypergraph, LoadReport)> {
        build_hypergraph(parse_hyperedge_text(text, "mem")?, None)
    }

    #[test]
    fn smallest_valid_input() {
        let (g, r) = load_str("0 1 2\n").unwrap();
        assert_eq!((g.node_count(), g.hyperedge_count()), (3, 1));
        assert!(r.remap.is_none());
    }

    #[test]
    fn duplicate_node_is_deduplicated_with_report() {
        let (g, r) = load_str("# comment\n5 5 7\n").unwrap();
        assert_eq!(r.deduplicated_lines, vec![2]);
        // IDs 5 and 7 are compacted to 0 and 1
        assert_eq!(g.hyperedge(0), &[0, 1]);
        assert_eq!(r.remap, Some(vec![(5, 0), (7, 1)]));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        match load_str("0 1\n2 x 3\n") {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(load_str("0 -1\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn size_one_lines_are_rejected_and_counted() {
        let (g, r) = load_str("0 1\n4\n2 2\n1 2\n").unwrap();
        assert_eq!(g.hyperedge_count(), 2);
        assert_eq!(r.rejected_small, 2);
    }

    #[test]
    fn features_define_the_node_universe() {
        let f = parse_feature_text("4 2\n1 0\n0 1\n1 1\n0 0\n", "f").unwrap();
        let parsed = parse_hyperedge_text("0 2\n", "e").unwrap();
        let (g, r) = build_hypergraph(parsed, Some(f.clone())).unwrap();
        assert_eq!(g.node_count(), 4);
        assert!(r.remap.is_none());
        let parsed = parse_hyperedge_text("0 9\n", "e").unwrap();
        assert!(build_hypergraph(parsed, Some(f)).is_err());
    }

    #[test]
    fn feature_file_errors() {
        assert!(parse_feature_text("2 2\n1 0\n", "f").is_err());
        assert!(parse_feature_text("1 2\n1 0 3\n", "f").is_err());
        assert!(parse_feature_text("1 2\n1 nan\n", "f").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn save_then_load_round_trips(
            edges in proptest::collection::vec(proptest::collection::btree_set(0usize..40, 2..7), 1..30),
            gap in 0usize..5,
        ) {
            // spread IDs out so the first load has to compact
            let text: String = edges
                .iter()
                .map(|e| e.iter().map(|v| (v * (gap + 1)).to_string()).collect::<Vec<_>>().join(" ") + "\n")
                .collect();
            let (g, _) = load_str(&text).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let (ep, fp) = (dir.path().join("e.txt"), dir.path().join("f.txt"));
            save_hypergraph(&g, &ep, &fp).unwrap();
            let (back, report) = load_hypergraph(&ep, Some(&fp)).unwrap();
            prop_assert!(report.remap.is_none());
            prop_assert_eq!(back, g);
        }
    }
}

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::Graph;
use crate::error::{Error, Result};
use crate::fsutil::atomic_write;

/// Reads an edge list of dense integer ids.
///
/// One edge per line as two whitespace-separated non-negative integers.
/// Lines starting with `#` are comments, except the directive
/// `# nodes: N`, which fixes the node count (otherwise `1 + max id`).
/// Duplicate and reversed lines collapse to one edge; self-loops are errors.
pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_edge_list(&text, path)
}

fn nodes_directive(line: &str) -> Option<&str> {
    let body = line.trim_start_matches('#').trim();
    let (key, value) = body.split_once(':')?;
    key.trim().eq_ignore_ascii_case("nodes").then_some(value.trim())
}

pub fn parse_edge_list(text: &str, source: &Path) -> Result<Graph> {
    let err = |line: usize, msg: String| Error::Parse {
        path: source.to_path_buf(),
        line,
        msg,
    };
    let mut declared_n: Option<usize> = None;
    let mut edges = BTreeSet::new();
    let mut max_id = 0usize;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some(v) = nodes_directive(line) {
                let n = v
                    .parse::<usize>()
                    .map_err(|_| err(lineno, format!("bad node count {v:?}")))?;
                declared_n = Some(n);
            }
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(err(lineno, format!("expected two node ids, found {}", tokens.len())));
        }
        let mut ids = [0usize; 2];
        for (slot, tok) in ids.iter_mut().zip(&tokens) {
            if tok.starts_with('-') {
                return Err(err(lineno, format!("negative node id {tok}")));
            }
            *slot = tok
                .parse()
                .map_err(|_| err(lineno, format!("invalid node id {tok:?}")))?;
        }
        let e = super::edge(ids[0], ids[1]).ok_or_else(|| err(lineno, format!("self-loop on node {}", ids[0])))?;
        max_id = max_id.max(e.1);
        edges.insert(e);
    }
    if edges.is_empty() {
        return Err(Error::InvalidGraph(format!("{}: no edges", source.display())));
    }
    let n = match declared_n {
        Some(n) if n <= max_id => {
            return Err(Error::InvalidGraph(format!(
                "{}: declared {n} nodes but found id {max_id}",
                source.display()
            )))
        }
        Some(n) => n,
        None => max_id + 1,
    };
    Ok(Graph::from_set(n, edges))
}

/// Reads an edge list with arbitrary node labels and remaps them to dense
/// ids. Labels that all parse as integers are ordered numerically, otherwise
/// lexicographically. Returns the graph and `labels[id]`.
pub fn ingest_edge_list(path: impl AsRef<Path>) -> Result<(Graph, Vec<String>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let err = |line: usize, msg: String| Error::Parse {
        path: PathBuf::from(path),
        line,
        msg,
    };
    let mut raw_edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(err(idx + 1, format!("expected two node labels, found {}", tokens.len())));
        }
        if tokens[0] == tokens[1] {
            return Err(err(idx + 1, format!("self-loop on node {}", tokens[0])));
        }
        raw_edges.push((tokens[0].to_owned(), tokens[1].to_owned()));
    }
    if raw_edges.is_empty() {
        return Err(Error::InvalidGraph(format!("{}: no edges", path.display())));
    }

    let mut labels: Vec<String> = raw_edges
        .iter()
        .flat_map(|(a, b)| [a.clone(), b.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let numeric: Option<Vec<i128>> = labels.iter().map(|l| l.parse().ok()).collect();
    if let Some(keys) = numeric {
        let mut paired: Vec<_> = keys.into_iter().zip(labels).collect();
        paired.sort();
        labels = paired.into_iter().map(|(_, l)| l).collect();
    }
    let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let edges = raw_edges.iter().map(|(a, b)| (index[a.as_str()], index[b.as_str()]));
    let graph = Graph::new(labels.len(), edges)?;
    Ok((graph, labels))
}

pub fn write_edge_list(graph: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::with_capacity(graph.num_edges() * 10 + 16);
    writeln!(out, "# nodes: {}", graph.n()).unwrap();
    for (u, v) in graph.edges() {
        writeln!(out, "{u} {v}").unwrap();
    }
    atomic_write(path.as_ref(), out.as_bytes())
}

/// Sidecar `id<TAB>label` file for a remapped edge list.
pub fn write_node_map(labels: &[String], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for (i, l) in labels.iter().enumerate() {
        writeln!(out, "{i}\t{l}").unwrap();
    }
    atomic_write(path.as_ref(), out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Graph> {
        parse_edge_list(text, Path::new("test.edges"))
    }

    #[test]
    fn simple_path() {
        let g = parse("0 1\n1 2").unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edges().iter().copied().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn undirected_dedup() {
        let g = parse("0 1\n1 0\n0 1\n").unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.num_edges(), 1);
    }

    #[test]
    fn comments_and_node_directive() {
        let g = parse("# a comment\n# nodes: 10\n\n3 4\n").unwrap();
        assert_eq!(g.n(), 10);
        assert!(parse("# nodes: 3\n0 5\n").is_err());
    }

    #[test]
    fn errors() {
        assert!(matches!(parse("0 x"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("0 1\n-1 2"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("0 1\n2 2"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("0 1 2"), Err(Error::Parse { .. })));
        assert!(matches!(parse("# only comments\n"), Err(Error::InvalidGraph(_))));
    }

    #[test]
    fn write_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.edges");
        let g = Graph::new(7, [(0, 3), (5, 2), (1, 6)]).unwrap();
        write_edge_list(&g, &p).unwrap();
        assert_eq!(load_edge_list(&p).unwrap(), g);
    }

    #[test]
    fn ingest_remaps_labels() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.txt");
        std::fs::write(&p, "10 2\n2 7\n% pajek style comment\n7 10\n").unwrap();
        let (g, labels) = ingest_edge_list(&p).unwrap();
        assert_eq!(labels, vec!["2", "7", "10"]);
        assert_eq!(g.n(), 3);
        assert!(g.has_edge(0, 2) && g.has_edge(0, 1) && g.has_edge(1, 2));

        std::fs::write(&p, "bob alice\ncarol bob\n").unwrap();
        let (g, labels) = ingest_edge_list(&p).unwrap();
        assert_eq!(labels, vec!["alice", "bob", "carol"]);
        assert!(g.has_edge(0, 1) && g.has_edge(1, 2));
    }
}

//! Plain-text graph format.
//!
//! ```text
//! # family=sdn params=d=3,s=5,N=6 seed=1
//! # bipartite 36
//! 72 78
//! 0 6
//! ...
//! ```
//!
//! The first non-comment line is `n m`, followed by `m` lines `u v`. Lines
//! starting with `#` are comments; `# bipartite k` records that `0..k` is one
//! side, which readers treat as a hint only.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Clone, Debug)]
pub struct GraphFile {
    pub graph: Graph,
    pub bipartite_hint: Option<usize>,
    /// Comment lines other than the bipartite hint, without the leading `#`.
    pub comments: Vec<String>,
}

pub fn parse_graph(text: &str) -> Result<GraphFile> {
    let mut header: Option<(usize, usize)> = None;
    let mut edges = Vec::new();
    let mut hint = None;
    let mut comments = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(k) = rest.strip_prefix("bipartite") {
                let k = k
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Parse { line: line_no, msg: format!("bad bipartite hint `{rest}`") })?;
                hint = Some(k);
            } else {
                comments.push(rest.to_string());
            }
            continue;
        }
        let nums = parse_pair(line, line_no)?;
        match header {
            None => header = Some(nums),
            Some((n, _)) => {
                if nums.0 >= n || nums.1 >= n {
                    return Err(Error::Parse { line: line_no, msg: format!("vertex out of range for n={n}") });
                }
                edges.push(nums);
            }
        }
    }
    let (n, m) = header.ok_or(Error::Parse { line: 0, msg: "missing `n m` header".into() })?;
    if edges.len() != m {
        return Err(Error::Parse { line: 0, msg: format!("header says {m} edges, found {}", edges.len()) });
    }
    let graph = Graph::new(n, edges).map_err(|e| Error::Parse { line: 0, msg: e.to_string() })?;
    Ok(GraphFile { graph, bipartite_hint: hint, comments })
}

fn parse_pair(line: &str, line_no: usize) -> Result<(usize, usize)> {
    let mut it = line.split_whitespace();
    let mut next = || -> Result<usize> {
        it.next()
            .ok_or(Error::Parse { line: line_no, msg: "expected two integers".into() })?
            .parse::<usize>()
            .map_err(|e| Error::Parse { line: line_no, msg: e.to_string() })
    };
    let a = next()?;
    let b = next()?;
    if it.next().is_some() {
        return Err(Error::Parse { line: line_no, msg: "trailing tokens".into() });
    }
    Ok((a, b))
}

pub fn write_graph(graph: &Graph, bipartite_hint: Option<usize>, comments: &[String]) -> String {
    let mut out = String::with_capacity(16 + graph.m() * 10);
    let _ = writeln!(out, "{} {}", graph.n(), graph.m());
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    if let Some(k) = bipartite_hint {
        let _ = writeln!(out, "# bipartite {k}");
    }
    for &(u, v) in graph.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    out
}

pub fn read_graph_file(path: &std::path::Path) -> Result<GraphFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_graph(&text)
}
